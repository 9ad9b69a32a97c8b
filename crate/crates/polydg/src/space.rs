//! Broken polynomial spaces on polygonal meshes.
//!
//! Each cell carries scaled monomials ((x-x_K)/h_K)^a ((y-y_K)/h_K)^b with
//! a+b <= k, L2(K)-orthonormalized through a Cholesky factorization of the
//! Gram matrix. Degrees of freedom are fully discontinuous: no coupling
//! between cells. Basis values and gradients at the cell and edge quadrature
//! points are cached at build time, since assembly revisits them every step.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mesh::PolyMesh;
use crate::quadrature::{self, QuadratureRule};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Monomial exponents (a, b) with a + b <= k, graded order.
fn monomial_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=k as u32 {
        for a in (0..=total).rev() {
            out.push((a, total - a));
        }
    }
    out
}

/// Per-cell basis metadata: centroid, diameter scale and the orthonormalizing
/// lower-triangular coefficient matrix (row-major ndof x ndof).
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub centroid: Point2,
    pub scale: f64,
    coeff: Vec<f64>,
}

/// Cached volume quadrature and basis table for one cell.
#[derive(Debug, Clone)]
pub struct CellQuad {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    /// phi[q * ndof + i]
    pub phi: Vec<f64>,
    /// grad[q * ndof + i]
    pub grad: Vec<[f64; 2]>,
}

/// Basis traces of one adjacent cell on an edge's quadrature points.
#[derive(Debug, Clone)]
pub struct EdgeTrace {
    pub phi: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
}

/// Cached edge quadrature with traces from the first (and, on interior
/// edges, second) adjacent cell.
#[derive(Debug, Clone)]
pub struct EdgeQuad {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub side1: EdgeTrace,
    pub side2: Option<EdgeTrace>,
}

/// The broken space V_h^k over a polygonal mesh.
pub struct BrokenSpace {
    pub mesh: PolyMesh,
    pub k: usize,
    pub dofs_per_cell: usize,
    exponents: Vec<(u32, u32)>,
    pub cell_basis: Vec<CellBasis>,
    pub cell_quads: Vec<CellQuad>,
    pub edge_quads: Vec<EdgeQuad>,
}

/// One time level of a discrete field: complex coefficients over the global
/// DoF vector, tagged with its model time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoefficients {
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl FieldCoefficients {
    pub fn zeros(space: &BrokenSpace, t: f64) -> Self {
        FieldCoefficients {
            values: vec![Complex64::new(0.0, 0.0); space.total_dofs()],
            t,
        }
    }

    pub fn l2_norm_of_vector(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// On-disk field schema with a space fingerprint.
#[derive(Serialize, Deserialize)]
struct FieldFile {
    mesh_hash: String,
    k: usize,
    t: f64,
    values: Vec<[f64; 2]>,
}

/// Build the broken space of degree `k` in {1, 2, 3} over `mesh`.
pub fn build_space(mesh: PolyMesh, k: usize) -> Result<BrokenSpace> {
    if !(1..=3).contains(&k) {
        return Err(Error::invalid(format!(
            "polynomial degree k must be 1, 2 or 3, got {k}"
        )));
    }
    let exponents = monomial_exponents(k);
    let ndof = exponents.len();
    let vol_degree = quadrature::default_volume_degree(k);
    let edge_degree = quadrature::default_edge_degree(k);

    let mut cell_basis = Vec::with_capacity(mesh.n_cells());
    let mut cell_quads = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let loop_pts = mesh.cell_loop(c);
        let centroid = crate::geometry::centroid(&loop_pts);
        let scale = mesh.cell_diameters[c];
        let rule = quadrature::volume_rule(&loop_pts, vol_degree)?;
        let basis = orthonormalize(&rule, centroid, scale, &exponents)?;
        let (phi, grad) = tabulate(&basis, &exponents, &rule.points);
        cell_quads.push(CellQuad {
            points: rule.points,
            weights: rule.weights,
            phi,
            grad,
        });
        cell_basis.push(basis);
    }

    let mut edge_quads = Vec::with_capacity(mesh.edges.len());
    for e in &mesh.edges {
        let a = mesh.vertices[e.vertices[0]];
        let b = mesh.vertices[e.vertices[1]];
        let rule = quadrature::edge_rule(a, b, edge_degree);
        let (phi1, grad1) = tabulate(&cell_basis[e.cells.0], &exponents, &rule.points);
        let side2 = e.cells.1.map(|c2| {
            let (phi, grad) = tabulate(&cell_basis[c2], &exponents, &rule.points);
            EdgeTrace { phi, grad }
        });
        edge_quads.push(EdgeQuad {
            points: rule.points,
            weights: rule.weights,
            side1: EdgeTrace {
                phi: phi1,
                grad: grad1,
            },
            side2,
        });
    }

    Ok(BrokenSpace {
        mesh,
        k,
        dofs_per_cell: ndof,
        exponents,
        cell_basis,
        cell_quads,
        edge_quads,
    })
}

/// Gram matrix of the scaled monomials under `rule`, Cholesky-factored into
/// the orthonormalizing coefficients C = L^{-1}.
fn orthonormalize(
    rule: &QuadratureRule,
    centroid: Point2,
    scale: f64,
    exponents: &[(u32, u32)],
) -> Result<CellBasis> {
    let ndof = exponents.len();
    let mut gram = vec![0.0f64; ndof * ndof];
    let mut mono = vec![0.0f64; ndof];
    for (q, &p) in rule.points.iter().enumerate() {
        let s = (p.x - centroid.x) / scale;
        let t = (p.y - centroid.y) / scale;
        for (i, &(a, b)) in exponents.iter().enumerate() {
            mono[i] = s.powi(a as i32) * t.powi(b as i32);
        }
        let w = rule.weights[q];
        for i in 0..ndof {
            for j in 0..=i {
                gram[i * ndof + j] += w * mono[i] * mono[j];
            }
        }
    }
    for i in 0..ndof {
        for j in (i + 1)..ndof {
            gram[i * ndof + j] = gram[j * ndof + i];
        }
    }
    // Cholesky: gram = L L^T.
    let mut l = vec![0.0f64; ndof * ndof];
    for i in 0..ndof {
        for j in 0..=i {
            let mut sum = gram[i * ndof + j];
            for p in 0..j {
                sum -= l[i * ndof + p] * l[j * ndof + p];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::geometry(
                        "cell Gram matrix is not positive definite",
                    ));
                }
                l[i * ndof + i] = sum.sqrt();
            } else {
                l[i * ndof + j] = sum / l[j * ndof + j];
            }
        }
    }
    // C = L^{-1} by forward substitution on the identity.
    let mut coeff = vec![0.0f64; ndof * ndof];
    for col in 0..ndof {
        for i in col..ndof {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for p in col..i {
                sum -= l[i * ndof + p] * coeff[p * ndof + col];
            }
            coeff[i * ndof + col] = sum / l[i * ndof + i];
        }
    }
    Ok(CellBasis {
        centroid,
        scale,
        coeff,
    })
}

/// Values and gradients of the orthonormalized basis at arbitrary points.
fn tabulate(
    basis: &CellBasis,
    exponents: &[(u32, u32)],
    points: &[Point2],
) -> (Vec<f64>, Vec<[f64; 2]>) {
    let ndof = exponents.len();
    let mut phi = vec![0.0f64; points.len() * ndof];
    let mut grad = vec![[0.0f64; 2]; points.len() * ndof];
    let inv = 1.0 / basis.scale;
    let mut mono = vec![0.0f64; ndof];
    let mut dmono = vec![[0.0f64; 2]; ndof];
    for (q, &p) in points.iter().enumerate() {
        let s = (p.x - basis.centroid.x) * inv;
        let t = (p.y - basis.centroid.y) * inv;
        for (i, &(a, b)) in exponents.iter().enumerate() {
            let sa = s.powi(a as i32);
            let tb = t.powi(b as i32);
            mono[i] = sa * tb;
            let ds = if a == 0 {
                0.0
            } else {
                a as f64 * s.powi(a as i32 - 1) * tb * inv
            };
            let dt = if b == 0 {
                0.0
            } else {
                b as f64 * sa * t.powi(b as i32 - 1) * inv
            };
            dmono[i] = [ds, dt];
        }
        for i in 0..ndof {
            let mut v = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..=i {
                let cij = basis.coeff[i * ndof + j];
                v += cij * mono[j];
                gx += cij * dmono[j][0];
                gy += cij * dmono[j][1];
            }
            phi[q * ndof + i] = v;
            grad[q * ndof + i] = [gx, gy];
        }
    }
    (phi, grad)
}

impl BrokenSpace {
    pub fn total_dofs(&self) -> usize {
        self.mesh.n_cells() * self.dofs_per_cell
    }

    pub fn cell_offset(&self, cell: usize) -> usize {
        cell * self.dofs_per_cell
    }

    /// Block offsets (per-cell DoF blocks) for preconditioners.
    pub fn block_offsets(&self) -> Vec<usize> {
        (0..=self.mesh.n_cells())
            .map(|c| c * self.dofs_per_cell)
            .collect()
    }

    /// Basis values and gradients of `cell` at arbitrary points.
    pub fn eval_basis(&self, cell: usize, points: &[Point2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        tabulate(&self.cell_basis[cell], &self.exponents, points)
    }

    /// Evaluate a discrete field (values and broken gradients) on one cell.
    pub fn eval_field(
        &self,
        coeffs: &FieldCoefficients,
        cell: usize,
        points: &[Point2],
    ) -> (Vec<Complex64>, Vec<[Complex64; 2]>) {
        let (phi, grad) = self.eval_basis(cell, points);
        let ndof = self.dofs_per_cell;
        let off = self.cell_offset(cell);
        let mut values = vec![Complex64::new(0.0, 0.0); points.len()];
        let mut gradients = vec![[Complex64::new(0.0, 0.0); 2]; points.len()];
        for q in 0..points.len() {
            for i in 0..ndof {
                let c = coeffs.values[off + i];
                values[q] += c * phi[q * ndof + i];
                gradients[q][0] += c * grad[q * ndof + i][0];
                gradients[q][1] += c * grad[q * ndof + i][1];
            }
        }
        (values, gradients)
    }

    /// Cellwise L2-orthogonal projection of a pointwise complex function.
    pub fn l2_project(&self, f: impl Fn(Point2) -> Complex64) -> FieldCoefficients {
        let ndof = self.dofs_per_cell;
        let mut values = vec![Complex64::new(0.0, 0.0); self.total_dofs()];
        for c in 0..self.mesh.n_cells() {
            let cq = &self.cell_quads[c];
            let off = self.cell_offset(c);
            for (q, &p) in cq.points.iter().enumerate() {
                let fv = f(p) * cq.weights[q];
                for i in 0..ndof {
                    values[off + i] += fv * cq.phi[q * ndof + i];
                }
            }
        }
        FieldCoefficients { values, t: 0.0 }
    }

    /// Evaluate a field at the cached volume quadrature points of one cell.
    pub fn field_at_cell_quad(&self, coeffs: &FieldCoefficients, cell: usize) -> Vec<Complex64> {
        let ndof = self.dofs_per_cell;
        let off = self.cell_offset(cell);
        let cq = &self.cell_quads[cell];
        let npts = cq.points.len();
        let mut out = vec![Complex64::new(0.0, 0.0); npts];
        for (q, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..ndof {
                acc += coeffs.values[off + i] * cq.phi[q * ndof + i];
            }
            *o = acc;
        }
        out
    }

    pub fn save_field(&self, field: &FieldCoefficients, path: &Path) -> Result<()> {
        let file = FieldFile {
            mesh_hash: format!("{:016x}", self.mesh.fingerprint()),
            k: self.k,
            t: field.t,
            values: field.values.iter().map(|v| [v.re, v.im]).collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load_field(&self, path: &Path) -> Result<FieldCoefficients> {
        let text = std::fs::read_to_string(path)?;
        let file: FieldFile = serde_json::from_str(&text)?;
        let expect = format!("{:016x}", self.mesh.fingerprint());
        if file.mesh_hash != expect || file.k != self.k {
            return Err(Error::invalid(format!(
                "field fingerprint mismatch: file ({}, k={}) vs space ({}, k={})",
                file.mesh_hash, file.k, expect, self.k
            )));
        }
        if file.values.len() != self.total_dofs() {
            return Err(Error::invalid("field length does not match space"));
        }
        Ok(FieldCoefficients {
            values: file.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            t: file.t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_quad_grid, generate_structured_nonconvex};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dof_counts_match_degree() {
        let mesh = generate_quad_grid(2).unwrap();
        let s1 = build_space(mesh.clone(), 1).unwrap();
        assert_eq!(s1.dofs_per_cell, 3);
        let s3 = build_space(mesh, 3).unwrap();
        assert_eq!(s3.dofs_per_cell, 10);
        assert_eq!(s3.total_dofs(), 4 * 10);
    }

    #[test]
    fn unsupported_degree_rejected() {
        let mesh = generate_quad_grid(2).unwrap();
        assert!(build_space(mesh.clone(), 0).is_err());
        assert!(build_space(mesh, 4).is_err());
    }

    #[test]
    fn per_cell_mass_is_identity() {
        let mesh = generate_structured_nonconvex(4).unwrap();
        let space = build_space(mesh, 2).unwrap();
        let nd = space.dofs_per_cell;
        for c in 0..space.mesh.n_cells() {
            let cq = &space.cell_quads[c];
            for i in 0..nd {
                for j in 0..nd {
                    let mut m = 0.0;
                    for q in 0..cq.points.len() {
                        m += cq.weights[q] * cq.phi[q * nd + i] * cq.phi[q * nd + j];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (m - expect).abs() < 1e-10,
                        "cell {c} mass[{i}][{j}] = {m}"
                    );
                }
            }
        }
    }

    #[test]
    fn first_basis_function_is_constant() {
        let mesh = generate_quad_grid(2).unwrap();
        let space = build_space(mesh, 2).unwrap();
        let pts = [Point2::new(0.1, 0.2), Point2::new(0.3, 0.4)];
        let (phi, grad) = space.eval_basis(0, &pts);
        let nd = space.dofs_per_cell;
        assert!((phi[0] - phi[nd]).abs() < 1e-13);
        assert!(grad[0][0].abs() < 1e-13 && grad[0][1].abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mesh = generate_structured_nonconvex(4).unwrap();
        let space = build_space(mesh, 3).unwrap();
        let nd = space.dofs_per_cell;
        let cell = 0;
        let p = Point2::new(0.11, 0.17);
        let h = 1e-5;
        let (_, grad) = space.eval_basis(cell, &[p]);
        let (px, _) = space.eval_basis(cell, &[Point2::new(p.x + h, p.y), Point2::new(p.x - h, p.y)]);
        let (py, _) = space.eval_basis(cell, &[Point2::new(p.x, p.y + h), Point2::new(p.x, p.y - h)]);
        for i in 0..nd {
            let fx = (px[i] - px[nd + i]) / (2.0 * h);
            let fy = (py[i] - py[nd + i]) / (2.0 * h);
            assert!((fx - grad[i][0]).abs() < 1e-6, "d/dx basis {i}");
            assert!((fy - grad[i][1]).abs() < 1e-6, "d/dy basis {i}");
        }
    }

    #[test]
    fn constant_is_exactly_representable() {
        let mesh = generate_structured_nonconvex(4).unwrap();
        let space = build_space(mesh, 1).unwrap();
        let cval = c64(2.5, -1.25);
        let field = space.l2_project(|_| cval);
        for c in 0..space.mesh.n_cells() {
            let pts = [space.cell_basis[c].centroid];
            let (vals, _) = space.eval_field(&field, c, &pts);
            assert!((vals[0] - cval).norm() < 1e-10);
        }
    }

    #[test]
    fn projection_reproduces_polynomials_of_degree_k() {
        let mesh = generate_structured_nonconvex(4).unwrap();
        let space = build_space(mesh, 2).unwrap();
        let f = |p: Point2| {
            c64(1.0, 0.5) * (1.0 + 2.0 * p.x - p.y + p.x * p.x - 3.0 * p.x * p.y + p.y * p.y)
        };
        let field = space.l2_project(f);
        for c in [0usize, 3, 7] {
            let pts = space.cell_quads[c].points.clone();
            let (vals, _) = space.eval_field(&field, c, &pts);
            for (q, &p) in pts.iter().enumerate() {
                assert!((vals[q] - f(p)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_function_projects_to_zero() {
        let mesh = generate_quad_grid(2).unwrap();
        let space = build_space(mesh, 1).unwrap();
        let field = space.l2_project(|_| c64(0.0, 0.0));
        assert!(field.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn eval_field_is_linear() {
        let mesh = generate_quad_grid(2).unwrap();
        let space = build_space(mesh, 2).unwrap();
        let u = space.l2_project(|p| c64(p.x, p.y));
        let w = space.l2_project(|p| c64(p.x * p.y, -p.x));
        let (a, b) = (c64(2.0, 1.0), c64(-0.5, 3.0));
        let mut combo = FieldCoefficients::zeros(&space, 0.0);
        for i in 0..combo.values.len() {
            combo.values[i] = a * u.values[i] + b * w.values[i];
        }
        let pts = [Point2::new(0.3, 0.6)];
        let cell = 2;
        let (vc, _) = space.eval_field(&combo, cell, &pts);
        let (vu, _) = space.eval_field(&u, cell, &pts);
        let (vw, _) = space.eval_field(&w, cell, &pts);
        assert!((vc[0] - (a * vu[0] + b * vw[0])).norm() < 1e-12);
    }

    #[test]
    fn gradient_of_projected_linear_function_is_exact() {
        let mesh = generate_structured_nonconvex(4).unwrap();
        let space = build_space(mesh, 1).unwrap();
        let field = space.l2_project(|p| c64(3.0 * p.x - 2.0 * p.y, p.x + p.y));
        for c in [0usize, 5] {
            let pts = [space.cell_basis[c].centroid];
            let (_, grads) = space.eval_field(&field, c, &pts);
            assert!((grads[0][0] - c64(3.0, 1.0)).norm() < 1e-10);
            assert!((grads[0][1] - c64(-2.0, 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn projection_error_decays_at_order_k_plus_one() {
        // f = sin(x) sin(y); L2 projection error slope over 3 refinements.
        for k in [1usize, 2] {
            let mut errs = Vec::new();
            for n in [4usize, 8, 16] {
                let mesh = generate_structured_nonconvex(n).unwrap();
                let space = build_space(mesh, k).unwrap();
                let f = |p: Point2| c64((p.x).sin() * (p.y).sin(), 0.0);
                let field = space.l2_project(f);
                let mut err2 = 0.0;
                for c in 0..space.mesh.n_cells() {
                    let cq = &space.cell_quads[c];
                    let vals = space.field_at_cell_quad(&field, c);
                    for (q, &p) in cq.points.iter().enumerate() {
                        err2 += cq.weights[q] * (vals[q] - f(p)).norm_sqr();
                    }
                }
                errs.push(err2.sqrt());
            }
            let slope = ((errs[0] / errs[1]).log2() + (errs[1] / errs[2]).log2()) / 2.0;
            assert!(
                slope >= k as f64 + 0.8,
                "k={k}: slope {slope}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn projector_sup_norm_bounded() {
        // |Pi f| at quadrature points stays within 10x sup|f|.
        let f = |p: Point2| c64((3.0 * p.x).sin() * (2.0 * p.y).cos(), (p.x + p.y).cos());
        let sup_f = 2.0_f64.sqrt(); // |f| <= sqrt(1 + 1)
        for mesh in [
            generate_quad_grid(4).unwrap(),
            generate_structured_nonconvex(8).unwrap(),
            crate::mesh::generate_mixed(8).unwrap(),
        ] {
            for k in [1usize, 2, 3] {
                let space = build_space(mesh.clone(), k).unwrap();
                let field = space.l2_project(f);
                let mut max_v = 0.0f64;
                for c in 0..space.mesh.n_cells() {
                    for v in space.field_at_cell_quad(&field, c) {
                        max_v = max_v.max(v.norm());
                    }
                }
                assert!(max_v <= 10.0 * sup_f, "k={k}: sup ratio {}", max_v / sup_f);
            }
        }
    }

    #[test]
    fn field_serialization_roundtrip_checks_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = generate_quad_grid(2).unwrap();
        let space = build_space(mesh, 2).unwrap();
        let field = space.l2_project(|p| c64(p.x, p.y * p.y));
        let path = dir.path().join("field.json");
        space.save_field(&field, &path).unwrap();
        let loaded = space.load_field(&path).unwrap();
        assert_eq!(loaded.values, field.values);

        let other = build_space(generate_quad_grid(3).unwrap(), 2).unwrap();
        assert!(other.load_field(&path).is_err());
    }
}
