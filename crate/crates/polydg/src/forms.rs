//! Discrete operators of the interior-penalty DG discretization: mass,
//! SIPG stiffness, nonlinearity-weighted mass, load vectors, norms and the
//! elliptic (Ritz) projection.
//!
//! Edge sums run over interior and boundary edges alike, with the
//! single-valued convention {v} = [v] = v|_K on the boundary.

use crate::error::Result;
use crate::geometry::Point2;
use crate::solver::{self, Preconditioner, SolveReport, SolverConfig, SparseComplexMatrix};
use crate::space::{BrokenSpace, FieldCoefficients};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Coefficients of the model equation
/// u_t - (nu + i alpha) Lap u + (kappa + i beta) |u|^2 u - gamma u = f.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            nu: 1.0,
            alpha: 1.0,
            kappa: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl ModelParams {
    /// nu + i alpha, the complex diffusion coefficient.
    pub fn diffusion(&self) -> Complex64 {
        Complex64::new(self.nu, self.alpha)
    }

    /// kappa + i beta, the complex nonlinearity coefficient.
    pub fn nonlinearity(&self) -> Complex64 {
        Complex64::new(self.kappa, self.beta)
    }
}

/// Spatial discretization parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub k: usize,
    pub lambda: f64,
}

/// Recommended penalty floor for degree `k`.
pub fn lambda_min(k: usize) -> f64 {
    10.0 * ((k + 1) * (k + 1)) as f64
}

/// L2, broken H1 and DG norms of a discrete field.
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    pub l2: f64,
    pub broken_h1: f64,
    pub dg: f64,
}

/// CSR structure of a block-diagonal operator with dense per-cell blocks.
fn block_diag_structure(space: &BrokenSpace) -> (Vec<usize>, Vec<usize>) {
    let nd = space.dofs_per_cell;
    let n = space.total_dofs();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * nd);
    row_ptr.push(0);
    for c in 0..space.mesh.n_cells() {
        let off = space.cell_offset(c);
        for _ in 0..nd {
            col_idx.extend(off..off + nd);
            row_ptr.push(col_idx.len());
        }
    }
    (row_ptr, col_idx)
}

fn block_diag_matrix(space: &BrokenSpace, values: Vec<f64>) -> SparseComplexMatrix {
    let (row_ptr, col_idx) = block_diag_structure(space);
    SparseComplexMatrix {
        n: space.total_dofs(),
        row_ptr,
        col_idx,
        values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    }
}

/// Per-cell dense mass blocks in block-CSR value order (row-major per cell).
pub fn mass_block_values(space: &BrokenSpace) -> Vec<f64> {
    let nd = space.dofs_per_cell;
    let mut out = vec![0.0f64; space.mesh.n_cells() * nd * nd];
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let base = c * nd * nd;
        for q in 0..cq.points.len() {
            let w = cq.weights[q];
            for i in 0..nd {
                let wphi = w * cq.phi[q * nd + i];
                for j in 0..=i {
                    out[base + i * nd + j] += wphi * cq.phi[q * nd + j];
                }
            }
        }
        for i in 0..nd {
            for j in (i + 1)..nd {
                out[base + i * nd + j] = out[base + j * nd + i];
            }
        }
    }
    out
}

/// Per-cell dense blocks of the |w|^2-weighted mass, same layout as
/// `mass_block_values`. The weight is evaluated pointwise at the quadrature
/// nodes.
pub fn weighted_mass_block_values(space: &BrokenSpace, weight: &FieldCoefficients) -> Vec<f64> {
    let nd = space.dofs_per_cell;
    let mut out = vec![0.0f64; space.mesh.n_cells() * nd * nd];
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let base = c * nd * nd;
        let wvals = space.field_at_cell_quad(weight, c);
        for q in 0..cq.points.len() {
            let w = cq.weights[q] * wvals[q].norm_sqr();
            if w == 0.0 {
                continue;
            }
            for i in 0..nd {
                let wphi = w * cq.phi[q * nd + i];
                for j in 0..=i {
                    out[base + i * nd + j] += wphi * cq.phi[q * nd + j];
                }
            }
        }
        for i in 0..nd {
            for j in (i + 1)..nd {
                out[base + i * nd + j] = out[base + j * nd + i];
            }
        }
    }
    out
}

/// y = B x for a block-diagonal operator given by its per-cell dense blocks.
pub fn block_diag_matvec(
    space: &BrokenSpace,
    values: &[f64],
    x: &[Complex64],
) -> Vec<Complex64> {
    let nd = space.dofs_per_cell;
    let mut y = vec![Complex64::new(0.0, 0.0); space.total_dofs()];
    for c in 0..space.mesh.n_cells() {
        let off = space.cell_offset(c);
        let base = c * nd * nd;
        for i in 0..nd {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nd {
                acc += values[base + i * nd + j] * x[off + j];
            }
            y[off + i] = acc;
        }
    }
    y
}

/// Mass matrix M[i][j] = (phi_j, phi_i); block-diagonal and, with the
/// orthonormalized bases, the identity up to quadrature roundoff.
pub fn assemble_mass(space: &BrokenSpace) -> Result<SparseComplexMatrix> {
    Ok(block_diag_matrix(space, mass_block_values(space)))
}

/// Weighted mass matrix W[i][j] = int |w(x)|^2 phi_j phi_i dx. Hermitian
/// positive semidefinite (real symmetric here since the basis is real).
pub fn assemble_weighted_mass(
    space: &BrokenSpace,
    weight: &FieldCoefficients,
) -> Result<SparseComplexMatrix> {
    Ok(block_diag_matrix(
        space,
        weighted_mass_block_values(space, weight),
    ))
}

/// SIPG stiffness matrix
/// A[i][j] = sum_K int grad phi_j . grad phi_i
///         - sum_E int {grad phi_j} . n [phi_i]
///         - sum_E int [phi_j] {grad phi_i} . n
///         + sum_E (lambda / h_E) int [phi_j][phi_i].
pub fn assemble_sipg(space: &BrokenSpace, lambda: f64) -> Result<SparseComplexMatrix> {
    if lambda < lambda_min(space.k) {
        log::warn!(
            "penalty lambda = {lambda} below the recommended floor {}; coercivity may fail",
            lambda_min(space.k)
        );
    }
    let nd = space.dofs_per_cell;
    let n = space.total_dofs();
    let mut triplets = Vec::new();

    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let off = space.cell_offset(c);
        let mut local = vec![0.0f64; nd * nd];
        for q in 0..cq.points.len() {
            let w = cq.weights[q];
            for i in 0..nd {
                let gi = cq.grad[q * nd + i];
                for j in 0..=i {
                    let gj = cq.grad[q * nd + j];
                    local[i * nd + j] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
        for i in 0..nd {
            for j in 0..=i {
                let v = Complex64::new(local[i * nd + j], 0.0);
                triplets.push((off + i, off + j, v));
                if i != j {
                    triplets.push((off + j, off + i, v));
                }
            }
        }
    }

    for (e, edge) in space.mesh.edges.iter().enumerate() {
        let eq = &space.edge_quads[e];
        let normal = edge.normal;
        let pen = lambda / edge.length;
        // (cell, jump sign, trace); the average factor is shared per edge.
        let mut sides: Vec<(usize, f64, &crate::space::EdgeTrace)> = Vec::with_capacity(2);
        match (&eq.side2, edge.cells.1) {
            (Some(tr2), Some(c2)) => {
                sides.push((edge.cells.0, 1.0, &eq.side1));
                sides.push((c2, -1.0, tr2));
            }
            _ => sides.push((edge.cells.0, 1.0, &eq.side1)),
        }
        let avg = if sides.len() == 2 { 0.5 } else { 1.0 };
        for &(cb, jb, trb) in &sides {
            for &(ca, ja, tra) in &sides {
                // trial from side a (phi_j), test from side b (phi_i)
                let mut local = vec![0.0f64; nd * nd];
                for q in 0..eq.points.len() {
                    let w = eq.weights[q];
                    for i in 0..nd {
                        let phib = trb.phi[q * nd + i];
                        let gb = trb.grad[q * nd + i];
                        let gnb = gb[0] * normal.x + gb[1] * normal.y;
                        for j in 0..nd {
                            let phia = tra.phi[q * nd + j];
                            let ga = tra.grad[q * nd + j];
                            let gna = ga[0] * normal.x + ga[1] * normal.y;
                            local[i * nd + j] += w
                                * (-(avg * gna) * (jb * phib) - (ja * phia) * (avg * gnb)
                                    + pen * (ja * phia) * (jb * phib));
                        }
                    }
                }
                let (offa, offb) = (space.cell_offset(ca), space.cell_offset(cb));
                for i in 0..nd {
                    for j in 0..nd {
                        let v = local[i * nd + j];
                        if v != 0.0 {
                            triplets.push((offb + i, offa + j, Complex64::new(v, 0.0)));
                        }
                    }
                }
            }
        }
    }
    SparseComplexMatrix::from_triplets(n, &triplets)
}

/// Load vector F[i] = int f(x, t) conj(phi_i) dx (the basis is real).
pub fn assemble_load(
    space: &BrokenSpace,
    f: impl Fn(Point2, f64) -> Complex64,
    t: f64,
) -> Vec<Complex64> {
    let nd = space.dofs_per_cell;
    let mut out = vec![Complex64::new(0.0, 0.0); space.total_dofs()];
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let off = space.cell_offset(c);
        for (q, &p) in cq.points.iter().enumerate() {
            let fv = f(p, t) * cq.weights[q];
            for i in 0..nd {
                out[off + i] += fv * cq.phi[q * nd + i];
            }
        }
    }
    out
}

/// L2, broken H1 and DG norms of a discrete field. The DG norm includes the
/// h_E-weighted jumps over all edges, boundary included.
pub fn norms(space: &BrokenSpace, coeffs: &FieldCoefficients) -> Norms {
    let nd = space.dofs_per_cell;
    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let off = space.cell_offset(c);
        for q in 0..cq.points.len() {
            let mut v = Complex64::new(0.0, 0.0);
            let mut gx = Complex64::new(0.0, 0.0);
            let mut gy = Complex64::new(0.0, 0.0);
            for i in 0..nd {
                let ci = coeffs.values[off + i];
                v += ci * cq.phi[q * nd + i];
                gx += ci * cq.grad[q * nd + i][0];
                gy += ci * cq.grad[q * nd + i][1];
            }
            let w = cq.weights[q];
            l2_sq += w * v.norm_sqr();
            h1_sq += w * (gx.norm_sqr() + gy.norm_sqr());
        }
    }
    let jump_sq = jump_seminorm_sq(space, coeffs, true);
    Norms {
        l2: l2_sq.sqrt(),
        broken_h1: h1_sq.sqrt(),
        dg: (h1_sq + jump_sq).sqrt(),
    }
}

/// sum_E h_E^{-1} int |[v]|^2 ds; `include_boundary` selects whether boundary
/// edges (with [v] = v|_K) participate.
pub fn jump_seminorm_sq(
    space: &BrokenSpace,
    coeffs: &FieldCoefficients,
    include_boundary: bool,
) -> f64 {
    let nd = space.dofs_per_cell;
    let mut jump_sq = 0.0;
    for (e, edge) in space.mesh.edges.iter().enumerate() {
        if edge.is_boundary() && !include_boundary {
            continue;
        }
        let eq = &space.edge_quads[e];
        let off1 = space.cell_offset(edge.cells.0);
        let off2 = edge.cells.1.map(|c| space.cell_offset(c));
        let mut acc = 0.0;
        for q in 0..eq.points.len() {
            let mut jump = Complex64::new(0.0, 0.0);
            for i in 0..nd {
                jump += coeffs.values[off1 + i] * eq.side1.phi[q * nd + i];
            }
            if let (Some(tr2), Some(o2)) = (&eq.side2, off2) {
                for i in 0..nd {
                    jump -= coeffs.values[o2 + i] * tr2.phi[q * nd + i];
                }
            }
            acc += eq.weights[q] * jump.norm_sqr();
        }
        jump_sq += acc / edge.length;
    }
    jump_sq
}

/// Elliptic (Ritz) projection: solves A r = b with
/// b[i] = sum_K int grad u . grad phi_i - sum_E int ({grad u} . n) [phi_i],
/// the consistency-reduced right-hand side for continuous u with zero trace.
/// The conjugate-gradient solve starts from the L2 projection of `u`, which
/// sits within O(h^{k+1}) of the answer. Returns the coefficients together
/// with the solve report.
pub fn ritz_project(
    space: &BrokenSpace,
    a: &SparseComplexMatrix,
    precond: &dyn Preconditioner,
    u: impl Fn(Point2) -> Complex64,
    grad_u: impl Fn(Point2) -> [Complex64; 2],
    cfg: &SolverConfig,
) -> Result<(FieldCoefficients, SolveReport)> {
    let nd = space.dofs_per_cell;
    let mut b = vec![Complex64::new(0.0, 0.0); space.total_dofs()];
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let off = space.cell_offset(c);
        for (q, &p) in cq.points.iter().enumerate() {
            let g = grad_u(p);
            let w = cq.weights[q];
            for i in 0..nd {
                let gi = cq.grad[q * nd + i];
                b[off + i] += (g[0] * gi[0] + g[1] * gi[1]) * w;
            }
        }
    }
    for (e, edge) in space.mesh.edges.iter().enumerate() {
        let eq = &space.edge_quads[e];
        let normal = edge.normal;
        let off1 = space.cell_offset(edge.cells.0);
        for (q, &p) in eq.points.iter().enumerate() {
            let g = grad_u(p);
            let gn = (g[0] * normal.x + g[1] * normal.y) * eq.weights[q];
            for i in 0..nd {
                b[off1 + i] -= gn * eq.side1.phi[q * nd + i];
            }
            if let (Some(tr2), Some(c2)) = (&eq.side2, edge.cells.1) {
                let off2 = space.cell_offset(c2);
                for i in 0..nd {
                    // [phi_i] = -phi_i on the second side.
                    b[off2 + i] += gn * tr2.phi[q * nd + i];
                }
            }
        }
    }
    // The elliptic projection is one solve per run; allow it more headroom
    // than the mass-dominated per-step systems.
    let cg_cfg = SolverConfig {
        max_iters: cfg.max_iters.max(20_000),
        ..*cfg
    };
    let guess = space.l2_project(&u);
    let (x, report) = solver::solve_hpd(a, precond, &b, Some(&guess.values), &cg_cfg)?;
    Ok((FieldCoefficients { values: x, t: 0.0 }, report))
}
