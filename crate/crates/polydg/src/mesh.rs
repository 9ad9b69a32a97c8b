//! Polygonal partitions of planar domains with full edge topology.
//!
//! Cells are counter-clockwise simple polygons, possibly non-convex, and
//! partitions with hanging nodes are allowed. A hanging node is represented
//! on the fine segmentation: it appears as a straight (collinear) vertex in
//! the loop of the coarse cell, so that every edge is a maximal straight
//! segment shared by exactly one or two cells.

pub mod voronoi;

use crate::error::{Error, Result};
use crate::geometry::{self, Point2};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub use voronoi::{generate_voronoi, VoronoiDomain};

/// Orientation of an edge in the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

/// An edge of the partition: a maximal straight segment shared by exactly
/// two cells, or by one cell and the domain boundary.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex indices, ordered as traversed by the first cell.
    pub vertices: [usize; 2],
    /// Adjacent cells; the unit normal points from the first into the second.
    /// The first cell is the one with the lower index.
    pub cells: (usize, Option<usize>),
    /// Unit normal, outward for boundary edges.
    pub normal: Point2,
    /// Edge length (diameter of the segment).
    pub length: f64,
}

impl Edge {
    pub fn kind(&self) -> EdgeKind {
        if self.cells.1.is_some() {
            EdgeKind::Interior
        } else {
            EdgeKind::Boundary
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Scalar quality measures of a partition.
#[derive(Debug, Clone, Serialize)]
pub struct MeshQualityReport {
    pub h: f64,
    pub min_h_k: f64,
    /// min_K h_K / h, in (0, 1].
    pub quasi_uniformity_ratio: f64,
    /// min over edges and their adjacent cells of h_E / h_K.
    pub min_edge_to_cell_ratio: f64,
    pub has_hanging_nodes: bool,
}

/// A polygonal partition with vertices, cell loops and oriented edges.
#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Point2>,
    /// Per-cell CCW vertex loops. Loops may contain straight vertices where a
    /// neighbor's refinement induces hanging nodes.
    pub cells: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    /// Per-cell list of edge indices, in loop order.
    pub cell_edges: Vec<Vec<usize>>,
    pub cell_diameters: Vec<f64>,
    pub cell_areas: Vec<f64>,
    /// Mesh size: the largest cell diameter.
    pub h: f64,
    pub total_area: f64,
}

/// On-disk mesh schema: edges are recomputed on load.
#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
}

impl PolyMesh {
    /// Build a mesh from raw vertex coordinates and CCW cell loops.
    ///
    /// Vertices closer than a welding tolerance are merged, unreferenced
    /// vertices are dropped, and vertices of one cell lying in the interior
    /// of another cell's side are inserted there as straight vertices, so
    /// hanging nodes end up represented on the fine segmentation.
    pub fn from_vertices_cells(vertices: Vec<Point2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("mesh must contain at least one cell"));
        }
        for (c, loop_idx) in cells.iter().enumerate() {
            for &v in loop_idx {
                if v >= vertices.len() {
                    return Err(Error::invalid(format!(
                        "cell {c} references vertex {v} out of range"
                    )));
                }
            }
        }
        let scale = bbox_diagonal(&vertices).max(1.0);
        let weld_tol = 1e-9 * scale;

        let (verts, mut loops) = weld_vertices(&vertices, &cells, weld_tol);
        for lp in &mut loops {
            dedup_consecutive(lp);
        }
        let (verts, mut loops) = prune_unused(verts, loops);
        insert_hanging_vertices(&verts, &mut loops, weld_tol)?;

        let mut cell_areas = Vec::with_capacity(loops.len());
        let mut cell_diameters = Vec::with_capacity(loops.len());
        for (c, lp) in loops.iter().enumerate() {
            if lp.len() < 3 {
                return Err(Error::geometry(format!(
                    "cell {c} degenerates to fewer than 3 vertices"
                )));
            }
            let pts: Vec<Point2> = lp.iter().map(|&v| verts[v]).collect();
            let area = geometry::signed_area(&pts);
            if area <= 1e-14 * scale * scale {
                return Err(Error::geometry(format!(
                    "cell {c} is not CCW or has non-positive area {area:.3e}"
                )));
            }
            cell_areas.push(area);
            cell_diameters.push(geometry::diameter(&pts));
        }

        let (edges, cell_edges) = build_topology_impl(&verts, &loops)?;
        let h = cell_diameters.iter().cloned().fold(0.0, f64::max);
        let total_area = cell_areas.iter().sum();
        Ok(PolyMesh {
            vertices: verts,
            cells: loops,
            edges,
            cell_edges,
            cell_diameters,
            cell_areas,
            h,
            total_area,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Materialize the vertex loop of one cell.
    pub fn cell_loop(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_boundary())
    }

    pub fn quality_report(&self) -> MeshQualityReport {
        let min_h_k = self.cell_diameters.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut min_ratio = f64::INFINITY;
        for e in &self.edges {
            min_ratio = min_ratio.min(e.length / self.cell_diameters[e.cells.0]);
            if let Some(c2) = e.cells.1 {
                min_ratio = min_ratio.min(e.length / self.cell_diameters[c2]);
            }
        }
        let scale = bbox_diagonal(&self.vertices).max(1.0);
        let has_hanging_nodes = self.cells.iter().any(|lp| {
            let n = lp.len();
            (0..n).any(|i| {
                let p = self.vertices[lp[(i + n - 1) % n]];
                let v = self.vertices[lp[i]];
                let q = self.vertices[lp[(i + 1) % n]];
                let d = (v - p).cross(q - v).abs() / (q - p).norm().max(1e-300);
                d <= 1e-9 * scale && (v - p).dot(q - v) > 0.0
            })
        });
        MeshQualityReport {
            h: self.h,
            min_h_k,
            quasi_uniformity_ratio: min_h_k / self.h,
            min_edge_to_cell_ratio: min_ratio,
            has_hanging_nodes,
        }
    }

    /// Stable content hash over vertices and cell loops, used to fingerprint
    /// field serializations against the mesh they belong to.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.vertices.len() * 16);
        for p in &self.vertices {
            bytes.extend_from_slice(&p.x.to_bits().to_le_bytes());
            bytes.extend_from_slice(&p.y.to_bits().to_le_bytes());
        }
        for lp in &self.cells {
            bytes.extend_from_slice(&(lp.len() as u64).to_le_bytes());
            for &v in lp {
                bytes.extend_from_slice(&(v as u64).to_le_bytes());
            }
        }
        crate::config::fnv1a(&bytes)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = MeshFile {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            cells: self.cells.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MeshFile = serde_json::from_str(&text)?;
        let vertices = file
            .vertices
            .iter()
            .map(|&[x, y]| Point2::new(x, y))
            .collect();
        PolyMesh::from_vertices_cells(vertices, file.cells)
    }
}

fn bbox_diagonal(vertices: &[Point2]) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for p in vertices {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    lo.dist(hi)
}

/// Merge vertices closer than `tol` using a quantized grid with neighbor
/// lookup; remaps cell loops accordingly.
fn weld_vertices(
    vertices: &[Point2],
    cells: &[Vec<usize>],
    tol: f64,
) -> (Vec<Point2>, Vec<Vec<usize>>) {
    let inv = 1.0 / tol;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut out: Vec<Point2> = Vec::with_capacity(vertices.len());
    let mut remap = vec![0usize; vertices.len()];
    for (i, &p) in vertices.iter().enumerate() {
        let kx = (p.x * inv).round() as i64;
        let ky = (p.y * inv).round() as i64;
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(kx + dx, ky + dy)) {
                    for &j in ids {
                        if out[j].dist(p) <= tol {
                            found = Some(j);
                            break 'search;
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(j) => j,
            None => {
                let j = out.len();
                out.push(p);
                grid.entry((kx, ky)).or_default().push(j);
                j
            }
        };
        remap[i] = id;
    }
    let loops = cells
        .iter()
        .map(|lp| lp.iter().map(|&v| remap[v]).collect())
        .collect();
    (out, loops)
}

fn dedup_consecutive(lp: &mut Vec<usize>) {
    lp.dedup();
    while lp.len() > 1 && lp.first() == lp.last() {
        lp.pop();
    }
}

fn prune_unused(vertices: Vec<Point2>, cells: Vec<Vec<usize>>) -> (Vec<Point2>, Vec<Vec<usize>>) {
    let mut used = vec![false; vertices.len()];
    for lp in &cells {
        for &v in lp {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out = Vec::new();
    for (i, &p) in vertices.iter().enumerate() {
        if used[i] {
            remap[i] = out.len();
            out.push(p);
        }
    }
    let cells = cells
        .iter()
        .map(|lp| lp.iter().map(|&v| remap[v]).collect())
        .collect();
    (out, cells)
}

/// Insert any mesh vertex lying strictly inside another cell's side into that
/// cell's loop as a straight vertex.
fn insert_hanging_vertices(
    vertices: &[Point2],
    loops: &mut [Vec<usize>],
    tol: f64,
) -> Result<()> {
    // Candidates sorted by x for window queries.
    let mut by_x: Vec<usize> = (0..vertices.len()).collect();
    by_x.sort_by(|&a, &b| {
        vertices[a]
            .x
            .partial_cmp(&vertices[b].x)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let xs: Vec<f64> = by_x.iter().map(|&i| vertices[i].x).collect();

    for lp in loops.iter_mut() {
        let mut i = 0;
        while i < lp.len() {
            let a_idx = lp[i];
            let b_idx = lp[(i + 1) % lp.len()];
            let a = vertices[a_idx];
            let b = vertices[b_idx];
            let len = a.dist(b);
            if len <= tol {
                i += 1;
                continue;
            }
            let (xmin, xmax) = (a.x.min(b.x) - tol, a.x.max(b.x) + tol);
            let lo = xs.partition_point(|&x| x < xmin);
            let hi = xs.partition_point(|&x| x <= xmax);
            let mut inserts: Vec<(f64, usize)> = Vec::new();
            for &v_idx in &by_x[lo..hi] {
                if v_idx == a_idx || v_idx == b_idx {
                    continue;
                }
                let v = vertices[v_idx];
                if (v.y < a.y.min(b.y) - tol) || (v.y > a.y.max(b.y) + tol) {
                    continue;
                }
                let dist_line = (b - a).cross(v - a).abs() / len;
                if dist_line > tol {
                    continue;
                }
                let t = (v - a).dot(b - a) / (len * len);
                if t * len > tol && (1.0 - t) * len > tol {
                    inserts.push((t, v_idx));
                }
            }
            if inserts.is_empty() {
                i += 1;
                continue;
            }
            inserts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
            inserts.dedup_by_key(|p| p.1);
            let count = inserts.len();
            for (off, (_, v_idx)) in inserts.into_iter().enumerate() {
                lp.insert(i + 1 + off, v_idx);
            }
            // All interior candidates of this side are now in place; skip
            // past the sub-segments they created.
            i += count + 1;
        }
        if lp.len() > 3 * vertices.len() {
            return Err(Error::geometry(
                "hanging-node insertion did not terminate",
            ));
        }
    }
    Ok(())
}

/// Build the edge set and per-cell edge loops from welded vertex loops.
///
/// Edges are matched as undirected vertex pairs; after hanging-node
/// insertion every maximal straight segment is traversed by one or two cells.
/// The normal convention takes the lower cell index as the first cell, with
/// the normal pointing from it into the second (outward on the boundary).
pub fn build_topology(
    vertices: &[Point2],
    cells: &[Vec<usize>],
) -> Result<(Vec<Edge>, Vec<Vec<usize>>)> {
    build_topology_impl(vertices, cells)
}

fn build_topology_impl(
    vertices: &[Point2],
    cells: &[Vec<usize>],
) -> Result<(Vec<Edge>, Vec<Vec<usize>>)> {
    // key (min, max) -> occurrences (cell, from, to)
    let mut sides: Vec<((usize, usize), (usize, usize, usize))> = Vec::new();
    for (c, lp) in cells.iter().enumerate() {
        for i in 0..lp.len() {
            let a = lp[i];
            let b = lp[(i + 1) % lp.len()];
            let key = (a.min(b), a.max(b));
            sides.push((key, (c, a, b)));
        }
    }
    sides.sort_by_key(|&(key, (c, _, _))| (key, c));

    let mut edges = Vec::new();
    let mut cell_edges: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    let mut occ: HashMap<(usize, usize), usize> = HashMap::new();

    let mut i = 0;
    while i < sides.len() {
        let key = sides[i].0;
        let mut j = i;
        while j < sides.len() && sides[j].0 == key {
            j += 1;
        }
        let group = &sides[i..j];
        match group.len() {
            1 => {
                let (c, a, b) = group[0].1;
                let pa = vertices[a];
                let pb = vertices[b];
                let normal = (pb - pa).rotated_cw().normalized();
                occ.insert(key, edges.len());
                edges.push(Edge {
                    vertices: [a, b],
                    cells: (c, None),
                    normal,
                    length: pa.dist(pb),
                });
            }
            2 => {
                let (c1, a1, b1) = group[0].1;
                let (c2, a2, b2) = group[1].1;
                if c1 == c2 {
                    return Err(Error::geometry(format!(
                        "cell {c1} traverses edge ({}, {}) twice (pinched polygon)",
                        key.0, key.1
                    )));
                }
                if a1 != b2 || b1 != a2 {
                    return Err(Error::geometry(format!(
                        "cells {c1} and {c2} traverse edge ({}, {}) in the same direction; \
                         inconsistent orientation",
                        key.0, key.1
                    )));
                }
                // c1 < c2 by the sort; normal points out of c1.
                let pa = vertices[a1];
                let pb = vertices[b1];
                let normal = (pb - pa).rotated_cw().normalized();
                occ.insert(key, edges.len());
                edges.push(Edge {
                    vertices: [a1, b1],
                    cells: (c1, Some(c2)),
                    normal,
                    length: pa.dist(pb),
                });
            }
            _ => {
                return Err(Error::NonManifold {
                    v0: key.0,
                    v1: key.1,
                    cells: group.iter().map(|&(_, (c, _, _))| c).collect(),
                });
            }
        }
        i = j;
    }

    for (c, lp) in cells.iter().enumerate() {
        for i in 0..lp.len() {
            let a = lp[i];
            let b = lp[(i + 1) % lp.len()];
            let key = (a.min(b), a.max(b));
            cell_edges[c].push(occ[&key]);
        }
    }
    Ok((edges, cell_edges))
}

/// Uniform n x n partition of the unit square into axis-aligned quads.
pub fn generate_quad_grid(n: usize) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::invalid("quad grid requires n >= 1"));
    }
    let s = 1.0 / n as f64;
    let v = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * s, j as f64 * s));
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    PolyMesh::from_vertices_cells(vertices, cells)
}

/// Structured non-convex partition of the unit square: every 2x2 block of
/// the n x n sub-quad grid carries an L-shaped hexagon plus its complementary
/// corner square, with the corner alternating SE/NW in a checkerboard so the
/// L-cells interlock and the tiling stays conforming (no hanging nodes).
/// Nominal mesh size 2/n.
pub fn generate_structured_nonconvex(n: usize) -> Result<PolyMesh> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "non-convex family requires even n >= 2, got {n}"
        )));
    }
    let s = 1.0 / n as f64;
    let v = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * s, j as f64 * s));
        }
    }
    let mut cells = Vec::with_capacity(n * n / 2);
    for bj in 0..n / 2 {
        for bi in 0..n / 2 {
            let (i0, j0) = (2 * bi, 2 * bj);
            push_l_block(&mut cells, v, i0, j0, (bi + bj) % 2 == 0);
        }
    }
    PolyMesh::from_vertices_cells(vertices, cells)
}

/// Append the L-hexagon and corner square of one 2x2 block. `se` selects the
/// SE corner square, otherwise the NW corner square.
fn push_l_block(
    cells: &mut Vec<Vec<usize>>,
    v: impl Fn(usize, usize) -> usize,
    i0: usize,
    j0: usize,
    se: bool,
) {
    if se {
        cells.push(vec![
            v(i0, j0),
            v(i0 + 1, j0),
            v(i0 + 1, j0 + 1),
            v(i0 + 2, j0 + 1),
            v(i0 + 2, j0 + 2),
            v(i0, j0 + 2),
        ]);
        cells.push(vec![
            v(i0 + 1, j0),
            v(i0 + 2, j0),
            v(i0 + 2, j0 + 1),
            v(i0 + 1, j0 + 1),
        ]);
    } else {
        cells.push(vec![
            v(i0, j0),
            v(i0 + 2, j0),
            v(i0 + 2, j0 + 2),
            v(i0 + 1, j0 + 2),
            v(i0 + 1, j0 + 1),
            v(i0, j0 + 1),
        ]);
        cells.push(vec![
            v(i0, j0 + 1),
            v(i0 + 1, j0 + 1),
            v(i0 + 1, j0 + 2),
            v(i0, j0 + 2),
        ]);
    }
}

/// Mixed partition of the unit square: the left half is tiled by axis-aligned
/// quads of side 1/n, the right half by the interlocking-L block pattern on
/// blocks of side 2/n. Hanging nodes arise where a full-length block side
/// meets two finer quad sides and are baked into the coarse loops.
pub fn generate_mixed(n: usize) -> Result<PolyMesh> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "mixed family requires even n >= 2, got {n}"
        )));
    }
    let s = 1.0 / n as f64;
    let v = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * s, j as f64 * s));
        }
    }
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n / 2 {
            cells.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    // If the right half has an odd number of columns, pad with one quad
    // column so the remaining width fits 2x2 blocks.
    let mut start = n / 2;
    if (n / 2) % 2 == 1 {
        for j in 0..n {
            cells.push(vec![
                v(start, j),
                v(start + 1, j),
                v(start + 1, j + 1),
                v(start, j + 1),
            ]);
        }
        start += 1;
    }
    for bj in 0..n / 2 {
        for bi in 0..(n - start) / 2 {
            let (i0, j0) = (start + 2 * bi, 2 * bj);
            push_l_block(&mut cells, v, i0, j0, (bi + bj) % 2 == 0);
        }
    }
    PolyMesh::from_vertices_cells(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_grid_2x2_edge_counts() {
        let mesh = generate_quad_grid(2).unwrap();
        assert_eq!(mesh.n_cells(), 4);
        assert_eq!(mesh.edges.len(), 12);
        let interior = mesh.edges.iter().filter(|e| !e.is_boundary()).count();
        assert_eq!(interior, 4);
        assert_eq!(mesh.edges.len() - interior, 8);
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let mesh = PolyMesh::from_vertices_cells(verts, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(mesh.edges.len(), 3);
        assert!(mesh.edges.iter().all(|e| e.is_boundary()));
    }

    #[test]
    fn nonconvex_n8_cells_and_areas() {
        let mesh = generate_structured_nonconvex(8).unwrap();
        assert_eq!(mesh.n_cells(), 32);
        for &a in &mesh.cell_areas {
            let is_l = (a - 3.0 / 64.0).abs() < 1e-14;
            let is_sq = (a - 1.0 / 64.0).abs() < 1e-14;
            assert!(is_l || is_sq, "unexpected cell area {a}");
        }
        assert!((mesh.total_area - 1.0).abs() < 1e-10);
        assert!(!mesh.quality_report().has_hanging_nodes);
    }

    #[test]
    fn nonconvex_smallest_instance() {
        let mesh = generate_structured_nonconvex(2).unwrap();
        assert_eq!(mesh.n_cells(), 2);
        assert!((mesh.total_area - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvex_rejects_bad_n() {
        assert!(generate_structured_nonconvex(3).is_err());
        assert!(generate_structured_nonconvex(0).is_err());
    }

    #[test]
    fn nonconvex_refinement_halves_h_exactly() {
        let coarse = generate_structured_nonconvex(8).unwrap();
        let fine = generate_structured_nonconvex(16).unwrap();
        assert_eq!(fine.h, coarse.h / 2.0);
        let r0 = coarse.quality_report().quasi_uniformity_ratio;
        let r1 = fine.quality_report().quasi_uniformity_ratio;
        assert!((r0 - r1).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_quality_constant_under_refinement() {
        let ratios: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                generate_structured_nonconvex(n)
                    .unwrap()
                    .quality_report()
                    .quasi_uniformity_ratio
            })
            .collect();
        assert!((ratios[0] - ratios[1]).abs() < 1e-12);
        assert!((ratios[1] - ratios[2]).abs() < 1e-12);
        assert!(ratios[0] > 0.0 && ratios[0] <= 1.0);
    }

    #[test]
    fn quad_grid_quality_ratio_is_one() {
        let mesh = generate_quad_grid(4).unwrap();
        let q = mesh.quality_report();
        assert!((q.quasi_uniformity_ratio - 1.0).abs() < 1e-14);
        assert!(!q.has_hanging_nodes);
    }

    #[test]
    fn mixed_n8_cell_census() {
        let mesh = generate_mixed(8).unwrap();
        assert_eq!(mesh.n_cells(), 48);
        let quads = mesh
            .cell_areas
            .iter()
            .filter(|&&a| (a - 1.0 / 64.0).abs() < 1e-14)
            .count();
        let ls = mesh
            .cell_areas
            .iter()
            .filter(|&&a| (a - 3.0 / 64.0).abs() < 1e-14)
            .count();
        assert_eq!(quads + ls, 48);
        assert_eq!(ls, 8); // half of the 16 right-half cells are L-hexagons
        assert!((mesh.total_area - 1.0).abs() < 1e-10);
        assert!(mesh.quality_report().has_hanging_nodes);
    }

    #[test]
    fn mixed_n4_area_telescopes() {
        let mesh = generate_mixed(4).unwrap();
        assert!((mesh.total_area - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixed_interface_vertices_are_edge_endpoints() {
        let mesh = generate_mixed(8).unwrap();
        let on_interface: Vec<usize> = (0..mesh.vertices.len())
            .filter(|&i| (mesh.vertices[i].x - 0.5).abs() < 1e-12)
            .collect();
        assert!(!on_interface.is_empty());
        for v in on_interface {
            let hit = mesh
                .edges
                .iter()
                .any(|e| e.vertices[0] == v || e.vertices[1] == v);
            assert!(hit, "interface vertex {v} is not an edge endpoint");
        }
    }

    #[test]
    fn hanging_node_splits_coarse_side_into_two_edges() {
        // One coarse cell [0,2]x[0,1] below two fine cells. The coarse top
        // side must contribute two collinear edges after insertion of the
        // hanging vertex (1, 1).
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 2.0),
            Point2::new(1.0, 2.0),
            Point2::new(2.0, 2.0),
        ];
        let cells = vec![
            vec![0, 1, 2, 3],
            vec![3, 4, 6, 5],
            vec![4, 2, 7, 6],
        ];
        let mesh = PolyMesh::from_vertices_cells(verts, cells).unwrap();
        assert!(mesh.quality_report().has_hanging_nodes);
        let coarse_top: Vec<&Edge> = mesh
            .edges
            .iter()
            .filter(|e| {
                e.cells.0 == 0
                    && !e.is_boundary()
                    && (mesh.vertices[e.vertices[0]].y - 1.0).abs() < 1e-12
                    && (mesh.vertices[e.vertices[1]].y - 1.0).abs() < 1e-12
            })
            .collect();
        assert_eq!(coarse_top.len(), 2);
        // Each shared with a distinct fine cell.
        let mut partners: Vec<usize> = coarse_top.iter().map(|e| e.cells.1.unwrap()).collect();
        partners.sort_unstable();
        assert_eq!(partners, vec![1, 2]);
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        // Three "cells" all sharing the segment (0,0)-(1,0).
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, -1.0),
            Point2::new(1.5, 1.0),
        ];
        let cells = vec![vec![0, 1, 2], vec![0, 3, 1], vec![0, 1, 4]];
        match PolyMesh::from_vertices_cells(verts, cells) {
            Err(Error::NonManifold { cells, .. }) => assert_eq!(cells.len(), 3),
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn interior_normals_flip_under_cell_relabeling() {
        let mesh = generate_quad_grid(2).unwrap();
        // Reverse the cell order: every interior edge swaps its K1/K2 roles.
        let relabeled = PolyMesh::from_vertices_cells(
            mesh.vertices.clone(),
            mesh.cells.iter().rev().cloned().collect(),
        )
        .unwrap();
        for (_, e) in mesh.interior_edges() {
            let a = mesh.vertices[e.vertices[0]];
            let b = mesh.vertices[e.vertices[1]];
            let mid = (a + b) * 0.5;
            let twin = relabeled
                .interior_edges()
                .find(|(_, f)| {
                    let fa = relabeled.vertices[f.vertices[0]];
                    let fb = relabeled.vertices[f.vertices[1]];
                    ((fa + fb) * 0.5).dist(mid) < 1e-12
                })
                .map(|(_, f)| f)
                .expect("matching edge");
            let flipped = (e.normal + twin.normal).norm() < 1e-12;
            assert!(flipped, "normal did not flip under relabeling");
        }
    }

    #[test]
    fn edge_invariants_hold_on_all_families() {
        for mesh in [
            generate_quad_grid(3).unwrap(),
            generate_structured_nonconvex(8).unwrap(),
            generate_mixed(8).unwrap(),
        ] {
            for e in &mesh.edges {
                assert!((e.normal.norm() - 1.0).abs() < 1e-12);
                let a = mesh.vertices[e.vertices[0]];
                let b = mesh.vertices[e.vertices[1]];
                assert!((e.length - a.dist(b)).abs() < 1e-14);
                // Geometric inequality h_E <= h_K for the adjacent cells.
                assert!(e.length <= mesh.cell_diameters[e.cells.0] + 1e-14);
                if let Some(c2) = e.cells.1 {
                    assert!(e.length <= mesh.cell_diameters[c2] + 1e-14);
                }
            }
            // Every cell's edge loop covers its polygon sides.
            for (c, ce) in mesh.cell_edges.iter().enumerate() {
                assert_eq!(ce.len(), mesh.cells[c].len());
            }
        }
    }

    #[test]
    fn json_roundtrip_preserves_topology() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.json");
        let mesh = generate_mixed(4).unwrap();
        mesh.save_json(&path).unwrap();
        let loaded = PolyMesh::load_json(&path).unwrap();
        assert_eq!(loaded.n_cells(), mesh.n_cells());
        assert_eq!(loaded.edges.len(), mesh.edges.len());
        assert!((loaded.total_area - mesh.total_area).abs() < 1e-14);
        assert_eq!(loaded.fingerprint(), mesh.fingerprint());
    }
}
