//! Triangulations of the unit square and their boundary edge meshes.
//!
//! The boundary mesh is induced by the bulk mesh: every boundary node is a
//! bulk vertex, so boundary finite element functions are exactly the traces
//! of bulk ones. `trace_map[j]` is the bulk index of boundary node `j`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges as bulk vertex pairs, ordered along the boundary loop.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Bulk indices of all vertices on the boundary, ascending.
    pub boundary_nodes: Vec<usize>,
    /// Boundary-local index to bulk vertex index, in loop order.
    pub trace_map: Vec<usize>,
    /// Boundary edges in boundary-local indices.
    pub boundary_local_edges: Vec<[usize; 2]>,
    /// Maximum element diameter.
    pub h: f64,
}

/// Boundary edge mesh induced by a triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryView {
    pub edges: Vec<[usize; 2]>,
    pub local_edges: Vec<[usize; 2]>,
    pub trace_map: Vec<usize>,
}

impl BoundaryView {
    pub fn total_length(&self, vertices: &[Point]) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| dist(vertices[a], vertices[b]))
            .sum()
    }
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

pub(crate) fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl TriMesh {
    /// Structured mesh of `(0,1)^2` with `n` subdivisions per side. Each
    /// square cell is split along its lower-left to upper-right diagonal.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "unit square mesh needs at least one subdivision".into(),
            ));
        }
        let np = n + 1;
        let nf = n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / nf, j as f64 / nf]);
            }
        }
        let idx = |i: usize, j: usize| i + j * np;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v11 = idx(i + 1, j + 1);
                let v01 = idx(i, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::from_parts(vertices, triangles)
    }

    /// Builds a mesh from raw vertices and triangles, deriving the boundary.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area < 0.0 {
                return Err(Error::Topology(format!("triangle {t} is clockwise")));
            }
        }
        let boundary = extract_boundary(nv, &triangles)?;
        let mut boundary_nodes = boundary.trace_map.clone();
        boundary_nodes.sort_unstable();

        let h = triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|v| vertices[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max);

        Ok(Self {
            vertices,
            triangles,
            boundary_edges: boundary.edges,
            boundary_nodes,
            trace_map: boundary.trace_map,
            boundary_local_edges: boundary.local_edges,
            h,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.trace_map.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn boundary_view(&self) -> BoundaryView {
        BoundaryView {
            edges: self.boundary_edges.clone(),
            local_edges: self.boundary_local_edges.clone(),
            trace_map: self.trace_map.clone(),
        }
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .sum()
    }

    /// Max element diameter over min inscribed-circle diameter.
    pub fn quasiuniformity_ratio(&self) -> f64 {
        let min_inscribed = self
            .triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|v| self.vertices[v]);
                let perimeter = dist(a, b) + dist(b, c) + dist(c, a);
                4.0 * signed_area(a, b, c) / perimeter
            })
            .fold(f64::INFINITY, f64::min);
        self.h / min_inscribed
    }
}

/// Extracts the ordered boundary loop of a triangulation.
///
/// An edge is a boundary edge when exactly one triangle owns it. The loop is
/// walked in the orientation inherited from the counter-clockwise triangles,
/// starting at the smallest boundary vertex.
pub fn extract_boundary(num_vertices: usize, triangles: &[[usize; 3]]) -> Result<BoundaryView> {
    let mut owners: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    for tri in triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = owners.entry(key).or_insert((0, [a, b]));
            entry.0 += 1;
            if entry.0 > 2 {
                return Err(Error::Topology(format!(
                    "edge ({}, {}) is shared by more than two triangles",
                    key.0, key.1
                )));
            }
        }
    }

    let mut next = vec![usize::MAX; num_vertices];
    let mut incoming = vec![0usize; num_vertices];
    let mut count = 0;
    for &(n_owners, [a, b]) in owners.values() {
        if n_owners != 1 {
            continue;
        }
        if next[a] != usize::MAX {
            return Err(Error::Topology(format!(
                "boundary vertex {a} has more than one outgoing edge"
            )));
        }
        next[a] = b;
        incoming[b] += 1;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Topology("mesh has no boundary edges".into()));
    }

    let start = (0..num_vertices)
        .find(|&v| next[v] != usize::MAX)
        .expect("at least one boundary edge");
    let mut trace_map = Vec::with_capacity(count);
    let mut edges = Vec::with_capacity(count);
    let mut v = start;
    loop {
        if incoming[v] != 1 || next[v] == usize::MAX {
            return Err(Error::Topology(format!(
                "boundary is not watertight at vertex {v}"
            )));
        }
        trace_map.push(v);
        edges.push([v, next[v]]);
        v = next[v];
        if v == start {
            break;
        }
        if trace_map.len() > count {
            return Err(Error::Topology("boundary walk does not close".into()));
        }
    }
    if edges.len() != count {
        return Err(Error::Topology(
            "boundary consists of more than one closed curve".into(),
        ));
    }
    let nb = trace_map.len();
    let local_edges = (0..nb).map(|j| [j, (j + 1) % nb]).collect();
    Ok(BoundaryView {
        edges,
        local_edges,
        trace_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            TriMesh::unit_square(0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn counts_small_meshes() {
        let m = TriMesh::unit_square(1).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 2);
        assert_eq!(m.boundary_edges.len(), 4);
        let mut tm = m.trace_map.clone();
        tm.sort_unstable();
        assert_eq!(tm, vec![0, 1, 2, 3]);

        let m = TriMesh::unit_square(2).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.boundary_edges.len(), 8);
        assert_eq!(m.boundary_nodes.len(), 8);
        let center = m
            .vertices
            .iter()
            .position(|p| *p == [0.5, 0.5])
            .unwrap();
        assert!(!m.boundary_nodes.contains(&center));
    }

    #[test]
    fn area_perimeter_and_h() {
        for n in [1, 3, 4, 7, 16] {
            let m = TriMesh::unit_square(n).unwrap();
            assert!((m.total_area() - 1.0).abs() < 1e-14);
            assert!((m.boundary_length() - 4.0).abs() < 1e-13);
            assert!((m.h - 2f64.sqrt() / n as f64).abs() < 1e-14);
            assert_eq!(m.triangles.len(), 2 * n * n);
            assert_eq!(m.boundary_edges.len(), 4 * n);
        }
    }

    #[test]
    fn boundary_nodes_lie_on_square_edges() {
        let m = TriMesh::unit_square(5).unwrap();
        for &v in &m.trace_map {
            let [x, y] = m.vertices[v];
            assert!(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
        }
    }

    #[test]
    fn loop_is_counter_clockwise_from_origin() {
        let m = TriMesh::unit_square(2).unwrap();
        assert_eq!(m.trace_map[0], 0);
        assert_eq!(m.trace_map[1], 1);
        for (e, &[a, b]) in m.boundary_edges.iter().enumerate() {
            let [la, lb] = m.boundary_local_edges[e];
            assert_eq!(m.trace_map[la], a);
            assert_eq!(m.trace_map[lb], b);
        }
    }

    #[test]
    fn quasiuniformity_independent_of_n() {
        let r4 = TriMesh::unit_square(4).unwrap().quasiuniformity_ratio();
        let r32 = TriMesh::unit_square(32).unwrap().quasiuniformity_ratio();
        assert!((r4 - r32).abs() < 1e-9);
        assert!(r4 < 5.0);
    }

    #[test]
    fn open_fan_is_not_watertight() {
        // three triangles around a vertex with a dangling fourth sharing only a vertex
        let vertices = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [2.0, 0.0],
            [2.0, 1.0],
        ];
        let triangles = vec![[0, 1, 2], [1, 3, 4]];
        // the two triangles touch only at vertex 1: vertex 1 has two outgoing edges
        assert!(matches!(
            extract_boundary(vertices.len(), &triangles),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            TriMesh::from_parts(vertices, vec![[0, 2, 1]]),
            Err(Error::Topology(_))
        ));
    }
}
