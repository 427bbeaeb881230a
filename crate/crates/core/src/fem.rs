//! P1 finite element operators on the bulk mesh and its boundary edge mesh.
//!
//! Mass-type integrals are evaluated with nodal interpolation, so both mass
//! operators are diagonal: `m_i = sum |K|/3` over triangles touching node `i`
//! and `b_j = sum |E|/2` over boundary edges touching boundary node `j`.

use crate::error::{Error, Result};
use crate::mesh::{dist, signed_area, TriMesh};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct FemOperators {
    /// Lumped bulk mass, one entry per bulk node.
    pub mass: Vec<f64>,
    pub stiffness: CsrMatrix,
    /// Lumped boundary mass, one entry per boundary node.
    pub boundary_mass: Vec<f64>,
    pub surface_stiffness: CsrMatrix,
    /// Boundary-local index to bulk index; the trace operator selects these rows.
    pub trace_map: Vec<usize>,
}

/// Barycentric gradient dot products `grad(l_i) . grad(l_j) |K|` of one triangle.
pub(crate) fn local_stiffness(p: [[f64; 2]; 3]) -> Option<[[f64; 3]; 3]> {
    let area = signed_area(p[0], p[1], p[2]);
    let diam2 = (0..3)
        .map(|i| dist(p[i], p[(i + 1) % 3]).powi(2))
        .fold(0.0, f64::max);
    if !(area > 1e-14 * diam2) {
        return None;
    }
    // opposite edge vectors
    let e: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        [b[0] - a[0], b[1] - a[1]]
    });
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area))
    }))
}

impl FemOperators {
    pub fn assemble(mesh: &TriMesh) -> Result<Self> {
        let n = mesh.num_nodes();
        let mut mass = vec![0.0; n];
        let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|v| mesh.vertices[v]);
            let area = signed_area(p[0], p[1], p[2]);
            let local = local_stiffness(p).ok_or_else(|| {
                Error::Assembly(format!("triangle {t} is degenerate (area {area:e})"))
            })?;
            for i in 0..3 {
                mass[tri[i]] += area / 3.0;
                for j in 0..3 {
                    triplets.push((tri[i], tri[j], local[i][j]));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(n, n, &triplets);

        let nb = mesh.num_boundary_nodes();
        let mut boundary_mass = vec![0.0; nb];
        let mut surf = Vec::with_capacity(4 * mesh.boundary_local_edges.len());
        for (e, &[a, b]) in mesh.boundary_local_edges.iter().enumerate() {
            let len = dist(
                mesh.vertices[mesh.trace_map[a]],
                mesh.vertices[mesh.trace_map[b]],
            );
            if !(len > 0.0) {
                return Err(Error::Assembly(format!("boundary edge {e} has zero length")));
            }
            boundary_mass[a] += 0.5 * len;
            boundary_mass[b] += 0.5 * len;
            let k = 1.0 / len;
            surf.extend_from_slice(&[(a, a, k), (a, b, -k), (b, a, -k), (b, b, k)]);
        }
        let surface_stiffness = CsrMatrix::from_triplets(nb, nb, &surf);

        Ok(Self {
            mass,
            stiffness,
            boundary_mass,
            surface_stiffness,
            trace_map: mesh.trace_map.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.boundary_mass.len()
    }

    /// Trace of a bulk nodal vector: `T v`.
    pub fn trace(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.num_nodes());
        self.trace_map.iter().map(|&i| v[i]).collect()
    }

    /// Extension by zero of a boundary vector: `T^T v_gamma`.
    pub fn trace_transpose(&self, v_gamma: &[f64]) -> Vec<f64> {
        assert_eq!(v_gamma.len(), self.num_boundary_nodes());
        let mut out = vec![0.0; self.num_nodes()];
        for (j, &i) in self.trace_map.iter().enumerate() {
            out[i] += v_gamma[j];
        }
        out
    }

    /// `Delta_h v = -D^{-1} K v`.
    pub fn discrete_laplacian(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.num_nodes());
        self.stiffness
            .mul_vec(v)
            .iter()
            .zip(&self.mass)
            .map(|(kv, m)| -kv / m)
            .collect()
    }

    /// Lumped L2 product on the bulk.
    pub fn inner_bulk(&self, u: &[f64], v: &[f64]) -> f64 {
        weighted_dot(&self.mass, u, v)
    }

    /// Lumped L2 product on the boundary.
    pub fn inner_surf(&self, u: &[f64], v: &[f64]) -> f64 {
        weighted_dot(&self.boundary_mass, u, v)
    }

    pub fn norm_bulk(&self, v: &[f64]) -> f64 {
        self.inner_bulk(v, v).sqrt()
    }

    pub fn norm_surf(&self, v: &[f64]) -> f64 {
        self.inner_surf(v, v).sqrt()
    }

    pub fn h1_norm_bulk(&self, v: &[f64]) -> f64 {
        (self.inner_bulk(v, v) + self.stiffness.quadratic_form(v)).sqrt()
    }

    pub fn h1_norm_surf(&self, v: &[f64]) -> f64 {
        (self.inner_surf(v, v) + self.surface_stiffness.quadratic_form(v)).sqrt()
    }
}

fn weighted_dot(w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(w.len(), u.len());
    assert_eq!(w.len(), v.len());
    w.iter().zip(u).zip(v).map(|((w, u), v)| w * u * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(n: usize) -> (TriMesh, FemOperators) {
        let mesh = TriMesh::unit_square(n).unwrap();
        let ops = FemOperators::assemble(&mesh).unwrap();
        (mesh, ops)
    }

    #[test]
    fn lumped_masses_sum_to_measures() {
        for n in [1, 2, 5, 16] {
            let (_, ops) = ops(n);
            assert!(ops.mass.iter().all(|&m| m > 0.0));
            assert!(ops.boundary_mass.iter().all(|&b| b > 0.0));
            assert!((ops.mass.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!((ops.boundary_mass.iter().sum::<f64>() - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn center_mass_n2() {
        let (mesh, ops) = ops(2);
        let c = mesh.vertices.iter().position(|p| *p == [0.5, 0.5]).unwrap();
        // six incident triangles of area 1/8
        assert!((ops.mass[c] - 6.0 * (1.0 / 8.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_energy_of_x() {
        let (mesh, ops) = ops(2);
        let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
        assert!((ops.stiffness.quadratic_form(&x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constants_in_kernels() {
        let (_, ops) = ops(6);
        let ones = vec![3.5; ops.num_nodes()];
        assert!(ops.stiffness.mul_vec(&ones).iter().all(|v| v.abs() < 1e-13));
        let t = ops.trace(&ones);
        assert!(ops.surface_stiffness.mul_vec(&t).iter().all(|v| v.abs() < 1e-12));
        assert!(ops.discrete_laplacian(&ones).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn stiffness_matrices_symmetric() {
        let (_, ops) = ops(7);
        assert_eq!(ops.stiffness.asymmetry(), 0.0);
        assert_eq!(ops.surface_stiffness.asymmetry(), 0.0);
    }

    #[test]
    fn trace_rows_select_one_node() {
        let (mesh, ops) = ops(4);
        for j in 0..ops.num_boundary_nodes() {
            let mut e = vec![0.0; ops.num_boundary_nodes()];
            e[j] = 1.0;
            let col = ops.trace_transpose(&e);
            assert_eq!(col.iter().filter(|&&v| v != 0.0).count(), 1);
            assert_eq!(col[mesh.trace_map[j]], 1.0);
        }
    }

    #[test]
    fn norm_examples() {
        let (_, ops) = ops(4);
        assert!((ops.norm_bulk(&vec![1.0; ops.num_nodes()]) - 1.0).abs() < 1e-14);
        assert!((ops.norm_surf(&vec![1.0; ops.num_boundary_nodes()]) - 2.0).abs() < 1e-14);
        let mut e = vec![0.0; ops.num_nodes()];
        e[7] = 1.0;
        assert!((ops.norm_bulk(&e) - ops.mass[7].sqrt()).abs() < 1e-15);
        let ones = vec![1.0; ops.num_nodes()];
        assert!((ops.h1_norm_bulk(&ones) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_fails_assembly() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let mesh = TriMesh::from_parts(vertices, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            FemOperators::assemble(&mesh),
            Err(Error::Assembly(_))
        ));
    }
}
