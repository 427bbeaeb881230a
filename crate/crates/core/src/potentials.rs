//! Bulk and boundary potentials and their lumped discrete energies.
//!
//! `F(z) = (z^2 - 1)^2 / 4 + gamma` is the shifted double well. The boundary
//! potential adds a wetting density that interpolates between the two wall
//! energies on `[-1, 1]` and is clamped outside:
//! `G(z) = F(z) + gamma_fs(z) - min(gamma_fs_1, gamma_fs_2)`.
//! Both are bounded below by `gamma > 0`.

use crate::error::{Error, Result};
use crate::fem::FemOperators;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    ShiftedPolynomialDoubleWell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub gamma: f64,
    pub gamma_fs_1: f64,
    pub gamma_fs_2: f64,
    pub kind: PotentialKind,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            gamma_fs_1: 1.0,
            gamma_fs_2: 2.0,
            kind: PotentialKind::ShiftedPolynomialDoubleWell,
        }
    }
}

impl PotentialSpec {
    pub fn new(gamma: f64, gamma_fs_1: f64, gamma_fs_2: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if !(gamma_fs_1.is_finite() && gamma_fs_2.is_finite()) {
            return Err(Error::InvalidParameter("wall energies must be finite".into()));
        }
        Ok(Self {
            gamma,
            gamma_fs_1,
            gamma_fs_2,
            kind: PotentialKind::ShiftedPolynomialDoubleWell,
        })
    }

    pub fn f(&self, z: f64) -> f64 {
        let q = z * z - 1.0;
        0.25 * q * q + self.gamma
    }

    pub fn df(&self, z: f64) -> f64 {
        z * z * z - z
    }

    pub fn d2f(&self, z: f64) -> f64 {
        3.0 * z * z - 1.0
    }

    fn half_jump(&self) -> f64 {
        0.5 * (self.gamma_fs_2 - self.gamma_fs_1)
    }

    /// Wetting energy density: quintic C1 interpolant on `[-1, 1]`, constant outside.
    pub fn gamma_fs(&self, z: f64) -> f64 {
        if z < -1.0 {
            self.gamma_fs_1
        } else if z > 1.0 {
            self.gamma_fs_2
        } else {
            let z2 = z * z;
            let poly = z * (0.375 * z2 * z2 - 1.25 * z2 + 1.875);
            self.half_jump() * poly + 0.5 * (self.gamma_fs_2 + self.gamma_fs_1)
        }
    }

    pub fn d_gamma_fs(&self, z: f64) -> f64 {
        if z.abs() > 1.0 {
            0.0
        } else {
            // (15/8)(z^2 - 1)^2 vanishes exactly at the clamp points
            let q = z * z - 1.0;
            self.half_jump() * 1.875 * q * q
        }
    }

    pub fn d2_gamma_fs(&self, z: f64) -> f64 {
        if z.abs() > 1.0 {
            0.0
        } else {
            self.half_jump() * 7.5 * z * (z * z - 1.0)
        }
    }

    pub fn g(&self, z: f64) -> f64 {
        self.f(z) + self.gamma_fs(z) - self.gamma_fs_1.min(self.gamma_fs_2)
    }

    pub fn dg(&self, z: f64) -> f64 {
        self.df(z) + self.d_gamma_fs(z)
    }

    pub fn d2g(&self, z: f64) -> f64 {
        self.d2f(z) + self.d2_gamma_fs(z)
    }

    /// `E_h^O(phi) = sum_i m_i F(phi_i)`.
    pub fn energy_bulk(&self, ops: &FemOperators, phi: &[f64]) -> f64 {
        assert_eq!(phi.len(), ops.num_nodes());
        ops.mass.iter().zip(phi).map(|(m, &p)| m * self.f(p)).sum()
    }

    /// `E_h^Gamma(phi) = sum_j b_j G(phi_{T(j)})` for a bulk nodal vector.
    pub fn energy_surf(&self, ops: &FemOperators, phi: &[f64]) -> f64 {
        assert_eq!(phi.len(), ops.num_nodes());
        ops.boundary_mass
            .iter()
            .zip(&ops.trace_map)
            .map(|(b, &i)| b * self.g(phi[i]))
            .sum()
    }
}
