//! Truncated Q-Wiener noise with a multiplicative coefficient.
//!
//! The covariance is diagonal in the Neumann cosine basis of the unit square,
//! `g_k(x, y) = c_{k1} c_{k2} cos(k1 pi x) cos(k2 pi y)` with `c_0 = 1` and
//! `c_k = sqrt(2)`, and amplitudes `lambda_k = scale (1 + |k|^2)^(-sigma)`.
//! On a mesh of size `h` only the modes `0 <= k1, k2 <= K(h)` are kept, where
//! `K(h) = floor(1 / (2h))` (optionally capped). One step increment is
//! `sqrt(tau) sum_k lambda_k g_k xi_k` with i.i.d. symmetric unit-variance `xi_k`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::mesh::TriMesh;
use crate::rng::PathStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoKind {
    /// `rho(z) = rho0`
    Constant,
    /// `rho(z) = rho0 / (1 + z^2)`
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvKind {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub noise_scale: f64,
    pub sigma_decay: f64,
    pub k_max_cap: usize,
    pub rho_kind: RhoKind,
    pub rho0: f64,
    pub rv_kind: RvKind,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            noise_scale: 0.1,
            sigma_decay: 2.0,
            k_max_cap: 16,
            rho_kind: RhoKind::Rational,
            rho0: 1.0,
            rv_kind: RvKind::Gaussian,
            seed: 20240917,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_scale must be finite and non-negative, got {}",
                self.noise_scale
            )));
        }
        if !(self.sigma_decay >= 2.0 && self.sigma_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_decay must be at least 2, got {}",
                self.sigma_decay
            )));
        }
        if !(self.rho0 >= 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho0 must be finite and non-negative, got {}",
                self.rho0
            )));
        }
        Ok(())
    }

    pub fn rho(&self, z: f64) -> f64 {
        match self.rho_kind {
            RhoKind::Constant => self.rho0,
            RhoKind::Rational => self.rho0 / (1.0 + z * z),
        }
    }

    pub fn lambda(&self, k1: u32, k2: u32) -> f64 {
        let k2sum = (k1 as f64).powi(2) + (k2 as f64).powi(2);
        self.noise_scale * (1.0 + k2sum).powf(-self.sigma_decay)
    }
}

/// Largest retained mode index on a mesh of size `h`.
pub fn mode_cutoff(h: f64, cap: usize) -> usize {
    ((1.0 / (2.0 * h)).floor() as usize).min(cap)
}

/// Retained modes `(k1, k2)` in lexicographic order.
pub fn mode_set(k_max: usize) -> Vec<(u32, u32)> {
    let k = k_max as u32;
    (0..=k).flat_map(|a| (0..=k).map(move |b| (a, b))).collect()
}

fn norm_const(k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2
    }
}

/// Orthonormal Neumann cosine basis function `g_k` evaluated at `(x, y)`.
pub fn basis_value(k1: u32, k2: u32, x: f64, y: f64) -> f64 {
    norm_const(k1) * norm_const(k2) * (k1 as f64 * PI * x).cos() * (k2 as f64 * PI * y).cos()
}

/// Nodal noise fields of one step: bulk `w` and its trace `w_gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub w: Vec<f64>,
    pub w_gamma: Vec<f64>,
}

impl NoiseField {
    pub fn zero(n: usize, nb: usize) -> Self {
        Self {
            w: vec![0.0; n],
            w_gamma: vec![0.0; nb],
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub params: NoiseParams,
    pub k_max: usize,
    pub modes: Vec<(u32, u32)>,
    pub lambda: Vec<f64>,
    /// `lambda_k g_k(x_i)`, row-major by node.
    scaled_basis: Vec<f64>,
    num_nodes: usize,
}

impl NoiseModel {
    pub fn new(params: NoiseParams, mesh: &TriMesh) -> Result<Self> {
        params.validate()?;
        let k_max = mode_cutoff(mesh.h, params.k_max_cap);
        let modes = mode_set(k_max);
        let lambda: Vec<f64> = modes.iter().map(|&(a, b)| params.lambda(a, b)).collect();
        let mut scaled_basis = Vec::with_capacity(mesh.num_nodes() * modes.len());
        for p in &mesh.vertices {
            for (&(a, b), l) in modes.iter().zip(&lambda) {
                scaled_basis.push(l * basis_value(a, b, p[0], p[1]));
            }
        }
        Ok(Self {
            params,
            k_max,
            modes,
            lambda,
            scaled_basis,
            num_nodes: mesh.num_nodes(),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Unit-variance symmetric variate `xi_k` at step `n` of a path.
    pub fn xi(&self, stream: &PathStream, step: usize, mode: (u32, u32)) -> f64 {
        match self.params.rv_kind {
            RvKind::Gaussian => stream.gaussian(step as u64, mode.0, mode.1),
            RvKind::Rademacher => stream.rademacher(step as u64, mode.0, mode.1),
        }
    }

    /// Per-mode increments `sqrt(tau) xi_k` of step `step`.
    pub fn sample_increment(&self, stream: &PathStream, step: usize, tau: f64) -> Vec<f64> {
        let sq = tau.sqrt();
        self.modes
            .iter()
            .map(|&m| sq * self.xi(stream, step, m))
            .collect()
    }

    /// `w_i = rho(phi_i) sum_k lambda_k dW_k g_k(x_i)` and its trace.
    pub fn noise_field(&self, ops: &FemOperators, phi_prev: &[f64], increments: &[f64]) -> NoiseField {
        assert_eq!(phi_prev.len(), self.num_nodes);
        assert_eq!(increments.len(), self.num_modes());
        let nm = self.num_modes();
        let w: Vec<f64> = phi_prev
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let row = &self.scaled_basis[i * nm..(i + 1) * nm];
                let s: f64 = row.iter().zip(increments).map(|(g, d)| g * d).sum();
                self.params.rho(p) * s
            })
            .collect();
        let w_gamma = ops.trace(&w);
        NoiseField { w, w_gamma }
    }

    /// `sum_k lambda_k^2 (1 + |g_k|_inf^2 (1 + (k1 pi)^2 + (k2 pi)^2)^2)`, a bound
    /// on the weighted W^{2,inf} coloring sum of the retained spectrum.
    pub fn coloring_sum(&self) -> f64 {
        coloring_sum(&self.params, self.k_max)
    }
}

pub fn coloring_sum(params: &NoiseParams, k_max: usize) -> f64 {
    mode_set(k_max)
        .into_iter()
        .map(|(a, b)| {
            let l = params.lambda(a, b);
            let ginf = norm_const(a) * norm_const(b);
            let d = 1.0 + (a as f64 * PI).powi(2) + (b as f64 * PI).powi(2);
            l * l * (1.0 + ginf * ginf * d * d)
        })
        .sum()
}

/// Sums consecutive pairs of step increments: the coarse step `n` covers
/// fine steps `2n` and `2n + 1`.
pub fn aggregate_pairs(fine: &[Vec<f64>]) -> Vec<Vec<f64>> {
    assert!(fine.len().is_multiple_of(2), "odd number of fine steps");
    fine.chunks_exact(2)
        .map(|pair| pair[0].iter().zip(&pair[1]).map(|(a, b)| a + b).collect())
        .collect()
}

/// Increments of one path on a ladder of dyadic time levels sharing the same
/// Brownian path. `levels[0]` is the coarsest level.
#[derive(Debug, Clone)]
pub struct CoupledIncrements {
    pub levels: Vec<Vec<Vec<f64>>>,
}

impl CoupledIncrements {
    /// Samples the finest level (`coarse_steps * 2^(num_levels-1)` steps of
    /// size `tau_coarse / 2^(num_levels-1)`) and aggregates fine-to-coarse.
    pub fn sample(
        model: &NoiseModel,
        stream: &PathStream,
        coarse_steps: usize,
        tau_coarse: f64,
        num_levels: usize,
    ) -> Result<Self> {
        if model.params.rv_kind == RvKind::Rademacher {
            return Err(Error::Validation(
                "coupled refinement needs gaussian increments; sums of rademacher variates change their law"
                    .into(),
            ));
        }
        if num_levels == 0 {
            return Err(Error::Validation("at least one time level required".into()));
        }
        let factor = 1usize << (num_levels - 1);
        let fine_steps = coarse_steps * factor;
        let tau_fine = tau_coarse / factor as f64;
        let finest: Vec<Vec<f64>> = (1..=fine_steps)
            .map(|n| model.sample_increment(stream, n, tau_fine))
            .collect();
        let mut levels = vec![finest];
        while levels.len() < num_levels {
            let coarser = aggregate_pairs(levels.last().unwrap());
            levels.push(coarser);
        }
        levels.reverse();
        Ok(Self { levels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> TriMesh {
        TriMesh::unit_square(n).unwrap()
    }

    #[test]
    fn cutoff_and_nesting() {
        assert_eq!(mode_cutoff(mesh(8).h, 100), 2);
        assert_eq!(mode_cutoff(mesh(16).h, 100), 5);
        assert_eq!(mode_cutoff(mesh(16).h, 3), 3);
        assert_eq!(mode_cutoff(mesh(1).h, 100), 0);
        for n in [1, 2, 4, 8, 16, 32] {
            let coarse = mode_set(mode_cutoff(mesh(n).h, 100));
            let fine = mode_set(mode_cutoff(mesh(2 * n).h, 100));
            assert!(coarse.iter().all(|m| fine.contains(m)));
        }
    }

    #[test]
    fn single_constant_mode() {
        let m = mesh(4);
        let ops = FemOperators::assemble(&m).unwrap();
        let params = NoiseParams {
            k_max_cap: 0,
            rho_kind: RhoKind::Constant,
            rho0: 1.0,
            ..NoiseParams::default()
        };
        let model = NoiseModel::new(params, &m).unwrap();
        assert_eq!(model.modes, vec![(0, 0)]);
        let tau: f64 = 0.01;
        let phi = vec![0.3; m.num_nodes()];
        let f = model.noise_field(&ops, &phi, &[tau.sqrt() * 1.0]);
        for &w in &f.w {
            assert!((w - tau.sqrt() * model.lambda[0]).abs() < 1e-16);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let m = mesh(4);
        let ops = FemOperators::assemble(&m).unwrap();
        let params = NoiseParams {
            rho0: 0.0,
            ..NoiseParams::default()
        };
        let model = NoiseModel::new(params, &m).unwrap();
        let inc = vec![0.7; model.num_modes()];
        let f = model.noise_field(&ops, &vec![0.1; m.num_nodes()], &inc);
        assert!(f.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn trace_of_field_is_exact() {
        let m = mesh(8);
        let ops = FemOperators::assemble(&m).unwrap();
        let model = NoiseModel::new(NoiseParams::default(), &m).unwrap();
        let stream = PathStream::new(3, 1);
        let inc = model.sample_increment(&stream, 1, 0.01);
        let phi: Vec<f64> = m.vertices.iter().map(|p| p[0] - p[1]).collect();
        let f = model.noise_field(&ops, &phi, &inc);
        for (j, &i) in m.trace_map.iter().enumerate() {
            assert_eq!(f.w_gamma[j].to_bits(), f.w[i].to_bits());
        }
    }

    #[test]
    fn rademacher_support() {
        let m = mesh(8);
        let params = NoiseParams {
            rv_kind: RvKind::Rademacher,
            ..NoiseParams::default()
        };
        let model = NoiseModel::new(params, &m).unwrap();
        let stream = PathStream::new(1, 2);
        for n in 0..200 {
            for &k in &model.modes {
                assert_eq!(model.xi(&stream, n, k).abs(), 1.0);
            }
        }
    }

    #[test]
    fn coloring_sum_nonincreasing_in_sigma() {
        let mut last = f64::INFINITY;
        for s in [2.0, 2.5, 3.0, 4.0] {
            let p = NoiseParams {
                sigma_decay: s,
                noise_scale: 1.0,
                ..NoiseParams::default()
            };
            let c = coloring_sum(&p, 8);
            assert!(c.is_finite() && c <= last);
            last = c;
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let m = mesh(2);
        for p in [
            NoiseParams {
                sigma_decay: 1.5,
                ..NoiseParams::default()
            },
            NoiseParams {
                noise_scale: -0.1,
                ..NoiseParams::default()
            },
            NoiseParams {
                rho0: f64::NAN,
                ..NoiseParams::default()
            },
        ] {
            assert!(NoiseModel::new(p, &m).is_err());
        }
    }

    #[test]
    fn coupled_levels_sum_exactly() {
        let m = mesh(8);
        let model = NoiseModel::new(NoiseParams::default(), &m).unwrap();
        let stream = PathStream::new(11, 0);
        let c = CoupledIncrements::sample(&model, &stream, 4, 0.1, 3).unwrap();
        assert_eq!(c.levels[0].len(), 4);
        assert_eq!(c.levels[1].len(), 8);
        assert_eq!(c.levels[2].len(), 16);
        for l in 0..2 {
            for (n, coarse) in c.levels[l].iter().enumerate() {
                for k in 0..model.num_modes() {
                    let s = c.levels[l + 1][2 * n][k] + c.levels[l + 1][2 * n + 1][k];
                    assert_eq!(s.to_bits(), coarse[k].to_bits());
                }
            }
        }
        // finest level is the direct stream
        let direct = model.sample_increment(&stream, 5, 0.1 / 4.0);
        assert_eq!(direct, c.levels[2][4]);
    }

    #[test]
    fn coupled_rejects_rademacher() {
        let m = mesh(4);
        let params = NoiseParams {
            rv_kind: RvKind::Rademacher,
            ..NoiseParams::default()
        };
        let model = NoiseModel::new(params, &m).unwrap();
        assert!(matches!(
            CoupledIncrements::sample(&model, &PathStream::new(0, 0), 2, 0.1, 2),
            Err(Error::Validation(_))
        ));
    }
}
