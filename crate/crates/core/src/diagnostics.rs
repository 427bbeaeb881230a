//! Per-step certificates and per-path statistics.
//!
//! Testing the step equations with `mu`, `theta` and `phi_new - phi_old - w`
//! gives an exact discrete energy balance. With
//! `E_mod = |grad phi|^2 / 2 + |grad_G phi|^2 / 2 + r^2 + s^2`,
//!
//! ```text
//! E_mod(new) - E_mod(old) + |grad dphi|^2 / 2 + |grad_G dphi|^2 / 2 + dr^2 + ds^2
//!     + tau |grad mu|^2 + tau |theta|_h^2  =  S1 + ... + S8
//! ```
//!
//! where the right-hand side collects the noise pairings. Both sides are
//! evaluated separately and compared every step.

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::potentials::PotentialSpec;
use crate::stepper::{CorrectionTerms, CouplingVectors, SavState};

/// Tolerance on `|LHS - RHS| / (1 + |E_mod|)` of the energy identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

pub fn modified_energy(ops: &FemOperators, state: &SavState) -> f64 {
    let tphi = ops.trace(&state.phi);
    0.5 * ops.stiffness.quadratic_form(&state.phi)
        + 0.5 * ops.surface_stiffness.quadratic_form(&tphi)
        + state.r * state.r
        + state.s * state.s
}

/// Both sides of the discrete energy identity of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity {
    pub lhs: f64,
    /// `S1..S8`: bulk and boundary gradient pairings with the noise, then the
    /// three bulk SAV noise terms and the three boundary ones.
    pub terms: [f64; 8],
}

impl EnergyIdentity {
    pub fn rhs(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs()).abs()
    }
}

pub fn energy_identity(
    ops: &FemOperators,
    pot: &PotentialSpec,
    tau: f64,
    prev: &SavState,
    new: &SavState,
    coupling: &CouplingVectors,
) -> EnergyIdentity {
    let dphi: Vec<f64> = new.phi.iter().zip(&prev.phi).map(|(a, b)| a - b).collect();
    let tdphi = ops.trace(&dphi);
    let dr = new.r - prev.r;
    let ds = new.s - prev.s;
    let lhs = modified_energy(ops, new) - modified_energy(ops, prev)
        + 0.5 * ops.stiffness.quadratic_form(&dphi)
        + 0.5 * ops.surface_stiffness.quadratic_form(&tdphi)
        + dr * dr
        + ds * ds
        + tau * ops.stiffness.quadratic_form(&new.mu)
        + tau * ops.inner_surf(&new.theta, &new.theta);

    let w = &coupling.w;
    let wg = &coupling.w_gamma;
    let e_o = pot.energy_bulk(ops, &prev.phi);
    let e_g = pot.energy_surf(ops, &prev.phi);
    let phi_b_old = ops.trace(&prev.phi);

    let sigma_f: f64 = (0..ops.num_nodes())
        .map(|i| ops.mass[i] * pot.df(prev.phi[i]) * w[i])
        .sum();
    let quad_f: f64 = (0..ops.num_nodes())
        .map(|i| ops.mass[i] * pot.d2f(prev.phi[i]) * w[i] * w[i])
        .sum();
    let sigma_g: f64 = (0..ops.num_boundary_nodes())
        .map(|j| ops.boundary_mass[j] * pot.dg(phi_b_old[j]) * wg[j])
        .sum();
    let quad_g: f64 = (0..ops.num_boundary_nodes())
        .map(|j| ops.boundary_mass[j] * pot.d2g(phi_b_old[j]) * wg[j] * wg[j])
        .sum();

    let aug = if coupling.is_augmented() { 1.0 } else { 0.0 };
    let terms = [
        ops.stiffness.bilinear(&new.phi, w),
        ops.surface_stiffness.bilinear(&ops.trace(&new.phi), wg),
        new.r * sigma_f / e_o.sqrt(),
        -aug * new.r * sigma_f * sigma_f / (4.0 * e_o.powf(1.5)),
        aug * new.r * quad_f / (2.0 * e_o.sqrt()),
        new.s * sigma_g / e_g.sqrt(),
        -aug * new.s * sigma_g * sigma_g / (4.0 * e_g.powf(1.5)),
        aug * new.s * quad_g / (2.0 * e_g.sqrt()),
    ];
    EnergyIdentity { lhs, terms }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub e_mod: f64,
    pub e_o: f64,
    pub e_g: f64,
    pub r: f64,
    pub s: f64,
    pub drift_r: f64,
    pub drift_s: f64,
    pub grad_mu_sq: f64,
    pub theta_sq: f64,
    pub xi_o_norm: f64,
    pub xi_g_norm: f64,
    pub identity_residual: f64,
    pub mass_residual: f64,
    pub boundary_residual: f64,
}

impl StepReport {
    pub const CSV_HEADER: &'static str = "step,t,mass,E_mod,E_O,E_G,r,s,drift_r,drift_s,\
grad_mu_sq,theta_sq,xi_O_norm,xi_G_norm,identity_residual,mass_residual,boundary_residual";

    fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.mass,
            self.e_mod,
            self.e_o,
            self.e_g,
            self.r,
            self.s,
            self.drift_r,
            self.drift_s,
            self.grad_mu_sq,
            self.theta_sq,
            self.xi_o_norm,
            self.xi_g_norm,
            self.identity_residual,
            self.mass_residual,
            self.boundary_residual,
        ]
    }

    pub fn csv_row(&self) -> String {
        let mut row = self.step.to_string();
        for v in self.values() {
            row.push(',');
            row.push_str(&format!("{v:e}"));
        }
        row
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Whether the energy identity residual is within [`IDENTITY_TOLERANCE`].
    pub fn identity_ok(&self) -> bool {
        self.identity_residual <= IDENTITY_TOLERANCE * (1.0 + self.e_mod.abs())
    }
}

fn mass(ops: &FemOperators, phi: &[f64]) -> f64 {
    ops.mass.iter().zip(phi).map(|(m, p)| m * p).sum()
}

/// Record for the initial state; balances and corrections are zero.
pub fn initial_report(ops: &FemOperators, pot: &PotentialSpec, state: &SavState) -> StepReport {
    let e_o = pot.energy_bulk(ops, &state.phi);
    let e_g = pot.energy_surf(ops, &state.phi);
    StepReport {
        step: 0,
        t: state.t,
        mass: mass(ops, &state.phi),
        e_mod: modified_energy(ops, state),
        e_o,
        e_g,
        r: state.r,
        s: state.s,
        drift_r: (state.r - e_o.sqrt()).abs(),
        drift_s: (state.s - e_g.sqrt()).abs(),
        grad_mu_sq: ops.stiffness.quadratic_form(&state.mu),
        theta_sq: ops.inner_surf(&state.theta, &state.theta),
        xi_o_norm: 0.0,
        xi_g_norm: 0.0,
        identity_residual: 0.0,
        mass_residual: 0.0,
        boundary_residual: 0.0,
    }
}

/// Diagnostics of one accepted step from `prev` to `new`.
#[allow(clippy::too_many_arguments)]
pub fn report(
    ops: &FemOperators,
    pot: &PotentialSpec,
    tau: f64,
    step: usize,
    prev: &SavState,
    new: &SavState,
    coupling: &CouplingVectors,
    corrections: &CorrectionTerms,
) -> Result<StepReport> {
    let e_o = pot.energy_bulk(ops, &new.phi);
    let e_g = pot.energy_surf(ops, &new.phi);
    let identity = energy_identity(ops, pot, tau, prev, new, coupling);

    // conservation rows tested against constants
    let (mut bal, mut scale) = (0.0, 0.0);
    for i in 0..ops.num_nodes() {
        let m = ops.mass[i];
        bal += m * (new.phi[i] - prev.phi[i] - coupling.w[i]);
        scale += m * (new.phi[i].abs() + prev.phi[i].abs() + coupling.w[i].abs());
    }
    let mass_residual = bal.abs() / scale.max(f64::MIN_POSITIVE);

    let (mut bbal, mut bscale) = (0.0, 0.0);
    for (j, &i) in ops.trace_map.iter().enumerate() {
        let b = ops.boundary_mass[j];
        let (pn, po, th, wg) = (new.phi[i], prev.phi[i], new.theta[j], coupling.w_gamma[j]);
        bbal += b * (pn - po + tau * th - wg);
        bscale += b * (pn.abs() + po.abs() + tau * th.abs() + wg.abs());
    }
    let boundary_residual = bbal.abs() / bscale.max(f64::MIN_POSITIVE);

    let rep = StepReport {
        step,
        t: new.t,
        mass: mass(ops, &new.phi),
        e_mod: modified_energy(ops, new),
        e_o,
        e_g,
        r: new.r,
        s: new.s,
        drift_r: (new.r - e_o.sqrt()).abs(),
        drift_s: (new.s - e_g.sqrt()).abs(),
        grad_mu_sq: ops.stiffness.quadratic_form(&new.mu),
        theta_sq: ops.inner_surf(&new.theta, &new.theta),
        xi_o_norm: corrections.norm_bulk(ops),
        xi_g_norm: corrections.norm_surf(ops),
        identity_residual: identity.residual(),
        mass_residual,
        boundary_residual,
    };
    if !rep.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite diagnostics at step {step}"
        )));
    }
    Ok(rep)
}

/// Summary of one complete path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStatistics {
    pub max_drift_r: f64,
    pub max_drift_s: f64,
    /// `(lag, sum_m tau |phi^{m+lag} - phi^m|_h^2)` for lags 1, 2, 4, ...
    pub nikolskii: Vec<(usize, f64)>,
    /// `sum_n tau |Xi_O^n|_h^2`
    pub xi_o_sum: f64,
    pub xi_g_sum: f64,
    pub max_h1_bulk: f64,
    pub max_h1_surf: f64,
    pub mass_change: f64,
    pub final_e_mod: f64,
    pub max_identity_ratio: f64,
    pub dissipation: f64,
}

impl PathStatistics {
    /// Named scalar statistics, in a fixed order for ensemble tables.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("max_drift_r".to_string(), self.max_drift_r),
            ("max_drift_s".to_string(), self.max_drift_s),
            ("xi_O_sum".to_string(), self.xi_o_sum),
            ("xi_G_sum".to_string(), self.xi_g_sum),
            ("max_h1_bulk".to_string(), self.max_h1_bulk),
            ("max_h1_surf".to_string(), self.max_h1_surf),
            ("mass_change".to_string(), self.mass_change),
            ("final_E_mod".to_string(), self.final_e_mod),
            ("max_identity_ratio".to_string(), self.max_identity_ratio),
            ("dissipation".to_string(), self.dissipation),
        ];
        for &(lag, v) in &self.nikolskii {
            out.push((format!("nikolskii_lag{lag}"), v));
        }
        out
    }
}

/// `sum_{m=0}^{N-lag} tau |phi^{m+lag} - phi^m|_{h,O}^2`.
pub fn nikolskii_sum(ops: &FemOperators, tau: f64, trajectory: &[Vec<f64>], lag: usize) -> f64 {
    if lag == 0 || lag >= trajectory.len() {
        return 0.0;
    }
    trajectory
        .windows(lag + 1)
        .map(|win| {
            let d: Vec<f64> = win[lag].iter().zip(&win[0]).map(|(a, b)| a - b).collect();
            tau * ops.inner_bulk(&d, &d)
        })
        .sum()
}

/// `trajectory[n]` is `phi^n` for `n = 0..=N`; `reports[n]` the matching record.
pub fn path_statistics(
    ops: &FemOperators,
    tau: f64,
    reports: &[StepReport],
    trajectory: &[Vec<f64>],
) -> PathStatistics {
    assert_eq!(reports.len(), trajectory.len());
    let steps = trajectory.len().saturating_sub(1);
    let mut lags = Vec::new();
    let mut lag = 1;
    while lag <= steps {
        lags.push((lag, nikolskii_sum(ops, tau, trajectory, lag)));
        lag *= 2;
    }
    let max = |f: &dyn Fn(&StepReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let tail = reports.iter().skip(1);
    PathStatistics {
        max_drift_r: max(&|r| r.drift_r),
        max_drift_s: max(&|r| r.drift_s),
        nikolskii: lags,
        xi_o_sum: tail.clone().map(|r| tau * r.xi_o_norm * r.xi_o_norm).sum(),
        xi_g_sum: tail.clone().map(|r| tau * r.xi_g_norm * r.xi_g_norm).sum(),
        max_h1_bulk: trajectory
            .iter()
            .map(|p| ops.h1_norm_bulk(p))
            .fold(0.0, f64::max),
        max_h1_surf: trajectory
            .iter()
            .map(|p| ops.h1_norm_surf(&ops.trace(p)))
            .fold(0.0, f64::max),
        mass_change: match (reports.first(), reports.last()) {
            (Some(a), Some(b)) => b.mass - a.mass,
            _ => 0.0,
        },
        final_e_mod: reports.last().map_or(0.0, |r| r.e_mod),
        max_identity_ratio: max(&|r| r.identity_residual / (1.0 + r.e_mod.abs())),
        dissipation: tail.map(|r| tau * (r.grad_mu_sq + r.theta_sq)).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriMesh;

    #[test]
    fn nikolskii_matches_double_loop() {
        let mesh = TriMesh::unit_square(3).unwrap();
        let ops = FemOperators::assemble(&mesh).unwrap();
        let traj: Vec<Vec<f64>> = (0..9)
            .map(|n| {
                mesh.vertices
                    .iter()
                    .map(|p| ((n as f64) * 0.7 + p[0] * 3.0).sin() * p[1])
                    .collect()
            })
            .collect();
        let tau = 0.125;
        for lag in [1, 2, 4, 8] {
            let mut brute = 0.0;
            for m in 0..traj.len() {
                if m + lag >= traj.len() {
                    break;
                }
                for i in 0..ops.num_nodes() {
                    let d = traj[m + lag][i] - traj[m][i];
                    brute += tau * ops.mass[i] * d * d;
                }
            }
            let fast = nikolskii_sum(&ops, tau, &traj, lag);
            assert!((brute - fast).abs() <= 1e-12 * brute.max(1.0));
        }
        assert_eq!(nikolskii_sum(&ops, tau, &traj, 9), 0.0);
    }

    #[test]
    fn csv_header_matches_row_width() {
        let r = StepReport {
            step: 3,
            t: 0.5,
            mass: 0.0,
            e_mod: 1.0,
            e_o: 1.0,
            e_g: 1.0,
            r: 1.0,
            s: 1.0,
            drift_r: 0.0,
            drift_s: 0.0,
            grad_mu_sq: 0.0,
            theta_sq: 0.0,
            xi_o_norm: 0.0,
            xi_g_norm: 0.0,
            identity_residual: 0.0,
            mass_residual: 0.0,
            boundary_residual: 0.0,
        };
        assert_eq!(
            StepReport::CSV_HEADER.split(',').count(),
            r.csv_row().split(',').count()
        );
        assert!(r.csv_row().starts_with("3,5e-1,"));
    }
}
