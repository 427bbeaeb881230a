//! Quick identity checks runnable from the command line.

use super::config::RunConfig;
use super::runs::run_path;
use crate::error::Result;
use crate::fem::FemOperators;
use crate::mesh::TriMesh;
use crate::noise::{coloring_sum, NoiseParams};
use crate::potentials::PotentialSpec;
use crate::rng::PathStream;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn geometry() -> Result<Vec<Check>> {
    let mesh = TriMesh::unit_square(8)?;
    let ops = FemOperators::assemble(&mesh)?;
    let area: f64 = ops.mass.iter().sum();
    let perimeter: f64 = ops.boundary_mass.iter().sum();
    let ones = vec![1.0; ops.num_nodes()];
    let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
    let kernel = ops.stiffness.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let energy_x = ops.stiffness.quadratic_form(&x);
    Ok(vec![
        check("lumped mass sums to area", (area - 1.0).abs() < 1e-13, format!("{area}")),
        check(
            "boundary mass sums to perimeter",
            (perimeter - 4.0).abs() < 1e-13,
            format!("{perimeter}"),
        ),
        check("constants in stiffness kernel", kernel < 1e-13, format!("{kernel:e}")),
        check(
            "Dirichlet energy of x is 1",
            (energy_x - 1.0).abs() < 1e-13,
            format!("{energy_x}"),
        ),
    ])
}

fn potentials() -> Vec<Check> {
    let p = PotentialSpec::default();
    let mut worst = 0.0f64;
    for k in 0..=40 {
        let z = -1.9 + 0.0925 * k as f64;
        let h = 1e-5;
        let fd = (p.g(z + h) - p.g(z - h)) / (2.0 * h);
        worst = worst.max((fd - p.dg(z)).abs() / p.dg(z).abs().max(1.0));
    }
    vec![check(
        "boundary potential derivative",
        worst < 1e-6,
        format!("max relative error {worst:e}"),
    )]
}

fn noise() -> Vec<Check> {
    let stream = PathStream::new(20240917, 0);
    let n = 20_000u64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for k in 0..n {
        let v = stream.gaussian(k, 0, 0);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    let params = NoiseParams {
        noise_scale: 1.0,
        ..NoiseParams::default()
    };
    let c = coloring_sum(&params, 8);
    vec![
        check(
            "gaussian moments",
            mean.abs() < 4.0 / (n as f64).sqrt() && (var - 1.0).abs() < 0.05,
            format!("mean {mean:.4}, variance {var:.4}"),
        ),
        check(
            "coloring sum regression",
            (c - 110.42202588069023).abs() < 1e-9,
            format!("{c}"),
        ),
    ]
}

fn dynamics() -> Result<Vec<Check>> {
    let fixed = RunConfig::parse("nx = 4\nn_steps = 20\nphi0 = constant\nnoise_scale = 0")?;
    let run = run_path(&fixed, 0)?;
    let dev = run
        .final_state()
        .phi
        .iter()
        .fold(0.0f64, |m, p| m.max((p - 1.0).abs()));

    let calm = RunConfig::parse("nx = 8\nn_steps = 40\nt_final = 0.04\nnoise_scale = 0")?;
    let run = run_path(&calm, 0)?;
    let rise = run
        .reports
        .windows(2)
        .map(|w| w[1].e_mod - w[0].e_mod)
        .fold(f64::NEG_INFINITY, f64::max);

    let noisy = RunConfig::parse("nx = 6\nn_steps = 30\nt_final = 0.03")?;
    let run = run_path(&noisy, 1)?;
    let identity_ok = run.reports.iter().all(|r| r.identity_ok());
    let worst_identity = run
        .reports
        .iter()
        .map(|r| r.identity_residual / (1.0 + r.e_mod.abs()))
        .fold(0.0, f64::max);
    let worst_balance = run
        .reports
        .iter()
        .map(|r| r.mass_residual.max(r.boundary_residual))
        .fold(0.0, f64::max);
    Ok(vec![
        check("constant state is a fixed point", dev < 1e-12, format!("{dev:e}")),
        check(
            "modified energy dissipates without noise",
            rise <= 1e-10,
            format!("largest increase {rise:e}"),
        ),
        check(
            "per-step energy identity",
            identity_ok,
            format!("worst scaled residual {worst_identity:e}"),
        ),
        check(
            "mass and boundary balances",
            worst_balance <= 1e-12,
            format!("worst relative residual {worst_balance:e}"),
        ),
    ])
}

fn config() -> Vec<Check> {
    let d = RunConfig::default();
    let ok = RunConfig::parse(&d.to_config_string()).map(|c| c == d).unwrap_or(false);
    vec![
        check("config round trip", ok, String::new()),
        check(
            "zero steps rejected",
            RunConfig::parse("n_steps = 0").is_err(),
            String::new(),
        ),
    ]
}

/// Runs every check; errors while setting a check up count as failures.
pub fn run_selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<Vec<Check>>| match r {
        Ok(c) => out.extend(c),
        Err(e) => out.push(check(name, false, e.to_string())),
    };
    push("geometry", geometry());
    push("potentials", Ok(potentials()));
    push("noise", Ok(noise()));
    push("dynamics", dynamics());
    push("config", Ok(config()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
