//! Single paths, Monte Carlo ensembles and coupled refinement studies.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::output::{reports_csv, write_text, write_vtk};
use crate::diagnostics::{self, PathStatistics, StepReport};
use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::mesh::TriMesh;
use crate::noise::{CoupledIncrements, NoiseModel};
use crate::potentials::PotentialSpec;
use crate::rng::PathStream;
use crate::stepper::{initial_state, SavState, Stepper};

/// Mesh, operators, potential and noise model built once per config.
pub struct Problem {
    pub config: RunConfig,
    pub mesh: TriMesh,
    pub ops: FemOperators,
    pub potential: PotentialSpec,
    pub noise: NoiseModel,
}

/// States and reports of one path, index `n` holding time level `n`.
#[derive(Debug, Clone)]
pub struct PathRun {
    pub states: Vec<SavState>,
    pub reports: Vec<StepReport>,
}

impl PathRun {
    pub fn final_state(&self) -> &SavState {
        self.states.last().expect("a path holds at least its initial state")
    }

    pub fn csv(&self) -> String {
        reports_csv(&self.reports)
    }

    pub fn statistics(&self, ops: &FemOperators, tau: f64) -> PathStatistics {
        let phis: Vec<Vec<f64>> = self.states.iter().map(|s| s.phi.clone()).collect();
        diagnostics::path_statistics(ops, tau, &self.reports, &phis)
    }
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = TriMesh::unit_square(config.nx)?;
        let ops = FemOperators::assemble(&mesh)?;
        let noise = NoiseModel::new(config.noise_params(), &mesh)?;
        Ok(Self {
            config: config.clone(),
            potential: config.potential()?,
            mesh,
            ops,
            noise,
        })
    }

    pub fn tau(&self) -> f64 {
        self.config.tau()
    }

    pub fn initial_state(&self) -> Result<SavState> {
        initial_state(
            &self.mesh,
            &self.ops,
            &self.potential,
            self.config.initial_condition(),
        )
    }

    pub fn stepper(&self, tau: f64) -> Result<Stepper<'_>> {
        Stepper::new(&self.ops, self.potential, tau, self.config.variant())
    }

    pub fn stream(&self, path_id: u64) -> PathStream {
        PathStream::new(self.config.seed, path_id)
    }

    /// Per-mode increments of path `path_id` at the configured step size.
    pub fn increments(&self, path_id: u64) -> Vec<Vec<f64>> {
        let stream = self.stream(path_id);
        let tau = self.tau();
        (1..=self.config.n_steps)
            .map(|n| self.noise.sample_increment(&stream, n, tau))
            .collect()
    }

    /// Runs one path of `increments.len()` steps of size `tau`.
    pub fn simulate(&self, tau: f64, increments: &[Vec<f64>]) -> Result<PathRun> {
        let stepper = self.stepper(tau)?;
        let start = self.initial_state()?;
        let mut reports = Vec::with_capacity(increments.len() + 1);
        reports.push(diagnostics::initial_report(&self.ops, &self.potential, &start));
        let mut states = Vec::with_capacity(increments.len() + 1);
        states.push(start);
        for (k, inc) in increments.iter().enumerate() {
            let prev = states.last().unwrap();
            let noise = self.noise.noise_field(&self.ops, &prev.phi, inc);
            let out = stepper.advance(prev, &noise)?;
            let rep = diagnostics::report(
                &self.ops,
                &self.potential,
                tau,
                k + 1,
                prev,
                &out.state,
                &out.coupling,
                &out.corrections,
            )?;
            reports.push(rep);
            states.push(out.state);
        }
        Ok(PathRun { states, reports })
    }

    pub fn run_path(&self, path_id: u64) -> Result<PathRun> {
        self.simulate(self.tau(), &self.increments(path_id))
    }

    /// Writes the path CSV and any VTK snapshots into `out_dir`.
    pub fn write_path(&self, out_dir: &Path, path_id: u64, run: &PathRun) -> Result<()> {
        write_text(&out_dir.join(path_csv_name(path_id)), &run.csv())?;
        let stride = self.config.snapshot_stride;
        if stride > 0 {
            for (n, st) in run.states.iter().enumerate().step_by(stride) {
                let name = format!("snapshot_{path_id:04}_{n:06}.vtk");
                write_vtk(&out_dir.join(name), &self.mesh, &st.phi, &st.mu)?;
            }
        }
        Ok(())
    }
}

pub fn path_csv_name(path_id: u64) -> String {
    format!("path_{path_id:04}.csv")
}

/// Single path `path_id` of the config, without writing output.
pub fn run_path(config: &RunConfig, path_id: u64) -> Result<PathRun> {
    Problem::new(config)?.run_path(path_id)
}

/// Single path 0 with its CSV and snapshots written to `out_dir`.
pub fn execute_run(config: &RunConfig) -> Result<PathRun> {
    let problem = Problem::new(config)?;
    let run = problem.run_path(0)?;
    problem.write_path(&config.out_dir, 0, &run)?;
    Ok(run)
}

/// Worker count from `SAVCH_THREADS`, else the rayon default.
pub fn worker_count() -> usize {
    std::env::var("SAVCH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Maps `f` over `0..count` on `workers` threads, results ordered by index.
fn par_map<T: Send>(workers: usize, count: usize, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count as u64).into_par_iter().map(f).collect()))
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let m = values.len();
        if m == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let std_error = if m > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            samples: m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McSummary {
    /// Per-statistic ensemble mean over the successful paths.
    pub stats: Vec<(String, MeanSe)>,
    pub per_path: Vec<Option<PathStatistics>>,
    pub failures: Vec<(u64, String)>,
}

impl McSummary {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<MeanSe> {
        self.stats.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("statistic,mean,std_error,samples\n");
        for (name, v) in &self.stats {
            let _ = writeln!(s, "{name},{:e},{:e},{}", v.mean, v.std_error, v.samples);
        }
        s
    }

    pub fn status(&self) -> String {
        let mut s = String::from(if self.complete() { "complete\n" } else { "incomplete\n" });
        for (id, msg) in &self.failures {
            let _ = writeln!(s, "path {id} failed: {msg}");
        }
        s
    }
}

fn summarize(per_path: &[Option<PathStatistics>]) -> Vec<(String, MeanSe)> {
    let ok: Vec<&PathStatistics> = per_path.iter().flatten().collect();
    let Some(first) = ok.first() else {
        return Vec::new();
    };
    let names: Vec<String> = first.named().into_iter().map(|(n, _)| n).collect();
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals: Vec<f64> = ok.iter().map(|p| p.named()[k].1).collect();
            (name.clone(), MeanSe::of(&vals))
        })
        .collect()
}

/// Monte Carlo ensemble on `workers` threads; writes per-path CSVs,
/// `summary.csv` and `status.txt` when `write` is set.
pub fn mc_run_with_workers(config: &RunConfig, workers: usize, write: bool) -> Result<McSummary> {
    if config.paths < 2 {
        return Err(Error::Validation(format!(
            "an ensemble needs at least 2 paths, got {}",
            config.paths
        )));
    }
    let problem = Problem::new(config)?;
    let tau = problem.tau();
    let results = par_map(workers, config.paths, |id| problem.run_path(id))?;
    let mut per_path = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (id, res) in results.into_iter().enumerate() {
        match res {
            Ok(run) => {
                if write {
                    problem.write_path(&config.out_dir, id as u64, &run)?;
                }
                per_path.push(Some(run.statistics(&problem.ops, tau)));
            }
            Err(e) => {
                failures.push((id as u64, e.to_string()));
                per_path.push(None);
            }
        }
    }
    let summary = McSummary {
        stats: summarize(&per_path),
        per_path,
        failures,
    };
    if write {
        write_text(&config.out_dir.join("summary.csv"), &summary.csv())?;
        write_text(&config.out_dir.join("status.txt"), &summary.status())?;
    }
    Ok(summary)
}

pub fn mc_run(config: &RunConfig) -> Result<McSummary> {
    mc_run_with_workers(config, worker_count(), true)
}

/// Ordinary least squares fit of `log2(y)` against `log2(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
}

/// `None` when fewer than two points or any value is not strictly positive.
pub fn fit_rate(x: &[f64], y: &[f64]) -> Option<RateFit> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(RateFit { slope, r_squared })
}

#[derive(Debug, Clone)]
pub struct LevelRow {
    pub tau: f64,
    pub drift_r: MeanSe,
    pub drift_s: MeanSe,
    pub xi_o_sum: MeanSe,
    pub xi_g_sum: MeanSe,
    /// `|phi_tau(T) - phi_{tau/2}(T)|_h` against the next finer level.
    pub difference: Option<MeanSe>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
    /// `[path][level]` pathwise differences at the final time.
    pub differences: Vec<Vec<f64>>,
    pub fits: Vec<(String, Option<RateFit>)>,
}

impl ConvergenceTable {
    pub fn fit(&self, name: &str) -> Option<RateFit> {
        self.fits.iter().find(|(n, _)| n == name).and_then(|(_, f)| *f)
    }

    /// Fraction of paths whose differences strictly decrease from level to level.
    pub fn decreasing_fraction(&self) -> f64 {
        if self.differences.is_empty() {
            return 0.0;
        }
        let ok = self
            .differences
            .iter()
            .filter(|d| d.windows(2).all(|w| w[1] < w[0]))
            .count();
        ok as f64 / self.differences.len() as f64
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(
            "tau,drift_r_mean,drift_r_se,drift_s_mean,drift_s_se,xi_O_sum_mean,xi_O_sum_se,\
xi_G_sum_mean,xi_G_sum_se,difference_mean,difference_se\n",
        );
        for r in &self.rows {
            let _ = write!(s, "{:e}", r.tau);
            for v in [r.drift_r, r.drift_s, r.xi_o_sum, r.xi_g_sum] {
                let _ = write!(s, ",{:e},{:e}", v.mean, v.std_error);
            }
            match r.difference {
                Some(d) => {
                    let _ = writeln!(s, ",{:e},{:e}", d.mean, d.std_error);
                }
                None => s.push_str(",,\n"),
            }
        }
        s
    }

    pub fn rates_csv(&self) -> String {
        let mut s = String::from("statistic,slope,r_squared\n");
        for (name, fit) in &self.fits {
            match fit {
                Some(f) => {
                    let _ = writeln!(s, "{name},{:e},{:e}", f.slope, f.r_squared);
                }
                None => {
                    let _ = writeln!(s, "{name},undefined,undefined");
                }
            }
        }
        s
    }

    pub fn differences_csv(&self) -> String {
        let mut s = String::from("path");
        for l in 0..self.differences.first().map_or(0, |d| d.len()) {
            let _ = write!(s, ",level{l}");
        }
        s.push('\n');
        for (id, d) in self.differences.iter().enumerate() {
            let _ = write!(s, "{id}");
            for v in d {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
        s
    }
}

struct PathLevels {
    stats: Vec<PathStatistics>,
    differences: Vec<f64>,
}

/// Coupled-noise study over `levels` dyadic step sizes
/// `tau_l = t_final / (n_steps 2^l)` on a fixed mesh.
pub fn convergence_study_with_workers(
    config: &RunConfig,
    levels: usize,
    workers: usize,
) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::Validation(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let problem = Problem::new(config)?;
    let taus: Vec<f64> = (0..levels)
        .map(|l| config.t_final / (config.n_steps as f64 * (1u64 << l) as f64))
        .collect();
    let one_path = |id: u64| -> Result<PathLevels> {
        let coupled = CoupledIncrements::sample(
            &problem.noise,
            &problem.stream(id),
            config.n_steps,
            taus[0],
            levels,
        )?;
        let mut stats = Vec::with_capacity(levels);
        let mut finals: Vec<Vec<f64>> = Vec::with_capacity(levels);
        for (tau, inc) in taus.iter().zip(&coupled.levels) {
            let run = problem.simulate(*tau, inc)?;
            stats.push(run.statistics(&problem.ops, *tau));
            finals.push(run.final_state().phi.clone());
        }
        let differences = finals
            .windows(2)
            .map(|w| {
                let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                problem.ops.norm_bulk(&d)
            })
            .collect();
        Ok(PathLevels { stats, differences })
    };
    let results = par_map(workers, config.paths, one_path)?;
    let mut paths = Vec::with_capacity(results.len());
    for (id, r) in results.into_iter().enumerate() {
        paths.push(r.map_err(|e| match e {
            Error::StepFailure {
                step,
                residual,
                detail,
            } => Error::StepFailure {
                step,
                residual,
                detail: format!("path {id}: {detail}"),
            },
            other => other,
        })?);
    }

    let column = |l: usize, f: &dyn Fn(&PathStatistics) -> f64| {
        MeanSe::of(&paths.iter().map(|p| f(&p.stats[l])).collect::<Vec<_>>())
    };
    let rows: Vec<LevelRow> = (0..levels)
        .map(|l| LevelRow {
            tau: taus[l],
            drift_r: column(l, &|s| s.max_drift_r),
            drift_s: column(l, &|s| s.max_drift_s),
            xi_o_sum: column(l, &|s| s.xi_o_sum),
            xi_g_sum: column(l, &|s| s.xi_g_sum),
            difference: (l + 1 < levels).then(|| {
                MeanSe::of(&paths.iter().map(|p| p.differences[l]).collect::<Vec<_>>())
            }),
        })
        .collect();

    let fit_of = |f: &dyn Fn(&LevelRow) -> Option<f64>| {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|r| f(r).map(|v| (r.tau, v)))
            .unzip();
        fit_rate(&x, &y)
    };
    let fits = vec![
        ("drift_r".to_string(), fit_of(&|r| Some(r.drift_r.mean))),
        ("drift_s".to_string(), fit_of(&|r| Some(r.drift_s.mean))),
        ("xi_O_sum".to_string(), fit_of(&|r| Some(r.xi_o_sum.mean))),
        ("xi_G_sum".to_string(), fit_of(&|r| Some(r.xi_g_sum.mean))),
        ("difference".to_string(), fit_of(&|r| r.difference.map(|d| d.mean))),
    ];
    Ok(ConvergenceTable {
        rows,
        differences: paths.into_iter().map(|p| p.differences).collect(),
        fits,
    })
}

/// Runs the study and writes `convergence.csv`, `rates.csv` and `differences.csv`.
pub fn convergence_study(config: &RunConfig, levels: usize) -> Result<ConvergenceTable> {
    let table = convergence_study_with_workers(config, levels, worker_count())?;
    let dir = &config.out_dir;
    write_text(&dir.join("convergence.csv"), &table.csv())?;
    write_text(&dir.join("rates.csv"), &table.rates_csv())?;
    write_text(&dir.join("differences.csv"), &table.differences_csv())?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[7.0]).std_error, 0.0);
    }

    #[test]
    fn rate_fit_recovers_power_law() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.75)).collect();
        let f = fit_rate(&x, &y).unwrap();
        assert!((f.slope - 0.75).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_rate(&x, &[1.0, 0.0, 1.0, 1.0]).is_none());
        assert!(fit_rate(&x[..1], &y[..1]).is_none());
    }

    #[test]
    fn constant_one_is_a_fixed_path() {
        let cfg = RunConfig::parse("nx = 4\nn_steps = 10\nphi0 = constant\nnoise_scale = 0").unwrap();
        let run = run_path(&cfg, 0).unwrap();
        assert_eq!(run.states.len(), 11);
        assert!(run.final_state().phi.iter().all(|&p| (p - 1.0).abs() < 1e-13));
        let stats = run.statistics(&Problem::new(&cfg).unwrap().ops, cfg.tau());
        assert!(stats.nikolskii.iter().all(|&(_, v)| v < 1e-24));
        assert_eq!(stats.xi_o_sum, 0.0);
    }

    #[test]
    fn rademacher_convergence_rejected() {
        let cfg = RunConfig::parse("nx = 2\nn_steps = 2\nrv_kind = rademacher\npaths = 2").unwrap();
        assert!(matches!(
            convergence_study_with_workers(&cfg, 3, 1),
            Err(Error::Validation(_))
        ));
    }
}
