//! Plain-text `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::noise::{NoiseParams, RhoKind, RvKind};
use crate::potentials::PotentialSpec;
use crate::stepper::{InitialCondition, SavVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Mc,
    Convergence,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi0Kind {
    Constant,
    Cosine,
    Droplet,
}

/// Every run parameter. Missing keys take the values of [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub t_final: f64,
    pub n_steps: usize,
    pub gamma: f64,
    pub gamma_fs_1: f64,
    pub gamma_fs_2: f64,
    pub noise_scale: f64,
    pub sigma_decay: f64,
    pub k_max_cap: usize,
    pub rho_kind: RhoKind,
    pub rho0: f64,
    pub rv_kind: RvKind,
    pub seed: u64,
    pub phi0: Phi0Kind,
    pub phi0_value: f64,
    pub droplet_cx: f64,
    pub droplet_cy: f64,
    pub droplet_radius: f64,
    pub droplet_width: f64,
    pub paths: usize,
    pub out_dir: PathBuf,
    pub mode: Mode,
    pub snapshot_stride: usize,
    pub levels: usize,
    pub classical_sav: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let noise = NoiseParams::default();
        Self {
            nx: 8,
            t_final: 0.1,
            n_steps: 100,
            gamma: 1.0,
            gamma_fs_1: 1.0,
            gamma_fs_2: 2.0,
            noise_scale: noise.noise_scale,
            sigma_decay: noise.sigma_decay,
            k_max_cap: noise.k_max_cap,
            rho_kind: noise.rho_kind,
            rho0: noise.rho0,
            rv_kind: noise.rv_kind,
            seed: noise.seed,
            phi0: Phi0Kind::Cosine,
            phi0_value: 1.0,
            droplet_cx: 0.5,
            droplet_cy: 0.5,
            droplet_radius: 0.25,
            droplet_width: 0.05,
            paths: 8,
            out_dir: PathBuf::from("out"),
            mode: Mode::Run,
            snapshot_stride: 0,
            levels: 4,
            classical_sav: false,
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(line, format!("cannot parse `{v}` as a value for `{key}`")))
}

fn choice<T: Copy>(line: usize, key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|&(_, t)| t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            bad(
                line,
                format!("`{key}` must be one of {}, got `{v}`", names.join("|")),
            )
        })
}

const RHO_KINDS: [(&str, RhoKind); 2] = [("constant", RhoKind::Constant), ("rational", RhoKind::Rational)];
const RV_KINDS: [(&str, RvKind); 2] = [("gaussian", RvKind::Gaussian), ("rademacher", RvKind::Rademacher)];
const PHI0_KINDS: [(&str, Phi0Kind); 3] = [
    ("constant", Phi0Kind::Constant),
    ("cosine", Phi0Kind::Cosine),
    ("droplet", Phi0Kind::Droplet),
];
const MODES: [(&str, Mode); 4] = [
    ("run", Mode::Run),
    ("mc", Mode::Mc),
    ("convergence", Mode::Convergence),
    ("selftest", Mode::Selftest),
];
const BOOLS: [(&str, bool); 2] = [("true", true), ("false", false)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, t)| *t == v).map(|(n, _)| *n).unwrap()
}

impl RunConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(bad(line, format!("missing value for `{key}`")));
            }
            if seen.iter().any(|k| k == key) {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            cfg.set(line, key, value)?;
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "nx" => self.nx = num(line, key, v)?,
            "t_final" => self.t_final = num(line, key, v)?,
            "n_steps" => self.n_steps = num(line, key, v)?,
            "gamma" => self.gamma = num(line, key, v)?,
            "gamma_fs_1" => self.gamma_fs_1 = num(line, key, v)?,
            "gamma_fs_2" => self.gamma_fs_2 = num(line, key, v)?,
            "noise_scale" => self.noise_scale = num(line, key, v)?,
            "sigma_decay" => self.sigma_decay = num(line, key, v)?,
            "k_max_cap" => self.k_max_cap = num(line, key, v)?,
            "rho_kind" => self.rho_kind = choice(line, key, v, &RHO_KINDS)?,
            "rho0" => self.rho0 = num(line, key, v)?,
            "rv_kind" => self.rv_kind = choice(line, key, v, &RV_KINDS)?,
            "seed" => self.seed = num(line, key, v)?,
            "phi0" => self.phi0 = choice(line, key, v, &PHI0_KINDS)?,
            "phi0_value" => self.phi0_value = num(line, key, v)?,
            "droplet_cx" => self.droplet_cx = num(line, key, v)?,
            "droplet_cy" => self.droplet_cy = num(line, key, v)?,
            "droplet_radius" => self.droplet_radius = num(line, key, v)?,
            "droplet_width" => self.droplet_width = num(line, key, v)?,
            "paths" => self.paths = num(line, key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "mode" => self.mode = choice(line, key, v, &MODES)?,
            "snapshot_stride" => self.snapshot_stride = num(line, key, v)?,
            "levels" => self.levels = num(line, key, v)?,
            "classical_sav" => self.classical_sav = choice(line, key, v, &BOOLS)?,
            _ => return Err(bad(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.nx < 1 {
            return fail("nx must be at least 1".into());
        }
        if self.n_steps < 1 {
            return fail("n_steps must be at least 1".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return fail(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.tau() >= 1.0 {
            return fail(format!("time step t_final / n_steps = {} must be below 1", self.tau()));
        }
        if self.paths < 1 {
            return fail("paths must be at least 1".into());
        }
        if self.levels < 1 {
            return fail("levels must be at least 1".into());
        }
        if self.phi0 == Phi0Kind::Droplet && !(self.droplet_width > 0.0) {
            return fail(format!("droplet_width must be positive, got {}", self.droplet_width));
        }
        if !self.phi0_value.is_finite() {
            return fail("phi0_value must be finite".into());
        }
        self.potential()
            .and_then(|_| self.noise_params().validate())
            .map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        PotentialSpec::new(self.gamma, self.gamma_fs_1, self.gamma_fs_2)
    }

    pub fn noise_params(&self) -> NoiseParams {
        NoiseParams {
            noise_scale: self.noise_scale,
            sigma_decay: self.sigma_decay,
            k_max_cap: self.k_max_cap,
            rho_kind: self.rho_kind,
            rho0: self.rho0,
            rv_kind: self.rv_kind,
            seed: self.seed,
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.phi0 {
            Phi0Kind::Constant => InitialCondition::Constant(self.phi0_value),
            Phi0Kind::Cosine => InitialCondition::Cosine,
            Phi0Kind::Droplet => InitialCondition::Droplet {
                center: [self.droplet_cx, self.droplet_cy],
                radius: self.droplet_radius,
                width: self.droplet_width,
            },
        }
    }

    pub fn variant(&self) -> SavVariant {
        if self.classical_sav {
            SavVariant::Classical
        } else {
            SavVariant::Augmented
        }
    }

    /// Serializes every key; parsing the result gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("nx", self.nx.to_string());
        kv("t_final", self.t_final.to_string());
        kv("n_steps", self.n_steps.to_string());
        kv("gamma", self.gamma.to_string());
        kv("gamma_fs_1", self.gamma_fs_1.to_string());
        kv("gamma_fs_2", self.gamma_fs_2.to_string());
        kv("noise_scale", self.noise_scale.to_string());
        kv("sigma_decay", self.sigma_decay.to_string());
        kv("k_max_cap", self.k_max_cap.to_string());
        kv("rho_kind", name_of(&RHO_KINDS, self.rho_kind).into());
        kv("rho0", self.rho0.to_string());
        kv("rv_kind", name_of(&RV_KINDS, self.rv_kind).into());
        kv("seed", self.seed.to_string());
        kv("phi0", name_of(&PHI0_KINDS, self.phi0).into());
        kv("phi0_value", self.phi0_value.to_string());
        kv("droplet_cx", self.droplet_cx.to_string());
        kv("droplet_cy", self.droplet_cy.to_string());
        kv("droplet_radius", self.droplet_radius.to_string());
        kv("droplet_width", self.droplet_width.to_string());
        kv("paths", self.paths.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("mode", name_of(&MODES, self.mode).into());
        kv("snapshot_stride", self.snapshot_stride.to_string());
        kv("levels", self.levels.to_string());
        kv("classical_sav", name_of(&BOOLS, self.classical_sav).into());
        s
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn zero_steps_is_a_validation_error() {
        assert!(matches!(
            RunConfig::parse("n_steps = 0"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn large_time_step_rejected() {
        assert!(matches!(
            RunConfig::parse("t_final = 2\nn_steps = 2"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn round_trip() {
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_config_string()).unwrap(), d);
        let c = RunConfig {
            t_final: 0.3,
            noise_scale: 1.0 / 3.0,
            rho_kind: RhoKind::Constant,
            rv_kind: RvKind::Rademacher,
            phi0: Phi0Kind::Droplet,
            mode: Mode::Convergence,
            classical_sav: true,
            seed: u64::MAX,
            out_dir: PathBuf::from("some/dir"),
            ..d
        };
        assert_eq!(RunConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = RunConfig::parse("nx = 4\n\nn_stepz = 3").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 3, .. }), "{e}");
        let e = RunConfig::parse("nx 4").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
        let e = RunConfig::parse("nx = four").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
        let e = RunConfig::parse("rho_kind = cubic").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
        let e = RunConfig::parse("nx = 4\nnx = 5").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
    }

    #[test]
    fn trailing_comments_and_spacing() {
        let c = RunConfig::parse("  nx=12   # finer\nphi0 = constant\nphi0_value = -1").unwrap();
        assert_eq!(c.nx, 12);
        assert_eq!(c.initial_condition(), InitialCondition::Constant(-1.0));
    }

    #[test]
    fn invalid_physics_is_a_validation_error() {
        assert!(matches!(RunConfig::parse("gamma = 0"), Err(Error::Validation(_))));
        assert!(matches!(RunConfig::parse("sigma_decay = 1"), Err(Error::Validation(_))));
    }
}
