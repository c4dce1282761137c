//! Flat key-value experiment configuration.
//!
//! The on-disk format is one `key = value` pair per line; `#` starts a
//! comment; lists are comma-separated. Unknown keys are rejected so typos
//! fail loudly. Every run records the canonical serialization's SHA-256
//! hash, which pins the full parameter set for reproducibility.

use crate::error::{Result, SqgError};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Surrogate-vs-exact operator error rates across a frequency sweep.
    ApproxRates,
    /// Growth of the `Ḣ^β` norm from small initial data.
    NormInflation,
    /// Solver-vs-pseudo-solution error tracking across a frequency sweep.
    PseudoError,
    /// Far-field decay exponent of the heat-evolved radial flow.
    RadialDecay,
    /// Interaction defect of translated, rescaled solutions.
    ComposeTranslates,
    /// Table of the closed-form constants vs quadrature.
    Constants,
}

impl ExperimentKind {
    /// Parses the config-file / CLI spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "approx_rates" | "approx-rates" => Ok(ExperimentKind::ApproxRates),
            "norm_inflation" | "norm-inflation" => Ok(ExperimentKind::NormInflation),
            "pseudo_error" | "pseudo-error" => Ok(ExperimentKind::PseudoError),
            "radial_decay" | "radial-decay" => Ok(ExperimentKind::RadialDecay),
            "compose_translates" | "compose-translates" => Ok(ExperimentKind::ComposeTranslates),
            "constants" => Ok(ExperimentKind::Constants),
            other => Err(SqgError::Config(format!("unknown experiment '{other}'"))),
        }
    }

    /// Canonical config-file spelling.
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ApproxRates => "approx_rates",
            ExperimentKind::NormInflation => "norm_inflation",
            ExperimentKind::PseudoError => "pseudo_error",
            ExperimentKind::RadialDecay => "radial_decay",
            ExperimentKind::ComposeTranslates => "compose_translates",
            ExperimentKind::Constants => "constants",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full parameter set of one experiment run. Defaults are desk-scale:
/// moderate frequencies and scales chosen so every sweep point is resolved
/// on the configured grid within minutes of runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Which driver to run.
    pub experiment: ExperimentKind,
    /// Dissipation order `α`.
    pub alpha: f64,
    /// Regularity exponent `β`.
    pub beta: f64,
    /// Angular frequency `N` (baseline value; sweeps override per point).
    pub n_freq: u32,
    /// Concentration scale `λ`.
    pub lambda: f64,
    /// Phase constant `K` (0 = choose automatically where needed).
    pub k_const: f64,
    /// Perturbation-annulus half-width.
    pub eps_tilde: f64,
    /// Grid points per side.
    pub grid_n: usize,
    /// Box half-length `L`.
    pub box_l: f64,
    /// Frequency sweep (`approx_rates`, `pseudo_error`, `norm_inflation`).
    pub sweep_n: Vec<u32>,
    /// Dissipation-order sweep (`radial_decay`).
    pub sweep_alpha: Vec<f64>,
    /// Separation sweep (`compose_translates`).
    pub sweep_r: Vec<f64>,
    /// Number of translated summands (`compose_translates`).
    pub translates_j: usize,
    /// Number of observer sample times for time-series experiments.
    pub sample_times: usize,
    /// Output directory for emitted reports.
    pub out_dir: PathBuf,
    /// Seed recorded for provenance (all drivers are deterministic).
    pub seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults for one experiment kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            alpha: 0.4,
            beta: 1.2,
            n_freq: 64,
            lambda: 4.0,
            k_const: 1.0,
            eps_tilde: 0.2,
            grid_n: 1024,
            box_l: 1.2,
            sweep_n: vec![8, 16, 32, 64],
            sweep_alpha: vec![0.3, 0.5, 0.7],
            sweep_r: vec![3.0, 6.0, 12.0],
            translates_j: 2,
            sample_times: 32,
            out_dir: PathBuf::from("out"),
            seed: 0,
        };
        match kind {
            ExperimentKind::ApproxRates => {
                c.alpha = 0.5;
                c.lambda = 1.0;
                c.grid_n = 1024;
                c.box_l = 2.5;
            }
            ExperimentKind::NormInflation => {
                c.sweep_n = vec![32, 64, 128];
            }
            ExperimentKind::PseudoError => {
                c.alpha = 0.5;
                c.lambda = 4.0;
                c.sweep_n = vec![8, 16, 32];
                c.grid_n = 1024;
                c.box_l = 1.2;
            }
            ExperimentKind::RadialDecay => {
                c.grid_n = 2048;
                c.box_l = 24.0;
            }
            ExperimentKind::ComposeTranslates => {
                c.alpha = 0.5;
                c.lambda = 2.0;
                c.n_freq = 12;
                c.grid_n = 512;
                c.box_l = 16.0;
            }
            _ => {}
        }
        c
    }

    /// Parses the flat key-value format, starting from the defaults of the
    /// `experiment` key found in the text (which must appear).
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if let Some((k, v)) = line.split_once('=') {
                if k.trim() == "experiment" {
                    kind = Some(ExperimentKind::parse(v.trim())?);
                }
            }
        }
        let kind = kind
            .ok_or_else(|| SqgError::Config("config must set 'experiment = <kind>'".into()))?;
        let mut cfg = ExperimentConfig::default_for(kind);
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SqgError::Config(format!("expected 'key = value': {line}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| SqgError::Config(format!("bad value for {key}: '{v}'")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| SqgError::Config(format!("bad list item in {key}: '{s}'")))
                })
                .collect()
        }
        match key {
            "experiment" => self.experiment = ExperimentKind::parse(value)?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "n_freq" => self.n_freq = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "k_const" => self.k_const = num(key, value)?,
            "eps_tilde" => self.eps_tilde = num(key, value)?,
            "grid_n" => self.grid_n = num(key, value)?,
            "box_l" => self.box_l = num(key, value)?,
            "sweep_n" => self.sweep_n = list(key, value)?,
            "sweep_alpha" => self.sweep_alpha = list(key, value)?,
            "sweep_r" => self.sweep_r = list(key, value)?,
            "translates_j" => self.translates_j = num(key, value)?,
            "sample_times" => self.sample_times = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            other => return Err(SqgError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Checks cross-field invariants common to all experiments.
    pub fn validate(&self) -> Result<()> {
        if self.sweep_n.is_empty() || self.sweep_alpha.is_empty() || self.sweep_r.is_empty() {
            return Err(SqgError::Config("sweep lists must be non-empty".into()));
        }
        if self.sweep_n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SqgError::Config("sweep_n must be strictly increasing".into()));
        }
        if self.grid_n < 16 || self.grid_n % 2 != 0 {
            return Err(SqgError::Config(format!(
                "grid_n = {} must be even and at least 16",
                self.grid_n
            )));
        }
        if !(self.box_l > 0.0) {
            return Err(SqgError::Config(format!("box_l = {} must be positive", self.box_l)));
        }
        if !(self.translates_j >= 1 && self.translates_j <= 3) {
            return Err(SqgError::Config(format!(
                "translates_j = {} must be 1, 2 or 3",
                self.translates_j
            )));
        }
        if self.sample_times < 2 {
            return Err(SqgError::Config("sample_times must be at least 2".into()));
        }
        Ok(())
    }

    /// Canonical serialization: fixed key order, full precision. Parsing it
    /// back reproduces the config exactly.
    pub fn to_canonical_string(&self) -> String {
        let join_u = |v: &[u32]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let join_f = |v: &[f64]| {
            v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",")
        };
        format!(
            "experiment = {}\nalpha = {:.17e}\nbeta = {:.17e}\nn_freq = {}\nlambda = {:.17e}\n\
             k_const = {:.17e}\neps_tilde = {:.17e}\ngrid_n = {}\nbox_l = {:.17e}\n\
             sweep_n = {}\nsweep_alpha = {}\nsweep_r = {}\ntranslates_j = {}\n\
             sample_times = {}\nout_dir = {}\nseed = {}\n",
            self.experiment,
            self.alpha,
            self.beta,
            self.n_freq,
            self.lambda,
            self.k_const,
            self.eps_tilde,
            self.grid_n,
            self.box_l,
            join_u(&self.sweep_n),
            join_f(&self.sweep_alpha),
            join_f(&self.sweep_r),
            self.translates_j,
            self.sample_times,
            self.out_dir.display(),
            self.seed,
        )
    }

    /// SHA-256 of the canonical serialization, hex-encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_back_canonically() {
        for kind in [
            ExperimentKind::ApproxRates,
            ExperimentKind::NormInflation,
            ExperimentKind::PseudoError,
            ExperimentKind::RadialDecay,
            ExperimentKind::ComposeTranslates,
            ExperimentKind::Constants,
        ] {
            let cfg = ExperimentConfig::default_for(kind);
            let back = ExperimentConfig::parse(&cfg.to_canonical_string()).unwrap();
            assert_eq!(cfg, back);
            assert_eq!(cfg.hash(), back.hash());
        }
    }

    #[test]
    fn hash_changes_with_any_field() {
        let cfg = ExperimentConfig::default_for(ExperimentKind::ApproxRates);
        let mut other = cfg.clone();
        other.set("alpha", "0.51").unwrap();
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn unknown_key_and_empty_sweep_are_config_errors() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::ApproxRates);
        assert!(matches!(cfg.set("bogus", "1"), Err(SqgError::Config(_))));
        cfg.sweep_n.clear();
        assert!(matches!(cfg.validate(), Err(SqgError::Config(_))));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\nexperiment = approx_rates\n\nalpha = 0.3 # inline\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.alpha, 0.3);
        assert_eq!(cfg.experiment, ExperimentKind::ApproxRates);
    }
}
