use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nuexp::hyperbolic::Convention;
use nuexp::sft::{LocallyConstantPotential, TransitionMatrix};
use nuexp::torus::MapConfig;
use serde::{Deserialize, Serialize};

/// A TOML experiment file. `[map]` feeds the torus commands and, through the
/// induced Markov partition, the symbolic ones unless `[sft]` overrides it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub sft: Option<SftConfig>,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftConfig {
    pub rows: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `φ(w) = values[w₀]`.
    States { values: Vec<f64> },
    /// `value` on one symbol, zero elsewhere; the symbol defaults to the
    /// rectangle holding the fixed point (or the last symbol for a bare SFT).
    Symbol {
        #[serde(default)]
        symbol: Option<usize>,
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Orbit length `N`.
    pub steps: usize,
    /// Number of random orbits; orbit `i` uses ChaCha stream `i`.
    pub seeds: usize,
    /// Single exact orbit from this point instead of the random ensemble.
    pub x0: Option<Vec<f64>>,
    pub grid: usize,
    /// Fixed `γ₀`; estimated from `gamma0_seeds` orbits of `gamma0_steps` otherwise.
    pub gamma0: Option<f64>,
    pub gamma0_seeds: usize,
    pub gamma0_steps: usize,
    /// Overrides the `c` obtained from `verify`.
    pub c: Option<f64>,
    pub eps0_grid: usize,
    pub convention: Convention,
    pub c2_factor: f64,
    /// Contraction is checked at this many of the latest hyperbolic times.
    pub deepest: usize,
    pub probes: usize,
    pub density_stride: usize,
    /// Pass thresholds.
    pub lyapunov_slack: f64,
    pub density_slack: f64,
    pub max_ratio: f64,
    pub gap_tol: f64,
    pub rho: f64,
    pub samples: usize,
    pub gibbs_max_len: usize,
    pub gibbs_rows: usize,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 100_000,
            seeds: 100,
            x0: None,
            grid: 512,
            gamma0: None,
            gamma0_seeds: 1000,
            gamma0_steps: 100_000,
            c: None,
            eps0_grid: 512,
            convention: Convention::Standard,
            c2_factor: 1.5,
            deepest: 10,
            probes: 4,
            density_stride: 1000,
            lyapunov_slack: 0.01,
            density_slack: 0.02,
            max_ratio: 1.05,
            gap_tol: 1e-10,
            rho: 0.5,
            samples: 1000,
            gibbs_max_len: 12,
            gibbs_rows: 10_000,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.steps < 2 || r.seeds == 0 || r.grid < 2 || r.eps0_grid < 2 {
            bail!("run.steps must be >= 2, run.seeds >= 1 and grids >= 2");
        }
        if !(r.rho > 0.0 && r.rho < 1.0) {
            bail!("run.rho = {} is outside (0, 1)", r.rho);
        }
        if r.gibbs_max_len == 0 || r.samples == 0 || r.probes == 0 {
            bail!("run.gibbs_max_len, run.samples and run.probes must be positive");
        }
        if let Some(c) = r.c {
            if c.is_nan() || c <= 0.0 {
                bail!("run.c = {c} must be positive");
            }
        }
        if let Some(g) = r.gamma0 {
            if !(0.0..1.0).contains(&g) {
                bail!("run.gamma0 = {g} is outside [0, 1)");
            }
        }
        if let (Some(x0), Some(m)) = (&r.x0, &self.map) {
            if x0.len() != m.eigenvalues.len() {
                bail!("run.x0 has {} coordinates for a {}-torus", x0.len(), m.eigenvalues.len());
            }
        }
        Ok(())
    }
}

impl PotentialSpec {
    pub fn build(&self, a: &TransitionMatrix, default_symbol: usize) -> Result<LocallyConstantPotential> {
        let d = a.d();
        let values = match self {
            PotentialSpec::Zero => return Ok(LocallyConstantPotential::zero(a)),
            PotentialSpec::States { values } => {
                if values.len() != d {
                    bail!("potential has {} state values for {d} symbols", values.len());
                }
                values.clone()
            }
            PotentialSpec::Symbol { symbol, value } => {
                let s = symbol.unwrap_or(default_symbol);
                if s >= d {
                    bail!("potential symbol {s} is outside 0..{d}");
                }
                let mut v = vec![0.0; d];
                v[s] = *value;
                v
            }
        };
        Ok(LocallyConstantPotential::from_state_values(a, &values)?)
    }
}
