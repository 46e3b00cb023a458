//! Monte Carlo size, power and consistency studies.
//!
//! Each replicate simulates a coefficient series, observes it at random
//! points with Gaussian noise, reconstructs it by series least squares and
//! applies the test. Replicate `r` draws all of its randomness from
//! `child_seed(seed, r)`, so tables do not depend on execution order or on
//! the number of worker threads.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LrdError, Result};
use crate::harmonics::{sieve_from_budget, SieveBasis};
use crate::lrdtest::{
    calibrate, default_projections, hs_norm, random_projections, test_statistic, Calibration,
    Centering, ChannelPeriodograms, NullSpectrum, ProjectionDirection, TestOutcome, VarianceScale,
    DEFAULT_PROJECTIONS,
};
use crate::observe::{observe, sample_uniform_sphere, spatial_budget_with_exponent, ObservationSet};
use crate::par::{map_indexed, with_threads, Execution};
use crate::reconstruct::{design_matrix, Reconstructor};
use crate::seed::{child_seed, stream};
use crate::simulate::{
    example_profile, null_spharma11_model, simulate_series_with, CoefficientSeries, SpectralModel,
};
use crate::spectra::WeightKernel;
use crate::stats::median;

/// Largest series length accepted without `allow_large_t`.
pub const DEFAULT_MAX_LEN: usize = 10_000;

/// Smallest series length accepted by the studies.
pub const MIN_LEN: usize = 50;

/// Data-generating scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Short-memory SPHARMA(1,1) null.
    Null,
    /// Long-memory alternative with the given example profile (1, 2 or 3).
    Example(u8),
}

/// How the reconstruction sieve is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SieveRule {
    /// `sieve_from_budget(k)`.
    Budget(usize),
    /// `sieve_from_budget(max(⌊ln T⌋ + 6, 16))`: logarithmic growth, never
    /// below degree 3 so the projections have support.
    LogRule,
}

impl SieveRule {
    pub fn sieve(&self, len: usize) -> SieveBasis {
        match *self {
            SieveRule::Budget(k) => sieve_from_budget(k),
            SieveRule::LogRule => sieve_from_budget(((len as f64).ln().floor() as usize + 6).max(16)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenteringRule {
    /// Exact expectation under the SPHARMA(1,1) null.
    Model,
    /// Zero-frequency pilot estimate at bandwidth `√B`.
    Pilot,
}

/// Every knob of a study. Parsed from flat `key=value` text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub len: usize,
    pub gamma: f64,
    /// Overrides `2γ` as the exponent of `M = T^e` when set.
    pub m_exponent: Option<f64>,
    pub beta: f64,
    pub sigma2: f64,
    pub sieve: SieveRule,
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub t_grid: Vec<usize>,
    pub burn_in: usize,
    /// Degrees simulated above the reconstruction sieve.
    pub extra_degrees: usize,
    pub innovation_scale: f64,
    pub centering: CenteringRule,
    pub variance: VarianceScale,
    /// `v = u` in every projection when true.
    pub paired_projections: bool,
    pub projections: usize,
    pub threads: usize,
    pub allow_large_t: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            len: 500,
            gamma: 0.45,
            m_exponent: None,
            beta: 0.25,
            sigma2: 0.5,
            sieve: SieveRule::LogRule,
            scenario: Scenario::Null,
            reps: 200,
            seed: 42,
            alpha: 0.05,
            t_grid: vec![1000, 5000, 10_000],
            burn_in: 500,
            extra_degrees: 2,
            innovation_scale: 1.0,
            centering: CenteringRule::Model,
            variance: VarianceScale::EffectiveWeights,
            paired_projections: true,
            projections: DEFAULT_PROJECTIONS,
            threads: 0,
            allow_large_t: false,
        }
    }
}

/// Budget of the consistency study for each example.
pub fn consistency_budget(scenario: Scenario) -> usize {
    match scenario {
        Scenario::Example(1) => 15,
        _ => 10,
    }
}

impl ExperimentConfig {
    /// Defaults of the size study.
    pub fn size_defaults() -> Self {
        Self::default()
    }

    /// Defaults of the power study (Example 1).
    pub fn power_defaults() -> Self {
        Self {
            gamma: 0.3704,
            scenario: Scenario::Example(1),
            ..Self::default()
        }
    }

    /// Defaults of the consistency study (Example 1, σ² = 1/8).
    pub fn consistency_defaults() -> Self {
        Self {
            gamma: 0.3077,
            sigma2: 0.125,
            scenario: Scenario::Example(1),
            sieve: SieveRule::Budget(15),
            reps: 20,
            ..Self::default()
        }
    }

    /// Parses `key=value` pairs separated by newlines or commas on top of
    /// `base`. `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str, base: Self) -> Result<Self> {
        let mut cfg = base;
        let mut budget_set = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("");
            for item in line.split(',') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| LrdError::Config(format!("expected key=value, got `{item}`")))?;
                let (key, value) = (key.trim(), value.trim());
                if key == "k_budget" {
                    budget_set = true;
                }
                cfg.set(key, value)?;
            }
        }
        if !budget_set {
            if let (SieveRule::Budget(_), Scenario::Example(_)) = (cfg.sieve, cfg.scenario) {
                cfg.sieve = SieveRule::Budget(consistency_budget(cfg.scenario));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, base: Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LrdError::io(path, e))?;
        Self::parse(&text, base)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| LrdError::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "T" => self.len = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "m_exponent" => self.m_exponent = Some(num(key, value)?),
            "beta" => self.beta = num(key, value)?,
            "sigma2" => self.sigma2 = num(key, value)?,
            "k_budget" => {
                self.sieve = match value {
                    "log" | "auto" => SieveRule::LogRule,
                    v => SieveRule::Budget(num(key, v)?),
                }
            }
            "example" => {
                self.scenario = match value {
                    "0" | "H0" | "h0" | "null" => Scenario::Null,
                    "1" | "2" | "3" => Scenario::Example(num(key, value)?),
                    _ => {
                        return Err(LrdError::Config(format!(
                            "example must be 0 (null), 1, 2 or 3, got `{value}`"
                        )))
                    }
                }
            }
            "R" | "reps" => self.reps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "T_grid" => {
                self.t_grid = value
                    .split([';', ' ', '|'])
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            "burn_in" => self.burn_in = num(key, value)?,
            "extra_degrees" => self.extra_degrees = num(key, value)?,
            "innovation_scale" => self.innovation_scale = num(key, value)?,
            "centering" => {
                self.centering = match value {
                    "model" => CenteringRule::Model,
                    "pilot" => CenteringRule::Pilot,
                    _ => {
                        return Err(LrdError::Config(format!(
                            "centering must be `model` or `pilot`, got `{value}`"
                        )))
                    }
                }
            }
            "variance" => {
                self.variance = match value {
                    "effective" => VarianceScale::EffectiveWeights,
                    "kernel" => VarianceScale::KernelNorm,
                    _ => {
                        return Err(LrdError::Config(format!(
                            "variance must be `effective` or `kernel`, got `{value}`"
                        )))
                    }
                }
            }
            "projections" => {
                self.paired_projections = match value {
                    "paired" => true,
                    "independent" => false,
                    _ => {
                        return Err(LrdError::Config(format!(
                            "projections must be `paired` or `independent`, got `{value}`"
                        )))
                    }
                }
            }
            "n_projections" => self.projections = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "allow_large_t" => self.allow_large_t = num(key, value)?,
            _ => return Err(LrdError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(LrdError::Config(m));
        let max_len = if self.allow_large_t { usize::MAX } else { DEFAULT_MAX_LEN };
        for &t in std::iter::once(&self.len).chain(&self.t_grid) {
            if t < MIN_LEN {
                return err(format!("T = {t} is below the minimum {MIN_LEN}"));
            }
            if t > max_len {
                return err(format!(
                    "T = {t} exceeds {DEFAULT_MAX_LEN}; set allow_large_t=true to run it"
                ));
            }
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return err("T_grid must be strictly increasing".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if let Some(e) = self.m_exponent {
            if !(e > 0.0 && e.is_finite()) {
                return err(format!("m_exponent must be positive, got {e}"));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return err(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return err(format!("sigma2 must be non-negative, got {}", self.sigma2));
        }
        if self.reps == 0 {
            return err("R must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.innovation_scale > 0.0 && self.innovation_scale.is_finite()) {
            return err("innovation_scale must be positive".into());
        }
        if self.projections == 0 {
            return err("n_projections must be at least 1".into());
        }
        if let SieveRule::Budget(0) = self.sieve {
            return err("k_budget must be positive".into());
        }
        Ok(())
    }

    /// `M` at series length `len`.
    pub fn locations_at(&self, len: usize) -> usize {
        spatial_budget_with_exponent(len, self.m_exponent.unwrap_or(2.0 * self.gamma))
    }

    /// Generating model on `sieve` extended by `extra_degrees`.
    pub fn generator(&self, sieve: SieveBasis) -> Result<SpectralModel> {
        let gen = SieveBasis::new(sieve.max_degree() + self.extra_degrees);
        let base = null_spharma11_model(gen).scale_innovation(self.innovation_scale)?;
        Ok(match self.scenario {
            Scenario::Null => base,
            Scenario::Example(id) => base.with_profile(&example_profile(id, sieve)?),
        })
    }
}

/// What a table row holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableKind {
    Rates,
    Norms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub len: usize,
    pub gamma: f64,
    /// Per-projection rejection rates, or a single median norm.
    pub values: Vec<f64>,
    /// Per-replicate standardized statistics (rates) or norms.
    pub replicates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub kind: TableKind,
    pub rows: Vec<ResultRow>,
    pub reps: usize,
    pub seed: u64,
    /// Design warnings raised while running (e.g. fewer locations than coefficients).
    pub warnings: Vec<String>,
}

impl ResultTable {
    pub fn new(kind: TableKind, reps: usize, seed: u64) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            reps,
            seed,
            warnings: Vec::new(),
        }
    }

    fn width(&self) -> usize {
        match self.kind {
            TableKind::Norms => 1,
            TableKind::Rates => self
                .rows
                .first()
                .map_or(DEFAULT_PROJECTIONS, |r| r.values.len()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,gamma,");
        match self.kind {
            TableKind::Rates => {
                let cols: Vec<String> = (1..=self.width()).map(|i| format!("proj{i}")).collect();
                out.push_str(&cols.join(","));
            }
            TableKind::Norms => out.push_str("norm"),
        }
        out.push_str(",R,seed\n");
        for row in &self.rows {
            let _ = write!(out, "{},{:.4}", row.len, row.gamma);
            for &v in &row.values {
                match self.kind {
                    TableKind::Rates => {
                        let _ = write!(out, ",{}", format_rate(v));
                    }
                    TableKind::Norms => {
                        let _ = write!(out, ",{}", format_norm(v));
                    }
                }
            }
            let _ = writeln!(out, ",{},{}", self.reps, self.seed);
        }
        out
    }
}

/// Four decimal places: `0.05` → `0.0500`.
pub fn format_rate(rate: f64) -> String {
    format!("{rate:.4}")
}

/// Four significant decimals in scientific form: `186690` → `1.8669e+05`.
pub fn format_norm(norm: f64) -> String {
    if !norm.is_finite() {
        return format!("{norm}");
    }
    let s = format!("{norm:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Writes the CSV form of `table` to `path`.
pub fn emit_table(table: &ResultTable, path: &Path) -> Result<()> {
    write_text(path, &table.to_csv())
}

/// Writes every per-replicate value as JSON next to the table.
pub fn emit_sidecar(table: &ResultTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| LrdError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, table)
        .map_err(|e| LrdError::io(path, std::io::Error::other(e)))?;
    w.flush().map_err(|e| LrdError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LrdError::io(path, e))
}

/// Execution settings shared by the studies.
#[derive(Default)]
pub struct RunOptions {
    pub execution: Execution,
    /// Called with `(finished, total)` replicates of the current row.
    pub progress: Option<Box<dyn Fn(usize, usize) + Send + Sync>>,
}

impl RunOptions {
    pub fn sequential() -> Self {
        Self {
            execution: Execution::Sequential,
            progress: None,
        }
    }
}

/// Everything fixed across the replicates of one `(T, γ)` row.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub len: usize,
    pub sieve: SieveBasis,
    pub model: SpectralModel,
    pub null: SpectralModel,
    pub kernel: WeightKernel,
    pub locations: usize,
    pub directions: Vec<ProjectionDirection>,
    channels: Arc<ChannelPeriodograms>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, len: usize, sieve: SieveBasis, need_projections: bool) -> Result<Self> {
        let model = cfg.generator(sieve)?;
        let null = null_spharma11_model(model.sieve()).scale_innovation(cfg.innovation_scale)?;
        let kernel = WeightKernel::for_length(len, cfg.beta)?;
        let directions = if need_projections {
            let seed = child_seed(cfg.seed, stream::PROJECTIONS);
            if cfg.paired_projections && cfg.projections == DEFAULT_PROJECTIONS {
                default_projections(sieve, seed)?
            } else {
                random_projections(sieve, seed, cfg.projections, cfg.paired_projections)?
            }
        } else {
            Vec::new()
        };
        let channels = Arc::new(ChannelPeriodograms::new(&null, len));
        Ok(Self {
            cfg: cfg.clone(),
            len,
            sieve,
            model,
            null,
            kernel,
            locations: cfg.locations_at(len),
            directions,
            channels,
        })
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.locations < self.sieve.size() {
            w.push(format!(
                "T = {}: M = {} locations for k = {} coefficients; the design cannot identify the sieve",
                self.len,
                self.locations,
                self.sieve.size()
            ));
        }
        w
    }

    /// Simulated truth, observations and reconstruction of replicate `r`.
    pub fn replicate_data(&self, r: u64) -> Result<ReplicateData> {
        let seed = child_seed(self.cfg.seed, r);
        let truth = simulate_series_with(
            &self.model,
            self.len,
            self.cfg.burn_in,
            child_seed(seed, stream::SERIES),
            Execution::Sequential,
        )?;
        self.observe_and_reconstruct(truth, seed)
    }

    fn observe_and_reconstruct(&self, truth: CoefficientSeries, seed: u64) -> Result<ReplicateData> {
        let locs = sample_uniform_sphere(self.locations, child_seed(seed, stream::LOCATIONS))?;
        let obs = observe(&truth, &locs, self.cfg.sigma2, child_seed(seed, stream::NOISE))?;
        let design = design_matrix(&locs, self.sieve)?;
        let reconstructor = Reconstructor::new(&design);
        let estimate = reconstructor.series(&obs)?;
        Ok(ReplicateData {
            truth,
            observations: obs,
            reconstructor,
            estimate,
        })
    }

    /// Runs the test on the reconstruction of replicate `r`.
    pub fn test_replicate(&self, r: u64) -> Result<TestOutcome> {
        let data = self.replicate_data(r)?;
        self.test_data(&data)
    }

    pub fn test_data(&self, data: &ReplicateData) -> Result<TestOutcome> {
        let calibration = match self.cfg.centering {
            CenteringRule::Pilot => Calibration {
                centering: Centering::Pilot,
                variance: self.cfg.variance,
            },
            CenteringRule::Model => {
                let gen_design = design_matrix(data.observations.locations(), self.model.sieve())?;
                let null = NullSpectrum::reconstructed(
                    self.channels.clone(),
                    &data.reconstructor,
                    gen_design.matrix(),
                    self.cfg.sigma2,
                )?;
                Calibration {
                    centering: Centering::Model(null),
                    variance: self.cfg.variance,
                }
            }
        };
        calibrate(
            &data.estimate,
            &self.kernel,
            &self.directions,
            self.cfg.alpha,
            &calibration,
        )
    }
}

/// One replicate's intermediate products.
pub struct ReplicateData {
    pub truth: CoefficientSeries,
    pub observations: ObservationSet,
    pub reconstructor: Reconstructor,
    pub estimate: CoefficientSeries,
}

fn run_replicates<T: Send>(
    reps: usize,
    opts: &RunOptions,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let done = AtomicUsize::new(0);
    map_indexed(reps, opts.execution, |r| {
        let out = f(r as u64);
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(p) = &opts.progress {
            p(n, reps);
        }
        out
    })
    .into_iter()
    .collect()
}

fn rejection_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ResultTable> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let sieve = cfg.sieve.sieve(cfg.len);
        let setup = Setup::new(cfg, cfg.len, sieve, true)?;
        let mut table = ResultTable::new(TableKind::Rates, cfg.reps, cfg.seed);
        table.warnings = setup.warnings();
        let outcomes = run_replicates(cfg.reps, opts, |r| setup.test_replicate(r))?;
        let p = setup.directions.len();
        let mut rates = vec![0.0; p];
        for o in &outcomes {
            for (rate, &rej) in rates.iter_mut().zip(&o.reject) {
                if rej {
                    *rate += 1.0;
                }
            }
        }
        rates.iter_mut().for_each(|x| *x /= cfg.reps as f64);
        table.rows.push(ResultRow {
            len: cfg.len,
            gamma: cfg.gamma,
            values: rates,
            replicates: outcomes.into_iter().map(|o| o.z).collect(),
        });
        Ok(table)
    })
}

/// Rejection rates under the SPHARMA(1,1) null.
pub fn run_size_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ResultTable> {
    if cfg.scenario != Scenario::Null {
        return Err(LrdError::Config(
            "the size study needs the null scenario (example=0)".into(),
        ));
    }
    rejection_study(cfg, opts)
}

/// Rejection rates under a long-memory example.
pub fn run_power_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ResultTable> {
    if cfg.scenario == Scenario::Null {
        return Err(LrdError::Config(
            "the power study needs an example scenario (example=1, 2 or 3)".into(),
        ));
    }
    rejection_study(cfg, opts)
}

/// Median Hilbert-Schmidt norm of the statistic along `cfg.t_grid`.
pub fn run_consistency_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ResultTable> {
    run_consistency_experiment_with(cfg, opts, |setup, r| {
        let seed = child_seed(setup.cfg.seed, r);
        simulate_series_with(
            &setup.model,
            setup.len,
            setup.cfg.burn_in,
            child_seed(seed, stream::SERIES),
            Execution::Sequential,
        )
    })
}

/// As [`run_consistency_experiment`] with a custom source of true series.
pub fn run_consistency_experiment_with(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    source: impl Fn(&Setup, u64) -> Result<CoefficientSeries> + Sync + Send,
) -> Result<ResultTable> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let mut table = ResultTable::new(TableKind::Norms, cfg.reps, cfg.seed);
        for &len in &cfg.t_grid {
            let sieve = cfg.sieve.sieve(len);
            let setup = Setup::new(cfg, len, sieve, false)?;
            table.warnings.extend(setup.warnings());
            let norms = run_replicates(cfg.reps, opts, |r| {
                let truth = source(&setup, r)?;
                let data = setup.observe_and_reconstruct(truth, child_seed(cfg.seed, r))?;
                Ok(hs_norm(test_statistic(&data.estimate, &setup.kernel)?.kernel()))
            })?;
            table.rows.push(ResultRow {
                len,
                gamma: cfg.gamma,
                values: vec![median(&norms)],
                replicates: norms.into_iter().map(|n| vec![n]).collect(),
            });
        }
        Ok(table)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_flat_config() {
        let cfg = ExperimentConfig::parse(
            "T=500, gamma=0.3704, beta=0.25, sigma2=0.5, example=1, R=200, seed=42, alpha=0.05, k_budget=12",
            ExperimentConfig::default(),
        )
        .unwrap();
        assert_eq!(cfg.len, 500);
        assert_eq!(cfg.scenario, Scenario::Example(1));
        assert_eq!(cfg.sieve, SieveRule::Budget(12));
        assert_eq!(cfg.reps, 200);
    }

    #[test]
    fn parse_lines_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# study\nT=1000\nexample=H0  # null\nT_grid=1000;2000\ncentering=pilot\n",
            ExperimentConfig::default(),
        )
        .unwrap();
        assert_eq!(cfg.len, 1000);
        assert_eq!(cfg.scenario, Scenario::Null);
        assert_eq!(cfg.t_grid, vec![1000, 2000]);
        assert_eq!(cfg.centering, CenteringRule::Pilot);
    }

    #[test]
    fn config_errors() {
        let base = ExperimentConfig::default;
        assert!(ExperimentConfig::parse("bogus=1", base()).is_err());
        assert!(ExperimentConfig::parse("T=abc", base()).is_err());
        assert!(ExperimentConfig::parse("T", base()).is_err());
        assert!(ExperimentConfig::parse("T=20", base()).is_err());
        assert!(ExperimentConfig::parse("T=20000", base()).is_err());
        assert!(ExperimentConfig::parse("T=20000, allow_large_t=true", base()).is_ok());
        assert!(ExperimentConfig::parse("gamma=1.2", base()).is_err());
        assert!(ExperimentConfig::parse("R=0", base()).is_err());
        assert!(ExperimentConfig::parse("example=7", base()).is_err());
        assert!(ExperimentConfig::parse("T_grid=5000;1000", base()).is_err());
    }

    #[test]
    fn consistency_budget_follows_example() {
        let cfg = ExperimentConfig::parse("example=2", ExperimentConfig::consistency_defaults()).unwrap();
        assert_eq!(cfg.sieve, SieveRule::Budget(10));
        let cfg = ExperimentConfig::parse("example=2, k_budget=15", ExperimentConfig::consistency_defaults()).unwrap();
        assert_eq!(cfg.sieve, SieveRule::Budget(15));
    }

    #[test]
    fn log_rule_sieve() {
        assert_eq!(SieveRule::LogRule.sieve(500).max_degree(), 3);
        assert_eq!(SieveRule::LogRule.sieve(10_000).max_degree(), 3);
        assert_eq!(SieveRule::Budget(15).sieve(1000).size(), 9);
    }

    #[test]
    fn formatting() {
        assert_eq!(format_rate(0.05), "0.0500");
        assert_eq!(format_rate(1.0), "1.0000");
        assert_eq!(format_norm(186_690.0), "1.8669e+05");
        assert_eq!(format_norm(0.0), "0.0000e+00");
        assert_eq!(format_norm(0.00012345), "1.2345e-04");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(TableKind::Rates, 10, 1);
        assert_eq!(t.to_csv(), "T,gamma,proj1,proj2,proj3,proj4,proj5,proj6,R,seed\n");
        let t = ResultTable::new(TableKind::Norms, 10, 1);
        assert_eq!(t.to_csv(), "T,gamma,norm,R,seed\n");
    }

    #[test]
    fn single_replicate_rates_are_binary() {
        let cfg = ExperimentConfig {
            len: 100,
            reps: 1,
            ..ExperimentConfig::default()
        };
        let t = run_size_experiment(&cfg, &RunOptions::default()).unwrap();
        assert!(t.rows[0].values.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn studies_check_scenario() {
        let null = ExperimentConfig::default();
        assert!(run_power_experiment(&null, &RunOptions::default()).is_err());
        let alt = ExperimentConfig::power_defaults();
        assert!(run_size_experiment(&alt, &RunOptions::default()).is_err());
    }

    #[test]
    fn few_locations_warn() {
        let cfg = ExperimentConfig {
            len: 100,
            gamma: 0.2,
            reps: 1,
            ..ExperimentConfig::default()
        };
        let t = run_size_experiment(&cfg, &RunOptions::default()).unwrap();
        assert!(!t.warnings.is_empty());
    }
}
