//! Config-driven Monte Carlo experiments: synthetic sweeps without and with
//! perturbation, and the patrol-robot study.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, KMeansConfig};
use crate::error::{Error, Result};
use crate::jump::{self, InputKind, JumpModel, NoiseKind, SimOptions};
use crate::markov::{self, DistributionVector, Partition, StochasticMatrix};
use crate::reduction;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SyntheticSweep,
    PerturbationSweep,
    Robot,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SyntheticSweep => "synthetic-sweep",
            Scenario::PerturbationSweep => "perturbation-sweep",
            Scenario::Robot => "robot",
        }
    }
}

fn default_n_a() -> usize {
    3
}
fn default_n_c() -> usize {
    2
}
fn default_noise_max() -> f64 {
    0.1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_gain() -> f64 {
    0.7
}
fn default_noise_variance() -> f64 {
    0.1
}
fn default_budget() -> f64 {
    120.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub r: usize,
    #[serde(default = "default_n_a")]
    pub n_a: usize,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
    #[serde(default = "default_noise_max")]
    pub noise_max: f64,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    /// Empty means `[r]`.
    #[serde(default)]
    pub r_grid: Vec<usize>,
    /// Empty means `[noise_max]`.
    #[serde(default)]
    pub noise_grid: Vec<f64>,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    pub replications: usize,
    pub rng_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Robot feedback gain `K`.
    #[serde(default = "default_gain")]
    pub gain: f64,
    /// Variance of the robot's Gaussian noise.
    #[serde(default = "default_noise_variance")]
    pub noise_variance: f64,
    #[serde(default)]
    pub kmeans: KMeansConfig,
    /// Per-replication wall-clock budget in seconds.
    #[serde(default = "default_budget")]
    pub time_budget_secs: f64,
}

/// One point of the swept parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub samples: usize,
    pub r: usize,
    pub noise_max: f64,
    pub alpha: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::arg("n must be positive"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::arg("N_grid must not be empty"));
        }
        if self.replications == 0 {
            return Err(Error::arg("replications must be at least 1"));
        }
        for &r in &self.r_values() {
            if r == 0 || r > self.n {
                return Err(Error::arg(format!("cluster count {r} must lie in 1..={}", self.n)));
            }
        }
        for &nm in &self.noise_values() {
            if !(nm >= 0.0 && nm.is_finite()) {
                return Err(Error::arg(format!("noise bound {nm} must be nonnegative")));
            }
        }
        if self.scenario == Scenario::PerturbationSweep && self.alpha_grid.is_empty() {
            return Err(Error::arg("perturbation sweep needs a nonempty alpha_grid"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::arg("alpha values must be positive"));
        }
        if self.scenario != Scenario::Robot && self.n_a + self.n_c == 0 {
            return Err(Error::arg("n_a + n_c must be at least 1"));
        }
        if self.scenario == Scenario::Robot {
            if !(self.gain > 0.0 && self.gain < 2.0) {
                return Err(Error::arg("robot gain must lie in (0, 2)"));
            }
            if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
                return Err(Error::arg("noise variance must be nonnegative"));
            }
        }
        let order = if self.scenario == Scenario::Robot { 1 } else { self.n_a.max(self.n_c) };
        if let Some(&bad) = self.n_grid.iter().find(|&&n| n < order + 1) {
            return Err(Error::arg(format!("trajectory length {bad} is too short")));
        }
        if !(self.time_budget_secs > 0.0) {
            return Err(Error::arg("time budget must be positive"));
        }
        if self.kmeans.restarts == 0 {
            return Err(Error::arg("kmeans.restarts must be at least 1"));
        }
        Ok(())
    }

    fn r_values(&self) -> Vec<usize> {
        if self.r_grid.is_empty() {
            vec![self.r]
        } else {
            self.r_grid.clone()
        }
    }

    fn noise_values(&self) -> Vec<f64> {
        if self.noise_grid.is_empty() {
            vec![self.noise_max]
        } else {
            self.noise_grid.clone()
        }
    }

    /// Cartesian product of the grids in `(N, r, noise, alpha)` order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let alphas: Vec<Option<f64>> = match self.scenario {
            Scenario::PerturbationSweep => self.alpha_grid.iter().map(|&a| Some(a)).collect(),
            _ => vec![None],
        };
        let noises = match self.scenario {
            Scenario::Robot => vec![self.noise_variance.sqrt()],
            _ => self.noise_values(),
        };
        let mut out = Vec::new();
        for &samples in &self.n_grid {
            for &r in &self.r_values() {
                for &noise_max in &noises {
                    for &alpha in &alphas {
                        out.push(GridPoint { samples, r, noise_max, alpha });
                    }
                }
            }
        }
        out
    }
}

/// Metrics of one successful replication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ce: f64,
    pub stationary_l1_diff: f64,
    pub mr: f64,
    pub eta: f64,
    pub delta_norm: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 5] = ["ce", "stationary_l1_diff", "mr", "eta", "delta_norm"];

    pub fn get(&self, name: &str) -> f64 {
        match name {
            "ce" => self.ce,
            "stationary_l1_diff" => self.stationary_l1_diff,
            "mr" => self.mr,
            "eta" => self.eta,
            "delta_norm" => self.delta_norm,
            _ => panic!("unknown metric {name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub point: GridPoint,
    pub replication: usize,
    /// `None` for a failed replication.
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    /// Seconds; not part of the reproducible content.
    pub wall_time: f64,
}

impl ReplicationRow {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }

    /// Equality ignoring the wall-clock time.
    pub fn same_result(&self, other: &Self) -> bool {
        self.point == other.point
            && self.replication == other.replication
            && self.metrics == other.metrics
            && self.error == other.error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAggregate {
    pub point: GridPoint,
    pub completed: usize,
    pub failed: usize,
    /// Mean of each metric over completed replications, in [`Metrics::NAMES`] order.
    pub means: Option<Metrics>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicationRow>,
    pub aggregates: Vec<GridAggregate>,
    pub failed: usize,
}

impl ExperimentRecord {
    pub fn aggregate(&self, point: &GridPoint) -> Option<&GridAggregate> {
        self.aggregates.iter().find(|a| &a.point == point)
    }
}

struct Budget {
    start: Instant,
    limit: Duration,
}

impl Budget {
    fn check(&self) -> Result<()> {
        if self.start.elapsed() > self.limit {
            Err(Error::Timeout(self.limit))
        } else {
            Ok(())
        }
    }
}

/// Seed streams within one replication.
mod stream {
    pub const PARTITION: u64 = 0;
    pub const CLUSTER_ROWS: u64 = 1;
    pub const INITIAL: u64 = 2;
    pub const MODEL: u64 = 3;
    pub const PERTURB: u64 = 4;
    pub const SIMULATE: u64 = 5;
    pub const KMEANS: u64 = 6;
}

/// A random aggregatable chain: uniform partition, uniform Dirichlet
/// cluster rows and initial distribution.
pub struct SyntheticChain {
    pub partition: Partition,
    pub p_bar: StochasticMatrix,
    pub pi0: DistributionVector,
}

pub fn sample_synthetic_chain(n: usize, r: usize, seed: u64) -> Result<SyntheticChain> {
    let mut g = rng::seeded(rng::derive_seed(seed, stream::PARTITION));
    let partition = Partition::sample_uniform(n, r, &mut g)?;
    let ones = vec![1.0; n];
    let rows = markov::sample_dirichlet_rows(&ones, r, rng::derive_seed(seed, stream::CLUSTER_ROWS))?;
    let p_bar = markov::build_aggregatable(&partition, &rows)?;
    let pi0 = markov::sample_dirichlet_rows(&ones, 1, rng::derive_seed(seed, stream::INITIAL))?;
    let pi0 = DistributionVector::new(pi0.row(0).iter().copied().collect())?;
    Ok(SyntheticChain { partition, p_bar, pi0 })
}

fn replicate(cfg: &ExperimentConfig, point: &GridPoint, seed: u64) -> Result<Metrics> {
    let budget = Budget { start: Instant::now(), limit: Duration::from_secs_f64(cfg.time_budget_secs) };
    let chain = sample_synthetic_chain(cfg.n, point.r, seed)?;
    let (p, delta_norm) = match point.alpha {
        Some(alpha) => {
            let pert = markov::sample_perturbed(
                &chain.p_bar,
                &chain.partition,
                alpha,
                rng::derive_seed(seed, stream::PERTURB),
            )?;
            (pert.p, pert.delta_norm)
        }
        None => (chain.p_bar.clone(), 0.0),
    };
    let (model, opts) = match cfg.scenario {
        Scenario::Robot => (
            jump::robot_model(&jump::robot_positions(cfg.n), cfg.gain)?,
            SimOptions::new(NoiseKind::Gaussian { std_dev: cfg.noise_variance.sqrt() }, InputKind::ConstantOne),
        ),
        _ => {
            let mut g = rng::seeded(rng::derive_seed(seed, stream::MODEL));
            (
                JumpModel::sample_random(cfg.n, cfg.n_a, cfg.n_c, &mut g)?,
                SimOptions::new(NoiseKind::Uniform { max: point.noise_max }, InputKind::GaussianUnit),
            )
        }
    };
    budget.check()?;
    let traj =
        jump::simulate_with(&model, &p, &chain.pi0, point.samples, &opts, rng::derive_seed(seed, stream::SIMULATE))?;
    budget.check()?;
    let out = reduction::run_pipeline(&model, &traj, point.r, &cfg.kmeans, rng::derive_seed(seed, stream::KMEANS))?;
    budget.check()?;
    let est = &out.clustering.partition;
    let pi = markov::stationary(&p)?;
    let pi_tilde = reduction::reduced_stationary(&out.reduced, markov::DEFAULT_STATIONARY_TOL)?;
    budget.check()?;
    Ok(Metrics {
        ce: clustering::clustering_error(&chain.partition, est)?,
        stationary_l1_diff: pi.l1_distance(&pi_tilde),
        mr: clustering::misclustering_rate(&chain.partition, est)?,
        eta: out.estimate.mistake_rate.unwrap_or(0.0),
        delta_norm,
    })
}

fn mean_metrics(rows: &[&Metrics]) -> Option<Metrics> {
    if rows.is_empty() {
        return None;
    }
    let k = rows.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / k;
    Some(Metrics {
        ce: avg(|m| m.ce),
        stationary_l1_diff: avg(|m| m.stationary_l1_diff),
        mr: avg(|m| m.mr),
        eta: avg(|m| m.eta),
        delta_norm: avg(|m| m.delta_norm),
    })
}

/// Runs every `(grid point, replication)` pair in parallel.
///
/// Replication `k` uses the same derived seed at every grid point, so the
/// grid points share their random instances and differ only in the swept
/// parameter.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let grid = cfg.grid();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..cfg.replications).map(move |k| (g, k))).collect();
    let mut rows: Vec<(usize, ReplicationRow)> = jobs
        .par_iter()
        .map(|&(g, k)| {
            let start = Instant::now();
            let seed = rng::derive_seed(cfg.rng_seed, k as u64);
            let res = replicate(cfg, &grid[g], seed);
            let wall_time = start.elapsed().as_secs_f64();
            let (metrics, error) = match res {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            (g, ReplicationRow { point: grid[g], replication: k, metrics, error, wall_time })
        })
        .collect();
    rows.sort_by_key(|(g, row)| (*g, row.replication));
    let rows: Vec<ReplicationRow> = rows.into_iter().map(|(_, r)| r).collect();
    let aggregates = grid
        .iter()
        .map(|point| {
            let done: Vec<&Metrics> =
                rows.iter().filter(|r| &r.point == point).filter_map(|r| r.metrics.as_ref()).collect();
            GridAggregate {
                point: *point,
                completed: done.len(),
                failed: cfg.replications - done.len(),
                means: mean_metrics(&done),
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| r.failed()).count();
    Ok(ExperimentRecord { config: cfg.clone(), rows, aggregates, failed })
}

pub fn run_synthetic_sweep(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    expect_scenario(cfg, Scenario::SyntheticSweep)?;
    run_experiment(cfg)
}

pub fn run_perturbation_sweep(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    expect_scenario(cfg, Scenario::PerturbationSweep)?;
    run_experiment(cfg)
}

pub fn run_robot(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    expect_scenario(cfg, Scenario::Robot)?;
    run_experiment(cfg)
}

fn expect_scenario(cfg: &ExperimentConfig, s: Scenario) -> Result<()> {
    if cfg.scenario != s {
        return Err(Error::arg(format!("config scenario is {}, expected {}", cfg.scenario.name(), s.name())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// One row per grid point with the metric mean.
    Line,
    /// One row per completed replication.
    Scatter,
}

impl PlotKind {
    pub fn default_for(s: Scenario) -> Self {
        match s {
            Scenario::PerturbationSweep => PlotKind::Scatter,
            _ => PlotKind::Line,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `<dir>/<scenario>_<metric>.csv` for every metric and returns the
/// paths. Output depends only on the record's reproducible content.
pub fn emit_plot_data(record: &ExperimentRecord, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    if record.rows.is_empty() {
        return Err(Error::arg("record has no rows"));
    }
    fs::create_dir_all(dir)?;
    let scenario = record.config.scenario.name();
    let mut paths = Vec::new();
    for metric in Metrics::NAMES {
        let mut s = String::new();
        match kind {
            PlotKind::Line => {
                s.push_str("N,r,n_max,alpha,mean,count\n");
                for a in &record.aggregates {
                    let mean = a.means.map(|m| m.get(metric));
                    writeln!(
                        s,
                        "{},{},{},{},{},{}",
                        a.point.samples,
                        a.point.r,
                        a.point.noise_max,
                        opt(a.point.alpha),
                        opt(mean),
                        a.completed
                    )
                    .unwrap();
                }
            }
            PlotKind::Scatter => {
                s.push_str("delta_norm,value,N,r,n_max,alpha,replication\n");
                for row in &record.rows {
                    let Some(m) = row.metrics else { continue };
                    writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        m.delta_norm,
                        m.get(metric),
                        row.point.samples,
                        row.point.r,
                        row.point.noise_max,
                        opt(row.point.alpha),
                        row.replication
                    )
                    .unwrap();
                }
            }
        }
        let path = dir.join(format!("{scenario}_{metric}.csv"));
        fs::write(&path, s)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Per-replication rows as CSV, including failures and timing.
pub fn format_rows_csv(record: &ExperimentRecord) -> String {
    let mut s =
        String::from("N,r,n_max,alpha,replication,failed,ce,stationary_l1_diff,mr,eta,delta_norm,wall_time,error\n");
    for row in &record.rows {
        let m = row.metrics;
        let field = |name: &str| opt(m.map(|m| m.get(name)));
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.point.samples,
            row.point.r,
            row.point.noise_max,
            opt(row.point.alpha),
            row.replication,
            row.failed(),
            field("ce"),
            field("stationary_l1_diff"),
            field("mr"),
            field("eta"),
            field("delta_norm"),
            row.wall_time,
            row.error.as_deref().unwrap_or("").replace(',', ";")
        )
        .unwrap();
    }
    s
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `NaN` when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
