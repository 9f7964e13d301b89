use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use modeclust::clustering::KMeansConfig;
use modeclust::experiments::{self, ExperimentConfig, PlotKind};
use modeclust::jump::{self, InputKind, JumpModel, NoiseKind, SimOptions};
use modeclust::markov::{self, DistributionVector};
use modeclust::reduction::{self, MrBoundInputs, PDiffBoundInputs};
use modeclust::{estimation, io, rng, spectral, Error, Result};

#[derive(Parser)]
#[command(name = "modeclust", version, about = "Mode clustering for Markov jump systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration (experiment config, or k-means settings for `cluster`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; defaults to 0, or to the config's rng_seed for `experiment`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory from a jump model and a transition matrix.
    Simulate(SimulateArgs),
    /// Estimate modes from residuals and count transitions.
    Estimate(EstimateArgs),
    /// Cluster modes from a mode sequence or transition counts.
    Cluster(ClusterArgs),
    /// Re-estimate the aggregated chain over a partition.
    Reduce(ReduceArgs),
    /// Evaluate an error bound.
    Bounds(BoundsArgs),
    /// Run a configured Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Gaussian,
    One,
    Zero,
}

impl From<InputArg> for InputKind {
    fn from(a: InputArg) -> Self {
        match a {
            InputArg::Gaussian => InputKind::GaussianUnit,
            InputArg::One => InputKind::ConstantOne,
            InputArg::Zero => InputKind::Zero,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Jump model JSON; written to the output directory when generated.
    #[arg(long, conflicts_with = "random_modes")]
    model: Option<PathBuf>,
    /// Generate a random pole-sampled model with this many modes.
    #[arg(long)]
    random_modes: Option<usize>,
    #[arg(long, default_value_t = 3)]
    n_a: usize,
    #[arg(long, default_value_t = 2)]
    n_c: usize,
    /// Transition matrix file.
    #[arg(long)]
    transition: PathBuf,
    /// Initial distribution file; uniform when omitted.
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Number of transitions `N`.
    #[arg(long)]
    steps: usize,
    /// Uniform noise bound.
    #[arg(long, default_value_t = 0.0, conflicts_with = "noise_std")]
    noise_max: f64,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    input: InputArg,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Mode sequence file.
    #[arg(long, conflicts_with = "counts", required_unless_present = "counts")]
    modes: Option<PathBuf>,
    /// Transition counts file.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long)]
    r: usize,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    partition: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Stationary,
    Transient,
    Mr,
    PDiff,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    /// True transition matrix (stationary, transient).
    #[arg(long)]
    p: Option<PathBuf>,
    /// Approximating transition matrix (stationary, transient).
    #[arg(long)]
    p_tilde: Option<PathBuf>,
    /// Initial distribution (transient).
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// JSON scalars (mr, p-diff).
    #[arg(long)]
    inputs: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Plot-data layout; defaults to scatter for perturbation sweeps and line otherwise.
    #[arg(long, value_enum)]
    plot: Option<PlotArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotArg {
    Line,
    Scatter,
}

fn required<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    opt.as_deref().ok_or_else(|| Error::arg(format!("--{flag} is required here")))
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn no_config(common: &Common, cmd: &str) -> Result<()> {
    match common.config {
        Some(_) => Err(Error::arg(format!("`{cmd}` does not take --config"))),
        None => Ok(()),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn simulate(common: &Common, a: &SimulateArgs) -> Result<()> {
    no_config(common, "simulate")?;
    let dir = out_dir(common)?;
    let seed = common.seed.unwrap_or(0);
    let p = io::read_stochastic(&a.transition)?;
    let model = match (&a.model, a.random_modes) {
        (Some(path), _) => io::read_model(path)?,
        (None, Some(n)) => {
            let mut g = rng::seeded(rng::derive_seed(seed, u64::MAX));
            let m = JumpModel::sample_random(n, a.n_a, a.n_c, &mut g)?;
            io::write_model(&dir.join("model.json"), &m)?;
            m
        }
        (None, None) => return Err(Error::arg("one of --model or --random-modes is required")),
    };
    let pi0 = match &a.initial {
        Some(path) => io::read_distribution(path)?,
        None => DistributionVector::uniform(p.n()),
    };
    let noise = match a.noise_std {
        Some(std_dev) => NoiseKind::Gaussian { std_dev },
        None => NoiseKind::Uniform { max: a.noise_max },
    };
    let opts = SimOptions::new(noise, a.input.into());
    let traj = jump::simulate_with(&model, &p, &pi0, a.steps, &opts, seed)?;
    let path = dir.join("trajectory.csv");
    io::write_trajectory(&path, &traj, model.n_a(), model.n_c())?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateSummary {
    samples: usize,
    mistake_count: Option<usize>,
    mistake_rate: Option<f64>,
    separability_violations: Option<usize>,
}

fn estimate(common: &Common, a: &EstimateArgs) -> Result<()> {
    no_config(common, "estimate")?;
    let dir = out_dir(common)?;
    let model = io::read_model(&a.model)?;
    let (traj, n_a, n_c) = io::read_trajectory(&a.trajectory)?;
    if (n_a, n_c) != (model.n_a(), model.n_c()) {
        return Err(Error::arg(format!(
            "trajectory header orders ({n_a}, {n_c}) do not match the model ({}, {})",
            model.n_a(),
            model.n_c()
        )));
    }
    let est = jump::estimate_modes(&model, &traj)?;
    let counts = estimation::count_transitions(&est.modes, model.n())?;
    io::write_modes(&dir.join("modes.txt"), &est.modes, model.n())?;
    io::write_counts(&dir.join("counts.txt"), &counts)?;
    io::write_stochastic(&dir.join("p_hat.txt"), &estimation::empirical_matrix(&counts))?;
    let separability_violations = match traj.modes {
        Some(_) => Some(jump::check_separability(&model, &traj, traj.noise_max)?.violations()),
        None => None,
    };
    print_json(&EstimateSummary {
        samples: traj.len(),
        mistake_count: est.mistake_count,
        mistake_rate: est.mistake_rate,
        separability_violations,
    })
}

#[derive(Serialize)]
struct ClusterSummary {
    r: usize,
    cost: f64,
    restarts_used: usize,
    singular_values: Vec<f64>,
    sizes: Vec<usize>,
}

fn cluster(common: &Common, a: &ClusterArgs) -> Result<()> {
    let cfg: KMeansConfig = match &common.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => KMeansConfig::default(),
    };
    if cfg.restarts == 0 {
        return Err(Error::arg("restarts must be at least 1"));
    }
    let dir = out_dir(common)?;
    let counts = match (&a.modes, &a.counts) {
        (Some(path), _) => {
            let (modes, n) = io::read_modes(path)?;
            estimation::count_transitions(&modes, n)?
        }
        (None, Some(path)) => io::read_counts(path)?,
        (None, None) => return Err(Error::arg("one of --modes or --counts is required")),
    };
    let n = counts.n();
    if a.r == 0 || a.r > n {
        return Err(Error::arg(format!("cluster count {} must lie in 1..={n}", a.r)));
    }
    let p_hat = estimation::empirical_matrix(&counts);
    let basis = spectral::truncate_svd(p_hat.matrix(), a.r)?;
    let km = modeclust::clustering::kmeans(&basis.u, a.r, &cfg, common.seed.unwrap_or(0))?;
    io::write_partition(&dir.join("partition.txt"), &km.partition)?;
    io::write_matrix(&dir.join("u_r.txt"), &basis.u)?;
    print_json(&ClusterSummary {
        r: a.r,
        cost: km.cost,
        restarts_used: km.restarts_used,
        singular_values: basis.sigma.iter().copied().chain(basis.tail.iter().copied()).collect(),
        sizes: km.partition.sizes(),
    })
}

#[derive(Serialize)]
struct ReduceSummary {
    n: usize,
    r: usize,
    transitions: u64,
    stationary: Vec<f64>,
}

fn reduce(common: &Common, a: &ReduceArgs) -> Result<()> {
    no_config(common, "reduce")?;
    let dir = out_dir(common)?;
    let counts = io::read_counts(&a.counts)?;
    let partition = io::read_partition(&a.partition)?;
    let model = reduction::aggregate_reestimate(&counts, &partition)?;
    let pi = reduction::reduced_stationary(&model, markov::DEFAULT_STATIONARY_TOL)?;
    io::write_cluster_rows(&dir.join("cluster_rows.txt"), &model.cluster_rows)?;
    io::write_stochastic(&dir.join("p_tilde.txt"), &model.dense)?;
    io::write_distribution(&dir.join("stationary.txt"), &pi)?;
    print_json(&ReduceSummary {
        n: model.n(),
        r: model.r(),
        transitions: model.provenance.transitions,
        stationary: pi.into_vec(),
    })
}

#[derive(Serialize)]
struct TransientSummary {
    c: f64,
    rho: f64,
    stationary_gap: f64,
    horizon: usize,
    bound: Vec<f64>,
    actual: Vec<f64>,
}

fn bounds(common: &Common, a: &BoundsArgs) -> Result<()> {
    no_config(common, "bounds")?;
    let json = match a.kind {
        BoundKind::Stationary => {
            let p = io::read_stochastic(required(&a.p, "p")?)?;
            let pt = io::read_stochastic(required(&a.p_tilde, "p-tilde")?)?;
            reduction::bound_stationary_diff(&p, &pt)?.to_json()?
        }
        BoundKind::Transient => {
            let p = io::read_stochastic(required(&a.p, "p")?)?;
            let pt = io::read_stochastic(required(&a.p_tilde, "p-tilde")?)?;
            let pi0 = match &a.initial {
                Some(path) => io::read_distribution(path)?,
                None => DistributionVector::uniform(p.n()),
            };
            let b = reduction::bound_transient_diff(&p, &pt, &pi0, a.horizon)?;
            let (mut x, mut y) = (pi0.clone(), pi0.clone());
            let mut actual = Vec::with_capacity(a.horizon + 1);
            for _ in 0..=a.horizon {
                actual.push(x.l1_distance(&y));
                x = p.step(&x);
                y = pt.step(&y);
            }
            serde_json::to_string_pretty(&TransientSummary {
                c: b.envelope.c,
                rho: b.envelope.rho,
                stationary_gap: b.stationary_gap,
                horizon: a.horizon,
                bound: (0..=a.horizon).map(|t| b.at(t)).collect(),
                actual,
            })?
        }
        BoundKind::Mr => {
            let text = fs::read_to_string(required(&a.inputs, "inputs")?)?;
            let x: MrBoundInputs = serde_json::from_str(&text)?;
            reduction::bound_mr(&x)?.to_json()?
        }
        BoundKind::PDiff => {
            let text = fs::read_to_string(required(&a.inputs, "inputs")?)?;
            let x: PDiffBoundInputs = serde_json::from_str(&text)?;
            reduction::bound_p_diff(&x)?.to_json()?
        }
    };
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("bound.json"), &json)?;
    }
    println!("{json}");
    Ok(())
}

fn experiment(common: &Common, a: &ExperimentArgs) -> Result<()> {
    let path = required(&common.config, "config")?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    let record = experiments::run_experiment(&cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let name = cfg.scenario.name();
    fs::write(dir.join(format!("{name}_record.json")), serde_json::to_string_pretty(&record)?)?;
    fs::write(dir.join(format!("{name}_rows.csv")), experiments::format_rows_csv(&record))?;
    let kind = match a.plot {
        Some(PlotArg::Line) => PlotKind::Line,
        Some(PlotArg::Scatter) => PlotKind::Scatter,
        None => PlotKind::default_for(cfg.scenario),
    };
    let files = experiments::emit_plot_data(&record, kind, dir)?;
    for agg in &record.aggregates {
        let p = &agg.point;
        match agg.means {
            Some(m) => println!(
                "N={} r={} n_max={} alpha={} ce={:.4} stationary_l1_diff={:.4} mr={:.4} eta={:.4} completed={} failed={}",
                p.samples,
                p.r,
                p.noise_max,
                p.alpha.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                m.ce,
                m.stationary_l1_diff,
                m.mr,
                m.eta,
                agg.completed,
                agg.failed
            ),
            None => println!("N={} r={} all {} replications failed", p.samples, p.r, agg.failed),
        }
    }
    println!("wrote {} plot files to {}", files.len(), dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(k) = cli.common.threads {
        if k == 0 {
            return Err(Error::arg("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Error::arg(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(&cli.common, a),
        Command::Estimate(a) => estimate(&cli.common, a),
        Command::Cluster(a) => cluster(&cli.common, a),
        Command::Reduce(a) => reduce(&cli.common, a),
        Command::Bounds(a) => bounds(&cli.common, a),
        Command::Experiment(a) => experiment(&cli.common, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
