//! Aggregated re-estimation of the transition matrix over a partition,
//! factored multiplication, the error-bound calculators, and the end-to-end
//! clustering pipeline.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

use crate::clustering::{self, KMeansConfig, KMeansResult};
use crate::error::{Error, Result};
use crate::estimation::{self, TransitionCounts};
use crate::jump::{self, JumpModel, ModeEstimate, Trajectory};
use crate::linalg;
use crate::markov::{self, DistributionVector, GeometricEnvelope, Partition, StochasticMatrix};
use crate::spectral::{self, TruncatedBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Number of counted transitions `N`.
    pub transitions: u64,
    pub mistake_rate: Option<f64>,
    pub r: usize,
}

/// An `r`-aggregatable chain: one distribution row per cluster, plus the
/// expanded `n x n` matrix.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub partition: Partition,
    /// `r x n`.
    pub cluster_rows: DMatrix<f64>,
    pub dense: StochasticMatrix,
    pub provenance: Provenance,
    /// Row-major copy of `cluster_rows` for the factored product.
    flat: Vec<f64>,
}

impl ReducedModel {
    pub fn new(partition: Partition, cluster_rows: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let (n, r) = (partition.n(), partition.r());
        if cluster_rows.nrows() != r || cluster_rows.ncols() != n {
            return Err(Error::arg(format!(
                "cluster rows must be {r}x{n}, got {}x{}",
                cluster_rows.nrows(),
                cluster_rows.ncols()
            )));
        }
        let dense = StochasticMatrix::new(DMatrix::from_fn(n, n, |i, j| cluster_rows[(partition.label(i), j)]))?;
        let flat = (0..r).flat_map(|k| cluster_rows.row(k).iter().copied().collect::<Vec<_>>()).collect();
        Ok(Self { partition, cluster_rows, dense, provenance, flat })
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn r(&self) -> usize {
        self.partition.r()
    }

    /// `out = x^T P_tilde` in `O(rn)`: pool the mass by cluster, then mix
    /// the cluster rows.
    pub fn step_into(&self, x: &[f64], pooled: &mut [f64], out: &mut [f64]) {
        let n = self.n();
        pooled.iter_mut().for_each(|p| *p = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            pooled[self.partition.label(i)] += xi;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &w) in pooled.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &self.flat[k * n..(k + 1) * n];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}

/// Pools pair counts and visits within each cluster. A cluster with no
/// visits gets the uniform row.
pub fn aggregate_reestimate(counts: &TransitionCounts, partition: &Partition) -> Result<ReducedModel> {
    let n = counts.n();
    if partition.n() != n {
        return Err(Error::arg(format!("partition covers {} states but counts cover {n}", partition.n())));
    }
    let r = partition.r();
    let mut pooled = vec![0u64; r * n];
    let mut visits = vec![0u64; r];
    for i in 0..n {
        let k = partition.label(i);
        visits[k] += counts.visit(i);
        for j in 0..n {
            pooled[k * n + j] += counts.pair(i, j);
        }
    }
    let rows = DMatrix::from_fn(r, n, |k, j| match visits[k] {
        0 => 1.0 / n as f64,
        v => pooled[k * n + j] as f64 / v as f64,
    });
    ReducedModel::new(partition.clone(), rows, Provenance { transitions: counts.total(), mistake_rate: None, r })
}

/// `pi^T P_tilde` in factored form.
pub fn reduced_multiply(model: &ReducedModel, pi: &DistributionVector) -> Result<DistributionVector> {
    if pi.len() != model.n() {
        return Err(Error::arg("distribution length does not match the reduced model"));
    }
    let mut pooled = vec![0.0; model.r()];
    let mut out = vec![0.0; model.n()];
    model.step_into(pi.as_slice(), &mut pooled, &mut out);
    Ok(DistributionVector::renormalized(out))
}

/// Power method driven by the factored product.
pub fn reduced_stationary(model: &ReducedModel, tol: f64) -> Result<DistributionVector> {
    let mut pooled = vec![0.0; model.r()];
    markov::power_iterate(
        model.n(),
        |x, out| model.step_into(x, &mut pooled, out),
        tol,
        markov::DEFAULT_STATIONARY_MAX_ITERS,
    )
}

fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

fn ser_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    struct F(f64);
    impl Serialize for F {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_f64(&self.0, s)
        }
    }
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &F(*v))?;
    }
    map.end()
}

/// Value of one error bound together with everything it was computed from.
/// Infinite values serialize as the string `"inf"`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    /// `None` when a precondition fails.
    #[serde(serialize_with = "ser_opt_f64")]
    pub value: Option<f64>,
    pub applicable: bool,
    /// The value exceeds the trivial cap of the bounded quantity.
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(serialize_with = "ser_map")]
    pub inputs: BTreeMap<String, f64>,
    #[serde(serialize_with = "ser_map")]
    pub outputs: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(name: &str, inputs: BTreeMap<String, f64>) -> Self {
        Self {
            name: name.to_string(),
            value: None,
            applicable: false,
            vacuous: false,
            reason: None,
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    fn with_value(mut self, value: f64, cap: f64) -> Self {
        self.value = Some(value);
        self.applicable = true;
        self.vacuous = value > cap;
        self
    }

    fn inapplicable(mut self, reason: String) -> Self {
        self.reason = Some(reason);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn named(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `sum_{i>=2} |1/(1 - lambda_i(P))| * ||P - P_tilde||_inf` against the
/// actual `||pi - pi_tilde||_1`.
pub fn bound_stationary_diff(p: &StochasticMatrix, p_tilde: &StochasticMatrix) -> Result<BoundReport> {
    if p.n() != p_tilde.n() {
        return Err(Error::arg("matrices differ in size"));
    }
    let eig = markov::spectral_summary(p.matrix())?.eigenvalues;
    let unit = markov::closest_to_one(&eig).expect("nonempty spectrum");
    let mut kappa = 0.0;
    for (i, z) in eig.iter().enumerate() {
        if i == unit {
            continue;
        }
        let gap = (1.0 - z).norm();
        if gap < 1e-9 {
            return Err(Error::arg("eigenvalue 1 is repeated; the chain is not ergodic"));
        }
        kappa += 1.0 / gap;
    }
    let diff = linalg::inf_norm(&(p.matrix() - p_tilde.matrix()));
    let mut report =
        BoundReport::new("stationary-diff", named(&[("kappa", kappa), ("p_diff_inf", diff), ("n", p.n() as f64)]))
            .with_value(kappa * diff, 2.0);
    let pi = markov::stationary(p)?;
    match markov::stationary(p_tilde) {
        Ok(pt) => {
            report.outputs.insert("actual".into(), pi.l1_distance(&pt));
        }
        Err(e) => report.reason = Some(format!("actual difference unavailable: {e}")),
    }
    Ok(report)
}

/// `||pi_t - pi_tilde_t||_1 <= C rho^t + ||pi - pi_tilde||_1` from the two
/// fitted convergence envelopes (same starting distribution).
#[derive(Clone, Copy, Debug)]
pub struct TransientBound {
    pub envelope: GeometricEnvelope,
    pub stationary_gap: f64,
}

impl TransientBound {
    pub fn at(&self, t: usize) -> f64 {
        self.envelope.at(t) + self.stationary_gap
    }
}

pub fn bound_transient_diff(
    p: &StochasticMatrix,
    p_tilde: &StochasticMatrix,
    pi0: &DistributionVector,
    horizon: usize,
) -> Result<TransientBound> {
    let a = markov::transient_envelope(p, pi0, horizon)?;
    let b = markov::transient_envelope(p_tilde, pi0, horizon)?;
    let gap = markov::stationary(p)?.l1_distance(&markov::stationary(p_tilde)?);
    let rho = a.rho.max(b.rho);
    Ok(TransientBound { envelope: GeometricEnvelope { c: a.c + b.c, rho }, stationary_gap: gap })
}

/// Scalars entering the misclustering-rate bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrBoundInputs {
    /// `sigma_r(P_bar)`.
    pub sigma_r_bar: f64,
    /// `sigma_1(P_bar) = ||P_bar||`.
    pub sigma_1_bar: f64,
    /// Spectral norm of `delta`.
    pub delta_norm: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    pub tau_star: f64,
    pub eta: f64,
    /// k-means approximation factor.
    pub eps1: f64,
    pub eps2: f64,
    /// `|Omega_(1)|`.
    pub largest_cluster: f64,
    /// `|Omega_(r)|`.
    pub smallest_cluster: f64,
    pub n: f64,
    pub r: f64,
    /// Trajectory length `N`.
    pub samples: f64,
}

impl MrBoundInputs {
    fn as_map(&self) -> BTreeMap<String, f64> {
        named(&[
            ("sigma_r_bar", self.sigma_r_bar),
            ("sigma_1_bar", self.sigma_1_bar),
            ("delta_norm", self.delta_norm),
            ("pi_min", self.pi_min),
            ("pi_max", self.pi_max),
            ("tau_star", self.tau_star),
            ("eta", self.eta),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("largest_cluster", self.largest_cluster),
            ("smallest_cluster", self.smallest_cluster),
            ("n", self.n),
            ("r", self.r),
            ("samples", self.samples),
        ])
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_r_bar", self.sigma_r_bar),
            ("sigma_1_bar", self.sigma_1_bar),
            ("pi_min", self.pi_min),
            ("pi_max", self.pi_max),
            ("tau_star", self.tau_star),
            ("eps2", self.eps2),
            ("largest_cluster", self.largest_cluster),
            ("smallest_cluster", self.smallest_cluster),
            ("n", self.n),
            ("r", self.r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::arg(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let nonneg =
            [("delta_norm", self.delta_norm), ("eta", self.eta), ("eps1", self.eps1), ("samples", self.samples)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::arg(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Largest perturbation norm the bound tolerates.
    pub fn delta_threshold(&self) -> f64 {
        self.sigma_r_bar / (8.0 * ((2.0 + self.eps1) * self.r).sqrt())
            * (self.smallest_cluster / self.largest_cluster + 1.0).sqrt()
    }
}

/// Misclustering-rate bound with its sample-size requirement and
/// probability lower bound.
pub fn bound_mr(x: &MrBoundInputs) -> Result<BoundReport> {
    x.validate()?;
    let report = BoundReport::new("misclustering-rate", x.as_map());
    if x.eta >= x.pi_min / 2.0 {
        return Ok(report.inapplicable(format!("mistake rate {} is not below pi_min / 2 = {}", x.eta, x.pi_min / 2.0)));
    }
    let threshold = x.delta_threshold();
    if x.delta_norm > threshold {
        return Ok(
            report.inapplicable(format!("perturbation norm {} exceeds the admissible {threshold}", x.delta_norm))
        );
    }
    let eps2_tilde = x
        .eps2
        .min(x.pi_min / 2.0 - x.eta)
        .min(x.pi_min / (4.0 * (x.sigma_1_bar + x.delta_norm)) * (threshold - x.delta_norm));
    let (scale, min_samples, probability) = if eps2_tilde > 0.0 {
        let log_inv = (1.0 / eps2_tilde).ln();
        let scale = 200.0 * x.tau_star * x.pi_max * log_inv / (eps2_tilde * eps2_tilde);
        let min_samples = scale * ((24.0 * x.n * x.tau_star).ln() + log_inv.ln());
        (scale, min_samples, 1.0 - (-x.samples / scale).exp())
    } else {
        (f64::INFINITY, f64::INFINITY, 0.0)
    };
    let inner = x.delta_norm / x.sigma_r_bar
        + 4.0 * (x.eps2 + 1.5 * x.eta) * (x.delta_norm + x.sigma_1_bar) / (x.pi_min * x.sigma_r_bar);
    let value = 64.0 * (2.0 + x.eps1) * x.r * inner * inner;
    let mut report = report.with_value(value, x.r);
    report.outputs = named(&[
        ("delta_threshold", threshold),
        ("eps2_tilde", eps2_tilde),
        ("sample_scale", scale),
        ("min_samples", min_samples),
        ("probability", probability),
        ("sample_condition_met", if x.samples >= min_samples { 1.0 } else { 0.0 }),
    ]);
    Ok(report)
}

/// Scalars entering the transition-matrix error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PDiffBoundInputs {
    pub n: f64,
    pub pi_min: f64,
    /// `sigma_1(P)`.
    pub sigma_1: f64,
    pub eps2: f64,
    pub eta: f64,
    /// `||delta||_inf`.
    pub delta_inf: f64,
    /// The caller asserts the estimated partition has zero misclustering.
    pub mr_zero: bool,
}

/// `||P - P_tilde||_inf <= 12 sqrt(n) sigma_1(P) (eps2 + 1.5 eta) / pi_min + 2 ||delta||_inf`.
pub fn bound_p_diff(x: &PDiffBoundInputs) -> Result<BoundReport> {
    for (name, v) in [("n", x.n), ("pi_min", x.pi_min), ("sigma_1", x.sigma_1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::arg(format!("{name} must be positive and finite, got {v}")));
        }
    }
    for (name, v) in [("eps2", x.eps2), ("eta", x.eta), ("delta_inf", x.delta_inf)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::arg(format!("{name} must be nonnegative and finite, got {v}")));
        }
    }
    let mut inputs = named(&[
        ("n", x.n),
        ("pi_min", x.pi_min),
        ("sigma_1", x.sigma_1),
        ("eps2", x.eps2),
        ("eta", x.eta),
        ("delta_inf", x.delta_inf),
    ]);
    inputs.insert("mr_zero".into(), if x.mr_zero { 1.0 } else { 0.0 });
    let report = BoundReport::new("transition-diff", inputs);
    if !x.mr_zero {
        return Ok(report.inapplicable("bound requires zero misclustering".into()));
    }
    if x.eta >= x.pi_min / 2.0 {
        return Ok(report.inapplicable(format!("mistake rate {} is not below pi_min / 2 = {}", x.eta, x.pi_min / 2.0)));
    }
    let value = 12.0 * x.n.sqrt() / x.pi_min * x.sigma_1 * (x.eps2 + 1.5 * x.eta) + 2.0 * x.delta_inf;
    Ok(report.with_value(value, 2.0))
}

/// Smallest `eps2` consistent with a measured estimation error under
/// `||P_hat - P|| <= 4 ||P|| (eps2 + 1.5 eta) / pi_min`, floored at zero.
pub fn backsolve_eps2(p_hat_error: f64, pi_min: f64, p_norm: f64, eta: f64) -> f64 {
    (p_hat_error * pi_min / (4.0 * p_norm) - 1.5 * eta).max(0.0)
}

/// Intermediate and final products of one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub estimate: ModeEstimate,
    pub counts: TransitionCounts,
    pub p_hat: StochasticMatrix,
    pub basis: TruncatedBasis,
    pub clustering: KMeansResult,
    pub reduced: ReducedModel,
}

/// Counting, truncated SVD, k-means on the rows of `U_r`, and pooled
/// re-estimation, starting from an estimated mode sequence.
pub fn cluster_modes(
    modes: &[usize],
    n: usize,
    r: usize,
    cfg: &KMeansConfig,
    seed: u64,
) -> Result<(TransitionCounts, StochasticMatrix, TruncatedBasis, KMeansResult, ReducedModel)> {
    if r == 0 || r > n {
        return Err(Error::arg(format!("cluster count {r} must lie in 1..={n}")));
    }
    let counts = estimation::count_transitions(modes, n)?;
    let p_hat = estimation::empirical_matrix(&counts);
    let basis = spectral::truncate_svd(p_hat.matrix(), r)?;
    let clustering = clustering::kmeans(&basis.u, r, cfg, seed)?;
    let reduced = aggregate_reestimate(&counts, &clustering.partition)?;
    Ok((counts, p_hat, basis, clustering, reduced))
}

/// Full pipeline from observations: residual mode estimation first.
pub fn run_pipeline(
    model: &JumpModel,
    traj: &Trajectory,
    r: usize,
    cfg: &KMeansConfig,
    seed: u64,
) -> Result<PipelineOutput> {
    if traj.len() < model.order() + 2 {
        return Err(Error::arg(format!(
            "trajectory of {} samples is too short for order {}",
            traj.len(),
            model.order()
        )));
    }
    let estimate = jump::estimate_modes(model, traj)?;
    let (counts, p_hat, basis, clustering, mut reduced) = cluster_modes(&estimate.modes, model.n(), r, cfg, seed)?;
    reduced.provenance.mistake_rate = estimate.mistake_rate;
    Ok(PipelineOutput { estimate, counts, p_hat, basis, clustering, reduced })
}
