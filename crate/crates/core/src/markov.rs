//! Row-stochastic matrices, distributions over states, partitions, and the
//! chain-level quantities built on them (stationary and transient
//! distributions, mixing time, spectra), plus samplers for aggregatable and
//! perturbed transition matrices.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, SimRng};

/// Row sums must be within this of 1.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Matrices read from files are renormalized when the row sum is off by less than this.
pub const REPAIR_TOL: f64 = 1e-6;
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-10;
pub const DEFAULT_STATIONARY_MAX_ITERS: usize = 1_000_000;
pub const DEFAULT_MIXING_MAX_K: usize = 10_000;

/// A row-stochastic `n x n` transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

impl StochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::arg(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for (i, row) in m.row_iter().enumerate() {
            if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::arg(format!("row {i} has invalid entry {x}")));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::arg(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(Self { m })
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::arg(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len())));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    /// Accepts rows whose sums are within [`REPAIR_TOL`] of one and
    /// renormalizes them; anything further off is rejected.
    pub fn repaired(mut m: DMatrix<f64>) -> Result<Self> {
        for i in 0..m.nrows() {
            let s: f64 = m.row(i).sum();
            if (s - 1.0).abs() < REPAIR_TOL && s > 0.0 {
                m.row_mut(i).unscale_mut(s);
            }
        }
        Self::new(m)
    }

    /// The chain whose rows are all equal to `pi`.
    pub fn rank_one(pi: &DistributionVector) -> Self {
        let n = pi.len();
        let m = DMatrix::from_fn(n, n, |_, j| pi[j]);
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.m.row(i).iter().copied().collect()
    }

    /// `out = x^T P`.
    pub fn step_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.m.column(j).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// One step of the distribution recursion, `pi^T P`.
    pub fn step(&self, pi: &DistributionVector) -> DistributionVector {
        let mut out = vec![0.0; self.n()];
        self.step_into(pi.as_slice(), &mut out);
        DistributionVector::renormalized(out)
    }

    /// Irreducible and aperiodic, checked on the support pattern: a
    /// primitive pattern has `B^k > 0` for `k = (n-1)^2 + 1`.
    pub fn is_ergodic(&self) -> bool {
        let n = self.n();
        let mut b: Vec<bool> = self.m.iter().map(|&x| x > 0.0).collect();
        // nalgebra storage is column-major; b[i + j*n] is entry (i, j).
        let target = (n - 1) * (n - 1) + 1;
        let mut power = 1usize;
        while power < target {
            let mut c = vec![false; n * n];
            for j in 0..n {
                for k in 0..n {
                    if !b[k + j * n] {
                        continue;
                    }
                    for i in 0..n {
                        if b[i + k * n] {
                            c[i + j * n] = true;
                        }
                    }
                }
            }
            b = c;
            power *= 2;
        }
        b.iter().all(|&x| x)
    }
}

/// A probability vector over `n` states.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionVector(Vec<f64>);

impl DistributionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::arg("empty distribution"));
        }
        if let Some(x) = probs.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::arg(format!("invalid probability {x}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::arg(format!("probabilities sum to {s}, expected 1")));
        }
        Ok(Self(probs))
    }

    /// Clamps tiny negative round-off and rescales to unit mass.
    pub(crate) fn renormalized(mut v: Vec<f64>) -> Self {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
        Self(v)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        linalg::l1_distance(&self.0, &other.0)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for DistributionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Assignment of `n` states to `r` clusters; every cluster is nonempty.
///
/// Labels are zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    r: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, r: usize) -> Result<Self> {
        if assignment.is_empty() || r == 0 {
            return Err(Error::arg("partition needs at least one state and one cluster"));
        }
        let mut seen = vec![false; r];
        for (i, &k) in assignment.iter().enumerate() {
            if k >= r {
                return Err(Error::arg(format!("state {i} has cluster id {k} >= r = {r}")));
            }
            seen[k] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::arg(format!("cluster {k} is empty")));
        }
        Ok(Self { assignment, r })
    }

    /// Every state in its own cluster.
    pub fn identity(n: usize) -> Self {
        Self { assignment: (0..n).collect(), r: n }
    }

    pub fn single(n: usize) -> Self {
        Self { assignment: vec![0; n], r: 1 }
    }

    /// Uniform over labeled surjections `[n] -> [r]`.
    ///
    /// Draws i.i.d. labels and rejects draws with an empty cluster. When
    /// rejection keeps failing (`r` close to `n`), switches to an exact
    /// sequential sampler driven by Stirling numbers of the second kind,
    /// which has the same distribution.
    pub fn sample_uniform(n: usize, r: usize, rng: &mut SimRng) -> Result<Self> {
        const MAX_ATTEMPTS: usize = 1_000;
        if r == 0 || r > n {
            return Err(Error::arg(format!("cannot split {n} states into {r} nonempty clusters")));
        }
        for _ in 0..MAX_ATTEMPTS {
            let assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..r)).collect();
            if let Ok(p) = Self::new(assignment, r) {
                return Ok(p);
            }
        }
        Ok(Self::sample_surjection_exact(n, r, rng))
    }

    fn sample_surjection_exact(n: usize, r: usize, rng: &mut SimRng) -> Self {
        // ln T[q][b]: ways to place q more elements, with b blocks already
        // open, ending with exactly r blocks.
        // T[q][b] = b T[q-1][b] + T[q-1][b+1], T[0][b] = [b == r].
        let ln_add = |x: f64, y: f64| {
            let hi = x.max(y);
            if hi == f64::NEG_INFINITY {
                hi
            } else {
                hi + ((x - hi).exp() + (y - hi).exp()).ln()
            }
        };
        let mut t = vec![vec![f64::NEG_INFINITY; r + 2]; n + 1];
        t[0][r] = 0.0;
        for q in 1..=n {
            for b in 0..=r {
                let join = if b > 0 { (b as f64).ln() + t[q - 1][b] } else { f64::NEG_INFINITY };
                t[q][b] = ln_add(join, t[q - 1][b + 1]);
            }
        }
        let mut labels = Vec::with_capacity(n);
        let mut open = 0;
        for i in 0..n {
            let q = n - i;
            let p_new = (t[q - 1][open + 1] - t[q][open]).exp();
            if open < r && rng.random::<f64>() < p_new {
                labels.push(open);
                open += 1;
            } else {
                labels.push(rng.random_range(0..open));
            }
        }
        let mut perm: Vec<usize> = (0..r).collect();
        for i in (1..r).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        Self { assignment: labels.iter().map(|&l| perm[l]).collect(), r }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn label(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.r];
        for &k in &self.assignment {
            s[k] += 1;
        }
        s
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &l)| l == k).map(|(i, _)| i).collect()
    }

    /// `|Omega_(1)|`, the largest cluster size.
    pub fn largest_size(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }

    /// `|Omega_(r)|`, the smallest cluster size.
    pub fn smallest_size(&self) -> usize {
        self.sizes().into_iter().min().unwrap_or(0)
    }

    /// Relabels clusters in order of first appearance.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.r];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&k| {
                if map[k] == usize::MAX {
                    map[k] = next;
                    next += 1;
                }
                map[k]
            })
            .collect();
        Self { assignment, r: self.r }
    }

    /// Same grouping of states, ignoring labels.
    pub fn same_grouping(&self, other: &Self) -> bool {
        self.r == other.r && self.canonical().assignment == other.canonical().assignment
    }
}

/// Singular values (descending) and eigenvalues (by descending modulus).
#[derive(Clone, Debug)]
pub struct SpectralSummary {
    pub singular_values: Vec<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
}

impl SpectralSummary {
    /// Largest eigenvalue modulus after removing the one closest to 1.
    pub fn second_largest_modulus(&self) -> f64 {
        let skip = closest_to_one(&self.eigenvalues);
        self.eigenvalues.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, z)| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn closest_to_one(eigs: &[Complex<f64>]) -> Option<usize> {
    eigs.iter().enumerate().min_by(|a, b| (a.1 - 1.0).norm().partial_cmp(&(b.1 - 1.0).norm()).unwrap()).map(|(i, _)| i)
}

pub fn spectral_summary(m: &DMatrix<f64>) -> Result<SpectralSummary> {
    if m.nrows() != m.ncols() {
        return Err(Error::arg("spectral summary needs a square matrix"));
    }
    let singular_values = linalg::singular_values(m)?;
    let schur = m
        .clone()
        .try_schur(1e-15, 100_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    Ok(SpectralSummary { singular_values, eigenvalues })
}

/// Power iteration from the uniform vector. Returns the first iterate whose
/// one-step residual `||x^T A - x^T||_1` is at most `tol`.
pub(crate) fn power_iterate(
    n: usize,
    mut step: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    max_iters: usize,
) -> Result<DistributionVector> {
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tolerance must be positive, got {tol}")));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        step(&x, &mut next);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        residual = linalg::l1_distance(&x, &next);
        if residual <= tol {
            return Ok(DistributionVector::renormalized(x));
        }
        std::mem::swap(&mut x, &mut next);
    }
    Err(Error::NoConvergence { iterations: max_iters, residual })
}

pub fn stationary_distribution(p: &StochasticMatrix, tol: f64, max_iters: usize) -> Result<DistributionVector> {
    power_iterate(p.n(), |x, out| p.step_into(x, out), tol, max_iters)
}

/// [`stationary_distribution`] with the default tolerance and iteration cap.
pub fn stationary(p: &StochasticMatrix) -> Result<DistributionVector> {
    stationary_distribution(p, DEFAULT_STATIONARY_TOL, DEFAULT_STATIONARY_MAX_ITERS)
}

/// `pi0^T P^t`.
pub fn transient_distribution(p: &StochasticMatrix, pi0: &DistributionVector, t: usize) -> Result<DistributionVector> {
    if pi0.len() != p.n() {
        return Err(Error::arg("distribution length does not match the chain"));
    }
    let mut x = pi0.as_slice().to_vec();
    let mut next = vec![0.0; p.n()];
    for _ in 0..t {
        p.step_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(DistributionVector::renormalized(x))
}

/// Worst-case (over starting states) total-variation distance of the rows
/// of `m` from `pi`.
pub fn max_row_tv(m: &DMatrix<f64>, pi: &DistributionVector) -> f64 {
    m.row_iter()
        .map(|row| 0.5 * row.iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest `k` in `1..=max_k` with every row of `P^k` within total
/// variation `eps` of the stationary distribution.
///
/// Works on the dyadic powers `P^(2^b)`: the worst-case distance is
/// nonincreasing in `k`, so the largest failing `k` is built greedily from
/// the high bit down.
pub fn mixing_time(p: &StochasticMatrix, eps: f64, max_k: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::arg(format!("mixing accuracy must be in (0, 1), got {eps}")));
    }
    if max_k == 0 {
        return Err(Error::arg("max_k must be at least 1"));
    }
    let pi = stationary(p)?;
    let mut dyadic = vec![p.matrix().clone()];
    while (1usize << dyadic.len()) <= max_k {
        let last = dyadic.last().unwrap();
        dyadic.push(last * last);
    }
    let n = p.n();
    let mut failing = 0usize;
    let mut acc = DMatrix::<f64>::identity(n, n);
    for b in (0..dyadic.len()).rev() {
        let candidate = failing + (1 << b);
        if candidate > max_k {
            continue;
        }
        let m = &acc * &dyadic[b];
        if max_row_tv(&m, &pi) > eps {
            acc = m;
            failing = candidate;
        }
    }
    if failing == max_k {
        return Err(Error::MixingNotReached { max_k, distance: max_row_tv(&acc, &pi) });
    }
    Ok(failing + 1)
}

/// `tau_* = tau(1/4)`.
pub fn tau_star(p: &StochasticMatrix) -> Result<usize> {
    mixing_time(p, 0.25, DEFAULT_MIXING_MAX_K)
}

/// Geometric envelope `C rho^t` dominating `||pi_t - pi||_1`.
#[derive(Clone, Copy, Debug)]
pub struct GeometricEnvelope {
    pub c: f64,
    pub rho: f64,
}

impl GeometricEnvelope {
    pub fn at(&self, t: usize) -> f64 {
        self.c * self.rho.powi(t as i32)
    }
}

/// Fits the convergence envelope over `t = 0..=horizon`.
///
/// The rate is the second-largest eigenvalue modulus pulled 5% of the way
/// towards 1, so the envelope keeps holding past the fitted horizon; `C` is
/// the smallest constant that dominates the observed distances.
pub fn transient_envelope(p: &StochasticMatrix, pi0: &DistributionVector, horizon: usize) -> Result<GeometricEnvelope> {
    let pi = stationary(p)?;
    let slem = spectral_summary(p.matrix())?.second_largest_modulus();
    if slem >= 1.0 - 1e-9 {
        return Err(Error::arg("chain is not ergodic; no geometric envelope"));
    }
    let rho = (slem + 0.05 * (1.0 - slem)).max(1e-3);
    let mut x = pi0.as_slice().to_vec();
    let mut next = vec![0.0; p.n()];
    let mut c: f64 = 0.0;
    for t in 0..=horizon {
        let d = linalg::l1_distance(&x, pi.as_slice());
        if d > 1e-14 {
            c = c.max(d / rho.powi(t as i32));
        }
        p.step_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(GeometricEnvelope { c: c.max(f64::MIN_POSITIVE), rho })
}

/// Cumulative rows for inverse-CDF sampling.
pub(crate) struct RowSampler {
    cum: Vec<Vec<f64>>,
    last_support: Vec<usize>,
}

impl RowSampler {
    pub(crate) fn new(p: &StochasticMatrix) -> Self {
        let n = p.n();
        let mut cum = Vec::with_capacity(n);
        let mut last_support = Vec::with_capacity(n);
        for i in 0..n {
            let row = p.row(i);
            cum.push(cumulative(&row));
            last_support.push(row.iter().rposition(|&x| x > 0.0).unwrap_or(n - 1));
        }
        Self { cum, last_support }
    }

    pub(crate) fn next(&self, from: usize, rng: &mut SimRng) -> usize {
        draw(&self.cum[from], self.last_support[from], rng)
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw(cum: &[f64], last_support: usize, rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let j = cum.partition_point(|&c| c <= u);
    j.min(last_support)
}

pub(crate) fn sample_state(pi: &DistributionVector, rng: &mut SimRng) -> usize {
    let cum = cumulative(pi.as_slice());
    let last = pi.as_slice().iter().rposition(|&x| x > 0.0).unwrap_or(pi.len() - 1);
    draw(&cum, last, rng)
}

pub(crate) fn sample_path(
    p: &StochasticMatrix,
    pi0: &DistributionVector,
    steps: usize,
    rng: &mut SimRng,
) -> Vec<usize> {
    let sampler = RowSampler::new(p);
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = sample_state(pi0, rng);
    path.push(x);
    for _ in 0..steps {
        x = sampler.next(x, rng);
        path.push(x);
    }
    path
}

/// Mode sequence `X_0..X_N` with `X_0 ~ pi0` and `X_{t+1} ~ P(X_t, :)`.
pub fn sample_trajectory(
    p: &StochasticMatrix,
    pi0: &DistributionVector,
    steps: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if steps == 0 {
        return Err(Error::arg("trajectory needs at least one transition"));
    }
    if pi0.len() != p.n() {
        return Err(Error::arg("initial distribution length does not match the chain"));
    }
    Ok(sample_path(p, pi0, steps, &mut rng::seeded(seed)))
}

/// Expands `r` cluster rows into the `n x n` matrix whose row `i` is the
/// row of the cluster containing `i`.
pub fn build_aggregatable(partition: &Partition, cluster_rows: &DMatrix<f64>) -> Result<StochasticMatrix> {
    let (n, r) = (partition.n(), partition.r());
    if cluster_rows.nrows() != r || cluster_rows.ncols() != n {
        return Err(Error::arg(format!(
            "cluster rows must be {r}x{n}, got {}x{}",
            cluster_rows.nrows(),
            cluster_rows.ncols()
        )));
    }
    let sv = linalg::singular_values(cluster_rows)?;
    if sv[r - 1] <= 1e-9 {
        return Err(Error::Degenerate(format!("cluster rows have rank below {r} (sigma_r = {:e})", sv[r - 1])));
    }
    let dense = DMatrix::from_fn(n, n, |i, j| cluster_rows[(partition.label(i), j)]);
    StochasticMatrix::new(dense)
}

fn dirichlet_draw(gammas: &[Gamma<f64>], rng: &mut SimRng, out: &mut [f64]) -> Result<()> {
    if gammas.len() == 1 {
        out[0] = 1.0;
        return Ok(());
    }
    for _ in 0..64 {
        let mut s = 0.0;
        for (o, g) in out.iter_mut().zip(gammas) {
            *o = g.sample(rng);
            s += *o;
        }
        if s > 0.0 && s.is_finite() {
            out.iter_mut().for_each(|x| *x /= s);
            return Ok(());
        }
    }
    Err(Error::Numerical("Dirichlet draw underflowed repeatedly".into()))
}

fn gamma_family(alpha: &[f64]) -> Result<Vec<Gamma<f64>>> {
    if alpha.is_empty() {
        return Err(Error::arg("Dirichlet parameter vector is empty"));
    }
    alpha
        .iter()
        .map(|&a| {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::arg(format!("Dirichlet parameters must be positive, got {a}")));
            }
            Gamma::new(a, 1.0).map_err(|e| Error::arg(e.to_string()))
        })
        .collect()
}

/// `count` independent Dirichlet(`alpha`) rows, drawn as normalized
/// unit-scale Gamma variates.
pub fn sample_dirichlet_rows(alpha: &[f64], count: usize, seed: u64) -> Result<DMatrix<f64>> {
    let gammas = gamma_family(alpha)?;
    let mut rng = rng::seeded(seed);
    let n = alpha.len();
    let mut out = DMatrix::zeros(count, n);
    let mut buf = vec![0.0; n];
    for i in 0..count {
        dirichlet_draw(&gammas, &mut rng, &mut buf)?;
        for (j, &x) in buf.iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    Ok(out)
}

/// A chain sampled around an aggregatable one, with `delta = P - P_bar`.
#[derive(Clone, Debug)]
pub struct PerturbedChain {
    pub p: StochasticMatrix,
    pub delta: DMatrix<f64>,
    /// Spectral norm of `delta`.
    pub delta_norm: f64,
}

/// Draws each row `P(i, :)` from Dirichlet(`alpha_scale * P_bar(Omega_k, :)`)
/// where `Omega_k` is the cluster of `i`, so `E[P(i, :)] = P_bar(i, :)`.
pub fn sample_perturbed(
    p_bar: &StochasticMatrix,
    partition: &Partition,
    alpha_scale: f64,
    seed: u64,
) -> Result<PerturbedChain> {
    let n = p_bar.n();
    if partition.n() != n {
        return Err(Error::arg("partition size does not match the chain"));
    }
    if !(alpha_scale > 0.0 && alpha_scale.is_finite()) {
        return Err(Error::arg(format!("alpha scale must be positive, got {alpha_scale}")));
    }
    if p_bar.matrix().iter().any(|&x| x <= 0.0) {
        return Err(Error::arg(
            "aggregatable matrix has zero entries; smooth it before sampling Dirichlet perturbations",
        ));
    }
    let families: Vec<Vec<Gamma<f64>>> = (0..partition.r())
        .map(|k| {
            let rep = partition.members(k)[0];
            let alpha: Vec<f64> = p_bar.row(rep).iter().map(|x| x * alpha_scale).collect();
            gamma_family(&alpha)
        })
        .collect::<Result<_>>()?;
    let mut rng = rng::seeded(seed);
    let mut dense = DMatrix::zeros(n, n);
    let mut buf = vec![0.0; n];
    for i in 0..n {
        dirichlet_draw(&families[partition.label(i)], &mut rng, &mut buf)?;
        for (j, &x) in buf.iter().enumerate() {
            dense[(i, j)] = x;
        }
    }
    let delta = &dense - p_bar.matrix();
    let delta_norm = linalg::spectral_norm(&delta)?;
    Ok(PerturbedChain { p: StochasticMatrix::new(dense)?, delta, delta_norm })
}
