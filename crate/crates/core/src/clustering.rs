//! k-means on embedded points, membership matrices, and the
//! bijection-minimized misclustering metrics.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::Partition;
use crate::rng::{self, SimRng};

/// One-hot `n x r` cluster membership.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipMatrix {
    m: DMatrix<f64>,
}

impl MembershipMatrix {
    pub fn from_partition(p: &Partition) -> Self {
        let m = DMatrix::from_fn(p.n(), p.r(), |i, k| if p.label(i) == k { 1.0 } else { 0.0 });
        Self { m }
    }

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        for (i, row) in m.row_iter().enumerate() {
            let ones = row.iter().filter(|&&x| x == 1.0).count();
            let zeros = row.iter().filter(|&&x| x == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::arg(format!("row {i} is not one-hot")));
            }
        }
        let out = Self { m };
        out.to_partition()?;
        Ok(out)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn to_partition(&self) -> Result<Partition> {
        let assignment = self.m.row_iter().map(|row| row.iter().position(|&x| x == 1.0).unwrap_or(0)).collect();
        Partition::new(assignment, self.m.ncols())
    }

    pub fn column_sums(&self) -> Vec<usize> {
        self.m.column_iter().map(|c| c.sum() as usize).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 50, max_iters: 300, rel_tol: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub partition: Partition,
    /// `r x d`, row `k` the mean of the points in cluster `k`.
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub cost: f64,
    pub restarts_used: usize,
    pub best_restart: usize,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, k: usize) -> f64 {
    (0..points.ncols())
        .map(|d| {
            let x = points[(i, d)] - centroids[(k, d)];
            x * x
        })
        .sum()
}

fn means(points: &DMatrix<f64>, labels: &[usize], r: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(r, points.ncols());
    let mut sizes = vec![0usize; r];
    for (i, &k) in labels.iter().enumerate() {
        sizes[k] += 1;
        for d in 0..points.ncols() {
            c[(k, d)] += points[(i, d)];
        }
    }
    for (k, &s) in sizes.iter().enumerate() {
        if s > 0 {
            c.row_mut(k).unscale_mut(s as f64);
        }
    }
    c
}

/// Sum of squared distances to the cluster means.
pub fn partition_cost(points: &DMatrix<f64>, labels: &[usize], r: usize) -> f64 {
    let c = means(points, labels, r);
    labels.iter().enumerate().map(|(i, &k)| sq_dist(points, i, &c, k)).sum()
}

/// Greedy D^2 seeding: each new centre is the best of `2 + ln r` candidates
/// drawn proportionally to the squared distance to the chosen centres.
fn seed_centroids(points: &DMatrix<f64>, r: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let n = points.nrows();
    let candidates = 2 + (r as f64).ln().floor() as usize;
    let mut chosen = vec![rng.random_range(0..n)];
    let dist_to = |c: usize, i: usize| -> f64 {
        (0..points.ncols())
            .map(|d| {
                let x = points[(i, d)] - points[(c, d)];
                x * x
            })
            .sum()
    };
    let mut d2: Vec<f64> = (0..n).map(|i| dist_to(chosen[0], i)).collect();
    while chosen.len() < r {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        } else {
            let mut best = (f64::INFINITY, 0usize);
            for _ in 0..candidates {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    acc += w;
                    if acc > target && w > 0.0 {
                        pick = i;
                        break;
                    }
                }
                if d2[pick] == 0.0 {
                    pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
                }
                let potential: f64 = (0..n).map(|i| d2[i].min(dist_to(pick, i))).sum();
                if potential < best.0 {
                    best = (potential, pick);
                }
            }
            best.1
        };
        chosen.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(dist_to(next, i));
        }
    }
    DMatrix::from_fn(r, points.ncols(), |k, d| points[(chosen[k], d)])
}

/// Moves, for each empty cluster, the point farthest from its own centre
/// (among clusters with at least two members) into the empty cluster.
fn fill_empty(points: &DMatrix<f64>, labels: &mut [usize], centroids: &DMatrix<f64>, r: usize) {
    loop {
        let mut sizes = vec![0usize; r];
        labels.iter().for_each(|&k| sizes[k] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let far = (0..labels.len())
            .filter(|&i| sizes[labels[i]] >= 2)
            .max_by(|&a, &b| {
                sq_dist(points, a, centroids, labels[a])
                    .partial_cmp(&sq_dist(points, b, centroids, labels[b]))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("n >= r leaves a cluster with two members");
        labels[far] = empty;
    }
}

struct Run {
    labels: Vec<usize>,
    centroids: DMatrix<f64>,
    cost: f64,
}

fn lloyd(points: &DMatrix<f64>, r: usize, cfg: &KMeansConfig, seed: u64) -> Run {
    let n = points.nrows();
    let mut rng = rng::seeded(seed);
    let mut centroids = seed_centroids(points, r, &mut rng);
    let mut labels = vec![0usize; n];
    let mut cost = f64::INFINITY;
    for _ in 0..cfg.max_iters.max(1) {
        let mut next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = (f64::INFINITY, 0);
                for k in 0..r {
                    let d = sq_dist(points, i, &centroids, k);
                    if d < best.0 {
                        best = (d, k);
                    }
                }
                best.1
            })
            .collect();
        fill_empty(points, &mut next, &centroids, r);
        let next_centroids = means(points, &next, r);
        let next_cost: f64 = (0..n).map(|i| sq_dist(points, i, &next_centroids, next[i])).sum();
        debug_assert!(
            !cost.is_finite() || next_cost <= cost * (1.0 + 1e-12) + 1e-15,
            "Lloyd cost increased from {cost} to {next_cost}"
        );
        let unchanged = next == labels;
        let improvement = cost - next_cost;
        labels = next;
        centroids = next_centroids;
        let prev = cost;
        cost = next_cost;
        if unchanged || (prev.is_finite() && improvement <= cfg.rel_tol * prev) {
            break;
        }
    }
    Run { labels, centroids, cost }
}

/// Best of `cfg.restarts` seeded Lloyd runs; restarts run in parallel and
/// the winner is the lowest cost, ties going to the earliest restart.
pub fn kmeans(points: &DMatrix<f64>, r: usize, cfg: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if r == 0 || r > n {
        return Err(Error::arg(format!("cannot form {r} clusters from {n} points")));
    }
    if cfg.restarts == 0 {
        return Err(Error::arg("k-means needs at least one restart"));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("k-means input has non-finite coordinates".into()));
    }
    let runs: Vec<Run> =
        (0..cfg.restarts).into_par_iter().map(|i| lloyd(points, r, cfg, rng::derive_seed(seed, i as u64))).collect();
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.partial_cmp(&b.1.cost).unwrap().then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    Ok(KMeansResult {
        partition: Partition::new(best.labels, r)?,
        centroids: best.centroids,
        cost: best.cost,
        restarts_used: cfg.restarts,
        best_restart,
    })
}

/// Minimum-cost perfect matching on a square cost matrix
/// (shortest augmenting paths with potentials). Returns `assign[row] = col`.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// `overlap[(j, l)] = |Omega_j ∩ Omega_hat_l|`.
fn overlap(truth: &Partition, estimate: &Partition) -> Result<DMatrix<f64>> {
    if truth.n() != estimate.n() || truth.r() != estimate.r() {
        return Err(Error::arg(format!(
            "partitions differ in shape: (n={}, r={}) vs (n={}, r={})",
            truth.n(),
            truth.r(),
            estimate.n(),
            estimate.r()
        )));
    }
    let r = truth.r();
    let mut m = DMatrix::zeros(r, r);
    for i in 0..truth.n() {
        m[(truth.label(i), estimate.label(i))] += 1.0;
    }
    Ok(m)
}

fn matched_cost(cost: &DMatrix<f64>) -> f64 {
    hungarian(cost).iter().enumerate().map(|(j, &l)| cost[(j, l)]).sum()
}

/// `min_k sum_j |Omega_j \ Omega_hat_k(j)| / |Omega_j|`, in `[0, r]`.
pub fn misclustering_rate(truth: &Partition, estimate: &Partition) -> Result<f64> {
    let ov = overlap(truth, estimate)?;
    let sizes = truth.sizes();
    let cost = DMatrix::from_fn(ov.nrows(), ov.ncols(), |j, l| (sizes[j] as f64 - ov[(j, l)]) / sizes[j] as f64);
    Ok(matched_cost(&cost).max(0.0))
}

/// `n^-1 min_k sum_j |Omega_j \ Omega_hat_k(j)|`, in `[0, 1]`.
pub fn clustering_error(truth: &Partition, estimate: &Partition) -> Result<f64> {
    let ov = overlap(truth, estimate)?;
    let sizes = truth.sizes();
    let cost = DMatrix::from_fn(ov.nrows(), ov.ncols(), |j, l| sizes[j] as f64 - ov[(j, l)]);
    Ok(matched_cost(&cost).max(0.0) / truth.n() as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EpsilonCertificate {
    /// `cost / reference - 1`.
    pub epsilon: f64,
    pub reference_cost: f64,
    /// True when the reference is the exact optimum.
    pub exact: bool,
}

/// Largest instance solved by exhaustive enumeration.
pub const EXACT_ENUMERATION_MAX_N: usize = 12;
const CERTIFICATE_RESTARTS: usize = 10_000;

/// Exact optimum over all partitions into exactly `r` nonempty clusters,
/// by enumerating restricted growth strings.
pub fn exact_kmeans_cost(points: &DMatrix<f64>, r: usize) -> Result<f64> {
    let n = points.nrows();
    if r == 0 || r > n {
        return Err(Error::arg(format!("cannot form {r} clusters from {n} points")));
    }
    if n > EXACT_ENUMERATION_MAX_N {
        return Err(Error::arg(format!("exhaustive enumeration is limited to n <= {EXACT_ENUMERATION_MAX_N}")));
    }
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    enumerate(points, r, &mut labels, 1, 1, &mut best);
    Ok(best)
}

fn enumerate(points: &DMatrix<f64>, r: usize, labels: &mut [usize], pos: usize, used: usize, best: &mut f64) {
    let n = labels.len();
    if pos == n {
        if used == r {
            *best = best.min(partition_cost(points, labels, r));
        }
        return;
    }
    // Not enough positions left to open the remaining clusters.
    if r - used > n - pos {
        return;
    }
    for k in 0..=used.min(r - 1) {
        labels[pos] = k;
        let next_used = if k == used { used + 1 } else { used };
        enumerate(points, r, labels, pos + 1, next_used, best);
    }
}

/// How far `result` is from optimal: exact for `n <= 12`, otherwise an
/// upper bound relative to the best of 10^4 extra restarts.
pub fn kmeans_epsilon_certificate(
    points: &DMatrix<f64>,
    result: &KMeansResult,
    r: usize,
    seed: u64,
) -> Result<EpsilonCertificate> {
    let (reference, exact) = if points.nrows() <= EXACT_ENUMERATION_MAX_N {
        (exact_kmeans_cost(points, r)?, true)
    } else {
        let cfg = KMeansConfig { restarts: CERTIFICATE_RESTARTS, ..KMeansConfig::default() };
        (kmeans(points, r, &cfg, seed)?.cost.min(result.cost), false)
    };
    let epsilon = if reference > 0.0 {
        (result.cost / reference - 1.0).max(0.0)
    } else if result.cost <= 1e-24 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EpsilonCertificate { epsilon, reference_cost: reference, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(xs.len(), 1, xs)
    }

    fn permutations(r: usize) -> Vec<Vec<usize>> {
        if r == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(r - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, r - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute(truth: &Partition, est: &Partition, normalized: bool) -> f64 {
        let r = truth.r();
        let sizes = truth.sizes();
        permutations(r)
            .iter()
            .map(|perm| {
                (0..r)
                    .map(|j| {
                        let missing =
                            (0..truth.n()).filter(|&i| truth.label(i) == j && est.label(i) != perm[j]).count();
                        if normalized {
                            missing as f64 / sizes[j] as f64
                        } else {
                            missing as f64
                        }
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn membership_roundtrip() {
        let p = Partition::new(vec![1, 0, 1, 2], 3).unwrap();
        let m = MembershipMatrix::from_partition(&p);
        assert_eq!(m.to_partition().unwrap(), p);
        assert_eq!(m.column_sums(), p.sizes());
        assert!(MembershipMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).is_err());
    }

    #[test]
    fn kmeans_distinct_rows() {
        let pts = DMatrix::from_row_slice(6, 2, &[0.0, 1.0, 3.0, 3.0, 0.0, 1.0, 3.0, 3.0, -2.0, 5.0, -2.0, 5.0]);
        let res = kmeans(&pts, 3, &KMeansConfig::default(), 1).unwrap();
        assert!(res.cost < 1e-24);
        let expect = Partition::new(vec![0, 1, 0, 1, 2, 2], 3).unwrap();
        assert!(res.partition.same_grouping(&expect));
    }

    #[test]
    fn kmeans_line_example() {
        let pts = line(&[0.0, 0.1, 10.0, 10.1]);
        let res = kmeans(&pts, 2, &KMeansConfig::default(), 3).unwrap();
        assert!((res.cost - 0.01).abs() < 1e-12);
        assert!(res.partition.same_grouping(&Partition::new(vec![0, 0, 1, 1], 2).unwrap()));
        assert!((exact_kmeans_cost(&pts, 2).unwrap() - 0.01).abs() < 1e-12);
        assert!(kmeans(&pts, 5, &KMeansConfig::default(), 3).is_err());
    }

    #[test]
    fn kmeans_beats_random_assignments() {
        let mut g = rng::seeded(8);
        let pts = DMatrix::from_fn(30, 3, |_, _| g.random_range(-1.0..1.0));
        let res = kmeans(&pts, 4, &KMeansConfig::default(), 2).unwrap();
        for _ in 0..1000 {
            let labels: Vec<usize> = (0..30).map(|_| g.random_range(0..4)).collect();
            assert!(res.cost <= partition_cost(&pts, &labels, 4) + 1e-12);
        }
        let c = partition_cost(&pts, res.partition.assignment(), 4);
        assert!((c - res.cost).abs() < 1e-9);
    }

    #[test]
    fn kmeans_is_deterministic() {
        let mut g = rng::seeded(1);
        let pts = DMatrix::from_fn(20, 2, |_, _| g.random_range(-1.0..1.0));
        let a = kmeans(&pts, 3, &KMeansConfig::default(), 5).unwrap();
        let b = kmeans(&pts, 3, &KMeansConfig::default(), 5).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.best_restart, b.best_restart);
    }

    #[test]
    fn duplicate_points_never_leave_empty_clusters() {
        let pts = line(&[1.0, 1.0, 1.0, 1.0, 2.0]);
        let res = kmeans(&pts, 3, &KMeansConfig::default(), 4).unwrap();
        assert_eq!(res.partition.r(), 3);
        assert!(res.cost < 1e-24);
    }

    #[test]
    fn metric_examples() {
        let truth = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let est = Partition::new(vec![0, 0, 0, 1], 2).unwrap();
        assert_eq!(misclustering_rate(&truth, &truth).unwrap(), 0.0);
        let relabeled = Partition::new(vec![1, 1, 0, 0], 2).unwrap();
        assert_eq!(misclustering_rate(&truth, &relabeled).unwrap(), 0.0);
        assert!((misclustering_rate(&truth, &est).unwrap() - 0.5).abs() < 1e-15);
        assert!((clustering_error(&truth, &est).unwrap() - 0.25).abs() < 1e-15);
        assert!(misclustering_rate(&truth, &Partition::single(4)).is_err());
    }

    #[test]
    fn epsilon_certificate_cases() {
        let pts = line(&[0.0, 0.0, 5.0, 5.0]);
        let res = kmeans(&pts, 2, &KMeansConfig::default(), 1).unwrap();
        let cert = kmeans_epsilon_certificate(&pts, &res, 2, 1).unwrap();
        assert_eq!(cert.epsilon, 0.0);
        assert!(cert.exact);

        let mut g = rng::seeded(5);
        let pts = DMatrix::from_fn(6, 2, |_, _| g.random_range(-1.0..1.0));
        // All 31 two-block partitions of six points.
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 5) {
            let labels: Vec<usize> = (0..6).map(|i| if i < 5 && mask & (1 << i) != 0 { 1 } else { 0 }).collect();
            best = best.min(partition_cost(&pts, &labels, 2));
        }
        assert!((exact_kmeans_cost(&pts, 2).unwrap() - best).abs() < 1e-12);
        let res = kmeans(&pts, 2, &KMeansConfig::default(), 1).unwrap();
        let cert = kmeans_epsilon_certificate(&pts, &res, 2, 1).unwrap();
        assert!(cert.epsilon >= 0.0);
        assert!((cert.epsilon - (res.cost / best - 1.0).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn hungarian_small() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
        assert_eq!(total, 5.0);
    }

    fn partition_strategy() -> impl Strategy<Value = (Partition, Partition)> {
        (1usize..=6).prop_flat_map(|r| {
            (r..=r + 8).prop_flat_map(move |n| {
                (prop::collection::vec(0..r, n), prop::collection::vec(0..r, n)).prop_map(move |(mut a, mut b)| {
                    for k in 0..r {
                        a[k] = k;
                        b[n - 1 - k] = k;
                    }
                    (Partition::new(a, r).unwrap(), Partition::new(b, r).unwrap())
                })
            })
        })
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force((truth, est) in partition_strategy()) {
            let mr = misclustering_rate(&truth, &est).unwrap();
            let ce = clustering_error(&truth, &est).unwrap();
            prop_assert!((mr - brute(&truth, &est, true)).abs() < 1e-12);
            prop_assert!((ce - brute(&truth, &est, false) / truth.n() as f64).abs() < 1e-12);
            prop_assert!(mr >= 0.0 && mr <= truth.r() as f64);
            prop_assert!((0.0..=1.0).contains(&ce));
            prop_assert_eq!(mr == 0.0, truth.same_grouping(&est));
        }

        #[test]
        fn metrics_ignore_labels((truth, est) in partition_strategy(), shift in 0usize..6) {
            let r = est.r();
            let relabeled = Partition::new(est.assignment().iter().map(|k| (k + shift) % r).collect(), r).unwrap();
            prop_assert!((misclustering_rate(&truth, &est).unwrap() - misclustering_rate(&truth, &relabeled).unwrap()).abs() < 1e-12);
            prop_assert!((clustering_error(&relabeled, &truth).unwrap() - clustering_error(&est, &truth).unwrap()).abs() < 1e-12);
        }
    }
}
