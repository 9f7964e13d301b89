//! Transition counting and the empirical Markov matrix.

use std::ops::{Add, AddAssign};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::markov::StochasticMatrix;

/// Pair counts `#{t : X_{t-1} = i, X_t = j}` and source visits over
/// `t = 1..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionCounts {
    n: usize,
    /// Row-major `n x n`.
    pairs: Vec<u64>,
    visits: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(n: usize) -> Self {
        Self { n, pairs: vec![0; n * n], visits: vec![0; n] }
    }

    /// Builds counts from a row-major pair table; visits are the row sums.
    pub fn from_pairs(n: usize, pairs: Vec<u64>) -> Result<Self> {
        if n == 0 || pairs.len() != n * n {
            return Err(Error::arg(format!("pair table needs {} entries for n = {n}, got {}", n * n, pairs.len())));
        }
        let visits = pairs.chunks(n).map(|row| row.iter().sum()).collect();
        Ok(Self { n, pairs, visits })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pair(&self, i: usize, j: usize) -> u64 {
        self.pairs[i * self.n + j]
    }

    pub fn visit(&self, i: usize) -> u64 {
        self.visits[i]
    }

    pub fn pairs(&self) -> &[u64] {
        &self.pairs
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Number of counted transitions `N`.
    pub fn total(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn record(&mut self, i: usize, j: usize) {
        self.pairs[i * self.n + j] += 1;
        self.visits[i] += 1;
    }

    pub fn pair_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.pair(i, j) as f64)
    }
}

impl AddAssign<&TransitionCounts> for TransitionCounts {
    fn add_assign(&mut self, rhs: &TransitionCounts) {
        assert_eq!(self.n, rhs.n, "cannot merge counts over different state spaces");
        self.pairs.iter_mut().zip(&rhs.pairs).for_each(|(a, b)| *a += b);
        self.visits.iter_mut().zip(&rhs.visits).for_each(|(a, b)| *a += b);
    }
}

impl Add for TransitionCounts {
    type Output = TransitionCounts;
    fn add(mut self, rhs: TransitionCounts) -> TransitionCounts {
        self += &rhs;
        self
    }
}

pub fn count_transitions(modes: &[usize], n: usize) -> Result<TransitionCounts> {
    if modes.len() < 2 {
        return Err(Error::arg("need at least two modes to count a transition"));
    }
    if let Some(&bad) = modes.iter().find(|&&k| k >= n) {
        return Err(Error::arg(format!("mode {bad} is out of range for n = {n}")));
    }
    let mut c = TransitionCounts::zeros(n);
    for w in modes.windows(2) {
        c.record(w[0], w[1]);
    }
    Ok(c)
}

/// `P_hat(i, j) = pairs(i, j) / visits(i)`, or `1/n` for unvisited sources.
pub fn empirical_matrix(counts: &TransitionCounts) -> StochasticMatrix {
    let n = counts.n();
    let m = DMatrix::from_fn(n, n, |i, j| match counts.visit(i) {
        0 => 1.0 / n as f64,
        v => counts.pair(i, j) as f64 / v as f64,
    });
    StochasticMatrix::new(m).expect("count ratios form stochastic rows")
}

/// `F_hat = pairs / N` and `pi_hat = visits / N`.
pub fn empirical_frequency(counts: &TransitionCounts) -> (DMatrix<f64>, Vec<f64>) {
    let total = counts.total().max(1) as f64;
    let f = counts.pair_matrix() / total;
    let pi = counts.visits().iter().map(|&v| v as f64 / total).collect();
    (f, pi)
}

/// `N'` (mismatches over `t = 0..=N`) and `eta = N' / N`.
pub fn perturbation_stats(truth: &[usize], estimate: &[usize]) -> Result<(usize, f64)> {
    if truth.len() != estimate.len() {
        return Err(Error::arg(format!("sequence lengths differ ({} vs {})", truth.len(), estimate.len())));
    }
    if truth.len() < 2 {
        return Err(Error::arg("need at least one transition to form a mistake rate"));
    }
    let mistakes = truth.iter().zip(estimate).filter(|(a, b)| a != b).count();
    Ok((mistakes, mistakes as f64 / (truth.len() - 1) as f64))
}
