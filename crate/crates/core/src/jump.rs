//! Switched auto-regressive (ARX) models driven by a Markov mode sequence:
//! simulation, residual-based mode estimation and the separability check.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{self, DistributionVector, StochasticMatrix};
use crate::rng::{self, SimRng};

/// Outputs beyond this magnitude abort a simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Per-mode parameter vectors `w_k = [a_1..a_{n_a}, c_1..c_{n_c}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpModel {
    n_a: usize,
    n_c: usize,
    params: Vec<Vec<f64>>,
}

impl JumpModel {
    pub fn new(n_a: usize, n_c: usize, params: Vec<Vec<f64>>) -> Result<Self> {
        if n_a + n_c == 0 {
            return Err(Error::arg("model needs at least one lag (n_a + n_c >= 1)"));
        }
        if params.is_empty() {
            return Err(Error::arg("model needs at least one mode"));
        }
        for (k, w) in params.iter().enumerate() {
            if w.len() != n_a + n_c {
                return Err(Error::arg(format!("mode {k} has {} parameters, expected {}", w.len(), n_a + n_c)));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("mode {k} has non-finite parameters")));
            }
        }
        Ok(Self { n_a, n_c, params })
    }

    /// Modes with poles drawn uniformly on (-1, 1) and input gains drawn
    /// uniformly on (-1, 1).
    pub fn sample_random(n: usize, n_a: usize, n_c: usize, rng: &mut SimRng) -> Result<Self> {
        let unit = Uniform::new(-1.0, 1.0).expect("valid range");
        let params = (0..n)
            .map(|_| {
                let poles: Vec<f64> = (0..n_a).map(|_| unit.sample(rng)).collect();
                let mut w = poles_to_ar_coeffs(&poles)?;
                w.extend((0..n_c).map(|_| unit.sample(rng)));
                Ok(w)
            })
            .collect::<Result<_>>()?;
        Self::new(n_a, n_c, params)
    }

    pub fn n(&self) -> usize {
        self.params.len()
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn w(&self, k: usize) -> &[f64] {
        &self.params[k]
    }

    /// `max(n_a, n_c)`: the first time index whose regressor uses no
    /// pre-history.
    pub fn order(&self) -> usize {
        self.n_a.max(self.n_c)
    }

    pub fn predict(&self, k: usize, phi: &[f64]) -> f64 {
        self.params[k].iter().zip(phi).map(|(a, b)| a * b).sum()
    }
}

/// Expands `prod_i (1 - p_i z^-1)` into the AR coefficients of
/// `y_t = sum_k a_k y_{t-k}`, i.e. `a_k = (-1)^(k+1) e_k(p)`.
pub fn poles_to_ar_coeffs(poles: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = poles.iter().find(|p| !(p.abs() < 1.0)) {
        return Err(Error::arg(format!("pole {p} is outside the open unit interval")));
    }
    // e[k] holds the k-th elementary symmetric polynomial of the poles so far.
    let mut e = vec![0.0; poles.len() + 1];
    e[0] = 1.0;
    for (m, &p) in poles.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += p * e[k - 1];
        }
    }
    Ok((1..=poles.len()).map(|k| if k % 2 == 1 { e[k] } else { -e[k] }).collect())
}

/// Station positions `p_i = i` for `i = 1..=n`.
pub fn robot_positions(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

/// Closed-loop patrol robot `x_{t+1} = (1-K) x_t + K p_{s_t} + n_t`, with the
/// constant term carried by a unit input: mode `k` has `w = [1-K, K p_k]`.
/// Simulate with [`InputKind::ConstantOne`].
pub fn robot_model(positions: &[f64], gain: f64) -> Result<JumpModel> {
    if !(gain > 0.0 && gain < 2.0) {
        return Err(Error::arg(format!("gain must lie in (0, 2) for stability, got {gain}")));
    }
    let params = positions.iter().map(|p| vec![1.0 - gain, gain * p]).collect();
    JumpModel::new(1, 1, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    GaussianUnit,
    ConstantOne,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Uniform on `[-max, max)`.
    Uniform {
        max: f64,
    },
    Gaussian {
        std_dev: f64,
    },
}

impl NoiseKind {
    /// The bound used by the separability check; infinite for Gaussian noise.
    pub fn bound(&self) -> f64 {
        match *self {
            NoiseKind::Uniform { max } => max,
            NoiseKind::Gaussian { std_dev } if std_dev == 0.0 => 0.0,
            NoiseKind::Gaussian { .. } => f64::INFINITY,
        }
    }
}

enum NoiseSampler {
    Silent,
    Uniform(Uniform<f64>),
    Gaussian(Normal<f64>),
}

impl NoiseSampler {
    fn new(kind: NoiseKind) -> Result<Self> {
        match kind {
            NoiseKind::Uniform { max } if max == 0.0 => Ok(Self::Silent),
            NoiseKind::Uniform { max } if max > 0.0 && max.is_finite() => {
                Ok(Self::Uniform(Uniform::new(-max, max).map_err(|e| Error::arg(e.to_string()))?))
            }
            NoiseKind::Gaussian { std_dev } if std_dev == 0.0 => Ok(Self::Silent),
            NoiseKind::Gaussian { std_dev } if std_dev > 0.0 && std_dev.is_finite() => {
                Ok(Self::Gaussian(Normal::new(0.0, std_dev).map_err(|e| Error::arg(e.to_string()))?))
            }
            other => Err(Error::arg(format!("invalid noise specification {other:?}"))),
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Self::Silent => 0.0,
            Self::Uniform(d) => d.sample(rng),
            Self::Gaussian(d) => d.sample(rng),
        }
    }
}

/// Simulation settings beyond the model and chain.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub noise: NoiseKind,
    pub input: InputKind,
    /// `pre_y[k]` is `y_{-1-k}`; missing entries are zero.
    pub pre_y: Vec<f64>,
    /// `pre_u[k]` is `u_{-1-k}`; `None` means zeros, or ones for a constant
    /// unit input.
    pub pre_u: Option<Vec<f64>>,
}

impl SimOptions {
    pub fn new(noise: NoiseKind, input: InputKind) -> Self {
        Self { noise, input, pre_y: Vec::new(), pre_u: None }
    }
}

/// Observed outputs and inputs over `t = 0..=N`, with the ground-truth mode
/// sequence when it is known.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub modes: Option<Vec<usize>>,
    /// Noise bound used when generating; zero when unknown.
    pub noise_max: f64,
    /// `pre_y[k]` is `y_{-1-k}`.
    pub pre_y: Vec<f64>,
    /// `pre_u[k]` is `u_{-1-k}`.
    pub pre_u: Vec<f64>,
}

impl Trajectory {
    pub fn new(y: Vec<f64>, u: Vec<f64>, modes: Option<Vec<usize>>) -> Result<Self> {
        if y.len() != u.len() {
            return Err(Error::arg(format!("output and input lengths differ ({} vs {})", y.len(), u.len())));
        }
        if y.is_empty() {
            return Err(Error::arg("empty trajectory"));
        }
        if let Some(m) = &modes {
            if m.len() != y.len() {
                return Err(Error::arg("mode sequence length differs from the outputs"));
            }
        }
        Ok(Self { y, u, modes, noise_max: 0.0, pre_y: Vec::new(), pre_u: Vec::new() })
    }

    /// Number of samples, `N + 1`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Number of transitions `N`.
    pub fn horizon(&self) -> usize {
        self.y.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn lagged(series: &[f64], pre: &[f64], t: usize, lag: usize) -> f64 {
        if t >= lag {
            series[t - lag]
        } else {
            pre.get(lag - t - 1).copied().unwrap_or(0.0)
        }
    }

    /// Fills `out` with `phi_t = [y_{t-1}..y_{t-n_a}, u_{t-1}..u_{t-n_c}]`.
    pub fn phi_into(&self, t: usize, n_a: usize, n_c: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((1..=n_a).map(|i| Self::lagged(&self.y, &self.pre_y, t, i)));
        out.extend((1..=n_c).map(|j| Self::lagged(&self.u, &self.pre_u, t, j)));
    }

    pub fn phi(&self, t: usize, n_a: usize, n_c: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(n_a + n_c);
        self.phi_into(t, n_a, n_c, &mut v);
        v
    }
}

/// Samples the mode sequence from `(P, pi0)` and simulates with uniform
/// noise on `[-noise_max, noise_max)`.
pub fn simulate(
    model: &JumpModel,
    p: &StochasticMatrix,
    pi0: &DistributionVector,
    steps: usize,
    noise_max: f64,
    input: InputKind,
    seed: u64,
) -> Result<Trajectory> {
    let opts = SimOptions::new(NoiseKind::Uniform { max: noise_max }, input);
    simulate_with(model, p, pi0, steps, &opts, seed)
}

/// [`simulate`] with explicit noise, input and pre-history settings.
///
/// The mode sequence, inputs and noise use separate streams derived from
/// `seed`.
pub fn simulate_with(
    model: &JumpModel,
    p: &StochasticMatrix,
    pi0: &DistributionVector,
    steps: usize,
    opts: &SimOptions,
    seed: u64,
) -> Result<Trajectory> {
    if p.n() != model.n() {
        return Err(Error::arg(format!("chain has {} states but the model has {} modes", p.n(), model.n())));
    }
    if steps == 0 || steps < model.order() {
        return Err(Error::arg(format!("horizon {steps} is shorter than the model order {}", model.order())));
    }
    if pi0.len() != p.n() {
        return Err(Error::arg("initial distribution length does not match the chain"));
    }
    let modes = markov::sample_path(p, pi0, steps, &mut rng::seeded(rng::derive_seed(seed, 0)));
    simulate_modes(model, modes, opts, seed)
}

/// Simulates the dynamics along a given mode sequence.
pub fn simulate_modes(model: &JumpModel, modes: Vec<usize>, opts: &SimOptions, seed: u64) -> Result<Trajectory> {
    if let Some(&bad) = modes.iter().find(|&&k| k >= model.n()) {
        return Err(Error::arg(format!("mode {bad} is out of range for {} modes", model.n())));
    }
    let len = modes.len();
    let mut input_rng = rng::seeded(rng::derive_seed(seed, 1));
    let mut noise_rng = rng::seeded(rng::derive_seed(seed, 2));
    let u: Vec<f64> = match opts.input {
        InputKind::Zero => vec![0.0; len],
        InputKind::ConstantOne => vec![1.0; len],
        InputKind::GaussianUnit => {
            let d = Normal::new(0.0, 1.0).expect("unit normal");
            (0..len).map(|_| d.sample(&mut input_rng)).collect()
        }
    };
    let pre_u = match (&opts.pre_u, opts.input) {
        (Some(v), _) => v.clone(),
        (None, InputKind::ConstantOne) => vec![1.0; model.n_c()],
        (None, _) => Vec::new(),
    };
    let noise = NoiseSampler::new(opts.noise)?;
    let mut traj = Trajectory {
        y: vec![0.0; len],
        u,
        modes: None,
        noise_max: opts.noise.bound(),
        pre_y: opts.pre_y.clone(),
        pre_u,
    };
    let mut phi = Vec::with_capacity(model.n_a() + model.n_c());
    for t in 0..len {
        traj.phi_into(t, model.n_a(), model.n_c(), &mut phi);
        let y = model.predict(modes[t], &phi) + noise.sample(&mut noise_rng);
        if !(y.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Unstable { t, value: y.abs() });
        }
        traj.y[t] = y;
    }
    traj.modes = Some(modes);
    Ok(traj)
}

/// Estimated mode sequence with mistake statistics when the truth is known.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeEstimate {
    pub modes: Vec<usize>,
    /// `N'`, mismatches over `t = 0..=N`.
    pub mistake_count: Option<usize>,
    /// `eta = N' / N`.
    pub mistake_rate: Option<f64>,
}

/// Picks, at each step, the mode with the smallest residual
/// `|y_t - w_k^T phi_t|`; ties go to the lowest index.
pub fn estimate_modes(model: &JumpModel, traj: &Trajectory) -> Result<ModeEstimate> {
    if traj.is_empty() {
        return Err(Error::arg("empty trajectory"));
    }
    let mut phi = Vec::with_capacity(model.n_a() + model.n_c());
    let modes: Vec<usize> = (0..traj.len())
        .map(|t| {
            traj.phi_into(t, model.n_a(), model.n_c(), &mut phi);
            let mut best = 0;
            let mut best_res = f64::INFINITY;
            for k in 0..model.n() {
                let res = (traj.y[t] - model.predict(k, &phi)).abs();
                if res < best_res {
                    best = k;
                    best_res = res;
                }
            }
            best
        })
        .collect();
    let (mistake_count, mistake_rate) = match &traj.modes {
        Some(truth) if traj.len() >= 2 => {
            let (count, rate) = crate::estimation::perturbation_stats(truth, &modes)?;
            (Some(count), Some(rate))
        }
        _ => (None, None),
    };
    Ok(ModeEstimate { modes, mistake_count, mistake_rate })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparabilityReport {
    /// Whether every competing mode is separated at step `t`.
    pub per_step: Vec<bool>,
    pub all: bool,
}

impl SeparabilityReport {
    pub fn violations(&self) -> usize {
        self.per_step.iter().filter(|&&ok| !ok).count()
    }
}

/// Flags step `t` when `|phi_t^T (w_{X_t} - w_j)| > 2 noise_max` for every
/// `j != X_t`.
pub fn check_separability(model: &JumpModel, traj: &Trajectory, noise_max: f64) -> Result<SeparabilityReport> {
    let truth = traj.modes.as_ref().ok_or_else(|| Error::arg("separability check needs the ground-truth modes"))?;
    let mut phi = Vec::with_capacity(model.n_a() + model.n_c());
    let per_step: Vec<bool> = (0..traj.len())
        .map(|t| {
            traj.phi_into(t, model.n_a(), model.n_c(), &mut phi);
            let own = model.predict(truth[t], &phi);
            (0..model.n()).filter(|&j| j != truth[t]).all(|j| (own - model.predict(j, &phi)).abs() > 2.0 * noise_max)
        })
        .collect();
    let all = per_step.iter().all(|&ok| ok);
    Ok(SeparabilityReport { per_step, all })
}

/// Roots of `z^m - a_1 z^(m-1) - ... - a_m` via companion-matrix eigenvalues.
pub fn ar_char_roots(a: &[f64]) -> Result<Vec<nalgebra::Complex<f64>>> {
    let m = a.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut c = DMatrix::zeros(m, m);
    for (j, &aj) in a.iter().enumerate() {
        c[(0, j)] = aj;
    }
    for i in 1..m {
        c[(i, i - 1)] = 1.0;
    }
    Ok(markov::spectral_summary(&c)?.eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn one_mode(a: f64) -> JumpModel {
        JumpModel::new(1, 0, vec![vec![a]]).unwrap()
    }

    fn single_chain() -> (StochasticMatrix, DistributionVector) {
        (StochasticMatrix::identity(1), DistributionVector::uniform(1))
    }

    #[test]
    fn zero_fixed_point() {
        let (p, pi0) = single_chain();
        let traj = simulate(&one_mode(0.5), &p, &pi0, 20, 0.0, InputKind::Zero, 1).unwrap();
        assert!(traj.y.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn geometric_decay_from_pre_history() {
        let (p, pi0) = single_chain();
        let mut opts = SimOptions::new(NoiseKind::Uniform { max: 0.0 }, InputKind::Zero);
        // y_{-1} = 2 makes y_0 = 1.
        opts.pre_y = vec![2.0];
        let traj = simulate_with(&one_mode(0.5), &p, &pi0, 20, &opts, 1).unwrap();
        for (t, y) in traj.y.iter().enumerate() {
            assert!((y - 0.5f64.powi(t as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn replay_identity() {
        let model = JumpModel::new(2, 1, vec![vec![0.3, -0.2, 1.0], vec![-0.5, 0.1, -0.7]]).unwrap();
        let p = StochasticMatrix::from_row_slice(2, &[0.7, 0.3, 0.4, 0.6]).unwrap();
        let pi0 = DistributionVector::uniform(2);
        let traj = simulate(&model, &p, &pi0, 500, 0.0, InputKind::GaussianUnit, 9).unwrap();
        let modes = traj.modes.as_ref().unwrap();
        for t in 0..traj.len() {
            let ylag = |i: usize| if t >= i { traj.y[t - i] } else { 0.0 };
            let ulag = if t >= 1 { traj.u[t - 1] } else { 0.0 };
            let w = model.w(modes[t]);
            let replay = w[0] * ylag(1) + w[1] * ylag(2) + w[2] * ulag;
            assert_eq!(traj.y[t], replay);
        }
    }

    #[test]
    fn divergence_guard() {
        let (p, pi0) = single_chain();
        let model = JumpModel::new(1, 0, vec![vec![3.0]]).unwrap();
        let mut opts = SimOptions::new(NoiseKind::Uniform { max: 0.0 }, InputKind::Zero);
        opts.pre_y = vec![1.0];
        assert!(matches!(simulate_with(&model, &p, &pi0, 100, &opts, 1), Err(Error::Unstable { .. })));
    }

    #[test]
    fn residual_argmin_and_ties() {
        let model = JumpModel::new(0, 1, vec![vec![1.0], vec![-1.0]]).unwrap();
        let mut traj = Trajectory::new(vec![0.9, 0.0], vec![0.0, 0.0], None).unwrap();
        traj.pre_u = vec![1.0];
        let est = estimate_modes(&model, &traj).unwrap();
        // t = 0 sees phi = [1]: residuals 0.1 and 1.9. t = 1 sees phi = [0]: a tie.
        assert_eq!(est.modes, vec![0, 0]);
        assert_eq!(est.mistake_count, None);
    }

    #[test]
    fn separability_cases() {
        let model = JumpModel::new(0, 1, vec![vec![1.0], vec![-1.0]]).unwrap();
        let mut traj = Trajectory::new(vec![1.0], vec![0.0], Some(vec![0])).unwrap();
        traj.pre_u = vec![1.0];
        assert!(check_separability(&model, &traj, 0.4).unwrap().all);
        assert!(!check_separability(&model, &traj, 1.0).unwrap().all);

        let single = one_mode(0.5);
        let t1 = Trajectory::new(vec![0.0; 3], vec![0.0; 3], Some(vec![0; 3])).unwrap();
        assert!(check_separability(&single, &t1, 10.0).unwrap().all);
        let t2 = Trajectory::new(vec![0.0; 3], vec![0.0; 3], None).unwrap();
        assert!(check_separability(&single, &t2, 0.1).is_err());
    }

    #[test]
    fn separable_implies_exact_estimate() {
        let mut checked = 0;
        for seed in 0..100 {
            let mut rng = rng::seeded(seed);
            let model = JumpModel::sample_random(2, 2, 1, &mut rng).unwrap();
            let p = StochasticMatrix::from_row_slice(2, &[0.8, 0.2, 0.3, 0.7]).unwrap();
            let mut opts = SimOptions::new(NoiseKind::Uniform { max: 0.01 }, InputKind::GaussianUnit);
            opts.pre_u = Some(vec![1.0]);
            let traj = simulate_with(&model, &p, &DistributionVector::uniform(2), 200, &opts, seed).unwrap();
            if check_separability(&model, &traj, 0.01).unwrap().all {
                checked += 1;
                assert_eq!(estimate_modes(&model, &traj).unwrap().mistake_count, Some(0));
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn pole_expansion() {
        assert_eq!(poles_to_ar_coeffs(&[0.5, 0.0, 0.0]).unwrap(), vec![0.5, 0.0, 0.0]);
        let a = poles_to_ar_coeffs(&[0.5, -0.5, 0.0]).unwrap();
        assert!(a[0].abs() < 1e-15 && (a[1] - 0.25).abs() < 1e-15 && a[2].abs() < 1e-15);
        assert!(poles_to_ar_coeffs(&[1.0]).is_err());
    }

    #[test]
    fn pole_roundtrip() {
        let mut rng = rng::seeded(4);
        for _ in 0..50 {
            let mut poles: Vec<f64> = (0..3).map(|_| rng.random_range(-0.99..0.99)).collect();
            let a = poles_to_ar_coeffs(&poles).unwrap();
            let mut roots: Vec<f64> = ar_char_roots(&a).unwrap().iter().map(|z| z.re).collect();
            poles.sort_by(f64::total_cmp);
            roots.sort_by(f64::total_cmp);
            for (p, r) in poles.iter().zip(&roots) {
                // Clustered poles are ill-conditioned roots; 1e-5 is generous but still strict.
                assert!((p - r).abs() < 1e-5, "{poles:?} vs {roots:?}");
            }
        }
    }

    #[test]
    fn robot_parameters() {
        let m = robot_model(&robot_positions(5), 1.0).unwrap();
        assert_eq!(m.w(0)[0], 0.0);
        let m = robot_model(&robot_positions(50), 0.7).unwrap();
        assert!((m.w(2)[0] - 0.3).abs() < 1e-15 && (m.w(2)[1] - 2.1).abs() < 1e-12);
        assert!(robot_model(&[1.0], 2.0).is_err());
        assert!(robot_model(&[1.0], 0.0).is_err());
    }

    #[test]
    fn robot_converges_to_station() {
        let m = robot_model(&robot_positions(4), 0.7).unwrap();
        let opts = SimOptions::new(NoiseKind::Gaussian { std_dev: 0.0 }, InputKind::ConstantOne);
        let traj = simulate_modes(&m, vec![2; 40], &opts, 1).unwrap();
        for t in 0..40 {
            // y_{-1} = 0, so the distance to p = 3 shrinks by 0.3 per step from 3.
            let expected = 3.0 - 3.0 * 0.3f64.powi(t as i32 + 1);
            assert!((traj.y[t] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_robot_estimate_with_unit_gain() {
        let m = robot_model(&robot_positions(6), 1.0).unwrap();
        let p = StochasticMatrix::new(markov::sample_dirichlet_rows(&[1.0; 6], 6, 3).unwrap()).unwrap();
        let opts = SimOptions::new(NoiseKind::Gaussian { std_dev: 0.0 }, InputKind::ConstantOne);
        let traj = simulate_with(&m, &p, &DistributionVector::uniform(6), 1000, &opts, 5).unwrap();
        assert_eq!(estimate_modes(&m, &traj).unwrap().mistake_count, Some(0));
    }
}
