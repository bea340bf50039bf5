//! Cardinality laws and the combinatorial kernels shared by the filters.

pub mod esf;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, SignedLog};

/// Relative tolerance under which `variance ≈ mean` selects the Poisson branch.
pub const POISSON_EPS: f64 = 1e-9;

/// Lost probability mass above which a truncation is flagged.
pub const TRUNCATION_WARN: f64 = 1e-6;

/// Rising factorial `ζ(ζ+1)···(ζ+n−1)`, with `(ζ)_0 = 1`.
pub fn pochhammer(zeta: f64, n: usize) -> f64 {
    (0..n).map(|i| zeta + i as f64).product()
}

/// Rising factorial in signed log form. Direct product for short runs,
/// log-gamma differences for long runs with a positive base.
pub fn ln_pochhammer(zeta: f64, n: usize) -> SignedLog {
    if n > 30 && zeta > 0.0 {
        return SignedLog::from_ln(ln_gamma(zeta + n as f64) - ln_gamma(zeta));
    }
    let mut acc = SignedLog::ONE;
    for i in 0..n {
        acc = acc * SignedLog::from_f64(zeta + i as f64);
        if acc.is_zero() {
            break;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanjerBranch {
    NegativeBinomial,
    Poisson,
    Binomial,
}

/// Panjer parameters recovered from a mean and variance.
///
/// On the Poisson branch `alpha` and `beta` are `+inf` and only `mean` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanjerParams {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
    pub branch: PanjerBranch,
}

impl PanjerParams {
    pub fn to_model(&self) -> CardinalityModel {
        match self.branch {
            PanjerBranch::Poisson => CardinalityModel::Poisson { rate: self.mean },
            _ => CardinalityModel::Panjer { alpha: self.alpha, beta: self.beta },
        }
    }
}

pub fn panjer_from_moments(mean: f64, variance: f64) -> Result<PanjerParams> {
    if !(mean >= 0.0) || !(variance >= 0.0) || !mean.is_finite() || !variance.is_finite() {
        return Err(Error::DegenerateParameter(format!("mean {mean}, variance {variance}")));
    }
    let excess = variance - mean;
    if excess.abs() <= POISSON_EPS * mean.max(1.0) {
        return Ok(PanjerParams { alpha: f64::INFINITY, beta: f64::INFINITY, mean, variance, branch: PanjerBranch::Poisson });
    }
    if mean == 0.0 {
        return Err(Error::DegenerateParameter(format!("zero mean with variance {variance}")));
    }
    let branch = if excess > 0.0 { PanjerBranch::NegativeBinomial } else { PanjerBranch::Binomial };
    Ok(PanjerParams { alpha: mean * mean / excess, beta: mean / excess, mean, variance, branch })
}

/// Probability table on `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityDist {
    rho: Vec<f64>,
}

impl CardinalityDist {
    /// Normalizes `weights` into a distribution.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::DegenerateParameter("cardinality weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateParameter("cardinality weights sum to zero".into()));
        }
        Ok(CardinalityDist { rho: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn delta(n: usize, n_max: usize) -> Self {
        let mut rho = vec![0.0; n_max.max(n) + 1];
        rho[n] = 1.0;
        CardinalityDist { rho }
    }

    pub fn n_max(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.rho
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.rho.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.rho.iter().enumerate().map(|(n, p)| (n as f64 - mean).powi(2) * p).sum()
    }

    /// Map estimate (smallest index on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (n, &p) in self.rho.iter().enumerate() {
            if p > self.rho[best] {
                best = n;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CardinalityModel {
    Poisson { rate: f64 },
    /// Negative binomial for `alpha, beta > 0`, binomial for `alpha, beta < 0`.
    Panjer { alpha: f64, beta: f64 },
    Discrete(CardinalityDist),
}

impl CardinalityModel {
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        panjer_from_moments(mean, variance).map(|p| p.to_model())
    }

    pub fn mean(&self) -> f64 {
        match self {
            CardinalityModel::Poisson { rate } => *rate,
            CardinalityModel::Panjer { alpha, beta } => alpha / beta,
            CardinalityModel::Discrete(d) => d.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            CardinalityModel::Poisson { rate } => *rate,
            CardinalityModel::Panjer { alpha, beta } => alpha / beta * (1.0 + 1.0 / beta),
            CardinalityModel::Discrete(d) => d.variance(),
        }
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, CardinalityModel::Poisson { .. })
    }

    /// `n! · pmf(n)` in signed log form; the clutter factor of the likelihoods.
    pub fn ln_factorial_moment_term(&self, n: usize) -> SignedLog {
        match self {
            CardinalityModel::Poisson { rate } => {
                if *rate == 0.0 {
                    return if n == 0 { SignedLog::ONE } else { SignedLog::ZERO };
                }
                SignedLog::from_ln(n as f64 * rate.ln() - rate)
            }
            CardinalityModel::Panjer { alpha, beta } => {
                let (alpha, beta) = (*alpha, *beta);
                if beta == -1.0 {
                    // binomial with success probability one
                    let target = -alpha;
                    if (target - n as f64).abs() < 1e-12 {
                        return SignedLog::from_ln(ln_factorial(n));
                    }
                    return SignedLog::ZERO;
                }
                let ratio = beta / (beta + 1.0);
                if !(ratio > 0.0) {
                    // -1 < beta < 0 is not a valid Panjer law
                    return SignedLog::ZERO;
                }
                let base_sign = if beta + 1.0 < 0.0 && n % 2 == 1 { -1 } else { 1 };
                let base = SignedLog { sign: base_sign, ln_abs: -(n as f64) * (beta + 1.0).abs().ln() };
                ln_pochhammer(alpha, n) * base * SignedLog::from_ln(alpha * ratio.ln())
            }
            CardinalityModel::Discrete(d) => {
                let p = d.pmf(n);
                if p == 0.0 {
                    SignedLog::ZERO
                } else {
                    SignedLog::from_ln(p.ln() + ln_factorial(n))
                }
            }
        }
    }

    pub fn pmf(&self, n: usize) -> f64 {
        cardinality_pmf(self, n)
    }
}

/// Probability of exactly `n` points.
pub fn cardinality_pmf(model: &CardinalityModel, n: usize) -> f64 {
    match model {
        CardinalityModel::Discrete(d) => d.pmf(n),
        CardinalityModel::Poisson { rate } if *rate == 0.0 => {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        }
        CardinalityModel::Poisson { rate } => (n as f64 * rate.ln() - rate - ln_factorial(n)).exp(),
        CardinalityModel::Panjer { .. } => {
            let t = model.ln_factorial_moment_term(n);
            if t.is_zero() {
                0.0
            } else {
                t.sign as f64 * (t.ln_abs - ln_factorial(n)).exp()
            }
        }
    }
}

pub fn sample_cardinality<R: Rng + ?Sized>(model: &CardinalityModel, rng: &mut R) -> usize {
    match model {
        CardinalityModel::Poisson { rate } => {
            if *rate <= 0.0 {
                0
            } else {
                Poisson::new(*rate).expect("finite positive rate").sample(rng) as usize
            }
        }
        CardinalityModel::Panjer { alpha, beta } if *alpha > 0.0 => {
            // Gamma-Poisson mixture
            let lambda = Gamma::new(*alpha, 1.0 / beta).expect("positive shape and scale").sample(rng);
            if lambda <= 0.0 {
                0
            } else {
                Poisson::new(lambda).expect("positive rate").sample(rng) as usize
            }
        }
        _ => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let cap = 100_000;
            for n in 0..cap {
                acc += cardinality_pmf(model, n).max(0.0);
                if u < acc {
                    return n;
                }
            }
            cap
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub dist: CardinalityDist,
    pub lost_mass: f64,
    pub warning: bool,
}

/// Tabulates a model on `0..=n_max` and renormalizes.
pub fn truncate_to_dist(model: &CardinalityModel, n_max: usize) -> Result<Truncation> {
    if let CardinalityModel::Discrete(d) = model {
        if d.n_max() <= n_max {
            let mut rho = d.probs().to_vec();
            rho.resize(n_max + 1, 0.0);
            return Ok(Truncation { dist: CardinalityDist { rho }, lost_mass: 0.0, warning: false });
        }
    }
    let weights: Vec<f64> = (0..=n_max).map(|n| cardinality_pmf(model, n).max(0.0)).collect();
    let kept: f64 = weights.iter().sum();
    let lost_mass = (1.0 - kept).max(0.0);
    let dist = CardinalityDist::new(weights)?;
    Ok(Truncation { dist, lost_mass, warning: lost_mass > TRUNCATION_WARN })
}

/// Axis-aligned rectangle in measurement space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Window {
    pub fn centered(width: f64, height: f64) -> Self {
        Window { min: [-width / 2.0, -height / 2.0], max: [width / 2.0, height / 2.0] }
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Clutter process: a cardinality law with a uniform spatial density.
///
/// The window fixes the density level `1/area` and is where clutter is
/// generated. Filters evaluate the density as that constant for every
/// measurement, including target detections that fall outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterModel {
    pub cardinality: CardinalityModel,
    pub window: Window,
}

impl ClutterModel {
    pub fn poisson(rate: f64, window: Window) -> Self {
        ClutterModel { cardinality: CardinalityModel::Poisson { rate }, window }
    }

    pub fn rate(&self) -> f64 {
        self.cardinality.mean()
    }

    pub fn spatial_density(&self) -> f64 {
        1.0 / self.window.area()
    }

    /// Clutter intensity `μ_c(z)`.
    pub fn intensity(&self) -> f64 {
        self.rate() * self.spatial_density()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(3.7, 0), 1.0);
        assert_eq!(pochhammer(-5.0, 0), 1.0);
        assert_eq!(pochhammer(2.0, 3), 24.0);
        assert_eq!(pochhammer(-1.0, 2), 0.0);
        assert!(ln_pochhammer(-1.0, 2).is_zero());
    }

    #[test]
    fn ln_pochhammer_branches_agree() {
        for &zeta in &[0.3, 2.0, 17.5] {
            for n in [5usize, 31, 60] {
                let direct: f64 = (0..n).map(|i| (zeta + i as f64).ln()).sum();
                let v = ln_pochhammer(zeta, n);
                assert_eq!(v.sign, 1);
                assert!((v.ln_abs - direct).abs() < 1e-10 * direct.abs().max(1.0), "zeta={zeta} n={n}");
            }
        }
        let neg = ln_pochhammer(-2.5, 3);
        assert_eq!(neg.sign, -1);
        assert!((neg.to_f64() - (-2.5 * -1.5 * -0.5)).abs() < 1e-14);
    }

    #[test]
    fn panjer_from_moments_examples() {
        let p = panjer_from_moments(2.0, 4.0).unwrap();
        assert_eq!((p.alpha, p.beta, p.branch), (2.0, 1.0, PanjerBranch::NegativeBinomial));
        let p = panjer_from_moments(2.0, 20.0).unwrap();
        assert!((p.alpha - 2.0 / 9.0).abs() < 1e-15 && (p.beta - 1.0 / 9.0).abs() < 1e-15);
        let p = panjer_from_moments(3.0, 3.0).unwrap();
        assert_eq!(p.branch, PanjerBranch::Poisson);
        assert_eq!(p.to_model(), CardinalityModel::Poisson { rate: 3.0 });
        let p = panjer_from_moments(4.0, 2.0).unwrap();
        assert_eq!(p.branch, PanjerBranch::Binomial);
        assert_eq!((p.alpha, p.beta), (-8.0, -2.0));
        assert!(matches!(panjer_from_moments(0.0, 1.0), Err(Error::DegenerateParameter(_))));
        assert_eq!(panjer_from_moments(0.0, 0.0).unwrap().branch, PanjerBranch::Poisson);
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(cardinality_pmf(&CardinalityModel::Poisson { rate: 0.0 }, 0), 1.0);
        let geo = CardinalityModel::Panjer { alpha: 1.0, beta: 1.0 };
        let mut total = 0.0;
        let mut mean = 0.0;
        for n in 0..200 {
            let p = cardinality_pmf(&geo, n);
            assert!((p - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);
            total += p;
            mean += n as f64 * p;
        }
        assert!((total - 1.0).abs() < 1e-14 && (mean - 1.0).abs() < 1e-12);
        let d = CardinalityModel::Discrete(CardinalityDist::new(vec![0.3, 0.7]).unwrap());
        assert_eq!(cardinality_pmf(&d, 2), 0.0);
    }

    #[test]
    fn binomial_branch_pmf_is_binomial() {
        // n = 8, p = 0.5
        let m = CardinalityModel::Panjer { alpha: -8.0, beta: -2.0 };
        let binom = [1.0, 8.0, 28.0, 56.0, 70.0, 56.0, 28.0, 8.0, 1.0];
        for (n, c) in binom.iter().enumerate() {
            assert!((cardinality_pmf(&m, n) - c / 256.0).abs() < 1e-14);
        }
        assert_eq!(cardinality_pmf(&m, 9), 0.0);
    }

    #[test]
    fn poisson_limit_of_panjer() {
        let panjer = CardinalityModel::Panjer { alpha: 1e6, beta: 1e6 };
        let poisson = CardinalityModel::Poisson { rate: 1.0 };
        for n in 0..=50 {
            assert!((cardinality_pmf(&panjer, n) - cardinality_pmf(&poisson, n)).abs() < 1e-4);
        }
    }

    #[test]
    fn panjer_moment_round_trip() {
        for &(mean, var) in &[(2.0, 20.0), (5.0, 6.5), (0.7, 3.0)] {
            let model = CardinalityModel::from_moments(mean, var).unwrap();
            let (mut m1, mut m2) = (0.0, 0.0);
            for n in 0..=10_000 {
                let p = cardinality_pmf(&model, n);
                m1 += n as f64 * p;
                m2 += (n as f64).powi(2) * p;
            }
            assert!((m1 - mean).abs() < 1e-6 * mean);
            assert!((m2 - m1 * m1 - var).abs() < 1e-6 * var);
        }
    }

    #[test]
    fn truncation() {
        let t = truncate_to_dist(&CardinalityModel::Poisson { rate: 10.0 }, 64).unwrap();
        // tail sum of Poisson(10) above 64
        let tail: f64 = (65..400).map(|n| cardinality_pmf(&CardinalityModel::Poisson { rate: 10.0 }, n)).sum();
        assert!(tail < 1e-20);
        assert!(t.lost_mass < 1e-13 && !t.warning);
        assert!((t.dist.total() - 1.0).abs() < 1e-12);

        let d = CardinalityDist::new(vec![0.2, 0.5, 0.3]).unwrap();
        let t = truncate_to_dist(&CardinalityModel::Discrete(d.clone()), 2).unwrap();
        assert_eq!(t.dist, d);

        let t = truncate_to_dist(&CardinalityModel::Panjer { alpha: 2.0 / 9.0, beta: 1.0 / 9.0 }, 64).unwrap();
        assert!((t.dist.total() - 1.0).abs() < 1e-12);
        assert!((t.dist.mean() - 2.0).abs() < 0.02 * 2.0);
        assert!(t.warning);
    }

    #[test]
    fn sampling_matches_pmf() {
        let models = [
            CardinalityModel::Poisson { rate: 3.0 },
            CardinalityModel::Panjer { alpha: 2.0, beta: 1.0 },
            CardinalityModel::Panjer { alpha: -6.0, beta: -2.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in &models {
            let draws = 20_000;
            let bins = 9;
            let mut counts = vec![0usize; bins + 1];
            for _ in 0..draws {
                counts[sample_cardinality(model, &mut rng).min(bins)] += 1;
            }
            let mut chi2 = 0.0;
            for (n, &c) in counts.iter().enumerate() {
                let p = if n < bins { cardinality_pmf(model, n) } else { 1.0 - (0..bins).map(|k| cardinality_pmf(model, k)).sum::<f64>() };
                let expected = p * draws as f64;
                if expected > 5.0 {
                    chi2 += (c as f64 - expected).powi(2) / expected;
                }
            }
            // 10 bins, generous 0.999 quantile
            assert!(chi2 < 30.0, "{model:?}: chi2 {chi2}");
        }
    }

    #[test]
    fn clutter_intensity() {
        let c = ClutterModel::poisson(10.0, Window::centered(200.0, 200.0));
        assert!((c.intensity() - 10.0 / 40_000.0).abs() < 1e-18);
    }
}
