//! Brute-force reference computations for small instances.
//!
//! Everything here is computed along routes that share no code with the
//! filters: Gaussian integrals via explicit inverse and determinant,
//! cardinality laws via their recursions, association sums by enumerating
//! measurement subsets, and compensated summation throughout.

pub mod calibrate;

use crate::cardinality::{CardinalityDist, CardinalityModel, ClutterModel, Window};
use crate::error::{Error, Result};
use crate::filters::ObservationModel;
use crate::gm::{GaussianComponent, GaussianMixture};
use crate::numeric::neumaier_sum;
use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const MAX_DISCRETE_N: usize = 12;
pub const MAX_MEASUREMENTS: usize = 4;
pub const MAX_COMPONENTS: usize = 3;
/// Parametric priors are tabulated until their tail is this small.
const TAIL_EPS: f64 = 1e-22;
const PARAMETRIC_N_CAP: usize = 400;

/// A cardinality law given by parameters, tabulated by its recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleLaw {
    Poisson(f64),
    Panjer { alpha: f64, beta: f64 },
    Discrete(Vec<f64>),
}

impl OracleLaw {
    /// Probabilities `p(0), p(1), …` up to the point where the remaining tail
    /// is negligible (parametric laws) or the full support (discrete).
    pub fn table(&self) -> Vec<f64> {
        match self {
            OracleLaw::Discrete(p) => p.clone(),
            OracleLaw::Poisson(rate) => {
                let mut out = vec![(-rate).exp()];
                if *rate == 0.0 {
                    return out;
                }
                Self::extend(&mut out, |n, prev| prev * rate / n as f64, *rate);
                out
            }
            OracleLaw::Panjer { alpha, beta } => {
                // Panjer recursion p(n) = (a + b/n) p(n−1)
                let a = 1.0 / (beta + 1.0);
                let b = (alpha - 1.0) / (beta + 1.0);
                let mut out = vec![(beta / (beta + 1.0)).powf(*alpha)];
                if *alpha < 0.0 {
                    // binomial: finite support 0..=trials
                    let trials = (-alpha).round() as usize;
                    for n in 1..=trials {
                        out.push((a + b / n as f64) * out[n - 1]);
                    }
                    return out;
                }
                Self::extend(&mut out, |n, prev| (a + b / n as f64) * prev, alpha / beta);
                out
            }
        }
    }

    fn extend(out: &mut Vec<f64>, next: impl Fn(usize, f64) -> f64, mean: f64) {
        let mut n = 1;
        loop {
            let p = next(n, out[n - 1]);
            out.push(p);
            if p == 0.0 && n as f64 > mean {
                break;
            }
            if n as f64 > 2.0 * mean + 10.0 && p.abs() < TAIL_EPS || n >= PARAMETRIC_N_CAP {
                break;
            }
            n += 1;
        }
    }

    pub fn to_model(&self) -> Result<CardinalityModel> {
        Ok(match self {
            OracleLaw::Poisson(rate) => CardinalityModel::Poisson { rate: *rate },
            OracleLaw::Panjer { alpha, beta } => CardinalityModel::Panjer { alpha: *alpha, beta: *beta },
            OracleLaw::Discrete(p) => CardinalityModel::Discrete(CardinalityDist::new(p.clone())?),
        })
    }

    pub fn mean(&self) -> f64 {
        let t = self.table();
        neumaier_sum(t.iter().enumerate().map(|(n, p)| n as f64 * p))
    }
}

/// A small filtering problem with 2-D states and measurements.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub prior: OracleLaw,
    /// Normalized spatial distribution of targets.
    pub spatial: Vec<(f64, Vector2<f64>, Matrix2<f64>)>,
    pub h: Matrix2<f64>,
    pub r: Matrix2<f64>,
    pub p_d: f64,
    pub offset: Vector2<f64>,
    pub clutter: OracleLaw,
    pub window: Window,
    pub measurements: Vec<Vector2<f64>>,
}

impl OracleInstance {
    pub fn check_caps(&self) -> Result<()> {
        if let OracleLaw::Discrete(p) = &self.prior {
            if p.len() > MAX_DISCRETE_N + 1 {
                return Err(Error::CapsExceeded(format!("prior support {} exceeds {MAX_DISCRETE_N}", p.len() - 1)));
            }
        }
        if self.measurements.len() > MAX_MEASUREMENTS {
            return Err(Error::CapsExceeded(format!("{} measurements exceed {MAX_MEASUREMENTS}", self.measurements.len())));
        }
        if self.spatial.len() > MAX_COMPONENTS {
            return Err(Error::CapsExceeded(format!("{} components exceed {MAX_COMPONENTS}", self.spatial.len())));
        }
        Ok(())
    }

    fn clutter_density(&self) -> f64 {
        1.0 / ((self.window.max[0] - self.window.min[0]) * (self.window.max[1] - self.window.min[1]))
    }

    /// Predicted intensity for the filters: spatial law scaled by the prior mean.
    pub fn intensity(&self) -> GaussianMixture<2> {
        let mean = self.prior.mean();
        self.spatial.iter().map(|(w, m, p)| GaussianComponent::new(w * mean, *m, *p)).collect()
    }

    pub fn observation(&self) -> ObservationModel<2, 2> {
        ObservationModel { h: self.h, r: self.r, p_d: self.p_d }
    }

    pub fn clutter_model(&self) -> Result<ClutterModel> {
        Ok(ClutterModel { cardinality: self.clutter.to_model()?, window: self.window })
    }

    pub fn prior_dist(&self) -> Result<CardinalityDist> {
        CardinalityDist::new(self.prior.table().iter().map(|p| p.max(0.0)).collect())
    }

    /// `∫ p_d ℓ(z|x) s(dx)` for each measurement.
    pub fn detection_integrals(&self) -> Vec<f64> {
        self.measurements
            .iter()
            .map(|z| {
                let shifted = z - self.offset;
                neumaier_sum(self.spatial.iter().map(|(w, m, p)| {
                    let s = self.h * p * self.h.transpose() + self.r;
                    w * self.p_d * gaussian2(&shifted, &(self.h * m), &s)
                }))
            })
            .collect()
    }

    /// Per-`n` terms `ρ(n) · f(Z | n targets)`.
    pub fn per_n_terms(&self) -> Vec<f64> {
        let m = self.measurements.len();
        let q = self.detection_integrals();
        let miss = 1.0 - self.p_d;
        let s_c = self.clutter_density();
        let clutter = self.clutter.table();
        let rho_c = |k: usize| clutter.get(k).copied().unwrap_or(0.0);

        // Σ over subsets Z' of size j of Π_{Z'} q(z) · Π_{Z∖Z'} s_c
        let mut by_size = vec![Vec::new(); m + 1];
        for mask in 0u32..(1 << m) {
            let j = mask.count_ones() as usize;
            let mut prod = 1.0;
            for (k, qk) in q.iter().enumerate() {
                prod *= if mask & (1 << k) != 0 { *qk } else { s_c };
            }
            by_size[j].push(prod);
        }
        let subset_sums: Vec<f64> = by_size.into_iter().map(neumaier_sum).collect();

        self.prior
            .table()
            .iter()
            .enumerate()
            .map(|(n, &p)| {
                if p == 0.0 {
                    return 0.0;
                }
                let terms = (0..=m.min(n)).map(|j| {
                    let falling: f64 = (0..j).map(|i| (n - i) as f64).product();
                    let clutter_count = m - j;
                    let fact: f64 = (1..=clutter_count).map(|i| i as f64).product();
                    falling * miss.powi((n - j) as i32) * subset_sums[j] * rho_c(clutter_count) * fact
                });
                p * neumaier_sum(terms)
            })
            .collect()
    }

    /// Conditional set density `f(Z | X)` for explicit target states, by
    /// enumerating every assignment of measurements to targets or clutter.
    pub fn conditional_density(&self, targets: &[Vector2<f64>]) -> f64 {
        self.density_kernel().eval(targets)
    }

    fn density_kernel(&self) -> DensityKernel<'_> {
        let s_c = self.clutter_density();
        let clutter = self.clutter.table();
        let clutter_term = (0..=self.measurements.len())
            .map(|k| {
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                clutter.get(k).copied().unwrap_or(0.0) * fact * s_c.powi(k as i32)
            })
            .collect();
        let r_inv = self.r.try_inverse().expect("invertible covariance");
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.r.determinant().sqrt());
        DensityKernel { inst: self, clutter_term, r_inv, norm }
    }
}

struct DensityKernel<'a> {
    inst: &'a OracleInstance,
    clutter_term: Vec<f64>,
    r_inv: Matrix2<f64>,
    norm: f64,
}

impl DensityKernel<'_> {
    fn eval(&self, targets: &[Vector2<f64>]) -> f64 {
        let inst = self.inst;
        let g: Vec<Vec<f64>> = inst
            .measurements
            .iter()
            .map(|z| {
                targets
                    .iter()
                    .map(|x| {
                        let d = z - inst.offset - inst.h * x;
                        inst.p_d * self.norm * (-0.5 * d.dot(&(self.r_inv * d))).exp()
                    })
                    .collect()
            })
            .collect();
        let n = targets.len();
        let miss = 1.0 - inst.p_d;
        fn rec(k: usize, used: u64, assigned: usize, g: &[Vec<f64>], n: usize, miss: f64, ct: &[f64]) -> f64 {
            if k == g.len() {
                return miss.powi((n - assigned) as i32) * ct[g.len() - assigned];
            }
            let mut total = rec(k + 1, used, assigned, g, n, miss, ct);
            for t in 0..n {
                if used & (1 << t) == 0 && g[k][t] > 0.0 {
                    total += g[k][t] * rec(k + 1, used | (1 << t), assigned + 1, g, n, miss, ct);
                }
            }
            total
        }
        rec(0, 0, 0, &g, n, miss, &self.clutter_term)
    }
}

fn gaussian2(x: &Vector2<f64>, mean: &Vector2<f64>, cov: &Matrix2<f64>) -> f64 {
    let det = cov.determinant();
    let inv = cov.try_inverse().expect("invertible covariance");
    let d = x - mean;
    (-0.5 * d.dot(&(inv * d))).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

pub fn oracle_likelihood(inst: &OracleInstance) -> Result<f64> {
    inst.check_caps()?;
    Ok(neumaier_sum(inst.per_n_terms()))
}

/// Posterior mean and variance of the target number.
pub fn oracle_posterior_cardinality(inst: &OracleInstance) -> Result<(f64, f64)> {
    inst.check_caps()?;
    let terms = inst.per_n_terms();
    let total = neumaier_sum(terms.iter().copied());
    if !(total > 0.0) {
        return Err(Error::DegenerateLikelihood("oracle likelihood is zero".into()));
    }
    let mean = neumaier_sum(terms.iter().enumerate().map(|(n, t)| n as f64 * t)) / total;
    let var = neumaier_sum(terms.iter().enumerate().map(|(n, t)| (n as f64 - mean).powi(2) * t)) / total;
    Ok((mean, var))
}

/// Monte Carlo estimate of the likelihood with its standard error, sampling
/// the target number and states and averaging `f(Z | X)`.
pub fn monte_carlo_likelihood<R: Rng + ?Sized>(inst: &OracleInstance, samples: usize, rng: &mut R) -> (f64, f64) {
    let table = inst.prior.table();
    let cdf: Vec<f64> = table
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.max(0.0);
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().unwrap_or(&1.0);
    let chol: Vec<Matrix2<f64>> = inst.spatial.iter().map(|(_, _, p)| p.cholesky().expect("SPD").l()).collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let kernel = inst.density_kernel();
    let mut targets = Vec::new();
    for _ in 0..samples {
        let u: f64 = rng.random::<f64>() * total;
        let n = cdf.partition_point(|c| *c <= u).min(table.len() - 1);
        targets.clear();
        for _ in 0..n {
            let mut v: f64 = rng.random();
            let mut idx = inst.spatial.len() - 1;
            for (i, (w, _, _)) in inst.spatial.iter().enumerate() {
                if v < *w {
                    idx = i;
                    break;
                }
                v -= w;
            }
            let e = Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
            targets.push(inst.spatial[idx].1 + chol[idx] * e);
        }
        let f = kernel.eval(&targets);
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Which cardinality laws a random instance may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    Poisson,
    NegativeBinomial,
    Binomial,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClutterFamily {
    Poisson,
    NegativeBinomial,
    Discrete,
}

fn random_spd<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Matrix2<f64> {
    let a = rng.random_range(lo..hi);
    let b = rng.random_range(lo..hi);
    let c = rng.random_range(-0.9..0.9) * (a * b).sqrt();
    Matrix2::new(a, c, c, b)
}

fn random_discrete<R: Rng + ?Sized>(rng: &mut R, n_max: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..=n_max).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random instance within the oracle caps.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, prior: PriorFamily, clutter: ClutterFamily, n_meas: usize) -> OracleInstance {
    let n_comp = rng.random_range(1..=MAX_COMPONENTS);
    let mut weights: Vec<f64> = (0..n_comp).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let spatial: Vec<_> = weights
        .into_iter()
        .map(|w| (w, Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)), random_spd(rng, 0.2, 1.5)))
        .collect();
    let prior = match prior {
        PriorFamily::Poisson => OracleLaw::Poisson(rng.random_range(0.3..4.0)),
        PriorFamily::NegativeBinomial => {
            let mean: f64 = rng.random_range(0.3..4.0);
            let var = mean * rng.random_range(1.2..4.0);
            OracleLaw::Panjer { alpha: mean * mean / (var - mean), beta: mean / (var - mean) }
        }
        PriorFamily::Binomial => {
            let trials = rng.random_range(1..=8) as f64;
            let p: f64 = rng.random_range(0.2..0.9);
            OracleLaw::Panjer { alpha: -trials, beta: -1.0 / p }
        }
        PriorFamily::Discrete => {
            let n_max = rng.random_range(1..=MAX_DISCRETE_N);
            OracleLaw::Discrete(random_discrete(rng, n_max))
        }
    };
    let clutter = match clutter {
        ClutterFamily::Poisson => OracleLaw::Poisson(rng.random_range(0.5..5.0)),
        ClutterFamily::NegativeBinomial => {
            let mean: f64 = rng.random_range(0.5..5.0);
            let var = mean * rng.random_range(1.2..4.0);
            OracleLaw::Panjer { alpha: mean * mean / (var - mean), beta: mean / (var - mean) }
        }
        ClutterFamily::Discrete => OracleLaw::Discrete(random_discrete(rng, MAX_MEASUREMENTS + 2)),
    };
    let h = Matrix2::new(rng.random_range(0.7..1.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.7..1.3));
    let offset = Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let measurements = (0..n_meas).map(|_| Vector2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0))).collect();
    OracleInstance {
        prior,
        spatial,
        h,
        r: random_spd(rng, 0.1, 0.8),
        p_d: rng.random_range(0.3..0.99),
        offset,
        clutter,
        window: Window::centered(12.0, 12.0),
        measurements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> OracleInstance {
        OracleInstance {
            prior: OracleLaw::Discrete(vec![1.0]),
            spatial: vec![(1.0, Vector2::zeros(), Matrix2::identity())],
            h: Matrix2::identity(),
            r: Matrix2::identity(),
            p_d: 0.9,
            offset: Vector2::zeros(),
            clutter: OracleLaw::Discrete(vec![1.0]),
            window: Window::centered(10.0, 10.0),
            measurements: vec![],
        }
    }

    #[test]
    fn no_targets_no_clutter_no_measurements() {
        assert!((oracle_likelihood(&base()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_association() {
        let mut inst = base();
        inst.prior = OracleLaw::Discrete(vec![0.0, 1.0]);
        inst.measurements = vec![Vector2::new(0.5, -0.5)];
        let expected = 0.9 * gaussian2(&inst.measurements[0], &Vector2::zeros(), &(Matrix2::identity() * 2.0));
        assert!((oracle_likelihood(&inst).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn full_detection_without_measurements() {
        let mut inst = base();
        inst.p_d = 1.0;
        inst.prior = OracleLaw::Discrete(vec![0.3, 0.4, 0.3]);
        let (mean, var) = oracle_posterior_cardinality(&inst).unwrap();
        assert_eq!((mean, var), (0.0, 0.0));
    }

    #[test]
    fn recursions_match_closed_forms() {
        let t = OracleLaw::Poisson(2.0).table();
        assert!((t[3] - 8.0 / 6.0 * (-2f64).exp()).abs() < 1e-15);
        assert!((neumaier_sum(t.iter().copied()) - 1.0).abs() < 1e-14);
        let t = OracleLaw::Panjer { alpha: -4.0, beta: -2.0 }.table();
        // binomial(4, 0.5)
        for (k, c) in [1.0, 4.0, 6.0, 4.0, 1.0].iter().enumerate() {
            assert!((t[k] - c / 16.0).abs() < 1e-15);
        }
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn caps() {
        let mut inst = base();
        inst.measurements = vec![Vector2::zeros(); 5];
        assert!(matches!(oracle_likelihood(&inst), Err(Error::CapsExceeded(_))));
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inst = random_instance(&mut rng, PriorFamily::NegativeBinomial, ClutterFamily::Poisson, 4);
        let a = oracle_likelihood(&inst).unwrap();
        inst.measurements.reverse();
        let b = oracle_likelihood(&inst).unwrap();
        assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn monte_carlo_brackets_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = random_instance(&mut rng, PriorFamily::Discrete, ClutterFamily::Poisson, 2);
        let exact = oracle_likelihood(&inst).unwrap();
        let (est, se) = monte_carlo_likelihood(&inst, 50_000, &mut rng);
        assert!((est - exact).abs() < 4.0 * se + 1e-300, "{est} ± {se} vs {exact}");
    }
}
