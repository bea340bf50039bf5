//! Single-cluster corrector kernel shared by the SO-PHD and CPHD updates.
//!
//! With `Λ_z = μ^z(X) / (M s_c(z))`, `a = 1 − p_d` and `C(k) = k! ρ_c(k)`:
//!
//! ```text
//! Y_u(W) = Σ_j G^{(j+u)}(a) · C(|W| − j) · e_j(Λ_W)
//! ```
//!
//! where `G` is the probability generating function of the predicted target
//! number. The likelihood is `Π_z s_c(z) · Y_0(Z)` and the posterior
//! intensity multipliers are ratios of `Y_1`, `Y_2` over `Y_0`.

use super::Associations;
use crate::cardinality::esf::{leave_one_out, ScaledEsf};
use crate::cardinality::{ln_pochhammer, CardinalityDist, ClutterModel};
use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, log_sum_exp, signed_sum, SignedLog};

/// Predicted cardinality as seen by the corrector.
#[derive(Debug, Clone, Copy)]
pub enum PredictedCardinality<'a> {
    Poisson { mass: f64 },
    Panjer { alpha: f64, beta: f64 },
    Discrete(&'a CardinalityDist),
}

/// Derivatives `G^{(k)}(1 − p_d)` for `k = 0..=k_max`.
pub fn pgf_derivatives(pred: PredictedCardinality<'_>, p_d: f64, k_max: usize) -> Result<Vec<SignedLog>> {
    let a = 1.0 - p_d;
    match pred {
        PredictedCardinality::Poisson { mass } => Ok((0..=k_max)
            .map(|k| {
                if mass == 0.0 {
                    if k == 0 {
                        SignedLog::ONE
                    } else {
                        SignedLog::ZERO
                    }
                } else {
                    SignedLog::from_ln(k as f64 * mass.ln() - p_d * mass)
                }
            })
            .collect()),
        PredictedCardinality::Panjer { alpha, beta } => {
            let f = 1.0 + p_d / beta;
            if !(f > 0.0) {
                return Err(Error::DegenerateLikelihood(format!("Panjer generating function base {f} is not positive")));
            }
            let ln_f = f.ln();
            let ln_beta = beta.abs().ln();
            Ok((0..=k_max)
                .map(|k| {
                    let sign = if beta < 0.0 && k % 2 == 1 { -1 } else { 1 };
                    let rest = SignedLog { sign, ln_abs: -(k as f64) * ln_beta + (-alpha - k as f64) * ln_f };
                    ln_pochhammer(alpha, k) * rest
                })
                .collect())
        }
        PredictedCardinality::Discrete(dist) => {
            let ln_rho: Vec<f64> = dist.probs().iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect();
            let ln_a = a.ln();
            let mut out = Vec::with_capacity(k_max + 1);
            let mut terms = Vec::with_capacity(ln_rho.len());
            for k in 0..=k_max {
                terms.clear();
                for (n, &lp) in ln_rho.iter().enumerate().skip(k) {
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    let power = if n == k { 0.0 } else { (n - k) as f64 * ln_a };
                    terms.push(lp + ln_falling(n, k) + power);
                }
                out.push(SignedLog::from_ln(log_sum_exp(&terms)));
            }
            Ok(out)
        }
    }
}

/// `ln(n! / (n − k)!)`.
pub fn ln_falling(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(n - k)
}

/// `C(k) = k! ρ_c(k)` for `k = 0..=m`.
pub fn clutter_terms(clutter: &ClutterModel, m: usize) -> Vec<SignedLog> {
    (0..=m).map(|k| clutter.cardinality.ln_factorial_moment_term(k)).collect()
}

fn e_term(esf: &ScaledEsf, j: usize) -> SignedLog {
    SignedLog::from_ln(esf.ln_e(j))
}

/// `Y_u` of the subset whose scaled symmetric functions are `esf`.
pub fn y_value(g: &[SignedLog], c: &[SignedLog], esf: &ScaledEsf, u: usize) -> SignedLog {
    let size = esf.degree();
    let terms: Vec<SignedLog> = (0..=size).map(|j| g[j + u] * c[size - j] * e_term(esf, j)).collect();
    signed_sum(&terms)
}

/// Linear-domain weights for evaluating `Y_u(Z∖z)` as one dot product per `z`.
///
/// Each term is expressed relative to the matching full-set term, whose
/// magnitude bounds it since leave-one-out functions never exceed the full
/// ones.
struct LooWeights {
    ln_max: f64,
    kappa: Vec<f64>,
}

impl LooWeights {
    fn new(g: &[SignedLog], c: &[SignedLog], full: &ScaledEsf, u: usize) -> Self {
        let m = full.degree();
        let terms: Vec<SignedLog> = (0..m).map(|j| g[j + u] * c[m - 1 - j] * e_term(full, j)).collect();
        let ln_max = terms.iter().fold(f64::NEG_INFINITY, |acc, t| acc.max(t.ln_abs));
        let kappa = terms
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let coeff = full.coeffs[j];
                if t.is_zero() || coeff <= 0.0 {
                    0.0
                } else {
                    f64::from(t.sign) * (t.ln_abs - ln_max).exp() / coeff
                }
            })
            .collect();
        LooWeights { ln_max, kappa }
    }

    fn eval(&self, loo: &ScaledEsf) -> SignedLog {
        if self.ln_max == f64::NEG_INFINITY {
            return SignedLog::ZERO;
        }
        let dot: f64 = self.kappa.iter().zip(&loo.coeffs).map(|(k, e)| k * e).sum();
        SignedLog::from_f64(dot) * SignedLog::from_ln(self.ln_max)
    }
}

/// Log-likelihood `Σ ln s_c + ln Y_0(Z)` from association masses alone.
pub fn ln_likelihood_from_masses(pred: PredictedCardinality<'_>, mass: f64, assoc_mass: &[f64], p_d: f64, clutter: &ClutterModel) -> Result<f64> {
    let m = assoc_mass.len();
    let s_c = clutter.spatial_density();
    let lambda: Vec<f64> = if mass > 0.0 { assoc_mass.iter().map(|mu| mu / (mass * s_c)).collect() } else { vec![0.0; m] };
    let g = pgf_derivatives(pred, p_d, m)?;
    let c = clutter_terms(clutter, m);
    let y0 = y_value(&g, &c, &ScaledEsf::new(&lambda), 0);
    if y0.sign != 1 {
        return Err(Error::DegenerateLikelihood(format!("normalising constant has sign {} for {m} measurements", y0.sign)));
    }
    Ok(m as f64 * s_c.ln() + y0.ln_abs)
}

/// Corrector quantities of one measurement update.
#[derive(Debug, Clone)]
pub struct CorrectorTerms {
    pub y0: SignedLog,
    pub y1: SignedLog,
    pub y2: SignedLog,
    /// Multiplier of the missed-detection term, first order.
    pub l1_phi: f64,
    /// Multiplier of each association term, first order.
    pub l1_z: Vec<f64>,
    pub l2_phi: f64,
    pub l2_z: Vec<f64>,
    /// Posterior mean target number.
    pub mean: f64,
    /// Posterior second factorial moment `E[n(n − 1)]`.
    pub second_factorial: f64,
    pub ln_likelihood: f64,
    /// `Λ_z` per measurement.
    pub lambda: Vec<f64>,
    pub g: Vec<SignedLog>,
    pub clutter: Vec<SignedLog>,
    pub esf: ScaledEsf,
    mass: f64,
    ln_sc: f64,
}

impl CorrectorTerms {
    pub fn compute<const D: usize, const M: usize>(
        pred: PredictedCardinality<'_>,
        assoc: &Associations<D, M>,
        p_d: f64,
        clutter: &ClutterModel,
    ) -> Result<Self> {
        let m = assoc.len();
        let mass = assoc.mass;
        let s_c = clutter.spatial_density();
        let ln_sc = s_c.ln();
        let a = 1.0 - p_d;
        let lambda: Vec<f64> = if mass > 0.0 { assoc.assoc_mass.iter().map(|mu| mu / (mass * s_c)).collect() } else { vec![0.0; m] };
        let g = pgf_derivatives(pred, p_d, m + 2)?;
        let c = clutter_terms(clutter, m);
        let esf = ScaledEsf::new(&lambda);

        let y0 = y_value(&g, &c, &esf, 0);
        let y1 = y_value(&g, &c, &esf, 1);
        let y2 = y_value(&g, &c, &esf, 2);
        if y0.sign != 1 {
            return Err(Error::DegenerateLikelihood(format!("normalising constant has sign {} for {m} measurements", y0.sign)));
        }
        let ln_likelihood = m as f64 * ln_sc + y0.ln_abs;

        let (mut l1_phi, mut l2_phi) = (0.0, 0.0);
        let mut l1_z = vec![0.0; m];
        let mut l2_z = vec![0.0; m];
        if mass > 0.0 {
            l1_phi = y1.ratio(y0) / mass;
            l2_phi = y2.ratio(y0) / (mass * mass);
            if m > 0 {
                let loo = leave_one_out(&lambda);
                let w1 = LooWeights::new(&g, &c, &esf, 1);
                let w2 = LooWeights::new(&g, &c, &esf, 2);
                let denom1 = SignedLog::from_ln(mass.ln() + ln_sc) * y0;
                let denom2 = SignedLog::from_ln(2.0 * mass.ln() + ln_sc) * y0;
                for (i, e) in loo.iter().enumerate() {
                    l1_z[i] = w1.eval(e).ratio(denom1);
                    l2_z[i] = w2.eval(e).ratio(denom2);
                }
            }
        }

        // Posterior moments through aggregated identities:
        // Σ_z Λ_z e_j(Λ∖z) = (j+1) e_{j+1}(Λ).
        let idx = |i: usize| SignedLog::from_f64(i as f64);
        let first: Vec<SignedLog> = (1..=m).map(|i| g[i] * c[m - i] * idx(i) * e_term(&esf, i)).collect();
        let cross: Vec<SignedLog> = (1..=m).map(|i| g[i + 1] * c[m - i] * idx(i) * e_term(&esf, i)).collect();
        let pairs: Vec<SignedLog> = (2..=m).map(|i| g[i] * c[m - i] * idx(i * (i - 1)) * e_term(&esf, i)).collect();
        let a_log = SignedLog::from_f64(a);
        let mean = signed_sum(&[a_log * y1, signed_sum(&first)]).ratio(y0);
        let two = SignedLog::from_f64(2.0);
        let second_factorial = signed_sum(&[a_log * a_log * y2, two * a_log * signed_sum(&cross), signed_sum(&pairs)]).ratio(y0);

        Ok(CorrectorTerms { y0, y1, y2, l1_phi, l1_z, l2_phi, l2_z, mean, second_factorial, ln_likelihood, lambda, g, clutter: c, esf, mass, ln_sc })
    }

    /// Second-order pair multiplier for measurements `i ≠ j`; zero on the
    /// diagonal. Recomputes the symmetric functions of `Z∖{z_i, z_j}`.
    pub fn l2_pair(&self, i: usize, j: usize) -> f64 {
        if i == j || self.mass <= 0.0 {
            return 0.0;
        }
        let rest: Vec<f64> = self.lambda.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, &v)| v).collect();
        let esf = ScaledEsf::new(&rest);
        let y = y_value(&self.g, &self.clutter, &esf, 2);
        y.ratio(SignedLog::from_ln(2.0 * self.mass.ln() + 2.0 * self.ln_sc) * self.y0)
    }

    /// Posterior variance of the target number, before clamping.
    pub fn raw_variance(&self) -> f64 {
        self.second_factorial + self.mean - self.mean * self.mean
    }
}
