//! Cardinalized PHD filter with a truncated cardinality distribution.

use super::kernel::{ln_falling, CorrectorTerms, PredictedCardinality};
use super::{predict_intensity, Associations, MotionModel, ObservationModel};
use crate::cardinality::{CardinalityDist, ClutterModel};
use crate::error::{Error, Result};
use crate::gm::{GaussianMixture, Vector};
use crate::numeric::{ln_factorial, log_sum_exp, signed_sum, SignedLog};

#[derive(Debug, Clone)]
pub struct CphdUpdate<const D: usize> {
    pub mixture: GaussianMixture<D>,
    pub card: CardinalityDist,
    pub ln_likelihood: f64,
    /// `ln Υ⁰[Z]` of the corrector.
    pub ln_y0: f64,
    /// `μ^z(X)` of the predicted intensity, per measurement.
    pub assoc_mass: Vec<f64>,
    /// `|Σρ − 1|` of the posterior before renormalization.
    pub card_sum_error: f64,
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Survivor cardinality: binomial thinning of `card` with probability `p_s`.
pub fn thin(card: &CardinalityDist, p_s: f64) -> Vec<f64> {
    let rho = card.probs();
    let n_max = card.n_max();
    if p_s >= 1.0 {
        return rho.to_vec();
    }
    let mut out = vec![0.0; n_max + 1];
    if p_s <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (ln_p, ln_q) = (p_s.ln(), (1.0 - p_s).ln());
    let ln_rho: Vec<f64> = rho.iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect();
    let mut terms = Vec::with_capacity(n_max + 1);
    for (j, slot) in out.iter_mut().enumerate() {
        terms.clear();
        for (l, &lp) in ln_rho.iter().enumerate().skip(j) {
            if lp > f64::NEG_INFINITY {
                terms.push(lp + ln_binomial(l, j) + j as f64 * ln_p + (l - j) as f64 * ln_q);
            }
        }
        *slot = log_sum_exp(&terms).exp();
    }
    out
}

/// Predicted intensity and cardinality. The birth cardinality must already
/// be tabulated on `0..=n_max`.
pub fn cphd_predict<const D: usize>(
    mixture: &GaussianMixture<D>,
    card: &CardinalityDist,
    motion: &MotionModel<D>,
    birth_intensity: &GaussianMixture<D>,
    birth_card: &CardinalityDist,
    n_max: usize,
) -> (GaussianMixture<D>, CardinalityDist) {
    let survive = thin(card, motion.p_s);
    let birth = birth_card.probs();
    let mut conv = vec![0.0; n_max + 1];
    for (n, slot) in conv.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &s) in survive.iter().enumerate().take(n + 1) {
            acc += s * birth.get(n - j).copied().unwrap_or(0.0);
        }
        *slot = acc;
    }
    let card = CardinalityDist::new(conv).unwrap_or_else(|_| CardinalityDist::delta(0, n_max));
    (predict_intensity(mixture, motion, birth_intensity), card)
}

/// Unnormalized posterior cardinality weights `ρ(n) Υ⁰[Z](n)`.
fn posterior_weights(card: &CardinalityDist, terms: &CorrectorTerms, p_d: f64) -> Vec<SignedLog> {
    let m = terms.lambda.len();
    let ln_a = (1.0 - p_d).ln();
    let mut buf = Vec::with_capacity(m + 1);
    card.probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            if p <= 0.0 {
                return SignedLog::ZERO;
            }
            buf.clear();
            for j in 0..=m.min(n) {
                let power = if n == j { 0.0 } else { (n - j) as f64 * ln_a };
                let e = SignedLog::from_ln(terms.esf.ln_e(j));
                buf.push(terms.clutter[m - j] * e * SignedLog::from_ln(ln_falling(n, j) + power));
            }
            signed_sum(&buf) * SignedLog::from_ln(p.ln())
        })
        .collect()
}

pub fn cphd_correctors<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    card: &CardinalityDist,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<(Associations<D, M>, CorrectorTerms)> {
    let assoc = Associations::compute(mixture, measurements, obs, offset)?;
    let terms = CorrectorTerms::compute(PredictedCardinality::Discrete(card), &assoc, obs.p_d, clutter)?;
    Ok((assoc, terms))
}

pub fn cphd_update<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    card: &CardinalityDist,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<CphdUpdate<D>> {
    let (assoc, terms) = cphd_correctors(mixture, card, measurements, obs, clutter, offset)?;
    let weights: Vec<f64> = posterior_weights(card, &terms, obs.p_d).into_iter().map(|w| w.ratio(terms.y0).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let card_sum_error = (total - 1.0).abs();
    let post_card = CardinalityDist::new(weights).map_err(|_| Error::DegenerateFilter("posterior cardinality vanished".into()))?;
    let mut post = assoc.posterior(mixture, obs.p_d, terms.l1_phi, &terms.l1_z);
    let mass = post.mass();
    if mass > 0.0 {
        post.scale_in_place(post_card.mean() / mass);
    }
    Ok(CphdUpdate { mixture: post, card: post_card, ln_likelihood: terms.ln_likelihood, ln_y0: terms.y0.ln_abs, assoc_mass: assoc.assoc_mass, card_sum_error })
}

pub fn cphd_likelihood<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    card: &CardinalityDist,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<f64> {
    cphd_correctors(mixture, card, measurements, obs, clutter, offset).map(|(_, t)| t.ln_likelihood)
}
