//! Second-order PHD filter: intensity plus target-number variance, with a
//! Panjer law matched to the first two moments.

use super::kernel::{CorrectorTerms, PredictedCardinality};
use super::{predict_intensity, Associations, BirthModel, MotionModel, ObservationModel};
use crate::cardinality::{panjer_from_moments, ClutterModel, PanjerBranch};
use crate::error::Result;
use crate::gm::{GaussianMixture, Vector};

#[derive(Debug, Clone)]
pub struct SoPhdUpdate<const D: usize> {
    pub mixture: GaussianMixture<D>,
    pub variance: f64,
    /// Set when the computed variance was negative and clamped to zero.
    pub clamped: bool,
    pub ln_likelihood: f64,
    /// `ln Υ⁰[Z]` of the corrector.
    pub ln_y0: f64,
    /// `μ^z(X)` of the predicted intensity, per measurement.
    pub assoc_mass: Vec<f64>,
}

pub fn sophd_predict<const D: usize>(
    mixture: &GaussianMixture<D>,
    variance: f64,
    motion: &MotionModel<D>,
    birth: &BirthModel<D>,
) -> (GaussianMixture<D>, f64) {
    let p_s = motion.p_s;
    let var = birth.cardinality.variance() + p_s * p_s * variance + p_s * (1.0 - p_s) * mixture.mass();
    (predict_intensity(mixture, motion, &birth.intensity), var)
}

fn predicted_law(mass: f64, variance: f64) -> Result<PredictedCardinality<'static>> {
    let params = panjer_from_moments(mass, variance)?;
    Ok(match params.branch {
        PanjerBranch::Poisson => PredictedCardinality::Poisson { mass },
        _ => PredictedCardinality::Panjer { alpha: params.alpha, beta: params.beta },
    })
}

/// Corrector terms of the SO-PHD update for a predicted `(mixture, variance)`.
pub fn sophd_correctors<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    variance: f64,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<(Associations<D, M>, CorrectorTerms)> {
    let assoc = Associations::compute(mixture, measurements, obs, offset)?;
    let pred = predicted_law(assoc.mass, variance)?;
    let terms = CorrectorTerms::compute(pred, &assoc, obs.p_d, clutter)?;
    Ok((assoc, terms))
}

pub fn sophd_update<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    variance: f64,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<SoPhdUpdate<D>> {
    let (assoc, terms) = sophd_correctors(mixture, variance, measurements, obs, clutter, offset)?;
    let posterior = assoc.posterior(mixture, obs.p_d, terms.l1_phi, &terms.l1_z);
    let raw = terms.raw_variance();
    let clamped = raw < 0.0;
    Ok(SoPhdUpdate { mixture: posterior, variance: raw.max(0.0), clamped, ln_likelihood: terms.ln_likelihood, ln_y0: terms.y0.ln_abs, assoc_mass: assoc.assoc_mass })
}

pub fn sophd_likelihood<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    variance: f64,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<f64> {
    sophd_correctors(mixture, variance, measurements, obs, clutter, offset).map(|(_, t)| t.ln_likelihood)
}
