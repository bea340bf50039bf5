//! Gaussian-mixture PHD filter. Requires Poisson clutter.

use super::{predict_intensity, Associations, BirthModel, MotionModel, ObservationModel};
use crate::cardinality::ClutterModel;
use crate::error::{Error, Result};
use crate::gm::{GaussianMixture, Vector};

#[derive(Debug, Clone)]
pub struct PhdUpdate<const D: usize> {
    pub mixture: GaussianMixture<D>,
    pub ln_likelihood: f64,
    /// `μ^z(X)` of the predicted intensity, per measurement.
    pub assoc_mass: Vec<f64>,
}

pub fn phd_predict<const D: usize>(mixture: &GaussianMixture<D>, motion: &MotionModel<D>, birth: &BirthModel<D>) -> GaussianMixture<D> {
    predict_intensity(mixture, motion, &birth.intensity)
}

fn require_poisson(clutter: &ClutterModel) -> Result<()> {
    if clutter.cardinality.is_poisson() {
        Ok(())
    } else {
        Err(Error::ModelMismatch("PHD filter requires Poisson clutter".into()))
    }
}

pub fn phd_update<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<PhdUpdate<D>> {
    require_poisson(clutter)?;
    let assoc = Associations::compute(mixture, measurements, obs, offset)?;
    let mu_c = clutter.intensity();
    let mut ln_likelihood = -clutter.rate() - obs.p_d * assoc.mass;
    let mut factors = Vec::with_capacity(assoc.len());
    for &mu_z in &assoc.assoc_mass {
        let denom = mu_c + mu_z;
        if !(denom > 0.0) {
            return Err(Error::DegenerateLikelihood("measurement explained by neither clutter nor targets".into()));
        }
        ln_likelihood += denom.ln();
        factors.push(1.0 / denom);
    }
    let mixture = assoc.posterior(mixture, obs.p_d, 1.0, &factors);
    Ok(PhdUpdate { mixture, ln_likelihood, assoc_mass: assoc.assoc_mass })
}

/// `ln ℓ(Z) = Σ_z ln(μ_c(z) + μ^z(X)) − λ_c − p_d μ(X)`.
pub fn phd_likelihood<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
) -> Result<f64> {
    require_poisson(clutter)?;
    let assoc = Associations::compute(mixture, measurements, obs, offset)?;
    let mu_c = clutter.intensity();
    let mut ln = -clutter.rate() - obs.p_d * assoc.mass;
    for &mu_z in &assoc.assoc_mass {
        ln += (mu_c + mu_z).ln();
    }
    Ok(ln)
}
