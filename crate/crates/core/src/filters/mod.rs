//! Daughter multi-object filters conditioned on a sensor state.
//!
//! The sensor state enters through an additive measurement offset `b(s)`:
//! measurements are shifted by `-b(s)` once, after which the standard
//! linear-Gaussian machinery applies.

pub mod cphd;
pub mod kernel;
pub mod phd;
pub mod sophd;

use crate::cardinality::{truncate_to_dist, CardinalityDist, CardinalityModel, ClutterModel};
use crate::error::{Error, Result};
use crate::gm::{kalman_predict, reduce_mixture, GaussianComponent, GaussianMixture, Matrix, MeasurementCache, ReductionConfig, Vector};

pub use cphd::{cphd_correctors, cphd_likelihood, cphd_predict, cphd_update, CphdUpdate};
pub use kernel::CorrectorTerms;
use kernel::{ln_likelihood_from_masses, PredictedCardinality};
pub use phd::{phd_likelihood, phd_predict, phd_update, PhdUpdate};
pub use sophd::{sophd_correctors, sophd_likelihood, sophd_predict, sophd_update, SoPhdUpdate};

/// Default truncation of CPHD cardinality distributions.
pub const DEFAULT_N_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel<const D: usize, const M: usize> {
    pub h: Matrix<M, D>,
    pub r: Matrix<M, M>,
    pub p_d: f64,
}

impl<const D: usize, const M: usize> ObservationModel<D, M> {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(Error::Config(format!("detection probability {} outside [0, 1]", self.p_d)));
        }
        if nalgebra::Cholesky::new(self.r).is_none() {
            return Err(Error::NotPositiveDefinite("measurement noise"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel<const D: usize> {
    pub f: Matrix<D, D>,
    pub q: Matrix<D, D>,
    pub p_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthModel<const D: usize> {
    pub intensity: GaussianMixture<D>,
    pub cardinality: CardinalityModel,
}

impl<const D: usize> BirthModel<D> {
    pub fn new(intensity: GaussianMixture<D>, cardinality: CardinalityModel) -> Result<Self> {
        let (mass, mean) = (intensity.mass(), cardinality.mean());
        if (mass - mean).abs() > 1e-9 * mean.max(1.0) {
            return Err(Error::Config(format!("birth intensity mass {mass} differs from cardinality mean {mean}")));
        }
        Ok(BirthModel { intensity, cardinality })
    }

    pub fn none() -> Self {
        BirthModel { intensity: GaussianMixture::empty(), cardinality: CardinalityModel::Poisson { rate: 0.0 } }
    }
}

/// Everything a daughter filter needs besides its own state.
#[derive(Debug, Clone)]
pub struct FilterModels<const D: usize, const M: usize> {
    pub motion: MotionModel<D>,
    pub birth: BirthModel<D>,
    pub obs: ObservationModel<D, M>,
    pub clutter: ClutterModel,
    pub reduction: ReductionConfig,
    pub n_max: usize,
    birth_dist: CardinalityDist,
}

impl<const D: usize, const M: usize> FilterModels<D, M> {
    pub fn new(
        motion: MotionModel<D>,
        birth: BirthModel<D>,
        obs: ObservationModel<D, M>,
        clutter: ClutterModel,
        reduction: ReductionConfig,
        n_max: usize,
    ) -> Result<Self> {
        obs.validate()?;
        reduction.validate()?;
        if !(0.0..=1.0).contains(&motion.p_s) {
            return Err(Error::Config(format!("survival probability {} outside [0, 1]", motion.p_s)));
        }
        let birth_dist = truncate_to_dist(&birth.cardinality, n_max)?.dist;
        Ok(FilterModels { motion, birth, obs, clutter, reduction, n_max, birth_dist })
    }

    /// Birth cardinality tabulated on `0..=n_max`.
    pub fn birth_dist(&self) -> &CardinalityDist {
        &self.birth_dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Phd,
    SoPhd,
    Cphd,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Phd, FilterKind::SoPhd, FilterKind::Cphd];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Phd => "phd",
            FilterKind::SoPhd => "sophd",
            FilterKind::Cphd => "cphd",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phd" => Ok(FilterKind::Phd),
            "sophd" | "so-phd" | "panjer" => Ok(FilterKind::SoPhd),
            "cphd" => Ok(FilterKind::Cphd),
            other => Err(Error::Parse(format!("unknown filter '{other}'"))),
        }
    }
}

/// Sufficient statistics of one daughter filter.
#[derive(Debug, Clone, PartialEq)]
pub enum DaughterState<const D: usize> {
    Phd { mixture: GaussianMixture<D> },
    SoPhd { mixture: GaussianMixture<D>, variance: f64 },
    Cphd { mixture: GaussianMixture<D>, card: CardinalityDist },
}

/// What the closed-form likelihood needs from a predicted state once the
/// update has computed the association masses and the corrector.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodInputs {
    pub mass: f64,
    pub assoc_mass: Vec<f64>,
    pub law: PredictedLaw,
    /// `ln Υ⁰[Z]`; unused by the Poisson law.
    pub ln_y0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictedLaw {
    Poisson,
    Variance(f64),
    Distribution(CardinalityDist),
}

impl LikelihoodInputs {
    /// Filter-specific closed-form log-likelihood assembled from the update's
    /// by-products: `Σ_z ln(μ_c + μ^z) − λ_c − p_d μ(X)` for the Poisson law,
    /// `Σ_z ln s_c(z) + ln Υ⁰[Z]` otherwise.
    pub fn ln_likelihood<const D: usize, const M: usize>(&self, models: &FilterModels<D, M>) -> Result<f64> {
        match self.law {
            PredictedLaw::Poisson => self.recompute(models),
            _ => {
                let ln_sc = models.clutter.spatial_density().ln();
                let total = self.assoc_mass.iter().map(|_| ln_sc).sum::<f64>() + self.ln_y0;
                if total.is_nan() {
                    return Err(Error::DegenerateLikelihood("corrector normalization is not positive".into()));
                }
                Ok(total)
            }
        }
    }

    /// The same likelihood recomputed from the association masses alone.
    pub fn recompute<const D: usize, const M: usize>(&self, models: &FilterModels<D, M>) -> Result<f64> {
        let (p_d, clutter) = (models.obs.p_d, &models.clutter);
        match &self.law {
            PredictedLaw::Poisson => {
                let mu_c = clutter.intensity();
                Ok(self.assoc_mass.iter().map(|mu| (mu_c + mu).ln()).sum::<f64>() - clutter.rate() - p_d * self.mass)
            }
            PredictedLaw::Variance(var) => {
                let params = crate::cardinality::panjer_from_moments(self.mass, *var)?;
                let pred = match params.branch {
                    crate::cardinality::PanjerBranch::Poisson => PredictedCardinality::Poisson { mass: self.mass },
                    _ => PredictedCardinality::Panjer { alpha: params.alpha, beta: params.beta },
                };
                ln_likelihood_from_masses(pred, self.mass, &self.assoc_mass, p_d, clutter)
            }
            PredictedLaw::Distribution(card) => ln_likelihood_from_masses(PredictedCardinality::Discrete(card), self.mass, &self.assoc_mass, p_d, clutter),
        }
    }
}

/// Side information from one daughter update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateInfo {
    /// Closed-form multi-object log-likelihood of the predicted state.
    pub ln_likelihood: f64,
    pub variance_clamped: bool,
    /// `|Σρ − 1|` after a CPHD update; zero for the other filters.
    pub card_sum_error: f64,
    pub inputs: LikelihoodInputs,
}

impl<const D: usize> DaughterState<D> {
    pub fn empty(kind: FilterKind, n_max: usize) -> Self {
        let mixture = GaussianMixture::empty();
        match kind {
            FilterKind::Phd => DaughterState::Phd { mixture },
            FilterKind::SoPhd => DaughterState::SoPhd { mixture, variance: 0.0 },
            FilterKind::Cphd => DaughterState::Cphd { mixture, card: CardinalityDist::delta(0, n_max) },
        }
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            DaughterState::Phd { .. } => FilterKind::Phd,
            DaughterState::SoPhd { .. } => FilterKind::SoPhd,
            DaughterState::Cphd { .. } => FilterKind::Cphd,
        }
    }

    pub fn mixture(&self) -> &GaussianMixture<D> {
        match self {
            DaughterState::Phd { mixture } | DaughterState::SoPhd { mixture, .. } | DaughterState::Cphd { mixture, .. } => mixture,
        }
    }

    /// Expected number of objects.
    pub fn expected_cardinality(&self) -> f64 {
        match self {
            DaughterState::Cphd { card, .. } => card.mean(),
            other => other.mixture().mass(),
        }
    }

    pub fn predict<const M: usize>(&self, models: &FilterModels<D, M>) -> Self {
        match self {
            DaughterState::Phd { mixture } => DaughterState::Phd { mixture: phd_predict(mixture, &models.motion, &models.birth) },
            DaughterState::SoPhd { mixture, variance } => {
                let (mixture, variance) = sophd_predict(mixture, *variance, &models.motion, &models.birth);
                DaughterState::SoPhd { mixture, variance }
            }
            DaughterState::Cphd { mixture, card } => {
                let (mixture, card) = cphd_predict(mixture, card, &models.motion, &models.birth.intensity, models.birth_dist(), models.n_max);
                DaughterState::Cphd { mixture, card }
            }
        }
    }

    /// Measurement update followed by mixture reduction. The returned
    /// likelihood is that of the predicted state `self`.
    pub fn update<const M: usize>(&self, measurements: &[Vector<M>], offset: &Vector<M>, models: &FilterModels<D, M>) -> Result<(Self, UpdateInfo)> {
        let reduce = |m: &GaussianMixture<D>| reduce_mixture(m, &models.reduction);
        match self {
            DaughterState::Phd { mixture } => {
                let up = phd_update(mixture, measurements, &models.obs, &models.clutter, offset)?;
                let inputs = LikelihoodInputs { mass: mixture.mass(), assoc_mass: up.assoc_mass, law: PredictedLaw::Poisson, ln_y0: 0.0 };
                let info = UpdateInfo { ln_likelihood: up.ln_likelihood, variance_clamped: false, card_sum_error: 0.0, inputs };
                Ok((DaughterState::Phd { mixture: reduce(&up.mixture) }, info))
            }
            DaughterState::SoPhd { mixture, variance } => {
                let up = sophd_update(mixture, *variance, measurements, &models.obs, &models.clutter, offset)?;
                let inputs = LikelihoodInputs { mass: mixture.mass(), assoc_mass: up.assoc_mass, law: PredictedLaw::Variance(*variance), ln_y0: up.ln_y0 };
                let info = UpdateInfo { ln_likelihood: up.ln_likelihood, variance_clamped: up.clamped, card_sum_error: 0.0, inputs };
                Ok((DaughterState::SoPhd { mixture: reduce(&up.mixture), variance: up.variance }, info))
            }
            DaughterState::Cphd { mixture, card } => {
                let up = cphd_update(mixture, card, measurements, &models.obs, &models.clutter, offset)?;
                let inputs = LikelihoodInputs { mass: mixture.mass(), assoc_mass: up.assoc_mass, law: PredictedLaw::Distribution(card.clone()), ln_y0: up.ln_y0 };
                let info = UpdateInfo { ln_likelihood: up.ln_likelihood, variance_clamped: false, card_sum_error: up.card_sum_error, inputs };
                let mut reduced = reduce(&up.mixture);
                // keep the intensity mass tied to the cardinality mean
                let mass = reduced.mass();
                if mass > 0.0 {
                    reduced.scale_in_place(up.card.mean() / mass);
                }
                Ok((DaughterState::Cphd { mixture: reduced, card: up.card }, info))
            }
        }
    }
}

/// Survivor and birth intensity, shared by all three predictions.
pub fn predict_intensity<const D: usize>(mixture: &GaussianMixture<D>, motion: &MotionModel<D>, birth: &GaussianMixture<D>) -> GaussianMixture<D> {
    let mut out = birth.clone();
    out.components.reserve(mixture.len());
    for c in mixture.iter() {
        let mut p = kalman_predict(c, &motion.f, &motion.q);
        p.weight *= motion.p_s;
        out.components.push(p);
    }
    out
}

/// Undetected part of the predicted intensity: weights scaled by `1 − p_d`.
pub fn missed_detection_term<const D: usize, const M: usize>(mixture: &GaussianMixture<D>, obs: &ObservationModel<D, M>) -> GaussianMixture<D> {
    mixture.scaled(1.0 - obs.p_d)
}

/// Detected part of the intensity for a single measurement.
pub fn association_term<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    z: &Vector<M>,
    obs: &ObservationModel<D, M>,
    offset: &Vector<M>,
) -> Result<GaussianMixture<D>> {
    let shifted = z - offset;
    let mut out = GaussianMixture::empty();
    if obs.p_d == 0.0 {
        return Ok(out);
    }
    for c in mixture.iter() {
        let cache = MeasurementCache::new(c, &obs.h, &obs.r)?;
        let q = cache.density(&shifted);
        out.components.push(GaussianComponent { weight: c.weight * obs.p_d * q, mean: cache.posterior_mean(&c.mean, &shifted), cov: cache.posterior_cov });
    }
    Ok(out)
}

/// Association structure of a predicted intensity against a measurement set.
#[derive(Debug, Clone)]
pub struct Associations<const D: usize, const M: usize> {
    /// Predicted intensity mass.
    pub mass: f64,
    /// `μ^φ(X)`.
    pub missed_mass: f64,
    /// `μ^z(X)` per measurement.
    pub assoc_mass: Vec<f64>,
    /// Per measurement: `(component index, w_i · p_d · q_i(z))` for non-negligible pairs.
    pub hits: Vec<Vec<(usize, f64)>>,
    shifted: Vec<Vector<M>>,
    caches: Vec<MeasurementCache<D, M>>,
}

impl<const D: usize, const M: usize> Associations<D, M> {
    pub fn compute(mixture: &GaussianMixture<D>, measurements: &[Vector<M>], obs: &ObservationModel<D, M>, offset: &Vector<M>) -> Result<Self> {
        let caches = mixture.iter().map(|c| MeasurementCache::new(c, &obs.h, &obs.r)).collect::<Result<Vec<_>>>()?;
        let shifted: Vec<Vector<M>> = measurements.iter().map(|z| z - offset).collect();
        let mut hits = Vec::with_capacity(shifted.len());
        let mut assoc_mass = Vec::with_capacity(shifted.len());
        for z in &shifted {
            let mut row = Vec::new();
            let mut total = 0.0;
            if obs.p_d > 0.0 {
                for (i, (c, cache)) in mixture.iter().zip(&caches).enumerate() {
                    let q = cache.density(z);
                    if q > 0.0 && c.weight > 0.0 {
                        let w = c.weight * obs.p_d * q;
                        total += w;
                        row.push((i, w));
                    }
                }
            }
            assoc_mass.push(total);
            hits.push(row);
        }
        let mass = mixture.mass();
        Ok(Associations { mass, missed_mass: (1.0 - obs.p_d) * mass, assoc_mass, hits, shifted, caches })
    }

    pub fn len(&self) -> usize {
        self.shifted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifted.is_empty()
    }

    /// Posterior intensity `missed_factor · μ^φ + Σ_z factor_z · μ^z`.
    pub fn posterior(&self, mixture: &GaussianMixture<D>, p_d: f64, missed_factor: f64, z_factors: &[f64]) -> GaussianMixture<D> {
        let mut out = Vec::with_capacity(mixture.len() + self.hits.iter().map(Vec::len).sum::<usize>());
        let missed_scale = (1.0 - p_d) * missed_factor;
        if missed_scale > 0.0 {
            for c in mixture.iter() {
                out.push(GaussianComponent { weight: c.weight * missed_scale, mean: c.mean, cov: c.cov });
            }
        }
        for (zi, row) in self.hits.iter().enumerate() {
            let factor = z_factors[zi];
            if !(factor > 0.0) {
                continue;
            }
            let z = &self.shifted[zi];
            for &(i, w) in row {
                let cache = &self.caches[i];
                out.push(GaussianComponent { weight: w * factor, mean: cache.posterior_mean(&mixture.components[i].mean, z), cov: cache.posterior_cov });
            }
        }
        GaussianMixture::new(out)
    }
}
