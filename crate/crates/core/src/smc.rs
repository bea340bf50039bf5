//! Parent particle filter over the sensor state. Each particle carries the
//! daughter multi-object state conditioned on its sensor hypothesis.

use crate::assoc::{l2_likelihood, GatingConfig};
use crate::error::{Error, Result};
use crate::filters::{DaughterState, FilterKind, FilterModels};
use crate::gm::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::str::FromStr;

pub type SensorState = Vector<4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LikelihoodKind {
    /// Closed-form likelihood of the daughter filter.
    L1,
    /// Association likelihood on extracted targets.
    L2,
}

impl LikelihoodKind {
    pub const ALL: [LikelihoodKind; 2] = [LikelihoodKind::L1, LikelihoodKind::L2];

    pub fn name(&self) -> &'static str {
        match self {
            LikelihoodKind::L1 => "l1",
            LikelihoodKind::L2 => "l2",
        }
    }
}

impl FromStr for LikelihoodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LikelihoodKind::L1),
            "l2" => Ok(LikelihoodKind::L2),
            other => Err(Error::Parse(format!("unknown likelihood '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Independent roulette-wheel draws.
    #[default]
    Multinomial,
    Systematic,
}

impl FromStr for Resampling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "multinomial" | "roulette" => Ok(Resampling::Multinomial),
            "systematic" => Ok(Resampling::Systematic),
            other => Err(Error::Parse(format!("unknown resampling scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    pub particles: usize,
    /// Resample when ESS ≤ fraction · N.
    pub resample_fraction: f64,
    pub sensor_f: Matrix<4, 4>,
    pub sensor_q: Matrix<4, 4>,
    pub likelihood: LikelihoodKind,
    pub filter: FilterKind,
    pub resampling: Resampling,
    pub gating: GatingConfig,
    /// Run particle updates on the rayon pool when the feature is enabled.
    pub parallel: bool,
}

impl SmcConfig {
    pub fn new(filter: FilterKind, likelihood: LikelihoodKind, sensor_f: Matrix<4, 4>, sensor_q: Matrix<4, 4>) -> Self {
        SmcConfig {
            particles: 300,
            resample_fraction: 0.5,
            sensor_f,
            sensor_q,
            likelihood,
            filter,
            resampling: Resampling::Multinomial,
            gating: GatingConfig::default(),
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return Err(Error::Config(format!("resample fraction {} outside [0, 1]", self.resample_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentParticle {
    pub y: SensorState,
    pub w: f64,
    pub theta: DaughterState<4>,
}

/// Sensor drift seen in the measurements: the position part of the sensor state.
pub fn drift(y: &SensorState) -> Vector<2> {
    Vector::<2>::new(y[0], y[1])
}

/// Stream seed for `(seed, step, index)`, mixed SplitMix64-style so
/// neighbouring counters give unrelated streams.
pub fn stream_seed(seed: u64, step: u64, index: u64) -> u64 {
    let mut z = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, step: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, step, index))
}

const RESAMPLE_STREAM: u64 = u64::MAX;

/// Effective sample size `1/Σw²` of normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Normalize log-weights in place by max-shift; returns linear weights.
pub fn normalize_log_weights(ln_w: &[f64]) -> Result<Vec<f64>> {
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegenerateFilter("all particle weights vanished".into()));
    }
    let raw: Vec<f64> = ln_w.iter().map(|l| (l - max).exp()).collect();
    let total = crate::numeric::neumaier_sum(raw.iter().copied());
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Ancestor indices drawn proportionally to `weights`.
pub fn resample_indices<R: Rng + ?Sized>(weights: &[f64], scheme: Resampling, rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let pick = |u: f64| cdf.partition_point(|&c| c <= u * total).min(n - 1);
    match scheme {
        Resampling::Multinomial => (0..n).map(|_| pick(rng.random::<f64>())).collect(),
        Resampling::Systematic => {
            let u0: f64 = rng.random::<f64>() / n as f64;
            (0..n).map(|i| pick(u0 + i as f64 / n as f64)).collect()
        }
    }
}

/// Copies the drawn ancestors and resets weights to `1/N`.
pub fn resample<R: Rng + ?Sized>(particles: &[ParentParticle], scheme: Resampling, rng: &mut R) -> Vec<ParentParticle> {
    let weights: Vec<f64> = particles.iter().map(|p| p.w).collect();
    let n = particles.len() as f64;
    resample_indices(&weights, scheme, rng)
        .into_iter()
        .map(|i| ParentParticle { w: 1.0 / n, ..particles[i].clone() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub sensor: SensorState,
    pub cardinality: f64,
    /// Index of the heaviest particle.
    pub map_index: usize,
}

pub fn estimate(particles: &[ParentParticle]) -> Estimate {
    let mut sensor = SensorState::zeros();
    let mut cardinality = 0.0;
    let mut map_index = 0;
    for (i, p) in particles.iter().enumerate() {
        sensor += p.y * p.w;
        cardinality += p.w * p.theta.expected_cardinality();
        if p.w > particles[map_index].w {
            map_index = i;
        }
    }
    Estimate { sensor, cardinality, map_index }
}

/// Accumulated wall-clock seconds per stage, summed over particles.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub predict: f64,
    pub update: f64,
    pub likelihood: f64,
}

impl std::ops::AddAssign for StageTimes {
    fn add_assign(&mut self, o: Self) {
        self.predict += o.predict;
        self.update += o.update;
        self.likelihood += o.likelihood;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub max_card_sum_error: f64,
    pub variance_clamps: usize,
    pub max_weight_sum_error: f64,
    /// Particles whose daughter update or likelihood failed (weight set to 0).
    pub particle_failures: usize,
    pub resamples: usize,
    pub min_ess: f64,
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub struct Stopwatch(std::time::Instant);
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(std::time::Instant::now())
        }
        pub fn seconds(&self) -> f64 {
            self.0.elapsed().as_secs_f64()
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Stopwatch;
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }
        pub fn seconds(&self) -> f64 {
            0.0
        }
    }
}

use clock::Stopwatch;

struct ParticleStep {
    particle: ParentParticle,
    ln_lik: f64,
    times: StageTimes,
    card_sum_error: f64,
    clamped: bool,
    failed: bool,
}

fn advance(
    p: &ParentParticle,
    rng: &mut ChaCha8Rng,
    measurements: &[Vector<2>],
    models: &FilterModels<4, 2>,
    cfg: &SmcConfig,
    noise: &Matrix<4, 4>,
    first: bool,
) -> ParticleStep {
    let mut times = StageTimes::default();
    let clock = Stopwatch::start();
    let y = if first {
        p.y
    } else {
        let e = SensorState::from_fn(|_, _| StandardNormal.sample(rng));
        cfg.sensor_f * p.y + noise * e
    };
    let predicted = p.theta.predict(models);
    times.predict = clock.seconds();

    let offset = drift(&y);
    let clock = Stopwatch::start();
    let updated = predicted.update(measurements, &offset, models);
    times.update = clock.seconds();

    let clock = Stopwatch::start();
    let (theta, lik, card_sum_error, clamped) = match updated {
        Ok((theta, info)) => {
            let lik = match cfg.likelihood {
                LikelihoodKind::L1 => info.inputs.ln_likelihood(models),
                LikelihoodKind::L2 => l2_likelihood(predicted.mixture(), measurements, &models.obs, &models.clutter, &offset, first, &cfg.gating)
                    .map(|l| l.ln_likelihood),
            };
            (theta, lik, info.card_sum_error, info.variance_clamped)
        }
        Err(e) => (predicted, Err(e), 0.0, false),
    };
    times.likelihood = clock.seconds();
    let (ln_lik, failed) = match lik {
        Ok(l) if !l.is_nan() => (l, false),
        _ => (f64::NEG_INFINITY, true),
    };
    ParticleStep { particle: ParentParticle { y, w: p.w, theta }, ln_lik, times, card_sum_error, clamped, failed }
}

#[derive(Debug, Clone)]
pub struct ParentFilter {
    pub cfg: SmcConfig,
    pub particles: Vec<ParentParticle>,
    pub seed: u64,
    pub step: u64,
    pub times: StageTimes,
    pub diagnostics: Diagnostics,
    noise: Matrix<4, 4>,
}

impl ParentFilter {
    /// All particles start at `y0` with empty daughter states.
    pub fn new(cfg: SmcConfig, y0: SensorState, n_max: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let noise = cfg.sensor_q.cholesky().map(|c| c.l()).unwrap_or_else(|| psd_sqrt(&cfg.sensor_q));
        let n = cfg.particles;
        let theta = DaughterState::empty(cfg.filter, n_max);
        let particles = vec![ParentParticle { y: y0, w: 1.0 / n as f64, theta }; n];
        let diagnostics = Diagnostics { min_ess: n as f64, ..Default::default() };
        Ok(ParentFilter { cfg, particles, seed, step: 0, times: StageTimes::default(), diagnostics, noise })
    }

    /// One predict/update/weight/resample cycle. The first call does not move
    /// the sensor hypotheses.
    pub fn step(&mut self, measurements: &[Vector<2>], models: &FilterModels<4, 2>) -> Result<Estimate> {
        if measurements.iter().any(|z| !z.iter().all(|v| v.is_finite())) {
            return Err(Error::DegenerateParameter("non-finite measurement".into()));
        }
        let first = self.step == 0;
        let (seed, step, cfg, noise) = (self.seed, self.step, &self.cfg, &self.noise);
        let work = |(i, p): (usize, &ParentParticle)| {
            let mut rng = stream(seed, step, i as u64);
            advance(p, &mut rng, measurements, models, cfg, noise, first)
        };
        let results: Vec<ParticleStep> = map_particles(&self.particles, cfg.parallel, work);

        let mut ln_w = Vec::with_capacity(results.len());
        let mut particles = Vec::with_capacity(results.len());
        for r in results {
            self.times += r.times;
            self.diagnostics.max_card_sum_error = self.diagnostics.max_card_sum_error.max(r.card_sum_error);
            self.diagnostics.variance_clamps += r.clamped as usize;
            self.diagnostics.particle_failures += r.failed as usize;
            ln_w.push(r.particle.w.ln() + r.ln_lik);
            particles.push(r.particle);
        }
        let w = normalize_log_weights(&ln_w)?;
        for (p, w) in particles.iter_mut().zip(&w) {
            p.w = *w;
        }
        let sum_error = (crate::numeric::neumaier_sum(w.iter().copied()) - 1.0).abs();
        self.diagnostics.max_weight_sum_error = self.diagnostics.max_weight_sum_error.max(sum_error);
        let est = estimate(&particles);

        let n_eff = ess(&w);
        self.diagnostics.min_ess = self.diagnostics.min_ess.min(n_eff);
        if n_eff <= self.cfg.resample_fraction * particles.len() as f64 {
            let mut rng = stream(self.seed, self.step, RESAMPLE_STREAM);
            particles = resample(&particles, self.cfg.resampling, &mut rng);
            self.diagnostics.resamples += 1;
        }
        self.particles = particles;
        self.step += 1;
        Ok(est)
    }
}

#[cfg(feature = "parallel")]
fn map_particles<T, F>(particles: &[ParentParticle], parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn((usize, &ParentParticle)) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        particles.par_iter().enumerate().map(f).collect()
    } else {
        particles.iter().enumerate().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn map_particles<T, F>(particles: &[ParentParticle], _parallel: bool, f: F) -> Vec<T>
where
    F: Fn((usize, &ParentParticle)) -> T,
{
    particles.iter().enumerate().map(f).collect()
}

/// Square root of a symmetric PSD matrix via eigen-decomposition; used when
/// the noise covariance is singular (e.g. zero).
fn psd_sqrt(q: &Matrix<4, 4>) -> Matrix<4, 4> {
    let eig = q.symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix::<4, 4>::from_diagonal(&d) * eig.eigenvectors.transpose()
}
