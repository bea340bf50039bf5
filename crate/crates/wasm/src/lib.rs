//! Browser bindings: a Panjer cardinality explorer, a likelihood surface over
//! sensor offsets, and a step-by-step sensor tracker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctrack::assoc::{l2_likelihood, GatingConfig};
use sctrack::cardinality::{truncate_to_dist, CardinalityModel, ClutterModel, Window};
use sctrack::filters::{cphd_likelihood, phd_likelihood, sophd_likelihood, FilterKind, FilterModels, ObservationModel};
use sctrack::gm::{GaussianComponent, GaussianMixture, Matrix, Vector};
use sctrack::harness::{filter_models, scenario_for_run, smc_config, RunConfig, Variant};
use sctrack::scenario::{position, Experiment, MeasurementFrame, ScenarioTruth};
use sctrack::smc::{LikelihoodKind, ParentFilter};
use wasm_bindgen::prelude::*;

fn js_err(e: sctrack::Error) -> JsValue {
    JsValue::from_str(&format!("{}: {e}", e.kind()))
}

fn parse<T: std::str::FromStr<Err = sctrack::Error>>(s: &str) -> Result<T, JsValue> {
    s.parse().map_err(js_err)
}

/// Cardinality probabilities on `0..=n_max` of the Panjer law with the given
/// mean and variance (binomial, Poisson or negative binomial).
#[wasm_bindgen]
pub fn panjer_pmf(mean: f64, variance: f64, n_max: usize) -> Result<Vec<f64>, JsValue> {
    let model = CardinalityModel::from_moments(mean, variance).map_err(js_err)?;
    let t = truncate_to_dist(&model, n_max).map_err(js_err)?;
    Ok(t.dist.probs().to_vec())
}

/// Log-likelihood of one synthetic frame as a function of the sensor offset.
///
/// Returns `resolution²` values in row-major order over
/// `[-half_width, half_width]²`, followed by the true offset `(x, y)`.
#[wasm_bindgen]
pub fn likelihood_surface(filter: &str, likelihood: &str, seed: u32, targets: usize, half_width: f64, resolution: usize) -> Result<Vec<f64>, JsValue> {
    let kind: FilterKind = parse(filter)?;
    let lik: LikelihoodKind = parse(likelihood)?;
    if resolution < 2 || !(half_width > 0.0) {
        return Err(JsValue::from_str("degenerate_parameter: resolution >= 2 and half_width > 0 required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let window = Window::centered(60.0, 60.0);
    let clutter = ClutterModel::poisson(5.0, window);
    let obs = ObservationModel { h: Matrix::<2, 2>::identity(), r: Matrix::<2, 2>::identity() * 0.05, p_d: 0.95 };
    let truth: Vec<Vector<2>> = (0..targets).map(|_| Vector::<2>::new(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0))).collect();
    let offset = Vector::<2>::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) * half_width;

    let mut z = Vec::new();
    for x in &truth {
        if rng.random::<f64>() < obs.p_d {
            z.push(x + offset + Vector::<2>::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
        }
    }
    for _ in 0..5 {
        z.push(Vector::<2>::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)));
    }

    // predicted intensity: one unit component per target, slightly blurred
    let mix = GaussianMixture::new(truth.iter().map(|x| GaussianComponent::new(1.0, *x, Matrix::<2, 2>::identity() * 0.5)).collect());
    let mass = mix.mass();
    let card = truncate_to_dist(&CardinalityModel::Poisson { rate: mass }, 4 * targets + 20).map_err(js_err)?.dist;
    let gating = GatingConfig::default();

    let mut out = Vec::with_capacity(resolution * resolution + 2);
    for i in 0..resolution {
        for j in 0..resolution {
            let step = 2.0 * half_width / (resolution - 1) as f64;
            let y = Vector::<2>::new(-half_width + j as f64 * step, half_width - i as f64 * step);
            let value = match (lik, kind) {
                (LikelihoodKind::L2, _) => l2_likelihood(&mix, &z, &obs, &clutter, &y, false, &gating).map(|l| l.ln_likelihood),
                (LikelihoodKind::L1, FilterKind::Phd) => phd_likelihood(&mix, &z, &obs, &clutter, &y),
                (LikelihoodKind::L1, FilterKind::SoPhd) => sophd_likelihood(&mix, mass, &z, &obs, &clutter, &y),
                (LikelihoodKind::L1, FilterKind::Cphd) => cphd_likelihood(&mix, &card, &z, &obs, &clutter, &y),
            };
            out.push(value.map_err(js_err)?);
        }
    }
    out.push(offset[0]);
    out.push(offset[1]);
    Ok(out)
}

/// A single Monte Carlo run stepped from the page.
#[wasm_bindgen]
pub struct Tracker {
    filter: ParentFilter,
    models: FilterModels<4, 2>,
    truth: ScenarioTruth,
    frames: Vec<MeasurementFrame>,
    k: usize,
    sq_err: f64,
}

#[wasm_bindgen]
impl Tracker {
    #[wasm_bindgen(constructor)]
    pub fn new(experiment: &str, filter: &str, likelihood: &str, particles: usize, steps: usize, seed: u32) -> Result<Tracker, JsValue> {
        let exp: Experiment = parse(experiment)?;
        let variant = Variant { filter: parse(filter)?, likelihood: parse(likelihood)? };
        let mut cfg = RunConfig::new(exp);
        cfg.particles = particles;
        cfg.scenario.steps = steps;
        cfg.seed = seed as u64;
        cfg.parallel = false;
        cfg.validate().map_err(js_err)?;
        let (truth, frames) = scenario_for_run(&cfg, 0).map_err(js_err)?;
        let models = filter_models(&cfg.scenario, &cfg.filter_params, variant.filter).map_err(js_err)?;
        let filter = ParentFilter::new(smc_config(&cfg, variant), Vector::<4>::zeros(), cfg.filter_params.n_max, seed as u64).map_err(js_err)?;
        Ok(Tracker { filter, models, truth, frames, k: 0, sq_err: 0.0 })
    }

    pub fn done(&self) -> bool {
        self.k >= self.frames.len()
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    /// Advances one step and returns `[est_x, est_y, true_x, true_y,
    /// est_count, true_count, mean_squared_error]`.
    pub fn step(&mut self) -> Result<Vec<f64>, JsValue> {
        let frame = self.frames.get(self.k).ok_or_else(|| JsValue::from_str("finished: no frames left"))?;
        let est = self.filter.step(&frame.measurements, &self.models).map_err(js_err)?;
        let truth = position(&self.truth.sensor[self.k]);
        let e = position(&est.sensor);
        self.sq_err += (e - truth).norm_squared();
        let count = self.truth.count(self.k) as f64;
        self.k += 1;
        Ok(vec![e[0], e[1], truth[0], truth[1], est.cardinality, count, self.sq_err / self.k as f64])
    }

    /// Measurements of the last processed step, flattened `x0, y0, x1, …`.
    pub fn measurements(&self) -> Vec<f64> {
        self.k.checked_sub(1).map_or_else(Vec::new, |k| self.frames[k].measurements.iter().flat_map(|z| [z[0], z[1]]).collect())
    }

    /// True target positions of the last processed step, in the world frame.
    pub fn targets(&self) -> Vec<f64> {
        self.k.checked_sub(1).map_or_else(Vec::new, |k| self.truth.alive(k).flat_map(|(_, x)| [x[0], x[1]]).collect())
    }

    /// Target intensity of the heaviest particle: `x, y, weight` per component.
    pub fn intensity(&self) -> Vec<f64> {
        let Some(best) = self.filter.particles.iter().max_by(|a, b| a.w.total_cmp(&b.w)) else {
            return Vec::new();
        };
        best.theta.mixture().iter().filter(|c| c.weight > 0.05).flat_map(|c| [c.mean[0], c.mean[1], c.weight]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_is_normalized() {
        for (mean, var) in [(5.0, 12.0), (5.0, 5.0), (4.0, 2.0)] {
            let p = panjer_pmf(mean, var, 80).unwrap();
            assert_eq!(p.len(), 81);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_peaks_near_true_offset() {
        let res = 21;
        let s = likelihood_surface("cphd", "l1", 3, 15, 4.0, res).unwrap();
        let (best, _) = s[..res * res].iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let step = 8.0 / (res - 1) as f64;
        let (x, y) = (-4.0 + (best % res) as f64 * step, 4.0 - (best / res) as f64 * step);
        assert!((x - s[res * res]).abs() <= step && (y - s[res * res + 1]).abs() <= step);
    }

    #[test]
    fn tracker_runs_to_the_end() {
        let mut t = Tracker::new("e2-birth", "sophd", "l2", 8, 5, 2).unwrap();
        let mut last = Vec::new();
        while !t.done() {
            last = t.step().unwrap();
        }
        assert_eq!(t.step_index(), 5);
        assert_eq!(last.len(), 7);
        assert!(last.iter().all(|v| v.is_finite()));
        assert_eq!(t.targets().len() % 2, 0);
    }
}
