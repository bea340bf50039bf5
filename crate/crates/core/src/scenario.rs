//! Ground truth and measurement simulation for the tracking experiments.

use crate::cardinality::{sample_cardinality, CardinalityModel, Window};
use crate::error::{Error, Result};
use crate::gm::{Matrix, Vector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::str::FromStr;

pub type State = Vector<4>;
pub type Measurement = Vector<2>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    E1,
    E2Death,
    E2Birth,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::E1 => "e1",
            Experiment::E2Death => "e2-death",
            Experiment::E2Birth => "e2-birth",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(Experiment::E1),
            "e2-death" | "e2_death" | "e2.1" => Ok(Experiment::E2Death),
            "e2-birth" | "e2_birth" | "e2.2" => Ok(Experiment::E2Birth),
            other => Err(Error::Parse(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub steps: usize,
    pub dt: f64,
    pub window: Window,
    pub target_accel: f64,
    pub sensor_accel: f64,
    /// Survival probability of E1 targets; E2 lifetimes are scripted.
    pub p_s: f64,
    pub p_d: f64,
    /// Mean number of E1 births per step.
    pub birth_rate: f64,
    pub initial_velocity_std: f64,
    pub clutter_rate: f64,
    pub meas_std: f64,
    /// Targets alive from the first step in E2.
    pub e2_initial: usize,
    /// Step at which the E2 population changes.
    pub e2_switch_step: usize,
    /// Population after the switch (1 for deaths, 30 for births).
    pub e2_after: usize,
}

impl ScenarioConfig {
    pub fn new(experiment: Experiment) -> Self {
        let base = ScenarioConfig {
            experiment,
            steps: 100,
            dt: 1.0,
            window: Window::centered(200.0, 200.0),
            target_accel: 0.3,
            sensor_accel: 0.2,
            p_s: 0.95,
            p_d: 0.99,
            birth_rate: 4.0,
            initial_velocity_std: 0.1,
            clutter_rate: 10.0,
            meas_std: 0.1,
            e2_initial: 15,
            e2_switch_step: 15,
            e2_after: 1,
        };
        match experiment {
            Experiment::E1 => base,
            Experiment::E2Death => ScenarioConfig { target_accel: 0.1, ..base },
            Experiment::E2Birth => ScenarioConfig { target_accel: 0.1, e2_after: 30, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [("p_s", self.p_s), ("p_d", self.p_d)];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let rates = [
            ("target_accel", self.target_accel),
            ("sensor_accel", self.sensor_accel),
            ("birth_rate", self.birth_rate),
            ("initial_velocity_std", self.initial_velocity_std),
            ("clutter_rate", self.clutter_rate),
            ("meas_std", self.meas_std),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if !(self.dt > 0.0) || self.window.area() <= 0.0 {
            return Err(Error::Config("time step and window area must be positive".into()));
        }
        if self.experiment != Experiment::E1 && self.e2_after < 1 && self.e2_switch_step < self.steps {
            return Err(Error::Config("E2 keeps at least one target".into()));
        }
        Ok(())
    }
}

/// Nearly-constant-velocity transition and process noise for state
/// `(x, y, vx, vy)` with white acceleration of standard deviation `sigma`.
pub fn ncv_model(dt: f64, sigma: f64) -> (Matrix<4, 4>, Matrix<4, 4>) {
    let mut f = Matrix::<4, 4>::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let q2 = sigma * sigma;
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut q = Matrix::<4, 4>::zeros();
    for i in 0..2 {
        q[(i, i)] = a * q2;
        q[(i, i + 2)] = b * q2;
        q[(i + 2, i)] = b * q2;
        q[(i + 2, i + 2)] = c * q2;
    }
    (f, q)
}

/// Position part of a 4-D state.
pub fn position(x: &State) -> Measurement {
    Vector::<2>::new(x[0], x[1])
}

fn gaussian_step<R: Rng + ?Sized>(x: &State, f: &Matrix<4, 4>, q_chol: &Matrix<4, 4>, rng: &mut R) -> State {
    let e = State::from_fn(|_, _| StandardNormal.sample(rng));
    f * x + q_chol * e
}

fn cholesky_or_zero(q: &Matrix<4, 4>) -> Matrix<4, 4> {
    nalgebra::Cholesky::new(*q).map(|c| c.l()).unwrap_or_else(Matrix::zeros)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrack {
    pub id: usize,
    pub birth_step: usize,
    /// States on consecutive steps from `birth_step`.
    pub states: Vec<State>,
}

impl TargetTrack {
    /// First step on which the target is no longer alive.
    pub fn death_step(&self) -> usize {
        self.birth_step + self.states.len()
    }

    pub fn state_at(&self, step: usize) -> Option<&State> {
        step.checked_sub(self.birth_step).and_then(|i| self.states.get(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub sensor: Vec<State>,
    pub targets: Vec<TargetTrack>,
}

impl ScenarioTruth {
    pub fn steps(&self) -> usize {
        self.sensor.len()
    }

    pub fn alive(&self, step: usize) -> impl Iterator<Item = (usize, &State)> {
        self.targets.iter().filter_map(move |t| t.state_at(step).map(|s| (t.id, s)))
    }

    pub fn count(&self, step: usize) -> usize {
        self.alive(step).count()
    }
}

fn new_target<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> State {
    let w = &cfg.window;
    let x = rng.random_range(w.min[0]..=w.max[0]);
    let y = rng.random_range(w.min[1]..=w.max[1]);
    let vx: f64 = StandardNormal.sample(rng);
    let vy: f64 = StandardNormal.sample(rng);
    State::new(x, y, vx * cfg.initial_velocity_std, vy * cfg.initial_velocity_std)
}

pub fn simulate_truth<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ScenarioTruth> {
    cfg.validate()?;
    let (f_t, q_t) = ncv_model(cfg.dt, cfg.target_accel);
    let (f_s, q_s) = ncv_model(cfg.dt, cfg.sensor_accel);
    let (lt, ls) = (cholesky_or_zero(&q_t), cholesky_or_zero(&q_s));

    let mut sensor = Vec::with_capacity(cfg.steps);
    let mut s = State::zeros();
    for k in 0..cfg.steps {
        if k > 0 {
            s = gaussian_step(&s, &f_s, &ls, rng);
        }
        sensor.push(s);
    }

    let mut finished: Vec<TargetTrack> = Vec::new();
    let mut alive: Vec<TargetTrack> = Vec::new();
    let mut next_id = 0;
    for k in 0..cfg.steps {
        // move or retire existing targets
        let mut still = Vec::with_capacity(alive.len());
        for mut t in alive.drain(..) {
            let survives = match cfg.experiment {
                Experiment::E1 => rng.random::<f64>() < cfg.p_s,
                Experiment::E2Death => !(k == cfg.e2_switch_step && t.id >= cfg.e2_after),
                Experiment::E2Birth => true,
            };
            if survives {
                let x = gaussian_step(t.states.last().expect("non-empty track"), &f_t, &lt, rng);
                t.states.push(x);
                still.push(t);
            } else {
                finished.push(t);
            }
        }
        alive = still;

        let births = match cfg.experiment {
            Experiment::E1 => sample_cardinality(&CardinalityModel::Poisson { rate: cfg.birth_rate }, rng),
            _ if k == 0 => cfg.e2_initial,
            Experiment::E2Birth if k == cfg.e2_switch_step => cfg.e2_after.saturating_sub(cfg.e2_initial),
            _ => 0,
        };
        for _ in 0..births {
            alive.push(TargetTrack { id: next_id, birth_step: k, states: vec![new_target(cfg, rng)] });
            next_id += 1;
        }
    }
    finished.extend(alive);
    finished.sort_by_key(|t| t.id);
    Ok(ScenarioTruth { sensor, targets: finished })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Target(usize),
    Clutter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub step: usize,
    pub measurements: Vec<Measurement>,
    /// Origin of each measurement; diagnostics only.
    pub provenance: Vec<Provenance>,
}

pub fn generate_measurements<R: Rng + ?Sized>(truth: &ScenarioTruth, cfg: &ScenarioConfig, rng: &mut R) -> Vec<MeasurementFrame> {
    let clutter_law = CardinalityModel::Poisson { rate: cfg.clutter_rate };
    (0..truth.steps())
        .map(|k| {
            let drift = position(&truth.sensor[k]);
            let mut items: Vec<(Measurement, Provenance)> = Vec::new();
            for (id, x) in truth.alive(k) {
                if rng.random::<f64>() < cfg.p_d {
                    let n = Measurement::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
                    items.push((position(x) + drift + n * cfg.meas_std, Provenance::Target(id)));
                }
            }
            let w = &cfg.window;
            for _ in 0..sample_cardinality(&clutter_law, rng) {
                let z = Measurement::new(rng.random_range(w.min[0]..=w.max[0]), rng.random_range(w.min[1]..=w.max[1]));
                items.push((z, Provenance::Clutter));
            }
            items.shuffle(rng);
            let (measurements, provenance) = items.into_iter().unzip();
            MeasurementFrame { step: k, measurements, provenance }
        })
        .collect()
}

/// Sensor rows in the truth CSV carry this id.
pub const SENSOR_ID: i64 = -1;
pub const TRUTH_HEADER: &str = "step,id,x,y,vx,vy";
pub const FRAMES_HEADER: &str = "step,x,y,provenance";

/// Truth as CSV: sensor rows (id −1) first, then targets by id and step.
pub fn truth_to_csv(truth: &ScenarioTruth) -> String {
    let mut out = String::new();
    out.push_str(TRUTH_HEADER);
    out.push('\n');
    let mut row = |step: usize, id: i64, s: &State| {
        let _ = writeln!(out, "{step},{id},{:?},{:?},{:?},{:?}", s[0], s[1], s[2], s[3]);
    };
    for (k, s) in truth.sensor.iter().enumerate() {
        row(k, SENSOR_ID, s);
    }
    for t in &truth.targets {
        for (i, s) in t.states.iter().enumerate() {
            row(t.birth_step + i, t.id as i64, s);
        }
    }
    out
}

pub fn frames_to_csv(frames: &[MeasurementFrame]) -> String {
    let mut out = String::new();
    out.push_str(FRAMES_HEADER);
    out.push('\n');
    for f in frames {
        for (z, p) in f.measurements.iter().zip(&f.provenance) {
            let tag = match p {
                Provenance::Target(id) => id.to_string(),
                Provenance::Clutter => "clutter".to_string(),
            };
            let _ = writeln!(out, "{},{:?},{:?},{tag}", f.step, z[0], z[1]);
        }
    }
    out
}

fn data_rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("expected header '{header}', found {:?}", other.map(|(_, l)| l)))),
    }
    Ok(lines.map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect())))
}

fn field<T: FromStr>(fields: &[&str], idx: usize, line: usize) -> Result<T> {
    let raw = fields.get(idx).ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", idx + 1)))?;
    raw.parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse '{raw}'")))
}

pub fn truth_from_csv(text: &str) -> Result<ScenarioTruth> {
    let mut sensor: Vec<(usize, State)> = Vec::new();
    let mut targets: Vec<TargetTrack> = Vec::new();
    for (line, f) in data_rows(text, TRUTH_HEADER)? {
        if f.len() != 6 {
            return Err(Error::Parse(format!("line {line}: expected 6 columns, found {}", f.len())));
        }
        let step: usize = field(&f, 0, line)?;
        let id: i64 = field(&f, 1, line)?;
        let s = State::new(field(&f, 2, line)?, field(&f, 3, line)?, field(&f, 4, line)?, field(&f, 5, line)?);
        if id == SENSOR_ID {
            sensor.push((step, s));
            continue;
        }
        let id = usize::try_from(id).map_err(|_| Error::Parse(format!("line {line}: invalid id {id}")))?;
        match targets.iter_mut().find(|t| t.id == id) {
            Some(t) if t.death_step() == step => t.states.push(s),
            Some(_) => return Err(Error::Parse(format!("line {line}: target {id} rows are not consecutive"))),
            None => targets.push(TargetTrack { id, birth_step: step, states: vec![s] }),
        }
    }
    sensor.sort_by_key(|(k, _)| *k);
    if sensor.iter().enumerate().any(|(i, (k, _))| i != *k) {
        return Err(Error::Parse("sensor rows must cover steps 0..n exactly once".into()));
    }
    targets.sort_by_key(|t| t.id);
    Ok(ScenarioTruth { sensor: sensor.into_iter().map(|(_, s)| s).collect(), targets })
}

/// Parses frames; `steps` frames are returned, empty where no rows exist.
pub fn frames_from_csv(text: &str, steps: usize) -> Result<Vec<MeasurementFrame>> {
    let mut frames: Vec<MeasurementFrame> = (0..steps).map(|step| MeasurementFrame { step, measurements: vec![], provenance: vec![] }).collect();
    for (line, f) in data_rows(text, FRAMES_HEADER)? {
        if f.len() != 4 {
            return Err(Error::Parse(format!("line {line}: expected 4 columns, found {}", f.len())));
        }
        let step: usize = field(&f, 0, line)?;
        let frame = frames.get_mut(step).ok_or_else(|| Error::Parse(format!("line {line}: step {step} beyond {steps}")))?;
        frame.measurements.push(Measurement::new(field(&f, 1, line)?, field(&f, 2, line)?));
        frame.provenance.push(match f[3] {
            "clutter" => Provenance::Clutter,
            _ => Provenance::Target(field(&f, 3, line)?),
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_gives_straight_lines() {
        let mut cfg = ScenarioConfig::new(Experiment::E2Death);
        cfg.target_accel = 0.0;
        let truth = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let t = &truth.targets[0];
        for w in t.states.windows(2) {
            assert!((w[1][0] - (w[0][0] + w[0][2])).abs() < 1e-12);
            assert_eq!(w[1][2], w[0][2]);
        }
    }

    #[test]
    fn e2_death_counts() {
        let cfg = ScenarioConfig::new(Experiment::E2Death);
        let truth = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let counts: Vec<usize> = (0..100).map(|k| truth.count(k)).collect();
        assert!(counts[..15].iter().all(|&c| c == 15));
        assert!(counts[15..].iter().all(|&c| c == 1));
    }

    #[test]
    fn e2_birth_counts() {
        let cfg = ScenarioConfig::new(Experiment::E2Birth);
        let truth = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!((0..15).all(|k| truth.count(k) == 15));
        assert!((15..100).all(|k| truth.count(k) == 30));
    }

    #[test]
    fn sensor_starts_at_origin() {
        let truth = simulate_truth(&ScenarioConfig::new(Experiment::E1), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(truth.sensor[0], State::zeros());
        assert_eq!(truth.sensor.len(), 100);
    }

    #[test]
    fn e1_birth_rate() {
        let mut cfg = ScenarioConfig::new(Experiment::E1);
        cfg.steps = 1000;
        let truth = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mean = truth.targets.len() as f64 / 1000.0;
        // Poisson(4) mean over 1000 steps: standard error 0.063
        assert!((mean - 4.0).abs() < 0.2, "{mean}");
    }

    #[test]
    fn no_detections_no_clutter() {
        let mut cfg = ScenarioConfig::new(Experiment::E1);
        cfg.p_d = 0.0;
        cfg.clutter_rate = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth = simulate_truth(&cfg, &mut rng).unwrap();
        assert!(generate_measurements(&truth, &cfg, &mut rng).iter().all(|f| f.measurements.is_empty()));
    }

    #[test]
    fn noiseless_measurements_are_positions() {
        let mut cfg = ScenarioConfig::new(Experiment::E2Birth);
        cfg.p_d = 1.0;
        cfg.clutter_rate = 0.0;
        cfg.meas_std = 0.0;
        cfg.sensor_accel = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = simulate_truth(&cfg, &mut rng).unwrap();
        for f in generate_measurements(&truth, &cfg, &mut rng) {
            for (z, p) in f.measurements.iter().zip(&f.provenance) {
                let Provenance::Target(id) = p else { panic!("no clutter expected") };
                assert_eq!(*z, position(truth.targets[*id].state_at(f.step).unwrap()));
            }
        }
    }

    #[test]
    fn clutter_mean_count() {
        let mut cfg = ScenarioConfig::new(Experiment::E1);
        cfg.steps = 1000;
        cfg.p_d = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = simulate_truth(&cfg, &mut rng).unwrap();
        let frames = generate_measurements(&truth, &cfg, &mut rng);
        let mean = frames.iter().map(|f| f.measurements.len()).sum::<usize>() as f64 / 1000.0;
        assert!((mean - 10.0).abs() < 3.0 * (10.0f64 / 1000.0).sqrt(), "{mean}");
    }

    #[test]
    fn detection_rate() {
        let mut cfg = ScenarioConfig::new(Experiment::E2Birth);
        cfg.clutter_rate = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = simulate_truth(&cfg, &mut rng).unwrap();
        let frames = generate_measurements(&truth, &cfg, &mut rng);
        let detected: usize = frames.iter().map(|f| f.measurements.len()).sum();
        let alive: usize = (0..100).map(|k| truth.count(k)).sum();
        let p = detected as f64 / alive as f64;
        let sigma = (0.99 * 0.01 / alive as f64).sqrt();
        assert!((p - 0.99).abs() < 3.0 * sigma, "{p}");
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ScenarioConfig::new(Experiment::E1);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let truth = simulate_truth(&cfg, &mut rng).unwrap();
        let frames = generate_measurements(&truth, &cfg, &mut rng);
        assert_eq!(truth_from_csv(&truth_to_csv(&truth)).unwrap(), truth);
        assert_eq!(frames_from_csv(&frames_to_csv(&frames), 100).unwrap(), frames);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(matches!(truth_from_csv("a,b\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn determinism() {
        let cfg = ScenarioConfig::new(Experiment::E1);
        let a = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = simulate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
