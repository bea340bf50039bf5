//! Experiment orchestration: Monte Carlo runs over (filter, likelihood)
//! variants, sensor RMSE and cardinality metrics, stage timings, CSV output.

use crate::cardinality::{CardinalityModel, ClutterModel, Window};
use crate::error::{Error, Result};
use crate::filters::{BirthModel, FilterKind, FilterModels, MotionModel, ObservationModel};
use crate::gm::{GaussianComponent, GaussianMixture, Matrix, ReductionConfig, Vector};
use crate::scenario::{generate_measurements, ncv_model, position, simulate_truth, Experiment, MeasurementFrame, ScenarioConfig, ScenarioTruth};
use crate::smc::{drift, stream_seed, Diagnostics, LikelihoodKind, ParentFilter, Resampling, SensorState, SmcConfig, StageTimes};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub filter: FilterKind,
    pub likelihood: LikelihoodKind,
}

impl Variant {
    pub fn name(&self) -> String {
        format!("{}-{}", self.filter.name(), self.likelihood.name())
    }
}

/// Filter-side model parameters. These may differ from the simulation
/// (Experiment 2 deliberately mismatches birth and death).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub p_s: f64,
    pub p_d: f64,
    pub target_accel: f64,
    pub birth_mean: f64,
    /// Birth cardinality variance; the PHD filter only uses the mean.
    pub birth_variance: f64,
    pub birth_pos_std: f64,
    pub birth_vel_std: f64,
    pub clutter_rate: f64,
    pub meas_std: f64,
    pub n_max: usize,
    pub reduction: ReductionConfig,
}

impl FilterParams {
    pub fn for_scenario(s: &ScenarioConfig) -> Self {
        let width = s.window.max[0] - s.window.min[0];
        let base = FilterParams {
            p_s: s.p_s,
            p_d: s.p_d,
            target_accel: s.target_accel,
            birth_mean: s.birth_rate,
            birth_variance: s.birth_rate,
            birth_pos_std: width / 12f64.sqrt(),
            birth_vel_std: s.initial_velocity_std,
            clutter_rate: s.clutter_rate,
            meas_std: s.meas_std,
            n_max: 160,
            reduction: ReductionConfig::default(),
        };
        match s.experiment {
            Experiment::E1 => base,
            _ => FilterParams { p_s: 0.99, birth_mean: 2.0, birth_variance: 20.0, n_max: 64, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub filter_params: FilterParams,
    pub filters: Vec<FilterKind>,
    pub likelihoods: Vec<LikelihoodKind>,
    pub runs: usize,
    pub particles: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub resampling: Resampling,
    pub resample_fraction: f64,
    /// One ground truth for all runs (Experiment 1 protocol); otherwise a
    /// fresh truth per run.
    pub shared_truth: bool,
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        let scenario = ScenarioConfig::new(experiment);
        RunConfig {
            filter_params: FilterParams::for_scenario(&scenario),
            scenario,
            filters: FilterKind::ALL.to_vec(),
            likelihoods: LikelihoodKind::ALL.to_vec(),
            runs: 10,
            particles: 300,
            seed: 1,
            out: None,
            resampling: Resampling::Multinomial,
            resample_fraction: 0.5,
            shared_truth: experiment == Experiment::E1,
            parallel: true,
        }
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &filter in &self.filters {
            for &likelihood in &self.likelihoods {
                out.push(Variant { filter, likelihood });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.particles == 0 {
            return Err(Error::Config("particles must be at least 1".into()));
        }
        if self.filters.is_empty() || self.likelihoods.is_empty() {
            return Err(Error::Config("no filter or likelihood selected".into()));
        }
        Ok(())
    }

    /// Builds a configuration from ordered `key = value` pairs; later pairs
    /// override earlier ones. `experiment` selects the defaults and is
    /// applied first wherever it appears. Filter parameters follow the
    /// simulation settings unless set through their own keys.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let experiment = match pairs.iter().rev().find(|(k, _)| k == "experiment") {
            Some((_, v)) => v.parse()?,
            None => Experiment::E1,
        };
        let mut cfg = RunConfig::new(experiment);
        let is_filter_key = |k: &str| k.starts_with("filter_") || FILTER_KEYS.contains(&k);
        for (k, v) in pairs.iter().filter(|(k, _)| !is_filter_key(k)) {
            cfg.set(k, v)?;
        }
        cfg.filter_params = FilterParams::for_scenario(&cfg.scenario);
        for (k, v) in pairs.iter().filter(|(k, _)| is_filter_key(k)) {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
            }
        }
        let s = &mut self.scenario;
        let f = &mut self.filter_params;
        match key {
            "experiment" => {}
            "filter" => self.filters = parse_filters(value)?,
            "likelihood" => self.likelihoods = parse_likelihoods(value)?,
            "runs" => self.runs = num(key, value)?,
            "particles" => self.particles = num(key, value)?,
            "steps" => s.steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "resampling" => self.resampling = value.parse()?,
            "resample_fraction" => self.resample_fraction = num(key, value)?,
            "shared_truth" => self.shared_truth = flag(key, value)?,
            "parallel" => self.parallel = flag(key, value)?,
            "window_width" | "window_height" => {
                let x: f64 = num(key, value)?;
                let (w, h) = (s.window.max[0] - s.window.min[0], s.window.max[1] - s.window.min[1]);
                s.window = if key == "window_width" { Window::centered(x, h) } else { Window::centered(w, x) };
            }
            "target_accel" => s.target_accel = num(key, value)?,
            "sensor_accel" => s.sensor_accel = num(key, value)?,
            "p_s" => s.p_s = num(key, value)?,
            "p_d" => s.p_d = num(key, value)?,
            "birth_rate" => s.birth_rate = num(key, value)?,
            "initial_velocity_std" => s.initial_velocity_std = num(key, value)?,
            "clutter_rate" => s.clutter_rate = num(key, value)?,
            "meas_std" => s.meas_std = num(key, value)?,
            "e2_initial" => s.e2_initial = num(key, value)?,
            "e2_switch_step" => s.e2_switch_step = num(key, value)?,
            "e2_after" => s.e2_after = num(key, value)?,
            "filter_p_s" => f.p_s = num(key, value)?,
            "filter_p_d" => f.p_d = num(key, value)?,
            "filter_target_accel" => f.target_accel = num(key, value)?,
            "filter_birth_mean" => f.birth_mean = num(key, value)?,
            "filter_birth_variance" => f.birth_variance = num(key, value)?,
            "filter_birth_pos_std" => f.birth_pos_std = num(key, value)?,
            "filter_birth_vel_std" => f.birth_vel_std = num(key, value)?,
            "filter_clutter_rate" => f.clutter_rate = num(key, value)?,
            "filter_meas_std" => f.meas_std = num(key, value)?,
            "n_max" => f.n_max = num(key, value)?,
            "prune_threshold" => f.reduction.prune_threshold = num(key, value)?,
            "merge_distance" => f.reduction.merge_distance = num(key, value)?,
            "max_components" => f.reduction.max_components = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

const FILTER_KEYS: [&str; 4] = ["n_max", "prune_threshold", "merge_distance", "max_components"];

pub fn parse_filters(v: &str) -> Result<Vec<FilterKind>> {
    if v.eq_ignore_ascii_case("all") {
        return Ok(FilterKind::ALL.to_vec());
    }
    v.split(',').map(|s| s.trim().parse()).collect()
}

pub fn parse_likelihoods(v: &str) -> Result<Vec<LikelihoodKind>> {
    if v.eq_ignore_ascii_case("both") {
        return Ok(LikelihoodKind::ALL.to_vec());
    }
    v.split(',').map(|s| s.trim().parse()).collect()
}

/// Flat `key = value` text; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Target dynamics, birth, detection and clutter models seen by the filters.
pub fn filter_models(scenario: &ScenarioConfig, params: &FilterParams, kind: FilterKind) -> Result<FilterModels<4, 2>> {
    let (f, q) = ncv_model(scenario.dt, params.target_accel);
    let mut h = Matrix::<2, 4>::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    let r = Matrix::<2, 2>::identity() * params.meas_std.powi(2);
    let (ps, vs) = (params.birth_pos_std.powi(2), params.birth_vel_std.powi(2));
    let cov = Matrix::<4, 4>::from_diagonal(&Vector::<4>::new(ps, ps, vs, vs));
    let intensity = GaussianMixture::new(vec![GaussianComponent::new(params.birth_mean, Vector::<4>::zeros(), cov)]);
    let cardinality = match kind {
        FilterKind::Phd => CardinalityModel::Poisson { rate: params.birth_mean },
        _ => CardinalityModel::from_moments(params.birth_mean, params.birth_variance)?,
    };
    FilterModels::new(
        MotionModel { f, q, p_s: params.p_s },
        BirthModel::new(intensity, cardinality)?,
        ObservationModel { h, r, p_d: params.p_d },
        ClutterModel::poisson(params.clutter_rate, scenario.window),
        params.reduction,
        params.n_max,
    )
}

pub fn smc_config(cfg: &RunConfig, variant: Variant) -> SmcConfig {
    let (f, q) = ncv_model(cfg.scenario.dt, cfg.scenario.sensor_accel);
    SmcConfig {
        particles: cfg.particles,
        resample_fraction: cfg.resample_fraction,
        resampling: cfg.resampling,
        parallel: cfg.parallel,
        ..SmcConfig::new(variant.filter, variant.likelihood, f, q)
    }
}

const TRUTH_STREAM: u64 = 0;
const FRAMES_STREAM: u64 = 1;
const FILTER_STREAM: u64 = 2;

/// Ground truth and measurement frames of Monte Carlo run `run`.
pub fn scenario_for_run(cfg: &RunConfig, run: usize) -> Result<(ScenarioTruth, Vec<MeasurementFrame>)> {
    let truth_run = if cfg.shared_truth { 0 } else { run as u64 };
    let truth = simulate_truth(&cfg.scenario, &mut ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, truth_run, TRUTH_STREAM)))?;
    let frames = generate_measurements(&truth, &cfg.scenario, &mut ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, run as u64, FRAMES_STREAM)));
    Ok((truth, frames))
}

/// Output of one filter over one run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub sensor: Vec<SensorState>,
    pub cardinality: Vec<f64>,
    pub times: StageTimes,
    pub diagnostics: Diagnostics,
    /// Set when the filter degenerated; the run is then excluded.
    pub flagged: Option<String>,
}

pub fn run_filter(cfg: &RunConfig, variant: Variant, frames: &[MeasurementFrame], seed: u64) -> Result<RunTrace> {
    let models = filter_models(&cfg.scenario, &cfg.filter_params, variant.filter)?;
    let mut filter = ParentFilter::new(smc_config(cfg, variant), SensorState::zeros(), cfg.filter_params.n_max, seed)?;
    let mut trace = RunTrace { sensor: Vec::new(), cardinality: Vec::new(), times: StageTimes::default(), diagnostics: Diagnostics::default(), flagged: None };
    for frame in frames {
        match filter.step(&frame.measurements, &models) {
            Ok(est) => {
                trace.sensor.push(est.sensor);
                trace.cardinality.push(est.cardinality);
            }
            Err(Error::DegenerateFilter(msg)) => {
                trace.flagged = Some(format!("step {}: {msg}", frame.step));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    trace.times = filter.times;
    trace.diagnostics = filter.diagnostics;
    Ok(trace)
}

/// Per-step `sqrt(mean over runs of ‖ŷ_k − y_k‖²)` over position components.
pub fn compute_rmse(estimates: &[Vec<Vector<2>>], truth: &[Vec<Vector<2>>]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: estimates.len() });
    }
    let Some(first) = truth.first() else { return Ok(Vec::new()) };
    let steps = first.len();
    for (e, t) in estimates.iter().zip(truth) {
        if e.len() != steps || t.len() != steps {
            return Err(Error::LengthMismatch { expected: steps, got: e.len().min(t.len()) });
        }
    }
    let runs = truth.len() as f64;
    Ok((0..steps)
        .map(|k| (estimates.iter().zip(truth).map(|(e, t)| (e[k] - t[k]).norm_squared()).sum::<f64>() / runs).sqrt())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantMetrics {
    pub name: String,
    pub rmse: Vec<f64>,
    pub cardinality: Vec<f64>,
    /// Mean seconds per time step, summed over particles.
    pub times: StageTimes,
    pub flagged: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub steps: usize,
    /// True target count, averaged over runs.
    pub truth_cardinality: Vec<f64>,
    pub variants: Vec<VariantMetrics>,
}

impl MetricsTable {
    pub fn variant(&self, name: &str) -> Option<&VariantMetrics> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn merge_diagnostics(acc: &mut Diagnostics, d: &Diagnostics) {
    acc.max_card_sum_error = acc.max_card_sum_error.max(d.max_card_sum_error);
    acc.max_weight_sum_error = acc.max_weight_sum_error.max(d.max_weight_sum_error);
    acc.variance_clamps += d.variance_clamps;
    acc.particle_failures += d.particle_failures;
    acc.resamples += d.resamples;
    acc.min_ess = if acc.min_ess == 0.0 { d.min_ess } else { acc.min_ess.min(d.min_ess) };
}

fn map_jobs<T: Send>(jobs: Vec<(usize, usize)>, parallel: bool, f: impl Fn((usize, usize)) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return jobs.into_par_iter().map(f).collect();
    }
    let _ = parallel;
    jobs.into_iter().map(f).collect()
}

pub fn run_experiment(cfg: &RunConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    let scenarios: Vec<(ScenarioTruth, Vec<MeasurementFrame>)> = (0..cfg.runs).map(|r| scenario_for_run(cfg, r)).collect::<Result<_>>()?;
    run_on_scenarios(cfg, &scenarios)
}

/// Runs every variant on the given per-run scenarios (`cfg.runs` is ignored).
pub fn run_on_scenarios(cfg: &RunConfig, scenarios: &[(ScenarioTruth, Vec<MeasurementFrame>)]) -> Result<MetricsTable> {
    let runs = scenarios.len();
    if runs == 0 {
        return Err(Error::Config("no scenarios to run".into()));
    }
    let steps = scenarios[0].0.steps();
    if scenarios.iter().any(|(t, f)| t.steps() != steps || f.len() != steps) {
        return Err(Error::Config("scenarios must share one step count with their frames".into()));
    }
    let variants = cfg.variants();
    let jobs: Vec<(usize, usize)> = (0..variants.len()).flat_map(|v| (0..runs).map(move |r| (v, r))).collect();
    let traces = map_jobs(jobs, cfg.parallel, |(v, r)| {
        run_filter(cfg, variants[v], &scenarios[r].1, stream_seed(cfg.seed, r as u64, FILTER_STREAM))
    });
    let truth_cardinality: Vec<f64> = (0..steps).map(|k| scenarios.iter().map(|(t, _)| t.count(k) as f64).sum::<f64>() / runs as f64).collect();
    let truth_pos: Vec<Vec<Vector<2>>> = scenarios.iter().map(|(t, _)| t.sensor.iter().map(position).collect()).collect();

    let mut traces = traces.into_iter();
    let mut out = Vec::with_capacity(variants.len());
    for v in &variants {
        let mut est = Vec::new();
        let mut truth = Vec::new();
        let mut card = vec![0.0; steps];
        let mut times = StageTimes::default();
        let mut diagnostics = Diagnostics::default();
        let mut flagged = 0;
        for r in 0..runs {
            let trace = traces.next().expect("one trace per job")?;
            merge_diagnostics(&mut diagnostics, &trace.diagnostics);
            if trace.flagged.is_some() {
                flagged += 1;
                continue;
            }
            times += trace.times;
            for (c, x) in card.iter_mut().zip(&trace.cardinality) {
                *c += x;
            }
            est.push(trace.sensor.iter().map(drift).collect::<Vec<_>>());
            truth.push(truth_pos[r].clone());
        }
        let kept = est.len();
        let (rmse, cardinality) = if kept == 0 {
            (vec![f64::NAN; steps], vec![f64::NAN; steps])
        } else {
            (compute_rmse(&est, &truth)?, card.iter().map(|c| c / kept as f64).collect())
        };
        let calls = (kept * steps).max(1) as f64;
        let times = StageTimes { predict: times.predict / calls, update: times.update / calls, likelihood: times.likelihood / calls };
        out.push(VariantMetrics { name: v.name(), rmse, cardinality, times, flagged, diagnostics });
    }
    Ok(MetricsTable { steps, truth_cardinality, variants: out })
}

pub const STAGES: [&str; 3] = ["prediction", "update", "likelihood"];

pub fn rmse_csv(table: &MetricsTable) -> String {
    let mut out = String::from("step");
    for v in &table.variants {
        let _ = write!(out, ",{}", v.name);
    }
    out.push('\n');
    for k in 0..table.steps {
        let _ = write!(out, "{k}");
        for v in &table.variants {
            let _ = write!(out, ",{:?}", v.rmse[k]);
        }
        out.push('\n');
    }
    out
}

pub fn card_csv(table: &MetricsTable) -> String {
    let mut out = String::from("step,truth");
    for v in &table.variants {
        let _ = write!(out, ",{}", v.name);
    }
    out.push('\n');
    for k in 0..table.steps {
        let _ = write!(out, "{k},{:?}", table.truth_cardinality[k]);
        for v in &table.variants {
            let _ = write!(out, ",{:?}", v.cardinality[k]);
        }
        out.push('\n');
    }
    out
}

pub fn runtime_csv(table: &MetricsTable) -> String {
    let mut out = String::from("variant,stage,seconds\n");
    for v in &table.variants {
        let t = [v.times.predict, v.times.update, v.times.likelihood];
        for (stage, s) in STAGES.iter().zip(t) {
            let _ = writeln!(out, "{},{stage},{s:?}", v.name);
        }
    }
    out
}

pub fn emit_csv(table: &MetricsTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rmse.csv"), rmse_csv(table))?;
    std::fs::write(dir.join("card.csv"), card_csv(table))?;
    std::fs::write(dir.join("runtime.csv"), runtime_csv(table))?;
    Ok(())
}

/// Header names and columns (excluding `step`) of a numeric CSV.
pub fn parse_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.split(',').map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("step") {
        return Err(Error::Parse("first column must be 'step'".into()));
    }
    let mut cols = vec![Vec::new(); header.len() - 1];
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse(format!("row {}: expected {} columns", i + 1, header.len())));
        }
        if fields[0].trim().parse::<usize>().ok() != Some(i) {
            return Err(Error::Parse(format!("row {}: step out of order", i + 1)));
        }
        for (c, f) in cols.iter_mut().zip(&fields[1..]) {
            c.push(f.trim().parse().map_err(|_| Error::Parse(format!("row {}: cannot parse '{f}'", i + 1)))?);
        }
    }
    Ok((header[1..].to_vec(), cols))
}

pub fn parse_runtime_csv(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("variant,stage,seconds") {
        return Err(Error::Parse("unexpected runtime header".into()));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            match f.as_slice() {
                [v, s, t] => Ok((v.to_string(), s.to_string(), t.parse().map_err(|_| Error::Parse(format!("cannot parse '{t}'")))?)),
                _ => Err(Error::Parse(format!("malformed runtime row '{l}'"))),
            }
        })
        .collect()
}

/// Rebuilds the table from the three CSV files; diagnostics and flag counts
/// are not stored and come back as defaults.
pub fn read_csv(dir: &Path) -> Result<MetricsTable> {
    let (names, rmse) = parse_numeric_csv(&std::fs::read_to_string(dir.join("rmse.csv"))?)?;
    let (card_names, mut card) = parse_numeric_csv(&std::fs::read_to_string(dir.join("card.csv"))?)?;
    if card_names.first().map(String::as_str) != Some("truth") || card_names[1..] != names[..] {
        return Err(Error::Parse("card.csv columns do not match rmse.csv".into()));
    }
    let runtime = parse_runtime_csv(&std::fs::read_to_string(dir.join("runtime.csv"))?)?;
    let truth_cardinality = card.remove(0);
    let steps = truth_cardinality.len();
    let variants = names
        .into_iter()
        .zip(rmse)
        .zip(card)
        .map(|((name, rmse), cardinality)| {
            let stage = |s: &str| runtime.iter().find(|(v, st, _)| *v == name && st == s).map(|r| r.2).unwrap_or(f64::NAN);
            let times = StageTimes { predict: stage(STAGES[0]), update: stage(STAGES[1]), likelihood: stage(STAGES[2]) };
            VariantMetrics { name, rmse, cardinality, times, flagged: 0, diagnostics: Diagnostics::default() }
        })
        .collect();
    Ok(MetricsTable { steps, truth_cardinality, variants })
}
