//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stdout
//! (bypassing the test harness capture) and then asserts.
//!
//! The experiment grids are computed once and shared. A global lock keeps the
//! criteria sequential so the stage timings are not disturbed by other tests.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sctrack::cardinality::{truncate_to_dist, CardinalityDist, CardinalityModel, ClutterModel, Window};
use sctrack::filters::{cphd_likelihood, cphd_update, phd_likelihood, phd_update, sophd_likelihood, sophd_update, FilterKind, ObservationModel};
use sctrack::gm::{GaussianComponent, GaussianMixture};
use sctrack::harness::{card_csv, emit_csv, rmse_csv, run_experiment, MetricsTable, RunConfig};
use sctrack::oracle::{oracle_likelihood, random_instance, ClutterFamily, OracleInstance, OracleLaw, PriorFamily};
use sctrack::scenario::Experiment;
use sctrack::smc::LikelihoodKind;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

const ORACLE_REL_TOL: f64 = 1e-8;
const TOWER_REL_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-12;
const CARD_TOL: f64 = 3.0;
const E2_RECONVERGE_STEP: usize = 40;
const DIVERGENCE_ONSET: usize = 10;
const LAST_STEPS: usize = 20;

const E1_RUNS: usize = 10;
const E2_RUNS: usize = 10;
const PARTICLES: usize = 100;
const SEED: u64 = 1;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: usize, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id} [{name}]: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn experiment(exp: Experiment, runs: usize) -> MetricsTable {
    let mut cfg = RunConfig::new(exp);
    cfg.runs = runs;
    cfg.particles = PARTICLES;
    cfg.seed = SEED;
    run_experiment(&cfg).expect("experiment runs")
}

fn e1() -> &'static MetricsTable {
    static TABLE: OnceLock<MetricsTable> = OnceLock::new();
    TABLE.get_or_init(|| experiment(Experiment::E1, E1_RUNS))
}

fn name(f: FilterKind, l: LikelihoodKind) -> String {
    format!("{}-{}", f.name(), l.name())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rel(ln_a: f64, ln_b: f64) -> f64 {
    (ln_a - ln_b).exp_m1().abs()
}

// 1

fn oracle_battery() -> Vec<OracleInstance> {
    let priors = [PriorFamily::Poisson, PriorFamily::NegativeBinomial, PriorFamily::Binomial, PriorFamily::Discrete];
    let clutters = [ClutterFamily::Poisson, ClutterFamily::Discrete];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..200).map(|i| random_instance(&mut rng, priors[i % 4], clutters[(i / 4) % 2], i % 5)).collect()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut evaluations = 0;
    let mut caps_ok = true;
    for inst in oracle_battery() {
        caps_ok &= inst.check_caps().is_ok();
        let reference = oracle_likelihood(&inst).unwrap().ln();
        let mix = inst.intensity();
        let obs = inst.observation();
        let clutter = inst.clutter_model().unwrap();
        let z = &inst.measurements;
        let mut check = |ln: f64| {
            worst = worst.max(rel(ln, reference));
            evaluations += 1;
        };
        if matches!(inst.prior, OracleLaw::Poisson(_)) && matches!(inst.clutter, OracleLaw::Poisson(_)) {
            check(phd_likelihood(&mix, z, &obs, &clutter, &inst.offset).unwrap());
        }
        if !matches!(inst.prior, OracleLaw::Discrete(_)) {
            let variance = inst.prior.to_model().unwrap().variance();
            check(sophd_likelihood(&mix, variance, z, &obs, &clutter, &inst.offset).unwrap());
        }
        let card = match &inst.prior {
            OracleLaw::Discrete(p) => CardinalityDist::new(p.clone()).unwrap(),
            law => truncate_to_dist(&law.to_model().unwrap(), 300).unwrap().dist,
        };
        check(cphd_likelihood(&mix, &card, z, &obs, &clutter, &inst.offset).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = caps_ok && worst <= ORACLE_REL_TOL && secs < 30.0;
    report(1, "oracle equivalence", pass, &format!("{evaluations} evaluations on 200 instances, max rel err {worst:.2e} (tol {ORACLE_REL_TOL:e}), {secs:.2} s (limit 30 s)"));
    assert!(pass);
}

// 2

fn random_step(rng: &mut ChaCha8Rng) -> (GaussianMixture<2>, Vec<Vector2<f64>>) {
    let n = rng.random_range(1..=6);
    let comps = (0..n)
        .map(|_| {
            let a = rng.random_range(0.2..3.0);
            let b = rng.random_range(0.2..3.0);
            let c = rng.random_range(-0.7..0.7) * f64::sqrt(a * b);
            let mean = Vector2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
            GaussianComponent::new(rng.random_range(0.1..2.0), mean, Matrix2::new(a, c, c, b))
        })
        .collect();
    let mix = GaussianMixture::new(comps);
    let m = rng.random_range(0..=10);
    let z = (0..m)
        .map(|i| {
            if i % 2 == 0 && !mix.is_empty() {
                let c = &mix.components[i % mix.len()];
                c.mean + Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Vector2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))
            }
        })
        .collect();
    (mix, z)
}

fn mixture_gap(a: &GaussianMixture<2>, b: &GaussianMixture<2>, probes: &[Vector2<f64>]) -> f64 {
    let mut worst = (a.mass() - b.mass()).abs() / a.mass().max(1e-300);
    for p in probes {
        let (da, db) = (a.density_at(p).unwrap(), b.density_at(p).unwrap());
        if da > 1e-250 {
            worst = worst.max((da - db).abs() / da);
        }
    }
    worst
}

#[test]
fn criterion_2_filter_tower() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let obs = ObservationModel { h: Matrix2::identity(), r: Matrix2::identity() * 0.4, p_d: 0.85 };
    let clutter = ClutterModel::poisson(6.0, Window::centered(50.0, 50.0));
    let offset = Vector2::new(0.3, -0.2);
    let (mut so_worst, mut cphd_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let (mix, z) = random_step(&mut rng);
        let probes: Vec<Vector2<f64>> = z.iter().copied().chain(mix.iter().map(|c| c.mean)).collect();
        let mass = mix.mass();
        let phd = phd_update(&mix, &z, &obs, &clutter, &offset).unwrap();
        let phd_lik = phd_likelihood(&mix, &z, &obs, &clutter, &offset).unwrap();

        // Poisson branch and a negative binomial with huge shape
        for variance in [mass, mass * (1.0 + mass / 1e8)] {
            let so = sophd_update(&mix, variance, &z, &obs, &clutter, &offset).unwrap();
            let so_lik = sophd_likelihood(&mix, variance, &z, &obs, &clutter, &offset).unwrap();
            so_worst = so_worst.max(rel(so_lik, phd_lik)).max(rel(so.ln_likelihood, phd.ln_likelihood));
            so_worst = so_worst.max(mixture_gap(&phd.mixture, &so.mixture, &probes));
        }

        let card = truncate_to_dist(&CardinalityModel::Poisson { rate: mass }, 120).unwrap().dist;
        let cphd = cphd_update(&mix, &card, &z, &obs, &clutter, &offset).unwrap();
        cphd_worst = cphd_worst.max(mixture_gap(&phd.mixture, &cphd.mixture, &probes));
        cphd_worst = cphd_worst.max(rel(cphd.ln_likelihood, phd.ln_likelihood));
    }
    let pass = so_worst <= TOWER_REL_TOL && cphd_worst <= TOWER_REL_TOL;
    report(
        2,
        "filter-consistency tower",
        pass,
        &format!("50 steps; SO-PHD vs PHD max rel {so_worst:.2e}, CPHD vs PHD max rel {cphd_worst:.2e} (tol {TOWER_REL_TOL:e})"),
    );
    assert!(pass);
}

// 3

#[test]
fn criterion_3_normalization() {
    let _g = serial();
    let t = e1();
    let mut card_err: f64 = 0.0;
    let mut clamps = 0;
    let mut weight_err: f64 = 0.0;
    let mut failures = 0;
    for v in &t.variants {
        weight_err = weight_err.max(v.diagnostics.max_weight_sum_error);
        failures += v.diagnostics.particle_failures + v.flagged;
        if v.name.starts_with("cphd") {
            card_err = card_err.max(v.diagnostics.max_card_sum_error);
        }
        if v.name.starts_with("sophd") {
            clamps += v.diagnostics.variance_clamps;
        }
    }
    let pass = card_err <= NORMALIZATION_TOL && clamps == 0 && weight_err <= NORMALIZATION_TOL;
    report(
        3,
        "normalization and positivity",
        pass,
        &format!("CPHD max |Σρ-1| {card_err:.2e}, SO-PHD clamps {clamps}, max |Σw-1| {weight_err:.2e} (tol {NORMALIZATION_TOL:e}); failed particles or flagged runs {failures}"),
    );
    assert!(pass);
}

// 4

#[test]
fn criterion_4_e1_sensor_rmse() {
    let _g = serial();
    let t = e1();
    let mut pass = true;
    let mut parts = Vec::new();
    for f in FilterKind::ALL {
        let l1 = &t.variant(&name(f, LikelihoodKind::L1)).unwrap().rmse;
        let l2 = &t.variant(&name(f, LikelihoodKind::L2)).unwrap().rmse;
        let (m1, m2) = (mean(l1), mean(l2));
        // first step from which L2 stays above L1 to the end
        let onset = (0..t.steps).rev().take_while(|&k| l2[k] > l1[k]).last().unwrap_or(t.steps);
        let ok = m1 < m2 && onset <= DIVERGENCE_ONSET;
        pass &= ok;
        parts.push(format!("{}: L1 {m1:.3} vs L2 {m2:.3}, L2>L1 from step {onset}", f.name()));
    }
    report(4, "E1 sensor RMSE L1 < L2", pass, &format!("{}; required onset <= {DIVERGENCE_ONSET}", parts.join("; ")));
    assert!(pass);
}

// 5

#[test]
fn criterion_5_e1_cardinality() {
    let _g = serial();
    let t = e1();
    let from = t.steps - LAST_STEPS;
    let truth = mean(&t.truth_cardinality[from..]);
    let mut pass = true;
    let mut parts = Vec::new();
    for f in FilterKind::ALL {
        let est = mean(&t.variant(&name(f, LikelihoodKind::L1)).unwrap().cardinality[from..]);
        pass &= (est - truth).abs() <= CARD_TOL;
        parts.push(format!("{} {est:.2}", f.name()));
    }
    report(5, "E1 cardinality", pass, &format!("last {LAST_STEPS} steps: truth {truth:.2}, L1 {} (tol ±{CARD_TOL})", parts.join(", ")));
    assert!(pass);
}

// 6

#[test]
fn criterion_6_e2_reconvergence() {
    let _g = serial();
    let mut pass = true;
    let mut parts = Vec::new();
    for exp in [Experiment::E2Death, Experiment::E2Birth] {
        let t = experiment(exp, E2_RUNS);
        for f in FilterKind::ALL {
            let l1 = t.variant(&name(f, LikelihoodKind::L1)).unwrap();
            let l2 = t.variant(&name(f, LikelihoodKind::L2)).unwrap();
            let within = |k: usize| (l1.cardinality[k] - t.truth_cardinality[k]).abs() <= CARD_TOL;
            let settled = (0..t.steps).rev().take_while(|&k| within(k)).last().unwrap_or(t.steps);
            let (m1, m2) = (mean(&l1.rmse), mean(&l2.rmse));
            let ok = settled <= E2_RECONVERGE_STEP && m1 < m2;
            pass &= ok;
            parts.push(format!("{} {}: card settled at step {settled}, rmse L1 {m1:.2} vs L2 {m2:.2}{}", exp.name(), f.name(), if ok { "" } else { " (fail)" }));
        }
    }
    report(6, "E2 re-convergence", pass, &format!("{}; required settle <= {E2_RECONVERGE_STEP}", parts.join("; ")));
    assert!(pass);
}

// 7

#[test]
fn criterion_7_runtime_ordering() {
    let _g = serial();
    let t = e1();
    let update = |f: FilterKind| {
        let a = t.variant(&name(f, LikelihoodKind::L1)).unwrap().times.update;
        let b = t.variant(&name(f, LikelihoodKind::L2)).unwrap().times.update;
        0.5 * (a + b)
    };
    let phd = update(FilterKind::Phd);
    let cphd_ratio = update(FilterKind::Cphd) / phd;
    let so_ratio = update(FilterKind::SoPhd) / phd;
    let mut lik_ok = true;
    let mut liks = Vec::new();
    for f in FilterKind::ALL {
        let l1 = t.variant(&name(f, LikelihoodKind::L1)).unwrap().times.likelihood;
        let l2 = t.variant(&name(f, LikelihoodKind::L2)).unwrap().times.likelihood;
        lik_ok &= l2 > l1;
        liks.push(format!("{} L1 {l1:.2e} s vs L2 {l2:.2e} s", f.name()));
    }
    let pass = cphd_ratio >= 3.0 && (1.0..=8.0).contains(&so_ratio) && lik_ok;
    report(
        7,
        "runtime ordering",
        pass,
        &format!("CPHD/PHD update {cphd_ratio:.2} (need >= 3), SO-PHD/PHD update {so_ratio:.2} (need 1..8); {}", liks.join(", ")),
    );
    assert!(pass);
}

// 8

#[test]
fn criterion_8_determinism() {
    let _g = serial();
    let mut pass = true;
    let mut parts = Vec::new();
    for exp in [Experiment::E1, Experiment::E2Death, Experiment::E2Birth] {
        let mut cfg = RunConfig::new(exp);
        cfg.runs = 2;
        cfg.particles = 12;
        cfg.scenario.steps = 12;
        cfg.seed = 77;
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut bytes = Vec::new();
        for d in &dirs {
            let table = run_experiment(&cfg).unwrap();
            emit_csv(&table, d.path()).unwrap();
            let read = |f: &str| std::fs::read(d.path().join(f)).unwrap();
            bytes.push((read("rmse.csv"), read("card.csv")));
            assert_eq!(read("rmse.csv"), rmse_csv(&table).into_bytes());
            assert_eq!(read("card.csv"), card_csv(&table).into_bytes());
        }
        let same = bytes[0] == bytes[1];
        pass &= same;
        parts.push(format!("{} {}", exp.name(), if same { "identical" } else { "differs" }));
    }
    report(8, "determinism", pass, &parts.join(", "));
    assert!(pass);
}
