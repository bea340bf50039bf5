//! Association-based multi-object likelihood.
//!
//! Point target estimates are extracted from the predicted intensity, gated
//! against the measurements and clustered into small groups; the likelihood
//! sums over all target-to-measurement assignments inside each group.

use crate::cardinality::ClutterModel;
use crate::error::{Error, Result};
use crate::filters::ObservationModel;
use crate::gm::{eval_gaussian, GaussianMixture, Vector};

/// Gating and grouping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingConfig {
    /// Gate on the first frame, where targets are poorly localized.
    pub tau0: f64,
    pub tau: f64,
    pub max_measurements: usize,
    pub max_targets: usize,
    /// Minimum component weight for a target to be extracted.
    pub extraction_threshold: f64,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig { tau0: 1e-7, tau: 1e-3, max_measurements: 3, max_targets: 3, extraction_threshold: 0.5 }
    }
}

/// Means of the components whose weight exceeds `threshold`, one target each.
pub fn extract_targets<const D: usize>(mixture: &GaussianMixture<D>, threshold: f64) -> Vec<Vector<D>> {
    mixture.iter().filter(|c| c.weight > threshold).map(|c| c.mean).collect()
}

/// A cluster of targets and the measurements they may have produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Group {
    pub targets: Vec<usize>,
    pub measurements: Vec<usize>,
}

/// Gated edge `(target, measurement, g)` with `g = p_d · N(z; Hx, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: usize,
    pub measurement: usize,
    pub g: f64,
}

struct UnionFind {
    parent: Vec<usize>,
    targets: Vec<usize>,
    measurements: Vec<usize>,
}

impl UnionFind {
    fn new(n_targets: usize, n_meas: usize) -> Self {
        let n = n_targets + n_meas;
        let targets = (0..n).map(|i| usize::from(i < n_targets)).collect();
        let measurements = (0..n).map(|i| usize::from(i >= n_targets)).collect();
        UnionFind { parent: (0..n).collect(), targets, measurements }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

/// All gated edges, and the groups formed by adding edges in decreasing
/// order of `g` while every group stays within the size caps. Edges that
/// would break a cap are dropped.
pub fn gate_and_cluster<const D: usize, const M: usize>(
    targets: &[Vector<D>],
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    offset: &Vector<M>,
    tau: f64,
    cfg: &GatingConfig,
) -> Result<(Vec<Edge>, Vec<Group>)> {
    let mut edges = Vec::new();
    for (t, x) in targets.iter().enumerate() {
        let predicted = obs.h * x;
        for (k, z) in measurements.iter().enumerate() {
            let g = obs.p_d * eval_gaussian(&(z - offset), &predicted, &obs.r)?;
            if g > tau {
                edges.push(Edge { target: t, measurement: k, g });
            }
        }
    }
    edges.sort_by(|a, b| b.g.total_cmp(&a.g).then(a.target.cmp(&b.target)).then(a.measurement.cmp(&b.measurement)));

    let nt = targets.len();
    let mut uf = UnionFind::new(nt, measurements.len());
    let mut kept = Vec::with_capacity(edges.len());
    for e in edges {
        let (a, b) = (uf.find(e.target), uf.find(nt + e.measurement));
        if a != b {
            let t = uf.targets[a] + uf.targets[b];
            let m = uf.measurements[a] + uf.measurements[b];
            if t > cfg.max_targets || m > cfg.max_measurements {
                continue;
            }
            uf.parent[b] = a;
            uf.targets[a] = t;
            uf.measurements[a] = m;
        }
        kept.push(e);
    }

    let mut by_root: Vec<Option<usize>> = vec![None; uf.parent.len()];
    let mut groups: Vec<Group> = Vec::new();
    for i in 0..uf.parent.len() {
        let r = uf.find(i);
        let gi = *by_root[r].get_or_insert_with(|| {
            groups.push(Group::default());
            groups.len() - 1
        });
        if i < nt {
            groups[gi].targets.push(i);
        } else {
            groups[gi].measurements.push(i - nt);
        }
    }
    Ok((kept, groups))
}

/// `Σ_θ Π_{(i,z)∈θ} g(i,z)/μ_c · (1 − p_d)^{n − |θ|}` over injective partial
/// assignments of the group's targets to its measurements.
fn group_sum(group: &Group, edges: &[Edge], p_d: f64, mu_c: f64) -> f64 {
    let weight = |t: usize, z: usize| edges.iter().find(|e| e.target == t && e.measurement == z).map_or(0.0, |e| e.g / mu_c);
    fn recurse(i: usize, group: &Group, used: &mut Vec<bool>, w: &dyn Fn(usize, usize) -> f64, miss: f64) -> f64 {
        if i == group.targets.len() {
            return 1.0;
        }
        let t = group.targets[i];
        let mut total = miss * recurse(i + 1, group, used, w, miss);
        for (k, &z) in group.measurements.iter().enumerate() {
            if used[k] {
                continue;
            }
            let g = w(t, z);
            if g > 0.0 {
                used[k] = true;
                total += g * recurse(i + 1, group, used, w, miss);
                used[k] = false;
            }
        }
        total
    }
    let mut used = vec![false; group.measurements.len()];
    recurse(0, group, &mut used, &weight, 1.0 - p_d)
}

#[derive(Debug, Clone)]
pub struct L2Likelihood {
    pub ln_likelihood: f64,
    pub n_targets: usize,
    pub groups: Vec<Group>,
}

/// Association-based log-likelihood. Requires Poisson clutter.
pub fn l2_likelihood<const D: usize, const M: usize>(
    mixture: &GaussianMixture<D>,
    measurements: &[Vector<M>],
    obs: &ObservationModel<D, M>,
    clutter: &ClutterModel,
    offset: &Vector<M>,
    first_frame: bool,
    cfg: &GatingConfig,
) -> Result<L2Likelihood> {
    if !clutter.cardinality.is_poisson() {
        return Err(Error::ModelMismatch("association likelihood requires Poisson clutter".into()));
    }
    let targets = extract_targets(mixture, cfg.extraction_threshold);
    let tau = if first_frame { cfg.tau0 } else { cfg.tau };
    let (edges, groups) = gate_and_cluster(&targets, measurements, obs, offset, tau, cfg)?;
    let mu_c = clutter.intensity();
    let mut ln = -clutter.rate() + measurements.len() as f64 * mu_c.ln();
    for g in groups.iter().filter(|g| !g.targets.is_empty()) {
        ln += group_sum(g, &edges, obs.p_d, mu_c).ln();
    }
    Ok(L2Likelihood { ln_likelihood: ln, n_targets: targets.len(), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cardinality::Window;
    use crate::gm::{GaussianComponent, Matrix};
    use nalgebra::vector;

    fn obs() -> ObservationModel<2, 2> {
        ObservationModel { h: Matrix::identity(), r: Matrix::identity() * 0.01, p_d: 0.9 }
    }

    fn mixture(points: &[[f64; 2]]) -> GaussianMixture<2> {
        points.iter().map(|p| GaussianComponent::new(1.0, vector![p[0], p[1]], Matrix::identity())).collect()
    }

    #[test]
    fn extraction_threshold() {
        let mut m = mixture(&[[0.0, 0.0], [1.0, 1.0]]);
        m.components[1].weight = 0.4;
        assert_eq!(extract_targets(&m, 0.5).len(), 1);
    }

    #[test]
    fn isolated_pairs_form_singleton_groups() {
        let m = mixture(&[[0.0, 0.0], [10.0, 10.0]]);
        let targets = extract_targets(&m, 0.5);
        let z = [vector![0.01, 0.0], vector![10.0, 10.02], vector![-30.0, 5.0]];
        let (edges, groups) = gate_and_cluster(&targets, &z, &obs(), &Vector::zeros(), 1e-3, &GatingConfig::default()).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.targets.len() <= 1 && g.measurements.len() <= 1));
    }

    #[test]
    fn caps_are_respected() {
        // five targets and five measurements all within each other's gates
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [0.02 * i as f64, 0.0]).collect();
        let targets = extract_targets(&mixture(&pts), 0.5);
        let z: Vec<Vector<2>> = pts.iter().map(|p| vector![p[0] + 0.001, p[1]]).collect();
        let cfg = GatingConfig::default();
        let (_, groups) = gate_and_cluster(&targets, &z, &obs(), &Vector::zeros(), 1e-3, &cfg).unwrap();
        assert!(groups.iter().all(|g| g.targets.len() <= 3 && g.measurements.len() <= 3));
        let n_t: usize = groups.iter().map(|g| g.targets.len()).sum();
        assert_eq!(n_t, 5);
    }

    #[test]
    fn single_pair_closed_form() {
        let m = mixture(&[[0.0, 0.0]]);
        let z = [vector![0.05, -0.02]];
        let clutter = ClutterModel::poisson(2.0, Window::centered(10.0, 10.0));
        let o = obs();
        let l = l2_likelihood(&m, &z, &o, &clutter, &Vector::zeros(), false, &GatingConfig::default()).unwrap();
        let g = 0.9 * eval_gaussian(&z[0], &Vector::zeros(), &o.r).unwrap();
        let mu_c = clutter.intensity();
        let expected = -2.0 + mu_c.ln() + (0.1 + g / mu_c).ln();
        assert!((l.ln_likelihood - expected).abs() < 1e-12);
    }

    #[test]
    fn no_targets_is_pure_clutter() {
        let clutter = ClutterModel::poisson(3.0, Window::centered(10.0, 10.0));
        let z = [vector![1.0, 1.0], vector![2.0, 2.0]];
        let l = l2_likelihood(&GaussianMixture::<2>::empty(), &z, &obs(), &clutter, &Vector::zeros(), true, &GatingConfig::default()).unwrap();
        assert!((l.ln_likelihood - (-3.0 + 2.0 * (0.03f64).ln())).abs() < 1e-12);
    }
}
