//! Gaussian-mixture intensities and linear-Gaussian component algebra.
//!
//! Dimensions are const generics: `D` is the state dimension and `M` the
//! measurement dimension. A mixture represents an intensity measure, so its
//! mass (sum of weights) is an expected object count, not a probability.

use nalgebra::{Cholesky, SMatrix, SVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const R: usize, const C: usize> = SMatrix<f64, R, C>;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<const D: usize> {
    pub weight: f64,
    pub mean: Vector<D>,
    pub cov: Matrix<D, D>,
}

impl<const D: usize> GaussianComponent<D> {
    pub fn new(weight: f64, mean: Vector<D>, cov: Matrix<D, D>) -> Self {
        GaussianComponent { weight, mean, cov }
    }

    /// Checks the weight, covariance symmetry and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0) {
            return Err(Error::DegenerateParameter(format!("negative weight {}", self.weight)));
        }
        let scale = self.cov.amax().max(f64::MIN_POSITIVE);
        if (self.cov - self.cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric"));
        }
        if Cholesky::new(self.cov).is_none() {
            return Err(Error::NotPositiveDefinite("covariance has a non-positive eigenvalue"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<const D: usize> {
    pub components: Vec<GaussianComponent<D>>,
}

impl<const D: usize> Default for GaussianMixture<D> {
    fn default() -> Self {
        GaussianMixture { components: Vec::new() }
    }
}

impl<const D: usize> GaussianMixture<D> {
    pub fn new(components: Vec<GaussianComponent<D>>) -> Self {
        GaussianMixture { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent<D>> {
        self.components.iter()
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(factor);
        out
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for c in &mut self.components {
            c.weight *= factor;
        }
    }

    pub fn extend(&mut self, other: GaussianMixture<D>) {
        self.components.extend(other.components);
    }

    /// Intensity evaluated at a point.
    pub fn density_at(&self, x: &Vector<D>) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight * eval_gaussian(x, &c.mean, &c.cov)?;
        }
        Ok(acc)
    }
}

impl<const D: usize> FromIterator<GaussianComponent<D>> for GaussianMixture<D> {
    fn from_iter<T: IntoIterator<Item = GaussianComponent<D>>>(iter: T) -> Self {
        GaussianMixture { components: iter.into_iter().collect() }
    }
}

pub fn symmetrize<const D: usize>(m: &Matrix<D, D>) -> Matrix<D, D> {
    (m + m.transpose()) * 0.5
}

/// Log of the normal density `N(x; mean, cov)`.
pub fn ln_gaussian<const D: usize>(x: &Vector<D>, mean: &Vector<D>, cov: &Matrix<D, D>) -> Result<f64> {
    let chol = Cholesky::new(*cov).ok_or(Error::NotPositiveDefinite("gaussian covariance"))?;
    let diff = x - mean;
    let y = chol.l().solve_lower_triangular(&diff).ok_or(Error::NotPositiveDefinite("gaussian covariance"))?;
    let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    Ok(-0.5 * (y.norm_squared() + ln_det + D as f64 * (2.0 * PI).ln()))
}

pub fn eval_gaussian<const D: usize>(x: &Vector<D>, mean: &Vector<D>, cov: &Matrix<D, D>) -> Result<f64> {
    ln_gaussian(x, mean, cov).map(f64::exp)
}

pub fn kalman_predict<const D: usize>(
    c: &GaussianComponent<D>,
    transition: &Matrix<D, D>,
    process_noise: &Matrix<D, D>,
) -> GaussianComponent<D> {
    let cov = transition * c.cov * transition.transpose() + process_noise;
    GaussianComponent { weight: c.weight, mean: transition * c.mean, cov: symmetrize(&cov) }
}

/// Linear-Gaussian measurement update of one component.
///
/// Returns the posterior component (weight unchanged) and the predictive
/// density `N(z; H m, H P Hᵀ + R)`.
pub fn kalman_update<const D: usize, const M: usize>(
    c: &GaussianComponent<D>,
    z: &Vector<M>,
    h: &Matrix<M, D>,
    r: &Matrix<M, M>,
) -> Result<(GaussianComponent<D>, f64)> {
    let cache = MeasurementCache::new(c, h, r)?;
    let density = cache.ln_density(z).exp();
    let posterior = GaussianComponent { weight: c.weight, mean: cache.posterior_mean(&c.mean, z), cov: cache.posterior_cov };
    Ok((posterior, density))
}

/// Per-component quantities of a Kalman update that do not depend on the
/// measurement value. Built once per component and reused for every `z`.
#[derive(Debug, Clone)]
pub struct MeasurementCache<const D: usize, const M: usize> {
    pub predicted: Vector<M>,
    pub innovation_inv: Matrix<M, M>,
    /// `-0.5 * ln det(2π S)`
    pub ln_norm: f64,
    pub gain: Matrix<D, M>,
    pub posterior_cov: Matrix<D, D>,
}

impl<const D: usize, const M: usize> MeasurementCache<D, M> {
    pub fn new(c: &GaussianComponent<D>, h: &Matrix<M, D>, r: &Matrix<M, M>) -> Result<Self> {
        let ph_t = c.cov * h.transpose();
        let s = symmetrize(&(h * ph_t + r));
        let chol = Cholesky::new(s).ok_or(Error::SingularInnovation)?;
        let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        if !ln_det.is_finite() {
            return Err(Error::SingularInnovation);
        }
        let innovation_inv = chol.inverse();
        let gain = ph_t * innovation_inv;
        // Joseph form keeps the posterior covariance symmetric positive definite.
        let i_kh = Matrix::<D, D>::identity() - gain * h;
        let posterior_cov = symmetrize(&(i_kh * c.cov * i_kh.transpose() + gain * r * gain.transpose()));
        Ok(MeasurementCache {
            predicted: h * c.mean,
            innovation_inv,
            ln_norm: -0.5 * (ln_det + M as f64 * (2.0 * PI).ln()),
            gain,
            posterior_cov,
        })
    }

    pub fn mahalanobis_sq(&self, z: &Vector<M>) -> f64 {
        let nu = z - self.predicted;
        (nu.transpose() * self.innovation_inv * nu)[(0, 0)]
    }

    pub fn ln_density(&self, z: &Vector<M>) -> f64 {
        self.ln_norm - 0.5 * self.mahalanobis_sq(z)
    }

    /// Predictive density, skipping the exponential when it would underflow anyway.
    pub fn density(&self, z: &Vector<M>) -> f64 {
        let ln = self.ln_density(z);
        if ln < -745.0 {
            0.0
        } else {
            ln.exp()
        }
    }

    pub fn posterior_mean(&self, prior_mean: &Vector<D>, z: &Vector<M>) -> Vector<D> {
        prior_mean + self.gain * (z - self.predicted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionConfig {
    pub prune_threshold: f64,
    /// Squared Mahalanobis distance under which components are merged.
    pub merge_distance: f64,
    pub max_components: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig { prune_threshold: 1e-5, merge_distance: 4.0, max_components: 200 }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prune_threshold >= 0.0) || !(self.merge_distance >= 0.0) || self.max_components == 0 {
            return Err(Error::Config(format!("invalid reduction config {self:?}")));
        }
        Ok(())
    }
}

/// Prune, merge and cap a mixture, then rescale to the input mass.
///
/// When pruning removes every component the result is the empty mixture.
pub fn reduce_mixture<const D: usize>(m: &GaussianMixture<D>, cfg: &ReductionConfig) -> GaussianMixture<D> {
    let input_mass = m.mass();
    let mut order: Vec<usize> = (0..m.len()).filter(|&i| m.components[i].weight >= cfg.prune_threshold && m.components[i].weight > 0.0).collect();
    if order.is_empty() {
        return GaussianMixture::empty();
    }
    order.sort_by(|&a, &b| m.components[b].weight.total_cmp(&m.components[a].weight).then(a.cmp(&b)));

    let means: Vec<Vector<D>> = order.iter().map(|&i| m.components[i].mean).collect();
    // candidates of a lead are looked up in a band of the first coordinate
    let mut by_x: Vec<(f64, usize)> = means.iter().enumerate().map(|(pos, mu)| (mu[0], pos)).collect();
    by_x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut used = vec![false; order.len()];
    let mut band: Vec<usize> = Vec::new();
    let mut merged: Vec<GaussianComponent<D>> = Vec::new();
    for lead_pos in 0..order.len() {
        if used[lead_pos] {
            continue;
        }
        let lead = &m.components[order[lead_pos]];
        let inv = Cholesky::new(lead.cov).map(|c| c.inverse());
        // d'P⁻¹d ≥ |d|²/λ_max(P) ≥ |d|²/tr(P): cheap rejection before the quadratic form
        let reach = cfg.merge_distance * lead.cov.trace();
        let half = reach.sqrt();
        let lo = by_x.partition_point(|e| e.0 < lead.mean[0] - half);
        let hi = by_x.partition_point(|e| e.0 <= lead.mean[0] + half);
        band.clear();
        band.extend(by_x[lo..hi].iter().map(|e| e.1).filter(|&pos| !used[pos] && pos != lead_pos));
        band.sort_unstable();
        let mut weight = lead.weight;
        let mut mean_acc = lead.mean * lead.weight;
        let mut members: Vec<&GaussianComponent<D>> = vec![lead];
        used[lead_pos] = true;
        for &pos in &band {
            let d = means[pos] - lead.mean;
            let close = match &inv {
                Some(inv) => d.norm_squared() <= reach && (d.transpose() * inv * d)[(0, 0)] <= cfg.merge_distance,
                None => d == Vector::<D>::zeros(),
            };
            if close {
                let c = &m.components[order[pos]];
                used[pos] = true;
                weight += c.weight;
                mean_acc += c.mean * c.weight;
                members.push(c);
            }
        }
        if members.len() == 1 {
            merged.push(lead.clone());
            continue;
        }
        let mean = mean_acc / weight;
        let mut cov = Matrix::<D, D>::zeros();
        for c in &members {
            let d = c.mean - mean;
            cov += (c.cov + d * d.transpose()) * c.weight;
        }
        merged.push(GaussianComponent { weight, mean, cov: symmetrize(&(cov / weight)) });
    }

    if merged.len() > cfg.max_components {
        merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        merged.truncate(cfg.max_components);
    }
    let kept: f64 = merged.iter().map(|c| c.weight).sum();
    let mut out = GaussianMixture::new(merged);
    if kept > 0.0 {
        out.scale_in_place(input_mass / kept);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{matrix, vector};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn density_at_mean_1d() {
        let v = eval_gaussian(&vector![0.0], &vector![0.0], &matrix![1.0]).unwrap();
        assert!(approx(v, (2.0 * PI).powf(-0.5), 1e-15));
        assert!((v - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn density_identity_2d() {
        let v = eval_gaussian(&vector![0.0, 0.0], &vector![0.0, 0.0], &Matrix::<2, 2>::identity()).unwrap();
        assert!(approx(v, 1.0 / (2.0 * PI), 1e-15));
    }

    #[test]
    fn density_scalar_formula() {
        let v = eval_gaussian(&vector![1.0], &vector![0.0], &matrix![4.0]).unwrap();
        let expected = (-1.0f64 / 8.0).exp() / (8.0 * PI).sqrt();
        assert!(approx(v, expected, 1e-14));
    }

    #[test]
    fn non_spd_covariance_is_rejected() {
        let r = eval_gaussian(&vector![0.0, 0.0], &vector![0.0, 0.0], &matrix![1.0, 2.0; 2.0, 1.0]);
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn predict_identity_is_noop() {
        let c = GaussianComponent::new(0.7, vector![1.0, 2.0], matrix![2.0, 0.1; 0.1, 1.0]);
        let p = kalman_predict(&c, &Matrix::identity(), &Matrix::zeros());
        assert_eq!(p, c);
    }

    #[test]
    fn predict_constant_velocity() {
        let c = GaussianComponent::new(1.0, vector![0.0, 1.0], Matrix::identity());
        let f = matrix![1.0, 1.0; 0.0, 1.0];
        let p = kalman_predict(&c, &f, &Matrix::zeros());
        assert_eq!(p.mean, vector![1.0, 1.0]);
        assert_eq!(p.cov, matrix![2.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn predict_matches_elementwise_recomputation() {
        let f = matrix![1.0, 0.5, 0.0; 0.2, 1.0, -0.3; 0.0, 0.1, 0.9];
        let q = matrix![0.3, 0.0, 0.1; 0.0, 0.2, 0.0; 0.1, 0.0, 0.4];
        let p0 = matrix![2.0, 0.3, 0.0; 0.3, 1.0, 0.2; 0.0, 0.2, 1.5];
        let c = GaussianComponent::new(1.0, vector![1.0, -2.0, 0.5], p0);
        let out = kalman_predict(&c, &f, &q);
        for i in 0..3 {
            let mi: f64 = (0..3).map(|k| f[(i, k)] * c.mean[k]).sum();
            assert!(approx(out.mean[i], mi, 1e-14));
            for j in 0..3 {
                let mut acc = q[(i, j)];
                for a in 0..3 {
                    for b in 0..3 {
                        acc += f[(i, a)] * p0[(a, b)] * f[(j, b)];
                    }
                }
                assert!(approx(out.cov[(i, j)], acc, 1e-13));
            }
        }
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let c = GaussianComponent::new(1.0, vector![1.0, 2.0], matrix![1.0, 0.2; 0.2, 2.0]);
        let r = Matrix::<2, 2>::identity() * 1e12;
        let (post, dens) = kalman_update(&c, &vector![5.0, -3.0], &Matrix::identity(), &r).unwrap();
        assert!((post.mean - c.mean).amax() < 1e-9);
        assert!((post.cov - c.cov).amax() < 1e-9);
        let broad = 1.0 / (2.0 * PI * 1e12);
        assert!(approx(dens, broad, 1e-6));
    }

    #[test]
    fn equal_precision_fusion_averages() {
        let p = matrix![1.0, 0.3; 0.3, 2.0];
        let c = GaussianComponent::new(1.0, vector![0.0, 4.0], p);
        let z = vector![2.0, 0.0];
        let (post, _) = kalman_update(&c, &z, &Matrix::identity(), &p).unwrap();
        assert!((post.mean - (c.mean + z) / 2.0).amax() < 1e-12);
        assert!((post.cov - p / 2.0).amax() < 1e-12);
    }

    #[test]
    fn scalar_update_matches_conjugate_product() {
        let (m0, p0, r, z) = (1.5, 2.0, 0.5, 3.0);
        let c = GaussianComponent::new(1.0, vector![m0], matrix![p0]);
        let (post, dens) = kalman_update(&c, &vector![z], &matrix![1.0], &matrix![r]).unwrap();
        let prec = 1.0 / p0 + 1.0 / r;
        let mean = (m0 / p0 + z / r) / prec;
        assert!(approx(post.mean[0], mean, 1e-14));
        assert!(approx(post.cov[(0, 0)], 1.0 / prec, 1e-14));
        let pred = (-(z - m0) * (z - m0) / (2.0 * (p0 + r))).exp() / (2.0 * PI * (p0 + r)).sqrt();
        assert!(approx(dens, pred, 1e-14));
    }

    #[test]
    fn predictive_density_integrates_to_one() {
        let c = GaussianComponent::new(1.0, vector![0.3, -0.2], matrix![0.5, 0.1; 0.1, 0.3]);
        let h = matrix![1.0, 0.0];
        let r = matrix![0.2];
        let cache = MeasurementCache::new(&c, &h, &r).unwrap();
        let (lo, hi, n) = (-8.0, 8.0, 4000);
        let dz = (hi - lo) / n as f64;
        let integral: f64 = (0..n).map(|i| cache.density(&vector![lo + (i as f64 + 0.5) * dz]) * dz).sum();
        assert!((integral - 1.0).abs() < 1e-9);
    }

    #[test]
    fn predictive_density_integrates_to_one_2d() {
        let c = GaussianComponent::new(1.0, vector![0.0, 0.0, 1.0, 0.0], Matrix::<4, 4>::identity() * 0.4);
        let h = matrix![1.0, 0.0, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0];
        let r = Matrix::<2, 2>::identity() * 0.1;
        let cache = MeasurementCache::new(&c, &h, &r).unwrap();
        let n = 400;
        let dz = 12.0 / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = vector![-6.0 + (i as f64 + 0.5) * dz, -6.0 + (j as f64 + 0.5) * dz];
                integral += cache.density(&z) * dz * dz;
            }
        }
        assert!((integral - 1.0).abs() < 1e-6);
    }

    fn component(w: f64, x: f64, y: f64) -> GaussianComponent<2> {
        GaussianComponent::new(w, vector![x, y], Matrix::identity())
    }

    #[test]
    fn everything_pruned_gives_empty() {
        let m = GaussianMixture::new(vec![component(1e-7, 0.0, 0.0), component(2e-6, 5.0, 5.0)]);
        let out = reduce_mixture(&m, &ReductionConfig::default());
        assert!(out.is_empty());
        assert_eq!(out.mass(), 0.0);
    }

    #[test]
    fn identical_components_merge_exactly() {
        let c = GaussianComponent::new(0.4, vector![1.0, -1.0], matrix![2.0, 0.5; 0.5, 1.0]);
        let m = GaussianMixture::new(vec![c.clone(), c.clone()]);
        let out = reduce_mixture(&m, &ReductionConfig::default());
        assert_eq!(out.len(), 1);
        assert!(approx(out.components[0].weight, 0.8, 1e-15));
        assert!((out.components[0].mean - c.mean).amax() < 1e-15);
        assert!((out.components[0].cov - c.cov).amax() < 1e-15);
    }

    #[test]
    fn cap_keeps_heaviest_and_rescales() {
        let m = GaussianMixture::new(vec![component(1.0, 0.0, 0.0), component(0.5, 100.0, 0.0), component(0.25, 0.0, 100.0)]);
        let cfg = ReductionConfig { max_components: 2, ..Default::default() };
        let out = reduce_mixture(&m, &cfg);
        assert_eq!(out.len(), 2);
        assert!(approx(out.mass(), 1.75, 1e-15));
        assert!(out.iter().all(|c| c.mean[1] == 0.0));
    }

    #[test]
    fn merge_preserves_moments() {
        let a = component(0.3, 0.0, 0.0);
        let b = component(0.1, 1.0, 0.0);
        let out = reduce_mixture(&GaussianMixture::new(vec![a, b]), &ReductionConfig::default());
        assert_eq!(out.len(), 1);
        let c = &out.components[0];
        assert!(approx(c.mean[0], 0.25, 1e-15));
        // 1 + weighted spread 0.75 * 0.25
        assert!(approx(c.cov[(0, 0)], 1.0 + 0.1875, 1e-14));
        assert!(Cholesky::new(c.cov).is_some());
    }
}
