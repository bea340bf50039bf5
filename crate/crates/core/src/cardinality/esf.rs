//! Elementary symmetric functions by recursive convolution.
//!
//! `e_j(v)` is the coefficient of `t^j` in `Π (1 + v_i t)`. All inputs are
//! non-negative here, so every product of polynomials is free of cancellation.

/// Plain elementary symmetric functions `e_0..e_n`.
pub fn esf(values: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(values.len() + 1);
    e.push(1.0);
    for &v in values {
        e.push(0.0);
        for j in (1..e.len()).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

/// Elementary symmetric functions of `values / scale`, with `ln(scale)` kept
/// alongside, so that `e_j(values) = coeffs[j] * scale^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledEsf {
    pub coeffs: Vec<f64>,
    pub ln_scale: f64,
}

impl ScaledEsf {
    pub fn new(values: &[f64]) -> Self {
        let scale = scale_for(values);
        let scaled: Vec<f64> = values.iter().map(|v| v / scale).collect();
        ScaledEsf { coeffs: esf(&scaled), ln_scale: scale.ln() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `ln e_j`; `-inf` beyond the degree or when the coefficient underflowed.
    pub fn ln_e(&self, j: usize) -> f64 {
        match self.coeffs.get(j) {
            Some(&c) if c > 0.0 => c.ln() + j as f64 * self.ln_scale,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn value(&self, j: usize) -> f64 {
        self.ln_e(j).exp()
    }
}

/// Scale factor used to keep the scaled inputs at most one.
pub fn scale_for(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 && max.is_finite() {
        max
    } else {
        1.0
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// For every index `i`, the elementary symmetric functions of all values
/// except `values[i]`, scaled by the same factor as [`ScaledEsf::new`].
///
/// Uses a product tree: each leaf receives the product of every polynomial
/// outside its subtree, for `O(n² log n)` work instead of `O(n³)`.
pub fn leave_one_out(values: &[f64]) -> Vec<ScaledEsf> {
    let n = values.len();
    let scale = scale_for(values);
    let ln_scale = scale.ln();
    if n == 0 {
        return Vec::new();
    }
    let leaves: Vec<Vec<f64>> = values.iter().map(|v| vec![1.0, v / scale]).collect();

    // levels[0] are leaves; levels[k+1][i] = levels[k][2i] * levels[k][2i+1]
    let mut levels = vec![leaves];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        let next: Vec<Vec<f64>> = prev
            .chunks(2)
            .map(|pair| if pair.len() == 2 { poly_mul(&pair[0], &pair[1]) } else { pair[0].clone() })
            .collect();
        levels.push(next);
    }

    // Walk down: outside[k][i] is the product of all leaves not under node (k, i).
    let top = levels.len() - 1;
    let mut outside = vec![vec![1.0]];
    for k in (0..top).rev() {
        let nodes = &levels[k];
        let mut next = Vec::with_capacity(nodes.len());
        for (i, _) in nodes.iter().enumerate() {
            let parent_out = &outside[i / 2];
            let sibling = i ^ 1;
            if sibling < nodes.len() {
                next.push(poly_mul(parent_out, &nodes[sibling]));
            } else {
                next.push(parent_out.clone());
            }
        }
        outside = next;
    }
    outside.into_iter().map(|coeffs| ScaledEsf { coeffs, ln_scale }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subset_oracle(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut e = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let prod: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i]).product();
            e[mask.count_ones() as usize] += prod;
        }
        e
    }

    #[test]
    fn empty_input() {
        assert_eq!(esf(&[]), vec![1.0]);
    }

    #[test]
    fn two_values() {
        let (a, b) = (1.7, 0.3);
        let e = esf(&[a, b]);
        assert_eq!(e[0], 1.0);
        assert!((e[1] - (a + b)).abs() < 1e-15);
        assert!((e[2] - a * b).abs() < 1e-15);
    }

    #[test]
    fn three_values_against_enumeration() {
        let v = [2.0, 3.0, 4.0];
        let oracle = subset_oracle(&v);
        assert_eq!(oracle, vec![1.0, 9.0, 26.0, 24.0]);
        assert_eq!(esf(&v), oracle);
    }

    #[test]
    fn scaled_matches_plain() {
        let v = [1e5, 3e4, 2.0, 7e5];
        let s = ScaledEsf::new(&v);
        let plain = esf(&v);
        for j in 0..=4 {
            assert!((s.value(j) - plain[j]).abs() <= 1e-12 * plain[j]);
        }
    }

    #[test]
    fn scaled_survives_large_inputs() {
        let v = vec![1e30; 60];
        let s = ScaledEsf::new(&v);
        // C(60, 30) * 1e900
        let ln_binom: f64 = (1..=30).map(|k| ((30 + k) as f64 / k as f64).ln()).sum();
        assert!((s.ln_e(30) - (ln_binom + 900.0 * 10f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn leave_one_out_matches_direct() {
        let v = [0.5, 2.0, 0.0, 3.5, 1.25, 7.0, 0.1];
        let loo = leave_one_out(&v);
        for i in 0..v.len() {
            let rest: Vec<f64> = v.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &x)| x).collect();
            let direct = esf(&rest);
            assert_eq!(loo[i].degree(), v.len() - 1);
            for j in 0..direct.len() {
                assert!((loo[i].value(j) - direct[j]).abs() <= 1e-12 * direct[j].max(1.0), "i={i} j={j}");
            }
        }
    }

    #[test]
    fn leave_one_out_single_value() {
        let loo = leave_one_out(&[4.0]);
        assert_eq!(loo.len(), 1);
        assert_eq!(loo[0].coeffs, vec![1.0]);
    }
}
