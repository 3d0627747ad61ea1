//! Seeded random streams and the handful of distribution primitives the
//! samplers rely on.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Streams with the same seed and distinct ids are independent ChaCha8
/// streams; identical pairs replay identical sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            stream_id,
        }
    }

    /// Stream for a nested index path, e.g. `[replication, model, fold]`.
    pub fn derived(seed: u64, path: &[u64]) -> Self {
        Self::new(seed, stream_id_for(path))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.std_normal()
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an index path into a single stream id.
pub fn stream_id_for(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x005E_ED0F_5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

#[inline]
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    normal_logpdf(x, mean, sd).exp()
}

/// Density of the half-normal with the given scale, evaluated at zero.
pub fn half_normal_density_at_zero(scale: f64) -> f64 {
    (2.0 / PI).sqrt() / scale
}

/// Log-density of a bivariate normal with marginal SDs `s1`, `s2` and correlation `rho`.
pub fn bvn_logpdf(y: (f64, f64), mu: (f64, f64), s1: f64, s2: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
    }
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::Domain(format!(
            "standard deviations must be > 0, got ({s1}, {s2})"
        )));
    }
    let z1 = (y.0 - mu.0) / s1;
    let z2 = (y.1 - mu.1) / s2;
    let one_m = 1.0 - rho * rho;
    let q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / one_m;
    Ok(-LN_2PI - s1.ln() - s2.ln() - 0.5 * one_m.ln() - 0.5 * q)
}

/// Draw from N(mu, sd^2) conditioned on `x >= lower`.
///
/// Inverse-CDF when the standardized bound is at most 2, exponential
/// rejection (Robert's optimal-rate proposal) further out.
pub fn sample_truncnorm(rng: &mut RngStream, mu: f64, sd: f64, lower: f64) -> f64 {
    debug_assert!(sd > 0.0);
    let alpha = (lower - mu) / sd;
    if alpha == f64::NEG_INFINITY {
        return rng.normal(mu, sd);
    }
    let z = if alpha <= 2.0 {
        // upper-tail parameterization keeps precision for alpha near 2
        let tail = std_normal_cdf(-alpha);
        let u = rng.uniform();
        (-std_normal_quantile(u * tail)).max(alpha)
    } else {
        let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
        loop {
            let z = alpha + rng.exp1() / rate;
            let d = z - rate;
            if rng.uniform().ln() <= -0.5 * d * d {
                break z;
            }
        }
    };
    mu + sd * z
}

const SLICE_MAX_STEPS: usize = 1_000;
const SLICE_MAX_SHRINK: usize = 10_000;

/// One stepping-out and shrinkage slice update on the positive half-line.
///
/// `log_target` only ever sees strictly positive arguments.
pub fn slice_sample_positive<F>(
    rng: &mut RngStream,
    mut log_target: F,
    current: f64,
    width: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(current > 0.0) {
        return Err(Error::Domain(format!("current must be > 0, got {current}")));
    }
    let f0 = log_target(current);
    if !f0.is_finite() {
        return Err(Error::Sampler(format!(
            "non-finite log target {f0} at current value {current}"
        )));
    }
    let w = if width > 0.0 { width } else { f64::MIN_POSITIVE };
    let mut f = |x: f64| if x > 0.0 { log_target(x) } else { f64::NEG_INFINITY };
    let level = f0 - rng.exp1();

    let mut left = current - rng.uniform() * w;
    let mut right = left + w;
    let mut steps = 0;
    while left > 0.0 && f(left) > level && steps < SLICE_MAX_STEPS {
        left -= w;
        steps += 1;
    }
    left = left.max(0.0);
    steps = 0;
    while f(right) > level && steps < SLICE_MAX_STEPS {
        right += w;
        steps += 1;
    }

    for _ in 0..SLICE_MAX_SHRINK {
        if right - left <= f64::EPSILON * current {
            return Ok(current);
        }
        let x = left + rng.uniform() * (right - left);
        if x > 0.0 && f(x) > level {
            return Ok(x);
        }
        if x < current {
            left = x;
        } else {
            right = x;
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bvn_at_origin() {
        let v = bvn_logpdf((0.0, 0.0), (0.0, 0.0), 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(v, -(2.0 * PI).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, -1.837877, epsilon = 1e-6);
    }

    #[test]
    fn bvn_factorizes_when_uncorrelated() {
        let cases = [
            ((0.3, -1.2), (0.1, 0.4), 0.5, 2.0),
            ((-2.0, 3.0), (1.0, -1.0), 1.7, 0.2),
        ];
        for (y, mu, s1, s2) in cases {
            let joint = bvn_logpdf(y, mu, s1, s2, 0.0).unwrap();
            let prod = normal_logpdf(y.0, mu.0, s1) + normal_logpdf(y.1, mu.1, s2);
            assert_abs_diff_eq!(joint, prod, epsilon = 1e-12);
        }
    }

    #[test]
    fn bvn_correlated_against_explicit_inverse() {
        // Sigma = [[1, .5], [.5, 1]], det = .75, inverse = (1/.75) [[1,-.5],[-.5,1]]
        let det: f64 = 0.75;
        let (d1, d2) = (1.0, 1.0);
        let quad = (d1 * d1 - 2.0 * 0.5 * d1 * d2 + d2 * d2) / det;
        let expected = -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        let v = bvn_logpdf((1.0, 1.0), (0.0, 0.0), 1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -2.36070, epsilon = 1e-5);
    }

    #[test]
    fn bvn_domain_errors() {
        assert!(bvn_logpdf((0.0, 0.0), (0.0, 0.0), 1.0, 1.0, 1.0).is_err());
        assert!(bvn_logpdf((0.0, 0.0), (0.0, 0.0), 1.0, 1.0, -1.5).is_err());
        assert!(bvn_logpdf((0.0, 0.0), (0.0, 0.0), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bvn_integrates_to_one_on_grid() {
        let (s1, s2, rho) = (0.7, 1.3, 0.6);
        let n = 200;
        let (h1, h2) = (12.0 * s1 / n as f64, 12.0 * s2 / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for k in 0..n {
                let x = -6.0 * s1 + (i as f64 + 0.5) * h1;
                let y = -6.0 * s2 + (k as f64 + 0.5) * h2;
                total += bvn_logpdf((x, y), (0.0, 0.0), s1, s2, rho).unwrap().exp() * h1 * h2;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn same_stream_replays() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<f64> = (0..16).map(|_| a.std_normal()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.std_normal()).collect();
        let xc: Vec<f64> = (0..16).map(|_| c.std_normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(stream_id_for(&[1, 2]), stream_id_for(&[2, 1]));
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &x in &[-5.0, -2.0, -0.3, 0.0, 1.1, 4.5] {
            assert_abs_diff_eq!(std_normal_quantile(std_normal_cdf(x)), x, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(std_normal_quantile(0.975), 1.959963984540054, epsilon = 1e-12);
    }

    #[test]
    fn truncnorm_support_and_tails() {
        let mut rng = RngStream::new(11, 0);
        for &(mu, sd, lower) in &[(0.0, 1.0, 0.0), (0.0, 1.0, 3.5), (2.0, 0.5, -1.0), (0.0, 1.0, 8.0)] {
            for _ in 0..20_000 {
                assert!(sample_truncnorm(&mut rng, mu, sd, lower) >= lower);
            }
        }
        // far tail: mean of N(0,1) | x >= 8 is about 8.1222
        let n = 50_000;
        let m: f64 = (0..n).map(|_| sample_truncnorm(&mut rng, 0.0, 1.0, 8.0)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(m, 8.1222, epsilon = 0.01);
    }

    #[test]
    fn slice_rejects_bad_start() {
        let mut rng = RngStream::new(1, 0);
        assert!(slice_sample_positive(&mut rng, |_| f64::NAN, 1.0, 1.0).is_err());
        assert!(slice_sample_positive(&mut rng, |x| -x, -1.0, 1.0).is_err());
    }

    #[test]
    fn slice_degenerate_width_stays_in_slice() {
        let mut rng = RngStream::new(5, 0);
        let target = |x: f64| -0.5 * x * x;
        for &w in &[0.0, 1e-300, f64::EPSILON / 4.0] {
            let x = slice_sample_positive(&mut rng, target, 0.8, w).unwrap();
            assert!(x > 0.0);
            assert!((x - 0.8).abs() < 1e-6);
        }
    }
}
