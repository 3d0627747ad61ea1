//! Closed-form and grid posteriors for the single-class regression with
//! `psi` held fixed and a near-exact surrogate (`se1 -> 0`). In that limit
//! `mu1 = y1` and the final-outcome estimates follow an ordinary normal
//! linear model in `(lambda0, lambda1)`, which makes the sampler checkable.

use crate::data::{Dataset, StudyRecord};
use crate::error::{Error, Result};
use crate::randkit::normal_logpdf;

/// Posterior moments of `(lambda0, lambda1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub corr: f64,
}

/// One class of studies with negligible surrogate error and no within-study
/// correlation.
pub fn regression_instance(points: &[(f64, f64)], se2: f64) -> Result<Dataset> {
    let studies = points
        .iter()
        .enumerate()
        .map(|(i, &(y1, y2))| StudyRecord {
            study_id: format!("s{}", i + 1),
            class_id: "c1".into(),
            y1,
            se1: 1e-6,
            y2,
            se2,
            rho_w: 0.0,
        })
        .collect();
    Dataset::new(studies)
}

fn check_instance(data: &Dataset) -> Result<()> {
    if data.n_classes() != 1 {
        return Err(Error::Config("oracle instances have exactly one class".into()));
    }
    if data.studies().iter().any(|s| s.rho_w != 0.0) {
        return Err(Error::Config("oracle instances need rho_w = 0".into()));
    }
    Ok(())
}

/// Conjugate normal regression posterior with `N(0, a^2)` priors on both
/// coefficients and residual variance `psi^2 + se2^2`.
pub fn conjugate_posterior(data: &Dataset, psi: f64, a: f64) -> Result<Moments> {
    check_instance(data)?;
    let prior_prec = 1.0 / (a * a);
    let (mut p00, mut p01, mut p11, mut b0, mut b1) = (prior_prec, 0.0, prior_prec, 0.0, 0.0);
    for s in data.studies() {
        let w = 1.0 / (psi * psi + s.se2 * s.se2);
        p00 += w;
        p01 += w * s.y1;
        p11 += w * s.y1 * s.y1;
        b0 += w * s.y2;
        b1 += w * s.y1 * s.y2;
    }
    let det = p00 * p11 - p01 * p01;
    let (c00, c01, c11) = (p11 / det, -p01 / det, p00 / det);
    Ok(Moments {
        mean: [c00 * b0 + c01 * b1, c01 * b0 + c11 * b1],
        sd: [c00.sqrt(), c11.sqrt()],
        corr: c01 / (c00 * c11).sqrt(),
    })
}

/// Posterior moments from an `n x n` grid over `[-half_width, half_width]^2`,
/// evaluating the unnormalized log posterior point by point.
pub fn grid_posterior(data: &Dataset, psi: f64, a: f64, n: usize, half_width: f64) -> Result<Moments> {
    check_instance(data)?;
    if n < 3 {
        return Err(Error::Config("grid needs at least 3 points per axis".into()));
    }
    let step = 2.0 * half_width / (n - 1) as f64;
    let axis: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * step).collect();
    let mut logp = Vec::with_capacity(n * n);
    for &l0 in &axis {
        for &l1 in &axis {
            let mut lp = normal_logpdf(l0, 0.0, a) + normal_logpdf(l1, 0.0, a);
            for s in data.studies() {
                let sd = (psi * psi + s.se2 * s.se2).sqrt();
                lp += normal_logpdf(s.y2, l0 + l1 * s.y1, sd);
            }
            logp.push(lp);
        }
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m0, mut m1, mut s00, mut s11, mut s01) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &l0) in axis.iter().enumerate() {
        for (j, &l1) in axis.iter().enumerate() {
            let w = (logp[i * n + j] - max).exp();
            z += w;
            m0 += w * l0;
            m1 += w * l1;
            s00 += w * l0 * l0;
            s11 += w * l1 * l1;
            s01 += w * l0 * l1;
        }
    }
    let (m0, m1) = (m0 / z, m1 / z);
    let v0 = s00 / z - m0 * m0;
    let v1 = s11 / z - m1 * m1;
    Ok(Moments {
        mean: [m0, m1],
        sd: [v0.sqrt(), v1.sqrt()],
        corr: (s01 / z - m0 * m1) / (v0 * v1).sqrt(),
    })
}
