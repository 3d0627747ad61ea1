//! Chain-quality metrics: batch-means Monte Carlo error, effective sample
//! size and split-chain R-hat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::FitResult;
use crate::stats;

pub const MIN_CHAIN: usize = 100;
pub const RHAT_FLAG: f64 = 1.05;
pub const ESS_FLAG: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub mce: f64,
    pub ess: f64,
    pub split_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub parameter: String,
    #[serde(flatten)]
    pub chain: ChainDiagnostics,
    /// `split_rhat > 1.05` or `ess < 400`.
    pub flagged: bool,
}

fn check_len(chain: &[f64]) -> Result<()> {
    if chain.len() < MIN_CHAIN {
        return Err(Error::ShortChain {
            needed: MIN_CHAIN,
            got: chain.len(),
        });
    }
    Ok(())
}

/// Batch-means standard error of the chain mean with `floor(sqrt(n))` batches.
///
/// Trailing draws that do not fill a batch are dropped.
pub fn mcmc_error(chain: &[f64]) -> Result<f64> {
    check_len(chain)?;
    let n = chain.len();
    let n_batches = (n as f64).sqrt().floor() as usize;
    let size = n / n_batches;
    let means: Vec<f64> = chain
        .chunks_exact(size)
        .take(n_batches)
        .map(stats::mean)
        .collect();
    Ok((stats::variance(&means) / n_batches as f64).sqrt())
}

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = stats::mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    (0..=max_lag.min(n - 1))
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Effective sample size from Geyer's initial positive sequence.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    check_len(chain)?;
    let n = chain.len();
    let nf = n as f64;
    let mut max_lag = 64.min(n - 1);
    let mut acov = autocovariances(chain, max_lag);
    if acov[0] <= 0.0 {
        // constant chain: every draw carries the same information
        return Ok(nf);
    }
    let mut tau = -1.0;
    let mut t = 0;
    loop {
        if 2 * t + 1 > max_lag {
            if max_lag >= n - 1 {
                break;
            }
            max_lag = (max_lag * 4).min(n - 1);
            acov = autocovariances(chain, max_lag);
        }
        if 2 * t + 1 > max_lag {
            break;
        }
        let pair = (acov[2 * t] + acov[2 * t + 1]) / acov[0];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        t += 1;
    }
    Ok((nf / tau.max(1e-12)).min(nf * 1.05))
}

/// R-hat computed on the two halves of the chain.
pub fn split_rhat(chain: &[f64]) -> Result<f64> {
    check_len(chain)?;
    let half = chain.len() / 2;
    let (a, b) = (&chain[..half], &chain[chain.len() - half..]);
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let (va, vb) = (stats::variance(a), stats::variance(b));
    let w = 0.5 * (va + vb);
    if w <= 0.0 {
        return Ok(if ma == mb { 1.0 } else { f64::INFINITY });
    }
    let n = half as f64;
    let grand = 0.5 * (ma + mb);
    let between = n * ((ma - grand).powi(2) + (mb - grand).powi(2));
    let var_plus = (n - 1.0) / n * w + between / n;
    Ok((var_plus / w).sqrt())
}

pub fn chain_diagnostics(chain: &[f64]) -> Result<ChainDiagnostics> {
    Ok(ChainDiagnostics {
        mce: mcmc_error(chain)?,
        ess: effective_sample_size(chain)?,
        split_rhat: split_rhat(chain)?,
    })
}

/// Diagnostics for every monitored chain of a fit. Indicator chains (`p[..]`)
/// that are constant get `ess = n` and `split_rhat = 1`.
pub fn diagnostics_report(fit: &FitResult) -> Vec<ParamDiagnostics> {
    fit.draws
        .iter()
        .filter_map(|(name, chain)| {
            let d = chain_diagnostics(chain).ok()?;
            let flagged = d.split_rhat > RHAT_FLAG || d.ess < ESS_FLAG;
            Some(ParamDiagnostics {
                parameter: name.to_string(),
                chain: d,
                flagged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::RngStream;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed, 0);
        (0..n).map(|_| r.std_normal()).collect()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed, 1);
        let mut x = r.std_normal() / (1.0 - phi * phi).sqrt();
        (0..n)
            .map(|_| {
                x = phi * x + r.std_normal();
                x
            })
            .collect()
    }

    #[test]
    fn constant_chain_has_zero_error() {
        assert_eq!(mcmc_error(&[2.5; 400]).unwrap(), 0.0);
        assert_eq!(split_rhat(&[2.5; 400]).unwrap(), 1.0);
    }

    #[test]
    fn short_chain_is_rejected() {
        assert!(matches!(mcmc_error(&[0.0; 50]), Err(Error::ShortChain { .. })));
    }

    #[test]
    fn iid_error_matches_standard_error() {
        // sqrt(1 / 1e4) = 0.01
        let mut errs = Vec::new();
        for seed in 0..20 {
            errs.push(mcmc_error(&white(10_000, seed)).unwrap());
        }
        let m = stats::mean(&errs);
        assert!((m - 0.01).abs() < 0.003, "{m}");
        for e in &errs {
            assert!((e - 0.01).abs() < 0.01 * 0.3 * 2.0);
        }
    }

    #[test]
    fn iid_error_scales_as_inverse_root_n() {
        let n = 10_000;
        let r: Vec<f64> = (0..10)
            .map(|s| mcmc_error(&white(n, 100 + s)).unwrap() / mcmc_error(&white(4 * n, 200 + s)).unwrap())
            .collect();
        let m = stats::mean(&r);
        assert!((m - 2.0).abs() < 0.4, "{m}");
    }

    #[test]
    fn ar1_ess() {
        // n (1 - phi) / (1 + phi) = n / 3 at phi = 0.5
        let n = 20_000;
        let ess = effective_sample_size(&ar1(n, 0.5, 9)).unwrap();
        let expected = n as f64 / 3.0;
        assert!((ess - expected).abs() < 0.2 * expected, "{ess}");
        let ess_w = effective_sample_size(&white(n, 4)).unwrap();
        assert!(ess_w <= n as f64 * 1.05);
        assert!(ess_w > 0.8 * n as f64);
    }

    #[test]
    fn split_rhat_detects_shift() {
        let w = white(4000, 7);
        let r = split_rhat(&w).unwrap();
        assert!((1.0..=1.02).contains(&r) || (r - 1.0).abs() < 0.02, "{r}");
        let mut shifted = white(2000, 8);
        shifted.extend(white(2000, 9).into_iter().map(|v| v + 5.0));
        assert!(split_rhat(&shifted).unwrap() > 1.05);
    }
}
