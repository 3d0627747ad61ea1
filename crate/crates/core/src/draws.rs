use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Parameter names as stored in [`PosteriorDraws`].
pub mod names {
    pub const BETA0: &str = "beta0";
    pub const BETA1: &str = "beta1";
    pub const XI0: &str = "xi0";
    pub const XI1: &str = "xi1";

    pub fn lambda0(class: &str) -> String {
        format!("lambda0[{class}]")
    }
    pub fn lambda1(class: &str) -> String {
        format!("lambda1[{class}]")
    }
    pub fn psi(class: &str) -> String {
        format!("psi[{class}]")
    }
    pub fn p(class: &str) -> String {
        format!("p[{class}]")
    }
    pub fn mu1(study: &str) -> String {
        format!("mu1[{study}]")
    }
    pub fn mu2(study: &str) -> String {
        format!("mu2[{study}]")
    }
}

/// Retained draws keyed by parameter name, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    chains: IndexMap<String, Vec<f64>>,
}

/// Posterior summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

impl PosteriorDraws {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a chain; every chain must share the same length.
    pub fn insert(&mut self, name: impl Into<String>, chain: Vec<f64>) -> Result<()> {
        if let Some(len) = self.len() {
            if chain.len() != len {
                return Err(Error::Config(format!(
                    "chain length {} differs from existing length {len}",
                    chain.len()
                )));
            }
        }
        self.chains.insert(name.into(), chain);
        Ok(())
    }

    /// Common chain length, `None` when empty.
    pub fn len(&self) -> Option<usize> {
        self.chains.values().next().map(Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.chains.get(name).map(Vec::as_slice)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::Unknown(format!("parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.chains.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.chains.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn mean(&self, name: &str) -> Result<f64> {
        Ok(stats::mean(self.require(name)?))
    }

    /// Absorbs another draw set, keeping this set's names on collision.
    pub fn merge(&mut self, other: PosteriorDraws) -> Result<()> {
        for (k, v) in other.chains {
            if !self.chains.contains_key(&k) {
                self.insert(k, v)?;
            }
        }
        Ok(())
    }

    pub fn summarize(&self) -> Vec<ParamSummary> {
        self.chains
            .iter()
            .map(|(name, chain)| {
                let sorted = stats::sorted(chain);
                ParamSummary {
                    parameter: name.clone(),
                    mean: stats::mean(chain),
                    sd: stats::sd(chain),
                    q025: stats::quantile_sorted(&sorted, 0.025),
                    q50: stats::quantile_sorted(&sorted, 0.5),
                    q975: stats::quantile_sorted(&sorted, 0.975),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enforces_equal_lengths() {
        let mut d = PosteriorDraws::new();
        d.insert("a", vec![1.0, 2.0]).unwrap();
        assert!(d.insert("b", vec![1.0]).is_err());
        assert_eq!(d.len(), Some(2));
        assert_eq!(d.mean("a").unwrap(), 1.5);
        assert!(d.require("zzz").is_err());
    }
}
