use serde::{Deserialize, Serialize};

use crate::data::{Dataset, StudyRecord};
use crate::error::{Error, Result};
use crate::randkit::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeSet {
    Fixed16,
    Fixed8,
    Unbalanced,
}

impl SizeSet {
    pub fn sizes(self) -> [usize; 5] {
        match self {
            SizeSet::Fixed16 => [16; 5],
            SizeSet::Fixed8 => [8; 5],
            SizeSet::Unbalanced => [4, 8, 6, 10, 7],
        }
    }
}

/// Generator parameters for one treatment class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Between-study correlation of the true effects.
    pub rho_b: f64,
    /// Conditional SD of the true final-outcome effects.
    pub psi2: f64,
    /// Mean true effect on the surrogate.
    pub eta1: f64,
    pub n_studies: usize,
}

impl ClassParams {
    /// Between-study SD of the true surrogate effects implied by the
    /// requested between-study correlation.
    pub fn psi1(&self) -> f64 {
        self.psi2 / (self.lambda1.abs() * (1.0 / (self.rho_b * self.rho_b) - 1.0).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// 1..=9 for the built-in scenarios.
    pub index: Option<u8>,
    pub design: Option<u8>,
    pub size_set: Option<SizeSet>,
    pub classes: Vec<ClassParams>,
    /// Within-study standard error of both estimates.
    pub sigma: f64,
    pub rho_w: f64,
}

impl ScenarioSpec {
    pub fn label(&self) -> String {
        match self.index {
            Some(i) => format!("scenario{i}"),
            None => "custom".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("scenario has no classes".into()));
        }
        if !(self.sigma > 0.0) || !(self.rho_w.abs() < 1.0) {
            return Err(Error::Config("sigma must be > 0 and |rho_w| < 1".into()));
        }
        for (j, c) in self.classes.iter().enumerate() {
            if !(c.rho_b > 0.0 && c.rho_b < 1.0) {
                return Err(Error::Config(format!("class {}: rho_b must lie in (0, 1)", j + 1)));
            }
            if !(c.psi2 > 0.0) || c.lambda1 == 0.0 || c.n_studies == 0 {
                return Err(Error::Config(format!(
                    "class {}: need psi2 > 0, lambda1 != 0 and at least one study",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

const DESIGN_SLOPES: [[f64; 5]; 3] = [
    [0.40, 0.45, 0.50, 0.55, 0.60],
    [0.60, 1.55, 1.60, 1.65, 1.70],
    [0.40, 0.50, 0.60, 0.70, 0.80],
];
const DESIGN_RHO_B: [[f64; 5]; 3] = [
    [0.89, 0.90, 0.91, 0.92, 0.93],
    [0.93, 0.99, 0.99, 0.99, 0.99],
    [0.90, 0.70, 0.93, 0.75, 0.95],
];
const DESIGN_PSI2: [[f64; 5]; 3] = [
    [0.08; 5],
    [0.08; 5],
    [0.08, 0.30, 0.08, 0.30, 0.08],
];

/// One of the nine built-in scenarios: 1-3 design 1, 4-6 design 2, 7-9
/// design 3, each cycling through 16 per class, 8 per class, unbalanced.
pub fn build_scenario(index: u8) -> Result<ScenarioSpec> {
    if !(1..=9).contains(&index) {
        return Err(Error::Config(format!("scenario index must be 1..9, got {index}")));
    }
    let design = (index - 1) / 3;
    let size_set = match (index - 1) % 3 {
        0 => SizeSet::Fixed16,
        1 => SizeSet::Fixed8,
        _ => SizeSet::Unbalanced,
    };
    let sizes = size_set.sizes();
    let d = design as usize;
    let classes = (0..5)
        .map(|j| ClassParams {
            lambda0: 0.0,
            lambda1: DESIGN_SLOPES[d][j],
            rho_b: DESIGN_RHO_B[d][j],
            psi2: DESIGN_PSI2[d][j],
            eta1: 0.3,
            n_studies: sizes[j],
        })
        .collect();
    Ok(ScenarioSpec {
        index: Some(index),
        design: Some(design + 1),
        size_set: Some(size_set),
        classes,
        sigma: 0.1,
        rho_w: 0.4,
    })
}

/// Latent truths behind a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
    /// Per study, dataset order.
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
}

pub fn class_label(j: usize) -> String {
    format!("c{}", j + 1)
}

/// Draws one replicate dataset from the product-normal bivariate
/// random-effects generator.
pub fn generate_replication(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<(Dataset, TruthRecord)> {
    spec.validate()?;
    let sigma = spec.sigma;
    let rho = spec.rho_w;
    let cond = (1.0 - rho * rho).sqrt();
    let mut studies = Vec::new();
    let mut mu1s = Vec::new();
    let mut mu2s = Vec::new();
    for (j, c) in spec.classes.iter().enumerate() {
        let psi1 = c.psi1();
        for i in 0..c.n_studies {
            let mu1 = rng.normal(c.eta1, psi1);
            let mu2 = rng.normal(c.lambda0 + c.lambda1 * mu1, c.psi2);
            let z1 = rng.std_normal();
            let z2 = rng.std_normal();
            let y1 = mu1 + sigma * z1;
            let y2 = mu2 + sigma * (rho * z1 + cond * z2);
            studies.push(StudyRecord {
                study_id: format!("{}_s{}", class_label(j), i + 1),
                class_id: class_label(j),
                y1,
                se1: sigma,
                y2,
                se2: sigma,
                rho_w: rho,
            });
            mu1s.push(mu1);
            mu2s.push(mu2);
        }
    }
    Ok((
        Dataset::new(studies)?,
        TruthRecord {
            lambda0: spec.classes.iter().map(|c| c.lambda0).collect(),
            lambda1: spec.classes.iter().map(|c| c.lambda1).collect(),
            mu1: mu1s,
            mu2: mu2s,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scenario_table_values() {
        let s4 = build_scenario(4).unwrap();
        assert_eq!(s4.design, Some(2));
        assert_eq!(s4.classes[0].lambda1, 0.60);
        assert_eq!(s4.classes[1].lambda1, 1.55);
        assert_eq!(s4.classes[1].rho_b, 0.99);
        assert!(s4.classes.iter().all(|c| c.n_studies == 16));

        let s9 = build_scenario(9).unwrap();
        let sizes: Vec<usize> = s9.classes.iter().map(|c| c.n_studies).collect();
        assert_eq!(sizes, vec![4, 8, 6, 10, 7]);
        assert_eq!(s9.classes[1].psi2, 0.30);
        assert_eq!(s9.classes[3].psi2, 0.30);
        assert_eq!(s9.classes[0].psi2, 0.08);

        let s1 = build_scenario(1).unwrap();
        assert!(s1.classes.iter().all(|c| c.lambda0 == 0.0 && c.eta1 == 0.3));
        assert_eq!(s1.sigma, 0.1);
        assert_eq!(s1.rho_w, 0.4);

        assert!(build_scenario(0).is_err());
        assert!(build_scenario(10).is_err());
    }

    #[test]
    fn psi1_formula() {
        let c = ClassParams {
            lambda0: 0.0,
            lambda1: 0.60,
            rho_b: 0.93,
            psi2: 0.08,
            eta1: 0.3,
            n_studies: 1,
        };
        let direct = 0.08 / (0.6 * (1.0f64 / (0.93 * 0.93) - 1.0).sqrt());
        assert_abs_diff_eq!(c.psi1(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(c.psi1(), 0.33737, epsilon = 1e-5);

        let c = ClassParams {
            rho_b: std::f64::consts::FRAC_1_SQRT_2,
            lambda1: -0.5,
            ..c
        };
        assert_abs_diff_eq!(c.psi1(), 0.08 / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn design1_fixed16_shape() {
        let spec = build_scenario(1).unwrap();
        let (ds, truth) = generate_replication(&spec, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(ds.n_studies(), 80);
        assert_eq!(ds.n_classes(), 5);
        assert_eq!(truth.mu2.len(), 80);
    }

    #[test]
    fn generated_true_effects_have_requested_spread_and_correlation() {
        // one class with many studies: sd(mu1) ~ psi1, corr(mu1, mu2) ~ rho_b
        let c = ClassParams {
            lambda0: 0.0,
            lambda1: 0.6,
            rho_b: 0.93,
            psi2: 0.08,
            eta1: 0.3,
            n_studies: 100_000,
        };
        let spec = ScenarioSpec {
            index: None,
            design: None,
            size_set: None,
            classes: vec![c],
            sigma: 0.1,
            rho_w: 0.4,
        };
        let (_, t) = generate_replication(&spec, &mut RngStream::new(2, 0)).unwrap();
        let sd1 = stats::sd(&t.mu1);
        assert!((sd1 / c.psi1() - 1.0).abs() < 0.02);
        assert!((stats::correlation(&t.mu1, &t.mu2) - 0.93).abs() < 0.02);
    }
}
