//! Shared Metropolis-within-Gibbs engine for the three surrogate models.
//!
//! One sweep, in order:
//!
//! 1. P-EX only: mixture indicator `p_j | lambda1_j, beta1, xi1`.
//! 2. `(lambda0_j, lambda1_j)` jointly, with the latent final-outcome
//!    effects integrated out (weighted conjugate regression of the
//!    conditional `Y2 | Y1, mu1` on `mu1`).
//! 3. `psi_j` by slice sampling, same collapsed likelihood.
//! 4. Hierarchical models: `beta0`, `beta1` (conjugate), `xi0`, `xi1` (slice).
//! 5. `(mu1_ij, mu2_ij)` jointly from their bivariate normal full conditional.
//!
//! Steps 2 and 3 marginalize `mu2` and step 5 redraws it before anything
//! else conditions on it, so the sweep is a valid partially collapsed
//! Gibbs sampler for the joint posterior.

use crate::data::{Dataset, McmcConfig, PriorSpec};
use crate::draws::{names, PosteriorDraws};
use crate::error::{Error, Result};
use crate::randkit::{normal_logpdf, slice_sample_positive, RngStream};

use super::{FitOptions, Hyper, ModelKind, PsiPrior, Recording};

#[derive(Debug, Clone)]
struct Study {
    class: usize,
    has_y2: bool,
    /// rho * se2 / se1
    c: f64,
    /// se2^2 (1 - rho^2): variance of Y2 given Y1 and the true effects
    v: f64,
    /// conditional outcome with the mu1-independent part folded in: y2 - c*y1
    y2_adj: f64,
    // inverse within-study covariance and precision-weighted observation
    q11: f64,
    q12: f64,
    q22: f64,
    h1: f64,
    h2: f64,
}

#[derive(Debug, Clone)]
struct ClassState {
    members: Vec<usize>,
    lambda0: f64,
    lambda1: f64,
    psi: f64,
    exchangeable: bool,
    pi: f64,
    /// shared `v` when all observed members have the same conditional variance
    common_v: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Standard,
    FEx,
    PEx,
}

pub(crate) struct Engine<'a> {
    kind: Kind,
    priors: PriorSpec,
    opts: &'a FitOptions,
    psi_scale: f64,
    studies: Vec<Study>,
    classes: Vec<ClassState>,
    hyper: Hyper,
    mu1: Vec<f64>,
    mu2: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        data: &Dataset,
        model: &ModelKind,
        priors: PriorSpec,
        opts: &'a FitOptions,
    ) -> Result<Self> {
        let kind = match model {
            ModelKind::Standard => Kind::Standard,
            ModelKind::FEx => Kind::FEx,
            ModelKind::PEx { .. } => Kind::PEx,
        };
        let class_of = data.class_of_studies();
        let mut studies = Vec::with_capacity(data.n_studies());
        for (i, s) in data.studies().iter().enumerate() {
            let one_m = 1.0 - s.rho_w * s.rho_w;
            let q11 = 1.0 / (s.se1 * s.se1 * one_m);
            let q22 = 1.0 / (s.se2 * s.se2 * one_m);
            let q12 = -s.rho_w / (s.se1 * s.se2 * one_m);
            let has_y2 = opts.holdout != Some(i);
            let (q11, q12, q22) = if has_y2 { (q11, q12, q22) } else { (1.0 / (s.se1 * s.se1), 0.0, 0.0) };
            let (h1, h2) = if has_y2 {
                (q11 * s.y1 + q12 * s.y2, q12 * s.y1 + q22 * s.y2)
            } else {
                (q11 * s.y1, 0.0)
            };
            let c = s.rho_w * s.se2 / s.se1;
            studies.push(Study {
                class: class_of[i],
                has_y2,
                c,
                v: s.se2 * s.se2 * one_m,
                y2_adj: s.y2 - c * s.y1,
                q11,
                q12,
                q22,
                h1,
                h2,
            });
        }

        let pis: Vec<f64> = match model {
            ModelKind::PEx { pi } => {
                if pi.len() != data.n_classes() {
                    return Err(Error::Config(format!(
                        "expected {} mixture probabilities, got {}",
                        data.n_classes(),
                        pi.len()
                    )));
                }
                pi.clone()
            }
            _ => vec![1.0; data.n_classes()],
        };

        let mut classes = Vec::with_capacity(data.n_classes());
        for (j, &pi) in pis.iter().enumerate() {
            let members: Vec<usize> = (0..studies.len()).filter(|&i| studies[i].class == j).collect();
            let observed: Vec<f64> = members
                .iter()
                .filter(|&&i| studies[i].has_y2)
                .map(|&i| studies[i].v)
                .collect();
            let common_v = match observed.first() {
                Some(&v0) if observed.iter().all(|&v| v == v0) => Some(v0),
                None => Some(1.0),
                _ => None,
            };
            let slope = ols_slope(data, &members);
            classes.push(ClassState {
                members,
                lambda0: 0.0,
                lambda1: slope,
                psi: 0.1,
                exchangeable: pi > 0.0,
                pi,
                common_v,
            });
        }

        let beta1 = classes.iter().map(|c| c.lambda1).sum::<f64>() / classes.len() as f64;
        let mut engine = Self {
            kind,
            priors,
            opts,
            psi_scale: match opts.psi_prior {
                PsiPrior::BayesFactor => priors.psi_bf_scale,
                PsiPrior::Vague => priors.b,
            },
            mu1: data.studies().iter().map(|s| s.y1).collect(),
            mu2: data.studies().iter().map(|s| s.y2).collect(),
            studies,
            classes,
            hyper: Hyper {
                beta0: 0.0,
                beta1,
                xi0: 0.1,
                xi1: 0.1,
            },
        };
        if let Some(h) = opts.overrides.fixed_hyper {
            engine.hyper = h;
        }
        if let Some(psi) = opts.overrides.fixed_psi {
            for c in &mut engine.classes {
                c.psi = psi;
            }
        }
        if let Some((l0, l1)) = opts.overrides.fixed_lambda {
            for c in &mut engine.classes {
                c.lambda0 = l0;
                c.lambda1 = l1;
            }
        }
        for i in 0..engine.studies.len() {
            if !engine.studies[i].has_y2 {
                let c = &engine.classes[engine.studies[i].class];
                engine.mu2[i] = c.lambda0 + c.lambda1 * engine.mu1[i];
            }
        }
        Ok(engine)
    }

    fn hierarchical(&self) -> bool {
        !matches!(self.kind, Kind::Standard)
    }

    pub(crate) fn run(
        mut self,
        data: &Dataset,
        cfg: &McmcConfig,
        rng: &mut RngStream,
    ) -> Result<PosteriorDraws> {
        let recorder = Recorder::new(data, self.kind, &self.opts.record, cfg.n_kept());
        let mut recorder = recorder;
        for _ in 0..cfg.n_burnin {
            self.sweep(rng)?;
        }
        for it in 0..cfg.n_iter {
            self.sweep(rng)?;
            if (it + 1) % cfg.thin == 0 {
                recorder.record(&self);
            }
        }
        recorder.finish()
    }

    fn sweep(&mut self, rng: &mut RngStream) -> Result<()> {
        let ov = &self.opts.overrides;
        if matches!(self.kind, Kind::PEx) {
            let b = self.priors.b;
            let Hyper { beta1, xi1, .. } = self.hyper;
            for c in &mut self.classes {
                let w = mixture_weight_unchecked(c.lambda1, beta1, xi1, b, c.pi);
                c.exchangeable = rng.bernoulli(w);
            }
        }
        if ov.fixed_lambda.is_none() {
            for j in 0..self.classes.len() {
                self.update_lambda(j, rng)?;
            }
        }
        if ov.fixed_psi.is_none() {
            for j in 0..self.classes.len() {
                self.update_psi(j, rng)?;
            }
        }
        if self.hierarchical() && ov.fixed_hyper.is_none() {
            self.update_hyper(rng)?;
        }
        for i in 0..self.studies.len() {
            self.update_mu(i, rng);
        }
        Ok(())
    }

    fn slope_prior(&self, c: &ClassState) -> (f64, f64) {
        match self.kind {
            Kind::Standard => (0.0, self.priors.a),
            Kind::FEx => (self.hyper.beta1, self.hyper.xi1),
            Kind::PEx if c.exchangeable => (self.hyper.beta1, self.hyper.xi1),
            Kind::PEx => (0.0, self.priors.b),
        }
    }

    fn intercept_prior(&self) -> (f64, f64) {
        match self.kind {
            Kind::Standard => (0.0, self.priors.a),
            _ => (self.hyper.beta0, self.hyper.xi0),
        }
    }

    fn update_lambda(&mut self, j: usize, rng: &mut RngStream) -> Result<()> {
        let c = &self.classes[j];
        let (m0, s0) = self.intercept_prior();
        let (m1, s1) = self.slope_prior(c);
        let psi2 = c.psi * c.psi;
        let mut p00 = 1.0 / (s0 * s0);
        let mut p11 = 1.0 / (s1 * s1);
        let mut p01 = 0.0;
        let mut g0 = m0 * p00;
        let mut g1 = m1 * p11;
        if !self.opts.overrides.ignore_likelihood {
            for &i in &c.members {
                let s = &self.studies[i];
                if !s.has_y2 {
                    continue;
                }
                let w = 1.0 / (psi2 + s.v);
                let x = self.mu1[i];
                let r = s.y2_adj + s.c * x;
                p00 += w;
                p01 += w * x;
                p11 += w * x * x;
                g0 += w * r;
                g1 += w * x * r;
            }
        }
        let (l0, l1) = draw_bivariate(p00, p01, p11, g0, g1, rng);
        if !(l0.is_finite() && l1.is_finite()) {
            return Err(Error::Sampler(format!("non-finite regression draw in class {j}")));
        }
        let c = &mut self.classes[j];
        c.lambda0 = l0;
        c.lambda1 = l1;
        Ok(())
    }

    fn update_psi(&mut self, j: usize, rng: &mut RngStream) -> Result<()> {
        let c = &self.classes[j];
        let scale2 = self.psi_scale * self.psi_scale;
        let prior = move |psi: f64| -0.5 * psi * psi / scale2;
        let width = self.opts.slice_width;
        let new = if self.opts.overrides.ignore_likelihood {
            slice_sample_positive(rng, prior, c.psi, width)
        } else if let Some(v) = c.common_v {
            let mut m = 0.0;
            let mut ss = 0.0;
            for &i in &c.members {
                let s = &self.studies[i];
                if s.has_y2 {
                    let x = self.mu1[i];
                    let e = s.y2_adj + s.c * x - c.lambda0 - c.lambda1 * x;
                    ss += e * e;
                    m += 1.0;
                }
            }
            slice_sample_positive(
                rng,
                |psi| {
                    let w = psi * psi + v;
                    -0.5 * m * w.ln() - 0.5 * ss / w + prior(psi)
                },
                c.psi,
                width,
            )
        } else {
            let terms: Vec<(f64, f64)> = c
                .members
                .iter()
                .filter(|&&i| self.studies[i].has_y2)
                .map(|&i| {
                    let s = &self.studies[i];
                    let x = self.mu1[i];
                    let e = s.y2_adj + s.c * x - c.lambda0 - c.lambda1 * x;
                    (e * e, s.v)
                })
                .collect();
            slice_sample_positive(
                rng,
                |psi| {
                    let p2 = psi * psi;
                    terms
                        .iter()
                        .map(|&(e2, v)| {
                            let w = p2 + v;
                            -0.5 * w.ln() - 0.5 * e2 / w
                        })
                        .sum::<f64>()
                        + prior(psi)
                },
                c.psi,
                width,
            )
        }
        .map_err(|e| Error::Sampler(format!("psi[{j}]: {e}")))?;
        self.classes[j].psi = new;
        Ok(())
    }

    fn update_hyper(&mut self, rng: &mut RngStream) -> Result<()> {
        let a2 = self.priors.a * self.priors.a;
        let b2 = self.priors.b * self.priors.b;
        let width = self.opts.slice_width;

        // intercept mean and spread, all classes
        let l0: Vec<f64> = self.classes.iter().map(|c| c.lambda0).collect();
        self.hyper.beta0 = draw_normal_mean(&l0, self.hyper.xi0, a2, rng);
        let beta0 = self.hyper.beta0;
        self.hyper.xi0 = slice_sd(&l0, beta0, b2, self.hyper.xi0, width, rng)
            .map_err(|e| Error::Sampler(format!("xi0: {e}")))?;

        // slope mean and spread, exchangeable classes only
        let l1: Vec<f64> = self
            .classes
            .iter()
            .filter(|c| c.exchangeable || matches!(self.kind, Kind::FEx))
            .map(|c| c.lambda1)
            .collect();
        self.hyper.beta1 = draw_normal_mean(&l1, self.hyper.xi1, a2, rng);
        let beta1 = self.hyper.beta1;
        self.hyper.xi1 = slice_sd(&l1, beta1, b2, self.hyper.xi1, width, rng)
            .map_err(|e| Error::Sampler(format!("xi1: {e}")))?;
        Ok(())
    }

    fn update_mu(&mut self, i: usize, rng: &mut RngStream) {
        let s = &self.studies[i];
        let c = &self.classes[s.class];
        let inv_a2 = 1.0 / (self.priors.a * self.priors.a);
        let (q11, q12, q22, h1, h2) = if self.opts.overrides.ignore_likelihood {
            (0.0, 0.0, 0.0, 0.0, 0.0)
        } else {
            (s.q11, s.q12, s.q22, s.h1, s.h2)
        };
        let (l0, l1) = (c.lambda0, c.lambda1);
        if c.psi == 0.0 {
            // mu2 sits exactly on the regression line
            let prec = inv_a2 + q11 + 2.0 * l1 * q12 + l1 * l1 * q22;
            let lin = (h1 - q12 * l0) + l1 * (h2 - q22 * l0);
            let m1 = lin / prec + rng.std_normal() / prec.sqrt();
            self.mu1[i] = m1;
            self.mu2[i] = l0 + l1 * m1;
            return;
        }
        let t = 1.0 / (c.psi * c.psi);
        // joint precision: likelihood + mu1 prior + regression prior on mu2
        let a = inv_a2 + q11;
        let big11 = a + l1 * l1 * t;
        let big12 = q12 - l1 * t;
        let big22 = q22 + t;
        let det = (a * q22 - q12 * q12) + t * (a + l1 * l1 * q22 + 2.0 * q12 * l1);
        let g1 = h1 - l1 * l0 * t;
        let g2 = h2 + l0 * t;
        let m1 = (big22 * g1 - big12 * g2) / det;
        let m2 = (big11 * g2 - big12 * g1) / det;
        let x1 = m1 + (big22 / det).sqrt() * rng.std_normal();
        let x2 = m2 - (big12 / big22) * (x1 - m1) + rng.std_normal() / big22.sqrt();
        self.mu1[i] = x1;
        self.mu2[i] = x2;
    }
}

/// Draw from N(P^{-1} g, P^{-1}) for a 2x2 precision P.
fn draw_bivariate(p00: f64, p01: f64, p11: f64, g0: f64, g1: f64, rng: &mut RngStream) -> (f64, f64) {
    let det = p00 * p11 - p01 * p01;
    let m0 = (p11 * g0 - p01 * g1) / det;
    let m1 = (p00 * g1 - p01 * g0) / det;
    let x0 = m0 + (p11 / det).sqrt() * rng.std_normal();
    let x1 = m1 - (p01 / p11) * (x0 - m0) + rng.std_normal() / p11.sqrt();
    (x0, x1)
}

/// Conjugate draw of a normal mean given values ~ N(mean, sd^2), prior N(0, prior_var).
fn draw_normal_mean(values: &[f64], sd: f64, prior_var: f64, rng: &mut RngStream) -> f64 {
    let tau = 1.0 / (sd * sd);
    let prec = 1.0 / prior_var + values.len() as f64 * tau;
    let mean = tau * values.iter().sum::<f64>() / prec;
    mean + rng.std_normal() / prec.sqrt()
}

/// Slice update of an SD with half-normal prior (variance `prior_var`).
fn slice_sd(
    values: &[f64],
    center: f64,
    prior_var: f64,
    current: f64,
    width: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let n = values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - center) * (v - center)).sum();
    slice_sample_positive(
        rng,
        |x| -n * x.ln() - 0.5 * ss / (x * x) - 0.5 * x * x / prior_var,
        current,
        width,
    )
}

pub fn mixture_weight_unchecked(lambda1: f64, beta1: f64, xi1: f64, b: f64, pi: f64) -> f64 {
    if pi <= 0.0 {
        return 0.0;
    }
    if pi >= 1.0 {
        return 1.0;
    }
    // ratio form avoids underflow of both densities far in the tails
    let log_ex = pi.ln() + normal_logpdf(lambda1, beta1, xi1);
    let log_nex = (1.0 - pi).ln() + normal_logpdf(lambda1, 0.0, b);
    let d = log_nex - log_ex;
    if d > 700.0 {
        0.0
    } else {
        1.0 / (1.0 + d.exp())
    }
}

#[cfg(test)]
fn mixture_weight_direct(lambda1: f64, beta1: f64, xi1: f64, b: f64, pi: f64) -> f64 {
    use crate::randkit::normal_pdf;
    let ex = pi * normal_pdf(lambda1, beta1, xi1);
    let nex = (1.0 - pi) * normal_pdf(lambda1, 0.0, b);
    ex / (ex + nex)
}

fn ols_slope(data: &Dataset, members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let s = data.studies();
    let n = members.len() as f64;
    let mx = members.iter().map(|&i| s[i].y1).sum::<f64>() / n;
    let my = members.iter().map(|&i| s[i].y2).sum::<f64>() / n;
    let sxx: f64 = members.iter().map(|&i| (s[i].y1 - mx).powi(2)).sum();
    let sxy: f64 = members.iter().map(|&i| (s[i].y1 - mx) * (s[i].y2 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Column-oriented storage of retained draws.
struct Recorder {
    names: Vec<String>,
    bufs: Vec<Vec<f64>>,
    n_classes: usize,
    with_p: bool,
    with_hyper: bool,
    mu_studies: Vec<usize>,
    mu1_too: bool,
}

impl Recorder {
    fn new(data: &Dataset, kind: Kind, record: &Recording, cap: usize) -> Self {
        let with_p = matches!(kind, Kind::PEx);
        let with_hyper = !matches!(kind, Kind::Standard);
        let mut names_v = Vec::new();
        for c in data.classes() {
            names_v.push(names::lambda0(c));
            names_v.push(names::lambda1(c));
            names_v.push(names::psi(c));
            if with_p {
                names_v.push(names::p(c));
            }
        }
        if with_hyper {
            for n in [names::BETA0, names::BETA1, names::XI0, names::XI1] {
                names_v.push(n.to_string());
            }
        }
        let (mu_studies, mu1_too) = match record {
            Recording::All => ((0..data.n_studies()).collect(), true),
            Recording::Parameters => (Vec::new(), false),
            Recording::Mu2Of(i) => (vec![*i], false),
        };
        for &i in &mu_studies {
            let id = &data.studies()[i].study_id;
            if mu1_too {
                names_v.push(names::mu1(id));
            }
            names_v.push(names::mu2(id));
        }
        let bufs = names_v.iter().map(|_| Vec::with_capacity(cap)).collect();
        Self {
            names: names_v,
            bufs,
            n_classes: data.n_classes(),
            with_p,
            with_hyper,
            mu_studies,
            mu1_too,
        }
    }

    fn record(&mut self, e: &Engine<'_>) {
        let mut k = 0;
        let mut push = |v: f64| {
            self.bufs[k].push(v);
            k += 1;
        };
        for c in e.classes.iter().take(self.n_classes) {
            push(c.lambda0);
            push(c.lambda1);
            push(c.psi);
            if self.with_p {
                push(if c.exchangeable { 1.0 } else { 0.0 });
            }
        }
        if self.with_hyper {
            push(e.hyper.beta0);
            push(e.hyper.beta1);
            push(e.hyper.xi0);
            push(e.hyper.xi1);
        }
        for &i in &self.mu_studies {
            if self.mu1_too {
                push(e.mu1[i]);
            }
            push(e.mu2[i]);
        }
    }

    fn finish(self) -> Result<PosteriorDraws> {
        let mut d = PosteriorDraws::new();
        for (n, b) in self.names.into_iter().zip(self.bufs) {
            d.insert(n, b)?;
        }
        Ok(d)
    }
}
