//! Expectation-maximization over deviation mixtures.
//!
//! Component 0 is always the valid population (Gaussian around zero);
//! the remaining components model anomalies. Parametric families cover
//! physically caused degradation (log-normal, Rayleigh — fitted on the
//! magnitude of negative deviations), the non-parametric histogram covers
//! arbitrary misreporting. Histogram bin edges are frozen at initialization
//! so every M step is an exact maximizer and the likelihood stays monotone.

use serde::{Deserialize, Serialize};

use super::{PodError, PriorSet};

/// Density floor preventing -inf log-likelihoods for out-of-support points.
const PDF_FLOOR: f64 = 1e-300;
const SIGMA_FLOOR: f64 = 1e-9;
/// Histogram bin count for the non-parametric family.
const NP_BINS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentFamily {
    Gaussian,
    LogNormal,
    Rayleigh,
    Nonparametric,
}

impl ComponentFamily {
    /// Whether the family models objectively caused degradation rather than
    /// misreporting. Drives anomaly attribution downstream.
    pub fn is_objective(&self) -> bool {
        matches!(self, ComponentFamily::LogNormal | ComponentFamily::Rayleigh)
    }
}

/// One fitted mixture component θ_★.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub family: ComponentFamily,
    pub weight: f64,
    /// Gaussian: [μ, σ]; LogNormal: [μ_ln, σ_ln]; Rayleigh: [σ];
    /// Nonparametric: [lo, bin_width, mass_0, ..].
    pub params: Vec<f64>,
    pub dropped: bool,
}

impl Component {
    pub fn pdf(&self, x: f64) -> f64 {
        if self.dropped {
            return PDF_FLOOR;
        }
        let v = match self.family {
            ComponentFamily::Gaussian => {
                let (mu, sigma) = (self.params[0], self.params[1].max(SIGMA_FLOOR));
                let z = (x - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            // Degradation magnitude y = -x must be positive.
            ComponentFamily::LogNormal => {
                let y = -x;
                if y <= 1e-12 {
                    0.0
                } else {
                    let (mu, sigma) = (self.params[0], self.params[1].max(SIGMA_FLOOR));
                    let z = (y.ln() - mu) / sigma;
                    (-0.5 * z * z).exp()
                        / (y * sigma * (2.0 * std::f64::consts::PI).sqrt())
                }
            }
            ComponentFamily::Rayleigh => {
                let y = -x;
                if y <= 0.0 {
                    0.0
                } else {
                    let s2 = (self.params[0] * self.params[0]).max(SIGMA_FLOOR);
                    y / s2 * (-0.5 * y * y / s2).exp()
                }
            }
            ComponentFamily::Nonparametric => {
                let (lo, width) = (self.params[0], self.params[1]);
                let masses = &self.params[2..];
                if width <= 0.0 {
                    0.0
                } else {
                    let b = ((x - lo) / width).floor();
                    if b < 0.0 || b >= masses.len() as f64 {
                        0.0
                    } else {
                        masses[b as usize] / width
                    }
                }
            }
        };
        v.max(PDF_FLOOR)
    }
}

/// Result of one mixture fit.
#[derive(Clone, Debug)]
pub struct EmFit {
    /// Per sample, per component, in component order; rows sum to 1.
    pub responsibilities: Vec<Vec<f64>>,
    pub components: Vec<Component>,
    /// Mean log-likelihood after every iteration; non-decreasing.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmFit {
    /// Posterior mass on non-valid components for sample `i`.
    pub fn anomalous_responsibility(&self, i: usize) -> f64 {
        1.0 - self.responsibilities[i][0]
    }

    /// The anomalous component with the highest posterior for sample `i`.
    pub fn dominant_anomalous_family(&self, i: usize) -> Option<ComponentFamily> {
        self.responsibilities[i]
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(k, _)| !self.components[*k].dropped)
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite responsibilities"))
            .map(|(k, _)| self.components[k].family)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Cold-start components from robust sample statistics; `init_theta` from
/// the prior set overrides positionally when present.
fn init_components(xs: &[f64], priors: &PriorSet) -> Vec<Component> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite deviations"));
    let med = median(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mad = (1.4826 * median(&dev)).max(1e-6);
    let lo = sorted[0] - 1e-9;
    let hi = sorted[sorted.len() - 1] + 1e-9;
    // Magnitude scale of the negative tail, for degradation families.
    let tail_q = -sorted[(sorted.len() as f64 * 0.05) as usize];
    let tail = if tail_q > 1e-6 { tail_q } else { 3.0 * mad };

    let m = priors.component_families.len();
    let mut comps = Vec::with_capacity(m);
    for (k, family) in priors.component_families.iter().enumerate() {
        let weight = if k == 0 {
            0.85
        } else {
            0.15 / (m - 1).max(1) as f64
        };
        let params = match family {
            ComponentFamily::Gaussian => {
                if k == 0 {
                    vec![med, mad]
                } else {
                    // secondary Gaussian seeded on the heavy tail
                    vec![-tail, mad]
                }
            }
            ComponentFamily::LogNormal => vec![tail.max(1e-6).ln(), 0.75],
            ComponentFamily::Rayleigh => vec![(tail / 1.2533141373155003).max(1e-6)],
            ComponentFamily::Nonparametric => {
                let width = ((hi - lo) / NP_BINS as f64).max(1e-12);
                // Seed the histogram on the robust-outlier tail so it starts
                // in the anomaly basin instead of competing for the bulk.
                let mut masses = vec![1e-6; NP_BINS];
                let mut outliers = 0usize;
                for x in &sorted {
                    if (x - med).abs() > 3.0 * mad {
                        let b = (((x - lo) / width) as usize).min(NP_BINS - 1);
                        masses[b] += 1.0;
                        outliers += 1;
                    }
                }
                if outliers == 0 {
                    masses = vec![1.0 / NP_BINS as f64; NP_BINS];
                }
                let total: f64 = masses.iter().sum();
                masses.iter_mut().for_each(|m| *m /= total);
                let mut p = vec![lo, width];
                p.extend(masses);
                p
            }
        };
        comps.push(Component {
            family: *family,
            weight,
            params,
            dropped: false,
        });
    }
    if let Some(init) = &priors.init_theta {
        for (k, theta) in init.iter().enumerate() {
            if k < comps.len() && !theta.is_empty() {
                // Nonparametric keeps its data-derived support.
                if comps[k].family != ComponentFamily::Nonparametric {
                    comps[k].params = theta.clone();
                }
            }
        }
    }
    comps
}

/// A warm-started histogram whose frozen support no longer covers the data
/// would floor out exactly the samples it is meant to capture; rebuild such
/// components from the current sample instead.
fn refresh_stale_supports(comps: &mut [Component], xs: &[f64], priors: &PriorSet) {
    let needs_refresh = comps.iter().any(|c| {
        c.family == ComponentFamily::Nonparametric && {
            let (lo, width) = (c.params[0], c.params[1]);
            let hi = lo + width * (c.params.len() - 2) as f64;
            xs.iter().any(|x| *x < lo || *x > hi)
        }
    });
    if !needs_refresh {
        return;
    }
    let fresh = init_components(xs, priors);
    for (c, f) in comps.iter_mut().zip(fresh) {
        if c.family == ComponentFamily::Nonparametric {
            let weight = if c.dropped { f.weight } else { c.weight };
            *c = Component { weight, ..f };
        }
    }
}

fn m_step(comp: &mut Component, xs: &[f64], resp: &[f64]) {
    let total: f64 = resp.iter().sum();
    if total < 1e-12 * xs.len() as f64 {
        comp.dropped = true;
        comp.weight = 0.0;
        log::warn!(
            "EM component {:?} lost all responsibility mass; dropped",
            comp.family
        );
        return;
    }
    match comp.family {
        ComponentFamily::Gaussian => {
            let mu: f64 = xs.iter().zip(resp).map(|(x, r)| r * x).sum::<f64>() / total;
            let var: f64 = xs
                .iter()
                .zip(resp)
                .map(|(x, r)| r * (x - mu) * (x - mu))
                .sum::<f64>()
                / total;
            comp.params = vec![mu, var.sqrt().max(SIGMA_FLOOR)];
        }
        ComponentFamily::LogNormal => {
            let mut wsum = 0.0;
            let mut mu = 0.0;
            for (x, r) in xs.iter().zip(resp) {
                let y = -x;
                if y > 1e-12 {
                    mu += r * y.ln();
                    wsum += r;
                }
            }
            if wsum < 1e-12 {
                comp.dropped = true;
                comp.weight = 0.0;
                return;
            }
            mu /= wsum;
            let mut var = 0.0;
            for (x, r) in xs.iter().zip(resp) {
                let y = -x;
                if y > 1e-12 {
                    var += r * (y.ln() - mu) * (y.ln() - mu);
                }
            }
            comp.params = vec![mu, (var / wsum).sqrt().max(SIGMA_FLOOR)];
        }
        ComponentFamily::Rayleigh => {
            let mut wsum = 0.0;
            let mut s2 = 0.0;
            for (x, r) in xs.iter().zip(resp) {
                let y = -x;
                if y > 0.0 {
                    s2 += r * y * y;
                    wsum += r;
                }
            }
            if wsum < 1e-12 {
                comp.dropped = true;
                comp.weight = 0.0;
                return;
            }
            comp.params = vec![(s2 / (2.0 * wsum)).sqrt().max(SIGMA_FLOOR)];
        }
        ComponentFamily::Nonparametric => {
            let (lo, width) = (comp.params[0], comp.params[1]);
            let nbins = comp.params.len() - 2;
            let mut masses = vec![0.0; nbins];
            for (x, r) in xs.iter().zip(resp) {
                let b = ((x - lo) / width).floor();
                if b >= 0.0 && b < nbins as f64 {
                    masses[b as usize] += r;
                }
            }
            for m in &mut masses {
                *m /= total;
            }
            comp.params.truncate(2);
            comp.params.extend(masses);
        }
    }
}

/// Fit the prior-declared mixture to scalar deviations.
///
/// Warm starts (`init`) reuse the previous epoch's θ_★; convergence is a
/// mean log-likelihood change below `theta_eps`.
pub fn em_fit(
    deviations: &[(String, f64)],
    priors: &PriorSet,
    init: Option<&[Component]>,
    theta_eps: f64,
    max_iters: usize,
) -> Result<EmFit, PodError> {
    priors.validate()?;
    let n = deviations.len();
    if n < priors.n_clusters {
        return Err(PodError::Domain(format!(
            "need at least n_clusters={} deviations, got {n}",
            priors.n_clusters
        )));
    }
    let xs: Vec<f64> = deviations.iter().map(|(_, x)| *x).collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(PodError::Domain("deviations must be finite".into()));
    }
    let mut comps = match init {
        Some(c) if c.len() == priors.n_clusters => {
            let mut comps = c.to_vec();
            refresh_stale_supports(&mut comps, &xs, priors);
            comps
        }
        _ => init_components(&xs, priors),
    };

    let m = comps.len();
    let mut resp = vec![vec![0.0; m]; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        // E step
        for (i, x) in xs.iter().enumerate() {
            let mut row_sum = 0.0;
            for (k, c) in comps.iter().enumerate() {
                let v = c.weight * c.pdf(*x);
                resp[i][k] = v;
                row_sum += v;
            }
            if row_sum > 0.0 {
                for r in &mut resp[i] {
                    *r /= row_sum;
                }
            } else {
                let live = comps.iter().filter(|c| !c.dropped).count().max(1);
                for (k, r) in resp[i].iter_mut().enumerate() {
                    *r = if comps[k].dropped { 0.0 } else { 1.0 / live as f64 };
                }
            }
        }
        // M step
        let col: Vec<f64> = (0..m)
            .map(|k| resp.iter().map(|r| r[k]).sum::<f64>())
            .collect();
        let live_total: f64 = col.iter().sum();
        for (k, c) in comps.iter_mut().enumerate() {
            if c.dropped {
                continue;
            }
            c.weight = col[k] / live_total;
            let rk: Vec<f64> = resp.iter().map(|r| r[k]).collect();
            m_step(c, &xs, &rk);
        }
        // renormalize weights over live components
        let wsum: f64 = comps.iter().filter(|c| !c.dropped).map(|c| c.weight).sum();
        if wsum > 0.0 {
            for c in comps.iter_mut().filter(|c| !c.dropped) {
                c.weight /= wsum;
            }
        }
        // mean log-likelihood
        let ll = xs
            .iter()
            .map(|x| {
                comps
                    .iter()
                    .map(|c| c.weight * c.pdf(*x))
                    .sum::<f64>()
                    .max(PDF_FLOOR)
                    .ln()
            })
            .sum::<f64>()
            / n as f64;
        if let Some(prev) = trace.last() {
            if (ll - prev).abs() < theta_eps.max(1e-12) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
    }

    // Final E step so responsibilities match the returned parameters.
    for (i, x) in xs.iter().enumerate() {
        let mut row_sum = 0.0;
        for (k, c) in comps.iter().enumerate() {
            let v = c.weight * c.pdf(*x);
            resp[i][k] = v;
            row_sum += v;
        }
        if row_sum > 0.0 {
            for r in &mut resp[i] {
                *r /= row_sum;
            }
        }
    }

    Ok(EmFit {
        responsibilities: resp,
        components: comps,
        log_likelihood: trace,
        iterations,
        converged,
    })
}
