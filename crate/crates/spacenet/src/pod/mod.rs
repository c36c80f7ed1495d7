//! Proof of Distribution: spatio-temporal consistency losses, robust
//! trimming, EM anomaly classification, and the per-epoch estimation loop.
//!
//! The epoch driver alternates discriminate → loss → refit until the total
//! loss change drops below θ_ε or the fixed iteration cap is hit; the
//! returned state warm-starts the next epoch.

pub mod em;
pub mod kernel;
pub mod loss;
pub mod robust;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{AlphaMap, Position, StateSample, PARAM_ONLINE};

pub use em::{em_fit, Component, ComponentFamily, EmFit};
pub use kernel::{gaussian_kernel_exact, gaussian_kernel_poly, required_terms};
pub use loss::{sampling_weights, spatial_loss, temporal_loss, SpatialRecord, TemporalRecord};
pub use robust::soft_trim;

#[derive(Debug, Error)]
pub enum PodError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel argument x = {x} outside the 3σ working range")]
    KernelRange { x: f64 },
}

/// Mixture priors: which component families the discriminator carries and
/// optional on-chain parameter vectors to seed them.
///
/// Component 0 must be Gaussian — it is the valid population.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PriorSet {
    pub n_clusters: usize,
    pub component_families: Vec<ComponentFamily>,
    #[serde(default)]
    pub init_theta: Option<Vec<Vec<f64>>>,
}

impl PriorSet {
    /// Valid Gaussian plus a non-parametric misreporting component.
    pub fn default_two_component() -> Self {
        Self {
            n_clusters: 2,
            component_families: vec![ComponentFamily::Gaussian, ComponentFamily::Nonparametric],
            init_theta: None,
        }
    }

    pub fn validate(&self) -> Result<(), PodError> {
        if self.n_clusters < 1 {
            return Err(PodError::Domain("n_clusters must be >= 1".into()));
        }
        if self.component_families.is_empty() {
            return Err(PodError::Domain("component_families must be non-empty".into()));
        }
        if self.component_families.len() != self.n_clusters {
            return Err(PodError::Domain(format!(
                "n_clusters={} does not match {} component families",
                self.n_clusters,
                self.component_families.len()
            )));
        }
        if self.component_families[0] != ComponentFamily::Gaussian {
            return Err(PodError::Domain(
                "component 0 is the valid population and must be Gaussian".into(),
            ));
        }
        if let Some(init) = &self.init_theta {
            if init.len() != self.n_clusters {
                return Err(PodError::Domain(
                    "init_theta length must equal n_clusters".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Engine configuration. All alpha-domain values are absolute; scenario
/// front-ends may derive them from per-parameter noise scales.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PodConfig {
    /// Spatial loss weight; only the γ_s:γ_t ratio matters for decisions.
    pub gamma_s: f64,
    /// Temporal loss weight.
    pub gamma_t: f64,
    /// Spatial kernel bandwidth σ_α, meters.
    pub sigma_alpha: f64,
    /// Temporal response scale σ_t, seconds. Retained for the
    /// continuous-time kernel form; the discretized frame-difference loss
    /// does not consume it.
    pub sigma_t: f64,
    /// Default robust trimming radius θ_r, alpha units.
    pub theta_r: f64,
    /// Per-parameter θ_r overrides.
    #[serde(default)]
    pub theta_r_overrides: BTreeMap<String, f64>,
    /// Convergence threshold θ_ε on the loss change δℓ.
    pub theta_eps: f64,
    /// Fixed iteration cap for the epoch loop.
    pub max_iters: usize,
    /// Polynomial kernel truncation (retained Taylor terms).
    pub kernel_terms: usize,
    /// Neighbourhood radius r of the spatial hypothesis, meters.
    pub neighborhood_radius: f64,
    pub priors: PriorSet,
}

impl PodConfig {
    pub fn with_priors(priors: PriorSet) -> Self {
        Self {
            gamma_s: 1.0,
            gamma_t: 0.25,
            sigma_alpha: 100.0,
            sigma_t: 600.0,
            theta_r: 1.0,
            theta_r_overrides: BTreeMap::new(),
            theta_eps: 1e-6,
            max_iters: 32,
            kernel_terms: 20,
            neighborhood_radius: 300.0,
            priors,
        }
    }

    pub fn validate(&self) -> Result<(), PodError> {
        for (name, v, strict) in [
            ("gamma_s", self.gamma_s, false),
            ("gamma_t", self.gamma_t, false),
            ("sigma_alpha", self.sigma_alpha, true),
            ("sigma_t", self.sigma_t, true),
            ("theta_r", self.theta_r, true),
            ("theta_eps", self.theta_eps, true),
            ("neighborhood_radius", self.neighborhood_radius, true),
        ] {
            let ok = if strict { v > 0.0 } else { v >= 0.0 };
            if !ok || !v.is_finite() {
                return Err(PodError::Domain(format!("{name} out of range: {v}")));
            }
        }
        if self.max_iters < 1 {
            return Err(PodError::Domain("max_iters must be >= 1".into()));
        }
        if self.kernel_terms < 1 {
            return Err(PodError::Domain("kernel_terms must be >= 1".into()));
        }
        for (p, v) in &self.theta_r_overrides {
            if !(*v > 0.0) {
                return Err(PodError::Domain(format!("theta_r override for {p} must be > 0")));
            }
        }
        self.priors.validate()
    }
}

/// The estimator's view of a sample: ground-truth labels are deliberately
/// not representable here.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PodSample {
    pub receiver_id: String,
    pub transmitter_id: String,
    pub position: Position,
    pub time: f64,
    pub alpha: AlphaMap,
}

impl From<&StateSample> for PodSample {
    fn from(s: &StateSample) -> Self {
        Self {
            receiver_id: s.receiver_id.clone(),
            transmitter_id: s.transmitter_id.clone(),
            position: s.position,
            time: s.time,
            alpha: s.alpha.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Valid,
    Anomalous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverReport {
    pub alpha_hat: AlphaMap,
    pub loss: f64,
    pub classification: Classification,
    /// Posterior mass on non-valid components, max across parameters.
    pub responsibility: f64,
    /// Family of the dominant anomalous component, when anomalous.
    pub anomaly_family: Option<ComponentFamily>,
    pub isolated: bool,
    pub cold_start: bool,
}

impl ReceiverReport {
    /// Anomaly attributed to an objective physical cause rather than
    /// misreporting; such data is discarded, not penalized.
    pub fn is_objective_anomaly(&self) -> bool {
        self.classification == Classification::Anomalous
            && self.anomaly_family.map(|f| f.is_objective()).unwrap_or(false)
    }
}

/// Carry-over between consecutive epochs of one transmitter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PodState {
    /// Last reported alpha per receiver, for the temporal term.
    pub prev_alpha: BTreeMap<String, AlphaMap>,
    /// Fitted θ_★ per parameter, warm-starting the next fit.
    pub components: BTreeMap<String, Vec<Component>>,
    /// Receivers the discriminator held valid last epoch; seeds the mask.
    pub prev_valid: BTreeMap<String, bool>,
    /// Final total loss, the δℓ reference for warm-started convergence.
    pub prev_total_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodReport {
    pub transmitter_id: String,
    pub epoch_index: u64,
    pub per_receiver: BTreeMap<String, ReceiverReport>,
    pub theta_hat: BTreeMap<String, Vec<Component>>,
    pub total_loss: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl PodReport {
    pub fn empty(transmitter_id: &str, epoch_index: u64) -> Self {
        Self {
            transmitter_id: transmitter_id.to_string(),
            epoch_index,
            per_receiver: BTreeMap::new(),
            theta_hat: BTreeMap::new(),
            total_loss: 0.0,
            iterations_used: 0,
            converged: true,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.per_receiver
            .values()
            .filter(|r| r.classification == Classification::Valid)
            .count()
    }

    pub fn anomalous_count(&self) -> usize {
        self.per_receiver.len() - self.valid_count()
    }

    /// Whether the reporting population corroborates an online service:
    /// a majority of receivers is valid and the valid consensus says online.
    pub fn corroborates_service(&self, quorum: f64) -> bool {
        if self.per_receiver.is_empty() {
            return false;
        }
        let valid: Vec<&ReceiverReport> = self
            .per_receiver
            .values()
            .filter(|r| r.classification == Classification::Valid)
            .collect();
        if (valid.len() as f64) < quorum * self.per_receiver.len() as f64 {
            return false;
        }
        let online: f64 = valid
            .iter()
            .map(|r| r.alpha_hat.get(PARAM_ONLINE).copied().unwrap_or(0.0))
            .sum::<f64>()
            / valid.len().max(1) as f64;
        online >= 0.5
    }
}

/// Run the estimation loop over one transmitter's epoch window.
///
/// Returns the report and the state for the next epoch. Deterministic in
/// (samples, prev, cfg).
pub fn pod_epoch(
    samples: &[PodSample],
    prev: Option<&PodState>,
    cfg: &PodConfig,
) -> Result<(PodReport, PodState), PodError> {
    cfg.validate()?;
    let epoch_time = samples.first().map(|s| s.time).unwrap_or(0.0);
    let transmitter_id = samples
        .first()
        .map(|s| s.transmitter_id.clone())
        .unwrap_or_default();
    if samples.is_empty() {
        // "claims no transmission" cell: nothing to estimate.
        let state = PodState {
            prev_alpha: BTreeMap::new(),
            components: prev.map(|p| p.components.clone()).unwrap_or_default(),
            prev_valid: BTreeMap::new(),
            prev_total_loss: Some(0.0),
        };
        return Ok((PodReport::empty(&transmitter_id, epoch_time as u64), state));
    }
    if samples.iter().any(|s| s.transmitter_id != transmitter_id) {
        return Err(PodError::Domain(
            "samples must share one transmitter_id".into(),
        ));
    }

    let mut samples: Vec<PodSample> = samples.to_vec();
    samples.sort_by(|a, b| a.receiver_id.cmp(&b.receiver_id));
    let n = samples.len();
    let positions: Vec<Position> = samples.iter().map(|s| s.position).collect();
    let weights = sampling_weights(&positions, cfg.sigma_alpha);

    // Parameters the mixture discriminates on: every continuous entry.
    let em_params: Vec<String> = samples[0]
        .alpha
        .keys()
        .filter(|k| k.as_str() != PARAM_ONLINE)
        .cloned()
        .collect();

    // The discriminator state carries over: warm starts resume from the
    // previous epoch's classification and θ_★.
    let mut valid: Vec<bool> = samples
        .iter()
        .map(|s| {
            prev.and_then(|p| p.prev_valid.get(&s.receiver_id).copied())
                .unwrap_or(true)
        })
        .collect();
    let mut components: BTreeMap<String, Vec<Component>> = prev
        .map(|p| p.components.clone())
        .unwrap_or_default();
    let mut delta_reference = prev.and_then(|p| p.prev_total_loss);

    let mut spatial = Vec::new();
    let mut temporal: Vec<TemporalRecord> = Vec::new();
    let mut anomalous_resp = vec![0.0; n];
    let mut anomaly_family: Vec<Option<ComponentFamily>> = vec![None; n];
    let mut total_loss = 0.0;
    let mut iterations_used = 0;
    let mut converged = false;

    while iterations_used < cfg.max_iters {
        iterations_used += 1;
        spatial = spatial_loss(&samples, &weights, &valid, cfg)?;
        temporal = samples
            .iter()
            .map(|s| {
                temporal_loss(
                    s,
                    prev.and_then(|p| p.prev_alpha.get(&s.receiver_id)),
                    cfg,
                )
            })
            .collect();

        // Mixture fit per parameter over spatial deviations. Only samples
        // the robust estimator trims away (|deviation| > θ_r) are anomaly
        // candidates; inliers stay valid whatever the mixture says.
        anomalous_resp = vec![0.0; n];
        anomaly_family = vec![None; n];
        for param in &em_params {
            let mut devs: Vec<(usize, f64)> = Vec::new();
            for (i, rec) in spatial.iter().enumerate() {
                if let Some(d) = rec.deviation.get(param) {
                    devs.push((i, *d));
                }
            }
            if devs.len() < cfg.priors.n_clusters {
                continue;
            }
            let named: Vec<(String, f64)> = devs
                .iter()
                .map(|(i, d)| (samples[*i].receiver_id.clone(), *d))
                .collect();
            let fit = em_fit(
                &named,
                &cfg.priors,
                components.get(param).map(|c| c.as_slice()),
                cfg.theta_eps,
                cfg.max_iters,
            )?;
            let radius = loss::trim_radius(cfg, param);
            for (row, (i, d)) in devs.iter().enumerate() {
                if d.abs() <= radius {
                    continue;
                }
                let r = fit.anomalous_responsibility(row);
                if r > anomalous_resp[*i] {
                    anomalous_resp[*i] = r;
                    anomaly_family[*i] = fit.dominant_anomalous_family(row);
                }
            }
            components.insert(param.clone(), fit.components);
        }

        // Discriminate: posterior mass above one half on any trimmed-out
        // parameter.
        for i in 0..n {
            valid[i] = anomalous_resp[i] <= 0.5;
        }

        // Eq.-20 totals over valid samples; isolated spatial parts excluded.
        total_loss = 0.0;
        for i in 0..n {
            if !valid[i] {
                continue;
            }
            if !spatial[i].isolated {
                total_loss += spatial[i].loss;
            }
            total_loss += temporal[i].loss;
        }

        if let Some(reference) = delta_reference {
            if (total_loss - reference).abs() < cfg.theta_eps {
                converged = true;
                break;
            }
        }
        delta_reference = Some(total_loss);
    }

    let mut per_receiver = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        let alpha_hat = if spatial[i].isolated {
            s.alpha.clone()
        } else {
            spatial[i].mean.clone()
        };
        let loss = if spatial[i].isolated {
            temporal[i].loss
        } else {
            spatial[i].loss + temporal[i].loss
        };
        per_receiver.insert(
            s.receiver_id.clone(),
            ReceiverReport {
                alpha_hat,
                loss,
                classification: if valid[i] {
                    Classification::Valid
                } else {
                    Classification::Anomalous
                },
                responsibility: anomalous_resp[i],
                anomaly_family: if valid[i] { None } else { anomaly_family[i] },
                isolated: spatial[i].isolated,
                cold_start: temporal[i].cold_start,
            },
        );
    }

    let epoch_index = samples
        .first()
        .map(|s| s.time)
        .unwrap_or(0.0)
        .max(0.0) as u64;
    let report = PodReport {
        transmitter_id,
        epoch_index,
        per_receiver,
        theta_hat: components.clone(),
        total_loss,
        iterations_used,
        converged,
    };
    let state = PodState {
        prev_alpha: samples
            .iter()
            .map(|s| (s.receiver_id.clone(), s.alpha.clone()))
            .collect(),
        components,
        prev_valid: samples
            .iter()
            .zip(&valid)
            .map(|(s, v)| (s.receiver_id.clone(), *v))
            .collect(),
        prev_total_loss: Some(total_loss),
    };
    Ok((report, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;
    use rand::Rng;

    fn grid_samples(n: usize, value: f64) -> Vec<PodSample> {
        let side = (n as f64).sqrt().ceil() as usize;
        (0..n)
            .map(|i| {
                let mut alpha = AlphaMap::new();
                alpha.insert("signal_dbm".into(), value);
                alpha.insert(PARAM_ONLINE.into(), 1.0);
                PodSample {
                    receiver_id: format!("rx{i:04}"),
                    transmitter_id: "sat0".into(),
                    position: Position::new(
                        (i % side) as f64 * 40.0,
                        (i / side) as f64 * 40.0,
                        0.0,
                    ),
                    time: 0.0,
                    alpha,
                }
            })
            .collect()
    }

    fn cfg() -> PodConfig {
        PodConfig {
            sigma_alpha: 100.0,
            neighborhood_radius: 300.0,
            theta_r: 1.5,
            ..PodConfig::with_priors(PriorSet::default_two_component())
        }
    }

    #[test]
    fn all_honest_constant_field_zero_loss() {
        let samples = grid_samples(64, 7.0);
        let (report, _) = pod_epoch(&samples, None, &cfg()).unwrap();
        assert!(report.total_loss < 1e-9, "loss={}", report.total_loss);
        assert_eq!(report.anomalous_count(), 0);
    }

    #[test]
    fn zero_samples_yield_empty_report() {
        let (report, _) = pod_epoch(&[], None, &cfg()).unwrap();
        assert_eq!(report.total_loss, 0.0);
        assert!(report.per_receiver.is_empty());
    }

    #[test]
    fn offset_fraction_flagged_and_estimate_tracks_truth() {
        // 10% of receivers offset by 10 noise-sigmas.
        let truth = 10.0;
        let noise_sigma = 0.2;
        let mut samples = grid_samples(200, truth);
        let tree = SeedTree::new(5);
        let mut rng = tree.derive("test").rng();
        for (i, s) in samples.iter_mut().enumerate() {
            let jitter: f64 = rng.gen::<f64>() - 0.5;
            let v = truth + jitter * noise_sigma * 3.464; // uniform, sd ≈ σ
            s.alpha.insert("signal_dbm".into(), v);
            if i % 10 == 0 {
                *s.alpha.get_mut("signal_dbm").unwrap() -= 10.0 * noise_sigma;
            }
        }
        let mut c = cfg();
        c.theta_r = 3.0 * noise_sigma;
        let (report, _) = pod_epoch(&samples, None, &c).unwrap();
        let mut missed = 0;
        let mut false_pos = 0;
        for (i, s) in samples.iter().enumerate() {
            let rep = &report.per_receiver[&s.receiver_id];
            if i % 10 == 0 {
                if rep.classification != Classification::Anomalous {
                    missed += 1;
                }
            } else {
                if rep.classification == Classification::Anomalous {
                    false_pos += 1;
                }
                let hat = rep.alpha_hat["signal_dbm"];
                assert!(
                    (hat - truth).abs() < noise_sigma,
                    "alpha_hat {hat} vs truth {truth}"
                );
            }
        }
        assert!(missed <= 1, "missed {missed} of 20 offsets");
        assert!(false_pos <= 4, "{false_pos} honest flagged");
    }

    #[test]
    fn warm_start_halves_iterations() {
        let noise_sigma = 0.2;
        let mut samples = grid_samples(100, 5.0);
        let tree = SeedTree::new(11);
        let mut rng = tree.derive("warm").rng();
        for (i, s) in samples.iter_mut().enumerate() {
            let jitter: f64 = rng.gen::<f64>() - 0.5;
            let mut v = 5.0 + jitter * noise_sigma * 3.464;
            if i % 10 == 0 {
                v -= 8.0 * noise_sigma;
            }
            s.alpha.insert("signal_dbm".into(), v);
        }
        let mut c = cfg();
        c.theta_r = 3.0 * noise_sigma;
        let (r1, s1) = pod_epoch(&samples, None, &c).unwrap();
        // identical samples next epoch, warm-started
        let (r2, _) = pod_epoch(&samples, Some(&s1), &c).unwrap();
        assert!(r2.converged);
        assert!(
            2 * r2.iterations_used <= r1.iterations_used,
            "warm {} vs cold {}",
            r2.iterations_used,
            r1.iterations_used
        );
    }

    #[test]
    fn deterministic_in_inputs() {
        let samples = grid_samples(50, 3.0);
        let (a, _) = pod_epoch(&samples, None, &cfg()).unwrap();
        let (b, _) = pod_epoch(&samples, None, &cfg()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn classification_invariant_under_gamma_rescale() {
        let noise_sigma = 0.2;
        let mut samples = grid_samples(120, 5.0);
        let tree = SeedTree::new(3);
        let mut rng = tree.derive("gamma").rng();
        for (i, s) in samples.iter_mut().enumerate() {
            let jitter: f64 = rng.gen::<f64>() - 0.5;
            let mut v = 5.0 + jitter * noise_sigma * 3.464;
            if i % 12 == 0 {
                v -= 7.0 * noise_sigma;
            }
            s.alpha.insert("signal_dbm".into(), v);
        }
        let mut c1 = cfg();
        c1.theta_r = 3.0 * noise_sigma;
        let mut c2 = c1.clone();
        c2.gamma_s *= 17.0;
        c2.gamma_t *= 17.0;
        let (r1, _) = pod_epoch(&samples, None, &c1).unwrap();
        let (r2, _) = pod_epoch(&samples, None, &c2).unwrap();
        for (rx, rep) in &r1.per_receiver {
            assert_eq!(rep.classification, r2.per_receiver[rx].classification);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut c = cfg();
        c.sigma_alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.max_iters = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.priors.component_families = vec![ComponentFamily::Nonparametric];
        c.priors.n_clusters = 1;
        assert!(c.validate().is_err());
    }
}
