//! Declarative scenario configuration.
//!
//! Scenarios are TOML files with defaults for everything but worth pinning;
//! validation reports every out-of-range field with its path rather than
//! stopping at the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::{ElectionWeights, EpochConfig, RewardCoeffs};
use crate::pod::{PodConfig, PriorSet};
use crate::pof::FlowCheckConfig;
use crate::signal::EnvironmentModel;

use super::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Receivers are placed uniformly in a ground disk of this radius.
    pub disk_radius_m: f64,
    pub altitude_m: f64,
    /// Ground-track spacing between adjacent satellites.
    pub satellite_spacing_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            disk_radius_m: 2_000.0,
            altitude_m: 550_000.0,
            satellite_spacing_m: 20_000.0,
        }
    }
}

/// Scenario-level distribution-proof knobs; trimming radii are expressed in
/// units of each parameter's noise σ and lowered to absolute values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSection {
    pub gamma_s: f64,
    pub gamma_t: f64,
    /// Spatial kernel bandwidth σ_α, meters.
    pub kernel_sigma_m: f64,
    /// Temporal response scale σ_t, seconds.
    pub sigma_t_s: f64,
    /// θ_r per parameter, in noise-σ units.
    pub theta_r_sigma: f64,
    pub theta_eps: f64,
    pub max_iters: usize,
    pub kernel_terms: usize,
    pub neighborhood_radius_m: f64,
    pub priors: PriorSet,
}

impl Default for PodSection {
    fn default() -> Self {
        Self {
            gamma_s: 1.0,
            gamma_t: 0.25,
            kernel_sigma_m: 150.0,
            sigma_t_s: 600.0,
            theta_r_sigma: 3.0,
            theta_eps: 1e-6,
            max_iters: 32,
            kernel_terms: 20,
            neighborhood_radius_m: 450.0,
            priors: PriorSet::default_two_component(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    /// σ_α per parameter: std-dev of co-located honest pairwise differences.
    pub alpha_noise: BTreeMap<String, f64>,
    /// σ_t = ratio · σ_α; in [0, 1).
    pub temporal_ratio: f64,
    pub nominal_bandwidth_mbps: f64,
    pub nominal_latency_ms: f64,
    pub sensitivity_dbm: f64,
    pub outage_floor_dbm: f64,
    pub epoch_seconds: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        let mut alpha_noise = BTreeMap::new();
        alpha_noise.insert("signal_dbm".to_string(), 0.5);
        alpha_noise.insert("bandwidth_mbps".to_string(), 4.0);
        alpha_noise.insert("latency_ms".to_string(), 2.0);
        Self {
            alpha_noise,
            temporal_ratio: 0.3,
            nominal_bandwidth_mbps: 150.0,
            nominal_latency_ms: 40.0,
            sensitivity_dbm: -120.0,
            outage_floor_dbm: -140.0,
            epoch_seconds: 600.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub wavelength_m: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            tx_power_dbm: 40.0,
            tx_gain_db: 30.0,
            rx_gain_db: 35.0,
            wavelength_m: 0.025,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub packets_per_window: usize,
    pub payload_bytes: u32,
    /// Challenger windows attested per epoch (round-robin over receivers).
    pub pairs_per_epoch: usize,
    /// Delayed-commit distance D, in windows.
    pub delay_windows: u64,
    pub logistic_scale_db: f64,
    pub test_alpha: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            packets_per_window: 128,
            payload_bytes: 1_200,
            pairs_per_epoch: 16,
            delay_windows: 2,
            logistic_scale_db: 2.0,
            test_alpha: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSimSection {
    pub txs_per_epoch: usize,
    pub tx_gas: u64,
    pub initial_stake: f64,
}

impl Default for ConsensusSimSection {
    fn default() -> Self {
        Self {
            txs_per_epoch: 8,
            tx_gas: 10,
            initial_stake: 1_000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudKind {
    /// Receiver claims it did not receive service it actually got.
    RFraud,
    /// Transmitter claims service it does not deliver.
    TFraud,
    /// Transmitter fraud plus colluding receivers faking reception.
    Corporate,
    /// Rain cell degrades real service inside a ground disk.
    ObjectiveRain,
    /// Transmitter neither claims nor delivers; challengers submit nothing.
    NoService,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FraudInjection {
    pub kind: FraudKind,
    /// Share of the target transmitter's receivers recruited (misreporting
    /// kinds only).
    #[serde(default)]
    pub fraction: f64,
    /// Misreporting offset in noise-σ units, or rain rate in dB/km.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    #[serde(default)]
    pub transmitter: usize,
    #[serde(default)]
    pub from_epoch: u64,
    #[serde(default = "u64_max")]
    pub to_epoch: u64,
    /// Rain cell geometry (objective kind): centre offset from the disk
    /// centre and radius.
    #[serde(default)]
    pub rain_center: Option<(f64, f64)>,
    #[serde(default = "default_rain_radius")]
    pub rain_radius_m: f64,
}

fn default_magnitude() -> f64 {
    5.0
}
fn u64_max() -> u64 {
    u64::MAX
}
fn default_rain_radius() -> f64 {
    500.0
}

impl FraudInjection {
    pub fn active(&self, epoch: u64) -> bool {
        (self.from_epoch..=self.to_epoch).contains(&epoch)
    }

    pub fn recruits_receivers(&self) -> bool {
        matches!(self.kind, FraudKind::RFraud | FraudKind::Corporate)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashInjection {
    /// Validator indices offline for the inclusive epoch range.
    pub validators: Vec<usize>,
    pub from_epoch: u64,
    pub to_epoch: u64,
}

impl CrashInjection {
    pub fn active(&self, epoch: u64) -> bool {
        (self.from_epoch..=self.to_epoch).contains(&epoch)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub n_satellites: usize,
    pub n_receivers: usize,
    pub n_validators: usize,
    pub epochs: u64,
    pub geometry: GeometryConfig,
    pub epoch_config: EpochConfig,
    pub pod: PodSection,
    pub env: EnvironmentModel,
    pub field: FieldSection,
    pub link: LinkSection,
    pub flow: FlowSection,
    pub rewards: RewardCoeffs,
    pub election: ElectionWeights,
    pub consensus_sim: ConsensusSimSection,
    pub fraud: Vec<FraudInjection>,
    pub crash: Vec<CrashInjection>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            seed: 42,
            n_satellites: 1,
            n_receivers: 100,
            n_validators: 4,
            epochs: 8,
            geometry: GeometryConfig::default(),
            epoch_config: EpochConfig::default(),
            pod: PodSection::default(),
            env: EnvironmentModel::default(),
            field: FieldSection::default(),
            link: LinkSection::default(),
            flow: FlowSection::default(),
            rewards: RewardCoeffs::default(),
            election: ElectionWeights::default(),
            consensus_sim: ConsensusSimSection::default(),
            fraud: Vec::new(),
            crash: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Lower the scenario section to the engine's absolute-valued config.
    pub fn pod_config(&self) -> PodConfig {
        let mut overrides = BTreeMap::new();
        for (param, sigma) in &self.field.alpha_noise {
            let radius = self.pod.theta_r_sigma * sigma;
            if radius > 0.0 {
                overrides.insert(param.clone(), radius);
            }
        }
        PodConfig {
            gamma_s: self.pod.gamma_s,
            gamma_t: self.pod.gamma_t,
            sigma_alpha: self.pod.kernel_sigma_m,
            sigma_t: self.pod.sigma_t_s,
            theta_r: 1.0,
            theta_r_overrides: overrides,
            theta_eps: self.pod.theta_eps,
            max_iters: self.pod.max_iters,
            kernel_terms: self.pod.kernel_terms,
            neighborhood_radius: self.pod.neighborhood_radius_m,
            priors: self.pod.priors.clone(),
        }
    }

    pub fn flow_check(&self) -> FlowCheckConfig {
        FlowCheckConfig {
            sensitivity_dbm: self.field.sensitivity_dbm,
            logistic_scale_db: self.flow.logistic_scale_db,
            test_alpha: self.flow.test_alpha,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut issues = Vec::new();
        let mut check = |ok: bool, path: &str, message: String| {
            if !ok {
                issues.push(ConfigIssue {
                    path: path.to_string(),
                    message,
                });
            }
        };

        check(self.n_satellites >= 1, "n_satellites", "must be >= 1".into());
        check(self.n_receivers >= 1, "n_receivers", "must be >= 1".into());
        check(self.n_validators >= 1, "n_validators", "must be >= 1".into());
        check(self.epochs >= 1, "epochs", "must be >= 1".into());
        check(
            self.geometry.disk_radius_m > 0.0,
            "geometry.disk_radius_m",
            "must be > 0".into(),
        );
        check(
            self.geometry.altitude_m > 0.0,
            "geometry.altitude_m",
            "must be > 0".into(),
        );
        if let Err(e) = self.epoch_config.validate() {
            check(false, "epoch_config", e.to_string());
        }
        if let Err(e) = self.pod_config().validate() {
            check(false, "pod", e.to_string());
        }
        if let Err(e) = self.env.validate() {
            check(false, "env", e.to_string());
        }
        check(
            (0.0..1.0).contains(&self.field.temporal_ratio),
            "field.temporal_ratio",
            "must be in [0, 1)".into(),
        );
        for (param, sigma) in &self.field.alpha_noise {
            check(
                *sigma >= 0.0,
                &format!("field.alpha_noise.{param}"),
                "must be >= 0".into(),
            );
        }
        check(
            self.link.wavelength_m > 0.0,
            "link.wavelength_m",
            "must be > 0".into(),
        );
        check(
            self.flow.packets_per_window >= 1,
            "flow.packets_per_window",
            "must be >= 1".into(),
        );
        check(
            self.flow.delay_windows >= 1,
            "flow.delay_windows",
            "must be >= 1".into(),
        );
        check(
            (0.0..1.0).contains(&self.flow.test_alpha),
            "flow.test_alpha",
            "must be in (0, 1)".into(),
        );
        check(
            self.rewards.slash_fraction >= 0.0 && self.rewards.slash_fraction <= 1.0,
            "rewards.slash_fraction",
            "must be in [0, 1]".into(),
        );
        check(
            self.consensus_sim.initial_stake > 0.0,
            "consensus_sim.initial_stake",
            "must be > 0".into(),
        );

        // Fraud fractions partition each transmitter's receiver cohort.
        let mut per_tx: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, f) in self.fraud.iter().enumerate() {
            let path = format!("fraud_spec[{i}]");
            check(
                (0.0..=1.0).contains(&f.fraction),
                &format!("{path}.fraction"),
                "must be in [0, 1]".into(),
            );
            check(
                f.transmitter < self.n_satellites,
                &format!("{path}.transmitter"),
                format!("no such transmitter (n_satellites = {})", self.n_satellites),
            );
            check(
                f.from_epoch <= f.to_epoch,
                &format!("{path}.from_epoch"),
                "must not exceed to_epoch".into(),
            );
            check(
                f.magnitude >= 0.0,
                &format!("{path}.magnitude"),
                "must be >= 0".into(),
            );
            if f.recruits_receivers() {
                *per_tx.entry(f.transmitter).or_default() += f.fraction;
            }
        }
        for (tx, total) in per_tx {
            check(
                total <= 1.0 + 1e-12,
                "fraud_spec",
                format!("fractions for transmitter {tx} sum to {total}, above 1"),
            );
        }
        for (i, c) in self.crash.iter().enumerate() {
            for v in &c.validators {
                check(
                    *v < self.n_validators,
                    &format!("crash[{i}].validators"),
                    format!("no such validator index {v}"),
                );
            }
            check(
                c.from_epoch <= c.to_epoch,
                &format!("crash[{i}].from_epoch"),
                "must not exceed to_epoch".into(),
            );
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(SimError::Invalid(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_loads_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str("seed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_receivers, 100);
        assert_eq!(cfg.pod.kernel_terms, 20);
    }

    #[test]
    fn fraud_fractions_over_one_rejected_with_path() {
        let text = r#"
seed = 1

[[fraud]]
kind = "r_fraud"
fraction = 0.7

[[fraud]]
kind = "corporate"
fraction = 0.5
"#;
        match ScenarioConfig::from_toml_str(text) {
            Err(SimError::Invalid(issues)) => {
                assert!(issues.iter().any(|i| i.path == "fraud_spec"), "{issues:?}");
            }
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let err = ScenarioConfig::from_toml_str("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(err, SimError::Parse(_)));
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let mut cfg = ScenarioConfig::default();
        cfg.fraud.push(FraudInjection {
            kind: FraudKind::RFraud,
            fraction: 0.1,
            magnitude: 5.0,
            transmitter: 0,
            from_epoch: 0,
            to_epoch: 10,
            rain_center: None,
            rain_radius_m: 500.0,
        });
        let text = cfg.to_toml_string();
        let again = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(text, again.to_toml_string());
    }

    #[test]
    fn out_of_range_fields_all_reported() {
        let text = "seed = 1\nn_receivers = 0\nepochs = 0\n";
        match ScenarioConfig::from_toml_str(text) {
            Err(SimError::Invalid(issues)) => {
                let paths: Vec<&str> = issues.iter().map(|i| i.path.as_str()).collect();
                assert!(paths.contains(&"n_receivers"));
                assert!(paths.contains(&"epochs"));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }
}
