//! Physical layer: free-space path loss, rain attenuation, shadow/multipath
//! fading, and synthetic receiver fields.
//!
//! Honest fields are generated so that state parameters of nearby receivers
//! differ by `N(0, σ_α²)` and consecutive samples of one receiver differ by
//! `N(0, σ_t²)` — the two continuity hypotheses the distribution proof
//! estimates against. Fraud- and failure-labelled receivers get their alpha
//! perturbed according to the injected scenario.
//!
//! Geometry is a flat local-tangent frame (z = altitude); the proofs consume
//! only distances, so no orbital mechanics are modelled.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::SeedTree;

pub type AlphaMap = BTreeMap<String, f64>;

/// Parameter names every generated sample carries.
pub const PARAM_SIGNAL: &str = "signal_dbm";
pub const PARAM_BANDWIDTH: &str = "bandwidth_mbps";
pub const PARAM_LATENCY: &str = "latency_ms";
pub const PARAM_ONLINE: &str = "online";

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn ground_distance(&self, other: &Position) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Transmit/receive budget for one link instance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub wavelength_m: f64,
    pub distance_m: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.wavelength_m > 0.0) {
            return Err(SignalError::Domain("wavelength_m must be > 0".into()));
        }
        if !(self.distance_m > 0.0) {
            return Err(SignalError::Domain("distance_m must be > 0".into()));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("tx_gain_db", self.tx_gain_db),
            ("rx_gain_db", self.rx_gain_db),
        ] {
            if !v.is_finite() {
                return Err(SignalError::Domain(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Rain attenuation-per-km as a function of ground position.
///
/// Only the rain specialization of the general obstruction integral is
/// implemented; other weather terms would slot in as further variants.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RainField {
    #[default]
    Zero,
    Uniform {
        db_per_km: f64,
    },
    /// Rain cell: constant rate inside a ground disk, zero outside.
    Disk {
        center_x: f64,
        center_y: f64,
        radius_m: f64,
        db_per_km: f64,
    },
}

impl RainField {
    pub fn at(&self, p: &Position) -> f64 {
        match self {
            RainField::Zero => 0.0,
            RainField::Uniform { db_per_km } => *db_per_km,
            RainField::Disk {
                center_x,
                center_y,
                radius_m,
                db_per_km,
            } => {
                let c = Position::new(*center_x, *center_y, 0.0);
                let q = Position::new(p.x, p.y, 0.0);
                if c.ground_distance(&q) <= *radius_m {
                    *db_per_km
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RainField::Zero => true,
            RainField::Uniform { db_per_km } => *db_per_km == 0.0,
            RainField::Disk { db_per_km, .. } => *db_per_km == 0.0,
        }
    }

    fn min_rate(&self) -> f64 {
        match self {
            RainField::Zero => 0.0,
            RainField::Uniform { db_per_km } => *db_per_km,
            RainField::Disk { db_per_km, .. } => db_per_km.min(0.0),
        }
    }
}

/// Channel impairment model: rain profile plus fading and noise scales.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvironmentModel {
    #[serde(default)]
    pub rain: RainField,
    /// Empirical decay γ of the rain integral, per km.
    #[serde(default)]
    pub rain_decay_gamma: f64,
    /// Dimensionless constant C of the rain integral.
    #[serde(default = "one")]
    pub rain_scale_c: f64,
    /// Effective columnar path length through rain, km.
    #[serde(default = "default_rain_path_km")]
    pub rain_path_km: f64,
    /// Log-domain std-dev of shadow fading (0 disables).
    #[serde(default)]
    pub shadow_sigma: f64,
    /// Rayleigh scale of multipath fading (0 disables).
    #[serde(default)]
    pub multipath_sigma: f64,
    /// Linear-power (mW) std-dev of additive white Gaussian noise.
    #[serde(default)]
    pub awgn_sigma: f64,
}

fn one() -> f64 {
    1.0
}
fn default_rain_path_km() -> f64 {
    4.0
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        Self {
            rain: RainField::Zero,
            rain_decay_gamma: 0.0,
            rain_scale_c: 1.0,
            rain_path_km: default_rain_path_km(),
            shadow_sigma: 0.0,
            multipath_sigma: 0.0,
            awgn_sigma: 0.0,
        }
    }
}

impl EnvironmentModel {
    pub fn validate(&self) -> Result<(), SignalError> {
        for (name, v) in [
            ("shadow_sigma", self.shadow_sigma),
            ("multipath_sigma", self.multipath_sigma),
            ("awgn_sigma", self.awgn_sigma),
            ("rain_path_km", self.rain_path_km),
        ] {
            if !(v >= 0.0) {
                return Err(SignalError::Domain(format!("{name} must be >= 0")));
            }
        }
        if self.rain.min_rate() < 0.0 {
            return Err(SignalError::Domain(
                "rain profile must be non-negative everywhere".into(),
            ));
        }
        Ok(())
    }
}

/// Ground-truth role of a receiver's sample stream. Carried only inside the
/// simulator for scoring; never written to the DA layer and never visible to
/// the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HonestyLabel {
    Honest,
    RFraud,
    TFraud,
    Corporate,
    Objective,
}

/// One receiver's instantaneous service parameters at a position and time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateSample {
    pub receiver_id: String,
    pub transmitter_id: String,
    pub position: Position,
    pub time: f64,
    pub alpha: AlphaMap,
    pub honesty_label: HonestyLabel,
}

/// Free-space path loss in dB: `-20·log10(4π·d/λ)`.
///
/// More negative means more loss; strictly decreasing in distance.
pub fn free_space_loss_db(distance_m: f64, wavelength_m: f64) -> Result<f64, SignalError> {
    if !(distance_m > 0.0) {
        return Err(SignalError::Domain("distance_m must be > 0".into()));
    }
    if !(wavelength_m > 0.0) {
        return Err(SignalError::Domain("wavelength_m must be > 0".into()));
    }
    Ok(-20.0 * (4.0 * std::f64::consts::PI * distance_m / wavelength_m).log10())
}

/// Rain attenuation in dB over a segmented path:
/// `C · Σ A_r(pos) · ∫ e^(-γ r) dr` with the exponential integrated exactly
/// within each segment.
///
/// The exact within-segment integral keeps the sum additive over path
/// concatenation and invariant under refinement of piecewise-constant
/// profiles, which a midpoint or trapezoid rule would not be.
pub fn rain_attenuation_db(
    path: &[(Position, f64)],
    env: &EnvironmentModel,
) -> Result<f64, SignalError> {
    let gamma = env.rain_decay_gamma;
    let mut total = 0.0;
    let mut cum_km = 0.0;
    for (i, (pos, len_km)) in path.iter().enumerate() {
        if *len_km < 0.0 {
            return Err(SignalError::Domain(format!(
                "segment {i} has negative length"
            )));
        }
        let rate = env.rain.at(pos);
        let weight = if gamma == 0.0 {
            *len_km
        } else {
            ((-gamma * cum_km).exp() - (-gamma * (cum_km + len_km)).exp()) / gamma
        };
        total += rate * weight;
        cum_km += len_km;
    }
    Ok(env.rain_scale_c * total)
}

/// Linear shadow-fading factor, log-normal with log-domain std-dev `sigma`.
/// `sigma = 0` returns the degenerate value 1 and draws nothing.
pub fn sample_shadow_fading(rng: &mut ChaCha8Rng, shadow_sigma: f64) -> f64 {
    if shadow_sigma == 0.0 {
        return 1.0;
    }
    let z: f64 = Normal::new(0.0, shadow_sigma).unwrap().sample(rng);
    z.exp()
}

/// Linear multipath-fading factor, Rayleigh with scale `sigma`.
///
/// `sigma = 0` maps to the pass-through factor 1 rather than the Rayleigh
/// degenerate 0, so disabling fading is non-destructive.
pub fn sample_multipath_fading(rng: &mut ChaCha8Rng, multipath_sigma: f64) -> f64 {
    if multipath_sigma == 0.0 {
        return 1.0;
    }
    // Inverse-transform Rayleigh: σ·sqrt(-2·ln U), U ∈ (0, 1].
    let u: f64 = 1.0 - rng.gen::<f64>();
    multipath_sigma * (-2.0 * u.ln()).sqrt()
}

/// Received power in dBm with all impairments applied multiplicatively in
/// linear power and converted to dB:
/// `p_T + g_T + g_R + FSPL - rain + 10·log10(shadow) + 20·log10(multipath)`,
/// then AWGN added in linear milliwatts.
pub fn received_power_dbm(
    link: &LinkBudget,
    env: &EnvironmentModel,
    rng: &mut ChaCha8Rng,
) -> Result<f64, SignalError> {
    link.validate()?;
    env.validate()?;
    let fspl = free_space_loss_db(link.distance_m, link.wavelength_m)?;
    // Columnar rain path at the receiver end of the link.
    let rain = if env.rain.is_zero() {
        0.0
    } else {
        let rx_ground = Position::new(0.0, 0.0, 0.0);
        rain_attenuation_db(&[(rx_ground, env.rain_path_km)], env)?
    };
    let mut db = link.tx_power_dbm + link.tx_gain_db + link.rx_gain_db + fspl - rain;
    let shadow = sample_shadow_fading(rng, env.shadow_sigma);
    let multipath = sample_multipath_fading(rng, env.multipath_sigma);
    db += 10.0 * shadow.log10() + 20.0 * multipath.log10();
    if env.awgn_sigma > 0.0 {
        let nu: f64 = Normal::new(0.0, env.awgn_sigma).unwrap().sample(rng);
        let linear = 10f64.powf(db / 10.0) + nu;
        db = 10.0 * linear.max(1e-30).log10();
    }
    Ok(db)
}

/// A transmitter as seen by the field generator for one epoch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransmitterSpec {
    pub id: String,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub wavelength_m: f64,
    /// Whether the transmitter claims to provide service this epoch.
    pub claims_service: bool,
    /// Whether it actually radiates. `claims && !transmitting` is the
    /// transmitter-side fraud cell; `!claims && !transmitting` the
    /// no-service cell.
    pub transmitting: bool,
}

/// A receiver as seen by the field generator for one epoch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReceiverSpec {
    pub id: String,
    pub position: Position,
    pub rx_gain_db: f64,
    /// Index into the transmitter list this receiver reports on.
    pub transmitter: usize,
    pub label: HonestyLabel,
    /// Offset applied by misreporting receivers, in units of each
    /// parameter's noise σ.
    pub fraud_magnitude: f64,
}

/// Everything needed to realize one epoch of the field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSpec {
    pub transmitters: Vec<TransmitterSpec>,
    pub receivers: Vec<ReceiverSpec>,
    pub env: EnvironmentModel,
    /// σ_α per parameter: the std-dev of pairwise differences between
    /// co-located honest receivers.
    pub alpha_noise: AlphaMap,
    /// σ_t = temporal_ratio · σ_α per parameter; must be in [0, 1].
    pub temporal_ratio: f64,
    pub nominal_bandwidth_mbps: f64,
    pub nominal_latency_ms: f64,
    /// Online threshold: `online = signal_dbm >= sensitivity_dbm`.
    pub sensitivity_dbm: f64,
    /// Reported level for links with no actual service.
    pub outage_floor_dbm: f64,
    pub epoch_seconds: f64,
}

/// One generated row: what the receiver reports plus the channel truth the
/// rest of the simulator (packet generation, scoring) needs.
#[derive(Clone, Debug)]
pub struct FieldRow {
    pub sample: StateSample,
    pub true_signal_dbm: f64,
    pub true_online: bool,
}

/// Generate the reported samples for one epoch.
pub fn generate_field(spec: &FieldSpec, epoch: u64, tree: &SeedTree) -> Vec<StateSample> {
    field_rows(spec, epoch, tree)
        .into_iter()
        .map(|r| r.sample)
        .collect()
}

/// Generate reported samples together with the ground-truth channel values.
pub fn field_rows(spec: &FieldSpec, epoch: u64, tree: &SeedTree) -> Vec<FieldRow> {
    let field_tree = tree.derive("field");
    let time = epoch as f64 * spec.epoch_seconds;
    let ratio = spec.temporal_ratio.clamp(0.0, 1.0);
    let mut rows = Vec::with_capacity(spec.receivers.len());
    for rx in &spec.receivers {
        let tx = &spec.transmitters[rx.transmitter];
        let service = tx.transmitting;

        // Deterministic link-model base for every parameter.
        let mut base = AlphaMap::new();
        let true_signal = if service {
            let link = LinkBudget {
                tx_power_dbm: tx.tx_power_dbm,
                tx_gain_db: tx.tx_gain_db,
                rx_gain_db: rx.rx_gain_db,
                wavelength_m: tx.wavelength_m,
                distance_m: rx.position.distance(&tx.position).max(1.0),
            };
            let mut chan_rng = field_tree
                .derive("channel")
                .derive(&rx.id)
                .derive_idx("epoch", epoch)
                .rng();
            // Rain is evaluated at the receiver's own ground position.
            let env_here = EnvironmentModel {
                rain: localized_rain(&spec.env.rain, &rx.position),
                ..spec.env.clone()
            };
            received_power_dbm(&link, &env_here, &mut chan_rng)
                .expect("validated link and env")
        } else {
            spec.outage_floor_dbm
        };
        base.insert(PARAM_SIGNAL.into(), true_signal);
        base.insert(
            PARAM_BANDWIDTH.into(),
            if service { spec.nominal_bandwidth_mbps } else { 0.0 },
        );
        base.insert(
            PARAM_LATENCY.into(),
            if service {
                spec.nominal_latency_ms
            } else {
                10.0 * spec.nominal_latency_ms
            },
        );

        // Hypothesis noise: a per-receiver static offset plus a per-epoch
        // re-draw. Co-located pairwise differences then have variance
        // 2σ_s² + 2σ_w² = σ_α² and temporal differences 2σ_w² = σ_t².
        let mut alpha = AlphaMap::new();
        for (param, b) in &base {
            let sigma_a = spec.alpha_noise.get(param).copied().unwrap_or(0.0);
            let sigma_static = (sigma_a * sigma_a * (1.0 - ratio * ratio) / 2.0).sqrt();
            let sigma_walk = (sigma_a * sigma_a * ratio * ratio / 2.0).sqrt();
            let mut v = *b;
            if sigma_static > 0.0 {
                let mut r = field_tree
                    .derive("static")
                    .derive(&rx.id)
                    .derive(param)
                    .rng();
                v += Normal::new(0.0, sigma_static).unwrap().sample(&mut r);
            }
            if sigma_walk > 0.0 {
                let mut r = field_tree
                    .derive("walk")
                    .derive(&rx.id)
                    .derive(param)
                    .derive_idx("epoch", epoch)
                    .rng();
                v += Normal::new(0.0, sigma_walk).unwrap().sample(&mut r);
            }
            alpha.insert(param.clone(), v);
        }
        let true_signal_noisy = alpha[PARAM_SIGNAL];
        let true_online = true_signal_noisy >= spec.sensitivity_dbm;

        // Misreporting transforms on the reported alpha only.
        apply_label_transform(rx, spec, &mut alpha);

        let online = alpha[PARAM_SIGNAL] >= spec.sensitivity_dbm;
        alpha.insert(PARAM_ONLINE.into(), if online { 1.0 } else { 0.0 });

        rows.push(FieldRow {
            sample: StateSample {
                receiver_id: rx.id.clone(),
                transmitter_id: tx.id.clone(),
                position: rx.position,
                time,
                alpha,
                honesty_label: rx.label,
            },
            true_signal_dbm: true_signal_noisy,
            true_online,
        });
    }
    rows
}

fn localized_rain(rain: &RainField, rx_pos: &Position) -> RainField {
    match rain {
        RainField::Zero => RainField::Zero,
        RainField::Uniform { db_per_km } => RainField::Uniform {
            db_per_km: *db_per_km,
        },
        RainField::Disk { .. } => RainField::Uniform {
            db_per_km: rain.at(rx_pos),
        },
    }
}

fn apply_label_transform(rx: &ReceiverSpec, spec: &FieldSpec, alpha: &mut AlphaMap) {
    match rx.label {
        // Honest receivers and receivers suffering an objective event report
        // the channel truth; T-fraud receivers are honest too — the lie is on
        // the transmitter side and already reflected in `transmitting`.
        HonestyLabel::Honest | HonestyLabel::Objective | HonestyLabel::TFraud => {}
        // Claims it did not receive service it actually got.
        HonestyLabel::RFraud => {
            let m = rx.fraud_magnitude;
            shift(alpha, &spec.alpha_noise, PARAM_SIGNAL, -m);
            shift(alpha, &spec.alpha_noise, PARAM_BANDWIDTH, -m);
            shift(alpha, &spec.alpha_noise, PARAM_LATENCY, m);
        }
        // Colluder: fabricates a healthy-looking service where none exists.
        HonestyLabel::Corporate => {
            let m = rx.fraud_magnitude;
            shift(alpha, &spec.alpha_noise, PARAM_SIGNAL, m);
            shift(alpha, &spec.alpha_noise, PARAM_BANDWIDTH, m);
            shift(alpha, &spec.alpha_noise, PARAM_LATENCY, -m);
        }
    }
}

fn shift(alpha: &mut AlphaMap, noise: &AlphaMap, param: &str, sigmas: f64) {
    let sigma = noise.get(param).copied().unwrap_or(0.0);
    if let Some(v) = alpha.get_mut(param) {
        *v += sigmas * sigma;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fspl_unit_argument_is_zero_db() {
        // d = λ/(4π), λ = 1 → log argument 1 → 0 dB
        let d = 1.0 / (4.0 * std::f64::consts::PI);
        assert!(free_space_loss_db(d, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fspl_leo_example() {
        // 550 km at 3 cm wavelength; scalar oracle value.
        let v = free_space_loss_db(550_000.0, 0.03).unwrap();
        assert!((v - -167.24902597593355).abs() < 1e-9, "{v}");
    }

    #[test]
    fn fspl_doubling_distance() {
        let a = free_space_loss_db(1_000.0, 0.03).unwrap();
        let b = free_space_loss_db(2_000.0, 0.03).unwrap();
        assert!((b - a - -6.020599913279624).abs() < 1e-12);
    }

    #[test]
    fn fspl_rejects_nonpositive() {
        assert!(free_space_loss_db(0.0, 1.0).is_err());
        assert!(free_space_loss_db(1.0, -2.0).is_err());
    }

    #[test]
    fn rain_zero_profile_is_zero() {
        let env = EnvironmentModel::default();
        let p = Position::new(0.0, 0.0, 0.0);
        assert_eq!(rain_attenuation_db(&[(p, 10.0)], &env).unwrap(), 0.0);
    }

    #[test]
    fn rain_degenerate_segment() {
        let env = EnvironmentModel {
            rain: RainField::Uniform { db_per_km: 1.0 },
            ..Default::default()
        };
        let p = Position::new(0.0, 0.0, 0.0);
        let v = rain_attenuation_db(&[(p, 1.0)], &env).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rain_refinement_invariance() {
        let env = EnvironmentModel {
            rain: RainField::Uniform { db_per_km: 2.5 },
            rain_decay_gamma: 0.7,
            rain_scale_c: 1.3,
            ..Default::default()
        };
        let p = Position::new(0.0, 0.0, 0.0);
        let coarse = rain_attenuation_db(&[(p, 2.0), (p, 2.0)], &env).unwrap();
        let fine = rain_attenuation_db(&[(p, 1.0), (p, 1.0), (p, 1.0), (p, 1.0)], &env).unwrap();
        assert!(
            ((coarse - fine) / coarse).abs() < 1e-9,
            "coarse={coarse} fine={fine}"
        );
    }

    #[test]
    fn rain_rejects_negative_length() {
        let env = EnvironmentModel::default();
        let p = Position::new(0.0, 0.0, 0.0);
        assert!(rain_attenuation_db(&[(p, -1.0)], &env).is_err());
    }

    #[test]
    fn shadow_sigma_zero_is_unity() {
        assert_eq!(sample_shadow_fading(&mut rng(1), 0.0), 1.0);
    }

    #[test]
    fn shadow_log_mean_near_zero() {
        let mut r = rng(7);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_shadow_fading(&mut r, 0.5).ln())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn multipath_mean_matches_rayleigh() {
        let mut r = rng(9);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_multipath_fading(&mut r, 1.0))
            .sum::<f64>()
            / n as f64;
        // Rayleigh mean σ√(π/2)
        assert!((mean - 1.2533141373155003).abs() < 0.02, "{mean}");
    }

    #[test]
    fn multipath_sigma_zero_passthrough() {
        assert_eq!(sample_multipath_fading(&mut rng(1), 0.0), 1.0);
    }

    fn clean_link() -> LinkBudget {
        LinkBudget {
            tx_power_dbm: 40.0,
            tx_gain_db: 30.0,
            rx_gain_db: 35.0,
            wavelength_m: 1.0,
            distance_m: 1.0 / (4.0 * std::f64::consts::PI),
        }
    }

    #[test]
    fn received_power_clean_is_eirp_plus_gain() {
        let env = EnvironmentModel::default();
        let v = received_power_dbm(&clean_link(), &env, &mut rng(3)).unwrap();
        assert!((v - 105.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn received_power_deterministic() {
        let env = EnvironmentModel {
            shadow_sigma: 0.4,
            multipath_sigma: 0.8,
            awgn_sigma: 1e-9,
            ..Default::default()
        };
        let a = received_power_dbm(&clean_link(), &env, &mut rng(11)).unwrap();
        let b = received_power_dbm(&clean_link(), &env, &mut rng(11)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn received_power_rain_additivity() {
        let dry = EnvironmentModel::default();
        let wet = EnvironmentModel {
            rain: RainField::Uniform { db_per_km: 3.0 },
            rain_decay_gamma: 0.2,
            ..Default::default()
        };
        let a = received_power_dbm(&clean_link(), &dry, &mut rng(5)).unwrap();
        let b = received_power_dbm(&clean_link(), &wet, &mut rng(5)).unwrap();
        let rain = rain_attenuation_db(
            &[(Position::new(0.0, 0.0, 0.0), wet.rain_path_km)],
            &wet,
        )
        .unwrap();
        assert!((a - rain - b).abs() < 1e-9);
    }

    fn tiny_spec(sigma_sig: f64, ratio: f64) -> FieldSpec {
        let mut alpha_noise = AlphaMap::new();
        alpha_noise.insert(PARAM_SIGNAL.into(), sigma_sig);
        FieldSpec {
            transmitters: vec![TransmitterSpec {
                id: "sat0".into(),
                position: Position::new(0.0, 0.0, 550_000.0),
                tx_power_dbm: 40.0,
                tx_gain_db: 30.0,
                wavelength_m: 0.03,
                claims_service: true,
                transmitting: true,
            }],
            receivers: vec![
                ReceiverSpec {
                    id: "rx0".into(),
                    position: Position::new(10.0, 0.0, 0.0),
                    rx_gain_db: 35.0,
                    transmitter: 0,
                    label: HonestyLabel::Honest,
                    fraud_magnitude: 0.0,
                },
                ReceiverSpec {
                    id: "rx1".into(),
                    position: Position::new(10.0, 0.0, 0.0),
                    rx_gain_db: 35.0,
                    transmitter: 0,
                    label: HonestyLabel::Honest,
                    fraud_magnitude: 0.0,
                },
            ],
            env: EnvironmentModel::default(),
            alpha_noise,
            temporal_ratio: ratio,
            nominal_bandwidth_mbps: 150.0,
            nominal_latency_ms: 40.0,
            sensitivity_dbm: -120.0,
            outage_floor_dbm: -140.0,
            epoch_seconds: 600.0,
        }
    }

    #[test]
    fn colocated_zero_sigma_identical() {
        let spec = tiny_spec(0.0, 0.0);
        let tree = SeedTree::new(1);
        let f = generate_field(&spec, 0, &tree);
        assert_eq!(f[0].alpha[PARAM_SIGNAL], f[1].alpha[PARAM_SIGNAL]);
    }

    #[test]
    fn zero_temporal_sigma_identical_across_epochs() {
        let spec = tiny_spec(0.5, 0.0);
        let tree = SeedTree::new(1);
        let a = generate_field(&spec, 3, &tree);
        let b = generate_field(&spec, 4, &tree);
        assert_eq!(a[0].alpha[PARAM_SIGNAL], b[0].alpha[PARAM_SIGNAL]);
    }

    #[test]
    fn pairwise_variance_matches_sigma_alpha() {
        // 1000 receivers in a small disk; pairwise signal differences should
        // have variance ≈ σ_α² (the deterministic base varies negligibly).
        let sigma = 0.5;
        let mut spec = tiny_spec(sigma, 0.3);
        spec.receivers.clear();
        let mut r = rng(123);
        for i in 0..1000 {
            let a: f64 = r.gen::<f64>() * std::f64::consts::TAU;
            let d: f64 = r.gen::<f64>().sqrt() * 2000.0;
            spec.receivers.push(ReceiverSpec {
                id: format!("rx{i}"),
                position: Position::new(a.cos() * d, a.sin() * d, 0.0),
                rx_gain_db: 35.0,
                transmitter: 0,
                label: HonestyLabel::Honest,
                fraud_magnitude: 0.0,
            });
        }
        let tree = SeedTree::new(42);
        let f = generate_field(&spec, 0, &tree);
        let vals: Vec<f64> = f.iter().map(|s| s.alpha[PARAM_SIGNAL]).collect();
        let mut diffs = Vec::new();
        for i in 0..vals.len() {
            for j in (i + 1)..vals.len().min(i + 20) {
                diffs.push(vals[i] - vals[j]);
            }
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / diffs.len() as f64;
        let target = sigma * sigma;
        assert!(
            (var - target).abs() < 0.2 * target,
            "var={var} target={target}"
        );
    }

    #[test]
    fn temporal_variance_matches_sigma_t() {
        let sigma = 0.5;
        let ratio = 0.4;
        let spec = tiny_spec(sigma, ratio);
        let tree = SeedTree::new(9);
        let mut diffs = Vec::new();
        let mut prev: Option<Vec<f64>> = None;
        for e in 0..2000 {
            let f = generate_field(&spec, e, &tree);
            let vals: Vec<f64> = f.iter().map(|s| s.alpha[PARAM_SIGNAL]).collect();
            if let Some(p) = prev {
                for (a, b) in vals.iter().zip(&p) {
                    diffs.push(a - b);
                }
            }
            prev = Some(vals);
        }
        let var =
            diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        let target = (ratio * sigma) * (ratio * sigma);
        assert!(
            (var - target).abs() < 0.15 * target,
            "var={var} target={target}"
        );
    }

    #[test]
    fn honest_field_pairwise_kurtosis_is_gaussian() {
        let mut spec = tiny_spec(0.5, 0.3);
        spec.receivers.clear();
        let mut r = rng(55);
        for i in 0..200 {
            let a: f64 = r.gen::<f64>() * std::f64::consts::TAU;
            let d: f64 = r.gen::<f64>().sqrt() * 1000.0;
            spec.receivers.push(ReceiverSpec {
                id: format!("rx{i}"),
                position: Position::new(a.cos() * d, a.sin() * d, 0.0),
                rx_gain_db: 35.0,
                transmitter: 0,
                label: HonestyLabel::Honest,
                fraud_magnitude: 0.0,
            });
        }
        let tree = SeedTree::new(77);
        let f = generate_field(&spec, 0, &tree);
        let vals: Vec<f64> = f.iter().map(|s| s.alpha[PARAM_SIGNAL]).collect();
        let mut diffs = Vec::with_capacity(10_000);
        'outer: for i in 0..vals.len() {
            for j in (i + 1)..vals.len() {
                diffs.push(vals[i] - vals[j]);
                if diffs.len() >= 10_000 {
                    break 'outer;
                }
            }
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let m2 = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        let m4 = diffs.iter().map(|d| (d - mean).powi(4)).sum::<f64>() / n;
        let kurtosis = m4 / (m2 * m2);
        assert!(
            (2.5..=3.5).contains(&kurtosis),
            "kurtosis={kurtosis} outside normality band"
        );
    }

    #[test]
    fn empty_receiver_set_yields_empty_field() {
        let mut spec = tiny_spec(0.5, 0.0);
        spec.receivers.clear();
        assert!(generate_field(&spec, 0, &SeedTree::new(1)).is_empty());
    }

    #[test]
    fn field_is_deterministic() {
        let spec = tiny_spec(0.5, 0.3);
        let a = field_rows(&spec, 2, &SeedTree::new(5));
        let b = field_rows(&spec, 2, &SeedTree::new(5));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                x.sample.alpha[PARAM_SIGNAL].to_bits(),
                y.sample.alpha[PARAM_SIGNAL].to_bits()
            );
        }
    }
}
