//! Discretized spatio-temporal consistency losses.
//!
//! The spatial term compares each sample against a kernel-weighted mean of
//! its neighbourhood; the temporal term is the soft-trimmed frame difference,
//! acting as a regularizer. Kernel·Ψ weights are renormalized to sum to one
//! per neighbourhood so the estimate is a proper weighted mean and does not
//! scale with sample count.

use std::collections::BTreeMap;

use crate::signal::{AlphaMap, Position};

use super::kernel::{gaussian_kernel_exact, gaussian_kernel_poly, KERNEL_RANGE_SIGMAS};
use super::robust::soft_trim;
use super::{PodConfig, PodError, PodSample};

/// Per-sample output of one spatial pass.
#[derive(Clone, Debug)]
pub struct SpatialRecord {
    pub receiver_id: String,
    /// Neighbourhood estimate E[α(p)] per parameter (self excluded).
    pub mean: AlphaMap,
    /// α(p) − E[α(p)] per parameter.
    pub deviation: AlphaMap,
    /// γ_s · Σ_params |ρ(deviation)|.
    pub loss: f64,
    /// No neighbour within range: excluded from loss totals, still carries
    /// a temporal loss.
    pub isolated: bool,
}

/// Uniform ground-plane grid for neighbour queries. Cell size equals the
/// query radius, so candidates live in the 3×3 cell block around a point.
struct Grid {
    cell: f64,
    buckets: BTreeMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn build(positions: &[Position], cell: f64) -> Self {
        let cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in positions.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Position, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Candidate indices near `p`; caller must re-check true distance.
    fn candidates(&self, p: &Position, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy) = Self::key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend_from_slice(v);
                }
            }
        }
    }
}

/// Density-inverse sampling weights Ψ.
///
/// `Ψ_i = 1 / Σ_j kernel(d_ij, σ_α)` (self term included), renormalized so
/// `Σ Ψ_i = n`. Dense clusters are downweighted; isolated points keep full
/// weight. The kernel is truncated at the 3σ working range.
pub fn sampling_weights(positions: &[Position], sigma_alpha: f64) -> Vec<f64> {
    assert!(!positions.is_empty(), "positions must be non-empty");
    assert!(sigma_alpha > 0.0, "sigma_alpha must be > 0");
    let range = KERNEL_RANGE_SIGMAS * sigma_alpha;
    let grid = Grid::build(positions, range);
    let mut raw = vec![0.0; positions.len()];
    let mut cand = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        grid.candidates(p, &mut cand);
        let mut denom = 0.0;
        for &j in &cand {
            let d = p.distance(&positions[j]);
            if d <= range {
                denom += gaussian_kernel_exact(d, sigma_alpha).expect("sigma > 0");
            }
        }
        raw[i] = 1.0 / denom; // denom >= self term = 1
    }
    let sum: f64 = raw.iter().sum();
    let scale = positions.len() as f64 / sum;
    raw.iter_mut().for_each(|w| *w *= scale);
    raw
}

pub(super) fn trim_radius(cfg: &PodConfig, param: &str) -> f64 {
    cfg.theta_r_overrides
        .get(param)
        .copied()
        .unwrap_or(cfg.theta_r)
}

/// One spatial pass over the samples of a single transmitter epoch.
///
/// Neighbourhood means use only `valid`-masked neighbours `q ≠ p` within
/// `min(neighborhood_radius, 3σ)`; every sample still receives a record so
/// its deviation can feed the mixture fit.
pub fn spatial_loss(
    samples: &[PodSample],
    weights: &[f64],
    valid: &[bool],
    cfg: &PodConfig,
) -> Result<Vec<SpatialRecord>, PodError> {
    if samples.len() != weights.len() || samples.len() != valid.len() {
        return Err(PodError::Domain("mask/weight length mismatch".into()));
    }
    let range = cfg
        .neighborhood_radius
        .min(KERNEL_RANGE_SIGMAS * cfg.sigma_alpha);
    let positions: Vec<Position> = samples.iter().map(|s| s.position).collect();
    let grid = Grid::build(&positions, range);

    let mut records = Vec::with_capacity(samples.len());
    let mut cand = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        grid.candidates(&s.position, &mut cand);
        let mut wsum = 0.0;
        let mut acc: AlphaMap = s.alpha.keys().map(|k| (k.clone(), 0.0)).collect();
        for &j in &cand {
            if j == i || !valid[j] {
                continue;
            }
            let d = s.position.distance(&positions[j]);
            if d > range {
                continue;
            }
            let k = gaussian_kernel_poly(d, cfg.sigma_alpha, cfg.kernel_terms)?;
            let w = k * weights[j];
            wsum += w;
            for (param, v) in &samples[j].alpha {
                if let Some(a) = acc.get_mut(param) {
                    *a += w * v;
                }
            }
        }
        if wsum <= 0.0 {
            records.push(SpatialRecord {
                receiver_id: s.receiver_id.clone(),
                mean: AlphaMap::new(),
                deviation: AlphaMap::new(),
                loss: 0.0,
                isolated: true,
            });
            continue;
        }
        let mut mean = AlphaMap::new();
        let mut deviation = AlphaMap::new();
        let mut loss = 0.0;
        for (param, a) in acc {
            let m = a / wsum;
            let dev = s.alpha[&param] - m;
            loss += soft_trim(dev, trim_radius(cfg, &param)).abs();
            mean.insert(param.clone(), m);
            deviation.insert(param, dev);
        }
        records.push(SpatialRecord {
            receiver_id: s.receiver_id.clone(),
            mean,
            deviation,
            loss: cfg.gamma_s * loss,
            isolated: false,
        });
    }
    Ok(records)
}

/// Temporal output for one receiver.
#[derive(Clone, Debug)]
pub struct TemporalRecord {
    pub loss: f64,
    pub deviation: AlphaMap,
    /// No previous sample: first epoch for this receiver.
    pub cold_start: bool,
}

/// Soft-trimmed frame difference `γ_t · Σ_params |ρ(α(t) − α(t−Δt))|`.
pub fn temporal_loss(
    current: &PodSample,
    previous: Option<&AlphaMap>,
    cfg: &PodConfig,
) -> TemporalRecord {
    let Some(prev) = previous else {
        return TemporalRecord {
            loss: 0.0,
            deviation: AlphaMap::new(),
            cold_start: true,
        };
    };
    let mut loss = 0.0;
    let mut deviation = AlphaMap::new();
    for (param, v) in &current.alpha {
        let Some(pv) = prev.get(param) else { continue };
        let dev = v - pv;
        loss += soft_trim(dev, trim_radius(cfg, param)).abs();
        deviation.insert(param.clone(), dev);
    }
    TemporalRecord {
        loss: cfg.gamma_t * loss,
        deviation,
        cold_start: false,
    }
}
