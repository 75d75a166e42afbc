//! Saturated DCF analysis (Bianchi) and `(alpha, beta)` efficiency calibration.
//!
//! The rate model used throughout the crate is `alpha * B * log2(1 + beta * sinr)`.
//! For LTE `alpha` absorbs bandwidth overheads; for Wi-Fi it absorbs the
//! CSMA/CA airtime efficiency, which is why the Wi-Fi anchors are produced by
//! the Bianchi model below rather than by raw PHY rates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::radio::db_to_ratio;
use crate::{Error, Result, Technology};

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 200;

/// DCF timing in microseconds, basic access (no RTS/CTS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    /// `W`: initial contention window in slots.
    pub cw_min: u32,
    /// `m`: number of window doublings.
    pub max_backoff_stages: u32,
    pub slot_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    /// PHY preamble plus MAC header airtime.
    pub header_us: f64,
    pub ack_us: f64,
    pub payload_bits: f64,
    pub prop_delay_us: f64,
    pub data_rate_mbps: f64,
}

impl Default for MacParams {
    fn default() -> Self {
        Self::erp_ofdm(54.0)
    }
}

impl MacParams {
    /// 802.11g ERP-OFDM timing for one PHY rate. The ACK goes out at the
    /// highest mandatory basic rate not above the data rate.
    pub fn erp_ofdm(data_rate_mbps: f64) -> Self {
        let ack_rate = if data_rate_mbps >= 24.0 {
            24.0
        } else if data_rate_mbps >= 12.0 {
            12.0
        } else {
            6.0
        };
        Self {
            cw_min: 16,
            max_backoff_stages: 6,
            slot_us: 9.0,
            sifs_us: 10.0,
            difs_us: 28.0,
            header_us: 20.0 + 272.0 / data_rate_mbps,
            ack_us: 20.0 + 112.0 / ack_rate,
            payload_bits: 12_000.0,
            prop_delay_us: 1.0,
            data_rate_mbps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cw_min < 1 {
            return Err(Error::Config("mac.cw_min must be >= 1".into()));
        }
        let times = [
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("header_us", self.header_us),
            ("ack_us", self.ack_us),
            ("payload_bits", self.payload_bits),
            ("prop_delay_us", self.prop_delay_us),
            ("data_rate_mbps", self.data_rate_mbps),
        ];
        for (name, v) in times {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("mac.{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn payload_us(&self) -> f64 {
        self.payload_bits / self.data_rate_mbps
    }

    /// Channel time of a successful exchange: `H + E[P] + SIFS + d + ACK + DIFS + d`.
    pub fn success_us(&self) -> f64 {
        self.header_us
            + self.payload_us()
            + self.sifs_us
            + self.prop_delay_us
            + self.ack_us
            + self.difs_us
            + self.prop_delay_us
    }

    /// Channel time of a collision: `H + E[P] + DIFS + d`.
    pub fn collision_us(&self) -> f64 {
        self.header_us + self.payload_us() + self.difs_us + self.prop_delay_us
    }

    pub fn max_window(&self) -> u64 {
        (self.cw_min as u64) << self.max_backoff_stages
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BianchiSolution {
    /// Per-slot transmission probability of a station.
    pub tau: f64,
    /// Conditional collision probability seen by a transmitting station.
    pub p_coll: f64,
}

/// `tau(p) = 2 / (1 + W + p W sum_{k<m} (2p)^k)`, the removable-singularity-free
/// form of `2(1-2p) / ((1-2p)(W+1) + pW(1-(2p)^m))`.
fn tau_given_p(p: f64, mac: &MacParams) -> f64 {
    let w = mac.cw_min as f64;
    let mut geometric = 0.0;
    let mut term = 1.0;
    for _ in 0..mac.max_backoff_stages {
        geometric += term;
        term *= 2.0 * p;
    }
    2.0 / (1.0 + w + p * w * geometric)
}

pub fn bianchi_solve(n_stations: u32, mac: &MacParams) -> Result<BianchiSolution> {
    if n_stations == 0 {
        return Err(Error::Config("bianchi_solve needs at least one station".into()));
    }
    mac.validate()?;
    if n_stations == 1 {
        return Ok(BianchiSolution { tau: tau_given_p(0.0, mac), p_coll: 0.0 });
    }
    let others = (n_stations - 1) as i32;
    // residual(p) = p - (1 - (1 - tau(p))^(n-1)) is increasing in p.
    let residual = |p: f64| p - (1.0 - (1.0 - tau_given_p(p, mac)).powi(others));
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..FIXED_POINT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < FIXED_POINT_TOL && hi - lo < 1e-12 {
            return Ok(BianchiSolution { tau: tau_given_p(mid, mac), p_coll: mid });
        }
        if r > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    if residual(p).abs() < FIXED_POINT_TOL {
        Ok(BianchiSolution { tau: tau_given_p(p, mac), p_coll: p })
    } else {
        Err(Error::Solver(format!(
            "Bianchi fixed point did not converge for n = {n_stations}"
        )))
    }
}

/// Channel-time shares by slot outcome; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelTimeFractions {
    pub eta_e: f64,
    pub eta_s: f64,
    pub eta_c: f64,
}

impl ChannelTimeFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.eta_e, self.eta_s, self.eta_c];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("channel time fractions must lie in [0, 1]".into()));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("channel time fractions must sum to 1".into()));
        }
        Ok(())
    }
}

struct SlotAccounting {
    p_tr: f64,
    p_s: f64,
    empty: f64,
    success: f64,
    collision: f64,
}

fn slot_accounting(n_stations: u32, mac: &MacParams) -> Result<SlotAccounting> {
    let sol = bianchi_solve(n_stations, mac)?;
    let n = n_stations as i32;
    let idle = (1.0 - sol.tau).powi(n);
    let p_tr = 1.0 - idle;
    let p_s = n as f64 * sol.tau * (1.0 - sol.tau).powi(n - 1) / p_tr;
    Ok(SlotAccounting {
        p_tr,
        p_s,
        empty: idle * mac.slot_us,
        success: p_tr * p_s * mac.success_us(),
        collision: p_tr * (1.0 - p_s) * mac.collision_us(),
    })
}

pub fn channel_time_fractions(n_stations: u32, mac: &MacParams) -> Result<ChannelTimeFractions> {
    let acc = slot_accounting(n_stations, mac)?;
    let expected_slot = acc.empty + acc.success + acc.collision;
    let eta_e = acc.empty / expected_slot;
    let eta_s = acc.success / expected_slot;
    let eta_c = if n_stations == 1 { 0.0 } else { 1.0 - eta_e - eta_s };
    Ok(ChannelTimeFractions { eta_e, eta_s, eta_c: eta_c.max(0.0) })
}

/// Saturation throughput in bits per second.
pub fn saturation_throughput_bps(n_stations: u32, mac: &MacParams) -> Result<f64> {
    let acc = slot_accounting(n_stations, mac)?;
    let expected_slot = acc.empty + acc.success + acc.collision;
    Ok(acc.p_s * acc.p_tr * mac.payload_bits / expected_slot * 1e6)
}

/// Efficiency pair of the rate model `alpha * B * log2(1 + beta * sinr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffParams {
    pub alpha: f64,
    pub beta: f64,
}

impl EffParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "efficiency parameters must lie in (0, 1], got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn rate_bps(&self, sinr: f64, bandwidth_hz: f64) -> f64 {
        self.alpha * bandwidth_hz * (1.0 + self.beta * sinr).log2()
    }

    /// High-SINR form `alpha * B * log2(beta * sinr)` used by the power-control
    /// formulation.
    pub fn high_sinr_rate_bps(&self, sinr: f64, bandwidth_hz: f64) -> f64 {
        self.alpha * bandwidth_hz * (self.beta * sinr).log2()
    }

    /// Inverse of [`EffParams::high_sinr_rate_bps`].
    pub fn sinr_for_high_sinr_rate(&self, rate_bps: f64, bandwidth_hz: f64) -> f64 {
        2f64.powf(rate_bps / (self.alpha * bandwidth_hz)) / self.beta
    }
}

/// One calibration target: throughput reached at a given SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPoint {
    pub sinr_db: f64,
    pub mbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub tech: Technology,
    pub eff: EffParams,
    /// Root-mean-square fit residual in Mbps.
    pub rms_residual_mbps: f64,
    pub max_rel_error: f64,
    pub n_points: usize,
}

/// 802.11g rate steps and the SINR each needs. Thresholds follow the spacing of
/// the ERP-OFDM receiver sensitivity table, starting from 4 dB for 6 Mbps.
pub const WIFI_G_RATE_STEPS: [(f64, f64); 8] = [
    (4.0, 6.0),
    (5.0, 9.0),
    (7.0, 12.0),
    (9.0, 18.0),
    (12.0, 24.0),
    (16.0, 36.0),
    (20.0, 48.0),
    (21.0, 54.0),
];

/// 4-bit CQI table: (SINR threshold in dB, spectral efficiency in bit/s/Hz).
pub const LTE_CQI_TABLE: [(f64, f64); 15] = [
    (-6.7, 0.1523),
    (-4.7, 0.2344),
    (-2.3, 0.3770),
    (0.2, 0.6016),
    (2.4, 0.8770),
    (4.3, 1.1758),
    (5.9, 1.4766),
    (8.1, 1.9141),
    (10.3, 2.4063),
    (11.7, 2.7305),
    (14.1, 3.3223),
    (16.3, 3.9023),
    (18.7, 4.5234),
    (21.0, 5.1152),
    (22.7, 5.5547),
];

/// Wi-Fi anchors: single-station Bianchi throughput at each 802.11g rate step,
/// scaled so the highest step reaches `peak_mbps`.
pub fn wifi_anchor_table(peak_mbps: f64) -> Result<Vec<AnchorPoint>> {
    let raw = WIFI_G_RATE_STEPS
        .iter()
        .map(|&(sinr_db, rate)| {
            saturation_throughput_bps(1, &MacParams::erp_ofdm(rate))
                .map(|bps| AnchorPoint { sinr_db, mbps: bps / 1e6 })
        })
        .collect::<Result<Vec<_>>>()?;
    let top = raw.iter().map(|a| a.mbps).fold(f64::MIN, f64::max);
    Ok(raw
        .into_iter()
        .map(|a| AnchorPoint { sinr_db: a.sinr_db, mbps: a.mbps * peak_mbps / top })
        .collect())
}

/// LTE anchors: CQI spectral efficiency times `bandwidth_efficiency * B`.
pub fn lte_anchor_table(bandwidth_efficiency: f64, bandwidth_hz: f64) -> Vec<AnchorPoint> {
    LTE_CQI_TABLE
        .iter()
        .map(|&(sinr_db, se)| AnchorPoint {
            sinr_db,
            mbps: se * bandwidth_efficiency * bandwidth_hz / 1e6,
        })
        .collect()
}

/// Parses a two-column `sinr_db mbps` table. Columns may be separated by
/// whitespace or a comma; `#` starts a comment.
pub fn parse_anchors(text: &str, origin: &str) -> Result<Vec<AnchorPoint>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message,
        };
        if fields.len() != 2 {
            return Err(parse_err(format!("expected 2 columns, found {}", fields.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("`{s}` is not a finite number")))
        };
        out.push(AnchorPoint { sinr_db: num(fields[0])?, mbps: num(fields[1])? });
    }
    Ok(out)
}

pub fn read_anchors(path: &Path) -> Result<Vec<AnchorPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_anchors(&text, &path.display().to_string())
}

const LN_BETA_MIN: f64 = -6.907_755_278_982_137; // ln(1e-3)
const COARSE_STEPS: usize = 400;

/// Least-squares fit of `(alpha, beta)` to a throughput-vs-SINR target.
///
/// For fixed `beta` the optimal `alpha` is linear least squares, so the search
/// is one-dimensional in `ln(beta)`: a coarse log grid over `[1e-3, 1]`
/// followed by golden-section refinement around the best cell.
pub fn calibrate_efficiency(
    tech: Technology,
    anchors: &[AnchorPoint],
    bandwidth_hz: f64,
) -> Result<Calibration> {
    if anchors.len() < 2 {
        return Err(Error::Calibration("need at least two anchor points".into()));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::Calibration("bandwidth must be positive".into()));
    }
    let mut pts = anchors.to_vec();
    pts.sort_by(|a, b| a.sinr_db.total_cmp(&b.sinr_db).then(a.mbps.total_cmp(&b.mbps)));
    for w in pts.windows(2) {
        if w[1].sinr_db <= w[0].sinr_db {
            return Err(Error::Calibration(format!(
                "anchor SINR values must be strictly increasing (duplicate at {} dB)",
                w[0].sinr_db
            )));
        }
        if w[1].mbps < w[0].mbps {
            return Err(Error::Calibration(format!(
                "anchor throughput decreases between {} dB and {} dB",
                w[0].sinr_db, w[1].sinr_db
            )));
        }
    }
    if pts.iter().any(|p| p.mbps < 0.0) || pts.iter().all(|p| p.mbps == 0.0) {
        return Err(Error::Calibration("anchor throughput must be non-negative and not all zero".into()));
    }

    let b_mhz = bandwidth_hz / 1e6;
    let sinr: Vec<f64> = pts.iter().map(|p| db_to_ratio(p.sinr_db)).collect();
    let target: Vec<f64> = pts.iter().map(|p| p.mbps).collect();

    let fit_alpha = |ln_beta: f64| -> (f64, f64) {
        let beta = ln_beta.exp();
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (s, r) in sinr.iter().zip(&target) {
            let x = b_mhz * (1.0 + beta * s).log2();
            sxy += x * r;
            sxx += x * x;
        }
        let alpha = (sxy / sxx).clamp(f64::MIN_POSITIVE, 1.0);
        let sse: f64 = sinr
            .iter()
            .zip(&target)
            .map(|(s, r)| {
                let e = alpha * b_mhz * (1.0 + beta * s).log2() - r;
                e * e
            })
            .sum();
        (alpha, sse)
    };

    let step = -LN_BETA_MIN / COARSE_STEPS as f64;
    let (best_idx, _) = (0..=COARSE_STEPS)
        .map(|k| (k, fit_alpha(LN_BETA_MIN + k as f64 * step).1))
        .fold((0, f64::INFINITY), |acc, (k, sse)| if sse < acc.1 { (k, sse) } else { acc });

    let mut lo = LN_BETA_MIN + best_idx.saturating_sub(1) as f64 * step;
    let mut hi = (LN_BETA_MIN + (best_idx + 1) as f64 * step).min(0.0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (fit_alpha(c).1, fit_alpha(d).1);
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = fit_alpha(c).1;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = fit_alpha(d).1;
        }
    }
    let ln_beta = 0.5 * (lo + hi);
    let (alpha, sse) = fit_alpha(ln_beta);
    let eff = EffParams { alpha, beta: ln_beta.exp().min(1.0) };
    let max_rel_error = sinr
        .iter()
        .zip(&target)
        .filter(|(_, r)| **r > 0.0)
        .map(|(s, r)| (eff.rate_bps(*s, bandwidth_hz) / 1e6 - r).abs() / r)
        .fold(0.0, f64::max);
    Ok(Calibration {
        tech,
        eff,
        rms_residual_mbps: (sse / pts.len() as f64).sqrt(),
        max_rel_error,
        n_points: pts.len(),
    })
}
