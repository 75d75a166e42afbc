//! Physical-layer primitives from unit conversions up to SINR.
//!
//! Everything internal is carried in linear watts; dB and dBm only appear at
//! configuration and reporting boundaries.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Thermal noise power spectral density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Point in the deployment plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Power in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerWatt(pub f64);

/// Power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

impl PowerWatt {
    pub const ZERO: PowerWatt = PowerWatt(0.0);

    pub fn to_dbm(self) -> PowerDbm {
        PowerDbm(10.0 * (self.0 * 1e3).log10())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PowerDbm {
    pub fn to_watt(self) -> PowerWatt {
        PowerWatt(10f64.powf(self.0 / 10.0) * 1e-3)
    }
}

impl From<PowerDbm> for PowerWatt {
    fn from(p: PowerDbm) -> Self {
        p.to_watt()
    }
}

impl From<PowerWatt> for PowerDbm {
    fn from(p: PowerWatt) -> Self {
        p.to_dbm()
    }
}

pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Linear power gain of a propagation path. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LinearGain(f64);

impl LinearGain {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Config(format!("channel gain must be positive and finite, got {value}")))
        }
    }

    pub fn from_db(db: f64) -> Self {
        Self(db_to_ratio(db))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn to_db(self) -> f64 {
        ratio_to_db(self.0)
    }
}

/// Propagation and noise parameters shared by every link.
///
/// Path loss is
/// `pl_dist_coeff*log10(d) + pl_const + pl_freq_coeff*log10(f_GHz) + extra_loss_db`. Antenna heights are recorded for reporting only; the
/// propagation model uses ground distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub freq_ghz: f64,
    pub pl_dist_coeff: f64,
    pub pl_const: f64,
    pub pl_freq_coeff: f64,
    pub extra_loss_db: f64,
    pub noise_floor_dbm: f64,
    pub bandwidth_hz: f64,
    /// Distances below this are clamped before evaluating the log term.
    pub min_distance_m: f64,
    /// Largest accepted gap between `noise_floor_dbm` and the thermal floor.
    pub max_noise_figure_db: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            freq_ghz: 2.4,
            pl_dist_coeff: 36.7,
            pl_const: 22.7,
            pl_freq_coeff: 26.0,
            extra_loss_db: 0.0,
            noise_floor_dbm: -101.0,
            bandwidth_hz: 20e6,
            min_distance_m: 0.25,
            max_noise_figure_db: 10.0,
            ap_height_m: 10.0,
            ue_height_m: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("channel.bandwidth_hz must be > 0".into()));
        }
        if !(self.freq_ghz > 0.0) {
            return Err(Error::Config("channel.freq_ghz must be > 0".into()));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::Config("channel.min_distance_m must be > 0".into()));
        }
        let thermal = self.thermal_floor_dbm();
        // 0.05 dB slack absorbs the customary rounding of the floor to whole dBm.
        if self.noise_floor_dbm < thermal - 0.05
            || self.noise_floor_dbm > thermal + self.max_noise_figure_db
        {
            return Err(Error::Config(format!(
                "channel.noise_floor_dbm {} inconsistent with thermal floor {:.2} dBm \
                 (allowed noise figure 0..{} dB)",
                self.noise_floor_dbm, thermal, self.max_noise_figure_db
            )));
        }
        Ok(())
    }

    pub fn thermal_floor_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10()
    }

    pub fn noise_watt(&self) -> PowerWatt {
        PowerDbm(self.noise_floor_dbm).to_watt()
    }
}

pub fn path_loss_db(distance_m: f64, ch: &ChannelParams) -> f64 {
    let d = distance_m.max(ch.min_distance_m);
    ch.pl_dist_coeff * d.log10()
        + ch.pl_const
        + ch.pl_freq_coeff * ch.freq_ghz.log10()
        + ch.extra_loss_db
}

pub fn channel_gain(a: &Position, b: &Position, ch: &ChannelParams) -> LinearGain {
    LinearGain::from_db(-path_loss_db(a.distance(b), ch))
}

/// `p_sig*g_sig / (sum(p_k*g_k) + noise)`.
pub fn sinr(
    p_sig: PowerWatt,
    g_sig: LinearGain,
    interferers: &[(PowerWatt, LinearGain)],
    noise: PowerWatt,
) -> f64 {
    let interference: f64 = interferers.iter().map(|(p, g)| p.0 * g.0).sum();
    p_sig.0 * g_sig.0 / (interference + noise.0)
}
