//! Single Wi-Fi / single LTE downlink throughput models and region labels.
//!
//! Wi-Fi senses the channel at its AP: whenever LTE energy plus noise exceeds
//! the CCA threshold the AP defers and its throughput is zero. LTE does not
//! sense; it sees Wi-Fi interference only during the `eta_s` share of time in
//! which the Wi-Fi AP is transmitting.

use serde::{Deserialize, Serialize};

use crate::mac::{ChannelTimeFractions, EffParams};
use crate::radio::{channel_gain, db_to_ratio, ChannelParams, Position, PowerDbm, PowerWatt};
use crate::{Result, Technology};

/// Carrier-sense configuration of the Wi-Fi network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcaParams {
    /// Energy-detection threshold over the full channel bandwidth.
    pub lambda_c_dbm: f64,
    pub cs_range_m: f64,
    pub int_range_m: f64,
    /// Hidden-node interference parameter.
    pub zeta: f64,
}

impl Default for CcaParams {
    fn default() -> Self {
        Self { lambda_c_dbm: -62.0, cs_range_m: 150.0, int_range_m: 210.0, zeta: 0.25 }
    }
}

impl CcaParams {
    pub fn lambda_c(&self) -> PowerWatt {
        PowerDbm(self.lambda_c_dbm).to_watt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cs_range_m >= 0.0 && self.cs_range_m < self.int_range_m) {
            return Err(crate::Error::Config(
                "cca.cs_range_m must be non-negative and below cca.int_range_m".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(crate::Error::Config(format!(
                "cca.zeta must lie in [0, 1], got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

/// Link-level model parameters shared by the single-link and multi-link models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub channel: ChannelParams,
    pub wifi_eff: EffParams,
    pub lte_eff: EffParams,
    pub cca: CcaParams,
    pub smin_wifi_db: f64,
    pub smin_lte_db: f64,
    /// Wi-Fi channel-time shares for a lone Wi-Fi station.
    pub fractions: ChannelTimeFractions,
    /// Zero the whole LTE blend, not just its interfered part, in the low-SINR region.
    pub strict_low_sinr: bool,
}

impl ModelParams {
    pub fn eff(&self, tech: Technology) -> &EffParams {
        match tech {
            Technology::Wifi => &self.wifi_eff,
            Technology::Lte => &self.lte_eff,
        }
    }

    pub fn smin(&self, tech: Technology) -> f64 {
        db_to_ratio(match tech {
            Technology::Wifi => self.smin_wifi_db,
            Technology::Lte => self.smin_lte_db,
        })
    }

    pub fn noise(&self) -> PowerWatt {
        self.channel.noise_watt()
    }

    pub fn rate_bps(&self, tech: Technology, sinr: f64) -> f64 {
        self.eff(tech).rate_bps(sinr, self.channel.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.wifi_eff.validate()?;
        self.lte_eff.validate()?;
        self.cca.validate()?;
        self.fractions.validate()
    }
}

/// One Wi-Fi link and one LTE link sharing a channel. A zero transmit power
/// means that network is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLinkScene {
    pub wifi_ap: Position,
    pub wifi_ue: Position,
    pub lte_ap: Position,
    pub lte_ue: Position,
    pub p_wifi: PowerWatt,
    pub p_lte: PowerWatt,
    pub params: ModelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    HighSinr,
    LowSinr,
    CcaBusy,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::HighSinr => "high_sinr",
            RegionLabel::LowSinr => "low_sinr",
            RegionLabel::CcaBusy => "cca_busy",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

struct SceneGains {
    /// Wi-Fi AP -> Wi-Fi UE.
    wifi: f64,
    /// LTE AP -> LTE UE.
    lte: f64,
    /// LTE AP -> Wi-Fi UE.
    lte_to_wifi_ue: f64,
    /// Wi-Fi AP -> LTE UE.
    wifi_to_lte_ue: f64,
    /// LTE AP -> Wi-Fi AP, the sensing path.
    lte_to_wifi_ap: f64,
}

impl SingleLinkScene {
    fn gains(&self) -> SceneGains {
        let ch = &self.params.channel;
        SceneGains {
            wifi: channel_gain(&self.wifi_ap, &self.wifi_ue, ch).value(),
            lte: channel_gain(&self.lte_ap, &self.lte_ue, ch).value(),
            lte_to_wifi_ue: channel_gain(&self.lte_ap, &self.wifi_ue, ch).value(),
            wifi_to_lte_ue: channel_gain(&self.wifi_ap, &self.lte_ue, ch).value(),
            lte_to_wifi_ap: channel_gain(&self.lte_ap, &self.wifi_ap, ch).value(),
        }
    }

    fn cca_busy(&self, g: &SceneGains) -> bool {
        self.p_lte.0 * g.lte_to_wifi_ap + self.params.noise().0 > self.params.cca.lambda_c().0
    }

    /// Wi-Fi SINR with LTE transmitting concurrently.
    pub fn wifi_sinr(&self) -> f64 {
        let g = self.gains();
        self.p_wifi.0 * g.wifi / (self.p_lte.0 * g.lte_to_wifi_ue + self.params.noise().0)
    }

    /// LTE SINR while the Wi-Fi AP is transmitting.
    pub fn lte_interfered_sinr(&self) -> f64 {
        let g = self.gains();
        self.p_lte.0 * g.lte / (self.p_wifi.0 * g.wifi_to_lte_ue + self.params.noise().0)
    }

    pub fn lte_snr(&self) -> f64 {
        let g = self.gains();
        self.p_lte.0 * g.lte / self.params.noise().0
    }

    pub fn wifi_snr(&self) -> f64 {
        let g = self.gains();
        self.p_wifi.0 * g.wifi / self.params.noise().0
    }
}

/// Energy sensed at the Wi-Fi AP: LTE interference plus noise.
pub fn wifi_channel_energy(scene: &SingleLinkScene) -> PowerWatt {
    let g = scene.gains();
    PowerWatt(scene.p_lte.0 * g.lte_to_wifi_ap + scene.params.noise().0)
}

pub fn wifi_throughput_single(scene: &SingleLinkScene) -> f64 {
    let g = scene.gains();
    if scene.p_lte.0 > 0.0 && scene.cca_busy(&g) {
        return 0.0;
    }
    let s = scene.p_wifi.0 * g.wifi / (scene.p_lte.0 * g.lte_to_wifi_ue + scene.params.noise().0);
    if s < scene.params.smin(Technology::Wifi) {
        return 0.0;
    }
    scene.params.rate_bps(Technology::Wifi, s)
}

/// LTE rate with Wi-Fi absent (`R_noW`), zero if even the SNR misses `smin_lte`.
pub fn lte_standalone_rate(scene: &SingleLinkScene) -> f64 {
    let s = scene.lte_snr();
    if s < scene.params.smin(Technology::Lte) {
        0.0
    } else {
        scene.params.rate_bps(Technology::Lte, s)
    }
}

pub fn lte_throughput_single(scene: &SingleLinkScene) -> f64 {
    let g = scene.gains();
    let r_now = lte_standalone_rate(scene);
    if scene.p_wifi.0 <= 0.0 || scene.cca_busy(&g) {
        return r_now;
    }
    let noise = scene.params.noise().0;
    let s = scene.p_lte.0 * g.lte / (scene.p_wifi.0 * g.wifi_to_lte_ue + noise);
    let f = &scene.params.fractions;
    if s < scene.params.smin(Technology::Lte) {
        return if scene.params.strict_low_sinr { 0.0 } else { f.eta_e * r_now };
    }
    f.eta_e * r_now + f.eta_s * scene.params.rate_bps(Technology::Lte, s)
}

pub fn classify_region(scene: &SingleLinkScene, perspective: Technology) -> RegionLabel {
    let g = scene.gains();
    if scene.p_lte.0 > 0.0 && scene.cca_busy(&g) {
        return RegionLabel::CcaBusy;
    }
    let (s, smin) = match perspective {
        Technology::Wifi => (scene.wifi_sinr(), scene.params.smin(Technology::Wifi)),
        Technology::Lte => (scene.lte_interfered_sinr(), scene.params.smin(Technology::Lte)),
    };
    if s < smin {
        RegionLabel::LowSinr
    } else {
        RegionLabel::HighSinr
    }
}
