//! Multi-link system model: topologies, CSMA and interference sets, access
//! factors and throughput under a given power allocation.
//!
//! Links are indexed by AP position in [`Topology::aps`]; each AP serves
//! exactly one UE, so AP index and link index coincide.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coexist::{self, ModelParams, RegionLabel, SingleLinkScene};
use crate::radio::{channel_gain, Position, PowerWatt};
use crate::{Error, Result, Technology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoint {
    pub id: u32,
    pub tech: Technology,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEquipment {
    pub id: u32,
    pub position: Position,
    pub serving_ap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub params: ModelParams,
    #[serde(default)]
    pub aps: Vec<AccessPoint>,
    #[serde(default)]
    pub ues: Vec<UserEquipment>,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let mut ids = BTreeSet::new();
        for ap in &self.aps {
            if !ids.insert(ap.id) {
                return Err(Error::Topology(format!("duplicate AP id {}", ap.id)));
            }
            if !ap.position.is_finite() {
                return Err(Error::Topology(format!("AP {} has a non-finite position", ap.id)));
            }
        }
        let mut served = BTreeMap::new();
        let mut ue_ids = BTreeSet::new();
        for ue in &self.ues {
            if !ue_ids.insert(ue.id) {
                return Err(Error::Topology(format!("duplicate UE id {}", ue.id)));
            }
            if !ue.position.is_finite() {
                return Err(Error::Topology(format!("UE {} has a non-finite position", ue.id)));
            }
            if !ids.contains(&ue.serving_ap) {
                return Err(Error::Topology(format!(
                    "UE {} is served by unknown AP {}",
                    ue.id, ue.serving_ap
                )));
            }
            if let Some(other) = served.insert(ue.serving_ap, ue.id) {
                return Err(Error::Topology(format!(
                    "AP {} serves more than one UE ({} and {})",
                    ue.serving_ap, other, ue.id
                )));
            }
        }
        if let Some(ap) = self.aps.iter().find(|ap| !served.contains_key(&ap.id)) {
            return Err(Error::Topology(format!("AP {} serves no UE", ap.id)));
        }
        Ok(())
    }

    pub fn count(&self, tech: Technology) -> usize {
        self.aps.iter().filter(|ap| ap.tech == tech).count()
    }
}

/// `ma[i]`: Wi-Fi APs within carrier-sense range of Wi-Fi AP `i`.
/// `mb[i]`: Wi-Fi APs beyond carrier-sense range but within interference range.
/// Entries of LTE APs are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsmaSets {
    pub ma: Vec<Vec<usize>>,
    pub mb: Vec<Vec<usize>>,
}

pub fn csma_sets(topology: &Topology) -> CsmaSets {
    let cca = &topology.params.cca;
    let n = topology.aps.len();
    let mut ma = vec![Vec::new(); n];
    let mut mb = vec![Vec::new(); n];
    for (i, a) in topology.aps.iter().enumerate() {
        if a.tech != Technology::Wifi {
            continue;
        }
        for (j, b) in topology.aps.iter().enumerate() {
            if j == i || b.tech != Technology::Wifi {
                continue;
            }
            let d = a.position.distance(&b.position);
            if d <= cca.cs_range_m {
                ma[i].push(j);
            } else if d <= cca.int_range_m {
                mb[i].push(j);
            }
        }
    }
    CsmaSets { ma, mb }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessFactors {
    /// CSMA time share, 1 for LTE.
    pub a: Vec<f64>,
    /// Hidden-node factor, 1 for LTE.
    pub b: Vec<f64>,
}

pub fn access_factors(sets: &CsmaSets, zeta: f64) -> Result<AccessFactors> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::Config(format!("zeta must lie in [0, 1], got {zeta}")));
    }
    Ok(AccessFactors {
        a: sets.ma.iter().map(|m| 1.0 / (1.0 + m.len() as f64)).collect(),
        b: sets.mb.iter().map(|m| 1.0 / (1.0 + zeta * m.len() as f64)).collect(),
    })
}

/// Transmit power per AP, in topology order. Zero means silenced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerAllocation(pub Vec<PowerWatt>);

impl PowerAllocation {
    pub fn uniform(n: usize, p: PowerWatt) -> Self {
        Self(vec![p; n])
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i].0
    }
}

/// Topology with its gain matrices and access factors precomputed.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    /// `ue_gain[(i, j)]`: gain from AP `j` to the UE of link `i`.
    pub ue_gain: DMatrix<f64>,
    /// `ap_gain[(i, j)]`: gain from AP `j` to AP `i`.
    pub ap_gain: DMatrix<f64>,
    pub sets: CsmaSets,
    pub factors: AccessFactors,
    pub noise: f64,
    ue_of: Vec<usize>,
}

impl Network {
    pub fn new(topology: Topology) -> Result<Self> {
        topology.validate()?;
        let ch = &topology.params.channel;
        let n = topology.aps.len();
        let ue_of: Vec<usize> = topology
            .aps
            .iter()
            .map(|ap| topology.ues.iter().position(|u| u.serving_ap == ap.id).expect("validated"))
            .collect();
        let ue_gain = DMatrix::from_fn(n, n, |i, j| {
            channel_gain(&topology.aps[j].position, &topology.ues[ue_of[i]].position, ch).value()
        });
        let ap_gain = DMatrix::from_fn(n, n, |i, j| {
            channel_gain(&topology.aps[j].position, &topology.aps[i].position, ch).value()
        });
        let sets = csma_sets(&topology);
        let factors = access_factors(&sets, topology.params.cca.zeta)?;
        let noise = topology.params.noise().0;
        Ok(Self { topology, ue_gain, ap_gain, sets, factors, noise, ue_of })
    }

    pub fn len(&self) -> usize {
        self.topology.aps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topology.aps.is_empty()
    }

    pub fn tech(&self, i: usize) -> Technology {
        self.topology.aps[i].tech
    }

    pub fn params(&self) -> &ModelParams {
        &self.topology.params
    }

    /// Link indices of one technology, ascending.
    pub fn links(&self, tech: Technology) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tech(i) == tech).collect()
    }

    pub fn ue(&self, i: usize) -> &UserEquipment {
        &self.topology.ues[self.ue_of[i]]
    }

    /// Wi-Fi SINR under interference from every LTE AP.
    pub fn wifi_sinr(&self, i: usize, alloc: &PowerAllocation) -> f64 {
        let interference: f64 = (0..self.len())
            .filter(|&j| self.tech(j) == Technology::Lte)
            .map(|j| alloc.get(j) * self.ue_gain[(i, j)])
            .sum();
        alloc.get(i) * self.ue_gain[(i, i)] / (interference + self.noise)
    }

    /// LTE SINR: other LTE APs at full weight, Wi-Fi APs weighted by their
    /// CSMA time share.
    pub fn lte_sinr(&self, i: usize, alloc: &PowerAllocation) -> f64 {
        let interference: f64 = (0..self.len())
            .filter(|&j| j != i)
            .map(|j| {
                let w = match self.tech(j) {
                    Technology::Lte => 1.0,
                    Technology::Wifi => self.factors.a[j],
                };
                w * alloc.get(j) * self.ue_gain[(i, j)]
            })
            .sum();
        alloc.get(i) * self.ue_gain[(i, i)] / (interference + self.noise)
    }

    /// Energy sensed at Wi-Fi AP `i`: all LTE APs, hidden Wi-Fi APs, noise.
    pub fn wifi_channel_energy(&self, i: usize, alloc: &PowerAllocation) -> f64 {
        let lte: f64 = (0..self.len())
            .filter(|&j| self.tech(j) == Technology::Lte)
            .map(|j| alloc.get(j) * self.ap_gain[(i, j)])
            .sum();
        let hidden: f64 = self.sets.mb[i].iter().map(|&k| alloc.get(k) * self.ap_gain[(i, k)]).sum();
        lte + hidden + self.noise
    }

    pub fn wifi_cca_busy(&self, i: usize, alloc: &PowerAllocation) -> bool {
        self.wifi_channel_energy(i, alloc) > self.params().cca.lambda_c().0
    }

    fn single_link_scene(&self, alloc: &PowerAllocation) -> Option<(usize, usize, SingleLinkScene)> {
        let (w, l) = (self.links(Technology::Wifi), self.links(Technology::Lte));
        if w.len() != 1 || l.len() != 1 {
            return None;
        }
        let (w, l) = (w[0], l[0]);
        let scene = SingleLinkScene {
            wifi_ap: self.topology.aps[w].position,
            wifi_ue: self.ue(w).position,
            lte_ap: self.topology.aps[l].position,
            lte_ue: self.ue(l).position,
            p_wifi: alloc.0[w],
            p_lte: alloc.0[l],
            params: self.topology.params.clone(),
        };
        Some((w, l, scene))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub ap_id: u32,
    pub tech: Technology,
    pub sinr: f64,
    pub rate_bps: f64,
    pub region: RegionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStats {
    pub mean_bps: f64,
    pub p10_bps: f64,
    pub n: usize,
}

impl RateStats {
    pub fn from_rates(rates: &[f64]) -> Option<Self> {
        if rates.is_empty() {
            return None;
        }
        Some(Self {
            mean_bps: rates.iter().sum::<f64>() / rates.len() as f64,
            p10_bps: nearest_rank_percentile(rates, 10.0)?,
            n: rates.len(),
        })
    }
}

/// Nearest-rank percentile: the smallest value with at least `q`% of the
/// sample at or below it.
pub fn nearest_rank_percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub links: Vec<LinkReport>,
}

impl ThroughputReport {
    pub fn rates(&self, tech: Technology) -> Vec<f64> {
        self.links.iter().filter(|l| l.tech == tech).map(|l| l.rate_bps).collect()
    }

    pub fn stats(&self, tech: Technology) -> Option<RateStats> {
        RateStats::from_rates(&self.rates(tech))
    }
}

pub fn evaluate_throughput(net: &Network, alloc: &PowerAllocation) -> Result<ThroughputReport> {
    if alloc.0.len() != net.len() {
        return Err(Error::Topology(format!(
            "allocation has {} entries for {} APs",
            alloc.0.len(),
            net.len()
        )));
    }
    if let Some((w, l, scene)) = net.single_link_scene(alloc) {
        return Ok(single_link_report(net, w, l, &scene));
    }

    let params = net.params();
    let n = net.len();
    // Wi-Fi APs that defer on CCA do not interfere with LTE.
    let mut effective = alloc.clone();
    let mut busy = vec![false; n];
    for i in net.links(Technology::Wifi) {
        if alloc.get(i) > 0.0 && net.wifi_cca_busy(i, alloc) {
            busy[i] = true;
            effective.0[i] = PowerWatt::ZERO;
        }
    }
    let single_wifi = match net.links(Technology::Wifi).as_slice() {
        [w] if effective.get(*w) > 0.0 => Some(*w),
        _ => None,
    };

    let links = (0..n)
        .map(|i| {
            let ap_id = net.topology.aps[i].id;
            let tech = net.tech(i);
            let smin = params.smin(tech);
            let (sinr, rate_bps, region) = match tech {
                Technology::Wifi => {
                    let s = net.wifi_sinr(i, alloc);
                    if busy[i] {
                        (s, 0.0, RegionLabel::CcaBusy)
                    } else if s < smin || alloc.get(i) <= 0.0 {
                        (s, 0.0, RegionLabel::LowSinr)
                    } else {
                        let f = &net.factors;
                        (s, f.a[i] * f.b[i] * params.rate_bps(tech, s), RegionLabel::HighSinr)
                    }
                }
                Technology::Lte => {
                    let s = net.lte_sinr(i, &effective);
                    let gated = |s: f64| if s < smin { 0.0 } else { params.rate_bps(tech, s) };
                    let region = if s < smin { RegionLabel::LowSinr } else { RegionLabel::HighSinr };
                    let rate = match single_wifi {
                        Some(w) => {
                            let mut quiet = effective.clone();
                            quiet.0[w] = PowerWatt::ZERO;
                            let r_now = gated(net.lte_sinr(i, &quiet));
                            let fr = &params.fractions;
                            if s >= smin {
                                fr.eta_e * r_now + fr.eta_s * params.rate_bps(tech, s)
                            } else if params.strict_low_sinr {
                                0.0
                            } else {
                                fr.eta_e * r_now
                            }
                        }
                        None => gated(s),
                    };
                    (s, rate, region)
                }
            };
            LinkReport { ap_id, tech, sinr, rate_bps, region }
        })
        .collect();
    Ok(ThroughputReport { links })
}

fn single_link_report(net: &Network, w: usize, l: usize, scene: &SingleLinkScene) -> ThroughputReport {
    let wifi_silenced = scene.p_wifi.0 <= 0.0
        || coexist::classify_region(scene, Technology::Wifi) == RegionLabel::CcaBusy;
    let lte_sinr = if wifi_silenced { scene.lte_snr() } else { scene.lte_interfered_sinr() };
    let lte_region = if lte_sinr < scene.params.smin(Technology::Lte) {
        RegionLabel::LowSinr
    } else {
        RegionLabel::HighSinr
    };
    let mut links = vec![
        LinkReport {
            ap_id: net.topology.aps[w].id,
            tech: Technology::Wifi,
            sinr: scene.wifi_sinr(),
            rate_bps: coexist::wifi_throughput_single(scene),
            region: coexist::classify_region(scene, Technology::Wifi),
        },
        LinkReport {
            ap_id: net.topology.aps[l].id,
            tech: Technology::Lte,
            sinr: lte_sinr,
            rate_bps: coexist::lte_throughput_single(scene),
            region: lte_region,
        },
    ];
    if l < w {
        links.swap(0, 1);
    }
    ThroughputReport { links }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::coexist::tests::test_params;
    use crate::radio::{sinr, LinearGain, PowerDbm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn build(params: ModelParams, links: &[(Technology, (f64, f64), (f64, f64))]) -> Topology {
        let mut aps = Vec::new();
        let mut ues = Vec::new();
        for (k, (tech, ap, ue)) in links.iter().enumerate() {
            aps.push(AccessPoint { id: k as u32, tech: *tech, position: Position::new(ap.0, ap.1) });
            ues.push(UserEquipment { id: 100 + k as u32, position: Position::new(ue.0, ue.1), serving_ap: k as u32 });
        }
        Topology { params, aps, ues }
    }

    fn pmax() -> PowerWatt {
        PowerDbm(20.0).to_watt()
    }

    use Technology::{Lte, Wifi};

    #[test]
    fn csma_set_examples() {
        let t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.0, 0.0))]);
        let s = csma_sets(&t);
        assert!(s.ma[0].is_empty() && s.mb[0].is_empty());

        let t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.0, 0.0)), (Wifi, (100.0, 0.0), (101.0, 0.0))]);
        let s = csma_sets(&t);
        assert_eq!(s.ma, vec![vec![1], vec![0]]);

        let t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.0, 0.0)), (Wifi, (180.0, 0.0), (181.0, 0.0))]);
        let s = csma_sets(&t);
        assert_eq!(s.mb, vec![vec![1], vec![0]]);
        assert!(s.ma[0].is_empty());

        // LTE APs never enter these sets.
        let t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.0, 0.0)), (Lte, (10.0, 0.0), (11.0, 0.0))]);
        let s = csma_sets(&t);
        assert!(s.ma.iter().chain(&s.mb).all(|m| m.is_empty()));
    }

    #[test]
    fn access_factor_examples() {
        let sets = CsmaSets { ma: vec![vec![], vec![0]], mb: vec![vec![], vec![2, 3]] };
        let f = access_factors(&sets, 0.25).unwrap();
        assert_eq!(f.a, vec![1.0, 0.5]);
        assert_eq!(f.b[0], 1.0);
        assert_relative_eq!(f.b[1], 1.0 / 1.5, max_relative = 1e-15);
        assert!(access_factors(&sets, 1.5).is_err());
        assert!(access_factors(&sets, -0.1).is_err());
    }

    #[test]
    fn topology_validation() {
        let mut t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.0, 0.0)), (Lte, (10.0, 0.0), (11.0, 0.0))]);
        assert!(t.validate().is_ok());
        t.ues[1].serving_ap = 0;
        assert!(matches!(t.validate(), Err(Error::Topology(_))));
        t.ues[1].serving_ap = 7;
        assert!(t.validate().is_err());
        t.ues.pop();
        assert!(t.validate().is_err());
    }

    #[test]
    fn wifi_sinr_reductions() {
        let t = build(
            test_params(),
            &[(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (40.0, 0.0), (50.0, 0.0)), (Lte, (0.0, 60.0), (0.0, 70.0))],
        );
        let net = Network::new(t).unwrap();
        let n0 = net.noise;
        let mut alloc = PowerAllocation(vec![pmax(), PowerWatt::ZERO, PowerWatt::ZERO]);
        assert_relative_eq!(net.wifi_sinr(0, &alloc), pmax().0 * net.ue_gain[(0, 0)] / n0);

        alloc.0[1] = pmax();
        let g = |i, j| LinearGain::new(net.ue_gain[(i, j)]).unwrap();
        let one = sinr(pmax(), g(0, 0), &[(pmax(), g(0, 1))], PowerWatt(n0));
        assert_relative_eq!(net.wifi_sinr(0, &alloc), one, max_relative = 1e-14);

        alloc.0[2] = PowerWatt(0.05);
        let hand = 0.1 * net.ue_gain[(0, 0)] / (0.1 * net.ue_gain[(0, 1)] + 0.05 * net.ue_gain[(0, 2)] + n0);
        assert_relative_eq!(net.wifi_sinr(0, &alloc), hand, max_relative = 1e-14);
    }

    #[test]
    fn lte_sinr_weights_wifi_by_access_share() {
        let t = build(
            test_params(),
            &[
                (Wifi, (0.0, 0.0), (5.0, 0.0)),
                (Wifi, (100.0, 0.0), (105.0, 0.0)),
                (Lte, (50.0, 30.0), (50.0, 20.0)),
                (Lte, (50.0, -60.0), (50.0, -50.0)),
            ],
        );
        let net = Network::new(t).unwrap();
        assert_eq!(net.factors.a[0], 0.5);
        let alloc = PowerAllocation(vec![PowerWatt(0.1), PowerWatt(0.08), PowerWatt(0.1), PowerWatt(0.02)]);
        let g = &net.ue_gain;
        let hand = 0.1 * g[(2, 2)] / (0.02 * g[(2, 3)] + 0.5 * 0.1 * g[(2, 0)] + 0.5 * 0.08 * g[(2, 1)] + net.noise);
        assert_relative_eq!(net.lte_sinr(2, &alloc), hand, max_relative = 1e-14);

        // Lone LTE link: SNR.
        let t = build(test_params(), &[(Lte, (0.0, 0.0), (10.0, 0.0))]);
        let net = Network::new(t).unwrap();
        let alloc = PowerAllocation(vec![pmax()]);
        assert_relative_eq!(net.lte_sinr(0, &alloc), pmax().0 * net.ue_gain[(0, 0)] / net.noise);
    }

    #[test]
    fn wifi_interference_scales_with_access_share() {
        let links = [(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (60.0, 0.0), (30.0, 0.0)), (Lte, (0.0, 90.0), (0.0, 99.0))];
        let net = Network::new(build(test_params(), &links)).unwrap();
        let alloc = PowerAllocation::uniform(3, pmax());
        let interference = |net: &Network| net.ue_gain[(1, 1)] * alloc.get(1) / net.lte_sinr(1, &alloc) - net.noise;
        let full = interference(&net);
        let mut halved = net.clone();
        halved.factors.a[0] = 0.5;
        let intra = alloc.get(2) * net.ue_gain[(1, 2)];
        assert_relative_eq!(interference(&halved) - intra, 0.5 * (full - intra), max_relative = 1e-10);
    }

    #[test]
    fn one_by_one_matches_single_link_models() {
        for (wa, wu, la, lu) in [
            ((0.0, 0.0), (5.0, 0.0), (55.0, 0.0), (70.0, 0.0)),
            ((0.0, 0.0), (20.0, 0.0), (8.0, 0.0), (-5.0, 0.0)),
            ((30.0, 0.0), (35.0, 0.0), (0.0, 0.0), (30.0, 0.0)),
        ] {
            for strict in [false, true] {
                let mut params = test_params();
                params.strict_low_sinr = strict;
                let t = build(params.clone(), &[(Lte, la, lu), (Wifi, wa, wu)]);
                let net = Network::new(t).unwrap();
                let alloc = PowerAllocation::uniform(2, pmax());
                let r = evaluate_throughput(&net, &alloc).unwrap();
                let scene = SingleLinkScene {
                    wifi_ap: Position::new(wa.0, wa.1),
                    wifi_ue: Position::new(wu.0, wu.1),
                    lte_ap: Position::new(la.0, la.1),
                    lte_ue: Position::new(lu.0, lu.1),
                    p_wifi: pmax(),
                    p_lte: pmax(),
                    params,
                };
                assert_eq!(r.links[0].tech, Lte);
                assert_eq!(r.links[0].rate_bps, coexist::lte_throughput_single(&scene));
                assert_eq!(r.links[1].rate_bps, coexist::wifi_throughput_single(&scene));
                assert_eq!(r.links[1].region, coexist::classify_region(&scene, Wifi));
            }
        }
    }

    #[test]
    fn single_active_ap_gets_snr_rate() {
        let links = [
            (Wifi, (0.0, 0.0), (5.0, 0.0)),
            (Wifi, (60.0, 0.0), (65.0, 0.0)),
            (Lte, (0.0, 50.0), (0.0, 55.0)),
        ];
        let p = test_params();
        let net = Network::new(build(p.clone(), &links)).unwrap();
        let alloc = PowerAllocation(vec![PowerWatt::ZERO, PowerWatt::ZERO, pmax()]);
        let r = evaluate_throughput(&net, &alloc).unwrap();
        assert_eq!(r.links[0].rate_bps, 0.0);
        assert_eq!(r.links[1].rate_bps, 0.0);
        let snr = pmax().0 * net.ue_gain[(2, 2)] / net.noise;
        assert_relative_eq!(r.links[2].rate_bps, p.rate_bps(Lte, snr), max_relative = 1e-14);
    }

    #[test]
    fn two_by_two_hand_evaluation() {
        let links = [
            (Wifi, (0.0, 0.0), (5.0, 5.0)),
            (Wifi, (170.0, 0.0), (175.0, 5.0)),
            (Lte, (40.0, 100.0), (45.0, 95.0)),
            (Lte, (130.0, 190.0), (125.0, 180.0)),
        ];
        let p = test_params();
        let net = Network::new(build(p.clone(), &links)).unwrap();
        let alloc = PowerAllocation::uniform(4, pmax());
        let r = evaluate_throughput(&net, &alloc).unwrap();
        let ch = &p.channel;
        let g = |a: (f64, f64), b: (f64, f64)| {
            channel_gain(&Position::new(a.0, a.1), &Position::new(b.0, b.1), ch).value()
        };
        let (pw, n0) = (0.1, p.noise().0);
        let lam = p.cca.lambda_c().0;
        // Hidden pair at 170 m: a = 1, b = 1 / 1.25.
        for i in 0..2 {
            let (ap, ue) = (links[i].1, links[i].2);
            let energy = pw * g(links[2].1, ap) + pw * g(links[3].1, ap) + pw * g(links[1 - i].1, ap) + n0;
            let s = pw * g(ap, ue) / (pw * g(links[2].1, ue) + pw * g(links[3].1, ue) + n0);
            let expected = if energy > lam || s < p.smin(Wifi) {
                0.0
            } else {
                0.174 * 20e6 * (1.0 + 0.66 * s).log2() / 1.25
            };
            assert_relative_eq!(r.links[i].rate_bps, expected, max_relative = 1e-12);
        }
        let active: Vec<bool> = (0..2).map(|i| r.links[i].region != RegionLabel::CcaBusy).collect();
        for i in 2..4 {
            let (ap, ue) = (links[i].1, links[i].2);
            let other = links[5 - i].1;
            let wifi: f64 = (0..2).filter(|&k| active[k]).map(|k| pw * g(links[k].1, ue)).sum();
            let s = pw * g(ap, ue) / (pw * g(other, ue) + wifi + n0);
            let expected = if s < 1.0 { 0.0 } else { 0.48 * 20e6 * (1.0 + 0.657 * s).log2() };
            assert_relative_eq!(r.links[i].sinr, s, max_relative = 1e-12);
            assert_relative_eq!(r.links[i].rate_bps, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn percentile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank_percentile(&v, 10.0), Some(1.0));
        assert_eq!(nearest_rank_percentile(&v, 50.0), Some(5.0));
        assert_eq!(nearest_rank_percentile(&v, 100.0), Some(10.0));
        assert_eq!(nearest_rank_percentile(&[], 10.0), None);
        let s = RateStats::from_rates(&v).unwrap();
        assert_eq!(s.mean_bps, 5.5);
    }

    #[test]
    fn topology_toml_round_trip() {
        let t = build(test_params(), &[(Wifi, (0.0, 0.0), (1.5, 0.0)), (Lte, (10.0, 3.0), (11.0, 0.25))]);
        let text = toml::to_string(&t).unwrap();
        let back: Topology = toml::from_str(&text).unwrap();
        assert_eq!(back, t);
    }

    fn topo_strategy() -> impl Strategy<Value = Vec<(bool, (f64, f64), (f64, f64))>> {
        prop::collection::vec(
            (any::<bool>(), (0.0f64..200.0, 0.0f64..200.0), (-40.0f64..40.0, -40.0f64..40.0)),
            2..7,
        )
    }

    fn to_links(raw: &[(bool, (f64, f64), (f64, f64))]) -> Vec<(Technology, (f64, f64), (f64, f64))> {
        raw.iter()
            .map(|(w, ap, off)| (if *w { Wifi } else { Lte }, *ap, (ap.0 + off.0, ap.1 + off.1)))
            .collect()
    }

    proptest! {
        #[test]
        fn mirror_symmetry(raw in topo_strategy(), axis in 0usize..2) {
            let links = to_links(&raw);
            let mirrored: Vec<_> = links
                .iter()
                .map(|(t, a, u)| {
                    let f = |p: (f64, f64)| if axis == 0 { (-p.0, p.1) } else { (p.0, -p.1) };
                    (*t, f(*a), f(*u))
                })
                .collect();
            let n = links.len();
            let alloc = PowerAllocation::uniform(n, pmax());
            let a = evaluate_throughput(&Network::new(build(test_params(), &links)).unwrap(), &alloc).unwrap();
            let b = evaluate_throughput(&Network::new(build(test_params(), &mirrored)).unwrap(), &alloc).unwrap();
            for (x, y) in a.links.iter().zip(&b.links) {
                prop_assert!((x.sinr - y.sinr).abs() <= 1e-9 * x.sinr.abs().max(1e-300));
                prop_assert!((x.rate_bps - y.rate_bps).abs() <= 1e-9 * x.rate_bps.abs().max(1e-9));
                prop_assert_eq!(x.region, y.region);
            }
        }

        #[test]
        fn relabeling_permutes_report(raw in topo_strategy(), seed in any::<u64>()) {
            let links = to_links(&raw);
            let n = links.len();
            let t = build(test_params(), &links);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut p = t.clone();
            p.aps = perm.iter().map(|&k| t.aps[k].clone()).collect();
            let alloc = PowerAllocation::uniform(n, pmax());
            let a = evaluate_throughput(&Network::new(t).unwrap(), &alloc).unwrap();
            let b = evaluate_throughput(&Network::new(p).unwrap(), &alloc).unwrap();
            for (k, &orig) in perm.iter().enumerate() {
                let (x, y) = (&a.links[orig], &b.links[k]);
                prop_assert_eq!(x.ap_id, y.ap_id);
                prop_assert!((x.rate_bps - y.rate_bps).abs() <= 1e-9 * x.rate_bps.max(1.0));
                prop_assert_eq!(x.region, y.region);
            }
        }

        #[test]
        fn factors_in_unit_interval(raw in topo_strategy(), zeta in 0.0f64..=1.0) {
            let mut params = test_params();
            params.cca.zeta = zeta;
            let net = Network::new(build(params, &to_links(&raw))).unwrap();
            for i in 0..net.len() {
                prop_assert!(net.factors.a[i] > 0.0 && net.factors.a[i] <= 1.0);
                prop_assert!(net.factors.b[i] > 0.0 && net.factors.b[i] <= 1.0);
                prop_assert_eq!(net.factors.a[i] == 1.0, net.sets.ma[i].is_empty());
            }
        }

        #[test]
        fn silencing_never_hurts_others(raw in topo_strategy(), victim in 0usize..7) {
            let net = Network::new(build(test_params(), &to_links(&raw))).unwrap();
            let n = net.len();
            let victim = victim % n;
            let full = PowerAllocation::uniform(n, pmax());
            let mut quiet = full.clone();
            quiet.0[victim] = PowerWatt::ZERO;
            for i in (0..n).filter(|&i| i != victim) {
                let (a, b) = match net.tech(i) {
                    Wifi => (net.wifi_sinr(i, &full), net.wifi_sinr(i, &quiet)),
                    Lte => (net.lte_sinr(i, &full), net.lte_sinr(i, &quiet)),
                };
                prop_assert!(b >= a);
            }
        }
    }
}
