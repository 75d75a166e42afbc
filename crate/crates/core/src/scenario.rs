//! Experiment engine: single-link distance sweeps and Monte Carlo runs over
//! random multi-link topologies, with per-scheme summary statistics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coexist::{ModelParams, RegionLabel};
use crate::netmodel::{
    evaluate_throughput, AccessPoint, Network, PowerAllocation, RateStats, ThroughputReport, Topology,
    UserEquipment,
};
use crate::optimizer::{
    optimize_time_share, per_rat_power_control, relax_and_solve, OptStatus, RateConstraints,
};
use crate::radio::{Position, PowerWatt};
use crate::{Error, Result, Technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    None,
    #[serde(alias = "power")]
    PowerControl,
    #[serde(alias = "tdma")]
    TimeDivision,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::None, Scheme::PowerControl, Scheme::TimeDivision];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::PowerControl => "power",
            Scheme::TimeDivision => "tdma",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive arithmetic range `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config(format!("{name}: step must be positive and bounds finite")));
        }
        if !(self.stop > self.start) {
            return Err(Error::Config(format!(
                "{name}: empty range [{}, {}]",
                self.start, self.stop
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Serving AP to its UE (UE at the origin).
    pub d_a: AxisRange,
    /// Interfering AP position on the x axis; negative means the far side.
    pub d_i: AxisRange,
    /// Distance from the interfering AP to its own UE, placed away from the origin.
    pub peer_link_m: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d_a: AxisRange { start: 0.0, stop: 100.0, step: 2.0 },
            d_i: AxisRange { start: -100.0, stop: 100.0, step: 2.0 },
            peer_link_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub d_a_m: f64,
    pub d_i_m: f64,
    pub rate_bps: f64,
    /// Rate of the same link with the other RAT silent.
    pub standalone_bps: f64,
    pub region: RegionLabel,
}

/// Row-major over `d_a` then `d_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub perspective: Technology,
    pub scheme: Scheme,
    pub d_a: Vec<f64>,
    pub d_i: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, ia: usize, ii: usize) -> &SweepCell {
        &self.cells[ia * self.d_i.len() + ii]
    }

    pub fn summary(&self) -> SweepSummary {
        let n = self.cells.len() as f64;
        let zero = self.cells.iter().filter(|c| c.rate_bps <= 0.0).count() as f64 / n;
        let degr: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.standalone_bps > 0.0)
            .map(|c| 1.0 - c.rate_bps / c.standalone_bps)
            .collect();
        let frac = |r: RegionLabel| self.cells.iter().filter(|c| c.region == r).count() as f64 / n;
        SweepSummary {
            perspective: self.perspective,
            scheme: self.scheme,
            n_cells: self.cells.len(),
            zero_rate_fraction: zero,
            mean_degradation: if degr.is_empty() { 0.0 } else { degr.iter().sum::<f64>() / degr.len() as f64 },
            high_sinr_fraction: frac(RegionLabel::HighSinr),
            low_sinr_fraction: frac(RegionLabel::LowSinr),
            cca_busy_fraction: frac(RegionLabel::CcaBusy),
            mean_rate_bps: self.cells.iter().map(|c| c.rate_bps).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub perspective: Technology,
    pub scheme: Scheme,
    pub n_cells: usize,
    pub zero_rate_fraction: f64,
    /// Mean over cells of `1 - rate / standalone`.
    pub mean_degradation: f64,
    pub high_sinr_fraction: f64,
    pub low_sinr_fraction: f64,
    pub cca_busy_fraction: f64,
    pub mean_rate_bps: f64,
}

/// One link of each RAT on the x axis. The perspective link's UE is at the
/// origin with its AP at `(d_a, 0)`; the other AP is at `(d_i, 0)`.
pub fn sweep_topology(params: &ModelParams, perspective: Technology, d_a: f64, d_i: f64, peer_link_m: f64) -> Topology {
    let other = match perspective {
        Technology::Wifi => Technology::Lte,
        Technology::Lte => Technology::Wifi,
    };
    let sign = if d_i < 0.0 { -1.0 } else { 1.0 };
    Topology {
        params: params.clone(),
        aps: vec![
            AccessPoint { id: 0, tech: perspective, position: Position::new(d_a, 0.0) },
            AccessPoint { id: 1, tech: other, position: Position::new(d_i, 0.0) },
        ],
        ues: vec![
            UserEquipment { id: 0, position: Position::new(0.0, 0.0), serving_ap: 0 },
            UserEquipment { id: 1, position: Position::new(d_i + sign * peer_link_m, 0.0), serving_ap: 1 },
        ],
    }
}

pub fn single_link_sweep(
    cfg: &SweepConfig,
    params: &ModelParams,
    perspective: Technology,
    scheme: Scheme,
    rc_p_max: PowerWatt,
) -> Result<SweepGrid> {
    params.validate()?;
    if !(cfg.peer_link_m >= 0.0) {
        return Err(Error::Config("sweep.peer_link_m must be non-negative".into()));
    }
    let d_a = cfg.d_a.values("sweep.d_a")?;
    let d_i = cfg.d_i.values("sweep.d_i")?;
    let points: Vec<(f64, f64)> = d_a.iter().flat_map(|&a| d_i.iter().map(move |&i| (a, i))).collect();
    let cells = points
        .par_iter()
        .map(|&(a, i)| {
            let net = Network::new(sweep_topology(params, perspective, a, i, cfg.peer_link_m))?;
            let rc = RateConstraints::from_model(&net).with_p_max(rc_p_max);
            let coord = evaluate_coordination(&net, scheme, &rc)?;
            let link = &coord.report.links[0];
            let mut alone = PowerAllocation::uniform(2, rc.p_max);
            alone.0[1] = PowerWatt::ZERO;
            let standalone = evaluate_throughput(&net, &alone)?.links[0].rate_bps;
            Ok(SweepCell { d_a_m: a, d_i_m: i, rate_bps: link.rate_bps, standalone_bps: standalone, region: link.region })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid { perspective, scheme, d_a, d_i, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinationReport {
    pub scheme: Scheme,
    pub report: ThroughputReport,
    pub alloc: PowerAllocation,
    /// Wi-Fi time share under time division.
    pub eta: Option<f64>,
    pub status: Option<OptStatus>,
    pub dropped_lte: usize,
}

pub fn evaluate_coordination(net: &Network, scheme: Scheme, rc: &RateConstraints) -> Result<CoordinationReport> {
    match scheme {
        Scheme::None => {
            let alloc = PowerAllocation::uniform(net.len(), rc.p_max);
            Ok(CoordinationReport {
                scheme,
                report: evaluate_throughput(net, &alloc)?,
                alloc,
                eta: None,
                status: None,
                dropped_lte: 0,
            })
        }
        Scheme::PowerControl => {
            let r = relax_and_solve(net, rc)?;
            Ok(CoordinationReport {
                scheme,
                report: evaluate_throughput(net, &r.alloc)?,
                dropped_lte: r.dropped_count(net, Technology::Lte),
                alloc: r.alloc,
                eta: None,
                status: Some(r.status),
            })
        }
        Scheme::TimeDivision => {
            let w = per_rat_power_control(net, Technology::Wifi, rc)?;
            let l = per_rat_power_control(net, Technology::Lte, rc)?;
            let rw = evaluate_throughput(net, &w.alloc)?;
            let rl = evaluate_throughput(net, &l.alloc)?;
            let (share, _) = optimize_time_share(&rw.rates(Technology::Wifi), &rl.rates(Technology::Lte))?;
            let eta = share.eta;
            let links = (0..net.len())
                .map(|i| match net.tech(i) {
                    Technology::Wifi => {
                        let mut link = rw.links[i].clone();
                        link.rate_bps *= eta;
                        link
                    }
                    Technology::Lte => {
                        let mut link = rl.links[i].clone();
                        link.rate_bps *= 1.0 - eta;
                        link
                    }
                })
                .collect();
            let mut alloc = w.alloc.clone();
            for i in net.links(Technology::Lte) {
                alloc.0[i] = l.alloc.0[i];
            }
            let status = [w.status, l.status]
                .into_iter()
                .max_by_key(|s| match s {
                    OptStatus::Optimal => 0,
                    OptStatus::RelaxedOptimal => 1,
                    OptStatus::Infeasible => 2,
                });
            Ok(CoordinationReport {
                scheme,
                report: ThroughputReport { links },
                alloc,
                eta: Some(eta),
                status,
                dropped_lte: l.dropped_count(net, Technology::Lte),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Links per RAT; each value is one experiment.
    pub n_links: Vec<u32>,
    pub area_m: f64,
    pub n_topologies: u32,
    pub seed: u64,
    /// UEs are uniform on a disc of this radius around their AP.
    pub ue_radius_m: f64,
    pub schemes: Vec<Scheme>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_links: vec![2, 5, 10],
            area_m: 200.0,
            n_topologies: 10,
            seed: 1,
            ue_radius_m: 50.0,
            schemes: Scheme::ALL.to_vec(),
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_topologies < 1 {
            return Err(Error::Config("montecarlo.n_topologies must be at least 1".into()));
        }
        if self.n_links.is_empty() || self.n_links.contains(&0) {
            return Err(Error::Config("montecarlo.n_links must list positive link counts".into()));
        }
        if !(self.area_m > 0.0) || !(self.ue_radius_m >= 0.0) {
            return Err(Error::Config("montecarlo.area_m must be positive and ue_radius_m non-negative".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("montecarlo.schemes must not be empty".into()));
        }
        Ok(())
    }
}

/// `n` Wi-Fi APs (ids `0..n`) then `n` LTE APs (ids `n..2n`), uniform over
/// the square area. UE `k` is served by AP `k`.
pub fn random_topology(cfg: &MonteCarloConfig, params: &ModelParams, n: u32, index: u32) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((u64::from(n) << 32) | u64::from(index));
    let mut aps = Vec::with_capacity(2 * n as usize);
    let mut ues = Vec::with_capacity(2 * n as usize);
    for k in 0..2 * n {
        let tech = if k < n { Technology::Wifi } else { Technology::Lte };
        let ap = Position::new(rng.random::<f64>() * cfg.area_m, rng.random::<f64>() * cfg.area_m);
        let r = cfg.ue_radius_m * rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        aps.push(AccessPoint { id: k, tech, position: ap });
        ues.push(UserEquipment {
            id: k,
            position: Position::new(ap.x + r * theta.cos(), ap.y + r * theta.sin()),
            serving_ap: k,
        });
    }
    Topology { params: params.clone(), aps, ues }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyRun {
    pub n_links: u32,
    pub index: u32,
    pub topology: Topology,
    pub results: Vec<CoordinationReport>,
}

pub fn run_montecarlo(cfg: &MonteCarloConfig, params: &ModelParams, p_max: PowerWatt) -> Result<Vec<TopologyRun>> {
    cfg.validate()?;
    params.validate()?;
    let jobs: Vec<(u32, u32)> = cfg.n_links.iter().flat_map(|&n| (0..cfg.n_topologies).map(move |i| (n, i))).collect();
    jobs.par_iter()
        .map(|&(n, index)| {
            let topology = random_topology(cfg, params, n, index);
            let net = Network::new(topology.clone())?;
            let rc = RateConstraints::from_model(&net).with_p_max(p_max);
            let results = cfg
                .schemes
                .iter()
                .map(|&s| evaluate_coordination(&net, s, &rc))
                .collect::<Result<Vec<_>>>()?;
            Ok(TopologyRun { n_links: n, index, topology, results })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeStats {
    pub tech: Technology,
    pub stats: RateStats,
}

/// Per-technology mean and nearest-rank p10 over rates pooled across reports.
pub fn aggregate_stats<'a>(reports: impl IntoIterator<Item = &'a ThroughputReport>) -> BTreeMap<Technology, RateStats> {
    let mut pooled: BTreeMap<Technology, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for l in &r.links {
            pooled.entry(l.tech).or_default().push(l.rate_bps);
        }
    }
    pooled
        .into_iter()
        .filter_map(|(t, v)| RateStats::from_rates(&v).map(|s| (t, s)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummaryRow {
    pub n_links: u32,
    pub tech: Technology,
    pub scheme: Scheme,
    pub mean_bps: f64,
    pub p10_bps: f64,
    pub dropped_lte_mean: f64,
}

pub fn summarize_montecarlo(runs: &[TopologyRun]) -> Vec<McSummaryRow> {
    let mut groups: BTreeMap<(u32, Scheme), Vec<&CoordinationReport>> = BTreeMap::new();
    for run in runs {
        for r in &run.results {
            groups.entry((run.n_links, r.scheme)).or_default().push(r);
        }
    }
    let mut rows = Vec::new();
    for ((n, scheme), reports) in groups {
        let dropped = reports.iter().map(|r| r.dropped_lte as f64).sum::<f64>() / reports.len() as f64;
        for (tech, s) in aggregate_stats(reports.iter().map(|r| &r.report)) {
            rows.push(McSummaryRow { n_links: n, tech, scheme, mean_bps: s.mean_bps, p10_bps: s.p10_bps, dropped_lte_mean: dropped });
        }
    }
    rows
}
