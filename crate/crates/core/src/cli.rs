//! Command-line front end with configuration loading and CSV reports.
//!
//! Configuration is TOML. Every section and key is optional; unknown keys are
//! rejected. See `README.md` for the schema.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::coexist::{CcaParams, ModelParams};
use crate::mac::{
    calibrate_efficiency, channel_time_fractions, lte_anchor_table, read_anchors, wifi_anchor_table,
    AnchorPoint, Calibration, EffParams, MacParams,
};
use crate::netmodel::Network;
use crate::radio::{ratio_to_db, ChannelParams, PowerDbm, PowerWatt};
use crate::scenario::{
    run_montecarlo, single_link_sweep, summarize_montecarlo, MonteCarloConfig, Scheme, SweepConfig, SweepGrid,
};
use crate::{Error, Result, Technology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyConfig {
    /// Explicit Wi-Fi `(alpha, beta)`; calibrated from the 802.11g table when absent.
    pub wifi: Option<EffParams>,
    /// Explicit LTE `(alpha, beta)`; calibrated from the CQI table when absent.
    pub lte: Option<EffParams>,
    /// Single-station Wi-Fi throughput at the top rate step.
    pub wifi_peak_mbps: f64,
    /// Share of the LTE channel bandwidth carrying data.
    pub lte_bandwidth_efficiency: f64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        Self { wifi: None, lte: None, wifi_peak_mbps: 22.2, lte_bandwidth_efficiency: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    /// Also the transmit power of every AP without coordination.
    pub p_max_dbm: f64,
    pub p_min_dbm: f64,
    pub smin_wifi_db: f64,
    pub smin_lte_db: f64,
    /// Zero the whole LTE rate, not just its interfered share, below `smin_lte_db`.
    pub strict_low_sinr: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self { p_max_dbm: 20.0, p_min_dbm: -30.0, smin_wifi_db: 10.0, smin_lte_db: 0.0, strict_low_sinr: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub mac: MacParams,
    pub efficiency: EfficiencyConfig,
    pub cca: CcaParams,
    pub constraint: ConstraintConfig,
    pub sweep: SweepConfig,
    pub montecarlo: MonteCarloConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::default(),
            mac: MacParams::default(),
            efficiency: EfficiencyConfig::default(),
            cca: CcaParams::default(),
            constraint: ConstraintConfig::default(),
            sweep: SweepConfig::default(),
            montecarlo: MonteCarloConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse { path: origin.to_string(), line, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn p_max(&self) -> PowerWatt {
        PowerDbm(self.constraint.p_max_dbm).to_watt()
    }

    /// Efficiency pairs, calibrated from the built-in anchor tables where not
    /// given explicitly.
    pub fn efficiencies(&self) -> Result<(EffParams, EffParams)> {
        let bw = self.channel.bandwidth_hz;
        let wifi = match self.efficiency.wifi {
            Some(e) => e,
            None => calibrate_efficiency(Technology::Wifi, &wifi_anchor_table(self.efficiency.wifi_peak_mbps)?, bw)?.eff,
        };
        let lte = match self.efficiency.lte {
            Some(e) => e,
            None => {
                calibrate_efficiency(Technology::Lte, &lte_anchor_table(self.efficiency.lte_bandwidth_efficiency, bw), bw)?
                    .eff
            }
        };
        Ok((wifi, lte))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        self.mac.validate()?;
        let (wifi_eff, lte_eff) = self.efficiencies()?;
        let c = &self.constraint;
        if !(c.p_min_dbm < c.p_max_dbm) {
            return Err(Error::Config("constraint.p_min_dbm must be below constraint.p_max_dbm".into()));
        }
        let params = ModelParams {
            channel: self.channel.clone(),
            wifi_eff,
            lte_eff,
            cca: self.cca.clone(),
            smin_wifi_db: c.smin_wifi_db,
            smin_lte_db: c.smin_lte_db,
            fractions: channel_time_fractions(1, &self.mac)?,
            strict_low_sinr: c.strict_low_sinr,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    None,
    Power,
    Tdma,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::None => Scheme::None,
            SchemeArg::Power => Scheme::PowerControl,
            SchemeArg::Tdma => Scheme::TimeDivision,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "coexsim", version, about = "Wi-Fi/LTE co-channel coexistence simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed, overriding `montecarlo.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-link distance sweep for both perspectives.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "none")]
        scheme: SchemeArg,
    },
    /// Random multi-link topologies under every configured scheme.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one scheme instead of `montecarlo.schemes`.
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
    },
    /// Fit `(alpha, beta)` to throughput anchors.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Two-column `sinr_db mbps` file; the built-in tables are used when omitted.
        #[arg(long)]
        anchors: Option<PathBuf>,
        /// Technology of the anchor file.
        #[arg(long, default_value = "wifi")]
        tech: Technology,
    },
}

impl clap::builder::ValueParserFactory for Technology {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Technology>())
    }
}

/// Resolved configuration for one command invocation.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

pub fn context(common: &CommonArgs) -> Result<Context> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.montecarlo.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(Context { seed: cfg.montecarlo.seed, cfg, out })
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Sweep { common, scheme } => cmd_sweep(&context(&common)?, scheme.into()),
        Command::Montecarlo { common, scheme } => {
            let mut ctx = context(&common)?;
            if let Some(s) = scheme {
                ctx.cfg.montecarlo.schemes = vec![s.into()];
            }
            cmd_montecarlo(&ctx)
        }
        Command::Calibrate { common, anchors, tech } => cmd_calibrate(&context(&common)?, anchors.as_deref(), tech),
    }
}

/// Fixed-point decimal with six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    // Round to six significant digits first so a carry moves the exponent.
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(dir: &Path, name: &str, comments: &[String], header: &[&str]) -> Result<Self> {
        let path = dir.join(name);
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for c in comments {
            writeln!(file, "# {c}").map_err(|e| Error::io(&path, e))?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn seed_comment(seed: u64) -> String {
    format!("seed: {seed}")
}

pub fn cmd_sweep(ctx: &Context, scheme: Scheme) -> Result<Vec<PathBuf>> {
    let params = ctx.cfg.model_params()?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for (tech, name) in [(Technology::Wifi, "wifi_sweep.csv"), (Technology::Lte, "lte_sweep.csv")] {
        let grid = single_link_sweep(&ctx.cfg.sweep, &params, tech, scheme, ctx.cfg.p_max())?;
        written.push(write_grid(ctx, &grid, name)?);
        summaries.push(grid.summary());
    }
    let mut out = CsvOut::create(
        &ctx.out,
        "sweep_summary.csv",
        &[seed_comment(ctx.seed), format!("scheme: {scheme}")],
        &[
            "perspective",
            "scheme",
            "n_cells",
            "zero_rate_fraction",
            "mean_degradation",
            "high_sinr_fraction",
            "low_sinr_fraction",
            "cca_busy_fraction",
            "mean_rate_mbps",
        ],
    )?;
    for s in &summaries {
        out.row([
            s.perspective.as_str().to_string(),
            s.scheme.as_str().to_string(),
            s.n_cells.to_string(),
            fmt_sig6(s.zero_rate_fraction),
            fmt_sig6(s.mean_degradation),
            fmt_sig6(s.high_sinr_fraction),
            fmt_sig6(s.low_sinr_fraction),
            fmt_sig6(s.cca_busy_fraction),
            fmt_sig6(s.mean_rate_bps / 1e6),
        ])?;
    }
    written.push(out.finish()?);
    Ok(written)
}

fn write_grid(ctx: &Context, grid: &SweepGrid, name: &str) -> Result<PathBuf> {
    let mut out = CsvOut::create(
        &ctx.out,
        name,
        &[seed_comment(ctx.seed), format!("scheme: {}", grid.scheme)],
        &["d_a_m", "d_i_m", "rate_mbps", "region"],
    )?;
    for c in &grid.cells {
        out.row([fmt_sig6(c.d_a_m), fmt_sig6(c.d_i_m), fmt_sig6(c.rate_bps / 1e6), c.region.as_str().to_string()])?;
    }
    out.finish()
}

pub fn cmd_montecarlo(ctx: &Context) -> Result<Vec<PathBuf>> {
    let params = ctx.cfg.model_params()?;
    let mc = &ctx.cfg.montecarlo;
    let runs = run_montecarlo(mc, &params, ctx.cfg.p_max())?;
    let comments = [seed_comment(ctx.seed), format!("ue_radius_m: {}", fmt_sig6(mc.ue_radius_m))];
    let mut written = Vec::new();

    let mut summary = CsvOut::create(
        &ctx.out,
        "mc_summary.csv",
        &comments,
        &["n_links", "tech", "scheme", "mean_mbps", "p10_mbps", "dropped_lte_mean"],
    )?;
    for r in summarize_montecarlo(&runs) {
        summary.row([
            r.n_links.to_string(),
            r.tech.as_str().to_string(),
            r.scheme.as_str().to_string(),
            fmt_sig6(r.mean_bps / 1e6),
            fmt_sig6(r.p10_bps / 1e6),
            fmt_sig6(r.dropped_lte_mean),
        ])?;
    }
    written.push(summary.finish()?);

    let mut detail = CsvOut::create(
        &ctx.out,
        "mc_detail.csv",
        &comments,
        &[
            "n_links", "topology", "scheme", "status", "eta", "ap_id", "tech", "power_dbm", "sinr_db", "rate_mbps",
            "region",
        ],
    )?;
    let topo_dir = ctx.out.join("topologies");
    fs::create_dir_all(&topo_dir).map_err(|e| Error::io(&topo_dir, e))?;
    for run in &runs {
        let net = Network::new(run.topology.clone())?;
        for res in &run.results {
            for (i, link) in res.report.links.iter().enumerate() {
                let p = res.alloc.get(i);
                detail.row([
                    run.n_links.to_string(),
                    run.index.to_string(),
                    res.scheme.as_str().to_string(),
                    res.status.map_or("none", |s| s.as_str()).to_string(),
                    res.eta.map_or(String::new(), fmt_sig6),
                    link.ap_id.to_string(),
                    net.tech(i).as_str().to_string(),
                    if p > 0.0 { fmt_sig6(PowerWatt(p).to_dbm().0) } else { "off".into() },
                    fmt_sig6(ratio_to_db(link.sinr)),
                    fmt_sig6(link.rate_bps / 1e6),
                    link.region.as_str().to_string(),
                ])?;
            }
        }
        let path = topo_dir.join(format!("n{}_t{}.toml", run.n_links, run.index));
        let text = toml::to_string(&run.topology).map_err(|e| Error::Config(e.to_string()))?;
        let body = format!("# {}\n{text}", seed_comment(ctx.seed));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    written.insert(1, detail.finish()?);
    Ok(written)
}

pub fn cmd_calibrate(ctx: &Context, anchors: Option<&Path>, tech: Technology) -> Result<Vec<PathBuf>> {
    let bw = ctx.cfg.channel.bandwidth_hz;
    let eff = &ctx.cfg.efficiency;
    let sets: Vec<(Technology, Vec<AnchorPoint>)> = match anchors {
        Some(p) => vec![(tech, read_anchors(p)?)],
        None => vec![
            (Technology::Wifi, wifi_anchor_table(eff.wifi_peak_mbps)?),
            (Technology::Lte, lte_anchor_table(eff.lte_bandwidth_efficiency, bw)),
        ],
    };
    let fits: Vec<Calibration> =
        sets.iter().map(|(t, a)| calibrate_efficiency(*t, a, bw)).collect::<Result<_>>()?;
    let mut out = CsvOut::create(
        &ctx.out,
        "efficiency.csv",
        &[seed_comment(ctx.seed)],
        &["tech", "alpha", "beta", "rms_residual_mbps", "max_rel_error", "n_points"],
    )?;
    for f in &fits {
        println!(
            "{}: alpha = {}, beta = {}, rms residual = {} Mbps",
            f.tech,
            fmt_sig6(f.eff.alpha),
            fmt_sig6(f.eff.beta),
            fmt_sig6(f.rms_residual_mbps)
        );
        out.row([
            f.tech.as_str().to_string(),
            fmt_sig6(f.eff.alpha),
            fmt_sig6(f.eff.beta),
            fmt_sig6(f.rms_residual_mbps),
            fmt_sig6(f.max_rel_error),
            f.n_points.to_string(),
        ])?;
    }
    Ok(vec![out.finish()?])
}
