//! Coordination schemes: joint power control with requirement relaxation,
//! per-RAT power control, and time-division channel access.
//!
//! Power control maximizes `sum_i w_i ln(beta_i S_i)` over log powers, with
//! `w = a_i b_i alpha_w` for Wi-Fi links and `alpha_l` for LTE links. This is
//! the high-SINR rate sum up to a constant factor, so the argmax is the same.

pub mod barrier;

use nalgebra::DVector;
use serde::Serialize;

use crate::netmodel::{Network, PowerAllocation};
use crate::radio::{PowerDbm, PowerWatt};
use crate::{Error, Result, Technology};
use barrier::{LogProgram, LogSumExp, LseConstraint, Outcome, SolverOptions};

/// Slack applied to the strict CCA inequality.
pub const CCA_SLACK: f64 = 1e-6;
/// Relative tolerance used when checking constraints on a returned allocation.
pub const CONSTRAINT_TOL: f64 = 1e-6;

/// Per-link minimum SINR (`None`: no requirement) and the power box.
#[derive(Debug, Clone, PartialEq)]
pub struct RateConstraints {
    pub min_sinr: Vec<Option<f64>>,
    pub p_max: PowerWatt,
    pub p_min: PowerWatt,
}

impl RateConstraints {
    /// Every link must reach its technology's minimum SINR.
    pub fn from_model(net: &Network) -> Self {
        let params = net.params();
        Self {
            min_sinr: (0..net.len()).map(|i| Some(params.smin(net.tech(i)))).collect(),
            p_max: PowerDbm(20.0).to_watt(),
            p_min: PowerWatt(1e-6),
        }
    }

    /// Minimum rates in bit/s, mapped to SINR through the high-SINR rate
    /// model. A zero rate means no requirement.
    pub fn from_min_rates(net: &Network, r_min_bps: &[f64]) -> Result<Self> {
        if r_min_bps.len() != net.len() {
            return Err(Error::Config(format!(
                "{} minimum rates given for {} links",
                r_min_bps.len(),
                net.len()
            )));
        }
        let params = net.params();
        let bw = params.channel.bandwidth_hz;
        let min_sinr = r_min_bps
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if !(r >= 0.0) {
                    return Err(Error::Config(format!("minimum rate of link {i} must be non-negative")));
                }
                if r == 0.0 {
                    return Ok(None);
                }
                let tech = net.tech(i);
                let share = match tech {
                    Technology::Wifi => net.factors.a[i] * net.factors.b[i],
                    Technology::Lte => 1.0,
                };
                Ok(Some(params.eff(tech).sinr_for_high_sinr_rate(r / share, bw)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { min_sinr, ..Self::from_model(net) })
    }

    pub fn with_p_max(mut self, p_max: PowerWatt) -> Self {
        self.p_max = p_max;
        self
    }

    fn validate(&self, net: &Network) -> Result<()> {
        if self.min_sinr.len() != net.len() {
            return Err(Error::Config("constraint vector length does not match topology".into()));
        }
        if !(self.p_max.0 > 0.0 && self.p_min.0 > 0.0 && self.p_min.0 < self.p_max.0) {
            return Err(Error::Config("power bounds must satisfy 0 < p_min < p_max".into()));
        }
        if self.min_sinr.iter().flatten().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("minimum SINR values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptStatus {
    Optimal,
    RelaxedOptimal,
    Infeasible,
}

impl OptStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OptStatus::Optimal => "optimal",
            OptStatus::RelaxedOptimal => "relaxed_optimal",
            OptStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub status: OptStatus,
    pub alloc: PowerAllocation,
    /// AP ids whose requirement was removed.
    pub dropped: Vec<u32>,
    /// AP ids switched off entirely.
    pub silenced: Vec<u32>,
    /// `sum w_i ln(beta_i S_i)` at the returned allocation.
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
}

impl OptResult {
    pub fn dropped_count(&self, net: &Network, tech: Technology) -> usize {
        self.dropped
            .iter()
            .filter(|id| net.topology.aps.iter().any(|ap| ap.id == **id && ap.tech == tech))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    /// Full coexistence model: Wi-Fi sees LTE, LTE sees both.
    Joint,
    /// One RAT alone, the other silent.
    Alone(Technology),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConstraintKind {
    Sinr(usize),
    Cca(usize),
}

struct Program {
    lp: LogProgram,
    kinds: Vec<ConstraintKind>,
    /// Link index of each variable.
    vars: Vec<usize>,
}

/// Which links are present and which carry a requirement.
#[derive(Debug, Clone)]
struct LinkState {
    active: Vec<bool>,
    required: Vec<bool>,
}

/// Does link `j`'s power appear in link `i`'s SINR denominator?
fn interferes(net: &Network, role: Role, i: usize, j: usize) -> bool {
    if i == j {
        return false;
    }
    match (role, net.tech(i), net.tech(j)) {
        (Role::Alone(Technology::Wifi), _, _) => false,
        (Role::Alone(Technology::Lte), Technology::Lte, Technology::Lte) => true,
        (Role::Alone(Technology::Lte), _, _) => false,
        (Role::Joint, Technology::Wifi, Technology::Lte) => true,
        (Role::Joint, Technology::Wifi, Technology::Wifi) => false,
        (Role::Joint, Technology::Lte, _) => true,
    }
}

fn interference_gain(net: &Network, i: usize, j: usize) -> f64 {
    match (net.tech(i), net.tech(j)) {
        (Technology::Lte, Technology::Wifi) => net.factors.a[j] * net.ue_gain[(i, j)],
        _ => net.ue_gain[(i, j)],
    }
}

fn objective_weight(net: &Network, i: usize) -> f64 {
    let p = net.params();
    match net.tech(i) {
        Technology::Wifi => net.factors.a[i] * net.factors.b[i] * p.wifi_eff.alpha,
        Technology::Lte => p.lte_eff.alpha,
    }
}

fn build_program(net: &Network, role: Role, rc: &RateConstraints, state: &LinkState) -> Program {
    let vars: Vec<usize> = (0..net.len()).filter(|&i| state.active[i]).collect();
    let mut var_of = vec![None; net.len()];
    for (k, &i) in vars.iter().enumerate() {
        var_of[i] = Some(k);
    }
    let params = net.params();
    let ln_n0 = net.noise.ln();
    let mut lp = LogProgram::new(vars.len());
    let mut kinds = Vec::new();
    lp.lower = vec![rc.p_min.0.ln(); vars.len()];
    lp.upper = vec![rc.p_max.0.ln(); vars.len()];

    for (k, &i) in vars.iter().enumerate() {
        let mut lse = LogSumExp::new();
        for (kj, &j) in vars.iter().enumerate() {
            if interferes(net, role, i, j) {
                lse.push_var(kj, interference_gain(net, i, j).ln());
            }
        }
        lse.push_const(ln_n0);
        let ln_gii = net.ue_gain[(i, i)].ln();
        let w = objective_weight(net, i);
        lp.linear_obj[k] += w;
        lp.const_obj += w * (params.eff(net.tech(i)).beta.ln() + ln_gii);
        lp.lse_obj.push((w, lse.clone()));
        if state.required[i] {
            if let Some(s) = rc.min_sinr[i] {
                lp.constraints.push(LseConstraint { lse, linear: vec![(k, 1.0)], rhs: ln_gii - s.ln() });
                kinds.push(ConstraintKind::Sinr(i));
            }
        }
    }

    let ln_lambda = (params.cca.lambda_c().0 * (1.0 - CCA_SLACK)).ln();
    for &i in vars.iter().filter(|&&i| net.tech(i) == Technology::Wifi) {
        let mut lse = LogSumExp::new();
        if role == Role::Joint {
            for (kj, &j) in vars.iter().enumerate() {
                if net.tech(j) == Technology::Lte {
                    lse.push_var(kj, net.ap_gain[(i, j)].ln());
                }
            }
        }
        for &j in &net.sets.mb[i] {
            if let Some(kj) = var_of[j] {
                lse.push_var(kj, net.ap_gain[(i, j)].ln());
            }
        }
        lse.push_const(ln_n0);
        lp.constraints.push(LseConstraint { lse, linear: vec![], rhs: ln_lambda });
        kinds.push(ConstraintKind::Cca(i));
    }
    Program { lp, kinds, vars }
}

enum Attempt {
    Solved(OptResult),
    Infeasible(Vec<(ConstraintKind, f64)>),
}

fn attempt(net: &Network, role: Role, rc: &RateConstraints, state: &LinkState) -> Attempt {
    let prog = build_program(net, role, rc, state);
    match barrier::solve(&prog.lp, &SolverOptions::default()) {
        Outcome::Optimal(sol) => {
            let mut alloc = PowerAllocation::uniform(net.len(), PowerWatt::ZERO);
            for (k, &i) in prog.vars.iter().enumerate() {
                alloc.0[i] = PowerWatt(sol.y[k].exp());
            }
            Attempt::Solved(OptResult {
                status: OptStatus::Optimal,
                alloc,
                dropped: Vec::new(),
                silenced: Vec::new(),
                objective: Some(sol.objective),
                kkt_residual: Some(sol.kkt_residual),
            })
        }
        Outcome::Infeasible(inf) => Attempt::Infeasible(prog.kinds.into_iter().zip(inf.violations).collect()),
    }
}

/// Which links the relaxation may drop, and whose violated constraints it
/// tries to relieve.
fn relaxation_targets(role: Role) -> (Technology, Technology) {
    match role {
        Role::Joint => (Technology::Lte, Technology::Wifi),
        Role::Alone(t) => (t, t),
    }
}

/// Pick the next link to drop: the candidate with the largest worst-case
/// (`p_max`) received power at violated constraints of the protected RAT.
/// Falls back to the candidate whose own constraint is most violated.
fn choose_drop(
    net: &Network,
    role: Role,
    rc: &RateConstraints,
    candidates: &[usize],
    violations: &[(ConstraintKind, f64)],
) -> Option<usize> {
    const VIOLATED: f64 = -1e-9;
    let (_, protected) = relaxation_targets(role);
    let violated: Vec<_> = violations.iter().filter(|(_, h)| *h > VIOLATED).map(|(k, _)| *k).collect();
    let score = |j: usize| -> f64 {
        violated
            .iter()
            .map(|k| match *k {
                ConstraintKind::Cca(i) if i != j && net.tech(i) == protected => {
                    let counts = net.tech(j) == Technology::Lte || net.sets.mb[i].contains(&j);
                    if counts { rc.p_max.0 * net.ap_gain[(i, j)] } else { 0.0 }
                }
                ConstraintKind::Sinr(i) if net.tech(i) == protected && interferes(net, role, i, j) => {
                    rc.p_max.0 * interference_gain(net, i, j)
                }
                _ => 0.0,
            })
            .sum()
    };
    let best = candidates
        .iter()
        .map(|&j| (j, score(j)))
        .fold(None, |acc: Option<(usize, f64)>, (j, s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((j, s)),
        });
    if let Some((j, s)) = best {
        if s > 0.0 {
            return Some(j);
        }
    }
    let own = |j: usize| {
        violations
            .iter()
            .find(|(k, _)| *k == ConstraintKind::Sinr(j))
            .map_or(f64::NEG_INFINITY, |(_, h)| *h)
    };
    candidates
        .iter()
        .map(|&j| (j, own(j)))
        .fold(None, |acc: Option<(usize, f64)>, (j, h)| match acc {
            Some((_, bh)) if bh >= h => acc,
            _ => Some((j, h)),
        })
        .map(|(j, _)| j)
}

fn ids(net: &Network, links: &[usize]) -> Vec<u32> {
    links.iter().map(|&i| net.topology.aps[i].id).collect()
}

fn relax(net: &Network, role: Role, rc: &RateConstraints, base: LinkState) -> Result<OptResult> {
    rc.validate(net)?;
    let mut state = base;
    let first = match attempt(net, role, rc, &state) {
        Attempt::Solved(r) => return Ok(r),
        Attempt::Infeasible(v) => v,
    };
    let (droppable, _) = relaxation_targets(role);
    let mut violations = first;
    let mut dropped: Vec<usize> = Vec::new();
    loop {
        let candidates: Vec<usize> = (0..net.len())
            .filter(|&i| net.tech(i) == droppable && state.active[i] && state.required[i])
            .filter(|&i| rc.min_sinr[i].is_some())
            .collect();
        let Some(j) = choose_drop(net, role, rc, &candidates, &violations) else { break };
        state.required[j] = false;
        dropped.push(j);
        match attempt(net, role, rc, &state) {
            Attempt::Solved(r) => return Ok(relaxed(net, r, &dropped, &[])),
            Attempt::Infeasible(v) => violations = v,
        }
        for &k in &dropped {
            let mut trial = state.clone();
            trial.active[k] = false;
            if let Attempt::Solved(r) = attempt(net, role, rc, &trial) {
                return Ok(relaxed(net, r, &dropped, &[k]));
            }
        }
    }
    let silenced: Vec<usize> = (0..net.len()).filter(|&i| net.tech(i) == droppable && state.active[i]).collect();
    for &k in &silenced {
        state.active[k] = false;
    }
    if let Attempt::Solved(r) = attempt(net, role, rc, &state) {
        return Ok(relaxed(net, r, &dropped, &silenced));
    }
    let mut alloc = PowerAllocation::uniform(net.len(), PowerWatt::ZERO);
    for i in (0..net.len()).filter(|&i| state.active[i]) {
        alloc.0[i] = rc.p_max;
    }
    Ok(OptResult {
        status: OptStatus::Infeasible,
        alloc,
        dropped: ids(net, &dropped),
        silenced: ids(net, &silenced),
        objective: None,
        kkt_residual: None,
    })
}

fn relaxed(net: &Network, mut r: OptResult, dropped: &[usize], silenced: &[usize]) -> OptResult {
    r.status = OptStatus::RelaxedOptimal;
    r.dropped = ids(net, dropped);
    r.silenced = ids(net, silenced);
    r
}

fn all_links(net: &Network, filter: impl Fn(Technology) -> bool) -> LinkState {
    let active: Vec<bool> = (0..net.len()).map(|i| filter(net.tech(i))).collect();
    LinkState { required: active.clone(), active }
}

/// Joint power control without relaxation. Returns `Infeasible` with every
/// AP at zero power when the requirements cannot all be met.
pub fn joint_power_control(net: &Network, rc: &RateConstraints) -> Result<OptResult> {
    rc.validate(net)?;
    match attempt(net, Role::Joint, rc, &all_links(net, |_| true)) {
        Attempt::Solved(r) => Ok(r),
        Attempt::Infeasible(_) => Ok(OptResult {
            status: OptStatus::Infeasible,
            alloc: PowerAllocation::uniform(net.len(), PowerWatt::ZERO),
            dropped: Vec::new(),
            silenced: Vec::new(),
            objective: None,
            kkt_residual: None,
        }),
    }
}

/// Joint power control, removing LTE requirements one link at a time (and
/// silencing LTE links if needed) until the program becomes feasible.
pub fn relax_and_solve(net: &Network, rc: &RateConstraints) -> Result<OptResult> {
    relax(net, Role::Joint, rc, all_links(net, |_| true))
}

/// Power control inside one RAT with the other RAT silent. Wi-Fi links see
/// only noise and keep their CCA constraint against hidden Wi-Fi APs; LTE
/// links see only other LTE links.
pub fn per_rat_power_control(net: &Network, rat: Technology, rc: &RateConstraints) -> Result<OptResult> {
    relax(net, Role::Alone(rat), rc, all_links(net, |t| t == rat))
}

/// `sum w_i ln(beta_i S_i)` of the joint program at an arbitrary allocation
/// (every AP must have positive power).
pub fn joint_objective(net: &Network, alloc: &PowerAllocation) -> f64 {
    let y = DVector::from_iterator(net.len(), alloc.0.iter().map(|p| p.0.ln()));
    let rc = RateConstraints::from_model(net);
    build_program(net, Role::Joint, &rc, &all_links(net, |_| true)).lp.objective(&y)
}

/// Largest relative violation of the joint program's constraints at
/// `alloc`; links with zero power are treated as absent.
pub fn max_constraint_violation(net: &Network, rc: &RateConstraints, result: &OptResult) -> f64 {
    let active: Vec<bool> = result.alloc.0.iter().map(|p| p.0 > 0.0).collect();
    let silenced_or_dropped = |i: usize| {
        let id = net.topology.aps[i].id;
        result.dropped.contains(&id) || result.silenced.contains(&id)
    };
    let state = LinkState { required: (0..net.len()).map(|i| active[i] && !silenced_or_dropped(i)).collect(), active };
    let prog = build_program(net, Role::Joint, rc, &state);
    let y = DVector::from_iterator(prog.vars.len(), prog.vars.iter().map(|&i| result.alloc.get(i).ln()));
    prog.lp
        .constraint_values(&y)
        .into_iter()
        .map(|h| h.max(0.0).exp_m1())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeShare {
    /// Share of channel time given to Wi-Fi.
    pub eta: f64,
}

/// Max-min time split: `eta* = B / (A + B)` with `A`, `B` the smallest Wi-Fi
/// and LTE rates. Returns the share and the achieved `min(eta A, (1-eta) B)`.
pub fn optimize_time_share(wifi_rates: &[f64], lte_rates: &[f64]) -> Result<(TimeShare, f64)> {
    if wifi_rates.iter().chain(lte_rates).any(|r| !(*r >= 0.0)) {
        return Err(Error::Config("rates must be non-negative".into()));
    }
    let min = |r: &[f64]| r.iter().cloned().fold(f64::INFINITY, f64::min);
    match (wifi_rates.is_empty(), lte_rates.is_empty()) {
        (true, true) => return Ok((TimeShare { eta: 0.5 }, 0.0)),
        (false, true) => return Ok((TimeShare { eta: 1.0 }, min(wifi_rates))),
        (true, false) => return Ok((TimeShare { eta: 0.0 }, min(lte_rates))),
        _ => {}
    }
    let (a, b) = (min(wifi_rates), min(lte_rates));
    if a + b == 0.0 {
        return Ok((TimeShare { eta: 0.5 }, 0.0));
    }
    let eta = b / (a + b);
    Ok((TimeShare { eta }, (eta * a).min((1.0 - eta) * b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coexist::tests::test_params;
    use crate::netmodel::tests::build;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Technology::{Lte, Wifi};

    fn net(links: &[(Technology, (f64, f64), (f64, f64))]) -> Network {
        Network::new(build(test_params(), links)).unwrap()
    }

    fn pmax() -> f64 {
        0.1
    }

    #[test]
    fn far_apart_pair_runs_at_full_power() {
        let n = net(&[(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (500.0, 0.0), (505.0, 0.0))]);
        let r = joint_power_control(&n, &RateConstraints::from_model(&n)).unwrap();
        assert_eq!(r.status, OptStatus::Optimal);
        for p in &r.alloc.0 {
            assert!((p.0 - pmax()).abs() / pmax() < 1e-6, "{p:?}");
        }
        assert!(r.kkt_residual.unwrap() < 1e-6);
    }

    #[test]
    fn collocated_aps_are_infeasible_then_lte_silenced() {
        let n = net(&[(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (5.0, 0.0), (15.0, 0.0))]);
        let rc = RateConstraints::from_model(&n);
        assert_eq!(joint_power_control(&n, &rc).unwrap().status, OptStatus::Infeasible);
        let r = relax_and_solve(&n, &rc).unwrap();
        assert_eq!(r.status, OptStatus::RelaxedOptimal);
        assert_eq!(r.dropped, vec![1]);
        assert_eq!(r.silenced, vec![1]);
        assert_eq!(r.alloc.0[1].0, 0.0);
        assert!((r.alloc.0[0].0 - pmax()).abs() / pmax() < 1e-6);
    }

    #[test]
    fn feasible_instance_needs_no_relaxation() {
        let n = net(&[(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (80.0, 0.0), (85.0, 0.0))]);
        let rc = RateConstraints::from_model(&n);
        let a = joint_power_control(&n, &rc).unwrap();
        let b = relax_and_solve(&n, &rc).unwrap();
        assert_eq!(a, b);
        assert!(b.dropped.is_empty());
    }

    #[test]
    fn single_links_per_rat_at_full_power() {
        for tech in [Wifi, Lte] {
            let n = net(&[(tech, (0.0, 0.0), (10.0, 0.0))]);
            let r = per_rat_power_control(&n, tech, &RateConstraints::from_model(&n)).unwrap();
            assert_eq!(r.status, OptStatus::Optimal);
            assert!((r.alloc.0[0].0 - pmax()).abs() / pmax() < 1e-6);
        }
    }

    #[test]
    fn symmetric_lte_pair_gets_symmetric_powers() {
        let n = net(&[(Lte, (-30.0, 0.0), (-10.0, 0.0)), (Lte, (30.0, 0.0), (10.0, 0.0))]);
        let r = per_rat_power_control(&n, Lte, &RateConstraints::from_model(&n)).unwrap();
        let (p0, p1) = (r.alloc.get(0), r.alloc.get(1));
        assert!((p0 - p1).abs() / p0 < 1e-6, "{p0} {p1}");
    }

    #[test]
    fn min_rate_requirements_map_to_sinr() {
        let n = net(&[(Wifi, (0.0, 0.0), (5.0, 0.0)), (Lte, (80.0, 0.0), (85.0, 0.0))]);
        let rc = RateConstraints::from_min_rates(&n, &[0.0, 5e6]).unwrap();
        assert_eq!(rc.min_sinr[0], None);
        let s = rc.min_sinr[1].unwrap();
        let rate = n.params().lte_eff.high_sinr_rate_bps(s, 20e6);
        assert!((rate - 5e6).abs() < 1e-3);
        assert!(RateConstraints::from_min_rates(&n, &[0.0]).is_err());
        assert!(RateConstraints::from_min_rates(&n, &[-1.0, 0.0]).is_err());
    }

    /// Brute-force oracle over a 200 x 200 log-power grid.
    fn grid_oracle(n: &Network, rc: &RateConstraints) -> Option<f64> {
        let (lo, hi) = (rc.p_min.0.ln(), rc.p_max.0.ln());
        let pts = 200;
        let mut best: Option<f64> = None;
        let state = all_links(n, |_| true);
        let prog = build_program(n, Role::Joint, rc, &state);
        for a in 0..pts {
            for b in 0..pts {
                let y0 = lo + (hi - lo) * a as f64 / (pts - 1) as f64;
                let y1 = lo + (hi - lo) * b as f64 / (pts - 1) as f64;
                let y = DVector::from_vec(vec![y0, y1]);
                if prog.lp.constraint_values(&y).iter().all(|&h| h <= 0.0) {
                    let f = prog.lp.objective(&y);
                    best = Some(best.map_or(f, |b: f64| b.max(f)));
                }
            }
        }
        best
    }

    #[test]
    fn solver_beats_grid_oracle_on_two_link_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            let wa = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
            let la = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
            let off = |rng: &mut ChaCha8Rng| (rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
            let (ow, ol) = (off(&mut rng), off(&mut rng));
            let n = net(&[(Wifi, wa, (wa.0 + ow.0, wa.1 + ow.1)), (Lte, la, (la.0 + ol.0, la.1 + ol.1))]);
            let rc = RateConstraints::from_model(&n);
            let r = joint_power_control(&n, &rc).unwrap();
            let oracle = grid_oracle(&n, &rc);
            match (r.status, oracle) {
                (OptStatus::Optimal, Some(best)) => {
                    let obj = r.objective.unwrap();
                    assert!(obj >= best - 1e-3, "solver {obj} < grid {best}");
                    assert!(r.kkt_residual.unwrap() < 1e-6, "{r:?} {:?}", n.topology.aps);
                    assert!(max_constraint_violation(&n, &rc, &r) <= CONSTRAINT_TOL);
                    checked += 1;
                }
                (OptStatus::Infeasible, None) => {}
                (OptStatus::Optimal, None) => {
                    // Feasible set thinner than the grid spacing.
                    assert!(max_constraint_violation(&n, &rc, &r) <= CONSTRAINT_TOL);
                }
                (s, o) => panic!("solver {s:?} but grid oracle {o:?}"),
            }
        }
    }

    #[test]
    fn objective_concave_in_log_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut links = Vec::new();
            for k in 0..3 {
                let ap = (rng.random_range(0.0..150.0), rng.random_range(0.0..150.0));
                let ue = (ap.0 + rng.random_range(-30.0..30.0), ap.1 + rng.random_range(-30.0..30.0));
                links.push((if k == 0 || rng.random_bool(0.5) { Wifi } else { Lte }, ap, ue));
            }
            let n = net(&links);
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-13.8..-2.3)).collect();
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-13.8..-2.3)).collect();
            let alloc = |v: &[f64]| PowerAllocation(v.iter().map(|x| PowerWatt(x.exp())).collect());
            let mid: Vec<f64> = y.iter().zip(&z).map(|(a, b)| 0.5 * (a + b)).collect();
            let (fy, fz, fm) = (joint_objective(&n, &alloc(&y)), joint_objective(&n, &alloc(&z)), joint_objective(&n, &alloc(&mid)));
            assert!(fm >= 0.5 * (fy + fz) - 1e-9, "{fm} < {}", 0.5 * (fy + fz));
        }
    }

    #[test]
    fn argmax_invariant_under_common_gain_scaling() {
        let links = [
            (Wifi, (0.0, 0.0), (10.0, 0.0)),
            (Lte, (60.0, 20.0), (50.0, 30.0)),
            (Lte, (10.0, 90.0), (20.0, 80.0)),
        ];
        let a = net(&links);
        let rc = RateConstraints::from_model(&a);
        let ra = relax_and_solve(&a, &rc).unwrap();
        let mut b = a.clone();
        let k = 1e-3;
        b.ue_gain *= k;
        b.ap_gain *= k;
        b.noise *= k;
        b.topology.params.cca.lambda_c_dbm += 10.0 * k.log10();
        let rb = relax_and_solve(&b, &rc).unwrap();
        assert_eq!(ra.status, rb.status);
        for (x, y) in ra.alloc.0.iter().zip(&rb.alloc.0) {
            assert!((x.0 - y.0).abs() <= 1e-5 * x.0.max(1e-9), "{} vs {}", x.0, y.0);
        }
    }

    #[test]
    fn time_share_examples() {
        let (s, v) = optimize_time_share(&[20.0], &[20.0]).unwrap();
        assert_eq!(s.eta, 0.5);
        assert_eq!(v, 10.0);
        let (s, v) = optimize_time_share(&[30.0, 45.0], &[10.0, 12.0]).unwrap();
        assert_eq!(s.eta, 0.25);
        assert_eq!(v, 7.5);
        let (s, v) = optimize_time_share(&[5.0], &[0.0]).unwrap();
        assert_eq!((s.eta, v), (0.0, 0.0));
        let (s, v) = optimize_time_share(&[0.0], &[0.0]).unwrap();
        assert_eq!((s.eta, v), (0.5, 0.0));
        assert!(optimize_time_share(&[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn time_share_matches_line_search() {
        let (a, b) = (30.0, 10.0);
        let best = (0..=10_000)
            .map(|k| k as f64 / 10_000.0)
            .map(|eta| (eta * a).min((1.0 - eta) * b))
            .fold(0.0, f64::max);
        let (_, v) = optimize_time_share(&[a], &[b]).unwrap();
        assert!((v - best).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn time_share_is_max_min(a in 0.0f64..1e8, b in 0.0f64..1e8, etas in prop::collection::vec(0.0f64..=1.0, 1000)) {
            let (s, v) = optimize_time_share(&[a], &[b]).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.eta));
            for eta in etas {
                prop_assert!((eta * a).min((1.0 - eta) * b) <= v + 1e-12 * v.max(1.0));
            }
        }
    }
}
