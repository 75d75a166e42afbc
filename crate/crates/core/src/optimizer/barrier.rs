//! Log-barrier interior-point method for programs of the form
//!
//! ```text
//! maximize   c.y + c0 - sum_i w_i * lse_i(y)
//! subject to lse_k(y) - a_k.y <= r_k
//!            lower < y < upper
//! ```
//!
//! where every `lse` is `ln(sum exp(y_j + b_j))`, possibly with constant
//! terms. With `w_i >= 0` the objective is concave and every constraint is
//! convex, which is what a geometric program looks like in log variables.

use nalgebra::{DMatrix, DVector};

/// `ln(sum_k exp(var_k + offset_k))`; a term with no variable is a constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogSumExp {
    pub terms: Vec<(Option<usize>, f64)>,
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_var(&mut self, var: usize, ln_coeff: f64) {
        self.terms.push((Some(var), ln_coeff));
    }

    pub fn push_const(&mut self, ln_value: f64) {
        self.terms.push((None, ln_value));
    }

    fn exponent(term: &(Option<usize>, f64), y: &DVector<f64>) -> f64 {
        term.0.map_or(0.0, |j| y[j]) + term.1
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let m = self.terms.iter().map(|t| Self::exponent(t, y)).fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return m;
        }
        m + self.terms.iter().map(|t| (Self::exponent(t, y) - m).exp()).sum::<f64>().ln()
    }

    /// Value and softmax-weighted gradient; the flag marks a nonzero gradient.
    /// The Hessian is `diag(grad) - grad grad^T` because every term has a
    /// unit coefficient on at most one variable.
    fn eval(&self, y: &DVector<f64>, grad: &mut DVector<f64>) -> f64 {
        let v = self.value(y);
        grad.fill(0.0);
        for t in &self.terms {
            if let Some(j) = t.0 {
                grad[j] += (Self::exponent(t, y) - v).exp();
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LseConstraint {
    pub lse: LogSumExp,
    pub linear: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LseConstraint {
    /// `h(y) = lse(y) - a.y - r`; feasible iff `h <= 0`.
    pub fn value(&self, y: &DVector<f64>) -> f64 {
        self.lse.value(y) - self.linear.iter().map(|&(j, a)| a * y[j]).sum::<f64>() - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogProgram {
    pub n: usize,
    pub linear_obj: DVector<f64>,
    pub const_obj: f64,
    /// `(w_i, lse_i)` with `w_i >= 0`.
    pub lse_obj: Vec<(f64, LogSumExp)>,
    pub constraints: Vec<LseConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LogProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            linear_obj: DVector::zeros(n),
            const_obj: 0.0,
            lse_obj: Vec::new(),
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn objective(&self, y: &DVector<f64>) -> f64 {
        self.linear_obj.dot(y) + self.const_obj - self.lse_obj.iter().map(|(w, l)| w * l.value(y)).sum::<f64>()
    }

    pub fn constraint_values(&self, y: &DVector<f64>) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(y)).collect()
    }

    fn in_box(&self, y: &DVector<f64>) -> bool {
        (0..self.n).all(|i| y[i] > self.lower[i] && y[i] < self.upper[i])
    }

    fn n_barrier_terms(&self) -> usize {
        self.constraints.len()
            + self.lower.iter().filter(|l| l.is_finite()).count()
            + self.upper.iter().filter(|u| u.is_finite()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the duality gap bound `m / t` is below this.
    pub gap_tol: f64,
    pub t0: f64,
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-9, t0: 1.0, mu: 10.0, max_outer: 40, max_newton: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub y: DVector<f64>,
    pub objective: f64,
    /// Worst of stationarity, dual sign, complementarity and primal residuals.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infeasibility {
    /// Best point of the feasibility search.
    pub y: DVector<f64>,
    /// `h_k(y)` per constraint; positive entries are violated.
    pub violations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal(Solution),
    Infeasible(Infeasibility),
}

/// Second-order expansion of `-t f(y) - sum ln(-h_k) - sum ln(box slack)`.
/// Returns `None` outside the strict interior.
fn barrier_eval(
    p: &LogProgram,
    t: f64,
    y: &DVector<f64>,
    want_derivs: bool,
) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    if !p.in_box(y) {
        return None;
    }
    let n = p.n;
    let mut val = -t * (p.linear_obj.dot(y) + p.const_obj);
    let mut grad = -t * &p.linear_obj;
    let mut hess = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);

    for (w, lse) in &p.lse_obj {
        let v = lse.eval(y, &mut g);
        val += t * w * v;
        if want_derivs {
            grad.axpy(t * w, &g, 1.0);
            add_lse_hessian(&mut hess, &g, t * w);
        }
    }
    for c in &p.constraints {
        let v = c.lse.eval(y, &mut g);
        let h = v - c.linear.iter().map(|&(j, a)| a * y[j]).sum::<f64>() - c.rhs;
        if !(h < 0.0) {
            return None;
        }
        val -= (-h).ln();
        if want_derivs {
            let mut dh = g.clone();
            for &(j, a) in &c.linear {
                dh[j] -= a;
            }
            let s = 1.0 / -h;
            grad.axpy(s, &dh, 1.0);
            add_lse_hessian(&mut hess, &g, s);
            hess.ger(s * s, &dh, &dh, 1.0);
        }
    }
    for i in 0..n {
        for (bound, sign) in [(p.upper[i], 1.0), (p.lower[i], -1.0)] {
            if bound.is_finite() {
                let slack = sign * (bound - y[i]);
                val -= slack.ln();
                if want_derivs {
                    grad[i] += sign / slack;
                    hess[(i, i)] += 1.0 / (slack * slack);
                }
            }
        }
    }
    Some((val, grad, hess))
}

fn add_lse_hessian(hess: &mut DMatrix<f64>, g: &DVector<f64>, scale: f64) {
    for i in 0..g.len() {
        hess[(i, i)] += scale * g[i];
    }
    hess.ger(-scale, g, g, 1.0);
}

fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1.0);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            return Some(-ch.solve(grad));
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

struct Centered {
    y: DVector<f64>,
    steps: usize,
}

/// Minimize the barrier function at fixed `t` by damped Newton steps.
/// `early_exit` is checked after every accepted step.
fn center(
    p: &LogProgram,
    t: f64,
    mut y: DVector<f64>,
    opts: &SolverOptions,
    early_exit: &dyn Fn(&DVector<f64>) -> bool,
) -> Option<(Centered, bool)> {
    let mut steps = 0;
    loop {
        let (val, grad, hess) = barrier_eval(p, t, &y, true)?;
        let dir = match newton_direction(&grad, &hess) {
            Some(d) => d,
            None => return Some((Centered { y, steps }, false)),
        };
        let decrement = -grad.dot(&dir);
        if decrement / 2.0 <= 1e-13 || steps >= opts.max_newton || !decrement.is_finite() {
            return Some((Centered { y, steps }, false));
        }
        // Once decreases fall below the rounding of `val`, Armijo cannot be
        // evaluated; fall back to requiring a smaller gradient.
        let noise_floor = 1e-12 * (val.abs() + 1.0);
        let grad_norm = grad.norm();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = &y + step * &dir;
            if let Some((v, g, _)) = barrier_eval(p, t, &cand, true) {
                let armijo = v <= val - 0.25 * step * decrement;
                if armijo || (v <= val + noise_floor && g.norm() < grad_norm) {
                    accepted = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        steps += 1;
        match accepted {
            Some(next) => y = next,
            None => return Some((Centered { y, steps }, false)),
        }
        if early_exit(&y) {
            return Some((Centered { y, steps }, true));
        }
    }
}

fn interior_start(p: &LogProgram) -> DVector<f64> {
    DVector::from_iterator(
        p.n,
        (0..p.n).map(|i| match (p.lower[i].is_finite(), p.upper[i].is_finite()) {
            (true, true) => 0.5 * (p.lower[i] + p.upper[i]),
            (true, false) => p.lower[i] + 1.0,
            (false, true) => p.upper[i] - 1.0,
            (false, false) => 0.0,
        }),
    )
}

/// Phase I: minimize `s` subject to `h_k(y) <= s`. Stops as soon as a
/// strictly feasible `y` is found.
fn phase_one(p: &LogProgram, opts: &SolverOptions) -> Result<DVector<f64>, Infeasibility> {
    const MARGIN: f64 = 1e-7;
    let y0 = interior_start(p);
    let h0 = p.constraint_values(&y0);
    if h0.iter().all(|&h| h < -MARGIN) {
        return Ok(y0);
    }
    let n = p.n;
    let mut aux = LogProgram::new(n + 1);
    aux.linear_obj[n] = -1.0;
    aux.lower[..n].copy_from_slice(&p.lower);
    aux.upper[..n].copy_from_slice(&p.upper);
    aux.lower[n] = -1.0;
    aux.constraints = p
        .constraints
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.linear.push((n, 1.0));
            c
        })
        .collect();

    let s0 = h0.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0) + 1.0;
    let mut z = y0.clone().insert_row(n, s0);
    let feasible = |z: &DVector<f64>| {
        let y = z.rows(0, n).into_owned();
        p.constraint_values(&y).iter().all(|&h| h < -MARGIN)
    };
    let mut t = opts.t0;
    let m = aux.n_barrier_terms() as f64;
    for _ in 0..opts.max_outer {
        let Some((c, hit)) = center(&aux, t, z.clone(), opts, &feasible) else { break };
        z = c.y;
        if hit {
            return Ok(z.rows(0, n).into_owned());
        }
        if m / t < opts.gap_tol {
            break;
        }
        t *= opts.mu;
    }
    let y = z.rows(0, n).into_owned();
    let violations = p.constraint_values(&y);
    if violations.iter().all(|&h| h < 0.0) {
        return Ok(y);
    }
    Err(Infeasibility { y, violations })
}

pub fn solve(p: &LogProgram, opts: &SolverOptions) -> Outcome {
    let mut y = match phase_one(p, opts) {
        Ok(y) => y,
        Err(inf) => return Outcome::Infeasible(inf),
    };
    let m = p.n_barrier_terms() as f64;
    let mut t = opts.t0;
    let mut steps = 0;
    for _ in 0..opts.max_outer {
        match center(p, t, y.clone(), opts, &|_| false) {
            Some((c, _)) => {
                y = c.y;
                steps += c.steps;
            }
            None => break,
        }
        if m / t < opts.gap_tol {
            break;
        }
        t *= opts.mu;
    }
    let (y, kkt_residual) = certify(p, y, t);
    Outcome::Optimal(Solution { objective: p.objective(&y), y, kkt_residual, newton_steps: steps })
}

/// Gradient of the (maximized) objective.
fn objective_gradient(p: &LogProgram, y: &DVector<f64>) -> DVector<f64> {
    let mut grad = p.linear_obj.clone();
    let mut g = DVector::zeros(p.n);
    for (w, lse) in &p.lse_obj {
        lse.eval(y, &mut g);
        grad.axpy(-w, &g, 1.0);
    }
    grad
}

/// Snap near-active bounds and return the worst KKT residual: stationarity,
/// dual sign, complementarity or primal violation. Multipliers of clearly
/// inactive constraints are the barrier estimates `1/(-t h)`; those of
/// near-active ones, whose slack is lost to rounding, come from least squares.
fn certify(p: &LogProgram, mut y: DVector<f64>, t: f64) -> (DVector<f64>, f64) {
    const ACTIVE: f64 = 1e-7;
    let before = y.clone();
    for i in 0..p.n {
        if p.upper[i] - y[i] < ACTIVE {
            y[i] = p.upper[i];
        } else if y[i] - p.lower[i] < ACTIVE {
            y[i] = p.lower[i];
        }
    }
    if p.constraint_values(&y).iter().any(|&h| h > 0.0) {
        y = before;
    }
    let h = p.constraint_values(&y);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut slacks = Vec::new();
    let mut g = DVector::zeros(p.n);
    let mut grad = objective_gradient(p, &y);
    let mut compl: f64 = 0.0;
    for (c, &hk) in p.constraints.iter().zip(&h) {
        c.lse.eval(&y, &mut g);
        let mut dh = g.clone();
        for &(j, a) in &c.linear {
            dh[j] -= a;
        }
        if hk > -ACTIVE {
            cols.push(dh);
            slacks.push(hk);
        } else {
            let lambda = 1.0 / (-t * hk);
            grad.axpy(-lambda, &dh, 1.0);
            compl = compl.max(lambda * -hk);
        }
    }
    for i in 0..p.n {
        for (slack, sign) in [(p.upper[i] - y[i], 1.0), (y[i] - p.lower[i], -1.0)] {
            if !slack.is_finite() {
                continue;
            }
            if slack < ACTIVE {
                let mut e = DVector::zeros(p.n);
                e[i] = sign;
                cols.push(e);
                slacks.push(-slack);
            } else {
                let lambda = 1.0 / (t * slack);
                grad[i] -= sign * lambda;
                compl = compl.max(lambda * slack);
            }
        }
    }
    let primal = h.iter().cloned().fold(0.0, f64::max);
    if cols.is_empty() {
        return (y, grad.amax().max(primal).max(compl));
    }
    let jac = DMatrix::from_columns(&cols);
    let lambda = match jac.clone().svd(true, true).solve(&grad, 1e-12) {
        Ok(l) => l,
        Err(_) => return (y, f64::INFINITY),
    };
    let stationarity = (&grad - &jac * &lambda).amax();
    let dual = lambda.iter().cloned().fold(0.0, |a: f64, l| a.max(-l));
    let compl = lambda.iter().zip(&slacks).map(|(l, s)| (l * s).abs()).fold(compl, f64::max);
    (y, stationarity.max(dual).max(compl).max(primal))
}
