//! Maximization of a smooth concave objective over affine inequalities
//! `a_i·x ≥ b_i`, by log-barrier path following with damped Newton steps.
//!
//! Problems here are small (a handful of variables and constraints), so the
//! Hessian is formed densely and factored with Cholesky at every step.
//! Constraint rows are scaled to unit norm internally; reported multipliers
//! and slacks are in the caller's units.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// A concave function with first and second derivatives.
pub trait ConcaveObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    /// Negative semidefinite Hessian.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// `a·x ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffineConstraint {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

/// Objective plus constraint list.
#[derive(Debug, Clone)]
pub struct ConcaveProgram<O> {
    pub objective: O,
    pub constraints: Vec<AffineConstraint>,
}

impl<O: ConcaveObjective> ConcaveProgram<O> {
    pub fn new(objective: O, constraints: Vec<AffineConstraint>) -> Result<Self> {
        let n = objective.dim();
        for (i, c) in constraints.iter().enumerate() {
            if c.a.len() != n {
                return Err(invalid(format!(
                    "constraint {i} has {} coefficients, program has {n} variables",
                    c.a.len()
                )));
            }
            if !(c.b.is_finite() && c.a.iter().all(|v| v.is_finite())) {
                return Err(invalid(format!("constraint {i} has non-finite data")));
            }
        }
        Ok(Self {
            objective,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Smallest `a_i·x − b_i`; `+∞` without constraints.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.slack(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_star: Vec<f64>,
    pub value: f64,
    /// One nonnegative multiplier per constraint, in the caller's units.
    pub multipliers: Vec<f64>,
    /// Stationarity ∞-norm plus largest complementarity product.
    pub kkt_residual: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
}

/// Knobs of the barrier method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    pub tol: f64,
    pub max_newton_steps: usize,
    pub mu_initial: f64,
    pub mu_factor: f64,
    pub mu_final: f64,
    pub armijo: f64,
    pub backtrack: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton_steps: 200,
            mu_initial: 1.0,
            mu_factor: 0.1,
            mu_final: 1e-10,
            armijo: 0.01,
            backtrack: 0.5,
        }
    }
}

/// Required slack of a point returned by [`find_feasible`].
pub const FEASIBILITY_MARGIN: f64 = 1e-10;

// Newton decrement λ²/2 at which an intermediate barrier stage ends.
const CENTERING_DECREMENT: f64 = 1e-6;
// Below this decrement the line search cannot resolve objective changes.
const NEGLIGIBLE_DECREMENT: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 80;
const PHASE_ONE_REGULARIZATION: f64 = 1e-8;
const ZERO_ROW: f64 = 1e-14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of [`find_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    /// No point with every slack at least [`FEASIBILITY_MARGIN`] was found;
    /// `min_slack` is the best smallest slack reached.
    Infeasible {
        min_slack: f64,
    },
}

/// Rows with a nonzero coefficient vector, scaled to unit norm.
struct Normalized {
    rows: Vec<(DVector<f64>, f64)>,
    // index into the caller's list, and the original row norm
    origin: Vec<(usize, f64)>,
}

enum Preprocessed {
    Ok(Normalized),
    Contradiction { index: usize, b: f64 },
}

fn normalize(constraints: &[AffineConstraint]) -> Preprocessed {
    let mut rows = Vec::new();
    let mut origin = Vec::new();
    for (i, c) in constraints.iter().enumerate() {
        let norm = dot(&c.a, &c.a).sqrt();
        if norm <= ZERO_ROW * (1.0 + c.b.abs()) {
            // 0 ≥ b: holds or fails regardless of x
            if c.b > 1e-12 {
                return Preprocessed::Contradiction { index: i, b: c.b };
            }
            continue;
        }
        rows.push((
            DVector::from_iterator(c.a.len(), c.a.iter().map(|v| v / norm)),
            c.b / norm,
        ));
        origin.push((i, norm));
    }
    Preprocessed::Ok(Normalized { rows, origin })
}

/// Phase-I objective over `(x, s)`: `s − (ρ/2)‖x‖²`.
struct PhaseOne {
    n: usize,
}

impl ConcaveObjective for PhaseOne {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn value(&self, z: &[f64]) -> f64 {
        z[self.n] - 0.5 * PHASE_ONE_REGULARIZATION * dot(&z[..self.n], &z[..self.n])
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let mut g =
            DVector::from_iterator(self.n + 1, z.iter().map(|v| -PHASE_ONE_REGULARIZATION * v));
        g[self.n] = 1.0;
        g
    }

    fn hessian(&self, _z: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.n + 1, self.n + 1) * -PHASE_ONE_REGULARIZATION;
        h[(self.n, self.n)] = 0.0;
        h
    }
}

/// Finds a point with every slack at least [`FEASIBILITY_MARGIN`] by
/// maximizing the smallest (normalized) slack `s`, capped at 1.
pub fn find_feasible<O: ConcaveObjective>(program: &ConcaveProgram<O>) -> Feasibility {
    let n = program.dim();
    let normalized = match normalize(&program.constraints) {
        Preprocessed::Ok(nz) => nz,
        Preprocessed::Contradiction { index, b } => {
            log::debug!("constraint {index} reads 0 ≥ {b}");
            return Feasibility::Infeasible { min_slack: -b };
        }
    };
    let origin = vec![0.0; n];
    if normalized.rows.is_empty() {
        return Feasibility::Feasible(origin);
    }

    let mut constraints: Vec<AffineConstraint> = normalized
        .rows
        .iter()
        .map(|(a, b)| {
            let mut row = a.as_slice().to_vec();
            row.push(-1.0);
            AffineConstraint::new(row, *b)
        })
        .collect();
    let mut cap = vec![0.0; n + 1];
    cap[n] = -1.0;
    constraints.push(AffineConstraint::new(cap, -1.0));

    let s0 = normalized
        .rows
        .iter()
        .map(|(_, b)| -b)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        - 1.0;
    let mut z0 = vec![0.0; n + 1];
    z0[n] = s0;

    let phase_one = ConcaveProgram {
        objective: PhaseOne { n },
        constraints,
    };
    let report = match maximize(&phase_one, &z0, &BarrierOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("phase I failed: {e}");
            return Feasibility::Infeasible {
                min_slack: program.min_slack(&origin),
            };
        }
    };
    let x = report.x_star[..n].to_vec();
    let min_slack = program.min_slack(&x);
    if min_slack >= FEASIBILITY_MARGIN {
        Feasibility::Feasible(x)
    } else {
        Feasibility::Infeasible { min_slack }
    }
}

/// Barrier function state at one point.
struct Barrier<'p, O> {
    program: &'p ConcaveProgram<O>,
    rows: &'p [(DVector<f64>, f64)],
}

impl<O: ConcaveObjective> Barrier<'_, O> {
    fn slacks(&self, x: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().map(|(a, b)| a.dot(x) - b).collect()
    }

    /// `f(x) + μ Σ ln r_i`, or `None` outside the interior.
    fn value(&self, x: &DVector<f64>, mu: f64) -> Option<f64> {
        let slacks = self.slacks(x);
        if slacks.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return None;
        }
        let f = self.program.objective.value(x.as_slice());
        let v = f + mu * slacks.iter().map(|r| r.ln()).sum::<f64>();
        v.is_finite().then_some(v)
    }

    fn gradient(&self, x: &DVector<f64>, mu: f64, slacks: &[f64]) -> DVector<f64> {
        let mut g = self.program.objective.gradient(x.as_slice());
        for ((a, _), r) in self.rows.iter().zip(slacks) {
            g.axpy(mu / r, a, 1.0);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>, mu: f64, slacks: &[f64]) -> DMatrix<f64> {
        let mut h = self.program.objective.hessian(x.as_slice());
        for ((a, _), r) in self.rows.iter().zip(slacks) {
            h.ger(-mu / (r * r), a, a, 1.0);
        }
        h
    }
}

/// Solves `(−H) d = g` for the ascent direction, adding a ridge if `−H` is
/// not numerically positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let neg = -h;
    if let Some(chol) = neg.clone().cholesky() {
        return Some(chol.solve(g));
    }
    let scale = neg.diagonal().amax().max(1.0);
    let mut ridge = 1e-12 * scale;
    while ridge <= 1e6 * scale {
        let shifted = &neg + DMatrix::identity(neg.nrows(), neg.ncols()) * ridge;
        if let Some(chol) = shifted.cholesky() {
            return Some(chol.solve(g));
        }
        ridge *= 100.0;
    }
    None
}

/// Maximizes the program starting from a strictly feasible `x0`.
///
/// The barrier path is followed down to `options.mu_final`; the constraints
/// the path identifies as binding are then enforced as equalities and the
/// KKT system is solved directly, since slacks of order `μ` carry too few
/// significant digits to recover multipliers from `μ/r`.
///
/// Returns a report with status `Optimal` when the KKT residual reaches
/// `options.tol`, or `MaxIters` with the last iterate otherwise.
pub fn maximize<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    x0: &[f64],
    options: &BarrierOptions,
) -> Result<SolveReport> {
    let n = program.dim();
    if x0.len() != n {
        return Err(invalid(format!(
            "starting point has {} entries, program has {n} variables",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("starting point has non-finite entries"));
    }
    let normalized = match normalize(&program.constraints) {
        Preprocessed::Ok(nz) => nz,
        Preprocessed::Contradiction { index, b } => {
            return Err(invalid(format!(
                "constraint {index} reads 0 ≥ {b}; no point is feasible"
            )))
        }
    };
    let barrier = Barrier {
        program,
        rows: &normalized.rows,
    };
    let mut x = DVector::from_column_slice(x0);
    if barrier.slacks(&x).iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(invalid("starting point is not strictly feasible"));
    }

    let (mu, mut steps) = follow_path(&barrier, &mut x, options);

    let slacks = barrier.slacks(&x);
    let mut multipliers = vec![0.0; program.constraints.len()];
    for ((index, norm), r) in normalized.origin.iter().zip(&slacks) {
        multipliers[*index] = mu / (r * norm);
    }
    let mut x_star = x.as_slice().to_vec();
    let mut best_residual = kkt_residual(program, &x_star, &multipliers);

    let normalized_multipliers: Vec<f64> = slacks.iter().map(|r| mu / r).collect();
    if let Some(polished) = polish(program, &normalized, &x, &normalized_multipliers) {
        steps += polished.steps;
        let residual = kkt_residual(program, &polished.x, &polished.multipliers);
        if residual < best_residual && program.min_slack(&polished.x) >= -FEASIBILITY_MARGIN {
            x_star = polished.x;
            multipliers = polished.multipliers;
            best_residual = residual;
        }
    }

    let status = if best_residual <= options.tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIters
    };
    Ok(SolveReport {
        value: program.objective.value(&x_star),
        x_star,
        multipliers,
        kkt_residual: best_residual,
        status,
        newton_steps: steps,
    })
}

/// Damped Newton centering for a decreasing sequence of barrier weights.
/// Returns the last weight used and the number of Newton steps taken.
fn follow_path<O: ConcaveObjective>(
    barrier: &Barrier<'_, O>,
    x: &mut DVector<f64>,
    options: &BarrierOptions,
) -> (f64, usize) {
    let unconstrained = barrier.rows.is_empty();
    let mut mu = if unconstrained {
        0.0
    } else {
        options.mu_initial
    };
    let mut steps = 0;
    loop {
        let final_stage = unconstrained || mu <= options.mu_final * (1.0 + 1e-9);
        loop {
            let slacks = barrier.slacks(x);
            let g = barrier.gradient(x, mu, &slacks);
            if final_stage && g.amax() <= 0.1 * options.tol {
                return (mu, steps);
            }
            if steps >= options.max_newton_steps {
                return (mu, steps);
            }
            let h = barrier.hessian(x, mu, &slacks);
            let Some(d) = newton_direction(&h, &g) else {
                log::debug!("Newton system could not be factored");
                return (mu, steps);
            };
            let decrement = g.dot(&d);
            let stop = if final_stage {
                NEGLIGIBLE_DECREMENT * NEGLIGIBLE_DECREMENT
            } else {
                CENTERING_DECREMENT
            };
            if decrement / 2.0 <= stop {
                break;
            }
            steps += 1;

            let Some(current) = barrier.value(x, mu) else {
                return (mu, steps);
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                let trial = &*x + &d * t;
                if let Some(v) = barrier.value(&trial, mu) {
                    if decrement < NEGLIGIBLE_DECREMENT
                        || v >= current + options.armijo * t * decrement
                    {
                        *x = trial;
                        accepted = true;
                        break;
                    }
                }
                t *= options.backtrack;
            }
            if !accepted {
                // no progress possible at this precision
                break;
            }
        }
        if final_stage {
            return (mu, steps);
        }
        mu = (mu * options.mu_factor).max(options.mu_final);
    }
}

/// Stationarity ∞-norm of the Lagrangian plus the largest `|λ_i · slack_i|`.
pub fn kkt_residual<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    x: &[f64],
    multipliers: &[f64],
) -> f64 {
    let mut stationarity = program.objective.gradient(x);
    let mut complementarity: f64 = 0.0;
    for (c, m) in program.constraints.iter().zip(multipliers) {
        for (s, a) in stationarity.iter_mut().zip(&c.a) {
            *s += m * a;
        }
        complementarity = complementarity.max((m * c.slack(x)).abs());
    }
    stationarity.amax() + complementarity
}

struct Polished {
    x: Vec<f64>,
    multipliers: Vec<f64>,
    steps: usize,
}

const POLISH_STEPS: usize = 30;

/// Solves the KKT system with the binding constraints as equalities,
/// dropping any constraint whose multiplier comes out negative.
fn polish<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    normalized: &Normalized,
    x_path: &DVector<f64>,
    path_multipliers: &[f64],
) -> Option<Polished> {
    let n = x_path.len();
    let slacks: Vec<f64> = normalized
        .rows
        .iter()
        .map(|(a, b)| a.dot(x_path) - b)
        .collect();
    // binding when the multiplier dominates the slack
    let mut active: Vec<usize> = (0..normalized.rows.len())
        .filter(|&i| path_multipliers[i] > slacks[i])
        .collect();
    let mut steps = 0;
    for _attempt in 0..=normalized.rows.len() {
        if active.len() > n {
            return None;
        }
        let k = active.len();
        let mut x = x_path.clone();
        let mut lambda = DVector::zeros(k);
        for _ in 0..POLISH_STEPS {
            let g = program.objective.gradient(x.as_slice());
            let h = program.objective.hessian(x.as_slice());
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-&g));
            for (row, &i) in active.iter().enumerate() {
                let (a, b) = &normalized.rows[i];
                for col in 0..n {
                    kkt[(n + row, col)] = a[col];
                    kkt[(col, n + row)] = a[col];
                }
                rhs[n + row] = b - a.dot(&x);
            }
            let sol = kkt.full_piv_lu().solve(&rhs)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let d = sol.rows(0, n).into_owned();
            lambda = sol.rows(n, k).into_owned();
            x += &d;
            steps += 1;
            if d.amax() <= 1e-15 * (1.0 + x.amax()) {
                break;
            }
        }
        if !program.objective.value(x.as_slice()).is_finite() {
            return None;
        }
        let scale = 1.0 + program.objective.gradient(x.as_slice()).amax();
        if let Some((pos, _)) = lambda
            .iter()
            .enumerate()
            .filter(|(_, l)| **l < -1e-12 * scale)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            active.remove(pos);
            continue;
        }
        let mut multipliers = vec![0.0; program.constraints.len()];
        for (&i, l) in active.iter().zip(lambda.iter()) {
            let (index, norm) = normalized.origin[i];
            multipliers[index] = l.max(0.0) / norm;
        }
        return Some(Polished {
            x: x.as_slice().to_vec(),
            multipliers,
            steps,
        });
    }
    None
}

/// Phase I followed by [`maximize`]. An infeasible program yields status
/// `Infeasible` with the phase-I point; its residual is infinite.
pub fn solve<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    options: &BarrierOptions,
) -> Result<SolveReport> {
    match find_feasible(program) {
        Feasibility::Feasible(x0) => maximize(program, &x0, options),
        Feasibility::Infeasible { .. } => {
            let x = vec![0.0; program.dim()];
            Ok(SolveReport {
                value: program.objective.value(&x),
                x_star: x,
                multipliers: vec![0.0; program.constraints.len()],
                kkt_residual: f64::INFINITY,
                status: SolveStatus::Infeasible,
                newton_steps: 0,
            })
        }
    }
}
