//! The radar's contract problem: pick a log-strategy that maximizes the
//! radar's expected utility while making a chosen jamming level the jammer's
//! best response.
//!
//! In log space the objective is concave and each incentive constraint
//! ("the jammer gains nothing by switching to level J̄") is affine, so every
//! variant here is a [`ConcaveProgram`] handed to the barrier solver. The
//! module also houses the structural checks on the channel (TP2, convex tail
//! probabilities) under which the relaxed and full problems coincide and the
//! optimal strategy is monotone.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EccmError, Result};
use crate::model::{
    jammer_best_response, jammer_utility, radar_utility, CovarianceSummary, EccmStrategy,
    JammingChannel, LogStrategy, PapInstance, UtilityParams,
};
use crate::optimizer::{
    find_feasible, maximize, AffineConstraint, BarrierOptions, ConcaveObjective, ConcaveProgram,
    Feasibility, SolveStatus,
};

/// Tolerance of the TP2 and tail-convexity checks.
pub const STRUCTURE_TOLERANCE: f64 = 1e-12;
/// Relative tolerance when two levels give the radar the same value.
pub const LEVEL_TIE_TOLERANCE: f64 = 1e-9;
/// How far below the previous entry a "non-decreasing" strategy may dip.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;
/// Weight given to observations the target level never produces, so the
/// strategy there stays bounded instead of drifting along a flat direction.
const LIKELIHOOD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    /// Incentive constraints against every other level.
    #[default]
    Full,
    /// Incentive constraints against higher levels only.
    Relaxed,
    /// Full constraints, strategy restricted to `x_m = c3·j_m + c4`, `c3 ≥ 0`.
    Affine,
}

impl SolveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Full => "full",
            SolveMode::Relaxed => "relaxed",
            SolveMode::Affine => "affine",
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveMode {
    type Err = EccmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SolveMode::Full),
            "relaxed" => Ok(SolveMode::Relaxed),
            "affine" => Ok(SolveMode::Affine),
            other => Err(invalid(format!(
                "unknown solve mode {other:?} (expected full, relaxed or affine)"
            ))),
        }
    }
}

/// "The jammer prefers the target level to `competitor`", as `coefficients·x ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct IcConstraint {
    pub competitor: usize,
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

impl IcConstraint {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(x)
            .map(|(a, x)| a * x)
            .sum::<f64>()
            - self.rhs
    }

    fn to_affine(&self) -> AffineConstraint {
        AffineConstraint::new(self.coefficients.clone(), self.rhs)
    }
}

/// Incentive constraints for the instance's target level `J`, one per
/// competitor `J̄` (every other level, or only higher ones when `relaxed`):
///
/// ```text
/// (c2/σ)·Σ_m (P[J̄][m] − P[J][m])·x_m ≥ (c2/σ)·Σ_m (P[J̄][m] − P[J][m])·ln j_m + J² − J̄²
/// ```
///
/// `P` here is the jammer's channel model.
pub fn build_ic_constraints(instance: &PapInstance<'_>, relaxed: bool) -> Vec<IcConstraint> {
    let m = instance.size();
    let target = instance.target;
    let weight = instance.jammer_reward_weight();
    let grid = instance.ic_channel.grid();
    let log_levels = grid.log_levels();
    let j = grid.level(target);
    let own = instance.ic_channel.row(target);
    let first = if relaxed { target + 1 } else { 0 };
    (first..m)
        .filter(|&k| k != target)
        .map(|k| {
            let other = instance.ic_channel.row(k);
            let coefficients: Vec<f64> = other
                .iter()
                .zip(own)
                .map(|(p_other, p_own)| weight * (p_other - p_own))
                .collect();
            let jk = grid.level(k);
            let rhs = coefficients
                .iter()
                .zip(&log_levels)
                .map(|(a, l)| a * l)
                .sum::<f64>()
                + j * j
                - jk * jk;
            IcConstraint {
                competitor: k,
                coefficients,
                rhs,
            }
        })
        .collect()
}

/// Radar utility at a fixed true level, as a function of the log-strategy:
/// `Σ_m p_m (w (x_m − ln j_m) − e^{2 x_m})` with `w = c1·σ`.
#[derive(Debug, Clone)]
pub struct RadarObjective {
    probs: Vec<f64>,
    weight: f64,
    log_levels: Vec<f64>,
}

impl RadarObjective {
    pub fn new(instance: &PapInstance<'_>) -> Self {
        Self {
            probs: instance
                .channel
                .row(instance.target)
                .iter()
                .map(|p| p.max(LIKELIHOOD_FLOOR))
                .collect(),
            weight: instance.radar_reward_weight(),
            log_levels: instance.channel.grid().log_levels(),
        }
    }

    /// Per-coordinate derivative `p_m (w − 2 e^{2 x_m})`.
    fn partials(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let w = self.weight;
        self.probs
            .iter()
            .zip(x.to_vec())
            .map(move |(p, x)| p * (w - 2.0 * (2.0 * x).exp()))
    }

    fn curvatures(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        self.probs
            .iter()
            .zip(x.to_vec())
            .map(|(p, x)| -4.0 * p * (2.0 * x).exp())
    }
}

impl ConcaveObjective for RadarObjective {
    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.probs
            .iter()
            .zip(x)
            .zip(&self.log_levels)
            .map(|((p, x), l)| p * (self.weight * (x - l) - (2.0 * x).exp()))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), self.partials(x))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(x.len(), self.curvatures(x)))
    }
}

/// The radar objective under `x_m = c3·j_m + c4`, over `(c3, c4)`.
#[derive(Debug, Clone)]
struct AffineObjective {
    inner: RadarObjective,
    levels: Vec<f64>,
}

impl AffineObjective {
    fn expand(&self, y: &[f64]) -> Vec<f64> {
        self.levels.iter().map(|j| y[0] * j + y[1]).collect()
    }
}

impl ConcaveObjective for AffineObjective {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(&self.expand(y))
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let x = self.expand(y);
        let mut g = DVector::zeros(2);
        for (d, j) in self.inner.partials(&x).zip(&self.levels) {
            g[0] += d * j;
            g[1] += d;
        }
        g
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let x = self.expand(y);
        let mut h = DMatrix::zeros(2, 2);
        for (c, j) in self.inner.curvatures(&x).zip(&self.levels) {
            h[(0, 0)] += c * j * j;
            h[(0, 1)] += c * j;
            h[(1, 1)] += c;
        }
        h[(1, 0)] = h[(0, 1)];
        h
    }
}

/// `x_m = c3·j_m + c4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCoefficients {
    pub c3: f64,
    pub c4: f64,
}

/// Optimal contract for one incentivized level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PapSolution {
    pub mode: SolveMode,
    pub x_star: LogStrategy,
    pub pi_star: EccmStrategy,
    /// Incentivized level (0-based grid index).
    pub j_star_index: usize,
    /// Incentivized jamming power.
    pub j_star: f64,
    pub radar_value: f64,
    pub jammer_value: f64,
    /// Levels the incentive constraints compare against, aligned with `multipliers`.
    pub competitors: Vec<usize>,
    pub multipliers: Vec<f64>,
    /// Multiplier of `c3 ≥ 0` in affine mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineCoefficients>,
    /// KKT residual reported by the optimizer, in its own variables.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

fn finish(
    instance: &PapInstance<'_>,
    mode: SolveMode,
    x: Vec<f64>,
    ic: &[IcConstraint],
    multipliers: Vec<f64>,
    kkt_residual: f64,
    newton_steps: usize,
) -> Result<PapSolution> {
    let x_star = LogStrategy::new(x)?;
    let pi_star = x_star.to_strategy();
    let target = instance.target;
    Ok(PapSolution {
        mode,
        radar_value: radar_utility(&x_star, target, instance)?,
        jammer_value: jammer_utility(&x_star, target, instance)?,
        x_star,
        pi_star,
        j_star_index: target,
        j_star: instance.target_level(),
        competitors: ic.iter().map(|c| c.competitor).collect(),
        multipliers,
        slope_multiplier: None,
        affine: None,
        kkt_residual,
        newton_steps,
    })
}

fn run_program<O: ConcaveObjective>(
    program: &ConcaveProgram<O>,
    level: usize,
) -> Result<crate::optimizer::SolveReport> {
    let x0 = match find_feasible(program) {
        Feasibility::Feasible(x0) => x0,
        Feasibility::Infeasible { min_slack } => {
            log::debug!("level {level} cannot be incentivized (best slack {min_slack:e})");
            return Err(EccmError::Infeasible { level });
        }
    };
    let report = maximize(program, &x0, &BarrierOptions::default())?;
    match report.status {
        SolveStatus::Optimal => Ok(report),
        _ => Err(EccmError::MaxIterations {
            newton_steps: report.newton_steps,
            kkt_residual: report.kkt_residual,
        }),
    }
}

fn check_incentives(solution: &PapSolution, instance: &PapInstance<'_>) -> Result<()> {
    let best = jammer_best_response(&solution.x_star, instance)?;
    if best.contains(&instance.target) {
        return Ok(());
    }
    let preferred = best[0];
    let excess = jammer_utility(&solution.x_star, preferred, instance)?
        - jammer_utility(&solution.x_star, instance.target, instance)?;
    Err(EccmError::IncentiveViolation {
        level: instance.target,
        preferred,
        excess,
    })
}

fn solve_with_constraints(instance: &PapInstance<'_>, mode: SolveMode) -> Result<PapSolution> {
    let ic = build_ic_constraints(instance, mode == SolveMode::Relaxed);
    let program = ConcaveProgram::new(
        RadarObjective::new(instance),
        ic.iter().map(IcConstraint::to_affine).collect(),
    )?;
    let report = run_program(&program, instance.target)?;
    finish(
        instance,
        mode,
        report.x_star,
        &ic,
        report.multipliers,
        report.kkt_residual,
        report.newton_steps,
    )
}

/// Best contract that makes the instance's target level a best response of
/// the jammer. The result is re-checked against every level by enumeration.
pub fn solve_fixed_j(instance: &PapInstance<'_>) -> Result<PapSolution> {
    let solution = solve_with_constraints(instance, SolveMode::Full)?;
    check_incentives(&solution, instance)?;
    Ok(solution)
}

/// Like [`solve_fixed_j`] but only deters deviations to higher levels. The
/// result is not re-checked against lower levels.
pub fn solve_relaxed(instance: &PapInstance<'_>) -> Result<PapSolution> {
    solve_with_constraints(instance, SolveMode::Relaxed)
}

/// Best contract among non-decreasing affine strategies `x_m = c3·j_m + c4`.
pub fn solve_affine(instance: &PapInstance<'_>) -> Result<PapSolution> {
    let levels = instance.channel.grid().levels().to_vec();
    let ic = build_ic_constraints(instance, false);
    let spread = levels[levels.len() - 1] - levels[0];
    if spread <= 0.0 {
        // Every affine strategy is constant; c3 has no effect.
        let solution = solve_constant(instance, &ic)?;
        check_incentives(&solution, instance)?;
        return Ok(solution);
    }
    // Σ_m a_m vanishes up to rounding since both rows sum to one; keep it anyway.
    let mut constraints: Vec<AffineConstraint> = ic
        .iter()
        .map(|c| {
            let slope = c.coefficients.iter().zip(&levels).map(|(a, j)| a * j).sum();
            let offset = c.coefficients.iter().sum();
            AffineConstraint::new(vec![slope, offset], c.rhs)
        })
        .collect();
    constraints.push(AffineConstraint::new(vec![1.0, 0.0], 0.0));
    let objective = AffineObjective {
        inner: RadarObjective::new(instance),
        levels: levels.clone(),
    };
    let program = ConcaveProgram::new(objective, constraints)?;
    let report = run_program(&program, instance.target)?;
    let (c3, c4) = (report.x_star[0], report.x_star[1]);
    let x = levels.iter().map(|j| c3 * j + c4).collect();
    let mut multipliers = report.multipliers;
    let slope_multiplier = multipliers.pop();
    let mut solution = finish(
        instance,
        SolveMode::Affine,
        x,
        &ic,
        multipliers,
        report.kkt_residual,
        report.newton_steps,
    )?;
    solution.slope_multiplier = slope_multiplier;
    solution.affine = Some(AffineCoefficients { c3, c4 });
    check_incentives(&solution, instance)?;
    Ok(solution)
}

/// Constant strategies `x_m = c4` only.
#[derive(Debug, Clone)]
struct ConstantObjective {
    inner: RadarObjective,
}

impl ConcaveObjective for ConstantObjective {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(&vec![y[0]; self.inner.dim()])
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let x = vec![y[0]; self.inner.dim()];
        DVector::from_element(1, self.inner.partials(&x).sum())
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let x = vec![y[0]; self.inner.dim()];
        DMatrix::from_element(1, 1, self.inner.curvatures(&x).sum())
    }
}

fn solve_constant(instance: &PapInstance<'_>, ic: &[IcConstraint]) -> Result<PapSolution> {
    let constraints = ic
        .iter()
        .map(|c| AffineConstraint::new(vec![c.coefficients.iter().sum()], c.rhs))
        .collect();
    let program = ConcaveProgram::new(
        ConstantObjective {
            inner: RadarObjective::new(instance),
        },
        constraints,
    )?;
    let report = run_program(&program, instance.target)?;
    let c4 = report.x_star[0];
    let mut solution = finish(
        instance,
        SolveMode::Affine,
        vec![c4; instance.size()],
        ic,
        report.multipliers,
        report.kkt_residual,
        report.newton_steps,
    )?;
    solution.slope_multiplier = Some(0.0);
    solution.affine = Some(AffineCoefficients { c3: 0.0, c4 });
    Ok(solution)
}

/// Solves one level in the given mode.
pub fn solve_level(instance: &PapInstance<'_>, mode: SolveMode) -> Result<PapSolution> {
    match mode {
        SolveMode::Full => solve_fixed_j(instance),
        SolveMode::Relaxed => solve_relaxed(instance),
        SolveMode::Affine => solve_affine(instance),
    }
}

/// What happened when one level was solved.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelOutcome {
    Solved(PapSolution),
    Infeasible,
    Failed(EccmError),
}

/// Per-level results and the level the radar should incentivize.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSweep {
    pub levels: Vec<LevelOutcome>,
    pub winner: usize,
}

impl LevelSweep {
    pub fn best(&self) -> &PapSolution {
        match &self.levels[self.winner] {
            LevelOutcome::Solved(s) => s,
            _ => unreachable!("winner is always a solved level"),
        }
    }

    pub fn into_best(mut self) -> PapSolution {
        match self.levels.swap_remove(self.winner) {
            LevelOutcome::Solved(s) => s,
            _ => unreachable!("winner is always a solved level"),
        }
    }
}

/// Solves every level of the grid (the instance's own target is ignored) and
/// picks the one with the highest radar value; near-ties go to the lowest
/// jamming power.
pub fn sweep_levels(base: &PapInstance<'_>, mode: SolveMode) -> Result<LevelSweep> {
    let mut levels = Vec::with_capacity(base.size());
    for target in 0..base.size() {
        let instance = base.with_target(target)?;
        levels.push(match solve_level(&instance, mode) {
            Ok(s) => LevelOutcome::Solved(s),
            Err(EccmError::Infeasible { .. }) => LevelOutcome::Infeasible,
            Err(e @ (EccmError::MaxIterations { .. } | EccmError::IncentiveViolation { .. })) => {
                log::warn!("level {target} ({mode}): {e}");
                LevelOutcome::Failed(e)
            }
            Err(e) => return Err(e),
        });
    }
    let values: Vec<Option<f64>> = levels
        .iter()
        .map(|o| match o {
            LevelOutcome::Solved(s) => Some(s.radar_value),
            _ => None,
        })
        .collect();
    let best = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(EccmError::NoIncentivizableLevel);
    }
    let tol = LEVEL_TIE_TOLERANCE * (1.0 + best.abs());
    let winner = values
        .iter()
        .position(|v| v.is_some_and(|v| v >= best - tol))
        .expect("the maximum is attained");
    Ok(LevelSweep { levels, winner })
}

/// Best contract over all incentivizable levels.
pub fn solve_pap(
    channel: &JammingChannel,
    params: UtilityParams,
    sigma: CovarianceSummary,
) -> Result<PapSolution> {
    let base = PapInstance::new(channel, params, sigma, 0)?;
    Ok(sweep_levels(&base, SolveMode::Full)?.into_best())
}

/// Violated TP2 minor: `P[i][m]·P[j][n] < P[i][n]·P[j][m]` with `i > j`, `m > n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tp2Witness {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub n: usize,
}

/// Non-convex tail probability `Π_tail` at consecutive levels `levels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailWitness {
    pub tail: usize,
    pub levels: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub tp2: bool,
    pub tail_convex: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp2_witness: Option<Tp2Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_witness: Option<TailWitness>,
}

impl StructureReport {
    pub fn passes(&self) -> bool {
        self.tp2 && self.tail_convex
    }
}

/// First violated 2×2 minor in lexicographic `(i, j, m, n)` order, if any.
pub fn check_tp2(channel: &JammingChannel) -> Option<Tp2Witness> {
    let size = channel.size();
    for i in 1..size {
        for j in 0..i {
            for m in 1..size {
                for n in 0..m {
                    let lhs = channel.prob(i, m) * channel.prob(j, n);
                    let rhs = channel.prob(i, n) * channel.prob(j, m);
                    if lhs < rhs - STRUCTURE_TOLERANCE {
                        return Some(Tp2Witness { i, j, m, n });
                    }
                }
            }
        }
    }
    None
}

/// Divided second difference of `f` over three grid points.
fn second_divided_difference(x: [f64; 3], f: [f64; 3]) -> Option<f64> {
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    if h0 <= 0.0 || h1 <= 0.0 {
        return None;
    }
    Some(((f[2] - f[1]) / h1 - (f[1] - f[0]) / h0) / (x[2] - x[0]))
}

/// First tail probability `Π_i(J) = P(R ≥ j_i | J)` that fails to be convex
/// in `J` over consecutive grid levels. Triples with repeated levels are skipped.
pub fn check_tail_convexity(channel: &JammingChannel) -> Option<TailWitness> {
    let size = channel.size();
    let levels = channel.grid().levels();
    for tail in 1..size {
        for a in 1..size.saturating_sub(1) {
            let idx = [a - 1, a, a + 1];
            let x = idx.map(|k| levels[k]);
            let f = idx.map(|k| channel.tail_probability(k, tail));
            if let Some(dd) = second_divided_difference(x, f) {
                if dd < -STRUCTURE_TOLERANCE {
                    return Some(TailWitness { tail, levels: idx });
                }
            }
        }
    }
    None
}

pub fn check_structure(channel: &JammingChannel) -> StructureReport {
    let tp2_witness = check_tp2(channel);
    let tail_witness = check_tail_convexity(channel);
    StructureReport {
        tp2: tp2_witness.is_none(),
        tail_convex: tail_witness.is_none(),
        tp2_witness,
        tail_witness,
    }
}

/// First-order optimality of a full or relaxed solution, checked in the
/// strategy's own coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max_m |e^{2x_m} − ½[c1σ + (c2/σ)·Σ_J̄ μ_J̄ (P[J̄][m] − P[J][m]) / P[J][m]]|`,
    /// with zero-probability observations checked before dividing.
    pub stationarity: f64,
    pub dual_feasibility: f64,
    pub primal_feasibility: f64,
    pub complementarity: f64,
    /// Largest of the four.
    pub residual: f64,
    /// `(J, m)` pairs with `P[J][m] = 0`.
    pub degenerate: Vec<(usize, usize)>,
}

/// Re-derives the optimality conditions of `solution` from the instance data.
pub fn verify_kkt(solution: &PapSolution, instance: &PapInstance<'_>) -> Result<KktReport> {
    if solution.mode == SolveMode::Affine {
        return Err(invalid(
            "affine solutions are optimal in (c3, c4), not in the full strategy space",
        ));
    }
    if solution.j_star_index != instance.target {
        return Err(invalid(
            "solution was computed for a different target level",
        ));
    }
    let ic = build_ic_constraints(instance, solution.mode == SolveMode::Relaxed);
    if ic.len() != solution.multipliers.len()
        || ic
            .iter()
            .zip(&solution.competitors)
            .any(|(c, k)| c.competitor != *k)
    {
        return Err(invalid(
            "solution multipliers do not match the instance's constraints",
        ));
    }
    let x = solution.x_star.as_slice();
    let target = instance.target;
    let own = instance.channel.row(target);
    let reward = instance.radar_reward_weight();
    let mut stationarity: f64 = 0.0;
    let mut degenerate = Vec::new();
    for (m, (&p, &xm)) in own.iter().zip(x).enumerate() {
        // Σ_J̄ μ_J̄ (c2/σ)(P[J̄][m] − P[J][m]) is exactly Σ μ·coefficient
        let pull: f64 = ic
            .iter()
            .zip(&solution.multipliers)
            .map(|(c, mu)| mu * c.coefficients[m])
            .sum();
        let power = (2.0 * xm).exp();
        let gap = if p > 0.0 {
            power - 0.5 * (reward + pull / p)
        } else {
            degenerate.push((target, m));
            // 2 P e^{2x} = c1σ P + pull, with P = 0
            pull
        };
        stationarity = stationarity.max(gap.abs());
    }
    let dual_feasibility = solution
        .multipliers
        .iter()
        .map(|mu| (-mu).max(0.0))
        .fold(0.0, f64::max);
    let primal_feasibility = ic
        .iter()
        .map(|c| (-c.slack(x)).max(0.0))
        .fold(0.0, f64::max);
    let complementarity = ic
        .iter()
        .zip(&solution.multipliers)
        .map(|(c, mu)| (mu * c.slack(x)).abs())
        .fold(0.0, f64::max);
    let residual = stationarity
        .max(dual_feasibility)
        .max(primal_feasibility)
        .max(complementarity);
    Ok(KktReport {
        stationarity,
        dual_feasibility,
        primal_feasibility,
        complementarity,
        residual,
        degenerate,
    })
}

/// Outcome of [`check_jammer_concavity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub concave: bool,
    /// Jammer utility at each level.
    pub utilities: Vec<f64>,
    /// Divided second differences over consecutive level triples.
    pub second_differences: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[usize; 3]>,
}

/// Jammer utility through the tail-sum identity
/// `ψ(J) = (c2/σ)(E[ln R | J] − x_1 − Σ_{m≥2} (x_m − x_{m−1}) Π_m(J)) − J²`.
pub fn jammer_utility_tail_form(x: &LogStrategy, level: usize, instance: &PapInstance<'_>) -> f64 {
    let channel = instance.ic_channel;
    let xs = x.as_slice();
    let expected_log = channel.conditional_mean(level, &channel.grid().log_levels());
    let increments: f64 = (1..xs.len())
        .map(|m| (xs[m] - xs[m - 1]) * channel.tail_probability(level, m))
        .sum();
    let j = channel.grid().level(level);
    instance.jammer_reward_weight() * (expected_log - xs[0] - increments) - j * j
}

/// Whether the jammer's utility under a non-decreasing strategy is concave
/// over the grid (discrete divided second differences).
pub fn check_jammer_concavity(
    x: &LogStrategy,
    instance: &PapInstance<'_>,
) -> Result<ConcavityReport> {
    if x.len() != instance.size() {
        return Err(invalid("strategy length does not match the grid"));
    }
    if !x.is_non_decreasing(MONOTONE_TOLERANCE) {
        return Err(invalid("strategy must be non-decreasing"));
    }
    let levels = instance.ic_channel.grid().levels();
    let utilities: Vec<f64> = (0..instance.size())
        .map(|j| jammer_utility_tail_form(x, j, instance))
        .collect();
    let scale = utilities.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let tol = STRUCTURE_TOLERANCE * (1.0 + scale);
    let mut second_differences = Vec::new();
    let mut witness = None;
    for a in 1..instance.size().saturating_sub(1) {
        let idx = [a - 1, a, a + 1];
        if let Some(dd) =
            second_divided_difference(idx.map(|k| levels[k]), idx.map(|k| utilities[k]))
        {
            if dd > tol && witness.is_none() {
                witness = Some(idx);
            }
            second_differences.push(dd);
        }
    }
    Ok(ConcavityReport {
        concave: witness.is_none(),
        utilities,
        second_differences,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JammingGrid;
    use crate::presets;

    fn sigma(v: f64) -> CovarianceSummary {
        CovarianceSummary::new(v).unwrap()
    }

    fn channel(levels: &[f64], rows: &[&[f64]]) -> JammingChannel {
        JammingChannel::new(
            JammingGrid::new(levels.to_vec()).unwrap(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_level_closed_form() {
        let ch = channel(&[1.0], &[&[1.0]]);
        let inst =
            PapInstance::new(&ch, UtilityParams::new(2.0, 1.0).unwrap(), sigma(1.0), 0).unwrap();
        assert!(build_ic_constraints(&inst, false).is_empty());
        let s = solve_fixed_j(&inst).unwrap();
        assert!(s.x_star.as_slice()[0].abs() < 1e-10);
        assert!((s.pi_star.as_slice()[0] - 1.0).abs() < 1e-10);
        assert!((s.radar_value + 1.0).abs() < 1e-12);
        let a = solve_affine(&inst).unwrap();
        assert!((a.radar_value - s.radar_value).abs() < 1e-12);
        let best = solve_pap(&ch, UtilityParams::new(2.0, 1.0).unwrap(), sigma(1.0)).unwrap();
        assert_eq!(best.j_star_index, 0);
    }

    #[test]
    fn uninformative_channel_only_incentivizes_cheapest_level() {
        let ch = channel(&[1.0, 2.0], &[&[0.5, 0.5], &[0.5, 0.5]]);
        let params = UtilityParams::new(10.0, 5.0).unwrap();
        let base = PapInstance::new(&ch, params, sigma(1.0), 0).unwrap();
        let s = solve_fixed_j(&base).unwrap();
        let expected = 0.5 * (10.0f64 / 2.0).ln();
        for x in s.x_star.as_slice() {
            assert!((x - expected).abs() < 1e-9);
        }
        assert_eq!(jammer_best_response(&s.x_star, &base).unwrap(), vec![0]);
        let top = base.with_target(1).unwrap();
        assert_eq!(solve_fixed_j(&top), Err(EccmError::Infeasible { level: 1 }));
        // relaxed: no higher competitor, unconstrained
        assert!(solve_relaxed(&top).is_ok());
        assert_eq!(solve_pap(&ch, params, sigma(1.0)).unwrap().j_star_index, 0);
    }

    #[test]
    fn reference_constraint_coefficients() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 0).unwrap();
        let ic = build_ic_constraints(&inst, false);
        assert_eq!(
            ic.iter().map(|c| c.competitor).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        // rows renormalized from sums 0.9999 and 1.0000
        let p1 = [0.3878, 0.3215, 0.1858, 0.1049].map(|p| p / 1.0);
        let p2 = [0.2980, 0.3617, 0.2146, 0.1256].map(|p| p / 0.9999);
        let coeff: Vec<f64> = (0..4).map(|m| 1e4 * (p2[m] - p1[m])).collect();
        let rhs = coeff
            .iter()
            .zip([1.0f64, 2.0, 3.0, 4.0])
            .map(|(a, j)| a * j.ln())
            .sum::<f64>()
            + 1.0
            - 4.0;
        for (got, want) in ic[0].coefficients.iter().zip(&coeff) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((ic[0].rhs - rhs).abs() < 1e-9);
        assert_eq!(build_ic_constraints(&inst, true).len(), 3);
        assert_eq!(
            build_ic_constraints(&inst.with_target(2).unwrap(), true).len(),
            1
        );
    }

    #[test]
    fn reference_relaxed_optima() {
        // optima of the reference instance at σ = 1, from an independent
        // dense interior-point solve
        let expected = [
            ([1.152178, 1.84269, 2.247137, 2.53419], 65.02028),
            ([1.450441, 1.519231, 2.222859, 2.502323], 61.257364),
            ([1.619302, 1.65728, 1.74146, 2.434077], 50.885387),
            ([1.956011, 1.956011, 1.956011, 1.956011], 37.15561),
        ];
        let ch = presets::reference_channel();
        for (level, (x, value)) in expected.iter().enumerate() {
            let inst =
                PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), level).unwrap();
            let relaxed = solve_relaxed(&inst).unwrap();
            let full = solve_fixed_j(&inst).unwrap();
            assert!(
                (relaxed.radar_value - value).abs() < 1e-5,
                "{level}: {}",
                relaxed.radar_value
            );
            assert!((full.radar_value - relaxed.radar_value).abs() < 1e-6);
            for (got, want) in relaxed.x_star.as_slice().iter().zip(x) {
                assert!((got - want).abs() < 1e-5, "{level}: {got} vs {want}");
            }
            assert!(relaxed.x_star.is_non_decreasing(1e-8));
            for c in build_ic_constraints(&inst, false) {
                assert!(c.slack(relaxed.x_star.as_slice()) >= -1e-9);
            }
            for s in [&relaxed, &full] {
                let kkt = verify_kkt(s, &inst).unwrap();
                assert!(kkt.residual <= 1e-6, "{kkt:?}");
                assert!(kkt.degenerate.is_empty());
            }
        }
        let best = solve_pap(&ch, presets::reference_utility(), sigma(1.0)).unwrap();
        assert_eq!(best.j_star_index, 0);
    }

    #[test]
    fn relaxed_top_level_is_unconstrained() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(2.0), 3).unwrap();
        let s = solve_relaxed(&inst).unwrap();
        let expected = 0.5 * (100.0f64 * 2.0 / 2.0).ln();
        for x in s.x_star.as_slice() {
            assert!((x - expected).abs() < 1e-9);
        }
        assert!(s.multipliers.is_empty());
    }

    #[test]
    fn affine_is_no_better_than_full() {
        let ch = presets::reference_channel();
        for level in 0..4 {
            let inst =
                PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), level).unwrap();
            let full = solve_fixed_j(&inst).unwrap();
            let affine = solve_affine(&inst).unwrap();
            let coeffs = affine.affine.unwrap();
            assert!(coeffs.c3 >= -1e-12);
            assert!(affine.radar_value <= full.radar_value + 1e-9);
            for (x, j) in affine.x_star.as_slice().iter().zip([1.0, 2.0, 3.0, 4.0]) {
                assert!((x - (coeffs.c3 * j + coeffs.c4)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_matches_full_when_optimum_is_constant() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 3).unwrap();
        let full = solve_fixed_j(&inst).unwrap();
        let affine = solve_affine(&inst).unwrap();
        assert!((affine.radar_value - full.radar_value).abs() < 1e-8);
        assert!(affine.affine.unwrap().c3.abs() < 1e-6);
    }

    #[test]
    fn tp2_examples() {
        assert!(check_tp2(&presets::reference_channel()).is_none());
        let grid = JammingGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(check_tp2(&JammingChannel::uniform(grid)).is_none());
        let anti = channel(&[1.0, 2.0], &[&[0.1, 0.9], &[0.9, 0.1]]);
        assert_eq!(
            check_tp2(&anti),
            Some(Tp2Witness {
                i: 1,
                j: 0,
                m: 1,
                n: 0
            })
        );
    }

    #[test]
    fn tail_convexity_examples() {
        assert!(check_tail_convexity(&presets::reference_channel()).is_none());
        assert!(check_tail_convexity(&channel(&[1.0, 2.0], &[&[0.1, 0.9], &[0.9, 0.1]])).is_none());
        let row: &[f64] = &[0.2, 0.3, 0.5];
        let same = channel(&[1.0, 2.0, 3.0], &[row; 3]);
        assert!(check_tail_convexity(&same).is_none());
        // Π_2 = (0.1, 0.8, 0.9): concave
        let bent = channel(
            &[1.0, 2.0, 3.0],
            &[&[0.9, 0.0, 0.1], &[0.1, 0.1, 0.8], &[0.05, 0.05, 0.9]],
        );
        assert_eq!(
            check_tail_convexity(&bent),
            Some(TailWitness {
                tail: 1,
                levels: [0, 1, 2]
            })
        );
        let report = check_structure(&bent);
        assert!(!report.passes());
        assert!(report.tail_witness.is_some());
    }

    #[test]
    fn kkt_sensitivity() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 3).unwrap();
        let s = solve_relaxed(&inst).unwrap();
        let base = verify_kkt(&s, &inst).unwrap().stationarity;
        let mut x = s.x_star.as_slice().to_vec();
        let x0 = x[1];
        x[1] += 1e-3;
        let mut moved = s.clone();
        moved.x_star = LogStrategy::new(x).unwrap();
        let grown = verify_kkt(&moved, &inst).unwrap().stationarity;
        let predicted = 2.0 * (2.0 * x0).exp() * 1e-3;
        assert!(((grown - base) - predicted).abs() / predicted < 0.01);
    }

    #[test]
    fn kkt_flags_zero_likelihoods() {
        let ch = channel(&[1.0, 2.0], &[&[1.0, 0.0], &[0.2, 0.8]]);
        let inst =
            PapInstance::new(&ch, UtilityParams::new(10.0, 5.0).unwrap(), sigma(1.0), 0).unwrap();
        let s = solve_fixed_j(&inst).unwrap();
        let kkt = verify_kkt(&s, &inst).unwrap();
        assert_eq!(kkt.degenerate, vec![(0, 1)]);
        assert!(kkt.residual <= 1e-6, "{kkt:?}");
    }

    #[test]
    fn tail_identity_matches_direct_utility() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.7), 0).unwrap();
        let x = LogStrategy::new(vec![0.3, -1.2, 2.5, 0.7]).unwrap();
        for level in 0..4 {
            let direct = jammer_utility(&x, level, &inst).unwrap();
            let tail = jammer_utility_tail_form(&x, level, &inst);
            assert!((direct - tail).abs() < 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn concavity_requires_monotone_strategy() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 0).unwrap();
        let x = LogStrategy::new(vec![1.0, 0.5, 2.0, 3.0]).unwrap();
        assert!(check_jammer_concavity(&x, &inst).is_err());
        let two = channel(&[1.0, 2.0], &[&[0.6, 0.4], &[0.3, 0.7]]);
        let inst2 = PapInstance::new(&two, presets::reference_utility(), sigma(1.0), 0).unwrap();
        let r = check_jammer_concavity(&LogStrategy::new(vec![0.0, 1.0]).unwrap(), &inst2).unwrap();
        assert!(r.concave && r.second_differences.is_empty());
    }

    #[test]
    fn concavity_of_constant_strategy_on_uninformative_channel() {
        // ψ(J) = const − J², strictly concave
        let grid = JammingGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ch = JammingChannel::uniform(grid);
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 0).unwrap();
        let r = check_jammer_concavity(&LogStrategy::constant(1.0, 4).unwrap(), &inst).unwrap();
        assert!(r.concave);
        for dd in r.second_differences {
            assert!((dd + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ic_invariant_under_common_scaling() {
        let ch = presets::reference_channel();
        let a =
            PapInstance::new(&ch, UtilityParams::new(100.0, 1e4).unwrap(), sigma(1.0), 1).unwrap();
        let b =
            PapInstance::new(&ch, UtilityParams::new(100.0, 2e4).unwrap(), sigma(2.0), 1).unwrap();
        assert_eq!(
            build_ic_constraints(&a, false),
            build_ic_constraints(&b, false)
        );
    }

    #[test]
    fn solve_mode_parsing() {
        for mode in [SolveMode::Full, SolveMode::Relaxed, SolveMode::Affine] {
            assert_eq!(mode.as_str().parse::<SolveMode>().unwrap(), mode);
        }
        assert!("convex".parse::<SolveMode>().is_err());
    }

    #[test]
    fn solution_round_trips_through_json() {
        let ch = presets::reference_channel();
        let inst = PapInstance::new(&ch, presets::reference_utility(), sigma(1.0), 1).unwrap();
        let s = solve_affine(&inst).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: PapSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
