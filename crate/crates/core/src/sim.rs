//! Closed-loop radar/jammer simulation over three timescales.
//!
//! On the intermediate timescale the radar alternates between solving the
//! contract problem at the current covariance summary and re-solving the
//! Riccati equation at the expected SNR that contract produces. On the slow
//! timescale the target maneuvers, scaling the process noise as `Q_t = t·Q₀`.
//! The covariance summary carries over between maneuver blocks.
//!
//! Each record `(t, n)` holds the contract chosen at step `n` together with
//! the covariance it leads to; utilities in the record are evaluated at that
//! resulting covariance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{
    expected_snr, jammer_utility, radar_utility, weighted_covariance, CovarianceSummary,
    JammingChannel, PapInstance, UtilityParams,
};
use crate::pap::{sweep_levels, PapSolution, SolveMode};
use crate::riccati::{AreSolution, TrackingModel};

pub const DEFAULT_SLOW_HORIZON: usize = 4;
pub const DEFAULT_INTERMEDIATE_PER_SLOW: usize = 8;
pub const DEFAULT_INITIAL_SIGMA: f64 = 1.0;

/// One tracked target and its weight in the covariance summary.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTarget {
    pub model: TrackingModel,
    pub weight: f64,
}

/// Which contract drives the trajectory when the jammer's channel model differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// The radar designs incentives against the true channel.
    RadarModel,
    /// The radar designs incentives against the jammer's estimate.
    JammerModel,
}

impl Scenario {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Scenario::RadarModel),
            2 => Ok(Scenario::JammerModel),
            other => Err(invalid(format!("scenario must be 1 or 2, got {other}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Scenario::RadarModel => 1,
            Scenario::JammerModel => 2,
        }
    }
}

/// The jammer's estimate `P̂` of the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub p_hat: JammingChannel,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Targets whose covariance summaries are combined by weight.
    pub targets: Vec<WeightedTarget>,
    pub channel: JammingChannel,
    pub params: UtilityParams,
    pub slow_horizon: usize,
    pub intermediate_per_slow: usize,
    pub initial_sigma: CovarianceSummary,
    pub strategy_mode: SolveMode,
    pub mismatch: Option<Mismatch>,
}

impl SimulationConfig {
    /// Single-target configuration with default horizons.
    pub fn new(model: TrackingModel, channel: JammingChannel, params: UtilityParams) -> Self {
        Self {
            targets: vec![WeightedTarget { model, weight: 1.0 }],
            channel,
            params,
            slow_horizon: DEFAULT_SLOW_HORIZON,
            intermediate_per_slow: DEFAULT_INTERMEDIATE_PER_SLOW,
            initial_sigma: CovarianceSummary::new(DEFAULT_INITIAL_SIGMA)
                .expect("default summary is positive"),
            strategy_mode: SolveMode::Full,
            mismatch: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slow_horizon == 0 || self.intermediate_per_slow == 0 {
            return Err(invalid("simulation horizons must be at least 1"));
        }
        if self.targets.is_empty() {
            return Err(invalid("at least one target model is required"));
        }
        let weights: Vec<f64> = self.targets.iter().map(|t| t.weight).collect();
        let ones = vec![CovarianceSummary::new(1.0)?; weights.len()];
        weighted_covariance(&ones, &weights)?;
        if let Some(m) = &self.mismatch {
            if m.p_hat.grid() != self.channel.grid() {
                return Err(invalid("P_hat must use the same jamming grid as P"));
            }
        }
        Ok(())
    }

    /// The channel the driving contract's incentive constraints are built on.
    fn driving_ic_channel(&self) -> &JammingChannel {
        match &self.mismatch {
            Some(Mismatch {
                p_hat,
                scenario: Scenario::JammerModel,
            }) => p_hat,
            _ => &self.channel,
        }
    }

    pub fn record_count(&self) -> usize {
        self.slow_horizon * self.intermediate_per_slow
    }
}

/// Result of one intermediate-timescale step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub solution: PapSolution,
    pub snr_bar: f64,
    /// One Riccati solution per target.
    pub are: Vec<AreSolution>,
    pub next_sigma: CovarianceSummary,
}

fn solve_contract(
    sigma: CovarianceSummary,
    config: &SimulationConfig,
    ic_channel: &JammingChannel,
) -> Result<PapSolution> {
    let base =
        PapInstance::new(&config.channel, config.params, sigma, 0)?.with_ic_channel(ic_channel)?;
    Ok(sweep_levels(&base, config.strategy_mode)?.into_best())
}

fn track(
    solution: &PapSolution,
    config: &SimulationConfig,
    maneuver: f64,
) -> Result<(f64, Vec<AreSolution>, CovarianceSummary)> {
    let snr_bar = expected_snr(&solution.pi_star, solution.j_star_index, &config.channel)?;
    let mut are = Vec::with_capacity(config.targets.len());
    for target in &config.targets {
        let q = target.model.process_noise() * maneuver;
        are.push(target.model.with_process_noise(q)?.solve_are(snr_bar)?);
    }
    let summaries: Vec<CovarianceSummary> = are.iter().map(|a| a.lambda_max).collect();
    let weights: Vec<f64> = config.targets.iter().map(|t| t.weight).collect();
    let next = weighted_covariance(&summaries, &weights)?;
    Ok((snr_bar, are, next))
}

/// Solves the contract at `sigma`, computes the resulting expected SNR, and
/// re-solves the Riccati equation with process noise `maneuver·Q₀`.
pub fn step(
    sigma: CovarianceSummary,
    config: &SimulationConfig,
    maneuver: f64,
) -> Result<StepOutcome> {
    let solution = solve_contract(sigma, config, config.driving_ic_channel())?;
    let (snr_bar, are, next_sigma) = track(&solution, config, maneuver)?;
    Ok(StepOutcome {
        solution,
        snr_bar,
        are,
        next_sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    /// Slow-timescale index, from 1.
    pub t: usize,
    /// Intermediate-timescale index within the block, from 1.
    pub n: usize,
    /// Covariance summary the contract was designed for.
    pub sigma_in: f64,
    /// Covariance summary the contract leads to.
    pub lambda_max: f64,
    pub snr_bar: f64,
    pub j_star_index: usize,
    pub j_star: f64,
    pub x_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub radar_utility: f64,
    pub jammer_utility: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub records: Vec<SimulationRecord>,
}

impl SimulationTrace {
    /// Records of slow block `t` (1-based).
    pub fn block(&self, t: usize) -> impl Iterator<Item = &SimulationRecord> {
        self.records.iter().filter(move |r| r.t == t)
    }

    pub fn blocks(&self) -> usize {
        self.records.iter().map(|r| r.t).max().unwrap_or(0)
    }
}

fn utilities_at(
    solution: &PapSolution,
    sigma: CovarianceSummary,
    config: &SimulationConfig,
    ic_channel: &JammingChannel,
) -> Result<(f64, f64)> {
    let instance = PapInstance::new(&config.channel, config.params, sigma, solution.j_star_index)?
        .with_ic_channel(ic_channel)?;
    Ok((
        radar_utility(&solution.x_star, solution.j_star_index, &instance)?,
        jammer_utility(&solution.x_star, solution.j_star_index, &instance)?,
    ))
}

fn record(
    t: usize,
    n: usize,
    sigma_in: CovarianceSummary,
    outcome: &StepOutcome,
    config: &SimulationConfig,
) -> Result<SimulationRecord> {
    let s = &outcome.solution;
    let (radar, jammer) = utilities_at(s, outcome.next_sigma, config, config.driving_ic_channel())?;
    Ok(SimulationRecord {
        t,
        n,
        sigma_in: sigma_in.value(),
        lambda_max: outcome.next_sigma.value(),
        snr_bar: outcome.snr_bar,
        j_star_index: s.j_star_index,
        j_star: s.j_star,
        x_star: s.x_star.as_slice().to_vec(),
        pi_star: s.pi_star.as_slice().to_vec(),
        radar_utility: radar,
        jammer_utility: jammer,
        kkt_residual: s.kkt_residual,
    })
}

/// Runs `slow_horizon × intermediate_per_slow` steps.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let mut sigma = config.initial_sigma;
    let mut records = Vec::with_capacity(config.record_count());
    for t in 1..=config.slow_horizon {
        for n in 1..=config.intermediate_per_slow {
            let outcome = step(sigma, config, t as f64)?;
            records.push(record(t, n, sigma, &outcome, config)?);
            sigma = outcome.next_sigma;
        }
    }
    Ok(SimulationTrace { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRecord {
    /// The step as driven by the scenario's contract.
    pub nominal: SimulationRecord,
    /// Contract designed with both measures equal to `P`.
    pub radar_model_j_star: f64,
    /// Contract designed with incentives under `P̂`.
    pub jammer_model_j_star: f64,
    /// `φ_P(π_PP̂, J_PP̂) − φ_P(π_PP, J_PP)`.
    pub radar_degradation: f64,
    /// `ψ_P(π_PP, J_PP) − ψ_P̂(π_PP̂, J_PP̂)`.
    pub jammer_degradation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchTrace {
    pub records: Vec<MismatchRecord>,
}

/// Runs the closed loop while solving, at every step, both the contract with
/// incentives under `P` and the one with incentives under `P̂`. The scenario
/// selects which of the two drives the trajectory; degradations compare the
/// two at the resulting covariance.
pub fn run_mismatch(config: &SimulationConfig) -> Result<MismatchTrace> {
    config.validate()?;
    let mismatch = config
        .mismatch
        .as_ref()
        .ok_or_else(|| invalid("mismatch run needs P_hat"))?;
    let p = &config.channel;
    let p_hat = &mismatch.p_hat;
    let mut sigma = config.initial_sigma;
    let mut records = Vec::with_capacity(config.record_count());
    for t in 1..=config.slow_horizon {
        for n in 1..=config.intermediate_per_slow {
            let pp = solve_contract(sigma, config, p)?;
            let pp_hat = solve_contract(sigma, config, p_hat)?;
            let driving = match mismatch.scenario {
                Scenario::RadarModel => pp.clone(),
                Scenario::JammerModel => pp_hat.clone(),
            };
            let (snr_bar, are, next_sigma) = track(&driving, config, t as f64)?;
            let outcome = StepOutcome {
                solution: driving,
                snr_bar,
                are,
                next_sigma,
            };
            let nominal = record(t, n, sigma, &outcome, config)?;
            let (radar_pp, jammer_pp) = utilities_at(&pp, next_sigma, config, p)?;
            let (radar_pp_hat, jammer_pp_hat) = utilities_at(&pp_hat, next_sigma, config, p_hat)?;
            records.push(MismatchRecord {
                nominal,
                radar_model_j_star: pp.j_star,
                jammer_model_j_star: pp_hat.j_star,
                radar_degradation: radar_pp_hat - radar_pp,
                jammer_degradation: jammer_pp - jammer_pp_hat,
            });
            sigma = next_sigma;
        }
    }
    Ok(MismatchTrace { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammingComparison {
    pub first: SimulationTrace,
    pub second: SimulationTrace,
    /// Second radar utility minus first, per record.
    pub utility_gap: Vec<f64>,
}

/// Runs two configurations (typically barrage, then deception) side by side.
pub fn compare_jamming(
    first: &SimulationConfig,
    second: &SimulationConfig,
) -> Result<JammingComparison> {
    if first.record_count() != second.record_count() {
        return Err(invalid(
            "compared configurations must have the same horizons",
        ));
    }
    let a = run_simulation(first)?;
    let b = run_simulation(second)?;
    let utility_gap = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| y.radar_utility - x.radar_utility)
        .collect();
    Ok(JammingComparison {
        first: a,
        second: b,
        utility_gap,
    })
}
