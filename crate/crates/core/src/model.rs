//! Domain types shared by every module: the jamming grid and observation
//! channel, utility constants, covariance summary, radar strategies, and the
//! utility/SNR evaluations that define the contract problem.
//!
//! Strategies are handled in log space (`x_m = ln π_m`) because the radar's
//! objective is concave and the jammer's incentive constraints are affine
//! there.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on `Σ_n P[m][n] = 1`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Largest row-sum deviation [`JammingChannel::from_rounded_rows`] will
/// renormalize away. Published tables are printed to four decimals.
pub const ROUNDING_SLACK: f64 = 1e-3;

/// Relative tolerance used when deciding whether two jammer utilities tie.
pub const BEST_RESPONSE_TOLERANCE: f64 = 1e-9;

/// Finite, ordered set of jamming powers `j_1 ≤ … ≤ j_M` in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct JammingGrid {
    levels: Vec<f64>,
}

impl JammingGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("jamming grid needs at least one level"));
        }
        if let Some((i, v)) = levels
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(invalid(format!(
                "jamming level {i} must be a positive finite power, got {v}"
            )));
        }
        if let Some(i) = levels.windows(2).position(|w| w[1] < w[0]) {
            return Err(invalid(format!(
                "jamming levels must be non-decreasing (level {} = {} > level {} = {})",
                i,
                levels[i],
                i + 1,
                levels[i + 1]
            )));
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    pub fn log_levels(&self) -> Vec<f64> {
        self.levels.iter().map(|j| j.ln()).collect()
    }
}

impl TryFrom<Vec<f64>> for JammingGrid {
    type Error = crate::error::EccmError;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<JammingGrid> for Vec<f64> {
    fn from(grid: JammingGrid) -> Self {
        grid.levels
    }
}

/// Observation channel: `P[m][n] = Prob(radar observes j_n | jammer emits j_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JammingChannel {
    grid: JammingGrid,
    // row-major M×M
    probs: Vec<f64>,
}

impl JammingChannel {
    /// Builds a channel whose rows already sum to one within [`ROW_SUM_TOLERANCE`].
    pub fn new(grid: JammingGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let probs = Self::flatten(&grid, &rows)?;
        let m = grid.len();
        for (i, row) in probs.chunks(m).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(invalid(format!(
                    "row {i} of the channel matrix sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { grid, probs })
    }

    /// Builds a channel from rows printed with limited precision, dividing each
    /// row by its sum. Rows further than [`ROUNDING_SLACK`] from one are rejected.
    pub fn from_rounded_rows(grid: JammingGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut probs = Self::flatten(&grid, &rows)?;
        let m = grid.len();
        for (i, row) in probs.chunks_mut(m).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROUNDING_SLACK {
                return Err(invalid(format!(
                    "row {i} of the channel matrix sums to {sum}; too far from 1 to renormalize"
                )));
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                log::debug!("renormalizing channel row {i} (sum {sum})");
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self { grid, probs })
    }

    /// Channel that carries no information: every row is uniform.
    pub fn uniform(grid: JammingGrid) -> Self {
        let m = grid.len();
        Self {
            probs: vec![1.0 / m as f64; m * m],
            grid,
        }
    }

    fn flatten(grid: &JammingGrid, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = grid.len();
        if rows.len() != m {
            return Err(invalid(format!(
                "channel matrix has {} rows, grid has {m} levels",
                rows.len()
            )));
        }
        let mut probs = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(invalid(format!(
                    "channel row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (n, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!(
                        "channel entry P[{i}][{n}] = {p} is not a probability"
                    )));
                }
            }
            probs.extend_from_slice(row);
        }
        Ok(probs)
    }

    pub fn grid(&self) -> &JammingGrid {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn prob(&self, true_level: usize, observed: usize) -> f64 {
        self.probs[true_level * self.size() + observed]
    }

    pub fn row(&self, true_level: usize) -> &[f64] {
        let m = self.size();
        &self.probs[true_level * m..(true_level + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.size())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// `Π_i(J) = Prob(R ≥ j_i | J = j_level)`.
    pub fn tail_probability(&self, true_level: usize, from: usize) -> f64 {
        self.row(true_level)[from..].iter().sum()
    }

    /// `E[f(R) | J = j_level]` for a per-observation vector `values`.
    pub fn conditional_mean(&self, true_level: usize, values: &[f64]) -> f64 {
        self.row(true_level)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// Reward weights `c1` (radar) and `c2` (jammer).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub c1: f64,
    pub c2: f64,
}

impl UtilityParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1.is_finite() && c1 > 0.0) || !(c2.is_finite() && c2 > 0.0) {
            return Err(invalid(format!(
                "utility weights must be positive, got c1 = {c1}, c2 = {c2}"
            )));
        }
        Ok(Self { c1, c2 })
    }
}

/// Scalar summary `λmax(Σ)` of the tracking covariance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CovarianceSummary(f64);

impl CovarianceSummary {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid(format!(
                "covariance summary must be positive and finite, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CovarianceSummary {
    type Error = crate::error::EccmError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CovarianceSummary> for f64 {
    fn from(s: CovarianceSummary) -> f64 {
        s.0
    }
}

/// Radar strategy in log space: `x_m = ln(pulse power when observing j_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogStrategy(Vec<f64>);

impl LogStrategy {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("log-strategy entry {i} is not finite")));
        }
        Ok(Self(x))
    }

    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_strategy(&self) -> EccmStrategy {
        EccmStrategy(self.0.iter().map(|x| x.exp()).collect())
    }

    /// Shifts every entry by `c`, i.e. scales the pulse powers by `e^c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|x| x + c).collect())
    }

    pub fn is_non_decreasing(&self, tol: f64) -> bool {
        self.0.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

/// Pulse power per observed jamming level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccmStrategy(Vec<f64>);

impl EccmStrategy {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if let Some(i) = pi.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid(format!(
                "pulse power {i} must be positive and finite"
            )));
        }
        Ok(Self(pi))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_log(&self) -> LogStrategy {
        LogStrategy(self.0.iter().map(|p| p.ln()).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|p| p * alpha).collect())
    }
}

/// One contract problem: which jamming level the radar wants to induce, and
/// the data both utilities depend on.
///
/// `channel` is the measure the radar's objective is evaluated under.
/// `ic_channel` is the jammer's model of the channel, used in its utility and
/// hence in the incentive constraints. They coincide unless the jammer's
/// information is mismatched.
#[derive(Debug, Clone, Copy)]
pub struct PapInstance<'a> {
    pub channel: &'a JammingChannel,
    pub ic_channel: &'a JammingChannel,
    pub params: UtilityParams,
    pub sigma: CovarianceSummary,
    pub target: usize,
}

impl<'a> PapInstance<'a> {
    pub fn new(
        channel: &'a JammingChannel,
        params: UtilityParams,
        sigma: CovarianceSummary,
        target: usize,
    ) -> Result<Self> {
        if target >= channel.size() {
            return Err(invalid(format!(
                "target level {target} outside grid of {} levels",
                channel.size()
            )));
        }
        Ok(Self {
            channel,
            ic_channel: channel,
            params,
            sigma,
            target,
        })
    }

    /// Evaluates the jammer's utility (and the incentive constraints) under a
    /// different channel model.
    pub fn with_ic_channel(mut self, ic_channel: &'a JammingChannel) -> Result<Self> {
        if ic_channel.grid() != self.channel.grid() {
            return Err(invalid(
                "jammer's channel model must share the radar's jamming grid",
            ));
        }
        self.ic_channel = ic_channel;
        Ok(self)
    }

    pub fn with_target(mut self, target: usize) -> Result<Self> {
        if target >= self.channel.size() {
            return Err(invalid(format!("target level {target} outside grid")));
        }
        self.target = target;
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.channel.size()
    }

    pub fn target_level(&self) -> f64 {
        self.channel.grid().level(self.target)
    }

    /// `c1 · σ`, the weight on the radar's log-SNR reward.
    pub fn radar_reward_weight(&self) -> f64 {
        self.params.c1 * self.sigma.value()
    }

    /// `c2 / σ`, the weight on the jammer's reward.
    pub fn jammer_reward_weight(&self) -> f64 {
        self.params.c2 / self.sigma.value()
    }
}

fn check_index(j_index: usize, m: usize) -> Result<()> {
    if j_index >= m {
        return Err(invalid(format!(
            "jamming level {j_index} outside grid of {m} levels"
        )));
    }
    Ok(())
}

fn check_len(x: &LogStrategy, m: usize) -> Result<()> {
    if x.len() != m {
        return Err(invalid(format!(
            "strategy has {} entries, grid has {m}",
            x.len()
        )));
    }
    Ok(())
}

/// Radar utility at jamming level `j_index`:
/// `Σ_m P[j][m] · (c1·σ·(x_m − ln j_m) − e^{2 x_m})`.
pub fn radar_utility(x: &LogStrategy, j_index: usize, instance: &PapInstance<'_>) -> Result<f64> {
    let m = instance.size();
    check_index(j_index, m)?;
    check_len(x, m)?;
    let weight = instance.radar_reward_weight();
    let levels = instance.channel.grid().levels();
    Ok(instance
        .channel
        .row(j_index)
        .iter()
        .zip(x.as_slice())
        .zip(levels)
        .map(|((p, x), j)| p * (weight * (x - j.ln()) - (2.0 * x).exp()))
        .sum())
}

/// Jammer utility at jamming level `j_index`, under the jammer's channel model:
/// `(c2/σ)·Σ_m P[j][m]·(ln j_m − x_m) − j²`.
pub fn jammer_utility(x: &LogStrategy, j_index: usize, instance: &PapInstance<'_>) -> Result<f64> {
    let m = instance.size();
    check_index(j_index, m)?;
    check_len(x, m)?;
    let levels = instance.ic_channel.grid().levels();
    let expected_log_snr_loss: f64 = instance
        .ic_channel
        .row(j_index)
        .iter()
        .zip(x.as_slice())
        .zip(levels)
        .map(|((p, x), j)| p * (j.ln() - x))
        .sum();
    let j = levels[j_index];
    Ok(instance.jammer_reward_weight() * expected_log_snr_loss - j * j)
}

/// All levels maximizing the jammer's utility given the radar's strategy.
/// Utilities within [`BEST_RESPONSE_TOLERANCE`] (relative) of the maximum
/// count as ties; the returned indices are ascending.
pub fn jammer_best_response(x: &LogStrategy, instance: &PapInstance<'_>) -> Result<Vec<usize>> {
    let utilities = (0..instance.size())
        .map(|j| jammer_utility(x, j, instance))
        .collect::<Result<Vec<_>>>()?;
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = BEST_RESPONSE_TOLERANCE * (1.0 + best.abs());
    Ok(utilities
        .iter()
        .enumerate()
        .filter(|(_, u)| **u >= best - tol)
        .map(|(j, _)| j)
        .collect())
}

/// Expected SNR: mean pulse power over mean observed jamming power, both
/// conditioned on the true level.
pub fn expected_snr(pi: &EccmStrategy, j_index: usize, channel: &JammingChannel) -> Result<f64> {
    let m = channel.size();
    check_index(j_index, m)?;
    if pi.len() != m {
        return Err(invalid(format!(
            "strategy has {} entries, grid has {m}",
            pi.len()
        )));
    }
    let power = channel.conditional_mean(j_index, pi.as_slice());
    let jamming = channel.conditional_mean(j_index, channel.grid().levels());
    Ok(power / jamming)
}

/// Convex combination of per-target covariance summaries.
pub fn weighted_covariance(
    summaries: &[CovarianceSummary],
    weights: &[f64],
) -> Result<CovarianceSummary> {
    if summaries.is_empty() || summaries.len() != weights.len() {
        return Err(invalid(format!(
            "need one weight per target ({} summaries, {} weights)",
            summaries.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(invalid(format!(
            "target weights must be nonnegative, got {w}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(invalid(format!(
            "target weights sum to {total}, expected 1"
        )));
    }
    CovarianceSummary::new(
        summaries
            .iter()
            .zip(weights)
            .map(|(s, w)| s.value() * w)
            .sum(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(levels: &[f64]) -> JammingGrid {
        JammingGrid::new(levels.to_vec()).unwrap()
    }

    fn single_level(c1: f64, c2: f64) -> (JammingChannel, UtilityParams) {
        let ch = JammingChannel::new(grid(&[1.0]), vec![vec![1.0]]).unwrap();
        (ch, UtilityParams::new(c1, c2).unwrap())
    }

    fn table_rows() -> Vec<Vec<f64>> {
        vec![
            vec![0.3878, 0.3215, 0.1858, 0.1049],
            vec![0.2980, 0.3617, 0.2146, 0.1256],
            vec![0.2040, 0.2583, 0.3307, 0.2070],
            vec![0.1029, 0.1408, 0.2140, 0.5422],
        ]
    }

    fn table_channel() -> JammingChannel {
        JammingChannel::from_rounded_rows(grid(&[1.0, 2.0, 3.0, 4.0]), table_rows()).unwrap()
    }

    #[test]
    fn grid_rejects_bad_levels() {
        assert!(JammingGrid::new(vec![]).is_err());
        assert!(JammingGrid::new(vec![1.0, 0.0]).is_err());
        assert!(JammingGrid::new(vec![2.0, 1.0]).is_err());
        assert!(JammingGrid::new(vec![1.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn channel_row_sums() {
        let g = grid(&[1.0, 2.0, 3.0, 4.0]);
        // printed rows sum to 0.9999 for rows 2 and 4
        assert!(JammingChannel::new(g.clone(), table_rows()).is_err());
        let ch = JammingChannel::from_rounded_rows(g.clone(), table_rows()).unwrap();
        for row in ch.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOLERANCE);
        }
        let far = vec![vec![0.5, 0.4, 0.0, 0.0]; 4];
        assert!(JammingChannel::from_rounded_rows(g, far).is_err());
    }

    #[test]
    fn radar_utility_single_level() {
        let (ch, params) = single_level(2.0, 1.0);
        let inst = PapInstance::new(&ch, params, CovarianceSummary::new(1.0).unwrap(), 0).unwrap();
        let x = LogStrategy::new(vec![0.0]).unwrap();
        assert_eq!(radar_utility(&x, 0, &inst).unwrap(), -1.0);
    }

    #[test]
    fn radar_utility_collapses_for_constant_strategy() {
        let ch = JammingChannel::new(grid(&[1.0, 1.0]), vec![vec![0.5, 0.5]; 2]).unwrap();
        let params = UtilityParams::new(3.0, 1.0).unwrap();
        let inst = PapInstance::new(&ch, params, CovarianceSummary::new(1.0).unwrap(), 0).unwrap();
        for a in [-1.3, 0.0, 0.7] {
            let x = LogStrategy::constant(a, 2).unwrap();
            let expected = 3.0 * a - (2.0 * a).exp();
            assert!((radar_utility(&x, 0, &inst).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn radar_utility_table_instance_at_origin() {
        // Hand summation: Σ_m p_m (100·(0 − ln j_m) − 1) over the normalized first row.
        let ch = table_channel();
        let row: Vec<f64> = table_rows()[0].clone();
        let s: f64 = row.iter().sum();
        let expected: f64 = row
            .iter()
            .zip([1.0f64, 2.0, 3.0, 4.0])
            .map(|(p, j)| p / s * (-100.0 * j.ln() - 1.0))
            .sum();
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(100.0, 1e4).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        let x = LogStrategy::constant(0.0, 4).unwrap();
        let got = radar_utility(&x, 0, &inst).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // frozen from the hand summation above
        assert!((got - -58.239126026603).abs() < 1e-9, "{got}");
    }

    #[test]
    fn jammer_utility_examples() {
        let (ch, params) = single_level(1.0, 1.0);
        let inst = PapInstance::new(&ch, params, CovarianceSummary::new(1.0).unwrap(), 0).unwrap();
        let x = LogStrategy::new(vec![0.0]).unwrap();
        assert_eq!(jammer_utility(&x, 0, &inst).unwrap(), -1.0);
        assert!(jammer_utility(&x, 1, &inst).is_err());

        let ch = table_channel();
        let params = UtilityParams::new(100.0, 1e4).unwrap();
        let inst = PapInstance::new(&ch, params, CovarianceSummary::new(2.0).unwrap(), 0).unwrap();
        let xbar = 0.4;
        let x = LogStrategy::constant(xbar, 4).unwrap();
        for j in 0..4 {
            let e_log: f64 = ch
                .row(j)
                .iter()
                .zip([1.0f64, 2.0, 3.0, 4.0])
                .map(|(p, l)| p * l.ln())
                .sum();
            let lvl = (j + 1) as f64;
            let expected = 1e4 / 2.0 * (e_log - xbar) - lvl * lvl;
            assert!((jammer_utility(&x, j, &inst).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn jammer_utility_table_instance_second_level() {
        let ch = table_channel();
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(100.0, 1e4).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        let x = LogStrategy::constant(0.0, 4).unwrap();
        // 1e4·(0.3617·ln2 + 0.2146·ln3 + 0.1256·ln4)/0.9999 − 4, summed by hand
        let got = jammer_utility(&x, 1, &inst).unwrap();
        assert!((got - 6602.5816993036).abs() < 1e-8, "{got}");
    }

    #[test]
    fn best_response_examples() {
        let (ch, params) = single_level(1.0, 1.0);
        let inst = PapInstance::new(&ch, params, CovarianceSummary::new(1.0).unwrap(), 0).unwrap();
        let x = LogStrategy::new(vec![3.0]).unwrap();
        assert_eq!(jammer_best_response(&x, &inst).unwrap(), vec![0]);

        let ch = JammingChannel::uniform(grid(&[1.0, 2.0, 3.0]));
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(1.0, 5.0).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        let x = LogStrategy::constant(0.3, 3).unwrap();
        assert_eq!(jammer_best_response(&x, &inst).unwrap(), vec![0]);
    }

    #[test]
    fn best_response_table_instance_by_enumeration() {
        // At x = 0 the jammer earns 1e4·E[ln R | J] − J²; the tail mass grows
        // with J so the top level wins by a wide margin.
        let ch = table_channel();
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(100.0, 1e4).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        let x = LogStrategy::constant(0.0, 4).unwrap();
        let utils: Vec<f64> = (0..4)
            .map(|j| jammer_utility(&x, j, &inst).unwrap())
            .collect();
        let argmax = (0..4).fold(0, |b, j| if utils[j] > utils[b] { j } else { b });
        assert_eq!(argmax, 3);
        assert_eq!(jammer_best_response(&x, &inst).unwrap(), vec![3]);
    }

    #[test]
    fn best_response_reports_ties() {
        let ch = JammingChannel::new(grid(&[1.0, 1.0]), vec![vec![0.5, 0.5]; 2]).unwrap();
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(1.0, 1.0).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        let x = LogStrategy::constant(0.0, 2).unwrap();
        assert_eq!(jammer_best_response(&x, &inst).unwrap(), vec![0, 1]);
    }

    #[test]
    fn expected_snr_examples() {
        let ch = JammingChannel::uniform(grid(&[1.0, 1.0, 1.0]));
        let pi = EccmStrategy::new(vec![2.5; 3]).unwrap();
        assert!((expected_snr(&pi, 1, &ch).unwrap() - 2.5).abs() < 1e-15);

        let ch = JammingChannel::new(grid(&[1.0, 3.0]), vec![vec![0.5, 0.5]; 2]).unwrap();
        let pi = EccmStrategy::new(vec![1.0, 3.0]).unwrap();
        assert!((expected_snr(&pi, 0, &ch).unwrap() - 1.0).abs() < 1e-15);

        let ch = table_channel();
        let pi = EccmStrategy::new(vec![1.0; 4]).unwrap();
        let row = &table_rows()[0];
        let mean_j: f64 = row
            .iter()
            .zip([1.0, 2.0, 3.0, 4.0])
            .map(|(p, j)| p * j)
            .sum();
        let got = expected_snr(&pi, 0, &ch).unwrap();
        assert!((got - 1.0 / mean_j).abs() < 1e-12);
        assert!((got - 0.498057575455723).abs() < 1e-12, "{got}");
    }

    #[test]
    fn weighted_covariance_examples() {
        let s = |v: f64| CovarianceSummary::new(v).unwrap();
        assert_eq!(weighted_covariance(&[s(2.7)], &[1.0]).unwrap().value(), 2.7);
        assert_eq!(
            weighted_covariance(&[s(2.0), s(4.0)], &[0.5, 0.5])
                .unwrap()
                .value(),
            3.0
        );
        let got = weighted_covariance(&[s(1.0), s(2.0), s(3.0)], &[0.2, 0.3, 0.5]).unwrap();
        assert!((got.value() - 2.3).abs() < 1e-12);
        assert!(weighted_covariance(&[s(1.0), s(2.0)], &[1.2, -0.2]).is_err());
        assert!(weighted_covariance(&[s(1.0), s(2.0)], &[0.5, 0.4]).is_err());
        assert!(weighted_covariance(&[s(1.0)], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn instance_rejects_mismatched_grids() {
        let ch = table_channel();
        let other = JammingChannel::uniform(grid(&[1.0, 2.0, 3.0, 5.0]));
        let inst = PapInstance::new(
            &ch,
            UtilityParams::new(1.0, 1.0).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            0,
        )
        .unwrap();
        assert!(inst.with_ic_channel(&other).is_err());
        assert!(PapInstance::new(
            &ch,
            UtilityParams::new(1.0, 1.0).unwrap(),
            CovarianceSummary::new(1.0).unwrap(),
            4
        )
        .is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn instance_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, f64, f64)> {
            (
                prop::collection::vec(prop::collection::vec(0.05f64..1.0, 4), 4),
                1.0f64..100.0,
                1.0f64..100.0,
                0.5f64..5.0,
            )
                .prop_map(|(raw, c1, c2, sigma)| {
                    let rows = raw
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            r.into_iter().map(|v| v / s).collect()
                        })
                        .collect();
                    (rows, c1, c2, sigma)
                })
        }

        fn build(rows: Vec<Vec<f64>>) -> JammingChannel {
            JammingChannel::from_rounded_rows(
                JammingGrid::new(vec![1.0, 1.5, 2.5, 4.0]).unwrap(),
                rows,
            )
            .unwrap()
        }

        proptest! {
            #[test]
            fn radar_utility_is_concave(
                (rows, c1, c2, sigma) in instance_strategy(),
                x in prop::collection::vec(-3.0f64..3.0, 4),
                y in prop::collection::vec(-3.0f64..3.0, 4),
                lambda in 0.0f64..1.0,
                j in 0usize..4,
            ) {
                let ch = build(rows);
                let inst = PapInstance::new(&ch, UtilityParams::new(c1, c2).unwrap(), CovarianceSummary::new(sigma).unwrap(), 0).unwrap();
                let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let f = |v: &[f64]| radar_utility(&LogStrategy::new(v.to_vec()).unwrap(), j, &inst).unwrap();
                prop_assert!(f(&mix) >= lambda * f(&x) + (1.0 - lambda) * f(&y) - 1e-9);
            }

            #[test]
            fn jammer_utility_is_affine(
                (rows, c1, c2, sigma) in instance_strategy(),
                x in prop::collection::vec(-3.0f64..3.0, 4),
                y in prop::collection::vec(-3.0f64..3.0, 4),
                lambda in 0.0f64..1.0,
                j in 0usize..4,
            ) {
                let ch = build(rows);
                let inst = PapInstance::new(&ch, UtilityParams::new(c1, c2).unwrap(), CovarianceSummary::new(sigma).unwrap(), 0).unwrap();
                let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let f = |v: &[f64]| jammer_utility(&LogStrategy::new(v.to_vec()).unwrap(), j, &inst).unwrap();
                let lhs = f(&mix);
                let rhs = lambda * f(&x) + (1.0 - lambda) * f(&y);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            }

            #[test]
            fn best_response_ignores_constant_shift(
                (rows, c1, c2, sigma) in instance_strategy(),
                x in prop::collection::vec(-3.0f64..3.0, 4),
                c in -2.0f64..2.0,
            ) {
                let ch = build(rows);
                let inst = PapInstance::new(&ch, UtilityParams::new(c1, c2).unwrap(), CovarianceSummary::new(sigma).unwrap(), 0).unwrap();
                let x = LogStrategy::new(x).unwrap();
                let shifted = x.shifted(c).unwrap();
                prop_assert_eq!(
                    jammer_best_response(&x, &inst).unwrap(),
                    jammer_best_response(&shifted, &inst).unwrap()
                );
            }

            #[test]
            fn expected_snr_is_homogeneous(
                (rows, _c1, _c2, _sigma) in instance_strategy(),
                pi in prop::collection::vec(0.01f64..50.0, 4),
                alpha in 0.01f64..100.0,
                j in 0usize..4,
            ) {
                let ch = build(rows);
                let pi = EccmStrategy::new(pi).unwrap();
                let base = expected_snr(&pi, j, &ch).unwrap();
                let scaled = expected_snr(&pi.scaled(alpha).unwrap(), j, &ch).unwrap();
                prop_assert!((scaled - alpha * base).abs() <= 1e-12 * (1.0 + alpha * base));
            }
        }
    }
}
