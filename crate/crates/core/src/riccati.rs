//! Steady-state tracking covariance.
//!
//! Both jamming models reduce to the predicted-covariance Riccati recursion
//!
//! ```text
//! Σ ← A (Σ − Σ C' (C Σ C' + R)⁻¹ C Σ) A' + Q
//! ```
//!
//! iterated from `Σ₀ = Q` to its fixed point. Barrage jamming enters through
//! isotropic measurement noise `R = (1/SNR̄) I`. Deception jamming augments the
//! state with the jammer's interference process, whose driving noise has
//! covariance `(1/SNR̄) I`, and observes it without measurement noise (a small
//! `εI` keeps the innovation invertible).
//!
//! [`monte_carlo_covariance`] is an independent check: it simulates the
//! system, runs a Kalman filter on every trajectory, and measures the spread
//! of the one-step prediction error directly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, EccmError, Result};
use crate::model::CovarianceSummary;

/// Fixed-point residual `‖Σ − F(Σ)‖_F` required at return.
pub const ARE_TOLERANCE: f64 = 1e-10;
pub const MAX_ARE_ITERATIONS: usize = 10_000;
/// Any covariance entry above this means the recursion is diverging.
pub const OVERFLOW_GUARD: f64 = 1e12;
/// `ε` added to the noiseless deception-model innovation covariance.
pub const INNOVATION_REGULARIZATION: f64 = 1e-9;
/// Smallest admissible eigenvalue of the unregularized innovation covariance.
pub const SINGULAR_INNOVATION_THRESHOLD: f64 = 1e-12;

const STEP_TOLERANCE: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = -1e-10;

/// Block-diagonal constant-velocity transition for `axes` independent
/// (position, velocity) pairs: `diag([[1, T], [0, 1]], …)`.
pub fn constant_velocity_transition(sampling_period: f64, axes: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(2 * axes, 2 * axes);
    for k in 0..axes {
        a[(2 * k, 2 * k + 1)] = sampling_period;
    }
    a
}

fn check_square(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(invalid(format!(
            "{name} must be {dim}×{dim}, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(invalid(format!(
            "{name} must be {rows}×{cols}, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_finite(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn check_covariance(name: &str, q: &DMatrix<f64>) -> Result<()> {
    let asym = (q - q.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE {
        return Err(invalid(format!(
            "{name} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let min_eig = q.clone().symmetric_eigenvalues().min();
    if min_eig < PSD_TOLERANCE {
        return Err(invalid(format!(
            "{name} is not positive semidefinite (smallest eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Linear Gaussian target kinematics observed through `C` (barrage jamming).
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsModel {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    c: DMatrix<f64>,
    sampling_period: f64,
}

impl KinematicsModel {
    pub fn new(
        a: DMatrix<f64>,
        q: DMatrix<f64>,
        c: DMatrix<f64>,
        sampling_period: f64,
    ) -> Result<Self> {
        let d = a.nrows();
        if d == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        check_square("A", &a, d)?;
        check_square("Q", &q, d)?;
        if c.ncols() != d || c.nrows() == 0 {
            return Err(invalid(format!(
                "C must have {d} columns and at least one row, got {}×{}",
                c.nrows(),
                c.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("Q", &q), ("C", &c)] {
            check_finite(name, m)?;
        }
        check_covariance("Q", &q)?;
        if !(sampling_period.is_finite() && sampling_period > 0.0) {
            return Err(invalid("sampling period must be positive"));
        }
        Ok(Self {
            a,
            q,
            c,
            sampling_period,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn with_process_noise(&self, q: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), q, self.c.clone(), self.sampling_period)
    }
}

/// Target kinematics augmented with a state-dependent interference process
/// `z_{k+1} = B1 x_k + B2 z_k + v_k`, observed as `y = C1 x + C2 z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeceptionModel {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    q: DMatrix<f64>,
    sampling_period: f64,
}

impl DeceptionModel {
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c1: DMatrix<f64>,
        c2: DMatrix<f64>,
        q: DMatrix<f64>,
        sampling_period: f64,
    ) -> Result<Self> {
        let d = a.nrows();
        let e = b2.nrows();
        let p = c1.nrows();
        if d == 0 || e == 0 || p == 0 {
            return Err(invalid("deception model blocks must be non-empty"));
        }
        check_square("A", &a, d)?;
        check_square("Q", &q, d)?;
        check_square("B2", &b2, e)?;
        check_shape("B1", &b1, e, d)?;
        check_shape("C1", &c1, p, d)?;
        check_shape("C2", &c2, p, e)?;
        for (name, m) in [
            ("A", &a),
            ("B1", &b1),
            ("B2", &b2),
            ("C1", &c1),
            ("C2", &c2),
            ("Q", &q),
        ] {
            check_finite(name, m)?;
        }
        check_covariance("Q", &q)?;
        if !(sampling_period.is_finite() && sampling_period > 0.0) {
            return Err(invalid("sampling period must be positive"));
        }
        Ok(Self {
            a,
            b1,
            b2,
            c1,
            c2,
            q,
            sampling_period,
        })
    }

    pub fn target_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn interference_dim(&self) -> usize {
        self.b2.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
    }

    pub fn with_process_noise(&self, q: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b1.clone(),
            self.b2.clone(),
            self.c1.clone(),
            self.c2.clone(),
            q,
            self.sampling_period,
        )
    }

    /// `Ā = [[A, 0], [B1, B2]]`.
    pub fn augmented_transition(&self) -> DMatrix<f64> {
        let (d, e) = (self.target_dim(), self.interference_dim());
        let mut a = DMatrix::zeros(d + e, d + e);
        a.view_mut((0, 0), (d, d)).copy_from(&self.a);
        a.view_mut((d, 0), (e, d)).copy_from(&self.b1);
        a.view_mut((d, d), (e, e)).copy_from(&self.b2);
        a
    }

    /// `C̄ = [C1 C2]`.
    pub fn augmented_measurement(&self) -> DMatrix<f64> {
        let (d, e, p) = (self.target_dim(), self.interference_dim(), self.c1.nrows());
        let mut c = DMatrix::zeros(p, d + e);
        c.view_mut((0, 0), (p, d)).copy_from(&self.c1);
        c.view_mut((0, d), (p, e)).copy_from(&self.c2);
        c
    }

    /// `Q̄ = diag(Q, (1/SNR̄) I)`.
    pub fn augmented_noise(&self, snr_bar: f64) -> DMatrix<f64> {
        let (d, e) = (self.target_dim(), self.interference_dim());
        let mut q = DMatrix::zeros(d + e, d + e);
        q.view_mut((0, 0), (d, d)).copy_from(&self.q);
        q.view_mut((d, d), (e, e))
            .copy_from(&(DMatrix::identity(e, e) / snr_bar));
        q
    }
}

/// Either jamming model; the simulation loop treats them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackingModel {
    Barrage(KinematicsModel),
    Deception(DeceptionModel),
}

impl TrackingModel {
    pub fn process_noise(&self) -> &DMatrix<f64> {
        match self {
            TrackingModel::Barrage(m) => m.q(),
            TrackingModel::Deception(m) => m.q(),
        }
    }

    pub fn with_process_noise(&self, q: DMatrix<f64>) -> Result<Self> {
        Ok(match self {
            TrackingModel::Barrage(m) => TrackingModel::Barrage(m.with_process_noise(q)?),
            TrackingModel::Deception(m) => TrackingModel::Deception(m.with_process_noise(q)?),
        })
    }

    pub fn solve_are(&self, snr_bar: f64) -> Result<AreSolution> {
        match self {
            TrackingModel::Barrage(m) => solve_are_barrage(m, snr_bar),
            TrackingModel::Deception(m) => solve_are_deception(m, snr_bar),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TrackingModel::Barrage(_) => "barrage",
            TrackingModel::Deception(_) => "deception",
        }
    }
}

/// Fixed point of the Riccati recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution {
    /// Predicted covariance; for the deception model this is the full augmented matrix.
    pub sigma_matrix: DMatrix<f64>,
    /// `λmax` of the target-state block.
    pub lambda_max: CovarianceSummary,
    pub iterations: usize,
    pub residual: f64,
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(s: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != s.ncols() || s.is_empty() {
        return Err(invalid("max_eigenvalue needs a non-empty square matrix"));
    }
    let asym = (s - s.transpose()).amax();
    if asym > 1e-9 {
        return Err(invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(s.clone().symmetric_eigenvalues().max())
}

fn check_snr(snr_bar: f64) -> Result<()> {
    if !(snr_bar.is_finite() && snr_bar > 0.0) {
        return Err(invalid(format!(
            "expected SNR must be positive, got {snr_bar}"
        )));
    }
    Ok(())
}

struct RiccatiSystem<'a> {
    a: &'a DMatrix<f64>,
    c: &'a DMatrix<f64>,
    q: &'a DMatrix<f64>,
    r: DMatrix<f64>,
    check_innovation: bool,
}

impl RiccatiSystem<'_> {
    /// One application of the Riccati map.
    fn step(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let innovation_core = self.c * sigma * self.c.transpose();
        if self.check_innovation {
            let min_eig = innovation_core.clone().symmetric_eigenvalues().min();
            if min_eig < SINGULAR_INNOVATION_THRESHOLD {
                return Err(EccmError::SingularInnovation {
                    min_eigenvalue: min_eig,
                });
            }
        }
        let innovation = innovation_core + &self.r;
        let chol = innovation.cholesky().ok_or(EccmError::SingularInnovation {
            min_eigenvalue: 0.0,
        })?;
        let c_sigma = self.c * sigma;
        let correction = c_sigma.transpose() * chol.solve(&c_sigma);
        let posterior = sigma - correction;
        let mut next = self.a * posterior * self.a.transpose() + self.q;
        symmetrize(&mut next);
        Ok(next)
    }

    fn solve(&self) -> Result<(DMatrix<f64>, usize, f64)> {
        let mut sigma = self.q.clone();
        let mut iterations = 0;
        while iterations < MAX_ARE_ITERATIONS {
            let next = self.step(&sigma)?;
            iterations += 1;
            if next
                .iter()
                .any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD)
            {
                return Err(EccmError::NoConvergence {
                    iterations,
                    residual: f64::INFINITY,
                });
            }
            let change = (&next - &sigma).norm();
            let scale = 1.0 + sigma.norm();
            sigma = next;
            if change <= STEP_TOLERANCE * scale {
                break;
            }
        }
        let residual = (&sigma - self.step(&sigma)?).norm();
        if residual > ARE_TOLERANCE {
            return Err(EccmError::NoConvergence {
                iterations,
                residual,
            });
        }
        Ok((sigma, iterations, residual))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Steady-state predicted covariance under barrage jamming, with measurement
/// noise `(1/SNR̄) I`.
pub fn solve_are_barrage(model: &KinematicsModel, snr_bar: f64) -> Result<AreSolution> {
    check_snr(snr_bar)?;
    let p = model.c.nrows();
    let system = RiccatiSystem {
        a: &model.a,
        c: &model.c,
        q: &model.q,
        r: DMatrix::identity(p, p) / snr_bar,
        check_innovation: false,
    };
    let (sigma, iterations, residual) = system.solve()?;
    let lambda_max = CovarianceSummary::new(max_eigenvalue(&sigma)?)?;
    Ok(AreSolution {
        sigma_matrix: sigma,
        lambda_max,
        iterations,
        residual,
    })
}

/// Steady-state predicted covariance of the augmented deception-jamming system.
/// `lambda_max` summarizes the target block `Σ_xx` only.
pub fn solve_are_deception(model: &DeceptionModel, snr_bar: f64) -> Result<AreSolution> {
    check_snr(snr_bar)?;
    let a = model.augmented_transition();
    let c = model.augmented_measurement();
    let q = model.augmented_noise(snr_bar);
    let p = c.nrows();
    let system = RiccatiSystem {
        a: &a,
        c: &c,
        q: &q,
        r: DMatrix::identity(p, p) * INNOVATION_REGULARIZATION,
        check_innovation: true,
    };
    let (sigma, iterations, residual) = system.solve()?;
    let d = model.target_dim();
    let sigma_xx = sigma.view((0, 0), (d, d)).into_owned();
    let lambda_max = CovarianceSummary::new(max_eigenvalue(&sigma_xx)?)?;
    Ok(AreSolution {
        sigma_matrix: sigma,
        lambda_max,
        iterations,
        residual,
    })
}

/// Result of [`monte_carlo_covariance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    /// `λmax` of the sample covariance of the final one-step prediction error
    /// (target block) across trajectories.
    pub empirical_lambda_max: f64,
    /// `λmax` of the filter's own covariance after `horizon` recursion steps.
    pub recursion_lambda_max: f64,
    pub trajectories: usize,
    pub horizon: usize,
}

struct SimulatedSystem {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    reported: usize,
}

impl SimulatedSystem {
    fn from_model(model: &TrackingModel, snr_bar: f64) -> Self {
        match model {
            TrackingModel::Barrage(m) => {
                let p = m.c.nrows();
                SimulatedSystem {
                    a: m.a.clone(),
                    c: m.c.clone(),
                    q: m.q.clone(),
                    r: DMatrix::identity(p, p) / snr_bar,
                    reported: m.state_dim(),
                }
            }
            TrackingModel::Deception(m) => {
                let c = m.augmented_measurement();
                let p = c.nrows();
                SimulatedSystem {
                    a: m.augmented_transition(),
                    c,
                    q: m.augmented_noise(snr_bar),
                    r: DMatrix::identity(p, p) * INNOVATION_REGULARIZATION,
                    reported: m.target_dim(),
                }
            }
        }
    }
}

/// Symmetric square root via eigendecomposition; tolerates singular PSD input.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn fill_normal(rng: &mut ChaCha8Rng, buf: &mut DVector<f64>) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Simulates `n_trajectories` independent trajectories of the tracking model
/// for `horizon` steps and estimates the steady-state prediction covariance.
///
/// Each trajectory draws from its own ChaCha stream keyed by `(seed, index)`,
/// so the estimate does not depend on evaluation order.
pub fn monte_carlo_covariance(
    model: &TrackingModel,
    snr_bar: f64,
    n_trajectories: usize,
    horizon: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_snr(snr_bar)?;
    if n_trajectories == 0 || horizon == 0 {
        return Err(invalid("need at least one trajectory and one step"));
    }
    let sys = SimulatedSystem::from_model(model, snr_bar);
    let n = sys.a.nrows();
    let p = sys.c.nrows();

    // The covariance recursion does not depend on the measurements, so the
    // gain sequence is shared by all trajectories.
    let mut gains = Vec::with_capacity(horizon);
    let mut cov = sys.q.clone();
    for _ in 0..horizon {
        let s = &sys.c * &cov * sys.c.transpose() + &sys.r;
        let chol = s.cholesky().ok_or(EccmError::SingularInnovation {
            min_eigenvalue: 0.0,
        })?;
        let gain = chol.solve(&(&sys.c * &cov)).transpose();
        let mut next = &sys.a * (&cov - &gain * &sys.c * &cov) * sys.a.transpose() + &sys.q;
        symmetrize(&mut next);
        gains.push(gain);
        cov = next;
    }
    let reported = sys.reported;
    let recursion_lambda_max =
        max_eigenvalue(&cov.view((0, 0), (reported, reported)).into_owned())?;

    let q_root = psd_sqrt(&sys.q);
    let r_root = psd_sqrt(&sys.r);
    let mut scatter = DMatrix::<f64>::zeros(reported, reported);
    let mut state = DVector::zeros(n);
    let mut estimate = DVector::zeros(n);
    let mut scratch = DVector::zeros(n);
    let mut noise_n = DVector::zeros(n);
    let mut noise_p = DVector::zeros(p);
    let mut innovation = DVector::zeros(p);

    for traj in 0..n_trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(traj as u64);
        // x_0 ~ N(0, Q), filter prior N(0, Q)
        fill_normal(&mut rng, &mut noise_n);
        state.gemv(1.0, &q_root, &noise_n, 0.0);
        estimate.fill(0.0);
        for gain in &gains {
            // y = C x + v; innovation = y − C x̂
            fill_normal(&mut rng, &mut noise_p);
            innovation.gemv(1.0, &r_root, &noise_p, 0.0);
            innovation.gemv(1.0, &sys.c, &state, 1.0);
            innovation.gemv(-1.0, &sys.c, &estimate, 1.0);
            estimate.gemv(1.0, gain, &innovation, 1.0);
            scratch.gemv(1.0, &sys.a, &estimate, 0.0);
            std::mem::swap(&mut estimate, &mut scratch);
            fill_normal(&mut rng, &mut noise_n);
            scratch.gemv(1.0, &q_root, &noise_n, 0.0);
            scratch.gemv(1.0, &sys.a, &state, 1.0);
            std::mem::swap(&mut state, &mut scratch);
        }
        let err = (&state - &estimate).rows(0, reported).into_owned();
        scatter.ger(1.0, &err, &err, 1.0);
    }
    scatter /= n_trajectories as f64;
    symmetrize(&mut scatter);
    Ok(MonteCarloEstimate {
        empirical_lambda_max: max_eigenvalue(&scatter)?,
        recursion_lambda_max,
        trajectories: n_trajectories,
        horizon,
    })
}
