//! Reference scenario: three-axis constant-velocity target, four jamming
//! levels, and the observation channel the simulations are run against.

use nalgebra::DMatrix;

use crate::model::{JammingChannel, JammingGrid, UtilityParams};
use crate::riccati::{
    constant_velocity_transition, DeceptionModel, KinematicsModel, TrackingModel,
};
use crate::sim::{Mismatch, Scenario, SimulationConfig};

pub const SAMPLING_PERIOD: f64 = 1.0;
pub const LEVELS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const C1: f64 = 100.0;
pub const C2: f64 = 1e4;

/// Observation probabilities as published (four decimals; rows renormalized on load).
pub const CHANNEL_ROWS: [[f64; 4]; 4] = [
    [0.3878, 0.3215, 0.1858, 0.1049],
    [0.2980, 0.3617, 0.2146, 0.1256],
    [0.2040, 0.2583, 0.3307, 0.2070],
    [0.1029, 0.1408, 0.2140, 0.5422],
];

/// The jammer's estimation error of the channel in the mismatch study.
pub const MISMATCH_PERTURBATION: [[f64; 4]; 4] = [
    [-0.1099, 0.0361, 0.0429, 0.0310],
    [-0.0079, 0.0588, -0.0165, -0.0344],
    [0.0192, 0.0428, -0.1213, 0.0593],
    [0.0973, 0.0521, -0.0882, -0.0612],
];

pub fn reference_grid() -> JammingGrid {
    JammingGrid::new(LEVELS.to_vec()).expect("reference grid is valid")
}

fn rows(table: &[[f64; 4]; 4]) -> Vec<Vec<f64>> {
    table.iter().map(|r| r.to_vec()).collect()
}

pub fn reference_channel() -> JammingChannel {
    JammingChannel::from_rounded_rows(reference_grid(), rows(&CHANNEL_ROWS))
        .expect("reference channel is valid")
}

/// Published channel plus [`MISMATCH_PERTURBATION`], renormalized.
pub fn perturbed_channel() -> JammingChannel {
    let mut table = CHANNEL_ROWS;
    for (row, delta) in table.iter_mut().zip(&MISMATCH_PERTURBATION) {
        for (p, d) in row.iter_mut().zip(delta) {
            *p += d;
        }
    }
    JammingChannel::from_rounded_rows(reference_grid(), rows(&table))
        .expect("perturbed channel is valid")
}

pub fn reference_utility() -> UtilityParams {
    UtilityParams::new(C1, C2).expect("reference utility constants are positive")
}

/// Initial process noise `Q₀ = I₆`.
pub fn initial_process_noise() -> DMatrix<f64> {
    DMatrix::identity(6, 6)
}

/// Barrage-jamming target model: constant velocity on three axes, every
/// state component measured.
pub fn barrage_model() -> KinematicsModel {
    KinematicsModel::new(
        constant_velocity_transition(SAMPLING_PERIOD, 3),
        initial_process_noise(),
        DMatrix::identity(6, 6),
        SAMPLING_PERIOD,
    )
    .expect("reference barrage model is valid")
}

/// Deception-jamming model: interference `z_{k+1} = x_k + z_k + v_k`,
/// observed as `y = x + ½ z`.
pub fn deception_model() -> DeceptionModel {
    let i = DMatrix::<f64>::identity(6, 6);
    DeceptionModel::new(
        constant_velocity_transition(SAMPLING_PERIOD, 3),
        i.clone(),
        i.clone(),
        i.clone(),
        &i * 0.5,
        initial_process_noise(),
        SAMPLING_PERIOD,
    )
    .expect("reference deception model is valid")
}

pub fn barrage_tracking() -> TrackingModel {
    TrackingModel::Barrage(barrage_model())
}

pub fn deception_tracking() -> TrackingModel {
    TrackingModel::Deception(deception_model())
}

/// Barrage jamming against the reference channel, default horizons.
pub fn barrage_config() -> SimulationConfig {
    SimulationConfig::new(barrage_tracking(), reference_channel(), reference_utility())
}

/// Deception jamming against the reference channel, default horizons.
pub fn deception_config() -> SimulationConfig {
    SimulationConfig::new(
        deception_tracking(),
        reference_channel(),
        reference_utility(),
    )
}

/// Barrage configuration where the jammer models the channel as [`perturbed_channel`].
pub fn mismatch_config(scenario: Scenario) -> SimulationConfig {
    let mut config = barrage_config();
    config.mismatch = Some(Mismatch {
        p_hat: perturbed_channel(),
        scenario,
    });
    config
}
