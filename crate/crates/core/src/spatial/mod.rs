//! Scene synthesis: layer planning, spatial assignment, rendering and mixing.

mod array;
mod assign;
mod bank;
mod layers;
mod mix;
mod render;
mod reverb;
pub mod sh;

pub use array::{
    anechoic_bank, anechoic_ir, fractional_delay_kernel, grid_points, steering_response, ArrayKind, ArrayModel,
    GridResponses, Sensor, SteeringResponse,
};
pub use assign::{assign_spatial, MAX_MOVING_ATTEMPTS};
pub use bank::{IrBank, MovingPath, Trajectory, TrajectoryNode, TrajectoryShape};
pub use layers::{plan_layers, LayerParams, SampleInfo, SamplePool};
pub use mix::{
    event_doa_at, label_script, measure_snr_db, mix_scene, render_event, FormatInput,
    RenderedScene, SampleStore,
};
pub use render::{render_moving, render_static, DEFAULT_HOP_S};
pub use reverb::{decay_envelope, synth_bank, synth_reverb_ir, ReverbParams};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("sample pool for {0} events is empty")]
    EmptyPool(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRate { expected: u32, found: u32 },
    #[error("expected {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("empty input signal")]
    EmptySignal,
    #[error("trajectory too short: need {needed_deg:.2} deg of arc, have {available_deg:.2}")]
    TrajectoryTooShort { needed_deg: f64, available_deg: f64 },
    #[error("ill-conditioned spherical harmonic fit: order {order} from {nodes} nodes ({reason})")]
    IllConditioned {
        order: usize,
        nodes: usize,
        reason: String,
    },
    #[error("invalid IR bank: {0}")]
    InvalidBank(String),
    #[error("missing audio for sample {0:?}")]
    MissingSample(String),
    #[error("missing IR for trajectory {trajectory} node {index}")]
    MissingIr { trajectory: usize, index: usize },
    #[error("event {0} has no spatial assignment")]
    Unassigned(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}
