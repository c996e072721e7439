//! Synthetic line-of-sight CSI generation for the three antenna topologies.
//!
//! The channel model is pure free-space LoS: per antenna `n` and subcarrier
//! `k`, `H[n,k] = (lambda_k / (4 pi d_n)) * exp(-j 2 pi f_k d_n / c)` with
//! `d_n` the 3-D distance between element `n` and the user antenna.
//! Optional complex white noise can be added at a configured SNR.

mod grid;
mod radio;
mod synth;
mod topology;

pub use grid::{generate_grid_dataset, grid_node_count, grid_positions, Area, Dataset};
pub use radio::{subcarrier_frequencies, RadioConfig, SPEED_OF_LIGHT_M_S};
pub use synth::{los_response, synth_csi, CsiMatrix, CsiSample};
pub use topology::{build_topology, GeometryConfig, Topology, TopologyKind};

/// Errors from topology construction and CSI synthesis.
#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("user position coincides with antenna element {element} (zero distance)")]
    Singularity { element: usize },
    #[error("position ({x}, {y}) mm lies outside the user area")]
    OutsideArea { x: f64, y: f64 },
}
