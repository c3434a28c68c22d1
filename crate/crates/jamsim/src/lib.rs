//! Sample-level OFDM radar (WLAN sensing) chain with target-spoofing and deceptive-jamming models.
//!
//! Physical parameters are `f64`; sample buffers and grids are generic over [`Real`].

pub mod channel;
pub mod geometry;
pub mod grid;
pub mod jammer;
pub mod radar;
pub mod scalar;
pub mod sync;
pub mod waveform;

pub use grid::Grid;
pub use scalar::Real;
pub use waveform::{BasebandSignal, OfdmConfig};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Signal64 = BasebandSignal<f64>;
pub type Signal32 = BasebandSignal<f32>;
