//! Numerics for three-dimensional Schrodinger operators with finitely many point
//! interactions: resolvents, stationary wave operators, L^p probes, dispersive
//! dynamics and the shrinking-potential limit.

pub mod config;
pub mod cubature;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod gamma;
pub mod lpprobe;
pub mod profile;
pub mod quad;
pub mod radial;
pub mod report;
pub mod resolvent;
pub mod shrink;
pub mod waveop;

pub use config::{build_grid, load_config, Configuration, RadialGrid, Vec3};
pub use error::{Error, Result};
pub use field::{Anchored, AnchoredProfile, CentredField, DecayClass, Gaussian, ScalarField};
pub use num_complex::Complex64;
pub use profile::{LineProfile, Parity, RadialProfile};
