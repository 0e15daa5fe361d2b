//! Half-space forward problem: Green's function, boundary operators, solves and band measurements.

pub mod born;
pub mod config;
pub mod correlation;
pub mod green;
pub mod measure;
pub mod slp;
pub mod solver;

pub use born::{born_u1, born_u1_refined, scattered_field, RadialBorn};
pub use config::MeasurementConfig;
pub use correlation::{estimate_backscatter_power, estimate_correlation, CorrelationEstimate, McOptions};
pub use green::{greens, incident};
pub use measure::{measure, measure_dataset, BackscatterDataset, BandDiagnostics, BandQuadrature, Measurement, Solver};
pub use slp::{apply_slp_boundary, slp_direct, BoundaryDensity, SlpOperator};
pub use solver::{born_series, born_threshold, solve_density, BornSeries, SolveOutcome};
