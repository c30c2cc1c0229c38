//! Fourier–Taylor series in action-angle variables and the KAM linearization
//! machinery built on them.
//!
//! Functions of `(r, θ, t)` are sums of `c·r^{n/2}e^{ikθ}e^{imt}` with
//! `2π`-periodic dependence on `θ` and `t`. The quadratic part is always
//! `H₂ = ωr`.

pub mod diophantine;
pub mod homological;
pub mod ingest;
pub mod kam;
pub mod lie;
pub mod quadrature;
pub mod series;

pub use diophantine::DiophantineParams;
pub use homological::{residual, solve, SolveError};
pub use ingest::{HamiltonianSpec, IngestError};
pub use kam::{kam_run, KamError, KamRun, KamRunConfig, KamSchedule, StepReport, TransformChain};
pub use lie::{deprit_normalize, kam_step_transform, lie_series_transform, LieError, NormalForm};
pub use series::{mul, poisson_bracket, Complex, DegreeWindow, FourierTaylorSeries, MonomialIndex, SeriesError, Truncated};
