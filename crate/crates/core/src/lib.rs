//! Numerical laboratory for i.i.d. random dynamical systems of complex
//! Hénon-type maps `f(x, y) = (y + α, p(y) − δx)` on ℂ².
//!
//! The crate is organised bottom-up:
//!
//! * [`map`]: exact map algebra, closed-form inverse, Jacobian and the
//!   certified escape radii of the filtration `D_R`, `V_R⁺`, `V_R⁻`.
//! * [`dist`]: the distribution of maps and reproducible, coordinate
//!   addressable sampling of random sequences.
//! * [`escape`]: orbit classification, nonautonomous Green functions, slice
//!   rasters, boundary extraction and pixel Hausdorff distances.
//! * [`lyapunov`]: top Lyapunov exponents along random orbits.
//! * [`minsets`]: attracting minimal sets, cyclic periods and basin
//!   probabilities `T_L`.
//! * [`operator`]: the transition operator `M_τ`, convergence-rate fits and
//!   the weight derivative of `T_L`.
//! * [`bifurcation`]: noise-family sweeps.
//! * [`harness`]: configuration, output files and the `henonlab` CLI.

pub mod bifurcation;
pub mod dist;
pub mod error;
pub mod escape;
pub mod harness;
pub mod lyapunov;
pub mod map;
pub mod minsets;
pub mod operator;
pub mod rng;
pub mod sequence;

pub use dist::{MapDistribution, NoiseFamily, SequenceSeed};
pub use error::{Error, Result};
pub use map::{C2Point, FiltrationParams, HenonMap, PolyC, Region};
pub use sequence::MapSequence;

pub use num_complex::Complex64;
