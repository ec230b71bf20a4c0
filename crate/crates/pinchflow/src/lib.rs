//! pinchflow: a numerical laboratory for mean curvature flow of compact
//! surfaces in four-dimensional space forms.
//!
//! The crate evolves immersed surfaces in R^4, S^4, and H^4 by their mean
//! curvature vector and certifies, along the way, the algebraic machinery
//! behind curvature pinching: a pinching quantity built from the second
//! fundamental form, torsion, and mean curvature; the negativity of its
//! reaction term on the pinched cone; sharp gradient and normal-curvature
//! inequalities; and the decay of a scale-invariant roundness functional.
//!
//! # Layout
//!
//! * [`linalg`] — fixed-size vectors and symmetric 2x2 forms.
//! * [`spaceform`] — the three ambient models, their metrics, retractions,
//!   and normal frames.
//! * [`surface`] — parametrized grids, finite-difference stencils, the full
//!   second-fundamental-form package per site, global diagnostics.
//! * [`pinching`] — the pinching coefficients, the pinching quantity Q, and
//!   the decay functional f_sigma.
//! * [`reaction`] — the reaction-term upper bound in the adapted frame and
//!   its Monte Carlo certification scan.
//! * [`tensor`] — the symmetric gradient-tensor inequalities and the sharp
//!   3/4 trace constant.
//! * [`oracle`] — exact shrinking-sphere solutions in all three models.
//! * [`presets`] — the catalog of reference immersions.
//! * [`flow`] — the explicit flow driver with adaptive time steps, stopping
//!   rules, and extinction-time extrapolation.
//! * [`config`] — the TOML run configuration.
//! * [`report`] — deterministic CSV/JSON writers.
//! * [`cli`] — the command-line drivers.
//!
//! # Quick start
//!
//! ```
//! use pinchflow::flow::{run, FlowConfig};
//! use pinchflow::pinching::PinchingParams;
//! use pinchflow::presets;
//!
//! let surface = presets::round_sphere_r4(1.0, 16, 8).unwrap();
//! let params = PinchingParams::new(0.7, 0.0).unwrap();
//! let cfg = FlowConfig { max_steps: 200, ..FlowConfig::default() };
//! let outcome = run(surface, &params, &cfg, 0.05, &[2.0]).unwrap();
//! assert!(outcome.final_time > 0.0);
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod oracle;
pub mod pinching;
pub mod presets;
pub mod reaction;
pub mod report;
pub mod spaceform;
pub mod surface;
pub mod tensor;

pub use error::{Error, Result};
