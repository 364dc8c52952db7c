//! Verification laboratory for a slit-torus interval-exchange construction
//! and the Teichmueller geodesics it generates.
//!
//! The crate is organized bottom-up:
//!
//! - [`numberline`]: continued fractions, convergents, certified rational
//!   balls, Diophantine inequality checks.
//! - [`veech`]: the skew interval exchange over two tori, exact orbit
//!   engines, Birkhoff averages, and ergodic-measure estimation.
//! - [`slitsurf`]: curves on the doubled slit torus, holonomy, slit stages,
//!   and intersection numbers.
//! - [`teichflow`]: the diagonal flow, per-family time schedules, and torus
//!   area models.
//! - [`hyplen`]: hyperbolic length heuristics (collar crossings, thick-part
//!   arcs, extremal-length bounds).
//! - [`limitscan`]: length-ratio scans along a geodesic and classification
//!   of the accumulating measure.
//! - [`config`]: flat key=value run configuration shared with the CLI.

pub mod config;
pub mod error;
pub mod hyplen;
pub mod limitscan;
pub mod numberline;
pub mod slitsurf;
pub mod teichflow;
pub mod veech;

pub use config::{Family, RunConfig, SeedSpec};
pub use error::{LabError, Result};
pub use hyplen::{LengthEstimate, LengthModel, TorusArc};
pub use limitscan::{LimitVerdict, Pairings, ScanConfig, ScanPoint, ScheduleKind, VerdictKind};
pub use numberline::{CFExpansion, CertReal, Convergent, Filler};
pub use slitsurf::{CurveId, CurveRow, HolonomyVector, SignedLen, SlitRecord, Torus};
pub use teichflow::{FlowTime, SurfaceSnapshot, TorusAreas};
pub use veech::{
    BirkhoffSeries, MeasureEstimate, OrbitEngine, SkewIet, SkewState,
};
