//! Qualitative and numerical analysis of a two-species syntrophic chemostat.
//!
//! Species 1 consumes a substrate `s1` and produces an intermediate `s2` that
//! inhibits it; species 2 lives on `s2` and is inhibited by `s1`. The crate
//! locates and classifies the equilibria of the reduced planar dynamics,
//! computes the dilution-rate thresholds and bifurcations, integrates the
//! full and reduced systems, and maps basins of attraction in bistable
//! regimes.
//!
//! ```
//! use syntrophic::{Chemostat, ChemostatConfig, GrowthModel, MonodParams};
//!
//! let params = MonodParams { m1: 8.0, k1: 1.0, l1: 2.0, m2: 4.0, k2: 2.0, l2: 1.0 };
//! let system = Chemostat::new(
//!     GrowthModel::monod(params).unwrap(),
//!     ChemostatConfig::new(0.5, 3.0, 3.0).unwrap(),
//! )
//! .unwrap();
//! let report = system.classify_regime(0.5).unwrap();
//! assert_eq!(report.equilibria.len(), 4);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basins;
pub mod bifurcation;
pub mod config;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod export;
pub mod growth;
pub mod ode;
pub mod planar;
mod roots;
mod system;

pub use basins::{BasinGrid, BasinLabel, Separatrix};
pub use bifurcation::{BifurcationEvent, BranchDiagram, EventKind};
pub use config::ConfigDocument;
pub use dynamics::{FullState, IntegrationOptions, Trajectory};
pub use equilibria::{
    EquilibriumKind, EquilibriumRecord, RegimeCase, RegimeReport, Stability, Thresholds,
};
pub use error::{Error, Result};
pub use growth::{
    ChemostatConfig, FamilyRegistry, GrowthModel, HypothesisReport, MonodParams, Species, Yields,
};
pub use planar::PlanarState;
pub use system::Chemostat;
