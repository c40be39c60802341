//! The reduced planar system on the invariant set.
//!
//! On `s1 + x1 = s1_in`, `s2 + x2 - x1 = s2_in` the dynamics collapse to
//!
//! ```text
//! x1' = (Phi1(x1, x2) - D) x1
//! x2' = (Phi2(x1, x2) - D) x2
//! ```
//!
//! with `Phi_i(x1, x2) = f_i(s1_in - x1, s2_in + x1 - x2)`. `Phi1` increases
//! with `x2` and `Phi2` decreases with it, so each level set `Phi_i = D` is
//! the graph of a function `x2 = F_i(x1)`. Positive equilibria are the
//! crossings of those two graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{ChemostatConfig, Species};
use crate::roots::bisect;
use crate::system::Chemostat;

/// Absolute tolerance on `x2` when solving `Phi_i(x1, x2) = D`.
pub const GRAPH_TOL: f64 = 1e-12;
pub const GRAPH_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub x1: f64,
    pub x2: f64,
}

impl PlanarState {
    pub const ORIGIN: PlanarState = PlanarState { x1: 0.0, x2: 0.0 };

    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn distance(&self, other: &PlanarState) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

impl From<[f64; 2]> for PlanarState {
    fn from(a: [f64; 2]) -> Self {
        Self { x1: a[0], x2: a[1] }
    }
}

/// Membership in `0 < x1 <= s1_in`, `0 < x2 <= x1 + s2_in`.
pub fn in_region(config: &ChemostatConfig, state: PlanarState) -> bool {
    state.x1 > 0.0
        && state.x1 <= config.s1_in
        && state.x2 > 0.0
        && state.x2 <= state.x1 + config.s2_in
}

/// Membership in the closure of the region.
pub fn in_closed_region(config: &ChemostatConfig, state: PlanarState) -> bool {
    state.x1 >= 0.0
        && state.x1 <= config.s1_in
        && state.x2 >= 0.0
        && state.x2 <= state.x1 + config.s2_in
}

/// One of the two level-set graphs `x2 = F_i(x1)` at a fixed dilution rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFunction {
    pub species: Species,
    pub dilution: f64,
    /// Interval of `x1` on which `F_i` is defined, if any.
    pub domain: Option<(f64, f64)>,
}

impl Chemostat {
    /// Substrate levels `(s1, s2)` corresponding to a point of the plane.
    #[inline]
    pub fn substrates(&self, x1: f64, x2: f64) -> (f64, f64) {
        (self.s1_in() - x1, self.s2_in() + x1 - x2)
    }

    pub fn phi(&self, species: Species, state: PlanarState) -> Result<f64> {
        let (s1, s2) = self.substrates(state.x1, state.x2);
        if !(s1 >= 0.0 && s2 >= 0.0) {
            return Err(Error::OutOfRegion {
                x1: state.x1,
                x2: state.x2,
            });
        }
        Ok(self.rate(species, s1, s2))
    }

    #[inline]
    pub(crate) fn phi_raw(&self, species: Species, x1: f64, x2: f64) -> f64 {
        let (s1, s2) = self.substrates(x1, x2);
        self.rate(species, s1, s2)
    }

    /// `(dPhi/dx1, dPhi/dx2)` by the chain rule.
    pub(crate) fn phi_gradient(&self, species: Species, x1: f64, x2: f64) -> (f64, f64) {
        let (s1, s2) = self.substrates(x1, x2);
        let (d1, d2) = self.partials(species, s1, s2);
        (-d1 + d2, -d2)
    }

    /// The `x2` in `[0, x1 + s2_in]` solving `Phi_i(x1, x2) = dilution`.
    pub fn graph_value(&self, species: Species, dilution: f64, x1: f64) -> Option<f64> {
        if !(x1 >= 0.0 && x1 <= self.s1_in()) {
            return None;
        }
        let top = x1 + self.s2_in();
        bisect(
            |x2| self.phi_raw(species, x1, x2) - dilution,
            0.0,
            top,
            GRAPH_TOL,
            GRAPH_MAX_ITER,
        )
    }

    /// `F_i'(x1) = 1 - (df_i/ds1) / (df_i/ds2)` at the graph point above `x1`.
    pub fn graph_slope(&self, species: Species, dilution: f64, x1: f64) -> Option<f64> {
        let x2 = self.graph_value(species, dilution, x1)?;
        self.level_set_slope(species, PlanarState { x1, x2 })
    }

    /// Slope of the level curve of `Phi_i` through `state`.
    pub fn level_set_slope(&self, species: Species, state: PlanarState) -> Option<f64> {
        let (s1, s2) = self.substrates(state.x1, state.x2);
        let (d1, d2) = self.partials(species, s1, s2);
        if d2 == 0.0 || !d2.is_finite() {
            return None;
        }
        Some(1.0 - d1 / d2)
    }

    pub fn in_region(&self, state: PlanarState) -> bool {
        in_region(self.config(), state)
    }

    pub fn graph_function(&self, species: Species, dilution: f64) -> GraphFunction {
        let s1_in = self.s1_in();
        let domain = match species {
            Species::One => {
                // Phi1 ranges over [Phi1(x1, 0), f1(s1_in - x1, 0)] along a vertical line.
                let lower = |x: f64| self.phi_raw(Species::One, x, 0.0) - dilution;
                let upper = |x: f64| self.rate(Species::One, s1_in - x, 0.0) - dilution;
                if upper(0.0) < 0.0 {
                    None
                } else {
                    let lo = if lower(0.0) > 0.0 {
                        bisect(lower, 0.0, s1_in, GRAPH_TOL, GRAPH_MAX_ITER)
                    } else {
                        Some(0.0)
                    };
                    let hi = bisect(upper, 0.0, s1_in, GRAPH_TOL, GRAPH_MAX_ITER);
                    lo.zip(hi).filter(|(lo, hi)| lo <= hi)
                }
            }
            Species::Two => {
                let lower = |x: f64| self.phi_raw(Species::Two, x, 0.0) - dilution;
                if lower(0.0) >= 0.0 {
                    Some((0.0, s1_in))
                } else if lower(s1_in) < 0.0 {
                    None
                } else {
                    bisect(lower, 0.0, s1_in, GRAPH_TOL, GRAPH_MAX_ITER).map(|lo| (lo, s1_in))
                }
            }
        };
        GraphFunction {
            species,
            dilution,
            domain,
        }
    }

    /// `n` points of the graph sampled uniformly over its domain.
    pub fn graph_polyline(&self, species: Species, dilution: f64, n: usize) -> Vec<PlanarState> {
        let Some((lo, hi)) = self.graph_function(species, dilution).domain else {
            return Vec::new();
        };
        let n = n.max(2);
        (0..n)
            .filter_map(|i| {
                let x1 = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                self.graph_value(species, dilution, x1)
                    .map(|x2| PlanarState { x1, x2 })
            })
            .collect()
    }
}
