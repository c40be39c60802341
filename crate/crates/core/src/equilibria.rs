//! Thresholds, equilibria and their classification for the planar system.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::Species;
use crate::planar::{PlanarState, GRAPH_MAX_ITER, GRAPH_TOL};
use crate::roots::{bisect, golden_min};
use crate::system::Chemostat;

/// Largest admissible `|Phi_i - D|` at a returned equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Eigenvalues with `|Re| <` this are treated as zero.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;
/// `D1` and `D2` closer than this are treated as equal (no `D3`/`D4`).
pub const THRESHOLD_TIE_TOL: f64 = 1e-12;
/// A dilution rate closer than this to a threshold is "at bifurcation".
pub const AT_BIFURCATION_TOL: f64 = 1e-9;
/// Number of sample intervals along `Gamma_1` when scanning for crossings.
pub const POSITIVE_SCAN_SAMPLES: usize = 2000;
/// Vertical gap `|F1 - F2|` below which an untouched extremum is reported as
/// a near-degenerate (tangent) crossing.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-8;

const ROOT_TOL: f64 = 1e-14;

/// Dilution-rate thresholds of a configuration.
///
/// `d1` and `d2` are the washout rates of each species alone. `d3` exists when
/// `d1 > d2` and is the rate at which the boundary equilibrium of species 1
/// becomes invadable-neutral; `d4` is the mirror case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub d1: f64,
    pub d2: f64,
    pub d3: Option<f64>,
    pub d4: Option<f64>,
    pub xi1: Option<f64>,
    pub xi2: Option<f64>,
}

impl Thresholds {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("D1", self.d1), ("D2", self.d2)];
        if let Some(d3) = self.d3 {
            out.push(("D3", d3));
        }
        if let Some(d4) = self.d4 {
            out.push(("D4", d4));
        }
        out
    }

    pub fn case(&self, dilution: f64) -> RegimeCase {
        let (lo, hi) = (self.d1.min(self.d2), self.d1.max(self.d2));
        if dilution < lo {
            RegimeCase::Case1
        } else if dilution > hi {
            RegimeCase::Case3
        } else if self.d1 < self.d2 {
            match self.d4 {
                Some(d4) if dilution > d4 => RegimeCase::Case2b,
                _ => RegimeCase::Case2a,
            }
        } else {
            match self.d3 {
                Some(d3) if dilution > d3 => RegimeCase::Case2d,
                _ => RegimeCase::Case2c,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EquilibriumKind {
    F0,
    #[serde(rename = "F1_boundary")]
    F1Boundary,
    #[serde(rename = "F2_boundary")]
    F2Boundary,
    #[serde(rename = "F_star")]
    FStar,
}

impl EquilibriumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumKind::F0 => "F0",
            EquilibriumKind::F1Boundary => "F1_boundary",
            EquilibriumKind::F2Boundary => "F2_boundary",
            EquilibriumKind::FStar => "F_star",
        }
    }
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableNode,
    UnstableNode,
    Saddle,
    Nonhyperbolic,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::StableNode => "stable_node",
            Stability::UnstableNode => "unstable_node",
            Stability::Saddle => "saddle",
            Stability::Nonhyperbolic => "nonhyperbolic",
        }
    }

    /// Classification by the signs of the eigenvalue real parts.
    ///
    /// Complex pairs cannot occur under the growth hypotheses (the Jacobian
    /// is triangular on the axes and has positive off-diagonal product at
    /// positive equilibria); if they do, they are classified by real part.
    pub fn from_eigenvalues(eigenvalues: &[[f64; 2]; 2]) -> Self {
        let re = [eigenvalues[0][0], eigenvalues[1][0]];
        if re.iter().any(|r| r.abs() < HYPERBOLICITY_TOL) {
            Stability::Nonhyperbolic
        } else if re.iter().all(|&r| r < 0.0) {
            Stability::StableNode
        } else if re.iter().all(|&r| r > 0.0) {
            Stability::UnstableNode
        } else {
            Stability::Saddle
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Eigenvalues `[re, im]` of a real 2x2 matrix.
///
/// Triangular matrices return their diagonal exactly; otherwise the roots of
/// `l^2 - tr l + det` are taken in the cancellation-free form.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    if m[0][1] == 0.0 || m[1][0] == 0.0 {
        return [[m[0][0], 0.0], [m[1][1], 0.0]];
    }
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    // (a - d)^2 / 4 + bc avoids cancellation in tr^2 / 4 - det.
    let disc = 0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0];
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let big = if half >= 0.0 { half + sq } else { half - sq };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if small <= big {
            (small, big)
        } else {
            (big, small)
        };
        [[a, 0.0], [b, 0.0]]
    } else {
        let im = (-disc).sqrt();
        [[half, -im], [half, im]]
    }
}

pub fn determinant_2x2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// An equilibrium of the planar system with its linearisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub kind: EquilibriumKind,
    #[serde(flatten)]
    pub location: PlanarState,
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [[f64; 2]; 2],
    pub stability: Stability,
    /// Crossing found as a tangency without a sign change.
    #[serde(default)]
    pub near_degenerate: bool,
    /// `[F1', F2']` at a positive equilibrium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_slopes: Option<[f64; 2]>,
}

impl EquilibriumRecord {
    pub fn determinant(&self) -> f64 {
        determinant_2x2(&self.jacobian)
    }

    pub fn trace(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1]
    }

    pub fn is_stable_node(&self) -> bool {
        self.stability == Stability::StableNode
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeCase {
    Case1,
    Case2a,
    Case2b,
    Case2c,
    Case2d,
    Case3,
}

impl RegimeCase {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeCase::Case1 => "case1",
            RegimeCase::Case2a => "case2a",
            RegimeCase::Case2b => "case2b",
            RegimeCase::Case2c => "case2c",
            RegimeCase::Case2d => "case2d",
            RegimeCase::Case3 => "case3",
        }
    }

    /// Global attractor when at most one positive equilibrium exists.
    pub fn unique_attractor(self) -> EquilibriumKind {
        match self {
            RegimeCase::Case1 | RegimeCase::Case2a | RegimeCase::Case2c => EquilibriumKind::FStar,
            RegimeCase::Case2b => EquilibriumKind::F2Boundary,
            RegimeCase::Case2d => EquilibriumKind::F1Boundary,
            RegimeCase::Case3 => EquilibriumKind::F0,
        }
    }
}

impl fmt::Display for RegimeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub dilution: f64,
    pub thresholds: Thresholds,
    pub case: RegimeCase,
    pub equilibria: Vec<EquilibriumRecord>,
    pub predicted_attractors: Vec<EquilibriumKind>,
}

impl RegimeReport {
    pub fn positive(&self) -> impl Iterator<Item = &EquilibriumRecord> {
        self.equilibria
            .iter()
            .filter(|e| e.kind == EquilibriumKind::FStar)
    }

    pub fn stable_nodes(&self) -> impl Iterator<Item = &EquilibriumRecord> {
        self.equilibria.iter().filter(|e| e.is_stable_node())
    }

    pub fn find(&self, kind: EquilibriumKind) -> Option<&EquilibriumRecord> {
        self.equilibria.iter().find(|e| e.kind == kind)
    }

    pub fn has_near_degenerate(&self) -> bool {
        self.equilibria.iter().any(|e| e.near_degenerate)
    }
}

/// A crossing of the two level graphs found by the scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Crossing {
    pub location: PlanarState,
    pub near_degenerate: bool,
}

impl Chemostat {
    /// `D1`..`D4` and the crossing points `xi1`, `xi2`.
    pub fn compute_thresholds(&self) -> Result<Thresholds> {
        if !self.hypotheses_hold() {
            let report = self.check_hypotheses();
            return Err(Error::HypothesesViolated {
                count: report.violations.len(),
                first: report
                    .violations
                    .first()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
            });
        }
        Ok(self.thresholds())
    }

    pub(crate) fn thresholds(&self) -> Thresholds {
        let (s1_in, s2_in) = (self.s1_in(), self.s2_in());
        let d1 = self.rate(Species::One, s1_in, s2_in);
        let d2 = self.rate(Species::Two, s1_in, s2_in);
        let mut t = Thresholds {
            d1,
            d2,
            d3: None,
            d4: None,
            xi1: None,
            xi2: None,
        };
        if (d1 - d2).abs() <= THRESHOLD_TIE_TOL {
            return t;
        }
        if d1 > d2 {
            let gap =
                |x: f64| self.phi_raw(Species::One, x, 0.0) - self.phi_raw(Species::Two, x, 0.0);
            if let Some(xi) = bisect(gap, 0.0, s1_in, GRAPH_TOL * 1e-2, GRAPH_MAX_ITER) {
                t.xi1 = Some(xi);
                t.d3 = Some(self.phi_raw(Species::One, xi, 0.0));
            }
        } else {
            let gap =
                |x: f64| self.phi_raw(Species::One, 0.0, x) - self.phi_raw(Species::Two, 0.0, x);
            if let Some(xi) = bisect(gap, 0.0, s2_in, GRAPH_TOL * 1e-2, GRAPH_MAX_ITER) {
                t.xi2 = Some(xi);
                t.d4 = Some(self.phi_raw(Species::One, 0.0, xi));
            }
        }
        t
    }

    /// Analytic Jacobian of the planar vector field.
    pub fn jacobian(&self, dilution: f64, state: PlanarState) -> [[f64; 2]; 2] {
        let PlanarState { x1, x2 } = state;
        let phi1 = self.phi_raw(Species::One, x1, x2);
        let phi2 = self.phi_raw(Species::Two, x1, x2);
        let (a1, b1) = self.phi_gradient(Species::One, x1, x2);
        let (a2, b2) = self.phi_gradient(Species::Two, x1, x2);
        [
            [phi1 - dilution + x1 * a1, x1 * b1],
            [x2 * a2, phi2 - dilution + x2 * b2],
        ]
    }

    fn defining_residual(&self, kind: EquilibriumKind, dilution: f64, p: PlanarState) -> f64 {
        let r1 = || (self.phi_raw(Species::One, p.x1, p.x2) - dilution).abs();
        let r2 = || (self.phi_raw(Species::Two, p.x1, p.x2) - dilution).abs();
        match kind {
            EquilibriumKind::F0 => p.x1.abs().max(p.x2.abs()),
            EquilibriumKind::F1Boundary => r1().max(p.x2.abs()),
            EquilibriumKind::F2Boundary => r2().max(p.x1.abs()),
            EquilibriumKind::FStar => r1().max(r2()),
        }
    }

    /// Linearises the system at a candidate equilibrium after checking that it
    /// solves its defining equations.
    pub fn classify_equilibrium(
        &self,
        dilution: f64,
        kind: EquilibriumKind,
        location: PlanarState,
    ) -> Result<EquilibriumRecord> {
        let residual = self.defining_residual(kind, dilution, location);
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::ResidualTooLarge { kind, residual });
        }
        Ok(self.linearise(dilution, kind, location, false))
    }

    fn linearise(
        &self,
        dilution: f64,
        kind: EquilibriumKind,
        location: PlanarState,
        near_degenerate: bool,
    ) -> EquilibriumRecord {
        let jacobian = self.jacobian(dilution, location);
        let eigenvalues = eigenvalues_2x2(&jacobian);
        let graph_slopes = (kind == EquilibriumKind::FStar)
            .then(|| {
                Some([
                    self.level_set_slope(Species::One, location)?,
                    self.level_set_slope(Species::Two, location)?,
                ])
            })
            .flatten();
        EquilibriumRecord {
            kind,
            location,
            jacobian,
            eigenvalues,
            stability: Stability::from_eigenvalues(&eigenvalues),
            near_degenerate,
            graph_slopes,
        }
    }

    pub fn washout(&self, dilution: f64) -> EquilibriumRecord {
        self.linearise(dilution, EquilibriumKind::F0, PlanarState::ORIGIN, false)
    }

    /// `F1 = (x1bar, 0)`; exists iff `D < D1`.
    pub fn find_boundary_f1(&self, dilution: f64) -> Option<EquilibriumRecord> {
        let psi = |x: f64| self.phi_raw(Species::One, x, 0.0) - dilution;
        if !(dilution > 0.0) || psi(0.0) <= 0.0 {
            return None;
        }
        let x1 = bisect(psi, 0.0, self.s1_in(), ROOT_TOL, GRAPH_MAX_ITER)?;
        (x1 > 0.0).then(|| {
            self.linearise(
                dilution,
                EquilibriumKind::F1Boundary,
                PlanarState::new(x1, 0.0),
                false,
            )
        })
    }

    /// `F2 = (0, x2tilde)`; exists iff `D < D2`.
    pub fn find_boundary_f2(&self, dilution: f64) -> Option<EquilibriumRecord> {
        let psi = |x: f64| self.phi_raw(Species::Two, 0.0, x) - dilution;
        if !(dilution > 0.0) || psi(0.0) <= 0.0 {
            return None;
        }
        let x2 = bisect(psi, 0.0, self.s2_in(), ROOT_TOL, GRAPH_MAX_ITER)?;
        (x2 > 0.0).then(|| {
            self.linearise(
                dilution,
                EquilibriumKind::F2Boundary,
                PlanarState::new(0.0, x2),
                false,
            )
        })
    }

    /// Positive equilibria sorted by `x1`.
    pub fn find_positive_equilibria(&self, dilution: f64) -> Vec<EquilibriumRecord> {
        self.crossings(dilution)
            .into_iter()
            .map(|c| {
                self.linearise(
                    dilution,
                    EquilibriumKind::FStar,
                    c.location,
                    c.near_degenerate,
                )
            })
            .collect()
    }

    /// Crossings of the two graphs, found along `Gamma_1`.
    ///
    /// On `Gamma_1` the function `h(x1) = Phi2(x1, F1(x1)) - D` has the sign
    /// of `F2(x1) - F1(x1)` (`Phi2` decreases in `x2`) and, unlike `F1 - F2`,
    /// stays defined where `F2` does not exist. Sign changes are bisected;
    /// local extrema of `|h|` are minimised to catch pairs of close roots.
    pub(crate) fn crossings(&self, dilution: f64) -> Vec<Crossing> {
        let Some((lo, hi)) = self.graph_function(Species::One, dilution).domain else {
            return Vec::new();
        };
        if !(hi > lo) {
            return Vec::new();
        }

        // At the domain ends the solve can miss its bracket by round-off;
        // there the graph meets x2 = 0 or x2 = x1 + s2_in by construction.
        let s2_in = self.s2_in();
        let on_graph = |x1: f64| -> Option<PlanarState> {
            let x2 = self
                .graph_value(Species::One, dilution, x1)
                .or_else(|| (x1 == lo && lo > 0.0).then_some(0.0))
                .or_else(|| (x1 == hi).then_some(x1 + s2_in))?;
            Some(PlanarState { x1, x2 })
        };
        let h = |x1: f64| -> f64 {
            match on_graph(x1) {
                Some(p) => self.phi_raw(Species::Two, p.x1, p.x2) - dilution,
                None => f64::NAN,
            }
        };

        let n = POSITIVE_SCAN_SAMPLES;
        // Endpoints exactly, so the fallbacks in `on_graph` apply.
        let xs: Vec<f64> = (0..=n)
            .map(|i| match i {
                0 => lo,
                i if i == n => hi,
                i => lo + (hi - lo) * i as f64 / n as f64,
            })
            .collect();
        let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();

        let mut roots: Vec<(f64, bool)> = Vec::new();
        let mut push_root = |x: f64, degenerate: bool| roots.push((x, degenerate));

        for i in 0..n {
            let (ha, hb) = (hs[i], hs[i + 1]);
            if !(ha.is_finite() && hb.is_finite()) {
                continue;
            }
            if ha == 0.0 {
                push_root(xs[i], false);
            } else if hb != 0.0 && ha.signum() != hb.signum() {
                if let Some(x) = bisect(h, xs[i], xs[i + 1], ROOT_TOL, GRAPH_MAX_ITER) {
                    push_root(x, false);
                }
            }
        }
        if hs[n] == 0.0 {
            push_root(xs[n], false);
        }

        for i in 1..n {
            let (ha, hm, hb) = (hs[i - 1], hs[i], hs[i + 1]);
            if !(ha.is_finite() && hm.is_finite() && hb.is_finite()) || hm == 0.0 {
                continue;
            }
            let sign = hm.signum();
            if ha.signum() != sign || hb.signum() != sign {
                continue;
            }
            if !(sign * hm <= sign * ha && sign * hm <= sign * hb) {
                continue;
            }
            let (xm, vm) = golden_min(|x| sign * h(x), xs[i - 1], xs[i + 1], ROOT_TOL);
            if vm < 0.0 {
                if let Some(x) = bisect(h, xs[i - 1], xm, ROOT_TOL, GRAPH_MAX_ITER) {
                    push_root(x, false);
                }
                if let Some(x) = bisect(h, xm, xs[i + 1], ROOT_TOL, GRAPH_MAX_ITER) {
                    push_root(x, false);
                }
            } else if let (Some(p), Some(f2)) =
                (on_graph(xm), self.graph_value(Species::Two, dilution, xm))
            {
                if (p.x2 - f2).abs() < NEAR_DEGENERATE_GAP {
                    push_root(xm, true);
                }
            }
        }

        roots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<Crossing> = Vec::new();
        for (x1, near_degenerate) in roots {
            let Some(location) = on_graph(x1) else {
                continue;
            };
            if !self.in_region(location) {
                continue;
            }
            if let Some(last) = out.last() {
                if (last.location.x1 - x1).abs() < 1e-10 {
                    continue;
                }
            }
            out.push(Crossing {
                location,
                near_degenerate,
            });
        }
        out
    }

    /// Full classification at `dilution`, refusing values within
    /// [`AT_BIFURCATION_TOL`] of a threshold.
    pub fn classify_regime(&self, dilution: f64) -> Result<RegimeReport> {
        if !(dilution > 0.0 && dilution.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "D",
                value: dilution,
            });
        }
        let thresholds = self.compute_thresholds()?;
        for (name, value) in thresholds.named() {
            if (dilution - value).abs() < AT_BIFURCATION_TOL {
                return Err(Error::AtBifurcation {
                    dilution,
                    threshold: name,
                    value,
                });
            }
        }
        Ok(self.regime_with(dilution, thresholds))
    }

    /// Classification without the at-bifurcation guard, used by sweeps.
    pub(crate) fn regime(&self, dilution: f64) -> RegimeReport {
        self.regime_with(dilution, self.thresholds())
    }

    fn regime_with(&self, dilution: f64, thresholds: Thresholds) -> RegimeReport {
        let mut equilibria = vec![self.washout(dilution)];
        equilibria.extend(self.find_boundary_f1(dilution));
        equilibria.extend(self.find_boundary_f2(dilution));
        equilibria.extend(self.find_positive_equilibria(dilution));

        let case = thresholds.case(dilution);
        let positive = equilibria
            .iter()
            .filter(|e| e.kind == EquilibriumKind::FStar)
            .count();
        let predicted_attractors = if positive <= 1 {
            vec![case.unique_attractor()]
        } else {
            equilibria
                .iter()
                .filter(|e| e.is_stable_node())
                .map(|e| e.kind)
                .collect()
        };
        RegimeReport {
            dilution,
            thresholds,
            case,
            equilibria,
            predicted_attractors,
        }
    }
}
