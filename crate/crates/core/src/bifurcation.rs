//! Dilution-rate sweeps, bifurcation events and tangencies.
//!
//! Each sample is summarised by its regime signature: the ordered list of
//! equilibrium kinds and stability classes. Adjacent samples with different
//! signatures bracket an event, which is then narrowed by bisection on the
//! signature itself.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{EquilibriumKind, EquilibriumRecord, RegimeCase, RegimeReport, Stability};
use crate::error::{Error, Result};
use crate::growth::Species;
use crate::planar::PlanarState;
use crate::system::Chemostat;

pub const DEFAULT_SAMPLES_PER_UNIT: f64 = 400.0;
/// Bracket width at which event refinement stops.
pub const EVENT_WIDTH: f64 = 1e-8;
/// Refined events closer than this are merged.
pub const EVENT_MERGE: f64 = 1e-7;
/// Distance from an event at which coalescing pairs are examined.
pub const WITNESS_OFFSET: f64 = 1e-6;
pub const TANGENCY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "F1_vanishes")]
    F1Vanishes,
    #[serde(rename = "F2_vanishes")]
    F2Vanishes,
    #[serde(rename = "saddle_node")]
    SaddleNode,
    #[serde(rename = "F1_exchanges_stability")]
    F1ExchangesStability,
    #[serde(rename = "F2_exchanges_stability")]
    F2ExchangesStability,
    #[serde(rename = "F0_exchanges")]
    F0Exchanges,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::F1Vanishes => "F1_vanishes",
            Self::F2Vanishes => "F2_vanishes",
            Self::SaddleNode => "saddle_node",
            Self::F1ExchangesStability => "F1_exchanges_stability",
            Self::F2ExchangesStability => "F2_exchanges_stability",
            Self::F0Exchanges => "F0_exchanges",
        }
    }
}

/// Equilibrium kinds and stability classes in report order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<(EquilibriumKind, Stability)>);

impl Signature {
    pub fn of(report: &RegimeReport) -> Self {
        Self(
            report
                .equilibria
                .iter()
                .map(|e| (e.kind, e.stability))
                .collect(),
        )
    }

    pub fn count(&self, kind: EquilibriumKind) -> usize {
        self.0.iter().filter(|(k, _)| *k == kind).count()
    }

    fn stability(&self, kind: EquilibriumKind) -> Option<Stability> {
        self.0.iter().find(|(k, _)| *k == kind).map(|(_, s)| *s)
    }

    /// The event separating two signatures, or `None` if they agree.
    pub fn transition(&self, other: &Signature) -> Option<EventKind> {
        use EquilibriumKind::*;
        if self == other {
            return None;
        }
        if self.count(F1Boundary) != other.count(F1Boundary) {
            return Some(EventKind::F1Vanishes);
        }
        if self.count(F2Boundary) != other.count(F2Boundary) {
            return Some(EventKind::F2Vanishes);
        }
        let (a, b) = (self.count(FStar), other.count(FStar));
        if a != b && a.abs_diff(b) % 2 == 0 {
            return Some(EventKind::SaddleNode);
        }
        if self.stability(F1Boundary) != other.stability(F1Boundary) {
            return Some(EventKind::F1ExchangesStability);
        }
        if self.stability(F2Boundary) != other.stability(F2Boundary) {
            return Some(EventKind::F2ExchangesStability);
        }
        if self.stability(F0) != other.stability(F0) {
            return Some(EventKind::F0Exchanges);
        }
        // Only the positive equilibria changed (an odd count change with no
        // boundary involvement, or a stability change among them).
        Some(EventKind::SaddleNode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    #[serde(rename = "D")]
    pub dilution: f64,
    pub case: RegimeCase,
    pub equilibria: Vec<EquilibriumRecord>,
}

/// An equilibrium taking part in an event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: EquilibriumKind,
    #[serde(flatten)]
    pub location: PlanarState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    #[serde(rename = "D")]
    pub dilution: f64,
    pub kind: EventKind,
    /// Final bracket `[lo, hi]` around the event.
    pub bracket: [f64; 2],
    pub witnesses: Vec<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDiagram {
    pub samples: Vec<BranchSample>,
    pub events: Vec<BifurcationEvent>,
}

impl BranchDiagram {
    pub fn dilutions(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.dilution)
    }
}

/// The closest pair of equilibria next to an event, on the side where the
/// pair exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coalescence {
    pub event: f64,
    pub kind: EventKind,
    /// Dilution rate at which the pair was examined.
    pub dilution: f64,
    pub pair: [EquilibriumRecord; 2],
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub dilution: f64,
    /// Midpoint of the two merging positive equilibria.
    pub location: PlanarState,
    /// `(F1', F2')` at the coalescence point.
    pub slopes: [f64; 2],
}

/// `n` rounded up from [`DEFAULT_SAMPLES_PER_UNIT`] per unit of `D`.
pub fn default_samples(d_min: f64, d_max: f64) -> usize {
    ((DEFAULT_SAMPLES_PER_UNIT * (d_max - d_min)).ceil() as usize + 1).max(2)
}

struct Transition {
    lo: f64,
    hi: f64,
}

impl Chemostat {
    fn signature_at(&self, dilution: f64) -> Signature {
        Signature::of(&self.regime(dilution))
    }

    /// Classifies `n_samples` evenly spaced dilution rates over
    /// `[d_min, d_max]` and refines every signature change.
    pub fn sweep(&self, d_min: f64, d_max: f64, n_samples: usize) -> Result<BranchDiagram> {
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "d_min",
                value: d_min,
            });
        }
        if !(d_max > d_min && d_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "d_max",
                value: d_max,
            });
        }
        if n_samples < 2 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                value: n_samples as f64,
            });
        }
        self.compute_thresholds()?;

        let ds: Vec<f64> = (0..n_samples)
            .map(|i| {
                if i + 1 == n_samples {
                    d_max
                } else {
                    d_min + (d_max - d_min) * i as f64 / (n_samples - 1) as f64
                }
            })
            .collect();
        let reports: Vec<RegimeReport> = ds.par_iter().map(|&d| self.regime(d)).collect();
        let signatures: Vec<Signature> = reports.iter().map(Signature::of).collect();

        let mut transitions: Vec<Transition> = (0..n_samples - 1)
            .into_par_iter()
            .filter(|&i| signatures[i] != signatures[i + 1])
            .flat_map_iter(|i| {
                let mut out = Vec::new();
                self.refine(
                    ds[i],
                    ds[i + 1],
                    signatures[i].clone(),
                    signatures[i + 1].clone(),
                    0,
                    &mut out,
                );
                out
            })
            .collect();
        transitions.sort_by(|a, b| a.lo.total_cmp(&b.lo));

        // Merge transitions that refine to the same point, then judge each
        // group by the signatures on its outer sides.
        let mut groups: Vec<Transition> = Vec::new();
        for t in transitions {
            match groups.last_mut() {
                Some(g) if t.lo - g.hi < EVENT_MERGE => g.hi = g.hi.max(t.hi),
                _ => groups.push(t),
            }
        }
        let events = groups
            .into_par_iter()
            .filter_map(|g| {
                let below = self.signature_at(g.lo);
                let above = self.signature_at(g.hi);
                let kind = below.transition(&above)?;
                let dilution = 0.5 * (g.lo + g.hi);
                let witnesses = self
                    .coalescence(dilution, kind)
                    .map(|c| {
                        c.pair
                            .iter()
                            .map(|e| Witness {
                                kind: e.kind,
                                location: e.location,
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                Some(BifurcationEvent {
                    dilution,
                    kind,
                    bracket: [g.lo, g.hi],
                    witnesses,
                })
            })
            .collect();

        let samples = reports
            .into_iter()
            .map(|r| BranchSample {
                dilution: r.dilution,
                case: r.case,
                equilibria: r.equilibria,
            })
            .collect();
        Ok(BranchDiagram { samples, events })
    }

    /// Bisection on the signature. A third signature met at the midpoint
    /// splits the bracket into two events.
    fn refine(
        &self,
        mut lo: f64,
        mut hi: f64,
        sig_lo: Signature,
        sig_hi: Signature,
        depth: usize,
        out: &mut Vec<Transition>,
    ) {
        while hi - lo > EVENT_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sig_mid = self.signature_at(mid);
            if sig_mid == sig_lo {
                lo = mid;
            } else if sig_mid == sig_hi {
                hi = mid;
            } else if depth < 8 {
                self.refine(lo, mid, sig_lo, sig_mid.clone(), depth + 1, out);
                self.refine(mid, hi, sig_mid, sig_hi, depth + 1, out);
                return;
            } else {
                hi = mid;
            }
        }
        out.push(Transition { lo, hi });
    }

    fn positive_count(&self, dilution: f64) -> usize {
        self.crossings(dilution).len()
    }

    /// Closest pair of equilibria at `WITNESS_OFFSET` from `event`, taken on
    /// the side that has more equilibria.
    pub fn coalescence(&self, event: f64, kind: EventKind) -> Option<Coalescence> {
        let below = self.regime(event - WITNESS_OFFSET);
        let above = self.regime(event + WITNESS_OFFSET);
        let side = if below.equilibria.len() >= above.equilibria.len() {
            below
        } else {
            above
        };
        let eqs = &side.equilibria;
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..eqs.len() {
            for j in i + 1..eqs.len() {
                let d = eqs[i].location.distance(&eqs[j].location);
                if best.is_none_or(|(_, _, b)| d < b) {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, separation) = best?;
        Some(Coalescence {
            event,
            kind,
            dilution: side.dilution,
            pair: [eqs[i].clone(), eqs[j].clone()],
            separation,
        })
    }

    /// Coalescing pairs for every event of a diagram.
    pub fn coalescence_witnesses(&self, diagram: &BranchDiagram) -> Vec<Coalescence> {
        diagram
            .events
            .iter()
            .filter_map(|e| self.coalescence(e.dilution, e.kind))
            .collect()
    }

    /// Dilution rate at which two positive equilibria merge inside
    /// `[a, b]`. Requires the positive-equilibrium counts at the endpoints to
    /// differ by a nonzero even number.
    pub fn find_tangency(&self, a: f64, b: f64) -> Option<Tangency> {
        let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
        if !(lo > 0.0) {
            return None;
        }
        let n_lo = self.positive_count(lo);
        let n_hi = self.positive_count(hi);
        if n_lo == n_hi || n_lo.abs_diff(n_hi) % 2 == 1 {
            return None;
        }
        while hi - lo > TANGENCY_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.positive_count(mid) == n_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let richer = if n_lo > n_hi { lo } else { hi };
        let crossings = self.crossings(richer);
        let pair = crossings.windows(2).min_by(|p, q| {
            p[0].location
                .distance(&p[1].location)
                .total_cmp(&q[0].location.distance(&q[1].location))
        })?;
        let location = PlanarState::new(
            0.5 * (pair[0].location.x1 + pair[1].location.x1),
            0.5 * (pair[0].location.x2 + pair[1].location.x2),
        );
        let dilution = 0.5 * (lo + hi);
        let slopes = [
            self.level_set_slope(Species::One, location)?,
            self.level_set_slope(Species::Two, location)?,
        ];
        Some(Tangency {
            dilution,
            location,
            slopes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{ChemostatConfig, GrowthModel, MonodParams};

    fn system(params: MonodParams) -> Chemostat {
        Chemostat::new(
            GrowthModel::monod(params).unwrap(),
            ChemostatConfig::new(0.5, 3.0, 3.0).unwrap(),
        )
        .unwrap()
    }

    fn system10() -> Chemostat {
        system(MonodParams {
            m1: 8.0,
            k1: 1.0,
            l1: 2.0,
            m2: 4.0,
            k2: 2.0,
            l2: 1.0,
        })
    }

    fn system11() -> Chemostat {
        system(MonodParams {
            m1: 8.0,
            k1: 1.0,
            l1: 1.5,
            m2: 7.0,
            k2: 1.0,
            l2: 1.0,
        })
    }

    #[test]
    fn single_regime_has_no_events() {
        let sys = system10();
        let diagram = sys.sweep(0.1, 0.5, default_samples(0.1, 0.5)).unwrap();
        assert!(diagram.events.is_empty());
        assert_eq!(diagram.samples.len(), 161);
    }

    #[test]
    fn reference_events() {
        let sys = system10();
        let diagram = sys.sweep(0.1, 1.5, default_samples(0.1, 1.5)).unwrap();
        let got: Vec<(f64, EventKind)> = diagram
            .events
            .iter()
            .map(|e| (e.dilution, e.kind))
            .collect();
        let expected = [
            (0.6, EventKind::F2Vanishes),
            (8.0 / 9.0, EventKind::F1ExchangesStability),
            (1.0, EventKind::SaddleNode),
            (1.2, EventKind::F1Vanishes),
        ];
        assert_eq!(got.len(), expected.len(), "{got:?}");
        for ((d, k), (ed, ek)) in got.iter().zip(expected) {
            assert!((d - ed).abs() < 1e-6, "{d} vs {ed}");
            assert_eq!(*k, ek);
        }
    }

    #[test]
    fn transcritical_witnesses() {
        let sys = system10();
        let cases = [
            (
                0.6,
                EventKind::F2Vanishes,
                [EquilibriumKind::F0, EquilibriumKind::F2Boundary],
            ),
            (
                8.0 / 9.0,
                EventKind::F1ExchangesStability,
                [EquilibriumKind::F1Boundary, EquilibriumKind::FStar],
            ),
            (
                1.2,
                EventKind::F1Vanishes,
                [EquilibriumKind::F0, EquilibriumKind::F1Boundary],
            ),
        ];
        for (d, kind, mut kinds) in cases {
            let c = sys.coalescence(d, kind).unwrap();
            let mut got = [c.pair[0].kind, c.pair[1].kind];
            got.sort();
            kinds.sort();
            assert_eq!(got, kinds, "at {d}");
            assert!(c.separation < 1e-4, "{d}: {}", c.separation);
        }
    }

    #[test]
    fn saddle_node_pair_is_positive() {
        let sys = system10();
        let c = sys.coalescence(1.0, EventKind::SaddleNode).unwrap();
        assert!(c.pair.iter().all(|e| e.kind == EquilibriumKind::FStar));
        assert!(c.dilution < 1.0);
    }

    #[test]
    fn tangency_reference() {
        let sys = system10();
        let t = sys.find_tangency(0.95, 1.05).unwrap();
        assert!((t.dilution - 1.0).abs() < 1e-6);
        assert!((t.location.x1 - 2.0).abs() < 1e-3);
        assert!((t.location.x2 - 3.0).abs() < 1e-3);
        assert!((t.slopes[0] - t.slopes[1]).abs() < 1e-2);
        assert!(sys.find_tangency(0.3, 0.5).is_none());
        // One positive equilibrium is lost across 8/9: not a tangency.
        assert!(sys.find_tangency(0.8, 0.95).is_none());
    }

    #[test]
    fn tangency_second_parameter_set() {
        let sys = system11();
        let t = sys.find_tangency(1.5, 1.7).unwrap();
        assert!(t.dilution > 1.6 && t.dilution < 1.7);
        assert_eq!(sys.positive_count(t.dilution - 1e-6), 2);
        assert_eq!(sys.positive_count(t.dilution + 1e-6), 0);
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let sys = system10();
        assert!(sys.sweep(0.5, 0.5, 10).is_err());
        assert!(sys.sweep(0.0, 0.5, 10).is_err());
        assert!(sys.sweep(0.1, 0.5, 1).is_err());
    }

    #[test]
    fn event_serialisation_names() {
        assert_eq!(
            serde_json::to_string(&EventKind::SaddleNode).unwrap(),
            "\"saddle_node\""
        );
        assert_eq!(EventKind::F0Exchanges.as_str(), "F0_exchanges");
    }
}
