//! Separatrices of saddle equilibria and basins of attraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::IntegrationOptions;
use crate::equilibria::{EquilibriumKind, EquilibriumRecord, RegimeReport, Stability};
use crate::error::{Error, Result};
use crate::growth::ChemostatConfig;
use crate::ode::{self, Options, Sampling, Tolerances};
use crate::planar::{in_closed_region, in_region, PlanarState};
use crate::system::Chemostat;

/// Seed offset along the stable direction, relative to `1 + |saddle|`.
pub const SEED_OFFSET: f64 = 1e-7;
/// Normal offset of separatrix probes.
pub const PROBE_OFFSET: f64 = 1e-3;
/// Basin cells are integrated up to this many units of `1/D`.
pub const BASIN_HORIZON: f64 = 500.0;
/// Arc-length cap of each half-branch, relative to `s1_in + s2_in`.
pub const ARC_LENGTH_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Departs along `+v` for the stable eigenvector `v`.
    Plus,
    Minus,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Plus => "plus",
            Self::Minus => "minus",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfBranch {
    pub branch: Branch,
    /// Starts at the saddle and moves away from it.
    pub points: Vec<PlanarState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub dilution: f64,
    pub saddle: EquilibriumRecord,
    pub branches: [HalfBranch; 2],
}

impl Separatrix {
    /// Both half-branches joined through the saddle: the minus branch
    /// reversed, then the plus branch.
    pub fn polyline(&self) -> Vec<PlanarState> {
        let [plus, minus] = &self.branches;
        let mut out: Vec<PlanarState> = minus.points.iter().rev().copied().collect();
        out.extend(plus.points.iter().skip(1));
        out
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance_to(&self, p: PlanarState) -> f64 {
        let line = self.polyline();
        if line.len() == 1 {
            return p.distance(&line[0]);
        }
        line.windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: PlanarState, a: PlanarState, b: PlanarState) -> f64 {
    let (dx, dy) = (b.x1 - a.x1, b.x2 - a.x2);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x1 - a.x1) * dx + (p.x2 - a.x2) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&PlanarState::new(a.x1 + t * dx, a.x2 + t * dy))
}

/// Unit eigenvector of a 2x2 matrix for the real eigenvalue `lambda`.
fn eigenvector(m: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = *m;
    let u = [b, lambda - a];
    let w = [lambda - d, c];
    let nu = u[0].hypot(u[1]);
    let nw = w[0].hypot(w[1]);
    let (v, n) = if nu >= nw { (u, nu) } else { (w, nw) };
    if n == 0.0 {
        // Multiple of the identity: any direction works.
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// The point where the segment from `inside` to `outside` leaves the closed
/// region, by bisection on membership.
fn clip_to_region(
    config: &ChemostatConfig,
    inside: PlanarState,
    outside: PlanarState,
) -> PlanarState {
    let (mut lo, mut hi) = (0.0, 1.0);
    let at = |t: f64| {
        PlanarState::new(
            inside.x1 + t * (outside.x1 - inside.x1),
            inside.x2 + t * (outside.x2 - inside.x2),
        )
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if in_closed_region(config, at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinLabel {
    /// Index into [`BasinGrid::attractors`].
    Attractor(usize),
    Unresolved,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub dilution: f64,
    pub config: ChemostatConfig,
    /// Cells along `x1` and along `x2`.
    pub resolution: [usize; 2],
    /// Stable nodes of the regime.
    pub attractors: Vec<EquilibriumRecord>,
    /// Row-major: index `j * n1 + i` is column `i` (along `x1`), row `j`.
    pub labels: Vec<BasinLabel>,
}

impl BasinGrid {
    /// Cells cover `[0, s1_in] x [0, s1_in + s2_in]`.
    pub fn cell_size(&self) -> (f64, f64) {
        cell_size(&self.config, self.resolution)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> PlanarState {
        cell_center(&self.config, self.resolution, i, j)
    }

    pub fn label(&self, i: usize, j: usize) -> BasinLabel {
        self.labels[j * self.resolution[0] + i]
    }

    /// Cells as `(center, label)`, row by row.
    pub fn cells(&self) -> impl Iterator<Item = (PlanarState, BasinLabel)> + '_ {
        let [n1, _] = self.resolution;
        self.labels
            .iter()
            .enumerate()
            .map(move |(k, l)| (self.cell_center(k % n1, k / n1), *l))
    }

    /// Printable name of a label. Attractors of the same kind are told apart
    /// by a `#k` suffix.
    pub fn label_name(&self, label: BasinLabel) -> String {
        match label {
            BasinLabel::Attractor(k) => {
                let kind = self.attractors[k].kind;
                let same = self.attractors.iter().filter(|a| a.kind == kind).count();
                if same > 1 {
                    format!("{kind}#{k}")
                } else {
                    kind.to_string()
                }
            }
            BasinLabel::Unresolved => "unresolved".into(),
            BasinLabel::Outside => "outside".into(),
        }
    }

    /// Attractor kinds that label at least one cell.
    pub fn kinds_present(&self) -> Vec<EquilibriumKind> {
        let mut kinds: Vec<EquilibriumKind> = self
            .labels
            .iter()
            .filter_map(|l| match l {
                BasinLabel::Attractor(k) => Some(self.attractors[*k].kind),
                _ => None,
            })
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Share of unresolved cells among those inside the region.
    pub fn unresolved_fraction(&self) -> f64 {
        let inside = self
            .labels
            .iter()
            .filter(|l| **l != BasinLabel::Outside)
            .count();
        if inside == 0 {
            return 0.0;
        }
        let unresolved = self
            .labels
            .iter()
            .filter(|l| **l == BasinLabel::Unresolved)
            .count();
        unresolved as f64 / inside as f64
    }
}

fn cell_size(config: &ChemostatConfig, [n1, n2]: [usize; 2]) -> (f64, f64) {
    (
        config.s1_in / n1 as f64,
        (config.s1_in + config.s2_in) / n2 as f64,
    )
}

fn cell_center(
    config: &ChemostatConfig,
    resolution: [usize; 2],
    i: usize,
    j: usize,
) -> PlanarState {
    let (w, h) = cell_size(config, resolution);
    PlanarState::new((i as f64 + 0.5) * w, (j as f64 + 0.5) * h)
}

/// A pair of points on opposite sides of a separatrix and where they end up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePair {
    pub left: PlanarState,
    pub right: PlanarState,
    pub left_label: Option<EquilibriumKind>,
    pub right_label: Option<EquilibriumKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub pairs: Vec<ProbePair>,
    /// Every left probe reached one attractor and every right probe another.
    pub clean: bool,
}

/// The saddle positive equilibrium of a regime with two or more attractors.
pub fn bistable_saddle(report: &RegimeReport) -> Option<&EquilibriumRecord> {
    if report.stable_nodes().count() < 2 {
        return None;
    }
    report.positive().find(|e| e.stability == Stability::Saddle)
}

impl Chemostat {
    /// Stable manifold of `saddle`, traced in reversed time from both sides
    /// until it leaves the closed region, stalls, or reaches the arc-length
    /// cap.
    pub fn compute_separatrix(
        &self,
        dilution: f64,
        saddle: &EquilibriumRecord,
    ) -> Result<Separatrix> {
        let ev = saddle.eigenvalues;
        if saddle.stability != Stability::Saddle || ev[0][1] != 0.0 || ev[1][1] != 0.0 {
            return Err(Error::NotASaddle {
                x1: saddle.location.x1,
                x2: saddle.location.x2,
            });
        }
        let config = self.config().with_dilution(dilution)?;
        let lambda_s = ev[0][0].min(ev[1][0]);
        let v = eigenvector(&saddle.jacobian, lambda_s);
        let origin = saddle.location;
        let eps = SEED_OFFSET * (1.0 + origin.norm());
        let scale = config.s1_in + config.s2_in;
        let cap = ARC_LENGTH_FACTOR * scale;
        let t_span = BASIN_HORIZON / dilution;
        let options = Options {
            tolerances: Tolerances::default(),
            nonnegative: false,
            ..Options::default()
        };
        let sampling = Sampling::Refined {
            max_gap: scale / 1000.0,
        };

        let trace = |branch: Branch| -> HalfBranch {
            let sign = if branch == Branch::Plus { 1.0 } else { -1.0 };
            let seed = [origin.x1 + sign * eps * v[0], origin.x2 + sign * eps * v[1]];
            let mut arc = 0.0;
            let mut prev = seed;
            let sol = ode::integrate(
                |_, y: &[f64; 2]| self.planar_velocity(dilution, PlanarState::from(*y)),
                0.0,
                seed,
                -t_span,
                &options,
                &sampling,
                |step| {
                    arc += (step.y[0] - prev[0]).hypot(step.y[1] - prev[1]);
                    prev = *step.y;
                    let p = PlanarState::from(*step.y);
                    let speed = step.dydt[0].hypot(step.dydt[1]);
                    !in_closed_region(&config, p)
                        || arc >= cap
                        || (arc > 10.0 * eps && speed < 1e-12 * (1.0 + p.norm()))
                },
            );
            let mut points = vec![origin];
            for y in sol.states {
                let p = PlanarState::from(y);
                if in_closed_region(&config, p) {
                    points.push(p);
                } else {
                    let last = *points.last().unwrap_or(&origin);
                    points.push(clip_to_region(&config, last, p));
                    break;
                }
            }
            HalfBranch { branch, points }
        };

        Ok(Separatrix {
            dilution,
            saddle: saddle.clone(),
            branches: [trace(Branch::Plus), trace(Branch::Minus)],
        })
    }

    /// Final attractor kind of a forward run from `p`, if it settles.
    fn settle_kind(
        &self,
        p: PlanarState,
        attractors: &[EquilibriumRecord],
    ) -> Option<EquilibriumKind> {
        self.settle_index(p, attractors).map(|k| attractors[k].kind)
    }

    fn settle_index(&self, p: PlanarState, attractors: &[EquilibriumRecord]) -> Option<usize> {
        let options = IntegrationOptions {
            t_end: Some(BASIN_HORIZON / self.dilution()),
            sampling: Sampling::Times(Vec::new()),
            ..IntegrationOptions::default()
        }
        .settling_on(attractors);
        let traj = self.integrate_reduced(p, &options).ok()?;
        let end = traj.final_state()?;
        let hit = self.settled_on(end, attractors, None)?;
        attractors.iter().position(|a| std::ptr::eq(a, hit))
    }

    /// Places `n` probe pairs at random points of the separatrix, offset by
    /// [`PROBE_OFFSET`] along the normal on either side, and integrates them
    /// forward. Probes outside the region are skipped and redrawn.
    pub fn probe_separatrix(
        &self,
        separatrix: &Separatrix,
        n: usize,
        seed: u64,
    ) -> Result<ProbeReport> {
        let sys = self.with_dilution(separatrix.dilution)?;
        let report = sys.regime(separatrix.dilution);
        let attractors: Vec<EquilibriumRecord> = report.stable_nodes().cloned().collect();
        let line = separatrix.polyline();
        let lengths: Vec<f64> = line.windows(2).map(|w| w[0].distance(&w[1])).collect();
        let total: f64 = lengths.iter().sum();
        if line.len() < 2 || total == 0.0 {
            return Ok(ProbeReport {
                pairs: Vec::new(),
                clean: false,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placements = Vec::with_capacity(n);
        let mut attempts = 0;
        while placements.len() < n && attempts < 100 * n.max(1) {
            attempts += 1;
            let mut target = rng.random::<f64>() * total;
            let mut k = 0;
            while k + 1 < lengths.len() && target > lengths[k] {
                target -= lengths[k];
                k += 1;
            }
            if lengths[k] == 0.0 {
                continue;
            }
            let (a, b) = (line[k], line[k + 1]);
            let t = (target / lengths[k]).clamp(0.0, 1.0);
            let (dx, dy) = ((b.x1 - a.x1) / lengths[k], (b.x2 - a.x2) / lengths[k]);
            let base = PlanarState::new(a.x1 + t * (b.x1 - a.x1), a.x2 + t * (b.x2 - a.x2));
            let left = PlanarState::new(base.x1 - PROBE_OFFSET * dy, base.x2 + PROBE_OFFSET * dx);
            let right = PlanarState::new(base.x1 + PROBE_OFFSET * dy, base.x2 - PROBE_OFFSET * dx);
            if in_region(sys.config(), left) && in_region(sys.config(), right) {
                placements.push((left, right));
            }
        }

        let pairs: Vec<ProbePair> = placements
            .par_iter()
            .map(|&(left, right)| ProbePair {
                left,
                right,
                left_label: sys.settle_kind(left, &attractors),
                right_label: sys.settle_kind(right, &attractors),
            })
            .collect();
        let first = pairs.first();
        let clean = first.is_some_and(|f| {
            f.left_label.is_some()
                && f.right_label.is_some()
                && f.left_label != f.right_label
                && pairs
                    .iter()
                    .all(|p| p.left_label == f.left_label && p.right_label == f.right_label)
        });
        Ok(ProbeReport { pairs, clean })
    }

    /// Labels the cell centres of an `n1 x n2` grid over
    /// `[0, s1_in] x [0, s1_in + s2_in]` by the stable node each one reaches.
    pub fn classify_basins(&self, dilution: f64, resolution: [usize; 2]) -> Result<BasinGrid> {
        let [n1, n2] = resolution;
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                value: n1.min(n2) as f64,
            });
        }
        let report = self.classify_regime(dilution)?;
        let sys = self.with_dilution(dilution)?;
        let attractors: Vec<EquilibriumRecord> = report.stable_nodes().cloned().collect();
        let config = *sys.config();

        let labels: Vec<BasinLabel> = (0..n1 * n2)
            .into_par_iter()
            .map(|k| {
                let p = cell_center(&config, resolution, k % n1, k / n1);
                if !in_region(&config, p) {
                    return BasinLabel::Outside;
                }
                match sys.settle_index(p, &attractors) {
                    Some(idx) => BasinLabel::Attractor(idx),
                    None => BasinLabel::Unresolved,
                }
            })
            .collect();

        Ok(BasinGrid {
            dilution,
            config,
            resolution,
            attractors,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{GrowthModel, MonodParams};

    fn system(params: MonodParams, d: f64) -> Chemostat {
        Chemostat::new(
            GrowthModel::monod(params).unwrap(),
            ChemostatConfig::new(d, 3.0, 3.0).unwrap(),
        )
        .unwrap()
    }

    fn params10() -> MonodParams {
        MonodParams {
            m1: 8.0,
            k1: 1.0,
            l1: 2.0,
            m2: 4.0,
            k2: 2.0,
            l2: 1.0,
        }
    }

    #[test]
    fn eigenvector_solves_the_eigenproblem() {
        let m = [[1.0, 2.0], [3.0, -4.0]];
        for lambda in [2.0, -5.0] {
            let v = eigenvector(&m, lambda);
            let r0 = m[0][0] * v[0] + m[0][1] * v[1] - lambda * v[0];
            let r1 = m[1][0] * v[0] + m[1][1] * v[1] - lambda * v[1];
            assert!(r0.abs() < 1e-14 && r1.abs() < 1e-14);
            assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_distance_cases() {
        let a = PlanarState::new(0.0, 0.0);
        let b = PlanarState::new(1.0, 0.0);
        assert_eq!(segment_distance(PlanarState::new(0.5, 2.0), a, b), 2.0);
        assert_eq!(segment_distance(PlanarState::new(-3.0, 4.0), a, b), 5.0);
        assert_eq!(
            segment_distance(PlanarState::new(1.0, 1.0), a, a),
            2f64.sqrt()
        );
    }

    #[test]
    fn separatrix_shape() {
        let sys = system(params10(), 0.95);
        let report = sys.classify_regime(0.95).unwrap();
        let saddle = bistable_saddle(&report).unwrap();
        let sep = sys.compute_separatrix(0.95, saddle).unwrap();
        for half in &sep.branches {
            assert_eq!(half.points[0], saddle.location);
            assert!(half.points[1].distance(&saddle.location) < 1e-6);
            assert!(half.points.len() > 10);
            assert!(half
                .points
                .iter()
                .all(|p| in_closed_region(sys.config(), *p)));
        }
        assert!(sep.distance_to(saddle.location) == 0.0);
    }

    #[test]
    fn separatrix_rejects_non_saddle() {
        let sys = system(params10(), 0.95);
        let report = sys.classify_regime(0.95).unwrap();
        let node = report.find(EquilibriumKind::F1Boundary).unwrap();
        assert!(matches!(
            sys.compute_separatrix(0.95, node),
            Err(Error::NotASaddle { .. })
        ));
    }

    #[test]
    fn probes_split_across_separatrix() {
        let sys = system(params10(), 0.95);
        let report = sys.classify_regime(0.95).unwrap();
        let sep = sys
            .compute_separatrix(0.95, bistable_saddle(&report).unwrap())
            .unwrap();
        let probes = sys.probe_separatrix(&sep, 10, 7).unwrap();
        assert_eq!(probes.pairs.len(), 10);
        assert!(probes.clean, "{:?}", probes.pairs);
    }

    #[test]
    fn unique_attractor_grid() {
        let sys = system(params10(), 0.5);
        let grid = sys.classify_basins(0.5, [20, 20]).unwrap();
        assert_eq!(grid.kinds_present(), vec![EquilibriumKind::FStar]);
        assert_eq!(grid.unresolved_fraction(), 0.0);
        assert_eq!(grid.label_name(grid.label(10, 10)), "F_star");
        // The upper-left triangle x2 > x1 + s2_in lies outside.
        assert_eq!(grid.label(0, 19), BasinLabel::Outside);
    }

    #[test]
    fn bistable_grid_has_both_basins() {
        let sys = system(params10(), 0.95);
        let grid = sys.classify_basins(0.95, [20, 20]).unwrap();
        assert_eq!(
            grid.kinds_present(),
            vec![EquilibriumKind::F1Boundary, EquilibriumKind::FStar]
        );
    }
}
