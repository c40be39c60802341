//! Time integration of the full four-dimensional system and of the reduced
//! planar system, conservation laws, and attractor detection.

use serde::{Deserialize, Serialize};

use crate::equilibria::EquilibriumRecord;
use crate::error::{Error, Result};
use crate::growth::{ChemostatConfig, Species};
use crate::ode::{self, Options, Sampling, Termination, Tolerances};
use crate::planar::{in_closed_region, PlanarState};
use crate::system::Chemostat;

/// Default horizon, in units of `1/D`.
pub const DEFAULT_HORIZON: f64 = 200.0;
/// Relative radius used to decide that a trajectory has settled.
pub const SETTLE_RADIUS: f64 = 1e-5;

/// State of the full system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub s1: f64,
    pub x1: f64,
    pub s2: f64,
    pub x2: f64,
}

impl FullState {
    pub fn new(s1: f64, x1: f64, s2: f64, x2: f64) -> Self {
        Self { s1, x1, s2, x2 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s1, self.x1, self.s2, self.x2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// `(z1, z2) = (s1 + x1, s2 + x2 - x1)`.
    pub fn conserved(&self) -> (f64, f64) {
        (self.s1 + self.x1, self.s2 + self.x2 - self.x1)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "state components must be finite and nonnegative, got {a:?}"
            )))
        }
    }
}

/// A state of either system: its biomass pair and the speed of its own
/// vector field at the configured dilution rate.
pub trait Biomass {
    fn biomass(&self) -> PlanarState;
    fn speed(&self, system: &Chemostat) -> f64;
}

impl Biomass for FullState {
    fn biomass(&self) -> PlanarState {
        PlanarState::new(self.x1, self.x2)
    }

    fn speed(&self, system: &Chemostat) -> f64 {
        norm(&system.full_field(&self.as_array()))
    }
}

impl Biomass for PlanarState {
    fn biomass(&self) -> PlanarState {
        *self
    }

    fn speed(&self, system: &Chemostat) -> f64 {
        norm(&system.planar_velocity(system.dilution(), *self))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub termination: Termination,
}

impl<S: Copy> Trajectory<S> {
    fn from_solution<const N: usize>(
        sol: ode::Solution<N>,
        convert: impl Fn([f64; N]) -> S,
    ) -> Self {
        let mut times = Vec::with_capacity(sol.times.len());
        let mut states = Vec::with_capacity(sol.states.len());
        for (t, y) in sol.times.into_iter().zip(sol.states) {
            if times.last().is_some_and(|&prev| t <= prev) {
                continue;
            }
            times.push(t);
            states.push(convert(y));
        }
        Self {
            times,
            states,
            termination: sol.termination,
        }
    }

    pub fn final_state(&self) -> Option<S> {
        self.states.last().copied()
    }

    pub fn final_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl Trajectory<FullState> {
    /// Projection onto the biomass plane.
    pub fn project(&self) -> Trajectory<PlanarState> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(Biomass::biomass).collect(),
            termination: self.termination,
        }
    }

    /// Largest distance to the invariant set along the trajectory.
    pub fn max_omega_deviation(&self, config: &ChemostatConfig) -> f64 {
        self.states
            .iter()
            .map(|s| omega_deviation(config, s))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct IntegrationOptions {
    /// Final time; `DEFAULT_HORIZON / D` when absent.
    pub t_end: Option<f64>,
    pub tolerances: Tolerances,
    pub sampling: Sampling,
    /// Stop as soon as the trajectory settles on one of these points.
    pub settle_targets: Vec<PlanarState>,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            t_end: None,
            tolerances: Tolerances::default(),
            sampling: Sampling::Steps,
            settle_targets: Vec::new(),
            max_steps: Options::default().max_steps,
        }
    }
}

impl IntegrationOptions {
    pub fn until(t_end: f64) -> Self {
        Self {
            t_end: Some(t_end),
            ..Self::default()
        }
    }

    pub fn settling_on(mut self, equilibria: &[EquilibriumRecord]) -> Self {
        self.settle_targets = equilibria
            .iter()
            .filter(|e| e.is_stable_node())
            .map(|e| e.location)
            .collect();
        self
    }
}

/// `1e-5 * (1 + |p|)`.
pub fn settle_radius(p: PlanarState) -> f64 {
    SETTLE_RADIUS * (1.0 + p.norm())
}

/// `(s1_in - x1, x1, s2_in + x1 - x2, x2)`.
pub fn lift_to_full(config: &ChemostatConfig, planar: PlanarState) -> Result<FullState> {
    if !in_closed_region(config, planar) {
        return Err(Error::OutOfRegion {
            x1: planar.x1,
            x2: planar.x2,
        });
    }
    Ok(FullState::new(
        (config.s1_in - planar.x1).max(0.0),
        planar.x1,
        (config.s2_in + planar.x1 - planar.x2).max(0.0),
        planar.x2,
    ))
}

/// `max(|z1 - s1_in|, |z2 - s2_in|)`.
pub fn omega_deviation(config: &ChemostatConfig, state: &FullState) -> f64 {
    let (z1, z2) = state.conserved();
    (z1 - config.s1_in).abs().max((z2 - config.s2_in).abs())
}

/// Closed-form `(z1(t), z2(t))`: both relax to the inflow values at rate `D`.
pub fn conserved_at(config: &ChemostatConfig, initial: &FullState, t: f64) -> (f64, f64) {
    let (z1, z2) = initial.conserved();
    let decay = (-config.dilution * t).exp();
    (
        config.s1_in + (z1 - config.s1_in) * decay,
        config.s2_in + (z2 - config.s2_in) * decay,
    )
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Chemostat {
    /// Right-hand side of the full system at the configured dilution rate.
    pub fn full_field(&self, y: &[f64; 4]) -> [f64; 4] {
        let d = self.dilution();
        let [s1, x1, s2, x2] = *y;
        let g1 = self.rate(Species::One, s1.max(0.0), s2.max(0.0)) * x1;
        let g2 = self.rate(Species::Two, s1.max(0.0), s2.max(0.0)) * x2;
        [
            d * (self.s1_in() - s1) - g1,
            g1 - d * x1,
            d * (self.s2_in() - s2) - g2 + g1,
            g2 - d * x2,
        ]
    }

    /// Right-hand side of the planar system at `dilution`.
    pub fn planar_velocity(&self, dilution: f64, state: PlanarState) -> [f64; 2] {
        let PlanarState { x1, x2 } = state;
        [
            (self.phi_raw(Species::One, x1, x2) - dilution) * x1,
            (self.phi_raw(Species::Two, x1, x2) - dilution) * x2,
        ]
    }

    fn horizon(&self, options: &IntegrationOptions) -> Result<f64> {
        let t_end = options.t_end.unwrap_or(DEFAULT_HORIZON / self.dilution());
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                value: t_end,
            });
        }
        Ok(t_end)
    }

    fn ode_options(options: &IntegrationOptions) -> Options {
        Options {
            tolerances: options.tolerances,
            max_steps: options.max_steps,
            ..Options::default()
        }
    }

    pub fn integrate_full(
        &self,
        initial: FullState,
        options: &IntegrationOptions,
    ) -> Result<Trajectory<FullState>> {
        initial.validate()?;
        let t_end = self.horizon(options)?;
        let d = self.dilution();
        let targets = &options.settle_targets;
        let sol = ode::integrate(
            |_, y| self.full_field(y),
            0.0,
            initial.as_array(),
            t_end,
            &Self::ode_options(options),
            &options.sampling,
            |step| {
                let p = PlanarState::new(step.y[1], step.y[3]);
                targets.iter().any(|q| {
                    let r = settle_radius(*q);
                    p.distance(q) < r && norm(step.dydt) < r * d
                })
            },
        );
        Ok(Trajectory::from_solution(sol, FullState::from_array))
    }

    pub fn integrate_reduced(
        &self,
        initial: PlanarState,
        options: &IntegrationOptions,
    ) -> Result<Trajectory<PlanarState>> {
        if !(initial.x1.is_finite() && initial.x2.is_finite())
            || !in_closed_region(self.config(), initial)
        {
            return Err(Error::OutOfRegion {
                x1: initial.x1,
                x2: initial.x2,
            });
        }
        let t_end = self.horizon(options)?;
        let d = self.dilution();
        let targets = &options.settle_targets;
        let sol = ode::integrate(
            |_, y| self.planar_velocity(d, PlanarState::from(*y)),
            0.0,
            initial.as_array(),
            t_end,
            &Self::ode_options(options),
            &options.sampling,
            |step| {
                let p = PlanarState::from(*step.y);
                targets.iter().any(|q| {
                    let r = settle_radius(*q);
                    p.distance(q) < r && norm(step.dydt) < r * d
                })
            },
        );
        Ok(Trajectory::from_solution(sol, PlanarState::from))
    }

    /// The equilibrium the trajectory has settled on: its final biomass pair
    /// lies within `radius` of the equilibrium (by default
    /// [`settle_radius`] of it) and the speed of the trajectory's own vector
    /// field there is below `radius * D`.
    pub fn detect_attractor<'a, S: Biomass + Copy>(
        &self,
        trajectory: &Trajectory<S>,
        equilibria: &'a [EquilibriumRecord],
        radius: Option<f64>,
    ) -> Option<&'a EquilibriumRecord> {
        self.settled_on(trajectory.final_state()?, equilibria, radius)
    }

    pub(crate) fn settled_on<'a, S: Biomass>(
        &self,
        state: S,
        equilibria: &'a [EquilibriumRecord],
        radius: Option<f64>,
    ) -> Option<&'a EquilibriumRecord> {
        let d = self.dilution();
        let p = state.biomass();
        let speed = state.speed(self);
        equilibria
            .iter()
            .filter(|e| {
                let r = radius.unwrap_or_else(|| settle_radius(e.location));
                p.distance(&e.location) < r && speed < r * d
            })
            .min_by(|a, b| p.distance(&a.location).total_cmp(&p.distance(&b.location)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::EquilibriumKind;
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

    fn params11() -> MonodParams {
        MonodParams {
            m1: 8.0,
            k1: 1.0,
            l1: 1.5,
            m2: 7.0,
            k2: 1.0,
            l2: 1.0,
        }
    }

    fn attractor(sys: &Chemostat, start: PlanarState) -> Option<EquilibriumKind> {
        let report = sys.classify_regime(sys.dilution()).unwrap();
        let traj = sys
            .integrate_reduced(start, &IntegrationOptions::default())
            .unwrap();
        sys.detect_attractor(&traj, &report.equilibria, None)
            .map(|e| e.kind)
    }

    #[test]
    fn lift_examples() {
        let config = ChemostatConfig::new(0.5, 3.0, 3.0).unwrap();
        assert_eq!(
            lift_to_full(&config, PlanarState::ORIGIN).unwrap(),
            FullState::new(3.0, 0.0, 3.0, 0.0)
        );
        let r = 2f64.sqrt();
        let lifted = lift_to_full(&config, PlanarState::new(2.0 * r, 6.0 * r - 3.0)).unwrap();
        assert!((lifted.s1 - (3.0 - 2.0 * r)).abs() < 1e-15);
        assert!((lifted.s2 - (6.0 - 4.0 * r)).abs() < 1e-14);
        assert_eq!(lifted.biomass(), PlanarState::new(2.0 * r, 6.0 * r - 3.0));
        assert!(lift_to_full(&config, PlanarState::new(1.0, 4.5)).is_err());
    }

    #[test]
    fn equilibrium_is_stationary() {
        let sys = system(params10(), 0.5);
        let report = sys.classify_regime(0.5).unwrap();
        for eq in &report.equilibria {
            let traj = sys
                .integrate_reduced(eq.location, &IntegrationOptions::until(100.0))
                .unwrap();
            for s in &traj.states {
                assert!(
                    s.distance(&eq.location) <= 1e-9,
                    "{:?} drifted to {s:?}",
                    eq.kind
                );
            }
        }
    }

    #[test]
    fn reference_convergence() {
        let sys = system(params10(), 0.5);
        assert_eq!(
            attractor(&sys, PlanarState::new(0.1, 0.1)),
            Some(EquilibriumKind::FStar)
        );
        let sys = system(params10(), 1.3);
        assert_eq!(
            attractor(&sys, PlanarState::new(1.0, 2.0)),
            Some(EquilibriumKind::F0)
        );
        let sys = system(params11(), 1.5);
        assert_eq!(
            attractor(&sys, PlanarState::new(0.05, 0.05)),
            Some(EquilibriumKind::F0)
        );
        assert_eq!(
            attractor(&sys, PlanarState::new(2.5, 4.0)),
            Some(EquilibriumKind::FStar)
        );
    }

    #[test]
    fn axis_start_relaxes_to_boundary_equilibrium() {
        let sys = system(params10(), 0.6);
        let xbar = (37.0 - 649f64.sqrt()) / 6.0;
        let traj = sys
            .integrate_reduced(PlanarState::new(2.8, 0.0), &IntegrationOptions::default())
            .unwrap();
        let rise = traj
            .states
            .windows(2)
            .map(|w| w[1].x1 - w[0].x1)
            .fold(0.0, f64::max);
        assert!(rise <= 1e-7, "{rise}");
        assert!(traj.states.iter().all(|s| s.x2 == 0.0));
        assert!((traj.final_state().unwrap().x1 - xbar).abs() < 1e-7);
    }

    #[test]
    fn absent_species_stays_absent() {
        let sys = system(params10(), 0.5);
        let traj = sys
            .integrate_full(
                FullState::new(1.0, 0.0, 2.0, 0.5),
                &IntegrationOptions::until(50.0),
            )
            .unwrap();
        assert!(traj.states.iter().all(|s| s.x1 == 0.0));
    }

    #[test]
    fn conservation_follows_closed_form() {
        let sys = system(params10(), 0.5);
        let start = FullState::new(0.2, 1.5, 4.0, 0.3);
        let traj = sys
            .integrate_full(start, &IntegrationOptions::until(400.0))
            .unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let (z1, z2) = s.conserved();
            let (e1, e2) = conserved_at(sys.config(), &start, *t);
            assert!((z1 - e1).abs() <= 1e-8 && (z2 - e2).abs() <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn omega_is_invariant() {
        let sys = system(params10(), 0.5);
        let start = lift_to_full(sys.config(), PlanarState::new(1.0, 1.0)).unwrap();
        let traj = sys
            .integrate_full(start, &IntegrationOptions::until(50.0))
            .unwrap();
        assert!(traj.max_omega_deviation(sys.config()) <= 1e-8);
    }

    #[test]
    fn settle_targets_stop_early_and_times_increase() {
        let sys = system(params10(), 0.5);
        let report = sys.classify_regime(0.5).unwrap();
        let options = IntegrationOptions::default().settling_on(&report.equilibria);
        let traj = sys
            .integrate_reduced(PlanarState::new(0.1, 0.1), &options)
            .unwrap();
        assert_eq!(traj.termination, Termination::Converged);
        assert!(traj.final_time().unwrap() < 400.0);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert!(sys
            .detect_attractor(&traj, &report.equilibria, None)
            .is_some());
    }

    #[test]
    fn rejects_bad_initial_states() {
        let sys = system(params10(), 0.5);
        assert!(sys
            .integrate_full(
                FullState::new(-1.0, 0.0, 0.0, 0.0),
                &IntegrationOptions::default()
            )
            .is_err());
        assert!(sys
            .integrate_reduced(PlanarState::new(4.0, 0.0), &IntegrationOptions::default())
            .is_err());
        assert!(sys
            .integrate_reduced(PlanarState::new(1.0, 1.0), &IntegrationOptions::until(-1.0))
            .is_err());
    }
}
