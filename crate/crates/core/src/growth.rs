//! Growth-rate families and operating conditions.
//!
//! A [`GrowthModel`] wraps a pair of response functions `f1(s1, s2)` and
//! `f2(s1, s2)`. Species 1 grows on the substrate `s1` and is inhibited by
//! the intermediate product `s2`; species 2 grows on `s2` and is inhibited by
//! `s1`. The sign structure the rest of the crate relies on is:
//!
//! * `H1`: both rates are finite and nonnegative,
//! * `H2`: `f1(0, s2) = 0` and `f2(s1, 0) = 0`,
//! * `H3`: `df1/ds1 > 0`, `df1/ds2 < 0`,
//! * `H4`: `df2/ds1 < 0`, `df2/ds2 > 0`.
//!
//! [`GrowthModel::check_hypotheses`] samples these conditions on a grid.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two populations a rate belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::One, Species::Two];

    pub fn index(self) -> usize {
        match self {
            Species::One => 0,
            Species::Two => 1,
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::One => "1",
            Species::Two => "2",
        })
    }
}

/// A pluggable growth-rate family.
///
/// Implementors must be pure: the same inputs always give the same outputs.
/// Families that do not override [`GrowthFamily::partials`] get central
/// finite differences and are flagged in hypothesis reports.
pub trait GrowthFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Rate of `species` at substrate levels `(s1, s2)`, both nonnegative.
    fn rate(&self, species: Species, s1: f64, s2: f64) -> f64;

    /// `(d/ds1, d/ds2)` of [`GrowthFamily::rate`].
    fn partials(&self, species: Species, s1: f64, s2: f64) -> (f64, f64) {
        finite_difference_partials(|a, b| self.rate(species, a, b), s1, s2)
    }

    fn has_analytic_partials(&self) -> bool {
        false
    }
}

/// Central differences with step `1e-6 * (1 + |s|)`, one-sided at `s = 0`.
pub fn finite_difference_partials(f: impl Fn(f64, f64) -> f64, s1: f64, s2: f64) -> (f64, f64) {
    let diff = |g: &dyn Fn(f64) -> f64, s: f64| {
        let h = 1e-6 * (1.0 + s.abs());
        if s >= h {
            (g(s + h) - g(s - h)) / (2.0 * h)
        } else {
            (g(s + h) - g(s)) / h
        }
    };
    (diff(&|a| f(a, s2), s1), diff(&|b| f(s1, b), s2))
}

/// The six positive constants shared by the product-of-Monod families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodParams {
    pub m1: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    pub m2: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

impl MonodParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m1", self.m1),
            ("K1", self.k1),
            ("L1", self.l1),
            ("m2", self.m2),
            ("K2", self.k2),
            ("L2", self.l2),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// `f1 = m1 s1 / ((K1 + s1)(L1 + s2))`, `f2 = m2 s2 / ((K2 + s2)(L2 + s1))`.
///
/// Each rate is a Monod term in its own substrate times a hyperbolic
/// inhibition by the other one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonodProduct {
    pub params: MonodParams,
}

impl GrowthFamily for MonodProduct {
    fn name(&self) -> &str {
        "monod_product"
    }

    fn rate(&self, species: Species, s1: f64, s2: f64) -> f64 {
        let p = &self.params;
        match species {
            Species::One => p.m1 * s1 / ((p.k1 + s1) * (p.l1 + s2)),
            Species::Two => p.m2 * s2 / ((p.k2 + s2) * (p.l2 + s1)),
        }
    }

    fn partials(&self, species: Species, s1: f64, s2: f64) -> (f64, f64) {
        let p = &self.params;
        match species {
            Species::One => {
                let inhib = p.l1 + s2;
                let sat = p.k1 + s1;
                let d1 = p.m1 * p.k1 / (sat * sat * inhib);
                let d2 = -p.m1 * s1 / (sat * inhib * inhib);
                (d1, d2)
            }
            Species::Two => {
                let inhib = p.l2 + s1;
                let sat = p.k2 + s2;
                let d1 = -p.m2 * s2 / (sat * inhib * inhib);
                let d2 = p.m2 * p.k2 / (sat * sat * inhib);
                (d1, d2)
            }
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// Same as [`MonodProduct`] for species 1, but species 2 is limited by `s1`
/// and inhibited by `s2`: `f2 = m2 s1 / ((K2 + s1)(L2 + s2))`.
///
/// This family breaks `H2` and `H4` and exists so that the hypothesis checks
/// have a realistic failing case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonodSwapped {
    pub params: MonodParams,
}

impl GrowthFamily for MonodSwapped {
    fn name(&self) -> &str {
        "monod_swapped"
    }

    fn rate(&self, species: Species, s1: f64, s2: f64) -> f64 {
        let p = &self.params;
        match species {
            Species::One => p.m1 * s1 / ((p.k1 + s1) * (p.l1 + s2)),
            Species::Two => p.m2 * s1 / ((p.k2 + s1) * (p.l2 + s2)),
        }
    }
}

/// Shared handle to a growth family.
#[derive(Clone, Debug)]
pub struct GrowthModel {
    family: Arc<dyn GrowthFamily>,
}

impl GrowthModel {
    pub fn monod(params: MonodParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::custom(MonodProduct { params }))
    }

    pub fn custom(family: impl GrowthFamily + 'static) -> Self {
        Self {
            family: Arc::new(family),
        }
    }

    pub fn family_name(&self) -> &str {
        self.family.name()
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.family.has_analytic_partials()
    }

    pub fn eval_growth(&self, species: Species, s1: f64, s2: f64) -> Result<f64> {
        check_concentrations(s1, s2)?;
        Ok(self.family.rate(species, s1, s2))
    }

    pub fn eval_partials(&self, species: Species, s1: f64, s2: f64) -> Result<(f64, f64)> {
        check_concentrations(s1, s2)?;
        Ok(self.family.partials(species, s1, s2))
    }

    /// Unchecked evaluation for inner loops; arguments are clamped at zero.
    #[inline]
    pub(crate) fn rate(&self, species: Species, s1: f64, s2: f64) -> f64 {
        self.family.rate(species, s1.max(0.0), s2.max(0.0))
    }

    #[inline]
    pub(crate) fn partials(&self, species: Species, s1: f64, s2: f64) -> (f64, f64) {
        self.family.partials(species, s1.max(0.0), s2.max(0.0))
    }

    /// Samples `H1`..`H4` on `grid`. Violations are collected, never raised.
    pub fn check_hypotheses(&self, grid: &HypothesisGrid) -> HypothesisReport {
        let mut violations = Vec::new();
        let mut push = |hypothesis, species, s1, s2, observed| {
            violations.push(Violation {
                hypothesis,
                species,
                point: [s1, s2],
                observed,
            })
        };

        for s1 in grid.s1_values() {
            for s2 in grid.s2_values() {
                for species in Species::BOTH {
                    let r = self.family.rate(species, s1, s2);
                    if !(r.is_finite() && r >= 0.0) {
                        push(Hypothesis::H1, species, s1, s2, r);
                    }
                }

                if s1 == 0.0 {
                    let r = self.family.rate(Species::One, s1, s2);
                    if r != 0.0 {
                        push(Hypothesis::H2, Species::One, s1, s2, r);
                    }
                }
                if s2 == 0.0 {
                    let r = self.family.rate(Species::Two, s1, s2);
                    if r != 0.0 {
                        push(Hypothesis::H2, Species::Two, s1, s2, r);
                    }
                }

                if s1 > 0.0 && s2 > 0.0 {
                    let (a, b) = self.family.partials(Species::One, s1, s2);
                    if !(a > 0.0) {
                        push(Hypothesis::H3, Species::One, s1, s2, a);
                    }
                    if !(b < 0.0) {
                        push(Hypothesis::H3, Species::One, s1, s2, b);
                    }
                    let (c, d) = self.family.partials(Species::Two, s1, s2);
                    if !(c < 0.0) {
                        push(Hypothesis::H4, Species::Two, s1, s2, c);
                    }
                    if !(d > 0.0) {
                        push(Hypothesis::H4, Species::Two, s1, s2, d);
                    }
                }
            }
        }

        HypothesisReport {
            pass: violations.is_empty(),
            violations,
            finite_difference_partials: !self.family.has_analytic_partials(),
        }
    }
}

fn check_concentrations(s1: f64, s2: f64) -> Result<()> {
    // NaN fails both comparisons and is rejected too.
    if s1 >= 0.0 && s2 >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeConcentration { s1, s2 })
    }
}

/// Rectangular sampling grid `[0, s1_max] x [0, s2_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisGrid {
    pub s1_max: f64,
    pub s2_max: f64,
    pub n1: usize,
    pub n2: usize,
}

impl HypothesisGrid {
    pub const DEFAULT_SAMPLES: usize = 50;

    /// 50 x 50 over `[0, 2 s1_in] x [0, 2 (s1_in + s2_in)]`, which covers every
    /// substrate level reachable from the invariant set.
    pub fn for_inflows(s1_in: f64, s2_in: f64) -> Self {
        Self {
            s1_max: 2.0 * s1_in,
            s2_max: 2.0 * (s1_in + s2_in),
            n1: Self::DEFAULT_SAMPLES,
            n2: Self::DEFAULT_SAMPLES,
        }
    }

    fn axis(max: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| {
            if n > 1 {
                max * i as f64 / (n - 1) as f64
            } else {
                0.0
            }
        })
    }

    pub fn s1_values(&self) -> impl Iterator<Item = f64> {
        Self::axis(self.s1_max, self.n1)
    }

    pub fn s2_values(&self) -> impl Iterator<Item = f64> {
        Self::axis(self.s2_max, self.n2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub species: Species,
    pub point: [f64; 2],
    pub observed: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} on f{} at (s1 = {}, s2 = {}): observed {}",
            self.hypothesis, self.species, self.point[0], self.point[1], self.observed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// Set when the family supplied no analytic derivatives.
    pub finite_difference_partials: bool,
}

/// Unscaled yield constants of the dimensional model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Yields {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Yields {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Operating conditions of the (scaled) chemostat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChemostatConfig {
    pub dilution: f64,
    pub s1_in: f64,
    pub s2_in: f64,
    pub yields: Option<Yields>,
}

impl ChemostatConfig {
    pub fn new(dilution: f64, s1_in: f64, s2_in: f64) -> Result<Self> {
        let config = Self {
            dilution,
            s1_in,
            s2_in,
            yields: None,
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds a scaled configuration from dimensional inflow concentrations.
    pub fn from_unscaled(dilution: f64, s1_in: f64, s2_in: f64, yields: Yields) -> Result<Self> {
        let (s1, s2) = scale_parameters(s1_in, s2_in, yields)?;
        let config = Self {
            dilution,
            s1_in: s1,
            s2_in: s2,
            yields: Some(yields),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_dilution(self, dilution: f64) -> Result<Self> {
        let config = Self { dilution, ..self };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("D", self.dilution),
            ("s1_in", self.s1_in),
            ("s2_in", self.s2_in),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if let Some(y) = &self.yields {
            y.validate()?;
        }
        Ok(())
    }
}

/// Maps dimensional inflows to scaled ones: `s1_in = (k1 / k3) S1_in`,
/// `s2_in = S2_in`.
pub fn scale_parameters(s1_in: f64, s2_in: f64, yields: Yields) -> Result<(f64, f64)> {
    yields.validate()?;
    for (name, value) in [("S1_in", s1_in), ("S2_in", s2_in)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter { name, value });
        }
    }
    Ok((yields.k1 / yields.k3 * s1_in, s2_in))
}

type Builder = Box<dyn Fn(MonodParams) -> Result<GrowthModel> + Send + Sync>;

/// Name-to-constructor table used when reading configurations.
pub struct FamilyRegistry {
    builders: BTreeMap<String, Builder>,
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        builder: impl Fn(MonodParams) -> Result<GrowthModel> + Send + Sync + 'static,
    ) {
        self.builders.insert(name.into(), Box::new(builder));
    }

    pub fn build(&self, name: &str, params: MonodParams) -> Result<GrowthModel> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownFamily(name.to_owned()))?;
        builder(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register("monod_product", GrowthModel::monod);
        registry.register("monod_swapped", |params: MonodParams| {
            params.validate()?;
            Ok(GrowthModel::custom(MonodSwapped { params }))
        });
        registry
    }
}

impl fmt::Debug for FamilyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}
