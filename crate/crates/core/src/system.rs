use crate::error::{Error, Result};
use crate::growth::{ChemostatConfig, GrowthModel, HypothesisGrid, HypothesisReport, Species};

/// A growth model together with its operating conditions.
///
/// Most analyses live in `impl Chemostat` blocks spread over the crate's
/// modules. The dilution rate stored in the config is the default for
/// simulations; analyses that sweep the dilution rate take it explicitly.
#[derive(Clone, Debug)]
pub struct Chemostat {
    model: GrowthModel,
    config: ChemostatConfig,
    hypotheses_hold: bool,
}

impl Chemostat {
    /// Validates the configuration and samples the growth hypotheses on the
    /// default grid; a model that fails them is rejected.
    pub fn new(model: GrowthModel, config: ChemostatConfig) -> Result<Self> {
        let system = Self::new_unchecked(model, config)?;
        if !system.hypotheses_hold {
            let report = system.check_hypotheses();
            let first = &report.violations[0];
            return Err(Error::HypothesesViolated {
                count: report.violations.len(),
                first: first.to_string(),
            });
        }
        Ok(system)
    }

    /// Accepts a model that fails the hypothesis check. The configuration is
    /// still validated, and threshold computations will refuse to run.
    pub fn new_unchecked(model: GrowthModel, config: ChemostatConfig) -> Result<Self> {
        config.validate()?;
        let hypotheses_hold = model
            .check_hypotheses(&HypothesisGrid::for_inflows(config.s1_in, config.s2_in))
            .pass;
        Ok(Self {
            model,
            config,
            hypotheses_hold,
        })
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses_hold
    }

    pub fn model(&self) -> &GrowthModel {
        &self.model
    }

    pub fn config(&self) -> &ChemostatConfig {
        &self.config
    }

    pub fn s1_in(&self) -> f64 {
        self.config.s1_in
    }

    pub fn s2_in(&self) -> f64 {
        self.config.s2_in
    }

    pub fn dilution(&self) -> f64 {
        self.config.dilution
    }

    pub fn with_dilution(&self, dilution: f64) -> Result<Self> {
        Ok(Self {
            model: self.model.clone(),
            config: self.config.with_dilution(dilution)?,
            hypotheses_hold: self.hypotheses_hold,
        })
    }

    pub fn hypothesis_grid(&self) -> HypothesisGrid {
        HypothesisGrid::for_inflows(self.config.s1_in, self.config.s2_in)
    }

    pub fn check_hypotheses(&self) -> HypothesisReport {
        self.model.check_hypotheses(&self.hypothesis_grid())
    }

    #[inline]
    pub(crate) fn rate(&self, species: Species, s1: f64, s2: f64) -> f64 {
        self.model.rate(species, s1, s2)
    }

    #[inline]
    pub(crate) fn partials(&self, species: Species, s1: f64, s2: f64) -> (f64, f64) {
        self.model.partials(species, s1, s2)
    }
}
