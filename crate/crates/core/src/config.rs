//! JSON configuration documents and command-line state vectors.
//!
//! ```json
//! {"growth": {"family": "monod_product", "m1": 8, "K1": 1, "L1": 2,
//!             "m2": 4, "K2": 2, "L2": 1},
//!  "D": 0.5, "s1_in": 3, "s2_in": 3,
//!  "yields": {"k1": 1, "k2": 1, "k3": 1}}
//! ```
//!
//! Without `yields` the inflow concentrations are taken as scaled values.
//! With `yields` they are dimensional and go through
//! [`scale_parameters`](crate::growth::scale_parameters).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::FullState;
use crate::error::{Error, Result};
use crate::growth::{ChemostatConfig, FamilyRegistry, GrowthModel, MonodParams, Yields};
use crate::planar::PlanarState;
use crate::system::Chemostat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub family: String,
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

impl GrowthSpec {
    pub fn params(&self) -> MonodParams {
        MonodParams {
            m1: self.m1,
            k1: self.k1,
            l1: self.l1,
            m2: self.m2,
            k2: self.k2,
            l2: self.l2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub growth: GrowthSpec,
    #[serde(rename = "D")]
    pub dilution: f64,
    pub s1_in: f64,
    pub s2_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yields: Option<Yields>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn model(&self, registry: &FamilyRegistry) -> Result<GrowthModel> {
        registry.build(&self.growth.family, self.growth.params())
    }

    pub fn chemostat_config(&self) -> Result<ChemostatConfig> {
        match self.yields {
            Some(y) => ChemostatConfig::from_unscaled(self.dilution, self.s1_in, self.s2_in, y),
            None => ChemostatConfig::new(self.dilution, self.s1_in, self.s2_in),
        }
    }

    /// Builds the system, rejecting models that fail the hypothesis check.
    pub fn build(&self, registry: &FamilyRegistry) -> Result<Chemostat> {
        Chemostat::new(self.model(registry)?, self.chemostat_config()?)
    }

    /// Builds the system even when the hypotheses fail.
    pub fn build_unchecked(&self, registry: &FamilyRegistry) -> Result<Chemostat> {
        Chemostat::new_unchecked(self.model(registry)?, self.chemostat_config()?)
    }
}

/// Deserialises JSON, reporting syntax and schema errors with their line
/// and column.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })
}

/// Parses `N` comma-separated finite, nonnegative numbers.
pub fn parse_state<const N: usize>(text: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::InvalidInput(format!(
            "expected {N} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        let v: f64 = part
            .parse()
            .map_err(|_| Error::InvalidInput(format!("`{part}` is not a number")))?;
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("`{part}` is not finite")));
        }
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("negative component {v}")));
        }
        *slot = v;
    }
    Ok(out)
}

/// `s1,x1,s2,x2`.
pub fn parse_full_state(text: &str) -> Result<FullState> {
    parse_state::<4>(text).map(FullState::from_array)
}

/// `x1,x2`.
pub fn parse_planar_state(text: &str) -> Result<PlanarState> {
    parse_state::<2>(text).map(PlanarState::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"{"growth":{"family":"monod_product","m1":8,"K1":1,"L1":2,"m2":4,"K2":2,"L2":1},"D":0.5,"s1_in":3,"s2_in":3,"yields":{"k1":1,"k2":1,"k3":1}}"#;

    #[test]
    fn reference_document() {
        let doc = ConfigDocument::parse(REFERENCE).unwrap();
        assert_eq!(doc.growth.l1, 2.0);
        let sys = doc.build(&FamilyRegistry::default()).unwrap();
        assert_eq!(sys.s1_in(), 3.0);
        assert_eq!(sys.dilution(), 0.5);
    }

    #[test]
    fn yields_scale_the_first_inflow() {
        let text = REFERENCE.replace(r#""k1":1,"k2":1"#, r#""k1":2,"k2":1"#);
        let doc = ConfigDocument::parse(&text).unwrap();
        let config = doc.chemostat_config().unwrap();
        assert_eq!((config.s1_in, config.s2_in), (6.0, 3.0));
        let text = REFERENCE.replace(r#","yields":{"k1":1,"k2":1,"k3":1}"#, "");
        let config = ConfigDocument::parse(&text)
            .unwrap()
            .chemostat_config()
            .unwrap();
        assert_eq!(config.yields, None);
    }

    #[test]
    fn unknown_fields_rejected_with_position() {
        let text = "{\n  \"growth\": {\"family\": \"monod_product\", \"m1\": 8, \"K1\": 1, \"L1\": 2, \"m2\": 4, \"K2\": 2, \"L2\": 1, \"extra\": 0},\n  \"D\": 0.5, \"s1_in\": 3, \"s2_in\": 3}";
        match ConfigDocument::parse(text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("extra"));
            }
            other => panic!("{other:?}"),
        }
        let text = REFERENCE.replace("\"D\"", "\"dilution\"");
        assert!(matches!(
            ConfigDocument::parse(&text),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn syntax_error_position() {
        match ConfigDocument::parse("{\n\"growth\": [,\n}") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 12)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_rejected() {
        let text = REFERENCE.replace("\"m1\":8", "\"m1\":-1");
        let doc = ConfigDocument::parse(&text).unwrap();
        assert!(doc.build(&FamilyRegistry::default()).is_err());
        let text = REFERENCE.replace("\"D\":0.5", "\"D\":0");
        let doc = ConfigDocument::parse(&text).unwrap();
        assert!(doc.chemostat_config().is_err());
        let text = REFERENCE.replace("monod_product", "tessier");
        let doc = ConfigDocument::parse(&text).unwrap();
        assert!(matches!(
            doc.build(&FamilyRegistry::default()),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn swapped_family_builds_unchecked_only() {
        let text = REFERENCE.replace("monod_product", "monod_swapped");
        let doc = ConfigDocument::parse(&text).unwrap();
        let registry = FamilyRegistry::default();
        assert!(matches!(
            doc.build(&registry),
            Err(Error::HypothesesViolated { .. })
        ));
        assert!(!doc.build_unchecked(&registry).unwrap().hypotheses_hold());
    }

    #[test]
    fn state_vectors() {
        assert_eq!(
            parse_full_state(" 3, 0,3 ,0 ").unwrap(),
            FullState::new(3.0, 0.0, 3.0, 0.0)
        );
        assert_eq!(
            parse_planar_state("0.1,0.1").unwrap(),
            PlanarState::new(0.1, 0.1)
        );
        assert!(parse_planar_state("0.1").is_err());
        assert!(parse_planar_state("0.1,-2").is_err());
        assert!(parse_planar_state("0.1,nan").is_err());
        assert!(parse_planar_state("0.1,inf").is_err());
        assert!(parse_full_state("a,b,c,d").is_err());
    }
}
