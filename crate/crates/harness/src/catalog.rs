//! Scenarios compiled into the binary.

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::run::SCHEMA_VERSION;
use crate::scenario::{parse_scenario, Scenario};

const BUNDLED: &[(&str, &str)] = &[
    ("gossip_two_cliques", include_str!("../scenarios/gossip_two_cliques.toml")),
    ("harmonic_oracle", include_str!("../scenarios/harmonic_oracle.toml")),
    ("harmonic_identity_prefix", include_str!("../scenarios/harmonic_identity_prefix.toml")),
    ("two_cliques_diagonal", include_str!("../scenarios/two_cliques_diagonal.toml")),
    ("broadcast_ring_harmonic", include_str!("../scenarios/broadcast_ring_harmonic.toml")),
    ("broadcast_ring_fast_decay", include_str!("../scenarios/broadcast_ring_fast_decay.toml")),
    ("link_failure_constant", include_str!("../scenarios/link_failure_constant.toml")),
    ("link_failure_vanishing", include_str!("../scenarios/link_failure_vanishing.toml")),
    ("permutation_counterexample", include_str!("../scenarios/permutation_counterexample.toml")),
    ("simplex_row_counterexample", include_str!("../scenarios/simplex_row_counterexample.toml")),
    ("identity_m2", include_str!("../scenarios/identity_m2.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub construct: String,
    pub description: String,
    pub analyses: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Catalog {
    pub schema_version: u32,
    pub scenarios: Vec<CatalogEntry>,
}

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let source = bundled_source(name).ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
    parse_scenario(source, &format!("<bundled>/{name}.toml"))
}

pub fn list_scenarios() -> Catalog {
    let scenarios = bundled_names()
        .map(|name| {
            let s = bundled(name).expect("bundled scenarios parse");
            CatalogEntry {
                name: s.name,
                construct: s.construct,
                description: s.description,
                analyses: s.analyses.iter().map(|a| a.label()).collect(),
            }
        })
        .collect();
    Catalog {
        schema_version: SCHEMA_VERSION,
        scenarios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_model;

    #[test]
    fn bundle_is_consistent() {
        let catalog = list_scenarios();
        assert!(catalog.scenarios.len() >= 8);
        for entry in &catalog.scenarios {
            assert!(!entry.construct.is_empty(), "{}", entry.name);
            let s = bundled(&entry.name).unwrap();
            assert_eq!(s.name, entry.name);
            build_model(&s.model, "model").unwrap();
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(bundled("nope"), Err(HarnessError::UnknownScenario(_))));
    }
}
