//! Scenario files, bundled experiments and JSON reports around `ergoflow-core`.

pub mod catalog;
pub mod error;
pub mod run;
pub mod scenario;

pub use catalog::{bundled, list_scenarios, Catalog};
pub use error::{HarnessError, Result};
pub use run::{run_scenario, AnalysisOutput, RunOptions, RunReport};
pub use scenario::{parse_scenario, Scenario};

use std::path::Path;

/// A scenario file path, or the name of a bundled scenario.
pub fn load_scenario(target: &str) -> Result<Scenario> {
    let path = Path::new(target);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.display(), e))?;
        return parse_scenario(&text, &path.display().to_string());
    }
    bundled(target)
}
