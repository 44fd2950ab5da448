//! Versioned JSON case documents.
//!
//! A case file is a single human-diffable JSON object carrying the network,
//! resources, ladders, scenarios, aggregators and per-section provenance
//! flags (`paper` for transcribed benchmark data, `calibrated` for values
//! this project supplies, `user` otherwise).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CaseIoError;
use crate::model::{validate_case, MarketCase};

pub const CASE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseFile {
    pub version: u32,
    #[serde(flatten)]
    pub case: CaseBody,
    /// Section path -> provenance flag.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

/// The case payload; field names define the on-disk schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseBody {
    pub network: crate::model::Network,
    pub units: Vec<crate::model::ProgrammableUnit>,
    pub renewables: Vec<crate::model::RenewableUnit>,
    pub loads: Vec<crate::model::LoadPoint>,
    pub ladders: Vec<crate::model::BidLadder>,
    pub scenarios: crate::model::ScenarioSet,
    pub aggregators: Vec<crate::model::Aggregator>,
}

impl CaseFile {
    pub fn from_case(case: &MarketCase, provenance: BTreeMap<String, String>) -> Self {
        CaseFile {
            version: CASE_SCHEMA_VERSION,
            case: CaseBody {
                network: case.network.clone(),
                units: case.units.clone(),
                renewables: case.renewables.clone(),
                loads: case.loads.clone(),
                ladders: case.ladders.clone(),
                scenarios: case.scenarios.clone(),
                aggregators: case.aggregators.clone(),
            },
            provenance,
        }
    }

    pub fn into_case(self) -> Result<MarketCase, CaseIoError> {
        let body = self.case;
        let case = MarketCase::new(
            body.network,
            body.units,
            body.renewables,
            body.loads,
            body.ladders,
            body.scenarios,
            body.aggregators,
        );
        let report = validate_case(&case);
        if !report.is_valid() {
            return Err(CaseIoError::Validation(report.fatals));
        }
        Ok(case)
    }
}

/// Load and validate a case document.
pub fn load_case(path: impl AsRef<Path>) -> Result<MarketCase, CaseIoError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CaseIoError::Io(path.as_ref().display().to_string(), e))?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<MarketCase, CaseIoError> {
    let file: CaseFile = serde_json::from_str(text).map_err(CaseIoError::Parse)?;
    if file.version != CASE_SCHEMA_VERSION {
        return Err(CaseIoError::Schema {
            found: file.version,
            supported: CASE_SCHEMA_VERSION,
        });
    }
    file.into_case()
}

/// Serialize a case (with provenance flags) as pretty JSON.
pub fn case_to_json(
    case: &MarketCase,
    provenance: BTreeMap<String, String>,
) -> Result<String, CaseIoError> {
    let file = CaseFile::from_case(case, provenance);
    let mut text = serde_json::to_string_pretty(&file).map_err(CaseIoError::Parse)?;
    text.push('\n');
    Ok(text)
}

pub fn write_case(
    case: &MarketCase,
    provenance: BTreeMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<(), CaseIoError> {
    let text = case_to_json(case, provenance)?;
    std::fs::write(path.as_ref(), text)
        .map_err(|e| CaseIoError::Io(path.as_ref().display().to_string(), e))
}

/// Provenance flags of a stored document (for round-trip checks).
pub fn read_provenance(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>, CaseIoError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CaseIoError::Io(path.as_ref().display().to_string(), e))?;
    let file: CaseFile = serde_json::from_str(&text).map_err(CaseIoError::Parse)?;
    Ok(file.provenance)
}
