//! Case-file ingestion, bundled dataset access and result serialization.

mod casefile;
mod results;

pub use casefile::{
    case_to_json, load_case, parse_case, read_provenance, write_case, CaseFile,
    CASE_SCHEMA_VERSION,
};
pub use results::{
    costs_csv, dispatch_csv, equilibrium_prices_csv, write_results, Manifest, ManifestEntry,
    ResultBundle,
};
