use std::fs;
use std::path::Path;

use shiftkit::data::{LabeledSet, SplitSpec};
use shiftkit::models::{fit, Hyperparams, ModelKind, DEFAULT_THRESHOLD};
use shiftkit::oracles::{verify_reductions, LemmaReport, OracleContext};

use crate::error::CliError;
use crate::pipeline::load_dataset;

/// Fits on a stratified half of the data and runs the oracle reduction
/// checks on the other half.
pub fn lemma_check_data(data: &LabeledSet, kind: ModelKind, params: &Hyperparams, seed: u64) -> Result<LemmaReport, CliError> {
    let spec = SplitSpec::new(0.5, 0.25, 0.25, seed)?;
    let (train, a, b) = shiftkit::data::split_stratified(data, &spec)?;
    let model = fit(kind, &train, params)?;
    let ctx = OracleContext::from_model(&model, &a.concat(&b)?, DEFAULT_THRESHOLD)?;
    Ok(verify_reductions(&ctx)?)
}

/// Runs the checks on a CSV dataset, writes the JSON report to `out` when
/// given, and fails when any residual exceeds the tolerance.
pub fn lemma_check(
    data_path: &Path,
    kind: ModelKind,
    params: &Hyperparams,
    seed: u64,
    out: Option<&Path>,
) -> Result<LemmaReport, CliError> {
    let data = load_dataset(data_path)?;
    let report = lemma_check_data(&data, kind, params, seed)?;
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(path, report.to_json() + "\n").map_err(|e| CliError::io(path, e))?;
    }
    if !report.all_passed() {
        return Err(CliError::LemmaFailure { max_residual: report.max_residual() });
    }
    Ok(report)
}
