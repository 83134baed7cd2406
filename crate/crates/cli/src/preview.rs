use std::fmt::Write;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pipeline::prepare_samples;

/// CSV listing of the generated samples: drawn target, realized prevalence
/// and shift intensity.
pub fn preview(cfg: &ExperimentConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let (prepared, ..) = prepare_samples(cfg)?;
    let mut out = String::from("sample_id,target,prevalence,shift_intensity,with_replacement\n");
    for (id, s) in prepared.samples.iter().enumerate() {
        let pos = s.rows.iter().filter(|&&i| prepared.pool_labels[i] == 1).count();
        let prev = pos as f64 / s.rows.len() as f64;
        writeln!(out, "{id},{},{prev},{},{}", s.target, s.shift_intensity, s.with_replacement).expect("string write");
    }
    Ok(out)
}
