//! The verify experiment: run the acceptance battery, print a criterion
//! table, and persist the results like any other experiment.

use std::time::Instant;

use clap::ValueEnum;
use serde_json::json;

use entirelab::acceptance::{self, Profile};

use crate::config::ExperimentConfig;
use crate::experiments::{write_outputs, Batch, RunError, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    /// Reduced sample sizes, minutes of runtime.
    Quick,
    /// Production sample sizes.
    Full,
}

pub fn run_verify(kind: ProfileKind, cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let profile = match kind {
        ProfileKind::Quick => Profile::quick(),
        ProfileKind::Full => Profile::full(),
    };
    let started = Instant::now();
    let results = acceptance::run_all(&profile).map_err(RunError::from)?;

    println!("{:<4} {:<52} status", "id", "criterion");
    let mut all_pass = true;
    for r in &results {
        let status = if r.pass { "pass" } else { "FAIL" };
        println!("{:<4} {:<52} {}", r.id, r.title, status);
        println!("     {}", r.detail);
        all_pass &= r.pass;
    }

    let rows = results
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                format!("\"{}\"", r.title),
                u8::from(r.pass).to_string(),
            ]
        })
        .collect();
    let criteria: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "title": r.title,
                "pass": r.pass,
                "detail": r.detail,
            })
        })
        .collect();
    let batch = Batch {
        header: "id,title,pass",
        rows,
        stats: json!({ "criteria": criteria }),
        flags: json!({ "all_criteria": all_pass }),
        pass: all_pass,
    };
    write_outputs(cfg, batch, started.elapsed().as_secs_f64())
}
