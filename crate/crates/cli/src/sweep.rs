//! Parameter sweeps: one run per (value, seed) pair on a pool of threads.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crowdkit_core::outputs::RunOptions;
use crowdkit_core::{run_to_directory, Scenario};
use serde_json::Value;

pub struct Job {
    pub ordinal: usize,
    pub value: Value,
    pub seed: u64,
    pub scenario: Scenario,
    pub dir: PathBuf,
}

pub struct JobResult {
    pub error: Option<String>,
    pub absorbed: u64,
    pub remaining: u64,
}

/// Runs every job with at most `workers` concurrent simulations. Results
/// come back in job order.
pub fn run_all(jobs: &[Job], workers: usize, timestamp: &str) -> Vec<JobResult> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let options = RunOptions {
                    timestamp: Some(timestamp.to_owned()),
                    ..RunOptions::default()
                };
                let result = match run_to_directory(&job.scenario, &job.dir, &options) {
                    Ok(outcome) => JobResult {
                        error: None,
                        absorbed: outcome.summary.absorbed,
                        remaining: outcome.summary.remaining,
                    },
                    Err(e) => JobResult {
                        error: Some(e.to_string()),
                        absorbed: 0,
                        remaining: 0,
                    },
                };
                results.lock().unwrap()[k] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub const INDEX_HEADER: &str = "ordinal,key,value,seed,status,absorbed,remaining,directory,message";

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_owned()
    }
}

pub fn write_index(path: &Path, key: &str, jobs: &[Job], results: &[JobResult]) -> std::io::Result<()> {
    let mut out = String::from(INDEX_HEADER);
    out.push('\n');
    for (job, r) in jobs.iter().zip(results) {
        let value = match &job.value {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let dir = job.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let row = [
            job.ordinal.to_string(),
            csv_field(key),
            csv_field(&value),
            job.seed.to_string(),
            if r.error.is_none() { "ok" } else { "failed" }.to_owned(),
            r.absorbed.to_string(),
            r.remaining.to_string(),
            csv_field(&dir),
            csv_field(r.error.as_deref().unwrap_or("")),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}
