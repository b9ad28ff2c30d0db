//! Markdown summary of a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::pipeline::{RunSummary, CONFIG_FILE, FAILED_MARKER, REPORT_MD, SUMMARY_JSON, TIMINGS_CSV};

fn inventory(dir: &Path) -> Vec<String> {
    let mut files: Vec<String> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| name != REPORT_MD)
        .collect();
    files.sort();
    files
}

/// Builds the report from whatever the run left behind. Never fails: missing
/// pieces are reported as missing.
pub fn emit_report(dir: &Path) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Run report\n");

    if let Ok(failed) = fs::read_to_string(dir.join(FAILED_MARKER)) {
        let stage = failed
            .lines()
            .find_map(|l| l.strip_prefix("stage: "))
            .unwrap_or("unknown");
        let _ = writeln!(md, "**Status: FAILED** in stage `{stage}`\n");
        let _ = writeln!(md, "```\n{}```\n", failed);
    } else if dir.join(SUMMARY_JSON).exists() {
        let _ = writeln!(md, "**Status: completed**\n");
    } else {
        let _ = writeln!(md, "**Status: incomplete** (no `{SUMMARY_JSON}`)\n");
    }

    let _ = writeln!(md, "## Configuration\n");
    match fs::read_to_string(dir.join(CONFIG_FILE)) {
        Ok(cfg) => {
            let _ = writeln!(md, "From `{CONFIG_FILE}`:\n\n```toml\n{}```\n", cfg);
        }
        Err(_) => {
            let _ = writeln!(md, "`{CONFIG_FILE}` is missing.\n");
        }
    }

    let summary: Option<RunSummary> = fs::read_to_string(dir.join(SUMMARY_JSON))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    if let Some(s) = &summary {
        let _ = writeln!(md, "## Model\n");
        let _ = writeln!(md, "- mean: {}", s.model.mean);
        let _ = writeln!(md, "- covariance: {}", s.model.kernel);
        if let Some(bic) = s.bic {
            let _ = writeln!(md, "- BIC: {bic}");
        }
        let _ = writeln!(md, "- flagged estimates: {} of {}\n", s.n_flagged, s.n_points);

        let _ = writeln!(md, "## Channels\n");
        let _ = writeln!(
            md,
            "| channel | RMSE | held-out coverage | latent coverage | noise variance | signal variance | length scales | beta |"
        );
        let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
        for c in &s.channels {
            let coverage = c.heldout_coverage.map_or("n/a".to_string(), |v| v.to_string());
            let scales: Vec<String> = c.fit.length_scales.iter().map(f64::to_string).collect();
            let beta: Vec<String> = c.fit.beta.iter().map(f64::to_string).collect();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                c.channel.key(),
                c.rmse,
                coverage,
                c.latent_coverage,
                c.fit.noise_variance,
                c.fit.signal_variance,
                scales.join(", "),
                beta.join(", ")
            );
        }
        let _ = writeln!(md);
    }

    let _ = writeln!(md, "## Files\n");
    for f in inventory(dir) {
        let note = if f == TIMINGS_CSV { " (wall-clock times, varies between runs)" } else { "" };
        let _ = writeln!(md, "- [{f}]({f}){note}");
    }
    md
}

pub fn write_report(dir: &Path) -> std::io::Result<String> {
    let md = emit_report(dir);
    fs::write(dir.join(REPORT_MD), &md)?;
    Ok(md)
}
