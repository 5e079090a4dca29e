//! Sweep report serialization: a structured-text (TOML) document mirroring
//! `SweepResult`, written with 9-significant-digit floats so reruns diff
//! cleanly, and re-parsable/validatable for the `check-report` mode.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{SweepResult, Verdict};

pub const REPORT_SCHEMA: &str = "gempd-sweep-v1";

/// Format a float with 9 significant digits, TOML-compatible.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    let s = format!("{v:.8e}");
    // "1.05360516e-1" is valid TOML, but normalize "e5" to "e5" exponent form
    s
}

/// Render a sweep result as a TOML document.
pub fn render_sweep_report(r: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("schema = \"{REPORT_SCHEMA}\"\n\n"));
    out.push_str("[config]\n");
    out.push_str(&format!("event = \"{}\"\n", r.event));
    out.push_str(&format!("alpha = {}\n", fmt_f64(r.alpha)));
    out.push_str(&format!("seed = {}\n", r.seed));
    out.push_str(&format!("workers = {}\n", r.workers));
    out.push_str(&format!(
        "tolerance_factor = {}\n",
        fmt_f64(r.tolerance_factor)
    ));
    for p in &r.points {
        out.push_str("\n[[points]]\n");
        out.push_str(&format!("theta = {}\n", fmt_f64(p.theta)));
        out.push_str(&format!("samples = {}\n", p.samples));
        out.push_str(&format!("events = {}\n", p.events));
        out.push_str(&format!("estimate = {}\n", fmt_f64(p.estimate)));
        out.push_str(&format!("stderr = {}\n", fmt_f64(p.stderr)));
    }
    out.push_str("\n[fit]\n");
    out.push_str(&format!("rate = {}\n", fmt_f64(r.fit.rate)));
    out.push_str(&format!("ci_low = {}\n", fmt_f64(r.fit.ci_low)));
    out.push_str(&format!("ci_high = {}\n", fmt_f64(r.fit.ci_high)));
    out.push_str(&format!("stderr = {}\n", fmt_f64(r.fit.stderr)));
    out.push_str(&format!("sigma_hat = {}\n", fmt_f64(r.fit.sigma_hat)));
    out.push_str(&format!("points_used = {}\n", r.fit.points_used));
    out.push_str("\n[verdict]\n");
    if let Some(t) = r.theoretical {
        out.push_str(&format!("theoretical_rate = {}\n", fmt_f64(t)));
    }
    let v = match r.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Unavailable => "UNAVAILABLE",
    };
    out.push_str(&format!("status = \"{v}\"\n"));
    out
}

#[derive(Debug, Deserialize)]
pub struct ParsedReport {
    pub schema: String,
    pub config: ParsedConfig,
    pub points: Vec<ParsedPoint>,
    pub fit: ParsedFit,
    pub verdict: ParsedVerdict,
}

#[derive(Debug, Deserialize)]
pub struct ParsedConfig {
    pub event: String,
    pub alpha: f64,
    pub seed: u64,
    pub workers: u64,
    pub tolerance_factor: f64,
}

#[derive(Debug, Deserialize)]
pub struct ParsedPoint {
    pub theta: f64,
    pub samples: u64,
    pub events: u64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Deserialize)]
pub struct ParsedFit {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stderr: f64,
    pub sigma_hat: f64,
    pub points_used: u64,
}

#[derive(Debug, Deserialize)]
pub struct ParsedVerdict {
    pub theoretical_rate: Option<f64>,
    pub status: String,
}

pub fn parse_sweep_report(text: &str) -> Result<ParsedReport> {
    toml::from_str(text).map_err(|e| Error::Domain(format!("unparsable report: {e}")))
}

/// Validate the structural invariants of a parsed report.
pub fn validate_report(r: &ParsedReport) -> Result<()> {
    if r.schema != REPORT_SCHEMA {
        return Err(Error::Domain(format!(
            "unknown report schema {:?} (expected {REPORT_SCHEMA})",
            r.schema
        )));
    }
    if r.points.is_empty() {
        return Err(Error::Domain("report has no sweep points".into()));
    }
    for p in &r.points {
        if p.events > p.samples {
            return Err(Error::Domain(format!(
                "theta={}: events {} exceed samples {}",
                p.theta, p.events, p.samples
            )));
        }
        if !(0.0..=1.0).contains(&p.estimate) {
            return Err(Error::Domain(format!(
                "theta={}: estimate {} outside [0,1]",
                p.theta, p.estimate
            )));
        }
        if p.stderr < 0.0 {
            return Err(Error::Domain(format!(
                "theta={}: negative stderr",
                p.theta
            )));
        }
    }
    if r.fit.ci_low > r.fit.ci_high {
        return Err(Error::Domain("fit confidence interval is ill-ordered".into()));
    }
    if r.fit.rate < 0.0 {
        return Err(Error::Domain("fitted rate must be nonnegative".into()));
    }
    match r.verdict.status.as_str() {
        "PASS" | "FAIL" | "UNAVAILABLE" => {}
        other => {
            return Err(Error::Domain(format!("unknown verdict status {other:?}")));
        }
    }
    if r.verdict.status != "UNAVAILABLE" && r.verdict.theoretical_rate.is_none() {
        return Err(Error::Domain(
            "PASS/FAIL verdict requires a theoretical rate".into(),
        ));
    }
    Ok(())
}
