use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const USABILITY_STATUS: &str = "requires human study";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTextResult {
    pub expected: usize,
    pub matched: usize,
    /// "frame N: text" for each expected text not heard on its frame.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    /// Detected labeled cues / labeled cues; null without labels.
    pub completeness: Option<f64>,
    /// Correct instructions / instructions emitted on labeled frames; null
    /// when none were emitted.
    pub correctness: Option<f64>,
    pub labeled_cues: usize,
    pub detected_labeled_cues: usize,
    pub judged_instructions: usize,
    pub correct_instructions: usize,
    pub exact_text: Option<ExactTextResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub samples: usize,
    pub overhead_p50_ms: Option<f64>,
    pub overhead_p95_ms: Option<f64>,
    pub e2e_p50_ms: Option<f64>,
    pub e2e_p95_ms: Option<f64>,
    pub inference_p50_ms: Option<f64>,
    pub inference_p95_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CautionEvent {
    pub frame_seq: u64,
    pub dedup_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrillResult {
    pub passed: bool,
    pub detail: String,
    pub drop_after_frame: usize,
    pub resume_delay_ms: u64,
    pub resumed: bool,
    pub oracle_cautions: Vec<CautionEvent>,
    pub observed_cautions: Vec<CautionEvent>,
    pub lost: Vec<CautionEvent>,
    pub duplicated: Vec<CautionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    /// Null when the drill was not run.
    pub recoverability: Option<DrillResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usability {
    pub status: String,
    pub instructions: usize,
    pub instructions_per_frame: Option<f64>,
    /// Share of instructions whose dedup key had already been spoken.
    pub repetition_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portability {
    pub backend: String,
    pub transport: String,
    pub mode: String,
    pub units: String,
    pub profiles: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub frames_sent: usize,
    pub frames_analyzed: usize,
    pub frames_superseded: u64,
    pub frames_stale: u64,
    pub format_errors: u64,
    pub backend_errors: u64,
    pub error_messages_received: usize,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recording: String,
    pub functional: Functional,
    pub performance: Performance,
    pub reliability: Reliability,
    pub usability: Usability,
    pub portability: Portability,
    pub counts: Counts,
}

impl EvalReport {
    /// The report with every timing-dependent number zeroed, for
    /// determinism comparisons.
    pub fn without_timing(&self) -> EvalReport {
        let mut r = self.clone();
        r.performance = Performance {
            samples: r.performance.samples,
            overhead_p50_ms: None,
            overhead_p95_ms: None,
            e2e_p50_ms: None,
            e2e_p95_ms: None,
            inference_p50_ms: None,
            inference_p95_ms: None,
        };
        r
    }
}

/// Nearest-rank percentile. `None` for an empty sample.
pub fn percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

pub fn text_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("txt")
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "n/a".to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, rows);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let joined: Vec<String> = items.iter().map(scalar).collect();
            rows.push((
                prefix.to_string(),
                if joined.is_empty() {
                    "-".into()
                } else {
                    joined.join(", ")
                },
            ));
        }
        Value::Array(items) => {
            rows.push((prefix.to_string(), format!("{} item(s)", items.len())));
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), item, rows);
            }
        }
        other => rows.push((prefix.to_string(), scalar(other))),
    }
}

/// Human-readable table. Numbers are printed by the same serializer as
/// the JSON, so the two files always agree.
pub fn render_table(report: &EvalReport) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `path` (JSON) and the same path with a `.txt` extension (table).
pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>) -> std::io::Result<(PathBuf, PathBuf)> {
    let json_path = path.as_ref().to_path_buf();
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&json_path, report_json(report))?;
    let txt = text_path(&json_path);
    std::fs::write(&txt, render_table(report))?;
    Ok((json_path, txt))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> EvalReport {
        EvalReport {
            recording: "r".into(),
            functional: Functional {
                completeness: None,
                correctness: Some(0.75),
                labeled_cues: 0,
                detected_labeled_cues: 0,
                judged_instructions: 4,
                correct_instructions: 3,
                exact_text: None,
            },
            performance: Performance {
                samples: 3,
                overhead_p50_ms: Some(0.123456789),
                overhead_p95_ms: Some(1.5),
                e2e_p50_ms: Some(2.0),
                e2e_p95_ms: Some(3.25),
                inference_p50_ms: None,
                inference_p95_ms: None,
            },
            reliability: Reliability { recoverability: None },
            usability: Usability {
                status: USABILITY_STATUS.into(),
                instructions: 4,
                instructions_per_frame: Some(0.2),
                repetition_rate: Some(0.0),
            },
            portability: Portability {
                backend: "stub".into(),
                transport: "loopback".into(),
                mode: "fast".into(),
                units: "feet".into(),
                profiles: vec!["stub/loopback".into()],
            },
            counts: Counts::default(),
        }
    }

    #[test]
    fn percentiles_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), Some(10.0));
        assert_eq!(percentile(&v, 95.0), Some(19.0));
        assert_eq!(percentile(&[7.0], 95.0), Some(7.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn json_round_trips_and_table_agrees() {
        let r = sample();
        let json = report_json(&r);
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(report_json(&back), json);
        let table = render_table(&r);
        assert!(table.contains("functional.completeness"));
        assert!(table
            .lines()
            .any(|l| l.starts_with("functional.completeness") && l.ends_with("n/a")));
        assert!(table.contains("0.123456789"));
        assert!(json.contains("0.123456789"));
        assert!(json.contains("\"completeness\": null"));
    }

    #[test]
    fn emit_writes_both_files() {
        let tmp = tempfile::tempdir().unwrap();
        let (j, t) = emit_report(&sample(), tmp.path().join("out/report.json")).unwrap();
        assert!(j.is_file() && t.is_file());
        assert_eq!(t.extension().unwrap(), "txt");
        assert!(emit_report(&sample(), "/proc/definitely/not/writable/report.json").is_err());
    }
}
