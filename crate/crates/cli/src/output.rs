//! Run manifests and the JSON/CSV writers shared by every command.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Format, Global};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub seed: u64,
    pub horizon: u64,
    pub command: Vec<String>,
    pub version: String,
    pub timestamps: Timestamps,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct Run {
    manifest: RunManifest,
}

impl Run {
    pub fn start(global: &Global, argv: &[String]) -> Self {
        Run {
            manifest: RunManifest {
                seed: global.seed,
                horizon: global.horizon,
                command: argv.to_vec(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamps: Timestamps {
                    started: now(),
                    finished: String::new(),
                },
            },
        }
    }

    fn finish(&mut self) -> &RunManifest {
        self.manifest.timestamps.finished = now();
        &self.manifest
    }
}

/// Serializes `payload` to text and reads it back as the same type, so
/// malformed or lossy output never leaves the process.
fn validated<T: Serialize + DeserializeOwned + PartialEq>(payload: &T) -> Result<serde_json::Value, CliError> {
    let text = serde_json::to_string(payload).map_err(CliError::domain)?;
    let back: T = serde_json::from_str(&text).map_err(|e| CliError::domain(format!("output schema: {e}")))?;
    if &back != payload {
        return Err(CliError::domain("output schema: payload does not round-trip"));
    }
    serde_json::from_str(&text).map_err(CliError::domain)
}

fn write_out(global: &Global, text: &str) -> Result<(), CliError> {
    match &global.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::domain(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(CliError::domain)
        }
    }
}

fn manifest_comments(m: &RunManifest) -> String {
    format!(
        "# seed={}\n# horizon={}\n# command={}\n# version={}\n# started={}\n# finished={}\n",
        m.seed,
        m.horizon,
        m.command.join(" "),
        m.version,
        m.timestamps.started,
        m.timestamps.finished
    )
}

fn csv_text<R: Serialize>(rows: &[R], header: &[&str]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(CliError::domain)?;
    }
    for r in rows {
        w.serialize(r).map_err(CliError::domain)?;
    }
    String::from_utf8(w.into_inner().map_err(CliError::domain)?).map_err(CliError::domain)
}

/// One JSON object `{manifest, ...payload}`, or for CSV the manifest and
/// `extra` as comment lines followed by `rows`.
pub fn emit<T, R>(
    run: &mut Run,
    global: &Global,
    payload: &T,
    rows: &[R],
    header: &[&str],
    extra: &[(&str, String)],
) -> Result<(), CliError>
where
    T: Serialize + DeserializeOwned + PartialEq,
    R: Serialize,
{
    let body = validated(payload)?;
    let manifest = run.finish().clone();
    let text = match global.format {
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("manifest".into(), serde_json::to_value(&manifest).map_err(CliError::domain)?);
            if let serde_json::Value::Object(fields) = body {
                obj.extend(fields);
            }
            let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).map_err(CliError::domain)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = manifest_comments(&manifest);
            for (k, v) in extra {
                s.push_str(&format!("# {k}={v}\n"));
            }
            s.push_str(&csv_text(rows, header)?);
            s
        }
    };
    write_out(global, &text)
}

/// JSON lines: a manifest line, then one line per record.
pub fn emit_lines<R>(run: &mut Run, global: &Global, records: &[R], header: &[&str]) -> Result<(), CliError>
where
    R: Serialize + DeserializeOwned + PartialEq,
{
    let manifest = run.finish().clone();
    let text = match global.format {
        Format::Json => {
            let mut s = serde_json::to_string(&serde_json::json!({ "manifest": manifest })).map_err(CliError::domain)?;
            s.push('\n');
            for r in records {
                s.push_str(&serde_json::to_string(&validated(r)?).map_err(CliError::domain)?);
                s.push('\n');
            }
            s
        }
        Format::Csv => {
            let mut s = manifest_comments(&manifest);
            s.push_str(&csv_text(records, header)?);
            s
        }
    };
    write_out(global, &text)
}
