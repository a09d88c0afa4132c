//! Case files, policy files, convergence CSV and SVG charts.
//!
//! Case and policy files are JSON. Floats are written with shortest
//! round-trip formatting and read back with exact parsing, so cut
//! coefficients survive a save/load cycle bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hydrothermal::SystemCase;
use crate::scenario::Lattice;
use crate::sddp::{BoundsEntry, BoundsLog, EngineConfig, TrainedPolicy, UpperBound};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: u32,
    pub system: SystemCase,
    pub lattice: Lattice,
    #[serde(default)]
    pub defaults: EngineConfig,
}

impl CaseFile {
    pub fn new(system: SystemCase, lattice: Lattice, defaults: EngineConfig) -> Self {
        Self { schema_version: SCHEMA_VERSION, system, lattice, defaults }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        self.system.validate(self.lattice.stages())?;
        self.system.check_lattice(&self.lattice)?;
        self.defaults.validate()
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(&self.system, &self.lattice)
    }
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path, message: e.into_inner().to_string() }
    })
}

/// Parses and validates a case document.
pub fn parse_case_str(text: &str) -> Result<CaseFile> {
    let case: CaseFile = from_json(text)?;
    case.validate()?;
    Ok(case)
}

pub fn parse_case(path: &Path) -> Result<CaseFile> {
    parse_case_str(&fs::read_to_string(path)?)
}

pub fn case_to_string(case: &CaseFile) -> Result<String> {
    to_json(case)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::CorruptFile(e.to_string()))
}

/// SHA-256 of the compact, key-sorted JSON form of the system and lattice.
pub fn fingerprint(system: &SystemCase, lattice: &Lattice) -> Result<String> {
    // serde_json::Value keeps object keys in a sorted map
    let value = serde_json::json!({ "system": system, "lattice": lattice });
    let canonical = serde_json::to_string(&value).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_policy(policy: &TrainedPolicy, path: &Path) -> Result<()> {
    write_atomic(path, to_json(policy)?.as_bytes())
}

/// Reads a policy and checks it was trained on `case`.
pub fn read_policy(path: &Path, case: &CaseFile) -> Result<TrainedPolicy> {
    let text = fs::read_to_string(path)?;
    let policy: TrainedPolicy =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    let expected = case.fingerprint()?;
    if policy.fingerprint != expected {
        return Err(Error::FingerprintMismatch { expected, found: policy.fingerprint });
    }
    policy.pool.check_shape(case.lattice.stages(), case.lattice.openings(), case.system.state_dimension())?;
    Ok(policy)
}

pub const CSV_HEADER: [&str; 7] =
    ["iteration", "lower_bound", "ub_mean", "ub_stderr", "ub_samples", "sampler", "wall_ms"];

pub fn bounds_to_csv(log: &[BoundsEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::CorruptFile(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for e in log {
        let (mean, stderr, samples) = match &e.upper_bound {
            Some(ub) => (ub.mean.to_string(), ub.stderr.to_string(), ub.samples.to_string()),
            None => Default::default(),
        };
        w.write_record([
            e.iteration.to_string(),
            e.lower_bound.to_string(),
            mean,
            stderr,
            samples,
            e.sampler.clone(),
            e.wall_ms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn bounds_from_csv(text: &str) -> Result<BoundsLog> {
    let corrupt = |m: String| Error::CorruptFile(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| corrupt(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(corrupt(format!("unexpected convergence header {header:?}")));
    }
    let mut log = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| corrupt(e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| corrupt(format!("row {}: bad {} `{}`", i + 1, CSV_HEADER[k], field(k))))
        };
        let upper_bound = if field(2).is_empty() {
            None
        } else {
            Some(UpperBound { mean: num(2)?, stderr: num(3)?, samples: num(4)? as usize })
        };
        log.push(BoundsEntry {
            iteration: num(0)? as usize,
            lower_bound: num(1)?,
            upper_bound,
            sampler: field(5).to_string(),
            wall_ms: num(6)? as u64,
        });
    }
    Ok(log)
}

/// Convergence chart: lower-bound polyline and upper-bound means with
/// error bars of one confidence multiple.
pub fn convergence_svg(log: &[BoundsEntry], confidence: f64) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in log {
        lo = lo.min(e.lower_bound);
        hi = hi.max(e.lower_bound);
        if let Some(ub) = &e.upper_bound {
            lo = lo.min(ub.mean - confidence * ub.stderr);
            hi = hi.max(ub.mean + confidence * ub.stderr);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let last = log.iter().map(|e| e.iteration).max().unwrap_or(1).max(2) as f64;
    let x = |k: usize| M + (k as f64 - 1.0) / (last - 1.0) * (W - 2.0 * M);
    let y = |v: f64| H - M - (v - lo) / (hi - lo) * (H - 2.0 * M);

    let mut s = String::new();
    s += &format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n");
    s += &format!("<path d=\"M{M} {M} V{} H{}\" fill=\"none\" stroke=\"black\"/>\n", H - M, W - M);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            M - 6.0,
            y(v) + 4.0,
            format_tick(v)
        );
    }
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">iteration</text>\n", W / 2.0, H - M / 3.0);
    s += &format!("<text x=\"{M}\" y=\"{:.1}\">1</text>\n", H - M + 16.0);
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n", W - M, H - M + 16.0, last as usize);

    if !log.is_empty() {
        let points: Vec<String> =
            log.iter().map(|e| format!("{:.2},{:.2}", x(e.iteration), y(e.lower_bound))).collect();
        s += &format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            points.join(" ")
        );
    }
    for e in log {
        if let Some(ub) = &e.upper_bound {
            let (cx, top, bottom) =
                (x(e.iteration), y(ub.mean + confidence * ub.stderr), y(ub.mean - confidence * ub.stderr));
            s += &format!(
                "<line x1=\"{cx:.2}\" y1=\"{top:.2}\" x2=\"{cx:.2}\" y2=\"{bottom:.2}\" stroke=\"#d62728\"/>\n"
            );
            s += &format!("<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#d62728\"/>\n", y(ub.mean));
        }
    }
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#1f77b4\">lower bound</text>\n", W - M - 150.0, M - 20.0);
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#d62728\">upper bound</text>\n", W - M - 60.0, M - 20.0);
    s += "</svg>\n";
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1e5 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "system": {
            "buses": [{"name": "n", "demand": [5]}],
            "thermals": [{"name": "g", "bus": "n", "cost": 2, "capacity": 10}]
        },
        "lattice": {"stages": 1, "openings": 1, "noises": [[{"inflow": []}]]}
    }"#;

    #[test]
    fn minimal_case_parses() {
        let case = parse_case_str(MINIMAL).unwrap();
        assert_eq!(case.lattice.stages(), 1);
        let squashed: String = MINIMAL.split_whitespace().collect();
        assert_eq!(parse_case_str(&squashed).unwrap().fingerprint().unwrap(), case.fingerprint().unwrap());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"foo\": 3,", 1);
        match parse_case_str(&text) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("foo"), "{message}"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"cost\": 2", "\"cost\": 2, \"colour\": 1");
        match parse_case_str(&text) {
            Err(Error::Schema { path, message }) => {
                assert!(message.contains("colour"));
                assert!(path.starts_with("system.thermals[0]"), "{path}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn self_upstream_is_cyclic() {
        let text = MINIMAL.replace(
            "\"thermals\"",
            r#""hydros": [{"name": "h", "bus": "n", "max_storage": 1, "max_turbine": 1, "production": 1,
                           "upstream": ["h"], "initial_storage": 0}],
               "thermals""#,
        );
        let text = text.replace("\"inflow\": []", "\"inflow\": [0]");
        assert!(matches!(parse_case_str(&text), Err(Error::CyclicCascade(_))));
    }

    #[test]
    fn serialize_round_trip() {
        let case = parse_case_str(MINIMAL).unwrap();
        assert_eq!(parse_case_str(&case_to_string(&case).unwrap()).unwrap(), case);
    }

    #[test]
    fn csv_round_trip() {
        let log = vec![
            BoundsEntry { iteration: 1, lower_bound: 0.1, upper_bound: None, sampler: "uniform".into(), wall_ms: 3 },
            BoundsEntry {
                iteration: 2,
                lower_bound: 1.0 / 3.0,
                upper_bound: Some(UpperBound { mean: 2.5, stderr: 0.25, samples: 8 }),
                sampler: "risk".into(),
                wall_ms: 9,
            },
        ];
        let text = bounds_to_csv(&log).unwrap();
        assert!(text
            .starts_with("iteration,lower_bound,ub_mean,ub_stderr,ub_samples,sampler,wall_ms\n1,0.1,,,,uniform,3\n"));
        assert_eq!(bounds_from_csv(&text).unwrap(), log);
        let svg = convergence_svg(&log, 1.96);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains("<circle"));
    }
}
