//! Result tables and their CSV / JSON serialization with a provenance
//! header.

use std::fmt::Write as _;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::manifest::RunManifest;
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => u8::from(*v).to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) if v.is_finite() => json!(v),
            Cell::F(v) => json!(v.to_string()),
            Cell::I(v) => json!(v),
            Cell::B(v) => json!(v),
            Cell::S(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// A named schema: its identifier is written as `<name>/v<version>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

pub mod schemas {
    use super::Schema;

    pub const PHASE_DIAGRAM: Schema = Schema {
        name: "phase-diagram",
        version: 1,
        columns: &["theta1", "theta2", "nu_prime", "nu_dprime", "boundary_flag"],
    };
    pub const DISPLACEMENT: Schema = Schema {
        name: "displacement",
        version: 1,
        columns: &["theta1", "theta2", "p", "t", "avg_displacement"],
    };
    pub const MOMENTS: Schema = Schema {
        name: "moments",
        version: 1,
        columns: &["theta1", "theta2", "p", "t", "m2_over_t2"],
    };
    pub const CHIRAL: Schema = Schema {
        name: "chiral",
        version: 1,
        columns: &["theta1", "theta2", "p", "t", "minus_two_c"],
    };
    pub const SPECTRUM: Schema = Schema {
        name: "spectrum",
        version: 1,
        columns: &["re_lambda", "im_lambda", "ipr", "edge_flag", "center"],
    };
    pub const EDGE_PROFILES: Schema = Schema {
        name: "edge-profiles",
        version: 1,
        columns: &["state", "x", "probability"],
    };
    pub const CORRECTED_PROBABILITY: Schema = Schema {
        name: "corrected-probability",
        version: 1,
        columns: &["t", "x", "p_c"],
    };
    pub const DISORDER_STATS: Schema = Schema {
        name: "disorder-stats",
        version: 1,
        columns: &["theta1", "theta2", "p", "kind", "amplitude", "t", "mean", "std"],
    };
    pub const PSEUDO_UNITARITY: Schema = Schema {
        name: "pseudo-unitarity",
        version: 1,
        columns: &["theta1", "theta2", "p", "max_n0_sq", "pseudo_unitary", "topo_boundary"],
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(schema: Schema) -> Self {
        Self { schema, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.schema.columns.len(), "row width for {}", self.schema.name);
        self.rows.push(row);
    }

    pub fn schema_id(&self) -> String {
        format!("{}/v{}", self.schema.name, self.schema.version)
    }

    pub fn to_csv(&self, manifest: &RunManifest) -> String {
        let mut out = provenance_header(&self.schema_id(), manifest);
        out.push_str(&self.schema.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, manifest: &RunManifest) -> Result<String, CliError> {
        let manifest_json = manifest.to_json();
        let doc = json!({
            "tool": "qwalk",
            "tool_version": TOOL_VERSION,
            "schema": self.schema_id(),
            "manifest_sha256": sha256_hex(&manifest_json),
            "manifest": serde_json::to_value(manifest).map_err(|e| CliError::Input(e.to_string()))?,
            "columns": self.schema.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Input(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

pub fn sha256_hex(s: &str) -> String {
    let digest = Sha256::digest(s.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// `#`-prefixed lines naming the tool, schema and the manifest that
/// produced the file.
pub fn provenance_header(schema_id: &str, manifest: &RunManifest) -> String {
    let m = manifest.to_json();
    format!(
        "# tool: qwalk {TOOL_VERSION}\n# schema: {schema_id}\n# manifest-sha256: {}\n# manifest: {m}\n",
        sha256_hex(&m)
    )
}
