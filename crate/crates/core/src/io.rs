//! JSON system files (`.sys`).
//!
//! ```json
//! {"kind": "statespace", "n": 2, "m": 1, "A": [[...], [...]], ...}
//! ```
//!
//! `kind` is one of `descriptor`, `statespace`, `ph` or `semiexplicit`.
//! Matrices are arrays of rows; empty matrices may be written as `[]` and
//! are rebuilt from `n`, `m` (and `d`, the differential dimension of a
//! semi-explicit system).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sysrep::{DescriptorSystem, LtiSystem, PhSystem, SemiExplicitSystem, StateSpaceSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemFile {
    Descriptor(DescriptorSystem),
    StateSpace(StateSpaceSystem),
    Ph(PhSystem),
    SemiExplicit(SemiExplicitSystem),
}

impl SystemFile {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemFile::Descriptor(_) => "descriptor",
            SystemFile::StateSpace(_) => "statespace",
            SystemFile::Ph(_) => "ph",
            SystemFile::SemiExplicit(_) => "semiexplicit",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            SystemFile::Descriptor(s) => s.order(),
            SystemFile::StateSpace(s) => s.order(),
            SystemFile::Ph(s) => s.order(),
            SystemFile::SemiExplicit(s) => s.order(),
        }
    }

    pub fn io_dim(&self) -> usize {
        match self {
            SystemFile::Descriptor(s) => s.io_dim(),
            SystemFile::StateSpace(s) => s.io_dim(),
            SystemFile::Ph(s) => s.io_dim(),
            SystemFile::SemiExplicit(s) => s.io_dim(),
        }
    }

    /// Descriptor form of any stored system.
    pub fn to_descriptor(&self) -> DescriptorSystem {
        match self {
            SystemFile::Descriptor(s) => s.clone(),
            SystemFile::StateSpace(s) => s.into(),
            SystemFile::Ph(s) => crate::sysrep::ph_to_statespace(s).to_descriptor(),
            SystemFile::SemiExplicit(s) => s.to_descriptor(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::from(self.kind()));
        obj.insert("n".into(), Value::from(self.order()));
        obj.insert("m".into(), Value::from(self.io_dim()));
        let mut put = |k: &str, x: &Mat| {
            obj.insert(k.into(), mat_to_json(x));
        };
        match self {
            SystemFile::Descriptor(s) => {
                put("E", s.e());
                put("A", s.a());
                put("B", s.b());
                put("C", s.c());
                put("D", s.d());
            }
            SystemFile::StateSpace(s) => {
                put("A", s.a());
                put("B", s.b());
                put("C", s.c());
                put("D", s.d());
            }
            SystemFile::Ph(s) => {
                put("E", s.e());
                put("J", s.j());
                put("R", s.r());
                put("Q", s.q());
                put("F", s.f());
                put("P", s.p());
                put("S", s.s());
                put("N", s.n());
            }
            SystemFile::SemiExplicit(s) => {
                put("E1", s.e1());
                put("A1", s.a1());
                put("B1", s.b1());
                put("A2", s.a2());
                put("B2", s.b2());
                put("C", s.c());
                put("D", s.d());
                obj.insert("d".into(), Value::from(s.differential_dim()));
            }
        }
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse("system file must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("missing string field `kind`".into()))?;
        let n = dim_field(obj, "n")?;
        let m = dim_field(obj, "m")?;
        let get = |k: &str, r: usize, c: usize| -> Result<Mat> {
            let v = obj
                .get(k)
                .ok_or_else(|| Error::Parse(format!("missing matrix `{k}`")))?;
            mat_from_json(k, v, r, c)
        };
        Ok(match kind {
            "descriptor" => SystemFile::Descriptor(DescriptorSystem::new(
                get("E", n, n)?,
                get("A", n, n)?,
                get("B", n, m)?,
                get("C", m, n)?,
                get("D", m, m)?,
            )?),
            "statespace" => SystemFile::StateSpace(StateSpaceSystem::new(
                get("A", n, n)?,
                get("B", n, m)?,
                get("C", m, n)?,
                get("D", m, m)?,
            )?),
            "ph" => SystemFile::Ph(PhSystem::new(
                get("E", n, n)?,
                get("J", n, n)?,
                get("R", n, n)?,
                get("Q", n, n)?,
                get("F", n, m)?,
                get("P", n, m)?,
                get("S", m, m)?,
                get("N", m, m)?,
            )?),
            "semiexplicit" => {
                let d = dim_field(obj, "d")?;
                if d > n {
                    return Err(Error::Parse(format!("differential dimension {d} exceeds n = {n}")));
                }
                SystemFile::SemiExplicit(SemiExplicitSystem::new(
                    get("E1", d, n)?,
                    get("A1", d, n)?,
                    get("B1", d, m)?,
                    get("A2", n - d, n)?,
                    get("B2", n - d, m)?,
                    get("C", m, n)?,
                    get("D", m, m)?,
                )?)
            }
            other => return Err(Error::Parse(format!("unknown system kind `{other}`"))),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("plain JSON values serialize")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }
}

impl From<LtiSystem> for SystemFile {
    fn from(s: LtiSystem) -> Self {
        match s {
            LtiSystem::StateSpace(s) => SystemFile::StateSpace(s),
            LtiSystem::Descriptor(s) => SystemFile::Descriptor(s),
        }
    }
}

fn dim_field(obj: &Map<String, Value>, k: &str) -> Result<usize> {
    obj.get(k)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("missing nonnegative integer field `{k}`")))
}

pub fn mat_to_json(x: &Mat) -> Value {
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde_json::to_value(rows).expect("finite matrices serialize")
}

fn mat_from_json(name: &str, v: &Value, r: usize, c: usize) -> Result<Mat> {
    let rows: Vec<Vec<f64>> = Vec::<Vec<f64>>::deserialize(v)
        .map_err(|e| Error::Parse(format!("matrix `{name}`: {e}")))?;
    if r == 0 || c == 0 {
        if rows.iter().all(|row| row.is_empty()) && rows.len() <= r.max(1) {
            return Ok(Mat::zeros(r, c));
        }
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse(format!("matrix `{name}` must be {r}x{c}")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_system(path: impl AsRef<Path>) -> Result<SystemFile> {
    SystemFile::from_json_str(&fs::read_to_string(path)?)
}

pub fn write_system(path: impl AsRef<Path>, sys: &SystemFile) -> Result<()> {
    fs::write(path, sys.to_json_string())?;
    Ok(())
}

/// Writes any serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
