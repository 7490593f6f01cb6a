//! Problem files: TOML documents with `[equation]`, `[boundary]`,
//! `[domain]`, `[time]` and an optional `[tuning]` section.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::criteria::TuningParams;
use crate::expr::Expr;
use crate::problem::{Alpha, BoundaryCondition, Domain, Nonlinearity, ProblemError, ProblemSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("inconsistent section [{section}]: {message}")]
    Inconsistent { section: &'static str, message: String },
}

/// A loaded problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub spec: ProblemSpec,
    pub tuning: Option<TuningParams>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    equation: EquationSection,
    boundary: BoundarySection,
    domain: DomainSection,
    time: TimeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tuning: Option<TuningParams>,
}

#[derive(Serialize)]
struct SavedFile {
    equation: EquationSection,
    boundary: BoundarySection,
    domain: DomainSection,
    time: TimeSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning: Option<toml::Table>,
}

/// Keys of `[tuning]` that are always written.
const TUNING_KEYS: [&str; 3] = ["b", "tau", "beta"];

/// `b`, `tau`, `beta` and every other key that differs from its default.
fn tuning_table(t: &TuningParams) -> toml::Table {
    let full = toml::Table::try_from(t).expect("tuning serializes");
    let default = toml::Table::try_from(TuningParams::default()).expect("tuning serializes");
    let mut out = changed(full, &default);
    for key in TUNING_KEYS {
        if let (false, Some(v)) = (out.contains_key(key), default.get(key)) {
            out.insert(key.into(), v.clone());
        }
    }
    out
}

fn changed(table: toml::Table, default: &toml::Table) -> toml::Table {
    let mut out = toml::Table::new();
    for (k, v) in table {
        match (v, default.get(&k)) {
            (toml::Value::Table(sub), Some(toml::Value::Table(dsub))) => {
                let sub = changed(sub, dsub);
                if !sub.is_empty() {
                    out.insert(k, toml::Value::Table(sub));
                }
            }
            (v, d) if d != Some(&v) => {
                out.insert(k, v);
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationSection {
    alpha: AlphaValue,
    r: String,
    p: String,
    p_hat: String,
    q: String,
    f_coef: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_exponent: Option<f64>,
    a: String,
    a_k: String,
    s: u32,
    m: String,
    eta: String,
}

/// `alpha = 5` or `alpha = "5/3"`.
#[derive(Debug)]
struct AlphaValue(Alpha);

impl Serialize for AlphaValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.denominator() == 1 {
            s.serialize_u32(self.0.numerator())
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for AlphaValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(n) => n.to_string(),
            Raw::Text(s) => s,
        };
        text.parse().map(AlphaValue).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoundaryKind {
    Robin,
    Dirichlet,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySection {
    kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<String>,
}

/// An interval via `x_lo`/`x_hi`, or a box via `lo`/`hi` arrays.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t0: f64,
}

fn expr(field: &'static str, src: &str) -> Result<Expr, ProblemError> {
    Expr::parse(src).map_err(|source| ProblemError::Expression { field, source })
}

fn inconsistent(section: &'static str, message: &str) -> ConfigError {
    ConfigError::Inconsistent { section, message: message.into() }
}

/// Parses a problem document.
pub fn parse_problem(text: &str) -> Result<ProblemConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    let eq = &file.equation;
    let coef = expr("f_coef", &eq.f_coef)?;
    let f = match eq.f_exponent {
        None => Nonlinearity::PowerLaw { coef },
        Some(exponent) => Nonlinearity::Custom { coef, exponent },
    };
    let bc = match (file.boundary.kind, &file.boundary.psi) {
        (BoundaryKind::Robin, Some(psi)) => BoundaryCondition::Robin { psi: expr("psi", psi)? },
        (BoundaryKind::Robin, None) => return Err(inconsistent("boundary", "kind = \"robin\" needs `psi`")),
        (BoundaryKind::Dirichlet, None) => BoundaryCondition::Dirichlet,
        (BoundaryKind::Dirichlet, Some(_)) => {
            return Err(inconsistent("boundary", "kind = \"dirichlet\" takes no `psi`"))
        }
    };
    let d = &file.domain;
    let domain = match (d.x_lo, d.x_hi, &d.lo, &d.hi) {
        (Some(lo), Some(hi), None, None) => Domain::Interval { lo, hi },
        (None, None, Some(lo), Some(hi)) => Domain::Box { lo: lo.clone(), hi: hi.clone() },
        _ => return Err(inconsistent("domain", "give either `x_lo` and `x_hi`, or `lo` and `hi` arrays")),
    };
    let spec = ProblemSpec {
        alpha: eq.alpha.0,
        r: expr("r", &eq.r)?,
        p: expr("p", &eq.p)?,
        p_hat: expr("p_hat", &eq.p_hat)?,
        q: expr("q", &eq.q)?,
        f,
        a: expr("a", &eq.a)?,
        a_k: expr("a_k", &eq.a_k)?,
        s: eq.s,
        m: expr("m", &eq.m)?,
        eta: expr("eta", &eq.eta)?,
        bc,
        domain,
        t0: file.time.t0,
    };
    spec.validate()?;
    if let Some(t) = &file.tuning {
        t.validate().map_err(|e| ConfigError::Inconsistent { section: "tuning", message: e.to_string() })?;
    }
    Ok(ProblemConfig { spec, tuning: file.tuning })
}

pub fn load_config(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_problem(&text)
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, ConfigError> {
    load_config(path).map(|c| c.spec)
}

/// Canonical TOML text of a problem: fixed section and key order, and in
/// `[tuning]` only `b`, `tau`, `beta` plus keys that differ from defaults.
pub fn save_problem(spec: &ProblemSpec, tuning: Option<&TuningParams>) -> String {
    let (kind, psi) = match &spec.bc {
        BoundaryCondition::Robin { psi } => (BoundaryKind::Robin, Some(psi.source().to_string())),
        BoundaryCondition::Dirichlet => (BoundaryKind::Dirichlet, None),
    };
    let domain = match &spec.domain {
        Domain::Interval { lo, hi } => DomainSection { x_lo: Some(*lo), x_hi: Some(*hi), lo: None, hi: None },
        Domain::Box { lo, hi } => DomainSection { x_lo: None, x_hi: None, lo: Some(lo.clone()), hi: Some(hi.clone()) },
    };
    let f_exponent = match &spec.f {
        Nonlinearity::PowerLaw { .. } => None,
        Nonlinearity::Custom { exponent, .. } => Some(*exponent),
    };
    let file = SavedFile {
        equation: EquationSection {
            alpha: AlphaValue(spec.alpha),
            r: spec.r.source().into(),
            p: spec.p.source().into(),
            p_hat: spec.p_hat.source().into(),
            q: spec.q.source().into(),
            f_coef: spec.f.coef().source().into(),
            f_exponent,
            a: spec.a.source().into(),
            a_k: spec.a_k.source().into(),
            s: spec.s,
            m: spec.m.source().into(),
            eta: spec.eta.source().into(),
        },
        boundary: BoundarySection { kind, psi },
        domain,
        time: TimeSection { t0: spec.t0 },
        tuning: tuning.map(tuning_table),
    };
    toml::to_string(&file).expect("problem documents always serialize")
}
