//! JSON model-spec documents.
//!
//! ```json
//! {
//!   "variant": "GREM",
//!   "p": [0.5, 0.5],
//!   "b": 2,
//!   "indices": [
//!     {"index": [1], "weight": 0.894, "family": {"kind": "gaussian"}},
//!     {"index": [1, 2], "weight": 0.447, "family": {"kind": "weibull", "params": {"shape": 0.5}}}
//!   ],
//!   "h": 0
//! }
//! ```
//!
//! Block numbers in `index` are 1-based. `n` is optional and must equal the
//! length of `p` when present; `b` defaults to 2 and `h` to 0.

use std::collections::BTreeMap;
use std::path::Path;

use remlab::disorder::FamilyKind;
use remlab::{DisorderFamily, IndexTerm, ModelSpec, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpecError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid model spec: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub p: Vec<f64>,
    #[serde(default = "default_b")]
    pub b: u32,
    pub indices: Vec<IndexDoc>,
    #[serde(default)]
    pub h: f64,
}

fn default_b() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexDoc {
    pub index: Vec<i64>,
    pub weight: f64,
    pub family: FamilyDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

fn variant_from_name(name: &str) -> Result<Variant, SpecError> {
    match name {
        "REM" | "rem" => Ok(Variant::Rem),
        "GREM" | "grem" => Ok(Variant::Grem),
        "BKM" | "bkm" => Ok(Variant::Bkm),
        "ExternalField" | "external_field" => Ok(Variant::ExternalField),
        other => Err(SpecError::Invalid(format!(
            "unknown variant {other:?} (expected REM, GREM, BKM or ExternalField)"
        ))),
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Rem => "REM",
        Variant::Grem => "GREM",
        Variant::Bkm => "BKM",
        Variant::ExternalField => "ExternalField",
    }
}

fn shape_param(doc: &FamilyDoc) -> Result<f64, SpecError> {
    let extra: Vec<&String> = doc.params.keys().filter(|k| k.as_str() != "shape").collect();
    if !extra.is_empty() {
        return Err(SpecError::Invalid(format!("family {} takes only a shape parameter, got {extra:?}", doc.kind)));
    }
    doc.params
        .get("shape")
        .copied()
        .ok_or_else(|| SpecError::Invalid(format!("family {} needs params.shape", doc.kind)))
}

fn family_from_doc(doc: &FamilyDoc) -> Result<DisorderFamily, SpecError> {
    let no_params = || {
        if doc.params.is_empty() {
            Ok(())
        } else {
            Err(SpecError::Invalid(format!("family {} takes no parameters", doc.kind)))
        }
    };
    let invalid = |e: remlab::Error| SpecError::Invalid(e.to_string());
    match doc.kind.as_str() {
        "gaussian" => no_params().map(|_| DisorderFamily::gaussian()),
        "two_sided_exp" => no_params().map(|_| DisorderFamily::two_sided_exp()),
        "weibull" => DisorderFamily::weibull(shape_param(doc)?).map_err(invalid),
        "one_sided_weibull" => DisorderFamily::one_sided_weibull(shape_param(doc)?).map_err(invalid),
        other => Err(SpecError::Invalid(format!(
            "unknown family kind {other:?} (expected gaussian, two_sided_exp, weibull or one_sided_weibull)"
        ))),
    }
}

fn family_to_doc(fam: &DisorderFamily) -> Result<FamilyDoc, SpecError> {
    let (kind, shape) = match fam.kind() {
        FamilyKind::Gaussian => ("gaussian", None),
        FamilyKind::TwoSidedExp => ("two_sided_exp", None),
        FamilyKind::Weibull { shape } => ("weibull", Some(shape)),
        FamilyKind::OneSidedWeibull { shape } => ("one_sided_weibull", Some(shape)),
        FamilyKind::Custom => return Err(SpecError::Invalid("custom families cannot be written to a spec file".into())),
    };
    let mut params = BTreeMap::new();
    if let Some(s) = shape {
        params.insert("shape".to_string(), s);
    }
    Ok(FamilyDoc { kind: kind.to_string(), params })
}

impl SpecDoc {
    pub fn to_spec(&self) -> Result<ModelSpec, SpecError> {
        let variant = variant_from_name(&self.variant)?;
        if let Some(n) = self.n {
            if n != self.p.len() {
                return Err(SpecError::Invalid(format!("n = {n} but p has {} entries", self.p.len())));
            }
        }
        let mut terms = Vec::with_capacity(self.indices.len());
        for ix in &self.indices {
            let mut blocks = Vec::with_capacity(ix.index.len());
            for &b in &ix.index {
                if b < 1 || b as usize > self.p.len() {
                    return Err(SpecError::Invalid(format!(
                        "index entries are 1-based block numbers in 1..={}, got {b}",
                        self.p.len()
                    )));
                }
                blocks.push(b as usize - 1);
            }
            terms.push(IndexTerm::new(blocks, ix.weight, family_from_doc(&ix.family)?));
        }
        ModelSpec::new(variant, self.p.clone(), self.b, terms, self.h).map_err(|e| SpecError::Invalid(e.to_string()))
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, SpecError> {
        let indices = spec
            .terms()
            .iter()
            .map(|t| {
                Ok(IndexDoc {
                    index: t.blocks().iter().map(|&b| b as i64 + 1).collect(),
                    weight: t.weight(),
                    family: family_to_doc(t.family())?,
                })
            })
            .collect::<Result<_, SpecError>>()?;
        Ok(SpecDoc {
            variant: variant_name(spec.variant()).to_string(),
            n: Some(spec.n_blocks()),
            p: spec.proportions().to_vec(),
            b: spec.branching(),
            indices,
            h: spec.field(),
        })
    }
}

pub fn parse_doc(text: &str) -> Result<SpecDoc, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parses and validates a spec document.
pub fn parse_spec(text: &str) -> Result<(ModelSpec, SpecDoc), SpecError> {
    let doc = parse_doc(text)?;
    let spec = doc.to_spec()?;
    Ok((spec, doc))
}

pub fn write_spec(spec: &ModelSpec) -> Result<String, SpecError> {
    let doc = SpecDoc::from_spec(spec)?;
    Ok(serde_json::to_string_pretty(&doc).expect("spec documents always serialize"))
}

pub fn load_spec(path: &Path) -> Result<(ModelSpec, SpecDoc), SpecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_spec(&text)
}
