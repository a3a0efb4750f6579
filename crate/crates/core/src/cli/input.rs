//! JSON input schemas and their validation into library models.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::funcspace::{FunctionVec, GroundSet, Subspace};
use crate::measure::SigmaAlgebra;
use crate::moments::{AtomicMeasure, MomentSequence, Support};
use crate::Functional;

#[derive(Debug)]
pub enum ParseError {
    Io { path: String, message: String },
    Schema(SchemaError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaError {
    /// Dotted field path, `.` for the document root.
    pub path: String,
    /// 1-based position when the violation is syntactic or type-level.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            ParseError::Schema(e) => {
                write!(f, "schema error at {}", e.path)?;
                if let (Some(l), Some(c)) = (e.line, e.column) {
                    write!(f, " (line {l}, column {c})")?;
                }
                write!(f, ": {}", e.message)
            }
        }
    }
}

impl std::error::Error for ParseError {}

fn schema(path: impl Into<String>, message: impl fmt::Display) -> ParseError {
    ParseError::Schema(SchemaError {
        path: path.into(),
        line: None,
        column: None,
        message: message.to_string(),
    })
}

/// Moment problem input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    #[serde(default, skip_serializing)]
    pub schema: Option<String>,
    pub moments: Vec<f64>,
    pub support: Support,
}

/// Finite measurable space input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSpec {
    #[serde(default, skip_serializing)]
    pub schema: Option<String>,
    pub points: Vec<Value>,
    /// Generators of `A`, by name.
    pub basis: BTreeMap<String, Vec<f64>>,
    /// Values of `L` on the generators.
    pub functional: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_algebra: Option<Vec<Vec<usize>>>,
    /// Extension targets for `hb-extend`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Vec<f64>>,
    /// Generators of `B`; defaults to the block indicators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_basis: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hull_targets: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub subspace_variant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
}

/// Validated finite-space model.
#[derive(Debug, Clone)]
pub struct FiniteSpace {
    pub spec: FiniteSpec,
    pub ground: GroundSet,
    pub names: Vec<String>,
    pub generators: Vec<FunctionVec>,
    pub functional: Functional,
    pub algebra: Option<SigmaAlgebra>,
    pub targets: Vec<FunctionVec>,
    pub b: Option<Subspace>,
    pub hull_targets: Vec<FunctionVec>,
    pub witnesses: Option<Vec<FunctionVec>>,
}

impl FiniteSpace {
    pub fn n(&self) -> usize {
        self.ground.len()
    }

    /// `B`, defaulting to the span of the block indicators.
    pub fn b_or_default(&self, alg: &SigmaAlgebra) -> crate::Result<Subspace> {
        match &self.b {
            Some(b) => Ok(b.clone()),
            None => Subspace::spanned_by(self.n(), &alg.indicators()),
        }
    }
}

/// A measure as emitted by `build-measure`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMeasure {
    pub blocks: Vec<Vec<usize>>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomicSpec {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

/// Something `verify` can re-check.
#[derive(Debug, Clone)]
pub enum VerifyTarget {
    Moments(MomentSequence, AtomicMeasure),
    Finite(Box<FiniteSpace>, BlockMeasure),
}

#[derive(Debug, Clone)]
pub enum Input {
    Moments(MomentSequence),
    Finite(Box<FiniteSpace>),
    Verify(VerifyTarget),
}

/// Reads and validates `path`. The kind is chosen from the top-level keys:
/// `moments`, `points`, or `input` together with `measure`.
pub fn parse_input(path: &Path) -> Result<Input, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Input, ParseError> {
    let root: Value = decode(text)?;
    let Some(obj) = root.as_object() else {
        return Err(schema(".", "expected a JSON object"));
    };
    if let Some(v) = obj.get("schema") {
        if v != "1" {
            return Err(schema("schema", format!("unsupported schema version {v}")));
        }
    }
    if obj.contains_key("moments") {
        let spec: MomentSpec = decode(text)?;
        return Ok(Input::Moments(moment_model(spec, "")?));
    }
    if obj.contains_key("points") {
        let spec: FiniteSpec = decode(text)?;
        return Ok(Input::Finite(Box::new(finite_model(spec, "")?)));
    }
    if let (Some(input), Some(measure)) = (obj.get("input"), obj.get("measure")) {
        return verify_model(input, measure).map(Input::Verify);
    }
    Err(schema(
        ".",
        "unrecognized document: expected `moments`, `points`, or `input` with `measure`",
    ))
}

fn decode<T: DeserializeOwned>(text: &str) -> Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError::Schema(SchemaError {
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: inner.to_string(),
        })
    })
}

fn from_value<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T, ParseError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = join(prefix, &e.path().to_string());
        schema(path, e.into_inner())
    })
}

fn join(prefix: &str, field: &str) -> String {
    match (prefix.is_empty(), field) {
        (true, f) => f.to_string(),
        (false, ".") => prefix.to_string(),
        (false, f) => format!("{prefix}.{f}"),
    }
}

fn moment_model(spec: MomentSpec, prefix: &str) -> Result<MomentSequence, ParseError> {
    if spec.moments.len().is_multiple_of(2) {
        return Err(schema(
            join(prefix, "moments"),
            format!(
                "expected an odd number of entries m_0..m_2d, got {}",
                spec.moments.len()
            ),
        ));
    }
    if let Support::Interval { a, b } = spec.support {
        if !(a < b) {
            return Err(schema(
                join(prefix, "support"),
                format!("empty interval [{a}, {b}]"),
            ));
        }
    }
    MomentSequence::new(spec.moments, spec.support).map_err(|e| schema(join(prefix, "moments"), e))
}

fn vectors(rows: &[Vec<f64>], n: usize, path: &str) -> Result<Vec<FunctionVec>, ParseError> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let p = format!("{path}[{i}]");
            if row.len() != n {
                return Err(schema(p, format!("expected {n} values, got {}", row.len())));
            }
            FunctionVec::new(row.clone()).map_err(|e| schema(p, e))
        })
        .collect()
}

fn named_vectors(
    map: &BTreeMap<String, Vec<f64>>,
    n: usize,
    path: &str,
) -> Result<(Vec<String>, Vec<FunctionVec>), ParseError> {
    let mut names = Vec::with_capacity(map.len());
    let mut out = Vec::with_capacity(map.len());
    for (name, row) in map {
        let p = format!("{path}.{name}");
        if row.len() != n {
            return Err(schema(p, format!("expected {n} values, got {}", row.len())));
        }
        names.push(name.clone());
        out.push(FunctionVec::new(row.clone()).map_err(|e| schema(p, e))?);
    }
    Ok((names, out))
}

fn finite_model(spec: FiniteSpec, prefix: &str) -> Result<FiniteSpace, ParseError> {
    let p = |field: &str| join(prefix, field);
    let labels = spec
        .points
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(x) => Ok(x.to_string()),
            _ => Err(schema(
                format!("{}[{i}]", p("points")),
                "expected a string or number",
            )),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ground = GroundSet::new(labels).map_err(|e| schema(p("points"), e))?;
    let n = ground.len();

    let (names, generators) = named_vectors(&spec.basis, n, &p("basis"))?;
    if let Some(extra) = spec
        .functional
        .keys()
        .find(|k| !spec.basis.contains_key(*k))
    {
        return Err(schema(
            format!("{}.{extra}", p("functional")),
            "no basis function with this name",
        ));
    }
    let values = names
        .iter()
        .map(|name| {
            spec.functional
                .get(name)
                .copied()
                .ok_or_else(|| schema(format!("{}.{name}", p("functional")), "missing value"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let functional = Functional::from_generators(n, &generators, &values)
        .map_err(|e| schema(p("functional"), e))?;

    let algebra = spec
        .sigma_algebra
        .as_ref()
        .map(|blocks| {
            SigmaAlgebra::new(n, blocks.clone()).map_err(|e| schema(p("sigma_algebra"), e))
        })
        .transpose()?;
    let targets = vectors(&spec.targets, n, &p("targets"))?;
    let b = spec
        .b_basis
        .as_ref()
        .map(|map| {
            let (_, gens) = named_vectors(map, n, &p("b_basis"))?;
            Subspace::spanned_by(n, &gens).map_err(|e| schema(p("b_basis"), e))
        })
        .transpose()?;
    let hull_targets = vectors(&spec.hull_targets, n, &p("hull_targets"))?;
    let witnesses = spec
        .witnesses
        .as_ref()
        .map(|w| vectors(w, n, &p("witnesses")))
        .transpose()?;
    if let Some(eps) = &spec.eps_schedule {
        if let Some(i) = eps.iter().position(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(schema(
                format!("{}[{i}]", p("eps_schedule")),
                "must be positive",
            ));
        }
    }
    Ok(FiniteSpace {
        spec,
        ground,
        names,
        generators,
        functional,
        algebra,
        targets,
        b,
        hull_targets,
        witnesses,
    })
}

fn verify_model(input: &Value, measure: &Value) -> Result<VerifyTarget, ParseError> {
    let Some(obj) = input.as_object() else {
        return Err(schema("input", "expected a JSON object"));
    };
    if obj.contains_key("moments") {
        let spec: MomentSpec = from_value(input, "input")?;
        let m = moment_model(spec, "input")?;
        let atomic: AtomicSpec = from_value(measure, "measure")?;
        let mu =
            AtomicMeasure::new(atomic.atoms, atomic.weights).map_err(|e| schema("measure", e))?;
        return Ok(VerifyTarget::Moments(m, mu));
    }
    if obj.contains_key("points") {
        let spec: FiniteSpec = from_value(input, "input")?;
        let space = finite_model(spec, "input")?;
        let block: BlockMeasure = from_value(measure, "measure")?;
        if block.blocks.len() != block.mass.len() {
            return Err(schema("measure.mass", "one mass per block is required"));
        }
        SigmaAlgebra::new(space.n(), block.blocks.clone())
            .map_err(|e| schema("measure.blocks", e))?;
        return Ok(VerifyTarget::Finite(Box::new(space), block));
    }
    Err(schema(
        "input",
        "expected a moment or finite-space document",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_err(text: &str) -> SchemaError {
        match parse_str(text) {
            Err(ParseError::Schema(e)) => e,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn moment_document() {
        let Input::Moments(m) =
            parse_str(r#"{"moments":[1,0,1],"support":{"type":"line"}}"#).unwrap()
        else {
            panic!("wrong kind");
        };
        assert_eq!(m.half_degree(), 1);
        assert_eq!(m.support(), Support::Line);
    }

    #[test]
    fn even_moment_count_is_rejected() {
        let e = schema_err(r#"{"moments":[1,0],"support":{"type":"line"}}"#);
        assert_eq!(e.path, "moments");
    }

    #[test]
    fn type_errors_carry_position() {
        let e = schema_err("{\"moments\":[1,0,1],\n \"support\":{\"type\":\"torus\"}}");
        assert_eq!(e.path, "support.type");
        assert_eq!(e.line, Some(2));
        let e = schema_err(r#"{"moments":[1,"x",1],"support":{"type":"line"}}"#);
        assert_eq!(e.path, "moments[1]");
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let e = schema_err(
            r#"{"points":["a","b","c"],"basis":{"one":[1,1,1]},"functional":{"one":3},
                "sigma_algebra":[[0,1],[1,2]]}"#,
        );
        assert_eq!(e.path, "sigma_algebra");
    }

    #[test]
    fn functional_must_cover_basis() {
        let e =
            schema_err(r#"{"points":[1,2],"basis":{"f":[1,0],"g":[0,1]},"functional":{"f":1}}"#);
        assert_eq!(e.path, "functional.g");
        let e = schema_err(r#"{"points":[1,2],"basis":{"f":[1,0,3]},"functional":{"f":1}}"#);
        assert_eq!(e.path, "basis.f");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = schema_err(r#"{"moments":[1,0,1],"support":{"type":"line"},"extra":1}"#);
        assert!(e.message.contains("extra"), "{e:?}");
    }

    #[test]
    fn verify_documents() {
        let text = r#"{"input":{"moments":[1,0,1],"support":{"type":"line"}},
                       "measure":{"atoms":[-1,1],"weights":[0.5,0.5]},"verdict":"x"}"#;
        assert!(matches!(
            parse_str(text).unwrap(),
            Input::Verify(VerifyTarget::Moments(..))
        ));
        let text = r#"{"input":{"moments":[1,0,1],"support":{"type":"line"}},
                       "measure":{"atoms":[1,-1],"weights":[0.5,0.5]}}"#;
        assert_eq!(schema_err(text).path, "measure");
    }
}
