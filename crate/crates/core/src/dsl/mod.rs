//! The skills DSL: object references, function signatures, grounded plans and
//! body templates, plus the [`Api`] registry that validates and inlines them.
//!
//! Plans use a flat surface syntax, a `;`-separated list of invocations:
//!
//! ```
//! use provox_core::dsl::{Api, ObjectRef};
//!
//! let api = Api::base(vec![
//!     ObjectRef::new("RICE_KRISPIES", "Rice Krispies treat", &["rice krispies"]),
//!     ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunchbox"]).container(),
//! ]);
//! let plan = api.parse_plan("pickup(RICE_KRISPIES); goto(LUNCH_BAG); release()").unwrap();
//! assert_eq!(plan.len(), 3);
//! assert_eq!(plan.to_string(), "pickup(RICE_KRISPIES); goto(LUNCH_BAG); release()");
//! ```

mod api;
mod export;
mod syntax;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use api::{Api, MAX_EXPANSION_DEPTH};
pub use export::{ApiExport, FunctionRecord, ParamRecord, EXPORT_VERSION};

/// Names of the built-in motion primitives, in listing order.
pub const BASE_PRIMITIVES: [&str; 5] = ["goto", "pickup", "release", "open_gripper", "close_gripper"];

pub fn is_base_primitive(name: &str) -> bool {
    BASE_PRIMITIVES.contains(&name)
}

/// `[a-z][a-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// `[A-Z][A-Z0-9_]*`
pub fn is_object_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("syntax error at byte {position}: unexpected {token}")]
    Syntax { position: usize, token: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} argument(s) but {got} were given")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("a function named `{0}` already exists")]
    DuplicateName(String),
    #[error("body calls unknown function `{0}`")]
    UnknownBodyFunction(String),
    #[error("body references undeclared parameter `${0}`")]
    UnboundParam(String),
    #[error("parameter `{0}` is never used in the body")]
    UnreferencedParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("function `{0}` needs a non-empty body")]
    EmptyBody(String),
    #[error("no function named `{0}`")]
    NotFound(String),
    #[error("`{0}` is a base primitive and cannot be changed")]
    BasePrimitiveImmutable(String),
    #[error("still referenced by {}", .0.join(", "))]
    ReferencedByOthers(Vec<String>),
    #[error("body of `{name}` would call `{via}`, which depends on `{name}`")]
    CycleDetected { name: String, via: String },
    #[error("expansion exceeded depth {0}")]
    ExpansionDepthExceeded(usize),
    #[error("invalid object `{0}`: {1}")]
    InvalidObject(String, String),
    #[error("unsupported API export version {0}")]
    SchemaVersionMismatch(u32),
}

impl DslError {
    /// Stable machine-readable name, used on the wire and on the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            DslError::Syntax { .. } => "SyntaxError",
            DslError::UnknownFunction(_) => "UnknownFunction",
            DslError::ArityMismatch { .. } => "ArityMismatch",
            DslError::UnknownObject(_) => "UnknownObject",
            DslError::DuplicateName(_) => "DuplicateName",
            DslError::UnknownBodyFunction(_) => "UnknownBodyFunction",
            DslError::UnboundParam(_) => "UnboundParam",
            DslError::UnreferencedParam(_) => "UnreferencedParam",
            DslError::DuplicateParam(_) => "DuplicateParam",
            DslError::InvalidIdentifier(_) => "InvalidIdentifier",
            DslError::EmptyBody(_) => "EmptyBody",
            DslError::NotFound(_) => "NotFound",
            DslError::BasePrimitiveImmutable(_) => "BasePrimitiveImmutable",
            DslError::ReferencedByOthers(_) => "ReferencedByOthers",
            DslError::CycleDetected { .. } => "CycleDetected",
            DslError::ExpansionDepthExceeded(_) => "ExpansionDepthExceeded",
            DslError::InvalidObject(..) => "InvalidObject",
            DslError::SchemaVersionMismatch(_) => "SchemaVersionMismatch",
        }
    }
}

/// A physical object the robot can refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub id: String,
    pub display_name: String,
    pub aliases: Vec<String>,
    #[serde(rename = "container", default)]
    pub is_container: bool,
    pub position: [f64; 3],
}

impl ObjectRef {
    pub fn new(id: &str, display_name: &str, aliases: &[&str]) -> Self {
        ObjectRef {
            id: id.to_string(),
            display_name: display_name.to_string(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            is_container: false,
            position: [0.0; 3],
        }
    }

    pub fn container(mut self) -> Self {
        self.is_container = true;
        self
    }

    pub fn at(mut self, position: [f64; 3]) -> Self {
        self.position = position;
        self
    }

    pub fn validate(&self) -> Result<(), DslError> {
        let bad = |why: &str| Err(DslError::InvalidObject(self.id.clone(), why.to_string()));
        if !is_object_id(&self.id) {
            return bad("id must match [A-Z][A-Z0-9_]*");
        }
        if self.aliases.is_empty() {
            return bad("at least one alias is required");
        }
        if self.aliases.iter().any(|a| a.trim().is_empty() || a.chars().any(char::is_uppercase)) {
            return bad("aliases must be non-empty lowercase phrases");
        }
        if self.position.iter().any(|c| !c.is_finite()) {
            return bad("position must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    ObjectRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub description: String,
}

impl ParamSpec {
    pub fn object(name: &str) -> Self {
        ParamSpec { name: name.to_string(), kind: ParamKind::ObjectRef, description: String::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Base,
    TaughtMeta,
    TaughtLive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSignature {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub doc: String,
    pub provenance: Provenance,
}

impl SkillSignature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }
}

/// One grounded invocation, e.g. `goto(LUNCH_BAG)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Call {
    pub function: String,
    pub args: Vec<String>,
}

impl Call {
    pub fn new(function: &str, args: &[&str]) -> Self {
        Call { function: function.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.function, self.args.join(", "))
    }
}

/// A straight-line program: an ordered list of grounded calls.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub calls: Vec<Call>,
}

impl Plan {
    pub fn new(calls: Vec<Call>) -> Self {
        Plan { calls }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Call> {
        self.calls.iter()
    }

    /// Parses the surface syntax without checking anything against an API.
    pub fn parse_syntax(text: &str) -> Result<Plan, DslError> {
        syntax::parse_plan_syntax(text)
    }

    /// Every object id mentioned as an argument, in first-occurrence order.
    pub fn object_ids(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for arg in self.calls.iter().flat_map(|c| c.args.iter()) {
            if !seen.contains(&arg.as_str()) {
                seen.push(arg);
            }
        }
        seen
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, call) in self.calls.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{call}")?;
        }
        Ok(())
    }
}

impl FromStr for Plan {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Plan::parse_syntax(s)
    }
}

impl FromIterator<Call> for Plan {
    fn from_iter<I: IntoIterator<Item = Call>>(iter: I) -> Self {
        Plan { calls: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a Plan {
    type Item = &'a Call;
    type IntoIter = std::slice::Iter<'a, Call>;

    fn into_iter(self) -> Self::IntoIter {
        self.calls.iter()
    }
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Plan::parse_syntax(&text).map_err(serde::de::Error::custom)
    }
}

/// Argument slot of a body template step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateArg {
    Param(String),
    Const(String),
}

impl fmt::Display for TemplateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateArg::Param(name) => write!(f, "${name}"),
            TemplateArg::Const(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplateCall {
    pub function: String,
    pub args: Vec<TemplateArg>,
}

impl TemplateCall {
    pub fn parse(text: &str) -> Result<TemplateCall, DslError> {
        let mut calls = syntax::parse_template_syntax(text)?;
        if calls.len() != 1 {
            return Err(DslError::Syntax {
                position: 0,
                token: format!("{} calls where exactly one was expected", calls.len()),
            });
        }
        Ok(calls.remove(0))
    }

    /// Substitutes parameters with the ids in `bindings`.
    pub fn instantiate(&self, bindings: &[(&str, &str)]) -> Option<Call> {
        let args = self
            .args
            .iter()
            .map(|arg| match arg {
                TemplateArg::Const(id) => Some(id.clone()),
                TemplateArg::Param(p) => {
                    bindings.iter().find(|(name, _)| name == p).map(|(_, id)| id.to_string())
                }
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Call { function: self.function.clone(), args })
    }
}

impl FromStr for TemplateCall {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateCall::parse(s)
    }
}

impl fmt::Display for TemplateCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.function)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for TemplateCall {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateCall {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        TemplateCall::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BodyTemplate {
    pub steps: Vec<TemplateCall>,
}

impl BodyTemplate {
    pub fn parse(text: &str) -> Result<BodyTemplate, DslError> {
        Ok(BodyTemplate { steps: syntax::parse_template_syntax(text)? })
    }

    /// Names of parameters referenced anywhere in the body, first occurrence first.
    pub fn referenced_params(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for arg in self.steps.iter().flat_map(|s| s.args.iter()) {
            if let TemplateArg::Param(p) = arg {
                if !out.contains(&p.as_str()) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn constants(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for arg in self.steps.iter().flat_map(|s| s.args.iter()) {
            if let TemplateArg::Const(c) = arg {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn calls_function(&self, name: &str) -> bool {
        self.steps.iter().any(|s| s.function == name)
    }
}

impl fmt::Display for BodyTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionBody {
    Primitive,
    Template(BodyTemplate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub signature: SkillSignature,
    pub body: FunctionBody,
}

impl FunctionDef {
    /// Convenience constructor for taught functions with object parameters.
    pub fn taught(
        name: &str,
        params: &[&str],
        doc: &str,
        body: &str,
        provenance: Provenance,
    ) -> Result<FunctionDef, DslError> {
        Ok(FunctionDef {
            signature: SkillSignature {
                name: name.to_string(),
                params: params.iter().map(|p| ParamSpec::object(p)).collect(),
                doc: doc.to_string(),
                provenance,
            },
            body: FunctionBody::Template(BodyTemplate::parse(body)?),
        })
    }

    pub fn name(&self) -> &str {
        &self.signature.name
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self.body, FunctionBody::Primitive)
    }

    pub fn template(&self) -> Option<&BodyTemplate> {
        match &self.body {
            FunctionBody::Template(t) => Some(t),
            FunctionBody::Primitive => None,
        }
    }

    /// Python-style signature line used in prompts, e.g. `pack(self, obj: ObjectRef) -> None`.
    pub fn render_signature(&self) -> String {
        let mut out = format!("{}(self", self.signature.name);
        for p in &self.signature.params {
            out.push_str(&format!(", {}: ObjectRef", p.name));
        }
        out.push_str(") -> None");
        out
    }
}
