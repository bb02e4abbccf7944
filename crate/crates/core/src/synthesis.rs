//! Function synthesis: lifting constants in a taught decomposition into
//! parameters, and building definitions from the structured teach form.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    is_identifier, Api, BodyTemplate, DslError, FunctionBody, FunctionDef, ObjectRef, ParamSpec, Plan, Provenance,
    SkillSignature, TemplateArg, TemplateCall,
};
use crate::text;

/// Highest numeric suffix tried when a synthesized name collides.
pub const MAX_NAME_SUFFIX: u32 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("invalid teaching example: {0}")]
    InvalidExample(DslError),
    #[error("the decomposition is empty")]
    EmptyDecomposition,
    #[error("could not name the new function: {0}")]
    NamingFailed(String),
    #[error("`{0}` and all suffixed variants up to _{MAX_NAME_SUFFIX} are taken")]
    NameCollision(String),
    #[error(transparent)]
    Definition(DslError),
}

impl SynthesisError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthesisError::InvalidExample(e) | SynthesisError::Definition(e) => e.code(),
            SynthesisError::EmptyDecomposition => "EmptyDecomposition",
            SynthesisError::NamingFailed(_) => "NamingFailed",
            SynthesisError::NameCollision(_) => "NameCollision",
        }
    }
}

/// A trigger utterance paired with the grounded program that realizes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachExample {
    #[serde(alias = "utterance")]
    pub trigger_utterance: String,
    pub decomposition: Plan,
}

impl TeachExample {
    pub fn new(utterance: &str, decomposition: Plan) -> Self {
        TeachExample { trigger_utterance: utterance.to_string(), decomposition }
    }

    pub fn validate(&self, api: &Api) -> Result<(), SynthesisError> {
        if self.decomposition.is_empty() {
            return Err(SynthesisError::EmptyDecomposition);
        }
        api.validate_plan(&self.decomposition).map_err(SynthesisError::InvalidExample)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftingCandidate {
    pub lifted_ids: Vec<String>,
    pub param_names: Vec<String>,
}

impl LiftingCandidate {
    fn bindings(&self) -> Vec<(&str, &str)> {
        self.param_names.iter().map(String::as_str).zip(self.lifted_ids.iter().map(String::as_str)).collect()
    }
}

/// `obj`, `obj2`, `obj3`, ...
pub fn param_name(index: usize) -> String {
    if index == 0 {
        "obj".to_string()
    } else {
        format!("obj{}", index + 1)
    }
}

/// Every subset of the distinct argument ids, largest first, ties broken by
/// the first-occurrence positions of the chosen ids.
pub fn enumerate_liftings(example: &TeachExample) -> Vec<LiftingCandidate> {
    let ids = example.decomposition.object_ids();
    let k = ids.len();
    assert!(k < usize::BITS as usize, "too many distinct objects to enumerate");
    let mut subsets: Vec<Vec<usize>> =
        (0..1usize << k).map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect()).collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|subset| LiftingCandidate {
            param_names: (0..subset.len()).map(param_name).collect(),
            lifted_ids: subset.into_iter().map(|i| ids[i].to_string()).collect(),
        })
        .collect()
}

/// Ids whose display name or alias is mentioned in the utterance.
pub fn align_utterance<'a>(utterance: &str, objects: impl IntoIterator<Item = &'a ObjectRef>) -> BTreeSet<String> {
    text::mentioned_ids(utterance, objects).into_iter().collect()
}

/// Which constants of a decomposition become parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftPolicy {
    /// Mentioned objects that get picked up. Destinations stay constant. When
    /// no picked-up object is mentioned by name, every picked-up object is lifted.
    #[default]
    Manipulated,
    AllAligned,
    All,
}

impl FromStr for LiftPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manipulated" => Ok(LiftPolicy::Manipulated),
            "all-aligned" => Ok(LiftPolicy::AllAligned),
            "all" => Ok(LiftPolicy::All),
            other => Err(format!("unknown lift policy `{other}`")),
        }
    }
}

/// Ids passed to `pickup` once the decomposition is fully inlined.
fn manipulated_ids(example: &TeachExample, api: &Api) -> BTreeSet<String> {
    api.inline_plan(&example.decomposition)
        .map(|p| p.calls.into_iter().filter(|c| c.function == "pickup").flat_map(|c| c.args).collect())
        .unwrap_or_default()
}

pub fn select_lifting(example: &TeachExample, api: &Api, policy: LiftPolicy) -> LiftingCandidate {
    let ids = example.decomposition.object_ids();
    let objects: Vec<&ObjectRef> = ids.iter().filter_map(|id| api.object(id)).collect();
    let aligned = align_utterance(&example.trigger_utterance, objects);
    let wanted: BTreeSet<String> = match policy {
        LiftPolicy::All => ids.iter().map(|s| s.to_string()).collect(),
        LiftPolicy::AllAligned => aligned,
        LiftPolicy::Manipulated => {
            let manipulated = manipulated_ids(example, api);
            let both: BTreeSet<String> = manipulated.intersection(&aligned).cloned().collect();
            if both.is_empty() {
                manipulated
            } else {
                both
            }
        }
    };
    enumerate_liftings(example)
        .into_iter()
        .find(|c| c.lifted_ids.len() == wanted.len() && c.lifted_ids.iter().all(|id| wanted.contains(id)))
        .expect("every subset of the argument ids is enumerated")
}

/// Replaces lifted constants with their parameters.
pub fn lift_body(decomposition: &Plan, lifting: &LiftingCandidate) -> BodyTemplate {
    let param_for = |id: &str| {
        lifting.lifted_ids.iter().position(|l| l == id).map(|i| lifting.param_names[i].clone())
    };
    BodyTemplate {
        steps: decomposition
            .iter()
            .map(|call| TemplateCall {
                function: call.function.clone(),
                args: call
                    .args
                    .iter()
                    .map(|a| match param_for(a) {
                        Some(p) => TemplateArg::Param(p),
                        None => TemplateArg::Const(a.clone()),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Inverse of [`lift_body`]: rebinds parameters to the lifted ids.
pub fn apply_lifting(body: &BodyTemplate, lifting: &LiftingCandidate) -> Option<Plan> {
    let bindings = lifting.bindings();
    body.steps.iter().map(|s| s.instantiate(&bindings)).collect::<Option<Vec<_>>>().map(Plan::new)
}

/// Input handed to a [`NameDocProvider`].
pub struct NamingRequest<'a> {
    pub utterance: &'a str,
    pub decomposition: &'a Plan,
    pub body: &'a BodyTemplate,
    pub lifted_ids: &'a [String],
    pub api: &'a Api,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameDoc {
    pub name: String,
    pub doc: String,
}

/// Produces a function name and docstring for a synthesized body.
pub trait NameDocProvider: Send + Sync {
    fn name_and_doc(&self, request: &NamingRequest<'_>) -> Result<NameDoc, String>;
}

/// Deterministic namer: the first verb of the utterance, and the utterance with
/// lifted objects replaced by "a specified object".
#[derive(Debug, Clone, Copy, Default)]
pub struct MockNamer;

const LEADING_FILLER: &[&str] = &[
    "please", "can", "could", "would", "will", "you", "robot", "hey", "ok", "okay", "now", "then", "just", "i",
    "want", "need", "to", "so", "and",
];

impl NameDocProvider for MockNamer {
    fn name_and_doc(&self, request: &NamingRequest<'_>) -> Result<NameDoc, String> {
        let raw = text::raw_words(request.utterance);
        let verb = raw
            .iter()
            .map(|w| w.to_lowercase())
            .find(|w| !LEADING_FILLER.contains(&w.as_str()))
            .ok_or_else(|| format!("no verb in {:?}", request.utterance))?;
        let name: String = verb.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        if !is_identifier(&name) {
            return Err(format!("`{verb}` does not make a valid function name"));
        }

        let objects: Vec<&ObjectRef> =
            request.decomposition.object_ids().into_iter().filter_map(|id| request.api.object(id)).collect();
        let lowered: Vec<String> = raw.iter().map(|w| w.to_lowercase()).collect();
        let mentions = text::find_mentions(&lowered, objects.iter().copied());
        let mut out: Vec<String> = Vec::new();
        let mut i = 0;
        while i < raw.len() {
            match mentions.iter().find(|m| m.start == i) {
                Some(m) => {
                    if out.last().is_some_and(|w| text::is_determiner(w)) {
                        out.pop();
                    }
                    if request.lifted_ids.contains(&m.id) {
                        out.push("a specified object".to_string());
                    } else {
                        let display = &request.api.object(&m.id).expect("mention of a known object").display_name;
                        out.push(format!("the {display}"));
                    }
                    i += m.len;
                }
                None => {
                    out.push(raw[i].to_string());
                    i += 1;
                }
            }
        }
        let mut doc = out.join(" ");
        if let Some(first) = doc.chars().next() {
            doc.replace_range(..first.len_utf8(), &first.to_uppercase().to_string());
        }
        Ok(NameDoc { name, doc })
    }
}

fn unique_name(base: &str, api: &Api) -> Result<String, SynthesisError> {
    if !api.contains(base) {
        return Ok(base.to_string());
    }
    (2..=MAX_NAME_SUFFIX)
        .map(|n| format!("{base}_{n}"))
        .find(|candidate| !api.contains(candidate))
        .ok_or_else(|| SynthesisError::NameCollision(base.to_string()))
}

/// Builds a new definition from a live teaching example.
pub fn synthesize_function(
    example: &TeachExample,
    api: &Api,
    namer: &dyn NameDocProvider,
    policy: LiftPolicy,
) -> Result<FunctionDef, SynthesisError> {
    example.validate(api)?;
    let lifting = select_lifting(example, api, policy);
    let body = lift_body(&example.decomposition, &lifting);
    let named = namer
        .name_and_doc(&NamingRequest {
            utterance: &example.trigger_utterance,
            decomposition: &example.decomposition,
            body: &body,
            lifted_ids: &lifting.lifted_ids,
            api,
        })
        .map_err(SynthesisError::NamingFailed)?;
    if !is_identifier(&named.name) {
        return Err(SynthesisError::NamingFailed(format!("`{}` is not a valid identifier", named.name)));
    }
    let name = unique_name(&named.name, api)?;
    let def = FunctionDef {
        signature: SkillSignature {
            name,
            params: lifting.param_names.iter().map(|p| ParamSpec::object(p)).collect(),
            doc: named.doc,
            provenance: Provenance::TaughtLive,
        },
        body: FunctionBody::Template(body),
    };
    api.register(def.clone()).map_err(SynthesisError::Definition)?;
    Ok(def)
}

/// The structured teach form: a name, a behavior description and a step list
/// whose arguments are objects or declared parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachForm {
    pub name: String,
    #[serde(alias = "behavior")]
    pub behavior_description: String,
    #[serde(default)]
    pub params: Vec<String>,
    pub steps: Vec<TemplateCall>,
}

impl fmt::Display for TeachForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) := {}", self.name, self.params.join(", "), BodyTemplate { steps: self.steps.clone() })
    }
}

impl TeachForm {
    /// The definition the form describes, unchecked.
    pub fn to_definition(&self) -> FunctionDef {
        FunctionDef {
            signature: SkillSignature {
                name: self.name.clone(),
                params: self.params.iter().map(|p| ParamSpec::object(p)).collect(),
                doc: self.behavior_description.clone(),
                provenance: Provenance::TaughtMeta,
            },
            body: FunctionBody::Template(BodyTemplate { steps: self.steps.clone() }),
        }
    }
}

pub fn synthesize_from_form(form: &TeachForm, api: &Api) -> Result<FunctionDef, SynthesisError> {
    let def = form.to_definition();
    api.register(def.clone()).map_err(SynthesisError::Definition)?;
    Ok(def)
}
