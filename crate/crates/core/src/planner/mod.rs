//! Plan generation: the request/response contract, backend selection, and the
//! validate-and-retry loop every backend goes through.

mod mock;
mod prompt;
pub mod remote;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Api, Call, DslError, Plan};
use crate::history::InteractionStep;

pub use mock::MockPlanner;
pub use prompt::{assemble_prompt, derive_tool_schema, HISTORY_WINDOW, PREAMBLE, SUBMIT_PLAN};

/// Upper bound on calls in a single generated plan.
pub const MAX_PLAN_CALLS: usize = 12;

/// Environment variable holding the remote backend credential.
pub const API_KEY_ENV: &str = "PROVOX_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "kebab-case")]
pub enum PlannerInput {
    UserUtterance(String),
    ProactiveTrigger(String),
}

impl PlannerInput {
    pub fn text(&self) -> &str {
        match self {
            PlannerInput::UserUtterance(t) | PlannerInput::ProactiveTrigger(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerRequest {
    pub goal: String,
    pub api: Api,
    pub history: Vec<InteractionStep>,
    pub input: PlannerInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "value", rename_all = "kebab-case")]
pub enum Outcome {
    Plan(Plan),
    Clarification(String),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerResponse {
    pub outcome: Outcome,
    pub retry_count: u32,
}

/// Unvalidated backend output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawOutcome {
    PlanText(String),
    Calls(Vec<Call>),
    Clarification(String),
    Done,
}

/// Why a raw plan was refused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Dsl(DslError),
    Malformed(String),
    TooLong(usize),
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::Dsl(e) => e.code(),
            Rejection::Malformed(_) => "MalformedToolCall",
            Rejection::TooLong(_) => "PlanTooLong",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Dsl(e) => write!(f, "{} ({e})", e.code()),
            Rejection::Malformed(m) => write!(f, "MalformedToolCall ({m})"),
            Rejection::TooLong(n) => write!(f, "PlanTooLong ({n} calls, at most {MAX_PLAN_CALLS} allowed)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("planner backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed tool call: {0}")]
    MalformedToolCall(String),
    #[error("no valid plan after {retries} retries; last error: {last}")]
    InvalidPlanAfterRetries { retries: u32, last: Rejection },
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl PlannerError {
    pub fn code(&self) -> &'static str {
        match self {
            PlannerError::BackendUnavailable(_) => "BackendUnavailable",
            PlannerError::MalformedToolCall(_) => "MalformedToolCall",
            PlannerError::InvalidPlanAfterRetries { .. } => "InvalidPlanAfterRetries",
            PlannerError::Config(_) => "BackendConfig",
        }
    }
}

/// A plan generator. `corrections` carries one message per rejected attempt.
pub trait Backend: Send + Sync {
    fn propose(&self, request: &PlannerRequest, corrections: &[String]) -> Result<RawOutcome, PlannerError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("unknown backend `{other}` (expected mock or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    /// Name of the environment variable holding the credential.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            temperature: 0.0,
            max_retries: 2,
            api_key_env: API_KEY_ENV.to_string(),
            timeout_secs: 60,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig::default()
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.kind == BackendKind::Remote && (self.endpoint.is_none() || self.model.is_none()) {
            return Err(PlannerError::Config("the remote backend needs both an endpoint and a model".into()));
        }
        Ok(())
    }

    /// Instantiates the configured backend. Remote backends read the credential now.
    pub fn build(&self) -> Result<Arc<dyn Backend>, PlannerError> {
        self.validate()?;
        match self.kind {
            BackendKind::Mock => Ok(Arc::new(MockPlanner)),
            BackendKind::Remote => {
                let transport = remote::http_transport(self)?;
                Ok(Arc::new(remote::RemotePlanner::new(transport, self)))
            }
        }
    }
}

fn check(raw: RawOutcome, api: &Api) -> Result<Outcome, Rejection> {
    let plan = match raw {
        RawOutcome::Done => return Ok(Outcome::Done),
        RawOutcome::Clarification(text) => return Ok(Outcome::Clarification(text)),
        RawOutcome::PlanText(text) => Plan::parse_syntax(&text).map_err(Rejection::Dsl)?,
        RawOutcome::Calls(calls) => Plan::new(calls),
    };
    if plan.len() > MAX_PLAN_CALLS {
        return Err(Rejection::TooLong(plan.len()));
    }
    api.validate_plan(&plan).map_err(Rejection::Dsl)?;
    Ok(Outcome::Plan(plan))
}

/// Validates `first`; on failure re-asks `backend` with the error appended, up
/// to `max_retries` times.
pub fn validate_and_retry(
    first: Result<RawOutcome, PlannerError>,
    request: &PlannerRequest,
    backend: &dyn Backend,
    max_retries: u32,
) -> Result<PlannerResponse, PlannerError> {
    let mut corrections: Vec<String> = Vec::new();
    let mut attempt = first;
    let mut retries = 0;
    loop {
        let rejection = match attempt {
            Ok(raw) => match check(raw, &request.api) {
                Ok(outcome) => return Ok(PlannerResponse { outcome, retry_count: retries }),
                Err(r) => r,
            },
            Err(PlannerError::MalformedToolCall(m)) => Rejection::Malformed(m),
            Err(other) => return Err(other),
        };
        if retries >= max_retries {
            return Err(PlannerError::InvalidPlanAfterRetries { retries, last: rejection });
        }
        tracing::debug!(%rejection, retries, "plan rejected, retrying");
        corrections.push(format!(
            "Your previous answer was rejected: {rejection}. Use only functions from the API with the listed object ids."
        ));
        retries += 1;
        attempt = backend.propose(request, &corrections);
    }
}

/// Runs `backend` and returns a validated response.
pub fn generate(
    request: &PlannerRequest,
    backend: &dyn Backend,
    max_retries: u32,
) -> Result<PlannerResponse, PlannerError> {
    validate_and_retry(backend.propose(request, &[]), request, backend, max_retries)
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::dsl::ObjectRef;

    fn api() -> Api {
        Api::base(vec![
            ObjectRef::new("SKITTLES", "Skittles", &["skittles"]),
            ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunch bag"]).container(),
        ])
    }

    fn request() -> PlannerRequest {
        PlannerRequest {
            goal: "pack".into(),
            api: api(),
            history: vec![],
            input: PlannerInput::UserUtterance("pack the skittles".into()),
        }
    }

    /// Replays a fixed list of outputs and records the corrections it saw.
    struct Scripted {
        outputs: Mutex<Vec<Result<RawOutcome, PlannerError>>>,
        seen: Mutex<Vec<Vec<String>>>,
    }

    impl Scripted {
        fn new(mut outputs: Vec<Result<RawOutcome, PlannerError>>) -> Self {
            outputs.reverse();
            Scripted { outputs: Mutex::new(outputs), seen: Mutex::new(vec![]) }
        }
    }

    impl Backend for Scripted {
        fn propose(&self, _: &PlannerRequest, corrections: &[String]) -> Result<RawOutcome, PlannerError> {
            self.seen.lock().unwrap().push(corrections.to_vec());
            self.outputs.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn text(s: &str) -> Result<RawOutcome, PlannerError> {
        Ok(RawOutcome::PlanText(s.into()))
    }

    #[test]
    fn valid_first_attempt_unchanged() {
        let b = Scripted::new(vec![text("pickup(SKITTLES); goto(LUNCH_BAG); release()")]);
        let r = generate(&request(), &b, 2).unwrap();
        assert_eq!(r.retry_count, 0);
        assert_eq!(r.outcome, Outcome::Plan(api().parse_plan("pickup(SKITTLES); goto(LUNCH_BAG); release()").unwrap()));
    }

    #[test]
    fn invalid_then_valid() {
        let b = Scripted::new(vec![text("pack(SKITTLES)"), text("pickup(SKITTLES)")]);
        let r = generate(&request(), &b, 2).unwrap();
        assert_eq!(r.retry_count, 1);
        let seen = b.seen.lock().unwrap();
        assert!(seen[0].is_empty());
        assert_eq!(seen[1].len(), 1);
        assert!(seen[1][0].contains("UnknownFunction"), "{}", seen[1][0]);
    }

    #[test]
    fn retries_exhausted() {
        let b = Scripted::new(vec![text("pack(SKITTLES)"), text("pack(SKITTLES)"), text("pack(SKITTLES)")]);
        assert_eq!(
            generate(&request(), &b, 2),
            Err(PlannerError::InvalidPlanAfterRetries {
                retries: 2,
                last: Rejection::Dsl(DslError::UnknownFunction("pack".into()))
            })
        );
    }

    #[test]
    fn malformed_tool_calls_are_retried_but_outages_are_not() {
        let b = Scripted::new(vec![Err(PlannerError::MalformedToolCall("bad json".into())), text("release()")]);
        assert_eq!(generate(&request(), &b, 1).unwrap().retry_count, 1);
        let b = Scripted::new(vec![Err(PlannerError::BackendUnavailable("down".into()))]);
        assert_eq!(generate(&request(), &b, 3), Err(PlannerError::BackendUnavailable("down".into())));
    }

    #[test]
    fn plan_length_capped() {
        let long = vec!["release()"; MAX_PLAN_CALLS + 1].join("; ");
        let b = Scripted::new(vec![text(&long)]);
        assert_eq!(
            generate(&request(), &b, 0),
            Err(PlannerError::InvalidPlanAfterRetries { retries: 0, last: Rejection::TooLong(13) })
        );
    }

    #[test]
    fn clarification_and_done_pass_through() {
        let b = Scripted::new(vec![Ok(RawOutcome::Clarification("Which bag?".into()))]);
        assert_eq!(generate(&request(), &b, 0).unwrap().outcome, Outcome::Clarification("Which bag?".into()));
        let b = Scripted::new(vec![Ok(RawOutcome::Done)]);
        assert_eq!(generate(&request(), &b, 0).unwrap().outcome, Outcome::Done);
    }

    #[test]
    fn config_validation() {
        let remote = BackendConfig { kind: BackendKind::Remote, ..BackendConfig::default() };
        assert!(matches!(remote.validate(), Err(PlannerError::Config(_))));
        assert!(BackendConfig::mock().build().is_ok());
        let cfg: BackendConfig = toml::from_str("kind = \"remote\"\nendpoint = \"http://x\"\nmodel = \"m\"").unwrap();
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.max_retries, 2);
        assert!(cfg.validate().is_ok());
    }
}
