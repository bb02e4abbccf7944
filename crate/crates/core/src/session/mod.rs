//! The interaction state machine.
//!
//! A [`Session`] owns the goal, the API, the world and the history. In
//! meta-prompting mode it edits the goal and API and previews plans without
//! executing them; in live mode it plans, gates every plan on confirmation
//! (unless configured otherwise for user plans), executes, and asks for a
//! proactive suggestion after each completed execution.

pub mod context;
pub mod metrics;
pub mod transcript;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dsl::{Api, DslError, FunctionDef, FunctionRecord, ObjectRef, Plan};
use crate::history::{Confirmation, ExecutionStatus, Initiator, InteractionStep};
use crate::planner::{generate, Backend, BackendConfig, Outcome, PlannerError, PlannerInput, PlannerRequest};
use crate::proactive::{suggest_next, Proposal, Suggestion};
use crate::sim::{load_scene, SceneError, SceneSpec, SimEvent, WorldState};
use crate::synthesis::{
    synthesize_from_form, synthesize_function, LiftPolicy, MockNamer, NameDocProvider, SynthesisError, TeachExample,
    TeachForm,
};

pub use context::{import_context, ContextFile};
pub use metrics::{compute_metrics, MetricsReport, TimeBreakdown};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    MetaPrompting,
    Live,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    #[default]
    Idle,
    Planning,
    AwaitingConfirmation,
    Executing,
    Teaching,
    Done,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The single item awaiting a confirm or reject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pending {
    Suggestion(Suggestion),
    AwaitingUserConfirm { plan: Plan, utterance: String, t_start_ms: u64 },
}

impl Pending {
    pub fn plan(&self) -> &Plan {
        match self {
            Pending::Suggestion(s) => &s.plan,
            Pending::AwaitingUserConfirm { plan, .. } => plan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub proactive: bool,
    pub auto_confirm_user_plans: bool,
    /// Simulated human time per utterance or teaching act.
    pub utterance_cost_ms: u64,
    /// Simulated human time per confirm or reject.
    pub confirmation_cost_ms: u64,
    /// Simulated planning latency added to each user instruction.
    pub planning_cost_ms: u64,
    pub max_retries: u32,
    pub lift_policy: LiftPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            proactive: true,
            auto_confirm_user_plans: false,
            utterance_cost_ms: 8_000,
            confirmation_cost_ms: 2_000,
            planning_cost_ms: 0,
            max_retries: 2,
            lift_policy: LiftPolicy::Manipulated,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("`{op}` is not allowed in state {state} ({mode:?} mode)")]
    WrongState { op: &'static str, state: SessionState, mode: Mode },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongState { .. } => "WrongState",
            SessionError::Planner(e) => e.code(),
            SessionError::Synthesis(e) => e.code(),
            SessionError::Dsl(e) => e.code(),
            SessionError::Scene(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    StateChanged,
    Suggestion,
    ExecutionEvent,
    Message,
}

/// One server-push message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    #[serde(rename = "type")]
    pub kind: EventType,
    pub payload: Value,
}

/// Result of an instruction or a confirm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reply", rename_all = "kebab-case")]
pub enum Reply {
    /// A plan awaits confirmation.
    Pending { plan: Plan },
    Executed { plan: Plan, events: Vec<SimEvent>, fault: Option<String> },
    Rejected { plan: Plan },
    Clarification { text: String },
    Done,
    Failed { error: String, message: String },
}

/// Simulated time per bucket, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeLedger {
    pub instructing_ms: u64,
    pub executing_ms: u64,
    pub confirming_ms: u64,
    pub idle_ms: u64,
}

impl TimeLedger {
    pub fn now_ms(&self) -> u64 {
        self.instructing_ms + self.executing_ms + self.confirming_ms + self.idle_ms
    }
}

/// Read-only view served to clients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub state: SessionState,
    pub mode: Mode,
    pub goal: String,
    pub proactive: bool,
    pub objects: Vec<ObjectRef>,
    pub api: Vec<FunctionRecord>,
    pub world: WorldState,
    pub history: Vec<InteractionStep>,
    pub pending: Option<Pending>,
    pub metrics: MetricsReport,
}

pub struct Session {
    scene: SceneSpec,
    goal: String,
    api: Api,
    history: Vec<InteractionStep>,
    mode: Mode,
    state: SessionState,
    ended: bool,
    world: WorldState,
    pending: Option<Pending>,
    backend: Arc<dyn Backend>,
    backend_config: BackendConfig,
    namer: Arc<dyn NameDocProvider>,
    config: SessionConfig,
    ledger: TimeLedger,
    outbox: Vec<SessionEvent>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("mode", &self.mode)
            .field("state", &self.state)
            .field("goal", &self.goal)
            .field("steps", &self.history.len())
            .finish_non_exhaustive()
    }
}

enum Bucket {
    Instructing,
    Executing,
    Confirming,
    Idle,
}

impl Session {
    /// A session over `scene` with the base API and an empty goal.
    pub fn new(scene: SceneSpec, mode: Mode, config: SessionConfig, backend: Arc<dyn Backend>) -> Result<Session, SessionError> {
        let world = load_scene(&scene)?;
        Ok(Session {
            api: scene.base_api(),
            scene,
            goal: String::new(),
            history: Vec::new(),
            mode,
            state: SessionState::Idle,
            ended: false,
            world,
            pending: None,
            backend,
            backend_config: BackendConfig::mock(),
            namer: Arc::new(MockNamer),
            config,
            ledger: TimeLedger::default(),
            outbox: Vec::new(),
        })
    }

    /// A session preloaded with a context file's goal and functions.
    pub fn from_context(
        scene: SceneSpec,
        context: &ContextFile,
        mode: Mode,
        config: SessionConfig,
        backend: Arc<dyn Backend>,
    ) -> Result<Session, SessionError> {
        let (goal, api) = import_context(context, &scene)?;
        let mut session = Session::new(scene, mode, config, backend)?;
        session.goal = goal;
        session.api = api;
        Ok(session)
    }

    pub fn with_namer(mut self, namer: Arc<dyn NameDocProvider>) -> Self {
        self.namer = namer;
        self
    }

    /// Records the configuration the backend was built from, for snapshots and logs.
    pub fn with_backend_config(mut self, cfg: BackendConfig) -> Self {
        self.backend_config = cfg;
        self
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }
    pub fn api(&self) -> &Api {
        &self.api
    }
    pub fn history(&self) -> &[InteractionStep] {
        &self.history
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn state(&self) -> SessionState {
        self.state
    }
    pub fn world(&self) -> &WorldState {
        &self.world
    }
    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }
    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }
    pub fn config(&self) -> &SessionConfig {
        &self.config
    }
    pub fn backend_config(&self) -> &BackendConfig {
        &self.backend_config
    }
    pub fn ledger(&self) -> TimeLedger {
        self.ledger
    }
    pub fn now_ms(&self) -> u64 {
        self.ledger.now_ms()
    }
    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn metrics(&self) -> MetricsReport {
        compute_metrics(&self.history, &self.ledger)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.state,
            mode: self.mode,
            goal: self.goal.clone(),
            proactive: self.config.proactive,
            objects: self.api.objects().cloned().collect(),
            api: self.api.functions().map(FunctionRecord::from).collect(),
            world: self.world.clone(),
            history: self.history.clone(),
            pending: self.pending.clone(),
            metrics: self.metrics(),
        }
    }

    pub fn export_context(&self) -> ContextFile {
        ContextFile::new(&self.goal, &self.api)
    }

    /// Takes the events produced since the last call.
    pub fn drain_events(&mut self) -> Vec<SessionEvent> {
        std::mem::take(&mut self.outbox)
    }

    fn emit(&mut self, kind: EventType, payload: Value) {
        self.outbox.push(SessionEvent { kind, payload });
    }

    fn message(&mut self, text: impl Into<String>) {
        let text = text.into();
        self.emit(EventType::Message, json!({ "text": text }));
    }

    fn set_state(&mut self, state: SessionState) {
        if self.state != state {
            self.state = state;
            self.emit(EventType::StateChanged, json!({ "state": state, "mode": self.mode }));
        }
    }

    fn advance(&mut self, bucket: Bucket, ms: u64) {
        let slot = match bucket {
            Bucket::Instructing => &mut self.ledger.instructing_ms,
            Bucket::Executing => &mut self.ledger.executing_ms,
            Bucket::Confirming => &mut self.ledger.confirming_ms,
            Bucket::Idle => &mut self.ledger.idle_ms,
        };
        *slot += ms;
    }

    fn require(&self, op: &'static str, mode: Mode, states: &[SessionState]) -> Result<(), SessionError> {
        if self.ended || self.mode != mode || !states.contains(&self.state) {
            return Err(SessionError::WrongState { op, state: self.state, mode: self.mode });
        }
        Ok(())
    }

    fn push_step(&mut self, mut step: InteractionStep) {
        step.index = self.history.len();
        debug_assert!(step.check_invariants().is_ok(), "{:?}", step.check_invariants());
        self.history.push(step);
    }

    // ---- live mode ----

    /// Plans a user instruction. Backend problems become a `Failed` reply, not an error.
    pub fn handle_utterance(&mut self, text: &str) -> Result<Reply, SessionError> {
        self.require("utterance", Mode::Live, &[SessionState::Idle, SessionState::Done])?;
        let t_start_ms = self.now_ms();
        self.set_state(SessionState::Planning);
        self.advance(Bucket::Instructing, self.config.utterance_cost_ms + self.config.planning_cost_ms);
        let request = PlannerRequest {
            goal: self.goal.clone(),
            api: self.api.clone(),
            history: self.history.clone(),
            input: PlannerInput::UserUtterance(text.to_string()),
        };
        match generate(&request, self.backend.as_ref(), self.config.max_retries) {
            Ok(response) => match response.outcome {
                Outcome::Plan(plan) if self.config.auto_confirm_user_plans => {
                    Ok(self.execute(Initiator::User, Some(text.to_string()), plan, Confirmation::NotRequired, t_start_ms))
                }
                Outcome::Plan(plan) => {
                    self.pending = Some(Pending::AwaitingUserConfirm {
                        plan: plan.clone(),
                        utterance: text.to_string(),
                        t_start_ms,
                    });
                    self.set_state(SessionState::AwaitingConfirmation);
                    Ok(Reply::Pending { plan })
                }
                Outcome::Clarification(q) => {
                    self.message(q.clone());
                    self.set_state(SessionState::Idle);
                    Ok(Reply::Clarification { text: q })
                }
                Outcome::Done => {
                    self.message("There is nothing left to do.");
                    self.set_state(SessionState::Idle);
                    Ok(Reply::Done)
                }
            },
            Err(e) => {
                self.message(format!("{}: {e}", e.code()));
                self.set_state(SessionState::Idle);
                Ok(Reply::Failed { error: e.code().to_string(), message: e.to_string() })
            }
        }
    }

    /// Executes the pending plan.
    pub fn confirm(&mut self) -> Result<Reply, SessionError> {
        self.require("confirm", Mode::Live, &[SessionState::AwaitingConfirmation])?;
        let pending = self.pending.take().expect("AwaitingConfirmation always has a pending item");
        self.advance(Bucket::Confirming, self.config.confirmation_cost_ms);
        Ok(match pending {
            Pending::Suggestion(s) => {
                self.execute(Initiator::RobotProactive, None, s.plan, Confirmation::Confirmed, s.created_at_ms)
            }
            Pending::AwaitingUserConfirm { plan, utterance, t_start_ms } => {
                self.execute(Initiator::User, Some(utterance), plan, Confirmation::Confirmed, t_start_ms)
            }
        })
    }

    /// Drops the pending plan without touching the world.
    pub fn reject(&mut self) -> Result<Reply, SessionError> {
        self.require("reject", Mode::Live, &[SessionState::AwaitingConfirmation])?;
        let pending = self.pending.take().expect("AwaitingConfirmation always has a pending item");
        self.advance(Bucket::Confirming, self.config.confirmation_cost_ms);
        let (initiator, utterance, plan, t_start_ms) = match pending {
            Pending::Suggestion(s) => (Initiator::RobotProactive, None, s.plan, s.created_at_ms),
            Pending::AwaitingUserConfirm { plan, utterance, t_start_ms } => {
                (Initiator::User, Some(utterance), plan, t_start_ms)
            }
        };
        self.push_step(InteractionStep {
            index: 0,
            initiator,
            utterance,
            plan: plan.clone(),
            confirmation: Confirmation::Rejected,
            execution: ExecutionStatus::Skipped,
            t_start_ms,
            t_end_ms: self.now_ms(),
            taught: None,
            world_hash: None,
        });
        self.set_state(SessionState::Idle);
        Ok(Reply::Rejected { plan })
    }

    fn execute(
        &mut self,
        initiator: Initiator,
        utterance: Option<String>,
        plan: Plan,
        confirmation: Confirmation,
        t_start_ms: u64,
    ) -> Reply {
        self.set_state(SessionState::Executing);
        let run = self.world.exec_plan(&plan, &self.api);
        self.advance(Bucket::Executing, run.duration_ms());
        for event in &run.events {
            self.emit(EventType::ExecutionEvent, serde_json::to_value(event).expect("events serialize"));
        }
        self.world = run.world;
        let fault = run.events.last().filter(|e| e.is_fault()).and_then(|e| e.fault.as_ref()).map(|f| f.code().to_string());
        let events = run.events;
        let execution = if fault.is_some() {
            ExecutionStatus::Faulted { events: events.clone() }
        } else {
            ExecutionStatus::Completed { events: events.clone() }
        };
        self.push_step(InteractionStep {
            index: 0,
            initiator,
            utterance,
            plan: plan.clone(),
            confirmation,
            execution,
            t_start_ms,
            t_end_ms: self.now_ms(),
            taught: None,
            world_hash: Some(self.world.hash()),
        });
        if let Some(code) = &fault {
            self.message(format!("Execution stopped: {code}"));
            self.set_state(SessionState::Idle);
        } else if self.config.proactive {
            self.propose_next();
        } else {
            self.set_state(SessionState::Idle);
        }
        Reply::Executed { plan, events, fault }
    }

    fn propose_next(&mut self) {
        self.set_state(SessionState::Planning);
        let proposal = suggest_next(
            &self.goal,
            &self.api,
            &self.history,
            self.backend.as_ref(),
            self.config.max_retries,
            self.now_ms(),
        );
        match proposal {
            Proposal::Suggest(s) => {
                self.emit(EventType::Suggestion, serde_json::to_value(&s).expect("suggestions serialize"));
                self.pending = Some(Pending::Suggestion(s));
                self.set_state(SessionState::AwaitingConfirmation);
            }
            Proposal::Done => {
                self.message("The goal looks complete.");
                self.set_state(SessionState::Done);
            }
            Proposal::Idle => self.set_state(SessionState::Idle),
        }
    }

    /// Synthesizes and registers a function from a demonstration.
    pub fn teach_live(&mut self, example: &TeachExample) -> Result<FunctionDef, SessionError> {
        self.require(
            "teach",
            Mode::Live,
            &[SessionState::Idle, SessionState::Done, SessionState::AwaitingConfirmation],
        )?;
        let previous = self.state;
        self.set_state(SessionState::Teaching);
        let t_start_ms = self.now_ms();
        let result = synthesize_function(example, &self.api, self.namer.as_ref(), self.config.lift_policy)
            .and_then(|def| self.api.register(def.clone()).map(|api| (def, api)).map_err(SynthesisError::Definition));
        let (def, api) = match result {
            Ok(ok) => ok,
            Err(e) => {
                self.set_state(previous);
                return Err(e.into());
            }
        };
        self.api = api;
        self.advance(Bucket::Instructing, self.config.utterance_cost_ms);
        self.push_step(InteractionStep {
            index: 0,
            initiator: Initiator::User,
            utterance: Some(example.trigger_utterance.clone()),
            plan: example.decomposition.clone(),
            confirmation: Confirmation::NotRequired,
            execution: ExecutionStatus::Skipped,
            t_start_ms,
            t_end_ms: self.now_ms(),
            taught: Some(FunctionRecord::from(&def)),
            world_hash: None,
        });
        self.message(format!("Learned {}", def.render_signature()));
        self.set_state(previous);
        Ok(def)
    }

    /// Lets simulated time pass with nobody instructing.
    pub fn wait(&mut self, ms: u64) {
        self.advance(Bucket::Idle, ms);
    }

    /// Ends the session; later operations fail with `WrongState`.
    pub fn end(&mut self) -> Result<(), SessionError> {
        if self.ended {
            return Err(SessionError::WrongState { op: "end", state: self.state, mode: self.mode });
        }
        self.pending = None;
        self.set_state(SessionState::Done);
        self.ended = true;
        Ok(())
    }

    // ---- meta-prompting mode ----

    pub fn meta_set_goal(&mut self, goal: &str) -> Result<(), SessionError> {
        self.require("set-goal", Mode::MetaPrompting, &[SessionState::Idle])?;
        self.goal = goal.to_string();
        Ok(())
    }

    pub fn meta_teach(&mut self, form: &TeachForm) -> Result<FunctionDef, SessionError> {
        self.require("teach", Mode::MetaPrompting, &[SessionState::Idle])?;
        let def = synthesize_from_form(form, &self.api)?;
        self.api = self.api.register(def.clone())?;
        Ok(def)
    }

    pub fn meta_edit(&mut self, name: &str, form: &TeachForm) -> Result<FunctionDef, SessionError> {
        self.require("edit", Mode::MetaPrompting, &[SessionState::Idle])?;
        let mut def = form.to_definition();
        if let Some(old) = self.api.get(name) {
            def.signature.provenance = old.signature.provenance;
        }
        self.api = self.api.update(name, def.clone())?;
        Ok(def)
    }

    pub fn meta_delete(&mut self, name: &str) -> Result<(), SessionError> {
        self.require("delete", Mode::MetaPrompting, &[SessionState::Idle])?;
        self.api = self.api.remove(name)?;
        Ok(())
    }

    /// Previews the plan for `text` with an empty history. Never executes.
    pub fn meta_test_utterance(&self, text: &str) -> Result<Outcome, SessionError> {
        self.require("test-utterance", Mode::MetaPrompting, &[SessionState::Idle])?;
        let request = PlannerRequest {
            goal: self.goal.clone(),
            api: self.api.clone(),
            history: Vec::new(),
            input: PlannerInput::UserUtterance(text.to_string()),
        };
        Ok(generate(&request, self.backend.as_ref(), self.config.max_retries)?.outcome)
    }

    /// One-way switch from meta-prompting to live collaboration.
    pub fn go_live(&mut self) -> Result<(), SessionError> {
        self.require("go-live", Mode::MetaPrompting, &[SessionState::Idle])?;
        self.mode = Mode::Live;
        self.emit(EventType::StateChanged, json!({ "state": self.state, "mode": self.mode }));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::MockPlanner;
    use crate::sim::SimParams;

    fn scene() -> SceneSpec {
        SceneSpec {
            workspace: Default::default(),
            objects: vec![
                ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunch bag", "lunchbox", "bag"]).container().at([0.5, 0.0, 0.0]),
                ObjectRef::new("SKITTLES", "Skittles", &["skittles"]).at([0.3, 0.3, 0.0]),
                ObjectRef::new("RICE_KRISPIES", "Rice Krispies treat", &["rice krispies"]).at([0.3, -0.3, 0.0]),
                ObjectRef::new("GUMMIES", "gummy candy", &["gummies"]).at([0.1, 0.2, 0.0]),
            ],
            containers: vec![],
            sim: SimParams::default(),
        }
    }

    fn live() -> Session {
        let mut s = Session::new(scene(), Mode::MetaPrompting, SessionConfig::default(), Arc::new(MockPlanner)).unwrap();
        s.meta_set_goal("pack the Skittles and the Rice Krispies in the lunch bag").unwrap();
        s.go_live().unwrap();
        s
    }

    #[test]
    fn utterance_confirm_then_suggestion() {
        let mut s = live();
        let reply = s.handle_utterance("put the skittles in the bag").unwrap();
        assert_eq!(reply, Reply::Pending { plan: Plan::parse_syntax("pickup(SKITTLES); goto(LUNCH_BAG); release()").unwrap() });
        assert_eq!(s.state(), SessionState::AwaitingConfirmation);
        s.confirm().unwrap();
        assert_eq!(s.world().contents("LUNCH_BAG"), vec!["SKITTLES"]);
        let Some(Pending::Suggestion(sug)) = s.pending() else { panic!("expected a suggestion") };
        assert_eq!(sug.gloss, "Should I pickup the Rice Krispies treat and goto the lunch bag and release next?");
        s.confirm().unwrap();
        assert_eq!(s.state(), SessionState::Done);
        let m = s.metrics();
        assert_eq!((m.user_initiated, m.robot_initiated, m.robot_initiated_accepted), (1, 1, 1));
    }

    #[test]
    fn reject_leaves_world_alone() {
        let mut s = live();
        s.handle_utterance("put the skittles in the bag").unwrap();
        let before = s.world().hash();
        s.reject().unwrap();
        assert_eq!(s.world().hash(), before);
        assert_eq!(s.history()[0].confirmation, Confirmation::Rejected);
        assert_eq!(s.state(), SessionState::Idle);
        assert_eq!(s.confirm().unwrap_err().code(), "WrongState");
    }

    #[test]
    fn mode_rules() {
        let mut s = Session::new(scene(), Mode::MetaPrompting, SessionConfig::default(), Arc::new(MockPlanner)).unwrap();
        assert_eq!(s.handle_utterance("hi").unwrap_err().code(), "WrongState");
        s.go_live().unwrap();
        assert_eq!(s.go_live().unwrap_err().code(), "WrongState");
        assert_eq!(s.meta_set_goal("x").unwrap_err().code(), "WrongState");
        s.end().unwrap();
        assert_eq!(s.handle_utterance("hi").unwrap_err().code(), "WrongState");
    }

    #[test]
    fn teaching_live_is_usable_immediately() {
        let mut s = live();
        let ex = TeachExample::new(
            "Pack the Rice Krispies in the lunchbox",
            Plan::parse_syntax("pickup(RICE_KRISPIES); goto(LUNCH_BAG); release()").unwrap(),
        );
        assert_eq!(s.teach_live(&ex).unwrap().name(), "pack");
        assert_eq!(s.teach_live(&ex).unwrap().name(), "pack_2");
        let reply = s.handle_utterance("pack the gummies").unwrap();
        assert_eq!(reply, Reply::Pending { plan: Plan::parse_syntax("pack(GUMMIES)").unwrap() });
        let bad = TeachExample::new("pack the pen", Plan::parse_syntax("pickup(PEN)").unwrap());
        let before = s.api().len();
        s.reject().unwrap();
        assert_eq!(s.teach_live(&bad).unwrap_err().code(), "UnknownObject");
        assert_eq!(s.api().len(), before);
    }

    #[test]
    fn meta_preview_never_executes() {
        let s = Session::new(scene(), Mode::MetaPrompting, SessionConfig::default(), Arc::new(MockPlanner)).unwrap();
        let before = s.world().hash();
        let out = s.meta_test_utterance("put the gummies in the bag").unwrap();
        assert!(matches!(out, Outcome::Plan(_)));
        assert_eq!(s.world().hash(), before);
        assert!(s.history().is_empty());
    }
}
