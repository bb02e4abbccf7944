//! Ablation study over meta-prompted contexts: auto-accepted proactive
//! rollouts scored by overlap with a reference plan.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{is_base_primitive, Api, Call, DslError, Plan};
use crate::history::{Confirmation, ExecutionStatus, Initiator, InteractionStep};
use crate::par::{self, Strategy};
use crate::planner::Backend;
use crate::proactive::{suggest_next, Proposal};
use crate::session::{import_context, ContextFile};
use crate::sim::{load_scene, SceneError, SceneSpec};

pub const NEUTRAL_GOAL: &str = "to help the user with a tabletop task";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("step cap must be at least 1")]
    StepCapZero,
    #[error("invalid reference plan: {0}")]
    Reference(String),
    #[error("context `{name}`: {source}")]
    Context { name: String, source: DslError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::StepCapZero => "StepCapZero",
            EvalError::Reference(_) => "InvalidReference",
            EvalError::Context { source, .. } => source.code(),
            EvalError::Scene(e) => e.code(),
            EvalError::Io { .. } => "EvalIo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalCondition {
    Full,
    FixedGoal,
    FixedApi,
    FixedContext,
}

impl EvalCondition {
    pub const ALL: [EvalCondition; 4] =
        [EvalCondition::Full, EvalCondition::FixedGoal, EvalCondition::FixedApi, EvalCondition::FixedContext];

    pub fn name(self) -> &'static str {
        match self {
            EvalCondition::Full => "full",
            EvalCondition::FixedGoal => "fixed-goal",
            EvalCondition::FixedApi => "fixed-api",
            EvalCondition::FixedContext => "fixed-context",
        }
    }

    fn keeps_goal(self) -> bool {
        matches!(self, EvalCondition::Full | EvalCondition::FixedApi)
    }

    fn keeps_api(self) -> bool {
        matches!(self, EvalCondition::Full | EvalCondition::FixedGoal)
    }
}

impl fmt::Display for EvalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvalCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition `{s}` (expected full, fixed-goal, fixed-api or fixed-context)"))
    }
}

/// Ground-truth primitive plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ReferenceFile", into = "ReferenceFile")]
pub struct ReferencePlan {
    calls: Plan,
}

#[derive(Serialize, Deserialize)]
struct ReferenceFile {
    calls: Plan,
}

impl TryFrom<ReferenceFile> for ReferencePlan {
    type Error = String;
    fn try_from(f: ReferenceFile) -> Result<Self, String> {
        ReferencePlan::new(f.calls)
    }
}

impl From<ReferencePlan> for ReferenceFile {
    fn from(r: ReferencePlan) -> Self {
        ReferenceFile { calls: r.calls }
    }
}

impl ReferencePlan {
    pub fn new(calls: Plan) -> Result<ReferencePlan, String> {
        if calls.is_empty() {
            return Err("reference plan is empty".into());
        }
        if let Some(c) = calls.iter().find(|c| !is_base_primitive(&c.function)) {
            return Err(format!("`{}` is not a base primitive", c.function));
        }
        Ok(ReferencePlan { calls })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ReferencePlan, EvalError> {
        let path = path.as_ref();
        let io = |message: String| EvalError::Io { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }

    pub fn plan(&self) -> &Plan {
        &self.calls
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Validates against a scene's base API.
    pub fn check(&self, scene: &SceneSpec) -> Result<(), EvalError> {
        scene.base_api().validate_plan(&self.calls).map_err(|e| EvalError::Reference(e.to_string()))
    }
}

/// A user's meta-prompted context, by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserContext {
    pub name: String,
    pub file: ContextFile,
}

/// Reads every `*.json` file of `dir` in file-name order.
pub fn load_contexts(dir: impl AsRef<Path>) -> Result<Vec<UserContext>, EvalError> {
    let dir = dir.as_ref();
    let io = |path: &Path, message: String| EvalError::Io { path: path.to_path_buf(), message };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e.to_string()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let file = ContextFile::load(&p).map_err(|e| io(&p, e.to_string()))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(UserContext { name, file })
        })
        .collect()
}

/// Goal and API a rollout runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionContext {
    pub condition: EvalCondition,
    pub goal: String,
    pub api: Api,
}

pub fn make_condition_context(
    user: &ContextFile,
    condition: EvalCondition,
    scene: &SceneSpec,
) -> Result<ConditionContext, DslError> {
    let (goal, api) = import_context(user, scene)?;
    Ok(ConditionContext {
        condition,
        goal: if condition.keeps_goal() { goal } else { NEUTRAL_GOAL.to_string() },
        api: if condition.keeps_api() { api } else { api.base_only() },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollout {
    /// Inlined primitive calls that actually executed.
    pub trace: Plan,
    pub steps_taken: usize,
    pub faulted: bool,
}

/// Suggest, auto-accept and execute until the planner stops, a fault occurs,
/// or `step_cap` rounds have run.
pub fn run_proactive_rollout(
    goal: &str,
    api: &Api,
    scene: &SceneSpec,
    backend: &dyn Backend,
    step_cap: usize,
    max_retries: u32,
) -> Result<Rollout, EvalError> {
    if step_cap == 0 {
        return Err(EvalError::StepCapZero);
    }
    let mut world = load_scene(scene)?;
    let mut history: Vec<InteractionStep> = Vec::new();
    let mut trace: Vec<Call> = Vec::new();
    let mut faulted = false;
    while history.len() < step_cap {
        let Proposal::Suggest(suggestion) = suggest_next(goal, api, &history, backend, max_retries, world.clock_ms)
        else {
            break;
        };
        let inlined = api.inline_plan(&suggestion.plan).unwrap_or_default();
        let run = world.exec_plan(&suggestion.plan, api);
        let executed = run.events.iter().filter(|e| !e.is_fault()).count();
        trace.extend(inlined.calls.into_iter().take(executed));
        faulted = run.fault().is_some();
        let t_start_ms = world.clock_ms;
        world = run.world;
        history.push(InteractionStep {
            index: history.len(),
            initiator: Initiator::RobotProactive,
            utterance: None,
            plan: suggestion.plan,
            confirmation: Confirmation::Confirmed,
            execution: if faulted {
                ExecutionStatus::Faulted { events: run.events }
            } else {
                ExecutionStatus::Completed { events: run.events }
            },
            t_start_ms,
            t_end_ms: world.clock_ms,
            taught: None,
            world_hash: None,
        });
        if faulted {
            break;
        }
    }
    Ok(Rollout { trace: Plan::new(trace), steps_taken: history.len(), faulted })
}

fn counts(plan: &Plan) -> BTreeMap<&Call, usize> {
    let mut m = BTreeMap::new();
    for c in plan {
        *m.entry(c).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset intersection of grounded calls.
pub fn efficacy_overlap(trace: &Plan, reference: &Plan) -> usize {
    let r = counts(reference);
    counts(trace).into_iter().map(|(c, n)| n.min(r.get(c).copied().unwrap_or(0))).sum()
}

/// Longest common subsequence length: the order-sensitive variant.
pub fn lcs_overlap(a: &Plan, b: &Plan) -> usize {
    let (a, b) = (&a.calls, &b.calls);
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficacyResult {
    pub context: String,
    pub condition: EvalCondition,
    pub helpful_actions: usize,
    pub lcs: usize,
    pub rollout: Plan,
    pub steps_taken: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: EvalCondition,
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub mean_lcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub step_cap: usize,
    pub reference_len: usize,
    pub contexts: usize,
    pub auto_accept: bool,
    pub overlap: String,
    pub secondary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub metadata: StudyMetadata,
    pub summary: Vec<ConditionSummary>,
    pub results: Vec<EfficacyResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub conditions: Vec<EvalCondition>,
    /// Defaults to the reference length plus two.
    pub step_cap: Option<usize>,
    pub max_retries: u32,
    pub strategy: Strategy,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { conditions: EvalCondition::ALL.to_vec(), step_cap: None, max_retries: 2, strategy: Strategy::default() }
    }
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Every context under every condition. Rollouts run through [`par::map`].
pub fn run_study(
    contexts: &[UserContext],
    reference: &ReferencePlan,
    scene: &SceneSpec,
    backend: &dyn Backend,
    options: &StudyOptions,
) -> Result<StudyReport, EvalError> {
    let step_cap = options.step_cap.unwrap_or(reference.len() + 2);
    let jobs: Vec<(&UserContext, EvalCondition)> =
        contexts.iter().flat_map(|c| options.conditions.iter().map(move |k| (c, *k))).collect();
    let results = par::map(&jobs, options.strategy, |(user, condition)| {
        let ctx = make_condition_context(&user.file, *condition, scene)
            .map_err(|source| EvalError::Context { name: user.name.clone(), source })?;
        let rollout = run_proactive_rollout(&ctx.goal, &ctx.api, scene, backend, step_cap, options.max_retries)?;
        Ok(EfficacyResult {
            context: user.name.clone(),
            condition: *condition,
            helpful_actions: efficacy_overlap(&rollout.trace, reference.plan()),
            lcs: lcs_overlap(&rollout.trace, reference.plan()),
            rollout: rollout.trace,
            steps_taken: rollout.steps_taken,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, EvalError>>()?;

    let summary = if contexts.is_empty() {
        Vec::new()
    } else {
        options
            .conditions
            .iter()
            .map(|&condition| {
                let of = |f: fn(&EfficacyResult) -> usize| -> Vec<f64> {
                    results.iter().filter(|r| r.condition == condition).map(|r| f(r) as f64).collect()
                };
                let helpful = of(|r| r.helpful_actions);
                let (mean, std_error) = mean_and_se(&helpful);
                let (mean_lcs, _) = mean_and_se(&of(|r| r.lcs));
                ConditionSummary { condition, n: helpful.len(), mean, std_error, mean_lcs }
            })
            .collect()
    };
    Ok(StudyReport {
        metadata: StudyMetadata {
            step_cap,
            reference_len: reference.len(),
            contexts: contexts.len(),
            auto_accept: true,
            overlap: "multiset intersection of inlined grounded calls".into(),
            secondary: "longest common subsequence".into(),
        },
        summary,
        results,
    })
}

impl StudyReport {
    pub fn mean(&self, condition: EvalCondition) -> Option<f64> {
        self.summary.iter().find(|s| s.condition == condition).map(|s| s.mean)
    }

    /// Fixed-width text table of the summary.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>3} {:>16} {:>9}\n",
            "condition", "n", "helpful (±SE)", "mean LCS"
        );
        for s in &self.summary {
            let cell = format!("{:.2} ± {:.2}", s.mean, s.std_error);
            out.push_str(&format!("{:<14} {:>3} {:>16} {:>9.2}\n", s.condition.name(), s.n, cell, s.mean_lcs));
        }
        out.push_str(&format!(
            "reference: {} calls; step cap: {}; suggestions auto-accepted\n",
            self.metadata.reference_len, self.metadata.step_cap
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Plan {
        Plan::parse_syntax(s).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let r = p("pickup(A); goto(X); release(); pickup(B); goto(X); release(); pickup(C); goto(X); release()");
        assert_eq!(efficacy_overlap(&r, &r), 9);
        assert_eq!(efficacy_overlap(&p("pickup(Z)"), &r), 0);
        let swapped = p("pickup(A); goto(X); release(); pickup(B); goto(X); release(); pickup(D); goto(Y); open_gripper()");
        assert_eq!(efficacy_overlap(&swapped, &r), 6);
        assert_eq!(lcs_overlap(&r, &r), 9);
        assert_eq!(lcs_overlap(&p("release(); pickup(A)"), &p("pickup(A); release()")), 1);
    }

    #[test]
    fn stats() {
        assert_eq!(mean_and_se(&[]), (0.0, 0.0));
        assert_eq!(mean_and_se(&[3.0]), (3.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_must_be_primitive() {
        assert!(ReferencePlan::new(Plan::default()).is_err());
        assert!(ReferencePlan::new(p("pack(A)")).is_err());
        let json = r#"{"calls":"pickup(A); release()"}"#;
        let r: ReferencePlan = serde_json::from_str(json).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(serde_json::to_string(&r).unwrap(), json);
    }

    #[test]
    fn conditions_parse() {
        for c in EvalCondition::ALL {
            assert_eq!(c.name().parse::<EvalCondition>().unwrap(), c);
        }
        assert!("nope".parse::<EvalCondition>().is_err());
    }
}
