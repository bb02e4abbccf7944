//! Proactive suggestions: the trigger string, the request after each executed
//! plan, and the confirmation text shown to the user.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Api, Plan};
use crate::history::InteractionStep;
use crate::planner::{generate, Backend, Outcome, PlannerInput, PlannerRequest};

pub const TRIGGER_PREFIX: &str = "Propose an action to perform next to perform ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProactiveError {
    #[error("the goal is empty")]
    EmptyGoal,
}

impl ProactiveError {
    pub fn code(&self) -> &'static str {
        "EmptyGoal"
    }
}

/// The fixed trigger with `goal` interpolated verbatim and exactly one final period.
pub fn build_trigger(goal: &str) -> Result<String, ProactiveError> {
    if goal.trim().is_empty() {
        return Err(ProactiveError::EmptyGoal);
    }
    let body = goal.trim_end_matches('.');
    Ok(format!("{TRIGGER_PREFIX}{body}."))
}

/// Template gloss: `Should I pack the Skittles and pack the Rice Krispies treat next?`.
pub fn gloss_plan(plan: &Plan, api: &Api) -> String {
    let phrases: Vec<String> = plan
        .iter()
        .map(|call| {
            let verb = call.function.replace('_', " ");
            if call.args.is_empty() {
                return verb;
            }
            let names: Vec<&str> = call
                .args
                .iter()
                .map(|id| api.object(id).map_or(id.as_str(), |o| o.display_name.as_str()))
                .collect();
            format!("{verb} the {}", names.join(" and the "))
        })
        .collect();
    format!("Should I {} next?", phrases.join(" and "))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[default]
    RobotProactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub plan: Plan,
    pub gloss: String,
    pub created_at_ms: u64,
    #[serde(default)]
    pub origin: Origin,
}

/// What the proactive planner decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proposal {
    Suggest(Suggestion),
    /// The backend reports the goal as complete.
    Done,
    /// Clarification or failure: stay idle and let the user instruct.
    Idle,
}

/// Asks `backend` for the next action. Never fails: errors are logged and
/// degrade to [`Proposal::Idle`].
pub fn suggest_next(
    goal: &str,
    api: &Api,
    history: &[InteractionStep],
    backend: &dyn Backend,
    max_retries: u32,
    now_ms: u64,
) -> Proposal {
    let trigger = match build_trigger(goal) {
        Ok(t) => t,
        Err(e) => {
            tracing::warn!(error = %e, "no proactive suggestion");
            return Proposal::Idle;
        }
    };
    let request = PlannerRequest {
        goal: goal.to_string(),
        api: api.clone(),
        history: history.to_vec(),
        input: PlannerInput::ProactiveTrigger(trigger),
    };
    match generate(&request, backend, max_retries) {
        Ok(response) => match response.outcome {
            Outcome::Plan(plan) => Proposal::Suggest(Suggestion {
                gloss: gloss_plan(&plan, api),
                plan,
                created_at_ms: now_ms,
                origin: Origin::RobotProactive,
            }),
            Outcome::Done => Proposal::Done,
            Outcome::Clarification(text) => {
                tracing::debug!(%text, "proactive planner asked for clarification");
                Proposal::Idle
            }
        },
        Err(e) => {
            tracing::warn!(error = %e, code = e.code(), "proactive planner failed");
            Proposal::Idle
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ObjectRef;
    use crate::planner::{PlannerError, RawOutcome};

    fn api() -> Api {
        Api::base(vec![
            ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunch bag"]).container(),
            ObjectRef::new("SKITTLES", "Skittles", &["skittles"]),
            ObjectRef::new("RICE_KRISPIES", "Rice Krispies treat", &["rice krispies"]),
        ])
    }

    #[test]
    fn trigger_template() {
        assert_eq!(build_trigger("tidy up").unwrap(), "Propose an action to perform next to perform tidy up.");
        assert_eq!(build_trigger("tidy up.").unwrap(), "Propose an action to perform next to perform tidy up.");
        assert_eq!(build_trigger("tidy up...").unwrap(), "Propose an action to perform next to perform tidy up.");
        assert_eq!(build_trigger("  "), Err(ProactiveError::EmptyGoal));
    }

    #[test]
    fn glosses() {
        let a = api();
        let p = |s: &str| Plan::parse_syntax(s).unwrap();
        assert_eq!(gloss_plan(&p("goto(SKITTLES)"), &a), "Should I goto the Skittles next?");
        assert_eq!(gloss_plan(&p("open_gripper()"), &a), "Should I open gripper next?");
        assert_eq!(
            gloss_plan(&p("pickup(SKITTLES); pickup(RICE_KRISPIES)"), &a),
            "Should I pickup the Skittles and pickup the Rice Krispies treat next?"
        );
    }

    struct Down;
    impl Backend for Down {
        fn propose(&self, _: &PlannerRequest, _: &[String]) -> Result<RawOutcome, PlannerError> {
            Err(PlannerError::BackendUnavailable("offline".into()))
        }
    }

    #[test]
    fn failures_degrade_to_idle() {
        assert_eq!(suggest_next("pack", &api(), &[], &Down, 2, 0), Proposal::Idle);
        assert_eq!(suggest_next("", &api(), &[], &crate::planner::MockPlanner, 2, 0), Proposal::Idle);
    }
}
