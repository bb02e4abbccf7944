//! Deterministic goal-directed planner used offline and in tests.
//!
//! Targets are the items the goal names, followed by items that taught
//! functions refer to. Proactive requests deliver the first target not yet in
//! a container. Utterances are matched against taught functions first, then
//! against a small verb table; delivery verbs still reuse a taught function
//! when one moves the item to the destination.

use super::{Backend, PlannerError, PlannerInput, PlannerRequest, RawOutcome, MAX_PLAN_CALLS};
use crate::dsl::{Api, Call, FunctionDef, Plan};
use crate::history::delivered_items;
use crate::text;

pub const CLARIFY_OBJECT: &str = "Which object do you mean?";
pub const CLARIFY_DESTINATION: &str = "Where should I put it?";

const PUT_VERBS: &[&str] = &["put", "place", "pack", "bring", "stow", "bag", "drop", "deliver", "store", "add"];
const PICK_VERBS: &[&str] = &["pick", "pickup", "grab", "take", "lift", "grasp", "get"];
const GO_VERBS: &[&str] = &["go", "goto", "move", "reach", "hover", "approach"];
const RELEASE_VERBS: &[&str] = &["release", "drop", "let"];

#[derive(Debug, Clone, Copy, Default)]
pub struct MockPlanner;

fn is_container(api: &Api, id: &str) -> bool {
    api.object(id).is_some_and(|o| o.is_container)
}

/// Objects a taught function refers to: mentions in its doc, then body constants.
fn taught_references(def: &FunctionDef, api: &Api) -> Vec<String> {
    let mut out = text::mentioned_ids(&def.signature.doc, api.objects());
    if let Some(t) = def.template() {
        for c in t.constants() {
            if !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        }
    }
    out
}

/// Items to deliver, in priority order.
pub(crate) fn targets(goal: &str, api: &Api) -> Vec<String> {
    let mut out: Vec<String> =
        text::mentioned_ids(goal, api.objects()).into_iter().filter(|id| !is_container(api, id)).collect();
    for def in api.taught() {
        for id in taught_references(def, api) {
            if !is_container(api, &id) && !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

/// Destination: named in the goal, else referenced by a taught function, else
/// the first container in the scene.
pub(crate) fn destination(goal: &str, api: &Api) -> Option<String> {
    let named = text::mentioned_ids(goal, api.objects()).into_iter().find(|id| is_container(api, id));
    named
        .or_else(|| api.taught().flat_map(|d| taught_references(d, api)).find(|id| is_container(api, id)))
        .or_else(|| api.objects().find(|o| o.is_container).map(|o| o.id.clone()))
}

/// Symbolic check that a primitive sequence moves exactly `item` into `container`.
fn delivers(plan: &Plan, item: &str, container: &str) -> bool {
    let mut holding: Option<&str> = None;
    let mut above: Option<&str> = None;
    let mut delivered = false;
    for call in plan {
        match (call.function.as_str(), call.args.first().map(String::as_str)) {
            ("pickup", Some(obj)) => {
                if holding.is_some() || obj != item {
                    return false;
                }
                holding = Some(obj);
                above = Some(obj);
            }
            ("goto", Some(obj)) => above = Some(obj),
            ("close_gripper", _) => {
                if holding.is_none() && above == Some(item) {
                    holding = above;
                }
            }
            ("release", _) | ("open_gripper", _) => {
                if holding == Some(item) && above == Some(container) {
                    delivered = true;
                }
                holding = None;
            }
            _ => {}
        }
    }
    delivered && holding.is_none()
}

fn primitive_delivery(item: &str, container: &str) -> Vec<Call> {
    vec![Call::new("pickup", &[item]), Call::new("goto", &[container]), Call::new("release", &[])]
}

/// Shortest single call that delivers `item`: a taught function when one
/// inlines to a delivery, else the three-primitive sequence.
pub(crate) fn delivery_plan(item: &str, container: &str, api: &Api) -> Vec<Call> {
    let mut best: Option<(usize, Call)> = None;
    for def in api.taught() {
        let bindings: Vec<Vec<&str>> = match def.signature.arity() {
            0 => vec![vec![]],
            1 => vec![vec![item], vec![container]],
            _ => continue,
        };
        for args in bindings {
            let call = Call::new(def.name(), &args);
            let Ok(inlined) = api.inline_plan(&Plan::new(vec![call.clone()])) else { continue };
            if delivers(&inlined, item, container) && best.as_ref().is_none_or(|(n, _)| inlined.len() < *n) {
                best = Some((inlined.len(), call));
            }
        }
    }
    match best {
        Some((_, call)) => vec![call],
        None => primitive_delivery(item, container),
    }
}

fn proactive(request: &PlannerRequest) -> RawOutcome {
    let api = &request.api;
    let delivered = delivered_items(&request.history);
    let remaining: Vec<String> = targets(&request.goal, api).into_iter().filter(|t| !delivered.contains(t)).collect();
    let (Some(next), Some(container)) = (remaining.first(), destination(&request.goal, api)) else {
        return RawOutcome::Done;
    };
    RawOutcome::Calls(delivery_plan(next, &container, api))
}

fn has_verb(stems: &[String], table: &[&str]) -> bool {
    stems.iter().any(|s| table.iter().any(|v| text::stem(v) == *s))
}

/// Best taught-function match for an utterance, by shared content words.
fn match_taught(utterance: &str, aligned: &[String], api: &Api) -> Option<Call> {
    let said = text::content_stems(utterance, api.objects());
    let mut best: Option<(usize, Call)> = None;
    for def in api.taught() {
        let mut keys: Vec<String> = def.name().split('_').filter(|p| !p.is_empty()).map(text::stem).collect();
        keys.extend(text::content_stems(&def.signature.doc, api.objects()));
        let score = said.iter().filter(|s| keys.contains(s)).count();
        if score == 0 {
            continue;
        }
        let constants: Vec<&str> = def.template().map(|t| t.constants()).unwrap_or_default();
        let free: Vec<&str> =
            aligned.iter().map(String::as_str).filter(|id| !constants.contains(id)).collect();
        let arity = def.signature.arity();
        if free.len() < arity {
            continue;
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, Call::new(def.name(), &free[..arity])));
        }
    }
    best.map(|(_, call)| call)
}

fn instruction(request: &PlannerRequest, utterance: &str) -> RawOutcome {
    let api = &request.api;
    let aligned = text::mentioned_ids(utterance, api.objects());
    if let Some(call) = match_taught(utterance, &aligned, api) {
        return RawOutcome::Calls(vec![call]);
    }
    let stems: Vec<String> = text::words(utterance).iter().map(|w| text::stem(w)).collect();
    let items: Vec<&str> = aligned.iter().map(String::as_str).filter(|id| !is_container(api, id)).collect();
    let named_container = aligned.iter().find(|id| is_container(api, id)).cloned();

    if has_verb(&stems, PUT_VERBS) && !items.is_empty() {
        let Some(container) = named_container.or_else(|| destination(&request.goal, api)) else {
            return RawOutcome::Clarification(CLARIFY_DESTINATION.into());
        };
        let calls: Vec<Call> = items
            .iter()
            .take(MAX_PLAN_CALLS / 3)
            .flat_map(|item| delivery_plan(item, &container, api))
            .collect();
        return RawOutcome::Calls(calls);
    }
    if has_verb(&stems, PICK_VERBS) && !items.is_empty() {
        return RawOutcome::Calls(vec![Call::new("pickup", &[items[0]])]);
    }
    if has_verb(&stems, GO_VERBS) && !aligned.is_empty() {
        return RawOutcome::Calls(vec![Call::new("goto", &[&aligned[0]])]);
    }
    if aligned.is_empty() {
        if has_verb(&stems, RELEASE_VERBS) {
            return RawOutcome::Calls(vec![Call::new("release", &[])]);
        }
        if has_verb(&stems, &["open"]) {
            return RawOutcome::Calls(vec![Call::new("open_gripper", &[])]);
        }
        if has_verb(&stems, &["close"]) {
            return RawOutcome::Calls(vec![Call::new("close_gripper", &[])]);
        }
    }
    RawOutcome::Clarification(CLARIFY_OBJECT.into())
}

impl Backend for MockPlanner {
    fn propose(&self, request: &PlannerRequest, _corrections: &[String]) -> Result<RawOutcome, PlannerError> {
        Ok(match &request.input {
            PlannerInput::ProactiveTrigger(_) => proactive(request),
            PlannerInput::UserUtterance(text) => instruction(request, text),
        })
    }
}
