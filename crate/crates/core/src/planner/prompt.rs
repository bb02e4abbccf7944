//! Planner context: the prompt text and the tool-calling schema.
//!
//! Both are pure functions of their inputs and byte-stable.

use serde_json::{json, Value};

use super::{PlannerInput, PlannerRequest, MAX_PLAN_CALLS};
use crate::dsl::{Api, FunctionBody, FunctionDef, TemplateArg};
use crate::history::{delivered_items, Confirmation, ExecutionStatus, Initiator, InteractionStep};

/// Steps of history rendered verbatim; older ones are summarized.
pub const HISTORY_WINDOW: usize = 20;

/// Name of the synthetic multi-call tool.
pub const SUBMIT_PLAN: &str = "submit_plan";

pub const PREAMBLE: &str = "You are the task planner for a robot arm that collaborates with a human partner \
at a shared tabletop. Translate the partner's requests into programs over the robot API below, calling only \
the listed functions with the listed object ids. Prefer taught functions over raw primitives when they fit. \
If a request is ambiguous, reply with a short clarifying question instead of a plan. If the goal is already \
complete and nothing is left to do, reply with the single word DONE.";

fn render_body_line(def: &FunctionDef) -> Vec<String> {
    match &def.body {
        FunctionBody::Primitive => vec!["...".to_string()],
        FunctionBody::Template(t) => t
            .steps
            .iter()
            .map(|s| {
                let args: Vec<String> = s
                    .args
                    .iter()
                    .map(|a| match a {
                        TemplateArg::Param(p) => p.clone(),
                        TemplateArg::Const(c) => format!("ObjectRef.{c}"),
                    })
                    .collect();
                format!("self.{}({})", s.function, args.join(", "))
            })
            .collect(),
    }
}

/// The API as a Python-flavoured class listing (without the fence).
pub fn render_api(api: &Api) -> String {
    let mut out = String::from("class ObjectRef(Enum):\n");
    let mut any = false;
    for o in api.objects() {
        any = true;
        let note = if o.is_container { "  # container" } else { "" };
        out.push_str(&format!("    {} = {:?}{}\n", o.id, o.display_name, note));
    }
    if !any {
        out.push_str("    pass\n");
    }
    out.push_str("\nclass Robot:\n");
    let mut first = true;
    for def in api.functions() {
        if !first {
            out.push('\n');
        }
        first = false;
        out.push_str(&format!("    def {}:\n", def.render_signature()));
        out.push_str(&format!("        \"\"\"{}\"\"\"\n", def.signature.doc));
        for line in render_body_line(def) {
            out.push_str(&format!("        {line}\n"));
        }
    }
    out
}

fn render_step(step: &InteractionStep) -> String {
    if let Some(taught) = &step.taught {
        return format!(
            "User taught `{}`: \"{}\" => {}",
            taught.name,
            step.utterance.as_deref().unwrap_or_default(),
            step.plan
        );
    }
    let status = match (&step.confirmation, &step.execution) {
        (Confirmation::Rejected, _) => "  # rejected by user".to_string(),
        (_, ExecutionStatus::Faulted { events }) => {
            let code = events.last().and_then(|e| e.fault.as_ref()).map(|f| f.code()).unwrap_or("fault");
            format!("  # failed: {code}")
        }
        (_, ExecutionStatus::Skipped) => "  # not executed".to_string(),
        _ => String::new(),
    };
    match step.initiator {
        Initiator::User => format!(
            "User: {}\nRobot: {}{}",
            step.utterance.as_deref().unwrap_or_default(),
            step.plan,
            status
        ),
        Initiator::RobotProactive => format!("Robot (suggested): {}{}", step.plan, status),
    }
}

/// Deterministic prompt layout: preamble, goal, API listing, history, input.
pub fn assemble_prompt(request: &PlannerRequest) -> String {
    let mut out = String::new();
    out.push_str(PREAMBLE);
    out.push_str("\n\n");
    let goal = if request.goal.trim().is_empty() { "(no goal set)" } else { request.goal.as_str() };
    out.push_str(&format!("Goal: {goal}\n\n"));
    out.push_str("Robot API:\n```python\n");
    out.push_str(&render_api(&request.api));
    out.push_str("```\n\n");
    out.push_str("Interaction history:\n");
    let history = &request.history;
    if history.is_empty() {
        out.push_str("(none)\n");
    } else {
        let cut = history.len().saturating_sub(HISTORY_WINDOW);
        if cut > 0 {
            let delivered = delivered_items(&history[..cut]);
            let list = if delivered.is_empty() { "none".to_string() } else { delivered.join(", ") };
            out.push_str(&format!("({cut} earlier steps omitted; items already delivered: {list})\n"));
        }
        for step in &history[cut..] {
            out.push_str(&render_step(step));
            out.push('\n');
        }
    }
    out.push('\n');
    match &request.input {
        PlannerInput::UserUtterance(text) => out.push_str(&format!("User: {text}\n")),
        PlannerInput::ProactiveTrigger(text) => out.push_str(&format!("System: {text}\n")),
    }
    out
}

/// One tool per API function with object parameters as enums over the scene
/// ids, plus `submit_plan` for multi-call answers.
pub fn derive_tool_schema(api: &Api) -> Value {
    let ids: Vec<&str> = api.object_ids().collect();
    let mut tools: Vec<Value> = api
        .functions()
        .map(|def| {
            let mut properties = serde_json::Map::new();
            for p in &def.signature.params {
                let mut prop = json!({ "type": "string", "enum": ids });
                if !p.description.is_empty() {
                    prop["description"] = json!(p.description);
                }
                properties.insert(p.name.clone(), prop);
            }
            let required: Vec<&str> = def.signature.param_names().collect();
            json!({
                "type": "function",
                "function": {
                    "name": def.signature.name,
                    "description": def.signature.doc,
                    "parameters": {
                        "type": "object",
                        "properties": properties,
                        "required": required,
                        "additionalProperties": false
                    }
                }
            })
        })
        .collect();
    let names: Vec<&str> = api.functions().map(FunctionDef::name).collect();
    tools.push(json!({
        "type": "function",
        "function": {
            "name": SUBMIT_PLAN,
            "description": format!(
                "Submit a multi-step plan as an ordered list of calls (at most {MAX_PLAN_CALLS})."
            ),
            "parameters": {
                "type": "object",
                "properties": {
                    "calls": {
                        "type": "array",
                        "maxItems": MAX_PLAN_CALLS,
                        "items": {
                            "type": "object",
                            "properties": {
                                "function": { "type": "string", "enum": names },
                                "args": { "type": "array", "items": { "type": "string", "enum": ids } }
                            },
                            "required": ["function", "args"],
                            "additionalProperties": false
                        }
                    }
                },
                "required": ["calls"],
                "additionalProperties": false
            }
        }
    }));
    Value::Array(tools)
}
