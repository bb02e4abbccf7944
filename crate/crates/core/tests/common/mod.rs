//! Shared fixtures, generators and independent oracles for integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use provox_core::dsl::{Api, Call, FunctionBody, FunctionDef, Plan, Provenance, TemplateArg};
use provox_core::planner::{Backend, MockPlanner, PlannerError, PlannerInput, PlannerRequest, RawOutcome};
use provox_core::session::ContextFile;
use provox_core::sim::SceneSpec;
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    repo_root().join("fixtures").join(rel)
}

pub fn scene(name: &str) -> SceneSpec {
    SceneSpec::load(repo_root().join("scenes").join(format!("{name}.json"))).expect("shipped scene loads")
}

pub fn lunch_context() -> ContextFile {
    ContextFile::load(fixture("lunchbag/context.json")).expect("shipped context loads")
}

/// Set `PROVOX_BLESS=1` to rewrite golden files instead of comparing.
pub fn blessing() -> bool {
    std::env::var_os("PROVOX_BLESS").is_some()
}

/// Compares `actual` with the golden file, or rewrites it when blessing.
pub fn check_golden(rel: &str, actual: &str) -> Result<(), String> {
    let path = fixture(rel);
    if blessing() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the generated output", path.display()))
    }
}

/// Recursive expansion written directly against the template data, without
/// going through `Api::inline_plan`.
pub fn expand_oracle(api: &Api, call: &Call, out: &mut Vec<Call>) {
    let def = api.get(&call.function).expect("oracle only sees valid plans");
    match &def.body {
        FunctionBody::Primitive => out.push(call.clone()),
        FunctionBody::Template(t) => {
            let names: Vec<&str> = def.signature.param_names().collect();
            for step in &t.steps {
                let args = step
                    .args
                    .iter()
                    .map(|a| match a {
                        TemplateArg::Const(c) => c.clone(),
                        TemplateArg::Param(p) => {
                            let i = names.iter().position(|n| n == p).expect("bound parameter");
                            call.args[i].clone()
                        }
                    })
                    .collect();
                expand_oracle(api, &Call { function: step.function.clone(), args }, out);
            }
        }
    }
}

pub const OBJECT_IDS: [&str; 5] = ["LUNCH_BAG", "SKITTLES", "RICE_KRISPIES", "GUMMIES", "HAND_SANITIZER"];

/// A random API of up to three levels of taught functions over `base`.
pub fn random_api(rng: &mut impl Rng, base: &Api) -> Api {
    let mut api = base.clone();
    let mut counter = 0;
    for level in 1..=3 {
        let callees: Vec<(String, usize)> =
            api.functions().map(|d| (d.name().to_string(), d.signature.arity())).collect();
        for _ in 0..rng.random_range(1..=3) {
            counter += 1;
            let name = format!("skill_{level}_{counter}");
            let params: Vec<String> = (0..rng.random_range(0..=2)).map(|i| format!("p{i}")).collect();
            let arg = |rng: &mut dyn rand::RngCore, params: &[String]| -> String {
                if !params.is_empty() && rng.random_bool(0.5) {
                    format!("${}", params.choose(rng).unwrap())
                } else {
                    OBJECT_IDS.choose(rng).unwrap().to_string()
                }
            };
            let unary: Vec<&(String, usize)> = callees.iter().filter(|(_, a)| *a >= 1).collect();
            let mut steps = Vec::new();
            for p in &params {
                let (f, arity) = unary.choose(rng).unwrap();
                let mut args = vec![format!("${p}")];
                args.extend((1..*arity).map(|_| arg(rng, &params)));
                steps.push(format!("{f}({})", args.join(", ")));
            }
            for _ in 0..rng.random_range(if params.is_empty() { 1 } else { 0 }..=2) {
                let (f, arity) = callees.choose(rng).unwrap();
                let args: Vec<String> = (0..*arity).map(|_| arg(rng, &params)).collect();
                steps.push(format!("{f}({})", args.join(", ")));
            }
            let names: Vec<&str> = params.iter().map(String::as_str).collect();
            let def = FunctionDef::taught(&name, &names, "generated", &steps.join("; "), Provenance::TaughtMeta)
                .expect("generated body parses");
            api = api.register(def).expect("generated function is well formed");
        }
    }
    api
}

/// A random valid call of any function in `api`.
pub fn random_call(rng: &mut impl Rng, api: &Api) -> Call {
    let defs: Vec<&FunctionDef> = api.functions().collect();
    let def = defs.choose(rng).unwrap();
    let args: Vec<String> = (0..def.signature.arity()).map(|_| OBJECT_IDS.choose(rng).unwrap().to_string()).collect();
    Call { function: def.name().to_string(), args }
}

/// A random syntactically valid plan with arbitrary identifiers.
pub fn random_syntax_plan(rng: &mut impl Rng) -> Plan {
    let ident = |rng: &mut dyn rand::RngCore, upper: bool| -> String {
        let first = if upper { b'A' } else { b'a' } + rng.random_range(0..26u8);
        let tail_alphabet: &[u8] =
            if upper { b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_" } else { b"abcdefghijklmnopqrstuvwxyz0123456789_" };
        let mut s = String::from(first as char);
        for _ in 0..rng.random_range(0..8) {
            s.push(*tail_alphabet.choose(rng).unwrap() as char);
        }
        s
    };
    (0..rng.random_range(0..=8))
        .map(|_| Call { function: ident(rng, false), args: (0..rng.random_range(0..=3)).map(|_| ident(rng, true)).collect() })
        .collect()
}

/// A random primitive plan over the lunchbag ids, including some argument mistakes.
pub fn random_primitive_plan(rng: &mut impl Rng) -> Plan {
    (0..rng.random_range(1..=12))
        .map(|_| {
            let f = ["goto", "pickup", "release", "open_gripper", "close_gripper"].choose(rng).unwrap();
            let wants = matches!(*f, "goto" | "pickup") as usize;
            let n = if rng.random_bool(0.05) { 1 - wants } else { wants };
            let args = (0..n)
                .map(|_| if rng.random_bool(0.03) { "NOPE".to_string() } else { OBJECT_IDS.choose(rng).unwrap().to_string() })
                .collect();
            Call { function: f.to_string(), args }
        })
        .collect()
}

/// Mock planner wrapper that counts proactive requests.
#[derive(Default)]
pub struct CountingMock {
    pub proactive_requests: AtomicUsize,
}

impl CountingMock {
    pub fn count(&self) -> usize {
        self.proactive_requests.load(Ordering::SeqCst)
    }
}

impl Backend for CountingMock {
    fn propose(&self, request: &PlannerRequest, corrections: &[String]) -> Result<RawOutcome, PlannerError> {
        if matches!(request.input, PlannerInput::ProactiveTrigger(_)) {
            self.proactive_requests.fetch_add(1, Ordering::SeqCst);
        }
        MockPlanner.propose(request, corrections)
    }
}

pub fn mock() -> Arc<dyn Backend> {
    Arc::new(MockPlanner)
}

// ---- scenario drivers shared by the acceptance suite and the flow tests ----

use provox_core::planner::remote::{RemotePlanner, ReplayTransport, WireFixture};
use provox_core::planner::{assemble_prompt, derive_tool_schema, generate, BackendConfig};
use provox_core::session::{MetricsReport, Mode, Session, SessionConfig};

/// Request used for the frozen prompt and schema: the lunch context after
/// one confirmed instruction and one rejected suggestion.
pub fn golden_request() -> PlannerRequest {
    let mut s = Session::from_context(scene("lunchbag"), &lunch_context(), Mode::Live, SessionConfig::default(), mock())
        .expect("lunch context imports");
    s.handle_utterance("pack the Skittles").unwrap();
    s.confirm().unwrap();
    s.reject().unwrap();
    PlannerRequest {
        goal: s.goal().to_string(),
        api: s.api().clone(),
        history: s.history().to_vec(),
        input: PlannerInput::UserUtterance("pack the gummies too".into()),
    }
}

pub fn check_prompt_goldens() -> Result<(), String> {
    let request = golden_request();
    check_golden("golden/prompt_lunchbag.txt", &assemble_prompt(&request))?;
    let schema = serde_json::to_string_pretty(&derive_tool_schema(&request.api)).unwrap() + "\n";
    check_golden("golden/tool_schema_lunchbag.json", &schema)
}

fn fixture_request(f: &WireFixture) -> Result<PlannerRequest, String> {
    let scene = SceneSpec::load(repo_root().join(&f.scene)).map_err(|e| e.to_string())?;
    let ctx = ContextFile {
        goal: f.goal.clone(),
        api: provox_core::dsl::ApiExport { version: provox_core::dsl::EXPORT_VERSION, functions: f.functions.clone() },
    };
    let (goal, api) = provox_core::session::import_context(&ctx, &scene).map_err(|e| e.to_string())?;
    Ok(PlannerRequest { goal, api, history: vec![], input: f.input.clone() })
}

/// Replays every recorded exchange in `fixtures/wire`; returns how many were checked.
pub fn check_wire_fixtures() -> Result<usize, String> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture("wire"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in &paths {
        let mut f = WireFixture::load(path)?;
        let request = fixture_request(&f)?;
        let cfg = BackendConfig { model: Some(f.model.clone()), ..BackendConfig::default() };
        if blessing() {
            let probe = RemotePlanner::new(Arc::new(ReplayTransport::default()), &cfg);
            f.exchange.request = probe.build_request_body(&request, &[]);
            std::fs::write(path, serde_json::to_string_pretty(&f).unwrap() + "\n").map_err(|e| e.to_string())?;
        }
        let transport = Arc::new(ReplayTransport::new([f.exchange.clone()]));
        let planner = RemotePlanner::new(transport.clone(), &cfg);
        let got = match generate(&request, &planner, 0) {
            Ok(r) => serde_json::to_value(&r.outcome).unwrap(),
            Err(e) => serde_json::json!({ "error": e.code() }),
        };
        if got != f.expected {
            return Err(format!("{}: expected {} but decoded {}", path.display(), f.expected, got));
        }
        if transport.remaining() != 0 {
            return Err(format!("{}: exchange not consumed", path.display()));
        }
    }
    Ok(paths.len())
}

pub const SANDWICH_MS: u64 = 90_000;

/// Scripted user packing three lunch items, with and without proactivity.
pub fn burden_run(proactive: bool) -> MetricsReport {
    let config = SessionConfig { proactive, ..SessionConfig::default() };
    let mut s = Session::from_context(scene("lunchbag"), &lunch_context(), Mode::Live, config, mock())
        .expect("lunch context imports");
    let script = ["pack the Skittles", "pack the Rice Krispies", "pack the hand sanitizer"];
    let mut said = 0;
    s.handle_utterance(script[said]).unwrap();
    said += 1;
    loop {
        if s.pending().is_some() {
            s.confirm().unwrap();
            continue;
        }
        if s.state() == provox_core::session::SessionState::Done || said == script.len() {
            break;
        }
        s.handle_utterance(script[said]).unwrap();
        said += 1;
    }
    // The partner makes the sandwiches.
    s.wait(SANDWICH_MS);
    s.metrics()
}
