//! Deterministic tabletop world: object placements, a single gripper, and
//! primitive execution with simulated durations.
//!
//! Time is kept in whole milliseconds so clock sums are exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{Api, Call, ObjectRef, Plan, BASE_PRIMITIVES};
use crate::par::{self, Strategy};

/// Subject used for gripper-only events.
pub const GRIPPER: &str = "GRIPPER";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl SceneError {
    pub fn code(&self) -> &'static str {
        match self {
            SceneError::Invalid(_) => "InvalidScene",
            SceneError::Io(_) => "SceneIo",
            SceneError::Parse(_) => "SceneParse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { min: [-1.0, -1.0, 0.0], max: [1.0, 1.0, 1.0] }
    }
}

/// Kinematic constants. All overridable per scene file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub hover_offset: f64,
    pub travel_speed: f64,
    pub drop_radius: f64,
    pub min_move_secs: f64,
    pub grasp_secs: f64,
    pub release_secs: f64,
    pub gripper_secs: f64,
    pub home: [f64; 3],
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            hover_offset: 0.15,
            travel_speed: 0.25,
            drop_radius: 0.10,
            min_move_secs: 1.0,
            grasp_secs: 2.0,
            release_secs: 1.0,
            gripper_secs: 1.0,
            home: [0.0, 0.0, 0.4],
        }
    }
}

fn secs_to_ms(secs: f64) -> u64 {
    (secs * 1000.0).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub workspace: Bounds,
    pub objects: Vec<ObjectRef>,
    /// Extra container ids, on top of objects flagged `"container": true`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub containers: Vec<String>,
    #[serde(default)]
    pub sim: SimParams,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<SceneSpec, SceneError> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        spec.normalized()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SceneSpec, SceneError> {
        SceneSpec::from_json(&std::fs::read_to_string(path)?)
    }

    /// Folds the `containers` list into the per-object flags after validation.
    pub fn normalized(mut self) -> Result<SceneSpec, SceneError> {
        self.validate()?;
        for id in std::mem::take(&mut self.containers) {
            if let Some(o) = self.objects.iter_mut().find(|o| o.id == id) {
                o.is_container = true;
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            o.validate().map_err(|e| SceneError::Invalid(e.to_string()))?;
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::Invalid(format!("duplicate object id {}", o.id)));
            }
            if !self.workspace.contains(o.position) {
                return Err(SceneError::Invalid(format!("{} is outside the workspace", o.id)));
            }
        }
        if let Some(c) = self.containers.iter().find(|c| !seen.contains(c.as_str())) {
            return Err(SceneError::Invalid(format!("container {c} is not an object")));
        }
        let p = &self.sim;
        if !(p.travel_speed > 0.0 && p.drop_radius >= 0.0 && p.hover_offset >= 0.0 && p.min_move_secs > 0.0) {
            return Err(SceneError::Invalid("kinematic constants out of range".into()));
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&ObjectRef> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn container_ids(&self) -> impl Iterator<Item = &str> {
        self.objects
            .iter()
            .filter(|o| o.is_container || self.containers.contains(&o.id))
            .map(|o| o.id.as_str())
    }

    pub fn base_api(&self) -> Api {
        Api::base(self.objects.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum Placement {
    Free { position: [f64; 3] },
    Inside { container: String },
    Held,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub position: [f64; 3],
    pub open: bool,
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, Placement>,
    pub gripper: Gripper,
    pub clock_ms: u64,
    #[serde(skip_serializing, default)]
    params: SimParams,
    #[serde(skip_serializing, default)]
    containers: Vec<String>,
    #[serde(skip_serializing, default)]
    floor_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Moved,
    Grasped,
    Released,
    GripperOpened,
    GripperClosed,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fault", content = "detail")]
pub enum Fault {
    GripperFull,
    NothingHeld,
    ObjectInContainer,
    NotAPrimitive,
    UnknownObject,
    BadArguments,
    InvalidPlan(String),
}

impl Fault {
    pub fn code(&self) -> &'static str {
        match self {
            Fault::GripperFull => "GripperFull",
            Fault::NothingHeld => "NothingHeld",
            Fault::ObjectInContainer => "ObjectInContainer",
            Fault::NotAPrimitive => "NotAPrimitive",
            Fault::UnknownObject => "UnknownObject",
            Fault::BadArguments => "BadArguments",
            Fault::InvalidPlan(_) => "InvalidPlan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub subject: String,
    pub duration_ms: u64,
    /// Container the subject ended up in, for drops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(default, flatten, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

impl SimEvent {
    fn ok(kind: EventKind, subject: &str, duration_ms: u64) -> Self {
        SimEvent { kind, subject: subject.to_string(), duration_ms, container: None, fault: None }
    }

    fn fault(subject: &str, fault: Fault) -> Self {
        SimEvent { kind: EventKind::Fault, subject: subject.to_string(), duration_ms: 0, container: None, fault: Some(fault) }
    }

    pub fn is_fault(&self) -> bool {
        self.kind == EventKind::Fault
    }

    pub fn duration_secs(&self) -> f64 {
        self.duration_ms as f64 / 1000.0
    }
}

/// Result of running a plan: the final world and one event per executed primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub world: WorldState,
    pub events: Vec<SimEvent>,
}

impl Execution {
    pub fn fault(&self) -> Option<&SimEvent> {
        self.events.last().filter(|e| e.is_fault())
    }

    pub fn duration_ms(&self) -> u64 {
        self.events.iter().map(|e| e.duration_ms).sum()
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

fn horizontal_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn load_scene(spec: &SceneSpec) -> Result<WorldState, SceneError> {
    spec.validate()?;
    Ok(WorldState {
        objects: spec
            .objects
            .iter()
            .map(|o| (o.id.clone(), Placement::Free { position: o.position }))
            .collect(),
        gripper: Gripper { position: spec.sim.home, open: true, holding: None },
        clock_ms: 0,
        params: spec.sim,
        containers: spec.container_ids().map(String::from).collect(),
        floor_z: spec.workspace.min[2],
    })
}

impl WorldState {
    pub fn clock_secs(&self) -> f64 {
        self.clock_ms as f64 / 1000.0
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn placement(&self, id: &str) -> Option<&Placement> {
        self.objects.get(id)
    }

    pub fn is_container(&self, id: &str) -> bool {
        self.containers.iter().any(|c| c == id)
    }

    /// Ids currently inside `container`.
    pub fn contents(&self, container: &str) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|(_, p)| matches!(p, Placement::Inside { container: c } if c == container))
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Current position; contained objects report their container's position.
    pub fn position_of(&self, id: &str) -> Option<[f64; 3]> {
        match self.objects.get(id)? {
            Placement::Free { position } => Some(*position),
            Placement::Inside { container } => self.position_of(container),
            Placement::Held => {
                let g = self.gripper.position;
                Some([g[0], g[1], g[2] - self.params.hover_offset])
            }
        }
    }

    fn inside_transitively(&self, id: &str, ancestor: &str) -> bool {
        let mut cur = id;
        while let Some(Placement::Inside { container }) = self.objects.get(cur) {
            if container == ancestor {
                return true;
            }
            cur = container;
        }
        false
    }

    /// SHA-256 over the canonical JSON form (placements, gripper, clock).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("world state serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Structural invariants; `Err` names the first one violated.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<&str> =
            self.objects.iter().filter(|(_, p)| **p == Placement::Held).map(|(id, _)| id.as_str()).collect();
        match &self.gripper.holding {
            Some(h) => {
                if self.gripper.open {
                    return Err(format!("holding {h} with an open gripper"));
                }
                if held != [h.as_str()] {
                    return Err(format!("holding {h} but held placements are {held:?}"));
                }
            }
            None if !held.is_empty() => return Err(format!("nothing held but {held:?} marked held")),
            None => {}
        }
        for (id, p) in &self.objects {
            if let Placement::Inside { container } = p {
                if !self.objects.contains_key(container) || !self.is_container(container) {
                    return Err(format!("{id} inside non-container {container}"));
                }
                if self.inside_transitively(container, id) {
                    return Err(format!("containment cycle through {id}"));
                }
            }
        }
        Ok(())
    }

    fn travel_ms(&self, target: [f64; 3]) -> u64 {
        let secs = (dist(self.gripper.position, target) / self.params.travel_speed).max(self.params.min_move_secs);
        secs_to_ms(secs)
    }

    fn hover_over(&self, id: &str) -> Option<[f64; 3]> {
        self.position_of(id).map(|p| [p[0], p[1], p[2] + self.params.hover_offset])
    }

    /// Puts the held object down: into the nearest container below the
    /// gripper, or onto the floor.
    fn drop_held(&mut self) -> (String, Option<String>) {
        let held = self.gripper.holding.take().expect("caller checked holding");
        let g = self.gripper.position;
        let target = self
            .containers
            .iter()
            .filter(|c| **c != held && !self.inside_transitively(c, &held))
            .filter_map(|c| self.position_of(c).map(|p| (c, horizontal_dist(g, p))))
            .filter(|(_, d)| *d < self.params.drop_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c.clone());
        let placement = match &target {
            Some(c) => Placement::Inside { container: c.clone() },
            None => Placement::Free { position: [g[0], g[1], self.floor_z] },
        };
        self.objects.insert(held.clone(), placement);
        self.gripper.open = true;
        (held, target)
    }

    fn step(&mut self, call: &Call) -> SimEvent {
        let p = self.params;
        let arity = match call.function.as_str() {
            "goto" | "pickup" => 1,
            f if BASE_PRIMITIVES.contains(&f) => 0,
            _ => return SimEvent::fault(&call.function, Fault::NotAPrimitive),
        };
        if call.args.len() != arity {
            return SimEvent::fault(&call.function, Fault::BadArguments);
        }
        if let Some(unknown) = call.args.iter().find(|a| !self.objects.contains_key(a.as_str())) {
            return SimEvent::fault(unknown, Fault::UnknownObject);
        }
        match call.function.as_str() {
            "goto" => {
                let obj = &call.args[0];
                let target = self.hover_over(obj).expect("known object");
                let ms = self.travel_ms(target);
                self.gripper.position = target;
                SimEvent::ok(EventKind::Moved, obj, ms)
            }
            "pickup" => {
                let obj = &call.args[0];
                if self.gripper.holding.is_some() {
                    return SimEvent::fault(obj, Fault::GripperFull);
                }
                if matches!(self.objects[obj.as_str()], Placement::Inside { .. }) {
                    return SimEvent::fault(obj, Fault::ObjectInContainer);
                }
                let target = self.hover_over(obj).expect("known object");
                let ms = self.travel_ms(target) + secs_to_ms(p.grasp_secs);
                self.gripper.position = target;
                self.gripper.open = false;
                self.gripper.holding = Some(obj.clone());
                self.objects.insert(obj.clone(), Placement::Held);
                SimEvent::ok(EventKind::Grasped, obj, ms)
            }
            "release" => {
                if self.gripper.holding.is_none() {
                    return SimEvent::fault(GRIPPER, Fault::NothingHeld);
                }
                let (obj, container) = self.drop_held();
                SimEvent { container, ..SimEvent::ok(EventKind::Released, &obj, secs_to_ms(p.release_secs)) }
            }
            "open_gripper" => {
                let ms = secs_to_ms(p.gripper_secs);
                if self.gripper.holding.is_some() {
                    let (obj, container) = self.drop_held();
                    return SimEvent { container, ..SimEvent::ok(EventKind::GripperOpened, &obj, ms) };
                }
                self.gripper.open = true;
                SimEvent::ok(EventKind::GripperOpened, GRIPPER, ms)
            }
            "close_gripper" => {
                let ms = secs_to_ms(p.gripper_secs);
                if !self.gripper.open || self.gripper.holding.is_some() {
                    self.gripper.open = false;
                    return SimEvent::ok(EventKind::GripperClosed, GRIPPER, ms);
                }
                self.gripper.open = false;
                let g = self.gripper.position;
                let beneath = self
                    .objects
                    .iter()
                    .filter_map(|(id, pl)| match pl {
                        Placement::Free { position } => Some((id, *position)),
                        _ => None,
                    })
                    .filter(|(_, pos)| {
                        horizontal_dist(g, *pos) < p.drop_radius
                            && (g[2] - pos[2] - p.hover_offset).abs() < 1e-6
                    })
                    .min_by(|a, b| horizontal_dist(g, a.1).total_cmp(&horizontal_dist(g, b.1)))
                    .map(|(id, _)| id.clone());
                match beneath {
                    Some(obj) => {
                        self.gripper.holding = Some(obj.clone());
                        self.objects.insert(obj.clone(), Placement::Held);
                        SimEvent::ok(EventKind::GripperClosed, &obj, ms)
                    }
                    None => SimEvent::ok(EventKind::GripperClosed, GRIPPER, ms),
                }
            }
            _ => unreachable!("arity table covers every primitive"),
        }
    }

    /// Executes one base primitive. Faults leave the world unchanged.
    pub fn exec_call(&self, call: &Call) -> (WorldState, SimEvent) {
        let mut next = self.clone();
        let event = next.step(call);
        if event.is_fault() {
            return (self.clone(), event);
        }
        next.clock_ms += event.duration_ms;
        (next, event)
    }

    /// Inlines `plan` and runs it until the first fault.
    pub fn exec_plan(&self, plan: &Plan, api: &Api) -> Execution {
        let inlined = match api.inline_plan(plan) {
            Ok(p) => p,
            Err(e) => {
                return Execution {
                    world: self.clone(),
                    events: vec![SimEvent::fault(GRIPPER, Fault::InvalidPlan(e.code().to_string()))],
                }
            }
        };
        self.exec_primitives(&inlined)
    }

    /// Runs an already-inlined plan.
    pub fn exec_primitives(&self, plan: &Plan) -> Execution {
        let mut world = self.clone();
        let mut events = Vec::with_capacity(plan.len());
        for call in plan {
            let event = world.step(call);
            let fault = event.is_fault();
            world.clock_ms += event.duration_ms;
            events.push(event);
            if fault {
                break;
            }
        }
        Execution { world, events }
    }
}

/// Runs many plans from the same starting world.
pub fn exec_batch(world: &WorldState, plans: &[Plan], api: &Api, strategy: Strategy) -> Vec<Execution> {
    par::map(plans, strategy, |plan| world.exec_plan(plan, api))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn lunch_scene() -> SceneSpec {
        SceneSpec {
            workspace: Bounds::default(),
            objects: vec![
                ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunch bag"]).container().at([0.5, 0.0, 0.0]),
                ObjectRef::new("SKITTLES", "Skittles", &["skittles"]).at([0.3, 0.3, 0.0]),
                ObjectRef::new("GUMMIES", "gummy candy", &["gummies"]).at([0.3, -0.3, 0.0]),
            ],
            containers: vec![],
            sim: SimParams::default(),
        }
    }

    fn plan(s: &str) -> Plan {
        Plan::parse_syntax(s).unwrap()
    }

    #[test]
    fn load_places_everything_free() {
        let w = load_scene(&lunch_scene()).unwrap();
        assert_eq!(w.objects.len(), 3);
        assert!(w.objects.values().all(|p| matches!(p, Placement::Free { .. })));
        assert_eq!(w.gripper, Gripper { position: [0.0, 0.0, 0.4], open: true, holding: None });
        assert_eq!(w.clock_ms, 0);
    }

    #[test]
    fn load_rejects_bad_specs() {
        let mut s = lunch_scene();
        s.containers.push("BASKET".into());
        assert!(matches!(load_scene(&s), Err(SceneError::Invalid(_))));
        let mut s = lunch_scene();
        s.objects[1].position = [5.0, 0.0, 0.0];
        assert!(load_scene(&s).is_err());
        let mut s = lunch_scene();
        s.objects.push(s.objects[1].clone());
        assert!(load_scene(&s).is_err());
        let empty = SceneSpec { objects: vec![], ..lunch_scene() };
        let w = load_scene(&empty).unwrap();
        assert!(w.objects.is_empty());
    }

    #[test]
    fn pack_sequence_ends_in_bag() {
        let spec = lunch_scene();
        let w = load_scene(&spec).unwrap();
        let api = spec.base_api();
        let run = w.exec_plan(&plan("pickup(SKITTLES); goto(LUNCH_BAG); release()"), &api);
        assert!(run.fault().is_none());
        assert_eq!(run.world.placement("SKITTLES"), Some(&Placement::Inside { container: "LUNCH_BAG".into() }));
        assert_eq!(run.world.contents("LUNCH_BAG"), vec!["SKITTLES"]);
        assert!(run.world.gripper.open);
        assert_eq!(run.world.gripper.holding, None);
        // hand-traced: home→hover(SKITTLES) |(0.3,0.3,-0.25)| = 0.4924 m → 1.970 s + 2 s grasp,
        // hover(SKITTLES)→hover(LUNCH_BAG) |(0.2,-0.3,0)| = 0.3606 m → 1.442 s, release 1 s
        let ms: Vec<u64> = run.events.iter().map(|e| e.duration_ms).collect();
        assert_eq!(ms, vec![3970, 1442, 1000]);
        assert_eq!(run.world.clock_ms, 6412);
    }

    #[test]
    fn goto_is_motion_only() {
        let spec = lunch_scene();
        let w = load_scene(&spec).unwrap();
        let (next, ev) = w.exec_call(&Call::new("goto", &["SKITTLES"]));
        assert_eq!(ev.kind, EventKind::Moved);
        assert_eq!(next.gripper.position, [0.3, 0.3, 0.15]);
        assert_eq!(next.objects, w.objects);
        // short hops take the minimum second
        let (again, ev) = next.exec_call(&Call::new("goto", &["SKITTLES"]));
        assert_eq!(ev.duration_ms, 1000);
        assert_eq!(again.gripper.position, next.gripper.position);
    }

    #[test]
    fn faults() {
        let spec = lunch_scene();
        let w = load_scene(&spec).unwrap();
        let (same, ev) = w.exec_call(&Call::new("release", &[]));
        assert_eq!(ev.fault, Some(Fault::NothingHeld));
        assert_eq!(same, w);
        let (held, _) = w.exec_call(&Call::new("pickup", &["SKITTLES"]));
        let (_, ev) = held.exec_call(&Call::new("pickup", &["GUMMIES"]));
        assert_eq!(ev.fault, Some(Fault::GripperFull));
        let (_, ev) = w.exec_call(&Call::new("pack", &["GUMMIES"]));
        assert_eq!(ev.fault, Some(Fault::NotAPrimitive));
        let packed = w.exec_plan(&plan("pickup(SKITTLES); goto(LUNCH_BAG); release()"), &spec.base_api()).world;
        let (_, ev) = packed.exec_call(&Call::new("pickup", &["SKITTLES"]));
        assert_eq!(ev.fault, Some(Fault::ObjectInContainer));
    }

    #[test]
    fn fault_aborts_remaining_calls() {
        let spec = lunch_scene();
        let w = load_scene(&spec).unwrap();
        let run = w.exec_plan(&plan("goto(SKITTLES); release(); goto(GUMMIES)"), &spec.base_api());
        assert_eq!(run.events.len(), 2);
        assert_eq!(run.fault().unwrap().fault, Some(Fault::NothingHeld));
        assert_eq!(run.world.gripper.position, [0.3, 0.3, 0.15]);
    }

    #[test]
    fn floor_drop_and_gripper_toggles() {
        let spec = lunch_scene();
        let w = load_scene(&spec).unwrap();
        let run = w.exec_plan(&plan("pickup(SKITTLES); goto(GUMMIES); open_gripper()"), &spec.base_api());
        assert_eq!(run.world.placement("SKITTLES"), Some(&Placement::Free { position: [0.3, -0.3, 0.0] }));
        assert_eq!(run.events[2].container, None);
        // close above a free object grasps it; close over nothing grasps nothing
        let run = w.exec_plan(&plan("goto(GUMMIES); close_gripper()"), &spec.base_api());
        assert_eq!(run.world.gripper.holding.as_deref(), Some("GUMMIES"));
        let run = w.exec_plan(&plan("close_gripper(); close_gripper(); open_gripper(); open_gripper()"), &spec.base_api());
        assert!(run.fault().is_none());
        assert_eq!(run.world.gripper.holding, None);
        assert!(run.world.check_invariants().is_ok());
    }

    #[test]
    fn container_travels_with_contents() {
        let spec = lunch_scene();
        let api = spec.base_api();
        let w = load_scene(&spec).unwrap();
        let run = w.exec_plan(
            &plan("pickup(SKITTLES); goto(LUNCH_BAG); release(); pickup(LUNCH_BAG); goto(GUMMIES); release()"),
            &api,
        );
        assert!(run.fault().is_none(), "{:?}", run.events);
        assert_eq!(run.world.position_of("SKITTLES"), Some([0.3, -0.3, 0.0]));
        assert!(run.world.check_invariants().is_ok());
    }

    #[test]
    fn hash_is_stable() {
        let w = load_scene(&lunch_scene()).unwrap();
        assert_eq!(w.hash(), w.clone().hash());
        let (moved, _) = w.exec_call(&Call::new("goto", &["SKITTLES"]));
        assert_ne!(w.hash(), moved.hash());
    }
}
