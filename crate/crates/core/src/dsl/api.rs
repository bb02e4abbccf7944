use indexmap::IndexMap;

use super::{
    is_base_primitive, is_identifier, Call, DslError, FunctionBody, FunctionDef, ObjectRef,
    ParamSpec, Plan, Provenance, SkillSignature, TemplateArg, BASE_PRIMITIVES,
};

/// Hard cap on nested expansion. Unreachable for registries built through
/// [`Api::register`], which only admits bodies over existing names.
pub const MAX_EXPANSION_DEPTH: usize = 16;

/// The function registry plus the scene objects its plans may refer to.
///
/// Values are immutable: every mutation returns a new `Api`.
#[derive(Debug, Clone, PartialEq)]
pub struct Api {
    functions: IndexMap<String, FunctionDef>,
    objects: IndexMap<String, ObjectRef>,
}

fn primitive(name: &str, params: &[(&str, &str)], doc: &str) -> FunctionDef {
    FunctionDef {
        signature: SkillSignature {
            name: name.to_string(),
            params: params
                .iter()
                .map(|(n, d)| ParamSpec { description: d.to_string(), ..ParamSpec::object(n) })
                .collect(),
            doc: doc.to_string(),
            provenance: Provenance::Base,
        },
        body: FunctionBody::Primitive,
    }
}

fn base_functions() -> Vec<FunctionDef> {
    let defs = vec![
        primitive("goto", &[("obj", "object to move above")], "Move the gripper above the given object."),
        primitive(
            "pickup",
            &[("obj", "object to grasp")],
            "Move to the given object and grasp it. The gripper must be empty.",
        ),
        primitive(
            "release",
            &[],
            "Open the gripper and let go of the held object, dropping it into a container if one is below.",
        ),
        primitive("open_gripper", &[], "Open the gripper."),
        primitive("close_gripper", &[], "Close the gripper."),
    ];
    debug_assert!(defs.iter().map(|d| d.name()).eq(BASE_PRIMITIVES));
    defs
}

impl Api {
    /// Base primitives grounded in `objects`.
    pub fn base(objects: Vec<ObjectRef>) -> Api {
        Api {
            functions: base_functions().into_iter().map(|d| (d.signature.name.clone(), d)).collect(),
            objects: objects.into_iter().map(|o| (o.id.clone(), o)).collect(),
        }
    }

    /// Same taught functions, base primitives only.
    pub fn base_only(&self) -> Api {
        Api::base(self.objects.values().cloned().collect())
    }

    pub fn get(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    /// Base primitives first, then taught functions in registration order.
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.values()
    }

    pub fn taught(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.values().filter(|d| !d.is_primitive())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectRef> {
        self.objects.get(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectRef> {
        self.objects.values()
    }

    pub fn object_ids(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    /// Parses and validates in one step.
    pub fn parse_plan(&self, text: &str) -> Result<Plan, DslError> {
        let plan = Plan::parse_syntax(text)?;
        self.validate_plan(&plan)?;
        Ok(plan)
    }

    pub fn validate_call(&self, call: &Call) -> Result<(), DslError> {
        let def = self.get(&call.function).ok_or_else(|| DslError::UnknownFunction(call.function.clone()))?;
        if def.signature.arity() != call.args.len() {
            return Err(DslError::ArityMismatch {
                name: call.function.clone(),
                expected: def.signature.arity(),
                got: call.args.len(),
            });
        }
        if let Some(bad) = call.args.iter().find(|a| !self.objects.contains_key(a.as_str())) {
            return Err(DslError::UnknownObject(bad.clone()));
        }
        Ok(())
    }

    pub fn validate_plan(&self, plan: &Plan) -> Result<(), DslError> {
        plan.iter().try_for_each(|c| self.validate_call(c))
    }

    fn check_definition(&self, def: &FunctionDef) -> Result<(), DslError> {
        let sig = &def.signature;
        if !is_identifier(&sig.name) {
            return Err(DslError::InvalidIdentifier(sig.name.clone()));
        }
        let mut seen: Vec<&str> = Vec::new();
        for p in &sig.params {
            if !is_identifier(&p.name) {
                return Err(DslError::InvalidIdentifier(p.name.clone()));
            }
            if seen.contains(&p.name.as_str()) {
                return Err(DslError::DuplicateParam(p.name.clone()));
            }
            seen.push(&p.name);
        }
        let body = match &def.body {
            FunctionBody::Template(t) if !t.steps.is_empty() => t,
            _ => return Err(DslError::EmptyBody(sig.name.clone())),
        };
        for step in &body.steps {
            let callee =
                self.get(&step.function).ok_or_else(|| DslError::UnknownBodyFunction(step.function.clone()))?;
            if callee.signature.arity() != step.args.len() {
                return Err(DslError::ArityMismatch {
                    name: step.function.clone(),
                    expected: callee.signature.arity(),
                    got: step.args.len(),
                });
            }
            for arg in &step.args {
                match arg {
                    TemplateArg::Param(p) if !seen.contains(&p.as_str()) => {
                        return Err(DslError::UnboundParam(p.clone()))
                    }
                    TemplateArg::Const(id) if !self.objects.contains_key(id) => {
                        return Err(DslError::UnknownObject(id.clone()))
                    }
                    _ => {}
                }
            }
        }
        let used = body.referenced_params();
        if let Some(unused) = sig.params.iter().find(|p| !used.contains(&p.name.as_str())) {
            return Err(DslError::UnreferencedParam(unused.name.clone()));
        }
        Ok(())
    }

    /// Adds a taught function. Its body may only call functions that already
    /// exist, so the call graph stays acyclic by construction.
    pub fn register(&self, def: FunctionDef) -> Result<Api, DslError> {
        let name = def.signature.name.clone();
        if self.functions.contains_key(&name) {
            return Err(DslError::DuplicateName(name));
        }
        if def.signature.provenance == Provenance::Base {
            return Err(DslError::BasePrimitiveImmutable(name));
        }
        self.check_definition(&def)?;
        let mut next = self.clone();
        next.functions.insert(name, def);
        Ok(next)
    }

    /// Taught functions whose bodies call `name` directly, in registration order.
    pub fn direct_callers(&self, name: &str) -> Vec<String> {
        self.taught()
            .filter(|d| d.name() != name && d.template().is_some_and(|t| t.calls_function(name)))
            .map(|d| d.signature.name.clone())
            .collect()
    }

    /// `name` plus everything that reaches it through body calls.
    fn dependents(&self, name: &str) -> Vec<String> {
        let mut out = vec![name.to_string()];
        let mut i = 0;
        while i < out.len() {
            for caller in self.direct_callers(&out[i]) {
                if !out.contains(&caller) {
                    out.push(caller);
                }
            }
            i += 1;
        }
        out
    }

    fn check_mutable(&self, name: &str) -> Result<(), DslError> {
        if is_base_primitive(name) {
            return Err(DslError::BasePrimitiveImmutable(name.to_string()));
        }
        if !self.functions.contains_key(name) {
            return Err(DslError::NotFound(name.to_string()));
        }
        Ok(())
    }

    /// Replaces a taught function in place. Renaming or changing arity is only
    /// allowed while no other body calls it.
    pub fn update(&self, name: &str, def: FunctionDef) -> Result<Api, DslError> {
        self.check_mutable(name)?;
        let new_name = def.signature.name.clone();
        if def.signature.provenance == Provenance::Base {
            return Err(DslError::BasePrimitiveImmutable(new_name));
        }
        if new_name != name && self.functions.contains_key(&new_name) {
            return Err(DslError::DuplicateName(new_name));
        }
        let old_arity = self.functions[name].signature.arity();
        let callers = self.direct_callers(name);
        if !callers.is_empty() && (new_name != name || def.signature.arity() != old_arity) {
            return Err(DslError::ReferencedByOthers(callers));
        }
        let dependents = self.dependents(name);
        if let Some(t) = def.template() {
            if let Some(step) = t.steps.iter().find(|s| dependents.contains(&s.function)) {
                return Err(DslError::CycleDetected { name: name.to_string(), via: step.function.clone() });
            }
        }
        let mut without = self.clone();
        let index = without.functions.get_index_of(name).expect("checked above");
        without.functions.shift_remove(name);
        without.check_definition(&def)?;
        let mut next = self.clone();
        next.functions.shift_remove(name);
        next.functions.shift_insert(index, new_name, def);
        Ok(next)
    }

    pub fn remove(&self, name: &str) -> Result<Api, DslError> {
        self.check_mutable(name)?;
        let callers = self.direct_callers(name);
        if !callers.is_empty() {
            return Err(DslError::ReferencedByOthers(callers));
        }
        let mut next = self.clone();
        next.functions.shift_remove(name);
        Ok(next)
    }

    /// Expands every taught function down to base primitives, preserving call order.
    pub fn inline_plan(&self, plan: &Plan) -> Result<Plan, DslError> {
        let mut out = Vec::with_capacity(plan.len());
        for call in plan {
            self.validate_call(call)?;
            self.expand(call, 0, &mut out)?;
        }
        Ok(Plan { calls: out })
    }

    fn expand(&self, call: &Call, depth: usize, out: &mut Vec<Call>) -> Result<(), DslError> {
        if depth > MAX_EXPANSION_DEPTH {
            return Err(DslError::ExpansionDepthExceeded(MAX_EXPANSION_DEPTH));
        }
        let def = self.get(&call.function).ok_or_else(|| DslError::UnknownFunction(call.function.clone()))?;
        match &def.body {
            FunctionBody::Primitive => out.push(call.clone()),
            FunctionBody::Template(body) => {
                let bindings: Vec<(&str, &str)> =
                    def.signature.param_names().zip(call.args.iter().map(String::as_str)).collect();
                for step in &body.steps {
                    let inner = step
                        .instantiate(&bindings)
                        .ok_or_else(|| DslError::UnboundParam(format!("{} in {}", step, def.name())))?;
                    self.expand(&inner, depth + 1, out)?;
                }
            }
        }
        Ok(())
    }

    /// Kahn's algorithm over the body-call graph; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let names: Vec<&str> = self.functions.keys().map(String::as_str).collect();
        let mut indegree: Vec<usize> = names
            .iter()
            .map(|n| match &self.functions[*n].body {
                FunctionBody::Template(t) => {
                    let mut callees: Vec<&str> = t.steps.iter().map(|s| s.function.as_str()).collect();
                    callees.sort_unstable();
                    callees.dedup();
                    callees.len()
                }
                FunctionBody::Primitive => 0,
            })
            .collect();
        let mut ready: Vec<usize> = (0..names.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::new();
        while let Some(i) = ready.pop() {
            order.push(names[i].to_string());
            for (j, n) in names.iter().enumerate() {
                if let FunctionBody::Template(t) = &self.functions[*n].body {
                    if t.calls_function(names[i]) {
                        indegree[j] -= 1;
                        if indegree[j] == 0 {
                            ready.push(j);
                        }
                    }
                }
            }
        }
        (order.len() == names.len()).then_some(order)
    }

    /// Inserts without any checks. Only for building adversarial registries in tests.
    #[doc(hidden)]
    pub fn insert_unchecked(&self, def: FunctionDef) -> Api {
        let mut next = self.clone();
        next.functions.insert(def.signature.name.clone(), def);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Vec<ObjectRef> {
        vec![
            ObjectRef::new("LUNCH_BAG", "lunch bag", &["lunch bag"]).container(),
            ObjectRef::new("RICE_KRISPIES", "Rice Krispies treat", &["rice krispies"]),
            ObjectRef::new("SKITTLES", "Skittles", &["skittles"]),
        ]
    }

    fn pack() -> FunctionDef {
        FunctionDef::taught(
            "pack",
            &["obj"],
            "Pack a specified object in the lunch bag",
            "pickup($obj); goto(LUNCH_BAG); release()",
            Provenance::TaughtLive,
        )
        .unwrap()
    }

    #[test]
    fn parse_validates() {
        let api = Api::base(scene());
        let plan = api.parse_plan("pickup(RICE_KRISPIES); goto(LUNCH_BAG); release()").unwrap();
        assert_eq!(plan.len(), 3);
        assert!(api.parse_plan("").unwrap().is_empty());
        assert_eq!(api.parse_plan("pack(SKITTLES)"), Err(DslError::UnknownFunction("pack".into())));
        assert_eq!(
            api.parse_plan("goto()"),
            Err(DslError::ArityMismatch { name: "goto".into(), expected: 1, got: 0 })
        );
        assert_eq!(api.parse_plan("goto(PEN)"), Err(DslError::UnknownObject("PEN".into())));
        let api = api.register(pack()).unwrap();
        assert_eq!(api.parse_plan("pack(SKITTLES)").unwrap().len(), 1);
    }

    #[test]
    fn register_rules() {
        let api = Api::base(scene());
        let with_pack = api.register(pack()).unwrap();
        assert_eq!(with_pack.len(), 6);
        assert_eq!(api.len(), 5, "original value untouched");

        let mut dup = pack();
        dup.signature.name = "pickup".into();
        assert_eq!(with_pack.register(dup), Err(DslError::DuplicateName("pickup".into())));
        assert_eq!(with_pack.register(pack()), Err(DslError::DuplicateName("pack".into())));

        let unknown = FunctionDef::taught("f", &[], "", "stow(SKITTLES)", Provenance::TaughtMeta).unwrap();
        assert_eq!(api.register(unknown), Err(DslError::UnknownBodyFunction("stow".into())));

        let unbound = FunctionDef::taught("f", &[], "", "pickup($x)", Provenance::TaughtMeta).unwrap();
        assert_eq!(api.register(unbound), Err(DslError::UnboundParam("x".into())));

        let unused = FunctionDef::taught("f", &["x", "y"], "", "pickup($x)", Provenance::TaughtMeta).unwrap();
        assert_eq!(api.register(unused), Err(DslError::UnreferencedParam("y".into())));

        let empty = FunctionDef::taught("f", &[], "", "", Provenance::TaughtMeta).unwrap();
        assert_eq!(api.register(empty), Err(DslError::EmptyBody("f".into())));

        let self_ref = FunctionDef::taught("f", &[], "", "f()", Provenance::TaughtMeta).unwrap();
        assert_eq!(api.register(self_ref), Err(DslError::UnknownBodyFunction("f".into())));
    }

    #[test]
    fn remove_and_update() {
        let api = Api::base(scene()).register(pack()).unwrap();
        let twice =
            FunctionDef::taught("pack_both", &[], "", "pack(SKITTLES); pack(RICE_KRISPIES)", Provenance::TaughtMeta)
                .unwrap();
        let api = api.register(twice).unwrap();

        assert_eq!(api.remove("goto"), Err(DslError::BasePrimitiveImmutable("goto".into())));
        assert_eq!(api.remove("nope"), Err(DslError::NotFound("nope".into())));
        assert_eq!(api.remove("pack"), Err(DslError::ReferencedByOthers(vec!["pack_both".into()])));
        let trimmed = api.remove("pack_both").unwrap().remove("pack").unwrap();
        assert_eq!(trimmed.len(), 5);

        // same arity edit keeps position and callers
        let mut edited = pack();
        edited.signature.doc = "Put it in the bag".into();
        let updated = api.update("pack", edited).unwrap();
        let names: Vec<_> = updated.functions().map(|d| d.name().to_string()).collect();
        assert_eq!(names[5], "pack");
        assert_eq!(updated.get("pack").unwrap().signature.doc, "Put it in the bag");

        let rename = FunctionDef { signature: SkillSignature { name: "stow".into(), ..pack().signature }, ..pack() };
        assert_eq!(api.update("pack", rename), Err(DslError::ReferencedByOthers(vec!["pack_both".into()])));

        let cyclic = FunctionDef::taught("pack", &["obj"], "", "pickup($obj); pack_both()", Provenance::TaughtMeta)
            .unwrap();
        assert!(matches!(api.update("pack", cyclic), Err(DslError::CycleDetected { .. })));
        assert!(matches!(api.update("release", pack()), Err(DslError::BasePrimitiveImmutable(_))));
    }

    #[test]
    fn inline_expands_nested() {
        let api = Api::base(scene()).register(pack()).unwrap();
        let plan = api.parse_plan("pack(SKITTLES)").unwrap();
        assert_eq!(api.inline_plan(&plan).unwrap().to_string(), "pickup(SKITTLES); goto(LUNCH_BAG); release()");
        let prims = api.parse_plan("open_gripper(); goto(SKITTLES)").unwrap();
        assert_eq!(api.inline_plan(&prims).unwrap(), prims);
    }

    #[test]
    fn depth_guard_trips_on_forced_cycle() {
        let api = Api::base(scene());
        let looped = FunctionDef::taught("spin", &[], "", "open_gripper(); spin()", Provenance::TaughtMeta).unwrap();
        let api = api.insert_unchecked(looped);
        assert!(api.topological_order().is_none());
        let plan = Plan::new(vec![Call::new("spin", &[])]);
        assert_eq!(api.inline_plan(&plan), Err(DslError::ExpansionDepthExceeded(MAX_EXPANSION_DEPTH)));
    }
}
