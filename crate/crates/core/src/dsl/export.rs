//! JSON export of the taught part of an [`Api`]. Base primitives are never written.

use serde::{Deserialize, Serialize};

use super::{Api, BodyTemplate, DslError, FunctionBody, FunctionDef, ObjectRef, ParamKind, ParamSpec, Provenance, SkillSignature, TemplateCall};

pub const EXPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub name: String,
    pub doc: String,
    pub params: Vec<ParamRecord>,
    pub body: Vec<TemplateCall>,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
}

fn default_provenance() -> Provenance {
    Provenance::TaughtMeta
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiExport {
    pub version: u32,
    pub functions: Vec<FunctionRecord>,
}

impl From<&FunctionDef> for FunctionRecord {
    fn from(def: &FunctionDef) -> Self {
        FunctionRecord {
            name: def.signature.name.clone(),
            doc: def.signature.doc.clone(),
            params: def
                .signature
                .params
                .iter()
                .map(|p| ParamRecord { name: p.name.clone(), kind: p.kind, description: p.description.clone() })
                .collect(),
            body: def.template().map(|t| t.steps.clone()).unwrap_or_default(),
            provenance: def.signature.provenance,
        }
    }
}

impl From<FunctionRecord> for FunctionDef {
    fn from(rec: FunctionRecord) -> Self {
        FunctionDef {
            signature: SkillSignature {
                name: rec.name,
                params: rec
                    .params
                    .into_iter()
                    .map(|p| ParamSpec { name: p.name, kind: p.kind, description: p.description })
                    .collect(),
                doc: rec.doc,
                provenance: rec.provenance,
            },
            body: FunctionBody::Template(BodyTemplate { steps: rec.body }),
        }
    }
}

impl Api {
    pub fn export(&self) -> ApiExport {
        ApiExport { version: EXPORT_VERSION, functions: self.taught().map(FunctionRecord::from).collect() }
    }

    /// Rebuilds a registry over `objects`, registering functions in file order.
    pub fn import(export: &ApiExport, objects: Vec<ObjectRef>) -> Result<Api, DslError> {
        if export.version != EXPORT_VERSION {
            return Err(DslError::SchemaVersionMismatch(export.version));
        }
        export
            .functions
            .iter()
            .try_fold(Api::base(objects), |api, rec| api.register(FunctionDef::from(rec.clone())))
    }
}
