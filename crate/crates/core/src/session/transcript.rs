//! JSON-lines transcripts: one interaction step per line, replayable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::ContextFile;
use crate::dsl::{Api, DslError, FunctionDef};
use crate::history::InteractionStep;
use crate::sim::{load_scene, SceneError, SceneSpec};

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot read transcript: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("step {index}: world hash {got} does not match the recorded {expected}")]
    HashMismatch { index: usize, expected: String, got: String },
}

impl TranscriptError {
    pub fn code(&self) -> &'static str {
        match self {
            TranscriptError::Io(_) => "TranscriptIo",
            TranscriptError::Parse { .. } => "TranscriptParse",
            TranscriptError::Scene(e) => e.code(),
            TranscriptError::Dsl(e) => e.code(),
            TranscriptError::HashMismatch { .. } => "HashMismatch",
        }
    }
}

/// Appends steps to a file as the history grows.
pub struct TranscriptWriter {
    out: BufWriter<File>,
    written: usize,
}

impl TranscriptWriter {
    pub fn create(path: impl AsRef<Path>) -> std::io::Result<TranscriptWriter> {
        Ok(TranscriptWriter { out: BufWriter::new(File::create(path)?), written: 0 })
    }

    /// Writes the steps of `history` not yet on disk.
    pub fn sync(&mut self, history: &[InteractionStep]) -> std::io::Result<()> {
        for step in &history[self.written.min(history.len())..] {
            serde_json::to_writer(&mut self.out, step)?;
            self.out.write_all(b"\n")?;
        }
        self.written = history.len();
        self.out.flush()
    }
}

pub fn to_jsonl(history: &[InteractionStep]) -> String {
    history.iter().map(|s| serde_json::to_string(s).expect("steps serialize") + "\n").collect()
}

pub fn parse_jsonl(text: &str) -> Result<Vec<InteractionStep>, TranscriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| TranscriptError::Parse { line: i + 1, source }))
        .collect()
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<InteractionStep>, TranscriptError> {
    let reader = BufReader::new(File::open(path)?);
    let mut steps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(&line).map_err(|source| TranscriptError::Parse { line: i + 1, source })?);
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub executed_steps: usize,
    pub final_hash: String,
}

/// Re-executes every executed step from the scene's initial world, re-teaching
/// functions at their teaching steps, and checks each recorded world hash.
pub fn replay(
    steps: &[InteractionStep],
    scene: &SceneSpec,
    context: Option<&ContextFile>,
) -> Result<ReplayReport, TranscriptError> {
    let mut world = load_scene(scene)?;
    let mut api = match context {
        Some(ctx) => Api::import(&ctx.api, scene.objects.clone())?,
        None => scene.base_api(),
    };
    let mut executed = 0;
    for step in steps {
        if let Some(record) = &step.taught {
            api = api.register(FunctionDef::from(record.clone()))?;
            continue;
        }
        if !step.execution.ran() {
            continue;
        }
        world = world.exec_plan(&step.plan, &api).world;
        executed += 1;
        if let Some(expected) = &step.world_hash {
            let got = world.hash();
            if &got != expected {
                return Err(TranscriptError::HashMismatch { index: step.index, expected: expected.clone(), got });
            }
        }
    }
    Ok(ReplayReport { executed_steps: executed, final_hash: world.hash() })
}
