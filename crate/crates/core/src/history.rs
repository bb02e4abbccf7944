//! Interaction history: one step per proposed plan or teaching event.

use serde::{Deserialize, Serialize};

use crate::dsl::{FunctionRecord, Plan};
use crate::sim::SimEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initiator {
    User,
    RobotProactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confirmation {
    NotRequired,
    Confirmed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ExecutionStatus {
    Pending,
    Completed { events: Vec<SimEvent> },
    Faulted { events: Vec<SimEvent> },
    Skipped,
}

impl ExecutionStatus {
    pub fn events(&self) -> &[SimEvent] {
        match self {
            ExecutionStatus::Completed { events } | ExecutionStatus::Faulted { events } => events,
            _ => &[],
        }
    }

    pub fn ran(&self) -> bool {
        matches!(self, ExecutionStatus::Completed { .. } | ExecutionStatus::Faulted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionStep {
    pub index: usize,
    pub initiator: Initiator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    pub plan: Plan,
    pub confirmation: Confirmation,
    pub execution: ExecutionStatus,
    pub t_start_ms: u64,
    pub t_end_ms: u64,
    /// Set on teaching steps: the function that was added.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taught: Option<FunctionRecord>,
    /// World hash after this step, for replay verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_hash: Option<String>,
}

impl InteractionStep {
    pub fn is_teaching(&self) -> bool {
        self.taught.is_some()
    }

    /// A plan proposal (anything but a teaching annotation).
    pub fn is_proposal(&self) -> bool {
        self.taught.is_none()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.initiator == Initiator::RobotProactive && self.confirmation == Confirmation::NotRequired {
            return Err(format!("step {}: proactive plan without a confirmation gate", self.index));
        }
        if self.execution.ran() && self.confirmation == Confirmation::Rejected {
            return Err(format!("step {}: rejected plan was executed", self.index));
        }
        if self.t_end_ms < self.t_start_ms {
            return Err(format!("step {}: ends before it starts", self.index));
        }
        Ok(())
    }
}

/// Objects dropped into a container during executed steps, in delivery order.
pub fn delivered_items(history: &[InteractionStep]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in history.iter().flat_map(|s| s.execution.events()) {
        if e.container.is_some() && !out.contains(&e.subject) {
            out.push(e.subject.clone());
        }
    }
    out
}
