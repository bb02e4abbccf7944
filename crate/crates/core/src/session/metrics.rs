//! Aggregate session metrics.

use serde::{Deserialize, Serialize};

use super::TimeLedger;
use crate::history::{Confirmation, Initiator, InteractionStep};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub instructing_ms: u64,
    pub executing_ms: u64,
    pub confirming_ms: u64,
    pub idle_ms: u64,
}

impl TimeBreakdown {
    pub fn sum_ms(&self) -> u64 {
        self.instructing_ms + self.executing_ms + self.confirming_ms + self.idle_ms
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_time_ms: u64,
    pub user_initiated: usize,
    pub robot_initiated: usize,
    pub robot_initiated_accepted: usize,
    pub time_breakdown: TimeBreakdown,
}

impl MetricsReport {
    pub fn total_time_secs(&self) -> f64 {
        self.total_time_ms as f64 / 1000.0
    }

    pub fn total_plans(&self) -> usize {
        self.user_initiated + self.robot_initiated
    }

    /// Accepted robot plans over all plan proposals; zero when there were none.
    pub fn accepted_robot_share(&self) -> f64 {
        match self.total_plans() {
            0 => 0.0,
            n => self.robot_initiated_accepted as f64 / n as f64,
        }
    }
}

/// Plan counts come from the history; times from the ledger. Idle time is
/// whatever the other buckets leave, so the breakdown always sums to the total.
pub fn compute_metrics(history: &[InteractionStep], ledger: &TimeLedger) -> MetricsReport {
    let proposals = history.iter().filter(|s| s.is_proposal());
    let (mut user, mut robot, mut accepted) = (0, 0, 0);
    for step in proposals {
        match step.initiator {
            Initiator::User => user += 1,
            Initiator::RobotProactive => {
                robot += 1;
                if step.confirmation == Confirmation::Confirmed {
                    accepted += 1;
                }
            }
        }
    }
    let total = ledger.now_ms();
    let busy = ledger.instructing_ms + ledger.executing_ms + ledger.confirming_ms;
    MetricsReport {
        total_time_ms: total,
        user_initiated: user,
        robot_initiated: robot,
        robot_initiated_accepted: accepted,
        time_breakdown: TimeBreakdown {
            instructing_ms: ledger.instructing_ms,
            executing_ms: ledger.executing_ms,
            confirming_ms: ledger.confirming_ms,
            idle_ms: total - busy,
        },
    }
}
