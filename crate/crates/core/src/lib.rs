//! Proactive end-user programming for a tabletop robot arm.
//!
//! Users teach functions by demonstration or through a form, a planner turns
//! utterances and proactive triggers into plans over the growing API, and a
//! kinematic simulator executes them.

pub mod dsl;
pub mod history;
pub mod par;
pub mod planner;
pub mod sim;
pub mod synthesis;
pub mod text;
pub mod proactive;
pub mod session;
pub mod eval;
