//! Line-oriented interactive session.
//!
//! Plain lines are utterances. Lines starting with `:` are commands; `:help` lists them.

use std::io::{self, BufRead, Write};

use provox_core::planner::Outcome;
use provox_core::session::transcript::TranscriptWriter;
use provox_core::session::{Pending, Reply, Session, SessionError};
use provox_core::synthesis::{TeachExample, TeachForm};

const HELP: &str = "\
commands:
  <text>                      instruct the robot
  :confirm | y                accept the pending plan
  :reject | n                 decline the pending plan
  :teach <utterance> => <plan>
                              teach a function by demonstration
  :goal <text>                set the goal (meta mode)
  :form <json>                define a function from a form (meta mode)
  :delete <name>              remove a taught function (meta mode)
  :test <text>                preview a plan without executing (meta mode)
  :live                       leave meta mode
  :api  :world  :metrics  :history  :export
  :wait <seconds>             let time pass
  :quit";

/// Drives `session` from `input` until EOF or `:quit`, writing replies to `out`.
pub fn run(
    mut session: Session,
    input: impl BufRead,
    mut out: impl Write,
    mut transcript: Option<&mut TranscriptWriter>,
) -> io::Result<()> {
    writeln!(out, "provox: {:?} mode, goal: {}", session.mode(), display_goal(session.goal()))?;
    prompt(&session, &mut out)?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            prompt(&session, &mut out)?;
            continue;
        }
        if matches!(line, ":quit" | ":q" | ":exit") {
            break;
        }
        match dispatch(&mut session, line) {
            Ok(text) => write!(out, "{text}")?,
            Err(e) => writeln!(out, "error: {}: {e}", e.code())?,
        }
        if let Some(t) = transcript.as_deref_mut() {
            t.sync(session.history())?;
        }
        session.drain_events();
        prompt(&session, &mut out)?;
    }
    let m = session.metrics();
    writeln!(
        out,
        "bye: {:.1} s simulated, {} user / {} robot plans",
        m.total_time_secs(),
        m.user_initiated,
        m.robot_initiated
    )?;
    out.flush()
}

fn display_goal(goal: &str) -> &str {
    if goal.is_empty() { "(none)" } else { goal }
}

fn prompt(session: &Session, out: &mut impl Write) -> io::Result<()> {
    if let Some(p) = session.pending() {
        let text = match p {
            Pending::Suggestion(s) => s.gloss.clone(),
            Pending::AwaitingUserConfirm { plan, .. } => format!("Run {plan}?"),
        };
        writeln!(out, "? {text} [y/n]")?;
    }
    write!(out, "> ")?;
    out.flush()
}

fn dispatch(session: &mut Session, line: &str) -> Result<String, SessionError> {
    let (cmd, rest) = match line.strip_prefix(':') {
        Some(c) => c.split_once(char::is_whitespace).map(|(a, b)| (a, b.trim())).unwrap_or((c, "")),
        None if matches!(line, "y" | "yes") => ("confirm", ""),
        None if matches!(line, "n" | "no") => ("reject", ""),
        None => return session.handle_utterance(line).map(|r| render_reply(&r)),
    };
    match cmd {
        "help" | "h" => Ok(format!("{HELP}\n")),
        "confirm" => session.confirm().map(|r| render_reply(&r)),
        "reject" => session.reject().map(|r| render_reply(&r)),
        "teach" => {
            let Some((utterance, plan)) = rest.split_once("=>") else {
                return Ok("usage: :teach <utterance> => <plan>\n".into());
            };
            let plan = session.api().parse_plan(plan.trim())?;
            let def = session.teach_live(&TeachExample::new(utterance.trim(), plan))?;
            Ok(format!("learned {}\n", def.render_signature()))
        }
        "goal" => session.meta_set_goal(rest).map(|_| format!("goal: {rest}\n")),
        "form" => match serde_json::from_str::<TeachForm>(rest) {
            Ok(form) => session.meta_teach(&form).map(|d| format!("defined {}\n", d.render_signature())),
            Err(e) => Ok(format!("error: InvalidRequest: {e}\n")),
        },
        "delete" => session.meta_delete(rest).map(|_| format!("deleted {rest}\n")),
        "test" => session.meta_test_utterance(rest).map(|o| match o {
            Outcome::Plan(p) => format!("would run: {p}\n"),
            Outcome::Clarification(q) => format!("robot: {q}\n"),
            Outcome::Done => "robot: nothing left to do\n".into(),
        }),
        "live" => session.go_live().map(|_| "live mode\n".into()),
        "api" => Ok(session.api().functions().map(|f| format!("{}\n", f.render_signature())).collect()),
        "world" => Ok(format!("{}\n", pretty(&session.world()))),
        "metrics" => Ok(format!("{}\n", pretty(&session.metrics()))),
        "history" => Ok(session
            .history()
            .iter()
            .map(|s| {
                format!("{:>3} {:?} {} [{:?}]\n", s.index, s.initiator, s.plan, s.execution)
            })
            .collect()),
        "export" => Ok(format!("{}\n", session.export_context().to_json())),
        "wait" => match rest.parse::<f64>() {
            Ok(secs) if secs >= 0.0 => {
                session.wait((secs * 1000.0).round() as u64);
                Ok(format!("waited {secs} s\n"))
            }
            _ => Ok("usage: :wait <seconds>\n".into()),
        },
        other => Ok(format!("unknown command :{other} (try :help)\n")),
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("values serialize")
}

fn render_reply(reply: &Reply) -> String {
    match reply {
        Reply::Pending { plan } => format!("plan: {plan}\n"),
        Reply::Executed { plan, fault: None, .. } => format!("done: {plan}\n"),
        Reply::Executed { plan, fault: Some(f), .. } => format!("fault while running {plan}: {f}\n"),
        Reply::Rejected { plan } => format!("skipped: {plan}\n"),
        Reply::Clarification { text } => format!("robot: {text}\n"),
        Reply::Done => "robot: the goal looks complete\n".into(),
        Reply::Failed { error, message } => format!("failed: {error}: {message}\n"),
    }
}
