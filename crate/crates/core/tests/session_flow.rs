mod common;

use std::sync::Arc;

use provox_core::dsl::{ObjectRef, Plan};
use provox_core::history::Initiator;
use provox_core::planner::{MockPlanner, Outcome};
use provox_core::session::transcript::{parse_jsonl, read_transcript, replay, to_jsonl, TranscriptError, TranscriptWriter};
use provox_core::session::{Mode, Pending, Reply, Session, SessionConfig, SessionState};
use provox_core::sim::{Placement, SceneSpec};
use provox_core::synthesis::{TeachExample, TeachForm};

use common::*;

fn with_cereal_bar() -> SceneSpec {
    let mut scene = scene("lunchbag");
    scene.objects.push(ObjectRef::new("CEREAL_BAR", "cereal bar", &["cereal bar"]).at([-0.4, 0.0, 0.0]));
    scene
}

fn pack_form() -> TeachForm {
    serde_json::from_str(
        r#"{"name":"pack","behavior":"Pack a specified object in the lunch bag","params":["obj"],
            "steps":["pickup($obj)","goto(LUNCH_BAG)","release()"]}"#,
    )
    .unwrap()
}

#[test]
fn meta_prompting_flow() {
    let mut s = Session::new(with_cereal_bar(), Mode::MetaPrompting, SessionConfig::default(), mock()).unwrap();
    let world = s.world().hash();
    s.meta_set_goal("pack my kids' lunch").unwrap();
    let before = s.meta_test_utterance("can you put the cereal bar in the bag?").unwrap();
    assert_eq!(before, Outcome::Plan(Plan::parse_syntax("pickup(CEREAL_BAR); goto(LUNCH_BAG); release()").unwrap()));
    assert_eq!(s.api().len(), 5);

    s.meta_teach(&pack_form()).unwrap();
    let after = s.meta_test_utterance("Put the cereal bar in my lunch.").unwrap();
    assert_eq!(after, Outcome::Plan(Plan::parse_syntax("pack(CEREAL_BAR)").unwrap()));

    let dup = s.meta_teach(&pack_form()).unwrap_err();
    assert_eq!(dup.code(), "DuplicateName");

    let wrapper: TeachForm = serde_json::from_str(
        r#"{"name":"pack_twice","behavior":"Pack two things","params":["a","b"],"steps":["pack($a)","pack($b)"]}"#,
    )
    .unwrap();
    s.meta_teach(&wrapper).unwrap();
    assert_eq!(s.meta_delete("pack").unwrap_err().code(), "ReferencedByOthers");
    let mut edited = pack_form();
    edited.steps.push("goto(SKITTLES)".parse().unwrap());
    s.meta_edit("pack", &edited).unwrap();
    assert_eq!(s.api().get("pack").unwrap().template().unwrap().steps.len(), 4);
    s.meta_delete("pack_twice").unwrap();
    s.meta_delete("pack").unwrap();

    assert_eq!(s.world().hash(), world);
    assert!(s.history().is_empty());
}

#[test]
fn export_after_teaching_matches_golden() {
    let mut s = Session::new(scene("lunchbag"), Mode::MetaPrompting, SessionConfig::default(), mock()).unwrap();
    s.meta_set_goal("pack my kids' lunch with Skittles and Rice-Krispies while I make their sandwiches").unwrap();
    s.meta_teach(&pack_form()).unwrap();
    let file = s.export_context();
    assert_eq!(file.api.functions.len(), 1);
    check_golden("golden/context_pack.json", &(file.to_json() + "\n")).unwrap();
}

#[test]
fn confirm_delivers_and_suggests_remaining_item() {
    let mut s = Session::from_context(scene("lunchbag"), &lunch_context(), Mode::Live, SessionConfig::default(), mock()).unwrap();
    let reply = s.handle_utterance("pack the Skittles").unwrap();
    assert_eq!(reply, Reply::Pending { plan: Plan::parse_syntax("pack(SKITTLES)").unwrap() });
    s.confirm().unwrap();
    assert_eq!(s.world().objects["SKITTLES"], Placement::Inside { container: "LUNCH_BAG".into() });
    let Some(Pending::Suggestion(first)) = s.pending().cloned() else { panic!("no suggestion") };
    assert_eq!(first.gloss, "Should I pack the Rice Krispies treat next?");
    s.confirm().unwrap();
    let Some(Pending::Suggestion(last)) = s.pending().cloned() else { panic!("no suggestion") };
    assert_eq!(last.plan, Plan::parse_syntax("pack(HAND_SANITIZER)").unwrap());
    assert_eq!(last.gloss, "Should I pack the hand sanitizer next?");
    s.confirm().unwrap();
    assert_eq!(s.state(), SessionState::Done);
    assert!(s.pending().is_none());
    assert_eq!(s.world().contents("LUNCH_BAG").len(), 3);
}

#[test]
fn events_describe_the_session() {
    let mut s = Session::from_context(scene("lunchbag"), &lunch_context(), Mode::Live, SessionConfig::default(), mock()).unwrap();
    s.handle_utterance("pack the Skittles").unwrap();
    s.confirm().unwrap();
    let events = s.drain_events();
    let kinds: Vec<String> = events.iter().map(|e| serde_json::to_value(e).unwrap()["type"].as_str().unwrap().to_string()).collect();
    assert!(kinds.contains(&"state_changed".to_string()));
    assert_eq!(kinds.iter().filter(|k| *k == "execution_event").count(), 3);
    assert_eq!(kinds.last().map(String::as_str), Some("state_changed"));
    assert!(kinds.contains(&"suggestion".to_string()));
    assert!(s.drain_events().is_empty());
    s.handle_utterance("hmm").unwrap_err();
}

#[test]
fn non_proactive_burden_counts() {
    let on = burden_run(true);
    let off = burden_run(false);
    assert!(on.robot_initiated >= 2 && on.user_initiated <= 1);
    assert_eq!((off.user_initiated, off.robot_initiated), (3, 0));
    for m in [on, off] {
        assert_eq!(m.time_breakdown.sum_ms(), m.total_time_ms);
    }
}

fn happy_path() -> Session {
    let mut s = Session::new(scene("lunchbag"), Mode::MetaPrompting, SessionConfig::default(), Arc::new(MockPlanner)).unwrap();
    s.meta_set_goal("pack the Skittles, the Rice Krispies and the gummies in the lunch bag").unwrap();
    s.go_live().unwrap();
    let ex = TeachExample::new(
        "Pack the Rice Krispies in the lunchbox",
        Plan::parse_syntax("pickup(RICE_KRISPIES); goto(LUNCH_BAG); release()").unwrap(),
    );
    s.teach_live(&ex).unwrap();
    s.handle_utterance("pack the Skittles").unwrap();
    s.confirm().unwrap();
    s.reject().unwrap();
    s.handle_utterance("pack the gummies").unwrap();
    s.confirm().unwrap();
    s
}

#[test]
fn transcript_replays_to_the_same_world() {
    let s = happy_path();
    let jsonl = to_jsonl(s.history());
    check_golden("transcripts/happy_path.jsonl", &jsonl).unwrap();
    assert!(s.history().iter().any(|st| st.initiator == Initiator::RobotProactive));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let mut writer = TranscriptWriter::create(&path).unwrap();
    writer.sync(&s.history()[..2]).unwrap();
    writer.sync(s.history()).unwrap();
    let steps = read_transcript(&path).unwrap();
    assert_eq!(steps, s.history());

    let report = replay(&steps, &scene("lunchbag"), None).unwrap();
    assert_eq!(report.final_hash, s.world().hash());
    assert_eq!(report.executed_steps, 2);

    let mut tampered = parse_jsonl(&jsonl).unwrap();
    let last = tampered.iter_mut().rev().find(|st| st.execution.ran()).unwrap();
    last.plan = Plan::parse_syntax("pack(HAND_SANITIZER)").unwrap();
    assert!(matches!(replay(&tampered, &scene("lunchbag"), None), Err(TranscriptError::HashMismatch { .. })));
}
