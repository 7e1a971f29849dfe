mod common;

use dili::engine::run;
use dili::io::{
    parse_scenario, print_scenario, read_trace, render_ascii, replay_frames, write_trace, Overlay, TraceError,
};
use dili::{Configuration, ModuleId, Status};

const BLOB: &str = "\
# two by two
grid 4 4
input 0 0
output 3 0
module 1 0 0
module 2 1 0
module 3 0 1
module 4 1 1
";

fn parse_err(text: &str) -> (usize, String) {
    let e = parse_scenario(text).unwrap_err();
    (e.line, e.reason)
}

#[test]
fn parse_errors_cite_the_offending_line() {
    let (line, reason) = parse_err(&format!("{BLOB}teleport 1 2\n"));
    assert_eq!(line, 9);
    assert!(reason.contains("teleport"), "{reason}");

    assert_eq!(parse_err(&format!("{BLOB}grid 5 5\n")).0, 9);
    assert_eq!(parse_err(&format!("{BLOB}module 5 4 4\n")).0, 9);
    assert_eq!(parse_err(&format!("{BLOB}module 5 1 1\n")).0, 9);
    assert_eq!(parse_err(&format!("{BLOB}module 4 2 1\n")).0, 9);
    assert_eq!(parse_err(&format!("{BLOB}latency uniform 5\n")).0, 9);
}

#[test]
fn disconnected_start_is_rejected() {
    let text = BLOB.replace("module 4 1 1", "module 4 3 3");
    assert!(parse_scenario(&text).is_err());
}

#[test]
fn omitted_parameters_take_defaults() {
    let s = parse_scenario(BLOB).unwrap();
    assert_eq!(s.params.round_timeout, 10_000);
    assert_eq!(s.params.max_ticks, 10_000_000);
    assert_eq!(s.params.motion.pitch_mm, 12.0);
    assert!(s.events.is_empty());
}

#[test]
fn printed_scenarios_parse_back() {
    let text = format!("{BLOB}seed 9\nlatency fixed 3\nslide-rule double\nat 500 fail 2\nat 900 set-output 2 3\n");
    let s = parse_scenario(&text).unwrap();
    assert_eq!(parse_scenario(&print_scenario(&s)).unwrap(), s);
}

#[test]
fn run_traces_round_trip_byte_for_byte() {
    let mut s = common::random_blob(7);
    s.params.log_messages = true;
    let out = run(&s, &s.params).unwrap();
    let text = write_trace(&out.trace);
    let back = read_trace(&text).unwrap();
    assert_eq!(back, out.trace);
    assert_eq!(write_trace(&back), text);
}

#[test]
fn unknown_record_kinds_are_reported() {
    let s = parse_scenario(BLOB).unwrap();
    let out = run(&s, &s.params).unwrap();
    let mut text = write_trace(&out.trace);
    text.push_str("5 99 WOBBLE x=1\n");
    match read_trace(&text) {
        Err(TraceError::UnknownKind { kind, .. }) => assert_eq!(kind, "WOBBLE"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn blob_renders_as_expected() {
    let s = parse_scenario(BLOB).unwrap();
    let mut config = Configuration::new(s.modules.iter().copied()).unwrap();
    let plain = render_ascii(&s, &config, &Overlay::default());
    assert_eq!(plain, "....\n....\n##..\n##.O\n");

    config.set_status(ModuleId(4), Status::Failed).unwrap();
    let overlay = Overlay { leader: Some(ModuleId(2)), highlight: vec![dili::Coord::new(2, 0)] };
    assert_eq!(render_ascii(&s, &config, &overlay), "....\n....\n#X..\n#L*O\n");
}

#[test]
fn replay_ends_on_the_final_configuration() {
    let s = parse_scenario(BLOB).unwrap();
    let out = run(&s, &s.params).unwrap();
    let frames = replay_frames(&s, &out.trace);
    assert_eq!(frames.len() as u64, out.metrics.maneuvers + 1);
    assert_eq!(frames.last().unwrap().config, out.final_config);
}
