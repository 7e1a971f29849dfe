use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BLOB: &str = "grid 4 4\ninput 0 0\noutput 3 0\nmodule 1 0 0\nmodule 2 1 0\nmodule 3 0 1\nmodule 4 1 1\n";

fn dili(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dili")).args(args).output().expect("spawn dili")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_verify_passes() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "blob.scn", BLOB);
    let trc = dir.path().join("blob.trc");
    let run = dili(&["run", s(&scn), "--trace", s(&trc), "--log-messages"]);
    assert_eq!(run.status.code(), Some(0));
    assert!(stdout(&run).contains("goal_reached=true"), "{}", stdout(&run));

    let v = dili(&["verify", s(&scn), s(&trc)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).ends_with("result: pass\n"));
}

#[test]
fn tampered_trace_names_the_failing_check() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "blob.scn", BLOB);
    let trc = dir.path().join("blob.trc");
    assert!(dili(&["run", s(&scn), "--trace", s(&trc)]).status.success());

    let text = fs::read_to_string(&trc).unwrap();
    let leader = text.lines().find(|l| l.contains(" LEADER ")).unwrap().to_string();
    let doubled = text.replacen(&leader, &format!("{leader}\n{leader}"), 1);
    let bad = write(dir.path(), "bad.trc", &doubled);
    let v = dili(&["verify", s(&scn), s(&bad)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("election: FAIL line "), "{}", stdout(&v));
}

#[test]
fn metrics_file_and_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "blob.scn", &format!("{BLOB}seed 3\n"));
    let m = dir.path().join("m.txt");
    let o = dili(&["run", s(&scn), "--metrics", s(&m), "--max-ticks", "50"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    let report = fs::read_to_string(&m).unwrap();
    assert!(report.contains("goal_reached=false"), "{report}");

    // Same seed given twice must give the same trace; the flag beats the file.
    let t1 = dir.path().join("a.trc");
    let t2 = dir.path().join("b.trc");
    let t3 = dir.path().join("c.trc");
    dili(&["run", s(&scn), "--trace", s(&t1), "--seed", "3"]);
    dili(&["run", s(&scn), "--trace", s(&t2)]);
    dili(&["run", s(&scn), "--trace", s(&t3), "--seed", "4"]);
    let (a, b, c) = (fs::read(&t1).unwrap(), fs::read(&t2).unwrap(), fs::read_to_string(&t3).unwrap());
    assert_eq!(a, b);
    assert!(c.lines().nth(1).unwrap().contains(" seed=4 "));
}

#[test]
fn oracle_prints_the_optimum() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "blob.scn", BLOB);
    let o = dili(&["oracle", s(&scn)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "optimal=6\n");
    let o = dili(&["oracle", s(&scn), "--max-states", "3"]);
    assert_eq!(stdout(&o), "optimal=unknown\n");
}

#[test]
fn render_emits_one_frame_per_maneuver() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "blob.scn", BLOB);
    let trc = dir.path().join("blob.trc");
    let run = stdout(&dili(&["run", s(&scn), "--trace", s(&trc)]));
    let maneuvers: usize = run.lines().find_map(|l| l.strip_prefix("maneuvers=")).unwrap().parse().unwrap();
    let r = stdout(&dili(&["render", s(&scn), s(&trc)]));
    assert_eq!(r.matches("frame ").count(), maneuvers + 1);
    assert!(r.starts_with("frame 0 at=0\n....\n....\n##..\n##.O\n"), "{r}");
    let svg = stdout(&dili(&["render", s(&scn), s(&trc), "--format", "svg", "--every", "100"]));
    assert_eq!(svg.matches("<svg").count(), 1);
}

#[test]
fn bench_lines_are_sorted_and_complete() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b.scn", BLOB);
    write(dir.path(), "a.scn", &BLOB.replace("output 3 0", "output 0 3"));
    let o = dili(&["bench", s(dir.path()), "--seeds", "1..3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("scenario=a seed=1 motions="));
    assert!(lines[5].starts_with("scenario=b seed=3 motions="));
    assert!(lines.iter().all(|l| l.contains("goal=true")));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(dili(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dili(&["run", "/definitely/not/here.scn"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.scn", "grid 4 4\nwarp 9\n");
    let o = dili(&["run", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(dili(&["bench", s(dir.path()), "--seeds", "5..2"]).status.code(), Some(2));
}
