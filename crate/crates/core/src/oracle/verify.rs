//! Replays a trace against the scenario and re-checks every invariant.

use std::collections::BTreeMap;
use std::fmt;

use crate::agents::{candidate_score, AgentState};
use crate::engine::{admissible_maneuvers, Metrics};
use crate::io::{Record, Scenario, TraceEvent};
use crate::lattice::{
    is_connected, manhattan, path_exists, shortest_chain, Adjacency, Configuration, Coord, ModuleId, Status,
};
use crate::motion::{check_maneuver, leg_ticks, substep_schedule, Legs, Maneuver, MotionError, MotionParams};
use crate::network::Tick;

pub const CHECKS: [&str; 12] = [
    "header",
    "ordering",
    "legality",
    "connectivity",
    "serialization",
    "election",
    "leader-argmax",
    "messages",
    "epochs",
    "progress",
    "goal",
    "metrics",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// First failure, prefixed with its trace line.
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed {
                writeln!(f, "{}: ok", c.name)?;
            } else {
                writeln!(f, "{}: FAIL {}", c.name, c.detail)?;
            }
        }
        writeln!(f, "result: {}", if self.passed() { "pass" } else { "fail" })
    }
}

struct Failures(BTreeMap<&'static str, String>);

impl Failures {
    fn fail(&mut self, name: &'static str, line: usize, msg: impl fmt::Display) {
        self.0.entry(name).or_insert_with(|| format!("line {line}: {msg}"));
    }
}

struct PendingManeuver {
    mover: ModuleId,
    driver: Option<ModuleId>,
    legs: Legs,
    start: Coord,
    done: u32,
}

fn line_of(i: usize) -> usize {
    i + 2
}

/// Replays `trace` from the scenario's initial configuration.
pub fn verify_trace(scenario: &Scenario, trace: &[TraceEvent]) -> VerifyReport {
    let mut f = Failures(BTreeMap::new());
    let grid0 = scenario.grid;
    let mut grid = grid0;
    let mut config = Configuration::new(scenario.modules.iter().copied()).unwrap_or_default();
    let mut motion = scenario.params.motion;
    let mut log_messages = scenario.params.log_messages;

    match trace.first().map(|e| &e.record) {
        Some(Record::Header(h)) => {
            if (h.width, h.height, h.input, h.output, h.modules)
                != (grid0.width, grid0.height, grid0.input, grid0.output, scenario.modules.len())
            {
                f.fail("header", 2, "header disagrees with the scenario");
            }
            motion = MotionParams { pitch_mm: h.pitch_mm, speed_mm_s: h.speed_mm_s, slide_rule: h.slide_rule };
            log_messages = h.log_messages;
        }
        _ => f.fail("header", 2, "first record is not HEADER"),
    }
    let leg = leg_ticks(&motion);

    let mut last_key: Option<(Tick, u64)> = None;
    let mut pending: Option<PendingManeuver> = None;
    let mut motion_busy_until: Tick = 0;
    let mut leaders: BTreeMap<u64, usize> = BTreeMap::new();
    let mut last_epoch = 0u64;
    let mut objectives: BTreeMap<(u64, u32), Coord> = BTreeMap::new();
    let mut failed_at: BTreeMap<ModuleId, Tick> = BTreeMap::new();
    let mut link_last_sent: BTreeMap<(ModuleId, ModuleId), Tick> = BTreeMap::new();
    let (mut moves, mut maneuvers, mut msgs, mut drops) = (0u64, 0u64, 0u64, 0u64);
    let mut metrics: Option<(usize, Metrics)> = None;

    for (i, ev) in trace.iter().enumerate() {
        let line = line_of(i);
        let key = (ev.at, ev.seq);
        if last_key.is_some_and(|k| k >= key) {
            f.fail("ordering", line, "(at, seq) does not increase");
        }
        last_key = Some(key);

        match &ev.record {
            Record::Header(_) if i > 0 => f.fail("header", line, "HEADER after the first line"),
            Record::Header(_) => {}
            Record::Leader { epoch, id, score, pos } => {
                if let Some(prev) = leaders.insert(*epoch, line) {
                    f.fail("election", line, format!("second LEADER in epoch {epoch} (first on line {prev})"));
                }
                if *epoch < last_epoch {
                    f.fail("epochs", line, format!("epoch {epoch} after {last_epoch}"));
                }
                last_epoch = last_epoch.max(*epoch);
                if config.get(*id).map(|r| r.pos) != Some(*pos) {
                    f.fail("leader-argmax", line, format!("leader {id} is not at {pos}"));
                }
                let best = config
                    .modules()
                    .filter(|r| r.status.is_alive())
                    .filter_map(|r| {
                        let mut s = AgentState::new(r.id, r.pos, grid.input, grid.output);
                        s.epoch = *epoch;
                        candidate_score(&s, &admissible_maneuvers(&config, &grid, r.id, &motion))
                    })
                    .max();
                match best {
                    Some(t) if (t.score, t.id) == (*score, *id) => {}
                    Some(t) => f.fail(
                        "leader-argmax",
                        line,
                        format!("leader {id} score {score}, expected {} score {}", t.id, t.score),
                    ),
                    None => f.fail("leader-argmax", line, "leader elected with no candidates"),
                }
            }
            Record::Cmd { epoch, seq, objective, .. } => {
                if *epoch < last_epoch {
                    f.fail("epochs", line, format!("epoch {epoch} after {last_epoch}"));
                }
                objectives.insert((*epoch, *seq), *objective);
            }
            Record::Round { epoch, .. } => {
                if *epoch < last_epoch {
                    f.fail("epochs", line, format!("epoch {epoch} after {last_epoch}"));
                }
            }
            Record::Move { epoch, seq, id, driver, leg: k, legs, from, to, start, substeps } => {
                moves += 1;
                if *epoch > last_epoch && !leaders.is_empty() {
                    f.fail("epochs", line, format!("MOVE in epoch {epoch} before its leader"));
                }
                if *k == 1 {
                    if pending.is_some() {
                        f.fail("serialization", line, "maneuver started before the previous one ended");
                    }
                    pending = Some(PendingManeuver { mover: *id, driver: *driver, legs: *legs, start: *from, done: 0 });
                    let m = Maneuver { mover: *id, legs: *legs, driver: *driver };
                    match check_maneuver(&config, &grid, &m, &motion) {
                        Ok(()) => {}
                        Err(MotionError::Illegal(v)) => f.fail("legality", line, format!("maneuver rejected: {v}")),
                        Err(e) => f.fail("legality", line, e),
                    }
                    if config.get(*id).is_some_and(|r| r.status == Status::Failed) && driver.is_none() {
                        f.fail("legality", line, format!("failed module {id} moved without a driver"));
                    }
                }
                if *start < motion_busy_until {
                    f.fail("serialization", line, "leg overlaps the previous one");
                }
                motion_busy_until = ev.at;
                if ev.at != start + leg || substeps[..] != substep_schedule(*start, leg)[..] {
                    f.fail("serialization", line, "leg timing disagrees with the motor model");
                }
                let Some(p) = pending.as_mut() else { continue };
                p.done += 1;
                let wps = p.legs.waypoints(p.start);
                let n = p.done as usize;
                let expected_from = if n >= 2 { wps.get(n - 2).copied() } else { Some(p.start) };
                if (p.mover, p.driver, p.legs, p.done) != (*id, *driver, *legs, *k)
                    || expected_from != Some(*from)
                    || wps.get(n - 1) != Some(to)
                {
                    f.fail("legality", line, "leg does not continue the maneuver");
                }
                let objective = objectives.get(&(*epoch, *seq)).copied().unwrap_or(grid.output);
                if manhattan(*to, objective) >= manhattan(*from, objective) {
                    f.fail("progress", line, format!("leg {from} -> {to} does not approach {objective}"));
                }
                if config.relocate(*id, *to).is_err() {
                    f.fail("legality", line, format!("{to} is occupied"));
                }
                if *k == legs.count() {
                    maneuvers += 1;
                    if !is_connected(&config, Adjacency::Four) {
                        f.fail("connectivity", line, format!("configuration disconnected after moving {id} to {to}"));
                    }
                    pending = None;
                }
            }
            Record::Reject { .. } | Record::Elect { .. } | Record::Stuck { .. } => {}
            Record::Msg { kind, src, dst, sent, .. } => {
                msgs += 1;
                if failed_at.get(src).is_some_and(|&t| *sent >= t) {
                    f.fail("messages", line, format!("{kind} sent by failed module {src}"));
                }
                match (config.get(*src), config.get(*dst)) {
                    (Some(a), Some(b)) if manhattan(a.pos, b.pos) == 1 => {}
                    _ => f.fail("messages", line, format!("{kind} {src}->{dst} crossed more than one hop")),
                }
                let last = link_last_sent.entry((*src, *dst)).or_insert(0);
                if *sent < *last {
                    f.fail("messages", line, format!("link {src}->{dst} reordered"));
                }
                *last = *sent;
                if *sent > ev.at {
                    f.fail("messages", line, "delivered before it was sent");
                }
            }
            Record::MsgDrop { src, sent, .. } => {
                drops += 1;
                if failed_at.get(src).is_some_and(|&t| *sent >= t) {
                    f.fail("messages", line, format!("message sent by failed module {src}"));
                }
            }
            Record::SetOutput { output, .. } => grid.output = *output,
            Record::Fail { id } => {
                failed_at.entry(*id).or_insert(ev.at);
                if config.set_status(*id, Status::Failed).is_err() {
                    f.fail("header", line, format!("fail of unknown module {id}"));
                }
            }
            Record::Goal { output, motions, path_len } => {
                if *output != grid.output || !path_exists(&config, grid.input, grid.output) {
                    f.fail("goal", line, "GOAL without a chain from input to output");
                } else if shortest_chain(&config, grid.input, grid.output) != Some(*path_len) {
                    f.fail("goal", line, "path_len disagrees with the configuration");
                }
                if *motions != moves {
                    f.fail("goal", line, format!("GOAL counts {motions} motions, trace has {moves}"));
                }
            }
            Record::Metrics(m) => metrics = Some((line, m.clone())),
        }
    }

    if let Some(p) = &pending {
        f.fail("serialization", line_of(trace.len() - 1), format!("maneuver of {} never finished", p.mover));
    }
    match metrics {
        None => f.fail("metrics", line_of(trace.len()), "no METRICS record"),
        Some((line, m)) => {
            let goal = path_exists(&config, grid.input, grid.output);
            let mut bad = Vec::new();
            if m.motions != moves {
                bad.push(format!("motions {} vs {moves} MOVE records", m.motions));
            }
            if m.maneuvers != maneuvers {
                bad.push(format!("maneuvers {} vs {maneuvers}", m.maneuvers));
            }
            if m.epochs != leaders.len() as u64 {
                bad.push(format!("epochs {} vs {} LEADER records", m.epochs, leaders.len()));
            }
            if m.messages_sent != m.messages_delivered + m.messages_dropped {
                bad.push("sent != delivered + dropped".to_string());
            }
            if log_messages && (m.messages_delivered != msgs || m.messages_dropped != drops) {
                bad.push(format!(
                    "message counts {}/{} vs {msgs}/{drops} records",
                    m.messages_delivered, m.messages_dropped
                ));
            }
            if m.goal_reached != goal {
                bad.push(format!("goal_reached={} but the final configuration says {goal}", m.goal_reached));
            }
            if m.final_path_len != shortest_chain(&config, grid.input, grid.output) {
                bad.push("final_path_len disagrees with the final configuration".to_string());
            }
            if let Some(msg) = bad.first() {
                f.fail("metrics", line, msg);
            }
        }
    }

    let checks = CHECKS
        .iter()
        .map(|&name| match f.0.get(name) {
            Some(detail) => Check { name, passed: false, detail: detail.clone() },
            None => Check { name, passed: true, detail: String::new() },
        })
        .collect();
    VerifyReport { checks }
}
