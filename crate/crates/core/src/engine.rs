//! Discrete-event loop driving the agents over the simulated hardware.
//!
//! Events are processed in `(at, seq)` order where `seq` is the insertion
//! counter, so a run is a pure function of its scenario and parameters.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use thiserror::Error;

use crate::agents::{candidate_score, AgentState, Ctx, Input, Moore, MoveCommand, Note, Output, Phase, Physics};
use crate::io::scenario::Scenario;
use crate::io::trace::{DropReason, Header, Record, TraceEvent};
use crate::lattice::{
    alive_connected, is_connected, path_exists, shortest_chain, Adjacency, Configuration, Coord, Grid, ModuleId, Status,
};
use crate::motion::{
    check_maneuver, leg_ticks, legal_maneuvers, substep_schedule, Dir, Maneuver, MotionError, MotionParams, Violation,
};
use crate::network::{LatencyModel, Message, Network, Tick};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    pub max_ticks: Tick,
    pub round_timeout: Tick,
    pub latency: LatencyModel,
    pub motion: MotionParams,
    pub seed: u64,
    pub log_messages: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            max_ticks: 10_000_000,
            round_timeout: 10_000,
            latency: LatencyModel::default(),
            motion: MotionParams::default(),
            seed: 0,
            log_messages: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_ticks == 0 {
            return Err("max-ticks must be positive".into());
        }
        if self.round_timeout == 0 {
            return Err("round-timeout must be positive".into());
        }
        if !self.latency.is_valid() {
            return Err(format!("invalid latency model `{}`", self.latency));
        }
        let m = &self.motion;
        if !(m.pitch_mm.is_finite() && m.pitch_mm > 0.0 && m.speed_mm_s.is_finite() && m.speed_mm_s > 0.0) {
            return Err("pitch and speed must be positive".into());
        }
        if leg_ticks(m) == 0 {
            return Err("one cell of travel must take at least one tick".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioEventKind {
    SetOutput(Coord),
    Fail(ModuleId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub at: Tick,
    pub kind: ScenarioEventKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub motions: u64,
    pub maneuvers: u64,
    pub epochs: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_dropped: u64,
    pub simtime_ms: Tick,
    pub goal_reached: bool,
    pub final_path_len: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaltReason {
    Goal,
    Stuck,
    MaxTicks,
    Quiescent,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Vec<TraceEvent>,
    pub metrics: Metrics,
    pub final_config: Configuration,
    pub final_output: Coord,
    pub halt: HaltReason,
}

/// Whether the configuration holds a module chain from `input` to `output`.
pub fn goal_monitor(config: &Configuration, input: Coord, output: Coord) -> bool {
    path_exists(config, input, output)
}

/// The physical interlock: legality plus, once some module has failed,
/// connectivity of the alive modules (they alone carry messages).
pub fn guard_maneuver(
    config: &Configuration,
    grid: &Grid,
    m: &Maneuver,
    motion: &MotionParams,
) -> Result<(), Violation> {
    match check_maneuver(config, grid, m, motion) {
        Ok(()) => {}
        Err(MotionError::Illegal(v)) => return Err(v),
        Err(MotionError::UnknownModule(_)) => return Err(Violation::DeadActuator),
    }
    if config.modules().all(|r| r.status.is_alive()) {
        return Ok(());
    }
    let start = config.get(m.mover).expect("checked").pos;
    let mut next = config.clone();
    next.relocate(m.mover, m.legs.end(start)).expect("checked");
    if alive_connected(&next) {
        Ok(())
    } else {
        Err(Violation::Disconnect)
    }
}

/// Maneuvers of `mover` the interlock accepts.
pub fn admissible_maneuvers(
    config: &Configuration,
    grid: &Grid,
    mover: ModuleId,
    motion: &MotionParams,
) -> Vec<Maneuver> {
    legal_maneuvers(config, grid, mover, motion)
        .unwrap_or_default()
        .into_iter()
        .filter(|m| guard_maneuver(config, grid, m, motion).is_ok())
        .collect()
}

pub fn moore_of(config: &Configuration, center: Coord) -> Moore {
    let mut out: Moore = [[None; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let at = center.offset(c as i32 - 1, 1 - r as i32);
            *cell = config.at(at).map(|rec| (rec.id, rec.status));
        }
    }
    out
}

struct EnginePhysics<'a> {
    config: &'a Configuration,
    grid: &'a Grid,
    motion: &'a MotionParams,
}

impl Physics for EnginePhysics<'_> {
    fn position(&self, id: ModuleId) -> Option<Coord> {
        self.config.get(id).map(|r| r.pos)
    }

    fn maneuvers(&self, mover: ModuleId) -> Vec<Maneuver> {
        admissible_maneuvers(self.config, self.grid, mover, self.motion)
    }
}

/// Number of modules that would stand as candidates in `config`.
pub fn count_candidates(config: &Configuration, grid: &Grid, motion: &MotionParams) -> usize {
    config
        .modules()
        .filter(|r| r.status.is_alive())
        .filter(|r| {
            let state = AgentState::new(r.id, r.pos, grid.input, grid.output);
            candidate_score(&state, &admissible_maneuvers(config, grid, r.id, motion)).is_some()
        })
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Scenario(usize),
    Start(ModuleId),
    Deliver { src: ModuleId, dst: ModuleId, id: u64 },
    LegComplete,
    ExecDone { agent: ModuleId, moved: bool },
    Timer(ModuleId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    at: Tick,
    seq: u64,
    kind: EventKind,
}

struct InFlight {
    agent: ModuleId,
    cmd: MoveCommand,
    maneuver: Maneuver,
    dirs: Vec<Dir>,
    leg: usize,
    leg_start: Tick,
}

#[derive(Default, Clone, Copy)]
struct EpochStat {
    candidates: usize,
    motions: u64,
}

struct Sim<'s> {
    scenario: &'s Scenario,
    params: SimParams,
    grid: Grid,
    config: Configuration,
    agents: BTreeMap<ModuleId, AgentState>,
    net: Network,
    queue: BinaryHeap<Reverse<Event>>,
    qseq: u64,
    trace: Vec<TraceEvent>,
    metrics: Metrics,
    now: Tick,
    in_flight: Option<InFlight>,
    pending_exec: VecDeque<(ModuleId, MoveCommand, Maneuver)>,
    deferred: Vec<usize>,
    remaining_events: usize,
    timers: BTreeMap<ModuleId, Tick>,
    paused: bool,
    halted: Option<HaltReason>,
    max_epoch: u64,
    epochs: BTreeMap<u64, EpochStat>,
    goal_seen: bool,
}

/// Checks everything a run relies on about its scenario.
pub fn validate_scenario(s: &Scenario) -> Result<(), EngineError> {
    let bad = |msg: String| Err(EngineError::InvalidScenario(msg));
    s.params.validate().map_err(EngineError::InvalidScenario)?;
    let grid = &s.grid;
    if grid.width == 0 || grid.height == 0 {
        return bad("grid must be non-empty".into());
    }
    for (name, c) in [("input", grid.input), ("output", grid.output)] {
        if !grid.contains(c) {
            return bad(format!("{name} {c} is outside the grid"));
        }
    }
    if s.modules.is_empty() {
        return bad("no modules".into());
    }
    let config =
        Configuration::new(s.modules.iter().copied()).map_err(|e| EngineError::InvalidScenario(e.to_string()))?;
    config.all_in(grid).map_err(|e| EngineError::InvalidScenario(e.to_string()))?;
    if s.modules.iter().any(|r| r.status != Status::Alive) {
        return bad("initial modules must be alive".into());
    }
    if !is_connected(&config, Adjacency::Four) {
        return bad("initial configuration is not 4-connected".into());
    }
    if !config.is_occupied(grid.input) {
        return bad(format!("input cell {} is empty", grid.input));
    }
    if s.events.windows(2).any(|w| w[0].at > w[1].at) {
        return bad("events are not sorted by tick".into());
    }
    for ev in &s.events {
        match ev.kind {
            ScenarioEventKind::SetOutput(c) if !grid.contains(c) => {
                return bad(format!("set-output {c} is outside the grid"));
            }
            ScenarioEventKind::Fail(id) if config.get(id).is_none() => {
                return bad(format!("fail of unknown module {id}"));
            }
            _ => {}
        }
    }
    Ok(())
}

impl<'s> Sim<'s> {
    fn new(scenario: &'s Scenario, params: SimParams) -> Self {
        let config = Configuration::new(scenario.modules.iter().copied()).expect("validated");
        let grid = scenario.grid;
        let agents = config.modules().map(|r| (r.id, AgentState::new(r.id, r.pos, grid.input, grid.output))).collect();
        Sim {
            scenario,
            params,
            grid,
            net: Network::new(params.latency, params.seed),
            config,
            agents,
            queue: BinaryHeap::new(),
            qseq: 0,
            trace: Vec::new(),
            metrics: Metrics::default(),
            now: 0,
            in_flight: None,
            pending_exec: VecDeque::new(),
            deferred: Vec::new(),
            remaining_events: scenario.events.len(),
            timers: BTreeMap::new(),
            paused: false,
            halted: None,
            max_epoch: 0,
            epochs: BTreeMap::new(),
            goal_seen: false,
        }
    }

    fn push(&mut self, at: Tick, kind: EventKind) {
        self.queue.push(Reverse(Event { at, seq: self.qseq, kind }));
        self.qseq += 1;
    }

    fn record(&mut self, record: Record) {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent { at: self.now, seq, record });
    }

    fn header(&mut self) {
        let p = &self.params;
        let h = Header {
            width: self.grid.width,
            height: self.grid.height,
            input: self.grid.input,
            output: self.grid.output,
            modules: self.config.len(),
            seed: p.seed,
            slide_rule: p.motion.slide_rule,
            latency: p.latency,
            pitch_mm: p.motion.pitch_mm,
            speed_mm_s: p.motion.speed_mm_s,
            round_timeout: p.round_timeout,
            max_ticks: p.max_ticks,
            log_messages: p.log_messages,
        };
        self.record(Record::Header(h));
    }

    fn dock_all(&mut self) {
        let cells: Vec<(ModuleId, Coord)> = self.config.modules().map(|r| (r.id, r.pos)).collect();
        for &(id, pos) in &cells {
            for d in [Dir::E, Dir::N] {
                if let Some(other) = self.config.at(d.step(pos)) {
                    self.net.dock(id, other.id, self.now);
                }
            }
        }
    }

    fn drop_messages(&mut self, msgs: Vec<Message>, reason: DropReason) {
        for m in msgs {
            self.metrics.messages_dropped += 1;
            if self.params.log_messages {
                self.record(Record::MsgDrop {
                    kind: m.kind(),
                    src: m.src,
                    dst: m.dst,
                    sent: m.sent_at,
                    epoch: m.payload.epoch(),
                    reason,
                });
            }
        }
    }

    fn arm_timer(&mut self, id: ModuleId, at: Tick) {
        self.timers.insert(id, at);
        self.push(at, EventKind::Timer(id));
    }

    fn arm_all_timers(&mut self) {
        let ids: Vec<ModuleId> = self.agents.values().filter(|a| a.status.is_alive()).map(|a| a.id).collect();
        for id in ids {
            let at = self.now + self.params.round_timeout;
            self.arm_timer(id, at);
        }
    }

    fn run_agent(&mut self, id: ModuleId, input: Input) {
        let Some(rec) = self.config.get(id).copied() else { return };
        let agent = self.agents.get_mut(&id).expect("every module has an agent");
        agent.pos = rec.pos;
        agent.status = rec.status;
        agent.moore = moore_of(&self.config, rec.pos);
        let physics = EnginePhysics { config: &self.config, grid: &self.grid, motion: &self.params.motion };
        let ctx = Ctx { now: self.now, round_timeout: self.params.round_timeout, physics: &physics };
        let out = match input {
            Input::Timeout => agent.on_timeout(&ctx),
            other => agent.step(other, &ctx),
        };
        let epoch = agent.epoch;
        self.handle_output(id, out);
        if epoch > self.max_epoch {
            self.advance_epoch(epoch);
        }
    }

    fn handle_output(&mut self, id: ModuleId, out: Output) {
        for note in out.notes {
            match note {
                Note::Elect(tag) => self.record(Record::Elect { epoch: tag.epoch, id: tag.id, score: tag.score }),
                Note::Leader(tag) => {
                    let pos = self.config.get(id).expect("leader exists").pos;
                    self.metrics.epochs += 1;
                    self.record(Record::Leader { epoch: tag.epoch, id: tag.id, score: tag.score, pos });
                }
                Note::Command(cmd) => self.record(Record::Cmd {
                    epoch: cmd.epoch,
                    seq: cmd.seq,
                    leader: id,
                    target: cmd.target,
                    driver: cmd.driver,
                    objective: cmd.objective,
                }),
                Note::Execute { cmd, maneuver } => {
                    self.pending_exec.push_back((id, cmd, maneuver));
                    self.start_next_maneuver();
                }
                Note::Round { epoch, commands } => {
                    let motions = self.epochs.get(&epoch).map_or(0, |s| s.motions);
                    self.record(Record::Round { epoch, leader: id, commands, motions });
                }
                Note::Ignored => {}
            }
        }
        for (dst, payload) in out.sends {
            self.metrics.messages_sent += 1;
            match self.net.send(id, dst, payload, self.now) {
                Ok((msg, at)) => self.push(at, EventKind::Deliver { src: id, dst, id: msg.id }),
                Err(_) => {
                    let msg = Message { id: 0, src: id, dst, payload, sent_at: self.now };
                    self.drop_messages(vec![msg], DropReason::Undocked);
                }
            }
        }
    }

    fn advance_epoch(&mut self, epoch: u64) {
        for e in self.max_epoch + 1..=epoch {
            let candidates = count_candidates(&self.config, &self.grid, &self.params.motion);
            let prev = self.epochs.get(&(e - 1)).copied().unwrap_or_default();
            self.epochs.insert(e, EpochStat { candidates, motions: 0 });
            self.max_epoch = e;
            if candidates == 0 && prev.candidates == 0 && prev.motions == 0 && self.halted.is_none() {
                self.record(Record::Stuck { reason: "no-progress".into(), epoch: e });
                self.halted = Some(HaltReason::Stuck);
                return;
            }
        }
    }

    /// Starts the oldest requested maneuver if the motor bus is free.
    fn start_next_maneuver(&mut self) {
        while self.in_flight.is_none() && self.halted.is_none() && !self.paused {
            let Some((agent, cmd, maneuver)) = self.pending_exec.pop_front() else { return };
            if !self.config.get(agent).is_some_and(|r| r.status.is_alive()) {
                continue;
            }
            match guard_maneuver(&self.config, &self.grid, &maneuver, &self.params.motion) {
                Ok(()) => {
                    let at = self.now + leg_ticks(&self.params.motion);
                    self.in_flight = Some(InFlight {
                        agent,
                        cmd,
                        dirs: maneuver.legs.dirs(),
                        maneuver,
                        leg: 0,
                        leg_start: self.now,
                    });
                    self.push(at, EventKind::LegComplete);
                }
                Err(reason) => {
                    self.record(Record::Reject {
                        epoch: cmd.epoch,
                        seq: cmd.seq,
                        id: maneuver.mover,
                        driver: maneuver.driver,
                        legs: maneuver.legs,
                        reason,
                    });
                    self.push(self.now, EventKind::ExecDone { agent, moved: false });
                }
            }
        }
    }

    fn relink(&mut self, id: ModuleId, from: Coord, to: Coord) {
        for d in Dir::ALL {
            if let Some(other) = self.config.at(d.step(from)).map(|r| r.id) {
                if other != id && crate::lattice::manhattan(to, d.step(from)) != 1 {
                    let dropped = self.net.undock(id, other);
                    self.drop_messages(dropped, DropReason::Undock);
                }
            }
        }
        for d in Dir::ALL {
            if let Some(other) = self.config.at(d.step(to)).map(|r| r.id) {
                if other != id {
                    self.net.dock(id, other, self.now);
                }
            }
        }
    }

    fn on_leg_complete(&mut self) {
        let Some(mut fl) = self.in_flight.take() else { return };
        let leg = leg_ticks(&self.params.motion);
        let mover = fl.maneuver.mover;
        let from = self.config.get(mover).expect("mover exists").pos;
        let to = fl.dirs[fl.leg].step(from);
        self.config.relocate(mover, to).expect("guarded destination is free");
        self.relink(mover, from, to);
        self.metrics.motions += 1;
        self.epochs.entry(fl.cmd.epoch).or_default().motions += 1;
        self.record(Record::Move {
            epoch: fl.cmd.epoch,
            seq: fl.cmd.seq,
            id: mover,
            driver: fl.maneuver.driver,
            leg: fl.leg as u32 + 1,
            legs: fl.maneuver.legs,
            from,
            to,
            start: fl.leg_start,
            substeps: substep_schedule(fl.leg_start, leg).to_vec(),
        });
        fl.leg += 1;
        if fl.leg < fl.dirs.len() {
            fl.leg_start = self.now;
            self.in_flight = Some(fl);
            self.push(self.now + leg, EventKind::LegComplete);
            return;
        }

        self.metrics.maneuvers += 1;
        assert!(is_connected(&self.config, Adjacency::Four), "maneuver broke 4-connectivity at tick {}", self.now);
        self.check_goal();
        if self.halted.is_none() && !self.paused {
            self.run_agent(fl.agent, Input::ManeuverDone { moved: true });
        }
        for i in std::mem::take(&mut self.deferred) {
            if self.halted.is_some() {
                break;
            }
            self.apply_scenario_event(i);
        }
        self.start_next_maneuver();
    }

    /// Records GOAL when the chain exists, then pauses or halts.
    fn check_goal(&mut self) -> bool {
        if !goal_monitor(&self.config, self.grid.input, self.grid.output) {
            return false;
        }
        let path_len = shortest_chain(&self.config, self.grid.input, self.grid.output).expect("path exists");
        self.goal_seen = true;
        self.record(Record::Goal { output: self.grid.output, motions: self.metrics.motions, path_len });
        if self.remaining_events == 0 {
            self.halted = Some(HaltReason::Goal);
        } else {
            self.pause();
        }
        true
    }

    fn pause(&mut self) {
        self.paused = true;
        for a in self.agents.values_mut() {
            a.pause();
        }
        self.queue.retain(|Reverse(e)| matches!(e.kind, EventKind::Scenario(_)));
        let dropped = self.net.drain_all();
        self.drop_messages(dropped, DropReason::Paused);
        self.timers.clear();
        self.pending_exec.clear();
    }

    fn on_scenario_event(&mut self, i: usize) {
        if self.in_flight.is_some() {
            self.deferred.push(i);
        } else {
            self.apply_scenario_event(i);
        }
    }

    fn apply_scenario_event(&mut self, i: usize) {
        self.remaining_events -= 1;
        match self.scenario.events[i].kind {
            ScenarioEventKind::SetOutput(output) => {
                self.grid.output = output;
                let epoch = self.max_epoch + 1;
                self.record(Record::SetOutput { output, epoch });
                self.pending_exec.clear();
                if self.check_goal() {
                    return;
                }
                self.paused = false;
                let ids: Vec<ModuleId> = self.agents.values().filter(|a| a.status.is_alive()).map(|a| a.id).collect();
                for id in ids {
                    self.run_agent(id, Input::NewGoal { goal: output, epoch });
                    if self.halted.is_some() {
                        return;
                    }
                }
                self.timers.clear();
                self.arm_all_timers();
            }
            ScenarioEventKind::Fail(id) => {
                self.record(Record::Fail { id });
                if self.config.get(id).is_none_or(|r| !r.status.is_alive()) {
                    return;
                }
                self.config.set_status(id, Status::Failed).expect("validated id");
                if let Some(a) = self.agents.get_mut(&id) {
                    a.status = Status::Failed;
                }
                let dropped = self.net.drop_involving(id);
                self.drop_messages(dropped, DropReason::Failed);
                self.timers.remove(&id);
                self.pending_exec.retain(|(agent, _, _)| *agent != id);
                if !alive_connected(&self.config) {
                    self.record(Record::Stuck { reason: "partition".into(), epoch: self.max_epoch });
                    self.halted = Some(HaltReason::Stuck);
                } else if self.paused && self.remaining_events == 0 {
                    self.halted = Some(HaltReason::Goal);
                }
            }
        }
    }

    fn on_timer(&mut self, id: ModuleId, at: Tick) {
        if self.timers.get(&id) != Some(&at) {
            return;
        }
        self.timers.remove(&id);
        let Some(agent) = self.agents.get(&id) else { return };
        if !agent.status.is_alive() || agent.phase == Phase::Done {
            return;
        }
        let deadline = agent.last_activity + self.params.round_timeout;
        if self.now >= deadline {
            self.run_agent(id, Input::Timeout);
        }
        if let Some(agent) = self.agents.get(&id) {
            if agent.status.is_alive() && agent.phase != Phase::Done {
                let next = (agent.last_activity + self.params.round_timeout).max(self.now + 1);
                self.arm_timer(id, next);
            }
        }
    }

    fn dispatch(&mut self, ev: Event) {
        match ev.kind {
            EventKind::Scenario(i) => self.on_scenario_event(i),
            EventKind::Start(id) => self.run_agent(id, Input::Start),
            EventKind::Deliver { src, dst, id } => {
                let Some(msg) = self.net.take(src, dst, id) else { return };
                self.metrics.messages_delivered += 1;
                if self.params.log_messages {
                    self.record(Record::Msg {
                        kind: msg.kind(),
                        src,
                        dst,
                        sent: msg.sent_at,
                        epoch: msg.payload.epoch(),
                    });
                }
                self.run_agent(dst, Input::Deliver(msg));
            }
            EventKind::LegComplete => self.on_leg_complete(),
            EventKind::ExecDone { agent, moved } => {
                self.run_agent(agent, Input::ManeuverDone { moved });
                self.start_next_maneuver();
            }
            EventKind::Timer(id) => self.on_timer(id, ev.at),
        }
    }

    fn finish(mut self) -> RunOutput {
        let dropped = self.net.drain_all();
        self.drop_messages(dropped, DropReason::Halt);
        let (input, output) = (self.grid.input, self.grid.output);
        self.metrics.simtime_ms = self.now;
        self.metrics.goal_reached = goal_monitor(&self.config, input, output);
        self.metrics.final_path_len = shortest_chain(&self.config, input, output);
        let metrics = self.metrics.clone();
        self.record(Record::Metrics(metrics.clone()));
        RunOutput {
            trace: self.trace,
            metrics,
            final_config: self.config,
            final_output: output,
            halt: self.halted.unwrap_or(HaltReason::Quiescent),
        }
    }

    fn run_loop(&mut self) {
        while self.halted.is_none() {
            let Some(Reverse(ev)) = self.queue.pop() else {
                self.halted = Some(if self.paused { HaltReason::Goal } else { HaltReason::Quiescent });
                break;
            };
            if ev.at > self.params.max_ticks {
                self.now = self.params.max_ticks;
                self.halted = Some(HaltReason::MaxTicks);
                break;
            }
            self.now = ev.at;
            self.dispatch(ev);
        }
    }
}

/// Runs the distributed algorithm on `scenario` until GOAL (with no scenario
/// events left), STUCK, or the tick budget runs out.
pub fn run(scenario: &Scenario, params: &SimParams) -> Result<RunOutput, EngineError> {
    validate_scenario(scenario)?;
    params.validate().map_err(EngineError::InvalidScenario)?;
    let mut sim = Sim::new(scenario, *params);
    sim.header();
    sim.dock_all();
    sim.epochs
        .insert(0, EpochStat { candidates: count_candidates(&sim.config, &sim.grid, &params.motion), motions: 0 });
    for (i, ev) in scenario.events.iter().enumerate() {
        sim.push(ev.at, EventKind::Scenario(i));
    }
    if !sim.check_goal() {
        let ids: Vec<ModuleId> = sim.agents.keys().copied().collect();
        for id in ids {
            sim.push(0, EventKind::Start(id));
        }
        sim.arm_all_timers();
    }
    sim.run_loop();
    Ok(sim.finish())
}

/// Replays a fixed list of maneuvers through the guard and the motor timing,
/// without agents or messages. Rejected maneuvers are traced and skipped.
pub fn run_scripted(scenario: &Scenario, params: &SimParams, maneuvers: &[Maneuver]) -> Result<RunOutput, EngineError> {
    validate_scenario(scenario)?;
    params.validate().map_err(EngineError::InvalidScenario)?;
    let mut sim = Sim::new(scenario, *params);
    sim.header();
    let leg = leg_ticks(&params.motion);
    for (i, m) in maneuvers.iter().enumerate() {
        let seq = i as u32 + 1;
        if let Err(reason) = guard_maneuver(&sim.config, &sim.grid, m, &params.motion) {
            sim.record(Record::Reject { epoch: 0, seq, id: m.mover, driver: m.driver, legs: m.legs, reason });
            continue;
        }
        for (k, d) in m.legs.dirs().into_iter().enumerate() {
            let from = sim.config.get(m.mover).expect("guarded").pos;
            let to = d.step(from);
            let start = sim.now;
            sim.now += leg;
            sim.config.relocate(m.mover, to).expect("guarded");
            sim.metrics.motions += 1;
            sim.record(Record::Move {
                epoch: 0,
                seq,
                id: m.mover,
                driver: m.driver,
                leg: k as u32 + 1,
                legs: m.legs,
                from,
                to,
                start,
                substeps: substep_schedule(start, leg).to_vec(),
            });
        }
        sim.metrics.maneuvers += 1;
        assert!(is_connected(&sim.config, Adjacency::Four));
        if !sim.goal_seen && goal_monitor(&sim.config, sim.grid.input, sim.grid.output) {
            let path_len = shortest_chain(&sim.config, sim.grid.input, sim.grid.output).expect("path exists");
            sim.goal_seen = true;
            sim.record(Record::Goal { output: sim.grid.output, motions: sim.metrics.motions, path_len });
        }
    }
    sim.halted = Some(HaltReason::Quiescent);
    Ok(sim.finish())
}
