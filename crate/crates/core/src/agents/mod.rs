//! Per-module state machine.
//!
//! Every epoch runs the same loop: candidates flood tagged waves and the
//! greatest tag's echo completes (wave extinction with echo), the winner
//! builds the 3x3 window around itself, commands each window module in turn,
//! and closes the round by flooding the next epoch.
//!
//! Transitions are pure with respect to the rest of the world: the engine
//! refreshes [`AgentState::pos`] and [`AgentState::moore`] from the physical
//! configuration, hands in one [`Input`] and gets back the messages to send and
//! the [`Note`]s worth tracing.

mod planner;

use std::cmp::Ordering;
use std::collections::BTreeSet;

pub use planner::{assemble_window, best_maneuver, candidate_score, is_progress, plan_round};

use crate::lattice::{Coord, ModuleId, Status};
use crate::motion::Maneuver;
use crate::network::{Message, MsgKind, Payload, Tick};

/// Election tag. Higher epoch wins, then higher score, then smaller id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WaveTag {
    pub epoch: u64,
    pub score: i64,
    pub id: ModuleId,
}

impl Ord for WaveTag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.epoch.cmp(&other.epoch).then(self.score.cmp(&other.score)).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for WaveTag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Electing,
    Leader,
    /// Following a round announced by the epoch's leader.
    Executing,
    Done,
}

/// Sensed 3x3 surroundings, `[row][col]`, row 0 to the north, col 0 to the west.
pub type Moore = [[Option<(ModuleId, Status)>; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowMap {
    pub center: Coord,
    pub cells: Moore,
}

impl WindowMap {
    pub fn coord_of(&self, row: usize, col: usize) -> Coord {
        self.center.offset(col as i32 - 1, 1 - row as i32)
    }

    pub fn occupied(&self) -> impl Iterator<Item = (Coord, ModuleId, Status)> + '_ {
        (0..3).flat_map(move |r| {
            (0..3).filter_map(move |c| self.cells[r][c].map(|(id, st)| (self.coord_of(r, c), id, st)))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveCommand {
    pub epoch: u64,
    pub seq: u32,
    /// Module to move.
    pub target: ModuleId,
    pub objective: Coord,
    /// Live flank actuating a failed target; the command is addressed to it.
    pub driver: Option<ModuleId>,
}

impl MoveCommand {
    pub fn addressee(&self) -> ModuleId {
        self.driver.unwrap_or(self.target)
    }
}

/// What the agent can learn from its own hardware: positions of nearby
/// modules and which maneuvers the interlock would accept.
pub trait Physics {
    fn position(&self, id: ModuleId) -> Option<Coord>;
    fn maneuvers(&self, mover: ModuleId) -> Vec<Maneuver>;
}

pub struct Ctx<'a> {
    pub now: Tick,
    pub round_timeout: Tick,
    pub physics: &'a dyn Physics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Input {
    Start,
    Deliver(Message),
    Timeout,
    NewGoal {
        goal: Coord,
        epoch: u64,
    },
    /// The engine finished (or refused) the maneuver this agent requested.
    ManeuverDone {
        moved: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Note {
    /// Initiated a wave with this tag.
    Elect(WaveTag),
    Leader(WaveTag),
    Command(MoveCommand),
    Execute {
        cmd: MoveCommand,
        maneuver: Maneuver,
    },
    Round {
        epoch: u64,
        commands: u32,
    },
    /// Stale or out-of-place message, dropped by the protocol.
    Ignored,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub sends: Vec<(ModuleId, Payload)>,
    pub notes: Vec<Note>,
}

impl Output {
    pub fn leader(&self) -> Option<WaveTag> {
        self.notes.iter().find_map(|n| match n {
            Note::Leader(t) => Some(*t),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Round {
    plan: Vec<MoveCommand>,
    next: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentState {
    pub id: ModuleId,
    pub pos: Coord,
    pub status: Status,
    pub phase: Phase,
    pub epoch: u64,
    pub adopted: Option<WaveTag>,
    pub parent: Option<ModuleId>,
    pub pending_acks: BTreeSet<ModuleId>,
    pub goal: Coord,
    pub input: Coord,
    pub moore: Moore,
    pub last_activity: Tick,
    echoed: bool,
    seen: BTreeSet<(MsgKind, u64, u32)>,
    round: Option<Round>,
    executing: Option<MoveCommand>,
}

impl AgentState {
    pub fn new(id: ModuleId, pos: Coord, input: Coord, goal: Coord) -> Self {
        AgentState {
            id,
            pos,
            status: Status::Alive,
            phase: Phase::Idle,
            epoch: 0,
            adopted: None,
            parent: None,
            pending_acks: BTreeSet::new(),
            goal,
            input,
            moore: [[None; 3]; 3],
            last_activity: 0,
            echoed: false,
            seen: BTreeSet::new(),
            round: None,
            executing: None,
        }
    }

    /// Alive 4-adjacent modules, i.e. the docked links messages may use.
    pub fn docked(&self) -> Vec<ModuleId> {
        let mut out: Vec<ModuleId> = [(0, 1), (1, 0), (1, 2), (2, 1)]
            .iter()
            .filter_map(|&(r, c)| match self.moore[r][c] {
                Some((id, Status::Alive)) => Some(id),
                _ => None,
            })
            .collect();
        out.sort();
        out
    }

    pub fn is_busy(&self) -> bool {
        self.executing.is_some()
    }

    /// Freezes the agent while the conveyor holds its goal.
    pub fn pause(&mut self) {
        self.phase = Phase::Done;
        self.adopted = None;
        self.parent = None;
        self.pending_acks.clear();
        self.round = None;
        self.executing = None;
    }

    pub fn step(&mut self, input: Input, ctx: &Ctx<'_>) -> Output {
        let mut out = Output::default();
        if self.status != Status::Alive {
            return out;
        }
        match input {
            Input::Start => {
                self.last_activity = ctx.now;
                // A wave may have arrived before the start signal.
                if matches!(self.phase, Phase::Idle | Phase::Electing) {
                    self.stand(ctx, &mut out);
                }
            }
            Input::Timeout => return self.on_timeout(ctx),
            Input::NewGoal { goal, epoch } => {
                self.goal = goal;
                self.last_activity = ctx.now;
                self.enter_epoch(epoch, ctx, &mut out);
            }
            Input::ManeuverDone { moved } => {
                self.last_activity = ctx.now;
                self.finish_execution(moved, ctx, &mut out);
            }
            Input::Deliver(msg) => {
                if msg.dst != self.id {
                    out.notes.push(Note::Ignored);
                    return out;
                }
                self.last_activity = ctx.now;
                self.deliver(msg, ctx, &mut out);
            }
        }
        out
    }

    /// Starts a fresh election at the next epoch when nothing has happened for
    /// `ctx.round_timeout` ticks.
    pub fn on_timeout(&mut self, ctx: &Ctx<'_>) -> Output {
        let mut out = Output::default();
        if self.status != Status::Alive || self.phase == Phase::Done {
            return out;
        }
        if ctx.now.saturating_sub(self.last_activity) < ctx.round_timeout {
            return out;
        }
        self.last_activity = ctx.now;
        self.enter_epoch(self.epoch + 1, ctx, &mut out);
        out
    }

    fn flood(&mut self, payload: Payload, except: Option<ModuleId>, out: &mut Output) {
        for n in self.docked() {
            if Some(n) != except {
                out.sends.push((n, payload));
            }
        }
    }

    fn first_sight(&mut self, kind: MsgKind, epoch: u64, seq: u32) -> bool {
        self.seen.insert((kind, epoch, seq))
    }

    fn enter_epoch(&mut self, epoch: u64, ctx: &Ctx<'_>, out: &mut Output) {
        self.epoch = epoch;
        self.phase = Phase::Idle;
        self.adopted = None;
        self.parent = None;
        self.pending_acks.clear();
        self.echoed = false;
        self.round = None;
        self.seen.retain(|&(_, e, _)| e >= epoch);
        self.stand(ctx, out);
    }

    /// Initiates a wave if this module is a candidate whose tag beats the
    /// one it currently follows.
    fn stand(&mut self, ctx: &Ctx<'_>, out: &mut Output) {
        let legal = ctx.physics.maneuvers(self.id);
        let Some(tag) = candidate_score(self, &legal) else { return };
        if self.adopted.is_some_and(|a| a >= tag) {
            return;
        }
        out.notes.push(Note::Elect(tag));
        self.adopted = Some(tag);
        self.parent = None;
        self.echoed = false;
        self.phase = Phase::Electing;
        self.pending_acks = self.docked().into_iter().collect();
        self.flood(Payload::Wave(tag), None, out);
        self.check_wave_complete(ctx, out);
    }

    fn deliver(&mut self, msg: Message, ctx: &Ctx<'_>, out: &mut Output) {
        let epoch = msg.payload.epoch();
        if epoch < self.epoch || self.phase == Phase::Done {
            out.notes.push(Note::Ignored);
            return;
        }
        if epoch > self.epoch {
            self.enter_epoch(epoch, ctx, out);
        }
        let from = msg.src;
        match msg.payload {
            Payload::Wave(tag) => self.on_wave(tag, from, ctx, out),
            Payload::Echo(tag) => {
                if self.adopted == Some(tag) && self.phase == Phase::Electing {
                    self.pending_acks.remove(&from);
                    self.check_wave_complete(ctx, out);
                } else {
                    out.notes.push(Note::Ignored);
                }
            }
            Payload::LeaderAnn { epoch, leader, seq } => {
                if !self.first_sight(MsgKind::LeaderAnn, epoch, seq) {
                    return;
                }
                if self.phase != Phase::Leader {
                    self.phase = Phase::Executing;
                }
                self.flood(Payload::LeaderAnn { epoch, leader, seq }, Some(from), out);
            }
            Payload::MoveCmd(cmd) => {
                if !self.first_sight(MsgKind::MoveCmd, cmd.epoch, cmd.seq) {
                    return;
                }
                if cmd.addressee() == self.id {
                    self.execute(cmd, ctx, out);
                } else {
                    self.flood(Payload::MoveCmd(cmd), Some(from), out);
                }
            }
            Payload::CmdDone { epoch, seq, moved } => {
                if !self.first_sight(MsgKind::CmdDone, epoch, seq) {
                    return;
                }
                if self.phase == Phase::Leader {
                    if self.awaiting() == Some(seq) {
                        self.issue_next(ctx, out);
                    }
                } else {
                    self.flood(Payload::CmdDone { epoch, seq, moved }, Some(from), out);
                }
            }
            Payload::RoundDone { epoch } => {
                if self.first_sight(MsgKind::RoundDone, epoch, 0) {
                    self.flood(Payload::RoundDone { epoch }, Some(from), out);
                }
            }
            Payload::NewGoal { goal, epoch } => {
                if self.first_sight(MsgKind::NewGoal, epoch, 0) {
                    self.goal = goal;
                    self.flood(Payload::NewGoal { goal, epoch }, Some(from), out);
                }
            }
        }
    }

    fn on_wave(&mut self, tag: WaveTag, from: ModuleId, ctx: &Ctx<'_>, out: &mut Output) {
        if matches!(self.phase, Phase::Leader | Phase::Executing) {
            out.notes.push(Note::Ignored);
            return;
        }
        match self.adopted.map(|mine| tag.cmp(&mine)) {
            None | Some(Ordering::Greater) => {
                self.adopted = Some(tag);
                self.parent = Some(from);
                self.phase = Phase::Electing;
                self.echoed = false;
                self.pending_acks = self.docked().into_iter().filter(|n| *n != from).collect();
                self.flood(Payload::Wave(tag), Some(from), out);
                self.check_wave_complete(ctx, out);
            }
            Some(Ordering::Equal) => {
                self.pending_acks.remove(&from);
                self.check_wave_complete(ctx, out);
            }
            Some(Ordering::Less) => out.notes.push(Note::Ignored),
        }
    }

    fn check_wave_complete(&mut self, ctx: &Ctx<'_>, out: &mut Output) {
        if self.phase != Phase::Electing || !self.pending_acks.is_empty() || self.echoed {
            return;
        }
        let Some(tag) = self.adopted else { return };
        if tag.id == self.id {
            self.declare_leader(tag, ctx, out);
        } else if let Some(parent) = self.parent {
            self.echoed = true;
            out.sends.push((parent, Payload::Echo(tag)));
        }
    }

    fn declare_leader(&mut self, tag: WaveTag, ctx: &Ctx<'_>, out: &mut Output) {
        self.phase = Phase::Leader;
        out.notes.push(Note::Leader(tag));
        self.first_sight(MsgKind::LeaderAnn, self.epoch, 0);
        self.flood(Payload::LeaderAnn { epoch: self.epoch, leader: self.id, seq: 0 }, None, out);
        let window = assemble_window(self);
        let plan = plan_round(&window, self.goal, self.input, self.epoch);
        self.round = Some(Round { plan, next: 0 });
        self.issue_next(ctx, out);
    }

    fn awaiting(&self) -> Option<u32> {
        let round = self.round.as_ref()?;
        round.next.checked_sub(1).map(|i| round.plan[i].seq)
    }

    /// Sends the next command of the round, executing self-addressed ones in
    /// place, and closes the round once the plan is exhausted.
    fn issue_next(&mut self, ctx: &Ctx<'_>, out: &mut Output) {
        loop {
            let Some(round) = self.round.as_mut() else { return };
            let Some(&cmd) = round.plan.get(round.next) else {
                let commands = round.plan.len() as u32;
                let epoch = self.epoch;
                self.round = None;
                out.notes.push(Note::Round { epoch, commands });
                self.first_sight(MsgKind::RoundDone, epoch + 1, 0);
                self.flood(Payload::RoundDone { epoch: epoch + 1 }, None, out);
                self.enter_epoch(epoch + 1, ctx, out);
                return;
            };
            round.next += 1;
            out.notes.push(Note::Command(cmd));
            if cmd.seq > 1 {
                self.first_sight(MsgKind::LeaderAnn, cmd.epoch, cmd.seq);
                self.flood(Payload::LeaderAnn { epoch: cmd.epoch, leader: self.id, seq: cmd.seq }, None, out);
            }
            if cmd.addressee() == self.id {
                if self.execute(cmd, ctx, out) {
                    return;
                }
            } else {
                self.first_sight(MsgKind::MoveCmd, cmd.epoch, cmd.seq);
                self.flood(Payload::MoveCmd(cmd), None, out);
                return;
            }
        }
    }

    /// Picks the commanded maneuver. Returns whether a move was requested;
    /// otherwise the command is already answered.
    fn execute(&mut self, cmd: MoveCommand, ctx: &Ctx<'_>, out: &mut Output) -> bool {
        let choice = ctx.physics.position(cmd.target).and_then(|start| {
            if start == self.input || start == cmd.objective {
                return None;
            }
            let wanted = if cmd.target == self.id { None } else { Some(self.id) };
            let options: Vec<Maneuver> =
                ctx.physics.maneuvers(cmd.target).into_iter().filter(|m| m.driver == wanted).collect();
            best_maneuver(start, &options, cmd.objective)
        });
        match choice {
            Some(maneuver) => {
                self.executing = Some(cmd);
                out.notes.push(Note::Execute { cmd, maneuver });
                true
            }
            None => {
                if self.phase != Phase::Leader {
                    self.first_sight(MsgKind::CmdDone, cmd.epoch, cmd.seq);
                    self.flood(Payload::CmdDone { epoch: cmd.epoch, seq: cmd.seq, moved: false }, None, out);
                }
                false
            }
        }
    }

    fn finish_execution(&mut self, moved: bool, ctx: &Ctx<'_>, out: &mut Output) {
        let Some(cmd) = self.executing.take() else {
            out.notes.push(Note::Ignored);
            return;
        };
        if self.phase == Phase::Leader && cmd.epoch == self.epoch && self.awaiting() == Some(cmd.seq) {
            self.issue_next(ctx, out);
        } else {
            self.first_sight(MsgKind::CmdDone, cmd.epoch, cmd.seq);
            self.flood(Payload::CmdDone { epoch: cmd.epoch, seq: cmd.seq, moved }, None, out);
        }
    }
}

/// Pure form of [`AgentState::step`] restricted to its election outcome.
pub fn election_step(state: &AgentState, input: Input, ctx: &Ctx<'_>) -> (AgentState, Output, Option<WaveTag>) {
    let mut next = state.clone();
    let out = next.step(input, ctx);
    let leader = out.leader();
    (next, out, leader)
}

#[cfg(test)]
mod tests;
