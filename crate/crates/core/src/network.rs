//! One-hop message transport between docked modules.
//!
//! A link exists only while two modules share a face. Deliveries on a link
//! are strictly increasing in tick, which also gives per-link FIFO order.
//! Breaking a link drops everything still in flight on it.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{MoveCommand, WaveTag};
use crate::lattice::{Coord, ModuleId};

pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgKind {
    Wave,
    Echo,
    LeaderAnn,
    MoveCmd,
    CmdDone,
    RoundDone,
    NewGoal,
}

impl MsgKind {
    pub const ALL: [MsgKind; 7] = [
        MsgKind::Wave,
        MsgKind::Echo,
        MsgKind::LeaderAnn,
        MsgKind::MoveCmd,
        MsgKind::CmdDone,
        MsgKind::RoundDone,
        MsgKind::NewGoal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::Wave => "WAVE",
            MsgKind::Echo => "ECHO",
            MsgKind::LeaderAnn => "LEADER_ANN",
            MsgKind::MoveCmd => "MOVE_CMD",
            MsgKind::CmdDone => "CMD_DONE",
            MsgKind::RoundDone => "ROUND_DONE",
            MsgKind::NewGoal => "NEW_GOAL",
        }
    }
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MsgKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown message kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Payload {
    Wave(WaveTag),
    Echo(WaveTag),
    /// Round announcement; re-flooded with a fresh `seq` as the round advances.
    LeaderAnn {
        epoch: u64,
        leader: ModuleId,
        seq: u32,
    },
    MoveCmd(MoveCommand),
    CmdDone {
        epoch: u64,
        seq: u32,
        moved: bool,
    },
    /// Carries the epoch that starts once the round is over.
    RoundDone {
        epoch: u64,
    },
    NewGoal {
        epoch: u64,
        goal: Coord,
    },
}

impl Payload {
    pub fn kind(&self) -> MsgKind {
        match self {
            Payload::Wave(_) => MsgKind::Wave,
            Payload::Echo(_) => MsgKind::Echo,
            Payload::LeaderAnn { .. } => MsgKind::LeaderAnn,
            Payload::MoveCmd(_) => MsgKind::MoveCmd,
            Payload::CmdDone { .. } => MsgKind::CmdDone,
            Payload::RoundDone { .. } => MsgKind::RoundDone,
            Payload::NewGoal { .. } => MsgKind::NewGoal,
        }
    }

    pub fn epoch(&self) -> u64 {
        match *self {
            Payload::Wave(t) | Payload::Echo(t) => t.epoch,
            Payload::LeaderAnn { epoch, .. }
            | Payload::CmdDone { epoch, .. }
            | Payload::RoundDone { epoch }
            | Payload::NewGoal { epoch, .. } => epoch,
            Payload::MoveCmd(c) => c.epoch,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub id: u64,
    pub src: ModuleId,
    pub dst: ModuleId,
    pub payload: Payload,
    pub sent_at: Tick,
}

impl Message {
    pub fn kind(&self) -> MsgKind {
        self.payload.kind()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatencyModel {
    Fixed(Tick),
    Uniform(Tick, Tick),
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Uniform(1, 20)
    }
}

impl LatencyModel {
    pub fn is_valid(&self) -> bool {
        match *self {
            LatencyModel::Fixed(t) => t >= 1,
            LatencyModel::Uniform(a, b) => 1 <= a && a <= b,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Tick {
        match *self {
            LatencyModel::Fixed(t) => t,
            LatencyModel::Uniform(a, b) => rng.gen_range(a..=b),
        }
    }
}

impl fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyModel::Fixed(t) => write!(f, "fixed:{t}"),
            LatencyModel::Uniform(a, b) => write!(f, "uniform:{a}:{b}"),
        }
    }
}

impl FromStr for LatencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<Tick>().map_err(|_| format!("bad latency `{s}`"));
        match parts.as_slice() {
            ["fixed", t] => Ok(LatencyModel::Fixed(num(t)?)),
            ["uniform", a, b] => Ok(LatencyModel::Uniform(num(a)?, num(b)?)),
            _ => Err(format!("bad latency `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkState {
    pub endpoints: (ModuleId, ModuleId),
    pub last_delivery: Tick,
    pub in_flight: VecDeque<(Message, Tick)>,
}

impl LinkState {
    pub fn new(a: ModuleId, b: ModuleId, now: Tick) -> Self {
        LinkState { endpoints: link_key(a, b), last_delivery: now, in_flight: VecDeque::new() }
    }
}

pub fn link_key(a: ModuleId, b: ModuleId) -> (ModuleId, ModuleId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Picks the delivery tick for `msg` and queues it on `link`.
pub fn schedule_delivery<R: Rng + ?Sized>(
    msg: Message,
    model: &LatencyModel,
    rng: &mut R,
    link: &mut LinkState,
) -> Tick {
    let at = (msg.sent_at + model.sample(rng)).max(link.last_delivery + 1);
    link.last_delivery = at;
    link.in_flight.push_back((msg, at));
    at
}

pub fn on_undock(link: &mut LinkState) -> Vec<Message> {
    link.in_flight.drain(..).map(|(m, _)| m).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("modules {0} and {1} are not docked")]
    NotDocked(ModuleId, ModuleId),
    #[error("a module cannot message itself")]
    SelfSend,
}

/// All links of a run plus the seeded latency generator.
#[derive(Clone, Debug)]
pub struct Network {
    links: BTreeMap<(ModuleId, ModuleId), LinkState>,
    model: LatencyModel,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Network {
    pub fn new(model: LatencyModel, seed: u64) -> Self {
        Network { links: BTreeMap::new(), model, rng: ChaCha8Rng::seed_from_u64(seed), next_id: 0 }
    }

    pub fn is_docked(&self, a: ModuleId, b: ModuleId) -> bool {
        self.links.contains_key(&link_key(a, b))
    }

    /// Opens a fresh link; no-op when it already exists.
    pub fn dock(&mut self, a: ModuleId, b: ModuleId, now: Tick) {
        self.links.entry(link_key(a, b)).or_insert_with(|| LinkState::new(a, b, now));
    }

    pub fn undock(&mut self, a: ModuleId, b: ModuleId) -> Vec<Message> {
        match self.links.remove(&link_key(a, b)) {
            Some(mut link) => on_undock(&mut link),
            None => Vec::new(),
        }
    }

    pub fn linked_pairs(&self) -> impl Iterator<Item = (ModuleId, ModuleId)> + '_ {
        self.links.keys().copied()
    }

    pub fn send(
        &mut self,
        src: ModuleId,
        dst: ModuleId,
        payload: Payload,
        now: Tick,
    ) -> Result<(Message, Tick), NetError> {
        if src == dst {
            return Err(NetError::SelfSend);
        }
        let link = self.links.get_mut(&link_key(src, dst)).ok_or(NetError::NotDocked(src, dst))?;
        self.next_id += 1;
        let msg = Message { id: self.next_id, src, dst, payload, sent_at: now };
        let at = schedule_delivery(msg, &self.model, &mut self.rng, link);
        Ok((msg, at))
    }

    /// Removes the message with `id` from its link if it is still in flight.
    pub fn take(&mut self, src: ModuleId, dst: ModuleId, id: u64) -> Option<Message> {
        let link = self.links.get_mut(&link_key(src, dst))?;
        let idx = link.in_flight.iter().position(|(m, _)| m.id == id)?;
        debug_assert_eq!(idx, 0, "per-link deliveries are FIFO");
        link.in_flight.remove(idx).map(|(m, _)| m)
    }

    /// Drops every in-flight message sent by or addressed to `module`.
    pub fn drop_involving(&mut self, module: ModuleId) -> Vec<Message> {
        let mut dropped = Vec::new();
        for link in self.links.values_mut() {
            if link.endpoints.0 != module && link.endpoints.1 != module {
                continue;
            }
            dropped.extend(link.in_flight.drain(..).map(|(m, _)| m));
        }
        dropped.sort_by_key(|m| m.id);
        dropped
    }

    /// Drops everything still in flight anywhere.
    pub fn drain_all(&mut self) -> Vec<Message> {
        let mut dropped: Vec<Message> =
            self.links.values_mut().flat_map(|l| l.in_flight.drain(..).map(|(m, _)| m)).collect();
        dropped.sort_by_key(|m| m.id);
        dropped
    }
}
