//! The line-oriented trace format.
//!
//! ```text
//! DILITRACE v1
//! <at> <seq> <KIND> key=value ...
//! ```
//!
//! Keys appear in a fixed order per kind:
//!
//! | kind    | keys |
//! |---------|------|
//! | HEADER  | version grid input output modules seed slide_rule latency pitch speed round_timeout max_ticks log_messages |
//! | ELECT   | epoch id score |
//! | LEADER  | epoch id score pos |
//! | CMD     | epoch seq leader target driver objective |
//! | MOVE    | epoch seq id driver leg legs dirs from to start substeps |
//! | REJECT  | epoch seq id driver dirs reason |
//! | ROUND   | epoch leader commands motions |
//! | MSG     | kind src dst sent epoch |
//! | MSGDROP | kind src dst sent epoch reason |
//! | EVENT   | kind=set-output output epoch, or kind=fail id |
//! | GOAL    | output motions path_len |
//! | STUCK   | reason epoch |
//! | METRICS | motions maneuvers epochs messages_sent messages_delivered messages_dropped simtime_ms goal_reached final_path_len |
//!
//! Absent optional values print as `-`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::engine::Metrics;
use crate::lattice::{Coord, ModuleId};
use crate::motion::{Dir, Legs, SlideRule, Violation};
use crate::network::{LatencyModel, MsgKind, Tick};

pub const TRACE_MAGIC: &str = "DILITRACE v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub input: Coord,
    pub output: Coord,
    pub modules: usize,
    pub seed: u64,
    pub slide_rule: SlideRule,
    pub latency: LatencyModel,
    pub pitch_mm: f64,
    pub speed_mm_s: f64,
    pub round_timeout: Tick,
    pub max_ticks: Tick,
    pub log_messages: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    /// The link broke because a module moved away.
    Undock,
    /// Sender or receiver failed.
    Failed,
    /// Agents were paused on reaching the goal.
    Paused,
    /// Still in flight when the run ended.
    Halt,
    /// The sender addressed a module it is not docked with.
    Undocked,
}

impl DropReason {
    fn as_str(self) -> &'static str {
        match self {
            DropReason::Undock => "undock",
            DropReason::Failed => "failed",
            DropReason::Paused => "paused",
            DropReason::Halt => "halt",
            DropReason::Undocked => "not_docked",
        }
    }
}

impl FromStr for DropReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [DropReason::Undock, DropReason::Failed, DropReason::Paused, DropReason::Halt, DropReason::Undocked]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown drop reason `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Header(Header),
    Elect {
        epoch: u64,
        id: ModuleId,
        score: i64,
    },
    Leader {
        epoch: u64,
        id: ModuleId,
        score: i64,
        pos: Coord,
    },
    Cmd {
        epoch: u64,
        seq: u32,
        leader: ModuleId,
        target: ModuleId,
        driver: Option<ModuleId>,
        objective: Coord,
    },
    Move {
        epoch: u64,
        seq: u32,
        id: ModuleId,
        driver: Option<ModuleId>,
        leg: u32,
        legs: Legs,
        from: Coord,
        to: Coord,
        start: Tick,
        substeps: Vec<Tick>,
    },
    Reject {
        epoch: u64,
        seq: u32,
        id: ModuleId,
        driver: Option<ModuleId>,
        legs: Legs,
        reason: Violation,
    },
    Round {
        epoch: u64,
        leader: ModuleId,
        commands: u32,
        motions: u64,
    },
    Msg {
        kind: MsgKind,
        src: ModuleId,
        dst: ModuleId,
        sent: Tick,
        epoch: u64,
    },
    MsgDrop {
        kind: MsgKind,
        src: ModuleId,
        dst: ModuleId,
        sent: Tick,
        epoch: u64,
        reason: DropReason,
    },
    SetOutput {
        output: Coord,
        epoch: u64,
    },
    Fail {
        id: ModuleId,
    },
    Goal {
        output: Coord,
        motions: u64,
        path_len: usize,
    },
    Stuck {
        reason: String,
        epoch: u64,
    },
    Metrics(Metrics),
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Header(_) => "HEADER",
            Record::Elect { .. } => "ELECT",
            Record::Leader { .. } => "LEADER",
            Record::Cmd { .. } => "CMD",
            Record::Move { .. } => "MOVE",
            Record::Reject { .. } => "REJECT",
            Record::Round { .. } => "ROUND",
            Record::Msg { .. } => "MSG",
            Record::MsgDrop { .. } => "MSGDROP",
            Record::SetOutput { .. } | Record::Fail { .. } => "EVENT",
            Record::Goal { .. } => "GOAL",
            Record::Stuck { .. } => "STUCK",
            Record::Metrics(_) => "METRICS",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub at: Tick,
    pub seq: u64,
    pub record: Record,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("missing `{TRACE_MAGIC}` header")]
    BadHeader,
    #[error("unsupported trace version `{0}`")]
    UnsupportedVersion(String),
    #[error("line {line}: unknown record kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

struct Opt<T>(Option<T>);

impl<T: fmt::Display> fmt::Display for Opt<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("-"),
        }
    }
}

fn rule_str(r: SlideRule) -> &'static str {
    match r {
        SlideRule::SingleFlank => "single",
        SlideRule::DoubleFlank => "double",
    }
}

fn join_ticks(ticks: &[Tick]) -> String {
    ticks.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";")
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())?;
        match self {
            Record::Header(h) => write!(
                f,
                " version=1 grid={}x{} input={} output={} modules={} seed={} slide_rule={} latency={} pitch={} speed={} round_timeout={} max_ticks={} log_messages={}",
                h.width,
                h.height,
                h.input,
                h.output,
                h.modules,
                h.seed,
                rule_str(h.slide_rule),
                h.latency,
                h.pitch_mm,
                h.speed_mm_s,
                h.round_timeout,
                h.max_ticks,
                h.log_messages
            ),
            Record::Elect { epoch, id, score } => write!(f, " epoch={epoch} id={id} score={score}"),
            Record::Leader { epoch, id, score, pos } => write!(f, " epoch={epoch} id={id} score={score} pos={pos}"),
            Record::Cmd { epoch, seq, leader, target, driver, objective } => write!(
                f,
                " epoch={epoch} seq={seq} leader={leader} target={target} driver={} objective={objective}",
                Opt(*driver)
            ),
            Record::Move { epoch, seq, id, driver, leg, legs, from, to, start, substeps } => write!(
                f,
                " epoch={epoch} seq={seq} id={id} driver={} leg={leg} legs={} dirs={legs} from={from} to={to} start={start} substeps={}",
                Opt(*driver),
                legs.count(),
                join_ticks(substeps)
            ),
            Record::Reject { epoch, seq, id, driver, legs, reason } => write!(
                f,
                " epoch={epoch} seq={seq} id={id} driver={} dirs={legs} reason={reason}",
                Opt(*driver)
            ),
            Record::Round { epoch, leader, commands, motions } => {
                write!(f, " epoch={epoch} leader={leader} commands={commands} motions={motions}")
            }
            Record::Msg { kind, src, dst, sent, epoch } => {
                write!(f, " kind={kind} src={src} dst={dst} sent={sent} epoch={epoch}")
            }
            Record::MsgDrop { kind, src, dst, sent, epoch, reason } => write!(
                f,
                " kind={kind} src={src} dst={dst} sent={sent} epoch={epoch} reason={}",
                reason.as_str()
            ),
            Record::SetOutput { output, epoch } => write!(f, " kind=set-output output={output} epoch={epoch}"),
            Record::Fail { id } => write!(f, " kind=fail id={id}"),
            Record::Goal { output, motions, path_len } => {
                write!(f, " output={output} motions={motions} path_len={path_len}")
            }
            Record::Stuck { reason, epoch } => write!(f, " reason={reason} epoch={epoch}"),
            Record::Metrics(m) => write!(
                f,
                " motions={} maneuvers={} epochs={} messages_sent={} messages_delivered={} messages_dropped={} simtime_ms={} goal_reached={} final_path_len={}",
                m.motions,
                m.maneuvers,
                m.epochs,
                m.messages_sent,
                m.messages_delivered,
                m.messages_dropped,
                m.simtime_ms,
                m.goal_reached,
                Opt(m.final_path_len)
            ),
        }
    }
}

pub fn write_trace(events: &[TraceEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 64);
    out.push_str(TRACE_MAGIC);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{} {} {}", e.at, e.seq, e.record);
    }
    out
}

/// Key=value cursor over one line, enforcing key order.
struct Fields<'a> {
    line: usize,
    parts: std::slice::Iter<'a, &'a str>,
}

impl<'a> Fields<'a> {
    fn err(&self, reason: impl Into<String>) -> TraceError {
        TraceError::Malformed { line: self.line, reason: reason.into() }
    }

    fn raw(&mut self, key: &str) -> Result<&'a str, TraceError> {
        let part = self.parts.next().ok_or_else(|| self.err(format!("missing `{key}`")))?;
        match part.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key}=`, found `{part}`"))),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<T, TraceError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for `{key}`: `{v}`")))
    }

    fn with<T>(&mut self, key: &str, f: impl FnOnce(&str) -> Option<T>) -> Result<T, TraceError> {
        let v = self.raw(key)?;
        f(v).ok_or_else(|| self.err(format!("bad value for `{key}`: `{v}`")))
    }

    fn id(&mut self, key: &str) -> Result<ModuleId, TraceError> {
        self.get::<u32>(key).map(ModuleId)
    }

    fn opt_id(&mut self, key: &str) -> Result<Option<ModuleId>, TraceError> {
        self.with(key, |v| if v == "-" { Some(None) } else { v.parse().ok().map(|n| Some(ModuleId(n))) })
    }

    fn coord(&mut self, key: &str) -> Result<Coord, TraceError> {
        self.with(key, parse_coord)
    }

    fn legs(&mut self, key: &str) -> Result<Legs, TraceError> {
        self.with(key, |v| {
            let dirs: Option<Vec<Dir>> = v.split(',').map(|d| d.parse().ok()).collect();
            Legs::from_dirs(&dirs?)
        })
    }

    fn finish(mut self) -> Result<(), TraceError> {
        match self.parts.next() {
            Some(extra) => Err(self.err(format!("unexpected `{extra}`"))),
            None => Ok(()),
        }
    }
}

pub(crate) fn parse_coord(v: &str) -> Option<Coord> {
    let (x, y) = v.split_once(',')?;
    Some(Coord::new(x.parse().ok()?, y.parse().ok()?))
}

fn parse_record(line: usize, kind: &str, rest: &[&str]) -> Result<Record, TraceError> {
    let mut f = Fields { line, parts: rest.iter() };
    let rec = match kind {
        "HEADER" => {
            let version: u32 = f.get("version")?;
            if version != 1 {
                return Err(f.err(format!("unsupported header version {version}")));
            }
            let (width, height) = f.with("grid", |v| {
                let (w, h) = v.split_once('x')?;
                Some((w.parse().ok()?, h.parse().ok()?))
            })?;
            Record::Header(Header {
                width,
                height,
                input: f.coord("input")?,
                output: f.coord("output")?,
                modules: f.get("modules")?,
                seed: f.get("seed")?,
                slide_rule: f.with("slide_rule", |v| match v {
                    "single" => Some(SlideRule::SingleFlank),
                    "double" => Some(SlideRule::DoubleFlank),
                    _ => None,
                })?,
                latency: f.get("latency")?,
                pitch_mm: f.get("pitch")?,
                speed_mm_s: f.get("speed")?,
                round_timeout: f.get("round_timeout")?,
                max_ticks: f.get("max_ticks")?,
                log_messages: f.get("log_messages")?,
            })
        }
        "ELECT" => Record::Elect { epoch: f.get("epoch")?, id: f.id("id")?, score: f.get("score")? },
        "LEADER" => {
            Record::Leader { epoch: f.get("epoch")?, id: f.id("id")?, score: f.get("score")?, pos: f.coord("pos")? }
        }
        "CMD" => Record::Cmd {
            epoch: f.get("epoch")?,
            seq: f.get("seq")?,
            leader: f.id("leader")?,
            target: f.id("target")?,
            driver: f.opt_id("driver")?,
            objective: f.coord("objective")?,
        },
        "MOVE" => {
            let epoch = f.get("epoch")?;
            let seq = f.get("seq")?;
            let id = f.id("id")?;
            let driver = f.opt_id("driver")?;
            let leg = f.get("leg")?;
            let count: u32 = f.get("legs")?;
            let legs = f.legs("dirs")?;
            if legs.count() != count {
                return Err(f.err("`legs` disagrees with `dirs`"));
            }
            Record::Move {
                epoch,
                seq,
                id,
                driver,
                leg,
                legs,
                from: f.coord("from")?,
                to: f.coord("to")?,
                start: f.get("start")?,
                substeps: f.with("substeps", |v| v.split(';').map(|t| t.parse().ok()).collect())?,
            }
        }
        "REJECT" => Record::Reject {
            epoch: f.get("epoch")?,
            seq: f.get("seq")?,
            id: f.id("id")?,
            driver: f.opt_id("driver")?,
            legs: f.legs("dirs")?,
            reason: f.get("reason")?,
        },
        "ROUND" => Record::Round {
            epoch: f.get("epoch")?,
            leader: f.id("leader")?,
            commands: f.get("commands")?,
            motions: f.get("motions")?,
        },
        "MSG" => Record::Msg {
            kind: f.get("kind")?,
            src: f.id("src")?,
            dst: f.id("dst")?,
            sent: f.get("sent")?,
            epoch: f.get("epoch")?,
        },
        "MSGDROP" => Record::MsgDrop {
            kind: f.get("kind")?,
            src: f.id("src")?,
            dst: f.id("dst")?,
            sent: f.get("sent")?,
            epoch: f.get("epoch")?,
            reason: f.get("reason")?,
        },
        "EVENT" => match f.raw("kind")? {
            "set-output" => Record::SetOutput { output: f.coord("output")?, epoch: f.get("epoch")? },
            "fail" => Record::Fail { id: f.id("id")? },
            other => return Err(f.err(format!("unknown event kind `{other}`"))),
        },
        "GOAL" => Record::Goal { output: f.coord("output")?, motions: f.get("motions")?, path_len: f.get("path_len")? },
        "STUCK" => Record::Stuck { reason: f.get("reason")?, epoch: f.get("epoch")? },
        "METRICS" => {
            Record::Metrics(Metrics {
                motions: f.get("motions")?,
                maneuvers: f.get("maneuvers")?,
                epochs: f.get("epochs")?,
                messages_sent: f.get("messages_sent")?,
                messages_delivered: f.get("messages_delivered")?,
                messages_dropped: f.get("messages_dropped")?,
                simtime_ms: f.get("simtime_ms")?,
                goal_reached: f.get("goal_reached")?,
                final_path_len: f.with("final_path_len", |v| {
                    if v == "-" {
                        Some(None)
                    } else {
                        v.parse().ok().map(Some)
                    }
                })?,
            })
        }
        other => return Err(TraceError::UnknownKind { line, kind: other.to_string() }),
    };
    f.finish()?;
    Ok(rec)
}

pub fn read_trace(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(TRACE_MAGIC) => {}
        Some(h) if h.starts_with("DILITRACE ") => {
            return Err(TraceError::UnsupportedVersion(h["DILITRACE ".len()..].to_string()))
        }
        _ => return Err(TraceError::BadHeader),
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let malformed = |reason: &str| TraceError::Malformed { line: lineno, reason: reason.to_string() };
        if parts.len() < 3 {
            return Err(malformed("expected `<at> <seq> <KIND> ...`"));
        }
        let at = parts[0].parse().map_err(|_| malformed("bad tick"))?;
        let seq = parts[1].parse().map_err(|_| malformed("bad sequence number"))?;
        let record = parse_record(lineno, parts[2], &parts[3..])?;
        events.push(TraceEvent { at, seq, record });
    }
    Ok(events)
}
