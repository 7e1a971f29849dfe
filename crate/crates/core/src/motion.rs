//! The linear-motor motion model.
//!
//! A module travels one cell at a time along a stator: an occupied cell beside
//! its path (the flank). A *slide* is one such leg; a *corner* chains two
//! perpendicular legs atomically so a module can wrap around a convex tip.
//! Failed modules cannot actuate, but a live flanking neighbor can drive them.
//!
//! A maneuver is legal when, in order:
//!
//! - (a) every leg lands on an in-bounds, unoccupied cell;
//! - (b) every leg has a flank under the configured [`SlideRule`];
//! - (c) the mid-corner state stays 8-connected;
//! - (d) the final state is 4-connected;
//! - (e) the actuator is valid: self-driven when alive, driven by a live flank
//!   adjacent to the start cell when failed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lattice::{cells_connected, Adjacency, Configuration, Coord, Grid, ModuleId};

/// Unit lattice direction. Declaration order is the planner's tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    E,
    N,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::E, Dir::N, Dir::S, Dir::W];

    pub const fn delta(self) -> (i32, i32) {
        match self {
            Dir::E => (1, 0),
            Dir::N => (0, 1),
            Dir::S => (0, -1),
            Dir::W => (-1, 0),
        }
    }

    pub fn step(self, c: Coord) -> Coord {
        let (dx, dy) = self.delta();
        c.offset(dx, dy)
    }

    pub const fn is_horizontal(self) -> bool {
        matches!(self, Dir::E | Dir::W)
    }

    pub fn perpendicular(self) -> [Dir; 2] {
        if self.is_horizontal() {
            [Dir::N, Dir::S]
        } else {
            [Dir::E, Dir::W]
        }
    }

    pub fn is_perpendicular(self, other: Dir) -> bool {
        self.is_horizontal() != other.is_horizontal()
    }

    pub fn between(from: Coord, to: Coord) -> Option<Dir> {
        Dir::ALL.into_iter().find(|d| d.step(from) == to)
    }

    pub fn letter(self) -> char {
        match self {
            Dir::E => 'E',
            Dir::N => 'N',
            Dir::S => 'S',
            Dir::W => 'W',
        }
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Dir {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" => Ok(Dir::E),
            "N" => Ok(Dir::N),
            "S" => Ok(Dir::S),
            "W" => Ok(Dir::W),
            other => Err(format!("bad direction `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Legs {
    Slide(Dir),
    /// Two perpendicular legs executed back to back.
    Corner(Dir, Dir),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManeuverKind {
    Slide,
    Corner,
}

impl Legs {
    pub fn dirs(&self) -> Vec<Dir> {
        match *self {
            Legs::Slide(d) => vec![d],
            Legs::Corner(a, b) => vec![a, b],
        }
    }

    pub fn count(&self) -> u32 {
        match self {
            Legs::Slide(_) => 1,
            Legs::Corner(..) => 2,
        }
    }

    pub fn kind(&self) -> ManeuverKind {
        match self {
            Legs::Slide(_) => ManeuverKind::Slide,
            Legs::Corner(..) => ManeuverKind::Corner,
        }
    }

    pub fn from_dirs(dirs: &[Dir]) -> Option<Legs> {
        match *dirs {
            [d] => Some(Legs::Slide(d)),
            [a, b] if a.is_perpendicular(b) => Some(Legs::Corner(a, b)),
            _ => None,
        }
    }

    /// Cells visited after each leg.
    pub fn waypoints(&self, start: Coord) -> Vec<Coord> {
        let mut at = start;
        self.dirs()
            .into_iter()
            .map(|d| {
                at = d.step(at);
                at
            })
            .collect()
    }

    pub fn end(&self, start: Coord) -> Coord {
        *self.waypoints(start).last().expect("at least one leg")
    }
}

impl fmt::Display for Legs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Legs::Slide(d) => write!(f, "{d}"),
            Legs::Corner(a, b) => write!(f, "{a},{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Maneuver {
    pub mover: ModuleId,
    pub legs: Legs,
    /// Live flank actuating a failed mover.
    pub driver: Option<ModuleId>,
}

impl Maneuver {
    pub fn slide(mover: ModuleId, d: Dir) -> Self {
        Maneuver { mover, legs: Legs::Slide(d), driver: None }
    }

    pub fn corner(mover: ModuleId, a: Dir, b: Dir) -> Self {
        Maneuver { mover, legs: Legs::Corner(a, b), driver: None }
    }

    pub fn driven_by(self, driver: ModuleId) -> Self {
        Maneuver { driver: Some(driver), ..self }
    }

    pub fn kind(&self) -> ManeuverKind {
        self.legs.kind()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SlideRule {
    /// A stator face before or after the mover suffices.
    #[default]
    SingleFlank,
    /// Both the start and the landing cell need a stator on the same side.
    DoubleFlank,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionParams {
    pub pitch_mm: f64,
    pub speed_mm_s: f64,
    pub slide_rule: SlideRule,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams { pitch_mm: 12.0, speed_mm_s: 12.0, slide_rule: SlideRule::SingleFlank }
    }
}

/// The first legality condition a maneuver breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Violation {
    Occupied,
    OutOfBounds,
    NoFlank,
    Disconnect,
    DeadActuator,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::Occupied => "occupied",
            Violation::OutOfBounds => "out_of_bounds",
            Violation::NoFlank => "no_flank",
            Violation::Disconnect => "disconnect",
            Violation::DeadActuator => "dead_actuator",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Violation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Violation::Occupied,
            Violation::OutOfBounds,
            Violation::NoFlank,
            Violation::Disconnect,
            Violation::DeadActuator,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| format!("unknown reject reason `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MotionError {
    #[error("unknown module id {0}")]
    UnknownModule(ModuleId),
    #[error("illegal maneuver: {0}")]
    Illegal(Violation),
}

/// Occupied cells that act as stator for the leg `from -> to`.
fn flank_cells(others: &BTreeSet<Coord>, from: Coord, to: Coord, d: Dir, rule: SlideRule) -> Vec<Coord> {
    let mut out = Vec::new();
    for s in d.perpendicular() {
        let beside_from = s.step(from);
        let beside_to = s.step(to);
        let (a, b) = (others.contains(&beside_from), others.contains(&beside_to));
        match rule {
            SlideRule::SingleFlank => {
                if a {
                    out.push(beside_from);
                }
                if b {
                    out.push(beside_to);
                }
            }
            SlideRule::DoubleFlank => {
                if a && b {
                    out.push(beside_from);
                    out.push(beside_to);
                }
            }
        }
    }
    out
}

/// Checks conditions (a)-(e) and reports the first one that fails.
pub fn check_maneuver(
    config: &Configuration,
    grid: &Grid,
    m: &Maneuver,
    params: &MotionParams,
) -> Result<(), MotionError> {
    let rec = config.get(m.mover).ok_or(MotionError::UnknownModule(m.mover))?;
    let illegal = |v| Err(MotionError::Illegal(v));
    let mut others: BTreeSet<Coord> = config.occupied().collect();
    others.remove(&rec.pos);

    let dirs = m.legs.dirs();
    let mut at = rec.pos;
    let mut flanks_per_leg = Vec::with_capacity(dirs.len());
    for (i, &d) in dirs.iter().enumerate() {
        let next = d.step(at);
        if !grid.contains(next) {
            return illegal(Violation::OutOfBounds);
        }
        if others.contains(&next) {
            return illegal(Violation::Occupied);
        }
        let flanks = flank_cells(&others, at, next, d, params.slide_rule);
        if flanks.is_empty() {
            return illegal(Violation::NoFlank);
        }
        flanks_per_leg.push(flanks);
        at = next;
        if i + 1 < dirs.len() {
            let mut mid = others.clone();
            mid.insert(at);
            if !cells_connected(&mid, Adjacency::Eight) {
                return illegal(Violation::Disconnect);
            }
        }
    }

    let touching = Dir::ALL.iter().any(|d| others.contains(&d.step(at)));
    let mut fin = others;
    fin.insert(at);
    if !touching || !cells_connected(&fin, Adjacency::Four) {
        return illegal(Violation::Disconnect);
    }

    let alive_at = |c: &Coord| config.at(*c).is_some_and(|r| r.status.is_alive());
    match (rec.status.is_alive(), m.driver) {
        (true, None) => Ok(()),
        (true, Some(_)) => illegal(Violation::DeadActuator),
        (false, None) => illegal(Violation::DeadActuator),
        (false, Some(driver)) => {
            let Some(drec) = config.get(driver) else {
                return illegal(Violation::DeadActuator);
            };
            let every_leg_actuated = flanks_per_leg.iter().all(|f| f.iter().any(alive_at));
            let driver_is_flank = flanks_per_leg.iter().flatten().any(|c| *c == drec.pos);
            let adjacent = crate::lattice::manhattan(drec.pos, rec.pos) == 1;
            if drec.status.is_alive() && adjacent && driver_is_flank && every_leg_actuated {
                Ok(())
            } else {
                illegal(Violation::DeadActuator)
            }
        }
    }
}

fn all_legs() -> impl Iterator<Item = Legs> {
    Dir::ALL
        .into_iter()
        .map(Legs::Slide)
        .chain(Dir::ALL.into_iter().flat_map(|a| a.perpendicular().into_iter().map(move |b| Legs::Corner(a, b))))
}

/// Every legal maneuver of `mover`, sorted.
pub fn legal_maneuvers(
    config: &Configuration,
    grid: &Grid,
    mover: ModuleId,
    params: &MotionParams,
) -> Result<Vec<Maneuver>, MotionError> {
    let rec = config.get(mover).ok_or(MotionError::UnknownModule(mover))?;
    let drivers: Vec<Option<ModuleId>> =
        if rec.status.is_alive() { vec![None] } else { config.alive_neighbors(mover).into_iter().map(Some).collect() };
    let mut out: Vec<Maneuver> = all_legs()
        .flat_map(|legs| drivers.iter().map(move |&driver| Maneuver { mover, legs, driver }))
        .filter(|m| check_maneuver(config, grid, m, params).is_ok())
        .collect();
    out.sort();
    Ok(out)
}

/// Applies a legal maneuver; other records are untouched.
pub fn apply_maneuver(
    config: &Configuration,
    grid: &Grid,
    m: &Maneuver,
    params: &MotionParams,
) -> Result<Configuration, MotionError> {
    check_maneuver(config, grid, m, params)?;
    let start = config.get(m.mover).expect("checked").pos;
    let mut next = config.clone();
    next.relocate(m.mover, m.legs.end(start)).expect("destination checked free");
    Ok(next)
}

/// Substeps per cell of travel; each flips one stator magnet.
pub const SUBSTEPS_PER_LEG: usize = 6;

/// Simulated ticks (1 tick = 1 ms) for one cell of travel.
pub fn leg_ticks(params: &MotionParams) -> u64 {
    (1000.0 * params.pitch_mm / params.speed_mm_s).round() as u64
}

pub fn maneuver_duration(m: &Maneuver, params: &MotionParams) -> u64 {
    u64::from(m.legs.count()) * leg_ticks(params)
}

/// Absolute completion ticks of the six substeps of a leg starting at `start`.
pub fn substep_schedule(start: u64, leg: u64) -> [u64; SUBSTEPS_PER_LEG] {
    let n = SUBSTEPS_PER_LEG as u64;
    std::array::from_fn(|k| start + leg * (k as u64 + 1) / n)
}
