//! Square-lattice geometry: coordinates, grids, module configurations and the
//! connectivity predicates every other layer leans on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// A lattice cell. `x` grows eastwards, `y` grows northwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Coord { x, y }
    }

    pub const fn offset(self, dx: i32, dy: i32) -> Self {
        Coord { x: self.x + dx, y: self.y + dy }
    }

    /// Chebyshev distance; cells of a 3x3 window are within 1 of its center.
    pub fn chebyshev(self, other: Coord) -> u32 {
        (self.x - other.x).unsigned_abs().max((self.y - other.y).unsigned_abs())
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Unique, positive module identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModuleId(pub u32);

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Alive,
    Failed,
}

impl Status {
    pub fn is_alive(self) -> bool {
        self == Status::Alive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    Four,
    Eight,
}

const OFFSETS4: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const OFFSETS8: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

impl Adjacency {
    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Adjacency::Four => &OFFSETS4,
            Adjacency::Eight => &OFFSETS8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Coord),
    #[error("unknown module id {0}")]
    UnknownModule(ModuleId),
    #[error("two modules share cell {0}")]
    DuplicatePosition(Coord),
    #[error("module id {0} appears twice")]
    DuplicateId(ModuleId),
    #[error("module ids must be positive")]
    ZeroId,
}

/// The conveyor surface with its two anchor cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
    pub input: Coord,
    pub output: Coord,
}

impl Grid {
    pub fn contains(&self, c: Coord) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as i64) < self.width as i64 && (c.y as i64) < self.height as i64
    }

    pub fn cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.height as i32).flat_map(move |y| (0..self.width as i32).map(move |x| Coord::new(x, y)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModuleRecord {
    pub id: ModuleId,
    pub pos: Coord,
    pub status: Status,
}

/// The global physical state: which module sits where, and whether it works.
///
/// Records are indexed both by id and by cell so lookups in either direction
/// are logarithmic. Iteration is always in id order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Configuration {
    modules: BTreeMap<ModuleId, ModuleRecord>,
    cells: BTreeMap<Coord, ModuleId>,
}

impl Configuration {
    pub fn new(records: impl IntoIterator<Item = ModuleRecord>) -> Result<Self, LatticeError> {
        let mut config = Configuration::default();
        for r in records {
            if r.id.0 == 0 {
                return Err(LatticeError::ZeroId);
            }
            if config.modules.contains_key(&r.id) {
                return Err(LatticeError::DuplicateId(r.id));
            }
            if config.cells.contains_key(&r.pos) {
                return Err(LatticeError::DuplicatePosition(r.pos));
            }
            config.cells.insert(r.pos, r.id);
            config.modules.insert(r.id, r);
        }
        Ok(config)
    }

    /// Alive modules numbered 1.. in the order given.
    pub fn from_cells(cells: impl IntoIterator<Item = Coord>) -> Result<Self, LatticeError> {
        Self::new(cells.into_iter().enumerate().map(|(i, pos)| ModuleRecord {
            id: ModuleId(i as u32 + 1),
            pos,
            status: Status::Alive,
        }))
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn get(&self, id: ModuleId) -> Option<&ModuleRecord> {
        self.modules.get(&id)
    }

    pub fn at(&self, c: Coord) -> Option<&ModuleRecord> {
        self.cells.get(&c).map(|id| &self.modules[id])
    }

    pub fn is_occupied(&self, c: Coord) -> bool {
        self.cells.contains_key(&c)
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleRecord> {
        self.modules.values()
    }

    pub fn occupied(&self) -> impl Iterator<Item = Coord> + '_ {
        self.cells.keys().copied()
    }

    pub fn all_in(&self, grid: &Grid) -> Result<(), LatticeError> {
        match self.cells.keys().find(|c| !grid.contains(**c)) {
            Some(c) => Err(LatticeError::OutOfBounds(*c)),
            None => Ok(()),
        }
    }

    /// Moves a module without any legality check.
    pub fn relocate(&mut self, id: ModuleId, to: Coord) -> Result<(), LatticeError> {
        let rec = self.modules.get_mut(&id).ok_or(LatticeError::UnknownModule(id))?;
        if rec.pos == to {
            return Ok(());
        }
        if self.cells.contains_key(&to) {
            return Err(LatticeError::DuplicatePosition(to));
        }
        self.cells.remove(&rec.pos);
        rec.pos = to;
        self.cells.insert(to, id);
        Ok(())
    }

    pub fn set_status(&mut self, id: ModuleId, status: Status) -> Result<(), LatticeError> {
        let rec = self.modules.get_mut(&id).ok_or(LatticeError::UnknownModule(id))?;
        rec.status = status;
        Ok(())
    }

    pub fn without(&self, id: ModuleId) -> Result<Configuration, LatticeError> {
        let mut out = self.clone();
        let rec = out.modules.remove(&id).ok_or(LatticeError::UnknownModule(id))?;
        out.cells.remove(&rec.pos);
        Ok(out)
    }

    /// Alive modules that are 4-adjacent to `id`, in id order.
    pub fn alive_neighbors(&self, id: ModuleId) -> Vec<ModuleId> {
        let Some(rec) = self.get(id) else { return Vec::new() };
        let mut out: Vec<ModuleId> = OFFSETS4
            .iter()
            .filter_map(|&(dx, dy)| self.at(rec.pos.offset(dx, dy)))
            .filter(|r| r.status.is_alive())
            .map(|r| r.id)
            .collect();
        out.sort();
        out
    }
}

pub fn manhattan(a: Coord, b: Coord) -> u32 {
    (a.x - b.x).unsigned_abs() + (a.y - b.y).unsigned_abs()
}

pub fn neighbors4(grid: &Grid, c: Coord) -> Result<Vec<Coord>, LatticeError> {
    if !grid.contains(c) {
        return Err(LatticeError::OutOfBounds(c));
    }
    Ok(OFFSETS4.iter().map(|&(dx, dy)| c.offset(dx, dy)).filter(|n| grid.contains(*n)).collect())
}

/// Number of components of a cell set under the given adjacency.
pub fn component_count(cells: &BTreeSet<Coord>, adjacency: Adjacency) -> usize {
    let mut seen = BTreeSet::new();
    let mut count = 0;
    for &start in cells {
        if seen.contains(&start) {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(c) = queue.pop_front() {
            for &(dx, dy) in adjacency.offsets() {
                let n = c.offset(dx, dy);
                if cells.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    count
}

pub fn cells_connected(cells: &BTreeSet<Coord>, adjacency: Adjacency) -> bool {
    component_count(cells, adjacency) <= 1
}

pub fn is_connected(config: &Configuration, adjacency: Adjacency) -> bool {
    cells_connected(&config.occupied().collect(), adjacency)
}

/// Whether the alive modules alone form one 4-connected component. This is
/// the graph messages can travel over.
pub fn alive_connected(config: &Configuration) -> bool {
    let cells: BTreeSet<Coord> = config.modules().filter(|r| r.status.is_alive()).map(|r| r.pos).collect();
    cells_connected(&cells, Adjacency::Four)
}

pub fn is_cut_module(config: &Configuration, id: ModuleId) -> Result<bool, LatticeError> {
    let rest = config.without(id)?;
    Ok(!is_connected(&rest, Adjacency::Four))
}

/// Shortest chain of 4-adjacent occupied cells from `a` to `b`, counted in
/// cells (so `a == b` occupied gives 1).
pub fn shortest_chain(config: &Configuration, a: Coord, b: Coord) -> Option<usize> {
    if !config.is_occupied(a) || !config.is_occupied(b) {
        return None;
    }
    let mut dist = BTreeMap::from([(a, 1usize)]);
    let mut queue = VecDeque::from([a]);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        if c == b {
            return Some(d);
        }
        for &(dx, dy) in &OFFSETS4 {
            let n = c.offset(dx, dy);
            if config.is_occupied(n) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

pub fn path_exists(config: &Configuration, a: Coord, b: Coord) -> bool {
    shortest_chain(config, a, b).is_some()
}

/// The x-first Manhattan path from `input` to `output`, both ends included.
pub fn target_path(input: Coord, output: Coord) -> Vec<Coord> {
    let mut path = vec![input];
    let mut c = input;
    while c.x != output.x {
        c.x += (output.x - c.x).signum();
        path.push(c);
    }
    while c.y != output.y {
        c.y += (output.y - c.y).signum();
        path.push(c);
    }
    path
}
