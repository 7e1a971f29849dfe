//! Centralized references the distributed heuristic is measured against.
//!
//! States are sorted cell lists: modules are interchangeable for the goal, so
//! identities are dropped. Modules on the input and output cells stay put.

mod verify;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

pub use verify::{verify_trace, Check, VerifyReport};

use crate::io::Scenario;
use crate::lattice::{
    is_connected, manhattan, path_exists, Adjacency, Configuration, Coord, Grid, ModuleId, ModuleRecord, Status,
};
use crate::motion::{apply_maneuver, legal_maneuvers, Maneuver, MotionParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_states: usize,
    pub max_depth: u32,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { max_states: 2_000_000, max_depth: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimum {
    Exact(u32),
    /// A bound was hit first.
    Unknown,
    /// Every reachable state was explored and none joins input to output.
    Infeasible,
}

impl std::fmt::Display for Optimum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Optimum::Exact(n) => write!(f, "{n}"),
            Optimum::Unknown => f.write_str("unknown"),
            Optimum::Infeasible => f.write_str("infeasible"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("initial configuration is not 4-connected")]
    Disconnected,
    #[error("the oracle only handles alive modules")]
    FailedModule,
    #[error("search bounds must be positive")]
    BadBounds,
}

type State = Vec<Coord>;

fn to_config(state: &[Coord]) -> Configuration {
    Configuration::from_cells(state.iter().copied()).expect("states hold distinct cells")
}

/// Successor states with their leg cost, in a fixed order.
fn successors(state: &[Coord], grid: &Grid, motion: &MotionParams) -> Vec<(u32, State)> {
    let config = to_config(state);
    let mut out = Vec::new();
    for (i, &cell) in state.iter().enumerate() {
        if cell == grid.input || cell == grid.output {
            continue;
        }
        let id = ModuleId(i as u32 + 1);
        for m in legal_maneuvers(&config, grid, id, motion).expect("module exists") {
            let mut next: State = state.to_vec();
            next[i] = m.legs.end(cell);
            next.sort();
            out.push((m.legs.count(), next));
        }
    }
    out
}

fn initial_state(scenario: &Scenario) -> Result<State, OracleError> {
    if scenario.modules.iter().any(|m| m.status != Status::Alive) {
        return Err(OracleError::FailedModule);
    }
    let mut cells: State = scenario.modules.iter().map(|m| m.pos).collect();
    cells.sort();
    if !is_connected(&to_config(&cells), Adjacency::Four) {
        return Err(OracleError::Disconnected);
    }
    Ok(cells)
}

fn is_goal(state: &[Coord], grid: &Grid) -> bool {
    path_exists(&to_config(state), grid.input, grid.output)
}

/// Minimum total legs until a chain joins input and output (uniform-cost
/// search with bucketed frontier; maneuver costs are 1 or 2 legs).
pub fn optimal_motion_count(scenario: &Scenario, bounds: SearchBounds) -> Result<Optimum, OracleError> {
    if bounds.max_states == 0 || bounds.max_depth == 0 {
        return Err(OracleError::BadBounds);
    }
    let grid = scenario.grid;
    let motion = scenario.params.motion;
    let start = initial_state(scenario)?;
    let mut best: HashMap<State, u32> = HashMap::from([(start.clone(), 0)]);
    let mut buckets: Vec<VecDeque<State>> = vec![VecDeque::from([start])];
    let mut cost = 0usize;
    let mut truncated = false;
    while cost < buckets.len() {
        while let Some(state) = buckets[cost].pop_front() {
            if best.get(&state) != Some(&(cost as u32)) {
                continue;
            }
            if is_goal(&state, &grid) {
                return Ok(Optimum::Exact(cost as u32));
            }
            for (legs, next) in successors(&state, &grid, &motion) {
                let c = cost as u32 + legs;
                if c > bounds.max_depth {
                    truncated = true;
                    continue;
                }
                if best.get(&next).is_some_and(|&b| b <= c) {
                    continue;
                }
                if !best.contains_key(&next) && best.len() >= bounds.max_states {
                    return Ok(Optimum::Unknown);
                }
                best.insert(next.clone(), c);
                if buckets.len() <= c as usize {
                    buckets.resize_with(c as usize + 1, VecDeque::new);
                }
                buckets[c as usize].push_back(next);
            }
        }
        cost += 1;
    }
    Ok(if truncated { Optimum::Unknown } else { Optimum::Infeasible })
}

/// Depth-first iterative deepening on the same state space; `None` when no
/// goal exists within `max_depth` legs.
pub fn iterative_deepening(scenario: &Scenario, max_depth: u32) -> Result<Option<u32>, OracleError> {
    let grid = scenario.grid;
    let motion = scenario.params.motion;
    let start = initial_state(scenario)?;

    fn dfs(state: &State, budget: u32, grid: &Grid, motion: &MotionParams, seen: &mut HashMap<State, u32>) -> bool {
        if is_goal(state, grid) {
            return true;
        }
        if seen.get(state).is_some_and(|&b| b >= budget) {
            return false;
        }
        seen.insert(state.clone(), budget);
        for (legs, next) in successors(state, grid, motion) {
            if legs <= budget && dfs(&next, budget - legs, grid, motion, seen) {
                return true;
            }
        }
        false
    }

    for limit in 0..=max_depth {
        let mut seen = HashMap::new();
        if dfs(&start, limit, &grid, &motion, &mut seen) {
            return Ok(Some(limit));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GreedyOutcome {
    Reached {
        motions: u32,
    },
    /// No maneuver lowers the potential any further.
    Stalled {
        motions: u32,
        state: Configuration,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyRun {
    pub outcome: GreedyOutcome,
    pub moves: Vec<Maneuver>,
}

fn potential(config: &Configuration, output: Coord) -> u64 {
    config.modules().map(|r| u64::from(manhattan(r.pos, output))).sum()
}

/// Steepest descent on the summed distance to the output. Ties go to the
/// smaller mover id, then to leg order E, N, S, W.
pub fn greedy_baseline(scenario: &Scenario) -> GreedyRun {
    let grid = scenario.grid;
    let motion = scenario.params.motion;
    let mut config = Configuration::new(scenario.modules.iter().map(|m| ModuleRecord { status: Status::Alive, ..*m }))
        .unwrap_or_default();
    let mut moves = Vec::new();
    let mut motions = 0;
    loop {
        if path_exists(&config, grid.input, grid.output) {
            return GreedyRun { outcome: GreedyOutcome::Reached { motions }, moves };
        }
        let here = potential(&config, grid.output);
        let mut best: Option<(u64, Maneuver, Configuration)> = None;
        for rec in config.modules() {
            if rec.pos == grid.input || rec.pos == grid.output {
                continue;
            }
            for m in legal_maneuvers(&config, &grid, rec.id, &motion).unwrap_or_default() {
                let next = apply_maneuver(&config, &grid, &m, &motion).expect("legal");
                let p = potential(&next, grid.output);
                if p >= here {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bp, bm, _)) => (p, m.mover, m.legs.dirs()) < (*bp, bm.mover, bm.legs.dirs()),
                };
                if better {
                    best = Some((p, m, next));
                }
            }
        }
        match best {
            Some((_, m, next)) => {
                motions += m.legs.count();
                moves.push(m);
                config = next;
            }
            None => return GreedyRun { outcome: GreedyOutcome::Stalled { motions, state: config }, moves },
        }
    }
}
