//! Candidacy, window assembly and per-round planning.

use std::cmp::Reverse;

use super::{AgentState, Moore, MoveCommand, WaveTag, WindowMap};
use crate::lattice::{manhattan, Coord, ModuleId, Status};
use crate::motion::{Dir, Maneuver};

/// Whether every leg of `m` brings the mover strictly closer to `goal`.
pub fn is_progress(start: Coord, m: &Maneuver, goal: Coord) -> bool {
    let mut at = start;
    m.legs.waypoints(start).into_iter().all(|next| {
        let closer = manhattan(next, goal) < manhattan(at, goal);
        at = next;
        closer
    })
}

/// The maneuver a commanded module executes: maximal distance decrease, then
/// a first leg along the axis with more ground left, then E, N, S, W.
pub fn best_maneuver(start: Coord, options: &[Maneuver], goal: Coord) -> Option<Maneuver> {
    let (dx, dy) = ((goal.x - start.x).abs(), (goal.y - start.y).abs());
    let axis_rank = |d: Dir| match (dx.cmp(&dy), d.is_horizontal()) {
        (std::cmp::Ordering::Greater, false) | (std::cmp::Ordering::Less, true) => 1,
        _ => 0,
    };
    options
        .iter()
        .filter(|m| is_progress(start, m, goal))
        .min_by_key(|m| {
            let dirs = m.legs.dirs();
            (Reverse(dirs.len()), axis_rank(dirs[0]), dirs, m.driver)
        })
        .copied()
}

/// Wave tag of a module that can advance towards the goal, if any.
pub fn candidate_score(state: &AgentState, legal: &[Maneuver]) -> Option<WaveTag> {
    if state.status != Status::Alive || state.pos == state.input || state.pos == state.goal {
        return None;
    }
    let own = legal.iter().filter(|m| m.mover == state.id && m.driver.is_none());
    if !own.into_iter().any(|m| is_progress(state.pos, m, state.goal)) {
        return None;
    }
    Some(WaveTag { epoch: state.epoch, score: -i64::from(manhattan(state.pos, state.goal)), id: state.id })
}

pub fn assemble_window(state: &AgentState) -> WindowMap {
    let mut cells: Moore = state.moore;
    cells[1][1] = Some((state.id, state.status));
    WindowMap { center: state.pos, cells }
}

/// Orders the window's modules into commands: north row first, west to east.
/// Anchored cells are skipped; failed modules are addressed through a live
/// 4-adjacent flank inside the window, or skipped when none exists.
pub fn plan_round(window: &WindowMap, goal: Coord, input: Coord, epoch: u64) -> Vec<MoveCommand> {
    let mut out = Vec::new();
    for row in 0..3 {
        for col in 0..3 {
            let Some((id, status)) = window.cells[row][col] else { continue };
            let cell = window.coord_of(row, col);
            if cell == input || cell == goal {
                continue;
            }
            let driver = match status {
                Status::Alive => None,
                Status::Failed => match live_flank(window, row, col) {
                    Some(d) => Some(d),
                    None => continue,
                },
            };
            out.push(MoveCommand { epoch, seq: out.len() as u32 + 1, target: id, objective: goal, driver });
        }
    }
    out
}

fn live_flank(window: &WindowMap, row: usize, col: usize) -> Option<ModuleId> {
    Dir::ALL.into_iter().find_map(|d| {
        let (dx, dy) = d.delta();
        let (r, c) = (row as i32 - dy, col as i32 + dx);
        if !(0..3).contains(&r) || !(0..3).contains(&c) {
            return None;
        }
        match window.cells[r as usize][c as usize] {
            Some((id, Status::Alive)) => Some(id),
            _ => None,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::Legs;

    fn state_at(id: u32, pos: Coord, goal: Coord) -> AgentState {
        AgentState::new(ModuleId(id), pos, Coord::new(0, 0), goal)
    }

    #[test]
    fn failed_module_is_not_a_candidate() {
        let mut s = state_at(2, Coord::new(1, 0), Coord::new(5, 0));
        s.status = Status::Failed;
        let legal = [Maneuver::slide(ModuleId(2), Dir::E)];
        assert_eq!(candidate_score(&s, &legal), None);
    }

    #[test]
    fn score_is_negated_distance() {
        let s = state_at(2, Coord::new(1, 0), Coord::new(5, 0));
        let legal = [Maneuver::slide(ModuleId(2), Dir::E)];
        let tag = candidate_score(&s, &legal).unwrap();
        assert_eq!(tag.score, -4);
        assert_eq!(tag.id, ModuleId(2));
    }

    #[test]
    fn only_retreating_moves_give_no_candidacy() {
        let s = state_at(2, Coord::new(1, 0), Coord::new(5, 0));
        let legal = [Maneuver::slide(ModuleId(2), Dir::W), Maneuver::slide(ModuleId(2), Dir::N)];
        assert_eq!(candidate_score(&s, &legal), None);
    }

    #[test]
    fn anchored_modules_never_run() {
        let s = state_at(2, Coord::new(0, 0), Coord::new(5, 0));
        assert_eq!(candidate_score(&s, &[Maneuver::slide(ModuleId(2), Dir::E)]), None);
    }

    #[test]
    fn best_prefers_corner_then_axis() {
        let id = ModuleId(1);
        let start = Coord::new(1, 1);
        let goal = Coord::new(3, 0);
        let options = [
            Maneuver::slide(id, Dir::E),
            Maneuver::slide(id, Dir::S),
            Maneuver::corner(id, Dir::S, Dir::E),
            Maneuver::corner(id, Dir::E, Dir::S),
        ];
        // dx = 2 > dy = 1: the corner starting eastwards wins.
        assert_eq!(best_maneuver(start, &options, goal), Some(Maneuver::corner(id, Dir::E, Dir::S)));
        let slides = &options[..2];
        assert_eq!(best_maneuver(start, slides, goal), Some(Maneuver::slide(id, Dir::E)));
        assert_eq!(best_maneuver(start, &[Maneuver::slide(id, Dir::W)], goal), None);
    }

    #[test]
    fn corner_with_a_retreating_leg_is_not_progress() {
        let m = Maneuver { mover: ModuleId(1), legs: Legs::Corner(Dir::N, Dir::E), driver: None };
        assert!(!is_progress(Coord::new(0, 0), &m, Coord::new(3, 0)));
    }

    fn window(center: Coord, occupied: &[(i32, i32, u32, Status)]) -> WindowMap {
        let mut cells: Moore = [[None; 3]; 3];
        for &(dx, dy, id, st) in occupied {
            cells[(1 - dy) as usize][(dx + 1) as usize] = Some((ModuleId(id), st));
        }
        WindowMap { center, cells }
    }

    #[test]
    fn lone_leader_commands_itself() {
        let w = window(Coord::new(2, 2), &[(0, 0, 5, Status::Alive)]);
        let plan = plan_round(&w, Coord::new(5, 2), Coord::new(0, 0), 3);
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].target, ModuleId(5));
        assert_eq!(plan[0].seq, 1);
        assert_eq!(plan[0].epoch, 3);
    }

    #[test]
    fn row_major_north_first() {
        let w =
            window(Coord::new(2, 2), &[(0, 0, 1, Status::Alive), (-1, 1, 2, Status::Alive), (1, -1, 3, Status::Alive)]);
        let plan = plan_round(&w, Coord::new(5, 2), Coord::new(0, 0), 0);
        let order: Vec<u32> = plan.iter().map(|c| c.target.0).collect();
        assert_eq!(order, vec![2, 1, 3]);
        assert!(plan.windows(2).all(|p| p[0].seq < p[1].seq));
    }

    #[test]
    fn failed_module_driven_by_west_flank() {
        // Failed module east of the leader; the leader is its west flank.
        let w = window(Coord::new(2, 2), &[(0, 0, 1, Status::Alive), (1, 0, 2, Status::Failed)]);
        let plan = plan_round(&w, Coord::new(5, 2), Coord::new(0, 0), 0);
        let cmd = plan.iter().find(|c| c.target == ModuleId(2)).unwrap();
        assert_eq!(cmd.driver, Some(ModuleId(1)));
        // Without a live flank inside the window it is skipped.
        let w = window(Coord::new(2, 2), &[(0, 0, 1, Status::Alive), (1, 1, 2, Status::Failed)]);
        let plan = plan_round(&w, Coord::new(5, 2), Coord::new(0, 0), 0);
        assert!(plan.iter().all(|c| c.target != ModuleId(2)));
    }

    #[test]
    fn anchored_cells_are_skipped() {
        let w = window(Coord::new(1, 1), &[(0, 0, 1, Status::Alive), (-1, -1, 2, Status::Alive)]);
        let plan = plan_round(&w, Coord::new(5, 1), Coord::new(0, 0), 0);
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].target, ModuleId(1));
    }

    #[test]
    fn window_records_neighbors() {
        let mut s = state_at(1, Coord::new(1, 1), Coord::new(3, 0));
        assert_eq!(assemble_window(&s).occupied().count(), 1);
        s.moore[1][2] = Some((ModuleId(2), Status::Alive));
        s.moore[2][1] = Some((ModuleId(3), Status::Failed));
        s.moore[2][2] = Some((ModuleId(4), Status::Alive));
        let w = assemble_window(&s);
        assert_eq!(w.occupied().count(), 4);
        assert_eq!(w.cells[1][1], Some((ModuleId(1), Status::Alive)));
        assert_eq!(w.cells[2][1], Some((ModuleId(3), Status::Failed)));
        assert_eq!(w.coord_of(2, 2), Coord::new(2, 0));
    }
}
