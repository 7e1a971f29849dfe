#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dili::engine::SimParams;
use dili::lattice::{manhattan, ModuleRecord};
use dili::{Coord, Grid, ModuleId, Scenario, Status};

pub fn scenario(w: u32, h: u32, input: (i32, i32), output: (i32, i32), cells: &[(i32, i32)]) -> Scenario {
    Scenario {
        grid: Grid { width: w, height: h, input: Coord::new(input.0, input.1), output: Coord::new(output.0, output.1) },
        modules: cells
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ModuleRecord {
                id: ModuleId(i as u32 + 1),
                pos: Coord::new(x, y),
                status: Status::Alive,
            })
            .collect(),
        params: SimParams::default(),
        events: Vec::new(),
    }
}

/// A connected blob grown at random around the input, on a random grid.
pub fn random_blob(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(6..=20u32);
    let h = rng.gen_range(6..=20u32);
    let n = rng.gen_range(6..=40usize).min((w * h / 3) as usize);
    let input = Coord::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
    let mut cells: Vec<Coord> = vec![input];
    let mut set: BTreeSet<Coord> = cells.iter().copied().collect();
    while cells.len() < n {
        let base = *cells.choose(&mut rng).unwrap();
        let (dx, dy) = *[(1, 0), (-1, 0), (0, 1), (0, -1)].choose(&mut rng).unwrap();
        let c = base.offset(dx, dy);
        let inside = c.x >= 0 && c.y >= 0 && c.x < w as i32 && c.y < h as i32;
        if inside && set.insert(c) {
            cells.push(c);
        }
    }
    let output = loop {
        let c = Coord::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
        if c != input && manhattan(c, input) < n as u32 {
            break c;
        }
    };
    let mut ids: Vec<u32> = (1..=n as u32).collect();
    ids.shuffle(&mut rng);
    let mut params = SimParams { seed, ..SimParams::default() };
    params.log_messages = true;
    Scenario {
        grid: Grid { width: w, height: h, input, output },
        modules: cells
            .iter()
            .zip(ids)
            .map(|(&pos, id)| ModuleRecord { id: ModuleId(id), pos, status: Status::Alive })
            .collect(),
        params,
        events: Vec::new(),
    }
}
