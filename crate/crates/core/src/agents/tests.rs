use std::collections::{BTreeMap, VecDeque};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::motion::Dir;

/// Static physics: fixed positions and a fixed maneuver list per module.
#[derive(Default)]
struct Fixed {
    pos: BTreeMap<ModuleId, Coord>,
    moves: BTreeMap<ModuleId, Vec<Maneuver>>,
}

impl Physics for Fixed {
    fn position(&self, id: ModuleId) -> Option<Coord> {
        self.pos.get(&id).copied()
    }
    fn maneuvers(&self, mover: ModuleId) -> Vec<Maneuver> {
        self.moves.get(&mover).cloned().unwrap_or_default()
    }
}

fn ctx(physics: &dyn Physics, now: Tick) -> Ctx<'_> {
    Ctx { now, round_timeout: 10_000, physics }
}

fn msg(src: u32, dst: u32, payload: Payload) -> Message {
    Message { id: 0, src: ModuleId(src), dst: ModuleId(dst), payload, sent_at: 0 }
}

/// A line of modules along y = 1 over the goal row; each one can slide east.
fn line(n: u32, goal: Coord) -> (Vec<AgentState>, Fixed) {
    let mut phys = Fixed::default();
    let mut agents = Vec::new();
    for i in 0..n {
        let id = ModuleId(i + 1);
        let pos = Coord::new(i as i32 + 1, 1);
        phys.pos.insert(id, pos);
        phys.moves.insert(id, vec![Maneuver::slide(id, Dir::E)]);
        agents.push(AgentState::new(id, pos, Coord::new(0, 0), goal));
    }
    for i in 0..n as usize {
        if i > 0 {
            agents[i].moore[1][0] = Some((agents[i - 1].id, Status::Alive));
        }
        if i + 1 < n as usize {
            agents[i].moore[1][2] = Some((agents[i + 1].id, Status::Alive));
        }
    }
    (agents, phys)
}

#[test]
fn lone_candidate_is_leader_immediately() {
    let id = ModuleId(1);
    let mut phys = Fixed::default();
    phys.pos.insert(id, Coord::new(2, 0));
    phys.moves.insert(id, vec![Maneuver::slide(id, Dir::E)]);
    let state = AgentState::new(id, Coord::new(2, 0), Coord::new(0, 0), Coord::new(5, 0));
    let (next, out, leader) = election_step(&state, Input::Start, &ctx(&phys, 0));
    assert_eq!(leader, Some(WaveTag { epoch: 0, score: -3, id }));
    assert_eq!(next.phase, Phase::Leader);
    assert!(out.notes.iter().any(|n| matches!(n, Note::Execute { .. })));
}

#[test]
fn two_modules_better_score_wins() {
    // Module 2 at (4,1) is 4 away from (8,1); module 1 at (3,1) is 5 away.
    let goal = Coord::new(8, 1);
    let (mut agents, phys) = line(2, goal);
    agents[0].pos = Coord::new(3, 1);
    agents[1].pos = Coord::new(4, 1);
    let c = ctx(&phys, 0);
    let out1 = agents[0].step(Input::Start, &c);
    let out2 = agents[1].step(Input::Start, &c);
    assert_eq!(out1.sends, vec![(ModuleId(2), Payload::Wave(WaveTag { epoch: 0, score: -5, id: ModuleId(1) }))]);
    let tag2 = WaveTag { epoch: 0, score: -4, id: ModuleId(2) };
    assert_eq!(out2.sends, vec![(ModuleId(1), Payload::Wave(tag2))]);

    // Module 2 extinguishes the weaker wave.
    let o = agents[1].step(Input::Deliver(msg(1, 2, out1.sends[0].1)), &c);
    assert!(o.sends.is_empty());
    // Module 1 adopts the stronger tag; with no other neighbor it echoes.
    let o = agents[0].step(Input::Deliver(msg(2, 1, out2.sends[0].1)), &c);
    assert_eq!(agents[0].adopted, Some(tag2));
    assert_eq!(o.sends, vec![(ModuleId(2), Payload::Echo(tag2))]);
    let o = agents[1].step(Input::Deliver(msg(1, 2, Payload::Echo(tag2))), &c);
    assert_eq!(o.leader(), Some(tag2));
}

#[test]
fn stale_wave_is_ignored() {
    let (mut agents, phys) = line(2, Coord::new(8, 1));
    agents[0].epoch = 3;
    let before = agents[0].clone();
    let stale = WaveTag { epoch: 2, score: 0, id: ModuleId(2) };
    let out = agents[0].step(Input::Deliver(msg(2, 1, Payload::Wave(stale))), &ctx(&phys, 5));
    assert!(out.sends.is_empty());
    assert_eq!(out.notes, vec![Note::Ignored]);
    assert_eq!(agents[0].adopted, before.adopted);
    assert_eq!(agents[0].epoch, 3);
}

#[test]
fn timeout_restarts_election() {
    let (mut agents, phys) = line(2, Coord::new(8, 1));
    agents[0].epoch = 4;
    agents[0].last_activity = 0;
    let out = agents[0].on_timeout(&ctx(&phys, 10_000));
    assert_eq!(agents[0].epoch, 5);
    assert!(matches!(out.sends[0].1, Payload::Wave(WaveTag { epoch: 5, .. })));

    // Recent activity: nothing happens.
    let out = agents[0].on_timeout(&ctx(&phys, 10_001));
    assert!(out.sends.is_empty());
    assert_eq!(agents[0].epoch, 5);

    agents[1].status = Status::Failed;
    assert_eq!(agents[1].on_timeout(&ctx(&phys, 1_000_000)), Output::default());
}

#[test]
fn active_leader_does_not_time_out() {
    let (mut agents, phys) = line(1, Coord::new(8, 1));
    agents[0].step(Input::Start, &ctx(&phys, 100));
    assert_eq!(agents[0].phase, Phase::Leader);
    let out = agents[0].on_timeout(&ctx(&phys, 5_000));
    assert_eq!(out, Output::default());
    assert_eq!(agents[0].phase, Phase::Leader);
}

#[test]
fn round_with_no_movers_closes_after_no_ops() {
    // Leader with two neighbors; nobody has a maneuver except the leader's
    // candidacy, which the physics then withdraws before commands execute.
    let (mut agents, mut phys) = line(3, Coord::new(8, 1));
    phys.moves.insert(ModuleId(1), vec![]);
    phys.moves.insert(ModuleId(3), vec![]);
    let c = ctx(&phys, 0);
    let mut queue: VecDeque<(ModuleId, ModuleId, Payload)> = VecDeque::new();
    let mut notes = Vec::new();
    for a in agents.iter_mut() {
        let o = a.step(Input::Start, &c);
        queue.extend(o.sends.into_iter().map(|(d, p)| (a.id, d, p)));
        notes.extend(o.notes);
    }
    let mut moves = 0;
    while let Some((src, dst, p)) = queue.pop_front() {
        // Stop at the next epoch's election.
        if matches!(p, Payload::Wave(t) | Payload::Echo(t) if t.epoch > 0) {
            continue;
        }
        let a = &mut agents[dst.0 as usize - 1];
        let o = a.step(Input::Deliver(msg(src.0, dst.0, p)), &c);
        for n in &o.notes {
            if let Note::Execute { .. } = n {
                moves += 1;
            }
        }
        queue.extend(o.sends.into_iter().map(|(d, p)| (dst, d, p)));
        let executing = o.notes.iter().any(|n| matches!(n, Note::Execute { .. }));
        notes.extend(o.notes);
        if executing {
            // Pretend the move was refused so the round carries on.
            let o = a.step(Input::ManeuverDone { moved: false }, &c);
            queue.extend(o.sends.into_iter().map(|(d, p)| (dst, d, p)));
            notes.extend(o.notes);
        }
    }
    let commands: Vec<_> = notes.iter().filter(|n| matches!(n, Note::Command(_))).collect();
    assert_eq!(commands.len(), 3);
    assert_eq!(moves, 1);
    assert!(notes.contains(&Note::Round { epoch: 0, commands: 3 }));
    assert!(agents.iter().all(|a| a.epoch == 1));
}

/// Runs one election over an arbitrary docked graph with random, per-link
/// FIFO delivery order and returns every leader declaration.
fn run_election(adj: &BTreeMap<u32, Vec<u32>>, scores: &BTreeMap<u32, Option<i64>>, seed: u64) -> Vec<WaveTag> {
    let mut phys = Fixed::default();
    let mut agents: BTreeMap<u32, AgentState> = BTreeMap::new();
    for (&id, ns) in adj {
        let mid = ModuleId(id);
        // Scores are injected through positions: distance to goal (1000, 0).
        let (pos, moves) = match scores[&id] {
            Some(s) => (Coord::new(1000 + s as i32, id as i32 + 10), vec![Maneuver::slide(mid, Dir::E)]),
            None => (Coord::new(0, id as i32 + 10), vec![]),
        };
        phys.pos.insert(mid, pos);
        phys.moves.insert(mid, moves);
        let mut st = AgentState::new(mid, pos, Coord::new(-5, -5), Coord::new(1000, id as i32 + 10));
        // Only the docked list matters to the election; fake it through moore.
        let slots = [(0, 1), (1, 0), (1, 2), (2, 1)];
        for (k, n) in ns.iter().enumerate() {
            let (r, c) = slots[k];
            st.moore[r][c] = Some((ModuleId(*n), Status::Alive));
        }
        agents.insert(id, st);
    }
    let c = ctx(&phys, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: BTreeMap<(u32, u32), VecDeque<Payload>> = BTreeMap::new();
    let mut leaders = Vec::new();
    let mut starts: Vec<u32> = adj.keys().copied().collect();
    starts.shuffle(&mut rng);
    let push =
        |links: &mut BTreeMap<(u32, u32), VecDeque<Payload>>, src: u32, o: Output, leaders: &mut Vec<WaveTag>| {
            if let Some(t) = o.leader() {
                leaders.push(t);
            }
            for (d, p) in o.sends {
                if matches!(p, Payload::Wave(_) | Payload::Echo(_)) {
                    links.entry((src, d.0)).or_default().push_back(p);
                }
            }
        };
    // Starts interleave with deliveries, but a module always starts before
    // it handles its first message, as it does in the engine.
    let mut started = std::collections::BTreeSet::new();
    let mut start = |id: u32, agents: &mut BTreeMap<u32, AgentState>, links: &mut _, leaders: &mut _| {
        if started.insert(id) {
            let o = agents.get_mut(&id).unwrap().step(Input::Start, &c);
            push(links, id, o, leaders);
        }
    };
    let mut pending_starts = starts.into_iter();
    loop {
        if rng.gen_bool(0.5) {
            if let Some(id) = pending_starts.next() {
                start(id, &mut agents, &mut links, &mut leaders);
                continue;
            }
        }
        let busy: Vec<(u32, u32)> = links.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| *k).collect();
        let Some(&(s, d)) = busy.choose(&mut rng) else {
            match pending_starts.next() {
                Some(id) => {
                    start(id, &mut agents, &mut links, &mut leaders);
                    continue;
                }
                None => break,
            }
        };
        start(d, &mut agents, &mut links, &mut leaders);
        let p = links.get_mut(&(s, d)).unwrap().pop_front().unwrap();
        let o = agents.get_mut(&d).unwrap().step(Input::Deliver(msg(s, d, p)), &c);
        push(&mut links, d, o, &mut leaders);
    }
    leaders
}

/// Adjacency lists, optional candidate scores, and a seed for delivery order.
type Network = (BTreeMap<u32, Vec<u32>>, BTreeMap<u32, Option<i64>>, u64);

fn connected_graph() -> impl Strategy<Value = Network> {
    (2usize..9, any::<u64>())
        .prop_flat_map(|(n, seed)| {
            let scores = proptest::collection::vec(proptest::option::of(-6i64..0), n);
            (Just(n), Just(seed), scores)
        })
        .prop_map(|(n, seed, scores)| {
            // Random spanning tree plus a few chords, capped at degree 4.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut adj: BTreeMap<u32, Vec<u32>> = (1..=n as u32).map(|i| (i, vec![])).collect();
            let link = |adj: &mut BTreeMap<u32, Vec<u32>>, a: u32, b: u32| {
                if a != b && adj[&a].len() < 4 && adj[&b].len() < 4 && !adj[&a].contains(&b) {
                    adj.get_mut(&a).unwrap().push(b);
                    adj.get_mut(&b).unwrap().push(a);
                    true
                } else {
                    false
                }
            };
            for i in 2..=n as u32 {
                let mut tries = 0;
                loop {
                    let j = rng.gen_range(1..i);
                    if link(&mut adj, i, j) || tries > 50 {
                        break;
                    }
                    tries += 1;
                }
            }
            for _ in 0..n {
                let (a, b) = (rng.gen_range(1..=n as u32), rng.gen_range(1..=n as u32));
                link(&mut adj, a, b);
            }
            let scores = (1..=n as u32).zip(scores).collect();
            (adj, scores, seed)
        })
}

fn reachable(adj: &BTreeMap<u32, Vec<u32>>) -> bool {
    let mut seen = vec![1u32];
    let mut i = 0;
    while i < seen.len() {
        for n in &adj[&seen[i]] {
            if !seen.contains(n) {
                seen.push(*n);
            }
        }
        i += 1;
    }
    seen.len() == adj.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extinction_elects_exactly_the_best_candidate((adj, scores, seed) in connected_graph()) {
        prop_assume!(reachable(&adj));
        let leaders = run_election(&adj, &scores, seed);
        let best = scores
            .iter()
            .filter_map(|(id, s)| s.map(|s| WaveTag { epoch: 0, score: s, id: ModuleId(*id) }))
            .max();
        match best {
            Some(tag) => prop_assert_eq!(leaders, vec![tag]),
            None => prop_assert!(leaders.is_empty()),
        }
    }
}

#[test]
fn wave_tag_order() {
    let t = |epoch, score, id| WaveTag { epoch, score, id: ModuleId(id) };
    assert!(t(1, -9, 9) > t(0, 0, 1));
    assert!(t(0, -3, 9) > t(0, -4, 1));
    assert!(t(0, -3, 2) > t(0, -3, 5));
}
