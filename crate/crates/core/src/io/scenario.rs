//! Scenario files: one directive per line, `#` starts a comment.
//!
//! ```text
//! grid 8 4
//! input 0 0
//! output 5 0
//! module 1 0 0
//! module 2 1 0
//! seed 3
//! latency uniform 1 20
//! slide-rule single
//! at 40000 fail 2
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{ScenarioEvent, ScenarioEventKind, SimParams};
use crate::lattice::{is_connected, Adjacency, Configuration, Coord, Grid, ModuleId, ModuleRecord, Status};
use crate::motion::SlideRule;
use crate::network::LatencyModel;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub modules: Vec<ModuleRecord>,
    pub params: SimParams,
    pub events: Vec<ScenarioEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

fn err<T>(line: usize, reason: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, reason: reason.into() })
}

struct Line<'a> {
    no: usize,
    words: Vec<&'a str>,
}

impl Line<'_> {
    fn arity(&self, n: usize) -> Result<(), ParseError> {
        if self.words.len() != n + 1 {
            return err(self.no, format!("`{}` takes {n} argument(s)", self.words[0]));
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&self, i: usize) -> Result<T, ParseError> {
        let w = self.words[i];
        w.parse().map_err(|_| ParseError { line: self.no, reason: format!("bad number `{w}`") })
    }

    fn coord(&self, i: usize) -> Result<Coord, ParseError> {
        Ok(Coord::new(self.num(i)?, self.num(i + 1)?))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut grid: Option<(u32, u32)> = None;
    let mut input: Option<(Coord, usize)> = None;
    let mut output: Option<(Coord, usize)> = None;
    let mut modules: Vec<(ModuleRecord, usize)> = Vec::new();
    let mut params = SimParams::default();
    let mut events: Vec<(ScenarioEvent, usize)> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = body.split_whitespace().collect();
        let Some(&key) = words.first() else { continue };
        let l = Line { no, words };
        if key != "module" && key != "at" && !seen.insert(key) {
            return err(no, format!("duplicate `{key}`"));
        }
        match key {
            "grid" => {
                l.arity(2)?;
                let (w, h): (u32, u32) = (l.num(1)?, l.num(2)?);
                if w == 0 || h == 0 {
                    return err(no, "grid dimensions must be positive");
                }
                grid = Some((w, h));
            }
            "input" => {
                l.arity(2)?;
                input = Some((l.coord(1)?, no));
            }
            "output" => {
                l.arity(2)?;
                output = Some((l.coord(1)?, no));
            }
            "module" => {
                l.arity(3)?;
                let id: u32 = l.num(1)?;
                if id == 0 {
                    return err(no, "module ids must be positive");
                }
                modules.push((ModuleRecord { id: ModuleId(id), pos: l.coord(2)?, status: Status::Alive }, no));
            }
            "seed" => {
                l.arity(1)?;
                params.seed = l.num(1)?;
            }
            "latency" => {
                params.latency = match l.words.get(1).copied() {
                    Some("fixed") => {
                        l.arity(2)?;
                        LatencyModel::Fixed(l.num(2)?)
                    }
                    Some("uniform") => {
                        l.arity(3)?;
                        LatencyModel::Uniform(l.num(2)?, l.num(3)?)
                    }
                    _ => return err(no, "expected `latency fixed T` or `latency uniform A B`"),
                };
                if !params.latency.is_valid() {
                    return err(no, format!("invalid latency `{}`", params.latency));
                }
            }
            "pitch" | "speed" => {
                l.arity(1)?;
                let v: f64 = l.num(1)?;
                if !(v.is_finite() && v > 0.0) {
                    return err(no, format!("`{key}` must be positive"));
                }
                if key == "pitch" {
                    params.motion.pitch_mm = v;
                } else {
                    params.motion.speed_mm_s = v;
                }
            }
            "slide-rule" => {
                l.arity(1)?;
                params.motion.slide_rule = match l.words[1] {
                    "single" => SlideRule::SingleFlank,
                    "double" => SlideRule::DoubleFlank,
                    other => return err(no, format!("unknown slide rule `{other}`")),
                };
            }
            "round-timeout" | "max-ticks" => {
                l.arity(1)?;
                let v: u64 = l.num(1)?;
                if v == 0 {
                    return err(no, format!("`{key}` must be positive"));
                }
                if key == "round-timeout" {
                    params.round_timeout = v;
                } else {
                    params.max_ticks = v;
                }
            }
            "at" => {
                let at: u64 = match l.words.get(1) {
                    Some(_) => l.num(1)?,
                    None => return err(no, "`at` needs a tick"),
                };
                let kind = match l.words.get(2).copied() {
                    Some("set-output") => {
                        l.arity(4)?;
                        ScenarioEventKind::SetOutput(l.coord(3)?)
                    }
                    Some("fail") => {
                        l.arity(3)?;
                        ScenarioEventKind::Fail(ModuleId(l.num(3)?))
                    }
                    _ => return err(no, "expected `at T set-output X Y` or `at T fail ID`"),
                };
                if let Some((prev, _)) = events.last() {
                    if prev.at > at {
                        return err(no, "events must be sorted by tick");
                    }
                }
                events.push((ScenarioEvent { at, kind }, no));
            }
            other => return err(no, format!("unknown keyword `{other}`")),
        }
    }

    let last = text.lines().count().max(1);
    let Some((width, height)) = grid else { return err(last, "missing `grid`") };
    let Some((input, input_line)) = input else { return err(last, "missing `input`") };
    let Some((output, output_line)) = output else { return err(last, "missing `output`") };
    let grid = Grid { width, height, input, output };
    if !grid.contains(input) {
        return err(input_line, format!("input {input} is out of bounds"));
    }
    if !grid.contains(output) {
        return err(output_line, format!("output {output} is out of bounds"));
    }
    if modules.is_empty() {
        return err(last, "no modules");
    }
    let mut ids = BTreeSet::new();
    let mut cells = BTreeSet::new();
    for (m, no) in &modules {
        if !grid.contains(m.pos) {
            return err(*no, format!("module {} at {} is out of bounds", m.id, m.pos));
        }
        if !ids.insert(m.id) {
            return err(*no, format!("duplicate module id {}", m.id));
        }
        if !cells.insert(m.pos) {
            return err(*no, format!("duplicate position {}", m.pos));
        }
    }
    let config = Configuration::new(modules.iter().map(|(m, _)| *m)).expect("checked above");
    if !is_connected(&config, Adjacency::Four) {
        return err(modules[0].1, "initial modules are not 4-connected");
    }
    if !config.is_occupied(input) {
        return err(input_line, format!("input cell {input} holds no module"));
    }
    for (ev, no) in &events {
        match ev.kind {
            ScenarioEventKind::SetOutput(c) if !grid.contains(c) => {
                return err(*no, format!("set-output {c} is out of bounds"));
            }
            ScenarioEventKind::Fail(id) if !ids.contains(&id) => {
                return err(*no, format!("unknown module {id}"));
            }
            _ => {}
        }
    }
    Ok(Scenario {
        grid,
        modules: modules.into_iter().map(|(m, _)| m).collect(),
        params,
        events: events.into_iter().map(|(e, _)| e).collect(),
    })
}

/// Prints a scenario in the canonical directive order; parses back unchanged.
pub fn print_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let g = &s.grid;
    let p = &s.params;
    let _ = writeln!(out, "grid {} {}", g.width, g.height);
    let _ = writeln!(out, "input {} {}", g.input.x, g.input.y);
    let _ = writeln!(out, "output {} {}", g.output.x, g.output.y);
    for m in &s.modules {
        let _ = writeln!(out, "module {} {} {}", m.id, m.pos.x, m.pos.y);
    }
    let _ = writeln!(out, "seed {}", p.seed);
    match p.latency {
        LatencyModel::Fixed(t) => {
            let _ = writeln!(out, "latency fixed {t}");
        }
        LatencyModel::Uniform(a, b) => {
            let _ = writeln!(out, "latency uniform {a} {b}");
        }
    }
    let _ = writeln!(out, "pitch {}", p.motion.pitch_mm);
    let _ = writeln!(out, "speed {}", p.motion.speed_mm_s);
    let rule = match p.motion.slide_rule {
        SlideRule::SingleFlank => "single",
        SlideRule::DoubleFlank => "double",
    };
    let _ = writeln!(out, "slide-rule {rule}");
    let _ = writeln!(out, "round-timeout {}", p.round_timeout);
    let _ = writeln!(out, "max-ticks {}", p.max_ticks);
    for ev in &s.events {
        match ev.kind {
            ScenarioEventKind::SetOutput(c) => {
                let _ = writeln!(out, "at {} set-output {} {}", ev.at, c.x, c.y);
            }
            ScenarioEventKind::Fail(id) => {
                let _ = writeln!(out, "at {} fail {}", ev.at, id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "grid 4 4\ninput 0 0\noutput 3 0\nmodule 1 0 0\nseed 1\n";

    #[test]
    fn minimal_file_parses_with_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.grid.width, 4);
        assert_eq!(s.modules.len(), 1);
        assert_eq!(s.params.seed, 1);
        assert_eq!(s.params.round_timeout, 10_000);
        assert_eq!(s.params.max_ticks, 10_000_000);
        assert_eq!(s.params.latency, LatencyModel::Uniform(1, 20));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# demo\n\ngrid 4 4 # size\ninput 0 0\noutput 3 0\nmodule 1 0 0\n";
        assert!(parse_scenario(text).is_ok());
    }

    fn line_of(text: &str) -> usize {
        parse_scenario(text).unwrap_err().line
    }

    #[test]
    fn errors_cite_the_offending_line() {
        assert_eq!(line_of(&format!("{MINIMAL}module 2 0 0\n")), 6);
        assert_eq!(line_of(&format!("{MINIMAL}module 1 1 0\n")), 6);
        let oob = "grid 8 8\ninput 0 0\noutput 3 0\nmodule 1 0 0\nmodule 2 9 9\n";
        let e = parse_scenario(oob).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.reason.contains("out of bounds"));
        assert_eq!(line_of(&format!("{MINIMAL}grid 5 5\n")), 6);
        assert_eq!(line_of(&format!("{MINIMAL}teleport 1\n")), 6);
        assert_eq!(line_of(&format!("{MINIMAL}at 5 fail 9\n")), 6);
        assert_eq!(line_of(&format!("{MINIMAL}at 9 fail 1\nat 5 fail 1\n")), 7);
        assert_eq!(line_of(&format!("{MINIMAL}module 2 2 2\n")), 4);
        assert_eq!(line_of("grid 4 4\ninput 0 1\noutput 3 0\nmodule 1 0 0\n"), 2);
    }

    #[test]
    fn full_file_round_trips() {
        let text = "grid 8 4\ninput 0 0\noutput 5 0\nmodule 1 0 0\nmodule 2 1 0\nseed 3\nlatency fixed 7\n\
                    pitch 12.5\nspeed 10\nslide-rule double\nround-timeout 500\nmax-ticks 90000\n\
                    at 10 set-output 4 1\nat 20 fail 2\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(print_scenario(&s), text);
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(
            w in 2u32..12,
            h in 1u32..12,
            n in 1usize..8,
            seed in any::<u64>(),
            fixed in any::<bool>(),
            lat in 1u64..50,
            double in any::<bool>(),
            timeout in 1u64..100_000,
        ) {
            let n = n.min(w as usize);
            let modules = (0..n)
                .map(|i| ModuleRecord { id: ModuleId(i as u32 + 1), pos: Coord::new(i as i32, 0), status: Status::Alive })
                .collect();
            let mut params = SimParams { seed, round_timeout: timeout, ..SimParams::default() };
            params.latency = if fixed { LatencyModel::Fixed(lat) } else { LatencyModel::Uniform(lat, lat + 3) };
            params.motion.slide_rule = if double { SlideRule::DoubleFlank } else { SlideRule::SingleFlank };
            let s = Scenario {
                grid: Grid { width: w, height: h, input: Coord::new(0, 0), output: Coord::new(w as i32 - 1, h as i32 - 1) },
                modules,
                params,
                events: vec![ScenarioEvent { at: 5, kind: ScenarioEventKind::Fail(ModuleId(1)) }],
            };
            prop_assert_eq!(parse_scenario(&print_scenario(&s)).unwrap(), s);
        }
    }
}
