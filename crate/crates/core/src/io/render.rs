//! Text frames of a configuration, and replay of a trace into frames.

use std::fmt::Write as _;

use super::scenario::Scenario;
use super::trace::{Record, TraceEvent};
use crate::lattice::{Configuration, Coord, ModuleId, Status};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overlay {
    pub leader: Option<ModuleId>,
    pub highlight: Vec<Coord>,
}

/// One row per grid row, north first. Glyph precedence on a cell:
/// leader `L`, failed `X`, alive `#`, input `I`, output `O`, else `.`.
/// Highlighted empty cells print as `*`.
pub fn render_ascii(scenario: &Scenario, config: &Configuration, overlay: &Overlay) -> String {
    render_with_output(scenario, scenario.grid.output, config, overlay)
}

fn render_with_output(scenario: &Scenario, output: Coord, config: &Configuration, overlay: &Overlay) -> String {
    let g = &scenario.grid;
    let mut out = String::with_capacity(((g.width + 1) * g.height) as usize);
    for y in (0..g.height as i32).rev() {
        for x in 0..g.width as i32 {
            let c = Coord::new(x, y);
            let glyph = match config.at(c) {
                Some(r) if Some(r.id) == overlay.leader => 'L',
                Some(r) if r.status == Status::Failed => 'X',
                Some(_) => '#',
                None if c == g.input => 'I',
                None if c == output => 'O',
                None if overlay.highlight.contains(&c) => '*',
                None => '.',
            };
            out.push(glyph);
        }
        out.push('\n');
    }
    out
}

pub fn render_svg(scenario: &Scenario, config: &Configuration, overlay: &Overlay) -> String {
    const CELL: i32 = 20;
    let g = &scenario.grid;
    let (w, h) = (g.width as i32 * CELL, g.height as i32 * CELL);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="#fafafa"/>"##);
    for c in g.cells() {
        let (px, py) = (c.x * CELL, (g.height as i32 - 1 - c.y) * CELL);
        let fill = match config.at(c) {
            Some(r) if Some(r.id) == overlay.leader => "#d9822b",
            Some(r) if r.status == Status::Failed => "#b33a3a",
            Some(_) => "#3a6ea5",
            None if c == g.input => "#9fd49f",
            None if c == g.output => "#f2d16b",
            None => continue,
        };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            px + 1,
            py + 1,
            CELL - 2,
            CELL - 2
        );
    }
    out.push_str("</svg>\n");
    out
}

/// A configuration snapshot after a committed maneuver.
#[derive(Clone, Debug)]
pub struct Frame {
    pub at: u64,
    pub config: Configuration,
    pub output: Coord,
    pub leader: Option<ModuleId>,
}

/// Replays MOVE, EVENT and LEADER records; yields the initial state and one
/// frame per completed maneuver.
pub fn replay_frames(scenario: &Scenario, trace: &[TraceEvent]) -> Vec<Frame> {
    let mut config = Configuration::new(scenario.modules.iter().copied()).unwrap_or_default();
    let mut output = scenario.grid.output;
    let mut leader = None;
    let mut frames = vec![Frame { at: 0, config: config.clone(), output, leader }];
    for ev in trace {
        match &ev.record {
            Record::Leader { id, .. } => leader = Some(*id),
            Record::SetOutput { output: o, .. } => output = *o,
            Record::Fail { id } => {
                let _ = config.set_status(*id, Status::Failed);
            }
            Record::Move { id, to, leg, legs, .. } => {
                let _ = config.relocate(*id, *to);
                if *leg == legs.count() {
                    frames.push(Frame { at: ev.at, config: config.clone(), output, leader });
                }
            }
            _ => {}
        }
    }
    frames
}

pub fn render_frame(scenario: &Scenario, frame: &Frame) -> String {
    let overlay = Overlay { leader: frame.leader, highlight: Vec::new() };
    render_with_output(scenario, frame.output, &frame.config, &overlay)
}
