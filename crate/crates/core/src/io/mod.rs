//! External formats: scenarios, traces, frames and metrics reports.

pub mod render;
pub mod scenario;
pub mod trace;

pub use render::{render_ascii, render_frame, render_svg, replay_frames, Frame, Overlay};
pub use scenario::{parse_scenario, print_scenario, ParseError, Scenario};
pub use trace::{read_trace, write_trace, DropReason, Header, Record, TraceError, TraceEvent};

use crate::engine::Metrics;

/// `key=value` lines, keys sorted.
pub fn metrics_report(m: &Metrics) -> String {
    let path = m.final_path_len.map_or_else(|| "-".to_string(), |n| n.to_string());
    let mut lines = [
        format!("epochs={}", m.epochs),
        format!("final_path_len={path}"),
        format!("goal_reached={}", m.goal_reached),
        format!("maneuvers={}", m.maneuvers),
        format!("messages_delivered={}", m.messages_delivered),
        format!("messages_dropped={}", m.messages_dropped),
        format!("messages_sent={}", m.messages_sent),
        format!("motions={}", m.motions),
        format!("simtime_ms={}", m.simtime_ms),
    ];
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_sorted_and_complete() {
        let r = metrics_report(&Metrics::default());
        assert!(r.contains("motions=0\n"));
        assert!(r.contains("simtime_ms=0\n"));
        assert!(r.find("epochs=").unwrap() < r.find("motions=").unwrap());
        let keys: Vec<&str> = r.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys.len(), 9);
    }
}
