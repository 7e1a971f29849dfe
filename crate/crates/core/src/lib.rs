//! Deterministic simulator of a distributed modular conveyor.
//!
//! Cubic lattice modules slide along each other on a grid. Starting from a
//! connected blob around an input cell, they elect leaders over
//! neighbor-to-neighbor messages and move a few modules at a time until an
//! occupied chain joins the input to the output.
//!
//! ```
//! use dili::io::parse_scenario;
//!
//! let scenario = parse_scenario(
//!     "grid 4 4\ninput 0 0\noutput 3 0\nmodule 1 0 0\nmodule 2 1 0\nmodule 3 0 1\nmodule 4 1 1\nseed 7\n",
//! )
//! .unwrap();
//! let out = dili::engine::run(&scenario, &scenario.params).unwrap();
//! assert!(out.metrics.goal_reached);
//! assert!(out.metrics.motions >= 6);
//! ```

pub mod agents;
pub mod engine;
pub mod io;
pub mod lattice;
pub mod motion;
pub mod network;
pub mod oracle;

pub use engine::{run, run_scripted, Metrics, RunOutput, SimParams};
pub use io::{parse_scenario, Scenario};
pub use lattice::{Configuration, Coord, Grid, ModuleId, Status};
pub use motion::{Dir, Legs, Maneuver, SlideRule};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/motion.md")]
    mod motion {}
    #[doc = include_str!("../../../book/src/election.md")]
    mod election {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
}
