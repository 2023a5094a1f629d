//! Compiles a data-bound SVG chart and a narration script into a
//! narration-synchronized animation timeline.

pub mod animation;
pub mod chart;
pub mod export;
pub mod linker;
pub mod narration;
pub mod scheduler;
