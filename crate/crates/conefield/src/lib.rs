//! File formats, SVG output and the command-line driver around `conefield_core`.

pub mod formats;
pub mod paths;
pub mod run;
pub mod svg;

pub use run::{run, FieldChoice, Mode, RunConfig, RunError, RunOutcome, RunReport, Source};
