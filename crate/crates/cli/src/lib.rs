//! File formats, configuration, reports and commands around `psp_core`.

pub mod ablation;
pub mod commands;
pub mod config;
pub mod io;
pub mod report;
