//! Experiment campaigns, file formats and the command-line front end for
//! density-valued emulators built on [`densemu_core`].

pub mod campaign;
pub mod config;
mod error;
pub mod io;
pub mod table;

pub use campaign::{run, Outcome, RunOptions};
pub use config::{CampaignConfig, Kind};
pub use densemu_core as core;
pub use error::{Error, Result};
pub use table::ResultTable;
