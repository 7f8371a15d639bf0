//! File formats, audio IO and the command pipeline around
//! [`timbrediff_core`].

pub mod dataset;
pub mod error;
pub mod formats;
pub mod fsutil;
pub mod model;
pub mod pipeline;
pub mod tdce;
pub mod wav;

pub use error::{Error, Result};
pub use timbrediff_core as core;
