//! Session logs: append-only NDJSON records, scoring input and replay.

mod hash;
mod record;
mod replay;

pub use hash::*;
pub use record::*;
pub use replay::*;
