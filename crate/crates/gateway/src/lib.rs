//! Runnable side of lapaware: the fixed-rate simulation loop, the WebSocket
//! protocol spoken with the trainer UI, and the `lapaware` command line.

pub mod cli;
pub mod report;
pub mod server;
pub mod wire;
