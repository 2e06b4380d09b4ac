//! Command-line front end: body specs in, JSON or CSV reports out.

pub mod commands;
pub mod input;
pub mod output;
pub mod verify;
