//! Files, transcripts and the command line around `fedsov-core`.

pub mod cli;
pub mod files;
pub mod ops;
