//! Prompt-session server, synchronizing client SDK and CLI for interactive
//! 3D segmentation. The data model and reference segmenter live in
//! [`promptseg_core`].

pub mod cli;
pub mod client;
pub mod io;
pub mod nifti;
pub mod phantom;
pub mod script;
pub mod server;
pub mod wire;

pub use promptseg_core as core;
