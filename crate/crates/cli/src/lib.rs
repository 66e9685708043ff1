//! Library surface of the `denseblock` CLI: run configuration, manifest
//! handling, and the file-mediated pipeline stages. The binary in `main.rs`
//! is a thin argument-parsing layer over these.

pub mod config;
pub mod manifest;
pub mod stages;
