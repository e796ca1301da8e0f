//! Shared helpers for integration tests.
#![allow(dead_code)]

pub mod oracle;
pub mod props;

use std::path::PathBuf;

use storybench::parser::parse_program;
use storybench::story::Story;
use storybench::syntax::Program;

/// Absolute path of a file under `tests/data/`.
pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Absolute path of a file under the repository's `worlds/` directory.
pub fn world_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../worlds").join(name)
}

pub fn load_program(path: &PathBuf) -> Program {
    let src = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    parse_program(&src).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

pub fn load_story(path: &PathBuf, world: &Program) -> Story {
    let parsed = load_program(path);
    Story::from_program(&parsed, world)
        .unwrap_or_else(|e| panic!("loading story {}: {e}", path.display()))
}
