//! Regenerates the oracle fixtures: `gen-fixtures [DIR]`.

use std::path::PathBuf;
use std::process::ExitCode;

fn main() -> ExitCode {
    let dir = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/v1")
    });
    match wavecatch_oracles::write_fixtures(&dir) {
        Ok(n) => {
            println!("wrote {n} fixtures to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
