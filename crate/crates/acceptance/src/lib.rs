//! Fixtures shared by the acceptance suite.

use std::path::{Path, PathBuf};

use ids_core::dataset::write_nslkdd;
use ids_core::synth::{generate, SynthConfig};

/// Directory holding `KDDTrain+.txt` and `KDDTest+.txt`: `$NSLKDD_DIR`, or
/// `data/nsl-kdd` under the workspace root.
pub fn nslkdd_dir() -> PathBuf {
    std::env::var_os("NSLKDD_DIR").map(PathBuf::from).unwrap_or_else(|| {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
        root.canonicalize().unwrap_or(root).join("data/nsl-kdd")
    })
}

/// Writes a synthetic NSL-KDD-format file.
pub fn write_synthetic(path: &Path, rows: usize, seed: u64) -> std::io::Result<()> {
    let ds = generate(&SynthConfig {
        rows,
        seed,
        ..Default::default()
    })
    .map_err(std::io::Error::other)?;
    let mut buf = Vec::new();
    write_nslkdd(&mut buf, &ds).map_err(std::io::Error::other)?;
    std::fs::write(path, buf)
}
