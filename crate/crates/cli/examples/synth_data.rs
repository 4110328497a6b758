//! Writes synthetic train/test files in the NSL-KDD text format.
//!
//! cargo run -p idsbench --example synth_data -- OUT_DIR [TRAIN_ROWS] [TEST_ROWS]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ids_core::dataset::write_nslkdd;
use ids_core::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().ok_or("usage: synth_data OUT_DIR [TRAIN_ROWS] [TEST_ROWS]")?);
    let train_rows: usize = args.next().map_or(Ok(20_000), |s| s.parse())?;
    let test_rows: usize = args.next().map_or(Ok(4_000), |s| s.parse())?;
    std::fs::create_dir_all(&dir)?;
    for (name, rows, seed) in [("KDDTrain+.txt", train_rows, 1), ("KDDTest+.txt", test_rows, 2)] {
        let ds = generate(&SynthConfig {
            rows,
            seed,
            ..Default::default()
        })?;
        write_nslkdd(BufWriter::new(File::create(dir.join(name))?), &ds)?;
        println!("wrote {} rows to {}", rows, dir.join(name).display());
    }
    Ok(())
}
