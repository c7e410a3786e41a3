//! HKS and WKS on a shape and its rigidly moved copy.
//!
//! `cargo run --example descriptors -- [out.csv]` also writes the WKS table.

use std::path::PathBuf;

use syncdiff::descriptors::{compute_hks, compute_wks, hks_times};
use syncdiff::synthetic::{icosphere, jittered, random_rotation};
use syncdiff::Shape;
use rand::SeedableRng;

fn main() -> syncdiff::Result<()> {
    let mesh = jittered(&icosphere(2, 1.0), 0.1, 1).normalize_to_unit_area()?;
    let rotation = random_rotation(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3));
    let moved = mesh.transformed(&rotation, 1.0, [0.3, -1.0, 2.0]);

    let a = Shape::new(mesh, 40)?;
    let b = Shape::new(moved, 40)?;
    let times = hks_times(&a.basis, 8)?;
    println!("HKS times {:.3e} .. {:.3e}", times[0], times[times.len() - 1]);

    let hks_gap = (compute_hks(&a.basis, 8)?.values - compute_hks(&b.basis, 8)?.values).amax();
    let wks = compute_wks(&a.basis, 32)?;
    let wks_gap = (&wks.values - compute_wks(&b.basis, 32)?.values).amax();
    println!("rigid motion changes HKS by {hks_gap:.1e}, WKS by {wks_gap:.1e}");

    if let Some(path) = std::env::args().nth(1) {
        wks.write_csv(&PathBuf::from(&path))?;
        println!("wrote {path}");
    }
    Ok(())
}
