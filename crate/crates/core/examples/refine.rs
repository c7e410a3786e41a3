//! Per-pair refinement of WKS features and its energy trace.
//!
//! `cargo run --release --example refine -- [iters] [trace.csv]`

use std::path::PathBuf;

use syncdiff::descriptors::compute_wks;
use syncdiff::energies::EnergyConfig;
use syncdiff::evaluation::{geodesic_error, map_smoothness};
use syncdiff::optimizer::{refine_pair, write_trace_csv, OptimConfig};
use syncdiff::synthetic::{generate_pair, BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::Shape;

fn main() -> syncdiff::Result<()> {
    let iters = std::env::args().nth(1).map_or(20, |s| s.parse().expect("iteration count"));
    let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 24, along: 14 }, 4);
    let pair = generate_pair(&spec)?;
    let m = Shape::new(pair.source.normalize_to_unit_area()?, 32)?;
    let n = Shape::new(pair.target.normalize_to_unit_area()?, 32)?;
    let dm = compute_wks(&m.basis, 16)?.values;
    let dn = compute_wks(&n.basis, 16)?.values;

    let energy = EnergyConfig::near_isometric();
    for max_iters in [0, iters] {
        let optim = OptimConfig { max_iters, ..OptimConfig::default() };
        let result = refine_pair(&m, &n, &dm, &dn, &energy, &optim)?;
        let err = geodesic_error(&result.map_mn, &pair.ground_truth, &n.mesh)?;
        let smooth = map_smoothness(&result.map_nm, &m.mesh, &n.ops)?;
        println!("{max_iters:>3} iterations: geo x100 {:.3}, smoothness {smooth:.4}", err.mean_x100());
        if let (Some(first), Some(last)) = (result.trace.first(), result.trace.last()) {
            println!("     L_total {:.5e} -> {:.5e} over {} steps", first.l_total, last.l_total, result.trace.len() - 1);
        }
        if max_iters > 0 {
            if let Some(path) = std::env::args().nth(2) {
                write_trace_csv(&result.trace, &PathBuf::from(path))?;
            }
        }
    }
    Ok(())
}
