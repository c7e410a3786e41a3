//! The synthetic pair kinds, written to disk with ground truth.
//!
//! `cargo run --example synthetic_pairs -- out_dir`

use std::path::PathBuf;

use syncdiff::pipeline::write_synthetic_pair;
use syncdiff::synthetic::{BaseMesh, PairKind, SyntheticPairSpec};

fn main() -> syncdiff::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic_pairs".into()));
    let cylinder = BaseMesh::Cylinder { around: 30, along: 16 };
    let sphere = BaseMesh::Sphere { subdivisions: 2 };
    for (kind, base) in [
        (PairKind::Identity, sphere),
        (PairKind::Permuted, sphere),
        (PairKind::RigidNoise, sphere),
        (PairKind::IsometricBend, cylinder),
        (PairKind::TopologicalGlue, cylinder),
    ] {
        let spec = SyntheticPairSpec::new(kind, base, 0);
        let dir = out.join(serde_json::to_value(kind)?.as_str().unwrap_or("pair"));
        let pair = write_synthetic_pair(&spec, &dir)?;
        let edges = pair.source.edges();
        let worst = edges
            .iter()
            .map(|&(a, b)| {
                let (ta, tb) = (pair.ground_truth.indices()[a], pair.ground_truth.indices()[b]);
                if ta == tb {
                    return 1.0;
                }
                (pair.target.edge_length(ta, tb) / pair.source.edge_length(a, b) - 1.0).abs()
            })
            .fold(0.0, f64::max);
        println!(
            "{kind:?}: {} -> {} vertices, max relative edge change {worst:.4}, written to {}",
            pair.source.n_vertices(),
            pair.target.n_vertices(),
            dir.display()
        );
    }
    Ok(())
}
