//! Energy breakdown for a ground-truth map and for a shuffled one.

use syncdiff::correspondence::{pointwise_to_fmap, HardCorrespondence, Pointwise};
use syncdiff::energies::{draw_probes, l_total, EnergyConfig, MapSet, Regulariser};
use syncdiff::synthetic::{generate_pair, BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::Shape;

fn inverse(map: &HardCorrespondence) -> HardCorrespondence {
    let mut inv = vec![0; map.n_target()];
    for (i, &j) in map.indices().iter().enumerate() {
        inv[j] = i;
    }
    HardCorrespondence::new(inv, map.n_source()).unwrap()
}

fn maps(m: &Shape, n: &Shape, mn: &HardCorrespondence) -> syncdiff::Result<MapSet> {
    let nm = inverse(mn);
    Ok(MapSet {
        pi_mn: mn.to_dense(),
        pi_nm: nm.to_dense(),
        c_nm: pointwise_to_fmap(Pointwise::Hard(mn), &m.basis, &n.basis)?.matrix,
        c_mn: pointwise_to_fmap(Pointwise::Hard(&nm), &n.basis, &m.basis)?.matrix,
    })
}

fn main() -> syncdiff::Result<()> {
    let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 20, along: 12 }, 1);
    let pair = generate_pair(&spec)?;
    let m = Shape::new(pair.source.normalize_to_unit_area()?, 30)?;
    let n = Shape::new(pair.target.normalize_to_unit_area()?, 30)?;

    let mut shifted = pair.ground_truth.indices().to_vec();
    shifted.rotate_left(7);
    let wrong = HardCorrespondence::new(shifted, n.n())?;

    for regulariser in [Regulariser::SyncDiffusion, Regulariser::Cycle, Regulariser::Dirichlet, Regulariser::Kernel] {
        let config = EnergyConfig { regulariser, ..EnergyConfig::default() };
        let probes = draw_probes(&config, &m, &n, config.seed)?;
        for (label, map) in [("truth", &pair.ground_truth), ("shifted", &wrong)] {
            let (b, _) = l_total(&m, &n, &maps(&m, &n, map)?, &probes, &config, false)?;
            println!(
                "{regulariser:?} {label:<8} reg {:.4e} couple {:.4e} struct {:.4e} total {:.4e}",
                b.l_diff, b.l_couple, b.l_struct, b.l_total
            );
        }
    }

    let config = EnergyConfig::default();
    let probes = draw_probes(&config, &m, &n, 0)?;
    let (b, _) = l_total(&m, &n, &maps(&m, &n, &pair.ground_truth)?, &probes, &config, false)?;
    println!("{}", serde_json::to_string(&b.per_time_terms[..3])?);
    Ok(())
}
