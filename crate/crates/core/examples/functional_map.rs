//! Functional map between a bent sheet pair from WKS, decoded to points.

use syncdiff::correspondence::{fmap_to_pointwise, pointwise_to_fmap, Pointwise};
use syncdiff::descriptors::compute_wks;
use syncdiff::evaluation::geodesic_error;
use syncdiff::pipeline::descriptor_fmaps;
use syncdiff::synthetic::{generate_pair, BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::Shape;

fn main() -> syncdiff::Result<()> {
    let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 30, along: 16 }, 2);
    let pair = generate_pair(&spec)?;
    let m = Shape::new(pair.source.normalize_to_unit_area()?, 40)?;
    let n = Shape::new(pair.target.normalize_to_unit_area()?, 40)?;

    let dm = compute_wks(&m.basis, 64)?.values;
    let dn = compute_wks(&n.basis, 64)?.values;
    let (_, c_nm) = descriptor_fmaps(&m, &n, &dm, &dn, 1e-3)?;
    let truth = pointwise_to_fmap(Pointwise::Hard(&pair.ground_truth), &m.basis, &n.basis)?;
    println!(
        "|C - C_gt|_F / |C_gt|_F = {:.3}",
        (&c_nm.matrix - &truth.matrix).norm() / truth.matrix.norm()
    );

    let map = fmap_to_pointwise(&c_nm, &m.basis, &n.basis)?;
    let err = geodesic_error(&map, &pair.ground_truth, &n.mesh)?;
    println!("decoded map: mean geodesic error x100 = {:.3}", err.mean_x100());
    Ok(())
}
