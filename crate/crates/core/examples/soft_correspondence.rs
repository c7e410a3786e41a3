//! Row-softmax correspondences over cosine similarity and how the
//! temperature controls their spread.

use nalgebra::DMatrix;
use syncdiff::correspondence::{hard_from_soft, soft_correspondence};
use syncdiff::descriptors::compute_wks;
use syncdiff::synthetic::{generate_pair, BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::Shape;

fn unit_rows(e: DMatrix<f64>) -> DMatrix<f64> {
    let mut e = e;
    for mut row in e.row_iter_mut() {
        let norm = row.norm().max(1e-300);
        row /= norm;
    }
    e
}

fn main() -> syncdiff::Result<()> {
    let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 24, along: 14 }, 5);
    let pair = generate_pair(&spec)?;
    let m = Shape::new(pair.source.normalize_to_unit_area()?, 40)?;
    let n = Shape::new(pair.target.normalize_to_unit_area()?, 40)?;
    let em = unit_rows(compute_wks(&m.basis, 64)?.values);
    let en = unit_rows(compute_wks(&n.basis, 64)?.values);

    for tau in [1.0, 0.1, 0.01, 1e-3] {
        let soft = soft_correspondence(&em, &en, tau)?;
        let entropy: f64 = soft
            .pi
            .row_iter()
            .map(|r| -r.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
            .sum::<f64>()
            / soft.pi.nrows() as f64;
        let hard = hard_from_soft(&soft);
        let correct = hard
            .indices()
            .iter()
            .zip(pair.ground_truth.indices())
            .filter(|(a, b)| a == b)
            .count();
        println!("tau {tau:<6} mean row entropy {entropy:.3}  argmax correct {correct}/{}", m.n());
    }
    Ok(())
}
