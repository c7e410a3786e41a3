//! Laplace-Beltrami eigenpairs, checked against the dense solver, and the
//! on-disk cache.

use syncdiff::pipeline::prepare_shape;
use syncdiff::spectral::{build_operators, dense_generalized_eigen, eigendecompose};
use syncdiff::synthetic::{icosphere, jittered};

fn main() -> syncdiff::Result<()> {
    let mesh = jittered(&icosphere(2, 1.0), 0.05, 7).normalize_to_unit_area()?;
    let ops = build_operators(&mesh)?;
    let k = 16;

    let basis = eigendecompose(&ops, k)?;
    let dense = dense_generalized_eigen(&ops, k)?;
    for i in 0..k {
        println!(
            "lambda_{i:<2} = {:>10.4}  dense {:>10.4}  residual {:.1e}",
            basis.eigenvalues[i], dense.eigenvalues[i], basis.residuals[i]
        );
    }

    let gram = basis.project(&basis.eigenvectors);
    let off = (gram - nalgebra::DMatrix::identity(k, k)).amax();
    println!("|Phi^T M Phi - I|_max = {off:.1e}");

    let dir = std::env::temp_dir().join("syncdiff-example-cache");
    let first = prepare_shape(&mesh, k, Some(&dir))?;
    let second = prepare_shape(&mesh, k, Some(&dir))?;
    println!("cache: {:?} then {:?} in {}", first.cache, second.cache, dir.display());
    Ok(())
}
