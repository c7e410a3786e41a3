//! Backward Euler against truncated spectral diffusion of a point source,
//! for growing basis sizes.

use nalgebra::DMatrix;
use syncdiff::spectral::{build_operators, diffuse_implicit, diffuse_spectral, eigendecompose};
use syncdiff::synthetic::icosphere;

fn main() -> syncdiff::Result<()> {
    let mesh = icosphere(2, 1.0);
    let ops = build_operators(&mesh)?;
    let n = ops.n();
    let mut u = DMatrix::zeros(n, 1);
    u[(0, 0)] = 1.0 / ops.mass[0];

    for t in [1e-3, 1e-2, 1e-1] {
        let implicit = diffuse_implicit(&ops, &u, t)?;
        let heat = ops.mass_mul(&implicit).sum();
        print!("t = {t:<6} heat {heat:.10}  spectral gap:");
        for k in [16, 64, 128, n] {
            let basis = eigendecompose(&ops, k)?;
            let spectral = diffuse_spectral(&basis, &u, t)?;
            print!(" k={k}: {:.3e}", (&spectral - &implicit).norm() / implicit.norm());
        }
        println!();
    }
    Ok(())
}
