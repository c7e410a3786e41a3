//! Cotangent stiffness and lumped mass of a small sheet.

use nalgebra::DMatrix;
use syncdiff::spectral::build_operators;
use syncdiff::synthetic::plane_grid;

fn main() -> syncdiff::Result<()> {
    let mesh = plane_grid(6, 5, 1.0, 0.8);
    let ops = build_operators(&mesh)?;
    let n = ops.n();

    let ones = DMatrix::from_element(n, 1, 1.0);
    println!("n = {n}, nnz(L) = {}", ops.stiffness.nnz());
    println!("|L 1|_inf = {:.2e}", ops.stiffness_mul(&ones).amax());
    println!("sum of mass = {:.6} (area {:.6})", ops.total_area(), mesh.total_area());

    // x is linear on a flat sheet, so its Dirichlet energy is the area
    let x = DMatrix::from_fn(n, 1, |i, _| mesh.vertices()[i][0]);
    let energy = x.dot(&ops.stiffness_mul(&x));
    println!("x^T L x = {energy:.6}");
    Ok(())
}
