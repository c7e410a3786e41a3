//! Edge-graph geodesic distances on a sphere against the exact great circle.

use syncdiff::mesh::geodesic_distances;
use syncdiff::synthetic::icosphere;

fn main() -> syncdiff::Result<()> {
    for level in 1..=4 {
        let mesh = icosphere(level, 1.0);
        let field = geodesic_distances(&mesh, 0)?;
        let p0 = mesh.vertices()[0];
        let worst = mesh
            .vertices()
            .iter()
            .zip(&field.distances)
            .map(|(p, d)| {
                let cos = (p[0] * p0[0] + p[1] * p0[1] + p[2] * p0[2]).clamp(-1.0, 1.0);
                (d - cos.acos()) / std::f64::consts::PI
            })
            .fold(0.0, f64::max);
        println!("level {level}: n = {:>5}, worst overestimate {:.2}% of pi", mesh.n_vertices(), 100.0 * worst);
    }
    Ok(())
}
