//! Round-trips a mesh through OFF text and reports validation issues.
//!
//! `cargo run --example mesh_io [path.off|path.ply]`

use std::path::PathBuf;

use syncdiff::mesh::{read_off, validate_mesh, write_off};
use syncdiff::pipeline::read_mesh_file;
use syncdiff::synthetic::icosphere;

fn main() -> syncdiff::Result<()> {
    let mesh = match std::env::args().nth(1) {
        Some(path) => read_mesh_file(&PathBuf::from(path))?,
        None => icosphere(2, 1.0),
    };
    println!(
        "{} vertices, {} faces, area {:.6}",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.total_area()
    );

    let text = write_off(&mesh);
    let back = read_off(&text)?;
    println!("OFF round trip identical: {}", back == mesh);
    println!("content hash {}", &mesh.content_hash()[..16]);

    let issues = validate_mesh(&mesh);
    if issues.is_empty() {
        println!("no validation issues");
    }
    for issue in issues {
        println!("issue: {}", serde_json::to_string(&issue)?);
    }
    Ok(())
}
