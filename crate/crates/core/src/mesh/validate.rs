use std::collections::HashMap;

use serde::Serialize;

use super::TriangleMesh;

/// Faces whose area, relative to the total surface area, falls below this are degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ValidationIssue {
    EmptyMesh,
    RepeatedIndex { face: usize },
    DegenerateFace { face: usize, relative_area: f64 },
    DuplicateFace { face: usize, duplicate_of: usize },
    NonManifoldEdge { a: usize, b: usize, faces: usize },
    DisconnectedComponents { count: usize },
}

/// Returns every invariant violation found; an empty report means the mesh is usable.
pub fn validate_mesh(mesh: &TriangleMesh) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if mesh.n_vertices() == 0 || mesh.n_faces() == 0 {
        issues.push(ValidationIssue::EmptyMesh);
        return issues;
    }

    let total = mesh.total_area();
    let mut by_vertex_set: HashMap<[usize; 3], usize> = HashMap::new();
    let mut duplicated = vec![false; mesh.n_faces()];
    for (f, face) in mesh.faces().iter().enumerate() {
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            issues.push(ValidationIssue::RepeatedIndex { face: f });
            continue;
        }
        let rel = if total > 0.0 { mesh.face_area(f) / total } else { 0.0 };
        if rel < DEGENERATE_AREA {
            issues.push(ValidationIssue::DegenerateFace {
                face: f,
                relative_area: rel,
            });
        }
        let mut key = *face;
        key.sort_unstable();
        if let Some(&first) = by_vertex_set.get(&key) {
            duplicated[f] = true;
            duplicated[first] = true;
            issues.push(ValidationIssue::DuplicateFace {
                face: f,
                duplicate_of: first,
            });
        } else {
            by_vertex_set.insert(key, f);
        }
    }

    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        for (i, j) in [(a, b), (b, c), (c, a)] {
            if i != j {
                edge_faces.entry((i.min(j), i.max(j))).or_default().push(f);
            }
        }
    }
    let mut bad: Vec<ValidationIssue> = edge_faces
        .iter()
        .filter(|(_, fs)| fs.len() > 2 || (fs.len() == 2 && duplicated[fs[0]] && duplicated[fs[1]]))
        .map(|(&(a, b), fs)| ValidationIssue::NonManifoldEdge {
            a,
            b,
            faces: fs.len(),
        })
        .collect();
    bad.sort_by_key(|i| match i {
        ValidationIssue::NonManifoldEdge { a, b, .. } => (*a, *b),
        _ => (0, 0),
    });
    issues.extend(bad);

    let components = connected_components(mesh).1;
    if components > 1 {
        issues.push(ValidationIssue::DisconnectedComponents { count: components });
    }
    issues
}

/// Component label per vertex (isolated vertices get their own component) and the count.
pub(crate) fn connected_components(mesh: &TriangleMesh) -> (Vec<usize>, usize) {
    let n = mesh.n_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &[a, b, c] in mesh.faces() {
        for (i, j) in [(a, b), (b, c)] {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut root_label = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        let l = *root_label.entry(r).or_insert_with(|| {
            count += 1;
            count - 1
        });
        label[v] = l;
    }
    (label, count)
}
