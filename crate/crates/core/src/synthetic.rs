//! Synthetic shape pairs with known ground-truth correspondences.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correspondence::HardCorrespondence;
use crate::error::{Error, Result};
use crate::mesh::{Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Identity,
    Permuted,
    RigidNoise,
    IsometricBend,
    TopologicalGlue,
}

impl std::str::FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => PairKind::Identity,
            "permuted" => PairKind::Permuted,
            "rigid_noise" => PairKind::RigidNoise,
            "isometric_bend" => PairKind::IsometricBend,
            "topological_glue" => PairKind::TopologicalGlue,
            other => return Err(Error::InvalidArgument(format!("unknown pair kind '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BaseMesh {
    Sphere { subdivisions: u32 },
    Plane { nx: usize, ny: usize },
    /// Developable sheet rolled onto a circular arc; `around` samples along
    /// the arc, `along` samples along the generators.
    Cylinder { around: usize, along: usize },
}

/// `sphere:<subdivisions>`, `plane:<nx>x<ny>` or `cylinder:<around>x<along>`.
impl std::str::FromStr for BaseMesh {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse base mesh '{s}'"));
        let (shape, size) = s.split_once(':').ok_or_else(bad)?;
        let pair = || -> Result<(usize, usize)> {
            let (a, b) = size.split_once('x').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        Ok(match shape {
            "sphere" => BaseMesh::Sphere {
                subdivisions: size.parse().map_err(|_| bad())?,
            },
            "plane" => {
                let (nx, ny) = pair()?;
                BaseMesh::Plane { nx, ny }
            }
            "cylinder" => {
                let (around, along) = pair()?;
                BaseMesh::Cylinder { around, along }
            }
            _ => return Err(bad()),
        })
    }
}

impl std::fmt::Display for BaseMesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseMesh::Sphere { subdivisions } => write!(f, "sphere:{subdivisions}"),
            BaseMesh::Plane { nx, ny } => write!(f, "plane:{nx}x{ny}"),
            BaseMesh::Cylinder { around, along } => write!(f, "cylinder:{around}x{along}"),
        }
    }
}

impl BaseMesh {
    pub fn build(&self) -> Result<TriangleMesh> {
        match *self {
            BaseMesh::Sphere { subdivisions } if subdivisions <= 6 => Ok(icosphere(subdivisions, 1.0)),
            BaseMesh::Plane { nx, ny } if nx >= 2 && ny >= 2 => Ok(plane_grid(nx, ny, 1.0, 1.0)),
            BaseMesh::Cylinder { around, along } if around >= 3 && along >= 2 => {
                Ok(rolled_sheet(around, along, &|_| 0.5 * PI))
            }
            other => Err(Error::InvalidArgument(format!("invalid base mesh {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPairSpec {
    pub kind: PairKind,
    pub base: BaseMesh,
    /// Vertex jitter in units of the mean edge length (breaks extrinsic and intrinsic symmetry).
    pub jitter: f64,
    /// Relative amplitude of the curvature change for the bending kinds.
    pub bend: f64,
    /// Position noise in units of the mean edge length: Gaussian sigma for
    /// rigid_noise, per-coordinate uniform bound for the bending kinds.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticPairSpec {
    pub fn new(kind: PairKind, base: BaseMesh, seed: u64) -> Self {
        SyntheticPairSpec {
            kind,
            base,
            jitter: match kind {
                PairKind::Permuted | PairKind::RigidNoise => 0.15,
                _ => 0.0,
            },
            bend: if kind == PairKind::TopologicalGlue { 0.15 } else { 0.5 },
            noise: match kind {
                PairKind::RigidNoise => 0.02,
                PairKind::IsometricBend | PairKind::TopologicalGlue => 0.0025,
                _ => 0.0,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub source: TriangleMesh,
    pub target: TriangleMesh,
    /// Source vertex `i` corresponds to target vertex `ground_truth[i]`.
    pub ground_truth: HardCorrespondence,
}

pub fn generate_pair(spec: &SyntheticPairSpec) -> Result<SyntheticPair> {
    for (name, v) in [("jitter", spec.jitter), ("bend", spec.bend), ("noise", spec.noise)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bending = matches!(spec.kind, PairKind::IsometricBend | PairKind::TopologicalGlue);
    if bending && !matches!(spec.base, BaseMesh::Cylinder { .. }) {
        return Err(Error::InvalidArgument("bending pairs need a cylinder base".into()));
    }
    if spec.bend >= 1.0 {
        return Err(Error::InvalidArgument("bend amplitude must be < 1".into()));
    }

    let base = spec.base.build()?;
    let base = if spec.jitter > 0.0 {
        jittered(&base, spec.jitter, rng.gen())
    } else {
        base
    };
    let n = base.n_vertices();
    let mut perm: Vec<usize> = (0..n).collect();

    let (source, target) = match spec.kind {
        PairKind::Identity => (base.clone(), base),
        PairKind::Permuted => {
            perm.shuffle(&mut rng);
            (base.clone(), base.permuted(&perm)?)
        }
        PairKind::RigidNoise => {
            perm.shuffle(&mut rng);
            let rotation = random_rotation(&mut rng);
            let translation = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
            let sigma = spec.noise * mean_edge_length(&base);
            let moved = base.transformed(&rotation, 1.0, translation);
            let vertices = moved
                .vertices()
                .iter()
                .map(|p| p.map(|x| x + sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng)))
                .collect();
            let noisy = TriangleMesh::new(vertices, moved.faces().to_vec())?;
            (base, noisy.permuted(&perm)?)
        }
        PairKind::IsometricBend | PairKind::TopologicalGlue => {
            let BaseMesh::Cylinder { around, along } = spec.base else { unreachable!() };
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amplitude = spec.bend;
            let source = rolled_sheet(around, along, &|_| 0.5 * PI);
            let total = if spec.kind == PairKind::TopologicalGlue { 1.9 * PI } else { 1.25 * PI };
            let curve = move |s: f64| total * (1.0 + amplitude * (2.0 * PI * s + phase).sin());
            let bent = rolled_sheet(around, along, &curve);
            let bound = spec.noise * mean_edge_length(&bent);
            let vertices = bent
                .vertices()
                .iter()
                .map(|p| p.map(|x| x + bound * rng.gen_range(-1.0..=1.0)))
                .collect();
            let bent = TriangleMesh::new(vertices, bent.faces().to_vec())?;
            perm.shuffle(&mut rng);
            if spec.kind == PairKind::IsometricBend {
                (source, bent.permuted(&perm)?)
            } else {
                let (welded, map) = weld_nearest_far_pair(&bent)?;
                let n_welded = welded.n_vertices();
                let mut weld_perm: Vec<usize> = (0..n_welded).collect();
                weld_perm.shuffle(&mut rng);
                let target = welded.permuted(&weld_perm)?;
                let gt = (0..n).map(|i| weld_perm[map[i]]).collect();
                return Ok(SyntheticPair {
                    source,
                    target,
                    ground_truth: HardCorrespondence::new(gt, n_welded)?,
                });
            }
        }
    };
    let n_target = target.n_vertices();
    Ok(SyntheticPair {
        source,
        target,
        ground_truth: HardCorrespondence::new(perm, n_target)?,
    })
}

pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |i: usize, j: usize| {
                *midpoint.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    let p = [0, 1, 2].map(|d| 0.5 * (vertices[i][d] + vertices[j][d]));
                    vertices.push(p);
                    vertices.len() - 1
                })
            };
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices
        .into_iter()
        .map(|p| {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            p.map(|x| radius * x / r)
        })
        .collect();
    TriangleMesh::new(vertices, faces).expect("icosphere indices are valid")
}

/// `nx` by `ny` vertex grid over `[0, width] x [0, height]`.
pub fn plane_grid(nx: usize, ny: usize, width: f64, height: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = j * nx + i;
            if (i + j) % 2 == 0 {
                faces.push([v, v + 1, v + nx + 1]);
                faces.push([v, v + nx + 1, v + nx]);
            } else {
                faces.push([v, v + 1, v + nx]);
                faces.push([v + 1, v + nx + 1, v + nx]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("grid indices are valid")
}

/// Sheet height as a function of the normalised arc coordinate; deliberately
/// asymmetric so the sheet has no intrinsic symmetry.
fn sheet_height(u: f64) -> f64 {
    0.8 * (1.0 + 0.6 * u + 0.15 * (3.0 * PI * u).sin())
}

/// Arc length of the sheet's rolled direction.
const SHEET_LENGTH: f64 = 2.0;

/// Rolls the asymmetric flat sheet along a planar curve whose tangent angle
/// turns at rate `turn(u) / SHEET_LENGTH` per unit arc length (`u` in [0, 1]).
/// The map is an isometry of the sheet for any `turn`.
pub fn rolled_sheet(around: usize, along: usize, turn: &dyn Fn(f64) -> f64) -> TriangleMesh {
    // integrate the curve finely, then sample at the vertex columns
    let sub = 64;
    let steps = (around - 1) * sub;
    let ds = SHEET_LENGTH / steps as f64;
    let mut curve = Vec::with_capacity(around);
    let (mut x, mut y, mut theta) = (0.0f64, 0.0f64, 0.0f64);
    curve.push((x, y));
    for step in 0..steps {
        let u0 = step as f64 / steps as f64;
        let u1 = (step + 1) as f64 / steps as f64;
        let um = 0.5 * (u0 + u1);
        // midpoint rule for the angle, then for the position
        let k0 = turn(u0) / SHEET_LENGTH;
        let km = turn(um) / SHEET_LENGTH;
        let k1 = turn(u1) / SHEET_LENGTH;
        let theta_mid = theta + 0.5 * ds * 0.5 * (k0 + km);
        let theta_end = theta + ds * (k0 + 4.0 * km + k1) / 6.0;
        x += ds * (theta.cos() + 4.0 * theta_mid.cos() + theta_end.cos()) / 6.0;
        y += ds * (theta.sin() + 4.0 * theta_mid.sin() + theta_end.sin()) / 6.0;
        theta = theta_end;
        if (step + 1) % sub == 0 {
            curve.push((x, y));
        }
    }
    let mut vertices = Vec::with_capacity(around * along);
    for j in 0..along {
        let v = j as f64 / (along - 1) as f64;
        for (i, &(cx, cy)) in curve.iter().enumerate() {
            let u = i as f64 / (around - 1) as f64;
            vertices.push([cx, cy, v * sheet_height(u)]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..along - 1 {
        for i in 0..around - 1 {
            let a = j * around + i;
            if (i + j) % 2 == 0 {
                faces.push([a, a + 1, a + around + 1]);
                faces.push([a, a + around + 1, a + around]);
            } else {
                faces.push([a, a + 1, a + around]);
                faces.push([a + 1, a + around + 1, a + around]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("sheet indices are valid")
}

pub fn mean_edge_length(mesh: &TriangleMesh) -> f64 {
    let edges = mesh.edges();
    edges.iter().map(|&(i, j)| mesh.edge_length(i, j)).sum::<f64>() / edges.len().max(1) as f64
}

/// Displaces every vertex uniformly in a cube of half-width `amplitude * mean edge length`.
pub fn jittered(mesh: &TriangleMesh, amplitude: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = amplitude * mean_edge_length(mesh);
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| p.map(|x| x + scale * rng.gen_range(-1.0..1.0)))
        .collect();
    TriangleMesh::new(vertices, mesh.faces().to_vec()).expect("faces unchanged")
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = [0, 1, 2, 3].map(|_| StandardNormal.sample(&mut *rng));
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / norm);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Welds the closest pair of vertices that are at least three edges apart.
/// Returns the welded mesh and the old-to-new vertex map.
pub fn weld_nearest_far_pair(mesh: &TriangleMesh) -> Result<(TriangleMesh, Vec<usize>)> {
    let n = mesh.n_vertices();
    let mut adjacency = vec![Vec::new(); n];
    for (i, j) in mesh.edges() {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let within_two = |a: usize, b: usize| {
        adjacency[a].contains(&b) || adjacency[a].iter().any(|&c| adjacency[c].contains(&b))
    };
    let v = mesh.vertices();
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..n {
        for b in a + 1..n {
            let d = crate::mesh::dist(&v[a], &v[b]);
            if best.map_or(true, |(bd, _, _)| d < bd) && !within_two(a, b) {
                best = Some((d, a, b));
            }
        }
    }
    let (_, a, b) = best.ok_or_else(|| Error::InvalidArgument("no far vertex pair to weld".into()))?;
    let mut map = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        if i == b {
            map.push(usize::MAX);
        } else {
            map.push(next);
            next += 1;
        }
    }
    map[b] = map[a];
    let mut vertices: Vec<Point3> = (0..n).filter(|&i| i != b).map(|i| v[i]).collect();
    vertices[map[a]] = [0, 1, 2].map(|d| 0.5 * (v[a][d] + v[b][d]));
    let faces = mesh.faces().iter().map(|f| f.map(|i| map[i])).collect();
    Ok((TriangleMesh::new(vertices, faces)?, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    #[test]
    fn icosphere_counts() {
        assert_eq!(icosphere(0, 1.0).n_vertices(), 12);
        assert_eq!(icosphere(1, 1.0).n_vertices(), 42);
        assert_eq!(icosphere(2, 1.0).n_vertices(), 162);
        assert!(validate_mesh(&icosphere(2, 1.0)).is_empty());
    }

    #[test]
    fn identity_pair() {
        let spec = SyntheticPairSpec::new(PairKind::Identity, BaseMesh::Sphere { subdivisions: 1 }, 3);
        let pair = generate_pair(&spec).unwrap();
        assert_eq!(pair.source, pair.target);
        assert!(pair.ground_truth.indices().iter().enumerate().all(|(i, &j)| i == j));
    }

    #[test]
    fn permuted_pair_is_consistent() {
        let spec = SyntheticPairSpec::new(PairKind::Permuted, BaseMesh::Sphere { subdivisions: 1 }, 9);
        let pair = generate_pair(&spec).unwrap();
        for (i, &j) in pair.ground_truth.indices().iter().enumerate() {
            assert_eq!(pair.source.vertices()[i], pair.target.vertices()[j]);
        }
        let again = generate_pair(&spec).unwrap();
        assert_eq!(again.target, pair.target);
    }

    fn edge_length_change(pair: &SyntheticPair) -> f64 {
        let gt = pair.ground_truth.indices();
        pair.source
            .edges()
            .iter()
            .map(|&(i, j)| {
                let a = pair.source.edge_length(i, j);
                let b = pair.target.edge_length(gt[i], gt[j]);
                (a - b).abs() / a
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn isometric_bend_preserves_edge_lengths() {
        for seed in 0..4 {
            let spec = SyntheticPairSpec::new(
                PairKind::IsometricBend,
                BaseMesh::Cylinder { around: 40, along: 25 },
                seed,
            );
            let pair = generate_pair(&spec).unwrap();
            assert!(validate_mesh(&pair.target).is_empty());
            let change = edge_length_change(&pair);
            assert!(change <= 0.01, "seed {seed}: max relative edge change {change}");
        }
    }

    #[test]
    fn glue_welds_one_pair() {
        let spec = SyntheticPairSpec::new(
            PairKind::TopologicalGlue,
            BaseMesh::Cylinder { around: 20, along: 12 },
            1,
        );
        let pair = generate_pair(&spec).unwrap();
        assert_eq!(pair.target.n_vertices(), pair.source.n_vertices() - 1);
        let gt = pair.ground_truth.indices();
        let mut seen = vec![0; pair.target.n_vertices()];
        for &j in gt {
            seen[j] += 1;
        }
        assert_eq!(seen.iter().filter(|&&c| c == 2).count(), 1);
        assert!(seen.iter().all(|&c| c >= 1));
    }

    #[test]
    fn bend_needs_cylinder() {
        let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Sphere { subdivisions: 1 }, 1);
        assert!(generate_pair(&spec).is_err());
    }
}
