//! Graph geodesics: Dijkstra over the vertex-edge graph with Euclidean edge weights.
//!
//! These are upper bounds on the polyhedral geodesic distance; the bias shrinks
//! with mesh resolution but does not vanish on regular grids.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    pub distances: Vec<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Weighted adjacency in compressed form, built once per mesh.
#[derive(Debug, Clone)]
pub(crate) struct EdgeGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl EdgeGraph {
    pub(crate) fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.n_vertices();
        let edges = mesh.edges();
        let mut degree = vec![0usize; n + 1];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for &(i, j) in &edges {
            let w = mesh.edge_length(i, j);
            targets[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            targets[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        EdgeGraph {
            offsets,
            targets,
            weights,
        }
    }

    fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for e in self.offsets[u]..self.offsets[u + 1] {
                let v = self.targets[e];
                let nd = d + self.weights[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { dist: nd, vertex: v });
                }
            }
        }
        dist
    }
}

fn check_reachable(mesh: &TriangleMesh, source: usize, distances: &[f64]) -> Result<()> {
    if let Some(unreachable) = distances.iter().position(|d| !d.is_finite()) {
        let (labels, _) = super::validate::connected_components(mesh);
        let component_size = labels.iter().filter(|&&l| l == labels[unreachable]).count();
        return Err(Error::Disconnected {
            source_vertex: source,
            unreachable,
            component_size,
        });
    }
    Ok(())
}

pub fn geodesic_distances(mesh: &TriangleMesh, source: usize) -> Result<GeodesicField> {
    if source >= mesh.n_vertices() {
        return Err(Error::VertexOutOfRange {
            index: source,
            len: mesh.n_vertices(),
        });
    }
    let distances = EdgeGraph::new(mesh).dijkstra(source);
    check_reachable(mesh, source, &distances)?;
    Ok(GeodesicField { source, distances })
}

/// Lazily computed single-source distance fields over one mesh.
pub struct GeodesicTable<'a> {
    mesh: &'a TriangleMesh,
    graph: EdgeGraph,
    rows: HashMap<usize, Vec<f64>>,
}

impl<'a> GeodesicTable<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        GeodesicTable {
            mesh,
            graph: EdgeGraph::new(mesh),
            rows: HashMap::new(),
        }
    }

    pub fn distance(&mut self, a: usize, b: usize) -> Result<f64> {
        let n = self.mesh.n_vertices();
        for v in [a, b] {
            if v >= n {
                return Err(Error::VertexOutOfRange { index: v, len: n });
            }
        }
        if !self.rows.contains_key(&a) {
            let d = self.graph.dijkstra(a);
            check_reachable(self.mesh, a, &d)?;
            self.rows.insert(a, d);
        }
        Ok(self.rows[&a][b])
    }
}
