//! Sparse SPD solves for `alpha * M + beta * L` with a reverse Cuthill-McKee
//! ordering in front of the sparse Cholesky factorisation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use super::Operators;
use crate::error::{Error, Result};

pub struct SpdSolver {
    order: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl SpdSolver {
    /// Factors `mass_scale * M + stiffness_scale * L`.
    pub fn new(ops: &Operators, mass_scale: f64, stiffness_scale: f64) -> Result<Self> {
        let n = ops.n();
        let order = reverse_cuthill_mckee(&ops.stiffness);
        let mut position = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut coo = CooMatrix::new(n, n);
        for (i, j, &v) in ops.stiffness.triplet_iter() {
            coo.push(position[i], position[j], stiffness_scale * v);
        }
        for (i, &m) in ops.mass.iter().enumerate() {
            coo.push(position[i], position[i], mass_scale * m);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(SpdSolver { order, chol })
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.order.len();
        let c = rhs.ncols();
        let mut permuted = DMatrix::zeros(n, c);
        for (new, &old) in self.order.iter().enumerate() {
            for j in 0..c {
                permuted[(new, j)] = rhs[(old, j)];
            }
        }
        self.chol.solve_mut(&mut permuted);
        let mut out = DMatrix::zeros(n, c);
        for (new, &old) in self.order.iter().enumerate() {
            for j in 0..c {
                out[(old, j)] = permuted[(new, j)];
            }
        }
        out
    }
}

/// Bandwidth-reducing ordering; `order[new] = old`.
pub(crate) fn reverse_cuthill_mckee(pattern: &CsrMatrix<f64>) -> Vec<usize> {
    let n = pattern.nrows();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let row = pattern.row(i);
            row.col_indices().iter().copied().filter(|&j| j != i).collect()
        })
        .collect();
    let degree: Vec<usize> = neighbours.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // returns (farthest vertex, eccentricity)
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(u) = queue.pop_front() {
            if dist[u] > dist[last] || (dist[u] == dist[last] && degree[u] < degree[last]) {
                last = u;
            }
            for &v in &neighbours[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (last, dist[last])
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // pseudo-peripheral start
        let mut start = seed;
        let (mut far, mut ecc) = bfs_levels(start);
        for _ in 0..8 {
            let (next_far, next_ecc) = bfs_levels(far);
            if next_ecc <= ecc {
                break;
            }
            start = far;
            far = next_far;
            ecc = next_ecc;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = neighbours[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree[v], v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}
