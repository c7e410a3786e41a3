//! Per-pair refinement: gradient descent on per-vertex features (or on raw
//! correspondence logits) against the total energy.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correspondence::{
    argmax_rows, normalized_eigenvalues, softmax_rows, softmax_rows_backward, solve_functional_map_for_grad,
    FmapSolve, HardCorrespondence,
};
use crate::energies::{draw_probes, l_total, EnergyBreakdown, EnergyConfig, MapSet, Probes};
use crate::error::{Error, Result};
use crate::shape::Shape;
use crate::spectral::scale_rows;

/// Largest vertex count for which the logit parametrisation is accepted.
pub const DIRECT_SCORES_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrisation {
    /// Learnable per-vertex features on both shapes.
    #[default]
    Features,
    /// Free `n_M x n_N` logits; functional maps come from the fixed
    /// initial descriptors.
    DirectScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Largest entry change of the first trial step.
    pub initial_step: f64,
    pub backtracking: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Stop once the largest gradient entry falls below this.
    pub grad_tol: f64,
    pub resample_each_iter: bool,
    pub parametrisation: Parametrisation,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iters: 50,
            initial_step: 0.05,
            backtracking: 0.5,
            armijo: 1e-4,
            max_backtracks: 30,
            grad_tol: 1e-9,
            resample_each_iter: false,
            parametrisation: Parametrisation::Features,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidArgument("initial step must be > 0".into()));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(Error::InvalidArgument("backtracking factor must lie in (0, 1)".into()));
        }
        if !(self.armijo >= 0.0 && self.armijo < 1.0) {
            return Err(Error::InvalidArgument("Armijo constant must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Trainable variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Features { e_m: DMatrix<f64>, e_n: DMatrix<f64> },
    Scores(DMatrix<f64>),
}

impl Params {
    fn axpy(&self, alpha: f64, dir: &Params) -> Params {
        match (self, dir) {
            (Params::Features { e_m, e_n }, Params::Features { e_m: gm, e_n: gn }) => Params::Features {
                e_m: e_m + gm * alpha,
                e_n: e_n + gn * alpha,
            },
            (Params::Scores(s), Params::Scores(g)) => Params::Scores(s + g * alpha),
            _ => unreachable!("mismatched parametrisations"),
        }
    }

    fn dot(&self, other: &Params) -> f64 {
        match (self, other) {
            (Params::Features { e_m, e_n }, Params::Features { e_m: gm, e_n: gn }) => e_m.dot(gm) + e_n.dot(gn),
            (Params::Scores(s), Params::Scores(g)) => s.dot(g),
            _ => unreachable!("mismatched parametrisations"),
        }
    }

    fn amax(&self) -> f64 {
        match self {
            Params::Features { e_m, e_n } => e_m.amax().max(e_n.amax()),
            Params::Scores(s) => s.amax(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub l_diff: f64,
    pub l_couple: f64,
    pub l_struct: f64,
    pub l_total: f64,
    pub step_size: f64,
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iter,l_diff,l_couple,l_struct,l_total,step_size\n");
    for r in trace {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.iter, r.l_diff, r.l_couple, r.l_struct, r.l_total, r.step_size
        )
        .unwrap();
    }
    out
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Fixed inputs of one refinement problem.
pub struct PairProblem<'a> {
    pub m: &'a Shape,
    pub n: &'a Shape,
    pub energy: &'a EnergyConfig,
    evals_m: DVector<f64>,
    evals_n: DVector<f64>,
    /// Functional maps used by the logit parametrisation.
    fixed_fmaps: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl<'a> PairProblem<'a> {
    pub fn new(m: &'a Shape, n: &'a Shape, energy: &'a EnergyConfig) -> Result<Self> {
        energy.validate()?;
        let (evals_m, evals_n) = normalized_eigenvalues(&m.basis.eigenvalues, &n.basis.eigenvalues);
        Ok(PairProblem {
            m,
            n,
            energy,
            evals_m,
            evals_n,
            fixed_fmaps: None,
        })
    }

    fn fmaps(&self, e_m: &DMatrix<f64>, e_n: &DMatrix<f64>) -> Result<(FmapSolve, FmapSolve)> {
        let a_m = self.m.basis.project(e_m);
        let a_n = self.n.basis.project(e_n);
        let lambda = self.energy.fmap_lambda;
        let mn = solve_functional_map_for_grad(&a_m, &a_n, &self.evals_m, &self.evals_n, lambda)?;
        let nm = solve_functional_map_for_grad(&a_n, &a_m, &self.evals_n, &self.evals_m, lambda)?;
        Ok((mn, nm))
    }
}

/// Unit-norm rows; zero rows stay zero.
fn normalize_rows(e: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut out = e.clone();
    let mut norms = Vec::with_capacity(e.nrows());
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
        norms.push(norm);
    }
    (out, norms)
}

fn normalize_rows_backward(unit: &DMatrix<f64>, norms: &[f64], grad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = grad.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        if norms[i] > 0.0 {
            let u = unit.row(i);
            let proj = u.dot(&row);
            for (x, &ui) in row.iter_mut().zip(u.iter()) {
                *x = (*x - proj * ui) / norms[i];
            }
        } else {
            row.fill(0.0);
        }
    }
    out
}

/// Everything derived from the parameters, kept for the backward pass.
struct Forward {
    maps: MapSet,
    unit: Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>, Vec<f64>)>,
    solves: Option<(FmapSolve, FmapSolve)>,
}

fn forward(problem: &PairProblem<'_>, params: &Params) -> Result<Forward> {
    let tau = problem.energy.tau;
    match params {
        Params::Features { e_m, e_n } => {
            let (u_m, nm) = normalize_rows(e_m);
            let (u_n, nn) = normalize_rows(e_n);
            let scores = (&u_m * u_n.transpose()) / tau;
            let pi_mn = softmax_rows(&scores);
            let pi_nm = softmax_rows(&scores.transpose());
            let (s_mn, s_nm) = problem.fmaps(&u_m, &u_n)?;
            let maps = MapSet {
                pi_mn,
                pi_nm,
                c_mn: s_mn.map.matrix.clone(),
                c_nm: s_nm.map.matrix.clone(),
            };
            Ok(Forward {
                maps,
                unit: Some((u_m, nm, u_n, nn)),
                solves: Some((s_mn, s_nm)),
            })
        }
        Params::Scores(s) => {
            let (c_mn, c_nm) = problem
                .fixed_fmaps
                .clone()
                .ok_or_else(|| Error::InvalidArgument("logit parametrisation needs fixed functional maps".into()))?;
            Ok(Forward {
                maps: MapSet {
                    pi_mn: softmax_rows(s),
                    pi_nm: softmax_rows(&s.transpose()),
                    c_mn,
                    c_nm,
                },
                unit: None,
                solves: None,
            })
        }
    }
}

fn check_finite(b: &EnergyBreakdown, iteration: usize, trace: &[TraceRow]) -> Result<()> {
    match b.non_finite_term() {
        Some(term) => Err(Error::Diverged {
            iteration,
            term: term.to_string(),
            trace: trace.iter().map(|r| r.l_total).collect(),
        }),
        None => Ok(()),
    }
}

fn energy_only(problem: &PairProblem<'_>, params: &Params, probes: &Probes) -> Result<EnergyBreakdown> {
    let fwd = forward(problem, params)?;
    Ok(l_total(problem.m, problem.n, &fwd.maps, probes, problem.energy, false)?.0)
}

/// Total energy and its gradient with respect to the trainable variables.
pub fn energy_and_gradient(
    problem: &PairProblem<'_>,
    params: &Params,
    probes: &Probes,
) -> Result<(EnergyBreakdown, Params)> {
    let fwd = forward(problem, params)?;
    let (breakdown, grads) = l_total(problem.m, problem.n, &fwd.maps, probes, problem.energy, true)?;
    check_finite(&breakdown, 0, &[])?;
    let g = grads.expect("gradient requested");
    let mut d_scores = softmax_rows_backward(&fwd.maps.pi_mn, &g.pi_mn);
    d_scores += softmax_rows_backward(&fwd.maps.pi_nm, &g.pi_nm).transpose();
    let grad = match params {
        Params::Scores(_) => Params::Scores(d_scores),
        Params::Features { .. } => {
            let (u_m, norms_m, u_n, norms_n) = fwd.unit.as_ref().expect("feature forward pass");
            let (s_mn, s_nm) = fwd.solves.as_ref().expect("feature forward pass");
            let tau = problem.energy.tau;
            let mut gu_m = (&d_scores * u_n) / tau;
            let mut gu_n = (d_scores.tr_mul(u_m)) / tau;
            let (ga_m1, ga_n1) = s_mn.backward(&g.c_mn);
            let (ga_n2, ga_m2) = s_nm.backward(&g.c_nm);
            let (bm, bn) = (&problem.m.basis, &problem.n.basis);
            gu_m += scale_rows(&(&bm.eigenvectors * (ga_m1 + ga_m2)), &bm.mass);
            gu_n += scale_rows(&(&bn.eigenvectors * (ga_n1 + ga_n2)), &bn.mass);
            Params::Features {
                e_m: normalize_rows_backward(u_m, norms_m, &gu_m),
                e_n: normalize_rows_backward(u_n, norms_n, &gu_n),
            }
        }
    };
    Ok((breakdown, grad))
}

/// Mutable state of one refinement.
#[derive(Debug, Clone)]
pub struct PairState {
    pub params: Params,
    pub maps: MapSet,
    pub iteration: usize,
    pub trace: Vec<TraceRow>,
}

impl PairState {
    /// Initial state from descriptors on both shapes.
    pub fn from_descriptors(
        problem: &mut PairProblem<'_>,
        desc_m: &DMatrix<f64>,
        desc_n: &DMatrix<f64>,
        parametrisation: Parametrisation,
    ) -> Result<Self> {
        if desc_m.nrows() != problem.m.n() || desc_n.nrows() != problem.n.n() || desc_m.ncols() != desc_n.ncols() {
            return Err(Error::DimensionMismatch("descriptors do not fit the shapes".into()));
        }
        let features = Params::Features {
            e_m: desc_m.clone(),
            e_n: desc_n.clone(),
        };
        let params = match parametrisation {
            Parametrisation::Features => features,
            Parametrisation::DirectScores => {
                let side = problem.m.n().max(problem.n.n());
                if side >= DIRECT_SCORES_LIMIT {
                    return Err(Error::SizeCap {
                        what: "logit parametrisation",
                        requested: side,
                        cap: DIRECT_SCORES_LIMIT - 1,
                    });
                }
                let fwd = forward(problem, &features)?;
                problem.fixed_fmaps = Some((fwd.maps.c_mn, fwd.maps.c_nm));
                let (u_m, _) = normalize_rows(desc_m);
                let (u_n, _) = normalize_rows(desc_n);
                Params::Scores((u_m * u_n.transpose()) / problem.energy.tau)
            }
        };
        let maps = forward(problem, &params)?.maps;
        Ok(PairState {
            params,
            maps,
            iteration: 0,
            trace: Vec::new(),
        })
    }

    /// Row-wise argmax of both soft maps: `(M -> N, N -> M)`.
    pub fn decode(&self) -> (HardCorrespondence, HardCorrespondence) {
        (argmax_rows(&self.maps.pi_mn), argmax_rows(&self.maps.pi_nm))
    }
}

pub struct RefineResult {
    pub map_mn: HardCorrespondence,
    pub map_nm: HardCorrespondence,
    pub state: PairState,
    pub trace: Vec<TraceRow>,
}

fn row(iter: usize, b: &EnergyBreakdown, step: f64) -> TraceRow {
    TraceRow {
        iter,
        l_diff: b.l_diff,
        l_couple: b.l_couple,
        l_struct: b.l_struct,
        l_total: b.l_total,
        step_size: step,
    }
}

/// Gradient descent with Armijo backtracking. Row `0` of the trace is the
/// initial energy; each later row is an accepted step. With resampling off
/// the probes never change, so the trace is non-increasing.
pub fn refine_pair(
    m: &Shape,
    n: &Shape,
    desc_m: &DMatrix<f64>,
    desc_n: &DMatrix<f64>,
    energy: &EnergyConfig,
    optim: &OptimConfig,
) -> Result<RefineResult> {
    optim.validate()?;
    let mut problem = PairProblem::new(m, n, energy)?;
    let mut state = PairState::from_descriptors(&mut problem, desc_m, desc_n, optim.parametrisation)?;
    let mut probes = draw_probes(energy, m, n, energy.seed)?;
    let mut step: Option<f64> = None;

    for iter in 0..optim.max_iters {
        if optim.resample_each_iter && iter > 0 {
            probes = draw_probes(energy, m, n, energy.seed.wrapping_add(iter as u64))?;
        }
        let (current, grad) = energy_and_gradient(&problem, &state.params, &probes)
            .map_err(|e| match e {
                Error::Diverged { term, .. } => Error::Diverged {
                    iteration: iter,
                    term,
                    trace: state.trace.iter().map(|r| r.l_total).collect(),
                },
                e => e,
            })?;
        if iter == 0 {
            state.trace.push(row(0, &current, 0.0));
        }
        let gmax = grad.amax();
        if gmax <= optim.grad_tol {
            debug!("gradient below tolerance at iteration {iter}");
            break;
        }
        let slope = grad.dot(&grad);
        let mut alpha = step.map_or(optim.initial_step / gmax, |s| s / optim.backtracking);
        let mut accepted = None;
        for _ in 0..=optim.max_backtracks {
            let trial = state.params.axpy(-alpha, &grad);
            let b = energy_only(&problem, &trial, &probes)?;
            check_finite(&b, iter, &state.trace)?;
            if b.l_total <= current.l_total - optim.armijo * alpha * slope {
                accepted = Some((trial, b));
                break;
            }
            alpha *= optim.backtracking;
        }
        let Some((params, b)) = accepted else {
            debug!("line search failed at iteration {iter}; stopping");
            break;
        };
        state.params = params;
        state.iteration = iter + 1;
        state.trace.push(row(iter + 1, &b, alpha));
        step = Some(alpha);
    }
    state.maps = forward(&problem, &state.params)?.maps;
    let (map_mn, map_nm) = state.decode();
    let trace = state.trace.clone();
    Ok(RefineResult {
        map_mn,
        map_nm,
        state,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::compute_wks;
    use crate::energies::{sample_random_functions, Regulariser};
    use crate::synthetic::{jittered, plane_grid, rolled_sheet};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(nx: usize, ny: usize, seed: u64, k: usize) -> Shape {
        let mesh = jittered(&plane_grid(nx, ny, 1.0, 0.8), 0.2, seed).normalize_to_unit_area().unwrap();
        Shape::new(mesh, k).unwrap()
    }

    fn random_features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn perturb(p: &Params, which: usize, i: usize, j: usize, h: f64) -> Params {
        let mut q = p.clone();
        match &mut q {
            Params::Features { e_m, e_n } => {
                if which == 0 {
                    e_m[(i, j)] += h
                } else {
                    e_n[(i, j)] += h
                }
            }
            Params::Scores(s) => s[(i, j)] += h,
        }
        q
    }

    fn entry(p: &Params, which: usize, i: usize, j: usize) -> f64 {
        match p {
            Params::Features { e_m, e_n } => {
                if which == 0 {
                    e_m[(i, j)]
                } else {
                    e_n[(i, j)]
                }
            }
            Params::Scores(s) => s[(i, j)],
        }
    }

    fn shape_of(p: &Params, which: usize) -> (usize, usize) {
        match p {
            Params::Features { e_m, e_n } => {
                if which == 0 {
                    e_m.shape()
                } else {
                    e_n.shape()
                }
            }
            Params::Scores(s) => s.shape(),
        }
    }

    fn fd_check(problem: &PairProblem<'_>, params: &Params, probes: &Probes, seed: u64, label: &str) {
        let (_, grad) = energy_and_gradient(problem, params, probes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let which_max = if matches!(params, Params::Scores(_)) { 1 } else { 2 };
        let h = 1e-6;
        for _ in 0..20 {
            let which = rng.gen_range(0..which_max);
            let (r, c) = shape_of(params, which);
            let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..c));
            let plus = energy_only(problem, &perturb(params, which, i, j, h), probes).unwrap().l_total;
            let minus = energy_only(problem, &perturb(params, which, i, j, -h), probes).unwrap().l_total;
            let fd = (plus - minus) / (2.0 * h);
            let g = entry(&grad, which, i, j);
            assert!(
                (fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()) + 1e-8 * grad.amax(),
                "{label}: ({which},{i},{j}) analytic {g}, numeric {fd}"
            );
        }
    }

    fn twenty_vertex_pair() -> (Shape, Shape) {
        (grid(5, 4, 1, 8), grid(4, 5, 2, 8))
    }

    #[test]
    fn feature_gradients_match_finite_differences() {
        let (m, n) = twenty_vertex_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = Params::Features {
            e_m: random_features(m.n(), 10, &mut rng),
            e_n: random_features(n.n(), 10, &mut rng),
        };
        let base = EnergyConfig {
            h: 6,
            tau: 0.3,
            fmap_lambda: 0.1,
            ..EnergyConfig::default()
        };
        let mut configs = vec![("total", base.clone())];
        for reg in [Regulariser::SyncDiffusion, Regulariser::Kernel, Regulariser::Dirichlet, Regulariser::Cycle] {
            configs.push((
                "regulariser alone",
                EnergyConfig {
                    regulariser: reg,
                    lambda_couple: 0.0,
                    lambda_struct: 0.0,
                    ..base.clone()
                },
            ));
        }
        configs.push((
            "couple alone",
            EnergyConfig {
                regulariser: Regulariser::None,
                lambda_struct: 0.0,
                ..base.clone()
            },
        ));
        configs.push((
            "struct alone",
            EnergyConfig {
                regulariser: Regulariser::None,
                lambda_couple: 0.0,
                ..base.clone()
            },
        ));
        configs.push(("symmetrised", EnergyConfig { symmetrise: true, ..base.clone() }));
        for (i, (label, config)) in configs.iter().enumerate() {
            let problem = PairProblem::new(&m, &n, config).unwrap();
            let probes = draw_probes(config, &m, &n, 7).unwrap();
            fd_check(&problem, &params, &probes, i as u64, &format!("{label} {:?}", config.regulariser));
        }
    }

    #[test]
    fn cycle_limit_gradient() {
        let (m, n) = twenty_vertex_pair();
        let config = EnergyConfig {
            h: 6,
            t_max: 0.0,
            tau: 0.3,
            lambda_couple: 0.0,
            lambda_struct: 0.0,
            ..EnergyConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = Params::Features {
            e_m: random_features(m.n(), 10, &mut rng),
            e_n: random_features(n.n(), 10, &mut rng),
        };
        let problem = PairProblem::new(&m, &n, &config).unwrap();
        let probes = draw_probes(&config, &m, &n, 1).unwrap();
        fd_check(&problem, &params, &probes, 9, "T = 0");
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let (m, n) = twenty_vertex_pair();
        let config = EnergyConfig {
            h: 6,
            tau: 0.3,
            fmap_lambda: 0.1,
            ..EnergyConfig::default()
        };
        let mut problem = PairProblem::new(&m, &n, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = PairState::from_descriptors(
            &mut problem,
            &random_features(m.n(), 10, &mut rng),
            &random_features(n.n(), 10, &mut rng),
            Parametrisation::DirectScores,
        )
        .unwrap();
        let probes = draw_probes(&config, &m, &n, 2).unwrap();
        fd_check(&problem, &state.params, &probes, 11, "logits");
    }

    #[test]
    fn symmetric_saddle_has_equal_gradients() {
        let s = grid(5, 4, 1, 8);
        let config = EnergyConfig {
            h: 6,
            tau: 0.3,
            fmap_lambda: 0.1,
            symmetrise: true,
            ..EnergyConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = random_features(s.n(), 10, &mut rng);
        let params = Params::Features { e_m: e.clone(), e_n: e };
        let on_m = sample_random_functions(s.n(), 6, 0.01, 3).unwrap();
        let probes = Probes {
            on_n: Some(on_m.clone()),
            on_m,
        };
        let problem = PairProblem::new(&s, &s, &config).unwrap();
        let (_, grad) = energy_and_gradient(&problem, &params, &probes).unwrap();
        let Params::Features { e_m, e_n } = grad else { unreachable!() };
        assert!((&e_m - &e_n).amax() < 1e-9 * e_m.amax());
    }

    fn sheet(around: usize, along: usize, k: usize, bend: f64) -> Shape {
        let mesh = rolled_sheet(around, along, &|u| 0.5 * std::f64::consts::PI * (1.0 + bend * u))
            .normalize_to_unit_area()
            .unwrap();
        Shape::new(mesh, k).unwrap()
    }

    #[test]
    fn trace_is_monotone_and_zero_iterations_is_nn() {
        let m = sheet(12, 8, 30, 0.0);
        let n = sheet(12, 8, 30, 0.4);
        let dm = compute_wks(&m.basis, 32).unwrap().values;
        let dn = compute_wks(&n.basis, 32).unwrap().values;
        let energy = EnergyConfig { h: 32, ..EnergyConfig::default() };

        let zero = refine_pair(&m, &n, &dm, &dn, &energy, &OptimConfig { max_iters: 0, ..OptimConfig::default() }).unwrap();
        let (u_m, _) = normalize_rows(&dm);
        let (u_n, _) = normalize_rows(&dn);
        let nn = argmax_rows(&(&u_m * u_n.transpose()));
        assert_eq!(zero.map_mn, nn);

        let run = refine_pair(&m, &n, &dm, &dn, &energy, &OptimConfig { max_iters: 15, ..OptimConfig::default() }).unwrap();
        assert!(run.trace.len() > 2);
        for w in run.trace.windows(2) {
            assert!(w[1].l_total <= w[0].l_total, "{:?}", run.trace);
        }
        let csv = trace_csv(&run.trace);
        assert!(csv.starts_with("iter,l_diff,l_couple,l_struct,l_total,step_size\n"));
        assert_eq!(csv.lines().count(), run.trace.len() + 1);
    }

    #[test]
    fn self_matching_recovers_identity() {
        let s = sheet(16, 10, 40, 0.3);
        let d = compute_wks(&s.basis, 64).unwrap().values;
        let energy = EnergyConfig { h: 32, ..EnergyConfig::default() };
        let run = refine_pair(&s, &s, &d, &d, &energy, &OptimConfig { max_iters: 10, ..OptimConfig::default() }).unwrap();
        let hits = run.map_mn.indices().iter().enumerate().filter(|(i, &j)| *i == j).count();
        assert!(hits as f64 >= 0.99 * s.n() as f64, "{hits} of {}", s.n());
    }

    #[test]
    fn permuting_the_target_permutes_the_result() {
        let m = sheet(10, 8, 24, 0.0);
        let n = sheet(10, 8, 24, 0.5);
        let mut perm: Vec<usize> = (0..n.n()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
        let n_perm = n.permuted(&perm).unwrap();
        let dm = compute_wks(&m.basis, 24).unwrap().values;
        let dn = compute_wks(&n.basis, 24).unwrap().values;
        let mut dn_perm = dn.clone();
        for (old, &new) in perm.iter().enumerate() {
            dn_perm.set_row(new, &dn.row(old));
        }
        let energy = EnergyConfig { h: 16, ..EnergyConfig::default() };
        let optim = OptimConfig { max_iters: 5, ..OptimConfig::default() };
        let a = refine_pair(&m, &n, &dm, &dn, &energy, &optim).unwrap();
        let b = refine_pair(&m, &n_perm, &dm, &dn_perm, &energy, &optim).unwrap();
        for (old, &new) in perm.iter().enumerate() {
            let gap = (a.state.maps.pi_mn.column(old) - b.state.maps.pi_mn.column(new)).amax();
            assert!(gap < 1e-8, "{gap}");
        }
        let mapped: Vec<usize> = a.map_mn.indices().iter().map(|&j| perm[j]).collect();
        assert_eq!(mapped, b.map_mn.indices());
    }

    #[test]
    fn config_errors() {
        assert!(OptimConfig { backtracking: 1.0, ..OptimConfig::default() }.validate().is_err());
        assert!(OptimConfig { initial_step: 0.0, ..OptimConfig::default() }.validate().is_err());
    }
}
