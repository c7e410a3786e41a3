//! The synchronous-diffusion regulariser, the ablation energies, the
//! functional-map coupling and structure terms, and their weighted total.

mod terms;

pub use terms::{
    e_diff, l_couple, l_couple_grad, l_cycle, l_cycle_grad, l_diff, l_diff_terms, l_dirichlet,
    l_dirichlet_grad, l_kernel, l_kernel_grad, l_struct, l_struct_grad, CoupleGrad, DiffTerm,
    SpectralDiffusion,
};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::correspondence::{DEFAULT_COMMUTATIVITY, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::shape::Shape;
use crate::spectral::{Projection, SpectralBasis};

pub const DEFAULT_H: usize = 128;
pub const T_NEAR_ISOMETRIC: f64 = 1e-2;
pub const T_NON_ISOMETRIC: f64 = 1e-4;

/// Offset mixed into the seed of the probes drawn on the second shape.
const SECOND_SHAPE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Which smoothness term plays the role of `L_diff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regulariser {
    #[default]
    SyncDiffusion,
    None,
    Kernel,
    Dirichlet,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "time")]
pub enum TimeSampling {
    /// `t_i ~ Uniform(0, T)`.
    #[default]
    Uniform,
    /// Every `t_i` equal to the given value.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFunctions {
    #[default]
    Random,
    /// The first `h` eigenfunctions of the source shape.
    Eigenfunctions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub h: usize,
    pub t_max: f64,
    pub tau: f64,
    pub lambda_couple: f64,
    pub lambda_struct: f64,
    pub lambda_bij: f64,
    pub lambda_orth: f64,
    /// Weight of the regulariser term (1 in the published total).
    pub lambda_reg: f64,
    /// Commutativity weight of the functional-map solve.
    pub fmap_lambda: f64,
    pub seed: u64,
    pub regulariser: Regulariser,
    pub time_sampling: TimeSampling,
    pub initial_functions: InitialFunctions,
    /// Adds the same regulariser with the roles of the shapes swapped.
    pub symmetrise: bool,
    pub projection: Projection,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            h: DEFAULT_H,
            t_max: T_NEAR_ISOMETRIC,
            tau: DEFAULT_TAU,
            lambda_couple: 1.0,
            lambda_struct: 1.0,
            lambda_bij: 1.0,
            lambda_orth: 1.0,
            lambda_reg: 1.0,
            fmap_lambda: DEFAULT_COMMUTATIVITY,
            seed: 0,
            regulariser: Regulariser::SyncDiffusion,
            time_sampling: TimeSampling::Uniform,
            initial_functions: InitialFunctions::Random,
            symmetrise: false,
            projection: Projection::MassWeighted,
        }
    }
}

impl EnergyConfig {
    /// Preset for near-isometric, topologically noisy and partial pairs.
    pub fn near_isometric() -> Self {
        Self::default()
    }

    pub fn non_isometric() -> Self {
        EnergyConfig {
            t_max: T_NON_ISOMETRIC,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.lambda_couple,
            self.lambda_struct,
            self.lambda_bij,
            self.lambda_orth,
            self.lambda_reg,
            self.fmap_lambda,
        ];
        if self.h == 0 {
            return Err(Error::InvalidArgument("h must be >= 1".into()));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidArgument(format!("T = {} must be >= 0", self.t_max)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau = {} must be > 0", self.tau)));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("energy weights must be finite and >= 0".into()));
        }
        if let TimeSampling::Fixed(c) = self.time_sampling {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("fixed time {c} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Probe functions `F` (rows are vertices) and their diffusion times.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFunctionSet {
    pub f: DMatrix<f64>,
    pub times: Vec<f64>,
    pub seed: u64,
    pub t_max: f64,
}

impl RandomFunctionSet {
    pub fn h(&self) -> usize {
        self.f.ncols()
    }
}

/// Standard normal entries with every row scaled to unit norm, and times
/// drawn uniformly from `[0, T]`.
pub fn sample_random_functions(n: usize, h: usize, t_max: f64, seed: u64) -> Result<RandomFunctionSet> {
    if h == 0 {
        return Err(Error::InvalidArgument("h must be >= 1".into()));
    }
    if !(t_max >= 0.0) {
        return Err(Error::InvalidArgument(format!("T = {t_max} must be >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = DMatrix::zeros(n, h);
    for i in 0..n {
        for j in 0..h {
            f[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    for mut row in f.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    let times = (0..h).map(|_| t_max * rng.gen::<f64>()).collect();
    Ok(RandomFunctionSet { f, times, seed, t_max })
}

fn probe_set(config: &EnergyConfig, basis: &SpectralBasis, seed: u64) -> Result<RandomFunctionSet> {
    let mut set = sample_random_functions(basis.n(), config.h, config.t_max, seed)?;
    if config.initial_functions == InitialFunctions::Eigenfunctions {
        let h = config.h.min(basis.k());
        set.f = basis.eigenvectors.columns(0, h).into_owned();
        set.times.truncate(h);
    }
    if let TimeSampling::Fixed(c) = config.time_sampling {
        set.times.iter_mut().for_each(|t| *t = c);
    }
    Ok(set)
}

/// Probes for one evaluation of the total energy. `on_n` is only drawn when
/// the regulariser is symmetrised.
#[derive(Debug, Clone, PartialEq)]
pub struct Probes {
    pub on_m: RandomFunctionSet,
    pub on_n: Option<RandomFunctionSet>,
}

pub fn draw_probes(config: &EnergyConfig, shape_m: &Shape, shape_n: &Shape, seed: u64) -> Result<Probes> {
    config.validate()?;
    let on_m = probe_set(config, &shape_m.basis, seed)?;
    let on_n = if config.symmetrise {
        Some(probe_set(config, &shape_n.basis, seed ^ SECOND_SHAPE_STREAM)?)
    } else {
        None
    };
    Ok(Probes { on_m, on_n })
}

/// The four maps the total energy depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSet {
    pub pi_mn: DMatrix<f64>,
    pub pi_nm: DMatrix<f64>,
    pub c_mn: DMatrix<f64>,
    pub c_nm: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapGradients {
    pub pi_mn: DMatrix<f64>,
    pub pi_nm: DMatrix<f64>,
    pub c_mn: DMatrix<f64>,
    pub c_nm: DMatrix<f64>,
}

impl MapGradients {
    fn zeros(maps: &MapSet) -> Self {
        MapGradients {
            pi_mn: DMatrix::zeros(maps.pi_mn.nrows(), maps.pi_mn.ncols()),
            pi_nm: DMatrix::zeros(maps.pi_nm.nrows(), maps.pi_nm.ncols()),
            c_mn: DMatrix::zeros(maps.c_mn.nrows(), maps.c_mn.ncols()),
            c_nm: DMatrix::zeros(maps.c_nm.nrows(), maps.c_nm.ncols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTimeTerm {
    pub time: f64,
    pub value: f64,
}

/// Logged form of the total. `l_diff` holds whichever regulariser is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub l_diff: f64,
    pub l_couple: f64,
    pub l_struct: f64,
    pub l_total: f64,
    pub regulariser: Regulariser,
    pub per_time_terms: Vec<PerTimeTerm>,
    pub seed: u64,
    pub config: EnergyConfig,
}

impl EnergyBreakdown {
    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("l_diff", self.l_diff),
            ("l_couple", self.l_couple),
            ("l_struct", self.l_struct),
            ("l_total", self.l_total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// One direction of the regulariser: `a` is the shape the probes live on.
#[allow(clippy::too_many_arguments)]
fn regulariser_one_way(
    config: &EnergyConfig,
    a: &Shape,
    b: &Shape,
    probes: &RandomFunctionSet,
    pi_ab: &DMatrix<f64>,
    pi_ba: &DMatrix<f64>,
    with_grad: bool,
    per_time: &mut Vec<PerTimeTerm>,
) -> Result<(f64, Option<(DMatrix<f64>, DMatrix<f64>)>)> {
    let zeros = || {
        (
            DMatrix::zeros(pi_ab.nrows(), pi_ab.ncols()),
            DMatrix::zeros(pi_ba.nrows(), pi_ba.ncols()),
        )
    };
    match config.regulariser {
        Regulariser::None => Ok((0.0, with_grad.then(zeros))),
        Regulariser::SyncDiffusion => {
            let da = SpectralDiffusion::new(&a.basis, config.projection);
            let db = SpectralDiffusion::new(&b.basis, config.projection);
            let term = l_diff_terms(da, db, &probes.f, &probes.times, pi_ab, pi_ba, with_grad)?;
            per_time.extend(
                probes
                    .times
                    .iter()
                    .zip(&term.per_column)
                    .map(|(&time, &value)| PerTimeTerm { time, value }),
            );
            Ok((term.value, term.grad))
        }
        Regulariser::Cycle => {
            if with_grad {
                let (v, gab, gba) = l_cycle_grad(&probes.f, pi_ab, pi_ba)?;
                Ok((v, Some((gab, gba))))
            } else {
                Ok((l_cycle(&probes.f, pi_ab, pi_ba)?, None))
            }
        }
        Regulariser::Kernel => {
            let (v, g) = l_kernel_grad(&a.basis, &b.basis, &probes.times, pi_ba, with_grad)?;
            Ok((v, g.map(|g| (zeros().0, g))))
        }
        Regulariser::Dirichlet => {
            if with_grad {
                let (v, g) = l_dirichlet_grad(pi_ba, &a.vertex_matrix(), &b.ops)?;
                Ok((v, Some((zeros().0, g))))
            } else {
                Ok((l_dirichlet(pi_ba, &a.vertex_matrix(), &b.ops)?, None))
            }
        }
    }
}

/// `lambda_reg L_reg + lambda_couple L_couple + lambda_struct L_struct`.
pub fn l_total(
    shape_m: &Shape,
    shape_n: &Shape,
    maps: &MapSet,
    probes: &Probes,
    config: &EnergyConfig,
    with_grad: bool,
) -> Result<(EnergyBreakdown, Option<MapGradients>)> {
    let mut per_time = Vec::new();
    let mut grads = with_grad.then(|| MapGradients::zeros(maps));

    let (mut reg, g) = regulariser_one_way(
        config,
        shape_m,
        shape_n,
        &probes.on_m,
        &maps.pi_mn,
        &maps.pi_nm,
        with_grad,
        &mut per_time,
    )?;
    if let (Some(gr), Some((g_mn, g_nm))) = (grads.as_mut(), g) {
        gr.pi_mn += config.lambda_reg * g_mn;
        gr.pi_nm += config.lambda_reg * g_nm;
    }
    if config.symmetrise {
        let on_n = probes
            .on_n
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("symmetrised energy needs probes on both shapes".into()))?;
        let (v, g) = regulariser_one_way(
            config,
            shape_n,
            shape_m,
            on_n,
            &maps.pi_nm,
            &maps.pi_mn,
            with_grad,
            &mut per_time,
        )?;
        reg += v;
        if let (Some(gr), Some((g_nm, g_mn))) = (grads.as_mut(), g) {
            gr.pi_mn += config.lambda_reg * g_mn;
            gr.pi_nm += config.lambda_reg * g_nm;
        }
    }

    let mut couple = 0.0;
    if config.lambda_couple > 0.0 {
        let (v, g) = l_couple_grad(
            &maps.c_mn,
            &maps.c_nm,
            &maps.pi_mn,
            &maps.pi_nm,
            &shape_m.basis,
            &shape_n.basis,
            with_grad,
        )?;
        couple = v;
        if let (Some(gr), Some(g)) = (grads.as_mut(), g) {
            let w = config.lambda_couple;
            gr.pi_mn += w * g.pi_mn;
            gr.pi_nm += w * g.pi_nm;
            gr.c_mn += w * g.c_mn;
            gr.c_nm += w * g.c_nm;
        }
    }

    let mut structure = 0.0;
    if config.lambda_struct > 0.0 {
        let (v, g_mn, g_nm) = l_struct_grad(&maps.c_mn, &maps.c_nm, config.lambda_bij, config.lambda_orth)?;
        structure = v;
        if let Some(gr) = grads.as_mut() {
            gr.c_mn += config.lambda_struct * g_mn;
            gr.c_nm += config.lambda_struct * g_nm;
        }
    }

    let breakdown = EnergyBreakdown {
        l_diff: reg,
        l_couple: couple,
        l_struct: structure,
        l_total: config.lambda_reg * reg + config.lambda_couple * couple + config.lambda_struct * structure,
        regulariser: config.regulariser,
        per_time_terms: per_time,
        seed: probes.on_m.seed,
        config: config.clone(),
    };
    Ok((breakdown, grads))
}
