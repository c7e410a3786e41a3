//! End-to-end runs: shape preparation with the spectral cache, the three
//! matching modes, metrics, the time and ablation sweeps, and the run
//! manifest that makes every output reproducible.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correspondence::{fmap_to_pointwise, solve_functional_map, normalized_eigenvalues, FunctionalMap, HardCorrespondence};
use crate::descriptors::{compute_descriptor, DescriptorKind, DEFAULT_DIM};
use crate::energies::{draw_probes, l_total, EnergyBreakdown, EnergyConfig, InitialFunctions, Regulariser, TimeSampling};
use crate::error::{Error, Result};
use crate::evaluation::{
    coverage, geodesic_error, map_smoothness, pck_and_auc, MetricsSummary, PckCurve, DEFAULT_PCK_SAMPLES,
    MAX_THRESHOLD_NEAR_ISOMETRIC,
};
use crate::mesh::{load_mesh, write_off, MeshFormat, TriangleMesh};
use crate::optimizer::{refine_pair, trace_csv, OptimConfig, TraceRow};
use crate::shape::Shape;
use crate::spectral::{build_operators, eigendecompose, load_cached_basis, store_cached_basis, write_atomic, CacheStatus};
use crate::synthetic::{generate_pair, BaseMesh, PairKind, SyntheticPair, SyntheticPairSpec};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 128;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Nearest neighbour in cosine similarity of the descriptors.
    DescriptorNn,
    /// Functional map from the descriptors, decoded to points.
    Fmap,
    #[default]
    Refine,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descriptor_nn" => Ok(MatchMode::DescriptorNn),
            "fmap" => Ok(MatchMode::Fmap),
            "refine" => Ok(MatchMode::Refine),
            _ => Err(Error::InvalidArgument(format!("unknown match mode '{s}'"))),
        }
    }
}

/// How refined soft maps become vertex maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// Row argmax of the soft correspondences.
    #[default]
    Pi,
    /// Nearest neighbour in the spectral embedding of the final functional maps.
    Fmap,
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pi" => Ok(Decoder::Pi),
            "fmap" => Ok(Decoder::Fmap),
            _ => Err(Error::InvalidArgument(format!("unknown decoder '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub descriptor: DescriptorKind,
    pub descriptor_dim: usize,
    pub mode: MatchMode,
    pub decoder: Decoder,
    pub energy: EnergyConfig,
    pub optim: OptimConfig,
    pub max_threshold: f64,
    pub pck_samples: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: DEFAULT_K,
            descriptor: DescriptorKind::Wks,
            descriptor_dim: DEFAULT_DIM,
            mode: MatchMode::Refine,
            decoder: Decoder::Pi,
            energy: EnergyConfig::near_isometric(),
            optim: OptimConfig::default(),
            max_threshold: MAX_THRESHOLD_NEAR_ISOMETRIC,
            pck_samples: DEFAULT_PCK_SAMPLES,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.descriptor_dim == 0 || self.pck_samples < 2 {
            return Err(Error::InvalidArgument(
                "k and descriptor_dim must be >= 1 and pck_samples >= 2".into(),
            ));
        }
        if !(self.max_threshold > 0.0) {
            return Err(Error::InvalidArgument("max_threshold must be > 0".into()));
        }
        self.energy.validate()?;
        self.optim.validate()
    }
}

/// Outcome of a cache lookup while preparing a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheUse {
    Disabled,
    Hit,
    Miss,
    Stale,
    Corrupt,
}

#[derive(Debug, Clone)]
pub struct PreparedShape {
    pub shape: Shape,
    /// Content hash of the unit-area mesh; also the cache key.
    pub hash: String,
    pub cache: CacheUse,
}

/// Rescales to unit area, then loads or computes the first `k` eigenpairs.
pub fn prepare_shape(mesh: &TriangleMesh, k: usize, cache_dir: Option<&Path>) -> Result<PreparedShape> {
    let mesh = mesh.normalize_to_unit_area()?;
    let k = k.min(mesh.n_vertices());
    let hash = mesh.content_hash();
    let ops = build_operators(&mesh)?;
    let Some(dir) = cache_dir else {
        let basis = eigendecompose(&ops, k)?;
        return Ok(PreparedShape {
            shape: Shape { mesh, ops, basis },
            hash,
            cache: CacheUse::Disabled,
        });
    };
    let status = load_cached_basis(dir, &hash, &hash, k);
    let cache = match status {
        CacheStatus::Hit(basis) => {
            info!("spectral cache hit for {}", &hash[..12]);
            return Ok(PreparedShape {
                shape: Shape { mesh, ops, basis },
                hash,
                cache: CacheUse::Hit,
            });
        }
        CacheStatus::Miss => CacheUse::Miss,
        CacheStatus::Stale => CacheUse::Stale,
        CacheStatus::Corrupt(why) => {
            warn!("spectral cache entry {} is corrupt ({why}); recomputing", &hash[..12]);
            CacheUse::Corrupt
        }
    };
    let basis = eigendecompose(&ops, k)?;
    store_cached_basis(dir, &hash, &hash, &basis)?;
    Ok(PreparedShape {
        shape: Shape { mesh, ops, basis },
        hash,
        cache,
    })
}

#[derive(Debug, Clone)]
pub struct MatchOutput {
    pub map_mn: HardCorrespondence,
    pub map_nm: HardCorrespondence,
    pub trace: Option<Vec<TraceRow>>,
    pub energy: Option<EnergyBreakdown>,
    pub decoder: &'static str,
}

fn unit_rows(e: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = e.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Row `i` of the result is the row of `b` with the largest cosine
/// similarity to row `i` of `a` (first index on ties).
pub fn cosine_nearest(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<HardCorrespondence> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "descriptor widths {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ua, ub) = (unit_rows(a), unit_rows(b));
    let scores = &ua * ub.transpose();
    let indices = scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    HardCorrespondence::new(indices, b.nrows())
}

/// Functional maps `(C_MN, C_NM)` from descriptors.
pub fn descriptor_fmaps(m: &Shape, n: &Shape, dm: &DMatrix<f64>, dn: &DMatrix<f64>, lambda: f64) -> Result<(FunctionalMap, FunctionalMap)> {
    let (ev_m, ev_n) = normalized_eigenvalues(&m.basis.eigenvalues, &n.basis.eigenvalues);
    let a_m = m.basis.project(&unit_rows(dm));
    let a_n = n.basis.project(&unit_rows(dn));
    let c_mn = solve_functional_map(&a_m, &a_n, &ev_m, &ev_n, lambda)?;
    let c_nm = solve_functional_map(&a_n, &a_m, &ev_n, &ev_m, lambda)?;
    Ok((c_mn, c_nm))
}

/// Runs one matching mode on prepared shapes.
pub fn match_shapes(m: &Shape, n: &Shape, config: &PipelineConfig) -> Result<MatchOutput> {
    config.validate()?;
    let dm = compute_descriptor(config.descriptor, &m.mesh, &m.basis, config.descriptor_dim)?.values;
    let dn = compute_descriptor(config.descriptor, &n.mesh, &n.basis, config.descriptor_dim)?.values;
    match config.mode {
        MatchMode::DescriptorNn => Ok(MatchOutput {
            map_mn: cosine_nearest(&dm, &dn)?,
            map_nm: cosine_nearest(&dn, &dm)?,
            trace: None,
            energy: None,
            decoder: "descriptor_argmax",
        }),
        MatchMode::Fmap => {
            let (c_mn, c_nm) = descriptor_fmaps(m, n, &dm, &dn, config.energy.fmap_lambda)?;
            Ok(MatchOutput {
                map_mn: fmap_to_pointwise(&c_nm, &m.basis, &n.basis)?,
                map_nm: fmap_to_pointwise(&c_mn, &n.basis, &m.basis)?,
                trace: None,
                energy: None,
                decoder: "fmap",
            })
        }
        MatchMode::Refine => {
            let result = refine_pair(m, n, &dm, &dn, &config.energy, &config.optim)?;
            let probes = draw_probes(&config.energy, m, n, config.energy.seed)?;
            let (energy, _) = l_total(m, n, &result.state.maps, &probes, &config.energy, false)?;
            let (map_mn, map_nm, decoder) = match config.decoder {
                Decoder::Pi => (result.map_mn, result.map_nm, "pi"),
                Decoder::Fmap => {
                    let c_mn = FunctionalMap {
                        matrix: result.state.maps.c_mn.clone(),
                    };
                    let c_nm = FunctionalMap {
                        matrix: result.state.maps.c_nm.clone(),
                    };
                    (
                        fmap_to_pointwise(&c_nm, &m.basis, &n.basis)?,
                        fmap_to_pointwise(&c_mn, &n.basis, &m.basis)?,
                        "fmap",
                    )
                }
            };
            Ok(MatchOutput {
                map_mn,
                map_nm,
                trace: Some(result.trace),
                energy: Some(energy),
                decoder,
            })
        }
    }
}

/// Metrics for an `M -> N` prediction; smoothness uses the `N -> M` map.
pub fn evaluate(
    map_mn: &HardCorrespondence,
    map_nm: &HardCorrespondence,
    gt: &HardCorrespondence,
    m: &Shape,
    n: &Shape,
    max_threshold: f64,
    samples: usize,
) -> Result<(MetricsSummary, PckCurve)> {
    let profile = geodesic_error(map_mn, gt, &n.mesh)?;
    let curve = pck_and_auc(&profile, max_threshold, samples)?;
    let smooth = map_smoothness(map_nm, &m.mesh, &n.ops)?;
    Ok((MetricsSummary::new(&profile, &curve, coverage(map_mn), smooth), curve))
}

/// Where a pair comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairInput {
    Files {
        source: PathBuf,
        target: PathBuf,
        ground_truth: Option<PathBuf>,
    },
    Synthetic { spec: SyntheticPairSpec },
}

impl PairInput {
    pub fn synthetic(kind: PairKind, base: BaseMesh, seed: u64) -> Self {
        PairInput::Synthetic {
            spec: SyntheticPairSpec::new(kind, base, seed),
        }
    }

    /// The same input with the synthetic seed replaced.
    fn with_seed(&self, seed: u64) -> PairInput {
        match self {
            PairInput::Synthetic { spec } => PairInput::Synthetic {
                spec: SyntheticPairSpec { seed, ..spec.clone() },
            },
            files => files.clone(),
        }
    }

    fn load(&self) -> Result<(TriangleMesh, TriangleMesh, Option<HardCorrespondence>)> {
        match self {
            PairInput::Synthetic { spec } => {
                let SyntheticPair {
                    source,
                    target,
                    ground_truth,
                } = generate_pair(spec)?;
                Ok((source, target, Some(ground_truth)))
            }
            PairInput::Files {
                source,
                target,
                ground_truth,
            } => {
                let m = read_mesh_file(source)?;
                let n = read_mesh_file(target)?;
                let gt = ground_truth
                    .as_ref()
                    .map(|p| HardCorrespondence::read(p, n.n_vertices()))
                    .transpose()?;
                if let Some(gt) = &gt {
                    if gt.n_source() != m.n_vertices() {
                        return Err(Error::DimensionMismatch(format!(
                            "ground truth has {} lines, source has {} vertices",
                            gt.n_source(),
                            m.n_vertices()
                        )));
                    }
                }
                Ok((m, n, gt))
            }
        }
    }
}

pub fn read_mesh_file(path: &Path) -> Result<TriangleMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::InvalidArgument(format!("{}: expected a .off or .ply file", path.display())))?;
    load_mesh(path, format)
}

/// One row of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    NoLdiff,
    FixedT,
    EigfuncInit,
    Kernel,
    Dirichlet,
    Cycle,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::Full,
        Ablation::NoLdiff,
        Ablation::FixedT,
        Ablation::EigfuncInit,
        Ablation::Kernel,
        Ablation::Dirichlet,
        Ablation::Cycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLdiff => "no-ldiff",
            Ablation::FixedT => "fixed-t",
            Ablation::EigfuncInit => "eigfunc-init",
            Ablation::Kernel => "kernel",
            Ablation::Dirichlet => "dirichlet",
            Ablation::Cycle => "cycle",
        }
    }

    /// The energy for this setting. The fixed-time variant uses `T / 2`,
    /// the mean of the multiscale draw.
    pub fn apply(self, base: &EnergyConfig) -> EnergyConfig {
        let mut e = base.clone();
        match self {
            Ablation::Full => {}
            Ablation::NoLdiff => e.regulariser = Regulariser::None,
            Ablation::FixedT => e.time_sampling = TimeSampling::Fixed(0.5 * base.t_max),
            Ablation::EigfuncInit => e.initial_functions = InitialFunctions::Eigenfunctions,
            Ablation::Kernel => e.regulariser = Regulariser::Kernel,
            Ablation::Dirichlet => e.regulariser = Regulariser::Dirichlet,
            Ablation::Cycle => e.regulariser = Regulariser::Cycle,
        }
        e
    }
}

/// Everything a run needs; a manifest replays it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Match {
        input: PairInput,
        config: PipelineConfig,
    },
    SweepTime {
        input: PairInput,
        config: PipelineConfig,
        times: Vec<f64>,
        seeds: Vec<u64>,
    },
    SweepAblation {
        input: PairInput,
        config: PipelineConfig,
        seeds: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub label: String,
    pub seed: u64,
    pub source_hash: String,
    pub target_hash: String,
    pub decoder: String,
    pub metrics: Option<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub job: Job,
    pub results: Vec<PairRecord>,
    /// SHA-256 of every output file except the manifest itself.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "manifest schema {} is not supported",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }
}

/// Collects output files so their hashes can go into the manifest.
struct Outputs {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), contents)?;
        self.hashes.insert(name.to_string(), hex::encode(Sha256::digest(contents)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

/// Runs `f(0..count)` on up to `jobs` threads; results keep input order.
pub fn run_parallel<T: Send, F: Fn(usize) -> Result<T> + Sync>(count: usize, jobs: usize, f: F) -> Result<Vec<T>> {
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, count.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let r = f(i);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// One matched and (when ground truth exists) evaluated pair.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub seed: u64,
    pub source_hash: String,
    pub target_hash: String,
    pub output: MatchOutput,
    pub metrics: Option<(MetricsSummary, PckCurve)>,
}

/// Loads, prepares, matches and evaluates one pair.
pub fn run_pair(input: &PairInput, config: &PipelineConfig, cache_dir: Option<&Path>) -> Result<PairRun> {
    let (m_mesh, n_mesh, gt) = input.load()?;
    let m = prepare_shape(&m_mesh, config.k, cache_dir)?;
    let n = prepare_shape(&n_mesh, config.k, cache_dir)?;
    let output = match_shapes(&m.shape, &n.shape, config)?;
    let metrics = gt
        .map(|gt| {
            evaluate(
                &output.map_mn,
                &output.map_nm,
                &gt,
                &m.shape,
                &n.shape,
                config.max_threshold,
                config.pck_samples,
            )
        })
        .transpose()?;
    let seed = match input {
        PairInput::Synthetic { spec } => spec.seed,
        PairInput::Files { .. } => config.energy.seed,
    };
    Ok(PairRun {
        seed,
        source_hash: m.hash,
        target_hash: n.hash,
        output,
        metrics,
    })
}

fn record(label: String, run: &PairRun) -> PairRecord {
    PairRecord {
        label,
        seed: run.seed,
        source_hash: run.source_hash.clone(),
        target_hash: run.target_hash.clone(),
        decoder: run.output.decoder.to_string(),
        metrics: run.metrics.as_ref().map(|(m, _)| m.clone()),
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Median metrics over the runs of one sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub label: String,
    pub mean_geo_error_x100: f64,
    pub auc: f64,
    pub smoothness: f64,
    pub coverage: f64,
}

fn median_row(label: &str, runs: &[&PairRun]) -> Result<MedianRow> {
    let metrics: Vec<&MetricsSummary> = runs
        .iter()
        .map(|r| {
            r.metrics
                .as_ref()
                .map(|(m, _)| m)
                .ok_or_else(|| Error::InvalidArgument("sweeps need ground truth".into()))
        })
        .collect::<Result<_>>()?;
    let med = |f: fn(&MetricsSummary) -> f64| median(&mut metrics.iter().map(|m| f(m)).collect::<Vec<_>>());
    Ok(MedianRow {
        label: label.to_string(),
        mean_geo_error_x100: med(|m| m.mean_geo_error_x100),
        auc: med(|m| m.auc),
        smoothness: med(|m| m.smoothness),
        coverage: med(|m| m.coverage),
    })
}

fn rows_csv(first: &str, rows: &[MedianRow]) -> String {
    let mut out = format!("{first},mean_geo_error_x100,auc,smoothness,coverage\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.label, r.mean_geo_error_x100, r.auc, r.smoothness, r.coverage
        )
        .unwrap();
    }
    out
}

fn runs_csv(first: &str, labelled: &[(String, &PairRun)]) -> String {
    let mut out = format!("{first},seed,mean_geo_error_x100,auc,smoothness,coverage\n");
    for (label, run) in labelled {
        if let Some((m, _)) = &run.metrics {
            writeln!(
                out,
                "{label},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                run.seed, m.mean_geo_error_x100, m.auc, m.smoothness, m.coverage
            )
            .unwrap();
        }
    }
    out
}

/// Result of executing a job: the manifest plus in-memory rows for callers.
#[derive(Debug, Clone)]
pub struct JobReport {
    pub manifest: RunManifest,
    pub rows: Vec<MedianRow>,
    pub runs: Vec<PairRun>,
}

fn time_label(t: f64) -> String {
    format!("{t:e}")
}

/// Executes a job, writes its outputs into `out_dir` and returns the
/// manifest (also written as `manifest.json`).
pub fn execute(job: &Job, out_dir: &Path, cache_dir: Option<&Path>, jobs: usize) -> Result<JobReport> {
    let mut out = Outputs::new(out_dir)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let runs: Vec<PairRun>;
    match job {
        Job::Match { input, config } => {
            let run = run_pair(input, config, cache_dir)?;
            out.write("map_mn.txt", run.output.map_mn.to_text().as_bytes())?;
            out.write("map_nm.txt", run.output.map_nm.to_text().as_bytes())?;
            if let Some(trace) = &run.output.trace {
                out.write("trace.csv", trace_csv(trace).as_bytes())?;
            }
            if let Some(energy) = &run.output.energy {
                out.json("energy.json", energy)?;
            }
            if let Some((metrics, curve)) = &run.metrics {
                out.json("metrics.json", metrics)?;
                out.write("pck.csv", curve.to_csv().as_bytes())?;
            }
            results.push(record("match".into(), &run));
            runs = vec![run];
        }
        Job::SweepTime {
            input,
            config,
            times,
            seeds,
        } => {
            if times.is_empty() || seeds.is_empty() {
                return Err(Error::InvalidArgument("a time sweep needs at least one T and one seed".into()));
            }
            let cells: Vec<(f64, u64)> = times.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
            runs = run_parallel(cells.len(), jobs, |i| {
                let (t, seed) = cells[i];
                let mut cfg = config.clone();
                cfg.energy.t_max = t;
                cfg.energy.seed = seed;
                run_pair(&input.with_seed(seed), &cfg, cache_dir)
            })?;
            let mut labelled = Vec::new();
            for (ti, &t) in times.iter().enumerate() {
                let chunk: Vec<&PairRun> = runs[ti * seeds.len()..(ti + 1) * seeds.len()].iter().collect();
                rows.push(median_row(&time_label(t), &chunk)?);
                for r in chunk {
                    labelled.push((time_label(t), r));
                    results.push(record(format!("t_max={}", time_label(t)), r));
                }
            }
            out.write("sweep_time.csv", rows_csv("t_max", &rows).as_bytes())?;
            out.write("sweep_time_runs.csv", runs_csv("t_max", &labelled).as_bytes())?;
        }
        Job::SweepAblation { input, config, seeds } => {
            if seeds.is_empty() {
                return Err(Error::InvalidArgument("an ablation sweep needs at least one seed".into()));
            }
            let cells: Vec<(Ablation, u64)> = Ablation::ALL
                .iter()
                .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
                .collect();
            runs = run_parallel(cells.len(), jobs, |i| {
                let (ablation, seed) = cells[i];
                let mut cfg = config.clone();
                cfg.mode = MatchMode::Refine;
                cfg.energy = ablation.apply(&config.energy);
                cfg.energy.seed = seed;
                run_pair(&input.with_seed(seed), &cfg, cache_dir)
            })?;
            let mut labelled = Vec::new();
            for (ai, ablation) in Ablation::ALL.iter().enumerate() {
                let chunk: Vec<&PairRun> = runs[ai * seeds.len()..(ai + 1) * seeds.len()].iter().collect();
                rows.push(median_row(ablation.name(), &chunk)?);
                for r in chunk {
                    labelled.push((ablation.name().to_string(), r));
                    results.push(record(ablation.name().to_string(), r));
                }
            }
            out.write("ablation.csv", rows_csv("setting", &rows).as_bytes())?;
            out.write("ablation_runs.csv", runs_csv("setting", &labelled).as_bytes())?;
        }
    }
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        job: job.clone(),
        results,
        outputs: out.hashes.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(JobReport { manifest, rows, runs })
}

/// Writes a synthetic pair as `source.off`, `target.off`, `ground_truth.txt`
/// and `spec.json`.
pub fn write_synthetic_pair(spec: &SyntheticPairSpec, out_dir: &Path) -> Result<SyntheticPair> {
    let pair = generate_pair(spec)?;
    let mut out = Outputs::new(out_dir)?;
    out.write("source.off", write_off(&pair.source).as_bytes())?;
    out.write("target.off", write_off(&pair.target).as_bytes())?;
    out.write("ground_truth.txt", pair.ground_truth.to_text().as_bytes())?;
    out.json("spec.json", spec)?;
    Ok(pair)
}
