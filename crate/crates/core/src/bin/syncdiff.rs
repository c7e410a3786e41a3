use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use syncdiff::correspondence::HardCorrespondence;
use syncdiff::descriptors::DescriptorKind;
use syncdiff::energies::{EnergyConfig, InitialFunctions, Regulariser, TimeSampling};
use syncdiff::optimizer::Parametrisation;
use syncdiff::pipeline::{
    evaluate, execute, prepare_shape, read_mesh_file, write_synthetic_pair, Decoder, Job, MatchMode, PairInput,
    PipelineConfig, RunManifest,
};
use syncdiff::synthetic::{BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::{Error, Result};

const CACHE_ENV: &str = "SYNCDIFF_CACHE_DIR";

#[derive(Parser)]
#[command(name = "syncdiff", version, about = "Spectral shape matching with synchronous-diffusion refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report failures as one JSON object on stderr.
    #[arg(long)]
    json_errors: bool,
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    /// Pairs processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Clone)]
struct PairArgs {
    #[arg(long, requires = "target", conflicts_with = "kind")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Ground truth for file pairs: one target index per source vertex.
    #[arg(long, requires = "source")]
    gt: Option<PathBuf>,
    #[arg(long, default_value = "isometric_bend")]
    kind: PairKind,
    #[arg(long, default_value = "cylinder:40x25")]
    base: BaseMesh,
}

impl PairArgs {
    fn input(&self, seed: u64) -> Result<PairInput> {
        match (&self.source, &self.target) {
            (Some(source), Some(target)) => Ok(PairInput::Files {
                source: source.clone(),
                target: target.clone(),
                ground_truth: self.gt.clone(),
            }),
            _ => Ok(PairInput::synthetic(self.kind, self.base, seed)),
        }
    }
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, default_value_t = 128)]
    k: usize,
    #[arg(long, default_value = "wks")]
    descriptor: DescriptorKind,
    #[arg(long, default_value_t = 128)]
    descriptor_dim: usize,
    /// near-isometric (T = 1e-2) or non-isometric (T = 1e-4).
    #[arg(long, default_value = "near-isometric")]
    preset: String,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda_couple: Option<f64>,
    #[arg(long)]
    lambda_struct: Option<f64>,
    #[arg(long)]
    fmap_lambda: Option<f64>,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Redraw the probe functions every iteration.
    #[arg(long)]
    resample: bool,
    #[arg(long)]
    symmetrise: bool,
    /// Optimise free logits instead of features (under 1000 vertices).
    #[arg(long)]
    direct_scores: bool,
    /// Drop the regulariser.
    #[arg(long)]
    no_ldiff: bool,
    /// Use one diffusion time for every probe.
    #[arg(long)]
    fixed_t: Option<f64>,
    /// Probe with eigenfunctions instead of random functions.
    #[arg(long)]
    init_eigfuncs: bool,
    /// Replace the regulariser: kernel, dirichlet or cycle.
    #[arg(long)]
    energy: Option<String>,
    #[arg(long)]
    max_threshold: Option<f64>,
}

impl ConfigArgs {
    fn config(&self, mode: MatchMode, decoder: Decoder, seed: u64) -> Result<PipelineConfig> {
        let mut energy = match self.preset.as_str() {
            "near-isometric" => EnergyConfig::near_isometric(),
            "non-isometric" => EnergyConfig::non_isometric(),
            other => return Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        };
        energy.seed = seed;
        energy.symmetrise = self.symmetrise;
        if let Some(v) = self.t_max {
            energy.t_max = v;
        }
        if let Some(v) = self.h {
            energy.h = v;
        }
        if let Some(v) = self.tau {
            energy.tau = v;
        }
        if let Some(v) = self.lambda_couple {
            energy.lambda_couple = v;
        }
        if let Some(v) = self.lambda_struct {
            energy.lambda_struct = v;
        }
        if let Some(v) = self.fmap_lambda {
            energy.fmap_lambda = v;
        }
        if let Some(c) = self.fixed_t {
            energy.time_sampling = TimeSampling::Fixed(c);
        }
        if self.init_eigfuncs {
            energy.initial_functions = InitialFunctions::Eigenfunctions;
        }
        energy.regulariser = match (self.no_ldiff, self.energy.as_deref()) {
            (true, Some(_)) => {
                return Err(Error::InvalidArgument("--no-ldiff and --energy are exclusive".into()))
            }
            (true, None) => Regulariser::None,
            (false, None | Some("sync")) => Regulariser::SyncDiffusion,
            (false, Some("kernel")) => Regulariser::Kernel,
            (false, Some("dirichlet")) => Regulariser::Dirichlet,
            (false, Some("cycle")) => Regulariser::Cycle,
            (false, Some(other)) => return Err(Error::InvalidArgument(format!("unknown energy '{other}'"))),
        };
        let mut config = PipelineConfig {
            k: self.k,
            descriptor: self.descriptor,
            descriptor_dim: self.descriptor_dim,
            mode,
            decoder,
            energy,
            ..PipelineConfig::default()
        };
        config.optim.max_iters = self.iters;
        config.optim.initial_step = self.step;
        config.optim.resample_each_iter = self.resample;
        if self.direct_scores {
            config.optim.parametrisation = Parametrisation::DirectScores;
        }
        if let Some(t) = self.max_threshold {
            config.max_threshold = t;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and cache operators and eigenbasis of a mesh.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 128)]
        k: usize,
    },
    /// Write a synthetic pair with ground truth.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kind: PairKind,
        #[arg(long, default_value = "cylinder:40x25")]
        base: BaseMesh,
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        bend: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match one pair: descriptor_nn, fmap or refine.
    Match {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "refine")]
        mode: MatchMode,
        /// pi (argmax of the soft maps) or fmap.
        #[arg(long, default_value = "pi")]
        decoder: Decoder,
        #[arg(long)]
        out: PathBuf,
        /// Replay a previous run instead of reading the flags above.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Metrics over a list of maximum diffusion times.
    SweepTime {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "1.0,1e-1,1e-2,1e-3,1e-4")]
        times: Vec<f64>,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// The seven regulariser settings side by side.
    SweepAblation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score stored correspondences against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        map_mn: PathBuf,
        #[arg(long)]
        map_nm: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        max_threshold: f64,
        #[arg(long, default_value_t = 101)]
        pck_samples: usize,
        /// Directory for metrics.json and pck.csv; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Preprocess { common, .. }
            | Command::Generate { common, .. }
            | Command::Match { common, .. }
            | Command::SweepTime { common, .. }
            | Command::SweepAblation { common, .. }
            | Command::Eval { common, .. } => common,
        }
    }
}

fn seeds(start: u64, count: u64) -> Vec<u64> {
    (start..start + count.max(1)).collect()
}

fn replay_or(manifest: &Option<PathBuf>, build: impl FnOnce() -> Result<Job>) -> Result<Job> {
    match manifest {
        Some(path) => Ok(RunManifest::read(path)?.job),
        None => build(),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<()> {
    let common = command.common().clone();
    let cache = common.cache_dir.as_deref();
    match command {
        Command::Preprocess { mesh, k, .. } => {
            let dir = cache.ok_or_else(|| {
                Error::InvalidArgument(format!("preprocess needs --cache-dir or {CACHE_ENV}"))
            })?;
            let prepared = prepare_shape(&read_mesh_file(&mesh)?, k, Some(dir))?;
            let report = json!({
                "mesh": mesh,
                "hash": prepared.hash,
                "n": prepared.shape.n(),
                "k": prepared.shape.k(),
                "cache": prepared.cache,
                "max_residual": prepared.shape.basis.residuals.iter().cloned().fold(0.0, f64::max),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Generate {
            kind,
            base,
            jitter,
            bend,
            noise,
            out,
            ..
        } => {
            let mut spec = SyntheticPairSpec::new(kind, base, common.seed);
            spec.jitter = jitter.unwrap_or(spec.jitter);
            spec.bend = bend.unwrap_or(spec.bend);
            spec.noise = noise.unwrap_or(spec.noise);
            let pair = write_synthetic_pair(&spec, &out)?;
            println!(
                "{}",
                json!({"out": out, "source_vertices": pair.source.n_vertices(), "target_vertices": pair.target.n_vertices()})
            );
        }
        Command::Match {
            pair,
            config,
            mode,
            decoder,
            out,
            manifest,
            ..
        } => {
            let job = replay_or(&manifest, || {
                Ok(Job::Match {
                    input: pair.input(common.seed)?,
                    config: config.config(mode, decoder, common.seed)?,
                })
            })?;
            let report = execute(&job, &out, cache, common.jobs)?;
            if let Some(metrics) = &report.manifest.results[0].metrics {
                println!("{}", serde_json::to_string_pretty(metrics)?);
            }
        }
        Command::SweepTime {
            pair,
            config,
            times,
            seeds: count,
            out,
            manifest,
            ..
        } => {
            let job = replay_or(&manifest, || {
                Ok(Job::SweepTime {
                    input: pair.input(common.seed)?,
                    config: config.config(MatchMode::Refine, Decoder::Pi, common.seed)?,
                    times,
                    seeds: seeds(common.seed, count),
                })
            })?;
            let report = execute(&job, &out, cache, common.jobs)?;
            println!("{}", serde_json::to_string_pretty(&report.rows)?);
        }
        Command::SweepAblation {
            pair,
            config,
            seeds: count,
            out,
            manifest,
            ..
        } => {
            let job = replay_or(&manifest, || {
                Ok(Job::SweepAblation {
                    input: pair.input(common.seed)?,
                    config: config.config(MatchMode::Refine, Decoder::Pi, common.seed)?,
                    seeds: seeds(common.seed, count),
                })
            })?;
            let report = execute(&job, &out, cache, common.jobs)?;
            println!("{}", serde_json::to_string_pretty(&report.rows)?);
        }
        Command::Eval {
            source,
            target,
            map_mn,
            map_nm,
            gt,
            max_threshold,
            pck_samples,
            out,
            ..
        } => {
            // only the mesh and operators are needed; k = 1 keeps the solve trivial
            let m = prepare_shape(&read_mesh_file(&source)?, 1, cache)?.shape;
            let n = prepare_shape(&read_mesh_file(&target)?, 1, cache)?.shape;
            let pred_mn = HardCorrespondence::read(&map_mn, n.n())?;
            let pred_nm = HardCorrespondence::read(&map_nm, m.n())?;
            let gt = HardCorrespondence::read(&gt, n.n())?;
            let (metrics, curve) = evaluate(&pred_mn, &pred_nm, &gt, &m, &n, max_threshold, pck_samples)?;
            let text = serde_json::to_string_pretty(&metrics)? + "\n";
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                write(&dir.join("metrics.json"), &text)?;
                write(&dir.join("pck.csv"), &curve.to_csv())?;
            }
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if json_errors && e.use_stderr() => {
            eprintln!("{}", json!({"error": {"kind": "usage", "message": e.to_string().trim()}}));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_errors {
                eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::FAILURE
        }
    }
}
