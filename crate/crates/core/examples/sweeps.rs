//! Time sweep and ablation table on a small bent pair, through the same
//! job runner the CLI uses.
//!
//! `cargo run --release --example sweeps -- [out_dir] [jobs]`

use std::path::PathBuf;

use syncdiff::pipeline::{execute, Job, PairInput, PipelineConfig};
use syncdiff::synthetic::{BaseMesh, PairKind};

fn main() -> syncdiff::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweeps".into()));
    let jobs = std::env::args().nth(2).map_or(1, |s| s.parse().expect("job count"));
    let input = PairInput::synthetic(PairKind::TopologicalGlue, BaseMesh::Cylinder { around: 20, along: 12 }, 0);
    let mut config = PipelineConfig {
        k: 32,
        descriptor_dim: 32,
        ..PipelineConfig::default()
    };
    config.optim.max_iters = 10;

    let time = Job::SweepTime {
        input: input.clone(),
        config: config.clone(),
        times: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
        seeds: vec![0, 1],
    };
    for row in execute(&time, &out.join("time"), None, jobs)?.rows {
        println!("T = {:<8} geo x100 {:>8.3}  auc {:.4}", row.label, row.mean_geo_error_x100, row.auc);
    }

    let ablation = Job::SweepAblation { input, config, seeds: vec![0, 1] };
    for row in execute(&ablation, &out.join("ablation"), None, jobs)?.rows {
        println!("{:<13} geo x100 {:>8.3}  auc {:.4}  smoothness {:.3}", row.label, row.mean_geo_error_x100, row.auc, row.smoothness);
    }
    println!("CSV files and manifests under {}", out.display());
    Ok(())
}
