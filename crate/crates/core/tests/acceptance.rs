//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to
//! see the table. Only the parts that are expected to hold are asserted;
//! the rest are reported.

use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syncdiff::energies::{
    draw_probes, e_diff, l_couple, l_cycle, l_diff, l_dirichlet, l_kernel, l_struct, l_total, sample_random_functions,
    EnergyConfig, MapSet, Regulariser,
};
use syncdiff::mesh::TriangleMesh;
use syncdiff::optimizer::{energy_and_gradient, PairProblem, Params};
use syncdiff::pipeline::{evaluate, execute, match_shapes, median, run_parallel, Job, MatchMode, PairInput, PipelineConfig};
use syncdiff::spectral::{
    build_operators, dense_generalized_eigen, diffuse_implicit, diffuse_spectral, eigendecompose, Operators,
    SpectralBasis,
};
use syncdiff::synthetic::{generate_pair, icosphere, jittered, plane_grid, BaseMesh, PairKind, SyntheticPairSpec};
use syncdiff::Shape;

struct Line {
    id: usize,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: usize, pass: bool, detail: String) {
    println!("AC{id:<2} {} {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, pass, detail });
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn unit(mesh: TriangleMesh) -> TriangleMesh {
    mesh.normalize_to_unit_area().unwrap()
}

fn test_meshes() -> Vec<TriangleMesh> {
    vec![
        icosphere(1, 1.0),
        icosphere(2, 1.0),
        jittered(&icosphere(2, 1.0), 0.2, 3),
        plane_grid(10, 8, 1.0, 0.7),
        jittered(&plane_grid(15, 14, 1.0, 1.0), 0.25, 4),
        generate_pair(&SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 20, along: 10 }, 1))
            .unwrap()
            .target,
    ]
}

fn ac1() -> (bool, String) {
    let h = 3f64.sqrt() / 2.0;
    let tri = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]], vec![[0, 1, 2]]).unwrap();
    let ops = build_operators(&tri).unwrap();
    let l = ops.stiffness_dense();
    let mut tri_err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 / 3f64.sqrt() } else { -1.0 / (2.0 * 3f64.sqrt()) };
            tri_err = tri_err.max((l[(i, j)] - want).abs());
        }
        tri_err = tri_err.max((ops.mass[i] - 3f64.sqrt() / 12.0).abs());
    }
    let mut kernel: f64 = 0.0;
    for mesh in test_meshes() {
        let ops = build_operators(&mesh).unwrap();
        let ones = DMatrix::from_element(ops.n(), 1, 1.0);
        kernel = kernel.max(ops.stiffness_mul(&ones).amax());
    }
    (
        tri_err <= 1e-12 && kernel <= 1e-10,
        format!("operators: triangle error {tri_err:.1e}, max |L 1| {kernel:.1e}"),
    )
}

fn m_orthonormality(basis: &SpectralBasis) -> f64 {
    (basis.project(&basis.eigenvectors) - DMatrix::identity(basis.k(), basis.k())).amax()
}

fn ac2() -> (bool, String) {
    let mut orth: f64 = 0.0;
    let mut rel: f64 = 0.0;
    let meshes = [
        unit(plane_grid(20, 20, 1.0, 1.0)),
        unit(jittered(&icosphere(2, 1.0), 0.1, 5)),
        unit(jittered(&plane_grid(22, 18, 1.0, 0.8), 0.2, 6)),
    ];
    for mesh in &meshes {
        let ops = build_operators(mesh).unwrap();
        let basis = eigendecompose(&ops, 30).unwrap();
        let dense = dense_generalized_eigen(&ops, 30).unwrap();
        orth = orth.max(m_orthonormality(&basis));
        for i in 1..30 {
            rel = rel.max((basis.eigenvalues[i] - dense.eigenvalues[i]).abs() / dense.eigenvalues[i]);
        }
    }
    let small = build_operators(&plane_grid(10, 5, 1.0, 1.0)).unwrap();
    orth = orth.max(m_orthonormality(&eigendecompose(&small, small.n()).unwrap()));
    (
        orth <= 1e-8 && rel <= 1e-6,
        format!("eigenbasis: max |Phi^T M Phi - I| {orth:.1e}, dense eigenvalue gap {rel:.1e} relative"),
    )
}

fn heat(ops: &Operators, u: &DMatrix<f64>) -> f64 {
    ops.mass_mul(u).sum()
}

fn ac3() -> (bool, String) {
    let ops = build_operators(&icosphere(2, 1.0)).unwrap();
    let n = ops.n();
    let full = dense_generalized_eigen(&ops, n).unwrap();
    let mut u = DMatrix::zeros(n, 1);
    u[(7, 0)] = 1.0 / ops.mass[7];

    let mut conservation: f64 = 0.0;
    for t in [1e-4, 1e-2, 1.0] {
        for out in [diffuse_implicit(&ops, &u, t).unwrap(), diffuse_spectral(&full.truncated(32), &u, t).unwrap()] {
            conservation = conservation.max((heat(&ops, &out) - heat(&ops, &u)).abs() / heat(&ops, &u));
        }
    }

    let band = &full.eigenvectors.columns(0, 20) * DMatrix::from_fn(20, 3, |i, j| ((i + j) as f64).cos());
    let identity = (diffuse_spectral(&full.truncated(20), &band, 0.0).unwrap() - &band).amax();

    let mut monotone = true;
    let mut errors = Vec::new();
    for t in [1e-3, 1e-2] {
        let reference = diffuse_implicit(&ops, &u, t).unwrap();
        let mut last = f64::INFINITY;
        for k in [16, 64, 128, n] {
            let err = (diffuse_spectral(&full.truncated(k), &u, t).unwrap() - &reference).norm() / reference.norm();
            monotone &= err <= last;
            last = err;
            errors.push(format!("{err:.2e}"));
        }
    }
    (
        conservation <= 1e-8 && identity <= 1e-10 && monotone,
        format!(
            "diffusion: heat drift {conservation:.1e}, t=0 identity {identity:.1e}, error over k {{16,64,128,n}} {}",
            errors.join(" ")
        ),
    )
}

fn grid_shape(nx: usize, ny: usize, seed: u64, k: usize) -> Shape {
    Shape::new(unit(jittered(&plane_grid(nx, ny, 1.0, 0.8), 0.2, seed)), k).unwrap()
}

fn stochastic(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut p = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0f64).exp());
    for mut r in p.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
    p
}

fn random_maps(m: &Shape, n: &Shape, seed: u64) -> MapSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MapSet {
        pi_mn: stochastic(m.n(), n.n(), &mut rng),
        pi_nm: stochastic(n.n(), m.n(), &mut rng),
        c_mn: DMatrix::from_fn(n.k(), m.k(), |_, _| rng.gen_range(-1.0..1.0)),
        c_nm: DMatrix::from_fn(m.k(), n.k(), |_, _| rng.gen_range(-1.0..1.0)),
    }
}

/// `Phi exp(-t Lambda) Phi^T` written out entry by entry.
fn naive_kernel(b: &SpectralBasis, t: f64) -> DMatrix<f64> {
    DMatrix::from_fn(b.n(), b.n(), |i, j| {
        (0..b.k())
            .map(|a| b.eigenvectors[(i, a)] * (-t * b.eigenvalues[a]).exp() * b.eigenvectors[(j, a)])
            .sum()
    })
}

fn ac4() -> (bool, String) {
    let s = grid_shape(6, 5, 1, 30);
    let id = DMatrix::identity(30, 30);
    let f = sample_random_functions(30, 8, 0.05, 3).unwrap();
    let identity = e_diff(&s.basis, &s.basis, &f.f, 0.02, &id, &id).unwrap().abs();

    // k = n: every function is band-limited
    let m = grid_shape(6, 5, 2, 30);
    let n = grid_shape(5, 6, 3, 30);
    let maps = random_maps(&m, &n, 4);
    let zeros = vec![0.0; f.h()];
    let a = l_diff(&m.basis, &n.basis, &f.f, &zeros, &maps.pi_mn, &maps.pi_nm).unwrap();
    let b = l_cycle(&f.f, &maps.pi_mn, &maps.pi_nm).unwrap();
    let degeneration = (a - b).abs() / (1.0 + b);

    let m = grid_shape(6, 5, 5, 12);
    let n = grid_shape(5, 6, 6, 12);
    let maps = random_maps(&m, &n, 7);
    let (bm, bn) = (&m.basis, &n.basis);
    let mut gaps = Vec::new();
    let mut want = 0.0;
    for (c, &t) in f.times.iter().enumerate() {
        let km = naive_kernel(bm, t) * DMatrix::from_diagonal(&bm.mass);
        let kn = naive_kernel(bn, t) * DMatrix::from_diagonal(&bn.mass);
        let col = f.f.column(c).into_owned();
        want += (&km * &col - &maps.pi_mn * (&kn * (&maps.pi_nm * &col))).norm_squared();
    }
    gaps.push((l_diff(bm, bn, &f.f, &f.times, &maps.pi_mn, &maps.pi_nm).unwrap(), want));

    let want = (&f.f - &maps.pi_mn * (&maps.pi_nm * &f.f)).norm_squared();
    gaps.push((l_cycle(&f.f, &maps.pi_mn, &maps.pi_nm).unwrap(), want));

    let v = m.vertex_matrix();
    let pv = &maps.pi_nm * &v;
    let want = (pv.transpose() * n.ops.stiffness_dense() * &pv).trace();
    gaps.push((l_dirichlet(&maps.pi_nm, &v, &n.ops).unwrap(), want));

    let times = [0.01, 0.04];
    let want: f64 = times
        .iter()
        .map(|&t| (naive_kernel(bm, t) - maps.pi_nm.transpose() * naive_kernel(bn, t) * &maps.pi_nm).norm_squared())
        .sum();
    gaps.push((l_kernel(bm, bn, &times, &maps.pi_nm).unwrap(), want));

    let c_nm = bm.eigenvectors.transpose() * DMatrix::from_diagonal(&bm.mass) * &maps.pi_mn * &bn.eigenvectors;
    let c_mn = bn.eigenvectors.transpose() * DMatrix::from_diagonal(&bn.mass) * &maps.pi_nm * &bm.eigenvectors;
    let want = (&maps.c_mn - c_mn).norm_squared() + (&maps.c_nm - c_nm).norm_squared();
    gaps.push((l_couple(&maps.c_mn, &maps.c_nm, &maps.pi_mn, &maps.pi_nm, bm, bn).unwrap(), want));

    let i = DMatrix::<f64>::identity(12, 12);
    let (a, b) = (&maps.c_mn, &maps.c_nm);
    let want = (a * b - &i).norm_squared()
        + (b * a - &i).norm_squared()
        + (a.transpose() * a - &i).norm_squared()
        + (b.transpose() * b - &i).norm_squared();
    gaps.push((l_struct(a, b, 1.0, 1.0).unwrap(), want));

    let oracle = gaps.iter().map(|(g, w)| (g - w).abs() / (1.0 + w.abs())).fold(0.0, f64::max);
    (
        identity <= 1e-10 && degeneration <= 1e-9 && oracle <= 1e-10,
        format!("energies: identity e_diff {identity:.1e}, t=0 vs cycle {degeneration:.1e}, worst oracle gap {oracle:.1e}"),
    )
}

/// Worst relative disagreement between central differences and `grad` at 20
/// random coordinates.
fn fd_gap(x: &DMatrix<f64>, grad: &DMatrix<f64>, value: &dyn Fn(&DMatrix<f64>) -> f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let scale = grad.amax().max(1e-8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (i, j) = (rng.gen_range(0..x.nrows()), rng.gen_range(0..x.ncols()));
        let (mut p, mut q) = (x.clone(), x.clone());
        p[(i, j)] += h;
        q[(i, j)] -= h;
        let fd = (value(&p) - value(&q)) / (2.0 * h);
        let g = grad[(i, j)];
        // absolute floor for entries that are zero up to rounding
        worst = worst.max((fd - g).abs() / (fd.abs().max(g.abs()) + 1e-3 * scale));
    }
    worst
}

fn ac5() -> (bool, String) {
    let m = grid_shape(5, 4, 8, 8);
    let n = grid_shape(4, 5, 9, 8);
    let maps = random_maps(&m, &n, 10);
    let base = EnergyConfig { h: 6, t_max: 0.05, ..EnergyConfig::default() };
    let alone = |reg, couple: f64, structure: f64, lambda_reg: f64| EnergyConfig {
        regulariser: reg,
        lambda_couple: couple,
        lambda_struct: structure,
        lambda_reg,
        ..base.clone()
    };
    let configs = [
        ("l_diff", alone(Regulariser::SyncDiffusion, 0.0, 0.0, 1.0)),
        ("l_kernel", alone(Regulariser::Kernel, 0.0, 0.0, 1.0)),
        ("l_dirichlet", alone(Regulariser::Dirichlet, 0.0, 0.0, 1.0)),
        ("l_cycle", alone(Regulariser::Cycle, 0.0, 0.0, 1.0)),
        ("l_couple", alone(Regulariser::SyncDiffusion, 1.0, 0.0, 0.0)),
        ("l_struct", alone(Regulariser::SyncDiffusion, 0.0, 1.0, 0.0)),
        ("l_total", base.clone()),
    ];
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    for (name, config) in &configs {
        let probes = draw_probes(config, &m, &n, 3).unwrap();
        let g = l_total(&m, &n, &maps, &probes, config, true).unwrap().1.unwrap();
        let total = |maps: &MapSet| l_total(&m, &n, maps, &probes, config, false).unwrap().0.l_total;
        let gap = [
            fd_gap(&maps.pi_mn, &g.pi_mn, &|x| total(&MapSet { pi_mn: x.clone(), ..maps.clone() }), 1),
            fd_gap(&maps.pi_nm, &g.pi_nm, &|x| total(&MapSet { pi_nm: x.clone(), ..maps.clone() }), 2),
            fd_gap(&maps.c_mn, &g.c_mn, &|x| total(&MapSet { c_mn: x.clone(), ..maps.clone() }), 3),
            fd_gap(&maps.c_nm, &g.c_nm, &|x| total(&MapSet { c_nm: x.clone(), ..maps.clone() }), 4),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(gap);
        names.push(*name);
    }

    // through the feature parametrisation the optimiser uses
    let problem = PairProblem::new(&m, &n, &base).unwrap();
    let probes = draw_probes(&base, &m, &n, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e_m = DMatrix::from_fn(m.n(), 6, |_, _| rng.gen_range(-1.0..1.0));
    let e_n = DMatrix::from_fn(n.n(), 6, |_, _| rng.gen_range(-1.0..1.0));
    let (_, grad) = energy_and_gradient(&problem, &Params::Features { e_m: e_m.clone(), e_n: e_n.clone() }, &probes).unwrap();
    let Params::Features { e_m: g_m, .. } = grad else { unreachable!() };
    let value = |x: &DMatrix<f64>| {
        let params = Params::Features { e_m: x.clone(), e_n: e_n.clone() };
        energy_and_gradient(&problem, &params, &probes).unwrap().0.l_total
    };
    let features = fd_gap(&e_m, &g_m, &value, 5);
    worst = worst.max(features);
    (
        worst <= 1e-4,
        format!("gradients: worst relative FD gap {worst:.1e} over {} and features", names.join(", ")),
    )
}

fn pair_config(k: usize, dim: usize, iters: usize) -> PipelineConfig {
    let mut config = PipelineConfig { k, descriptor_dim: dim, ..PipelineConfig::default() };
    config.optim.max_iters = iters;
    config
}

fn ac6() -> (bool, String) {
    let spec = SyntheticPairSpec::new(PairKind::Permuted, BaseMesh::Plane { nx: 25, ny: 20 }, 0);
    let pair = generate_pair(&spec).unwrap();
    let m = Shape::new(unit(pair.source), 64).unwrap();
    let n = Shape::new(unit(pair.target), 64).unwrap();
    let config = PipelineConfig { mode: MatchMode::DescriptorNn, ..pair_config(64, 128, 0) };
    let out = match_shapes(&m, &n, &config).unwrap();
    let hits = out
        .map_mn
        .indices()
        .iter()
        .zip(pair.ground_truth.indices())
        .filter(|(a, b)| a == b)
        .count();

    // a perfect icosphere is too symmetric for descriptors to tell vertices apart
    let spec = SyntheticPairSpec {
        jitter: 0.15,
        ..SyntheticPairSpec::new(PairKind::Identity, BaseMesh::Sphere { subdivisions: 2 }, 0)
    };
    let pair = generate_pair(&spec).unwrap();
    let s = Shape::new(unit(pair.source), 64).unwrap();
    let out = match_shapes(&s, &s, &config).unwrap();
    let (metrics, _) = evaluate(&out.map_mn, &out.map_nm, &pair.ground_truth, &s, &s, config.max_threshold, 101).unwrap();
    (
        hits == m.n() && metrics.mean_geo_error_x100 == 0.0 && metrics.auc == 1.0,
        format!(
            "exact recovery: permuted {hits}/{} vertices, identity geo {} AUC {}",
            m.n(),
            metrics.mean_geo_error_x100,
            metrics.auc
        ),
    )
}

struct RefineCell {
    init_geo: f64,
    init_smooth: f64,
    geo: f64,
    smooth: f64,
    monotone: bool,
}

/// Refinement against its own initialisation on the bend suite.
fn ac7() -> (bool, bool, String) {
    let config = pair_config(32, 64, 10);
    let cells = run_parallel(10, jobs(), |seed| {
        let spec = SyntheticPairSpec::new(PairKind::IsometricBend, BaseMesh::Cylinder { around: 40, along: 25 }, seed as u64);
        let pair = generate_pair(&spec)?;
        let m = Shape::new(unit(pair.source), config.k)?;
        let n = Shape::new(unit(pair.target), config.k)?;
        let eval = |out: &syncdiff::pipeline::MatchOutput| {
            evaluate(&out.map_mn, &out.map_nm, &pair.ground_truth, &m, &n, config.max_threshold, config.pck_samples)
                .map(|(s, _)| s)
        };
        let init = eval(&match_shapes(&m, &n, &PipelineConfig { mode: MatchMode::DescriptorNn, ..config.clone() })?)?;
        let out = match_shapes(&m, &n, &config)?;
        let refined = eval(&out)?;
        let trace = out.trace.unwrap_or_default();
        let monotone = trace.windows(2).all(|w| w[1].l_total <= w[0].l_total);
        Ok(RefineCell {
            init_geo: init.mean_geo_error_x100,
            init_smooth: init.smoothness,
            geo: refined.mean_geo_error_x100,
            smooth: refined.smoothness,
            monotone,
        })
    })
    .unwrap();
    let med = |f: fn(&RefineCell) -> f64| median(&mut cells.iter().map(f).collect::<Vec<_>>());
    let (init_geo, geo) = (med(|c| c.init_geo), med(|c| c.geo));
    let (init_smooth, smooth) = (med(|c| c.init_smooth), med(|c| c.smooth));
    let monotone = cells.iter().all(|c| c.monotone);
    let holds = geo <= init_geo && monotone;
    (
        holds && smooth < init_smooth,
        holds,
        format!(
            "refinement: median geo {init_geo:.3} -> {geo:.3}, median smoothness {init_smooth:.5} -> {smooth:.5}, traces non-increasing {monotone}"
        ),
    )
}

fn ac8(dir: &Path) -> (bool, bool, String) {
    let input = PairInput::synthetic(PairKind::IsometricBend, BaseMesh::Cylinder { around: 20, along: 12 }, 0);
    let job = Job::SweepAblation { input, config: pair_config(24, 32, 10), seeds: (0..10).collect() };
    let rows = execute(&job, &dir.join("ablation"), None, jobs()).unwrap().rows;
    let full = rows.iter().find(|r| r.label == "full").unwrap().auc;
    let no_ldiff = rows.iter().find(|r| r.label == "no-ldiff").unwrap().auc;
    let all = rows.iter().all(|r| full >= r.auc);
    let table: Vec<String> = rows.iter().map(|r| format!("{}={:.4}", r.label, r.auc)).collect();
    (all, full >= no_ldiff, format!("ablation: median AUC {}", table.join(" ")))
}

fn ac9(dir: &Path) -> (bool, String) {
    let times = vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let input = PairInput::synthetic(PairKind::TopologicalGlue, BaseMesh::Cylinder { around: 30, along: 16 }, 0);
    let job = Job::SweepTime { input, config: pair_config(32, 32, 10), times: times.clone(), seeds: (0..5).collect() };
    let rows = execute(&job, &dir.join("time"), None, jobs()).unwrap().rows;
    // highest median AUC, lower geodesic error breaks ties, then the earlier T
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        let b = &rows[best];
        if r.auc > b.auc || (r.auc == b.auc && r.mean_geo_error_x100 < b.mean_geo_error_x100) {
            best = i;
        }
    }
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: auc {:.4} geo {:.3}", r.label, r.auc, r.mean_geo_error_x100))
        .collect();
    (
        best > 0 && best + 1 < rows.len(),
        format!("time sweep: best T = {} ({})", rows[best].label, table.join(", ")),
    )
}

fn ac10(dir: &Path) -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_syncdiff");
    let first = dir.join("first");
    let status = Command::new(bin)
        .args(["match", "--kind", "topological_glue", "--base", "cylinder:16x10", "--seed", "4"])
        .args(["--k", "24", "--descriptor-dim", "32", "--iters", "5", "--out"])
        .arg(&first)
        .status()
        .unwrap();
    assert!(status.success());
    let mut identical = true;
    let mut compared = 0;
    for replay in ["replay_a", "replay_b"] {
        let out = dir.join(replay);
        let status = Command::new(bin)
            .args(["match", "--manifest"])
            .arg(first.join("manifest.json"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        for entry in fs::read_dir(&first).unwrap() {
            let name = entry.unwrap().file_name();
            identical &= fs::read(first.join(&name)).unwrap() == fs::read(out.join(&name)).unwrap();
            compared += 1;
        }
    }
    (identical, format!("determinism: {compared} replayed files byte-identical {identical}"))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let (p, d) = ac1();
    report(&mut lines, 1, p, d);
    let (p, d) = ac2();
    report(&mut lines, 2, p, d);
    let (p, d) = ac3();
    report(&mut lines, 3, p, d);
    let (p, d) = ac4();
    report(&mut lines, 4, p, d);
    let (p, d) = ac5();
    report(&mut lines, 5, p, d);
    let (p, d) = ac6();
    report(&mut lines, 6, p, d);
    let (p, ac7_holds, d) = ac7();
    report(&mut lines, 7, p, d);
    let (p, full_beats_no_ldiff, d) = ac8(dir.path());
    report(&mut lines, 8, p, d);
    let (p, d) = ac9(dir.path());
    report(&mut lines, 9, p, d);
    let (p, d) = ac10(dir.path());
    report(&mut lines, 10, p, d);

    for line in &lines {
        if matches!(line.id, 1..=6 | 10) {
            assert!(line.pass, "AC{} failed: {}", line.id, line.detail);
        }
    }
    assert!(ac7_holds, "refinement made the median error worse or the trace increased");
    assert!(full_beats_no_ldiff, "full method below no-ldiff");
}
