//! `glp` — experiments on the Gates-Lebowitz-Penrose free energy.
//!
//! Subcommands: `constants`, `instanton`, `trial`, `minimize`, `analyze`,
//! `scan`. Outputs are CSV/JSON (plus optional static SVG), every file is
//! written atomically with a run manifest next to it, and all numerics are
//! emitted at full double precision. Exit codes: 0 success, 1 numeric
//! failure, 2 invalid arguments.

mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};

use glp_core::analysis::{analyze_droplet, export_mask_csv, slice};
use glp_core::constants::ModelConstants;
use glp_core::field::{glp_energy, load_field, save_field, ModelParams};
use glp_core::kernel::{make_kernel, KernelFamily, KernelSpec};
use glp_core::minimize::{multi_start_sweep, MinimizerConfig, SweepOutcome};
use glp_core::reduced::{
    excess_from_mean, mean_from_excess, predicted_energy_at, predicted_min_energy,
};
use glp_core::trial::{build_m0, build_trial, TrialSpec, WallProfile};

use out::{flat_json, full, manifest_comment, JsonVal, Manifest};

#[derive(Parser)]
#[command(name = "glp", version, about = "GLP free-energy droplet experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Pin manifest timestamps to 0 for byte-reproducible manifests
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derived constants: m_beta, chi, S, C*, eta*, K*, and n_c(L)
    Constants(ConstantsArgs),
    /// Solve the 1-D front and write "z,m" CSV with a trailing "# S=" line
    Instanton(InstantonArgs),
    /// Build a fractional-droplet trial field and report its energy
    Trial(TrialArgs),
    /// Multi-start constrained minimization at one excess amplitude
    Minimize(MinimizeArgs),
    /// Level-set droplet report of a saved field
    Analyze(AnalyzeArgs),
    /// Scan the excess amplitude K across the droplet transition
    Scan(ScanArgs),
}

#[derive(Args)]
struct FrontOpts {
    /// Half-width of the 1-D front window
    #[arg(long)]
    z: Option<f64>,
    /// 1-D front grid points per kernel range
    #[arg(long, default_value_t = 32)]
    front_resolution: u32,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    l: f64,
    /// Cells per axis (must be a multiple of L with at least 4 cells per unit)
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "indicator")]
    kernel: String,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, default_value = "indicator")]
    kernel: String,
    #[command(flatten)]
    front: FrontOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstantonArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value = "indicator")]
    kernel: String,
    #[command(flatten)]
    front: FrontOpts,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Excess amplitude K in n = -m_beta + K L^{-d/(d+1)}
    #[arg(long)]
    k: f64,
    /// Droplet volume fraction in [0, 1]
    #[arg(long)]
    eta: f64,
    /// Droplet center cell "i[,j[,k]]" (default: torus center)
    #[arg(long)]
    center: Option<String>,
    #[command(flatten)]
    front: FrontOpts,
    #[arg(long)]
    out_field: PathBuf,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct MinimizerOpts {
    #[arg(long, default_value_t = 4000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    energy_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of extra randomized starts
    #[arg(long, default_value_t = 0)]
    perturb: usize,
    #[arg(long, default_value_t = 0.05)]
    perturb_amplitude: f64,
    /// Droplet fractions for trial starts, comma separated
    #[arg(long, default_value = "0,0.2,0.6666666666666666,0.8,1.0")]
    etas: String,
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Excess amplitude K (exclusive with --n-mean)
    #[arg(long, conflicts_with = "n_mean")]
    k: Option<f64>,
    /// Mean magnetization n (exclusive with --k)
    #[arg(long)]
    n_mean: Option<f64>,
    #[command(flatten)]
    front: FrontOpts,
    #[command(flatten)]
    opt: MinimizerOpts,
    #[arg(long)]
    out_field: PathBuf,
    /// Per-start energy table CSV
    #[arg(long)]
    out_table: Option<PathBuf>,
    /// DropletReport JSON of the winner
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Saved field file (carries d, N, L, beta)
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    k: f64,
    #[arg(long, default_value = "indicator")]
    kernel: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// 0/1 CSV mask of the condensate set C
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Cellwise CSV dump of the field itself
    #[arg(long)]
    field_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    kmin: f64,
    #[arg(long)]
    kmax: f64,
    #[arg(long)]
    steps: usize,
    /// Interpret kmin/kmax as multiples of the computed K*
    #[arg(long)]
    kstar_units: bool,
    #[command(flatten)]
    front: FrontOpts,
    #[command(flatten)]
    opt: MinimizerOpts,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

enum CliError {
    Args(String),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult = Result<(), CliError>;

fn args_err(msg: impl Into<String>) -> CliError {
    CliError::Args(msg.into())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GLP_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Constants(a) => cmd_constants(a, cli.deterministic),
        Cmd::Instanton(a) => cmd_instanton(a, cli.deterministic),
        Cmd::Trial(a) => cmd_trial(a, cli.deterministic),
        Cmd::Minimize(a) => cmd_minimize(a, cli.deterministic),
        Cmd::Analyze(a) => cmd_analyze(a, cli.deterministic),
        Cmd::Scan(a) => cmd_scan(a, cli.deterministic),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Args(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_kernel(name: &str, d: usize) -> Result<KernelSpec, CliError> {
    let family = KernelFamily::parse(name)
        .ok_or_else(|| args_err(format!("unknown kernel '{name}' (indicator|bump)")))?;
    KernelSpec::new(family, d).map_err(|e| args_err(e.to_string()))
}

fn check_beta(beta: f64) -> Result<(), CliError> {
    if !(beta > 1.0) {
        return Err(args_err(format!(
            "beta = {beta}: no double well (requires beta > 1)"
        )));
    }
    Ok(())
}

/// Window half-width for the 1-D front: wide enough for the droplet collar.
fn front_window(front: &FrontOpts, d: usize, l: Option<f64>) -> f64 {
    front.z.unwrap_or_else(|| {
        let collar = l
            .map(|l| 2.0 * l.powf((d as f64 - 1.0) / (d as f64 + 1.0)) + 1.0)
            .unwrap_or(0.0);
        collar.max(12.0)
    })
}

fn pipeline(
    beta: f64,
    kernel: KernelSpec,
    front: &FrontOpts,
    l: Option<f64>,
) -> Result<ModelConstants, CliError> {
    check_beta(beta)?;
    let z = front_window(front, kernel.d, l);
    ModelConstants::compute_with(beta, kernel, z, front.front_resolution)
        .map_err(|e| CliError::Run(anyhow!(e)))
}

fn model_params(grid: &GridArgs) -> Result<(ModelParams, KernelSpec), CliError> {
    check_beta(grid.beta)?;
    let spec = parse_kernel(&grid.kernel, grid.d)?;
    let params = ModelParams::new(grid.beta, grid.d, grid.l, grid.n, spec)
        .map_err(|e| args_err(e.to_string()))?;
    Ok((params, spec))
}

fn constants_json(c: &ModelConstants, l: Option<f64>) -> String {
    let mut pairs = vec![
        ("beta", JsonVal::Num(c.beta)),
        ("d", JsonVal::Int(c.d as i64)),
        ("kernel", JsonVal::Str(c.kernel.family.name().into())),
        ("m_beta", JsonVal::Num(c.m_beta)),
        ("chi", JsonVal::Num(c.chi)),
        ("surface_tension", JsonVal::Num(c.surface_tension)),
        ("c_star", JsonVal::Num(c.c_star)),
        ("eta_star", JsonVal::Num(c.eta_star)),
        ("k_star", JsonVal::Num(c.k_star)),
    ];
    if let Some(l) = l {
        pairs.push(("l", JsonVal::Num(l)));
        pairs.push(("n_c", JsonVal::Num(c.n_critical(l))));
    }
    flat_json(&pairs)
}

fn cmd_constants(a: &ConstantsArgs, deterministic: bool) -> CliResult {
    let spec = parse_kernel(&a.kernel, a.d)?;
    let c = pipeline(a.beta, spec, &a.front, a.l)?;
    let json = constants_json(&c, a.l);
    match &a.out {
        Some(path) => {
            let mut m = Manifest::new("constants");
            m.deterministic = deterministic;
            m.kernel = Some(a.kernel.clone());
            m.param("beta", full(a.beta));
            m.param("d", a.d.to_string());
            if let Some(l) = a.l {
                m.param("l", full(l));
            }
            m.emit(path, json.as_bytes())?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_instanton(a: &InstantonArgs, deterministic: bool) -> CliResult {
    let spec = parse_kernel(&a.kernel, a.d)?;
    let c = pipeline(a.beta, spec, &a.front, None)?;
    let profile = &c.instanton;
    let mut buf = Vec::new();
    glp_core::instanton::export_csv(&mut buf, profile)?;
    buf.extend_from_slice(manifest_comment(&a.out).as_bytes());
    buf.push(b'\n');
    let mut m = Manifest::new("instanton");
    m.deterministic = deterministic;
    m.kernel = Some(a.kernel.clone());
    m.param("beta", full(a.beta));
    m.param("d", a.d.to_string());
    m.param("z", full(profile.z_max));
    m.param("h", full(profile.h));
    m.emit(&a.out, &buf)?;
    if let Some(svg_path) = &a.svg {
        let pts: Vec<(f64, f64)> = profile.grid().zip(profile.values.iter().copied()).collect();
        let svg = out::svg_plot(&[("m(z)", pts)], "planar front profile");
        let svg = format!("{svg}<!-- {} -->\n", manifest_comment(svg_path));
        let mut ms = Manifest::new("instanton-svg");
        ms.deterministic = deterministic;
        ms.emit(svg_path, svg.as_bytes())?;
    }
    Ok(())
}

fn parse_center(s: &str, d: usize) -> Result<[usize; 3], CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != d {
        return Err(args_err(format!("--center needs {d} comma-separated indices")));
    }
    let mut c = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        c[i] = p
            .trim()
            .parse()
            .map_err(|_| args_err(format!("bad center index '{p}'")))?;
    }
    Ok(c)
}

fn wall_for(
    c: &ModelConstants,
    l: f64,
) -> Result<WallProfile, CliError> {
    build_m0(&c.instanton, l).map_err(|e| CliError::Run(anyhow!(e)))
}

fn cmd_trial(a: &TrialArgs, deterministic: bool) -> CliResult {
    let (params, spec) = model_params(&a.grid)?;
    if !(0.0..=1.0).contains(&a.eta) {
        return Err(args_err(format!("eta = {} outside [0, 1]", a.eta)));
    }
    let c = pipeline(a.grid.beta, spec, &a.front, Some(a.grid.l))?;
    let wall = wall_for(&c, params.l)?;
    let n = mean_from_excess(a.k, params.l, params.d, c.m_beta);
    let center = match &a.center {
        Some(s) => Some(parse_center(s, params.d)?),
        None => None,
    };
    let trial = build_trial(
        &params,
        &wall,
        &TrialSpec {
            eta: a.eta,
            k: a.k,
            center,
        },
        n,
    )
    .map_err(|e| CliError::Run(anyhow!(e)))?;
    let kernel = params.build_kernel().map_err(|e| CliError::Run(anyhow!(e)))?;
    let energy = glp_energy(&trial.field, &kernel, params.beta).map_err(|e| CliError::Run(anyhow!(e)))?;
    save_field(&a.out_field, &trial.field, params.beta).map_err(|e| CliError::Run(anyhow!(e)))?;
    let mut m = Manifest::new("trial");
    m.deterministic = deterministic;
    m.kernel = Some(a.grid.kernel.clone());
    m.grid = Some((params.d, params.l, params.n));
    m.param("beta", full(params.beta));
    m.param("k", full(a.k));
    m.param("eta", full(a.eta));
    m.emit_manifest_only(&a.out_field)?;
    // side-by-side report: measured energy vs the reduced-model value at
    // this eta, and the minimal prediction
    let predicted_here =
        predicted_energy_at(a.eta, a.k, params.l, params.d, c.m_beta, c.chi, c.surface_tension)
            .map_err(|e| CliError::Run(anyhow!(e)))?;
    let predicted_min =
        predicted_min_energy(a.k, params.l, params.d, c.m_beta, c.chi, c.surface_tension)
            .map_err(|e| CliError::Run(anyhow!(e)))?;
    let json = flat_json(&[
        ("eta", JsonVal::Num(a.eta)),
        ("k", JsonVal::Num(a.k)),
        ("n_mean", JsonVal::Num(n)),
        ("radius", JsonVal::Num(trial.radius)),
        ("r0", JsonVal::Num(trial.r0)),
        ("alpha", JsonVal::Num(trial.alpha)),
        ("alpha_asymptotic", JsonVal::Num(trial.alpha_asymptotic)),
        ("energy_local", JsonVal::Num(energy.local)),
        ("energy_interaction", JsonVal::Num(energy.interaction)),
        ("energy_total", JsonVal::Num(energy.total)),
        ("energy_glp_raw", JsonVal::Num(energy.glp_raw)),
        ("predicted_at_eta", JsonVal::Num(predicted_here)),
        ("predicted_min", JsonVal::Num(predicted_min)),
    ]);
    match &a.out_report {
        Some(path) => {
            let mut mr = Manifest::new("trial-report");
            mr.deterministic = deterministic;
            mr.param("k", full(a.k));
            mr.param("eta", full(a.eta));
            mr.emit(path, json.as_bytes())?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn parse_etas(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| args_err(format!("bad eta '{p}'")))
        })
        .collect()
}

fn minimizer_config(o: &MinimizerOpts) -> MinimizerConfig {
    MinimizerConfig {
        max_iters: o.max_iters,
        grad_tol: o.grad_tol,
        energy_tol: o.energy_tol,
        seed: o.seed,
        perturb: if o.perturb > 0 {
            Some((o.perturb, o.perturb_amplitude))
        } else {
            None
        },
        ..Default::default()
    }
}

fn run_sweep_point(
    params: &ModelParams,
    c: &ModelConstants,
    wall: &WallProfile,
    kernel: &glp_core::kernel::DiscreteKernel,
    k: f64,
    etas: &[f64],
    config: &MinimizerConfig,
) -> anyhow::Result<SweepOutcome> {
    Ok(multi_start_sweep(
        params,
        wall,
        kernel,
        k,
        etas,
        c.chi,
        c.surface_tension,
        config,
    )?)
}

fn cmd_minimize(a: &MinimizeArgs, deterministic: bool) -> CliResult {
    let (params, spec) = model_params(&a.grid)?;
    let c = pipeline(a.grid.beta, spec, &a.front, Some(a.grid.l))?;
    let k = match (a.k, a.n_mean) {
        (Some(k), None) => k,
        (None, Some(n)) => excess_from_mean(n, params.l, params.d, c.m_beta),
        _ => return Err(args_err("exactly one of --k or --n-mean is required")),
    };
    if k <= 0.0 {
        return Err(args_err(format!("K = {k} must be positive")));
    }
    let wall = wall_for(&c, params.l)?;
    let kernel = params.build_kernel().map_err(|e| CliError::Run(anyhow!(e)))?;
    let etas = parse_etas(&a.opt.etas)?;
    let config = minimizer_config(&a.opt);
    let outcome = run_sweep_point(&params, &c, &wall, &kernel, k, &etas, &config)?;
    save_field(&a.out_field, &outcome.best.field, params.beta)
        .map_err(|e| CliError::Run(anyhow!(e)))?;
    let mut m = Manifest::new("minimize");
    m.deterministic = deterministic;
    m.kernel = Some(a.grid.kernel.clone());
    m.grid = Some((params.d, params.l, params.n));
    m.seed = Some(a.opt.seed);
    m.param("beta", full(params.beta));
    m.param("k", full(k));
    m.param("n_mean", full(outcome.n));
    m.param("grad_tol", full(a.opt.grad_tol));
    m.param("max_iters", a.opt.max_iters.to_string());
    m.emit_manifest_only(&a.out_field)?;
    if let Some(table) = &a.out_table {
        let mut csv = String::from("start_label,energy,iterations,converged\n");
        for r in &outcome.records {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                r.start_label,
                full(r.energy.total),
                r.iterations,
                r.converged
            ));
        }
        csv.push_str(&manifest_comment(table));
        csv.push('\n');
        let mut mt = Manifest::new("minimize-table");
        mt.deterministic = deterministic;
        mt.param("k", full(k));
        mt.emit(table, csv.as_bytes())?;
    }
    if let Some(report) = &a.out_report {
        let r = analyze_droplet(&outcome.best.field, &kernel, params.beta, k)
            .map_err(|e| CliError::Run(anyhow!(e)))?;
        let mut mr = Manifest::new("minimize-report");
        mr.deterministic = deterministic;
        mr.param("k", full(k));
        mr.emit(report, r.to_json().as_bytes())?;
    }
    println!(
        "best start {} energy {} ({} iterations, converged: {})",
        outcome.best.start_label,
        full(outcome.best.energy.total),
        outcome.best.iterations,
        outcome.best.converged,
    );
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs, deterministic: bool) -> CliResult {
    let (field, beta) = load_field(&a.field).map_err(|e| CliError::Run(anyhow!(e)))?;
    check_beta(beta)?;
    let spec = parse_kernel(&a.kernel, field.d)?;
    let npu = field.n as f64 / field.l;
    if (npu - npu.round()).abs() > 1e-9 {
        return Err(args_err("field grid does not align with the kernel range"));
    }
    let kernel =
        make_kernel(&spec, npu.round() as u32).map_err(|e| CliError::Run(anyhow!(e)))?;
    let report = analyze_droplet(&field, &kernel, beta, a.k).map_err(|e| CliError::Run(anyhow!(e)))?;
    let json = report.to_json();
    match &a.out {
        Some(path) => {
            let mut m = Manifest::new("analyze");
            m.deterministic = deterministic;
            m.kernel = Some(a.kernel.clone());
            m.grid = Some((field.d, field.l, field.n));
            m.param("beta", full(beta));
            m.param("k", full(a.k));
            m.param("field", a.field.display().to_string());
            m.emit(path, json.as_bytes())?;
        }
        None => print!("{json}"),
    }
    if let Some(mask_path) = &a.mask_out {
        let s = slice(&field, beta, a.k).map_err(|e| CliError::Run(anyhow!(e)))?;
        let mut buf = Vec::new();
        export_mask_csv(&mut buf, &s.mask_c)?;
        buf.extend_from_slice(manifest_comment(mask_path).as_bytes());
        buf.push(b'\n');
        let mut m = Manifest::new("analyze-mask");
        m.deterministic = deterministic;
        m.param("k", full(a.k));
        m.emit(mask_path, &buf)?;
    }
    if let Some(csv_path) = &a.field_csv {
        let mut buf = Vec::new();
        glp_core::field::export_csv(&mut buf, &field).map_err(|e| CliError::Run(anyhow!(e)))?;
        buf.extend_from_slice(manifest_comment(csv_path).as_bytes());
        buf.push(b'\n');
        let mut m = Manifest::new("analyze-field-csv");
        m.deterministic = deterministic;
        m.emit(csv_path, &buf)?;
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs, deterministic: bool) -> CliResult {
    let (params, spec) = model_params(&a.grid)?;
    if a.steps < 2 {
        return Err(args_err("--steps must be at least 2"));
    }
    if !(a.kmin > 0.0 && a.kmax > a.kmin) {
        return Err(args_err("need 0 < kmin < kmax"));
    }
    let c = pipeline(a.grid.beta, spec, &a.front, Some(a.grid.l))?;
    let unit = if a.kstar_units { c.k_star } else { 1.0 };
    let wall = wall_for(&c, params.l)?;
    let kernel = params.build_kernel().map_err(|e| CliError::Run(anyhow!(e)))?;
    let etas = parse_etas(&a.opt.etas)?;
    let config = minimizer_config(&a.opt);
    let mut rows = String::from("K,eta_measured,eta_predicted,energy,energy_predicted\n");
    let mut failures: Vec<String> = Vec::new();
    let mut curve_meas: Vec<(f64, f64)> = Vec::new();
    let mut curve_pred: Vec<(f64, f64)> = Vec::new();
    for i in 0..a.steps {
        let k = unit * (a.kmin + (a.kmax - a.kmin) * i as f64 / (a.steps - 1) as f64);
        let predicted_energy =
            predicted_min_energy(k, params.l, params.d, c.m_beta, c.chi, c.surface_tension)
                .map_err(|e| CliError::Run(anyhow!(e)))?;
        match run_sweep_point(&params, &c, &wall, &kernel, k, &etas, &config) {
            Ok(outcome) => {
                let s = slice(&outcome.best.field, params.beta, k)
                    .map_err(|e| CliError::Run(anyhow!(e)))?;
                rows.push_str(&format!(
                    "{},{},{},{},{}\n",
                    full(k),
                    full(s.eta_measured),
                    full(outcome.eta_predicted),
                    full(outcome.best.energy.total),
                    full(predicted_energy)
                ));
                curve_meas.push((k, s.eta_measured));
                curve_pred.push((k, outcome.eta_predicted));
                eprintln!(
                    "K = {k:.6}: eta = {:.4} (predicted {:.4})",
                    s.eta_measured, outcome.eta_predicted
                );
            }
            Err(e) => {
                rows.push_str(&format!("{},nan,nan,nan,{}\n", full(k), full(predicted_energy)));
                failures.push(format!("# K={} failed: {e}", full(k)));
            }
        }
    }
    for f in &failures {
        rows.push_str(f);
        rows.push('\n');
    }
    rows.push_str(&manifest_comment(&a.out));
    rows.push('\n');
    let mut m = Manifest::new("scan");
    m.deterministic = deterministic;
    m.kernel = Some(a.grid.kernel.clone());
    m.grid = Some((params.d, params.l, params.n));
    m.seed = Some(a.opt.seed);
    m.param("beta", full(params.beta));
    m.param("kmin", full(a.kmin));
    m.param("kmax", full(a.kmax));
    m.param("steps", a.steps.to_string());
    m.param("kstar_units", a.kstar_units.to_string());
    m.emit(&a.out, rows.as_bytes())?;
    if let Some(svg_path) = &a.svg {
        let svg = out::svg_plot(
            &[("eta_measured", curve_meas), ("eta_predicted", curve_pred)],
            "droplet fraction vs K",
        );
        let svg = format!("{svg}<!-- {} -->\n", manifest_comment(svg_path));
        let mut ms = Manifest::new("scan-svg");
        ms.deterministic = deterministic;
        ms.emit(svg_path, svg.as_bytes())?;
    }
    Ok(())
}
