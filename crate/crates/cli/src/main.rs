use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use layerdarcy::experiments::{nusselt, sweep_epsilon, transport_sign};
use layerdarcy::io::{
    read_series, read_snapshot, write_checkpoint, write_series, write_snapshot, InitKind, SnapshotHeader,
};
use layerdarcy::ledger::{check_absorbing, check_decay, check_integrated_dissipation, DecayKind, TOL_REL};
use layerdarcy::probes::inequality_probes;
use layerdarcy::{
    compute_constants, eigensolve, field, run, sample_coefficients, BoundLedger, DiffusionOperator,
    EmbeddingConstants, Fourier, Grid, LayerConfig, Setup, SimConfig, Study,
};
use log::info;
use serde_json::json;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "ld", version, about = "Layered porous-media convection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write its series, snapshots and ledger.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ensemble member used as the initial field.
        #[arg(long, default_value_t = 0)]
        member: usize,
    },
    /// Run the sharp model and several transition widths from one initial field.
    SweepEps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Time-averaged Nusselt number of a stored series.
    Nusselt {
        #[arg(long)]
        series: PathBuf,
        /// Start and end of the averaging window, `a,b`.
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<f64>,
        /// Configuration used for the transport sign; defaults to the
        /// `config.toml` next to the series.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Distance between the final states of two runs.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// `l2`, `lr:<r>` or `hs:<s>`.
        #[arg(long, default_value = "hs:0.75")]
        norm: String,
    },
    /// Check a series against the bounds of a ledger.
    Verify {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Evaluate the bound constants of a configuration.
    Constants {
        #[arg(long)]
        config: PathBuf,
        /// Also write the ledger as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Eigenvalues of the sharp diffusion operator per horizontal mode.
    Eigs {
        #[arg(long)]
        config: PathBuf,
        /// Eigenvalues kept per mode.
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LD_THREADS") {
        let n: usize = v.parse().with_context(|| format!("LD_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Returns `false` when a check ran but did not pass.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, out, member } => cmd_run(&config, &out, member).map(|_| true),
        Command::SweepEps { config, eps, times, out } => cmd_sweep(&config, &eps, &times, &out),
        Command::Nusselt { series, window, config } => {
            let [a, b] = window[..] else {
                bail!("--window takes two values, got {}", window.len());
            };
            cmd_nusselt(&series, (a, b), config)
        }
        Command::Compare { a, b, norm } => cmd_compare(&a, &b, &norm).map(|_| true),
        Command::Verify { series, ledger } => cmd_verify(&series, &ledger),
        Command::Constants { config, json } => cmd_constants(&config, json.as_deref()).map(|_| true),
        Command::Eigs { config, count, out } => cmd_eigs(&config, count, out.as_deref()).map(|_| true),
    }
}

fn load(config: &Path, extra_eps: &[f64]) -> Result<(SimConfig, Setup, Study)> {
    let sim = SimConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    let setup = sim.setup(extra_eps)?;
    info!(
        "grid {}x{}x{}, delta {:.4e}, C_p {:.4} ({:?})",
        setup.grid.nx,
        setup.grid.ny,
        setup.grid.nz(),
        setup.delta,
        setup.cp.value,
        setup.cp.provenance
    );
    let study = Study::new(&setup.cfg, &setup.grid, setup.delta)?;
    Ok((sim, setup, study))
}

fn ledger(setup: &Setup, study: &Study) -> Result<BoundLedger> {
    let fields = study.ensemble(&setup.ensemble)?;
    let op = DiffusionOperator::new(&setup.grid, study.fourier.clone(), &sample_coefficients(&setup.cfg, &setup.grid, 0.0)?)?;
    let probes = inequality_probes(&setup.cfg, &op, &study.spectrum, &fields, setup.run.r, setup.run.s)?;
    Ok(compute_constants(
        &setup.cfg,
        setup.delta,
        setup.run.r,
        setup.cp,
        EmbeddingConstants::from_probes(&probes),
    )?)
}

fn initial_field(sim: &SimConfig, setup: &Setup, study: &Study, member: usize) -> Result<Vec<f64>> {
    Ok(match sim.init.kind {
        InitKind::Random => {
            let mut spec = setup.ensemble.clone();
            spec.count = spec.count.max(member + 1);
            study.ensemble(&spec)?.swap_remove(member)
        }
        InitKind::Conduction => study.problem(setup.model)?.conduction_state(),
        InitKind::Zero => vec![0.0; setup.grid.len()],
    })
}

fn cmd_run(config: &Path, out: &Path, member: usize) -> Result<()> {
    let (sim, setup, study) = load(config, &[])?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), sim.to_toml()?)?;
    let problem = study.problem(setup.model)?;
    let psi0 = initial_field(&sim, &setup, &study, member)?;
    info!("running {} to t = {}", setup.model.tag(), setup.run.t_end);
    let result = run(&problem, &psi0, &setup.run)?;
    write_series(&out.join("series.csv"), &result.series)?;
    for (i, s) in result.snapshots.iter().enumerate() {
        write_snapshot(out, &format!("snap_{i:04}"), &setup.grid, s)?;
    }
    write_snapshot(out, "final", &setup.grid, &result.final_state)?;
    write_checkpoint(out, "final", &setup.grid, &result.final_state, setup.run.scheme, None)?;
    let ledger = ledger(&setup, &study)?;
    fs::write(out.join("ledger.json"), ledger.to_json()?)?;
    let last = result.series.rows.last().expect("a run has at least one row");
    info!(
        "done: {} steps, t = {}, |psi|_2 = {:.4e}, Nu running = {:.4e}",
        result.final_state.step, last.t, last.l2, last.nu_avg
    );
    Ok(())
}

fn cmd_sweep(config: &Path, eps: &[f64], times: &[f64], out: &Path) -> Result<bool> {
    let (sim, setup, study) = load(config, eps)?;
    let psi0 = initial_field(&sim, &setup, &study, 0)?;
    let sweep = sweep_epsilon(&study, &psi0, eps, times, &setup.run)?;
    fs::create_dir_all(out)?;
    let report = serde_json::to_string_pretty(&sweep.report)?;
    fs::write(out.join("convergence.json"), &report)?;
    let mut csv = String::from("epsilon,t,l2_sq,hs\n");
    for (e, &epsilon) in sweep.report.epsilons.iter().enumerate() {
        for (k, &t) in sweep.report.sample_times.iter().enumerate() {
            csv += &format!("{epsilon:e},{t:e},{:e},{:e}\n", sweep.report.l2_sq[e][k], sweep.report.hs[e][k]);
        }
    }
    fs::write(out.join("convergence.csv"), csv)?;
    for s in &sweep.series {
        let name = match s.meta.model.as_str() {
            "sharp" => "series_sharp.csv".to_string(),
            _ => format!("series_eps_{}.csv", s.meta.epsilon),
        };
        write_series(&out.join(name), s)?;
    }
    println!("{report}");
    Ok(sweep.report.passed)
}

fn cmd_nusselt(series: &Path, window: (f64, f64), config: Option<PathBuf>) -> Result<bool> {
    let ts = read_series(series)?;
    let est = nusselt(&ts, window)?;
    let config = config.or_else(|| {
        let p = series.parent()?.join("config.toml");
        p.exists().then_some(p)
    });
    let sign = match config {
        Some(p) => Some(transport_sign(&SimConfig::load(&p)?.layer_config()?)),
        None => None,
    };
    let report = json!({
        "window": [est.window.0, est.window.1],
        "nu": est.value,
        "nu_first_half": est.half_value,
        "nu_transport": sign.map(|s| s * est.value),
        "converged": est.converged,
        "running": est.running,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(est.converged)
}

enum Norm {
    L2,
    Lr(f64),
    Hs(f64),
}

fn parse_norm(text: &str) -> Result<Norm> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let value = || arg.parse::<f64>().with_context(|| format!("bad norm parameter in {text:?}"));
    Ok(match kind {
        "l2" => Norm::L2,
        "lr" => Norm::Lr(value()?),
        "hs" => Norm::Hs(value()?),
        _ => bail!("unknown norm {text:?}; use l2, lr:<r> or hs:<s>"),
    })
}

fn final_state(dir: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let path = dir.join("final.json");
    read_snapshot(&path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_compare(a: &Path, b: &Path, norm: &str) -> Result<()> {
    let norm = parse_norm(norm)?;
    let (ha, psi_a) = final_state(a)?;
    let (hb, psi_b) = final_state(b)?;
    let grid = ha.grid()?;
    if !grid.compatible(&hb.grid()?) {
        bail!("the two runs use different grids");
    }
    let diff = field::sub(&psi_a, &psi_b);
    let (name, dist, reference) = match norm {
        Norm::L2 => ("l2".to_string(), field::l2_norm(&grid, &diff), field::l2_norm(&grid, &psi_a)),
        Norm::Lr(r) => (format!("lr:{r}"), field::lr_norm(&grid, &diff, r), field::lr_norm(&grid, &psi_a, r)),
        Norm::Hs(s) => {
            let cfg = SimConfig::load(&a.join("config.toml"))?.layer_config()?;
            let fourier = Arc::new(Fourier::new(&grid));
            let op = DiffusionOperator::new(&grid, fourier.clone(), &sample_coefficients(&cfg, &grid, 0.0)?)?;
            let spectrum = eigensolve(&op, None)?;
            let d = spectrum.fractional_norm(&spectrum.expand(&fourier, &diff)?, s)?;
            let r = spectrum.fractional_norm(&spectrum.expand(&fourier, &psi_a)?, s)?;
            (format!("hs:{s}"), d, r)
        }
    };
    let report = json!({
        "norm": name,
        "time_a": ha.time,
        "time_b": hb.time,
        "distance": dist,
        "relative": if reference > 0.0 { dist / reference } else { f64::NAN },
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_verify(series: &Path, ledger_path: &Path) -> Result<bool> {
    let ts = read_series(series)?;
    let ledger = BoundLedger::from_json(&fs::read_to_string(ledger_path)?)?;
    let mut checks = vec![
        check_decay(&ts, &ledger, DecayKind::L2, TOL_REL)?,
        check_decay(&ts, &ledger, DecayKind::Lr, TOL_REL)?,
    ];
    checks.extend(check_absorbing(&ts, &ledger, TOL_REL)?);
    match check_integrated_dissipation(&ts, &ledger, TOL_REL) {
        Ok(c) => checks.push(c),
        Err(e) => log::warn!("integrated dissipation skipped: {e}"),
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = json!({ "passed": passed, "tolerance": TOL_REL, "checks": checks });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(passed)
}

fn cmd_constants(config: &Path, json_out: Option<&Path>) -> Result<()> {
    let (_, setup, study) = load(config, &[])?;
    let ledger = ledger(&setup, &study)?;
    let table = ledger.table();
    let width = table.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut stdout = std::io::stdout().lock();
    for (k, v) in &table {
        writeln!(stdout, "{k:<width$}  {v}")?;
    }
    if let Some(p) = json_out {
        fs::write(p, ledger.to_json()?)?;
    }
    Ok(())
}

fn eigen_table(cfg: &LayerConfig, grid: &Grid, count: usize) -> Result<String> {
    let fourier = Arc::new(Fourier::new(grid));
    let op = DiffusionOperator::new(grid, fourier.clone(), &sample_coefficients(cfg, grid, 0.0)?)?;
    let spectrum = eigensolve(&op, Some(count))?;
    let mut csv = String::from("kx,ky,n,lambda\n");
    for m in 0..fourier.modes() {
        for n in 0..spectrum.cutoff {
            csv += &format!("{},{},{},{:e}\n", fourier.mx[m], fourier.my[m], n + 1, spectrum.eigenvalue(m, n));
        }
    }
    Ok(csv)
}

fn cmd_eigs(config: &Path, count: usize, out: Option<&Path>) -> Result<()> {
    let sim = SimConfig::load(config)?;
    let setup = sim.setup(&[])?;
    let csv = eigen_table(&setup.cfg, &setup.grid, count)?;
    match out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
