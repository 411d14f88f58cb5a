//! Command-line front end. Five subcommands cover the lab's workflows:
//! `coefficients` (transport coefficients from the linearized operator),
//! `simulate-vmb` (kinetic run with time series, snapshots, manifest),
//! `simulate-nsfm` (limit fluid run), `sweep` (epsilon convergence study
//! with verdicts), and `verify` (artifact integrity + bitwise re-run).
//!
//! Exit codes: 0 success, 1 internal error, 2 verdict failure,
//! 3 configuration error, 4 numerical abort.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::collision::transport::transport_coefficients_from_hats;
use crate::collision::{
    assemble_linearized, hat_functions, CollisionKernel, CollisionTable, LinearizedOperator,
};
use crate::config::{InitConfig, RunConfig};
use crate::error::{Error, Result};
use crate::fields::{divergence, gauss_residuals, EMState};
use crate::fourier::{SpectralOps, TAU};
use crate::functionals::energy_report;
use crate::grid::{build_spatial_grid, build_velocity_grid, SpatialGrid, VelocityGrid};
use crate::harness::{
    prepare_nsfm_init, run_sweep, SweepContext, SweepInit, Verdict, VerdictReport,
};
use crate::io::{read_snapshot, write_csv, write_snapshot, CsvRow, Manifest};
use crate::nsfm::{NSFMConfig, NSFMSolver, NSFMStatus};
use crate::vmb::{well_prepared_init, DtPolicy, RunStatus, VMBConfig, VMBSolver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const MANIFEST_NAME: &str = "manifest.json";
const OPERATOR_CACHE: &str = "linearized.vmbl";

#[derive(Parser)]
#[command(
    name = "vmblab",
    about = "Two-species kinetic/fluid laboratory: scaled Vlasov-Maxwell-Boltzmann runs, \
             their Navier-Stokes-Fourier-Maxwell limit, and energy-functional diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the transport coefficients (viscosity, heat conductivity,
    /// electrical conductivity) from the linearized collision operator.
    Coefficients {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the scaled kinetic system; emit a CSV time series,
    /// binary snapshots, and a manifest.
    SimulateVmb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the limit fluid system with Ohm's law.
    SimulateNsfm {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the epsilon sweep against the fluid limit and judge the
    /// convergence rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check an artifact directory: manifest hashes, snapshot checksums,
    /// and a bitwise re-run from the embedded configuration.
    Verify {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Entry point used by the binary; parses `std::env::args`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point: parse `args`, dispatch, map errors to exit codes.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Command::Coefficients { config } => with_config(&config, cmd_coefficients),
        Command::SimulateVmb { config } => with_config(&config, cmd_simulate_vmb),
        Command::SimulateNsfm { config } => with_config(&config, cmd_simulate_nsfm),
        Command::Sweep { config } => with_config(&config, cmd_sweep),
        Command::Verify { dir } => cmd_verify(&dir),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::UnsupportedKernel(_) => EXIT_CONFIG,
                Error::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_INTERNAL,
            }
        }
    }
}

fn with_config(path: &Path, f: fn(&RunConfig, &Path) -> Result<i32>) -> Result<i32> {
    let cfg = RunConfig::from_path(path)?;
    for w in cfg.theorem_warnings() {
        eprintln!("warning: {w}");
    }
    let out = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out)?;
    f(&cfg, &out)
}

/// Grids plus the (possibly cached) linearized collision operator.
struct Lab {
    vgrid: VelocityGrid,
    spatial: SpatialGrid,
    op: LinearizedOperator,
    kernel: CollisionKernel,
}

fn cache_matches(op: &LinearizedOperator, cfg: &RunConfig) -> bool {
    let p = &op.provenance;
    p.points_per_axis == cfg.grid.velocity_points
        && p.v_max == cfg.grid.v_max
        && p.gamma == cfg.kernel.gamma
        && p.angular_nodes == cfg.kernel.angular_nodes
}

fn setup(cfg: &RunConfig, out: &Path) -> Result<Lab> {
    let vgrid = build_velocity_grid(cfg.grid.velocity_points, cfg.grid.v_max)?;
    let spatial = build_spatial_grid(
        cfg.grid.spatial_dim,
        cfg.grid.spatial_points,
        cfg.grid.box_length,
    )?;
    let kernel = CollisionKernel::new(
        cfg.kernel.gamma,
        cfg.kernel.profile()?,
        cfg.kernel.angular_nodes,
    )?;
    let cache = out.join(OPERATOR_CACHE);
    let op = match LinearizedOperator::load(&cache, &vgrid) {
        Ok(op) if cache_matches(&op, cfg) => op,
        _ => {
            let op = assemble_linearized(&kernel, &vgrid)?;
            op.save(&cache)?;
            op
        }
    };
    Ok(Lab {
        vgrid,
        spatial,
        op,
        kernel,
    })
}

/// Macroscopic initial data on `grid` for the named profile. Every profile
/// is Gauss-consistent (div E = n, div B = 0) and divergence-free in u by
/// construction, so both solvers accept it unchanged.
pub fn build_init(init: &InitConfig, grid: &SpatialGrid) -> SweepInit {
    let nx = grid.n_nodes();
    let amp = init.amplitude;
    let l = grid.box_length[0];
    let k = TAU / l;
    let zeros = || vec![0.0; nx];
    let mut out = SweepInit {
        rho: zeros(),
        u: [zeros(), zeros(), zeros()],
        theta: zeros(),
        n: zeros(),
        e: [zeros(), zeros(), zeros()],
        b: [zeros(), zeros(), zeros()],
    };
    if init.profile == "equilibrium" {
        return out;
    }
    for x in 0..nx {
        let c = grid.node_coords(x);
        // shear components depend only on coordinates they do not advect
        out.u[1][x] = amp * (k * c[0]).sin();
        if grid.dim >= 2 {
            out.u[0][x] = amp * (k * c[1]).sin();
        }
        out.theta[x] = amp * (k * c[0]).cos();
        out.rho[x] = -out.theta[x];
        if init.profile == "charged" {
            out.n[x] = amp * (k * c[0]).cos();
            out.e[0][x] = amp / k * (k * c[0]).sin();
            out.b[2][x] = amp * (k * c[0]).cos();
        }
    }
    out
}

fn init_em(init: &SweepInit) -> EMState {
    EMState {
        e: init.e.clone(),
        b: init.b.clone(),
        t: 0.0,
    }
}

fn save_manifest(mut manifest: Manifest, out: &Path, names: &[String]) -> Result<()> {
    for name in names {
        manifest.record(out, name)?;
    }
    manifest.save(&out.join(MANIFEST_NAME))
}

fn new_manifest(command: &str, cfg: &RunConfig) -> Manifest {
    Manifest::new(json!({ "command": command, "config": cfg.to_json() }))
}

fn cmd_coefficients(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let lab = setup(cfg, out)?;
    let hats = hat_functions(&lab.op, &lab.vgrid)?;
    let tc = transport_coefficients_from_hats(&lab.op, &lab.vgrid, &hats)?;
    println!("mu     = {:.12e}", tc.mu);
    println!("kappa  = {:.12e}", tc.kappa);
    println!("sigma  = {:.12e}", tc.sigma);
    println!(
        "coercivity_delta = {:.12e} (gamma = {}, {} velocity nodes/axis)",
        lab.op.coercivity_delta, cfg.kernel.gamma, cfg.grid.velocity_points
    );
    let text = serde_json::to_string_pretty(&tc)
        .map_err(|e| Error::Format(format!("coefficient serialization: {e}")))?;
    std::fs::write(out.join("coefficients.json"), text)?;
    save_manifest(
        new_manifest("coefficients", cfg),
        out,
        &["coefficients.json".into(), OPERATOR_CACHE.into()],
    )?;
    Ok(EXIT_OK)
}

fn cmd_simulate_vmb(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let section = cfg
        .vmb
        .as_ref()
        .ok_or_else(|| Error::Config("simulate-vmb requires a [vmb] section".into()))?;
    let lab = setup(cfg, out)?;
    let table = if section.nonlinear {
        Some(CollisionTable::build(&lab.kernel, &lab.vgrid)?)
    } else {
        None
    };
    let solver = VMBSolver::new(&lab.vgrid, &lab.spatial, &lab.op, table.as_ref());
    let init_fields = build_init(&cfg.init, &lab.spatial);
    let state0 = well_prepared_init(
        &init_fields.rho,
        &init_fields.u,
        &init_fields.theta,
        &init_fields.n,
        &init_em(&init_fields),
        &lab.vgrid,
        &solver.ops,
    )?;
    let run_cfg = VMBConfig {
        eps: section.eps,
        t_end: section.t_end,
        dt_policy: DtPolicy::Fixed(section.dt),
        conservation_fixup: section.conservation_fixup,
        frame_stride: section.frame_stride,
    };
    let run = solver.run(&run_cfg, state0)?;

    let params = cfg.functionals.params();
    let mut extra_names: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for frame in &run.frames {
        let report = energy_report(
            &frame.f,
            &frame.em,
            section.eps,
            &params,
            frame.t,
            &lab.vgrid,
            &solver.ops,
            cfg.kernel.gamma,
        )?;
        if rows.is_empty() {
            extra_names = report.weighted.keys().cloned().collect();
            for kk in 0..report.e_k_to_n0.len() {
                extra_names.push(format!("E_{{{kk}->{}}}", params.n0));
            }
            extra_names.extend(["lambda_f".into(), "lambda_E".into(), "lambda_B".into()]);
        }
        let (mass_plus, mass_minus) = solver.species_masses(&frame.f);
        let (gauss_e, gauss_b) = gauss_residuals(&solver.ops, &frame.em, &frame.f, &lab.vgrid)?;
        let mut extra: Vec<f64> = report.weighted.values().copied().collect();
        extra.extend(report.e_k_to_n0.iter().copied());
        extra.extend([report.lambda_f, report.lambda_e, report.lambda_b]);
        rows.push(CsvRow {
            t: frame.t,
            e_n: report.e_n,
            d_n: report.d_n,
            mass_plus,
            mass_minus,
            gauss_e,
            gauss_b,
            extra,
        });
    }
    write_csv(&out.join("series.csv"), &extra_names, &rows)?;
    let mut names = vec!["series.csv".to_string(), OPERATOR_CACHE.to_string()];
    if cfg.output.snapshot_stride > 0 {
        for (i, frame) in run.frames.iter().enumerate() {
            if i % cfg.output.snapshot_stride == 0 || i + 1 == run.frames.len() {
                let name = format!("snapshot_{i:05}.vmbs");
                write_snapshot(
                    &out.join(&name),
                    frame,
                    &lab.vgrid,
                    &lab.spatial,
                    section.eps,
                )?;
                names.push(name);
            }
        }
    }
    save_manifest(new_manifest("simulate-vmb", cfg), out, &names)?;
    match run.status {
        RunStatus::Completed => {
            println!(
                "completed: {} frames to t = {:.6}, final E_N = {:.6e}",
                run.frames.len(),
                run.frames.last().map(|f| f.t).unwrap_or(0.0),
                rows.last().map(|r| r.e_n).unwrap_or(f64::NAN)
            );
            Ok(EXIT_OK)
        }
        RunStatus::AbortedNonFinite { t } => {
            eprintln!("numerical abort at t = {t:.6}; partial artifacts written");
            Ok(EXIT_NUMERICAL)
        }
    }
}

fn cmd_simulate_nsfm(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let section = cfg
        .nsfm
        .as_ref()
        .ok_or_else(|| Error::Config("simulate-nsfm requires a [nsfm] section".into()))?;
    let lab = setup(cfg, out)?;
    let hats = hat_functions(&lab.op, &lab.vgrid)?;
    let tc = transport_coefficients_from_hats(&lab.op, &lab.vgrid, &hats)?;
    let solver = NSFMSolver::new(&lab.spatial);
    let ops = SpectralOps::new(&lab.spatial);
    let init_fields = build_init(&cfg.init, &lab.spatial);
    let state0 = prepare_nsfm_init(&init_fields, &ops)?;
    let run_cfg = NSFMConfig {
        mu: tc.mu,
        kappa: tc.kappa,
        sigma: tc.sigma,
        dt: section.dt,
        t_end: section.t_end,
        frame_stride: section.frame_stride,
    };
    let run = solver.run(&run_cfg, state0)?;

    let vol = ops.grid.cell_volume();
    let mut rows = Vec::new();
    for (frame, &(t, h, d)) in run.frames.iter().zip(&run.energy_series) {
        let div_e = divergence(&ops, &frame.e)?;
        let mut ge = vec![0.0; div_e.len()];
        for x in 0..ge.len() {
            ge[x] = div_e[x] - frame.n[x];
        }
        let div_b = divergence(&ops, &frame.b)?;
        // species "masses" of the moment representation: integral of rho +- n/2
        let rho = frame.rho();
        let mass = |sign: f64| -> f64 {
            rho.iter()
                .zip(&frame.n)
                .map(|(r, n)| (r + sign * 0.5 * n) * vol)
                .sum()
        };
        rows.push(CsvRow {
            t,
            e_n: h,
            d_n: d,
            mass_plus: mass(1.0),
            mass_minus: mass(-1.0),
            gauss_e: ops.l2_norm_sq(&ge).sqrt(),
            gauss_b: ops.l2_norm_sq(&div_b).sqrt(),
            extra: vec![],
        });
    }
    write_csv(&out.join("series.csv"), &[], &rows)?;
    save_manifest(
        new_manifest("simulate-nsfm", cfg),
        out,
        &["series.csv".into(), OPERATOR_CACHE.into()],
    )?;
    match run.status {
        NSFMStatus::Completed => {
            println!(
                "completed: {} frames to t = {:.6}, final energy = {:.6e}",
                run.frames.len(),
                run.frames.last().map(|f| f.t).unwrap_or(0.0),
                rows.last().map(|r| r.e_n).unwrap_or(f64::NAN)
            );
            Ok(EXIT_OK)
        }
        NSFMStatus::AbortedNonFinite { t } => {
            eprintln!("numerical abort at t = {t:.6}; partial artifacts written");
            Ok(EXIT_NUMERICAL)
        }
    }
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let section = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep requires a [sweep] section".into()))?;
    let lab = setup(cfg, out)?;
    let fine = build_spatial_grid(
        cfg.grid.spatial_dim,
        2 * cfg.grid.spatial_points,
        cfg.grid.box_length,
    )?;
    let table = match &cfg.vmb {
        Some(v) if v.nonlinear => Some(CollisionTable::build(&lab.kernel, &lab.vgrid)?),
        _ => None,
    };
    let hats = hat_functions(&lab.op, &lab.vgrid)?;
    let params = cfg.functionals.params();
    let ctx = SweepContext {
        vgrid: &lab.vgrid,
        coarse: &lab.spatial,
        fine: &fine,
        op: &lab.op,
        table: table.as_ref(),
        hats: &hats,
        params: &params,
        gamma: cfg.kernel.gamma,
    };
    let init = build_init(&cfg.init, &fine);
    let table_out = run_sweep(&section.plan(), &init, &ctx)?;

    let mut csv = String::from("eps,u_err,theta_err,n_err,e_err,b_err,i_eps,completed\n");
    for r in &table_out.rows {
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.eps, r.u_err, r.theta_err, r.n_err, r.e_err, r.b_err, r.i_eps, r.completed
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv)?;

    let mut verdicts = Vec::new();
    for r in &table_out.rows {
        verdicts.push(Verdict {
            name: format!("completed_eps_{}", r.eps),
            pass: r.completed,
            measured: if r.completed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: "kinetic run reached t_end with finite state".into(),
        });
    }
    for (e0, e1, u_ratio, i_ratio) in table_out.halving_ratios() {
        verdicts.push(Verdict {
            name: format!("i_eps_ratio_{e0}_to_{e1}"),
            pass: (3.0..=5.0).contains(&i_ratio),
            measured: i_ratio,
            threshold: 4.0,
            detail: "micro-dissipation integral should scale ~eps^2 (window [3,5])".into(),
        });
        verdicts.push(Verdict {
            name: format!("u_err_ratio_{e0}_to_{e1}"),
            pass: (1.4..=2.8).contains(&u_ratio),
            measured: u_ratio,
            threshold: 2.0,
            detail: "velocity-moment error should scale ~eps (window [1.4,2.8])".into(),
        });
    }
    let report = VerdictReport { verdicts };
    for v in &report.verdicts {
        println!(
            "{} {}: measured {:.4e} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.measured,
            v.detail
        );
    }
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("verdict serialization: {e}")))?;
    std::fs::write(out.join("verdicts.json"), text)?;
    save_manifest(
        new_manifest("sweep", cfg),
        out,
        &[
            "sweep.csv".into(),
            "verdicts.json".into(),
            OPERATOR_CACHE.into(),
        ],
    )?;
    Ok(if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}

fn cmd_verify(dir: &Path) -> Result<i32> {
    let manifest = Manifest::load(&dir.join(MANIFEST_NAME))?;
    let mut all_ok = true;
    for (name, ok) in manifest.verify_outputs(dir) {
        println!("{} hash {}", if ok { "PASS" } else { "FAIL" }, name);
        all_ok &= ok;
    }
    for name in manifest.outputs.keys() {
        if name.ends_with(".vmbs") {
            match read_snapshot(&dir.join(name)) {
                Ok(_) => println!("PASS checksum {name}"),
                Err(e) => {
                    println!("FAIL checksum {name}: {e}");
                    all_ok = false;
                }
            }
        }
    }
    let command = manifest.config["command"]
        .as_str()
        .ok_or_else(|| Error::Format("manifest lacks a command field".into()))?
        .to_string();
    let mut cfg: RunConfig = serde_json::from_value(manifest.config["config"].clone())
        .map_err(|e| Error::Format(format!("manifest config: {e}")))?;
    cfg.validate()?;
    let rerun = dir.join("rerun");
    std::fs::create_dir_all(&rerun)?;
    cfg.output.dir = rerun.to_string_lossy().into_owned();
    let code = match command.as_str() {
        "coefficients" => cmd_coefficients(&cfg, &rerun)?,
        "simulate-vmb" => cmd_simulate_vmb(&cfg, &rerun)?,
        "simulate-nsfm" => cmd_simulate_nsfm(&cfg, &rerun)?,
        "sweep" => cmd_sweep(&cfg, &rerun)?,
        other => {
            return Err(Error::Format(format!(
                "manifest names an unknown command '{other}'"
            )))
        }
    };
    let rerun_manifest = Manifest::load(&rerun.join(MANIFEST_NAME))?;
    let bitwise = rerun_manifest.outputs == manifest.outputs;
    std::fs::remove_dir_all(&rerun)?;
    println!(
        "{} bitwise re-run reproduction (exit {code} on re-run)",
        if bitwise { "PASS" } else { "FAIL" }
    );
    all_ok &= bitwise;
    Ok(if all_ok { EXIT_OK } else { EXIT_VERDICT })
}
