use std::path::Path;

use fringe_core::denoise::tv_denoise_with_truth;
use fringe_core::io::{format_sig9, read_field, read_pgm, write_field, write_pgm, write_report};
use fringe_core::{
    alm_demodulate, fp_demodulate, q_error, synthesize, FringeError, LinSolveConfig, Result,
    RunReport, ScalarField, SolverConfig, SyntheticSpec,
};
use rayon::prelude::*;

use crate::output::{ensure_dir, write_preview, write_text, ConfigEcho};
use crate::{
    CompareArgs, DemodArgs, DenoiseArgs, MethodArg, SolverArgs, Status, SurfaceArgs, SweepArgs,
    SynthArgs, UpdateOrder,
};

fn synthetic_spec(surface: &SurfaceArgs, sigma: f64) -> SyntheticSpec {
    let mut spec = SyntheticSpec::canonical(surface.width, surface.height);
    spec.carrier_fx = surface.carrier_fx;
    spec.phase_amplitude = surface.amplitude;
    spec.step_height = surface.step_height;
    spec.background_a = surface.background;
    spec.background_tilt = surface.tilt;
    spec.modulation_b = surface.modulation;
    spec.modulation_falloff = surface.falloff;
    spec.noise_sigma = sigma;
    spec.seed = surface.seed;
    spec
}

fn echo_surface(echo: ConfigEcho, s: &SurfaceArgs) -> ConfigEcho {
    echo.set("width", s.width)
        .set("height", s.height)
        .set("carrier-fx", s.carrier_fx)
        .set("amplitude", s.amplitude)
        .set("step-height", s.step_height)
        .set("background", s.background)
        .set("tilt", s.tilt)
        .set("modulation", s.modulation)
        .set("falloff", s.falloff)
        .set("seed", s.seed)
}

fn solver_config(lambda: f64, s: &SolverArgs) -> SolverConfig {
    SolverConfig {
        lambda,
        r: s.r,
        beta: s.beta,
        eps: s.tol,
        max_outer_iters: s.max_iter,
        sweep: s.update_order.into(),
        linsolve: LinSolveConfig {
            rel_residual_tol: s.inner_tol,
            max_inner_iters: s.inner_max_iter,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn echo_solver(echo: ConfigEcho, lambda: f64, s: &SolverArgs) -> ConfigEcho {
    let order = match s.update_order {
        UpdateOrder::GaussSeidel => "gauss-seidel",
        UpdateOrder::Jacobi => "jacobi",
    };
    echo.set("lambda", lambda)
        .set("r", s.r)
        .set("beta", s.beta)
        .set("tol", s.tol)
        .set("max-iter", s.max_iter)
        .set("update-order", order)
        .set("inner-tol", s.inner_tol)
        .set("inner-max-iter", s.inner_max_iter)
        .flag("record-timing", s.record_timing)
}

fn status(report: &RunReport) -> Status {
    if report.converged {
        Status::Done
    } else {
        Status::NotConverged
    }
}

fn write_run_report(report: &RunReport, record_timing: bool, path: &Path) -> Result<()> {
    if record_timing {
        write_report(report, path)
    } else {
        write_report(&report.without_timing(), path)
    }
}

pub fn synth(args: &SynthArgs) -> Result<Status> {
    let spec = synthetic_spec(&args.surface, args.sigma);
    let truth = synthesize(&spec)?;
    let out = &args.out;
    ensure_dir(out)?;
    write_field(&truth.g_noisy, out.join("g.f64f"))?;
    write_preview(&truth.g_noisy, out, "g")?;
    write_field(&truth.phi, out.join("phi_true.f64f"))?;
    write_field(&truth.omega, out.join("omega.f64f"))?;
    write_field(&truth.a, out.join("a_true.f64f"))?;
    write_field(&truth.b, out.join("b_true.f64f"))?;
    echo_surface(ConfigEcho::new("synth"), &args.surface)
        .set("sigma", args.sigma)
        .set("out", out.display())
        .write(out)?;
    Ok(Status::Done)
}

/// Runs one solver and writes its fields, phase preview and trace into `out`.
fn demodulate_into(
    method: MethodArg,
    g: &ScalarField,
    omega: &ScalarField,
    truth: Option<&ScalarField>,
    cfg: &SolverConfig,
    record_timing: bool,
    out: &Path,
) -> Result<RunReport> {
    let (est, report) = match method {
        MethodArg::Alm => alm_demodulate(g, omega, cfg, truth)?,
        MethodArg::Fp => fp_demodulate(g, omega, cfg, truth)?,
    };
    write_field(&est.phi, out.join("phi.f64f"))?;
    write_field(&est.a, out.join("a.f64f"))?;
    write_field(&est.b, out.join("b.f64f"))?;
    write_preview(&est.phi, out, "phi")?;
    write_run_report(&report, record_timing, &out.join("report.csv"))?;
    Ok(report)
}

fn summary(label: &str, report: &RunReport) -> String {
    let state = if report.converged { "converged" } else { "not converged" };
    let mut line = format!("{label}: {} iterations, {state}", report.iterations());
    if let Some(q) = report.final_q() {
        line.push_str(&format!(", q_err {}", format_sig9(q)));
    }
    line
}

pub fn demod(args: &DemodArgs) -> Result<Status> {
    let g = read_field(&args.pattern)?;
    let omega = read_field(&args.carrier)?;
    g.check_shape(&omega)?;
    let truth = args.truth.as_ref().map(read_field).transpose()?;
    if let Some(t) = &truth {
        g.check_shape(t)?;
    }
    let cfg = solver_config(args.lambda, &args.solver);
    cfg.validate()?;
    ensure_dir(&args.out)?;
    let mut echo = ConfigEcho::new("demod")
        .set("method", args.method.name())
        .set("pattern", args.pattern.display())
        .set("carrier", args.carrier.display());
    if let Some(t) = &args.truth {
        echo = echo.set("truth", t.display());
    }
    echo_solver(echo, args.lambda, &args.solver)
        .set("out", args.out.display())
        .write(&args.out)?;
    let report = demodulate_into(
        args.method,
        &g,
        &omega,
        truth.as_ref(),
        &cfg,
        args.solver.record_timing,
        &args.out,
    )?;
    println!("{}", summary(args.method.name(), &report));
    Ok(status(&report))
}

pub fn denoise(args: &DenoiseArgs) -> Result<Status> {
    let f = read_pgm(&args.image)?;
    let clean = args.clean.as_ref().map(read_pgm).transpose()?;
    let cfg = SolverConfig {
        lambda: args.lambda,
        r: args.r,
        eps: args.tol,
        max_outer_iters: args.max_iter,
        linsolve: LinSolveConfig {
            rel_residual_tol: args.inner_tol,
            max_inner_iters: args.inner_max_iter,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.validate()?;
    ensure_dir(&args.out)?;
    let mut echo = ConfigEcho::new("denoise").set("image", args.image.display());
    if let Some(c) = &args.clean {
        echo = echo.set("clean", c.display());
    }
    echo.set("lambda", args.lambda)
        .set("r", args.r)
        .set("tol", args.tol)
        .set("max-iter", args.max_iter)
        .set("inner-tol", args.inner_tol)
        .set("inner-max-iter", args.inner_max_iter)
        .flag("record-timing", args.record_timing)
        .set("out", args.out.display())
        .write(&args.out)?;
    let (u, report) = tv_denoise_with_truth(&f, &cfg, clean.as_ref())?;
    write_field(&u, args.out.join("u.f64f"))?;
    // Same intensity scale as the input image.
    write_pgm(&u, args.out.join("u.pgm"))?;
    write_run_report(&report, args.record_timing, &args.out.join("report.csv"))?;
    println!("{}", summary("tv-denoise", &report));
    Ok(status(&report))
}

struct CellResult {
    method: MethodArg,
    sigma: f64,
    report: RunReport,
}

fn cell_dir_name(method: MethodArg, sigma: f64) -> String {
    format!("{}_sigma{}", method.name(), format_sig9(sigma))
}

fn run_cell(args: &SweepArgs, method: MethodArg, sigma: f64) -> Result<CellResult> {
    let spec = synthetic_spec(&args.surface, sigma);
    let truth = synthesize(&spec)?;
    let cfg = solver_config(args.lambda, &args.solver);
    let dir = args.out.join(cell_dir_name(method, sigma));
    ensure_dir(&dir)?;
    let echo = ConfigEcho::new("sweep-cell").set("method", method.name()).set("sigma", sigma);
    echo_solver(echo_surface(echo, &args.surface), args.lambda, &args.solver).write(&dir)?;
    let report = demodulate_into(
        method,
        &truth.g_noisy,
        &truth.omega,
        Some(&truth.phi),
        &cfg,
        args.solver.record_timing,
        &dir,
    )?;
    Ok(CellResult {
        method,
        sigma,
        report,
    })
}

pub fn sweep(args: &SweepArgs) -> Result<Status> {
    if args.sigmas.is_empty() || args.methods.is_empty() {
        return Err(FringeError::InvalidConfig(
            "sweep needs at least one sigma and one method".into(),
        ));
    }
    let cfg = solver_config(args.lambda, &args.solver);
    cfg.validate()?;
    for &sigma in &args.sigmas {
        synthetic_spec(&args.surface, sigma).validate()?;
    }
    ensure_dir(&args.out)?;
    let join = |v: Vec<String>| v.join(",");
    let echo = ConfigEcho::new("sweep")
        .set("sigmas", join(args.sigmas.iter().map(|s| s.to_string()).collect()))
        .set("methods", join(args.methods.iter().map(|m| m.name().to_string()).collect()))
        .set("jobs", args.jobs);
    echo_solver(echo_surface(echo, &args.surface), args.lambda, &args.solver)
        .set("out", args.out.display())
        .write(&args.out)?;

    let cells: Vec<(MethodArg, f64)> = args
        .methods
        .iter()
        .flat_map(|&m| args.sigmas.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| FringeError::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, s)| run_cell(args, m, s))
            .collect::<Result<_>>()
    })?;

    let mut csv = String::from("method,sigma,iters,q_err,wall_ms\n");
    for r in &results {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method.name(),
            format_sig9(r.sigma),
            r.report.iterations(),
            r.report.final_q().map(format_sig9).unwrap_or_default(),
            format_sig9(r.report.wall_ms()),
        ));
        println!(
            "{}",
            summary(&format!("{} sigma={}", r.method.name(), format_sig9(r.sigma)), &r.report)
        );
    }
    write_text(&args.out.join("sweep.csv"), &csv)?;
    if results.iter().all(|r| r.report.converged) {
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged)
    }
}

pub fn compare(args: &CompareArgs) -> Result<Status> {
    let a = read_field(&args.a)?;
    let b = read_field(&args.b)?;
    println!("{:.6}", q_error(&a, &b)?);
    Ok(Status::Done)
}
