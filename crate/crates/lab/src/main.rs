use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sliceqec_core::circuit::emit_text;
use sliceqec_lab::config::{EvaluatorConfig, ExperimentConfig, Resolved};
use sliceqec_lab::fitting::polyfit;
use sliceqec_lab::report::{emit_csv, emit_svg, parse_csv};
use sliceqec_lab::sweep::{build_circuit, mode_name, run_multiround, run_sweep};
use sliceqec_lab::{LabError, Result};

/// Syndrome-extraction experiments under mixed coherent/stochastic
/// overrotation noise.
#[derive(Parser)]
#[command(name = "sliceqec", version, about)]
struct Cli {
    /// Path to a JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in configuration preset (e.g. fig-surface3body).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory for configured artifact names.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the trajectory master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the core count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the exact circuit a sweep would simulate, in text form.
    Compile,
    /// Evaluate sliced and unsliced logical error over the kappa grid.
    Sweep,
    /// Sample multi-round logical error trajectories.
    Multiround,
    /// Fit quadratics to an existing sweep CSV.
    Fit,
    /// Render an existing sweep CSV to SVG with quadratic fits.
    Plot,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)
        }
        (None, Some(name)) => ExperimentConfig::preset(name),
        (Some(_), Some(_)) => Err(LabError::Config(
            "give either --config or --preset, not both".into(),
        )),
        (None, None) => Err(LabError::Config(
            "a configuration is required: --config <path> or --preset <name>".into(),
        )),
    }
}

fn out_path(dir: &Path, name: &Option<String>, what: &str) -> Result<PathBuf> {
    match name {
        Some(n) => Ok(dir.join(n)),
        None => Err(LabError::Config(format!(
            "config output.{what} is not set"
        ))),
    }
}

fn cmd_compile(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    let circuit = build_circuit(resolved, resolved.slicing)?;
    circuit.validate()?;
    let name = resolved
        .output
        .circuit
        .clone()
        .unwrap_or_else(|| "circuit.txt".into());
    let path = out_dir.join(name);
    std::fs::write(&path, emit_text(&circuit))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    if matches!(resolved.evaluator, EvaluatorConfig::Trajectories { .. }) {
        return Err(LabError::Config(
            "sweep uses the exact evaluator; set evaluator.kind = \"exact\"".into(),
        ));
    }
    let rows = run_sweep(resolved)?;
    let csv = out_path(out_dir, &resolved.output.csv, "csv")?;
    emit_csv(&rows, &csv)?;
    println!("wrote {}", csv.display());
    if let Some(svg_name) = &resolved.output.svg {
        let fits = fit_rows(&rows);
        let svg = out_dir.join(svg_name);
        emit_svg(
            &rows,
            fits.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
            &svg,
        )?;
        println!("wrote {}", svg.display());
    }
    Ok(())
}

fn fit_rows(rows: &[sliceqec_lab::sweep::SweepRow]) -> Option<(Vec<f64>, Vec<f64>)> {
    if rows.len() < 3 {
        return None;
    }
    let sliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_sliced)).collect();
    let unsliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_unsliced)).collect();
    match (polyfit(&sliced, 2), polyfit(&unsliced, 2)) {
        (Ok((a, _)), Ok((b, _))) => Some((a, b)),
        _ => None,
    }
}

fn cmd_multiround(resolved: &Resolved, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let series = run_multiround(resolved, seed)?;
    let name = resolved
        .output
        .csv
        .clone()
        .unwrap_or_else(|| "multiround.csv".into());
    let path = out_dir.join(name);
    let mut text = String::from("mode,round,p_logical,std_err\n");
    for s in &series {
        for r in &s.result.per_round {
            text.push_str(&format!(
                "{},{},{},{}\n",
                mode_name(s.mode),
                r.round,
                r.p_logical,
                r.std_err
            ));
        }
        println!(
            "{}: fit p(r) = {} + {} r",
            mode_name(s.mode),
            s.result.fit_intercept,
            s.result.fit_slope
        );
    }
    std::fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_fit(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    let csv = out_path(out_dir, &resolved.output.csv, "csv")?;
    let rows = parse_csv(&std::fs::read_to_string(&csv)?)?;
    let sliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_sliced)).collect();
    let unsliced: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.p_unsliced)).collect();
    for (label, pts) in [("sliced", sliced), ("unsliced", unsliced)] {
        let (coeffs, rms) = polyfit(&pts, 2)?;
        println!(
            "{label}: p(kappa) = {} + {} kappa + {} kappa^2  (rms residual {rms:.3e})",
            coeffs[0], coeffs[1], coeffs[2]
        );
    }
    Ok(())
}

fn cmd_plot(resolved: &Resolved, out_dir: &Path) -> Result<()> {
    let csv = out_path(out_dir, &resolved.output.csv, "csv")?;
    let rows = parse_csv(&std::fs::read_to_string(&csv)?)?;
    let fits = fit_rows(&rows);
    let name = resolved
        .output
        .svg
        .clone()
        .unwrap_or_else(|| "plot.svg".into());
    let path = out_dir.join(name);
    emit_svg(
        &rows,
        fits.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
        &path,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    }
    let config = load_config(cli)?;
    let resolved = config.resolve()?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Compile => cmd_compile(&resolved, &cli.out),
        Command::Sweep => cmd_sweep(&resolved, &cli.out),
        Command::Multiround => cmd_multiround(&resolved, &cli.out, cli.seed),
        Command::Fit => cmd_fit(&resolved, &cli.out),
        Command::Plot => cmd_plot(&resolved, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
