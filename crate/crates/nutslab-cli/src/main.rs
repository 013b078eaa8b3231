use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use nutslab_cli::commands;
use nutslab_cli::config::{parse_table, set, validate};
use nutslab_cli::output::Writer;

#[derive(Parser)]
#[command(name = "nutslab", version, about = "Orbit-selection samplers and their diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "NUTSLAB_OUT_DIR")]
    out_dir: Option<String>,
    #[arg(long, global = true)]
    seed: Option<i64>,
    #[arg(long, global = true)]
    allow_inadmissible: bool,
    /// Output formats (csv, json); repeat or separate with commas.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run chains on a target and write draws and diagnostics.
    Sample,
    /// Recompute the limiting constants and compare with reference values.
    VerifyConstants,
    /// Contraction of synchronously coupled ideal chains on the Gaussian.
    Coupling,
    /// Orbit sizes and energy errors on a high-dimensional Gaussian.
    EnergyScan,
    /// Gradient cost to reach stationarity across dimensions.
    Mixing,
    /// Stay-put frequencies, energy growth and jump bound in the tails.
    TailProbe,
    /// Lyapunov drift ratios on power-law targets.
    DriftCheck,
    /// Exact integration-time law of the ideal kernels.
    TimeLaw,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::VerifyConstants => "verify-constants",
            Command::Coupling => "coupling",
            Command::EnergyScan => "energy-scan",
            Command::Mixing => "mixing",
            Command::TailProbe => "tail-probe",
            Command::DriftCheck => "drift-check",
            Command::TimeLaw => "time-law",
        }
    }
}

#[derive(Args, Default)]
struct Overrides {
    /// Kernel: nuts-mul, nuts-bps, hmc, ideal-mul, ideal-bps.
    #[arg(long, global = true, allow_negative_numbers = true)]
    kernel: Option<String>,
    #[arg(long = "h", global = true, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    max_depth: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    steps: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    kstar: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    divergence_threshold: Option<f64>,
    /// U-turn rule: recursive or strict.
    #[arg(long, global = true, allow_negative_numbers = true)]
    uturn: Option<String>,
    /// Target: std-gaussian, diag-gaussian, power-law, smooth-laplace, perturbed-gaussian.
    #[arg(long, global = true, allow_negative_numbers = true)]
    target: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    dim: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long = "c", global = true, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long = "m", global = true, allow_negative_numbers = true)]
    m: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    frequency: Option<f64>,
    /// Selection rule for experiments: mul or bps.
    #[arg(long, global = true, allow_negative_numbers = true)]
    variant: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_steps: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_chains: Option<i64>,
    #[arg(long = "d", global = true, allow_negative_numbers = true)]
    d: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    dims: Option<Vec<i64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_pairs: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pair_steps: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    flow: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long = "r", global = true, allow_negative_numbers = true)]
    r: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_samples: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    max_iterations: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    start: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    h_scale: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    snap_delta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_trials: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tail_steps: Option<i64>,
    #[arg(long = "a", global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_mc: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    spread: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,
}

fn put<T: Into<Value>>(t: &mut Table, section: &str, key: &str, v: Option<T>) {
    if let Some(v) = v {
        set(t, section, key, v.into());
    }
}

fn apply(t: &mut Table, o: Overrides) {
    put(t, "kernel", "variant", o.kernel);
    put(t, "kernel", "h", o.h);
    put(t, "kernel", "max_depth", o.max_depth);
    put(t, "kernel", "steps", o.steps);
    put(t, "kernel", "kstar", o.kstar);
    put(t, "kernel", "delta", o.delta);
    put(t, "kernel", "divergence_threshold", o.divergence_threshold);
    put(t, "kernel", "uturn", o.uturn);
    put(t, "target", "kind", o.target);
    put(t, "target", "dim", o.dim);
    put(t, "target", "scales", o.scales);
    put(t, "target", "c", o.c);
    put(t, "target", "beta", o.beta);
    put(t, "target", "m", o.m);
    put(t, "target", "amplitude", o.amplitude);
    put(t, "target", "frequency", o.frequency);
    put(t, "experiment", "variant", o.variant);
    put(t, "experiment", "n_steps", o.n_steps);
    put(t, "experiment", "n_chains", o.n_chains);
    put(t, "experiment", "d", o.d);
    put(t, "experiment", "dims", o.dims);
    put(t, "experiment", "n_pairs", o.n_pairs);
    put(t, "experiment", "pair_steps", o.pair_steps);
    put(t, "experiment", "flow", o.flow);
    put(t, "experiment", "alpha", o.alpha);
    put(t, "experiment", "r", o.r);
    put(t, "experiment", "n_samples", o.n_samples);
    put(t, "experiment", "threshold", o.threshold);
    put(t, "experiment", "max_iterations", o.max_iterations);
    put(t, "experiment", "start", o.start);
    put(t, "experiment", "h_scale", o.h_scale);
    put(t, "experiment", "snap_delta", o.snap_delta);
    put(t, "experiment", "radii", o.radii);
    put(t, "experiment", "n_trials", o.n_trials);
    put(t, "experiment", "tail_steps", o.tail_steps);
    put(t, "experiment", "a", o.a);
    put(t, "experiment", "n_mc", o.n_mc);
    put(t, "experiment", "spread", o.spread);
    put(t, "experiment", "epsilon", o.epsilon);
}

fn config_errors(errors: &[String]) -> ExitCode {
    eprintln!("configuration errors:");
    for e in errors {
        eprintln!("  {e}");
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut table = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match parse_table(&text) {
                Ok(t) => t,
                Err(e) => return config_errors(&e),
            },
            Err(e) => return config_errors(&[format!("{}: {e}", path.display())]),
        },
        None => Table::new(),
    };
    put(&mut table, "", "command", cli.command.map(|c| c.name()));
    put(&mut table, "", "out_dir", cli.out_dir);
    put(&mut table, "", "seed", cli.seed);
    if cli.allow_inadmissible {
        put(&mut table, "", "allow_inadmissible", Some(true));
    }
    if !cli.format.is_empty() {
        put(&mut table, "", "formats", Some(cli.format));
    }
    apply(&mut table, cli.overrides);
    if !table.contains_key("command") {
        return config_errors(&["no command given on the command line or in the config".into()]);
    }
    let cfg = match validate(&table) {
        Ok(c) => c,
        Err(e) => return config_errors(&e),
    };

    let mut out = match Writer::new(&cfg) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("cannot create {}: {e}", cfg.out_dir.display());
            return ExitCode::FAILURE;
        }
    };
    let checks = match commands::run(&cfg, &mut out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", cfg.command);
            return ExitCode::FAILURE;
        }
    };
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark} {}: {}", c.name, c.detail);
    }
    println!("config_hash {}", out.hash());
    for p in out.written() {
        println!("wrote {}", p.display());
    }
    let failed: Vec<_> = checks.into_iter().filter(|c| !c.passed).collect();
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    match out.failures(&cfg.command, &failed) {
        Ok(p) => eprintln!("{} assertion(s) failed; see {}", failed.len(), p.display()),
        Err(e) => eprintln!("{} assertion(s) failed; could not write failures.json: {e}", failed.len()),
    }
    ExitCode::FAILURE
}
