//! `nvsc`: run platoon scenarios, check configs, generate attack schedules, and produce the
//! paired and swept studies.
//!
//! Exit codes: 0 success, 1 config violation, 2 numerical blowup during a run,
//! 3 anything else (usage, I/O, verify mismatch). Diagnostics go to stderr as `CODE: message`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvsc_core::analysis;
use nvsc_core::config::{prepare, ScenarioConfig};
use nvsc_core::controller::InputMechanism;
use nvsc_core::dos::{self, DosParams, GeneratorConfig};
use nvsc_core::engine::run_prepared;
use nvsc_core::trace::SimTrace;
use nvsc_core::{parallel, svg, Error};

#[derive(Parser)]
#[command(name = "nvsc", version, about = "Leader-follower platoon simulator under DoS attacks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario; writes trace.csv, report.json and config.json.
    Run(RunArgs),
    /// Rebuild the report from a written trace.
    Verify(VerifyArgs),
    /// Attack-free runs over several neuron counts.
    SweepNeurons(SweepArgs),
    /// The same scenario under hold and zero input.
    CompareHimZim(ScenarioArgs),
    /// Generate a DoS schedule that satisfies the frequency and energy bounds.
    GenDos(GenDosArgs),
    /// Validate a config without running it.
    CheckConfig(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_parser = ["hold", "zero"])]
    mechanism: Option<String>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace to analyse (default: <out>/trace.csv).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Directory holding the trace and receiving verify_report.json.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Report to compare against byte for byte (default: <out>/report.json when present).
    #[arg(long)]
    expect: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["hold", "zero"])]
    mechanism: Option<String>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15, 20, 25])]
    counts: Vec<usize>,
}

#[derive(Args)]
struct GenDosArgs {
    #[arg(long = "tau-d")]
    tau_d: f64,
    #[arg(long = "T")]
    t_energy: u32,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    n0: u32,
    /// Energy offset, s (default: one dwell time).
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "packet-period", default_value_t = 0.0005)]
    packet_period: f64,
    /// Mean attacked fraction (default: half of 1/T).
    #[arg(long)]
    duty: Option<f64>,
    /// Mean on/off cycle length, s (default: one dwell time).
    #[arg(long = "mean-period")]
    mean_period: Option<f64>,
    #[arg(long = "max-burst")]
    max_burst: Option<f64>,
    #[arg(long = "start-after", default_value_t = 0.0)]
    start_after: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    targets: Vec<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Core(Error),
    Other(String, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn other(code: &str, msg: impl ToString) -> Failure {
    Failure::Other(code.to_string(), msg.to_string())
}

fn io_err(what: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| other("IO", format!("{}: {e}", what.display()))
}

fn report_failure(f: Failure) -> ExitCode {
    let code = match f {
        Failure::Core(Error::Config(vs)) => {
            for v in vs {
                eprintln!("{v}");
            }
            1
        }
        Failure::Core(e @ (Error::InvalidConfig(_) | Error::InfeasibleSchedule(_) | Error::NoStabilizingSolution(_))) => {
            eprintln!("CONFIG: {e}");
            1
        }
        Failure::Core(Error::Json(e)) => {
            eprintln!("CONFIG_PARSE: {e}");
            1
        }
        Failure::Core(e @ Error::NumericalBlowup { .. }) => {
            eprintln!("BLOWUP: {e}");
            2
        }
        Failure::Core(Error::Io(e)) => {
            eprintln!("IO: {e}");
            3
        }
        Failure::Core(e) => {
            eprintln!("ERROR: {e}");
            3
        }
        Failure::Other(code, msg) => {
            eprintln!("{code}: {msg}");
            3
        }
    };
    ExitCode::from(code)
}

fn init_logging(quiet: bool) {
    let default = if quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .try_init();
}

fn load_config(path: &Path, seed: Option<u64>, mechanism: Option<&str>) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut cfg = ScenarioConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(m) = mechanism {
        cfg.input_mechanism = m.parse::<InputMechanism>()?;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(io_err(path))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let s = &a.scenario;
    let cfg = load_config(&s.config, s.seed, a.mechanism.as_deref())?;
    let pr = prepare(&cfg)?;
    ensure_dir(&s.out)?;
    log::info!("running {} ({} ticks)", cfg.name, pr.ticks);
    let trace = run_prepared(&pr)?;
    let report = analysis::build_report(&pr, &trace);
    let trace_path = s.out.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    write(&s.out.join("report.json"), &report.to_json()?)?;
    write(&s.out.join("config.json"), &cfg.to_json()?)?;
    if a.svg {
        for (name, body) in svg::trace_figures(&trace) {
            write(&s.out.join(name), &body)?;
        }
    }
    if !s.quiet {
        summarize(&report);
    }
    Ok(())
}

fn summarize(r: &analysis::RunReport) {
    println!("{} seed {} ({:?} input), {} ticks", r.name, r.seed, r.mechanism, r.ticks);
    for m in &r.followers {
        println!(
            "  vehicle {}: max|e| = [{}], final e = [{}], attacked ticks {}",
            m.agent,
            fmt_list(&m.max_abs_error),
            fmt_list(&m.final_error),
            m.attacked_ticks
        );
    }
    println!(
        "  collision: {}, min spacing {:.3} m",
        r.collision.collision, r.collision.min_spacing
    );
    for c in &r.claims {
        if c.applicable {
            let who = c.agent.map_or(String::new(), |a| format!(" vehicle {a}"));
            println!(
                "  {}{}: {} (margin {:.3e})",
                c.claim,
                who,
                if c.satisfied { "holds" } else { "violated" },
                c.worst_margin
            );
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config, a.seed, a.mechanism.as_deref())?;
    let pr = prepare(&cfg)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| a.out.join("trace.csv"));
    let file = fs::File::open(&trace_path).map_err(io_err(&trace_path))?;
    let trace = SimTrace::read_csv(std::io::BufReader::new(file))?;
    if trace.n_ticks() as u64 != pr.ticks + 1 || trace.agents != cfg.n_followers() + 1 {
        return Err(other("TRACE_MISMATCH", "trace shape does not match the config"));
    }
    let json = analysis::build_report(&pr, &trace).to_json()?;
    ensure_dir(&a.out)?;
    write(&a.out.join("verify_report.json"), &json)?;
    let expect = a.expect.clone().or_else(|| {
        let p = a.out.join("report.json");
        p.exists().then_some(p)
    });
    if let Some(p) = expect {
        let want = fs::read_to_string(&p).map_err(io_err(&p))?;
        if want != json {
            return Err(other("REPORT_MISMATCH", format!("rebuilt report differs from {}", p.display())));
        }
        if !a.quiet {
            println!("report matches {}", p.display());
        }
    } else if !a.quiet {
        print!("{json}");
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let s = &a.scenario;
    let cfg = load_config(&s.config, s.seed, None)?;
    prepare(&cfg)?;
    ensure_dir(&s.out)?;
    log::info!("sweeping neuron counts {:?} on the {} backend", a.counts, parallel::backend());
    let rows = analysis::neuron_sweep(&cfg, &a.counts)?;
    let table = analysis::sweep_csv(&rows)?;
    write(&s.out.join("sweep_neurons.csv"), &table)?;
    if !s.quiet {
        print!("{table}");
    }
    Ok(())
}

fn cmd_compare(a: ScenarioArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config, a.seed, None)?;
    prepare(&cfg)?;
    ensure_dir(&a.out)?;
    let rep = analysis::compare_him_zim(&cfg)?;
    write(&a.out.join("him_vs_zim.json"), &(serde_json::to_string_pretty(&rep).map_err(Error::from)? + "\n"))?;
    if !a.quiet {
        for m in [&rep.hold, &rep.zero] {
            println!(
                "{:?}: max |e1| from t = {} s: {:.4} m, max |E| {:.4}, min spacing {:.3} m, collision {}",
                m.mechanism, m.measured_from, m.max_abs_position_error, m.max_error_norm, m.min_spacing, m.collision
            );
        }
        println!("hold not worse than zero: {}", rep.hold_not_worse);
    }
    Ok(())
}

fn cmd_gen_dos(a: GenDosArgs) -> Result<(), Failure> {
    let g = GeneratorConfig {
        params: DosParams {
            n0: a.n0,
            tau_d: a.tau_d,
            t_energy: a.t_energy,
            kappa: a.kappa.unwrap_or(a.tau_d),
            packet_period: a.packet_period,
        },
        horizon: a.horizon,
        seed: a.seed,
        duty: a.duty.unwrap_or(0.5 / f64::from(a.t_energy.max(1))),
        mean_period: a.mean_period.unwrap_or(a.tau_d),
        start_after: a.start_after,
        max_burst: a.max_burst,
        targets: a.targets,
    };
    let sched = dos::generate_schedule(&g)?;
    if let Err(v) = dos::validate_schedule(&sched, 1000)? {
        return Err(other("SCHEDULE", v));
    }
    let json = serde_json::to_string_pretty(&sched).map_err(Error::from)? + "\n";
    match &a.out {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_check(a: ConfigArg) -> Result<(), Failure> {
    let cfg = load_config(&a.config, None, None)?;
    let pr = prepare(&cfg)?;
    if !a.quiet {
        println!(
            "{}: ok ({} followers, {} ticks, attack {})",
            cfg.name,
            cfg.n_followers(),
            pr.ticks,
            if analysis::has_attack(&cfg) { "configured" } else { "none" }
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            eprintln!("USAGE: {}", first.trim_start_matches("error: "));
            return ExitCode::from(3);
        }
    };
    if let Some(n) = std::env::var("NVSC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        parallel::set_thread_cap(n);
    }
    let quiet = match &cli.cmd {
        Cmd::Run(a) => a.scenario.quiet,
        Cmd::Verify(a) => a.quiet,
        Cmd::SweepNeurons(a) => a.scenario.quiet,
        Cmd::CompareHimZim(a) => a.quiet,
        Cmd::GenDos(a) => a.quiet,
        Cmd::CheckConfig(a) => a.quiet,
    };
    init_logging(quiet);
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::SweepNeurons(a) => cmd_sweep(a),
        Cmd::CompareHimZim(a) => cmd_compare(a),
        Cmd::GenDos(a) => cmd_gen_dos(a),
        Cmd::CheckConfig(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(f),
    }
}
