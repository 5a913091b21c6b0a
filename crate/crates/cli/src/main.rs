use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use hypercollapse::collapse::{collapse, domain_of, two_core};
use hypercollapse::limits::{coupled_family, run_chain};
use hypercollapse::rng::{seeded_rng, stream_id};
use hypercollapse::sampler::{poisson, sample_process, sample_static};
use hypercollapse::stats::{compare_distributions, Histogram};
use hypercollapse::structure::StructureOptions;
use hypercollapse::{
    experiment, BorelLaw, ChainState, ExperimentConfig, FirstPassage, Hypergraph, MixingDistribution,
    StructureProfile, VertexId,
};

#[derive(Parser)]
#[command(name = "hypercollapse", version, about = "Poisson random hypergraphs and their collapse")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; trials use derived streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Number of vertices.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Directory for output files. Without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Structure function, envelopes and jump set of a cardinality law.
    Analyze {
        /// Coefficients ρ₁, ρ₂, … as a JSON array.
        #[arg(long)]
        rho: String,
        /// Largest s in the (s, g, g★) table. Defaults to twice the largest
        /// jump location, or 5.
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 501)]
        s_points: usize,
        #[arg(long)]
        grid_resolution: Option<f64>,
    },
    /// Static Poisson hypergraph with intensities β = t·ρ.
    Sample {
        #[arg(long)]
        rho: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Event stream of the hypergraph process and its identifiability path.
    Process {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        horizon: f64,
        /// Number of path points on [0, horizon].
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Collapse a hypergraph file (text or JSON).
    Collapse {
        file: PathBuf,
        /// Randomize the patch order with this seed instead of taking the
        /// lowest vertex.
        #[arg(long)]
        order_seed: Option<u64>,
    },
    /// Domain of one vertex in a patch-free hypergraph file.
    Domain {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        vertex: u32,
    },
    /// 2-core of a graph file.
    Core { file: PathBuf },
    /// Coupled first-passage walks over a time grid.
    Walk {
        #[arg(long)]
        rho: String,
        /// Comma-separated increasing times.
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n_cap: u64,
        /// Upper end of the pmf comparison window.
        #[arg(long, default_value_t = 30)]
        window: u64,
    },
    /// The (patches, debris) Markov chain started from one extra patch.
    Chain {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let c = cli.common.clone();
    let result = match cli.command {
        Command::Analyze {
            rho,
            s_max,
            s_points,
            grid_resolution,
        } => analyze(&c, &rho, s_max, s_points, grid_resolution),
        Command::Sample { rho, t } => sample(&c, &rho, t),
        Command::Process { rho, horizon, points } => process(&c, &rho, horizon, points),
        Command::Collapse { file, order_seed } => {
            let h = read_hypergraph(&file)?;
            let r = collapse(&h, order_seed);
            match c.format {
                Format::Json => emit(&c, "collapse.json", &serde_json::to_string_pretty(&r)?),
                Format::Csv => {
                    let trace = r.trace.as_ref().context("collapse did not record a trace")?;
                    let mut s = String::from("n,patches,debris\n");
                    for (n, (y, z)) in trace.path().into_iter().enumerate() {
                        s.push_str(&format!("{n},{y},{z}\n"));
                    }
                    emit(&c, "trace.csv", &s)
                }
            }
        }
        Command::Domain { file, vertex } => {
            let h = read_hypergraph(&file)?;
            let d = domain_of(&h, VertexId(vertex))?;
            match c.format {
                Format::Json => emit(&c, "domain.json", &serde_json::to_string_pretty(&d)?),
                Format::Csv => emit(&c, "domain.csv", &vertex_csv(&d.vertices)),
            }
        }
        Command::Core { file } => {
            let h = read_hypergraph(&file)?;
            let core = two_core(&h)?;
            match c.format {
                Format::Json => emit(&c, "core.json", &serde_json::to_string_pretty(&json!({ "core": core }))?),
                Format::Csv => emit(&c, "core.csv", &vertex_csv(&core)),
            }
        }
        Command::Walk {
            rho,
            times,
            n_cap,
            window,
        } => walk(&c, &rho, &times, n_cap, window),
        Command::Chain { rho, t, steps } => chain(&c, &rho, t, steps),
        Command::Experiment { config } => return run_experiment(&c, &config),
    };
    result.map(|()| ExitCode::SUCCESS)
}

fn parse_rho(text: &str) -> Result<MixingDistribution> {
    let coeffs: Vec<f64> = serde_json::from_str(text).with_context(|| format!("--rho must be a JSON array, got {text:?}"))?;
    Ok(MixingDistribution::probability(coeffs)?)
}

fn read_hypergraph(path: &Path) -> Result<Hypergraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Hypergraph::parse(&text)?)
}

fn vertex_csv(vs: &[VertexId]) -> String {
    let mut s = String::from("vertex\n");
    for v in vs {
        s.push_str(&format!("{v}\n"));
    }
    s
}

/// Writes `body` to `<out>/<name>`, or to stdout without `--out`.
fn emit(c: &Common, name: &str, body: &str) -> Result<()> {
    match &c.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn analyze(c: &Common, rho: &str, s_max: Option<f64>, s_points: usize, res: Option<f64>) -> Result<()> {
    let m = parse_rho(rho)?;
    let mut options = StructureOptions::default();
    if let Some(r) = res {
        options.grid_resolution = r;
    }
    let profile = StructureProfile::analyze(&m, options)?;
    let s_max = s_max.unwrap_or_else(|| {
        let last = profile.xi.iter().chain(&profile.upper_jumps).map(|j| j.s).fold(0.0, f64::max);
        if last > 0.0 { 2.0 * last } else { 5.0 }
    });
    if s_points < 2 || s_max.is_nan() || s_max <= 0.0 {
        bail!("need --s-points ≥ 2 and a positive --s-max");
    }
    let s_values: Vec<f64> = (0..s_points).map(|i| s_max * i as f64 / (s_points - 1) as f64).collect();
    let mut table = String::from("s,g,g_star\n");
    for (s, g, gs) in profile.envelope_table(&s_values) {
        table.push_str(&format!("{s},{g},{gs}\n"));
    }
    let profile_json = serde_json::to_string_pretty(&profile)?;
    match (c.format, &c.out) {
        (_, Some(_)) => {
            emit(c, "profile.json", &profile_json)?;
            emit(c, "envelope.csv", &table)
        }
        (Format::Json, None) => emit(c, "profile.json", &profile_json),
        (Format::Csv, None) => emit(c, "envelope.csv", &table),
    }
}

fn sample(c: &Common, rho: &str, t: f64) -> Result<()> {
    let beta = parse_rho(rho)?.scaled(t);
    let n = c.n.context("sample needs --n")?;
    let h = sample_static(&beta, n, c.seed.unwrap_or(0));
    match c.format {
        Format::Json => emit(c, "hypergraph.json", &h.to_json()),
        Format::Csv => emit(c, "hypergraph.txt", &h.to_text()),
    }
}

fn process(c: &Common, rho: &str, horizon: f64, points: usize) -> Result<()> {
    let m = parse_rho(rho)?;
    let n = c.n.context("process needs --n")?;
    if points < 2 {
        bail!("need at least two path points");
    }
    let stream = sample_process(&m, n, horizon, c.seed.unwrap_or(0))?;
    let grid: Vec<f64> = (0..points).map(|i| horizon * i as f64 / (points - 1) as f64).collect();
    let path = stream.identifiability_path(&grid)?;
    let profile = StructureProfile::with_defaults(&m).ok();
    let mut csv = String::from("t,vertices,edges,g\n");
    for p in &path {
        let g = profile.as_ref().map_or(f64::NAN, |pr| pr.lower(p.t));
        csv.push_str(&format!("{},{},{},{}\n", p.t, p.vertices, p.edges, g));
    }
    if c.out.is_some() {
        emit(c, "events.csv", &stream.to_csv_string())?;
        return emit(c, "path.csv", &csv);
    }
    match c.format {
        Format::Csv => emit(c, "path.csv", &csv),
        Format::Json => emit(
            c,
            "path.json",
            &serde_json::to_string_pretty(&json!({ "events": stream.events.len(), "path": path }))?,
        ),
    }
}

fn walk(c: &Common, rho: &str, times: &[f64], n_cap: u64, window: u64) -> Result<()> {
    let rho2 = parse_rho(rho)?.coeff(2);
    let trials = c.trials.unwrap_or(1000);
    let seed = c.seed.unwrap_or(0);
    let families = (0..trials)
        .into_par_iter()
        .map(|trial| coupled_family(times, rho2, n_cap, &mut seeded_rng(seed, stream_id(trial as u64, 0))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("trial,t,M\n");
    for (trial, f) in families.iter().enumerate() {
        for (t, p) in f.time_grid.iter().zip(&f.passages) {
            let m = p.steps().map_or_else(|| "inf".to_string(), |k| k.to_string());
            csv.push_str(&format!("{trial},{t},{m}\n"));
        }
    }
    let mut per_time = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let law = BorelLaw::new(2.0 * rho2 * t)?;
        let hist: Histogram<u64> = families.iter().filter_map(|f| f.passages[i].steps()).collect();
        let escaped = families.iter().filter(|f| f.passages[i] == FirstPassage::Escaped).count();
        let mut entry = json!({
            "t": t,
            "mu": law.mu,
            "escape_frequency": escaped as f64 / trials as f64,
            "borel_infinity_mass": law.infinity_mass(),
        });
        if hist.total() > 0 {
            // Compare the finite part against the pmf of the full law, so
            // the empirical side is rescaled to the same total mass.
            let finite = hist.total() as f64 / trials as f64;
            let cmp = compare_distributions(&hist, |k| law.pmf(k) / (1.0 - law.infinity_mass()).max(1e-300), (1, window))?;
            entry["conditional_tv"] = json!(cmp.tv);
            entry["empirical_outside_window"] = json!(cmp.empirical_outside);
            entry["pmf"] = (1..=window)
                .map(|k| json!({ "m": k, "empirical": hist.frequency(&k) * finite, "borel": law.pmf(k) }))
                .collect();
        }
        per_time.push(entry);
    }
    let monotone = families.iter().filter(|f| f.is_monotone()).count();
    let summary = json!({ "trials": trials, "n_cap": n_cap, "monotone_families": monotone, "times": per_time });
    finish(c, "walks.csv", &csv, "walk_summary.json", &summary)
}

fn chain(c: &Common, rho: &str, t: f64, steps: usize) -> Result<()> {
    let m = parse_rho(rho)?;
    let n = c.n.context("chain needs --n")?;
    let trials = c.trials.unwrap_or(1000);
    let seed = c.seed.unwrap_or(0);
    let beta1 = t * m.coeff(1);
    let runs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeded_rng(seed, stream_id(trial as u64, 0));
            let y0 = 1 + poisson(&mut rng, n as f64 * beta1);
            run_chain(ChainState::new(n, y0, 0), &m, t, steps, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("trial,n,Y,Z\n");
    for (trial, run) in runs.iter().enumerate() {
        for s in run {
            csv.push_str(&format!("{trial},{},{},{}\n", s.n, s.y, s.z));
        }
    }
    let stopped = runs.iter().filter(|r| r.last().is_some_and(|s| s.is_stopped())).count();
    let mean_at: Vec<_> = (0..=steps)
        .map(|k| {
            let (y, z) = runs.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r[k].y as f64, acc.1 + r[k].z as f64));
            json!({ "n": k, "mean_Y": y / trials as f64, "mean_Z": z / trials as f64 })
        })
        .collect();
    let summary = json!({
        "trials": trials,
        "num_vertices": n,
        "t": t,
        "stopped_fraction": stopped as f64 / trials as f64,
        "means": mean_at,
    });
    finish(c, "chain.csv", &csv, "chain_summary.json", &summary)
}

/// Per-trial CSV plus summary JSON: both files with `--out`, otherwise the
/// one chosen by `--format`.
fn finish(c: &Common, csv_name: &str, csv: &str, json_name: &str, summary: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    if c.out.is_some() {
        emit(c, csv_name, csv)?;
        return emit(c, json_name, &text);
    }
    match c.format {
        Format::Csv => emit(c, csv_name, csv),
        Format::Json => emit(c, json_name, &text),
    }
}

/// Exit code 2 when the run completes but a comparison fails.
fn run_experiment(c: &Common, path: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = c.trials {
        cfg.trials = trials;
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    let report = experiment::run(&cfg)?;
    match &cfg.out_dir {
        Some(dir) => report.write_to_dir(dir)?,
        None => match c.format {
            Format::Json => emit(c, "report.json", &report.to_json()?)?,
            Format::Csv => {
                let mut buf = Vec::new();
                report.write_comparisons_csv(&mut buf)?;
                emit(c, "comparisons.csv", &String::from_utf8(buf)?)?;
            }
        },
    }
    for cmp in &report.comparisons {
        eprintln!("{} {}: observed {} vs {}", if cmp.passed { "PASS" } else { "FAIL" }, cmp.name, cmp.observed, cmp.expected);
    }
    if !report.passed {
        eprintln!("experiment failed at least one comparison");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
