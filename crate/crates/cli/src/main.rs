//! `bubblewalk`: experiments on random walks over bubble Schreier graphs and
//! their lamp-group wreath products.

mod output;

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bubblewalk_core::analysis::{
    bound_pipeline, default_m_grid, energy_verdict, flow_energy, green_function_estimate,
    kirchhoff_check, volume_exponent_fit, CountingConstants,
};
use bubblewalk_core::graph::{ball, dist, Dist, DEFAULT_BALL_LIMIT};
use bubblewalk_core::group::{count_small_orbit_elements, elements_equal};
use bubblewalk_core::orbit::{
    conditioned_orbit_stats, inverted_orbit_scan, max_displacement_over, projection_extremes,
    sample_word, CondConfig, CondMode, Word,
};
use bubblewalk_core::rng::replica_rng;
use bubblewalk_core::scaling::ScalingRule;
use bubblewalk_core::wreath::{harmonic_estimate, simulate_sws, LampConfig, WreathElement};
use bubblewalk_core::zline::{confine_log_prob, ConfineQuery};
use bubblewalk_core::{VertexAddress, ROOT};

use output::{emit, Format, Table, Value};

#[derive(Parser)]
#[command(name = "bubblewalk", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Scaling sequence: canonical | geometric:<ratio> | constant:<c> | file:<path>
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Master seed; replica r draws from a stream derived from (seed, r)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv | json
    #[arg(long, global = true)]
    format: Option<String>,
    /// key=value config file; explicit flags override file entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Global settings after merging flags over the config file.
struct Settings {
    rule: ScalingRule,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

impl GlobalArgs {
    fn resolve(&self) -> Result<Settings> {
        let mut file: HashMap<String, String> = HashMap::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .with_context(|| format!("config line {} is not key=value", i + 1))?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let alpha_spec = self
            .alpha
            .clone()
            .or_else(|| file.get("alpha").cloned())
            .unwrap_or_else(|| "canonical".to_string());
        let seed = match (&self.seed, file.get("seed")) {
            (Some(s), _) => *s,
            (None, Some(s)) => s.parse().context("config seed is not an integer")?,
            _ => 0,
        };
        let threads = match (&self.threads, file.get("threads")) {
            (Some(t), _) => Some(*t),
            (None, Some(t)) => Some(t.parse().context("config threads is not an integer")?),
            _ => None,
        };
        if let Some(t) = threads {
            rayon::ThreadPoolBuilder::new().num_threads(t).build_global().ok();
        }
        let out = self.out.clone().or_else(|| file.get("out").map(PathBuf::from));
        let format: Format = self
            .format
            .clone()
            .or_else(|| file.get("format").cloned())
            .unwrap_or_else(|| "csv".to_string())
            .parse()?;
        Ok(Settings { rule: parse_alpha(&alpha_spec)?, seed, out, format })
    }
}

fn parse_alpha(spec: &str) -> Result<ScalingRule> {
    if spec == "canonical" {
        return Ok(ScalingRule::canonical());
    }
    if let Some(ratio) = spec.strip_prefix("geometric:") {
        let ratio: f64 = ratio.parse().context("geometric ratio is not a number")?;
        return Ok(ScalingRule::geometric(ratio)?);
    }
    if let Some(c) = spec.strip_prefix("constant:") {
        let c: i64 = c.parse().context("constant value is not an integer")?;
        return Ok(ScalingRule::constant(c)?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read alpha file {path}"))?;
        let mut alphas = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            alphas.push(
                line.parse::<i64>()
                    .with_context(|| format!("alpha file line {} is not an integer", i + 1))?,
            );
        }
        return Ok(ScalingRule::explicit(alphas)?);
    }
    bail!("unknown alpha spec {spec:?}; expected canonical | geometric:<r> | constant:<c> | file:<path>")
}

#[derive(Subcommand)]
enum Command {
    /// Graph geometry: balls and distances
    Graph {
        #[command(subcommand)]
        cmd: GraphCmd,
    },
    /// The projected lazy walk on the integers
    Zline {
        #[command(subcommand)]
        cmd: ZlineCmd,
    },
    /// Inverted orbits of random words
    Orbit {
        #[command(subcommand)]
        cmd: OrbitCmd,
    },
    /// Group-element operations
    Group {
        #[command(subcommand)]
        cmd: GroupCmd,
    },
    /// Wreath-product walks
    Wreath {
        #[command(subcommand)]
        cmd: WreathCmd,
    },
    /// Quantitative analysis pipelines
    Analysis {
        #[command(subcommand)]
        cmd: AnalysisCmd,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Enumerate the closed ball around the root
    Ball {
        #[arg(long)]
        radius: i64,
    },
    /// Distance between two vertices (addresses as path:pos, e.g. :0, 01:4)
    Dist {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Give up past this distance
        #[arg(long, default_value_t = 1_000_000)]
        cap: i64,
    },
}

#[derive(Subcommand)]
enum ZlineCmd {
    /// Exact probability that the lazy walk stays in [-m, m] for n steps
    Confine {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u32,
        /// Print the log-probability instead
        #[arg(long)]
        log: bool,
    },
}

#[derive(Subcommand)]
enum OrbitCmd {
    /// Sample random words and record inverted-orbit statistics
    Sample {
        #[arg(long)]
        n: usize,
        /// Confinement half-width: marks acceptance and enables displacement
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, default_value_t = 100)]
        reps: u64,
    },
    /// Conditioned confinement statistics (the empirical displacement bound)
    Condition {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        /// rejection | bridge | auto
        #[arg(long, default_value = "auto")]
        mode: String,
    },
}

#[derive(Subcommand)]
enum GroupCmd {
    /// Compare two words as group elements (letters a, A, b, B)
    Equal {
        #[arg(long)]
        w1: String,
        #[arg(long)]
        w2: String,
    },
    /// Count distinct elements of word length n with small inverted orbits
    Count {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        /// Empirical displacement constant K
        #[arg(long, default_value_t = 4.0)]
        k: f64,
    },
}

#[derive(Subcommand)]
enum WreathCmd {
    /// Switch-walk-switch trajectories with lamp statistics
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        reps: u64,
    },
    /// Monte Carlo harmonic-function proxy at the root lamp
    Harmonic {
        /// Start element: lamps=<addr,addr,...>;base=<word>
        #[arg(long, default_value = "lamps=;base=")]
        start: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
    },
}

#[derive(Subcommand)]
enum AnalysisCmd {
    /// Flow-energy partial sums of the explicit unit flow
    Flow {
        #[arg(long, default_value_t = 60)]
        kmax: u32,
        /// Also verify Kirchhoff's law up to this level
        #[arg(long, default_value_t = 6)]
        kirchhoff: u32,
    },
    /// Green-function growth of the induced walk
    Green {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 200)]
        reps: u64,
    },
    /// Volume-growth exponent from exact ball counts
    Volume {
        /// Comma-separated radii; default log-spaced 1e3..1e5
        #[arg(long)]
        radii: Option<String>,
    },
    /// Return-probability lower-bound table and exponent fit
    Bound {
        #[arg(long, default_value_t = 1_000)]
        nmin: u64,
        #[arg(long, default_value_t = 10_000_000)]
        nmax: u64,
        /// Lower-bound points per decade
        #[arg(long, default_value_t = 1)]
        per_decade: u32,
        #[arg(long, default_value_t = 8.0)]
        kconst: f64,
        #[arg(long)]
        cpath: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        cdeep: f64,
    },
}

fn parse_start(rule: &ScalingRule, spec: &str) -> Result<WreathElement> {
    let mut lamps = LampConfig::empty();
    let mut base = Word::empty();
    for part in spec.split(';') {
        if let Some(addrs) = part.strip_prefix("lamps=") {
            for a in addrs.split(',').filter(|a| !a.is_empty()) {
                lamps.toggle(VertexAddress::parse(rule, a)?);
            }
        } else if let Some(w) = part.strip_prefix("base=") {
            base = Word::parse(w)?;
        } else if !part.is_empty() {
            bail!("unknown start component {part:?}; expected lamps=...;base=...");
        }
    }
    Ok(WreathElement::new(lamps, base))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let settings = cli.global.resolve()?;
    let started = Instant::now();
    run(cli.command, &settings)?;
    eprintln!("wall-time: {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn run(command: Command, s: &Settings) -> Result<()> {
    match command {
        Command::Graph { cmd } => graph_cmd(cmd, s),
        Command::Zline { cmd } => zline_cmd(cmd, s),
        Command::Orbit { cmd } => orbit_cmd(cmd, s),
        Command::Group { cmd } => group_cmd(cmd, s),
        Command::Wreath { cmd } => wreath_cmd(cmd, s),
        Command::Analysis { cmd } => analysis_cmd(cmd, s),
    }
}

fn graph_cmd(cmd: GraphCmd, s: &Settings) -> Result<()> {
    match cmd {
        GraphCmd::Ball { radius } => {
            let mut vertices = ball(&s.rule, ROOT, radius, DEFAULT_BALL_LIMIT)?;
            vertices.sort_unstable();
            let mut table = Table::new(vec!["path", "pos", "dist_to_root"]);
            let mut rows: Vec<(i64, VertexAddress)> = Vec::with_capacity(vertices.len());
            for v in vertices {
                rows.push((v.dist_to_root(&s.rule)?, v));
            }
            rows.sort_by_key(|&(d, v)| (d, v));
            for (d, v) in rows {
                table.push(vec![
                    Value::Str(v.path.to_string()),
                    Value::Int(v.pos as i128),
                    Value::Int(d as i128),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        GraphCmd::Dist { from, to, cap } => {
            let x = VertexAddress::parse(&s.rule, &from)?;
            let y = VertexAddress::parse(&s.rule, &to)?;
            match dist(&s.rule, x, y, cap)? {
                Dist::Exact(d) => println!("{d}"),
                Dist::Exceeded { cap } => println!("exceeded cap {cap}"),
            }
            Ok(())
        }
    }
}

fn zline_cmd(cmd: ZlineCmd, _s: &Settings) -> Result<()> {
    match cmd {
        ZlineCmd::Confine { n, m, log } => {
            let lp = confine_log_prob(ConfineQuery::new(n, m)?);
            if log {
                println!("{lp}");
            } else {
                println!("{}", lp.exp());
            }
            Ok(())
        }
    }
}

fn orbit_cmd(cmd: OrbitCmd, s: &Settings) -> Result<()> {
    match cmd {
        OrbitCmd::Sample { n, m, reps } => {
            let disp_set = match m {
                Some(m) => Some(bubblewalk_core::orbit::collapsed_displacement_set(
                    &s.rule,
                    m as i64,
                    DEFAULT_BALL_LIMIT,
                )?),
                None => None,
            };
            let mut table = Table::new(vec![
                "replica",
                "accepted",
                "orbit_radius",
                "max_displacement",
                "distinct_count",
            ]);
            for replica in 0..reps {
                let mut rng = replica_rng(s.seed, replica);
                let word = sample_word(n, &mut rng);
                let trace = inverted_orbit_scan(&s.rule, &word)?;
                let (accepted, displacement) = match (&disp_set, m) {
                    (Some(set), Some(m)) => {
                        let (lo, hi, _) = projection_extremes(&word);
                        let ok = lo >= -(m as i64) && hi <= m as i64;
                        (ok, Some(max_displacement_over(&s.rule, &word, set)?))
                    }
                    _ => (true, None),
                };
                table.push(vec![
                    Value::Int(replica as i128),
                    Value::Bool(accepted),
                    Value::Int(trace.radius as i128),
                    displacement.map_or(Value::Missing, |d| Value::Int(d as i128)),
                    Value::Int(trace.distinct_count as i128),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        OrbitCmd::Condition { n, m, reps, mode } => {
            let mode = match mode.as_str() {
                "rejection" => CondMode::Rejection,
                "bridge" => CondMode::Bridge,
                "auto" => CondMode::Auto,
                other => bail!("unknown mode {other:?}"),
            };
            let cfg = CondConfig { mode, ..CondConfig::new(n, m, reps, s.seed) };
            let (report, _) = conditioned_orbit_stats(&s.rule, &cfg)?;
            let mut table = Table::new(vec![
                "n",
                "m",
                "reps",
                "accepted",
                "max_orbit_radius_over_m",
                "max_displacement_over_m",
                "empirical_k",
                "log_acceptance_prob",
                "mode",
                "full_set_check",
            ]);
            table.push(vec![
                Value::Int(report.n as i128),
                Value::Int(report.m as i128),
                Value::Int(report.reps as i128),
                Value::Int(report.accepted as i128),
                Value::Float(report.max_orbit_radius_over_m),
                Value::Float(report.max_displacement_over_m),
                Value::Float(report.empirical_k),
                Value::Float(report.log_acceptance_prob),
                Value::Str(format!("{:?}", report.mode).to_lowercase()),
                Value::Bool(report.full_set_check),
            ]);
            emit(&table, s.format, s.out.as_ref())
        }
    }
}

fn group_cmd(cmd: GroupCmd, s: &Settings) -> Result<()> {
    match cmd {
        GroupCmd::Equal { w1, w2 } => {
            let a = Word::parse(&w1)?;
            let b = Word::parse(&w2)?;
            println!("{}", elements_equal(&s.rule, &a, &b)?);
            Ok(())
        }
        GroupCmd::Count { n, m, k } => {
            let count = count_small_orbit_elements(&s.rule, n, m, k)?;
            let mut table =
                Table::new(vec!["n", "m", "k_emp", "distinct_elements", "words_examined"]);
            table.push(vec![
                Value::Int(count.n as i128),
                Value::Int(count.m as i128),
                Value::Float(k),
                Value::Int(count.distinct_elements as i128),
                Value::Int(count.words_examined as i128),
            ]);
            emit(&table, s.format, s.out.as_ref())
        }
    }
}

fn wreath_cmd(cmd: WreathCmd, s: &Settings) -> Result<()> {
    match cmd {
        WreathCmd::Simulate { n, reps } => {
            use rayon::prelude::*;
            let results: Vec<(usize, bool, usize)> = (0..reps)
                .into_par_iter()
                .map(|replica| -> Result<(usize, bool, usize)> {
                    let mut rng = replica_rng(s.seed, replica);
                    let (element, summary) =
                        simulate_sws(&s.rule, n, &WreathElement::identity(), &mut rng)?;
                    Ok((
                        element.lamps.support_size(),
                        summary.returned_to_identity,
                        summary.toggle_sites.len(),
                    ))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut table = Table::new(vec!["replica", "final_support", "returned", "toggles"]);
            for (replica, (support, returned, toggles)) in results.into_iter().enumerate() {
                table.push(vec![
                    Value::Int(replica as i128),
                    Value::Int(support as i128),
                    Value::Bool(returned),
                    Value::Int(toggles as i128),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        WreathCmd::Harmonic { start, horizon, reps } => {
            let start = parse_start(&s.rule, &start)?;
            let est = harmonic_estimate(&s.rule, &start, horizon, reps, s.seed)?;
            let mut table = Table::new(vec![
                "p_hat",
                "stderr",
                "late_toggle_fraction",
                "reps",
                "horizon",
            ]);
            table.push(vec![
                Value::Float(est.p_hat),
                Value::Float(est.stderr),
                Value::Float(est.late_toggle_fraction),
                Value::Int(est.reps as i128),
                Value::Int(est.horizon as i128),
            ]);
            emit(&table, s.format, s.out.as_ref())
        }
    }
}

fn analysis_cmd(cmd: AnalysisCmd, s: &Settings) -> Result<()> {
    match cmd {
        AnalysisCmd::Flow { kmax, kirchhoff } => {
            let trace = flow_energy(&s.rule, kmax)?;
            let verdict = energy_verdict(&trace);
            let kirchhoff_ok = kirchhoff_check(&s.rule, kirchhoff)?;
            eprintln!("verdict: {verdict:?}; kirchhoff up to level {kirchhoff}: {kirchhoff_ok}");
            let mut table =
                Table::new(vec!["k", "level_term", "partial_sum", "half_sum_partial"]);
            for (i, &term) in trace.level_terms.iter().enumerate() {
                table.push(vec![
                    Value::Int(i as i128 + 1),
                    Value::Float(term),
                    Value::Float(trace.partial_sums[i]),
                    Value::Float(trace.half_sum_partials[i]),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        AnalysisCmd::Green { n, reps } => {
            let est = green_function_estimate(&s.rule, n, reps, s.seed)?;
            let mut table = Table::new(vec!["t", "green", "stderr"]);
            for (t, g, se) in est.points {
                table.push(vec![Value::Int(t as i128), Value::Float(g), Value::Float(se)]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        AnalysisCmd::Volume { radii } => {
            let radii: Vec<i64> = match radii {
                Some(spec) => spec
                    .split(',')
                    .map(|r| r.trim().parse::<i64>().context("bad radius"))
                    .collect::<Result<Vec<_>>>()?,
                None => (0..=8).map(|i| (1000.0 * 10f64.powf(i as f64 / 4.0)) as i64).collect(),
            };
            let fit = volume_exponent_fit(&s.rule, &radii)?;
            let mut table = Table::new(vec!["radius", "volume", "slope"]);
            for (r, v) in &fit.points {
                table.push(vec![
                    Value::Int(*r as i128),
                    Value::Int(*v as i128),
                    Value::Float(fit.slope),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
        AnalysisCmd::Bound { nmin, nmax, per_decade, kconst, cpath, cdeep } => {
            if nmin < 1 || nmax < nmin {
                bail!("need 1 <= nmin <= nmax");
            }
            let mut n_list = Vec::new();
            let decades = (nmax as f64 / nmin as f64).log10();
            let points = (decades * per_decade as f64).round() as usize;
            for i in 0..=points {
                let n = (nmin as f64 * 10f64.powf(i as f64 / per_decade as f64)) as u64;
                if n <= nmax && n_list.last() != Some(&n) {
                    n_list.push(n);
                }
            }
            let consts = CountingConstants {
                k: kconst,
                c_path: cpath.unwrap_or(6.0 * kconst),
                c_deep: cdeep,
            };
            let table_data = bound_pipeline(&s.rule, &n_list, &default_m_grid(nmax), &consts)?;
            let mut table = Table::new(vec![
                "n",
                "m_opt",
                "log_pA_lower",
                "log_A_upper",
                "log_bound",
                "fitted_exponent",
                "m_scaling_exponent",
            ]);
            for row in &table_data.rows {
                table.push(vec![
                    Value::Int(row.n as i128),
                    Value::Int(row.m_opt as i128),
                    Value::Float(row.log_pa_lower),
                    Value::Float(row.log_a_upper),
                    Value::Float(row.log_bound),
                    Value::Float(table_data.fitted_exponent),
                    Value::Float(table_data.m_scaling_exponent),
                ]);
            }
            emit(&table, s.format, s.out.as_ref())
        }
    }
}
