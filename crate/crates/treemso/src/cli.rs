//! The command-line surface: thin argument handling over the library
//! operations, with a uniform exit-code contract.
//!
//! Exit codes: `0` for success (and a `true` verdict), `1` for a negative
//! verdict (`false`, a rejected lasso, an opponent win, an invalid
//! certificate), `2` for usage and input errors, `3` when a resource cap
//! was hit. `--json` switches every command's stdout to a single
//! machine-readable object; `--out FILE` redirects the primary artifact
//! (automaton, strategy) to a file instead of stdout.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::automata::Apt;
use crate::games::{
    check_certificate, solve, GameError, ParityGame, Player, Strategy,
};
use crate::hf::HfSet;
use crate::logic::parse_sentence;
use crate::pipeline::{
    compile_sentence, decide, decide_automaton, CompilationTrace, Limits,
    PipelineError, Verdict,
};
use crate::simulation::{
    bang, complement_dpw, determinize, lasso_accepts, nbw_bad_trace, nd,
    quotient_dpw, Dpw, Nbw, SimError, DEFAULT_STATE_CAP,
};

const EXIT_TRUE: u8 = 0;
const EXIT_FALSE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "treemso",
    about = "Decide monadic second-order sentences over the infinite D-ary tree",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a closed sentence over the infinite tree.
    Decide(DecideArgs),
    /// Compile a closed sentence to a parity tree automaton (.apt).
    Compile(CompileArgs),
    /// Decide nonemptiness of a serialized automaton over a one-letter
    /// alphabet.
    DecideAutomaton(DecideAutomatonArgs),
    /// Replace an automaton by a nondeterministic one with the same
    /// language.
    Simulate(SimulateArgs),
    /// Run a lasso word u·v^ω through a deterministic parity word
    /// automaton (.dpw).
    Lasso(LassoArgs),
    /// Solve a parity game (.pg) from a start vertex.
    SolveGame(SolveGameArgs),
    /// Check a strategy certificate (.strat) against a game (.pg).
    CheckCertificate(CheckCertificateArgs),
    /// Print structural statistics for a serialized artifact.
    Stats(StatsArgs),
}

#[derive(clap::Args)]
struct DecideArgs {
    /// The sentence, e.g. "all1 x. ex1 y. y = s0(x)".
    sentence: String,
    /// Tree branching degree.
    #[arg(long, default_value_t = 2)]
    arity: usize,
    /// Cap on the state count of any intermediate automaton.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    max_states: usize,
    /// Write the acceptance game here (.pg).
    #[arg(long)]
    game_out: Option<PathBuf>,
    /// Write the winning-strategy certificate here (.strat).
    #[arg(long)]
    cert_out: Option<PathBuf>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
    /// Print per-node compilation records to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(clap::Args)]
struct CompileArgs {
    /// The sentence to compile.
    sentence: String,
    /// Tree branching degree.
    #[arg(long, default_value_t = 2)]
    arity: usize,
    /// Cap on the state count of any intermediate automaton.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    max_states: usize,
    /// Write the automaton here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
    /// Print per-node compilation records to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(clap::Args)]
struct DecideAutomatonArgs {
    /// An .apt file over a one-letter alphabet.
    file: PathBuf,
    /// Cap on the state count of any intermediate automaton.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    max_states: usize,
    /// Write the acceptance game here (.pg).
    #[arg(long)]
    game_out: Option<PathBuf>,
    /// Write the winning-strategy certificate here (.strat).
    #[arg(long)]
    cert_out: Option<PathBuf>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// An .apt file.
    file: PathBuf,
    /// Cap on the state count of any intermediate automaton.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    max_states: usize,
    /// Write the nondeterministic automaton here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the deterministic parity word automaton for the
    /// complemented trace condition (.dpw) here.
    #[arg(long)]
    dpw_out: Option<PathBuf>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct LassoArgs {
    /// A .dpw file.
    file: PathBuf,
    /// Stem letters, `;`-separated HF-set literals (may be empty).
    #[arg(long, default_value = "")]
    stem: String,
    /// Cycle letters, `;`-separated HF-set literals (at least one).
    #[arg(long)]
    cycle: String,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct SolveGameArgs {
    /// A .pg file.
    file: PathBuf,
    /// Start vertex as an HF-set literal; defaults to the least proponent
    /// vertex.
    #[arg(long)]
    start: Option<String>,
    /// Write the winning strategy here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct CheckCertificateArgs {
    /// A .pg file.
    game: PathBuf,
    /// A .strat file; its owner is the claimed winner.
    certificate: PathBuf,
    /// Start vertex as an HF-set literal; defaults to the least proponent
    /// vertex.
    #[arg(long)]
    start: Option<String>,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct StatsArgs {
    /// An .apt, .pg, .strat, .dpw, or .nbw file.
    file: PathBuf,
    /// Emit a machine-readable JSON object instead of plain text.
    #[arg(long)]
    json: bool,
}

/// A failure plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

fn from_pipeline(e: PipelineError) -> Failure {
    let code = if e.is_resource_cap() { EXIT_RESOURCE } else { EXIT_USAGE };
    Failure { code, message: e.to_string() }
}

fn from_sim(e: SimError) -> Failure {
    let code = match e {
        SimError::TooLarge { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    };
    Failure { code, message: e.to_string() }
}

fn from_game(e: GameError) -> Failure {
    let code = match e {
        GameError::TooLarge { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    };
    Failure { code, message: e.to_string() }
}

/// Entry point used by `main`; returns the process exit code.
pub fn run(args: Vec<String>) -> u8 {
    let argv = std::iter::once("treemso".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests render on stdout and exit 0;
            // everything else is a usage error.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_TRUE };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Decide(a) => cmd_decide(a),
        Command::Compile(a) => cmd_compile(a),
        Command::DecideAutomaton(a) => cmd_decide_automaton(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Lasso(a) => cmd_lasso(a),
        Command::SolveGame(a) => cmd_solve_game(a),
        Command::CheckCertificate(a) => cmd_check_certificate(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_apt(path: &Path) -> Result<Apt, Failure> {
    Apt::from_text(&read_file(path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_game(path: &Path) -> Result<ParityGame, Failure> {
    let g = ParityGame::from_text(&read_file(path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let problems = g.validate();
    if !problems.is_empty() {
        return Err(Failure::usage(format!(
            "{}: invalid game: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    Ok(g)
}

/// The requested start vertex, or the least proponent vertex by default.
fn start_vertex(g: &ParityGame, requested: &Option<String>) -> Result<HfSet, Failure> {
    let start = match requested {
        Some(text) => HfSet::parse(text)
            .map_err(|e| Failure::usage(format!("start vertex: {e}")))?,
        None => g
            .prop
            .iter()
            .next()
            .cloned()
            .ok_or_else(|| {
                Failure::usage("game has no proponent vertices; pass --start")
            })?,
    };
    if !g.prop.contains(&start) && !g.opp.contains(&start) {
        return Err(Failure::usage(format!("start vertex {start} is not in the game")));
    }
    Ok(start)
}

/// Parse `;`-separated HF-set literals; an all-whitespace string is empty.
fn parse_letters(text: &str) -> Result<Vec<HfSet>, Failure> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|part| {
            let part = part.trim();
            HfSet::parse(part)
                .map_err(|e| Failure::usage(format!("letter `{part}`: {e}")))
        })
        .collect()
}

fn print_trace(trace: &CompilationTrace) {
    for r in &trace.records {
        eprintln!(
            "[{:>16}] {:>6} -> {:>6} states  {:>10.3?}  {}",
            r.construction, r.states_before, r.states_after, r.elapsed, r.formula
        );
    }
}

fn trace_json(trace: &CompilationTrace) -> serde_json::Value {
    let records: Vec<serde_json::Value> = trace
        .records
        .iter()
        .map(|r| {
            json!({
                "formula": r.formula,
                "construction": r.construction,
                "states_before": r.states_before,
                "states_after": r.states_after,
                "elapsed_ms": r.elapsed.as_secs_f64() * 1e3,
            })
        })
        .collect();
    serde_json::Value::Array(records)
}

fn game_edge_count(g: &ParityGame) -> (usize, usize) {
    let p: usize = g.e_p.values().map(BTreeSetLen::set_len).sum();
    let o: usize = g.e_o.values().map(BTreeSetLen::set_len).sum();
    (p, o)
}

/// `len` for the two edge-set shapes, so [`game_edge_count`] can sum both.
trait BTreeSetLen {
    fn set_len(&self) -> usize;
}
impl<T> BTreeSetLen for std::collections::BTreeSet<T> {
    fn set_len(&self) -> usize {
        self.len()
    }
}

fn emit_verdict(
    v: &Verdict,
    game_out: &Option<PathBuf>,
    cert_out: &Option<PathBuf>,
    json: bool,
    trace: bool,
) -> Result<u8, Failure> {
    if let Some(path) = game_out {
        write_file(path, &v.game.to_text())?;
    }
    if let Some(path) = cert_out {
        write_file(path, &v.certificate.to_text())?;
    }
    if trace {
        print_trace(&v.trace);
    }
    if json {
        let (e_p, e_o) = game_edge_count(&v.game);
        let mut obj = json!({
            "truth": v.truth,
            "winner": if v.truth { "prop" } else { "opp" },
            "start": v.start.to_string(),
            "game": {
                "prop_vertices": v.game.prop.len(),
                "opp_vertices": v.game.opp.len(),
                "prop_edges": e_p,
                "opp_edges": e_o,
                "max_color": v.game.max_color,
            },
            "certificate": v.certificate.to_text(),
            "peak_states": v.peak_states,
            "wall_time_ms": v.wall_time.as_secs_f64() * 1e3,
        });
        if trace {
            obj["trace"] = trace_json(&v.trace);
        }
        println!("{obj}");
    } else {
        println!("{}", if v.truth { "true" } else { "false" });
    }
    Ok(if v.truth { EXIT_TRUE } else { EXIT_FALSE })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_decide(a: DecideArgs) -> Result<u8, Failure> {
    let phi = parse_sentence(&a.sentence, a.arity)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let limits = Limits { max_states: a.max_states };
    let verdict = decide(&phi, a.arity, &limits).map_err(from_pipeline)?;
    emit_verdict(&verdict, &a.game_out, &a.cert_out, a.json, a.trace)
}

fn cmd_compile(a: CompileArgs) -> Result<u8, Failure> {
    let phi = parse_sentence(&a.sentence, a.arity)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let limits = Limits { max_states: a.max_states };
    let (apt, trace, peak) =
        compile_sentence(&phi, a.arity, &limits).map_err(from_pipeline)?;
    if a.trace {
        print_trace(&trace);
    }
    let text = apt.to_text();
    if let Some(path) = &a.out {
        write_file(path, &text)?;
    }
    if a.json {
        let mut obj = json!({
            "states": apt.states.len(),
            "alphabet": apt.alphabet.len(),
            "transitions": apt.delta.len(),
            "max_color": apt.max_color,
            "peak_states": peak,
        });
        match &a.out {
            Some(path) => obj["out"] = json!(path.display().to_string()),
            None => obj["apt"] = json!(text),
        }
        if a.trace {
            obj["trace"] = trace_json(&trace);
        }
        println!("{obj}");
    } else if a.out.is_none() {
        print!("{text}");
    }
    Ok(EXIT_TRUE)
}

fn cmd_decide_automaton(a: DecideAutomatonArgs) -> Result<u8, Failure> {
    let apt = read_apt(&a.file)?;
    let limits = Limits { max_states: a.max_states };
    let verdict = decide_automaton(&apt, &limits).map_err(from_pipeline)?;
    emit_verdict(&verdict, &a.game_out, &a.cert_out, a.json, false)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let apt = read_apt(&a.file)?;
    let out = nd(&apt, a.max_states).map_err(from_sim)?;
    let text = out.to_text();
    if let Some(path) = &a.out {
        write_file(path, &text)?;
    }
    let dpw_states = match &a.dpw_out {
        Some(path) => {
            // The standalone word-automaton chain: subset construction,
            // bad-trace recognizer over its reachable letters, then the
            // complemented determinization.
            let b = bang(&apt, a.max_states).map_err(from_sim)?;
            let nbw = nbw_bad_trace(&apt, &b.states);
            let d = determinize(&nbw, a.max_states).map_err(from_sim)?;
            let d = complement_dpw(&quotient_dpw(&d));
            write_file(path, &d.to_text())?;
            Some(d.states.len())
        }
        None => None,
    };
    if a.json {
        let mut obj = json!({
            "input_states": apt.states.len(),
            "output_states": out.states.len(),
            "alphabet": out.alphabet.len(),
            "max_color": out.max_color,
        });
        match &a.out {
            Some(path) => obj["out"] = json!(path.display().to_string()),
            None => obj["apt"] = json!(text),
        }
        if let Some(n) = dpw_states {
            obj["dpw_states"] = json!(n);
        }
        println!("{obj}");
    } else if a.out.is_none() {
        print!("{text}");
    }
    Ok(EXIT_TRUE)
}

fn cmd_lasso(a: LassoArgs) -> Result<u8, Failure> {
    let d = Dpw::from_text(&read_file(&a.file)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.file.display())))?;
    let stem = parse_letters(&a.stem)?;
    let cycle = parse_letters(&a.cycle)?;
    if cycle.is_empty() {
        return Err(Failure::usage("--cycle needs at least one letter"));
    }
    let accepted = lasso_accepts(&d, &stem, &cycle).map_err(from_sim)?;
    if a.json {
        println!("{}", json!({ "accepted": accepted }));
    } else {
        println!("{}", if accepted { "accepted" } else { "rejected" });
    }
    Ok(if accepted { EXIT_TRUE } else { EXIT_FALSE })
}

fn cmd_solve_game(a: SolveGameArgs) -> Result<u8, Failure> {
    let g = read_game(&a.file)?;
    let start = start_vertex(&g, &a.start)?;
    let solution = solve(&g, &start);
    let strategy_text = solution.strategy.to_text();
    if let Some(path) = &a.out {
        write_file(path, &strategy_text)?;
    }
    let (e_p, e_o) = game_edge_count(&g);
    if a.json {
        let mut obj = json!({
            "winner": solution.winner.to_string(),
            "start": start.to_string(),
            "prop_vertices": g.prop.len(),
            "opp_vertices": g.opp.len(),
            "prop_edges": e_p,
            "opp_edges": e_o,
            "max_color": g.max_color,
        });
        match &a.out {
            Some(path) => obj["out"] = json!(path.display().to_string()),
            None => obj["strategy"] = json!(strategy_text),
        }
        println!("{obj}");
    } else {
        println!("winner: {}", solution.winner);
        println!("start: {start}");
        println!(
            "vertices: {} prop + {} opp; edges: {} + {}; max color: {}",
            g.prop.len(),
            g.opp.len(),
            e_p,
            e_o,
            g.max_color
        );
        if a.out.is_none() {
            print!("{strategy_text}");
        }
    }
    Ok(match solution.winner {
        Player::Prop => EXIT_TRUE,
        Player::Opp => EXIT_FALSE,
    })
}

fn cmd_check_certificate(a: CheckCertificateArgs) -> Result<u8, Failure> {
    let g = read_game(&a.game)?;
    let sigma = Strategy::from_text(&read_file(&a.certificate)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.certificate.display())))?;
    let start = start_vertex(&g, &a.start)?;
    let valid = check_certificate(&g, sigma.owner, &sigma, &start).map_err(from_game)?;
    if a.json {
        println!(
            "{}",
            json!({
                "valid": valid,
                "winner": sigma.owner.to_string(),
                "start": start.to_string(),
            })
        );
    } else {
        println!("{}", if valid { "valid" } else { "invalid" });
    }
    Ok(if valid { EXIT_TRUE } else { EXIT_FALSE })
}

fn cmd_stats(a: StatsArgs) -> Result<u8, Failure> {
    let ext = a
        .file
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_string();
    let text = read_file(&a.file)?;
    let bad = |e: String| Failure::usage(format!("{}: {e}", a.file.display()));
    let obj = match ext.as_str() {
        "apt" => {
            let x = Apt::from_text(&text).map_err(|e| bad(e.to_string()))?;
            json!({
                "kind": "apt",
                "arity": x.arity,
                "states": x.states.len(),
                "alphabet": x.alphabet.len(),
                "transitions": x.delta.len(),
                "max_color": x.max_color,
            })
        }
        "pg" => {
            let x = ParityGame::from_text(&text).map_err(|e| bad(e.to_string()))?;
            let (e_p, e_o) = game_edge_count(&x);
            json!({
                "kind": "pg",
                "prop_vertices": x.prop.len(),
                "opp_vertices": x.opp.len(),
                "prop_edges": e_p,
                "opp_edges": e_o,
                "max_color": x.max_color,
            })
        }
        "strat" => {
            let x = Strategy::from_text(&text).map_err(|e| bad(e.to_string()))?;
            json!({
                "kind": "strat",
                "owner": x.owner.to_string(),
                "choices": x.choice.len(),
            })
        }
        "dpw" => {
            let x = Dpw::from_text(&text).map_err(|e| bad(e.to_string()))?;
            json!({
                "kind": "dpw",
                "states": x.states.len(),
                "alphabet": x.alphabet.len(),
                "transitions": x.trans.len(),
                "max_color": x.max_color,
            })
        }
        "nbw" => {
            let x = Nbw::from_text(&text).map_err(|e| bad(e.to_string()))?;
            json!({
                "kind": "nbw",
                "states": x.states.len(),
                "alphabet": x.alphabet.len(),
                "transitions": x.trans.len(),
                "initial": x.initial.len(),
                "accepting": x.accepting.len(),
            })
        }
        other => {
            return Err(Failure::usage(format!(
                "unrecognized extension `.{other}`; expected .apt, .pg, .strat, .dpw, or .nbw"
            )))
        }
    };
    if a.json {
        println!("{obj}");
    } else {
        let map = obj.as_object().expect("stats objects are JSON maps");
        for (k, v) in map {
            match v.as_str() {
                Some(s) => println!("{k}: {s}"),
                None => println!("{k}: {v}"),
            }
        }
    }
    Ok(EXIT_TRUE)
}
