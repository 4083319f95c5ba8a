//! `qwv` — command-line front door for the qwhile semantic checker.
//!
//! Subcommands: `run` (simulate a program), `check` (verify a Hoare triple
//! against a program), `outline` (replay a proof outline), `examples` (the
//! built-in algorithm suite) and `rules-selftest` (randomized soundness
//! harness for the inference rules).
//!
//! Exit codes: 0 success/valid, 1 invalid or failed, 2 parse error,
//! 3 semantic error, 4 loop non-convergence.

use clap::{Args, Parser, Subcommand};
use qwv_core::casestudies::{self, CaseStudy};
use qwv_core::dirac::parse::parse_assertion;
use qwv_core::dirac::{DiracError, LabelledOperator};
use qwv_core::group::AbelianGroup;
use qwv_core::hoare::{
    check_outline, check_valid, soundness_fuzz, HoareError, Judgment, Mode, Saturation, Verdict,
    ALL_RULES,
};
use qwv_core::linalg::Scalar;
use qwv_core::qwhile::parse::{parse_gate_sidecar, parse_program, ParsedProgram};
use qwv_core::qwhile::QwhileError;
use qwv_core::semantics::{self, SemanticsError};
use qwv_core::Config;
use serde_json::json;
use std::collections::HashMap;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qwv", about = "qwhile programs, super-operator semantics and Hoare-triple checking", version)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Relative Frobenius tolerance for operator equality.
    #[arg(long = "tol", global = true)]
    eq_tol: Option<f64>,
    /// Positivity tolerance.
    #[arg(long = "psd-tol", global = true)]
    psd_tol: Option<f64>,
    /// Convergence threshold for while-loop partial sums.
    #[arg(long = "while-tol", global = true)]
    while_tol: Option<f64>,
    /// Maximum number of loop unrollings.
    #[arg(long = "while-kmax", global = true)]
    while_kmax: Option<u64>,
    /// Largest Hilbert dimension the semantics will materialize.
    #[arg(long = "max-dim", global = true)]
    max_dim: Option<usize>,
    /// RNG seed for randomized harnesses.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for suite commands.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Sidecar JSON file of named gate matrices.
    #[arg(long, global = true)]
    gates: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program, run it on an input state and print the result.
    Run {
        program: String,
        /// Input state expression (assertion grammar); defaults to the
        /// maximally mixed state on the footprint.
        #[arg(long)]
        input: Option<String>,
    },
    /// Check a pre/post specification against a program.
    Check {
        program: String,
        /// JSON file: {"pre": .., "post": .., "mode": "total"|"partial",
        /// "saturated": bool} (or pre_state/post_state kets).
        spec: String,
    },
    /// Replay a proof outline step by step.
    Outline {
        program: String,
        outline: String,
    },
    /// Run the built-in case studies.
    Examples {
        /// Case study name (hsp, grover, qpe, qft, rev, hlf, hhl, parah) or
        /// nothing/"--all" for the whole suite.
        name: Option<String>,
        /// Run every case study.
        #[arg(long)]
        all: bool,
        /// HSP: group moduli, e.g. "2,2".
        #[arg(long)]
        group: Option<String>,
        /// HSP: subgroup generators, e.g. "(1,1)" or "(1,0);(0,1)".
        #[arg(long)]
        subgroup: Option<String>,
        /// Size parameter (grover: |T|, qpe: control values, qft/rev/parah/hlf: wires).
        #[arg(long)]
        n: Option<usize>,
        /// Grover: marked indices, e.g. "3" or "1,2".
        #[arg(long)]
        marked: Option<String>,
        /// Grover: number of rounds.
        #[arg(long)]
        rounds: Option<usize>,
        /// QPE: the phase to estimate.
        #[arg(long)]
        theta: Option<f64>,
        /// HLF: symmetric boolean matrix rows, e.g. "1,1;1,0".
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Fuzz every inference rule against the semantic checker.
    RulesSelftest {
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Write a replay file here when a counterexample appears.
        #[arg(long)]
        counterexample_out: Option<String>,
    },
}

fn env_f64(name: &str) -> Option<f64> {
    std::env::var(name).ok()?.parse().ok()
}

fn env_u64(name: &str) -> Option<u64> {
    std::env::var(name).ok()?.parse().ok()
}

fn build_config(opts: &GlobalOpts) -> Config {
    let mut cfg = Config::default();
    if let Some(v) = env_f64("QWV_EQ_TOL") {
        cfg.eq_tol = v;
    }
    if let Some(v) = env_f64("QWV_PSD_TOL") {
        cfg.psd_tol = v;
    }
    if let Some(v) = env_f64("QWV_WHILE_TOL") {
        cfg.while_tol = v;
    }
    if let Some(v) = env_u64("QWV_WHILE_KMAX") {
        cfg.while_kmax = v;
    }
    if let Some(v) = env_u64("QWV_MAX_DIM") {
        cfg.max_dim = v as usize;
    }
    if let Some(v) = env_u64("QWV_SEED") {
        cfg.seed = v;
    }
    if let Some(v) = opts.eq_tol {
        cfg.eq_tol = v;
    }
    if let Some(v) = opts.psd_tol {
        cfg.psd_tol = v;
    }
    if let Some(v) = opts.while_tol {
        cfg.while_tol = v;
    }
    if let Some(v) = opts.while_kmax {
        cfg.while_kmax = v;
    }
    if let Some(v) = opts.max_dim {
        cfg.max_dim = v;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    cfg
}

/// Error wrapper carrying the process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(e: std::io::Error, path: &str) -> CliError {
    CliError::new(2, format!("cannot read `{path}`: {e}"))
}

fn parse_err(e: QwhileError) -> CliError {
    match e {
        QwhileError::Syntax { .. }
        | QwhileError::Type(_)
        | QwhileError::Disjointness(_)
        | QwhileError::UnknownGate(_)
        | QwhileError::UnknownVariable(_) => CliError::new(2, e.to_string()),
        other => CliError::new(3, other.to_string()),
    }
}

fn semantic_err(e: SemanticsError) -> CliError {
    match e {
        SemanticsError::NoConvergence { .. } => CliError::new(4, e.to_string()),
        other => CliError::new(3, other.to_string()),
    }
}

fn hoare_err(e: HoareError) -> CliError {
    match e {
        HoareError::Semantics(SemanticsError::NoConvergence { .. }) => {
            CliError::new(4, e.to_string())
        }
        HoareError::Dirac(DiracError::Syntax(..)) => CliError::new(2, e.to_string()),
        other => CliError::new(3, other.to_string()),
    }
}

fn load_program(path: &str, opts: &GlobalOpts) -> CliResult<ParsedProgram> {
    let src = std::fs::read_to_string(path).map_err(|e| io_err(e, path))?;
    let sidecar = match &opts.gates {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(e, p))?;
            parse_gate_sidecar(&text).map_err(parse_err)?
        }
        None => HashMap::new(),
    };
    parse_program(&src, &sidecar).map_err(parse_err)
}

fn render_state(rho: &LabelledOperator, table: &qwv_core::dirac::VarTable) -> String {
    let labels: Vec<String> =
        rho.out_labels().iter().map(|l| table.slot(l).name.clone()).collect();
    let mut out = format!("density operator on [{}]:\n", labels.join(", "));
    let m = rho.matrix();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m.get(i, j);
            out.push_str(&format!("{:>9.5}{:+.5}i ", z.re, z.im));
        }
        out.push('\n');
    }
    out
}

fn state_json(rho: &LabelledOperator) -> serde_json::Value {
    let m = rho.matrix();
    let entries: Vec<Vec<[f64; 2]>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
        .collect();
    json!({ "dim": m.rows(), "entries": entries })
}

fn verdict_json(v: &Verdict) -> serde_json::Value {
    json!({
        "status": if v.is_valid() { "valid" } else { "invalid" },
        "mode": match v.mode { Mode::Total => "total", Mode::Partial => "partial" },
        "saturated": v.saturation == Saturation::Saturated,
        "slack": if v.slack.is_finite() { Some(v.slack) } else { None },
        "distance": v.distance,
        "diagnostics": v.diagnostics,
    })
}

fn cmd_run(program: &str, input: Option<&str>, opts: &GlobalOpts, cfg: &Config) -> CliResult<u8> {
    let parsed = load_program(program, opts)?;
    let prog = parsed.program();
    let f = prog.footprint();
    let so = semantics::denote_on(&prog, &parsed.table, &f, cfg).map_err(semantic_err)?;
    let rho = match input {
        Some(expr) => {
            let v = parse_assertion(expr, &parsed.table)
                .map_err(|e| CliError::new(2, e.to_string()))?;
            let state = if v.in_labels().is_empty() && !v.out_labels().is_empty() {
                // A ket: normalize into a density operator.
                let n = v.norm();
                v.scale(Scalar::ONE / Scalar::new(n, 0.0))
                    .outer_with_self()
                    .map_err(|e| CliError::new(2, e.to_string()))?
            } else {
                v
            };
            state
                .cyl_extend(&parsed.table, &f.union(state.out_labels()))
                .map_err(|e| CliError::new(3, e.to_string()))?
        }
        None => {
            let d = parsed.table.dim_of(&f);
            LabelledOperator::identity(&parsed.table, &f)
                .scale(Scalar::new(1.0 / d.max(1) as f64, 0.0))
        }
    };
    let out = so.apply(&parsed.table, &rho).map_err(semantic_err)?;
    let quality = so.quality(cfg.psd_tol).map_err(|e| CliError::new(3, e.to_string()))?;
    if opts.json {
        let doc = json!({
            "state": state_json(&out),
            "quality": {
                "cp": quality.is_cp,
                "trace_nonincreasing": quality.is_trace_nonincreasing,
                "trace_preserving": quality.is_trace_preserving,
                "choi_min_eig": quality.choi_min_eig,
            }
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        print!("{}", render_state(&out, &parsed.table));
        println!(
            "quality: CP={} trace-nonincreasing={} trace-preserving={} (Choi min eig {:.3e})",
            quality.is_cp,
            quality.is_trace_nonincreasing,
            quality.is_trace_preserving,
            quality.choi_min_eig
        );
    }
    Ok(0)
}

fn parse_spec(
    text: &str,
    parsed: &ParsedProgram,
) -> CliResult<(LabelledOperator, LabelledOperator, Mode, Saturation)> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::new(2, format!("bad spec JSON: {e}")))?;
    let side = |op_key: &str, state_key: &str| -> CliResult<LabelledOperator> {
        if let Some(s) = doc.get(state_key).and_then(|v| v.as_str()) {
            let ket = parse_assertion(s, &parsed.table)
                .map_err(|e| CliError::new(2, e.to_string()))?;
            return ket.outer_with_self().map_err(|e| CliError::new(2, e.to_string()));
        }
        let s = doc
            .get(op_key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| CliError::new(2, format!("spec is missing `{op_key}`")))?;
        parse_assertion(s, &parsed.table).map_err(|e| CliError::new(2, e.to_string()))
    };
    let pre = side("pre", "pre_state")?;
    let post = side("post", "post_state")?;
    let mode = match doc.get("mode").and_then(|v| v.as_str()).unwrap_or("total") {
        "total" | "t" => Mode::Total,
        "partial" | "p" => Mode::Partial,
        other => return Err(CliError::new(2, format!("bad mode `{other}`"))),
    };
    let st = if doc.get("saturated").and_then(|v| v.as_bool()).unwrap_or(false) {
        Saturation::Saturated
    } else {
        Saturation::Plain
    };
    Ok((pre, post, mode, st))
}

fn cmd_check(program: &str, spec: &str, opts: &GlobalOpts, cfg: &Config) -> CliResult<u8> {
    let parsed = load_program(program, opts)?;
    let text = std::fs::read_to_string(spec).map_err(|e| io_err(e, spec))?;
    let (pre, post, mode, st) = parse_spec(&text, &parsed)?;
    let j = Judgment::new(pre, parsed.program(), post, mode, st)
        .map_err(|e| CliError::new(2, e.to_string()))?;
    let v = check_valid(&j, &parsed.table, cfg).map_err(hoare_err)?;
    if opts.json {
        println!("{}", serde_json::to_string_pretty(&verdict_json(&v)).unwrap());
    } else {
        println!(
            "{}: slack {:.3e}, distance {:.3e}{}",
            if v.is_valid() { "Valid" } else { "Invalid" },
            v.slack,
            v.distance,
            if v.diagnostics.is_empty() { String::new() } else { format!(" ({})", v.diagnostics) }
        );
    }
    Ok(if v.is_valid() { 0 } else { 1 })
}

fn cmd_outline(program: &str, outline: &str, opts: &GlobalOpts, cfg: &Config) -> CliResult<u8> {
    let parsed = load_program(program, opts)?;
    let text = std::fs::read_to_string(outline).map_err(|e| io_err(e, outline))?;
    let report = check_outline(&parsed, &text, cfg).map_err(hoare_err)?;
    if opts.json {
        let steps: Vec<_> = report
            .steps
            .iter()
            .map(|s| json!({"index": s.index, "rule": s.rule, "ok": s.ok, "message": s.message}))
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({"passed": report.passed(), "steps": steps}))
                .unwrap()
        );
    } else {
        for s in &report.steps {
            println!(
                "step {:>2} [{}] {} {}",
                s.index,
                s.rule,
                if s.ok { "ok  " } else { "FAIL" },
                if s.ok { "" } else { s.message.as_str() }
            );
        }
        println!("outline: {}", if report.passed() { "all steps pass" } else { "FAILED" });
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn parse_tuple_list(text: &str) -> CliResult<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for part in text.split(';') {
        let clean = part.trim().trim_start_matches('(').trim_end_matches(')');
        if clean.is_empty() {
            continue;
        }
        let tuple: Result<Vec<usize>, _> =
            clean.split(',').map(|x| x.trim().parse::<usize>()).collect();
        out.push(tuple.map_err(|e| CliError::new(2, format!("bad tuple `{part}`: {e}")))?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn build_examples(
    name: Option<&str>,
    all: bool,
    group: Option<&str>,
    subgroup: Option<&str>,
    n: Option<usize>,
    marked: Option<&str>,
    rounds: Option<usize>,
    theta: Option<f64>,
    matrix: Option<&str>,
    cfg: &Config,
) -> CliResult<Vec<CaseStudy>> {
    let err = |e: casestudies::CaseStudyError| CliError::new(3, e.to_string());
    if all || name.is_none() {
        return casestudies::default_suite(cfg).map_err(err);
    }
    let one = match name.unwrap() {
        "hsp" => {
            let moduli: Vec<usize> = group
                .unwrap_or("2,2")
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::new(2, format!("bad group: {e}")))?;
            let g = AbelianGroup::new(moduli);
            let h = match subgroup {
                Some(text) => {
                    let gens = parse_tuple_list(text)?
                        .iter()
                        .map(|t| g.encode(t))
                        .collect::<Vec<_>>();
                    g.generate(&gens)
                }
                None => g.trivial_subgroup(),
            };
            let cs = casestudies::hsp(&g, &h).map_err(err)?;
            let perp = h.orthogonal_subgroup();
            println!(
                "H has order {}; H-perp = {:?} (order {})",
                h.order(),
                perp.elements(),
                perp.order()
            );
            let dist = casestudies::hsp_distribution(&cs, &g, cfg).map_err(err)?;
            for (gi, p) in dist.iter().enumerate() {
                if *p > 1e-12 {
                    println!("Pr({:?}) = {:.6}", g.decode(gi), p);
                }
            }
            cs
        }
        "grover" => {
            let size = n.unwrap_or(4);
            let mut f = vec![false; size];
            for idx in marked
                .unwrap_or("3")
                .split(',')
                .map(|x| x.trim().parse::<usize>())
            {
                let idx = idx.map_err(|e| CliError::new(2, format!("bad marked index: {e}")))?;
                if idx >= size {
                    return Err(CliError::new(2, format!("marked index {idx} out of range")));
                }
                f[idx] = true;
            }
            casestudies::grover(size, &f, rounds.unwrap_or(1)).map_err(err)?
        }
        "qpe" => casestudies::qpe(n.unwrap_or(4), 2, theta.unwrap_or(0.25), cfg).map_err(err)?,
        "qft" => casestudies::qft_circuit(n.unwrap_or(3)).map_err(err)?,
        "rev" => {
            let dims = vec![2; n.unwrap_or(3)];
            casestudies::rev_circuit(&dims).map_err(err)?
        }
        "hlf" => {
            let rows = match matrix {
                Some(text) => parse_tuple_list(text)?
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v as u8).collect())
                    .collect(),
                None => vec![vec![1, 1], vec![1, 0]],
            };
            casestudies::hlf(&rows).map_err(err)?
        }
        "hhl" => casestudies::hhl(&casestudies::HhlParams::default_small()).map_err(err)?,
        "parah" => casestudies::para_hadamard(n.unwrap_or(3)).map_err(err)?,
        other => return Err(CliError::new(2, format!("unknown example `{other}`"))),
    };
    Ok(vec![one])
}

fn run_suite(suite: Vec<CaseStudy>, jobs: usize, cfg: &Config, as_json: bool) -> CliResult<u8> {
    let jobs = jobs.max(1);
    let results: Vec<(String, Result<bool, String>)> = std::thread::scope(|scope| {
        let chunks: Vec<Vec<CaseStudy>> = {
            let mut parts: Vec<Vec<CaseStudy>> = (0..jobs).map(|_| Vec::new()).collect();
            for (i, cs) in suite.into_iter().enumerate() {
                parts[i % jobs].push(cs);
            }
            parts
        };
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|cs| {
                            let name = cs.name.clone();
                            let outcome = cs
                                .check(cfg)
                                .map(|list| list.iter().all(|(_, v)| v.is_valid()))
                                .map_err(|e| e.to_string());
                            (name, outcome)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut ok = 0usize;
    let mut rows = Vec::new();
    for (name, outcome) in &results {
        match outcome {
            Ok(true) => {
                ok += 1;
                rows.push(json!({"name": name, "status": "pass"}));
                if !as_json {
                    println!("PASS {name}");
                }
            }
            Ok(false) => {
                rows.push(json!({"name": name, "status": "invalid"}));
                if !as_json {
                    println!("FAIL {name}: some triple is invalid");
                }
            }
            Err(e) => {
                rows.push(json!({"name": name, "status": "error", "message": e}));
                if !as_json {
                    println!("FAIL {name}: {e}");
                }
            }
        }
    }
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({"passed": ok, "total": results.len(), "cases": rows}))
                .unwrap()
        );
    } else {
        println!("examples: {ok}/{} pass", results.len());
    }
    Ok(if ok == results.len() { 0 } else { 1 })
}

fn cmd_rules_selftest(
    trials: u64,
    counterexample_out: Option<&str>,
    jobs: usize,
    cfg: &Config,
    as_json: bool,
) -> CliResult<u8> {
    let jobs = jobs.max(1);
    let results: Vec<Result<qwv_core::hoare::FuzzReport, HoareError>> =
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<_>> = {
                let mut parts: Vec<Vec<_>> = (0..jobs).map(|_| Vec::new()).collect();
                for (i, pair) in ALL_RULES.iter().enumerate() {
                    parts[i % jobs].push(*pair);
                }
                parts
            };
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(rule, _)| soundness_fuzz(rule, trials, cfg.seed, cfg))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for outcome in results {
        match outcome {
            Ok(r) => {
                rows.push(json!({
                    "rule": r.rule, "trials": r.trials, "passes": r.passes,
                    "min_slack": if r.min_slack.is_finite() { Some(r.min_slack) } else { None },
                }));
                if !as_json {
                    println!(
                        "{:10} {:>4}/{:<4} min slack {:+.2e}",
                        r.rule, r.passes, r.trials, r.min_slack
                    );
                }
            }
            Err(e) => {
                let detail = e.to_string();
                if !as_json {
                    println!("COUNTEREXAMPLE: {detail}");
                }
                failures.push(detail);
            }
        }
    }
    if let (Some(path), false) = (counterexample_out, failures.is_empty()) {
        let doc = json!({"seed": cfg.seed, "counterexamples": failures});
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())
            .map_err(|e| io_err(e, path))?;
    }
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(
                &json!({"counterexamples": failures, "rules": rows, "seed": cfg.seed})
            )
            .unwrap()
        );
    } else {
        println!(
            "rules-selftest: {} rules, {} counterexamples (seed {})",
            ALL_RULES.len(),
            failures.len(),
            cfg.seed
        );
    }
    Ok(if failures.is_empty() { 0 } else { 1 })
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    let cfg = build_config(&cli.opts);
    match &cli.command {
        Command::Run { program, input } => cmd_run(program, input.as_deref(), &cli.opts, &cfg),
        Command::Check { program, spec } => cmd_check(program, spec, &cli.opts, &cfg),
        Command::Outline { program, outline } => cmd_outline(program, outline, &cli.opts, &cfg),
        Command::Examples { name, all, group, subgroup, n, marked, rounds, theta, matrix } => {
            let suite = build_examples(
                name.as_deref(),
                *all,
                group.as_deref(),
                subgroup.as_deref(),
                *n,
                marked.as_deref(),
                *rounds,
                *theta,
                matrix.as_deref(),
                &cfg,
            )?;
            run_suite(suite, cli.opts.jobs, &cfg, cli.opts.json)
        }
        Command::RulesSelftest { trials, counterexample_out } => cmd_rules_selftest(
            *trials,
            counterexample_out.as_deref(),
            cli.opts.jobs,
            &cfg,
            cli.opts.json,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
