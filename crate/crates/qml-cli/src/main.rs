//! `qml` — command line front end: typecheck, evaluate, normalise,
//! compare and replay programs.
//!
//! Exit codes: 0 for success (including an `EQUIV` verdict), 1 for a
//! rejected program or a `DISTINCT` verdict, 2 for usage, I/O and syntax
//! errors.  Results go to stdout, errors to stderr.

use std::io::Read as _;

use clap::{Parser, Subcommand};
use qml_core::equations::parse_derivation;
use qml_core::normalizer::quote_classical;
use qml_core::parser::{load_program, SpanNode};
use qml_core::pretty::{format_amp_display, print_term};
use qml_core::semantics::{ctx_values, vec_inner};
use qml_core::typecheck::TypeError;
use qml_core::{
    equiv, eval_classical, eval_quantum, infer, infer_classical, inner_product, nf, nf_classical,
    Amplitude, Context, IpResult, Term, DEFAULT_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "qml",
    version,
    about = "Tools for the QML quantum programming language"
)]
struct Cli {
    /// Numeric tolerance for orthogonality, normalisation and comparison
    /// side conditions.  Overrides the QML_TOL environment variable;
    /// defaults to 1e-9.
    #[arg(long, global = true, value_name = "EPS")]
    tol: Option<f64>,

    /// Print results as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Typecheck a program (strict isometry discipline by default).
    Check {
        /// Program file, or `-` for standard input.
        file: String,
        /// Check the plain discipline instead (any well-formed linear map).
        #[arg(long, conflicts_with = "classical")]
        no_strict: bool,
        /// Check the classical fragment (no superpositions or phases).
        #[arg(long)]
        classical: bool,
    },
    /// Print the matrix a program denotes, one output row per line.
    Eval {
        /// Program file, or `-` for standard input.
        file: String,
        /// Evaluate classically and print an input/output table instead.
        #[arg(long)]
        classical: bool,
    },
    /// Print the canonical normal form of a program.
    Nf {
        /// Program file, or `-` for standard input.
        file: String,
        /// Normalise within the classical fragment.
        #[arg(long)]
        classical: bool,
    },
    /// Decide whether two programs over the same declared context denote
    /// the same matrix: prints EQUIV (exit 0) or DISTINCT (exit 1)
    /// followed by both normal forms.
    Equiv {
        /// Left program file, or `-` for standard input.
        left: String,
        /// Right program file.
        right: String,
    },
    /// Inner product of two closed programs of the same type.
    Ip {
        /// Left program file, or `-` for standard input.
        left: String,
        /// Right program file.
        right: String,
    },
    /// Replay a rewrite derivation script and confirm its end term.
    Derive {
        /// Script file, or `-` for standard input.
        file: String,
    },
}

/// A failed run: usage problems (bad flags, unreadable files, syntax
/// errors) exit 2, rejected programs and failed replays exit 1.
enum Failure {
    Usage(String),
    Reject(String),
}

type Out = Result<i32, Failure>;

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Reject(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Out {
    let tol = tolerance(cli.tol)?;
    match &cli.cmd {
        Cmd::Check {
            file,
            no_strict,
            classical,
        } => check(cli, tol, file, *no_strict, *classical),
        Cmd::Eval { file, classical } => eval(cli, tol, file, *classical),
        Cmd::Nf { file, classical } => normal_form(cli, tol, file, *classical),
        Cmd::Equiv { left, right } => equivalence(cli, tol, left, right),
        Cmd::Ip { left, right } => inner(cli, tol, left, right),
        Cmd::Derive { file } => derive(cli, tol, file),
    }
}

fn tolerance(flag: Option<f64>) -> Result<f64, Failure> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var("QML_TOL") {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("QML_TOL is not a number: `{s}`")))?,
            Err(std::env::VarError::NotPresent) => DEFAULT_TOLERANCE,
            Err(e) => return Err(Failure::Usage(format!("QML_TOL: {e}"))),
        },
    };
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Failure::Usage(format!(
            "tolerance must be finite and positive, got {tol}"
        )));
    }
    Ok(tol)
}

fn read_source(path: &str) -> Result<String, Failure> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::Usage(format!("cannot read standard input: {e}")))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))
    }
}

fn load(path: &str) -> Result<(Context, Term, SpanNode), Failure> {
    let text = read_source(path)?;
    load_program(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))
}

/// Render a type error at the source location of the offending subterm.
fn reject(path: &str, spans: &SpanNode, e: &TypeError) -> Failure {
    let located = spans
        .at_path(&e.path)
        .map(|node| format!("{path}: {}: {}", node.span, e.kind))
        .unwrap_or_else(|| format!("{path}: {e}"));
    Failure::Reject(located)
}

/// Display formatting for term amplitudes: 12 significant digits, with
/// imaginary parts below the default tolerance dropped.
fn display_amp(k: Amplitude) -> String {
    format_amp_display(k, DEFAULT_TOLERANCE)
}

fn check(cli: &Cli, tol: f64, file: &str, no_strict: bool, classical: bool) -> Out {
    let (ctx, term, spans) = load(file)?;
    let discipline = if classical {
        "classical"
    } else if no_strict {
        "plain"
    } else {
        "strict"
    };
    let j = if classical {
        infer_classical(&ctx, &term, tol)
    } else {
        infer(&ctx, &term, !no_strict, tol)
    }
    .map_err(|e| reject(file, &spans, &e))?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "ok": true,
                "discipline": discipline,
                "context": ctx.to_string(),
                "type": j.ty.to_string(),
            })
        );
    } else {
        println!("ok: {}", j.ty);
    }
    Ok(0)
}

fn eval(cli: &Cli, tol: f64, file: &str, classical: bool) -> Out {
    let (ctx, term, spans) = load(file)?;
    if classical {
        let j = infer_classical(&ctx, &term, tol).map_err(|e| reject(file, &spans, &e))?;
        let table = eval_classical(&j);
        if cli.json {
            println!(
                "{}",
                serde_json::json!({
                    "context": ctx.to_string(),
                    "type": j.ty.to_string(),
                    "table": table,
                })
            );
        } else {
            for (i, &o) in table.iter().enumerate() {
                let vals = ctx_values(&ctx, i);
                let ins: Vec<String> = ctx
                    .entries()
                    .iter()
                    .zip(&vals)
                    .map(|((name, ty), &v)| format!("{name}={}", quote_classical(ty, v)))
                    .collect();
                let lhs = if ins.is_empty() {
                    "()".to_string()
                } else {
                    ins.join(" ")
                };
                println!("{lhs} -> {}", quote_classical(&j.ty, o));
            }
        }
        return Ok(0);
    }
    let j = infer(&ctx, &term, false, tol).map_err(|e| reject(file, &spans, &e))?;
    let m = eval_quantum(&j);
    if cli.json {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.out_dim())
            .map(|r| {
                (0..m.in_dim())
                    .map(|c| {
                        let k = m.entry(r, c);
                        [k.re, k.im]
                    })
                    .collect()
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({
                "in_type": m.in_ty.to_string(),
                "out_type": m.out_ty.to_string(),
                "matrix": rows,
            })
        );
    } else {
        for r in 0..m.out_dim() {
            let row: Vec<String> = (0..m.in_dim())
                .map(|c| format_amp_display(m.entry(r, c), tol).replace(' ', ""))
                .collect();
            println!("{}", row.join(" "));
        }
    }
    Ok(0)
}

fn normal_form(cli: &Cli, tol: f64, file: &str, classical: bool) -> Out {
    let (ctx, term, spans) = load(file)?;
    let n = if classical {
        nf_classical(&ctx, &term, tol)
    } else {
        nf(&ctx, &term, tol)
    }
    .map_err(|e| reject(file, &spans, &e))?;
    let display = print_term(&n, display_amp);
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "context": ctx.to_string(),
                "term": display,
                "exact": n.to_string(),
            })
        );
    } else {
        println!("{display}");
    }
    Ok(0)
}

fn equivalence(cli: &Cli, tol: f64, left: &str, right: &str) -> Out {
    let (lctx, lt, lspans) = load(left)?;
    let (rctx, rt, rspans) = load(right)?;
    if lctx != rctx {
        return Err(Failure::Usage(format!(
            "contexts differ: `{lctx}` in {left} vs `{rctx}` in {right}"
        )));
    }
    let lj = infer(&lctx, &lt, false, tol).map_err(|e| reject(left, &lspans, &e))?;
    let rj = infer(&rctx, &rt, false, tol).map_err(|e| reject(right, &rspans, &e))?;
    if lj.ty != rj.ty {
        return Err(Failure::Reject(format!(
            "types differ: {} in {left} vs {} in {right}",
            lj.ty, rj.ty
        )));
    }
    let same = equiv(&lctx, &lt, &rt, tol).map_err(|e| reject(left, &lspans, &e))?;
    let lnf = nf(&lctx, &lt, tol).map_err(|e| reject(left, &lspans, &e))?;
    let rnf = nf(&rctx, &rt, tol).map_err(|e| reject(right, &rspans, &e))?;
    let (lshow, rshow) = (print_term(&lnf, display_amp), print_term(&rnf, display_amp));
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "equivalent": same,
                "nf_left": lshow,
                "nf_right": rshow,
            })
        );
    } else {
        println!("{}", if same { "EQUIV" } else { "DISTINCT" });
        println!("nf left: {lshow}");
        println!("nf right: {rshow}");
    }
    Ok(if same { 0 } else { 1 })
}

fn inner(cli: &Cli, tol: f64, left: &str, right: &str) -> Out {
    let (lctx, lt, lspans) = load(left)?;
    let (rctx, rt, rspans) = load(right)?;
    if !lctx.is_empty() || !rctx.is_empty() {
        return Err(Failure::Usage(
            "ip needs closed programs (empty main contexts)".into(),
        ));
    }
    let lj = infer(&lctx, &lt, false, tol).map_err(|e| reject(left, &lspans, &e))?;
    let rj = infer(&rctx, &rt, false, tol).map_err(|e| reject(right, &rspans, &e))?;
    if lj.ty != rj.ty {
        return Err(Failure::Reject(format!(
            "types differ: {} in {left} vs {} in {right}",
            lj.ty, rj.ty
        )));
    }
    let (value, syntactic) = match inner_product(&lt, &rt) {
        IpResult::Known(k) => (k, true),
        IpResult::Unknown => {
            let lv = &eval_quantum(&lj).cols[0];
            let rv = &eval_quantum(&rj).cols[0];
            (vec_inner(lv, rv), false)
        }
    };
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "re": value.re,
                "im": value.im,
                "display": format_amp_display(value, tol),
                "syntactic": syntactic,
            })
        );
    } else {
        println!("{}", format_amp_display(value, tol));
    }
    Ok(0)
}

fn derive(cli: &Cli, tol: f64, file: &str) -> Out {
    let text = read_source(file)?;
    let script = parse_derivation(&text).map_err(|e| Failure::Usage(format!("{file}: {e}")))?;
    script
        .check(tol)
        .map_err(|e| Failure::Reject(format!("{file}: {e}")))?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({ "ok": true, "steps": script.steps.len() })
        );
    } else {
        println!("ok: {} steps", script.steps.len());
    }
    Ok(0)
}
