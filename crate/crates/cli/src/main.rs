//! `gcq`: check, evaluate, translate and draw graphical conjunctive queries.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gcq_core::axioms::{catalog, default_signature, find_axiom, verify_graphical, verify_semantic};
use gcq_core::ccq::{eval_ccq, parse_judgment, Judgment, ParsedJudgment};
use gcq_core::containment::{decide_equivalence_with_budget, decide_inclusion_with_budget, DEFAULT_BUDGET};
use gcq_core::cospan::term_to_cospan;
use gcq_core::gcq::{eval_gcq, parse_gcq, GcqTerm};
use gcq_core::random::model_sample;
use gcq_core::sigmodel::{load_model, load_signature, RelModel, Signature, Tuple};
use gcq_core::translate::{lambda, lambda_model, lambda_signature, theta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gcq", version, about = "Graphical conjunctive queries")]
struct Cli {
    /// Signature file (`{"R": [arity, coarity], ...}`); overrides any
    /// `signature:` header in the input files.
    #[arg(long, global = true)]
    sig: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide inclusion or equivalence of two queries.
    Check {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Inclusion)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Step limit for the morphism search.
        #[arg(long, default_value_t = DEFAULT_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
    },
    /// Evaluate a query in a finite model.
    Eval {
        query: PathBuf,
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Translate a judgment into a term or a term into a judgment.
    Translate {
        query: PathBuf,
        /// Compare both sides on random models.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the compiled cospan as Graphviz DOT.
    ExportDot { query: PathBuf },
    /// Check the axiom catalog semantically and through cospans.
    AxiomsVerify {
        /// Only these axioms; a `-rev` suffix swaps the sides.
        names: Vec<String>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Inclusion,
    Equivalence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

enum Query {
    Term(GcqTerm),
    Judgment(ParsedJudgment),
}

struct Loaded {
    sig: Signature,
    query: Query,
}

impl Loaded {
    fn judgment(j: &ParsedJudgment) -> Judgment {
        Judgment { context: j.left + j.right.unwrap_or(0), formula: j.formula.clone() }
    }

    /// The query as a term; judgments go through their translation.
    fn term(&self) -> Result<GcqTerm> {
        match &self.query {
            Query::Term(t) => Ok(t.clone()),
            Query::Judgment(j) => Ok(theta(&Self::judgment(j), &self.sig)?),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn signature_from(source: &str, base: &Path) -> Result<Signature> {
    let text = if source.starts_with('{') {
        source.to_string()
    } else {
        read(&base.parent().unwrap_or(Path::new(".")).join(source))?
    };
    load_signature(&text).with_context(|| format!("bad signature `{source}`"))
}

/// Reads a query file: an optional `signature:` line, `#` comments, then a
/// term or a judgment (anything containing `|-`).
fn load_query(path: &Path, flag: Option<&Signature>) -> Result<Loaded> {
    let text = read(path)?;
    let mut header = None;
    let mut body = String::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("signature:") {
            header = Some(rest.trim().to_string());
        } else if !trimmed.starts_with('#') {
            body.push_str(line);
            body.push('\n');
        }
    }
    let sig = match (flag, header) {
        (Some(s), _) => s.clone(),
        (None, Some(h)) => signature_from(&h, path)?,
        (None, None) => Signature::new(),
    };
    let where_ = || format!("in {}", path.display());
    let query = if body.contains("|-") {
        Query::Judgment(parse_judgment(body.trim(), &sig).with_context(where_)?)
    } else {
        Query::Term(parse_gcq(body.trim(), &sig).with_context(where_)?)
    };
    Ok(Loaded { sig, query })
}

fn names(model: &RelModel, t: &[u32]) -> Value {
    json!(model.tuple_names(t))
}

fn eval_rows(q: &Loaded, model: &RelModel) -> Result<Value> {
    match &q.query {
        Query::Term(t) => Ok(eval_gcq(t, model)?.to_json(model)),
        Query::Judgment(j) => {
            let rows = eval_ccq(&Loaded::judgment(j), model)?;
            let split = j.left;
            Ok(Value::Array(
                rows.iter().map(|t| json!([names(model, &t[..split]), names(model, &t[split..])])).collect(),
            ))
        }
    }
}

fn cmd_check(a: &Loaded, b: &Loaded, mode: Mode, format: Format, budget: u64) -> Result<(bool, String)> {
    let (ta, tb) = (a.term()?, b.term()?);
    let (holds, verdict) = match mode {
        Mode::Inclusion => {
            let v = decide_inclusion_with_budget(&ta, &tb, Some(budget))?;
            (v.holds, v.to_json())
        }
        Mode::Equivalence => {
            let v = decide_equivalence_with_budget(&ta, &tb, Some(budget))?;
            (v.holds, v.to_json())
        }
    };
    let out = match format {
        Format::Json => serde_json::to_string_pretty(&verdict)? + "\n",
        Format::Text => format!("{}\n{verdict}\n", if holds { "holds" } else { "fails" }),
    };
    Ok((holds, out))
}

fn cmd_eval(q: &Loaded, model_path: &Path, format: Format) -> Result<String> {
    let model = load_model(&read(model_path)?, &q.sig).with_context(|| format!("in {}", model_path.display()))?;
    let rows = eval_rows(q, &model)?;
    Ok(match format {
        Format::Json => format!("{rows}\n"),
        Format::Text => rows.as_array().into_iter().flatten().map(|r| format!("{} -> {}\n", r[0], r[1])).collect(),
    })
}

/// Compares a query with its translation on random models; returns the
/// index of the first disagreeing model.
fn spot_check(q: &Loaded, trials: usize, seed: u64) -> Result<Option<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = model_sample(&q.sig, trials, 3, &mut rng);
    for (k, m) in models.iter().enumerate() {
        let agree = match &q.query {
            Query::Judgment(j) => {
                let direct = eval_ccq(&Loaded::judgment(j), m)?;
                let via: BTreeSet<Tuple> = eval_gcq(&q.term()?, m)?.pairs.into_iter().map(|(a, _)| a).collect();
                direct == via
            }
            Query::Term(t) => {
                let direct: BTreeSet<Tuple> =
                    eval_gcq(t, m)?.pairs.into_iter().map(|(a, b)| a.into_iter().chain(b).collect()).collect();
                direct == eval_ccq(&lambda(t).flatten(), &lambda_model(m))?
            }
        };
        if !agree {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn cmd_translate(q: &Loaded, verify: bool, trials: usize, seed: u64) -> Result<(bool, String)> {
    let text = match &q.query {
        Query::Judgment(_) => q.term()?.to_string(),
        Query::Term(t) => {
            let j = lambda(t);
            // the printed judgment must read back under the flattened signature
            parse_judgment(&j.to_string(), &lambda_signature(&q.sig))?;
            j.to_string()
        }
    };
    let mut ok = true;
    if verify {
        match spot_check(q, trials, seed)? {
            None => eprintln!("verified on {trials} models"),
            Some(k) => {
                eprintln!("translation disagrees on model {k} (seed {seed})");
                ok = false;
            }
        }
    }
    Ok((ok, text + "\n"))
}

fn cmd_axioms(
    sig: &Signature,
    names: &[String],
    trials: usize,
    seed: u64,
    budget: u64,
    format: Format,
) -> Result<(bool, String)> {
    let axioms = if names.is_empty() {
        catalog(sig)
    } else {
        names
            .iter()
            .map(|n| find_axiom(sig, n).with_context(|| format!("unknown axiom `{n}`")))
            .collect::<Result<_>>()?
    };
    let mut all = true;
    let mut out = String::new();
    let mut reports = Vec::new();
    for ax in &axioms {
        let semantic = verify_semantic(ax, sig, trials, 3, seed)?;
        let graphical = verify_graphical(ax, Some(budget))?;
        let pass = semantic.holds && graphical;
        all &= pass;
        let report = json!({ "axiom": ax.name, "pass": pass, "semantic": semantic.to_json(), "graphical": graphical });
        if format == Format::Text {
            if pass {
                writeln!(out, "PASS {}", ax.name)?;
            } else {
                writeln!(
                    out,
                    "FAIL {} {}",
                    ax.name,
                    json!({ "semantic": report["semantic"], "graphical": graphical })
                )?;
            }
        }
        reports.push(report);
    }
    if format == Format::Json {
        out = serde_json::to_string_pretty(&reports)? + "\n";
    }
    Ok((all, out))
}

fn run(cli: Cli) -> Result<(bool, String)> {
    let flag = match &cli.sig {
        Some(p) => Some(load_signature(&read(p)?).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    match cli.cmd {
        Cmd::Check { a, b, mode, format, budget } => {
            let (a, b) = (load_query(&a, flag.as_ref())?, load_query(&b, flag.as_ref())?);
            cmd_check(&a, &b, mode, format, budget)
        }
        Cmd::Eval { query, model, format } => {
            let q = load_query(&query, flag.as_ref())?;
            Ok((true, cmd_eval(&q, &model, format)?))
        }
        Cmd::Translate { query, verify, trials, seed } => {
            let q = load_query(&query, flag.as_ref())?;
            cmd_translate(&q, verify, trials as usize, seed)
        }
        Cmd::ExportDot { query } => {
            let q = load_query(&query, flag.as_ref())?;
            Ok((true, term_to_cospan(&q.term()?).to_dot()))
        }
        Cmd::AxiomsVerify { names, trials, seed, budget, format } => {
            let sig = flag.unwrap_or_else(default_signature);
            if sig.is_empty() {
                bail!("the signature has no symbols");
            }
            cmd_axioms(&sig, &names, trials as usize, seed, budget, format)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((holds, out)) => {
            print!("{out}");
            ExitCode::from(if holds { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
