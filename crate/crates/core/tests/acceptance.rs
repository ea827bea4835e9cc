//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gcq_core::axioms::{
    catalog, default_signature, encode_cp, find_axiom, spider_derivation, verify_graphical, verify_semantic, CpTerm,
    StepRelation,
};
use gcq_core::ccq::{eval_ccq, parse_ccq, satisfies, Judgment};
use gcq_core::containment::{decide_inclusion, hypergraph_as_model, natural_model_check, span_semantics};
use gcq_core::cospan::{cospan_to_term, is_isomorphic_cospan, term_to_cospan};
use gcq_core::gcq::{eval_gcq, GcqTerm};
use gcq_core::hypergraph::{find_morphisms, validate_morphism, HgError, Hypergraph, SearchOptions};
use gcq_core::random::{all_models, model_sample, random_cospan, random_hypergraph, FormulaGen, TermGen};
use gcq_core::sigmodel::{RelModel, Signature};
use gcq_core::translate::{lambda, lambda_model, theta};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x6371;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

/// Largest `n + m` over all subterms.
fn max_width(t: &GcqTerm) -> usize {
    let own = t.sort().n + t.sort().m;
    match t {
        GcqTerm::Seq(a, b, _) | GcqTerm::Tensor(a, b, _) => own.max(max_width(a)).max(max_width(b)),
        _ => own,
    }
}

fn intro_check(c: &GcqTerm, d: &GcqTerm) -> Result<(), String> {
    let fwd = decide_inclusion(c, d).map_err(|e| e.to_string())?;
    ensure(fwd.holds, || "phi <= psi rejected".into())?;
    let w = fwd.witness.ok_or("no witness")?;
    let (cc, dc) = (term_to_cospan(c), term_to_cospan(d));
    ensure(validate_morphism(&w, &dc.apex, &cc.apex).unwrap_or(false), || "witness is not a morphism".into())?;
    let legs_ok = dc.iota.iter().zip(&cc.iota).all(|(&a, &b)| w.vmap[a] == b)
        && dc.omega.iter().zip(&cc.omega).all(|(&a, &b)| w.vmap[a] == b);
    ensure(legs_ok, || "witness moves the interface".into())?;

    let back = decide_inclusion(d, c).map_err(|e| e.to_string())?;
    ensure(!back.holds, || "psi <= phi accepted".into())?;
    let cm = back.countermodel.ok_or("no countermodel")?;
    ensure(cm.model.size() == dc.apex.vcount, || "countermodel is not the natural model".into())?;
    let in_d = eval_gcq(d, &cm.model).map_err(|e| e.to_string())?.contains(&cm.input, &cm.output);
    let in_c = eval_gcq(c, &cm.model).map_err(|e| e.to_string())?.contains(&cm.input, &cm.output);
    ensure(in_d && !in_c, || "countermodel does not separate".into())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sig = Signature::from_symbols([("R", 2, 0)]).unwrap();
    let phi = parse_ccq("2 |- exists z0. (x0 = x1) /\\ R(x0, z0)", &sig).map_err(|e| e.to_string())?;
    let psi = parse_ccq("2 |- exists z0. exists z1. R(x0, z0) /\\ R(x1, z0) /\\ R(x0, z1) /\\ R(x1, z1)", &sig)
        .map_err(|e| e.to_string())?;
    let tp = theta(&phi, &sig).map_err(|e| e.to_string())?;
    let tq = theta(&psi, &sig).map_err(|e| e.to_string())?;
    intro_check(&tp, &tq).map_err(|e| format!("translated: {e}"))?;

    let (start_term, steps) = spider_derivation();
    let last = &steps.last().unwrap().term;
    intro_check(last, &start_term).map_err(|e| format!("R:(1,1) diagrams: {e}"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_millis(100))?;
    Ok(format!("witness and countermodel verified for R:(2,0) and R:(1,1) in {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let sig = default_signature();
    let all = catalog(&sig);
    for (k, ax) in all.iter().enumerate() {
        let rep = verify_semantic(ax, &sig, 100, 3, SEED + k as u64).map_err(|e| e.to_string())?;
        ensure(rep.holds, || format!("{} fails semantically", ax.name))?;
        ensure(verify_graphical(ax, None).map_err(|e| e.to_string())?, || format!("{} fails graphically", ax.name))?;
    }
    let mut reversed = vec!["MC".to_string(), "UC".to_string()];
    let mut skipped = Vec::new();
    for (name, sort) in sig.iter() {
        reversed.push(format!("L1[{name}]"));
        if sort.m > 0 {
            reversed.push(format!("L2[{name}]"));
        } else {
            skipped.push(format!("L2[{name}]"));
        }
    }
    for name in &reversed {
        let ax = find_axiom(&sig, name).unwrap().reversed();
        let rep = verify_semantic(&ax, &sig, 100, 3, SEED).map_err(|e| e.to_string())?;
        ensure(!rep.holds && rep.countermodel.is_some(), || format!("{} holds", ax.name))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{} laws hold both ways, {} reversed laws refuted ({} tight at coarity 0: {}) in {elapsed:.2?}",
        all.len(),
        reversed.len(),
        skipped.len(),
        skipped.join(", ")
    ))
}

fn random_pair_corpus(count: usize, rng: &mut ChaCha8Rng) -> Vec<(GcqTerm, GcqTerm)> {
    let sig = default_signature();
    let gen = TermGen { sig: &sig, max_width: 2 };
    let ok = |t: &GcqTerm| t.leaves() <= 10 && max_width(t) <= 4 && term_to_cospan(t).apex.vcount <= 8;
    let mut out = Vec::new();
    while out.len() < count {
        let (n, m) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let c = gen.term(n, m, rng.gen_range(2..=7), rng);
        if !ok(&c) {
            continue;
        }
        let d = match rng.gen_range(0..4) {
            0 => gen.term(n, m, rng.gen_range(1..=6), rng),
            1 => gen.mutate(&gen.mutate(&c, rng), rng),
            _ => gen.mutate(&c, rng),
        };
        if !ok(&d) {
            continue;
        }
        if rng.gen_bool(0.5) {
            out.push((c, d));
        } else {
            out.push((d, c));
        }
    }
    out
}

fn criterion_3(corpus: &[(GcqTerm, GcqTerm)]) -> Outcome {
    let start = Instant::now();
    let mut holds = 0;
    for (c, d) in corpus {
        let decided = decide_inclusion(c, d).map_err(|e| e.to_string())?.holds;
        let oracle = natural_model_check(c, d).map_err(|e| e.to_string())?;
        ensure(decided == oracle, || format!("disagreement on {c}  vs  {d}"))?;
        holds += usize::from(decided);
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{} pairs, {holds} included, 0 disagreements in {elapsed:.2?}", corpus.len()))
}

fn criterion_4(corpus: &[(GcqTerm, GcqTerm)]) -> Outcome {
    let start = Instant::now();
    let sig = default_signature();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut checked = 0;
    for (c, d) in corpus {
        if !decide_inclusion(c, d).map_err(|e| e.to_string())?.holds {
            continue;
        }
        for model in model_sample(&sig, 50, 3, &mut rng) {
            let ec = eval_gcq(c, &model).map_err(|e| e.to_string())?;
            let ed = eval_gcq(d, &model).map_err(|e| e.to_string())?;
            ensure(ec.is_subset(&ed), || format!("violation for {c} <= {d}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} pair-model checks, 0 violations in {:.2?}", start.elapsed()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let sig = Signature::from_symbols([("R", 2, 0)]).unwrap();
    let models: Vec<RelModel> = (0..=3).flat_map(|k| all_models(&sig, k)).collect();
    let gen = FormulaGen { sig: &sig, max_vars: 5 };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let judgments: Vec<Judgment> = (0..100)
        .map(|_| {
            let ctx = rng.gen_range(0..=3);
            gen.judgment(ctx, rng.gen_range(1..=5), &mut rng)
        })
        .collect();
    for j in &judgments {
        let t = theta(j, &sig).map_err(|e| e.to_string())?;
        let back = lambda(&t).flatten();
        for m in &models {
            let direct = eval_ccq(j, m).map_err(|e| e.to_string())?;
            let via_theta: BTreeSet<Vec<u32>> =
                eval_gcq(&t, m).map_err(|e| e.to_string())?.pairs.into_iter().map(|(a, _)| a).collect();
            ensure(direct == via_theta, || format!("theta changes the meaning of {j}"))?;
            let via_lambda = eval_ccq(&back, &lambda_model(m)).map_err(|e| e.to_string())?;
            ensure(direct == via_lambda, || format!("lambda-theta changes the meaning of {j}"))?;
        }
        // Tarskian cross-check on the 2-element models.
        for m in models.iter().filter(|m| m.size() == 2) {
            let direct = eval_ccq(j, m).map_err(|e| e.to_string())?;
            let brute: BTreeSet<Vec<u32>> =
                gcq_core::sigmodel::all_tuples(j.context, 2).filter(|env| satisfies(&j.formula, env, m)).collect();
            ensure(direct == brute, || format!("evaluator disagrees with satisfaction on {j}"))?;
        }
    }
    Ok(format!("{} judgments x {} models agree in {:.2?}", judgments.len(), models.len(), start.elapsed()))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let sig = default_signature();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
        let c = random_cospan(&sig, n, m, 5, 4, &mut rng);
        let back = term_to_cospan(&cospan_to_term(&c));
        ensure(is_isomorphic_cospan(&back, &c).map_err(|e| e.to_string())?, || {
            format!("round trip fails on {}", serde_json::to_string(&c).unwrap())
        })?;
    }
    let gen = TermGen { sig: &sig, max_width: 3 };
    for _ in 0..100 {
        let (n, k, m) = (rng.gen_range(0..=3), rng.gen_range(0..=3), rng.gen_range(0..=3));
        let a = gen.term(n, k, 4, &mut rng);
        let b = gen.term(k, m, 4, &mut rng);
        let seq = term_to_cospan(&a.clone().then(b.clone()));
        let glued = term_to_cospan(&a).compose(&term_to_cospan(&b)).map_err(|e| e.to_string())?;
        ensure(is_isomorphic_cospan(&seq, &glued).map_err(|e| e.to_string())?, || {
            format!("composition not preserved: {a} ; {b}")
        })?;
        let par = term_to_cospan(&a.clone().par(b.clone()));
        let side = term_to_cospan(&a).tensor(&term_to_cospan(&b));
        ensure(is_isomorphic_cospan(&par, &side).map_err(|e| e.to_string())?, || {
            format!("tensor not preserved: {a} (+) {b}")
        })?;
    }
    Ok(format!("100 round trips and 100 functoriality pairs in {:.2?}", start.elapsed()))
}

fn criterion_7() -> Outcome {
    let (start_term, steps) = spider_derivation();
    let mut prev = start_term.clone();
    for (k, step) in steps.iter().enumerate() {
        let below = decide_inclusion(&step.term, &prev).map_err(|e| e.to_string())?.holds;
        ensure(below, || format!("step {} ({}) is not an inclusion", k + 1, step.law))?;
        if step.relation == StepRelation::Equal {
            let above = decide_inclusion(&prev, &step.term).map_err(|e| e.to_string())?.holds;
            ensure(above, || format!("step {} ({}) is not an equality", k + 1, step.law))?;
        }
        prev = step.term.clone();
    }
    ensure(decide_inclusion(&prev, &start_term).map_err(|e| e.to_string())?.holds, || {
        "end-to-end inclusion fails".into()
    })?;
    let laws: Vec<&str> = steps.iter().map(|s| s.law).collect();
    Ok(format!("{} steps confirmed ({}) and end-to-end inclusion holds", steps.len(), laws.join(", ")))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let sig = default_signature();
    let gen = TermGen { sig: &sig, max_width: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut pairs = 0;
    while pairs < 100 {
        let (n, m) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let t = gen.term(n, m, rng.gen_range(1..=6), &mut rng);
        if term_to_cospan(&t).apex.vcount > 6 || max_width(&t) > 4 {
            continue;
        }
        let g = random_hypergraph(&sig, 4, 5, &mut rng);
        let support: BTreeSet<(Vec<u32>, Vec<u32>)> =
            span_semantics(&t, &g).into_iter().filter(|(_, k)| *k > 0).map(|(p, _)| p).collect();
        let model = hypergraph_as_model(&g, &sig).map_err(|e| e.to_string())?;
        let rel = eval_gcq(&t, &model).map_err(|e| e.to_string())?;
        ensure(support == rel.pairs, || format!("support differs for {t}"))?;
        pairs += 1;
    }
    Ok(format!("{pairs} (term, graph) pairs agree in {:.2?}", start.elapsed()))
}

type BinRel = BTreeSet<(u32, u32)>;

fn as_bin(t: &GcqTerm, m: &RelModel) -> Result<BinRel, String> {
    Ok(eval_gcq(t, m).map_err(|e| e.to_string())?.pairs.into_iter().map(|(a, b)| (a[0], b[0])).collect())
}

fn random_cp(depth: usize, rng: &mut ChaCha8Rng) -> CpTerm {
    if depth == 0 || rng.gen_bool(0.3) {
        return [CpTerm::rel("R"), CpTerm::rel("S"), CpTerm::Id, CpTerm::Top].choose(rng).unwrap().clone();
    }
    match rng.gen_range(0..3) {
        0 => CpTerm::meet(random_cp(depth - 1, rng), random_cp(depth - 1, rng)),
        1 => CpTerm::comp(random_cp(depth - 1, rng), random_cp(depth - 1, rng)),
        _ => CpTerm::converse(random_cp(depth - 1, rng)),
    }
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let sig = Signature::from_symbols([("R", 1, 1), ("S", 1, 1)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let models = model_sample(&sig, 100, 3, &mut rng);
    let terms: Vec<CpTerm> = (0..20).map(|_| random_cp(3, &mut rng)).collect();
    let mut checks = 0;
    for m in &models {
        let k = m.size() as u32;
        let full: BinRel = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).collect();
        ensure(as_bin(&encode_cp(&CpTerm::Top), m)? == full, || "Top is not the full relation".into())?;
        for t in &terms {
            let enc = as_bin(&encode_cp(t), m)?;
            let expect: BinRel = match t {
                CpTerm::Rel(name) => m.rho(name).into_iter().flatten().map(|(a, b)| (a[0], b[0])).collect(),
                CpTerm::Id => (0..k).map(|a| (a, a)).collect(),
                CpTerm::Top => full.clone(),
                CpTerm::Meet(a, b) => {
                    let (ra, rb) = (as_bin(&encode_cp(a), m)?, as_bin(&encode_cp(b), m)?);
                    ra.intersection(&rb).copied().collect()
                }
                CpTerm::Comp(a, b) => {
                    let (ra, rb) = (as_bin(&encode_cp(a), m)?, as_bin(&encode_cp(b), m)?);
                    let mut out = BinRel::new();
                    for &(x, y) in &ra {
                        for &(y2, z) in &rb {
                            if y == y2 {
                                out.insert((x, z));
                            }
                        }
                    }
                    out
                }
                CpTerm::Converse(a) => as_bin(&encode_cp(a), m)?.into_iter().map(|(x, y)| (y, x)).collect(),
            };
            ensure(enc == expect, || format!("encoding identity fails on {t:?}"))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} identity checks over {} models in {:.2?}", models.len(), start.elapsed()))
}

fn clique(k: usize) -> Hypergraph {
    let mut g = Hypergraph::discrete(k);
    for a in 0..k {
        for b in 0..k {
            if a != b {
                g.add_edge("E", vec![a], vec![b]);
            }
        }
    }
    g
}

const STRESS_BUDGET: u64 = 1_500_000;

fn stress() -> Outcome {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for k in 3..=10 {
        let start = Instant::now();
        let opts = SearchOptions { budget: Some(STRESS_BUDGET), ..SearchOptions::first() };
        let (found, steps) = match find_morphisms(&clique(k), &clique(k - 1), &BTreeMap::new(), opts) {
            Ok(out) => (Some(!out.morphisms.is_empty()), out.steps),
            Err(HgError::BudgetExhausted(s)) => (None, s),
            Err(e) => return Err(e.to_string()),
        };
        let elapsed = start.elapsed();
        if found == Some(true) {
            failures.push(format!("K{k} -> K{} found a morphism", k - 1));
        }
        if let Err(e) = within(elapsed, Duration::from_secs(5)) {
            failures.push(format!("K{k} {e}"));
        }
        let tag = if found.is_none() { " budget exhausted" } else { "" };
        rows.push(format!("K{k}->K{}: {steps} steps {elapsed:.2?}{tag}", k - 1));
    }
    let table = rows.join("; ");
    if failures.is_empty() {
        Ok(table)
    } else {
        Err(format!("{}; {table}", failures.join("; ")))
    }
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let corpus = random_pair_corpus(300, &mut rng);
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 intro example", Box::new(criterion_1)),
        ("2 axiom suite", Box::new(criterion_2)),
        ("3 oracle agreement", Box::new(|| criterion_3(&corpus))),
        ("4 soundness sweep", Box::new(|| criterion_4(&corpus))),
        ("5 translation fidelity", Box::new(criterion_5)),
        ("6 compiler round trips", Box::new(criterion_6)),
        ("7 derivation replay", Box::new(criterion_7)),
        ("8 span/rel bridge", Box::new(criterion_8)),
        ("9 relation algebra encoding", Box::new(criterion_9)),
        ("stress clique search", Box::new(stress)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
