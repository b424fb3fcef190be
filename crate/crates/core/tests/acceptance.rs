//! Acceptance checks. Every test writes one `PASS` or `FAIL` line straight
//! to stderr, which the test harness does not capture, so the lines show up
//! in a plain `cargo test` run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use tsmh::lm::logsumexp;
use tsmh::logic::{eval_sentence, eval_template, ConstraintSet, Formula};
use tsmh::partition::{CategoryPartition, CategorySpec};
use tsmh::proposal::tsmh::Path as MovePath;
use tsmh::proposal::{enumerate_templates, fill_template, CgmhProposer, MoveDetail, TsmhProposer};
use tsmh::report::{self, InputLine};
use tsmh::sampler::exact::all_sentences;
use tsmh::sampler::{exact_distribution, total_variation, Chain, Method};
use tsmh::target::{FitCache, Target};
use tsmh::task::{validate_config, Task, TaskSpec};
use tsmh::template::{instantiate, Slot};
use tsmh::vocab::{Sentence, TokenId, Vocabulary};

fn report_line(name: &str, pass: bool, detail: impl Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {name}: {detail}");
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

struct Toy {
    _dir: TempDir,
    task: Task,
    target: Target,
}

/// An interrogative task with no keywords: categories QWH, AUX and OTH.
fn toy(words: &[&str], qwh: &[&str], aux: &[&str], corpus: &[&str], k: usize, max_len: usize) -> Toy {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("vocab.txt"), words.join("\n") + "\n").unwrap();
    fs::write(p.join("corpus.txt"), corpus.join("\n") + "\n").unwrap();
    let cats = serde_json::json!({"categories": [
        {"name": "QWH", "members": qwh},
        {"name": "AUX", "members": aux},
        {"name": "OTH", "residual": true},
    ]});
    fs::write(p.join("categories.json"), cats.to_string()).unwrap();
    let config = format!(
        r#"
[task]
kind = "interrogative"
vocab = "vocab.txt"
categories = "categories.json"
max_len = {max_len}
pad_token = "{pad}"

[chain]
k = {k}
beta = 0.2
seed = 1

[lm]
corpus = "corpus.txt"
order = 2
"#,
        pad = words[0]
    );
    let spec = TaskSpec::from_toml(&config, p).unwrap();
    spec.validate().unwrap();
    let task = Task::build(spec).unwrap();
    let target = task.prepare(&[]).unwrap().target;
    assert_eq!(target.partition.len(), 3);
    Toy { _dir: dir, task, target }
}

/// Three words, one per category: every fill is forced.
fn singleton_toy() -> Toy {
    toy(&["what", "is", "paris"], &["what"], &["is"], &["what is paris", "paris is"], 2, 4)
}

/// Two words in AUX and in OTH, one edit per move so every auxiliary fill
/// of a group can be enumerated.
fn pair_toy() -> Toy {
    toy(
        &["what", "is", "was", "paris", "france"],
        &["what"],
        &["is", "was"],
        &["what is paris", "paris was france", "what was france", "france is paris"],
        1,
        3,
    )
}

/// The bundled tiny vocabulary with three categories.
fn tiny_toy(k: usize) -> Toy {
    let words: Vec<String> = fs::read_to_string(repo("data/tiny/vocab.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let corpus: Vec<String> = fs::read_to_string(repo("data/tiny/corpus.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let w: Vec<&str> = words.iter().map(String::as_str).collect();
    let c: Vec<&str> = corpus.iter().map(String::as_str).collect();
    toy(&w, &["what"], &["is", "was"], &c, k, 4)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn ln_binom(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Every way to fill the placeholders of `slots`.
fn all_fills(target: &Target, slots: &[Slot]) -> Vec<Vec<TokenId>> {
    let mut out = vec![Vec::new()];
    for s in slots {
        if let Slot::Placeholder(c) = *s {
            let members = target.partition.members(c);
            out = out
                .into_iter()
                .flat_map(|f| {
                    members.iter().map(move |&w| {
                        let mut g = f.clone();
                        g.push(w);
                        g
                    })
                })
                .collect();
        }
    }
    out
}

#[derive(Clone)]
struct Draw {
    fill: Vec<TokenId>,
    sentence: Vec<TokenId>,
    log_p: f64,
    fit: f64,
}

fn draws(target: &Target, slots: &[Slot]) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    all_fills(target, slots)
        .into_iter()
        .map(|fill| {
            let (sentence, log_p) = fill_template(target, slots, Some(&fill), &mut rng).unwrap();
            assert_eq!(sentence, instantiate(slots, &fill));
            let fit = target.log_fit(&sentence).unwrap();
            Draw {
                fill,
                sentence,
                log_p,
                fit,
            }
        })
        .filter(|d| d.log_p > f64::NEG_INFINITY)
        .collect()
}

/// Mixed-radix counter over `sizes`.
fn product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    assert!(total <= 1 << 16, "auxiliary fill space too large: {total}");
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; sizes.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for (i, s) in idx.iter_mut().zip(sizes) {
            *i += 1;
            if *i < *s {
                break;
            }
            *i = 0;
        }
    }
    out
}

/// Group log-probabilities from their errors alone.
fn group_weights(errors: &[u32], ln_beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = errors.iter().map(|&e| e as f64 * ln_beta).collect();
    let z = logsumexp(&raw);
    raw.iter().map(|r| r - z).collect()
}

#[derive(Default)]
struct KernelCheck {
    /// Worst `|Σ Q − 1|` over states.
    norm_err: f64,
    /// Worst gap between the oracle's and the proposer's move probability.
    factor_err: f64,
    kernel: BTreeMap<(Vec<TokenId>, Vec<TokenId>), f64>,
    moves: usize,
}

/// Exact tree-search kernel over the extended space of moves and
/// auxiliary fills, built from template enumeration and LM conditionals.
fn tsmh_kernel(target: &Target, k: usize) -> KernelCheck {
    let prop = TsmhProposer::new(k);
    let ln_beta = target.constraints.ln_beta();
    let mut cache = FitCache::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = KernelCheck::default();
    let space = all_sentences(target).unwrap();
    for x in &space {
        let pi_x = target.log_pi(x).unwrap();
        let kk = k.min(x.len());
        let lp_pos = -ln_binom(x.len(), kk);
        let mut mass = 0.0;
        for positions in combinations(x.len(), kk) {
            let en = enumerate_templates(x, &positions, &target.partition, &target.constraints, target.max_len);
            let groups = en.groups();
            let gw = group_weights(&groups.iter().map(|g| g.error).collect::<Vec<_>>(), ln_beta);
            for (g, &lg) in groups.iter().zip(&gw) {
                let member_draws: Vec<Vec<Draw>> = g
                    .members
                    .iter()
                    .map(|&ti| draws(target, &en.templates[ti].template.slots))
                    .collect();
                let sizes: Vec<usize> = member_draws.iter().map(Vec::len).collect();
                for combo in product(&sizes) {
                    let picked: Vec<&Draw> = combo.iter().zip(&member_draws).map(|(&c, d)| &d[c]).collect();
                    let lz = logsumexp(&picked.iter().map(|d| d.fit).collect::<Vec<_>>());
                    let all_fill: f64 = picked.iter().map(|d| d.log_p).sum();
                    for (sel, d) in picked.iter().enumerate() {
                        let joint = lp_pos + lg + all_fill + d.fit - lz;
                        mass += joint.exp();
                        out.moves += 1;
                        let tmpl = &en.templates[g.members[sel]].template;
                        let q_f = lp_pos + lg + d.log_p + d.fit - lz;
                        let path = MovePath {
                            positions: positions.clone(),
                            ops: tmpl.ops.clone(),
                            slots: tmpl.slots.clone(),
                            fill: d.fill.clone(),
                        };
                        let aux: Vec<Vec<TokenId>> = picked
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != sel)
                            .map(|(_, a)| a.fill.clone())
                            .collect();
                        let got = prop
                            .path_log_prob(target, x, &path, Some(&aux), &mut cache, &mut rng)
                            .unwrap()
                            .expect("enumerated path is scorable");
                        out.factor_err = out.factor_err.max((got.factors.total() - q_f).abs());
                        let acc = reverse_acceptance(target, &prop, x, pi_x, &path, q_f, &mut out.factor_err);
                        if acc > 0.0 {
                            *out.kernel.entry((x.clone(), d.sentence.clone())).or_default() += joint.exp() * acc;
                        }
                    }
                }
            }
        }
        out.norm_err = out.norm_err.max((mass - 1.0).abs());
    }
    out
}

/// `E[min(1, π(y) Q(rev|y) / π(x) Q(path|x))]` over the reverse move's
/// auxiliary fills.
fn reverse_acceptance(
    target: &Target,
    prop: &TsmhProposer,
    x: &[TokenId],
    pi_x: f64,
    path: &MovePath,
    q_f: f64,
    factor_err: &mut f64,
) -> f64 {
    let y = instantiate(&path.slots, &path.fill);
    let Some(rev) = prop.reverse_path(target, x, &y, &path.positions, &path.ops) else {
        return 0.0;
    };
    if y == x && rev.positions == path.positions && rev.slots == path.slots {
        return 1.0;
    }
    if rev.positions.len() != prop.k.min(y.len()) {
        return 0.0;
    }
    let en = enumerate_templates(&y, &rev.positions, &target.partition, &target.constraints, target.max_len);
    let Some(idx) = en.find(&rev.slots) else {
        return 0.0;
    };
    let canon = &en.templates[idx].template.ops;
    match prop.reverse_path(target, &y, x, &rev.positions, canon) {
        Some(back) if back.positions == path.positions && back.slots == path.slots => {}
        _ => return 0.0,
    }
    let groups = en.groups();
    let gw = group_weights(&groups.iter().map(|g| g.error).collect::<Vec<_>>(), target.constraints.ln_beta());
    let gi = groups.iter().position(|g| g.members.contains(&idx)).unwrap();
    let g = &groups[gi];
    let lp_pos = -ln_binom(y.len(), rev.positions.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (back_x, fill_lp) = fill_template(target, &rev.slots, Some(&rev.fill), &mut rng).unwrap();
    assert_eq!(back_x, x);
    let fit_x = target.log_fit(x).unwrap();
    let pi_y = target.log_pi(&y).unwrap();
    let others: Vec<Vec<Draw>> = g
        .members
        .iter()
        .filter(|&&ti| ti != idx)
        .map(|&ti| draws(target, &en.templates[ti].template.slots))
        .collect();
    let sizes: Vec<usize> = others.iter().map(Vec::len).collect();
    let mut cache = FitCache::new();
    let mut acc = 0.0;
    for combo in product(&sizes) {
        let picked: Vec<&Draw> = combo.iter().zip(&others).map(|(&c, d)| &d[c]).collect();
        let mut fits: Vec<f64> = picked.iter().map(|d| d.fit).collect();
        fits.push(fit_x);
        let q_r = lp_pos + gw[gi] + fill_lp + fit_x - logsumexp(&fits);
        let raux: Vec<Vec<TokenId>> = picked.iter().map(|d| d.fill.clone()).collect();
        let got = prop
            .path_log_prob(target, &y, &rev, Some(&raux), &mut cache, &mut rng)
            .unwrap()
            .expect("reverse path is scorable");
        *factor_err = factor_err.max((got.factors.total() - q_r).abs());
        let p_aux: f64 = picked.iter().map(|d| d.log_p).sum();
        acc += p_aux.exp() * (pi_y + q_r - pi_x - q_f).min(0.0).exp();
    }
    acc
}

/// Exact single-edit kernel.
fn cgmh_kernel(target: &Target) -> KernelCheck {
    let prop = CgmhProposer::new(Default::default());
    let mut out = KernelCheck::default();
    for x in all_sentences(target).unwrap() {
        let pi_x = target.log_pi(&x).unwrap();
        let mut mass = 0.0;
        for e in prop.all_edits(target, &x) {
            let q = prop.edit_log_prob(target, &x, &e).unwrap();
            if q == f64::NEG_INFINITY {
                continue;
            }
            mass += q.exp();
            out.moves += 1;
            let y = e.apply(&x);
            let q_r = prop.edit_log_prob(target, &y, &e.inverse(&x)).unwrap();
            let pi_y = target.log_pi(&y).unwrap();
            let a = (pi_y + q_r - pi_x - q).min(0.0).exp();
            if a > 0.0 {
                *out.kernel.entry((x.clone(), y)).or_default() += q.exp() * a;
            }
        }
        out.norm_err = out.norm_err.max((mass - 1.0).abs());
    }
    out
}

struct Balance {
    pairs: usize,
    one_sided: usize,
    worst_rel: f64,
}

fn balance(target: &Target, k: &KernelCheck) -> Balance {
    let exact = exact_distribution(target).unwrap();
    let mut b = Balance {
        pairs: 0,
        one_sided: 0,
        worst_rel: 0.0,
    };
    let mut seen = BTreeSet::new();
    for ((x, y), &kxy) in &k.kernel {
        if x == y || !seen.insert((x.min(y).clone(), x.max(y).clone())) {
            continue;
        }
        let kyx = k.kernel.get(&(y.clone(), x.clone())).copied().unwrap_or(0.0);
        let fwd = exact.prob(x) * kxy;
        let bwd = exact.prob(y) * kyx;
        if kyx == 0.0 {
            b.one_sided += 1;
            continue;
        }
        b.pairs += 1;
        b.worst_rel = b.worst_rel.max((fwd - bwd).abs() / fwd.max(bwd));
    }
    b
}

#[test]
fn proposal_normalization() {
    let t0 = Instant::now();
    let a = singleton_toy();
    let b = pair_toy();
    let s = tiny_toy(2);
    let ka = tsmh_kernel(&a.target, 2);
    let kb = tsmh_kernel(&b.target, 1);
    let kc = cgmh_kernel(&s.target);
    let tsmh_err = ka.norm_err.max(kb.norm_err);
    let factor_err = ka.factor_err.max(kb.factor_err);
    let pass = tsmh_err <= 1e-6 && kc.norm_err <= 1e-6 && factor_err <= 1e-9;
    report_line(
        "proposal normalization",
        pass,
        format!(
            "tsmh max|ΣQ-1| = {tsmh_err:.2e} over {} moves, cgmh max|ΣQ-1| = {:.2e} over {} edits, \
             proposer vs oracle {factor_err:.2e}, {:.1}s",
            ka.moves + kb.moves,
            kc.norm_err,
            kc.moves,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
    assert!(t0.elapsed().as_secs() < 120);
}

#[test]
fn detailed_balance() {
    let t0 = Instant::now();
    let a = singleton_toy();
    let b = pair_toy();
    let s = tiny_toy(2);
    let results = [
        ("tsmh k=2 singleton", balance(&a.target, &tsmh_kernel(&a.target, 2))),
        ("tsmh k=1 pairs", balance(&b.target, &tsmh_kernel(&b.target, 1))),
        ("cgmh", balance(&s.target, &cgmh_kernel(&s.target))),
    ];
    let pass = results.iter().all(|(_, r)| r.worst_rel <= 1e-9 && r.one_sided == 0 && r.pairs > 0);
    let detail = results
        .iter()
        .map(|(n, r)| format!("{n}: {} pairs, worst rel {:.2e}, one-sided {}", r.pairs, r.worst_rel, r.one_sided))
        .collect::<Vec<_>>()
        .join("; ");
    report_line("detailed balance", pass, format!("{detail}; {:.1}s", t0.elapsed().as_secs_f64()));
    assert!(pass);
}

#[test]
fn stationarity() {
    const SEEDS: u64 = 5;
    const STEPS: usize = 100_000;
    const BURN_IN: usize = 1_000;
    let t0 = Instant::now();
    let s = tiny_toy(2);
    let exact = exact_distribution(&s.target).unwrap();
    let init = s.task.prepare(&[]).unwrap().init;
    let mut lines = Vec::new();
    let mut pass = true;
    for method in [Method::Tsmh, Method::Cgmh] {
        let per_seed: Vec<BTreeMap<Vec<TokenId>, u64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..SEEDS)
                .map(|seed| {
                    let (target, init) = (&s.target, &init);
                    let mut cfg = s.task.method_config(method);
                    cfg.seed = 1000 + seed;
                    scope.spawn(move || {
                        let mut chain = Chain::new(target, init, &cfg).unwrap();
                        let mut counts = BTreeMap::new();
                        for i in 0..BURN_IN + STEPS {
                            chain.step().unwrap();
                            if i >= BURN_IN {
                                *counts.entry(chain.current().to_vec()).or_insert(0u64) += 1;
                            }
                        }
                        counts
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut pooled: BTreeMap<Vec<TokenId>, u64> = BTreeMap::new();
        for c in &per_seed {
            for (x, n) in c {
                *pooled.entry(x.clone()).or_default() += n;
            }
        }
        let tv = total_variation(&exact, &pooled);
        let seeds: Vec<String> = per_seed.iter().map(|c| format!("{:.3}", total_variation(&exact, c))).collect();
        pass &= tv < 0.05;
        lines.push(format!("{method} pooled TV {tv:.4} (per seed {})", seeds.join(" ")));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    report_line(
        "stationarity",
        pass,
        format!("{} states, {}; {secs:.1}s", exact.len(), lines.join(", ")),
    );
    assert!(pass);
}

/// Checks every template and every fill at the given position-set sizes.
fn template_agreement(target: &Target, sizes: std::ops::RangeInclusive<usize>) -> (usize, usize) {
    let (mut checked, mut bad) = (0, 0);
    let p = &target.partition;
    let formulas = target.constraints.formulas();
    for x in all_sentences(target).unwrap() {
        let xs = Sentence::new(x.clone(), &target.vocab, target.max_len).unwrap();
        assert_eq!(target.constraint_error(&x), target.constraints.constraint_error(&xs, p));
        for k in sizes.clone() {
            if k > x.len() {
                continue;
            }
            for positions in combinations(x.len(), k) {
                let en = enumerate_templates(&x, &positions, p, &target.constraints, target.max_len);
                for t in &en.templates {
                    let slots = &t.template.slots;
                    let per_formula: Vec<bool> = formulas.iter().map(|f| eval_template(f, slots, p).unwrap()).collect();
                    if t.error != target.template_error(slots) {
                        bad += 1;
                    }
                    for fill in all_fills(target, slots) {
                        let s = Sentence::new(instantiate(slots, &fill), &target.vocab, target.max_len).unwrap();
                        checked += 1;
                        let sentence_err = target.constraint_error(s.tokens());
                        let agree = sentence_err == t.error
                            && formulas
                                .iter()
                                .zip(&per_formula)
                                .all(|(f, &v)| eval_sentence(f, &s, p).unwrap() == v);
                        if !agree {
                            bad += 1;
                        }
                    }
                }
            }
        }
    }
    (checked, bad)
}

#[test]
fn template_semantics() {
    let t0 = Instant::now();
    let a = singleton_toy();
    let s = tiny_toy(2);
    let kw = {
        let spec = validate_config(repo("configs/tiny.toml")).unwrap();
        let task = Task::build(spec).unwrap();
        let kws = task.spec.task.keywords.clone();
        task.prepare(&kws).unwrap().target
    };
    let runs = [
        ("3 words, up to 4 placeholders", template_agreement(&a.target, 1..=4)),
        ("6 words, up to 2 placeholders", template_agreement(&s.target, 1..=2)),
        ("6 words with keyword categories", template_agreement(&kw, 1..=2)),
    ];
    let bad: usize = runs.iter().map(|(_, r)| r.1).sum();
    let detail = runs
        .iter()
        .map(|(n, (c, b))| format!("{n}: {c} fills, {b} discrepancies"))
        .collect::<Vec<_>>()
        .join("; ");
    report_line("template semantics", bad == 0, format!("{detail}; {:.1}s", t0.elapsed().as_secs_f64()));
    assert_eq!(bad, 0);
}

#[test]
fn enumeration_count() {
    let mut checked = Vec::new();
    let mut bad = Vec::new();
    let words: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_words(&words).unwrap();
    for n_cat in 1..=5usize {
        let mut entries: Vec<serde_json::Value> = (0..n_cat - 1)
            .map(|c| serde_json::json!({"name": format!("C{c}"), "members": [format!("w{c}")]}))
            .collect();
        entries.push(serde_json::json!({"name": "OTH", "residual": true}));
        let spec = CategorySpec::from_json(&serde_json::json!({ "categories": entries }).to_string()).unwrap();
        let part = CategoryPartition::build(&spec, &vocab).unwrap();
        assert_eq!(part.len(), n_cat);
        let cs = ConstraintSet::empty(0.5).unwrap();
        let x: Vec<TokenId> = vocab.ids_of(&["w0", "w5", "w6", "w7"]).unwrap();
        for k in 1..=3usize {
            for positions in combinations(x.len(), k) {
                let en = enumerate_templates(&x, &positions, &part, &cs, 16);
                let want = ((2 * n_cat + 2) as u64).pow(k as u32);
                if en.raw_count != want {
                    bad.push(format!("|V|={n_cat} k={k} {positions:?}: {} != {want}", en.raw_count));
                }
            }
            checked.push(format!("({n_cat},{k})"));
        }
    }
    report_line(
        "enumeration count",
        bad.is_empty(),
        format!("(|V|,k) in {}; {}", checked.join(" "), if bad.is_empty() { "all equal (2|V|+2)^k".to_string() } else { bad.join(", ") }),
    );
    assert!(bad.is_empty(), "{bad:?}");
}

fn random_formula(rng: &mut ChaCha8Rng, names: &[String], depth: u32) -> Formula {
    if depth == 0 || rng.random_bool(0.3) {
        return Formula::var(rng.random_range(1..=5), names[rng.random_range(0..names.len())].clone());
    }
    match rng.random_range(0..3) {
        0 => Formula::not(random_formula(rng, names, depth - 1)),
        1 => Formula::and(random_formula(rng, names, depth - 1), random_formula(rng, names, depth - 1)),
        _ => Formula::or(random_formula(rng, names, depth - 1), random_formula(rng, names, depth - 1)),
    }
}

/// Direct evaluation on category names.
fn holds(f: &Formula, x: &[TokenId], part: &CategoryPartition) -> bool {
    match f {
        Formula::Var { pos, category } => {
            *pos >= 1 && *pos <= x.len() && part.name(part.cat(x[*pos - 1])) == category
        }
        Formula::Not(a) => !holds(a, x, part),
        Formula::And(a, b) => holds(a, x, part) && holds(b, x, part),
        Formula::Or(a, b) => holds(a, x, part) || holds(b, x, part),
    }
}

#[test]
fn hard_score_exactness() {
    let spec = validate_config(repo("configs/tiny.toml")).unwrap();
    let task = Task::build(spec).unwrap();
    let kws = task.spec.task.keywords.clone();
    let part = task.prepare(&kws).unwrap().target.partition.clone();
    let names: Vec<String> = part.categories().iter().map(|c| c.name().to_string()).collect();
    let words = task.vocab.word_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let (mut worst, mut cases, mut max_c) = (0.0f64, 0, 0);
    for _ in 0..500 {
        let m = rng.random_range(1..=6);
        let formulas: Vec<Formula> = (0..m).map(|_| random_formula(&mut rng, &names, 3)).collect();
        let beta = 10f64.powf(rng.random_range(-12.0..-0.05));
        let cs = ConstraintSet::new(formulas.clone(), beta, &part).unwrap();
        for _ in 0..20 {
            let len = rng.random_range(1..=4);
            let x: Vec<TokenId> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
            let s = Sentence::new(x.clone(), &task.vocab, 4).unwrap();
            let c = formulas.iter().filter(|f| !holds(f, &x, &part)).count() as u32;
            max_c = max_c.max(c);
            assert_eq!(cs.constraint_error(&s, &part), c);
            let want = c as f64 * beta.ln();
            let got = cs.log_hard_score(&s, &part);
            let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
            let direct = cs.hard_score(&s, &part);
            let rel_direct = ((direct - beta.powi(c as i32)) / beta.powi(c as i32)).abs();
            worst = worst.max(rel).max(rel_direct);
            cases += 1;
        }
    }
    let pass = worst <= 1e-12;
    report_line(
        "hard score exactness",
        pass,
        format!("{cases} (constraint set, sentence) cases, C up to {max_c}, worst relative error {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn determinism() {
    let spec = validate_config(repo("configs/interrogative.toml")).unwrap();
    let task = Task::build(spec).unwrap();
    let inputs: Vec<InputLine> = report::read_inputs(&repo("data/toy/keywords.tsv")).unwrap().into_iter().take(4).collect();
    let mut same = true;
    let mut files = 0;
    for method in [Method::Tsmh, Method::Cgmh] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        report::generate(&task, method, 11, &inputs, a.path()).unwrap();
        report::generate(&task, method, 11, &inputs, b.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(a.path().join(report::TRACE_DIR))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), inputs.len());
        for n in names {
            let ta = fs::read(a.path().join(report::TRACE_DIR).join(&n)).unwrap();
            let tb = fs::read(b.path().join(report::TRACE_DIR).join(&n)).unwrap();
            same &= !ta.is_empty() && ta == tb;
            files += 1;
        }
        for f in [report::CSV_FILE, report::BEST_FILE] {
            same &= fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap();
        }
    }
    report_line("determinism", same, format!("{files} JSONL traces compared byte for byte across two runs"));
    assert!(same);
}

/// Known failure. With exact reverse probabilities the tree-search chain
/// accepts far less often than the single-edit chain on this data, so the
/// directional comparison does not hold. The test reports the measured
/// numbers as FAIL and asserts that the criterion is still unmet; if it
/// starts passing, the assertion trips so the marker gets removed.
#[test]
fn tsmh_beats_cgmh_known_failure() {
    let t0 = Instant::now();
    let spec = validate_config(repo("configs/interrogative.toml")).unwrap();
    let task = Task::build(spec).unwrap();
    assert_eq!(task.spec.chain.k, 3);
    let inputs = report::read_inputs(&repo("data/toy/keywords.tsv")).unwrap();
    assert_eq!(inputs.len(), 50);
    let seed = task.spec.chain.seed;
    let dt = tempfile::tempdir().unwrap();
    let dc = tempfile::tempdir().unwrap();
    let rt = report::generate(&task, Method::Tsmh, seed, &inputs, dt.path()).unwrap();
    let rc = report::generate(&task, Method::Cgmh, seed, &inputs, dc.path()).unwrap();
    assert_eq!((rt.steps, rc.steps), (100, 300));
    let c = report::compare(&rt, &rc).unwrap();
    let (a, b) = (&c.a_aggregate, &c.b_aggregate);
    let valid_gap = a.valid_pct - b.valid_pct;
    let valid_ok = valid_gap >= 20.0;
    let accept_ok = a.mean_acceptance_rate > b.mean_acceptance_rate;
    let sign_ok = c.acceptance.wins > c.acceptance.losses && c.acceptance.p_value < 0.05;
    let met = valid_ok && accept_ok && sign_ok;
    report_line(
        "tsmh over cgmh direction (known failure)",
        met,
        format!(
            "tsmh valid {:.0}% vs cgmh {:.0}% (gap {valid_gap:+.0}pp, need +20), \
             acceptance {:.2}% vs {:.2}%, acceptance sign test {}-{} p={:.2e}, \
             valid sign test {}-{} p={:.2e}; {:.0}s",
            a.valid_pct,
            b.valid_pct,
            100.0 * a.mean_acceptance_rate,
            100.0 * b.mean_acceptance_rate,
            c.acceptance.wins,
            c.acceptance.losses,
            c.acceptance.p_value,
            c.valid.wins,
            c.valid.losses,
            c.valid.p_value,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(!met, "the directional criterion now holds; drop the known-failure marker");
    assert!(t0.elapsed().as_secs() < 1800);
}

// The proposer's own reverse probability must match rescoring its reverse
// path with the recorded auxiliary fills.
#[test]
fn recorded_reverse_probability_rescores() {
    let s = tiny_toy(2);
    let prop = TsmhProposer::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cache = FitCache::new();
    let space = all_sentences(&s.target).unwrap();
    let mut worst = 0.0f64;
    for i in 0..2000 {
        let x = &space[(i * 7919) % space.len()];
        let r = prop.propose_move(&s.target, x, &mut cache, &mut rng).unwrap();
        let MoveDetail::Tsmh(m) = &r.detail else { unreachable!() };
        let fwd = prop
            .path_log_prob(&s.target, x, &m.forward, Some(&m.aux), &mut cache, &mut rng)
            .unwrap()
            .unwrap();
        worst = worst.max((fwd.factors.total() - r.log_q_forward).abs());
        if r.log_q_reverse == f64::NEG_INFINITY || (r.x_star == *x && m.reverse_aux.is_empty()) {
            continue;
        }
        let rev = m.reverse.as_ref().unwrap();
        let back = prop
            .path_log_prob(&s.target, &r.x_star, rev, Some(&m.reverse_aux), &mut cache, &mut rng)
            .unwrap()
            .unwrap();
        worst = worst.max((back.factors.total() - r.log_q_reverse).abs());
    }
    assert!(worst < 1e-9, "{worst}");
}
