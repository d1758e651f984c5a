use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use psm_core::cascade::cascades_from_actions;
use psm_core::causal::{causal_scores, pair_stats, relative_lift, CausalScores, PairStats};
use psm_core::config::{ClassifierConfig, PipelineConfig};
use psm_core::corpus::{generate_synthetic, ActionRecord, SynthParams};
use psm_core::eval::{cross_validate_dataset, welch_ttest, GroupSpec, Tail};
use psm_core::features::layout::{column_names, FeatureGroup, SEGMENTS, WIDTH};
use psm_core::features::FeatureContext;
use psm_core::learn::train_gbdt_traced;
use psm_core::learn::logistic_objective;
use psm_core::learn::{train, ClassifierKind, LabeledDataset};
use psm_core::pipeline::{compute_causal, evaluate, feature_matrix_csv, full_features, with_threads, EvalPlan};
use psm_core::textproc::{build_tfidf_vocab, complexity, reading_ease, tokenize, tfidf_features, PosTag, Resources, TokenizedDoc};
use psm_core::topics::{train_lda, LdaParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// Criterion 1 ---------------------------------------------------------------

struct Oracle {
    pairs: Vec<PairStats>,
    scores: BTreeMap<String, CausalScores>,
}

/// Counts everything again from the raw log, one cascade at a time.
fn naive(actions: &[ActionRecord], theta: usize, alpha: f64) -> Oracle {
    let mut by_msg: BTreeMap<&str, Vec<&ActionRecord>> = BTreeMap::new();
    for a in actions {
        by_msg.entry(&a.message_id).or_default().push(a);
    }
    struct C {
        viral: bool,
        first: BTreeMap<String, usize>,
        keys: BTreeSet<String>,
    }
    let cascades: Vec<C> = by_msg
        .into_values()
        .map(|mut acts| {
            acts.sort_by(|a, b| {
                (a.time, &a.user_id, &a.tweet_id).cmp(&(b.time, &b.user_id, &b.tweet_id))
            });
            let mut first = BTreeMap::new();
            for (k, a) in acts.iter().enumerate() {
                first.entry(a.user_id.clone()).or_insert(k);
            }
            let viral = acts.len() >= theta;
            let keys = if viral {
                acts[..theta].iter().map(|a| a.user_id.clone()).collect()
            } else {
                BTreeSet::new()
            };
            C { viral, first, keys }
        })
        .collect();
    let users: BTreeSet<String> = actions.iter().map(|a| a.user_id.clone()).collect();
    let causes: BTreeSet<&String> = cascades.iter().flat_map(|c| c.keys.iter()).collect();
    let part = |u: &str| cascades.iter().filter(|c| c.first.contains_key(u)).count() as u32;
    let prec = |c: &C, i: &str, j: &str| matches!((c.first.get(i), c.first.get(j)), (Some(a), Some(b)) if a < b);

    let mut pairs = Vec::new();
    for i in &causes {
        for j in &users {
            let mut s = PairStats {
                i: i.to_string(),
                j: j.clone(),
                n_prec: 0,
                n_prec_viral: 0,
                n_noprec: 0,
                n_noprec_viral: 0,
            };
            for c in &cascades {
                if !c.first.contains_key(j.as_str()) {
                    continue;
                }
                let p = prec(c, i, j);
                match (p, c.viral) {
                    (true, v) => {
                        s.n_prec += 1;
                        s.n_prec_viral += u32::from(v);
                    }
                    (false, v) => {
                        s.n_noprec += 1;
                        s.n_noprec_viral += u32::from(v);
                    }
                }
            }
            if s.n_prec > 0 {
                pairs.push(s);
            }
        }
    }

    let mut scores: BTreeMap<String, CausalScores> =
        users.iter().map(|u| (u.clone(), CausalScores::ZERO)).collect();
    let retained: Vec<&PairStats> = pairs.iter().filter(|p| p.n_noprec > 0).collect();
    let prob = |p: &PairStats| {
        (
            f64::from(p.n_prec_viral) / f64::from(p.n_prec),
            f64::from(p.n_noprec_viral) / f64::from(p.n_noprec),
        )
    };
    let mut kandm: BTreeMap<&str, f64> = BTreeMap::new();
    for i in &causes {
        let r: Vec<&&PairStats> = retained.iter().filter(|p| &&p.i == i).collect();
        if r.is_empty() {
            continue;
        }
        let n = r.len() as f64;
        let k = r.iter().map(|p| { let (a, b) = prob(p); a - b }).sum::<f64>() / n;
        let rel = r.iter().map(|p| { let (a, b) = prob(p); relative_lift(a, b, alpha) }).sum::<f64>() / n;
        kandm.insert(i.as_str(), k);
        let s = scores.get_mut(i.as_str()).unwrap();
        s.kandm = k;
        s.rel = rel;
    }
    for j in &users {
        let r: Vec<&&PairStats> = retained.iter().filter(|p| &p.j == j).collect();
        if r.is_empty() {
            continue;
        }
        let n = r.len() as f64;
        let nb = r.iter().map(|p| kandm[p.i.as_str()]).sum::<f64>() / n;
        let w: Vec<f64> = r.iter().map(|p| f64::from(p.n_prec) / f64::from(part(&p.i))).collect();
        let wnb = r.iter().zip(&w).map(|(p, w)| w * kandm[p.i.as_str()]).sum::<f64>()
            / w.iter().sum::<f64>();
        let s = scores.get_mut(j.as_str()).unwrap();
        s.nb = nb;
        s.wnb = wnb;
    }
    Oracle { pairs, scores }
}

fn random_log(rng: &mut ChaCha8Rng) -> Vec<ActionRecord> {
    let n_users = rng.random_range(1..=10);
    let n_msgs = rng.random_range(1..=8);
    let mut out = Vec::new();
    for m in 0..n_msgs {
        for k in 0..rng.random_range(1..=12) {
            out.push(ActionRecord {
                user_id: format!("u{}", rng.random_range(0..n_users)),
                message_id: format!("m{m}"),
                time: rng.random_range(0..6),
                tweet_id: format!("t{m}_{k}"),
            });
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let theta = 3;
    let alpha = 0.001;
    for case in 0..100 {
        let log = random_log(&mut rng);
        let oracle = naive(&log, theta, alpha);
        let cascades = cascades_from_actions(log, theta);
        if pair_stats(&cascades) != oracle.pairs {
            return Err(format!("pair counts differ on log {case}"));
        }
        match causal_scores(&cascades, alpha) {
            Ok(scores) => {
                if scores.len() != oracle.scores.len() {
                    return Err(format!("user sets differ on log {case}"));
                }
                for (u, s) in &scores {
                    let o = &oracle.scores[u];
                    if !(close(s.kandm, o.kandm) && close(s.rel, o.rel) && close(s.nb, o.nb) && close(s.wnb, o.wnb)) {
                        return Err(format!("scores of {u} differ on log {case}: {s:?} vs {o:?}"));
                    }
                }
            }
            Err(_) => {
                if !oracle.pairs.is_empty() {
                    return Err(format!("log {case} reported degenerate"));
                }
            }
        }
    }
    let el = start.elapsed();
    check(el < Duration::from_secs(10), format!("100 logs match the naive recount in {el:.2?}"))
}

// Criterion 2 ---------------------------------------------------------------

fn criterion_2() -> Outcome {
    let res = Resources::bundled();
    let fre = reading_ease(&tokenize("The cat sat.")).map_err(|e| e.to_string())?;
    use PosTag::*;
    let doc = TokenizedDoc {
        tokens: ["the", "dog", "bit", "the", "man"].map(String::from).to_vec(),
        sentences: 1,
        pos_tags: vec![Det, Noun, Verb, Det, Noun],
    };
    let cx = complexity(&doc).map_err(|e| e.to_string())?;
    let vocab = build_tfidf_vocab(&[tokenize("shared word"), tokenize("shared pear")], res);
    let col = vocab
        .unigrams
        .iter()
        .position(|t| t.as_deref() == Some("word"))
        .ok_or("term missing from vocabulary")?;
    let tf = tfidf_features(&tokenize("word word"), &vocab, res)[col];
    let want_tf = 2.0 * (1.5f64.ln() + 1.0);
    let t = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], Tail::TwoSided)
        .map_err(|e| e.to_string())?;
    check(
        (fre - 119.19).abs() <= 1e-9
            && (cx - 0.6).abs() <= 1e-12
            && (tf - want_tf).abs() <= 1e-9
            && (t.t + 1.0).abs() <= 1e-9
            && (t.p - 0.3466).abs() <= 1e-3,
        format!("reading ease {fre}, complexity {cx}, tf-idf {tf}, t {} p {:.4}", t.t, t.p),
    )
}

// Criterion 3 ---------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut docs: Vec<Vec<String>> = Vec::new();
    let mut groups = Vec::new();
    for d in 0..200 {
        let g = d % 2;
        let stem = if g == 0 { "river" } else { "market" };
        docs.push((0..100).map(|_| format!("{stem}{}", rng.random_range(0..30))).collect());
        groups.push(g);
    }
    let params = LdaParams {
        k: 2,
        alpha: 25.0,
        beta: 0.01,
        iterations: 500,
        min_count: 1,
        seed: 9,
    };
    let start = Instant::now();
    let m = train_lda(&docs, &params).map_err(|e| e.to_string())?;
    let el = start.elapsed();
    let again = train_lda(&docs, &params).map_err(|e| e.to_string())?;
    let bytes = |m: &psm_core::topics::TopicModel| {
        let mut b = Vec::new();
        m.write_to(&mut b).unwrap();
        b
    };
    let identical = bytes(&m) == bytes(&again);

    let mut worst_sum: f64 = 0.0;
    let mut topic_of_group = [[0usize; 2]; 2];
    for (d, &g) in docs.iter().zip(&groups) {
        let theta = m.infer_distribution(d, 50, 1).theta;
        worst_sum = worst_sum.max((theta.iter().sum::<f64>() - 1.0).abs());
        let top = usize::from(theta[1] > theta[0]);
        topic_of_group[g][top] += 1;
    }
    let hits: usize = topic_of_group.iter().map(|r| r.iter().max().unwrap()).sum();
    let purity = hits as f64 / docs.len() as f64;
    check(
        worst_sum <= 1e-9 && purity >= 0.9 && identical && el < Duration::from_secs(30),
        format!("purity {purity:.3}, max |sum theta - 1| {worst_sum:e}, identical {identical}, trained in {el:.2?}"),
    )
}

// Criterion 4 ---------------------------------------------------------------

fn criterion_4() -> Outcome {
    let widths: Vec<usize> = FeatureGroup::ALL.iter().map(|g| g.range().len()).collect();
    let segments: Vec<usize> = SEGMENTS.iter().map(|&(_, w)| w).collect();
    let names = column_names();
    check(
        WIDTH == 111
            && names.len() == WIDTH
            && segments == [4, 10, 5, 5, 25, 1, 1, 1, 20, 20, 8, 6, 5]
            && widths == [14, 86, 11],
        format!("width {WIDTH}, segments {segments:?}, groups {widths:?}"),
    )
}

// Criterion 5 ---------------------------------------------------------------

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 30;
        let p = 5;
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        let (_, gw, gb) = logistic_objective(&x, &y, &w, b, 1.0);
        let h = 1e-6;
        let mut num = Vec::new();
        for k in 0..p {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            num.push((logistic_objective(&x, &y, &wp, b, 1.0).0 - logistic_objective(&x, &y, &wm, b, 1.0).0) / (2.0 * h));
        }
        num.push((logistic_objective(&x, &y, &w, b + h, 1.0).0 - logistic_objective(&x, &y, &w, b - h, 1.0).0) / (2.0 * h));
        let ana: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        for (a, nu) in ana.iter().zip(&num) {
            worst = worst.max((a - nu).abs() / a.abs().max(nu.abs()).max(1e-8));
        }
    }

    let noisy = {
        let x: Vec<Vec<f64>> = (0..150).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] + 0.5 * rng.random_range(-1.0..1.0) > 0.0)).collect();
        LabeledDataset::from_rows(x, y).unwrap()
    };
    let (_, losses) = train_gbdt_traced(&noisy, 200, 0.1, 3, 1).map_err(|e| e.to_string())?;
    let monotone = losses.windows(2).all(|w| w[1] <= w[0]) && losses.len() == 201;

    let xor = {
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
        LabeledDataset::from_rows(x, y).unwrap()
    };
    let start = Instant::now();
    let r = cross_validate_dataset(&xor, ClassifierKind::Gbdt, &ClassifierConfig::default(), 10, 7)
        .map_err(|e| e.to_string())?;
    let el = start.elapsed();
    check(
        worst < 1e-5 && monotone && r.mean_f1_psm >= 0.95 && el < Duration::from_secs(30),
        format!(
            "gradient rel. error {worst:.2e}, loss monotone over 200 stages {monotone}, XOR f1_psm {:.3} in {el:.2?}",
            r.mean_f1_psm
        ),
    )
}

// Criteria 6 and 7 ------------------------------------------------------------

fn synthetic_report() -> Result<(psm_core::eval::EvaluationReport, Duration), String> {
    let params = SynthParams {
        n_users: 2000,
        psm_fraction: 0.25,
        ..SynthParams::default()
    };
    let start = Instant::now();
    let corpus = generate_synthetic(&params, 7).map_err(|e| e.to_string())?;
    let config: PipelineConfig = corpus.config.clone();
    let res = Resources::bundled();
    let causal = compute_causal(&corpus, &config);
    let ctx = FeatureContext::new(&corpus, &config, res, &causal);
    let plan = EvalPlan {
        classifiers: vec![ClassifierKind::Gbdt, ClassifierKind::Lr, ClassifierKind::Nb],
        group: GroupSpec::All,
        importance: true,
        statistics: true,
    };
    let report = evaluate(&ctx, &plan).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn criterion_6(report: &psm_core::eval::EvaluationReport, el: Duration) -> Outcome {
    let f = |k| report.classifier(k, GroupSpec::All).map(|c| (c.mean_f1_psm, c.mean_f1_macro)).unwrap();
    let (g_psm, g_macro) = f(ClassifierKind::Gbdt);
    let (l_psm, _) = f(ClassifierKind::Lr);
    let (n_psm, _) = f(ClassifierKind::Nb);
    let first = report.groups.iter().find(|g| g.rank == 1).map(|g| g.group);
    let ranks: Vec<String> = report
        .groups
        .iter()
        .map(|g| format!("{}={:.3}", g.group.name(), g.mean_f1_psm))
        .collect();
    check(
        g_psm >= 0.85
            && g_macro >= 0.85
            && g_psm >= l_psm
            && l_psm >= n_psm
            && first == Some(FeatureGroup::Source)
            && el < Duration::from_secs(300),
        format!(
            "GBDT f1_psm {g_psm:.3} f1_macro {g_macro:.3}, LR {l_psm:.3}, NB {n_psm:.3}, groups [{}], {el:.1?}",
            ranks.join(" ")
        ),
    )
}

fn criterion_7(report: &psm_core::eval::EvaluationReport) -> Outcome {
    let get = |name: &str| report.ttests.iter().find(|t| t.feature == name);
    let (Some(c), Some(r), Some(q)) = (get("complexity"), get("readability"), get("has_quote")) else {
        return Err("missing t-test rows".into());
    };
    check(
        c.tail == Tail::Greater && r.tail == Tail::Greater && q.tail == Tail::TwoSided
            && c.p < 0.01 && r.p < 0.01 && q.p >= 0.01,
        format!("complexity p {:.2e}, readability p {:.2e}, has_quote p {:.3}", c.p, r.p, q.p),
    )
}

// Criterion 8 ---------------------------------------------------------------

fn run_once(threads: usize) -> Result<(String, Vec<u8>, String), String> {
    with_threads(threads, || {
        let params = SynthParams {
            n_users: 300,
            n_cascades: 150,
            n_urls: 120,
            ..SynthParams::default()
        };
        let corpus = generate_synthetic(&params, 11).map_err(|e| e.to_string())?;
        let mut config = corpus.config.clone();
        config.folds = 5;
        config.lda.iterations = 100;
        config.classifiers.gbdt.n_estimators = 50;
        config.classifiers.rf.n_estimators = 30;
        let res = Resources::bundled();
        let causal = compute_causal(&corpus, &config);
        let ctx = FeatureContext::new(&corpus, &config, res, &causal);
        let users = psm_core::pipeline::featurizable_users(&ctx);
        let (_, vectors) = full_features(&ctx, &users).map_err(|e| e.to_string())?;
        let matrix = feature_matrix_csv(&corpus, &vectors);
        let (lab_users, labels) = psm_core::pipeline::labeled_users(&ctx);
        let rows: Vec<Vec<f64>> = lab_users
            .iter()
            .map(|u| vectors.iter().find(|v| v.user_id == *u).unwrap().values.clone())
            .collect();
        let data = LabeledDataset::from_rows(rows, labels).map_err(|e| e.to_string())?;
        let mut model = Vec::new();
        for kind in ClassifierKind::ALL {
            train(kind, &data, &config.classifiers, 3)
                .map_err(|e| e.to_string())?
                .write_to(&mut model)
                .map_err(|e| e.to_string())?;
        }
        let plan = EvalPlan {
            classifiers: ClassifierKind::ALL.to_vec(),
            group: GroupSpec::All,
            importance: true,
            statistics: true,
        };
        let report = evaluate(&ctx, &plan).map_err(|e| e.to_string())?.to_json();
        Ok((matrix, model, report))
    })
}

fn criterion_8() -> Outcome {
    let one = run_once(1)?;
    let four = run_once(4)?;
    let m = one.0 == four.0;
    let w = one.1 == four.1;
    let r = one.2 == four.2;
    check(m && w && r, format!("matrix identical {m}, models identical {w}, report identical {r}"))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        match o {
            Ok(msg) => println!("criterion {n} PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {msg}");
            }
        }
    };
    report(1, "causal scores match a naive oracle", criterion_1());
    report(2, "formula fixtures", criterion_2());
    report(3, "topic model", criterion_3());
    report(4, "feature layout", criterion_4());
    report(5, "learners", criterion_5());
    match synthetic_report() {
        Ok((r, el)) => {
            report(6, "synthetic classification", criterion_6(&r, el));
            report(7, "text statistics", criterion_7(&r));
        }
        Err(e) => {
            report(6, "synthetic classification", Err(e.clone()));
            report(7, "text statistics", Err(e));
        }
    }
    report(8, "thread-count determinism", criterion_8());
    if failed > 0 {
        std::process::exit(1);
    }
}
