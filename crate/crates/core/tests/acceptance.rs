//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails. Run with `--nocapture` to see the lines.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ralm_core::bm25::{Bm25Params, InvertedIndex};
use ralm_core::conformance::run_conformance;
use ralm_core::corpus::{Passage, PassageSet};
use ralm_core::engine::{
    evaluate_perplexity, RalmConfig, RerankMode, Rerankers, Retriever, DEFAULT_QUERY_LEN,
};
use ralm_core::lm::{
    CacheNGramLm, GenerateRequest, LmBackend, LmInfo, LmScoreRequest, LmScoreResult, NGramConfig,
    RemoteLm,
};
use ralm_core::odqa::{build_closed_book_prompt, build_open_book_prompt};
use ralm_core::rerank::{
    listwise_loss_and_grad, loss_and_grad, predictive_rerank, train, FeatureVector,
    PredictiveReranker, RerankCandidate, RerankExample, TrainConfig, NUM_FEATURES,
};
use ralm_core::synthetic::{generate, overlap_aligned_examples, pseudo_word, SyntheticConfig};
use ralm_core::text::{analyze, detokenize, LmTokenizer};
use ralm_core::{RalmError, Result as RalmResult};

const BM25_SCORE_TOL: f64 = 1e-9;
const BM25_RUNTIME: Duration = Duration::from_secs(10);
const MIN_RETRIEVAL_GAIN: f64 = 0.10;
const RETRIEVAL_RUNTIME: Duration = Duration::from_secs(60);
const STRIDE_TREND_CORPORA: u64 = 20;
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-6;
const BIAS_GRAD_TOL: f64 = 1e-12;
const MIN_RERANK_AGREEMENT: f64 = 0.90;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// BM25 against direct formula evaluation

fn brute_force_bm25(texts: &[String], query: &str, k: usize) -> Vec<(usize, f64)> {
    let (k1, b) = (0.9, 0.4);
    let docs: Vec<Vec<String>> = texts.iter().map(|t| analyze(t)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let tf = |d: &[String], t: &str| d.iter().filter(|w| *w == t).count() as f64;
    let q = analyze(query);
    let mut scored: Vec<(usize, f64)> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let dl = d.len() as f64;
            let mut s = 0.0;
            for t in &q {
                let f = tf(d, t);
                if f == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|x| x.contains(t)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                s += idf * (f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * dl / avgdl)));
            }
            (i, s)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn random_passages(rng: &mut ChaCha8Rng, n: usize, vocab: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(0..30);
            (0..len)
                .map(|_| pseudo_word(rng.gen_range(0..vocab)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn passage_set(texts: &[String]) -> PassageSet {
    PassageSet::new(
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Passage {
                passage_id: i,
                source_doc_id: format!("d{i}"),
                title: None,
                word_span: (0, t.split_whitespace().count()),
                text: t.clone(),
            })
            .collect(),
    )
    .unwrap()
}

fn bm25_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for corpus in 0..50 {
        let n = rng.gen_range(1..=200);
        let vocab = rng.gen_range(2..=50);
        let texts = random_passages(&mut rng, n, vocab);
        let index = InvertedIndex::build(&passage_set(&texts), Bm25Params::default())
            .map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let qlen = rng.gen_range(1..8);
            let query: Vec<String> = (0..qlen)
                .map(|_| pseudo_word(rng.gen_range(0..vocab + 5)))
                .collect();
            let query = query.join(" ");
            let k = rng.gen_range(1..=n + 2);
            let got = index.search(&query, k);
            let want = brute_force_bm25(&texts, &query, k);
            let got_ids: Vec<usize> = got.iter().map(|r| r.passage_id).collect();
            let want_ids: Vec<usize> = want.iter().map(|r| r.0).collect();
            ensure(got_ids == want_ids, || {
                format!("corpus {corpus}, query {query:?}: order {got_ids:?} vs {want_ids:?}")
            })?;
            for (g, w) in got.iter().zip(&want) {
                ensure((g.score - w.1).abs() <= BM25_SCORE_TOL, || {
                    format!(
                        "corpus {corpus}, query {query:?}: score {} vs {}",
                        g.score, w.1
                    )
                })?;
            }
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < BM25_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("{compared} queries match, {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// Retrieval disabled reduces to plain strided scoring

fn bare_strided_nll(lm: &CacheNGramLm, text: &str, stride: usize) -> f64 {
    let tokens = LmTokenizer.tokenize(text);
    let window = lm.info().unwrap().max_context_tokens;
    let mut total = 0.0;
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + stride).min(tokens.len());
        let keep = window - (end - start);
        let ctx_start = start.saturating_sub(keep);
        let r = lm
            .score(&LmScoreRequest::new(
                detokenize(&tokens[ctx_start..start]),
                detokenize(&tokens[start..end]),
            ))
            .unwrap();
        total += -r.logprob_sum;
        start = end;
    }
    total
}

fn no_retrieval_identity() -> Outcome {
    let suite = generate(&SyntheticConfig::default()).map_err(|e| e.to_string())?;
    let lm = CacheNGramLm::train(&suite.lm_training_text, NGramConfig::default())
        .map_err(|e| e.to_string())?;
    let index =
        InvertedIndex::build(&suite.passages, Bm25Params::default()).map_err(|e| e.to_string())?;
    let retriever = Retriever::new(&index, &suite.passages).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words: Vec<&str> = suite.lm_training_text.split(' ').collect();
    let mut runs = 0;
    for t in 0..20 {
        // One text exceeds the window so left truncation is exercised.
        let len = if t == 0 { 1500 } else { rng.gen_range(1..400) };
        let start = rng.gen_range(0..words.len() - len);
        let text = words[start..start + len].join(" ");
        for s in [1, 4, 7, 64] {
            let cfg = RalmConfig {
                stride: s,
                retrieval_enabled: false,
                ..RalmConfig::default()
            };
            let report =
                evaluate_perplexity(&text, Some(retriever), &lm, &cfg, Rerankers::default())
                    .map_err(|e| e.to_string())?;
            let bare = bare_strided_nll(&lm, &text, s);
            ensure(report.total_nll.to_bits() == bare.to_bits(), || {
                format!("text {t}, s={s}: {} vs {bare}", report.total_nll)
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs bit-identical"))
}

// ---------------------------------------------------------------------------
// Constructed-suite perplexity checks

struct Prepared {
    suite: ralm_core::synthetic::SyntheticSuite,
    lm: CacheNGramLm,
    index: InvertedIndex,
}

fn prepare(seed: u64) -> Prepared {
    let suite = generate(&SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let lm = CacheNGramLm::train(&suite.lm_training_text, NGramConfig::default()).unwrap();
    let index = InvertedIndex::build(&suite.passages, Bm25Params::default()).unwrap();
    Prepared { suite, lm, index }
}

impl Prepared {
    fn retriever(&self) -> Retriever<'_> {
        Retriever::new(&self.index, &self.suite.passages).unwrap()
    }

    /// Reports for every evaluation text.
    fn run(&self, cfg: &RalmConfig) -> RalmResult<Vec<ralm_core::engine::PerplexityReport>> {
        self.suite
            .eval_texts
            .iter()
            .map(|t| {
                evaluate_perplexity(
                    t,
                    Some(self.retriever()),
                    &self.lm,
                    cfg,
                    Rerankers::default(),
                )
            })
            .collect()
    }

    fn token_ppl(&self, cfg: &RalmConfig) -> RalmResult<f64> {
        let reports = self.run(cfg)?;
        let nll: f64 = reports.iter().map(|r| r.total_nll).sum();
        let n: usize = reports.iter().map(|r| r.token_count).sum();
        Ok((nll / n as f64).exp())
    }
}

fn retrieval_helps() -> Outcome {
    let start = Instant::now();
    let p = prepare(0);
    let with = p
        .token_ppl(&RalmConfig::default())
        .map_err(|e| e.to_string())?;
    let without = p
        .token_ppl(&RalmConfig {
            retrieval_enabled: false,
            ..RalmConfig::default()
        })
        .map_err(|e| e.to_string())?;
    let gain = 1.0 - with / without;
    let elapsed = start.elapsed();
    let detail = format!(
        "token_ppl {without:.2} -> {with:.2}, gain {:.1}% (need {:.0}%), {elapsed:.2?}",
        100.0 * gain,
        100.0 * MIN_RETRIEVAL_GAIN
    );
    ensure(with < without && gain >= MIN_RETRIEVAL_GAIN, || {
        detail.clone()
    })?;
    ensure(elapsed < RETRIEVAL_RUNTIME, || detail.clone())?;
    Ok(detail)
}

fn oracle_dominance() -> Outcome {
    let p = prepare(0);
    let top1 = p.run(&RalmConfig::default()).map_err(|e| e.to_string())?;
    let oracle = p
        .run(&RalmConfig {
            rerank_mode: RerankMode::Oracle,
            ..RalmConfig::default()
        })
        .map_err(|e| e.to_string())?;
    let mut strides = 0;
    for (a, b) in oracle.iter().zip(&top1) {
        for (o, t) in a.strides.iter().zip(&b.strides) {
            ensure(o.candidate_ids == t.candidate_ids, || {
                format!("stride {} saw different candidates", o.stride_index)
            })?;
            ensure(o.nll_sum <= t.nll_sum, || {
                format!(
                    "stride {}: oracle {} > top-1 {}",
                    o.stride_index, o.nll_sum, t.nll_sum
                )
            })?;
            strides += 1;
        }
    }
    let ppl = |rs: &[ralm_core::engine::PerplexityReport]| {
        let nll: f64 = rs.iter().map(|r| r.total_nll).sum();
        let n: usize = rs.iter().map(|r| r.token_count).sum();
        (nll / n as f64).exp()
    };
    let zero_shot = p
        .token_ppl(&RalmConfig {
            rerank_mode: RerankMode::ZeroShot,
            ..RalmConfig::default()
        })
        .map_err(|e| e.to_string())?;
    let (po, pt) = (ppl(&oracle), ppl(&top1));
    ensure(po <= zero_shot, || {
        format!("ppl oracle {po:.3} > zero-shot {zero_shot:.3}")
    })?;
    Ok(format!(
        "{strides} strides dominated; ppl oracle {po:.2}, zero-shot {zero_shot:.2}, top-1 {pt:.2}"
    ))
}

fn stride_trend() -> Outcome {
    let strides = [1usize, 4, 16, 64];
    let mut sums = [0.0; 4];
    for seed in 0..STRIDE_TREND_CORPORA {
        let p = prepare(seed);
        for (sum, &s) in sums.iter_mut().zip(&strides) {
            *sum += p
                .token_ppl(&RalmConfig {
                    stride: s,
                    ..RalmConfig::default()
                })
                .map_err(|e| e.to_string())?;
        }
    }
    let means = sums.map(|s| s / STRIDE_TREND_CORPORA as f64);
    let detail = format!(
        "mean token_ppl over {STRIDE_TREND_CORPORA} corpora for s={strides:?}: {means:.2?}"
    );
    ensure(means.windows(2).all(|w| w[0] <= w[1]), || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Predictive reranker

fn random_example(rng: &mut ChaCha8Rng) -> RerankExample {
    let k = rng.gen_range(1..=16);
    let words = |rng: &mut ChaCha8Rng, n: usize| {
        (0..n)
            .map(|_| pseudo_word(rng.gen_range(0..60)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let prefix_len = rng.gen_range(0..50);
    let prefix_text = words(rng, prefix_len);
    let candidates = (0..k)
        .map(|rank| {
            let len = rng.gen_range(1..80);
            RerankCandidate {
                passage: Passage {
                    passage_id: rank,
                    source_doc_id: format!("d{rank}"),
                    title: None,
                    word_span: (0, len),
                    text: words(rng, len),
                },
                retriever_score: rng.gen_range(0.0..30.0),
                rank,
            }
        })
        .collect();
    let lm_logliks = (0..k).map(|_| rng.gen_range(-80.0..-1.0)).collect();
    RerankExample {
        prefix_text,
        candidates,
        lm_logliks,
        y_text: words(rng, 4),
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> PredictiveReranker {
    let mut m = PredictiveReranker::zeros();
    for w in &mut m.weights {
        *w = rng.gen_range(-3.0..3.0);
    }
    m.bias = rng.gen_range(-1.0..1.0);
    m
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn reranker_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for e in 0..100 {
        let ex = random_example(&mut rng);
        let model = random_model(&mut rng);
        let g = loss_and_grad(&ex, &model, DEFAULT_QUERY_LEN).map_err(|e| e.to_string())?;
        let loss_at = |m: &PredictiveReranker| {
            loss_and_grad(&ex, m, DEFAULT_QUERY_LEN)
                .unwrap()
                .unstabilized_loss()
        };
        for i in 0..=NUM_FEATURES {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            let analytic = if i < NUM_FEATURES {
                plus.weights[i] += FD_STEP;
                minus.weights[i] -= FD_STEP;
                g.grad_weights[i]
            } else {
                plus.bias += FD_STEP;
                minus.bias -= FD_STEP;
                g.grad_bias
            };
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * FD_STEP);
            let err = rel_err(analytic, numeric);
            worst = worst.max(err);
            ensure(err <= FD_REL_TOL, || {
                format!("example {e}, parameter {i}: analytic {analytic} vs numeric {numeric}")
            })?;
        }
        ensure(g.grad_bias.abs() <= BIAS_GRAD_TOL, || {
            format!("example {e}: bias gradient {}", g.grad_bias)
        })?;

        // Shifting every loglik by the same constant changes nothing. Values on
        // a dyadic grid keep the shift exact in floating point.
        let features: Vec<FeatureVector> = ex.features(DEFAULT_QUERY_LEN);
        let grid: Vec<f64> = ex
            .lm_logliks
            .iter()
            .map(|l| (l * 1024.0).round() / 1024.0)
            .collect();
        let shift = rng.gen_range(-500i32..500) as f64;
        let shifted: Vec<f64> = grid.iter().map(|l| l + shift).collect();
        let a = listwise_loss_and_grad(&features, &grid, &model).map_err(|e| e.to_string())?;
        let b = listwise_loss_and_grad(&features, &shifted, &model).map_err(|e| e.to_string())?;
        ensure(
            a.grad_logits == b.grad_logits && a.grad_weights == b.grad_weights,
            || format!("example {e}: gradients change under a shift of {shift}"),
        )?;
        ensure(a.loss == b.loss, || {
            format!("example {e}: loss changes under a shift")
        })?;
        let prefix = LmTokenizer.tokenize(&ex.prefix_text);
        let pick = predictive_rerank(&ex.candidates, &prefix, &model, DEFAULT_QUERY_LEN)
            .map_err(|e| e.to_string())?;
        let mut moved = ex.clone();
        moved.lm_logliks = shifted;
        ensure(
            moved.best_candidate()
                == RerankExample {
                    lm_logliks: grid,
                    ..ex.clone()
                }
                .best_candidate(),
            || format!("example {e}: oracle argmax changes under a shift"),
        )?;
        ensure(
            pick == predictive_rerank(&moved.candidates, &prefix, &model, DEFAULT_QUERY_LEN)
                .unwrap(),
            || format!("example {e}: reranker argmax changes under a shift"),
        )?;
    }
    Ok(format!("100 examples, worst relative error {worst:.1e}"))
}

fn reranker_training() -> Outcome {
    let batch = overlap_aligned_examples(200, 8, DEFAULT_QUERY_LEN, 21);
    let held_out = overlap_aligned_examples(200, 8, DEFAULT_QUERY_LEN, 22);
    let outcome = train(&batch, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let early = &outcome.loss_trajectory[..=100];
    if let Some(i) = early.windows(2).position(|w| w[1] > w[0]) {
        return Err(format!(
            "loss rose at step {}: {} -> {}",
            i + 1,
            early[i],
            early[i + 1]
        ));
    }
    let agree = held_out
        .iter()
        .filter(|ex| {
            let prefix = LmTokenizer.tokenize(&ex.prefix_text);
            predictive_rerank(&ex.candidates, &prefix, &outcome.model, DEFAULT_QUERY_LEN).unwrap()
                == ex.best_candidate()
        })
        .count();
    let rate = agree as f64 / held_out.len() as f64;
    let detail = format!(
        "held-out agreement {:.1}% (need {:.0}%), loss {:.4} -> {:.4}",
        100.0 * rate,
        100.0 * MIN_RERANK_AGREEMENT,
        outcome.loss_trajectory[0],
        outcome.loss_trajectory.last().unwrap()
    );
    ensure(rate >= MIN_RERANK_AGREEMENT, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Prompts

fn prompt_bytes() -> Outcome {
    let q = "Who got the first nobel prize in physics?";
    let closed = build_closed_book_prompt(q).map_err(|e| e.to_string())?;
    let want_closed = "Answer these questions:\nQ: Who got the first nobel prize in physics?\nA:";
    ensure(closed.as_bytes() == want_closed.as_bytes(), || {
        format!("closed-book: {closed:?}")
    })?;

    let t1 = "A group including 42 Swedish writers, artists, and literary critics protested against this decision, having expected Leo Tolstoy to be awarded. Some, including Burton Feldman, have criticised this prize because they...";
    let t2 = "In the last half century there has been an increasing tendency for scientists to work as teams, resulting in controversial exclusions. Alfred Nobel was born on 21 October 1833 in Stockholm, Sweden, into a family of engineers...";
    let open = build_open_book_prompt(
        &[
            ("Nobel Prize", t1),
            ("Nobel Prize in Physiology or Medicine", t2),
        ],
        q,
    )
    .map_err(|e| e.to_string())?;
    let want_open = format!(
        "Nobel Prize\n\n{t1}\n\nNobel Prize in Physiology or Medicine\n\n{t2}\n\nBased on these texts, answer these questions:\nQ: Who got the first nobel prize in physics?\nA:"
    );
    ensure(open.as_bytes() == want_open.as_bytes(), || {
        format!("open-book: {open:?}")
    })?;
    Ok(format!(
        "closed {} bytes, open {} bytes",
        closed.len(),
        open.len()
    ))
}

// ---------------------------------------------------------------------------
// Wire protocol

/// Deterministic scripted backend: whitespace tokens, each scored by its
/// length, window of 64 tokens.
struct ScriptedLm {
    corrupt_sum: bool,
}

impl ScriptedLm {
    const WINDOW: usize = 64;
}

impl LmBackend for ScriptedLm {
    fn info(&self) -> RalmResult<LmInfo> {
        Ok(LmInfo {
            name: "scripted".into(),
            max_context_tokens: Self::WINDOW,
        })
    }

    fn score(&self, req: &LmScoreRequest) -> RalmResult<LmScoreResult> {
        let ctx = req.context.split_whitespace().count();
        let cont: Vec<&str> = req.continuation.split_whitespace().collect();
        if cont.is_empty() {
            return Err(RalmError::InvalidArgument("empty continuation".into()));
        }
        if !self.corrupt_sum && ctx + cont.len() > Self::WINDOW {
            return Err(RalmError::ContextOverflow {
                needed: ctx + cont.len(),
                window: Self::WINDOW,
            });
        }
        let mut r = LmScoreResult::from_logprobs(
            cont.iter().map(|w| -0.25 * w.len() as f64 - 0.5).collect(),
        );
        if self.corrupt_sum {
            r.logprob_sum -= 1.0;
        }
        Ok(r)
    }

    fn generate(&self, req: &GenerateRequest) -> RalmResult<String> {
        let words: Vec<&str> = req.prompt.split_whitespace().collect();
        Ok(words
            .iter()
            .rev()
            .take(req.max_new_tokens)
            .copied()
            .collect::<Vec<_>>()
            .join(" "))
    }
}

fn protocol_conformance() -> Outcome {
    let mut seen = HashMap::new();
    let scripted = ralm_core::server::serve(
        Arc::new(ScriptedLm { corrupt_sum: false }),
        "127.0.0.1:0",
        2,
    )
    .map_err(|e| e.to_string())?;
    let builtin_lm = CacheNGramLm::train(
        "the cat sat on the mat . the dog sat",
        NGramConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let builtin = ralm_core::server::serve(Arc::new(builtin_lm), "127.0.0.1:0", 2)
        .map_err(|e| e.to_string())?;
    for (name, handle) in [("scripted mock", &scripted), ("built-in model", &builtin)] {
        let report = run_conformance(&RemoteLm::new(handle.url()).map_err(|e| e.to_string())?);
        let failed: Vec<String> = report
            .failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        ensure(failed.is_empty(), || format!("{name} failed {failed:?}"))?;
        seen.insert(name, report.checks.len());
    }
    let broken =
        ralm_core::server::serve(Arc::new(ScriptedLm { corrupt_sum: true }), "127.0.0.1:0", 1)
            .map_err(|e| e.to_string())?;
    let report = run_conformance(&RemoteLm::new(broken.url()).map_err(|e| e.to_string())?);
    let caught: Vec<&str> = report.failures().map(|c| c.name).collect();
    ensure(
        caught.contains(&"score-schema") && caught.contains(&"overflow-400"),
        || format!("broken server not caught, failures {caught:?}"),
    )?;
    Ok(format!(
        "{} checks pass on the scripted mock and the built-in model; broken mock fails {caught:?}",
        seen["scripted mock"]
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 9] = [
        ("bm25-oracle-equivalence", bm25_oracle),
        ("no-retrieval-identity", no_retrieval_identity),
        ("retrieval-helps", retrieval_helps),
        ("oracle-dominance", oracle_dominance),
        ("stride-trend", stride_trend),
        ("reranker-gradient", reranker_gradient),
        ("reranker-training", reranker_training),
        ("prompt-byte-exactness", prompt_bytes),
        ("protocol-conformance", protocol_conformance),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
