use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use ralm_core::bm25::{Bm25Params, InvertedIndex};
use ralm_core::conformance::run_conformance;
use ralm_core::corpus::{
    chunk_documents, exclude_documents, ingest as read_documents, load_passages, persist_passages,
    read_blocklist, PassageSet,
};
use ralm_core::engine::{self, RalmConfig, RerankMode, Rerankers, Retriever};
use ralm_core::lm::{Backend, CacheNGramLm, LmBackend, NGramConfig, RemoteLm};
use ralm_core::odqa::{self, QaConfig};
use ralm_core::rerank::{self, CollectConfig, PredictiveReranker, TrainConfig};
use ralm_core::text::AnalyzerOptions;
use ralm_core::RalmError;

use crate::args::*;
use crate::failure::{need, Failure};
use crate::manifest::{file_fingerprint, write_report, write_sidecar, BackendInfo, RunManifest};
use crate::settings::Resolver;

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| RalmError::io(path, e).into())
}

fn print_summary(value: serde_json::Value) {
    println!("{value}");
}

fn new_manifest<C: serde::Serialize>(ctx: &Resolver, config: &C) -> RunManifest {
    let mut m = RunManifest::new(ctx.command(), config);
    if let Some(p) = ctx.config_path() {
        if let Ok(fp) = file_fingerprint(p) {
            m.inputs.insert("config".into(), fp);
        }
    }
    m
}

/// Parses `builtin:PATH`, `http:URL`, or a bare `http://` URL.
fn open_backend(spec: &str) -> Result<(Backend, BackendInfo), Failure> {
    let (backend, fingerprint) = if let Some(path) = spec.strip_prefix("builtin:") {
        let path = Path::new(path);
        let model = CacheNGramLm::load(path)?;
        (Backend::Builtin(model), Some(file_fingerprint(path)?))
    } else if spec.starts_with("http://") || spec.starts_with("https://") {
        (Backend::Remote(RemoteLm::new(spec)?), None)
    } else if let Some(url) = spec.strip_prefix("http:") {
        (Backend::Remote(RemoteLm::new(url)?), None)
    } else {
        return Err(Failure::usage(format!(
            "backend must be builtin:PATH or http:URL, got {spec:?}"
        )));
    };
    let info = backend.info()?.validate()?;
    Ok((
        backend,
        BackendInfo {
            spec: spec.to_string(),
            name: info.name,
            max_context_tokens: info.max_context_tokens,
            model_fingerprint: fingerprint,
        },
    ))
}

struct Retrieval {
    index: InvertedIndex,
    passages: PassageSet,
}

impl Retrieval {
    fn open(
        index: Option<&Path>,
        passages: Option<&Path>,
        manifest: &mut RunManifest,
    ) -> Result<Self, Failure> {
        let index_path = need(index, "--index")?;
        let passages_path = need(passages, "--passages")?;
        let index = InvertedIndex::load(index_path)?;
        let passages = load_passages(passages_path)?;
        index.check_corpus(&passages)?;
        manifest.corpus_fingerprint = Some(passages.fingerprint().to_string());
        manifest.index_fingerprint = Some(file_fingerprint(index_path)?);
        Ok(Retrieval { index, passages })
    }

    fn retriever(&self) -> Result<Retriever<'_>, Failure> {
        Ok(Retriever::new(&self.index, &self.passages)?)
    }
}

pub fn ingest(args: IngestArgs, ctx: &Resolver) -> Outcome {
    let corpus = need(args.corpus.as_deref(), "--corpus")?;
    let out = need(args.out.as_deref(), "--out")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("corpus", corpus)?;
    let docs = read_documents(corpus)?;
    let total = docs.len();
    let (docs, removed, warnings) = match args.exclude.as_deref() {
        Some(path) => {
            manifest.input("exclude", path)?;
            let ex = exclude_documents(docs, &read_blocklist(path)?);
            (ex.kept, ex.removed_count, ex.warnings)
        }
        None => (docs, 0, Vec::new()),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let set = chunk_documents(&docs, args.words_per_passage)?;
    persist_passages(&set, out)?;
    manifest.corpus_fingerprint = Some(set.fingerprint().to_string());
    write_sidecar(out, &manifest)?;
    print_summary(json!({
        "documents": total,
        "excluded": removed,
        "passages": set.len(),
        "fingerprint": set.fingerprint(),
        "warnings": warnings,
    }));
    Ok(())
}

pub fn index(args: IndexArgs, ctx: &Resolver) -> Outcome {
    let passages_path = need(args.passages.as_deref(), "--passages")?;
    let out = need(args.out.as_deref(), "--out")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("passages", passages_path)?;
    let set = load_passages(passages_path)?;
    let params = Bm25Params {
        k1: args.k1,
        b: args.b,
    };
    let analyzer = AnalyzerOptions {
        remove_stopwords: args.remove_stopwords,
        stem: args.stem,
    };
    let index = InvertedIndex::build_with(&set, params, analyzer)?;
    index.persist(out)?;
    manifest.corpus_fingerprint = Some(set.fingerprint().to_string());
    manifest.index_fingerprint = Some(file_fingerprint(out)?);
    write_sidecar(out, &manifest)?;
    print_summary(json!({
        "passages": index.num_passages(),
        "terms": index.num_terms(),
        "avgdl": index.avgdl(),
    }));
    Ok(())
}

pub fn search(args: SearchArgs, ctx: &Resolver) -> Outcome {
    let index_path = need(args.index.as_deref(), "--index")?;
    let query = need(args.query.as_deref(), "--query")?;
    let mut manifest = new_manifest(ctx, &args);
    let index = InvertedIndex::load(index_path)?;
    manifest.index_fingerprint = Some(file_fingerprint(index_path)?);
    let passages = match args.passages.as_deref() {
        Some(p) => {
            let set = load_passages(p)?;
            index.check_corpus(&set)?;
            manifest.corpus_fingerprint = Some(set.fingerprint().to_string());
            Some(set)
        }
        None => None,
    };
    let hits: Vec<_> = index
        .search(query, args.k)
        .into_iter()
        .map(|r| {
            let mut hit = json!({ "passage_id": r.passage_id, "score": r.score });
            if let Some(p) = passages.as_ref().and_then(|s| s.get(r.passage_id)) {
                hit["title"] = json!(p.title);
                hit["text"] = json!(p.text);
            }
            hit
        })
        .collect();
    print_summary(json!({ "manifest": manifest, "result": hits }));
    Ok(())
}

pub fn lm_train(args: LmTrainArgs, ctx: &Resolver) -> Outcome {
    let corpus = need(args.corpus.as_deref(), "--corpus")?;
    let out = need(args.out.as_deref(), "--out")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("corpus", corpus)?;
    let cfg = NGramConfig {
        order: args.order,
        alpha: args.alpha,
        weights: None,
        cache_lambda: args.lambda,
        cache_gamma: args.gamma,
        max_context_tokens: args.max_context_tokens,
    };
    let mut model = CacheNGramLm::train(&read_text(corpus)?, cfg)?;
    if let Some(name) = &args.name {
        model = model.with_name(name.clone());
    }
    model.save(out)?;
    write_sidecar(out, &manifest)?;
    print_summary(json!({ "vocab_size": model.vocab_size(), "out": out }));
    Ok(())
}

fn engine_config(e: &EngineArgs) -> RalmConfig {
    RalmConfig {
        stride: e.stride,
        query_len: e.query_len,
        top_k: e.topk,
        rerank_mode: e.rerank,
        rerank_window: e.rerank_window,
        max_passage_tokens: e.max_passage_tokens,
        retrieval_enabled: !e.no_retrieval,
    }
}

/// Backends, index and reranker models for one engine run.
struct EngineSetup {
    generator: Backend,
    zero_shot: Option<Backend>,
    predictive: Option<PredictiveReranker>,
    retrieval: Option<Retrieval>,
    config: RalmConfig,
}

impl EngineSetup {
    fn open(e: &EngineArgs, manifest: &mut RunManifest) -> Result<Self, Failure> {
        let config = engine_config(e);
        config.validate()?;
        if e.rerank == RerankMode::Predictive && e.rerank_model.is_none() {
            return Err(Failure::usage(
                "--rerank predictive requires --rerank-model",
            ));
        }
        if e.rerank_backend.is_some() && e.rerank != RerankMode::ZeroShot {
            return Err(Failure::usage(
                "--rerank-backend only applies to --rerank zero-shot",
            ));
        }
        let retrieval = if e.no_retrieval {
            None
        } else {
            Some(Retrieval::open(
                e.index.as_deref(),
                e.passages.as_deref(),
                manifest,
            )?)
        };
        let (generator, info) = open_backend(&need(e.backend.clone(), "--backend")?)?;
        manifest.backend = Some(info);
        let zero_shot = match &e.rerank_backend {
            Some(spec) => {
                let (b, info) = open_backend(spec)?;
                manifest.rerank_backend = Some(info);
                Some(b)
            }
            None => None,
        };
        let predictive = match &e.rerank_model {
            Some(path) if e.rerank == RerankMode::Predictive => {
                manifest.input("rerank-model", path)?;
                Some(PredictiveReranker::load(path)?)
            }
            _ => None,
        };
        Ok(EngineSetup {
            generator,
            zero_shot,
            predictive,
            retrieval,
            config,
        })
    }

    fn retriever(&self) -> Result<Option<Retriever<'_>>, Failure> {
        self.retrieval
            .as_ref()
            .map(Retrieval::retriever)
            .transpose()
    }

    fn rerankers(&self) -> Rerankers<'_> {
        Rerankers {
            zero_shot: self.zero_shot.as_ref().map(|b| b as &dyn LmBackend),
            predictive: self.predictive.as_ref(),
        }
    }
}

pub fn eval_ppl(args: EvalPplArgs, ctx: &Resolver) -> Outcome {
    let text_path = need(args.text.as_deref(), "--text")?;
    let report_path = need(args.report.as_deref(), "--report")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("text", text_path)?;
    let setup = EngineSetup::open(&args.engine, &mut manifest)?;
    let text = read_text(text_path)?;
    let report = engine::evaluate_perplexity(
        &text,
        setup.retriever()?,
        &setup.generator,
        &setup.config,
        setup.rerankers(),
    )?;
    write_report(report_path, &manifest, &report)?;
    print_summary(json!({
        "token_ppl": report.token_ppl,
        "word_ppl": report.word_ppl,
        "tokens": report.token_count,
        "words": report.word_count,
        "report": report_path,
    }));
    Ok(())
}

fn parse_values(csv: &str) -> Result<Vec<usize>, Failure> {
    csv.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<usize>().map_err(|_| {
                Failure::usage(format!("--values: {v:?} is not a nonnegative integer"))
            })
        })
        .collect()
}

pub fn sweep(args: SweepArgs, ctx: &Resolver) -> Outcome {
    let text_path = need(args.text.as_deref(), "--text")?;
    let axis = need(args.axis, "--axis")?;
    let values = parse_values(&need(args.values.clone(), "--values")?)?;
    let report_path = need(args.report.as_deref(), "--report")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("text", text_path)?;
    let setup = EngineSetup::open(&args.engine, &mut manifest)?;
    let text = read_text(text_path)?;
    let rows = engine::sweep(
        &text,
        setup.retriever()?,
        &setup.generator,
        axis,
        &values,
        &setup.config,
        setup.rerankers(),
    )?;
    write_report(report_path, &manifest, &rows)?;
    if let Some(csv) = args.csv.as_deref() {
        fs::write(csv, engine::sweep_to_csv(&rows)).map_err(|e| RalmError::io(csv, e))?;
    }
    print_summary(json!({ "rows": rows.len(), "report": report_path }));
    Ok(())
}

pub fn rerank_collect(args: RerankCollectArgs, ctx: &Resolver) -> Outcome {
    let corpus = need(args.corpus.as_deref(), "--corpus")?;
    let out = need(args.out.as_deref(), "--out")?;
    if args.engine.no_retrieval {
        return Err(Failure::usage(
            "rerank-collect needs retrieval; drop --no-retrieval",
        ));
    }
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("corpus", corpus)?;
    let setup = EngineSetup::open(&args.engine, &mut manifest)?;
    let text = read_text(corpus)?;
    let retriever = setup.retriever()?.expect("retrieval is enabled");
    let examples = rerank::collect_training_examples(
        &text,
        retriever,
        &setup.generator,
        &setup.config,
        CollectConfig {
            num_examples: args.num,
            seed: args.seed,
        },
    )?;
    rerank::save_examples(&examples, out)?;
    write_sidecar(out, &manifest)?;
    print_summary(json!({ "examples": examples.len(), "out": out }));
    Ok(())
}

pub fn rerank_train(args: RerankTrainArgs, ctx: &Resolver) -> Outcome {
    let examples_path = need(args.examples.as_deref(), "--examples")?;
    let out = need(args.out.as_deref(), "--out")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("examples", examples_path)?;
    let examples = rerank::load_examples(examples_path)?;
    let cfg = TrainConfig {
        lr: args.lr,
        steps: args.steps,
        seed: args.seed,
        query_len: args.query_len,
    };
    let outcome = rerank::train(&examples, &cfg)?;
    outcome.model.save(out)?;
    write_sidecar(out, &manifest)?;
    let first = outcome.loss_trajectory.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_trajectory.last().copied().unwrap_or(f64::NAN);
    print_summary(json!({
        "examples": examples.len(),
        "initial_loss": first,
        "final_loss": last,
        "out": out,
    }));
    Ok(())
}

pub fn odqa(args: OdqaArgs, ctx: &Resolver) -> Outcome {
    let questions = need(args.questions.as_deref(), "--questions")?;
    let report_path = need(args.report.as_deref(), "--report")?;
    let mut manifest = new_manifest(ctx, &args);
    manifest.input("questions", questions)?;
    let items = odqa::load_questions(questions)?;
    let retrieval = if args.open_book {
        Some(Retrieval::open(
            args.index.as_deref(),
            args.passages.as_deref(),
            &mut manifest,
        )?)
    } else {
        if args.index.is_some() {
            log::warn!("--index is ignored without --open-book");
        }
        None
    };
    let (backend, info) = open_backend(&need(args.backend.clone(), "--backend")?)?;
    manifest.backend = Some(info);
    let cfg = QaConfig {
        num_docs: args.num_docs,
        max_new_tokens: args.max_new_tokens,
        max_passage_tokens: args.max_passage_tokens,
    };
    let retriever = retrieval.as_ref().map(Retrieval::retriever).transpose()?;
    let report = odqa::evaluate_qa(&items, retriever, &backend, &cfg)?;
    write_report(report_path, &manifest, &report)?;
    print_summary(json!({
        "exact_match": report.exact_match,
        "items": report.num_items,
        "report": report_path,
    }));
    Ok(())
}

pub fn serve(args: ServeArgs) -> Outcome {
    let model_path = need(args.model.as_deref(), "--model")?;
    let model = CacheNGramLm::load(model_path)?;
    let handle = ralm_core::server::serve(Arc::new(model), &args.addr, args.workers)?;
    print_summary(json!({ "listening": handle.url() }));
    handle.join();
    Ok(())
}

pub fn conformance(args: ConformanceArgs) -> Outcome {
    let url = need(args.url.as_deref(), "--url")?;
    let report = run_conformance(&RemoteLm::new(url)?);
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().map(|c| c.name).collect();
        Err(Failure::backend(format!(
            "conformance failed: {}",
            failed.join(", ")
        )))
    }
}
