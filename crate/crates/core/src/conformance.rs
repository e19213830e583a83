//! Protocol conformance checks for a scoring server.

use serde::Serialize;
use serde_json::Value;

use crate::lm::{LmBackend, LmScoreRequest, RemoteLm};

/// Tolerance for `logprob_sum` against the sum of per-token values.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Tolerance for score additivity across a split continuation; loose enough
/// for tokenizers that merge across the split point.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub url: String,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Check = Result<String, String>;

fn parse_json(status: u16, body: &str, want_status: u16) -> Result<Value, String> {
    if status != want_status {
        return Err(format!("expected HTTP {want_status}, got {status}: {body}"));
    }
    serde_json::from_str(body).map_err(|e| format!("body is not JSON ({e}): {body}"))
}

fn check_info(client: &RemoteLm) -> Check {
    let (status, body) = client.get_raw("/v1/info").map_err(|e| e.to_string())?;
    let v = parse_json(status, &body, 200)?;
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .ok_or("missing string field name")?;
    let window = v
        .get("max_context_tokens")
        .and_then(Value::as_u64)
        .ok_or("missing integer field max_context_tokens")?;
    if window < 2 {
        return Err(format!("max_context_tokens = {window} < 2"));
    }
    Ok(format!("{name}, window {window}"))
}

fn score_value(client: &RemoteLm, context: &str, continuation: &str) -> Result<Value, String> {
    let body = serde_json::to_string(&LmScoreRequest::new(context, continuation)).unwrap();
    let (status, text) = client
        .post_raw("/v1/score", &body)
        .map_err(|e| e.to_string())?;
    parse_json(status, &text, 200)
}

fn validate_score(v: &Value) -> Result<(usize, Vec<f64>, f64), String> {
    let count = v
        .get("token_count")
        .and_then(Value::as_u64)
        .ok_or("missing integer field token_count")? as usize;
    let list: Vec<f64> = v
        .get("per_token_logprobs")
        .and_then(Value::as_array)
        .ok_or("missing array field per_token_logprobs")?
        .iter()
        .map(|x| x.as_f64().ok_or("non-numeric logprob"))
        .collect::<Result<_, _>>()?;
    let sum = v
        .get("logprob_sum")
        .and_then(Value::as_f64)
        .ok_or("missing number field logprob_sum")?;
    if count != list.len() {
        return Err(format!("token_count {count} but {} logprobs", list.len()));
    }
    if count == 0 {
        return Err("no tokens scored".into());
    }
    if list.iter().any(|l| !l.is_finite() || *l > 1e-9) {
        return Err(format!("logprobs must be finite and <= 0: {list:?}"));
    }
    let direct: f64 = list.iter().sum();
    if (direct - sum).abs() > SUM_TOLERANCE {
        return Err(format!("logprob_sum {sum} differs from the sum {direct}"));
    }
    Ok((count, list, sum))
}

fn check_score_schema(client: &RemoteLm) -> Check {
    let v = score_value(client, "the cat sat", "on the mat .")?;
    let (count, _, sum) = validate_score(&v)?;
    Ok(format!("{count} tokens, sum {sum}"))
}

fn check_empty_context(client: &RemoteLm) -> Check {
    let v = score_value(client, "", "the cat")?;
    validate_score(&v).map(|(n, _, _)| format!("{n} tokens"))
}

fn check_determinism(client: &RemoteLm) -> Check {
    let a = score_value(client, "once upon a time", "there was a cat")?;
    let b = score_value(client, "once upon a time", "there was a cat")?;
    if a != b {
        return Err(format!("responses differ: {a} vs {b}"));
    }
    Ok("identical responses".into())
}

fn check_additivity(client: &RemoteLm) -> Check {
    let ctx = "the cat sat";
    let whole = validate_score(&score_value(client, ctx, "on the mat")?)?.2;
    let u = validate_score(&score_value(client, ctx, "on the")?)?.2;
    let v = validate_score(&score_value(client, &format!("{ctx} on the"), "mat")?)?.2;
    let gap = (whole - u - v).abs();
    if gap > ADDITIVITY_TOLERANCE {
        return Err(format!(
            "score(ctx, u+v) - score(ctx, u) - score(ctx+u, v) = {gap}"
        ));
    }
    Ok(format!("gap {gap:e}"))
}

fn expect_error(status: u16, body: &str) -> Check {
    let v = parse_json(status, body, 400)?;
    let msg = v
        .get("error")
        .and_then(Value::as_str)
        .ok_or_else(|| format!("400 body lacks string field error: {body}"))?;
    Ok(msg.to_string())
}

fn check_overflow(client: &RemoteLm) -> Check {
    let window = client.info().map_err(|e| e.to_string())?.max_context_tokens;
    let continuation = vec!["the"; window + 8].join(" ");
    let body = serde_json::to_string(&LmScoreRequest::new("", continuation)).unwrap();
    let (status, text) = client
        .post_raw("/v1/score", &body)
        .map_err(|e| e.to_string())?;
    expect_error(status, &text)
}

fn check_malformed(client: &RemoteLm) -> Check {
    let (status, text) = client
        .post_raw("/v1/score", "{\"context\": 3}")
        .map_err(|e| e.to_string())?;
    expect_error(status, &text)
}

fn check_generate(client: &RemoteLm) -> Check {
    let body = r#"{"prompt":"the cat","max_new_tokens":3,"stop":"\n"}"#;
    let (status, text) = client
        .post_raw("/v1/generate", body)
        .map_err(|e| e.to_string())?;
    let v = parse_json(status, &text, 200)?;
    let out = v
        .get("text")
        .and_then(Value::as_str)
        .ok_or("missing string field text")?;
    if out.contains('\n') {
        return Err(format!(
            "generated text contains the stop sequence: {out:?}"
        ));
    }
    let (status2, text2) = client
        .post_raw("/v1/generate", body)
        .map_err(|e| e.to_string())?;
    if status2 != status || text2 != text {
        return Err("greedy generation is not deterministic".into());
    }
    Ok(format!("{out:?}"))
}

type CheckFn = fn(&RemoteLm) -> Check;

/// Runs every check against the server at `client`'s base URL.
pub fn run_conformance(client: &RemoteLm) -> ConformanceReport {
    let checks: [(&'static str, CheckFn); 8] = [
        ("info-schema", check_info),
        ("score-schema", check_score_schema),
        ("score-empty-context", check_empty_context),
        ("score-determinism", check_determinism),
        ("score-additivity", check_additivity),
        ("overflow-400", check_overflow),
        ("malformed-400", check_malformed),
        ("generate-schema", check_generate),
    ];
    ConformanceReport {
        url: client.base_url().to_string(),
        checks: checks
            .iter()
            .map(|(name, f)| {
                let (passed, detail) = match f(client) {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                CheckResult {
                    name,
                    passed,
                    detail,
                }
            })
            .collect(),
    }
}
