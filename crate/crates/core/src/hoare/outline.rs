//! Executable proof outlines: a JSON list of steps, each applying an
//! inference rule (or a semantic discharge, or a predicate rewrite) and
//! declaring its conclusion. The checker re-derives every step and compares
//! against the declaration.
//!
//! Step schema:
//!
//! ```json
//! {
//!   "rule": "Ax.UTF'",
//!   "premises": [0],
//!   "witnesses": { "ket": "ket(x,0)", "operator": "...", "scalars": [..],
//!                  "labels": ["z"] },
//!   "conclusion": { "pre": "1", "post": "proj(x,0)", "span": [0, 2],
//!                   "mode": "total", "saturated": true,
//!                   "pre_state": null, "post_state": null }
//! }
//! ```
//!
//! `span` selects the top-level statements `[from, to)` of the program under
//! check. The pseudo-rules `semantic` (discharge by the validity checker)
//! and `rewrite` (pre/post replaced by numerically equal expressions)
//! complement the inference rules. `pre_state`/`post_state` give conclusions
//! in state form: the declared operator is the outer product of the parsed
//! ket.

use super::rules::{apply_rule, RuleArgs, RuleId};
use super::{check_valid, HoareError, Judgment, Mode, Result, Saturation};
use crate::config::Config;
use crate::dirac::{parse::parse_assertion, LabelSet, LabelledOperator};
use crate::qwhile::parse::ParsedProgram;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct OutlineFile {
    steps: Vec<OutlineStep>,
}

#[derive(Debug, Deserialize)]
struct OutlineStep {
    rule: String,
    #[serde(default)]
    premises: Vec<usize>,
    #[serde(default)]
    witnesses: Witnesses,
    conclusion: DeclaredJudgment,
}

#[derive(Debug, Default, Deserialize)]
struct Witnesses {
    operator: Option<String>,
    operator2: Option<String>,
    #[serde(default)]
    operators: Vec<String>,
    ket: Option<String>,
    #[serde(default)]
    scalars: Vec<f64>,
    #[serde(default)]
    labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct DeclaredJudgment {
    #[serde(default)]
    pre: Option<String>,
    #[serde(default)]
    post: Option<String>,
    #[serde(default)]
    pre_state: Option<String>,
    #[serde(default)]
    post_state: Option<String>,
    span: [usize; 2],
    mode: String,
    #[serde(default)]
    saturated: bool,
}

/// Per-step verdict of an outline run.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub index: usize,
    pub rule: String,
    pub ok: bool,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct OutlineReport {
    pub steps: Vec<StepResult>,
}

impl OutlineReport {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| s.ok)
    }
}

fn step_err(index: usize, reason: impl Into<String>) -> HoareError {
    HoareError::StepFailed { index, reason: reason.into() }
}

fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "total" | "t" => Some(Mode::Total),
        "partial" | "p" => Some(Mode::Partial),
        _ => None,
    }
}

fn declared_judgment(
    parsed: &ParsedProgram,
    decl: &DeclaredJudgment,
    index: usize,
) -> Result<Judgment> {
    let program = parsed
        .span_program(decl.span[0], decl.span[1])
        .ok_or_else(|| step_err(index, format!("bad span {:?}", decl.span)))?;
    let mode = parse_mode(&decl.mode)
        .ok_or_else(|| step_err(index, format!("bad mode `{}`", decl.mode)))?;
    let st = if decl.saturated { Saturation::Saturated } else { Saturation::Plain };
    let side = |text: &Option<String>, state: &Option<String>, what: &str| -> Result<LabelledOperator> {
        if let Some(src) = state {
            let ket = parse_assertion(src, &parsed.table)
                .map_err(|e| step_err(index, format!("{what}_state: {e}")))?;
            return Ok(ket.outer_with_self()?);
        }
        let src = text
            .as_ref()
            .ok_or_else(|| step_err(index, format!("missing {what} in conclusion")))?;
        parse_assertion(src, &parsed.table).map_err(|e| step_err(index, format!("{what}: {e}")))
    };
    let pre = side(&decl.pre, &decl.pre_state, "pre")?;
    let post = side(&decl.post, &decl.post_state, "post")?;
    Judgment::new(pre, program, post, mode, st)
}

fn build_args(
    parsed: &ParsedProgram,
    w: &Witnesses,
    conclusion: &Judgment,
    index: usize,
) -> Result<RuleArgs> {
    let parse = |src: &String| {
        parse_assertion(src, &parsed.table)
            .map_err(|e| step_err(index, format!("witness `{src}`: {e}")))
    };
    let mut labels = LabelSet::empty();
    for name in &w.labels {
        let id = parsed
            .table
            .lookup(name)
            .ok_or_else(|| step_err(index, format!("unknown variable `{name}` in labels")))?;
        labels = labels.union(&LabelSet::from_slice(&parsed.table.var(id).labels));
    }
    Ok(RuleArgs {
        program: Some(conclusion.program.clone()),
        operator: w.operator.as_ref().map(parse).transpose()?,
        operator2: w.operator2.as_ref().map(parse).transpose()?,
        operators: w.operators.iter().map(parse).collect::<Result<_>>()?,
        ket: w.ket.as_ref().map(parse).transpose()?,
        scalars: w.scalars.clone(),
        labels: if w.labels.is_empty() { None } else { Some(labels) },
        channel: None,
        mode: Some(conclusion.mode),
        saturation: Some(conclusion.saturation),
    })
}

fn eq_ext_j(a: &LabelledOperator, b: &LabelledOperator, parsed: &ParsedProgram, tol: f64) -> bool {
    let union = a.out_labels().union(b.out_labels());
    match (a.cyl_extend(&parsed.table, &union), b.cyl_extend(&parsed.table, &union)) {
        (Ok(x), Ok(y)) => x.approx_eq(&y, tol),
        _ => false,
    }
}

/// Runs every step of an outline against a parsed program. Steps after the
/// first failure are not attempted (their premises may be unfounded).
pub fn check_outline(parsed: &ParsedProgram, json: &str, cfg: &Config) -> Result<OutlineReport> {
    let file: OutlineFile = serde_json::from_str(json)
        .map_err(|e| step_err(0, format!("outline is not valid JSON: {e}")))?;
    let mut established: Vec<Judgment> = Vec::new();
    let mut report = OutlineReport { steps: Vec::new() };
    for (index, step) in file.steps.iter().enumerate() {
        let outcome = run_step(parsed, step, &established, index, cfg);
        match outcome {
            Ok(judgment) => {
                established.push(judgment);
                report.steps.push(StepResult {
                    index,
                    rule: step.rule.clone(),
                    ok: true,
                    message: "ok".into(),
                });
            }
            Err(e) => {
                report.steps.push(StepResult {
                    index,
                    rule: step.rule.clone(),
                    ok: false,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(report)
}

fn run_step(
    parsed: &ParsedProgram,
    step: &OutlineStep,
    established: &[Judgment],
    index: usize,
    cfg: &Config,
) -> Result<Judgment> {
    let declared = declared_judgment(parsed, &step.conclusion, index)?;
    let premises: Vec<Judgment> = step
        .premises
        .iter()
        .map(|&i| {
            established
                .get(i)
                .cloned()
                .ok_or_else(|| step_err(index, format!("premise {i} not yet established")))
        })
        .collect::<Result<_>>()?;

    match step.rule.as_str() {
        "semantic" => {
            let verdict = check_valid(&declared, &parsed.table, cfg)
                .map_err(|e| step_err(index, format!("semantic check failed: {e}")))?;
            if !verdict.is_valid() {
                return Err(step_err(
                    index,
                    format!("judgment is not semantically valid (slack {:.3e})", verdict.slack),
                ));
            }
            Ok(declared)
        }
        "rewrite" => {
            let j = premises
                .first()
                .ok_or_else(|| step_err(index, "rewrite needs one premise"))?;
            if j.program != declared.program {
                return Err(step_err(index, "rewrite changes the program"));
            }
            if j.mode != declared.mode || j.saturation != declared.saturation {
                return Err(step_err(index, "rewrite changes the judgment mode"));
            }
            if !eq_ext_j(&j.pre, &declared.pre, parsed, cfg.eq_tol) {
                return Err(step_err(index, "rewritten precondition differs numerically"));
            }
            if !eq_ext_j(&j.post, &declared.post, parsed, cfg.eq_tol) {
                return Err(step_err(index, "rewritten postcondition differs numerically"));
            }
            Ok(declared)
        }
        name => {
            let rule = RuleId::parse(name)?;
            let args = build_args(parsed, &step.witnesses, &declared, index)?;
            let derived = apply_rule(rule, &premises, &args, &parsed.table, cfg)
                .map_err(|e| step_err(index, e.to_string()))?;
            if derived.program != declared.program {
                return Err(step_err(index, "derived program differs from the declared span"));
            }
            if derived.mode != declared.mode || derived.saturation != declared.saturation {
                return Err(step_err(index, "derived mode differs from the declaration"));
            }
            if !eq_ext_j(&derived.pre, &declared.pre, parsed, cfg.eq_tol) {
                return Err(step_err(index, "derived precondition differs from the declaration"));
            }
            if !eq_ext_j(&derived.post, &declared.post, parsed, cfg.eq_tol) {
                return Err(step_err(index, "derived postcondition differs from the declaration"));
            }
            Ok(declared)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qwhile::parse::parse_program;
    use std::collections::HashMap;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn empty_outline_passes() {
        let p = parse_program("var x : bool; skip;", &HashMap::new()).unwrap();
        let report = check_outline(&p, r#"{"steps": []}"#, &cfg()).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn hadamard_outline_with_rewrite() {
        let p = parse_program("var x : bool; x := |0>; x := H[x];", &HashMap::new()).unwrap();
        let outline = r#"{
          "steps": [
            {"rule": "Ax.InF'", "witnesses": {"ket": "1"},
             "conclusion": {"pre": "1", "post": "proj(x,0)", "span": [0,1],
                            "mode": "total", "saturated": true}},
            {"rule": "Ax.UTF'", "premises": [0], "witnesses": {"ket": "ket(x,0)"},
             "conclusion": {"pre_state": "ket(x,0)",
                            "post_state": "1/sqrt(2)*(ket(x,0)+ket(x,1))",
                            "span": [1,2], "mode": "total", "saturated": true}},
            {"rule": "R.SC", "premises": [0, 1],
             "conclusion": {"pre": "1",
                            "post_state": "1/sqrt(2)*(ket(x,0)+ket(x,1))",
                            "span": [0,2], "mode": "total", "saturated": true}},
            {"rule": "rewrite", "premises": [2],
             "conclusion": {"pre": "1",
                            "post": "1/2*(proj(x,0)+proj(x,1)+ket(x,0)*bra(x,1)+ket(x,1)*bra(x,0))",
                            "span": [0,2], "mode": "total", "saturated": true}}
          ]
        }"#;
        let report = check_outline(&p, outline, &cfg()).unwrap();
        for s in &report.steps {
            assert!(s.ok, "step {}: {}", s.index, s.message);
        }
    }

    #[test]
    fn tampered_rewrite_fails() {
        let p = parse_program("var x : bool; x := |0>;", &HashMap::new()).unwrap();
        let outline = r#"{
          "steps": [
            {"rule": "Ax.InF'", "witnesses": {"ket": "1"},
             "conclusion": {"pre": "1", "post": "proj(x,0)", "span": [0,1],
                            "mode": "total", "saturated": true}},
            {"rule": "rewrite", "premises": [0],
             "conclusion": {"pre": "1", "post": "proj(x,1)", "span": [0,1],
                            "mode": "total", "saturated": true}}
          ]
        }"#;
        let report = check_outline(&p, outline, &cfg()).unwrap();
        assert!(!report.passed());
        assert!(report.steps[0].ok);
        assert!(!report.steps[1].ok);
        assert_eq!(report.steps.len(), 2);
    }

    #[test]
    fn semantic_step_discharges_loop() {
        let src = "var x : bool; x := |0>; x := H[x]; while meas [x] = 1 { x := H[x]; }";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let outline = r#"{
          "steps": [
            {"rule": "semantic",
             "conclusion": {"pre": "1", "post": "proj(x,0)", "span": [0,3],
                            "mode": "total", "saturated": true}}
          ]
        }"#;
        let report = check_outline(&p, outline, &cfg()).unwrap();
        assert!(report.passed(), "{:?}", report.steps);
    }
}
