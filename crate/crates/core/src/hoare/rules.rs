//! The rule-application proof checker: each inference rule takes premise
//! judgments plus side-condition witnesses, verifies the side conditions
//! numerically, and constructs the conclusion judgment.

use super::{
    is_effect_labelled, is_positive_labelled, loewner_leq_labelled, pure_ket_of, HoareError,
    Judgment, Mode, Result, Saturation,
};
use crate::config::Config;
use crate::dirac::{LabelSet, LabelledOperator, VarTable};
use crate::linalg::{re, Scalar};
use crate::qwhile::Program;
use crate::semantics::SuperOperator;

/// Identifiers of the supported inference rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    AxSk,
    AxIn,
    AxInF,
    AxUT,
    AxUTF,
    RSc,
    RIf,
    RLpP,
    ROr,
    RScaleT,
    RAddT,
    RCcP,
    RSt,
    RNoLp,
    AxInv,
    RSo,
    REl,
    REr,
    RTi,
    FrameT,
    FrameP,
    RPcT,
    RPcP,
    AxUtp,
    AxUtfp,
    AxInp,
    AxInfp,
    RInner,
    AxUTFState,
    AxInFState,
    AxUtfpState,
    AxInfpState,
}

/// All rules, paired with their surface names.
pub const ALL_RULES: &[(RuleId, &str)] = &[
    (RuleId::AxSk, "Ax.Sk"),
    (RuleId::AxIn, "Ax.In"),
    (RuleId::AxInF, "Ax.InF"),
    (RuleId::AxUT, "Ax.UT"),
    (RuleId::AxUTF, "Ax.UTF"),
    (RuleId::RSc, "R.SC"),
    (RuleId::RIf, "R.IF"),
    (RuleId::RLpP, "R.LP.P"),
    (RuleId::ROr, "R.Or"),
    (RuleId::RScaleT, "R.Scale.T"),
    (RuleId::RAddT, "R.Add.T"),
    (RuleId::RCcP, "R.CC.P"),
    (RuleId::RSt, "R.ST"),
    (RuleId::RNoLp, "R.No.LP"),
    (RuleId::AxInv, "Ax.Inv"),
    (RuleId::RSo, "R.SO"),
    (RuleId::REl, "R.El"),
    (RuleId::REr, "R.Er"),
    (RuleId::RTi, "R.TI"),
    (RuleId::FrameT, "Frame.T"),
    (RuleId::FrameP, "Frame.P"),
    (RuleId::RPcT, "R.PC.T"),
    (RuleId::RPcP, "R.PC.P"),
    (RuleId::AxUtp, "Ax.UTP"),
    (RuleId::AxUtfp, "Ax.UTFP"),
    (RuleId::AxInp, "Ax.InP"),
    (RuleId::AxInfp, "Ax.InFP"),
    (RuleId::RInner, "R.Inner"),
    (RuleId::AxUTFState, "Ax.UTF'"),
    (RuleId::AxInFState, "Ax.InF'"),
    (RuleId::AxUtfpState, "Ax.UTFP'"),
    (RuleId::AxInfpState, "Ax.InFP'"),
];

impl RuleId {
    pub fn name(self) -> &'static str {
        ALL_RULES.iter().find(|(r, _)| *r == self).map(|(_, n)| *n).unwrap()
    }

    pub fn parse(name: &str) -> Result<RuleId> {
        ALL_RULES
            .iter()
            .find(|(_, n)| *n == name)
            .map(|(r, _)| *r)
            .ok_or_else(|| HoareError::UnknownRule(name.into()))
    }
}

/// Side-condition witnesses and rule parameters. Which fields a rule reads
/// is documented per rule in [`apply_rule`].
#[derive(Debug, Clone, Default)]
pub struct RuleArgs {
    /// The program fragment an axiom concludes about.
    pub program: Option<Program>,
    /// Primary operand (`A`, or the frame `R`).
    pub operator: Option<LabelledOperator>,
    /// Secondary operand (`B`).
    pub operator2: Option<LabelledOperator>,
    /// Operator family (`A_i` in parallel rules).
    pub operators: Vec<LabelledOperator>,
    /// State witness (`u` in R.Inner, `v` in primed rules).
    pub ket: Option<LabelledOperator>,
    /// Scalar weights.
    pub scalars: Vec<f64>,
    /// Label-set witness (R.El / R.Er).
    pub labels: Option<LabelSet>,
    /// Quantum channel witness (R.SO).
    pub channel: Option<SuperOperator>,
    /// Correctness mode for mode-parameterized rules.
    pub mode: Option<Mode>,
    /// Saturation for saturation-parameterized rules.
    pub saturation: Option<Saturation>,
}

fn side(rule: RuleId, ok: bool, condition: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(HoareError::SideConditionViolated {
            rule: rule.name().into(),
            condition: condition.into(),
        })
    }
}

fn need<'x, T>(rule: RuleId, v: &'x Option<T>, what: &str) -> Result<&'x T> {
    v.as_ref().ok_or_else(|| HoareError::SideConditionViolated {
        rule: rule.name().into(),
        condition: format!("missing witness: {what}"),
    })
}

fn need_mode(rule: RuleId, args: &RuleArgs) -> Result<(Mode, Saturation)> {
    let mode = *need(rule, &args.mode, "mode")?;
    let st = args.saturation.unwrap_or(Saturation::Plain);
    Ok((mode, st))
}

fn premise<'x>(rule: RuleId, premises: &'x [Judgment], i: usize) -> Result<&'x Judgment> {
    premises.get(i).ok_or_else(|| HoareError::SideConditionViolated {
        rule: rule.name().into(),
        condition: format!("missing premise {i}"),
    })
}

/// Equality of square labelled operators after extension to the union of
/// their label sets.
fn eq_ext(a: &LabelledOperator, b: &LabelledOperator, table: &VarTable, tol: f64) -> Result<bool> {
    let union = a.out_labels().union(b.out_labels());
    let ae = a.cyl_extend(table, &union)?;
    let be = b.cyl_extend(table, &union)?;
    Ok(ae.approx_eq(&be, tol))
}

/// Sum after extension to a common label set.
fn add_ext(a: &LabelledOperator, b: &LabelledOperator, table: &VarTable) -> Result<LabelledOperator> {
    let union = a.out_labels().union(b.out_labels());
    Ok(a.cyl_extend(table, &union)?.add(&b.cyl_extend(table, &union)?)?)
}

/// Statements of a for-loop body: all unitaries on pairwise disjoint
/// variables.
fn for_unitaries(rule: RuleId, program: &Program) -> Result<Vec<(&[crate::dirac::VarId], &LabelledOperator)>> {
    let mut out = Vec::new();
    for stmt in program.statements() {
        match stmt {
            Program::Unitary { vars, op, .. } => out.push((vars.as_slice(), op)),
            other => {
                return Err(HoareError::SideConditionViolated {
                    rule: rule.name().into(),
                    condition: format!("expected a unitary statement, found {other:?}"),
                })
            }
        }
    }
    for i in 0..out.len() {
        for j in (i + 1)..out.len() {
            side(rule, out[i].1.out_labels().is_disjoint(out[j].1.out_labels()), "pset(x_i) disjoint")?;
        }
    }
    Ok(out)
}

/// Statements of a for-loop body: all initializations on pairwise disjoint
/// variables.
fn for_inits(rule: RuleId, program: &Program) -> Result<Vec<&LabelledOperator>> {
    let mut out = Vec::new();
    for stmt in program.statements() {
        match stmt {
            Program::Init { state, .. } => out.push(state),
            other => {
                return Err(HoareError::SideConditionViolated {
                    rule: rule.name().into(),
                    condition: format!("expected an initialization, found {other:?}"),
                })
            }
        }
    }
    for i in 0..out.len() {
        for j in (i + 1)..out.len() {
            side(rule, out[i].out_labels().is_disjoint(out[j].out_labels()), "pset(x_i) disjoint")?;
        }
    }
    Ok(out)
}

fn init_parts(rule: RuleId, program: &Program) -> Result<(&LabelledOperator, LabelledOperator)> {
    match program {
        Program::Init { state, .. } => {
            let ket = pure_ket_of(state, 1e-8).map_err(|_| HoareError::SideConditionViolated {
                rule: rule.name().into(),
                condition: "initialization state is not pure".into(),
            })?;
            Ok((state, ket))
        }
        other => Err(HoareError::SideConditionViolated {
            rule: rule.name().into(),
            condition: format!("expected an initialization, found {other:?}"),
        }),
    }
}

fn unitary_part(rule: RuleId, program: &Program) -> Result<&LabelledOperator> {
    match program {
        Program::Unitary { op, .. } => Ok(op),
        other => Err(HoareError::SideConditionViolated {
            rule: rule.name().into(),
            condition: format!("expected a unitary statement, found {other:?}"),
        }),
    }
}

/// Applies an inference rule, verifying its side conditions numerically and
/// constructing the conclusion judgment.
pub fn apply_rule(
    rule: RuleId,
    premises: &[Judgment],
    args: &RuleArgs,
    table: &VarTable,
    cfg: &Config,
) -> Result<Judgment> {
    let tol = cfg.eq_tol;
    let ptol = cfg.psd_tol;
    match rule {
        // {A} skip {A}
        RuleId::AxSk => {
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            Judgment::new(a.clone(), Program::Skip, a, mode, st)
        }
        // { <t|A|t> } x := |t> { A }
        RuleId::AxIn => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let (_, ket) = init_parts(rule, &program)?;
            let pre = ket.adjoint().compose(&a)?.compose(&ket)?;
            Judgment::new(pre, program, a, mode, st)
        }
        // S /\ pset(x) = 0  =>  {A_S} x := |t> {A_S (x) |t><t|}
        RuleId::AxInF => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let (state, _) = init_parts(rule, &program)?;
            side(rule, a.out_labels().is_disjoint(state.out_labels()), "S /\\ pset(x) = empty")?;
            let post = a.tensor(state)?;
            Judgment::new(a, program, post, mode, st)
        }
        // {U^dag A U} x := U[x] {A}
        RuleId::AxUT => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let u = unitary_part(rule, &program)?;
            let pre = u.adjoint().compose(&a)?.compose(u)?;
            Judgment::new(pre, program, a, mode, st)
        }
        // {A} x := U[x] {U A U^dag}
        RuleId::AxUTF => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let u = unitary_part(rule, &program)?;
            let post = u.compose(&a)?.compose(&u.adjoint())?;
            Judgment::new(a, program, post, mode, st)
        }
        // {A}C1{B}  {B}C2{C}  =>  {A} C1;C2 {C}
        RuleId::RSc => {
            let j1 = premise(rule, premises, 0)?;
            let j2 = premise(rule, premises, 1)?;
            side(rule, j1.mode == j2.mode, "premises share a mode")?;
            side(rule, j1.saturation == j2.saturation, "premises share saturation")?;
            side(rule, eq_ext(&j1.post, &j2.pre, table, tol)?, "mid-conditions agree")?;
            Judgment::new(
                j1.pre.clone(),
                Program::seq(j1.program.clone(), j2.program.clone()),
                j2.post.clone(),
                j1.mode,
                j1.saturation,
            )
        }
        // forall t: {A_t}C_t{B}  =>  {sum_t M_t^dag A_t M_t} if meas {B}
        RuleId::RIf => {
            let program = need(rule, &args.program, "program")?.clone();
            let (meas, branches) = match &program {
                Program::Cond { meas, branches } => (meas, branches),
                other => {
                    return Err(HoareError::SideConditionViolated {
                        rule: rule.name().into(),
                        condition: format!("expected a conditional, found {other:?}"),
                    })
                }
            };
            side(rule, premises.len() == branches.len(), "one premise per branch")?;
            let mode = premise(rule, premises, 0)?.mode;
            let st = premise(rule, premises, 0)?.saturation;
            let post = premise(rule, premises, 0)?.post.clone();
            let mut pre: Option<LabelledOperator> = None;
            for (i, (m, branch)) in meas.operators().iter().zip(branches).enumerate() {
                let j = premise(rule, premises, i)?;
                side(rule, j.mode == mode && j.saturation == st, "premises share mode")?;
                side(rule, &j.program == branch, "premise programs match the branches")?;
                side(rule, eq_ext(&j.post, &post, table, tol)?, "premises share the postcondition")?;
                let term = m.adjoint().compose(&j.pre)?.compose(m)?;
                pre = Some(match pre {
                    None => term,
                    Some(acc) => add_ext(&acc, &term, table)?,
                });
            }
            Judgment::new(pre.unwrap(), program, post, mode, st)
        }
        // R := M_b^dag A M_b + M_nb^dag B M_nb, {A}C{R}, A<=I, B<=I
        //   =>  |=_p {R} while M = b do C {B}
        RuleId::RLpP => {
            let program = need(rule, &args.program, "program")?.clone();
            let b_post = need(rule, &args.operator2, "operator B")?.clone();
            let j = premise(rule, premises, 0)?;
            let (meas, continue_on, body) = match &program {
                Program::While { meas, continue_on, body } => (meas, *continue_on, body),
                other => {
                    return Err(HoareError::SideConditionViolated {
                        rule: rule.name().into(),
                        condition: format!("expected a while loop, found {other:?}"),
                    })
                }
            };
            side(rule, j.mode == Mode::Partial, "premise is partial")?;
            side(rule, &**body == &j.program, "premise program is the loop body")?;
            let a = &j.pre;
            let id_a = LabelledOperator::identity(table, a.out_labels());
            let id_b = LabelledOperator::identity(table, b_post.out_labels());
            side(rule, loewner_leq_labelled(a, &id_a, table, ptol)?, "A <= I")?;
            side(rule, loewner_leq_labelled(&b_post, &id_b, table, ptol)?, "B <= I")?;
            let m_cont = &meas.operators()[usize::from(continue_on)];
            let m_exit = &meas.operators()[usize::from(!continue_on)];
            let r_cont = m_cont.adjoint().compose(a)?.compose(m_cont)?;
            let r_exit = m_exit.adjoint().compose(&b_post)?.compose(m_exit)?;
            let r = add_ext(&r_cont, &r_exit, table)?;
            side(rule, eq_ext(&j.post, &r, table, tol)?, "premise post matches the invariant R")?;
            Judgment::new(r, program, b_post, Mode::Partial, Saturation::Plain)
        }
        // A <= A', {A'}C{B'}, B' <= B  =>  {A}C{B}
        RuleId::ROr => {
            let j = premise(rule, premises, 0)?;
            let a = need(rule, &args.operator, "operator A")?.clone();
            let b = need(rule, &args.operator2, "operator B")?.clone();
            side(rule, loewner_leq_labelled(&a, &j.pre, table, ptol)?, "A <= A'")?;
            side(rule, loewner_leq_labelled(&j.post, &b, table, ptol)?, "B' <= B")?;
            Judgment::new(a, j.program.clone(), b, j.mode, Saturation::Plain)
        }
        // |=_t {A}C{B}, l >= 0  =>  |=_t {lA}C{lB}
        RuleId::RScaleT => {
            let j = premise(rule, premises, 0)?;
            let l = *args.scalars.first().ok_or_else(|| HoareError::SideConditionViolated {
                rule: rule.name().into(),
                condition: "missing scalar".into(),
            })?;
            side(rule, j.mode == Mode::Total, "premise is total")?;
            side(rule, l >= 0.0, "lambda >= 0")?;
            Judgment::new(
                j.pre.scale(re(l)),
                j.program.clone(),
                j.post.scale(re(l)),
                Mode::Total,
                j.saturation,
            )
        }
        // |=_t {A1}C{B1}, |=_t {A2}C{B2}  =>  |=_t {A1+A2}C{B1+B2}
        RuleId::RAddT => {
            let j1 = premise(rule, premises, 0)?;
            let j2 = premise(rule, premises, 1)?;
            side(rule, j1.mode == Mode::Total && j2.mode == Mode::Total, "premises are total")?;
            side(rule, j1.program == j2.program, "premises share the program")?;
            side(rule, j1.saturation == j2.saturation, "premises share saturation")?;
            Judgment::new(
                add_ext(&j1.pre, &j2.pre, table)?,
                j1.program.clone(),
                add_ext(&j1.post, &j2.post, table)?,
                Mode::Total,
                j1.saturation,
            )
        }
        // |=_p {A_i}C{B_i}, l_i >= 0, sum l_i <= 1  =>  {sum l A}C{sum l B}
        RuleId::RCcP => {
            side(rule, premises.len() == args.scalars.len(), "one weight per premise")?;
            side(rule, !premises.is_empty(), "at least one premise")?;
            side(rule, args.scalars.iter().all(|&l| l >= 0.0), "lambda_i >= 0")?;
            side(rule, args.scalars.iter().sum::<f64>() <= 1.0 + 1e-12, "sum lambda_i <= 1")?;
            let program = premises[0].program.clone();
            let mut pre: Option<LabelledOperator> = None;
            let mut post: Option<LabelledOperator> = None;
            for (j, &l) in premises.iter().zip(&args.scalars) {
                side(rule, j.mode == Mode::Partial, "premises are partial")?;
                side(rule, j.program == program, "premises share the program")?;
                let p = j.pre.scale(re(l));
                let q = j.post.scale(re(l));
                pre = Some(match pre {
                    None => p,
                    Some(acc) => add_ext(&acc, &p, table)?,
                });
                post = Some(match post {
                    None => q,
                    Some(acc) => add_ext(&acc, &q, table)?,
                });
            }
            Judgment::new(pre.unwrap(), program, post.unwrap(), Mode::Partial, Saturation::Plain)
        }
        // saturated => plain
        RuleId::RSt => {
            let j = premise(rule, premises, 0)?;
            side(rule, j.saturation == Saturation::Saturated, "premise is saturated")?;
            Judgment::new(j.pre.clone(), j.program.clone(), j.post.clone(), j.mode, Saturation::Plain)
        }
        // loop-free programs: modes coincide
        RuleId::RNoLp => {
            let j = premise(rule, premises, 0)?;
            side(rule, !j.program.has_while(), "program has no while")?;
            Judgment::new(j.pre.clone(), j.program.clone(), j.post.clone(), j.mode.flip(), j.saturation)
        }
        // A_S <= I_S, S /\ pset(C) = 0  =>  |=_p {A_S} C {A_S}
        RuleId::AxInv => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let id = LabelledOperator::identity(table, a.out_labels());
            side(rule, loewner_leq_labelled(&a, &id, table, ptol)?, "A <= I")?;
            side(rule, a.out_labels().is_disjoint(&program.footprint()), "S /\\ pset(C) = empty")?;
            Judgment::new(a.clone(), program, a, Mode::Partial, Saturation::Plain)
        }
        // {A}C{B}, S /\ pset(C) = 0, E_S a channel  =>  {E*(A)}C{E*(B)}
        RuleId::RSo => {
            let j = premise(rule, premises, 0)?;
            let chan = need(rule, &args.channel, "channel")?;
            side(rule, chan.labels().is_disjoint(&j.program.footprint()), "S /\\ pset(C) = empty")?;
            let q = chan.quality(ptol)?;
            side(rule, q.is_cp && q.is_trace_preserving, "witness is a quantum channel")?;
            let dual = chan.dual();
            let pre = dual.apply(table, &j.pre)?;
            let post = dual.apply(table, &j.post)?;
            Judgment::new(pre, j.program.clone(), post, j.mode, j.saturation)
        }
        // {A_{S_A}}C{B}, S_A /\ S = 0  =>  {A (x) I_S}C{B}
        RuleId::REl => {
            let j = premise(rule, premises, 0)?;
            let s = need(rule, &args.labels, "label set")?.clone();
            side(rule, j.pre.out_labels().is_disjoint(&s), "S_A /\\ S = empty")?;
            let pre = j.pre.tensor(&LabelledOperator::identity(table, &s))?;
            Judgment::new(pre, j.program.clone(), j.post.clone(), j.mode, j.saturation)
        }
        // {A}C{B_{S_B}}, S /\ S_B = 0  =>  {A}C{B (x) I_S}
        RuleId::REr => {
            let j = premise(rule, premises, 0)?;
            let s = need(rule, &args.labels, "label set")?.clone();
            side(rule, j.post.out_labels().is_disjoint(&s), "S_B /\\ S = empty")?;
            let post = j.post.tensor(&LabelledOperator::identity(table, &s))?;
            Judgment::new(j.pre.clone(), j.program.clone(), post, j.mode, j.saturation)
        }
        // {A (x) I_S1}C{B (x) I_S2}  =>  {A}C{B}
        RuleId::RTi => {
            let j = premise(rule, premises, 0)?;
            let a = need(rule, &args.operator, "operator A")?.clone();
            let b = need(rule, &args.operator2, "operator B")?.clone();
            side(rule, a.out_labels().is_subset(j.pre.out_labels()), "S_A inside the premise pre")?;
            side(rule, b.out_labels().is_subset(j.post.out_labels()), "S_B inside the premise post")?;
            let a_ext = a.cyl_extend(table, j.pre.out_labels())?;
            let b_ext = b.cyl_extend(table, j.post.out_labels())?;
            side(rule, a_ext.approx_eq(&j.pre, tol), "premise pre is A (x) I")?;
            side(rule, b_ext.approx_eq(&j.post, tol), "premise post is B (x) I")?;
            Judgment::new(a, j.program.clone(), b, j.mode, j.saturation)
        }
        // |=_t {A}C{B}, 0 <= R, disjoint  =>  {A (x) R}C{B (x) R}
        RuleId::FrameT => {
            let j = premise(rule, premises, 0)?;
            let r = need(rule, &args.operator, "frame R")?.clone();
            side(rule, j.mode == Mode::Total, "premise is total")?;
            side(rule, is_positive_labelled(&r, ptol)?, "0 <= R")?;
            let touched =
                j.program.footprint().union(j.pre.out_labels()).union(j.post.out_labels());
            side(rule, touched.is_disjoint(r.out_labels()), "frame is disjoint")?;
            Judgment::new(
                j.pre.tensor(&r)?,
                j.program.clone(),
                j.post.tensor(&r)?,
                Mode::Total,
                j.saturation,
            )
        }
        // |=_p {A}C{B}, 0 <= R <= I, disjoint  =>  {A (x) R}C{B (x) R}
        RuleId::FrameP => {
            let j = premise(rule, premises, 0)?;
            let r = need(rule, &args.operator, "frame R")?.clone();
            side(rule, j.mode == Mode::Partial, "premise is partial")?;
            side(rule, is_effect_labelled(&r, ptol)?, "0 <= R <= I")?;
            let touched =
                j.program.footprint().union(j.pre.out_labels()).union(j.post.out_labels());
            side(rule, touched.is_disjoint(r.out_labels()), "frame is disjoint")?;
            Judgment::new(
                j.pre.tensor(&r)?,
                j.program.clone(),
                j.post.tensor(&r)?,
                Mode::Partial,
                Saturation::Plain,
            )
        }
        // parallel composition of disjoint components
        RuleId::RPcT | RuleId::RPcP => {
            side(rule, !premises.is_empty(), "at least one premise")?;
            let total = rule == RuleId::RPcT;
            let st = premises[0].saturation;
            for (i, j) in premises.iter().enumerate() {
                if total {
                    side(rule, j.mode == Mode::Total, "premises are total")?;
                    side(rule, j.saturation == st, "premises share saturation")?;
                    side(rule, is_positive_labelled(&j.pre, ptol)?, "0 <= A_i")?;
                    side(rule, is_positive_labelled(&j.post, ptol)?, "0 <= B_i")?;
                } else {
                    side(rule, j.mode == Mode::Partial, "premises are partial")?;
                    side(rule, is_effect_labelled(&j.pre, ptol)?, "0 <= A_i <= I")?;
                    side(rule, is_effect_labelled(&j.post, ptol)?, "0 <= B_i <= I")?;
                }
                for other in premises.iter().skip(i + 1) {
                    let li = j.program.footprint().union(j.pre.out_labels()).union(j.post.out_labels());
                    let lo = other
                        .program
                        .footprint()
                        .union(other.pre.out_labels())
                        .union(other.post.out_labels());
                    side(rule, li.is_disjoint(&lo), "components are pairwise disjoint")?;
                }
            }
            let program =
                Program::desugar_for(premises.iter().map(|j| j.program.clone()).collect());
            let pre = LabelledOperator::big_tensor(premises.iter().map(|j| &j.pre))?;
            let post = LabelledOperator::big_tensor(premises.iter().map(|j| &j.post))?;
            let mode = if total { Mode::Total } else { Mode::Partial };
            let st = if total { st } else { Saturation::Plain };
            Judgment::new(pre, program, post, mode, st)
        }
        // {(x)U_i^dag A (x)U_i} for i do x_i := U_i[x_i] {A}
        RuleId::AxUtp => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let units = for_unitaries(rule, &program)?;
            let u = LabelledOperator::big_tensor(units.iter().map(|(_, op)| *op))?;
            let pre = u.adjoint().compose(&a)?.compose(&u)?;
            Judgment::new(pre, program, a, mode, st)
        }
        // {A} for i do x_i := U_i[x_i] {(x)U_i A (x)U_i^dag}
        RuleId::AxUtfp => {
            let program = need(rule, &args.program, "program")?.clone();
            let a = need(rule, &args.operator, "operator A")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let units = for_unitaries(rule, &program)?;
            let u = LabelledOperator::big_tensor(units.iter().map(|(_, op)| *op))?;
            let post = u.compose(&a)?.compose(&u.adjoint())?;
            Judgment::new(a, program, post, mode, st)
        }
        // {prod <t_i|A_i|t_i>} for i do x_i := |t_i> {(x) A_i}
        RuleId::AxInp => {
            let program = need(rule, &args.program, "program")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let states = for_inits(rule, &program)?;
            side(rule, args.operators.len() == states.len(), "one operator per component")?;
            let mut scalar = Scalar::ONE;
            for (a, state) in args.operators.iter().zip(&states) {
                side(
                    rule,
                    a.out_labels() == state.out_labels() && a.is_square_on(),
                    "A_i lives on x_i",
                )?;
                let ket = pure_ket_of(state, 1e-8)?;
                let val = ket.adjoint().compose(a)?.compose(&ket)?;
                scalar *= val.as_scalar().expect("contraction yields a scalar");
            }
            let post = LabelledOperator::big_tensor(args.operators.iter())?;
            Judgment::new(LabelledOperator::scalar(scalar), program, post, mode, st)
        }
        // {1} for i do x_i := |t_i> {(x) |t_i><t_i|}
        RuleId::AxInfp => {
            let program = need(rule, &args.program, "program")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let states = for_inits(rule, &program)?;
            let post = LabelledOperator::big_tensor(states.iter().copied())?;
            Judgment::new(LabelledOperator::one(), program, post, mode, st)
        }
        // |=_t^s {1}C{|v><v|}, |v| <= 1, S_u inside S_v
        //   =>  |=_t^s { |<u|v>|^2 } C { |u><u| }
        RuleId::RInner => {
            let j = premise(rule, premises, 0)?;
            let u = need(rule, &args.ket, "state u")?.clone();
            side(rule, j.mode == Mode::Total && j.saturation == Saturation::Saturated, "premise is saturated total")?;
            side(
                rule,
                j.pre.as_scalar().map(|z| (z - Scalar::ONE).norm() < 1e-9).unwrap_or(false),
                "premise precondition is 1",
            )?;
            let v = pure_ket_of(&j.post, 1e-8)?;
            side(rule, v.norm() <= 1.0 + 1e-9, "|v| <= 1")?;
            side(rule, u.norm() <= 1.0 + 1e-9, "|u| <= 1")?;
            side(rule, u.in_labels().is_empty(), "u is a state")?;
            side(rule, u.out_labels().is_subset(v.out_labels()), "S_u inside S_v")?;
            let w = u.adjoint().compose(&v)?;
            let weight = w.norm().powi(2);
            Judgment::new(
                LabelledOperator::scalar(re(weight)),
                j.program.clone(),
                u.outer_with_self()?,
                Mode::Total,
                Saturation::Saturated,
            )
        }
        // state form: {|v>} x := U[x] {U|v>}
        RuleId::AxUTFState => {
            let program = need(rule, &args.program, "program")?.clone();
            let v = need(rule, &args.ket, "state v")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let u = unitary_part(rule, &program)?;
            let out = u.compose(&v)?;
            Judgment::new(v.outer_with_self()?, program, out.outer_with_self()?, mode, st)
        }
        // state form: S /\ pset(x) = 0 => {|v>_S} x := |t> {|v>_S (x) |t>_x}
        RuleId::AxInFState => {
            let program = need(rule, &args.program, "program")?.clone();
            let v = need(rule, &args.ket, "state v")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let (_, t_ket) = init_parts(rule, &program)?;
            side(rule, v.out_labels().is_disjoint(t_ket.out_labels()), "S /\\ pset(x) = empty")?;
            let out = v.tensor(&t_ket)?;
            Judgment::new(v.outer_with_self()?, program, out.outer_with_self()?, mode, st)
        }
        // state form of Ax.UTFP
        RuleId::AxUtfpState => {
            let program = need(rule, &args.program, "program")?.clone();
            let v = need(rule, &args.ket, "state v")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let units = for_unitaries(rule, &program)?;
            let u = LabelledOperator::big_tensor(units.iter().map(|(_, op)| *op))?;
            let out = u.compose(&v)?;
            Judgment::new(v.outer_with_self()?, program, out.outer_with_self()?, mode, st)
        }
        // state form of Ax.InFP: {1} for i do x_i := |t_i> {(x)|t_i>}
        RuleId::AxInfpState => {
            let program = need(rule, &args.program, "program")?.clone();
            let (mode, st) = need_mode(rule, args)?;
            let states = for_inits(rule, &program)?;
            let mut kets = Vec::new();
            for s in states {
                kets.push(pure_ket_of(s, 1e-8)?);
            }
            let out = LabelledOperator::big_tensor(kets.iter())?;
            Judgment::new(LabelledOperator::one(), program, out.outer_with_self()?, mode, st)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoare::check_valid;
    use crate::qtypes::QType;
    use crate::qwhile::parse::parse_program;
    use std::collections::HashMap;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn ax_sk_builds_identity_triple() {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::Bool).unwrap();
        let a = LabelledOperator::basis_ket(&t, &t.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        let args = RuleArgs {
            operator: Some(a.clone()),
            mode: Some(Mode::Total),
            saturation: Some(Saturation::Saturated),
            ..Default::default()
        };
        let j = apply_rule(RuleId::AxSk, &[], &args, &t, &cfg()).unwrap();
        assert_eq!(j.program, Program::Skip);
        assert!(j.pre.approx_eq(&a, 0.0));
        assert!(check_valid(&j, &t, &cfg()).unwrap().is_valid());
    }

    #[test]
    fn frame_p_attaches_disjoint_predicate() {
        let p = parse_program("var x : bool; var z : int<3>; x := H[x];", &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let z = p.table.lookup("z").unwrap();
        let a = LabelledOperator::basis_ket(&p.table, &p.table.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        let plus = LabelledOperator::ket(&p.table, &p.table.var(x).labels, &[re(h), re(h)])
            .unwrap()
            .outer_with_self()
            .unwrap();
        let premise = Judgment::new(a, p.program(), plus, Mode::Partial, Saturation::Plain).unwrap();
        assert!(check_valid(&premise, &p.table, &cfg()).unwrap().is_valid());
        let r = LabelledOperator::basis_ket(&p.table, &p.table.var(z).labels, 2)
            .unwrap()
            .outer_with_self()
            .unwrap()
            .scale(re(0.5));
        let args = RuleArgs { operator: Some(r), ..Default::default() };
        let j = apply_rule(RuleId::FrameP, &[premise], &args, &p.table, &cfg()).unwrap();
        assert!(check_valid(&j, &p.table, &cfg()).unwrap().is_valid());
        // Overlapping frame is rejected.
        let bad = LabelledOperator::identity(
            &p.table,
            &LabelSet::from_slice(&p.table.var(x).labels),
        );
        let args = RuleArgs { operator: Some(bad), ..Default::default() };
        let premise2 = apply_rule(RuleId::AxSk, &[], &RuleArgs {
            operator: Some(LabelledOperator::basis_ket(&p.table, &p.table.var(x).labels, 0)
                .unwrap()
                .outer_with_self()
                .unwrap()),
            mode: Some(Mode::Partial),
            saturation: Some(Saturation::Plain),
            ..Default::default()
        }, &p.table, &cfg()).unwrap();
        assert!(matches!(
            apply_rule(RuleId::FrameP, &[premise2], &args, &p.table, &cfg()),
            Err(HoareError::SideConditionViolated { .. })
        ));
    }

    #[test]
    fn r_inner_derives_projection_weight() {
        // C prepares |+> from anything; {1}C{|+><+|} is saturated-total.
        let p = parse_program("var x : bool; x := |0>; x := H[x];", &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        let labels = p.table.var(x).labels.clone();
        let plus = LabelledOperator::ket(&p.table, &labels, &[re(h), re(h)]).unwrap();
        let premise = Judgment::new(
            LabelledOperator::one(),
            p.program(),
            plus.outer_with_self().unwrap(),
            Mode::Total,
            Saturation::Saturated,
        )
        .unwrap();
        assert!(check_valid(&premise, &p.table, &cfg()).unwrap().is_valid());
        let u = LabelledOperator::basis_ket(&p.table, &labels, 0).unwrap();
        let args = RuleArgs { ket: Some(u), ..Default::default() };
        let j = apply_rule(RuleId::RInner, &[premise], &args, &p.table, &cfg()).unwrap();
        // |<0|+>|^2 = 1/2.
        let w = j.pre.as_scalar().unwrap();
        assert!((w - re(0.5)).norm() < 1e-12);
        assert!(check_valid(&j, &p.table, &cfg()).unwrap().is_valid());
    }

    #[test]
    fn unknown_rule_name_errors() {
        assert!(matches!(RuleId::parse("R.Bogus"), Err(HoareError::UnknownRule(_))));
        assert_eq!(RuleId::parse("Ax.UTF'").unwrap(), RuleId::AxUTFState);
    }
}
