//! Randomized soundness testing of the inference rules.
//!
//! Each trial draws a small random instance (dimensions 2-3, loop-free
//! programs of depth at most 3; the loop rule uses convergent coin loops),
//! constructs premises that are valid by construction (preconditions are
//! computed weakest preconditions, or fixpoint iterates for the loop rule),
//! applies the rule and asserts that the conclusion passes the semantic
//! checker. A failure is a checker bug and is reported as a replayable
//! counterexample.

use super::rules::{apply_rule, RuleArgs, RuleId};
use super::{check_valid, wlp, wp, HoareError, Judgment, Mode, Result, Saturation};
use crate::config::Config;
use crate::dirac::{LabelSet, LabelledOperator, VarId, VarTable};
use crate::linalg::{re, ComplexMatrix, Scalar};
use crate::qtypes::{self, QType};
use crate::qwhile::{Measurement, Program};
use crate::semantics::SuperOperator;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Statistics of one rule's fuzzing run.
#[derive(Debug, Clone)]
pub struct FuzzReport {
    pub rule: String,
    pub trials: u64,
    pub passes: u64,
    /// Smallest validity slack observed across trials (NaN slacks from
    /// saturated checks are skipped).
    pub min_slack: f64,
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn scalar(&mut self) -> Scalar {
        Scalar::new(self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0))
    }

    fn table(&mut self, nvars: usize) -> (VarTable, Vec<VarId>) {
        let mut t = VarTable::new();
        let mut ids = Vec::new();
        for i in 0..nvars {
            let ty = if self.rng.random_bool(0.5) { QType::Bool } else { QType::ZN(3) };
            ids.push(t.declare(&format!("v{i}"), ty).unwrap());
        }
        (t, ids)
    }

    fn labels_of(&self, t: &VarTable, vars: &[VarId]) -> LabelSet {
        LabelSet::from_slice(&t.labels_of_vars(vars))
    }

    fn hermitian(&mut self, d: usize) -> ComplexMatrix {
        let m = ComplexMatrix::from_fn(d, d, |_, _| self.scalar());
        m.add(&m.adjoint()).unwrap().scale(re(0.5))
    }

    fn unitary(&mut self, d: usize) -> ComplexMatrix {
        qtypes::matrix_exponential_of_hermitian(&self.hermitian(d), 1.0).unwrap()
    }

    fn hermitian_on(&mut self, t: &VarTable, labels: &LabelSet) -> LabelledOperator {
        let d = t.dim_of(labels);
        LabelledOperator::operator_on(t, labels.as_slice(), self.hermitian(d)).unwrap()
    }

    /// `U diag(u_i) U^dag` with `u_i` in `[0, 1]`: a random effect.
    fn effect_on(&mut self, t: &VarTable, labels: &LabelSet) -> LabelledOperator {
        let d = t.dim_of(labels);
        let u = self.unitary(d);
        let diag: Vec<Scalar> = (0..d).map(|_| re(self.rng.random_range(0.0..1.0))).collect();
        let m = u.matmul(&ComplexMatrix::diag(&diag)).unwrap().matmul(&u.adjoint()).unwrap();
        LabelledOperator::operator_on(t, labels.as_slice(), m).unwrap()
    }

    fn psd_on(&mut self, t: &VarTable, labels: &LabelSet, scale: f64) -> LabelledOperator {
        let d = t.dim_of(labels);
        let m = ComplexMatrix::from_fn(d, d, |_, _| self.scalar());
        let p = m.matmul(&m.adjoint()).unwrap().scale(re(scale));
        LabelledOperator::operator_on(t, labels.as_slice(), p).unwrap()
    }

    fn ket_on(&mut self, t: &VarTable, labels: &LabelSet, norm: f64) -> LabelledOperator {
        let d = t.dim_of(labels);
        let raw: Vec<Scalar> = (0..d).map(|_| self.scalar()).collect();
        let n = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let coeffs: Vec<Scalar> = raw.iter().map(|z| z * re(norm / n)).collect();
        LabelledOperator::ket(t, labels.as_slice(), &coeffs).unwrap()
    }

    /// Loop-free random program over the given variables.
    fn program(&mut self, t: &VarTable, vars: &[VarId], depth: usize) -> Program {
        let choice = if depth == 0 { self.rng.random_range(0..3) } else { self.rng.random_range(0..5) };
        match choice {
            0 => Program::Skip,
            1 => {
                let v = vars[self.rng.random_range(0..vars.len())];
                let d = t.var(v).qtype.dimension();
                Program::unitary(t, &[v], self.unitary(d), "U").unwrap()
            }
            2 => {
                let v = vars[self.rng.random_range(0..vars.len())];
                let d = t.var(v).qtype.dimension();
                Program::init_basis(t, &[v], self.rng.random_range(0..d)).unwrap()
            }
            3 => Program::seq(
                self.program(t, vars, depth - 1),
                self.program(t, vars, depth - 1),
            ),
            _ => {
                let v = vars[self.rng.random_range(0..vars.len())];
                let meas = Measurement::basis(t, &[v]).unwrap();
                let branches =
                    (0..meas.outcome_count()).map(|_| self.program(t, vars, depth - 1)).collect();
                Program::cond(meas, branches).unwrap()
            }
        }
    }

    /// A judgment valid by construction: the precondition is the computed
    /// (liberal) weakest precondition of a random effect.
    fn valid_premise(
        &mut self,
        t: &VarTable,
        program: Program,
        post_labels: &LabelSet,
        mode: Mode,
        st: Saturation,
        cfg: &Config,
    ) -> Result<Judgment> {
        let post = self.effect_on(t, post_labels);
        let pre = match mode {
            Mode::Total => wp(&program, &post, t, cfg)?,
            Mode::Partial => wlp(&program, &post, t, cfg)?,
        };
        Judgment::new(pre, program, post, mode, st)
    }

    fn mode(&mut self) -> Mode {
        if self.rng.random_bool(0.5) {
            Mode::Total
        } else {
            Mode::Partial
        }
    }

    fn saturation(&mut self) -> Saturation {
        if self.rng.random_bool(0.5) {
            Saturation::Saturated
        } else {
            Saturation::Plain
        }
    }

    /// Random quantum channel (CP + TP) on the given labels.
    fn channel_on(&mut self, t: &VarTable, labels: &LabelSet) -> SuperOperator {
        let d = t.dim_of(labels);
        let b1 = ComplexMatrix::from_fn(d, d, |_, _| self.scalar());
        let b2 = ComplexMatrix::from_fn(d, d, |_, _| self.scalar());
        let norm = b1
            .adjoint()
            .matmul(&b1)
            .unwrap()
            .add(&b2.adjoint().matmul(&b2).unwrap())
            .unwrap();
        // K_i = B_i norm^{-1/2} gives sum K^dag K = I.
        let eig = norm.hermitian_eig(1e-9).unwrap();
        let inv_sqrt = eig.map_eigenvalues(|l| re(1.0 / l.max(1e-12).sqrt()));
        let kraus: Vec<LabelledOperator> = [b1, b2]
            .into_iter()
            .map(|b| {
                LabelledOperator::operator_on(t, labels.as_slice(), b.matmul(&inv_sqrt).unwrap())
                    .unwrap()
            })
            .collect();
        SuperOperator::from_kraus(t, labels, &kraus).unwrap()
    }
}

/// One generated instance: premises, witnesses and the table they live in.
struct Case {
    table: VarTable,
    premises: Vec<Judgment>,
    args: RuleArgs,
}

fn generate(rule: RuleId, gen: &mut Gen, cfg: &Config) -> Result<Case> {
    match rule {
        RuleId::AxSk => {
            let (t, vars) = gen.table(2);
            let labels = gen.labels_of(&t, &vars[..1]);
            let a = gen.hermitian_on(&t, &labels);
            let args = RuleArgs {
                operator: Some(a),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::AxIn | RuleId::AxUT | RuleId::AxUTF => {
            let (t, vars) = gen.table(2);
            let x = vars[0];
            let d = t.var(x).qtype.dimension();
            let program = match rule {
                RuleId::AxIn => Program::init_basis(&t, &[x], gen.rng.random_range(0..d)).unwrap(),
                _ => Program::unitary(&t, &[x], gen.unitary(d), "U").unwrap(),
            };
            // A on x plus sometimes a neighbour.
            let a_vars: &[VarId] =
                if gen.rng.random_bool(0.5) { &vars[..1] } else { &vars[..2] };
            let a = gen.hermitian_on(&t, &gen.labels_of(&t, a_vars));
            let args = RuleArgs {
                program: Some(program),
                operator: Some(a),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::AxInF => {
            let (t, vars) = gen.table(2);
            let d = t.var(vars[0]).qtype.dimension();
            let program = Program::init_basis(&t, &[vars[0]], gen.rng.random_range(0..d)).unwrap();
            let a = gen.hermitian_on(&t, &gen.labels_of(&t, &vars[1..2]));
            let args = RuleArgs {
                program: Some(program),
                operator: Some(a),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::RSc => {
            let (t, vars) = gen.table(2);
            let mode = gen.mode();
            let st = gen.saturation();
            let c2 = gen.program(&t, &vars, 2);
            let j2 = gen.valid_premise(&t, c2, &gen.labels_of(&t, &vars), mode, st, cfg)?;
            let c1 = gen.program(&t, &vars, 2);
            let mid = j2.pre.clone();
            let pre1 = match mode {
                Mode::Total => wp(&c1, &mid, &t, cfg)?,
                Mode::Partial => wlp(&c1, &mid, &t, cfg)?,
            };
            let j1 = Judgment::new(pre1, c1, mid, mode, st)?;
            Ok(Case { table: t, premises: vec![j1, j2], args: RuleArgs::default() })
        }
        RuleId::RIf => {
            let (t, vars) = gen.table(2);
            let mode = gen.mode();
            let st = gen.saturation();
            let guard = vars[0];
            let meas = Measurement::basis(&t, &[guard]).unwrap();
            let post = gen.effect_on(&t, &gen.labels_of(&t, &vars));
            let mut premises = Vec::new();
            let mut branches = Vec::new();
            for _ in 0..meas.outcome_count() {
                let c = gen.program(&t, &vars, 1);
                let pre = match mode {
                    Mode::Total => wp(&c, &post, &t, cfg)?,
                    Mode::Partial => wlp(&c, &post, &t, cfg)?,
                };
                premises.push(Judgment::new(pre, c.clone(), post.clone(), mode, st)?);
                branches.push(c);
            }
            let program = Program::cond(meas, branches).unwrap();
            let args = RuleArgs { program: Some(program), ..Default::default() };
            Ok(Case { table: t, premises, args })
        }
        RuleId::RLpP => {
            let mut t = VarTable::new();
            let x = t.declare("x", QType::Bool).unwrap();
            let labels = LabelSet::from_slice(&t.var(x).labels);
            let b_val = gen.rng.random_bool(0.5);
            // Keep |<b|U|b>| away from 1 so the loop converges quickly.
            let u = loop {
                let u = gen.unitary(2);
                let idx = usize::from(b_val);
                if u.get(idx, idx).norm() <= 0.95 {
                    break u;
                }
            };
            let body = Program::unitary(&t, &[x], u, "U").unwrap();
            let meas = Measurement::basis(&t, &[x]).unwrap();
            let program = Program::while_loop(meas.clone(), b_val, body.clone()).unwrap();
            let b_post = gen.effect_on(&t, &labels);
            let m_cont = &meas.operators()[usize::from(b_val)];
            let m_exit = &meas.operators()[usize::from(!b_val)];
            // Least-fixpoint iteration from 0: every iterate satisfies
            // A_k <= T(A_k), so {A_k} body {R(A_k, B)} is valid partial.
            let mut a = LabelledOperator::zero(&t, &labels, &labels);
            for _ in 0..3 {
                let r = m_cont
                    .adjoint()
                    .compose(&a)?
                    .compose(m_cont)?
                    .add(&m_exit.adjoint().compose(&b_post)?.compose(m_exit)?)?;
                a = wlp(&body, &r, &t, cfg)?;
            }
            let r = m_cont
                .adjoint()
                .compose(&a)?
                .compose(m_cont)?
                .add(&m_exit.adjoint().compose(&b_post)?.compose(m_exit)?)?;
            let premise = Judgment::new(a, body, r, Mode::Partial, Saturation::Plain)?;
            let args = RuleArgs {
                program: Some(program),
                operator2: Some(b_post),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![premise], args })
        }
        RuleId::ROr => {
            let (t, vars) = gen.table(2);
            let mode = gen.mode();
            let program = gen.program(&t, &vars, 2);
            let labels = gen.labels_of(&t, &vars[..1]);
            let j = gen.valid_premise(&t, program, &labels, mode, Saturation::Plain, cfg)?;
            let a = j.pre.sub(&gen.psd_on(&t, j.pre.out_labels(), 0.3))?;
            let b = j.post.add(&gen.psd_on(&t, j.post.out_labels(), 0.3))?;
            let args = RuleArgs { operator: Some(a), operator2: Some(b), ..Default::default() };
            Ok(Case { table: t, premises: vec![j], args })
        }
        RuleId::RScaleT => {
            let (t, vars) = gen.table(2);
            let program = gen.program(&t, &vars, 2);
            let labels = gen.labels_of(&t, &vars);
            let st = gen.saturation();
            let j = gen.valid_premise(&t, program, &labels, Mode::Total, st, cfg)?;
            let args =
                RuleArgs { scalars: vec![gen.rng.random_range(0.0..2.0)], ..Default::default() };
            Ok(Case { table: t, premises: vec![j], args })
        }
        RuleId::RAddT => {
            let (t, vars) = gen.table(2);
            let st = gen.saturation();
            let program = gen.program(&t, &vars, 2);
            let l1 = gen.labels_of(&t, &vars[..1]);
            let l2 = gen.labels_of(&t, &vars[1..2]);
            let j1 = gen.valid_premise(&t, program.clone(), &l1, Mode::Total, st, cfg)?;
            let j2 = gen.valid_premise(&t, program, &l2, Mode::Total, st, cfg)?;
            Ok(Case { table: t, premises: vec![j1, j2], args: RuleArgs::default() })
        }
        RuleId::RCcP => {
            let (t, vars) = gen.table(2);
            let program = gen.program(&t, &vars, 2);
            let n = gen.rng.random_range(1..=3);
            let mut premises = Vec::new();
            let mut scalars = Vec::new();
            let mut budget = 1.0;
            for _ in 0..n {
                let labels = gen.labels_of(&t, &vars);
                premises.push(gen.valid_premise(
                    &t,
                    program.clone(),
                    &labels,
                    Mode::Partial,
                    Saturation::Plain,
                    cfg,
                )?);
                let l = gen.rng.random_range(0.0..budget);
                budget -= l;
                scalars.push(l);
            }
            Ok(Case { table: t, premises, args: RuleArgs { scalars, ..Default::default() } })
        }
        RuleId::RSt | RuleId::RNoLp => {
            let (t, vars) = gen.table(2);
            let program = gen.program(&t, &vars, 2);
            let st = if rule == RuleId::RSt { Saturation::Saturated } else { gen.saturation() };
            let labels = gen.labels_of(&t, &vars);
            let mode = gen.mode();
            let j = gen.valid_premise(&t, program, &labels, mode, st, cfg)?;
            Ok(Case { table: t, premises: vec![j], args: RuleArgs::default() })
        }
        RuleId::AxInv => {
            let (t, vars) = gen.table(3);
            let program = gen.program(&t, &vars[..2], 2);
            let a = gen.effect_on(&t, &gen.labels_of(&t, &vars[2..3]));
            let args =
                RuleArgs { program: Some(program), operator: Some(a), ..Default::default() };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::RSo => {
            let (t, vars) = gen.table(3);
            let program = gen.program(&t, &vars[..2], 2);
            let labels = gen.labels_of(&t, &vars[..2]);
            let mode = gen.mode();
            let st = gen.saturation();
            let j = gen.valid_premise(&t, program, &labels, mode, st, cfg)?;
            let chan_labels = gen.labels_of(&t, &vars[2..3]);
            let chan = gen.channel_on(&t, &chan_labels);
            let args = RuleArgs { channel: Some(chan), ..Default::default() };
            Ok(Case { table: t, premises: vec![j], args })
        }
        RuleId::REl | RuleId::REr => {
            let (t, vars) = gen.table(3);
            let program = gen.program(&t, &vars[..2], 2);
            let labels = gen.labels_of(&t, &vars[..2]);
            let mode = gen.mode();
            let st = gen.saturation();
            let j = gen.valid_premise(&t, program, &labels, mode, st, cfg)?;
            let s = gen.labels_of(&t, &vars[2..3]);
            let args = RuleArgs { labels: Some(s), ..Default::default() };
            Ok(Case { table: t, premises: vec![j], args })
        }
        RuleId::RTi => {
            let (t, vars) = gen.table(3);
            let program = gen.program(&t, &vars[..1], 2);
            let mode = gen.mode();
            let st = gen.saturation();
            let a = gen.effect_on(&t, &gen.labels_of(&t, &vars[..1]));
            let post = gen.effect_on(&t, &gen.labels_of(&t, &vars[..1]));
            let pre = match mode {
                Mode::Total => wp(&program, &post, &t, cfg)?,
                Mode::Partial => wlp(&program, &post, &t, cfg)?,
            };
            let _ = a;
            let s1 = gen.labels_of(&t, &vars[1..2]);
            let s2 = gen.labels_of(&t, &vars[2..3]);
            let big_pre = pre.tensor(&LabelledOperator::identity(&t, &s1))?;
            let big_post = post.tensor(&LabelledOperator::identity(&t, &s2))?;
            let premise = Judgment::new(big_pre, program, big_post, mode, st)?;
            let args = RuleArgs {
                operator: Some(pre),
                operator2: Some(post),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![premise], args })
        }
        RuleId::FrameT | RuleId::FrameP => {
            let (t, vars) = gen.table(3);
            let program = gen.program(&t, &vars[..2], 2);
            let mode = if rule == RuleId::FrameT { Mode::Total } else { Mode::Partial };
            let st = if rule == RuleId::FrameT { gen.saturation() } else { Saturation::Plain };
            let labels = gen.labels_of(&t, &vars[..2]);
            let j = gen.valid_premise(&t, program, &labels, mode, st, cfg)?;
            let s = gen.labels_of(&t, &vars[2..3]);
            let r = if rule == RuleId::FrameT {
                // Any positive operator, norm allowed above one.
                gen.psd_on(&t, &s, 0.8)
            } else {
                gen.effect_on(&t, &s)
            };
            let args = RuleArgs { operator: Some(r), ..Default::default() };
            Ok(Case { table: t, premises: vec![j], args })
        }
        RuleId::RPcT | RuleId::RPcP => {
            let (t, vars) = gen.table(3);
            let total = rule == RuleId::RPcT;
            let st = if total { gen.saturation() } else { Saturation::Plain };
            let mut premises = Vec::new();
            for v in &vars {
                let labels = gen.labels_of(&t, &[*v]);
                let d = t.var(*v).qtype.dimension();
                let program = Program::unitary(&t, &[*v], gen.unitary(d), "U").unwrap();
                let post = gen.effect_on(&t, &labels);
                let (mode, pre) = if total {
                    (Mode::Total, wp(&program, &post, &t, cfg)?)
                } else {
                    (Mode::Partial, wlp(&program, &post, &t, cfg)?)
                };
                premises.push(Judgment::new(pre, program, post, mode, st)?);
            }
            Ok(Case { table: t, premises, args: RuleArgs::default() })
        }
        RuleId::AxUtp | RuleId::AxUtfp | RuleId::AxUtfpState => {
            let (t, vars) = gen.table(2);
            let stmts: Vec<Program> = vars
                .iter()
                .map(|&v| {
                    let d = t.var(v).qtype.dimension();
                    Program::unitary(&t, &[v], gen.unitary(d), "U").unwrap()
                })
                .collect();
            let program = Program::desugar_for(stmts);
            let all = gen.labels_of(&t, &vars);
            let args = RuleArgs {
                program: Some(program),
                operator: Some(gen.hermitian_on(&t, &all)),
                ket: Some(gen.ket_on(&t, &all, 1.0)),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::AxInp | RuleId::AxInfp | RuleId::AxInfpState => {
            let (t, vars) = gen.table(2);
            let stmts: Vec<Program> = vars
                .iter()
                .map(|&v| {
                    let d = t.var(v).qtype.dimension();
                    Program::init_basis(&t, &[v], gen.rng.random_range(0..d)).unwrap()
                })
                .collect();
            let program = Program::desugar_for(stmts);
            let operators: Vec<LabelledOperator> =
                vars.iter().map(|&v| gen.hermitian_on(&t, &gen.labels_of(&t, &[v]))).collect();
            let args = RuleArgs {
                program: Some(program),
                operators,
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::RInner => {
            let (t, vars) = gen.table(2);
            let all = gen.labels_of(&t, &vars);
            let d = t.dim_of(&all);
            // Prepare a fixed pure state from any input.
            let init = Program::desugar_for(
                vars.iter().map(|&v| Program::init_basis(&t, &[v], 0).unwrap()).collect(),
            );
            let u = gen.unitary(d);
            let rotate = {
                let ordered = t.labels_of_vars(&vars);
                let op = LabelledOperator::operator_on(&t, &ordered, u.clone()).unwrap();
                Program::Unitary { vars: vars.clone(), op, display: "U".into() }
            };
            let program = Program::seq(init, rotate);
            let v_coeffs = u.column(0);
            let v = LabelledOperator::ket(&t, &t.labels_of_vars(&vars), &v_coeffs)?;
            // Present v in canonical order: operator_on uses the declared
            // order, which here is already canonical.
            let premise = Judgment::new(
                LabelledOperator::one(),
                program,
                v.outer_with_self()?,
                Mode::Total,
                Saturation::Saturated,
            )?;
            let u_labels = gen.labels_of(&t, &vars[..1]);
            let u_norm = gen.rng.random_range(0.2..1.0);
            let u_ket = gen.ket_on(&t, &u_labels, u_norm);
            let args = RuleArgs { ket: Some(u_ket), ..Default::default() };
            Ok(Case { table: t, premises: vec![premise], args })
        }
        RuleId::AxUTFState => {
            let (t, vars) = gen.table(1);
            let d = t.var(vars[0]).qtype.dimension();
            let program = Program::unitary(&t, &[vars[0]], gen.unitary(d), "U").unwrap();
            let v = gen.ket_on(&t, &gen.labels_of(&t, &vars), 1.0);
            let args = RuleArgs {
                program: Some(program),
                ket: Some(v),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
        RuleId::AxInFState => {
            let (t, vars) = gen.table(2);
            let d = t.var(vars[0]).qtype.dimension();
            let program = Program::init_basis(&t, &[vars[0]], gen.rng.random_range(0..d)).unwrap();
            let v = gen.ket_on(&t, &gen.labels_of(&t, &vars[1..2]), 1.0);
            let args = RuleArgs {
                program: Some(program),
                ket: Some(v),
                mode: Some(gen.mode()),
                saturation: Some(gen.saturation()),
                ..Default::default()
            };
            Ok(Case { table: t, premises: vec![], args })
        }
    }
}

/// Regenerates the instance behind a counterexample report: the same
/// `(rule, seed, trial)` always yields the same table, premises and derived
/// conclusion, so a failure can be replayed and inspected.
pub fn replay_case(
    rule: RuleId,
    seed: u64,
    trial: u64,
    cfg: &Config,
) -> Result<(VarTable, Vec<Judgment>, Judgment)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x100 + trial);
    let mut gen = Gen { rng };
    let case = generate(rule, &mut gen, cfg)?;
    let conclusion = apply_rule(rule, &case.premises, &case.args, &case.table, cfg)?;
    Ok((case.table, case.premises, conclusion))
}

/// Runs `trials` random instances of a rule. Returns statistics, or a
/// counterexample error naming the seed and trial that reproduce it.
pub fn soundness_fuzz(rule: RuleId, trials: u64, seed: u64, cfg: &Config) -> Result<FuzzReport> {
    let mut passes = 0u64;
    let mut min_slack = f64::INFINITY;
    for trial in 0..trials.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x100 + trial);
        let mut gen = Gen { rng };
        let case = generate(rule, &mut gen, cfg)?;
        let conclusion = apply_rule(rule, &case.premises, &case.args, &case.table, cfg)
            .map_err(|e| HoareError::Counterexample {
                rule: rule.name().into(),
                detail: format!("seed={seed} trial={trial}: rule application failed: {e}"),
            })?;
        let verdict = check_valid(&conclusion, &case.table, cfg).map_err(|e| {
            HoareError::Counterexample {
                rule: rule.name().into(),
                detail: format!("seed={seed} trial={trial}: conclusion check errored: {e}"),
            }
        })?;
        if !verdict.is_valid() {
            return Err(HoareError::Counterexample {
                rule: rule.name().into(),
                detail: format!(
                    "seed={seed} trial={trial}: conclusion invalid (slack {:.3e}, distance {:.3e})",
                    verdict.slack, verdict.distance
                ),
            });
        }
        if verdict.slack.is_finite() {
            min_slack = min_slack.min(verdict.slack);
        }
        passes += 1;
    }
    Ok(FuzzReport { rule: rule.name().into(), trials: trials.max(1), passes, min_slack })
}
