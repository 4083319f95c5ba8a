//! Quantum Hoare logic: judgment validity via weakest (liberal)
//! preconditions, a rule-application proof checker and a randomized
//! soundness harness.
//!
//! A judgment `{A_{S1}} C {B_{S2}}` is checked over the label set
//! `F = pset(C) u S1 u S2`; localization of the semantics justifies the
//! reduction from the global space. Total correctness holds iff
//! `cl_F(A) ⊑ wp(C, B)`, partial correctness iff `cl_F(A) ⊑ wlp(C, B)`,
//! and the saturated variants replace the order by closeness in Frobenius
//! norm.

pub mod fuzz;
pub mod outline;
pub mod rules;

use crate::config::Config;
use crate::dirac::{DiracError, LabelSet, LabelledOperator, VarTable};
use crate::linalg::{re, LinalgError, Scalar};
use crate::qwhile::{Program, QwhileError};
use crate::semantics::{self, SemanticsError, SuperOperator};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HoareError {
    #[error("rule {rule}: side condition violated: {condition}")]
    SideConditionViolated { rule: String, condition: String },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("outline step {index} failed: {reason}")]
    StepFailed { index: usize, reason: String },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("counterexample found for rule {rule}: {detail}")]
    Counterexample { rule: String, detail: String },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Qwhile(#[from] QwhileError),
}

pub type Result<T> = std::result::Result<T, HoareError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Partial,
    Total,
}

impl Mode {
    pub fn flip(self) -> Mode {
        match self {
            Mode::Partial => Mode::Total,
            Mode::Total => Mode::Partial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Saturation {
    Plain,
    Saturated,
}

/// A Hoare triple with its correctness mode and saturation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    pub pre: LabelledOperator,
    pub program: Program,
    pub post: LabelledOperator,
    pub mode: Mode,
    pub saturation: Saturation,
}

impl Judgment {
    pub fn new(
        pre: LabelledOperator,
        program: Program,
        post: LabelledOperator,
        mode: Mode,
        saturation: Saturation,
    ) -> Result<Self> {
        if !pre.is_square_on() || !post.is_square_on() {
            return Err(HoareError::Dirac(DiracError::NotSquare));
        }
        Ok(Judgment { pre, program, post, mode, saturation })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Valid,
    Invalid,
}

/// Outcome of a validity check. `slack` is the minimum eigenvalue of
/// `wp - cl(pre)` (NaN when the difference is not Hermitian); `distance` is
/// the relative Frobenius distance used by saturated checks.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    pub mode: Mode,
    pub saturation: Saturation,
    pub slack: f64,
    pub distance: f64,
    pub diagnostics: String,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }
}

const SATURATION_TOL: f64 = 1e-8;

/// Weakest precondition: the Heisenberg dual of the semantics applied to
/// the cylindrically extended postcondition.
pub fn wp(
    program: &Program,
    post: &LabelledOperator,
    table: &VarTable,
    cfg: &Config,
) -> Result<LabelledOperator> {
    let f = program.footprint().union(post.out_labels());
    let so = semantics::denote_on(program, table, &f, cfg)?;
    wp_against(&so, post, table, &f)
}

fn wp_against(
    so: &SuperOperator,
    post: &LabelledOperator,
    table: &VarTable,
    f: &LabelSet,
) -> Result<LabelledOperator> {
    let extended = post.cyl_extend(table, f)?;
    Ok(so.dual().apply(table, &extended)?)
}

/// Weakest liberal precondition `wp(C, B) + I - wp(C, I)`: the
/// nontermination mass is credited to the postcondition.
pub fn wlp(
    program: &Program,
    post: &LabelledOperator,
    table: &VarTable,
    cfg: &Config,
) -> Result<LabelledOperator> {
    let f = program.footprint().union(post.out_labels());
    let so = semantics::denote_on(program, table, &f, cfg)?;
    wlp_against(&so, post, table, &f)
}

fn wlp_against(
    so: &SuperOperator,
    post: &LabelledOperator,
    table: &VarTable,
    f: &LabelSet,
) -> Result<LabelledOperator> {
    let wp_b = wp_against(so, post, table, f)?;
    let id = LabelledOperator::identity(table, f);
    let wp_i = so.dual().apply(table, &id)?;
    Ok(wp_b.add(&id)?.sub(&wp_i)?)
}

/// Decides a judgment. The carrier is `pset(C) u S1 u S2`; an explicit
/// spectator-extension test in the suite guards this localization.
pub fn check_valid(j: &Judgment, table: &VarTable, cfg: &Config) -> Result<Verdict> {
    let f = j
        .program
        .footprint()
        .union(j.pre.out_labels())
        .union(j.post.out_labels());
    let so = semantics::denote_on(&j.program, table, &f, cfg)?;
    let target = match j.mode {
        Mode::Total => wp_against(&so, &j.post, table, &f)?,
        Mode::Partial => wlp_against(&so, &j.post, table, &f)?,
    };
    let lhs = j.pre.cyl_extend(table, &f)?;
    let diff = target.sub(&lhs)?;
    let herm_tol = cfg.psd_tol.max(1e-8);
    let slack = if diff.matrix().is_hermitian(herm_tol) {
        diff.matrix().min_eigenvalue(herm_tol)?
    } else {
        f64::NAN
    };
    let dist = diff.matrix().frob_norm();
    let distance = dist / target.matrix().frob_norm().max(1.0);
    let status = match j.saturation {
        Saturation::Saturated => {
            if dist <= SATURATION_TOL * target.matrix().frob_norm().max(1.0) {
                Status::Valid
            } else {
                Status::Invalid
            }
        }
        Saturation::Plain => {
            if !lhs.matrix().is_hermitian(herm_tol) {
                return Err(HoareError::Linalg(LinalgError::NotHermitian(0.0)));
            }
            if !target.matrix().is_hermitian(herm_tol) {
                return Err(HoareError::Linalg(LinalgError::NotHermitian(0.0)));
            }
            if slack >= -cfg.psd_tol * target.matrix().frob_norm().max(1.0) {
                Status::Valid
            } else {
                Status::Invalid
            }
        }
    };
    Ok(Verdict {
        status,
        mode: j.mode,
        saturation: j.saturation,
        slack,
        distance,
        diagnostics: String::new(),
    })
}

/// State-form triple `{u u^dag} C {v v^dag}`.
pub fn check_state_triple(
    u: &LabelledOperator,
    program: &Program,
    v: &LabelledOperator,
    mode: Mode,
    saturation: Saturation,
    table: &VarTable,
    cfg: &Config,
) -> Result<Verdict> {
    for ket in [u, v] {
        if !ket.in_labels().is_empty() {
            return Err(HoareError::Dirac(DiracError::NotSquare));
        }
        if ket.norm() > 1.0 + 1e-9 {
            return Err(HoareError::NotNormalized(ket.norm()));
        }
    }
    let mut diagnostics = String::new();
    if saturation == Saturation::Saturated
        && ((u.norm() - 1.0).abs() > cfg.eq_tol || (v.norm() - 1.0).abs() > cfg.eq_tol)
    {
        diagnostics = format!(
            "warning: saturated state triple with non-unit norms |u|={:.6}, |v|={:.6}",
            u.norm(),
            v.norm()
        );
    }
    let j = Judgment::new(
        u.outer_with_self()?,
        program.clone(),
        v.outer_with_self()?,
        mode,
        saturation,
    )?;
    let mut verdict = check_valid(&j, table, cfg)?;
    if !diagnostics.is_empty() {
        verdict.diagnostics = diagnostics;
    }
    Ok(verdict)
}

/// Löwner comparison of labelled operators over the union of their labels.
pub fn loewner_leq_labelled(
    a: &LabelledOperator,
    b: &LabelledOperator,
    table: &VarTable,
    tol: f64,
) -> Result<bool> {
    let union = a.out_labels().union(b.out_labels());
    let ae = a.cyl_extend(table, &union)?;
    let be = b.cyl_extend(table, &union)?;
    Ok(ae.matrix().loewner_leq(be.matrix(), tol)?)
}

/// `0 ⊑ A` over its own labels.
pub fn is_positive_labelled(a: &LabelledOperator, tol: f64) -> Result<bool> {
    if !a.is_square_on() {
        return Err(HoareError::Dirac(DiracError::NotSquare));
    }
    Ok(a.matrix().is_psd(tol)?)
}

/// `0 ⊑ A ⊑ I` over its own labels.
pub fn is_effect_labelled(a: &LabelledOperator, tol: f64) -> Result<bool> {
    if !a.is_square_on() {
        return Err(HoareError::Dirac(DiracError::NotSquare));
    }
    Ok(a.matrix().is_effect(tol)?)
}

/// Extracts the ket of a rank-one positive operator `v v^dag`, scaled so
/// its norm matches. Fails when the operator has more than one significant
/// eigenvalue.
pub fn pure_ket_of(state: &LabelledOperator, tol: f64) -> Result<LabelledOperator> {
    if !state.is_square_on() {
        return Err(HoareError::Dirac(DiracError::NotSquare));
    }
    let eig = state.matrix().hermitian_eig(tol.max(1e-8))?;
    let n = eig.eigenvalues.len();
    let top = eig.eigenvalues[n - 1];
    if top < 0.0 {
        return Err(HoareError::SideConditionViolated {
            rule: "state extraction".into(),
            condition: "operator is not positive".into(),
        });
    }
    let below: f64 = eig.eigenvalues[..n - 1].iter().map(|l| l.abs()).sum();
    if below > tol.max(1e-8) * top.max(1.0) {
        return Err(HoareError::SideConditionViolated {
            rule: "state extraction".into(),
            condition: "operator is not rank one".into(),
        });
    }
    let col = eig.eigenvectors.column(n - 1);
    let scaled: Vec<Scalar> = col.iter().map(|z| z * re(top.sqrt())).collect();
    // The eigenvector is already in the canonical basis of the label set.
    Ok(state.ket_like(&scaled)?)
}

/// The scalar-one labelled operator.
pub fn scalar_one() -> LabelledOperator {
    LabelledOperator::one()
}

pub use fuzz::{soundness_fuzz, FuzzReport};
pub use outline::{check_outline, OutlineReport, StepResult};
pub use rules::{apply_rule, RuleArgs, RuleId, ALL_RULES};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::VarId;
    use crate::linalg::ComplexMatrix;
    use crate::qtypes::{hadamard, QType};
    use crate::qwhile::parse::parse_program;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn cfg() -> Config {
        Config::default()
    }

    fn c(re_: f64, im: f64) -> Scalar {
        Scalar::new(re_, im)
    }

    fn random_hermitian_on(
        rng: &mut StdRng,
        table: &VarTable,
        labels: &LabelSet,
    ) -> LabelledOperator {
        let d = table.dim_of(labels);
        let m = ComplexMatrix::from_fn(d, d, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = m.add(&m.adjoint()).unwrap().scale(re(0.5));
        LabelledOperator::operator_on(table, labels.as_slice(), h).unwrap()
    }

    #[test]
    fn wp_of_skip_is_post() {
        let p = parse_program("var x : bool; skip;", &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let b = random_hermitian_on(&mut rng, &p.table, &LabelSet::from_slice(&p.table.var(x).labels));
        let got = wp(&p.program(), &b, &p.table, &cfg()).unwrap();
        assert!(got.approx_eq(&b, 1e-12));
    }

    #[test]
    fn wp_of_unitary_is_conjugation() {
        let p = parse_program("var x : bool; x := H[x];", &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let labels = p.table.var(x).labels.clone();
        let mut rng = StdRng::seed_from_u64(2);
        let a = random_hermitian_on(&mut rng, &p.table, &LabelSet::from_slice(&labels));
        let got = wp(&p.program(), &a, &p.table, &cfg()).unwrap();
        let h = LabelledOperator::operator_on(&p.table, &labels, hadamard()).unwrap();
        let expected = h.adjoint().compose(&a).unwrap().compose(&h).unwrap();
        assert!(got.approx_eq(&expected, 1e-11));
    }

    #[test]
    fn wlp_of_abort_is_identity() {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::Bool).unwrap();
        let labels = LabelSet::from_slice(&t.var(x).labels);
        let b = LabelledOperator::basis_ket(&t, &t.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        // wp(abort, B) = 0, hence wlp = I.
        let got = wlp(&Program::Abort, &b, &t, &cfg()).unwrap();
        assert!(got.approx_eq(&LabelledOperator::identity(&t, &labels), 1e-12));
        let got_wp = wp(&Program::Abort, &b, &t, &cfg()).unwrap();
        assert!(got_wp.norm() < 1e-14);
    }

    #[test]
    fn skip_identity_triple_is_valid() {
        let p = parse_program("var x : bool; skip;", &HashMap::new()).unwrap();
        let labels = p.program().footprint();
        let x = p.table.lookup("x").unwrap();
        let set = LabelSet::from_slice(&p.table.var(x).labels);
        let _ = labels;
        let id = LabelledOperator::identity(&p.table, &set);
        let j = Judgment::new(id.clone(), p.program(), id, Mode::Total, Saturation::Saturated)
            .unwrap();
        let v = check_valid(&j, &p.table, &cfg()).unwrap();
        assert!(v.is_valid());
        assert!(v.slack > -1e-12);
    }

    #[test]
    fn abort_partial_vs_total() {
        let one = scalar_one();
        let zero = LabelledOperator::scalar(Scalar::ZERO);
        let j_partial =
            Judgment::new(one.clone(), Program::Abort, zero.clone(), Mode::Partial, Saturation::Plain)
                .unwrap();
        let mut t = VarTable::new();
        t.declare("pad", QType::Bool).unwrap();
        assert!(check_valid(&j_partial, &t, &cfg()).unwrap().is_valid());
        let j_total =
            Judgment::new(one, Program::Abort, zero, Mode::Total, Saturation::Plain).unwrap();
        assert!(!check_valid(&j_total, &t, &cfg()).unwrap().is_valid());
    }

    #[test]
    fn state_triple_hadamard() {
        let p = parse_program("var x : bool; x := H[x];", &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let labels = p.table.var(x).labels.clone();
        let k0 = LabelledOperator::basis_ket(&p.table, &labels, 0).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        let plus = LabelledOperator::ket(&p.table, &labels, &[re(h), re(h)]).unwrap();
        let v = check_state_triple(
            &k0,
            &p.program(),
            &plus,
            Mode::Total,
            Saturation::Saturated,
            &p.table,
            &cfg(),
        )
        .unwrap();
        assert!(v.is_valid());
        // Wrong post is invalid.
        let k1 = LabelledOperator::basis_ket(&p.table, &labels, 1).unwrap();
        let v = check_state_triple(
            &k0,
            &p.program(),
            &k1,
            Mode::Total,
            Saturation::Saturated,
            &p.table,
            &cfg(),
        )
        .unwrap();
        assert!(!v.is_valid());
    }

    #[test]
    fn state_triple_invariant_under_skip() {
        let mut t = VarTable::new();
        let a = t.declare("a", QType::Bool).unwrap();
        let b = t.declare("b", QType::ZN(3)).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let mk = |rng: &mut StdRng, t: &VarTable, v: VarId| {
            let d = t.var(v).qtype.dimension();
            let raw: Vec<Scalar> = (0..d)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let coeffs: Vec<Scalar> = raw.iter().map(|z| z / re(norm)).collect();
            LabelledOperator::ket(t, &t.var(v).labels, &coeffs).unwrap()
        };
        let phi = mk(&mut rng, &t, a);
        let psi = mk(&mut rng, &t, b);
        let joint = phi.tensor(&psi).unwrap();
        let v = check_state_triple(
            &joint,
            &Program::Skip,
            &joint,
            Mode::Total,
            Saturation::Saturated,
            &t,
            &cfg(),
        )
        .unwrap();
        assert!(v.is_valid());
    }

    #[test]
    fn wp_iff_characterization_on_random_instances() {
        // check_valid(total) must agree with the direct Löwner comparison
        // against wp, being literally the same computation on two paths.
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..40 {
            let mut t = VarTable::new();
            let x = t.declare("x", QType::Bool).unwrap();
            let y = t.declare("y", QType::ZN(3)).unwrap();
            let src_choices = [
                "x := H[x];",
                "x := |0>;",
                "if meas [x] { 0 -> { skip; } 1 -> { x := H[x]; } }",
                "skip;",
            ];
            let src = format!("var x : bool; var y : int<3>; {}", src_choices[trial % 4]);
            let p = parse_program(&src, &HashMap::new()).unwrap();
            let labels = LabelSet::from_slice(&t.var(x).labels)
                .union(&LabelSet::from_slice(&t.var(y).labels));
            let _ = labels;
            let sa = LabelSet::from_slice(&p.table.var(p.table.lookup("x").unwrap()).labels);
            let sb = LabelSet::from_slice(&p.table.var(p.table.lookup("y").unwrap()).labels);
            let a = random_hermitian_on(&mut rng, &p.table, &sa);
            let b = random_hermitian_on(&mut rng, &p.table, &sb);
            let j = Judgment::new(
                a.clone(),
                p.program(),
                b.clone(),
                Mode::Total,
                Saturation::Plain,
            )
            .unwrap();
            let via_checker = check_valid(&j, &p.table, &cfg()).unwrap().is_valid();
            let f = p.program().footprint().union(&sa).union(&sb);
            let wp_b = wp(&p.program(), &b, &p.table, &cfg()).unwrap();
            let wp_ext = wp_b.cyl_extend(&p.table, &f).unwrap();
            let a_ext = a.cyl_extend(&p.table, &f).unwrap();
            let direct = a_ext
                .matrix()
                .loewner_leq(wp_ext.matrix(), cfg().psd_tol)
                .unwrap();
            assert_eq!(via_checker, direct, "trial {trial}");
        }
    }

    #[test]
    fn wlp_of_trace_preserving_is_identity_on_identity() {
        let p = parse_program("var x : bool; x := H[x];", &HashMap::new()).unwrap();
        let f = p.program().footprint();
        let id = LabelledOperator::identity(&p.table, &f);
        let got = wlp(&p.program(), &id, &p.table, &cfg()).unwrap();
        assert!(got.approx_eq(&id, 1e-11));
    }

    #[test]
    fn footprint_independence_of_checking() {
        let src = "var x : bool; x := H[x];";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let labels = p.table.var(x).labels.clone();
        let k0 = LabelledOperator::basis_ket(&p.table, &labels, 0).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        let plus = LabelledOperator::ket(&p.table, &labels, &[re(h), re(h)]).unwrap();
        let j = Judgment::new(
            k0.outer_with_self().unwrap(),
            p.program(),
            plus.outer_with_self().unwrap(),
            Mode::Total,
            Saturation::Saturated,
        )
        .unwrap();
        let v1 = check_valid(&j, &p.table, &cfg()).unwrap();
        // A fresh unused variable must not change the verdict.
        let mut bigger = p.table.clone();
        bigger.declare("spectator", QType::ZN(3)).unwrap();
        let v2 = check_valid(&j, &bigger, &cfg()).unwrap();
        assert_eq!(v1.is_valid(), v2.is_valid());
        assert!((v1.slack - v2.slack).abs() < 1e-10);
    }

    #[test]
    fn pure_ket_extraction() {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::ZN(3)).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let raw: Vec<Scalar> =
            (0..3).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let coeffs: Vec<Scalar> = raw.iter().map(|z| z * re(0.7 / norm)).collect();
        let ket = LabelledOperator::ket(&t, &t.var(x).labels, &coeffs).unwrap();
        let rho = ket.outer_with_self().unwrap();
        let back = pure_ket_of(&rho, 1e-9).unwrap();
        // Phases may differ; outer products must agree.
        assert!(back.outer_with_self().unwrap().approx_eq(&rho, 1e-10));
        assert!((back.norm() - 0.7).abs() < 1e-10);
        let mixed = rho
            .scale(re(0.5))
            .add(
                &LabelledOperator::basis_ket(&t, &t.var(x).labels, 0)
                    .unwrap()
                    .outer_with_self()
                    .unwrap()
                    .scale(re(0.5)),
            )
            .unwrap();
        assert!(pure_ket_of(&mixed, 1e-9).is_err());
    }
}
