//! Built-in example algorithms with their correctness triples, reproduced
//! numerically at small parameters: hidden subgroup sampling, Grover
//! search, quantum phase estimation, the Fourier and reversal circuits,
//! the hidden linear function algorithm, the linear-system solver loop and
//! parallel Hadamard layers.

use crate::config::Config;
use crate::dirac::{LabelSet, LabelledOperator, VarId, VarTable};
use crate::group::{AbelianGroup, Subgroup};
use crate::hoare::{self, HoareError, Judgment, Mode, Saturation, Verdict};
use crate::linalg::{re, ComplexMatrix, Scalar};
use crate::qtypes::{self, QType};
use crate::qwhile::{Program, QwhileError};
use crate::semantics::{self, QualityReport};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("bad hiding function: {0}")]
    BadHidingFunction(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Hoare(#[from] HoareError),
    #[error(transparent)]
    Qwhile(#[from] QwhileError),
    #[error(transparent)]
    Dirac(#[from] crate::dirac::DiracError),
    #[error(transparent)]
    Gate(#[from] crate::qtypes::GateError),
    #[error(transparent)]
    Semantics(#[from] crate::semantics::SemanticsError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, CaseStudyError>;

/// One correctness claim of a case study.
#[derive(Debug, Clone)]
pub struct Triple {
    pub description: String,
    pub pre: LabelledOperator,
    pub post: LabelledOperator,
    pub mode: Mode,
    pub saturation: Saturation,
}

/// A built program with its claimed triples.
#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub name: String,
    pub table: VarTable,
    pub program: Program,
    pub triples: Vec<Triple>,
}

impl CaseStudy {
    /// Checks every triple, returning the description and verdict of each.
    pub fn check(&self, cfg: &Config) -> Result<Vec<(String, Verdict)>> {
        let mut out = Vec::new();
        for t in &self.triples {
            let j = Judgment::new(
                t.pre.clone(),
                self.program.clone(),
                t.post.clone(),
                t.mode,
                t.saturation,
            )?;
            let v = hoare::check_valid(&j, &self.table, cfg)?;
            out.push((t.description.clone(), v));
        }
        Ok(out)
    }

    pub fn all_valid(&self, cfg: &Config) -> Result<bool> {
        Ok(self.check(cfg)?.iter().all(|(_, v)| v.is_valid()))
    }

    /// CP / trace behaviour of the program's denotation.
    pub fn quality(&self, cfg: &Config) -> Result<QualityReport> {
        let so = semantics::denote(&self.program, &self.table, cfg)?;
        Ok(so.quality(cfg.psd_tol)?)
    }

    /// Runs the program on an input state (the maximally mixed state on the
    /// footprint when absent) and returns the output density operator.
    pub fn simulate(&self, input: Option<&LabelledOperator>, cfg: &Config) -> Result<LabelledOperator> {
        let f = self.program.footprint();
        let so = semantics::denote(&self.program, &self.table, cfg)?;
        let rho = match input {
            Some(r) => r.clone(),
            None => {
                let d = self.table.dim_of(&f);
                LabelledOperator::identity(&self.table, &f).scale(re(1.0 / d as f64))
            }
        };
        Ok(so.apply(&self.table, &rho)?)
    }

    /// Composes the unitaries of a measurement-free circuit into a single
    /// labelled operator.
    pub fn circuit_unitary(&self) -> Result<LabelledOperator> {
        let mut acc = LabelledOperator::one();
        for stmt in self.program.statements() {
            match stmt {
                Program::Unitary { op, .. } => acc = op.compose(&acc)?,
                Program::Skip => {}
                other => {
                    return Err(CaseStudyError::BadParam(format!(
                        "circuit contains a non-unitary statement: {other:?}"
                    )))
                }
            }
        }
        Ok(acc)
    }
}

/// Probability of each joint basis outcome of `vars` in the state `rho`.
pub fn basis_distribution(
    table: &VarTable,
    rho: &LabelledOperator,
    vars: &[VarId],
) -> Result<Vec<f64>> {
    let ordered = table.labels_of_vars(vars);
    let dim: usize = ordered.iter().map(|&l| table.dim(l)).product();
    let mut out = Vec::with_capacity(dim);
    for t in 0..dim {
        let proj = LabelledOperator::basis_ket(table, &ordered, t)?.outer_with_self()?;
        let val = proj.cyl_extend(table, rho.out_labels())?.compose(rho)?.trace()?;
        out.push(val.re);
    }
    Ok(out)
}

// ---------------------------------------------------------------- HSP ----

/// Hidden subgroup sampling over a finite abelian group. The hiding
/// function is synthesized from the coset structure: `f(g)` is the index of
/// the coset of `g`, realizing oracle access concretely.
pub fn hsp(group: &AbelianGroup, subgroup: &Subgroup) -> Result<CaseStudy> {
    if subgroup.parent() != group {
        return Err(CaseStudyError::BadHidingFunction("subgroup of a different group".into()));
    }
    let cosets = subgroup.cosets();
    let y_dim = cosets.len();
    let mut f = vec![0usize; group.order()];
    for (idx, coset) in cosets.iter().enumerate() {
        for &g in coset {
            f[g] = idx;
        }
    }
    // f must be constant on cosets and injective across them; both hold by
    // construction, checked here against the subgroup directly.
    for g1 in group.elements() {
        for g2 in group.elements() {
            let same = f[g1] == f[g2];
            let in_h = subgroup.contains(group.add(g1, group.neg(g2)));
            if same != in_h {
                return Err(CaseStudyError::BadHidingFunction(format!(
                    "f({g1}) vs f({g2}) disagrees with the coset structure"
                )));
            }
        }
    }

    let mut table = VarTable::new();
    let mut xs = Vec::new();
    for (i, &p) in group.moduli().iter().enumerate() {
        xs.push(table.declare(&format!("x{i}"), QType::ZN(p))?);
    }
    let y = table.declare("y", QType::ZN(y_dim))?;

    let mut stmts = Vec::new();
    for &x in &xs {
        stmts.push(Program::init_basis(&table, &[x], 0)?);
    }
    stmts.push(Program::init_basis(&table, &[y], 0)?);
    for (&x, &p) in xs.iter().zip(group.moduli()) {
        stmts.push(Program::unitary(&table, &[x], qtypes::qft(p), "QFT")?);
    }
    let mut oracle_vars = xs.clone();
    oracle_vars.push(y);
    stmts.push(Program::unitary(
        &table,
        &oracle_vars,
        qtypes::oracle(&f, y_dim)?,
        "Oracle",
    )?);
    for (&x, &p) in xs.iter().zip(group.moduli()) {
        stmts.push(Program::unitary(&table, &[x], qtypes::qft(p), "QFT")?);
    }
    let program = Program::desugar_for(stmts);

    let perp = subgroup.orthogonal_subgroup();
    let x_labels = table.labels_of_vars(&xs);
    let mut triples = Vec::new();
    for g in group.elements() {
        let post = LabelledOperator::basis_ket(&table, &x_labels, g)?.outer_with_self()?;
        let weight = if perp.contains(g) { 1.0 / perp.order() as f64 } else { 0.0 };
        triples.push(Triple {
            description: format!("Pr(g={g}) = {weight:.6}"),
            pre: LabelledOperator::scalar(re(weight)),
            post,
            mode: Mode::Total,
            saturation: Saturation::Saturated,
        });
    }
    Ok(CaseStudy { name: format!("hsp({:?})", group.moduli()), table, program, triples })
}

/// Measured distribution over the group register after running HSP.
pub fn hsp_distribution(cs: &CaseStudy, group: &AbelianGroup, cfg: &Config) -> Result<Vec<f64>> {
    let rho = cs.simulate(None, cfg)?;
    let xs: Vec<VarId> = (0..group.moduli().len())
        .map(|i| cs.table.lookup(&format!("x{i}")).expect("hsp register"))
        .collect();
    basis_distribution(&cs.table, &rho, &xs)
}

/// Re-derives the HSP triples through the inner-product rule: from the
/// forward judgment `{1} HSP {|v><v|}` it projects onto each basis outcome
/// and compares the derived weight with the claimed one.
pub fn hsp_inner_pathway(
    cs: &CaseStudy,
    group: &AbelianGroup,
    subgroup: &Subgroup,
    cfg: &Config,
) -> Result<bool> {
    let rho = cs.simulate(None, cfg)?;
    let v = hoare::pure_ket_of(&rho, 1e-7)?;
    let premise = Judgment::new(
        LabelledOperator::one(),
        cs.program.clone(),
        v.outer_with_self()?,
        Mode::Total,
        Saturation::Saturated,
    )?;
    if !hoare::check_valid(&premise, &cs.table, cfg)?.is_valid() {
        return Ok(false);
    }
    let perp = subgroup.orthogonal_subgroup();
    let xs: Vec<VarId> = (0..group.moduli().len())
        .map(|i| cs.table.lookup(&format!("x{i}")).expect("hsp register"))
        .collect();
    let x_labels = cs.table.labels_of_vars(&xs);
    for g in group.elements() {
        let u = LabelledOperator::basis_ket(&cs.table, &x_labels, g)?;
        let args = hoare::RuleArgs { ket: Some(u), ..Default::default() };
        let derived = hoare::apply_rule(
            hoare::RuleId::RInner,
            std::slice::from_ref(&premise),
            &args,
            &cs.table,
            cfg,
        )?;
        let expected = if perp.contains(g) { 1.0 / perp.order() as f64 } else { 0.0 };
        let got = derived.pre.as_scalar().expect("scalar precondition");
        if (got - re(expected)).norm() > 1e-8 {
            return Ok(false);
        }
        if !hoare::check_valid(&derived, &cs.table, cfg)?.is_valid() {
            return Ok(false);
        }
    }
    Ok(true)
}

// ------------------------------------------------------------- Grover ----

/// Grover search over a type of size `n` with marked set `f` and `r`
/// rounds.
pub fn grover(n: usize, f: &[bool], rounds: usize) -> Result<CaseStudy> {
    if f.len() != n || n < 2 {
        return Err(CaseStudyError::BadParam("marked table must match the type size".into()));
    }
    let marked = f.iter().filter(|&&b| b).count();
    if marked == 0 {
        return Err(CaseStudyError::BadParam("no marked element".into()));
    }
    let t0 = 0usize;
    let mut table = VarTable::new();
    let x = table.declare("x", QType::ZN(n))?;
    let uniform = qtypes::uniform_unitary(n, t0);
    let mut marker = vec![false; n];
    marker[t0] = true;

    let mut stmts = vec![
        Program::init_basis(&table, &[x], t0)?,
        Program::unitary(&table, &[x], uniform.clone(), "Hn")?,
    ];
    for _ in 0..rounds {
        stmts.push(Program::unitary(&table, &[x], qtypes::phase_oracle(f), "PhOracle(f)")?);
        stmts.push(Program::unitary(&table, &[x], uniform.adjoint(), "adj(Hn)")?);
        stmts.push(Program::unitary(&table, &[x], qtypes::phase_oracle(&marker), "PhOracle(t0)")?);
        stmts.push(Program::unitary(&table, &[x], uniform.clone(), "Hn")?);
    }
    let program = Program::desugar_for(stmts);

    let theta = ((marked as f64) / (n as f64)).sqrt().asin();
    let success = ((2 * rounds + 1) as f64 * theta).sin().powi(2);
    let labels = table.var(x).labels.clone();
    let mut post = LabelledOperator::zero(
        &table,
        &LabelSet::from_slice(&labels),
        &LabelSet::from_slice(&labels),
    );
    for (i, &hit) in f.iter().enumerate() {
        if hit {
            post =
                post.add(&LabelledOperator::basis_ket(&table, &labels, i)?.outer_with_self()?)?;
        }
    }
    let triples = vec![
        Triple {
            description: format!("total: sin^2((2r+1)t) = {success:.9}"),
            pre: LabelledOperator::scalar(re(success)),
            post: post.clone(),
            mode: Mode::Total,
            saturation: Saturation::Plain,
        },
        Triple {
            description: "partial variant".into(),
            pre: LabelledOperator::scalar(re(success)),
            post,
            mode: Mode::Partial,
            saturation: Saturation::Plain,
        },
    ];
    Ok(CaseStudy { name: format!("grover({n},{marked},{rounds})"), table, program, triples })
}

/// The closed-form Grover precondition for the triple's weight.
pub fn grover_success_probability(n: usize, marked: usize, rounds: usize) -> f64 {
    let theta = ((marked as f64) / (n as f64)).sqrt().asin();
    ((2 * rounds + 1) as f64 * theta).sin().powi(2)
}

// ---------------------------------------------------------------- QPE ----

/// Quantum phase estimation with `n` control values for a diagonal unitary
/// with phase `theta` on the eigenvector `|0>` of an `m`-dimensional
/// target.
pub fn qpe(n: usize, m: usize, theta: f64, cfg: &Config) -> Result<CaseStudy> {
    if n < 2 || m < 2 {
        return Err(CaseStudyError::BadParam("need n, m >= 2".into()));
    }
    let mut table = VarTable::new();
    let x = table.declare("x", QType::ZN(n))?;
    let y = table.declare("y", QType::ZN(m))?;
    // Diagonal target unitary: eigenvector |0> carries the phase under
    // estimation, the other eigenvalues are incommensurate.
    let mut phases = vec![theta];
    for k in 1..m {
        phases.push(0.137 + 0.41 * k as f64);
    }
    let u = ComplexMatrix::diag(
        &phases.iter().map(|&p| Scalar::from_polar(1.0, TAU * p)).collect::<Vec<_>>(),
    );
    let mut powers = Vec::with_capacity(n);
    let mut acc = ComplexMatrix::identity(m);
    for _ in 0..n {
        powers.push(acc.clone());
        acc = acc.matmul(&u)?;
    }
    let stmts = vec![
        Program::init_basis(&table, &[x], 0)?,
        Program::unitary(&table, &[x], qtypes::uniform_unitary(n, 0), "Hn")?,
        Program::unitary(&table, &[x, y], qtypes::multiplexer(&powers)?, "Multiplexer")?,
        Program::unitary(&table, &[x], qtypes::qft(n).adjoint(), "IQFT")?,
    ];
    let program = Program::desugar_for(stmts);

    // Derive the amplitudes c(a) from simulation: run on |phi>_y and read
    // off the joint output ket.
    let phi = LabelledOperator::basis_ket(&table, &table.var(y).labels, 0)?;
    let x_mixed = LabelledOperator::identity(
        &table,
        &LabelSet::from_slice(&table.var(x).labels),
    )
    .scale(re(1.0 / n as f64));
    let input = x_mixed.tensor(&phi.outer_with_self()?)?;
    let so = semantics::denote(&program, &table, cfg)?;
    let out = so.apply(&table, &input)?;
    let out_ket = hoare::pure_ket_of(&out, 1e-7)?;

    let mut triples = Vec::new();
    let x_labels = table.labels_of_vars(&[x]);
    for a in 0..n {
        let a_phi = LabelledOperator::basis_ket(&table, &x_labels, a)?.tensor(&phi)?;
        let c_a = a_phi.adjoint().compose(&out_ket)?.as_scalar().expect("scalar");
        let pre_ket = phi.scale(c_a);
        triples.push(Triple {
            description: format!("outcome {a} with |c|^2 = {:.9}", c_a.norm_sqr()),
            pre: pre_ket.outer_with_self()?,
            post: a_phi.outer_with_self()?,
            mode: Mode::Total,
            saturation: Saturation::Saturated,
        });
    }
    Ok(CaseStudy { name: format!("qpe({n},{theta:.4})"), table, program, triples })
}

/// Outcome distribution of the control register when the target holds the
/// eigenvector.
pub fn qpe_distribution(cs: &CaseStudy, n: usize, m: usize, cfg: &Config) -> Result<Vec<f64>> {
    let x = cs.table.lookup("x").expect("qpe register");
    let y = cs.table.lookup("y").expect("qpe target");
    let phi = LabelledOperator::basis_ket(&cs.table, &cs.table.var(y).labels, 0)?;
    let x_mixed = LabelledOperator::identity(
        &cs.table,
        &LabelSet::from_slice(&cs.table.var(x).labels),
    )
    .scale(re(1.0 / n as f64));
    let _ = m;
    let input = x_mixed.tensor(&phi.outer_with_self()?)?;
    let rho = cs.simulate(Some(&input), cfg)?;
    basis_distribution(&cs.table, &rho, &[x])
}

// ------------------------------------------------- QFT / reverse wires ----

fn swap_stmt(table: &VarTable, a: VarId, b: VarId) -> Result<Program> {
    let d = table.var(a).qtype.dimension();
    Ok(Program::unitary(table, &[a, b], qtypes::swap(d), "SWAP")?)
}

/// Wire-reversal circuit over variables of palindromic dimensions.
pub fn rev_circuit(dims: &[usize]) -> Result<CaseStudy> {
    let n = dims.len();
    for i in 0..n {
        if dims[i] != dims[n - 1 - i] {
            return Err(CaseStudyError::BadParam("dimensions must be palindromic".into()));
        }
    }
    let mut table = VarTable::new();
    let xs: Vec<VarId> = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| table.declare(&format!("x{i}"), QType::ZN(d)))
        .collect::<crate::dirac::Result<_>>()?;
    let mut stmts = Vec::new();
    for i in 0..n / 2 {
        stmts.push(swap_stmt(&table, xs[i], xs[n - 1 - i])?);
    }
    let program = Program::desugar_for(stmts);

    let labels = table.labels_of_vars(&xs);
    let total: usize = dims.iter().product();
    let mut triples = Vec::new();
    for t in 0..total {
        // Digits of t, then reversed.
        let mut digits = vec![0usize; n];
        let mut rem = t;
        for i in (0..n).rev() {
            digits[i] = rem % dims[i];
            rem /= dims[i];
        }
        let rev: usize = (0..n).fold(0, |acc, i| acc * dims[i] + digits[n - 1 - i]);
        for mode in [Mode::Total, Mode::Partial] {
            triples.push(Triple {
                description: format!("|{t}> -> |{rev}> ({mode:?})"),
                pre: LabelledOperator::basis_ket(&table, &labels, t)?.outer_with_self()?,
                post: LabelledOperator::basis_ket(&table, &labels, rev)?.outer_with_self()?,
                mode,
                saturation: Saturation::Saturated,
            });
        }
    }
    Ok(CaseStudy { name: format!("rev_circuit({dims:?})"), table, program, triples })
}

fn qft_iter(table: &VarTable, wires: &[VarId], stmts: &mut Vec<Program>) -> Result<()> {
    if wires.is_empty() {
        return Ok(());
    }
    let head = wires[0];
    stmts.push(Program::unitary(table, &[head], qtypes::hadamard(), "H")?);
    for (i, &w) in wires[1..].iter().enumerate() {
        let gate = qtypes::controlled(&qtypes::phase(qtypes::qft_rotation_angle(i as u32 + 1)));
        stmts.push(Program::unitary(table, &[w, head], gate, "CU(Ph)")?);
    }
    qft_iter(table, &wires[1..], stmts)
}

/// Fourier circuit on `n` qubits: the rotation ladder followed by wire
/// reversal.
pub fn qft_circuit(n: usize) -> Result<CaseStudy> {
    if n == 0 {
        return Err(CaseStudyError::BadParam("need at least one qubit".into()));
    }
    let mut table = VarTable::new();
    let xs: Vec<VarId> = (0..n)
        .map(|i| table.declare(&format!("s{i}"), QType::Bool))
        .collect::<crate::dirac::Result<_>>()?;
    let mut stmts = Vec::new();
    qft_iter(&table, &xs, &mut stmts)?;
    for i in 0..n / 2 {
        stmts.push(swap_stmt(&table, xs[i], xs[n - 1 - i])?);
    }
    let program = Program::desugar_for(stmts);

    let labels = table.labels_of_vars(&xs);
    let dim = 1usize << n;
    let fourier = qtypes::qft(dim);
    let mut triples = Vec::new();
    for b in 0..dim {
        let post_ket = {
            let coeffs = fourier.column(b);
            LabelledOperator::ket(&table, &labels, &coeffs)?
        };
        for mode in [Mode::Total, Mode::Partial] {
            triples.push(Triple {
                description: format!("|{b}> -> Fourier basis {b} ({mode:?})"),
                pre: LabelledOperator::basis_ket(&table, &labels, b)?.outer_with_self()?,
                post: post_ket.outer_with_self()?,
                mode,
                saturation: Saturation::Saturated,
            });
        }
    }
    Ok(CaseStudy { name: format!("qft_circuit({n})"), table, program, triples })
}

/// The ladder part of the Fourier circuit alone (before wire reversal).
pub fn qft_ladder_unitary(n: usize) -> Result<LabelledOperator> {
    let mut table = VarTable::new();
    let xs: Vec<VarId> = (0..n)
        .map(|i| table.declare(&format!("s{i}"), QType::Bool))
        .collect::<crate::dirac::Result<_>>()?;
    let mut stmts = Vec::new();
    qft_iter(&table, &xs, &mut stmts)?;
    let cs = CaseStudy {
        name: "ladder".into(),
        table,
        program: Program::desugar_for(stmts),
        triples: vec![],
    };
    cs.circuit_unitary()
}

// ---------------------------------------------------------------- HLF ----

/// Hidden-linear-function circuit for a symmetric boolean matrix.
pub fn hlf(a: &[Vec<u8>]) -> Result<CaseStudy> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(CaseStudyError::BadParam("matrix must be square".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != a[j][i] || a[i][j] > 1 {
                return Err(CaseStudyError::BadParam("matrix must be symmetric boolean".into()));
            }
        }
    }
    let mut table = VarTable::new();
    let xs: Vec<VarId> = (0..n)
        .map(|i| table.declare(&format!("x{i}"), QType::Bool))
        .collect::<crate::dirac::Result<_>>()?;
    let mut stmts = Vec::new();
    for &x in &xs {
        stmts.push(Program::init_basis(&table, &[x], 0)?);
    }
    for &x in &xs {
        stmts.push(Program::unitary(&table, &[x], qtypes::hadamard(), "H")?);
    }
    for (i, &x) in xs.iter().enumerate() {
        if a[i][i] == 1 {
            stmts.push(Program::unitary(&table, &[x], qtypes::s_gate(), "S")?);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[i][j] == 1 {
                stmts.push(Program::unitary(&table, &[xs[i], xs[j]], qtypes::cz(), "CZ")?);
            }
        }
    }
    for &x in &xs {
        stmts.push(Program::unitary(&table, &[x], qtypes::hadamard(), "H")?);
    }
    let program = Program::desugar_for(stmts);

    let labels = table.labels_of_vars(&xs);
    let amplitudes = hlf_amplitudes(a);
    let post_ket = LabelledOperator::ket(&table, &labels, &amplitudes)?;
    let mut triples = Vec::new();
    for mode in [Mode::Total, Mode::Partial] {
        triples.push(Triple {
            description: format!("amplitude formula ({mode:?})"),
            pre: LabelledOperator::one(),
            post: post_ket.outer_with_self()?,
            mode,
            saturation: Saturation::Saturated,
        });
    }
    Ok(CaseStudy { name: format!("hlf(n={n})"), table, program, triples })
}

/// Brute-force amplitude table `(1/2^n) sum_k i^{q(k) + 2 k.z}` over all
/// `k`, with `q(k) = sum_{ij} A_ij k_i k_j mod 4`.
pub fn hlf_amplitudes(a: &[Vec<u8>]) -> Vec<Scalar> {
    let n = a.len();
    let dim = 1usize << n;
    let bit = |v: usize, i: usize| (v >> (n - 1 - i)) & 1; // leftmost bit most significant
    let i_pow = |e: usize| -> Scalar {
        match e % 4 {
            0 => Scalar::new(1.0, 0.0),
            1 => Scalar::new(0.0, 1.0),
            2 => Scalar::new(-1.0, 0.0),
            _ => Scalar::new(0.0, -1.0),
        }
    };
    let mut out = Vec::with_capacity(dim);
    for z in 0..dim {
        let mut acc = Scalar::ZERO;
        for k in 0..dim {
            let mut q = 0usize;
            for i in 0..n {
                for j in 0..n {
                    q += (a[i][j] as usize) * bit(k, i) * bit(k, j);
                }
            }
            let dot: usize = (0..n).map(|i| bit(k, i) * bit(z, i)).sum();
            acc += i_pow(q + 2 * dot);
        }
        out.push(acc * re(1.0 / dim as f64));
    }
    out
}

// ---------------------------------------------------------------- HHL ----

/// Parameters of the linear-system solver loop.
#[derive(Debug, Clone)]
pub struct HhlParams {
    pub a: ComplexMatrix,
    pub b: Vec<Scalar>,
    pub n: usize,
    pub t0: f64,
    pub c: f64,
}

impl HhlParams {
    /// Desk-scale default: a 2-dimensional system with eigenvalues 1 and 2
    /// (exact in a 4-value control register) and a non-trivial eigenbasis.
    pub fn default_small() -> Self {
        let h = qtypes::hadamard();
        let a = h
            .matmul(&ComplexMatrix::diag(&[re(1.0), re(2.0)]))
            .unwrap()
            .matmul(&h.adjoint())
            .unwrap();
        HhlParams { a, b: vec![re(0.6), re(0.8)], n: 4, t0: TAU, c: 0.5 }
    }
}

/// Builds the solver program and its partial-correctness triple
/// `{1} HHL {|x><x|_q}`.
pub fn hhl(params: &HhlParams) -> Result<CaseStudy> {
    let m = params.a.rows();
    if !params.a.is_hermitian(1e-9) {
        return Err(CaseStudyError::BadParam("matrix must be Hermitian".into()));
    }
    let norm_b: f64 = params.b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm_b - 1.0).abs() > 1e-9 {
        return Err(CaseStudyError::BadParam("right-hand side must be a unit vector".into()));
    }
    let eig = params.a.hermitian_eig(1e-9)?;
    let mut deltas = Vec::new();
    for &l in &eig.eigenvalues {
        let d = l * params.t0 / TAU;
        if (d - d.round()).abs() > 1e-9 || d.round() < 1.0 || d.round() as usize >= params.n {
            return Err(CaseStudyError::BadParam(format!(
                "eigenvalue {l} is not exact: t0*l/2pi = {d}"
            )));
        }
        deltas.push(d.round() as usize);
    }
    if params.c <= 0.0 || params.c > deltas.iter().copied().min().unwrap() as f64 {
        return Err(CaseStudyError::BadParam("C must satisfy 0 < C <= min delta_j".into()));
    }

    let mut table = VarTable::new();
    let p = table.declare("p", QType::ZN(params.n))?;
    let q = table.declare("q", QType::ZN(m))?;
    let r = table.declare("r", QType::Bool)?;

    let u_b = qtypes::complete_unitary(m, &[(0, params.b.clone())])?;
    // U_c fixes |(0,0)> and rotates the flag conditioned on the estimate.
    let mut u_c_columns = vec![(0usize, {
        let mut e0 = vec![Scalar::ZERO; 2 * params.n];
        e0[0] = Scalar::ONE;
        e0
    })];
    for i in 1..params.n {
        let mut col = vec![Scalar::ZERO; 2 * params.n];
        let ratio = params.c / i as f64;
        col[2 * i] = re((1.0 - ratio * ratio).sqrt());
        col[2 * i + 1] = re(ratio);
        u_c_columns.push((2 * i, col));
    }
    let u_c = qtypes::complete_unitary(2 * params.n, &u_c_columns)?;
    // Multiplexer of k -> e^{i A k t0 / n}.
    let family: Vec<ComplexMatrix> = (0..params.n)
        .map(|k| {
            qtypes::matrix_exponential_of_hermitian(&params.a, k as f64 * params.t0 / params.n as f64)
        })
        .collect::<qtypes::Result<_>>()?;
    let u_f = qtypes::multiplexer(&family)?;
    let uniform = qtypes::uniform_unitary(params.n, 0);

    let body = Program::desugar_for(vec![
        Program::init_basis(&table, &[q], 0)?,
        Program::unitary(&table, &[q], u_b, "Ub")?,
        Program::unitary(&table, &[p], uniform.clone(), "Hn")?,
        Program::unitary(&table, &[p, q], u_f.clone(), "Uf")?,
        Program::unitary(&table, &[p], qtypes::qft(params.n).adjoint(), "IQFT")?,
        Program::unitary(&table, &[p, r], u_c, "Uc")?,
        Program::unitary(&table, &[p], qtypes::qft(params.n), "QFT")?,
        Program::unitary(&table, &[p, q], u_f.adjoint(), "adj(Uf)")?,
        Program::unitary(&table, &[p], uniform.adjoint(), "adj(Hn)")?,
    ]);
    let guard = crate::qwhile::Measurement::basis(&table, &[r])?;
    let program = Program::desugar_for(vec![
        Program::init_basis(&table, &[p], 0)?,
        Program::init_basis(&table, &[q], 0)?,
        Program::init_basis(&table, &[r], 0)?,
        Program::while_loop(guard, false, body)?,
    ]);

    // Solution ket |x> ~ sum_j (beta_j / lambda_j) |u_j>.
    let mut x_vec = vec![Scalar::ZERO; m];
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let uj = eig.eigenvectors.column(j);
        let beta: Scalar = uj.iter().zip(&params.b).map(|(u, b)| u.conj() * b).sum();
        for (xi, u) in x_vec.iter_mut().zip(&uj) {
            *xi += u * beta / re(l);
        }
    }
    let nx: f64 = x_vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let x_vec: Vec<Scalar> = x_vec.iter().map(|z| z / re(nx)).collect();
    let x_ket = LabelledOperator::ket(&table, &table.var(q).labels, &x_vec)?;

    let triples = vec![
        Triple {
            description: "{1} HHL {|x><x|_q} (partial)".into(),
            pre: LabelledOperator::one(),
            post: x_ket.outer_with_self()?,
            mode: Mode::Partial,
            saturation: Saturation::Plain,
        },
        Triple {
            description: "{1} HHL {|x><x|_q} (total: loop terminates a.s.)".into(),
            pre: LabelledOperator::one(),
            post: x_ket.outer_with_self()?,
            mode: Mode::Total,
            saturation: Saturation::Plain,
        },
    ];
    Ok(CaseStudy { name: format!("hhl(m={m},n={})", params.n), table, program, triples })
}

/// The normalized solution state on the data register.
pub fn hhl_solution_state(cs: &CaseStudy, cfg: &Config) -> Result<LabelledOperator> {
    let rho = cs.simulate(None, cfg)?;
    let q = cs.table.lookup("q").expect("hhl register");
    let keep = LabelSet::from_slice(&cs.table.var(q).labels);
    let reduced = rho.partial_trace(&keep)?;
    let tr = reduced.trace()?;
    Ok(reduced.scale(Scalar::ONE / tr))
}

// --------------------------------------------------- parallel Hadamard ----

/// A layer of Hadamards on `n` qubits, with the uniform and sign-pattern
/// triples.
pub fn para_hadamard(n: usize) -> Result<CaseStudy> {
    let mut table = VarTable::new();
    let xs: Vec<VarId> = (0..n)
        .map(|i| table.declare(&format!("x{i}"), QType::Bool))
        .collect::<crate::dirac::Result<_>>()?;
    let stmts: Vec<Program> = xs
        .iter()
        .map(|&x| Program::unitary(&table, &[x], qtypes::hadamard(), "H"))
        .collect::<crate::qwhile::Result<_>>()?;
    let program = Program::desugar_for(stmts);

    let labels = table.labels_of_vars(&xs);
    let dim = 1usize << n;
    let scale = 1.0 / (dim as f64).sqrt();
    let all_zero = LabelledOperator::basis_ket(&table, &labels, 0)?;
    let all_plus = LabelledOperator::ket(&table, &labels, &vec![re(scale); dim])?;
    let mut triples = Vec::new();
    for mode in [Mode::Total, Mode::Partial] {
        triples.push(Triple {
            description: format!("(x)|0> -> (x)|+> ({mode:?})"),
            pre: all_zero.outer_with_self()?,
            post: all_plus.outer_with_self()?,
            mode,
            saturation: Saturation::Saturated,
        });
        triples.push(Triple {
            description: format!("(x)|+> -> (x)|0> ({mode:?})"),
            pre: all_plus.outer_with_self()?,
            post: all_zero.outer_with_self()?,
            mode,
            saturation: Saturation::Saturated,
        });
    }
    for b in 0..dim {
        let pre = LabelledOperator::basis_ket(&table, &labels, b)?;
        let coeffs: Vec<Scalar> = (0..dim)
            .map(|t| {
                let dot = (b & t).count_ones();
                re(scale * if dot % 2 == 0 { 1.0 } else { -1.0 })
            })
            .collect();
        let post = LabelledOperator::ket(&table, &labels, &coeffs)?;
        triples.push(Triple {
            description: format!("|{b}> -> sign pattern"),
            pre: pre.outer_with_self()?,
            post: post.outer_with_self()?,
            mode: Mode::Total,
            saturation: Saturation::Saturated,
        });
    }
    Ok(CaseStudy { name: format!("para_hadamard({n})"), table, program, triples })
}

/// The default instances of every case study, as exposed by the CLI.
pub fn default_suite(cfg: &Config) -> Result<Vec<CaseStudy>> {
    let g = AbelianGroup::new(vec![2, 2]);
    let h = g.generate(&[g.encode(&[1, 1])]);
    Ok(vec![
        hsp(&g, &h)?,
        grover(4, &[false, false, false, true], 1)?,
        qpe(4, 2, 0.25, cfg)?,
        qft_circuit(3)?,
        rev_circuit(&[2, 3, 2])?,
        hlf(&[vec![1, 1], vec![1, 0]])?,
        hhl(&HhlParams::default_small())?,
        para_hadamard(3)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn hsp_over_z2xz2_diagonal_subgroup() {
        let g = AbelianGroup::new(vec![2, 2]);
        let h = g.generate(&[3]);
        let cs = hsp(&g, &h).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        let dist = hsp_distribution(&cs, &g, &cfg()).unwrap();
        // H^perp = {(0,0),(1,1)}; both outcomes carry probability 1/2.
        assert!((dist[0] - 0.5).abs() < 1e-9);
        assert!(dist[1].abs() < 1e-9);
        assert!(dist[2].abs() < 1e-9);
        assert!((dist[3] - 0.5).abs() < 1e-9);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hsp_trivial_and_full_subgroups() {
        let g = AbelianGroup::new(vec![2, 2]);
        // H = {0}: uniform over G.
        let cs = hsp(&g, &g.trivial_subgroup()).unwrap();
        let dist = hsp_distribution(&cs, &g, &cfg()).unwrap();
        for p in &dist {
            assert!((p - 0.25).abs() < 1e-9);
        }
        // H = G: all mass on 0.
        let cs = hsp(&g, &g.full_subgroup()).unwrap();
        let dist = hsp_distribution(&cs, &g, &cfg()).unwrap();
        assert!((dist[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hsp_inner_rule_reproduces_triples() {
        let g = AbelianGroup::new(vec![2, 2]);
        let h = g.generate(&[3]);
        let cs = hsp(&g, &h).unwrap();
        assert!(hsp_inner_pathway(&cs, &g, &h, &cfg()).unwrap());
    }

    #[test]
    fn grover_exact_cases() {
        // N = 4, one marked, one round: success probability exactly 1.
        let cs = grover(4, &[false, false, true, false], 1).unwrap();
        assert!((grover_success_probability(4, 1, 1) - 1.0).abs() < 1e-12);
        assert!(cs.all_valid(&cfg()).unwrap());
        // r = 0 gives the uniform guess |f|/N.
        assert!((grover_success_probability(4, 1, 0) - 0.25).abs() < 1e-12);
        let cs = grover(4, &[true, false, false, false], 0).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
    }

    #[test]
    fn qpe_exact_phase() {
        let cs = qpe(4, 2, 0.25, &cfg()).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        let dist = qpe_distribution(&cs, 4, 2, &cfg()).unwrap();
        assert!((dist[1] - 1.0).abs() < 1e-9, "{dist:?}");
    }

    #[test]
    fn qft_circuit_small() {
        for n in 1..=2usize {
            let cs = qft_circuit(n).unwrap();
            let u = cs.circuit_unitary().unwrap();
            let f = qtypes::qft(1 << n);
            assert!(u.matrix().approx_eq(&f, 1e-9), "n={n}");
            assert!(cs.all_valid(&cfg()).unwrap(), "n={n}");
        }
    }

    #[test]
    fn rev_circuit_mixed_dims() {
        let cs = rev_circuit(&[2, 3, 2]).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        // Palindromic bases are fixed points: digits (a, b, a).
        let cs2 = rev_circuit(&[2, 2]).unwrap();
        let u = cs2.circuit_unitary().unwrap();
        assert!(u.matrix().approx_eq(&qtypes::swap(2), 1e-12));
    }

    #[test]
    fn hlf_zero_matrix() {
        let cs = hlf(&[vec![0, 0], vec![0, 0]]).unwrap();
        let amps = hlf_amplitudes(&[vec![0, 0], vec![0, 0]]);
        assert!((amps[0] - Scalar::ONE).norm() < 1e-12);
        for a in &amps[1..] {
            assert!(a.norm() < 1e-12);
        }
        assert!(cs.all_valid(&cfg()).unwrap());
    }

    #[test]
    fn hlf_two_qubit_instance() {
        let a = vec![vec![1, 1], vec![1, 0]];
        let cs = hlf(&a).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        // Simulated amplitudes match the brute-force sum.
        let rho = cs.simulate(None, &cfg()).unwrap();
        let ket = crate::hoare::pure_ket_of(&rho, 1e-7).unwrap();
        let expected = hlf_amplitudes(&a);
        let got = ket.matrix();
        // Compare up to global phase by aligning on the largest entry.
        let k = expected
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.norm().partial_cmp(&y.1.norm()).unwrap())
            .unwrap()
            .0;
        let phase = got.get(k, 0) / expected[k];
        for (i, e) in expected.iter().enumerate() {
            assert!((got.get(i, 0) - e * phase).norm() < 1e-9);
        }
    }

    #[test]
    fn para_hadamard_small() {
        let cs = para_hadamard(2).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        // Double application is the identity triple.
        let doubled = Program::seq(cs.program.clone(), cs.program.clone());
        let labels = cs.table.all_labels();
        let id = LabelledOperator::identity(&cs.table, &labels);
        let j = Judgment::new(
            id.clone(),
            doubled,
            id,
            Mode::Total,
            Saturation::Saturated,
        )
        .unwrap();
        assert!(hoare::check_valid(&j, &cs.table, &cfg()).unwrap().is_valid());
    }

    #[test]
    fn hhl_small_instance() {
        let params = HhlParams::default_small();
        let cs = hhl(&params).unwrap();
        assert!(cs.all_valid(&cfg()).unwrap());
        let sol = hhl_solution_state(&cs, &cfg()).unwrap();
        // Direct simulation agrees with the closed-form solution.
        let expected = cs.triples[0].post.clone();
        assert!(sol.approx_eq(&expected, 1e-7));
    }

    #[test]
    fn hhl_eigenvector_input_is_fixed() {
        // b an eigenvector of A: |x> is that eigenvector.
        let params = HhlParams {
            a: ComplexMatrix::diag(&[re(1.0), re(2.0)]),
            b: vec![Scalar::ONE, Scalar::ZERO],
            n: 4,
            t0: TAU,
            c: 0.5,
        };
        let cs = hhl(&params).unwrap();
        let q = cs.table.lookup("q").unwrap();
        let e0 = LabelledOperator::basis_ket(&cs.table, &cs.table.var(q).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        assert!(cs.triples[0].post.approx_eq(&e0, 1e-12));
        assert!(cs.all_valid(&cfg()).unwrap());
    }

    #[test]
    fn hhl_rejects_inexact_parameters() {
        let mut params = HhlParams::default_small();
        params.t0 = 1.0;
        assert!(matches!(hhl(&params), Err(CaseStudyError::BadParam(_))));
        let mut params = HhlParams::default_small();
        params.c = 3.0;
        assert!(matches!(hhl(&params), Err(CaseStudyError::BadParam(_))));
    }

    #[test]
    fn suite_quality_reports() {
        let cfg = cfg();
        for cs in default_suite(&cfg).unwrap() {
            let q = cs.quality(&cfg).unwrap();
            assert!(q.is_cp, "{} not CP", cs.name);
            assert!(q.is_trace_nonincreasing, "{} increases trace", cs.name);
            if !cs.program.has_while() {
                assert!(q.is_trace_preserving, "{} not TP", cs.name);
            }
        }
    }
}
