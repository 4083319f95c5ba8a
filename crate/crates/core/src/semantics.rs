//! Denotational semantics: a program compiles to a super-operator over its
//! footprint, represented as a `d^2 x d^2` matrix acting on column-major
//! vectorized operators.
//!
//! Loops are the limit of their syntactic approximations. The iterative
//! strategy accumulates the geometric series `E_exit . sum_k G^k` by
//! repeated doubling until the partial sums stop moving; the closed-form
//! strategy solves `E (I - G) = E_exit` when a power-iteration estimate of
//! the spectral radius of `G` is safely below one.

use crate::config::Config;
use crate::dirac::{DiracError, LabelSet, LabelledOperator, VarTable};
use crate::linalg::{re, ComplexMatrix, LinalgError, Scalar};
use crate::qwhile::{Program, QwhileError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("while loop did not converge after {iterations} unrollings (residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("dimension {dim} exceeds the configured limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("super-operators live on different label sets")]
    LabelMismatch,
    #[error("label set is not a superset")]
    NotSuperset,
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Qwhile(#[from] QwhileError),
}

pub type Result<T> = std::result::Result<T, SemanticsError>;

/// Strategy for resolving while-loop limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WhileStrategy {
    /// Partial sums by repeated doubling until the Frobenius change drops
    /// below the configured tolerance.
    #[default]
    Iterative,
    /// Neumann series `E_exit (I - G)^{-1}`, guarded by a spectral-radius
    /// estimate; falls back to iteration when the estimate is too close to
    /// one.
    ClosedForm,
}

/// CP / trace behaviour of a super-operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub is_cp: bool,
    pub is_trace_nonincreasing: bool,
    pub is_trace_preserving: bool,
    pub choi_min_eig: f64,
}

/// Linear map on operators over a label set, in the vectorized
/// representation: `vec(E(rho)) = M vec(rho)` with column-major `vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    labels: LabelSet,
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// Hilbert-space dimension of the carrier.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn identity_on(table: &VarTable, labels: &LabelSet) -> Self {
        let d = table.dim_of(labels);
        SuperOperator { labels: labels.clone(), dim: d, matrix: ComplexMatrix::identity(d * d) }
    }

    pub fn zero_on(table: &VarTable, labels: &LabelSet) -> Self {
        let d = table.dim_of(labels);
        SuperOperator { labels: labels.clone(), dim: d, matrix: ComplexMatrix::zeros(d * d, d * d) }
    }

    /// Builds `rho -> sum_k K_k rho K_k^dag` from Kraus operators given as
    /// square labelled operators on `labels`.
    pub fn from_kraus(
        table: &VarTable,
        labels: &LabelSet,
        kraus: &[LabelledOperator],
    ) -> Result<Self> {
        let d = table.dim_of(labels);
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for k in kraus {
            if k.out_labels() != labels || k.in_labels() != labels {
                return Err(SemanticsError::LabelMismatch);
            }
            // vec(K rho K^dag) = (conj(K) (x) K) vec(rho)
            m = m.add(&k.matrix().conj().kron(k.matrix()))?;
        }
        Ok(SuperOperator { labels: labels.clone(), dim: d, matrix: m })
    }

    /// Applies the map to a square labelled operator, extending both sides
    /// to the union of their labels.
    pub fn apply(&self, table: &VarTable, rho: &LabelledOperator) -> Result<LabelledOperator> {
        if !rho.is_square_on() {
            return Err(SemanticsError::Dirac(DiracError::NotSquare));
        }
        let union = self.labels.union(rho.out_labels());
        let so = self.extend(table, &union)?;
        let rho = rho.cyl_extend(table, &union)?;
        let v = rho.matrix().vectorize();
        let out = so.matrix.matmul(&v)?;
        let d = so.dim;
        let out = ComplexMatrix::devectorize(&out, d, d)?;
        Ok(LabelledOperator::operator_on(table, union.as_slice(), out)?)
    }

    /// Heisenberg dual: the conjugate transpose of the vectorized matrix.
    /// For CP maps this sends `A` to `sum_k K_k^dag A K_k`.
    pub fn dual(&self) -> Self {
        SuperOperator { labels: self.labels.clone(), dim: self.dim, matrix: self.matrix.adjoint() }
    }

    /// Tensors the map with the identity on `target \ labels`.
    pub fn extend(&self, table: &VarTable, target: &LabelSet) -> Result<Self> {
        if !self.labels.is_subset(target) {
            return Err(SemanticsError::NotSuperset);
        }
        if &self.labels == target {
            return Ok(self.clone());
        }
        let d_t = table.dim_of(target);
        let dims_t: Vec<usize> = target.iter().map(|l| table.dim(l)).collect();
        // Positions of the original labels inside the target index.
        let mine: Vec<usize> = target
            .iter()
            .enumerate()
            .filter(|(_, l)| self.labels.contains(*l))
            .map(|(i, _)| i)
            .collect();
        let rest: Vec<usize> =
            (0..dims_t.len()).filter(|i| !mine.contains(i)).collect();
        let d_f = self.dim;

        let fold = |digits: &[usize], take: &[usize]| -> usize {
            take.iter().fold(0usize, |acc, &i| acc * dims_t[i] + digits[i])
        };
        let mut digits_r = vec![0usize; dims_t.len()];
        let mut digits_c = vec![0usize; dims_t.len()];
        let mut digits_rp = vec![0usize; dims_t.len()];
        let mut digits_cp = vec![0usize; dims_t.len()];
        let mut m = ComplexMatrix::zeros(d_t * d_t, d_t * d_t);
        // Entry ((r,c),(r',c')) with column-major vec indices c*d+r. The map
        // acts on the `mine` digits and is the identity elsewhere.
        for r in 0..d_t {
            decompose(r, &dims_t, &mut digits_r);
            for c in 0..d_t {
                decompose(c, &dims_t, &mut digits_c);
                let row_vec = c * d_t + r;
                let rf = fold(&digits_r, &mine);
                let cf = fold(&digits_c, &mine);
                for rp in 0..d_f {
                    for cp in 0..d_f {
                        let v = self.matrix.get(cf * d_f + rf, cp * d_f + rp);
                        if v == Scalar::ZERO {
                            continue;
                        }
                        // Reconstruct the source index: mine digits from
                        // (rp,cp), rest digits copied from (r,c).
                        digits_rp.copy_from_slice(&digits_r);
                        digits_cp.copy_from_slice(&digits_c);
                        scatter(rp, &dims_t, &mine, &mut digits_rp);
                        scatter(cp, &dims_t, &mine, &mut digits_cp);
                        let r_src = compose_digits(&digits_rp, &dims_t);
                        let c_src = compose_digits(&digits_cp, &dims_t);
                        let col_vec = c_src * d_t + r_src;
                        let _ = &rest;
                        let cur = m.get(row_vec, col_vec);
                        m.set(row_vec, col_vec, cur + v);
                    }
                }
            }
        }
        Ok(SuperOperator { labels: target.clone(), dim: d_t, matrix: m })
    }

    /// Map composition `self . other` (apply `other` first).
    pub fn compose(&self, table: &VarTable, other: &Self) -> Result<Self> {
        let union = self.labels.union(&other.labels);
        let a = self.extend(table, &union)?;
        let b = other.extend(table, &union)?;
        Ok(SuperOperator { labels: union, dim: a.dim, matrix: a.matrix.matmul(&b.matrix)? })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.labels != other.labels {
            return Err(SemanticsError::LabelMismatch);
        }
        Ok(SuperOperator {
            labels: self.labels.clone(),
            dim: self.dim,
            matrix: self.matrix.add(&other.matrix)?,
        })
    }

    pub fn scale(&self, k: Scalar) -> Self {
        SuperOperator { labels: self.labels.clone(), dim: self.dim, matrix: self.matrix.scale(k) }
    }

    /// Choi matrix: the reshuffle of the vectorized representation whose
    /// positivity characterizes complete positivity.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d * d, d * d, |row, col| {
            let (u, i) = (row / d, row % d);
            let (v, j) = (col / d, col % d);
            self.matrix.get(v * d + u, j * d + i)
        })
    }

    /// Image of the identity under the dual map (`sum_k K_k^dag K_k`).
    pub fn dual_of_identity(&self) -> Result<ComplexMatrix> {
        let d = self.dim;
        let vec_id = ComplexMatrix::identity(d).vectorize();
        let out = self.matrix.adjoint().matmul(&vec_id)?;
        Ok(ComplexMatrix::devectorize(&out, d, d)?)
    }

    pub fn quality(&self, psd_tol: f64) -> Result<QualityReport> {
        let choi = self.choi();
        let (is_cp, choi_min_eig) = if choi.is_hermitian(psd_tol.max(1e-8)) {
            let min = choi.min_eigenvalue(psd_tol.max(1e-8))?;
            (min >= -psd_tol * choi.frob_norm().max(1.0), min)
        } else {
            (false, f64::NAN)
        };
        let dual_id = self.dual_of_identity()?;
        let id = ComplexMatrix::identity(self.dim);
        let is_trace_preserving = dual_id.approx_eq(&id, psd_tol.max(1e-9));
        let is_trace_nonincreasing = is_trace_preserving
            || dual_id.loewner_leq(&id, psd_tol).unwrap_or(false);
        Ok(QualityReport { is_cp, is_trace_nonincreasing, is_trace_preserving, choi_min_eig })
    }
}

fn decompose(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
}

fn scatter(sub: usize, dims: &[usize], positions: &[usize], out: &mut [usize]) {
    let mut rem = sub;
    for &p in positions.iter().rev() {
        out[p] = rem % dims[p];
        rem /= dims[p];
    }
}

fn compose_digits(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0usize, |acc, (&d, &m)| acc * m + d)
}

/// Denotation over exactly the program footprint.
pub fn denote(program: &Program, table: &VarTable, cfg: &Config) -> Result<SuperOperator> {
    denote_on(program, table, &program.footprint(), cfg)
}

/// Denotation over a chosen carrier `labels`, which must contain the
/// footprint.
pub fn denote_on(
    program: &Program,
    table: &VarTable,
    labels: &LabelSet,
    cfg: &Config,
) -> Result<SuperOperator> {
    denote_on_with(program, table, labels, cfg, WhileStrategy::Iterative)
}

pub fn denote_on_with(
    program: &Program,
    table: &VarTable,
    labels: &LabelSet,
    cfg: &Config,
    strategy: WhileStrategy,
) -> Result<SuperOperator> {
    if !program.footprint().is_subset(labels) {
        return Err(SemanticsError::NotSuperset);
    }
    let dim = table.dim_of(labels);
    if dim > cfg.max_dim {
        return Err(SemanticsError::DimensionTooLarge { dim, max: cfg.max_dim });
    }
    go(program, table, labels, cfg, strategy)
}

fn go(
    program: &Program,
    table: &VarTable,
    f: &LabelSet,
    cfg: &Config,
    strategy: WhileStrategy,
) -> Result<SuperOperator> {
    match program {
        Program::Abort => Ok(SuperOperator::zero_on(table, f)),
        Program::Skip => Ok(SuperOperator::identity_on(table, f)),
        Program::Seq(c1, c2) => {
            // c1 runs first.
            let e1 = go(c1, table, f, cfg, strategy)?;
            let e2 = go(c2, table, f, cfg, strategy)?;
            e2.compose(table, &e1)
        }
        Program::Init { state, .. } => {
            let s = state.out_labels().clone();
            // rho -> tr_S(rho) (x) rho_S. Kraus: sqrt(p_j) |phi_j>_S <i|_S,
            // extended by the identity on f \ S.
            let eig = state.matrix().hermitian_eig(1e-8)?;
            let d_s = table.dim_of(&s);
            let mut kraus = Vec::new();
            for (j, &p) in eig.eigenvalues.iter().enumerate() {
                if p <= 1e-15 {
                    continue;
                }
                let col = eig.eigenvectors.column(j);
                let phi = LabelledOperator::ket(table, s.as_slice(), &col)?
                    .scale(re(p.sqrt()));
                for i in 0..d_s {
                    let bra_i = LabelledOperator::basis_ket(table, s.as_slice(), i)?.adjoint();
                    let k = phi.compose(&bra_i)?;
                    let lifted = k.tensor(&LabelledOperator::identity(
                        table,
                        &f.difference(&s),
                    ))?;
                    kraus.push(lifted);
                }
            }
            SuperOperator::from_kraus(table, f, &kraus)
        }
        Program::Unitary { op, .. } => {
            let lifted = op.cyl_extend(table, f)?;
            SuperOperator::from_kraus(table, f, &[lifted])
        }
        Program::Cond { meas, branches } => {
            let mut acc = SuperOperator::zero_on(table, f);
            for (m, branch) in meas.operators().iter().zip(branches) {
                let proj = SuperOperator::from_kraus(table, f, &[m.cyl_extend(table, f)?])?;
                let body = go(branch, table, f, cfg, strategy)?;
                acc = acc.add(&body.compose(table, &proj)?)?;
            }
            Ok(acc)
        }
        Program::While { meas, continue_on, body } => {
            let exit_idx = usize::from(!*continue_on);
            let cont_idx = usize::from(*continue_on);
            let exit = SuperOperator::from_kraus(
                table,
                f,
                &[meas.operators()[exit_idx].cyl_extend(table, f)?],
            )?;
            let cont = SuperOperator::from_kraus(
                table,
                f,
                &[meas.operators()[cont_idx].cyl_extend(table, f)?],
            )?;
            let step = go(body, table, f, cfg, strategy)?.compose(table, &cont)?;
            match strategy {
                WhileStrategy::ClosedForm if spectral_radius_estimate(&step.matrix) < 1.0 - 1e-8 => {
                    // E (I - G) = E_exit  <=>  (I - G)^T E^T = E_exit^T
                    let n = step.matrix.rows();
                    let i_minus_g =
                        ComplexMatrix::identity(n).sub(&step.matrix)?.transpose();
                    let sol = i_minus_g.solve(&exit.matrix.transpose()).map_err(|_| {
                        SemanticsError::NoConvergence { iterations: 0, residual: f64::INFINITY }
                    })?;
                    Ok(SuperOperator {
                        labels: f.clone(),
                        dim: exit.dim,
                        matrix: sol.transpose(),
                    })
                }
                _ => iterate_loop(&exit, &step, f, cfg),
            }
        }
    }
}

/// Accumulates `E_exit . sum_{j<k} G^j` with doubling `k` until the partial
/// sums stop moving.
fn iterate_loop(
    exit: &SuperOperator,
    step: &SuperOperator,
    f: &LabelSet,
    cfg: &Config,
) -> Result<SuperOperator> {
    let n = exit.matrix.rows();
    let mut partial = ComplexMatrix::identity(n); // sum_{j<k} G^j
    let mut power = step.matrix.clone(); // G^k
    let mut current = exit.matrix.clone(); // E_exit . partial at k = 1
    let mut k: u64 = 1;
    loop {
        let next_partial = partial.add(&power.matmul(&partial)?)?;
        let next = exit.matrix.matmul(&next_partial)?;
        let residual = next.sub(&current)?.frob_norm();
        if residual <= cfg.while_tol {
            return Ok(SuperOperator { labels: f.clone(), dim: exit.dim, matrix: next });
        }
        if k >= cfg.while_kmax {
            return Err(SemanticsError::NoConvergence { iterations: k, residual });
        }
        partial = next_partial;
        power = power.matmul(&power)?;
        current = next;
        k = k.saturating_mul(2);
    }
}

/// Power-iteration estimate of the spectral radius.
fn spectral_radius_estimate(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut v = ComplexMatrix::from_fn(n, 1, |i, _| {
        Scalar::new(((i * 2654435761 + 1) % 1000) as f64 / 1000.0 + 0.1, 0.3)
    });
    let mut estimate = 0.0;
    for _ in 0..200 {
        let w = match m.matmul(&v) {
            Ok(w) => w,
            Err(_) => return f64::INFINITY,
        };
        let norm = w.frob_norm();
        if norm < 1e-300 {
            return 0.0;
        }
        estimate = norm / v.frob_norm().max(1e-300);
        v = w.scale(re(1.0 / norm));
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::VarId;
    use crate::qtypes::{hadamard, QType};
    use crate::qwhile::parse::parse_program;
    use crate::qwhile::{Measurement, MeasKind};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn cfg() -> Config {
        Config::default()
    }

    fn c(re_: f64, im: f64) -> Scalar {
        Scalar::new(re_, im)
    }

    fn random_density(rng: &mut StdRng, table: &VarTable, labels: &LabelSet) -> LabelledOperator {
        let d = table.dim_of(labels);
        let m = ComplexMatrix::from_fn(d, d, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = m.matmul(&m.adjoint()).unwrap();
        let tr = p.trace().unwrap();
        LabelledOperator::operator_on(table, labels.as_slice(), p.scale(Scalar::ONE / tr)).unwrap()
    }

    #[test]
    fn abort_and_skip() {
        let p = parse_program("var x : bool; x := H[x];", &HashMap::new()).unwrap();
        let f = p.program().footprint();
        let zero = denote_on(&Program::Abort, &p.table, &f, &cfg()).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let rho = random_density(&mut rng, &p.table, &f);
        let out = zero.apply(&p.table, &rho).unwrap();
        assert!(out.norm() < 1e-14);
        let id = denote_on(&Program::Skip, &p.table, &f, &cfg()).unwrap();
        assert!(id.apply(&p.table, &rho).unwrap().approx_eq(&rho, 1e-12));
    }

    #[test]
    fn hadamard_program_on_ket0() {
        let p = parse_program("var x : bool; x := |0>; x := H[x];", &HashMap::new()).unwrap();
        let e = denote(&p.program(), &p.table, &cfg()).unwrap();
        let x = p.table.lookup("x").unwrap();
        let rho0 = LabelledOperator::basis_ket(&p.table, &p.table.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        let out = e.apply(&p.table, &rho0).unwrap();
        let plus = hadamard()
            .matmul(&ComplexMatrix::col_vec(&[Scalar::ONE, Scalar::ZERO]))
            .unwrap();
        let expected = LabelledOperator::operator_on(
            &p.table,
            &p.table.var(x).labels,
            plus.matmul(&plus.adjoint()).unwrap(),
        )
        .unwrap();
        assert!(out.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn cnot_makes_bell_state() {
        let sidecar = crate::qwhile::parse::parse_gate_sidecar(
            r#"{"CNOT": [[1,0],[0,0],[0,0],[0,0],
                         [0,0],[1,0],[0,0],[0,0],
                         [0,0],[0,0],[0,0],[1,0],
                         [0,0],[0,0],[1,0],[0,0]]}"#,
        )
        .unwrap();
        let p = parse_program(
            "var x : bool; var y : bool; x := |0>; y := |0>; x := H[x]; [x,y] := CNOT[x,y];",
            &sidecar,
        )
        .unwrap();
        let e = denote(&p.program(), &p.table, &cfg()).unwrap();
        let f = p.program().footprint();
        let any = LabelledOperator::identity(&p.table, &f).scale(re(0.25));
        let out = e.apply(&p.table, &any).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        let bell = LabelledOperator::ket(
            &p.table,
            f.as_slice(),
            &[re(h), re(0.0), re(0.0), re(h)],
        )
        .unwrap()
        .outer_with_self()
        .unwrap();
        assert!(out.approx_eq(&bell, 1e-12));
    }

    #[test]
    fn init_discards_and_replaces() {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::Bool).unwrap();
        let y = t.declare("y", QType::ZN(3)).unwrap();
        let init = Program::init_basis(&t, &[y], 1).unwrap();
        let f: LabelSet = t.all_labels();
        let e = denote_on(&init, &t, &f, &cfg()).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let rho = random_density(&mut rng, &t, &f);
        let out = e.apply(&t, &rho).unwrap();
        // Expected: tr_y(rho) (x) |1><1|_y
        let keep = LabelSet::from_slice(&t.var(x).labels);
        let reduced = rho.partial_trace(&keep).unwrap();
        let proj = LabelledOperator::basis_ket(&t, &t.var(y).labels, 1)
            .unwrap()
            .outer_with_self()
            .unwrap();
        let expected = reduced.tensor(&proj).unwrap();
        assert!(out.approx_eq(&expected, 1e-11));
        // Trace preserving.
        assert!((out.trace().unwrap() - rho.trace().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn coin_loop_terminates_to_ket0() {
        let src = "var x : bool; x := |0>; x := H[x]; while meas [x] = 1 { x := H[x]; }";
        let p = parse_program(src, &HashMap::new()).unwrap();
        for strategy in [WhileStrategy::Iterative, WhileStrategy::ClosedForm] {
            let e = denote_on_with(
                &p.program(),
                &p.table,
                &p.program().footprint(),
                &cfg(),
                strategy,
            )
            .unwrap();
            let q = e.quality(1e-9).unwrap();
            assert!(q.is_cp && q.is_trace_preserving, "{strategy:?}: {q:?}");
            let mut rng = StdRng::seed_from_u64(3);
            let rho = random_density(&mut rng, &p.table, &p.program().footprint());
            let out = e.apply(&p.table, &rho).unwrap();
            let x = p.table.lookup("x").unwrap();
            let expected = LabelledOperator::basis_ket(&p.table, &p.table.var(x).labels, 0)
                .unwrap()
                .outer_with_self()
                .unwrap();
            assert!(out.approx_eq(&expected, 1e-8), "{strategy:?}");
        }
    }

    #[test]
    fn never_exiting_loop_is_zero_map() {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::Bool).unwrap();
        let labels = LabelSet::from_slice(&t.var(x).labels);
        let zero_op = LabelledOperator::zero(&t, &labels, &labels);
        let id_op = LabelledOperator::identity(&t, &labels);
        let meas =
            Measurement::new(&t, vec![zero_op, id_op], MeasKind::General("never".into())).unwrap();
        let w = Program::while_loop(meas, true, Program::Skip).unwrap();
        let e = denote(&w, &t, &cfg()).unwrap();
        assert!(e.matrix().frob_norm() < 1e-12);
    }

    #[test]
    fn dual_duality_identity() {
        let src = "var x : bool; var y : bool; x := H[x]; if meas [y] { 0 -> { x := X[x]; } else -> { skip; } }";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let f = p.program().footprint();
        let e = denote(&p.program(), &p.table, &cfg()).unwrap();
        let dual = e.dual();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let rho = random_density(&mut rng, &p.table, &f);
            let d = p.table.dim_of(&f);
            let a_raw = ComplexMatrix::from_fn(d, d, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let a_h = a_raw.add(&a_raw.adjoint()).unwrap().scale(re(0.5));
            let a = LabelledOperator::operator_on(&p.table, f.as_slice(), a_h).unwrap();
            let lhs = a.compose(&e.apply(&p.table, &rho).unwrap()).unwrap().trace().unwrap();
            let rhs = dual.apply(&p.table, &a).unwrap().compose(&rho).unwrap().trace().unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn dual_of_unitary_conjugation() {
        let p = parse_program("var x : bool; x := H[x];", &HashMap::new()).unwrap();
        let e = denote(&p.program(), &p.table, &cfg()).unwrap();
        let f = p.program().footprint();
        let mut rng = StdRng::seed_from_u64(13);
        let a_raw = ComplexMatrix::from_fn(2, 2, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let a = LabelledOperator::operator_on(&p.table, f.as_slice(), a_raw.clone()).unwrap();
        let got = e.dual().apply(&p.table, &a).unwrap();
        // U^dag A U with U = H.
        let expected = hadamard().adjoint().matmul(&a_raw).unwrap().matmul(&hadamard()).unwrap();
        let expected = LabelledOperator::operator_on(&p.table, f.as_slice(), expected).unwrap();
        assert!(got.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn extension_matches_spectator_embedding() {
        // denote on footprint, extended by a spectator, must equal denote
        // computed directly over the enlarged space.
        let src = "var x : bool; var y : bool; x := H[x]; [x,y] := SWAP[x,y];";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let mut table = p.table.clone();
        let spectator = table.declare("z", QType::Bool).unwrap();
        let f = p.program().footprint();
        let big = f.union(&LabelSet::from_slice(&table.var(spectator).labels));
        let local = denote_on(&p.program(), &table, &f, &cfg()).unwrap();
        let extended = local.extend(&table, &big).unwrap();
        let direct = denote_on(&p.program(), &table, &big, &cfg()).unwrap();
        assert!(extended.matrix().approx_eq(direct.matrix(), 1e-11));
        // Extending to the same set is the identity operation.
        assert!(local.extend(&table, &f).unwrap().matrix().approx_eq(local.matrix(), 0.0));
    }

    #[test]
    fn dual_is_antihomomorphism() {
        let src_f = "var x : bool; x := H[x];";
        let src_g = "var x : bool; x := S[x];";
        let pf = parse_program(src_f, &HashMap::new()).unwrap();
        let pg = parse_program(src_g, &HashMap::new()).unwrap();
        let ef = denote(&pf.program(), &pf.table, &cfg()).unwrap();
        let eg = denote(&pg.program(), &pg.table, &cfg()).unwrap();
        let lhs = ef.dual().compose(&pf.table, &eg.dual()).unwrap();
        let rhs = eg.compose(&pf.table, &ef).unwrap().dual();
        assert!(lhs.matrix().approx_eq(rhs.matrix(), 1e-12));
    }

    #[test]
    fn quality_reports() {
        let p = parse_program("var x : bool; skip;", &HashMap::new()).unwrap();
        let mut t = p.table.clone();
        let x = t.lookup("x").unwrap();
        let labels = LabelSet::from_slice(&t.var(x).labels);
        let id = SuperOperator::identity_on(&t, &labels);
        let q = id.quality(1e-9).unwrap();
        assert!(q.is_cp && q.is_trace_preserving && q.is_trace_nonincreasing);

        // Single measurement branch: CP, trace-nonincreasing, not TP.
        let m0 = LabelledOperator::basis_ket(&t, &t.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        let branch = SuperOperator::from_kraus(&t, &labels, &[m0]).unwrap();
        let q = branch.quality(1e-9).unwrap();
        assert!(q.is_cp && q.is_trace_nonincreasing && !q.is_trace_preserving);
        assert!(q.choi_min_eig > -1e-12);

        // The transpose map is positive but not completely positive.
        let d = 2;
        let transpose = SuperOperator {
            labels: labels.clone(),
            dim: d,
            matrix: ComplexMatrix::from_fn(d * d, d * d, |rc, cc| {
                let (ci, ri) = (rc / d, rc % d);
                let (cj, rj) = (cc / d, cc % d);
                if ri == cj && ci == rj {
                    Scalar::ONE
                } else {
                    Scalar::ZERO
                }
            }),
        };
        let z = t.declare("pad", QType::Bool);
        let _ = z;
        let q = transpose.quality(1e-9).unwrap();
        assert!(!q.is_cp);
        assert!(q.choi_min_eig < -0.5);
    }

    #[test]
    fn loop_approximations_increase_to_limit() {
        let src = "var x : bool; x := |0>; x := H[x]; while meas [x] = 1 { x := H[x]; }";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let w = match p.stmts.last().unwrap() {
            w @ Program::While { .. } => w.clone(),
            _ => panic!(),
        };
        let f = w.footprint();
        let limit = denote_on(&w, &p.table, &f, &cfg()).unwrap();
        let mut prev_choi: Option<ComplexMatrix> = None;
        for k in 0..6 {
            let approx = w.approximate_while(k).unwrap();
            let e = denote_on(&approx, &p.table, &f, &cfg()).unwrap();
            let choi = e.choi();
            if let Some(prev) = prev_choi {
                assert!(prev.loewner_leq(&choi, 1e-9).unwrap(), "k = {k}");
            }
            // Monotone below the limit.
            assert!(choi.loewner_leq(&limit.choi(), 1e-8).unwrap());
            prev_choi = Some(choi);
        }
    }

    #[test]
    fn loop_fixed_point_residual() {
        let src = "var x : bool; while meas [x] = 1 { x := H[x]; }";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let w = p.program();
        let f = w.footprint();
        let e = denote_on(&w, &p.table, &f, &cfg()).unwrap();
        let (meas, body) = match &p.stmts[0] {
            Program::While { meas, body, .. } => (meas, body),
            _ => panic!(),
        };
        let exit = SuperOperator::from_kraus(
            &p.table,
            &f,
            &[meas.operators()[0].cyl_extend(&p.table, &f).unwrap()],
        )
        .unwrap();
        let cont = SuperOperator::from_kraus(
            &p.table,
            &f,
            &[meas.operators()[1].cyl_extend(&p.table, &f).unwrap()],
        )
        .unwrap();
        let step = denote_on(body, &p.table, &f, &cfg())
            .unwrap()
            .compose(&p.table, &cont)
            .unwrap();
        let rhs = exit.matrix().add(&e.matrix().matmul(step.matrix()).unwrap()).unwrap();
        assert!(e.matrix().sub(&rhs).unwrap().frob_norm() <= 1e-8);
    }

    #[test]
    fn seq_with_skip_is_identity_of_composition() {
        let src = "var x : bool; x := H[x];";
        let p = parse_program(src, &HashMap::new()).unwrap();
        let prog = p.program();
        let e1 = denote(&prog, &p.table, &cfg()).unwrap();
        let seq = Program::seq(prog.clone(), Program::Skip);
        let e2 = denote(&seq, &p.table, &cfg()).unwrap();
        assert!(e1.matrix().approx_eq(e2.matrix(), 1e-13));
    }

    #[test]
    fn dimension_guard_trips() {
        let mut t = VarTable::new();
        let mut ids: Vec<VarId> = Vec::new();
        for i in 0..9 {
            ids.push(t.declare(&format!("q{i}"), QType::Bool).unwrap());
        }
        let f = t.all_labels();
        let r = denote_on(&Program::Skip, &t, &f, &cfg());
        assert!(matches!(r, Err(SemanticsError::DimensionTooLarge { dim: 512, .. })));
    }
}
