//! Finite data types for quantum variables and the built-in gate and oracle
//! library used by the concrete syntax.
//!
//! Composite types use a mixed-radix basis encoding with the leftmost
//! component most significant, so `|(t1,t2)>` on a pair variable is the
//! tensor product of `|t1>` and `|t2>` in the labelled-operator ordering.

use crate::group::AbelianGroup;
use crate::linalg::{re, ComplexMatrix, LinalgError, Scalar};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("bad parameter for `{0}`: {1}")]
    BadParam(String, String),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("given columns are not orthonormal")]
    NotOrthonormal,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, GateError>;

/// Finite data type of a quantum variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QType {
    Bool,
    /// Cyclic type with `n` values.
    ZN(usize),
    Pair(Box<QType>, Box<QType>),
    /// Homogeneous tuple `T^arity`.
    Tuple(Box<QType>, usize),
}

impl QType {
    pub fn dimension(&self) -> usize {
        match self {
            QType::Bool => 2,
            QType::ZN(n) => *n,
            QType::Pair(a, b) => a.dimension() * b.dimension(),
            QType::Tuple(t, k) => t.dimension().pow(*k as u32),
        }
    }

    /// Leaf components in left-to-right order. Each leaf occupies one label.
    pub fn atoms(&self) -> Vec<QType> {
        match self {
            QType::Bool | QType::ZN(_) => vec![self.clone()],
            QType::Pair(a, b) => {
                let mut v = a.atoms();
                v.extend(b.atoms());
                v
            }
            QType::Tuple(t, k) => {
                let leaf = t.atoms();
                let mut v = Vec::new();
                for _ in 0..*k {
                    v.extend(leaf.iter().cloned());
                }
                v
            }
        }
    }

    /// Basis index of a value tuple (one entry per atom, leftmost most
    /// significant).
    pub fn encode(&self, values: &[usize]) -> Option<usize> {
        let atoms = self.atoms();
        if values.len() != atoms.len() {
            return None;
        }
        let mut idx = 0usize;
        for (v, a) in values.iter().zip(&atoms) {
            if *v >= a.dimension() {
                return None;
            }
            idx = idx * a.dimension() + v;
        }
        Some(idx)
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let atoms = self.atoms();
        let mut out = vec![0usize; atoms.len()];
        for i in (0..atoms.len()).rev() {
            let d = atoms[i].dimension();
            out[i] = idx % d;
            idx /= d;
        }
        out
    }
}

impl std::fmt::Display for QType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QType::Bool => write!(f, "bool"),
            QType::ZN(n) => write!(f, "int<{n}>"),
            QType::Pair(a, b) => write!(f, "{a} * {b}"),
            QType::Tuple(t, k) => write!(f, "{t} ^ {k}"),
        }
    }
}

/// A named unitary with its matrix, as produced by the gate registry.
#[derive(Debug, Clone)]
pub struct GateSpec {
    pub name: String,
    pub matrix: ComplexMatrix,
}

impl GateSpec {
    fn checked(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_unitary(1e-9) {
            return Err(GateError::NotUnitary);
        }
        Ok(GateSpec { name: name.into(), matrix })
    }
}

pub fn hadamard() -> ComplexMatrix {
    let h = re(1.0 / 2.0_f64.sqrt());
    ComplexMatrix::new(2, 2, vec![h, h, h, -h]).unwrap()
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![re(0.0), re(1.0), re(1.0), re(0.0)]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        2,
        vec![re(0.0), Scalar::new(0.0, -1.0), Scalar::new(0.0, 1.0), re(0.0)],
    )
    .unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diag(&[re(1.0), re(-1.0)])
}

/// `S = diag(1, i)`.
pub fn s_gate() -> ComplexMatrix {
    ComplexMatrix::diag(&[re(1.0), Scalar::new(0.0, 1.0)])
}

/// Phase gate `diag(1, e^{i theta})`.
pub fn phase(theta: f64) -> ComplexMatrix {
    ComplexMatrix::diag(&[re(1.0), Scalar::from_polar(1.0, theta)])
}

/// Controlled unitary `|0><0| (x) I + |1><1| (x) U`.
pub fn controlled(u: &ComplexMatrix) -> ComplexMatrix {
    let d = u.rows();
    let mut out = ComplexMatrix::identity(2 * d);
    for i in 0..d {
        for j in 0..d {
            out.set(d + i, d + j, u.get(i, j));
        }
    }
    out
}

pub fn cz() -> ComplexMatrix {
    controlled(&pauli_z())
}

/// Swap of two `d`-dimensional systems.
pub fn swap(d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m.set(j * d + i, i * d + j, Scalar::ONE);
        }
    }
    m
}

/// Fourier transform on `Z_n`: entries `e^{2 pi i g h / n} / sqrt(n)`.
pub fn qft(n: usize) -> ComplexMatrix {
    let s = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |g, h| {
        Scalar::from_polar(s, TAU * (g as f64) * (h as f64) / (n as f64))
    })
}

/// Fourier transform of a finite abelian group: `F_G[g,h] = chi_g(h)/sqrt|G|`.
pub fn group_qft(g: &AbelianGroup) -> ComplexMatrix {
    let s = re(1.0 / (g.order() as f64).sqrt());
    ComplexMatrix::from_fn(g.order(), g.order(), |a, b| g.character(a, b) * s)
}

/// Oracle unitary `U[f] = sum_{g,t} |(g, t + f(g))><(g, t)|` where the
/// target carries cyclic addition modulo `y_dim`. `f` is a value table over
/// the domain indices.
pub fn oracle(f: &[usize], y_dim: usize) -> Result<ComplexMatrix> {
    if y_dim == 0 {
        return Err(GateError::BadParam("oracle".into(), "empty target type".into()));
    }
    if let Some(&bad) = f.iter().find(|&&v| v >= y_dim) {
        return Err(GateError::BadParam(
            "oracle".into(),
            format!("value {bad} outside target of size {y_dim}"),
        ));
    }
    let dom = f.len();
    let mut m = ComplexMatrix::zeros(dom * y_dim, dom * y_dim);
    for g in 0..dom {
        for t in 0..y_dim {
            let out = g * y_dim + (t + f[g]) % y_dim;
            m.set(out, g * y_dim + t, Scalar::ONE);
        }
    }
    Ok(m)
}

/// Diagonal phase oracle `diag((-1)^{f(t)})`.
pub fn phase_oracle(f: &[bool]) -> ComplexMatrix {
    let diag: Vec<Scalar> = f.iter().map(|&b| if b { re(-1.0) } else { re(1.0) }).collect();
    ComplexMatrix::diag(&diag)
}

/// Block-diagonal controlled family `sum_k |k><k| (x) U_k`.
pub fn multiplexer(family: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let d = family.first().map(|m| m.rows()).unwrap_or(0);
    for u in family {
        if u.rows() != d || u.cols() != d {
            return Err(GateError::BadParam("multiplexer".into(), "uneven block sizes".into()));
        }
        if !u.is_unitary(1e-9) {
            return Err(GateError::NotUnitary);
        }
    }
    let k = family.len();
    let mut m = ComplexMatrix::zeros(k * d, k * d);
    for (b, u) in family.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                m.set(b * d + i, b * d + j, u.get(i, j));
            }
        }
    }
    Ok(m)
}

/// Builds a unitary agreeing with the given columns, completing the rest by
/// Gram-Schmidt over the standard basis. Untouched standard basis vectors
/// are processed in index order; residuals with norm below `1e-10` are
/// treated as dependent and skipped.
pub fn complete_unitary(dim: usize, columns: &[(usize, Vec<Scalar>)]) -> Result<ComplexMatrix> {
    let mut fixed: Vec<Option<Vec<Scalar>>> = vec![None; dim];
    for (idx, col) in columns {
        if *idx >= dim || col.len() != dim {
            return Err(GateError::BadParam(
                "complete_unitary".into(),
                "column index or length out of range".into(),
            ));
        }
        if fixed[*idx].is_some() {
            return Err(GateError::BadParam(
                "complete_unitary".into(),
                format!("column {idx} given twice"),
            ));
        }
        fixed[*idx] = Some(col.clone());
    }
    // Orthonormality of the inputs.
    for (i, ci) in columns.iter().enumerate() {
        for (j, cj) in columns.iter().enumerate() {
            let dot: Scalar = ci.1.iter().zip(&cj.1).map(|(a, b)| a.conj() * b).sum();
            let want = if i == j { Scalar::ONE } else { Scalar::ZERO };
            if (dot - want).norm() > 1e-8 {
                return Err(GateError::NotOrthonormal);
            }
        }
    }

    let mut chosen: Vec<Vec<Scalar>> = columns.iter().map(|(_, c)| c.clone()).collect();
    let mut basis_cursor = 0usize;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for slot in 0..dim {
        let col = match &fixed[slot] {
            Some(c) => c.clone(),
            None => {
                // Next standard basis vector with a surviving residual.
                loop {
                    if basis_cursor >= dim {
                        return Err(GateError::NotOrthonormal);
                    }
                    let mut v = vec![Scalar::ZERO; dim];
                    v[basis_cursor] = Scalar::ONE;
                    basis_cursor += 1;
                    for c in &chosen {
                        let dot: Scalar = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                        for (vi, ci) in v.iter_mut().zip(c) {
                            *vi -= dot * ci;
                        }
                    }
                    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if norm >= 1e-10 {
                        for vi in v.iter_mut() {
                            *vi /= re(norm);
                        }
                        chosen.push(v.clone());
                        break v;
                    }
                }
            }
        };
        for (i, z) in col.iter().enumerate() {
            out.set(i, slot, *z);
        }
    }
    if !out.is_unitary(1e-8) {
        return Err(GateError::NotOrthonormal);
    }
    Ok(out)
}

/// Unitary mapping the basis state `|from>` to the uniform superposition
/// (and completed elsewhere).
pub fn uniform_unitary(dim: usize, from: usize) -> ComplexMatrix {
    let amp = re(1.0 / (dim as f64).sqrt());
    let col = vec![amp; dim];
    complete_unitary(dim, &[(from, col)]).expect("uniform column is normalized")
}

/// `e^{i A t}` for Hermitian `A`, via eigendecomposition.
pub fn matrix_exponential_of_hermitian(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = a.hermitian_eig(1e-9).map_err(|e| match e {
        LinalgError::NotHermitian(_) => GateError::NotHermitian,
        other => GateError::Linalg(other),
    })?;
    Ok(eig.map_eigenvalues(|l| Scalar::from_polar(1.0, l * t)))
}

/// Resolves a gate name with numeric parameters against the built-in
/// registry. `dims` are the dimensions of the target variables, used by
/// dimension-generic gates (QFT, SWAP, Hn).
pub fn builtin(name: &str, params: &[f64], dims: &[usize]) -> Result<GateSpec> {
    let total: usize = dims.iter().product::<usize>().max(1);
    let need = |cond: bool, msg: &str| -> Result<()> {
        if cond {
            Ok(())
        } else {
            Err(GateError::BadParam(name.into(), msg.into()))
        }
    };
    let spec = match name {
        "H" => {
            need(total == 2, "H acts on a single qubit")?;
            GateSpec::checked("H", hadamard())?
        }
        "X" => {
            need(total == 2, "X acts on a single qubit")?;
            GateSpec::checked("X", pauli_x())?
        }
        "Y" => {
            need(total == 2, "Y acts on a single qubit")?;
            GateSpec::checked("Y", pauli_y())?
        }
        "Z" => {
            need(total == 2, "Z acts on a single qubit")?;
            GateSpec::checked("Z", pauli_z())?
        }
        "S" => {
            need(total == 2, "S acts on a single qubit")?;
            GateSpec::checked("S", s_gate())?
        }
        "Ph" => {
            need(params.len() == 1, "Ph takes one angle")?;
            need(total == 2, "Ph acts on a single qubit")?;
            GateSpec::checked("Ph", phase(params[0]))?
        }
        "CZ" => {
            need(total == 4, "CZ acts on two qubits")?;
            GateSpec::checked("CZ", cz())?
        }
        "SWAP" => {
            need(dims.len() == 2 && dims[0] == dims[1], "SWAP needs two equal factors")?;
            GateSpec::checked("SWAP", swap(dims[0]))?
        }
        "QFT" => GateSpec::checked("QFT", qft(total))?,
        "IQFT" => GateSpec::checked("IQFT", qft(total).adjoint())?,
        "Hn" => GateSpec::checked("Hn", uniform_unitary(total, 0))?,
        other => return Err(GateError::UnknownGate(other.into())),
    };
    Ok(spec)
}

/// Angle of the controlled-phase rotation used at distance `k` in the
/// Fourier circuit: `pi / 2^k`.
pub fn qft_rotation_angle(k: u32) -> f64 {
    PI / (2u64.pow(k) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn qtype_dimensions_and_atoms() {
        let t = QType::Pair(Box::new(QType::Bool), Box::new(QType::ZN(3)));
        assert_eq!(t.dimension(), 6);
        assert_eq!(t.atoms(), vec![QType::Bool, QType::ZN(3)]);
        let tup = QType::Tuple(Box::new(QType::Bool), 3);
        assert_eq!(tup.dimension(), 8);
        assert_eq!(tup.atoms().len(), 3);
        // Encoding: leftmost most significant.
        assert_eq!(t.encode(&[1, 2]), Some(5));
        assert_eq!(t.decode(5), vec![1, 2]);
        assert_eq!(t.encode(&[0, 3]), None);
    }

    #[test]
    fn hadamard_squares_to_identity() {
        let h = hadamard();
        assert!(h.matmul(&h).unwrap().approx_eq(&ComplexMatrix::identity(2), 1e-12));
    }

    #[test]
    fn cz_is_diagonal_sign_flip() {
        // CU applied to Z gives diag(1,1,1,-1).
        let expected = ComplexMatrix::diag(&[re(1.0), re(1.0), re(1.0), re(-1.0)]);
        assert!(cz().approx_eq(&expected, 0.0));
    }

    #[test]
    fn swap_exchanges_factors() {
        let mut rng = StdRng::seed_from_u64(1);
        for d in [2usize, 3] {
            let u = ComplexMatrix::from_fn(d, 1, |_, _| {
                Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let v = ComplexMatrix::from_fn(d, 1, |_, _| {
                Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let lhs = swap(d).matmul(&u.kron(&v)).unwrap();
            assert!(lhs.approx_eq(&v.kron(&u), 1e-12));
        }
    }

    #[test]
    fn qft_two_is_hadamard() {
        assert!(qft(2).approx_eq(&hadamard(), 1e-12));
    }

    #[test]
    fn qft_unitary_up_to_eight() {
        for n in 1..=8 {
            assert!(qft(n).is_unitary(1e-9), "qft({n})");
        }
    }

    #[test]
    fn group_qft_of_z2xz2_is_hh() {
        let g = AbelianGroup::new(vec![2, 2]);
        let hh = hadamard().kron(&hadamard());
        assert!(group_qft(&g).approx_eq(&hh, 1e-12));
    }

    #[test]
    fn group_qft_columns_are_characters() {
        let g = AbelianGroup::new(vec![3, 2]);
        let f = group_qft(&g);
        let s = 1.0 / (g.order() as f64).sqrt();
        for a in g.elements() {
            for b in g.elements() {
                assert!((f.get(a, b) - g.character(a, b) * re(s)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn oracle_cases() {
        // f == 0 gives the identity.
        assert!(oracle(&[0, 0], 2).unwrap().approx_eq(&ComplexMatrix::identity(4), 0.0));
        // f = id on Z_2 into Z_2 is CNOT (4x4 permutation with blocks I, X).
        let cnot = oracle(&[0, 1], 2).unwrap();
        let mut expected = ComplexMatrix::identity(4);
        expected.set(2, 2, Scalar::ZERO);
        expected.set(3, 3, Scalar::ZERO);
        expected.set(2, 3, Scalar::ONE);
        expected.set(3, 2, Scalar::ONE);
        assert!(cnot.approx_eq(&expected, 0.0));
        // Permutation structure and unitarity for a random f on Z_4.
        let mut rng = StdRng::seed_from_u64(2);
        let f: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let u = oracle(&f, 4).unwrap();
        assert!(u.is_unitary(1e-12));
        for i in 0..u.rows() {
            let ones =
                (0..u.cols()).filter(|&j| (u.get(i, j) - Scalar::ONE).norm() < 1e-12).count();
            let zeros = (0..u.cols()).filter(|&j| u.get(i, j).norm() < 1e-12).count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, u.cols() - 1);
        }
    }

    #[test]
    fn phase_oracle_cases() {
        assert!(phase_oracle(&[false, false]).approx_eq(&ComplexMatrix::identity(2), 0.0));
        let ind = phase_oracle(&[false, true, false]);
        let mut expected = ComplexMatrix::identity(3);
        expected.set(1, 1, re(-1.0));
        assert!(ind.approx_eq(&expected, 0.0));
        let mut rng = StdRng::seed_from_u64(3);
        let f: Vec<bool> = (0..5).map(|_| rng.random_bool(0.5)).collect();
        let u = phase_oracle(&f);
        assert!(u.matmul(&u).unwrap().approx_eq(&ComplexMatrix::identity(5), 0.0));
    }

    #[test]
    fn multiplexer_cases() {
        let id = ComplexMatrix::identity(2);
        assert!(multiplexer(&[id.clone(), id.clone()])
            .unwrap()
            .approx_eq(&ComplexMatrix::identity(4), 0.0));
        let cnot = multiplexer(&[id, pauli_x()]).unwrap();
        assert!(cnot.approx_eq(&oracle(&[0, 1], 2).unwrap(), 1e-12));
        let family = vec![hadamard(), s_gate(), pauli_y()];
        assert!(multiplexer(&family).unwrap().is_unitary(1e-9));
        assert!(multiplexer(&[ComplexMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn complete_unitary_cases() {
        let b = vec![re(0.6), re(0.8)];
        let u = complete_unitary(2, &[(0, b.clone())]).unwrap();
        assert!((u.get(0, 0) - b[0]).norm() < 1e-12 && (u.get(1, 0) - b[1]).norm() < 1e-12);
        assert!(u.is_unitary(1e-9));
        // Full orthonormal input is returned as-is.
        let h = hadamard();
        let u = complete_unitary(2, &[(0, h.column(0)), (1, h.column(1))]).unwrap();
        assert!(u.approx_eq(&h, 1e-12));
        // Random partial input.
        let mut rng = StdRng::seed_from_u64(4);
        let dim = 5;
        let raw: Vec<Scalar> = (0..dim)
            .map(|_| Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let col: Vec<Scalar> = raw.iter().map(|z| z / re(norm)).collect();
        let u = complete_unitary(dim, &[(2, col.clone())]).unwrap();
        assert!(u.is_unitary(1e-9));
        for (i, z) in col.iter().enumerate() {
            assert!((u.get(i, 2) - z).norm() < 1e-12);
        }
        // Non-orthonormal input rejected.
        assert!(complete_unitary(2, &[(0, vec![re(1.0), re(1.0)])]).is_err());
    }

    #[test]
    fn uniform_unitary_maps_default_to_uniform() {
        for d in [2usize, 4, 5] {
            let u = uniform_unitary(d, 0);
            assert!(u.is_unitary(1e-9));
            let amp = 1.0 / (d as f64).sqrt();
            for i in 0..d {
                assert!((u.get(i, 0) - re(amp)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_exponential_cases() {
        let z = pauli_z();
        assert!(matrix_exponential_of_hermitian(&z, 0.0)
            .unwrap()
            .approx_eq(&ComplexMatrix::identity(2), 1e-12));
        // e^{i Z pi} = diag(e^{i pi}, e^{-i pi}) = -I.
        let m = matrix_exponential_of_hermitian(&z, PI).unwrap();
        assert!(m.approx_eq(&ComplexMatrix::identity(2).scale(re(-1.0)), 1e-10));
        let mut rng = StdRng::seed_from_u64(5);
        let raw = ComplexMatrix::from_fn(3, 3, |_, _| {
            Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let herm = raw.add(&raw.adjoint()).unwrap().scale(re(0.5));
        assert!(matrix_exponential_of_hermitian(&herm, 0.37).unwrap().is_unitary(1e-9));
        assert!(matrix_exponential_of_hermitian(&raw, 1.0).is_err());
    }

    #[test]
    fn registry_resolves_and_rejects() {
        assert!(builtin("H", &[], &[2]).is_ok());
        assert!(builtin("QFT", &[], &[4]).is_ok());
        assert!(builtin("SWAP", &[], &[3, 3]).is_ok());
        assert!(matches!(builtin("NOPE", &[], &[2]), Err(GateError::UnknownGate(_))));
        assert!(matches!(builtin("H", &[], &[3]), Err(GateError::BadParam(_, _))));
        for name in ["H", "X", "Y", "Z", "S", "CZ"] {
            let dims: &[usize] = if name == "CZ" { &[2, 2] } else { &[2] };
            let g = builtin(name, &[], dims).unwrap();
            assert!(g.matrix.is_unitary(1e-9), "{name}");
        }
    }
}
