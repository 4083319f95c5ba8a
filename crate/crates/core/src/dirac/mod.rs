//! Labelled Dirac notation: kets, bras and operators tagged with the
//! subsystem labels they inhabit.
//!
//! Every value is kept in a single normal form: labels sorted ascending,
//! with the first label of the sorted set most significant in the
//! mixed-radix basis index. Constructors re-permute immediately, so equality
//! of labelled operators is equality of label sets plus matrix closeness.
//!
//! Composition auto-lifts: `compose(f, g)` tensors each side with the
//! identity on the labels it is missing, then contracts over the shared
//! labels. This is what lets `U_{S1} (|phi>_{S1} |psi>_{S2})` be written
//! without spelling out `U (x) I`.

pub mod parse;

use crate::linalg::{re, ComplexMatrix, LinalgError, Scalar};
use crate::qtypes::QType;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiracError {
    #[error("label clash: {0}")]
    LabelClash(String),
    #[error("label sets differ: {0}")]
    LabelMismatch(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(Label),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` already declared")]
    DuplicateVariable(String),
    #[error("operator is not square")]
    NotSquare,
    #[error("label set is not a superset of the operator's labels")]
    NotSuperset,
    #[error("assertion syntax error at {0}: {1}")]
    Syntax(usize, String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, DiracError>;

/// Identifier of one atomic subsystem (one storage location).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

/// Identifier of a declared program variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub u32);

/// Sorted, duplicate-free set of labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSet(Vec<Label>);

impl LabelSet {
    pub fn empty() -> Self {
        LabelSet(Vec::new())
    }

    pub fn from_slice(labels: &[Label]) -> Self {
        let mut v = labels.to_vec();
        v.sort_unstable();
        v.dedup();
        LabelSet(v)
    }

    pub fn singleton(l: Label) -> Self {
        LabelSet(vec![l])
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, l: Label) -> bool {
        self.0.binary_search(&l).is_ok()
    }

    pub fn position(&self, l: Label) -> Option<usize> {
        self.0.binary_search(&l).ok()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        v.dedup();
        LabelSet(v)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        LabelSet(self.0.iter().copied().filter(|l| other.contains(*l)).collect())
    }

    pub fn difference(&self, other: &Self) -> Self {
        LabelSet(self.0.iter().copied().filter(|l| !other.contains(*l)).collect())
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.iter().all(|l| other.contains(*l))
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<T: IntoIterator<Item = Label>>(iter: T) -> Self {
        let v: Vec<Label> = iter.into_iter().collect();
        LabelSet::from_slice(&v)
    }
}

/// One atomic storage location: a display name, its dimension and the atomic
/// type it encodes.
#[derive(Debug, Clone)]
pub struct LabelSlot {
    pub name: String,
    pub dim: usize,
    pub ty: QType,
}

/// A declared variable: its type and the ordered run of labels its atomic
/// components occupy.
#[derive(Debug, Clone)]
pub struct VarEntry {
    pub name: String,
    pub qtype: QType,
    pub labels: Vec<Label>,
}

/// Registry of labels and variables. Label ids are dense `0..k`.
#[derive(Debug, Clone, Default)]
pub struct VarTable {
    slots: Vec<LabelSlot>,
    vars: Vec<VarEntry>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable, allocating one label per atomic component.
    pub fn declare(&mut self, name: &str, qtype: QType) -> Result<VarId> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(DiracError::DuplicateVariable(name.into()));
        }
        let atoms = qtype.atoms();
        let mut labels = Vec::with_capacity(atoms.len());
        for (i, ty) in atoms.iter().enumerate() {
            let slot_name =
                if atoms.len() == 1 { name.to_string() } else { format!("{name}[{i}]") };
            let l = Label(self.slots.len() as u32);
            self.slots.push(LabelSlot { name: slot_name, dim: ty.dimension(), ty: ty.clone() });
            labels.push(l);
        }
        self.vars.push(VarEntry { name: name.into(), qtype, labels });
        Ok(VarId(self.vars.len() as u32 - 1))
    }

    /// Registers a view over existing labels under a new name. Views let
    /// tuple components act as assignment targets while sharing storage
    /// with their parent variable.
    pub fn declare_view(&mut self, name: &str, qtype: QType, labels: Vec<Label>) -> Result<VarId> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(DiracError::DuplicateVariable(name.into()));
        }
        let atoms = qtype.atoms();
        if atoms.len() != labels.len() {
            return Err(DiracError::LabelMismatch("view shape".into()));
        }
        for (ty, &l) in atoms.iter().zip(&labels) {
            if (l.0 as usize) >= self.slots.len() {
                return Err(DiracError::UnknownLabel(l));
            }
            if self.dim(l) != ty.dimension() {
                return Err(DiracError::LabelMismatch("view dimension".into()));
            }
        }
        self.vars.push(VarEntry { name: name.into(), qtype, labels });
        Ok(VarId(self.vars.len() as u32 - 1))
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(|i| VarId(i as u32))
    }

    pub fn var(&self, id: VarId) -> &VarEntry {
        &self.vars[id.0 as usize]
    }

    pub fn vars(&self) -> impl Iterator<Item = (VarId, &VarEntry)> {
        self.vars.iter().enumerate().map(|(i, v)| (VarId(i as u32), v))
    }

    pub fn label_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, l: Label) -> &LabelSlot {
        &self.slots[l.0 as usize]
    }

    pub fn dim(&self, l: Label) -> usize {
        self.slots[l.0 as usize].dim
    }

    pub fn dim_of(&self, s: &LabelSet) -> usize {
        s.iter().map(|l| self.dim(l)).product()
    }

    pub fn all_labels(&self) -> LabelSet {
        (0..self.slots.len() as u32).map(Label).collect()
    }

    /// Ordered labels of a variable list, left to right.
    pub fn labels_of_vars(&self, vars: &[VarId]) -> Vec<Label> {
        vars.iter().flat_map(|&v| self.var(v).labels.iter().copied()).collect()
    }

    /// Joint dimension of a variable list.
    pub fn dim_of_vars(&self, vars: &[VarId]) -> usize {
        self.labels_of_vars(vars).iter().map(|&l| self.dim(l)).product()
    }
}

/// Decompose `idx` into mixed-radix digits (first dim most significant).
fn to_digits(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
}

/// Map from canonical (sorted-label) indices to indices in the given label
/// order; identity when the given order is already sorted.
fn canonical_to_ordered(dims_by_label: &[(Label, usize)], ordered: &[Label]) -> Vec<usize> {
    let n = dims_by_label.len();
    let dims: Vec<usize> = dims_by_label.iter().map(|&(_, d)| d).collect();
    let total: usize = dims.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut digit = vec![0usize; n];
    for idx in 0..total {
        to_digits(idx, &dims, &mut digit);
        let mut o = 0usize;
        for l in ordered {
            let pos = dims_by_label.iter().position(|&(x, _)| x == *l).unwrap();
            o = o * dims[pos] + digit[pos];
        }
        map.push(o);
    }
    map
}

/// A matrix together with the label sets of its codomain (`out`) and domain
/// (`in`). Kets have empty `in`, bras empty `out`, scalars both. Each label
/// carries its dimension so combinators need no table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledOperator {
    out_labels: LabelSet,
    in_labels: LabelSet,
    /// Dimension per out label, aligned with the sorted label set.
    out_dims: Vec<usize>,
    /// Dimension per in label, aligned with the sorted label set.
    in_dims: Vec<usize>,
    matrix: ComplexMatrix,
}

impl LabelledOperator {
    pub fn out_labels(&self) -> &LabelSet {
        &self.out_labels
    }

    pub fn in_labels(&self) -> &LabelSet {
        &self.in_labels
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Square on the same labels in and out.
    pub fn is_square_on(&self) -> bool {
        self.out_labels == self.in_labels
    }

    pub fn scalar(z: Scalar) -> Self {
        LabelledOperator {
            out_labels: LabelSet::empty(),
            in_labels: LabelSet::empty(),
            out_dims: Vec::new(),
            in_dims: Vec::new(),
            matrix: ComplexMatrix::new(1, 1, vec![z]).expect("finite scalar"),
        }
    }

    pub fn one() -> Self {
        Self::scalar(Scalar::ONE)
    }

    /// The scalar value of a 1x1 operator with no labels.
    pub fn as_scalar(&self) -> Option<Scalar> {
        if self.out_labels.is_empty() && self.in_labels.is_empty() {
            Some(self.matrix.get(0, 0))
        } else {
            None
        }
    }

    fn labelled_dims(table: &VarTable, set: &LabelSet) -> Vec<usize> {
        set.iter().map(|l| table.dim(l)).collect()
    }

    pub fn identity(table: &VarTable, labels: &LabelSet) -> Self {
        let dims = Self::labelled_dims(table, labels);
        let d: usize = dims.iter().product();
        LabelledOperator {
            out_labels: labels.clone(),
            in_labels: labels.clone(),
            out_dims: dims.clone(),
            in_dims: dims,
            matrix: ComplexMatrix::identity(d),
        }
    }

    fn identity_from_dims(labels: &LabelSet, dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        LabelledOperator {
            out_labels: labels.clone(),
            in_labels: labels.clone(),
            out_dims: dims.to_vec(),
            in_dims: dims.to_vec(),
            matrix: ComplexMatrix::identity(d),
        }
    }

    pub fn zero(table: &VarTable, out: &LabelSet, inp: &LabelSet) -> Self {
        let out_dims = Self::labelled_dims(table, out);
        let in_dims = Self::labelled_dims(table, inp);
        let (r, c) = (out_dims.iter().product(), in_dims.iter().product());
        LabelledOperator {
            out_labels: out.clone(),
            in_labels: inp.clone(),
            out_dims,
            in_dims,
            matrix: ComplexMatrix::zeros(r, c),
        }
    }

    fn check_labels(table: &VarTable, ordered: &[Label]) -> Result<LabelSet> {
        for &l in ordered {
            if (l.0 as usize) >= table.label_count() {
                return Err(DiracError::UnknownLabel(l));
            }
        }
        let set = LabelSet::from_slice(ordered);
        if set.len() != ordered.len() {
            return Err(DiracError::LabelClash("duplicate label in constructor".into()));
        }
        Ok(set)
    }

    /// Ket on the given labels; `coeffs` are indexed mixed-radix in the
    /// *given* label order (leftmost most significant) and re-permuted into
    /// canonical order.
    pub fn ket(table: &VarTable, ordered_labels: &[Label], coeffs: &[Scalar]) -> Result<Self> {
        let set = Self::check_labels(table, ordered_labels)?;
        let dims = Self::labelled_dims(table, &set);
        let d: usize = dims.iter().product();
        if coeffs.len() != d {
            return Err(DiracError::Linalg(LinalgError::ShapeMismatch(format!(
                "ket needs {d} coefficients, got {}",
                coeffs.len()
            ))));
        }
        let by_label: Vec<(Label, usize)> = set.iter().zip(dims.iter().copied()).collect();
        let map = canonical_to_ordered(&by_label, ordered_labels);
        let data: Vec<Scalar> = (0..d).map(|r| coeffs[map[r]]).collect();
        Ok(LabelledOperator {
            out_labels: set,
            in_labels: LabelSet::empty(),
            out_dims: dims,
            in_dims: Vec::new(),
            matrix: ComplexMatrix::new(d, 1, data)?,
        })
    }

    /// Bra: the adjoint of the corresponding ket.
    pub fn bra(table: &VarTable, ordered_labels: &[Label], coeffs: &[Scalar]) -> Result<Self> {
        Ok(Self::ket(table, ordered_labels, coeffs)?.adjoint())
    }

    /// Computational basis ket `|index>`, index mixed-radix in the given
    /// label order.
    pub fn basis_ket(table: &VarTable, ordered_labels: &[Label], index: usize) -> Result<Self> {
        let set = LabelSet::from_slice(ordered_labels);
        let d = table.dim_of(&set);
        if index >= d {
            return Err(DiracError::Linalg(LinalgError::BadIndex(format!(
                "basis index {index} out of {d}"
            ))));
        }
        let mut coeffs = vec![Scalar::ZERO; d];
        coeffs[index] = Scalar::ONE;
        Self::ket(table, ordered_labels, &coeffs)
    }

    /// Square operator whose matrix is written in the basis of the given
    /// label order; re-permuted into canonical order.
    pub fn operator_on(
        table: &VarTable,
        ordered_labels: &[Label],
        matrix: ComplexMatrix,
    ) -> Result<Self> {
        let set = Self::check_labels(table, ordered_labels)?;
        let dims = Self::labelled_dims(table, &set);
        let d: usize = dims.iter().product();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(DiracError::Linalg(LinalgError::ShapeMismatch(format!(
                "operator on dim {d} got {}x{}",
                matrix.rows(),
                matrix.cols()
            ))));
        }
        let by_label: Vec<(Label, usize)> = set.iter().zip(dims.iter().copied()).collect();
        let map = canonical_to_ordered(&by_label, ordered_labels);
        let permuted = ComplexMatrix::from_fn(d, d, |r, c| matrix.get(map[r], map[c]));
        Ok(LabelledOperator {
            out_labels: set.clone(),
            in_labels: set,
            out_dims: dims.clone(),
            in_dims: dims,
            matrix: permuted,
        })
    }

    /// Tensor product; requires disjoint outputs and disjoint inputs.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if !self.out_labels.is_disjoint(&other.out_labels) {
            return Err(DiracError::LabelClash("tensor with shared output labels".into()));
        }
        if !self.in_labels.is_disjoint(&other.in_labels) {
            return Err(DiracError::LabelClash("tensor with shared input labels".into()));
        }

        // Merged axis: canonical order of the union; remember which factor
        // each label came from and at which position.
        fn merge(
            a: &LabelSet,
            a_dims: &[usize],
            b: &LabelSet,
            b_dims: &[usize],
        ) -> (LabelSet, Vec<usize>, Vec<(bool, usize)>) {
            let union = a.union(b);
            let mut dims = Vec::with_capacity(union.len());
            let mut origin = Vec::with_capacity(union.len());
            for l in union.iter() {
                if let Some(p) = a.position(l) {
                    dims.push(a_dims[p]);
                    origin.push((true, p));
                } else {
                    let p = b.position(l).unwrap();
                    dims.push(b_dims[p]);
                    origin.push((false, p));
                }
            }
            (union, dims, origin)
        }

        let (out_labels, out_dims, out_origin) =
            merge(&self.out_labels, &self.out_dims, &other.out_labels, &other.out_dims);
        let (in_labels, in_dims, in_origin) =
            merge(&self.in_labels, &self.in_dims, &other.in_labels, &other.in_dims);

        // For a merged index, the sub-index of each factor is a mixed-radix
        // fold of that factor's digits in its own sorted order.
        fn split(
            digits: &[usize],
            dims: &[usize],
            origin: &[(bool, usize)],
            n_self: usize,
            n_other: usize,
        ) -> (usize, usize) {
            let mut ds = vec![0usize; n_self];
            let mut dds = vec![0usize; n_self];
            let mut do_ = vec![0usize; n_other];
            let mut ddo = vec![0usize; n_other];
            for (k, &(mine, pos)) in origin.iter().enumerate() {
                if mine {
                    ds[pos] = digits[k];
                    dds[pos] = dims[k];
                } else {
                    do_[pos] = digits[k];
                    ddo[pos] = dims[k];
                }
            }
            let fold = |dg: &[usize], dm: &[usize]| dg.iter().zip(dm).fold(0, |a, (&x, &d)| a * d + x);
            (fold(&ds, &dds), fold(&do_, &ddo))
        }

        let d_out: usize = out_dims.iter().product();
        let d_in: usize = in_dims.iter().product();
        let mut mat = ComplexMatrix::zeros(d_out, d_in);
        let mut rdig = vec![0usize; out_dims.len()];
        let mut cdig = vec![0usize; in_dims.len()];
        for r in 0..d_out {
            to_digits(r, &out_dims, &mut rdig);
            let (ra, rb) =
                split(&rdig, &out_dims, &out_origin, self.out_dims.len(), other.out_dims.len());
            for c in 0..d_in {
                to_digits(c, &in_dims, &mut cdig);
                let (ca, cb) =
                    split(&cdig, &in_dims, &in_origin, self.in_dims.len(), other.in_dims.len());
                mat.set(r, c, self.matrix.get(ra, ca) * other.matrix.get(rb, cb));
            }
        }
        Ok(LabelledOperator { out_labels, in_labels, out_dims, in_dims, matrix: mat })
    }

    /// Composition with automatic lifting: with `A = self.in`, `D = g.out`,
    /// the result is `(self (x) I_{D\A}) . (g (x) I_{A\D})`, contracting over
    /// `A /\ D`.
    pub fn compose(&self, g: &Self) -> Result<Self> {
        let a = &self.in_labels;
        let d = &g.out_labels;
        let d_ext = d.difference(a);
        let a_ext = a.difference(d);
        if !self.out_labels.is_disjoint(&d_ext) {
            return Err(DiracError::LabelClash(
                "left operand output collides with lifted labels".into(),
            ));
        }
        if !g.in_labels.is_disjoint(&a_ext) {
            return Err(DiracError::LabelClash(
                "right operand input collides with lifted labels".into(),
            ));
        }
        let d_ext_dims: Vec<usize> =
            d_ext.iter().map(|l| g.out_dims[g.out_labels.position(l).unwrap()]).collect();
        let a_ext_dims: Vec<usize> =
            a_ext.iter().map(|l| self.in_dims[a.position(l).unwrap()]).collect();
        let f_lift = self.tensor(&Self::identity_from_dims(&d_ext, &d_ext_dims))?;
        let g_lift = g.tensor(&Self::identity_from_dims(&a_ext, &a_ext_dims))?;
        debug_assert_eq!(f_lift.in_labels, g_lift.out_labels);
        let matrix = f_lift.matrix.matmul(&g_lift.matrix)?;
        Ok(LabelledOperator {
            out_labels: f_lift.out_labels,
            in_labels: g_lift.in_labels,
            out_dims: f_lift.out_dims,
            in_dims: g_lift.in_dims,
            matrix,
        })
    }

    /// Cylindrical extension `cl_T(A) = A (x) I_{T\S}` for square `A` on `S`.
    pub fn cyl_extend(&self, table: &VarTable, target: &LabelSet) -> Result<Self> {
        if !self.is_square_on() {
            return Err(DiracError::NotSquare);
        }
        if !self.out_labels.is_subset(target) {
            return Err(DiracError::NotSuperset);
        }
        let rest = target.difference(&self.out_labels);
        self.tensor(&Self::identity(table, &rest))
    }

    /// Fold of [`tensor`](Self::tensor) over any number of operands; the
    /// empty product is the scalar 1.
    pub fn big_tensor<'a>(items: impl IntoIterator<Item = &'a Self>) -> Result<Self> {
        let mut acc = Self::one();
        for x in items {
            acc = acc.tensor(x)?;
        }
        Ok(acc)
    }

    /// Frobenius norm (vector 2-norm for kets).
    pub fn norm(&self) -> f64 {
        self.matrix.frob_norm()
    }

    pub fn trace(&self) -> Result<Scalar> {
        if !self.is_square_on() {
            return Err(DiracError::NotSquare);
        }
        Ok(self.matrix.trace()?)
    }

    /// Partial trace of a square operator, keeping the given labels.
    pub fn partial_trace(&self, keep: &LabelSet) -> Result<Self> {
        if !self.is_square_on() {
            return Err(DiracError::NotSquare);
        }
        if !keep.is_subset(&self.out_labels) {
            return Err(DiracError::NotSuperset);
        }
        let positions: Vec<usize> =
            self.out_labels.iter().enumerate().filter(|(_, l)| keep.contains(*l)).map(|(i, _)| i).collect();
        let reduced = self.matrix.partial_trace(&self.out_dims, &positions)?;
        let kept_dims: Vec<usize> = positions.iter().map(|&i| self.out_dims[i]).collect();
        Ok(LabelledOperator {
            out_labels: keep.clone(),
            in_labels: keep.clone(),
            out_dims: kept_dims.clone(),
            in_dims: kept_dims,
            matrix: reduced,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.out_labels != other.out_labels || self.in_labels != other.in_labels {
            return Err(DiracError::LabelMismatch("add".into()));
        }
        Ok(LabelledOperator {
            out_labels: self.out_labels.clone(),
            in_labels: self.in_labels.clone(),
            out_dims: self.out_dims.clone(),
            in_dims: self.in_dims.clone(),
            matrix: self.matrix.add(&other.matrix)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(re(-1.0)))
    }

    pub fn scale(&self, k: Scalar) -> Self {
        LabelledOperator {
            out_labels: self.out_labels.clone(),
            in_labels: self.in_labels.clone(),
            out_dims: self.out_dims.clone(),
            in_dims: self.in_dims.clone(),
            matrix: self.matrix.scale(k),
        }
    }

    pub fn adjoint(&self) -> Self {
        LabelledOperator {
            out_labels: self.in_labels.clone(),
            in_labels: self.out_labels.clone(),
            out_dims: self.in_dims.clone(),
            in_dims: self.out_dims.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// `|u><u|` for a ket, generally `self . self^dag`.
    pub fn outer_with_self(&self) -> Result<Self> {
        self.compose(&self.adjoint())
    }

    /// Ket on this operator's output labels from coefficients already in
    /// canonical order (used when a vector comes out of an eigensolver run
    /// in the canonical basis).
    pub fn ket_like(&self, coeffs: &[Scalar]) -> Result<Self> {
        let d: usize = self.out_dims.iter().product();
        if coeffs.len() != d {
            return Err(DiracError::Linalg(LinalgError::ShapeMismatch(format!(
                "ket needs {d} coefficients, got {}",
                coeffs.len()
            ))));
        }
        Ok(LabelledOperator {
            out_labels: self.out_labels.clone(),
            in_labels: LabelSet::empty(),
            out_dims: self.out_dims.clone(),
            in_dims: Vec::new(),
            matrix: ComplexMatrix::new(d, 1, coeffs.to_vec())?,
        })
    }

    /// Equality up to `tol`: identical label sets and Frobenius distance at
    /// most `tol * max(1, |self|)`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.out_labels == other.out_labels
            && self.in_labels == other.in_labels
            && self.matrix.approx_eq(&other.matrix, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtypes::{hadamard, QType};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re_: f64, im: f64) -> Scalar {
        Scalar::new(re_, im)
    }

    fn table_xy() -> (VarTable, VarId, VarId) {
        let mut t = VarTable::new();
        let x = t.declare("x", QType::Bool).unwrap();
        let y = t.declare("y", QType::Bool).unwrap();
        (t, x, y)
    }

    fn random_ket(rng: &mut StdRng, dim: usize) -> Vec<Scalar> {
        (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn ket_and_bra_basics() {
        let (t, x, _) = table_xy();
        let lx = t.var(x).labels.clone();
        let k0 = LabelledOperator::basis_ket(&t, &lx, 0).unwrap();
        assert_eq!(k0.out_labels().len(), 1);
        assert!(k0.in_labels().is_empty());
        assert!((k0.norm() - 1.0).abs() < 1e-12);
        let mut rng = StdRng::seed_from_u64(1);
        let v = random_ket(&mut rng, 2);
        let ket = LabelledOperator::ket(&t, &lx, &v).unwrap();
        assert!(ket.adjoint().approx_eq(&LabelledOperator::bra(&t, &lx, &v).unwrap(), 0.0));
    }

    #[test]
    fn bell_ket_matches_sum_of_tensors() {
        let (t, x, y) = table_xy();
        let (lx, ly) = (t.var(x).labels.clone(), t.var(y).labels.clone());
        let h = 1.0 / 2.0_f64.sqrt();
        let bell = LabelledOperator::ket(
            &t,
            &[lx[0], ly[0]],
            &[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)],
        )
        .unwrap();
        let k = |l: Label, i: usize| LabelledOperator::basis_ket(&t, &[l], i).unwrap();
        let built = k(lx[0], 0)
            .tensor(&k(ly[0], 0))
            .unwrap()
            .add(&k(lx[0], 1).tensor(&k(ly[0], 1)).unwrap())
            .unwrap()
            .scale(c(h, 0.0));
        assert!(bell.approx_eq(&built, 1e-12));
    }

    #[test]
    fn tensor_commutes_for_disjoint_labels() {
        let (t, x, y) = table_xy();
        let mut rng = StdRng::seed_from_u64(2);
        let phi =
            LabelledOperator::ket(&t, &t.var(x).labels, &random_ket(&mut rng, 2)).unwrap();
        let psi =
            LabelledOperator::ket(&t, &t.var(y).labels, &random_ket(&mut rng, 2)).unwrap();
        let ab = phi.tensor(&psi).unwrap();
        let ba = psi.tensor(&phi).unwrap();
        assert!(ab.approx_eq(&ba, 0.0));
    }

    #[test]
    fn tensor_with_scalar_is_scaling() {
        let (t, x, _) = table_xy();
        let k = LabelledOperator::basis_ket(&t, &t.var(x).labels, 1).unwrap();
        assert!(k.tensor(&LabelledOperator::one()).unwrap().approx_eq(&k, 0.0));
        let two = LabelledOperator::scalar(c(2.0, 0.0));
        assert!(k.tensor(&two).unwrap().approx_eq(&k.scale(c(2.0, 0.0)), 0.0));
    }

    #[test]
    fn basis_index_order_is_first_label_most_significant() {
        let (t, x, y) = table_xy();
        let (lx, ly) = (t.var(x).labels[0], t.var(y).labels[0]);
        let k0x = LabelledOperator::basis_ket(&t, &[lx], 0).unwrap();
        let k1y = LabelledOperator::basis_ket(&t, &[ly], 1).unwrap();
        let joint = k0x.tensor(&k1y).unwrap();
        // x is label 0 (most significant); |0>_x |1>_y is basis index 1.
        let expected = LabelledOperator::basis_ket(&t, &[lx, ly], 1).unwrap();
        assert!(joint.approx_eq(&expected, 0.0));
    }

    #[test]
    fn ket_in_non_canonical_order_permutes() {
        let (t, x, y) = table_xy();
        let (lx, ly) = (t.var(x).labels[0], t.var(y).labels[0]);
        // |1>_y |0>_x given in order [y, x]: index 2 in that order.
        let given = LabelledOperator::basis_ket(&t, &[ly, lx], 2).unwrap();
        let canonical = LabelledOperator::basis_ket(&t, &[lx, ly], 1).unwrap();
        assert!(given.approx_eq(&canonical, 0.0));
    }

    #[test]
    fn compose_applies_locally() {
        let (t, x, y) = table_xy();
        let mut rng = StdRng::seed_from_u64(3);
        let phi = LabelledOperator::ket(&t, &t.var(x).labels, &random_ket(&mut rng, 2)).unwrap();
        let psi = LabelledOperator::ket(&t, &t.var(y).labels, &random_ket(&mut rng, 2)).unwrap();
        let u = LabelledOperator::operator_on(&t, &t.var(x).labels, hadamard()).unwrap();
        let state = phi.tensor(&psi).unwrap();
        let lhs = u.compose(&state).unwrap();
        let rhs = u.compose(&phi).unwrap().tensor(&psi).unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn compose_bra_ket_is_inner_product() {
        let (t, x, _) = table_xy();
        let mut rng = StdRng::seed_from_u64(4);
        let u = random_ket(&mut rng, 2);
        let v = random_ket(&mut rng, 2);
        let bra = LabelledOperator::bra(&t, &t.var(x).labels, &u).unwrap();
        let ket = LabelledOperator::ket(&t, &t.var(x).labels, &v).unwrap();
        let got = bra.compose(&ket).unwrap().as_scalar().unwrap();
        let expected: Scalar = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((got - expected).norm() < 1e-12);
    }

    #[test]
    fn maximally_entangled_transpose_identity() {
        // A[S] |Phi> = A^T[T] |Phi> with |Phi> = sum_i |i>_S |i>_T.
        for dim in 2..=4usize {
            let mut t = VarTable::new();
            let s = t.declare("s", QType::ZN(dim)).unwrap();
            let tt = t.declare("t", QType::ZN(dim)).unwrap();
            let (ls, lt) = (t.var(s).labels.clone(), t.var(tt).labels.clone());
            let mut phi = LabelledOperator::zero(
                &t,
                &LabelSet::from_slice(&[ls[0], lt[0]]),
                &LabelSet::empty(),
            );
            for i in 0..dim {
                let term = LabelledOperator::basis_ket(&t, &[ls[0]], i)
                    .unwrap()
                    .tensor(&LabelledOperator::basis_ket(&t, &[lt[0]], i).unwrap())
                    .unwrap();
                phi = phi.add(&term).unwrap();
            }
            let mut rng = StdRng::seed_from_u64(40 + dim as u64);
            let a = ComplexMatrix::from_fn(dim, dim, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let a_s = LabelledOperator::operator_on(&t, &ls, a.clone()).unwrap();
            let at_t = LabelledOperator::operator_on(&t, &lt, a.transpose()).unwrap();
            let lhs = a_s.compose(&phi).unwrap();
            let rhs = at_t.compose(&phi).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-12), "dim {dim}");
        }
    }

    #[test]
    fn cyl_extend_cases() {
        let (t, x, y) = table_xy();
        let lx = LabelSet::from_slice(&t.var(x).labels);
        let both = lx.union(&LabelSet::from_slice(&t.var(y).labels));
        let p0 = LabelledOperator::basis_ket(&t, &t.var(x).labels, 0)
            .unwrap()
            .outer_with_self()
            .unwrap();
        assert!(p0.cyl_extend(&t, &lx).unwrap().approx_eq(&p0, 0.0));
        let ext = p0.cyl_extend(&t, &both).unwrap();
        assert!((ext.trace().unwrap() - c(2.0, 0.0)).norm() < 1e-12);
        // Extend then trace back multiplies by dim of the extension.
        let back = ext.partial_trace(&lx).unwrap();
        assert!(back.approx_eq(&p0.scale(c(2.0, 0.0)), 1e-12));
        // Not a superset.
        assert!(matches!(
            p0.cyl_extend(&t, &LabelSet::from_slice(&t.var(y).labels)),
            Err(DiracError::NotSuperset)
        ));
    }

    #[test]
    fn big_tensor_cases() {
        let mut t = VarTable::new();
        let vars: Vec<VarId> =
            (0..3).map(|i| t.declare(&format!("q{i}"), QType::Bool).unwrap()).collect();
        let kets: Vec<LabelledOperator> = vars
            .iter()
            .map(|&v| LabelledOperator::basis_ket(&t, &t.var(v).labels, 0).unwrap())
            .collect();
        assert!(LabelledOperator::big_tensor([]).unwrap().approx_eq(&LabelledOperator::one(), 0.0));
        let fwd = LabelledOperator::big_tensor(kets.iter()).unwrap();
        let rev = LabelledOperator::big_tensor(kets.iter().rev()).unwrap();
        assert!(fwd.approx_eq(&rev, 0.0));
        assert_eq!(fwd.matrix().rows(), 8);
        assert!((fwd.matrix().get(0, 0) - Scalar::ONE).norm() < 1e-15);
    }

    #[test]
    fn approx_eq_respects_tolerance() {
        let (t, x, _) = table_xy();
        let k = LabelledOperator::basis_ket(&t, &t.var(x).labels, 0).unwrap();
        assert!(k.approx_eq(&k, 0.0));
        let nudged = k.add(&k.scale(c(1e-6, 0.0))).unwrap();
        assert!(!k.approx_eq(&nudged, 1e-9));
        assert!(k.approx_eq(&nudged, 1e-5));
    }

    #[test]
    fn compose_is_associative() {
        let mut t = VarTable::new();
        let a = t.declare("a", QType::Bool).unwrap();
        let b = t.declare("b", QType::ZN(3)).unwrap();
        let cvar = t.declare("c", QType::Bool).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let mut rand_op = |vars: &[VarId], ket_like: bool| {
            let labels: Vec<Label> =
                vars.iter().flat_map(|&v| t.var(v).labels.clone()).collect();
            let dim: usize = labels.iter().map(|&l| t.dim(l)).product();
            if ket_like {
                LabelledOperator::ket(
                    &t,
                    &labels,
                    &(0..dim)
                        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect::<Vec<_>>(),
                )
                .unwrap()
            } else {
                let m = ComplexMatrix::from_fn(dim, dim, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                LabelledOperator::operator_on(&t, &labels, m).unwrap()
            }
        };
        for _ in 0..25 {
            let f = rand_op(&[a, b], false);
            let g = rand_op(&[b], false);
            let h = rand_op(&[b, cvar], true);
            let lhs = f.compose(&g).unwrap().compose(&h).unwrap();
            let rhs = f.compose(&g.compose(&h).unwrap()).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-10));
        }
    }

    #[test]
    fn adjoint_antihomomorphism() {
        let mut t = VarTable::new();
        let a = t.declare("a", QType::Bool).unwrap();
        let b = t.declare("b", QType::Bool).unwrap();
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..25 {
            let la = t.var(a).labels.clone();
            let lb = t.var(b).labels.clone();
            let f = LabelledOperator::operator_on(
                &t,
                &la,
                ComplexMatrix::from_fn(2, 2, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            )
            .unwrap();
            let g = LabelledOperator::operator_on(
                &t,
                &[la[0], lb[0]],
                ComplexMatrix::from_fn(4, 4, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            )
            .unwrap();
            let lhs = f.compose(&g).unwrap().adjoint();
            let rhs = g.adjoint().compose(&f.adjoint()).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-11));
        }
    }

    #[test]
    fn cyl_extension_homomorphism() {
        let mut t = VarTable::new();
        let a = t.declare("a", QType::Bool).unwrap();
        let b = t.declare("b", QType::ZN(3)).unwrap();
        let s = LabelSet::from_slice(&t.var(a).labels);
        let big = s.union(&LabelSet::from_slice(&t.var(b).labels));
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..25 {
            let mk = |rng: &mut StdRng| {
                LabelledOperator::operator_on(
                    &t,
                    &t.var(a).labels,
                    ComplexMatrix::from_fn(2, 2, |_, _| {
                        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    }),
                )
                .unwrap()
            };
            let f = mk(&mut rng);
            let g = mk(&mut rng);
            let lhs = f
                .cyl_extend(&t, &big)
                .unwrap()
                .compose(&g.cyl_extend(&t, &big).unwrap())
                .unwrap();
            let rhs = f.compose(&g).unwrap().cyl_extend(&t, &big).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-11));
        }
    }
}
