//! The qwhile language: deeply embedded AST over a declared variable table,
//! typing checks, for-loop desugaring, footprint computation and loop
//! approximation. The concrete-syntax parser lives in [`parse`].

pub mod parse;

use crate::dirac::{DiracError, LabelSet, LabelledOperator, VarId, VarTable};
use crate::linalg::LinalgError;
use crate::qtypes::GateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QwhileError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("disjointness violation: {0}")]
    Disjointness(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("not a while loop")]
    NotAWhile,
    #[error(transparent)]
    Dirac(#[from] DiracError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, QwhileError>;

const MEAS_TOL: f64 = 1e-9;

/// How a measurement was introduced; drives pretty-printing.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasKind {
    /// Computational basis measurement of the listed variables.
    Basis(Vec<VarId>),
    /// Arbitrary user-supplied measurement with a display name.
    General(String),
}

/// A quantum measurement: operators indexed by outcome, square on a common
/// label set, complete (`sum_m M_m^dag M_m = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    labels: LabelSet,
    operators: Vec<LabelledOperator>,
    kind: MeasKind,
}

impl Measurement {
    pub fn new(table: &VarTable, operators: Vec<LabelledOperator>, kind: MeasKind) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| QwhileError::Type("measurement with no outcomes".into()))?;
        if !first.is_square_on() {
            return Err(QwhileError::Type("measurement operator is not square".into()));
        }
        let labels = first.out_labels().clone();
        let mut sum = LabelledOperator::zero(table, &labels, &labels);
        for m in &operators {
            if m.out_labels() != &labels || m.in_labels() != &labels {
                return Err(QwhileError::Type(
                    "measurement operators live on different label sets".into(),
                ));
            }
            sum = sum.add(&m.adjoint().compose(m)?)?;
        }
        let id = LabelledOperator::identity(table, &labels);
        if !sum.approx_eq(&id, MEAS_TOL) {
            return Err(QwhileError::Type("measurement is not complete".into()));
        }
        Ok(Measurement { labels, operators, kind })
    }

    /// Computational basis measurement of a variable list: one projector
    /// `|t><t|` per joint basis value, outcome order following the listed
    /// variable order.
    pub fn basis(table: &VarTable, vars: &[VarId]) -> Result<Self> {
        let ordered = table.labels_of_vars(vars);
        let set = LabelSet::from_slice(&ordered);
        if set.len() != ordered.len() {
            return Err(QwhileError::Disjointness("repeated variable in measurement".into()));
        }
        let dim = table.dim_of(&set);
        let mut operators = Vec::with_capacity(dim);
        for t in 0..dim {
            let ket = LabelledOperator::basis_ket(table, &ordered, t)?;
            operators.push(ket.outer_with_self()?);
        }
        Self::new(table, operators, MeasKind::Basis(vars.to_vec()))
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn operators(&self) -> &[LabelledOperator] {
        &self.operators
    }

    pub fn outcome_count(&self) -> usize {
        self.operators.len()
    }

    pub fn kind(&self) -> &MeasKind {
        &self.kind
    }
}

/// qwhile abstract syntax. `Unitary` and `Init` keep a display string (the
/// surface form that produced them) for pretty-printing; it takes part in
/// structural equality only trivially, since equal programs print equally.
#[derive(Debug, Clone, PartialEq)]
pub enum Program {
    Abort,
    Skip,
    Seq(Box<Program>, Box<Program>),
    Init { vars: Vec<VarId>, state: LabelledOperator, display: String },
    Unitary { vars: Vec<VarId>, op: LabelledOperator, display: String },
    Cond { meas: Measurement, branches: Vec<Program> },
    While { meas: Measurement, continue_on: bool, body: Box<Program> },
}

fn check_vars_disjoint(table: &VarTable, vars: &[VarId]) -> Result<LabelSet> {
    let ordered = table.labels_of_vars(vars);
    let set = LabelSet::from_slice(&ordered);
    if set.len() != ordered.len() {
        return Err(QwhileError::Disjointness(
            "variable list mentions overlapping storage".into(),
        ));
    }
    Ok(set)
}

impl Program {
    /// `x := |t>` style initialization to a pure basis state.
    pub fn init_basis(table: &VarTable, vars: &[VarId], value: usize) -> Result<Self> {
        check_vars_disjoint(table, vars)?;
        let ordered = table.labels_of_vars(vars);
        let ket = LabelledOperator::basis_ket(table, &ordered, value)?;
        let state = ket.outer_with_self()?;
        Ok(Program::Init { vars: vars.to_vec(), state, display: format!("|{value}>") })
    }

    /// Initialization to an arbitrary pure state.
    pub fn init_state(table: &VarTable, vars: &[VarId], ket: &LabelledOperator) -> Result<Self> {
        let set = check_vars_disjoint(table, vars)?;
        if ket.out_labels() != &set || !ket.in_labels().is_empty() {
            return Err(QwhileError::Type("state does not live on the initialized variables".into()));
        }
        if (ket.norm() - 1.0).abs() > MEAS_TOL {
            return Err(QwhileError::Type("initialization state is not normalized".into()));
        }
        let state = ket.outer_with_self()?;
        Ok(Program::Init { vars: vars.to_vec(), state, display: "state(...)".into() })
    }

    /// Initialization to an arbitrary density operator.
    pub fn init_density(
        table: &VarTable,
        vars: &[VarId],
        state: LabelledOperator,
    ) -> Result<Self> {
        let set = check_vars_disjoint(table, vars)?;
        if state.out_labels() != &set || !state.is_square_on() {
            return Err(QwhileError::Type("density does not live on the initialized variables".into()));
        }
        if !state.matrix().is_density(MEAS_TOL)? {
            return Err(QwhileError::Type("initialization state is not a density operator".into()));
        }
        Ok(Program::Init { vars: vars.to_vec(), state, display: "state(...)".into() })
    }

    /// `x := U[x]` with the matrix written in the basis of the listed
    /// variable order.
    pub fn unitary(
        table: &VarTable,
        vars: &[VarId],
        matrix: crate::linalg::ComplexMatrix,
        display: impl Into<String>,
    ) -> Result<Self> {
        check_vars_disjoint(table, vars)?;
        if !matrix.is_unitary(MEAS_TOL) {
            return Err(QwhileError::Type("operator is not unitary".into()));
        }
        let ordered = table.labels_of_vars(vars);
        let op = LabelledOperator::operator_on(table, &ordered, matrix)?;
        Ok(Program::Unitary { vars: vars.to_vec(), op, display: display.into() })
    }

    pub fn cond(meas: Measurement, branches: Vec<Program>) -> Result<Self> {
        if branches.len() != meas.outcome_count() {
            return Err(QwhileError::Type(format!(
                "conditional needs {} branches, got {}",
                meas.outcome_count(),
                branches.len()
            )));
        }
        Ok(Program::Cond { meas, branches })
    }

    pub fn while_loop(meas: Measurement, continue_on: bool, body: Program) -> Result<Self> {
        if meas.outcome_count() != 2 {
            return Err(QwhileError::Type("while guard must be a two-outcome measurement".into()));
        }
        Ok(Program::While { meas, continue_on, body: Box::new(body) })
    }

    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of instantiated bodies; the empty sequence is
    /// `skip`.
    pub fn desugar_for(items: Vec<Program>) -> Program {
        let mut iter = items.into_iter().rev();
        match iter.next() {
            None => Program::Skip,
            Some(last) => iter.fold(last, |acc, p| Program::seq(p, acc)),
        }
    }

    /// Union of all labels the program mentions.
    pub fn footprint(&self) -> LabelSet {
        match self {
            Program::Abort | Program::Skip => LabelSet::empty(),
            Program::Seq(a, b) => a.footprint().union(&b.footprint()),
            Program::Init { state, .. } => state.out_labels().clone(),
            Program::Unitary { op, .. } => op.out_labels().clone(),
            Program::Cond { meas, branches } => branches
                .iter()
                .fold(meas.labels().clone(), |acc, b| acc.union(&b.footprint())),
            Program::While { meas, body, .. } => meas.labels().union(&body.footprint()),
        }
    }

    pub fn has_while(&self) -> bool {
        match self {
            Program::Abort | Program::Skip | Program::Init { .. } | Program::Unitary { .. } => {
                false
            }
            Program::Seq(a, b) => a.has_while() || b.has_while(),
            Program::Cond { branches, .. } => branches.iter().any(|b| b.has_while()),
            Program::While { .. } => true,
        }
    }

    /// k-th syntactic approximation of a while loop: depth 0 is `abort`,
    /// depth k+1 measures once, exiting into `skip` and continuing into
    /// `body; approx(k)`.
    pub fn approximate_while(&self, k: usize) -> Result<Program> {
        let (meas, continue_on, body) = match self {
            Program::While { meas, continue_on, body } => (meas, *continue_on, body),
            _ => return Err(QwhileError::NotAWhile),
        };
        let mut approx = Program::Abort;
        for _ in 0..k {
            let continue_branch = Program::seq((**body).clone(), approx);
            let exit_idx = usize::from(!continue_on);
            let mut branches = vec![Program::Skip, Program::Skip];
            branches[1 - exit_idx] = continue_branch;
            branches[exit_idx] = Program::Skip;
            approx = Program::Cond { meas: meas.clone(), branches };
        }
        Ok(approx)
    }

    /// Flattens top-level sequencing into a statement list.
    pub fn statements(&self) -> Vec<&Program> {
        match self {
            Program::Seq(a, b) => {
                let mut v = a.statements();
                v.extend(b.statements());
                v
            }
            other => vec![other],
        }
    }

    /// Source-like rendering; inverse of the parser on parser-produced
    /// trees.
    pub fn pretty(&self, table: &VarTable) -> String {
        let mut out = String::new();
        self.pretty_into(table, 0, &mut out);
        out
    }

    fn pretty_into(&self, table: &VarTable, indent: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        match self {
            Program::Abort => out.push_str(&format!("{pad}abort;\n")),
            Program::Skip => out.push_str(&format!("{pad}skip;\n")),
            Program::Seq(a, b) => {
                a.pretty_into(table, indent, out);
                b.pretty_into(table, indent, out);
            }
            Program::Init { vars, display, .. } => {
                out.push_str(&format!("{pad}{} := {display};\n", var_list(table, vars)));
            }
            Program::Unitary { vars, display, .. } => {
                out.push_str(&format!(
                    "{pad}{} := {display}[{}];\n",
                    var_list(table, vars),
                    var_names(table, vars)
                ));
            }
            Program::Cond { meas, branches } => {
                let target = match meas.kind() {
                    MeasKind::Basis(vars) => var_names(table, vars),
                    MeasKind::General(name) => name.clone(),
                };
                out.push_str(&format!("{pad}if meas [{target}] {{\n"));
                for (t, b) in branches.iter().enumerate() {
                    out.push_str(&format!("{pad}    {t} -> {{\n"));
                    b.pretty_into(table, indent + 2, out);
                    out.push_str(&format!("{pad}    }}\n"));
                }
                out.push_str(&format!("{pad}}}\n"));
            }
            Program::While { meas, continue_on, body } => {
                let target = match meas.kind() {
                    MeasKind::Basis(vars) => var_names(table, vars),
                    MeasKind::General(name) => name.clone(),
                };
                out.push_str(&format!(
                    "{pad}while meas [{target}] = {} {{\n",
                    usize::from(*continue_on)
                ));
                body.pretty_into(table, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn var_names(table: &VarTable, vars: &[VarId]) -> String {
    vars.iter().map(|&v| table.var(v).name.clone()).collect::<Vec<_>>().join(", ")
}

fn var_list(table: &VarTable, vars: &[VarId]) -> String {
    if vars.len() == 1 {
        table.var(vars[0]).name.clone()
    } else {
        format!("[{}]", var_names(table, vars))
    }
}
