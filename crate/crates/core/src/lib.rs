//! Core library for `qwv`: the qwhile quantum programming language with
//! typed variables, labelled Dirac notation, denotational super-operator
//! semantics, weakest preconditions and a quantum Hoare logic checker.
//!
//! Modules mirror the layers of the tool:
//!
//! * [`linalg`] — dense complex matrices, Hermitian eigendecomposition,
//!   Kronecker products, partial traces, the Löwner order.
//! * [`group`] — finite abelian groups, characters, subgroups and cosets.
//! * [`qtypes`] — finite data types for quantum variables and the built-in
//!   gate/oracle library.
//! * [`dirac`] — labelled Dirac notation: kets, bras and operators tagged
//!   with the subsystems they live on, with automatic lifting.
//! * [`qwhile`] — the qwhile AST, typing checks and the concrete-syntax
//!   parser.
//! * [`semantics`] — programs compiled to super-operators over their
//!   footprint.
//! * [`hoare`] — judgment validity via wp/wlp, the rule-application proof
//!   checker and the randomized soundness harness.
//! * [`casestudies`] — the built-in example algorithms with their
//!   correctness triples.


pub mod casestudies;
pub mod config;
pub mod dirac;
pub mod group;
pub mod hoare;

pub mod linalg;
pub mod qtypes;
pub mod qwhile;
pub mod semantics;



pub use config::Config;
pub use linalg::{ComplexMatrix, Scalar};
