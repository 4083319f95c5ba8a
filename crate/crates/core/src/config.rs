//! Numeric tolerances and limits shared by the checker layers.

/// Tolerances and resource limits. All comparisons in the library take their
/// thresholds from here so that a single override changes the whole stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    /// Relative Frobenius tolerance for operator equality.
    pub eq_tol: f64,
    /// Tolerance for positive-semidefiniteness (minimum eigenvalue bound).
    pub psd_tol: f64,
    /// Convergence threshold for while-loop partial sums.
    pub while_tol: f64,
    /// Maximum number of loop unrollings before giving up.
    pub while_kmax: u64,
    /// Largest Hilbert-space dimension the semantics will materialize.
    pub max_dim: usize,
    /// Seed for randomized harnesses.
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            eq_tol: 1e-9,
            psd_tol: 1e-9,
            while_tol: 1e-10,
            while_kmax: 100_000,
            max_dim: 256,
            seed: 0x5eed,
        }
    }
}
