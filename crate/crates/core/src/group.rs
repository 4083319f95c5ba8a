//! Finite abelian groups as products of cyclic groups, their characters,
//! subgroups, cosets and orthogonal subgroups.
//!
//! Elements are flat indices into the mixed-radix encoding of the component
//! tuple, with the leftmost component most significant. This matches the
//! basis encoding of composite quantum variables, so `|g>` for `g` in the
//! group is directly the `g`-th computational basis vector.

use crate::linalg::Scalar;
use std::f64::consts::TAU;

/// Product of cyclic groups `Z_{p_0} x ... x Z_{p_{k-1}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianGroup {
    moduli: Vec<usize>,
}

impl AbelianGroup {
    /// Panics if some modulus is zero.
    pub fn new(moduli: Vec<usize>) -> Self {
        assert!(moduli.iter().all(|&p| p >= 1), "moduli must be >= 1");
        AbelianGroup { moduli }
    }

    pub fn moduli(&self) -> &[usize] {
        &self.moduli
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().product()
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> {
        0..self.order()
    }

    /// Flat index -> component tuple.
    pub fn decode(&self, mut g: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.moduli.len()];
        for i in (0..self.moduli.len()).rev() {
            out[i] = g % self.moduli[i];
            g /= self.moduli[i];
        }
        out
    }

    /// Component tuple -> flat index.
    pub fn encode(&self, tuple: &[usize]) -> usize {
        assert_eq!(tuple.len(), self.moduli.len());
        tuple
            .iter()
            .zip(&self.moduli)
            .fold(0usize, |acc, (&t, &p)| acc * p + (t % p))
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (ta, tb) = (self.decode(a), self.decode(b));
        let sum: Vec<usize> =
            ta.iter().zip(&tb).zip(&self.moduli).map(|((&x, &y), &p)| (x + y) % p).collect();
        self.encode(&sum)
    }

    pub fn neg(&self, a: usize) -> usize {
        let t = self.decode(a);
        let n: Vec<usize> = t.iter().zip(&self.moduli).map(|(&x, &p)| (p - x) % p).collect();
        self.encode(&n)
    }

    /// Character value `chi_g(h) = prod_m exp(2 pi i g_m h_m / p_m)`.
    pub fn character(&self, g: usize, h: usize) -> Scalar {
        let (tg, th) = (self.decode(g), self.decode(h));
        let mut angle = 0.0;
        for ((&gm, &hm), &pm) in tg.iter().zip(&th).zip(&self.moduli) {
            angle += TAU * (gm as f64) * (hm as f64) / (pm as f64);
        }
        Scalar::from_polar(1.0, angle)
    }

    /// Smallest subgroup containing the generators, by closure to fixpoint.
    pub fn generate(&self, generators: &[usize]) -> Subgroup {
        let mut members = vec![false; self.order()];
        members[0] = true;
        let mut frontier = vec![0usize];
        while let Some(x) = frontier.pop() {
            for &g in generators {
                let y = self.add(x, g);
                if !members[y] {
                    members[y] = true;
                    frontier.push(y);
                }
            }
        }
        let elements = members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        Subgroup { parent: self.clone(), elements }
    }

    /// The trivial subgroup `{0}`.
    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup { parent: self.clone(), elements: vec![0] }
    }

    /// The whole group as a subgroup of itself.
    pub fn full_subgroup(&self) -> Subgroup {
        Subgroup { parent: self.clone(), elements: self.elements().collect() }
    }

    /// Every subgroup, found by breadth-first closure over the lattice.
    /// Intended for small groups (exhaustive identity tests).
    pub fn all_subgroups(&self) -> Vec<Subgroup> {
        let mut seen: Vec<Vec<usize>> = vec![vec![0]];
        let mut queue: Vec<Vec<usize>> = vec![vec![0]];
        while let Some(h) = queue.pop() {
            for g in self.elements() {
                if h.binary_search(&g).is_ok() {
                    continue;
                }
                let mut gens = h.clone();
                gens.push(g);
                let bigger = self.generate(&gens).elements;
                if !seen.contains(&bigger) {
                    seen.push(bigger.clone());
                    queue.push(bigger);
                }
            }
        }
        seen.sort();
        seen.into_iter().map(|elements| Subgroup { parent: self.clone(), elements }).collect()
    }
}

/// Subgroup stored as an explicit sorted element list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    parent: AbelianGroup,
    elements: Vec<usize>,
}

impl Subgroup {
    pub fn parent(&self) -> &AbelianGroup {
        &self.parent
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.elements.binary_search(&g).is_ok()
    }

    /// `H^perp = { g | chi_g(h) = 1 for all h in H }`.
    pub fn orthogonal_subgroup(&self) -> Subgroup {
        let g = &self.parent;
        let elements = g
            .elements()
            .filter(|&x| {
                self.elements.iter().all(|&h| (g.character(x, h) - Scalar::ONE).norm() < 1e-9)
            })
            .collect();
        Subgroup { parent: g.clone(), elements }
    }

    /// Partition of the parent group into cosets of this subgroup. Cosets
    /// are sorted element lists, ordered by their representative; the
    /// representative is the element of minimal flat index.
    pub fn cosets(&self) -> Vec<Vec<usize>> {
        let g = &self.parent;
        let mut assigned = vec![false; g.order()];
        let mut out = Vec::new();
        for r in g.elements() {
            if assigned[r] {
                continue;
            }
            let mut coset: Vec<usize> = self.elements.iter().map(|&h| g.add(r, h)).collect();
            coset.sort_unstable();
            for &x in &coset {
                assigned[x] = true;
            }
            out.push(coset);
        }
        out
    }

    /// Deterministic coset representative: the minimal flat index.
    pub fn repr(coset: &[usize]) -> usize {
        *coset.iter().min().expect("empty coset")
    }
}
