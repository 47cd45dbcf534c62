//! The normalized single-qubit Pauli basis `{1, X, Y, Z} / sqrt(2)` and the
//! tables that describe how basis elements multiply and act on kets.

use std::sync::OnceLock;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Per-site operator basis of an MPO. Only the normalized Pauli basis is
/// implemented; the tag travels with every MPO so mismatches are caught.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorBasis {
    #[serde(rename = "pauli")]
    NormalizedPauli,
}

impl OperatorBasis {
    pub fn id(&self) -> &'static str {
        match self {
            OperatorBasis::NormalizedPauli => "pauli",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        match s {
            "pauli" => Some(OperatorBasis::NormalizedPauli),
            _ => None,
        }
    }
}

pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Index of a Pauli operator within the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_index(i: usize) -> Pauli {
        Self::ALL[i]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        ['I', 'X', 'Y', 'Z'][self as usize]
    }

    /// Unnormalized Pauli matrix.
    pub fn matrix(self) -> Array2<C64> {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => array![[l, o], [o, l]],
            Pauli::X => array![[o, l], [l, o]],
            Pauli::Y => array![[o, -i], [i, o]],
            Pauli::Z => array![[l, o], [o, -l]],
        }
    }

    /// Product `self * other = phase * result` of unnormalized Paulis.
    pub fn product(self, other: Pauli) -> (C64, Pauli) {
        use Pauli::*;
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (a, b) if a == b => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

/// Basis element `P^(alpha)` as a dense 2x2 matrix.
pub fn basis_matrix(alpha: usize) -> Array2<C64> {
    Pauli::from_index(alpha).matrix().mapv(|z| z * FRAC_1_SQRT_2)
}

/// `tr[P^(alpha) m]` for every basis element: the basis coefficients of the
/// (Hermitian-orthonormal) expansion of `m`.
pub fn coefficients_of(m: &Array2<C64>) -> [C64; 4] {
    let mut out = [C64::new(0.0, 0.0); 4];
    for (alpha, o) in out.iter_mut().enumerate() {
        let p = basis_matrix(alpha);
        *o = (&p * &m.t()).sum();
    }
    out
}

/// One nonzero entry of a physical-index combination table: combining
/// left index `left` with right index `right` contributes `coeff` to output
/// index `out`.
#[derive(Clone, Copy, Debug)]
pub struct CombineEntry {
    pub left: usize,
    pub right: usize,
    pub out: usize,
    pub coeff: C64,
}

/// Sparse table describing how the physical indices of two stacked layers
/// merge into the physical index of their product.
#[derive(Clone, Debug)]
pub struct CombineRule {
    pub left_dim: usize,
    pub right_dim: usize,
    pub out_dim: usize,
    pub entries: Vec<CombineEntry>,
    /// `by_pair[left * right_dim + right]` lists the entries for that pair.
    by_pair: Vec<Vec<(usize, C64)>>,
}

impl CombineRule {
    pub fn new(left_dim: usize, right_dim: usize, out_dim: usize, entries: Vec<CombineEntry>) -> Self {
        let mut by_pair = vec![Vec::new(); left_dim * right_dim];
        for e in &entries {
            by_pair[e.left * right_dim + e.right].push((e.out, e.coeff));
        }
        CombineRule {
            left_dim,
            right_dim,
            out_dim,
            entries,
            by_pair,
        }
    }

    pub fn targets(&self, left: usize, right: usize) -> &[(usize, C64)] {
        &self.by_pair[left * self.right_dim + right]
    }

    /// `P^(a) P^(b) = sum_g c[a,b,g] P^(g)` with
    /// `c[a,b,g] = tr[(P^(g))^dagger P^(a) P^(b)]`: MPO times MPO.
    pub fn pauli_product() -> &'static CombineRule {
        static RULE: OnceLock<CombineRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let mut entries = Vec::with_capacity(16);
            for a in Pauli::ALL {
                for b in Pauli::ALL {
                    let (phase, g) = a.product(b);
                    entries.push(CombineEntry {
                        left: a.index(),
                        right: b.index(),
                        out: g.index(),
                        coeff: phase * FRAC_1_SQRT_2,
                    });
                }
            }
            CombineRule::new(4, 4, 4, entries)
        })
    }

    /// `(sum_a W[a] P^(a)) |t>` expands to `sum_s (P^(a))_{s t} |s>`: an MPO
    /// acting on a ket.
    pub fn pauli_action() -> &'static CombineRule {
        static RULE: OnceLock<CombineRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let mut entries = Vec::new();
            for a in 0..4 {
                let p = basis_matrix(a);
                for t in 0..2 {
                    for s in 0..2 {
                        let v = p[[s, t]];
                        if v.norm() > 0.0 {
                            entries.push(CombineEntry {
                                left: a,
                                right: t,
                                out: s,
                                coeff: v,
                            });
                        }
                    }
                }
            }
            CombineRule::new(4, 2, 2, entries)
        })
    }
}

/// Dense structure-constant table `c[a][b][g] = tr[(P^(g))^dagger P^(a) P^(b)]`.
pub fn structure_constants() -> &'static [[[C64; 4]; 4]; 4] {
    static TABLE: OnceLock<[[[C64; 4]; 4]; 4]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[[C64::new(0.0, 0.0); 4]; 4]; 4];
        for (a, ta) in t.iter_mut().enumerate() {
            for (b, tab) in ta.iter_mut().enumerate() {
                let prod = basis_matrix(a).dot(&basis_matrix(b));
                for (g, v) in tab.iter_mut().enumerate() {
                    let pg = basis_matrix(g);
                    *v = (0..2)
                        .flat_map(|i| (0..2).map(move |j| (i, j)))
                        .map(|(i, j)| pg[[j, i]].conj() * prod[[j, i]])
                        .sum();
                }
            }
        }
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        for a in 0..4 {
            for b in 0..4 {
                let pa = basis_matrix(a);
                let pb = basis_matrix(b);
                let ip: C64 = pa.t().mapv(|z| z.conj()).dot(&pb).diag().sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn product_rule_matches_dense_structure_constants() {
        let dense = structure_constants();
        let rule = CombineRule::pauli_product();
        for a in 0..4 {
            for b in 0..4 {
                let mut row = [C64::new(0.0, 0.0); 4];
                for &(g, c) in rule.targets(a, b) {
                    row[g] += c;
                }
                for g in 0..4 {
                    assert!((row[g] - dense[a][b][g]).norm() < 1e-15, "{a}{b}{g}");
                }
            }
        }
    }

    #[test]
    fn structure_constants_reproduce_products() {
        let c = structure_constants();
        for a in 0..4 {
            for b in 0..4 {
                let prod = basis_matrix(a).dot(&basis_matrix(b));
                let mut rebuilt = Array2::<C64>::zeros((2, 2));
                for g in 0..4 {
                    rebuilt = rebuilt + basis_matrix(g).mapv(|z| z * c[a][b][g]);
                }
                assert!(crate::linalg::max_abs_diff(prod.view(), rebuilt.view()) < 1e-15);
            }
        }
    }

    #[test]
    fn coefficients_invert_expansion() {
        let m = Pauli::Y.matrix().mapv(|z| z * 0.3) + Pauli::Z.matrix();
        let co = coefficients_of(&m);
        let mut rebuilt = Array2::<C64>::zeros((2, 2));
        for (a, c) in co.iter().enumerate() {
            rebuilt = rebuilt + basis_matrix(a).mapv(|z| z * c);
        }
        assert!(crate::linalg::max_abs_diff(m.view(), rebuilt.view()) < 1e-15);
    }
}
