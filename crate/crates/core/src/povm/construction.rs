//! Exact MPO constructions for sums of block-local terms.
//!
//! Two builders are provided. [`operator_valued_mpo`] follows the
//! operator-valued matrix form: every bond channel carries either "no block
//! started", "block finished", or the tuple of single-site operators still
//! to be applied; the first site of a block emits `Q` operators that absorb
//! the sum over its own operator index. [`PauliSum`] builds the same kind of
//! finite-state chain over Pauli strings, merging strings that share a
//! prefix.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};
use crate::tensor_net::pauli::{coefficients_of, SQRT_2};
use crate::tensor_net::{Mpo, Pauli};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Coefficients `c[a_1, ..., a_R]` (first index most significant) of one
/// block term `sum_a c[a] S^(a_1) x ... x S^(a_R)` starting at `start`.
#[derive(Clone, Debug)]
pub struct BlockTerm {
    pub start: usize,
    pub coeffs: Vec<C64>,
}

/// Channel layout of one bond: `done`, then pending operator tuples grouped
/// by remaining length, then `not started`.
struct Channels {
    done: Option<usize>,
    pending: BTreeMap<usize, usize>,
    not_started: Option<usize>,
    dim: usize,
}

impl Channels {
    /// Bond after site `cut` (`cut = -1` is the left boundary).
    fn new(cut: isize, n_sites: usize, r: usize, n_ops: usize) -> Self {
        let last_start = (n_sites - r) as isize;
        let mut dim = 0;
        let done = if cut >= r as isize - 1 {
            dim += 1;
            Some(0)
        } else {
            None
        };
        let mut pending = BTreeMap::new();
        for remaining in 1..r {
            let start = cut - (r - remaining) as isize + 1;
            if start >= 0 && start <= last_start {
                pending.insert(remaining, dim);
                dim += n_ops.pow(remaining as u32);
            }
        }
        let not_started = if cut < last_start {
            dim += 1;
            Some(dim - 1)
        } else {
            None
        };
        Channels {
            done,
            pending,
            not_started,
            dim,
        }
    }
}

/// Operator-valued construction of `sum_k sum_a c_k[a] S^(a_1) x ... x S^(a_R)`
/// acting on sites `k..k+R`.
///
/// The interior bond dimension is `2 + sum_{i=1}^{R-1} n^i` for `n`
/// single-site operators.
pub fn operator_valued_mpo(n_sites: usize, r: usize, ops: &[Array2<C64>], blocks: &[BlockTerm]) -> Result<Mpo> {
    if r == 0 || r > n_sites {
        return Err(TomoError::Parameter(format!("block length {r} invalid for {n_sites} sites")));
    }
    let n = ops.len();
    let width = n.pow(r as u32);
    let mut by_start: Vec<Option<&[C64]>> = vec![None; n_sites - r + 1];
    for b in blocks {
        if b.start > n_sites - r || b.coeffs.len() != width {
            return Err(TomoError::Dimension(format!(
                "block at {} with {} coefficients does not fit",
                b.start,
                b.coeffs.len()
            )));
        }
        if by_start[b.start].is_some() {
            return Err(TomoError::Parameter(format!("two terms start at site {}", b.start)));
        }
        by_start[b.start] = Some(&b.coeffs);
    }
    let op_coeffs: Vec<[C64; 4]> = ops.iter().map(coefficients_of).collect();
    let id = coefficients_of(&crate::linalg::identity(2));

    let mut sites = Vec::with_capacity(n_sites);
    for j in 0..n_sites {
        let left = Channels::new(j as isize - 1, n_sites, r, n);
        let right = Channels::new(j as isize, n_sites, r, n);
        let mut a = Array3::<C64>::zeros((left.dim, 4, right.dim));
        let mut put = |l: usize, c: &[C64; 4], w: C64, rr: usize| {
            for al in 0..4 {
                a[[l, al, rr]] += w * c[al];
            }
        };
        if let (Some(l), Some(rr)) = (left.not_started, right.not_started) {
            put(l, &id, C64::new(1.0, 0.0), rr);
        }
        if let (Some(l), Some(rr)) = (left.done, right.done) {
            put(l, &id, C64::new(1.0, 0.0), rr);
        }
        // A block starting here: emit Q operators.
        if let (Some(l), Some(c)) = (left.not_started, by_start.get(j).copied().flatten()) {
            let tail = width / n;
            if r == 1 {
                let rr = right.done.expect("single-site blocks finish on this bond");
                for (a1, oc) in op_coeffs.iter().enumerate() {
                    put(l, oc, c[a1], rr);
                }
            } else {
                let off = right.pending[&(r - 1)];
                for t in 0..tail {
                    for (a1, oc) in op_coeffs.iter().enumerate() {
                        let w = c[a1 * tail + t];
                        if w != ZERO {
                            put(l, oc, w, off + t);
                        }
                    }
                }
            }
        }
        // Continue or finish pending tuples.
        for (&remaining, &off) in &left.pending {
            let count = n.pow(remaining as u32);
            let tail = count / n;
            for t in 0..count {
                let head = t / tail;
                let rest = t % tail;
                let target = if remaining == 1 {
                    right.done.expect("finished block reaches done")
                } else {
                    right.pending[&(remaining - 1)] + rest
                };
                put(off + t, &op_coeffs[head], C64::new(1.0, 0.0), target);
            }
        }
        sites.push(a);
    }
    Mpo::pauli(sites)
}

/// Sum of Pauli strings on a chain, built as a prefix-sharing finite-state
/// MPO. Coefficients refer to unnormalized Pauli matrices.
#[derive(Clone, Debug, Default)]
pub struct PauliSum {
    n_sites: usize,
    constant: C64,
    /// `(first non-identity site, letters up to the last non-identity)`.
    terms: BTreeMap<(usize, Vec<Pauli>), C64>,
}

impl PauliSum {
    pub fn new(n_sites: usize) -> Self {
        PauliSum {
            n_sites,
            constant: ZERO,
            terms: BTreeMap::new(),
        }
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len() + usize::from(self.constant != ZERO)
    }

    pub fn add_constant(&mut self, c: C64) {
        self.constant += c;
    }

    /// Adds `c * word` with `word[0]` acting on site `start`.
    pub fn add_string(&mut self, start: usize, word: &[Pauli], c: C64) -> Result<()> {
        if start + word.len() > self.n_sites {
            return Err(TomoError::Dimension(format!(
                "string of length {} at {start} exceeds {} sites",
                word.len(),
                self.n_sites
            )));
        }
        if c == ZERO {
            return Ok(());
        }
        let first = word.iter().position(|&p| p != Pauli::I);
        let last = word.iter().rposition(|&p| p != Pauli::I);
        match (first, last) {
            (Some(f), Some(l)) => {
                *self.terms.entry((start + f, word[f..=l].to_vec())).or_insert(ZERO) += c;
            }
            _ => self.constant += c,
        }
        Ok(())
    }

    /// Adds a dense block `sum_a c[a] sigma_{a_1} x ... x sigma_{a_len}` with
    /// Pauli indices in `I, X, Y, Z` order, first site most significant.
    pub fn add_block(&mut self, start: usize, len: usize, coeffs: &[C64]) -> Result<()> {
        if coeffs.len() != 4usize.pow(len as u32) {
            return Err(TomoError::Dimension("block coefficient count must be 4^len".into()));
        }
        for (idx, &c) in coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let word: Vec<Pauli> = (0..len)
                .map(|i| Pauli::from_index((idx >> (2 * (len - 1 - i))) & 3))
                .collect();
            self.add_string(start, &word, c)?;
        }
        Ok(())
    }

    pub fn to_mpo(&self) -> Result<Mpo> {
        let n = self.n_sites;
        if n == 0 {
            return Err(TomoError::Dimension("no sites".into()));
        }
        // Prefix channels on the bond after each site.
        let mut partial: Vec<BTreeMap<(usize, Vec<Pauli>), usize>> = vec![BTreeMap::new(); n];
        for (start, word) in self.terms.keys() {
            for len in 1..word.len() {
                let cut = start + len - 1;
                let next = partial[cut].len();
                partial[cut].entry((*start, word[..len].to_vec())).or_insert(next);
            }
        }
        // Layout per bond: [not started, partials..., done].
        let dim = |cut: isize| -> usize {
            if cut < 0 || cut as usize == n - 1 {
                1
            } else {
                partial[cut as usize].len() + 2
            }
        };
        let s2 = C64::new(SQRT_2, 0.0);
        let mut sites = Vec::with_capacity(n);
        for j in 0..n {
            let (dl, dr) = (dim(j as isize - 1), dim(j as isize));
            let ns_l = Some(0);
            let done_l = if j == 0 { None } else { Some(dl - 1) };
            let ns_r = if j == n - 1 { None } else { Some(0) };
            let done_r = dr - 1;
            let mut a = Array3::<C64>::zeros((dl, 4, dr));
            if let (Some(l), Some(r)) = (ns_l, ns_r) {
                a[[l, 0, r]] += s2;
            }
            if let Some(l) = done_l {
                a[[l, 0, done_r]] += s2;
            }
            if j == 0 {
                a[[0, 0, done_r]] += self.constant * s2;
            }
            // Terms of length one at this site.
            for ((start, word), &c) in self.terms.range((j, Vec::new())..(j + 1, Vec::new())) {
                debug_assert_eq!(*start, j);
                if word.len() == 1 {
                    a[[0, word[0].index(), done_r]] += c * s2;
                }
            }
            // Open a new prefix.
            if j + 1 < n {
                for ((start, word), &idx) in &partial[j] {
                    if *start == j && word.len() == 1 {
                        a[[0, word[0].index(), 1 + idx]] += s2;
                    }
                }
            }
            // Extend or close prefixes from the left bond.
            if j > 0 {
                for ((start, prefix), &li) in &partial[j - 1] {
                    for p in Pauli::ALL {
                        let mut w = prefix.clone();
                        w.push(p);
                        if j + 1 < n {
                            if let Some(&ri) = partial[j].get(&(*start, w.clone())) {
                                a[[1 + li, p.index(), 1 + ri]] += s2;
                            }
                        }
                        if let Some(&c) = self.terms.get(&(*start, w)) {
                            a[[1 + li, p.index(), done_r]] += c * s2;
                        }
                    }
                }
            }
            sites.push(a);
        }
        Mpo::pauli(sites)
    }
}
