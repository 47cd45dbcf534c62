//! Lazy products of chains and the environment contractions used by the
//! variational compression sweeps.
//!
//! A [`Product`] stacks several chains that share site positions, e.g.
//! `R · rho · R` or `W |psi>`, without ever forming the product's bond
//! space. Environments carry one bra bond plus one bond per layer.

use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64 as C64;

use super::chain::{self, Site};
use super::pauli::CombineRule;
use crate::error::{Result, TomoError};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// How a newly absorbed layer merges with the accumulated physical index.
#[derive(Clone, Copy, Debug)]
pub struct Join {
    pub rule: &'static CombineRule,
    /// The new layer is the left operand of `rule`.
    pub new_is_left: bool,
}

/// Layers in absorption order plus the joins between consecutive ones.
#[derive(Clone, Debug)]
pub struct Product {
    layers: Vec<Vec<Site>>,
    joins: Vec<Join>,
}

impl Product {
    pub fn single(sites: Vec<Site>) -> Self {
        Product {
            layers: vec![sites],
            joins: Vec::new(),
        }
    }

    /// `a · b` in the Pauli product rule.
    pub fn operator_product(a: Vec<Site>, b: Vec<Site>) -> Self {
        Product {
            layers: vec![a, b],
            joins: vec![Join {
                rule: CombineRule::pauli_product(),
                new_is_left: false,
            }],
        }
    }

    /// `r · rho · r`, absorbing `rho` first since it is usually the widest
    /// layer.
    pub fn sandwich(r: Vec<Site>, rho: Vec<Site>) -> Self {
        let rule = CombineRule::pauli_product();
        Product {
            layers: vec![rho, r.clone(), r],
            joins: vec![
                Join {
                    rule,
                    new_is_left: true,
                },
                Join {
                    rule,
                    new_is_left: false,
                },
            ],
        }
    }

    /// Operator `w` (Pauli coefficients) applied to the ket `psi`.
    pub fn action(w: Vec<Site>, psi: Vec<Site>) -> Self {
        Product {
            layers: vec![psi, w],
            joins: vec![Join {
                rule: CombineRule::pauli_action(),
                new_is_left: true,
            }],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.layers[0].len()
    }

    pub fn layers(&self) -> &[Vec<Site>] {
        &self.layers
    }

    /// Physical dimension of the product.
    pub fn phys_dim(&self) -> usize {
        match self.joins.last() {
            Some(j) => j.rule.out_dim,
            None => self.layers[0][0].dim().1,
        }
    }

    /// Bond dimension the explicit product would have at each cut.
    pub fn explicit_bonds(&self) -> Vec<usize> {
        let n = self.n_sites();
        (0..=n)
            .map(|c| {
                self.layers
                    .iter()
                    .map(|l| if c == n { l[n - 1].dim().2 } else { l[c].dim().0 })
                    .product()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        for l in &self.layers {
            if l.len() != n {
                return Err(TomoError::Dimension("layers differ in site count".into()));
            }
            chain::validate(l)?;
        }
        let mut phys = self.layers[0][0].dim().1;
        for (j, l) in self.joins.iter().zip(&self.layers[1..]) {
            let p = l[0].dim().1;
            let (want_new, want_acc) = if j.new_is_left {
                (j.rule.left_dim, j.rule.right_dim)
            } else {
                (j.rule.right_dim, j.rule.left_dim)
            };
            if p != want_new || phys != want_acc {
                return Err(TomoError::Dimension("layer physical dimension does not fit its join".into()));
            }
            phys = j.rule.out_dim;
        }
        Ok(())
    }

    /// The same product seen from the right end of the chain.
    pub fn reversed(&self) -> Product {
        Product {
            layers: self.layers.iter().map(|l| chain::reversed(l)).collect(),
            joins: self.joins.clone(),
        }
    }

    /// Forms the product explicitly; bond dimensions multiply.
    pub fn materialize(&self) -> Vec<Site> {
        let n = self.n_sites();
        (0..n)
            .map(|k| {
                let mut acc = self.layers[0][k].clone();
                for (j, l) in self.joins.iter().zip(&self.layers[1..]) {
                    acc = merge_sites(&acc, &l[k], j);
                }
                acc
            })
            .collect()
    }
}

/// Site-wise product of two layers; the accumulated bond is the slow index.
fn merge_sites(acc: &Site, new: &Site, join: &Join) -> Site {
    let (al, ap, ar) = acc.dim();
    let (bl, _, br) = new.dim();
    let mut out = Array3::<C64>::zeros((al * bl, join.rule.out_dim, ar * br));
    for e in &join.rule.entries {
        let (f, psi) = if join.new_is_left { (e.right, e.left) } else { (e.left, e.right) };
        if f >= ap {
            continue;
        }
        for i in 0..al {
            for j in 0..ar {
                let x = acc[[i, f, j]] * e.coeff;
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                for u in 0..bl {
                    for v in 0..br {
                        out[[i * bl + u, e.out, j * br + v]] += x * new[[u, psi, v]];
                    }
                }
            }
        }
    }
    out
}

/// Partial contraction of the bra with all ket layers over the sites to one
/// side of a cut: `mat[b, t]` with `t` the flattened layer bonds.
#[derive(Clone, Debug)]
pub struct Env {
    pub mat: Array2<C64>,
    pub tdims: Vec<usize>,
}

impl Env {
    pub fn boundary(layers: usize) -> Env {
        Env {
            mat: Array2::from_elem((1, 1), ONE),
            tdims: vec![1; layers],
        }
    }
}

/// Environment with all ket layers of one site absorbed but the bra not yet
/// applied: `data[b, t', f]`.
pub struct Absorbed {
    pub data: Array3<C64>,
    pub tdims: Vec<usize>,
}

/// Absorbs the ket layers of one site into `env`. `sites[i]` is layer `i`'s
/// tensor at this site, oriented `(incoming bond, phys, outgoing bond)`.
pub fn absorb(env: &Env, sites: &[&Site], joins: &[Join]) -> Absorbed {
    let x = env.mat.dim().0;
    let k = sites.len();
    let mut old: Vec<usize> = env.tdims.clone();
    let mut newd: Vec<usize> = Vec::with_capacity(k);
    // layout [X, t_i.., t'_0..t'_{i-1}, F]
    let mut w: Vec<C64> = env.mat.as_standard_layout().iter().cloned().collect();
    let mut f = 1usize;
    for i in 0..k {
        let a = sites[i];
        let (ti, psi, tn) = a.dim();
        debug_assert_eq!(ti, old[0]);
        let rest: usize = old[1..].iter().product::<usize>() * newd.iter().product::<usize>();
        let w4 = Array4::from_shape_vec((x, ti, rest, f), w).expect("layout");
        let w2 = w4
            .permuted_axes([0, 2, 3, 1])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((x * rest * f, ti))
            .expect("layout");
        let a2 = a
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((ti, psi * tn))
            .expect("layout");
        let prod = w2.dot(&a2); // [X, rest, F, psi, tn]
        let rows = x * rest;
        let src = prod.as_slice().expect("contiguous");
        let (fout, out) = if i == 0 {
            // [X, rest, psi, tn] -> [X, rest, tn, psi]
            let mut out = vec![C64::new(0.0, 0.0); rows * tn * psi];
            for r in 0..rows {
                let sb = &src[r * psi * tn..(r + 1) * psi * tn];
                let ob = &mut out[r * tn * psi..(r + 1) * tn * psi];
                for p in 0..psi {
                    for t in 0..tn {
                        ob[t * psi + p] = sb[p * tn + t];
                    }
                }
            }
            (psi, out)
        } else {
            let join = &joins[i - 1];
            let fo = join.rule.out_dim;
            let mut out = vec![C64::new(0.0, 0.0); rows * tn * fo];
            let blk = f * psi * tn;
            for r in 0..rows {
                let sb = &src[r * blk..(r + 1) * blk];
                let ob = &mut out[r * tn * fo..(r + 1) * tn * fo];
                for e in &join.rule.entries {
                    let (fa, pn) = if join.new_is_left { (e.right, e.left) } else { (e.left, e.right) };
                    let base = (fa * psi + pn) * tn;
                    let c = e.coeff;
                    for t in 0..tn {
                        ob[t * fo + e.out] += c * sb[base + t];
                    }
                }
            }
            (fo, out)
        };
        w = out;
        f = fout;
        old.remove(0);
        newd.push(tn);
    }
    let tp: usize = newd.iter().product();
    Absorbed {
        data: Array3::from_shape_vec((x, tp, f), w).expect("layout"),
        tdims: newd,
    }
}

/// Applies the bra site `b[x, f, x']` (conjugated) to an absorbed tensor.
pub fn close(t: &Absorbed, b: &Site) -> Env {
    let (x, tp, f) = t.data.dim();
    let xn = b.dim().2;
    let t2 = t
        .data
        .view()
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((x * f, tp))
        .expect("layout");
    let b2 = b
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((x * f, xn))
        .expect("layout")
        .mapv(|z| z.conj());
    Env {
        mat: b2.t().dot(&t2),
        tdims: t.tdims.clone(),
    }
}

/// Optimal bra site given the absorbed left part and the right environment:
/// `B[x, f, x'] = sum_t T[x, t, f] E_R[x', t]`.
pub fn solve_site(t: &Absorbed, right: &Env) -> Site {
    let (x, tp, f) = t.data.dim();
    let xn = right.mat.dim().0;
    let t2 = t
        .data
        .view()
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((x * f, tp))
        .expect("layout");
    t2.dot(&right.mat.t())
        .into_shape_with_order((x, f, xn))
        .expect("layout")
}

/// Treats an absorbed tensor's physical index as part of the bra bond so a
/// second site can be absorbed on top of it.
pub fn fold_phys(t: &Absorbed) -> Env {
    let (x, tp, f) = t.data.dim();
    let mat = t
        .data
        .view()
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((x * f, tp))
        .expect("layout");
    Env {
        mat,
        tdims: t.tdims.clone(),
    }
}

/// Environments `envs[j]` covering sites `0..j` for `j = 0..=upto`.
pub fn left_envs(product: &Product, bra: &[Site], upto: usize) -> Vec<Env> {
    let layers = product.layers();
    let mut envs = Vec::with_capacity(upto + 1);
    envs.push(Env::boundary(layers.len()));
    for k in 0..upto {
        let sites: Vec<&Site> = layers.iter().map(|l| &l[k]).collect();
        let t = absorb(&envs[k], &sites, &product.joins);
        envs.push(close(&t, &bra[k]));
    }
    envs
}

/// Sites of every layer at position `k`.
pub fn column(product: &Product, k: usize) -> Vec<&Site> {
    product.layers().iter().map(|l| &l[k]).collect()
}

pub fn joins(product: &Product) -> &[Join] {
    &product.joins
}

/// `<bra | product>` by a single left-to-right pass.
pub fn overlap(bra: &[Site], product: &Product) -> Result<C64> {
    product.validate()?;
    let n = product.n_sites();
    if bra.len() != n {
        return Err(TomoError::Dimension(format!("site count {} vs {}", bra.len(), n)));
    }
    if bra[0].dim().1 != product.phys_dim() {
        return Err(TomoError::Dimension("physical dimension mismatch".into()));
    }
    let envs = left_envs(product, bra, n);
    Ok(envs[n].mat[[0, 0]])
}

/// Sum of squared moduli of all entries.
pub fn frob_sq(a: &Site) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
