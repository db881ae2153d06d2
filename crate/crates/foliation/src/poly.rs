//! Sparse multivariate polynomial arithmetic supporting the degree-by-degree
//! normal-form reduction: truncated products, substitution into vector fields,
//! Jacobians, and truncated inversion of near-identity polynomial maps.

use crate::germ::{total_degree, GermPoly, TermKey};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Scalar polynomial in n variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SPoly<C: Scalar> {
    pub n: usize,
    pub terms: BTreeMap<Vec<u16>, C>,
}

impl<C: Scalar> SPoly<C> {
    pub fn zero(n: usize) -> Self {
        SPoly { n, terms: BTreeMap::new() }
    }

    pub fn monomial(n: usize, m: Vec<u16>, c: C) -> Self {
        let mut p = SPoly::zero(n);
        p.add_term(m, c);
        p
    }

    pub fn variable(n: usize, j: usize) -> Self {
        let mut m = vec![0u16; n];
        m[j] = 1;
        SPoly::monomial(n, m, C::one())
    }

    pub fn add_term(&mut self, m: Vec<u16>, c: C) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(C::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &SPoly<C>) -> SPoly<C> {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scaled(&self, s: &C) -> SPoly<C> {
        let mut out = SPoly::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.clone() * s.clone());
        }
        out
    }

    /// Product truncated at total degree `max_deg`.
    pub fn mul_trunc(&self, other: &SPoly<C>, max_deg: u32) -> SPoly<C> {
        let mut out = SPoly::zero(self.n);
        for (m1, c1) in &self.terms {
            let d1 = total_degree(m1);
            if d1 > max_deg {
                continue;
            }
            for (m2, c2) in &other.terms {
                if d1 + total_degree(m2) > max_deg {
                    continue;
                }
                let m: Vec<u16> = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.add_term(m, c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn pow_trunc(&self, e: u16, max_deg: u32) -> SPoly<C> {
        let mut out = SPoly::monomial(self.n, vec![0; self.n], C::one());
        for _ in 0..e {
            out = out.mul_trunc(self, max_deg);
        }
        out
    }

    /// Partial derivative with respect to variable `j`.
    pub fn derivative(&self, j: usize) -> SPoly<C> {
        let mut out = SPoly::zero(self.n);
        for (m, c) in &self.terms {
            if m[j] == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[j] -= 1;
            out.add_term(dm, c.clone() * C::from_int(m[j] as i64));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn truncated(&self, max_deg: u32) -> SPoly<C> {
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| total_degree(m) <= max_deg)
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        SPoly { n: self.n, terms }
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| total_degree(m)).min()
    }
}

/// Polynomial map C^n -> C^n as a vector of scalar polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap<C: Scalar> {
    pub components: Vec<SPoly<C>>,
}

impl<C: Scalar> PolyMap<C> {
    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn identity(n: usize) -> Self {
        PolyMap {
            components: (0..n).map(|j| SPoly::variable(n, j)).collect(),
        }
    }

    /// Linear map w -> P w given by an n x n matrix (row i = component i).
    pub fn linear(p: &[Vec<C>]) -> Self {
        let n = p.len();
        let components = (0..n)
            .map(|i| {
                let mut s = SPoly::zero(n);
                for (j, c) in p[i].iter().enumerate() {
                    let mut m = vec![0u16; n];
                    m[j] = 1;
                    s.add_term(m, c.clone());
                }
                s
            })
            .collect();
        PolyMap { components }
    }

    pub fn from_germ(g: &GermPoly<C>) -> Self {
        let n = g.dimension;
        let mut components = vec![SPoly::zero(n); n];
        for ((i, m), c) in &g.terms {
            components[*i].add_term(m.clone(), c.clone());
        }
        PolyMap { components }
    }

    pub fn to_germ(&self) -> GermPoly<C> {
        let n = self.n();
        let mut terms: BTreeMap<TermKey, C> = BTreeMap::new();
        for (i, p) in self.components.iter().enumerate() {
            for (m, c) in &p.terms {
                if !c.is_zero() {
                    terms.insert((i, m.clone()), c.clone());
                }
            }
        }
        GermPoly { dimension: n, terms }
    }

    /// Composition self(other(w)) truncated at total degree `max_deg`.
    pub fn compose_trunc(&self, other: &PolyMap<C>, max_deg: u32) -> PolyMap<C> {
        let n = self.n();
        let components = (0..n)
            .map(|i| substitute(&self.components[i], &other.components, max_deg))
            .collect();
        PolyMap { components }
    }

    /// Jacobian matrix of the map; entry (i, j) = d(component i)/d(z_j).
    pub fn jacobian(&self) -> Vec<Vec<SPoly<C>>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.components[i].derivative(j)).collect())
            .collect()
    }

    pub fn evaluate(&self, z: &[C]) -> Vec<C> {
        self.components
            .iter()
            .map(|p| {
                let mut acc = C::zero();
                for (m, c) in &p.terms {
                    let mut v = c.clone();
                    for (j, &e) in m.iter().enumerate() {
                        for _ in 0..e {
                            v = v * z[j].clone();
                        }
                    }
                    acc = acc + v;
                }
                acc
            })
            .collect()
    }

    pub fn truncated(&self, max_deg: u32) -> PolyMap<C> {
        PolyMap {
            components: self.components.iter().map(|p| p.truncated(max_deg)).collect(),
        }
    }

    /// Linear part as an n x n matrix.
    pub fn linear_matrix(&self) -> Vec<Vec<C>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut m = vec![0u16; n];
                        m[j] = 1;
                        self.components[i].terms.get(&m).cloned().unwrap_or_else(C::zero)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Substitute the maps `phi` into a scalar polynomial, truncating at `max_deg`.
pub fn substitute<C: Scalar>(p: &SPoly<C>, phi: &[SPoly<C>], max_deg: u32) -> SPoly<C> {
    let n = p.n;
    let mut out = SPoly::zero(n);
    for (m, c) in &p.terms {
        let mut prod = SPoly::monomial(n, vec![0; n], c.clone());
        for (j, &e) in m.iter().enumerate() {
            if e > 0 {
                prod = prod.mul_trunc(&phi[j].pow_trunc(e, max_deg), max_deg);
            }
            if prod.is_zero() {
                break;
            }
        }
        out = out.add(&prod);
    }
    out
}

/// Matrix-vector product of a Jacobian with a vector of polynomials, truncated.
pub fn jac_apply<C: Scalar>(
    jac: &[Vec<SPoly<C>>],
    v: &[SPoly<C>],
    max_deg: u32,
) -> Vec<SPoly<C>> {
    let n = jac.len();
    (0..n)
        .map(|i| {
            let mut acc = SPoly::zero(v[0].n);
            for j in 0..n {
                acc = acc.add(&jac[i][j].mul_trunc(&v[j], max_deg));
            }
            acc
        })
        .collect()
}

/// Pushforward of the vector field F under the coordinate change z = phi(w),
/// where phi = id + g with g of degree >= 2: returns G with
/// Dphi(w) G(w) = F(phi(w)), truncated at `max_deg`.
pub fn pushforward<C: Scalar>(f: &PolyMap<C>, phi: &PolyMap<C>, max_deg: u32) -> PolyMap<C> {
    let n = f.n();
    let rhs: Vec<SPoly<C>> = (0..n)
        .map(|i| substitute(&f.components[i], &phi.components, max_deg))
        .collect();
    // Dphi = I + Dg with Dg of degree >= 1: solve (I + Dg) G = rhs by the
    // terminating Neumann iteration G <- rhs - Dg G.
    let id = PolyMap::<C>::identity(n);
    let dg: Vec<Vec<SPoly<C>>> = phi
        .jacobian()
        .into_iter()
        .zip(id.jacobian())
        .map(|(row, idrow)| {
            row.into_iter()
                .zip(idrow)
                .map(|(a, b)| a.add(&b.scaled(&-C::one())))
                .collect()
        })
        .collect();
    let mut g = rhs.clone();
    for _ in 0..=(max_deg as usize + 1) {
        let dg_g = jac_apply(&dg, &g, max_deg);
        let next: Vec<SPoly<C>> = rhs
            .iter()
            .zip(&dg_g)
            .map(|(r, d)| r.add(&d.scaled(&-C::one())))
            .collect();
        if next == g {
            break;
        }
        g = next;
    }
    PolyMap { components: g }.truncated(max_deg)
}

/// Truncated inverse of a polynomial map H(w) = B w + higher with invertible
/// linear part: returns K with H(K(z)) = z modulo degree > `max_deg`.
pub fn invert_map<C: Scalar>(
    h: &PolyMap<C>,
    b_inv: &[Vec<C>],
    max_deg: u32,
) -> PolyMap<C> {
    let n = h.n();
    let binv_map = PolyMap::linear(b_inv);
    // higher-order part of H
    let hh: Vec<SPoly<C>> = h
        .components
        .iter()
        .zip(&PolyMap::<C>::identity(n).components)
        .map(|(c, _)| c.clone())
        .collect();
    let lin = h.linear_matrix();
    let lin_map = PolyMap::linear(&lin);
    let higher: Vec<SPoly<C>> = hh
        .iter()
        .zip(&lin_map.components)
        .map(|(a, b)| a.add(&b.scaled(&-C::one())))
        .collect();
    let higher_map = PolyMap { components: higher };

    let mut k = binv_map.clone();
    for _ in 0..=(max_deg as usize + 1) {
        // K <- B^{-1} (id - Hh(K))
        let hk = higher_map.compose_trunc(&k, max_deg);
        let inner = PolyMap {
            components: PolyMap::<C>::identity(n)
                .components
                .iter()
                .zip(&hk.components)
                .map(|(a, b)| a.add(&b.scaled(&-C::one())))
                .collect(),
        };
        let next = binv_map.compose_trunc(&inner, max_deg);
        if next == k {
            break;
        }
        k = next;
    }
    k
}
