//! Jordan reduction of the linear part, degree-by-degree elimination of
//! non-resonant monomials, superdiagonal normalization, and canonical
//! two-dimensional forms.

use crate::germ::{germ_from_poly, total_degree, unit_exponent, Coefficient, Germ, GermPoly, TermKey};
use crate::linalg::{
    frobenius, identity, is_zero_matrix, mat_inverse, mat_mul, mat_vec, nullspace, solve_in_span,
    Echelon,
};
use crate::poly::{invert_map, pushforward, PolyMap};
use crate::resonance::RES_TOL;
use crate::scalar::{Scalar, C64, CQ};
use crate::spectral::{linear_part, spectrum_of_germ, SpectralError, Spectrum};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Numeric coefficients below this relative size are treated as elimination noise.
const NOISE_TOL: f64 = 1e-9;
/// Condition-number ceiling for the numeric change-of-basis matrix.
const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error("expected a Poincaré-type germ")]
    NotPoincare,
    #[error("degree bound must be at least 2 (got {0})")]
    DegreeTooSmall(u32),
    #[error("expected a two-dimensional germ (got n = {0})")]
    NotPlanar(usize),
    #[error("near-resonant denominator |<m,lambda> - lambda_i| = {0:.3e} on the numeric path")]
    NearResonance(f64),
    #[error("numeric Jordan structure is ill-conditioned (estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("linear part is outside the exactly supported Jordan cases")]
    UnsupportedStructure,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

// ---- Jordan reduction ----------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Jordanization<C: Scalar> {
    pub j: Vec<Vec<C>>,
    pub p: Vec<Vec<C>>,
    pub p_inv: Vec<Vec<C>>,
    /// Flag per position i: J[i][i+1] = 1.
    pub superdiagonal: Vec<bool>,
    /// Frobenius condition estimate of P (1 for the identity).
    pub condition: f64,
}

fn scale_of<C: Scalar>(a: &[Vec<C>]) -> f64 {
    1.0 + a.iter().flatten().map(|x| x.abs()).fold(0.0f64, f64::max)
}

fn shift<C: Scalar>(a: &[Vec<C>], lam: &C) -> Vec<Vec<C>> {
    let mut m = a.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = row[i].clone() - lam.clone();
    }
    m
}

fn mat_pow<C: Scalar>(a: &[Vec<C>], e: usize) -> Vec<Vec<C>> {
    let mut out = identity::<C>(a.len());
    for _ in 0..e {
        out = mat_mul(&out, a);
    }
    out
}

fn mat_vec_pow<C: Scalar>(a: &[Vec<C>], e: usize, v: &[C]) -> Vec<C> {
    let mut out = v.to_vec();
    for _ in 0..e {
        out = mat_vec(a, &out);
    }
    out
}

/// Recognize a matrix already in Jordan normal form; returns superdiagonal flags.
fn already_jordan<C: Scalar>(a: &[Vec<C>]) -> Option<Vec<bool>> {
    let n = a.len();
    let tol = NOISE_TOL * scale_of(a);
    let mut flags = vec![false; n.saturating_sub(1)];
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let e = &a[i][j];
            if j == i + 1 {
                if e.is_zero_within(tol) {
                    continue;
                }
                if !(e.clone() - C::one()).is_zero_within(tol) {
                    return None;
                }
                if !(a[i][i].clone() - a[j][j].clone()).is_zero_within(tol) {
                    return None;
                }
                flags[i] = true;
            } else if !e.is_zero_within(tol) {
                return None;
            }
        }
    }
    Some(flags)
}

/// Jordan chains of a nilpotent matrix; each chain is listed root-first, ending
/// in the chain generator (so the first vector is a true eigenvector).
fn nilpotent_chains<C: Scalar>(t: &[Vec<C>]) -> Option<Vec<Vec<Vec<C>>>> {
    let k = t.len();
    let scale = scale_of(t);
    let mut powers: Vec<Vec<Vec<C>>> = vec![identity::<C>(k)];
    let mut s = 0usize;
    for j in 1..=k {
        let p = mat_mul(&powers[j - 1], t);
        let zero = is_zero_matrix(&p, scale);
        powers.push(p);
        if zero {
            s = j;
            break;
        }
    }
    if s == 0 {
        return None;
    }
    let kernels: Vec<Vec<Vec<C>>> = (1..=s).map(|j| nullspace(&powers[j])).collect();
    let mut tops: Vec<(usize, Vec<C>)> = Vec::new();
    for j in (1..=s).rev() {
        let mut base = Echelon::<C>::new(scale);
        if j >= 2 {
            for v in &kernels[j - 2] {
                base.insert(v);
            }
        }
        for (h, v) in &tops {
            if *h > j {
                base.insert(&mat_vec_pow(t, h - j, v));
            }
        }
        for v in &kernels[j - 1] {
            if base.insert(v) {
                tops.push((j, v.clone()));
            }
        }
    }
    if tops.iter().map(|(h, _)| h).sum::<usize>() != k {
        return None;
    }
    tops.sort_by(|a, b| b.0.cmp(&a.0));
    Some(
        tops.into_iter()
            .map(|(h, v)| (0..h).rev().map(|p| mat_vec_pow(t, p, &v)).collect())
            .collect(),
    )
}

fn structure_error<C: Scalar>(cond: f64) -> NormalFormError {
    if C::EXACT {
        NormalFormError::UnsupportedStructure
    } else {
        NormalFormError::IllConditioned(cond)
    }
}

/// P^{-1} A P = J with J in Jordan normal form. `eigs` must list the
/// eigenvalues with multiplicity in spectrum order; matrices already in Jordan
/// form pass through with P = I (keeping their own eigenvalue order).
pub fn jordanize<C: Scalar>(a: &[Vec<C>], eigs: &[C]) -> Result<Jordanization<C>, NormalFormError> {
    let n = a.len();
    if let Some(flags) = already_jordan(a) {
        return Ok(Jordanization {
            j: a.to_vec(),
            p: identity::<C>(n),
            p_inv: identity::<C>(n),
            superdiagonal: flags,
            condition: 1.0,
        });
    }
    let eig_scale = 1.0 + eigs.iter().map(|e| e.abs()).fold(0.0f64, f64::max);
    let mut clusters: Vec<(C, usize)> = Vec::new();
    for e in eigs {
        if let Some(last) = clusters.last_mut() {
            if (last.0.clone() - e.clone()).is_zero_within(1e-8 * eig_scale) {
                last.1 += 1;
                continue;
            }
        }
        clusters.push((e.clone(), 1));
    }
    let mut cols: Vec<Vec<C>> = Vec::new();
    let mut diag: Vec<C> = Vec::new();
    let mut flags = vec![false; n.saturating_sub(1)];
    for (lam, mult) in clusters {
        let m = shift(a, &lam);
        if mult == 1 {
            let v = nullspace(&m)
                .into_iter()
                .next()
                .ok_or_else(|| structure_error::<C>(f64::INFINITY))?;
            cols.push(v);
            diag.push(lam.clone());
            continue;
        }
        let basis = nullspace(&mat_pow(&m, mult));
        if basis.len() != mult {
            return Err(structure_error::<C>(f64::INFINITY));
        }
        // restriction of (A - lam I) to its generalized eigenspace
        let images: Vec<Vec<C>> = basis.iter().map(|b| mat_vec(&m, b)).collect();
        let coords = solve_in_span(&basis, &images)
            .ok_or_else(|| structure_error::<C>(f64::INFINITY))?;
        let t: Vec<Vec<C>> = (0..mult)
            .map(|i| (0..mult).map(|j| coords[j][i].clone()).collect())
            .collect();
        let chains = nilpotent_chains(&t).ok_or_else(|| structure_error::<C>(f64::INFINITY))?;
        for chain in chains {
            for (idx, coord) in chain.iter().enumerate() {
                let mut col = vec![C::zero(); n];
                for (l, b) in basis.iter().enumerate() {
                    for (x, y) in col.iter_mut().zip(b) {
                        *x = x.clone() + coord[l].clone() * y.clone();
                    }
                }
                if idx > 0 {
                    flags[cols.len() - 1] = true;
                }
                cols.push(col);
                diag.push(lam.clone());
            }
        }
    }
    if cols.len() != n {
        return Err(structure_error::<C>(f64::INFINITY));
    }
    let p: Vec<Vec<C>> = (0..n)
        .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
        .collect();
    let p_inv = mat_inverse(&p).ok_or_else(|| structure_error::<C>(f64::INFINITY))?;
    let condition = frobenius(&p) * frobenius(&p_inv);
    if !C::EXACT && condition > COND_LIMIT {
        return Err(NormalFormError::IllConditioned(condition));
    }
    let mut j = vec![vec![C::zero(); n]; n];
    for i in 0..n {
        j[i][i] = diag[i].clone();
        if i + 1 < n && flags[i] {
            j[i][i + 1] = C::one();
        }
    }
    Ok(Jordanization { j, p, p_inv, superdiagonal: flags, condition })
}

// ---- homological elimination -----------------------------------------------------

/// Nilpotent part of the homological operator: coefficient flow out of a
/// monomial key under the unit superdiagonal entries.
fn move_targets<C: Scalar>(key: &TermKey, superdiag: &[bool]) -> Vec<(TermKey, C)> {
    let (i, m) = key;
    let mut out = Vec::new();
    for (j, &flag) in superdiag.iter().enumerate() {
        if flag && m[j] > 0 {
            let mut mm = m.clone();
            mm[j] -= 1;
            mm[j + 1] += 1;
            out.push(((*i, mm), C::from_int(m[j] as i64)));
        }
    }
    if *i > 0 && superdiag[*i - 1] {
        out.push(((*i - 1, m.clone()), -C::one()));
    }
    out
}

/// Strictly increasing along every nilpotent move; orders the triangular solve.
fn move_grading(key: &TermKey) -> i64 {
    let (i, m) = key;
    m.iter().enumerate().map(|(j, &e)| j as i64 * e as i64).sum::<i64>() - *i as i64
}

fn delta<C: Scalar>(key: &TermKey, lambda: &[C]) -> C {
    let (i, m) = key;
    let mut d = -lambda[*i].clone();
    for (j, &e) in m.iter().enumerate() {
        if e > 0 {
            d = d + lambda[j].clone() * C::from_int(e as i64);
        }
    }
    d
}

fn is_resonant_key<C: Scalar>(key: &TermKey, lambda: &[C]) -> bool {
    delta(key, lambda).is_zero_within(RES_TOL * (1.0 + lambda[key.0].abs()))
}

/// Solve the degree-k homological equation L(h) = v on the non-resonant
/// monomials; returns the polynomial increment h (None when nothing to do).
fn solve_homological<C: Scalar>(
    f: &PolyMap<C>,
    lambda: &[C],
    superdiag: &[bool],
    k: u32,
) -> Result<Option<PolyMap<C>>, NormalFormError> {
    let n = lambda.len();
    let mut v: BTreeMap<TermKey, C> = BTreeMap::new();
    for (i, p) in f.components.iter().enumerate() {
        for (m, c) in &p.terms {
            if total_degree(m) == k {
                v.insert((i, m.clone()), c.clone());
            }
        }
    }
    if v.is_empty() {
        return Ok(None);
    }
    // forward closure of the support under the nilpotent moves
    let mut closure: BTreeSet<TermKey> = v.keys().cloned().collect();
    let mut stack: Vec<TermKey> = closure.iter().cloned().collect();
    while let Some(key) = stack.pop() {
        for (tgt, _) in move_targets::<C>(&key, superdiag) {
            if closure.insert(tgt.clone()) {
                stack.push(tgt);
            }
        }
    }
    let mut keys: Vec<TermKey> = closure.into_iter().collect();
    keys.sort_by_key(move_grading);
    let mut h: BTreeMap<TermKey, C> = BTreeMap::new();
    let mut flow: BTreeMap<TermKey, C> = BTreeMap::new();
    for key in keys {
        let total = v.get(&key).cloned().unwrap_or_else(C::zero)
            - flow.get(&key).cloned().unwrap_or_else(C::zero);
        if is_resonant_key(&key, lambda) {
            continue;
        }
        let d = delta(&key, lambda);
        if !C::EXACT && d.abs() < 1e-12 {
            return Err(NormalFormError::NearResonance(d.abs()));
        }
        if total.is_zero() {
            continue;
        }
        let hv = total / d;
        for (tgt, coef) in move_targets::<C>(&key, superdiag) {
            let entry = flow.entry(tgt).or_insert_with(C::zero);
            *entry = entry.clone() + coef * hv.clone();
        }
        h.insert(key, hv);
    }
    if h.is_empty() {
        return Ok(None);
    }
    let mut phi = PolyMap::<C>::identity(n);
    for ((i, m), c) in h {
        phi.components[i].add_term(m, c);
    }
    Ok(Some(phi))
}

/// Strip elimination noise: keep the Jordan linear pattern and (numerically or
/// exactly) resonant higher terms.
fn cleanup<C: Scalar>(
    f: &PolyMap<C>,
    lambda: &[C],
    superdiag: &[bool],
    max_deg: u32,
) -> GermPoly<C> {
    let n = f.n();
    let coeff_scale = 1.0
        + f.components
            .iter()
            .flat_map(|p| p.terms.values())
            .map(|c| c.abs())
            .fold(0.0f64, f64::max);
    let mut out = GermPoly::new(n);
    for (i, p) in f.components.iter().enumerate() {
        for (m, c) in &p.terms {
            let deg = total_degree(m);
            if deg > max_deg {
                continue;
            }
            let keep = if deg == 1 {
                let diag = *m == unit_exponent(n, i);
                let sup = i + 1 < n && superdiag[i] && *m == unit_exponent(n, i + 1);
                diag || sup
            } else {
                is_resonant_key(&(i, m.clone()), lambda)
            };
            if !keep {
                debug_assert!(
                    c.is_zero_within(1e-6 * coeff_scale),
                    "non-resonant residue survived elimination: ({i}, {m:?}) = {c:?}"
                );
                continue;
            }
            if !C::EXACT && c.is_zero_within(NOISE_TOL * coeff_scale) {
                continue;
            }
            out.add_term(i, m.clone(), c.clone());
        }
    }
    out
}

// ---- Poincaré–Dulac reduction -----------------------------------------------------

#[derive(Debug, Clone)]
pub struct NormalForm<C: Scalar> {
    pub normal: GermPoly<C>,
    /// Coordinate change: old coordinates from new, z = forward(w).
    pub forward: PolyMap<C>,
    /// Truncated inverse: forward(inverse(z)) = z modulo degree > `degree`.
    pub inverse: PolyMap<C>,
    pub jordan: Jordanization<C>,
    pub degree: u32,
    /// Monomials of degree >= 2 present in the normal form.
    pub resonant_support: Vec<TermKey>,
}

/// Degree-by-degree elimination of non-resonant monomials up to `max_deg`.
/// `eigs` must list the spectrum-ordered eigenvalues of the linear part.
pub fn poincare_dulac<C: Scalar>(
    germ: &GermPoly<C>,
    eigs: &[C],
    max_deg: u32,
) -> Result<NormalForm<C>, NormalFormError> {
    if max_deg < 2 {
        return Err(NormalFormError::DegreeTooSmall(max_deg));
    }
    let a = linear_part(germ);
    let jordan = jordanize(&a, eigs)?;
    let n = germ.dimension;
    let p_map = PolyMap::linear(&jordan.p);
    let pinv_map = PolyMap::linear(&jordan.p_inv);
    let f0 = {
        let mut f = PolyMap::from_germ(germ).truncated(max_deg);
        f = f.compose_trunc(&p_map, max_deg);
        pinv_map.compose_trunc(&f, max_deg)
    };
    let lambda: Vec<C> = (0..n).map(|i| jordan.j[i][i].clone()).collect();
    let mut f = f0;
    let mut forward = p_map;
    for k in 2..=max_deg {
        if let Some(phi) = solve_homological(&f, &lambda, &jordan.superdiagonal, k)? {
            f = pushforward(&f, &phi, max_deg);
            forward = forward.compose_trunc(&phi, max_deg);
        }
    }
    let normal = cleanup(&f, &lambda, &jordan.superdiagonal, max_deg);
    let inverse = invert_map(&forward, &jordan.p_inv, max_deg);
    let resonant_support = normal
        .terms
        .keys()
        .filter(|(_, m)| total_degree(m) >= 2)
        .cloned()
        .collect();
    Ok(NormalForm {
        normal,
        forward,
        inverse,
        jordan,
        degree: max_deg,
        resonant_support,
    })
}

/// Beyond this degree no resonant monomial exists (|<m,lambda>| >= c |m|).
pub fn default_degree_bound(spec: &Spectrum) -> u32 {
    let max_abs = spec
        .eigenvalues
        .iter()
        .map(|e| e.value.norm())
        .fold(0.0f64, f64::max);
    (((max_abs / spec.c) - 1e-9).ceil() as u32).max(2)
}

#[derive(Debug, Clone)]
pub struct NormalFormGerm {
    pub normal: Germ,
    pub forward: Germ,
    pub inverse: Germ,
    pub degree: u32,
    pub resonant_support: Vec<TermKey>,
    pub exact: bool,
}

/// Germ-level driver: exact elimination when all coefficients and eigenvalues
/// are Gaussian rational, numeric otherwise.
pub fn poincare_dulac_germ(
    germ: &Germ,
    degree: Option<u32>,
) -> Result<NormalFormGerm, NormalFormError> {
    let spec = spectrum_of_germ(germ)?;
    if !spec.poincare {
        return Err(NormalFormError::NotPoincare);
    }
    let max_deg = degree.unwrap_or_else(|| default_degree_bound(&spec));
    if spec.exact && germ.is_exact() {
        let g = germ.to_exact().unwrap();
        let eigs: Vec<CQ> = spec
            .eigenvalues
            .iter()
            .map(|e| e.exact.clone().unwrap())
            .collect();
        match poincare_dulac(&g, &eigs, max_deg) {
            Ok(nf) => {
                return Ok(NormalFormGerm {
                    normal: germ_from_poly(&nf.normal),
                    forward: germ_from_poly(&nf.forward.to_germ()),
                    inverse: germ_from_poly(&nf.inverse.to_germ()),
                    degree: nf.degree,
                    resonant_support: nf.resonant_support,
                    exact: true,
                })
            }
            Err(NormalFormError::UnsupportedStructure) => {} // retry numerically
            Err(e) => return Err(e),
        }
    }
    let g = germ.to_numeric();
    let eigs: Vec<C64> = spec.eigenvalues.iter().map(|e| e.value).collect();
    let nf = poincare_dulac(&g, &eigs, max_deg)?;
    Ok(NormalFormGerm {
        normal: germ_from_poly(&nf.normal),
        forward: germ_from_poly(&nf.forward.to_germ()),
        inverse: germ_from_poly(&nf.inverse.to_germ()),
        degree: nf.degree,
        resonant_support: nf.resonant_support,
        exact: false,
    })
}

// ---- superdiagonal normalization ---------------------------------------------------

fn rescale_coords<C: Scalar>(g: &GermPoly<C>, s: C) -> GermPoly<C> {
    let n = g.dimension;
    let mut d = vec![C::one(); n];
    for i in 0..n.saturating_sub(1) {
        let key = (i, unit_exponent(n, i + 1));
        if let Some(nu) = g.terms.get(&key) {
            d[i + 1] = d[i].clone() * s.clone() / nu.clone();
        }
    }
    let mut out = GermPoly::new(n);
    for ((i, m), c) in &g.terms {
        let mut v = c.clone() / d[*i].clone();
        for (j, &e) in m.iter().enumerate() {
            for _ in 0..e {
                v = v * d[j].clone();
            }
        }
        out.add_term(*i, m.clone(), v);
    }
    out
}

/// Diagonal rescaling of a Poincaré–Dulac normal form so every Jordan
/// superdiagonal entry equals c/(2n).
pub fn normalize_superdiagonal(germ: &Germ) -> Result<Germ, NormalFormError> {
    let spec = spectrum_of_germ(germ)?;
    if !spec.poincare {
        return Err(NormalFormError::NotPoincare);
    }
    let n = germ.dimension;
    let has_superdiag = (0..n.saturating_sub(1))
        .any(|i| germ.terms.contains_key(&(i, unit_exponent(n, i + 1))));
    if !has_superdiag {
        return Ok(germ.clone());
    }
    if let (Some(c_exact), Some(g)) = (&spec.c_exact, germ.to_exact()) {
        let s = Complex::new(
            c_exact / BigRational::from_integer(BigInt::from(2 * n as i64)),
            BigRational::zero(),
        );
        return Ok(germ_from_poly(&rescale_coords(&g, s)));
    }
    let s = Complex::new(spec.c / (2.0 * n as f64), 0.0);
    Ok(germ_from_poly(&rescale_coords(&germ.to_numeric(), s)))
}

// ---- canonical 2-D forms --------------------------------------------------------------

/// Canonical representative of a planar Poincaré germ.
///
/// typ 1: non-real eigenvalue ratio, normal = (lambda x, y).
/// typ 2: real ratio lambda >= 1, vanishing resonant coefficient, normal = (lambda x, y).
/// typ 3: ratio m >= 2 with resonant monomial, normal = (m x + y^m, y).
/// typ 4: defective ratio 1, normal = (x + y/4, y).
#[derive(Debug, Clone)]
pub struct Canonical2D {
    pub typ: u8,
    pub lambda: C64,
    pub lambda_exact: Option<CQ>,
    /// Resonance order: Some(m) for typ 3, Some(1) for typ 4.
    pub m: Option<u32>,
    /// Original resonant-monomial coefficient before its rescaling to 1.
    pub resonant_coeff: Option<C64>,
    pub germ: Germ,
    pub exact: bool,
}

fn qcoeff(num: i64, den: i64) -> Coefficient {
    Coefficient::from_exact(
        BigRational::new(BigInt::from(num), BigInt::from(den)),
        BigRational::zero(),
    )
}

fn cq_ratio(a: &CQ, b: &CQ) -> CQ {
    let den = &b.re * &b.re + &b.im * &b.im;
    let re = (&a.re * &b.re + &a.im * &b.im) / &den;
    let im = (&a.im * &b.re - &a.re * &b.im) / &den;
    Complex::new(re, im)
}

pub fn canonical_form_2d(germ: &Germ) -> Result<Canonical2D, NormalFormError> {
    if germ.dimension != 2 {
        return Err(NormalFormError::NotPlanar(germ.dimension));
    }
    let nf = poincare_dulac_germ(germ, None)?;
    let normal = &nf.normal;
    let defective = normal.terms.contains_key(&(0, vec![0, 1]));
    if defective {
        let canonical = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qcoeff(1, 1)),
                (1, vec![0, 1], qcoeff(1, 4)),
                (2, vec![0, 1], qcoeff(1, 1)),
            ],
        )
        .unwrap();
        return Ok(Canonical2D {
            typ: 4,
            lambda: Complex::new(1.0, 0.0),
            lambda_exact: Some(CQ::from_int(1)),
            m: Some(1),
            resonant_coeff: None,
            germ: canonical,
            exact: true,
        });
    }
    // diagonal linear part: read the eigenvalue attached to each coordinate
    let d: Vec<&Coefficient> = (0..2)
        .map(|i| normal.terms.get(&(i, unit_exponent(2, i))).expect("Jordan diagonal"))
        .collect();
    let exact_ratio = |a: usize, b: usize| -> Option<CQ> {
        match (d[a].to_cq(), d[b].to_cq()) {
            (Some(x), Some(y)) => Some(cq_ratio(&x, &y)),
            _ => None,
        }
    };
    let r01 = d[0].to_c64() / d[1].to_c64();
    let e01 = exact_ratio(0, 1);
    let is_real = e01
        .as_ref()
        .map(|q| q.im.is_zero())
        .unwrap_or_else(|| r01.im.abs() <= 1e-9 * (1.0 + r01.norm()));
    if !is_real {
        // one Jordan-coordinate order gives Im > 0; take that representative
        let (lam, lam_exact) = if r01.im > 0.0 {
            (r01, e01)
        } else {
            (1.0 / r01, exact_ratio(1, 0))
        };
        let coeff = match &lam_exact {
            Some(q) => Coefficient::from_exact(q.re.clone(), q.im.clone()),
            None => Coefficient::from_f64(lam.re, lam.im),
        };
        let exact = lam_exact.is_some();
        let canonical = Germ::from_terms(
            2,
            [(1, vec![1, 0], coeff), (2, vec![0, 1], qcoeff(1, 1))],
        )
        .unwrap();
        return Ok(Canonical2D {
            typ: 1,
            lambda: lam,
            lambda_exact: lam_exact,
            m: None,
            resonant_coeff: None,
            germ: canonical,
            exact,
        });
    }
    // real positive ratio: fold to lambda >= 1; `big` is the x-coordinate index
    let keep01 = match &e01 {
        Some(q) => q.re >= BigRational::from_integer(BigInt::from(1)),
        None => r01.norm() >= 1.0,
    };
    let (big, small) = if keep01 { (0usize, 1usize) } else { (1usize, 0usize) };
    let lam_exact = exact_ratio(big, small);
    let lam = d[big].to_c64() / d[small].to_c64();
    let m_int: Option<u32> = match &lam_exact {
        Some(q) => {
            if q.re.is_integer() {
                q.re.to_integer().to_u32()
            } else {
                None
            }
        }
        None => {
            let r = lam.re.round();
            if (lam.re - r).abs() <= 1e-8 * (1.0 + lam.re.abs()) && r >= 1.0 {
                Some(r as u32)
            } else {
                None
            }
        }
    };
    let res_key = m_int
        .filter(|&m| m >= 2)
        .map(|m| (big, { let mut e = vec![0u16; 2]; e[small] = m as u16; e }));
    let res_coeff = res_key.as_ref().and_then(|k| normal.terms.get(k));
    if let (Some(m), Some(coeff)) = (m_int.filter(|&m| m >= 2), res_coeff) {
        let canonical = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qcoeff(m as i64, 1)),
                (1, vec![0, m as u16], qcoeff(1, 1)),
                (2, vec![0, 1], qcoeff(1, 1)),
            ],
        )
        .unwrap();
        return Ok(Canonical2D {
            typ: 3,
            lambda: lam,
            lambda_exact: lam_exact,
            m: Some(m),
            resonant_coeff: Some(coeff.to_c64()),
            germ: canonical,
            exact: nf.exact,
        });
    }
    let coeff = match &lam_exact {
        Some(q) => Coefficient::from_exact(q.re.clone(), q.im.clone()),
        None => Coefficient::from_f64(lam.re, lam.im),
    };
    let exact = lam_exact.is_some();
    let canonical = Germ::from_terms(
        2,
        [(1, vec![1, 0], coeff), (2, vec![0, 1], qcoeff(1, 1))],
    )
    .unwrap();
    Ok(Canonical2D {
        typ: 2,
        lambda: lam,
        lambda_exact: lam_exact,
        m: None,
        resonant_coeff: None,
        germ: canonical,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::germ::parse_germ;
    use crate::poly::{jac_apply, substitute};
    use num_traits::One;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn cq(re: i64, im: i64) -> CQ {
        Complex::new(rat(re, 1), rat(im, 1))
    }

    fn germ_json(terms: &[(usize, &[u64], f64, f64, Option<(&str, &str)>)]) -> String {
        let items: Vec<String> = terms
            .iter()
            .map(|(comp, exps, re, im, exact)| {
                let e: Vec<String> = exps.iter().map(|x| x.to_string()).collect();
                let exact_part = match exact {
                    Some((p, q)) => format!(", \"exact\": [\"{p}\", \"{q}\"]"),
                    None => String::new(),
                };
                format!(
                    "{{\"component\": {comp}, \"exponents\": [{}], \"coeff\": {{\"re\": {re}, \"im\": {im}{exact_part}}}}}",
                    e.join(", ")
                )
            })
            .collect();
        format!(
            "{{\"n\": {}, \"terms\": [{}]}}",
            terms[0].1.len(),
            items.join(", ")
        )
    }

    #[test]
    fn jordanize_diagonal_passthrough() {
        let a = vec![vec![cq(2, 0), cq(0, 0)], vec![cq(0, 0), cq(1, 0)]];
        let jd = jordanize(&a, &[cq(1, 0), cq(2, 0)]).unwrap();
        assert_eq!(jd.j, a);
        assert_eq!(jd.p, identity::<CQ>(2));
        assert_eq!(jd.superdiagonal, vec![false]);
    }

    #[test]
    fn jordanize_jordan_block_passthrough() {
        let a = vec![vec![cq(1, 0), cq(1, 0)], vec![cq(0, 0), cq(1, 0)]];
        let jd = jordanize(&a, &[cq(1, 0), cq(1, 0)]).unwrap();
        assert_eq!(jd.j, a);
        assert_eq!(jd.p, identity::<CQ>(2));
        assert_eq!(jd.superdiagonal, vec![true]);
    }

    #[test]
    fn jordanize_rotation_matrix() {
        // [[0,-1],[1,0]] has eigenvalues i (arg pi/2) then -i (arg 3pi/2)
        let a = vec![vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
        let eigs = vec![c(0.0, 1.0), c(0.0, -1.0)];
        let jd = jordanize(&a, &eigs).unwrap();
        assert!((jd.j[0][0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((jd.j[1][1] - c(0.0, -1.0)).norm() < 1e-12);
        assert!(jd.j[0][1].norm() < 1e-12);
        // A P = P J
        let ap = mat_mul(&a, &jd.p);
        let pj = mat_mul(&jd.p, &jd.j);
        for (ra, rb) in ap.iter().zip(&pj) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn jordanize_scaled_block_and_triangular_3d() {
        // [[1,1/4],[0,1]] is defective but not Jordan; P rescales
        let a = vec![vec![cq(1, 0), Complex::new(rat(1, 4), rat(0, 1))], vec![cq(0, 0), cq(1, 0)]];
        let jd = jordanize(&a, &[cq(1, 0), cq(1, 0)]).unwrap();
        assert!(jd.j[0][1].is_one());
        let ap = mat_mul(&a, &jd.p);
        let pj = mat_mul(&jd.p, &jd.j);
        assert_eq!(ap, pj);

        // [[2,1,0],[0,2,0],[0,0,1]] passes through (already Jordan)
        let b: Vec<Vec<CQ>> = vec![
            vec![cq(2, 0), cq(1, 0), cq(0, 0)],
            vec![cq(0, 0), cq(2, 0), cq(0, 0)],
            vec![cq(0, 0), cq(0, 0), cq(1, 0)],
        ];
        let jd = jordanize(&b, &[cq(1, 0), cq(2, 0), cq(2, 0)]).unwrap();
        assert_eq!(jd.j, b);
        assert_eq!(jd.superdiagonal, vec![true, false]);
    }

    fn conjugacy_residual<C: Scalar>(
        original: &GermPoly<C>,
        nf: &NormalForm<C>,
        max_deg: u32,
    ) -> f64 {
        let f = PolyMap::from_germ(original);
        let g = PolyMap::from_germ(&nf.normal);
        let jac = nf.forward.jacobian();
        let lhs = jac_apply(&jac, &g.components, max_deg);
        let rhs: Vec<_> = (0..f.n())
            .map(|i| substitute(&f.components[i], &nf.forward.components, max_deg))
            .collect();
        let mut worst = 0.0f64;
        for (a, b) in lhs.iter().zip(&rhs) {
            let diff = a.add(&b.scaled(&-C::one()));
            for (_, v) in diff.terms {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    #[test]
    fn eliminates_non_resonant_monomial_and_keeps_resonant_one() {
        // eigenvalues (2,1): xy is non-resonant in component 1, y^2 is resonant
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 0.0, Some(("2", "0"))),
            (1, &[1, 1], 1.0, 0.0, Some(("1", "0"))),
            (1, &[0, 2], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let g = germ.to_exact().unwrap();
        let nf = poincare_dulac(&g, &[cq(1, 0), cq(2, 0)], 4).unwrap();
        // diag(2,1) is already Jordan, so coordinates are kept: x is coordinate 0
        assert!(nf.normal.terms.contains_key(&(0, vec![0, 2])));
        assert!(!nf.normal.terms.contains_key(&(0, vec![1, 1])));
        assert_eq!(nf.resonant_support, vec![(0, vec![0, 2])]);
        // algebraic conjugacy: Dh G = F o h modulo degree > 4, exactly
        assert_eq!(conjugacy_residual(&g, &nf, 4), 0.0);
    }

    #[test]
    fn normal_form_is_a_fixed_point() {
        // F_2 = (2x + y^2, y) is already normal; change must be the identity
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 0.0, Some(("2", "0"))),
            (1, &[0, 2], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let g = germ.to_exact().unwrap();
        let nf = poincare_dulac(&g, &[cq(1, 0), cq(2, 0)], 3).unwrap();
        assert_eq!(PolyMap::from_germ(&nf.normal), PolyMap::from_germ(&g));
        assert_eq!(nf.forward, PolyMap::<CQ>::identity(2));
        assert_eq!(nf.inverse, PolyMap::<CQ>::identity(2));
    }

    #[test]
    fn every_surviving_monomial_is_resonant() {
        // perturbation of diag(3,1) carrying the resonant y^3 monomial
        let text = germ_json(&[
            (1, &[1, 0], 3.0, 0.0, Some(("3", "0"))),
            (1, &[2, 0], 1.0, 0.0, Some(("1", "0"))),
            (1, &[1, 1], -2.0, 0.0, Some(("-2", "0"))),
            (1, &[0, 2], 5.0, 0.0, Some(("5", "0"))),
            (1, &[0, 3], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
            (2, &[2, 0], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 2], -1.0, 0.0, Some(("-1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let nfg = poincare_dulac_germ(&germ, None).unwrap();
        assert!(nfg.exact);
        // coordinates are kept (diag(3,1) is already Jordan)
        let lambda = [cq(3, 0), cq(1, 0)];
        for (i, m) in nfg.normal.terms.keys() {
            if total_degree(m) >= 2 {
                assert!(is_resonant_key(&(*i, m.clone()), &lambda), "({i}, {m:?})");
            }
        }
        // eigenvalue ratio 3: only y^3 in the x-component can survive
        assert_eq!(nfg.resonant_support, vec![(0, vec![0, 3])]);
    }

    #[test]
    fn jordan_block_elimination_terminates() {
        // defective linear part with a quadratic term; lambda = (1,1)
        let text = germ_json(&[
            (1, &[1, 0], 1.0, 0.0, Some(("1", "0"))),
            (1, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
            (2, &[2, 0], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let g = germ.to_exact().unwrap();
        let nf = poincare_dulac(&g, &[cq(1, 0), cq(1, 0)], 3).unwrap();
        // no degree-2 monomial is resonant for lambda = (1,1)
        assert!(nf.resonant_support.is_empty());
        assert_eq!(conjugacy_residual(&g, &nf, 3), 0.0);
    }

    #[test]
    fn numeric_flow_conjugacy() {
        // numeric path on the (2,1) example; verify by integrating both flows
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 0.0, None),
            (1, &[1, 1], 1.0, 0.0, None),
            (1, &[0, 2], 1.0, 0.0, None),
            (2, &[0, 1], 1.0, 0.0, None),
        ]);
        let germ = parse_germ(&text).unwrap();
        let g = germ.to_numeric();
        let nf = poincare_dulac(&g, &[c(1.0, 0.0), c(2.0, 0.0)], 8).unwrap();
        let f_map = PolyMap::from_germ(&g);
        let g_map = PolyMap::from_germ(&nf.normal);

        let rk4 = |field: &PolyMap<C64>, z0: &[C64]| -> Vec<C64> {
            let steps = 200;
            let h = 1.0 / steps as f64;
            let mut z = z0.to_vec();
            for _ in 0..steps {
                let k1 = field.evaluate(&z);
                let z2: Vec<C64> = z.iter().zip(&k1).map(|(a, b)| a + b * (h / 2.0)).collect();
                let k2 = field.evaluate(&z2);
                let z3: Vec<C64> = z.iter().zip(&k2).map(|(a, b)| a + b * (h / 2.0)).collect();
                let k3 = field.evaluate(&z3);
                let z4: Vec<C64> = z.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
                let k4 = field.evaluate(&z4);
                z = z
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
                    .collect();
            }
            z
        };

        let w0 = vec![c(0.03, 0.01), c(0.02, -0.04)];
        let z0 = nf.forward.evaluate(&w0);
        let w1 = rk4(&g_map, &w0);
        let z1 = rk4(&f_map, &z0);
        let h_w1 = nf.forward.evaluate(&w1);
        // truncation-aware tolerance: 1e-6 + O(r^{N+1}) with r = 0.05, N = 8
        let tol = 1e-6 + 100.0 * 0.05f64.powi(9);
        for (a, b) in h_w1.iter().zip(&z1) {
            assert!((a - b).norm() < tol, "flow mismatch {a} vs {b}");
        }
    }

    #[test]
    fn idempotence_of_reduction() {
        let text = germ_json(&[
            (1, &[1, 0], 3.0, 0.0, Some(("3", "0"))),
            (1, &[1, 1], -2.0, 0.0, Some(("-2", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
            (2, &[2, 0], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let nf1 = poincare_dulac_germ(&germ, Some(4)).unwrap();
        let nf2 = poincare_dulac_germ(&nf1.normal, Some(4)).unwrap();
        assert_eq!(nf2.normal.terms, nf1.normal.terms);
        let id = PolyMap::<CQ>::identity(2);
        assert_eq!(PolyMap::from_germ(&nf2.forward.to_exact().unwrap()), id);
    }

    #[test]
    fn superdiagonal_normalization_examples() {
        // [[1,1],[0,1]]: c = 1, n = 2, entry becomes 1/4
        let text = germ_json(&[
            (1, &[1, 0], 1.0, 0.0, Some(("1", "0"))),
            (1, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let norm = normalize_superdiagonal(&germ).unwrap();
        let sup = norm.terms.get(&(0, vec![0, 1])).unwrap();
        assert_eq!(sup.to_cq().unwrap(), Complex::new(rat(1, 4), rat(0, 1)));

        // diagonal germ unchanged
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 0.0, Some(("2", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        assert_eq!(normalize_superdiagonal(&germ).unwrap().terms, germ.terms);

        // [[2,1,0],[0,2,0],[0,0,1]]: c = 1, n = 3, entry becomes 1/6
        let text = germ_json(&[
            (1, &[1, 0, 0], 2.0, 0.0, Some(("2", "0"))),
            (1, &[0, 1, 0], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1, 0], 2.0, 0.0, Some(("2", "0"))),
            (3, &[0, 0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let germ = parse_germ(&text).unwrap();
        let norm = normalize_superdiagonal(&germ).unwrap();
        let sup = norm.terms.get(&(0, vec![0, 1, 0])).unwrap();
        assert_eq!(sup.to_cq().unwrap(), Complex::new(rat(1, 6), rat(0, 1)));
        // spectrum preserved
        let s1 = spectrum_of_germ(&germ).unwrap();
        let s2 = spectrum_of_germ(&norm).unwrap();
        for (a, b) in s1.eigenvalues.iter().zip(&s2.eigenvalues) {
            assert_eq!(a.exact, b.exact);
        }
    }

    #[test]
    fn canonical_types() {
        // type 1: eigenvalues (2+i, 1)
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 1.0, Some(("2", "1"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let cf = canonical_form_2d(&parse_germ(&text).unwrap()).unwrap();
        assert_eq!(cf.typ, 1);
        assert!((cf.lambda - c(2.0, 1.0)).norm() < 1e-12);

        // type 3: (2x + y^2, y)
        let text = germ_json(&[
            (1, &[1, 0], 2.0, 0.0, Some(("2", "0"))),
            (1, &[0, 2], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let cf = canonical_form_2d(&parse_germ(&text).unwrap()).unwrap();
        assert_eq!(cf.typ, 3);
        assert_eq!(cf.m, Some(2));
        assert_eq!(cf.resonant_coeff, Some(c(1.0, 0.0)));

        // type 2 after swap: diag(1,3) with no resonant term
        let text = germ_json(&[
            (1, &[1, 0], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], 3.0, 0.0, Some(("3", "0"))),
        ]);
        let cf = canonical_form_2d(&parse_germ(&text).unwrap()).unwrap();
        assert_eq!(cf.typ, 2);
        assert_eq!(cf.lambda_exact.unwrap(), cq(3, 0));

        // type 4: Jordan block at 1 (with a non-unit superdiagonal entry)
        let text = germ_json(&[
            (1, &[1, 0], 1.0, 0.0, Some(("1", "0"))),
            (1, &[0, 1], 0.25, 0.0, Some(("1/4", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let cf = canonical_form_2d(&parse_germ(&text).unwrap()).unwrap();
        assert_eq!(cf.typ, 4);
        assert_eq!(cf.m, Some(1));
        let sup = cf.germ.terms.get(&(0, vec![0, 1])).unwrap();
        assert_eq!(sup.to_cq().unwrap(), Complex::new(rat(1, 4), rat(0, 1)));
    }

    #[test]
    fn canonical_rejects_bad_inputs() {
        let text = germ_json(&[
            (1, &[1, 0], 1.0, 0.0, Some(("1", "0"))),
            (2, &[0, 1], -1.0, 0.0, Some(("-1", "0"))),
        ]);
        assert!(matches!(
            canonical_form_2d(&parse_germ(&text).unwrap()),
            Err(NormalFormError::NotPoincare)
        ));
    }

    #[test]
    fn degree_bound_matches_resonance_reach() {
        // lambda = (3,1): c = 1, max|lambda| = 3, bound 3 covers the y^3 resonance
        let text = germ_json(&[
            (1, &[1, 0], 3.0, 0.0, Some(("3", "0"))),
            (2, &[0, 1], 1.0, 0.0, Some(("1", "0"))),
        ]);
        let spec = spectrum_of_germ(&parse_germ(&text).unwrap()).unwrap();
        assert_eq!(default_degree_bound(&spec), 3);
    }
}
