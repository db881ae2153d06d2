//! Linear part extraction, eigenvalues (exact where possible), the Poincaré
//! domain test with its distance constant, and ray configurations.

use crate::germ::{Germ, GermPoly};
use crate::scalar::{gaussian_sqrt, rational_sqrt, rational_to_f64, Scalar, C64, CQ};
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub const MAX_DIMENSION: usize = 8;
/// Tolerance on normalized cross products for numeric ray membership.
pub const RAY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("dimension {0} exceeds the supported maximum {MAX_DIMENSION}")]
    TooLarge(usize),
    #[error("numeric eigenvalue iteration did not converge (residual {0:.3e})")]
    NoConvergence(f64),
    #[error("spectrum is not of Poincaré type")]
    NotPoincare,
}

/// One eigenvalue, with its exact value when the computation stayed rational.
#[derive(Debug, Clone)]
pub struct Eig {
    pub value: C64,
    pub exact: Option<CQ>,
}

impl Eig {
    pub fn numeric(value: C64) -> Self {
        Eig { value, exact: None }
    }

    pub fn exact(value: CQ) -> Self {
        Eig { value: value.to_c64(), exact: Some(value) }
    }
}

/// Eigenvalues of the linear part with Poincaré data.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ordered by increasing argument in [0, 2pi), then modulus.
    pub eigenvalues: Vec<Eig>,
    pub poincare: bool,
    /// Distance of the convex hull of the eigenvalues from 0 (0 if not Poincaré).
    pub c: f64,
    /// Exact value of c when the squared distance is a rational square.
    pub c_exact: Option<BigRational>,
    /// Superdiagonal pattern of the Jordan form, one flag per position i -> i+1.
    pub jordan_superdiagonal: Vec<bool>,
    /// Whether the eigenvalues are exact Gaussian rationals.
    pub exact: bool,
    /// Residual bound reported by the numeric solver (0 on the exact path).
    pub residual: f64,
}

/// Degree-1 truncation of a germ as an n x n matrix; A[i][j] = coeff of z_j in f_i.
pub fn linear_part<C: Scalar>(germ: &GermPoly<C>) -> Vec<Vec<C>> {
    let n = germ.dimension;
    let mut a = vec![vec![C::zero(); n]; n];
    for ((i, m), c) in &germ.terms {
        if m.iter().map(|&e| e as u32).sum::<u32>() == 1 {
            let j = m.iter().position(|&e| e == 1).unwrap();
            a[*i][j] = c.clone();
        }
    }
    a
}

// ---- exact eigenvalues -------------------------------------------------------

fn is_triangular(a: &[Vec<CQ>]) -> bool {
    let n = a.len();
    let upper = (0..n).all(|i| (0..i).all(|j| a[i][j].is_zero()));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| a[i][j].is_zero()));
    upper || lower
}

/// Exact eigenvalues: triangular matrices of any size, or n <= 2 via the
/// quadratic formula when the discriminant is a square in Q(i).
pub fn eigenvalues_exact(a: &[Vec<CQ>]) -> Option<Vec<CQ>> {
    let n = a.len();
    if is_triangular(a) {
        return Some((0..n).map(|i| a[i][i].clone()).collect());
    }
    if n == 2 {
        let tr = a[0][0].clone() + a[1][1].clone();
        let det = a[0][0].clone() * a[1][1].clone() - a[0][1].clone() * a[1][0].clone();
        let disc = tr.clone() * tr.clone() - CQ::from_int(4) * det;
        let s = gaussian_sqrt(&disc)?;
        let two = CQ::from_int(2);
        return Some(vec![
            (tr.clone() + s.clone()) / two.clone(),
            (tr - s) / two,
        ]);
    }
    None
}

// ---- numeric eigenvalues -----------------------------------------------------

/// Characteristic polynomial coefficients of A (monic, c[k] multiplies lambda^k)
/// by the Faddeev–LeVerrier recursion.
fn char_poly(a: &[Vec<C64>]) -> Vec<C64> {
    let n = a.len();
    let mut coeffs = vec![Complex::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex::new(1.0, 0.0);
    let mut m = vec![vec![Complex::new(0.0, 0.0); n]; n]; // M_0 = 0
    let mut c_prev = Complex::new(1.0, 0.0);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut mk = vec![vec![Complex::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex::new(0.0, 0.0);
                for l in 0..n {
                    s += a[i][l] * m[l][j];
                }
                mk[i][j] = s;
            }
            mk[i][i] += c_prev;
        }
        // c_{n-k} = -tr(A M_k) / k
        let mut tr = Complex::new(0.0, 0.0);
        for i in 0..n {
            for l in 0..n {
                tr += a[i][l] * mk[l][i];
            }
        }
        let ck = -tr / (k as f64);
        coeffs[n - k] = ck;
        c_prev = ck;
        m = mk;
    }
    coeffs
}

fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    let mut v = Complex::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        v = v * z + c;
    }
    v
}

/// Durand–Kerner root finding with Newton polish; returns roots and a residual bound.
pub fn eigenvalues_numeric(a: &[Vec<C64>]) -> Result<(Vec<C64>, f64), SpectralError> {
    let n = a.len();
    if n > MAX_DIMENSION {
        return Err(SpectralError::TooLarge(n));
    }
    let coeffs = char_poly(a);
    let scale = 1.0
        + coeffs
            .iter()
            .take(n)
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..n).map(|k| seed.powu(k as u32 + 1) * scale).collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for k in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    denom *= roots[k] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = poly_eval(&coeffs, roots[k]) / denom;
            roots[k] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 * scale {
            break;
        }
    }
    // Newton polish (helps simple roots; harmless elsewhere)
    let deriv: Vec<C64> = (1..=n)
        .map(|k| coeffs[k] * (k as f64))
        .collect();
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let p = poly_eval(&coeffs, *r);
            let d = poly_eval(&deriv, *r);
            if d.norm() < 1e-14 {
                break;
            }
            let step = p / d;
            if step.norm() > 1e-3 * scale {
                break;
            }
            *r -= step;
        }
    }
    let residual = roots
        .iter()
        .map(|&r| poly_eval(&coeffs, r).norm())
        .fold(0.0f64, f64::max);
    if !residual.is_finite() || residual > 1e-6 * scale.powi(n as i32) {
        return Err(SpectralError::NoConvergence(residual));
    }
    Ok((roots, residual))
}

// ---- spectrum assembly --------------------------------------------------------

fn arg_in_2pi(z: C64) -> f64 {
    let a = z.arg();
    if a < -1e-15 {
        a + std::f64::consts::TAU
    } else if a < 0.0 {
        0.0
    } else {
        a
    }
}

fn sort_eigs(eigs: &mut [Eig]) {
    eigs.sort_by(|a, b| {
        let (aa, ab) = (arg_in_2pi(a.value), arg_in_2pi(b.value));
        let key = if (aa - ab).abs() < 1e-12 {
            a.value.norm().partial_cmp(&b.value.norm())
        } else {
            aa.partial_cmp(&ab)
        };
        key.unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Spectrum of a germ: exact eigenvalues when the linear part allows it,
/// numeric otherwise.
pub fn spectrum_of_germ(germ: &Germ) -> Result<Spectrum, SpectralError> {
    let n = germ.dimension;
    if n > MAX_DIMENSION {
        return Err(SpectralError::TooLarge(n));
    }
    let exact_attempt = germ
        .to_exact()
        .map(|g| linear_part(&g))
        .and_then(|a| eigenvalues_exact(&a));
    let (mut eigs, exact, residual) = match exact_attempt {
        Some(vals) => (
            vals.into_iter().map(Eig::exact).collect::<Vec<_>>(),
            true,
            0.0,
        ),
        None => {
            let a = linear_part(&germ.to_numeric());
            let (roots, residual) = eigenvalues_numeric(&a)?;
            (roots.into_iter().map(Eig::numeric).collect(), false, residual)
        }
    };
    sort_eigs(&mut eigs);
    let (poincare, c, c_exact) = poincare_check(&eigs);
    Ok(Spectrum {
        eigenvalues: eigs,
        poincare,
        c,
        c_exact,
        jordan_superdiagonal: vec![],
        exact,
        residual,
    })
}

pub fn spectrum_from_eigs(mut eigs: Vec<Eig>, exact: bool) -> Spectrum {
    sort_eigs(&mut eigs);
    let (poincare, c, c_exact) = poincare_check(&eigs);
    Spectrum {
        eigenvalues: eigs,
        poincare,
        c,
        c_exact,
        jordan_superdiagonal: vec![],
        exact,
        residual: 0.0,
    }
}

// ---- Poincaré check ------------------------------------------------------------

/// Poincaré test and hull distance. Returns (poincare, c, exact c when rational).
///
/// Exact inputs get exact hull predicates; numeric inputs use f64 arithmetic.
pub fn poincare_check(eigs: &[Eig]) -> (bool, f64, Option<BigRational>) {
    if eigs.is_empty() {
        return (false, 0.0, None);
    }
    if eigs.iter().all(|e| e.exact.is_some()) {
        let pts: Vec<(BigRational, BigRational)> = eigs
            .iter()
            .map(|e| {
                let v = e.exact.as_ref().unwrap();
                (v.re.clone(), v.im.clone())
            })
            .collect();
        let (outside, d2) = hull_distance_exact(&pts);
        if !outside {
            return (false, 0.0, None);
        }
        let c_exact = rational_sqrt(&d2);
        let c = match &c_exact {
            Some(r) => rational_to_f64(r),
            None => rational_to_f64(&d2).sqrt(),
        };
        (true, c, c_exact)
    } else {
        let pts: Vec<(f64, f64)> = eigs.iter().map(|e| (e.value.re, e.value.im)).collect();
        let (outside, d2) = hull_distance_f64(&pts);
        if !outside {
            return (false, 0.0, None);
        }
        (true, d2.sqrt(), None)
    }
}

// Convex hull (monotone chain) and origin distance, rational arithmetic.
// The origin is outside the hull iff it is not strictly inside the hull
// polygon and its distance to the hull boundary is positive.
fn hull_distance_exact(pts: &[(BigRational, BigRational)]) -> (bool, BigRational) {
    let zero = BigRational::zero();
    let hull = monotone_chain(pts, |o, a, b| {
        let v = (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0);
        if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        }
    });
    let m = hull.len();
    let strictly_inside = m >= 3
        && (0..m).all(|i| {
            let a = &hull[i];
            let b = &hull[(i + 1) % m];
            // sign of cross(b - a, 0 - a) = cross(a, b) by bilinearity
            (&a.0 * &b.1 - &a.1 * &b.0).is_positive()
        });
    if strictly_inside {
        return (false, zero);
    }
    let mut best: Option<BigRational> = None;
    for i in 0..m {
        let a = &hull[i];
        let b = &hull[(i + 1) % m.max(1)];
        let d2 = segment_origin_dist2_exact(a, b);
        best = Some(match best {
            Some(cur) if cur <= d2 => cur,
            _ => d2,
        });
    }
    let d2 = best.unwrap_or(zero.clone());
    if d2.is_zero() {
        (false, zero)
    } else {
        (true, d2)
    }
}

fn segment_origin_dist2_exact(
    a: &(BigRational, BigRational),
    b: &(BigRational, BigRational),
) -> BigRational {
    let dx = &b.0 - &a.0;
    let dy = &b.1 - &a.1;
    let len2 = &dx * &dx + &dy * &dy;
    let a2 = &a.0 * &a.0 + &a.1 * &a.1;
    if len2.is_zero() {
        return a2;
    }
    // projection parameter of 0 onto the segment
    let t = -(&a.0 * &dx + &a.1 * &dy) / &len2;
    let zero = BigRational::zero();
    let one = BigRational::one();
    let t = if t < zero {
        zero
    } else if t > one {
        one
    } else {
        t
    };
    let px = &a.0 + &t * &dx;
    let py = &a.1 + &t * &dy;
    &px * &px + &py * &py
}

fn hull_distance_f64(pts: &[(f64, f64)]) -> (bool, f64) {
    let hull = monotone_chain(pts, |o, a, b| {
        let v = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    });
    let m = hull.len();
    let strictly_inside = m >= 3 && (0..m).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % m];
        a.0 * b.1 - a.1 * b.0 > 0.0
    });
    if strictly_inside {
        return (false, 0.0);
    }
    let mut best = f64::INFINITY;
    for i in 0..m {
        let (ax, ay) = hull[i];
        let (bx, by) = hull[(i + 1) % m.max(1)];
        let dx = bx - ax;
        let dy = by - ay;
        let len2 = dx * dx + dy * dy;
        let d2 = if len2 == 0.0 {
            ax * ax + ay * ay
        } else {
            let t = (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0);
            let px = ax + t * dx;
            let py = ay + t * dy;
            px * px + py * py
        };
        best = best.min(d2);
    }
    if !(best > 0.0) {
        (false, 0.0)
    } else {
        (true, best)
    }
}

/// Monotone chain hull; `orient(o, a, b)` returns the sign of the cross product.
/// Returns the hull in counter-clockwise order (may have 1 or 2 points).
fn monotone_chain<P: Clone + PartialOrd>(
    pts: &[P],
    orient: impl Fn(&P, &P, &P) -> i32,
) -> Vec<P> {
    let mut pts: Vec<P> = pts.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|a, b| a == b);
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let mut lower: Vec<P> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && orient(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<P> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && orient(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

// ---- ray configuration ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RayConfiguration {
    /// Ordered list of index sets into the sorted eigenvalue list.
    pub partition: Vec<Vec<usize>>,
    /// Argument of the common ray of each part, in [0, 2pi), strictly increasing.
    pub angles: Vec<f64>,
}

impl RayConfiguration {
    pub fn sizes(&self) -> Vec<usize> {
        self.partition.iter().map(|p| p.len()).collect()
    }
}

/// Exact or tolerance-based test for two eigenvalues lying on the same
/// real ray from the origin.
pub fn same_ray(a: &Eig, b: &Eig) -> bool {
    if let (Some(x), Some(y)) = (&a.exact, &b.exact) {
        let cross = &x.re * &y.im - &x.im * &y.re;
        let dot = &x.re * &y.re + &x.im * &y.im;
        return cross.is_zero() && dot.is_positive();
    }
    let x = a.value;
    let y = b.value;
    let scale = x.norm() * y.norm();
    if scale == 0.0 {
        return false;
    }
    let cross = x.re * y.im - x.im * y.re;
    let dot = x.re * y.re + x.im * y.im;
    cross.abs() <= RAY_TOL * scale && dot > 0.0
}

/// Group a Poincaré spectrum's eigenvalues by shared ray, ordered by
/// increasing ray angle.
pub fn ray_configuration(eigs: &[Eig]) -> Result<RayConfiguration, SpectralError> {
    let (poincare, _, _) = poincare_check(eigs);
    if !poincare {
        return Err(SpectralError::NotPoincare);
    }
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for (i, e) in eigs.iter().enumerate() {
        match parts.iter_mut().find(|p| same_ray(&eigs[p[0]], e)) {
            Some(p) => p.push(i),
            None => parts.push(vec![i]),
        }
    }
    let mut with_angles: Vec<(f64, Vec<usize>)> = parts
        .into_iter()
        .map(|p| (arg_in_2pi(eigs[p[0]].value), p))
        .collect();
    with_angles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let angles = with_angles.iter().map(|(a, _)| *a).collect();
    let partition = with_angles.into_iter().map(|(_, p)| p).collect();
    Ok(RayConfiguration { partition, angles })
}

/// Equivalence of ray configurations: equal size sequences, possibly after
/// reversing one of them.
pub fn ray_config_equivalent(r1: &RayConfiguration, r2: &RayConfiguration) -> bool {
    let s1 = r1.sizes();
    let s2 = r2.sizes();
    if s1 == s2 {
        return true;
    }
    let mut rev = s2.clone();
    rev.reverse();
    s1 == rev
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn eq(re: i64, im: i64) -> Eig {
        Eig::exact(Complex::new(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        ))
    }

    #[test]
    fn poincare_real_segment() {
        // {2, 1}: hull is [1,2] on the real axis, distance 1
        let eigs = vec![eq(2, 0), eq(1, 0)];
        let (p, c, c_exact) = poincare_check(&eigs);
        assert!(p);
        assert_eq!(c, 1.0);
        assert_eq!(c_exact, Some(BigRational::one()));
    }

    #[test]
    fn poincare_one_i() {
        // {1, i}: distance 1/sqrt(2); oracle below minimizes |t + (1-t) i| over [0,1]
        let eigs = vec![eq(1, 0), eq(0, 1)];
        let (p, c, c_exact) = poincare_check(&eigs);
        assert!(p);
        let oracle = (0..=100_000)
            .map(|k| {
                let t = k as f64 / 100_000.0;
                Complex::new(t, 1.0 - t).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((c - oracle).abs() < 1e-9);
        assert!((c - 0.7071067811865476).abs() < 1e-15);
        assert!(c_exact.is_none()); // 1/2 is a square but sqrt(1/2) is not rational
    }

    #[test]
    fn not_poincare_opposite_reals() {
        let eigs = vec![eq(1, 0), eq(-1, 0)];
        let (p, c, _) = poincare_check(&eigs);
        assert!(!p);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn numeric_poincare_matches_exact() {
        let eigs = vec![Eig::numeric(Complex::new(2.0, 0.0)), Eig::numeric(Complex::new(1.0, 0.0))];
        let (p, c, _) = poincare_check(&eigs);
        assert!(p);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_exact_triangular() {
        let a = vec![
            vec![CQ::from_int(2), CQ::from_int(1), CQ::from_int(0)],
            vec![CQ::from_int(0), CQ::from_int(2), CQ::from_int(0)],
            vec![CQ::from_int(0), CQ::from_int(0), CQ::from_int(1)],
        ];
        let e = eigenvalues_exact(&a).unwrap();
        assert_eq!(e, vec![CQ::from_int(2), CQ::from_int(2), CQ::from_int(1)]);
    }

    #[test]
    fn eigenvalues_exact_rotation() {
        // [[0,-1],[1,0]] -> {i, -i}
        let a = vec![
            vec![CQ::from_int(0), CQ::from_int(-1)],
            vec![CQ::from_int(1), CQ::from_int(0)],
        ];
        let mut e = eigenvalues_exact(&a).unwrap();
        e.sort_by_key(|v| rational_to_f64(&v.im) as i64);
        assert!(e[0].re.is_zero() && e[1].re.is_zero());
        assert_eq!(rational_to_f64(&e[0].im), -1.0);
        assert_eq!(rational_to_f64(&e[1].im), 1.0);
    }

    #[test]
    fn eigenvalues_numeric_jordan_block() {
        let a = vec![
            vec![Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)],
            vec![Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)],
        ];
        let (roots, _res) = eigenvalues_numeric(&a).unwrap();
        for r in roots {
            assert!((r - Complex::new(1.0, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn ray_configuration_groups_and_orders() {
        // (1, 2, i) -> [[1,2],[i]]
        let eigs = vec![eq(1, 0), eq(2, 0), eq(0, 1)];
        let rc = ray_configuration(&eigs).unwrap();
        assert_eq!(rc.sizes(), vec![2, 1]);
        // (3, 1+i, 2+2i) -> [[3],[1+i,2+2i]]
        let eigs = vec![eq(3, 0), eq(1, 1), eq(2, 2)];
        let rc = ray_configuration(&eigs).unwrap();
        assert_eq!(rc.sizes(), vec![1, 2]);
        // (2+i, 1-3i) -> two singletons
        let eigs = vec![eq(2, 1), eq(1, -3)];
        let rc = ray_configuration(&eigs).unwrap();
        assert_eq!(rc.sizes(), vec![1, 1]);
    }

    #[test]
    fn ray_config_equivalence_rules() {
        let r = |sizes: Vec<usize>| RayConfiguration {
            partition: sizes.iter().map(|&s| vec![0; s]).collect(),
            angles: (0..sizes.len()).map(|k| k as f64).collect(),
        };
        assert!(ray_config_equivalent(&r(vec![2, 1]), &r(vec![1, 2])));
        assert!(ray_config_equivalent(&r(vec![2, 1]), &r(vec![2, 1])));
        assert!(!ray_config_equivalent(&r(vec![2, 1]), &r(vec![1, 1, 1])));
    }

    #[test]
    fn rejects_not_poincare_ray_config() {
        let eigs = vec![eq(1, 0), eq(-1, 0)];
        assert!(matches!(ray_configuration(&eigs), Err(SpectralError::NotPoincare)));
    }
}
