//! Topological classification: complete decision procedure in dimension 2,
//! ray-configuration oracle with partial per-ray checks in dimension >= 3.

use crate::germ::{total_degree, Germ};
use crate::normalform::{canonical_form_2d, poincare_dulac_germ, Canonical2D, NormalFormError};
use crate::scalar::CQ;
use crate::spectral::{same_ray, Eig};
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

/// Denominator cap for continued-fraction rational recognition.
pub const Q_MAX: u64 = 1_000_000;
/// Acceptance: |lambda - p/q| < CF_TOL / q^2.
pub const CF_TOL: f64 = 1e-12;
/// Numeric comparison tolerance for eigenvalue ratios.
pub const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("expected a two-dimensional germ (got n = {0})")]
    NotPlanar(usize),
    #[error("germs have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
}

// ---- rational recognition ----------------------------------------------------

/// Continued-fraction convergent evidence for lambda being rational.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalWitness {
    pub p: u64,
    pub q: u64,
    pub err: f64,
    pub accepted: bool,
}

/// Best convergent p/q with q <= Q_MAX; accepted when |x - p/q| < CF_TOL/q^2.
pub fn recognize_rational(x: f64) -> RationalWitness {
    assert!(x > 0.0 && x.is_finite());
    let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, 0u64, 1u64);
    let mut frac = x;
    let mut best = RationalWitness { p: 0, q: 1, err: f64::INFINITY, accepted: false };
    for _ in 0..64 {
        let a = frac.floor();
        if a < 0.0 || a > u64::MAX as f64 {
            break;
        }
        let a_int = a as u64;
        let (p2, q2) = (
            a_int.saturating_mul(p0).saturating_add(p1),
            a_int.saturating_mul(q0).saturating_add(q1),
        );
        if q2 > Q_MAX {
            break;
        }
        let err = (x - p2 as f64 / q2 as f64).abs();
        if err < best.err {
            best = RationalWitness { p: p2, q: q2, err, accepted: false };
        }
        if err < CF_TOL / ((q2 as f64) * (q2 as f64)) {
            return RationalWitness { p: p2, q: q2, err, accepted: true };
        }
        (p1, q1, p0, q0) = (p0, q0, p2, q2);
        let rem = frac - a;
        if rem.abs() < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
    }
    best
}

// ---- 2-D classification ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum EquivClass2D {
    Generic,
    /// Unordered coprime pair stored with p >= q.
    Rational { p: u64, q: u64 },
    /// Representative >= 1 of {lambda, 1/lambda}.
    Irrational { lambda: f64 },
    Resonant { m: u32 },
}

impl std::fmt::Display for EquivClass2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EquivClass2D::Generic => write!(f, "Generic"),
            EquivClass2D::Rational { p, q } => write!(f, "Rational({p},{q})"),
            EquivClass2D::Irrational { lambda } => write!(f, "Irrational({lambda})"),
            EquivClass2D::Resonant { m } => write!(f, "Resonant({m})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classification2D {
    pub class: EquivClass2D,
    pub canonical: Canonical2D,
    pub witness: Option<RationalWitness>,
    /// Whether the class was certified by exact arithmetic.
    pub decided_exact: bool,
}

pub fn classify_2d(germ: &Germ) -> Result<Classification2D, ClassifyError> {
    if germ.dimension != 2 {
        return Err(ClassifyError::NotPlanar(germ.dimension));
    }
    let cf = canonical_form_2d(germ)?;
    let (class, witness, decided_exact) = match cf.typ {
        1 => (EquivClass2D::Generic, None, cf.exact),
        4 => (EquivClass2D::Resonant { m: 1 }, None, true),
        3 => (EquivClass2D::Resonant { m: cf.m.unwrap() }, None, cf.exact),
        _ => match &cf.lambda_exact {
            Some(q) => {
                let p = q.re.numer().to_u64().expect("ratio >= 1 in lowest terms");
                let den = q.re.denom().to_u64().expect("ratio >= 1 in lowest terms");
                (EquivClass2D::Rational { p, q: den }, None, true)
            }
            None => {
                let w = recognize_rational(cf.lambda.re);
                let class = if w.accepted {
                    EquivClass2D::Rational { p: w.p, q: w.q }
                } else {
                    EquivClass2D::Irrational { lambda: cf.lambda.re }
                };
                (class, Some(w), false)
            }
        },
    };
    Ok(Classification2D { class, canonical: cf, witness, decided_exact })
}

// ---- equivalence decisions ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Equivalent,
    NotEquivalent,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct Equiv2D {
    pub decision: Decision,
    pub certificate: String,
    pub class1: EquivClass2D,
    pub class2: EquivClass2D,
}

pub fn equivalent_2d(g1: &Germ, g2: &Germ) -> Result<Equiv2D, ClassifyError> {
    let c1 = classify_2d(g1)?;
    let c2 = classify_2d(g2)?;
    let (decision, certificate) = match (&c1.class, &c2.class) {
        (EquivClass2D::Generic, EquivClass2D::Generic) => (
            Decision::Equivalent,
            "both non-real eigenvalue ratios form a single class".to_string(),
        ),
        (EquivClass2D::Resonant { m: m1 }, EquivClass2D::Resonant { m: m2 }) => {
            if m1 == m2 {
                (Decision::Equivalent, format!("matching resonance order m = {m1}"))
            } else {
                (Decision::NotEquivalent, format!("resonance orders differ: {m1} vs {m2}"))
            }
        }
        (EquivClass2D::Rational { p: p1, q: q1 }, EquivClass2D::Rational { p: p2, q: q2 }) => {
            if p1 == p2 && q1 == q2 {
                (Decision::Equivalent, format!("matching rational ratio ({p1},{q1})"))
            } else {
                (
                    Decision::NotEquivalent,
                    format!("rational ratios differ: ({p1},{q1}) vs ({p2},{q2})"),
                )
            }
        }
        (EquivClass2D::Irrational { lambda: l1 }, EquivClass2D::Irrational { lambda: l2 }) => {
            if (l1 - l2).abs() <= RATIO_TOL * (1.0 + l1.abs()) {
                (
                    Decision::Equivalent,
                    format!("irrational ratios agree within {RATIO_TOL:.0e}: {l1} vs {l2}"),
                )
            } else {
                (Decision::NotEquivalent, format!("irrational ratios differ: {l1} vs {l2}"))
            }
        }
        (a, b) => {
            // a rational/irrational mismatch near the same value is a numeric
            // rationality question we cannot certify
            let near = matches!(
                (a, b),
                (EquivClass2D::Rational { .. }, EquivClass2D::Irrational { .. })
                    | (EquivClass2D::Irrational { .. }, EquivClass2D::Rational { .. })
            ) && (c1.canonical.lambda.re - c2.canonical.lambda.re).abs()
                <= RATIO_TOL * (1.0 + c1.canonical.lambda.re.abs());
            if near {
                (
                    Decision::Unknown,
                    format!(
                        "rationality undecided on the numeric path: {} vs {} at lambda ~ {}",
                        a, b, c1.canonical.lambda.re
                    ),
                )
            } else {
                (Decision::NotEquivalent, format!("classes differ: {a} vs {b}"))
            }
        }
    };
    Ok(Equiv2D { decision, certificate, class1: c1.class, class2: c2.class })
}

// ---- n-dimensional oracle --------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NdVerdict {
    pub result: Decision,
    pub reasons: Vec<String>,
}

fn coordinate_eigs(normal: &Germ) -> Vec<Eig> {
    let n = normal.dimension;
    (0..n)
        .map(|i| {
            let mut e = vec![0u16; n];
            e[i] = 1;
            let c = normal.terms.get(&(i, e)).expect("Jordan diagonal entry");
            match c.to_cq() {
                Some(q) => Eig::exact(q),
                None => Eig::numeric(c.to_c64()),
            }
        })
        .collect()
}

/// Coordinate indices of a normal form grouped by shared eigenvalue ray,
/// ordered by increasing ray angle in [0, 2pi).
fn ray_parts(eigs: &[Eig]) -> Vec<Vec<usize>> {
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for (i, e) in eigs.iter().enumerate() {
        match parts.iter_mut().find(|p| same_ray(&eigs[p[0]], e)) {
            Some(p) => p.push(i),
            None => parts.push(vec![i]),
        }
    }
    let angle = |z: num_complex::Complex<f64>| -> f64 {
        let a = z.arg();
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    };
    parts.sort_by(|a, b| {
        angle(eigs[a[0]].value)
            .partial_cmp(&angle(eigs[b[0]].value))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    parts
}

/// Restriction of a normal form to the coordinate subspace of `part`
/// (coordinates outside the part set to 0), reindexed to dimension |part|.
fn restrict_to_part(normal: &Germ, part: &[usize]) -> Germ {
    let k = part.len();
    let terms: Vec<_> = normal
        .terms
        .iter()
        .filter(|((i, m), _)| {
            part.contains(i)
                && m.iter()
                    .enumerate()
                    .all(|(j, &e)| e == 0 || part.contains(&j))
        })
        .map(|((i, m), c)| {
            let new_i = part.iter().position(|&p| p == *i).unwrap() + 1;
            let new_m: Vec<u16> = part.iter().map(|&p| m[p]).collect();
            (new_i, new_m, c.clone())
        })
        .collect();
    Germ::from_terms(k, terms).expect("restriction keeps the diagonal linear part")
}

fn is_diagonal_linear(g: &Germ) -> bool {
    g.terms.keys().all(|(i, m)| {
        total_degree(m) == 1 && m[*i] == 1
    })
}

/// Holomorphic equivalence of two single-ray diagonal linear germs: eigenvalue
/// tuples must match up to permutation and one common scalar.
fn diagonal_ray_equivalent(g1: &Germ, g2: &Germ) -> Decision {
    let e1 = coordinate_eigs(g1);
    let e2 = coordinate_eigs(g2);
    // same ray: ratios to the first eigenvalue are positive reals
    let ratios = |e: &[Eig]| -> Option<Vec<CQ>> {
        let base = e[0].exact.as_ref()?;
        let den = &base.re * &base.re + &base.im * &base.im;
        e.iter()
            .map(|x| {
                let q = x.exact.as_ref()?;
                Some(num_complex::Complex::new(
                    (&q.re * &base.re + &q.im * &base.im) / &den,
                    (&q.im * &base.re - &q.re * &base.im) / &den,
                ))
            })
            .collect()
    };
    match (ratios(&e1), ratios(&e2)) {
        (Some(mut r1), Some(mut r2)) => {
            let key = |v: &CQ| v.re.clone();
            r1.sort_by(|a, b| key(a).cmp(&key(b)));
            r2.sort_by(|a, b| key(a).cmp(&key(b)));
            if r1 == r2 {
                Decision::Equivalent
            } else {
                Decision::NotEquivalent
            }
        }
        _ => {
            let mut r1: Vec<f64> = e1.iter().map(|x| x.value.norm() / e1[0].value.norm()).collect();
            let mut r2: Vec<f64> = e2.iter().map(|x| x.value.norm() / e2[0].value.norm()).collect();
            r1.sort_by(|a, b| a.partial_cmp(b).unwrap());
            r2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ok = r1
                .iter()
                .zip(&r2)
                .all(|(a, b)| (a - b).abs() <= RATIO_TOL * (1.0 + a.abs()));
            if ok {
                Decision::Equivalent
            } else {
                Decision::NotEquivalent
            }
        }
    }
}

/// Holomorphic equivalence of matched single-ray restrictions, where decidable.
fn part_equivalent(r1: &Germ, r2: &Germ, reasons: &mut Vec<String>, label: &str) -> Decision {
    if r1.dimension == 1 && r2.dimension == 1 {
        reasons.push(format!("{label}: singleton rays are always equivalent"));
        return Decision::Equivalent;
    }
    if is_diagonal_linear(r1) && is_diagonal_linear(r2) {
        let d = diagonal_ray_equivalent(r1, r2);
        reasons.push(format!(
            "{label}: diagonal linear restrictions compared up to scaling ({d:?})"
        ));
        return d;
    }
    if r1.dimension == 2 && r2.dimension == 2 {
        match (canonical_form_2d(r1), canonical_form_2d(r2)) {
            (Ok(c1), Ok(c2)) => {
                let same_type = c1.typ == c2.typ;
                let same_lambda = match (&c1.lambda_exact, &c2.lambda_exact) {
                    (Some(a), Some(b)) => a == b,
                    _ => {
                        (c1.lambda - c2.lambda).norm()
                            <= RATIO_TOL * (1.0 + c1.lambda.norm())
                    }
                };
                let d = if same_type && same_lambda && c1.m == c2.m {
                    Decision::Equivalent
                } else {
                    Decision::NotEquivalent
                };
                reasons.push(format!(
                    "{label}: planar canonical forms type {} vs {} at ratios {} vs {} ({d:?})",
                    c1.typ, c2.typ, c1.lambda, c2.lambda
                ));
                return d;
            }
            _ => {
                reasons.push(format!("{label}: planar canonical form unavailable"));
                return Decision::Unknown;
            }
        }
    }
    reasons.push(format!(
        "{label}: no equivalence test for rays of size {} with nonlinear terms",
        r1.dimension
    ));
    Decision::Unknown
}

/// Equivalence oracle for n >= 2 based on ray configurations and per-ray
/// holomorphic comparisons of the complete normal forms.
pub fn conjectured_equivalent_nd(g1: &Germ, g2: &Germ) -> Result<NdVerdict, ClassifyError> {
    if g1.dimension != g2.dimension {
        return Ok(NdVerdict {
            result: Decision::NotEquivalent,
            reasons: vec![format!(
                "dimensions differ: {} vs {}",
                g1.dimension, g2.dimension
            )],
        });
    }
    let nf1 = poincare_dulac_germ(g1, None)?;
    let nf2 = poincare_dulac_germ(g2, None)?;
    let e1 = coordinate_eigs(&nf1.normal);
    let e2 = coordinate_eigs(&nf2.normal);
    let parts1 = ray_parts(&e1);
    let parts2 = ray_parts(&e2);
    let sizes1: Vec<usize> = parts1.iter().map(|p| p.len()).collect();
    let sizes2: Vec<usize> = parts2.iter().map(|p| p.len()).collect();
    let mut reasons = vec![format!(
        "ray configuration sizes: {sizes1:?} vs {sizes2:?}"
    )];
    let mut matchings: Vec<Vec<Vec<usize>>> = Vec::new();
    if sizes1 == sizes2 {
        matchings.push(parts2.clone());
    }
    let rev_sizes: Vec<usize> = sizes2.iter().rev().cloned().collect();
    if sizes1 == rev_sizes && sizes1.len() > 1 {
        matchings.push(parts2.iter().rev().cloned().collect());
    }
    if matchings.is_empty() {
        reasons.push("ray configurations are inequivalent".to_string());
        return Ok(NdVerdict { result: Decision::NotEquivalent, reasons });
    }
    if sizes1.iter().all(|&s| s == 1) {
        reasons.push(
            "all eigenvalues pairwise R-linearly independent: configurations decide".to_string(),
        );
        return Ok(NdVerdict { result: Decision::Equivalent, reasons });
    }
    let mut any_unknown = false;
    for (mi, matching) in matchings.iter().enumerate() {
        let mut all_eq = true;
        let mut unknown = false;
        for (pi, (p1, p2)) in parts1.iter().zip(matching).enumerate() {
            let r1 = restrict_to_part(&nf1.normal, p1);
            let r2 = restrict_to_part(&nf2.normal, p2);
            let label = format!("matching {mi}, ray {pi}");
            match part_equivalent(&r1, &r2, &mut reasons, &label) {
                Decision::Equivalent => {}
                Decision::NotEquivalent => {
                    all_eq = false;
                }
                Decision::Unknown => {
                    unknown = true;
                }
            }
        }
        if all_eq && !unknown {
            reasons.push(format!("matching {mi}: every ray pair equivalent"));
            return Ok(NdVerdict { result: Decision::Equivalent, reasons });
        }
        if unknown {
            any_unknown = true;
        }
    }
    if any_unknown {
        reasons.push("some per-ray check was undecided".to_string());
        return Ok(NdVerdict { result: Decision::Unknown, reasons });
    }
    reasons.push("every candidate matching has an inequivalent ray pair".to_string());
    Ok(NdVerdict { result: Decision::NotEquivalent, reasons })
}

/// No two eigenvalues on a common real ray.
pub fn pairwise_r_independent(eigs: &[Eig]) -> bool {
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            if same_ray(&eigs[i], &eigs[j]) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::germ::Coefficient;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::Zero;

    fn qc(n: i64, d: i64) -> Coefficient {
        Coefficient::from_exact(
            BigRational::new(BigInt::from(n), BigInt::from(d)),
            BigRational::zero(),
        )
    }

    fn qci(re: i64, im: i64) -> Coefficient {
        Coefficient::from_exact(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        )
    }

    fn linear2(a: Coefficient, b: Coefficient) -> Germ {
        Germ::from_terms(2, [(1, vec![1, 0], a), (2, vec![0, 1], b)]).unwrap()
    }

    fn f_m(m: u16) -> Germ {
        Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qc(m as i64, 1)),
                (1, vec![0, m], qc(1, 1)),
                (2, vec![0, 1], qc(1, 1)),
            ],
        )
        .unwrap()
    }

    proptest::proptest! {
        /// Every exact fraction within the search bound is recovered in
        /// lowest terms, and scaling both eigenvalues by the same positive
        /// rational never changes the classification.
        #[test]
        fn rational_recognition_roundtrip(p in 1i64..=1000, q in 1i64..=1000) {
            let w = recognize_rational(p as f64 / q as f64);
            proptest::prop_assert!(w.accepted);
            fn gcd(a: i64, b: i64) -> i64 {
                if b == 0 { a } else { gcd(b, a % b) }
            }
            let g = gcd(p, q);
            proptest::prop_assert_eq!((w.p, w.q), ((p / g) as u64, (q / g) as u64));
        }

        #[test]
        fn classification_scale_invariant(
            a in 1i64..=9, b in 1i64..=9, s_n in 1i64..=5, s_d in 1i64..=5,
        ) {
            let base = classify_2d(&linear2(qci(a, 1), qci(b, 0))).unwrap();
            let scaled = classify_2d(&linear2(
                Coefficient::from_exact(q(a * s_n, s_d), q(s_n, s_d)),
                Coefficient::from_exact(q(b * s_n, s_d), BigRational::zero()),
            ))
            .unwrap();
            proptest::prop_assert_eq!(base.class, scaled.class);
        }
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn continued_fractions_recognize_rationals_only() {
        let w = recognize_rational(2.0 / 3.0);
        assert!(w.accepted);
        assert_eq!((w.p, w.q), (2, 3));
        let w = recognize_rational(std::f64::consts::SQRT_2);
        assert!(!w.accepted);
        assert!(w.q > 100); // best convergent is reported as the witness
        let w = recognize_rational(0.5 + 1e-14);
        assert!(w.accepted);
        assert_eq!((w.p, w.q), (1, 2));
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!(!recognize_rational(phi).accepted);
    }

    #[test]
    fn corpus_classes() {
        let c = classify_2d(&linear2(qci(2, 1), qci(1, 0))).unwrap();
        assert_eq!(c.class, EquivClass2D::Generic);

        let c = classify_2d(&f_m(2)).unwrap();
        assert_eq!(c.class, EquivClass2D::Resonant { m: 2 });

        let jordan = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qc(1, 1)),
                (1, vec![0, 1], qc(1, 4)),
                (2, vec![0, 1], qc(1, 1)),
            ],
        )
        .unwrap();
        let c = classify_2d(&jordan).unwrap();
        assert_eq!(c.class, EquivClass2D::Resonant { m: 1 });

        let c = classify_2d(&linear2(qc(3, 1), qc(1, 1))).unwrap();
        assert_eq!(c.class, EquivClass2D::Rational { p: 3, q: 1 });
        assert!(c.decided_exact);

        // lambda = 2/3 folds to the representative (3,2)
        let c = classify_2d(&linear2(qc(2, 1), qc(3, 1))).unwrap();
        assert_eq!(c.class, EquivClass2D::Rational { p: 3, q: 2 });

        let numeric = linear2(
            Coefficient::from_f64(std::f64::consts::SQRT_2, 0.0),
            Coefficient::from_f64(1.0, 0.0),
        );
        let c = classify_2d(&numeric).unwrap();
        assert!(matches!(c.class, EquivClass2D::Irrational { lambda } if (lambda - std::f64::consts::SQRT_2).abs() < 1e-9));
        assert!(!c.decided_exact);
        assert!(!c.witness.unwrap().accepted);
    }

    #[test]
    fn paper_equivalence_table() {
        let e = equivalent_2d(&linear2(qc(2, 1), qc(3, 1)), &linear2(qc(3, 1), qc(2, 1))).unwrap();
        assert_eq!(e.decision, Decision::Equivalent); // 2/3 vs 3/2

        let e = equivalent_2d(&f_m(2), &f_m(3)).unwrap();
        assert_eq!(e.decision, Decision::NotEquivalent);

        let e = equivalent_2d(&linear2(qci(2, 1), qci(1, 0)), &linear2(qci(1, -3), qci(1, 0)))
            .unwrap();
        assert_eq!(e.decision, Decision::Equivalent); // both Generic

        let e = equivalent_2d(&linear2(qc(2, 1), qc(1, 1)), &f_m(2)).unwrap();
        assert_eq!(e.decision, Decision::NotEquivalent); // Rational(2,1) vs Resonant(2)

        let jordan_quarter = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qc(1, 1)),
                (1, vec![0, 1], qc(1, 4)),
                (2, vec![0, 1], qc(1, 1)),
            ],
        )
        .unwrap();
        let e = equivalent_2d(&jordan_quarter, &f_m(1)).unwrap();
        assert_eq!(e.decision, Decision::Equivalent); // both Resonant(1)
    }

    #[test]
    fn classification_invariances() {
        // swap coordinates
        let g = linear2(qc(3, 1), qc(1, 1));
        let swapped = Germ::from_terms(2, [(1, vec![1, 0], qc(1, 1)), (2, vec![0, 1], qc(3, 1))])
            .unwrap();
        assert_eq!(classify_2d(&g).unwrap().class, classify_2d(&swapped).unwrap().class);

        // scalar multiple of the field
        let scaled = linear2(qc(21, 2), qc(7, 2));
        assert_eq!(classify_2d(&g).unwrap().class, classify_2d(&scaled).unwrap().class);

        // linear conjugation of F_2 by the shear (x,y) -> (x + y, y):
        // P^{-1} theta(P z) adds non-resonant junk that normal form removes
        let conj = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qc(2, 1)),
                (1, vec![0, 1], qc(1, 1)),
                (1, vec![0, 2], qc(1, 1)),
                (2, vec![0, 1], qc(1, 1)),
            ],
        )
        .unwrap();
        assert_eq!(
            classify_2d(&conj).unwrap().class,
            classify_2d(&f_m(2)).unwrap().class
        );

        // adding a non-resonant monomial does not change a Resonant class
        let perturbed = Germ::from_terms(
            2,
            [
                (1, vec![1, 0], qc(2, 1)),
                (1, vec![0, 2], qc(1, 1)),
                (1, vec![1, 1], qc(5, 1)),
                (2, vec![0, 1], qc(1, 1)),
                (2, vec![2, 0], qc(-3, 1)),
            ],
        )
        .unwrap();
        assert_eq!(
            classify_2d(&perturbed).unwrap().class,
            EquivClass2D::Resonant { m: 2 }
        );
    }

    fn diag3(a: Coefficient, b: Coefficient, c: Coefficient) -> Germ {
        Germ::from_terms(
            3,
            [
                (1, vec![1, 0, 0], a),
                (2, vec![0, 1, 0], b),
                (3, vec![0, 0, 1], c),
            ],
        )
        .unwrap()
    }

    #[test]
    fn nd_oracle_examples() {
        // diag(1,2,i) vs diag(i,1,2): sizes [2,1] both, rational ray pair matches
        let g1 = diag3(qc(1, 1), qc(2, 1), qci(0, 1));
        let g2 = diag3(qci(0, 1), qc(1, 1), qc(2, 1));
        let v = conjectured_equivalent_nd(&g1, &g2).unwrap();
        assert_eq!(v.result, Decision::Equivalent);

        // pairwise R-independent triples are equivalent outright
        let g1 = diag3(qc(1, 1), qci(2, 1), qci(1, 2));
        let g2 = diag3(qc(3, 1), qci(1, 1), qci(4, -1));
        let v = conjectured_equivalent_nd(&g1, &g2).unwrap();
        assert_eq!(v.result, Decision::Equivalent);

        // mismatched ray-size sequences
        let g1 = diag3(qc(1, 1), qc(2, 1), qci(0, 1));
        let g2 = diag3(qc(1, 1), qci(2, 1), qci(1, 2));
        let v = conjectured_equivalent_nd(&g1, &g2).unwrap();
        assert_eq!(v.result, Decision::NotEquivalent);

        // reversal of the partition order is allowed
        let g1 = diag3(qc(1, 1), qc(2, 1), qci(1, 1));
        let g2 = diag3(qci(1, 1), qci(2, 2), qc(5, 1));
        let v = conjectured_equivalent_nd(&g1, &g2).unwrap();
        assert_eq!(v.result, Decision::Equivalent);

        // same configuration, different rational ratio on the shared ray
        let g1 = diag3(qc(1, 1), qc(2, 1), qci(0, 1));
        let g2 = diag3(qc(1, 1), qc(3, 1), qci(0, 1));
        let v = conjectured_equivalent_nd(&g1, &g2).unwrap();
        assert_eq!(v.result, Decision::NotEquivalent);

        // different dimensions
        let v = conjectured_equivalent_nd(&g1, &f_m(2)).unwrap();
        assert_eq!(v.result, Decision::NotEquivalent);
    }

    #[test]
    fn nd_unknown_when_per_ray_check_is_partial() {
        // three eigenvalues on one ray with a resonant monomial: undecidable here
        let g = Germ::from_terms(
            3,
            [
                (1, vec![1, 0, 0], qc(4, 1)),
                (2, vec![0, 1, 0], qc(2, 1)),
                (3, vec![0, 0, 1], qc(1, 1)),
                (1, vec![0, 2, 0], qc(1, 1)),
            ],
        )
        .unwrap();
        let h = Germ::from_terms(
            3,
            [
                (1, vec![1, 0, 0], qc(4, 1)),
                (2, vec![0, 1, 0], qc(2, 1)),
                (3, vec![0, 0, 1], qc(1, 1)),
                (1, vec![0, 0, 4], qc(1, 1)),
            ],
        )
        .unwrap();
        let v = conjectured_equivalent_nd(&g, &h).unwrap();
        assert_eq!(v.result, Decision::Unknown);
        assert!(v.reasons.iter().any(|r| r.contains("no equivalence test")));
    }

    #[test]
    fn r_independence() {
        let e = |re: f64, im: f64| Eig::numeric(num_complex::Complex::new(re, im));
        assert!(!pairwise_r_independent(&[e(1.0, 0.0), e(2.0, 0.0), e(0.0, 1.0)]));
        assert!(pairwise_r_independent(&[e(1.0, 0.0), e(0.0, 1.0), e(-1.0, 1.0)]));
        assert!(!pairwise_r_independent(&[e(1.0, 1.0), e(2.0, 2.0)]));
    }
}
