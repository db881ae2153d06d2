//! Enumeration of the (finitely many) resonances of a Poincaré spectrum and
//! their essential/inessential classification.

use crate::scalar::{Scalar, CQ};
use crate::spectral::{same_ray, Eig, Spectrum};
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

/// Numeric-path acceptance: |<m,lambda> - lambda_i| <= RES_TOL * (1 + |lambda_i|).
pub const RES_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ResonanceError {
    #[error("resonance enumeration requires a Poincaré spectrum")]
    NotPoincare,
}

/// A resonance relation lambda_i = <m, lambda>.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    /// Target index i into the spectrum's sorted eigenvalue list.
    pub target: usize,
    pub m: Vec<u16>,
    /// m = e_i (the trivial relation lambda_i = lambda_i).
    pub trivial: bool,
    pub essential: bool,
    /// Whether the exact path decided this relation.
    pub decided_exact: bool,
    /// |<m,lambda> - lambda_i| on the numeric path (0 on the exact path).
    pub residual: f64,
}

fn is_trivial(target: usize, m: &[u16]) -> bool {
    m.iter()
        .enumerate()
        .all(|(j, &e)| if j == target { e == 1 } else { e == 0 })
}

fn test_resonance(eigs: &[Eig], target: usize, m: &[u16]) -> Option<(bool, f64)> {
    if eigs.iter().all(|e| e.exact.is_some()) {
        let mut acc = CQ::zero();
        for (j, &e) in m.iter().enumerate() {
            if e > 0 {
                acc = acc + eigs[j].exact.as_ref().unwrap().clone() * CQ::from_int(e as i64);
            }
        }
        if acc == *eigs[target].exact.as_ref().unwrap() {
            Some((true, 0.0))
        } else {
            None
        }
    } else {
        let mut acc = Complex::new(0.0, 0.0);
        for (j, &e) in m.iter().enumerate() {
            acc += eigs[j].value * (e as f64);
        }
        let res = (acc - eigs[target].value).norm();
        if res <= RES_TOL * (1.0 + eigs[target].value.norm()) {
            Some((false, res))
        } else {
            None
        }
    }
}

/// All resonances of the eigenvalues lying on a single common ray with the target.
pub fn is_essential(target: usize, m: &[u16], eigs: &[Eig]) -> bool {
    let mut participants: Vec<usize> = m
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(j, _)| j)
        .collect();
    participants.push(target);
    participants
        .iter()
        .all(|&j| same_ray(&eigs[participants[0]], &eigs[j]))
}

/// Complete list of resonances of a Poincaré spectrum.
///
/// The search is bounded by |m| <= max_i |lambda_i| / c, because
/// |<m,lambda>| >= c * |m| for nonnegative m.
pub fn enumerate_resonances(spec: &Spectrum) -> Result<Vec<Resonance>, ResonanceError> {
    if !spec.poincare {
        return Err(ResonanceError::NotPoincare);
    }
    let eigs = &spec.eigenvalues;
    let n = eigs.len();
    let max_abs = eigs.iter().map(|e| e.value.norm()).fold(0.0f64, f64::max);
    let bound = (max_abs / spec.c + 1e-9).floor() as u32;
    let mut out = Vec::new();
    let mut m = vec![0u16; n];
    enumerate_rec(eigs, &mut m, 0, bound, &mut out);
    Ok(out)
}

fn enumerate_rec(
    eigs: &[Eig],
    m: &mut Vec<u16>,
    pos: usize,
    remaining: u32,
    out: &mut Vec<Resonance>,
) {
    if pos == m.len() {
        if m.iter().all(|&e| e == 0) {
            return;
        }
        for target in 0..eigs.len() {
            if let Some((decided_exact, residual)) = test_resonance(eigs, target, m) {
                out.push(Resonance {
                    target,
                    m: m.clone(),
                    trivial: is_trivial(target, m),
                    essential: is_essential(target, m, eigs),
                    decided_exact,
                    residual,
                });
            }
        }
        return;
    }
    for e in 0..=remaining.min(u16::MAX as u32) {
        m[pos] = e as u16;
        enumerate_rec(eigs, m, pos + 1, remaining - e, out);
    }
    m[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectrum_from_eigs;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn eq(re: i64, im: i64) -> Eig {
        Eig::exact(Complex::new(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        ))
    }

    fn sorted_keys(rs: &[Resonance]) -> Vec<(usize, Vec<u16>)> {
        let mut v: Vec<_> = rs.iter().map(|r| (r.target, r.m.clone())).collect();
        v.sort();
        v
    }

    // Independent brute-force sweep over all m with |m| <= ceil(max|l|/c)+1.
    fn brute_force(eigs: &[Eig], c: f64) -> Vec<(usize, Vec<u16>)> {
        let n = eigs.len();
        let max_abs = eigs.iter().map(|e| e.value.norm()).fold(0.0f64, f64::max);
        let bound = (max_abs / c).ceil() as u32 + 1;
        let mut found = Vec::new();
        let mut m = vec![0u16; n];
        loop {
            if m.iter().any(|&e| e > 0) {
                let total: u32 = m.iter().map(|&e| e as u32).sum();
                if total <= bound {
                    for i in 0..n {
                        if test_resonance(eigs, i, &m).is_some() {
                            found.push((i, m.clone()));
                        }
                    }
                }
            }
            // odometer over the box [0, bound]^n restricted afterwards
            let mut k = 0;
            loop {
                if k == n {
                    found.sort();
                    return found;
                }
                if (m[k] as u32) < bound {
                    m[k] += 1;
                    break;
                }
                m[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn eigenvalues_two_one() {
        // lambda = (1, 2) sorted: trivials plus (target=2, m=(2,0))
        let spec = spectrum_from_eigs(vec![eq(2, 0), eq(1, 0)], true);
        let rs = enumerate_resonances(&spec).unwrap();
        let keys = sorted_keys(&rs);
        // sorted spectrum is (1, 2): resonance 2 = 2*1 -> target index 1, m=(2,0)
        assert_eq!(
            keys,
            vec![
                (0, vec![1, 0]),
                (1, vec![0, 1]),
                (1, vec![2, 0]),
            ]
        );
        assert_eq!(rs.iter().filter(|r| r.trivial).count(), 2);
        assert_eq!(brute_force(&spec.eigenvalues, spec.c), keys);
    }

    #[test]
    fn eigenvalues_one_one() {
        let spec = spectrum_from_eigs(vec![eq(1, 0), eq(1, 0)], true);
        let rs = enumerate_resonances(&spec).unwrap();
        let keys = sorted_keys(&rs);
        assert_eq!(
            keys,
            vec![
                (0, vec![0, 1]),
                (0, vec![1, 0]),
                (1, vec![0, 1]),
                (1, vec![1, 0]),
            ]
        );
        assert_eq!(brute_force(&spec.eigenvalues, spec.c), keys);
    }

    #[test]
    fn eigenvalues_complex_ray() {
        // (1+i, 2+2i): nontrivial (2+2i) = 2*(1+i) only
        let spec = spectrum_from_eigs(vec![eq(1, 1), eq(2, 2)], true);
        let rs = enumerate_resonances(&spec).unwrap();
        let nontrivial: Vec<_> = rs.iter().filter(|r| !r.trivial).collect();
        assert_eq!(nontrivial.len(), 1);
        assert_eq!(nontrivial[0].target, 1);
        assert_eq!(nontrivial[0].m, vec![2, 0]);
        assert!(nontrivial[0].essential);
        assert_eq!(brute_force(&spec.eigenvalues, spec.c), sorted_keys(&rs));
    }

    #[test]
    fn numeric_sqrt2_has_no_nontrivial_resonance() {
        let spec = spectrum_from_eigs(
            vec![
                Eig::numeric(Complex::new(std::f64::consts::SQRT_2, 0.0)),
                Eig::numeric(Complex::new(1.0, 0.0)),
            ],
            false,
        );
        let rs = enumerate_resonances(&spec).unwrap();
        assert!(rs.iter().all(|r| r.trivial));
    }

    #[test]
    fn nontrivial_resonances_avoid_target_exponent() {
        // Rem 1.4 property on an assortment of spectra
        for eigs in [
            vec![eq(2, 0), eq(1, 0)],
            vec![eq(3, 0), eq(1, 0)],
            vec![eq(1, 1), eq(2, 2)],
            vec![eq(2, 0), eq(1, 0), eq(1, 1)],
        ] {
            let spec = spectrum_from_eigs(eigs, true);
            for r in enumerate_resonances(&spec).unwrap() {
                if !r.trivial {
                    assert_eq!(r.m[r.target], 0, "Rem-style property violated: {r:?}");
                }
            }
        }
    }

    #[test]
    fn inessential_resonance_detected() {
        // eigs (2, 1+i, 1-i): 2 = (1+i) + (1-i), participants on different rays
        let spec = spectrum_from_eigs(vec![eq(2, 0), eq(1, 1), eq(1, -1)], true);
        let rs = enumerate_resonances(&spec).unwrap();
        let r = rs
            .iter()
            .find(|r| !r.trivial && r.m.iter().map(|&e| e as u32).sum::<u32>() == 2)
            .expect("resonance 2 = (1+i) + (1-i) must be found");
        assert!(!r.essential);
        // and same-ray ones are essential
        let spec2 = spectrum_from_eigs(vec![eq(2, 0), eq(1, 0)], true);
        let rs2 = enumerate_resonances(&spec2).unwrap();
        assert!(rs2.iter().filter(|r| !r.trivial).all(|r| r.essential));
    }

    #[test]
    fn scaling_invariance_of_resonance_list() {
        let spec1 = spectrum_from_eigs(vec![eq(2, 0), eq(1, 0), eq(1, 1)], true);
        let spec2 = spectrum_from_eigs(vec![eq(6, 0), eq(3, 0), eq(3, 3)], true);
        let r1 = sorted_keys(&enumerate_resonances(&spec1).unwrap());
        let r2 = sorted_keys(&enumerate_resonances(&spec2).unwrap());
        assert_eq!(r1, r2);
    }

    #[test]
    fn rejects_non_poincare() {
        let spec = spectrum_from_eigs(vec![eq(1, 0), eq(-1, 0)], true);
        assert!(matches!(
            enumerate_resonances(&spec),
            Err(ResonanceError::NotPoincare)
        ));
    }
}
