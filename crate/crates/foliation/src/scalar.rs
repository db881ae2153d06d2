//! Scalar abstraction shared by the exact (Gaussian-rational) and numeric
//! (double-precision) computation paths.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric complex scalar.
pub type C64 = Complex<f64>;
/// Exact Gaussian-rational scalar.
pub type CQ = Complex<BigRational>;

/// Complex field scalar usable by the generic core (polynomial arithmetic,
/// homological elimination, resonance tests).
pub trait Scalar:
    Clone
    + PartialEq
    + std::fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether equality decisions on this scalar are exact.
    const EXACT: bool;

    fn from_int(n: i64) -> Self;
    fn conj(&self) -> Self;
    fn to_c64(&self) -> C64;

    /// Exact Gaussian-rational parts when the scalar carries them.
    fn exact_parts(&self) -> Option<(BigRational, BigRational)>;

    fn abs(&self) -> f64 {
        self.to_c64().norm()
    }

    /// Zero test: exact on the rational path, tolerance `tol` on the numeric path.
    fn is_zero_within(&self, tol: f64) -> bool;
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        Complex::new(n as f64, 0.0)
    }

    fn conj(&self) -> Self {
        Complex::conj(self)
    }

    fn to_c64(&self) -> C64 {
        *self
    }

    fn exact_parts(&self) -> Option<(BigRational, BigRational)> {
        None
    }

    fn is_zero_within(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
}

impl Scalar for CQ {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }

    fn to_c64(&self) -> C64 {
        Complex::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    fn exact_parts(&self) -> Option<(BigRational, BigRational)> {
        Some((self.re.clone(), self.im.clone()))
    }

    fn is_zero_within(&self, _tol: f64) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// Nearest-f64 conversion of a big rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Square root of a nonnegative rational, if it is rational.
pub fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    if r.is_zero() {
        return Some(BigRational::zero());
    }
    let num = r.numer();
    let den = r.denom();
    let sn = num.sqrt();
    let sd = den.sqrt();
    if &(&sn * &sn) == num && &(&sd * &sd) == den {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

/// Square root of a Gaussian rational, if one exists in Q(i).
///
/// Solves (x + iy)^2 = p + iq: x^2 - y^2 = p, 2xy = q, which forces
/// p^2 + q^2 to be a rational square and (p + |d|)/2, (|d| - p)/2 to be
/// rational squares.
pub fn gaussian_sqrt(d: &CQ) -> Option<CQ> {
    let p = &d.re;
    let q = &d.im;
    let norm2 = p * p + q * q;
    let modulus = rational_sqrt(&norm2)?;
    let two = BigRational::from_integer(BigInt::from(2));
    let x2 = (p + &modulus) / &two;
    let y2 = (&modulus - p) / &two;
    let x = rational_sqrt(&x2)?;
    let y = rational_sqrt(&y2)?;
    // fix the sign of y so that 2xy = q
    let y = if (&x * &y * &two) == *q { y } else { -y };
    let cand = Complex::new(x, y);
    if &cand * &cand == *d {
        Some(cand)
    } else {
        None
    }
}

/// Parse an exact rational written as `p/q` or `p`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(BigRational::from_integer(n))
    }
}

/// Render a rational in the `p/q` file notation (`p` when the denominator is 1).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom() == &BigInt::one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_sqrt_detects_squares() {
        assert_eq!(rational_sqrt(&rat(9, 4)), Some(rat(3, 2)));
        assert_eq!(rational_sqrt(&rat(2, 1)), None);
        assert_eq!(rational_sqrt(&rat(-1, 1)), None);
    }

    #[test]
    fn gaussian_sqrt_of_negative_real() {
        // sqrt(-4) = 2i
        let d = Complex::new(rat(-4, 1), rat(0, 1));
        let s = gaussian_sqrt(&d).unwrap();
        assert_eq!(&s * &s, d);
        assert!(s.re.is_zero());
    }

    #[test]
    fn gaussian_sqrt_of_general_square() {
        // (3/2 + 2i)^2 = 9/4 - 4 + 6i = -7/4 + 6i
        let base = Complex::new(rat(3, 2), rat(2, 1));
        let d = &base * &base;
        let s = gaussian_sqrt(&d).unwrap();
        assert_eq!(&s * &s, d);
    }

    #[test]
    fn gaussian_sqrt_rejects_nonsquares() {
        let d = Complex::new(rat(2, 1), rat(0, 1));
        assert!(gaussian_sqrt(&d).is_none());
    }

    #[test]
    fn rational_parsing_round_trip() {
        let r = parse_rational("-7/12").unwrap();
        assert_eq!(format_rational(&r), "-7/12");
        assert_eq!(parse_rational("5").unwrap(), rat(5, 1));
        assert!(parse_rational("1/0").is_none());
    }
}
