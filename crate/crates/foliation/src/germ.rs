//! Data model, parsing and serialization for polynomial vector-field germs.

use crate::scalar::{format_rational, parse_rational, rational_to_f64, Scalar, C64, CQ};
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Term key: 0-based component index plus exponent multi-index.
pub type TermKey = (usize, Vec<u16>);

#[derive(Debug, Error)]
pub enum GermError {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("germ dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("duplicate term (component {component}, exponents {exponents:?})")]
    DuplicateTerm { component: usize, exponents: Vec<u16> },
    #[error("component index {0} out of range 1..={1}")]
    BadComponent(usize, usize),
    #[error("exponent list {exponents:?} has length {got}, expected {expected}")]
    DimensionMismatch { exponents: Vec<u16>, got: usize, expected: usize },
    #[error("stored coefficient must be nonzero (component {component}, exponents {exponents:?})")]
    ZeroCoefficient { component: usize, exponents: Vec<u16> },
    #[error("exact coefficient {exact} does not round to the given float {float}")]
    CoefficientMismatch { exact: String, float: f64 },
    #[error("invalid exact rational: {0}")]
    BadRational(String),
    #[error("the linear part of the germ vanishes")]
    ZeroLinearPart,
}

/// Coefficient with a numeric value and an optional exact Gaussian-rational channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub re: f64,
    pub im: f64,
    pub exact: Option<(BigRational, BigRational)>,
}

impl Coefficient {
    pub fn from_f64(re: f64, im: f64) -> Self {
        Coefficient { re, im, exact: None }
    }

    pub fn from_exact(re: BigRational, im: BigRational) -> Self {
        let fre = rational_to_f64(&re);
        let fim = rational_to_f64(&im);
        Coefficient { re: fre, im: fim, exact: Some((re, im)) }
    }

    pub fn to_c64(&self) -> C64 {
        Complex::new(self.re, self.im)
    }

    pub fn to_cq(&self) -> Option<CQ> {
        self.exact.as_ref().map(|(r, i)| Complex::new(r.clone(), i.clone()))
    }

    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some((r, i)) => r.is_zero() && i.is_zero(),
            None => self.re == 0.0 && self.im == 0.0,
        }
    }
}

/// A polynomial vector-field germ as stored in germ files: the canonical,
/// path-independent representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Germ {
    pub dimension: usize,
    pub terms: BTreeMap<TermKey, Coefficient>,
}

// ---- file schema -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GermFile {
    n: usize,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    component: usize,
    exponents: Vec<u16>,
    coeff: CoeffFile,
}

#[derive(Serialize, Deserialize)]
struct CoeffFile {
    re: f64,
    im: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<[String; 2]>,
}

/// Parse a germ file (UTF-8 JSON) into the canonical model.
pub fn parse_germ(text: &str) -> Result<Germ, GermError> {
    let file: GermFile = serde_json::from_str(text).map_err(|e| GermError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    if file.n < 2 {
        return Err(GermError::BadDimension(file.n));
    }
    let n = file.n;
    let mut terms = BTreeMap::new();
    for t in file.terms {
        if t.component == 0 || t.component > n {
            return Err(GermError::BadComponent(t.component, n));
        }
        if t.exponents.len() != n {
            return Err(GermError::DimensionMismatch {
                got: t.exponents.len(),
                expected: n,
                exponents: t.exponents,
            });
        }
        let coeff = match &t.coeff.exact {
            Some([re_s, im_s]) => {
                let re = parse_rational(re_s).ok_or_else(|| GermError::BadRational(re_s.clone()))?;
                let im = parse_rational(im_s).ok_or_else(|| GermError::BadRational(im_s.clone()))?;
                let fre = rational_to_f64(&re);
                let fim = rational_to_f64(&im);
                if fre != t.coeff.re {
                    return Err(GermError::CoefficientMismatch {
                        exact: re_s.clone(),
                        float: t.coeff.re,
                    });
                }
                if fim != t.coeff.im {
                    return Err(GermError::CoefficientMismatch {
                        exact: im_s.clone(),
                        float: t.coeff.im,
                    });
                }
                Coefficient { re: fre, im: fim, exact: Some((re, im)) }
            }
            None => Coefficient::from_f64(t.coeff.re, t.coeff.im),
        };
        let key = (t.component - 1, t.exponents.clone());
        if coeff.is_zero() {
            return Err(GermError::ZeroCoefficient {
                component: t.component,
                exponents: t.exponents,
            });
        }
        if terms.insert(key, coeff).is_some() {
            return Err(GermError::DuplicateTerm {
                component: t.component,
                exponents: t.exponents,
            });
        }
    }
    let has_linear = terms
        .keys()
        .any(|(_, m)| m.iter().map(|&e| e as u32).sum::<u32>() == 1);
    if !has_linear {
        return Err(GermError::ZeroLinearPart);
    }
    Ok(Germ { dimension: n, terms })
}

/// Serialize a germ back to its file format, terms sorted by
/// (component, lexicographic exponents).
pub fn serialize_germ(germ: &Germ) -> String {
    let terms = germ
        .terms
        .iter()
        .map(|((c, m), coeff)| TermFile {
            component: c + 1,
            exponents: m.clone(),
            coeff: CoeffFile {
                re: coeff.re,
                im: coeff.im,
                exact: coeff
                    .exact
                    .as_ref()
                    .map(|(r, i)| [format_rational(r), format_rational(i)]),
            },
        })
        .collect();
    let file = GermFile { n: germ.dimension, terms };
    serde_json::to_string_pretty(&file).expect("germ serialization cannot fail")
}

impl Germ {
    /// Build a germ from raw (1-based component, exponents, coefficient) triples.
    pub fn from_terms(
        n: usize,
        terms: impl IntoIterator<Item = (usize, Vec<u16>, Coefficient)>,
    ) -> Result<Germ, GermError> {
        let mut map = BTreeMap::new();
        for (c, m, a) in terms {
            if c == 0 || c > n {
                return Err(GermError::BadComponent(c, n));
            }
            if m.len() != n {
                return Err(GermError::DimensionMismatch { got: m.len(), expected: n, exponents: m });
            }
            if a.is_zero() {
                return Err(GermError::ZeroCoefficient { component: c, exponents: m });
            }
            if map.insert((c - 1, m.clone()), a).is_some() {
                return Err(GermError::DuplicateTerm { component: c, exponents: m });
            }
        }
        Ok(Germ { dimension: n, terms: map })
    }

    /// Numeric working representation (always available).
    pub fn to_numeric(&self) -> GermPoly<C64> {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), v.to_c64()))
            .collect();
        GermPoly { dimension: self.dimension, terms }
    }

    /// Exact working representation, available when every coefficient carries
    /// the exact channel.
    pub fn to_exact(&self) -> Option<GermPoly<CQ>> {
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            terms.insert(k.clone(), v.to_cq()?);
        }
        Some(GermPoly { dimension: self.dimension, terms })
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(|c| c.exact.is_some())
    }
}

/// Canonical model from a working polynomial, preserving exact coefficients.
pub fn germ_from_poly<C: Scalar>(p: &GermPoly<C>) -> Germ {
    let terms = p
        .terms
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((i, m), c)| {
            let coeff = match c.exact_parts() {
                Some((re, im)) => Coefficient::from_exact(re, im),
                None => {
                    let v = c.to_c64();
                    Coefficient::from_f64(v.re, v.im)
                }
            };
            ((*i, m.clone()), coeff)
        })
        .collect();
    Germ { dimension: p.dimension, terms }
}

// ---- working representation -------------------------------------------------

/// Sparse polynomial vector field over a scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct GermPoly<C: Scalar> {
    pub dimension: usize,
    pub terms: BTreeMap<TermKey, C>,
}

impl<C: Scalar> GermPoly<C> {
    pub fn new(dimension: usize) -> Self {
        GermPoly { dimension, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, component: usize, exponents: Vec<u16>, coeff: C) {
        debug_assert_eq!(exponents.len(), self.dimension);
        let key = (component, exponents);
        let entry = self.terms.entry(key.clone()).or_insert_with(C::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// Evaluate the vector field at a point.
    pub fn evaluate(&self, z: &[C]) -> Vec<C> {
        assert_eq!(z.len(), self.dimension);
        let mut out = vec![C::zero(); self.dimension];
        for ((i, m), a) in &self.terms {
            let mut v = a.clone();
            for (j, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    v = v * z[j].clone();
                }
            }
            out[*i] = out[*i].clone() + v;
        }
        out
    }

    /// Merge another term list into this one (pointwise sum of the fields).
    pub fn merged(&self, other: &GermPoly<C>) -> GermPoly<C> {
        assert_eq!(self.dimension, other.dimension);
        let mut out = self.clone();
        for ((i, m), a) in &other.terms {
            out.add_term(*i, m.clone(), a.clone());
        }
        out
    }

    /// Maximal total degree over stored terms.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(_, m)| m.iter().map(|&e| e as u32).sum())
            .max()
            .unwrap_or(0)
    }

    /// Drop all terms with total degree above `max_degree`.
    pub fn truncated(&self, max_degree: u32) -> GermPoly<C> {
        let terms = self
            .terms
            .iter()
            .filter(|((_, m), _)| m.iter().map(|&e| e as u32).sum::<u32>() <= max_degree)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        GermPoly { dimension: self.dimension, terms }
    }

    /// Numeric shadow of this field.
    pub fn to_c64(&self) -> GermPoly<C64> {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), v.to_c64()))
            .collect();
        GermPoly { dimension: self.dimension, terms }
    }
}

pub fn total_degree(m: &[u16]) -> u32 {
    m.iter().map(|&e| e as u32).sum()
}

/// Unit exponent vector e_j.
pub fn unit_exponent(n: usize, j: usize) -> Vec<u16> {
    let mut m = vec![0u16; n];
    m[j] = 1;
    m
}
