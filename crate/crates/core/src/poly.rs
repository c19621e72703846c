//! Dense univariate polynomials over O_F: the exact-arithmetic counterpart
//! to the capped series, used for Eisenstein minimal polynomials and tower
//! field arithmetic where nothing may be silently truncated.

use crate::error::{LtError, Result};
use crate::local::{LocalFieldSpec, OFElem};
use std::sync::Arc;

#[derive(Clone)]
pub struct UnivariatePoly {
    pub spec: Arc<LocalFieldSpec>,
    /// Lowest degree first. Trailing exact zeros are trimmed on construction.
    pub coeffs: Vec<OFElem>,
}

impl std::fmt::Debug for UnivariatePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

impl UnivariatePoly {
    pub fn new(spec: &Arc<LocalFieldSpec>, mut coeffs: Vec<OFElem>) -> UnivariatePoly {
        while coeffs.last().is_some_and(|c| c.is_exact_zero()) {
            coeffs.pop();
        }
        UnivariatePoly {
            spec: spec.clone(),
            coeffs,
        }
    }

    pub fn from_i64(spec: &Arc<LocalFieldSpec>, coeffs: &[i64]) -> UnivariatePoly {
        UnivariatePoly::new(
            spec,
            coeffs.iter().map(|&c| OFElem::from_i64(spec, c)).collect(),
        )
    }

    pub fn zero(spec: &Arc<LocalFieldSpec>) -> UnivariatePoly {
        UnivariatePoly::new(spec, vec![])
    }

    pub fn x(spec: &Arc<LocalFieldSpec>) -> UnivariatePoly {
        UnivariatePoly::from_i64(spec, &[0, 1])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the stored representation; -1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn coeff(&self, i: usize) -> OFElem {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| OFElem::zero(&self.spec))
    }

    pub fn leading(&self) -> OFElem {
        self.coeff(self.coeffs.len().saturating_sub(1))
    }

    pub fn is_monic(&self) -> bool {
        !self.coeffs.is_empty() && self.leading().same_value(&OFElem::one(&self.spec))
    }

    pub fn add(&self, other: &UnivariatePoly) -> UnivariatePoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.coeff(i).add(&other.coeff(i)));
        }
        UnivariatePoly::new(&self.spec, out)
    }

    pub fn neg(&self) -> UnivariatePoly {
        UnivariatePoly::new(&self.spec, self.coeffs.iter().map(|c| c.neg()).collect())
    }

    pub fn sub(&self, other: &UnivariatePoly) -> UnivariatePoly {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, a: &OFElem) -> UnivariatePoly {
        UnivariatePoly::new(&self.spec, self.coeffs.iter().map(|c| c.mul(a)).collect())
    }

    pub fn mul(&self, other: &UnivariatePoly) -> UnivariatePoly {
        if self.is_zero() || other.is_zero() {
            return UnivariatePoly::zero(&self.spec);
        }
        let mut out = vec![OFElem::zero(&self.spec); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_exact_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        UnivariatePoly::new(&self.spec, out)
    }

    pub fn eval(&self, x: &OFElem) -> OFElem {
        let mut acc = OFElem::zero(&self.spec);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    }

    pub fn compose(&self, inner: &UnivariatePoly) -> UnivariatePoly {
        let mut acc = UnivariatePoly::zero(&self.spec);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&UnivariatePoly::new(&self.spec, vec![c.clone()]));
        }
        acc
    }

    pub fn derivative(&self) -> UnivariatePoly {
        if self.coeffs.len() <= 1 {
            return UnivariatePoly::zero(&self.spec);
        }
        UnivariatePoly::new(
            &self.spec,
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c.mul_i64(i as i64 + 1))
                .collect(),
        )
    }

    /// Synthetic division by a monic divisor: (quotient, remainder).
    pub fn divrem_monic(&self, div: &UnivariatePoly) -> (UnivariatePoly, UnivariatePoly) {
        assert!(div.is_monic(), "divisor must be monic");
        let d = div.coeffs.len() - 1;
        if self.coeffs.len() <= d {
            return (UnivariatePoly::zero(&self.spec), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quo = vec![OFElem::zero(&self.spec); rem.len() - d];
        for k in (d..rem.len()).rev() {
            let q = rem[k].clone();
            if q.is_exact_zero() {
                continue;
            }
            quo[k - d] = q.clone();
            for (j, b) in div.coeffs.iter().enumerate().take(d) {
                rem[k - d + j] = rem[k - d + j].sub(&q.mul(b));
            }
            rem[k] = OFElem::zero(&self.spec);
        }
        rem.truncate(d);
        (
            UnivariatePoly::new(&self.spec, quo),
            UnivariatePoly::new(&self.spec, rem),
        )
    }

    /// Exact division by a monic divisor; the remainder must vanish at the
    /// working precision.
    pub fn div_exact_monic(&self, div: &UnivariatePoly) -> Result<UnivariatePoly> {
        let (q, r) = self.divrem_monic(div);
        if !r.coeffs.iter().all(|c| c.is_zero_at_prec()) {
            return Err(LtError::InexactDivision(format!(
                "polynomial division leaves remainder of degree {}",
                r.degree()
            )));
        }
        Ok(q)
    }

    pub fn same_value(&self, other: &UnivariatePoly) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|i| self.coeff(i).same_value(&other.coeff(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::make_local_field;

    fn q3(prec: i64) -> Arc<LocalFieldSpec> {
        make_local_field(3, 1, vec![0, 1], vec![vec![-3], vec![1]], prec).unwrap()
    }

    #[test]
    fn mul_and_compose() {
        let spec = q3(10);
        let f = UnivariatePoly::from_i64(&spec, &[0, 3, 0, 1]); // 3X + X^3
        let ff = f.compose(&f);
        let want = UnivariatePoly::from_i64(&spec, &[0, 9, 0, 30, 0, 27, 0, 9, 0, 1]);
        assert!(ff.same_value(&want));
    }

    #[test]
    fn divrem_roundtrip() {
        let spec = q3(10);
        let a = UnivariatePoly::from_i64(&spec, &[2, 0, 5, 1, 1]);
        let d = UnivariatePoly::from_i64(&spec, &[1, 2, 1]);
        let (q, r) = a.divrem_monic(&d);
        assert!(r.degree() < d.degree());
        assert!(q.mul(&d).add(&r).same_value(&a));
    }

    #[test]
    fn exact_division_flags_remainders() {
        let spec = q3(10);
        let a = UnivariatePoly::from_i64(&spec, &[1, 0, 1]);
        let d = UnivariatePoly::from_i64(&spec, &[1, 1]);
        assert!(matches!(
            a.div_exact_monic(&d).unwrap_err(),
            LtError::InexactDivision(_)
        ));
        let b = d.mul(&d);
        assert!(b.div_exact_monic(&d).unwrap().same_value(&d));
    }
}
