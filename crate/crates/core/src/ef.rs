//! E_F = k_F((pibar)) with its q-power Frobenius, q-th roots up to a
//! configured perfection depth, and the v_E valuation normalized so that
//! v_E(pibar) = q/(q-1).
//!
//! Exponents live in Z[1/q] with denominator at most q^depth. Elements are
//! finitely supported below a truncation order: coefficients at exponents
//! >= trunc are unknown, everything stored below it is exact. The low end is
//! always exact, so products propagate truncation by the usual Laurent rule.

use crate::error::{LtError, Result};
use crate::ff::FFElem;
use crate::local::LocalFieldSpec;
use crate::rat::Rat;
use std::collections::BTreeMap;
use std::sync::Arc;

/// A value in the v_E normalization (v_E(pibar) = q/(q-1)).
pub type VE = Rat;

#[derive(Clone)]
pub struct EFElem {
    pub spec: Arc<LocalFieldSpec>,
    /// Maximum allowed perfection depth: denominators divide q^depth.
    pub depth: u32,
    /// Current depth: all stored denominators divide q^s.
    pub s: u32,
    /// Exponents >= trunc are unknown.
    pub trunc: Rat,
    coeffs: BTreeMap<Rat, FFElem>,
}

impl std::fmt::Debug for EFElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EF(")?;
        for (e, c) in &self.coeffs {
            write!(f, "{c:?}*T^{e} ")?;
        }
        write!(f, "+ O(T^{}))", self.trunc)
    }
}

/// Smallest s with den | q^s, if any such s exists at all.
fn depth_for_den(q: i64, den: i64, limit: u32) -> Option<u32> {
    let mut acc: i64 = 1;
    for s in 0..=limit {
        if acc % den == 0 {
            return Some(s);
        }
        acc = acc.saturating_mul(q);
    }
    None
}

impl EFElem {
    pub fn zero(spec: &Arc<LocalFieldSpec>, depth: u32, trunc: Rat) -> EFElem {
        EFElem {
            spec: spec.clone(),
            depth,
            s: 0,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    /// pibar itself.
    pub fn pi(spec: &Arc<LocalFieldSpec>, depth: u32, trunc: Rat) -> EFElem {
        let mut x = EFElem::zero(spec, depth, trunc);
        x.set(Rat::int(1), spec.ff.one()).expect("integral exponent");
        x
    }

    pub fn one(spec: &Arc<LocalFieldSpec>, depth: u32, trunc: Rat) -> EFElem {
        let mut x = EFElem::zero(spec, depth, trunc);
        x.set(Rat::zero(), spec.ff.one()).expect("integral exponent");
        x
    }

    /// Insert or clear one coefficient. Exponents must respect the depth
    /// bound and stay below the truncation order.
    pub fn set(&mut self, e: Rat, c: FFElem) -> Result<()> {
        let q = self.spec.q() as i64;
        let Some(s) = depth_for_den(q, e.den(), self.depth) else {
            return Err(LtError::PerfectionDepthExceeded {
                needed: self.depth + 1,
                depth: self.depth,
            });
        };
        if e >= self.trunc {
            return Ok(()); // beyond what this element can know
        }
        if self.spec.ff.is_zero(&c) {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
            if s > self.s {
                self.s = s;
            }
        }
        Ok(())
    }

    pub fn coeff(&self, e: Rat) -> FFElem {
        self.coeffs.get(&e).cloned().unwrap_or_else(|| self.spec.ff.zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rat, &FFElem)> {
        self.coeffs.iter()
    }

    pub fn min_exp(&self) -> Option<Rat> {
        self.coeffs.keys().next().copied()
    }

    /// No known nonzero coefficient (zero at this truncation).
    pub fn is_zero_at_trunc(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn assert_same_ring(&self, other: &EFElem) {
        assert!(
            Arc::ptr_eq(&self.spec, &other.spec) || *self.spec == *other.spec,
            "mixed residue rings"
        );
    }

    pub fn add(&self, other: &EFElem) -> EFElem {
        self.assert_same_ring(other);
        let trunc = self.trunc.min(other.trunc);
        let mut out = EFElem::zero(&self.spec, self.depth.min(other.depth), trunc);
        for (e, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if *e >= trunc {
                continue;
            }
            let cur = out.coeff(*e);
            out.set(*e, self.spec.ff.add(&cur, c)).expect("depth preserved");
        }
        out
    }

    pub fn neg(&self) -> EFElem {
        let mut out = self.clone();
        let coeffs = std::mem::take(&mut out.coeffs);
        for (e, c) in coeffs {
            out.coeffs.insert(e, self.spec.ff.neg(&c));
        }
        out
    }

    pub fn sub(&self, other: &EFElem) -> EFElem {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, a: &FFElem) -> EFElem {
        let mut out = EFElem::zero(&self.spec, self.depth, self.trunc);
        if self.spec.ff.is_zero(a) {
            return out;
        }
        for (e, c) in &self.coeffs {
            out.coeffs.insert(*e, self.spec.ff.mul(c, a));
        }
        out.s = self.s;
        out
    }

    /// Laurent product: the result is known below
    /// min(trunc_x + lo_y, trunc_y + lo_x), the usual exact-low-side rule.
    pub fn mul(&self, other: &EFElem) -> EFElem {
        self.assert_same_ring(other);
        let lo_x = self.min_exp().unwrap_or(self.trunc);
        let lo_y = other.min_exp().unwrap_or(other.trunc);
        let trunc = (self.trunc + lo_y).min(other.trunc + lo_x);
        let mut out = EFElem::zero(&self.spec, self.depth.min(other.depth), trunc);
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &other.coeffs {
                let e = *ea + *eb;
                if e >= trunc {
                    continue;
                }
                let cur = out.coeff(e);
                out.set(e, self.spec.ff.add(&cur, &self.spec.ff.mul(ca, cb)))
                    .expect("depth closed under addition of exponents");
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> EFElem {
        // powers of an exact-low-side element; repeated squaring is not
        // worth the truncation bookkeeping at desk scale
        let mut acc = EFElem::one(&self.spec, self.depth, self.trunc * (n.max(1) as i64));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Agreement below the common truncation.
    pub fn same_value(&self, other: &EFElem) -> bool {
        self.sub(other).is_zero_at_trunc()
    }

    /// Forget everything at exponents >= t.
    pub fn clamp_trunc(&self, t: Rat) -> EFElem {
        let mut out = self.clone();
        out.trunc = self.trunc.min(t);
        out.coeffs.retain(|e, _| *e < t);
        out
    }

    /// c * T^e.
    pub fn monomial(
        spec: &Arc<LocalFieldSpec>,
        depth: u32,
        trunc: Rat,
        e: Rat,
        c: FFElem,
    ) -> Result<EFElem> {
        let mut x = EFElem::zero(spec, depth, trunc);
        x.set(e, c)?;
        Ok(x)
    }

    /// The q-power Frobenius: exponents scale by q, coefficients are fixed
    /// (the q-power map is the identity on F_q).
    pub fn frobenius(&self) -> EFElem {
        let q = self.spec.q() as i64;
        let mut out = EFElem::zero(&self.spec, self.depth, self.trunc * q);
        for (e, c) in &self.coeffs {
            out.set(*e * q, c.clone()).expect("depth only decreases");
        }
        out
    }

    /// Exact q-th root: the inverse of `frobenius`, one level deeper.
    pub fn root(&self) -> Result<EFElem> {
        let q = self.spec.q() as i64;
        let qr = Rat::new(1, q);
        let mut out = EFElem::zero(&self.spec, self.depth, self.trunc * qr);
        for (e, c) in &self.coeffs {
            let ne = *e * qr;
            if depth_for_den(q, ne.den(), self.depth).is_none() {
                return Err(LtError::PerfectionDepthExceeded {
                    needed: self.s + 1,
                    depth: self.depth,
                });
            }
            out.set(ne, c.clone())?;
        }
        Ok(out)
    }

    /// v_E, normalized so v_E(pibar) = q/(q-1).
    pub fn v_e(&self) -> Result<VE> {
        let q = self.spec.q() as i64;
        let norm = Rat::new(q, q - 1);
        match self.min_exp() {
            Some(e) => Ok(e * norm),

            None => Err(LtError::IndistinguishableFromZero(
                (self.trunc * norm).floor(),
            )),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let terms: Vec<serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(e, c)| json!({"e": e.to_string(), "c": c.c}))
            .collect();
        json!({
            "depth": self.depth,
            "s": self.s,
            "trunc": self.trunc.to_string(),
            "terms": terms,
        })
    }
}
