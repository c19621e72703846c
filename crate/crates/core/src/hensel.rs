//! Newton-Hensel lifting for polynomial roots over truncated O_F arithmetic.
//!
//! Contract: lifting starts only when v(P(x0)) > 2 v(P'(x0)); the returned
//! root satisfies P(root) = 0 to working precision and stays within
//! v(P(x0)) - 2 v(P'(x0)) of the seed. The condition is checked, not assumed.

use crate::error::{LtError, Result};
use crate::ff::FFElem;
use crate::local::{LocalFieldSpec, OFElem};
use crate::rat::Val;
use std::sync::Arc;

/// Evaluate a polynomial (lowest degree first) by Horner.
pub fn eval_poly(coeffs: &[OFElem], x: &OFElem) -> OFElem {
    let spec = &x.spec;
    let mut acc = OFElem::zero(spec);
    for c in coeffs.iter().rev() {
        acc = acc.mul(x).add(c);
    }
    acc
}

/// Formal derivative, lowest degree first.
pub fn derivative(coeffs: &[OFElem]) -> Vec<OFElem> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c.mul_i64(i as i64))
        .collect()
}

/// Hensel-lift a root of `poly` from the seed `x0`.
pub fn hensel_lift(poly: &[OFElem], x0: &OFElem) -> Result<OFElem> {
    assert!(!poly.is_empty(), "empty polynomial");
    let dpoly = derivative(poly);
    let fx0 = eval_poly(poly, x0);
    if fx0.is_zero_at_prec() {
        // already a root at working precision
        return Ok(x0.clone());
    }
    let dfx0 = eval_poly(&dpoly, x0);
    let v_f = match fx0.v_varpi()? {
        Val::Finite(v) => v,
        Val::Infinite => unreachable!(),
    };
    let v_df = match dfx0.v_varpi() {
        Ok(Val::Finite(v)) => v,
        Ok(Val::Infinite) | Err(_) => {
            return Err(LtError::HenselConditionFails(format!(
                "derivative vanishes at seed to working precision (v(P(x0)) = {v_f})"
            )));
        }
    };
    if !(v_f > v_df + v_df) {
        return Err(LtError::HenselConditionFails(format!(
            "need v(P(x0)) > 2 v(P'(x0)), got v(P(x0)) = {v_f}, v(P'(x0)) = {v_df}"
        )));
    }
    let mut x = x0.clone();
    for _ in 0..128 {
        let fx = eval_poly(poly, &x);
        if fx.is_zero_at_prec() {
            break;
        }
        let dfx = eval_poly(&dpoly, &x);
        let delta = fx.divide_exact(&dfx)?;
        if delta.is_zero_at_prec() {
            break;
        }
        x = x.sub(&delta);
    }
    let check = eval_poly(poly, &x);
    if !check.is_zero_at_prec() {
        return Err(LtError::PrecisionExhausted(
            "Newton iteration stalled before reaching working precision".into(),
        ));
    }
    // contact bound from the contract; quadratic convergence makes it strict
    debug_assert!(match x.sub(x0).v_varpi() {
        Ok(Val::Finite(v)) => v >= v_f - v_df - v_df,
        _ => true,
    });
    Ok(x)
}

/// Teichmuller lift: the unique root of X^(q-1) = 1 congruent to c, and 0 for c = 0.
pub fn teichmuller(spec: &Arc<LocalFieldSpec>, c: &FFElem) -> Result<OFElem> {
    if spec.ff.is_zero(c) {
        return Ok(OFElem::zero(spec));
    }
    let q = spec.q();
    if q == 2 {
        return Ok(OFElem::one(spec));
    }
    // X^(q-1) - 1, seed at the plain digit lift of c
    let mut poly = vec![OFElem::zero(spec); q as usize];
    poly[0] = OFElem::from_i64(spec, -1);
    poly[(q - 1) as usize] = OFElem::one(spec);
    hensel_lift(&poly, &OFElem::lift_residue(spec, c))
}
