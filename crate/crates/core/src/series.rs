//! Truncated multivariate power series over O_F.
//!
//! Sparse representation: exponent vector -> coefficient, total degree
//! capped at `cap` (inclusive). Exact zero coefficients are never stored;
//! coefficients that merely vanish at their known precision are kept, since
//! dropping them would overclaim exactness.
//!
//! Substitution requires the inner series to have no constant term, which is
//! what makes truncation by total degree well defined.

use crate::error::{LtError, Result};
use crate::local::{LocalFieldSpec, OFElem};
use std::collections::BTreeMap;
use std::sync::Arc;

pub type Exp = Vec<u32>;

#[derive(Clone)]
pub struct TruncatedSeries {
    pub spec: Arc<LocalFieldSpec>,
    pub vars: Vec<String>,
    pub cap: i64,
    terms: BTreeMap<Exp, OFElem>,
}

fn total(e: &Exp) -> i64 {
    e.iter().map(|&x| x as i64).sum()
}

impl std::fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Series[cap {}](", self.cap)?;
        let mut first = true;
        for (e, c) in self.sorted_terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:?}*")?;
            for (v, &k) in self.vars.iter().zip(e.iter()) {
                if k > 0 {
                    write!(f, "{v}^{k}")?;
                }
            }
        }
        write!(f, ")")
    }
}

impl TruncatedSeries {
    pub fn zero(spec: &Arc<LocalFieldSpec>, vars: Vec<String>, cap: i64) -> TruncatedSeries {
        assert!(cap >= 0, "cap must be nonnegative");
        TruncatedSeries {
            spec: spec.clone(),
            vars,
            cap,
            terms: BTreeMap::new(),
        }
    }

    /// One-variable zero series in T.
    pub fn zero_uni(spec: &Arc<LocalFieldSpec>, cap: i64) -> TruncatedSeries {
        TruncatedSeries::zero(spec, vec!["T".into()], cap)
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Insert or replace a coefficient; exact zeros clear the slot.
    pub fn set(&mut self, e: Exp, c: OFElem) {
        assert_eq!(e.len(), self.nvars(), "exponent arity mismatch");
        if total(&e) > self.cap {
            return;
        }
        if c.is_exact_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, c);
        }
    }

    pub fn coeff(&self, e: &[u32]) -> OFElem {
        self.terms
            .get(e)
            .cloned()
            .unwrap_or_else(|| OFElem::zero(&self.spec))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &OFElem)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms sorted by (total degree, lexicographic exponent).
    pub fn sorted_terms(&self) -> Vec<(&Exp, &OFElem)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|(ea, _), (eb, _)| total(ea).cmp(&total(eb)).then(ea.cmp(eb)));
        v
    }

    /// The monomial c * prod vars^e.
    pub fn monomial(
        spec: &Arc<LocalFieldSpec>,
        vars: Vec<String>,
        cap: i64,
        e: Exp,
        c: OFElem,
    ) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(spec, vars, cap);
        s.set(e, c);
        s
    }

    /// Univariate polynomial (lowest degree first) as a series in `var`.
    pub fn from_poly(
        spec: &Arc<LocalFieldSpec>,
        poly: &[OFElem],
        var: &str,
        cap: i64,
    ) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(spec, vec![var.into()], cap);
        for (i, c) in poly.iter().enumerate() {
            if i as i64 <= cap {
                s.set(vec![i as u32], c.clone());
            }
        }
        s
    }

    fn assert_compatible(&self, other: &TruncatedSeries) {
        assert_eq!(self.vars, other.vars, "series in different variables");
    }

    pub fn add(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.assert_compatible(other);
        let cap = self.cap.min(other.cap);
        let mut out = TruncatedSeries::zero(&self.spec, self.vars.clone(), cap);
        for (e, c) in &self.terms {
            if total(e) <= cap {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        for (e, c) in &other.terms {
            if total(e) > cap {
                continue;
            }
            let n = match out.terms.get(e) {
                Some(x) => x.add(c),
                None => c.clone(),
            };
            out.set(e.clone(), n);
        }
        out
    }

    pub fn neg(&self) -> TruncatedSeries {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, a: &OFElem) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(&self.spec, self.vars.clone(), self.cap);
        if a.is_exact_zero() {
            return out;
        }
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), c.mul(a));
        }
        out
    }

    pub fn mul(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.assert_compatible(other);
        let cap = self.cap.min(other.cap);
        let mut acc: BTreeMap<Exp, OFElem> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            let ta = total(ea);
            if ta > cap {
                continue;
            }
            for (eb, cb) in &other.terms {
                if ta + total(eb) > cap {
                    continue;
                }
                let e: Exp = ea.iter().zip(eb).map(|(&x, &y)| x + y).collect();
                let c = ca.mul(cb);
                match acc.get_mut(&e) {
                    Some(x) => *x = x.add(&c),
                    None => {
                        acc.insert(e, c);
                    }
                }
            }
        }
        let mut out = TruncatedSeries::zero(&self.spec, self.vars.clone(), cap);
        for (e, c) in acc {
            out.set(e, c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> TruncatedSeries {
        let mut acc = TruncatedSeries::monomial(
            &self.spec,
            self.vars.clone(),
            self.cap,
            vec![0; self.nvars()],
            OFElem::one(&self.spec),
        );
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Truncate to a smaller cap.
    pub fn truncate(&self, cap: i64) -> TruncatedSeries {
        let cap = cap.min(self.cap);
        let mut out = TruncatedSeries::zero(&self.spec, self.vars.clone(), cap);
        for (e, c) in &self.terms {
            if total(e) <= cap {
                out.terms.insert(e.clone(), c.clone());
            }
        }
        out
    }

    /// Re-express in a larger (or permuted) variable set: old variable `i`
    /// becomes `new_vars[pos[i]]`.
    pub fn embed(&self, new_vars: Vec<String>, pos: &[usize]) -> TruncatedSeries {
        assert_eq!(pos.len(), self.nvars());
        let mut out = TruncatedSeries::zero(&self.spec, new_vars, self.cap);
        for (e, c) in &self.terms {
            let mut ne = vec![0u32; out.nvars()];
            for (i, &k) in e.iter().enumerate() {
                ne[pos[i]] += k;
            }
            out.set(ne, c.clone());
        }
        out
    }

    /// Homogeneous part of a given total degree.
    pub fn homogeneous_part(&self, deg: i64) -> Vec<(Exp, OFElem)> {
        self.terms
            .iter()
            .filter(|(e, _)| total(e) == deg)
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect()
    }

    /// Substitute series for each variable. Every replacement must share one
    /// variable set and have no constant term.
    pub fn substitute(&self, subs: &[TruncatedSeries]) -> Result<TruncatedSeries> {
        assert_eq!(subs.len(), self.nvars(), "one replacement per variable");
        let out_vars = subs[0].vars.clone();
        let cap = subs
            .iter()
            .map(|s| s.cap)
            .fold(self.cap, |a, b| a.min(b));
        for s in subs {
            assert_eq!(s.vars, out_vars, "replacement series in different variables");
            // a constant that merely vanishes at precision is also refused:
            // truncation by total degree needs an exactly absent constant
            if !s.coeff(&vec![0; s.nvars()]).is_exact_zero() {
                return Err(LtError::NonzeroConstantInComposition);
            }
        }
        // cached powers per variable, computed on demand
        let one = TruncatedSeries::monomial(
            &self.spec,
            out_vars.clone(),
            cap,
            vec![0; out_vars.len()],
            OFElem::one(&self.spec),
        );
        let mut powers: Vec<Vec<TruncatedSeries>> = subs
            .iter()
            .map(|s| vec![one.clone(), s.truncate(cap)])
            .collect();
        let mut out = TruncatedSeries::zero(&self.spec, out_vars.clone(), cap);
        for (e, c) in &self.terms {
            if total(e) > cap {
                continue;
            }
            let mut term = one.scalar_mul(c);
            for (v, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[v].len() <= k as usize {
                    let next = powers[v].last().unwrap().mul(&powers[v][1]);
                    powers[v].push(next);
                }
                term = term.mul(&powers[v][k as usize]);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Compositional inverse of a one-variable series with unit linear term:
    /// g with g(f(T)) = f(g(T)) = T to the cap.
    pub fn compositional_inverse(&self) -> Result<TruncatedSeries> {
        assert_eq!(self.nvars(), 1, "compositional inverse is univariate");
        if !self.coeff(&[0]).is_exact_zero() {
            return Err(LtError::NonzeroConstantInComposition);
        }
        let c1 = self.coeff(&[1]);
        let c1_inv = match c1.v_varpi() {
            Ok(crate::rat::Val::Finite(v)) if v == crate::rat::Rat::zero() => {
                c1.invert_unit().expect("unit linear term inverts")
            }
            _ => {
                return Err(LtError::NonUnitLinearTerm(
                    "linear coefficient is not a unit".into(),
                ))
            }
        };
        let mut g = TruncatedSeries::zero_uni(&self.spec, self.cap);
        g.set(vec![1], c1_inv.clone());
        for k in 2..=self.cap {
            let h = self.truncate(k).substitute(&[g.clone()])?;
            let hk = h.coeff(&[k as u32]);
            if hk.is_exact_zero() {
                continue;
            }
            g.set(vec![k as u32], hk.mul(&c1_inv).neg());
        }
        // both-sided verification
        let fg = self.substitute(&[g.clone()])?;
        let gf = g.substitute(&[self.clone()])?;
        let t = TruncatedSeries::monomial(
            &self.spec,
            self.vars.clone(),
            self.cap,
            vec![1],
            OFElem::one(&self.spec),
        );
        if !fg.same_value(&t) || !gf.same_value(&t) {
            return Err(LtError::PrecisionExhausted(
                "compositional inverse failed verification at working precision".into(),
            ));
        }
        Ok(g)
    }

    /// All stored coefficients vanish at their known precision.
    pub fn is_zero_at_prec(&self) -> bool {
        self.terms.values().all(|c| c.is_zero_at_prec())
    }

    /// Coefficient-wise agreement at common precision, up to the common cap.
    pub fn same_value(&self, other: &TruncatedSeries) -> bool {
        self.sub(other).is_zero_at_prec()
    }

    /// First coefficient of the difference that fails to vanish, for reports.
    pub fn first_discrepancy(&self, other: &TruncatedSeries) -> Option<(Exp, OFElem)> {
        let d = self.sub(other);
        d.sorted_terms()
            .into_iter()
            .find(|(_, c)| !c.is_zero_at_prec())
            .map(|(e, c)| (e.clone(), c.clone()))
    }

    /// Canonical JSON: {"vars": [...], "cap": D,
    /// "terms":[{"e":[...],"c":...},...]} sorted by (total degree, lex).
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let terms: Vec<serde_json::Value> = self
            .sorted_terms()
            .into_iter()
            .map(|(e, c)| json!({"e": e, "c": c.to_json()}))
            .collect();
        json!({"vars": self.vars, "cap": self.cap, "terms": terms})
    }

    pub fn from_json(
        spec: &Arc<LocalFieldSpec>,
        v: &serde_json::Value,
    ) -> Result<TruncatedSeries> {
        let bad = |m: &str| LtError::BadInput(format!("series json: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
        let vars: Vec<String> = obj
            .get("vars")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing vars"))?
            .iter()
            .map(|x| x.as_str().map(String::from))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("bad vars"))?;
        let cap = obj
            .get("cap")
            .and_then(|x| x.as_i64())
            .ok_or_else(|| bad("missing cap"))?;
        let mut s = TruncatedSeries::zero(spec, vars, cap);
        for t in obj
            .get("terms")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing terms"))?
        {
            let e: Exp = t
                .get("e")
                .and_then(|x| x.as_array())
                .ok_or_else(|| bad("term missing e"))?
                .iter()
                .map(|x| x.as_u64().map(|v| v as u32))
                .collect::<Option<_>>()
                .ok_or_else(|| bad("bad exponent"))?;
            let c = OFElem::from_json(spec, t.get("c").ok_or_else(|| bad("term missing c"))?)?;
            s.set(e, c);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::make_local_field;

    fn z2(prec: i64) -> Arc<LocalFieldSpec> {
        make_local_field(2, 1, vec![0, 1], vec![vec![-2], vec![1]], prec).unwrap()
    }

    fn uni(spec: &Arc<LocalFieldSpec>, cap: i64, coeffs: &[i64]) -> TruncatedSeries {
        let poly: Vec<OFElem> = coeffs.iter().map(|&c| OFElem::from_i64(spec, c)).collect();
        TruncatedSeries::from_poly(spec, &poly, "T", cap)
    }

    #[test]
    fn mul_truncates_by_total_degree() {
        let spec = z2(8);
        let a = uni(&spec, 3, &[0, 1, 1]); // T + T^2
        let b = a.mul(&a); // T^2 + 2T^3 (+ T^4 dropped)
        assert!(b.coeff(&[2]).same_value(&OFElem::from_i64(&spec, 1)));
        assert!(b.coeff(&[3]).same_value(&OFElem::from_i64(&spec, 2)));
        assert!(b.coeff(&[4]).is_exact_zero());
    }

    #[test]
    fn substitution_rejects_constant_terms() {
        let spec = z2(8);
        let f = uni(&spec, 4, &[0, 1, 1]);
        let g = uni(&spec, 4, &[1, 1]);
        assert!(matches!(
            f.substitute(&[g]).unwrap_err(),
            LtError::NonzeroConstantInComposition
        ));
    }

    #[test]
    fn compositional_inverse_of_t_plus_t2() {
        // inverse of T + T^2 at cap 4: T - T^2 + 2T^3 - 5T^4
        let spec = z2(12);
        let f = uni(&spec, 4, &[0, 1, 1]);
        let g = f.compositional_inverse().unwrap();
        let want = uni(&spec, 4, &[0, 1, -1, 2, -5]);
        assert!(g.same_value(&want));
    }

    #[test]
    fn nonunit_linear_term_rejected() {
        let spec = z2(8);
        let f = uni(&spec, 4, &[0, 2, 1]); // 2T + T^2 over Z_2
        assert!(matches!(
            f.compositional_inverse().unwrap_err(),
            LtError::NonUnitLinearTerm(_)
        ));
    }

    #[test]
    fn bivariate_substitution() {
        let spec = z2(8);
        let vars = vec!["X".to_string(), "Y".to_string()];
        // s = X + Y + XY
        let mut s = TruncatedSeries::zero(&spec, vars.clone(), 4);
        s.set(vec![1, 0], OFElem::one(&spec));
        s.set(vec![0, 1], OFElem::one(&spec));
        s.set(vec![1, 1], OFElem::one(&spec));
        // substitute X -> X, Y -> X: expect 2X + X^2
        let x = TruncatedSeries::monomial(&spec, vars.clone(), 4, vec![1, 0], OFElem::one(&spec));
        let got = s.substitute(&[x.clone(), x]).unwrap();
        let mut want = TruncatedSeries::zero(&spec, vars, 4);
        want.set(vec![1, 0], OFElem::from_i64(&spec, 2));
        want.set(vec![2, 0], OFElem::one(&spec));
        assert!(got.same_value(&want));
    }

    #[test]
    fn json_roundtrip_sorted() {
        let spec = z2(6);
        let vars = vec!["X".to_string(), "Y".to_string()];
        let mut s = TruncatedSeries::zero(&spec, vars, 5);
        s.set(vec![0, 3], OFElem::from_i64(&spec, 3));
        s.set(vec![1, 0], OFElem::one(&spec));
        s.set(vec![2, 1], OFElem::from_i64(&spec, -1));
        let j = s.to_json();
        let terms = j["terms"].as_array().unwrap();
        // sorted by (total degree, lex): [1,0], [0,3], [2,1]
        assert_eq!(terms[0]["e"], serde_json::json!([1, 0]));
        assert_eq!(terms[1]["e"], serde_json::json!([0, 3]));
        assert_eq!(terms[2]["e"], serde_json::json!([2, 1]));
        let back = TruncatedSeries::from_json(&spec, &j).unwrap();
        assert!(back.same_value(&s));
        assert_eq!(back.to_json(), j);
    }
}
