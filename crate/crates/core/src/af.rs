//! A_F-with-coefficients: finite Laurent expansions in pi with integral
//! coefficients taken mod varpi^N, supported inside a hard exponent window.
//!
//! An element stores exact coefficient classes on exponents up to its own
//! validity bound `hi`; everything above `hi` is unknown, everything below
//! the lowest stored exponent is exactly zero. Products and substitutions
//! propagate `hi` by the usual exact-low-side Laurent rule, so a result is
//! never claimed on exponents its inputs cannot determine.
//!
//! The ring also carries the Lubin-Tate substitution actions: the Frobenius
//! pi -> f(pi) (identity on coefficients) and the Gamma action pi -> [a](pi)
//! for units a, with power tables cached per substitution series. Reduction
//! mod varpi lands in E_F.
//!
//! Coefficients may live in a ramified extension O_L of the base ring; base
//! constants are embedded through their integer representatives, so the base
//! field must be Q_p whenever the two rings differ.

use crate::ef::EFElem;
use crate::error::{LtError, Result};
use crate::fgroup::LTGroup;
use crate::local::{LocalFieldSpec, OFElem};
use crate::rat::{Rat, Val};
use crate::tower::int_rep_mod;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Shared parameters: coefficient ring, base field of the formal group,
/// coefficient precision N (varpi-digits of `spec`), and the hard exponent
/// window. Drivers must size the window for every substitution they plan;
/// a Frobenius application scales support by q.
pub struct AFRing {
    pub spec: Arc<LocalFieldSpec>,
    pub base: Arc<LocalFieldSpec>,
    pub n: i64,
    pub wlo: i64,
    pub whi: i64,
}

impl std::fmt::Debug for AFRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "AFRing(N={}, window=[{},{}], coeffs over {:?})",
            self.n, self.wlo, self.whi, self.spec
        )
    }
}

impl AFRing {
    pub fn new(
        spec: &Arc<LocalFieldSpec>,
        base: &Arc<LocalFieldSpec>,
        n: i64,
        wlo: i64,
        whi: i64,
    ) -> Result<Arc<AFRing>> {
        if n < 1 {
            return Err(LtError::BadInput("coefficient precision must be >= 1".into()));
        }
        if spec.prec < n {
            return Err(LtError::PrecisionExhausted(format!(
                "coefficient ring carries {} digits, {} requested",
                spec.prec, n
            )));
        }
        if !(wlo <= 0 && 0 <= whi) {
            return Err(LtError::BadInput(
                "exponent window must contain 0 so the ring has a unit".into(),
            ));
        }
        if **base != **spec && (base.d() != 1 || base.e != 1) {
            return Err(LtError::BadInput(
                "coefficient embedding is only defined over an absolutely unramified prime base".into(),
            ));
        }
        // base constants must survive to N digits after embedding
        let need = (n + spec.ram() - 1) / spec.ram();
        if **base != **spec && base.prec < need {
            return Err(LtError::PrecisionExhausted(format!(
                "base precision {} cannot populate {} coefficient digits",
                base.prec, n
            )));
        }
        Ok(Arc::new(AFRing {
            spec: spec.clone(),
            base: base.clone(),
            n,
            wlo,
            whi,
        }))
    }

    /// Carry a base-field constant into the coefficient ring as a class
    /// mod varpi^N, via its integer representative.
    pub fn embed(&self, x: &OFElem) -> Result<OFElem> {
        assert!(*x.spec == *self.base, "embedding expects a base-field element");
        if *self.base == *self.spec {
            return Ok(x.clone());
        }
        if x.is_exact_zero() {
            return Ok(OFElem::zero(&self.spec));
        }
        match x.v_varpi() {
            Ok(Val::Finite(v)) if v >= Rat::zero() => {}
            Ok(_) | Err(_) => {
                if x.is_zero_at_prec() && x.abs_prec() * self.spec.ram() >= self.n {
                    // zero class to full precision: embeds to the zero class
                    return Ok(OFElem::zero(&self.spec));
                }
                return Err(LtError::BadInput(
                    "only integral base constants embed into the coefficient ring".into(),
                ));
            }
        }
        let e = self.spec.ram();
        let k = (self.n + e - 1) / e;
        if x.abs_prec() < k {
            return Err(LtError::PrecisionExhausted(format!(
                "base constant known to {} digits, embedding needs {}",
                x.abs_prec(),
                k
            )));
        }
        let rep = int_rep_mod(x, k as u32)?;
        if rep > i64::MAX as u64 {
            return Err(LtError::BadInput("integer representative overflows".into()));
        }
        Ok(OFElem::from_i64(&self.spec, rep as i64).reduce_abs_prec(e * k))
    }
}

#[derive(Clone)]
pub struct AFElem {
    pub ring: Arc<AFRing>,
    /// Coefficients at exponents <= hi are exact classes mod varpi^N;
    /// above hi they are unknown.
    pub hi: i64,
    coeffs: BTreeMap<i64, OFElem>,
}

impl std::fmt::Debug for AFElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AF(")?;
        for (e, c) in &self.coeffs {
            write!(f, "({:?})*pi^{e} ", c)?;
        }
        write!(f, "+ unknown above {})", self.hi)
    }
}

impl AFElem {
    /// The exact zero, known across the whole window.
    pub fn zero(ring: &Arc<AFRing>) -> AFElem {
        AFElem {
            ring: ring.clone(),
            hi: ring.whi,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn one(ring: &Arc<AFRing>) -> AFElem {
        let mut x = AFElem::zero(ring);
        x.set(0, OFElem::one(&ring.spec)).expect("0 is inside the window");
        x
    }

    pub fn pi_pow(ring: &Arc<AFRing>, k: i64) -> Result<AFElem> {
        let mut x = AFElem::zero(ring);
        x.set(k, OFElem::one(&ring.spec))?;
        Ok(x)
    }

    /// The constant c, exact across the whole window.
    pub fn constant(ring: &Arc<AFRing>, c: &OFElem) -> Result<AFElem> {
        let mut x = AFElem::zero(ring);
        x.set(0, c.clone())?;
        Ok(x)
    }

    /// Build from explicit terms; the result is an exact Laurent polynomial.
    pub fn from_terms(ring: &Arc<AFRing>, terms: &[(i64, OFElem)]) -> Result<AFElem> {
        let mut x = AFElem::zero(ring);
        for (e, c) in terms {
            let cur = x.known_coeff(*e).unwrap_or_else(|| OFElem::zero(&ring.spec));
            x.set(*e, cur.add(c))?;
        }
        Ok(x)
    }

    /// Forget everything above `hi` (for seeding partially known elements).
    pub fn clamp_hi(mut self, hi: i64) -> AFElem {
        self.hi = self.hi.min(hi);
        self.coeffs.retain(|e, _| *e <= hi);
        self
    }

    /// Insert one coefficient class. Values are reduced mod varpi^N; classes
    /// that vanish are dropped. Exponents above the validity bound are
    /// silently unknown; exponents outside the hard window are errors.
    pub fn set(&mut self, e: i64, c: OFElem) -> Result<()> {
        if e < self.ring.wlo || e > self.ring.whi {
            return Err(LtError::WindowOverflow {
                exp: e,
                lo: self.ring.wlo,
                hi: self.ring.whi,
            });
        }
        if e > self.hi {
            return Ok(());
        }
        if !c.is_exact_zero() {
            match c.v_varpi() {
                Ok(Val::Finite(v)) if v < Rat::zero() => {
                    return Err(LtError::BadInput(
                        "coefficients of A_F elements must be integral".into(),
                    ))
                }
                _ => {}
            }
        }
        let c = c.reduce_abs_prec(self.ring.n.min(c.abs_prec().max(1)));
        if c.is_zero_at_prec() && c.abs_prec() >= self.ring.n {
            self.coeffs.remove(&e);
        } else if c.is_exact_zero() {
            self.coeffs.remove(&e);
        } else if c.is_zero_at_prec() {
            return Err(LtError::PrecisionExhausted(format!(
                "coefficient at pi^{e} is only known to {} of {} digits",
                c.abs_prec(),
                self.ring.n
            )));
        } else {
            self.coeffs.insert(e, c);
        }
        Ok(())
    }

    /// The coefficient class at e, when it is determined: zero below the
    /// support, stored value inside it, None above the validity bound.
    pub fn known_coeff(&self, e: i64) -> Option<OFElem> {
        if e > self.hi || e < self.ring.wlo {
            return None;
        }
        Some(
            self.coeffs
                .get(&e)
                .cloned()
                .unwrap_or_else(|| OFElem::zero(&self.ring.spec)),
        )
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &OFElem)> {
        self.coeffs.iter()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// Certified support floor: terms below this are exactly zero.
    fn support_floor(&self) -> i64 {
        self.min_exp().unwrap_or(self.hi + 1)
    }

    /// No nonzero class anywhere on the known range.
    pub fn is_zero_on_window(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn assert_same_ring(&self, other: &AFElem) {
        assert!(
            Arc::ptr_eq(&self.ring, &other.ring),
            "mixed coefficient rings"
        );
    }

    pub fn add(&self, other: &AFElem) -> AFElem {
        self.assert_same_ring(other);
        let hi = self.hi.min(other.hi);
        let mut out = AFElem {
            ring: self.ring.clone(),
            hi,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if *e > hi {
                continue;
            }
            let cur = out
                .coeffs
                .get(e)
                .cloned()
                .unwrap_or_else(|| OFElem::zero(&self.ring.spec));
            out.set(*e, cur.add(c)).expect("operand exponents stay in window");
        }
        out
    }

    pub fn neg(&self) -> AFElem {
        let mut out = self.clone();
        let coeffs = std::mem::take(&mut out.coeffs);
        for (e, c) in coeffs {
            out.coeffs.insert(e, c.neg());
        }
        out
    }

    pub fn sub(&self, other: &AFElem) -> AFElem {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, s: &OFElem) -> AFElem {
        assert!(*s.spec == *self.ring.spec, "scalar from the coefficient ring");
        let mut out = AFElem {
            ring: self.ring.clone(),
            hi: self.hi,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            out.set(*e, c.mul(s)).expect("support unchanged");
        }
        out
    }

    /// Laurent product. The validity bound follows the exact-low-side rule
    /// hi = min(hi_x + lo_y, hi_y + lo_x); classes that survive below the
    /// hard window are an overflow, classes above it are simply unknown.
    pub fn mul(&self, other: &AFElem) -> Result<AFElem> {
        self.assert_same_ring(other);
        let lo_x = self.support_floor();
        let lo_y = other.support_floor();
        let hi = (self.hi + lo_y).min(other.hi + lo_x).min(self.ring.whi);
        let mut raw: BTreeMap<i64, OFElem> = BTreeMap::new();
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &other.coeffs {
                let e = ea + eb;
                if e > hi {
                    continue;
                }
                let prod = ca.mul(cb);
                let val = match raw.get(&e) {
                    Some(cur) => cur.add(&prod),
                    None => prod,
                };
                raw.insert(e, val);
            }
        }
        let mut out = AFElem {
            ring: self.ring.clone(),
            hi,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in raw {
            if e < self.ring.wlo {
                let c = c.reduce_abs_prec(self.ring.n.min(c.abs_prec().max(1)));
                if c.is_exact_zero() || (c.is_zero_at_prec() && c.abs_prec() >= self.ring.n) {
                    continue; // the class cancels; nothing leaks out
                }
                return Err(LtError::WindowOverflow {
                    exp: e,
                    lo: self.ring.wlo,
                    hi: self.ring.whi,
                });
            }
            out.set(e, c)?;
        }
        Ok(out)
    }

    pub fn pow(&self, n: u64) -> Result<AFElem> {
        let mut acc = AFElem::one(&self.ring);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Multiply by pi^k.
    pub fn shift_exponents(&self, k: i64) -> Result<AFElem> {
        let hi = (self.hi + k).min(self.ring.whi);
        let mut out = AFElem {
            ring: self.ring.clone(),
            hi,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            if e + k > hi {
                continue;
            }
            if e + k < self.ring.wlo {
                return Err(LtError::WindowOverflow {
                    exp: e + k,
                    lo: self.ring.wlo,
                    hi: self.ring.whi,
                });
            }
            out.coeffs.insert(e + k, c.clone());
        }
        Ok(out)
    }

    /// Inverse of a unit: the reduction mod varpi must have a unit leading
    /// coefficient somewhere on the window. Peels the leading term and sums
    /// the geometric series; termination is the correctness proof, since the
    /// final vanishing power clamps the validity window of the sum.
    pub fn invert(&self) -> Result<AFElem> {
        let Some(v) = self
            .coeffs
            .iter()
            .find(|(_, c)| matches!(c.v_varpi(), Ok(Val::Finite(z)) if z == Rat::zero()))
            .map(|(e, _)| *e)
        else {
            return Err(LtError::NotAUnit(
                "reduction mod varpi vanishes on the window; no leading unit to peel".into(),
            ));
        };
        let t = self.coeffs.get(&v).expect("just found").clone();
        let t_inv = t.invert_unit()?;
        let lead_inv = AFElem::pi_pow(&self.ring, -v)?.scalar_mul(&t_inv);
        let u = AFElem::one(&self.ring).sub(&self.mul(&lead_inv)?);
        let mut acc = AFElem::one(&self.ring);
        let mut upow = u.clone();
        let mut steps = 0usize;
        while !upow.is_zero_on_window() {
            acc = acc.add(&upow);
            upow = upow.mul(&u)?;
            steps += 1;
            if steps > 10_000 {
                return Err(LtError::PrecisionExhausted(
                    "geometric series for the inverse does not terminate in the window".into(),
                ));
            }
        }
        // the vanishing power still carries a validity bound; fold it in
        acc = acc.add(&upow);
        let out = acc.mul(&lead_inv)?;
        if out.hi < self.ring.wlo {
            return Err(LtError::PrecisionExhausted(
                "inversion exhausted the exponent window".into(),
            ));
        }
        let check = self.mul(&out)?;
        // the constant term must be checkable, or the verification is vacuous
        if check.hi < 0 || !check.same_value(&AFElem::one(&self.ring)) {
            return Err(LtError::PrecisionExhausted(
                "inverse verification failed inside the window".into(),
            ));
        }
        Ok(out)
    }

    /// Agreement of all determined coefficients on the common validity range.
    pub fn same_value(&self, other: &AFElem) -> bool {
        self.sub(other).is_zero_on_window()
    }

    /// Reduction mod varpi, landing in k((pibar)) with the same window.
    pub fn reduce_mod_varpi(&self) -> EFElem {
        let mut out = EFElem::zero(&self.ring.spec, 0, Rat::int(self.hi + 1));
        for (e, c) in &self.coeffs {
            let r = c.residue().expect("integral coefficient with at least one digit");
            out.set(Rat::int(*e), r).expect("integral exponents");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let mut coeffs = serde_json::Map::new();
        for (e, c) in &self.coeffs {
            coeffs.insert(e.to_string(), c.to_json());
        }
        json!({
            "window": [self.support_floor().min(self.hi), self.hi],
            "prec": self.ring.n,
            "coeffs": coeffs,
        })
    }

    pub fn from_json(ring: &Arc<AFRing>, v: &serde_json::Value) -> Result<AFElem> {
        let bad = |m: &str| LtError::BadInput(format!("AFElem json: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
        let window = obj
            .get("window")
            .and_then(|w| w.as_array())
            .ok_or_else(|| bad("missing window"))?;
        let hi = window
            .get(1)
            .and_then(|x| x.as_i64())
            .ok_or_else(|| bad("bad window bound"))?;
        let mut out = AFElem::zero(ring).clamp_hi(hi);
        let coeffs = obj
            .get("coeffs")
            .and_then(|c| c.as_object())
            .ok_or_else(|| bad("missing coeffs"))?;
        for (k, cv) in coeffs {
            let e: i64 = k.parse().map_err(|_| bad("non-integer exponent"))?;
            out.set(e, OFElem::from_json(&ring.spec, cv)?)?;
        }
        Ok(out)
    }
}

/// s^j for the exponents a substitution needs, grown on demand.
struct PowTable {
    pos: Vec<AFElem>,
    neg: Vec<AFElem>,
}

impl PowTable {
    fn new(ring: &Arc<AFRing>, s: AFElem) -> PowTable {
        PowTable {
            pos: vec![AFElem::one(ring), s],
            neg: vec![AFElem::one(ring)],
        }
    }

    fn ensure(&mut self, jpos: i64, jneg: i64) -> Result<()> {
        while (self.pos.len() as i64) <= jpos {
            let next = self.pos.last().unwrap().mul(&self.pos[1])?;
            self.pos.push(next);
        }
        if jneg > 0 && self.neg.len() == 1 {
            self.neg.push(self.pos[1].invert()?);
        }
        while (self.neg.len() as i64) <= jneg {
            let next = self.neg.last().unwrap().mul(&self.neg[1])?;
            self.neg.push(next);
        }
        Ok(())
    }

    fn power(&self, j: i64) -> &AFElem {
        if j >= 0 {
            &self.pos[j as usize]
        } else {
            &self.neg[(-j) as usize]
        }
    }
}

/// The Frobenius and Gamma substitution actions on a ring, sharing cached
/// power tables of the substituted series.
pub struct AFOperators {
    pub ring: Arc<AFRing>,
    pub group: Arc<LTGroup>,
    tables: Mutex<BTreeMap<String, PowTable>>,
}

impl AFOperators {
    pub fn new(ring: &Arc<AFRing>, group: &Arc<LTGroup>) -> AFOperators {
        assert!(
            *group.spec == *ring.base,
            "the formal group must live over the ring's base field"
        );
        AFOperators {
            ring: ring.clone(),
            group: group.clone(),
            tables: Mutex::new(BTreeMap::new()),
        }
    }

    /// phi(pi) = f(pi) as a ring element; exact.
    pub fn phi_series(&self) -> Result<AFElem> {
        let mut s = AFElem::zero(&self.ring);
        for (j, c) in self.group.f.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            s.set(j as i64, self.ring.embed(c)?)?;
        }
        Ok(s)
    }

    /// [a](pi) as a ring element, known through the group's series cap.
    pub fn gamma_series(&self, a: &OFElem) -> Result<AFElem> {
        let series = self.group.endo(a)?;
        let mut s = AFElem::zero(&self.ring).clamp_hi(self.group.cap.min(self.ring.whi));
        for (exp, c) in series.sorted_terms() {
            s.set(exp[0] as i64, self.ring.embed(c)?)?;
        }
        Ok(s)
    }

    fn apply(&self, key: String, s: impl FnOnce() -> Result<AFElem>, x: &AFElem) -> Result<AFElem> {
        let mut tables = self.tables.lock().expect("table lock");
        if !tables.contains_key(&key) {
            let series = s()?;
            tables.insert(key.clone(), PowTable::new(&self.ring, series));
        }
        let table = tables.get_mut(&key).expect("just inserted");
        let jpos = x.max_exp().unwrap_or(0).max(0);
        let jneg = (-x.min_exp().unwrap_or(0)).max(0);
        table.ensure(jpos, jneg)?;

        let mut out = AFElem::zero(&self.ring);
        for (e, c) in &x.coeffs {
            out = out.add(&table.power(*e).scalar_mul(c));
        }
        // the unknown tail of x enters at exponent x.hi + 1, since every
        // substituted series has order one
        let hi = out.hi.min(x.hi);
        let out = out.clamp_hi(hi);
        if out.hi < self.ring.wlo {
            return Err(LtError::CapInsufficient {
                cap: self.group.cap,
                tail_val: format!("pi^{}", out.hi + 1),
                target: self.ring.wlo,
            });
        }
        Ok(out)
    }

    /// The ring Frobenius: identity on coefficients, pi -> f(pi).
    pub fn frobenius(&self, x: &AFElem) -> Result<AFElem> {
        self.apply("phi".into(), || self.phi_series(), x)
    }

    /// The Gamma action of a unit a: pi -> [a](pi), identity on coefficients.
    pub fn gamma(&self, a: &OFElem, x: &AFElem) -> Result<AFElem> {
        match a.v_varpi() {
            Ok(Val::Finite(v)) if v == Rat::zero() => {}
            _ => {
                return Err(LtError::NotAUnit(
                    "the Gamma action is defined for units only".into(),
                ))
            }
        }
        let key = format!("gamma:{}", a.to_json());
        self.apply(key, || self.gamma_series(a), x)
    }

    pub fn gamma_i64(&self, a: i64, x: &AFElem) -> Result<AFElem> {
        self.gamma(&OFElem::from_i64(&self.group.spec, a), x)
    }
}
