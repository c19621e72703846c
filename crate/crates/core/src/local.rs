//! Truncated arithmetic in O_F and F for a finite extension F/Q_p.
//!
//! F is presented as a bivariate quotient: an unramified layer
//! Z_p[t]/(modulus) of degree d, then an Eisenstein extension of degree e.
//! An element is varpi^shift times a mantissa, the mantissa a polynomial of
//! degree < e in the Eisenstein variable whose coefficients live in the
//! unramified layer at per-coefficient digit caps. Canonical form keeps the
//! mantissa a unit whenever the element is provably nonzero, so valuations
//! and precision loss are exact bookkeeping, never estimates.
//!
//! Precision discipline: an element carries `prec` known varpi-digits of its
//! mantissa; absolute precision is `shift + prec`. Arithmetic never reports
//! more digits than the inputs justify. Exact division by varpi^k costs
//! exactly k digits.

use crate::error::{LtError, Result};
use crate::ff::{FFElem, FiniteFieldSpec};
use crate::rat::Val;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::fmt;
use std::sync::Arc;

/// Mantissa precision tag for the exact zero element.
pub const PREC_EXACT: i64 = i64::MAX / 4;

/// Coefficient in the unramified layer: d residues mod a power of p.
pub type UnramElem = Vec<BigUint>;

/// A finite extension F/Q_p with working precision, presented as
/// unramified-then-Eisenstein.
pub struct LocalFieldSpec {
    pub ff: FiniteFieldSpec,
    pub e: usize,
    /// Eisenstein polynomial, length e+1, coefficients as integer polynomials
    /// (degree < d) in the unramified generator; monic.
    pub eisenstein: Vec<Vec<i64>>,
    /// Working precision in varpi-digits.
    pub prec: i64,
    p_big: BigUint,
    /// Residue-field modulus lifted to Z (digits 0..p-1).
    ff_mod_lift: Vec<BigUint>,
    /// b_i = eisenstein[i] / p for i < e; exact integer division.
    eis_div_p: Vec<Vec<i64>>,
}

impl PartialEq for LocalFieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.ff == other.ff
            && self.e == other.e
            && self.eisenstein == other.eisenstein
            && self.prec == other.prec
    }
}

impl fmt::Debug for LocalFieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LocalField(p={}, d={}, e={}, prec={})",
            self.ff.p, self.ff.d, self.e, self.prec
        )
    }
}

/// Build a field spec, validating the residue modulus and the Eisenstein
/// criterion. `eisenstein` has length e+1, each coefficient an integer
/// polynomial of degree < d in the unramified generator.
pub fn make_local_field(
    p: u64,
    d: usize,
    modulus: Vec<u64>,
    eisenstein: Vec<Vec<i64>>,
    prec: i64,
) -> Result<Arc<LocalFieldSpec>> {
    let ff = FiniteFieldSpec::new(p, d, modulus)?;
    assert!(prec >= 1, "working precision must be at least one digit");
    let e = eisenstein.len().saturating_sub(1);
    if e < 1 {
        return Err(LtError::BadInput("eisenstein polynomial must have degree >= 1".into()));
    }
    for (i, c) in eisenstein.iter().enumerate() {
        if c.len() > d && c.iter().skip(d).any(|&x| x != 0) {
            return Err(LtError::BadInput(format!(
                "eisenstein coefficient {i} has degree >= d"
            )));
        }
    }
    let lead = &eisenstein[e];
    if lead.first() != Some(&1) || lead.iter().skip(1).any(|&x| x != 0) {
        return Err(LtError::NotEisenstein("polynomial is not monic".into()));
    }
    let pi = p as i64;
    for (i, c) in eisenstein.iter().enumerate().take(e) {
        if c.iter().any(|&x| x.rem_euclid(pi) != 0) {
            return Err(LtError::NotEisenstein(format!(
                "coefficient of X^{i} is a unit; all lower coefficients must be divisible by varpi-level p"
            )));
        }
    }
    let eis_div_p: Vec<Vec<i64>> = eisenstein
        .iter()
        .take(e)
        .map(|c| c.iter().map(|&x| x / pi).collect())
        .collect();
    // constant term must have valuation exactly one: a_0/p a unit
    let a0p = &eis_div_p[0];
    if a0p.iter().all(|&x| x.rem_euclid(pi) == 0) {
        return Err(LtError::NotEisenstein(
            "constant term divisible by p^2; valuation must be exactly 1".into(),
        ));
    }
    let ff_mod_lift = ff.modulus.iter().map(|&c| BigUint::from(c)).collect();
    Ok(Arc::new(LocalFieldSpec {
        p_big: BigUint::from(p),
        ff,
        e,
        eisenstein,
        prec,
        ff_mod_lift,
        eis_div_p,
    }))
}

impl LocalFieldSpec {
    pub fn p(&self) -> u64 {
        self.ff.p
    }

    pub fn d(&self) -> usize {
        self.ff.d
    }

    pub fn q(&self) -> u64 {
        self.ff.q()
    }

    /// Absolute ramification over Q_p equals e (the unramified layer adds none).
    pub fn ram(&self) -> i64 {
        self.e as i64
    }

    /// Digit cap: varpi^i coefficient of a mantissa known to `prec` digits is
    /// stored mod p^cap(prec, i).
    fn cap(&self, prec: i64, i: usize) -> u32 {
        let num = prec - i as i64;
        if num <= 0 {
            0
        } else {
            ((num + self.e as i64 - 1) / self.e as i64) as u32
        }
    }

    fn pcap(&self, cap: u32) -> BigUint {
        self.p_big.pow(cap)
    }

    // ---- unramified layer -------------------------------------------------

    fn un_zero(&self) -> UnramElem {
        vec![BigUint::zero(); self.ff.d]
    }

    fn un_from_int_poly(&self, poly: &[i64], cap: u32) -> UnramElem {
        let m = self.pcap(cap);
        let mut out = self.un_zero();
        for (i, &c) in poly.iter().enumerate() {
            assert!(i < self.ff.d, "unramified coefficient degree out of range");
            if m.is_zero() || m.is_one() {
                continue;
            }
            let mi = num_bigint::BigInt::from_biguint(num_bigint::Sign::Plus, m.clone());
            let r = num_traits::Euclid::rem_euclid(&num_bigint::BigInt::from(c), &mi);
            out[i] = r.to_biguint().unwrap();
        }
        out
    }

    fn un_reduce(&self, a: &UnramElem, cap: u32) -> UnramElem {
        if cap == 0 {
            return self.un_zero();
        }
        let m = self.pcap(cap);
        a.iter().map(|x| x % &m).collect()
    }

    fn un_add(&self, a: &UnramElem, b: &UnramElem, cap: u32) -> UnramElem {
        let m = self.pcap(cap);
        a.iter().zip(b).map(|(x, y)| (x + y) % &m).collect()
    }

    fn un_sub(&self, a: &UnramElem, b: &UnramElem, cap: u32) -> UnramElem {
        let m = self.pcap(cap);
        a.iter().zip(b).map(|(x, y)| ((x + &m) - (y % &m)) % &m).collect()
    }

    fn un_mul(&self, a: &UnramElem, b: &UnramElem, cap: u32) -> UnramElem {
        let d = self.ff.d;
        let m = self.pcap(cap);
        if d == 1 {
            return vec![(&a[0] * &b[0]) % &m];
        }
        let mut prod = vec![BigUint::zero(); 2 * d - 1];
        for i in 0..d {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..d {
                prod[i + j] = (&prod[i + j] + &a[i] * &b[j]) % &m;
            }
        }
        // reduce by the monic lifted residue modulus
        for k in (d..2 * d - 1).rev() {
            let t = std::mem::replace(&mut prod[k], BigUint::zero());
            if t.is_zero() {
                continue;
            }
            for j in 0..d {
                let s = (&t * &self.ff_mod_lift[j]) % &m;
                prod[k - d + j] = ((&prod[k - d + j] + &m) - s) % &m;
            }
        }
        prod.truncate(d);
        prod
    }

    fn un_is_zero(&self, a: &UnramElem, cap: u32) -> bool {
        if cap == 0 {
            return true;
        }
        let m = self.pcap(cap);
        a.iter().all(|x| (x % &m).is_zero())
    }

    /// p-adic valuation of an unramified element, within `cap` digits;
    /// None when all digits vanish.
    fn un_vp(&self, a: &UnramElem, cap: u32) -> Option<u32> {
        let mut best: Option<u32> = None;
        for x in a {
            let x = x % self.pcap(cap);
            if x.is_zero() {
                continue;
            }
            let mut v = 0u32;
            let mut y = x;
            while (&y % &self.p_big).is_zero() {
                y /= &self.p_big;
                v += 1;
            }
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        best
    }

    /// Exact division of all digits by p; caller guarantees divisibility.
    fn un_div_p(&self, a: &UnramElem) -> UnramElem {
        a.iter()
            .map(|x| {
                debug_assert!((x % &self.p_big).is_zero(), "inexact digit division by p");
                x / &self.p_big
            })
            .collect()
    }

    fn un_residue(&self, a: &UnramElem) -> FFElem {
        FFElem {
            c: a.iter()
                .map(|x| {
                    use num_traits::ToPrimitive;
                    (x % &self.p_big).to_u64().unwrap()
                })
                .collect(),
        }
    }

    fn un_from_ff(&self, x: &FFElem) -> UnramElem {
        x.c.iter().map(|&c| BigUint::from(c)).collect()
    }

    /// Newton inverse of a p-adic unit in the unramified layer mod p^cap.
    fn un_inv(&self, a: &UnramElem, cap: u32) -> UnramElem {
        let res = self.un_residue(a);
        let r_inv = self.ff.inv(&res).expect("unit has nonzero residue");
        let mut y = self.un_from_ff(&r_inv);
        let steps = 32 - (cap.max(1)).leading_zeros() + 1;
        let two = self.un_from_int_poly(&[2], cap);
        for _ in 0..steps {
            let ay = self.un_mul(a, &y, cap);
            let t = self.un_sub(&two, &ay, cap);
            y = self.un_mul(&y, &t, cap);
        }
        debug_assert!({
            let ay = self.un_mul(a, &y, cap);
            let one = self.un_from_int_poly(&[1], cap);
            ay == one
        });
        y
    }

    // ---- mantissa layer ---------------------------------------------------
    // A mantissa is Vec<UnramElem> of length e with digit caps cap(prec, i).

    fn man_reduce(&self, m: &mut [UnramElem], prec: i64) {
        for (i, c) in m.iter_mut().enumerate() {
            *c = self.un_reduce(c, self.cap(prec, i));
        }
    }

    fn man_is_zero(&self, m: &[UnramElem], prec: i64) -> bool {
        m.iter()
            .enumerate()
            .all(|(i, c)| self.un_is_zero(c, self.cap(prec, i)))
    }

    /// Valuation of a mantissa from its stored digits, None if all vanish.
    /// Exact because distinct varpi-powers contribute distinct valuations.
    fn man_val(&self, m: &[UnramElem], prec: i64) -> Option<i64> {
        let mut best: Option<i64> = None;
        for (i, c) in m.iter().enumerate() {
            if let Some(vp) = self.un_vp(c, self.cap(prec, i)) {
                let v = self.e as i64 * vp as i64 + i as i64;
                if v < prec {
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
            }
        }
        best
    }

    /// Multiply a mantissa by varpi, gaining one digit of headroom.
    fn man_mul_varpi(&self, m: &[UnramElem], prec: i64) -> Vec<UnramElem> {
        let e = self.e;
        let new_prec = prec + 1;
        let mut out = vec![self.un_zero(); e];
        let top = &m[e - 1];
        for j in 0..e {
            let cap = self.cap(new_prec, j);
            let aj = self.un_from_int_poly(&self.eisenstein[j], cap);
            let t = self.un_mul(&aj, top, cap);
            let prev = if j == 0 { self.un_zero() } else { m[j - 1].clone() };
            out[j] = self.un_sub(&prev, &t, cap);
        }
        out
    }

    /// Exact division of a mantissa by varpi, costing one digit.
    /// Requires the constant coefficient divisible by p within its cap.
    fn man_div_varpi(&self, m: &[UnramElem], prec: i64) -> Result<Vec<UnramElem>> {
        let e = self.e;
        let new_prec = prec - 1;
        let cap0 = self.cap(prec, 0);
        let c0 = self.un_reduce(&m[0], cap0);
        if !c0.iter().all(|x| (x % &self.p_big).is_zero()) {
            return Err(LtError::InexactDivision(
                "element not divisible by varpi at this precision".into(),
            ));
        }
        let top_cap = self.cap(new_prec, e - 1);
        // cap 0 means the top digit carries no information; don't invert there.
        let top = if top_cap == 0 {
            self.un_zero()
        } else {
            let b0 = self.un_from_int_poly(&self.eis_div_p[0], top_cap);
            let b0_inv = self.un_inv(&b0, top_cap);
            let q = self.un_div_p(&c0);
            // c'_{e-1} = -(c_0/p) * b_0^{-1}
            let t = self.un_mul(&q, &b0_inv, top_cap);
            self.un_sub(&self.un_zero(), &t, top_cap)
        };
        let mut out = vec![self.un_zero(); e];
        out[e - 1] = top.clone();
        for j in 1..e {
            // c'_{j-1} = c_j + p * c'_{e-1} * b_j
            let cap = self.cap(new_prec, j - 1);
            let bj = self.un_from_int_poly(&self.eis_div_p[j], cap);
            let t = self.un_mul(&bj, &top, cap);
            let pt: UnramElem = t.iter().map(|x| (x * &self.p_big) % self.pcap(cap)).collect();
            out[j - 1] = self.un_add(&self.un_reduce(&m[j], cap), &pt, cap);
        }
        Ok(out)
    }

    /// Schoolbook product of mantissas, folded by the monic Eisenstein
    /// polynomial, at target precision `prec`.
    fn man_mul(&self, a: &[UnramElem], b: &[UnramElem], prec: i64) -> Vec<UnramElem> {
        let e = self.e;
        let cap = self.cap(prec, 0);
        let mut prod = vec![self.un_zero(); 2 * e - 1];
        for i in 0..e {
            if self.un_is_zero(&a[i], cap) {
                continue;
            }
            for j in 0..e {
                let t = self.un_mul(&a[i], &b[j], cap);
                prod[i + j] = self.un_add(&prod[i + j], &t, cap);
            }
        }
        for k in (e..2 * e - 1).rev() {
            let t = std::mem::replace(&mut prod[k], self.un_zero());
            if self.un_is_zero(&t, cap) {
                continue;
            }
            for j in 0..e {
                let aj = self.un_from_int_poly(&self.eisenstein[j], cap);
                let s = self.un_mul(&t, &aj, cap);
                prod[k - e + j] = self.un_sub(&prod[k - e + j], &s, cap);
            }
        }
        prod.truncate(e);
        let mut out = prod;
        self.man_reduce(&mut out, prec);
        out
    }
}

/// Element of F: varpi^shift times a mantissa known to `prec` varpi-digits.
/// Canonical form: exact zero has empty meaning fields; a provably nonzero
/// element has unit mantissa; a zero-at-precision element has shift 0 and all
/// digits zero with `prec` recording the absolute bound.
#[derive(Clone)]
pub struct OFElem {
    pub spec: Arc<LocalFieldSpec>,
    shift: i64,
    prec: i64,
    coeffs: Vec<UnramElem>,
}

impl fmt::Debug for OFElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact_zero() {
            return write!(f, "0");
        }
        write!(f, "varpi^{}*[", self.shift)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}", c.iter().map(|x| x.to_string()).collect::<Vec<_>>())?;
        }
        write!(f, "]+O(varpi^{})", self.shift + self.prec)
    }
}

impl PartialEq for OFElem {
    /// Structural equality of canonical forms. Value comparison at common
    /// precision is `same_value`.
    fn eq(&self, other: &Self) -> bool {
        self.shift == other.shift && self.prec == other.prec && self.coeffs == other.coeffs
    }
}

impl OFElem {
    pub fn zero(spec: &Arc<LocalFieldSpec>) -> OFElem {
        OFElem {
            spec: spec.clone(),
            shift: 0,
            prec: PREC_EXACT,
            coeffs: vec![spec.un_zero(); spec.e],
        }
    }

    pub fn one(spec: &Arc<LocalFieldSpec>) -> OFElem {
        OFElem::from_i64(spec, 1)
    }

    pub fn from_i64(spec: &Arc<LocalFieldSpec>, n: i64) -> OFElem {
        if n == 0 {
            return OFElem::zero(spec);
        }
        let prec = spec.prec;
        let mut coeffs = vec![spec.un_zero(); spec.e];
        coeffs[0] = spec.un_from_int_poly(&[n], spec.cap(prec, 0));
        let mut x = OFElem {
            spec: spec.clone(),
            shift: 0,
            prec,
            coeffs,
        };
        x.canonicalize();
        x
    }

    /// Build from integer polynomials in (unramified generator, varpi-power
    /// slot). Powers beyond e are not accepted; fold externally first.
    pub fn from_int_polys(spec: &Arc<LocalFieldSpec>, polys: &[Vec<i64>]) -> OFElem {
        assert!(polys.len() <= spec.e, "mantissa degree must stay below e");
        // literal zero input means the exact zero, not a truncated one
        if polys.iter().all(|p| p.iter().all(|&c| c == 0)) {
            return OFElem::zero(spec);
        }
        let prec = spec.prec;
        let mut coeffs = vec![spec.un_zero(); spec.e];
        for (i, p) in polys.iter().enumerate() {
            coeffs[i] = spec.un_from_int_poly(p, spec.cap(prec, i));
        }
        let mut x = OFElem {
            spec: spec.clone(),
            shift: 0,
            prec,
            coeffs,
        };
        x.canonicalize();
        x
    }

    /// The uniformizer varpi as an element.
    pub fn varpi(spec: &Arc<LocalFieldSpec>) -> OFElem {
        if spec.e > 1 {
            let mut polys = vec![vec![0i64]];
            polys.push(vec![1]);
            OFElem::from_int_polys(spec, &polys)
        } else {
            // varpi = -a_0 when e = 1
            let neg_a0: Vec<i64> = spec.eisenstein[0].iter().map(|&c| -c).collect();
            OFElem::from_int_polys(spec, &[neg_a0])
        }
    }

    /// Teichmuller-free lift of a residue-field element (plain digit lift).
    pub fn lift_residue(spec: &Arc<LocalFieldSpec>, x: &FFElem) -> OFElem {
        let prec = spec.prec;
        let mut coeffs = vec![spec.un_zero(); spec.e];
        coeffs[0] = spec.un_reduce(&spec.un_from_ff(x), spec.cap(prec, 0));
        let mut el = OFElem {
            spec: spec.clone(),
            shift: 0,
            prec,
            coeffs,
        };
        el.canonicalize();
        el
    }

    pub fn is_exact_zero(&self) -> bool {
        self.prec == PREC_EXACT
    }

    /// All known digits vanish (includes the exact zero).
    pub fn is_zero_at_prec(&self) -> bool {
        self.is_exact_zero() || self.spec.man_is_zero(&self.coeffs, self.prec)
    }

    /// Known mantissa digits.
    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Absolute precision: the element is known mod varpi^abs_prec.
    pub fn abs_prec(&self) -> i64 {
        if self.is_exact_zero() {
            PREC_EXACT
        } else {
            self.shift + self.prec
        }
    }

    fn canonicalize(&mut self) {
        if self.is_exact_zero() {
            self.shift = 0;
            self.coeffs = vec![self.spec.un_zero(); self.spec.e];
            return;
        }
        let spec = self.spec.clone();
        spec.man_reduce(&mut self.coeffs, self.prec);
        match spec.man_val(&self.coeffs, self.prec) {
            None => {
                // zero at precision: record the absolute bound
                self.prec += self.shift;
                self.shift = 0;
                self.coeffs = vec![spec.un_zero(); spec.e];
            }
            Some(0) => {}
            Some(v) => {
                for _ in 0..v {
                    self.coeffs = spec
                        .man_div_varpi(&self.coeffs, self.prec)
                        .expect("valuation extraction is exact by construction");
                    self.prec -= 1;
                }
                self.shift += v;
                spec.man_reduce(&mut self.coeffs, self.prec);
            }
        }
    }

    fn assert_same_spec(&self, other: &OFElem) {
        assert!(
            Arc::ptr_eq(&self.spec, &other.spec) || *self.spec == *other.spec,
            "elements belong to different fields"
        );
    }

    pub fn add(&self, other: &OFElem) -> OFElem {
        self.assert_same_spec(other);
        if self.is_exact_zero() {
            return other.clone();
        }
        if other.is_exact_zero() {
            return self.clone();
        }
        let spec = &self.spec;
        let s = self.shift.min(other.shift);
        let abs = self.abs_prec().min(other.abs_prec());
        let prec = abs - s;
        assert!(prec >= 1, "addition exhausted all precision");
        let lift = |x: &OFElem| {
            let mut m = x.coeffs.clone();
            let mut p = x.prec;
            for _ in 0..(x.shift - s) {
                m = spec.man_mul_varpi(&m, p);
                p += 1;
            }
            m
        };
        let ma = lift(self);
        let mb = lift(other);
        let cap = spec.cap(prec, 0);
        let coeffs: Vec<UnramElem> = ma
            .iter()
            .zip(&mb)
            .map(|(a, b)| spec.un_add(a, b, cap))
            .collect();
        let mut out = OFElem {
            spec: spec.clone(),
            shift: s,
            prec,
            coeffs,
        };
        out.canonicalize();
        out
    }

    pub fn neg(&self) -> OFElem {
        if self.is_exact_zero() {
            return self.clone();
        }
        let spec = &self.spec;
        let cap = spec.cap(self.prec, 0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| spec.un_sub(&spec.un_zero(), c, cap))
            .collect();
        let mut out = OFElem {
            spec: spec.clone(),
            shift: self.shift,
            prec: self.prec,
            coeffs,
        };
        out.canonicalize();
        out
    }

    pub fn sub(&self, other: &OFElem) -> OFElem {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &OFElem) -> OFElem {
        self.assert_same_spec(other);
        if self.is_exact_zero() || other.is_exact_zero() {
            return OFElem::zero(&self.spec);
        }
        let spec = &self.spec;
        // zero-at-precision times anything: only the valuation bound survives
        if self.is_zero_at_prec() || other.is_zero_at_prec() {
            let bound = if self.is_zero_at_prec() {
                self.abs_prec() + other.shift
            } else {
                other.abs_prec() + self.shift
            };
            return OFElem {
                spec: spec.clone(),
                shift: 0,
                prec: bound.max(1),
                coeffs: vec![spec.un_zero(); spec.e],
            };
        }
        let prec = self.prec.min(other.prec);
        assert!(prec >= 1, "multiplication exhausted all precision");
        let coeffs = spec.man_mul(&self.coeffs, &other.coeffs, prec);
        let mut out = OFElem {
            spec: spec.clone(),
            shift: self.shift + other.shift,
            prec,
            coeffs,
        };
        out.canonicalize();
        out
    }

    pub fn mul_i64(&self, n: i64) -> OFElem {
        self.mul(&OFElem::from_i64(&self.spec, n))
    }

    /// varpi-adic valuation. Infinite for the exact zero; an error when all
    /// known digits vanish (valuation is then only bounded below).
    pub fn v_varpi(&self) -> Result<Val> {
        if self.is_exact_zero() {
            return Ok(Val::Infinite);
        }
        if self.is_zero_at_prec() {
            return Err(LtError::IndistinguishableFromZero(self.abs_prec()));
        }
        Ok(Val::int(self.shift))
    }

    /// Inverse of a unit of O_F (valuation exactly zero).
    pub fn invert_unit(&self) -> Result<OFElem> {
        match self.v_varpi()? {
            Val::Finite(v) if v == crate::rat::Rat::zero() => {}
            v => {
                return Err(LtError::NotAUnit(format!(
                    "valuation {v} is nonzero, inverse is not integral"
                )))
            }
        }
        Ok(self.invert_in_field().expect("unit mantissa inverts"))
    }

    /// Inverse in F (shift-aware); errors when the element cannot be
    /// certified nonzero.
    pub fn invert_in_field(&self) -> Result<OFElem> {
        if self.is_exact_zero() {
            return Err(LtError::NotAUnit("exact zero has no inverse".into()));
        }
        if self.is_zero_at_prec() {
            return Err(LtError::IndistinguishableFromZero(self.abs_prec()));
        }
        let spec = &self.spec;
        let prec = self.prec;
        // Newton iteration on the unit mantissa
        let res = spec.un_residue(&self.coeffs[0]);
        let r_inv = spec.ff.inv(&res).map_err(|_| {
            LtError::NotAUnit("mantissa residue is zero; canonical form violated".into())
        })?;
        let mut y = vec![spec.un_zero(); spec.e];
        y[0] = spec.un_from_ff(&r_inv);
        let two = {
            let mut t = vec![spec.un_zero(); spec.e];
            t[0] = spec.un_from_int_poly(&[2], spec.cap(prec, 0));
            t
        };
        let steps = 64 - (prec as u64).leading_zeros() + 2;
        for _ in 0..steps {
            let ay = spec.man_mul(&self.coeffs, &y, prec);
            let mut t = vec![spec.un_zero(); spec.e];
            for i in 0..spec.e {
                let cap = spec.cap(prec, i);
                t[i] = spec.un_sub(&two[i], &ay[i], cap);
            }
            y = spec.man_mul(&y, &t, prec);
        }
        let mut out = OFElem {
            spec: spec.clone(),
            shift: -self.shift,
            prec,
            coeffs: y,
        };
        out.canonicalize();
        // a wrong inverse is a bug, not an input condition
        debug_assert!(out.mul(self).same_value(&OFElem::one(spec)));
        Ok(out)
    }

    /// Exact division: requires v(a) >= v(b); result loses v(b) digits of
    /// absolute precision exactly.
    pub fn divide_exact(&self, other: &OFElem) -> Result<OFElem> {
        self.assert_same_spec(other);
        if other.is_exact_zero() {
            return Err(LtError::NotAUnit("division by exact zero".into()));
        }
        if other.is_zero_at_prec() {
            return Err(LtError::IndistinguishableFromZero(other.abs_prec()));
        }
        if self.is_exact_zero() {
            return Ok(self.clone());
        }
        if self.is_zero_at_prec() {
            let bound = self.abs_prec() - other.shift;
            if bound < 1 {
                return Err(LtError::PrecisionExhausted(
                    "quotient bound falls below one digit".into(),
                ));
            }
            return Ok(OFElem {
                spec: self.spec.clone(),
                shift: 0,
                prec: bound,
                coeffs: vec![self.spec.un_zero(); self.spec.e],
            });
        }
        if self.shift < other.shift {
            return Err(LtError::InexactDivision(format!(
                "valuation {} of dividend below valuation {} of divisor",
                self.shift, other.shift
            )));
        }
        Ok(self.mul(&other.invert_in_field()?))
    }

    /// Exact division by varpi^k (k >= 0), costing k digits.
    pub fn div_varpi_exact(&self, k: i64) -> Result<OFElem> {
        assert!(k >= 0);
        let w = OFElem::varpi(&self.spec);
        let mut out = self.clone();
        for _ in 0..k {
            out = out.divide_exact(&w)?;
        }
        Ok(out)
    }

    pub fn mul_varpi_pow(&self, k: i64) -> OFElem {
        if self.is_exact_zero() {
            return self.clone();
        }
        let mut out = self.clone();
        out.shift += k;
        out
    }

    /// Values agree at the common absolute precision.
    pub fn same_value(&self, other: &OFElem) -> bool {
        self.sub(other).is_zero_at_prec()
    }

    /// Reduce to a coarser absolute precision (digits above are discarded).
    pub fn reduce_abs_prec(&self, abs: i64) -> OFElem {
        if self.is_exact_zero() {
            return self.clone();
        }
        let cur = self.abs_prec();
        if abs >= cur {
            return self.clone();
        }
        assert!(abs >= 1, "cannot reduce below one digit");
        let prec = abs - self.shift;
        if prec < 1 {
            // value is zero mod varpi^abs
            return OFElem {
                spec: self.spec.clone(),
                shift: 0,
                prec: abs,
                coeffs: vec![self.spec.un_zero(); self.spec.e],
            };
        }
        let mut out = OFElem {
            spec: self.spec.clone(),
            shift: self.shift,
            prec,
            coeffs: self.coeffs.clone(),
        };
        self.spec.man_reduce(&mut out.coeffs, prec);
        out.canonicalize();
        out
    }

    /// Residue in k_F; requires a nonnegative valuation and one known digit.
    pub fn residue(&self) -> Result<FFElem> {
        if self.is_exact_zero() {
            return Ok(self.spec.ff.zero());
        }
        if self.shift < 0 && !self.is_zero_at_prec() {
            return Err(LtError::BadInput(
                "negative valuation element has no residue".into(),
            ));
        }
        if self.abs_prec() < 1 {
            return Err(LtError::PrecisionExhausted(
                "no digits available for residue".into(),
            ));
        }
        if self.shift >= 1 || self.is_zero_at_prec() {
            return Ok(self.spec.ff.zero());
        }
        Ok(self.spec.un_residue(&self.coeffs[0]))
    }

    /// Raise to an integer power (nonnegative; inverses via invert first).
    pub fn pow(&self, mut n: u64) -> OFElem {
        let mut acc = OFElem::one(&self.spec);
        let mut b = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            n >>= 1;
        }
        acc
    }

    // ---- serialization ----------------------------------------------------

    /// Canonical JSON: {"e_digits": [[int,...],...], "prec": N, "shift": k}.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        use num_traits::ToPrimitive;
        let digits: Vec<Vec<serde_json::Value>> = self
            .coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .map(|x| match x.to_u64() {
                        Some(v) => json!(v),
                        None => json!(x.to_string()),
                    })
                    .collect()
            })
            .collect();
        let prec = if self.is_exact_zero() {
            serde_json::Value::String("exact".into())
        } else {
            json!(self.prec)
        };
        json!({"e_digits": digits, "prec": prec, "shift": self.shift})
    }

    pub fn from_json(spec: &Arc<LocalFieldSpec>, v: &serde_json::Value) -> Result<OFElem> {
        let bad = |m: &str| LtError::BadInput(format!("OFElem json: {m}"));
        let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
        let shift = obj
            .get("shift")
            .and_then(|x| x.as_i64())
            .ok_or_else(|| bad("missing shift"))?;
        let prec_v = obj.get("prec").ok_or_else(|| bad("missing prec"))?;
        let prec = if prec_v.as_str() == Some("exact") {
            PREC_EXACT
        } else {
            prec_v.as_i64().ok_or_else(|| bad("bad prec"))?
        };
        let digits = obj
            .get("e_digits")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing e_digits"))?;
        if digits.len() != spec.e {
            return Err(bad("wrong number of varpi-coefficients"));
        }
        let mut coeffs = Vec::with_capacity(spec.e);
        for c in digits {
            let arr = c.as_array().ok_or_else(|| bad("coefficient not a list"))?;
            if arr.len() != spec.ff.d {
                return Err(bad("wrong number of unramified coordinates"));
            }
            let mut u = Vec::with_capacity(arr.len());
            for x in arr {
                let b = if let Some(n) = x.as_u64() {
                    BigUint::from(n)
                } else if let Some(s) = x.as_str() {
                    s.parse::<BigUint>().map_err(|_| bad("bad digit string"))?
                } else {
                    return Err(bad("digit neither integer nor string"));
                };
                u.push(b);
            }
            coeffs.push(u);
        }
        let mut out = OFElem {
            spec: spec.clone(),
            shift,
            prec,
            coeffs,
        };
        if out.prec != PREC_EXACT {
            out.canonicalize();
        }
        Ok(out)
    }
}
