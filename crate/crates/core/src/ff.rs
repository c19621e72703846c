//! Residue fields F_q = F_p[t]/(modulus).
//!
//! Elements are dense coefficient vectors of length d over F_p. The spec
//! struct owns all arithmetic; `FFElem` is plain data so it can sit in
//! coefficient maps without dragging a ring handle around. q = p^d stays
//! at desk scale (q^m <= a few thousand), so brute-force searches are fine.

use crate::error::{LtError, Result};
use std::fmt;

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &sp in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == sp {
            return true;
        }
        if n % sp == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        a %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    // sufficient witness set for u64
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Element of F_q, coefficients lowest degree first, length d, reduced mod p.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FFElem {
    pub c: Vec<u64>,
}

impl fmt::Debug for FFElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FF{:?}", self.c)
    }
}

/// F_q = F_p[t]/(modulus), modulus monic irreducible of degree d.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteFieldSpec {
    pub p: u64,
    pub d: usize,
    /// length d+1, monic, coefficients reduced mod p
    pub modulus: Vec<u64>,
}

impl fmt::Debug for FiniteFieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{}", self.p, self.d)
    }
}

// dense polynomial helpers over F_p, lowest degree first

fn poly_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_mul(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = ((out[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
        }
    }
    poly_trim(&mut out);
    out
}

/// Remainder of a mod m; m need not be monic (leading coefficient inverted mod p).
fn poly_rem(p: u64, a: &[u64], m: &[u64]) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    poly_trim(&mut r);
    let mut m = m.to_vec();
    poly_trim(&mut m);
    assert!(!m.is_empty(), "remainder by zero polynomial");
    let lead_inv = inv_mod_p(p, *m.last().unwrap());
    while r.len() >= m.len() {
        let k = r.len() - m.len();
        let scale = ((*r.last().unwrap() as u128 * lead_inv as u128) % p as u128) as u64;
        if scale != 0 {
            for (j, &mc) in m.iter().enumerate() {
                let sub = (scale as u128 * mc as u128) % p as u128;
                r[k + j] = ((r[k + j] as u128 + p as u128 - sub) % p as u128) as u64;
            }
        }
        r.pop();
        poly_trim(&mut r);
    }
    r
}

fn poly_gcd(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(p, &a, &b);
        a = b;
        b = r;
    }
    a
}

fn inv_mod_p(p: u64, a: u64) -> u64 {
    // extended Euclid on (a, p); a nonzero mod p
    let a = a % p;
    assert!(a != 0, "inverse of zero mod p");
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (p as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1);
    (t.rem_euclid(p as i128)) as u64
}

/// x^(p^k) mod m via repeated squaring of x^p.
fn poly_pow_mod(p: u64, base: &[u64], mut e: u64, m: &[u64]) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = poly_rem(p, base, m);
    while e > 0 {
        if e & 1 == 1 {
            acc = poly_rem(p, &poly_mul(p, &acc, &b), m);
        }
        b = poly_rem(p, &poly_mul(p, &b, &b), m);
        e >>= 1;
    }
    acc
}

impl FiniteFieldSpec {
    /// Validates primality of p and irreducibility of the modulus.
    /// For d = 1 any monic degree-1 modulus is accepted.
    pub fn new(p: u64, d: usize, modulus: Vec<u64>) -> Result<FiniteFieldSpec> {
        if !is_prime_u64(p) {
            return Err(LtError::NotPrime(p));
        }
        assert!(d >= 1, "degree must be positive");
        let modulus: Vec<u64> = modulus.iter().map(|&c| c % p).collect();
        if modulus.len() != d + 1 || *modulus.last().unwrap() != 1 {
            return Err(LtError::BadInput(format!(
                "modulus must be monic of degree {d}"
            )));
        }
        let spec = FiniteFieldSpec { p, d, modulus };
        if d > 1 && !spec.modulus_irreducible() {
            return Err(LtError::ReducibleModulus);
        }
        // q must stay a machine integer; desk scale is far below this
        let mut q: u64 = 1;
        for _ in 0..d {
            q = q.checked_mul(p).ok_or_else(|| {
                LtError::BadInput("q = p^d exceeds machine range".into())
            })?;
        }
        Ok(spec)
    }

    /// Prime field F_p with the canonical modulus t - 0... actually t.
    pub fn prime_field(p: u64) -> Result<FiniteFieldSpec> {
        FiniteFieldSpec::new(p, 1, vec![0, 1])
    }

    pub fn q(&self) -> u64 {
        let mut q = 1u64;
        for _ in 0..self.d {
            q *= self.p;
        }
        q
    }

    /// Rabin irreducibility: t^(p^d) = t mod f, and gcd(t^(p^(d/r)) - t, f) = 1
    /// for every prime r dividing d.
    fn modulus_irreducible(&self) -> bool {
        let p = self.p;
        let d = self.d as u64;
        let t = vec![0u64, 1];
        let q_exp = |k: u64| -> Vec<u64> {
            // t^(p^k) mod modulus
            let mut acc = t.clone();
            for _ in 0..k {
                acc = poly_pow_mod(p, &acc, p, &self.modulus);
            }
            acc
        };
        let mut top = q_exp(d);
        // top - t must be 0 mod modulus
        if top.len() < 2 {
            top.resize(2, 0);
        }
        top[1] = (top[1] + p - 1) % p;
        poly_trim(&mut top);
        if !poly_rem(p, &top, &self.modulus).is_empty() {
            return false;
        }
        let mut primes = vec![];
        let mut m = d;
        let mut f = 2;
        while f * f <= m {
            if m % f == 0 {
                primes.push(f);
                while m % f == 0 {
                    m /= f;
                }
            }
            f += 1;
        }
        if m > 1 {
            primes.push(m);
        }
        for r in primes {
            let mut x = q_exp(d / r);
            if x.len() < 2 {
                x.resize(2, 0);
            }
            x[1] = (x[1] + p - 1) % p;
            poly_trim(&mut x);
            let g = poly_gcd(self.p, &x, &self.modulus);
            if g.len() != 1 {
                return false;
            }
        }
        true
    }

    pub fn zero(&self) -> FFElem {
        FFElem {
            c: vec![0; self.d],
        }
    }

    pub fn one(&self) -> FFElem {
        self.from_u64(1)
    }

    pub fn from_u64(&self, n: u64) -> FFElem {
        let mut c = vec![0; self.d];
        c[0] = n % self.p;
        FFElem { c }
    }

    pub fn from_i64(&self, n: i64) -> FFElem {
        self.from_u64(n.rem_euclid(self.p as i64) as u64)
    }

    pub fn is_zero(&self, a: &FFElem) -> bool {
        a.c.iter().all(|&x| x == 0)
    }

    pub fn add(&self, a: &FFElem, b: &FFElem) -> FFElem {
        FFElem {
            c: a.c.iter().zip(&b.c).map(|(&x, &y)| (x + y) % self.p).collect(),
        }
    }

    pub fn sub(&self, a: &FFElem, b: &FFElem) -> FFElem {
        FFElem {
            c: a.c
                .iter()
                .zip(&b.c)
                .map(|(&x, &y)| (x + self.p - y) % self.p)
                .collect(),
        }
    }

    pub fn neg(&self, a: &FFElem) -> FFElem {
        self.sub(&self.zero(), a)
    }

    pub fn mul(&self, a: &FFElem, b: &FFElem) -> FFElem {
        let prod = poly_mul(self.p, &a.c, &b.c);
        let mut r = poly_rem(self.p, &prod, &self.modulus);
        r.resize(self.d, 0);
        FFElem { c: r }
    }

    pub fn inv(&self, a: &FFElem) -> Result<FFElem> {
        if self.is_zero(a) {
            return Err(LtError::NotAUnit("zero in residue field".into()));
        }
        // a^(q-2), q small
        Ok(self.pow(a, self.q() - 2))
    }

    pub fn pow(&self, a: &FFElem, mut e: u64) -> FFElem {
        let mut acc = self.one();
        let mut b = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        acc
    }

    /// Absolute Frobenius x -> x^p.
    pub fn frobenius(&self, a: &FFElem) -> FFElem {
        self.pow(a, self.p)
    }

    /// Inverse of x -> x^p; on F_(p^d) this is x -> x^(p^(d-1)).
    pub fn frobenius_inv(&self, a: &FFElem) -> FFElem {
        let mut e = 1u64;
        for _ in 0..self.d.saturating_sub(1) {
            e *= self.p;
        }
        self.pow(a, e)
    }

    /// All q elements in a fixed order (lexicographic in coefficients).
    pub fn enumerate(&self) -> Vec<FFElem> {
        let q = self.q() as usize;
        let mut out = Vec::with_capacity(q);
        let mut idx = vec![0u64; self.d];
        loop {
            out.push(FFElem { c: idx.clone() });
            let mut i = 0;
            loop {
                if i == self.d {
                    return out;
                }
                idx[i] += 1;
                if idx[i] < self.p {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    /// Smallest generator of F_q^* in enumeration order; q is tiny so a scan works.
    pub fn multiplicative_generator(&self) -> FFElem {
        let q = self.q();
        'cand: for x in self.enumerate() {
            if self.is_zero(&x) {
                continue;
            }
            // check order is exactly q-1: x^((q-1)/r) != 1 for prime r | q-1
            let mut m = q - 1;
            if m == 1 {
                return x;
            }
            let mut primes = vec![];
            let mut f = 2;
            while f * f <= m {
                if m % f == 0 {
                    primes.push(f);
                    while m % f == 0 {
                        m /= f;
                    }
                }
                f += 1;
            }
            if m > 1 {
                primes.push(m);
            }
            for r in &primes {
                if self.pow(&x, (q - 1) / r) == self.one() {
                    continue 'cand;
                }
            }
            return x;
        }
        unreachable!("F_q^* always has a generator")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(3));
        assert!(is_prime_u64(1_000_003));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(561)); // Carmichael
        assert!(!is_prime_u64(6));
    }

    #[test]
    fn f4_arithmetic() {
        // F_4 = F_2[t]/(t^2 + t + 1)
        let f4 = FiniteFieldSpec::new(2, 2, vec![1, 1, 1]).unwrap();
        let t = FFElem { c: vec![0, 1] };
        let t2 = f4.mul(&t, &t);
        assert_eq!(t2, FFElem { c: vec![1, 1] }); // t^2 = t + 1
        assert_eq!(f4.mul(&t, &t2), f4.one()); // t^3 = 1
        assert_eq!(f4.inv(&t).unwrap(), t2);
    }

    #[test]
    fn reducible_modulus_rejected() {
        // t^2 + 1 = (t+1)^2 over F_2
        assert_eq!(
            FiniteFieldSpec::new(2, 2, vec![1, 0, 1]).unwrap_err(),
            LtError::ReducibleModulus
        );
        // t^2 + 1 is irreducible over F_3
        assert!(FiniteFieldSpec::new(3, 2, vec![1, 0, 1]).is_ok());
    }

    #[test]
    fn not_prime_rejected() {
        assert_eq!(
            FiniteFieldSpec::new(6, 1, vec![0, 1]).unwrap_err(),
            LtError::NotPrime(6)
        );
    }

    #[test]
    fn frobenius_inverse_roundtrip() {
        let f9 = FiniteFieldSpec::new(3, 2, vec![1, 0, 1]).unwrap();
        for x in f9.enumerate() {
            let y = f9.frobenius_inv(&x);
            assert_eq!(f9.frobenius(&y), x);
        }
    }

    #[test]
    fn generator_order() {
        let f9 = FiniteFieldSpec::new(3, 2, vec![1, 0, 1]).unwrap();
        let g = f9.multiplicative_generator();
        let mut seen = std::collections::BTreeSet::new();
        let mut x = f9.one();
        for _ in 0..8 {
            x = f9.mul(&x, &g);
            seen.insert(x.clone());
        }
        assert_eq!(seen.len(), 8);
    }
}
