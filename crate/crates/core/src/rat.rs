//! Exact rational numbers for valuations.
//!
//! Valuations in ramified towers take values in (1/e)Z and must compare
//! exactly; floating point is never acceptable here. `Rat` is a minimal
//! reduced fraction over i64, which is far more headroom than the desk
//! scale needs.

use std::cmp::Ordering;
use std::fmt;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduced fraction with positive denominator.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rat {
    num: i64,
    den: i64,
}

impl Rat {
    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Rat {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(n: i64) -> Rat {
        Rat { num: n, den: 1 }
    }

    pub fn zero() -> Rat {
        Rat::int(0)
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Largest integer <= self.
    pub fn floor(&self) -> i64 {
        self.num.div_euclid(self.den)
    }

    /// Smallest integer >= self.
    pub fn ceil(&self) -> i64 {
        -(-*self).floor()
    }

    /// True if self = k * other for an integer k (other nonzero).
    pub fn is_integer_multiple_of(&self, other: Rat) -> bool {
        assert!(!other.is_zero());
        (*self / other).is_integer()
    }
}

impl std::ops::Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat::new(self.num * rhs.den + rhs.num * self.den, self.den * rhs.den)
    }
}

impl std::ops::Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        Rat::new(self.num * rhs.den - rhs.num * self.den, self.den * rhs.den)
    }
}

impl std::ops::Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat {
            num: -self.num,
            den: self.den,
        }
    }
}

impl std::ops::Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat::new(self.num * rhs.num, self.den * rhs.den)
    }
}

impl std::ops::Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(rhs.num != 0, "division by zero rational");
        Rat::new(self.num * rhs.den, self.den * rhs.num)
    }
}

impl std::ops::Mul<i64> for Rat {
    type Output = Rat;
    fn mul(self, rhs: i64) -> Rat {
        Rat::new(self.num * rhs, self.den)
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        // denominators are positive, so cross-multiplication preserves order
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Valuation in units of v(varpi) = 1: either an exact rational or +infinity
/// (the valuation of an exact zero).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Val {
    Finite(Rat),
    Infinite,
}

impl Val {
    pub fn int(n: i64) -> Val {
        Val::Finite(Rat::int(n))
    }

    pub fn rat(num: i64, den: i64) -> Val {
        Val::Finite(Rat::new(num, den))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Val::Finite(_))
    }

    /// Finite value, panicking on infinity; callers check `is_finite` first.
    pub fn finite(&self) -> Rat {
        match self {
            Val::Finite(r) => *r,
            Val::Infinite => panic!("valuation is infinite"),
        }
    }
}

impl std::ops::Add for Val {
    type Output = Val;
    fn add(self, rhs: Val) -> Val {
        match (self, rhs) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a + b),
            _ => Val::Infinite,
        }
    }
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Val) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Val {
    fn cmp(&self, other: &Val) -> Ordering {
        match (self, other) {
            (Val::Infinite, Val::Infinite) => Ordering::Equal,
            (Val::Infinite, Val::Finite(_)) => Ordering::Greater,
            (Val::Finite(_), Val::Infinite) => Ordering::Less,
            (Val::Finite(a), Val::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(r) => write!(f, "{r}"),
            Val::Infinite => write!(f, "inf"),
        }
    }
}
