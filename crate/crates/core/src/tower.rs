//! The ramified torsion tower: Eisenstein quotients Phi_m = f^(m)/f^(m-1),
//! arithmetic in F_m = F[X]/(Phi_m), formal-group torsion, the Galois action
//! sigma_a, and norms back to the base.
//!
//! Tower elements are reduced polynomials in pi_m with O_F coefficients.
//! Valuations extend exactly: the coordinate values v(c_i) + i/n all have
//! distinct fractional parts, so the minimum is always attained once and the
//! extended valuation needs no rounding. Truncated series are only ever
//! evaluated at points of positive valuation under an explicit tail bound,
//! and results are cut back to what that bound certifies.

use crate::error::{LtError, Result};
use crate::fgroup::LTGroup;
use crate::local::{LocalFieldSpec, OFElem};
use crate::poly::UnivariatePoly;
use crate::rat::{Rat, Val};
use crate::report::CheckReport;
use crate::series::TruncatedSeries;
use serde_json::json;
use std::sync::Arc;

pub struct TowerField {
    pub base: Arc<LocalFieldSpec>,
    pub level: u32,
    /// Monic Eisenstein minimal polynomial of pi over the base.
    pub minpoly: UnivariatePoly,
    pub n: usize,
}

impl std::fmt::Debug for TowerField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TowerField(level {}, degree {})", self.level, self.n)
    }
}

/// Monic with unit-free lower coefficients and constant term of valuation
/// exactly one.
pub fn eisenstein_over_base(poly: &UnivariatePoly) -> Result<()> {
    let n = poly.degree();
    if n < 1 {
        return Err(LtError::NotEisenstein("degree must be at least 1".into()));
    }
    if !poly.is_monic() {
        return Err(LtError::NotEisenstein("not monic".into()));
    }
    match poly.coeff(0).v_varpi() {
        Ok(Val::Finite(v)) if v == Rat::int(1) => {}
        Ok(v) => {
            return Err(LtError::NotEisenstein(format!(
                "constant term has valuation {v}, need exactly 1"
            )))
        }
        Err(e) => return Err(e),
    }
    for i in 1..n as usize {
        let c = poly.coeff(i);
        match c.v_varpi() {
            Ok(Val::Infinite) => {}
            Ok(Val::Finite(v)) if v >= Rat::int(1) => {}
            Ok(v) => {
                return Err(LtError::NotEisenstein(format!(
                    "degree-{i} coefficient has valuation {v}"
                )))
            }
            Err(LtError::IndistinguishableFromZero(b)) if b >= 1 => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

impl TowerField {
    pub fn new(base: &Arc<LocalFieldSpec>, level: u32, minpoly: UnivariatePoly) -> Result<Arc<TowerField>> {
        eisenstein_over_base(&minpoly)?;
        let n = minpoly.degree() as usize;
        // pin the leading coefficient to the exact unit for clean reduction
        let mut coeffs = minpoly.coeffs.clone();
        coeffs[n] = OFElem::one(base);
        Ok(Arc::new(TowerField {
            base: base.clone(),
            level,
            minpoly: UnivariatePoly::new(base, coeffs),
            n,
        }))
    }

    pub fn zero(self: &Arc<Self>) -> TowerFieldElem {
        TowerFieldElem {
            field: self.clone(),
            coeffs: vec![OFElem::zero(&self.base); self.n],
        }
    }

    pub fn one(self: &Arc<Self>) -> TowerFieldElem {
        self.from_base(&OFElem::one(&self.base))
    }

    pub fn from_base(self: &Arc<Self>, c: &OFElem) -> TowerFieldElem {
        let mut x = self.zero();
        x.coeffs[0] = c.clone();
        x
    }

    /// The uniformizer pi of this level.
    pub fn gen(self: &Arc<Self>) -> TowerFieldElem {
        let mut x = self.zero();
        if self.n == 1 {
            // pi = -a_0 when the minimal polynomial is linear
            x.coeffs[0] = self.minpoly.coeff(0).neg();
        } else {
            x.coeffs[1] = OFElem::one(&self.base);
        }
        x
    }

    pub fn from_coeffs(self: &Arc<Self>, coeffs: Vec<OFElem>) -> TowerFieldElem {
        assert!(coeffs.len() <= self.n, "coefficient vector exceeds degree");
        let mut c = coeffs;
        c.resize(self.n, OFElem::zero(&self.base));
        TowerFieldElem {
            field: self.clone(),
            coeffs: c,
        }
    }

    /// Ramification index of pi over the base uniformizer.
    pub fn ram_deg(&self) -> i64 {
        self.n as i64
    }
}

#[derive(Clone)]
pub struct TowerFieldElem {
    pub field: Arc<TowerField>,
    /// Always exactly n coefficients, reduced mod the minimal polynomial.
    pub coeffs: Vec<OFElem>,
}

impl std::fmt::Debug for TowerFieldElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tower{:?}", self.coeffs)
    }
}

impl TowerFieldElem {
    fn assert_same_field(&self, other: &TowerFieldElem) {
        assert!(
            Arc::ptr_eq(&self.field, &other.field)
                || (self.field.level == other.field.level
                    && self.field.minpoly.same_value(&other.field.minpoly)),
            "tower elements live at different levels"
        );
    }

    pub fn add(&self, other: &TowerFieldElem) -> TowerFieldElem {
        self.assert_same_field(other);
        TowerFieldElem {
            field: self.field.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> TowerFieldElem {
        TowerFieldElem {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn sub(&self, other: &TowerFieldElem) -> TowerFieldElem {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, a: &OFElem) -> TowerFieldElem {
        TowerFieldElem {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c.mul(a)).collect(),
        }
    }

    pub fn mul(&self, other: &TowerFieldElem) -> TowerFieldElem {
        self.assert_same_field(other);
        let base = &self.field.base;
        let pa = UnivariatePoly::new(base, self.coeffs.clone());
        let pb = UnivariatePoly::new(base, other.coeffs.clone());
        let (_, r) = pa.mul(&pb).divrem_monic(&self.field.minpoly);
        self.field.from_coeffs(r.coeffs)
    }

    pub fn pow(&self, mut e: u64) -> TowerFieldElem {
        let mut acc = self.field.one();
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        acc
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_exact_zero())
    }

    pub fn is_zero_at_prec(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero_at_prec())
    }

    pub fn same_value(&self, other: &TowerFieldElem) -> bool {
        self.sub(other).is_zero_at_prec()
    }

    /// Extended valuation in base varpi-units, denominator dividing n.
    /// Exact whenever certifiable: coordinate valuations never collide.
    pub fn val(&self) -> Result<Val> {
        let n = self.field.n as i64;
        let mut best: Option<Rat> = None;
        let mut floor_bound: Option<Rat> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            let slot = Rat::new(i as i64, n);
            match c.v_varpi() {
                Ok(Val::Finite(v)) => {
                    let cand = v + slot;
                    if best.map_or(true, |b| cand < b) {
                        best = Some(cand);
                    }
                }
                Ok(Val::Infinite) => {}
                Err(LtError::IndistinguishableFromZero(a)) => {
                    let cand = Rat::int(a) + slot;
                    if floor_bound.map_or(true, |b| cand < b) {
                        floor_bound = Some(cand);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        match (best, floor_bound) {
            (None, None) => Ok(Val::Infinite),
            (None, Some(b)) => Err(LtError::IndistinguishableFromZero(b.floor())),
            (Some(v), None) => Ok(Val::Finite(v)),
            (Some(v), Some(b)) => {
                if v < b {
                    Ok(Val::Finite(v))
                } else {
                    Err(LtError::IndistinguishableFromZero(v.floor().min(b.floor())))
                }
            }
        }
    }

    /// Discard everything at or above base-valuation tau.
    pub fn reduce_abs_val(&self, tau: Rat) -> TowerFieldElem {
        let n = self.field.n as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let abs = (tau - Rat::new(i as i64, n)).ceil();
                assert!(abs >= 1, "tail bound leaves no digits");
                c.reduce_abs_prec(abs)
            })
            .collect();
        TowerFieldElem {
            field: self.field.clone(),
            coeffs,
        }
    }

    /// Evaluate a base-coefficient polynomial at this element, exactly.
    pub fn eval_poly(&self, poly: &UnivariatePoly) -> TowerFieldElem {
        let mut acc = self.field.zero();
        for c in poly.coeffs.iter().rev() {
            acc = acc.mul(self).add(&self.field.from_base(c));
        }
        acc
    }

    /// Multiplication-by-self matrix on the basis 1, pi, ..., pi^(n-1);
    /// column j holds self*pi^j.
    fn mult_matrix(&self) -> Vec<Vec<OFElem>> {
        let n = self.field.n;
        let mut cols = Vec::with_capacity(n);
        let mut cur = self.clone();
        for _ in 0..n {
            cols.push(cur.coeffs.clone());
            cur = cur.mul(&self.field.gen());
        }
        // rows of m: m[r][c] = coefficient of pi^r in self*pi^c
        (0..n)
            .map(|r| (0..n).map(|c| cols[c][r].clone()).collect())
            .collect()
    }

    /// Field inverse via the valuation-pivoted linear solve of x*y = 1,
    /// verified before returning.
    pub fn inv(&self) -> Result<TowerFieldElem> {
        if self.is_exact_zero() {
            return Err(LtError::NotAUnit("inverse of zero".into()));
        }
        if self.is_zero_at_prec() {
            return Err(LtError::IndistinguishableFromZero(
                self.coeffs.iter().map(|c| c.abs_prec()).min().unwrap_or(0),
            ));
        }
        let n = self.field.n;
        let mut m = self.mult_matrix();
        let mut rhs = vec![OFElem::zero(&self.field.base); n];
        rhs[0] = OFElem::one(&self.field.base);
        // forward elimination, pivoting on the smallest valuation
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot: Option<(usize, Rat)> = None;
            for (ri, &r) in perm.iter().enumerate().skip(col) {
                if let Ok(Val::Finite(v)) = m[r][col].v_varpi() {
                    if pivot.map_or(true, |(_, pv)| v < pv) {
                        pivot = Some((ri, v));
                    }
                }
            }
            let Some((pi_idx, _)) = pivot else {
                return Err(LtError::PrecisionExhausted(format!(
                    "linear solve lost column {col} at working precision"
                )));
            };
            perm.swap(col, pi_idx);
            let pr = perm[col];
            let pinv = m[pr][col].invert_in_field()?;
            for &r in perm.iter().skip(col + 1) {
                let e = &m[r][col];
                if e.is_zero_at_prec() {
                    continue;
                }
                let factor = e.mul(&pinv);
                for c in col..n {
                    m[r][c] = m[r][c].sub(&factor.mul(&m[pr][c]));
                }
                rhs[r] = rhs[r].sub(&factor.mul(&rhs[pr]));
            }
        }
        // back substitution
        let mut y = vec![OFElem::zero(&self.field.base); n];
        for col in (0..n).rev() {
            let r = perm[col];
            let mut acc = rhs[r].clone();
            for c in col + 1..n {
                acc = acc.sub(&m[r][c].mul(&y[c]));
            }
            y[col] = acc.mul(&m[r][col].invert_in_field()?);
        }
        let inv = self.field.from_coeffs(y);
        if !self.mul(&inv).same_value(&self.field.one()) {
            return Err(LtError::PrecisionExhausted(
                "inverse fails verification at working precision".into(),
            ));
        }
        Ok(inv)
    }

    pub fn div(&self, other: &TowerFieldElem) -> Result<TowerFieldElem> {
        Ok(self.mul(&other.inv()?))
    }

    /// Norm down to the base: determinant of the multiplication matrix,
    /// which is the resultant of the minimal polynomial with the
    /// representing polynomial.
    pub fn norm(&self) -> Result<OFElem> {
        if self.is_exact_zero() {
            return Ok(OFElem::zero(&self.field.base));
        }
        let n = self.field.n;
        let mut m = self.mult_matrix();
        let mut det = OFElem::one(&self.field.base);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1i64;
        for col in 0..n {
            let mut pivot: Option<(usize, Rat)> = None;
            for (ri, &r) in perm.iter().enumerate().skip(col) {
                if let Ok(Val::Finite(v)) = m[r][col].v_varpi() {
                    if pivot.map_or(true, |(_, pv)| v < pv) {
                        pivot = Some((ri, v));
                    }
                }
            }
            let Some((pi_idx, _)) = pivot else {
                // a vanishing column: the norm is zero at available precision
                return Err(LtError::PrecisionExhausted(
                    "norm column vanishes at working precision".into(),
                ));
            };
            if pi_idx != col {
                perm.swap(col, pi_idx);
                sign = -sign;
            }
            let pr = perm[col];
            det = det.mul(&m[pr][col]);
            let pinv = m[pr][col].invert_in_field()?;
            for &r in perm.iter().skip(col + 1) {
                let e = &m[r][col];
                if e.is_zero_at_prec() {
                    continue;
                }
                let factor = e.mul(&pinv);
                for c in col..n {
                    m[r][c] = m[r][c].sub(&factor.mul(&m[pr][c]));
                }
            }
        }
        Ok(det.mul_i64(sign))
    }

    /// Trace down to the base.
    pub fn trace(&self) -> OFElem {
        let m = self.mult_matrix();
        let mut t = OFElem::zero(&self.field.base);
        for (i, row) in m.iter().enumerate() {
            t = t.add(&row[i]);
        }
        t
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "level": self.field.level,
            "modulus": self.field.minpoly.coeffs.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "coeffs": self.coeffs.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Evaluate a truncated series at tower points of positive valuation.
/// Refuses (CapInsufficient) when the truncation tail cannot certify
/// `target` base digits; the result is cut back to the certified tail.
pub fn eval_series_at(
    series: &TruncatedSeries,
    pts: &[TowerFieldElem],
    target: i64,
) -> Result<TowerFieldElem> {
    assert_eq!(series.nvars(), pts.len(), "one point per variable");
    assert!(!pts.is_empty());
    for w in pts.windows(2) {
        w[0].assert_same_field(&w[1]);
    }
    let field = pts[0].field.clone();
    let mut vmin: Option<Rat> = None;
    for pt in pts {
        let v = match pt.val() {
            Ok(Val::Infinite) => continue,
            Ok(Val::Finite(v)) => {
                if v <= Rat::zero() {
                    return Err(LtError::NotTopologicallyNilpotent(format!(
                        "evaluation point has valuation {v}"
                    )));
                }
                v
            }
            // vanishing at precision still certifies a positive lower bound
            Err(LtError::IndistinguishableFromZero(b)) if b >= 1 => Rat::int(b),
            Err(LtError::IndistinguishableFromZero(_)) => {
                return Err(LtError::NotTopologicallyNilpotent(
                    "cannot certify positive valuation of evaluation point".into(),
                ))
            }
            Err(e) => return Err(e),
        };
        if vmin.map_or(true, |m| v < m) {
            vmin = Some(v);
        }
    }
    let Some(vmin) = vmin else {
        // every point vanishes exactly; only the constant term survives
        return Ok(field.from_base(&series.coeff(&vec![0; series.nvars()])));
    };
    let tail = vmin * series.cap;
    if tail < Rat::int(target) {
        return Err(LtError::CapInsufficient {
            cap: series.cap,
            tail_val: tail.to_string(),
            target,
        });
    }
    // integral coefficients only: the tail estimate assumes v(c) >= 0
    for (_, c) in series.terms() {
        match c.v_varpi() {
            Ok(Val::Finite(v)) if v < Rat::zero() => {
                return Err(LtError::BadInput(
                    "series with non-integral coefficients cannot be evaluated on points".into(),
                ))
            }
            _ => {}
        }
    }
    let mut powers: Vec<Vec<TowerFieldElem>> = pts
        .iter()
        .map(|p| vec![field.one(), p.clone()])
        .collect();
    let mut acc = field.zero();
    for (e, c) in series.terms() {
        let mut prod = field.from_base(c);
        for (i, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            while powers[i].len() <= k as usize {
                let next = powers[i].last().unwrap().mul(&pts[i]);
                powers[i].push(next);
            }
            prod = prod.mul(&powers[i][k as usize]);
        }
        acc = acc.add(&prod);
    }
    Ok(acc.reduce_abs_val(tail))
}

/// The group operation x +_F y on points of positive valuation.
pub fn fg_add(
    group: &LTGroup,
    x: &TowerFieldElem,
    y: &TowerFieldElem,
) -> Result<TowerFieldElem> {
    let law = group.group_law()?;
    eval_series_at(&law, &[x.clone(), y.clone()], group.target_prec)
}

/// [a](x) for integral a, evaluated on a point of positive valuation.
pub fn fg_endo(
    group: &LTGroup,
    a: &OFElem,
    x: &TowerFieldElem,
) -> Result<TowerFieldElem> {
    let e = group.endo(a)?;
    eval_series_at(&e, &[x.clone()], group.target_prec)
}

pub struct EisensteinStep {
    pub m: u32,
    pub tower: Arc<TowerField>,
    pub report: CheckReport,
}

/// f composed with itself m times, as an exact polynomial.
pub fn iterate_poly(group: &LTGroup, m: u32) -> UnivariatePoly {
    let spec = &group.spec;
    let f = UnivariatePoly::new(spec, group.f.clone());
    let mut acc = UnivariatePoly::x(spec);
    for _ in 0..m {
        acc = f.compose(&acc);
    }
    acc
}

/// Phi_m = f^(m) / f^(m-1), verified Eisenstein. Convention: Phi_1 = f/X.
pub fn eisenstein_step(group: &LTGroup, m: u32) -> Result<EisensteinStep> {
    assert!(m >= 1, "tower levels start at 1");
    let spec = &group.spec;
    let fm = iterate_poly(group, m);
    let fm1 = iterate_poly(group, m - 1);
    let phi = fm.div_exact_monic(&fm1).map_err(|e| match e {
        LtError::InexactDivision(_) => LtError::InexactDivision(
            "iterated polynomial is not divisible by the previous level".into(),
        ),
        other => other,
    })?;
    let mut report = CheckReport::new("eisenstein_step");
    report.record(
        "exact_quotient",
        phi.mul(&fm1).same_value(&fm),
        json!({"level": m}),
    );
    match eisenstein_over_base(&phi) {
        Ok(()) => report.pass("eisenstein_criterion"),
        Err(e) => report.fail("eisenstein_criterion", json!({"error": e.to_string()})),
    }
    // constant term is varpi times a unit; exactly varpi for f = varpi X + X^q
    let c0 = phi.coeff(0);
    match c0.div_varpi_exact(1).and_then(|u| u.invert_unit()) {
        Ok(_) => report.pass("constant_term_unit_times_varpi"),
        Err(e) => report.fail(
            "constant_term_unit_times_varpi",
            json!({"error": e.to_string()}),
        ),
    }
    if !report.passed {
        return Err(LtError::NotEisenstein(format!(
            "level-{m} quotient fails: {:?}",
            report.first_failure().map(|i| i.check.clone())
        )));
    }
    let tower = TowerField::new(spec, m, phi)?;
    Ok(EisensteinStep { m, tower, report })
}

/// Residue representatives of O_F/varpi^m: all sums of integer digits
/// 0..q-1 times varpi powers. Exact elements, q^m of them.
pub fn quotient_reps(spec: &Arc<LocalFieldSpec>, m: u32) -> Vec<OFElem> {
    assert_eq!(spec.d(), 1, "digit representatives need a prime residue field");
    let q = spec.q();
    let w = OFElem::varpi(spec);
    let mut reps = vec![OFElem::zero(spec)];
    for j in 0..m {
        let wj = w.pow(j as u64);
        let mut next = Vec::with_capacity(reps.len() * q as usize);
        for r in &reps {
            for dgt in 0..q {
                next.push(r.add(&OFElem::from_i64(spec, dgt as i64).mul(&wj)));
            }
        }
        reps = next;
    }
    reps
}

const TABLE_LIMIT: u64 = 16;
const SAMPLE_REPS: usize = 12;

/// Certify the level-m torsion is cyclic of order q^m: annihilated by
/// varpi^m but not varpi^(m-1), with the unit orbit giving pairwise
/// distinct roots of Phi_m and the group table matching O_F/varpi^m
/// (full table up to q^m = 16, sampled beyond).
pub fn torsion_check(group: &LTGroup, m: u32) -> Result<CheckReport> {
    let spec = &group.spec;
    let EisensteinStep {
        tower,
        report: step_report,
        ..
    } = eisenstein_step(group, m)?;
    let pi = tower.gen();
    let mut report = CheckReport::new("torsion");
    report.passed &= step_report.passed;
    report.items.extend(step_report.items);

    let qm = (spec.q() as u64).pow(m);
    let n = tower.n as i64;
    report.record(
        "uniformizer_valuation",
        pi.val()? == Val::Finite(Rat::new(1, n)),
        json!({"expected": format!("1/{n}")}),
    );

    // annihilators, via exact polynomial evaluation
    let killed = pi.eval_poly(&iterate_poly(group, m));
    report.record(
        "varpi_power_m_annihilates",
        killed.is_zero_at_prec(),
        json!({"value": killed.to_json()}),
    );
    let survivor = pi.eval_poly(&iterate_poly(group, m - 1));
    let survives = matches!(survivor.val(), Ok(Val::Finite(_)));
    report.record(
        "varpi_power_m_minus_1_survives",
        survives,
        json!({"value": survivor.to_json()}),
    );

    // torsion points indexed by residue representatives
    let mut reps = quotient_reps(spec, m);
    let full = qm <= TABLE_LIMIT;
    if !full {
        reps.truncate(SAMPLE_REPS);
    }
    let mut points = Vec::with_capacity(reps.len());
    for a in &reps {
        points.push(fg_endo(group, a, &pi)?);
    }

    // unit-orbit points are roots of Phi_m, pairwise distinct
    let mut roots_ok = true;
    let mut distinct_ok = true;
    let mut witness = serde_json::Value::Null;
    for (i, a) in reps.iter().enumerate() {
        let unit = matches!(a.v_varpi(), Ok(Val::Finite(v)) if v == Rat::zero());
        if unit {
            let at = points[i].eval_poly(&tower.minpoly);
            if !at.is_zero_at_prec() {
                roots_ok = false;
                witness = json!({"rep": a.to_json(), "phi_value": at.to_json()});
            }
        }
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            match points[i].sub(&points[j]).val() {
                Ok(Val::Finite(_)) => {}
                _ => {
                    distinct_ok = false;
                    witness = json!({"pair": [i, j]});
                }
            }
        }
    }
    report.record("unit_orbit_roots_of_phi", roots_ok, witness.clone());
    report.record("points_pairwise_distinct", distinct_ok, witness.clone());

    // group table against addition in O_F/varpi^m; no explicit reduction of
    // a+b is needed since [varpi^m] kills pi anyway
    let mut table_ok = true;
    let mut table_witness = serde_json::Value::Null;
    'outer: for (i, a) in reps.iter().enumerate() {
        for (j, b) in reps.iter().enumerate() {
            let s = fg_add(group, &points[i], &points[j])?;
            let expect = fg_endo(group, &a.add(b), &pi)?;
            if !s.same_value(&expect) {
                table_ok = false;
                table_witness = json!({
                    "a": a.to_json(), "b": b.to_json(),
                    "fg_add": s.to_json(), "endo_sum": expect.to_json(),
                });
                break 'outer;
            }
        }
    }
    report.record(
        if full { "group_table_full" } else { "group_table_sampled" },
        table_ok,
        table_witness,
    );

    let all_passed = report.passed;
    report.record("cyclic_of_order_q_m", all_passed, json!({"order": qm}));
    Ok(report)
}

/// sigma_a: the F-algebra map sending pi to [a](pi), for a unit a.
/// Verified to land on a root of the minimal polynomial.
pub fn galois_apply(
    group: &LTGroup,
    tower: &Arc<TowerField>,
    a: &OFElem,
    x: &TowerFieldElem,
) -> Result<TowerFieldElem> {
    match a.v_varpi()? {
        Val::Finite(v) if v == Rat::zero() => {}
        v => {
            return Err(LtError::NotAUnit(format!(
                "Galois action needs a unit, got valuation {v}"
            )))
        }
    }
    let pi = tower.gen();
    let sigma_pi = fg_endo(group, a, &pi)?;
    let at = sigma_pi.eval_poly(&tower.minpoly);
    if !at.is_zero_at_prec() {
        return Err(LtError::ConjugateNotRoot(format!(
            "[a](pi) does not satisfy the minimal polynomial at precision: {at:?}"
        )));
    }
    let rep = UnivariatePoly::new(&tower.base, x.coeffs.clone());
    Ok(sigma_pi.eval_poly(&rep))
}

/// Norm of a tower element down to the base field.
pub fn norm_to_base(x: &TowerFieldElem) -> Result<OFElem> {
    x.norm()
}

/// Integer representative of an integral element modulo varpi^k, for
/// prime residue fields.
pub fn int_rep_mod(x: &OFElem, k: u32) -> Result<u64> {
    let spec = x.spec.clone();
    assert_eq!(spec.d(), 1, "integer representatives need a prime residue field");
    let q = spec.q();
    let mut rem = x.clone();
    let mut out: u64 = 0;
    let mut pw: u64 = 1;
    for _ in 0..k {
        let r = rem.residue()?;
        let digit = r.c[0];
        out += digit * pw;
        pw *= q;
        rem = rem.sub(&OFElem::from_i64(&spec, digit as i64)).div_varpi_exact(1)?;
    }
    Ok(out)
}

/// Artin-style conjugacy: [u^{-1}](pi_m) is a Galois conjugate of pi_m.
/// For the multiplicative model over Q_p this is cross-checked against
/// zeta -> zeta^{u^{-1}} computed by exact integer powering.
pub fn reciprocity_conjugacy(group: &LTGroup, m: u32, u: &OFElem) -> Result<CheckReport> {
    let spec = &group.spec;
    let u_inv = u.invert_unit()?;
    let step = eisenstein_step(group, m)?;
    let tower = &step.tower;
    let pi = tower.gen();
    let mut report = CheckReport::new("reciprocity");

    let conj = match galois_apply(group, tower, &u_inv, &pi) {
        Ok(c) => {
            report.pass_with("conjugate_is_root", json!({"conjugate": c.to_json()}));
            Some(c)
        }
        Err(e) => {
            report.fail("conjugate_is_root", json!({"error": e.to_string()}));
            None
        }
    };

    // cyclotomic cross-check when f is the multiplicative model over Q_p
    let is_cyclo = spec.d() == 1
        && spec.e == 1
        && crate::fgroup::cyclotomic_f(spec)
            .map(|g| {
                g.len() == group.f.len()
                    && g.iter().zip(&group.f).all(|(a, b)| a.same_value(b))
            })
            .unwrap_or(false);
    if is_cyclo {
        if let Some(conj) = conj {
            let t = int_rep_mod(&u_inv, m)?;
            let zeta = pi.add(&tower.one());
            let zt = zeta.pow(t).sub(&tower.one());
            report.record(
                "cyclotomic_cross_check",
                conj.same_value(&zt),
                json!({"exponent": t, "power": zt.to_json(), "conjugate": conj.to_json()}),
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgroup::{cyclotomic_f, standard_f, LTGroup};
    use crate::local::make_local_field;

    fn q3(prec: i64) -> Arc<LocalFieldSpec> {
        make_local_field(3, 1, vec![0, 1], vec![vec![-3], vec![1]], prec).unwrap()
    }

    fn q2(prec: i64) -> Arc<LocalFieldSpec> {
        make_local_field(2, 1, vec![0, 1], vec![vec![-2], vec![1]], prec).unwrap()
    }

    fn q3_group(cap: i64, target: i64) -> Arc<LTGroup> {
        let spec = q3(cap + target);
        LTGroup::new(&spec, standard_f(&spec), cap, target).unwrap()
    }

    #[test]
    fn eisenstein_quotients_match_hand_division() {
        let g = q3_group(9, 4);
        let s1 = eisenstein_step(&g, 1).unwrap();
        assert!(s1
            .tower
            .minpoly
            .same_value(&UnivariatePoly::from_i64(&g.spec, &[3, 0, 1])));
        let s2 = eisenstein_step(&g, 2).unwrap();
        assert!(s2
            .tower
            .minpoly
            .same_value(&UnivariatePoly::from_i64(&g.spec, &[3, 0, 9, 0, 6, 0, 1])));
        assert!(s2.report.passed);
    }

    #[test]
    fn tower_arithmetic_level_one() {
        let g = q3_group(9, 4);
        let t = eisenstein_step(&g, 1).unwrap().tower;
        let pi = t.gen();
        // pi^2 = -3 mod X^2 + 3
        let sq = pi.mul(&pi);
        assert!(sq.same_value(&t.from_base(&OFElem::from_i64(&g.spec, -3))));
        assert_eq!(pi.val().unwrap(), Val::Finite(Rat::new(1, 2)));
        // invert(pi) = -pi/3
        let inv = pi.inv().unwrap();
        let third = OFElem::from_i64(&g.spec, 3).invert_in_field().unwrap();
        let want = pi.scalar_mul(&third.neg());
        assert!(inv.same_value(&want));
        assert_eq!(inv.val().unwrap(), Val::Finite(Rat::new(-1, 2)));
    }

    #[test]
    fn fg_add_order_three() {
        let g = q3_group(9, 4);
        let t = eisenstein_step(&g, 1).unwrap().tower;
        let pi = t.gen();
        let two = fg_add(&g, &pi, &pi).unwrap();
        let three = fg_add(&g, &pi, &two).unwrap();
        assert!(three.is_zero_at_prec());
        // identity behaves
        let same = fg_add(&g, &pi, &t.zero()).unwrap();
        assert!(same.same_value(&pi));
    }

    #[test]
    fn cap_insufficient_is_refused() {
        let g = q3_group(9, 4);
        let t2 = eisenstein_step(&g, 2).unwrap().tower;
        let pi2 = t2.gen();
        // v(pi_2) = 1/6 and cap 9 gives tail 3/2 < target 4
        assert!(matches!(
            fg_add(&g, &pi2, &pi2).unwrap_err(),
            LtError::CapInsufficient { .. }
        ));
    }

    #[test]
    fn torsion_level_one_q3() {
        let g = q3_group(9, 3);
        let rep = torsion_check(&g, 1).unwrap();
        assert!(rep.passed, "failure: {:?}", rep.first_failure());
    }

    #[test]
    fn torsion_level_two_multiplicative_q2() {
        let spec = q2(16);
        let f = cyclotomic_f(&spec).unwrap();
        let g = LTGroup::new(&spec, f, 8, 3).unwrap();
        let rep = torsion_check(&g, 2).unwrap();
        assert!(rep.passed, "failure: {:?}", rep.first_failure());
        // pi_2 = zeta_4 - 1; [2]pi_2 = zeta_4^2 - 1 = -2
        let t = eisenstein_step(&g, 2).unwrap().tower;
        let pi = t.gen();
        let doubled = fg_endo(&g, &OFElem::from_i64(&spec, 2), &pi).unwrap();
        assert!(doubled.same_value(&t.from_base(&OFElem::from_i64(&spec, -2))));
    }

    #[test]
    fn galois_action_multiplicative_model() {
        // sigma_3(zeta_4 - 1) = zeta_4^3 - 1 = -zeta_4 - 1, i.e. -X - 2
        // reduced mod Phi_2 = X^2 + 2X + 2
        let spec = q2(16);
        let f = cyclotomic_f(&spec).unwrap();
        let g = LTGroup::new(&spec, f, 8, 3).unwrap();
        let t = eisenstein_step(&g, 2).unwrap().tower;
        assert!(t
            .minpoly
            .same_value(&UnivariatePoly::from_i64(&spec, &[2, 2, 1])));
        let pi = t.gen();
        let s3 = galois_apply(&g, &t, &OFElem::from_i64(&spec, 3), &pi).unwrap();
        let want = t.from_coeffs(vec![
            OFElem::from_i64(&spec, -2),
            OFElem::from_i64(&spec, -1),
        ]);
        assert!(s3.same_value(&want));
    }

    #[test]
    fn norms_match_constant_terms() {
        let g = q3_group(9, 4);
        let t1 = eisenstein_step(&g, 1).unwrap().tower;
        let n1 = t1.gen().norm().unwrap();
        assert!(n1.same_value(&OFElem::from_i64(&g.spec, 3)));
        let t2 = eisenstein_step(&g, 2).unwrap().tower;
        let n2 = t2.gen().norm().unwrap();
        assert!(n2.same_value(&OFElem::from_i64(&g.spec, 3)));
        // q = 2, m = 1: Phi_1 = X + 2, norm is -2
        let spec = q2(12);
        let g2 = LTGroup::new(&spec, standard_f(&spec), 6, 4).unwrap();
        let s = eisenstein_step(&g2, 1).unwrap();
        assert_eq!(s.tower.n, 1);
        let n = s.tower.gen().norm().unwrap();
        assert!(n.same_value(&OFElem::from_i64(&spec, -2)));
        // multiplicativity
        let x = t2.gen().add(&t2.one());
        let y = t2.gen().mul(&t2.gen()).add(&t2.gen());
        let nx = x.norm().unwrap();
        let ny = y.norm().unwrap();
        let nxy = x.mul(&y).norm().unwrap();
        assert!(nxy.same_value(&nx.mul(&ny)));
    }

    #[test]
    fn reciprocity_cyclotomic_cross_check() {
        let spec = q2(16);
        let f = cyclotomic_f(&spec).unwrap();
        let g = LTGroup::new(&spec, f, 8, 3).unwrap();
        let rep = reciprocity_conjugacy(&g, 2, &OFElem::from_i64(&spec, 3)).unwrap();
        assert!(rep.passed, "failure: {:?}", rep.first_failure());
        assert!(rep.items.iter().any(|i| i.check == "cyclotomic_cross_check"));
        // non-unit input refused
        assert!(matches!(
            reciprocity_conjugacy(&g, 1, &OFElem::from_i64(&spec, 2)).unwrap_err(),
            LtError::NotAUnit(_)
        ));
    }

    #[test]
    fn inclusion_via_f_of_next_level() {
        // f(pi_2) has the minimal polynomial of pi_1: Phi_1(f(pi_2)) = 0
        let g = q3_group(9, 4);
        let t2 = eisenstein_step(&g, 2).unwrap().tower;
        let fpoly = UnivariatePoly::new(&g.spec, g.f.clone());
        let pi1_in_t2 = t2.gen().eval_poly(&fpoly);
        let phi1 = eisenstein_step(&g, 1).unwrap().tower.minpoly.clone();
        assert!(pi1_in_t2.eval_poly(&phi1).is_zero_at_prec());
        assert_eq!(pi1_in_t2.val().unwrap(), Val::Finite(Rat::new(1, 2)));
    }
}
