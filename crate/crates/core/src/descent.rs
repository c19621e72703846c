//! Rank-one module descent over the coefficient rings: mod-varpi Frobenius
//! solvers with certified extension steps when no solution exists downstairs,
//! p-th root extraction of ring units one varpi-digit at a time, and the
//! stage loop that unwinds a finite-order Frobenius eigenvalue into a
//! character of the unit group together with an unramified twist.

use crate::af::{AFElem, AFOperators, AFRing};
use crate::ef::EFElem;
use crate::error::{LtError, Result};
use crate::ff::FFElem;
use crate::local::{LocalFieldSpec, OFElem};
use crate::rat::{Rat, Val};
use crate::report::CheckReport;
use serde_json::json;
use std::collections::BTreeMap;
use std::sync::Arc;

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd_u64(a.unsigned_abs(), b.unsigned_abs()) as i64
}

// ------------------------------------------------------------- extensions

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtKind {
    /// Adjoin a root of X^n - mu.
    Kummer { n: u64 },
    /// Adjoin a root of X^q - X - mu.
    ArtinSchreier,
}

/// A certified extension step: when a solver proves that no solution exists
/// in the Laurent field itself, it hands back the explicit polynomial whose
/// root would provide one.
#[derive(Clone)]
pub struct ExtensionStep {
    pub base: String,
    pub kind: ExtKind,
    pub mu: EFElem,
    pub generator: String,
}

impl ExtensionStep {
    fn kummer(mu: EFElem, n: u64, generator: &str) -> ExtensionStep {
        ExtensionStep {
            base: "E_F".into(),
            kind: ExtKind::Kummer { n },
            mu,
            generator: generator.into(),
        }
    }

    fn artin_schreier(mu: EFElem, generator: &str) -> ExtensionStep {
        ExtensionStep {
            base: "E_F".into(),
            kind: ExtKind::ArtinSchreier,
            mu,
            generator: generator.into(),
        }
    }

    /// Kummer steps X^n - mu are separable for n prime to p and mu nonzero;
    /// X^q - X - mu has derivative -1 and is always separable.
    pub fn separable(&self) -> bool {
        match self.kind {
            ExtKind::Kummer { n } => {
                n % self.mu.spec.p() != 0 && !self.mu.is_zero_at_trunc()
            }
            ExtKind::ArtinSchreier => true,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, poly) = match self.kind {
            ExtKind::Kummer { n } => ("kummer", format!("X^{n} - mu")),
            ExtKind::ArtinSchreier => {
                ("artin_schreier", format!("X^{} - X - mu", self.mu.spec.q()))
            }
        };
        json!({
            "base": self.base,
            "kind": kind,
            "polynomial": poly,
            "mu": self.mu.to_json(),
            "generator": self.generator,
            "separable": self.separable(),
        })
    }
}

// ------------------------------------------------- mod-varpi line solvers

pub enum ModpSolution {
    /// The solution set of x^q = a x is the k_F-line through this basis
    /// vector (scaling by c in k_F fixes the equation since c^q = c).
    Line { basis: EFElem },
    /// No solution in the field; the extension that would hold one.
    Extension(ExtensionStep),
}

/// Solve x^q = a x in the Laurent field. Writing x = pibar^w u with u a
/// one-unit, the order must satisfy (q-1) w = v(a) inside the perfected
/// exponent group, and the leading coefficient of a must be 1; the tail is
/// then a contraction.
pub fn solve_phi_fixed_modp(a: &EFElem) -> Result<ModpSolution> {
    let spec = &a.spec;
    let ff = &spec.ff;
    let q = spec.q() as i64;
    if a.is_zero_at_trunc() {
        return Err(LtError::ZeroInput(
            "the equation x^q = a x needs a nonzero right side".into(),
        ));
    }
    let v = a.min_exp().expect("nonzero");
    let w = v / Rat::int(q - 1);
    // the q-free part of the denominator of w cannot be absorbed by any
    // perfection depth, so it certifies a genuine extension
    let mut den = w.den();
    loop {
        let g = gcd_i64(den, q);
        if g == 1 {
            break;
        }
        den /= g;
    }
    if den > 1 || !ff.is_zero(&ff.sub(&a.coeff(v), &ff.one())) {
        return Ok(ModpSolution::Extension(ExtensionStep::kummer(
            a.clone(),
            (q - 1) as u64,
            "x",
        )));
    }
    // normalize to a = pibar^v (1 + t) and solve (1+s)^q = (1+t)(1+s)
    let shift = EFElem::monomial(spec, a.depth, a.trunc - v, -v, ff.one())?;
    let u = a.mul(&shift);
    let tr = u.trunc;
    let one = EFElem::one(spec, a.depth, tr);
    let t = u.sub(&one);
    let mut s = EFElem::zero(spec, a.depth, tr);
    let mut settled = false;
    for _ in 0..10_000 {
        let next = s
            .frobenius()
            .clamp_trunc(tr)
            .sub(&t.mul(&one.add(&s)).clamp_trunc(tr));
        if next.same_value(&s) {
            s = next;
            settled = true;
            break;
        }
        s = next;
    }
    if !settled {
        return Err(LtError::PrecisionExhausted(
            "tail iteration for the fixed line did not stabilize".into(),
        ));
    }
    let lead = EFElem::monomial(spec, a.depth.max(depth_hint(w, q)), tr + w, w, ff.one())?;
    let basis = lead.mul(&one.add(&s));
    if !basis.frobenius().same_value(&a.mul(&basis)) {
        return Err(LtError::PrecisionExhausted(
            "candidate line fails its defining equation".into(),
        ));
    }
    Ok(ModpSolution::Line { basis })
}

/// Depth needed to store an exponent with this denominator.
fn depth_hint(w: Rat, q: i64) -> u32 {
    let mut den = w.den();
    let mut s = 0;
    while den > 1 {
        den /= gcd_i64(den, q);
        s += 1;
    }
    s
}

// ------------------------------------------------------- mod-varpi solvers

pub enum Lt4Outcome {
    /// A solution, unique up to the stated kernel of scalars.
    Solved { x: EFElem, kernel: &'static str },
    Extension {
        step: ExtensionStep,
        kernel: &'static str,
    },
}

/// Multiplicative form: x^q = lambda x, kernel the scalar units k^*.
pub fn lt4_multiplicative(lam: &EFElem) -> Result<Lt4Outcome> {
    Ok(match solve_phi_fixed_modp(lam)? {
        ModpSolution::Line { basis } => Lt4Outcome::Solved {
            x: basis,
            kernel: "k^*",
        },
        ModpSolution::Extension(step) => Lt4Outcome::Extension { step, kernel: "k^*" },
    })
}

/// Additive form: x^q - x = mu, kernel the scalars k. Negative exponents
/// fold into q-th roots (one perfection level per pass, so genuinely
/// negative input exhausts any finite depth), a nonzero constant certifies
/// an extension, and the positive part sums its Frobenius orbit.
pub fn lt4_additive(mu: &EFElem) -> Result<Lt4Outcome> {
    let spec = &mu.spec;
    let ff = &spec.ff;
    let q = spec.q();
    let tr = mu.trunc;
    if tr <= Rat::zero() {
        return Err(LtError::PrecisionExhausted(
            "additive solver needs the constant coefficient determined".into(),
        ));
    }
    let defect = |x: &EFElem| {
        mu.sub(&x.frobenius().clamp_trunc(tr).sub(x)).clamp_trunc(tr)
    };
    let mut x = EFElem::zero(spec, mu.depth, tr);
    let mut resid = mu.clone();
    for _ in 0..=(mu.depth + 1) {
        let mut neg = EFElem::zero(spec, resid.depth, resid.trunc);
        for (e, c) in resid.terms() {
            if *e < Rat::zero() {
                neg.set(*e, c.clone())?;
            }
        }
        if neg.is_zero_at_trunc() {
            break;
        }
        x = x.add(&neg.root()?);
        resid = defect(&x);
    }
    if resid.min_exp().is_some_and(|e| e < Rat::zero()) {
        return Err(LtError::PerfectionDepthExceeded {
            needed: mu.depth + 1,
            depth: mu.depth,
        });
    }
    let c0 = resid.coeff(Rat::zero());
    if !ff.is_zero(&c0) {
        // constants solve t^q - t = c0 only when some scalar does
        match ff
            .enumerate()
            .into_iter()
            .find(|t| ff.sub(&ff.pow(t, q), t) == c0)
        {
            Some(t) => {
                let mut cst = EFElem::zero(spec, x.depth, tr);
                cst.set(Rat::zero(), t)?;
                x = x.add(&cst);
                resid = defect(&x);
            }
            None => {
                return Ok(Lt4Outcome::Extension {
                    step: ExtensionStep::artin_schreier(resid, "y"),
                    kernel: "k",
                })
            }
        }
    }
    // positive part: x -= mu_+ + mu_+^q + mu_+^{q^2} + ...
    let mut term = resid.clone();
    for _ in 0..10_000 {
        if term.is_zero_at_trunc() {
            break;
        }
        x = x.sub(&term);
        term = term.frobenius().clamp_trunc(tr);
    }
    resid = defect(&x);
    if !resid.is_zero_at_trunc() {
        return Err(LtError::PrecisionExhausted(
            "additive solver left an unexplained residual".into(),
        ));
    }
    Ok(Lt4Outcome::Solved { x, kernel: "k" })
}

// ------------------------------------------------------ p-th root descent

/// Certificate that beta = beta0 * alpha^p holds to the ring's coefficient
/// precision, with beta0 a unit constant.
pub struct Lt5Witness {
    pub beta0: OFElem,
    pub alpha: AFElem,
    pub transcript: Vec<serde_json::Value>,
}

/// The varpi-digit of every coefficient of x at level j, read off in the
/// residue Laurent field. Errors when some lower digit is still nonzero.
fn digit_reduction(x: &AFElem, j: i64) -> Result<EFElem> {
    let spec = &x.ring.spec;
    let mut out = EFElem::zero(spec, 0, Rat::int(x.hi + 1));
    for (e, c) in x.terms() {
        let d = c.div_varpi_exact(j).map_err(|_| {
            LtError::PrecisionExhausted(format!(
                "digit {j}: lower digits at pi^{e} are not cleared"
            ))
        })?;
        out.set(Rat::int(*e), d.residue()?)?;
    }
    Ok(out)
}

/// 1 + varpi^k * (exact digit lift of tbar), valid as far as tbar is known.
fn one_plus_digit(ring: &Arc<AFRing>, tbar: &EFElem, k: i64) -> Result<AFElem> {
    let hi = tbar.trunc.ceil() - 1;
    if hi < 0 {
        return Err(LtError::PrecisionExhausted(
            "digit correction has no constant-term window".into(),
        ));
    }
    let mut g = AFElem::zero(ring).clamp_hi(hi);
    g.set(0, OFElem::one(&ring.spec))?;
    for (e, c) in tbar.terms() {
        debug_assert!(e.is_integer(), "digit supports are integral");
        let lift = OFElem::lift_residue(&ring.spec, c).mul_varpi_pow(k);
        let cur = g
            .known_coeff(e.num())
            .unwrap_or_else(|| OFElem::zero(&ring.spec));
        g.set(e.num(), cur.add(&lift))?;
    }
    Ok(g)
}

/// Solve t^q + u t = w in the residue Laurent field for a scalar unit u and
/// positive-order w; the q-power term contracts, so iteration settles.
fn solve_wild_digit(ubar: &FFElem, w: &EFElem) -> Result<EFElem> {
    let ff = &w.spec.ff;
    match w.min_exp() {
        Some(v) if v > Rat::zero() => {}
        _ => {
            return Err(LtError::NoPthRootHypothesis(
                "boundary digit needs strictly positive support".into(),
            ))
        }
    }
    let uinv = ff.inv(ubar)?;
    let tr = w.trunc;
    let mut t = w.scalar_mul(&uinv);
    for _ in 0..10_000 {
        let defect = w
            .sub(&t.frobenius().clamp_trunc(tr).add(&t.scalar_mul(ubar)))
            .clamp_trunc(tr);
        if defect.is_zero_at_trunc() {
            return Ok(t);
        }
        t = t.add(&defect.scalar_mul(&uinv));
    }
    Err(LtError::PrecisionExhausted(
        "boundary digit iteration did not stabilize".into(),
    ))
}

/// Extract a p-th root of the unit beta up to a unit constant, one
/// varpi-digit at a time.
///
/// Mod varpi the support of beta must sit in pZ, which hands over an exact
/// root of the reduction. Each later digit j of beta/(beta0 alpha^p) is
/// cleared by whichever correction dominates at that level: a constant
/// absorbed into beta0, a p-th power correction (1 + varpi^{j/p} t)^p when
/// j(p-1) < p e, the mixed equation t^p + u_p t = digit on the boundary
/// j(p-1) = p e, or a plain division by the unit part of p beyond it.
pub fn lemma_lt5_descent(ops: &AFOperators, beta: &AFElem) -> Result<Lt5Witness> {
    let ring = &ops.ring;
    let spec = &ring.spec;
    if spec.q() != spec.p() || ops.group.spec.q() != spec.p() {
        return Err(LtError::BadInput(
            "p-th root descent expects totally ramified coefficients over a base of residue degree one".into(),
        ));
    }
    let p = spec.p() as i64;
    let n = ring.n;
    let e_l = spec.ram();
    if beta.hi < 0 {
        return Err(LtError::PrecisionExhausted(
            "input validity window has no constant term".into(),
        ));
    }
    let u_p = OFElem::from_i64(spec, p).div_varpi_exact(e_l)?;
    match u_p.v_varpi() {
        Ok(Val::Finite(v)) if v == Rat::zero() => {}
        _ => {
            return Err(LtError::BadInput(
                "ramification mismatch: p is not varpi^e times a unit".into(),
            ))
        }
    }
    let ubar = u_p.residue()?;

    // mod varpi the root is exact: support must lie in pZ
    let betabar = beta.reduce_mod_varpi();
    if betabar.is_zero_at_trunc() {
        return Err(LtError::NotAUnit(
            "beta reduces to zero mod varpi; only units admit this descent".into(),
        ));
    }
    let v0 = betabar.min_exp().expect("nonzero");
    if !(v0 / Rat::int(p)).is_integer() {
        return Err(LtError::NoPthRootHypothesis(format!(
            "the pi-order {v0} of beta mod varpi is not divisible by p"
        )));
    }
    for (e, _) in betabar.terms() {
        if !(*e / Rat::int(p)).is_integer() {
            return Err(LtError::NoPthRootHypothesis(format!(
                "beta mod varpi has a term at pi^{e}, which no p-th power reaches"
            )));
        }
    }
    let alphabar = betabar.root()?;
    let hi0 = Rat::new(beta.hi + 1, p).ceil() - 1;
    let mut alpha = AFElem::zero(ring).clamp_hi(hi0);
    for (e, c) in alphabar.terms() {
        debug_assert!(e.is_integer());
        alpha.set(e.num(), OFElem::lift_residue(spec, c))?;
    }

    let mut beta0 = OFElem::one(spec);
    let mut transcript = vec![json!({
        "stage": 0,
        "alpha_mod_varpi": alphabar.to_json(),
    })];

    let one_af = AFElem::one(ring);
    let mut r = beta.mul(&alpha.pow(p as u64)?.invert()?)?;
    for j in 1..n {
        let sbar = digit_reduction(&r.sub(&one_af), j)?;
        if sbar.is_zero_at_trunc() {
            transcript.push(json!({"stage": j, "regime": "clean"}));
            continue;
        }
        let mut corr = one_af.clone();
        let c0 = sbar.coeff(Rat::zero());
        if !spec.ff.is_zero(&c0) {
            let fac = OFElem::one(spec)
                .add(&OFElem::lift_residue(spec, &c0).mul_varpi_pow(j));
            beta0 = beta0.mul(&fac);
            corr = corr.scalar_mul(&fac);
        }
        let mut rest = sbar.clone();
        rest.set(Rat::zero(), spec.ff.zero())?;
        let regime;
        if rest.is_zero_at_trunc() {
            regime = "constant";
        } else if j * (p - 1) < p * e_l {
            regime = "frobenius";
            // only the p-th power of the correction reaches this digit
            if j % p != 0 {
                return Err(LtError::NoPthRootHypothesis(format!(
                    "digit {j} of beta/(beta0 alpha^p) needs a correction at fractional level {j}/{p}"
                )));
            }
            for (e, _) in rest.terms() {
                if !(*e / Rat::int(p)).is_integer() {
                    return Err(LtError::NoPthRootHypothesis(format!(
                        "digit {j} has a term at pi^{e} that no p-th power reaches"
                    )));
                }
            }
            let tbar = rest.root()?;
            let g = one_plus_digit(ring, &tbar, j / p)?;
            alpha = alpha.mul(&g)?;
            corr = corr.mul(&g.pow(p as u64)?)?;
        } else if j * (p - 1) == p * e_l {
            regime = "boundary";
            let tbar = solve_wild_digit(&ubar, &rest)?;
            let g = one_plus_digit(ring, &tbar, j - e_l)?;
            alpha = alpha.mul(&g)?;
            corr = corr.mul(&g.pow(p as u64)?)?;
        } else {
            regime = "unit-part";
            let uinv = spec.ff.inv(&ubar)?;
            let tbar = rest.scalar_mul(&uinv);
            let g = one_plus_digit(ring, &tbar, j - e_l)?;
            alpha = alpha.mul(&g)?;
            corr = corr.mul(&g.pow(p as u64)?)?;
        }
        r = r.mul(&corr.invert()?)?;
        transcript.push(json!({
            "stage": j,
            "regime": regime,
            "digit": sbar.to_json(),
        }));
    }

    for (e, _) in r.terms() {
        if *e != 0 {
            return Err(LtError::PrecisionExhausted(format!(
                "residual ratio keeps a term at pi^{e} after all digit stages"
            )));
        }
    }
    if r.hi < 0 {
        return Err(LtError::PrecisionExhausted(
            "validity window lost the constant term during the descent".into(),
        ));
    }
    if !r
        .known_coeff(0)
        .expect("window checked")
        .same_value(&OFElem::one(spec))
    {
        return Err(LtError::PrecisionExhausted(
            "residual ratio is not 1 after all digit stages".into(),
        ));
    }
    // independent recomputation of the certificate
    let back = alpha.pow(p as u64)?.scalar_mul(&beta0);
    if !back.same_value(beta) {
        return Err(LtError::PrecisionExhausted(
            "certificate beta0 * alpha^p does not reproduce beta".into(),
        ));
    }
    beta0.invert_unit()?;
    Ok(Lt5Witness {
        beta0,
        alpha,
        transcript,
    })
}

// ---------------------------------------------------------------- modules

/// A rank-one module presented by its Frobenius eigenvalue and the Gamma
/// cocycle on the pinned topological generators of the unit group.
pub struct RankOneModule {
    pub ops: Arc<AFOperators>,
    pub level: u32,
    pub lambda: AFElem,
    pub cocycle: Vec<(i64, AFElem)>,
}

/// Topological generators of Z_p^*: -1 together with 1+p (for p = 2 that is
/// the pair -1, 3; -3 generates the 1-units, so the pair generates).
pub fn canonical_unit_generators(p: u64) -> Result<Vec<i64>> {
    match p {
        2 => Ok(vec![-1, 3]),
        3 => Ok(vec![-1, 4]),
        _ => Err(LtError::BadInput(
            "unit generators are pinned for residue characteristic 2 and 3".into(),
        )),
    }
}

/// The module attached to a finite-order character: constant eigenvalue
/// eta(varpi) and constant cocycle eta(a); the commutation identity holds
/// automatically because the actions fix constants.
pub fn rank1_module(ops: &Arc<AFOperators>, eta: &CharacterEta) -> Result<RankOneModule> {
    if *eta.spec != *ops.ring.spec {
        return Err(LtError::BadInput(
            "character values live in a different coefficient ring".into(),
        ));
    }
    eta.pi_value.invert_unit()?;
    let lambda = AFElem::constant(&ops.ring, &eta.pi_value)?;
    let mut cocycle = Vec::new();
    for a in canonical_unit_generators(ops.group.spec.p())? {
        cocycle.push((a, AFElem::constant(&ops.ring, &eta.value(a)?)?));
    }
    Ok(RankOneModule {
        ops: ops.clone(),
        level: eta.level,
        lambda,
        cocycle,
    })
}

/// Change of basis e' = w e for a unit w: the eigenvalue picks up phi(w)/w
/// and each cocycle entry sigma_a(w)/w. A certificate beta for lambda^{p^n}
/// follows along as beta * w^{p^n}.
pub fn twist_presentation(d: &RankOneModule, w: &AFElem) -> Result<RankOneModule> {
    let winv = w.invert()?;
    let lambda = d.lambda.mul(&d.ops.frobenius(w)?)?.mul(&winv)?;
    let mut cocycle = Vec::new();
    for (a, c) in &d.cocycle {
        cocycle.push((*a, c.mul(&d.ops.gamma_i64(*a, w)?)?.mul(&winv)?));
    }
    Ok(RankOneModule {
        ops: d.ops.clone(),
        level: d.level,
        lambda,
        cocycle,
    })
}

/// Check the commutation identity sigma_a(lambda) c_a = lambda phi(c_a) for
/// every stored generator, plus unit-ness of the eigenvalue. Failures are
/// reported per item, never raised.
pub fn verify_module(d: &RankOneModule) -> CheckReport {
    let mut rep = CheckReport::new("rank1_module_invariants");
    match d.lambda.invert() {
        Ok(_) => rep.pass("lambda is a unit"),
        Err(e) => rep.fail("lambda is a unit", json!({"error": e.to_string()})),
    }
    for (a, ca) in &d.cocycle {
        let name = format!("phi-gamma commutation at a = {a}");
        let sides = (|| -> Result<(AFElem, AFElem)> {
            let lhs = d.ops.gamma_i64(*a, &d.lambda)?.mul(ca)?;
            let rhs = d.lambda.mul(&d.ops.frobenius(ca)?)?;
            Ok((lhs, rhs))
        })();
        match sides {
            Ok((lhs, rhs)) if lhs.same_value(&rhs) => rep.pass(&name),
            Ok((lhs, rhs)) => rep.fail(
                &name,
                json!({"lhs": lhs.to_json(), "rhs": rhs.to_json()}),
            ),
            Err(e) => rep.fail(&name, json!({"error": e.to_string()})),
        }
    }
    rep
}

// ------------------------------------------------------------- characters

/// A finite-order character of the unit group at a chosen level, together
/// with its value on the uniformizer. Values live in the coefficient ring.
#[derive(Clone)]
pub struct CharacterEta {
    pub spec: Arc<LocalFieldSpec>,
    pub p: u64,
    pub level: u32,
    pub pi_value: OFElem,
    unit_values: BTreeMap<u64, OFElem>,
}

impl CharacterEta {
    /// Close the given generator values into a full table on the units mod
    /// p^level; inconsistent or non-generating data is rejected.
    pub fn from_generator_values(
        spec: &Arc<LocalFieldSpec>,
        p: u64,
        level: u32,
        pi_value: OFElem,
        gens: &[(i64, OFElem)],
    ) -> Result<CharacterEta> {
        if level == 0 {
            return Err(LtError::BadInput("character level must be at least 1".into()));
        }
        let m = p
            .checked_pow(level)
            .ok_or_else(|| LtError::BadInput("character level overflows".into()))?;
        let mut values: BTreeMap<u64, OFElem> = BTreeMap::new();
        values.insert(1, OFElem::one(spec));
        loop {
            let mut changed = false;
            for (a, va) in gens {
                let ar = a.rem_euclid(m as i64) as u64;
                if ar % p == 0 {
                    return Err(LtError::NotAUnit(format!("{a} is not a unit mod {m}")));
                }
                for (b, vb) in values.clone() {
                    let c = (ar * b) % m;
                    let vc = va.mul(&vb);
                    match values.get(&c) {
                        Some(old) => {
                            if !old.same_value(&vc) {
                                return Err(LtError::BadInput(format!(
                                    "character values are not multiplicative at {c} mod {m}"
                                )));
                            }
                        }
                        None => {
                            values.insert(c, vc);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let euler = (1..m).filter(|x| gcd_u64(*x, m) == 1).count();
        if values.len() != euler {
            return Err(LtError::BadInput(format!(
                "generators reach {} of the {} units mod {}",
                values.len(),
                euler,
                m
            )));
        }
        Ok(CharacterEta {
            spec: spec.clone(),
            p,
            level,
            pi_value,
            unit_values: values,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.level)
    }

    /// The value at any unit, read through its class at this level.
    pub fn value(&self, a: i64) -> Result<OFElem> {
        let m = self.modulus();
        let ar = a.rem_euclid(m as i64) as u64;
        self.unit_values
            .get(&ar)
            .cloned()
            .ok_or_else(|| LtError::NotAUnit(format!("{a} is not a unit mod {m}")))
    }

    pub fn unit_values(&self) -> &BTreeMap<u64, OFElem> {
        &self.unit_values
    }

    pub fn to_json(&self) -> serde_json::Value {
        let units: serde_json::Map<String, serde_json::Value> = self
            .unit_values
            .iter()
            .map(|(a, v)| (a.to_string(), v.to_json()))
            .collect();
        json!({
            "pi_value": self.pi_value.to_json(),
            "level": self.level,
            "unit_values": units,
        })
    }
}

/// A chosen primitive p^k-th root of unity with its order.
pub struct ZetaData {
    pub zeta: OFElem,
    pub order: u64,
}

impl ZetaData {
    pub fn new(zeta: OFElem, order: u64, p: u64) -> Result<ZetaData> {
        let mut o = order;
        if o == 0 {
            return Err(LtError::OrderNotPPower("order 0 is not a p-power".into()));
        }
        while o % p == 0 {
            o /= p;
        }
        if o != 1 {
            return Err(LtError::OrderNotPPower(format!(
                "{order} is not a power of {p}"
            )));
        }
        let one = OFElem::one(&zeta.spec);
        if !zeta.pow(order).same_value(&one) {
            return Err(LtError::MissingRootsOfUnity(format!(
                "claimed root of unity does not have order dividing {order}"
            )));
        }
        if order > 1 && zeta.pow(order / p).same_value(&one) {
            return Err(LtError::MissingRootsOfUnity(format!(
                "claimed root of unity is not primitive of order {order}"
            )));
        }
        Ok(ZetaData { zeta, order })
    }

    pub fn powers(&self) -> Vec<OFElem> {
        let mut out = Vec::with_capacity(self.order as usize);
        let mut acc = OFElem::one(&self.zeta.spec);
        for _ in 0..self.order {
            out.push(acc.clone());
            acc = acc.mul(&self.zeta);
        }
        out
    }
}

// ---------------------------------------------------------------- descent

pub struct DescentResult {
    pub eta: CharacterEta,
    /// The Frobenius eigenvalue on the normalized basis: the unramified
    /// twist carried at the uniformizer.
    pub twist: OFElem,
    pub alpha: AFElem,
    /// Coefficient digits the root extractions leave pinned; everything
    /// reported is exact through this precision and silent beyond it.
    pub certified: i64,
    pub report: CheckReport,
    pub transcript: Vec<serde_json::Value>,
}

fn vanishes_mod(c: &OFElem, cert: i64) -> bool {
    match c.v_varpi() {
        Ok(Val::Infinite) => true,
        Ok(Val::Finite(v)) => v >= Rat::int(cert),
        Err(LtError::IndistinguishableFromZero(abs)) => abs >= cert,
        _ => false,
    }
}

/// The constant coefficient mod varpi^cert, provided every other term
/// vanishes through that many digits.
fn constant_mod(x: &AFElem, cert: i64) -> Option<OFElem> {
    if x.hi < 0 || cert < 1 {
        return None;
    }
    for (e, c) in x.terms() {
        if *e != 0 && !vanishes_mod(c, cert) {
            return None;
        }
    }
    let c0 = x.known_coeff(0)?;
    Some(c0.reduce_abs_prec(cert))
}

fn agrees_mod(x: &AFElem, y: &AFElem, cert: i64) -> bool {
    let d = x.sub(y);
    d.hi >= 0 && d.terms().all(|(_, c)| vanishes_mod(c, cert))
}

/// Unwind lambda^{p^n} = phi(beta)/beta one p-th root at a time. Each stage
/// extracts a root of the running certificate, matches the leftover p-th
/// root of unity against the supplied table, absorbs it into the
/// eigenvalue, and descends. The surviving element normalizes the basis, on
/// which the Gamma action reads off the character and Frobenius the twist.
pub fn character_descent(
    d: &RankOneModule,
    order: u64,
    beta: &AFElem,
    zeta: &ZetaData,
) -> Result<DescentResult> {
    let ops = &d.ops;
    let ring = &ops.ring;
    let spec = &ring.spec;
    let p = ops.group.spec.p();
    let mut n = 0u32;
    {
        let mut o = order;
        if o == 0 {
            return Err(LtError::OrderNotPPower("order 0 is not a p-power".into()));
        }
        while o % p == 0 {
            o /= p;
            n += 1;
        }
        if o != 1 {
            return Err(LtError::OrderNotPPower(format!(
                "{order} is not a power of {p}"
            )));
        }
    }
    if order > 1 && zeta.order < order {
        return Err(LtError::MissingRootsOfUnity(format!(
            "stages need roots of unity of order {order}, table holds {}",
            zeta.order
        )));
    }
    // A p-th power mod varpi^D pins its root only mod varpi^K with
    // K = max(D - v(p), ceil(D/p)): updates at or above K no longer move
    // the power. Each stage therefore certifies fewer digits than it reads.
    let e_l = spec.e as i64;
    let p_i = p as i64;
    let mut certs = Vec::with_capacity(n as usize);
    let mut dcur = ring.n;
    for _ in 0..n {
        dcur = (dcur - e_l).max((dcur + p_i - 1) / p_i);
        certs.push(dcur);
    }
    let cert_fin = certs.last().copied().unwrap_or(ring.n);
    if cert_fin < 1 {
        return Err(LtError::PrecisionExhausted(format!(
            "{} coefficient digits certify nothing after {n} root extractions; raise the ring precision",
            ring.n
        )));
    }

    let zpows: Vec<OFElem> = zeta
        .powers()
        .into_iter()
        .map(|z| z.reduce_abs_prec(ring.n))
        .collect();
    for i in 0..zpows.len() {
        for k in (i + 1)..zpows.len() {
            if zpows[i].reduce_abs_prec(cert_fin).same_value(&zpows[k]) {
                return Err(LtError::MissingRootsOfUnity(format!(
                    "the certified {cert_fin} digits do not separate the roots of unity"
                )));
            }
        }
    }

    let mut rep = CheckReport::new("character_descent");
    let lhs = d.lambda.pow(p.pow(n) as u64)?;
    let rhs = ops.frobenius(beta)?.mul(&beta.invert()?)?;
    if !lhs.same_value(&rhs) {
        return Err(LtError::BadInput(
            "certificate does not trivialize the p^n-th power of the eigenvalue".into(),
        ));
    }
    rep.pass("certificate relation lambda^(p^n) = phi(beta)/beta");

    let mut lam = d.lambda.clone();
    let mut b = beta.clone();
    let mut transcript = Vec::new();
    for m in (1..=n).rev() {
        let w = lemma_lt5_descent(ops, &b)?;
        let alpha = w.alpha;
        let ratio = ops.frobenius(&alpha)?.mul(&alpha.invert()?)?;
        let lam_pow = lam.pow(p.pow(m - 1) as u64)?;
        let zaf = ratio.mul(&lam_pow.invert()?)?;
        let cert_s = certs[(n - m) as usize];
        let zc = constant_mod(&zaf, cert_s).ok_or_else(|| {
            LtError::MissingRootsOfUnity(
                "stage discrepancy is not a constant; the certificate is inconsistent".into(),
            )
        })?;
        if !zc.pow(p).same_value(&OFElem::one(spec).reduce_abs_prec(ring.n)) {
            return Err(LtError::MissingRootsOfUnity(
                "stage discrepancy is not a p-th root of unity".into(),
            ));
        }
        let hoist = p.pow(m - 1) as u64;
        let found = zpows
            .iter()
            .enumerate()
            .find(|(_, z)| z.pow(hoist).same_value(&zc));
        let Some((idx, z)) = found else {
            return Err(LtError::MissingRootsOfUnity(format!(
                "no table entry has p^{}-th power matching the stage discrepancy",
                m - 1
            )));
        };
        lam = lam.scalar_mul(z);
        rep.pass(&format!("stage {}: p-th root extracted", n - m + 1));
        transcript.push(json!({
            "stage": n - m + 1,
            "beta0": w.beta0.to_json(),
            "zeta_power": idx,
            "digits": w.transcript,
        }));
        b = alpha;
    }

    let a_elem = b;
    // loop invariant at exit: the absorbed eigenvalue is phi(A)/A
    if !agrees_mod(&lam.mul(&a_elem)?, &ops.frobenius(&a_elem)?, cert_fin) {
        return Err(LtError::PrecisionExhausted(
            "descent chain lost the eigenvalue relation".into(),
        ));
    }
    rep.pass_with(
        "descent chain trivializes the absorbed eigenvalue",
        json!({"certified_digits": cert_fin}),
    );
    // phi eigenvalue on the normalized basis f = A^{-1} e: the original
    // lambda times A/phi(A), constant through the certified digits.
    let twist_af = d.lambda.mul(&a_elem)?.mul(&ops.frobenius(&a_elem)?.invert()?)?;
    let twist = constant_mod(&twist_af, cert_fin).ok_or_else(|| {
        LtError::PrecisionExhausted("Frobenius eigenvalue did not come out constant".into())
    })?;
    twist.invert_unit()?;
    rep.pass_with("Frobenius eigenvalue is constant", twist.to_json());

    let mut gen_values = Vec::new();
    for (a, ca) in &d.cocycle {
        let sa = ops.gamma_i64(*a, &a_elem)?;
        let val_af = ca.mul(&a_elem)?.mul(&sa.invert()?)?;
        let val = constant_mod(&val_af, cert_fin).ok_or_else(|| {
            LtError::PrecisionExhausted(format!(
                "Gamma eigenvalue at a = {a} did not come out constant"
            ))
        })?;
        rep.pass_with(&format!("Gamma eigenvalue at a = {a}"), val.to_json());
        gen_values.push((*a, val));
    }
    let eta = CharacterEta::from_generator_values(spec, p, d.level, twist.clone(), &gen_values)?;
    rep.pass("character closes multiplicatively at its level");
    Ok(DescentResult {
        eta,
        twist,
        alpha: a_elem,
        certified: cert_fin,
        report: rep,
        transcript,
    })
}
