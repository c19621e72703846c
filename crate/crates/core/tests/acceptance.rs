//! Acceptance gate: nine numbered criteria, one test each, printing a
//! single `[acceptance] criterion N: PASS/FAIL` line (visible with
//! `--nocapture`; failures always surface the line plus the panic).

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lt_core::af::{AFElem, AFOperators, AFRing};
use lt_core::descent::{
    character_descent, lemma_lt5_descent, rank1_module, twist_presentation, verify_module,
    CharacterEta, ZetaData,
};
use lt_core::ef::EFElem;
use lt_core::error::LtError;
use lt_core::ff::FFElem;
use lt_core::fgroup::{cyclotomic_f, standard_f, LTGroup};
use lt_core::hensel::hensel_lift;
use lt_core::local::{make_local_field, LocalFieldSpec, OFElem};
use lt_core::poly::UnivariatePoly;
use lt_core::rat::Rat;
use lt_core::report::CheckReport;
use lt_core::tower::{eisenstein_step, iterate_poly, reciprocity_conjugacy, torsion_check};

struct Criterion(u32);

impl Drop for Criterion {
    fn drop(&mut self) {
        if std::thread::panicking() {
            println!("[acceptance] criterion {}: FAIL", self.0);
        }
    }
}

fn criterion(n: u32) -> Criterion {
    Criterion(n)
}

fn pass(c: Criterion, detail: &str) {
    println!("[acceptance] criterion {}: PASS - {detail}", c.0);
    std::mem::forget(c);
}

fn qp(p: u64, prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(p, 1, vec![0, 1], vec![vec![-(p as i64)], vec![1]], prec).unwrap()
}

/// Q_3(sqrt 3), totally ramified via X^2 - 3.
fn q3_sqrt3(prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(3, 1, vec![0, 1], vec![vec![-3], vec![0], vec![1]], prec).unwrap()
}

/// Z_2[zeta_4] via X^2 + 2X + 2; zeta_4 = -1 - varpi.
fn z2_gauss(prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(2, 1, vec![0, 1], vec![vec![2], vec![2], vec![1]], prec).unwrap()
}

/// Z_3[zeta_3] via X^2 + 3X + 3; zeta_3 = 1 + varpi.
fn z3_zeta3(prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(3, 1, vec![0, 1], vec![vec![3], vec![3], vec![1]], prec).unwrap()
}

/// Z_3[zeta_9] via the degree-6 minimal polynomial of zeta_9 - 1.
fn z3_zeta9(prec: i64) -> Arc<LocalFieldSpec> {
    make_local_field(
        3,
        1,
        vec![0, 1],
        vec![
            vec![3],
            vec![9],
            vec![18],
            vec![21],
            vec![15],
            vec![6],
            vec![1],
        ],
        prec,
    )
    .unwrap()
}

/// The four-field suite: (Q_2, 2X+X^2), (Q_3, 3X+X^3), (Q_2, (1+X)^2-1),
/// (Q_3(sqrt 3), sqrt3 X + X^3).
fn suite(cap: i64, target: i64) -> Vec<(&'static str, Arc<LTGroup>)> {
    let prec = cap + target;
    let s2 = qp(2, prec);
    let s3 = qp(3, prec);
    let sr = q3_sqrt3(prec);
    vec![
        (
            "Q_2 standard",
            LTGroup::new(&s2, standard_f(&s2), cap, target).unwrap(),
        ),
        (
            "Q_3 standard",
            LTGroup::new(&s3, standard_f(&s3), cap, target).unwrap(),
        ),
        (
            "Q_2 multiplicative",
            LTGroup::new(&s2, cyclotomic_f(&s2).unwrap(), cap, target).unwrap(),
        ),
        (
            "Q_3(sqrt 3) standard",
            LTGroup::new(&sr, standard_f(&sr), cap, target).unwrap(),
        ),
    ]
}

/// Level-m tower work at target precision 6 needs the series cap to cover
/// the ramification: points of valuation 1/ram lose a factor ram.
fn tower_group(p: u64, m: u32, cyclo: bool) -> Arc<LTGroup> {
    let ram = (p as i64).pow(m - 1) * (p as i64 - 1);
    let cap = (6 * ram).max(p as i64);
    let spec = qp(p, cap + 6);
    let f = if cyclo {
        cyclotomic_f(&spec).unwrap()
    } else {
        standard_f(&spec)
    };
    LTGroup::new(&spec, f, cap, 6).unwrap()
}

fn assert_item(rep: &CheckReport, check: &str) {
    let item = rep
        .items
        .iter()
        .find(|i| i.check == check)
        .unwrap_or_else(|| panic!("report {} has no item {check}", rep.name));
    assert_eq!(item.status, "pass", "{check}: {:?}", item.witness);
}

#[test]
fn criterion_1_axiom_suite() {
    let c = criterion(1);
    let t0 = Instant::now();
    for (name, g) in suite(9, 15) {
        let rep = g.verify_axioms(&[2, 3, 5, -1]).unwrap();
        assert!(
            rep.passed,
            "{name}: first failure {:?}",
            rep.first_failure()
        );
        for check in [
            "law_linear_part",
            "law_commutes_with_f",
            "commutativity",
            "identity",
            "associativity",
            "inverse_exists",
            "endo_varpi_is_f",
            "endo_one",
        ] {
            assert_item(&rep, check);
        }
        for a in [2i64, 3, 5, -1] {
            assert_item(&rep, &format!("endo_additive[{a}]"));
            for b in [2i64, 3, 5, -1] {
                assert_item(&rep, &format!("endo_mul[{a},{b}]"));
                assert_item(&rep, &format!("endo_add[{a},{b}]"));
            }
        }
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs() < 30, "suite took {dt:.1?}");
    pass(
        c,
        &format!("four-field axiom suite at cap 9, precision 15, in {dt:.1?}"),
    );
}

/// Binomial coefficient C(u, k) inside O_F, by the falling-factorial
/// formula; integral because base-p digit carries cancel the p's in k!.
fn binom(u: &OFElem, k: u32) -> OFElem {
    let spec = &u.spec;
    let mut num = OFElem::one(spec);
    for j in 0..k as i64 {
        num = num.mul(&u.sub(&OFElem::from_i64(spec, j)));
    }
    let mut den = OFElem::one(spec);
    for j in 1..=k as i64 {
        den = den.mul(&OFElem::from_i64(spec, j));
    }
    num.divide_exact(&den).unwrap()
}

#[test]
fn criterion_2_multiplicative_closed_forms() {
    let c = criterion(2);
    let cap = 12;
    let spec = qp(2, cap + 15);
    let g = LTGroup::new(&spec, cyclotomic_f(&spec).unwrap(), cap, 15).unwrap();

    // group law is X + Y + XY on the nose
    let law = g.group_law().unwrap();
    let one = OFElem::one(&spec);
    for e in [[1u32, 0], [0, 1], [1, 1]] {
        assert!(law.coeff(&e).same_value(&one), "coefficient at {e:?}");
    }
    for (e, coeff) in law.terms() {
        let expect = matches!((e[0], e[1]), (1, 0) | (0, 1) | (1, 1));
        assert!(
            coeff.same_value(&OFElem::from_i64(&spec, expect as i64)),
            "stray coefficient at {e:?}"
        );
    }

    // endo(u) matches the binomial expansion of (1+T)^u - 1 digit-exactly
    let third = OFElem::from_i64(&spec, 3).invert_unit().unwrap();
    let us = [
        OFElem::from_i64(&spec, 3),
        OFElem::from_i64(&spec, 5),
        OFElem::from_i64(&spec, -1),
        third,
    ];
    for u in &us {
        let e = g.endo(u).unwrap();
        for k in 1..=cap as u32 {
            assert!(
                e.coeff(&[k]).same_value(&binom(u, k)),
                "degree {k} of the endo disagrees with the binomial series"
            );
        }
        assert!(e.coeff(&[0]).same_value(&OFElem::zero(&spec)));
    }
    pass(
        c,
        "X+Y+XY and four binomial endomorphisms digit-exact to cap 12",
    );
}

#[test]
fn criterion_3_iterate_shape() {
    let c = criterion(3);
    for (name, g) in suite(9, 6) {
        let q = g.q() as i64;
        let w = OFElem::varpi(&g.spec);
        for m in 1..=3u32 {
            let it = iterate_poly(&g, m);
            assert_eq!(it.degree(), q.pow(m), "{name} m={m} top degree");
            assert!(
                it.leading().same_value(&OFElem::one(&g.spec)),
                "{name} m={m} not monic"
            );
            assert!(
                it.coeff(1).same_value(&w.pow(m as u64)),
                "{name} m={m} linear coefficient is not varpi^m"
            );
        }
    }
    // the q = 3, m = 2 iterate, digit for digit
    let spec = qp(3, 15);
    let g = LTGroup::new(&spec, standard_f(&spec), 9, 6).unwrap();
    let it = iterate_poly(&g, 2);
    let want = UnivariatePoly::from_i64(&spec, &[0, 9, 0, 30, 0, 27, 0, 9, 0, 1]);
    assert!(it.same_value(&want), "9X+30X^3+27X^5+9X^7+X^9 expected");
    pass(
        c,
        "iterates are X^{q^m} + ... + varpi^m X for m <= 3 over all four fields",
    );
}

#[test]
fn criterion_4_eisenstein_tower() {
    let c = criterion(4);
    for (name, g) in suite(9, 6) {
        for m in 1..=3u32 {
            let step = eisenstein_step(&g, m).unwrap();
            assert!(step.report.passed, "{name} m={m}");
            assert_item(&step.report, "eisenstein_criterion");
            // independent product identity Phi_m * f^(m-1) = f^(m)
            let back = step.tower.minpoly.mul(&iterate_poly(&g, m - 1));
            assert!(
                back.same_value(&iterate_poly(&g, m)),
                "{name} m={m}: quotient times previous level misses the iterate"
            );
        }
    }
    let spec = qp(3, 15);
    let g = LTGroup::new(&spec, standard_f(&spec), 9, 6).unwrap();
    let phi2 = eisenstein_step(&g, 2).unwrap().tower.minpoly.clone();
    let want = UnivariatePoly::from_i64(&spec, &[3, 0, 9, 0, 6, 0, 1]);
    assert!(phi2.same_value(&want), "X^6+6X^4+9X^2+3 expected");
    pass(c, "Phi_m Eisenstein and Phi_m * f^(m-1) = f^(m) for m <= 3");
}

#[test]
fn criterion_5_torsion_structure() {
    let c = criterion(5);
    for (q, m) in [(2u64, 1u32), (2, 2), (2, 3), (3, 1), (3, 2)] {
        let g = tower_group(q, m, false);
        assert_eq!(g.target_prec, 6, "annihilator precision is pinned at 6");
        let rep = torsion_check(&g, m).unwrap();
        assert!(
            rep.passed,
            "(q, m) = ({q}, {m}): first failure {:?}",
            rep.first_failure()
        );
        assert_item(&rep, "cyclic_of_order_q_m");
        assert_item(&rep, "varpi_power_m_annihilates");
        assert_item(&rep, "varpi_power_m_minus_1_survives");
        // q^m <= 16 throughout, so the full group table must have been run
        assert_item(&rep, "group_table_full");
        assert_item(&rep, "unit_orbit_roots_of_phi");
        assert_item(&rep, "points_pairwise_distinct");
    }
    pass(
        c,
        "cyclic torsion of order q^m with full tables, annihilators at 6 digits",
    );
}

#[test]
fn criterion_6_norms_and_conjugates() {
    let c = criterion(6);
    // N(pi_m) = (-1)^{deg Phi_m} varpi: minus varpi exactly when q = 2, m = 1
    for (q, m, sign) in [
        (3u64, 1u32, 1i64),
        (3, 2, 1),
        (2, 1, -1),
        (2, 2, 1),
        (2, 3, 1),
    ] {
        let g = tower_group(q, m, false);
        let pi = eisenstein_step(&g, m).unwrap().tower.gen();
        let nm = pi.norm().unwrap();
        let want = OFElem::varpi(&g.spec).mul_i64(sign);
        assert!(
            nm.same_value(&want),
            "(q, m) = ({q}, {m}): norm is not {sign} * varpi"
        );
    }

    // conjugacy [u^{-1}](pi_m) at 6 certified digits; u = 2 is the
    // uniformizer over Q_2, hence not a unit there and filtered per field
    for m in 1..=2u32 {
        let g = tower_group(3, m, false);
        for u in [2i64, 5, -1] {
            let rep = reciprocity_conjugacy(&g, m, &OFElem::from_i64(&g.spec, u)).unwrap();
            assert!(rep.passed, "Q_3 m={m} u={u}");
            assert_item(&rep, "conjugate_is_root");
        }
    }
    for m in 1..=3u32 {
        let g = tower_group(2, m, false);
        for u in [5i64, -1] {
            let rep = reciprocity_conjugacy(&g, m, &OFElem::from_i64(&g.spec, u)).unwrap();
            assert!(rep.passed, "Q_2 m={m} u={u}");
            assert_item(&rep, "conjugate_is_root");
        }
        let two = OFElem::from_i64(&g.spec, 2);
        assert!(matches!(
            reciprocity_conjugacy(&g, m, &two),
            Err(LtError::NotAUnit(_))
        ));
    }
    // multiplicative model: the conjugate must equal zeta -> zeta^{u^{-1}}
    for m in 1..=3u32 {
        let g = tower_group(2, m, true);
        for u in [5i64, -1] {
            let rep = reciprocity_conjugacy(&g, m, &OFElem::from_i64(&g.spec, u)).unwrap();
            assert!(rep.passed, "Q_2 cyclotomic m={m} u={u}");
            assert_item(&rep, "cyclotomic_cross_check");
        }
    }
    pass(
        c,
        "norms carry the documented sign; conjugacy and the cyclotomic cross-check hold at 6 digits",
    );
}

fn sample_of(spec: &Arc<LocalFieldSpec>, rng: &mut ChaCha8Rng) -> OFElem {
    let c = rng.gen_range(-999i64..=999);
    let k = rng.gen_range(0..=spec.e as i64);
    OFElem::from_i64(spec, c).mul_varpi_pow(k)
}

fn sample_af(ring: &Arc<AFRing>, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> AFElem {
    let mut x = AFElem::zero(ring).clamp_hi(ring.whi.min(hi + 8));
    for _ in 0..rng.gen_range(3..=7) {
        let e = rng.gen_range(lo..=hi);
        x.set(e, sample_of(&ring.spec, rng)).unwrap();
    }
    x
}

fn sample_ef(
    spec: &Arc<LocalFieldSpec>,
    table: &[FFElem],
    rng: &mut ChaCha8Rng,
    depth: u32,
) -> EFElem {
    let q = spec.q() as i64;
    let den = q.pow(depth);
    let mut x = EFElem::zero(spec, depth, Rat::int(40));
    for _ in 0..rng.gen_range(2..=5) {
        let e = Rat::new(rng.gen_range(-12 * den..=24 * den), den);
        let c = table[rng.gen_range(0..table.len())].clone();
        x.set(e, c).unwrap();
    }
    if x.is_zero_at_trunc() {
        x.set(Rat::int(0), table[1].clone()).unwrap();
    }
    x
}

#[test]
fn criterion_7_coefficient_rings() {
    let c = criterion(7);
    let (lo, hi, n) = (-8i64, 24i64, 8i64);
    for p in [2u64, 3] {
        let spec = qp(p, 17);
        let g = LTGroup::new(&spec, standard_f(&spec), 9, 8).unwrap();
        let q = p as i64;
        // phi maps exponent -k to -qk and widens by one digit layer per
        // carried digit; powers of 1/phi(pi) decay by span per step
        let span = q + (n - 1) * (q - 1);
        let floor = q * lo - (n - 1) * (q - 1);
        let ceil = q * hi + span * lo.abs() + 16;
        let ring = AFRing::new(&spec, &spec, n, floor, ceil).unwrap();
        let ops = AFOperators::new(&ring, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        for i in 0..100 {
            let x = sample_af(&ring, &mut rng, lo, hi);
            for a in [-1i64, (p + 1) as i64, 5] {
                let lhs = ops.frobenius(&ops.gamma_i64(a, &x).unwrap()).unwrap();
                let rhs = ops.gamma_i64(a, &ops.frobenius(&x).unwrap()).unwrap();
                assert!(lhs.same_value(&rhs), "p={p} sample {i}: phi sigma_{a} != sigma_{a} phi");
            }
        }

        for i in 0..100 {
            let x = sample_af(&ring, &mut rng, lo, hi);
            let red = ops.frobenius(&x).unwrap().reduce_mod_varpi();
            let qth = x.reduce_mod_varpi().frobenius();
            assert!(red.same_value(&qth), "p={p} sample {i}: phi mod varpi is not x -> x^q");
        }

        let table = spec.ff.enumerate();
        assert_eq!(
            EFElem::pi(&spec, 0, Rat::int(40)).v_e().unwrap(),
            Rat::new(q, q - 1)
        );
        for i in 0..100 {
            let depth = rng.gen_range(0..=2);
            let x = sample_ef(&spec, &table, &mut rng, depth);
            let y = sample_ef(&spec, &table, &mut rng, depth);
            let sum = x.v_e().unwrap() + y.v_e().unwrap();
            assert_eq!(x.mul(&y).v_e().unwrap(), sum, "p={p} pair {i}");
        }
    }
    pass(
        c,
        "100-sample phi/Gamma commutation, q-power reduction, and v_E additivity at N=8, window [-8,24]",
    );
}

struct Bucket {
    label: &'static str,
    p: u64,
    l: Arc<LocalFieldSpec>,
    /// A primitive root of unity of order `table_order` (1 meaning the
    /// trivial table).
    zeta: OFElem,
    table_order: u64,
    ring_n: i64,
}

/// Certified digits left after s p-th root extractions starting from n:
/// each stage keeps max(D - e_L, ceil(D/p)).
fn ladder(mut d: i64, stages: u32, e_l: i64, p: i64) -> i64 {
    for _ in 0..stages {
        d = (d - e_l).max((d + p - 1) / p);
    }
    d
}

fn char_order(p: u64, vals: &[&OFElem], max: u64) -> u64 {
    let one = OFElem::one(&vals[0].spec);
    let mut k = 1u64;
    loop {
        if vals.iter().all(|v| v.pow(k).same_value(&one)) {
            return k;
        }
        k *= p;
        assert!(k <= max, "value order exceeds the bucket order");
    }
}

#[test]
fn criterion_8_descent_round_trip() {
    let c = criterion(8);
    let t0 = Instant::now();

    let one2 = qp(2, 16);
    let one3 = qp(3, 16);
    let gauss = z2_gauss(16);
    let zeta3 = z3_zeta3(16);
    let zeta9 = z3_zeta9(24);
    let buckets = vec![
        Bucket {
            label: "Q_2, orders 1 and 2",
            p: 2,
            l: one2.clone(),
            zeta: OFElem::from_i64(&one2, -1),
            table_order: 2,
            ring_n: 8,
        },
        Bucket {
            label: "Z_2[zeta_4], order 4",
            p: 2,
            l: gauss.clone(),
            zeta: OFElem::from_i64(&gauss, -1).sub(&OFElem::varpi(&gauss)),
            table_order: 4,
            ring_n: 8,
        },
        Bucket {
            label: "Q_3, order 1",
            p: 3,
            l: one3.clone(),
            zeta: OFElem::one(&one3),
            table_order: 1,
            ring_n: 8,
        },
        Bucket {
            label: "Z_3[zeta_3], order 3",
            p: 3,
            l: zeta3.clone(),
            zeta: OFElem::one(&zeta3).add(&OFElem::varpi(&zeta3)),
            table_order: 3,
            ring_n: 8,
        },
        Bucket {
            label: "Z_3[zeta_9], order 9",
            p: 3,
            l: zeta9.clone(),
            zeta: OFElem::one(&zeta9).add(&OFElem::varpi(&zeta9)),
            table_order: 9,
            ring_n: 16,
        },
    ];

    let mut ran = 0u32;
    for bucket in &buckets {
        let p = bucket.p;
        let base = qp(p, 15);
        let g = LTGroup::new(&base, standard_f(&base), 9, 6).unwrap();
        let ring = AFRing::new(&bucket.l, &g.spec, bucket.ring_n, 0, 48).unwrap();
        let ops = Arc::new(AFOperators::new(&ring, &g));
        let zdata = ZetaData::new(bucket.zeta.clone(), bucket.table_order, p).unwrap();
        let one = OFElem::one(&bucket.l);
        let w = AFElem::one(&ring).add(&AFElem::pi_pow(&ring, 1).unwrap());
        let gen1 = if p == 2 { 3i64 } else { 4 };

        // every character of this bucket's order profile at levels 1 and 2
        let zpows = zdata.powers();
        let mut chars: Vec<(u32, OFElem, OFElem, OFElem)> = Vec::new();
        match (p, bucket.table_order) {
            (2, 2) => {
                for pi_v in [&zpows[0], &zpows[1]] {
                    chars.push((1, pi_v.clone(), one.clone(), one.clone()));
                    for v in [&zpows[0], &zpows[1]] {
                        // -1 and 3 share a class mod 4
                        chars.push((2, pi_v.clone(), v.clone(), v.clone()));
                    }
                }
            }
            (2, 4) => {
                for pi_v in [&zpows[1], &zpows[3]] {
                    chars.push((1, pi_v.clone(), one.clone(), one.clone()));
                    for v in [&zpows[0], &zpows[2]] {
                        chars.push((2, pi_v.clone(), v.clone(), v.clone()));
                    }
                }
            }
            (3, 1) => {
                chars.push((1, one.clone(), one.clone(), one.clone()));
                chars.push((2, one.clone(), one.clone(), one.clone()));
            }
            (3, 3) => {
                // a 3-power order forces eta(-1) = 1
                for pi_v in [&zpows[1], &zpows[2]] {
                    chars.push((1, pi_v.clone(), one.clone(), one.clone()));
                }
                for pi_v in [&zpows[0], &zpows[1], &zpows[2]] {
                    for v4 in [&zpows[0], &zpows[1], &zpows[2]] {
                        if pi_v.same_value(&one) && v4.same_value(&one) {
                            continue;
                        }
                        chars.push((2, pi_v.clone(), one.clone(), v4.clone()));
                    }
                }
            }
            (3, 9) => {
                let prim = [1usize, 2, 4, 5, 7, 8];
                for k in prim {
                    chars.push((1, zpows[k].clone(), one.clone(), one.clone()));
                    for v4 in [&zpows[0], &zpows[3], &zpows[6]] {
                        chars.push((2, zpows[k].clone(), one.clone(), v4.clone()));
                    }
                }
            }
            _ => unreachable!(),
        }

        for (level, pi_v, v_m1, v_g) in chars {
            let eta = CharacterEta::from_generator_values(
                &bucket.l,
                p,
                level,
                pi_v.clone(),
                &[(-1, v_m1.clone()), (gen1, v_g.clone())],
            )
            .unwrap();
            let order = char_order(p, &[&pi_v, &v_m1, &v_g], bucket.table_order);
            let mut stages = 0u32;
            let mut o = order;
            while o % p == 0 {
                o /= p;
                stages += 1;
            }

            let d = rank1_module(&ops, &eta).unwrap_or_else(|e| {
                panic!(
                    "{} level {level} order {order}: rank1_module: {e:?}",
                    bucket.label
                )
            });
            let dw = twist_presentation(&d, &w).unwrap();
            assert!(verify_module(&dw).passed, "{}: module invariants", bucket.label);

            // the certificate follows the basis change: beta = w^{p^n}
            let beta = w.pow(order).unwrap();

            // external stage-by-stage witness check at ring precision >= 8
            let mut b = beta.clone();
            for _ in 0..stages {
                let wtn = lemma_lt5_descent(&ops, &b).unwrap();
                let back = wtn.alpha.pow(p).unwrap().scalar_mul(&wtn.beta0);
                assert!(
                    back.same_value(&b),
                    "{}: witness beta0 * alpha^p misses beta",
                    bucket.label
                );
                b = wtn.alpha;
            }

            let res = character_descent(&dw, order, &beta, &zdata).unwrap();
            assert!(res.report.passed, "{}: {:?}", bucket.label, res.report.first_failure());
            let want_cert = ladder(bucket.ring_n, stages, bucket.l.e as i64, p as i64);
            assert_eq!(res.certified, want_cert, "{}: certified digits", bucket.label);
            assert!(
                res.twist.same_value(&pi_v),
                "{}: recovered twist is not eta(pi)",
                bucket.label
            );
            assert!(res.eta.value(-1).unwrap().same_value(&v_m1));
            assert!(res.eta.value(gen1).unwrap().same_value(&v_g));
            assert_eq!(res.eta.level, level);
            ran += 1;
        }
    }

    let dt = t0.elapsed();
    assert!(dt.as_secs() < 60, "round trip took {dt:.1?}");
    assert_eq!(ran, 48, "character census: 12 for p=2 plus 36 for p=3");
    pass(
        c,
        &format!("{ran} characters of level <= 2, order <= p^2, recovered in {dt:.1?}"),
    );
}

#[test]
fn criterion_9_negative_controls() {
    let c = criterion(9);

    // tampering a law coefficient localizes in the report
    let spec = qp(2, 15);
    let g = LTGroup::new(&spec, standard_f(&spec), 9, 6).unwrap();
    let law = g.group_law().unwrap();
    for e in [vec![1u32, 1], vec![2, 1], vec![0, 3]] {
        let mut bad = law.clone();
        bad.set(
            e.clone(),
            law.coeff(&e).add(&OFElem::one(&spec)),
        );
        let rep = g.verify_law(&bad).unwrap();
        assert!(!rep.passed, "tamper at {e:?} went unnoticed");
        let first = rep.first_failure().unwrap();
        assert!(
            first.witness.get("exponent").is_some(),
            "failure at {e:?} is not localized: {:?}",
            first
        );
    }

    // the uniformizer has no p-th root certificate
    let base = qp(2, 15);
    let g2 = LTGroup::new(&base, standard_f(&base), 9, 6).unwrap();
    let ring = AFRing::new(&base, &g2.spec, 8, 0, 48).unwrap();
    let ops = AFOperators::new(&ring, &g2);
    let pi = AFElem::pi_pow(&ring, 1).unwrap();
    assert!(matches!(
        lemma_lt5_descent(&ops, &pi),
        Err(LtError::NoPthRootHypothesis(_))
    ));

    // X^2 + 1 over Z_3 violates the lifting condition at every unit seed
    let s3 = qp(3, 8);
    let poly = [
        OFElem::one(&s3),
        OFElem::zero(&s3),
        OFElem::one(&s3),
    ];
    for seed in [1i64, 2] {
        assert!(matches!(
            hensel_lift(&poly, &OFElem::from_i64(&s3, seed)),
            Err(LtError::HenselConditionFails(_))
        ));
    }
    pass(
        c,
        "tampered law localized; lt5 on pi and Hensel on X^2+1 over Z_3 refuse correctly",
    );
}
