use std::fs;
use std::path::PathBuf;
use std::process::exit;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use lt_core::af::{AFElem, AFOperators, AFRing};
use lt_core::descent::{
    character_descent, lemma_lt5_descent, lt4_additive, lt4_multiplicative, rank1_module,
    solve_phi_fixed_modp, twist_presentation, CharacterEta, Lt4Outcome, ModpSolution, ZetaData,
};
use lt_core::ef::EFElem;
use lt_core::error::LtError;
use lt_core::ff::{FFElem, FiniteFieldSpec};
use lt_core::fgroup::{cyclotomic_f, lt_isomorphism, poly_from_i64, standard_f, LTGroup};
use lt_core::local::{make_local_field, LocalFieldSpec, OFElem};
use lt_core::poly::UnivariatePoly;
use lt_core::rat::Rat;
use lt_core::report::CheckReport;
use lt_core::series::TruncatedSeries;
use lt_core::tower::{
    eisenstein_step, galois_apply, int_rep_mod, norm_to_base, reciprocity_conjugacy, torsion_check,
};

/// Lubin-Tate toolkit: formal group laws, division towers, Laurent
/// coefficient rings, and rank-one descent, all with canonical JSON output.
#[derive(Parser)]
#[command(name = "lt", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Print the formal group law F_f(X, Y) to the degree cap.
    GroupLaw,
    /// Print the endomorphism [a](X) for the scalar given by --a.
    Endo,
    /// Print the m-fold iterate f applied m times.
    Iterate,
    /// Run the axiom suite: associativity, commutativity, [a][b] = [ab],
    /// [a+b] = F([a],[b]), and f-equivariance.
    VerifyAxioms,
    /// Print the isomorphism from the standard group to the one given by --f.
    Iso,
    /// Level-m division polynomial with its Eisenstein verdict.
    Eisenstein,
    /// Certify the level-m torsion module is cyclic of order q^m.
    TorsionCheck,
    /// Apply the Galois action of the unit --a to the level-m generator.
    Galois,
    /// Norm of the level-m generator down to the base field.
    Norm,
    /// Check [u^{-1}] sends the level-m generator to a conjugate root.
    Reciprocity,
    /// Seeded suite: phi reduces to the q-power map and is multiplicative.
    AfFrobenius,
    /// Seeded suite: phi commutes with gamma_a and gamma_a is multiplicative.
    AfGamma,
    /// Seeded suite: v_E normalization and additivity on products.
    Ve,
    /// Solve x^q = a x in the residue Laurent field (input via --config).
    SolveModp,
    /// Multiplicative or additive descent equation solver (input via --config).
    Lt4,
    /// Extract a p-th root witness for a one-unit certificate (input via --config).
    Lt5,
    /// Round-trip a rank-one module back to its character (input via --config).
    Descend,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Residue characteristic.
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Residue degree of the field (default 1).
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Residue modulus over F_p, comma-separated coefficients, constant first.
    #[arg(long, global = true, allow_hyphen_values = true)]
    modulus: Option<String>,
    /// Eisenstein polynomial, comma-separated integers, constant first, monic.
    /// Coefficients that need the unramified generator go through --config.
    #[arg(long, global = true, allow_hyphen_values = true)]
    eisenstein: Option<String>,
    /// Frobenius lift: "standard" (pi X + X^q), "cyclotomic" ((1+X)^p - 1),
    /// or comma-separated integer coefficients from degree 0.
    #[arg(long, global = true, allow_hyphen_values = true)]
    f: Option<String>,
    /// Certified digits: series commands default deg + 6, tower commands 6,
    /// coefficient-ring commands 8.
    #[arg(long, global = true)]
    prec: Option<i64>,
    /// Series degree cap; tower commands scale it to reach --prec digits at
    /// the ramified points of level m (default 9 elsewhere).
    #[arg(long, global = true)]
    deg: Option<i64>,
    /// Laurent seed window "lo,hi" for the af-* suites (default "-8,24").
    #[arg(long, global = true, allow_hyphen_values = true)]
    window: Option<String>,
    /// Character level for descend when the config omits it (default 1).
    #[arg(long, global = true)]
    level: Option<u32>,
    /// Scalar for endo/galois/af-gamma; an integer or "n/d".
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    /// Unit for reciprocity; an integer or "n/d".
    #[arg(long, global = true, allow_hyphen_values = true)]
    u: Option<String>,
    /// Tower level, iterate count, or sample count, per subcommand.
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Seed for the randomized suites (default 7).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file mirroring the flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write a run transcript (argv, effective config, output, exit) here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    p: Option<u64>,
    d: Option<usize>,
    modulus: Option<Vec<u64>>,
    eisenstein: Option<Vec<Vec<i64>>>,
    f: Option<String>,
    prec: Option<i64>,
    deg: Option<i64>,
    window: Option<(i64, i64)>,
    level: Option<u32>,
    a: Option<String>,
    u: Option<String>,
    m: Option<u32>,
    seed: Option<u64>,
    input: Option<Value>,
}

enum CliErr {
    Usage(String),
    Lt(LtError),
}

impl From<LtError> for CliErr {
    fn from(e: LtError) -> CliErr {
        CliErr::Lt(e)
    }
}

fn usage(msg: impl Into<String>) -> CliErr {
    CliErr::Usage(msg.into())
}

type CResult<T> = Result<T, CliErr>;

/// Flags merged over the config file, with the field spec already built.
struct Run {
    p: u64,
    spec: Arc<LocalFieldSpec>,
    fchoice: String,
    prec: i64,
    deg: i64,
    window: (i64, i64),
    level: u32,
    a: Option<String>,
    u: Option<String>,
    m: Option<u32>,
    seed: u64,
    input: Option<Value>,
    effective: Value,
}

fn parse_i64_list(flag: &str, s: &str) -> CResult<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| usage(format!("{flag}: `{t}` is not an integer")))
        })
        .collect()
}

/// Default precision and cap per subcommand family. Series identities want
/// many digits at a modest cap; tower evaluations happen at points of
/// valuation 1/(q^{m-1}(q-1)), so certifying `prec` digits needs the cap
/// scaled by the ramification; coefficient-ring work fixes N = 8.
fn default_sizes(
    cmd: Cmd,
    q: u64,
    m: u32,
    prec_flag: Option<i64>,
    deg_flag: Option<i64>,
) -> CResult<(i64, i64)> {
    let q_i = q as i64;
    Ok(match cmd {
        Cmd::GroupLaw | Cmd::Endo | Cmd::Iterate | Cmd::VerifyAxioms | Cmd::Iso => {
            let deg = deg_flag.unwrap_or(9);
            (prec_flag.unwrap_or(deg + 6), deg)
        }
        Cmd::Eisenstein | Cmd::TorsionCheck | Cmd::Galois | Cmd::Norm | Cmd::Reciprocity => {
            let prec = prec_flag.unwrap_or(6);
            let lvl = m.max(1);
            let mut ram: i64 = q_i - 1;
            for _ in 1..lvl {
                ram = ram.saturating_mul(q_i);
            }
            let scaled = prec.saturating_mul(ram);
            if deg_flag.is_none() && scaled > 1200 {
                return Err(usage(format!(
                    "level {lvl} needs a series cap around {scaled}; pass --deg explicitly"
                )));
            }
            (prec, deg_flag.unwrap_or(scaled.max(q_i)))
        }
        Cmd::AfFrobenius
        | Cmd::AfGamma
        | Cmd::Ve
        | Cmd::SolveModp
        | Cmd::Lt4
        | Cmd::Lt5
        | Cmd::Descend => (prec_flag.unwrap_or(8), deg_flag.unwrap_or(9)),
    })
}

fn resolve(cmd: Cmd, flags: &Flags) -> CResult<Run> {
    let cfg: FileConfig = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("--config: cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("--config: {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let p = flags.p.or(cfg.p).ok_or_else(|| usage("--p is required"))?;
    let d = flags.d.or(cfg.d).unwrap_or(1);
    let modulus = match &flags.modulus {
        Some(s) => parse_i64_list("--modulus", s)?
            .into_iter()
            .map(|c| {
                u64::try_from(c).map_err(|_| usage("--modulus: coefficients are nonnegative"))
            })
            .collect::<CResult<Vec<u64>>>()?,
        None => match cfg.modulus {
            Some(m) => m,
            None if d == 1 => vec![0, 1],
            None => return Err(usage("--modulus is required when --d > 1")),
        },
    };
    let eisenstein = match &flags.eisenstein {
        Some(s) => parse_i64_list("--eisenstein", s)?
            .into_iter()
            .map(|c| vec![c])
            .collect(),
        None => cfg
            .eisenstein
            .unwrap_or_else(|| vec![vec![-(p as i64)], vec![1]]),
    };
    let fchoice = flags
        .f
        .clone()
        .or(cfg.f)
        .unwrap_or_else(|| "standard".into());
    let m = flags.m.or(cfg.m);
    let q = (p as i64).checked_pow(d as u32).unwrap_or(i64::MAX) as u64;
    let (prec, deg) = default_sizes(
        cmd,
        q,
        m.unwrap_or(1),
        flags.prec.or(cfg.prec),
        flags.deg.or(cfg.deg),
    )?;
    if deg < 1 {
        return Err(usage("--deg must be at least 1"));
    }
    if prec < 1 {
        return Err(usage("--prec must be at least 1"));
    }
    let window = match &flags.window {
        Some(s) => {
            let v = parse_i64_list("--window", s)?;
            if v.len() != 2 || v[0] > v[1] {
                return Err(usage("--window takes \"lo,hi\" with lo <= hi"));
            }
            (v[0], v[1])
        }
        None => cfg.window.unwrap_or((-8, 24)),
    };
    let level = flags.level.or(cfg.level).unwrap_or(1);
    let a = flags.a.clone().or(cfg.a);
    let u = flags.u.clone().or(cfg.u);
    let seed = flags.seed.or(cfg.seed).unwrap_or(7);

    // one guard digit per series degree, so `prec` digits survive the cap
    let spec = make_local_field(p, d, modulus.clone(), eisenstein.clone(), prec + deg)?;

    let effective = json!({
        "p": p,
        "d": d,
        "modulus": modulus,
        "eisenstein": eisenstein,
        "f": fchoice,
        "prec": prec,
        "deg": deg,
        "window": [window.0, window.1],
        "level": level,
        "a": a,
        "u": u,
        "m": m,
        "seed": seed,
        "input": cfg.input,
    });

    Ok(Run {
        p,
        spec,
        fchoice,
        prec,
        deg,
        window,
        level,
        a,
        u,
        m,
        seed,
        input: cfg.input,
        effective,
    })
}

// ------------------------------------------------------------ field set-up

fn f_coeffs(spec: &Arc<LocalFieldSpec>, choice: &str) -> CResult<Vec<OFElem>> {
    match choice {
        "standard" => Ok(standard_f(spec)),
        "cyclotomic" => Ok(cyclotomic_f(spec)?),
        s => Ok(poly_from_i64(spec, &parse_i64_list("--f", s)?)),
    }
}

fn group(run: &Run) -> CResult<Arc<LTGroup>> {
    let f = f_coeffs(&run.spec, &run.fchoice)?;
    Ok(LTGroup::new(&run.spec, f, run.deg, run.prec)?)
}

/// Ring and operators for the af-* suites: coefficients in the field itself,
/// window wide enough that phi images of seeds stay representable.
fn af_env(run: &Run) -> CResult<(Arc<AFRing>, Arc<AFOperators>)> {
    let g = group(run)?;
    let (ring, ops) = ring_for(run, &run.spec, &g)?;
    Ok((ring, ops))
}

/// Window wide enough that phi images of seeds in [lo, hi] stay usable:
/// phi sends exponent -k to -qk and each mod-varpi^N digit of the inverted
/// leading unit reaches down another q-1 exponents; on the other side each
/// negative power of phi(pi) costs that same span in validity.
fn ring_for(
    run: &Run,
    spec: &Arc<LocalFieldSpec>,
    g: &Arc<LTGroup>,
) -> CResult<(Arc<AFRing>, Arc<AFOperators>)> {
    let q = g.spec.q() as i64;
    let (lo, hi) = run.window;
    let span = q + (run.prec - 1) * (q - 1);
    let floor = q * lo.min(0) - (run.prec - 1) * (q - 1);
    let ceil = q * hi.max(1) + span * (-lo.min(0)) + 16;
    let ring = AFRing::new(spec, &g.spec, run.prec, floor, ceil)?;
    let ops = Arc::new(AFOperators::new(&ring, g));
    Ok((ring, ops))
}

/// Ring and operators for lt5/descend: the formal group lives over the prime
/// base while coefficients live in the (possibly larger) field from the flags.
fn descent_env(run: &Run) -> CResult<(Arc<AFRing>, Arc<AFOperators>)> {
    let base = make_local_field(
        run.p,
        1,
        vec![0, 1],
        vec![vec![-(run.p as i64)], vec![1]],
        run.prec + run.deg,
    )?;
    let f = f_coeffs(&base, &run.fchoice)?;
    let g = LTGroup::new(&base, f, run.deg, run.prec)?;
    ring_for(run, &run.spec, &g)
}

// ------------------------------------------------------------- scalar input

fn rat_from_str(flag: &str, s: &str) -> CResult<Rat> {
    let parse = |t: &str| {
        t.trim()
            .parse::<i64>()
            .map_err(|_| usage(format!("{flag}: `{t}` is not an integer")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let den = parse(d)?;
            if den == 0 {
                return Err(usage(format!("{flag}: zero denominator")));
            }
            Ok(Rat::new(parse(n)?, den))
        }
        None => Ok(Rat::int(parse(s)?)),
    }
}

fn scalar_of(spec: &Arc<LocalFieldSpec>, flag: &str, s: &str) -> CResult<OFElem> {
    let r = rat_from_str(flag, s)?;
    let num = OFElem::from_i64(spec, r.num());
    if r.is_integer() {
        Ok(num)
    } else {
        let den = OFElem::from_i64(spec, r.den());
        Ok(num.mul(&den.invert_in_field()?))
    }
}

fn required<'a>(opt: &'a Option<String>, flag: &str, cmd: &str) -> CResult<&'a str> {
    opt.as_deref()
        .ok_or_else(|| usage(format!("{cmd} requires {flag}")))
}

// --------------------------------------------------------- structured input

fn input_obj<'a>(run: &'a Run, cmd: &str) -> CResult<&'a Value> {
    run.input
        .as_ref()
        .ok_or_else(|| usage(format!("{cmd} reads its input from --config (key \"input\")")))
}

fn field_of<'a>(v: &'a Value, key: &str) -> CResult<&'a Value> {
    v.get(key)
        .ok_or_else(|| usage(format!("--config: input.{key} is missing")))
}

fn parse_rat_value(v: &Value, what: &str) -> CResult<Rat> {
    if let Some(n) = v.as_i64() {
        return Ok(Rat::int(n));
    }
    match v.as_str() {
        Some(s) => rat_from_str(what, s),
        None => Err(usage(format!("--config: {what} is an integer or \"n/d\""))),
    }
}

fn ff_from_value(ff: &FiniteFieldSpec, v: &Value) -> CResult<FFElem> {
    if let Some(n) = v.as_u64() {
        return Ok(ff.from_u64(n));
    }
    let arr = v
        .as_array()
        .ok_or_else(|| usage("--config: residue coefficients are integers or digit arrays"))?;
    let mut c = vec![0u64; ff.d];
    for (i, x) in arr.iter().enumerate() {
        if i >= ff.d {
            return Err(usage("--config: residue digit array longer than the field degree"));
        }
        c[i] = x
            .as_u64()
            .ok_or_else(|| usage("--config: residue digits are nonnegative integers"))?
            % ff.p;
    }
    Ok(FFElem { c })
}

fn of_from_value(spec: &Arc<LocalFieldSpec>, v: &Value) -> CResult<OFElem> {
    if let Some(n) = v.as_i64() {
        return Ok(OFElem::from_i64(spec, n));
    }
    if let Some(s) = v.as_str() {
        return scalar_of(spec, "--config", s);
    }
    Ok(OFElem::from_json(spec, v)?)
}

fn ef_from_value(spec: &Arc<LocalFieldSpec>, v: &Value) -> CResult<EFElem> {
    let o = v
        .as_object()
        .ok_or_else(|| usage("--config: a Laurent element is an object"))?;
    let depth = o.get("depth").and_then(Value::as_u64).unwrap_or(0) as u32;
    let trunc = match o.get("trunc") {
        Some(t) => parse_rat_value(t, "trunc")?,
        None => Rat::int(24),
    };
    let mut x = EFElem::zero(spec, depth, trunc);
    let terms = o
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| usage("--config: element needs a \"terms\" array"))?;
    for t in terms {
        let e = parse_rat_value(field_of(t, "e")?, "term exponent")?;
        let c = ff_from_value(&spec.ff, field_of(t, "c")?)?;
        x.set(e, c)?;
    }
    Ok(x)
}

fn af_from_value(ring: &Arc<AFRing>, v: &Value) -> CResult<AFElem> {
    let o = v
        .as_object()
        .ok_or_else(|| usage("--config: a coefficient-ring element is an object"))?;
    if o.contains_key("coeffs") {
        return Ok(AFElem::from_json(ring, v)?);
    }
    let hi = o.get("hi").and_then(Value::as_i64).unwrap_or(ring.whi);
    let mut x = AFElem::zero(ring).clamp_hi(hi);
    let terms = o
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| usage("--config: element needs \"terms\" ([exponent, value] pairs)"))?;
    for t in terms {
        let pair = t
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| usage("--config: each term is an [exponent, value] pair"))?;
        let e = pair[0]
            .as_i64()
            .ok_or_else(|| usage("--config: term exponents are integers"))?;
        x.set(e, of_from_value(&ring.spec, &pair[1])?)?;
    }
    Ok(x)
}

// ------------------------------------------------------------ pretty output

fn rep_digits(q: u64) -> i64 {
    // largest k with q^k comfortably inside u64
    let mut k = 0i64;
    let mut acc: u64 = 1;
    while acc <= (1u64 << 62) / q {
        acc *= q;
        k += 1;
    }
    k
}

/// Balanced integer representative, for prime unramified fields only.
fn signed_rep(c: &OFElem) -> Option<i64> {
    let spec = &c.spec;
    if spec.d() != 1 || spec.e != 1 {
        return None;
    }
    if c.is_exact_zero() {
        return Some(0);
    }
    if c.shift() < 0 {
        return None;
    }
    let q = spec.q();
    // the digit walk divides once past the last digit it reads, so leave one
    let k = (c.abs_prec().min(spec.prec) - 1).min(rep_digits(q)).max(1);
    let rep = int_rep_mod(c, k as u32).ok()?;
    let modn = q.pow(k as u32);
    Some(if rep > modn / 2 {
        rep as i64 - modn as i64
    } else {
        rep as i64
    })
}

fn push_term(out: &mut String, rep: i64, mono: &str) {
    let mag = rep.unsigned_abs();
    if out.is_empty() {
        if rep < 0 {
            out.push('-');
        }
    } else {
        out.push(if rep < 0 { '-' } else { '+' });
    }
    if mono.is_empty() {
        out.push_str(&mag.to_string());
    } else {
        if mag != 1 {
            out.push_str(&mag.to_string());
        }
        out.push_str(mono);
    }
}

/// Ascending-degree rendering like "9X+30X^3+27X^5+9X^7+X^9"; None when some
/// coefficient has no integer representative.
fn pretty_series(s: &TruncatedSeries) -> Option<String> {
    let mut out = String::new();
    let mut terms = s.sorted_terms();
    // within a total degree, print X before Y
    terms.sort_by(|(ea, _), (eb, _)| {
        let ta: i64 = ea.iter().map(|&x| x as i64).sum();
        let tb: i64 = eb.iter().map(|&x| x as i64).sum();
        ta.cmp(&tb).then(eb.cmp(ea))
    });
    for (e, c) in terms {
        let rep = signed_rep(c)?;
        if rep == 0 {
            continue;
        }
        let mut mono = String::new();
        for (v, k) in s.vars.iter().zip(e.iter()) {
            match k {
                0 => {}
                1 => mono.push_str(v),
                _ => mono.push_str(&format!("{v}^{k}")),
            }
        }
        push_term(&mut out, rep, &mono);
    }
    Some(if out.is_empty() { "0".into() } else { out })
}

/// Descending-degree rendering like "X^2+3".
fn pretty_poly(p: &UnivariatePoly) -> Option<String> {
    let mut out = String::new();
    for i in (0..=p.degree()).rev() {
        let rep = signed_rep(&p.coeff(i as usize))?;
        if rep == 0 {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => "X".into(),
            _ => format!("X^{i}"),
        };
        push_term(&mut out, rep, &mono);
    }
    Some(if out.is_empty() { "0".into() } else { out })
}

fn opt_str(s: Option<String>) -> Value {
    s.map(Value::String).unwrap_or(Value::Null)
}

/// Report JSON with items ordered by check name, so concurrent execution of
/// the underlying checks could never change the bytes we print.
fn report_json_sorted(r: &CheckReport) -> Value {
    let mut v = r.to_json();
    if let Some(items) = v.get_mut("items").and_then(Value::as_array_mut) {
        items.sort_by(|a, b| {
            a["check"]
                .as_str()
                .unwrap_or("")
                .cmp(b["check"].as_str().unwrap_or(""))
        });
    }
    v
}

// ------------------------------------------------------------ seeded suites

fn sample_of(spec: &Arc<LocalFieldSpec>, rng: &mut ChaCha8Rng) -> OFElem {
    let c = rng.gen_range(-999i64..=999);
    let k = rng.gen_range(0..=spec.e as i64);
    OFElem::from_i64(spec, c).mul_varpi_pow(k)
}

fn sample_af(ring: &Arc<AFRing>, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> AFElem {
    let mut x = AFElem::zero(ring).clamp_hi(ring.whi.min(hi + 8));
    for _ in 0..rng.gen_range(3..=7) {
        let e = rng.gen_range(lo..=hi);
        x.set(e, sample_of(&ring.spec, rng))
            .expect("seed exponents stay inside the ring window");
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
        x.set(e, c).expect("seed exponents stay below the truncation");
    }
    if x.is_zero_at_trunc() {
        x.set(Rat::int(0), table[1].clone())
            .expect("constant term is below the truncation");
    }
    x
}

fn suite_af_frobenius(run: &Run) -> CResult<CheckReport> {
    let (ring, ops) = af_env(run)?;
    let count = run.m.unwrap_or(100);
    let (lo, hi) = run.window;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut rep = CheckReport::new("af_frobenius");
    for i in 0..count {
        let x = sample_af(&ring, &mut rng, lo, hi);
        let red = ops.frobenius(&x)?.reduce_mod_varpi();
        let qth = x.reduce_mod_varpi().frobenius();
        rep.record(
            &format!("sample {i:03}: phi reduces to the q-power map"),
            red.same_value(&qth),
            json!({"sample": x.to_json()}),
        );
        // products of nonnegative supports stay inside the window
        let y = sample_af(&ring, &mut rng, 0, hi.max(1));
        let z = sample_af(&ring, &mut rng, 0, hi.max(1));
        let joint = ops.frobenius(&y.mul(&z)?)?;
        let split = ops.frobenius(&y)?.mul(&ops.frobenius(&z)?)?;
        rep.record(
            &format!("sample {i:03}: phi is multiplicative"),
            joint.same_value(&split),
            json!({"left": y.to_json(), "right": z.to_json()}),
        );
    }
    rep.pass_with("samples drawn", json!({"count": count, "seed": run.seed}));
    Ok(rep)
}

fn suite_af_gamma(run: &Run) -> CResult<CheckReport> {
    let (ring, ops) = af_env(run)?;
    let count = run.m.unwrap_or(100);
    let (lo, hi) = run.window;
    let a_str = run.a.clone().unwrap_or_else(|| (run.p + 1).to_string());
    let a = scalar_of(&run.spec, "--a", &a_str)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut rep = CheckReport::new("af_gamma");
    let image = ops.gamma_series(&a)?;
    rep.record(
        "gamma sends pi to a series with linear coefficient a",
        image
            .known_coeff(1)
            .map(|c| c.same_value(&a))
            .unwrap_or(false),
        json!({"a": a_str, "image": image.to_json()}),
    );
    for i in 0..count {
        let x = sample_af(&ring, &mut rng, lo, hi);
        let fg = ops.frobenius(&ops.gamma(&a, &x)?)?;
        let gf = ops.gamma(&a, &ops.frobenius(&x)?)?;
        rep.record(
            &format!("sample {i:03}: phi and gamma commute"),
            fg.same_value(&gf),
            json!({"sample": x.to_json()}),
        );
        let y = sample_af(&ring, &mut rng, 0, hi.max(1));
        let z = sample_af(&ring, &mut rng, 0, hi.max(1));
        let joint = ops.gamma(&a, &y.mul(&z)?)?;
        let split = ops.gamma(&a, &y)?.mul(&ops.gamma(&a, &z)?)?;
        rep.record(
            &format!("sample {i:03}: gamma is multiplicative"),
            joint.same_value(&split),
            json!({"left": y.to_json(), "right": z.to_json()}),
        );
    }
    rep.pass_with("samples drawn", json!({"count": count, "seed": run.seed, "a": a_str}));
    Ok(rep)
}

fn suite_ve(run: &Run) -> CResult<CheckReport> {
    let spec = &run.spec;
    let count = run.m.unwrap_or(100);
    let q = spec.q() as i64;
    let table = spec.ff.enumerate();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut rep = CheckReport::new("ve");
    let pibar = EFElem::pi(spec, 0, Rat::int(2));
    rep.record(
        "v_E sends pibar to q/(q-1)",
        pibar.v_e().map(|v| v == Rat::new(q, q - 1)).unwrap_or(false),
        json!({"q": q}),
    );
    for i in 0..count {
        // exponent sums stay inside one perfection depth
        let depth = rng.gen_range(0..=2u32);
        let x = sample_ef(spec, &table, &mut rng, depth);
        let y = sample_ef(spec, &table, &mut rng, depth);
        let (vx, vy) = (x.v_e()?, y.v_e()?);
        let vxy = x.mul(&y).v_e()?;
        rep.record(
            &format!("sample {i:03}: v_E is additive on products"),
            vxy == vx + vy,
            json!({"left": x.to_json(), "right": y.to_json(), "got": vxy.to_string()}),
        );
        let vfx = x.frobenius().v_e()?;
        rep.record(
            &format!("sample {i:03}: frobenius scales v_E by q"),
            vfx == vx * q,
            json!({"sample": x.to_json(), "got": vfx.to_string()}),
        );
    }
    rep.pass_with("samples drawn", json!({"count": count, "seed": run.seed}));
    Ok(rep)
}

// ----------------------------------------------------------------- dispatch

fn series_out(extra: &[(&str, Value)], s: &TruncatedSeries) -> Value {
    let mut s = s.clone();
    if s.vars.len() == 1 {
        s.vars[0] = "X".into();
    }
    let mut o = serde_json::Map::new();
    for (k, v) in extra {
        o.insert((*k).into(), v.clone());
    }
    o.insert("series".into(), s.to_json());
    o.insert("pretty".into(), opt_str(pretty_series(&s)));
    Value::Object(o)
}

fn dispatch(cmd: Cmd, run: &Run) -> CResult<(Value, bool)> {
    match cmd {
        Cmd::GroupLaw => {
            let g = group(run)?;
            Ok((series_out(&[], &g.group_law()?), true))
        }
        Cmd::Endo => {
            let a_str = required(&run.a, "--a", "endo")?;
            let g = group(run)?;
            let a = scalar_of(&run.spec, "--a", a_str)?;
            let s = g.endo(&a)?;
            Ok((series_out(&[("a", json!(a_str))], &s), true))
        }
        Cmd::Iterate => {
            let m = run.m.unwrap_or(1);
            let g = group(run)?;
            let s = g.iterate(m)?;
            Ok((series_out(&[("m", json!(m))], &s), true))
        }
        Cmd::VerifyAxioms => {
            let samples = match &run.a {
                Some(s) => parse_i64_list("--a", s)?,
                None => vec![2, 3, 5, -1],
            };
            let g = group(run)?;
            let rep = g.verify_axioms(&samples)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::Iso => {
            let to = group(run)?;
            let from = LTGroup::new(&run.spec, standard_f(&run.spec), run.deg, run.prec)?;
            let s = lt_isomorphism(&from, &to)?;
            Ok((
                series_out(
                    &[("from", json!("standard")), ("to", json!(run.fchoice))],
                    &s,
                ),
                true,
            ))
        }
        Cmd::Eisenstein => {
            let m = run.m.unwrap_or(1);
            let g = group(run)?;
            let step = eisenstein_step(&g, m)?;
            let phi = pretty_poly(&step.tower.minpoly)
                .unwrap_or_else(|| format!("{:?}", step.tower.minpoly));
            Ok((
                json!({"Phi": phi, "eisenstein": step.report.passed}),
                step.report.passed,
            ))
        }
        Cmd::TorsionCheck => {
            let m = run.m.unwrap_or(1);
            let g = group(run)?;
            let rep = torsion_check(&g, m)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::Galois => {
            let m = run.m.unwrap_or(1);
            let a_str = required(&run.a, "--a", "galois")?;
            let g = group(run)?;
            let a = scalar_of(&run.spec, "--a", a_str)?;
            let step = eisenstein_step(&g, m)?;
            let image = galois_apply(&g, &step.tower, &a, &step.tower.gen())?;
            Ok((
                json!({"m": m, "a": a_str, "image": image.to_json()}),
                true,
            ))
        }
        Cmd::Norm => {
            let m = run.m.unwrap_or(1);
            let g = group(run)?;
            let step = eisenstein_step(&g, m)?;
            let n = norm_to_base(&step.tower.gen())?;
            Ok((
                json!({
                    "m": m,
                    "norm": n.to_json(),
                    "pretty": opt_str(signed_rep(&n).map(|r| r.to_string())),
                }),
                true,
            ))
        }
        Cmd::Reciprocity => {
            let m = run.m.unwrap_or(1);
            let u_str = required(&run.u, "--u", "reciprocity")?;
            let g = group(run)?;
            let u = scalar_of(&run.spec, "--u", u_str)?;
            let rep = reciprocity_conjugacy(&g, m, &u)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::AfFrobenius => {
            let rep = suite_af_frobenius(run)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::AfGamma => {
            let rep = suite_af_gamma(run)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::Ve => {
            let rep = suite_ve(run)?;
            Ok((report_json_sorted(&rep), rep.passed))
        }
        Cmd::SolveModp => {
            let inp = input_obj(run, "solve-modp")?;
            let a = ef_from_value(&run.spec, field_of(inp, "a")?)?;
            let out = match solve_phi_fixed_modp(&a)? {
                ModpSolution::Line { basis } => {
                    json!({"kind": "line", "basis": basis.to_json()})
                }
                ModpSolution::Extension(step) => {
                    json!({"kind": "extension", "step": step.to_json()})
                }
            };
            Ok((out, true))
        }
        Cmd::Lt4 => {
            let inp = input_obj(run, "lt4")?;
            let form = field_of(inp, "form")?
                .as_str()
                .ok_or_else(|| usage("--config: input.form is a string"))?;
            let elem = ef_from_value(&run.spec, field_of(inp, "elem")?)?;
            let outcome = match form {
                "multiplicative" => lt4_multiplicative(&elem)?,
                "additive" => lt4_additive(&elem)?,
                other => {
                    return Err(usage(format!(
                        "--config: input.form is \"multiplicative\" or \"additive\", got `{other}`"
                    )))
                }
            };
            let out = match outcome {
                Lt4Outcome::Solved { x, kernel } => {
                    json!({"kind": "solved", "kernel": kernel, "x": x.to_json()})
                }
                Lt4Outcome::Extension { step, kernel } => {
                    json!({"kind": "extension", "kernel": kernel, "step": step.to_json()})
                }
            };
            Ok((out, true))
        }
        Cmd::Lt5 => {
            let inp = input_obj(run, "lt5")?;
            let (ring, ops) = descent_env(run)?;
            let beta = af_from_value(&ring, field_of(inp, "beta")?)?;
            let w = lemma_lt5_descent(&ops, &beta)?;
            Ok((
                json!({
                    "alpha": w.alpha.to_json(),
                    "beta0": w.beta0.to_json(),
                    "transcript": w.transcript,
                }),
                true,
            ))
        }
        Cmd::Descend => {
            let inp = input_obj(run, "descend")?;
            let (ring, ops) = descent_env(run)?;
            let order = field_of(inp, "order")?
                .as_u64()
                .ok_or_else(|| usage("--config: input.order is a positive integer"))?;
            let ch = field_of(inp, "character")?;
            let level = ch
                .get("level")
                .and_then(Value::as_u64)
                .map(|l| l as u32)
                .unwrap_or(run.level);
            let pi_value = of_from_value(&run.spec, field_of(ch, "pi_value")?)?;
            let units = field_of(ch, "unit_values")?
                .as_object()
                .ok_or_else(|| usage("--config: character.unit_values is an object"))?;
            let mut gens = Vec::new();
            for (k, v) in units {
                let a: i64 = k
                    .parse()
                    .map_err(|_| usage("--config: unit_values keys are integers"))?;
                gens.push((a, of_from_value(&run.spec, v)?));
            }
            let eta =
                CharacterEta::from_generator_values(&run.spec, run.p, level, pi_value, &gens)?;
            let zv = field_of(inp, "zeta")?;
            let zeta = ZetaData::new(
                of_from_value(&run.spec, field_of(zv, "value")?)?,
                field_of(zv, "order")?
                    .as_u64()
                    .ok_or_else(|| usage("--config: zeta.order is a positive integer"))?,
                run.p,
            )?;
            let beta = match inp.get("beta") {
                Some(v) => af_from_value(&ring, v)?,
                None => AFElem::one(&ring),
            };
            let mut module = rank1_module(&ops, &eta)?;
            if let Some(w) = inp.get("twist") {
                module = twist_presentation(&module, &af_from_value(&ring, w)?)?;
            }
            let res = character_descent(&module, order, &beta, &zeta)?;
            Ok((
                json!({
                    "certified": res.certified,
                    "eta": res.eta.to_json(),
                    "twist": res.twist.to_json(),
                    "report": res.report.to_json(),
                    "transcript": res.transcript,
                }),
                res.report.passed,
            ))
        }
    }
}

// --------------------------------------------------------------------- main

fn write_transcript(path: &PathBuf, argv: &[String], config: &Value, output: &Value, code: i32) {
    let t = json!({"argv": argv, "config": config, "exit": code, "output": output});
    if let Err(e) = fs::write(path, t.to_string()) {
        eprintln!("error: --out: cannot write {}: {e}", path.display());
        exit(2);
    }
}

fn main() {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let run = match resolve(cli.cmd, &cli.flags) {
        Ok(r) => r,
        Err(CliErr::Usage(m)) => {
            eprintln!("error: {m}");
            exit(2);
        }
        Err(CliErr::Lt(e)) => {
            let out = json!({"error": e.to_string()});
            println!("{out}");
            if let Some(path) = &cli.flags.out {
                write_transcript(path, &argv, &Value::Null, &out, 1);
            }
            exit(1);
        }
    };
    match dispatch(cli.cmd, &run) {
        Ok((out, passed)) => {
            let code = if passed { 0 } else { 1 };
            println!("{out}");
            if let Some(path) = &cli.flags.out {
                write_transcript(path, &argv, &run.effective, &out, code);
            }
            exit(code);
        }
        Err(CliErr::Usage(m)) => {
            eprintln!("error: {m}");
            exit(2);
        }
        Err(CliErr::Lt(e)) => {
            let out = json!({"error": e.to_string()});
            println!("{out}");
            if let Some(path) = &cli.flags.out {
                write_transcript(path, &argv, &run.effective, &out, 1);
            }
            exit(1);
        }
    }
}
