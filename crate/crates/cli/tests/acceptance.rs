//! Acceptance run: one PASS/FAIL line per criterion. All checks are exact
//! (rational arithmetic), so the only tolerances are the wall-clock limits.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lieinfty::buildq::{
    bq_builtin, bq_correct_arity1, bq_extend, bq_extend_morphism, bq_universal, check_regular_sequence,
    inclusion_chain_map, order2_quadra, subsets, Builtin,
};
use lieinfty::foliation::{vf_bracket, Foliation};
use lieinfty::graded::{commutator, FMono, GDerivation, GPoly, GRing};
use lieinfty::groebner::{combine, gb_compute, gb_normal_form, mod_syzygies, Column, Lifter};
use lieinfty::isotropy::{
    iso_ce_class_vanishes, iso_cohomology_dims, iso_linfty, iso_minimal_rank_verdict, iso_nmrla_cocycle,
    minimal_rank_at, ClassVerdict, IsotropyLinfty,
};
use lieinfty::linalg::QMatrix;
use lieinfty::poly::{binomial, default_names, q, Mono, MonomialOrder, Poly, Q};
use lieinfty::qfield::{
    basis_tuples, brackets_from_q, bt_verify_jacobi, derived_bracket, q_from_brackets, q_verify_homological,
    q_verify_morphism, AnchoredQ, BracketTable, Section, Verdict,
};
use lieinfty::resolution::{chain_map_squares, res_build, res_chain_map, res_euler, GeomResolution};
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const ORD: MonomialOrder = MonomialOrder::DegRevLex;

type Check = Result<String, String>;
type Suite<'a> = (&'static str, Box<dyn Fn() -> Result<(), String> + 'a>);
/// Id, title, time limit in seconds, check.
type Criterion = (&'static str, &'static str, Option<u64>, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn zeros(n: usize) -> Vec<Q> {
    vec![Q::zero(); n]
}

fn consts(v: &[(usize, i64)]) -> BTreeMap<usize, Q> {
    v.iter().map(|&(i, c)| (i, q(c))).collect()
}

fn sl2_foliation() -> Foliation {
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let z = Poly::zero(2);
    Foliation::new(names(&["x", "y"]), vec![vec![x.clone(), -&y], vec![z.clone(), x], vec![y, z]]).unwrap()
}

/// Fields `x_k d_u` in the order `k * n + u`.
fn origin_foliation(n: usize) -> Foliation {
    let mut gens = Vec::new();
    for k in 0..n {
        for u in 0..n {
            let mut col = vec![Poly::zero(n); n];
            col[u] = Poly::var(n, k);
            gens.push(col);
        }
    }
    Foliation::new(default_names(n), gens).unwrap()
}

fn cubic(n: usize) -> Builtin {
    let phi = Poly::from_terms(
        n,
        (0..n).map(|i| {
            let mut e = vec![0; n];
            e[i] = 3;
            (Mono(e), q(1))
        }),
    );
    let var_names = if n == 4 { names(&["x", "y", "z", "t"]) } else { default_names(n) };
    Builtin::Koszul { var_names, phi }
}

fn homological(aq: &AnchoredQ) -> Result<(), String> {
    let top = aq.length() as i64 + 1;
    let rep = q_verify_homological(aq, top);
    if let Some((k, v)) = rep.first_failure() {
        return Err(format!("[Q,Q] != 0 at arity {k}: {v:?}"));
    }
    Ok(())
}

/// Isotropy representatives must be the standard fiber basis so that ids
/// can be compared with the resolution's.
fn standard_basis(iso: &IsotropyLinfty) -> Result<(), String> {
    for (l, vs) in iso.basis.iter().enumerate() {
        for (a, v) in vs.iter().enumerate() {
            let ok = v.iter().enumerate().all(|(b, c)| if a == b { c.is_one() } else { c.is_zero() });
            ensure!(ok && v.len() == vs.len(), "isotropy basis at level {} is not the standard one", l + 1);
        }
    }
    Ok(())
}

fn id_by_name(iso: &IsotropyLinfty, name: &str) -> Result<usize, String> {
    (0..iso.ring().ngens()).find(|&i| iso.name(i) == name).ok_or_else(|| format!("no isotropy generator {name}"))
}

// --- 1 ----------------------------------------------------------------------------

fn sl2_isotropy(aq: &AnchoredQ) -> Result<(), String> {
    let iso = ok(iso_linfty(aq, &zeros(2)), "isotropy")?;
    ensure!(iso.dims == [(-2, 1), (-1, 3)].into_iter().collect(), "dims {:?}", iso.dims);
    standard_basis(&iso)?;
    let r = iso.ring();
    let (h, e, f) = (r.id(1, 0), r.id(1, 1), r.id(1, 2));
    for (key, want) in [([h, e], consts(&[(e, 2)])), ([h, f], consts(&[(f, -2)])), ([e, f], consts(&[(h, 1)]))] {
        let got = iso.bracket(&key);
        ensure!(got == want, "{} (expected {:?})", iso.fmt_bracket(&key, &got), want);
    }
    for k in 3..=4 {
        ensure!(iso.arity_is_zero(k), "isotropy {k}-ary bracket nonzero");
    }
    let ce = ok(iso_nmrla_cocycle(&iso), "cocycle")?;
    ensure!(iso_ce_class_vanishes(&ce).vanishes(), "NMRLA class does not vanish");
    Ok(())
}

fn criterion_sl2() -> Check {
    let f = sl2_foliation();
    let res = ok(res_build(&f, 8, ORD), "resolution")?.resolution;
    ensure!(res.ranks() == vec![3, 1], "ranks {:?}", res.ranks());
    // the single relation is a nonzero rational multiple of (xy, y^2, -x^2)
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let rel = [&x * &y, &y * &y, -&(&x * &x)];
    let col = &res.d(2)[0];
    let (m, c) = col[0].leading(ORD).ok_or("relation has zero h-component")?;
    let lambda = c / rel[0].coeff(m);
    ensure!(col.iter().zip(&rel).all(|(a, b)| *a == b.scale(&lambda)), "relation {:?} not proportional", col);
    ensure!(res_euler(&res) == 2, "euler rank {}", res_euler(&res));

    let aq = ok(bq_universal(&res, &f, ORD), "construction")?;
    homological(&aq)?;
    ensure!(aq.max_arity() <= 1, "Q has a component of arity {}", aq.max_arity());
    let bt = brackets_from_q(&aq);
    let r = aq.ring.id(2, 0);
    for a in aq.ring.level_ids(1) {
        ensure!(bt.basis(&[a, r]).is_empty(), "{{{}, r}} != 0", aq.ring.gens[a].name);
    }
    sl2_isotropy(&aq)?;
    sl2_isotropy(&ok(bq_builtin(&Builtin::Sl2, ORD), "builtin")?.q)?;
    Ok(format!("relation = {lambda} * (xy, y^2, -x^2); constructed and builtin isotropy agree"))
}

// --- 2 ----------------------------------------------------------------------------

fn criterion_koszul() -> Check {
    let b = cubic(4);
    let Builtin::Koszul { var_names, phi } = &b else { unreachable!() };
    ok(check_regular_sequence(var_names, phi, ORD), "regular sequence")?;
    let s = ok(bq_builtin(&b, ORD), "builtin")?;
    ensure!(s.resolution.ranks() == vec![6, 4, 1], "ranks {:?}", s.resolution.ranks());
    ensure!(res_euler(&s.resolution) == 3, "euler rank {}", res_euler(&s.resolution));
    let rep = q_verify_homological(&s.q, 3);
    ensure!(rep.passed() && rep.arities.len() == 4, "homological 0..3: {:?}", rep.first_failure());
    homological(&s.q)?;

    let zero = zeros(4);
    let iso = ok(iso_linfty(&s.q, &zero), "isotropy")?;
    let want: BTreeMap<i64, usize> = (1..=3).map(|i| (-(i as i64), binomial(4, i + 1))).collect();
    ensure!(iso.dims == want, "dims {:?}", iso.dims);
    standard_basis(&iso)?;
    ensure!(iso.arity_is_zero(2), "2-ary isotropy bracket nonzero");
    let ids: Vec<usize> = ["d12", "d13", "d14"].iter().map(|n| id_by_name(&iso, n)).collect::<Result<_, _>>()?;
    let d234 = id_by_name(&iso, "d234")?;
    let c = iso.bracket(&ids);
    // frozen: the corrected sign convention gives +6
    ensure!(c == consts(&[(d234, 6)]), "{}", iso.fmt_bracket(&ids, &c));
    // second route: literal derived bracket of Q evaluated at the origin
    let derived: BTreeMap<usize, Q> =
        derived_bracket(&s.q, &ids).into_iter().map(|(k, p)| (k, p.eval(&zero))).filter(|(_, v)| !v.is_zero()).collect();
    ensure!(derived == c, "derived bracket {:?} differs from the isotropy table", derived);

    let ce = ok(iso_nmrla_cocycle(&iso), "cocycle")?;
    ensure!(!ce.cocycle_is_zero(), "3-ary cocycle is zero");
    let class = iso_ce_class_vanishes(&ce);
    let ClassVerdict::NotExact { pairing, .. } = &class else { return Err("class vanishes".into()) };
    ensure!(!pairing.is_zero(), "certificate pairs to zero");
    let v = iso_minimal_rank_verdict(&ok(minimal_rank_at(&s.resolution, &zero), "minimal ranks")?, &class);
    ensure!(v.rank == 6 && v.statement.contains("no Lie algebroid of rank 6"), "verdict {:?}", v);
    Ok(format!("c(d12,d13,d14) = 6*d234; certificate pairing {pairing}; \"{}\"", v.statement))
}

// --- 3 ----------------------------------------------------------------------------

/// Basis section `dx_I (x) d_c` of `wedge^i V* (x) V` by sorted `I`.
fn origin_index(n: usize, form: &[usize], c: usize) -> usize {
    subsets(n, form.len()).iter().position(|s| s == form).unwrap() * n + c
}

/// Sorts `v` and returns the sign, or `None` on a repeated index.
fn sort_sign(mut v: Vec<usize>) -> Option<(Vec<usize>, i64)> {
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// Lie derivative of `dx_I (x) d_c` along `x_a d_b`.
fn lie_derivative(n: usize, a: usize, b: usize, form: &[usize], c: usize) -> BTreeMap<usize, Q> {
    let mut out: BTreeMap<usize, Q> = BTreeMap::new();
    let mut add = |idx: usize, v: i64| {
        let e = out.entry(idx).or_insert_with(Q::zero);
        *e += q(v);
        if e.is_zero() {
            out.remove(&idx);
        }
    };
    // L dx_k = delta_{bk} dx_a
    for (t, &k) in form.iter().enumerate() {
        if k == b {
            let mut g = form.to_vec();
            g[t] = a;
            if let Some((g, s)) = sort_sign(g) {
                add(origin_index(n, &g, c), s);
            }
        }
    }
    // [x_a d_b, d_c] = -delta_{ac} d_b
    if a == c {
        add(origin_index(n, form, b), -1);
    }
    out
}

fn criterion_origin() -> Check {
    for n in [2, 3] {
        let s = ok(bq_builtin(&Builtin::Origin(n), ORD), "builtin")?;
        let want: Vec<usize> = (1..=n).map(|i| n * binomial(n, i)).collect();
        ensure!(s.resolution.ranks() == want, "n={n}: ranks {:?}", s.resolution.ranks());
        homological(&s.q)?;
        let bt = brackets_from_q(&s.q);
        ensure!(bt.brackets.keys().all(|k| k.len() <= 2), "n={n}: bracket of arity >= 3");
        ensure!(res_euler(&s.resolution) == n as i64, "n={n}: euler rank {}", res_euler(&s.resolution));

        let iso = ok(iso_linfty(&s.q, &zeros(n)), "isotropy")?;
        let dims: BTreeMap<i64, usize> = (1..=n).map(|i| (-(i as i64), want[i - 1])).collect();
        ensure!(iso.dims == dims, "n={n}: dims {:?}", iso.dims);
        standard_basis(&iso)?;
        for k in 3..=n + 2 {
            ensure!(iso.arity_is_zero(k), "n={n}: isotropy {k}-ary bracket nonzero");
        }
        ensure!(bt_verify_jacobi(&iso.table, n + 2).passed(), "n={n}: isotropy fails Jacobi");
        // degree -1 acts on every level by the Lie derivative of linear fields
        let r = iso.ring();
        for (a, b) in (0..n).flat_map(|a| (0..n).map(move |b| (a, b))) {
            let x = r.id(1, a * n + b);
            for level in 1..=n {
                for form in subsets(n, level) {
                    for c in 0..n {
                        let y = r.id(level, origin_index(n, &form, c));
                        let want: BTreeMap<usize, Q> = lie_derivative(n, a, b, &form, c)
                            .into_iter()
                            .map(|(i, v)| (r.id(level, i), v))
                            .collect();
                        let got = iso.bracket(&[x, y]);
                        ensure!(got == want, "n={n}: {} (expected {:?})", iso.fmt_bracket(&[x, y], &got), want);
                    }
                }
            }
        }
    }
    Ok("gl(V) acts by Lie derivative on every level; Jacobi holds; arity >= 3 vanishes".into())
}

// --- 4 ----------------------------------------------------------------------------

fn criterion_order2() -> Check {
    let s = ok(bq_builtin(&Builtin::Order2, ORD), "builtin")?;
    let res = &s.resolution;
    ensure!(res.ranks() == vec![6, 4], "ranks {:?}", res.ranks());
    // rho_0 = quadratic monomials (x) V, delta(F, G) = (yF, -xF - yG, xG)
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let z = Poly::zero(2);
    let quads = [&x * &x, &x * &y, &y * &y];
    let delta = [[y.clone(), -&x, z.clone()], [z.clone(), -&y, x.clone()]];
    for (a, qa) in quads.iter().enumerate() {
        for u in 0..2 {
            let mut col = vec![z.clone(); 2];
            col[u] = qa.clone();
            ensure!(res.anchor[a * 2 + u] == col, "anchor column {}", a * 2 + u);
        }
    }
    for (g, dg) in delta.iter().enumerate() {
        for u in 0..2 {
            let mut col = vec![z.clone(); 6];
            for (a, p) in dg.iter().enumerate() {
                col[a * 2 + u] = p.clone();
            }
            ensure!(res.d(2)[g * 2 + u] == col, "delta column {}", g * 2 + u);
        }
    }

    let cand = ok(order2_quadra(res), "2-ary candidate")?;
    let rep = q_verify_homological(&cand, 3);
    let residue = match rep.verdict(2) {
        Some(Verdict::Fail { location, residue }) if residue != "0" => format!("nonzero on {location}"),
        other => return Err(format!("candidate at arity 2: {other:?}")),
    };
    let q01 = ok(bq_correct_arity1(res, &cand, ORD), "arity-1 correction")?;
    let fin = ok(bq_extend(res, &q01, ORD), "extension")?;
    ensure!(fin == s.q, "builtin differs from the staged construction");
    homological(&fin)?;
    let bt = brackets_from_q(&fin);
    let three: Vec<&Section> = bt.brackets.iter().filter(|(k, _)| k.len() == 3).map(|(_, v)| v).collect();
    ensure!(!three.is_empty(), "no 3-ary bracket");
    let origin = zeros(2);
    ensure!(three.iter().all(|s| s.values().all(|p| p.eval(&origin).is_zero())), "3-ary bracket nonzero at 0");

    let iso = ok(iso_linfty(&fin, &origin), "isotropy")?;
    ensure!(iso.table.brackets.is_empty(), "isotropy brackets nonzero");
    // fiber oracle: H^-1 = ker rho(0) / im d(0), H^-2 = ker d(0)
    let eval = |cols: &[Column], rows: usize| {
        QMatrix::from_rows((0..rows).map(|i| cols.iter().map(|c| c[i].eval(&origin)).collect()).collect())
    };
    let (r1, r2) = (eval(&res.anchor, 2).rank(), eval(res.d(2), 6).rank());
    let oracle: BTreeMap<i64, usize> = [(-1, 6 - r1 - r2), (-2, 4 - r2)].into_iter().collect();
    ensure!(iso.dims == oracle, "isotropy dims {:?}, fiber oracle {:?}", iso.dims, oracle);
    ensure!(ok(iso_cohomology_dims(res, &origin), "dims")? == oracle, "cohomology dims disagree");
    Ok(format!("candidate residue at arity 2 ({residue}); {} 3-ary brackets vanish at 0; dim H^-2 = {} from the fiber oracle", three.len(), oracle[&-2]))
}

// --- 5 ----------------------------------------------------------------------------

fn poly(n: usize, max_deg: u32, max_terms: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, n), -3i64..=3), 0..=max_terms).prop_map(move |ts| {
        Poly::from_terms(n, ts.into_iter().filter(|(e, _)| e.iter().sum::<u32>() <= max_deg).map(|(e, c)| (Mono(e), q(c))))
    })
}

fn column(rank: usize) -> impl Strategy<Value = Column> {
    prop::collection::vec(poly(2, 2, 3), rank)
}

fn run<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(Config { cases, ..Config::default() }, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    runner.run(&s, f).map_err(|e| e.to_string())
}

fn suite_groebner() -> Result<(), String> {
    let s = (prop::collection::vec(column(2), 1..=3), prop::collection::vec(poly(2, 1, 2), 3), column(2), any::<bool>());
    run(100, s, |(gens, coeffs, noise, add_noise)| {
        prop_assume!(gens.iter().all(|c| c.iter().any(|p| !p.is_zero())));
        let mut v = combine(&coeffs[..gens.len()], &gens, 2, 2);
        if add_noise {
            v = v.iter().zip(&noise).map(|(a, b)| a + b).collect();
        }
        let gb = gb_compute(&gens, 2, 2, ORD, false).unwrap();
        let in_module = gb_normal_form(&v, &gb).iter().all(|p| p.is_zero());
        match Lifter::new(&gens, 2, 2, ORD).unwrap().lift(&v) {
            Ok(a) => prop_assert!(in_module && combine(&a, &gens, 2, 2) == v),
            Err(_) => prop_assert!(add_noise && !in_module),
        }
        for syz in mod_syzygies(&gens, 2, 2, ORD).unwrap() {
            prop_assert!(combine(&syz, &gens, 2, 2).iter().all(|p| p.is_zero()));
        }
        Ok(())
    })
}

fn random_derivation(r: &GRing, deg: i64, coeffs: &[Poly]) -> GDerivation {
    let mut monos: BTreeMap<i64, Vec<Vec<usize>>> = BTreeMap::new();
    monos.entry(0).or_default().push(Vec::new());
    for k in 1..=3 {
        for ids in basis_tuples(r, k) {
            monos.entry(ids.iter().map(|&g| r.degree(g)).sum()).or_default().push(ids);
        }
    }
    let mut it = coeffs.iter();
    let mut part = |d: i64| {
        let mut p: GPoly = r.zero();
        for ids in monos.get(&d).into_iter().flatten().take(2) {
            if let Some(c) = it.next() {
                p.add_term(FMono(ids.clone()), c.clone());
            }
        }
        p
    };
    let mut w = GDerivation::zero(r, deg);
    for v in w.on_vars.iter_mut() {
        *v = part(deg);
    }
    for g in 0..r.ngens() {
        w.on_gens[g] = part(r.degree(g) + deg);
    }
    w
}

fn suite_graded() -> Result<(), String> {
    let r = GRing::new(names(&["x", "y"]), &[2, 1]);
    let cs = || prop::collection::vec(poly(2, 1, 2), 12);
    run(40, ((-1i64..=1, -1i64..=1, -1i64..=1), cs(), cs(), cs()), |(d, c1, c2, c3)| {
        let (a, b, c) = (random_derivation(&r, d.0, &c1), random_derivation(&r, d.1, &c2), random_derivation(&r, d.2, &c3));
        let sign = |x: i64, y: i64| if (x * y).rem_euclid(2) == 1 { q(-1) } else { q(1) };
        let eq = |u: &GDerivation, v: &GDerivation| u.on_vars == v.on_vars && u.on_gens == v.on_gens;
        prop_assert!(eq(&commutator(&r, &a, &b), &commutator(&r, &b, &a).scale(&-sign(a.degree, b.degree))));
        let lhs = commutator(&r, &a, &commutator(&r, &b, &c));
        let rhs = commutator(&r, &commutator(&r, &a, &b), &c).add(&commutator(&r, &b, &commutator(&r, &a, &c)).scale(&sign(a.degree, b.degree)));
        prop_assert!(eq(&lhs, &rhs));
        Ok(())
    })
}

fn suite_two_resolutions() -> Result<(), String> {
    for n in [2, 3] {
        let builtin = ok(bq_builtin(&Builtin::Origin(n), ORD), "builtin")?.resolution;
        let built = ok(res_build(&origin_foliation(n), 2 * n + 4, ORD), "resolution")?.resolution;
        ensure!(res_euler(&built) == res_euler(&builtin), "n={n}: euler {} vs {}", res_euler(&built), res_euler(&builtin));
        for (src, dst) in [(&built, &builtin), (&builtin, &built)] {
            let phi = ok(res_chain_map(src, dst, ORD), "chain map")?;
            ensure!(chain_map_squares(src, dst, &phi), "n={n}: squares do not commute");
        }
    }
    Ok(())
}

fn anchor_is_a_morphism(bt: &BracketTable) -> bool {
    let ring = &bt.ring;
    ring.level_ids(1).all(|a| {
        ring.level_ids(1).all(|b| {
            bt.anchor_section(&bt.basis(&[a, b]))
                == vf_bracket(&bt.anchor[ring.gens[a].index], &bt.anchor[ring.gens[b].index])
        })
    })
}

fn constructed() -> Result<Vec<(String, AnchoredQ)>, String> {
    let mut out = Vec::new();
    for b in [Builtin::Sl2, Builtin::Origin(2), Builtin::Origin(3), Builtin::Order2, cubic(3), cubic(4)] {
        let s = ok(bq_builtin(&b, ORD), "builtin")?;
        if !matches!(b, Builtin::Origin(3)) && b != cubic(4) {
            out.push((format!("universal on {}", b.label()), ok(bq_universal(&s.resolution, &s.foliation, ORD), "universal")?));
        }
        out.push((b.label(), s.q));
    }
    let f = sl2_foliation();
    let res = ok(res_build(&f, 8, ORD), "resolution")?.resolution;
    out.push(("sl2 from generators".into(), ok(bq_universal(&res, &f, ORD), "universal")?));
    Ok(out)
}

fn suite_anchor(structures: &[(String, AnchoredQ)]) -> Result<(), String> {
    for (name, aq) in structures {
        ensure!(anchor_is_a_morphism(&brackets_from_q(aq)), "{name}: rho is not a morphism");
    }
    Ok(())
}

fn sl2_perturbed(vals: &[Vec<Poly>]) -> BracketTable {
    let base = brackets_from_q(&bq_builtin(&Builtin::Sl2, ORD).unwrap().q);
    let mut bt = base.clone();
    let ring = bt.ring.clone();
    let keys = basis_tuples(&ring, 2).into_iter().filter(|k| k.iter().all(|&g| ring.gens[g].level == 1));
    for (key, v) in keys.zip(vals) {
        let mut s = base.basis(&key);
        for (idx, p) in v.iter().enumerate() {
            let e = s.entry(ring.id(1, idx)).or_insert_with(|| Poly::zero(2));
            *e = &*e + p;
        }
        s.retain(|_, p| !p.is_zero());
        bt.set(&key, s);
    }
    bt
}

fn suite_agreement(structures: &[(String, AnchoredQ)]) -> Result<(), String> {
    let agree = |aq: &AnchoredQ, bt: &BracketTable| {
        let d = aq.length();
        bt_verify_jacobi(bt, d + 2).verdicts() == q_verify_homological(aq, d as i64 + 1).verdicts()
    };
    for (name, aq) in structures {
        ensure!(agree(aq, &brackets_from_q(aq)), "{name}: verdicts disagree");
    }
    let s = ok(bq_builtin(&Builtin::Order2, ORD), "builtin")?;
    let cand = ok(order2_quadra(&s.resolution), "candidate")?;
    ensure!(agree(&cand, &brackets_from_q(&cand)), "order2 candidate: verdicts disagree");
    let res = bq_builtin(&Builtin::Sl2, ORD).unwrap().resolution;
    let vals = prop::collection::vec(prop::collection::vec(poly(2, 0, 1), 3), 3);
    run(30, vals, |vals| {
        let bt = sl2_perturbed(&vals);
        let aq = q_from_brackets(&bt, &res).unwrap();
        prop_assert!(agree(&aq, &bt));
        Ok(())
    })
}

fn suite_isotropy_constancy() -> Result<(), String> {
    let f = sl2_foliation();
    let mut found = Vec::new();
    for order in [MonomialOrder::DegRevLex, MonomialOrder::Lex] {
        let res = ok(res_build(&f, 8, order), "resolution")?.resolution;
        found.push(ok(bq_universal(&res, &f, order), "universal")?);
    }
    found.push(ok(bq_builtin(&Builtin::Sl2, ORD), "builtin")?.q);
    let tables: Vec<_> = found
        .iter()
        .map(|aq| iso_linfty(aq, &zeros(2)).map(|iso| (standard_basis(&iso), iso.constants(2))))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for (b, _) in &tables {
        b.clone()?;
    }
    ensure!(tables.windows(2).all(|w| w[0].1 == w[1].1), "isotropy 2-brackets differ");
    Ok(())
}

fn criterion_properties() -> Check {
    let structures = constructed()?;
    let suites: [Suite; 6] = [
        ("a", Box::new(suite_groebner)),
        ("b", Box::new(suite_graded)),
        ("c", Box::new(suite_two_resolutions)),
        ("d", Box::new(|| suite_anchor(&structures))),
        ("e", Box::new(|| suite_agreement(&structures))),
        ("f", Box::new(suite_isotropy_constancy)),
    ];
    let mut fails = Vec::new();
    for (tag, f) in &suites {
        if let Err(e) = f() {
            fails.push(format!("({tag}) {e}"));
        }
    }
    ensure!(fails.is_empty(), "{}", fails.join("; "));
    Ok(format!("(a)-(f) pass; {} constructed structures checked", structures.len()))
}

// --- 6 ----------------------------------------------------------------------------

fn extend_and_check(phi0: &lieinfty::resolution::ChainMap, src: &AnchoredQ, dst: &AnchoredQ) -> Result<lieinfty::qfield::MorphismData, String> {
    let phi = ok(bq_extend_morphism(phi0, src, dst, ORD), "extension")?;
    let rep = q_verify_morphism(&phi, src, dst, dst.length() as i64 + 2);
    ensure!(rep.passed(), "morphism fails at {:?}", rep.first_failure());
    Ok(phi)
}

fn criterion_morphisms() -> Check {
    // sl2 acting on the plane, as a Lie algebroid (length one)
    let dst = ok(bq_builtin(&Builtin::Sl2, ORD), "builtin")?;
    let anchor = dst.resolution.anchor.clone();
    let src_res = GeomResolution::new(names(&["x", "y"]), anchor.clone(), Vec::new())
        .with_names(vec![names(&["h", "e", "f"])]);
    let mut bt = BracketTable::new(src_res.ring(), anchor);
    let c = |i: usize, v: i64| -> Section { [(i, Poly::from_int(2, v))].into_iter().collect() };
    bt.set(&[0, 1], c(1, 2));
    bt.set(&[0, 2], c(2, -2));
    bt.set(&[1, 2], c(0, 1));
    let src = ok(q_from_brackets(&bt, &src_res), "action algebroid")?;
    homological(&src)?;
    let id: Vec<Column> = (0..3).map(|a| (0..3).map(|b| Poly::from_int(2, (a == b) as i64)).collect()).collect();
    let phi = extend_and_check(&inclusion_chain_map(&src_res, &dst.resolution, id), &src, &dst.q)?;
    ensure!((1..=3).all(|k| phi.taylor(k).iter().all(|p| p.is_zero())), "inclusion has nonzero higher Taylor coefficients");

    let mut details = vec!["sl2 inclusion: phi_k = 0 for k >= 1".to_string()];
    for n in [2, 3] {
        let f = origin_foliation(n);
        let res = ok(res_build(&f, 2 * n + 4, ORD), "resolution")?.resolution;
        let src = ok(bq_universal(&res, &f, ORD), "universal")?;
        let dst = ok(bq_builtin(&Builtin::Origin(n), ORD), "builtin")?;
        let phi0 = ok(res_chain_map(&res, &dst.resolution, ORD), "chain map")?;
        let phi = extend_and_check(&phi0, &src, &dst.q)?;
        let higher = (1..=n).filter(|&k| phi.taylor(k).iter().any(|p| !p.is_zero())).count();
        details.push(format!("origin({n}): {higher} nonzero higher Taylor arities"));
    }
    Ok(details.join("; "))
}

// --- 7 ----------------------------------------------------------------------------

fn criterion_determinism() -> Check {
    let runs = [
        ("sl2", "0,0"),
        ("origin(2)", "0,0"),
        ("origin(3)", "0,0,0"),
        ("order2", "0,0"),
        ("koszul(x^3+y^3+z^3+t^3)", "0,0,0,0"),
    ];
    let exe = env!("CARGO_BIN_EXE_lieinfty");
    for (b, pt) in runs {
        let once = || -> Result<Vec<u8>, String> {
            let out = Command::new(exe)
                .args(["run", "--builtin", b, "--point", pt, "--json", "-"])
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(out.status.success(), "{b}: exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
            Ok(out.stdout)
        };
        let (a, c) = (once()?, once()?);
        ensure!(!a.is_empty() && a == c, "{b}: JSON reports differ");
    }
    Ok(format!("{} builtins, byte-identical", runs.len()))
}

// --- driver -----------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1", "sl2 pipeline", Some(5), criterion_sl2),
        ("2", "Koszul x^3+y^3+z^3+t^3", Some(60), criterion_koszul),
        ("3", "origin family n = 2, 3", Some(20), criterion_origin),
        ("4", "order-2 vector fields on Q^2", Some(30), criterion_order2),
        ("5", "property suites", Some(120), criterion_properties),
        ("6", "morphism extension", Some(30), criterion_morphisms),
        ("7", "determinism of `run` JSON", None, criterion_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, title, limit, f) in criteria {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let dt = t.elapsed();
        let timing = match limit {
            Some(s) => format!("{:.2} s < {s} s", dt.as_secs_f64()),
            None => format!("{:.2} s", dt.as_secs_f64()),
        };
        let r = match (r, limit) {
            (Ok(_), Some(s)) if dt >= Duration::from_secs(s) => Err(format!("time limit exceeded ({timing})")),
            (r, _) => r,
        };
        let (tag, detail) = match &r {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failed += 1;
                ("FAIL", e.clone())
            }
        };
        println!("[{tag}] criterion {id}: {title} ({timing}, tolerance exact) {detail}");
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
