//! Construction of universal Lie infinity-algebroid structures on a geometric
//! resolution by obstruction lifting, canned structures for the standard
//! families, and extension of chain maps to morphisms.

use std::collections::BTreeMap;

use num_traits::One;
use thiserror::Error;

use crate::foliation::{fol_involutivity, Foliation, FoliationError, StructureFunctions};
use crate::graded::{commutator, FMono, GDerivation, GPoly, GRing};
use crate::groebner::{mod_syzygies, Column, GroebnerError, Lifter};
use crate::poly::{q, qf, MonomialOrder, Poly, Q};
use crate::qfield::{
    q_from_brackets, q_linear, q_root, q_verify_homological, q_verify_morphism, AnchoredQ,
    BracketTable, MorphismData, QError, Section, Verdict,
};
use crate::resolution::{res_verify, ChainMap, GeomResolution, ResolutionError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BqError {
    #[error("root of the obstruction is not zero on {label}: {witness}")]
    RootNotZero { label: String, witness: String },
    #[error("no lift at level {level} for label {label}; remainder {remainder}")]
    LiftFailure { level: usize, label: String, remainder: String },
    #[error("field is not vertical: nonzero on {variable}")]
    NotVertical { variable: String },
    #[error("internal check failed: {0}")]
    Internal(String),
    #[error("partial derivatives of {phi} are not a regular sequence; extra syzygy {witness}")]
    NotRegularSequence { phi: String, witness: String },
    #[error("unknown builtin {0}")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error(transparent)]
    Foliation(#[from] FoliationError),
    #[error(transparent)]
    Q(#[from] QError),
}

/// Components of a vertical field per (fiber monomial label, target level):
/// the column of coefficients over that level's basis.
pub fn vertical_components(ring: &GRing, w: &GDerivation) -> BTreeMap<(FMono, usize), Vec<Poly>> {
    let mut out: BTreeMap<(FMono, usize), Vec<Poly>> = BTreeMap::new();
    for (g, val) in w.on_gens.iter().enumerate() {
        let gen = &ring.gens[g];
        for (m, c) in &val.terms {
            let col = out
                .entry((m.clone(), gen.level))
                .or_insert_with(|| vec![Poly::zero(ring.nvars()); ring.rank(gen.level)]);
            col[gen.index] = c.clone();
        }
    }
    out
}

fn fmt_column(c: &[Poly], names: &[String]) -> String {
    format!("({})", c.iter().map(|p| p.fmt_with(names)).collect::<Vec<_>>().join(", "))
}

/// Solves `Q0(W xi_c) - (-1)^{|W| + j} sum_b d_{cb} W(xi_b) = T(xi_c)` for `W` on
/// the generators of `dst`, with `W = 0` on level 1. `Q0` acts on the ring `s`
/// where the values of `W` live.
#[allow(clippy::too_many_arguments)]
fn solve_lift(
    dst: &GeomResolution,
    dst_ring: &GRing,
    s: &GRing,
    q0: &GDerivation,
    target: &[GPoly],
    w_deg: i64,
    order: MonomialOrder,
) -> Result<Vec<GPoly>, BqError> {
    let n = s.nvars();
    let mut w = vec![s.zero(); dst_ring.ngens()];
    let depth = dst_ring.depth();
    // root: rho applied label-wise to the level-1 targets
    if depth >= 1 {
        let mut fields: BTreeMap<FMono, Vec<Poly>> = BTreeMap::new();
        for a in dst_ring.level_ids(1) {
            let col = &dst.anchor[dst_ring.gens[a].index];
            for (m, c) in &target[a].terms {
                let e = fields.entry(m.clone()).or_insert_with(|| vec![Poly::zero(n); n]);
                for (o, p) in e.iter_mut().zip(col) {
                    o.add_product(c, p);
                }
            }
        }
        if let Some((m, v)) = fields.iter().find(|(_, v)| v.iter().any(|p| !p.is_zero())) {
            return Err(BqError::RootNotZero { label: s.fmt_fmono(m), witness: fmt_column(v, &s.var_names) });
        }
    }
    for j in 1..=depth {
        let rows = dst_ring.rank(j);
        let mut labels: BTreeMap<FMono, Vec<Poly>> = BTreeMap::new();
        for c in dst_ring.level_ids(j) {
            let rest = target[c].sub(&q0.apply(s, &w[c]));
            for (m, p) in rest.terms {
                labels.entry(m).or_insert_with(|| vec![Poly::zero(n); rows])[dst_ring.gens[c].index] = p;
            }
        }
        if labels.is_empty() {
            continue;
        }
        let next = if j < depth { dst.d(j + 1) } else { &[] };
        if next.is_empty() {
            let (m, v) = labels.iter().next().unwrap();
            return Err(BqError::LiftFailure { level: j, label: s.fmt_fmono(m), remainder: fmt_column(v, &s.var_names) });
        }
        let lifter = Lifter::new(next, rows, n, order).map_err(|e| BqError::Internal(e.to_string()))?;
        let sign = if (w_deg + j as i64).rem_euclid(2) == 0 { -Q::one() } else { Q::one() };
        for (m, v) in labels {
            let v: Column = v.iter().map(|p| p.scale(&sign)).collect();
            match lifter.lift(&v) {
                Ok(a) => {
                    for (b, p) in a.into_iter().enumerate() {
                        if !p.is_zero() {
                            w[dst_ring.id(j + 1, b)].add_term(m.clone(), p);
                        }
                    }
                }
                Err(GroebnerError::NotInModule { remainder }) => {
                    return Err(BqError::LiftFailure {
                        level: j,
                        label: s.fmt_fmono(&m),
                        remainder: fmt_column(&remainder, &s.var_names),
                    })
                }
                Err(e) => return Err(BqError::Internal(e.to_string())),
            }
        }
    }
    Ok(w)
}

fn q0_of(res: &GeomResolution, ring: &GRing) -> GDerivation {
    q_linear(res, ring).arity(ring, 0)
}

/// `W` with `[Q0, W] = R` and no component targeting level 1.
pub fn bq_lift_vertical(res: &GeomResolution, r: &GDerivation, order: MonomialOrder) -> Result<GDerivation, BqError> {
    let ring = res.ring();
    if let Some(i) = r.on_vars.iter().position(|p| !p.is_zero()) {
        return Err(BqError::NotVertical { variable: ring.var_names[i].clone() });
    }
    let q0 = q0_of(res, &ring);
    let w_deg = r.degree - 1;
    let vals = solve_lift(res, &ring, &ring, &q0, &r.on_gens, w_deg, order)?;
    let w = GDerivation { degree: w_deg, on_vars: vec![ring.zero(); ring.nvars()], on_gens: vals };
    let back = commutator(&ring, &q0, &w);
    if back != *r {
        return Err(BqError::Internal("[Q0, W] differs from R; R is not Q0-closed".into()));
    }
    Ok(w)
}

/// Candidate with arity 0 and 1 only: `d`, the anchor, and the skew bracket
/// `{e_i, e_j} = sum_k c_ij^k e_k` on level 1 (zero elsewhere).
pub fn bq_almost_lie(res: &GeomResolution, c: &StructureFunctions) -> Result<AnchoredQ, BqError> {
    let ring = res.ring();
    let mut bt = BracketTable::new(ring.clone(), res.anchor.clone());
    add_differential(&mut bt, res);
    let r = res.rank(1);
    for i in 0..r {
        for j in i + 1..r {
            let s: Section = c.c[i][j]
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(k, p)| (ring.id(1, k), p.clone()))
                .collect();
            bt.set(&[ring.id(1, i), ring.id(1, j)], s);
        }
    }
    Ok(q_from_brackets(&bt, res)?)
}

fn add_differential(bt: &mut BracketTable, res: &GeomResolution) {
    let ring = bt.ring.clone();
    for j in 2..=ring.depth() {
        for (b, col) in res.d(j).iter().enumerate() {
            let s: Section =
                col.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(c, p)| (ring.id(j - 1, c), p.clone())).collect();
            bt.set(&[ring.id(j, b)], s);
        }
    }
}

fn with_arity(ring: &GRing, q: &GDerivation, k: i64, part: &GDerivation) -> GDerivation {
    let mut split = q.arity_split(ring);
    split.insert(k, part.clone());
    split.values().fold(GDerivation::zero(ring, q.degree), |acc, w| acc.add(w))
}

fn fail_internal(what: &str, v: &Verdict) -> BqError {
    match v {
        Verdict::Pass => BqError::Internal(what.to_string()),
        Verdict::Fail { location, residue } => BqError::Internal(format!("{what}: {location} -> {residue}")),
    }
}

/// Replaces the arity-1 part by `Q1 - lift([Q0, Q1])`.
pub fn bq_correct_arity1(res: &GeomResolution, cand: &AnchoredQ, order: MonomialOrder) -> Result<AnchoredQ, BqError> {
    let ring = &cand.ring;
    let q0 = cand.arity(0);
    let q1 = cand.arity(1);
    let r = commutator(ring, &q0, &q1);
    let root = q_root(&r, cand);
    if let Some((m, v)) = root.fields.iter().next() {
        return Err(BqError::RootNotZero { label: ring.fmt_fmono(m), witness: fmt_column(v, &ring.var_names) });
    }
    let w = bq_lift_vertical(res, &r, order)?;
    let q1_new = q1.sub(&w);
    let q = with_arity(ring, &cand.q, 1, &q1_new);
    let out = AnchoredQ { resolution: res.clone(), ring: ring.clone(), q };
    let check = q_verify_homological(&out, 1);
    if let Some((_, v)) = check.first_failure() {
        return Err(fail_internal("[Q0,Q1] does not vanish after correction", v));
    }
    if !commutator(ring, &q1_new, &q1_new).is_vertical() {
        return Err(BqError::Internal("[Q1,Q1] is not vertical".into()));
    }
    Ok(out)
}

/// Completes a graded almost-Lie structure by solving
/// `[Q0, Q^(n)] = -1/2 sum_{i+j=n} [Q^(i), Q^(j)]` for `n = 2..d`.
pub fn bq_extend(res: &GeomResolution, q01: &AnchoredQ, order: MonomialOrder) -> Result<AnchoredQ, BqError> {
    let ring = &q01.ring;
    let d = res.length() as i64;
    let mut parts: BTreeMap<i64, GDerivation> = BTreeMap::new();
    parts.insert(0, q01.arity(0));
    parts.insert(1, q01.arity(1));
    let half = qf(-1, 2);
    for n in 2..=d.max(1) {
        let mut rn = GDerivation::zero(ring, 2);
        for i in 1..n {
            let (a, b) = (&parts[&i], &parts[&(n - i)]);
            rn = rn.add(&commutator(ring, a, b));
        }
        let rn = rn.scale(&half);
        if n == 2 {
            let aq = AnchoredQ { resolution: res.clone(), ring: ring.clone(), q: q01.q.clone() };
            let root = q_root(&rn, &aq);
            if let Some((m, v)) = root.fields.iter().next() {
                return Err(BqError::RootNotZero { label: ring.fmt_fmono(m), witness: fmt_column(v, &ring.var_names) });
            }
        }
        let w = bq_lift_vertical(res, &rn, order)?;
        log::debug!("arity {n}: lifted obstruction");
        parts.insert(n, w);
    }
    let q = parts.values().fold(GDerivation::zero(ring, 1), |acc, w| acc.add(w));
    let out = AnchoredQ { resolution: res.clone(), ring: ring.clone(), q };
    if out.max_arity() > d.max(1) {
        return Err(BqError::Internal(format!("arity {} exceeds the resolution length", out.max_arity())));
    }
    let report = q_verify_homological(&out, d + 1);
    if let Some((_, v)) = report.first_failure() {
        return Err(fail_internal("[Q,Q] does not vanish", v));
    }
    Ok(out)
}

/// Full construction on a verified resolution of `f`.
pub fn bq_universal(res: &GeomResolution, f: &Foliation, order: MonomialOrder) -> Result<AnchoredQ, BqError> {
    let c = fol_involutivity(f, order)?;
    let cand = bq_almost_lie(res, &c)?;
    let q01 = bq_correct_arity1(res, &cand, order)?;
    bq_extend(res, &q01, order)
}

// --- canned families ----------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Builtin {
    Sl2,
    Origin(usize),
    Order2,
    Koszul { var_names: Vec<String>, phi: Poly },
}

impl Builtin {
    pub fn label(&self) -> String {
        match self {
            Builtin::Sl2 => "sl2".into(),
            Builtin::Origin(n) => format!("origin({n})"),
            Builtin::Order2 => "order2".into(),
            Builtin::Koszul { var_names, phi } => format!("koszul({})", phi.fmt_with(var_names)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuiltinStructure {
    pub foliation: Foliation,
    pub resolution: GeomResolution,
    pub q: AnchoredQ,
}

pub fn bq_builtin(b: &Builtin, order: MonomialOrder) -> Result<BuiltinStructure, BqError> {
    let (res, q) = match b {
        Builtin::Sl2 => {
            let res = sl2_resolution();
            let bt = sl2_brackets(&res);
            let q = q_from_brackets(&bt, &res)?;
            (res, q)
        }
        Builtin::Origin(n) => {
            let res = origin_resolution(*n);
            let q = q_from_brackets(&origin_brackets(&res, *n), &res)?;
            (res, q)
        }
        Builtin::Order2 => {
            let res = order2_resolution();
            let cand = order2_quadra(&res)?;
            let q01 = bq_correct_arity1(&res, &cand, order)?;
            let q = bq_extend(&res, &q01, order)?;
            (res, q)
        }
        Builtin::Koszul { var_names, phi } => {
            check_regular_sequence(var_names, phi, order)?;
            let res = koszul_resolution(var_names, phi);
            let q = q_from_brackets(&koszul_brackets(&res, phi), &res)?;
            (res, q)
        }
    };
    let foliation = res.foliation();
    let rep = res_verify(&res, &foliation, order);
    if let Some(msg) = rep.first_failure() {
        return Err(BqError::Internal(format!("{} resolution fails verification: {msg}", b.label())));
    }
    let report = q_verify_homological(&q, res.length() as i64 + 1);
    if let Some((k, v)) = report.first_failure() {
        return Err(fail_internal(&format!("{} structure fails at arity {k}", b.label()), v));
    }
    Ok(BuiltinStructure { foliation, resolution: res, q })
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Generators `h = (x,-y)`, `e = (0,x)`, `f = (y,0)` with the single relation
/// `xy h + y^2 e - x^2 f = 0`.
pub fn sl2_resolution() -> GeomResolution {
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let z = Poly::zero(2);
    let anchor = vec![vec![x.clone(), -&y], vec![z.clone(), x.clone()], vec![y.clone(), z]];
    let d2 = vec![vec![&x * &y, &y * &y, -&(&x * &x)]];
    GeomResolution::new(names(&["x", "y"]), anchor, vec![d2]).with_names(vec![names(&["h", "e", "f"]), names(&["r"])])
}

fn sl2_brackets(res: &GeomResolution) -> BracketTable {
    let ring = res.ring();
    let mut bt = BracketTable::new(ring.clone(), res.anchor.clone());
    add_differential(&mut bt, res);
    let c = |v: i64| Poly::from_int(2, v);
    let (h, e, f) = (ring.id(1, 0), ring.id(1, 1), ring.id(1, 2));
    bt.set(&[h, e], [(e, c(2))].into_iter().collect());
    bt.set(&[h, f], [(f, c(-2))].into_iter().collect());
    bt.set(&[e, f], [(h, c(1))].into_iter().collect());
    bt
}

/// Sorted `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    crate::qfield::unshuffles(n, k)
}

/// `a ^ b` on sorted index lists: the sorted union with its sign, `None` on overlap.
fn wedge(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    let mut neg = false;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            neg = !neg;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, neg))
}

fn index_of(list: &[Vec<usize>], key: &[usize]) -> usize {
    list.iter().position(|v| v == key).expect("basis element")
}

fn var_names_default(n: usize) -> Vec<String> {
    crate::poly::default_names(n)
}

/// `E_{-i} = wedge^i V* (x) V` with `rho(a (x) v) = i_e a v` and `d = i_e (x) id`.
pub fn origin_resolution(n: usize) -> GeomResolution {
    let vn = var_names_default(n);
    let basis: Vec<Vec<Vec<usize>>> = (1..=n).map(|i| subsets(n, i)).collect();
    let mut anchor = Vec::new();
    for k in 0..n {
        for u in 0..n {
            let mut col = vec![Poly::zero(n); n];
            col[u] = Poly::var(n, k);
            anchor.push(col);
        }
    }
    let mut diffs = Vec::new();
    for i in 2..=n {
        let rows = basis[i - 2].len() * n;
        let mut cols = Vec::new();
        for form in &basis[i - 1] {
            for u in 0..n {
                let mut col = vec![Poly::zero(n); rows];
                for (t, &k) in form.iter().enumerate() {
                    let rest: Vec<usize> = form.iter().copied().filter(|&m| m != k).collect();
                    let r = index_of(&basis[i - 2], &rest);
                    let sign = if t % 2 == 0 { q(1) } else { q(-1) };
                    col[r * n + u] = Poly::var(n, k).scale(&sign);
                }
                cols.push(col);
            }
        }
        diffs.push(cols);
    }
    let section_names = basis
        .iter()
        .map(|forms| {
            forms
                .iter()
                .flat_map(|f| {
                    let a: Vec<String> = f.iter().map(|&k| format!("d{}", vn[k])).collect();
                    let a = a.join("^");
                    vn.iter().map(move |v| format!("{a}@{v}"))
                })
                .collect()
        })
        .collect();
    GeomResolution::new(vn.clone(), anchor, diffs).with_names(section_names)
}

/// `{a (x) u, b (x) v} = a ^ i_u b (x) v + (-1)^{ij} b ^ i_v a (x) u` on constant sections.
fn origin_brackets(res: &GeomResolution, n: usize) -> BracketTable {
    let ring = res.ring();
    let mut bt = BracketTable::new(ring.clone(), res.anchor.clone());
    add_differential(&mut bt, res);
    let basis: Vec<Vec<Vec<usize>>> = (1..=n).map(|i| subsets(n, i)).collect();
    let decode = |id: usize| -> (usize, Vec<usize>, usize) {
        let g = &ring.gens[id];
        (g.level, basis[g.level - 1][g.index / n].clone(), g.index % n)
    };
    let one = Poly::one(n);
    // a ^ i_u b (x) v, accumulated into s with the given sign
    let term = |s: &mut Section, a: &[usize], u: usize, b: &[usize], v: usize, neg: bool| {
        let Some(t) = b.iter().position(|&k| k == u) else { return };
        let rest: Vec<usize> = b.iter().copied().filter(|&k| k != u).collect();
        let Some((w, wneg)) = wedge(a, &rest) else { return };
        if w.is_empty() || w.len() > n {
            return;
        }
        let level = w.len();
        let id = ring.id(level, index_of(&basis[level - 1], &w) * n + v);
        let neg = neg ^ wneg ^ (t % 2 == 1);
        let c = if neg { -&one } else { one.clone() };
        let e = s.entry(id).or_insert_with(|| Poly::zero(n));
        e.add_assign_ref(&c);
        if e.is_zero() {
            s.remove(&id);
        }
    };
    for key in crate::qfield::basis_tuples(&ring, 2) {
        let (i, a, u) = decode(key[0]);
        let (j, b, v) = decode(key[1]);
        if i + j - 1 > n {
            continue;
        }
        let mut s = Section::new();
        // shifted convention: (-1)^(i+1) and (-1)^(ij+j+1)
        term(&mut s, &a, u, &b, v, i % 2 == 0);
        term(&mut s, &b, v, &a, u, (i * j + j) % 2 == 0);
        if !s.is_empty() {
            bt.set(&key, s);
        }
    }
    bt
}

/// Quadratic monomials `x^2, xy, y^2` tensored with `V = Q^2`, and the relation
/// module `Q^2 (x) V` with `delta(F, G) = (yF, -xF - yG, xG)`.
pub fn order2_resolution() -> GeomResolution {
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let quads = [&x * &x, &x * &y, &y * &y];
    let mut anchor = Vec::new();
    for a in &quads {
        for u in 0..2 {
            let mut col = vec![Poly::zero(2); 2];
            col[u] = a.clone();
            anchor.push(col);
        }
    }
    // delta on Q^2 in (x^2, xy, y^2) coordinates
    let delta = [[y.clone(), -&x, Poly::zero(2)], [Poly::zero(2), -&y, x.clone()]];
    let mut d2 = Vec::new();
    for dcol in &delta {
        for u in 0..2 {
            let mut col = vec![Poly::zero(2); 6];
            for (a, p) in dcol.iter().enumerate() {
                col[a * 2 + u] = p.clone();
            }
            d2.push(col);
        }
    }
    let l1 = ["x^2", "xy", "y^2"].iter().flat_map(|a| ["x", "y"].map(|u| format!("{a}@{u}"))).collect();
    let l2 = ["F", "G"].iter().flat_map(|a| ["x", "y"].map(|u| format!("{a}@{u}"))).collect();
    GeomResolution::new(names(&["x", "y"]), anchor, vec![d2]).with_names(vec![l1, l2])
}

/// Arity 0 and 1 candidate with the level-1 bracket
/// `{a (x) u, b (x) v} = u[b*] (a (x) v) - v[a*] (b (x) u)`.
pub fn order2_quadra(res: &GeomResolution) -> Result<AnchoredQ, BqError> {
    let ring = res.ring();
    let mut bt = BracketTable::new(ring.clone(), res.anchor.clone());
    add_differential(&mut bt, res);
    let quad = |a: usize| res.anchor[a * 2][0].clone();
    for key in crate::qfield::basis_tuples(&ring, 2) {
        if ring.gens[key[0]].level != 1 || ring.gens[key[1]].level != 1 {
            continue;
        }
        let (ia, ib) = (ring.gens[key[0]].index, ring.gens[key[1]].index);
        let (a, u, b, v) = (ia / 2, ia % 2, ib / 2, ib % 2);
        let mut s = Section::new();
        let p1 = quad(b).derivative(u);
        let p2 = -&quad(a).derivative(v);
        for (id, p) in [(ring.id(1, a * 2 + v), p1), (ring.id(1, b * 2 + u), p2)] {
            let e = s.entry(id).or_insert_with(|| Poly::zero(2));
            e.add_assign_ref(&p);
            if e.is_zero() {
                s.remove(&id);
            }
        }
        bt.set(&key, s);
    }
    Ok(q_from_brackets(&bt, res)?)
}

fn phi_partials(phi: &Poly) -> Vec<Poly> {
    (0..phi.nvars()).map(|i| phi.derivative(i)).collect()
}

/// Every syzygy of `(d_1 phi, ..., d_n phi)` must be a combination of the
/// Koszul ones `d_j phi e_i - d_i phi e_j`.
pub fn check_regular_sequence(var_names: &[String], phi: &Poly, order: MonomialOrder) -> Result<(), BqError> {
    let n = phi.nvars();
    let dphi = phi_partials(phi);
    let fail = |w: String| BqError::NotRegularSequence { phi: phi.fmt_with(var_names), witness: w };
    if dphi.iter().any(|p| p.is_zero()) {
        return Err(fail("a partial derivative vanishes identically".into()));
    }
    let gens: Vec<Column> = dphi.iter().map(|p| vec![p.clone()]).collect();
    let syz = mod_syzygies(&gens, 1, n, order).map_err(|e| BqError::Internal(e.to_string()))?;
    let mut koszul = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut col = vec![Poly::zero(n); n];
            col[i] = dphi[j].clone();
            col[j] = -&dphi[i];
            koszul.push(col);
        }
    }
    if koszul.is_empty() {
        return if syz.is_empty() { Ok(()) } else { Err(fail(fmt_column(&syz[0], var_names))) };
    }
    let lifter = Lifter::new(&koszul, n, n, order).map_err(|e| BqError::Internal(e.to_string()))?;
    for s in &syz {
        if !lifter.contains(s) {
            return Err(fail(fmt_column(s, var_names)));
        }
    }
    Ok(())
}

fn koszul_name(n: usize, idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
    format!("d{}", if n <= 9 { parts.join("") } else { parts.join("_") })
}

/// `E_{-i} = wedge^{i+1} V`, `d = i_{d phi}` and `rho(d_i ^ d_j) = d_i phi d_j - d_j phi d_i`.
pub fn koszul_resolution(var_names: &[String], phi: &Poly) -> GeomResolution {
    let n = phi.nvars();
    let dphi = phi_partials(phi);
    let basis: Vec<Vec<Vec<usize>>> = (2..=n).map(|k| subsets(n, k)).collect();
    let contract = |idx: &[usize], rows: &[Vec<usize>]| -> Column {
        let mut col = vec![Poly::zero(n); rows.len()];
        for (t, &k) in idx.iter().enumerate() {
            let rest: Vec<usize> = idx.iter().copied().filter(|&m| m != k).collect();
            let r = index_of(rows, &rest);
            let p = if t % 2 == 0 { dphi[k].clone() } else { -&dphi[k] };
            col[r].add_assign_ref(&p);
        }
        col
    };
    let singles: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let anchor = basis.first().map(|b| b.iter().map(|idx| contract(idx, &singles)).collect()).unwrap_or_default();
    let diffs = (1..basis.len()).map(|l| basis[l].iter().map(|idx| contract(idx, &basis[l - 1])).collect()).collect();
    let section_names = basis.iter().map(|b| b.iter().map(|idx| koszul_name(n, idx)).collect()).collect();
    GeomResolution::new(var_names.to_vec(), anchor, diffs).with_names(section_names)
}

/// Brackets `{d_I1, ..., d_Ik} = sum eps(i_1..i_k) d^k phi / dx_i1..dx_ik d_{I1^i1 . ... . Ik^ik}`
/// for `k >= 2` on constant sections.
fn koszul_brackets(res: &GeomResolution, phi: &Poly) -> BracketTable {
    let ring = res.ring();
    let n = phi.nvars();
    let d = ring.depth();
    let mut bt = BracketTable::new(ring.clone(), res.anchor.clone());
    add_differential(&mut bt, res);
    let basis: Vec<Vec<Vec<usize>>> = (2..=n).map(|k| subsets(n, k)).collect();
    let max_k = phi.total_degree().unwrap_or(0) as usize;
    for k in 2..=max_k.min(d + 1) {
        for key in crate::qfield::basis_tuples(&ring, k) {
            let levels: usize = key.iter().map(|&g| ring.gens[g].level).sum();
            if levels < 2 || levels - 1 > d {
                continue;
            }
            let blocks: Vec<&Vec<usize>> = key.iter().map(|&g| &basis[ring.gens[g].level - 1][ring.gens[g].index]).collect();
            let mut s = koszul_bracket(&ring, &basis, &blocks, phi);
            // sign of moving the k-1 shifted arguments past each block
            let mut e = k + 1;
            for (t, &g) in key.iter().enumerate() {
                e += ring.gens[g].level * (k - 1 - t);
            }
            if e % 2 == 1 {
                for v in s.values_mut() {
                    *v = -&*v;
                }
            }
            if !s.is_empty() {
                bt.set(&key, s);
            }
        }
    }
    bt
}

fn koszul_bracket(ring: &GRing, basis: &[Vec<Vec<usize>>], blocks: &[&Vec<usize>], phi: &Poly) -> Section {
    let n = phi.nvars();
    let concat: Vec<usize> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
    let offsets: Vec<usize> = blocks
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.len();
            Some(o)
        })
        .collect();
    let mut out = Section::new();
    let mut choice = vec![0usize; blocks.len()];
    loop {
        let picked: Vec<usize> = choice.iter().zip(&offsets).map(|(c, o)| c + o).collect();
        // sign of bringing the picked entries to the front, in order
        let mut neg = false;
        for &p in &picked {
            let skipped = (0..p).filter(|q| !picked.contains(q)).count();
            neg ^= skipped % 2 == 1;
        }
        let rest: Vec<usize> = (0..concat.len()).filter(|q| !picked.contains(q)).map(|q| concat[q]).collect();
        if let Some((sorted, rneg)) = wedge(&[], &rest) {
            let mut der = phi.clone();
            for &p in &picked {
                der = der.derivative(concat[p]);
            }
            if !der.is_zero() && sorted.len() >= 2 {
                let level = sorted.len() - 1;
                let id = ring.id(level, index_of(&basis[level - 1], &sorted));
                let c = if neg ^ rneg { -&der } else { der };
                let e = out.entry(id).or_insert_with(|| Poly::zero(n));
                e.add_assign_ref(&c);
                if e.is_zero() {
                    out.remove(&id);
                }
            }
        }
        let mut t = 0;
        while t < blocks.len() {
            choice[t] += 1;
            if choice[t] < blocks[t].len() {
                break;
            }
            choice[t] = 0;
            t += 1;
        }
        if t == blocks.len() {
            break;
        }
    }
    out
}

// --- morphisms ----------------------------------------------------------------

/// Extends the chain map `phi0: src -> dst` to a morphism of the structures,
/// one Taylor coefficient per arity.
pub fn bq_extend_morphism(
    phi0: &ChainMap,
    src: &AnchoredQ,
    dst: &AnchoredQ,
    order: MonomialOrder,
) -> Result<MorphismData, BqError> {
    let sr = &src.ring;
    let dr = &dst.ring;
    let mut phi = MorphismData::from_chain_map(phi0, src, dst);
    let q0 = src.arity(0);
    let d = dr.depth() as i64;
    for k in 1..=d.max(1) {
        // defect c = Q_src Phi - Phi Q_dst, arity k part on generators
        let target: Vec<GPoly> = (0..dr.ngens())
            .map(|g| {
                let c = src.q.apply(sr, &phi.images[g]).sub(&phi.apply(sr, &dst.q.on_gens[g]));
                c.arity_part(k as usize + 1).neg()
            })
            .collect();
        let w = solve_lift(&dst.resolution, dr, sr, &q0, &target, 0, order)?;
        for (g, v) in w.into_iter().enumerate() {
            phi.images[g].add_assign(&v);
        }
    }
    let report = q_verify_morphism(&phi, src, dst, d + 2);
    if let Some((k, v)) = report.first_failure() {
        return Err(fail_internal(&format!("morphism fails at arity {k}"), v));
    }
    Ok(phi)
}

/// Inclusion of a sub-presentation: level-1 map only, zero above.
pub fn inclusion_chain_map(src: &GeomResolution, dst: &GeomResolution, level1: Vec<Column>) -> ChainMap {
    let mut maps = vec![level1];
    for i in 2..=dst.length().max(src.length()) {
        maps.push(vec![vec![Poly::zero(src.nvars()); dst.rank(i)]; src.rank(i)]);
    }
    ChainMap { maps }
}
