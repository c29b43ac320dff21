//! The homological vector field `Q` of a Lie infinity-algebroid and its
//! bracket-table view.
//!
//! Sign convention. Brackets are the derived brackets of `Q`:
//! `{e_1, ..., e_k}_k = P [ ... [[Q, i_1], i_2] ..., i_k ]`, where `i_a` is the
//! constant vertical field `d/d xi_a` and `P` restricts a vertical field to the
//! zero section. With this choice the 1-ary bracket is `d`, the Leibniz rule
//! `{x, f y} = f {x, y} + rho(x)[f] y` holds, and the higher Jacobi identities
//! in the graded-symmetric convention (brackets of degree +1) are equivalent to
//! `[Q, Q] = 0`. On arity 0 it reproduces `<Q a, x> = (-1)^{|a|} <a, d x>`.

use std::collections::BTreeMap;

use num_traits::One;
use thiserror::Error;

use crate::foliation::{vf_apply, vf_bracket};
use crate::graded::{commutator, FMono, GDerivation, GPoly, GRing};
use crate::poly::{Poly, Q};
use crate::resolution::{ChainMap, GeomResolution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QError {
    #[error("bracket {key} has a component on {target} of the wrong degree")]
    DegreeMismatch { key: String, target: String },
    #[error("1-ary bracket on {section} differs from the resolution differential")]
    DifferentialMismatch { section: String },
}

/// Section of `E` as sparse coefficients over global basis ids.
pub type Section = BTreeMap<usize, Poly>;

fn section_add(s: &mut Section, id: usize, p: Poly) {
    if p.is_zero() {
        return;
    }
    match s.get_mut(&id) {
        Some(v) => {
            v.add_assign_ref(&p);
            if v.is_zero() {
                s.remove(&id);
            }
        }
        None => {
            s.insert(id, p);
        }
    }
}

fn section_scale(s: &Section, c: &Q) -> Section {
    s.iter().map(|(k, v)| (*k, v.scale(c))).filter(|(_, v)| !v.is_zero()).collect()
}

fn koszul_odd(a: i64, b: i64) -> bool {
    (a * b).rem_euclid(2) == 1
}

/// `Q(x_i) = sum_a rho_{ia} xi_a` and `Q(xi_c) = (-1)^j sum_a d_{ca} xi_a` for
/// `xi_c` at level `j`. The first part is the non-vertical piece of the arity-1
/// component; the second is the whole arity-0 component.
pub fn q_linear(res: &GeomResolution, ring: &GRing) -> GDerivation {
    let mut w = GDerivation::zero(ring, 1);
    for (a, col) in res.anchor.iter().enumerate() {
        let id = ring.id(1, a);
        for (i, p) in col.iter().enumerate() {
            w.on_vars[i].add_term(FMono(vec![id]), p.clone());
        }
    }
    for j in 1..ring.depth() {
        let sign = if j % 2 == 0 { Q::one() } else { -Q::one() };
        for (a, col) in res.d(j + 1).iter().enumerate() {
            let ida = ring.id(j + 1, a);
            for (c, p) in col.iter().enumerate() {
                let idc = ring.id(j, c);
                w.on_gens[idc].add_term(FMono(vec![ida]), p.scale(&sign));
            }
        }
    }
    w
}

/// A degree +1 derivation tied to a resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchoredQ {
    pub resolution: GeomResolution,
    pub ring: GRing,
    pub q: GDerivation,
}

impl AnchoredQ {
    /// Only the arity-0 data (`d` and the anchor).
    pub fn linear(res: &GeomResolution) -> Self {
        let ring = res.ring();
        let q = q_linear(res, &ring);
        AnchoredQ { resolution: res.clone(), ring, q }
    }

    pub fn arity(&self, k: i64) -> GDerivation {
        self.q.arity(&self.ring, k)
    }

    /// Highest arity with a nonzero component.
    pub fn max_arity(&self) -> i64 {
        self.q.arities(&self.ring).into_iter().max().unwrap_or(0)
    }

    pub fn length(&self) -> usize {
        self.ring.depth()
    }
}

/// Graded-symmetric brackets stored on sorted basis tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketTable {
    pub ring: GRing,
    pub anchor: Vec<Vec<Poly>>,
    /// Key: sorted global ids (odd ids not repeated); value: section.
    pub brackets: BTreeMap<Vec<usize>, Section>,
}

impl BracketTable {
    pub fn new(ring: GRing, anchor: Vec<Vec<Poly>>) -> Self {
        BracketTable { ring, anchor, brackets: BTreeMap::new() }
    }

    pub fn nvars(&self) -> usize {
        self.ring.nvars()
    }

    /// Stores `value` as the bracket of `ids` in the given order, applying the
    /// Koszul sign to reach the sorted key.
    pub fn set(&mut self, ids: &[usize], value: Section) {
        let Some((key, neg)) = sort_with_sign(&self.ring, ids) else { return };
        let v = if neg { section_scale(&value, &-Q::one()) } else { value };
        if v.is_empty() {
            self.brackets.remove(&key);
        } else {
            self.brackets.insert(key, v);
        }
    }

    pub fn add(&mut self, ids: &[usize], value: &Section) {
        let Some((key, neg)) = sort_with_sign(&self.ring, ids) else { return };
        let e = self.brackets.entry(key.clone()).or_default();
        for (id, p) in value {
            section_add(e, *id, if neg { -p } else { p.clone() });
        }
        if e.is_empty() {
            self.brackets.remove(&key);
        }
    }

    /// Bracket of basis sections in the given order.
    pub fn basis(&self, ids: &[usize]) -> Section {
        let Some((key, neg)) = sort_with_sign(&self.ring, ids) else { return Section::new() };
        match self.brackets.get(&key) {
            None => Section::new(),
            Some(v) => {
                if neg {
                    section_scale(v, &-Q::one())
                } else {
                    v.clone()
                }
            }
        }
    }

    pub fn arities(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.brackets.keys().map(|k| k.len()).collect();
        a.dedup();
        a
    }

    fn anchor_of(&self, id: usize) -> Option<&Vec<Poly>> {
        if self.ring.gens[id].level == 1 {
            Some(&self.anchor[self.ring.gens[id].index])
        } else {
            None
        }
    }

    /// `rho(s)` for a section supported on level 1.
    pub fn anchor_section(&self, s: &Section) -> Vec<Poly> {
        let n = self.nvars();
        let mut out = vec![Poly::zero(n); n];
        for (id, f) in s {
            if let Some(col) = self.anchor_of(*id) {
                for (o, p) in out.iter_mut().zip(col) {
                    o.add_product(f, p);
                }
            }
        }
        out
    }

    /// Bracket of arbitrary homogeneous sections: `O`-multilinear except the
    /// 2-ary bracket, which obeys the Leibniz rule with the anchor.
    pub fn eval(&self, args: &[Section]) -> Section {
        let k = args.len();
        let mut out = Section::new();
        if k == 0 {
            return out;
        }
        // multilinear part
        let lists: Vec<Vec<(&usize, &Poly)>> = args.iter().map(|s| s.iter().collect()).collect();
        if lists.iter().any(|l| l.is_empty()) {
            return out;
        }
        let mut idx = vec![0usize; k];
        loop {
            let ids: Vec<usize> = (0..k).map(|t| *lists[t][idx[t]].0).collect();
            let val = self.basis(&ids);
            if !val.is_empty() {
                let mut coef = Poly::one(self.nvars());
                for t in 0..k {
                    coef = &coef * lists[t][idx[t]].1;
                }
                for (id, p) in &val {
                    section_add(&mut out, *id, p * &coef);
                }
            }
            let mut t = 0;
            loop {
                if t == k {
                    break;
                }
                idx[t] += 1;
                if idx[t] < lists[t].len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == k {
                break;
            }
        }
        if k == 2 {
            // {f_a e_a, g_b e_b} picks up f_a rho(e_a)[g_b] e_b
            // and (-1)^{|e_a||e_b|} g_b rho(e_b)[f_a] e_a
            for (a, f) in &args[0] {
                for (b, g) in &args[1] {
                    if let Some(ra) = self.anchor_of(*a) {
                        let t = vf_apply(ra, g);
                        section_add(&mut out, *b, &t * f);
                    }
                    if let Some(rb) = self.anchor_of(*b) {
                        let t = vf_apply(rb, f);
                        let t = &t * g;
                        let neg = koszul_odd(self.ring.degree(*a), self.ring.degree(*b));
                        section_add(&mut out, *a, if neg { -&t } else { t });
                    }
                }
            }
        }
        out
    }

    pub fn fmt_section(&self, s: &Section) -> String {
        fmt_section(&self.ring, s)
    }
}

pub fn fmt_section(ring: &GRing, s: &Section) -> String {
    if s.is_empty() {
        return "0".into();
    }
    s.iter()
        .map(|(id, p)| {
            let name = section_name(ring, *id);
            let c = p.fmt_with(&ring.var_names);
            if p.is_constant() && p.constant_term().is_one() {
                name
            } else if p.is_constant() && (-p.constant_term()).is_one() {
                format!("-{}", name)
            } else if p.len() == 1 {
                format!("{}*{}", c, name)
            } else {
                format!("({})*{}", c, name)
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
        .replace(" + -", " - ")
}

/// Section name from the dual generator name `xi[name]`.
pub fn section_name(ring: &GRing, id: usize) -> String {
    let n = &ring.gens[id].name;
    n.strip_prefix("xi[").and_then(|s| s.strip_suffix(']')).map(|s| s.to_string()).unwrap_or_else(|| n.clone())
}

/// Sorts ids with the Koszul sign; `None` when an odd id repeats.
pub fn sort_with_sign(ring: &GRing, ids: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut v = ids.to_vec();
    let mut neg = false;
    // insertion sort tracking swaps of odd pairs
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            if ring.is_odd(v[j - 1]) && ring.is_odd(v[j]) {
                neg = !neg;
            }
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] && ring.is_odd(w[0]) {
            return None;
        }
    }
    Some((v, neg))
}

/// Factor `sigma(a)` with `{e_a1..e_ak}_c = sigma(a) * [coefficient of xi^a in Q(xi_c)]`
/// for a sorted key `a`.
fn duality_factor(ring: &GRing, key: &[usize]) -> Q {
    // sign of the nested commutators
    let mut sign_neg = false;
    let mut deg_x: i64 = 1;
    for &a in key {
        let da = ring.degree(a);
        // X_j(xi_c) = -(-1)^{|X_{j-1}| d_a} i_a X_{j-1}(xi_c)
        sign_neg ^= true;
        sign_neg ^= koszul_odd(deg_x, da);
        deg_x -= da;
    }
    // i_ak ... i_a1 applied to the monomial xi^key
    let mut p = ring.monomial(key);
    for &a in key {
        p = GDerivation::partial(ring, a).apply(ring, &p);
    }
    let n = p.coeff(&FMono::one()).constant_term();
    if sign_neg {
        -n
    } else {
        n
    }
}

/// Converts a bracket table into `Q`. The 1-ary brackets must equal `d`.
pub fn q_from_brackets(bt: &BracketTable, res: &GeomResolution) -> Result<AnchoredQ, QError> {
    let ring = bt.ring.clone();
    let lin = q_linear(res, &ring);
    let mut w = GDerivation::zero(&ring, 1);
    w.on_vars = lin.on_vars.clone();
    for (key, val) in &bt.brackets {
        let target_deg: i64 = key.iter().map(|&a| ring.degree(a)).sum::<i64>() - 1;
        for c in val.keys() {
            if ring.degree(*c) != target_deg {
                return Err(QError::DegreeMismatch {
                    key: key.iter().map(|&a| section_name(&ring, a)).collect::<Vec<_>>().join(","),
                    target: section_name(&ring, *c),
                });
            }
        }
        let f = duality_factor(&ring, key).recip();
        for (c, p) in val {
            w.on_gens[*c].add_term(FMono(key.clone()), p.scale(&f));
        }
    }
    // arity-0 part must match the resolution
    let a0 = w.arity(&ring, 0);
    if a0.on_gens != lin.on_gens {
        let bad = (0..ring.ngens()).find(|&g| a0.on_gens[g] != lin.on_gens[g]).unwrap();
        return Err(QError::DifferentialMismatch { section: section_name(&ring, bad) });
    }
    Ok(AnchoredQ { resolution: res.clone(), ring, q: w })
}

/// Inverse of [`q_from_brackets`].
pub fn brackets_from_q(aq: &AnchoredQ) -> BracketTable {
    let ring = &aq.ring;
    let mut bt = BracketTable::new(ring.clone(), aq.resolution.anchor.clone());
    let mut acc: BTreeMap<Vec<usize>, Section> = BTreeMap::new();
    for (c, val) in aq.q.on_gens.iter().enumerate() {
        for (m, p) in &val.terms {
            if m.is_empty() {
                continue;
            }
            section_add(acc.entry(m.0.clone()).or_default(), c, p.clone());
        }
    }
    for (key, val) in acc {
        let f = duality_factor(ring, &key);
        let v = section_scale(&val, &f);
        if !v.is_empty() {
            bt.brackets.insert(key, v);
        }
    }
    bt
}

/// Derived bracket computed literally by nested commutators; used as an
/// independent check of [`brackets_from_q`].
pub fn derived_bracket(aq: &AnchoredQ, ids: &[usize]) -> Section {
    let ring = &aq.ring;
    let mut x = aq.q.clone();
    for &a in ids {
        x = commutator(ring, &x, &GDerivation::partial(ring, a));
    }
    let mut out = Section::new();
    for (c, v) in x.on_gens.iter().enumerate() {
        section_add(&mut out, c, v.coeff(&FMono::one()));
    }
    out
}

// --- verification reports -----------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail { location: String, residue: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArityReport {
    pub arities: Vec<(i64, Verdict)>,
}

impl ArityReport {
    pub fn passed(&self) -> bool {
        self.arities.iter().all(|(_, v)| v.passed())
    }

    pub fn verdict(&self, k: i64) -> Option<&Verdict> {
        self.arities.iter().find(|(a, _)| *a == k).map(|(_, v)| v)
    }

    pub fn first_failure(&self) -> Option<(i64, &Verdict)> {
        self.arities.iter().find(|(_, v)| !v.passed()).map(|(k, v)| (*k, v))
    }

    pub fn verdicts(&self) -> Vec<bool> {
        self.arities.iter().map(|(_, v)| v.passed()).collect()
    }
}

/// `1/2 [Q, Q]` arity by arity for arities `0..=max_arity`.
pub fn q_verify_homological(aq: &AnchoredQ, max_arity: i64) -> ArityReport {
    let ring = &aq.ring;
    let qq = commutator(ring, &aq.q, &aq.q).scale(&crate::poly::qf(1, 2));
    let split = qq.arity_split(ring);
    let mut arities = Vec::new();
    for k in 0..=max_arity {
        let verdict = match split.get(&k) {
            None => Verdict::Pass,
            Some(w) => first_nonzero(ring, w),
        };
        arities.push((k, verdict));
    }
    ArityReport { arities }
}

fn first_nonzero(ring: &GRing, w: &GDerivation) -> Verdict {
    for (i, p) in w.on_vars.iter().enumerate() {
        if !p.is_zero() {
            return Verdict::Fail { location: ring.var_names[i].clone(), residue: ring.fmt(p) };
        }
    }
    for (g, p) in w.on_gens.iter().enumerate() {
        if !p.is_zero() {
            return Verdict::Fail { location: ring.gens[g].name.clone(), residue: ring.fmt(p) };
        }
    }
    Verdict::Pass
}

/// Sorted multisets of ids of size `k` (odd ids at most once).
pub fn basis_tuples(ring: &GRing, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(ring: &GRing, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for g in start..ring.ngens() {
            let next = if ring.is_odd(g) { g + 1 } else { g };
            cur.push(g);
            rec(ring, k, next, cur, out);
            cur.pop();
        }
    }
    rec(ring, k, 0, &mut cur, &mut out);
    out
}

/// Subsets of `0..n` of size `i`, in lexicographic order.
pub fn unshuffles(n: usize, i: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(n: usize, i: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == i {
            out.push(cur.clone());
            return;
        }
        for s in start..n {
            cur.push(s);
            rec(n, i, s + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, i, 0, &mut cur, &mut out);
    out
}

/// Koszul sign of listing `ids[pick]` first and then the rest (both in order).
fn unshuffle_sign(ring: &GRing, ids: &[usize], pick: &[usize]) -> bool {
    let mut neg = false;
    // each picked element jumps over the earlier non-picked ones
    for &p in pick {
        for q in 0..p {
            if !pick.contains(&q) && ring.is_odd(ids[p]) && ring.is_odd(ids[q]) {
                neg = !neg;
            }
        }
    }
    neg
}

/// The higher Jacobi expression on basis sections `ids`.
pub fn jacobiator(bt: &BracketTable, ids: &[usize]) -> Section {
    let ring = &bt.ring;
    let n = ids.len();
    let mut total = Section::new();
    for i in 1..=n {
        for pick in unshuffles(n, i) {
            let inner_ids: Vec<usize> = pick.iter().map(|&p| ids[p]).collect();
            let inner = bt.basis(&inner_ids);
            if inner.is_empty() {
                continue;
            }
            let mut args = vec![inner];
            for (p, &id) in ids.iter().enumerate() {
                if !pick.contains(&p) {
                    args.push([(id, Poly::one(bt.nvars()))].into_iter().collect());
                }
            }
            let val = bt.eval(&args);
            let neg = unshuffle_sign(ring, ids, &pick);
            for (id, p) in val {
                section_add(&mut total, id, if neg { -&p } else { p });
            }
        }
    }
    total
}

/// Higher Jacobi identities on all basis tuples of `n <= n_max` entries,
/// plus the anchor conditions `rho d = 0` and `rho {x,y} = [rho x, rho y]`.
/// Results are reported by the arity `n - 1` of the matching `[Q,Q]` component.
pub fn bt_verify_jacobi(bt: &BracketTable, n_max: usize) -> ArityReport {
    let ring = &bt.ring;
    let mut arities = Vec::new();
    for n in 1..=n_max {
        let mut verdict = Verdict::Pass;
        for ids in basis_tuples(ring, n) {
            let j = jacobiator(bt, &ids);
            if !j.is_empty() {
                verdict = Verdict::Fail {
                    location: ids.iter().map(|&a| section_name(ring, a)).collect::<Vec<_>>().join(","),
                    residue: bt.fmt_section(&j),
                };
                break;
            }
        }
        if verdict.passed() && n == 2 {
            // rho(d x) = 0 on level 2
            for b in ring.level_ids(2) {
                let v = bt.anchor_section(&bt.basis(&[b]));
                if v.iter().any(|p| !p.is_zero()) {
                    verdict = Verdict::Fail { location: format!("rho(d {})", section_name(ring, b)), residue: fmt_vf(ring, &v) };
                    break;
                }
            }
        }
        if verdict.passed() && n == 3 {
            'pairs: for a in ring.level_ids(1) {
                for b in ring.level_ids(1) {
                    if b <= a {
                        continue;
                    }
                    let lhs = bt.anchor_section(&bt.basis(&[a, b]));
                    let rhs = vf_bracket(&bt.anchor[ring.gens[a].index], &bt.anchor[ring.gens[b].index]);
                    let diff: Vec<Poly> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
                    if diff.iter().any(|p| !p.is_zero()) {
                        verdict = Verdict::Fail {
                            location: format!("rho{{{},{}}}", section_name(ring, a), section_name(ring, b)),
                            residue: fmt_vf(ring, &diff),
                        };
                        break 'pairs;
                    }
                }
            }
        }
        arities.push((n as i64 - 1, verdict));
    }
    ArityReport { arities }
}

pub fn fmt_vf(ring: &GRing, v: &[Poly]) -> String {
    let parts: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(i, p)| format!("({})*d/d{}", p.fmt_with(&ring.var_names), ring.var_names[i]))
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

// --- root map -----------------------------------------------------------------

/// `rt(W) = (id ⊗ rho)` of the level-1 component of a vertical field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Root {
    /// `W(xi_a)` for every level-1 generator `a`: coefficients against the
    /// foliation generators.
    pub coefficients: Vec<GPoly>,
    /// Per fiber monomial, the resulting vector field.
    pub fields: BTreeMap<FMono, Vec<Poly>>,
}

impl Root {
    pub fn is_zero(&self) -> bool {
        self.fields.is_empty()
    }
}

pub fn q_root(w: &GDerivation, aq: &AnchoredQ) -> Root {
    let ring = &aq.ring;
    let n = ring.nvars();
    let mut coefficients = Vec::new();
    let mut fields: BTreeMap<FMono, Vec<Poly>> = BTreeMap::new();
    for id in ring.level_ids(1) {
        let val = &w.on_gens[id];
        coefficients.push(val.clone());
        let col = &aq.resolution.anchor[ring.gens[id].index];
        for (m, c) in &val.terms {
            let e = fields.entry(m.clone()).or_insert_with(|| vec![Poly::zero(n); n]);
            for (o, p) in e.iter_mut().zip(col) {
                o.add_product(c, p);
            }
        }
    }
    fields.retain(|_, v| v.iter().any(|p| !p.is_zero()));
    Root { coefficients, fields }
}

/// `[X, Y]_L = [[Q, X], Y]` on vertical fields of degree -1.
pub fn q_leibniz_bracket(aq: &AnchoredQ, x: &GDerivation, y: &GDerivation) -> GDerivation {
    let ring = &aq.ring;
    commutator(ring, &commutator(ring, &aq.q, x), y)
}

// --- morphisms ----------------------------------------------------------------

/// Algebra morphism `Phi: S(E_dst*) -> S(E_src*)` given by the images of the
/// dst generators. The arity-`k` part of an image is the Taylor coefficient
/// `phi_k` (fiber length `k + 1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorphismData {
    pub images: Vec<GPoly>,
}

impl MorphismData {
    /// Linear part from a chain map `src -> dst`.
    pub fn from_chain_map(phi: &ChainMap, src: &AnchoredQ, dst: &AnchoredQ) -> Self {
        let mut images = vec![src.ring.zero(); dst.ring.ngens()];
        for level in 1..=dst.ring.depth() {
            for (a, col) in phi.level(level).iter().enumerate() {
                let sa = src.ring.id(level, a);
                for (c, p) in col.iter().enumerate() {
                    let dc = dst.ring.id(level, c);
                    images[dc].add_term(FMono(vec![sa]), p.clone());
                }
            }
        }
        MorphismData { images }
    }

    pub fn taylor(&self, k: usize) -> Vec<GPoly> {
        self.images.iter().map(|p| p.arity_part(k + 1)).collect()
    }

    pub fn apply(&self, src: &GRing, f: &GPoly) -> GPoly {
        let mut out = src.zero();
        for (m, c) in &f.terms {
            let mut t = src.scalar(c.clone());
            for &g in &m.0 {
                t = src.mul(&t, &self.images[g]);
                if t.is_zero() {
                    break;
                }
            }
            out.add_assign(&t);
        }
        out
    }
}

/// Residue `Phi(Q_dst g) - Q_src(Phi g)` on every dst base variable and
/// generator, reported by arity.
pub fn q_verify_morphism(phi: &MorphismData, src: &AnchoredQ, dst: &AnchoredQ, max_arity: i64) -> ArityReport {
    let mut residues: BTreeMap<i64, (String, GPoly)> = BTreeMap::new();
    let sr = &src.ring;
    // arity = fiber length on a base variable, fiber length - 1 on a generator
    let mut record = |name: String, r: GPoly, shift: i64| {
        for (m, c) in &r.terms {
            let k = m.len() as i64 - shift;
            residues.entry(k).or_insert_with(|| {
                let mut g = sr.zero();
                g.add_term(m.clone(), c.clone());
                (name.clone(), g)
            });
        }
    };
    for i in 0..dst.ring.nvars() {
        let lhs = phi.apply(sr, &dst.q.on_vars[i]);
        let rhs = src.q.on_vars[i].clone();
        record(dst.ring.var_names[i].clone(), lhs.sub(&rhs), 0);
    }
    for g in 0..dst.ring.ngens() {
        let lhs = phi.apply(sr, &dst.q.on_gens[g]);
        let rhs = src.q.apply(sr, &phi.images[g]);
        record(dst.ring.gens[g].name.clone(), lhs.sub(&rhs), 1);
    }
    let arities = (0..=max_arity)
        .map(|k| {
            let v = match residues.get(&k) {
                None => Verdict::Pass,
                Some((name, r)) => Verdict::Fail { location: name.clone(), residue: sr.fmt(r) },
            };
            (k, v)
        })
        .collect();
    ArityReport { arities }
}
