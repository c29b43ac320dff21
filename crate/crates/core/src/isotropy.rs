//! Isotropy data at a rational point: the fiber complex, its cohomology, the
//! isotropy Lie infinity-algebra and the Chevalley-Eilenberg 3-class that
//! obstructs a Lie algebroid of minimal rank.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::graded::GRing;
use crate::linalg::{column_echelon_basis, QMatrix};
use crate::poly::{fmt_rational, Poly, Q};
use crate::qfield::{basis_tuples, brackets_from_q, bt_verify_jacobi, unshuffles, AnchoredQ, BracketTable, Section};
use crate::resolution::{is_minimal_at, GeomResolution, PointEval};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsoError {
    #[error("point has {found} coordinates, expected {expected}")]
    BadPoint { expected: usize, found: usize },
    #[error("resolution is not minimal at the point: d({level}) does not vanish")]
    NotMinimalAt { level: usize },
    #[error("bracket of kernel elements leaves ker rho(m): {detail}")]
    NotClosed { detail: String },
    #[error("higher Jacobi identity fails on the isotropy algebra at arity {arity}: {detail}")]
    JacobiFailed { arity: i64, detail: String },
    #[error("Chevalley-Eilenberg check failed: {detail}")]
    CocycleCheckFailed { detail: String },
}

/// The complex `E_{-d}(m) -> ... -> E_{-1}(m) -> T_m M` over `Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberComplex {
    pub point: Vec<Q>,
    pub anchor: QMatrix,
    /// `diffs[i - 2]` is `d(i)(m)`.
    pub diffs: Vec<QMatrix>,
    pub dims: Vec<usize>,
}

impl FiberComplex {
    pub fn d(&self, i: usize) -> &QMatrix {
        &self.diffs[i - 2]
    }

    /// Consecutive composites vanish.
    pub fn is_complex(&self) -> bool {
        let mut ok = self.diffs.first().is_none_or(|d| self.anchor.mul(d).is_zero());
        for w in self.diffs.windows(2) {
            ok &= w[0].mul(&w[1]).is_zero();
        }
        ok
    }
}

fn check_point(n: usize, m: &[Q]) -> Result<(), IsoError> {
    if m.len() != n {
        return Err(IsoError::BadPoint { expected: n, found: m.len() });
    }
    Ok(())
}

pub fn iso_fiber_complex(res: &impl PointEval, m: &[Q]) -> Result<FiberComplex, IsoError> {
    check_point(res.nvars_at(), m)?;
    let dims = res.ranks_at();
    let diffs = (2..=dims.len()).map(|i| res.d_at(i, m)).collect();
    Ok(FiberComplex { point: m.to_vec(), anchor: res.anchor_at(m), diffs, dims })
}

/// `dim H^{-i}` keyed by `-i`.
pub fn iso_cohomology_dims(res: &impl PointEval, m: &[Q]) -> Result<BTreeMap<i64, usize>, IsoError> {
    let fc = iso_fiber_complex(res, m)?;
    let mut out = BTreeMap::new();
    for i in 1..=fc.dims.len() {
        let out_map = if i == 1 { &fc.anchor } else { fc.d(i) };
        let ker = fc.dims[i - 1] - out_map.rank();
        let im = if i < fc.dims.len() { fc.d(i + 1).rank() } else { 0 };
        out.insert(-(i as i64), ker - im);
    }
    Ok(out)
}

/// A finite-dimensional Lie infinity-algebra given by brackets on basis
/// tuples. Level `i` sits in degree `-i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsotropyLinfty {
    pub point: Vec<Q>,
    /// `dim H^{-i}` keyed by `-i`.
    pub dims: BTreeMap<i64, usize>,
    /// Representatives of the basis elements as fiber vectors of `E_{-i}(m)`.
    pub basis: Vec<Vec<Vec<Q>>>,
    /// Brackets of arity `>= 2` (the 1-ary bracket is zero).
    pub table: BracketTable,
    /// True when the brackets were obtained by homotopy transfer from a
    /// non-minimal fiber.
    pub transferred: bool,
}

impl IsotropyLinfty {
    pub fn ring(&self) -> &GRing {
        &self.table.ring
    }

    /// Bracket of basis elements with rational coefficients.
    pub fn bracket(&self, ids: &[usize]) -> BTreeMap<usize, Q> {
        self.table.basis(ids).into_iter().map(|(k, p)| (k, p.constant_term())).collect()
    }

    /// Nonzero brackets of arity `k`.
    pub fn constants(&self, k: usize) -> Vec<(Vec<usize>, BTreeMap<usize, Q>)> {
        self.table
            .brackets
            .iter()
            .filter(|(key, _)| key.len() == k)
            .map(|(key, v)| (key.clone(), v.iter().map(|(i, p)| (*i, p.constant_term())).collect()))
            .collect()
    }

    pub fn arity_is_zero(&self, k: usize) -> bool {
        self.constants(k).is_empty()
    }

    pub fn name(&self, id: usize) -> String {
        crate::qfield::section_name(&self.table.ring, id)
    }

    pub fn fmt_bracket(&self, key: &[usize], v: &BTreeMap<usize, Q>) -> String {
        let lhs = key.iter().map(|&i| self.name(i)).collect::<Vec<_>>().join(", ");
        format!("{{{}}}_{} = {}", lhs, key.len(), fmt_vector(v, |i| self.name(i)))
    }
}

pub fn fmt_vector(v: &BTreeMap<usize, Q>, name: impl Fn(usize) -> String) -> String {
    if v.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (i, c)) in v.iter().enumerate() {
        let neg = c < &Q::zero();
        let a = if neg { -c.clone() } else { c.clone() };
        if k == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        if !a.is_one() {
            s.push_str(&fmt_rational(&a));
            s.push('*');
        }
        s.push_str(&name(*i));
    }
    s
}

fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = Q::one();
    v
}

fn constant_section(v: &BTreeMap<usize, Q>) -> Section {
    v.iter().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (*i, Poly::constant(0, c.clone()))).collect()
}

fn section_values(s: &Section) -> BTreeMap<usize, Q> {
    s.iter().map(|(i, p)| (*i, p.constant_term())).filter(|(_, c)| !c.is_zero()).collect()
}

fn add_into(acc: &mut BTreeMap<usize, Q>, v: &BTreeMap<usize, Q>, c: &Q) {
    for (i, x) in v {
        let e = acc.entry(*i).or_insert_with(Q::zero);
        *e += x * c;
        if e.is_zero() {
            acc.remove(i);
        }
    }
}

/// The fiber Lie infinity-algebra `ker rho(m) + E_{-2}(m) + ...` with the
/// brackets of `q` evaluated at `m`.
struct FiberAlgebra {
    table: BracketTable,
    basis: Vec<Vec<Vec<Q>>>,
    depth: usize,
}

fn fiber_algebra(aq: &AnchoredQ, m: &[Q]) -> Result<FiberAlgebra, IsoError> {
    let res = &aq.resolution;
    check_point(res.nvars(), m)?;
    let ring = &aq.ring;
    let depth = ring.depth();
    let bt = brackets_from_q(aq);
    let at_m: BTreeMap<Vec<usize>, BTreeMap<usize, Q>> = bt
        .brackets
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().map(|(i, p)| (*i, p.eval(m))).filter(|(_, c)| !c.is_zero()).collect()))
        .collect();
    // basis per level: ker rho(m) on level 1, full fiber above
    let rho = res.anchor_at(m);
    let ker = column_echelon_basis(&rho.kernel(), res.rank(1));
    let mut basis = vec![ker];
    for i in 2..=depth {
        basis.push((0..res.rank(i)).map(|a| unit(res.rank(i), a)).collect());
    }
    let names: Vec<Vec<String>> = basis
        .iter()
        .enumerate()
        .map(|(l, vs)| {
            vs.iter()
                .enumerate()
                .map(|(j, v)| {
                    let nz: Vec<usize> = (0..v.len()).filter(|&t| !v[t].is_zero()).collect();
                    if nz.len() == 1 && v[nz[0]].is_one() {
                        res.section_names[l][nz[0]].clone()
                    } else {
                        format!("k{}", j + 1)
                    }
                })
                .collect()
        })
        .collect();
    let fring = GRing::with_names(Vec::new(), names);
    let mut table = BracketTable::new(fring.clone(), vec![Vec::new(); basis[0].len()]);
    // expresses a level-l fiber vector in the chosen basis
    let level1 = QMatrix::from_rows(basis[0].clone()).transpose();
    let express = |l: usize, v: &[Q]| -> Result<BTreeMap<usize, Q>, IsoError> {
        if l == 1 {
            if basis[0].is_empty() {
                return if v.iter().all(|c| c.is_zero()) {
                    Ok(BTreeMap::new())
                } else {
                    Err(IsoError::NotClosed { detail: "ker rho(m) is zero".into() })
                };
            }
            let x = level1.solve(v).map_err(|_| IsoError::NotClosed { detail: format!("{v:?}") })?;
            Ok(x.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (fring.id(1, i), c)).collect())
        } else {
            Ok(v.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (fring.id(l, i), c.clone())).collect())
        }
    };
    for k in 1..=depth + 1 {
        for key in basis_tuples(&fring, k) {
            let level: usize = key.iter().map(|&g| fring.gens[g].level).sum::<usize>() - 1;
            if level == 0 && k > 1 || level > depth {
                continue;
            }
            if k == 1 && fring.gens[key[0]].level == 1 {
                continue;
            }
            // expand each argument over resolution ids
            let expansions: Vec<Vec<(usize, Q)>> = key
                .iter()
                .map(|&g| {
                    let gen = &fring.gens[g];
                    basis[gen.level - 1][gen.index]
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.is_zero())
                        .map(|(a, c)| (ring.id(gen.level, a), c.clone()))
                        .collect()
                })
                .collect();
            let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
            let mut idx = vec![0usize; k];
            'outer: loop {
                let ids: Vec<usize> = (0..k).map(|t| expansions[t][idx[t]].0).collect();
                if let Some((sorted, neg)) = crate::qfield::sort_with_sign(ring, &ids) {
                    if let Some(val) = at_m.get(&sorted) {
                        let mut c: Q = (0..k).map(|t| expansions[t][idx[t]].1.clone()).product();
                        if neg {
                            c = -c;
                        }
                        add_into(&mut acc, val, &c);
                    }
                }
                let mut t = 0;
                loop {
                    if t == k {
                        break 'outer;
                    }
                    idx[t] += 1;
                    if idx[t] < expansions[t].len() {
                        break;
                    }
                    idx[t] = 0;
                    t += 1;
                }
            }
            if acc.is_empty() {
                continue;
            }
            // acc is over resolution ids of one level
            let mut v = vec![Q::zero(); res.rank(level)];
            for (id, c) in &acc {
                v[ring.gens[*id].index] = c.clone();
            }
            let e = express(level, &v)?;
            table.set(&key, constant_section(&e));
        }
    }
    Ok(FiberAlgebra { table, basis, depth })
}

fn jacobi_or_err(table: &BracketTable, depth: usize) -> Result<(), IsoError> {
    let rep = bt_verify_jacobi(table, depth + 2);
    if let Some((k, v)) = rep.first_failure() {
        return Err(IsoError::JacobiFailed { arity: k, detail: format!("{v:?}") });
    }
    Ok(())
}

/// Isotropy Lie infinity-algebra at a point where the resolution is minimal.
pub fn iso_linfty(aq: &AnchoredQ, m: &[Q]) -> Result<IsotropyLinfty, IsoError> {
    check_point(aq.resolution.nvars(), m)?;
    if let Some(level) = is_minimal_at(&aq.resolution, m) {
        return Err(IsoError::NotMinimalAt { level });
    }
    let fa = fiber_algebra(aq, m)?;
    jacobi_or_err(&fa.table, fa.depth)?;
    let dims = iso_cohomology_dims(&aq.resolution, m)?;
    Ok(IsotropyLinfty { point: m.to_vec(), dims, basis: fa.basis, table: fa.table, transferred: false })
}

/// Isotropy Lie infinity-algebra at any point: the fiber algebra is
/// transferred to its cohomology along a contraction when `d(m)` is nonzero.
pub fn iso_linfty_any(aq: &AnchoredQ, m: &[Q]) -> Result<IsotropyLinfty, IsoError> {
    match iso_linfty(aq, m) {
        Err(IsoError::NotMinimalAt { .. }) => {}
        other => return other,
    }
    let fa = fiber_algebra(aq, m)?;
    let tr = transfer(&fa);
    jacobi_or_err(&tr.table, fa.depth)?;
    let dims = iso_cohomology_dims(&aq.resolution, m)?;
    // representatives: harmonic vectors pushed to fiber coordinates
    let basis = tr
        .harmonic
        .iter()
        .enumerate()
        .map(|(l, hs)| {
            hs.iter()
                .map(|h| {
                    let dim = if l == 0 { aq.resolution.rank(1) } else { aq.resolution.rank(l + 1) };
                    let mut v = vec![Q::zero(); dim];
                    for (t, c) in h.iter().enumerate() {
                        for (a, x) in fa.basis[l][t].iter().enumerate() {
                            v[a] += c * x;
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    Ok(IsotropyLinfty { point: m.to_vec(), dims, basis, table: tr.table, transferred: true })
}

// --- homotopy transfer --------------------------------------------------------

/// Data of a contraction `(i, p, h)` of a fiber algebra onto its cohomology
/// together with the transferred brackets and the morphism components `f_n`.
pub struct Transfer {
    pub table: BracketTable,
    /// Harmonic representatives per level, in fiber-algebra coordinates.
    pub harmonic: Vec<Vec<Vec<Q>>>,
    /// `f_n` on sorted tuples of the cohomology basis, as fiber-algebra vectors.
    pub morphism: BTreeMap<Vec<usize>, BTreeMap<usize, Q>>,
    source: BracketTable,
}

/// Splitting `L_i = B_i + H_i + C_i` with coordinates.
struct LevelSplit {
    /// `T` columns: `B` basis, then `H`, then `C`.
    t: QMatrix,
    nb: usize,
    nh: usize,
    /// For each `B` basis vector, the fiber id of its `C` preimage at level `i+1`.
    preimage: Vec<usize>,
}

fn unary_matrix(fa: &BracketTable, i: usize) -> QMatrix {
    // d: level i+1 -> level i
    let ring = &fa.ring;
    let mut mat = QMatrix::zeros(ring.rank(i), ring.rank(i + 1));
    for b in ring.level_ids(i + 1) {
        for (c, p) in fa.basis(&[b]) {
            mat.set(ring.gens[c].index, ring.gens[b].index, p.constant_term());
        }
    }
    mat
}

fn split_levels(fa: &BracketTable, depth: usize) -> Vec<LevelSplit> {
    let ring = &fa.ring;
    // pivots of d: level i+1 -> i give the complements C_{i+1}
    let mut pivots: Vec<Vec<usize>> = vec![Vec::new(); depth + 2];
    let mut dmats = Vec::new();
    for i in 1..=depth {
        let d = unary_matrix(fa, i);
        let mut r = d.clone();
        pivots[i + 1] = r.rref();
        dmats.push(d);
    }
    let mut out = Vec::new();
    for i in 1..=depth {
        let dim = ring.rank(i);
        let d = &dmats[i - 1];
        let bvecs: Vec<Vec<Q>> = pivots[i + 1].iter().map(|&p| d.column(p)).collect();
        let preimage: Vec<usize> = pivots[i + 1].iter().map(|&p| ring.id(i + 1, p)).collect();
        let cvecs: Vec<Vec<Q>> = pivots[i].iter().map(|&p| unit(dim, p)).collect();
        let z = if i == 1 { (0..dim).map(|a| unit(dim, a)).collect() } else { dmats[i - 2].kernel() };
        // extend B to a basis of Z
        let mut hvecs: Vec<Vec<Q>> = Vec::new();
        let mut current = bvecs.clone();
        for v in z {
            let mut trial = current.clone();
            trial.push(v.clone());
            if QMatrix::from_rows(trial.clone()).rank() == trial.len() {
                current = trial;
                hvecs.push(v);
            }
        }
        let cols: Vec<Vec<Q>> = bvecs.iter().chain(&hvecs).chain(&cvecs).cloned().collect();
        assert_eq!(cols.len(), dim, "splitting must be a basis");
        let t = if dim == 0 { QMatrix::zeros(0, 0) } else { QMatrix::from_rows(cols).transpose() };
        out.push(LevelSplit { t, nb: bvecs.len(), nh: hvecs.len(), preimage });
    }
    out
}

fn coords(split: &LevelSplit, v: &[Q]) -> Vec<Q> {
    split.t.solve(v).expect("splitting basis is invertible")
}

/// Set partitions of `0..n` into exactly `k` blocks, blocks ordered by their
/// smallest element.
pub fn set_partitions(n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            if cur.len() == k {
                out.push(cur.clone());
            }
            return;
        }
        // remaining elements must be able to open the missing blocks
        if cur.len() + (n - i) < k {
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, k, cur, out);
            cur[b].pop();
        }
        if cur.len() < k {
            cur.push(vec![i]);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Koszul sign of listing `ids` block after block.
fn partition_sign(ring: &GRing, ids: &[usize], blocks: &[Vec<usize>]) -> bool {
    let order: Vec<usize> = blocks.iter().flatten().copied().collect();
    let mut neg = false;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            if order[a] > order[b] && ring.is_odd(ids[order[a]]) && ring.is_odd(ids[order[b]]) {
                neg = !neg;
            }
        }
    }
    neg
}

/// `f` on a tuple of cohomology basis elements (any order).
fn eval_f(
    hring: &GRing,
    f: &BTreeMap<Vec<usize>, BTreeMap<usize, Q>>,
    ids: &[usize],
) -> BTreeMap<usize, Q> {
    match crate::qfield::sort_with_sign(hring, ids) {
        None => BTreeMap::new(),
        Some((key, neg)) => {
            let mut v = f.get(&key).cloned().unwrap_or_default();
            if neg {
                for c in v.values_mut() {
                    *c = -c.clone();
                }
            }
            v
        }
    }
}

/// `sum over partitions into k >= kmin blocks of eps * l_k(f(B_1), ..., f(B_k))`.
fn tree_sum(
    src: &BracketTable,
    hring: &GRing,
    f: &BTreeMap<Vec<usize>, BTreeMap<usize, Q>>,
    ids: &[usize],
    kmin: usize,
) -> BTreeMap<usize, Q> {
    let n = ids.len();
    let mut acc = BTreeMap::new();
    for k in kmin.max(1)..=n {
        for blocks in set_partitions(n, k) {
            let args: Vec<Section> = blocks
                .iter()
                .map(|b| {
                    let sub: Vec<usize> = b.iter().map(|&p| ids[p]).collect();
                    constant_section(&eval_f(hring, f, &sub))
                })
                .collect();
            if args.iter().any(|a| a.is_empty()) {
                continue;
            }
            let val = section_values(&src.eval(&args));
            let sign = if partition_sign(hring, ids, &blocks) { -Q::one() } else { Q::one() };
            add_into(&mut acc, &val, &sign);
        }
    }
    acc
}

/// Homotopy transfer of a fiber algebra onto its cohomology.
fn transfer(fa: &FiberAlgebra) -> Transfer {
    let src = &fa.table;
    let ring = &src.ring;
    let depth = fa.depth;
    let splits = split_levels(src, depth);
    let harmonic: Vec<Vec<Vec<Q>>> = splits
        .iter()
        .map(|s| (s.nb..s.nb + s.nh).map(|j| s.t.column(j)).collect())
        .collect();
    let names: Vec<Vec<String>> = harmonic
        .iter()
        .enumerate()
        .map(|(l, hs)| {
            hs.iter()
                .enumerate()
                .map(|(j, v)| {
                    let nz: Vec<usize> = (0..v.len()).filter(|&t| !v[t].is_zero()).collect();
                    if nz.len() == 1 && v[nz[0]].is_one() {
                        crate::qfield::section_name(ring, ring.id(l + 1, nz[0]))
                    } else {
                        format!("h{}_{}", l + 1, j + 1)
                    }
                })
                .collect()
        })
        .collect();
    let hring = GRing::with_names(Vec::new(), names);
    let mut table = BracketTable::new(hring.clone(), vec![Vec::new(); hring.rank(1)]);
    let mut f: BTreeMap<Vec<usize>, BTreeMap<usize, Q>> = BTreeMap::new();
    for g in 0..hring.ngens() {
        let gen = &hring.gens[g];
        let v = &harmonic[gen.level - 1][gen.index];
        let img = v
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(a, c)| (ring.id(gen.level, a), c.clone()))
            .collect();
        f.insert(vec![g], img);
    }
    // split a level-l fiber vector (by ids) into (p, h) parts
    let decompose = |v: &BTreeMap<usize, Q>| -> (BTreeMap<usize, Q>, BTreeMap<usize, Q>) {
        let mut p = BTreeMap::new();
        let mut h = BTreeMap::new();
        let Some((&first, _)) = v.iter().next() else { return (p, h) };
        let l = ring.gens[first].level;
        let s = &splits[l - 1];
        let mut dense = vec![Q::zero(); ring.rank(l)];
        for (id, c) in v {
            dense[ring.gens[*id].index] = c.clone();
        }
        let x = coords(s, &dense);
        for j in 0..s.nh {
            if !x[s.nb + j].is_zero() {
                p.insert(hring.id(l, j), x[s.nb + j].clone());
            }
        }
        for j in 0..s.nb {
            if !x[j].is_zero() {
                h.insert(s.preimage[j], x[j].clone() * Q::from_integer(TRANSFER_H_SIGN.into()));
            }
        }
        (p, h)
    };
    for n in 2..=depth + 1 {
        for key in basis_tuples(&hring, n) {
            let level: usize = key.iter().map(|&g| hring.gens[g].level).sum();
            if level - 1 > depth {
                continue;
            }
            let s = tree_sum(src, &hring, &f, &key, 2);
            let (p, h) = decompose(&s);
            if !p.is_empty() {
                table.set(&key, constant_section(&p));
            }
            if !h.is_empty() && level <= depth {
                f.insert(key, h);
            }
        }
    }
    Transfer { table, harmonic, morphism: f, source: src.clone() }
}

/// Sign in front of the homotopy `h` with `d h + h d = 1 - i p`.
const TRANSFER_H_SIGN: i32 = -1;

impl Transfer {
    /// Checks that `f` is a Lie infinity morphism from the transferred algebra
    /// to the fiber algebra on all basis tuples of size `<= n_max`.
    pub fn check_morphism(&self, n_max: usize) -> Result<(), String> {
        let hring = &self.table.ring;
        for n in 1..=n_max {
            for key in basis_tuples(hring, n) {
                let lhs = tree_sum(&self.source, hring, &self.morphism, &key, 1);
                // sum over unshuffles of f(l'(x_S), x_rest)
                let mut rhs = BTreeMap::new();
                for i in 2..=n {
                    for pick in unshuffles(n, i) {
                        let inner_ids: Vec<usize> = pick.iter().map(|&p| key[p]).collect();
                        let inner = self.table.basis(&inner_ids);
                        if inner.is_empty() {
                            continue;
                        }
                        let rest: Vec<usize> = (0..n).filter(|p| !pick.contains(p)).map(|p| key[p]).collect();
                        let blocks = vec![pick.clone(), (0..n).filter(|p| !pick.contains(p)).collect::<Vec<_>>()];
                        let sign = if partition_sign(hring, &key, &blocks) { -Q::one() } else { Q::one() };
                        for (g, c) in &inner {
                            let mut ids = vec![*g];
                            ids.extend(&rest);
                            let v = eval_f(hring, &self.morphism, &ids);
                            add_into(&mut rhs, &v, &(c.constant_term() * &sign));
                        }
                    }
                }
                if lhs != rhs {
                    return Err(format!("morphism identity fails on {:?}: {:?} vs {:?}", key, lhs, rhs));
                }
            }
        }
        Ok(())
    }
}

/// Transfer data for testing the contraction itself.
pub fn iso_transfer(aq: &AnchoredQ, m: &[Q]) -> Result<Transfer, IsoError> {
    let fa = fiber_algebra(aq, m)?;
    Ok(transfer(&fa))
}

// --- Chevalley-Eilenberg ------------------------------------------------------

/// `g = H^{-1}` with its bracket, `W = H^{-2}` with the action `x.w = {x,w}_2`,
/// and the 3-cocycle `c = {.,.,.}_3` restricted to `wedge^3 g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CEData {
    pub g_names: Vec<String>,
    pub w_names: Vec<String>,
    /// `bracket[a][b]` in `g` coordinates.
    pub bracket: Vec<Vec<Vec<Q>>>,
    /// `action[a][w]` in `W` coordinates.
    pub action: Vec<Vec<Vec<Q>>>,
    /// `c(a, b, c)` for `a < b < c`.
    pub cocycle: BTreeMap<(usize, usize, usize), Vec<Q>>,
}

impl CEData {
    pub fn g_dim(&self) -> usize {
        self.g_names.len()
    }

    pub fn w_dim(&self) -> usize {
        self.w_names.len()
    }

    pub fn cocycle_is_zero(&self) -> bool {
        self.cocycle.values().all(|v| v.iter().all(|c| c.is_zero()))
    }

    fn c_at(&self, idx: [usize; 3]) -> Vec<Q> {
        alt_eval(&self.cocycle_map(), &idx, self.w_dim())
    }

    fn cocycle_map(&self) -> BTreeMap<Vec<usize>, Vec<Q>> {
        self.cocycle.iter().map(|(&(a, b, c), v)| (vec![a, b, c], v.clone())).collect()
    }

    fn act(&self, a: usize, w: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.w_dim()];
        for (j, c) in w.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (t, x) in self.action[a][j].iter().enumerate() {
                out[t] += c * x;
            }
        }
        out
    }

    /// `(delta c)(x0..x3)` on basis elements.
    pub fn delta3(&self, x: [usize; 4]) -> Vec<Q> {
        let wd = self.w_dim();
        let mut out = vec![Q::zero(); wd];
        let sgn = |e: usize| if e.is_multiple_of(2) { Q::one() } else { -Q::one() };
        for i in 0..4 {
            let rest: Vec<usize> = (0..4).filter(|&t| t != i).map(|t| x[t]).collect();
            let v = self.act(x[i], &self.c_at([rest[0], rest[1], rest[2]]));
            axpy(&mut out, &sgn(i), &v);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let rest: Vec<usize> = (0..4).filter(|&t| t != i && t != j).map(|t| x[t]).collect();
                for (g, c) in self.bracket[x[i]][x[j]].iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let v = self.c_at([g, rest[0], rest[1]]);
                    axpy(&mut out, &(sgn(i + j) * c), &v);
                }
            }
        }
        out
    }

    /// `(delta theta)(x0, x1, x2)` for `theta` given on sorted pairs.
    pub fn delta2(&self, theta: &BTreeMap<Vec<usize>, Vec<Q>>, x: [usize; 3]) -> Vec<Q> {
        let wd = self.w_dim();
        let mut out = vec![Q::zero(); wd];
        let sgn = |e: usize| if e.is_multiple_of(2) { Q::one() } else { -Q::one() };
        for i in 0..3 {
            let rest: Vec<usize> = (0..3).filter(|&t| t != i).map(|t| x[t]).collect();
            let v = self.act(x[i], &alt_eval(theta, &rest, wd));
            axpy(&mut out, &sgn(i), &v);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let k = 3 - i - j;
                for (g, c) in self.bracket[x[i]][x[j]].iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let v = alt_eval(theta, &[g, x[k]], wd);
                    axpy(&mut out, &(sgn(i + j) * c), &v);
                }
            }
        }
        out
    }

    /// Action property `[x,y].w = x.(y.w) - y.(x.w)` on basis elements.
    pub fn is_action(&self) -> bool {
        let wd = self.w_dim();
        for a in 0..self.g_dim() {
            for b in 0..self.g_dim() {
                for w in 0..wd {
                    let e = unit(wd, w);
                    let mut lhs = vec![Q::zero(); wd];
                    for (g, c) in self.bracket[a][b].iter().enumerate() {
                        axpy(&mut lhs, c, &self.act(g, &e));
                    }
                    let mut rhs = self.act(a, &self.act(b, &e));
                    axpy(&mut rhs, &-Q::one(), &self.act(b, &self.act(a, &e)));
                    if lhs != rhs {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn axpy(out: &mut [Q], c: &Q, v: &[Q]) {
    for (o, x) in out.iter_mut().zip(v) {
        *o += c * x;
    }
}

/// Alternating multilinear map given on strictly increasing keys.
fn alt_eval(map: &BTreeMap<Vec<usize>, Vec<Q>>, idx: &[usize], dim: usize) -> Vec<Q> {
    let mut v = idx.to_vec();
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
        return vec![Q::zero(); dim];
    }
    match map.get(&v) {
        None => vec![Q::zero(); dim],
        Some(x) => {
            if neg {
                x.iter().map(|c| -c.clone()).collect()
            } else {
                x.clone()
            }
        }
    }
}

pub fn iso_nmrla_cocycle(iso: &IsotropyLinfty) -> Result<CEData, IsoError> {
    let ring = iso.ring();
    let gd = ring.rank(1);
    let wd = ring.rank(2);
    let g_names = (0..gd).map(|a| iso.name(ring.id(1, a))).collect();
    let w_names = (0..wd).map(|a| iso.name(ring.id(2, a))).collect();
    let to_dense = |v: &BTreeMap<usize, Q>, level: usize, dim: usize| -> Vec<Q> {
        let mut out = vec![Q::zero(); dim];
        for (id, c) in v {
            if ring.gens[*id].level == level {
                out[ring.gens[*id].index] = c.clone();
            }
        }
        out
    };
    let bracket = (0..gd)
        .map(|a| (0..gd).map(|b| to_dense(&iso.bracket(&[ring.id(1, a), ring.id(1, b)]), 1, gd)).collect())
        .collect();
    let action = (0..gd)
        .map(|a| (0..wd).map(|w| to_dense(&iso.bracket(&[ring.id(1, a), ring.id(2, w)]), 2, wd)).collect())
        .collect();
    let mut cocycle = BTreeMap::new();
    for a in 0..gd {
        for b in a + 1..gd {
            for c in b + 1..gd {
                let v = to_dense(&iso.bracket(&[ring.id(1, a), ring.id(1, b), ring.id(1, c)]), 2, wd);
                if v.iter().any(|x| !x.is_zero()) {
                    cocycle.insert((a, b, c), v);
                }
            }
        }
    }
    let ce = CEData { g_names, w_names, bracket, action, cocycle };
    if !ce.is_action() {
        return Err(IsoError::CocycleCheckFailed { detail: "2-ary bracket is not a Lie action on H^-2".into() });
    }
    for a in 0..gd {
        for b in a + 1..gd {
            for c in b + 1..gd {
                for d in c + 1..gd {
                    let v = ce.delta3([a, b, c, d]);
                    if v.iter().any(|x| !x.is_zero()) {
                        return Err(IsoError::CocycleCheckFailed {
                            detail: format!("delta c does not vanish on ({a},{b},{c},{d})"),
                        });
                    }
                }
            }
        }
    }
    Ok(ce)
}

/// Result of solving `delta theta = c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassVerdict {
    /// `c` is exact: `theta` on sorted pairs.
    Exact { theta: BTreeMap<(usize, usize), Vec<Q>> },
    /// `c` is not exact: a functional on 3-cochain coordinates that kills
    /// every coboundary but not `c`.
    NotExact { certificate: Vec<((usize, usize, usize), usize, Q)>, pairing: Q },
}

impl ClassVerdict {
    pub fn vanishes(&self) -> bool {
        matches!(self, ClassVerdict::Exact { .. })
    }
}

pub fn iso_ce_class_vanishes(ce: &CEData) -> ClassVerdict {
    let gd = ce.g_dim();
    let wd = ce.w_dim();
    let pairs: Vec<(usize, usize)> = (0..gd).flat_map(|a| (a + 1..gd).map(move |b| (a, b))).collect();
    let triples: Vec<(usize, usize, usize)> =
        (0..gd).flat_map(|a| (a + 1..gd).flat_map(move |b| (b + 1..gd).map(move |c| (a, b, c)))).collect();
    let rows = triples.len() * wd;
    let cols = pairs.len() * wd;
    let mut a = QMatrix::zeros(rows, cols);
    for (pi, &(x, y)) in pairs.iter().enumerate() {
        for w in 0..wd {
            let theta: BTreeMap<Vec<usize>, Vec<Q>> = [(vec![x, y], unit(wd, w))].into_iter().collect();
            for (ti, &(p, q, r)) in triples.iter().enumerate() {
                let v = ce.delta2(&theta, [p, q, r]);
                for (t, c) in v.into_iter().enumerate() {
                    if !c.is_zero() {
                        a.set(ti * wd + t, pi * wd + w, c);
                    }
                }
            }
        }
    }
    let mut b = vec![Q::zero(); rows];
    for (ti, &(p, q, r)) in triples.iter().enumerate() {
        for (t, c) in ce.c_at([p, q, r]).into_iter().enumerate() {
            b[ti * wd + t] = c;
        }
    }
    match a.solve(&b) {
        Ok(x) => {
            let mut theta = BTreeMap::new();
            for (pi, &pair) in pairs.iter().enumerate() {
                let v: Vec<Q> = (0..wd).map(|w| x[pi * wd + w].clone()).collect();
                if v.iter().any(|c| !c.is_zero()) {
                    theta.insert(pair, v);
                }
            }
            ClassVerdict::Exact { theta }
        }
        Err(y) => {
            let pairing = y.iter().zip(&b).map(|(u, v)| u * v).sum();
            let certificate = y
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (triples[i / wd], i % wd, c))
                .collect();
            ClassVerdict::NotExact { certificate, pairing }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankVerdict {
    pub rank: usize,
    pub class_vanishes: bool,
    pub statement: String,
}

/// `r` is the rank of `E_{-1}` of a resolution minimal at the point.
pub fn iso_minimal_rank_verdict(minimal_ranks: &[usize], ce_class: &ClassVerdict) -> RankVerdict {
    let rank = minimal_ranks.first().copied().unwrap_or(0);
    let class_vanishes = ce_class.vanishes();
    let statement = if class_vanishes {
        "inconclusive".to_string()
    } else {
        format!("no Lie algebroid of rank {rank} induces the foliation near the point")
    };
    RankVerdict { rank, class_vanishes, statement }
}

/// Rank of `E_{-1}` after minimalization at `m`.
pub fn minimal_rank_at(res: &GeomResolution, m: &[Q]) -> Result<Vec<usize>, crate::resolution::ResolutionError> {
    Ok(crate::resolution::res_minimal_at(res, m)?.ranks())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buildq::{bq_builtin, bq_universal, Builtin};
    use crate::foliation::{int_point, Foliation};
    use crate::poly::{q, Mono, MonomialOrder};
    use crate::resolution::res_build;

    const ORD: MonomialOrder = MonomialOrder::DegRevLex;

    fn cubic() -> Builtin {
        let phi = Poly::from_terms(4, (0..4).map(|i| {
            let mut e = vec![0; 4];
            e[i] = 3;
            (Mono(e), q(1))
        }));
        Builtin::Koszul { var_names: crate::poly::default_names(4), phi }
    }

    #[test]
    fn set_partition_counts() {
        // Stirling numbers of the second kind
        assert_eq!(set_partitions(4, 2).len(), 7);
        assert_eq!(set_partitions(5, 3).len(), 25);
        assert_eq!(set_partitions(3, 1), vec![vec![vec![0, 1, 2]]]);
    }

    #[test]
    fn sl2_at_origin() {
        let b = bq_builtin(&Builtin::Sl2, ORD).unwrap();
        let o = int_point(&[0, 0]);
        let dims = iso_cohomology_dims(&b.resolution, &o).unwrap();
        assert_eq!(dims, [(-2, 1), (-1, 3)].into_iter().collect());
        let iso = iso_linfty(&b.q, &o).unwrap();
        let (h, e, f) = (0, 1, 2);
        assert_eq!(iso.bracket(&[h, e]), [(e, q(2))].into_iter().collect());
        assert_eq!(iso.bracket(&[h, f]), [(f, q(-2))].into_iter().collect());
        assert_eq!(iso.bracket(&[e, f]), [(h, q(1))].into_iter().collect());
        assert!(iso.arity_is_zero(3));
        for x in 0..3 {
            assert!(iso.bracket(&[x, 3]).is_empty());
        }
        let ce = iso_nmrla_cocycle(&iso).unwrap();
        assert!(ce.cocycle_is_zero());
        assert!(iso_ce_class_vanishes(&ce).vanishes());
    }

    #[test]
    fn sl2_regular_point_is_trivial() {
        let b = bq_builtin(&Builtin::Sl2, ORD).unwrap();
        let m = int_point(&[1, 0]);
        assert!(iso_cohomology_dims(&b.resolution, &m).unwrap().values().all(|&d| d == 0));
        assert!(matches!(iso_linfty(&b.q, &m), Err(IsoError::NotMinimalAt { .. })));
        let iso = iso_linfty_any(&b.q, &m).unwrap();
        assert!(iso.transferred);
        assert_eq!(iso.ring().ngens(), 0);
    }

    #[test]
    fn fiber_complex_is_a_complex() {
        let b = bq_builtin(&Builtin::Sl2, ORD).unwrap();
        let fc = iso_fiber_complex(&b.resolution, &int_point(&[1, 0])).unwrap();
        assert!(fc.is_complex());
        assert_eq!(fc.anchor.rank(), 2);
        assert!(matches!(iso_fiber_complex(&b.resolution, &int_point(&[1])), Err(IsoError::BadPoint { .. })));
    }

    #[test]
    fn koszul_cubic_class_is_nonzero() {
        let b = bq_builtin(&cubic(), ORD).unwrap();
        let o = int_point(&[0, 0, 0, 0]);
        let iso = iso_linfty(&b.q, &o).unwrap();
        assert_eq!(iso.dims, [(-3, 1), (-2, 4), (-1, 6)].into_iter().collect());
        assert!(iso.arity_is_zero(2));
        let ce = iso_nmrla_cocycle(&iso).unwrap();
        assert!(!ce.cocycle_is_zero());
        let v = iso_ce_class_vanishes(&ce);
        match &v {
            ClassVerdict::NotExact { pairing, .. } => assert!(!pairing.is_zero()),
            _ => panic!("class should not vanish"),
        }
        let r = iso_minimal_rank_verdict(&b.resolution.ranks(), &v);
        assert_eq!(r.rank, 6);
        assert!(r.statement.starts_with("no Lie algebroid of rank 6"));
    }

    #[test]
    fn killing_cocycle_is_not_exact() {
        // sl2 with basis h, e, f and the trivial module Q
        let z = vec![q(0); 3];
        let mut bracket = vec![vec![z.clone(); 3]; 3];
        let mut set = |a: usize, b: usize, v: Vec<Q>| {
            bracket[b][a] = v.iter().map(|c| -c.clone()).collect();
            bracket[a][b] = v;
        };
        set(0, 1, vec![q(0), q(2), q(0)]);
        set(0, 2, vec![q(0), q(0), q(-2)]);
        set(1, 2, vec![q(1), q(0), q(0)]);
        // Killing form: <h,h> = 8, <e,f> = 4
        let killing = |a: usize, b: usize| match (a, b) {
            (0, 0) => q(8),
            (1, 2) | (2, 1) => q(4),
            _ => q(0),
        };
        let mut cocycle = BTreeMap::new();
        let v: Q = (0..3).map(|g| bracket[0][1][g].clone() * killing(g, 2)).sum();
        cocycle.insert((0, 1, 2), vec![v]);
        let ce = CEData {
            g_names: vec!["h".into(), "e".into(), "f".into()],
            w_names: vec!["w".into()],
            bracket,
            action: vec![vec![vec![q(0)]]; 3],
            cocycle,
        };
        assert!(ce.is_action());
        assert!(!iso_ce_class_vanishes(&ce).vanishes());
        assert_eq!(iso_minimal_rank_verdict(&[3], &ClassVerdict::Exact { theta: BTreeMap::new() }).statement, "inconclusive");
    }

    fn redundant_sl2() -> (GeomResolution, AnchoredQ) {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let z = Poly::zero(2);
        let gens = vec![vec![x.clone(), -&y], vec![z.clone(), x.clone()], vec![y.clone(), z], vec![x, -&y]];
        let f = Foliation::new(vec!["x".into(), "y".into()], gens).unwrap();
        let res = res_build(&f, 5, ORD).unwrap().resolution;
        let aq = bq_universal(&res, &f, ORD).unwrap();
        (res, aq)
    }

    #[test]
    fn transfer_on_redundant_generators() {
        let (res, aq) = redundant_sl2();
        let o = int_point(&[0, 0]);
        assert!(is_minimal_at(&res, &o).is_some());
        let tr = iso_transfer(&aq, &o).unwrap();
        tr.check_morphism(3).unwrap();
        let iso = iso_linfty_any(&aq, &o).unwrap();
        assert_eq!(iso.dims, [(-2, 1), (-1, 3)].into_iter().collect());
        // the transferred bracket is a 3-dimensional simple Lie algebra
        let ce = iso_nmrla_cocycle(&iso).unwrap();
        let span = QMatrix::from_rows(
            ce.bracket.iter().flat_map(|row| row.iter().cloned()).collect::<Vec<_>>(),
        );
        assert_eq!(span.rank(), 3);
    }
}
