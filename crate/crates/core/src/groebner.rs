//! Gröbner bases for submodules of `Q[x]^r`.
//!
//! Orders are position-over-term: a smaller position index dominates, then the
//! chosen monomial order breaks ties. Lifting and syzygies share one trick:
//! the basis of the augmented module generated by `(g_i | e_i)` in
//! `Q[x]^(r+s)` projects onto a basis of `<g_i>` (the `g` positions dominate),
//! its `e` parts are the transformation, and its elements with vanishing `g`
//! part generate the syzygies.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{MonomialOrder, Mono, Poly, Q};

pub type Column = Vec<Poly>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroebnerError {
    #[error("generator {index} has rank {found}, expected {expected}")]
    RankMismatch { index: usize, expected: usize, found: usize },
    #[error("vector is not in the module; normal form {remainder:?}")]
    NotInModule { remainder: Column },
}

#[derive(Clone, Debug)]
struct Term {
    pos: usize,
    mono: Mono,
    coef: Q,
}

/// Module element as terms sorted in descending order.
#[derive(Clone, Debug)]
struct MElt {
    terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug)]
struct Ord_ {
    ord: MonomialOrder,
}

impl Ord_ {
    fn cmp(&self, a_pos: usize, a: &Mono, b_pos: usize, b: &Mono) -> Ordering {
        match b_pos.cmp(&a_pos) {
            Ordering::Equal => self.ord.cmp(a, b),
            o => o,
        }
    }
}

impl MElt {
    fn from_column(col: &[Poly], offset: usize, o: Ord_) -> MElt {
        let mut terms = Vec::new();
        for (p, poly) in col.iter().enumerate() {
            for (m, c) in poly.terms() {
                terms.push(Term { pos: p + offset, mono: m.clone(), coef: c.clone() });
            }
        }
        terms.sort_by(|a, b| o.cmp(b.pos, &b.mono, a.pos, &a.mono));
        MElt { terms }
    }

    fn to_column(&self, nvars: usize, from: usize, to: usize) -> Column {
        let mut col = vec![Poly::zero(nvars); to - from];
        for t in &self.terms {
            if t.pos >= from && t.pos < to {
                col[t.pos - from].add_term(t.mono.clone(), t.coef.clone());
            }
        }
        col
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn lead(&self) -> &Term {
        &self.terms[0]
    }

    fn make_monic(&mut self) {
        if let Some(t) = self.terms.first() {
            if !t.coef.is_one() {
                let inv = t.coef.recip();
                for t in &mut self.terms {
                    t.coef *= &inv;
                }
            }
        }
    }

    fn has_pos_below(&self, limit: usize) -> bool {
        self.terms.iter().any(|t| t.pos < limit)
    }

    /// `self - c * m * g`
    fn axpy(&self, c: &Q, m: &Mono, g: &MElt, o: Ord_) -> MElt {
        let mut out = Vec::with_capacity(self.terms.len() + g.terms.len());
        let mut a = self.terms.iter().peekable();
        let shifted = g.terms.iter().map(|t| Term { pos: t.pos, mono: t.mono.mul(m), coef: -(c * &t.coef) });
        let mut b = shifted.peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => out.push(a.next().unwrap().clone()),
                (None, Some(_)) => out.push(b.next().unwrap()),
                (Some(x), Some(y)) => match o.cmp(x.pos, &x.mono, y.pos, &y.mono) {
                    Ordering::Greater => out.push(a.next().unwrap().clone()),
                    Ordering::Less => out.push(b.next().unwrap()),
                    Ordering::Equal => {
                        let x = a.next().unwrap();
                        let y = b.next().unwrap();
                        let s = &x.coef + &y.coef;
                        if !s.is_zero() {
                            out.push(Term { pos: x.pos, mono: x.mono.clone(), coef: s });
                        }
                    }
                },
            }
        }
        MElt { terms: out }
    }
}

/// Reduces every term at a position below `limit`; terms at positions
/// `>= limit` are carried along untouched. Returns (remainder below limit, rest).
fn reduce(w: &MElt, basis: &[MElt], limit: usize, o: Ord_) -> (MElt, MElt) {
    let mut w = w.clone();
    let mut rem = Vec::new();
    while let Some(t) = w.terms.first() {
        if t.pos >= limit {
            break;
        }
        let red = basis.iter().find(|g| {
            let l = g.lead();
            l.pos == t.pos && l.mono.divides(&t.mono)
        });
        match red {
            Some(g) => {
                let l = g.lead();
                let c = &t.coef / &l.coef;
                let m = l.mono.quotient_of(&t.mono);
                w = w.axpy(&c, &m, g, o);
            }
            None => {
                rem.push(w.terms.remove(0));
            }
        }
    }
    (MElt { terms: rem }, w)
}

fn spoly(a: &MElt, b: &MElt, o: Ord_) -> MElt {
    let (la, lb) = (a.lead(), b.lead());
    let l = la.mono.lcm(&lb.mono);
    let ma = la.mono.quotient_of(&l);
    let mb = lb.mono.quotient_of(&l);
    let sa = MElt { terms: Vec::new() }.axpy(&-la.coef.recip(), &ma, a, o);
    sa.axpy(&lb.coef.recip(), &mb, b, o)
}

/// Buchberger's algorithm. The product criterion is only valid for ideals,
/// so it is applied when `ideal` is set.
fn buchberger(gens: Vec<MElt>, o: Ord_, ideal: bool) -> Vec<MElt> {
    let mut g: Vec<MElt> = Vec::new();
    let mut pending: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut queue: Vec<MElt> = gens.into_iter().filter(|e| !e.is_zero()).collect();
    // feed inputs one at a time so pairs are only formed with reduced elements
    queue.reverse();
    loop {
        if let Some(next) = queue.pop() {
            let (r, rest) = reduce(&next, &g, usize::MAX, o);
            let mut terms = r.terms;
            terms.extend(rest.terms);
            let mut e = MElt { terms };
            if e.is_zero() {
                continue;
            }
            e.make_monic();
            let idx = g.len();
            for (i, h) in g.iter().enumerate() {
                if h.lead().pos == e.lead().pos {
                    pending.insert((i, idx));
                }
            }
            g.push(e);
            continue;
        }
        // normal selection strategy: smallest lcm
        let pick = pending.iter().copied().min_by(|&(i, j), &(k, l)| {
            let a = g[i].lead().mono.lcm(&g[j].lead().mono);
            let b = g[k].lead().mono.lcm(&g[l].lead().mono);
            o.cmp(g[i].lead().pos, &a, g[k].lead().pos, &b).then((i, j).cmp(&(k, l)))
        });
        let Some((i, j)) = pick else { break };
        pending.remove(&(i, j));
        let (li, lj) = (g[i].lead(), g[j].lead());
        if ideal && li.mono.coprime(&lj.mono) {
            continue;
        }
        let l = li.mono.lcm(&lj.mono);
        let pos = li.pos;
        let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
        let chain = (0..g.len()).any(|k| {
            k != i
                && k != j
                && g[k].lead().pos == pos
                && g[k].lead().mono.divides(&l)
                && !pending.contains(&key(i, k))
                && !pending.contains(&key(j, k))
        });
        if chain {
            continue;
        }
        let s = spoly(&g[i], &g[j], o);
        let (r, rest) = reduce(&s, &g, usize::MAX, o);
        let mut terms = r.terms;
        terms.extend(rest.terms);
        let mut e = MElt { terms };
        if e.is_zero() {
            continue;
        }
        e.make_monic();
        let idx = g.len();
        for (k, h) in g.iter().enumerate() {
            if h.lead().pos == e.lead().pos {
                pending.insert((k, idx));
            }
        }
        g.push(e);
    }
    interreduce(g, o)
}

/// Drops elements with a divisible leading term and tail-reduces the rest.
fn interreduce(g: Vec<MElt>, o: Ord_) -> Vec<MElt> {
    let mut keep: Vec<MElt> = Vec::new();
    for (i, e) in g.iter().enumerate() {
        let le = e.lead();
        let redundant = g.iter().enumerate().any(|(j, f)| {
            let lf = f.lead();
            j != i
                && lf.pos == le.pos
                && lf.mono.divides(&le.mono)
                && (lf.mono != le.mono || j < i)
        });
        if !redundant {
            keep.push(e.clone());
        }
    }
    let mut out = Vec::with_capacity(keep.len());
    for i in 0..keep.len() {
        let head = keep[i].terms[0].clone();
        let tail = MElt { terms: keep[i].terms[1..].to_vec() };
        let others: Vec<MElt> = keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, e)| e.clone()).collect();
        let (r, rest) = reduce(&tail, &others, usize::MAX, o);
        let mut terms = vec![head];
        terms.extend(r.terms);
        terms.extend(rest.terms);
        out.push(MElt { terms });
    }
    out.sort_by(|a, b| {
        let (x, y) = (a.lead(), b.lead());
        o.cmp(x.pos, &x.mono, y.pos, &y.mono)
    });
    out
}

fn check_ranks(gens: &[Column], rank: usize) -> Result<(), GroebnerError> {
    for (i, g) in gens.iter().enumerate() {
        if g.len() != rank {
            return Err(GroebnerError::RankMismatch { index: i, expected: rank, found: g.len() });
        }
    }
    Ok(())
}

/// Reduced Gröbner basis, optionally with the transformation matrix:
/// `elements[k] = sum_i transformation[k][i] * gens[i]`.
#[derive(Clone, Debug)]
pub struct GroebnerBasis {
    pub order: MonomialOrder,
    pub rank: usize,
    pub nvars: usize,
    pub elements: Vec<Column>,
    pub transformation: Option<Vec<Column>>,
}

impl GroebnerBasis {
    fn internal(&self) -> Vec<MElt> {
        let o = Ord_ { ord: self.order };
        self.elements.iter().map(|c| MElt::from_column(c, 0, o)).collect()
    }

    pub fn leading_positions(&self) -> Vec<(usize, Mono)> {
        self.internal().iter().map(|e| (e.lead().pos, e.lead().mono.clone())).collect()
    }
}

pub fn gb_compute(
    gens: &[Column],
    rank: usize,
    nvars: usize,
    order: MonomialOrder,
    track: bool,
) -> Result<GroebnerBasis, GroebnerError> {
    check_ranks(gens, rank)?;
    let o = Ord_ { ord: order };
    if !track {
        let elts: Vec<MElt> = gens.iter().map(|g| MElt::from_column(g, 0, o)).collect();
        let gb = buchberger(elts, o, rank == 1);
        return Ok(GroebnerBasis {
            order,
            rank,
            nvars,
            elements: gb.iter().map(|e| e.to_column(nvars, 0, rank)).collect(),
            transformation: None,
        });
    }
    let aug = augmented_basis(gens, nvars, o);
    let mut elements = Vec::new();
    let mut trans = Vec::new();
    for e in aug.iter().filter(|e| e.has_pos_below(rank)) {
        elements.push(e.to_column(nvars, 0, rank));
        trans.push(e.to_column(nvars, rank, rank + gens.len()));
    }
    Ok(GroebnerBasis { order, rank, nvars, elements, transformation: Some(trans) })
}

fn augmented_basis(gens: &[Column], nvars: usize, o: Ord_) -> Vec<MElt> {
    let s = gens.len();
    let elts: Vec<MElt> = gens
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut col = g.clone();
            col.extend((0..s).map(|j| if i == j { Poly::one(nvars) } else { Poly::zero(nvars) }));
            MElt::from_column(&col, 0, o)
        })
        .collect();
    buchberger(elts, o, false)
}

/// Fully reduced remainder of `v` modulo a Gröbner basis.
pub fn gb_normal_form(v: &[Poly], basis: &GroebnerBasis) -> Column {
    let o = Ord_ { ord: basis.order };
    let w = MElt::from_column(v, 0, o);
    let (r, _) = reduce(&w, &basis.internal(), usize::MAX, o);
    r.to_column(basis.nvars, 0, basis.rank)
}

/// Precomputed data for repeated membership tests and lifts through a fixed
/// generating set.
#[derive(Clone, Debug)]
pub struct Lifter {
    order: MonomialOrder,
    rank: usize,
    nvars: usize,
    ngens: usize,
    aug: Vec<MElt>,
    reducers: Vec<MElt>,
}

impl Lifter {
    pub fn new(gens: &[Column], rank: usize, nvars: usize, order: MonomialOrder) -> Result<Self, GroebnerError> {
        check_ranks(gens, rank)?;
        let o = Ord_ { ord: order };
        let aug = augmented_basis(gens, nvars, o);
        let reducers = aug.iter().filter(|e| e.lead().pos < rank).cloned().collect();
        Ok(Lifter { order, rank, nvars, ngens: gens.len(), aug, reducers })
    }

    pub fn ngens(&self) -> usize {
        self.ngens
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Coefficients `a` with `sum_i a_i gens_i = v`.
    pub fn lift(&self, v: &[Poly]) -> Result<Column, GroebnerError> {
        assert_eq!(v.len(), self.rank);
        let o = Ord_ { ord: self.order };
        let w = MElt::from_column(v, 0, o);
        let (rem, rest) = reduce(&w, &self.reducers, self.rank, o);
        if !rem.is_zero() {
            return Err(GroebnerError::NotInModule { remainder: rem.to_column(self.nvars, 0, self.rank) });
        }
        let coeffs = rest.to_column(self.nvars, self.rank, self.rank + self.ngens);
        Ok(coeffs.iter().map(|p| -p).collect())
    }

    pub fn contains(&self, v: &[Poly]) -> bool {
        let o = Ord_ { ord: self.order };
        let w = MElt::from_column(v, 0, o);
        reduce(&w, &self.reducers, self.rank, o).0.is_zero()
    }

    /// Raw syzygy generators (the basis elements with vanishing `g` part).
    pub fn raw_syzygies(&self) -> Vec<Column> {
        self.aug
            .iter()
            .filter(|e| e.lead().pos >= self.rank)
            .map(|e| e.to_column(self.nvars, self.rank, self.rank + self.ngens))
            .collect()
    }
}

pub fn mod_lift(v: &[Poly], gens: &[Column], rank: usize, nvars: usize, order: MonomialOrder) -> Result<Column, GroebnerError> {
    Lifter::new(gens, rank, nvars, order)?.lift(v)
}

/// Weighted degree of a column: `max(deg v_p + w_p)`.
pub fn column_degree(v: &[Poly], weights: &[i64]) -> Option<i64> {
    v.iter()
        .zip(weights)
        .filter(|(p, _)| !p.is_zero())
        .map(|(p, w)| p.total_degree().unwrap() as i64 + w)
        .max()
}

/// Scales a column so that its leading coefficient (position over term) is one.
pub fn normalize_column(v: &[Poly], order: MonomialOrder) -> Column {
    let o = Ord_ { ord: order };
    let e = MElt::from_column(v, 0, o);
    if e.is_zero() {
        return v.to_vec();
    }
    let inv = e.lead().coef.recip();
    v.iter().map(|p| p.scale(&inv)).collect()
}

/// Drops generators that lie in the span of the others, keeping lower
/// weighted degrees first. For graded input this gives a minimal system.
pub fn prune_generators(cands: Vec<Column>, rank: usize, nvars: usize, weights: &[i64], order: MonomialOrder) -> Vec<Column> {
    let o = Ord_ { ord: order };
    let mut cands: Vec<Column> = cands.into_iter().filter(|c| c.iter().any(|p| !p.is_zero())).collect();
    cands.sort_by(|a, b| {
        let (da, db) = (column_degree(a, weights), column_degree(b, weights));
        da.cmp(&db).then_with(|| {
            let (ea, eb) = (MElt::from_column(a, 0, o), MElt::from_column(b, 0, o));
            o.cmp(ea.lead().pos, &ea.lead().mono, eb.lead().pos, &eb.lead().mono)
        })
    });
    let mut kept: Vec<Column> = Vec::new();
    for c in cands {
        if !kept.is_empty() {
            let gb = gb_compute(&kept, rank, nvars, order, false).expect("ranks checked");
            if gb_normal_form(&c, &gb).iter().all(|p| p.is_zero()) {
                continue;
            }
        }
        kept.push(c);
    }
    // second pass for inhomogeneous input
    let mut i = 0;
    while i < kept.len() && kept.len() > 1 {
        let others: Vec<Column> = kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()).collect();
        let gb = gb_compute(&others, rank, nvars, order, false).expect("ranks checked");
        if gb_normal_form(&kept[i], &gb).iter().all(|p| p.is_zero()) {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept.into_iter().map(|c| normalize_column(&c, order)).collect()
}

/// Generators of the syzygy module of `gens`, pruned to an irredundant set.
pub fn mod_syzygies(gens: &[Column], rank: usize, nvars: usize, order: MonomialOrder) -> Result<Vec<Column>, GroebnerError> {
    mod_syzygies_weighted(gens, rank, nvars, &vec![0; rank], order)
}

pub fn mod_syzygies_weighted(
    gens: &[Column],
    rank: usize,
    nvars: usize,
    weights: &[i64],
    order: MonomialOrder,
) -> Result<Vec<Column>, GroebnerError> {
    let lifter = Lifter::new(gens, rank, nvars, order)?;
    let raw = lifter.raw_syzygies();
    let gw: Vec<i64> = gens.iter().map(|g| column_degree(g, weights).unwrap_or(0)).collect();
    Ok(prune_generators(raw, gens.len(), nvars, &gw, order))
}

/// `sum_i a_i gens_i`
pub fn combine(coeffs: &[Poly], gens: &[Column], rank: usize, nvars: usize) -> Column {
    let mut out = vec![Poly::zero(nvars); rank];
    for (a, g) in coeffs.iter().zip(gens) {
        if a.is_zero() {
            continue;
        }
        for (o, p) in out.iter_mut().zip(g) {
            o.add_product(a, p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, Poly};

    fn x() -> Poly {
        Poly::var(2, 0)
    }
    fn y() -> Poly {
        Poly::var(2, 1)
    }
    fn c(v: i64) -> Poly {
        Poly::from_int(2, v)
    }

    #[test]
    fn principal_ideal() {
        let gb = gb_compute(&[vec![x()]], 1, 2, MonomialOrder::DegRevLex, false).unwrap();
        assert_eq!(gb.elements, vec![vec![x()]]);
    }

    #[test]
    fn monomial_ideal_is_its_own_basis() {
        let g = vec![vec![&x() * &x()], vec![&y() * &y()]];
        let gb = gb_compute(&g, 1, 2, MonomialOrder::DegRevLex, false).unwrap();
        assert_eq!(gb.elements.len(), 2);
        assert!(gb.elements.contains(&g[0]) && gb.elements.contains(&g[1]));
    }

    #[test]
    fn normal_form_x_cubed() {
        let f = &(&x() * &x()) - &y();
        let gb = gb_compute(&[vec![f]], 1, 2, MonomialOrder::DegRevLex, false).unwrap();
        let nf = gb_normal_form(&[x().pow(3)], &gb);
        assert_eq!(nf, vec![&x() * &y()]);
    }

    #[test]
    fn sl2_lift_and_syzygy() {
        let h = vec![x(), -&y()];
        let e = vec![c(0), x()];
        let f = vec![y(), c(0)];
        let gens = vec![h, e, f];
        let a = mod_lift(&[c(0), x()], &gens, 2, 2, MonomialOrder::DegRevLex).unwrap();
        assert_eq!(a, vec![c(0), c(1), c(0)]);
        let syz = mod_syzygies(&gens, 2, 2, MonomialOrder::DegRevLex).unwrap();
        assert_eq!(syz.len(), 1);
        assert_eq!(syz[0], vec![&x() * &y(), &y() * &y(), -&(&x() * &x())]);
    }

    #[test]
    fn not_in_module() {
        let gens = vec![vec![x(), c(0)], vec![&y() * &y(), x()]];
        let r = mod_lift(&[y().pow(3), c(0)], &gens, 2, 2, MonomialOrder::DegRevLex);
        match r {
            Err(GroebnerError::NotInModule { remainder }) => assert!(remainder.iter().any(|p| !p.is_zero())),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn quadric_syzygies() {
        let gens = vec![vec![&x() * &x()], vec![&x() * &y()], vec![&y() * &y()]];
        let syz = mod_syzygies(&gens, 1, 2, MonomialOrder::DegRevLex).unwrap();
        assert_eq!(syz.len(), 2);
        // both lie in the image of (F,G) -> (yF, -xF - yG, xG) and span it
        let delta = vec![vec![y(), -&x(), c(0)], vec![c(0), -&y(), x()]];
        let l = Lifter::new(&syz, 3, 2, MonomialOrder::DegRevLex).unwrap();
        for d in &delta {
            assert!(l.contains(d));
        }
        let l2 = Lifter::new(&delta, 3, 2, MonomialOrder::DegRevLex).unwrap();
        for s in &syz {
            assert!(l2.contains(s));
        }
    }

    #[test]
    fn tracked_transformation_is_consistent() {
        let f1 = &(&x() * &x()) - &y();
        let f2 = &(&x() * &y()) - &c(1);
        let gens = vec![vec![f1], vec![f2]];
        let gb = gb_compute(&gens, 1, 2, MonomialOrder::DegRevLex, true).unwrap();
        let t = gb.transformation.as_ref().unwrap();
        for (e, row) in gb.elements.iter().zip(t) {
            assert_eq!(&combine(row, &gens, 1, 2), e);
        }
        let _ = q(0);
    }
}
