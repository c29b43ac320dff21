//! Graded-commutative polynomials `S(E*)` over the base ring and graded
//! derivations acting on them.
//!
//! Base variables have degree 0. A fiber generator dual to a basis section of
//! `E_{-k}` has degree `k`; odd generators anticommute and square to zero.
//! Fiber monomials are stored as sorted generator ids, where ids are assigned in
//! (degree, index) order, so the canonical order is the id order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{fmt_rational, Poly, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GradedError {
    #[error("term {term} of the value on {generator} has degree {found}, expected {expected}")]
    DegreeMismatch { generator: String, term: String, expected: i64, found: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberGenerator {
    pub name: String,
    /// Level `k`: dual to a section of `E_{-k}`, of degree `k`.
    pub level: usize,
    pub index: usize,
}

/// Sorted generator ids; repeated ids only for even generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FMono(pub Vec<usize>);

impl FMono {
    pub fn one() -> Self {
        FMono(Vec::new())
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl PartialOrd for FMono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for FMono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.len().cmp(&o.0.len()).then_with(|| self.0.cmp(&o.0))
    }
}

/// The graded ring: base variables plus fiber generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GRing {
    pub var_names: Vec<String>,
    pub gens: Vec<FiberGenerator>,
    /// `offsets[k-1]..offsets[k]` are the ids of level-`k` generators.
    offsets: Vec<usize>,
}

impl GRing {
    /// `ranks[k-1]` generators at level `k`.
    pub fn new(var_names: Vec<String>, ranks: &[usize]) -> Self {
        let mut gens = Vec::new();
        let mut offsets = vec![0];
        for (k, &r) in ranks.iter().enumerate() {
            for a in 0..r {
                gens.push(FiberGenerator { name: format!("xi{}_{}", k + 1, a + 1), level: k + 1, index: a });
            }
            offsets.push(gens.len());
        }
        GRing { var_names, gens, offsets }
    }

    pub fn with_names(var_names: Vec<String>, names: Vec<Vec<String>>) -> Self {
        let ranks: Vec<usize> = names.iter().map(|v| v.len()).collect();
        let mut r = Self::new(var_names, &ranks);
        for (g, n) in r.gens.iter_mut().zip(names.into_iter().flatten()) {
            g.name = n;
        }
        r
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn ngens(&self) -> usize {
        self.gens.len()
    }

    pub fn depth(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn rank(&self, level: usize) -> usize {
        if level == 0 || level > self.depth() {
            0
        } else {
            self.offsets[level] - self.offsets[level - 1]
        }
    }

    pub fn ranks(&self) -> Vec<usize> {
        (1..=self.depth()).map(|k| self.rank(k)).collect()
    }

    pub fn id(&self, level: usize, index: usize) -> usize {
        assert!(level >= 1 && level <= self.depth() && index < self.rank(level));
        self.offsets[level - 1] + index
    }

    pub fn level_ids(&self, level: usize) -> std::ops::Range<usize> {
        if level == 0 || level > self.depth() {
            0..0
        } else {
            self.offsets[level - 1]..self.offsets[level]
        }
    }

    pub fn degree(&self, id: usize) -> i64 {
        self.gens[id].level as i64
    }

    pub fn is_odd(&self, id: usize) -> bool {
        self.gens[id].level % 2 == 1
    }

    pub fn mono_degree(&self, m: &FMono) -> i64 {
        m.0.iter().map(|&g| self.degree(g)).sum()
    }

    /// `a * b = sign * sorted`, or `None` when an odd generator repeats.
    pub fn mono_mul(&self, a: &FMono, b: &FMono) -> Option<(FMono, bool)> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let mut negative = false;
        let (mut i, mut j) = (0, 0);
        // odd elements of `a` not yet emitted, as b's elements jump over them
        let mut odd_left_in_a = a.0.iter().filter(|&&g| self.is_odd(g)).count();
        while i < a.len() || j < b.len() {
            let take_a = j >= b.len() || (i < a.len() && a.0[i] <= b.0[j]);
            if take_a {
                if j < b.len() && i < a.len() && a.0[i] == b.0[j] && self.is_odd(a.0[i]) {
                    return None;
                }
                if self.is_odd(a.0[i]) {
                    odd_left_in_a -= 1;
                }
                out.push(a.0[i]);
                i += 1;
            } else {
                if self.is_odd(b.0[j]) && odd_left_in_a % 2 == 1 {
                    negative = !negative;
                }
                out.push(b.0[j]);
                j += 1;
            }
        }
        Some((FMono(out), negative))
    }

    pub fn fmt_fmono(&self, m: &FMono) -> String {
        let mut parts: Vec<String> = Vec::new();
        let mut k = 0;
        while k < m.len() {
            let g = m.0[k];
            let mut e = 1;
            while k + e < m.len() && m.0[k + e] == g {
                e += 1;
            }
            if e == 1 {
                parts.push(self.gens[g].name.clone());
            } else {
                parts.push(format!("{}^{}", self.gens[g].name, e));
            }
            k += e;
        }
        parts.join("*")
    }

    // --- polynomial constructors -------------------------------------------------

    pub fn zero(&self) -> GPoly {
        GPoly::zero(self.nvars())
    }

    pub fn one(&self) -> GPoly {
        self.scalar(Poly::one(self.nvars()))
    }

    pub fn scalar(&self, p: Poly) -> GPoly {
        let mut g = self.zero();
        g.add_term(FMono::one(), p);
        g
    }

    pub fn gen(&self, id: usize) -> GPoly {
        let mut g = self.zero();
        g.add_term(FMono(vec![id]), Poly::one(self.nvars()));
        g
    }

    pub fn base_var(&self, i: usize) -> GPoly {
        self.scalar(Poly::var(self.nvars(), i))
    }

    /// Monomial `xi_{ids[0]} * xi_{ids[1]} * ...` in the order given.
    pub fn monomial(&self, ids: &[usize]) -> GPoly {
        let mut r = self.one();
        for &g in ids {
            r = self.mul(&r, &self.gen(g));
        }
        r
    }

    pub fn mul(&self, a: &GPoly, b: &GPoly) -> GPoly {
        let mut r = self.zero();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                if let Some((m, neg)) = self.mono_mul(ma, mb) {
                    let p = ca * cb;
                    r.add_term(m, if neg { -&p } else { p });
                }
            }
        }
        r
    }

    /// Degree of a homogeneous element, `None` for zero or inhomogeneous.
    pub fn degree_of(&self, p: &GPoly) -> Option<i64> {
        let mut d = None;
        for m in p.terms.keys() {
            let k = self.mono_degree(m);
            match d {
                None => d = Some(k),
                Some(x) if x != k => return None,
                _ => {}
            }
        }
        d
    }

    pub fn fmt(&self, p: &GPoly) -> String {
        if p.is_zero() {
            return "0".into();
        }
        let mut out = Vec::new();
        for (m, c) in p.terms.iter() {
            let cs = c.fmt_with(&self.var_names);
            let ms = self.fmt_fmono(m);
            if ms.is_empty() {
                out.push(cs);
            } else if c.is_constant() && c.constant_term().is_one() {
                out.push(ms);
            } else if c.len() == 1 && c.is_constant() {
                out.push(format!("{}*{}", fmt_rational(&c.constant_term()), ms));
            } else {
                out.push(format!("({})*{}", cs, ms));
            }
        }
        out.join(" + ")
    }
}

/// Element of `S(E*)`: polynomial coefficient per fiber monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GPoly {
    nvars: usize,
    pub terms: BTreeMap<FMono, Poly>,
}

impl GPoly {
    pub fn zero(nvars: usize) -> Self {
        GPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: FMono, c: Poly) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                v.add_assign_ref(&c);
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add_assign(&mut self, o: &GPoly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, o: &GPoly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), -c);
        }
    }

    pub fn add(&self, o: &GPoly) -> GPoly {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &GPoly) -> GPoly {
        let mut r = self.clone();
        r.sub_assign(o);
        r
    }

    pub fn neg(&self) -> GPoly {
        GPoly { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &Q) -> GPoly {
        if c.is_zero() {
            return GPoly::zero(self.nvars);
        }
        GPoly { nvars: self.nvars, terms: self.terms.iter().map(|(m, p)| (m.clone(), p.scale(c))).collect() }
    }

    pub fn scale_poly(&self, f: &Poly) -> GPoly {
        let mut r = GPoly::zero(self.nvars);
        for (m, p) in &self.terms {
            r.add_term(m.clone(), p * f);
        }
        r
    }

    pub fn coeff(&self, m: &FMono) -> Poly {
        self.terms.get(m).cloned().unwrap_or_else(|| Poly::zero(self.nvars))
    }

    /// Component of fiber length `k`.
    pub fn arity_part(&self, k: usize) -> GPoly {
        GPoly {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(m, _)| m.len() == k).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    pub fn eval_base(&self, pt: &[Q]) -> BTreeMap<FMono, Q> {
        self.terms
            .iter()
            .map(|(m, c)| (m.clone(), c.eval(pt)))
            .filter(|(_, v)| !v.is_zero())
            .collect()
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().map(|m| m.len())
    }
}

/// Graded derivation of `S(E*)`, stored by its values on base variables and
/// fiber generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GDerivation {
    pub degree: i64,
    pub on_vars: Vec<GPoly>,
    pub on_gens: Vec<GPoly>,
}

fn koszul(a: i64, b: i64) -> bool {
    (a * b).rem_euclid(2) == 1
}

impl GDerivation {
    pub fn zero(ring: &GRing, degree: i64) -> Self {
        GDerivation { degree, on_vars: vec![ring.zero(); ring.nvars()], on_gens: vec![ring.zero(); ring.ngens()] }
    }

    /// `d/d xi_id`, of degree `-|xi_id|`.
    pub fn partial(ring: &GRing, id: usize) -> Self {
        let mut w = Self::zero(ring, -ring.degree(id));
        w.on_gens[id] = ring.one();
        w
    }

    pub fn is_zero(&self) -> bool {
        self.on_vars.iter().all(|p| p.is_zero()) && self.on_gens.iter().all(|p| p.is_zero())
    }

    pub fn is_vertical(&self) -> bool {
        self.on_vars.iter().all(|p| p.is_zero())
    }

    pub fn add(&self, o: &GDerivation) -> GDerivation {
        GDerivation {
            degree: self.degree,
            on_vars: self.on_vars.iter().zip(&o.on_vars).map(|(a, b)| a.add(b)).collect(),
            on_gens: self.on_gens.iter().zip(&o.on_gens).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, o: &GDerivation) -> GDerivation {
        self.add(&o.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> GDerivation {
        GDerivation {
            degree: self.degree,
            on_vars: self.on_vars.iter().map(|p| p.scale(c)).collect(),
            on_gens: self.on_gens.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Checks every value has degree `|generator| + degree`.
    pub fn check_degrees(&self, ring: &GRing) -> Result<(), GradedError> {
        let check = |name: &str, base: i64, p: &GPoly| -> Result<(), GradedError> {
            for m in p.terms.keys() {
                let d = ring.mono_degree(m);
                if d != base + self.degree {
                    return Err(GradedError::DegreeMismatch {
                        generator: name.to_string(),
                        term: ring.fmt_fmono(m),
                        expected: base + self.degree,
                        found: d,
                    });
                }
            }
            Ok(())
        };
        for (i, p) in self.on_vars.iter().enumerate() {
            check(&ring.var_names[i], 0, p)?;
        }
        for (g, p) in self.on_gens.iter().enumerate() {
            check(&ring.gens[g].name, ring.degree(g), p)?;
        }
        Ok(())
    }

    /// Applies the derivation with the Koszul sign rule
    /// `w(fg) = w(f) g + (-1)^{|w||f|} f w(g)`.
    pub fn apply(&self, ring: &GRing, f: &GPoly) -> GPoly {
        let n = ring.nvars();
        let mut out = ring.zero();
        for (m, c) in &f.terms {
            let mono = GPoly { nvars: n, terms: [(m.clone(), Poly::one(n))].into_iter().collect() };
            // base part: sum_i dc/dx_i w(x_i) * xi^m
            for i in 0..n {
                if self.on_vars[i].is_zero() {
                    continue;
                }
                let dc = c.derivative(i);
                if dc.is_zero() {
                    continue;
                }
                let t = ring.mul(&self.on_vars[i].scale_poly(&dc), &mono);
                out.add_assign(&t);
            }
            // fiber part
            let mut left_deg = 0;
            for (k, &g) in m.0.iter().enumerate() {
                let v = &self.on_gens[g];
                if !v.is_zero() {
                    let left = ring.monomial(&m.0[..k]);
                    let right = ring.monomial(&m.0[k + 1..]);
                    let mut t = ring.mul(&ring.mul(&left, v), &right).scale_poly(c);
                    if koszul(self.degree, left_deg) {
                        t = t.neg();
                    }
                    out.add_assign(&t);
                }
                left_deg += ring.degree(g);
            }
        }
        out
    }

    /// Value of the derivation on the base polynomial `p`.
    pub fn apply_base(&self, ring: &GRing, p: &Poly) -> GPoly {
        self.apply(ring, &ring.scalar(p.clone()))
    }

    pub fn compose_on(&self, other: &GDerivation, ring: &GRing, x: &GPoly) -> GPoly {
        self.apply(ring, &other.apply(ring, x))
    }

    /// Arity pieces: on a fiber generator arity `k` means fiber length `k+1`,
    /// on a base variable fiber length `k`.
    pub fn arity_split(&self, ring: &GRing) -> BTreeMap<i64, GDerivation> {
        let mut out: BTreeMap<i64, GDerivation> = BTreeMap::new();
        let slot = |_k: i64| -> GDerivation { GDerivation::zero(ring, self.degree) };
        for (i, p) in self.on_vars.iter().enumerate() {
            for (m, c) in &p.terms {
                let k = m.len() as i64;
                let e = out.entry(k).or_insert_with(|| slot(k));
                e.on_vars[i].add_term(m.clone(), c.clone());
            }
        }
        for (g, p) in self.on_gens.iter().enumerate() {
            for (m, c) in &p.terms {
                let k = m.len() as i64 - 1;
                let e = out.entry(k).or_insert_with(|| slot(k));
                e.on_gens[g].add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn arity(&self, ring: &GRing, k: i64) -> GDerivation {
        self.arity_split(ring).remove(&k).unwrap_or_else(|| GDerivation::zero(ring, self.degree))
    }

    /// Lowest arity present, `None` for the zero derivation.
    pub fn arities(&self, ring: &GRing) -> Vec<i64> {
        self.arity_split(ring).keys().copied().collect()
    }
}

/// `[w1, w2] = w1 w2 - (-1)^{|w1||w2|} w2 w1`, computed on generators.
pub fn commutator(ring: &GRing, w1: &GDerivation, w2: &GDerivation) -> GDerivation {
    let sign_neg = koszul(w1.degree, w2.degree);
    let val = |x: &GPoly| -> GPoly {
        let a = w1.apply(ring, &w2.apply(ring, x));
        let b = w2.apply(ring, &w1.apply(ring, x));
        if sign_neg {
            a.add(&b)
        } else {
            a.sub(&b)
        }
    };
    GDerivation {
        degree: w1.degree + w2.degree,
        on_vars: (0..ring.nvars()).map(|i| val(&ring.base_var(i))).collect(),
        on_gens: (0..ring.ngens()).map(|g| val(&ring.gen(g))).collect(),
    }
}

/// A fiber monomial as a plain base monomial list, for reports.
pub fn describe_terms(ring: &GRing, p: &GPoly) -> Vec<(String, String)> {
    p.terms.iter().map(|(m, c)| (ring.fmt_fmono(m), c.fmt_with(&ring.var_names))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q;

    fn ring() -> GRing {
        // one generator in degree 1 (xi) and one in degree 2 (eta), base var x
        GRing::with_names(vec!["x".into()], vec![vec!["xi".into()], vec!["eta".into()]])
    }

    #[test]
    fn products() {
        let r = ring();
        let one = r.one();
        let xi = r.gen(0);
        let eta = r.gen(1);
        assert_eq!(r.mul(&one, &xi), xi);
        assert!(r.mul(&xi, &xi).is_zero());
        assert_eq!(r.mul(&eta, &xi), r.mul(&xi, &eta));
        assert!(!r.mul(&eta, &eta).is_zero());
    }

    #[test]
    fn odd_generators_anticommute() {
        let r = GRing::new(vec!["x".into()], &[2]);
        let (a, b) = (r.gen(0), r.gen(1));
        assert_eq!(r.mul(&a, &b), r.mul(&b, &a).neg());
    }

    #[test]
    fn derivation_application() {
        let r = ring();
        let d = GDerivation::partial(&r, 0);
        let prod = r.mul(&r.gen(0), &r.gen(1));
        assert_eq!(d.apply(&r, &prod), r.gen(1));
        let z = GDerivation::zero(&r, 1);
        assert!(z.apply(&r, &prod).is_zero());
        let mut w = GDerivation::zero(&r, 1);
        w.on_vars[0] = r.gen(0);
        let x2 = r.scalar(Poly::var(1, 0).pow(2));
        let expect = r.gen(0).scale_poly(&Poly::var(1, 0).scale(&q(2)));
        assert_eq!(w.apply(&r, &x2), expect);
    }

    #[test]
    fn commutators() {
        let r = ring();
        // w = xi d/d eta, degree -1
        let mut w = GDerivation::zero(&r, -1);
        w.on_gens[1] = r.gen(0);
        let d_xi = GDerivation::partial(&r, 0);
        let c = commutator(&r, &d_xi, &w);
        assert_eq!(c, GDerivation::partial(&r, 1));
        // an even derivation commutes with itself
        let mut e = GDerivation::zero(&r, 0);
        e.on_gens[1] = r.gen(1).scale(&q(3));
        e.on_vars[0] = r.scalar(Poly::var(1, 0));
        assert!(commutator(&r, &e, &e).is_zero());
    }
}
