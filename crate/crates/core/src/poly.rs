//! Sparse multivariate polynomials over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Mono`], whose `Ord` is degrevlex,
//! so iteration is deterministic and printing can walk the map backwards.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Term order used by Gröbner computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum MonomialOrder {
    #[default]
    DegRevLex,
    Lex,
}

impl MonomialOrder {
    pub fn cmp(self, a: &Mono, b: &Mono) -> Ordering {
        match self {
            MonomialOrder::DegRevLex => degrevlex(a, b),
            MonomialOrder::Lex => a.0.cmp(&b.0),
        }
    }
}

fn degrevlex(a: &Mono, b: &Mono) -> Ordering {
    let (da, db) = (a.degree(), b.degree());
    if da != db {
        return da.cmp(&db);
    }
    for (x, y) in a.0.iter().zip(b.0.iter()).rev() {
        if x != y {
            // smaller exponent in the last differing variable wins
            return y.cmp(x);
        }
    }
    Ordering::Equal
}

/// Exponent vector.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn one(n: usize) -> Self {
        Mono(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Mono(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        Mono(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, o: &Mono) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// `o / self`, assuming `self | o`.
    pub fn quotient_of(&self, o: &Mono) -> Mono {
        Mono(self.0.iter().zip(&o.0).map(|(a, b)| b - a).collect())
    }

    pub fn lcm(&self, o: &Mono) -> Mono {
        Mono(self.0.iter().zip(&o.0).map(|(a, b)| *a.max(b)).collect())
    }

    pub fn coprime(&self, o: &Mono) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| *a == 0 || *b == 0)
    }

    pub fn eval(&self, pt: &[Q]) -> Q {
        let mut r = Q::one();
        for (e, x) in self.0.iter().zip(pt) {
            for _ in 0..*e {
                r *= x;
            }
        }
        r
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        degrevlex(self, other)
    }
}

/// Polynomial in `nvars` commuting variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Mono, Q>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Q::one())
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Mono::one(nvars), c);
        }
        p
    }

    pub fn from_int(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, q(c))
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::term(Mono::var(nvars, i), Q::one())
    }

    pub fn term(m: Mono, c: Q) -> Self {
        let mut p = Self::zero(m.nvars());
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(nvars: usize, it: impl IntoIterator<Item = (Mono, Q)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    pub fn constant_term(&self) -> Q {
        self.terms.get(&Mono::one(self.nvars)).cloned().unwrap_or_else(Q::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending degrevlex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Mono, &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Mono) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add_assign_ref(&mut self, o: &Poly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub_assign_ref(&mut self, o: &Poly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), -c.clone());
        }
    }

    /// `self += c * o`
    pub fn add_scaled(&mut self, c: &Q, o: &Poly) {
        if c.is_zero() {
            return;
        }
        for (m, v) in &o.terms {
            self.add_term(m.clone(), c * v);
        }
    }

    /// `self += f * g` without building the product separately.
    pub fn add_product(&mut self, f: &Poly, g: &Poly) {
        for (m1, c1) in &f.terms {
            for (m2, c2) in &g.terms {
                self.add_term(m1.mul(m2), c1 * c2);
            }
        }
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn mul_mono(&self, m: &Mono, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut r = Poly::one(self.nvars);
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut r = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut m2 = m.clone();
                m2.0[i] -= 1;
                r.add_term(m2, c * q(e as i64));
            }
        }
        r
    }

    pub fn eval(&self, pt: &[Q]) -> Q {
        let mut r = Q::zero();
        for (m, c) in &self.terms {
            r += c * m.eval(pt);
        }
        r
    }

    /// Substitutes `x_i -> x_i + shift_i`.
    pub fn translate(&self, shift: &[Q]) -> Poly {
        let n = self.nvars;
        let lin: Vec<Poly> = (0..n)
            .map(|i| &Poly::var(n, i) + &Poly::constant(n, shift[i].clone()))
            .collect();
        let mut r = Poly::zero(n);
        for (m, c) in &self.terms {
            let mut t = Poly::constant(n, c.clone());
            for (i, e) in m.0.iter().enumerate() {
                if *e > 0 {
                    t = &t * &lin[i].pow(*e);
                }
            }
            r.add_assign_ref(&t);
        }
        r
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut d = None;
        for m in self.terms.keys() {
            match d {
                None => d = Some(m.degree()),
                Some(x) if x != m.degree() => return false,
                _ => {}
            }
        }
        true
    }

    /// Leading term under `ord`.
    pub fn leading(&self, ord: MonomialOrder) -> Option<(&Mono, &Q)> {
        match ord {
            MonomialOrder::DegRevLex => self.terms.iter().next_back(),
            MonomialOrder::Lex => self.terms.iter().max_by(|a, b| ord.cmp(a.0, b.0)),
        }
    }

    /// Scales so that the degrevlex leading coefficient is one.
    pub fn monic(&self) -> Poly {
        match self.leading(MonomialOrder::DegRevLex) {
            None => self.clone(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Returns `(quotient, true)` when `d` divides `self` exactly.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if d.is_constant() {
            return Some(self.scale(&d.constant_term().recip()));
        }
        let ord = MonomialOrder::DegRevLex;
        let (lm, lc) = d.leading(ord).map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut quo = Poly::zero(self.nvars);
        while let Some((m, c)) = rem.leading(ord).map(|(m, c)| (m.clone(), c.clone())) {
            if !lm.divides(&m) {
                return None;
            }
            let t = lm.quotient_of(&m);
            let k = c / &lc;
            rem = &rem - &d.mul_mono(&t, &k);
            quo.add_term(t, k);
        }
        Some(quo)
    }

    pub fn fmt_with(&self, names: &[String]) -> String {
        fmt_poly(self, names)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign_ref(o);
        r
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        r.sub_assign_ref(o);
        r
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut r = Poly::zero(self.nvars.max(o.nvars));
        r.add_product(self, o);
        r
    }
}

pub fn fmt_rational(c: &Q) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_mono(m: &Mono, names: &[String]) -> String {
    let mut parts = Vec::new();
    for (i, e) in m.0.iter().enumerate() {
        let name = names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1));
        match e {
            0 => {}
            1 => parts.push(name),
            _ => parts.push(format!("{}^{}", name, e)),
        }
    }
    parts.join("*")
}

/// Descending degrevlex, `+`/`-` separated, coefficient 1 elided.
pub fn fmt_poly(p: &Poly, names: &[String]) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (m, c)) in p.terms.iter().rev().enumerate() {
        let neg = c.is_negative();
        let a = c.abs();
        if k == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let ms = fmt_mono(m, names);
        if ms.is_empty() {
            s.push_str(&fmt_rational(&a));
        } else if a.is_one() {
            s.push_str(&ms);
        } else {
            s.push_str(&fmt_rational(&a));
            s.push('*');
            s.push_str(&ms);
        }
    }
    s
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_poly(self, &[]))
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        4 => vec!["x".into(), "y".into(), "z".into(), "t".into()],
        _ => (1..=n).map(|i| format!("x{}", i)).collect(),
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

pub fn q_to_f64(c: &Q) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var(2, 0)
    }
    fn y() -> Poly {
        Poly::var(2, 1)
    }

    #[test]
    fn degrevlex_basics() {
        // x^2 > xy > y^2 > x > y > 1
        let ms = [vec![2, 0], vec![1, 1], vec![0, 2], vec![1, 0], vec![0, 1], vec![0, 0]];
        for w in ms.windows(2) {
            assert_eq!(degrevlex(&Mono(w[0].clone()), &Mono(w[1].clone())), Ordering::Greater);
        }
        // x y z^0 vs x^0 y^0 z^2 in three vars: xy > z^2
        assert!(Mono(vec![1, 1, 0]) > Mono(vec![0, 0, 2]));
        assert!(Mono(vec![1, 0, 1]) < Mono(vec![0, 2, 0]));
    }

    #[test]
    fn arithmetic_and_printing() {
        let p = &(&x() * &x()) - &(&y() + &Poly::from_int(2, 3));
        let names = default_names(2);
        assert_eq!(p.fmt_with(&names), "x^2 - y - 3");
        let sq = &p * &p;
        assert_eq!(sq.eval(&[q(2), q(1)]), q(0));
        assert_eq!(p.derivative(0).fmt_with(&names), "2*x");
        let h = Poly::term(Mono(vec![1, 1]), qf(-1, 2));
        assert_eq!(h.fmt_with(&names), "-1/2*x*y");
    }

    #[test]
    fn exact_division() {
        let a = &x() + &y();
        let b = &x() - &y();
        let ab = &a * &b;
        assert_eq!(ab.exact_div(&a), Some(b.clone()));
        assert_eq!(a.exact_div(&b), None);
    }

    #[test]
    fn translation() {
        let p = &x() * &y();
        let t = p.translate(&[q(1), q(0)]);
        assert_eq!(t, &(&x() * &y()) + &y());
    }
}
