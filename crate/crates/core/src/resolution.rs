//! Geometric resolutions of a foliation by iterated syzygies.
//!
//! Matrices are stored by columns: `anchor[a]` is the vector field of the
//! basis section `a` of `E_{-1}`, and `diffs[k][b]` is the image of the basis
//! section `b` of `E_{-(k+2)}` in `E_{-(k+1)}`.

use num_traits::Zero;
use thiserror::Error;

use crate::foliation::Foliation;
use crate::groebner::{column_degree, combine, mod_syzygies_weighted, Column, GroebnerError, Lifter};
use crate::linalg::QMatrix;
use crate::poly::{MonomialOrder, Poly, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolutionError {
    #[error("resolution still has nonzero syzygies after {max_length} levels")]
    LengthExceeded { max_length: usize },
    #[error("no unit pivot found at level {level} although the fiber map is nonzero")]
    PivotFailure { level: usize },
    #[error("lift failed at level {level}, column {column}")]
    LiftFailure { level: usize, column: usize, remainder: Column },
    #[error("point has {found} coordinates, expected {expected}")]
    BadPoint { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeomResolution {
    pub var_names: Vec<String>,
    pub anchor: Vec<Column>,
    pub diffs: Vec<Vec<Column>>,
    /// Basis section names per level.
    pub section_names: Vec<Vec<String>>,
}

fn default_section_names(ranks: &[usize]) -> Vec<Vec<String>> {
    ranks
        .iter()
        .enumerate()
        .map(|(k, &r)| (0..r).map(|a| format!("e{}_{}", k + 1, a + 1)).collect())
        .collect()
}

impl GeomResolution {
    pub fn new(var_names: Vec<String>, anchor: Vec<Column>, diffs: Vec<Vec<Column>>) -> Self {
        let mut r = GeomResolution { var_names, anchor, diffs, section_names: Vec::new() };
        r.section_names = default_section_names(&r.ranks());
        r
    }

    pub fn with_names(mut self, names: Vec<Vec<String>>) -> Self {
        assert_eq!(names.iter().map(|v| v.len()).collect::<Vec<_>>(), self.ranks());
        self.section_names = names;
        self
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.anchor.len()];
        r.extend(self.diffs.iter().map(|d| d.len()));
        // trailing zero-rank levels carry no information
        while r.len() > 1 && *r.last().unwrap() == 0 {
            r.pop();
        }
        r
    }

    pub fn rank(&self, level: usize) -> usize {
        self.ranks().get(level - 1).copied().unwrap_or(0)
    }

    /// Resolution length `d` (number of nonzero levels).
    pub fn length(&self) -> usize {
        self.ranks().iter().filter(|&&r| r > 0).count()
    }

    /// `d^{(i)}: E_{-i} -> E_{-i+1}` for `i >= 2`.
    pub fn d(&self, i: usize) -> &[Column] {
        assert!(i >= 2);
        self.diffs.get(i - 2).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn foliation(&self) -> Foliation {
        Foliation::new(self.var_names.clone(), self.anchor.clone()).expect("anchor columns have n entries")
    }

    pub fn ring(&self) -> crate::graded::GRing {
        let names = self.section_names.iter().map(|lv| lv.iter().map(|s| format!("xi[{}]", s)).collect()).collect();
        crate::graded::GRing::with_names(self.var_names.clone(), names)
    }

    /// Columns of the map into level `i - 1` (the anchor for `i == 1`).
    pub fn map_into(&self, i: usize) -> &[Column] {
        if i == 1 {
            &self.anchor
        } else {
            self.d(i)
        }
    }

    /// Rows of the map out of level `i` (`n` for the anchor).
    pub fn target_rank(&self, i: usize) -> usize {
        if i == 1 {
            self.nvars()
        } else {
            self.rank(i - 1)
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub resolution: GeomResolution,
    pub warnings: Vec<String>,
}

/// Iterated syzygies starting from the generators of `f`.
pub fn res_build(f: &Foliation, max_length: usize, order: MonomialOrder) -> Result<BuildOutput, ResolutionError> {
    let n = f.nvars();
    let mut warnings = Vec::new();
    let anchor = f.generators.clone();
    let mut diffs: Vec<Vec<Column>> = Vec::new();
    let mut cur = anchor.clone();
    let mut cur_rank = n;
    let mut weights = vec![0i64; n];
    let mut level = 1;
    loop {
        if cur.is_empty() {
            break;
        }
        let syz = mod_syzygies_weighted(&cur, cur_rank, n, &weights, order).expect("consistent ranks");
        if syz.is_empty() {
            break;
        }
        if level >= max_length {
            return Err(ResolutionError::LengthExceeded { max_length });
        }
        level += 1;
        if level > n + 1 {
            warnings.push(format!("resolution length {} exceeds n + 1 = {}", level, n + 1));
        }
        weights = cur.iter().map(|c| column_degree(c, &weights).unwrap_or(0)).collect();
        cur_rank = cur.len();
        diffs.push(syz.clone());
        cur = syz;
    }
    Ok(BuildOutput { resolution: GeomResolution::new(f.var_names.clone(), anchor, diffs), warnings })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail { detail: String, witness: Column },
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelCheck {
    pub level: usize,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    /// `rho d2 = 0` is reported at level 2, `d(i-1) d(i) = 0` at level `i`.
    pub complex: Vec<LevelCheck>,
    pub membership: Check,
    /// Exactness at level `i`: the kernel of the map out of `E_{-i}` is the image of `d(i+1)`.
    pub exactness: Vec<LevelCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.complex.iter().all(|c| c.check.passed())
            && self.membership.passed()
            && self.exactness.iter().all(|c| c.check.passed())
    }

    pub fn first_failure(&self) -> Option<String> {
        for c in self.complex.iter().chain(&self.exactness) {
            if let Check::Fail { detail, .. } = &c.check {
                return Some(format!("level {}: {}", c.level, detail));
            }
        }
        if let Check::Fail { detail, .. } = &self.membership {
            return Some(detail.clone());
        }
        None
    }
}

fn is_zero_col(v: &[Poly]) -> bool {
    v.iter().all(|p| p.is_zero())
}

pub fn res_verify(res: &GeomResolution, f: &Foliation, order: MonomialOrder) -> VerifyReport {
    let n = res.nvars();
    let d = res.ranks().len();
    let mut complex = Vec::new();
    for i in 2..=d {
        let outer = res.map_into(i - 1);
        let rows = res.target_rank(i - 1);
        let mut check = Check::Pass;
        for (b, col) in res.d(i).iter().enumerate() {
            let img = combine(col, outer, rows, n);
            if !is_zero_col(&img) {
                check = Check::Fail { detail: format!("composite nonzero on basis section {}", b + 1), witness: img };
                break;
            }
        }
        complex.push(LevelCheck { level: i, check });
    }

    let membership = {
        let a = Lifter::new(&res.anchor, n, n, order).expect("ranks");
        let b = Lifter::new(&f.generators, n, n, order).expect("ranks");
        let bad_f = f.generators.iter().position(|g| !a.contains(g));
        let bad_r = res.anchor.iter().position(|g| !b.contains(g));
        match (bad_f, bad_r) {
            (None, None) => Check::Pass,
            (Some(k), _) => Check::Fail {
                detail: format!("foliation generator {} not generated by the anchor columns", k + 1),
                witness: f.generators[k].clone(),
            },
            (_, Some(k)) => Check::Fail {
                detail: format!("anchor column {} not in the foliation", k + 1),
                witness: res.anchor[k].clone(),
            },
        }
    };

    let mut exactness = Vec::new();
    for i in 1..=d {
        let out = res.map_into(i);
        let rows = res.target_rank(i);
        let rank_i = res.rank(i);
        let syz = mod_syzygies_weighted(out, rows, n, &vec![0; rows], order).expect("ranks");
        let next = if i < d { res.d(i + 1).to_vec() } else { Vec::new() };
        let lifter = Lifter::new(&next, rank_i, n, order).expect("ranks");
        let mut check = Check::Pass;
        for s in syz {
            if !lifter.contains(&s) {
                check = Check::Fail { detail: "kernel element not in the image of the next differential".into(), witness: s };
                break;
            }
        }
        exactness.push(LevelCheck { level: i, check });
    }
    VerifyReport { complex, membership, exactness }
}

pub fn res_euler(res: &GeomResolution) -> i64 {
    res.ranks().iter().enumerate().map(|(i, &r)| if i % 2 == 0 { r as i64 } else { -(r as i64) }).sum()
}

// --- chain maps ---------------------------------------------------------------

/// `maps[i-1]` has one column per basis section of `E'_{-i}` (source), each a
/// vector over the basis of `E_{-i}` (target).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap {
    pub maps: Vec<Vec<Column>>,
}

impl ChainMap {
    pub fn level(&self, i: usize) -> &[Column] {
        self.maps.get(i - 1).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

pub fn res_chain_map(src: &GeomResolution, dst: &GeomResolution, order: MonomialOrder) -> Result<ChainMap, ResolutionError> {
    let n = src.nvars();
    let mut maps: Vec<Vec<Column>> = Vec::new();
    let ds = src.ranks().len();
    for i in 1..=ds {
        let dst_rank = dst.rank(i);
        let lifter = Lifter::new(dst.map_into(i), dst.target_rank(i), n, order).expect("ranks");
        let mut cols = Vec::new();
        for (b, col) in src.map_into(i).iter().enumerate() {
            // target of the square: rho' column, or phi_{i-1} applied to d'
            let v = if i == 1 { col.clone() } else { combine(col, &maps[i - 2], dst.rank(i - 1), n) };
            if dst_rank == 0 {
                if !is_zero_col(&v) {
                    return Err(ResolutionError::LiftFailure { level: i, column: b, remainder: v });
                }
                cols.push(Vec::new());
                continue;
            }
            match lifter.lift(&v) {
                Ok(a) => cols.push(a),
                Err(GroebnerError::NotInModule { remainder }) => {
                    return Err(ResolutionError::LiftFailure { level: i, column: b, remainder })
                }
                Err(e) => unreachable!("{e}"),
            }
        }
        maps.push(cols);
    }
    let phi = ChainMap { maps };
    assert!(chain_map_squares(src, dst, &phi), "chain map squares must commute");
    Ok(phi)
}

/// `rho phi_1 = rho'` and `d(i) phi_i = phi_{i-1} d'(i)`.
pub fn chain_map_squares(src: &GeomResolution, dst: &GeomResolution, phi: &ChainMap) -> bool {
    let n = src.nvars();
    for i in 1..=src.ranks().len() {
        for (b, col) in src.map_into(i).iter().enumerate() {
            let Some(phicol) = phi.level(i).get(b) else { return false };
            let lhs = if dst.rank(i) == 0 { vec![Poly::zero(n); dst.target_rank(i)] } else { combine(phicol, dst.map_into(i), dst.target_rank(i), n) };
            let rhs = if i == 1 { col.clone() } else { combine(col, phi.level(i - 1), dst.rank(i - 1), n) };
            if lhs != rhs {
                return false;
            }
        }
    }
    true
}

// --- local ring ---------------------------------------------------------------

/// Fraction `num / den` with `den(m) != 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFn {
    pub num: Poly,
    pub den: Poly,
}

impl LocalFn {
    pub fn from_poly(p: Poly) -> Self {
        let n = p.nvars();
        LocalFn { num: p, den: Poly::one(n) }
    }

    fn normalize(num: Poly, den: Poly) -> Self {
        let n = num.nvars();
        if num.is_zero() {
            return LocalFn { num, den: Poly::one(n) };
        }
        if den.is_constant() {
            let c = den.constant_term().recip();
            return LocalFn { num: num.scale(&c), den: Poly::one(n) };
        }
        if let Some(qt) = num.exact_div(&den) {
            return LocalFn { num: qt, den: Poly::one(n) };
        }
        // leading coefficient of the denominator is one
        let lc = den.leading(MonomialOrder::DegRevLex).map(|(_, c)| c.recip()).unwrap();
        LocalFn { num: num.scale(&lc), den: den.scale(&lc) }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, m: &[Q]) -> Q {
        self.num.eval(m) / self.den.eval(m)
    }

    pub fn add(&self, o: &LocalFn) -> LocalFn {
        if self.den == o.den {
            return Self::normalize(&self.num + &o.num, self.den.clone());
        }
        Self::normalize(&(&self.num * &o.den) + &(&o.num * &self.den), &self.den * &o.den)
    }

    pub fn neg(&self) -> LocalFn {
        LocalFn { num: -&self.num, den: self.den.clone() }
    }

    pub fn sub(&self, o: &LocalFn) -> LocalFn {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &LocalFn) -> LocalFn {
        Self::normalize(&self.num * &o.num, &self.den * &o.den)
    }

    /// Inverse of a unit of the local ring.
    pub fn inv(&self) -> LocalFn {
        Self::normalize(self.den.clone(), self.num.clone())
    }

    pub fn fmt_with(&self, names: &[String]) -> String {
        if self.den.is_constant() {
            self.num.fmt_with(names)
        } else {
            format!("({})/({})", self.num.fmt_with(names), self.den.fmt_with(names))
        }
    }
}

/// Matrix of local functions at `point`, stored by columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalizedMatrix {
    pub rows: usize,
    pub cols: Vec<Vec<LocalFn>>,
}

impl LocalizedMatrix {
    pub fn from_columns(rows: usize, cols: &[Column]) -> Self {
        LocalizedMatrix { rows, cols: cols.iter().map(|c| c.iter().cloned().map(LocalFn::from_poly).collect()).collect() }
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn eval(&self, m: &[Q]) -> QMatrix {
        let mut out = QMatrix::zeros(self.rows, self.cols.len());
        for (j, c) in self.cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                out.set(i, j, v.eval(m));
            }
        }
        out
    }

    fn remove_row(&mut self, r: usize) {
        for c in &mut self.cols {
            c.remove(r);
        }
        self.rows -= 1;
    }

    fn remove_col(&mut self, c: usize) {
        self.cols.remove(c);
    }
}

/// Resolution over the local ring at `point`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalResolution {
    pub var_names: Vec<String>,
    pub point: Vec<Q>,
    pub anchor: LocalizedMatrix,
    pub diffs: Vec<LocalizedMatrix>,
    /// Indices of the surviving basis sections of the input resolution.
    pub kept: Vec<Vec<usize>>,
}

impl LocalResolution {
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.anchor.ncols()];
        r.extend(self.diffs.iter().map(|d| d.ncols()));
        while r.len() > 1 && *r.last().unwrap() == 0 {
            r.pop();
        }
        r
    }

    pub fn euler(&self) -> i64 {
        self.ranks().iter().enumerate().map(|(i, &r)| if i % 2 == 0 { r as i64 } else { -(r as i64) }).sum()
    }

    pub fn is_minimal(&self) -> bool {
        self.diffs.iter().all(|d| d.eval(&self.point).is_zero())
    }
}

/// Cancels unit entries of the differentials at `m` until every `d(i)(m)`
/// vanishes (Gaussian elimination over the local ring).
pub fn res_minimal_at(res: &GeomResolution, m: &[Q]) -> Result<LocalResolution, ResolutionError> {
    let n = res.nvars();
    if m.len() != n {
        return Err(ResolutionError::BadPoint { expected: n, found: m.len() });
    }
    let ranks = res.ranks();
    let mut anchor = LocalizedMatrix::from_columns(n, &res.anchor);
    let mut diffs: Vec<LocalizedMatrix> =
        (2..=ranks.len()).map(|i| LocalizedMatrix::from_columns(ranks[i - 2], res.d(i))).collect();
    let mut kept: Vec<Vec<usize>> = ranks.iter().map(|&r| (0..r).collect()).collect();
    loop {
        // first unit entry, lowest level first, preferring constant entries
        let mut pick: Option<(usize, usize, usize)> = None;
        'outer: for (k, d) in diffs.iter().enumerate() {
            let mut first = None;
            for (c, col) in d.cols.iter().enumerate() {
                for (r, v) in col.iter().enumerate() {
                    if !v.eval(m).is_zero() {
                        if v.num.is_constant() && v.den.is_constant() {
                            pick = Some((k, r, c));
                            break 'outer;
                        }
                        first.get_or_insert((k, r, c));
                    }
                }
            }
            if first.is_some() {
                pick = first;
                break;
            }
        }
        let Some((k, r, c)) = pick else { break };
        // d = diffs[k] : level k+2 -> level k+1; cancel column c and row r
        let d = &diffs[k];
        let u_inv = d.cols[c][r].inv();
        if u_inv.eval(m).is_zero() {
            return Err(ResolutionError::PivotFailure { level: k + 2 });
        }
        let pivot_col = d.cols[c].clone();
        let mut nd = d.clone();
        for (j, col) in nd.cols.iter_mut().enumerate() {
            if j == c {
                continue;
            }
            let f = col[r].mul(&u_inv);
            if f.is_zero() {
                continue;
            }
            for (i, v) in col.iter_mut().enumerate() {
                if i != r {
                    *v = v.sub(&pivot_col[i].mul(&f));
                }
            }
        }
        nd.remove_col(c);
        nd.remove_row(r);
        diffs[k] = nd;
        if k + 1 < diffs.len() {
            diffs[k + 1].remove_row(c);
        }
        if k == 0 {
            anchor.remove_col(r);
        } else {
            diffs[k - 1].remove_col(r);
        }
        kept[k + 1].remove(c);
        kept[k].remove(r);
    }
    while diffs.last().is_some_and(|d| d.ncols() == 0) {
        diffs.pop();
    }
    Ok(LocalResolution { var_names: res.var_names.clone(), point: m.to_vec(), anchor, diffs, kept })
}

/// Any resolution whose maps can be evaluated at a point.
pub trait PointEval {
    fn ranks_at(&self) -> Vec<usize>;
    fn anchor_at(&self, m: &[Q]) -> QMatrix;
    /// `d(i)(m)` for `i >= 2`.
    fn d_at(&self, i: usize, m: &[Q]) -> QMatrix;
    fn nvars_at(&self) -> usize;
}

fn eval_cols(rows: usize, cols: &[Column], m: &[Q]) -> QMatrix {
    let mut out = QMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, p) in c.iter().enumerate() {
            out.set(i, j, p.eval(m));
        }
    }
    out
}

impl PointEval for GeomResolution {
    fn ranks_at(&self) -> Vec<usize> {
        self.ranks()
    }
    fn anchor_at(&self, m: &[Q]) -> QMatrix {
        eval_cols(self.nvars(), &self.anchor, m)
    }
    fn d_at(&self, i: usize, m: &[Q]) -> QMatrix {
        eval_cols(self.rank(i - 1), self.d(i), m)
    }
    fn nvars_at(&self) -> usize {
        self.nvars()
    }
}

impl PointEval for LocalResolution {
    fn ranks_at(&self) -> Vec<usize> {
        self.ranks()
    }
    fn anchor_at(&self, m: &[Q]) -> QMatrix {
        self.anchor.eval(m)
    }
    fn d_at(&self, i: usize, m: &[Q]) -> QMatrix {
        match self.diffs.get(i - 2) {
            Some(d) => d.eval(m),
            None => QMatrix::zeros(self.ranks().get(i - 2).copied().unwrap_or(0), 0),
        }
    }
    fn nvars_at(&self) -> usize {
        self.var_names.len()
    }
}

pub fn is_minimal_at(res: &impl PointEval, m: &[Q]) -> Option<usize> {
    let d = res.ranks_at().len();
    (2..=d).find(|&i| !res.d_at(i, m).is_zero())
}
