//! Polynomial vector fields, involutivity and structure functions.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::groebner::{Column, GroebnerError, Lifter};
use crate::linalg::QMatrix;
use crate::poly::{q, qf, MonomialOrder, Poly, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FoliationError {
    #[error("generator {index} has {found} components, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("[X{}, X{}] is not in the module generated by the foliation (normal form {})", .i + 1, .j + 1, fmt_plain(.remainder))]
    NotInvolutive { i: usize, j: usize, bracket: Column, remainder: Column },
    #[error("point has {found} coordinates, expected {expected}")]
    BadPoint { expected: usize, found: usize },
}

fn fmt_plain(c: &[Poly]) -> String {
    format!("[{}]", c.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))
}

/// Finitely many polynomial vector fields `X_i = sum_k X_i^k d/dx_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Foliation {
    pub var_names: Vec<String>,
    pub generators: Vec<Column>,
}

impl Foliation {
    pub fn new(var_names: Vec<String>, generators: Vec<Column>) -> Result<Self, FoliationError> {
        let n = var_names.len();
        for (i, g) in generators.iter().enumerate() {
            if g.len() != n {
                return Err(FoliationError::DimensionMismatch { index: i, expected: n, found: g.len() });
            }
        }
        Ok(Foliation { var_names, generators })
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// `X[f] = sum_k X^k df/dx_k`
pub fn vf_apply(x: &[Poly], f: &Poly) -> Poly {
    let mut r = Poly::zero(f.nvars());
    for (k, xk) in x.iter().enumerate() {
        if xk.is_zero() {
            continue;
        }
        r.add_product(xk, &f.derivative(k));
    }
    r
}

/// Lie bracket of vector fields.
pub fn vf_bracket(x: &[Poly], y: &[Poly]) -> Column {
    x.iter().zip(y).map(|(xi, yi)| &vf_apply(x, yi) - &vf_apply(y, xi)).collect()
}

/// Skew-symmetric structure functions: `[X_i, X_j] = sum_k c[i][j][k] X_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureFunctions {
    pub c: Vec<Vec<Column>>,
}

impl StructureFunctions {
    pub fn get(&self, i: usize, j: usize) -> &Column {
        &self.c[i][j]
    }
}

/// Certifies `[X_i, X_j]` lies in the module and returns the structure
/// functions. The lift for `i < j` is kept and `c_ji = -c_ij`.
pub fn fol_involutivity(f: &Foliation, order: MonomialOrder) -> Result<StructureFunctions, FoliationError> {
    let n = f.nvars();
    let r = f.len();
    let lifter = Lifter::new(&f.generators, n, n, order).expect("ranks validated");
    let zero = vec![Poly::zero(n); r];
    let mut c = vec![vec![zero.clone(); r]; r];
    for i in 0..r {
        for j in i + 1..r {
            let b = vf_bracket(&f.generators[i], &f.generators[j]);
            match lifter.lift(&b) {
                Ok(a) => {
                    c[j][i] = a.iter().map(|p| -p).collect();
                    c[i][j] = a;
                }
                Err(GroebnerError::NotInModule { remainder }) => {
                    return Err(FoliationError::NotInvolutive { i, j, bracket: b, remainder });
                }
                Err(e) => unreachable!("{e}"),
            }
        }
    }
    Ok(StructureFunctions { c })
}

/// `J_ijk^l = sum_m c_ij^m c_mk^l - X_k[c_ij^l]` plus cyclic permutations,
/// for `i < j < k`. `sum_l J_ijk^l X_l = 0` always holds.
pub fn fol_jacobi_defect(f: &Foliation, s: &StructureFunctions) -> BTreeMap<(usize, usize, usize), Column> {
    let n = f.nvars();
    let r = f.len();
    let term = |i: usize, j: usize, k: usize| -> Column {
        (0..r)
            .map(|l| {
                let mut acc = Poly::zero(n);
                for m in 0..r {
                    acc.add_product(&s.c[i][j][m], &s.c[m][k][l]);
                }
                acc.sub_assign_ref(&vf_apply(&f.generators[k], &s.c[i][j][l]));
                acc
            })
            .collect()
    };
    let mut out = BTreeMap::new();
    for i in 0..r {
        for j in i + 1..r {
            for k in j + 1..r {
                let (a, b, c) = (term(i, j, k), term(j, k, i), term(k, i, j));
                let v: Column = (0..r).map(|l| &(&a[l] + &b[l]) + &c[l]).collect();
                out.insert((i, j, k), v);
            }
        }
    }
    out
}

/// Evaluates `sum_l coeffs_l X_l` as a vector field.
pub fn combine_fields(f: &Foliation, coeffs: &[Poly]) -> Column {
    crate::groebner::combine(coeffs, &f.generators, f.nvars(), f.nvars())
}

/// Dimension of the span of the generators at `m`.
pub fn fol_rank_at(f: &Foliation, m: &[Q]) -> Result<usize, FoliationError> {
    if m.len() != f.nvars() {
        return Err(FoliationError::BadPoint { expected: f.nvars(), found: m.len() });
    }
    let mut mat = QMatrix::zeros(f.nvars(), f.len());
    for (j, g) in f.generators.iter().enumerate() {
        for (i, p) in g.iter().enumerate() {
            mat.set(i, j, p.eval(m));
        }
    }
    Ok(mat.rank())
}

/// Structure functions with `c_ij = 1/2 (lift_ij - lift_ji)`, for generators
/// whose lifts were computed independently in both orders.
pub fn skew_symmetrize(raw: &[Vec<Column>]) -> StructureFunctions {
    let r = raw.len();
    let half = qf(1, 2);
    let c = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| raw[i][j].iter().zip(&raw[j][i]).map(|(a, b)| (a - b).scale(&half)).collect())
                .collect()
        })
        .collect();
    StructureFunctions { c }
}

pub fn point_is_zero(m: &[Q]) -> bool {
    m.iter().all(|v| v.is_zero())
}

pub fn int_point(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| q(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sl2() -> Foliation {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let z = Poly::zero(2);
        Foliation::new(vec!["x".into(), "y".into()], vec![vec![x.clone(), -&y], vec![z.clone(), x], vec![y, z]]).unwrap()
    }

    #[test]
    fn sl2_structure() {
        let f = sl2();
        let s = fol_involutivity(&f, MonomialOrder::DegRevLex).unwrap();
        let n = |v: i64| Poly::from_int(2, v);
        // [h,e] = 2e, [h,f] = -2f, [e,f] = h
        assert_eq!(s.c[0][1], vec![n(0), n(2), n(0)]);
        assert_eq!(s.c[0][2], vec![n(0), n(0), n(-2)]);
        assert_eq!(s.c[1][2], vec![n(1), n(0), n(0)]);
        for v in fol_jacobi_defect(&f, &s).values() {
            assert!(combine_fields(&f, v).iter().all(|p| p.is_zero()));
        }
    }

    #[test]
    fn bracket_of_dx_and_x2_dy() {
        let x = Poly::var(2, 0);
        let one = Poly::one(2);
        let z = Poly::zero(2);
        let b = vf_bracket(&[one, z.clone()], &[z, &x * &x]);
        assert_eq!(b, vec![Poly::zero(2), x.scale(&q(2))]);
    }

    #[test]
    fn ranks() {
        assert_eq!(fol_rank_at(&sl2(), &int_point(&[1, 0])).unwrap(), 2);
        assert_eq!(fol_rank_at(&sl2(), &int_point(&[0, 0])).unwrap(), 0);
    }

    #[test]
    fn non_involutive_is_reported() {
        let x = Poly::var(3, 0);
        let one = Poly::one(3);
        let z = Poly::zero(3);
        let f = Foliation::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec![one, z.clone(), z.clone()], vec![z.clone(), z, x]],
        )
        .unwrap();
        assert!(matches!(fol_involutivity(&f, MonomialOrder::DegRevLex), Err(FoliationError::NotInvolutive { .. })));
    }
}
