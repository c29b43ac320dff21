//! Polynomial expressions and the `key = value` specification format.

use std::collections::BTreeSet;
use std::fmt;

use lieinfty::buildq::Builtin;
use lieinfty::poly::{MonomialOrder, Poly, Q};
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, column, message: message.into() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(num_bigint::BigInt),
    Ident(String),
    Sym(char),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    col0: usize,
    end: usize,
}

impl Lexer {
    fn new(src: &str, line: usize, col0: usize) -> Result<Self, ParseError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[s..i].iter().collect();
                toks.push((Tok::Num(text.parse().expect("digits")), s));
            } else if c.is_alphabetic() || c == '_' {
                let s = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[s..i].iter().collect()), s));
            } else if "+-*^/(),[]".contains(c) {
                toks.push((Tok::Sym(c), i));
                i += 1;
            } else {
                return err(line, col0 + i, format!("unexpected character '{c}'"));
            }
        }
        Ok(Lexer { toks, pos: 0, line, col0, end: chars.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.col0 + self.toks.get(self.pos).map_or(self.end, |(_, c)| *c)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        err(self.line, self.column(), msg)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.fail(format!("expected '{c}'"))
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }
}

/// Variable resolution while parsing: a fixed list, or a growing list in
/// order of first appearance.
enum Vars<'a> {
    Fixed(&'a [String]),
    Growing(Vec<String>),
}

impl Vars<'_> {
    fn names(&self) -> &[String] {
        match self {
            Vars::Fixed(v) => v,
            Vars::Growing(v) => v,
        }
    }

    fn index(&mut self, name: &str) -> Option<usize> {
        if let Some(i) = self.names().iter().position(|v| v == name) {
            return Some(i);
        }
        match self {
            Vars::Fixed(_) => None,
            Vars::Growing(v) => {
                v.push(name.to_string());
                Some(v.len() - 1)
            }
        }
    }
}

/// Parsed expression before the variable count is known.
#[derive(Clone, Debug)]
enum Expr {
    Const(Q),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    fn to_poly(&self, n: usize) -> Poly {
        match self {
            Expr::Const(c) => Poly::constant(n, c.clone()),
            Expr::Var(i) => Poly::var(n, *i),
            Expr::Add(a, b) => &a.to_poly(n) + &b.to_poly(n),
            Expr::Sub(a, b) => &a.to_poly(n) - &b.to_poly(n),
            Expr::Mul(a, b) => &a.to_poly(n) * &b.to_poly(n),
            Expr::Neg(a) => -&a.to_poly(n),
            Expr::Pow(a, e) => a.to_poly(n).pow(*e),
        }
    }
}

fn expr(lx: &mut Lexer, vars: &mut Vars) -> Result<Expr, ParseError> {
    let mut acc = term(lx, vars)?;
    loop {
        if lx.eat('+') {
            acc = Expr::Add(Box::new(acc), Box::new(term(lx, vars)?));
        } else if lx.eat('-') {
            acc = Expr::Sub(Box::new(acc), Box::new(term(lx, vars)?));
        } else {
            return Ok(acc);
        }
    }
}

fn term(lx: &mut Lexer, vars: &mut Vars) -> Result<Expr, ParseError> {
    let mut acc = unary(lx, vars)?;
    while lx.eat('*') {
        acc = Expr::Mul(Box::new(acc), Box::new(unary(lx, vars)?));
    }
    Ok(acc)
}

fn unary(lx: &mut Lexer, vars: &mut Vars) -> Result<Expr, ParseError> {
    if lx.eat('-') {
        return Ok(Expr::Neg(Box::new(unary(lx, vars)?)));
    }
    if lx.eat('+') {
        return unary(lx, vars);
    }
    power(lx, vars)
}

fn power(lx: &mut Lexer, vars: &mut Vars) -> Result<Expr, ParseError> {
    let base = atom(lx, vars)?;
    if lx.eat('^') {
        match lx.peek().cloned() {
            Some(Tok::Num(e)) => {
                let e: u32 = e.try_into().or_else(|_| lx.fail("exponent too large"))?;
                lx.pos += 1;
                return Ok(Expr::Pow(Box::new(base), e));
            }
            _ => return lx.fail("expected a non-negative integer exponent"),
        }
    }
    Ok(base)
}

fn atom(lx: &mut Lexer, vars: &mut Vars) -> Result<Expr, ParseError> {
    match lx.peek().cloned() {
        Some(Tok::Num(n)) => {
            lx.pos += 1;
            if lx.eat('/') {
                match lx.peek().cloned() {
                    Some(Tok::Num(d)) if !d.is_zero() => {
                        lx.pos += 1;
                        Ok(Expr::Const(Q::new(n, d)))
                    }
                    Some(Tok::Num(_)) => lx.fail("zero denominator"),
                    _ => lx.fail("expected an integer denominator"),
                }
            } else {
                Ok(Expr::Const(Q::from_integer(n)))
            }
        }
        Some(Tok::Ident(name)) => match vars.index(&name) {
            Some(i) => {
                lx.pos += 1;
                Ok(Expr::Var(i))
            }
            None => lx.fail(format!("unknown variable '{name}'")),
        },
        Some(Tok::Sym('(')) => {
            lx.pos += 1;
            let e = expr(lx, vars)?;
            lx.expect(')')?;
            Ok(e)
        }
        Some(_) => lx.fail("expected a number, a variable or '('"),
        None => lx.fail("unexpected end of expression"),
    }
}

/// Parses a polynomial over the given variables.
pub fn parse_poly(src: &str, vars: &[String]) -> Result<Poly, ParseError> {
    parse_poly_at(src, vars, 1, 1)
}

fn parse_poly_at(src: &str, vars: &[String], line: usize, col: usize) -> Result<Poly, ParseError> {
    let mut lx = Lexer::new(src, line, col)?;
    let mut v = Vars::Fixed(vars);
    let e = expr(&mut lx, &mut v)?;
    if !lx.at_end() {
        return lx.fail("trailing input");
    }
    Ok(e.to_poly(vars.len()))
}

/// Parses a polynomial, collecting variables in order of first appearance.
pub fn parse_poly_free(src: &str) -> Result<(Vec<String>, Poly), ParseError> {
    parse_poly_free_at(src, 1, 1)
}

fn parse_poly_free_at(src: &str, line: usize, col: usize) -> Result<(Vec<String>, Poly), ParseError> {
    let mut lx = Lexer::new(src, line, col)?;
    let mut v = Vars::Growing(Vec::new());
    let e = expr(&mut lx, &mut v)?;
    if !lx.at_end() {
        return lx.fail("trailing input");
    }
    let names = v.names().to_vec();
    Ok((names.clone(), e.to_poly(names.len())))
}

/// A rational literal such as `-3/4`.
fn parse_rational(src: &str, line: usize, col: usize) -> Result<Q, ParseError> {
    let p = parse_poly_at(src, &[], line, col)?;
    if !p.is_constant() {
        return err(line, col, "expected a rational number");
    }
    Ok(p.constant_term())
}

/// Splits `a, b, (c, d)` at top-level commas, returning pieces with their
/// column offsets.
fn split_top(s: &str, col: usize) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push((s[start..i].to_string(), col + s[..start].chars().count()));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((s[start..].to_string(), col + s[..start].chars().count()));
    out
}

/// Strips one pair of the given delimiters, with the column of the content.
fn strip_delims(s: &str, open: char, close: char, line: usize, col: usize) -> Result<(&str, usize), ParseError> {
    let lead = s.len() - s.trim_start().len();
    let t = s.trim();
    if !t.starts_with(open) || !t.ends_with(close) || t.len() < 2 {
        return err(line, col + lead, format!("expected '{open}...{close}'"));
    }
    Ok((&t[1..t.len() - 1], col + lead + 1))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Generators { variables: Vec<String>, generators: Vec<Vec<Poly>> },
    Builtin(Builtin),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoliationSpec {
    pub source: Source,
    pub point: Option<Vec<Q>>,
    pub max_arity: Option<i64>,
    pub order: MonomialOrder,
}

impl FoliationSpec {
    pub fn nvars(&self) -> usize {
        match &self.source {
            Source::Generators { variables, .. } => variables.len(),
            Source::Builtin(Builtin::Sl2) | Source::Builtin(Builtin::Order2) => 2,
            Source::Builtin(Builtin::Origin(n)) => *n,
            Source::Builtin(Builtin::Koszul { var_names, .. }) => var_names.len(),
        }
    }

    /// Short name for reports.
    pub fn label(&self) -> String {
        match &self.source {
            Source::Generators { variables, generators } => {
                format!("{} generators on {}", generators.len(), variables.join(", "))
            }
            Source::Builtin(b) => b.label(),
        }
    }
}

impl fmt::Display for FoliationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `sl2`, `origin(n)`, `order2` or `koszul(phi)`. Koszul variables are the
/// declared ones when given, otherwise those of `phi` in order of appearance.
pub fn parse_builtin(src: &str, variables: Option<&[String]>) -> Result<Builtin, ParseError> {
    parse_builtin_at(src, variables, 1, 1)
}

fn parse_builtin_at(src: &str, variables: Option<&[String]>, line: usize, col: usize) -> Result<Builtin, ParseError> {
    let lead = src.len() - src.trim_start().len();
    let t = src.trim();
    let col = col + lead;
    let (head, arg) = match t.find('(') {
        Some(i) => {
            if !t.ends_with(')') {
                return err(line, col + t.chars().count(), "expected ')'");
            }
            (t[..i].trim(), Some((&t[i + 1..t.len() - 1], col + t[..=i].chars().count())))
        }
        None => (t, None),
    };
    match (head, arg) {
        ("sl2", None) => Ok(Builtin::Sl2),
        ("order2", None) => Ok(Builtin::Order2),
        ("origin", Some((a, c))) => {
            let n: usize = a.trim().parse().or_else(|_| err(line, c, "expected a positive integer"))?;
            if n == 0 {
                return err(line, c, "origin needs at least one variable");
            }
            Ok(Builtin::Origin(n))
        }
        ("koszul", Some((a, c))) => {
            let (var_names, phi) = match variables {
                Some(v) => (v.to_vec(), parse_poly_at(a, v, line, c)?),
                None => parse_poly_free_at(a, line, c)?,
            };
            if var_names.is_empty() {
                return err(line, c, "koszul needs a non-constant polynomial");
            }
            Ok(Builtin::Koszul { var_names, phi })
        }
        _ => err(line, col, format!("unknown builtin '{t}' (expected sl2, origin(n), order2 or koszul(phi))")),
    }
}

pub fn parse_point(src: &str, n: Option<usize>) -> Result<Vec<Q>, ParseError> {
    parse_point_at(src, n, 1, 1)
}

fn parse_point_at(src: &str, n: Option<usize>, line: usize, col: usize) -> Result<Vec<Q>, ParseError> {
    let (inner, c) = if src.trim().starts_with('(') { strip_delims(src, '(', ')', line, col)? } else { (src, col) };
    let pieces = split_top(inner, c);
    let pt = pieces.iter().map(|(p, c)| parse_rational(p, line, *c)).collect::<Result<Vec<_>, _>>()?;
    if let Some(n) = n {
        if pt.len() != n {
            return err(line, col, format!("point has {} coordinates, expected {n}", pt.len()));
        }
    }
    Ok(pt)
}

pub fn parse_order(src: &str) -> Option<MonomialOrder> {
    match src.trim() {
        "degrevlex" => Some(MonomialOrder::DegRevLex),
        "lex" => Some(MonomialOrder::Lex),
        _ => None,
    }
}

/// Parses a specification document.
pub fn cli_parse(text: &str) -> Result<FoliationSpec, ParseError> {
    let mut variables: Option<(Vec<String>, usize)> = None;
    let mut generators: Vec<(String, usize, usize)> = Vec::new();
    let mut builtin: Option<(String, usize, usize)> = None;
    let mut point: Option<(String, usize, usize)> = None;
    let mut max_arity = None;
    let mut order = MonomialOrder::DegRevLex;
    let mut seen = BTreeSet::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            return err(line, 1 + body.len() - body.trim_start().len(), "expected 'key = value'");
        };
        let key = body[..eq].trim();
        let vcol = eq + 2;
        let value = &body[eq + 1..];
        let kcol = 1 + body.len() - body.trim_start().len();
        if key != "generator" && !seen.insert(key.to_string()) {
            return err(line, kcol, format!("duplicate key '{key}'"));
        }
        match key {
            "variables" => {
                let (inner, c) = strip_delims(value, '[', ']', line, vcol)?;
                let mut names = Vec::new();
                for (p, pc) in split_top(inner, c) {
                    let name = p.trim();
                    let ok = name.chars().next().is_some_and(|ch| ch.is_alphabetic() || ch == '_')
                        && name.chars().all(|ch| ch.is_alphanumeric() || ch == '_');
                    if !ok {
                        return err(line, pc, format!("invalid variable name '{name}'"));
                    }
                    if names.contains(&name.to_string()) {
                        return err(line, pc, format!("variable '{name}' declared twice"));
                    }
                    names.push(name.to_string());
                }
                variables = Some((names, line));
            }
            "generator" => generators.push((value.to_string(), line, vcol)),
            "builtin" => builtin = Some((value.to_string(), line, vcol)),
            "point" => point = Some((value.to_string(), line, vcol)),
            "max_arity" => {
                let v: i64 = value.trim().parse().or_else(|_| err(line, vcol, "expected an integer"))?;
                if v < 0 {
                    return err(line, vcol, "max_arity must be non-negative");
                }
                max_arity = Some(v);
            }
            "order" => {
                order = parse_order(value).map_or_else(|| err(line, vcol, "expected degrevlex or lex"), Ok)?;
            }
            _ => return err(line, kcol, format!("unknown key '{key}'")),
        }
    }
    let source = match (builtin, generators.is_empty()) {
        (Some(_), false) => {
            let (_, l, _) = &generators[0];
            return err(*l, 1, "a builtin cannot be combined with generator lines");
        }
        (Some((b, l, c)), true) => Source::Builtin(parse_builtin_at(&b, variables.as_ref().map(|v| v.0.as_slice()), l, c)?),
        (None, true) => {
            let l = variables.as_ref().map_or(1, |v| v.1);
            return err(l, 1, "no generators given");
        }
        (None, false) => {
            let Some((vars, _)) = variables else {
                return err(generators[0].1, 1, "generator lines need a 'variables' declaration");
            };
            let mut gens = Vec::new();
            for (g, l, c) in &generators {
                let (inner, ic) = strip_delims(g, '[', ']', *l, *c)?;
                let pieces = split_top(inner, ic);
                if pieces.len() != vars.len() {
                    return err(*l, *c, format!("generator has {} coefficients, expected {}", pieces.len(), vars.len()));
                }
                gens.push(pieces.iter().map(|(p, pc)| parse_poly_at(p, &vars, *l, *pc)).collect::<Result<Vec<_>, _>>()?);
            }
            Source::Generators { variables: vars, generators: gens }
        }
    };
    let mut spec = FoliationSpec { source, point: None, max_arity, order };
    if let Some((p, l, c)) = point {
        spec.point = Some(parse_point_at(&p, Some(spec.nvars()), l, c)?);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lieinfty::poly::q;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn polynomial_grammar() {
        let v = names(&["x", "y"]);
        let p = parse_poly("(x + 1/2*y)^2 - -x*y", &v).unwrap();
        assert_eq!(p.fmt_with(&v), "x^2 + 2*x*y + 1/4*y^2");
        assert_eq!(parse_poly("3/6", &v).unwrap(), Poly::constant(2, lieinfty::poly::qf(1, 2)));
    }

    #[test]
    fn errors_carry_positions() {
        let v = names(&["x", "y"]);
        let e = parse_poly("x + z", &v).unwrap_err();
        assert_eq!((e.line, e.column), (1, 5));
        let e = parse_poly("x ^ y", &v).unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_poly("(x", &v).unwrap_err();
        assert_eq!(e.column, 3);
        assert!(parse_poly("1/0", &v).is_err());
        assert!(parse_poly("x $ y", &v).is_err());
    }

    #[test]
    fn free_variables_in_order_of_appearance() {
        let (v, p) = parse_poly_free("z^3 + x^3 + y^3").unwrap();
        assert_eq!(v, names(&["z", "x", "y"]));
        assert_eq!(p.total_degree(), Some(3));
    }

    #[test]
    fn sl2_spec_matches_builtin_foliation() {
        let spec = cli_parse("variables = [x, y]\ngenerator = [x, -y]\ngenerator = [0, x]\ngenerator = [y, 0]\npoint = (0, 0)\n").unwrap();
        let Source::Generators { generators, .. } = &spec.source else { panic!() };
        let res = lieinfty::buildq::sl2_resolution();
        assert_eq!(generators, &res.anchor);
        assert_eq!(spec.point, Some(vec![q(0), q(0)]));
    }

    #[test]
    fn builtin_lines() {
        let spec = cli_parse("builtin = origin(3)\n").unwrap();
        assert_eq!(spec.source, Source::Builtin(Builtin::Origin(3)));
        let spec = cli_parse("builtin = koszul(x^3+y^3+z^3+t^3)\npoint = (0,0,0,0)\norder = lex\nmax_arity = 3").unwrap();
        assert_eq!(spec.nvars(), 4);
        assert_eq!(spec.order, MonomialOrder::Lex);
        assert_eq!(spec.max_arity, Some(3));
    }

    #[test]
    fn rejections() {
        assert!(cli_parse("variables = [x, y]\n").is_err());
        assert!(cli_parse("").is_err());
        let e = cli_parse("variables = [x, y]\ncolour = red\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 1));
        let e = cli_parse("variables = [x, y]\ngenerator = [x]\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(cli_parse("builtin = sl3\n").is_err());
        assert!(cli_parse("builtin = sl2\npoint = (0)\n").is_err());
        let e = cli_parse("variables = [x, y]\ngenerator = [x, y +]\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 20));
    }
}
