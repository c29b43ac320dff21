//! Pipeline orchestration and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use lieinfty::buildq::{bq_almost_lie, bq_builtin, bq_correct_arity1, bq_extend};
use lieinfty::foliation::{fol_involutivity, fol_rank_at, Foliation, FoliationError};
use lieinfty::isotropy::{
    fmt_vector, iso_ce_class_vanishes, iso_linfty_any, iso_minimal_rank_verdict, iso_nmrla_cocycle, ClassVerdict,
};
use lieinfty::poly::{fmt_rational, MonomialOrder, Q};
use lieinfty::qfield::{brackets_from_q, fmt_vf, q_verify_homological, AnchoredQ, Verdict};
use lieinfty::resolution::{res_build, res_euler, res_minimal_at, res_verify, Check, GeomResolution};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::parse::{FoliationSpec, Source};

pub const SCHEMA_VERSION: u32 = 1;

/// How far the pipeline runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Resolve,
    Build,
    Verify,
    Isotropy,
    Nmrla,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Involutivity {
    pub variables: Vec<String>,
    pub generators: Vec<String>,
    /// `[X_i, X_j] = sum_k c_ij^k X_k` for `i < j`, nonzero entries only.
    pub structure_functions: Vec<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct LevelVerdict {
    pub level: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ResolutionSection {
    pub ranks: Vec<usize>,
    pub euler_rank: i64,
    pub section_names: Vec<Vec<String>>,
    pub anchor: Vec<String>,
    pub differentials: Vec<Vec<String>>,
    pub complex: Vec<LevelVerdict>,
    pub membership: bool,
    pub exactness: Vec<LevelVerdict>,
    pub passed: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct StructureSection {
    pub max_arity: i64,
    /// Keyed by arity.
    pub brackets: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ArityVerdict {
    pub arity: i64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residue: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct HomologicalSection {
    pub max_arity: i64,
    pub verdicts: Vec<ArityVerdict>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct IsotropySection {
    pub point: Vec<String>,
    pub foliation_rank: usize,
    pub minimal_ranks: Vec<usize>,
    pub dims: BTreeMap<String, usize>,
    pub basis: Vec<Vec<String>>,
    pub transferred: bool,
    pub brackets: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct NmrlaSection {
    pub cocycle: Vec<String>,
    pub class_vanishes: bool,
    /// Primitive `theta` when the class vanishes, otherwise the certificate.
    pub witness: Vec<String>,
    pub rank: usize,
    pub statement: String,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub schema_version: u32,
    pub input: String,
    pub order: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub involutivity: Option<Involutivity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homological: Option<HomologicalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isotropy: Option<IsotropySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmrla: Option<NmrlaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    /// Wall-clock seconds per stage; shown in text output only so that the
    /// JSON stays byte-deterministic.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl Report {
    fn new(spec: &FoliationSpec) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            input: spec.label(),
            order: match spec.order {
                MonomialOrder::DegRevLex => "degrevlex".into(),
                MonomialOrder::Lex => "lex".into(),
            },
            involutivity: None,
            resolution: None,
            structure: None,
            homological: None,
            isotropy: None,
            nmrla: None,
            failure: None,
            timings: Vec::new(),
        }
    }

    fn fail(mut self, stage: &str, message: impl Into<String>) -> Self {
        self.failure = Some(Failure { stage: stage.into(), message: message.into() });
        self
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

fn fmt_point(m: &[Q]) -> Vec<String> {
    m.iter().map(fmt_rational).collect()
}

fn fmt_columns(cols: &[Vec<lieinfty::poly::Poly>], names: &[String]) -> Vec<String> {
    cols.iter()
        .map(|c| format!("[{}]", c.iter().map(|p| p.fmt_with(names)).collect::<Vec<_>>().join(", ")))
        .collect()
}

fn involutivity_section(f: &Foliation, order: MonomialOrder) -> Result<Involutivity, String> {
    let names = &f.var_names;
    let s = fol_involutivity(f, order).map_err(|e| e.to_string())?;
    let mut table = Vec::new();
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let terms: Vec<String> = s.c[i][j]
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(k, p)| {
                    let c = p.fmt_with(names);
                    if p.is_constant() && p.constant_term().is_one() {
                        format!("X{}", k + 1)
                    } else if p.len() == 1 {
                        format!("{}*X{}", c, k + 1)
                    } else {
                        format!("({})*X{}", c, k + 1)
                    }
                })
                .collect();
            if !terms.is_empty() {
                let rhs = terms.join(" + ").replace(" + -", " - ");
                table.push(format!("[X{}, X{}] = {}", i + 1, j + 1, rhs));
            }
        }
    }
    Ok(Involutivity { variables: names.clone(), generators: fmt_columns(&f.generators, names), structure_functions: table })
}

fn check_verdict(level: usize, c: &Check) -> LevelVerdict {
    match c {
        Check::Pass => LevelVerdict { level, pass: true, detail: None },
        Check::Fail { detail, .. } => LevelVerdict { level, pass: false, detail: Some(detail.clone()) },
    }
}

fn resolution_section(res: &GeomResolution, f: &Foliation, order: MonomialOrder, warnings: Vec<String>) -> ResolutionSection {
    let rep = res_verify(res, f, order);
    let names = &res.var_names;
    ResolutionSection {
        ranks: res.ranks(),
        euler_rank: res_euler(res),
        section_names: res.section_names.clone(),
        anchor: fmt_columns(&res.anchor, names),
        differentials: res.diffs.iter().map(|d| fmt_columns(d, names)).collect(),
        complex: rep.complex.iter().map(|c| check_verdict(c.level, &c.check)).collect(),
        membership: rep.membership.passed(),
        exactness: rep.exactness.iter().map(|c| check_verdict(c.level, &c.check)).collect(),
        passed: rep.passed(),
        warnings,
    }
}

fn structure_section(aq: &AnchoredQ) -> StructureSection {
    let bt = brackets_from_q(aq);
    let mut brackets: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (key, v) in &bt.brackets {
        let lhs: Vec<String> = key.iter().map(|&i| lieinfty::qfield::section_name(&bt.ring, i)).collect();
        brackets
            .entry(key.len().to_string())
            .or_default()
            .push(format!("{{{}}} = {}", lhs.join(", "), bt.fmt_section(v)));
    }
    let anchors: Vec<String> = bt
        .ring
        .level_ids(1)
        .map(|g| {
            let s = [(g, lieinfty::poly::Poly::one(bt.nvars()))].into_iter().collect();
            format!("rho({}) = {}", lieinfty::qfield::section_name(&bt.ring, g), fmt_vf(&bt.ring, &bt.anchor_section(&s)))
        })
        .collect();
    brackets.insert("anchor".into(), anchors);
    StructureSection { max_arity: aq.max_arity(), brackets }
}

fn homological_section(aq: &AnchoredQ, max_arity: i64) -> HomologicalSection {
    let rep = q_verify_homological(aq, max_arity);
    let verdicts = rep
        .arities
        .iter()
        .map(|(k, v)| match v {
            Verdict::Pass => ArityVerdict { arity: *k, pass: true, location: None, residue: None },
            Verdict::Fail { location, residue } => ArityVerdict {
                arity: *k,
                pass: false,
                location: Some(location.clone()),
                residue: Some(truncate(residue, 400)),
            },
        })
        .collect();
    HomologicalSection { max_arity, verdicts, passed: rep.passed() }
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        format!("{}...", s.chars().take(n).collect::<String>())
    }
}

/// Foliation, resolution and structure for the spec.
enum Built {
    Ok { foliation: Foliation, resolution: GeomResolution, q: Option<AnchoredQ>, warnings: Vec<String> },
    Failed(&'static str, String),
}

fn build(spec: &FoliationSpec, upto: Stage) -> Built {
    let order = spec.order;
    match &spec.source {
        Source::Builtin(b) => match bq_builtin(b, order) {
            Ok(s) => Built::Ok { foliation: s.foliation, resolution: s.resolution, q: Some(s.q), warnings: Vec::new() },
            Err(e) => Built::Failed("build", e.to_string()),
        },
        Source::Generators { variables, generators } => {
            let f = match Foliation::new(variables.clone(), generators.clone()) {
                Ok(f) => f,
                Err(e) => return Built::Failed("involutivity", e.to_string()),
            };
            let c = match fol_involutivity(&f, order) {
                Ok(c) => c,
                Err(FoliationError::NotInvolutive { i, j, bracket, remainder }) => {
                    let cols = fmt_columns(&[bracket, remainder], variables);
                    let msg = format!(
                        "not involutive: [X{}, X{}] = {} does not lift (normal form {})",
                        i + 1,
                        j + 1,
                        cols[0],
                        cols[1]
                    );
                    return Built::Failed("involutivity", msg);
                }
                Err(e) => return Built::Failed("involutivity", e.to_string()),
            };
            let out = match res_build(&f, 2 * f.nvars() + 4, order) {
                Ok(o) => o,
                Err(e) => return Built::Failed("resolution", e.to_string()),
            };
            let res = out.resolution;
            if upto < Stage::Build {
                return Built::Ok { foliation: f, resolution: res, q: None, warnings: out.warnings };
            }
            let q = bq_almost_lie(&res, &c)
                .and_then(|cand| bq_correct_arity1(&res, &cand, order))
                .and_then(|q01| bq_extend(&res, &q01, order));
            match q {
                Ok(q) => Built::Ok { foliation: f, resolution: res, q: Some(q), warnings: out.warnings },
                Err(e) => Built::Failed("structure", e.to_string()),
            }
        }
    }
}

/// Runs the pipeline up to `upto`. Stage failures truncate the report and
/// record the witness; the isotropy stages run only when a point is given.
pub fn cli_run(spec: &FoliationSpec, upto: Stage) -> Report {
    let mut report = Report::new(spec);
    let order = spec.order;
    let t0 = Instant::now();
    let (foliation, resolution, q, warnings) = match build(spec, upto) {
        Built::Ok { foliation, resolution, q, warnings } => (foliation, resolution, q, warnings),
        Built::Failed(stage, msg) => {
            if stage != "involutivity" {
                if let Source::Generators { variables, generators } = &spec.source {
                    if let Ok(f) = Foliation::new(variables.clone(), generators.clone()) {
                        report.involutivity = involutivity_section(&f, order).ok();
                    }
                }
            }
            return report.fail(stage, msg);
        }
    };
    match involutivity_section(&foliation, order) {
        Ok(s) => report.involutivity = Some(s),
        Err(e) => return report.fail("involutivity", e),
    }
    let res_sec = resolution_section(&resolution, &foliation, order, warnings);
    let res_ok = res_sec.passed;
    report.resolution = Some(res_sec);
    report.timings.push(("resolve".into(), t0.elapsed().as_secs_f64()));
    if !res_ok {
        return report.fail("resolution", "resolution verification failed");
    }
    if upto < Stage::Build {
        return report;
    }
    let q = q.expect("structure built for Build and later");
    report.structure = Some(structure_section(&q));
    report.timings.push(("build".into(), t0.elapsed().as_secs_f64()));
    if upto < Stage::Verify {
        return report;
    }
    let max_arity = spec.max_arity.unwrap_or(resolution.length() as i64 + 1);
    let hom = homological_section(&q, max_arity);
    let hom_ok = hom.passed;
    report.homological = Some(hom);
    report.timings.push(("verify".into(), t0.elapsed().as_secs_f64()));
    if !hom_ok {
        return report.fail("homological", "[Q,Q] does not vanish");
    }
    if upto < Stage::Isotropy {
        return report;
    }
    let Some(m) = spec.point.clone() else {
        return report;
    };
    let minimal = match res_minimal_at(&resolution, &m) {
        Ok(l) => l,
        Err(e) => return report.fail("isotropy", e.to_string()),
    };
    let iso = match iso_linfty_any(&q, &m) {
        Ok(iso) => iso,
        Err(e) => return report.fail("isotropy", e.to_string()),
    };
    let mut brackets: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for k in 2..=iso.ring().depth() + 1 {
        let lines: Vec<String> = iso.constants(k).iter().map(|(key, v)| iso.fmt_bracket(key, v)).collect();
        if !lines.is_empty() {
            brackets.insert(k.to_string(), lines);
        }
    }
    let ring = iso.ring();
    report.isotropy = Some(IsotropySection {
        point: fmt_point(&m),
        foliation_rank: fol_rank_at(&foliation, &m).unwrap_or(0),
        minimal_ranks: minimal.ranks(),
        dims: iso.dims.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        basis: (1..=ring.depth()).map(|l| ring.level_ids(l).map(|g| iso.name(g)).collect()).collect(),
        transferred: iso.transferred,
        brackets,
    });
    report.timings.push(("isotropy".into(), t0.elapsed().as_secs_f64()));
    if upto < Stage::Nmrla {
        return report;
    }
    let ce = match iso_nmrla_cocycle(&iso) {
        Ok(ce) => ce,
        Err(e) => return report.fail("nmrla", e.to_string()),
    };
    let g = |i: usize| ce.g_names[i].clone();
    let wname = |i: usize| ce.w_names[i].clone();
    let dense = |v: &[Q]| -> BTreeMap<usize, Q> {
        v.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.clone())).collect()
    };
    let cocycle = ce
        .cocycle
        .iter()
        .map(|((a, b, c), v)| format!("c({}, {}, {}) = {}", g(*a), g(*b), g(*c), fmt_vector(&dense(v), wname)))
        .collect();
    let class = iso_ce_class_vanishes(&ce);
    let witness = match &class {
        ClassVerdict::Exact { theta } => theta
            .iter()
            .map(|((a, b), v)| format!("theta({}, {}) = {}", g(*a), g(*b), fmt_vector(&dense(v), wname)))
            .collect(),
        ClassVerdict::NotExact { certificate, pairing } => {
            let mut w: Vec<String> = certificate
                .iter()
                .map(|((a, b, c), t, y)| format!("{} * <{}, c({}, {}, {})>", fmt_rational(y), wname(*t), g(*a), g(*b), g(*c)))
                .collect();
            w.push(format!("pairing with c = {}", fmt_rational(pairing)));
            w
        }
    };
    let verdict = iso_minimal_rank_verdict(&minimal.ranks(), &class);
    report.nmrla = Some(NmrlaSection {
        cocycle,
        class_vanishes: verdict.class_vanishes,
        witness,
        rank: verdict.rank,
        statement: verdict.statement,
    });
    report.timings.push(("nmrla".into(), t0.elapsed().as_secs_f64()));
    report
}

/// Canonical JSON: sorted keys, two-space indentation, trailing newline.
pub fn to_json(report: &Report) -> String {
    let v = serde_json::to_value(report).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

pub fn to_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "input: {} (order {})", report.input, report.order);
    if let Some(inv) = &report.involutivity {
        let _ = writeln!(s, "\ninvolutivity: {} generators on {}", inv.generators.len(), inv.variables.join(", "));
        for (i, g) in inv.generators.iter().enumerate() {
            let _ = writeln!(s, "  X{} = {}", i + 1, g);
        }
        for l in &inv.structure_functions {
            let _ = writeln!(s, "  {l}");
        }
    }
    if let Some(r) = &report.resolution {
        let _ = writeln!(s, "\nresolution: ranks {:?}, euler rank {}", r.ranks, r.euler_rank);
        let _ = writeln!(s, "  verification: {}", if r.passed { "pass" } else { "FAIL" });
        for v in r.complex.iter().chain(&r.exactness) {
            if let Some(d) = &v.detail {
                let _ = writeln!(s, "  level {}: {}", v.level, d);
            }
        }
        for w in &r.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    if let Some(st) = &report.structure {
        let _ = writeln!(s, "\nstructure: highest arity {}", st.max_arity);
        for (k, lines) in &st.brackets {
            let _ = writeln!(s, "  {k}:");
            for l in lines {
                let _ = writeln!(s, "    {l}");
            }
        }
    }
    if let Some(h) = &report.homological {
        let _ = writeln!(s, "\nhomological check up to arity {}: {}", h.max_arity, if h.passed { "pass" } else { "FAIL" });
        for v in &h.verdicts {
            let _ = write!(s, "  arity {}: {}", v.arity, if v.pass { "pass" } else { "fail" });
            if let (Some(l), Some(r)) = (&v.location, &v.residue) {
                let _ = write!(s, " at {l}: {r}");
            }
            s.push('\n');
        }
    }
    if let Some(iso) = &report.isotropy {
        let _ = writeln!(s, "\nisotropy at ({})", iso.point.join(", "));
        let _ = writeln!(s, "  foliation rank {}, minimal ranks {:?}", iso.foliation_rank, iso.minimal_ranks);
        let dims: Vec<String> = iso.dims.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        let _ = writeln!(s, "  dims {{{}}}{}", dims.join(", "), if iso.transferred { " (transferred)" } else { "" });
        for lines in iso.brackets.values() {
            for l in lines {
                let _ = writeln!(s, "  {l}");
            }
        }
    }
    if let Some(n) = &report.nmrla {
        let _ = writeln!(s, "\nnmrla: class {}", if n.class_vanishes { "zero" } else { "nonzero" });
        for l in n.cocycle.iter().chain(&n.witness) {
            let _ = writeln!(s, "  {l}");
        }
        let _ = writeln!(s, "  minimal rank {}: {}", n.rank, n.statement);
    }
    if let Some(f) = &report.failure {
        let _ = writeln!(s, "\nstopped at {}: {}", f.stage, f.message);
    }
    if !report.timings.is_empty() {
        let t: Vec<String> = report.timings.iter().map(|(k, v)| format!("{k} {v:.2}s")).collect();
        let _ = writeln!(s, "\ntimings (cumulative): {}", t.join(", "));
    }
    s
}
