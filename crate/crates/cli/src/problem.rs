//! The problem file: a TOML document with `space`, `objective`,
//! `constraint`, `set`, `point` and `options` sections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use uniconv_core::calculus::QuadraticComponent;
use uniconv_core::optim::ProblemSpec;
use uniconv_core::{Component, ConvexSet, Matrix, SmoothMap, TargetSet, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub space: Space,
    pub objective: Quadratic,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint: Vec<Constraint>,
    pub set: SetSection,
    pub point: Point,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Space {
    pub dim: usize,
    /// Exponent of the ambient ℓᵖ norm.
    #[serde(default = "two")]
    pub norm: f64,
}

fn two() -> f64 {
    2.0
}

/// `½xᵀAx + bᵀx + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadratic {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    /// `eq`, `le`, `ge` or `free`; `eq` pins the component to `value`.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Parameters of the set; which ones are required depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_tol: Option<f64>,
    /// Multistart seeds of the global solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Raster cells along the longer side of the image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// Raster cell size; ignored when `cells` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<f64>,
    /// Region radius `r0`; defaults to the reach of the set from `x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub midpoint_pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{}syntax error: {message}", at(*.line))]
    Syntax { line: Option<usize>, message: String },
    #[error("{}dimension mismatch in {what}: expected {expected}, got {got}", at(*.line))]
    DimensionMismatch { line: Option<usize>, what: String, expected: usize, got: usize },
    #[error("{}matrix of {what} is not symmetric", at(*.line))]
    AsymmetricMatrix { line: Option<usize>, what: String },
    #[error("{}unknown set kind `{kind}` (expected ball, ball-intersection, sublevel or box)", at(*.line))]
    UnknownSetKind { line: Option<usize>, kind: String },
    #[error("{}invalid value in {what}: {message}", at(*.line))]
    InvalidValue { line: Option<usize>, what: String, message: String },
    #[error("{}x0 is not feasible: {message}", at(*.line))]
    Infeasible { line: Option<usize>, message: String },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ParseError {
    /// Machine-readable diagnostic code.
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "syntax",
            ParseError::DimensionMismatch { .. } => "dimension-mismatch",
            ParseError::AsymmetricMatrix { .. } => "asymmetric-matrix",
            ParseError::UnknownSetKind { .. } => "unknown-set-kind",
            ParseError::InvalidValue { .. } => "invalid-value",
            ParseError::Infeasible { .. } => "infeasible",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::DimensionMismatch { line, .. }
            | ParseError::AsymmetricMatrix { line, .. }
            | ParseError::UnknownSetKind { line, .. }
            | ParseError::InvalidValue { line, .. }
            | ParseError::Infeasible { line, .. } => *line,
        }
    }
}

/// 1-based line of the header of `section` (its `index`-th occurrence for arrays of tables).
fn section_line(text: &str, section: &str, index: usize) -> Option<usize> {
    let single = format!("[{section}]");
    let array = format!("[[{section}]]");
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            t == single || t == array
        })
        .nth(index)
        .map(|(i, _)| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// A validated problem: the spec plus the raw options.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub file: ProblemFile,
    pub spec: ProblemSpec,
}

pub fn parse_problem_file(text: &str) -> Result<Parsed, ParseError> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    let spec = build_spec(&file, text)?;
    Ok(Parsed { file, spec })
}

impl ProblemFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files always serialize")
    }
}

struct Ctx<'a> {
    text: &'a str,
    n: usize,
}

impl Ctx<'_> {
    fn line(&self, section: &str, index: usize) -> Option<usize> {
        section_line(self.text, section, index)
    }

    fn vector(&self, v: &[f64], what: &str, section: &str, index: usize) -> Result<Vector, ParseError> {
        if v.len() != self.n {
            return Err(ParseError::DimensionMismatch {
                line: self.line(section, index),
                what: what.into(),
                expected: self.n,
                got: v.len(),
            });
        }
        self.finite(v, what, section, index)?;
        Ok(Vector::from_column_slice(v))
    }

    fn finite(&self, v: &[f64], what: &str, section: &str, index: usize) -> Result<(), ParseError> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(self.invalid(what, "entries must be finite", section, index))
        }
    }

    fn invalid(&self, what: &str, message: &str, section: &str, index: usize) -> ParseError {
        ParseError::InvalidValue { line: self.line(section, index), what: what.into(), message: message.into() }
    }

    fn matrix(&self, rows: &[Vec<f64>], what: &str, section: &str, index: usize) -> Result<Matrix, ParseError> {
        let mismatch = |got| ParseError::DimensionMismatch {
            line: self.line(section, index),
            what: what.into(),
            expected: self.n,
            got,
        };
        if rows.len() != self.n {
            return Err(mismatch(rows.len()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != self.n) {
            return Err(mismatch(r.len()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        self.finite(&flat, what, section, index)?;
        let m = Matrix::from_row_slice(self.n, self.n, &flat);
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(ParseError::AsymmetricMatrix { line: self.line(section, index), what: what.into() });
        }
        Ok(m)
    }

    fn quadratic(
        &self,
        q_a: &[Vec<f64>],
        q_b: &[f64],
        c: f64,
        what: &str,
        section: &str,
        index: usize,
    ) -> Result<QuadraticComponent, ParseError> {
        let a = self.matrix(q_a, what, section, index)?;
        let b = self.vector(q_b, what, section, index)?;
        if !c.is_finite() {
            return Err(self.invalid(what, "constant must be finite", section, index));
        }
        Ok(QuadraticComponent::new(a, b, c))
    }
}

fn build_spec(file: &ProblemFile, text: &str) -> Result<ProblemSpec, ParseError> {
    let n = file.space.dim;
    let cx = Ctx { text, n };
    if n == 0 {
        return Err(cx.invalid("space.dim", "dimension must be positive", "space", 0));
    }
    let p = file.space.norm;
    if !(p > 1.0 && p.is_finite()) {
        return Err(cx.invalid("space.norm", "norm exponent must lie in (1, ∞)", "space", 0));
    }
    let o = &file.objective;
    let phi = cx.quadratic(&o.a, &o.b, o.c, "objective", "objective", 0)?;
    let phi = SmoothMap::quadratic(n, vec![phi]).expect("validated objective");

    let mut comps = Vec::with_capacity(file.constraint.len());
    let mut targets = Vec::with_capacity(file.constraint.len());
    for (i, con) in file.constraint.iter().enumerate() {
        let what = format!("constraint {}", i + 1);
        comps.push(cx.quadratic(&con.a, &con.b, con.c, &what, "constraint", i)?);
        let target = match (con.target.as_str(), con.value) {
            ("eq", v) => Component::Eq(v.unwrap_or(0.0)),
            ("le", None) => Component::Le,
            ("ge", None) => Component::Ge,
            ("free", None) => Component::Free,
            ("le" | "ge" | "free", Some(_)) => {
                return Err(cx.invalid(&what, "`value` only applies to eq targets", "constraint", i))
            }
            (t, _) => {
                return Err(cx.invalid(
                    &what,
                    &format!("unknown target `{t}` (expected eq, le, ge or free)"),
                    "constraint",
                    i,
                ))
            }
        };
        if let Component::Eq(v) = target {
            if !v.is_finite() {
                return Err(cx.invalid(&what, "target value must be finite", "constraint", i));
            }
        }
        targets.push(target);
    }
    let (g, target) = if comps.is_empty() {
        (None, TargetSet::new(Vec::new()))
    } else {
        (Some(SmoothMap::quadratic(n, comps).expect("validated constraints")), TargetSet::new(targets))
    };

    let set = build_set(&file.set, &cx, p)?;
    let x0 = cx.vector(&file.point.x0, "point.x0", "point", 0)?;
    if !set.is_member(&x0) {
        return Err(cx.invalid("point.x0", "x0 must lie in the set", "point", 0));
    }
    ProblemSpec::new(phi, g, set, target, x0).map_err(|e| match e {
        uniconv_core::Error::Infeasible(message) => ParseError::Infeasible { line: cx.line("point", 0), message },
        other => cx.invalid("problem", &other.to_string(), "point", 0),
    })
}

fn build_set(s: &SetSection, cx: &Ctx, p: f64) -> Result<ConvexSet, ParseError> {
    let need = |field: &str| cx.invalid("set", &format!("kind `{}` requires `{field}`", s.kind), "set", 0);
    let core = |e: uniconv_core::Error| cx.invalid("set", &e.to_string(), "set", 0);
    let euclidean_only = || {
        if p != 2.0 {
            Err(cx.invalid(
                "set",
                &format!("kind `{}` lives in the Euclidean norm; space.norm must be 2", s.kind),
                "set",
                0,
            ))
        } else {
            Ok(())
        }
    };
    match s.kind.as_str() {
        "ball" => {
            let c = cx.vector(s.center.as_ref().ok_or_else(|| need("center"))?, "set.center", "set", 0)?;
            let r = s.radius.ok_or_else(|| need("radius"))?;
            ConvexSet::p_norm_ball(c, r, p).map_err(core)
        }
        "ball-intersection" => {
            euclidean_only()?;
            let cs = s.centers.as_ref().ok_or_else(|| need("centers"))?;
            let cs = cs.iter().map(|c| cx.vector(c, "set.centers", "set", 0)).collect::<Result<Vec<_>, _>>()?;
            ConvexSet::ball_intersection(cs, s.radius.ok_or_else(|| need("radius"))?).map_err(core)
        }
        "sublevel" => {
            euclidean_only()?;
            let a = cx.matrix(s.a.as_ref().ok_or_else(|| need("a"))?, "set.a", "set", 0)?;
            let b = cx.vector(s.b.as_ref().ok_or_else(|| need("b"))?, "set.b", "set", 0)?;
            ConvexSet::sublevel(a, b, s.c.unwrap_or(0.0), s.alpha.ok_or_else(|| need("alpha"))?).map_err(core)
        }
        "box" => {
            euclidean_only()?;
            let lo = cx.vector(s.lower.as_ref().ok_or_else(|| need("lower"))?, "set.lower", "set", 0)?;
            let hi = cx.vector(s.upper.as_ref().ok_or_else(|| need("upper"))?, "set.upper", "set", 0)?;
            ConvexSet::axis_box(lo, hi).map_err(core)
        }
        other => Err(ParseError::UnknownSetKind { line: cx.line("set", 0), kind: other.into() }),
    }
}

/// Replaces the radius of a ball-type set, as `--radius` does.
pub fn with_radius(file: &ProblemFile, radius: f64) -> Result<ProblemFile, ParseError> {
    match file.set.kind.as_str() {
        "ball" | "ball-intersection" => {
            let mut f = file.clone();
            f.set.radius = Some(radius);
            Ok(f)
        }
        kind => Err(ParseError::InvalidValue {
            line: None,
            what: "--radius".into(),
            message: format!("set kind `{kind}` has no radius"),
        }),
    }
}

/// Revalidates a file after an in-memory change.
pub fn rebuild(file: ProblemFile) -> Result<Parsed, ParseError> {
    let text = file.to_toml();
    let spec = build_spec(&file, &text)?;
    Ok(Parsed { file, spec })
}
