//! Problem-spec files: flat `key = value` text grouped into `[domain]`,
//! `[problem]`, and `[solver]` sections.
//!
//! The format is deliberately trivial — diffable, greppable, parseable from
//! any language.  Blank lines and full-line `#` comments are ignored.  Every
//! key belongs to exactly one section:
//!
//! ```text
//! [domain]
//! kind = interval            # or rectangle
//! extent_x = 1.0
//! nodes_x = 33               # rectangle also takes extent_y / nodes_y
//!
//! [problem]
//! p = 3.0
//! f = s^2*(0.5*L + 1.5*L*s/(1+s))
//! rho0 = 0.5*L               # optional declared slopes; both or neither
//! rho_inf = 2*L
//!
//! [solver]
//! grad_tol = 1e-10           # all optional, defaults below
//! res_tol = 1e-6
//! fp_tol = 1e-7
//! seed = 0
//! ```
//!
//! `f` may reference `x1`, `x2`, `s`, `p`, and `L`; `L` stands for the
//! principal eigenvalue and is substituted only after the eigenvalue pass.
//! `rho0` / `rho_inf` are scalar expressions over `p` and `L` only.
//! Unknown keys, duplicate keys, and keys outside their section are errors,
//! so a typo fails loudly instead of silently falling back to a default.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::mesh::{Mesh, MeshKind};

/// Solver tolerances; every field has a working default, spec files and
/// `--override` only narrow or widen them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Resolvent stopping tolerance on the dual-norm gradient residual.
    pub grad_tol: f64,
    /// Coincidence / eigen residual tolerance in the dual norm.
    pub res_tol: f64,
    /// Fixed-point distance tolerance of the damped iteration.
    pub fp_tol: f64,
    /// Relative Rayleigh-quotient tolerance of the eigensolver
    /// (not a file key; reachable through `--override rel_tol=...`).
    pub rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grad_tol: 1e-10,
            res_tol: 1e-6,
            fp_tol: 1e-7,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub kind: MeshKind,
    pub extent_x: f64,
    /// Only present for rectangles.
    pub extent_y: Option<f64>,
    pub nodes_x: usize,
    /// Only present for rectangles.
    pub nodes_y: Option<usize>,
}

/// A fully validated problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub p: f64,
    /// Right-hand side f(x, s), with `L` still free.
    pub f: Expr,
    pub f_text: String,
    /// Declared slope of f(x, s)/s^(p-1) at s -> 0+, as an expression over
    /// `p` and `L`; both slopes are declared or neither is.
    pub rho0: Option<Expr>,
    pub rho0_text: Option<String>,
    pub rho_inf: Option<Expr>,
    pub rho_inf_text: Option<String>,
    pub tol: Tolerances,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Domain,
    Problem,
    Solver,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Domain => "domain",
            Section::Problem => "problem",
            Section::Solver => "solver",
        }
    }
}

/// The full key vocabulary: (key, section it belongs to).
const KEYS: &[(&str, Section)] = &[
    ("kind", Section::Domain),
    ("extent_x", Section::Domain),
    ("extent_y", Section::Domain),
    ("nodes_x", Section::Domain),
    ("nodes_y", Section::Domain),
    ("p", Section::Problem),
    ("f", Section::Problem),
    ("rho0", Section::Problem),
    ("rho_inf", Section::Problem),
    ("grad_tol", Section::Solver),
    ("res_tol", Section::Solver),
    ("fp_tol", Section::Solver),
    ("seed", Section::Solver),
];

fn section_of(key: &str) -> Option<Section> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

/// Raw key/value pairs in file order, before validation.
fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut current: Option<Section> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |msg: String| Error::Spec(format!("line {}: {msg}", lineno + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| at(format!("malformed section header {line:?}")))?
                .trim();
            let section = match name {
                "domain" => Section::Domain,
                "problem" => Section::Problem,
                "solver" => Section::Solver,
                other => return Err(at(format!("unknown section [{other}]"))),
            };
            current = Some(section);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        let section = current.ok_or_else(|| at(format!("key {key:?} before any section header")))?;
        let home = section_of(key).ok_or_else(|| at(format!("unknown key {key:?}")))?;
        if home != section {
            return Err(at(format!(
                "key {key:?} belongs in [{}], not [{}]",
                home.name(),
                section.name()
            )));
        }
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(at(format!("duplicate key {key:?}")));
        }
        if value.is_empty() {
            return Err(at(format!("empty value for key {key:?}")));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Spec(format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Spec(format!("{key}: expected a nonnegative integer, got {value:?}")))
}

/// Parse a declared slope: an expression over `p` and `L` only.
fn parse_rho(key: &str, value: &str) -> Result<Expr> {
    let e = Expr::parse(value)
        .map_err(|err| Error::Spec(format!("{key}: {err}")))?;
    for v in [Var::X1, Var::X2, Var::S] {
        if e.references(v) {
            return Err(Error::Spec(format!(
                "{key}: slope expressions may only use p and L, found {}",
                v.name()
            )));
        }
    }
    Ok(e)
}

fn build(pairs: &[(String, String)]) -> Result<ProblemSpec> {
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let require = |key: &str| {
        get(key).ok_or_else(|| Error::Spec(format!("missing required key {key:?}")))
    };

    let kind = match require("kind")? {
        "interval" => MeshKind::Interval,
        "rectangle" => MeshKind::Rectangle,
        other => {
            return Err(Error::Spec(format!(
                "kind: expected interval or rectangle, got {other:?}"
            )))
        }
    };
    let extent_x = parse_f64("extent_x", require("extent_x")?)?;
    let nodes_x = parse_usize("nodes_x", require("nodes_x")?)?;
    let (extent_y, nodes_y) = match kind {
        MeshKind::Interval => {
            for key in ["extent_y", "nodes_y"] {
                if get(key).is_some() {
                    return Err(Error::Spec(format!(
                        "{key} is only valid for kind = rectangle"
                    )));
                }
            }
            (None, None)
        }
        MeshKind::Rectangle => (
            Some(parse_f64("extent_y", require("extent_y")?)?),
            Some(parse_usize("nodes_y", require("nodes_y")?)?),
        ),
    };
    if !(extent_x.is_finite() && extent_x > 0.0) {
        return Err(Error::Spec(format!("extent_x must be positive, got {extent_x}")));
    }
    if let Some(ey) = extent_y {
        if !(ey.is_finite() && ey > 0.0) {
            return Err(Error::Spec(format!("extent_y must be positive, got {ey}")));
        }
    }
    for (key, n) in [("nodes_x", Some(nodes_x)), ("nodes_y", nodes_y)] {
        if let Some(n) = n {
            if n < 3 {
                return Err(Error::Spec(format!(
                    "{key}: at least 3 nodes per axis required, got {n}"
                )));
            }
        }
    }

    let p = parse_f64("p", require("p")?)?;
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Spec(format!("p must satisfy p >= 2, got {p}")));
    }

    let f_text = require("f")?.to_string();
    let f = Expr::parse(&f_text).map_err(|err| Error::Spec(format!("f: {err}")))?;

    let rho0_text = get("rho0").map(str::to_string);
    let rho_inf_text = get("rho_inf").map(str::to_string);
    if rho0_text.is_some() != rho_inf_text.is_some() {
        return Err(Error::Spec(
            "rho0 and rho_inf must be declared together or not at all".into(),
        ));
    }
    let rho0 = rho0_text
        .as_deref()
        .map(|v| parse_rho("rho0", v))
        .transpose()?;
    let rho_inf = rho_inf_text
        .as_deref()
        .map(|v| parse_rho("rho_inf", v))
        .transpose()?;

    let mut tol = Tolerances::default();
    if let Some(v) = get("grad_tol") {
        tol.grad_tol = parse_f64("grad_tol", v)?;
    }
    if let Some(v) = get("res_tol") {
        tol.res_tol = parse_f64("res_tol", v)?;
    }
    if let Some(v) = get("fp_tol") {
        tol.fp_tol = parse_f64("fp_tol", v)?;
    }
    for (key, t) in [
        ("grad_tol", tol.grad_tol),
        ("res_tol", tol.res_tol),
        ("fp_tol", tol.fp_tol),
    ] {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Spec(format!("{key} must be positive, got {t}")));
        }
    }
    let seed = match get("seed") {
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| Error::Spec(format!("seed: expected an unsigned integer, got {v:?}")))?,
        None => 0,
    };

    Ok(ProblemSpec {
        domain: DomainSpec {
            kind,
            extent_x,
            extent_y,
            nodes_x,
            nodes_y,
        },
        p,
        f,
        f_text,
        rho0,
        rho0_text,
        rho_inf,
        rho_inf_text,
        tol,
        seed,
    })
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<ProblemSpec> {
        build(&parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<ProblemSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        ProblemSpec::parse(&text)
    }

    /// Re-apply one `key=value` override on top of this spec.  Accepts every
    /// file key plus `rel_tol`, and re-runs full validation.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if key == "rel_tol" {
            let t = parse_f64("rel_tol", value)?;
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Spec(format!("rel_tol must be positive, got {t}")));
            }
            self.tol.rel_tol = t;
            return Ok(());
        }
        if section_of(key).is_none() {
            return Err(Error::Spec(format!("unknown override key {key:?}")));
        }
        if value.is_empty() {
            return Err(Error::Spec(format!("empty value for override {key:?}")));
        }
        let mut pairs: Vec<(String, String)> = parse_pairs(&self.canonical_text())?;
        if let Some(slot) = pairs.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value.to_string();
        } else {
            pairs.push((key.to_string(), value.to_string()));
        }
        let rel_tol = self.tol.rel_tol;
        *self = build(&pairs)?;
        self.tol.rel_tol = rel_tol;
        Ok(())
    }

    /// Canonical serialization; parsing it back yields an equal spec.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[domain]\n");
        out.push_str(&format!(
            "kind = {}\n",
            match self.domain.kind {
                MeshKind::Interval => "interval",
                MeshKind::Rectangle => "rectangle",
            }
        ));
        out.push_str(&format!("extent_x = {}\n", self.domain.extent_x));
        if let Some(ey) = self.domain.extent_y {
            out.push_str(&format!("extent_y = {ey}\n"));
        }
        out.push_str(&format!("nodes_x = {}\n", self.domain.nodes_x));
        if let Some(ny) = self.domain.nodes_y {
            out.push_str(&format!("nodes_y = {ny}\n"));
        }
        out.push_str("\n[problem]\n");
        out.push_str(&format!("p = {}\n", self.p));
        out.push_str(&format!("f = {}\n", self.f_text));
        if let Some(r) = &self.rho0_text {
            out.push_str(&format!("rho0 = {r}\n"));
        }
        if let Some(r) = &self.rho_inf_text {
            out.push_str(&format!("rho_inf = {r}\n"));
        }
        out.push_str("\n[solver]\n");
        out.push_str(&format!("grad_tol = {}\n", self.tol.grad_tol));
        out.push_str(&format!("res_tol = {}\n", self.tol.res_tol));
        out.push_str(&format!("fp_tol = {}\n", self.tol.fp_tol));
        out.push_str(&format!("seed = {}\n", self.seed));
        out
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        let mesh = match self.domain.kind {
            MeshKind::Interval => Mesh::interval(self.domain.extent_x, self.domain.nodes_x)?,
            MeshKind::Rectangle => Mesh::rectangle(
                self.domain.extent_x,
                self.domain.extent_y.expect("validated"),
                self.domain.nodes_x,
                self.domain.nodes_y.expect("validated"),
            )?,
        };
        Ok(Arc::new(mesh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# flagship interval problem
[domain]
kind = interval
extent_x = 1.0
nodes_x = 33

[problem]
p = 3
f = s^2*(0.5*L + 1.5*L*s/(1+s))
rho0 = 0.5*L
rho_inf = 2*L

[solver]
grad_tol = 1e-10
res_tol = 1e-6
fp_tol = 1e-7
seed = 7
";

    #[test]
    fn parses_a_full_spec() {
        let s = ProblemSpec::parse(FULL).unwrap();
        assert_eq!(s.domain.kind, MeshKind::Interval);
        assert_eq!(s.domain.nodes_x, 33);
        assert_eq!(s.domain.extent_y, None);
        assert_eq!(s.p, 3.0);
        assert_eq!(s.seed, 7);
        assert_eq!(s.tol.grad_tol, 1e-10);
        assert_eq!(s.tol.rel_tol, 1e-8);
        assert!(s.rho0.is_some() && s.rho_inf.is_some());
        let mesh = s.build_mesh().unwrap();
        assert_eq!(mesh.interior_count(), 31);
    }

    #[test]
    fn minimal_spec_fills_defaults() {
        let s = ProblemSpec::parse(
            "[domain]\nkind = interval\nextent_x = 1\nnodes_x = 9\n[problem]\np = 2\nf = s\n",
        )
        .unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.tol.fp_tol, 1e-7);
        assert!(s.rho0.is_none() && s.rho_inf.is_none());
    }

    #[test]
    fn canonical_text_round_trips() {
        let s = ProblemSpec::parse(FULL).unwrap();
        let again = ProblemSpec::parse(&s.canonical_text()).unwrap();
        assert_eq!(s, again);

        let rect = ProblemSpec::parse(
            "[domain]\nkind = rectangle\nextent_x = 2\nextent_y = 1\nnodes_x = 9\nnodes_y = 5\n\
             [problem]\np = 2.5\nf = s^2*x1\n",
        )
        .unwrap();
        assert_eq!(rect, ProblemSpec::parse(&rect.canonical_text()).unwrap());
    }

    #[test]
    fn overrides_replace_and_validate() {
        let mut s = ProblemSpec::parse(FULL).unwrap();
        s.apply_override("nodes_x", "65").unwrap();
        s.apply_override("grad_tol", "1e-8").unwrap();
        s.apply_override("rel_tol", "1e-6").unwrap();
        assert_eq!(s.domain.nodes_x, 65);
        assert_eq!(s.tol.grad_tol, 1e-8);
        assert_eq!(s.tol.rel_tol, 1e-6);
        assert!(s.apply_override("nodes_x", "2").is_err());
        assert!(s.apply_override("banana", "1").is_err());
    }

    #[test]
    fn rejects_malformed_specs() {
        let cases: &[(&str, &str)] = &[
            ("kind = interval\n", "key before section"),
            ("[domain]\nkind = interval\nkind = interval\n", "duplicate"),
            ("[domain]\nbanana = 1\n", "unknown key"),
            ("[domain]\np = 2\n", "key in wrong section"),
            ("[orchard]\n", "unknown section"),
            ("[domain]\nkind = interval\nextent_x = 1\nnodes_x = 2\n[problem]\np = 2\nf = s\n", "2 nodes"),
            ("[domain]\nkind = interval\nextent_x = 1\nnodes_x = 9\n[problem]\np = 1.5\nf = s\n", "p < 2"),
            ("[domain]\nkind = interval\nextent_x = 1\nnodes_x = 9\n[problem]\np = 2\nf = s +\n", "f parse error"),
            ("[domain]\nkind = interval\nextent_x = 1\nnodes_x = 9\n[problem]\np = 2\nf = s\nrho0 = L\n", "rho0 without rho_inf"),
            ("[domain]\nkind = interval\nextent_x = 1\nnodes_x = 9\n[problem]\np = 2\nf = s\nrho0 = s\nrho_inf = L\n", "rho over s"),
            ("[domain]\nkind = interval\nextent_x = 1\nextent_y = 1\nnodes_x = 9\n[problem]\np = 2\nf = s\n", "extent_y on interval"),
            ("[domain]\nkind = rectangle\nextent_x = 1\nnodes_x = 9\n[problem]\np = 2\nf = s\n", "rectangle missing y"),
        ];
        for (text, why) in cases {
            assert!(ProblemSpec::parse(text).is_err(), "should reject: {why}");
        }
    }

    #[test]
    fn invalid_specs_report_the_offending_line() {
        let err = ProblemSpec::parse("[domain]\nkind = interval\nbanana = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("banana"), "got: {msg}");
    }
}
