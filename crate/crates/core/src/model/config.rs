//! Plain-text system definitions.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys may appear in
//! any order and at most once.
//!
//! ```text
//! name     = LIN1
//! n_x      = 1
//! m_z      = 1
//! mu       = 0.1
//! f1       = -w1                        # f_i, i = 1..n_x, variables w1..w{m_z}
//! g1       = 0.25*x1 + 0.5*z1 + w1      # g_j, j = 1..m_z, variables x*, z*, w*
//! domain_x = [-2, 2]                    # every axis; domain_x2 = [lo, hi] overrides one
//! domain_z = [-2, 2]
//!
//! solver.tol           = 1e-12
//! solver.max_iter      = 50
//! solver.fd_step       = 1e-6
//! solver.initial_guess = warm_start     # or zero
//! analysis.mu_values   = 1e-1, 1e-2, 1e-3, 1e-4
//! analysis.n_steps     = 2000
//! analysis.x0          = 1
//! analysis.z0          = 1
//! analysis.seed        = 42
//! ```
//!
//! `n_x`, `m_z`, `mu`, every `f_i` and every `g_j` are required. Domains
//! default to `[-2, 2]` on each axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{parse_expr_at, Bindings, Expr, VarScope};
use super::system::{BoxDomain, ChiSystem};
use crate::error::{ChiError, Result};
use crate::manifold::{InitialGuess, ManifoldSolverConfig};

pub const DEFAULT_DOMAIN: (f64, f64) = (-2.0, 2.0);

/// Analysis parameters a config may pin down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDefaults {
    pub mu_values: Vec<f64>,
    pub n_steps: usize,
    pub x0: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for AnalysisDefaults {
    fn default() -> Self {
        Self {
            mu_values: vec![1e-1, 1e-2, 1e-3, 1e-4],
            n_steps: 2000,
            x0: None,
            z0: None,
            seed: 42,
        }
    }
}

/// Parsed config document.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub name: String,
    pub n_x: usize,
    pub m_z: usize,
    pub mu: f64,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
    pub domain_x: BoxDomain,
    pub domain_z: BoxDomain,
    pub solver: ManifoldSolverConfig,
    pub analysis: AnalysisDefaults,
}

impl SystemConfig {
    /// Compiles the expressions into a [`ChiSystem`].
    pub fn build(&self) -> Result<ChiSystem> {
        let f = Arc::new(self.f.clone());
        let g = Arc::new(self.g.clone());
        ChiSystem::new(
            self.name.clone(),
            self.n_x,
            self.m_z,
            self.mu,
            Arc::new(move |w: &[f64]| {
                let b = Bindings { x: &[], z: &[], w };
                f.iter().map(|e| e.eval(&b)).collect()
            }),
            Arc::new(move |x: &[f64], z: &[f64], w: &[f64]| {
                let b = Bindings { x, z, w };
                g.iter().map(|e| e.eval(&b)).collect()
            }),
            self.domain_x.clone(),
            self.domain_z.clone(),
        )
    }

    /// Renders the config back to the document format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "n_x = {}", self.n_x);
        let _ = writeln!(s, "m_z = {}", self.m_z);
        let _ = writeln!(s, "mu = {:?}", self.mu);
        for (i, e) in self.f.iter().enumerate() {
            let _ = writeln!(s, "f{} = {e}", i + 1);
        }
        for (i, e) in self.g.iter().enumerate() {
            let _ = writeln!(s, "g{} = {e}", i + 1);
        }
        for (key, b) in [("domain_x", &self.domain_x), ("domain_z", &self.domain_z)] {
            for i in 0..b.dim() {
                let _ = writeln!(s, "{key}{} = [{:?}, {:?}]", i + 1, b.lo[i], b.hi[i]);
            }
        }
        let _ = writeln!(s, "solver.tol = {:?}", self.solver.tol);
        let _ = writeln!(s, "solver.max_iter = {}", self.solver.max_iter);
        let _ = writeln!(s, "solver.fd_step = {:?}", self.solver.fd_step);
        let policy = match self.solver.initial_guess {
            InitialGuess::Zero => "zero",
            InitialGuess::WarmStart => "warm_start",
        };
        let _ = writeln!(s, "solver.initial_guess = {policy}");
        let mus: Vec<String> = self
            .analysis
            .mu_values
            .iter()
            .map(|m| format!("{m:?}"))
            .collect();
        let _ = writeln!(s, "analysis.mu_values = {}", mus.join(", "));
        let _ = writeln!(s, "analysis.n_steps = {}", self.analysis.n_steps);
        for (key, v) in [
            ("analysis.x0", &self.analysis.x0),
            ("analysis.z0", &self.analysis.z0),
        ] {
            if let Some(v) = v {
                let parts: Vec<String> = v.iter().map(|a| format!("{a:?}")).collect();
                let _ = writeln!(s, "{key} = {}", parts.join(", "));
            }
        }
        let _ = writeln!(s, "analysis.seed = {}", self.analysis.seed);
        s
    }
}

struct Entry<'a> {
    value: &'a str,
    line: usize,
    /// 1-based column of the first value character.
    column: usize,
}

/// Parses a config document into its structured form.
pub fn parse_config_document(text: &str) -> Result<SystemConfig> {
    let mut entries: BTreeMap<&str, Entry<'_>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(ChiError::Syntax {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(ChiError::Syntax {
                line,
                column: eq + 1,
                message: "missing key before `=`".into(),
            });
        }
        let after = &content[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value = after.trim();
        let column = eq + 2 + lead;
        if entries
            .insert(
                key,
                Entry {
                    value,
                    line,
                    column,
                },
            )
            .is_some()
        {
            return Err(ChiError::Config(format!(
                "line {line}: duplicate key `{key}`"
            )));
        }
    }

    let n_x = take_usize(&mut entries, "n_x")?;
    let m_z = take_usize(&mut entries, "m_z")?;
    if n_x == 0 || m_z == 0 {
        return Err(ChiError::Config("n_x and m_z must be positive".into()));
    }
    let mu = take_f64(&mut entries, "mu")?
        .ok_or_else(|| ChiError::Config("missing required key `mu`".into()))?;
    let name = entries
        .remove("name")
        .map(|e| e.value.to_string())
        .unwrap_or_else(|| "unnamed".to_string());

    let f_scope = VarScope {
        n_x: 0,
        m_z: 0,
        w: m_z,
    };
    let g_scope = VarScope { n_x, m_z, w: m_z };
    let f = take_components(&mut entries, 'f', n_x, f_scope)?;
    let g = take_components(&mut entries, 'g', m_z, g_scope)?;
    let domain_x = take_domain(&mut entries, "domain_x", n_x)?;
    let domain_z = take_domain(&mut entries, "domain_z", m_z)?;

    let mut solver = ManifoldSolverConfig::default();
    if let Some(v) = take_f64(&mut entries, "solver.tol")? {
        solver.tol = v;
    }
    if let Some(v) = take_opt_usize(&mut entries, "solver.max_iter")? {
        solver.max_iter = v;
    }
    if let Some(v) = take_f64(&mut entries, "solver.fd_step")? {
        solver.fd_step = v;
    }
    if let Some(e) = entries.remove("solver.initial_guess") {
        solver.initial_guess = match e.value {
            "zero" => InitialGuess::Zero,
            "warm_start" => InitialGuess::WarmStart,
            other => {
                return Err(ChiError::Config(format!(
                    "line {}: unknown initial_guess `{other}` (expected zero or warm_start)",
                    e.line
                )))
            }
        };
    }
    solver.validate()?;

    let mut analysis = AnalysisDefaults::default();
    if let Some(e) = entries.remove("analysis.mu_values") {
        analysis.mu_values = parse_list(&e)?;
    }
    if let Some(v) = take_opt_usize(&mut entries, "analysis.n_steps")? {
        analysis.n_steps = v;
    }
    if let Some(e) = entries.remove("analysis.x0") {
        analysis.x0 = Some(parse_vector(&e, n_x, "analysis.x0")?);
    }
    if let Some(e) = entries.remove("analysis.z0") {
        analysis.z0 = Some(parse_vector(&e, m_z, "analysis.z0")?);
    }
    if let Some(v) = take_opt_usize(&mut entries, "analysis.seed")? {
        analysis.seed = v as u64;
    }

    if let Some((key, e)) = entries.into_iter().next() {
        return Err(ChiError::Config(format!(
            "line {}: unknown key `{key}`",
            e.line
        )));
    }

    Ok(SystemConfig {
        name,
        n_x,
        m_z,
        mu,
        f,
        g,
        domain_x,
        domain_z,
        solver,
        analysis,
    })
}

/// Parses a config document and builds the system it describes.
pub fn parse_system_config(text: &str) -> Result<ChiSystem> {
    parse_config_document(text)?.build()
}

fn take_usize(entries: &mut BTreeMap<&str, Entry<'_>>, key: &str) -> Result<usize> {
    take_opt_usize(entries, key)?
        .ok_or_else(|| ChiError::Config(format!("missing required key `{key}`")))
}

fn take_opt_usize(entries: &mut BTreeMap<&str, Entry<'_>>, key: &str) -> Result<Option<usize>> {
    entries
        .remove(key)
        .map(|e| {
            e.value.parse::<usize>().map_err(|_| ChiError::Syntax {
                line: e.line,
                column: e.column,
                message: format!("`{key}` expects a non-negative integer"),
            })
        })
        .transpose()
}

fn take_f64(entries: &mut BTreeMap<&str, Entry<'_>>, key: &str) -> Result<Option<f64>> {
    entries
        .remove(key)
        .map(|e| parse_number(&e, e.value))
        .transpose()
}

fn parse_number(e: &Entry<'_>, s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ChiError::Syntax {
            line: e.line,
            column: e.column,
            message: format!("expected a finite number, found `{}`", s.trim()),
        }),
    }
}

fn parse_list(e: &Entry<'_>) -> Result<Vec<f64>> {
    e.value.split(',').map(|p| parse_number(e, p)).collect()
}

fn parse_vector(e: &Entry<'_>, dim: usize, context: &'static str) -> Result<Vec<f64>> {
    let v = parse_list(e)?;
    if v.len() != dim {
        return Err(ChiError::DimensionMismatch {
            context,
            expected: dim,
            actual: v.len(),
        });
    }
    Ok(v)
}

fn take_components(
    entries: &mut BTreeMap<&str, Entry<'_>>,
    prefix: char,
    count: usize,
    scope: VarScope,
) -> Result<Vec<Expr>> {
    let mut out = Vec::with_capacity(count);
    for i in 1..=count {
        let key = format!("{prefix}{i}");
        let e = entries.remove(key.as_str()).ok_or_else(|| {
            ChiError::Config(format!(
                "missing component `{key}` (declared dimension {count})"
            ))
        })?;
        out.push(parse_expr_at(e.value, scope, e.line, e.column)?);
    }
    // Components beyond the declared dimension.
    let extra: Vec<String> = entries
        .keys()
        .filter(|k| {
            k.strip_prefix(prefix)
                .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        })
        .map(|k| k.to_string())
        .collect();
    if let Some(k) = extra.first() {
        return Err(ChiError::Config(format!(
            "component `{k}` exceeds declared dimension {count}"
        )));
    }
    Ok(out)
}

fn parse_interval(e: &Entry<'_>) -> Result<(f64, f64)> {
    let v = e.value.trim();
    let inner = v
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ChiError::Syntax {
            line: e.line,
            column: e.column,
            message: "expected an interval `[lo, hi]`".into(),
        })?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(ChiError::Syntax {
            line: e.line,
            column: e.column,
            message: "interval needs exactly two bounds".into(),
        });
    }
    Ok((parse_number(e, parts[0])?, parse_number(e, parts[1])?))
}

fn take_domain(
    entries: &mut BTreeMap<&str, Entry<'_>>,
    key: &'static str,
    dim: usize,
) -> Result<BoxDomain> {
    let (lo, hi) = match entries.remove(key) {
        Some(e) => parse_interval(&e)?,
        None => DEFAULT_DOMAIN,
    };
    let mut lo_v = vec![lo; dim];
    let mut hi_v = vec![hi; dim];
    for i in 0..dim {
        let k = format!("{key}{}", i + 1);
        if let Some(e) = entries.remove(k.as_str()) {
            let (l, h) = parse_interval(&e)?;
            lo_v[i] = l;
            hi_v[i] = h;
        }
    }
    let domain = BoxDomain::new(lo_v, hi_v)?;
    if !domain.contains_origin() {
        return Err(ChiError::Config(format!("{key} must contain the origin")));
    }
    Ok(domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIN1: &str = "\
name = LIN1
n_x = 1
m_z = 1
mu = 0.1
f1 = -w1
g1 = 0.25*x1 + 0.5*z1 + w1
";

    #[test]
    fn parses_minimal_document() {
        let c = parse_config_document(LIN1).unwrap();
        assert_eq!(c.name, "LIN1");
        assert_eq!((c.n_x, c.m_z), (1, 1));
        assert_eq!(c.domain_x.lo, vec![-2.0]);
        assert_eq!(c.solver, ManifoldSolverConfig::default());
        let sys = c.build().unwrap();
        assert_eq!(sys.eval_g(&[1.0], &[2.0], &[0.0]).unwrap(), vec![1.25]);
    }

    #[test]
    fn dangling_operator_reports_location() {
        let text = LIN1.replace("g1 = 0.25*x1 + 0.5*z1 + w1", "g1 = z1 +");
        match parse_system_config(&text) {
            Err(ChiError::Syntax { line, column, .. }) => {
                assert_eq!(line, 6);
                assert_eq!(column, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_variable_is_unknown_identifier() {
        let text = LIN1.replace("0.5*z1", "0.5*z2");
        assert!(matches!(
            parse_system_config(&text),
            Err(ChiError::UnknownIdentifier { ref name, line: 6, .. }) if name == "z2"
        ));
    }

    #[test]
    fn component_count_must_match() {
        let text = format!("{LIN1}f2 = w1\n");
        assert!(matches!(
            parse_system_config(&text),
            Err(ChiError::Config(_))
        ));
        let text = LIN1.replace("f1 = -w1\n", "");
        assert!(matches!(
            parse_system_config(&text),
            Err(ChiError::Config(_))
        ));
    }

    #[test]
    fn origin_violation_rejected() {
        let text = LIN1.replace("+ w1", "+ w1 + 1");
        assert!(matches!(
            parse_system_config(&text),
            Err(ChiError::OriginResidual(_))
        ));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            parse_system_config(&format!("{LIN1}bogus = 1\n")),
            Err(ChiError::Config(_))
        ));
        assert!(matches!(
            parse_system_config(&format!("{LIN1}mu = 0.2\n")),
            Err(ChiError::Config(_))
        ));
        assert!(matches!(
            parse_system_config(&format!("{LIN1}no equals sign\n")),
            Err(ChiError::Syntax { line: 7, .. })
        ));
    }

    #[test]
    fn overrides_and_domains() {
        let text = format!(
            "{LIN1}domain_x = [-3, 1]\ndomain_z1 = [-1, 0.5]\nsolver.tol = 1e-11\n\
             solver.initial_guess = zero\nanalysis.mu_values = 0.1, 0.01\nanalysis.x0 = 0.5\n"
        );
        let c = parse_config_document(&text).unwrap();
        assert_eq!(c.domain_x.lo, vec![-3.0]);
        assert_eq!(c.domain_z.hi, vec![0.5]);
        assert_eq!(c.solver.tol, 1e-11);
        assert_eq!(c.solver.initial_guess, InitialGuess::Zero);
        assert_eq!(c.analysis.mu_values, vec![0.1, 0.01]);
        assert_eq!(c.analysis.x0, Some(vec![0.5]));
        assert!(parse_config_document(&format!("{LIN1}domain_x = [0.5, 1]\n")).is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = parse_config_document(LIN1).unwrap();
        let again = parse_config_document(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }
}
