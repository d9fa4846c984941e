//! The sectioned `.conn` text format.
//!
//! ```text
//! [meta]
//! name = hopf
//! param.lambda = 1/2
//!
//! [chart]
//! vars = z1, z2
//! basepoint = 1, 1
//!
//! [divisor]
//! z1 = 1
//!
//! [christoffel]
//! 1,1,1 = 1/z1
//!
//! [frame]
//! Q 1,1 = 1/(2*z1)
//! Qinv 1,1 = 2*z1
//!
//! [expect]
//! branched = true | frame construction
//! ```
//!
//! Indices are 1-based; omitted Christoffel symbols and frame entries are zero
//! (the frame diagonal defaults to 1). Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::connection::{ChartConnection, GaugeMatrix, SubmoduleFrame};
use crate::error::{Error, Result};
use crate::rational::{parse_constant, parse_rational, Chart, DivisorComponent, GaussianRational, RatMatrix, RationalFn};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub key: String,
    pub value: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    pub q: BTreeMap<(usize, usize), String>,
    pub qinv: BTreeMap<(usize, usize), String>,
}

/// A parsed but not yet assembled scenario; expressions are kept as written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionSpec {
    pub name: String,
    pub description: Option<String>,
    pub params: BTreeMap<String, String>,
    pub var_names: Vec<String>,
    pub basepoint: Option<Vec<String>>,
    pub divisor: Vec<(String, u32)>,
    /// `(k, i, j)`, 0-based, to expression.
    pub christoffel: BTreeMap<(usize, usize, usize), String>,
    pub frame: Option<FrameSpec>,
    pub expect: Vec<Expectation>,
}

/// A spec turned into exact objects.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ConnectionSpec,
    pub connection: ChartConnection,
    pub frame: SubmoduleFrame,
    pub basepoint: Vec<Complex64>,
}

impl Scenario {
    pub fn chart(&self) -> &Chart {
        self.connection.chart()
    }

    pub fn nvars(&self) -> usize {
        self.connection.nvars()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Meta,
    Chart,
    Divisor,
    Christoffel,
    Frame,
    Expect,
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_indices(text: &str, count: usize, line: usize, column: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(perr(line, column, format!("expected {count} comma-separated indices")));
    }
    parts
        .iter()
        .map(|p| match p.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(perr(line, column, format!("bad index `{p}`"))),
        })
        .collect()
}

pub fn parse_spec(text: &str) -> Result<ConnectionSpec> {
    let mut section = None;
    let mut spec = ConnectionSpec {
        name: String::new(),
        description: None,
        params: BTreeMap::new(),
        var_names: Vec::new(),
        basepoint: None,
        divisor: Vec::new(),
        christoffel: BTreeMap::new(),
        frame: None,
        expect: Vec::new(),
    };
    let mut seen = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.len() - raw.trim_start().len() + 1;
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(line, indent, "unterminated section header"))?;
            let s = match name.trim() {
                "meta" => Section::Meta,
                "chart" => Section::Chart,
                "divisor" => Section::Divisor,
                "christoffel" => Section::Christoffel,
                "frame" => Section::Frame,
                "expect" => Section::Expect,
                other => return Err(perr(line, indent + 1, format!("unknown section `{other}`"))),
            };
            if seen.contains(&s) {
                return Err(perr(line, indent, format!("section `{}` repeated", name.trim())));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let eq = trimmed.find('=').ok_or_else(|| perr(line, indent, "expected `key = value`"))?;
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        let vcol = indent + eq + 1 + (trimmed[eq + 1..].len() - trimmed[eq + 1..].trim_start().len()) + 1;
        if key.is_empty() {
            return Err(perr(line, indent, "empty key"));
        }
        match section {
            None => return Err(perr(line, indent, "entry outside any section")),
            Some(Section::Meta) => match key {
                "name" => spec.name = value.to_string(),
                "description" => spec.description = Some(value.to_string()),
                _ => match key.strip_prefix("param.") {
                    Some(p) if !p.is_empty() => {
                        spec.params.insert(p.to_string(), value.to_string());
                    }
                    _ => return Err(perr(line, indent, format!("unknown meta key `{key}`"))),
                },
            },
            Some(Section::Chart) => {
                let items: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
                match key {
                    "vars" => {
                        if items
                            .iter()
                            .any(|v| v.is_empty() || !v.chars().all(|c| c.is_alphanumeric() || c == '_'))
                        {
                            return Err(perr(line, vcol, "variable names must be identifiers"));
                        }
                        spec.var_names = items;
                    }
                    "basepoint" => spec.basepoint = Some(items),
                    _ => return Err(perr(line, indent, format!("unknown chart key `{key}`"))),
                }
            }
            Some(Section::Divisor) => {
                let m = value
                    .parse::<u32>()
                    .ok()
                    .filter(|&m| m >= 1)
                    .ok_or_else(|| perr(line, vcol, "multiplicity must be a positive integer"))?;
                spec.divisor.push((key.to_string(), m));
            }
            Some(Section::Christoffel) => {
                let ix = parse_indices(key, 3, line, indent)?;
                if spec.christoffel.insert((ix[0], ix[1], ix[2]), value.to_string()).is_some() {
                    return Err(perr(line, indent, format!("Christoffel symbol {key} given twice")));
                }
            }
            Some(Section::Frame) => {
                let (which, idx) = key
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| perr(line, indent, "expected `Q r,c` or `Qinv r,c`"))?;
                let ix = parse_indices(idx.trim(), 2, line, indent + which.len() + 1)?;
                let frame = spec.frame.get_or_insert_with(|| FrameSpec {
                    q: BTreeMap::new(),
                    qinv: BTreeMap::new(),
                });
                let target = match which {
                    "Q" => &mut frame.q,
                    "Qinv" => &mut frame.qinv,
                    _ => return Err(perr(line, indent, format!("unknown frame matrix `{which}`"))),
                };
                target.insert((ix[0], ix[1]), value.to_string());
            }
            Some(Section::Expect) => {
                let (v, prov) = match value.split_once('|') {
                    Some((v, p)) => (v.trim(), p.trim()),
                    None => (value, ""),
                };
                spec.expect.push(Expectation {
                    key: key.to_string(),
                    value: v.to_string(),
                    provenance: prov.to_string(),
                });
            }
        }
    }
    if spec.name.is_empty() {
        return Err(perr(1, 1, "missing `name` in [meta]"));
    }
    if spec.var_names.is_empty() {
        return Err(perr(1, 1, "missing `vars` in [chart]"));
    }
    Ok(spec)
}

/// Canonical text form; `parse_spec(&emit_spec(s)) == s`.
pub fn emit_spec(spec: &ConnectionSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[meta]\nname = {}", spec.name);
    if let Some(d) = &spec.description {
        let _ = writeln!(out, "description = {d}");
    }
    for (k, v) in &spec.params {
        let _ = writeln!(out, "param.{k} = {v}");
    }
    let _ = writeln!(out, "\n[chart]\nvars = {}", spec.var_names.join(", "));
    if let Some(b) = &spec.basepoint {
        let _ = writeln!(out, "basepoint = {}", b.join(", "));
    }
    if !spec.divisor.is_empty() {
        let _ = writeln!(out, "\n[divisor]");
        for (e, m) in &spec.divisor {
            let _ = writeln!(out, "{e} = {m}");
        }
    }
    if !spec.christoffel.is_empty() {
        let _ = writeln!(out, "\n[christoffel]");
        for ((k, i, j), e) in &spec.christoffel {
            let _ = writeln!(out, "{},{},{} = {e}", k + 1, i + 1, j + 1);
        }
    }
    if let Some(f) = &spec.frame {
        let _ = writeln!(out, "\n[frame]");
        for (name, m) in [("Q", &f.q), ("Qinv", &f.qinv)] {
            for ((r, c), e) in m {
                let _ = writeln!(out, "{name} {},{} = {e}", r + 1, c + 1);
            }
        }
    }
    if !spec.expect.is_empty() {
        let _ = writeln!(out, "\n[expect]");
        for e in &spec.expect {
            if e.provenance.is_empty() {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            } else {
                let _ = writeln!(out, "{} = {} | {}", e.key, e.value, e.provenance);
            }
        }
    }
    out
}

impl ConnectionSpec {
    /// Replaces or adds a parameter value.
    pub fn with_param(mut self, name: &str, value: &str) -> Self {
        self.params.insert(name.to_string(), value.to_string());
        self
    }

    pub fn expectation(&self, key: &str) -> Option<&Expectation> {
        self.expect.iter().find(|e| e.key == key)
    }

    fn param_values(&self) -> Result<BTreeMap<String, GaussianRational>> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.params {
            let c = parse_constant(v, &out).map_err(|e| Error::Validation(format!("parameter {k}: {}", e.message)))?;
            out.insert(k.clone(), c);
        }
        Ok(out)
    }

    /// Assembles the connection and frame and checks every invariant.
    pub fn build(&self) -> Result<Scenario> {
        let n = self.var_names.len();
        let params = self.param_values()?;
        let expr = |what: &str, text: &str| -> Result<RationalFn> {
            parse_rational(text, &self.var_names, &params)
                .map_err(|e| Error::Validation(format!("{what}: {} (column {})", e.message, e.column)))
        };
        let mut divisor = Vec::new();
        for (text, m) in &self.divisor {
            let f = expr(&format!("divisor `{text}`"), text)?;
            if !f.is_polynomial() {
                return Err(Error::Validation(format!("divisor `{text}` is not a polynomial")));
            }
            divisor.push(DivisorComponent::new(f.num().clone(), *m)?);
        }
        let chart = Chart::new(self.var_names.clone(), divisor)?;
        let mut conn = ChartConnection::flat(chart.clone());
        for (&(k, i, j), text) in &self.christoffel {
            if k >= n || i >= n || j >= n {
                return Err(Error::Validation(format!(
                    "Christoffel index {},{},{} out of range",
                    k + 1,
                    i + 1,
                    j + 1
                )));
            }
            conn.set_gamma(k, i, j, expr(&format!("Γ {},{},{}", k + 1, i + 1, j + 1), text)?);
        }
        conn.validate()?;
        let frame = match &self.frame {
            None => SubmoduleFrame::identity(&chart),
            Some(f) => {
                let build = |m: &BTreeMap<(usize, usize), String>, label: &str| -> Result<RatMatrix> {
                    let mut out = RatMatrix::identity(n, n);
                    for (&(r, c), text) in m {
                        if r >= n || c >= n {
                            return Err(Error::Validation(format!("{label} index {},{} out of range", r + 1, c + 1)));
                        }
                        out.set(r, c, expr(&format!("{label} {},{}", r + 1, c + 1), text)?);
                    }
                    Ok(out)
                };
                SubmoduleFrame::new(GaugeMatrix::new(build(&f.q, "Q")?, build(&f.qinv, "Qinv")?)?, &chart)?
            }
        };
        let basepoint = match &self.basepoint {
            Some(b) => {
                if b.len() != n {
                    return Err(Error::Validation(format!("basepoint has {} coordinates, chart has {n}", b.len())));
                }
                b.iter()
                    .map(|t| {
                        parse_constant(t, &params)
                            .map(|c| c.to_c64())
                            .map_err(|e| Error::Validation(format!("basepoint: {}", e.message)))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![Complex64::new(1.0, 0.0); n],
        };
        if chart.divisor_distance(&basepoint) < 1e-6 {
            return Err(Error::Validation("basepoint lies on the divisor".into()));
        }
        Ok(Scenario {
            spec: self.clone(),
            connection: conn,
            frame,
            basepoint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOPF: &str = "\
[meta]
name = hopf

[chart]
vars = z1, z2

[divisor]
z1 = 1

[christoffel]
1,1,1 = 1/z1

[frame]
Q 1,1 = 1/(2*z1)
Qinv 1,1 = 2*z1

[expect]
branched = true | frame construction
";

    #[test]
    fn hopf_parses_and_builds() {
        let s = parse_spec(HOPF).unwrap();
        assert_eq!(s.divisor, vec![("z1".to_string(), 1)]);
        let sc = s.build().unwrap();
        assert_eq!(sc.nvars(), 2);
        assert_eq!(sc.chart().divisor().len(), 1);
        assert_eq!(s.expectation("branched").unwrap().provenance, "frame construction");
    }

    #[test]
    fn flat_defaults() {
        let s = parse_spec("[meta]\nname = flat\n[chart]\nvars = z1, z2\n").unwrap();
        let sc = s.build().unwrap();
        assert!(sc.connection.is_flat_coordinates());
        assert_eq!(sc.basepoint.len(), 2);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_spec("[meta]\nname = x\n[chart]\nvars = z1\n[christoffel]\n1,1 = z1\n") {
            Err(Error::Parse { line: 6, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_spec("[meta]\nname = x\n[bogus]\n") {
            Err(Error::Parse { line: 3, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let undeclared = parse_spec("[meta]\nname = x\n[chart]\nvars = z1, z2\n[christoffel]\n1,1,1 = w\n").unwrap();
        assert!(matches!(undeclared.build(), Err(Error::Validation(_))));
        let bad_frame = parse_spec(&HOPF.replace("Qinv 1,1 = 2*z1", "Qinv 1,1 = z1")).unwrap();
        assert!(bad_frame.build().is_err());
    }

    #[test]
    fn emit_round_trips() {
        let s = parse_spec(HOPF).unwrap().with_param("lambda", "1/3");
        assert_eq!(parse_spec(&emit_spec(&s)).unwrap(), s);
    }
}
