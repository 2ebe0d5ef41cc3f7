//! Line-oriented metric definition files.
//!
//! ```text
//! # comment
//! dimension 3
//! tau 1
//! r0 0.5
//! param m 1
//! family half_schwarzschild 1
//! # or: family flat
//! # or: family conformal 1 + 0.25/r
//! # or: family perturbation ... followed by "a i j <expr>" lines and "end"
//! radii 20 40 80 160
//! order 12
//! exact_mass 25.132741228718345
//! ```
//!
//! Exactly one family block per file; expressions parse under the declared
//! dimension with the bound `param` constants plus `n`.

use std::sync::Arc;

use crate::expr::parse_with_params;
use crate::fields::FieldRef;
use crate::metric::{MetricError, MetricField, SymTensorField};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: expression error: {source}")]
    Expr { line: usize, source: crate::expr::ParseError },
    #[error("no family block found")]
    MissingFamily,
    #[error("line {line}: a second family block is not allowed")]
    DuplicateFamily { line: usize },
    #[error("line {line}: component a {i} {j} set twice (file must give each symmetric slot once)")]
    DuplicateComponent { line: usize, i: usize, j: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Flat,
    HalfSchwarzschild { m: f64 },
    Conformal { expr: String },
    Perturbation { comps: Vec<(usize, usize, String)> },
}

/// Parsed metric file, pre-validation.
#[derive(Debug, Clone)]
pub struct MetricFile {
    pub dimension: usize,
    pub tau: Option<f64>,
    pub r0: Option<f64>,
    pub params: Vec<(String, f64)>,
    pub family: Family,
    pub radii: Option<Vec<f64>>,
    pub order: Option<usize>,
    pub exact_mass: Option<f64>,
    pub seed: Option<u64>,
}

impl MetricFile {
    pub fn parse(text: &str) -> Result<MetricFile, FileError> {
        let mut dimension = None;
        let mut tau = None;
        let mut r0 = None;
        let mut params: Vec<(String, f64)> = Vec::new();
        let mut family: Option<Family> = None;
        let mut radii = None;
        let mut order = None;
        let mut exact_mass = None;
        let mut seed = None;
        let mut in_perturbation = false;
        let mut comps: Vec<(usize, usize, String)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap();
            let rest = line[key.len()..].trim();
            let syntax = |message: String| FileError::Syntax { line: line_no, message };
            match key {
                "dimension" | "n" => {
                    dimension = Some(
                        rest.parse::<usize>()
                            .map_err(|_| syntax(format!("bad dimension '{rest}'")))?,
                    );
                }
                "tau" => {
                    tau = Some(rest.parse().map_err(|_| syntax(format!("bad tau '{rest}'")))?);
                }
                "r0" => {
                    r0 = Some(rest.parse().map_err(|_| syntax(format!("bad r0 '{rest}'")))?);
                }
                "seed" => {
                    seed = Some(rest.parse().map_err(|_| syntax(format!("bad seed '{rest}'")))?);
                }
                "order" => {
                    order =
                        Some(rest.parse().map_err(|_| syntax(format!("bad order '{rest}'")))?);
                }
                "exact_mass" => {
                    exact_mass = Some(
                        rest.parse().map_err(|_| syntax(format!("bad exact_mass '{rest}'")))?,
                    );
                }
                "param" => {
                    let name = it
                        .next()
                        .ok_or_else(|| syntax("param needs a name and a value".into()))?;
                    let value: f64 = it
                        .next()
                        .ok_or_else(|| syntax("param needs a value".into()))?
                        .parse()
                        .map_err(|_| syntax(format!("bad param value on '{line}'")))?;
                    params.push((name.to_string(), value));
                }
                "radii" => {
                    let mut rs = Vec::new();
                    for tok in it {
                        rs.push(
                            tok.parse::<f64>()
                                .map_err(|_| syntax(format!("bad radius '{tok}'")))?,
                        );
                    }
                    if rs.is_empty() {
                        return Err(syntax("radii needs at least one value".into()));
                    }
                    radii = Some(rs);
                }
                "family" => {
                    if family.is_some() {
                        return Err(FileError::DuplicateFamily { line: line_no });
                    }
                    let name = it.next().ok_or_else(|| syntax("family needs a name".into()))?;
                    match name {
                        "flat" => family = Some(Family::Flat),
                        "half_schwarzschild" => {
                            let m: f64 = it
                                .next()
                                .ok_or_else(|| {
                                    syntax("half_schwarzschild needs the mass parameter".into())
                                })?
                                .parse()
                                .map_err(|_| syntax("bad mass parameter".into()))?;
                            family = Some(Family::HalfSchwarzschild { m });
                        }
                        "conformal" => {
                            let expr = rest[name.len()..].trim().to_string();
                            if expr.is_empty() {
                                return Err(syntax(
                                    "conformal needs the factor expression on the same line"
                                        .into(),
                                ));
                            }
                            family = Some(Family::Conformal { expr });
                        }
                        "perturbation" => {
                            in_perturbation = true;
                        }
                        other => {
                            return Err(syntax(format!("unknown family '{other}'")));
                        }
                    }
                }
                "a" if in_perturbation => {
                    let i: usize = it
                        .next()
                        .ok_or_else(|| syntax("a needs indices".into()))?
                        .parse()
                        .map_err(|_| syntax("bad index".into()))?;
                    let j: usize = it
                        .next()
                        .ok_or_else(|| syntax("a needs two indices".into()))?
                        .parse()
                        .map_err(|_| syntax("bad index".into()))?;
                    let consumed = line.find(char::is_whitespace).unwrap();
                    let after_a = line[consumed..].trim_start();
                    let after_i = after_a[after_a.find(char::is_whitespace).unwrap()..].trim_start();
                    let expr = after_i[after_i.find(char::is_whitespace).unwrap()..]
                        .trim()
                        .to_string();
                    if expr.is_empty() {
                        return Err(syntax("a i j needs an expression".into()));
                    }
                    // the slot is symmetric: giving both (i,j) and (j,i) is the
                    // classic corrupted-file case
                    if comps.iter().any(|(ci, cj, _)| {
                        (*ci == i && *cj == j) || (*ci == j && *cj == i)
                    }) {
                        return Err(FileError::DuplicateComponent { line: line_no, i, j });
                    }
                    comps.push((i, j, expr));
                }
                "end" if in_perturbation => {
                    in_perturbation = false;
                    family = Some(Family::Perturbation { comps: std::mem::take(&mut comps) });
                }
                other => {
                    return Err(syntax(format!("unknown directive '{other}'")));
                }
            }
        }
        if in_perturbation {
            family = Some(Family::Perturbation { comps });
        }
        let family = family.ok_or(FileError::MissingFamily)?;
        let dimension = dimension.unwrap_or(3);
        Ok(MetricFile {
            dimension,
            tau,
            r0,
            params,
            family,
            radii,
            order,
            exact_mass,
            seed,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<MetricFile, FileError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Build the metric; expression errors carry line 0 (post-parse).
    pub fn build(&self) -> Result<MetricField, FileError> {
        let n = self.dimension;
        let params: Vec<(&str, f64)> =
            self.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let mut g = match &self.family {
            Family::Flat => MetricField::flat_half_space(n)?,
            Family::HalfSchwarzschild { m } => MetricField::half_schwarzschild(n, *m)?,
            Family::Conformal { expr } => {
                let u = parse_with_params(expr, n, &params)
                    .map_err(|source| FileError::Expr { line: 0, source })?;
                let flat = MetricField::flat_half_space(n)?;
                let mut g = MetricField::conformal(flat, Arc::new(u) as FieldRef)?;
                if let Some(r0) = self.r0 {
                    g.r0 = r0;
                }
                // re-validate positivity on the possibly smaller region
                g.check_positive_definite()?;
                g
            }
            Family::Perturbation { comps } => {
                let mut a = SymTensorField::zeros(n);
                for (i, j, expr) in comps {
                    let f = parse_with_params(expr, n, &params)
                        .map_err(|source| FileError::Expr { line: 0, source })?;
                    a.set(i - 1, j - 1, Arc::new(f) as FieldRef);
                }
                let tau = self.tau.unwrap_or(1.0);
                MetricField::perturbation_with_r0(n, a, tau, self.r0.unwrap_or(1.0))?
            }
        };
        if let Some(tau) = self.tau {
            if matches!(self.family, Family::Conformal { .. }) {
                g.tau = tau;
            }
        }
        if let Some(r0) = self.r0 {
            if g.r0 < r0 {
                g.r0 = r0;
            }
        }
        if let Some(m) = self.exact_mass {
            g.exact_mass = Some(m);
        }
        Ok(g)
    }

    /// Declared-or-effective tau used for the mass regime check.
    pub fn effective_tau(&self, g: &MetricField) -> f64 {
        self.tau.unwrap_or(g.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_half_schwarzschild_file() {
        let f = MetricFile::parse(
            "# fixture\ndimension 3\nfamily half_schwarzschild 1\nradii 20 40 80 160\norder 12\n",
        )
        .unwrap();
        assert_eq!(f.dimension, 3);
        assert!(matches!(f.family, Family::HalfSchwarzschild { m } if m == 1.0));
        let g = f.build().unwrap();
        assert!((g.exact_mass.unwrap() - 8.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn parses_conformal_with_params() {
        let f = MetricFile::parse("dimension 3\nparam c 0.25\nfamily conformal 1 + c/r\n")
            .unwrap();
        let g = f.build().unwrap();
        let v = g.values(&[0.0, 0.0, 2.0]).unwrap();
        let expect = (1.0f64 + 0.125).powi(4);
        assert!((v.at(0, 0) - expect).abs() < 1e-13);
    }

    #[test]
    fn perturbation_block_and_symmetry_corruption() {
        let ok = MetricFile::parse(
            "dimension 3\ntau 1\nfamily perturbation\na 1 1 0.3/r\na 1 3 0.05*x1/r^2\nend\n",
        )
        .unwrap();
        let g = ok.build().unwrap();
        assert!(!g.boundary_orthogonal);

        let bad = MetricFile::parse(
            "dimension 3\nfamily perturbation\na 1 2 0.3/r\na 2 1 0.2/r\nend\n",
        );
        assert!(matches!(bad, Err(FileError::DuplicateComponent { .. })));
    }

    #[test]
    fn rejects_junk() {
        assert!(matches!(MetricFile::parse("dimension 3\n"), Err(FileError::MissingFamily)));
        assert!(matches!(
            MetricFile::parse("dimension 3\nfamily flat\nfamily flat\n"),
            Err(FileError::DuplicateFamily { .. })
        ));
        assert!(MetricFile::parse("bogus 3\nfamily flat\n").is_err());
        // expression error surfaces with position info from the parser
        let f = MetricFile::parse("dimension 3\nfamily conformal 1 + $\n").unwrap();
        assert!(matches!(f.build(), Err(FileError::Expr { .. })));
    }
}
