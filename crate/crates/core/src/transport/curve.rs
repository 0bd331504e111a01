use serde::{Deserialize, Serialize};

use crate::fmt_f64;

/// Outlet-averaged concentration sampled once per recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakthroughCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CurveError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl BreakthroughCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Equal lengths, finite entries and strictly ascending times.
    pub fn validate(&self) -> Result<(), CurveError> {
        if self.times.len() != self.values.len() {
            return Err(CurveError::Invalid(format!(
                "{} times but {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if let Some(v) = self.times.iter().chain(&self.values).find(|v| !v.is_finite()) {
            return Err(CurveError::Invalid(format!("non-finite entry {v}")));
        }
        if let Some(w) = self.times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(CurveError::Invalid(format!(
                "times not strictly ascending: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,c_out\n");
        for (t, c) in self.times.iter().zip(&self.values) {
            out.push_str(&fmt_f64(*t));
            out.push(',');
            out.push_str(&fmt_f64(*c));
            out.push('\n');
        }
        out
    }

    /// Parse a `t,c_out` table. The header row is required; blank lines are
    /// skipped.
    pub fn from_csv(text: &str) -> Result<Self, CurveError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim().replace(' ', "") == "t,c_out" => {}
            Some((n, h)) => {
                return Err(CurveError::Parse {
                    line: n + 1,
                    message: format!("expected header 't,c_out', found '{h}'"),
                })
            }
            None => return Err(CurveError::Invalid("empty curve file".into())),
        }
        let mut curve = Self { times: Vec::new(), values: Vec::new() };
        for (n, line) in lines {
            let parse = |field: Option<&str>| -> Result<f64, CurveError> {
                let field = field.ok_or_else(|| CurveError::Parse {
                    line: n + 1,
                    message: "expected two columns".into(),
                })?;
                field.trim().parse().map_err(|e| CurveError::Parse {
                    line: n + 1,
                    message: format!("'{field}': {e}"),
                })
            };
            let mut fields = line.split(',');
            let t = parse(fields.next())?;
            let c = parse(fields.next())?;
            if fields.next().is_some() {
                return Err(CurveError::Parse { line: n + 1, message: "expected two columns".into() });
            }
            curve.times.push(t);
            curve.values.push(c);
        }
        curve.validate()?;
        Ok(curve)
    }
}
