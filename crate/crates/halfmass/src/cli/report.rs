//! Machine-readable command reports.
//!
//! JSON output is schema-versioned ("halfmass/1") and deterministic for
//! identical inputs and seed: keys are sorted (BTree map) and the wall time
//! is reported only in the text rendering, never in the JSON.

use serde_json::{Map, Value};

pub const SCHEMA: &str = "halfmass/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    InputError = 1,
    Nonconvergence = 2,
    PositivityFailure = 3,
    VerifyFailure = 4,
}

pub struct Report {
    pub command: String,
    pub inputs: Vec<(String, Value)>,
    pub results: Vec<(String, Value)>,
    pub warnings: Vec<String>,
    pub wall_time: std::time::Duration,
    pub exit: ExitCode,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            inputs: Vec::new(),
            results: Vec::new(),
            warnings: Vec::new(),
            wall_time: std::time::Duration::ZERO,
            exit: ExitCode::Ok,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.inputs.push((key.to_string(), value.into()));
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.push((key.to_string(), value.into()));
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn to_json(&self) -> Value {
        fn to_map(pairs: &[(String, Value)]) -> Value {
            let mut m = Map::new();
            for (k, v) in pairs {
                m.insert(k.clone(), sanitize(v.clone()));
            }
            Value::Object(m)
        }
        let mut root = Map::new();
        root.insert("schema".into(), Value::String(SCHEMA.into()));
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("inputs".into(), to_map(&self.inputs));
        root.insert("results".into(), to_map(&self.results));
        root.insert(
            "warnings".into(),
            Value::Array(self.warnings.iter().cloned().map(Value::String).collect()),
        );
        root.insert("exit_code".into(), Value::from(self.exit as i32));
        Value::Object(root)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("halfmass {}\n", self.command));
        if !self.inputs.is_empty() {
            out.push_str("inputs:\n");
            for (k, v) in &self.inputs {
                out.push_str(&format!("  {k} = {v}\n"));
            }
        }
        out.push_str("results:\n");
        for (k, v) in &self.results {
            out.push_str(&format!("  {k} = {v}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push_str(&format!("wall time: {:.3} s\n", self.wall_time.as_secs_f64()));
        out
    }
}

/// JSON has no non-finite numbers; report them as strings.
fn sanitize(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !f.is_finite() {
                    return Value::String(format!("{f}"));
                }
            }
            Value::Number(n)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sanitize).collect()),
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, sanitize(v))).collect())
        }
        other => other,
    }
}

/// f64 helper: serde_json rejects NaN/inf in `from`, so route through sanitize.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::String(format!("{v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_deterministic_and_excludes_wall_time() {
        let mut r1 = Report::new("mass");
        r1.input("file", "x.metric");
        r1.result("extrapolated", num(25.1327));
        r1.wall_time = std::time::Duration::from_millis(123);
        let mut r2 = Report::new("mass");
        r2.input("file", "x.metric");
        r2.result("extrapolated", num(25.1327));
        r2.wall_time = std::time::Duration::from_millis(987);
        assert_eq!(
            serde_json::to_string(&r1.to_json()).unwrap(),
            serde_json::to_string(&r2.to_json()).unwrap()
        );
        assert!(r1.to_text().contains("wall time"));
    }

    #[test]
    fn non_finite_values_become_strings() {
        let mut r = Report::new("mass");
        r.result("fitted_exponent", num(f64::NEG_INFINITY));
        let s = serde_json::to_string(&r.to_json()).unwrap();
        assert!(s.contains("-inf"));
    }
}
