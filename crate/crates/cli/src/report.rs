//! Machine-readable verification report.

use serde::Serialize;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// `null` when the check was skipped or its computation failed.
    pub measured: Option<f64>,
    pub tolerance: f64,
    /// Error or skip reason, shown in the console summary only.
    #[serde(skip)]
    pub note: Option<String>,
}

impl Check {
    /// Passes iff `measured <= tolerance` (NaN fails).
    pub fn measure(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        let status = if measured <= tolerance { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, measured: Some(measured).filter(|m| m.is_finite()), tolerance, note: None }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, note: impl ToString) -> Self {
        Self { name: name.into(), status: Status::Fail, measured: None, tolerance, note: Some(note.to_string()) }
    }

    pub fn skipped(name: impl Into<String>, tolerance: f64, note: impl ToString) -> Self {
        Self { name: name.into(), status: Status::Skipped, measured: None, tolerance, note: Some(note.to_string()) }
    }

    pub fn from_result(name: impl Into<String>, measured: Result<f64, impl ToString>, tolerance: f64) -> Self {
        match measured {
            Ok(v) => Self::measure(name, v, tolerance),
            Err(e) => Self::failed(name, tolerance, e),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceInfo {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub which: &'static str,
    pub solver: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub instances: Vec<InstanceInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub environment: Environment,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl Report {
    pub fn new(environment: Environment, checks: Vec<Check>) -> Self {
        let all_passed = checks.iter().all(|c| c.status != Status::Fail);
        Self { schema: SCHEMA, environment, checks, all_passed }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    /// One line per check, for humans.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let measured = c.measured.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
            out.push_str(&format!("{tag}  {:<48} {measured:>10} <= {:.1e}", c.name, c.tolerance));
            if let Some(note) = &c.note {
                out.push_str(&format!("  ({note})"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_measurement() {
        assert_eq!(Check::measure("a", 1e-9, 1e-8).status, Status::Pass);
        assert_eq!(Check::measure("a", 1e-8, 1e-8).status, Status::Pass);
        assert_eq!(Check::measure("a", 2e-8, 1e-8).status, Status::Fail);
        let nan = Check::measure("a", f64::NAN, 1.0);
        assert_eq!((nan.status, nan.measured), (Status::Fail, None));
    }

    #[test]
    fn skipped_checks_do_not_fail_the_report() {
        let env = Environment { seed: 0, instances: vec![] };
        let r = Report::new(env.clone(), vec![Check::measure("a", 0.0, 1.0), Check::skipped("b", 1.0, "n too large")]);
        assert!(r.all_passed);
        let r = Report::new(env, vec![Check::failed("c", 1.0, "boom")]);
        assert!(!r.all_passed);
    }

    #[test]
    fn json_has_exactly_the_report_fields() {
        let r = Report::new(Environment { seed: 3, instances: vec![] }, vec![Check::failed("c", 1.0, "boom")]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["all_passed", "checks", "environment", "schema"]);
        let check = v["checks"][0].as_object().unwrap();
        assert_eq!(check.len(), 4);
        assert!(check["measured"].is_null());
        assert_eq!(check["status"], "fail");
    }
}
