//! Test verdict bundles and their CSV rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Fail,
    /// Too little data or a degenerate estimate; neither pass nor fail.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One verdict with the numbers behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct StatReport {
    pub test_name: String,
    pub observable: String,
    pub parameters: BTreeMap<String, String>,
    pub estimate: f64,
    pub error: f64,
    pub bound_or_target: f64,
    pub p_value: Option<f64>,
    pub verdict: Verdict,
    /// Informational reports never fail a run.
    pub gating: bool,
}

impl StatReport {
    pub fn new(test_name: impl Into<String>, observable: impl Into<String>) -> Self {
        Self {
            test_name: test_name.into(),
            observable: observable.into(),
            parameters: BTreeMap::new(),
            estimate: f64::NAN,
            error: 0.0,
            bound_or_target: f64::NAN,
            p_value: None,
            verdict: Verdict::Inconclusive,
            gating: true,
        }
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn values(mut self, estimate: f64, error: f64, bound: f64) -> Self {
        self.estimate = estimate;
        self.error = error.abs();
        self.bound_or_target = bound;
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }

    pub fn verdict(mut self, v: impl Into<Verdict>) -> Self {
        self.verdict = v.into();
        self
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.gating && self.verdict == Verdict::Fail
    }

    pub fn n_label(&self) -> &str {
        self.parameters.get("N").map_or("", String::as_str)
    }
}

/// Overall outcome of a list of reports.
pub fn overall(reports: &[StatReport]) -> Verdict {
    if reports.iter().any(StatReport::failed) {
        Verdict::Fail
    } else if reports.iter().filter(|r| r.gating).all(StatReport::passed) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes `test,observable,N,estimate,error,bound,pass[,p_value,params][,seed,config_hash]`.
pub fn write_reports_csv(reports: &[StatReport], provenance: Option<(u64, &str)>, mut out: impl Write) -> Result<()> {
    let mut header = String::from("test,observable,N,estimate,error,bound,pass,p_value,gating,parameters");
    if provenance.is_some() {
        header.push_str(",seed,config_hash");
    }
    writeln!(out, "{header}")?;
    for r in reports {
        let params: Vec<String> = r.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.test_name),
            csv_field(&r.observable),
            csv_field(r.n_label()),
            num(r.estimate),
            num(r.error),
            num(r.bound_or_target),
            r.verdict,
            r.p_value.map(num).unwrap_or_default(),
            r.gating,
            csv_field(&params.join(";")),
        );
        if let Some((seed, hash)) = provenance {
            line.push_str(&format!(",{seed},{hash}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_verdicts() {
        let p = StatReport::new("a", "x").verdict(true);
        let f = StatReport::new("b", "x").verdict(false);
        let i = StatReport::new("c", "x");
        assert_eq!(overall(&[p.clone()]), Verdict::Pass);
        assert_eq!(overall(&[p.clone(), i.clone()]), Verdict::Inconclusive);
        assert_eq!(overall(&[p.clone(), f.clone()]), Verdict::Fail);
        assert_eq!(overall(&[p, f.informational()]), Verdict::Pass);
    }

    #[test]
    fn csv_quotes_commas() {
        let r = StatReport::new("t", "a,b").param("N", 2).values(1.0, 0.1, 2.0).verdict(true);
        let mut buf = Vec::new();
        write_reports_csv(&[r], Some((7, "abc")), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.lines().nth(1).unwrap().starts_with("t,\"a,b\",2,1,0.1,2,pass,,true,N=2,7,abc"));
    }
}
