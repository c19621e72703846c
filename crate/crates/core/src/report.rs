//! Structured pass/fail reports for the verification entry points.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub check: String,
    pub status: String,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub witness: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn new(name: &str) -> CheckReport {
        CheckReport {
            name: name.into(),
            passed: true,
            items: Vec::new(),
        }
    }

    pub fn pass(&mut self, check: &str) {
        self.items.push(CheckItem {
            check: check.into(),
            status: "pass".into(),
            witness: serde_json::Value::Null,
        });
    }

    /// Record a failure with a witness locating it (say, the first offending
    /// coefficient). Marks the whole report failed.
    pub fn fail(&mut self, check: &str, witness: serde_json::Value) {
        self.passed = false;
        self.items.push(CheckItem {
            check: check.into(),
            status: "fail".into(),
            witness,
        });
    }

    /// A passing check that still carries data worth reporting.
    pub fn pass_with(&mut self, check: &str, witness: serde_json::Value) {
        self.items.push(CheckItem {
            check: check.into(),
            status: "pass".into(),
            witness,
        });
    }

    pub fn record(&mut self, check: &str, ok: bool, witness: serde_json::Value) {
        if ok {
            self.pass(check);
        } else {
            self.fail(check, witness);
        }
    }

    pub fn first_failure(&self) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.status == "fail")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
