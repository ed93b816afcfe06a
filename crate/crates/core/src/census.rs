//! Multiply-accumulate and parameter accounting.
//!
//! Counting rules: a convolution costs `k*k*Cin*Cout/groups*Hout*Wout` MACs
//! (pointwise linears are 1x1 convolutions), a normalization one MAC per
//! element, and a selective scan its projections plus `L*N` recurrence
//! updates per inner channel. Activations, pooling and elementwise products
//! are not counted.

use std::collections::BTreeMap;
use std::fmt;

/// One counted layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlopEntry {
    pub name: String,
    pub macs: u64,
}

/// Per-layer MAC counts and the parameter census of a model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlopReport {
    pub entries: Vec<FlopEntry>,
    pub params: usize,
    pub height: usize,
    pub width: usize,
}

impl FlopReport {
    pub fn push(&mut self, name: impl Into<String>, macs: u64) {
        self.entries.push(FlopEntry {
            name: name.into(),
            macs,
        });
    }

    pub fn total_macs(&self) -> u64 {
        self.entries.iter().map(|e| e.macs).sum()
    }

    /// MACs summed by the first `depth` dot-separated name components.
    pub fn by_module(&self, depth: usize) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            let key: Vec<&str> = e.name.split('.').take(depth).collect();
            *out.entry(key.join(".")).or_insert(0) += e.macs;
        }
        out
    }
}

/// Prefixes pushed names, mirroring [`crate::nn::Params`] scopes.
pub struct FlopScope<'a> {
    report: &'a mut FlopReport,
    prefix: String,
}

impl<'a> FlopScope<'a> {
    pub fn new(report: &'a mut FlopReport) -> Self {
        FlopScope {
            report,
            prefix: String::new(),
        }
    }

    fn join(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn scope(&mut self, name: &str) -> FlopScope<'_> {
        let prefix = self.join(name);
        FlopScope {
            report: &mut *self.report,
            prefix,
        }
    }

    pub fn add(&mut self, name: &str, macs: u64) {
        let full = self.join(name);
        self.report.push(full, macs);
    }
}

impl fmt::Display for FlopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input {}x{}", self.height, self.width)?;
        writeln!(
            f,
            "parameters {} ({:.3} M)",
            self.params,
            self.params as f64 / 1e6
        )?;
        let total = self.total_macs();
        writeln!(f, "MACs {} ({:.3} G)", total, total as f64 / 1e9)?;
        for (module, macs) in self.by_module(1) {
            writeln!(
                f,
                "  {module:<16} {:>10.3} M  {:>5.1}%",
                macs as f64 / 1e6,
                100.0 * macs as f64 / total.max(1) as f64
            )?;
        }
        Ok(())
    }
}
