use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Column order of the per-snapshot diagnostics file.
pub const DIAGNOSTIC_COLUMNS: [&str; 14] = [
    "t",
    "norm",
    "energy",
    "sigma2_measured",
    "ent_boltzmann",
    "dEntB_dt_fd",
    "production_advective",
    "production_correlation",
    "fisher",
    "production_diffusive",
    "ent_von_neumann",
    "ref_sigma2",
    "ref_entropy",
    "ref_divergence",
];

/// One time sample of the scalar diagnostics. `None` marks a quantity that
/// does not apply to the scenario or was not computed at this snapshot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub norm: f64,
    pub energy: Option<f64>,
    pub sigma2_measured: f64,
    pub ent_boltzmann: f64,
    pub d_ent_b_dt_fd: Option<f64>,
    pub production_advective: Option<f64>,
    pub production_correlation: Option<f64>,
    pub fisher: f64,
    pub production_diffusive: Option<f64>,
    pub ent_von_neumann: Option<f64>,
    pub ref_sigma2: Option<f64>,
    pub ref_entropy: Option<f64>,
    pub ref_divergence: Option<f64>,
}

impl DiagnosticsRow {
    pub fn cells(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.t),
            Some(self.norm),
            self.energy,
            Some(self.sigma2_measured),
            Some(self.ent_boltzmann),
            self.d_ent_b_dt_fd,
            self.production_advective,
            self.production_correlation,
            Some(self.fisher),
            self.production_diffusive,
            self.ent_von_neumann,
            self.ref_sigma2,
            self.ref_entropy,
            self.ref_divergence,
        ]
    }
}

/// Named columns of optional numbers, one row per snapshot.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Values of one column, or `None` if there is no such column.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// An asserted identity with the worst error observed over the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub scenario: String,
    pub name: String,
    pub tolerance: f64,
    pub error: f64,
    pub passed: bool,
    pub detail: String,
}

impl IdentityCheck {
    /// Passes iff `error <= tolerance`; NaN errors fail.
    pub fn new(scenario: &str, name: &str, tolerance: f64, error: f64, detail: impl Into<String>) -> Self {
        IdentityCheck {
            scenario: scenario.to_string(),
            name: name.to_string(),
            tolerance,
            error,
            passed: error <= tolerance,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "identity scenario={} name={} status={} error={:.6e} tolerance={:.1e}",
            self.scenario,
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.error,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, " detail=\"{}\"", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
}

/// One measured diagnostic next to its reference value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotPoint {
    pub t: f64,
    pub quantity: &'static str,
    pub measured: f64,
    pub reference: Option<f64>,
}

/// Pointwise fields of one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub snapshot: usize,
    pub t: f64,
    pub table: Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub table: Table,
    pub identities: Vec<IdentityCheck>,
    /// Derived scalars such as fitted frequencies, keyed by name.
    pub metrics: BTreeMap<String, f64>,
    pub plot: Vec<PlotPoint>,
    pub fields: Vec<FieldDump>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.identities.iter().all(|c| c.passed)
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityCheck> {
        self.identities.iter().find(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        self.table.column(name)
    }

    /// Exit status: 0 when every identity holds, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}
