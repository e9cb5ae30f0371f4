use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Formulation;

/// One evaluation point of a residual: a time, or a labelled case such as an
/// index pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    /// Largest absolute residual.
    pub linf: f64,
    /// Root of the summed (or grid-integrated) squared residual.
    pub l2: f64,
}

impl Sample {
    pub fn at(t: f64, linf: f64, l2: f64) -> Self {
        Sample { t: Some(t), label: None, linf, l2 }
    }

    pub fn labelled(label: impl Into<String>, linf: f64, l2: f64) -> Self {
        Sample { t: None, label: Some(label.into()), linf, l2 }
    }

    /// Sample from the components of a vector-valued residual.
    pub fn from_components(t: f64, r: &[f64]) -> Self {
        let linf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Sample::at(t, linf, l2)
    }

    /// The label, or the sample time.
    pub fn key(&self) -> String {
        match (&self.label, self.t) {
            (Some(l), _) => l.clone(),
            (None, Some(t)) => format!("{t:.6e}"),
            (None, None) => String::new(),
        }
    }
}

/// A variant reading of the same identity, reported next to the asserted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternate {
    pub label: String,
    pub max_residual: f64,
    pub within_tolerance: bool,
}

/// Outcome of a residual check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: String,
    pub formulation: Formulation,
    pub samples: Vec<Sample>,
    pub tolerance: f64,
    pub max_residual: f64,
    pub pass: bool,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub alternates: Vec<Alternate>,
    /// Per-sample values of individual terms, for inspection and reduction
    /// comparisons.
    #[serde(default)]
    pub terms: BTreeMap<String, Vec<f64>>,
}

impl ResidualReport {
    pub fn new(identity: impl Into<String>, formulation: Formulation, samples: Vec<Sample>, tolerance: f64) -> Result<Self> {
        let identity = identity.into();
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::Config(format!("{identity}: tolerance must be positive and finite, got {tolerance}")));
        }
        if samples.is_empty() {
            return Err(Error::MissingData(format!("{identity}: no samples")));
        }
        if let Some(s) = samples.iter().find(|s| !s.linf.is_finite() || !s.l2.is_finite()) {
            return Err(Error::NonFinite { what: format!("{identity} residual at {}", s.key()), index: 0, position: [0.0; 3] });
        }
        let max_residual = samples.iter().fold(0.0f64, |m, s| m.max(s.linf));
        Ok(ResidualReport {
            identity,
            formulation,
            samples,
            tolerance,
            max_residual,
            pass: max_residual <= tolerance,
            notes: Vec::new(),
            alternates: Vec::new(),
            terms: BTreeMap::new(),
        })
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Records an alternate reading given its per-sample residuals.
    pub fn alternate(mut self, label: impl Into<String>, residuals: &[f64]) -> Self {
        let max_residual = residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.alternates.push(Alternate { label: label.into(), max_residual, within_tolerance: max_residual <= self.tolerance });
        self
    }

    pub fn term(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.terms.insert(name.into(), values);
        self
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.linf).collect()
    }

    pub fn status(&self) -> &'static str {
        if self.pass { "PASS" } else { "FAIL" }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Human-readable report with aligned columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let head = [
            ("identity", self.identity.clone()),
            ("formulation", self.formulation.name().to_string()),
            ("tolerance", format!("{:.3e}", self.tolerance)),
            ("max residual", format!("{:.3e}", self.max_residual)),
            ("result", self.status().to_string()),
        ];
        for (k, v) in head {
            let _ = writeln!(out, "{k:<14}{v}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "{:<14}{n}", "note");
        }
        let rows: Vec<[String; 3]> =
            self.samples.iter().map(|s| [s.key(), format!("{:.3e}", s.linf), format!("{:.3e}", s.l2)]).collect();
        out.push('\n');
        out.push_str(&align(&["sample", "linf", "l2"], &rows));
        if !self.alternates.is_empty() {
            out.push('\n');
            let rows: Vec<[String; 3]> = self
                .alternates
                .iter()
                .map(|a| {
                    let verdict = if a.within_tolerance { "within" } else { "outside" };
                    [a.label.clone(), format!("{:.3e}", a.max_residual), verdict.to_string()]
                })
                .collect();
            out.push_str(&align(&["alternate", "max residual", "tolerance"], &rows));
        }
        out
    }
}

/// One line per report: identity, formulation, max residual, tolerance, result.
pub fn summary_table(reports: &[ResidualReport]) -> String {
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.identity.clone(),
                r.formulation.name().to_string(),
                format!("{:.3e}", r.max_residual),
                format!("{:.3e}", r.tolerance),
                r.status().to_string(),
            ]
        })
        .collect();
    align(&["identity", "formulation", "max residual", "tolerance", "result"], &rows)
}

fn align<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut width = header.map(str::len);
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
