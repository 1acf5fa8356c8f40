use std::fmt::Write as _;

use super::MetricsError;

/// Per-case scores with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    /// Cases sorted by name.
    pub cases: Vec<(String, f64)>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_cases(
        metric: impl Into<String>,
        mut cases: Vec<(String, f64)>,
    ) -> Result<Self, MetricsError> {
        if cases.is_empty() {
            return Err(MetricsError::Empty);
        }
        cases.sort_by(|a, b| a.0.cmp(&b.0));
        let n = cases.len() as f64;
        let mean = cases.iter().map(|c| c.1).sum::<f64>() / n;
        let var = cases.iter().map(|c| (c.1 - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            metric: metric.into(),
            cases,
            mean,
            std: var.sqrt(),
        })
    }

    /// Flat `key=value` form.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        writeln!(out, "metric={}", self.metric).unwrap();
        writeln!(out, "n={}", self.cases.len()).unwrap();
        writeln!(out, "mean={}", self.mean).unwrap();
        writeln!(out, "std={}", self.std).unwrap();
        for (name, v) in &self.cases {
            writeln!(out, "case.{name}={v}").unwrap();
        }
        out
    }

    /// One tab-separated record per case followed by a summary record.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (name, v) in &self.cases {
            writeln!(out, "case\t{}\t{name}\t{v}", self.metric).unwrap();
        }
        writeln!(out, "summary\t{}\t{}\t{}", self.metric, self.mean, self.std).unwrap();
        out
    }
}

/// Summary of unnamed values; cases are named by zero-padded index.
pub fn report(values: &[f64]) -> Result<EvalReport, MetricsError> {
    let width = values.len().to_string().len();
    let cases = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (format!("{i:0width$}"), v))
        .collect();
    EvalReport::from_cases("value", cases)
}
