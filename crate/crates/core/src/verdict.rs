//! Pass/fail records written next to every experiment table.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Row label, e.g. `visits/T=4`.
    pub test: String,
    /// The mathematical statement being checked, e.g. `visit-count bound`.
    pub claim: String,
    pub statistic: f64,
    pub bound: f64,
    pub std_error: f64,
    pub pass: bool,
}

impl Verdict {
    /// Upper-bound check: passes when `statistic - 3 * std_error <= bound`.
    pub fn upper(
        test: impl Into<String>,
        claim: impl Into<String>,
        statistic: f64,
        std_error: f64,
        bound: f64,
    ) -> Self {
        let se = if std_error.is_finite() { std_error } else { 0.0 };
        Verdict {
            test: test.into(),
            claim: claim.into(),
            statistic,
            bound,
            std_error,
            pass: statistic - 3.0 * se <= bound,
        }
    }

    /// Verdict with an externally decided outcome.
    pub fn decided(
        test: impl Into<String>,
        claim: impl Into<String>,
        statistic: f64,
        std_error: f64,
        bound: f64,
        pass: bool,
    ) -> Self {
        Verdict {
            test: test.into(),
            claim: claim.into(),
            statistic,
            bound,
            std_error,
            pass,
        }
    }
}

/// A record that can be written as one CSV line.
pub trait TableRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Renders typed rows with their header. Floats use Rust's shortest
/// round-trip formatting, so equal values always give equal bytes.
pub fn render_csv<T: TableRow>(rows: &[T]) -> String {
    csv_table(T::header(), rows.iter().map(TableRow::fields))
}

/// Renders rows as CSV with a header line. Values must not contain commas.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_bound_uses_three_standard_errors() {
        assert!(Verdict::upper("a", "c", 10.0, 1.0, 7.0).pass);
        assert!(!Verdict::upper("a", "c", 10.0, 0.9, 7.0).pass);
        let json = serde_json::to_string(&Verdict::upper("a", "c", 1.0, 0.0, 2.0)).unwrap();
        assert!(json.contains("\"pass\":true"));
    }

    #[test]
    fn csv_layout() {
        let csv = csv_table(&["a", "b"], vec![vec!["1".into(), "2".into()]]);
        assert_eq!(csv, "a,b\n1,2\n");
    }
}
