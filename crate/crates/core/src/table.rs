//! Plain CSV emission shared by the reports. Floats use 17 significant
//! digits so values round-trip exactly.

use std::fmt::Write;

/// 17 significant digits in scientific notation; non-finite values are
/// written as `inf`, `-inf` or `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Parse a value written by [`fmt_f64`] (or any ordinary float literal).
pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// A CSV table built row by row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(header: I) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 1.0 / 3.0, -2.5e-300, 1e300, f64::INFINITY] {
            assert_eq!(parse_f64(&fmt_f64(v)).unwrap(), v);
        }
        assert!(!fmt_f64(1234567.0).contains(','));
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(["k", "ratio"]);
        t.push_floats(&[1.0, 0.5]);
        assert_eq!(
            t.to_csv(),
            "k,ratio\n1.0000000000000000e0,5.0000000000000000e-1\n"
        );
    }
}
