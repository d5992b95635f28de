//! Number formatting and small table helpers shared by every CSV/JSON-lines emitter.

use std::fmt::Write as _;

/// Formats `v` with exactly `digits` significant digits, no exponent for
/// magnitudes in `[1e-5, 1e15)`, scientific notation otherwise.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // round first so that e.g. 9.9999999999999 picks the right exponent
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Canonical precision of every emitted table.
pub fn fmt12(v: f64) -> String {
    fmt_sig(v, 12)
}

/// A table with a fixed header that renders as CSV or JSON lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Cells containing commas or quotes (family descriptions such as
    /// `{0,1}^8`) are quoted.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // writing to a Vec cannot fail
        w.write_record(&self.header).unwrap();
        for row in &self.rows {
            w.write_record(row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// One JSON object per row with the same field names and values as the CSV.
    /// Numeric cells are emitted as JSON numbers, everything else as strings.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push('{');
            for (i, (k, v)) in self.header.iter().zip(row).enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let is_number = serde_json::from_str::<serde_json::Number>(v).is_ok();
                if is_number {
                    let _ = write!(out, "\"{k}\":{v}");
                } else {
                    let _ = write!(out, "\"{k}\":{}", serde_json::Value::String(v.clone()));
                }
            }
            out.push_str("}\n");
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::JsonLines => self.to_json_lines(),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt12(0.5), "0.500000000000");
        assert_eq!(fmt12(1.0), "1.00000000000");
        assert_eq!(fmt12(0.46211715726000974), "0.462117157260");
        assert_eq!(fmt12(12.5), "12.5000000000");
        assert_eq!(fmt12(1.5e-7), "1.50000000000e-7");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt_sig(9.99999999999999, 3), "10.0");
    }

    #[test]
    fn json_lines_mirror_csv() {
        let mut t = Table::new(["c", "name"]);
        t.push(vec!["1.50".into(), "x".into()]);
        assert_eq!(t.to_csv(), "c,name\n1.50,x\n");
        assert_eq!(t.to_json_lines(), "{\"c\":1.50,\"name\":\"x\"}\n");
        t.push(vec!["2".into(), "{0,1}^8".into()]);
        assert!(t.to_csv().ends_with("2,\"{0,1}^8\"\n"));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1.0, 1e-16, 1e-16, -1.0].into_iter().collect();
        assert!((s.value() - 2e-16).abs() < 1e-30);
    }
}
