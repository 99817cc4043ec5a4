//! Plain numeric tables: one `#`-prefixed header line of tab-separated column
//! names, then one tab-separated row of numbers per line.

use std::fmt;

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PartialEq for Table {
    /// Bitwise on values, with every NaN equal to every other.
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same(*x, *y)))
    }
}

fn same(x: f64, y: f64) -> bool {
    (x.is_nan() && y.is_nan()) || x.to_bits() == y.to_bits()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for TableError {}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header; tables are built by
    /// this crate, so that is a programming error.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(TableError {
            line: 1,
            message: "empty table".into(),
        })?;
        let names = header.strip_prefix('#').ok_or(TableError {
            line: 1,
            message: "header must start with '#'".into(),
        })?;
        let columns: Vec<String> = names.strip_prefix(' ').unwrap_or(names).split('\t').map(str::to_string).collect();
        if columns.iter().any(|c| c.is_empty() || c.contains(['\n', '\r'])) {
            return Err(TableError {
                line: 1,
                message: "empty column name".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| TableError {
                        line: i + 1,
                        message: format!("not a number: {v:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(TableError {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", columns.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.columns.join("\t"))?;
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    f.write_str("\t")?;
                }
                first = false;
                write!(f, "{v:e}")?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_and_parses() {
        let mut t = Table::new(["x", "V+"]);
        t.push(vec![0.5, -2.25e-3]);
        t.push(vec![f64::INFINITY, f64::NAN]);
        let s = t.to_string();
        assert_eq!(s, "# x\tV+\n5e-1\t-2.25e-3\ninf\tNaN\n");
        assert_eq!(Table::parse(&s).unwrap(), t);
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(Table::parse("x\ty\n").unwrap_err().line, 1);
        let e = Table::parse("# x\ty\n1\t2\n3\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = Table::parse("# x\n1\nabc\n").unwrap_err();
        assert!(e.message.contains("abc"));
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20)) {
            let mut t = Table::new(["a", "b", "c"]);
            for r in rows {
                t.push(r);
            }
            prop_assert_eq!(Table::parse(&t.to_string()).unwrap(), t);
        }
    }
}
