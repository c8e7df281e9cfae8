//! Filter bank text format.
//!
//! ```text
//! MANTISFB v1
//! filters=N
//! offset=<int8>        # then 16 lines of 16 weights in [-7, 7], repeated N times
//! FCHEAD               # optional
//! <16 ints in [-128, 127]>
//! bias=<int>
//! ```
//!
//! Blank lines are ignored. Errors carry the 1-based line number.

use std::path::Path;

use crate::adc::OffsetRegister;
use crate::error::{Error, Result};
use crate::pipeline::{Filter, FilterBank, FILTER_SIZE, MAX_FILTERS};
use crate::roi::FcHead;

pub const MAGIC: &str = "MANTISFB v1";
pub const HEAD_WEIGHTS: usize = 16;

struct Lines<'a> {
    name: &'a str,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, name: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            name,
            inner: it.peekable(),
            last: 0,
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.name.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(self.err(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn key_value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next(key)?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((n, v.trim())),
            _ => Err(self.err(n, format!("expected '{key}=...', got '{l}'"))),
        }
    }

    fn ints(&self, n: usize, l: &str, lo: i64, hi: i64) -> Result<Vec<i64>> {
        l.split_whitespace()
            .map(|t| {
                let v: i64 = t
                    .parse()
                    .map_err(|_| self.err(n, format!("'{t}' is not an integer")))?;
                if v < lo || v > hi {
                    return Err(self.err(n, format!("value {v} outside [{lo}, {hi}]")));
                }
                Ok(v)
            })
            .collect()
    }
}

pub fn parse_filters(text: &str, name: &str) -> Result<FilterBank> {
    let mut lines = Lines::new(text, name);
    let (n, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(lines.err(n, format!("expected header '{MAGIC}', got '{magic}'")));
    }
    let (n, count) = lines.key_value("filters")?;
    let count: usize = count
        .parse()
        .map_err(|_| lines.err(n, format!("filter count '{count}' is not an integer")))?;
    if count == 0 || count > MAX_FILTERS {
        return Err(lines.err(n, format!("filter count {count} outside 1..={MAX_FILTERS}")));
    }
    let mut filters = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, off) = lines.key_value("offset")?;
        let off = lines.ints(n, off, i64::from(i8::MIN), i64::from(i8::MAX))?;
        let [off] = off[..] else {
            return Err(lines.err(n, "offset takes exactly one integer"));
        };
        let mut values = Vec::with_capacity(FILTER_SIZE * FILTER_SIZE);
        for _ in 0..FILTER_SIZE {
            let (n, row) = lines.next("a weight row")?;
            let row = lines.ints(n, row, -7, 7)?;
            if row.len() != FILTER_SIZE {
                return Err(lines.err(n, format!("weight row has {} values, expected {FILTER_SIZE}", row.len())));
            }
            values.extend(row.into_iter().map(|v| v as i32));
        }
        filters.push(Filter::from_values(&values, OffsetRegister(off as i8))?);
    }
    let mut bank = FilterBank::new(filters)?;
    if let Some((n, l)) = lines.inner.next() {
        lines.last = n;
        if l != "FCHEAD" {
            return Err(lines.err(n, format!("expected 'FCHEAD' or end of file, got '{l}'")));
        }
        let mut weights = Vec::with_capacity(HEAD_WEIGHTS);
        while weights.len() < HEAD_WEIGHTS {
            let (n, l) = lines.next("head weights")?;
            weights.extend(lines.ints(n, l, i64::from(i8::MIN), i64::from(i8::MAX))?);
            if weights.len() > HEAD_WEIGHTS {
                return Err(lines.err(n, format!("more than {HEAD_WEIGHTS} head weights")));
            }
        }
        let (n, bias) = lines.key_value("bias")?;
        let bias: i32 = bias
            .parse()
            .map_err(|_| lines.err(n, format!("bias '{bias}' is not an integer")))?;
        bank = bank.with_head(FcHead {
            weights: weights.into_iter().map(|v| v as i8).collect(),
            bias,
        });
        if let Some((n, l)) = lines.inner.next() {
            return Err(lines.err(n, format!("trailing content '{l}'")));
        }
    }
    Ok(bank)
}

pub fn format_filters(bank: &FilterBank) -> String {
    let mut out = format!("{MAGIC}\nfilters={}\n", bank.len());
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    for f in bank.filters() {
        out.push_str(&format!("offset={}\n", f.offset.0));
        for i in 0..FILTER_SIZE {
            out.push_str(&join(&mut f.row(i).iter().map(|w| w.value().to_string())));
            out.push('\n');
        }
    }
    if let Some(h) = bank.head() {
        out.push_str("FCHEAD\n");
        out.push_str(&join(&mut h.weights.iter().map(|w| w.to_string())));
        out.push_str(&format!("\nbias={}\n", h.bias));
    }
    out
}

pub fn load_filters(path: impl AsRef<Path>) -> Result<FilterBank> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_filters(&text, &path.display().to_string())
}

pub fn save_filters(path: impl AsRef<Path>, bank: &FilterBank) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_filters(bank)).map_err(|e| Error::io(path, e))
}
