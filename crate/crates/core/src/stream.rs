//! Stream update records, the three input models and the text stream format.
//!
//! A stream file is UTF-8 text. The first non-comment line is the header
//! `<ts|rps|cps> <n> <p>`; every following record is either `<alpha> <i> <j>`
//! (turnstile) or a bare `<alpha>` whose position determines the entry
//! (row-wise or column-wise permutation). Blank lines and lines starting with
//! `#` are skipped.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{check_index, Error, Result};

/// One additive change `M[i][j] += alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamUpdate {
    pub alpha: f64,
    pub i: usize,
    pub j: usize,
}

impl StreamUpdate {
    pub fn new(alpha: f64, i: usize, j: usize) -> Self {
        Self { alpha, i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Entries listed one row at a time, each set exactly once.
    RowPermutation,
    /// Entries listed one column at a time, each set exactly once.
    ColumnPermutation,
    /// Arbitrary `(alpha, i, j)` increments in any order.
    Turnstile,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::RowPermutation => "rps",
            ModelKind::ColumnPermutation => "cps",
            ModelKind::Turnstile => "ts",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rps" => Ok(ModelKind::RowPermutation),
            "cps" => Ok(ModelKind::ColumnPermutation),
            "ts" => Ok(ModelKind::Turnstile),
            other => Err(Error::Parameter(format!("unknown stream model `{other}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Stream model together with the matrix shape it describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamModel {
    pub kind: ModelKind,
    pub n: usize,
    pub p: usize,
}

impl StreamModel {
    pub fn new(kind: ModelKind, n: usize, p: usize) -> Result<Self> {
        if n < 2 || p < 2 {
            return Err(Error::Parameter(format!(
                "stream needs n >= 2 and p >= 2, got n = {n}, p = {p}"
            )));
        }
        Ok(Self { kind, n, p })
    }

    /// Number of records of a permutation stream, `None` for turnstile.
    pub fn expected_len(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Turnstile => None,
            _ => Some(self.n * self.p),
        }
    }

    /// Entry set by the `position`-th record of a permutation stream.
    pub fn entry_at(&self, position: usize) -> Result<(usize, usize)> {
        check_index("stream position", position, self.n * self.p)?;
        Ok(match self.kind {
            ModelKind::RowPermutation | ModelKind::Turnstile => {
                (position / self.p, position % self.p)
            }
            ModelKind::ColumnPermutation => (position % self.n, position / self.n),
        })
    }

    fn header(&self) -> String {
        format!("{} {} {}", self.kind, self.n, self.p)
    }
}

fn parse_alpha(field: &str, line_no: usize) -> Result<f64> {
    let alpha: f64 = field.parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("`{field}` is not a real number"),
    })?;
    if !alpha.is_finite() {
        return Err(Error::Parse {
            line: line_no,
            message: format!("non-finite increment `{field}`"),
        });
    }
    Ok(alpha)
}

fn parse_index(field: &str, line_no: usize) -> Result<usize> {
    field.parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("`{field}` is not a non-negative index"),
    })
}

/// Parses one record. `position` is the 0-based ordinal of the record among
/// data records and is only used by the permutation models; `line_no` is the
/// 1-based file line used in error messages.
pub fn parse_update(
    line: &str,
    model: &StreamModel,
    position: usize,
    line_no: usize,
) -> Result<StreamUpdate> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    match model.kind {
        ModelKind::Turnstile => {
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected `alpha i j`, found {} fields", fields.len()),
                });
            }
            let alpha = parse_alpha(fields[0], line_no)?;
            let i = parse_index(fields[1], line_no)?;
            let j = parse_index(fields[2], line_no)?;
            check_index("row", i, model.n)
                .and_then(|_| check_index("column", j, model.p))
                .map_err(|e| at_line(e, line_no))?;
            Ok(StreamUpdate { alpha, i, j })
        }
        _ => {
            if fields.len() != 1 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected a single value, found {} fields", fields.len()),
                });
            }
            let alpha = parse_alpha(fields[0], line_no)?;
            let (i, j) = model.entry_at(position).map_err(|e| at_line(e, line_no))?;
            Ok(StreamUpdate { alpha, i, j })
        }
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

fn is_skipped(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Parses a header line `<ts|rps|cps> <n> <p>`.
pub fn parse_header(line: &str, line_no: usize) -> Result<StreamModel> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: line_no,
            message: "header must be `<ts|rps|cps> <n> <p>`".into(),
        });
    }
    let kind = fields[0].parse::<ModelKind>().map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let n = parse_index(fields[1], line_no)?;
    let p = parse_index(fields[2], line_no)?;
    StreamModel::new(kind, n, p).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Incremental reader over a stream file.
pub struct StreamReader<R> {
    input: R,
    model: StreamModel,
    line_no: usize,
    position: usize,
    buf: String,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut buf = String::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if input.read_line(&mut buf)? == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "missing stream header".into(),
                });
            }
            line_no += 1;
            if !is_skipped(&buf) {
                break;
            }
        }
        let model = parse_header(&buf, line_no)?;
        Ok(Self {
            input,
            model,
            line_no,
            position: 0,
            buf,
        })
    }

    pub fn model(&self) -> StreamModel {
        self.model
    }

    /// Records consumed so far.
    pub fn position(&self) -> usize {
        self.position
    }

    /// Checks that a permutation stream delivered exactly `n * p` records.
    pub fn check_complete(&self) -> Result<()> {
        match self.model.expected_len() {
            Some(m) if self.position != m => Err(Error::Parse {
                line: self.line_no,
                message: format!(
                    "{} stream ended after {} of {} records",
                    self.model.kind, self.position, m
                ),
            }),
            _ => Ok(()),
        }
    }

    fn next_update(&mut self) -> Result<Option<StreamUpdate>> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            if is_skipped(&self.buf) {
                continue;
            }
            let u = parse_update(&self.buf, &self.model, self.position, self.line_no)?;
            self.position += 1;
            return Ok(Some(u));
        }
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<StreamUpdate>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_update().transpose()
    }
}

/// Dense row-major matrix. Only the oracle and the tests materialise one.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn apply_update(&mut self, u: &StreamUpdate) -> Result<()> {
        check_index("row", u.i, self.rows)?;
        check_index("column", u.j, self.cols)?;
        self.data[u.i * self.cols + u.j] += u.alpha;
        Ok(())
    }

    /// Replays a stream file into a fresh matrix.
    pub fn from_stream<R: BufRead>(reader: StreamReader<R>) -> Result<Self> {
        let model = reader.model();
        let mut m = Self::zeros(model.n, model.p);
        let mut reader = reader;
        for u in reader.by_ref() {
            m.apply_update(&u?)?;
        }
        reader.check_complete()?;
        Ok(m)
    }

    /// Updates that rebuild this matrix under the given model. Turnstile
    /// output lists every entry once in row-major order.
    pub fn to_updates(&self, kind: ModelKind) -> Vec<StreamUpdate> {
        let mut out = Vec::with_capacity(self.data.len());
        match kind {
            ModelKind::RowPermutation | ModelKind::Turnstile => {
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        out.push(StreamUpdate::new(self.get(i, j), i, j));
                    }
                }
            }
            ModelKind::ColumnPermutation => {
                for j in 0..self.cols {
                    for i in 0..self.rows {
                        out.push(StreamUpdate::new(self.get(i, j), i, j));
                    }
                }
            }
        }
        out
    }

    /// Writes this matrix as a stream file under `kind`.
    pub fn write_stream<W: Write>(&self, kind: ModelKind, out: W) -> Result<()> {
        let model = StreamModel::new(kind, self.rows, self.cols)?;
        write_stream(&model, &self.to_updates(kind), out)
    }
}

/// Writes `updates` as a stream file. Permutation models must list the
/// updates in positional order.
pub fn write_stream<W: Write>(model: &StreamModel, updates: &[StreamUpdate], mut out: W) -> Result<()> {
    writeln!(out, "{}", model.header())?;
    for (q, u) in updates.iter().enumerate() {
        match model.kind {
            ModelKind::Turnstile => writeln!(out, "{} {} {}", u.alpha, u.i, u.j)?,
            _ => {
                if model.entry_at(q)? != (u.i, u.j) {
                    return Err(Error::Parameter(format!(
                        "update {q} is out of positional order for a {} stream",
                        model.kind
                    )));
                }
                writeln!(out, "{}", u.alpha)?
            }
        }
    }
    out.flush()?;
    Ok(())
}
