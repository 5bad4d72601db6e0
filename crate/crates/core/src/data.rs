//! Dataset representation, standardization, CSV ingestion and seeded random streams.
//!
//! Every stochastic step in the crate draws from a [`SeedSpec`]: a master seed plus a
//! stream id. Streams are ChaCha20 keyed by the master seed with the stream id used as the
//! ChaCha stream selector, so a given pair always yields the same draws regardless of which
//! thread consumes it or in what order streams are created.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose population standard deviation falls below this are treated as constant.
pub const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// Standardized design matrix and centered response.
///
/// Columns of `x` have mean zero and `(1/n) * sum x_ij^2 = 1`; `y` has mean zero. The
/// stored means and standard deviations map back to the raw scale.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    y_mean: f64,
}

impl Dataset {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Maps the standardized data back to the raw scale.
    pub fn unstandardize(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.column_means[j], self.column_sds[j]);
            col.iter_mut().for_each(|v| *v = *v * s + m);
        }
        let y = self.y.map(|v| v + self.y_mean);
        (x, y)
    }

    /// Re-centers and re-scales the selected rows.
    ///
    /// Unlike [`standardize`], a column that is constant on the selected rows is not an
    /// error: it is zeroed (and its sd recorded as 0) so the solver leaves it out.
    pub fn subsample(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        standardize_impl(x, y, true).expect("lenient standardization does not fail")
    }
}

/// Centers `raw_y` and centers and scales each column of `raw_x` to unit population variance.
pub fn standardize(raw_x: &DMatrix<f64>, raw_y: &DVector<f64>) -> Result<Dataset> {
    if raw_x.nrows() != raw_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} rows but y has length {}",
            raw_x.nrows(),
            raw_y.len()
        )));
    }
    if raw_x.nrows() < 2 || raw_x.ncols() < 1 {
        return Err(Error::DimensionMismatch(format!(
            "need n >= 2 and p >= 1, got {} x {}",
            raw_x.nrows(),
            raw_x.ncols()
        )));
    }
    standardize_impl(raw_x.clone(), raw_y.clone(), false)
}

fn standardize_impl(mut x: DMatrix<f64>, mut y: DVector<f64>, lenient: bool) -> Result<Dataset> {
    let n = x.nrows() as f64;
    let mut column_means = Vec::with_capacity(x.ncols());
    let mut column_sds = Vec::with_capacity(x.ncols());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if !(sd >= CONSTANT_COLUMN_TOL) {
            if lenient {
                col.fill(0.0);
                column_means.push(mean);
                column_sds.push(0.0);
                continue;
            }
            return Err(Error::ConstantColumn(j));
        }
        col.iter_mut().for_each(|v| *v /= sd);
        column_means.push(mean);
        column_sds.push(sd);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    y.iter_mut().for_each(|v| *v -= y_mean);
    Ok(Dataset {
        x,
        y,
        column_means,
        column_sds,
        y_mean,
    })
}

/// Raw predictor matrix and response as read from disk.
#[derive(Debug, Clone)]
pub struct RawData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub predictor_names: Vec<String>,
    pub response_name: String,
}

impl RawData {
    pub fn standardize(&self) -> Result<Dataset> {
        standardize(&self.x, &self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    /// Integers are column indices, anything else is a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.trim().to_string()),
        })
    }
}

/// Reads a comma-delimited numeric file and splits off the response column.
///
/// Error positions are 0-based data-record and column indices (the header is not counted).
pub fn load_csv(
    path: impl AsRef<Path>,
    response: &ResponseColumn,
    has_header: bool,
) -> Result<RawData> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, response, has_header)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    response: &ResponseColumn,
    has_header: bool,
) -> Result<RawData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if has_header {
        let h = rdr
            .headers()
            .map_err(|e| Error::InvalidInput(format!("bad header: {e}")))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("csv record {r}: {e}")))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                row: r,
                expected,
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ParseError {
                        row: r,
                        col: c,
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let width = width.unwrap_or(0);
    let names = header.unwrap_or_else(|| (0..width).map(|c| format!("V{}", c + 1)).collect());
    let resp = match response {
        ResponseColumn::Index(i) if *i < width => *i,
        ResponseColumn::Name(name) => names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingResponseColumn(name.clone()))?,
        ResponseColumn::Index(i) => return Err(Error::MissingResponseColumn(i.to_string())),
    };

    let n = rows.len();
    let p = width - 1;
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][if j < resp { j } else { j + 1 }]);
    let y = DVector::from_iterator(n, rows.iter().map(|r| r[resp]));
    let mut predictor_names = names;
    let response_name = predictor_names.remove(resp);
    Ok(RawData {
        x,
        y,
        predictor_names,
        response_name,
    })
}

/// Identifies one logical random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Same master seed, different stream.
    pub fn with_stream(self, stream_id: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id,
        }
    }

    /// Deterministic sub-stream `k` of this stream, for fan-out into independent tasks.
    pub fn child(self, k: u64) -> Self {
        self.with_stream(splitmix64(splitmix64(self.stream_id) ^ k))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub type RngStream = ChaCha20Rng;

pub fn rng_stream(spec: SeedSpec) -> RngStream {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(spec.stream_id);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn standardizes_hand_example() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let d = standardize(&x, &y).unwrap();
        let s = 1.5f64.sqrt();
        for (got, want) in d.x().iter().zip([-s, 0.0, s]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(d.y().iter().all(|v| *v == 0.0));
        assert_eq!(d.column_means(), &[2.0]);
        assert!((d.column_sds()[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_column_rejected() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 4.0, 5.0, 5.0, 5.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(standardize(&x, &y), Err(Error::ConstantColumn(1))));
    }

    #[test]
    fn dimension_mismatch() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            standardize(&x, &y),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn subsample_zeroes_locally_constant_columns() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 1.0, 2.0, 3.0, 0.5, 1.0, 2.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let d = standardize(&x, &y).unwrap();
        let s = d.subsample(&[0, 1]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.column_sds()[0], 0.0);
        assert!(s.x().column(0).iter().all(|v| *v == 0.0));
        assert!((s.x().column(1).norm_squared() / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_splits_named_response() {
        let text = "a,b,y\n1,2,3\n4,5,6\n7,8,10\n";
        let raw = read_csv(text.as_bytes(), &ResponseColumn::Name("y".into()), true).unwrap();
        assert_eq!(raw.x.shape(), (3, 2));
        assert_eq!(raw.y.as_slice(), &[3.0, 6.0, 10.0]);
        assert_eq!(raw.predictor_names, vec!["a", "b"]);
        assert_eq!(raw.x[(2, 1)], 8.0);
    }

    #[test]
    fn csv_response_index_in_middle_and_no_header() {
        let text = "1,2,3\n4,5,6\n";
        let raw = read_csv(text.as_bytes(), &ResponseColumn::Index(1), false).unwrap();
        assert_eq!(raw.y.as_slice(), &[2.0, 5.0]);
        assert_eq!(
            raw.x.row(1).iter().copied().collect::<Vec<_>>(),
            vec![4.0, 6.0]
        );
        assert_eq!(raw.predictor_names, vec!["V1", "V3"]);
    }

    #[test]
    fn csv_errors() {
        let text = "a,b,y\n1,2,3\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &ResponseColumn::Index(3), true),
            Err(Error::MissingResponseColumn(_))
        ));
        assert!(matches!(
            read_csv(text.as_bytes(), &ResponseColumn::Name("z".into()), true),
            Err(Error::MissingResponseColumn(_))
        ));
        let na = "a,b,y\n1,2,3\n4,NA,6\n";
        match read_csv(na.as_bytes(), &ResponseColumn::Name("y".into()), true) {
            Err(Error::ParseError { row, col, value }) => {
                assert_eq!((row, col), (1, 1));
                assert_eq!(value, "NA");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = "a,b,y\n1,2,3\n4,5\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), &ResponseColumn::Name("y".into()), true),
            Err(Error::RaggedRows {
                row: 1,
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn response_column_from_str() {
        assert_eq!(
            "3".parse::<ResponseColumn>().unwrap(),
            ResponseColumn::Index(3)
        );
        assert_eq!(
            "y".parse::<ResponseColumn>().unwrap(),
            ResponseColumn::Name("y".into())
        );
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let draws = |s: SeedSpec| -> Vec<u64> {
            let mut rng = rng_stream(s);
            (0..1000).map(|_| rng.random()).collect()
        };
        let a = draws(SeedSpec::new(42, 0));
        assert_eq!(a, draws(SeedSpec::new(42, 0)));
        assert_ne!(a, draws(SeedSpec::new(42, 1)));
        assert_ne!(a, draws(SeedSpec::new(43, 0)));
    }

    #[test]
    fn streams_ignore_thread_count() {
        let serial: Vec<f64> = {
            let mut rng = rng_stream(SeedSpec::new(42, 0));
            (0..1000).map(|_| rng.random()).collect()
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let parallel: Vec<Vec<f64>> = pool.install(|| {
            use rayon::prelude::*;
            (0..8)
                .into_par_iter()
                .map(|_| {
                    let mut rng = rng_stream(SeedSpec::new(42, 0));
                    (0..1000).map(|_| rng.random()).collect()
                })
                .collect()
        });
        assert!(parallel.iter().all(|v| *v == serial));
    }
}
