//! Datasets, CSV input/output and the train/test split.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Scalar;

/// One observation: a feature vector and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub target: T,
}

/// `n` samples of dimension `d`, stored row-major.
///
/// `target_bound` is the `M` of the target range `[-M, M]`. Unless supplied
/// explicitly it is `max |y|` (or 1 when every target is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    targets: Vec<T>,
    dim: usize,
    target_bound: T,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, targets: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if features.len() != targets.len() * dim {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of dimension {}",
                features.len(),
                targets.len(),
                dim
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature in sample {}",
                i / dim
            )));
        }
        if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target in sample {i}")));
        }
        let target_bound = observed_bound(&targets);
        Ok(Dataset {
            features,
            targets,
            dim,
            target_bound,
        })
    }

    pub fn from_samples(samples: Vec<Sample<T>>) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::invalid("no samples"))?;
        let mut features = Vec::with_capacity(samples.len() * dim);
        let mut targets = Vec::with_capacity(samples.len());
        for (i, s) in samples.into_iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            features.extend(s.features);
            targets.push(s.target);
        }
        Self::new(features, targets, dim)
    }

    /// Replaces the observed bound with a user-supplied `M`.
    pub fn with_target_bound(mut self, bound: T) -> Result<Self> {
        if !(bound > T::zero() && bound.is_finite()) {
            return Err(Error::invalid("target bound must be positive and finite"));
        }
        if self.targets.iter().any(|y| y.abs() > bound) {
            return Err(Error::invalid(format!(
                "target bound {bound} is smaller than max |y| = {}",
                observed_bound(&self.targets)
            )));
        }
        self.target_bound = bound;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target_bound(&self) -> T {
        self.target_bound
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn target(&self, i: usize) -> T {
        self.targets[i]
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn sample(&self, i: usize) -> Sample<T> {
        Sample {
            features: self.row(i).to_vec(),
            target: self.target(i),
        }
    }

    pub fn mean_target(&self) -> Option<T> {
        crate::scalar::mean(self.targets.iter().copied())
    }

    /// Per-dimension minimum and maximum of the features.
    pub fn feature_range(&self) -> Option<(Vec<T>, Vec<T>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = self.row(0).to_vec();
        let mut hi = lo.clone();
        for row in self.rows() {
            for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                *l = l.min(v);
                *h = h.max(v);
            }
        }
        Some((lo, hi))
    }

    /// The rows at `indices`, in that order. The bound is recomputed from
    /// the selected targets.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        let target_bound = observed_bound(&targets);
        Dataset {
            features,
            targets,
            dim: self.dim,
            target_bound,
        }
    }

    /// Writes `x_1,...,x_d,y` rows. Values use the shortest representation
    /// that parses back to the same float.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        if header {
            let mut names: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
            names.push("y".into());
            w.write_record(&names).map_err(csv_err)?;
        }
        for (row, y) in self.rows().zip(&self.targets) {
            let fields = row.iter().chain(std::iter::once(y)).map(|v| v.to_string());
            w.write_record(fields).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::invalid(format!("csv write: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), header)
    }
}

fn observed_bound<T: Scalar>(targets: &[T]) -> T {
    let m = targets.iter().fold(T::zero(), |m, y| m.max(y.abs()));
    if m > T::zero() {
        m
    } else {
        T::one()
    }
}

/// Parses numeric CSV rows. Every row must have the same number of fields;
/// the last field of each row is the target.
pub fn read_csv<T: Scalar, R: Read>(input: R, has_header: bool) -> Result<Dataset<T>> {
    let rows = read_numeric_rows::<T, R>(input, has_header)?;
    let width = match rows.first() {
        Some(r) => r.len(),
        None => return Err(Error::invalid("empty file")),
    };
    if width < 2 {
        return Err(Error::invalid(
            "each row needs at least one feature and a target",
        ));
    }
    let mut features = Vec::with_capacity(rows.len() * (width - 1));
    let mut targets = Vec::with_capacity(rows.len());
    for row in rows {
        features.extend_from_slice(&row[..width - 1]);
        targets.push(row[width - 1]);
    }
    Dataset::new(features, targets, width - 1)
}

/// Parses every row into numbers, checking only that the field count is
/// consistent. Returns no rows for an input with no data lines.
pub fn read_numeric_rows<T: Scalar, R: Read>(input: R, has_header: bool) -> Result<Vec<Vec<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {} fields, found {}", first.len(), record.len()),
                });
            }
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                let v = field.parse::<T>().map_err(|_| Error::Parse {
                    row,
                    message: format!("field {} ({field:?}) is not a number", col + 1),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        row,
                        message: format!("field {} is not finite", col + 1),
                    })
                }
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), has_header)
}

/// Shuffles the rows with `stream` and splits off `test_fraction` of them.
/// The training part has `round((1 - test_fraction) * n)` rows.
pub fn train_test_split<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    stream: &mut RandomStream,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test fraction must lie in (0, 1)"));
    }
    let n = data.len();
    let n_train = ((1.0 - test_fraction) * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "splitting {n} rows with test fraction {test_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(stream);
    let (train, test) = order.split_at(n_train);
    Ok((data.subset(train), data.subset(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: bool) -> Result<Dataset<f64>> {
        read_csv(text.as_bytes(), header)
    }

    #[test]
    fn parses_rows_without_header() {
        let d = parse("0,1\n1,3\n2,5", false).unwrap();
        assert_eq!((d.len(), d.dim(), d.target_bound()), (3, 1, 5.0));
        assert_eq!(d.row(2), &[2.0]);
        assert_eq!(d.targets(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn skips_header() {
        let d = parse("x,y\n0.5,0.2\n", true).unwrap();
        assert_eq!((d.len(), d.dim(), d.target_bound()), (1, 1, 0.2));
    }

    #[test]
    fn reports_bad_row() {
        match parse("0,abc", false) {
            Err(Error::Parse { row: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("0,1\n1,2\n3,4,5", false) {
            Err(Error::Parse { row: 3, message }) => assert!(message.contains("fields")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse("", false), Err(Error::Invalid(_))));
        assert!(matches!(parse("x,y\n", true), Err(Error::Invalid(_))));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(parse("1,inf", false).is_err());
        assert!(Dataset::new(vec![f64::NAN], vec![1.0], 1).is_err());
    }

    #[test]
    fn explicit_bound_must_cover_targets() {
        let d = parse("0,1\n1,-3", false).unwrap();
        assert!(d.clone().with_target_bound(2.0).is_err());
        assert_eq!(d.with_target_bound(4.0).unwrap().target_bound(), 4.0);
    }

    #[test]
    fn split_sizes() {
        let d = Dataset::new((0..10).map(f64::from).collect(), vec![0.0; 10], 1).unwrap();
        let (tr, te) = train_test_split(&d, 0.3, &mut RandomStream::new(1)).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        let mut all: Vec<f64> = tr.rows().chain(te.rows()).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());

        let two = d.subset(&[0, 1]);
        let (a, b) = train_test_split(&two, 0.5, &mut RandomStream::new(1)).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let d = Dataset::new((0..50).map(f64::from).collect(), vec![0.0; 50], 1).unwrap();
        let a = train_test_split(&d, 0.3, &mut RandomStream::new(8)).unwrap();
        let b = train_test_split(&d, 0.3, &mut RandomStream::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_split_is_rejected() {
        let d = Dataset::new(vec![0.0, 1.0, 2.0], vec![0.0; 3], 1).unwrap();
        assert!(train_test_split(&d, 0.01, &mut RandomStream::new(0)).is_err());
        assert!(train_test_split(&d, 1.0, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::new(
            vec![0.1, 1.0 / 3.0, -2.5e-17, 12345.678901234567],
            vec![std::f64::consts::PI, -1e300],
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, true).unwrap();
        let back: Dataset<f64> = read_csv(buf.as_slice(), true).unwrap();
        assert_eq!(back, d);
    }
}
