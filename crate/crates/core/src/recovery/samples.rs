use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bases::UnivariateBasis;
use crate::error::{Error, Result};
use crate::tensor::{BasisValues, TensorTrain};

/// Point samples `(y^i, u(y^i), w(y^i))` with `y^i ∈ R^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    order: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let order = points.first().map_or(0, Vec::len);
        if order == 0 {
            return Err(Error::InvalidArgument("sample set needs at least one point of positive dimension".into()));
        }
        if let Some(i) = points.iter().position(|p| p.len() != order) {
            return Err(Error::DimensionMismatch(format!(
                "point {i} has {} coordinates, expected {order}",
                points[i].len()
            )));
        }
        let n = points.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if values.len() != n || weights.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} points, {} values, {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("sample weights must be finite and non-negative".into()));
        }
        if points.iter().flatten().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("samples contain NaN/Inf".into()));
        }
        Ok(Self { order, points: points.concat(), values, weights })
    }

    /// Samples of `f` at the given points with unit weights.
    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = points.iter().map(|p| f(p)).collect();
        Self::new(points, values, None)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parameter dimension `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.order..(i + 1) * self.order]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            order: self.order,
            points: rows.iter().flat_map(|&i| self.point(i).iter().copied()).collect(),
            values: rows.iter().map(|&i| self.values[i]).collect(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Seeded split into `(train, validation)` with `round(fraction * n)` validation
    /// samples.
    pub fn split(&self, fraction: f64, seed: u64) -> (Self, Self) {
        let n = self.len();
        let n_val = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (val, train) = perm.split_at(n_val);
        let (mut train, mut val) = (train.to_vec(), val.to_vec());
        train.sort_unstable();
        val.sort_unstable();
        (self.subset(&train), self.subset(&val))
    }

    pub fn basis_values(&self, basis: &UnivariateBasis) -> Result<BasisValues> {
        let modes = (0..self.order)
            .map(|k| {
                let xs: Vec<f64> = (0..self.len()).map(|i| self.point(i)[k]).collect();
                basis.evaluate_points(&xs)
            })
            .collect();
        BasisValues::new(modes)
    }

    /// `sqrt(Σ w_i |u_i - v(y^i)|² / Σ w_i |u_i|²)`; the absolute error when `u = 0`.
    pub fn relative_error(&self, predictions: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((&u, &v), &w) in self.values.iter().zip(predictions).zip(&self.weights) {
            num += w * (u - v).powi(2);
            den += w * u * u;
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            (num / self.len().max(1) as f64).sqrt()
        }
    }

    /// Relative error of a coefficient train in `basis` on these samples.
    pub fn relative_error_of(&self, tt: &TensorTrain, basis: &UnivariateBasis) -> Result<f64> {
        Ok(self.relative_error(&self.basis_values(basis)?.evaluate(tt)?))
    }

    /// Reads the CSV schema `y_1, ..., y_M, u[, w]` with a header row. Lines starting
    /// with `#` are skipped. Errors carry 1-based line numbers of the input.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        let header_line = header.position().map_or(1, |p| p.line() as usize);
        let cols: Vec<&str> = header.iter().collect();
        let order = cols.iter().take_while(|c| c.starts_with("y_")).count();
        for (k, c) in cols[..order].iter().enumerate() {
            if *c != format!("y_{}", k + 1) {
                return Err(Error::Parse {
                    line: header_line,
                    message: format!("expected column y_{}, found {c}", k + 1),
                });
            }
        }
        let has_w = match &cols[order..] {
            ["u"] => false,
            ["u", "w"] => true,
            rest => {
                return Err(Error::Parse {
                    line: header_line,
                    message: format!("expected columns y_1..y_M, u[, w]; trailing columns {rest:?}"),
                })
            }
        };
        if order == 0 {
            return Err(Error::Parse { line: header_line, message: "no y_k columns".into() });
        }
        let width = order + 1 + usize::from(has_w);
        let (mut points, mut values, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::Parse { line, message: e.to_string() }
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != width {
                return Err(Error::Parse { line, message: format!("{} fields, expected {width}", rec.len()) });
            }
            let nums = rec
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("non-numeric or non-finite field in {:?}", rec.iter().collect::<Vec<_>>()),
                })?;
            if has_w && nums[order + 1] < 0.0 {
                return Err(Error::Parse { line, message: "negative weight".into() });
            }
            points.push(nums[..order].to_vec());
            values.push(nums[order]);
            if has_w {
                weights.push(nums[order + 1]);
            }
        }
        if points.is_empty() {
            return Err(Error::Parse { line: header_line + 1, message: "no sample rows".into() });
        }
        Self::new(points, values, has_w.then_some(weights))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the CSV schema read by [`SampleSet::read_csv`], with the weight column
    /// only when some weight differs from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_w = self.weights.iter().any(|&w| w != 1.0);
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.order).map(|k| format!("y_{k}")).collect();
        header.push("u".into());
        if with_w {
            header.push("w".into());
        }
        let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wtr.write_record(&header).map_err(to_io)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(f64::to_string).collect();
            row.push(self.values[i].to_string());
            if with_w {
                row.push(self.weights[i].to_string());
            }
            wtr.write_record(&row).map_err(to_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let s =
            SampleSet::new(vec![vec![0.1, -0.2], vec![0.5, 1.0 / 3.0]], vec![1.5, -2.0], Some(vec![1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("y_1,y_2,u,w\n"));
        assert_eq!(SampleSet::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let text = "y_1,y_2,u\n0.1,0.2,1.0\n0.3,abc,2.0\n";
        match SampleSet::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "y_1,u\n0.1,1.0\n0.2\n";
        assert!(matches!(SampleSet::read_csv(short.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(SampleSet::read_csv("x,u\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        let commented = "# manifest\n# more\ny_1,u\n0.1,1.0\n0.2,x\n";
        assert!(matches!(SampleSet::read_csv(commented.as_bytes()), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let s = SampleSet::from_fn(pts, |p| p[0]).unwrap();
        let (tr, va) = s.split(0.2, 3);
        assert_eq!((tr.len(), va.len()), (40, 10));
        assert_eq!(s.split(0.2, 3), (tr.clone(), va.clone()));
        let mut all: Vec<f64> = tr.values().iter().chain(va.values()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, s.values());
    }

    #[test]
    fn relative_error_is_weighted() {
        let s = SampleSet::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], Some(vec![3.0, 1.0])).unwrap();
        let e = s.relative_error(&[0.0, 1.0]);
        assert!((e - (3.0f64 / 4.0).sqrt()).abs() < 1e-15);
    }
}
