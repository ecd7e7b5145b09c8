//! Measured intensity series: CSV parsing and resampling onto the standard
//! grid.

use crate::error::{Error, Result};
use crate::series::{time_grid, TimeSeries};

/// Raw `(time_seconds, intensity)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRecord {
    pub time: Vec<f64>,
    pub intensity: Vec<f64>,
}

/// Parses a two-column CSV. A non-numeric first line is taken as a header,
/// and lines starting with `#` are ignored.
pub fn parse_intensity_csv(text: &[u8]) -> Result<IntensityRecord> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text);
    let mut rec = IntensityRecord {
        time: Vec::new(),
        intensity: Vec::new(),
    };
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("intensity CSV: {e}")))?;
        if row.len() != 2 {
            return Err(Error::Format(format!(
                "intensity CSV line {}: expected 2 columns, found {}",
                i + 1,
                row.len()
            )));
        }
        let parsed = (row[0].parse::<f64>(), row[1].parse::<f64>());
        let (t, v) = match parsed {
            (Ok(t), Ok(v)) => (t, v),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Format(format!(
                    "intensity CSV line {}: not numeric",
                    i + 1
                )))
            }
        };
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Format(format!(
                "intensity CSV line {}: non-finite value",
                i + 1
            )));
        }
        if rec.time.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::Format(format!(
                "intensity CSV line {}: times must be strictly increasing",
                i + 1
            )));
        }
        rec.time.push(t);
        rec.intensity.push(v);
    }
    if rec.time.len() < 2 {
        return Err(Error::Format(
            "intensity CSV needs at least two samples".into(),
        ));
    }
    Ok(rec)
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` is strictly increasing and
/// `x` lies within its range.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

impl IntensityRecord {
    /// Maps the recorded interval onto t in [0, 1], interpolates linearly at
    /// `n` uniform times and divides by the first sample.
    pub fn resample(&self, n: usize) -> Result<TimeSeries> {
        let (t0, t1) = (self.time[0], self.time[self.time.len() - 1]);
        let span = t1 - t0;
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::Format(
                "intensity CSV covers an empty time interval".into(),
            ));
        }
        let scaled: Vec<f64> = self.time.iter().map(|t| (t - t0) / span).collect();
        let values: Vec<f64> = time_grid(n)
            .into_iter()
            .map(|t| interp(&scaled, &self.intensity, t))
            .collect();
        let first = values[0];
        if first == 0.0 || !first.is_finite() {
            return Err(Error::Format(
                "first intensity sample is zero; cannot normalize".into(),
            ));
        }
        let normalized: Vec<f64> = values.iter().map(|v| v / first).collect();
        if normalized.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(
                "intensity values overflow after normalization".into(),
            ));
        }
        TimeSeries::new(normalized)
    }
}

/// Parses and resamples in one step.
pub fn ingest_intensity(text: &[u8], n: usize) -> Result<TimeSeries> {
    parse_intensity_csv(text)?.resample(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SERIES_LEN;

    #[test]
    fn header_and_comments() {
        let rec =
            parse_intensity_csv(b"time_seconds,intensity\n# note\n0, 2.0\n1.5,1.0\n").unwrap();
        assert_eq!(rec.time, vec![0.0, 1.5]);
        assert_eq!(rec.intensity, vec![2.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            &b""[..],
            b"0,1\n",
            b"0,1\n0,2\n",
            b"0,1\n1,x\n",
            b"0,1,2\n1,1,1\n",
            b"0,1\n1,inf\n",
            b"t,i\nt,i\n1,1\n",
        ] {
            assert!(
                parse_intensity_csv(bad).is_err(),
                "{:?}",
                String::from_utf8_lossy(bad)
            );
        }
        assert!(ingest_intensity(b"0,0\n1,1\n", SERIES_LEN).is_err());
    }

    #[test]
    fn resamples_linear_ramp_exactly() {
        // I(s) = 4 - s on [2, 5] seconds; on the unit grid I = 4 - 2 - 3t
        let csv = b"2,2\n3,1\n5,-1\n";
        let s = ingest_intensity(csv, 7).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            let t = k as f64 / 6.0;
            let expected = (2.0 - 3.0 * t) / 2.0;
            assert!((v - expected).abs() < 1e-14, "{k}: {v} vs {expected}");
        }
    }

    #[test]
    fn constant_input() {
        let s = ingest_intensity(b"0,0.7\n0.1,0.7\n4,0.7\n", SERIES_LEN).unwrap();
        assert_eq!(s.len(), SERIES_LEN);
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    proptest::proptest! {
        #[test]
        fn output_is_normalized_and_bounded(
            pts in proptest::collection::vec((0.01f64..1.0, 0.1f64..3.0), 2..50),
        ) {
            let mut t = 0.0;
            let mut csv = String::new();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (dt, v) in &pts {
                t += dt;
                csv.push_str(&format!("{t},{v}\n"));
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            let s = ingest_intensity(csv.as_bytes(), SERIES_LEN).unwrap();
            let first = pts[0].1;
            proptest::prop_assert_eq!(s.values()[0], 1.0);
            proptest::prop_assert!((s.last() - pts[pts.len() - 1].1 / first).abs() < 1e-12);
            for v in s.values() {
                proptest::prop_assert!(*v >= lo / first - 1e-12 && *v <= hi / first + 1e-12);
            }
        }
    }
}
