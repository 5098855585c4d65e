//! Uniformly sampled mean trajectories and their CSV persistence.
//!
//! The canonical interchange format is CSV with header `t,m1,m2` or
//! `t,m1,m2,v1,v2`, one row per sample, LF line endings, and every real
//! printed with 17 significant digits so that a write/read round trip is
//! lossless at full binary precision.

use crate::{Error, Result};
use std::io::Write as _;
use std::path::Path;

/// A uniformly sampled time series of the two population means, optionally
/// with the two variances (moment-closure output).
///
/// Sample `i` corresponds to time `t0 + i * dt_sample`. All stored sequences
/// have identical length.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    pub t0: f64,
    pub dt_sample: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub v1: Option<Vec<f64>>,
    pub v2: Option<Vec<f64>>,
}

impl MeanTrajectory {
    pub fn new(t0: f64, dt_sample: f64) -> Self {
        MeanTrajectory {
            t0,
            dt_sample,
            m1: Vec::new(),
            m2: Vec::new(),
            v1: None,
            v2: None,
        }
    }

    pub fn with_variances(t0: f64, dt_sample: f64) -> Self {
        MeanTrajectory {
            t0,
            dt_sample,
            m1: Vec::new(),
            m2: Vec::new(),
            v1: Some(Vec::new()),
            v2: Some(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }

    /// Time of sample `i`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt_sample
    }

    pub fn has_variances(&self) -> bool {
        self.v1.is_some()
    }

    pub fn push(&mut self, m1: f64, m2: f64) {
        debug_assert!(
            self.v1.is_none(),
            "trajectory carries variances, use push_with_v"
        );
        self.m1.push(m1);
        self.m2.push(m2);
    }

    pub fn push_with_v(&mut self, m1: f64, m2: f64, v1: f64, v2: f64) {
        self.m1.push(m1);
        self.m2.push(m2);
        self.v1
            .as_mut()
            .expect("trajectory built without variances")
            .push(v1);
        self.v2
            .as_mut()
            .expect("trajectory built without variances")
            .push(v2);
    }

    /// Check the structural invariants (equal lengths, positive sampling
    /// interval, variances present pairwise).
    pub fn validate(&self) -> Result<()> {
        if !self.dt_sample.is_finite() || self.dt_sample <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "dt_sample must be positive, got {}",
                self.dt_sample
            )));
        }
        if self.m1.len() != self.m2.len() {
            return Err(Error::InvalidParams(format!(
                "m1/m2 length mismatch: {} vs {}",
                self.m1.len(),
                self.m2.len()
            )));
        }
        match (&self.v1, &self.v2) {
            (None, None) => {}
            (Some(v1), Some(v2)) => {
                if v1.len() != self.m1.len() || v2.len() != self.m1.len() {
                    return Err(Error::InvalidParams(
                        "variance columns must match mean columns in length".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidParams(
                    "variance columns must be present for both populations or neither".into(),
                ))
            }
        }
        Ok(())
    }

    /// Serialize to the canonical CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        let with_v = self.has_variances();
        out.push_str(if with_v {
            "t,m1,m2,v1,v2\n"
        } else {
            "t,m1,m2\n"
        });
        for i in 0..self.len() {
            use std::fmt::Write as _;
            write!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.time(i),
                self.m1[i],
                self.m2[i]
            )
            .unwrap();
            if with_v {
                write!(
                    out,
                    ",{:.16e},{:.16e}",
                    self.v1.as_ref().unwrap()[i],
                    self.v2.as_ref().unwrap()[i]
                )
                .unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Write the CSV representation to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Parse the canonical CSV format. `origin` names the source in errors.
    ///
    /// A header-only file yields an empty trajectory with `t0 = 0`,
    /// `dt_sample = 1` (the time grid of an empty series is unobservable).
    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            path: origin.into(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("empty file".into()))?
            .trim();
        let with_v = match header {
            "t,m1,m2" => false,
            "t,m1,m2,v1,v2" => true,
            _ => return Err(parse_err(format!("malformed header {header:?}"))),
        };
        let ncols = if with_v { 5 } else { 3 };
        let mut times = Vec::new();
        let mut traj = if with_v {
            MeanTrajectory::with_variances(0.0, 1.0)
        } else {
            MeanTrajectory::new(0.0, 1.0)
        };
        for (lineno, raw) in lines.enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut cells = [0.0f64; 5];
            let mut count = 0;
            for cell in line.split(',') {
                if count == ncols {
                    count += 1; // too many columns
                    break;
                }
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("row {}: invalid real {cell:?}", lineno + 2)))?;
                if !v.is_finite() {
                    return Err(parse_err(format!(
                        "row {}: non-finite value {v}",
                        lineno + 2
                    )));
                }
                cells[count] = v;
                count += 1;
            }
            if count != ncols {
                return Err(parse_err(format!(
                    "row {}: expected {ncols} columns, found {count}",
                    lineno + 2
                )));
            }
            times.push(cells[0]);
            if with_v {
                traj.push_with_v(cells[1], cells[2], cells[3], cells[4]);
            } else {
                traj.push(cells[1], cells[2]);
            }
        }
        if let Some(&t0) = times.first() {
            traj.t0 = t0;
            if times.len() >= 2 {
                traj.dt_sample = times[1] - t0;
            }
            if traj.dt_sample <= 0.0 {
                return Err(parse_err("time column is not strictly increasing".into()));
            }
            for (i, &t) in times.iter().enumerate() {
                let expect = t0 + i as f64 * traj.dt_sample;
                if (t - expect).abs() > 1e-9 * t.abs().max(1.0) {
                    return Err(parse_err(format!(
                        "row {}: non-uniform time sample {t} (expected {expect})",
                        i + 2
                    )));
                }
            }
        }
        traj.validate()?;
        Ok(traj)
    }

    /// Read a trajectory from a CSV file.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_traj() -> MeanTrajectory {
        let mut t = MeanTrajectory::new(0.0, 0.1);
        t.push(0.8, 0.8);
        t.push(0.8123456789012346, -0.25);
        t.push(1.0 / 3.0, 2f64.powi(-30));
        t
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample_traj();
        let back = MeanTrajectory::from_csv_str(&t.to_csv_string(), "<mem>").unwrap();
        assert_eq!(back.t0.to_bits(), t.t0.to_bits());
        assert_eq!(back.dt_sample.to_bits(), t.dt_sample.to_bits());
        for i in 0..t.len() {
            assert_eq!(back.m1[i].to_bits(), t.m1[i].to_bits());
            assert_eq!(back.m2[i].to_bits(), t.m2[i].to_bits());
        }
    }

    #[test]
    fn round_trip_with_variances() {
        let mut t = MeanTrajectory::with_variances(0.0, 0.001);
        t.push_with_v(0.8, 0.7, 0.01, 0.020000000000000004);
        t.push_with_v(-0.1, 0.3, 1e-17, 4.0 / 3.0);
        let back = MeanTrajectory::from_csv_str(&t.to_csv_string(), "<mem>").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_trajectory_writes_header_only() {
        let t = MeanTrajectory::new(0.0, 0.1);
        assert_eq!(t.to_csv_string(), "t,m1,m2\n");
        let back = MeanTrajectory::from_csv_str("t,m1,m2\n", "<mem>").unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn nonzero_t0_round_trips_within_one_ulp() {
        let mut t = MeanTrajectory::new(100.0, 0.005);
        for i in 0..50 {
            t.push(i as f64, -(i as f64));
        }
        let back = MeanTrajectory::from_csv_str(&t.to_csv_string(), "<mem>").unwrap();
        assert_eq!(back.t0, 100.0);
        // dt is recovered as t(1) - t(0); the written times are exact, so the
        // recovery error is the rounding of 100.0 + 0.005, about one ulp of t0.
        assert!((back.dt_sample - 0.005).abs() <= 4.0 * f64::EPSILON * 100.0);
        assert_eq!(back.m1, t.m1);
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let text = "t,m1,m2\n0.0,1.0\n";
        assert!(matches!(
            MeanTrajectory::from_csv_str(text, "<mem>"),
            Err(Error::Parse { .. })
        ));
        let text = "t,m1,m2\n0.0,1.0,2.0,3.0\n";
        assert!(matches!(
            MeanTrajectory::from_csv_str(text, "<mem>"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(matches!(
            MeanTrajectory::from_csv_str("time,mean1,mean2\n", "<mem>"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let text = "t,m1,m2\n0.0,inf,0.0\n";
        assert!(matches!(
            MeanTrajectory::from_csv_str(text, "<mem>"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn non_uniform_time_column_is_rejected() {
        let text = "t,m1,m2\n0.0,0.0,0.0\n1.0,0.0,0.0\n2.5,0.0,0.0\n";
        assert!(matches!(
            MeanTrajectory::from_csv_str(text, "<mem>"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn output_uses_lf_and_full_precision() {
        let s = sample_traj().to_csv_string();
        assert!(!s.contains('\r'), "CSV must use LF endings");
        // 0.1-step times must carry all 17 significant digits.
        assert!(s.contains("1.0000000000000001e-1"), "got {s}");
    }

    #[test]
    fn validate_rejects_length_mismatch() {
        let mut t = sample_traj();
        t.m2.pop();
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn random_round_trips_are_exact(
            values in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 2..50),
            dt in 1e-6f64..10.0,
        ) {
            let mut t = MeanTrajectory::new(0.0, dt);
            for (a, b) in &values {
                t.push(*a, *b);
            }
            let back = MeanTrajectory::from_csv_str(&t.to_csv_string(), "<mem>").unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
