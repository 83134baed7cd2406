//! Monotone piecewise-linear calibration maps and the post-processing used
//! to build them from per-bin estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::bin_center;

/// A map `[0,1] -> [0,1]` given by knots `(input, output)` that start at
/// `(0,0)`, end at `(1,1)`, have strictly increasing inputs and
/// non-decreasing outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CalibrationMap {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for CalibrationMap {
    type Error = Error;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(knots)
    }
}

impl From<CalibrationMap> for Vec<(f64, f64)> {
    fn from(map: CalibrationMap) -> Self {
        map.knots
    }
}

impl CalibrationMap {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidInput("calibration map needs at least two knots".into()));
        }
        if knots[0] != (0.0, 0.0) || knots[knots.len() - 1] != (1.0, 1.0) {
            return Err(Error::InvalidInput("calibration map must start at (0,0) and end at (1,1)".into()));
        }
        for w in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1 > x0) {
                return Err(Error::InvalidInput(format!("knot inputs not strictly increasing at {x1}")));
            }
            if !(y1 >= y0) {
                return Err(Error::InvalidInput(format!("knot outputs decrease at input {x1}")));
            }
        }
        Ok(Self { knots })
    }

    pub fn identity() -> Self {
        Self { knots: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    /// Map with knots `(0,0), (c_1, v_1), …, (c_b, v_b), (1,1)` where `c_i`
    /// are the centers of `values.len()` equal-width bins.
    pub fn from_bin_values(values: &[f64]) -> Result<Self> {
        let b = values.len();
        let mut knots = Vec::with_capacity(b + 2);
        knots.push((0.0, 0.0));
        knots.extend(values.iter().enumerate().map(|(i, &v)| (bin_center(i, b), v)));
        knots.push((1.0, 1.0));
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn interpolate(&self, y: f64) -> f64 {
        interpolate(self, y)
    }
}

/// Linear interpolation between the knots surrounding `y_raw`.
pub fn interpolate(map: &CalibrationMap, y_raw: f64) -> f64 {
    let y = y_raw.clamp(0.0, 1.0);
    let knots = &map.knots;
    // first knot with input >= y
    let j = knots.partition_point(|&(x, _)| x < y);
    if j == 0 {
        return knots[0].1;
    }
    let (x1, v1) = knots[j];
    if x1 == y {
        return v1;
    }
    let (x0, v0) = knots[j - 1];
    let w = (y - x0) / (x1 - x0);
    (v0 + w * (v1 - v0)).clamp(v0, v1)
}

/// `out[i] = max(out[i-1], values[i])`.
pub fn enforce_monotone(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let prev = out.last().copied().unwrap_or(f64::NEG_INFINITY);
        out.push(prev.max(v));
    }
    out
}

/// Window-1 moving average over the sequence padded with 0 on the left and
/// 1 on the right.
pub fn smooth_window1(values: &[f64]) -> Vec<f64> {
    let b = values.len();
    let at = |i: isize| -> f64 {
        if i < 0 {
            0.0
        } else if i as usize >= b {
            1.0
        } else {
            values[i as usize]
        }
    };
    (0..b as isize).map(|i| (at(i - 1) + at(i) + at(i + 1)) / 3.0).collect()
}

/// Clip to `[0,1]`, enforce monotonicity, smooth, and build the map.
pub fn postprocess_to_map(raw: &[f64]) -> Result<CalibrationMap> {
    if raw.is_empty() {
        return Err(Error::Empty("bin values"));
    }
    let clipped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let smoothed = smooth_window1(&enforce_monotone(&clipped));
    CalibrationMap::from_bin_values(&smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_rule() {
        assert_eq!(enforce_monotone(&[0.2, 0.1, 0.4]), vec![0.2, 0.2, 0.4]);
        assert_eq!(enforce_monotone(&[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
        assert_eq!(enforce_monotone(&[0.9, 0.1, 0.1]), vec![0.9, 0.9, 0.9]);
    }

    #[test]
    fn smoothing_pads_with_zero_and_one() {
        assert_eq!(smooth_window1(&[0.5]), vec![0.5]);
        let s = smooth_window1(&[0.3, 0.6]);
        assert!((s[0] - 0.3).abs() < 1e-15);
        assert!((s[1] - 1.9 / 3.0).abs() < 1e-15);
        let c = smooth_window1(&[0.4; 6]);
        for v in &c[1..5] {
            assert!((v - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_cases() {
        let id = CalibrationMap::identity();
        assert!((id.interpolate(0.37) - 0.37).abs() < 1e-15);
        let m = CalibrationMap::new(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)]).unwrap();
        assert!((m.interpolate(0.25) - 0.1).abs() < 1e-15);
        assert_eq!(m.interpolate(0.5), 0.2);
        assert_eq!(m.interpolate(0.0), 0.0);
        assert_eq!(m.interpolate(1.0), 1.0);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(CalibrationMap::new(vec![(0.0, 0.0), (0.5, 0.6), (0.5, 0.7), (1.0, 1.0)]).is_err());
        assert!(CalibrationMap::new(vec![(0.0, 0.0), (0.5, 0.6), (0.7, 0.5), (1.0, 1.0)]).is_err());
        assert!(CalibrationMap::new(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn serde_validates_knots() {
        let m = CalibrationMap::new(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<CalibrationMap>(&json).unwrap(), m);
        assert!(serde_json::from_str::<CalibrationMap>("[[0.0,0.0],[0.5,0.9],[0.6,0.1],[1.0,1.0]]").is_err());
    }

    fn arb_map() -> impl Strategy<Value = CalibrationMap> {
        prop::collection::vec(0.0f64..=1.0, 1..12).prop_map(|raw| postprocess_to_map(&raw).unwrap())
    }

    proptest! {
        #[test]
        fn map_is_monotone(m in arb_map(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.interpolate(lo) <= m.interpolate(hi));
        }

        #[test]
        fn monotone_is_idempotent(v in prop::collection::vec(-2.0f64..2.0, 1..30)) {
            let once = enforce_monotone(&v);
            prop_assert_eq!(enforce_monotone(&once), once);
        }
    }
}
