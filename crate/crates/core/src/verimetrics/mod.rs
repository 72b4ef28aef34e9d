//! FAR/FRR curves, EER and fixed-FAR operating points.
//!
//! Scores are similarities and a pair is accepted iff `score >= threshold`.
//! The curve is the exact step function evaluated at every distinct score,
//! plus one threshold just above the largest score where everything is
//! rejected.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::simeng::ScoreSet;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("empty {0} score list")]
    EmptyScores(&'static str),
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error("FAR target {0} outside (0, 1)")]
    InvalidTarget(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub thresholds: Vec<f64>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EerMethod {
    #[default]
    Interpolated,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub method: EerMethod,
}

fn sorted(scores: &[f64], which: &'static str) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyScores(which));
    }
    if let Some(&v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(v));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

pub fn error_curve(scores: &ScoreSet) -> Result<ErrorCurve> {
    curve_from(&scores.genuine, &scores.impostor)
}

pub fn curve_from(genuine: &[f64], impostor: &[f64]) -> Result<ErrorCurve> {
    let g = sorted(genuine, "genuine")?;
    let i = sorted(impostor, "impostor")?;
    let (ng, ni) = (g.len() as f64, i.len() as f64);
    let mut curve = ErrorCurve {
        thresholds: Vec::new(),
        far: Vec::new(),
        frr: Vec::new(),
    };
    // gi / ii: number of genuine / impostor scores strictly below t
    let (mut gi, mut ii) = (0usize, 0usize);
    loop {
        let t = match (g.get(gi), i.get(ii)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        curve.thresholds.push(t);
        curve.far.push((ni - ii as f64) / ni);
        curve.frr.push(gi as f64 / ng);
        while gi < g.len() && g[gi] <= t {
            gi += 1;
        }
        while ii < i.len() && i[ii] <= t {
            ii += 1;
        }
    }
    let top = *curve.thresholds.last().expect("nonempty");
    curve.thresholds.push(top.next_up());
    curve.far.push(0.0);
    curve.frr.push(1.0);
    Ok(curve)
}

impl ErrorCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// First index where FAR - FRR is no longer positive. The last point has
    /// FAR 0 and FRR 1, so one always exists.
    fn crossing(&self) -> usize {
        (0..self.len())
            .find(|&k| self.far[k] - self.frr[k] <= 0.0)
            .unwrap_or(self.len() - 1)
    }

    /// Writes `threshold,far,frr` rows.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["threshold", "far", "frr"])?;
        for k in 0..self.len() {
            out.write_record([
                self.thresholds[k].to_string(),
                self.far[k].to_string(),
                self.frr[k].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

pub fn eer(curve: &ErrorCurve, method: EerMethod) -> EerResult {
    let k = curve.crossing();
    let d = |k: usize| curve.far[k] - curve.frr[k];
    if d(k) == 0.0 || k == 0 {
        return EerResult {
            eer: curve.far[k],
            threshold: curve.thresholds[k],
            method,
        };
    }
    let (dp, dk) = (d(k - 1), d(k));
    match method {
        EerMethod::Interpolated => {
            let alpha = dp / (dp - dk);
            let lerp = |v: &[f64]| v[k - 1] + alpha * (v[k] - v[k - 1]);
            EerResult {
                eer: lerp(&curve.far),
                threshold: lerp(&curve.thresholds),
                method,
            }
        }
        EerMethod::Midpoint => {
            let j = if dp.abs() <= dk.abs() { k - 1 } else { k };
            EerResult {
                eer: 0.5 * (curve.far[j] + curve.frr[j]),
                threshold: curve.thresholds[j],
                method,
            }
        }
    }
}

/// EER of a score set with the default interpolated method.
pub fn eer_of(scores: &ScoreSet) -> Result<f64> {
    Ok(eer(&error_curve(scores)?, EerMethod::Interpolated).eer)
}

/// FRR at the smallest threshold whose FAR is at most `far_target`. With
/// `interpolate`, FRR is instead read off the segment joining that point to
/// its predecessor, linearly in FAR. The point above all scores has FAR 0, so
/// an unreachable target saturates at FRR 1.
pub fn frr_at_far(curve: &ErrorCurve, far_target: f64, interpolate: bool) -> Result<f64> {
    if !(far_target > 0.0 && far_target < 1.0) {
        return Err(MetricsError::InvalidTarget(far_target));
    }
    let k = (0..curve.len())
        .find(|&k| curve.far[k] <= far_target)
        .unwrap_or(curve.len() - 1);
    if !interpolate || k == 0 || curve.far[k] == far_target {
        return Ok(curve.frr[k]);
    }
    let t = (curve.far[k - 1] - far_target) / (curve.far[k - 1] - curve.far[k]);
    Ok(curve.frr[k - 1] + t * (curve.frr[k] - curve.frr[k - 1]))
}

/// Rate as a percentage with two decimals, the way reports print EER.
pub fn percent(rate: f64) -> String {
    format!("{:.2}", rate * 100.0)
}
