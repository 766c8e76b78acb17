//! Quintic point-to-point references and the chained training reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuinticSpec {
    pub distance: f64,
    pub duration: f64,
    pub start_position: f64,
    #[serde(default)]
    pub dwell_after: f64,
}

fn whole_samples(seconds: f64, ts: f64, what: &str) -> Result<usize> {
    let n = seconds / ts;
    let k = n.round();
    if !(n.is_finite() && k >= 0.0) || (n - k).abs() > 1e-9 * k.max(1.0) {
        return Err(Error::Config(format!("{what} {seconds} s is not a whole number of {ts} s samples")));
    }
    Ok(k as usize)
}

impl QuinticSpec {
    /// `(motion samples, dwell samples)`; the motion part includes both endpoints.
    pub fn sample_counts(&self, ts: f64) -> Result<(usize, usize)> {
        let n = whole_samples(self.duration, ts, "duration")?;
        if n < 2 {
            return Err(Error::Config(format!("duration {} s is shorter than two samples", self.duration)));
        }
        Ok((n + 1, whole_samples(self.dwell_after, ts, "dwell")?))
    }

    pub fn len(&self, ts: f64) -> Result<usize> {
        self.sample_counts(ts).map(|(a, b)| a + b)
    }

    pub fn end_position(&self) -> f64 {
        self.start_position + self.distance
    }

    /// Peak `|d^2 r / dt^2|`, reached at `s = 1/2 -+ 1/(2 sqrt 3)`.
    pub fn peak_acceleration(&self) -> f64 {
        10.0 / 3f64.sqrt() * self.distance.abs() / (self.duration * self.duration)
    }

    pub fn rebased(&self, start_position: f64) -> Self {
        QuinticSpec { start_position, ..*self }
    }
}

/// `start + d (10 s^3 - 15 s^4 + 6 s^5)`, followed by the dwell.
pub fn quintic(spec: &QuinticSpec, ts: f64) -> Result<Vec<f64>> {
    let (n_move, n_dwell) = spec.sample_counts(ts)?;
    let steps = (n_move - 1) as f64;
    let mut r: Vec<f64> = (0..n_move)
        .map(|k| {
            let s = k as f64 / steps;
            spec.start_position + spec.distance * s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
        })
        .collect();
    r.resize(n_move + n_dwell, spec.end_position());
    Ok(r)
}

/// Concatenates segments that must already join in position.
pub fn concat_segments(segments: &[QuinticSpec], ts: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            let prev = segments[i - 1].end_position();
            let tol = 1e-12 * prev.abs().max(seg.start_position.abs()).max(1.0);
            if (seg.start_position - prev).abs() > tol {
                return Err(Error::Config(format!(
                    "segment {i} starts at {} but the previous one ends at {prev}",
                    seg.start_position
                )));
            }
        }
        out.extend(quintic(seg, ts)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSegment {
    pub name: String,
    #[serde(flatten)]
    pub spec: QuinticSpec,
}

/// Benchmark references, the order in which they are chained into the
/// training reference, and which one each trial uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSet {
    pub segments: Vec<NamedSegment>,
    pub training: Vec<String>,
    pub schedule: Vec<String>,
}

impl ReferenceSet {
    pub fn segment(&self, name: &str) -> Result<&NamedSegment> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("unknown reference '{name}'")))
    }

    /// Training segments with start positions chained end to end, beginning
    /// at the first segment's own start.
    pub fn training_segments(&self) -> Result<Vec<QuinticSpec>> {
        let mut out: Vec<QuinticSpec> = Vec::with_capacity(self.training.len());
        for name in &self.training {
            let spec = self.segment(name)?.spec;
            let start = out.last().map_or(spec.start_position, |p| p.end_position());
            out.push(spec.rebased(start));
        }
        if out.is_empty() {
            return Err(Error::Config("training reference has no segments".into()));
        }
        Ok(out)
    }

    pub fn trial_reference(&self, trial: usize, ts: f64) -> Result<(String, Vec<f64>)> {
        let name = self
            .schedule
            .get(trial)
            .ok_or_else(|| Error::Config(format!("schedule has no trial {trial}")))?;
        Ok((name.clone(), quintic(&self.segment(name)?.spec, ts)?))
    }

    /// Motion distance of the first scheduled reference, used to normalize errors.
    pub fn normalization_distance(&self) -> Result<f64> {
        let name = self
            .schedule
            .first()
            .ok_or_else(|| Error::Config("empty schedule".into()))?;
        Ok(self.segment(name)?.spec.distance.abs())
    }

    /// Trials at which the scheduled reference differs from the previous one.
    pub fn task_changes(&self) -> Vec<usize> {
        (1..self.schedule.len())
            .filter(|&k| self.schedule[k] != self.schedule[k - 1])
            .collect()
    }
}

pub fn concat_references(set: &ReferenceSet, ts: f64) -> Result<Vec<f64>> {
    concat_segments(&set.training_segments()?, ts)
}

/// Peak `|Δ²r| / ts²` of a sampled signal.
pub fn peak_sampled_acceleration(r: &[f64], ts: f64) -> f64 {
    r.windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max)
        / (ts * ts)
}
