//! JSON shapes for drivers and partition problems.

use serde::{Deserialize, Serialize};

use super::{slit_drift, Anchor, Driver, Orientation, PartitionWeldingProblem, Segment};
use crate::error::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSpec {
    pub horizon: f64,
    #[serde(default)]
    pub orientation: Orientation,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SegmentSpec {
    Constant {
        duration: f64,
        value: f64,
    },
    Linear {
        duration: f64,
        start: f64,
        end: f64,
    },
    /// Either `coeff` or `alpha` (slit angle απ) must be given.
    Sqrt {
        duration: f64,
        #[serde(default)]
        start: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeff: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default)]
        anchor: Anchor,
    },
    /// `[t, value]` pairs in segment-local time; shifted to start at 0.
    Sampled {
        points: Vec<[f64; 2]>,
    },
}

impl From<Driver> for DriverSpec {
    fn from(d: Driver) -> Self {
        let segments = d
            .segments
            .iter()
            .map(|s| match s {
                Segment::Constant { value, duration } => {
                    SegmentSpec::Constant { duration: *duration, value: *value }
                }
                Segment::Linear { start, end, duration } => {
                    SegmentSpec::Linear { duration: *duration, start: *start, end: *end }
                }
                Segment::SqrtCap { start, coeff, duration, anchor } => SegmentSpec::Sqrt {
                    duration: *duration,
                    start: *start,
                    coeff: Some(*coeff),
                    alpha: None,
                    anchor: *anchor,
                },
                Segment::Sampled { points } => {
                    SegmentSpec::Sampled { points: points.iter().map(|&(t, v)| [t, v]).collect() }
                }
            })
            .collect();
        DriverSpec { horizon: d.horizon, orientation: d.orientation, segments }
    }
}

impl TryFrom<DriverSpec> for Driver {
    type Error = Error;

    fn try_from(spec: DriverSpec) -> Result<Self, Error> {
        let mut segments = Vec::with_capacity(spec.segments.len());
        for s in spec.segments {
            segments.push(match s {
                SegmentSpec::Constant { duration, value } => Segment::Constant { value, duration },
                SegmentSpec::Linear { duration, start, end } => Segment::Linear { start, end, duration },
                SegmentSpec::Sqrt { duration, start, coeff, alpha, anchor } => {
                    let coeff = match (coeff, alpha) {
                        (Some(c), None) => c,
                        (None, Some(a)) if a > 0.0 && a < 1.0 => 2.0 * slit_drift(a),
                        (None, Some(a)) => {
                            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {a}")))
                        }
                        _ => {
                            return Err(Error::InvalidInput(
                                "sqrt segment needs exactly one of coeff or alpha".into(),
                            ))
                        }
                    };
                    Segment::SqrtCap { start, coeff, duration, anchor }
                }
                SegmentSpec::Sampled { points } => {
                    let t0 = points.first().map_or(0.0, |p| p[0]);
                    Segment::Sampled { points: points.iter().map(|p| (p[0] - t0, p[1])).collect() }
                }
            });
        }
        let d = Driver::new(spec.orientation, segments)?;
        if (d.horizon - spec.horizon).abs() > 1e-12 * spec.horizon.abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "segment durations sum to {} but horizon is {}",
                d.horizon, spec.horizon
            )));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub pairs: Vec<[f64; 2]>,
}

impl From<PartitionWeldingProblem> for ProblemSpec {
    fn from(p: PartitionWeldingProblem) -> Self {
        ProblemSpec { pairs: p.pairs.iter().map(|&(x, y)| [x, y]).collect() }
    }
}

impl TryFrom<ProblemSpec> for PartitionWeldingProblem {
    type Error = Error;

    fn try_from(spec: ProblemSpec) -> Result<Self, Error> {
        PartitionWeldingProblem::new(spec.pairs.iter().map(|p| (p[0], p[1])).collect())
    }
}
