//! Ring-all-reduce iteration time model and job utility functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RarError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("invalid parameter {name}: {value}")]
    BadParam { name: &'static str, value: f64 },
}

/// Per-iteration cost parameters of one RAR training job. Sizes and rates
/// are in gradient elements and elements per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RarParams {
    pub gradient_elems: f64,
    pub link_rate: f64,
    pub reduce_rate: f64,
    pub forward_per_sample: f64,
    pub batch_size: u32,
    pub backward: f64,
    pub comm_latency: f64,
}

impl RarParams {
    pub fn validate(&self) -> Result<(), RarError> {
        let positive = [
            ("gradient_elems", self.gradient_elems),
            ("link_rate", self.link_rate),
            ("reduce_rate", self.reduce_rate),
            ("forward_per_sample", self.forward_per_sample),
            ("backward", self.backward),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RarError::BadParam { name, value });
            }
        }
        if self.batch_size < 1 {
            return Err(RarError::BadParam { name: "batch_size", value: 0.0 });
        }
        if !(self.comm_latency >= 0.0 && self.comm_latency.is_finite()) {
            return Err(RarError::BadParam { name: "comm_latency", value: self.comm_latency });
        }
        Ok(())
    }

    fn compute_time(&self) -> f64 {
        self.forward_per_sample * self.batch_size as f64 + self.backward + self.comm_latency
    }

    /// Seconds per training iteration with `workers` workers in the ring:
    /// the reduce-scatter/all-gather term `d(w-1)/w · (2/b + 1/G)` plus
    /// forward, backward and fixed communication overhead.
    pub fn per_iteration_time(&self, workers: u32) -> Result<f64, RarError> {
        if workers == 0 {
            return Err(RarError::NoWorkers);
        }
        let w = workers as f64;
        let ring = self.gradient_elems * (w - 1.0) / w * (2.0 / self.link_rate + 1.0 / self.reduce_rate);
        Ok(ring + self.compute_time())
    }

    /// Limit of [`Self::per_iteration_time`] as the ring grows.
    pub fn asymptotic_time(&self) -> f64 {
        self.gradient_elems * (2.0 / self.link_rate + 1.0 / self.reduce_rate) + self.compute_time()
    }

    /// Iterations one worker completes per slot of `slot_seconds`.
    pub fn iterations_per_slot(&self, workers: u32, slot_seconds: f64) -> Result<f64, RarError> {
        if !(slot_seconds > 0.0 && slot_seconds.is_finite()) {
            return Err(RarError::BadParam { name: "slot_seconds", value: slot_seconds });
        }
        Ok(slot_seconds / self.per_iteration_time(workers)?)
    }
}

/// Job utility as a function of accumulated progress `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `c·√v`
    Sqrt { c: f64 },
    /// `ln(1 + v)`; shifted so zero progress has zero utility.
    Log,
    /// `-(c2·v² + c1·v)`, an energy-cost style utility.
    NegQuadCost { c2: f64, c1: f64 },
    /// `priority / (1 + exp(-sensitivity·(v - midpoint)))`
    Sigmoid { priority: f64, sensitivity: f64, midpoint: f64 },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<(), String> {
        let finite = |x: f64| x.is_finite();
        match *self {
            UtilitySpec::Sqrt { c } if !(c > 0.0 && finite(c)) => Err(format!("sqrt scale {c} must be positive")),
            UtilitySpec::NegQuadCost { c2, c1 } if !(c2 >= 0.0 && finite(c2) && finite(c1)) => {
                Err(format!("quadratic cost coefficients ({c2}, {c1}) invalid"))
            }
            UtilitySpec::Sigmoid { priority, sensitivity, midpoint }
                if !(priority > 0.0 && sensitivity > 0.0 && finite(priority) && finite(sensitivity) && finite(midpoint)) =>
            {
                Err("sigmoid parameters must be positive and finite".to_string())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, v: f64) -> f64 {
        let v = v.max(0.0);
        match *self {
            UtilitySpec::Sqrt { c } => c * v.sqrt(),
            UtilitySpec::Log => v.ln_1p(),
            UtilitySpec::NegQuadCost { c2, c1 } => -(c2 * v * v + c1 * v),
            UtilitySpec::Sigmoid { priority, sensitivity, midpoint } => {
                priority / (1.0 + (-sensitivity * (v - midpoint)).exp())
            }
        }
    }

    /// Whether the utility is concave on `v >= 0`. Sigmoid is not.
    pub fn is_concave(&self) -> bool {
        !matches!(self, UtilitySpec::Sigmoid { .. })
    }

    /// Upper end of the range `[0, limit]` on which the utility is
    /// nondecreasing. Infinite for every variant except the quadratic cost,
    /// which rises only up to its vertex `-c1 / (2·c2)`.
    pub fn nondecreasing_limit(&self) -> f64 {
        match *self {
            UtilitySpec::NegQuadCost { c2, c1 } if c2 > 0.0 => (-c1 / (2.0 * c2)).max(0.0),
            UtilitySpec::NegQuadCost { c1, .. } if c1 > 0.0 => 0.0,
            _ => f64::INFINITY,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            UtilitySpec::Sqrt { .. } => "sqrt",
            UtilitySpec::Log => "log",
            UtilitySpec::NegQuadCost { .. } => "negquad",
            UtilitySpec::Sigmoid { .. } => "sigmoid",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            UtilitySpec::Sqrt { c } => vec![c],
            UtilitySpec::Log => vec![],
            UtilitySpec::NegQuadCost { c2, c1 } => vec![c2, c1],
            UtilitySpec::Sigmoid { priority, sensitivity, midpoint } => vec![priority, sensitivity, midpoint],
        }
    }

    pub fn from_parts(kind: &str, params: &[f64]) -> Result<Self, String> {
        let spec = match (kind, params) {
            ("sqrt", [c]) => UtilitySpec::Sqrt { c: *c },
            ("log", []) => UtilitySpec::Log,
            ("negquad", [c2, c1]) => UtilitySpec::NegQuadCost { c2: *c2, c1: *c1 },
            ("sigmoid", [p, s, m]) => UtilitySpec::Sigmoid { priority: *p, sensitivity: *s, midpoint: *m },
            _ => return Err(format!("utility '{kind}' with {} parameters is not recognised", params.len())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn utility(spec: &UtilitySpec, v: f64) -> f64 {
    spec.value(v)
}
