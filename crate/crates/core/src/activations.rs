//! Trainable piecewise-linear activations.
//!
//! Each hidden unit owns a fixed, evenly spaced grid of hinge abscissae and a
//! vector of trainable heights, one per hinge. Between hinges the activation
//! interpolates linearly; outside the grid it is flat and returns the nearest
//! end height.
//!
//! Hinge indices in this module are zero-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope of the negative half of the leaky ReLU reference.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Fraction of the observed net span added on each side when fitting hinge ranges.
pub const DEFAULT_RANGE_MARGIN: f64 = 0.05;

/// Evenly spaced hinge abscissae over `[r, s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeGrid {
    r: f64,
    s: f64,
    ns: Vec<f64>,
    delta: f64,
}

impl HingeGrid {
    /// Builds `count` hinges evenly spaced from `r` to `s` inclusive.
    pub fn new(r: f64, s: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidHingeCount(count));
        }
        if !(s > r) || !r.is_finite() || !s.is_finite() {
            return Err(Error::DegenerateRange { r, s });
        }
        let delta = (s - r) / (count - 1) as f64;
        let mut ns: Vec<f64> = (0..count).map(|m| r + m as f64 * delta).collect();
        // pin the right end; r + (H-1)*delta can be off by an ulp
        ns[count - 1] = s;
        Ok(Self { r, s, ns, delta })
    }

    /// Rebuilds a grid from stored abscissae, checking they form a valid grid.
    pub fn from_abscissae(ns: Vec<f64>) -> Result<Self> {
        let count = ns.len();
        if count < 2 {
            return Err(Error::InvalidHingeCount(count));
        }
        let (r, s) = (ns[0], ns[count - 1]);
        if !(s > r) || !r.is_finite() || !s.is_finite() {
            return Err(Error::DegenerateRange { r, s });
        }
        if ns.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Shape("hinge abscissae must be strictly increasing".into()));
        }
        let delta = (s - r) / (count - 1) as f64;
        Ok(Self { r, s, ns, delta })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of hinges.
    pub fn len(&self) -> usize {
        self.ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ns.is_empty()
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.ns
    }

    pub fn contains(&self, n: f64) -> bool {
        n >= self.r && n <= self.s
    }

    /// Finds the interval holding `n` and its two interpolation weights.
    ///
    /// A value sitting exactly on an interior hinge belongs to the interval to
    /// its right, so `w1 = 1` and `w2 = 0` there.
    pub fn locate(&self, n: f64) -> Result<Bucket> {
        if !self.contains(n) {
            return Err(Error::OutOfRange {
                value: n,
                r: self.r,
                s: self.s,
            });
        }
        Ok(self.bucket_unchecked(n))
    }

    /// `locate` without the range check; callers guarantee `r <= n <= s`.
    pub(crate) fn bucket_unchecked(&self, n: f64) -> Bucket {
        let last = self.ns.len() - 2;
        let guess = ((n - self.r) / self.delta).floor();
        let mut lo = if guess <= 0.0 {
            0
        } else {
            (guess as usize).min(last)
        };
        // the division can land one bucket off near a hinge
        if lo < last && self.ns[lo + 1] <= n {
            lo += 1;
        } else if lo > 0 && self.ns[lo] > n {
            lo -= 1;
        }
        let hi = lo + 1;
        let width = self.ns[hi] - self.ns[lo];
        let w1 = (self.ns[hi] - n) / width;
        let w2 = (n - self.ns[lo]) / width;
        Bucket { lo, hi, w1, w2 }
    }
}

/// Interval `[ns(lo), ns(hi)]` holding a net value, with its interpolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub lo: usize,
    pub hi: usize,
    pub w1: f64,
    pub w2: f64,
}

/// Where a net value falls relative to a unit's grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Below,
    Inside(Bucket),
    Above,
}

/// Reference nonlinearities used to seed the hinge heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu,
    Identity,
}

impl Reference {
    pub const ALL: [Reference; 5] = [
        Reference::Sigmoid,
        Reference::Tanh,
        Reference::Relu,
        Reference::LeakyRelu,
        Reference::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Sigmoid => "sigmoid",
            Reference::Tanh => "tanh",
            Reference::Relu => "relu",
            Reference::LeakyRelu => "leaky_relu",
            Reference::Identity => "identity",
        }
    }

    pub fn value(self, n: f64, leaky_slope: f64) -> f64 {
        match self {
            Reference::Sigmoid => 1.0 / (1.0 + (-n).exp()),
            Reference::Tanh => n.tanh(),
            Reference::Relu => n.max(0.0),
            Reference::LeakyRelu => {
                if n >= 0.0 {
                    n
                } else {
                    leaky_slope * n
                }
            }
            Reference::Identity => n,
        }
    }

    /// Derivative, taking the right-hand value at the ReLU kink.
    pub fn derivative(self, n: f64, leaky_slope: f64) -> f64 {
        match self {
            Reference::Sigmoid => {
                let s = self.value(n, leaky_slope);
                s * (1.0 - s)
            }
            Reference::Tanh => 1.0 - n.tanh().powi(2),
            Reference::Relu => {
                if n >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Reference::LeakyRelu => {
                if n >= 0.0 {
                    1.0
                } else {
                    leaky_slope
                }
            }
            Reference::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reference::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown activation `{s}`")))
    }
}

/// One hidden unit's activation: a fixed hinge grid and trainable heights.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearActivation {
    grid: HingeGrid,
    heights: Vec<f64>,
}

impl PiecewiseLinearActivation {
    pub fn new(grid: HingeGrid, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} heights for {} hinges",
                heights.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, heights })
    }

    /// Samples `reference` at every hinge.
    pub fn from_reference(reference: Reference, grid: HingeGrid, leaky_slope: f64) -> Self {
        let heights = grid
            .abscissae()
            .iter()
            .map(|&n| reference.value(n, leaky_slope))
            .collect();
        Self { grid, heights }
    }

    pub fn grid(&self) -> &HingeGrid {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn heights_mut(&mut self) -> &mut [f64] {
        &mut self.heights
    }

    pub fn placement(&self, n: f64) -> Placement {
        if n < self.grid.r {
            Placement::Below
        } else if n > self.grid.s {
            Placement::Above
        } else {
            Placement::Inside(self.grid.bucket_unchecked(n))
        }
    }

    pub fn evaluate(&self, n: f64) -> f64 {
        match self.placement(n) {
            Placement::Below => self.heights[0],
            Placement::Above => self.heights[self.heights.len() - 1],
            Placement::Inside(b) => b.w1 * self.heights[b.lo] + b.w2 * self.heights[b.hi],
        }
    }

    /// Slope of the interval holding `n`; zero in the flat extrapolation regions.
    pub fn slope(&self, n: f64) -> f64 {
        match self.placement(n) {
            Placement::Inside(b) => {
                let ns = self.grid.abscissae();
                (self.heights[b.hi] - self.heights[b.lo]) / (ns[b.hi] - ns[b.lo])
            }
            _ => 0.0,
        }
    }

    /// Rewrites the activation as an offset plus a sum of shifted ramps,
    /// `a(1) + sum_k c_k * max(0, n - ns_k)`, exact for every real `n`.
    pub fn ramp_form(&self) -> RampSum {
        let ns = self.grid.abscissae();
        let slopes: Vec<f64> = ns
            .windows(2)
            .zip(self.heights.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        let mut coefficients = Vec::with_capacity(ns.len());
        let mut previous = 0.0;
        for &slope in &slopes {
            coefficients.push(slope - previous);
            previous = slope;
        }
        // flattens the curve past the last hinge
        coefficients.push(-previous);
        RampSum {
            offset: self.heights[0],
            knots: ns.to_vec(),
            coefficients,
        }
    }
}

/// A constant plus a weighted sum of ramps switching on at `knots`.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSum {
    pub offset: f64,
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl RampSum {
    pub fn evaluate(&self, n: f64) -> f64 {
        self.knots
            .iter()
            .zip(&self.coefficients)
            .fold(self.offset, |acc, (&k, &c)| acc + c * (n - k).max(0.0))
    }
}

/// The activations of all hidden units; every unit has the same hinge count.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBank {
    hinges: usize,
    units: Vec<PiecewiseLinearActivation>,
}

impl ActivationBank {
    pub fn new(units: Vec<PiecewiseLinearActivation>) -> Result<Self> {
        let hinges = units
            .first()
            .map(|u| u.grid.len())
            .ok_or_else(|| Error::Shape("activation bank needs at least one unit".into()))?;
        if let Some(k) = units.iter().position(|u| u.grid.len() != hinges) {
            return Err(Error::Shape(format!(
                "unit {k} has {} hinges, expected {hinges}",
                units[k].grid.len()
            )));
        }
        Ok(Self { hinges, units })
    }

    /// Builds one unit per `(r, s)` range, each seeded from `reference`.
    pub fn from_ranges(
        ranges: &[(f64, f64)],
        hinges: usize,
        reference: Reference,
        leaky_slope: f64,
    ) -> Result<Self> {
        let units = ranges
            .iter()
            .map(|&(r, s)| {
                HingeGrid::new(r, s, hinges)
                    .map(|g| PiecewiseLinearActivation::from_reference(reference, g, leaky_slope))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(units)
    }

    pub fn hinges(&self) -> usize {
        self.hinges
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, k: usize) -> &PiecewiseLinearActivation {
        &self.units[k]
    }

    pub fn unit_mut(&mut self, k: usize) -> &mut PiecewiseLinearActivation {
        &mut self.units[k]
    }

    pub fn units(&self) -> &[PiecewiseLinearActivation] {
        &self.units
    }

    pub fn grids(&self) -> impl Iterator<Item = &HingeGrid> {
        self.units.iter().map(|u| &u.grid)
    }
}

/// Per-unit `(min, max)` of the net values, each side widened by `margin` times the span.
///
/// `nets` is row-major with one row per pattern and `units` columns.
pub fn fit_ranges(nets: &[f64], units: usize, margin: f64) -> Result<Vec<(f64, f64)>> {
    if units == 0 || !nets.len().is_multiple_of(units) {
        return Err(Error::Shape(format!(
            "{} net values do not split into {units} columns",
            nets.len()
        )));
    }
    let patterns = nets.len() / units;
    if patterns < 2 {
        return Err(Error::TooFewPatterns {
            needed: 2,
            got: patterns,
        });
    }
    (0..units)
        .map(|k| {
            let (lo, hi) = nets
                .iter()
                .skip(k)
                .step_by(units)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if !(hi > lo) {
                return Err(Error::DegenerateUnit { unit: k, value: lo });
            }
            let pad = margin * (hi - lo);
            Ok((lo - pad, hi + pad))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct UnitRecord {
    r: f64,
    s: f64,
    ns: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BankRecord {
    #[serde(rename = "H")]
    hinges: usize,
    units: Vec<UnitRecord>,
}

impl Serialize for ActivationBank {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        BankRecord {
            hinges: self.hinges,
            units: self
                .units
                .iter()
                .map(|u| UnitRecord {
                    r: u.grid.r,
                    s: u.grid.s,
                    ns: u.grid.ns.clone(),
                    a: u.heights.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActivationBank {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let record = BankRecord::deserialize(deserializer)?;
        let units = record
            .units
            .into_iter()
            .enumerate()
            .map(|(k, u)| {
                let grid = HingeGrid::from_abscissae(u.ns)?;
                if grid.r != u.r || grid.s != u.s {
                    return Err(Error::Shape(format!(
                        "unit {k}: r/s disagree with the hinge abscissae"
                    )));
                }
                PiecewiseLinearActivation::new(grid, u.a)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let bank = ActivationBank::new(units).map_err(D::Error::custom)?;
        if bank.hinges != record.hinges {
            return Err(D::Error::custom(format!(
                "H = {} but units carry {} hinges",
                record.hinges, bank.hinges
            )));
        }
        Ok(bank)
    }
}
