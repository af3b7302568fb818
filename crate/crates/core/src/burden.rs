//! Closed-form multiply counts per training iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Lm,
    Cg,
    Scg,
    Molf,
    Adact,
    Ols,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Lm,
        Algorithm::Cg,
        Algorithm::Scg,
        Algorithm::Molf,
        Algorithm::Adact,
        Algorithm::Ols,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lm => "lm",
            Algorithm::Cg => "cg",
            Algorithm::Scg => "scg",
            Algorithm::Molf => "molf",
            Algorithm::Adact => "adact",
            Algorithm::Ols => "ols",
        }
    }
}

/// Network and data dimensions the counts depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BurdenInput {
    pub inputs: u64,
    pub hidden: u64,
    pub outputs: u64,
    pub patterns: u64,
    pub hinges: u64,
}

impl BurdenInput {
    pub fn new(inputs: u64, hidden: u64, outputs: u64, patterns: u64, hinges: u64) -> Result<Self> {
        if [inputs, hidden, outputs, patterns, hinges].contains(&0) {
            return Err(Error::Config("burden dimensions must all be positive".into()));
        }
        Ok(Self {
            inputs,
            hidden,
            outputs,
            patterns,
            hinges,
        })
    }

    /// `N_u = N + N_h + 1`.
    pub fn basis_len(&self) -> u128 {
        (self.inputs + self.hidden + 1) as u128
    }

    /// `N_w = M N_u + (N + 1) N_h`.
    pub fn weight_count(&self) -> u128 {
        self.outputs as u128 * self.basis_len() + (self.inputs as u128 + 1) * self.hidden as u128
    }
}

/// A count kept as `numerator / denominator` until the final rounding.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn int(v: u128) -> Self {
        Self { num: v, den: 1 }
    }

    fn add(self, other: Ratio) -> Self {
        Self {
            num: self.num * other.den + other.num * self.den,
            den: self.den * other.den,
        }
    }

    fn round(self) -> u128 {
        (2 * self.num + self.den) / (2 * self.den)
    }
}

fn ols(d: &BurdenInput) -> Ratio {
    // N_u (N_u + 1) [M + N_u (2 N_u + 1) / 6 + 3/2]
    let nu = d.basis_len();
    let m = d.outputs as u128;
    Ratio {
        num: nu * (nu + 1) * (6 * m + nu * (2 * nu + 1) + 9),
        den: 6,
    }
}

fn molf(d: &BurdenInput) -> Ratio {
    // M_ols + N_v N_h [2M + N + 2 + M (N_h + 1) / 2]
    let (n, nh, m, nv) = (
        d.inputs as u128,
        d.hidden as u128,
        d.outputs as u128,
        d.patterns as u128,
    );
    ols(d).add(Ratio {
        num: nv * nh * (2 * (2 * m + n + 2) + m * (nh + 1)),
        den: 2,
    })
}

fn conjugate_gradient(d: &BurdenInput) -> u128 {
    let (n, nh, m) = (d.inputs as u128, d.hidden as u128, d.outputs as u128);
    let nu = d.basis_len();
    let nw = d.weight_count();
    m * nu + m * (n + 6 * nh + 4) + m * nu * (nu + 3 * nh * (n + 1)) + 4 * nh.pow(4) * (n + 1).pow(2)
        + nw.pow(3)
        + nw.pow(2)
}

/// Multiplies per iteration for `algorithm` at dimensions `d`.
pub fn burden(algorithm: Algorithm, d: &BurdenInput) -> u128 {
    match algorithm {
        Algorithm::Ols => ols(d).round(),
        Algorithm::Molf => molf(d).round(),
        Algorithm::Adact => molf(d)
            .add(Ratio::int(d.hidden as u128 * d.hinges as u128))
            .round(),
        Algorithm::Cg | Algorithm::Scg => conjugate_gradient(d),
        Algorithm::Lm => {
            conjugate_gradient(d) + 2 * d.hidden as u128 * (d.inputs as u128 + 1)
        }
    }
}
