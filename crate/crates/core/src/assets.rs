//! Fundamental value of the single traded stock.
//!
//! The value only moves by multiplicative jumps: each step a uniform draw
//! below the jump probability scales it by `1 + j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// How the jump size `j` is chosen when a jump happens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRule {
    /// The same signed `j` every time.
    Fixed,
    /// `+j` or `-j` with equal probability.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FundamentalConfig {
    pub initial: f64,
    pub jump_size: f64,
    pub jump_prob: f64,
    pub jump_rule: JumpRule,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        FundamentalConfig {
            initial: 1000.0,
            jump_size: 0.002,
            jump_prob: 0.001,
            jump_rule: JumpRule::Symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalProcess {
    value: f64,
    jump_size: f64,
    jump_prob: f64,
    rule: JumpRule,
}

impl FundamentalProcess {
    pub fn new(config: &FundamentalConfig) -> Self {
        FundamentalProcess {
            value: config.initial,
            jump_size: config.jump_size,
            jump_prob: config.jump_prob,
            rule: config.jump_rule,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Applies one step given the uniform draw `u` and the jump size to use
    /// if it fires.
    pub fn step_with(&mut self, u: f64, jump: f64) -> f64 {
        if u < self.jump_prob {
            self.value *= 1.0 + jump;
        }
        self.value
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u >= self.jump_prob {
            return self.value;
        }
        let jump = match self.rule {
            JumpRule::Fixed => self.jump_size,
            JumpRule::Symmetric if rng.random::<bool>() => self.jump_size,
            JumpRule::Symmetric => -self.jump_size,
        };
        self.step_with(u, jump)
    }
}
