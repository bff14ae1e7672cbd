use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Rayleigh block fading: `h'_{k,b}` i.i.d. zero-mean unit-variance complex
/// Gaussian, so the power gains `|h'_{k,b}|²` are i.i.d. Exp(1). Unit noise
/// variance and an expected average power constraint `power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    users: usize,
    power: f64,
}

impl FadingModel {
    pub fn new(users: usize, power: f64) -> Result<Self> {
        if users == 0 {
            return Err(Error::invalid("fading model needs at least one user"));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid(format!("power constraint {power} must be positive")));
        }
        Ok(FadingModel { users, power })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// One block's gains.
    pub fn draw_gains<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.users).map(|_| rng.sample::<f64, _>(Exp1)).collect()
    }
}
