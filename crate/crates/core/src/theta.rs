//! The exponent `theta` attached to a growth exponent `gamma`, and the
//! constants of the height and diameter expansions derived from it.
//!
//! `theta` is the unique positive root of
//! `1 + gamma * (e^theta - 1 - theta * e^theta) = 0`. The left-hand side is
//! 1 at the origin and strictly decreasing on `(0, inf)`, so the root is
//! bracketed by doubling and then polished by safeguarded Newton steps.

use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance on the defining function, not on `theta` itself.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstants {
    pub gamma: f64,
    pub theta: f64,
    /// Coefficient of `log n` in the height expansion, `gamma * e^theta`.
    pub speed: f64,
    /// Coefficient of `log log n` in the height expansion, `3 / (2 theta)`.
    pub logcorr: f64,
    pub diameter_speed: f64,
    pub diameter_logcorr: f64,
    /// `|1 + gamma (e^theta - 1 - theta e^theta)|` at the returned root.
    pub residual: f64,
}

impl AsymptoticConstants {
    /// Centering for the height: `speed * log n - logcorr * log log n`.
    pub fn height_centering(&self, n: f64) -> f64 {
        self.speed * n.ln() - self.logcorr * n.ln().ln()
    }

    pub fn diameter_centering(&self, n: f64) -> f64 {
        self.diameter_speed * n.ln() - self.diameter_logcorr * n.ln().ln()
    }
}

impl fmt::Display for AsymptoticConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gamma={:.12}", self.gamma)?;
        writeln!(f, "theta={:.12}", self.theta)?;
        writeln!(f, "speed={:.12}", self.speed)?;
        writeln!(f, "logcorr={:.12}", self.logcorr)?;
        writeln!(f, "diameter_speed={:.12}", self.diameter_speed)?;
        writeln!(f, "diameter_logcorr={:.12}", self.diameter_logcorr)?;
        write!(f, "residual={:.3e}", self.residual)
    }
}

/// `1 + gamma (e^theta - 1 - theta e^theta)`.
pub fn defining_function(gamma: f64, theta: f64) -> f64 {
    1.0 + gamma * (theta.exp_m1() - theta * theta.exp())
}

fn defining_derivative(gamma: f64, theta: f64) -> f64 {
    -gamma * theta * theta.exp()
}

pub fn solve_theta(gamma: f64) -> Result<AsymptoticConstants> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::GammaNotPositive(gamma));
    }
    let f = |t: f64| defining_function(gamma, t);

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= RESIDUAL_TOLERANCE * 0.25 {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / defining_derivative(gamma, x);
        let newton = x - step;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    let theta = x;
    let speed = gamma * theta.exp();
    let logcorr = 1.5 / theta;
    Ok(AsymptoticConstants {
        gamma,
        theta,
        speed,
        logcorr,
        diameter_speed: 2.0 * speed,
        diameter_logcorr: 2.0 * logcorr,
        residual: f(theta).abs(),
    })
}

/// `floor(3 / (2 theta) * log log n)`, defined for `n >= 3`.
pub fn x_n(theta: f64, n: u128) -> Result<i64> {
    if !(theta > 0.0) {
        return Err(Error::ThetaNotPositive(theta));
    }
    if n < 3 {
        return Err(Error::XnUndefined(n));
    }
    let loglog = (n as f64).ln().ln();
    Ok((1.5 / theta * loglog).floor() as i64)
}
