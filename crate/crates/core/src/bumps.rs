//! Smooth compactly supported building blocks: the exponential bump used as a
//! Fourier-side profile, smooth plateaus, and the dyadic Littlewood-Paley
//! partition on the plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{SampledFunction, Side, TorusGrid};

/// Support half-width of the default Fourier-side bump.
pub const SCHWARTZ_HALFWIDTH: f64 = 0.01;
/// Default plateau: 1 on `[-1/20, 1/20]`, 0 outside `[-1/10, 1/10]`.
pub const PLATEAU_INNER: f64 = 0.05;
pub const PLATEAU_OUTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpSpec {
    /// `exp(-1 / (1 - (z/halfwidth)^2))` normalized to 1 at the origin.
    SchwartzFourierSupport { halfwidth: f64 },
    /// 1 on `[-inner, inner]`, 0 outside `[-outer, outer]`.
    Plateau { inner: f64, outer: f64 },
}

impl BumpSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BumpSpec::SchwartzFourierSupport { halfwidth } => {
                if !(halfwidth > 0.0 && halfwidth.is_finite()) {
                    return Err(LabError::InvalidParameter(format!(
                        "bump half-width must be positive, got {halfwidth}"
                    )));
                }
            }
            BumpSpec::Plateau { inner, outer } => {
                if !(inner > 0.0 && inner < outer && outer.is_finite()) {
                    return Err(LabError::InvalidParameter(format!(
                        "plateau needs 0 < inner < outer, got inner={inner}, outer={outer}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            BumpSpec::SchwartzFourierSupport { halfwidth } => exp_bump(z / halfwidth),
            BumpSpec::Plateau { inner, outer } => plateau(z, inner, outer),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            BumpSpec::SchwartzFourierSupport { halfwidth } => halfwidth,
            BumpSpec::Plateau { outer, .. } => outer,
        }
    }
}

/// `e * exp(-1/(1-t^2))` on `|t| < 1`, 0 elsewhere.
pub fn exp_bump(t: f64) -> f64 {
    let u = 1.0 - t * t;
    if u <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / u).exp()
    }
}

/// Smooth step from 0 at `t <= 0` to 1 at `t >= 1`, monotone in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

pub fn plateau(z: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smooth_step((z.abs() - inner) / (outer - inner))
}

/// Radial plateau on the plane: 1 for `|z| <= 1`, 0 for `|z| >= 2`.
pub fn radial_plateau(z: [f64; 2]) -> f64 {
    plateau(z[0].hypot(z[1]), 1.0, 2.0)
}

/// The `j`-th dyadic piece `theta(2^-j z) - theta(2^(1-j) z)`, supported in
/// `2^(j-1) <= |z| <= 2^(j+1)`.
pub fn lp_piece(j: i32, z: [f64; 2]) -> f64 {
    let a = 2f64.powi(-j);
    let b = 2.0 * a;
    radial_plateau([a * z[0], a * z[1]]) - radial_plateau([b * z[0], b * z[1]])
}

fn frequency_bump(grid: &TorusGrid, spec: BumpSpec) -> Result<SampledFunction> {
    if grid.dim() != 1 {
        return Err(LabError::Dimension("bumps are sampled on a line".into()));
    }
    Ok(SampledFunction::from_fn(*grid, Side::Frequency, |z| {
        Complex64::new(spec.eval(z[0]), 0.0)
    }))
}

/// The Fourier-side bump with support `[-1/100, 1/100]` on the frequency
/// lattice of `grid`.
pub fn schwartz_bump(grid: &TorusGrid) -> Result<SampledFunction> {
    schwartz_bump_with(grid, SCHWARTZ_HALFWIDTH)
}

pub fn schwartz_bump_with(grid: &TorusGrid, halfwidth: f64) -> Result<SampledFunction> {
    let spec = BumpSpec::SchwartzFourierSupport { halfwidth };
    spec.validate()?;
    // at least three lattice points k/L strictly inside the support
    if halfwidth * grid.length() <= 1.0 {
        return Err(LabError::Resolution {
            what: "frequency samples per unit (torus length) for the bump support".into(),
            required: 1.0 / halfwidth,
            actual: grid.length(),
        });
    }
    frequency_bump(grid, spec)
}

pub fn plateau_bump(grid: &TorusGrid, inner: f64, outer: f64) -> Result<SampledFunction> {
    let spec = BumpSpec::Plateau { inner, outer };
    spec.validate()?;
    if (outer - inner) * grid.length() < 2.0 {
        return Err(LabError::Resolution {
            what: "frequency samples per unit (torus length) for the plateau transition".into(),
            required: 2.0 / (outer - inner),
            actual: grid.length(),
        });
    }
    frequency_bump(grid, spec)
}

/// Dyadic pieces `j = jmin..=jmax` on the frequency lattice of a planar grid.
pub fn lp_partition(grid2d: &TorusGrid, jmin: i32, jmax: i32) -> Result<Vec<SampledFunction>> {
    if grid2d.dim() != 2 {
        return Err(LabError::Dimension("partition lives on a planar grid".into()));
    }
    if jmin > jmax {
        return Err(LabError::InvalidParameter(format!(
            "empty dyadic range {jmin}..={jmax}"
        )));
    }
    Ok((jmin..=jmax)
        .map(|j| {
            SampledFunction::from_fn(*grid2d, Side::Frequency, |z| {
                Complex64::new(lp_piece(j, [z[0], z[1]]), 0.0)
            })
        })
        .collect())
}
