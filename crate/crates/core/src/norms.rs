//! Sobolev, Triebel-Lizorkin, wavelet sequence and Hormander norms of planar
//! symbols. The symbol's frequency variables play the role of space here; the
//! Bessel potential and Littlewood-Paley pieces act on their dual variable.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumps::{lp_piece, radial_plateau};
use crate::error::{LabError, Result};
use crate::grid::{check_exponent, dft_forward, dft_inverse, lp_norm, next_fast_len, SampledFunction, Side, TorusGrid};
use crate::symbol::{IndexBox, Symbol};
use crate::wavelets::WaveletCoeffs;

/// Largest side of the padded torus used for spectral norms.
pub const MAX_PADDED_POINTS: usize = 4096;

/// Pieces whose annulus inner radius spans fewer grid cells than this are
/// below the sampling resolution of the symbol.
pub const MIN_ANNULUS_CELLS: f64 = 4.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Support must sit in the central half of the torus so that the tails of the
/// Bessel potential do not wrap onto it.
pub fn check_margin(sigma: &Symbol) -> Result<()> {
    let b = sigma.support();
    if b.is_empty() {
        return Ok(());
    }
    let quarter = (sigma.grid().points() / 4) as i64;
    if (0..2).any(|a| b.lo[a] < -quarter || b.hi[a] >= quarter) {
        return Err(LabError::Margin(format!(
            "support box {:?}..={:?} leaves the central half [-{quarter}, {quarter}) of the torus",
            b.lo, b.hi
        )));
    }
    Ok(())
}

/// The symbol's samples on the smallest fast torus of the same spacing that
/// keeps the support in its central half.
fn padded(sigma: &Symbol) -> Result<SampledFunction> {
    check_margin(sigma)?;
    let b = sigma.support();
    let m = sigma.grid().points();
    let need = 2 * (0..2).map(|a| b.lo[a].unsigned_abs().max(b.hi[a].unsigned_abs() + 1)).max().unwrap_or(1) as usize;
    let p = next_fast_len(2 * need).min(m);
    if p > MAX_PADDED_POINTS {
        return Err(LabError::SizeGuard(format!(
            "padded torus side {p} exceeds {MAX_PADDED_POINTS}"
        )));
    }
    let grid = TorusGrid::square(p as f64 * sigma.spacing(), p)?;
    let mut f = SampledFunction::zeros(grid, Side::Space);
    let h = grid.half() as i64;
    let v = f.values_mut();
    for (k, x) in sigma.iter() {
        v[((k[0] + h) as usize) * p + (k[1] + h) as usize] = x;
    }
    Ok(f)
}

fn dual_radius(grid: &TorusGrid, idx: usize) -> f64 {
    let m = grid.points();
    grid.frequency(idx / m).hypot(grid.frequency(idx % m))
}

fn check_planar(f: &SampledFunction) -> Result<()> {
    f.expect_side(Side::Space)?;
    if f.grid().dim() != 2 {
        return Err(LabError::Dimension("planar symbols only".into()));
    }
    Ok(())
}

fn bessel(f: &SampledFunction, r: f64, s: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(LabError::InvalidParameter(format!("Sobolev exponent r must be at least 1, got {r}")));
    }
    if s < 0.0 {
        return Err(LabError::InvalidParameter(format!("smoothness must be nonnegative, got {s}")));
    }
    if s == 0.0 {
        return lp_norm(f, r);
    }
    let mut spec = dft_forward(f)?;
    let grid = *spec.grid();
    let tau = 2.0 * std::f64::consts::PI;
    spec.values_mut().par_iter_mut().enumerate().for_each(|(i, v)| {
        let k = dual_radius(&grid, i);
        *v *= (1.0 + tau * tau * k * k).powf(s / 2.0);
    });
    lp_norm(&dft_inverse(&spec)?, r)
}

/// `||(I - Delta)^(s/2) sigma||_{L^r}` for a compactly supported symbol, on a
/// zero-padded torus.
pub fn sobolev_norm(sigma: &Symbol, r: f64, s: f64) -> Result<f64> {
    bessel(&padded(sigma)?, r, s)
}

/// The same quantity for a periodic function on its own torus.
pub fn sobolev_norm_periodic(f: &SampledFunction, r: f64, s: f64) -> Result<f64> {
    check_planar(f)?;
    bessel(f, r, s)
}

fn top_scale(grid: &TorusGrid) -> u32 {
    let kmax = grid.nyquist() * std::f64::consts::SQRT_2;
    (kmax.log2().ceil().max(0.0) as u32) + 1
}

/// `phi_0 = theta` collects the low frequencies, `phi_j` for `j >= 1` the dyadic
/// annuli `2^(j-1) <= |k| <= 2^(j+1)`.
fn tl_weight(j: u32, k: [f64; 2]) -> f64 {
    if j == 0 {
        radial_plateau(k)
    } else {
        lp_piece(j as i32, k)
    }
}

fn triebel(f: &SampledFunction, r: f64, q: f64, s: f64) -> Result<f64> {
    check_exponent(r)?;
    check_exponent(q)?;
    let spec = dft_forward(f)?;
    let grid = *spec.grid();
    let m = grid.points();
    let mut acc = vec![0.0f64; grid.size()];
    for j in 0..=top_scale(&grid) {
        let mut piece = spec.clone();
        piece.values_mut().par_iter_mut().enumerate().for_each(|(i, v)| {
            *v *= tl_weight(j, [grid.frequency(i / m), grid.frequency(i % m)]);
        });
        let back = dft_inverse(&piece)?;
        let w = 2f64.powf(j as f64 * s);
        acc.par_iter_mut().zip(back.values()).for_each(|(a, v)| {
            let x = w * v.norm();
            if q.is_infinite() {
                *a = a.max(x);
            } else {
                *a += x.powf(q);
            }
        });
    }
    let root: Vec<Complex64> = acc
        .iter()
        .map(|a| Complex64::new(if q.is_infinite() { *a } else { a.powf(1.0 / q) }, 0.0))
        .collect();
    lp_norm(&SampledFunction::new(*f.grid(), root, Side::Space)?, r)
}

/// `|| (sum_j 2^(jsq) |(phi_j sigma^)v|^q)^(1/q) ||_{L^r}` on the padded torus,
/// with `j` running up to the grid's Nyquist scale.
pub fn tl_norm(sigma: &Symbol, r: f64, q: f64, s: f64) -> Result<f64> {
    triebel(&padded(sigma)?, r, q, s)
}

pub fn tl_norm_periodic(f: &SampledFunction, r: f64, q: f64, s: f64) -> Result<f64> {
    check_planar(f)?;
    triebel(f, r, q, s)
}

/// `sum_j 2^(2js) ||(phi_j sigma^)v||_2^2`, the square of the `r = q = 2` case
/// evaluated piece by piece via Parseval.
pub fn tl_square_sum(sigma: &Symbol, s: f64) -> Result<f64> {
    let f = padded(sigma)?;
    let spec = dft_forward(&f)?;
    let grid = *spec.grid();
    let m = grid.points();
    let cell = grid.frequency_cell();
    Ok((0..=top_scale(&grid))
        .map(|j| {
            let e: f64 = spec
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| (tl_weight(j, [grid.frequency(i / m), grid.frequency(i % m)]) * v.norm()).powi(2))
                .sum();
            4f64.powf(j as f64 * s) * e * cell
        })
        .sum())
}

/// `|| (sum 2^(lambda s q) |gamma chi|^q)^(1/q) ||_{L^r}` with
/// `gamma = 2^lambda a` and `chi` the indicator of the half-open cube of side
/// `2^(1-lambda)` centred at `2^-lambda mu`. The integrand is constant on the
/// cells of the finest cube lattice, so the quadrature is exact.
pub fn sequence_norm(coeffs: &WaveletCoeffs, r: f64, q: f64, s: f64) -> Result<f64> {
    check_exponent(r)?;
    check_exponent(q)?;
    let live: Vec<_> = coeffs.iter().filter(|(_, v)| **v != ZERO).collect();
    if live.is_empty() {
        return Ok(0.0);
    }
    let top = live.iter().map(|(k, _)| k.level).max().unwrap();
    // cube of (level, mu) spans fine cells (mu - 1) 2^(top-level) .. (mu + 1) 2^(top-level)
    let span = |level: u32, mu: i64| {
        let f = 1i64 << (top - level);
        ((mu - 1) * f, (mu + 1) * f)
    };
    let mut cells = IndexBox::empty();
    for (k, _) in &live {
        let (a0, b0) = span(k.level, k.shift[0]);
        let (a1, b1) = span(k.level, k.shift[1]);
        cells = cells.hull(&IndexBox::new([a0, a1], [b0 - 1, b1 - 1]));
    }
    let (e0, e1) = (cells.extent(0), cells.extent(1));
    if e0 * e1 > 1 << 26 {
        return Err(LabError::SizeGuard(format!("{e0}x{e1} quadrature cells")));
    }
    let mut acc = vec![0.0f64; e0 * e1];
    for (k, a) in &live {
        let gamma = 2f64.powi(k.level as i32) * a.norm();
        let x = 2f64.powf(k.level as f64 * s) * gamma;
        let (a0, b0) = span(k.level, k.shift[0]);
        let (a1, b1) = span(k.level, k.shift[1]);
        for i in a0..b0 {
            let row = &mut acc[(i - cells.lo[0]) as usize * e1..][..e1];
            for c in &mut row[(a1 - cells.lo[1]) as usize..(b1 - cells.lo[1]) as usize] {
                if q.is_infinite() {
                    *c = c.max(x);
                } else {
                    *c += x.powf(q);
                }
            }
        }
    }
    let cell_area = 4f64.powi(-(top as i32));
    let vals = acc.iter().map(|a| if q.is_infinite() { *a } else { a.powf(1.0 / q) });
    Ok(if r.is_infinite() {
        vals.fold(0.0, f64::max)
    } else {
        (cell_area * vals.map(|v| v.powf(r)).sum::<f64>()).powf(1.0 / r)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub sobolev: f64,
    pub hormander: f64,
    /// `j -> ||sigma(2^j .) psi^||_{L^r_s}`
    pub per_j: BTreeMap<i32, f64>,
    pub r: f64,
    pub s: f64,
    pub q: Option<f64>,
}

/// Scales `j` whose annulus `2^(j-1) <= |zeta| <= 2^(j+1)` meets the nonzero
/// samples and is resolved by the grid.
pub fn contributing_scales(sigma: &Symbol) -> Option<RangeInclusive<i32>> {
    let (rmin, rmax) = sigma.radial_extent()?;
    let floor = resolution_floor(sigma);
    let hi = (rmax.log2() + 1.0).floor() as i32;
    let lo = if rmin > 0.0 { (rmin.log2() - 1.0).ceil() as i32 } else { floor };
    let lo = lo.max(floor);
    (lo <= hi).then_some(lo..=hi)
}

fn resolution_floor(sigma: &Symbol) -> i32 {
    ((MIN_ANNULUS_CELLS * sigma.spacing()).log2() + 1.0).ceil() as i32
}

/// `sigma(2^j zeta) psi^(zeta)` with `psi^` the unit annulus piece: the samples of
/// `sigma psi^(2^-j .)` read on a grid of spacing `2^-j` times the original.
pub fn localized_piece(sigma: &Symbol, j: i32) -> Result<Symbol> {
    let grid = *sigma.grid();
    let d = sigma.spacing();
    let scale = 2f64.powi(-j);
    let reach = 2f64.powi(j + 1);
    let annulus = IndexBox::from_coordinates(&grid, [[-reach, reach], [-reach, reach]]);
    let b = sigma.support().intersect(&annulus);
    let values = b
        .iter()
        .map(|k| sigma.get(k) * lp_piece(0, [k[0] as f64 * d * scale, k[1] as f64 * d * scale]))
        .collect();
    Symbol::new(grid, b, values)?.reinterpret(grid.length() * scale)
}

/// Per-scale Sobolev norms of the localized dilates and their maximum. With
/// `jrange = None` the contributing scales are derived from the support.
pub fn hormander_norm(
    sigma: &Symbol,
    r: f64,
    s: f64,
    jrange: Option<RangeInclusive<i32>>,
) -> Result<NormReport> {
    check_exponent(r)?;
    let sobolev = sobolev_norm(sigma, r, s)?;
    let needed = contributing_scales(sigma);
    let range = match (jrange, &needed) {
        (Some(given), Some(need)) => {
            let floor = resolution_floor(sigma);
            if *given.start() < floor {
                return Err(LabError::Resolution {
                    what: "annulus scale j resolved by the symbol grid".into(),
                    required: *given.start() as f64,
                    actual: floor as f64,
                });
            }
            let missing: Vec<i32> = need.clone().filter(|j| !given.contains(j)).collect();
            if !missing.is_empty() {
                return Err(LabError::Coverage { missing });
            }
            given
        }
        (Some(given), None) => given,
        (None, Some(need)) => need.clone(),
        (None, None) => RangeInclusive::new(0, -1),
    };
    let per_j: BTreeMap<i32, f64> = range
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&j| Ok((j, sobolev_norm(&localized_piece(sigma, j)?, r, s)?)))
        .collect::<Result<_>>()?;
    let hormander = per_j.values().copied().fold(0.0, f64::max);
    Ok(NormReport {
        sobolev,
        hormander,
        per_j,
        r,
        s,
        q: None,
    })
}
