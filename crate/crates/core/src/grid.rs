//! Periodic grids on the torus of length `L` (one or two axes) and the
//! centered discrete Fourier transform that approximates the continuum one.
//!
//! Sample `i` along an axis sits at `(i - M/2) * h` with `h = L / M`; frequency
//! bin `j` sits at `(j - M/2) / L`. With these conventions
//!
//! ```text
//! forward:  F(k/L) = h^d  * sum_x f(x) exp(-2 pi i x.k/L)
//! inverse:  f(x)   = L^-d * sum_k F(k/L) exp(+2 pi i x.k/L)
//! ```
//!
//! so both are Riemann sums of the continuum integrals and exact inverses of
//! each other.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    length: f64,
    points: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, length: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(LabError::InvalidParameter(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "torus length must be positive, got {length}"
            )));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(LabError::InvalidParameter(format!(
                "points per axis must be even and at least 4, got {points}"
            )));
        }
        Ok(Self {
            dim,
            length,
            points,
        })
    }

    pub fn line(length: f64, points: usize) -> Result<Self> {
        Self::new(1, length, points)
    }

    pub fn square(length: f64, points: usize) -> Result<Self> {
        Self::new(2, length, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Number of samples, `M^dim`.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Volume of one spatial cell, `h^dim`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Volume of one frequency cell, `L^-dim`.
    pub fn frequency_cell(&self) -> f64 {
        self.length.powi(-(self.dim as i32))
    }

    pub fn half(&self) -> usize {
        self.points / 2
    }

    /// Signed offset of storage index `i` from the center.
    pub fn centered(&self, i: usize) -> i64 {
        i as i64 - self.half() as i64
    }

    /// Storage index of signed offset `k`, wrapped onto the torus.
    pub fn wrap(&self, k: i64) -> usize {
        (k + self.half() as i64).rem_euclid(self.points as i64) as usize
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.centered(i) as f64 * self.spacing()
    }

    pub fn frequency(&self, j: usize) -> f64 {
        self.centered(j) as f64 / self.length
    }

    /// Largest representable frequency magnitude per axis, `M / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.half() as f64 / self.length
    }

    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(dim, self.length, self.points)
    }

    /// The grid whose frequency lattice carries this grid's sample points:
    /// same `M`, length `M / L`.
    pub fn dual(&self) -> Result<Self> {
        Self::new(self.dim, self.points as f64 / self.length, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Space,
    Frequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: TorusGrid,
    values: Vec<Complex64>,
    side: Side,
}

impl SampledFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>, side: Side) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(LabError::Dimension(format!(
                "expected {} samples, got {}",
                grid.size(),
                values.len()
            )));
        }
        Ok(Self { grid, values, side })
    }

    pub fn zeros(grid: TorusGrid, side: Side) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.size()],
            side,
        }
    }

    /// Samples `f` at the points of `side`: spatial coordinates, or the
    /// frequency lattice `k / L`.
    pub fn from_fn<F>(grid: TorusGrid, side: Side, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let coord = |i: usize| match side {
            Side::Space => grid.coordinate(i),
            Side::Frequency => grid.frequency(i),
        };
        let m = grid.points();
        let values = match grid.dim() {
            1 => (0..m).map(|i| f(&[coord(i)])).collect(),
            _ => (0..m * m)
                .map(|n| f(&[coord(n / m), coord(n % m)]))
                .collect(),
        };
        Self { grid, values, side }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn expect_side(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(LabError::Contract(format!(
                "expected a {side:?}-side function, got {:?}",
                self.side
            )));
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &SampledFunction) -> Result<()> {
        if self.grid != other.grid || self.side != other.side {
            return Err(LabError::Dimension(
                "functions live on different grids or sides".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.same_layout(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
            side: self.side,
        })
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.same_layout(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
            side: self.side,
        })
    }

    /// Largest absolute sample.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Relative l2 distance of the sample vectors.
    pub fn relative_error(&self, reference: &SampledFunction) -> f64 {
        relative_l2(&self.values, &reference.values)
    }
}

pub fn relative_l2(a: &[Complex64], reference: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = reference.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn dft_forward(f: &SampledFunction) -> Result<SampledFunction> {
    f.expect_side(Side::Space)?;
    let mut values = f.values.clone();
    transform(&mut values, f.grid.points(), f.grid.dim(), Direction::Forward);
    let c = f.grid.cell();
    values.iter_mut().for_each(|v| *v *= c);
    Ok(SampledFunction {
        grid: f.grid,
        values,
        side: Side::Frequency,
    })
}

pub fn dft_inverse(f: &SampledFunction) -> Result<SampledFunction> {
    f.expect_side(Side::Frequency)?;
    let mut values = f.values.clone();
    transform(&mut values, f.grid.points(), f.grid.dim(), Direction::Inverse);
    let c = f.grid.frequency_cell();
    values.iter_mut().for_each(|v| *v *= c);
    Ok(SampledFunction {
        grid: f.grid,
        values,
        side: Side::Space,
    })
}

/// `(h^d sum |f|^p)^(1/p)`, or the largest modulus for `p = inf`.
pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64> {
    f.expect_side(Side::Space)?;
    weighted_lp(&f.values, f.grid.cell(), p)
}

/// Same quadrature on the frequency lattice, with cell `L^-d`.
pub fn lp_norm_frequency(f: &SampledFunction, p: f64) -> Result<f64> {
    f.expect_side(Side::Frequency)?;
    weighted_lp(&f.values, f.grid.frequency_cell(), p)
}

pub(crate) fn weighted_lp(values: &[Complex64], cell: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let sum: f64 = if p == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum()
    } else if p == 1.0 {
        values.iter().map(|v| v.norm()).sum()
    } else {
        values.iter().map(|v| v.norm().powf(p)).sum()
    };
    Ok((cell * sum).powf(1.0 / p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p <= 0.0 {
        return Err(LabError::InvalidParameter(format!(
            "Lebesgue exponent must be positive, got {p}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

/// Unnormalized centered transform along every axis of a square array:
/// `sum_i x_i exp(-+2 pi i (i - M/2)(j - M/2) / M)`.
pub(crate) fn transform(values: &mut [Complex64], m: usize, dim: usize, dir: Direction) {
    let fft = plan(m, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    match dim {
        1 => centered_line(values, fft.as_ref(), &mut scratch),
        _ => {
            for row in values.chunks_exact_mut(m) {
                centered_line(row, fft.as_ref(), &mut scratch);
            }
            let mut column = vec![Complex64::new(0.0, 0.0); m];
            for c in 0..m {
                for r in 0..m {
                    column[r] = values[r * m + c];
                }
                centered_line(&mut column, fft.as_ref(), &mut scratch);
                for r in 0..m {
                    values[r * m + c] = column[r];
                }
            }
        }
    }
}

fn centered_line(line: &mut [Complex64], fft: &dyn Fft<f64>, scratch: &mut [Complex64]) {
    let m = line.len();
    for v in line.iter_mut().skip(1).step_by(2) {
        *v = -*v;
    }
    fft.process_with_scratch(line, scratch);
    // (-1)^(j + M/2)
    let start = if (m / 2).is_multiple_of(2) { 1 } else { 0 };
    for v in line.iter_mut().skip(start).step_by(2) {
        *v = -*v;
    }
}

/// Smallest `n >= min` of the form `2^a 3^b 5^c` with `n` even.
pub fn next_fast_len(min: usize) -> usize {
    let mut n = min.max(4);
    if n % 2 == 1 {
        n += 1;
    }
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn direct_forward(f: &SampledFunction) -> Vec<Complex64> {
        let g = f.grid();
        let m = g.points();
        assert_eq!(g.dim(), 1);
        (0..m)
            .map(|j| {
                let k = g.frequency(j);
                f.values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * g.coordinate(i) * k))
                    .sum::<Complex64>()
                    * g.spacing()
            })
            .collect()
    }

    fn noise(n: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..n).map(|_| Complex64::new(next(), next())).collect()
    }

    #[test]
    fn constant_goes_to_dc() {
        let g = TorusGrid::line(1.0, 8).unwrap();
        let f = SampledFunction::new(g, vec![Complex64::new(1.0, 0.0); 8], Side::Space).unwrap();
        let fh = dft_forward(&f).unwrap();
        for (j, v) in fh.values().iter().enumerate() {
            let expect = if j == 4 { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn character_goes_to_single_bin() {
        for (dim, m, l) in [(1, 16, 3.0), (2, 8, 2.0), (1, 10, 1.5), (2, 6, 1.0)] {
            let g = TorusGrid::new(dim, l, m).unwrap();
            let k0 = [2i64, -1];
            let f = SampledFunction::from_fn(g, Side::Space, |x| {
                let phase: f64 = x.iter().zip(k0).map(|(xi, k)| xi * k as f64 / l).sum();
                Complex64::from_polar(1.0, 2.0 * PI * phase)
            });
            let fh = dft_forward(&f).unwrap();
            let target = match dim {
                1 => g.wrap(k0[0]),
                _ => g.wrap(k0[0]) * m + g.wrap(k0[1]),
            };
            for (n, v) in fh.values().iter().enumerate() {
                let expect = if n == target { l.powi(dim as i32) } else { 0.0 };
                assert!((v.re - expect).abs() < 1e-12 && v.im.abs() < 1e-12, "{dim} {m} {n} {v}");
            }
        }
    }

    #[test]
    fn dc_delta_inverts_to_constant() {
        let g = TorusGrid::square(2.0, 8).unwrap();
        let mut fh = SampledFunction::zeros(g, Side::Frequency);
        fh.values_mut()[4 * 8 + 4] = Complex64::new(4.0, 0.0);
        let f = dft_inverse(&fh).unwrap();
        assert!(f.values().iter().all(|v| (v - 1.0).norm() < 1e-14));
        let zero = dft_inverse(&SampledFunction::zeros(g, Side::Frequency)).unwrap();
        assert!(zero.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn matches_direct_summation() {
        for m in [16, 18, 12] {
            let g = TorusGrid::line(2.5, m).unwrap();
            let f = SampledFunction::new(g, noise(m, m as u64), Side::Space).unwrap();
            let fast = dft_forward(&f).unwrap();
            let slow = direct_forward(&f);
            assert!(relative_l2(fast.values(), &slow) < 1e-13);
        }
    }

    #[test]
    fn round_trips() {
        let g = TorusGrid::line(1.0, 16).unwrap();
        let f = SampledFunction::new(g, noise(16, 3), Side::Space).unwrap();
        let back = dft_inverse(&dft_forward(&f).unwrap()).unwrap();
        assert!(back.relative_error(&f) < 1e-12);

        let g2 = TorusGrid::square(3.0, 16).unwrap();
        let fh = SampledFunction::new(g2, noise(256, 9), Side::Frequency).unwrap();
        let again = dft_forward(&dft_inverse(&fh).unwrap()).unwrap();
        assert!(again.relative_error(&fh) < 1e-12);
    }

    #[test]
    fn side_tags_are_enforced() {
        let g = TorusGrid::line(1.0, 8).unwrap();
        let f = SampledFunction::zeros(g, Side::Frequency);
        assert!(matches!(dft_forward(&f), Err(LabError::Contract(_))));
        assert!(matches!(lp_norm(&f, 2.0), Err(LabError::Contract(_))));
        let f = SampledFunction::zeros(g, Side::Space);
        assert!(matches!(dft_inverse(&f), Err(LabError::Contract(_))));
    }

    #[test]
    fn lp_norm_examples() {
        let g = TorusGrid::line(3.0, 12).unwrap();
        let c = Complex64::new(0.6, -0.8);
        let f = SampledFunction::new(g, vec![c * 2.0; 12], Side::Space).unwrap();
        assert!((lp_norm(&f, 2.0).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!((lp_norm(&f, f64::INFINITY).unwrap() - 2.0).abs() < 1e-14);

        let g = TorusGrid::line(1.0, 16).unwrap();
        let mut spike = SampledFunction::zeros(g, Side::Space);
        spike.values_mut()[5] = Complex64::new(1.0, 0.0);
        assert!((lp_norm(&spike, 1.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(matches!(lp_norm(&spike, 0.0), Err(LabError::InvalidParameter(_))));
        assert!(matches!(lp_norm(&spike, -1.0), Err(LabError::InvalidParameter(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::line(1.0, 7).is_err());
        assert!(TorusGrid::line(1.0, 2).is_err());
        assert!(TorusGrid::line(0.0, 8).is_err());
        assert!(TorusGrid::new(3, 1.0, 8).is_err());
        let g = TorusGrid::line(4.0, 8).unwrap();
        assert_eq!(g.wrap(-4), 0);
        assert_eq!(g.wrap(4), 0);
        assert_eq!(g.coordinate(0), -2.0);
        assert_eq!(g.frequency(7), 0.75);
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(14), 16);
        assert_eq!(next_fast_len(2111), 2160);
        assert_eq!(next_fast_len(1), 4);
    }
}
