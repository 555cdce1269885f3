//! Compactly supported Daubechies wavelets, their tensor products on the
//! plane, and analysis/synthesis of symbols in that basis.

mod filters;
pub mod transform;

pub use filters::{daubechies_filters, highpass, MAX_ORDER};
pub use transform::{analyze, level_square_norm, synthesize, CoefficientRecord, WaveletCoeffs};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{SampledFunction, Side, TorusGrid};
use crate::symbol::IndexBox;

pub const MIN_DEPTH: u32 = 6;
pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_DEPTH: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    /// scaling function
    F,
    /// wavelet
    M,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

/// Gender pairs admissible at a scale: all four at the coarsest scale, the
/// three containing a wavelet factor above it.
pub fn genders_at(level: u32) -> &'static [[Gender; 2]] {
    use Gender::*;
    if level == 0 {
        &[[F, F], [F, M], [M, F], [M, M]]
    } else {
        &[[F, M], [M, F], [M, M]]
    }
}

/// `(level, genders, shift)` labelling `2^level Psi^G(2^level x - shift)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WaveletIndex {
    pub level: u32,
    pub gender: [Gender; 2],
    pub shift: [i64; 2],
}

impl WaveletIndex {
    pub fn new(level: u32, gender: [Gender; 2], shift: [i64; 2]) -> Result<Self> {
        if level > 0 && gender == [Gender::F, Gender::F] {
            return Err(LabError::InvalidParameter(
                "the pure scaling tensor only appears at level 0".into(),
            ));
        }
        Ok(Self {
            level,
            gender,
            shift,
        })
    }

    pub fn gender_label(&self) -> String {
        format!("{}{}", self.gender[0], self.gender[1])
    }
}

/// Samples of `2^(level/2) psi_G(2^level x - shift)` at consecutive centered
/// grid indices `start, start + 1, ...` (unwrapped).
#[derive(Debug, Clone, PartialEq)]
pub struct LineSamples {
    pub start: i64,
    pub values: Vec<f64>,
}

impl LineSamples {
    /// Dense samples on the whole line grid, wrapping around the torus.
    pub fn dense(&self, grid: &TorusGrid) -> Vec<f64> {
        let mut out = vec![0.0; grid.points()];
        for (t, v) in self.values.iter().enumerate() {
            out[grid.wrap(self.start + t as i64)] += v;
        }
        out
    }

    /// `(index - lo, value)` for the wrapped samples landing in `lo..=hi`.
    pub fn restricted(&self, grid: &TorusGrid, lo: i64, hi: i64) -> Vec<(usize, f64)> {
        let h = grid.half() as i64;
        let m = grid.points() as i64;
        self.values
            .iter()
            .enumerate()
            .filter_map(|(t, v)| {
                let n = (self.start + t as i64 + h).rem_euclid(m) - h;
                (n >= lo && n <= hi && *v != 0.0).then(|| ((n - lo) as usize, *v))
            })
            .collect()
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }
}

/// The grid's dyadic resolution: spacing `2^-q`.
pub fn dyadic_resolution(grid: &TorusGrid) -> Result<u32> {
    let h = grid.spacing();
    let q = (-h.log2()).round();
    if q < 0.0 || (h * 2f64.powf(q) - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidParameter(format!(
            "wavelet sampling needs a dyadic grid spacing 2^-q, got {h}"
        )));
    }
    Ok(q as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSystem {
    order: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    depth: u32,
    father: Vec<f64>,
    mother: Vec<f64>,
    /// father values at levels 0..=depth, used for exact resampling
    father_levels: Vec<Vec<f64>>,
}

impl WaveletSystem {
    pub fn new(order: usize, depth: u32) -> Result<Self> {
        cascade(&daubechies_filters(order)?, depth)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `psi_F(m / 2^depth)` for `m = 0 ..= (2p - 1) 2^depth`.
    pub fn father(&self) -> &[f64] {
        &self.father
    }

    pub fn mother(&self) -> &[f64] {
        &self.mother
    }

    /// Length of the common support `[0, 2p - 1]`.
    pub fn support_length(&self) -> usize {
        2 * self.order - 1
    }

    /// Values of `psi_G` at spacing `2^-level` over the support, for
    /// `level <= depth`.
    pub fn values_at(&self, gender: Gender, level: u32) -> Result<Vec<f64>> {
        if level > self.depth {
            return Err(LabError::Resolution {
                what: "cascade depth".into(),
                required: level as f64,
                actual: self.depth as f64,
            });
        }
        Ok(match gender {
            Gender::F => self.father_levels[level as usize].clone(),
            Gender::M => mother_from(&self.highpass, &self.father_levels, level),
        })
    }

    /// One-dimensional factor `2^(level/2) psi_G(2^level x - shift)` on the
    /// points of `grid`.
    pub fn line_samples(
        &self,
        gender: Gender,
        level: u32,
        shift: i64,
        grid: &TorusGrid,
    ) -> Result<LineSamples> {
        let q = dyadic_resolution(grid)?;
        if level > q {
            return Err(LabError::Resolution {
                what: "grid resolution 2^q for the wavelet level".into(),
                required: level as f64,
                actual: q as f64,
            });
        }
        let fine = q - level;
        let support = self.support_length() as f64 * 2f64.powi(-(level as i32));
        if support > grid.length() + 1e-12 {
            return Err(LabError::InvalidParameter(format!(
                "wavelet support {support} at level {level} exceeds the torus length {}",
                grid.length()
            )));
        }
        let values = self.values_at(gender, fine)?;
        let amp = 2f64.powf(level as f64 / 2.0);
        let step = 1i64 << fine;
        // the last sample is the right end of the support, where psi vanishes
        let keep = values.len() - 1;
        Ok(LineSamples {
            start: shift * step,
            values: values[..keep].iter().map(|v| v * amp).collect(),
        })
    }

    /// `||2^(level/2) psi_G(2^level . )||_{L^r}` by grid quadrature; shifts
    /// by whole translations leave it unchanged.
    pub fn line_norm(&self, gender: Gender, level: u32, r: f64, grid: &TorusGrid) -> Result<f64> {
        let s = self.line_samples(gender, level, 0, grid)?;
        let cell = grid.spacing();
        crate::grid::check_exponent(r)?;
        Ok(if r.is_infinite() {
            s.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
        } else {
            (cell * s.values.iter().map(|v| v.abs().powf(r)).sum::<f64>()).powf(1.0 / r)
        })
    }

    pub fn tensor(&self, idx: &WaveletIndex, grid2d: &TorusGrid) -> Result<TensorWavelet> {
        let line = grid2d.with_dim(1)?;
        Ok(TensorWavelet {
            index: *idx,
            factors: [
                self.line_samples(idx.gender[0], idx.level, idx.shift[0], &line)?,
                self.line_samples(idx.gender[1], idx.level, idx.shift[1], &line)?,
            ],
            line,
        })
    }

    /// Translations at `level` whose support meets the centered index range
    /// `lo..=hi` of a grid with resolution `2^-q`.
    pub fn shifts_meeting(&self, level: u32, q: u32, lo: i64, hi: i64) -> std::ops::RangeInclusive<i64> {
        let step = 1i64 << (q - level);
        let width = self.support_length() as i64 * step;
        let first = (lo - width + 1).div_euclid(step) + i64::from((lo - width + 1).rem_euclid(step) != 0);
        let last = hi.div_euclid(step);
        first..=last
    }
}

fn mother_from(highpass: &[f64], father_levels: &[Vec<f64>], level: u32) -> Vec<f64> {
    let len = father_levels[level as usize].len();
    if level == 0 {
        // psi(k) = sqrt2 sum_t g_t phi(2k - t) at integers
        let phi = &father_levels[0];
        return (0..len)
            .map(|k| {
                std::f64::consts::SQRT_2
                    * highpass
                        .iter()
                        .enumerate()
                        .filter_map(|(t, g)| {
                            let n = 2 * k as i64 - t as i64;
                            (n >= 0 && (n as usize) < phi.len()).then(|| g * phi[n as usize])
                        })
                        .sum::<f64>()
            })
            .collect();
    }
    let coarse = &father_levels[level as usize - 1];
    let half = 1i64 << (level - 1);
    (0..len as i64)
        .map(|m| {
            std::f64::consts::SQRT_2
                * highpass
                    .iter()
                    .enumerate()
                    .filter_map(|(t, g)| {
                        let n = m - t as i64 * half;
                        (n >= 0 && (n as usize) < coarse.len()).then(|| g * coarse[n as usize])
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Builds the scaling function and wavelet on the dyadic grid of spacing
/// `2^-depth`: integer values from the eigenvector of the two-scale matrix,
/// then exact dyadic refinement.
pub fn cascade(lowpass: &[f64], depth: u32) -> Result<WaveletSystem> {
    if depth < MIN_DEPTH {
        return Err(LabError::InvalidParameter(format!(
            "cascade depth must be at least {MIN_DEPTH}, got {depth}"
        )));
    }
    if lowpass.len() < 2 || !lowpass.len().is_multiple_of(2) {
        return Err(LabError::InvalidParameter(
            "lowpass filter needs an even number of taps".into(),
        ));
    }
    let order = lowpass.len() / 2;
    let n = lowpass.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    let tap = |i: i64| -> f64 {
        if i >= 0 && (i as usize) < n {
            lowpass[i as usize]
        } else {
            0.0
        }
    };
    // phi(i) = sqrt2 sum_j h_{2i - j} phi(j) on the integers 0..n-1
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let mut change = f64::INFINITY;
    for _ in 0..5000 {
        let mut next: Vec<f64> = (0..n as i64)
            .map(|i| sqrt2 * (0..n as i64).map(|j| tap(2 * i - j) * v[j as usize]).sum::<f64>())
            .collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let scale = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
        change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        v = next;
        if change < 1e-16 {
            break;
        }
    }
    if change > 1e-8 {
        return Err(LabError::Convergence(format!(
            "two-scale eigenvector iteration ended with relative change {change:e}"
        )));
    }
    let mut levels = vec![v];
    for level in 1..=depth {
        let coarse = levels.last().unwrap();
        let half = 1i64 << (level - 1);
        let len = (n - 1) * (1usize << level) + 1;
        let fine: Vec<f64> = (0..len as i64)
            .map(|m| {
                sqrt2
                    * (0..n)
                        .filter_map(|t| {
                            let k = m - t as i64 * half;
                            (k >= 0 && (k as usize) < coarse.len())
                                .then(|| lowpass[t] * coarse[k as usize])
                        })
                        .sum::<f64>()
            })
            .collect();
        levels.push(fine);
    }
    let hp = highpass(lowpass);
    let mother = mother_from(&hp, &levels, depth);
    Ok(WaveletSystem {
        order,
        lowpass: lowpass.to_vec(),
        highpass: hp,
        depth,
        father: levels[depth as usize].clone(),
        mother,
        father_levels: levels,
    })
}

/// A planar tensor wavelet kept as its two line factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorWavelet {
    pub index: WaveletIndex,
    pub factors: [LineSamples; 2],
    line: TorusGrid,
}

impl TensorWavelet {
    pub fn to_sampled(&self) -> Result<SampledFunction> {
        let grid = self.line.with_dim(2)?;
        let a = self.factors[0].dense(&self.line);
        let b = self.factors[1].dense(&self.line);
        let m = self.line.points();
        let mut values = Vec::with_capacity(m * m);
        for x in &a {
            for y in &b {
                values.push(Complex64::new(x * y, 0.0));
            }
        }
        SampledFunction::new(grid, values, Side::Space)
    }

    /// Quadrature inner product, factor by factor.
    pub fn inner(&self, other: &TensorWavelet) -> f64 {
        let h = self.line.spacing();
        (0..2)
            .map(|a| {
                let x = self.factors[a].dense(&self.line);
                let y = other.factors[a].dense(&self.line);
                h * x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>()
            })
            .product()
    }

    /// Centered index box holding the (unwrapped) support.
    pub fn support_box(&self) -> IndexBox {
        IndexBox::new(
            [self.factors[0].start, self.factors[1].start],
            [self.factors[0].end(), self.factors[1].end()],
        )
    }
}

/// Samples of the `L^2`-normalized tensor wavelet `2^level Psi^G(2^level x - shift)`.
pub fn tensor_wavelet(
    ws: &WaveletSystem,
    idx: &WaveletIndex,
    grid2d: &TorusGrid,
) -> Result<SampledFunction> {
    ws.tensor(idx, grid2d)?.to_sampled()
}
