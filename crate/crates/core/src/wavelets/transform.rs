use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dyadic_resolution, genders_at, Gender, WaveletIndex, WaveletSystem};
use crate::error::{LabError, Result};
use crate::grid::TorusGrid;
use crate::symbol::{IndexBox, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `a = <sigma, Psi>` of a symbol, keyed in sorted index order.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    grid: TorusGrid,
    order: usize,
    max_level: u32,
    map: BTreeMap<WaveletIndex, Complex64>,
}

/// Flat JSON form of one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub lambda: u32,
    #[serde(rename = "G")]
    pub gender: String,
    pub mu: [i64; 2],
    pub re: f64,
    pub im: f64,
}

impl WaveletCoeffs {
    pub fn new(
        grid: TorusGrid,
        order: usize,
        max_level: u32,
        map: BTreeMap<WaveletIndex, Complex64>,
    ) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(LabError::Dimension("coefficients of planar symbols".into()));
        }
        if let Some(bad) = map.keys().find(|k| k.level > max_level) {
            return Err(LabError::InvalidParameter(format!(
                "coefficient at level {} above the declared maximum {max_level}",
                bad.level
            )));
        }
        Ok(Self {
            grid,
            order,
            max_level,
            map,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn get(&self, idx: &WaveletIndex) -> Complex64 {
        self.map.get(idx).copied().unwrap_or(ZERO)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveletIndex, &Complex64)> {
        self.map.iter()
    }

    pub fn at_level(&self, level: u32) -> impl Iterator<Item = (&WaveletIndex, &Complex64)> {
        self.map.iter().filter(move |(k, _)| k.level == level)
    }

    pub fn map(&self) -> &BTreeMap<WaveletIndex, Complex64> {
        &self.map
    }

    /// Same grid and order, restricted to the indices kept by `keep`.
    pub fn filtered(&self, keep: impl Fn(&WaveletIndex) -> bool) -> WaveletCoeffs {
        WaveletCoeffs {
            grid: self.grid,
            order: self.order,
            max_level: self.max_level,
            map: self
                .map
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    pub fn with_entries(&self, entries: impl IntoIterator<Item = (WaveletIndex, Complex64)>) -> WaveletCoeffs {
        WaveletCoeffs {
            grid: self.grid,
            order: self.order,
            max_level: self.max_level,
            map: entries.into_iter().collect(),
        }
    }

    /// `sum |a|^2`.
    pub fn energy(&self) -> f64 {
        self.map.values().map(|v| v.norm_sqr()).sum()
    }

    /// `b = a * ||Psi||_{L^r}`, the coefficient against the `L^r`-normalized
    /// wavelet.
    pub fn renormalized(&self, idx: &WaveletIndex, r: f64, ws: &WaveletSystem) -> Result<Complex64> {
        Ok(self.get(idx) * tensor_norm(ws, idx, r, &self.grid)?)
    }

    pub fn records(&self) -> Vec<CoefficientRecord> {
        self.map
            .iter()
            .map(|(k, v)| CoefficientRecord {
                lambda: k.level,
                gender: k.gender_label(),
                mu: k.shift,
                re: v.re,
                im: v.im,
            })
            .collect()
    }
}

/// `||Psi_idx||_{L^r}` on a planar grid as the product of line norms.
pub fn tensor_norm(ws: &WaveletSystem, idx: &WaveletIndex, r: f64, grid2d: &TorusGrid) -> Result<f64> {
    let line = grid2d.with_dim(1)?;
    Ok(ws.line_norm(idx.gender[0], idx.level, r, &line)?
        * ws.line_norm(idx.gender[1], idx.level, r, &line)?)
}

fn check_system(ws: &WaveletSystem, grid: &TorusGrid, max_level: u32) -> Result<u32> {
    let q = dyadic_resolution(grid)?;
    if max_level > q {
        return Err(LabError::Resolution {
            what: "grid resolution exponent q (spacing 2^-q) for the finest level".into(),
            required: max_level as f64,
            actual: q as f64,
        });
    }
    if q > ws.depth() {
        return Err(LabError::Resolution {
            what: "cascade depth for the grid spacing".into(),
            required: q as f64,
            actual: ws.depth() as f64,
        });
    }
    Ok(q)
}

/// Line factors restricted to `lo..=hi` for every shift in range.
fn restricted_factors(
    ws: &WaveletSystem,
    gender: Gender,
    level: u32,
    shifts: std::ops::RangeInclusive<i64>,
    line: &TorusGrid,
    lo: i64,
    hi: i64,
    square: bool,
) -> Result<Vec<Vec<(usize, f64)>>> {
    shifts
        .map(|mu| {
            let s = ws.line_samples(gender, level, mu, line)?;
            let mut r = s.restricted(line, lo, hi);
            if square {
                r.iter_mut().for_each(|(_, v)| *v *= *v);
            }
            Ok(r)
        })
        .collect()
}

/// All coefficients with `level <= max_level` whose wavelets meet the
/// symbol's support box, by separable grid quadrature.
pub fn analyze(sigma: &Symbol, ws: &WaveletSystem, max_level: u32) -> Result<WaveletCoeffs> {
    let grid = *sigma.grid();
    let q = check_system(ws, &grid, max_level)?;
    let line = grid.with_dim(1)?;
    let b = *sigma.support();
    let mut map = BTreeMap::new();
    if b.is_empty() {
        return WaveletCoeffs::new(grid, ws.order(), max_level, map);
    }
    for level in 0..=max_level {
        let s0 = ws.shifts_meeting(level, q, b.lo[0], b.hi[0]);
        let s1 = ws.shifts_meeting(level, q, b.lo[1], b.hi[1]);
        let period = (grid.length() * 2f64.powi(level as i32)).round() as i64;
        for s in [&s0, &s1] {
            if s.end() - s.start() + 1 > period {
                return Err(LabError::InvalidParameter(format!(
                    "torus of length {} too short for the support box plus wavelet support at level {level}",
                    grid.length()
                )));
            }
        }
    }
    let cell = grid.cell();
    let tasks: Vec<(u32, Gender)> = (0..=max_level)
        .flat_map(|l| [(l, Gender::F), (l, Gender::M)])
        .collect();
    let results: Vec<Vec<(WaveletIndex, Complex64)>> = tasks
        .par_iter()
        .map(|&(level, g1)| -> Result<Vec<(WaveletIndex, Complex64)>> {
            let s0 = ws.shifts_meeting(level, q, b.lo[0], b.hi[0]);
            let s1 = ws.shifts_meeting(level, q, b.lo[1], b.hi[1]);
            let w1 = b.extent(1);
            let mut out = Vec::new();
            let f1 = restricted_factors(ws, g1, level, s1.clone(), &line, b.lo[1], b.hi[1], false)?;
            // partial sums over the second axis: rows of sigma against each factor
            let n1 = f1.len();
            let mut partial = vec![ZERO; b.extent(0) * n1];
            for (row, vals) in sigma.values().chunks_exact(w1).enumerate() {
                for (j, fac) in f1.iter().enumerate() {
                    let mut acc = ZERO;
                    for &(c, v) in fac {
                        acc += vals[c] * v;
                    }
                    partial[row * n1 + j] = acc;
                }
            }
            for g0 in [Gender::F, Gender::M] {
                if !genders_at(level).contains(&[g0, g1]) {
                    continue;
                }
                let f0 = restricted_factors(ws, g0, level, s0.clone(), &line, b.lo[0], b.hi[0], false)?;
                for (i, fac0) in f0.iter().enumerate() {
                    let mu0 = s0.start() + i as i64;
                    for j in 0..n1 {
                        let mut acc = ZERO;
                        for &(r, v) in fac0 {
                            acc += partial[r * n1 + j] * v;
                        }
                        let mu1 = s1.start() + j as i64;
                        out.push((
                            WaveletIndex {
                                level,
                                gender: [g0, g1],
                                shift: [mu0, mu1],
                            },
                            acc * cell,
                        ));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    for part in results {
        map.extend(part);
    }
    WaveletCoeffs::new(grid, ws.order(), max_level, map)
}

/// Index box covering the supports of the given wavelets; the whole grid
/// when they wrap around the torus.
pub fn support_hull<'a>(
    ws: &WaveletSystem,
    grid: &TorusGrid,
    indices: impl Iterator<Item = &'a WaveletIndex>,
) -> Result<IndexBox> {
    let q = dyadic_resolution(grid)?;
    let mut hull = IndexBox::empty();
    for idx in indices {
        let step = 1i64 << (q - idx.level);
        let width = ws.support_length() as i64 * step;
        let b = IndexBox::new(
            [idx.shift[0] * step, idx.shift[1] * step],
            [idx.shift[0] * step + width - 1, idx.shift[1] * step + width - 1],
        );
        hull = hull.hull(&b);
    }
    if hull.is_empty() || hull.within(grid) {
        Ok(hull)
    } else {
        Ok(IndexBox::full(grid))
    }
}

/// `sum_w c_w F(w)` over `target`, where `F(w)` is the tensor wavelet (or its
/// square) and the sum is carried out axis by axis per level and gender.
pub fn separable_sum(
    ws: &WaveletSystem,
    grid: &TorusGrid,
    target: IndexBox,
    entries: &[(WaveletIndex, Complex64)],
    square: bool,
) -> Result<Vec<Complex64>> {
    let line = grid.with_dim(1)?;
    let mut groups: BTreeMap<(u32, [Gender; 2]), Vec<(i64, i64, Complex64)>> = BTreeMap::new();
    for (idx, c) in entries {
        if *c != ZERO {
            groups
                .entry((idx.level, idx.gender))
                .or_default()
                .push((idx.shift[0], idx.shift[1], *c));
        }
    }
    let (e0, e1) = (target.extent(0), target.extent(1));
    let mut out = vec![ZERO; target.len()];
    if target.is_empty() {
        return Ok(out);
    }
    let partials: Vec<Vec<Complex64>> = groups
        .par_iter()
        .map(|((level, gender), items)| -> Result<Vec<Complex64>> {
            let lo0 = items.iter().map(|t| t.0).min().unwrap();
            let hi0 = items.iter().map(|t| t.0).max().unwrap();
            let lo1 = items.iter().map(|t| t.1).min().unwrap();
            let hi1 = items.iter().map(|t| t.1).max().unwrap();
            let n0 = (hi0 - lo0 + 1) as usize;
            let n1 = (hi1 - lo1 + 1) as usize;
            let mut coef = vec![ZERO; n0 * n1];
            for &(a, b, c) in items {
                coef[(a - lo0) as usize * n1 + (b - lo1) as usize] += c;
            }
            let f0 = restricted_factors(ws, gender[0], *level, lo0..=hi0, &line, target.lo[0], target.hi[0], square)?;
            let f1 = restricted_factors(ws, gender[1], *level, lo1..=hi1, &line, target.lo[1], target.hi[1], square)?;
            // rows: for each first shift, the second-axis profile
            let mut rows = vec![ZERO; n0 * e1];
            for i in 0..n0 {
                let row = &mut rows[i * e1..(i + 1) * e1];
                for j in 0..n1 {
                    let c = coef[i * n1 + j];
                    if c == ZERO {
                        continue;
                    }
                    for &(k, v) in &f1[j] {
                        row[k] += c * v;
                    }
                }
            }
            let mut acc = vec![ZERO; e0 * e1];
            for (i, fac) in f0.iter().enumerate() {
                let row = &rows[i * e1..(i + 1) * e1];
                if row.iter().all(|v| *v == ZERO) {
                    continue;
                }
                for &(k, v) in fac {
                    let dst = &mut acc[k * e1..(k + 1) * e1];
                    for (d, s) in dst.iter_mut().zip(row) {
                        *d += s * v;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// `sum a Psi` sampled on `target` (default: the hull of the supports).
pub fn synthesize(
    coeffs: &WaveletCoeffs,
    ws: &WaveletSystem,
    target: Option<IndexBox>,
) -> Result<Symbol> {
    let grid = *coeffs.grid();
    check_system(ws, &grid, coeffs.max_level())?;
    let target = match target {
        Some(t) => t,
        None => support_hull(ws, &grid, coeffs.iter().filter(|(_, v)| **v != ZERO).map(|(k, _)| k))?,
    };
    let entries: Vec<(WaveletIndex, Complex64)> = coeffs.iter().map(|(k, v)| (*k, *v)).collect();
    let values = separable_sum(ws, &grid, target, &entries, false)?;
    Symbol::new(grid, target, values)
}

/// `|| (sum_{G, mu} |a Psi|^2)^(1/2) ||_{L^r}` over the wavelets of one level.
pub fn level_square_norm(coeffs: &WaveletCoeffs, ws: &WaveletSystem, level: u32, r: f64) -> Result<f64> {
    crate::grid::check_exponent(r)?;
    let grid = *coeffs.grid();
    if level > coeffs.max_level() {
        return Err(LabError::InvalidParameter(format!(
            "level {level} beyond the analyzed range 0..={}",
            coeffs.max_level()
        )));
    }
    let entries: Vec<(WaveletIndex, Complex64)> = coeffs
        .at_level(level)
        .filter(|(_, v)| **v != ZERO)
        .map(|(k, v)| (*k, Complex64::new(v.norm_sqr(), 0.0)))
        .collect();
    if entries.is_empty() {
        return Ok(0.0);
    }
    let target = support_hull(ws, &grid, entries.iter().map(|(k, _)| k))?;
    let squares = separable_sum(ws, &grid, target, &entries, true)?;
    let cell = grid.cell();
    Ok(if r.is_infinite() {
        squares.iter().map(|v| v.re.max(0.0).sqrt()).fold(0.0, f64::max)
    } else {
        (cell * squares.iter().map(|v| v.re.max(0.0).powf(r / 2.0)).sum::<f64>()).powf(1.0 / r)
    })
}
