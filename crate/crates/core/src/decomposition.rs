//! Splitting a symbol's wavelet expansion at one level into pieces whose
//! bilinear operators can be bounded separately: residue subclasses with
//! disjoint supports, dyadic level sets of the coefficient sizes, heavy and
//! light columns, and the split into parts near the coordinate axes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bumps::{exp_bump, lp_piece};
use crate::error::{LabError, Result};
use crate::grid::{dft_forward, dft_inverse, lp_norm, SampledFunction, Side, TorusGrid};
use crate::multiplier::{hl_maximal, operand_grid};
use crate::norms::localized_piece;
use crate::symbol::{IndexBox, Symbol};
use crate::wavelets::transform::{separable_sum, support_hull, tensor_norm};
use crate::wavelets::{dyadic_resolution, Gender, WaveletCoeffs, WaveletIndex, WaveletSystem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Subclass label: genders plus the residues of the shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Kappa {
    pub gender: [Gender; 2],
    pub residue: [i64; 2],
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}:{}:{}", self.gender[0], self.gender[1], self.residue[0], self.residue[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubclassPartition {
    pub level: u32,
    /// residue spacing per axis; wavelets in one class are this many
    /// translations apart, more than their support length
    pub modulus: i64,
    pub classes: BTreeMap<Kappa, Vec<(WaveletIndex, Complex64)>>,
    grid: TorusGrid,
}

impl SubclassPartition {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Pairwise disjointness of the open supports inside every class.
    pub fn supports_disjoint(&self, ws: &WaveletSystem) -> bool {
        let width = ws.support_length() as i64;
        self.classes.values().all(|members| {
            members.iter().enumerate().all(|(i, (a, _))| {
                members[i + 1..].iter().all(|(b, _)| {
                    (0..2).any(|ax| (a.shift[ax] - b.shift[ax]).abs() >= width)
                })
            })
        })
    }
}

/// Level-`level` coefficients grouped by gender and shift residue modulo
/// `support length + 1`.
pub fn partition_subclasses(coeffs: &WaveletCoeffs, level: u32, ws: &WaveletSystem) -> Result<SubclassPartition> {
    if level > coeffs.max_level() {
        return Err(LabError::InvalidParameter(format!(
            "level {level} beyond the analyzed range 0..={}",
            coeffs.max_level()
        )));
    }
    let modulus = ws.support_length() as i64 + 1;
    let mut classes: BTreeMap<Kappa, Vec<(WaveletIndex, Complex64)>> = BTreeMap::new();
    for (idx, a) in coeffs.at_level(level) {
        let kappa = Kappa {
            gender: idx.gender,
            residue: [idx.shift[0].rem_euclid(modulus), idx.shift[1].rem_euclid(modulus)],
        };
        classes.entry(kappa).or_default().push((*idx, *a));
    }
    let part = SubclassPartition {
        level,
        modulus,
        classes,
        grid: *coeffs.grid(),
    };
    if !part.supports_disjoint(ws) {
        return Err(LabError::Contract("subclass members with overlapping supports".into()));
    }
    Ok(part)
}

/// `ceil(2 level / r)`, the top of the dyadic size scale.
pub fn tau_max(level: u32, r: f64) -> u32 {
    (2.0 * level as f64 / r - 1e-12).ceil().max(0.0) as u32
}

/// One member of a split: index, coefficient `a` and `|b| = |a| ||omega||_{L^r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub index: WaveletIndex,
    pub a: Complex64,
    pub b_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetSplit {
    pub level: u32,
    pub kappa: Kappa,
    pub tau: u32,
    pub tau_max: u32,
    /// column threshold `2^(tau r / 2)`
    pub k_threshold: f64,
    /// `l^r` norm of the class's `b`
    pub budget: f64,
    pub r: f64,
    pub members: Vec<SplitEntry>,
    pub heavy: Vec<SplitEntry>,
    pub light: Vec<SplitEntry>,
    /// number of heavy columns
    pub gamma: usize,
}

/// Size cell of `|b|` relative to the budget: `(B 2^-tau, B 2^(1-tau)]` for
/// `tau < tau_max`, everything up to `B 2^(1-tau_max)` for `tau_max`.
pub fn size_cell(b_abs: f64, budget: f64, tmax: u32) -> u32 {
    for tau in 0..tmax {
        let lo = budget * 2f64.powi(-(tau as i32));
        if b_abs > lo {
            return tau;
        }
    }
    tmax
}

/// Members of class `kappa` in size cell `tau`, split into heavy columns (a
/// first shift shared by at least `K` members) and the rest.
pub fn level_set_split(
    partition: &SubclassPartition,
    kappa: &Kappa,
    tau: u32,
    r: f64,
    ws: &WaveletSystem,
) -> Result<LevelSetSplit> {
    crate::grid::check_exponent(r)?;
    let level = partition.level;
    let tmax = tau_max(level, r);
    if tau > tmax {
        return Err(LabError::InvalidParameter(format!("tau {tau} above tau_max {tmax}")));
    }
    let k_threshold = 2f64.powf(tau as f64 * r / 2.0);
    let class = partition.classes.get(kappa).map(Vec::as_slice).unwrap_or(&[]);
    let norm = if class.is_empty() {
        0.0
    } else {
        tensor_norm(ws, &class[0].0, r, &partition.grid)?
    };
    let all: Vec<SplitEntry> = class
        .iter()
        .map(|(index, a)| SplitEntry {
            index: *index,
            a: *a,
            b_abs: a.norm() * norm,
        })
        .collect();
    let budget = all.iter().map(|e| e.b_abs.powf(r)).sum::<f64>().powf(1.0 / r);
    let members: Vec<SplitEntry> = all
        .into_iter()
        .filter(|e| e.b_abs > 0.0 && size_cell(e.b_abs, budget, tmax) == tau)
        .collect();
    let mut columns: BTreeMap<i64, usize> = BTreeMap::new();
    for e in &members {
        *columns.entry(e.index.shift[0]).or_default() += 1;
    }
    let heavy_cols: Vec<i64> = columns
        .iter()
        .filter(|(_, n)| **n as f64 >= k_threshold)
        .map(|(k, _)| *k)
        .collect();
    let (heavy, light): (Vec<_>, Vec<_>) = members
        .iter()
        .partition(|e| heavy_cols.contains(&e.index.shift[0]));
    Ok(LevelSetSplit {
        level,
        kappa: *kappa,
        tau,
        tau_max: tmax,
        k_threshold,
        budget,
        r,
        members,
        heavy,
        light,
        gamma: heavy_cols.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Heavy,
    Light,
    All,
}

impl LevelSetSplit {
    pub fn entries(&self, which: Which) -> Vec<(WaveletIndex, Complex64)> {
        let set = match which {
            Which::Heavy => &self.heavy,
            Which::Light => &self.light,
            Which::All => &self.members,
        };
        set.iter().map(|e| (e.index, e.a)).collect()
    }
}

/// `sum b omega~` over the chosen part, with `omega~` the `L^r`-normalized
/// wavelet; equal to `sum a omega`. Sampled on `target`, or on the hull of
/// the supports.
pub fn reconstruct_piece(
    split: &LevelSetSplit,
    which: Which,
    ws: &WaveletSystem,
    grid: &TorusGrid,
    target: Option<IndexBox>,
) -> Result<Symbol> {
    let entries = split.entries(which);
    synthesize_entries(&entries, ws, grid, target)
}

pub fn synthesize_entries(
    entries: &[(WaveletIndex, Complex64)],
    ws: &WaveletSystem,
    grid: &TorusGrid,
    target: Option<IndexBox>,
) -> Result<Symbol> {
    let target = match target {
        Some(t) => t,
        None => support_hull(ws, grid, entries.iter().map(|(k, _)| k))?,
    };
    let values = separable_sum(ws, grid, target, entries, false)?;
    Symbol::new(*grid, target, values)
}

/// Unit-`L^2` operand whose spectrum is complex Gaussian noise under a smooth
/// window of the given radius.
pub fn random_test_function(grid: &TorusGrid, radius: f64, seed: u64) -> Result<SampledFunction> {
    if grid.dim() != 1 {
        return Err(LabError::Dimension("test functions live on a line".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.points())
        .map(|j| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * exp_bump(grid.frequency(j) / radius)
        })
        .collect();
    let spec = SampledFunction::new(*grid, values, Side::Frequency)?;
    let f = dft_inverse(&spec)?;
    let n = lp_norm(&f, 2.0)?;
    if n == 0.0 {
        return Err(LabError::InvalidParameter("window holds no frequency bin".into()));
    }
    Ok(f.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// Evaluates `T` for wavelet expansions separably:
/// `T(f, g) = sum a (psi_k f^)v (psi_l g^)v`, caching the factors.
pub struct PieceEvaluator<'a> {
    ws: &'a WaveletSystem,
    symbol_grid: TorusGrid,
    line: TorusGrid,
    operand: TorusGrid,
    spectra: [SampledFunction; 2],
    ranges: [(i64, i64); 2],
    cache: HashMap<(usize, Gender, u32, i64), Option<Vec<Complex64>>>,
}

impl<'a> PieceEvaluator<'a> {
    pub fn new(ws: &'a WaveletSystem, symbol_grid: &TorusGrid, f: &SampledFunction, g: &SampledFunction) -> Result<Self> {
        let operand = operand_grid(symbol_grid)?;
        let mut spectra = Vec::with_capacity(2);
        let mut ranges = [(0, -1); 2];
        for (i, h) in [f, g].into_iter().enumerate() {
            h.expect_side(Side::Space)?;
            if h.grid().points() != operand.points() || (h.grid().length() - operand.length()).abs() > 1e-9 * operand.length() {
                return Err(LabError::Dimension(format!("operand on {:?}, expected {operand:?}", h.grid())));
            }
            let s = dft_forward(h)?;
            let nz: Vec<i64> = s
                .values()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != ZERO)
                .map(|(j, _)| operand.centered(j))
                .collect();
            if let (Some(lo), Some(hi)) = (nz.iter().min(), nz.iter().max()) {
                ranges[i] = (*lo, *hi);
            }
            spectra.push(s);
        }
        let g_spec = spectra.pop().unwrap();
        let f_spec = spectra.pop().unwrap();
        Ok(Self {
            ws,
            symbol_grid: *symbol_grid,
            line: symbol_grid.with_dim(1)?,
            operand,
            spectra: [f_spec, g_spec],
            ranges,
            cache: HashMap::new(),
        })
    }

    pub fn operand(&self) -> &TorusGrid {
        &self.operand
    }

    /// `(psi f^)v` for the wavelet factor on axis `slot`; `None` when it misses
    /// the operand spectrum.
    fn factor(&mut self, slot: usize, gender: Gender, level: u32, shift: i64) -> Result<Option<Vec<Complex64>>> {
        let key = (slot, gender, level, shift);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let (lo, hi) = self.ranges[slot];
        let samples = self.ws.line_samples(gender, level, shift, &self.line)?;
        let hits = samples.restricted(&self.line, lo, hi);
        let value = if hits.is_empty() {
            None
        } else {
            let mut spec = SampledFunction::zeros(self.operand, Side::Frequency);
            let half = self.operand.half() as i64;
            let src = self.spectra[slot].values();
            let dst = spec.values_mut();
            for (off, w) in hits {
                let j = (lo + off as i64 + half) as usize;
                dst[j] = src[j] * w;
            }
            Some(dft_inverse(&spec)?.into_values())
        };
        self.cache.insert(key, value.clone());
        Ok(value)
    }

    pub fn evaluate(&mut self, entries: &[(WaveletIndex, Complex64)]) -> Result<SampledFunction> {
        let mut out = vec![ZERO; self.operand.points()];
        for (idx, a) in entries {
            if *a == ZERO {
                continue;
            }
            let Some(u) = self.factor(0, idx.gender[0], idx.level, idx.shift[0])? else { continue };
            let Some(v) = self.factor(1, idx.gender[1], idx.level, idx.shift[1])? else { continue };
            for ((o, x), y) in out.iter_mut().zip(&u).zip(&v) {
                *o += a * x * y;
            }
        }
        SampledFunction::new(self.operand, out, Side::Space)
    }

    /// `sum_k a (psi_k f^)v` for a first-slot expansion at fixed second shift.
    fn linear(&mut self, entries: &[(WaveletIndex, Complex64)]) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.operand.points()];
        for (idx, a) in entries {
            if let Some(u) = self.factor(0, idx.gender[0], idx.level, idx.shift[0])? {
                for (o, x) in out.iter_mut().zip(&u) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    pub fn symbol_grid(&self) -> &TorusGrid {
        &self.symbol_grid
    }
}

/// Measured constants of the row, column and combined estimates for one
/// `(level, kappa, tau)` cell. Ratios with a zero numerator are 0; a zero
/// denominator under a nonzero numerator marks the record degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub lambda: u32,
    pub kappa: String,
    pub tau: u32,
    pub gamma: usize,
    #[serde(rename = "K")]
    pub k_threshold: f64,
    pub ratio_rows: f64,
    pub ratio_cols: f64,
    pub ratio_imp: f64,
    pub t_heavy: f64,
    pub t_light: f64,
    pub degenerate: bool,
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 || !den.is_finite() {
        *degenerate = true;
        f64::NAN
    } else {
        num / den
    }
}

/// Operator sizes of the heavy and light parts against
/// `||sigma||_{L^r_s} 2^(lambda(2/r - s))` times `gamma^(1/2) 2^-tau`,
/// `K^(1/2) 2^-tau`, and `2^((r/4 - 1) tau)` respectively.
pub fn verify_piece_bounds(
    split: &LevelSetSplit,
    eval: &mut PieceEvaluator,
    sigma_norm: f64,
    s: f64,
) -> Result<RatioRecord> {
    let r = split.r;
    let t_heavy = lp_norm(&eval.evaluate(&split.entries(Which::Heavy))?, 1.0)?;
    let t_light = lp_norm(&eval.evaluate(&split.entries(Which::Light))?, 1.0)?;
    let base = sigma_norm * 2f64.powf(split.level as f64 * (2.0 / r - s));
    let tau = split.tau as f64;
    let mut degenerate = false;
    let ratio_rows = ratio(t_heavy, base * (split.gamma as f64).sqrt() * 2f64.powf(-tau), &mut degenerate);
    let ratio_cols = ratio(t_light, base * split.k_threshold.sqrt() * 2f64.powf(-tau), &mut degenerate);
    let ratio_imp = ratio(t_heavy + t_light, base * 2f64.powf((r / 4.0 - 1.0) * tau), &mut degenerate);
    Ok(RatioRecord {
        lambda: split.level,
        kappa: split.kappa.to_string(),
        tau: split.tau,
        gamma: split.gamma,
        k_threshold: split.k_threshold,
        ratio_rows,
        ratio_cols,
        ratio_imp,
        t_heavy,
        t_light,
        degenerate,
    })
}

/// Every `(kappa, tau)` record at one level, in sorted order.
pub fn level_records(
    coeffs: &WaveletCoeffs,
    level: u32,
    ws: &WaveletSystem,
    eval: &mut PieceEvaluator,
    sigma_norm: f64,
    r: f64,
    s: f64,
) -> Result<Vec<RatioRecord>> {
    let part = partition_subclasses(coeffs, level, ws)?;
    let mut out = Vec::new();
    for kappa in part.classes.keys() {
        for tau in 0..=tau_max(level, r) {
            let split = level_set_split(&part, kappa, tau, r, ws)?;
            if split.members.is_empty() {
                continue;
            }
            out.push(verify_piece_bounds(&split, eval, sigma_norm, s)?);
        }
    }
    Ok(out)
}

/// `max_kappa B_kappa / (||sigma||_{L^r_s} 2^(-s lambda))`.
pub fn budget_ratio(partition: &SubclassPartition, ws: &WaveletSystem, r: f64, s: f64, sigma_norm: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kappa in partition.classes.keys() {
        let split = level_set_split(partition, kappa, 0, r, ws)?;
        worst = worst.max(split.budget);
    }
    Ok(worst / (sigma_norm * 2f64.powf(-s * partition.level as f64)))
}

/// `sigma(2^j zeta) psi^(zeta)` sampled exactly: on the same grid by
/// subsampling when `j >= 0`, on the grid of spacing `2^-j` times larger
/// otherwise.
pub fn localize_dilate(sigma: &Symbol, j: i32) -> Result<Symbol> {
    if j < 0 {
        return localized_piece(sigma, j);
    }
    let grid = *sigma.grid();
    let d = sigma.spacing();
    let step = 1i64 << j;
    let b = sigma.support();
    let annulus = IndexBox::from_coordinates(&grid, [[-2.0, 2.0]; 2]);
    let target = IndexBox::new(
        [b.lo[0].div_euclid(step) + i64::from(b.lo[0].rem_euclid(step) != 0), b.lo[1].div_euclid(step) + i64::from(b.lo[1].rem_euclid(step) != 0)],
        [b.hi[0].div_euclid(step), b.hi[1].div_euclid(step)],
    )
    .intersect(&annulus);
    let values = target
        .iter()
        .map(|k| sigma.get([k[0] * step, k[1] * step]) * lp_piece(0, [k[0] as f64 * d, k[1] as f64 * d]))
        .collect();
    Symbol::new(grid, target, values)
}

/// Level-`level` part of a symbol split by distance of the wavelet supports to
/// the axes: `parts[1]` near `eta = 0`, `parts[2]` near `xi = 0` (and not near
/// `eta = 0`), `parts[0]` the rest. A translation `l` is near when the support
/// centre `(l + p - 1/2) 2^-level` lies within one support length of 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSplit {
    pub j: i32,
    pub level: u32,
    /// `2p - 1` in units of `2^-level`
    pub reach: f64,
    pub parts: [Vec<(WaveletIndex, Complex64)>; 3],
    pub pieces: [Symbol; 3],
}

pub fn near_axis(shift: i64, order: usize) -> bool {
    let p = order as f64;
    (shift as f64 + p - 0.5).abs() <= 2.0 * p - 1.0
}

pub fn axis_split(coeffs: &WaveletCoeffs, ws: &WaveletSystem, level: u32, j: i32) -> Result<AxisSplit> {
    let grid = *coeffs.grid();
    dyadic_resolution(&grid)?;
    let mut parts: [Vec<(WaveletIndex, Complex64)>; 3] = Default::default();
    for (idx, a) in coeffs.at_level(level) {
        let slot = if near_axis(idx.shift[1], ws.order()) {
            1
        } else if near_axis(idx.shift[0], ws.order()) {
            2
        } else {
            0
        };
        parts[slot].push((*idx, *a));
    }
    let all: Vec<&WaveletIndex> = parts.iter().flatten().map(|(k, _)| k).collect();
    let target = support_hull(ws, &grid, all.into_iter())?;
    let pieces = [
        synthesize_entries(&parts[0], ws, &grid, Some(target))?,
        synthesize_entries(&parts[1], ws, &grid, Some(target))?,
        synthesize_entries(&parts[2], ws, &grid, Some(target))?,
    ];
    Ok(AxisSplit {
        j,
        level,
        reach: 2.0 * ws.order() as f64 - 1.0,
        parts,
        pieces,
    })
}

/// `max_x |T_{m2}(f, g)(x)| / (2^((2/r - s) level) sum_l |T_{m_l} f(x)| Mg(x))`,
/// where `m_l` is the first-slot expansion at second shift `l`. Points where
/// the denominator is below `1e-9` of its maximum are skipped.
pub fn domination_ratio(
    split: &AxisSplit,
    eval: &mut PieceEvaluator,
    g: &SampledFunction,
    r: f64,
    s: f64,
) -> Result<f64> {
    let near = &split.parts[1];
    if near.is_empty() {
        return Ok(0.0);
    }
    let lhs = eval.evaluate(near)?;
    let mut columns: BTreeMap<(Gender, i64), Vec<(WaveletIndex, Complex64)>> = BTreeMap::new();
    for (idx, a) in near {
        columns.entry((idx.gender[1], idx.shift[1])).or_default().push((*idx, *a));
    }
    let mut lin = vec![0.0f64; eval.operand().points()];
    for entries in columns.values() {
        for (acc, v) in lin.iter_mut().zip(eval.linear(entries)?) {
            *acc += v.norm();
        }
    }
    let mg = hl_maximal(g)?;
    let scale = 2f64.powf((2.0 / r - s) * split.level as f64);
    let den: Vec<f64> = lin.iter().zip(mg.values()).map(|(l, m)| scale * l * m.re).collect();
    let top = den.iter().copied().fold(0.0, f64::max);
    Ok(lhs
        .values()
        .iter()
        .zip(&den)
        .filter(|(_, d)| **d > 1e-9 * top)
        .map(|(v, d)| v.norm() / d)
        .fold(0.0, f64::max))
}

/// Energy of `f` split into the widened bands `2^(j-level-1) <= |xi| < 2^(j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub level: u32,
    pub band_energy: BTreeMap<i32, f64>,
    pub total: f64,
    pub energy: f64,
    pub max_multiplicity: usize,
}

pub fn widened_bands(f: &SampledFunction, level: u32, jrange: std::ops::RangeInclusive<i32>) -> Result<BandReport> {
    let spec = dft_forward(f)?;
    let grid = *spec.grid();
    if grid.dim() != 1 {
        return Err(LabError::Dimension("band counting on a line".into()));
    }
    let cell = grid.frequency_cell();
    let inside = |j: i32, xi: f64| {
        let a = xi.abs();
        a >= 2f64.powi(j - level as i32 - 1) && a < 2f64.powi(j + 1)
    };
    let mut band_energy = BTreeMap::new();
    for j in jrange.clone() {
        let e: f64 = spec
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| inside(j, grid.frequency(*i)))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        band_energy.insert(j, e * cell);
    }
    let max_multiplicity = (0..grid.points())
        .map(|i| jrange.clone().filter(|j| inside(*j, grid.frequency(i))).count())
        .max()
        .unwrap_or(0);
    Ok(BandReport {
        level,
        total: band_energy.values().sum(),
        band_energy,
        energy: lp_norm(f, 2.0)?.powi(2),
        max_multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{lab_grid, multiscale_bump, smooth_family};
    use crate::multiplier::apply_bilinear;
    use crate::wavelets::{analyze, genders_at};
    use rand::Rng;

    fn random_coeffs(grid: TorusGrid, level: u32, seed: u64) -> WaveletCoeffs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 2i64 << level;
        let n = rng.gen_range(5..400);
        let entries = (0..n).map(|_| {
            let gs = genders_at(level);
            let idx = WaveletIndex {
                level,
                gender: gs[rng.gen_range(0..gs.len())],
                shift: [rng.gen_range(-span..span), rng.gen_range(-span..span)],
            };
            let mag = 10f64.powf(rng.gen_range(-4.0..0.0));
            (idx, Complex64::from_polar(mag, rng.gen_range(0.0..6.0)))
        });
        WaveletCoeffs::new(grid, 6, level, entries.collect()).unwrap()
    }

    #[test]
    fn subclass_moduli() {
        let grid = lab_grid(6).unwrap();
        let haar = WaveletSystem::new(1, 8).unwrap();
        let c = random_coeffs(grid, 2, 1);
        let p = partition_subclasses(&c, 2, &haar).unwrap();
        assert_eq!(p.modulus, 2);
        assert!(p.classes.len() <= 4 * 3);
        let ws = WaveletSystem::new(6, 10).unwrap();
        let p = partition_subclasses(&c, 2, &ws).unwrap();
        assert_eq!(p.modulus, 12);
        assert!(p.supports_disjoint(&ws));
        let mut seen: Vec<WaveletIndex> = p.classes.values().flatten().map(|(k, _)| *k).collect();
        seen.sort();
        let all: Vec<WaveletIndex> = c.at_level(2).map(|(k, _)| *k).collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn level_sets_partition_and_bound_gamma() {
        let grid = lab_grid(6).unwrap();
        let ws = WaveletSystem::new(6, 10).unwrap();
        let r = 4.0;
        for trial in 0..100u64 {
            let level = 1 + (trial % 4) as u32;
            let c = random_coeffs(grid, level, 100 + trial);
            let p = partition_subclasses(&c, level, &ws).unwrap();
            for (kappa, class) in &p.classes {
                let mut count = 0;
                for tau in 0..=tau_max(level, r) {
                    let s = level_set_split(&p, kappa, tau, r, &ws).unwrap();
                    count += s.members.len();
                    assert_eq!(s.heavy.len() + s.light.len(), s.members.len());
                    assert!(s.gamma as f64 <= 4.0 * 2f64.powf(tau as f64 * r / 2.0));
                    let mut cols: BTreeMap<i64, usize> = BTreeMap::new();
                    for e in &s.light {
                        *cols.entry(e.index.shift[0]).or_default() += 1;
                    }
                    assert!(cols.values().all(|n| (*n as f64) < s.k_threshold));
                    for e in &s.members {
                        let hi = s.budget * 2f64.powi(1 - tau as i32);
                        assert!(e.b_abs <= hi * (1.0 + 1e-12));
                        if tau < s.tau_max {
                            assert!(e.b_abs > s.budget * 2f64.powi(-(tau as i32)));
                        }
                    }
                }
                assert_eq!(count, class.len());
            }
        }
    }

    #[test]
    fn one_coefficient_lands_in_the_first_cell() {
        let grid = lab_grid(6).unwrap();
        let ws = WaveletSystem::new(3, 10).unwrap();
        let idx = WaveletIndex::new(2, [Gender::M, Gender::M], [1, 2]).unwrap();
        let c = WaveletCoeffs::new(grid, 3, 2, [(idx, Complex64::new(0.0, -2.0))].into()).unwrap();
        let p = partition_subclasses(&c, 2, &ws).unwrap();
        let kappa = *p.classes.keys().next().unwrap();
        assert!(level_set_split(&p, &kappa, 0, 2.0, &ws).unwrap().members.is_empty());
        let s = level_set_split(&p, &kappa, 1, 2.0, &ws).unwrap();
        assert_eq!(s.members.len(), 1);
        assert!((s.members[0].b_abs - s.budget).abs() < 1e-15);
        let piece = reconstruct_piece(&s, Which::All, &ws, &grid, None).unwrap();
        let tilde = piece.scaled(Complex64::new(1.0 / s.budget, 0.0));
        assert!((tilde.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-6);
        let empty = level_set_split(&p, &kappa, 2, 2.0, &ws).unwrap();
        assert_eq!(empty.gamma, 0);
        assert_eq!(reconstruct_piece(&empty, Which::Heavy, &ws, &grid, None).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pieces_telescope_to_the_level() {
        let grid = lab_grid(6).unwrap();
        let ws = WaveletSystem::new(6, 10).unwrap();
        let sigma = multiscale_bump(&grid, 0.3, 3).unwrap();
        let c = analyze(&sigma, &ws, 2).unwrap();
        let p = partition_subclasses(&c, 2, &ws).unwrap();
        let target = support_hull(&ws, &grid, c.at_level(2).map(|(k, _)| k)).unwrap();
        let whole = synthesize_entries(&c.at_level(2).map(|(k, v)| (*k, *v)).collect::<Vec<_>>(), &ws, &grid, Some(target)).unwrap();
        let mut sum = Symbol::new(grid, target, vec![ZERO; target.len()]).unwrap();
        for kappa in p.classes.keys() {
            for tau in 0..=tau_max(2, 3.0) {
                let s = level_set_split(&p, kappa, tau, 3.0, &ws).unwrap();
                for which in [Which::Heavy, Which::Light] {
                    sum = sum.add(&reconstruct_piece(&s, which, &ws, &grid, Some(target)).unwrap()).unwrap();
                }
            }
        }
        assert!(sum.relative_error(&whole).unwrap() < 1e-12);
    }

    #[test]
    fn evaluator_matches_the_operator() {
        let grid = lab_grid(5).unwrap();
        let ws = WaveletSystem::new(4, 10).unwrap();
        let sigma = &smooth_family(&grid).unwrap()[1];
        let c = analyze(sigma, &ws, 1).unwrap();
        let op = operand_grid(&grid).unwrap();
        let f = random_test_function(&op, 1.5, 1).unwrap();
        let g = random_test_function(&op, 1.5, 2).unwrap();
        let entries: Vec<_> = c.iter().map(|(k, v)| (*k, *v)).collect();
        let mut eval = PieceEvaluator::new(&ws, &grid, &f, &g).unwrap();
        let fast = eval.evaluate(&entries).unwrap();
        // the operands only see the window |xi| < 1.5
        let window = IndexBox::from_coordinates(&grid, [[-1.5, 1.5]; 2]);
        let piece = synthesize_entries(&entries, &ws, &grid, Some(window)).unwrap();
        let direct = apply_bilinear(&piece, &f, &g).unwrap();
        assert!(fast.relative_error(&direct) < 1e-10, "{}", fast.relative_error(&direct));
        let zero = eval.evaluate(&[]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn cauchy_schwarz_for_one_pair() {
        let grid = TorusGrid::square(32.0, 64).unwrap(); // spacing 1/2
        let ws = WaveletSystem::new(1, 6).unwrap();
        let op = operand_grid(&grid).unwrap();
        let f = random_test_function(&op, 6.0, 5).unwrap();
        let g = random_test_function(&op, 6.0, 6).unwrap();
        let idx = WaveletIndex::new(1, [Gender::M, Gender::F], [1, -2]).unwrap();
        let b = Complex64::new(0.8, 0.1);
        let mut eval = PieceEvaluator::new(&ws, &grid, &f, &g).unwrap();
        let t = lp_norm(&eval.evaluate(&[(idx, b)]).unwrap(), 1.0).unwrap();
        let u = eval.factor(0, Gender::M, 1, 1).unwrap().unwrap();
        let v = eval.factor(1, Gender::F, 1, -2).unwrap().unwrap();
        let l2 = |w: &[Complex64]| (op.cell() * w.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
        let bound = b.norm() * l2(&u) * l2(&v);
        assert!(t <= bound * (1.0 + 1e-12) && t > 1e-3 * bound, "{t} {bound}");
    }

    #[test]
    fn zero_symbol_gives_zero_ratios() {
        let grid = lab_grid(5).unwrap();
        let ws = WaveletSystem::new(6, 10).unwrap();
        let c = analyze(&Symbol::zero(grid).unwrap(), &ws, 1).unwrap();
        let op = operand_grid(&grid).unwrap();
        let f = random_test_function(&op, 2.0, 1).unwrap();
        let mut eval = PieceEvaluator::new(&ws, &grid, &f, &f).unwrap();
        assert!(level_records(&c, 1, &ws, &mut eval, 1.0, 2.0, 0.75).unwrap().is_empty());
        let p = partition_subclasses(&c, 1, &ws).unwrap();
        let split = level_set_split(&p, &Kappa { gender: [Gender::F, Gender::M], residue: [0, 0] }, 0, 2.0, &ws).unwrap();
        let rec = verify_piece_bounds(&split, &mut eval, 1.0, 0.75).unwrap();
        assert_eq!((rec.ratio_rows, rec.ratio_cols, rec.ratio_imp), (0.0, 0.0, 0.0));
        assert!(!rec.degenerate);
    }

    #[test]
    fn axis_pieces_sum_exactly() {
        let grid = lab_grid(6).unwrap();
        let ws = WaveletSystem::new(6, 10).unwrap();
        let sigma = multiscale_bump(&grid, 0.3, 3).unwrap();
        let m = localize_dilate(&sigma, 1).unwrap();
        let c = analyze(&m, &ws, 4).unwrap();
        let split = axis_split(&c, &ws, 4, 1).unwrap();
        let target = *split.pieces[0].support();
        let entries: Vec<_> = c.at_level(4).map(|(k, v)| (*k, *v)).collect();
        let whole = synthesize_entries(&entries, &ws, &grid, Some(target)).unwrap();
        let sum = split.pieces[0].add(&split.pieces[1]).unwrap().add(&split.pieces[2]).unwrap();
        assert!(sum.relative_error(&whole).unwrap() < 1e-12);
        assert!(split.parts.iter().all(|p| !p.is_empty()));
    }

    #[test]
    fn away_from_axes_only_the_remainder_survives() {
        // Haar at level 1: near translations are supported in [-1/2, 1/2]
        let grid = lab_grid(5).unwrap();
        let ws = WaveletSystem::new(1, 8).unwrap();
        let b = IndexBox::from_coordinates(&grid, [[-2.0, 2.0]; 2]);
        let sigma = Symbol::from_fn(grid, b, |x, y| {
            let r = x.hypot(y);
            let off = x.abs() > 0.5 && y.abs() > 0.5;
            Complex64::new(if off { exp_bump((r - 1.5) / 0.6) } else { 0.0 }, 0.0)
        })
        .unwrap();
        let c = analyze(&sigma, &ws, 1).unwrap();
        let split = axis_split(&c, &ws, 1, 0).unwrap();
        assert!(split.pieces[1].max_abs() < 1e-14 && split.pieces[2].max_abs() < 1e-14);
        assert!(split.pieces[0].max_abs() > 0.0);
    }

    #[test]
    fn localize_dilate_is_exact() {
        let grid = lab_grid(5).unwrap();
        let sigma = &smooth_family(&grid).unwrap()[0];
        let direct = |j: i32, x: f64, y: f64| {
            let s = 2f64.powi(j);
            let d = sigma.spacing();
            let k = [(x * s / d).round() as i64, (y * s / d).round() as i64];
            sigma.get(k) * lp_piece(0, [x, y])
        };
        for j in [-1, 0, 1] {
            let m = localize_dilate(sigma, j).unwrap();
            for (k, v) in m.iter().step_by(97) {
                let (x, y) = (k[0] as f64 * m.spacing(), k[1] as f64 * m.spacing());
                assert!((v - direct(j, x, y)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn widened_bands_count() {
        let op = TorusGrid::line(64.0, 2048).unwrap();
        let f = random_test_function(&op, 12.0, 9).unwrap();
        for level in 0..4u32 {
            let rep = widened_bands(&f, level, -8..=6).unwrap();
            assert_eq!(rep.max_multiplicity, level as usize + 2);
            assert!(rep.total <= (level as f64 + 2.0) * rep.energy * (1.0 + 1e-12));
        }
    }
}
