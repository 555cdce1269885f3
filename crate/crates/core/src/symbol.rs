//! Multiplier symbols on a planar grid, stored on a rectangle of indices that
//! contains every nonzero sample.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{SampledFunction, Side, TorusGrid};

/// Inclusive rectangle of centered indices `lo[a] ..= hi[a]` per axis. Empty
/// when `lo > hi` on some axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl IndexBox {
    pub fn new(lo: [i64; 2], hi: [i64; 2]) -> Self {
        Self { lo, hi }
    }

    pub fn empty() -> Self {
        Self {
            lo: [0, 0],
            hi: [-1, -1],
        }
    }

    pub fn full(grid: &TorusGrid) -> Self {
        let h = grid.half() as i64;
        Self {
            lo: [-h, -h],
            hi: [h - 1, h - 1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hi[0] < self.lo[0] || self.hi[1] < self.lo[1]
    }

    pub fn extent(&self, axis: usize) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.hi[axis] - self.lo[axis] + 1) as usize
        }
    }

    pub fn len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn contains(&self, k: [i64; 2]) -> bool {
        (0..2).all(|a| k[a] >= self.lo[a] && k[a] <= self.hi[a])
    }

    pub fn intersect(&self, other: &IndexBox) -> IndexBox {
        let b = IndexBox {
            lo: [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])],
            hi: [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])],
        };
        if b.is_empty() {
            IndexBox::empty()
        } else {
            b
        }
    }

    pub fn hull(&self, other: &IndexBox) -> IndexBox {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        IndexBox {
            lo: [self.lo[0].min(other.lo[0]), self.lo[1].min(other.lo[1])],
            hi: [self.hi[0].max(other.hi[0]), self.hi[1].max(other.hi[1])],
        }
    }

    pub fn grow(&self, by: i64) -> IndexBox {
        if self.is_empty() {
            return *self;
        }
        IndexBox {
            lo: [self.lo[0] - by, self.lo[1] - by],
            hi: [self.hi[0] + by, self.hi[1] + by],
        }
    }

    /// Offset of index `k` in row-major storage over the box.
    pub fn offset(&self, k: [i64; 2]) -> usize {
        (k[0] - self.lo[0]) as usize * self.extent(1) + (k[1] - self.lo[1]) as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        let empty = self.is_empty();
        (lo[0]..=hi[0])
            .flat_map(move |a| (lo[1]..=hi[1]).map(move |b| [a, b]))
            .filter(move |_| !empty)
    }

    /// Indices whose coordinates `k * spacing` lie in `[a, b]` per axis,
    /// clipped to the grid.
    pub fn from_coordinates(grid: &TorusGrid, rect: [[f64; 2]; 2]) -> IndexBox {
        let h = grid.half() as i64;
        let d = grid.spacing();
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for a in 0..2 {
            lo[a] = ((rect[a][0] / d - 1e-9).ceil() as i64).max(-h);
            hi[a] = ((rect[a][1] / d + 1e-9).floor() as i64).min(h - 1);
        }
        let b = IndexBox { lo, hi };
        if b.is_empty() {
            IndexBox::empty()
        } else {
            b
        }
    }

    pub fn within(&self, grid: &TorusGrid) -> bool {
        self.is_empty() || IndexBox::full(grid).intersect(self) == *self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    grid: TorusGrid,
    support: IndexBox,
    values: Vec<Complex64>,
}

impl Symbol {
    pub fn new(grid: TorusGrid, support: IndexBox, values: Vec<Complex64>) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(LabError::Dimension("symbols live on planar grids".into()));
        }
        if !support.within(&grid) {
            return Err(LabError::Dimension(format!(
                "support box {support:?} leaves the grid"
            )));
        }
        if values.len() != support.len() {
            return Err(LabError::Dimension(format!(
                "support box holds {} samples, got {}",
                support.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            support,
            values,
        })
    }

    pub fn zero(grid: TorusGrid) -> Result<Self> {
        Self::new(grid, IndexBox::empty(), Vec::new())
    }

    /// Samples `f(xi, eta)` at every grid point in `support`.
    pub fn from_fn<F>(grid: TorusGrid, support: IndexBox, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let d = grid.spacing();
        let values = support
            .iter()
            .map(|k| f(k[0] as f64 * d, k[1] as f64 * d))
            .collect();
        Self::new(grid, support, values)
    }

    /// Wraps a full planar sample array. With `declared` set, every sample
    /// outside that box must vanish.
    pub fn from_dense(f: &SampledFunction, declared: Option<IndexBox>) -> Result<Self> {
        let grid = *f.grid();
        if grid.dim() != 2 {
            return Err(LabError::Dimension("symbols live on planar grids".into()));
        }
        let support = declared.unwrap_or_else(|| IndexBox::full(&grid));
        let m = grid.points();
        let mut values = Vec::with_capacity(support.len());
        for (n, v) in f.values().iter().enumerate() {
            let k = [grid.centered(n / m), grid.centered(n % m)];
            if !support.contains(k) && *v != Complex64::new(0.0, 0.0) {
                return Err(LabError::Contract(format!(
                    "nonzero sample at {k:?} outside the declared support {support:?}"
                )));
            }
        }
        for k in support.iter() {
            values.push(f.values()[grid.wrap(k[0]) * m + grid.wrap(k[1])]);
        }
        Self::new(grid, support, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn support(&self) -> &IndexBox {
        &self.support
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn get(&self, k: [i64; 2]) -> Complex64 {
        if self.support.contains(k) {
            self.values[self.support.offset(k)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.support.iter().zip(self.values.iter().copied())
    }

    /// Full planar samples, tagged as a spatial function of the symbol's own
    /// variables.
    pub fn to_sampled(&self) -> SampledFunction {
        let m = self.grid.points();
        let mut out = SampledFunction::zeros(self.grid, Side::Space);
        let vals = out.values_mut();
        for (k, v) in self.iter() {
            vals[self.grid.wrap(k[0]) * m + self.grid.wrap(k[1])] = v;
        }
        out
    }

    /// Copy onto a different box of the same grid; samples outside `target`
    /// must vanish.
    pub fn reboxed(&self, target: IndexBox) -> Result<Symbol> {
        if !target.within(&self.grid) {
            return Err(LabError::Dimension("target box leaves the grid".into()));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); target.len()];
        for (k, v) in self.iter() {
            if target.contains(k) {
                values[target.offset(k)] = v;
            } else if v != Complex64::new(0.0, 0.0) {
                return Err(LabError::Contract(format!(
                    "nonzero sample at {k:?} outside {target:?}"
                )));
            }
        }
        Symbol::new(self.grid, target, values)
    }

    /// Smallest box holding the nonzero samples.
    pub fn tight_support(&self) -> IndexBox {
        let mut b = IndexBox::empty();
        for (k, v) in self.iter() {
            if v != Complex64::new(0.0, 0.0) {
                b = b.hull(&IndexBox::new(k, k));
            }
        }
        b
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        if self.grid != other.grid {
            return Err(LabError::Dimension("symbols on different grids".into()));
        }
        let target = self.support.hull(&other.support);
        let mut out = self.reboxed(target)?;
        for (k, v) in other.iter() {
            let o = target.offset(k);
            out.values[o] += v;
        }
        Ok(out)
    }

    pub fn scaled(mut self, c: Complex64) -> Symbol {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Quadrature `L^2` distance to `other` over both supports, relative to
    /// `other`.
    pub fn relative_error(&self, other: &Symbol) -> Result<f64> {
        let target = self.support.hull(&other.support);
        let a = self.reboxed(target)?;
        let b = other.reboxed(target)?;
        Ok(crate::grid::relative_l2(&a.values, &b.values))
    }

    /// `(cell * sum |sigma|^p)^(1/p)` over the stored samples.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        crate::grid::weighted_lp(&self.values, self.grid.cell(), p)
    }

    /// The same samples read on a grid with a different spacing; the values
    /// become those of `zeta -> sigma(zeta * old/new)` on the new grid.
    pub fn reinterpret(&self, length: f64) -> Result<Symbol> {
        let grid = TorusGrid::square(length, self.grid.points())?;
        Symbol::new(grid, self.support, self.values.clone())
    }

    /// Smallest and largest `|zeta|` among nonzero samples, or `None` if the
    /// symbol vanishes.
    pub fn radial_extent(&self) -> Option<(f64, f64)> {
        let d = self.spacing();
        self.iter()
            .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
            .map(|(k, _)| (k[0] as f64 * d).hypot(k[1] as f64 * d))
            .fold(None, |acc, r| match acc {
                None => Some((r, r)),
                Some((lo, hi)) => Some((f64::min(lo, r), f64::max(hi, r))),
            })
    }
}

/// Dense symbol of `m` frequency variables on the lattice of a line grid,
/// for direct evaluation of multilinear operators.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSymbol {
    grid: TorusGrid,
    arity: usize,
    values: Vec<Complex64>,
}

impl MultiSymbol {
    pub const MAX_POINTS_TRILINEAR: usize = 32;
    pub const MAX_POINTS_BILINEAR: usize = 64;

    pub fn new(grid: TorusGrid, arity: usize, values: Vec<Complex64>) -> Result<Self> {
        check_arity(&grid, arity)?;
        if values.len() != grid.points().pow(arity as u32) {
            return Err(LabError::Dimension(format!(
                "{}-linear symbol on {} points needs {} samples, got {}",
                arity,
                grid.points(),
                grid.points().pow(arity as u32),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            arity,
            values,
        })
    }

    /// Samples `f` at every frequency tuple `(k_1/L, ..., k_m/L)` of the
    /// operand grid.
    pub fn from_fn<F>(grid: TorusGrid, arity: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        check_arity(&grid, arity)?;
        let m = grid.points();
        let mut z = vec![0.0; arity];
        let values = (0..m.pow(arity as u32))
            .map(|mut n| {
                for a in (0..arity).rev() {
                    z[a] = grid.frequency(n % m);
                    n /= m;
                }
                f(&z)
            })
            .collect();
        Self::new(grid, arity, values)
    }

    /// The bilinear symbol laid out on the frequency lattice of its operands.
    pub fn from_symbol(sigma: &Symbol) -> Result<Self> {
        let m = sigma.grid().points();
        let grid = sigma.grid().dual()?.with_dim(1)?;
        let mut values = vec![Complex64::new(0.0, 0.0); m * m];
        for (k, v) in sigma.iter() {
            values[grid.wrap(k[0]) * m + grid.wrap(k[1])] = v;
        }
        Self::new(grid, 2, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

fn check_arity(grid: &TorusGrid, arity: usize) -> Result<()> {
    if grid.dim() != 1 {
        return Err(LabError::Dimension(
            "multilinear symbols index the lattice of a line grid".into(),
        ));
    }
    match arity {
        2 if grid.points() <= MultiSymbol::MAX_POINTS_BILINEAR => Ok(()),
        3 if grid.points() <= MultiSymbol::MAX_POINTS_TRILINEAR => Ok(()),
        2 | 3 => Err(LabError::SizeGuard(format!(
            "{}-linear direct evaluation limited to {} points, got {}",
            arity,
            if arity == 2 {
                MultiSymbol::MAX_POINTS_BILINEAR
            } else {
                MultiSymbol::MAX_POINTS_TRILINEAR
            },
            grid.points()
        ))),
        _ => Err(LabError::SizeGuard(format!(
            "only bilinear and trilinear symbols are supported, got arity {arity}"
        ))),
    }
}
