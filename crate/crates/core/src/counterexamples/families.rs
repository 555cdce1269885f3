//! Randomized bump families: signed sums of shifted Fourier-side bumps, the
//! matching multipliers built from plateau bumps, and the single-bump and
//! mixed signed/unsigned variants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::rademacher::{RademacherDraw, SignFamily};
use crate::bumps::{exp_bump, plateau, PLATEAU_INNER, PLATEAU_OUTER, SCHWARTZ_HALFWIDTH};
use crate::error::{LabError, Result};
use crate::grid::{dft_forward, dft_inverse, next_fast_len, SampledFunction, Side, TorusGrid};
use crate::multiplier::apply_mlinear_bruteforce;
use crate::symbol::{IndexBox, MultiSymbol, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How the bumps are resolved on the operand grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bump half-width 1/4 and plateau 1/4..9/20 (units of `1/N`), 16 bins per
    /// `1/N`. All supports stay disjoint and the square of the spatial profile
    /// has spectrum inside `(-1/2, 1/2)`, so norms of the family match the
    /// narrow profile's at a fraction of the cost.
    Widened,
    /// Half-width 1/100 and plateau 1/20..1/10, 400 bins per `1/N`.
    Resolved,
    /// One bin per `1/N` on a 32-point torus of length `N`: every bump is a
    /// single frequency and the operand envelope is constant over one period.
    Collapsed,
}

impl Mode {
    /// `(bump half-width, plateau inner, plateau outer)` in units of `1/N`.
    pub fn profile(self) -> (f64, f64, f64) {
        match self {
            Mode::Widened | Mode::Collapsed => (0.25, 0.25, 0.45),
            Mode::Resolved => (SCHWARTZ_HALFWIDTH, PLATEAU_INNER, PLATEAU_OUTER),
        }
    }

    /// Frequency bins per `1/N`.
    pub fn bins(self) -> i64 {
        match self {
            Mode::Widened => 16,
            Mode::Resolved => 400,
            Mode::Collapsed => 1,
        }
    }

    pub const COLLAPSED_POINTS: usize = 32;
}

/// Operand grid of an instance: torus length `bins * N`, so the bump centred
/// at `j / N` sits on bin `j * bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub mode: Mode,
    pub n: usize,
    pub grid: TorusGrid,
}

impl Layout {
    /// The smallest fast grid holding every bump of `indices` below the
    /// Nyquist frequency (a fixed 32-point torus in collapsed mode).
    pub fn standard(mode: Mode, n: usize, indices: &RangeInclusive<i64>) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParameter("N must be positive".into()));
        }
        let b = mode.bins();
        let length = (b * n as i64) as f64;
        let points = match mode {
            Mode::Collapsed => Mode::COLLAPSED_POINTS,
            _ => {
                let (_, _, outer) = mode.profile();
                let reach = indices.start().abs().max(indices.end().abs());
                let top = reach * b + (outer * b as f64).ceil() as i64;
                let p = next_fast_len(2 * top as usize + 2);
                p + p % 2
            }
        };
        let layout = Self {
            mode,
            n,
            grid: TorusGrid::line(length, points)?,
        };
        layout.check(indices)?;
        Ok(layout)
    }

    pub fn bins(&self) -> i64 {
        self.mode.bins()
    }

    /// Resolution guard: the torus length must put `1/N` on a whole number of
    /// bins, the bump and the plateau transition must each span enough bins,
    /// and (except in collapsed mode) no bump may reach the Nyquist frequency.
    pub fn check(&self, indices: &RangeInclusive<i64>) -> Result<()> {
        let b = self.bins();
        let want = (b * self.n as i64) as f64;
        if (self.grid.length() - want).abs() > 1e-9 * want || self.grid.dim() != 1 {
            return Err(LabError::Resolution {
                what: format!("operand torus length for {:?} mode at N={}", self.mode, self.n),
                required: want,
                actual: self.grid.length(),
            });
        }
        let m = self.grid.points() as i64;
        if self.mode == Mode::Collapsed {
            let span = indices.end() - indices.start() + 1;
            if span > m {
                return Err(LabError::SizeGuard(format!(
                    "{span} single-bin bumps do not fit on {m} points"
                )));
            }
            return Ok(());
        }
        let (halfwidth, inner, outer) = self.mode.profile();
        let bf = b as f64;
        if halfwidth * bf <= 1.0 || (outer - inner) * bf < 2.0 {
            return Err(LabError::Resolution {
                what: "bins per 1/N for the bump and plateau profiles".into(),
                required: (1.0 / halfwidth).max(2.0 / (outer - inner)),
                actual: bf,
            });
        }
        let reach = indices.start().abs().max(indices.end().abs());
        let top = reach * b + (outer * bf).ceil() as i64;
        if top >= m / 2 {
            return Err(LabError::Resolution {
                what: "Nyquist bin above the outermost bump".into(),
                required: top as f64 + 1.0,
                actual: (m / 2) as f64,
            });
        }
        Ok(())
    }

    /// Bins `q` around a bump centre where the profile `halfwidth` is nonzero.
    fn reach(&self, radius: f64) -> i64 {
        if self.mode == Mode::Collapsed {
            0
        } else {
            (radius * self.bins() as f64).ceil() as i64
        }
    }

    /// `phi^(q / bins)`: the Fourier-side bump at offset `q` bins.
    pub fn bump(&self, q: i64) -> f64 {
        let (halfwidth, _, _) = self.mode.profile();
        exp_bump(q as f64 / self.bins() as f64 / halfwidth)
    }

    /// The multiplier plateau at offset `q` bins.
    pub fn plateau(&self, q: i64) -> f64 {
        let (_, inner, outer) = self.mode.profile();
        plateau(q as f64 / self.bins() as f64, inner, outer)
    }

    /// `f^(xi) = sum_j s_j phi^(N xi - j)` sampled on the operand frequency
    /// lattice, transformed to space.
    pub fn bump_sum(&self, coeffs: impl IntoIterator<Item = (i64, f64)>) -> Result<SampledFunction> {
        let (halfwidth, _, _) = self.mode.profile();
        let w = self.reach(halfwidth);
        let b = self.bins();
        let mut spec = SampledFunction::zeros(self.grid, Side::Frequency);
        let vals = spec.values_mut();
        for (j, s) in coeffs {
            for q in -w..=w {
                vals[self.grid.wrap(j * b + q)] += s * self.bump(q);
            }
        }
        dft_inverse(&spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "bilinear_sigmaN")]
    BilinearSigmaN,
    #[serde(rename = "mlinear_sigmaN")]
    MlinearSigmaN,
    #[serde(rename = "single_bump")]
    SingleBump,
    #[serde(rename = "mixed_k")]
    Mixed,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::BilinearSigmaN => "bilinear_sigmaN",
            Family::MlinearSigmaN => "mlinear_sigmaN",
            Family::SingleBump => "single_bump",
            Family::Mixed => "mixed_k",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Family::BilinearSigmaN, Family::MlinearSigmaN, Family::SingleBump, Family::Mixed]
            .into_iter()
            .find(|f| f.name() == s)
    }

    /// Bump indices of the input functions at size `n`.
    pub fn indices(self, n: usize) -> RangeInclusive<i64> {
        let n = n as i64;
        match self {
            Family::BilinearSigmaN | Family::MlinearSigmaN => 1..=n,
            Family::SingleBump => n..=n,
            Family::Mixed => -n..=n,
        }
    }
}

/// `[ceil(9N/10), floor(11N/10)]`: the output indices the multiplier keeps.
pub fn c_window(n: usize) -> (i64, i64) {
    let n = n as i64;
    ((9 * n + 9) / 10, (11 * n) / 10)
}

/// `sigma = sum_t c_t prod_i phi(N xi_i - j_i)` with plateau bumps `phi`;
/// `terms` maps index tuples to coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSymbol {
    pub layout: Layout,
    pub arity: usize,
    pub terms: BTreeMap<Vec<i64>, f64>,
}

impl BumpSymbol {
    fn plateau_reach(&self) -> i64 {
        let (_, _, outer) = self.layout.mode.profile();
        self.layout.reach(outer)
    }

    /// `T(f_1, ..., f_m)` by separation of variables: every term is a product
    /// of one-variable plateau multipliers, so
    /// `T = sum_t c_t prod_i (phi_{j_i} f_i^)^v`.
    pub fn evaluate(&self, fs: &[&SampledFunction]) -> Result<SampledFunction> {
        if fs.len() != self.arity {
            return Err(LabError::Dimension(format!(
                "{}-linear symbol applied to {} functions",
                self.arity,
                fs.len()
            )));
        }
        let grid = self.layout.grid;
        for f in fs {
            f.expect_side(Side::Space)?;
            if *f.grid() != grid {
                return Err(LabError::Dimension("operand off the instance grid".into()));
            }
        }
        let spectra = fs.iter().map(|f| dft_forward(f)).collect::<Result<Vec<_>>>()?;
        let r = self.plateau_reach();
        let b = self.layout.bins();
        let mut pieces: Vec<BTreeMap<i64, Vec<Complex64>>> = vec![BTreeMap::new(); self.arity];
        for idx in self.terms.keys() {
            for (slot, &j) in idx.iter().enumerate() {
                if pieces[slot].contains_key(&j) {
                    continue;
                }
                let mut masked = SampledFunction::zeros(grid, Side::Frequency);
                let src = spectra[slot].values();
                let dst = masked.values_mut();
                for q in -r..=r {
                    let i = grid.wrap(j * b + q);
                    dst[i] += src[i] * self.layout.plateau(q);
                }
                pieces[slot].insert(j, dft_inverse(&masked)?.into_values());
            }
        }
        let mut out = vec![ZERO; grid.points()];
        for (idx, &c) in &self.terms {
            if c == 0.0 {
                continue;
            }
            let mut prod = vec![Complex64::new(c, 0.0); grid.points()];
            for (slot, j) in idx.iter().enumerate() {
                prod.iter_mut().zip(&pieces[slot][j]).for_each(|(p, u)| *p *= u);
            }
            out.iter_mut().zip(&prod).for_each(|(o, p)| *o += p);
        }
        SampledFunction::new(grid, out, Side::Space)
    }

    /// Dense bilinear symbol on `grid` (spacing `1/L`), every bin shifted by
    /// `-shift`.
    pub fn to_symbol_on(&self, grid: TorusGrid, shift: [i64; 2]) -> Result<Symbol> {
        if self.arity != 2 {
            return Err(LabError::Dimension("dense planar symbols are bilinear".into()));
        }
        if (grid.spacing() * self.layout.grid.length() - 1.0).abs() > 1e-9 {
            return Err(LabError::Dimension("symbol grid spacing must be 1/L".into()));
        }
        let r = self.plateau_reach();
        let b = self.layout.bins();
        let support = self.bin_box(shift);
        if !support.within(&grid) {
            return Err(LabError::Margin(format!(
                "bumps span bins {:?}..={:?}, beyond the symbol grid",
                support.lo, support.hi
            )));
        }
        let mut values = vec![ZERO; support.len()];
        for (idx, &c) in &self.terms {
            for q0 in -r..=r {
                let w0 = c * self.layout.plateau(q0);
                for q1 in -r..=r {
                    let k = [idx[0] * b + q0 - shift[0], idx[1] * b + q1 - shift[1]];
                    values[support.offset(k)] += w0 * self.layout.plateau(q1);
                }
            }
        }
        Symbol::new(grid, support, values)
    }

    /// Hull of all bump supports in bins, shifted by `-shift`.
    fn bin_box(&self, shift: [i64; 2]) -> IndexBox {
        let r = self.plateau_reach();
        let b = self.layout.bins();
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for idx in self.terms.keys() {
            for a in 0..2 {
                lo[a] = lo[a].min(idx[a] * b - r - shift[a]);
                hi[a] = hi[a].max(idx[a] * b + r - shift[a]);
            }
        }
        if lo[0] > hi[0] {
            IndexBox::empty()
        } else {
            IndexBox::new(lo, hi)
        }
    }

    /// The symbol on the smallest fast grid that holds it in its central half,
    /// optionally recentred (norms built on `L^r_s` are translation invariant).
    pub fn to_symbol(&self, centred: bool) -> Result<Symbol> {
        let raw = self.bin_box([0, 0]);
        if raw.is_empty() {
            return Symbol::zero(TorusGrid::square(4.0 / self.layout.grid.length(), 4)?);
        }
        let shift = if centred {
            [(raw.lo[0] + raw.hi[0]) / 2, (raw.lo[1] + raw.hi[1]) / 2]
        } else {
            [0, 0]
        };
        let b = self.bin_box(shift);
        let reach = (0..2).map(|a| b.lo[a].abs().max(b.hi[a] + 1)).max().unwrap_or(1);
        let p = next_fast_len(4 * reach as usize);
        let p = p + p % 2;
        let grid = TorusGrid::square(p as f64 / self.layout.grid.length(), p)?;
        self.to_symbol_on(grid, shift)
    }

    /// The symbol as an `m`-variable array on the operand lattice (for the
    /// direct multilinear sum).
    pub fn to_multi(&self) -> Result<MultiSymbol> {
        let grid = self.layout.grid;
        let m = grid.points();
        let len = m.checked_pow(self.arity as u32).unwrap_or(usize::MAX);
        let limit = match self.arity {
            2 => MultiSymbol::MAX_POINTS_BILINEAR,
            3 => MultiSymbol::MAX_POINTS_TRILINEAR,
            _ => 0,
        };
        if m > limit {
            return Err(LabError::SizeGuard(format!(
                "{}-linear dense symbol limited to {limit} points per axis, got {m}",
                self.arity
            )));
        }
        let r = self.plateau_reach();
        let b = self.layout.bins();
        let mut values = vec![ZERO; len];
        let width = (2 * r + 1) as usize;
        let combos = width.pow(self.arity as u32);
        for (idx, &c) in &self.terms {
            // every combination of per-axis offsets within the plateau reach
            for mut code in 0..combos {
                let mut flat = 0usize;
                let mut w = c;
                for &j in idx {
                    let off = (code % width) as i64 - r;
                    code /= width;
                    flat = flat * m + grid.wrap(j * b + off);
                    w *= self.layout.plateau(off);
                }
                values[flat] += w;
            }
        }
        MultiSymbol::new(grid, self.arity, values)
    }

    /// Largest absolute value of the symbol (terms have disjoint supports).
    pub fn sup(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleInstance {
    pub n: usize,
    pub family: Family,
    pub m: usize,
    /// Number of leading signed slots; the rest use the unsigned sum.
    pub k: usize,
    pub functions: Vec<SampledFunction>,
    pub symbol: BumpSymbol,
    pub c_window: Option<(i64, i64)>,
}

impl CounterexampleInstance {
    pub fn layout(&self) -> &Layout {
        &self.symbol.layout
    }

    /// `T_sigma(f_1, ..., f_m)`. Collapsed instances go through the direct
    /// multilinear sum, the others through the separated evaluation.
    pub fn apply(&self) -> Result<SampledFunction> {
        let fs: Vec<&SampledFunction> = self.functions.iter().collect();
        match self.layout().mode {
            Mode::Collapsed => apply_mlinear_bruteforce(&self.symbol.to_multi()?, &fs),
            _ => self.symbol.evaluate(&fs),
        }
    }
}

fn check_arity(m: usize, k: usize) -> Result<()> {
    if !(2..=3).contains(&m) {
        return Err(LabError::InvalidParameter(format!("arity must be 2 or 3, got {m}")));
    }
    if k > m {
        return Err(LabError::InvalidParameter(format!("signed slots k={k} exceed m={m}")));
    }
    Ok(())
}

/// Sign ranges a family reads: one per input slot, then the output family
/// restricted to the indices the window keeps.
pub fn sign_ranges(family: Family, n: usize, m: usize) -> Vec<RangeInclusive<i64>> {
    let idx = family.indices(n);
    let (lo, hi) = c_window(n);
    let mut r: Vec<_> = (0..m).map(|_| idx.clone()).collect();
    if family != Family::SingleBump {
        r.push(lo..=hi);
    }
    r
}

/// `f^_N = sum_j a_j phi^(N xi - j)` over `indices`; `signs = None` gives the
/// unsigned sum.
pub fn build_f_n(
    indices: RangeInclusive<i64>,
    signs: Option<&SignFamily>,
    layout: &Layout,
) -> Result<SampledFunction> {
    layout.check(&indices)?;
    let coeffs = indices
        .map(|j| {
            let s = match signs {
                Some(f) => f.get(j).ok_or_else(|| {
                    LabError::InvalidParameter(format!("no sign for index {j}"))
                })?,
                None => 1.0,
            };
            Ok((j, s))
        })
        .collect::<Result<Vec<_>>>()?;
    layout.bump_sum(coeffs)
}

/// Every index tuple over `indices` whose sum falls in the window, with
/// coefficient `a_l(t) prod_{i < k} a_{j_i}(t_i)`.
fn windowed_terms(
    n: usize,
    m: usize,
    k: usize,
    indices: &RangeInclusive<i64>,
    draw: &RademacherDraw,
) -> Result<BTreeMap<Vec<i64>, f64>> {
    let (lo, hi) = c_window(n);
    let mut terms = BTreeMap::new();
    let base: Vec<i64> = indices.clone().collect();
    let mut stack = vec![Vec::<i64>::new()];
    while let Some(t) = stack.pop() {
        if t.len() == m {
            let l: i64 = t.iter().sum();
            if l < lo || l > hi {
                continue;
            }
            let mut c = draw.sign(m, l)?;
            for (slot, &j) in t.iter().enumerate().take(k) {
                c *= draw.sign(slot, j)?;
            }
            terms.insert(t, c);
            continue;
        }
        for &j in &base {
            let mut u = t.clone();
            u.push(j);
            stack.push(u);
        }
    }
    Ok(terms)
}

/// Randomized multiplier over an arbitrary index range with all `m` slots
/// signed, together with its signed input functions.
pub fn build_sigma_n_on(
    n: usize,
    m: usize,
    indices: RangeInclusive<i64>,
    draw: &RademacherDraw,
    layout: &Layout,
) -> Result<CounterexampleInstance> {
    signed_instance(n, m, m, indices, draw, layout)
}

fn signed_instance(
    n: usize,
    m: usize,
    k: usize,
    indices: RangeInclusive<i64>,
    draw: &RademacherDraw,
    layout: &Layout,
) -> Result<CounterexampleInstance> {
    check_arity(m, k)?;
    layout.check(&indices)?;
    let functions = (0..m)
        .map(|slot| {
            let signs = if slot < k { Some(draw.family(slot)?) } else { None };
            build_f_n(indices.clone(), signs, layout)
        })
        .collect::<Result<Vec<_>>>()?;
    let terms = windowed_terms(n, m, k, &indices, draw)?;
    let family = if k < m || *indices.start() < 1 {
        Family::Mixed
    } else if m == 2 {
        Family::BilinearSigmaN
    } else {
        Family::MlinearSigmaN
    };
    Ok(CounterexampleInstance {
        n,
        family,
        m,
        k,
        functions,
        symbol: BumpSymbol {
            layout: *layout,
            arity: m,
            terms,
        },
        c_window: Some(c_window(n)),
    })
}

/// Signed bumps at `j = 1..N` in every slot and the multiplier with signs
/// `a_{j_1}(t_1) ... a_{j_m}(t_m) a_l(t)` on the window `l = sum j_i`.
pub fn build_sigma_n(
    n: usize,
    m: usize,
    draw: &RademacherDraw,
    layout: &Layout,
) -> Result<CounterexampleInstance> {
    build_sigma_n_on(n, m, 1..=n as i64, draw, layout)
}

/// Bumps at `j = -N..N`; the first `k` slots signed, the rest unsigned, and
/// the multiplier carrying signs only on the signed slots, so that the output
/// does not depend on `k`.
pub fn build_mixed(
    n: usize,
    m: usize,
    k: usize,
    draw: &RademacherDraw,
    layout: &Layout,
) -> Result<CounterexampleInstance> {
    let n_i = n as i64;
    signed_instance(n, m, k, -n_i..=n_i, draw, layout)
}

/// One bump at frequency `a = 1` in every slot and the product plateau
/// around `(1, ..., 1)`.
pub fn build_single_bump(n: usize, m: usize, layout: &Layout) -> Result<CounterexampleInstance> {
    check_arity(m, 0)?;
    let indices = Family::SingleBump.indices(n);
    layout.check(&indices)?;
    let f = build_f_n(indices.clone(), None, layout)?;
    let mut terms = BTreeMap::new();
    terms.insert(vec![n as i64; m], 1.0);
    Ok(CounterexampleInstance {
        n,
        family: Family::SingleBump,
        m,
        k: 0,
        functions: vec![f; m],
        symbol: BumpSymbol {
            layout: *layout,
            arity: m,
            terms,
        },
        c_window: None,
    })
}

/// `N^-m (phi_L(x/N) e^{2 pi i x})^m` for the single-bump instance, where
/// `phi_L(t) = bins^-1 sum_q phi^(q / bins) e^{2 pi i t q / bins}` is the
/// periodic profile the lattice actually carries. Computed by direct sums.
pub fn single_bump_closed_form(layout: &Layout, m: usize) -> Result<SampledFunction> {
    let b = layout.bins();
    let (halfwidth, _, _) = layout.mode.profile();
    let w = layout.reach(halfwidth);
    let n = layout.n as f64;
    let grid = layout.grid;
    Ok(SampledFunction::from_fn(grid, Side::Space, |x| {
        let t = x[0] / n;
        let mut phi = ZERO;
        for q in -w..=w {
            phi += Complex64::from_polar(layout.bump(q), 2.0 * PI * t * q as f64 / b as f64);
        }
        let one = phi / b as f64 * Complex64::from_polar(1.0 / n, 2.0 * PI * x[0]);
        one.powi(m as i32)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::rademacher::RademacherDraw;
    use crate::grid::lp_norm;
    use crate::multiplier::apply_bilinear_periodic;

    fn draw(family: Family, n: usize, m: usize, seed: u64) -> RademacherDraw {
        RademacherDraw::generate(seed, &sign_ranges(family, n, m))
    }

    #[test]
    fn window_bounds() {
        assert_eq!(c_window(8), (8, 8));
        assert_eq!(c_window(10), (9, 11));
        assert_eq!(c_window(16), (15, 17));
        assert_eq!(c_window(64), (58, 70));
    }

    #[test]
    fn single_bump_at_n_one_is_the_base_bump() {
        let layout = Layout::standard(Mode::Widened, 1, &(1..=1)).unwrap();
        let one = build_f_n(1..=1, None, &layout).unwrap();
        let signed = build_f_n(1..=1, Some(&SignFamily { lo: 1, signs: vec![-1] }), &layout).unwrap();
        assert!(one.add(&signed).unwrap().max_abs() < 1e-14);
        let base = layout.bump_sum([(0, 1.0)]).unwrap();
        let a = lp_norm(&one, 3.0).unwrap();
        assert!((a - lp_norm(&base, 3.0).unwrap()).abs() < 1e-12 * a);
    }

    #[test]
    fn spectra_sit_on_disjoint_bumps() {
        for mode in [Mode::Widened, Mode::Resolved] {
            let n = 4;
            let layout = Layout::standard(mode, n, &(1..=4)).unwrap();
            let d = draw(Family::BilinearSigmaN, n, 2, 3);
            let f = build_f_n(1..=4, Some(&d.families[0]), &layout).unwrap();
            let spec = dft_forward(&f).unwrap();
            let b = layout.bins();
            let (halfwidth, _, _) = mode.profile();
            for (i, v) in spec.values().iter().enumerate() {
                let k = layout.grid.centered(i);
                let j = (k as f64 / b as f64).round() as i64;
                let off = (k - j * b) as f64 / b as f64;
                let inside = (1..=4).contains(&j) && off.abs() < halfwidth;
                if !inside {
                    assert!(v.norm() < 1e-12, "leak at bin {k}");
                } else {
                    let want = d.families[0].get(j).unwrap() * layout.bump(k - j * b);
                    assert!((v.re - want).abs() < 1e-10 && v.im.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn symbol_support_follows_the_window() {
        let n = 10;
        let layout = Layout::standard(Mode::Widened, n, &(1..=10)).unwrap();
        let d = draw(Family::BilinearSigmaN, n, 2, 4);
        let inst = build_sigma_n(n, 2, &d, &layout).unwrap();
        for j in 1..=10i64 {
            for k in 1..=10i64 {
                let c = inst.symbol.terms.get(&vec![j, k]);
                if (9..=11).contains(&(j + k)) {
                    let want = d.sign(0, j).unwrap() * d.sign(1, k).unwrap() * d.sign(2, j + k).unwrap();
                    assert_eq!(c, Some(&want));
                } else {
                    assert!(c.is_none());
                }
            }
        }
        let sigma = inst.symbol.to_symbol(false).unwrap();
        assert!((sigma.max_abs() - 1.0).abs() < 1e-12);
        assert_eq!(inst.symbol.sup(), 1.0);
        // the dense symbol takes the value of its term on each plateau
        let b = layout.bins();
        for (idx, c) in &inst.symbol.terms {
            assert_eq!(sigma.get([idx[0] * b + 2, idx[1] * b - 3]).re, *c);
        }
        assert_eq!(sigma.get([5 * b + b / 2, 5 * b]).re, 0.0);
    }

    #[test]
    fn separated_evaluation_matches_the_operator() {
        let n = 4;
        for family in [Family::BilinearSigmaN, Family::Mixed] {
            let idx = family.indices(n);
            let layout = Layout::standard(Mode::Widened, n, &idx).unwrap();
            let d = draw(family, n, 2, 8);
            let inst = match family {
                Family::Mixed => build_mixed(n, 2, 1, &d, &layout).unwrap(),
                _ => build_sigma_n(n, 2, &d, &layout).unwrap(),
            };
            let symbol_grid = layout.grid.dual().unwrap().with_dim(2).unwrap();
            let sigma = inst.symbol.to_symbol_on(symbol_grid, [0, 0]).unwrap();
            let direct =
                apply_bilinear_periodic(&sigma, &inst.functions[0], &inst.functions[1]).unwrap();
            let t = inst.apply().unwrap();
            assert!(t.relative_error(&direct) < 1e-12, "{family:?}");
        }
    }

    #[test]
    fn collapsed_brute_force_matches_separation() {
        for (m, n) in [(2, 8), (3, 4), (3, 16)] {
            let layout = Layout::standard(Mode::Collapsed, n, &(1..=n as i64)).unwrap();
            let d = draw(Family::MlinearSigmaN, n, m, 21);
            let inst = build_sigma_n(n, m, &d, &layout).unwrap();
            let fs: Vec<&SampledFunction> = inst.functions.iter().collect();
            let sep = inst.symbol.evaluate(&fs).unwrap();
            let brute = inst.apply().unwrap();
            assert!(brute.relative_error(&sep) < 1e-12, "m={m} N={n}");
            assert!(brute.max_abs() > 0.0);
        }
    }

    #[test]
    fn output_is_independent_of_k() {
        let n = 8;
        let d = draw(Family::Mixed, n, 2, 5);
        let layout = Layout::standard(Mode::Widened, n, &Family::Mixed.indices(n)).unwrap();
        let outs: Vec<_> = (0..=2)
            .map(|k| build_mixed(n, 2, k, &d, &layout).unwrap().apply().unwrap())
            .collect();
        for o in &outs[1..] {
            assert!(o.relative_error(&outs[0]) < 1e-8);
        }
        // k = m is the fully signed construction on the same range
        let full = build_sigma_n_on(n, 2, -8..=8, &d, &layout).unwrap();
        let mixed = build_mixed(n, 2, 2, &d, &layout).unwrap();
        assert_eq!(full.symbol, mixed.symbol);
        assert_eq!(full.functions, mixed.functions);
    }

    #[test]
    fn single_bump_matches_its_closed_form() {
        for (mode, n) in [(Mode::Widened, 8), (Mode::Resolved, 2), (Mode::Collapsed, 8)] {
            for m in [2, 3] {
                let layout = Layout::standard(mode, n, &(n as i64..=n as i64)).unwrap();
                let inst = build_single_bump(n, m, &layout).unwrap();
                let want = single_bump_closed_form(&layout, m).unwrap();
                let got = if m == 3 && mode != Mode::Collapsed {
                    let fs: Vec<&SampledFunction> = inst.functions.iter().collect();
                    inst.symbol.evaluate(&fs).unwrap()
                } else {
                    inst.apply().unwrap()
                };
                assert!(got.relative_error(&want) < 1e-8, "{mode:?} m={m}");
            }
        }
    }

    #[test]
    fn guards() {
        let coarse = Layout {
            mode: Mode::Widened,
            n: 8,
            grid: TorusGrid::line(8.0 * 4.0, 256).unwrap(),
        };
        assert!(matches!(coarse.check(&(1..=8)), Err(LabError::Resolution { .. })));
        let low = Layout {
            mode: Mode::Widened,
            n: 8,
            grid: TorusGrid::line(128.0, 64).unwrap(),
        };
        assert!(matches!(low.check(&(1..=8)), Err(LabError::Resolution { .. })));
        assert!(matches!(
            Layout::standard(Mode::Collapsed, 16, &(-16..=16)),
            Err(LabError::SizeGuard(_))
        ));
        let layout = Layout::standard(Mode::Widened, 4, &(1..=4)).unwrap();
        let d = draw(Family::BilinearSigmaN, 4, 2, 1);
        assert!(build_sigma_n(4, 4, &d, &layout).is_err());
        assert!(build_mixed(4, 2, 3, &d, &layout).is_err());
    }
}
