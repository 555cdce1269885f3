//! Bilinear and multilinear Fourier multiplier operators on periodic grids,
//! and the dyadic Hardy-Littlewood maximal function.
//!
//! A symbol on the planar grid of length `Ls` with `M` points acts on
//! operands sampled on the line grid of length `M / Ls` with the same `M`:
//! symbol coordinate `k * Ls / M` is operand frequency `k / L`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{dft_forward, dft_inverse, SampledFunction, Side, TorusGrid};
use crate::symbol::{MultiSymbol, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Operand line grid matching a symbol grid.
pub fn operand_grid(symbol_grid: &TorusGrid) -> Result<TorusGrid> {
    symbol_grid.dual()?.with_dim(1)
}

fn check_operands(sigma: &Symbol, f: &SampledFunction, g: &SampledFunction) -> Result<TorusGrid> {
    let expected = operand_grid(sigma.grid())?;
    for (name, h) in [("f", f), ("g", g)] {
        h.expect_side(Side::Space)?;
        let hg = h.grid();
        if hg.dim() != 1
            || hg.points() != expected.points()
            || (hg.length() - expected.length()).abs() > 1e-9 * expected.length()
        {
            return Err(LabError::Dimension(format!(
                "operand {name} lives on {hg:?}, symbol needs {expected:?}"
            )));
        }
    }
    Ok(*f.grid())
}

/// Output frequencies `xi + eta` of the support box must stay inside the
/// Nyquist range so the anti-diagonal sums do not fold.
fn check_margin(sigma: &Symbol) -> Result<()> {
    let b = sigma.support();
    if b.is_empty() {
        return Ok(());
    }
    let h = sigma.grid().half() as i64;
    let lo = b.lo[0] + b.lo[1];
    let hi = b.hi[0] + b.hi[1];
    if lo < -h || hi > h - 1 {
        return Err(LabError::Margin(format!(
            "output frequencies {lo}..={hi} (bins) leave the Nyquist range {}..={}",
            -h,
            h - 1
        )));
    }
    Ok(())
}

/// `T(f, g)(x) = int int sigma(xi, eta) f^(xi) g^(eta) e^{2 pi i x (xi + eta)}`
/// by anti-diagonal summation over the symbol's support box. The box must
/// keep `xi + eta` inside the Nyquist range.
pub fn apply_bilinear(
    sigma: &Symbol,
    f: &SampledFunction,
    g: &SampledFunction,
) -> Result<SampledFunction> {
    check_operands(sigma, f, g)?;
    check_margin(sigma)?;
    bilinear_core(sigma, f, g)
}

/// Same as [`apply_bilinear`] without the margin guard: output frequencies
/// fold modulo the grid, which leaves the values at grid points unchanged.
pub fn apply_bilinear_periodic(
    sigma: &Symbol,
    f: &SampledFunction,
    g: &SampledFunction,
) -> Result<SampledFunction> {
    check_operands(sigma, f, g)?;
    bilinear_core(sigma, f, g)
}

fn bilinear_core(sigma: &Symbol, f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    let grid = *f.grid();
    let fh = dft_forward(f)?;
    let gh = dft_forward(g)?;
    let spectrum = anti_diagonal(sigma, fh.values(), gh.values(), &grid);
    dft_inverse(&SampledFunction::new(grid, spectrum, Side::Frequency)?)
}

/// `G(m) = L^-1 sum_{k1 + k2 = m} sigma f^(k1) g^(k2)` on the operand lattice.
pub(crate) fn anti_diagonal(
    sigma: &Symbol,
    fh: &[Complex64],
    gh: &[Complex64],
    grid: &TorusGrid,
) -> Vec<Complex64> {
    let m = grid.points();
    let mut out = vec![ZERO; m];
    let b = *sigma.support();
    if b.is_empty() {
        return out;
    }
    let w = b.extent(1);
    for (r, row) in sigma.values().chunks_exact(w).enumerate() {
        let k1 = b.lo[0] + r as i64;
        let a = fh[grid.wrap(k1)];
        if a == ZERO {
            continue;
        }
        for (c, s) in row.iter().enumerate() {
            if *s == ZERO {
                continue;
            }
            let k2 = b.lo[1] + c as i64;
            out[grid.wrap(k1 + k2)] += s * a * gh[grid.wrap(k2)];
        }
    }
    let cell = 1.0 / grid.length();
    out.iter_mut().for_each(|v| *v *= cell);
    out
}

/// Direct sums `F(k/L) = h sum_x f(x) e^{-2 pi i x k / L}`, independent of the
/// fast transform.
fn direct_spectrum(f: &SampledFunction) -> Vec<Complex64> {
    let grid = f.grid();
    let m = grid.points();
    (0..m)
        .map(|j| {
            let k = grid.centered(j);
            let mut acc = ZERO;
            for (i, v) in f.values().iter().enumerate() {
                let n = grid.centered(i);
                acc += v * unit_root(-(n * k), m);
            }
            acc * grid.spacing()
        })
        .collect()
}

/// `exp(2 pi i n / m)` with the phase reduced modulo `m` before scaling.
fn unit_root(n: i64, m: usize) -> Complex64 {
    let r = n.rem_euclid(m as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r / m as f64)
}

fn spatial_grid_check(fs: &[&SampledFunction], grid: &TorusGrid) -> Result<()> {
    for f in fs {
        f.expect_side(Side::Space)?;
        if f.grid() != grid {
            return Err(LabError::Dimension("operands on different grids".into()));
        }
    }
    Ok(())
}

/// Triple loop over `(x, k1, k2)`; the correctness oracle for
/// [`apply_bilinear`].
pub fn apply_bilinear_bruteforce(
    sigma: &Symbol,
    f: &SampledFunction,
    g: &SampledFunction,
) -> Result<SampledFunction> {
    let grid = check_operands(sigma, f, g)?;
    if grid.points() > MultiSymbol::MAX_POINTS_BILINEAR {
        return Err(LabError::SizeGuard(format!(
            "direct bilinear evaluation limited to {} points, got {}",
            MultiSymbol::MAX_POINTS_BILINEAR,
            grid.points()
        )));
    }
    let dense = MultiSymbol::from_symbol(sigma)?;
    apply_mlinear_bruteforce(&dense, &[f, g])
}

/// Direct `m`-fold frequency sum
/// `L^-m sum_k sigma(k) prod_i f_i^(k_i) e^{2 pi i x (k_1 + ... + k_m) / L}`.
pub fn apply_mlinear_bruteforce(
    sigma: &MultiSymbol,
    fs: &[&SampledFunction],
) -> Result<SampledFunction> {
    let grid = *sigma.grid();
    let arity = sigma.arity();
    if fs.len() != arity {
        return Err(LabError::Dimension(format!(
            "{arity}-linear symbol applied to {} functions",
            fs.len()
        )));
    }
    spatial_grid_check(fs, &grid)?;
    let m = grid.points();
    let spectra: Vec<Vec<Complex64>> = fs.iter().map(|f| direct_spectrum(f)).collect();
    let scale = grid.length().powi(-(arity as i32));
    // collapse the symbol onto total frequency first: G(total) for each x is
    // then a single sum
    let span = arity * m;
    let lowest = -(arity as i64) * grid.half() as i64;
    let mut by_total = vec![ZERO; span];
    let mut idx = vec![0usize; arity];
    for (n, s) in sigma.values().iter().enumerate() {
        if *s == ZERO {
            continue;
        }
        let mut r = n;
        for a in (0..arity).rev() {
            idx[a] = r % m;
            r /= m;
        }
        let mut term = *s;
        let mut total = 0i64;
        for a in 0..arity {
            term *= spectra[a][idx[a]];
            total += grid.centered(idx[a]);
        }
        by_total[(total - lowest) as usize] += term;
    }
    let values = (0..m)
        .map(|i| {
            let x = grid.centered(i);
            by_total
                .iter()
                .enumerate()
                .map(|(t, v)| v * unit_root(x * (t as i64 + lowest), m))
                .sum::<Complex64>()
                * scale
        })
        .collect();
    SampledFunction::new(grid, values, Side::Space)
}

/// `(sigma_1 f^)^v * (sigma_2 g^)^v` for a product symbol given by its
/// factors on the operand frequency lattice.
pub fn apply_tensor(
    factor_xi: &SampledFunction,
    factor_eta: &SampledFunction,
    f: &SampledFunction,
    g: &SampledFunction,
) -> Result<SampledFunction> {
    factor_xi.expect_side(Side::Frequency)?;
    factor_eta.expect_side(Side::Frequency)?;
    let a = dft_inverse(&factor_xi.mul(&dft_forward(f)?)?)?;
    let b = dft_inverse(&factor_eta.mul(&dft_forward(g)?)?)?;
    a.mul(&b)
}

/// Half-widths (in samples) of the admissible centered windows: the single
/// sample, then `2^t` for `t = 0 ..= log2(M/2)`.
pub fn maximal_window_halfwidths(points: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut w = 1;
    while w <= points / 2 {
        out.push(w);
        w *= 2;
    }
    out
}

fn window_means(g: &SampledFunction, halfwidths: &[usize]) -> Result<SampledFunction> {
    g.expect_side(Side::Space)?;
    if g.grid().dim() != 1 {
        return Err(LabError::Dimension("maximal function acts on lines".into()));
    }
    let m = g.grid().points();
    let abs: Vec<f64> = g.values().iter().map(|v| v.norm()).collect();
    // prefix sums over three periods so every window is a contiguous slice
    let mut prefix = vec![0.0; 3 * m + 1];
    for i in 0..3 * m {
        prefix[i + 1] = prefix[i] + abs[i % m];
    }
    let values = (0..m)
        .map(|i| {
            let c = i + m;
            let best = halfwidths
                .iter()
                .map(|&w| match w {
                    0 => abs[i],
                    _ => (prefix[c + w + 1] - prefix[c - w]) / (2 * w + 1) as f64,
                })
                .fold(0.0, f64::max);
            Complex64::new(best, 0.0)
        })
        .collect();
    SampledFunction::new(*g.grid(), values, Side::Space)
}

/// Periodic dyadic maximal function of `|g|`.
pub fn hl_maximal(g: &SampledFunction) -> Result<SampledFunction> {
    window_means(g, &maximal_window_halfwidths(g.grid().points()))
}

/// Maximal average over every centered window `0 ..= M/2`.
pub fn hl_maximal_all_windows(g: &SampledFunction) -> Result<SampledFunction> {
    let all: Vec<usize> = (0..=g.grid().points() / 2).collect();
    window_means(g, &all)
}
