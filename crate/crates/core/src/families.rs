//! Fixed smooth test symbols shared by the wavelet, norm and decomposition
//! experiments.

use num_complex::Complex64;

use crate::bumps::exp_bump;
use crate::error::{LabError, Result};
use crate::grid::TorusGrid;
use crate::symbol::{IndexBox, Symbol};

/// Torus length of the wavelet lab grid; the order-6 support (11 units) plus
/// the symbol box fit without wrapping.
pub const LAB_LENGTH: f64 = 32.0;

/// Half side of the coordinate box holding every family member.
pub const FAMILY_RADIUS: f64 = 2.0;

/// The planar lab grid with spacing `2^-q`.
pub fn lab_grid(q: u32) -> Result<TorusGrid> {
    if q > 12 {
        return Err(LabError::SizeGuard(format!("lab grid resolution 2^-{q} is too fine")));
    }
    TorusGrid::square(LAB_LENGTH, (LAB_LENGTH as usize) << q)
}

pub fn family_box(grid: &TorusGrid) -> IndexBox {
    IndexBox::from_coordinates(grid, [[-FAMILY_RADIUS, FAMILY_RADIUS]; 2])
}

/// Five smooth bumps with slowly varying centers, widths and oscillation,
/// all supported strictly inside the family box.
pub fn smooth_family(grid: &TorusGrid) -> Result<Vec<Symbol>> {
    (0..5)
        .map(|k| {
            let kf = k as f64;
            let c = [0.1 * kf - 0.2, 0.1 - 0.05 * kf];
            let rho = 1.5 + 0.05 * kf;
            Symbol::from_fn(*grid, family_box(grid), move |x, y| {
                let d = ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt() / rho;
                let b = exp_bump(d);
                Complex64::new(b * (1.0 + 0.3 * (kf * x).cos()), 0.2 * b * y)
            })
        })
        .collect()
}

/// A bump plus dilated copies `sum_l 2^(-l beta) b(2^l (z - z_l))`, l = 0..levels.
/// Each scale is smooth; the decay rate `beta` fixes how the fine-scale
/// content compares with a Sobolev norm.
pub fn multiscale_bump(grid: &TorusGrid, beta: f64, levels: u32) -> Result<Symbol> {
    let centers: Vec<[f64; 2]> = (0..=levels)
        .map(|l| {
            let t = l as f64 * 1.3;
            [0.45 * t.cos(), 0.45 * t.sin()]
        })
        .collect();
    Symbol::from_fn(*grid, family_box(grid), move |x, y| {
        let mut v = 0.0;
        for (l, c) in centers.iter().enumerate() {
            let s = 2f64.powi(l as i32);
            let d = ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt() * s / 1.2;
            v += 2f64.powf(-(l as f64) * beta) * exp_bump(d);
        }
        Complex64::new(v, 0.0)
    })
}
