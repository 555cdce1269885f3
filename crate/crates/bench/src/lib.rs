//! Fixtures shared by the operator benchmarks.

use bilinear_lab::multiplier::operand_grid;
use bilinear_lab::{Complex64, IndexBox, SampledFunction, Side, Symbol, TorusGrid};

/// Deterministic pseudo-random value in `[-1, 1)` from an index.
fn hash_unit(i: u64) -> f64 {
    let mut x = i.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    (x >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn value(i: u64) -> Complex64 {
    Complex64::new(hash_unit(2 * i), hash_unit(2 * i + 1))
}

/// A dense symbol on the `m`-point planar grid whose box fills the central
/// quarter, with two matching operands.
pub fn bilinear_fixture(m: usize) -> (Symbol, SampledFunction, SampledFunction) {
    let grid = TorusGrid::square(4.0, m).unwrap();
    let q = (m / 4) as i64;
    let bx = IndexBox::new([-q, -q], [q - 1, q - 1]);
    let sigma = Symbol::new(grid, bx, (0..bx.len() as u64).map(value).collect()).unwrap();
    let op = operand_grid(&grid).unwrap();
    let f = SampledFunction::new(op, (0..m as u64).map(|i| value(1_000_000 + i)).collect(), Side::Space).unwrap();
    let g = SampledFunction::new(op, (0..m as u64).map(|i| value(2_000_000 + i)).collect(), Side::Space).unwrap();
    (sigma, f, g)
}
