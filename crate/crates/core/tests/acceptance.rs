//! Acceptance suite: one line per criterion, nonzero exit if any is red.
//! Every tolerance used below is a named constant.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bilinear_lab::bumps::exp_bump;
use bilinear_lab::counterexamples::{
    fit_power_law, scaling_sweep, Family, FamilySpec, Mode, ScalingReport, SymbolNorms,
};
use bilinear_lab::decomposition::{
    level_records, level_set_split, partition_subclasses, random_test_function, tau_max,
    PieceEvaluator, Which,
};
use bilinear_lab::families::{lab_grid, multiscale_bump, smooth_family};
use bilinear_lab::multiplier::{apply_bilinear, apply_bilinear_bruteforce, operand_grid};
use bilinear_lab::norms::{hormander_norm, sobolev_norm};
use bilinear_lab::wavelets::{
    analyze, daubechies_filters, genders_at, highpass, level_square_norm, synthesize,
    WaveletCoeffs, WaveletIndex, WaveletSystem, MAX_ORDER,
};
use bilinear_lab::{lp_norm, Complex64, IndexBox, SampledFunction, Side, Symbol, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const FILTER_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-6;
const MOMENT_TOL: f64 = 1e-5;
const GRAM_TOL: f64 = 1e-6;
const RECON_TOL: f64 = 1e-4;
const LEVEL_RATIO_SPREAD: f64 = 20.0;
const PARTITION_TOL: f64 = 1e-12;
const IMP_BOUND: f64 = 50.0;
/// log2 growth per level allowed for the worst IMP ratio
const IMP_SLOPE_TOL: f64 = 0.1;
const DECOMP_BUDGET: Duration = Duration::from_secs(120);
const EXPONENT_TOL: f64 = 0.1;
const SMOOTHNESS_SLACK: f64 = 0.15;
const SCALING_BUDGET: Duration = Duration::from_secs(600);
const GAP_SLACK: f64 = 0.1;
const MLINEAR_TOL: f64 = 0.15;
const ENVELOPE: f64 = 100.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(", ")
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let sgrid = TorusGrid::square(4.0, 32).unwrap();
    let op = operand_grid(&sgrid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let lo = [rng.gen_range(-8..0), rng.gen_range(-8..0)];
        let hi = [lo[0] + rng.gen_range(1..9), lo[1] + rng.gen_range(1..9)];
        let bx = IndexBox::new(lo, hi);
        let vals = (0..bx.len()).map(|_| random_complex(&mut rng)).collect();
        let sigma = Symbol::new(sgrid, bx, vals).unwrap();
        let mut operand = || {
            let v = (0..32).map(|_| random_complex(&mut rng)).collect();
            SampledFunction::new(op, v, Side::Space).unwrap()
        };
        let (f, g) = (operand(), operand());
        let fast = apply_bilinear(&sigma, &f, &g).unwrap();
        let slow = apply_bilinear_bruteforce(&sigma, &f, &g).unwrap();
        worst = worst.max(fast.relative_error(&slow));
    }
    let t = t0.elapsed();
    outcome(
        worst <= ORACLE_TOL && t < ORACLE_BUDGET,
        format!("50 trials at M=32, worst relative L2 error {worst:.2e} (tol {ORACLE_TOL:.0e}), {t:.2?} (budget {ORACLE_BUDGET:?})"),
    )
}

fn riemann(values: &[f64], depth: u32, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 2f64.powi(-(depth as i32));
    values.iter().enumerate().map(|(m, v)| f(m as f64 * h, *v)).sum::<f64>() * h
}

fn wavelet_suite() -> Outcome {
    let mut ortho: f64 = 0.0;
    for order in 1..=MAX_ORDER {
        let h = daubechies_filters(order).unwrap();
        let g = highpass(&h);
        let n = h.len() as i64;
        for m in -(n / 2)..=(n / 2) {
            let shifted = |a: &[f64], b: &[f64]| -> f64 {
                (0..n)
                    .filter(|t| (0..n).contains(&(t + 2 * m)))
                    .map(|t| a[t as usize] * b[(t + 2 * m) as usize])
                    .sum()
            };
            let delta = if m == 0 { 1.0 } else { 0.0 };
            ortho = ortho
                .max((shifted(&h, &h) - delta).abs())
                .max((shifted(&g, &g) - delta).abs())
                .max(shifted(&h, &g).abs());
        }
    }
    let depth = 10;
    let ws = WaveletSystem::new(6, depth).unwrap();
    let nf = riemann(ws.father(), depth, |_, v| v * v).sqrt();
    let nm = riemann(ws.mother(), depth, |_, v| v * v).sqrt();
    let moment = (0..6)
        .map(|a| riemann(ws.mother(), depth, |x, v| x.powi(a) * v).abs())
        .fold(0.0, f64::max);
    let grid = lab_grid(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let idx: Vec<WaveletIndex> = (0..50)
        .map(|_| {
            let level = rng.gen_range(0..=2);
            let gs = genders_at(level);
            let span = 3i64 << level;
            WaveletIndex::new(
                level,
                gs[rng.gen_range(0..gs.len())],
                [rng.gen_range(-span..span), rng.gen_range(-span..span)],
            )
            .unwrap()
        })
        .collect();
    let tw: Vec<_> = idx.iter().map(|i| ws.tensor(i, &grid).unwrap()).collect();
    let mut gram: f64 = 0.0;
    for a in 0..tw.len() {
        for b in a..tw.len() {
            let target = if idx[a] == idx[b] { 1.0 } else { 0.0 };
            gram = gram.max((tw[a].inner(&tw[b]) - target).abs());
        }
    }
    let pass = ortho <= FILTER_TOL
        && (nf - 1.0).abs() <= NORM_TOL
        && (nm - 1.0).abs() <= NORM_TOL
        && moment <= MOMENT_TOL
        && gram <= GRAM_TOL;
    outcome(
        pass,
        format!(
            "filter orthogonality defect {ortho:.1e} over orders 1..={MAX_ORDER} (tol {FILTER_TOL:.0e}); \
             order 6 depth {depth}: |psi_F| - 1 = {:.1e}, |psi_M| - 1 = {:.1e} (tol {NORM_TOL:.0e}); \
             max moment {moment:.1e} (tol {MOMENT_TOL:.0e}); Gram defect of 50 wavelets {gram:.1e} (tol {GRAM_TOL:.0e})",
            nf - 1.0,
            nm - 1.0
        ),
    )
}

fn reconstruction() -> Outcome {
    let ws = WaveletSystem::new(6, 10).unwrap();
    let grid = lab_grid(8).unwrap();
    let errs: Vec<f64> = smooth_family(&grid)
        .unwrap()
        .iter()
        .map(|sigma| {
            let c = analyze(sigma, &ws, 4).unwrap();
            let back = synthesize(&c, &ws, Some(*sigma.support())).unwrap();
            back.relative_error(sigma).unwrap()
        })
        .collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= RECON_TOL,
        format!("5 smooth symbols, q=8, levels 0..=4: relative errors [{}] (tol {RECON_TOL:.0e})", sci(&errs)),
    )
}

fn slope(values: &[f64]) -> f64 {
    let xs: Vec<f64> = (1..=values.len()).map(|l| 2f64.powi(l as i32)).collect();
    fit_power_law(&xs, values).unwrap().exponent
}

fn level_ratio() -> Outcome {
    let ws = WaveletSystem::new(6, 10).unwrap();
    let grid = lab_grid(8).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, s, beta) in [(2.0, 0.75, 0.15), (4.0, 0.6, 0.5)] {
        let sigma = multiscale_bump(&grid, beta, 5).unwrap();
        let c = analyze(&sigma, &ws, 5).unwrap();
        let sob = sobolev_norm(&sigma, r, s).unwrap();
        let ratios: Vec<f64> = (1..=5)
            .map(|l| level_square_norm(&c, &ws, l, r).unwrap() / (sob * 2f64.powf(-s * l as f64)))
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let trend = slope(&ratios);
        pass &= max / min <= LEVEL_RATIO_SPREAD && trend <= 0.0;
        parts.push(format!(
            "(r,s)=({r},{s}) beta={beta}: max/min {:.2} (tol {LEVEL_RATIO_SPREAD}), log2 slope {trend:.3} (must be <= 0)",
            max / min
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_coeffs(grid: TorusGrid, level: u32, rng: &mut ChaCha8Rng) -> WaveletCoeffs {
    let span = 2i64 << level;
    let gs = genders_at(level);
    let entries = (0..rng.gen_range(5..400))
        .map(|_| {
            let idx = WaveletIndex::new(
                level,
                gs[rng.gen_range(0..gs.len())],
                [rng.gen_range(-span..span), rng.gen_range(-span..span)],
            )
            .unwrap();
            let mag = 10f64.powf(rng.gen_range(-4.0..0.0));
            (idx, Complex64::from_polar(mag, rng.gen_range(0.0..6.3)))
        })
        .collect();
    WaveletCoeffs::new(grid, 6, level, entries).unwrap()
}

fn decomposition_suite() -> Outcome {
    let t0 = Instant::now();
    let ws = WaveletSystem::new(6, 10).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();

    // coefficient-level partitions and the column count bound
    let coarse = lab_grid(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gamma_worst: f64 = 0.0;
    let mut exact = true;
    for trial in 0..100u32 {
        let level = 1 + trial % 4;
        let r = [2.0, 3.0, 4.0][trial as usize % 3];
        let c = random_coeffs(coarse, level, &mut rng);
        let p = partition_subclasses(&c, level, &ws).unwrap();
        exact &= p.supports_disjoint(&ws);
        let mut seen: Vec<WaveletIndex> = Vec::new();
        for kappa in p.classes.keys() {
            for tau in 0..=tau_max(level, r) {
                let s = level_set_split(&p, kappa, tau, r, &ws).unwrap();
                exact &= s.heavy.len() + s.light.len() == s.members.len();
                seen.extend(s.members.iter().map(|e| e.index));
                gamma_worst = gamma_worst.max(s.gamma as f64 / 2f64.powf(tau as f64 * r / 2.0));
            }
        }
        seen.sort();
        let all: Vec<WaveletIndex> = c.at_level(level).map(|(k, _)| *k).collect();
        exact &= seen == all;
    }
    pass &= exact && gamma_worst <= 4.0;
    parts.push(format!(
        "100 random sets: partitions {}, max gamma/2^(tau r/2) {gamma_worst:.2} (tol 4)",
        if exact { "exact" } else { "NOT exact" }
    ));

    let grid = lab_grid(8).unwrap();
    let op = operand_grid(&grid).unwrap();
    let f = random_test_function(&op, 2.0, 11).unwrap();
    let g = random_test_function(&op, 2.0, 12).unwrap();
    let symbols = [
        ("smooth", smooth_family(&grid).unwrap().remove(0)),
        ("multiscale", multiscale_bump(&grid, 0.3, 5).unwrap()),
    ];

    // operator pieces add back up to the level
    {
        let (_, sigma) = &symbols[0];
        let c = analyze(sigma, &ws, 2).unwrap();
        let p = partition_subclasses(&c, 2, &ws).unwrap();
        let mut eval = PieceEvaluator::new(&ws, &grid, &f, &g).unwrap();
        let whole: Vec<_> = c.at_level(2).map(|(k, v)| (*k, *v)).collect();
        let target = eval.evaluate(&whole).unwrap();
        let mut sum = SampledFunction::zeros(*target.grid(), Side::Space);
        for kappa in p.classes.keys() {
            for tau in 0..=tau_max(2, 4.0) {
                let s = level_set_split(&p, kappa, tau, 4.0, &ws).unwrap();
                for which in [Which::Heavy, Which::Light] {
                    sum = sum.add(&eval.evaluate(&s.entries(which)).unwrap()).unwrap();
                }
            }
        }
        let err = sum.relative_error(&target);
        pass &= err <= PARTITION_TOL;
        parts.push(format!("operator pieces at level 2 sum back to {err:.1e} (tol {PARTITION_TOL:.0e})"));
    }

    for (name, sigma) in &symbols {
        let c = analyze(sigma, &ws, 4).unwrap();
        for (r, s) in [(4.0, 0.75), (3.0, 0.9)] {
            let sn = sobolev_norm(sigma, r, s).unwrap();
            let mut eval = PieceEvaluator::new(&ws, &grid, &f, &g).unwrap();
            let mut per_level = Vec::new();
            let mut degenerate = false;
            for l in 1..=4 {
                let recs = level_records(&c, l, &ws, &mut eval, sn, r, s).unwrap();
                degenerate |= recs.iter().any(|x| x.degenerate);
                per_level.push(recs.iter().map(|x| x.ratio_imp).fold(0.0, f64::max));
            }
            let max = per_level.iter().cloned().fold(0.0, f64::max);
            let trend = slope(&per_level);
            pass &= !degenerate && max <= IMP_BOUND && trend <= IMP_SLOPE_TOL;
            parts.push(format!(
                "{name} (r,s)=({r},{s}): worst IMP ratio per level [{}] (bound {IMP_BOUND}), log2 slope {trend:.2} (tol {IMP_SLOPE_TOL})",
                sci(&per_level)
            ));
        }
    }
    let t = t0.elapsed();
    pass &= t < DECOMP_BUDGET;
    parts.push(format!("{t:.1?} (budget {DECOMP_BUDGET:?})"));
    outcome(pass, parts.join("; "))
}

const SIZES: [usize; 4] = [8, 16, 32, 64];
const SEED: u64 = 7;

fn fits(rep: &ScalingReport) -> String {
    let inputs: Vec<f64> = rep.input_fits.iter().map(|f| f.exponent).collect();
    format!("T exponent {:.3}, input exponents {inputs:.3?}", rep.fitted_exponent)
}

fn bilinear_scaling() -> Outcome {
    let t0 = Instant::now();
    let spec = FamilySpec::l2(Family::BilinearSigmaN, 2, Mode::Widened);
    let s = 0.6;
    let norms = SymbolNorms { r: 2.0, s, hormander: false };
    let rep = scaling_sweep(&spec, &SIZES, 64, SEED, Some(norms)).unwrap();
    let t = t0.elapsed();
    let inputs_ok = rep
        .input_fits
        .iter()
        .zip(&rep.input_targets)
        .all(|(f, target)| (f.exponent - target).abs() <= EXPONENT_TOL);
    let sob = rep.sobolev_fit.as_ref().unwrap().exponent;
    let pass = inputs_ok
        && (rep.fitted_exponent - 0.5).abs() <= EXPONENT_TOL
        && sob <= s + SMOOTHNESS_SLACK
        && t < SCALING_BUDGET;
    outcome(
        pass,
        format!(
            "N={SIZES:?}, S=64, seed {SEED}: {} (targets 0.5 and {:?}, tol {EXPONENT_TOL}); \
             L^2_{s} symbol growth {sob:.3} (max {:.2}); {t:.1?} (budget {SCALING_BUDGET:?})",
            fits(&rep),
            rep.input_targets,
            s + SMOOTHNESS_SLACK
        ),
    )
}

fn necessity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let spec = FamilySpec::l2(Family::BilinearSigmaN, 2, Mode::Widened);
    for s in [0.25, 0.4] {
        let rep = scaling_sweep(&spec, &SIZES, 32, SEED, Some(SymbolNorms { r: 2.0, s, hormander: false })).unwrap();
        let v = rep.verdict.unwrap();
        let need = (0.5 - s) - GAP_SLACK;
        pass &= v.gap >= need;
        parts.push(format!("randomized s={s}: gap {:.3} (min {need:.2})", v.gap));
    }
    let mut bump = FamilySpec::l2(Family::SingleBump, 2, Mode::Widened);
    bump.k = 0;
    let (r, s) = (4.0, 0.3);
    let rep = scaling_sweep(&bump, &SIZES, 8, SEED, Some(SymbolNorms { r, s, hormander: false })).unwrap();
    let v = rep.verdict.unwrap();
    let need = (2.0 / r - s) - GAP_SLACK;
    pass &= v.gap >= need;
    parts.push(format!("single bump r={r} s={s}: gap {:.3} (min {need:.2})", v.gap));

    let mut mixed = FamilySpec::l2(Family::Mixed, 2, Mode::Widened);
    mixed.k = 1;
    let rep = scaling_sweep(&mixed, &SIZES, 64, SEED, Some(SymbolNorms { r: 2.0, s: 0.5, hormander: false })).unwrap();
    let measured = rep.fitted_exponent - rep.input_fits.iter().map(|f| f.exponent).sum::<f64>();
    let predicted = (1.0 / mixed.p - 0.5) - (1.0 / mixed.p_inputs[0] - 0.5);
    let dev = (measured - predicted).abs();
    pass &= dev <= GAP_SLACK;
    parts.push(format!(
        "mixed m=2 k=1: {}, T minus inputs {measured:.3} vs {predicted:.3} (|diff| {dev:.3}, tol {GAP_SLACK})",
        fits(&rep)
    ));
    outcome(pass, parts.join("; "))
}

fn mlinear_scaling() -> Outcome {
    let mut spec = FamilySpec::l2(Family::MlinearSigmaN, 3, Mode::Collapsed);
    spec.p_inputs = vec![3.0; 3];
    spec.p = 1.0;
    let rep = scaling_sweep(&spec, &[4, 8, 16], 64, SEED, None).unwrap();
    let target = 1.0 / spec.p - 0.5;
    outcome(
        (rep.fitted_exponent - target).abs() <= MLINEAR_TOL,
        format!(
            "m=3, brute force on M={} points, N=[4, 8, 16], S=64: {} (target {target}, tol {MLINEAR_TOL}), fit residual {:.3}",
            Mode::COLLAPSED_POINTS,
            fits(&rep),
            rep.fit_residual
        ),
    )
}

fn envelope() -> Outcome {
    let sgrid = TorusGrid::square(16.0, 64).unwrap();
    let op = operand_grid(&sgrid).unwrap();
    let bx = IndexBox::from_coordinates(&sgrid, [[-3.5, 3.5]; 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (r, s) = (2.0, 0.75);
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let bumps: Vec<([f64; 2], f64, Complex64)> = (0..3)
            .map(|_| {
                (
                    [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)],
                    rng.gen_range(0.75..1.5),
                    random_complex(&mut rng),
                )
            })
            .collect();
        let sigma = Symbol::from_fn(sgrid, bx, |x, y| {
            bumps
                .iter()
                .map(|(c, rho, a)| a * exp_bump(((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt() / rho))
                .sum()
        })
        .unwrap();
        let h = hormander_norm(&sigma, r, s, None).unwrap().hormander;
        let mut best: f64 = 0.0;
        for d in 0..8 {
            let f = random_test_function(&op, 4.0, 1000 * k + 2 * d).unwrap();
            let g = random_test_function(&op, 4.0, 1000 * k + 2 * d + 1).unwrap();
            let t = lp_norm(&apply_bilinear(&sigma, &f, &g).unwrap(), 1.0).unwrap();
            best = best.max(t / (lp_norm(&f, 2.0).unwrap() * lp_norm(&g, 2.0).unwrap()));
        }
        worst = worst.max(best / h);
    }
    outcome(
        worst <= ENVELOPE,
        format!(
            "non-probative sanity envelope: 20 random symbols, 8 operand pairs each, \
             max of |T(f,g)|_1/(|f|_2 |g|_2) over Hormander norm (r,s)=({r},{s}) is {worst:.3} (max {ENVELOPE})"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("fast operator matches direct sums", oracle_equivalence),
        ("wavelet system", wavelet_suite),
        ("wavelet reconstruction", reconstruction),
        ("level square norms against the Sobolev norm", level_ratio),
        ("decomposition pieces", decomposition_suite),
        ("bilinear randomized scaling", bilinear_scaling),
        ("necessity of the smoothness threshold", necessity),
        ("trilinear scaling by brute force", mlinear_scaling),
        ("operator norm envelope", envelope),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}) [{:.1?}]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
