//! Monte-Carlo averages over sign draws, exact averages by enumeration, and
//! power-law fits of the averages against `N`.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::families::{
    build_mixed, build_sigma_n, build_single_bump, sign_ranges, CounterexampleInstance, Family,
    Layout, Mode,
};
use super::rademacher::{derive_seed, task_seed, RademacherDraw, SignFamily};
use crate::error::{LabError, Result};
use crate::grid::{lp_norm, SampledFunction, Side, TorusGrid};
use crate::norms::{hormander_norm, sobolev_norm};

/// Which construction, its arity, how many slots carry signs (mixed family
/// only), the resolution mode and the Lebesgue exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub m: usize,
    pub k: usize,
    pub mode: Mode,
    pub p_inputs: Vec<f64>,
    pub p: f64,
}

impl FamilySpec {
    /// `p_1 = ... = p_m = 2` with the Holder output exponent `p = 2/m`.
    pub fn l2(family: Family, m: usize, mode: Mode) -> Self {
        Self {
            family,
            m,
            k: m,
            mode,
            p_inputs: vec![2.0; m],
            p: 2.0 / m as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let arity_ok = match self.family {
            Family::BilinearSigmaN => self.m == 2,
            _ => (2..=3).contains(&self.m),
        };
        if !arity_ok {
            return Err(LabError::InvalidParameter(format!(
                "{} does not come in arity {}",
                self.family.name(),
                self.m
            )));
        }
        if self.k > self.m {
            return Err(LabError::InvalidParameter(format!(
                "signed slots k={} exceed m={}",
                self.k, self.m
            )));
        }
        if self.p_inputs.len() != self.m {
            return Err(LabError::InvalidParameter(format!(
                "{} input exponents for arity {}",
                self.p_inputs.len(),
                self.m
            )));
        }
        if self.p_inputs.iter().chain([&self.p]).any(|&q| !(q.is_finite() && q > 0.0)) {
            return Err(LabError::InvalidParameter("exponents must be positive and finite".into()));
        }
        let holder: f64 = self.p_inputs.iter().map(|q| 1.0 / q).sum();
        if (holder - 1.0 / self.p).abs() > 1e-12 {
            return Err(LabError::InvalidParameter(format!(
                "1/p = {} but the inputs give {holder}",
                1.0 / self.p
            )));
        }
        Ok(())
    }

    /// Input slots that carry random signs.
    pub fn signed_slots(&self) -> usize {
        match self.family {
            Family::Mixed => self.k,
            Family::SingleBump => 0,
            _ => self.m,
        }
    }

    pub fn layout(&self, n: usize) -> Result<Layout> {
        Layout::standard(self.mode, n, &self.family.indices(n))
    }

    pub fn draw(&self, n: usize, seed: u64) -> RademacherDraw {
        RademacherDraw::generate(seed, &sign_ranges(self.family, n, self.m))
    }

    pub fn instance(&self, n: usize, draw: &RademacherDraw) -> Result<CounterexampleInstance> {
        self.validate()?;
        let layout = self.layout(n)?;
        match self.family {
            Family::BilinearSigmaN | Family::MlinearSigmaN => build_sigma_n(n, self.m, draw, &layout),
            Family::Mixed => build_mixed(n, self.m, self.k, draw, &layout),
            Family::SingleBump => build_single_bump(n, self.m, &layout),
        }
    }

    /// Growth exponent of `||T||_p` in `N` that the construction predicts.
    pub fn output_target(&self) -> f64 {
        match self.family {
            Family::SingleBump => 1.0 / self.p - self.m as f64,
            _ => 1.0 / self.p - 0.5,
        }
    }

    /// Growth exponents of `||f_i||_{p_i}`: `1/p_i - 1/2` for signed sums, 0
    /// for unsigned ones, `1/p_i - 1` for a single bump.
    pub fn input_targets(&self) -> Vec<f64> {
        let signed = self.signed_slots();
        self.p_inputs
            .iter()
            .enumerate()
            .map(|(i, q)| match self.family {
                Family::SingleBump => 1.0 / q - 1.0,
                _ if i < signed => 1.0 / q - 0.5,
                _ => 0.0,
            })
            .collect()
    }

    /// The bound `||sigma||_{L^r_s} <~ N^e` the necessity argument uses.
    pub fn symbol_exponent(&self, r: f64, s: f64) -> f64 {
        match self.family {
            Family::SingleBump => s - self.m as f64 / r,
            _ => s,
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Order-independent: values are summed in sorted order, relative to the
    /// smallest one so that equal samples give exactly zero spread.
    pub fn from_samples(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let base = v.first().copied().unwrap_or(f64::NAN);
        let shift = v.iter().map(|x| x - base).sum::<f64>() / n;
        let mean = base + shift;
        let stderr = if v.len() < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - base - shift).powi(2)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Self { mean, stderr }
    }

    /// `mean^(1/p)`, the norm scale of a mean `p`-th power.
    pub fn root(&self, p: f64) -> f64 {
        self.mean.powf(1.0 / p)
    }
}

/// Averages of `||T||_p^p` and `||f_i||_{p_i}^{p_i}` at one `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n: usize,
    pub samples: usize,
    pub output: Estimate,
    pub inputs: Vec<Estimate>,
}

fn powers(inst: &CounterexampleInstance, spec: &FamilySpec) -> Result<(f64, Vec<f64>)> {
    let t = inst.apply()?;
    let out = lp_norm(&t, spec.p)?.powf(spec.p);
    let ins = inst
        .functions
        .iter()
        .zip(&spec.p_inputs)
        .map(|(f, &q)| Ok(lp_norm(f, q)?.powf(q)))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, ins))
}

fn collect(n: usize, results: Vec<(f64, Vec<f64>)>) -> McReport {
    let samples = results.len();
    let output = Estimate::from_samples(&results.iter().map(|r| r.0).collect::<Vec<_>>());
    let width = results.first().map_or(0, |r| r.1.len());
    let inputs = (0..width)
        .map(|i| Estimate::from_samples(&results.iter().map(|r| r.1[i]).collect::<Vec<_>>()))
        .collect();
    McReport {
        n,
        samples,
        output,
        inputs,
    }
}

/// Monte-Carlo estimate over `samples` independent draws. Sample `i` at size
/// `n` uses the draw seeded by `task_seed(seed, n, i)`, so the result does not
/// depend on scheduling.
pub fn mc_norm(spec: &FamilySpec, n: usize, samples: usize, seed: u64) -> Result<McReport> {
    spec.validate()?;
    if samples == 0 {
        return Err(LabError::InvalidParameter("at least one sample is needed".into()));
    }
    let results = (0..samples)
        .into_par_iter()
        .map(|i| {
            let draw = spec.draw(n, task_seed(seed, n, i));
            powers(&spec.instance(n, &draw)?, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(n, results))
}

/// Most free signs the exact averages enumerate (`2^16` patterns).
pub const MAX_PATTERNS: u32 = 16;

fn enumerate(
    spec: &FamilySpec,
    n: usize,
    ranges: &[RangeInclusive<i64>],
    free: &[bool],
) -> Result<McReport> {
    let lens: Vec<usize> = ranges
        .iter()
        .map(|r| (r.end() - r.start() + 1).max(0) as usize)
        .collect();
    let bits: usize = lens.iter().zip(free).filter(|(_, &f)| f).map(|(l, _)| l).sum();
    if bits > MAX_PATTERNS as usize {
        return Err(LabError::SizeGuard(format!(
            "{bits} free signs exceed the enumeration limit of {MAX_PATTERNS}"
        )));
    }
    // bit offset of each free family inside the pattern code
    let mut offsets = Vec::with_capacity(lens.len());
    let mut used = 0;
    for (len, &f) in lens.iter().zip(free) {
        offsets.push(used);
        if f {
            used += len;
        }
    }
    let results = (0..1u64 << bits)
        .into_par_iter()
        .map(|code| {
            let families = (0..ranges.len())
                .map(|f| SignFamily {
                    lo: *ranges[f].start(),
                    signs: (0..lens[f])
                        .map(|i| if free[f] && code >> (offsets[f] + i) & 1 == 1 { -1 } else { 1 })
                        .collect(),
                })
                .collect();
            powers(&spec.instance(n, &RademacherDraw::from_families(families))?, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(n, results))
}

/// Exact expectation over every pattern of every sign the family reads.
pub fn exhaustive_expectation(spec: &FamilySpec, n: usize) -> Result<McReport> {
    spec.validate()?;
    let ranges = sign_ranges(spec.family, n, spec.m);
    let free = vec![true; ranges.len()];
    enumerate(spec, n, &ranges, &free)
}

/// Exact expectation of the output power with the input signs held at `+1`.
/// Each input sign enters `T` twice (once in the function, once in the
/// multiplier), so `T` depends only on the output signs and this average
/// equals the full one; input averages are not meaningful here.
pub fn output_expectation(spec: &FamilySpec, n: usize) -> Result<Estimate> {
    spec.validate()?;
    let ranges = sign_ranges(spec.family, n, spec.m);
    let free: Vec<bool> = (0..ranges.len()).map(|f| f == spec.m).collect();
    Ok(enumerate(spec, n, &ranges, &free)?.output)
}

/// `a(x) b(y)` on the square grid of the common line grid.
fn tensor(a: &SampledFunction, b: &SampledFunction) -> Result<SampledFunction> {
    a.same_layout(b)?;
    let g = *a.grid();
    let values = a
        .values()
        .iter()
        .flat_map(|x| b.values().iter().map(move |y| x * y))
        .collect();
    SampledFunction::new(TorusGrid::square(g.length(), g.points())?, values, Side::Space)
}

/// The two-dimensional variant: each sample draws two independent instances
/// `(A, B)`, forms `F_i = f_i^A (x) f_i^B` and `T_A (x) T_B` (the output of the
/// product multiplier on product inputs) and takes planar norms directly.
pub fn tensor_mc_norm(spec: &FamilySpec, n: usize, samples: usize, seed: u64) -> Result<McReport> {
    spec.validate()?;
    if samples == 0 {
        return Err(LabError::InvalidParameter("at least one sample is needed".into()));
    }
    let results = (0..samples)
        .into_par_iter()
        .map(|i| {
            let task = task_seed(seed, n, i);
            let a = spec.instance(n, &spec.draw(n, derive_seed(task, 0)))?;
            let b = spec.instance(n, &spec.draw(n, derive_seed(task, 1)))?;
            let t = tensor(&a.apply()?, &b.apply()?)?;
            let out = lp_norm(&t, spec.p)?.powf(spec.p);
            let ins = a
                .functions
                .iter()
                .zip(&b.functions)
                .zip(&spec.p_inputs)
                .map(|((fa, fb), &q)| Ok(lp_norm(&tensor(fa, fb)?, q)?.powf(q)))
                .collect::<Result<Vec<_>>>()?;
            Ok((out, ins))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(n, results))
}

/// Least-squares line through `(ln N, ln value)`; `residual` is the RMS
/// deviation in natural-log units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn fit_power_law(ns: &[f64], values: &[f64]) -> Result<PowerFit> {
    if ns.len() != values.len() {
        return Err(LabError::Dimension("fit needs one value per N".into()));
    }
    if ns.len() < 3 {
        return Err(LabError::DegenerateFit(format!(
            "{} points cannot test a power law",
            ns.len()
        )));
    }
    if ns.iter().chain(values).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(LabError::DegenerateFit("values must be positive and finite".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::DegenerateFit("all N coincide".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sq: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - exponent * a).powi(2)).sum();
    Ok(PowerFit {
        exponent,
        intercept,
        residual: (sq / k).sqrt(),
    })
}

/// Smoothness parameters for the multiplier norms reported next to the
/// averages; the Hormander norm is optional because it costs one Sobolev norm
/// per dyadic scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolNorms {
    pub r: f64,
    pub s: f64,
    pub hormander: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p: f64,
    /// Mean and standard error of `||T||_p^p`.
    pub mean: f64,
    pub stderr: f64,
    pub inputs: Vec<Estimate>,
    pub sobolev: Option<f64>,
    pub hormander: Option<f64>,
}

/// Compares the fitted growth of `||T||` with the growth the boundedness
/// inequality allows: `rhs = symbol_exponent + sum of fitted input exponents`.
/// A positive `gap` means the inequality fails for large `N` at this `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessityVerdict {
    pub r: f64,
    pub s: f64,
    pub symbol_exponent: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub expected_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub spec: FamilySpec,
    pub exponent_target: f64,
    pub input_targets: Vec<f64>,
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
    pub input_fits: Vec<PowerFit>,
    pub sobolev_fit: Option<PowerFit>,
    pub hormander_fit: Option<PowerFit>,
    pub verdict: Option<NecessityVerdict>,
}

pub const CSV_HEADER: &str = "family,N,p,mean,stderr,sobolev,hormander";

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:e},{:e},{},{}\n",
                self.spec.family.name(),
                r.n,
                r.p,
                r.mean,
                r.stderr,
                opt(r.sobolev),
                opt(r.hormander)
            ));
        }
        out
    }
}

/// Symbol norms of the draw of sample 0. Guard failures (grids too large for
/// the spectral norms) leave the entry empty.
fn symbol_norms(
    spec: &FamilySpec,
    n: usize,
    seed: u64,
    norms: &SymbolNorms,
) -> Result<(Option<f64>, Option<f64>)> {
    if spec.m != 2 || spec.mode == Mode::Collapsed {
        return Ok((None, None));
    }
    let inst = spec.instance(n, &spec.draw(n, task_seed(seed, n, 0)))?;
    let guarded = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_guard() => Ok(None),
        Err(e) => Err(e),
    };
    let sob = guarded(inst.symbol.to_symbol(true).and_then(|s| sobolev_norm(&s, norms.r, norms.s)))?;
    let hor = if norms.hormander {
        guarded(
            inst.symbol
                .to_symbol(false)
                .and_then(|s| hormander_norm(&s, norms.r, norms.s, None))
                .map(|rep| rep.hormander),
        )?
    } else {
        None
    };
    Ok((sob, hor))
}

fn optional_fit(ns: &[f64], vals: &[Option<f64>]) -> Option<PowerFit> {
    let v: Option<Vec<f64>> = vals.iter().copied().collect();
    v.and_then(|v| fit_power_law(ns, &v).ok())
}

/// Monte-Carlo averages at every `N`, power-law fits of the norm scales
/// `mean^(1/p)`, and (with `norms`) the multiplier norms and the necessity
/// verdict at that `(r, s)`.
pub fn scaling_sweep(
    spec: &FamilySpec,
    n_list: &[usize],
    samples: usize,
    seed: u64,
    norms: Option<SymbolNorms>,
) -> Result<ScalingReport> {
    spec.validate()?;
    if n_list.len() < 3 {
        return Err(LabError::DegenerateFit(format!(
            "{} sizes cannot test a power law",
            n_list.len()
        )));
    }
    if samples < 8 {
        return Err(LabError::InvalidParameter(format!(
            "sweeps average at least 8 draws, got {samples}"
        )));
    }
    for &n in n_list {
        spec.layout(n)?;
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mc = mc_norm(spec, n, samples, seed)?;
        let (sobolev, hormander) = match &norms {
            Some(nm) => symbol_norms(spec, n, seed, nm)?,
            None => (None, None),
        };
        rows.push(ScalingRow {
            n,
            p: spec.p,
            mean: mc.output.mean,
            stderr: mc.output.stderr,
            inputs: mc.inputs,
            sobolev,
            hormander,
        });
    }
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let out: Vec<f64> = rows.iter().map(|r| r.mean.powf(1.0 / spec.p)).collect();
    let fit = fit_power_law(&ns, &out)?;
    let input_fits = spec
        .p_inputs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let v: Vec<f64> = rows.iter().map(|r| r.inputs[i].root(q)).collect();
            fit_power_law(&ns, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let sobolev_fit = optional_fit(&ns, &rows.iter().map(|r| r.sobolev).collect::<Vec<_>>());
    let hormander_fit = optional_fit(&ns, &rows.iter().map(|r| r.hormander).collect::<Vec<_>>());
    let input_targets = spec.input_targets();
    let verdict = norms.map(|nm| {
        let symbol_exponent = spec.symbol_exponent(nm.r, nm.s);
        let rhs = symbol_exponent + input_fits.iter().map(|f| f.exponent).sum::<f64>();
        NecessityVerdict {
            r: nm.r,
            s: nm.s,
            symbol_exponent,
            lhs: fit.exponent,
            rhs,
            gap: fit.exponent - rhs,
            expected_gap: spec.output_target() - symbol_exponent - input_targets.iter().sum::<f64>(),
        }
    });
    Ok(ScalingReport {
        spec: spec.clone(),
        exponent_target: spec.output_target(),
        input_targets,
        n_list: n_list.to_vec(),
        samples,
        seed,
        rows,
        fitted_exponent: fit.exponent,
        fit_residual: fit.residual,
        input_fits,
        sobolev_fit,
        hormander_fit,
        verdict,
    })
}
