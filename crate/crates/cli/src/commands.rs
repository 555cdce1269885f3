use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use bilinear_lab::counterexamples::{
    scaling_sweep, task_seed, Family, FamilySpec, Mode, SymbolNorms,
};
use bilinear_lab::decomposition::{
    budget_ratio, level_records, partition_subclasses, random_test_function, PieceEvaluator,
};
use bilinear_lab::families::{lab_grid, multiscale_bump, smooth_family};
use bilinear_lab::multiplier::{
    apply_bilinear, apply_bilinear_bruteforce, apply_bilinear_periodic, operand_grid,
};
use bilinear_lab::norms::{hormander_norm, sobolev_norm, tl_norm};
use bilinear_lab::wavelets::{
    analyze, daubechies_filters, genders_at, highpass, level_square_norm, synthesize,
    WaveletIndex, WaveletSystem, MAX_ORDER,
};
use bilinear_lab::{lp_norm, Complex64, IndexBox, SampledFunction, Side, Symbol, TorusGrid};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::io::{read_function, write_json, FunctionFile, Report, Sink, Table};
use crate::{Command, Failure, Format, OutputArgs};

/// Built-in symbols: `constant-one`, `smooth:K` (K = 0..4) and
/// `multiscale:BETA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedSymbol {
    ConstantOne,
    Smooth(usize),
    Multiscale(f64),
}

impl FromStr for NamedSymbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown symbol '{s}' (constant-one, smooth:K, multiscale:BETA)");
        match s.split_once(':') {
            None if s == "constant-one" => Ok(NamedSymbol::ConstantOne),
            Some(("smooth", k)) => match k.parse() {
                Ok(k) if k < 5 => Ok(NamedSymbol::Smooth(k)),
                _ => Err(bad()),
            },
            Some(("multiscale", b)) => b
                .parse()
                .ok()
                .filter(|b: &f64| b.is_finite())
                .map(NamedSymbol::Multiscale)
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for NamedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedSymbol::ConstantOne => write!(f, "constant-one"),
            NamedSymbol::Smooth(k) => write!(f, "smooth:{k}"),
            NamedSymbol::Multiscale(b) => write!(f, "multiscale:{b}"),
        }
    }
}

impl Serialize for NamedSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl NamedSymbol {
    fn build(self, grid: &TorusGrid) -> bilinear_lab::Result<Symbol> {
        match self {
            NamedSymbol::ConstantOne => {
                Symbol::from_fn(*grid, IndexBox::full(grid), |_, _| Complex64::new(1.0, 0.0))
            }
            NamedSymbol::Smooth(k) => Ok(smooth_family(grid)?.swap_remove(k)),
            NamedSymbol::Multiscale(beta) => multiscale_bump(grid, beta, 5),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ApplyArgs {
    #[arg(long)]
    symbol: NamedSymbol,
    /// Function file of the first operand
    #[arg(long)]
    f: PathBuf,
    /// Function file of the second operand
    #[arg(long)]
    g: PathBuf,
    /// Where to store T(f, g) (default: <out-dir>/<name>_output.json)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Refuse symbols whose output frequencies would fold around the torus
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct NormsArgs {
    #[arg(long)]
    symbol: NamedSymbol,
    /// Torus length of the symbol grid
    #[arg(long = "L", default_value_t = 16.0)]
    length: f64,
    /// Points per axis of the symbol grid
    #[arg(long = "M", default_value_t = 256)]
    points: usize,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 0.75)]
    s: f64,
    /// Also report the Triebel-Lizorkin norm with this q
    #[arg(long)]
    q: Option<f64>,
    /// Also report the Hormander norm over the auto-derived scales
    #[arg(long)]
    hormander: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long)]
    symbol: NamedSymbol,
    /// Lab grid resolution: spacing 2^-q on a torus of length 32
    #[arg(long, default_value_t = 7)]
    q: u32,
    #[arg(long, default_value_t = 6)]
    order: usize,
    #[arg(long, default_value_t = 10)]
    depth: u32,
    /// Finest level analysed
    #[arg(long, default_value_t = 3)]
    levels: u32,
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    #[arg(long, default_value_t = 0.75)]
    s: f64,
    /// Measure the heavy/light piece estimates on random operands
    #[arg(long)]
    pieces: bool,
    /// Frequency radius of the random operands
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    /// Embed every coefficient record in the JSON report
    #[arg(long)]
    coefficients: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Widened,
    Resolved,
    Collapsed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Widened => Mode::Widened,
            ModeArg::Resolved => Mode::Resolved,
            ModeArg::Collapsed => Mode::Collapsed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FamilyArgs {
    /// bilinear_sigmaN, mlinear_sigmaN, single_bump or mixed_k
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Signed input slots of the mixed family (default: all)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Widened)]
    mode: ModeArg,
    /// Lebesgue exponent of input 1 (default 2)
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p3: Option<f64>,
    /// Output exponent (default: the Holder exponent of the inputs)
    #[arg(long)]
    p: Option<f64>,
}

impl FamilyArgs {
    fn spec(&self) -> Result<FamilySpec, Failure> {
        let family = Family::parse(&self.family)
            .ok_or_else(|| Failure::Usage(format!("unknown family '{}'", self.family)))?;
        let given = [self.p1, self.p2, self.p3];
        if given[self.m.min(3)..].iter().any(Option::is_some) {
            return Err(Failure::Usage(format!("more input exponents than m = {}", self.m)));
        }
        let p_inputs: Vec<f64> = given.iter().take(self.m).map(|p| p.unwrap_or(2.0)).collect();
        let p = self.p.unwrap_or_else(|| 1.0 / p_inputs.iter().map(|q| 1.0 / q).sum::<f64>());
        let spec = FamilySpec {
            family,
            m: self.m,
            k: self.k.unwrap_or(self.m),
            mode: self.mode.into(),
            p_inputs,
            p,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    #[arg(long = "N")]
    n: usize,
    /// Store the inputs and T as function files next to the report
    #[arg(long)]
    save: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Sizes N, comma separated
    #[arg(long = "N", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Monte-Carlo samples per size
    #[arg(long = "S", default_value_t = 16)]
    samples: usize,
    /// Track the symbol's L^r_s norm (needs --s)
    #[arg(long, requires = "s")]
    r: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Track the Hormander norm as well
    #[arg(long, requires = "s")]
    hormander: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Wavelets,
    Oracle,
    Reconstruction,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
}

/// Outcome of a command before it is written out.
struct Outcome {
    results: Value,
    table: Option<Table>,
    failed_checks: usize,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Runtime(e.into()))
}

pub fn run(command: Command, out: &OutputArgs) -> Result<Vec<PathBuf>, Failure> {
    let (name, params) = match &command {
        Command::Apply(a) => ("apply", to_value(a)?),
        Command::Norms(a) => ("norms", to_value(a)?),
        Command::Decompose(a) => ("decompose", to_value(a)?),
        Command::Counterexample(a) => ("counterexample", to_value(a)?),
        Command::Sweep(a) => ("sweep", to_value(a)?),
        Command::Verify(a) => ("verify", to_value(a)?),
    };
    let sink = Sink {
        dir: out.out_dir.clone(),
        stem: out.name.clone().unwrap_or_else(|| name.to_string()),
        json: out.format != Format::Csv,
        csv: out.format != Format::Json,
    };
    let t0 = Instant::now();
    let outcome = match command {
        Command::Apply(a) => apply(&a, &sink)?,
        Command::Norms(a) => norms(&a)?,
        Command::Decompose(a) => decompose(&a, out.seed)?,
        Command::Counterexample(a) => counterexample(&a, out.seed, &sink)?,
        Command::Sweep(a) => sweep(&a, out.seed)?,
        Command::Verify(a) => verify(a.suite, out.seed)?,
    };
    let compute = t0.elapsed().as_secs_f64();
    sink.prepare()?;
    let mut params = params;
    params["output"] = to_value(out)?;
    let report = Report {
        command: name.to_string(),
        params,
        results: outcome.results,
        timings: BTreeMap::from([("compute".to_string(), compute)]),
        seed: out.seed,
    };
    let written = sink.emit(&report, outcome.table)?;
    if outcome.failed_checks > 0 {
        return Err(Failure::Checks(format!(
            "{} verification checks failed, see {}",
            outcome.failed_checks,
            sink.path("json").display()
        )));
    }
    Ok(written)
}

fn norms_of(f: &SampledFunction) -> bilinear_lab::Result<Value> {
    Ok(json!({
        "l1": lp_norm(f, 1.0)?,
        "l2": lp_norm(f, 2.0)?,
        "linf": lp_norm(f, f64::INFINITY)?,
    }))
}

fn apply(a: &ApplyArgs, sink: &Sink) -> Result<Outcome, Failure> {
    let f = read_function(&a.f)?.to_function()?;
    let g = read_function(&a.g)?.to_function()?;
    let op = *f.grid();
    if op.dim() != 1 {
        return Err(Failure::Usage("operands must be functions on a line".into()));
    }
    let symbol_grid = TorusGrid::square(op.points() as f64 / op.length(), op.points())?;
    let sigma = a.symbol.build(&symbol_grid)?;
    let t = if a.strict {
        apply_bilinear(&sigma, &f, &g)?
    } else {
        apply_bilinear_periodic(&sigma, &f, &g)?
    };
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| sink.dir.join(format!("{}_output.json", sink.stem)));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
    }
    write_json(&path, &FunctionFile::from_function(&t))?;
    Ok(Outcome {
        results: json!({
            "output_file": path,
            "symbol_grid": symbol_grid,
            "symbol_support": sigma.support(),
            "output_norms": norms_of(&t)?,
        }),
        table: None,
        failed_checks: 0,
    })
}

fn norms(a: &NormsArgs) -> Result<Outcome, Failure> {
    let grid = TorusGrid::square(a.length, a.points)?;
    let sigma = a.symbol.build(&grid)?;
    let mut results = json!({
        "grid": grid,
        "support": sigma.support(),
        "sobolev": sobolev_norm(&sigma, a.r, a.s)?,
    });
    if let Some(q) = a.q {
        results["triebel_lizorkin"] = json!(tl_norm(&sigma, a.r, q, a.s)?);
    }
    if a.hormander {
        results["hormander"] = to_value(&hormander_norm(&sigma, a.r, a.s, None)?)?;
    }
    Ok(Outcome {
        results,
        table: None,
        failed_checks: 0,
    })
}

fn decompose(a: &DecomposeArgs, seed: u64) -> Result<Outcome, Failure> {
    let grid = lab_grid(a.q)?;
    let ws = WaveletSystem::new(a.order, a.depth)?;
    let sigma = a.symbol.build(&grid)?;
    let coeffs = analyze(&sigma, &ws, a.levels)?;
    let sob = sobolev_norm(&sigma, a.r, a.s)?;
    let operands = if a.pieces {
        let op = operand_grid(&grid)?;
        let f = random_test_function(&op, a.radius, task_seed(seed, 0, 0))?;
        let g = random_test_function(&op, a.radius, task_seed(seed, 0, 1))?;
        Some((f, g))
    } else {
        None
    };
    let mut eval = match &operands {
        Some((f, g)) => Some(PieceEvaluator::new(&ws, &grid, f, g)?),
        None => None,
    };
    let mut levels = Vec::new();
    for l in 0..=a.levels {
        let mut entry = json!({
            "lambda": l,
            "count": coeffs.at_level(l).count(),
            "level_square_norm": level_square_norm(&coeffs, &ws, l, a.r)?,
        });
        if l >= 1 {
            let part = partition_subclasses(&coeffs, l, &ws)?;
            entry["subclasses"] = json!(part.len());
            entry["budget_ratio"] = json!(budget_ratio(&part, &ws, a.r, a.s, sob)?);
            if let Some(ev) = eval.as_mut() {
                entry["records"] = to_value(&level_records(&coeffs, l, &ws, ev, sob, a.r, a.s)?)?;
            }
        }
        levels.push(entry);
    }
    let records = coeffs.records();
    let mut table = Table::new(&["lambda", "G", "mu1", "mu2", "re", "im"]);
    for c in &records {
        table.rows.push(vec![
            c.lambda.to_string(),
            c.gender.clone(),
            c.mu[0].to_string(),
            c.mu[1].to_string(),
            format!("{:e}", c.re),
            format!("{:e}", c.im),
        ]);
    }
    let mut results = json!({
        "grid": grid,
        "sobolev": sob,
        "coefficient_count": coeffs.len(),
        "energy": coeffs.energy(),
        "levels": levels,
    });
    if a.coefficients {
        results["coefficients"] = to_value(&records)?;
    }
    Ok(Outcome {
        results,
        table: Some(table),
        failed_checks: 0,
    })
}

fn counterexample(a: &CounterexampleArgs, seed: u64, sink: &Sink) -> Result<Outcome, Failure> {
    let spec = a.family.spec()?;
    let draw = spec.draw(a.n, task_seed(seed, a.n, 0));
    let inst = spec.instance(a.n, &draw)?;
    let t = inst.apply()?;
    let inputs = inst
        .functions
        .iter()
        .zip(&spec.p_inputs)
        .map(|(f, &q)| lp_norm(f, q))
        .collect::<bilinear_lab::Result<Vec<f64>>>()?;
    let mut results = json!({
        "N": a.n,
        "spec": spec,
        "operand_grid": inst.layout().grid,
        "c_window": inst.c_window,
        "symbol_terms": inst.symbol.terms.len(),
        "symbol_sup": inst.symbol.sup(),
        "input_norms": inputs,
        "output_norm": lp_norm(&t, spec.p)?,
    });
    if a.save {
        sink.prepare()?;
        let mut files = Vec::new();
        for (i, f) in inst.functions.iter().chain(std::iter::once(&t)).enumerate() {
            let label = if i < inst.functions.len() { format!("f{}", i + 1) } else { "T".into() };
            let path = sink.dir.join(format!("{}_{label}.json", sink.stem));
            write_json(&path, &FunctionFile::from_function(f))?;
            files.push(path);
        }
        results["files"] = to_value(&files)?;
    }
    Ok(Outcome {
        results,
        table: None,
        failed_checks: 0,
    })
}

fn sweep(a: &SweepArgs, seed: u64) -> Result<Outcome, Failure> {
    let spec = a.family.spec()?;
    let norms = a.s.map(|s| SymbolNorms {
        r: a.r.unwrap_or(2.0),
        s,
        hormander: a.hormander,
    });
    let report = scaling_sweep(&spec, &a.n, a.samples, seed, norms)?;
    Ok(Outcome {
        results: to_value(&report)?,
        table: Some(Table::from_csv(&report.to_csv())?),
        failed_checks: 0,
    })
}

#[derive(Debug, Serialize)]
struct Check {
    suite: &'static str,
    check: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(suite: &'static str, check: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check {
        suite,
        check: check.into(),
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

fn riemann(values: &[f64], depth: u32, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 2f64.powi(-(depth as i32));
    values.iter().enumerate().map(|(m, v)| f(m as f64 * h, *v)).sum::<f64>() * h
}

fn wavelet_checks(seed: u64) -> bilinear_lab::Result<Vec<Check>> {
    let mut out = Vec::new();
    for order in 1..=MAX_ORDER {
        let h = daubechies_filters(order)?;
        let g = highpass(&h);
        let n = h.len() as i64;
        let mut defect: f64 = 0.0;
        for m in -(n / 2)..=(n / 2) {
            let dot = |a: &[f64], b: &[f64]| -> f64 {
                (0..n)
                    .filter(|t| (0..n).contains(&(t + 2 * m)))
                    .map(|t| a[t as usize] * b[(t + 2 * m) as usize])
                    .sum()
            };
            let delta = if m == 0 { 1.0 } else { 0.0 };
            defect = defect
                .max((dot(&h, &h) - delta).abs())
                .max((dot(&g, &g) - delta).abs())
                .max(dot(&h, &g).abs());
        }
        out.push(check("wavelets", format!("filter orthogonality, order {order}"), defect, 1e-12));
        // relative to the size of the summands, which reach 1e5 at order 10
        let moment = (0..order as i32)
            .map(|a| {
                let terms = g.iter().enumerate().map(|(t, v)| (t as f64).powi(a) * v);
                terms.clone().sum::<f64>().abs() / terms.map(f64::abs).sum::<f64>()
            })
            .fold(0.0, f64::max);
        out.push(check("wavelets", format!("discrete moments, order {order}"), moment, 1e-11));
    }
    let depth = 10;
    let ws = WaveletSystem::new(6, depth)?;
    let nf = riemann(ws.father(), depth, |_, v| v * v).sqrt();
    let nm = riemann(ws.mother(), depth, |_, v| v * v).sqrt();
    out.push(check("wavelets", "|psi_F|_2 - 1, order 6", (nf - 1.0).abs(), 1e-6));
    out.push(check("wavelets", "|psi_M|_2 - 1, order 6", (nm - 1.0).abs(), 1e-6));
    let moment = (0..6)
        .map(|a| riemann(ws.mother(), depth, |x, v| x.powi(a) * v).abs())
        .fold(0.0, f64::max);
    out.push(check("wavelets", "moments of psi_M, order 6", moment, 1e-5));
    let grid = lab_grid(8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = (0..20)
        .map(|_| {
            let level = rng.gen_range(0..=2);
            let gs = genders_at(level);
            let span = 3i64 << level;
            WaveletIndex::new(
                level,
                gs[rng.gen_range(0..gs.len())],
                [rng.gen_range(-span..span), rng.gen_range(-span..span)],
            )
        })
        .collect::<bilinear_lab::Result<Vec<_>>>()?;
    let tw = idx.iter().map(|i| ws.tensor(i, &grid)).collect::<bilinear_lab::Result<Vec<_>>>()?;
    let mut gram: f64 = 0.0;
    for a in 0..tw.len() {
        for b in a..tw.len() {
            let target = if idx[a] == idx[b] { 1.0 } else { 0.0 };
            gram = gram.max((tw[a].inner(&tw[b]) - target).abs());
        }
    }
    out.push(check("wavelets", "Gram matrix of 20 tensor wavelets", gram, 1e-6));
    Ok(out)
}

fn oracle_checks(seed: u64) -> bilinear_lab::Result<Vec<Check>> {
    let sgrid = TorusGrid::square(4.0, 32)?;
    let op = operand_grid(&sgrid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let bx = IndexBox::new([-8, -7], [7, 8]);
        let sigma = Symbol::new(sgrid, bx, (0..bx.len()).map(|_| c()).collect())?;
        let f = SampledFunction::new(op, (0..32).map(|_| c()).collect(), Side::Space)?;
        let g = SampledFunction::new(op, (0..32).map(|_| c()).collect(), Side::Space)?;
        let fast = apply_bilinear(&sigma, &f, &g)?;
        worst = worst.max(fast.relative_error(&apply_bilinear_bruteforce(&sigma, &f, &g)?));
    }
    Ok(vec![check("oracle", "fast vs direct sums, 20 trials at M=32", worst, 1e-10)])
}

fn reconstruction_checks() -> bilinear_lab::Result<Vec<Check>> {
    let ws = WaveletSystem::new(6, 10)?;
    let grid = lab_grid(8)?;
    smooth_family(&grid)?
        .iter()
        .enumerate()
        .map(|(k, sigma)| {
            let c = analyze(sigma, &ws, 4)?;
            let back = synthesize(&c, &ws, Some(*sigma.support()))?;
            Ok(check("reconstruction", format!("smooth:{k}"), back.relative_error(sigma)?, 1e-4))
        })
        .collect()
}

fn verify(suite: Suite, seed: u64) -> Result<Outcome, Failure> {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Wavelets | Suite::All) {
        checks.extend(wavelet_checks(seed)?);
    }
    if matches!(suite, Suite::Oracle | Suite::All) {
        checks.extend(oracle_checks(seed)?);
    }
    if matches!(suite, Suite::Reconstruction | Suite::All) {
        checks.extend(reconstruction_checks()?);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let mut table = Table::new(&["suite", "check", "value", "tolerance", "pass"]);
    for c in &checks {
        table.rows.push(vec![
            c.suite.to_string(),
            c.check.clone(),
            format!("{:e}", c.value),
            format!("{:e}", c.tolerance),
            c.pass.to_string(),
        ]);
    }
    Ok(Outcome {
        results: json!({ "passed": checks.len() - failed, "failed": failed, "checks": checks }),
        table: Some(table),
        failed_checks: failed,
    })
}
