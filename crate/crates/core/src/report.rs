//! Tables behind the command-line front end: versioned CSV output, the
//! boundary table, the GCA-vs-tree comparison at one wealth level and the
//! randomised comparison over parameter ranges.

use std::fmt::Write as _;
use std::io;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::GcaBoundary;
use crate::btm::BtmOracle;
use crate::error::{Error, Result};
use crate::fd::{solve_obstacle, FdConfig};
use crate::model::{ModelParams, Problem};
use crate::numerics::Integrator;
use crate::primal::{PrimalSolution, PrimalSolver};
use crate::utility::UtilitySpec;

pub const CSV_VERSION: &str = "freebound-csv/1";
const SIG_DIGITS: i32 = 10;

/// Decimal rendering with ten significant digits; scientific outside `[1e-5, 1e15)`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", (SIG_DIGITS - 1) as usize, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// A CSV table: version line and `# key=value` metadata, header, rows,
/// then `# key=value` footer lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub footer: Vec<(String, String)>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            columns: columns.into_iter().map(Into::into).collect(),
            ..CsvTable::default()
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {CSV_VERSION}");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format_sig(*x),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        for (k, v) in &self.footer {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }

    pub fn write_to<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }
}

fn utility_label(spec: &UtilitySpec) -> String {
    match spec {
        UtilitySpec::Power { gamma } => format!("power(gamma={gamma})"),
        UtilitySpec::NonHara => "non_hara".to_string(),
        UtilitySpec::DualSum { q } => format!("dual_sum(q={q:?})"),
    }
}

fn model_meta(table: CsvTable, p: &ModelParams, spec: &UtilitySpec) -> CsvTable {
    table
        .with_meta("mu", p.mu)
        .with_meta("r", p.r)
        .with_meta("sigma", p.sigma)
        .with_meta("beta", p.beta)
        .with_meta("T", p.horizon)
        .with_meta("K", p.floor)
        .with_meta("utility", utility_label(spec))
}

/// Options of the boundary table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOptions {
    pub n_points: usize,
    pub btm_steps: Option<usize>,
    pub fd: Option<FdConfig>,
}

/// `t, tau, z_star, y_star, x_boundary` on a uniform `t` grid, optionally
/// with the tree boundary (`z_btm, x_btm`) and the finite-difference one (`z_fd`).
pub fn boundary_table(problem: &Problem, spec: &UtilitySpec, opts: &BoundaryOptions) -> Result<CsvTable> {
    if opts.n_points < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            value: opts.n_points as f64,
            reason: "at least two rows",
        });
    }
    let gca = GcaBoundary::new(problem)?;
    let horizon = problem.params().horizon;
    let mut columns = vec!["t", "tau", "z_star", "y_star", "x_boundary"];
    let btm = match opts.btm_steps {
        Some(n) => {
            columns.extend(["z_btm", "x_btm"]);
            let oracle = BtmOracle::new(problem, n)?;
            let layers = oracle.btm_boundary()?;
            Some((horizon / n as f64, layers))
        }
        None => None,
    };
    let fd = match &opts.fd {
        Some(cfg) => {
            columns.push("z_fd");
            Some(solve_obstacle(problem, cfg)?)
        }
        None => None,
    };
    let mut table = model_meta(CsvTable::new(columns), problem.params(), spec)
        .with_meta("command", "boundary")
        .with_meta("A", format_sig(gca.a))
        .with_meta("z0", format_sig(gca.z0))
        .with_meta("z_star_limit", format_sig(gca.z_star))
        .with_meta("b_star", format_sig(gca.b_star));
    if let Some(n) = opts.btm_steps {
        table = table.with_meta("btm_steps", n);
    }
    let mut worst_fd: Option<f64> = None;
    for i in 0..opts.n_points {
        let t = if i + 1 == opts.n_points {
            horizon
        } else {
            horizon * i as f64 / (opts.n_points - 1) as f64
        };
        let tau = problem.tau_at(t);
        let z = gca.at(tau);
        let mut row: Vec<Cell> = vec![t.into(), tau.into(), z.into(), z.exp().into(), gca.wealth(t)?.into()];
        if let Some((dt, layers)) = &btm {
            let k = (t / dt).round() as usize;
            let pt = layers.iter().find(|p| ((p.t / dt).round() as usize) == k);
            row.push(pt.map(|p| p.y.ln()).into());
            row.push(pt.map(|p| p.x).into());
        }
        if let Some(sol) = &fd {
            let zf = sol.boundary_at(tau);
            if let Some(zf) = zf {
                if tau > 0.0 {
                    let gap = (z - zf).abs();
                    worst_fd = Some(worst_fd.map_or(gap, |w: f64| w.max(gap)));
                }
            }
            row.push(zf.into());
        }
        table.push(row);
    }
    if let Some(w) = worst_fd {
        table.footer.push(("max_abs_z_star_minus_z_fd".into(), format_sig(w)));
    }
    Ok(table)
}

/// GCA against the tree at `t = 0` and one wealth level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub x: f64,
    pub gca_value: f64,
    pub btm_value: f64,
    /// GCA minus tree.
    pub difference: f64,
    /// `|difference| / |btm_value|`.
    pub relative_difference: f64,
    pub gca_strategy: f64,
    pub btm_strategy: f64,
    pub gca_strategy_fraction: f64,
    pub btm_strategy_fraction: f64,
    pub gca_seconds: f64,
    pub btm_seconds: f64,
}

pub fn compare(problem: &Problem, x: f64, btm_steps: usize, quad: Integrator) -> Result<Comparison> {
    let start = Instant::now();
    let gca: PrimalSolution = PrimalSolver::with_integrator(problem, quad)?.primal_value(0.0, x)?;
    let gca_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let btm = BtmOracle::new(problem, btm_steps)?.btm_primal(x)?;
    let btm_seconds = start.elapsed().as_secs_f64();
    let difference = gca.value - btm.value;
    Ok(Comparison {
        x,
        gca_value: gca.value,
        btm_value: btm.value,
        difference,
        relative_difference: difference.abs() / btm.value.abs(),
        gca_strategy: gca.strategy,
        btm_strategy: btm.strategy,
        gca_strategy_fraction: gca.strategy_fraction,
        btm_strategy_fraction: btm.strategy_fraction,
        gca_seconds,
        btm_seconds,
    })
}

pub fn comparison_table(c: &Comparison, problem: &Problem, spec: &UtilitySpec, btm_steps: usize) -> CsvTable {
    let mut table = model_meta(CsvTable::new(["quantity", "value"]), problem.params(), spec)
        .with_meta("command", "compare")
        .with_meta("x", format_sig(c.x))
        .with_meta("btm_steps", btm_steps);
    let rows: [(&str, f64); 11] = [
        ("gca_value", c.gca_value),
        ("btm_value", c.btm_value),
        ("difference", c.difference),
        ("relative_difference", c.relative_difference),
        ("gca_strategy", c.gca_strategy),
        ("btm_strategy", c.btm_strategy),
        ("gca_strategy_fraction", c.gca_strategy_fraction),
        ("btm_strategy_fraction", c.btm_strategy_fraction),
        ("gca_seconds", c.gca_seconds),
        ("btm_seconds", c.btm_seconds),
        ("x", c.x),
    ];
    for (name, v) in rows {
        table.push(vec![name.into(), v.into()]);
    }
    table
}

/// Uniform sampling boxes for the randomised comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingRanges {
    pub mu: (f64, f64),
    pub r: (f64, f64),
    pub beta: (f64, f64),
    pub sigma: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            mu: (0.05, 0.15),
            r: (0.02, 0.08),
            beta: (0.05, 0.15),
            sigma: (0.10, 0.40),
            gamma: (0.2, 0.6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2Config {
    pub n_samples: usize,
    pub seed: u64,
    pub x: f64,
    pub horizon: f64,
    pub floor: f64,
    pub btm_steps: usize,
    pub ranges: SamplingRanges,
    pub quad: (usize, f64),
}

impl Table2Config {
    pub fn new(seed: u64) -> Self {
        Table2Config {
            n_samples: 10,
            seed,
            x: 1.5,
            horizon: 1.0,
            floor: 1.0,
            btm_steps: crate::btm::DEFAULT_STEPS,
            ranges: SamplingRanges::default(),
            quad: (crate::dual_value::DEFAULT_ORDER, crate::dual_value::DEFAULT_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub utility: String,
    pub params: ModelParams,
    pub gca_value: f64,
    pub btm_value: f64,
    pub gca_strategy_fraction: f64,
    pub btm_strategy_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub utility: String,
    pub n: usize,
    pub abs_value: MeanStd,
    pub rel_value: MeanStd,
    pub abs_strategy: MeanStd,
    pub rel_strategy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
    pub samples: Vec<Sample>,
    pub rejected: usize,
}

/// Draws until `n_samples` parameter sets pass the assumption and the tree's
/// probability check, then compares GCA and tree at `(0, x)`.
pub fn table2(cfg: &Table2Config) -> Result<Table2> {
    let specs = [UtilitySpec::Power { gamma: f64::NAN }, UtilitySpec::NonHara];
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut rejected = 0;
    for (stream, family) in specs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream as u64);
        let mut drawn: Vec<(ModelParams, UtilitySpec)> = Vec::new();
        let mut attempts = 0;
        while drawn.len() < cfg.n_samples {
            attempts += 1;
            if attempts > 1000 * cfg.n_samples.max(1) {
                return Err(Error::Config("parameter ranges rarely satisfy the assumption".into()));
            }
            let ranges = &cfg.ranges;
            let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
            let params = ModelParams {
                mu: draw(ranges.mu),
                r: draw(ranges.r),
                beta: draw(ranges.beta),
                sigma: draw(ranges.sigma),
                horizon: cfg.horizon,
                floor: cfg.floor,
            };
            let gamma = draw(ranges.gamma);
            let spec = match family {
                UtilitySpec::Power { .. } => UtilitySpec::Power { gamma },
                other => other.clone(),
            };
            let usable = Problem::new(params, &spec)
                .and_then(|p| {
                    p.validate_assumption()?;
                    BtmOracle::new(&p, cfg.btm_steps)?;
                    Ok(())
                })
                .is_ok();
            if usable {
                drawn.push((params, spec));
            } else {
                rejected += 1;
            }
        }
        let evaluated: Vec<Sample> = drawn
            .par_iter()
            .map(|(params, spec)| -> Result<Sample> {
                let problem = Problem::new(*params, spec)?;
                let quad = Integrator::adaptive(cfg.quad.0, cfg.quad.1);
                let gca = PrimalSolver::with_integrator(&problem, quad)?.primal_value(0.0, cfg.x)?;
                let btm = BtmOracle::new(&problem, cfg.btm_steps)?.btm_primal(cfg.x)?;
                Ok(Sample {
                    utility: utility_label(spec),
                    params: *params,
                    gca_value: gca.value,
                    btm_value: btm.value,
                    gca_strategy_fraction: gca.strategy_fraction,
                    btm_strategy_fraction: btm.strategy_fraction,
                })
            })
            .collect::<Result<_>>()?;
        let abs_v: Vec<f64> = evaluated.iter().map(|s| (s.gca_value - s.btm_value).abs()).collect();
        let rel_v: Vec<f64> = evaluated
            .iter()
            .map(|s| relative_gap(s.gca_value, s.btm_value))
            .collect();
        let abs_s: Vec<f64> = evaluated
            .iter()
            .map(|s| (s.gca_strategy_fraction - s.btm_strategy_fraction).abs())
            .collect();
        let rel_s: Vec<f64> = evaluated
            .iter()
            .map(|s| relative_gap(s.gca_strategy_fraction, s.btm_strategy_fraction))
            .collect();
        rows.push(Table2Row {
            utility: match family {
                UtilitySpec::Power { .. } => "power".to_string(),
                _ => "non_hara".to_string(),
            },
            n: evaluated.len(),
            abs_value: MeanStd::of(&abs_v),
            rel_value: MeanStd::of(&rel_v),
            abs_strategy: MeanStd::of(&abs_s),
            rel_strategy: MeanStd::of(&rel_s),
        });
        samples.extend(evaluated);
    }
    Ok(Table2 {
        rows,
        samples,
        rejected,
    })
}

/// `|a - b| / |b|`, zero when both vanish (both methods stop at once).
fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

pub fn table2_summary(t: &Table2, cfg: &Table2Config) -> CsvTable {
    let mut table = CsvTable::new([
        "utility",
        "n",
        "mean_abs_value_diff",
        "std_abs_value_diff",
        "mean_rel_value_diff",
        "std_rel_value_diff",
        "mean_abs_strategy_diff",
        "std_abs_strategy_diff",
        "mean_rel_strategy_diff",
        "std_rel_strategy_diff",
    ])
    .with_meta("command", "table2")
    .with_meta("seed", cfg.seed)
    .with_meta("samples", cfg.n_samples)
    .with_meta("x", format_sig(cfg.x))
    .with_meta("T", cfg.horizon)
    .with_meta("K", cfg.floor)
    .with_meta("btm_steps", cfg.btm_steps)
    .with_meta("rejected", t.rejected);
    for r in &t.rows {
        table.push(vec![
            r.utility.as_str().into(),
            Cell::Text(r.n.to_string()),
            r.abs_value.mean.into(),
            r.abs_value.std.into(),
            r.rel_value.mean.into(),
            r.rel_value.std.into(),
            r.abs_strategy.mean.into(),
            r.abs_strategy.std.into(),
            r.rel_strategy.mean.into(),
            r.rel_strategy.std.into(),
        ]);
    }
    table
}

pub fn table2_samples(t: &Table2, cfg: &Table2Config) -> CsvTable {
    let mut table = CsvTable::new([
        "utility",
        "mu",
        "r",
        "sigma",
        "beta",
        "gca_value",
        "btm_value",
        "gca_strategy_fraction",
        "btm_strategy_fraction",
    ])
    .with_meta("command", "table2")
    .with_meta("seed", cfg.seed);
    for s in &t.samples {
        table.push(vec![
            s.utility.as_str().into(),
            s.params.mu.into(),
            s.params.r.into(),
            s.params.sigma.into(),
            s.params.beta.into(),
            s.gca_value.into(),
            s.btm_value.into(),
            s.gca_strategy_fraction.into(),
            s.btm_strategy_fraction.into(),
        ]);
    }
    table
}

/// One CSV per simulated path: `t, X, pi`.
pub fn path_table(path: &crate::primal::PathRecord, problem: &Problem, spec: &UtilitySpec, x0: f64) -> CsvTable {
    let mut table = model_meta(CsvTable::new(["t", "X", "pi"]), problem.params(), spec)
        .with_meta("command", "simulate")
        .with_meta("seed", path.seed)
        .with_meta("path", path.path)
        .with_meta("x0", format_sig(x0))
        .with_meta("stop_time", format_sig(path.stop_time))
        .with_meta("hit", path.hit);
    for i in 0..path.times.len() {
        table.push(vec![
            path.times[i].into(),
            path.wealth[i].into(),
            path.strategy[i].into(),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_sig(1.0), "1.000000000");
        assert_eq!(format_sig(1.532096109810536), "1.532096110");
        assert_eq!(format_sig(-0.2379483924), "-0.2379483924");
        assert_eq!(format_sig(123456.789), "123456.7890");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.5e-9), "1.500000000e-9");
        assert_eq!(format_sig(2.5e20), "2.500000000e20");
    }

    #[test]
    fn render_layout() {
        let mut t = CsvTable::new(["a", "b"]).with_meta("seed", 42);
        t.push(vec![1.0.into(), Cell::Empty]);
        t.footer.push(("max".into(), "0.5".into()));
        assert_eq!(
            t.render(),
            "# freebound-csv/1\n# seed=42\na,b\n1.000000000,\n# max=0.5\n"
        );
    }

    #[test]
    fn boundary_rows_decrease_and_end_at_z0() {
        let cfg = crate::config::RunConfig::reference_example(UtilitySpec::NonHara);
        let p = cfg.problem().unwrap();
        let opts = BoundaryOptions {
            n_points: 11,
            btm_steps: None,
            fd: None,
        };
        let t = boundary_table(&p, &cfg.utility, &opts).unwrap();
        let xs: Vec<f64> = t
            .column("x_boundary")
            .unwrap()
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) => *x,
                _ => panic!(),
            })
            .collect();
        assert_eq!(xs.len(), 11);
        for w in xs.windows(2) {
            assert!(w[1] < w[0]);
        }
        let z0 = p.solve_z0().unwrap();
        let want: f64 = [-3.0f64, -1.0].iter().map(|q| ((q - 1.0) * z0).exp()).sum::<f64>() + 1.0;
        assert!((xs[10] - want).abs() < 1e-12);
    }

    #[test]
    fn mean_and_sample_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
