//! Command-line front end: sample paths, yield and bond curves,
//! calibration, instrument pricing and Monte Carlo self-checks.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 calibration or
//! no-arbitrage failure, 3 statistical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cryptorates::derivatives::{
    bond_call_b4, bond_put_b4, caplet_price, digital_call_price, strike_notional, BondOptionSpec, CapletSpec,
    OptionKind, OptionMethod,
};
use cryptorates::fx::{
    crypto_crypto_call_mc, crypto_usd_call, crypto_usd_call_joint_mc, FxMethod, KernelLeg, MultiCurrencyMarket,
};
use cryptorates::kernels::{kernel_value, BesselNParams, ComplexBessel3Params, KernelModel, SovereignGbmParams};
use cryptorates::mc::{martingale_test, martingale_test_with, price_claim, strictness_test, McOptions, OracleReport};
use cryptorates::stochastic::{simulate_grid, FactorState, RngStream, VolatilityCurve};
use cryptorates::term_structure::{
    bond_price, calibrate_bessel3, calibrate_bessel4, curve_from_rates, forward_rate, yield_curve, YieldPoint,
    YieldSample, ZERO_MATURITY_PROXY,
};
use cryptorates::{Method, PriceQuote};
use serde::{Deserialize, Serialize};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

const CAPABILITIES: &str = "\
supported (instrument, model, method) combinations:
  digital           bessel3                      closed-form, mc
  caplet            bessel3                      quadrature, mc
  bond-call/put     bessel4                      series, quadrature, mc
  bond-call/put     bessel3, bessel-n, complex   mc
  fx-crypto-crypto  market in the instrument     mc
  fx-crypto-usd     bessel3, bessel4             quadrature, mc
  fx-crypto-usd     bessel-n, complex            mc";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] cryptorates::Error),
    #[error("statistical check failed: {0}")]
    Statistical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cryptorates::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(E::Calibration { .. } | E::Constraint(_)) => 2,
            CliError::Core(E::Degenerate(_)) | CliError::Statistical(_) => 3,
            CliError::Core(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cryptorates", version, about = "Zero-short-rate term structures from reciprocal Bessel kernels")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Random seed for every Monte Carlo stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = cryptorates::mc::DEFAULT_SAMPLES)]
    samples: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Pass threshold for statistical checks, in standard errors.
    #[arg(long, global = true, default_value_t = cryptorates::mc::Z_THRESHOLD)]
    tol: f64,
    /// Kernel: bessel3 | bessel4 | bessel-n:<n> | complex-bessel3.
    #[arg(long, global = true, default_value = "bessel3")]
    model: String,
    /// Model JSON file; overrides `--model`.
    #[arg(long, global = true)]
    model_file: Option<PathBuf>,
    /// Imaginary centre of the complex kernel as `x,y,z`.
    #[arg(long, global = true, default_value = "0.02,0,0.01")]
    delta: String,
    /// Constant volatility; defaults to 0.6 for Bessel(4) and 0.75 otherwise.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Volatility curve JSON `{"knots": [[t, sigma], ...]}`; overrides `--sigma`.
    #[arg(long, global = true)]
    vol_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample kernel paths on a uniform grid.
    SimulatePaths {
        #[arg(long, default_value_t = 6)]
        paths: u64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Final time, also the maturity of the reported bond.
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
    },
    /// Initial yield curves, one per volatility.
    YieldCurve {
        /// Comma-separated constant volatilities; ignored with `--vol-file`.
        #[arg(long, default_value = "0.3,0.6,0.9")]
        sigmas: String,
        #[command(flatten)]
        grid: MaturityGrid,
    },
    /// Initial bond prices, yields and forward rates.
    BondCurve {
        #[command(flatten)]
        grid: MaturityGrid,
    },
    /// Fit a volatility curve to a `maturity,yield[,slope]` CSV.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Price an instrument described by a JSON file.
    Price {
        #[arg(long)]
        instrument: PathBuf,
        /// closed-form | series | quadrature | mc.
        #[arg(long)]
        method: Option<String>,
        /// Run the Monte Carlo oracle alongside and report the z-score.
        #[arg(long)]
        check: bool,
        /// Also print the reference value of the instrument's identity.
        #[arg(long)]
        identity: bool,
    },
    /// Martingale and strict-local-martingale checks.
    McCheck {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "maturity", default_value_t = 2.0)]
        maturity: f64,
        /// Scale the bond formula inside the martingale check (harness
        /// self-test).
        #[arg(long, hide = true)]
        corrupt_bond: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct MaturityGrid {
    /// Comma-separated maturities; overrides the uniform grid.
    #[arg(long)]
    maturities: Option<String>,
    #[arg(long, default_value_t = 50.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.5)]
    t_step: f64,
}

impl MaturityGrid {
    fn points(&self) -> CliResult<Vec<f64>> {
        match &self.maturities {
            Some(list) => parse_list(list),
            None => uniform_grid(self.t_max, self.t_step),
        }
    }
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| usage(format!("bad number `{x}`: {e}"))))
        .collect()
}

fn uniform_grid(end: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0) || !(end >= 0.0) || !end.is_finite() {
        return Err(usage(format!("grid needs step > 0 and end >= 0, got {step} and {end}")));
    }
    let n = (end / step).round() as u64;
    if ((n as f64) * step - end).abs() > 1e-9 * end.max(1.0) {
        return Err(usage(format!("end {end} is not a multiple of step {step}")));
    }
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad JSON in {}: {e}", path.display())))
}

impl Global {
    fn model(&self) -> CliResult<KernelModel> {
        if let Some(path) = &self.model_file {
            return read_json(path);
        }
        let name = self.model.trim();
        match name {
            "bessel3" => Ok(KernelModel::bessel3()),
            "bessel4" => Ok(KernelModel::bessel4()),
            "complex-bessel3" => {
                let d = parse_list(&self.delta)?;
                let d: [f64; 3] = d.try_into().map_err(|_| usage("--delta needs three components"))?;
                Ok(KernelModel::ComplexBessel3(ComplexBessel3Params::normalized([0.0, 0.0, 1.0], d)?))
            }
            _ => match name.strip_prefix("bessel-n:") {
                Some(n) => {
                    let n: u32 = n.parse().map_err(|_| usage(format!("bad Bessel order in `{name}`")))?;
                    Ok(KernelModel::BesselN(BesselNParams::canonical(n)?))
                }
                None => Err(usage(format!(
                    "unknown model `{name}`; expected bessel3 | bessel4 | bessel-n:<n> | complex-bessel3"
                ))),
            },
        }
    }

    fn curve(&self, model: &KernelModel) -> CliResult<VolatilityCurve> {
        if let Some(path) = &self.vol_file {
            return read_json(path);
        }
        let default = if matches!(model, KernelModel::Bessel4(_)) { 0.6 } else { 0.75 };
        Ok(VolatilityCurve::constant(self.sigma.unwrap_or(default))?)
    }

    fn mc(&self) -> McOptions {
        McOptions::new(self.samples)
    }

    fn stream(&self, id: u64) -> RngStream {
        RngStream::new(self.seed, id)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(cryptorates::Error::UnsupportedModel(_)) = e {
                eprintln!("{CAPABILITIES}");
            }
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::SimulatePaths { paths, step, horizon } => simulate_paths(g, *paths, *step, *horizon),
        Command::YieldCurve { sigmas, grid } => yield_curves(g, sigmas, grid),
        Command::BondCurve { grid } => bond_curve(g, grid),
        Command::Calibrate { input } => calibrate(g, input),
        Command::Price { instrument, method, check, identity } => {
            price(g, instrument, method.as_deref(), *check, *identity)
        }
        Command::McCheck { t, maturity, corrupt_bond } => mc_check(g, *t, *maturity, *corrupt_bond),
    }
}

fn emit(g: &Global, bytes: Vec<u8>) -> CliResult<()> {
    match &g.out {
        Some(path) => fs::write(path, bytes)?,
        None => match std::io::stdout().write_all(&bytes) {
            // a closed reader such as `head` is not an error
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn table<R: Serialize>(g: &Global, header: &[&str], rows: &[R]) -> CliResult<()> {
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(rows).map_err(|e| usage(e.to_string()))?;
            b.push(b'\n');
            b
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            let csv_err = |e: csv::Error| usage(e.to_string());
            w.write_record(header).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| usage(e.to_string()))?
        }
    };
    emit(g, bytes)
}

fn document<D: Serialize>(g: &Global, doc: &D) -> CliResult<()> {
    if g.format == Some(Format::Csv) {
        return Err(usage("this command writes JSON only"));
    }
    let mut b = serde_json::to_vec_pretty(doc).map_err(|e| usage(e.to_string()))?;
    b.push(b'\n');
    emit(g, b)
}

#[derive(Serialize)]
struct PathRow {
    path_id: u64,
    time: f64,
    xi: f64,
    pi: f64,
    bond_price: f64,
}

fn simulate_paths(g: &Global, paths: u64, step: f64, horizon: f64) -> CliResult<()> {
    if !(horizon > 0.0) {
        return Err(usage(format!("--horizon must be > 0, got {horizon}")));
    }
    let model = g.model()?;
    let curve = g.curve(&model)?;
    let grid = uniform_grid(horizon, step)?;
    let initial = model.initial_state()?;
    let stream = g.stream(0);
    let mut rows = Vec::with_capacity(paths as usize * grid.len());
    for id in 0..paths {
        let mut rng = stream.substream(id).generator();
        let mut states = vec![initial.clone()];
        states.extend(simulate_grid(&curve, &initial, &grid[1..], &mut rng)?);
        for (st, &t) in states.iter_mut().zip(&grid) {
            // the grid time is the exact multiple of the step
            st.time = t;
            rows.push(PathRow {
                path_id: id,
                time: t,
                xi: st.norm(),
                pi: kernel_value(&model, st)?,
                bond_price: bond_price(&model, st, &curve, horizon)?,
            });
        }
    }
    table(g, &["path_id", "time", "xi", "pi", "bond_price"], &rows)
}

#[derive(Serialize)]
struct YieldRow {
    sigma: Option<f64>,
    #[serde(rename = "T")]
    maturity: f64,
    #[serde(rename = "yield")]
    yield_: f64,
}

fn eval_maturity(t: f64) -> f64 {
    if t == 0.0 {
        ZERO_MATURITY_PROXY
    } else {
        t
    }
}

fn yield_curves(g: &Global, sigmas: &str, grid: &MaturityGrid) -> CliResult<()> {
    let model = g.model()?;
    let ts = grid.points()?;
    let curves: Vec<(Option<f64>, VolatilityCurve)> = match &g.vol_file {
        Some(_) => vec![(None, g.curve(&model)?)],
        None => parse_list(sigmas)?
            .into_iter()
            .map(|s| Ok((Some(s), VolatilityCurve::constant(s)?)))
            .collect::<CliResult<_>>()?,
    };
    let mut rows = Vec::new();
    for (sigma, curve) in &curves {
        for &t in &ts {
            let y = yield_curve(&model, curve, eval_maturity(t))?;
            rows.push(YieldRow { sigma: *sigma, maturity: t, yield_: y });
        }
    }
    table(g, &["sigma", "T", "yield"], &rows)
}

#[derive(Serialize)]
struct BondRow {
    #[serde(rename = "T")]
    maturity: f64,
    bond_price: f64,
    #[serde(rename = "yield")]
    yield_: f64,
    forward: f64,
}

fn bond_curve(g: &Global, grid: &MaturityGrid) -> CliResult<()> {
    let model = g.model()?;
    let curve = g.curve(&model)?;
    let s0 = model.initial_state()?;
    let rows = grid
        .points()?
        .into_iter()
        .map(|t| {
            let te = eval_maturity(t);
            Ok(BondRow {
                maturity: t,
                bond_price: bond_price(&model, &s0, &curve, t)?,
                yield_: yield_curve(&model, &curve, te)?,
                forward: forward_rate(&model, &s0, &curve, te)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    table(g, &["T", "bond_price", "yield", "forward"], &rows)
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    maturity: f64,
    #[serde(rename = "yield")]
    yield_: f64,
    #[serde(default)]
    slope: Option<f64>,
}

fn read_curve_rows(path: &Path) -> CliResult<Vec<CurveRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let rows = rdr
        .deserialize()
        .collect::<Result<Vec<CurveRow>, _>>()
        .map_err(|e| usage(format!("malformed yield CSV {}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(usage("yield CSV has no rows"));
    }
    if rows.windows(2).any(|w| !(w[1].maturity > w[0].maturity)) || rows[0].maturity < 0.0 {
        return Err(usage("yield CSV maturities must be non-negative and strictly increasing"));
    }
    Ok(rows)
}

/// `Y'(T)` from finite differences of `T·Y(T)` (the initial forward rate),
/// assuming `Y(0) = 0` when the data has no `T = 0` row.
fn finite_difference_slopes(rows: &[CurveRow]) -> Vec<f64> {
    let mut ts = Vec::with_capacity(rows.len() + 1);
    let mut gs = Vec::with_capacity(rows.len() + 1);
    if rows[0].maturity > 0.0 {
        ts.push(0.0);
        gs.push(0.0);
    }
    for r in rows {
        ts.push(r.maturity);
        gs.push(r.maturity * r.yield_);
    }
    let n = ts.len();
    let derivative = |i: usize| -> f64 {
        if n == 2 {
            return (gs[1] - gs[0]) / (ts[1] - ts[0]);
        }
        // three-point stencil on the nearest window
        let c = i.clamp(1, n - 2);
        let (x0, x1, x2) = (ts[c - 1], ts[c], ts[c + 1]);
        let (f0, f1, f2) = (gs[c - 1], gs[c], gs[c + 1]);
        let x = ts[i];
        f0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + f1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + f2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    let offset = n - rows.len();
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            if r.maturity == 0.0 {
                return 0.0;
            }
            (derivative(k + offset) - r.yield_) / r.maturity
        })
        .collect()
}

#[derive(Serialize)]
struct KnotRow {
    time: f64,
    sigma: f64,
    variance_rate: f64,
}

fn calibrate(g: &Global, input: &Path) -> CliResult<()> {
    let model = g.model()?;
    let rows = read_curve_rows(input)?;
    let curve = match model {
        KernelModel::Bessel3(_) => {
            let points = rows
                .iter()
                .filter(|r| r.maturity > 0.0)
                .map(|r| YieldPoint::new(r.maturity, r.yield_))
                .collect::<Result<Vec<_>, _>>()?;
            calibrate_bessel3(&points)?
        }
        KernelModel::Bessel4(_) => {
            let fd = finite_difference_slopes(&rows);
            let samples: Vec<YieldSample> = rows
                .iter()
                .zip(fd)
                .map(|(r, d)| YieldSample { maturity: r.maturity, yield_: r.yield_, slope: r.slope.unwrap_or(d) })
                .collect();
            curve_from_rates(&calibrate_bessel4(&samples)?)?
        }
        other => {
            return Err(cryptorates::Error::UnsupportedModel(format!(
                "calibration is available for bessel3 and bessel4, not {}",
                other.name()
            ))
            .into())
        }
    };
    match g.format.unwrap_or(Format::Json) {
        Format::Json => document(g, &curve),
        Format::Csv => {
            let rows: Vec<KnotRow> = curve
                .knots()
                .into_iter()
                .map(|(time, sigma)| KnotRow { time, sigma, variance_rate: sigma * sigma })
                .collect();
            table(g, &["time", "sigma", "variance_rate"], &rows)
        }
    }
}

/// Instrument file, tagged by `"kind"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Instrument {
    Digital {
        t: f64,
        #[serde(rename = "T")]
        maturity: f64,
        #[serde(rename = "K")]
        strike: f64,
    },
    Caplet(CapletSpec),
    BondCall {
        t: f64,
        #[serde(rename = "T")]
        maturity: f64,
        #[serde(rename = "K")]
        strike: f64,
    },
    BondPut {
        t: f64,
        #[serde(rename = "T")]
        maturity: f64,
        #[serde(rename = "K")]
        strike: f64,
    },
    FxCryptoCrypto {
        market: MultiCurrencyMarket,
        base: String,
        quote: String,
        #[serde(rename = "T")]
        maturity: f64,
        #[serde(rename = "K")]
        strike: f64,
    },
    FxCryptoUsd {
        usd: SovereignGbmParams,
        #[serde(default = "unit")]
        scale: f64,
        #[serde(rename = "T")]
        maturity: f64,
        #[serde(rename = "K")]
        strike: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PriceMethod {
    ClosedForm,
    Series,
    Quadrature,
    MonteCarlo,
}

fn parse_method(s: &str) -> CliResult<PriceMethod> {
    match s {
        "closed-form" => Ok(PriceMethod::ClosedForm),
        "series" => Ok(PriceMethod::Series),
        "quadrature" => Ok(PriceMethod::Quadrature),
        "mc" | "monte-carlo" => Ok(PriceMethod::MonteCarlo),
        _ => Err(usage(format!("unknown method `{s}`; expected closed-form | series | quadrature | mc"))),
    }
}

#[derive(Serialize)]
struct CheckReport {
    mc: PriceQuote,
    reference: f64,
    z_score: f64,
    pass: bool,
}

#[derive(Serialize)]
struct IdentityReport {
    name: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct PriceReport {
    #[serde(flatten)]
    quote: PriceQuote,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    identity: Option<IdentityReport>,
}

fn unsupported(kind: &str, model: &KernelModel, method: PriceMethod) -> CliError {
    cryptorates::Error::UnsupportedModel(format!("{kind} with {} by {method:?}", model.name())).into()
}

fn is_real_family(model: &KernelModel, order: u32) -> bool {
    match model {
        KernelModel::Bessel3(_) => order == 3,
        KernelModel::Bessel4(_) => order == 4,
        KernelModel::BesselN(p) => p.order() == order,
        _ => false,
    }
}

struct Pricer<'a> {
    g: &'a Global,
    model: KernelModel,
    curve: VolatilityCurve,
}

impl Pricer<'_> {
    fn p0(&self, maturity: f64) -> CliResult<f64> {
        Ok(bond_price(&self.model, &self.model.initial_state()?, &self.curve, maturity)?)
    }

    /// `(1/π_0) E[π_t H(P_{tT})]` for a payoff on the bond at expiry.
    fn bond_payoff_mc(&self, t: f64, maturity: f64, payoff: impl Fn(f64) -> f64 + Sync, stream: u64) -> CliResult<PriceQuote> {
        let (model, curve) = (&self.model, &self.curve);
        let est = price_claim(
            model,
            curve,
            |st: &FactorState| bond_price(model, st, curve, maturity).map_or(0.0, &payoff),
            t,
            &self.g.mc(),
            &self.g.stream(stream),
        )?;
        if est.rejected_singular > 0 {
            log::warn!("{} singular draws were rejected", est.rejected_singular);
        }
        Ok(est.into())
    }

    fn quote(&self, inst: &Instrument, method: Option<PriceMethod>, stream: u64) -> CliResult<PriceQuote> {
        let m = &self.model;
        match inst {
            Instrument::Digital { t, maturity, strike } => {
                let spec = BondOptionSpec::new(*t, *maturity, *strike, OptionKind::DigitalCall)?;
                match method.unwrap_or(PriceMethod::ClosedForm) {
                    PriceMethod::ClosedForm if is_real_family(m, 3) => {
                        let v = digital_call_price(m, &m.initial_state()?, &spec, &self.curve)?;
                        Ok(PriceQuote::closed_form(v))
                    }
                    PriceMethod::MonteCarlo => {
                        let k = *strike;
                        self.bond_payoff_mc(*t, *maturity, move |p| if p > k { 1.0 } else { 0.0 }, stream)
                    }
                    other => Err(unsupported("digital", m, other)),
                }
            }
            Instrument::Caplet(spec) => {
                spec.validate()?;
                match method.unwrap_or(PriceMethod::Quadrature) {
                    PriceMethod::Quadrature if is_real_family(m, 3) => Ok(caplet_price(m, spec, &self.curve)?),
                    PriceMethod::MonteCarlo => {
                        // N puts on the bond struck at K, paid at reset
                        let (k, n) = strike_notional(spec);
                        self.bond_payoff_mc(spec.reset, spec.payment, move |p| n * (k - p).max(0.0), stream)
                    }
                    other => Err(unsupported("caplet", m, other)),
                }
            }
            Instrument::BondCall { t, maturity, strike } | Instrument::BondPut { t, maturity, strike } => {
                let call = matches!(inst, Instrument::BondCall { .. });
                let kind = if call { OptionKind::Call } else { OptionKind::Put };
                let spec = BondOptionSpec::new(*t, *maturity, *strike, kind)?;
                let b4 = is_real_family(m, 4);
                let name = if call { "bond-call" } else { "bond-put" };
                let default = if b4 { PriceMethod::Series } else { PriceMethod::MonteCarlo };
                let analytic = |om: OptionMethod| -> CliResult<PriceQuote> {
                    Ok(if call { bond_call_b4(&spec, &self.curve, om)? } else { bond_put_b4(&spec, &self.curve, om)? })
                };
                match method.unwrap_or(default) {
                    PriceMethod::Series if b4 => analytic(OptionMethod::default()),
                    PriceMethod::Quadrature if b4 => analytic(OptionMethod::Quadrature),
                    PriceMethod::MonteCarlo => {
                        let k = *strike;
                        if call {
                            self.bond_payoff_mc(*t, *maturity, move |p| (p - k).max(0.0), stream)
                        } else {
                            self.bond_payoff_mc(*t, *maturity, move |p| (k - p).max(0.0), stream)
                        }
                    }
                    other => Err(unsupported(name, m, other)),
                }
            }
            Instrument::FxCryptoCrypto { market, base, quote, maturity, strike } => {
                match method.unwrap_or(PriceMethod::MonteCarlo) {
                    PriceMethod::MonteCarlo => Ok(crypto_crypto_call_mc(
                        market,
                        base,
                        quote,
                        *maturity,
                        *strike,
                        &self.g.mc(),
                        &self.g.stream(stream),
                    )?),
                    other => Err(unsupported("fx-crypto-crypto", m, other)),
                }
            }
            Instrument::FxCryptoUsd { usd, scale, maturity, strike } => {
                let leg = KernelLeg::new(m.clone(), self.curve.clone(), *scale)?;
                let radial = is_real_family(m, 3) || is_real_family(m, 4);
                let fx = match method.unwrap_or(if radial { PriceMethod::Quadrature } else { PriceMethod::MonteCarlo }) {
                    PriceMethod::Quadrature if radial => FxMethod::RadialQuadrature,
                    PriceMethod::MonteCarlo => FxMethod::MonteCarlo,
                    other => return Err(unsupported("fx-crypto-usd", m, other)),
                };
                Ok(crypto_usd_call(&leg, usd, *maturity, *strike, fx, &self.g.mc(), &self.g.stream(stream))?)
            }
        }
    }

    /// Independent Monte Carlo estimate for `--check`.
    fn oracle(&self, inst: &Instrument) -> CliResult<PriceQuote> {
        match inst {
            Instrument::FxCryptoCrypto { .. } => Err(usage("fx-crypto-crypto is priced by Monte Carlo only; --check has no reference")),
            Instrument::FxCryptoUsd { usd, scale, maturity, strike } => {
                let leg = KernelLeg::new(self.model.clone(), self.curve.clone(), *scale)?;
                Ok(crypto_usd_call_joint_mc(&leg, usd, *maturity, *strike, &self.g.mc(), &self.g.stream(1))?)
            }
            _ => self.quote(inst, Some(PriceMethod::MonteCarlo), 1),
        }
    }

    fn identity(&self, inst: &Instrument) -> CliResult<IdentityReport> {
        match inst {
            Instrument::Digital { t, .. } => Ok(IdentityReport { name: "bond_to_expiry", value: self.p0(*t)? }),
            Instrument::Caplet(spec) => {
                let v = spec.notional * (self.p0(spec.reset)? - self.p0(spec.payment)?) / spec.tenor();
                Ok(IdentityReport { name: "zero_cap_rate", value: v })
            }
            Instrument::BondCall { t, maturity, strike } | Instrument::BondPut { t, maturity, strike } => {
                let v = self.p0(*maturity)? - strike * self.p0(*t)?;
                Ok(IdentityReport { name: "call_minus_put", value: v })
            }
            Instrument::FxCryptoCrypto { market, base, quote, maturity, .. } => {
                let i = market.currency(base)?;
                let j = market.currency(quote)?;
                Ok(IdentityReport { name: "zero_strike", value: i.leg.expected_kernel(*maturity)? / j.leg.scale })
            }
            Instrument::FxCryptoUsd { usd, scale, maturity, .. } => {
                let leg = KernelLeg::new(self.model.clone(), self.curve.clone(), *scale)?;
                Ok(IdentityReport { name: "zero_strike", value: leg.expected_kernel(*maturity)? / usd.initial })
            }
        }
    }
}

fn price(g: &Global, path: &Path, method: Option<&str>, check: bool, identity: bool) -> CliResult<()> {
    let inst: Instrument = read_json(path)?;
    let method = method.map(parse_method).transpose()?;
    let model = g.model()?;
    let curve = g.curve(&model)?;
    let pricer = Pricer { g, model, curve };
    let quote = pricer.quote(&inst, method, 0)?;
    let check = if check {
        let (mc, reference) = if quote.method == Method::MonteCarlo {
            (quote, pricer.quote(&inst, None, 0)?)
        } else {
            (pricer.oracle(&inst)?, quote)
        };
        if reference.method == Method::MonteCarlo {
            return Err(usage("--check needs a non-Monte-Carlo method for this instrument"));
        }
        let z = if mc.value == reference.value { 0.0 } else { (mc.value - reference.value) / mc.err_est };
        Some(CheckReport { mc, reference: reference.value, z_score: z, pass: z.abs() <= g.tol })
    } else {
        None
    };
    let identity = if identity { Some(pricer.identity(&inst)?) } else { None };
    let failed = check.as_ref().is_some_and(|c| !c.pass);
    let z = check.as_ref().map_or(0.0, |c| c.z_score);
    document(g, &PriceReport { quote, check, identity })?;
    if failed {
        return Err(CliError::Statistical(format!("z-score {z:.3} exceeds {}", g.tol)));
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckLine {
    #[serde(flatten)]
    report: OracleReport,
    z_score: f64,
}

#[derive(Serialize)]
struct StrictLine {
    statistic: f64,
    target: f64,
    std_err: f64,
    gap: f64,
    z_score: f64,
    pass: bool,
}

#[derive(Serialize)]
struct McCheckReport {
    model: &'static str,
    martingale: CheckLine,
    strictness: StrictLine,
    pass: bool,
}

fn mc_check(g: &Global, t: f64, maturity: f64, corrupt: Option<f64>) -> CliResult<()> {
    let model = g.model()?;
    let curve = g.curve(&model)?;
    let opts = g.mc();
    let mut mart = match corrupt {
        None => martingale_test(&model, &curve, maturity, t, &opts, &g.stream(0))?,
        Some(factor) => {
            let bad = move |m: &KernelModel, s: &FactorState, c: &VolatilityCurve, mat: f64| {
                Ok(factor * bond_price(m, s, c, mat)?)
            };
            martingale_test_with(&model, &curve, maturity, t, &opts, &g.stream(0), &bad)?
        }
    };
    let z_mart = if mart.statistic == mart.target { 0.0 } else { (mart.statistic - mart.target) / mart.std_err };
    mart.pass = z_mart.abs() <= g.tol;
    let strict = strictness_test(&model, &curve, maturity, &opts, &g.stream(1))?;
    let z_strict = (strict.statistic - strict.target) / strict.std_err;
    let below = (1.0 - strict.statistic) / strict.std_err;
    let strictness = StrictLine {
        statistic: strict.statistic,
        target: strict.target,
        std_err: strict.std_err,
        gap: strict.gap,
        z_score: z_strict,
        pass: z_strict.abs() <= g.tol && below > g.tol,
    };
    let report = McCheckReport {
        model: model.name(),
        pass: mart.pass && strictness.pass,
        martingale: CheckLine { report: mart, z_score: z_mart },
        strictness,
    };
    document(g, &report)?;
    let mut failures = Vec::new();
    if !report.martingale.report.pass {
        failures.push(format!("martingale statistic {} vs {} (z = {z_mart:.2})", mart.statistic, mart.target));
    }
    if !report.strictness.pass {
        failures.push(format!(
            "strictness statistic {} vs {} (z = {z_strict:.2}, {below:.1} SE below 1)",
            strict.statistic, strict.target
        ));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Statistical(failures.join("; ")))
    }
}
