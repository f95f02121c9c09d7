use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expsumkit::remez::EmhRoute;
use expsumkit::transform::TransformKind;

/// Exponential sum approximation of `f(x) = ∫_a^b t^(η-1) e^(-xt) dt / Γ(η)`.
#[derive(Debug, Parser)]
#[command(name = "expsumkit", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ρ̂ and ρ̂² of each transformation for a list of ratios r.
    RhohatTable(RhohatArgs),
    /// h_r and the factors of the initialization bound.
    HrTable(HrArgs),
    /// M-term sum from Gaussian quadrature under a transformation.
    GaussExpsum(GaussArgs),
    /// Best M-term sum on [0, ∞) by the Remez exchange.
    BestExpsum(BestArgs),
    /// Φ_r and Φ_r' on [-1, 1].
    PhiSample(PhiArgs),
    /// Scaled basis functions ρ̂^n χ_n(x) on a log grid.
    BasisSample(BasisArgs),
    /// E_{M,h} / f(0) and its upper bound over a grid of h.
    EmhScan(EmhArgs),
    /// Node and weight convergence in the discretization size.
    MreScan(MreArgs),
    /// Maximum errors E_M and ratios E_M / E_(M+1).
    EmScan(EmScanArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `f` with exponent `η` and support `[a, b]`.
#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_parser = parse_number)]
    pub eta: Number,
    #[arg(long, value_parser = parse_number)]
    pub a: Number,
    #[arg(long, value_parser = parse_number, default_value = "1")]
    pub b: Number,
}

#[derive(Debug, Args)]
pub struct RhohatArgs {
    /// Comma-separated ratios; defaults to 2^-1, ..., 2^-20.
    #[arg(long, value_parser = parse_number, value_delimiter = ',')]
    pub r: Vec<Number>,
    #[arg(long, value_parser = parse_transform, value_delimiter = ',')]
    pub transform: Vec<TransformKind>,
    #[arg(long, default_value_t = 128)]
    pub bits: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct HrArgs {
    #[arg(long, value_parser = parse_number, value_delimiter = ',')]
    pub r: Vec<Number>,
    #[arg(long, default_value_t = 128)]
    pub bits: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GaussArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = parse_transform, default_value = "phi")]
    pub transform: TransformKind,
    #[arg(long)]
    pub mds: Option<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Adds the column 2 Σ ε_{M,n} χ_n(bx), n = 2M..=2M+K, to the error curve.
    #[arg(long)]
    pub expansion_terms: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BestArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub mds: Option<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long, default_value_t = 1e-10)]
    pub eps_stop: f64,
    /// CSV of the 2M+1 alternation points.
    #[arg(long)]
    pub alternation: Option<PathBuf>,
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// CSV of E_M(x) on x = 0 and a log grid.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,
}

#[derive(Debug, Args)]
pub struct PhiArgs {
    #[arg(long, value_parser = parse_number)]
    pub r: Number,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long, default_value_t = 128)]
    pub bits: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[arg(long, value_parser = parse_number)]
    pub r: Number,
    #[arg(long, value_parser = parse_transform, default_value = "phi")]
    pub transform: TransformKind,
    /// Largest index n.
    #[arg(long, default_value_t = 6)]
    pub nmax: usize,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, value_parser = parse_number, default_value = "1e-2")]
    pub xmin: Number,
    #[arg(long, value_parser = parse_number, default_value = "1e3")]
    pub xmax: Number,
    #[arg(long, default_value_t = 128)]
    pub bits: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EmhArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Rows for every M from 1 to this value.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    /// The grid spans h_(a/b)/b times 2^-span to 2^span.
    #[arg(long, default_value_t = 2.0)]
    pub span: f64,
    #[arg(long, value_parser = parse_route, default_value = "inverse")]
    pub route: EmhRoute,
    #[arg(long)]
    pub bits: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MreMode {
    /// Gaussian rule for dW(bψ(u)).
    Gauss,
    /// Remez starting sum at h = h_(a/b)/b.
    Init,
}

#[derive(Debug, Args)]
pub struct MreArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Rows for every M from 1 to this value.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "gauss")]
    pub mode: MreMode,
    #[arg(long, value_parser = parse_transform, value_delimiter = ',')]
    pub transform: Vec<TransformKind>,
    /// Comma-separated sizes, each compared with its double.
    #[arg(long, value_delimiter = ',', default_value = "24,48,96")]
    pub mds: Vec<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EmScanArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Rows for every M from 1 to this value.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = parse_transform, value_delimiter = ',')]
    pub transform: Vec<TransformKind>,
    /// Also run the Remez exchange for each M.
    #[arg(long)]
    pub best: bool,
    #[arg(long)]
    pub mds: Option<usize>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A decimal literal, a fraction `p/q`, or a power `2^k`, kept as text so it
/// can be read at any precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Number {
    pub text: String,
    pub value: f64,
}

impl Number {
    pub fn new(value: f64) -> Self {
        Number {
            text: format!("{value:e}"),
            value,
        }
    }

    /// The value at `bits` of precision.
    pub fn at(&self, bits: u32) -> rug::Float {
        let text = self.text.trim();
        if let Some((base, exp)) = text.split_once('^') {
            let base = rug::Float::with_val(bits, rug::Float::parse(base).unwrap());
            let exp: i32 = exp.parse().unwrap();
            return rug::ops::Pow::pow(base, exp);
        }
        if let Some((p, q)) = text.split_once('/') {
            let p = rug::Float::with_val(bits, rug::Float::parse(p).unwrap());
            let q = rug::Float::with_val(bits, rug::Float::parse(q).unwrap());
            return p / q;
        }
        rug::Float::with_val(bits, rug::Float::parse(text).unwrap())
    }
}

pub fn parse_number(text: &str) -> Result<Number, String> {
    let t = text.trim();
    let parse = |s: &str| -> Result<rug::Float, String> {
        rug::Float::parse(s.trim())
            .map(|v| rug::Float::with_val(64, v))
            .map_err(|_| format!("{s:?} is not a number"))
    };
    let value = if let Some((base, exp)) = t.split_once('^') {
        let exp: i32 = exp.trim().parse().map_err(|_| format!("{exp:?} is not an integer exponent"))?;
        rug::ops::Pow::pow(parse(base)?, exp).to_f64()
    } else if let Some((p, q)) = t.split_once('/') {
        let q = parse(q)?;
        if q.is_zero() {
            return Err("division by zero".into());
        }
        (parse(p)? / q).to_f64()
    } else {
        parse(t)?.to_f64()
    };
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(Number {
        text: t.to_string(),
        value,
    })
}

fn parse_transform(text: &str) -> Result<TransformKind, String> {
    text.parse().map_err(|e: expsumkit::Error| e.to_string())
}

fn parse_route(text: &str) -> Result<EmhRoute, String> {
    text.parse().map_err(|e: expsumkit::Error| e.to_string())
}
