use std::collections::BTreeMap;

use expsumkit::basis::BasisEvaluator;
use expsumkit::expsum::{default_mds, epsilon_coeffs, gauss_expsum, max_error_scan, stenger_bound, ExpSum};
use expsumkit::kernel::PowerKernel;
use expsumkit::numcore::Precision;
use expsumkit::phi::PhiSeries;
use expsumkit::quadrature::mre;
use expsumkit::remez::{
    emh, eh_bound, init_exchange_with, precision_policy, remez, remez_mds, solve_hr, BitsPolicy, HrFactors,
    RemezConfig, RemezResult,
};
use expsumkit::transform::{Transform, TransformKind};
use rug::Float;
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{emit, Cell, Table};
use crate::CliError;

type Res<T> = Result<T, CliError>;

/// Runs one subcommand and writes its outputs.
pub fn run(cli: &Cli) -> Res<()> {
    let (table, output) = match &cli.command {
        Command::RhohatTable(args) => (rhohat_table(args)?, &args.output),
        Command::HrTable(args) => (hr_table(args)?, &args.output),
        Command::GaussExpsum(args) => (gauss_cmd(args)?, &args.output),
        Command::BestExpsum(args) => (best_cmd(args)?, &args.output),
        Command::PhiSample(args) => (phi_sample(args)?, &args.output),
        Command::BasisSample(args) => (basis_sample(args)?, &args.output),
        Command::EmhScan(args) => (emh_scan(args)?, &args.output),
        Command::MreScan(args) => (mre_scan(args)?, &args.output),
        Command::EmScan(args) => (em_scan(args)?, &args.output),
    };
    emit(&table.render(output.format), output.out.as_deref())
}

fn default_ratios() -> Vec<Number> {
    (1..=20)
        .map(|k| Number {
            text: format!("2^-{k}"),
            value: 2f64.powi(-k),
        })
        .collect()
}

fn kernel_at(args: &KernelArgs, ctx: Precision) -> Res<PowerKernel> {
    let bits = ctx.bits();
    Ok(PowerKernel::new(args.eta.at(bits), args.a.at(bits), args.b.at(bits))?)
}

/// `bits`, or the precision policy for `m` terms.
fn bits_for(args: &KernelArgs, m: usize, bits: Option<u32>) -> Res<Precision> {
    if m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let bits = match bits {
        Some(bits) => bits,
        None => precision_policy(&kernel_at(args, Precision::new(128)?)?, m)?,
    };
    Ok(Precision::new(bits)?)
}

fn record_kernel(table: &mut Table, args: &KernelArgs) {
    table.set_meta("eta", json!(args.eta.text));
    table.set_meta("a", json!(args.a.text));
    table.set_meta("b", json!(args.b.text));
}

fn rhohat_table(args: &RhohatArgs) -> Res<Table> {
    let ctx = Precision::new(args.bits)?;
    let ratios = if args.r.is_empty() { default_ratios() } else { args.r.clone() };
    let kinds = if args.transform.is_empty() { TransformKind::ALL.to_vec() } else { args.transform.clone() };
    let mut table = Table::new(&["r", "transform", "rho_hat", "rho_hat_sq"], ctx);
    table.set_meta("command", json!("rhohat-table"));
    for r in &ratios {
        let rv = r.at(ctx.bits());
        for &kind in &kinds {
            let rho = Transform::new(kind, &rv, ctx)?.rho_hat();
            let sq = ctx.real(rho.square_ref());
            table.push(vec![(&rv).into(), kind.name().into(), rho.into(), sq.into()]);
        }
    }
    Ok(table)
}

fn hr_table(args: &HrArgs) -> Res<Table> {
    let ctx = Precision::new(args.bits)?;
    let ratios = if args.r.is_empty() { default_ratios() } else { args.r.clone() };
    let mut table = Table::new(&["r", "h_r", "growth", "prefactor", "ratio"], ctx);
    table.set_meta("command", json!("hr-table"));
    for r in &ratios {
        let rv = r.at(ctx.bits());
        let f = HrFactors::new(&rv, ctx)?;
        table.push(vec![rv.into(), f.h.into(), f.growth.into(), f.prefactor.into(), f.ratio.into()]);
    }
    Ok(table)
}

/// Rows `nu, t, c, sum_c` with `sum_c` the running coefficient sum.
fn params_table(sum: &ExpSum, ctx: Precision) -> Table {
    let mut table = Table::new(&["nu", "t", "c", "sum_c"], ctx);
    let mut acc = ctx.zero();
    for (i, (t, c)) in sum.exponents.iter().zip(&sum.coefficients).enumerate() {
        acc += c;
        table.push(vec![(i + 1).into(), Cell::Exact(t.clone()), Cell::Exact(c.clone()), (&acc).into()]);
    }
    table
}

/// `x = 0` followed by a log grid from `10^-2 / b` to `10^2 / a`.
fn curve_grid(kernel: &PowerKernel, points: usize, ctx: Precision) -> Vec<Float> {
    let lo = ctx.real(ctx.ratio(1, 100) / kernel.b()).ln();
    let hi = ctx.real(ctx.real(100) / kernel.a()).ln();
    let mut xs = vec![ctx.zero()];
    for k in 0..points {
        let s = if points == 1 { ctx.zero() } else { ctx.ratio(k as i64, points as i64 - 1) };
        xs.push(ctx.real(&lo + ctx.real(&hi - &lo) * s).exp());
    }
    xs
}

fn write_curve(
    sum: &ExpSum,
    kernel: &PowerKernel,
    args: &CurveArgs,
    expansion: Option<&expsumkit::expsum::ErrorExpansion>,
    ctx: Precision,
) -> Res<()> {
    let Some(path) = &args.curve else { return Ok(()) };
    let f0 = kernel.f0(ctx);
    let mut columns = vec!["x", "error", "error_rel"];
    if expansion.is_some() {
        columns.push("expansion");
    }
    let mut table = Table::new(&columns, ctx);
    for x in curve_grid(kernel, args.curve_points, ctx) {
        let err = kernel.f(&x, ctx)? - sum.eval(&x, ctx);
        let rel = ctx.real(&err / &f0);
        let mut row: Vec<Cell> = vec![(&x).into(), err.into(), rel.into()];
        if let Some(exp) = expansion {
            row.push(exp.partial_sum(&x)?.into());
        }
        table.push(row);
    }
    emit(&table.to_csv(), Some(path))
}

fn gauss_cmd(args: &GaussArgs) -> Res<Table> {
    let ctx = bits_for(&args.kernel, args.m, args.bits)?;
    let kernel = kernel_at(&args.kernel, ctx)?;
    let r = kernel.ratio();
    let transform = Transform::new(args.transform, &r, ctx)?;
    let mds = args.mds.unwrap_or_else(|| default_mds(r.to_f64()));
    let sum = gauss_expsum(&kernel, &transform, args.m, mds, ctx)?;
    let (argmax, max) = max_error_scan(&sum, &kernel, ctx)?;
    let expansion = match args.expansion_terms {
        Some(k) => Some(epsilon_coeffs(&kernel, &transform, args.m, 2 * args.m + k, mds, ctx)?),
        None => None,
    };
    write_curve(&sum, &kernel, &args.curve, expansion.as_ref(), ctx)?;

    let mut table = params_table(&sum, ctx);
    table.set_meta("command", json!("gauss-expsum"));
    record_kernel(&mut table, &args.kernel);
    table.set_meta("m", json!(args.m));
    table.set_meta("transform", json!(args.transform.name()));
    table.set_meta("mds", json!(mds));
    let f0 = kernel.f0(ctx);
    table.set_meta("f0", table.num(&f0));
    table.set_meta("sum_c", table.num(&sum.coefficient_sum(ctx)));
    table.set_meta("max_error", table.num(&max));
    table.set_meta("argmax", table.num(&argmax));
    table.set_meta("rho_hat", table.num(&transform.rho_hat()));
    table.set_meta("stenger_bound", table.num(&stenger_bound(&kernel, &transform, args.m, ctx)));
    Ok(table)
}

fn remez_config(kernel: &KernelArgs, m: usize, mds: Option<usize>, bits: Option<u32>, eps: f64) -> Res<RemezConfig> {
    let ctx = bits_for(kernel, m, bits)?;
    Ok(RemezConfig {
        eps_stop: eps,
        mds,
        bits: BitsPolicy::Fixed(ctx.bits()),
        ..RemezConfig::default()
    })
}

fn best_cmd(args: &BestArgs) -> Res<Table> {
    let cfg = remez_config(&args.kernel, args.m, args.mds, args.bits, args.eps_stop)?;
    let ctx = cfg.precision(&kernel_at(&args.kernel, Precision::new(128)?)?, args.m)?;
    let kernel = kernel_at(&args.kernel, ctx)?;
    let result = remez(&kernel, args.m, &cfg)?;
    let (argmax, max) = max_error_scan(&result.expsum, &kernel, ctx)?;
    if let Some(path) = &args.alternation {
        emit(&alternation_table(&result, &kernel)?.to_csv(), Some(path))?;
    }
    write_curve(&result.expsum, &kernel, &args.curve, None, ctx)?;

    let mut table = params_table(&result.expsum, ctx);
    table.set_meta("command", json!("best-expsum"));
    record_kernel(&mut table, &args.kernel);
    table.set_meta("m", json!(args.m));
    table.set_meta("mds", json!(args.mds.unwrap_or_else(|| remez_mds(kernel.ratio().to_f64()))));
    table.set_meta("f0", table.num(&kernel.f0(ctx)));
    table.set_meta("level", table.num(&result.level));
    table.set_meta("spread", table.num(&result.spread(&kernel)?));
    table.set_meta("iterations", json!(result.iterations));
    table.set_meta("max_error", table.num(&max));
    table.set_meta("argmax", table.num(&argmax));
    let xs: Vec<Value> = result.alternation_x.iter().map(|x| table.num(x)).collect();
    table.set_meta("alternation_x", Value::Array(xs));
    Ok(table)
}

/// Rows `i, x, error` at the `2M + 1` alternation points.
pub fn alternation_table(result: &RemezResult, kernel: &PowerKernel) -> Res<Table> {
    let mut table = Table::new(&["i", "x", "error"], result.precision);
    for (i, (x, e)) in result
        .alternation_x
        .iter()
        .zip(result.alternation_errors(kernel)?)
        .enumerate()
    {
        table.push(vec![i.into(), x.into(), e.into()]);
    }
    Ok(table)
}

fn phi_sample(args: &PhiArgs) -> Res<Table> {
    if args.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let ctx = Precision::new(args.bits)?;
    let series = PhiSeries::new(&args.r.at(ctx.bits()), ctx)?;
    let mut table = Table::new(&["u", "phi", "dphi"], ctx);
    table.set_meta("command", json!("phi-sample"));
    table.set_meta("r", json!(args.r.text));
    let n = args.points as i64 - 1;
    for k in 0..=n {
        let u = ctx.ratio(2 * k - n, n);
        let (phi, dphi) = (series.eval(&u)?, series.deriv(&u)?);
        table.push(vec![u.into(), phi.into(), dphi.into()]);
    }
    Ok(table)
}

fn basis_sample(args: &BasisArgs) -> Res<Table> {
    if args.points < 2 || !(0.0 < args.xmin.value && args.xmin.value < args.xmax.value) {
        return Err(CliError::Usage("need --points >= 2 and 0 < --xmin < --xmax".into()));
    }
    let ctx = Precision::new(args.bits)?;
    let transform = Transform::new(args.transform, &args.r.at(ctx.bits()), ctx)?;
    let rho = transform.rho_hat();
    let tol = ctx.pow2(-(ctx.bits() as i32)).to_f64();
    let evaluators = (0..=args.nmax)
        .map(|n| BasisEvaluator::new(&transform, n, tol))
        .collect::<expsumkit::Result<Vec<_>>>()?;
    let mut columns = vec!["x".to_string()];
    columns.extend((0..=args.nmax).map(|n| format!("scaled_chi_{n}")));
    let mut table = Table::with_columns(columns, ctx);
    table.set_meta("command", json!("basis-sample"));
    table.set_meta("r", json!(args.r.text));
    table.set_meta("transform", json!(args.transform.name()));
    table.set_meta("rho_hat", table.num(&rho));
    let lo = args.xmin.at(ctx.bits()).ln();
    let hi = args.xmax.at(ctx.bits()).ln();
    let last = args.points as i64 - 1;
    for k in 0..=last {
        let x = ctx.real(&lo + ctx.real(&hi - &lo) * ctx.ratio(k, last)).exp();
        let mut row: Vec<Cell> = vec![(&x).into()];
        for ev in &evaluators {
            let scale = ctx.real(rug::ops::Pow::pow(&rho, ev.n() as u32));
            row.push((ev.eval(&x)? * scale).into());
        }
        table.push(row);
    }
    Ok(table)
}

/// A numerical breakdown in a single cell becomes NaN instead of ending the scan.
fn or_nan(value: expsumkit::Result<Float>, ctx: Precision) -> Res<Float> {
    use expsumkit::Error;
    match value {
        Ok(v) => Ok(v),
        Err(Error::Precision { .. } | Error::Structure(_) | Error::Rank { .. } | Error::Convergence { .. }) => {
            Ok(ctx.real(rug::float::Special::Nan))
        }
        Err(e) => Err(e.into()),
    }
}

fn emh_scan(args: &EmhArgs) -> Res<Table> {
    if args.points < 2 || !(args.span > 0.0) {
        return Err(CliError::Usage("need --points >= 2 and --span > 0".into()));
    }
    let ctx = bits_for(&args.kernel, args.m, args.bits)?;
    let kernel = kernel_at(&args.kernel, ctx)?;
    let h_star = solve_hr(&kernel.ratio(), ctx)? / kernel.b();
    let f0 = kernel.f0(ctx);
    let mut table = Table::new(&["m", "h", "emh_rel", "bound_rel"], ctx);
    table.set_meta("command", json!("emh-scan"));
    record_kernel(&mut table, &args.kernel);
    table.set_meta("route", json!(args.route.name()));
    table.set_meta("h_star", table.num(&h_star));
    let last = args.points as i64 - 1;
    let span = ctx.real(args.span);
    for m in 1..=args.m {
        for k in 0..=last {
            let s = ctx.real(ctx.ratio(2 * k - last, last) * &span);
            let h = ctx.real(ctx.real(s.exp2()) * &h_star);
            let value = or_nan(emh(&kernel, m, &h, args.route, ctx).map(|e| ctx.real(e / &f0)), ctx)?;
            let bound = eh_bound(kernel.a(), kernel.b(), m, &h, ctx);
            table.push(vec![m.into(), h.into(), value.into(), bound.into()]);
        }
    }
    Ok(table)
}

fn mre_scan(args: &MreArgs) -> Res<Table> {
    if args.mds.is_empty() || args.mds.contains(&0) {
        return Err(CliError::Usage("--mds needs positive sizes".into()));
    }
    let ctx = bits_for(&args.kernel, args.m, args.bits)?;
    let kernel = kernel_at(&args.kernel, ctx)?;
    let r = kernel.ratio();
    let h = solve_hr(&r, ctx)? / kernel.b();
    let kinds = if args.transform.is_empty() { TransformKind::ALL.to_vec() } else { args.transform.clone() };
    let mut table = Table::new(&["transform", "m", "mds", "mre"], ctx);
    table.set_meta("command", json!("mre-scan"));
    record_kernel(&mut table, &args.kernel);
    table.set_meta(
        "mode",
        json!(match args.mode {
            MreMode::Gauss => "gauss",
            MreMode::Init => "init",
        }),
    );
    for kind in kinds {
        let transform = Transform::new(kind, &r, ctx)?;
        let mut sums: BTreeMap<(usize, usize), expsumkit::Result<ExpSum>> = BTreeMap::new();
        let mut sum_for = |m: usize, mds: usize| -> expsumkit::Result<ExpSum> {
            sums.entry((m, mds))
                .or_insert_with(|| match args.mode {
                    MreMode::Gauss => gauss_expsum(&kernel, &transform, m, mds, ctx),
                    MreMode::Init => init_exchange_with(&kernel, &transform, m, &h, mds, ctx),
                })
                .clone()
        };
        for m in 1..=args.m {
            for &mds in &args.mds {
                let value = sum_for(m, mds).and_then(|coarse| {
                    let fine = sum_for(m, 2 * mds)?;
                    mre(&coarse.as_rule(), &fine.as_rule())
                });
                table.push(vec![kind.name().into(), m.into(), mds.into(), or_nan(value, ctx)?.into()]);
            }
        }
    }
    Ok(table)
}

fn em_scan(args: &EmScanArgs) -> Res<Table> {
    let ctx = bits_for(&args.kernel, args.m + 1, args.bits)?;
    let kernel = kernel_at(&args.kernel, ctx)?;
    let r = kernel.ratio();
    let mds = args.mds.unwrap_or_else(|| default_mds(r.to_f64()));
    let kinds = if args.transform.is_empty() { TransformKind::ALL.to_vec() } else { args.transform.clone() };
    let mut table = Table::new(&["method", "m", "max_error", "ratio"], ctx);
    table.set_meta("command", json!("em-scan"));
    record_kernel(&mut table, &args.kernel);
    table.set_meta("mds", json!(mds));
    let nan = || ctx.real(rug::float::Special::Nan);
    let push_series = |table: &mut Table, name: &str, errors: Vec<Float>| {
        for (i, e) in errors.iter().enumerate().take(args.m) {
            let ratio = ctx.real(e / &errors[i + 1]);
            let ratio = if ratio.is_finite() { ratio } else { nan() };
            table.push(vec![name.into(), (i + 1).into(), e.into(), ratio.into()]);
        }
    };
    for kind in kinds {
        let transform = Transform::new(kind, &r, ctx)?;
        let errors = (1..=args.m + 1)
            .map(|m| {
                let value = gauss_expsum(&kernel, &transform, m, mds, ctx)
                    .and_then(|sum| max_error_scan(&sum, &kernel, ctx))
                    .map(|(_, e)| e);
                or_nan(value, ctx)
            })
            .collect::<Res<Vec<_>>>()?;
        push_series(&mut table, kind.name(), errors);
    }
    if args.best {
        let cfg = RemezConfig {
            bits: BitsPolicy::Fixed(ctx.bits()),
            ..RemezConfig::default()
        };
        let errors = (1..=args.m + 1)
            .map(|m| {
                let value = remez(&kernel, m, &cfg)
                    .and_then(|res| max_error_scan(&res.expsum, &kernel, ctx))
                    .map(|(_, e)| e);
                or_nan(value, ctx)
            })
            .collect::<Res<Vec<_>>>()?;
        push_series(&mut table, "best", errors);
    }
    Ok(table)
}
