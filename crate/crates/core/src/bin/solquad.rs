//! Command-line front end: build weighted quadrature rules, apply them to
//! integrands, run the brute-force oracle, and emit convergence CSV.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use solquad::rulefile;
use solquad::rulegen::{self, Settings};
use solquad::spectrum::{parse_spectrum, Column, Modifier, WeightModel};
use solquad::validate::{self, TestIntegrand, ORACLE_REL_TOL};

#[derive(Parser)]
#[command(name = "solquad", version, about = "Spectrum-weighted Gaussian quadrature rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct an N-point rule and write it as CSV or JSON
    Rule(RuleArgs),
    /// Apply a stored rule to an integrand
    Integrate(IntegrateArgs),
    /// Brute-force reference integral of weight x integrand
    Oracle(OracleArgs),
    /// Rule-vs-oracle error for a sweep of orders, as CSV
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Global,
    Direct,
    Etr,
}

impl From<ColumnArg> for Column {
    fn from(c: ColumnArg) -> Column {
        match c {
            ColumnArg::Global => Column::GlobalTilt,
            ColumnArg::Direct => Column::DirectCircumsolar,
            ColumnArg::Etr => Column::Extraterrestrial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Spectrum data file (ASTM G173-style or two-column)
    #[arg(long)]
    spectrum: PathBuf,
    /// Irradiance column for four-column files
    #[arg(long, value_enum, default_value = "global")]
    column: ColumnArg,
    /// Wavelength band in nm, as "A,B"
    #[arg(long, value_parser = parse_band)]
    band: (f64, f64),
    /// Weight modifier: none, lambda, or planck:TEMPERATURE
    #[arg(long, default_value = "none", value_parser = parse_modifier_spec)]
    modifier: ModifierSpec,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct IntegrandArgs {
    /// sin(2*pi*lambda / PERIOD) integrand, period in nm
    #[arg(long, value_name = "PERIOD")]
    sin: Option<f64>,
    /// Polynomial integrand, coefficients "c0,c1,..."
    #[arg(long, value_name = "COEFFS")]
    poly: Option<String>,
    /// Two-column tabulated integrand, spline-interpolated
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct RuleArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    /// Number of quadrature points
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=200))]
    order: u32,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output path; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Rule file produced by the `rule` subcommand (CSV or JSON)
    #[arg(long)]
    rule: PathBuf,
    #[command(flatten)]
    integrand: IntegrandArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    #[command(flatten)]
    integrand: IntegrandArgs,
    /// Relative tolerance of the reference integration
    #[arg(long, default_value_t = ORACLE_REL_TOL)]
    rtol: f64,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    #[command(flatten)]
    integrand: IntegrandArgs,
    /// Orders: "start:step:stop" range syntax or an explicit "n1,n2,..." list
    #[arg(long, value_parser = parse_orders)]
    orders: Orders,
}

#[derive(Clone)]
struct Orders(Vec<usize>);

#[derive(Clone)]
enum ModifierSpec {
    None,
    Lambda,
    Planck(f64),
}

impl ModifierSpec {
    fn to_modifier(&self) -> Modifier {
        match self {
            ModifierSpec::None => Modifier::None,
            ModifierSpec::Lambda => Modifier::Lambda,
            ModifierSpec::Planck(t) => Modifier::Planck { temperature: *t },
        }
    }
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("band must be \"A,B\" in nm".into());
    }
    let a: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    if !(a < b) {
        return Err(format!("band lower bound {a} must be below upper bound {b}"));
    }
    Ok((a, b))
}

fn parse_modifier_spec(s: &str) -> Result<ModifierSpec, String> {
    match s {
        "none" => Ok(ModifierSpec::None),
        "lambda" => Ok(ModifierSpec::Lambda),
        _ => {
            if let Some(t) = s.strip_prefix("planck:") {
                let temperature: f64 = t.parse().map_err(|e| format!("{e}"))?;
                if temperature <= 0.0 {
                    return Err("planck temperature must be positive".into());
                }
                Ok(ModifierSpec::Planck(temperature))
            } else {
                Err(format!("unknown modifier {s:?}; use none, lambda, or planck:T"))
            }
        }
    }
}

fn parse_orders(s: &str) -> Result<Orders, String> {
    let orders: Vec<usize> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range syntax is start:step:stop".into());
        }
        let start: usize = parts[0].parse().map_err(|e| format!("{e}"))?;
        let step: usize = parts[1].parse().map_err(|e| format!("{e}"))?;
        let stop: usize = parts[2].parse().map_err(|e| format!("{e}"))?;
        if step == 0 {
            return Err("step must be positive".into());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{e}")))
            .collect::<Result<_, _>>()?
    };
    if orders.is_empty() || orders.contains(&0) {
        return Err("orders must be nonempty and positive".into());
    }
    Ok(Orders(orders))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn load_model(args: &SpectrumArgs) -> Result<WeightModel, String> {
    let bytes = fs::read(&args.spectrum)
        .map_err(|e| format!("cannot read {}: {e}", args.spectrum.display()))?;
    let source_id = args
        .spectrum
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let spectrum = parse_spectrum(&bytes, args.column.into())
        .map_err(|e| format!("{}: {e}", args.spectrum.display()))?
        .with_source_id(&source_id);
    WeightModel::build(&spectrum, args.band, args.modifier.to_modifier())
        .map_err(|e| format!("{e}"))
}

fn load_integrand(args: &IntegrandArgs) -> Result<TestIntegrand, String> {
    match (&args.sin, &args.poly, &args.table) {
        (Some(period), None, None) => Ok(TestIntegrand::Sin { period_nm: *period }),
        (None, Some(coeffs), None) => {
            let c: Vec<f64> = coeffs
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{e}")))
                .collect::<Result<_, _>>()?;
            Ok(TestIntegrand::Poly(c))
        }
        (None, None, Some(path)) => {
            let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let table = parse_spectrum(&bytes, Column::GlobalTilt).map_err(|e| format!("{e}"))?;
            let spline = solquad::spectrum::CubicSpline::fit(
                table.samples(),
                solquad::spectrum::BoundaryCondition::Natural,
            )
            .map_err(|e| format!("{e}"))?;
            Ok(TestIntegrand::Tabulated(spline))
        }
        _ => Err("exactly one of --sin, --poly, --table is required".into()),
    }
}

fn cmd_rule(args: &RuleArgs) -> Result<(), String> {
    let model = load_model(&args.spectrum)?;
    let rule = rulegen::build_rule(&model, args.order as usize, &Settings::default())
        .map_err(|e| format!("rule construction failed: {e}"))?;
    let text = match args.format {
        FormatArg::Csv => rulefile::to_csv(&rule),
        FormatArg::Json => rulefile::to_json(&rule).map_err(|e| format!("{e}"))?,
    };
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_rule(path: &PathBuf) -> Result<rulegen::QuadratureRule, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    if text.trim_start().starts_with('{') {
        rulefile::from_json(&text).map_err(|e| format!("{e}"))
    } else {
        rulefile::from_csv(&text).map_err(|e| format!("{e}"))
    }
}

fn cmd_integrate(args: &IntegrateArgs) -> Result<(), String> {
    let rule = read_rule(&args.rule)?;
    let f = load_integrand(&args.integrand)?;
    let value = rulegen::apply_rule(&rule, |l| f.eval(l)).map_err(|e| format!("{e}"))?;
    println!("{}", fmt17(value));
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), String> {
    let model = load_model(&args.spectrum)?;
    let f = load_integrand(&args.integrand)?;
    let result =
        validate::oracle_integral(&model, |l| f.eval(l), args.rtol).map_err(|e| format!("{e}"))?;
    if !result.converged {
        return Err(format!(
            "oracle did not converge; achieved error estimate {:e} after {} evaluations",
            result.error_estimate, result.evaluations
        ));
    }
    println!("{} {}", fmt17(result.value), fmt17(result.error_estimate));
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), String> {
    let model = load_model(&args.spectrum)?;
    let f = load_integrand(&args.integrand)?;
    let rows = validate::convergence_study(&model, &f, &args.orders.0, &Settings::default())
        .map_err(|e| format!("{e}"))?;
    println!("N,value,oracle,rel_error,evals");
    for row in rows {
        println!(
            "{},{},{},{},{}",
            row.order,
            fmt17(row.quad_value),
            fmt17(row.oracle_value),
            fmt17(row.rel_error),
            row.evaluations
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rule(args) => cmd_rule(args),
        Command::Integrate(args) => cmd_integrate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Convergence(args) => cmd_convergence(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
