//! Command-line surface: series generation, continuation, monodromy, the
//! Deligne-period pipeline, L-values, the j-invariant check, and the
//! end-to-end verification report.
//!
//! Exit codes: 0 success/verified, 1 not verified, 2 usage or domain error.

use crate::continuation::{self, plan_path, transport, PathPlan, StateMatrix};
use crate::deligne::{
    self, c_minus, c_plus, eigenspace_bases, f_infinity, reference_c_minus, reference_c_plus,
    tate_twist, DeligneReport,
};
use crate::lfunc::{self, l_value, ModularForm};
use crate::lmfdb::{HttpTransport, LmfdbClient};
use crate::mirror::{build_s, MirrorData};
use crate::num::{pow10, working_bits, Complex, Consts};
use crate::pf_core::{self, frobenius_adaptive, frobenius_mum, Operator};
use crate::recognition::{digits_agreement, recognize_rational};
use clap::{Args, Parser, Subcommand};
use rug::{Float, Rational};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Pf(#[from] pf_core::PfError),
    #[error(transparent)]
    Continuation(#[from] continuation::ContinuationError),
    #[error(transparent)]
    Mirror(#[from] crate::mirror::MirrorError),
    #[error(transparent)]
    Deligne(#[from] deligne::DeligneError),
    #[error(transparent)]
    Lfunc(#[from] lfunc::LfuncError),
    #[error(transparent)]
    Lmfdb(#[from] crate::lmfdb::LmfdbError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser)]
#[command(
    name = "periodlab",
    about = "Periods of Calabi-Yau Picard-Fuchs operators, Deligne periods, and modular L-values",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by the pipeline commands.
#[derive(Args, Clone)]
pub struct RunConfig {
    /// Working precision in decimal digits (>= 30)
    #[arg(long, default_value_t = 100)]
    pub precision: u32,
    /// Operator file; defaults to the bundled AESZ34 operator
    #[arg(long)]
    pub op: Option<PathBuf>,
    /// Mirror-data file; defaults to the bundled AESZ34 data for --k
    #[arg(long)]
    pub mirror: Option<PathBuf>,
    /// Target point as a rational p/q
    #[arg(long, default_value = "-1/7", allow_hyphen_values = true)]
    pub target: String,
    /// Base (seed) point as a rational p/q inside the convergence disc
    #[arg(long, default_value = "-1/50", allow_hyphen_values = true)]
    pub base: String,
    /// Waypoint file overriding automatic path planning (`re im` per line)
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// AESZ34 family tag (selects the bundled mirror data)
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Never touch the network; rely on cache and bundled data
    #[arg(long)]
    pub offline: bool,
    /// Output format
    #[arg(long, default_value = "text", value_parser = ["text", "kv"])]
    pub format: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the canonical Frobenius series coefficients f0..f3
    Frobenius {
        #[command(flatten)]
        config: RunConfig,
        /// Truncation order
        #[arg(short = 'N', long = "order")]
        n: usize,
    },
    /// Transport the canonical basis to the target and print the Wronskian
    #[command(name = "continue")]
    Continue {
        #[command(flatten)]
        config: RunConfig,
    },
    /// Monodromy matrix around a singular (or ordinary) point
    Monodromy {
        #[command(flatten)]
        config: RunConfig,
        /// Loop center as a rational p/q
        #[arg(long, allow_hyphen_values = true)]
        center: String,
    },
    /// F_infinity, eigenbases, and the periods c+/c- at the target
    Deligne {
        #[command(flatten)]
        config: RunConfig,
    },
    /// L(f, s) for a modular form given by label or coefficient file
    Lvalue {
        #[command(flatten)]
        config: RunConfig,
        /// Form label (14.2.a.a / 14.4.a.a) or a coefficient file path
        #[arg(long)]
        form: String,
        /// Integer evaluation point inside the critical strip
        #[arg(long)]
        s: i64,
    },
    /// Verify j(1/2 + i v_perp) = (215/28)^3
    Jcheck {
        #[command(flatten)]
        config: RunConfig,
        /// Override the bundled v_perp decimal constant
        #[arg(long)]
        vperp: Option<String>,
    },
    /// End-to-end verification of the c+/c- rational identities
    Verify {
        #[command(flatten)]
        config: RunConfig,
    },
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version with success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Frobenius { config, n } => cmd_frobenius(&config, n),
        Cmd::Continue { config } => cmd_continue(&config),
        Cmd::Monodromy { config, center } => cmd_monodromy(&config, &center),
        Cmd::Deligne { config } => cmd_deligne(&config),
        Cmd::Lvalue { config, form, s } => cmd_lvalue(&config, &form, s),
        Cmd::Jcheck { config, vperp } => cmd_jcheck(&config, vperp.as_deref()),
        Cmd::Verify { config } => cmd_verify(&config),
    }
}

fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.trim()
        .parse::<Rational>()
        .map_err(|e| CliError::Usage(format!("bad rational `{s}`: {e}")))
}

fn load_operator(config: &RunConfig) -> Result<Operator, CliError> {
    match &config.op {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(Operator::parse(&text)?)
        }
        None => Ok(Operator::aesz34()),
    }
}

fn load_mirror(config: &RunConfig) -> Result<MirrorData, CliError> {
    match &config.mirror {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(MirrorData::parse(&text)?)
        }
        None => {
            if config.k == 1 || config.k == 2 {
                Ok(MirrorData::aesz34(config.k))
            } else {
                Err(CliError::Usage(format!(
                    "no bundled mirror data for k = {}; pass --mirror",
                    config.k
                )))
            }
        }
    }
}

fn validate_config(config: &RunConfig, op: &Operator) -> Result<(), CliError> {
    if config.precision < 30 {
        return Err(CliError::Usage(format!(
            "precision {} below the minimum of 30 digits",
            config.precision
        )));
    }
    let target = parse_rational(&config.target)?;
    for s in pf_core::singular_points(op, 64) {
        if let pf_core::SingularPoint::Rational(q) = s {
            if q == target {
                return Err(CliError::Usage(format!(
                    "target {target} is a singular point of the operator"
                )));
            }
        }
    }
    Ok(())
}

fn load_path_file(path: &Path, bits: u32) -> Result<Vec<Complex>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut it = l.split_whitespace();
        let re: f64 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Usage(format!("bad waypoint at line {}", idx + 1)))?;
        let im: f64 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Usage(format!("bad waypoint at line {}", idx + 1)))?;
        out.push(Complex::from_f64_pair(bits, re, im));
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!(
            "path file {} has no waypoints",
            path.display()
        )));
    }
    Ok(out)
}

/// Transport the canonical basis from base to target per the configuration.
pub fn run_transport(config: &RunConfig, op: &Operator) -> Result<StateMatrix, CliError> {
    let prec = config.precision;
    let bits = working_bits(prec);
    let base = parse_rational(&config.base)?;
    let target = parse_rational(&config.target)?;
    let base_c = Complex::from_rational(bits, &base);
    let target_c = Complex::from_rational(bits, &target);
    let singular = pf_core::singular_points(op, 128);
    let plan = match &config.path {
        Some(p) => PathPlan {
            waypoints: load_path_file(p, bits)?,
            clearance: 0.0,
            around: None,
        },
        None => plan_path(&base_c, &target_c, &singular, 0.01)?,
    };
    let seed_abs = plan.waypoints[0].abs().to_f64();
    let basis = frobenius_adaptive(op, seed_abs, prec)?;
    Ok(transport(op, &basis, &plan, prec)?)
}

fn print_state(w: &StateMatrix, config: &RunConfig) {
    let digits = config.precision as usize;
    if config.format == "kv" {
        println!("target_re {}", w.at.value.re.to_string_radix(10, Some(digits)));
        println!("target_im {}", w.at.value.im.to_string_radix(10, Some(digits)));
        println!("log_re {}", w.at.log_value.re.to_string_radix(10, Some(digits)));
        println!("log_im {}", w.at.log_value.im.to_string_radix(10, Some(digits)));
        for i in 0..4 {
            for j in 0..4 {
                println!(
                    "w_{i}{j}_re {}",
                    w.entries.m[i][j].re.to_string_radix(10, Some(digits))
                );
                println!(
                    "w_{i}{j}_im {}",
                    w.entries.m[i][j].im.to_string_radix(10, Some(digits))
                );
            }
        }
        println!(
            "wronskian_abs {}",
            w.wronskian().abs().to_string_radix(10, Some(12))
        );
    } else {
        let show = 30.min(digits);
        println!(
            "W at {} (log branch {} + {} i):",
            w.at.value.re.to_string_radix(10, Some(show)),
            w.at.log_value.re.to_string_radix(10, Some(12)),
            w.at.log_value.im.to_string_radix(10, Some(12)),
        );
        for i in 0..4 {
            let row: Vec<String> = (0..4)
                .map(|j| {
                    format!(
                        "{} {:+}i",
                        w.entries.m[i][j].re.to_string_radix(10, Some(show)),
                        w.entries.m[i][j].im.to_string_radix(10, Some(show))
                    )
                })
                .collect();
            println!("  varpi_{i}: {}", row.join(" | "));
        }
    }
}

fn cmd_frobenius(config: &RunConfig, n: usize) -> Result<ExitCode, CliError> {
    let op = load_operator(config)?;
    let basis = frobenius_mum(&op, n.max(8))?;
    for (i, series) in basis.f.iter().enumerate() {
        let coeffs: Vec<String> = series.iter().take(n + 1).map(|q| q.to_string()).collect();
        println!("f{i}: {}", coeffs.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_continue(config: &RunConfig) -> Result<ExitCode, CliError> {
    let op = load_operator(config)?;
    validate_config(config, &op)?;
    let w = run_transport(config, &op)?;
    print_state(&w, config);
    Ok(ExitCode::SUCCESS)
}

fn cmd_monodromy(config: &RunConfig, center: &str) -> Result<ExitCode, CliError> {
    let op = load_operator(config)?;
    if config.precision < 30 {
        return Err(CliError::Usage("precision below 30".into()));
    }
    let base = parse_rational(&config.base)?;
    let center = parse_rational(center)?;
    let m = continuation::monodromy(
        &op,
        &base,
        &pf_core::SingularPoint::Rational(center),
        config.precision,
    )?;
    match &m.rational_entries {
        Some(q) => {
            if config.format == "kv" {
                println!("rationalized 1");
                for i in 0..4 {
                    for j in 0..4 {
                        println!("m_{i}{j} {}", q.m[i][j]);
                    }
                }
            } else {
                println!("monodromy (rationalized):");
                for i in 0..4 {
                    let row: Vec<String> = (0..4).map(|j| q.m[i][j].to_string()).collect();
                    println!("  [ {} ]", row.join("  "));
                }
            }
        }
        None => {
            println!("rationalized 0");
            for i in 0..4 {
                for j in 0..4 {
                    println!(
                        "m_{i}{j}_re {}",
                        m.float_entries.m[i][j].re.to_string_radix(10, Some(20))
                    );
                }
            }
        }
    }
    println!("residual {}", m.residual.to_string_radix(10, Some(8)));
    Ok(ExitCode::SUCCESS)
}

/// Resolve a modular form from a label or coefficient-file path.
pub fn resolve_form(config: &RunConfig, spec: &str, upto: u64) -> Result<ModularForm, CliError> {
    let as_path = Path::new(spec);
    if as_path.exists() {
        let text = std::fs::read_to_string(as_path).map_err(|source| CliError::Io {
            path: as_path.to_path_buf(),
            source,
        })?;
        return Ok(ModularForm::parse(&text)?);
    }
    if spec == "14.2.a.a" {
        return Ok(ModularForm::f2_from_point_counts(upto.max(300)));
    }
    // cache (and optionally the network) for everything else
    let cache_dir = std::env::var_os("PERIODLAB_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("cache"));
    let mut client: LmfdbClient<HttpTransport> = LmfdbClient::new(cache_dir, config.offline);
    if let Ok(template) = std::env::var("PERIODLAB_LMFDB_URL") {
        client.url_template = template;
    }
    match client.fetch_coefficients(spec, upto) {
        Ok(payload) => Ok(ModularForm::parse(&payload)?),
        Err(e) => {
            if spec == "14.4.a.a" {
                // bundled data keeps the pipeline offline-capable
                Ok(ModularForm::f4_bundled())
            } else {
                Err(e.into())
            }
        }
    }
}

fn cmd_lvalue(config: &RunConfig, form_spec: &str, s: i64) -> Result<ExitCode, CliError> {
    let prec = config.precision;
    let needed = lfunc::coefficient_cutoff(prec, 14, 1, 1) as u64;
    let form = resolve_form(config, form_spec, needed)?;
    let v = l_value(&form, s, prec)?;
    if config.format == "kv" {
        println!("label {}", form.label);
        println!("s {s}");
        println!("l_value {}", v.to_string_radix(10, Some(prec as usize)));
    } else {
        println!(
            "L({}, {s}) = {}",
            form.label,
            v.to_string_radix(10, Some(prec as usize))
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_jcheck(config: &RunConfig, vperp: Option<&str>) -> Result<ExitCode, CliError> {
    let prec = config.precision;
    let bits = working_bits(prec);
    let v = lfunc::parse_decimal(vperp.unwrap_or(lfunc::V_PERP_DECIMAL), prec)
        .ok_or_else(|| CliError::Usage("bad v_perp decimal".into()))?;
    let tau = Complex::from_parts(Float::with_val(bits, 0.5), v.clone());
    let j = lfunc::j_invariant(&tau, prec)?;
    let target = Float::with_val(bits, Rational::from((9938375i64, 21952i64)));
    let digits = digits_agreement(&j.re, &target);
    if config.format == "kv" {
        println!("v_perp {}", v.to_string_radix(10, Some(prec as usize)));
        println!("j_re {}", j.re.to_string_radix(10, Some(prec as usize)));
        println!("j_im {}", j.im.to_string_radix(10, Some(12)));
        println!("target {}", target.to_string_radix(10, Some(prec as usize)));
        println!("digits_agreement {digits}");
    } else {
        println!("j(1/2 + i v_perp) = {}", j.re.to_string_radix(10, Some(30)));
        println!("(215/28)^3        = {}", target.to_string_radix(10, Some(30)));
        println!("digits of agreement: {digits}");
    }
    Ok(if digits >= 10 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

struct DelignePipeline {
    report_base: String,
    report_target: String,
    s: crate::mirror::SMatrix,
    consts: Consts,
    f: deligne::Involution,
    plus: [[rug::Integer; 4]; 2],
    minus: [[rug::Integer; 4]; 2],
    c_plus: Complex,
    c_minus: Complex,
    c_plus_twisted: Complex,
    ref_plus: Complex,
    ref_minus: Complex,
}

fn run_deligne_pipeline(config: &RunConfig) -> Result<DelignePipeline, CliError> {
    let op = load_operator(config)?;
    validate_config(config, &op)?;
    let md = load_mirror(config)?;
    let prec = config.precision;
    let w = run_transport(config, &op)?;
    let consts = Consts::new(working_bits(prec));
    let s = build_s(&md, prec)?;
    let f = f_infinity(&s, &w)?;
    let (plus, minus) = eigenspace_bases(&f)?;
    let cp = c_plus(&s, &w, &plus, &consts)?;
    let cm = c_minus(&s, &w, &minus, &consts)?;
    let cpt = tate_twist(&cp, 2, &consts);
    let ref_plus = reference_c_plus(&w);
    let ref_minus = reference_c_minus(&w);
    Ok(DelignePipeline {
        report_base: config.base.clone(),
        report_target: config.target.clone(),
        s,
        consts,
        f,
        plus,
        minus,
        c_plus: cp,
        c_minus: cm,
        c_plus_twisted: cpt,
        ref_plus,
        ref_minus,
    })
}

fn cmd_deligne(config: &RunConfig) -> Result<ExitCode, CliError> {
    let p = run_deligne_pipeline(config)?;
    let digits = config.precision as usize;
    let show = 40.min(digits);
    if config.format == "kv" {
        match &p.f.rational_entries {
            Some(q) => {
                println!("f_infinity_rational 1");
                for i in 0..4 {
                    for j in 0..4 {
                        println!("f_inf_{i}{j} {}", q.m[i][j]);
                    }
                }
            }
            None => println!("f_infinity_rational 0"),
        }
        for (name, c) in [
            ("c_plus", &p.c_plus),
            ("c_minus", &p.c_minus),
            ("c_plus_twisted", &p.c_plus_twisted),
            ("c_plus_ref", &p.ref_plus),
            ("c_minus_ref", &p.ref_minus),
        ] {
            println!("{name}_re {}", c.re.to_string_radix(10, Some(digits)));
            println!("{name}_im {}", c.im.to_string_radix(10, Some(digits)));
        }
    } else {
        match &p.f.rational_entries {
            Some(q) => {
                println!("F_infinity (rationalized, residual {}):", p.f.residual.to_string_radix(10, Some(6)));
                for i in 0..4 {
                    let row: Vec<String> = (0..4).map(|j| q.m[i][j].to_string()).collect();
                    println!("  [ {} ]", row.join("  "));
                }
            }
            None => println!("F_infinity did not rationalize"),
        }
        println!(
            "plus basis:  ({}) ({})",
            p.plus[0].clone().map(|x| x.to_string()).join(","),
            p.plus[1].clone().map(|x| x.to_string()).join(",")
        );
        println!(
            "minus basis: ({}) ({})",
            p.minus[0].clone().map(|x| x.to_string()).join(","),
            p.minus[1].clone().map(|x| x.to_string()).join(",")
        );
        println!("c_plus          = {}", fmt_c(&p.c_plus, show));
        println!("c_minus         = {}", fmt_c(&p.c_minus, show));
        println!("c_plus (2)-twist = {}", fmt_c(&p.c_plus_twisted, show));
        println!("c_plus reference = {}", fmt_c(&p.ref_plus, show));
        println!("c_minus reference = {}", fmt_c(&p.ref_minus, show));
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_c(c: &Complex, digits: usize) -> String {
    format!(
        "{} {:+}i",
        c.re.to_string_radix(10, Some(digits)),
        c.im.to_string_radix(10, Some(digits))
    )
}

/// The full verification pipeline; the report is printed by `cmd_verify`.
pub fn run_verify(config: &RunConfig) -> Result<DeligneReport, CliError> {
    let p = run_deligne_pipeline(config)?;
    let prec = config.precision;
    let bits = working_bits(prec);
    let needed = lfunc::coefficient_cutoff(prec, 14, 1, 1) as u64;
    let f2 = resolve_form(config, "14.2.a.a", needed)?;
    let f4 = resolve_form(config, "14.4.a.a", needed)?;
    let l_f2_1 = l_value(&f2, 1, prec)?;
    let l_f4_1 = l_value(&f4, 1, prec)?;
    let l_f4_2 = l_value(&f4, 2, prec)?;
    let v_perp = lfunc::parse_decimal(lfunc::V_PERP_DECIMAL, prec)
        .ok_or_else(|| CliError::Usage("bad bundled v_perp".into()))?;

    // ratio_plus = c_plus_ref / (L(f2,1) L(f4,2))
    let denom = Float::with_val(bits, &l_f2_1 * &l_f4_2);
    let ratio_plus_float = Float::with_val(bits, &p.ref_plus.re / &denom);
    // ratio_minus = c_minus_ref v_perp / (pi^3 L(f4,1) L(f2,1))
    let pi3 = p.consts.pi_pow(3);
    let mut denom_m = Float::with_val(bits, &l_f4_1 * &l_f2_1);
    denom_m *= &pi3;
    let mut ratio_minus_float = Float::with_val(bits, &p.ref_minus.re / &denom_m);
    ratio_minus_float *= &v_perp;

    let tol = pow10(bits, -(prec as i32) / 2);
    // v_perp is a 50-digit bundled constant, so the minus ratio can never be
    // sharper than that; cap the digits demanded of it accordingly
    let tol_minus = pow10(bits, -((prec as i32) / 2).min(40));
    let ratio_plus = recognize_rational(&ratio_plus_float, 1_000_000, &tol);
    let ratio_minus = recognize_rational(&ratio_minus_float, 1_000_000, &tol_minus);
    let digits_plus = match &ratio_plus {
        Some(r) => {
            let exact = Float::with_val(bits, &r.value());
            digits_agreement(&ratio_plus_float, &exact)
        }
        None => 0,
    };
    let digits_minus = match &ratio_minus {
        Some(r) => {
            let exact = Float::with_val(bits, &r.value());
            digits_agreement(&ratio_minus_float, &exact)
        }
        None => 0,
    };
    // imaginary parts of the reference periods are numerical diagnostics and
    // must vanish to half precision
    for c in [&p.ref_plus, &p.ref_minus] {
        let rel = Float::with_val(bits, c.im.clone().abs() / c.abs());
        if rel > tol {
            return Err(CliError::Usage(
                "reference period has a non-vanishing imaginary part; branch conventions violated"
                    .into(),
            ));
        }
    }
    Ok(DeligneReport {
        operator: "AESZ34".into(),
        k: Some(config.k),
        lambda: p.s.lambda_used.clone(),
        precision: prec,
        base: p.report_base.clone(),
        target: p.report_target.clone(),
        f_infinity: p.f,
        plus_basis: p.plus,
        minus_basis: p.minus,
        c_plus: p.c_plus,
        c_minus: p.c_minus,
        c_plus_twisted: p.c_plus_twisted,
        reference_c_plus: p.ref_plus,
        reference_c_minus: p.ref_minus,
        l_f2_1,
        l_f4_1,
        l_f4_2,
        v_perp,
        ratio_plus_float,
        ratio_minus_float,
        ratio_plus,
        ratio_minus,
        digits_plus,
        digits_minus,
    })
}

fn cmd_verify(config: &RunConfig) -> Result<ExitCode, CliError> {
    let report = run_verify(config)?;
    if config.format == "kv" {
        print!("{}", report.to_kv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(if report.verified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
