//! `lmul` — command-line front end: single-product traces, exhaustive error
//! sweeps, behavioral-vs-netlist verification, netlist dumps and the NN
//! accuracy harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use lmul_core::fp8::{decode_with_policy, Decoded, Fp8Value, FpFormat, ValuePolicy};
use lmul_core::lmul::{bias_star, exact_mul, l_mul, mantissa_offset, ZeroPolicy};
use lmul_core::netlist::{build_lmul_netlist, verify_equivalence};
use lmul_core::nn;
use lmul_core::sweep::{
    all_policies, backend_tag, domain_tag, fmt_full, histogram_csv, metrics_csv_header,
    metrics_csv_row, policy_matrix, specials_tag, subnormals_tag, sweep, value_policy_tag,
    EnumPolicy, OperandDomain, SpecialHandling, SubnormalMode, SweepBackend,
};

#[derive(Parser)]
#[command(
    name = "lmul",
    version,
    about = "L-Mul approximate FP8 multiplier laboratory"
)]
struct Cli {
    /// Worker threads for exhaustive sweeps (0 = automatic). Never changes
    /// emitted values, only wall time.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory for generated files.
    #[arg(long, global = true, env = "LMUL_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one product through the approximate datapath.
    Mul(MulArgs),
    /// Exhaustive error sweeps; writes metric and histogram CSVs.
    Errors(ErrorsArgs),
    /// Prove netlist/behavioral equivalence on all 65,536 pairs per format.
    Verify(VerifyArgs),
    /// Dump the structural netlist and its resource report.
    Netlist(NetlistArgs),
    /// Train the reference MLP and compare multiplier backends.
    Nn(NnArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ZeroPolicyArg {
    Ftz,
    Raw,
}

impl From<ZeroPolicyArg> for ZeroPolicy {
    fn from(a: ZeroPolicyArg) -> Self {
        match a {
            ZeroPolicyArg::Ftz => ZeroPolicy::FlushSubnormals,
            ZeroPolicyArg::Raw => ZeroPolicy::RawBits,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ValuePolicyArg {
    Strict,
    Extended,
}

impl From<ValuePolicyArg> for ValuePolicy {
    fn from(a: ValuePolicyArg) -> Self {
        match a {
            ValuePolicyArg::Strict => ValuePolicy::Strict,
            ValuePolicyArg::Extended => ValuePolicy::Extended,
        }
    }
}

fn parse_format(s: &str) -> Result<FpFormat, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_hex_byte(s: &str) -> Result<u8, String> {
    let t = s.trim_start_matches("0x").trim_start_matches("0X");
    u8::from_str_radix(t, 16).map_err(|e| format!("invalid hex byte `{s}`: {e}"))
}

/// `all` or one format name.
fn parse_format_selection(s: &str) -> Result<Vec<FpFormat>, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(FpFormat::ALL.to_vec())
    } else {
        parse_format(s).map(|f| vec![f])
    }
}

#[derive(Args)]
struct MulArgs {
    /// First operand, hex byte (e.g. 40).
    #[arg(value_parser = parse_hex_byte)]
    x: u8,
    /// Second operand, hex byte.
    #[arg(value_parser = parse_hex_byte)]
    y: u8,
    #[arg(long, value_parser = parse_format)]
    format: FpFormat,
    #[arg(long, value_enum, default_value_t = ZeroPolicyArg::Ftz)]
    zero_policy: ZeroPolicyArg,
    #[arg(long, value_enum, default_value_t = ValuePolicyArg::Strict)]
    value_policy: ValuePolicyArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Unsigned,
    Signed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecialsArg {
    Exclude,
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubnormalsArg {
    Ftz,
    Raw,
    Exclude,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Formula,
    Unclamped,
    Hardware,
    Exact,
}

#[derive(Args)]
struct ErrorsArgs {
    /// One format or `all`.
    #[arg(long, value_parser = parse_format_selection, default_value = "all")]
    format: Vec<Vec<FpFormat>>,
    #[arg(long, value_enum, default_value_t = DomainArg::Unsigned)]
    domain: DomainArg,
    #[arg(long, value_enum, default_value_t = SpecialsArg::Exclude)]
    specials: SpecialsArg,
    #[arg(long, value_enum, default_value_t = SubnormalsArg::Exclude)]
    subnormals: SubnormalsArg,
    #[arg(long, value_enum, default_value_t = ValuePolicyArg::Extended)]
    value_policy: ValuePolicyArg,
    #[arg(long, value_enum, default_value_t = BackendArg::Formula)]
    backend: BackendArg,
    /// Sweep the full cartesian product of policy axes instead of one policy.
    #[arg(long)]
    policy_matrix: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_format_selection, default_value = "all")]
    format: Vec<Vec<FpFormat>>,
    #[arg(long, value_enum, default_value_t = ZeroPolicyArg::Ftz)]
    zero_policy: ZeroPolicyArg,
}

#[derive(Args)]
struct NetlistArgs {
    #[arg(long, value_parser = parse_format)]
    format: FpFormat,
    #[arg(long, value_enum, default_value_t = ZeroPolicyArg::Ftz)]
    zero_policy: ZeroPolicyArg,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NnBackendArg {
    All,
    Fp32,
    Fp8,
    Lmul,
}

#[derive(Args)]
struct NnArgs {
    /// Generate the deterministic synthetic dataset (written as IDX files
    /// into the output directory, then loaded back through the parser).
    #[arg(long, conflicts_with_all = ["train_images", "train_labels", "test_images", "test_labels"])]
    synth: bool,
    #[arg(long, requires_all = ["train_labels", "test_images", "test_labels"])]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    synth_train: usize,
    #[arg(long, default_value_t = 1024)]
    synth_test: usize,
    #[arg(long, default_value_t = 3)]
    epochs: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f32,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, value_parser = parse_format, default_value = "E4M3")]
    format: FpFormat,
    #[arg(long, value_enum, default_value_t = NnBackendArg::All)]
    backend: NnBackendArg,
    /// Save the trained checkpoint here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Load a checkpoint instead of training.
    #[arg(long)]
    model_in: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    lmul_core::par::configure_threads(cli.threads);
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Mul(args) => cmd_mul(args),
        Command::Errors(args) => cmd_errors(args, &cli.out_dir),
        Command::Verify(args) => cmd_verify(args),
        Command::Netlist(args) => cmd_netlist(args),
        Command::Nn(args) => cmd_nn(args, &cli.out_dir),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn cmd_mul(args: MulArgs) -> anyhow::Result<ExitCode> {
    let format = args.format;
    let zero_policy: ZeroPolicy = args.zero_policy.into();
    let value_policy: ValuePolicy = args.value_policy.into();
    let x = Fp8Value::new(args.x, format);
    let y = Fp8Value::new(args.y, format);
    let p = l_mul(x, y, zero_policy)?;
    let m = format.m();

    let show = |v: Fp8Value, name: &str| {
        let decoded = match decode_with_policy(v, value_policy) {
            Decoded::Finite(f) => fmt_num(f),
            Decoded::Infinity { negative: true } => "-inf".into(),
            Decoded::Infinity { negative: false } => "+inf".into(),
            Decoded::Nan => "nan".into(),
        };
        println!(
            "{name} = 0x{raw:02X}  sign={s} exp_field={e} frac={f}  decoded={decoded}",
            raw = v.raw,
            s = v.sign_bit() as u8,
            e = v.exp_field(),
            f = v.man_field(),
        );
    };

    println!(
        "format {format} (e={e} m={m} bias={b})  zero-policy={zp}  value-policy={vp}",
        e = format.e(),
        b = format.bias(),
        zp = if zero_policy == ZeroPolicy::FlushSubnormals {
            "ftz"
        } else {
            "raw"
        },
        vp = value_policy_tag(value_policy),
    );
    show(x, "x");
    show(y, "y");
    println!("sign = {} (x[7] XOR y[7])", p.sign as u8);

    let carry = p.carry();
    let case = match carry {
        0b00 => "1.x: mantissa kept, exponent +0",
        0b01 => "10.x: mantissa kept, exponent +1",
        0b10 => "11.x: mantissa {1, P_m[m-1:1]}, exponent +1",
        _ => "100.x: mantissa kept, exponent +2",
    };
    println!(
        "mantissa sum P_m = {fx} + {fy} + offset({off}) = 0b{pm:0w$b}  carry=2'b{c:02b} ({case})",
        fx = x.man_field(),
        fy = y.man_field(),
        off = mantissa_offset(m),
        pm = p.p_m_full,
        w = (m + 2) as usize,
        c = carry,
    );
    println!(
        "exponent sum P_e = {ex} + {ey} + bias*({bs}) = {pe}",
        ex = x.exp_field(),
        ey = y.exp_field(),
        bs = bias_star(format, carry),
        pe = p.p_e_raw,
    );
    println!(
        "output fields: P'_e={oe} P'_m=0b{om:0w$b} zero={z} underflow={u}",
        oe = p.out_exp,
        om = p.out_man,
        w = m as usize,
        z = p.zero as u8,
        u = p.underflow as u8,
    );

    let lm = p.decoded();
    let exact = exact_mul(x, y, value_policy)?;
    match exact {
        Decoded::Finite(e) => {
            if e != 0.0 {
                println!("relative error = {}", fmt_num((lm - e).abs() / e.abs()));
            }
            println!("exact={} lmul={}", fmt_num(e), fmt_num(lm));
        }
        _ => {
            println!("exact=special lmul={}", fmt_num(lm));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn resolved_policy(args: &ErrorsArgs) -> EnumPolicy {
    EnumPolicy {
        domain: match args.domain {
            DomainArg::Unsigned => OperandDomain::UnsignedOnly,
            DomainArg::Signed => OperandDomain::AllSigned,
        },
        specials: match args.specials {
            SpecialsArg::Exclude => SpecialHandling::ExcludePairsWithSpecials,
            SpecialsArg::Raw => SpecialHandling::IncludeRawBits,
        },
        subnormals: match args.subnormals {
            SubnormalsArg::Ftz => SubnormalMode::FlushToZero,
            SubnormalsArg::Raw => SubnormalMode::RawBits,
            SubnormalsArg::Exclude => SubnormalMode::Exclude,
        },
        value_policy: args.value_policy.into(),
    }
}

fn config_header(parts: &[(&str, String)]) -> String {
    let kv: Vec<String> = parts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("# lmul {}\n", kv.join(" "))
}

fn cmd_errors(args: ErrorsArgs, out_dir: &Path) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let formats = args
        .format
        .first()
        .cloned()
        .unwrap_or_else(|| FpFormat::ALL.to_vec());
    let backend = match args.backend {
        BackendArg::Formula => SweepBackend::Formula,
        BackendArg::Unclamped => SweepBackend::Unclamped,
        BackendArg::Hardware => SweepBackend::Hardware,
        BackendArg::Exact => SweepBackend::Exact,
    };
    let policy = resolved_policy(&args);

    let header = config_header(&[
        ("cmd", "errors".into()),
        (
            "formats",
            formats
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("+"),
        ),
        ("domain", domain_tag(policy.domain).into()),
        ("specials", specials_tag(policy.specials).into()),
        ("subnormals", subnormals_tag(policy.subnormals).into()),
        ("value-policy", value_policy_tag(policy.value_policy).into()),
        ("backend", backend_tag(backend).into()),
        ("policy-matrix", args.policy_matrix.to_string()),
    ]);

    let mut metrics = header.clone();
    metrics.push_str(metrics_csv_header());
    metrics.push('\n');

    println!("format  ep       mae          mre      mse          ned      cases");
    for &format in &formats {
        if args.policy_matrix {
            for report in policy_matrix(format, backend) {
                metrics.push_str(&metrics_csv_row(&report));
                metrics.push('\n');
            }
            println!("{format}: wrote {} matrix rows", all_policies().len());
        } else {
            let report = sweep(format, policy, backend);
            metrics.push_str(&metrics_csv_row(&report));
            metrics.push('\n');
            println!(
                "{format}   {ep:.4}   {mae:<12.5e} {mre:.4}   {mse:<12.5e} {ned:.4}   {n}",
                ep = report.ep,
                mae = report.mae,
                mre = report.mre,
                mse = report.mse,
                ned = report.ned,
                n = report.n_cases,
            );
            let hist_path = out_dir.join(format!("histogram_{format}.csv"));
            let mut hist = header.clone();
            hist.push_str(&histogram_csv(&report));
            fs::write(&hist_path, hist)
                .with_context(|| format!("cannot write {}", hist_path.display()))?;
        }
    }

    let metrics_path = out_dir.join("metrics.csv");
    fs::write(&metrics_path, metrics)
        .with_context(|| format!("cannot write {}", metrics_path.display()))?;
    println!("wrote {}", metrics_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let formats = args
        .format
        .first()
        .cloned()
        .unwrap_or_else(|| FpFormat::ALL.to_vec());
    let zero_policy: ZeroPolicy = args.zero_policy.into();
    let mut passed = 0usize;
    let mut cases = 0u64;
    let mut failed = false;
    for &format in &formats {
        let netlist = build_lmul_netlist(format, zero_policy);
        let report = verify_equivalence(&netlist, format, zero_policy);
        cases += report.cases;
        match report.first_mismatch {
            None => {
                passed += 1;
                println!("PASS {format}: {} cases", report.cases);
            }
            Some(m) => {
                failed = true;
                println!(
                    "FAIL {format}: x=0x{:02X} y=0x{:02X} expected sign={} exp={} man={} got sign={} exp={} man={}",
                    m.x,
                    m.y,
                    m.expected.sign as u8,
                    m.expected.exp,
                    m.expected.man,
                    m.got.sign as u8,
                    m.got.exp,
                    m.got.man
                );
            }
        }
    }
    println!(
        "{} {passed}/{total}, {cases} cases",
        if failed { "FAIL" } else { "PASS" },
        total = formats.len()
    );
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

/// Vendor-packed reference counts for context next to the logical report.
const PACKED_REFERENCE: [(FpFormat, usize, usize); 6] = [
    (FpFormat::E6M1, 22, 4),
    (FpFormat::E5M2, 21, 4),
    (FpFormat::E4M3, 22, 4),
    (FpFormat::E3M4, 22, 4),
    (FpFormat::E2M5, 23, 4),
    (FpFormat::E1M6, 22, 4),
];

fn cmd_netlist(args: NetlistArgs) -> anyhow::Result<ExitCode> {
    let zero_policy: ZeroPolicy = args.zero_policy.into();
    let netlist = build_lmul_netlist(args.format, zero_policy);
    let report = netlist.report_resources();
    let dump = netlist.dump();
    match &args.out {
        Some(path) => {
            fs::write(path, &dump).with_context(|| format!("cannot write {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{dump}"),
    }
    let (_, ref_lut, ref_carry) = PACKED_REFERENCE
        .iter()
        .find(|(f, _, _)| *f == args.format)
        .copied()
        .unwrap();
    println!(
        "resources: {} LUT, {} CARRY8, depth {} (vendor-packed reference: {} LUT, {} CARRY8)",
        report.lut_count, report.carry8_count, report.depth, ref_lut, ref_carry
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_nn(args: NnArgs, out_dir: &Path) -> anyhow::Result<ExitCode> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let (train, test) = if let (Some(ti), Some(tl), Some(vi), Some(vl)) = (
        &args.train_images,
        &args.train_labels,
        &args.test_images,
        &args.test_labels,
    ) {
        let mut train = nn::load_idx(ti, tl)?;
        train.split = nn::Split::Train;
        (train, nn::load_idx(vi, vl)?)
    } else {
        // Synthetic set: written as IDX files, then loaded back through the
        // parser so the file path is exercised end to end.
        let cfg = nn::SynthConfig {
            train: args.synth_train,
            test: args.synth_test,
            seed: args.seed,
        };
        let paths = nn::write_synth_idx(out_dir, cfg)?;
        let mut train = nn::load_idx(&paths.train_images, &paths.train_labels)?;
        train.split = nn::Split::Train;
        (train, nn::load_idx(&paths.test_images, &paths.test_labels)?)
    };
    anyhow::ensure!(!train.is_empty(), "training set is empty");

    let model = match &args.model_in {
        Some(path) => nn::load_model(path)?,
        None => {
            let spec = nn::ModelSpec {
                dims: vec![train.input_dim, args.hidden, train.num_classes],
            };
            let cfg = nn::TrainConfig {
                epochs: args.epochs,
                seed: args.seed,
                lr: args.lr,
                batch: args.batch,
            };
            nn::train_reference(&spec, &train, cfg)?
        }
    };
    if let Some(path) = &args.model_out {
        nn::save_model(&model, path)?;
        println!("wrote {}", path.display());
    }

    let scheme = nn::calibrate(&model, &test, args.format, ValuePolicy::Extended);
    let backends: Vec<nn::MultiplierBackend> = match args.backend {
        NnBackendArg::All => vec![
            nn::MultiplierBackend::Fp32Exact,
            nn::MultiplierBackend::Fp8Exact(args.format),
            nn::MultiplierBackend::Lmul(args.format),
        ],
        NnBackendArg::Fp32 => vec![nn::MultiplierBackend::Fp32Exact],
        NnBackendArg::Fp8 => vec![nn::MultiplierBackend::Fp8Exact(args.format)],
        NnBackendArg::Lmul => vec![nn::MultiplierBackend::Lmul(args.format)],
    };

    // Echo the hyperparameters the model was actually trained with.
    let hidden = model.layers.first().map(|l| l.out_dim).unwrap_or(0);
    let header = config_header(&[
        ("cmd", "nn".into()),
        ("format", args.format.to_string()),
        ("epochs", model.meta.epochs.to_string()),
        ("seed", model.meta.seed.to_string()),
        ("hidden", hidden.to_string()),
        ("lr", model.meta.lr.to_string()),
        ("batch", model.meta.batch.to_string()),
        ("train", train.len().to_string()),
        ("test", test.len().to_string()),
    ]);

    let mut csv = header.clone();
    csv.push_str("backend,n,top1,drop_vs_fp32,mean_layer_delta\n");
    let mut reports = Vec::new();
    let mut fp32_top1 = None;
    println!("backend            top1     drop      layer-delta");
    for backend in backends {
        let report = nn::infer(&model, &test, backend, &scheme);
        if matches!(backend, nn::MultiplierBackend::Fp32Exact) {
            fp32_top1 = Some(report.top1);
        }
        let drop = fp32_top1.map(|r| r - report.top1).unwrap_or(0.0);
        println!(
            "{:<18} {:.4}   {:+.4}   {:.6}",
            report.backend, report.top1, -drop, report.mean_layer_delta
        );
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.backend,
            report.n,
            fmt_full(report.top1),
            fmt_full(drop),
            fmt_full(report.mean_layer_delta)
        ));
        reports.push(report);
    }

    let csv_path = out_dir.join("nn_accuracy.csv");
    fs::write(&csv_path, csv).with_context(|| format!("cannot write {}", csv_path.display()))?;
    let json_path = out_dir.join("nn_accuracy.json");
    let json = serde_json::json!({
        "config": {
            "format": args.format.to_string(),
            "epochs": model.meta.epochs,
            "seed": model.meta.seed,
            "hidden": hidden,
            "lr": model.meta.lr,
            "batch": model.meta.batch,
            "train": train.len(),
            "test": test.len(),
            "scheme": scheme,
        },
        "reports": reports,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&json)?)
        .with_context(|| format!("cannot write {}", json_path.display()))?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}
