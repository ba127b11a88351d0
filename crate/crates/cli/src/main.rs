use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::{BigInt, BigUint};
use serde::Serialize;
use serde_json::{json, Value};

use squfof_core::contfrac::{self, Convention};
use squfof_core::infra::{self, InfraError, NoFactorReason};
use squfof_core::parallel::bench::{self, BenchConfig, BenchMethod};
use squfof_core::parallel::{ParallelConfig, ParallelError, WorkerPool};
use squfof_core::qforms::{self, Discriminant, QuadForm};
use squfof_core::selftest::{self, Scale};
use squfof_core::squfof::{self, SqufofConfig, SqufofError};
use squfof_core::{nt, FactorReport};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "squfof", version, about = "Square forms factorization toolkit")]
struct Cli {
    #[command(flatten)]
    out: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct OutputArgs {
    /// One JSON record per line.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// CSV with a header row.
    #[arg(long, global = true)]
    csv: bool,
    /// Reproducible output: zero wall times, fixed seeds, SQUFOF_WORKERS ignored.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PMethod {
    Segments,
    Multipliers,
}

#[derive(Subcommand)]
enum Command {
    /// Serial SQUFOF.
    Factor {
        #[arg(value_parser = parse_n)]
        n: BigUint,
        /// First multiplier; the ladder continues from it.
        #[arg(long, default_value_t = 1)]
        mult: u64,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Stay on the given multiplier.
        #[arg(long)]
        no_escalate: bool,
    },
    /// Continued fraction table of √N: i, b_i, P_i, Q_i.
    Cf {
        #[arg(value_parser = parse_n)]
        n: BigUint,
        /// Expand (1 + √N)/2 instead (N ≡ 1 mod 4).
        #[arg(long)]
        normalized: bool,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Walk to negative indices.
        #[arg(long)]
        back: bool,
    },
    /// Reduced forms of discriminant D in cycle order, with distances.
    Cycle {
        #[arg(value_parser = parse_n)]
        d: BigUint,
        /// Every cycle, not just the principal one.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 1 << 20)]
        max_len: usize,
    },
    /// Regulator of the order of discriminant 4N (or N with --normalized).
    Regulator {
        #[arg(value_parser = parse_n)]
        n: BigUint,
        #[arg(long)]
        normalized: bool,
    },
    /// Baby-step giant-step factoring from the regulator.
    Bsgs {
        #[arg(value_parser = parse_n)]
        n: BigUint,
        /// Only k = 1.
        #[arg(long)]
        no_escalate: bool,
    },
    /// Parallel SQUFOF.
    Pfactor {
        #[arg(value_parser = parse_n)]
        n: BigUint,
        /// Defaults to SQUFOF_WORKERS, then 1.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = PMethod::Segments)]
        method: PMethod,
        /// Ladder size for the segment method.
        #[arg(long)]
        size: Option<usize>,
        /// Multipliers for the multiplier method.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 3, 5, 7, 11])]
        mults: Vec<u64>,
    },
    /// Timing table over random semiprimes.
    Bench {
        /// Bits of N; each prime has half as many.
        #[arg(long, value_delimiter = ',', default_values_t = [48u64])]
        bits: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        workers: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the per-configuration summary instead of raw rows.
        #[arg(long)]
        summary: bool,
    },
    /// Run the invariant suites.
    Selftest {
        /// Acceptance-size samples instead of the quick ones.
        #[arg(long)]
        full: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
    },
}

fn parse_n(s: &str) -> Result<BigUint, String> {
    nt::parse_nat(s).ok_or_else(|| format!("`{s}` is not a non-negative decimal or 0x-hex integer"))
}

#[derive(Debug)]
enum Failure {
    NoFactor(String),
    Usage(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NoFactor(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::NoFactor(m) | Failure::Usage(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<SqufofError> for Failure {
    fn from(e: SqufofError) -> Self {
        match e {
            SqufofError::Prime(_) | SqufofError::Exhausted { .. } | SqufofError::TrivialSymmetry => Failure::NoFactor(e.to_string()),
            SqufofError::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<InfraError> for Failure {
    fn from(e: InfraError) -> Self {
        match e {
            InfraError::NoFactor(_) | InfraError::PeriodNotFound(_) => Failure::NoFactor(e.to_string()),
            InfraError::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<ParallelError> for Failure {
    fn from(e: ParallelError) -> Self {
        match e {
            ParallelError::Squfof(inner) => inner.into(),
            ParallelError::Exhausted { .. } => Failure::NoFactor(e.to_string()),
            ParallelError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

/// What a command produced, before formatting.
struct Output {
    command: &'static str,
    payload: Value,
    text: String,
    /// Header and rows for `--csv`.
    csv: (Vec<&'static str>, Vec<Vec<String>>),
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    schema_version: u32,
    command: &'a str,
    payload: &'a Value,
}

fn emit(out: &Output, args: OutputArgs) {
    if args.json {
        let rec = OutputRecord { schema_version: SCHEMA_VERSION, command: out.command, payload: &out.payload };
        println!("{}", serde_json::to_string(&rec).expect("serializable"));
    } else if args.csv {
        println!("{}", out.csv.0.join(","));
        for row in &out.csv.1 {
            println!("{}", row.join(","));
        }
    } else {
        print!("{}", out.text);
    }
}

const FACTOR_COLUMNS: [&str; 9] = ["n", "p", "q", "method", "multiplier", "forward_steps", "reverse_steps", "squares_tested", "giant_steps"];

fn factor_output(command: &'static str, rep: &FactorReport, args: OutputArgs, extra: Value) -> Result<Output, Failure> {
    if !rep.is_valid() {
        return Err(Failure::Internal(format!("invalid factorization reported: {} ≠ {} × {}", rep.n, rep.factors.0, rep.factors.1)));
    }
    let mut payload = serde_json::to_value(rep).map_err(|e| Failure::Internal(e.to_string()))?;
    if args.deterministic {
        payload["wall_time_ms"] = json!(0.0);
    }
    if let (Value::Object(m), Value::Object(x)) = (&mut payload, extra) {
        m.extend(x);
    }
    let (p, q) = &rep.factors;
    let mut text = format!("{} = {} × {}\n", rep.n, p, q);
    let _ = writeln!(text, "method {}, multiplier {}, forward steps {}, reverse steps {}", rep.method, rep.multiplier, rep.forward_steps, rep.reverse_steps);
    let row = vec![
        rep.n.to_string(),
        p.to_string(),
        q.to_string(),
        rep.method.to_string(),
        rep.multiplier.to_string(),
        rep.forward_steps.to_string(),
        rep.reverse_steps.to_string(),
        rep.squares_tested.to_string(),
        rep.giant_steps.to_string(),
    ];
    Ok(Output { command, payload, text, csv: (FACTOR_COLUMNS.to_vec(), vec![row]) })
}

fn cmd_factor(n: &BigUint, mult: u64, max_steps: Option<u64>, no_escalate: bool, args: OutputArgs) -> Result<Output, Failure> {
    if mult == 0 {
        return Err(Failure::Usage("multiplier must be positive".into()));
    }
    let cfg = SqufofConfig { multiplier: mult, max_forward_steps: max_steps, escalate: !no_escalate, ..SqufofConfig::default() };
    let rep = squfof::squfof_factor(n, &cfg)?;
    factor_output("factor", &rep, args, json!({}))
}

fn cmd_cf(n: &BigUint, normalized: bool, steps: usize, back: bool) -> Result<Output, Failure> {
    let conv = if normalized { Convention::Normalized } else { Convention::Standard };
    let rows = contfrac::cf_table(n, conv, steps, back).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut text = format!("{:>6} {:>12} {:>12} {:>12}\n", "i", "b_i", "P_i", "Q_i");
    let mut csv = Vec::new();
    for r in &rows {
        let _ = writeln!(text, "{:>6} {:>12} {:>12} {:>12}", r.i, r.b, r.p, r.q);
        csv.push(vec![r.i.to_string(), r.b.to_string(), r.p.to_string(), r.q.to_string()]);
    }
    let payload = json!({ "n": n.to_string(), "convention": conv, "rows": rows.iter().map(|r| json!({
        "i": r.i, "b": r.b.to_string(), "p": r.p.to_string(), "q": r.q.to_string()
    })).collect::<Vec<_>>() });
    Ok(Output { command: "cf", payload, text, csv: (vec!["i", "b", "p", "q"], csv) })
}

fn cmd_cycle(d: &BigUint, all: bool, max_len: usize) -> Result<Output, Failure> {
    let disc = Discriminant::new(BigInt::from(d.clone())).map_err(|e| Failure::Usage(e.to_string()))?;
    let starts: Vec<QuadForm> = if all { qforms::all_reduced_forms(&disc) } else { vec![QuadForm::principal(&disc)] };
    let mut seen = std::collections::HashSet::new();
    let (mut text, mut csv, mut cycles) = (String::new(), Vec::new(), Vec::new());
    for f in starts {
        if seen.contains(&(f.a.clone(), f.b.clone())) {
            continue;
        }
        let cyc = f.cycle(max_len).map_err(|e| Failure::NoFactor(e.to_string()))?;
        let id = cycles.len();
        let _ = writeln!(text, "cycle {id} ({} forms)", cyc.len());
        let mut acc = 0.0;
        let mut forms = Vec::new();
        for (i, g) in cyc.iter().enumerate() {
            seen.insert((g.a.clone(), g.b.clone()));
            let step = g.rho_distance();
            let _ = writeln!(text, "{i:>6}  {g:<40} step {step:.9}  at {acc:.9}");
            csv.push(vec![id.to_string(), i.to_string(), g.a.to_string(), g.b.to_string(), g.c.to_string(), format!("{step:.12}"), format!("{acc:.12}")]);
            forms.push(json!({ "a": g.a.to_string(), "b": g.b.to_string(), "c": g.c.to_string(), "step": step, "distance": acc }));
            acc += step;
        }
        let _ = writeln!(text, "cycle distance {acc:.12}");
        cycles.push(json!({ "forms": forms, "distance": acc }));
    }
    let payload = json!({ "d": d.to_string(), "cycles": cycles });
    Ok(Output { command: "cycle", payload, text, csv: (vec!["cycle", "i", "a", "b", "c", "step", "distance"], csv) })
}

fn cmd_regulator(n: &BigUint, normalized: bool) -> Result<Output, Failure> {
    let conv = if normalized { Convention::Normalized } else { Convention::Standard };
    let r = infra::regulator(n, conv).map_err(|e| match e {
        InfraError::Cf(_) => Failure::Usage(e.to_string()),
        e => e.into(),
    })?;
    let text = format!("R = {:.15}\nperiod {}\n", r.value, r.period);
    let payload = json!({ "n": n.to_string(), "convention": conv, "regulator": r.value, "period": r.period });
    Ok(Output { command: "regulator", payload, text, csv: (vec!["n", "convention", "regulator", "period"], vec![vec![n.to_string(), format!("{conv:?}").to_lowercase(), format!("{:.15}", r.value), r.period.to_string()]]) })
}

fn cmd_bsgs(n: &BigUint, no_escalate: bool, args: OutputArgs) -> Result<Output, Failure> {
    if let Some(rep) = squfof::preflight(n)? {
        return factor_output("bsgs", &rep, args, json!({}));
    }
    let ks: &[u64] = if no_escalate { &[1] } else { &infra::BSGS_MULTIPLIERS };
    let (rep, st) = infra::bsgs_factor_escalating(n, ks).map_err(|e| match e {
        InfraError::NoFactor(NoFactorReason::Prime) => Failure::NoFactor(format!("{n} is prime")),
        e => e.into(),
    })?;
    factor_output("bsgs", &rep, args, json!({ "baby_steps": st.baby_steps, "doublings": st.doublings, "refinements": st.refinements }))
}

fn cmd_pfactor(n: &BigUint, workers: usize, method: PMethod, size: Option<usize>, mults: &[u64], args: OutputArgs) -> Result<Output, Failure> {
    if workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    let mut pool = WorkerPool::new(workers)?;
    let r = match method {
        PMethod::Segments => pool.factor_segments(n, &ParallelConfig { size, ..ParallelConfig::default() })?,
        PMethod::Multipliers => pool.factor_multipliers(n, mults, None)?,
    };
    let extra = json!({ "workers": workers, "segments": r.segments, "tasks": r.tasks.len() });
    factor_output("pfactor", &r.report, args, extra)
}

fn cmd_bench(cfg: &BenchConfig, summary: bool, args: OutputArgs) -> Result<Output, Failure> {
    let table = bench::run_bench(cfg)?;
    let mut text = String::new();
    let stats = table.summary();
    for s in &stats {
        let _ = writeln!(text, "{:>4} bits {:<12} w={:<3} trials {:<4} mean {:>10.4} ms  median {:>10.4} ms  sd {:>9.4}", s.n_bits, s.method.name(), s.workers, s.trials, s.mean_ms, s.median_ms, s.stddev_ms);
    }
    let mut table_json = table.to_json();
    if args.deterministic {
        if let Some(rows) = table_json["rows"].as_array_mut() {
            for r in rows {
                r["wall_ms"] = json!(0.0);
            }
        }
    }
    let csv = if summary {
        let rows = stats.iter().map(|s| vec![s.n_bits.to_string(), s.method.name().into(), s.workers.to_string(), s.trials.to_string(), format!("{:.4}", s.mean_ms), format!("{:.4}", s.median_ms), format!("{:.4}", s.stddev_ms)]).collect();
        (vec!["n_bits", "method", "workers", "trials", "mean_ms", "median_ms", "stddev_ms"], rows)
    } else {
        let mut lines = table.to_csv().lines().map(str::to_owned).collect::<Vec<_>>();
        lines.remove(0);
        let rows = lines.into_iter().map(|l| l.split(',').map(str::to_owned).collect()).collect();
        (bench::CSV_HEADER.split(',').collect(), rows)
    };
    Ok(Output { command: "bench", payload: table_json, text, csv })
}

fn cmd_selftest(full: bool, only: Option<Vec<u32>>) -> Result<Output, Failure> {
    let scale = if full { Scale::Full } else { Scale::Quick };
    let ids = only.unwrap_or_else(|| (1..=9).collect());
    let mut reports = Vec::new();
    for id in ids {
        let r = selftest::run_criterion(id, scale).ok_or_else(|| Failure::Usage(format!("no criterion {id}")))?;
        eprintln!("{r}");
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let text = format!("{} of {} criteria passed\n", reports.iter().filter(|r| r.passed).count(), reports.len());
    let csv = reports.iter().map(|r| vec![r.id.to_string(), r.passed.to_string(), format!("{:.3}", r.seconds)]).collect();
    let payload = json!({ "passed": passed, "criteria": reports });
    let out = Output { command: "selftest", payload, text, csv: (vec!["criterion", "passed", "seconds"], csv) };
    if passed {
        Ok(out)
    } else {
        Err(Failure::Internal(out.text.trim().to_owned()))
    }
}

fn run(cli: Cli) -> Result<Output, Failure> {
    let args = cli.out;
    match cli.command {
        Command::Factor { n, mult, max_steps, no_escalate } => cmd_factor(&n, mult, max_steps, no_escalate, args),
        Command::Cf { n, normalized, steps, back } => cmd_cf(&n, normalized, steps, back),
        Command::Cycle { d, all, max_len } => cmd_cycle(&d, all, max_len),
        Command::Regulator { n, normalized } => cmd_regulator(&n, normalized),
        Command::Bsgs { n, no_escalate } => cmd_bsgs(&n, no_escalate, args),
        Command::Pfactor { n, workers, method, size, mults } => {
            let from_env = || std::env::var("SQUFOF_WORKERS").ok().and_then(|v| v.trim().parse().ok());
            let workers = match workers {
                Some(w) => w,
                None if args.deterministic => 1,
                None => from_env().unwrap_or(1),
            };
            cmd_pfactor(&n, workers, method, size, &mults, args)
        }
        Command::Bench { bits, trials, workers, methods, seed, summary } => {
            if bits.iter().any(|&b| b < 8 || b % 2 == 1 || b > 128) {
                return Err(Failure::Usage("--bits must be even and between 8 and 128".into()));
            }
            let methods = match methods {
                None => BenchConfig::default().methods,
                Some(ms) => ms.iter().map(|m| BenchMethod::parse(m).ok_or_else(|| Failure::Usage(format!("unknown method `{m}`")))).collect::<Result<_, _>>()?,
            };
            if workers.is_empty() || workers.contains(&0) || trials == 0 {
                return Err(Failure::Usage("--workers and --trials must be positive".into()));
            }
            let cfg = BenchConfig {
                prime_bits: bits.iter().map(|b| b / 2).collect(),
                workers,
                methods,
                trials,
                seed: if args.deterministic { 1 } else { seed },
                ..BenchConfig::default()
            };
            cmd_bench(&cfg, summary, args)
        }
        Command::Selftest { full, only } => cmd_selftest(full, only),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let args = cli.out;
    match run(cli) {
        Ok(out) => {
            emit(&out, args);
            ExitCode::SUCCESS
        }
        Err(f) => {
            if args.json {
                println!("{}", json!({ "schema_version": SCHEMA_VERSION, "error": f.message(), "exit_code": f.code() }));
            }
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
