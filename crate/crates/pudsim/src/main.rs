use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pudsim::bench::{run_suite, Suite};
use pudsim::cost::Objective;
use pudsim::dram::SimConfig;
use pudsim::mapping::MappingKind;
use pudsim::precision::StaticMode;
use pudsim::trace::{RunOptions, TraceRunner};

#[derive(Debug, Parser)]
#[command(name = "pudsim", version, about = "In-DRAM arithmetic simulator")]
struct Args {
    /// Key = value configuration file.
    #[arg(long, env = "PUDSIM_CONFIG")]
    config: Option<PathBuf>,
    /// bbop instruction trace to execute.
    #[arg(long, conflicts_with = "bench")]
    trace: Option<PathBuf>,
    /// Microbenchmark suite: cycles, pareto or conversion.
    #[arg(long)]
    bench: Option<String>,
    #[arg(long, default_value = "latency")]
    objective: String,
    /// Restrict program selection to one mapping (abos, abps, obps, wrap_obps<k>).
    #[arg(long)]
    mapping: Option<String>,
    #[arg(long)]
    columns: Option<usize>,
    #[arg(long)]
    subarrays: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the object tracker as JSON to stderr after the trace.
    #[arg(long)]
    dump_tracker: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round static precisions up to a power of two.
    #[arg(long)]
    pow2_static: bool,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match out {
        Some(p) => File::create(p).map(|f| Box::new(f) as Box<dyn Write>).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(args: Args) -> Result<bool, String> {
    let mut cfg = match &args.config {
        Some(p) => SimConfig::load(p).map_err(|e| e.to_string())?,
        None => SimConfig::default(),
    };
    if let Some(c) = args.columns {
        cfg.bank.columns_per_row = c;
    }
    if let Some(s) = args.subarrays {
        cfg.bank.subarrays_per_bank = s;
        cfg.bank.max_concurrent_subarrays = cfg.bank.max_concurrent_subarrays.min(s);
    }
    cfg.bank.validate().map_err(|e| e.to_string())?;
    let objective = Objective::parse(&args.objective).ok_or_else(|| format!("unknown objective {:?}", args.objective))?;
    let mapping = match &args.mapping {
        Some(m) => Some(MappingKind::parse(m).ok_or_else(|| format!("unknown mapping {m:?}"))?),
        None => None,
    };

    if let Some(name) = &args.bench {
        let suite = Suite::parse(name).map_err(|e| e.to_string())?;
        run_suite(suite, &cfg, sink(&args.out)?).map_err(|e| e.to_string())?;
        return Ok(true);
    }
    let Some(trace) = &args.trace else {
        return Err("nothing to do: pass --trace or --bench".into());
    };
    let opts = RunOptions {
        objective,
        mapping,
        seed: args.seed,
        static_mode: if args.pow2_static { StaticMode::Pow2 } else { StaticMode::Exact },
        data_dir: None,
    };
    let mut runner = TraceRunner::new(cfg, opts).map_err(|e| e.to_string())?;
    let report = runner.run_file(trace).map_err(|e| e.to_string())?;
    report.write_csv(sink(&args.out)?).map_err(|e| e.to_string())?;
    if args.dump_tracker {
        eprintln!("{}", runner.tracker_json());
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pudsim: {e}");
            ExitCode::from(2)
        }
    }
}
