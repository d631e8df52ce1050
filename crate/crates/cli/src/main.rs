//! Command-line front end: translate `.ll` files, run translated programs on
//! memory images and measure evaluator throughput.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use ll2fun::analysis::{analyze_function, report};
use ll2fun::eval::{EvalErrorKind, Stats};
use ll2fun::ll::{parse_source, ParseErrorKind};
use ll2fun::state::{parse_memory_image, parse_natural, DEFAULT_STACK};
use ll2fun::{fun, load_and_compile, translate_source, Error, Evaluator, MachineState, Program};

/// Process exit statuses.
mod status {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const PARSE: u8 = 3;
    pub const UNSUPPORTED: u8 = 4;
    pub const ANALYSIS: u8 = 5;
    pub const RUNTIME: u8 = 6;
    pub const BUDGET: u8 = 7;
}

#[derive(Parser)]
#[command(
    name = "ll2fun",
    version,
    about = "Translate LLVM IR into a tail-recursive functional form and run it"
)]
#[command(
    after_help = "Exit status: 0 ok, 1 i/o or usage, 2 bad command line, 3 parse error, \
4 unsupported construct, 5 analysis or validation error, 6 runtime fault, 7 budget exhausted."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a `.ll` file and write the functional program.
    Translate {
        input: PathBuf,
        /// Output path; `-` for stdout. Defaults to the input with a `.fun` extension.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a program and print the final return value.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Also print the addresses whose bytes changed.
        #[arg(long)]
        diff: bool,
    },
    /// Run a program repeatedly with checks off and report throughput.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// LLVM instructions executed per loop iteration.
        #[arg(long, default_value_t = 9)]
        instrs_per_iter: u64,
        /// Number of timed runs.
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        reps: u32,
    },
    /// Print the control-flow analysis of each function in a `.ll` file.
    Cfg { input: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// A `.fun` program, or a `.ll` file to translate first.
    program: PathBuf,
    #[arg(long)]
    entry: String,
    /// Arguments, comma separated or repeated; decimal, `0x` or `#x`.
    #[arg(long, value_delimiter = ',', num_args = 0.., value_parser = natural)]
    args: Vec<u128>,
    /// Initial memory contents.
    #[arg(long)]
    mem_image: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STACK, value_parser = address)]
    stack: u32,
    #[arg(long, default_value_t = DEFAULT_STACK, value_parser = address)]
    frame: u32,
    /// Skip argument and result signature checks.
    #[arg(long)]
    no_check: bool,
    /// Maximum number of loop iterations.
    #[arg(long, value_parser = natural_u64)]
    budget: Option<u64>,
    /// Log definition entries and exits to stderr.
    #[arg(long)]
    trace: bool,
}

fn natural(s: &str) -> Result<u128, String> {
    parse_natural(s).ok_or_else(|| format!("`{s}` is not a natural number"))
}

fn natural_u64(s: &str) -> Result<u64, String> {
    natural(s)?
        .try_into()
        .map_err(|_| format!("`{s}` does not fit in 64 bits"))
}

fn address(s: &str) -> Result<u32, String> {
    natural(s)?
        .try_into()
        .map_err(|_| format!("`{s}` is not below 2^32"))
}

struct Failure {
    status: u8,
    message: String,
}

impl Failure {
    fn new(status: u8, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(status::USAGE, format!("{}: {e}", path.display())))
}

fn classify(path: &Path, e: Error) -> Failure {
    let status = match &e {
        Error::Parse(p) if p.kind == ParseErrorKind::Unsupported => status::UNSUPPORTED,
        Error::Parse(_) | Error::Load(_) => status::PARSE,
        Error::Analysis(_) | Error::Validation(_) | Error::Compile(_) => status::ANALYSIS,
        Error::Eval(ev) if ev.is_budget() => status::BUDGET,
        Error::Eval(_) => status::RUNTIME,
    };
    Failure::new(status, format!("{}:{e}", path.display()))
}

fn translate(input: &Path, out: Option<PathBuf>) -> Outcome<()> {
    let source = read(input)?;
    let t = translate_source(&source).map_err(|e| classify(input, e))?;
    let text = fun::emit_program(&t.program);
    let out = out.unwrap_or_else(|| input.with_extension("fun"));
    if out.as_os_str() == "-" {
        print!("{text}");
    } else {
        fs::write(&out, &text)
            .map_err(|e| Failure::new(status::USAGE, format!("{}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    let s = &t.summary;
    println!(
        "functions {}, blocks {}, loops {}, definitions {}",
        s.functions,
        s.blocks,
        s.loops,
        t.program.defs.len()
    );
    Ok(())
}

fn load(path: &Path) -> Outcome<Program> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "ll") {
        let t = translate_source(&text).map_err(|e| classify(path, e))?;
        Program::compile(&t.program).map_err(|e| classify(path, e.into()))
    } else {
        load_and_compile(&text)
            .map(|(_, p)| p)
            .map_err(|e| classify(path, e))
    }
}

struct Prepared {
    program: Program,
    state: MachineState,
}

fn prepare(run: &RunArgs) -> Outcome<Prepared> {
    let program = load(&run.program)?;
    let def = program.def(&run.entry).ok_or_else(|| {
        Failure::new(
            status::USAGE,
            format!("no definition named `{}`", run.entry),
        )
    })?;
    let arity = def.params.len().saturating_sub(1);
    if run.args.len() != arity {
        return Err(Failure::new(
            status::USAGE,
            format!(
                "`{}` takes {arity} arguments besides the state, {} given",
                run.entry,
                run.args.len()
            ),
        ));
    }
    let mut state = MachineState::new(run.stack, run.frame);
    if let Some(path) = &run.mem_image {
        let mem = parse_memory_image(&read(path)?).map_err(|e| {
            Failure::new(
                status::PARSE,
                format!("{}:{}: {}", path.display(), e.line, e.message),
            )
        })?;
        state = state.with_memory(mem);
    }
    Ok(Prepared { program, state })
}

fn execute(p: &Prepared, run: &RunArgs, check: bool) -> Outcome<(MachineState, Stats)> {
    let mut stderr = io::stderr().lock();
    let mut ev = Evaluator::new(&p.program)
        .check_signatures(check)
        .budget(run.budget);
    if run.trace {
        ev = ev.trace(&mut stderr);
    }
    ev.run(&run.entry, &run.args, p.state.clone()).map_err(|e| {
        let status = match e.kind {
            EvalErrorKind::Budget { .. } => status::BUDGET,
            _ => status::RUNTIME,
        };
        Failure::new(status, format!("runtime error {e}"))
    })
}

fn run(run: &RunArgs, diff: bool) -> Outcome<()> {
    let p = prepare(run)?;
    let (st, stats) = execute(&p, run, !run.no_check)?;
    println!("{}", st.retval);
    if diff {
        let changed = st.mem.diff(&p.state.mem);
        println!(
            "iterations {}, calls {}, max depth {}",
            stats.iterations.total(),
            stats.calls,
            stats.max_depth
        );
        println!("stack #x{:x}, frame #x{:x}", st.stack, st.frame);
        println!("{} bytes changed", changed.len());
        for a in changed {
            println!("  #x{a:x}: {} -> {}", p.state.mem.byte(a), st.mem.byte(a));
        }
    }
    Ok(())
}

fn bench(run: &RunArgs, instrs_per_iter: u64, reps: u32) -> Outcome<()> {
    let p = prepare(run)?;
    let mut rates = Vec::new();
    for rep in 1..=reps {
        let start = Instant::now();
        let (st, stats) = execute(&p, run, false)?;
        // Never divide by a zero reading from a coarse clock.
        let elapsed = start.elapsed().max(Duration::from_nanos(1));
        let iterations = stats.iterations.total();
        let rate = (iterations * instrs_per_iter) as f64 / elapsed.as_secs_f64();
        rates.push(rate);
        println!(
            "run {rep}: retval {}, {:.6} s, {iterations} iterations, {:.0} instr/s",
            st.retval,
            elapsed.as_secs_f64(),
            rate
        );
    }
    rates.sort_by(f64::total_cmp);
    let median = rates[rates.len() / 2];
    let (lo, hi) = (rates[0], rates[rates.len() - 1]);
    let spread = if lo > 0.0 { hi / lo } else { 1.0 };
    println!("median {median:.0} instr/s at {instrs_per_iter} instr/iteration; max/min {spread:.2} over {reps} runs");
    Ok(())
}

fn cfg(input: &Path) -> Outcome<()> {
    let source = read(input)?;
    let module = parse_source(&source).map_err(|e| classify(input, e.into()))?;
    let mut out = io::stdout().lock();
    for (i, f) in module.functions.iter().enumerate() {
        let a = analyze_function(f).map_err(|e| classify(input, e.into()))?;
        if i > 0 {
            let _ = writeln!(out);
        }
        let _ = write!(out, "{}", report::render(f, &a));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Translate { input, out } => translate(&input, out),
        Command::Run { run: r, diff } => run(&r, diff),
        Command::Bench {
            run,
            instrs_per_iter,
            reps,
        } => bench(&run, instrs_per_iter, reps),
        Command::Cfg { input } => cfg(&input),
    };
    match result {
        Ok(()) => ExitCode::from(status::OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}
