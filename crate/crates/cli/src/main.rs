use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ellstat_core::curves::{tally_structures_with, TallyOptions};
use ellstat_core::densities::{
    f_ell, g_profile, g_sum_expected, probability_product, rat_to_f64, FInftyNorm,
};
use ellstat_core::divisor_ap::{delta, growth_report, mean_square_experiment, mean_square_grid};
use ellstat_core::groups::{Formula, GroupShape, Stat};
use ellstat_core::sweep::{
    compare, fit_through_origin, format_sig, gnuplot_script, read_column, run_sweep,
    write_compare_csv, write_sweep_csv, SweepOptions, DEFAULT_SWEEP_MAX, FULL_SWEEP_MAX,
};
use num_rational::BigRational;

#[derive(Parser)]
#[command(
    name = "ellstat",
    version,
    about = "Subgroup statistics of elliptic curves over prime fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force weighted averages over all curves mod p.
    Brute(BruteArgs),
    /// Per-prime averages for every prime up to a bound, as CSV.
    Sweep(SweepArgs),
    /// Fit y = C log x through the origin to a sweep column.
    Fit(FitArgs),
    /// Brute force against the main term under each configuration.
    Compare(CompareArgs),
    /// Local densities of Frobenius matrices.
    #[command(subcommand)]
    Density(DensityCommand),
    /// Probability of a group shape as a product of local factors.
    Prob(ProbArgs),
    /// Divisor sums in short intervals and progressions.
    #[command(subcommand)]
    Divap(DivapCommand),
}

#[derive(Args)]
struct BruteArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, value_delimiter = ',', default_value = "s,c,tau")]
    stats: Vec<Stat>,
    #[arg(long, default_value_t)]
    formula: Formula,
    /// Also print the shape counts (d1,d2,count).
    #[arg(long)]
    tally: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = DEFAULT_SWEEP_MAX)]
    xmax: u64,
    /// Accepted for compatibility; every column is always written.
    #[arg(long, value_delimiter = ',', default_value = "s,c,tau")]
    stats: Vec<Stat>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the full sweep up to 2423.
    #[arg(long)]
    full: bool,
    /// Write a gnuplot script for the output CSV here.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "avg_s_corrected")]
    column: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<u64>,
    #[arg(long, default_value_t = Stat::S)]
    stat: Stat,
    /// Formula used for the brute-force column.
    #[arg(long, default_value_t)]
    formula: Formula,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum DensityCommand {
    /// Local factor f_ell(d1, d2, p).
    FEll {
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        d1: u64,
        #[arg(long, default_value_t = 1)]
        d2: u64,
    },
    /// g_p(w, 0, ell^R) for each w with their sum.
    GSum {
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        p: u64,
        #[arg(long = "R")]
        r: u32,
    },
}

#[derive(Args)]
struct ProbArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    d1: u64,
    #[arg(long)]
    d2: u64,
    #[arg(long, default_value_t = 1000)]
    lmax: u64,
    #[arg(long, default_value_t)]
    norm: FInftyNorm,
}

#[derive(Subcommand)]
enum DivapCommand {
    /// Δ(X, a, q) = Σ_{n ≤ X, n ≡ a (q)} τ(n) minus the main term.
    Delta {
        #[arg(long = "X")]
        x: f64,
        #[arg(long, default_value_t = 1)]
        q: u64,
        #[arg(long, default_value_t = 0)]
        a: i64,
    },
    /// Mean square of Δ over residues for the window (A, B].
    MeanSquare {
        #[arg(long = "A")]
        a: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        q: u64,
    },
    /// Mean square over the standard grid of windows and moduli, as CSV.
    Grid {
        #[arg(long = "A", value_delimiter = ',', default_value = "1000000,10000000")]
        a: Vec<u64>,
    },
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn rational(x: &BigRational) -> String {
    format!("{x}")
}

fn brute(args: BruteArgs) -> CmdResult {
    let tally = tally_structures_with(
        args.p,
        TallyOptions {
            seed: args.seed,
            ..TallyOptions::default()
        },
    )?;
    let mut out = io::stdout().lock();
    writeln!(out, "stat,formula,average")?;
    for stat in &args.stats {
        writeln!(
            out,
            "{stat},{},{}",
            args.formula,
            format_sig(tally.average(*stat, args.formula), 12)
        )?;
    }
    if args.tally {
        writeln!(out)?;
        writeln!(out, "d1,d2,count")?;
        for (shape, count) in &tally.counts {
            writeln!(out, "{},{},{count}", shape.d1, shape.d2)?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> CmdResult {
    let x_max = if args.full { FULL_SWEEP_MAX } else { args.xmax };
    if x_max > FULL_SWEEP_MAX {
        return Err(format!("budget exceeded: xmax {x_max} > {FULL_SWEEP_MAX}").into());
    }
    let mut out = open_out(args.out.as_deref())?;
    let rows = run_sweep(SweepOptions {
        x_max,
        threads: args.threads,
        seed: args.seed,
    })?;
    write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    if let Some(script) = args.gnuplot {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.x as f64, r.avg_s_corrected))
            .collect();
        let slope = fit_through_origin(&points).map(|f| f.slope).unwrap_or(0.0);
        let csv = args
            .out
            .as_ref()
            .map_or("sweep.csv".into(), |p| p.display().to_string());
        std::fs::write(script, gnuplot_script(&csv, slope))?;
    }
    Ok(())
}

fn fit(args: FitArgs) -> CmdResult {
    let points = read_column(File::open(&args.input)?, &args.column)?;
    let f = fit_through_origin(&points)?;
    println!("column,slope,residual_rms,rows");
    println!(
        "{},{},{},{}",
        args.column,
        format_sig(f.slope, 12),
        format_sig(f.residual_rms, 12),
        f.n
    );
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> CmdResult {
    let rows = compare(&args.p, args.stat, args.formula, args.seed)?;
    let mut out = open_out(args.out.as_deref())?;
    write_compare_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn density(cmd: DensityCommand) -> CmdResult {
    match cmd {
        DensityCommand::FEll { ell, p, d1, d2 } => {
            let f = f_ell(ell, d1, d2, p)?;
            println!("ell,p,d1,d2,exact,value,stabilized_at_R");
            println!(
                "{ell},{p},{d1},{d2},{},{},{}",
                rational(&f.value),
                format_sig(f.to_f64(), 12),
                f.stabilized_at_r
            );
        }
        DensityCommand::GSum { ell, p, r } => {
            let profile = g_profile(p, 0, ell, r)?;
            let sum: BigRational = profile.iter().sum();
            let expected = g_sum_expected(p, ell, r);
            println!("w,exact,value");
            for (w, g) in profile.iter().enumerate() {
                println!("{w},{},{}", rational(g), format_sig(rat_to_f64(g), 12));
            }
            println!(
                "sum,{},{}",
                rational(&sum),
                format_sig(rat_to_f64(&sum), 12)
            );
            println!(
                "expected,{},{}",
                rational(&expected),
                format_sig(rat_to_f64(&expected), 12)
            );
            if sum != expected {
                return Err("invariant violated: g-sum identity fails".into());
            }
        }
    }
    Ok(())
}

fn prob(args: ProbArgs) -> CmdResult {
    let shape = GroupShape::new(args.d1, args.d2)?;
    let est = probability_product(args.p, shape, args.lmax, args.norm)?;
    let enumerated: Vec<String> = est.enumerated.iter().map(u64::to_string).collect();
    println!("p,d1,d2,lmax,norm,probability,last_decade_log_increment,enumerated");
    println!(
        "{},{},{},{},{},{},{},{}",
        args.p,
        args.d1,
        args.d2,
        args.lmax,
        args.norm,
        format_sig(est.value, 12),
        format_sig(est.last_decade_log_increment, 12),
        enumerated.join(" ")
    );
    Ok(())
}

fn divap(cmd: DivapCommand) -> CmdResult {
    match cmd {
        DivapCommand::Delta { x, q, a } => {
            println!("X,a,q,delta");
            println!("{x},{a},{q},{}", format_sig(delta(x, a, q)?, 12));
        }
        DivapCommand::MeanSquare { a, b, q } => {
            let m = mean_square_experiment(a, b, q)?;
            println!("A,B,q,lhs,envelope,ratio");
            println!(
                "{a},{b},{q},{},{},{}",
                format_sig(m.lhs, 12),
                format_sig(m.envelope, 12),
                format_sig(m.ratio, 12)
            );
        }
        DivapCommand::Grid { a } => {
            let rows = mean_square_grid(&a)?;
            let mut out = io::stdout().lock();
            writeln!(out, "A,B,q,lhs,envelope,ratio")?;
            for m in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    m.a_lo,
                    m.b_hi,
                    m.q,
                    format_sig(m.lhs, 12),
                    format_sig(m.envelope, 12),
                    format_sig(m.ratio, 12)
                )?;
            }
            let report = growth_report(&rows);
            for e in report.exponents {
                eprintln!("growth exponent {}", format_sig(e, 6));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Brute(a) => brute(a),
        Command::Sweep(a) => sweep(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Density(c) => density(c),
        Command::Prob(a) => prob(a),
        Command::Divap(c) => divap(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ellstat: {e}");
            ExitCode::from(2)
        }
    }
}
