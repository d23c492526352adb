use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cptomo::channels::is_trace_preserving;
use cptomo::experiment::{generate_records, read_records, write_records, RecordHeader};
use cptomo::optimizer::SimplexOptions;
use cptomo::reconstruct::{
    study_damping_sweep, study_error_scaling, write_damping_csv, write_scaling_csv, StudyOptions,
};
use cptomo::{reconstruct, ChannelSpec, Error, Model, ReconstructOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cptomo",
    version,
    about = "Maximum-likelihood tomography of qubit channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OptimizerArgs {
    /// Objective evaluations allowed across all restarts
    #[arg(long)]
    max_evals: Option<usize>,
    /// Simplex restarts after the first run
    #[arg(long)]
    restarts: Option<usize>,
    /// Relative spread of simplex values that counts as converged
    #[arg(long)]
    tol: Option<f64>,
}

impl OptimizerArgs {
    fn simplex(&self) -> SimplexOptions<f64> {
        let mut opts = SimplexOptions::default();
        if let Some(n) = self.max_evals {
            opts.max_evals = n;
        }
        if let Some(n) = self.restarts {
            opts.restarts = n;
        }
        if let Some(t) = self.tol {
            opts.tol_f = t;
        }
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurement records for a channel
    Simulate {
        /// pauli:p0,p1,p2,p3 | depol:lambda | adamp:p | file:PATH
        #[arg(long)]
        channel: ChannelSpec,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Choi matrix from a record file
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "full")]
        model: Model,
        /// Seeds the perturbation of the optimizer's starting point
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Spread of the depolarizing estimate versus sample size, as CSV
    StudyScaling {
        #[arg(long, default_value = "depol:0.8")]
        channel: ChannelSpec,
        /// Comma-separated sample sizes
        #[arg(long, value_delimiter = ',', default_value = "1875,7500,30000")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "full")]
        model: Model,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Damping estimate across a grid of true values, as CSV
    StudyDamping {
        /// Comma-separated true damping parameters
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
        p: Vec<f64>,
        #[arg(long, default_value_t = 10000)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "full")]
        model: Model,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Print a channel's Choi matrix
    ChannelShow {
        #[arg(long)]
        channel: ChannelSpec,
        #[arg(long, default_value_t = 4)]
        digits: usize,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::TooFewRepetitions { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn study_options(model: Model, jobs: usize, optimizer: &OptimizerArgs) -> StudyOptions {
    StudyOptions {
        model,
        simplex: optimizer.simplex(),
        jobs,
    }
}

fn format_entry(re: f64, im: f64, digits: usize) -> String {
    // Avoid printing "-0.0000".
    let clean = |x: f64| {
        if x.abs() < 0.5 * 10f64.powi(-(digits as i32)) {
            0.0
        } else {
            x
        }
    };
    let (re, im) = (clean(re), clean(im));
    if im == 0.0 {
        format!("{re:.digits$}")
    } else {
        format!("{re:.digits$}{im:+.digits$}i")
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Simulate {
            channel,
            k,
            seed,
            out,
        } => {
            let choi = channel.choi::<f64>()?;
            let records = generate_records(&choi, k as usize, seed)?;
            let header = RecordHeader::qubit(seed, channel.to_string());
            write_records(create(&out)?, &header, &records)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Reconstruct {
            input,
            model,
            seed,
            out,
            optimizer,
        } => {
            let file = File::open(&input)
                .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let (_, records) = read_records::<f64, _>(BufReader::new(file))?;
            let mut opts = ReconstructOptions::new(model, seed);
            opts.simplex = optimizer.simplex();
            let result = reconstruct(&records, &opts)?;
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &result.to_file()).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            eprintln!(
                "K={} log-likelihood={:.6} tp_deviation={:.3e} trace_S={:.6}",
                result.k, result.log_likelihood, result.tp_deviation, result.trace_s
            );
            if !result.optimizer.converged {
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
        Command::StudyScaling {
            channel,
            k,
            reps,
            seed,
            model,
            jobs,
            out,
            optimizer,
        } => {
            let choi = channel.choi::<f64>()?;
            let study = study_error_scaling(
                &choi,
                &k,
                reps,
                seed,
                &study_options(model, jobs, &optimizer),
            )?;
            write_scaling_csv(create(&out)?, &study)?;
            println!("fitted_slope {}", study.fitted_slope);
        }
        Command::StudyDamping {
            p,
            k,
            reps,
            seed,
            model,
            jobs,
            out,
            optimizer,
        } => {
            let rows =
                study_damping_sweep(&p, k, reps, seed, &study_options(model, jobs, &optimizer))?;
            write_damping_csv(create(&out)?, &rows)?;
        }
        Command::ChannelShow { channel, digits } => {
            let choi = channel.choi::<f64>()?;
            let m = choi.matrix();
            let cells: Vec<Vec<String>> = (0..m.rows())
                .map(|i| {
                    (0..m.cols())
                        .map(|j| format_entry(m[(i, j)].re, m[(i, j)].im, digits))
                        .collect()
                })
                .collect();
            let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
            let stdout = io::stdout();
            let mut w = stdout.lock();
            writeln!(w, "{channel}  (N={}, M={})", choi.dim_in(), choi.dim_out())?;
            for row in &cells {
                let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
                writeln!(w, "{}", line.join("  "))?;
            }
            let (tp, dev) = is_trace_preserving(&choi, cptomo::channels::TP_TOL);
            writeln!(w, "trace preserving: {tp} (deviation {dev:.3e})")?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
