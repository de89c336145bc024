use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use uniconv_cli::run::{EXIT_ERROR, EXIT_PARSE};
use uniconv_cli::{render, run, write_atomic, Command, Flags, Format};

/// Certify uniform convexity of images, check them on a raster, and solve
/// the constrained problems they come from.
#[derive(Debug, Parser)]
#[command(name = "uniconv", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Problem file (TOML).
    file: PathBuf,
    /// Replace the radius of a ball-type set.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Raster cells along the longer side of the image.
    #[arg(long)]
    cells: Option<usize>,
    /// Multistart seeds of the global solve.
    #[arg(long)]
    samples: Option<usize>,
    /// Feasibility tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the image modulus curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("uniconv: cannot read {}: {e}", cli.file.display());
            return ExitCode::from(EXIT_PARSE as u8);
        }
    };
    let flags = Flags { radius: cli.radius, seed: cli.seed, cells: cli.cells, samples: cli.samples, tol: cli.tol };
    let report = run(cli.command, &text, &flags);
    let rendered = render(&report, cli.format);
    let written = match &cli.out {
        Some(path) => write_atomic(path, rendered.as_bytes()),
        None => {
            print!("{rendered}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("uniconv: cannot write report: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    if let (Some(path), Some(check)) = (&cli.csv, &report.image_check) {
        let mut buf = Vec::new();
        let res = check.modulus.write_csv(&mut buf).and_then(|_| write_atomic(path, &buf));
        if let Err(e) = res {
            eprintln!("uniconv: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    for d in &report.status.diagnostics {
        eprintln!("uniconv: {d}");
    }
    ExitCode::from(report.status.exit_code as u8)
}
