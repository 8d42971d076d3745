use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbc_morph::classify::CellClass;
use rbc_morph::metrics::{ConfusionMatrix3, MetricSuite};
use rbc_morph::pipeline::{run_batch, BatchOptions};

#[derive(Parser)]
#[command(
    name = "rbcmorph",
    version,
    about = "Count and classify red blood cells in smear images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment, count and classify every PNG/PGM image of a directory.
    Analyze {
        input_dir: PathBuf,
        /// Configuration file of `section.key = value` lines.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Expert labels: a directory of `<image>.csv` files or one CSV with an image column.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
        /// Also write energy traces, cluster traces and binary masks.
        #[arg(long)]
        debug: bool,
    },
    /// Scores a standalone 3-class confusion matrix.
    Metrics {
        matrix: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

fn print_suite(s: &MetricSuite) {
    println!(
        "{:<10} {:>11} {:>11} {:>11} {:>11}",
        "class", "sensitivity", "precision", "specificity", "f-measure"
    );
    for c in CellClass::ALL {
        let m = s.class(c);
        println!(
            "{:<10} {:>11} {:>11} {:>11} {:>11}",
            c.name(),
            fmt(m.sensitivity),
            fmt(m.precision),
            fmt(m.specificity),
            fmt(m.f_measure)
        );
    }
    println!("sds-score  {}", fmt(s.sds));
    println!("cba        {}", fmt(s.cba));
    println!("mcc        {}", fmt(s.mcc));
    let t = s.two_class.n;
    println!(
        "two-class  [[{}, {}], [{}, {}]] accuracy {}",
        t[0][0],
        t[0][1],
        t[1][0],
        t[1][1],
        fmt(s.two_class_accuracy)
    );
}

fn run(cli: Cli) -> Result<i32, rbc_morph::Error> {
    match cli.command {
        Command::Analyze {
            input_dir,
            config,
            truth,
            out,
            jobs,
            debug,
        } => {
            let summary = run_batch(&BatchOptions {
                input_dir,
                config,
                truth,
                out_dir: out,
                jobs,
                debug,
            })?;
            for f in &summary.failures {
                eprintln!("failed: {}: {}", f.image, f.error);
            }
            if let Some(e) = &summary.evaluation {
                println!("performance index {}", fmt(e.performance_index));
                print_suite(&e.metrics);
            }
            println!(
                "{} images processed, {} failed; report at {}",
                summary.processed,
                summary.failures.len(),
                summary.aggregate_path.display()
            );
            Ok(summary.exit_code())
        }
        Command::Metrics { matrix, json } => {
            let file =
                std::fs::File::open(&matrix).map_err(|e| rbc_morph::Error::io(&matrix, e))?;
            let suite = MetricSuite::compute(&ConfusionMatrix3::read_csv(file)?);
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&suite).expect("metrics serialise")
                );
            } else {
                print_suite(&suite);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
