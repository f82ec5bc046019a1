use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qexplain_cli::{
    difftest_command, eval_command, explain_command, open_service, serve, to_sql_command, CliError, CliResult,
};
use qexplain_core::service::TrainRequest;

#[derive(Parser)]
#[command(
    name = "qexplain",
    version,
    about = "Explain table queries with utterances, highlights and SQL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula on a table and print the result as JSON.
    Eval { table: PathBuf, formula: String },
    /// Print the utterance and write the highlighted table as HTML.
    Explain {
        table: PathBuf,
        formula: String,
        #[arg(long, default_value = "explanation.html")]
        out: PathBuf,
    },
    /// Translate a formula to SQL over table `T`.
    ToSql {
        formula: String,
        /// Table file supplying column types.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        paper_faithful: bool,
    },
    /// Compare the evaluator with SQLite on random cases.
    Difftest {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        paper_faithful: bool,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the reranker on the data directory and save the checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Print correctness and MRR of the saved model.
    Metrics {
        #[arg(long)]
        data: PathBuf,
    },
}

fn json<T: serde::Serialize>(v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Eval { table, formula } => json(&eval_command(&table, &formula)?),
        Command::Explain { table, formula, out } => {
            println!("{}", explain_command(&table, &formula, &out)?);
            Ok(())
        }
        Command::ToSql {
            formula,
            table,
            paper_faithful,
        } => {
            println!("{}", to_sql_command(&formula, table.as_deref(), paper_faithful)?);
            Ok(())
        }
        Command::Difftest {
            cases,
            seed,
            paper_faithful,
        } => {
            let r = difftest_command(cases, seed, paper_faithful)?;
            println!(
                "generated {} compared {} skipped {} mismatches {}",
                r.generated,
                r.compared,
                r.skipped,
                r.mismatches.len()
            );
            Ok(())
        }
        Command::Serve { port, data } => tokio::runtime::Runtime::new()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .block_on(serve(data, port)),
        Command::Train {
            data,
            epochs,
            lr,
            lambda,
        } => {
            let report = open_service(&data)?.train(&TrainRequest { epochs, lr, lambda })?;
            json(&report.objectives)
        }
        Command::Metrics { data } => {
            let s = open_service(&data)?;
            json(&s.metrics()?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
