use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use medkit_cli::{execute, with_jobs, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = with_jobs(cli.global.jobs, || execute(&cli)).and_then(|r| r);
    match result {
        Ok(report) => {
            print!("{}", report.render());
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} case(s) failed; see report.json", report.failures.len());
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let doc = json!({"error": chain.first(), "causes": &chain[1..]});
            let text = serde_json::to_string_pretty(&doc).unwrap_or_else(|_| format!("{e:#}"));
            eprintln!("{text}");
            if std::fs::create_dir_all(&cli.global.out_dir).is_ok() {
                let _ = std::fs::write(cli.global.out_dir.join("error.json"), text + "\n");
            }
            ExitCode::FAILURE
        }
    }
}
