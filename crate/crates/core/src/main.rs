use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use reactive_ltl::export::{export, Format};
use reactive_ltl::ltl::{eval_lasso, parse_symbols, parse_unchecked, translate, LassoWord};
use reactive_ltl::par::{self, Exec};
use reactive_ltl::scenario::Scenario;
use reactive_ltl::sim::{offline, run, RunStatus};

const USAGE: u8 = 64;
const DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "reactive-ltl", version, about = "LTL reactive planning and scenario simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one or more scenarios (fixture names or paths).
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the planner sample count.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "csv,events,plot,gait")]
        formats: Vec<Format>,
    },
    /// Offline phase only: print the plan and its subtasks.
    Plan {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Evaluate a formula on the lasso word prefix·cycle^ω, e.g.
    /// `check "[]<> a" "{}" "{a};{}"`.
    Check {
        formula: String,
        prefix: String,
        cycle: String,
    },
    /// Parse and validate a scenario.
    Validate { scenario: String },
}

fn load(name: &str, seed: Option<u64>, samples: Option<usize>) -> Result<Scenario, ExitCode> {
    let mut sc = Scenario::load(name).map_err(|e| {
        eprintln!("{name}: {e}");
        ExitCode::from(DATA)
    })?;
    if let Some(s) = seed {
        sc = sc.with_seed(s);
    }
    if let Some(n) = samples {
        sc.planner.n_samples = n.max(1);
    }
    Ok(sc)
}

fn run_cmd(names: &[String], seed: Option<u64>, out: PathBuf, samples: Option<usize>, formats: &[Format]) -> ExitCode {
    let mut scenarios = Vec::new();
    for n in names {
        match load(n, seed, samples) {
            Ok(sc) => scenarios.push(sc),
            Err(code) => return code,
        }
    }
    let traces = par::map(Exec::available(), &scenarios, run);
    let mut worst = 0u8;
    for (sc, tr) in scenarios.iter().zip(&traces) {
        let dir = if scenarios.len() == 1 { out.clone() } else { out.join(&sc.name) };
        if let Err(e) = export(sc, tr, &dir, formats) {
            eprintln!("{}: cannot write {}: {e}", sc.name, dir.display());
            return ExitCode::from(DATA);
        }
        println!(
            "{}: {:?} after {} ticks, {} events -> {}",
            sc.name,
            tr.status,
            tr.ticks.len(),
            tr.events.len(),
            dir.display()
        );
        if tr.status == RunStatus::NoPlanFound {
            eprintln!("{}: no plan found with {} samples", sc.name, sc.planner.n_samples);
        }
        worst = worst.max(tr.status.exit_code() as u8);
    }
    ExitCode::from(worst)
}

fn plan_cmd(name: &str, seed: Option<u64>, samples: Option<usize>) -> ExitCode {
    let sc = match load(name, seed, samples) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    match offline(&sc) {
        Ok(off) => {
            print!("{}", off.plan.to_text());
            print!("{}", off.decomposition.to_text());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            ExitCode::from(RunStatus::NoPlanFound.exit_code() as u8)
        }
    }
}

fn check_cmd(formula: &str, prefix: &str, cycle: &str) -> ExitCode {
    let f = match parse_unchecked(formula) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("formula: {e}");
            return ExitCode::from(DATA);
        }
    };
    let word = parse_symbols(prefix)
        .and_then(|p| parse_symbols(cycle).map(|c| (p, c)))
        .and_then(|(p, c)| LassoWord::new(p, c));
    let word = match word {
        Ok(w) => w,
        Err(e) => {
            eprintln!("word: {e}");
            return ExitCode::from(DATA);
        }
    };
    let by_automaton = translate(&f).accepts_lasso(&word);
    let by_semantics = eval_lasso(&f, &word);
    if by_automaton == by_semantics {
        println!("{}", if by_automaton { "accepted" } else { "rejected" });
        ExitCode::SUCCESS
    } else {
        println!("automaton {by_automaton}, semantics {by_semantics}: disagreement");
        ExitCode::from(1)
    }
}

fn validate_cmd(name: &str) -> ExitCode {
    match load(name, None, None) {
        Ok(sc) => {
            println!(
                "{}: ok ({} objects, {} regions, {} obstacles, {} ticks)",
                sc.name,
                sc.objects.len(),
                sc.workspace.regions().len(),
                sc.workspace.obstacles().len(),
                sc.sim.ticks()
            );
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    match cli.cmd {
        Cmd::Run { scenarios, seed, out, samples, formats } => run_cmd(&scenarios, seed, out, samples, &formats),
        Cmd::Plan { scenario, seed, samples } => plan_cmd(&scenario, seed, samples),
        Cmd::Check { formula, prefix, cycle } => check_cmd(&formula, &prefix, &cycle),
        Cmd::Validate { scenario } => validate_cmd(&scenario),
    }
}
