use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::Value;

use lucin::knowledge::Registry;
use lucin::program;
use lucin::service::transcript::{self, Exchange};
use lucin::service::{Engine, HintDetail, StartParams};

#[derive(Parser)]
#[command(name = "lucin", version, about = "Step-by-step mathematics engine")]
struct Cli {
    /// Directory of `.thy-li` theory files; the built-in theories if omitted.
    #[arg(long, global = true)]
    theory_path: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP protocol.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Serve the protocol over stdin/stdout, one JSON object per line.
    Stdio,
    /// Work on a problem interactively.
    Repl {
        /// Problem key, parts separated by dots, e.g. `diophantine.gcd`.
        problem: String,
        /// Model items as `name=formula`.
        #[arg(long = "model", value_parser = parse_kv)]
        model: Vec<(String, String)>,
        #[arg(long, value_enum, default_value = "full")]
        hint_detail: Detail,
    },
    /// Replay a transcript and compare responses.
    Run {
        transcript: PathBuf,
        /// Rewrite the transcript with the actual responses.
        #[arg(long)]
        record: bool,
    },
    /// Load and validate a theory directory.
    Check { dir: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Detail {
    Full,
    TacticOnly,
    FormulaOnly,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=formula, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn registry(path: &Option<PathBuf>) -> Result<Registry, String> {
    match path {
        Some(dir) => Registry::load_dir(dir).map_err(|e| e.to_string()),
        None => Ok(Registry::builtin()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Check { dir } => {
            let reg = Registry::load_dir(&dir).map_err(|e| e.to_string())?;
            println!(
                "ok: {} theories, {} problems, {} methods",
                reg.theory_names().count(),
                reg.problems().count(),
                reg.methods().count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port } => {
            let engine = Arc::new(Engine::new(registry(&cli.theory_path)?));
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            eprintln!("listening on 127.0.0.1:{port}");
            rt.block_on(lucin::service::http::serve(engine, port)).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stdio => {
            let engine = Engine::new(registry(&cli.theory_path)?);
            lucin::service::stdio::run(&engine, io::stdin().lock(), io::stdout().lock()).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { transcript: path, record } => {
            let engine = Engine::new(registry(&cli.theory_path)?);
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let exchanges: Vec<Exchange> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if record {
                let requests = exchanges.into_iter().map(|x| x.request).collect();
                let recorded = transcript::record(&engine, requests);
                let out = serde_json::to_string_pretty(&recorded).expect("transcripts serialize");
                std::fs::write(&path, out + "\n").map_err(|e| e.to_string())?;
                println!("recorded {} exchanges", recorded.len());
                return Ok(ExitCode::SUCCESS);
            }
            let actual = transcript::replay(&engine, &exchanges);
            let mismatches = transcript::compare(&exchanges, &actual);
            for m in &mismatches {
                println!("exchange {}:\n  expected {}\n  actual   {}", m.index, m.expected, m.actual);
            }
            println!("{} exchanges, {} mismatches", exchanges.len(), mismatches.len());
            Ok(if mismatches.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Repl { problem, model, hint_detail } => {
            let engine = Engine::new(registry(&cli.theory_path)?);
            let params = StartParams {
                problem: problem.split('.').map(str::to_string).collect(),
                method: None,
                model: model.into_iter().collect::<BTreeMap<_, _>>(),
                hint_detail: Some(match hint_detail {
                    Detail::Full => HintDetail::Full,
                    Detail::TacticOnly => HintDetail::TacticOnly,
                    Detail::FormulaOnly => HintDetail::FormulaOnly,
                }),
            };
            let state = engine.start_session(&params).map_err(|e| e.to_string())?;
            repl(&engine, &state.session).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

const REPL_HELP: &str = "\
  <formula>      enter the next formula
  <tactic> ...   apply a tactic, e.g. Calculate ''MOD''
  ?              ask for a hint
  auto           finish the calculation
  undo           take back the last step
  show           print the calculation
  quit           leave";

fn print_value(v: &Value) {
    match v {
        Value::Object(m) if m.contains_key("steps") => {
            for s in v["steps"].as_array().into_iter().flatten() {
                if s["hidden"] == Value::Bool(true) {
                    continue;
                }
                let indent = "  ".repeat(s["level"].as_array().map_or(0, Vec::len) + 1);
                println!("{indent}{}  [{}]", s["formula"].as_str().unwrap_or("..."), s["tactic"].as_str().unwrap_or(""));
            }
            match v["result"].as_str() {
                Some(r) if v["finished"] == Value::Bool(true) => println!("finished: {r}"),
                _ => println!("current: {}", v["formula"].as_str().unwrap_or("-")),
            }
        }
        other => println!("{}", serde_json::to_string_pretty(other).unwrap_or_default()),
    }
}

fn repl(engine: &Engine, id: &str) -> io::Result<()> {
    println!("{REPL_HELP}");
    print_value(&serde_json::to_value(engine.state(id).expect("fresh session")).unwrap_or_default());
    let stdin = io::stdin();
    loop {
        print!("> ");
        io::stdout().flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            return Ok(());
        }
        let line = line.trim();
        let first = line.split_whitespace().next().unwrap_or("");
        let result = match line {
            "" => continue,
            "quit" | "exit" => return Ok(()),
            "?" => engine.hint(id).map(|h| serde_json::to_value(h).unwrap_or_default()),
            "auto" => engine.auto_complete(id, None).map(|s| serde_json::to_value(s).unwrap_or_default()),
            "undo" => engine.undo(id).map(|s| serde_json::to_value(s).unwrap_or_default()),
            "show" => engine.state(id).map(|s| serde_json::to_value(s).unwrap_or_default()),
            _ if program::TACTIC_NAMES.contains(&first) => {
                engine.input_tactic(id, line).map(|o| serde_json::to_value(o).unwrap_or_default())
            }
            _ => engine.input_term(id, line).map(|o| serde_json::to_value(o).unwrap_or_default()),
        };
        match result {
            Ok(v) if v.get("state").is_some() => print_value(&v["state"]),
            Ok(v) => print_value(&v),
            Err(e) => println!("error: {e}"),
        }
    }
}
