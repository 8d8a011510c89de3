//! Line-oriented interactive shell. Same operations as the batch
//! commands, sharing one polystore instance so loaded data persists
//! across queries within the session.

use std::io::{BufRead, Write};

use crate::output::Format;
use crate::session::Session;

const HELP: &str = "\
commands:
  load rel-csv PATH NAME     load a CSV file into a relational table
  load array PATH [NAME]     load an array file (header names the array)
  load kv-jsonl PATH STORE   load a JSON-lines file into a document store
  query TEXT                 run a polystore query (TRAINING: prefix trains)
  training TEXT              run a query in the training phase
  idle [N]                   drain up to N queued background plans (all if omitted)
  monitor                    dump the monitor store grouped by signature
  objects                    list objects per engine
  islands                    list registered islands
  bench SUITE [ARGS]         micro | matmul | overhead | medical
  format table|csv|json      switch output format
  help                       this text
  quit                       leave the shell";

pub fn run(session: &mut Session) {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    loop {
        print!("atoll> ");
        let _ = out.flush();
        let mut line = String::new();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => break, // EOF
            Ok(_) => (),
            Err(e) => {
                eprintln!("error: {e}");
                break;
            }
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match dispatch(session, line) {
            Ok(Reply::Text(text)) => {
                if !text.is_empty() {
                    println!("{text}");
                }
            }
            Ok(Reply::Quit) => break,
            Err(e) => eprintln!("error: {e}"),
        }
    }
}

enum Reply {
    Text(String),
    Quit,
}

fn dispatch(session: &mut Session, line: &str) -> Result<Reply, String> {
    let (command, rest) = match line.split_once(char::is_whitespace) {
        Some((c, r)) => (c, r.trim()),
        None => (line, ""),
    };
    let reply = match command {
        "quit" | "exit" => return Ok(Reply::Quit),
        "help" => HELP.to_string(),
        "load" => {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                [kind, path] => session.load_file(kind, std::path::Path::new(path), None)?,
                [kind, path, name] => {
                    session.load_file(kind, std::path::Path::new(path), Some(name))?
                }
                _ => return Err("usage: load KIND PATH [NAME]".to_string()),
            }
        }
        "query" => {
            if rest.is_empty() {
                return Err("usage: query TEXT".to_string());
            }
            session.query(rest, false)?
        }
        "training" => {
            if rest.is_empty() {
                return Err("usage: training TEXT".to_string());
            }
            session.query(rest, true)?
        }
        "idle" => {
            let budget = if rest.is_empty() {
                None
            } else {
                Some(rest.parse::<usize>().map_err(|_| "idle takes a number")?)
            };
            session.idle(budget)
        }
        "monitor" => session.monitor_dump(),
        "objects" => {
            let engines = &session.polystore.engines;
            format!(
                "relational: {}\narray:      {}\nkeyvalue:   {}",
                engines.relational.table_names().join(", "),
                engines.array.array_names().join(", "),
                engines.kv.store_names().join(", ")
            )
        }
        "islands" => {
            let rows: Vec<Vec<String>> = session
                .polystore
                .registry()
                .islands()
                .iter()
                .map(|i| {
                    vec![
                        i.name.to_string(),
                        i.engines
                            .iter()
                            .map(|e| e.name().to_string())
                            .collect::<Vec<_>>()
                            .join(","),
                        if i.degenerate { "degenerate" } else { "" }.to_string(),
                    ]
                })
                .collect();
            crate::output::text_table(&["island", "engines", ""], &rows)
        }
        "bench" => {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let suite = parts.first().ok_or("usage: bench SUITE")?;
            session.bench(suite, None, 64, 1024, false)?
        }
        "format" => match rest {
            "table" => {
                session.format = Format::Table;
                "format: table".to_string()
            }
            "csv" => {
                session.format = Format::Csv;
                "format: csv".to_string()
            }
            "json" => {
                session.format = Format::Json;
                "format: json".to_string()
            }
            _ => return Err("usage: format table|csv|json".to_string()),
        },
        other => return Err(format!("unknown command `{other}` (try `help`)")),
    };
    Ok(Reply::Text(reply))
}
