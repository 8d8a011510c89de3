//! One CLI session: a polystore instance plus the output format.
//! Batch commands and the interactive shell share these entry points.

use std::path::Path;

use atoll_engines::array::parse_array_file;
use atoll_middleware::{Polystore, PolystoreConfig, QueryOutcome};

use crate::bench;
use crate::output::{render_monitor, render_outcome, Format};

pub struct Session {
    pub polystore: Polystore,
    pub format: Format,
}

impl Session {
    pub fn new(config: PolystoreConfig, format: Format) -> Result<Session, String> {
        let polystore = Polystore::new(config).map_err(|e| e.to_string())?;
        Ok(Session { polystore, format })
    }

    /// Loads a file into an engine; returns a one-line summary.
    pub fn load_file(
        &mut self,
        kind: &str,
        path: &Path,
        name: Option<&str>,
    ) -> Result<String, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let engines = &self.polystore.engines;
        match kind {
            "rel-csv" => {
                let name = name.ok_or("rel-csv load needs a table name")?;
                let n = engines
                    .relational
                    .load_csv(name, &text)
                    .map_err(|e| e.to_string())?;
                Ok(format!("{n} rows into {name}"))
            }
            "array" => {
                let mut array = parse_array_file(&text).map_err(|e| e.to_string())?;
                if let Some(name) = name {
                    array.name = name.to_string();
                }
                let cells = array.cell_count();
                let name = array.name.clone();
                engines.array.store(array).map_err(|e| e.to_string())?;
                Ok(format!("{cells} cells into {name}"))
            }
            "kv-jsonl" => {
                let name = name.ok_or("kv-jsonl load needs a store name")?;
                let n = engines
                    .kv
                    .load_jsonl(name, &text)
                    .map_err(|e| e.to_string())?;
                Ok(format!("{n} documents into {name}"))
            }
            other => Err(format!(
                "unknown load kind `{other}` (expected rel-csv, array or kv-jsonl)"
            )),
        }
    }

    /// Runs one query; `force_training` is the `--training` flag and is
    /// equivalent to a `TRAINING:` prefix in the text.
    pub fn query(&mut self, text: &str, force_training: bool) -> Result<String, String> {
        let text = if force_training && !text.trim_start().starts_with("TRAINING:") {
            format!("TRAINING: {text}")
        } else {
            text.to_string()
        };
        let outcome: QueryOutcome = self
            .polystore
            .run_query(&text)
            .map_err(|e| e.to_string())?;
        Ok(render_outcome(&outcome, self.format))
    }

    pub fn idle(&mut self, budget: Option<usize>) -> String {
        let (executed, errors) = self.polystore.run_idle(budget);
        let mut out = format!(
            "{executed} plan{} executed, {} left in queue",
            if executed == 1 { "" } else { "s" },
            self.polystore.queue_len()
        );
        for e in errors {
            out.push_str(&format!("\nbackground plan failed: {e}"));
        }
        out
    }

    pub fn monitor_dump(&self) -> String {
        self.polystore.with_monitor(|m| render_monitor(m, self.format))
    }

    pub fn bench(
        &mut self,
        suite: &str,
        sizes: Option<&str>,
        patients: usize,
        length: usize,
        paper_scale: bool,
    ) -> Result<String, String> {
        let sizes = match sizes {
            Some(s) => Some(
                s.split(',')
                    .map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad size `{x}`")))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        match suite {
            "micro" => Ok(bench::micro(
                sizes.unwrap_or_else(|| vec![1_000, 10_000, 100_000, 1_000_000]),
                self.format,
            )),
            "matmul" => Ok(bench::matmul(
                sizes.unwrap_or_else(|| vec![64, 128, 200]),
                self.format,
            )),
            "overhead" => bench::overhead(self.polystore.config().seed, self.format),
            "medical" => bench::medical(
                self.polystore.config().seed,
                patients,
                length,
                paper_scale,
                self.format,
            ),
            other => Err(format!(
                "unknown bench suite `{other}` (expected micro, matmul, overhead or medical)"
            )),
        }
    }
}
