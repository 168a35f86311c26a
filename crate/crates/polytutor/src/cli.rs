//! The `tutor` operator command line.
//!
//! Exit status: 0 on success, 1 when validation or verification finds
//! problems, 2 for usage, I/O and syntax errors. Diagnostics go to standard
//! error; with `--format ndjson` every diagnostic and result is one JSON
//! object per line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use polytutor_core::assessment::Level;
use polytutor_core::knowledge::{check_parts, ContentPack, PackError};
use polytutor_core::learner::Modeler;
use polytutor_core::rules::{default_policy, validate_rules, Diagnostic};
use polytutor_core::translation::LanguageCode;
use polytutor_core::tutor::{Tutor, TutorConfig};
use serde::Serialize;
use serde_json::json;

use crate::auth::{HashCost, DEFAULT_TOKEN_TTL};
use crate::demo::write_demo_pack;
use crate::eventlog::{read_log, write_log, LogError};
use crate::pack::{load_pack, load_parts, LoadError};
use crate::replay::verify_log;
use crate::service::{system_clock, ServiceOptions, TutorService};
use crate::simulate::{simulate, CohortReport, CohortSpec, DEFAULT_STEP_CAP};
use crate::translation::TranslatorSettings;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PROBLEMS: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Ndjson,
}

#[derive(Debug, Parser)]
#[command(name = "tutor", version, about = "Operate a multilingual adaptive tutoring service")]
pub struct Cli {
    /// Output format for results and diagnostics.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a content pack and its rules.
    Validate { pack: PathBuf },
    /// Run a cohort of synthetic learners through a pack.
    Simulate {
        pack: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Probability of answering any question correctly, in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        ability: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the cohort report here as NDJSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every learner's event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: u64,
        /// Mastery threshold level.
        #[arg(long, default_value = "Good")]
        threshold: Level,
        /// Comma-separated learner languages; defaults to the pack language.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<LanguageCode>,
    },
    /// Rebuild every learner in an event log and check its invariants.
    Replay {
        log: PathBuf,
        /// Mastery threshold the log was written with.
        #[arg(long, default_value = "Good")]
        threshold: Level,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        pack: PathBuf,
        /// Event log; credentials are kept in `<log>.credentials`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, default_value = "Good")]
        threshold: Level,
        /// Base seed for question selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Token lifetime in seconds.
        #[arg(long, default_value_t = DEFAULT_TOKEN_TTL)]
        token_ttl: u64,
    },
    /// Write the bundled demo pack and glossary into a directory.
    Demo { dir: PathBuf },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut r = Reporter {
        format: cli.format,
        out,
        err,
    };
    match cli.command {
        Command::Validate { pack } => validate(&mut r, &pack),
        Command::Simulate {
            pack,
            count,
            ability,
            seed,
            out,
            log,
            step_cap,
            threshold,
            languages,
        } => {
            let pack = match load_for_use(&mut r, &pack) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let languages = if languages.is_empty() {
                vec![pack.default_language().clone()]
            } else {
                languages
            };
            let tutor = Tutor::new(pack, config(threshold, seed));
            let spec = CohortSpec {
                step_cap,
                ..CohortSpec::new(count, ability, seed, languages)
            };
            simulate_cmd(&mut r, &tutor, &spec, out.as_deref(), log.as_deref())
        }
        Command::Replay { log, threshold } => replay_cmd(&mut r, &log, Modeler::new(threshold)),
        Command::Serve {
            pack,
            log,
            listen,
            threshold,
            seed,
            token_ttl,
        } => {
            let pack = match load_for_use(&mut r, &pack) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let mut options = ServiceOptions::new(log);
            options.token_ttl = token_ttl;
            serve_cmd(&mut r, Tutor::new(pack, config(threshold, seed)), &options, listen)
        }
        Command::Demo { dir } => match write_demo_pack(&dir) {
            Ok(()) => {
                r.result(
                    &format!("demo pack written to {}", dir.display()),
                    json!({"written": dir}),
                );
                EXIT_OK
            }
            Err(e) => r.fail(EXIT_ERROR, "io", &format!("{}: {e}", dir.display())),
        },
    }
}

fn config(threshold: Level, seed: u64) -> TutorConfig {
    TutorConfig {
        modeler: Modeler::new(threshold),
        seed,
        ..TutorConfig::default()
    }
}

struct Reporter<'a> {
    format: Format,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Reporter<'_> {
    fn diagnostic(&mut self, kind: &str, message: &str) {
        let _ = match self.format {
            Format::Text => writeln!(self.err, "error: {message}"),
            Format::Ndjson => writeln!(
                self.err,
                "{}",
                json!({"level": "error", "kind": kind, "message": message})
            ),
        };
    }

    fn fail(&mut self, code: u8, kind: &str, message: &str) -> u8 {
        self.diagnostic(kind, message);
        code
    }

    fn result(&mut self, text: &str, value: impl Serialize) {
        let _ = match self.format {
            Format::Text => writeln!(self.out, "{text}"),
            Format::Ndjson => writeln!(self.out, "{}", serde_json::to_string(&value).expect("serializable")),
        };
    }
}

fn load_error(r: &mut Reporter<'_>, e: &LoadError) -> u8 {
    match e {
        LoadError::Io { .. } => r.fail(EXIT_ERROR, "io", &e.to_string()),
        LoadError::Syntax { .. } => r.fail(EXIT_ERROR, "syntax", &e.to_string()),
        LoadError::Invalid(errors) => {
            for pe in errors {
                r.diagnostic(pe.kind(), &pe.to_string());
            }
            EXIT_PROBLEMS
        }
    }
}

fn load_for_use(r: &mut Reporter<'_>, dir: &Path) -> Result<ContentPack, u8> {
    load_pack(dir).map_err(|e| load_error(r, &e))
}

fn validate(r: &mut Reporter<'_>, dir: &Path) -> u8 {
    let parts = match load_parts(dir) {
        Ok(p) => p,
        Err(e) => return load_error(r, &e),
    };
    let pack_errors: Vec<PackError> = check_parts(&parts);
    let (rules, custom) = match &parts.rules {
        Some(rules) => (rules.clone(), true),
        None => (default_policy(), false),
    };
    let rule_diagnostics: Vec<Diagnostic> = validate_rules(&rules);
    for e in &pack_errors {
        r.diagnostic(e.kind(), &e.to_string());
    }
    for d in &rule_diagnostics {
        let kind = serde_json::to_value(d)
            .ok()
            .and_then(|v| v.get("diagnostic").and_then(|k| k.as_str()).map(String::from))
            .unwrap_or_default();
        r.diagnostic(&kind, &d.to_string());
    }
    let problems = pack_errors.len() + rule_diagnostics.len();
    let summary = json!({
        "pack_id": parts.pack_id,
        "version": parts.version,
        "concepts": parts.concepts.len(),
        "lessons": parts.variants.len(),
        "questions": parts.questions.len(),
        "questionnaire_items": parts.questionnaire.len(),
        "rules": rules.len(),
        "custom_rules": custom,
        "problems": problems,
    });
    let text = if problems == 0 {
        format!(
            "ok: pack {} {} ({} concepts, {} lessons, {} questions, {} rules)",
            parts.pack_id,
            parts.version,
            parts.concepts.len(),
            parts.variants.len(),
            parts.questions.len(),
            rules.len()
        )
    } else {
        format!("invalid: {problems} problem(s) in {}", dir.display())
    };
    r.result(&text, summary);
    if problems == 0 {
        EXIT_OK
    } else {
        EXIT_PROBLEMS
    }
}

fn simulate_cmd(r: &mut Reporter<'_>, tutor: &Tutor, spec: &CohortSpec, out: Option<&Path>, log: Option<&Path>) -> u8 {
    let sim = match simulate(tutor, spec) {
        Ok(s) => s,
        Err(e) => return r.fail(EXIT_ERROR, "usage", &e.to_string()),
    };
    if let Some(path) = out {
        if let Err(e) = std::fs::write(path, sim.report.to_ndjson()) {
            return r.fail(EXIT_ERROR, "io", &format!("{}: {e}", path.display()));
        }
    }
    if let Some(path) = log {
        let events: Vec<_> = sim.events().cloned().collect();
        if let Err(e) = write_log(path, &events) {
            return r.fail(EXIT_ERROR, "io", &e.to_string());
        }
    }
    match r.format {
        Format::Ndjson => {
            let _ = r.out.write_all(sim.report.to_ndjson().as_bytes());
        }
        Format::Text => {
            let _ = r.out.write_all(summary_text(&sim.report).as_bytes());
        }
    }
    EXIT_OK
}

fn summary_text(report: &CohortReport) -> String {
    let s = &report.summary;
    let mut text = format!(
        "learners {}  ability {}  seed {}\nmastery rate {:.4}  mean attempts {:.3}  completed {}  step cap hit {}\n",
        s.learners, s.ability, s.seed, s.mastery_rate, s.mean_attempts, s.completed, s.step_cap_exceeded
    );
    for row in &report.rows {
        let attempts: Vec<String> = row.concepts.iter().map(|c| c.attempts.to_string()).collect();
        text.push_str(&format!(
            "  {} {} {:<3} mastered {}/{} attempts [{}] steps {}{}\n",
            row.learner.learner_id,
            row.learner.language,
            row.learner.style_bias.code(),
            row.concepts_mastered,
            row.concepts.len(),
            attempts.join(","),
            row.steps,
            row.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default(),
        ));
    }
    text
}

fn replay_cmd(r: &mut Reporter<'_>, path: &Path, modeler: Modeler) -> u8 {
    let events = match read_log(path) {
        Ok(e) => e,
        Err(e @ LogError::Io { .. }) => return r.fail(EXIT_ERROR, "io", &e.to_string()),
        Err(e @ LogError::Parse { .. }) => return r.fail(EXIT_PROBLEMS, "Malformed", &e.to_string()),
    };
    let total = events.len();
    let report = verify_log(&modeler, events);
    for v in report.violations() {
        r.diagnostic(v.name(), &v.to_string());
    }
    match r.format {
        Format::Ndjson => {
            for verdict in &report.learners {
                r.result("", verdict);
            }
        }
        Format::Text => {
            for verdict in &report.learners {
                let _ = writeln!(
                    r.out,
                    "{} events {} {}",
                    verdict.learner_id,
                    verdict.events,
                    match (&verdict.state_sha256, &verdict.violation) {
                        (Some(hash), _) => format!("sha256 {hash}"),
                        (None, Some(v)) => format!("FAILED {}", v.name()),
                        (None, None) => String::new(),
                    }
                );
            }
            let status = if report.is_clean() { "clean" } else { "violations found" };
            let _ = writeln!(r.out, "{total} events, {} learners: {status}", report.learners.len());
        }
    }
    if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_PROBLEMS
    }
}

fn serve_cmd(r: &mut Reporter<'_>, tutor: Tutor, options: &ServiceOptions, listen: SocketAddr) -> u8 {
    let settings = match TranslatorSettings::from_env() {
        Ok(s) => s,
        Err(e) => return r.fail(EXIT_ERROR, "config", &e.to_string()),
    };
    let translator = match settings.build() {
        Ok(t) => t,
        Err(e) => return r.fail(EXIT_ERROR, "config", &e.to_string()),
    };
    let options = ServiceOptions {
        hash_cost: HashCost::default(),
        ..options.clone()
    };
    let service = match TutorService::open(tutor, translator, &options, system_clock()) {
        Ok(s) => Arc::new(s),
        Err(e) => return r.fail(EXIT_ERROR, "storage", &e.to_string()),
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return r.fail(EXIT_ERROR, "runtime", &e.to_string()),
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        let addr = listener.local_addr()?;
        r.result(
            &format!(
                "listening on http://{addr} (translator: {}, learners: {})",
                settings.backend,
                service.learner_count()
            ),
            json!({"listening": addr.to_string(), "translator": settings.backend.to_string()}),
        );
        let _ = r.out.flush();
        crate::http::serve(listener, service, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => r.fail(EXIT_ERROR, "io", &e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(std::iter::once("tutor").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn demo_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write_demo_pack(dir.path()).unwrap();
        dir
    }

    #[test]
    fn validate_exit_codes() {
        let dir = demo_dir();
        let pack = dir.path().to_str().unwrap();
        let (code, out, err) = run_args(&["validate", pack]);
        assert_eq!((code, err.as_str()), (0, ""), "{out}");
        assert!(out.starts_with("ok: pack demo 1.0.0"));

        let questions = dir.path().join("questions/logic-gates.toml");
        let text = std::fs::read_to_string(&questions).unwrap();
        std::fs::write(
            &questions,
            text.replacen("section = \"truth-tables\"", "section = \"nowhere\"", 1),
        )
        .unwrap();
        let (code, _, err) = run_args(&["--format", "ndjson", "validate", pack]);
        assert_eq!(code, 1, "{err}");
        let first: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "DanglingReference");

        std::fs::write(dir.path().join("pack.toml"), "pack_id = [").unwrap();
        assert_eq!(run_args(&["validate", pack]).0, 2);
        assert_eq!(run_args(&["validate", "/nonexistent/pack"]).0, 2);
    }

    #[test]
    fn simulate_then_replay() {
        let dir = demo_dir();
        let pack = dir.path().to_str().unwrap();
        let log = dir.path().join("events.ndjson");
        let report = dir.path().join("report.ndjson");
        let (code, out, err) = run_args(&[
            "simulate",
            pack,
            "--count",
            "4",
            "--ability",
            "1.0",
            "--seed",
            "9",
            "--languages",
            "en,fa",
            "--out",
            report.to_str().unwrap(),
            "--log",
            log.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("mastery rate 1.0000"), "{out}");
        let lines = std::fs::read_to_string(&report).unwrap();
        assert_eq!(lines.lines().count(), 5);

        let (code, out, _) = run_args(&["replay", log.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("4 learners: clean"), "{out}");

        let text = std::fs::read_to_string(&log).unwrap();
        let kept: Vec<&str> = text
            .lines()
            .enumerate()
            .filter(|(i, _)| *i != 3)
            .map(|(_, l)| l)
            .collect();
        std::fs::write(&log, kept.join("\n")).unwrap();
        let (code, _, err) = run_args(&["--format", "ndjson", "replay", log.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("\"kind\":\"SequenceGap\""), "{err}");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["simulate"]).0, 2);
        assert_eq!(run_args(&["bogus"]).0, 2);
        assert_eq!(run_args(&["replay", "/nonexistent.ndjson"]).0, 2);
        let dir = demo_dir();
        let (code, _, err) = run_args(&["simulate", dir.path().to_str().unwrap(), "--count", "0"]);
        assert_eq!(code, 2, "{err}");
    }
}
