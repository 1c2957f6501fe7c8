//! Command-line front end. Every command prints one JSON report (or CSV
//! with `--csv`) and is deterministic given `--seed`.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::adversary::{
    late_declarer_attack, run_check_rounds, session_detection_probability, tamper_statistics, AdversaryModel, Basis,
};
use crate::bellmeas::verify_against_printed;
use crate::error::{QError, Result};
use crate::harness::{
    cheat_empirical, compare_analytic, run_trials, sdc_trials, Statistics, TrialConfig, DEFAULT_ALPHA, GENERATOR,
};
use crate::qss::{qss_decode_table, run_qss_session, DeclarationPolicy, Party, SessionConfig};
use crate::sdc::{sdc_decode_table, write_trials_csv, SdcStatus, UserId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_STAT_FAIL: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// Number of check rounds used for the session-level detection figure.
const SESSION_CHECKS: u64 = 50;

#[derive(Debug, Parser)]
#[command(
    name = "qshare",
    version,
    about = "Simulate GHZ secret sharing and W-state dense coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one secret-sharing session with interleaved parity checks
    QssRun {
        #[command(flatten)]
        common: Common,
        /// Check rounds per message round
        #[arg(long, default_value_t = 0.2)]
        check_fraction: f64,
        #[command(flatten)]
        attack: AttackArgs,
        /// Declaration order: random, round-robin, bob-last, bob-first or fixed:a,b,c
        #[arg(long, default_value = "random")]
        policy: DeclarationPolicy,
    },
    /// Measure how often an attack is caught, against the exact value
    QssAttack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        attack: AttackArgs,
        #[arg(long, default_value = "random")]
        policy: DeclarationPolicy,
    },
    /// Three-party dense coding success rate
    SdcRun {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "bob")]
        receiver: UserId,
    },
    /// Solo-guess and cheat probabilities of the three-party dense coding
    SdcCheat {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "bob")]
        receiver: UserId,
    },
    /// Dense coding with N receiving users
    SdcN {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        users: usize,
        #[arg(long, default_value = "bob")]
        receiver: UserId,
    },
    /// Compare the computed swapping decomposition with the published expansion
    DecompVerify {
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Print a decode table
    DecodeTable {
        #[arg(long, value_enum, default_value_t = TableKind::Qss)]
        protocol: TableKind,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Run a harness trial config read from a JSON file
    Trials {
        #[arg(long)]
        config: std::path::PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
struct Common {
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report on stdout (the default)
    #[arg(long, conflicts_with = "csv")]
    #[serde(skip)]
    json: bool,
    /// CSV on stdout instead of JSON
    #[arg(long)]
    #[serde(skip)]
    csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AttackName {
    None,
    InterceptResend,
    Ancilla,
    Substitute,
    LateDeclarer,
}

#[derive(Debug, Clone, Args, Serialize)]
struct AttackArgs {
    #[arg(long, value_enum, default_value_t = AttackName::None)]
    adversary: AttackName,
    /// Party whose qubits are attacked
    #[arg(long, default_value = "bob")]
    target: Party,
    /// Measurement basis for intercept-resend
    #[arg(long, default_value = "z")]
    basis: Basis,
    /// Ry angle for the ancilla attack
    #[arg(long, default_value_t = std::f64::consts::PI)]
    coupling: f64,
    /// Basis state forwarded by the substitution attack
    #[arg(long, default_value_t = 0)]
    prepared: u8,
}

impl AttackArgs {
    fn model(&self) -> Result<AdversaryModel> {
        let m = match self.adversary {
            AttackName::None => AdversaryModel::none(),
            AttackName::InterceptResend => AdversaryModel::intercept_resend(self.target, self.basis),
            AttackName::Ancilla => AdversaryModel::ancilla(self.target, self.coupling),
            AttackName::Substitute => AdversaryModel::substitute(self.prepared),
            AttackName::LateDeclarer => AdversaryModel::late_declarer(),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TableKind {
    Qss,
    Sdc,
}

struct Output {
    body: String,
    code: i32,
}

fn envelope(command: &str, config: Value, seed: Option<u64>, result: Value) -> String {
    let report = json!({
        "command": command,
        "config": config,
        "seed": seed,
        "generator": GENERATOR,
        "version": env!("CARGO_PKG_VERSION"),
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| QError::invalid(format!("csv write failed: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| QError::invalid(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const STAT_HEADER: [&str; 9] = [
    "name",
    "count",
    "successes",
    "estimate",
    "ci95_low",
    "ci95_high",
    "ci99_low",
    "ci99_high",
    "analytic",
];

fn stat_row(name: &str, s: &Statistics) -> Vec<String> {
    vec![
        name.to_string(),
        s.count.to_string(),
        s.successes.to_string(),
        s.estimate.to_string(),
        s.ci95_low.to_string(),
        s.ci95_high.to_string(),
        s.ci99_low.to_string(),
        s.ci99_high.to_string(),
        s.analytic.map_or_else(String::new, |a| a.to_string()),
    ]
}

fn qss_run(common: &Common, check_fraction: f64, attack: &AttackArgs, policy: DeclarationPolicy) -> Result<Output> {
    let cfg = SessionConfig {
        n_message_rounds: common.trials,
        check_fraction,
        adversary: attack.model()?,
        policy,
    };
    let report = run_qss_session(&cfg, common.seed)?;
    let code = if report.aborted { EXIT_ABORTED } else { EXIT_OK };
    let body = if common.csv {
        csv_text(
            &[
                "rounds",
                "check_rounds",
                "failures",
                "decode_accuracy",
                "tamper_count",
                "aborted",
                "adversary",
                "seed",
            ],
            [vec![
                report.rounds.to_string(),
                report.check_rounds.to_string(),
                report.failures.to_string(),
                report.decode_accuracy.map_or_else(String::new, |a| a.to_string()),
                report.tamper_count.to_string(),
                report.aborted.to_string(),
                report.adversary.to_string(),
                report.seed.to_string(),
            ]],
        )?
    } else {
        envelope("qss-run", to_value(&cfg), Some(common.seed), to_value(&report))
    };
    Ok(Output { body, code })
}

fn qss_attack(common: &Common, attack: &AttackArgs, policy: DeclarationPolicy) -> Result<Output> {
    let model = attack.model()?;
    let config = json!({ "common": common, "attack": attack, "policy": policy });
    if attack.adversary == AttackName::LateDeclarer {
        let r = late_declarer_attack(&policy, common.trials, common.seed)?;
        let stats = Statistics::from_counts(r.successes, r.rounds, Some(r.analytic));
        let cmp = compare_analytic(&stats, DEFAULT_ALPHA)?;
        let code = if cmp.pass { EXIT_OK } else { EXIT_STAT_FAIL };
        let body = if common.csv {
            csv_text(&STAT_HEADER, [stat_row("late_declarer", &stats)])?
        } else {
            envelope(
                "qss-attack",
                config,
                Some(common.seed),
                json!({ "late_declarer": r, "comparison": cmp }),
            )
        };
        return Ok(Output { body, code });
    }
    let check = run_check_rounds(&model, common.trials, common.seed)?;
    let check_stats = Statistics::from_counts(check.failures, check.conclusive_rounds, Some(check.analytic));
    let cmp = compare_analytic(&check_stats, DEFAULT_ALPHA)?;
    let messages = tamper_statistics(&model, common.trials, common.seed)?;
    let message_stats =
        Statistics::from_counts(messages.mismatches, messages.rounds, Some(messages.analytic.error_rate));
    let message_cmp = compare_analytic(&message_stats, DEFAULT_ALPHA)?;
    let code = if cmp.pass && message_cmp.pass {
        EXIT_OK
    } else {
        EXIT_STAT_FAIL
    };
    let body = if common.csv {
        csv_text(
            &STAT_HEADER,
            [
                stat_row("check_failure", &check_stats),
                stat_row("message_error", &message_stats),
            ],
        )?
    } else {
        envelope(
            "qss-attack",
            config,
            Some(common.seed),
            json!({
                "check": check,
                "check_comparison": cmp,
                "messages": messages,
                "message_comparison": message_cmp,
                "session_checks": SESSION_CHECKS,
                "session_detection_analytic": session_detection_probability(check.analytic, SESSION_CHECKS),
                "session_detection_empirical": session_detection_probability(check.detection_probability, SESSION_CHECKS),
            }),
        )
    };
    Ok(Output { body, code })
}

fn sdc_success(command: &str, common: &Common, users: usize, receiver: UserId) -> Result<Output> {
    let cfg = TrialConfig {
        protocol: crate::harness::Protocol::Sdc {
            n_users: users,
            receiver,
        },
        trials: common.trials,
        seed: common.seed,
    };
    let trials = sdc_trials(users, receiver, common.trials, common.seed)?;
    if common.csv {
        let mut buf = Vec::new();
        write_trials_csv(common.seed, &trials, &mut buf)?;
        return Ok(Output {
            body: String::from_utf8(buf).expect("csv output is utf-8"),
            code: EXIT_OK,
        });
    }
    let stats = run_trials(&cfg)?;
    let cmp = compare_analytic(&stats, DEFAULT_ALPHA)?;
    let succeeded: Vec<_> = trials.iter().filter(|t| t.status == SdcStatus::Success).collect();
    let correct = succeeded.iter().filter(|t| t.decoded_op == Some(t.encoded_op)).count();
    let decode_accuracy = (!succeeded.is_empty()).then(|| correct as f64 / succeeded.len() as f64);
    let code = if cmp.pass { EXIT_OK } else { EXIT_STAT_FAIL };
    let body = envelope(
        command,
        to_value(&cfg),
        Some(common.seed),
        json!({
            "n_users": users,
            "receiver": receiver,
            "statistics": stats,
            "comparison": cmp,
            "conditional_decode_accuracy": decode_accuracy,
        }),
    );
    Ok(Output { body, code })
}

fn sdc_cheat(common: &Common, receiver: UserId) -> Result<Output> {
    let r = cheat_empirical(receiver, common.trials, common.seed)?;
    let mut comparisons = serde_json::Map::new();
    let mut all_pass = true;
    for (name, s) in r.all() {
        let cmp = compare_analytic(s, DEFAULT_ALPHA)?;
        all_pass &= cmp.pass;
        comparisons.insert(name.to_string(), to_value(&cmp));
    }
    let code = if all_pass { EXIT_OK } else { EXIT_STAT_FAIL };
    let body = if common.csv {
        csv_text(&STAT_HEADER, r.all().map(|(name, s)| stat_row(name, s)))?
    } else {
        envelope(
            "sdc-cheat",
            json!({ "common": common, "receiver": receiver }),
            Some(common.seed),
            json!({ "cheat": r, "comparisons": comparisons }),
        )
    };
    Ok(Output { body, code })
}

fn decomp_verify(csv: bool) -> Result<Output> {
    let report = verify_against_printed();
    let body = if csv {
        csv_text(
            &["op", "branch", "printed", "computed", "status"],
            report.ops.iter().flat_map(|op| {
                op.entries.iter().map(move |e| {
                    let v = to_value(e);
                    let field = |k: &str| match &v[k] {
                        Value::Null => String::new(),
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    vec![
                        op.op.to_string(),
                        field("branch"),
                        field("printed"),
                        field("computed"),
                        field("status"),
                    ]
                })
            }),
        )?
    } else {
        envelope("decomp-verify", json!({}), None, to_value(&report))
    };
    Ok(Output { body, code: EXIT_OK })
}

fn decode_table(kind: TableKind, csv: bool) -> Result<Output> {
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match kind {
        TableKind::Qss => (
            vec!["o14", "o25", "o36", "op"],
            qss_decode_table()
                .rows()
                .map(|(t, op)| vec![t.o14.to_string(), t.o25.to_string(), t.o36.to_string(), op.to_string()])
                .collect(),
        ),
        TableKind::Sdc => (
            vec!["bell_outcome", "op"],
            sdc_decode_table()
                .rows()
                .map(|(b, op)| vec![b.to_string(), op.to_string()])
                .collect(),
        ),
    };
    let body = if csv {
        csv_text(&header, rows)?
    } else {
        let table: Vec<Value> = rows
            .iter()
            .map(|r| Value::Object(header.iter().zip(r).map(|(k, v)| (k.to_string(), json!(v))).collect()))
            .collect();
        envelope(
            "decode-table",
            json!({ "protocol": kind }),
            None,
            json!({ "rows": table.len(), "table": table }),
        )
    };
    Ok(Output { body, code: EXIT_OK })
}

fn trials_from_file(path: &std::path::Path) -> Result<Output> {
    let text =
        std::fs::read_to_string(path).map_err(|e| QError::invalid(format!("cannot read {}: {e}", path.display())))?;
    let cfg = TrialConfig::from_json(&text)?;
    let stats = run_trials(&cfg)?;
    let cmp = compare_analytic(&stats, DEFAULT_ALPHA)?;
    let code = if cmp.pass { EXIT_OK } else { EXIT_STAT_FAIL };
    let body = envelope(
        "trials",
        to_value(&cfg),
        Some(cfg.seed),
        json!({ "statistics": stats, "comparison": cmp }),
    );
    Ok(Output { body, code })
}

fn dispatch(cmd: &Command) -> Result<Output> {
    match cmd {
        Command::QssRun {
            common,
            check_fraction,
            attack,
            policy,
        } => qss_run(common, *check_fraction, attack, *policy),
        Command::QssAttack { common, attack, policy } => qss_attack(common, attack, *policy),
        Command::SdcRun { common, receiver } => sdc_success("sdc-run", common, 2, *receiver),
        Command::SdcCheat { common, receiver } => sdc_cheat(common, *receiver),
        Command::SdcN {
            common,
            users,
            receiver,
        } => sdc_success("sdc-n", common, *users, *receiver),
        Command::DecompVerify { csv, .. } => decomp_verify(*csv),
        Command::DecodeTable { protocol, csv, .. } => decode_table(*protocol, *csv),
        Command::Trials { config } => trials_from_file(config),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(o) => {
            if out.write_all(o.body.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_USAGE;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
