//! Seeded Monte Carlo runs with Wilson intervals and z-tests against analytic values.
//!
//! Trial `k` of a run seeded with `s` draws from ChaCha20 keyed by `s` on
//! stream `k`, so aggregates do not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adversary::{
    check_fail_probability, check_round, late_declarer_analytic, message_round_rates, AdversaryModel, Verdict,
};
use crate::canon::PauliOp;
use crate::error::{QError, Result};
use crate::qss::{marginal_information, run_qss_round_with, DeclarationPolicy, KnownOutcomes, OpChoice, Party};
use crate::sdc::{
    cheat_report, run_sdc_n_party, success_probability, CheatReport, SdcStatus, SdcTrial, SoloGuesser, UserId,
};

/// Recorded in every report next to the seed.
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.3): key = seed_from_u64(seed), stream = trial index";

pub const Z95: f64 = 1.959963984540054;
pub const Z99: f64 = 2.5758293035489;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Independent random stream for trial `index` of a run seeded with `seed`.
pub fn trial_stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Wilson score interval, widened if needed so it always contains the point estimate.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    (
        (centre - half).clamp(0.0, 1.0).min(p),
        (centre + half).clamp(0.0, 1.0).max(p),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub count: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub ci99_low: f64,
    pub ci99_high: f64,
    pub analytic: Option<f64>,
    pub generator: String,
}

impl Statistics {
    pub fn from_counts(successes: u64, count: u64, analytic: Option<f64>) -> Self {
        let (ci95_low, ci95_high) = wilson_interval(successes, count, Z95);
        let (ci99_low, ci99_high) = wilson_interval(successes, count, Z99);
        Self {
            count,
            successes,
            estimate: if count == 0 {
                0.0
            } else {
                successes as f64 / count as f64
            },
            ci95_low,
            ci95_high,
            ci99_low,
            ci99_high,
            analytic,
            generator: GENERATOR.to_string(),
        }
    }

    /// Same trials, counting failures as successes.
    pub fn complement(&self) -> Self {
        Self::from_counts(self.count - self.successes, self.count, self.analytic.map(|a| 1.0 - a))
    }
}

/// What a run measures. Ops are uniform over the four Paulis unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    /// Message rounds decoded correctly, possibly under an attack.
    Qss {
        #[serde(default = "AdversaryModel::none")]
        model: AdversaryModel,
    },
    /// Successful dense-coding rounds.
    Sdc {
        #[serde(default = "default_users")]
        n_users: usize,
        #[serde(default = "default_receiver")]
        receiver: UserId,
    },
    /// One user guessing the op alone.
    SdcSolo {
        #[serde(default = "default_users")]
        n_users: usize,
        #[serde(default = "default_receiver")]
        receiver: UserId,
        guesser: UserId,
    },
    /// Conclusive check rounds that fail the parity test.
    Check { model: AdversaryModel },
    /// Rounds where Bob guesses the op by his turn to declare.
    LateDeclarer {
        #[serde(default)]
        policy: DeclarationPolicy,
    },
}

fn default_users() -> usize {
    2
}

fn default_receiver() -> UserId {
    UserId::BOB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    #[serde(flatten)]
    pub protocol: Protocol,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl TrialConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QError::invalid(format!("bad trial config: {e}")))
    }
}

fn random_op<R: Rng + ?Sized>(rng: &mut R) -> PauliOp {
    PauliOp::ALL[rng.gen_range(0..4)]
}

/// Dense-coding trial `index` of a run: the op is drawn first from the trial's own stream.
pub fn sample_sdc_trial(n_users: usize, receiver: UserId, seed: u64, index: u64) -> Result<SdcTrial> {
    let mut rng = trial_stream(seed, index);
    let op = random_op(&mut rng);
    run_sdc_n_party(n_users, receiver, op, &mut rng)
}

pub fn sdc_trials(n_users: usize, receiver: UserId, trials: u64, seed: u64) -> Result<Vec<SdcTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|k| sample_sdc_trial(n_users, receiver, seed, k))
        .collect()
}

fn count_parallel(trials: u64, f: impl Fn(u64) -> Result<bool> + Sync) -> Result<u64> {
    (0..trials)
        .into_par_iter()
        .map(|k| f(k).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

pub fn run_trials(cfg: &TrialConfig) -> Result<Statistics> {
    if cfg.trials == 0 {
        return Err(QError::invalid("trials must be at least 1"));
    }
    let seed = cfg.seed;
    let (successes, analytic) = match &cfg.protocol {
        Protocol::Qss { model } => {
            model.validate()?;
            let policy = DeclarationPolicy::Random;
            let hits = count_parallel(cfg.trials, |k| {
                let t = run_qss_round_with(OpChoice::Random, model, &policy, k, &mut trial_stream(seed, k))?;
                Ok(t.decoded_correctly())
            })?;
            (hits, 1.0 - message_round_rates(model)?.error_rate)
        }
        Protocol::Sdc { n_users, receiver } => {
            let hits = count_parallel(cfg.trials, |k| {
                Ok(sample_sdc_trial(*n_users, *receiver, seed, k)?.status == SdcStatus::Success)
            })?;
            let mut p = 0.0;
            for op in PauliOp::ALL {
                p += success_probability(*n_users, *receiver, op)? / 4.0;
            }
            (hits, p)
        }
        Protocol::SdcSolo {
            n_users,
            receiver,
            guesser,
        } => {
            let solo = SoloGuesser::new(*n_users, *receiver, *guesser)?;
            if guesser.0 == 0 || guesser.0 > *n_users {
                return Err(QError::invalid(format!(
                    "guesser {guesser} is not one of {n_users} users"
                )));
            }
            let hits = count_parallel(cfg.trials, |k| {
                let t = sample_sdc_trial(*n_users, *receiver, seed, k)?;
                Ok(solo.guess(&t) == t.encoded_op)
            })?;
            (hits, solo.accuracy(*n_users, *receiver)?)
        }
        Protocol::Check { model } => {
            model.validate()?;
            let hits = count_parallel(cfg.trials, |k| {
                Ok(check_round(model, &mut trial_stream(seed, k))?.verdict == Verdict::Fail)
            })?;
            (hits, check_fail_probability(model)?)
        }
        Protocol::LateDeclarer { policy } => {
            policy.validate()?;
            let model = AdversaryModel::late_declarer();
            let hits = count_parallel(cfg.trials, |k| {
                let t = run_qss_round_with(OpChoice::Random, &model, policy, k, &mut trial_stream(seed, k))?;
                let mut known = KnownOutcomes::default().with(Party::Bob, t.outcome_of(Party::Bob));
                for &p in t.declaration_order.iter().take_while(|&&p| p != Party::Bob) {
                    known = known.with(p, t.outcome_of(p));
                }
                Ok(marginal_information(known).guess() == t.encoded_op)
            })?;
            (hits, late_declarer_analytic(policy))
        }
    };
    Ok(Statistics::from_counts(successes, cfg.trials, Some(analytic)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub pass: bool,
    pub z_score: f64,
    pub alpha: f64,
}

/// Two-sided binomial z-test of the estimate against the analytic value.
/// When the analytic value is 0 or 1 the test passes only on an exact match.
pub fn compare_analytic(s: &Statistics, alpha: f64) -> Result<Comparison> {
    let p = s
        .analytic
        .ok_or_else(|| QError::invalid("statistics carry no analytic value"))?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QError::invalid(format!("significance {alpha} is outside (0, 1)")));
    }
    if s.count == 0 {
        return Err(QError::invalid("no trials to compare"));
    }
    let variance = p * (1.0 - p) / s.count as f64;
    let diff = s.estimate - p;
    if variance <= 0.0 {
        let exact = diff.abs() < 1e-12;
        let z_score = if exact { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok(Comparison {
            pass: exact,
            z_score,
            alpha,
        });
    }
    let z_score = diff / variance.sqrt();
    let critical = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0);
    Ok(Comparison {
        pass: z_score.abs() <= critical,
        z_score,
        alpha,
    })
}

/// Monte Carlo arm of the three-party cheat analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheatEmpirical {
    pub analytic: CheatReport,
    pub bob_solo: Statistics,
    pub charlie_solo: Statistics,
    pub charlie_cheat: Statistics,
    pub bob_cheat: Statistics,
}

impl CheatEmpirical {
    pub fn all(&self) -> [(&'static str, &Statistics); 4] {
        [
            ("bob_solo", &self.bob_solo),
            ("charlie_solo", &self.charlie_solo),
            ("charlie_cheat", &self.charlie_cheat),
            ("bob_cheat", &self.bob_cheat),
        ]
    }
}

/// A cheater who lies about his result leaves the honest partner to guess
/// alone, so each cheat succeeds exactly when the partner's solo guess fails.
pub fn cheat_empirical(receiver: UserId, trials: u64, seed: u64) -> Result<CheatEmpirical> {
    let analytic = cheat_report(receiver)?;
    let solo = |guesser| {
        run_trials(&TrialConfig {
            protocol: Protocol::SdcSolo {
                n_users: 2,
                receiver,
                guesser,
            },
            trials,
            seed,
        })
    };
    let bob_solo = solo(UserId::BOB)?;
    let charlie_solo = solo(UserId::CHARLIE)?;
    Ok(CheatEmpirical {
        analytic,
        charlie_cheat: bob_solo.complement(),
        bob_cheat: charlie_solo.complement(),
        bob_solo,
        charlie_solo,
    })
}
