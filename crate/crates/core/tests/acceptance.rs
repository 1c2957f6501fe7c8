//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use qshare::adversary::{
    check_fail_probability, late_declarer_analytic, late_declarer_attack, run_check_rounds,
    session_detection_probability, AdversaryModel, Basis,
};
use qshare::bellmeas::{
    bell_project, decompose_two_ghz, decomposition_tables, verify_against_printed, BellTriple, DiscrepancyStatus,
};
use qshare::canon::{BellOutcome, PauliOp};
use qshare::harness::{cheat_empirical, run_trials, sdc_trials, trial_stream, Protocol, TrialConfig};
use qshare::qss::{
    decode_qss, marginal_information, run_qss_round, run_qss_session, DeclarationPolicy, KnownOutcomes, OpChoice,
    Party, QssDecode, SessionConfig,
};
use qshare::qstate::{c, ry, Amplitude, Gate2, QubitId, StateVector, AMP_TOL, HADAMARD, NORM_TOL, S_GATE};
use qshare::sdc::{cheat_report, decode_sdc, joint_distribution, success_probability, SdcStatus, UserId};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Triples of the published identity expansion, each with magnitude 1/(2 sqrt 2).
fn printed_identity_triples() -> BTreeSet<BellTriple> {
    use BellOutcome::*;
    [
        (PhiPlus, PhiPlus, PhiPlus),
        (PhiPlus, PhiMinus, PhiMinus),
        (PhiMinus, PhiPlus, PhiMinus),
        (PhiMinus, PhiMinus, PhiPlus),
        (PsiPlus, PsiPlus, PsiPlus),
        (PsiPlus, PsiMinus, PsiMinus),
        (PsiMinus, PsiPlus, PsiMinus),
        (PsiMinus, PsiMinus, PsiPlus),
    ]
    .into_iter()
    .map(|(a, b, c)| BellTriple::new(a, b, c))
    .collect()
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let tables: Vec<_> = PauliOp::ALL.iter().map(|&op| decompose_two_ghz(op)).collect();
    let elapsed = start.elapsed();
    for t in &tables {
        ensure(
            t.branches.len() == 8,
            format!("{} has {} branches", t.op, t.branches.len()),
        )?;
        for b in &t.branches {
            ensure(
                close(b.probability(), 0.125, 1e-12),
                format!("{} branch probability {}", t.op, b.probability()),
            )?;
        }
    }
    let identity = &tables[0];
    ensure(
        identity.triples() == printed_identity_triples(),
        "identity triples differ from the printed expansion",
    )?;
    let magnitude = 1.0 / (2.0 * 2f64.sqrt());
    for b in &identity.branches {
        ensure(
            close(b.coeff.norm(), magnitude, 1e-12),
            "identity coefficient magnitude",
        )?;
    }
    let report = verify_against_printed();
    let id = report.for_op(PauliOp::I);
    ensure(id.structural == 0, "identity has structural discrepancies")?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!(
        "4 ops x 8 branches of 1/8; identity triples match; {} sign differences reported; {:.1} ms",
        id.sign_differences,
        elapsed.as_secs_f64() * 1e3
    ))
}

fn ac2() -> Outcome {
    let report = verify_against_printed();
    let x = report.for_op(PauliOp::X);
    let iy = report.for_op(PauliOp::IY);
    let id = report.for_op(PauliOp::I);
    ensure(id.structural == 0, format!("identity structural = {}", id.structural))?;
    ensure(
        x.entries.iter().any(|e| e.status == DiscrepancyStatus::MissingFactor),
        "no missing-factor entry for X",
    )?;
    ensure(
        iy.entries
            .iter()
            .filter(|e| e.status == DiscrepancyStatus::PairTypeMismatch)
            .count()
            >= 1,
        "no pair-type entry for iY",
    )?;
    for t in decomposition_tables() {
        ensure(
            close(t.total_probability(), 1.0, 1e-12),
            format!("{} probability sum", t.op),
        )?;
    }
    // the four computed expansions are mutually orthogonal images of one unit vector
    for a in decomposition_tables() {
        for b in decomposition_tables() {
            let overlap: Amplitude = a
                .branches
                .iter()
                .filter_map(|br| b.coeff_of(br.triple()).map(|cb| br.coeff.conj() * cb))
                .sum();
            let want = if a.op == b.op { 1.0 } else { 0.0 };
            ensure(
                close(overlap.norm(), want, 1e-12),
                format!("overlap {} vs {}", a.op, b.op),
            )?;
        }
    }
    Ok(format!(
        "structural: I={} X={} iY={} Z={}; computed tables complete and orthonormal",
        id.structural,
        x.structural,
        iy.structural,
        report.for_op(PauliOp::Z).structural
    ))
}

fn ac3() -> Outcome {
    for op in PauliOp::ALL {
        for k in 0..10_000u64 {
            let t = run_qss_round(OpChoice::Fixed(op), &mut trial_stream(300 + op.index() as u64, k));
            ensure(
                t.decoded_op == QssDecode::Op(op),
                format!("{op} round {k} decoded {}", t.decoded_op),
            )?;
        }
    }
    use BellOutcome::{PhiMinus, PhiPlus};
    ensure(
        decode_qss(PhiMinus, PhiMinus, PhiMinus) == QssDecode::Op(PauliOp::Z),
        "(Phi-,Phi-,Phi-)",
    )?;
    ensure(
        decode_qss(PhiMinus, PhiMinus, PhiPlus) == QssDecode::Op(PauliOp::I),
        "(Phi-,Phi-,Phi+)",
    )?;
    Ok("40000 rounds decoded exactly; worked example triples decode to Z and I".into())
}

fn ac4() -> Outcome {
    let occurring: BTreeSet<BellTriple> = decomposition_tables().iter().flat_map(|t| t.triples()).collect();
    let mut checked = 0;
    for t in &occurring {
        for user in [Party::Bob, Party::Charlie] {
            let outcome = [t.o14, t.o25, t.o36][user.pair_index()];
            let solo = marginal_information(KnownOutcomes::default().with(user, outcome));
            ensure(
                close(solo.entropy_bits(), 2.0, 1e-9),
                format!("{user} alone: {}", solo.entropy_bits()),
            )?;
            let with_alice =
                marginal_information(KnownOutcomes::default().with(Party::Alice, t.o14).with(user, outcome));
            ensure(
                close(with_alice.entropy_bits(), 1.0, 1e-9),
                format!("Alice + {user}: {}", with_alice.entropy_bits()),
            )?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} single-user views at 2 bits, each with Alice at 1 bit"
    ))
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let cfg = TrialConfig {
        protocol: Protocol::Sdc {
            n_users: 2,
            receiver: UserId::BOB,
        },
        trials: 100_000,
        seed: 5,
    };
    let s = run_trials(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut analytic = 0.0;
    for op in PauliOp::ALL {
        analytic += success_probability(2, UserId::BOB, op).map_err(|e| e.to_string())? / 4.0;
    }
    ensure(close(analytic, 2.0 / 3.0, 1e-12), format!("analytic {analytic}"))?;
    ensure(
        (s.ci99_low..=s.ci99_high).contains(&(2.0 / 3.0)),
        format!("2/3 outside [{}, {}]", s.ci99_low, s.ci99_high),
    )?;
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "estimate {:.5} in 99% [{:.5}, {:.5}]; analytic 2/3; {:.2} s",
        s.estimate,
        s.ci99_low,
        s.ci99_high,
        elapsed.as_secs_f64()
    ))
}

fn ac6() -> Outcome {
    let r = cheat_report(UserId::BOB).map_err(|e| e.to_string())?;
    let want = [2.0 / 3.0, 0.25, 1.0 / 3.0, 0.75];
    let got = [
        r.bob_solo_accuracy,
        r.charlie_solo_accuracy,
        r.charlie_cheat_success,
        r.bob_cheat_success,
    ];
    for (g, w) in got.iter().zip(want) {
        ensure(close(*g, w, 1e-12), format!("analytic {got:?}"))?;
    }
    let e = cheat_empirical(UserId::BOB, 100_000, 6).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for ((name, s), w) in e.all().into_iter().zip(want) {
        ensure(
            (s.ci99_low..=s.ci99_high).contains(&w),
            format!("{name}: {w} outside [{}, {}]", s.ci99_low, s.ci99_high),
        )?;
        parts.push(format!("{name}={:.4}", s.estimate));
    }
    Ok(format!("analytic (2/3, 1/4, 1/3, 3/4); empirical {}", parts.join(" ")))
}

fn ac7() -> Outcome {
    for n in 2..=10usize {
        for op in PauliOp::ALL {
            let p = success_probability(n, UserId::BOB, op).map_err(|e| e.to_string())?;
            ensure(close(p, 2.0 / (n as f64 + 1.0), 1e-12), format!("N={n} {op}: {p}"))?;
            for br in joint_distribution(n, UserId::BOB, op).map_err(|e| e.to_string())? {
                if br.bits.iter().all(|&b| b == 0) {
                    ensure(
                        decode_sdc(br.bell, &br.bits) == Some(op),
                        format!("N={n} {op} decodes wrong"),
                    )?;
                }
            }
        }
        let trials = sdc_trials(n, UserId::BOB, 2_000, 70 + n as u64).map_err(|e| e.to_string())?;
        for t in trials.iter().filter(|t| t.status == SdcStatus::Success) {
            ensure(
                t.decoded_op == Some(t.encoded_op),
                format!("N={n} sampled decode wrong"),
            )?;
        }
    }
    Ok("2/(N+1) for N=2..10; success branches decode exactly".into())
}

fn ac8() -> Outcome {
    let honest = run_check_rounds(&AdversaryModel::none(), 10_000, 8).map_err(|e| e.to_string())?;
    ensure(honest.failures == 0, format!("{} honest failures", honest.failures))?;
    let model = AdversaryModel::intercept_resend(Party::Bob, Basis::Z);
    let oracle = check_fail_probability(&model).map_err(|e| e.to_string())?;
    let attacked = run_check_rounds(&model, 10_000, 8).map_err(|e| e.to_string())?;
    ensure(
        (attacked.ci99[0]..=attacked.ci99[1]).contains(&oracle),
        format!("oracle {oracle} outside {:?}", attacked.ci99),
    )?;
    let session = session_detection_probability(oracle, 50);
    ensure(session > 0.99, format!("50-check detection {session}"))?;
    let mut caught = 0;
    let sessions = 200;
    for k in 0..sessions {
        let cfg = SessionConfig {
            n_message_rounds: 50,
            check_fraction: 1.0,
            adversary: model,
            policy: DeclarationPolicy::Random,
        };
        if run_qss_session(&cfg, 800 + k).map_err(|e| e.to_string())?.aborted {
            caught += 1;
        }
    }
    let rate = caught as f64 / sessions as f64;
    ensure(rate > 0.99, format!("sessions caught {caught}/{sessions}"))?;
    Ok(format!(
        "honest 0/10000; intercept-resend {:.4} vs oracle {oracle}; 50-check detection {session:.6}, sampled {caught}/{sessions}",
        attacked.detection_probability
    ))
}

fn ac9() -> Outcome {
    let last = late_declarer_attack(&DeclarationPolicy::bob_last(), 10_000, 9).map_err(|e| e.to_string())?;
    ensure(last.successes == last.rounds, format!("bob-last {}", last.empirical))?;
    ensure(close(last.analytic, 1.0, 1e-12), "bob-last analytic")?;
    let random = late_declarer_attack(&DeclarationPolicy::Random, 100_000, 9).map_err(|e| e.to_string())?;
    let analytic = late_declarer_analytic(&DeclarationPolicy::Random);
    ensure(random.empirical < 1.0, "random policy still certain")?;
    ensure(
        close(random.empirical, analytic, 0.01),
        format!("random {} vs {analytic}", random.empirical),
    )?;
    Ok(format!(
        "bob-last 1.0; random {:.4} vs analytic {analytic:.4}",
        random.empirical
    ))
}

fn state_strategy(min_qubits: usize) -> impl Strategy<Value = StateVector> {
    (min_qubits..=5usize)
        .prop_flat_map(|n| prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n))
        .prop_filter("non-zero vector", |v| {
            v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3
        })
        .prop_map(|v| StateVector::normalized(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
}

fn gate_strategy() -> impl Strategy<Value = Gate2> {
    prop_oneof![
        prop::sample::select(PauliOp::ALL.to_vec()).prop_map(|p| p.matrix()),
        Just(HADAMARD),
        Just(S_GATE),
        (0.0..std::f64::consts::TAU).prop_map(ry),
    ]
}

fn run_property<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) -> std::result::Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ac10() -> Outcome {
    run_property((state_strategy(1), gate_strategy(), 0usize..5), |(s, g, q)| {
        let q = QubitId(q % s.n_qubits() + 1);
        let out = s.apply_gate(q, &g).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < NORM_TOL);
        Ok(())
    })
    .map_err(|e| format!("norm preservation: {e}"))?;

    run_property(
        (
            state_strategy(1),
            prop::sample::select(PauliOp::ALL.to_vec()),
            0usize..5,
        ),
        |(s, op, q)| {
            let q = QubitId(q % s.n_qubits() + 1);
            let twice = s.apply_pauli(q, op).unwrap().apply_pauli(q, op).unwrap();
            // (iY)^2 = -I, the others square to I
            let sign = if op == PauliOp::IY { -1.0 } else { 1.0 };
            for (a, b) in twice.amps().iter().zip(s.amps()) {
                prop_assert!((a - b * sign).norm() < AMP_TOL);
            }
            Ok(())
        },
    )
    .map_err(|e| format!("Pauli involution: {e}"))?;

    run_property((state_strategy(2), 0usize..5, 1usize..5), |(s, i, d)| {
        let n = s.n_qubits();
        let i = i % n;
        let j = (i + 1 + d % (n - 1)) % n;
        let proj = bell_project(&s, QubitId(i + 1), QubitId(j + 1)).unwrap();
        let total: f64 = proj.iter().map(|p| p.probability).sum();
        prop_assert!((total - 1.0).abs() < NORM_TOL);
        for p in &proj {
            if let Some(r) = &p.residual {
                prop_assert!((r.norm_sqr() - 1.0).abs() < NORM_TOL);
            }
        }
        Ok(())
    })
    .map_err(|e| format!("Bell completeness: {e}"))?;

    run_property((state_strategy(1), 0usize..5), |(s, q)| {
        let q = QubitId(q % s.n_qubits() + 1);
        let total = s.probability(q, 0).unwrap() + s.probability(q, 1).unwrap();
        prop_assert!((total - 1.0).abs() < NORM_TOL);
        Ok(())
    })
    .map_err(|e| format!("measurement completeness: {e}"))?;

    Ok("4 properties x 1000 cases".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 decomposition reproduction", ac1),
        ("AC2 printed-expansion discrepancies", ac2),
        ("AC3 secret-sharing honest decoding", ac3),
        ("AC4 secret-sharing no leakage", ac4),
        ("AC5 dense-coding success rate", ac5),
        ("AC6 cheat probabilities", ac6),
        ("AC7 N-user scaling", ac7),
        ("AC8 parity-check soundness and sensitivity", ac8),
        ("AC9 declaration-order countermeasure", ac9),
        ("AC10 engine properties", ac10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
