use fpep_core::attacks::{sb_attack, symmetrized_geometry, AttackParams};
use fpep_core::eve::{simulate_eve, EveStrategy, StrategyKind};
use fpep_core::signals::{estimate_qber, run_exchange, write_records_csv, Basis, IdentityAttack};
use fpep_core::Error;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn identity_channel_has_no_errors() {
    let ex = run_exchange(&IdentityAttack, 100_000, 5).unwrap();
    assert_eq!(ex.summary.errors, 0);
    assert_eq!(ex.summary.qber, 0.0);
    let frac = ex.summary.sifted as f64 / ex.summary.n as f64;
    assert!((frac - 0.5).abs() < 0.01);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sb = sb_attack(0.15).unwrap().symmetrized_probe().unwrap();
    let one = in_pool(1, || run_exchange(&sb, 300_000, 99).unwrap());
    let four = in_pool(4, || run_exchange(&sb, 300_000, 99).unwrap());
    assert_eq!(one.records, four.records);

    let s = EveStrategy::new(StrategyKind::TwoStage, &sb).unwrap();
    let a = in_pool(1, || simulate_eve(&one, &s, 3).unwrap());
    let b = in_pool(3, || simulate_eve(&four, &s, 3).unwrap());
    assert_eq!(a, b);
}

#[test]
fn different_seeds_differ() {
    let sb = sb_attack(0.1).unwrap();
    let a = run_exchange(&sb, 10_000, 1).unwrap();
    let b = run_exchange(&sb, 10_000, 2).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn qber_estimate_matches_summary() {
    let sb = sb_attack(0.2).unwrap();
    let ex = run_exchange(&sb, 200_000, 4).unwrap();
    let (q, s) = estimate_qber(&ex.records).unwrap();
    assert_eq!((q, s), (ex.summary.qber, ex.summary.qber_stderr));
    assert!(((q - 0.2) / s).abs() < 4.0);
}

#[test]
fn qber_needs_sifted_rounds() {
    assert_eq!(estimate_qber(&[]), Err(Error::EmptySifted));
}

#[test]
fn records_csv_round_trip() {
    let ex = run_exchange(&sb_attack(0.1).unwrap(), 1000, 8).unwrap();
    let mut buf = Vec::new();
    write_records_csv(&ex.records, &mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "round",
            "alice_basis",
            "alice_bit",
            "bob_basis",
            "bob_bit",
            "sifted",
            "error"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1000);
    for (row, rec) in rows.iter().zip(&ex.records) {
        assert_eq!(row[0].parse::<u64>().unwrap(), rec.round);
        assert_eq!(&row[1], rec.alice_basis.label());
        assert_eq!(row[6].is_empty(), !rec.sifted);
    }
}

#[test]
fn symmetrized_sb_runs_through_the_pipeline() {
    let sb = sb_attack(0.1).unwrap();
    let (u, w) = sb.probe().to_unitary();
    let sym = fpep_core::attacks::symmetrize(&u, &w)
        .unwrap()
        .probe()
        .unwrap();
    let g = symmetrized_geometry(sb.probe(), Basis::V).unwrap();
    let p = g.params();
    let want = AttackParams::slutsky_brandt(0.1);
    assert!((p.e - want.e).abs() < 1e-12 && (p.delta - want.delta).abs() < 1e-12);

    let ex = run_exchange(&sym, 200_000, 21).unwrap();
    let s = EveStrategy::new(StrategyKind::CorrectBits, &sym).unwrap();
    let est = simulate_eve(&ex, &s, 22).unwrap();
    assert!(((est.stats.cp - s.predicted_cp) / est.stderr).abs() < 4.0);
}
