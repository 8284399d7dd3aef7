use std::io::Write;

use fpep_core::attacks::{
    angles_for_params, attack_from_angles, sb_attack, solve_optimal_angles, table_gram,
    verify_random_symmetrization, AngleAttack, AttackDescription, AttackKind, AttackParams,
    EntanglingProbe,
};
use fpep_core::bounds::{
    gains, monotonicize, optimize_delta, tau_from_cp, tau_lutkenhaus, tau_of_params,
    verify_bound_random, write_curves_csv, CurveKind, EGrid, SecurityCurve, DEFAULT_RESOLUTION,
};
use fpep_core::eve::{
    conditional_fidelities, leakage_assisted_cp, simulate_eve, EveStrategy, StrategyKind,
};
use fpep_core::signals::{run_exchange, write_records_csv};
use fpep_core::{Basis, Error, ProbeGeometry};
use serde_json::{json, Value};

use crate::output::{provenance, sink, write_json, CmdResult, Failure};
use crate::svg;
use crate::{
    AttackArgs, AttackType, CurvesArgs, Format, MonteCarloArgs, SimulatedAttack, VerifyArgs,
};

/// Ratio that is `null` in JSON when the denominator vanishes.
fn z_score(value: f64, expected: f64, stderr: f64) -> Value {
    if stderr > 0.0 {
        json!((value - expected) / stderr)
    } else if (value - expected).abs() < 1e-12 {
        json!(0.0)
    } else {
        Value::Null
    }
}

pub fn curves(args: &CurvesArgs) -> CmdResult {
    let grid = args.grid;
    let raw = CurveKind::ALL
        .iter()
        .map(|&k| SecurityCurve::sample(k, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let header = provenance("curves", args.common.seed, Some(&grid.to_string()));
    let out_path = args.common.out.as_deref();
    match args.format {
        Format::Csv => {
            let mut all = raw.clone();
            all.extend(raw.iter().map(monotonicize));
            let mut out = sink(out_path)?;
            writeln!(out, "# {header}")?;
            write_curves_csv(&all, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Format::Json => {
            let mut all = raw.clone();
            all.extend(raw.iter().map(monotonicize));
            write_json(
                &json!({
                    "version": fpep_core::VERSION,
                    "seed": args.common.seed,
                    "grid": grid.to_string(),
                    "curves": all,
                }),
                out_path,
            )
        }
        Format::Svg => {
            let find = |k: CurveKind| raw.iter().find(|c| c.kind == k).expect("all kinds sampled");
            let text = svg::render(
                &[
                    (
                        find(CurveKind::SbWithEc),
                        "#c0392b",
                        "CNOT attack with error correction",
                    ),
                    (
                        find(CurveKind::Lutkenhaus),
                        "#2c3e50",
                        "upper bound log2(1+4e-4e^2)",
                    ),
                ],
                &header,
            );
            let mut out = sink(out_path)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Optimal attack from the root finder, or from the closed form if the
/// finder does not converge.
fn optimal_attack(e: f64) -> Result<AngleAttack, Failure> {
    let angles = match solve_optimal_angles(e) {
        Ok(report) => report.angles,
        Err(Error::NoConvergence { .. }) => angles_for_params(AttackParams::optimal(e))?,
        Err(other) => return Err(other.into()),
    };
    Ok(attack_from_angles(angles)?)
}

fn param_attack(e: f64, delta: Option<f64>) -> Result<AngleAttack, Failure> {
    let delta =
        delta.ok_or_else(|| Failure::Usage("--delta is required for param attacks".into()))?;
    let p = AttackParams::new(e, delta);
    p.check()?;
    Ok(attack_from_angles(angles_for_params(p)?)?)
}

fn attack_report(description: &AttackDescription, extra: Value) -> Result<Value, Failure> {
    let p = AttackParams::new(description.e, description.delta);
    let (f_eq, f_neq) = conditional_fidelities(p)?;
    let cp = leakage_assisted_cp(p)?;
    let mut report = json!({
        "version": fpep_core::VERSION,
        "attack": description,
        "fidelities": {
            "f_eq": f_eq,
            "f_neq": f_neq,
            "sqrt_f_eq": f_eq.sqrt(),
            "sqrt_f_neq": f_neq.sqrt(),
        },
        "cp": cp,
        "tau": tau_from_cp(cp.clamp(0.5, 1.0))?,
        "tau_bound": tau_lutkenhaus(p.e)?,
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut report, extra) {
        map.extend(more);
    }
    Ok(report)
}

pub fn attack(args: &AttackArgs) -> CmdResult {
    let (description, extra) = match args.kind {
        AttackType::Sb => {
            let g = sb_attack(args.e)?.geometry()?;
            (AttackDescription::new(AttackKind::Sb, &g, None), json!({}))
        }
        AttackType::Optimal => {
            let opt = optimize_delta(args.e, DEFAULT_RESOLUTION)?;
            let a = optimal_attack(args.e)?;
            let g = a.geometry(Basis::U)?;
            (
                AttackDescription::new(AttackKind::Angles, &g, a.angles()),
                json!({ "optimizer": opt }),
            )
        }
        AttackType::Param => {
            let a = param_attack(args.e, args.delta)?;
            let g = a.geometry(Basis::U)?;
            (
                AttackDescription::new(AttackKind::Param, &g, a.angles()),
                json!({}),
            )
        }
    };
    write_json(
        &attack_report(&description, extra)?,
        args.common.out.as_deref(),
    )
}

pub fn montecarlo(args: &MonteCarloArgs) -> CmdResult {
    let seed = args.common.seed;
    let (probe, expected_qber): (EntanglingProbe, f64) = match args.kind {
        SimulatedAttack::Sb => (sb_attack(args.e)?.symmetrized_probe()?, args.e),
        SimulatedAttack::Optimal => (optimal_attack(args.e)?.probe().clone(), args.e),
        SimulatedAttack::Param => (param_attack(args.e, args.delta)?.probe().clone(), args.e),
        SimulatedAttack::Identity => (EntanglingProbe::identity(), 0.0),
    };
    let n = usize::try_from(args.n).map_err(|_| Failure::Usage("--n too large".into()))?;
    let ex = run_exchange(&probe, n, seed)?;
    let geometry = ProbeGeometry::from_attack(&probe, Basis::U)?;
    let params = geometry.params();

    let mut strategies = serde_json::Map::new();
    for (k, kind) in [StrategyKind::CorrectBits, StrategyKind::TwoStage]
        .into_iter()
        .enumerate()
    {
        let strategy = EveStrategy::new(kind, &probe)?;
        let est = simulate_eve(&ex, &strategy, seed.wrapping_add(1 + k as u64))?;
        let name = serde_json::to_value(kind).expect("plain enum");
        strategies.insert(
            name.as_str().expect("string").to_string(),
            json!({
                "samples": est.samples,
                "cp": est.stats.cp,
                "stderr": est.stderr,
                "expected": est.predicted_cp,
                "z": z_score(est.stats.cp, est.predicted_cp, est.stderr),
            }),
        );
    }

    if let Some(path) = &args.records {
        let mut out = sink(Some(path))?;
        writeln!(out, "# {}", provenance("montecarlo", seed, None))?;
        write_records_csv(&ex.records, &mut out)?;
        out.flush()?;
    }

    let s = &ex.summary;
    let leak = leakage_assisted_cp(AttackParams::new(params.e.clamp(0.0, 0.5), params.delta)).ok();
    let report = json!({
        "version": fpep_core::VERSION,
        "seed": seed,
        "attack": format!("{:?}", args.kind).to_lowercase(),
        "e": params.e,
        "delta": params.delta,
        "n": s.n,
        "sifted": s.sifted,
        "qber": {
            "value": s.qber,
            "stderr": s.qber_stderr,
            "expected": expected_qber,
            "z": z_score(s.qber, expected_qber, s.qber_stderr),
        },
        "strategies": strategies,
        "analytic": {
            "cp_leakage_assisted": leak,
            "tau": leak.and_then(|cp| tau_from_cp(cp.clamp(0.5, 1.0)).ok()),
        },
    });
    write_json(&report, args.common.out.as_deref())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: Value,
}

fn check_symmetrization(trials: usize, seed: u64) -> Check {
    match verify_random_symmetrization(trials, 4, seed) {
        Ok(r) => Check {
            name: "symmetrization",
            pass: r.group_order == 8 && r.max_residual() <= 1e-10,
            detail: json!(r),
        },
        Err(err) => Check {
            name: "symmetrization",
            pass: false,
            detail: json!(err.to_string()),
        },
    }
}

fn check_bound(samples: usize, seed: u64) -> Check {
    match verify_bound_random(samples, seed) {
        Ok(r) => Check {
            name: "bound-random",
            pass: r.violations == 0,
            detail: json!(r),
        },
        Err(err) => Check {
            name: "bound-random",
            pass: false,
            detail: json!(err.to_string()),
        },
    }
}

fn qber_grid() -> Vec<f64> {
    EGrid::new(0.001, 0.5, 0.001).expect("valid grid").points()
}

fn check_curve_identity() -> Check {
    let mut worst: f64 = 0.0;
    let mut worst_e = 0.0;
    for e in qber_grid() {
        let gap = optimize_delta(e, DEFAULT_RESOLUTION)
            .and_then(|o| Ok((o.tau - tau_lutkenhaus(e)?).abs()))
            .unwrap_or(f64::INFINITY);
        if gap > worst {
            worst = gap;
            worst_e = e;
        }
    }
    Check {
        name: "curve-identity",
        pass: worst <= 1e-9,
        detail: json!({ "max_abs_gap": worst, "at_e": worst_e, "tolerance": 1e-9 }),
    }
}

fn check_optimal_tightness(perturb: f64) -> Check {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for k in 1..=9 {
        let e = 0.05 * k as f64;
        let result = optimal_attack(e)
            .and_then(|a| Ok(a.geometry(Basis::U)?.params()))
            .and_then(|p| {
                let p = AttackParams::new(p.e, p.delta + perturb);
                Ok((tau_of_params(p)? - tau_lutkenhaus(p.e)?).abs())
            });
        match result {
            Ok(gap) => worst = worst.max(gap),
            Err(err) => {
                failure = Some(format!("e = {e}: {err}"));
                break;
            }
        }
    }
    Check {
        name: "optimal-attack-tightness",
        pass: failure.is_none() && worst <= 1e-9,
        detail: json!({ "max_abs_gap": worst, "tolerance": 1e-9, "error": failure }),
    }
}

fn check_sb_geometry() -> Check {
    let mut worst: f64 = 0.0;
    for k in 1..=6 {
        let e = 0.05 * k as f64;
        let have = match sb_attack(e).and_then(|a| a.geometry()) {
            Ok(g) => g.gram(),
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        };
        let want = table_gram(AttackParams::slutsky_brandt(e));
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((have[i][j] - want[i][j]).abs());
            }
        }
    }
    Check {
        name: "sb-geometry",
        pass: worst <= 1e-12,
        detail: json!({ "max_abs_deviation": worst, "tolerance": 1e-12 }),
    }
}

fn check_gains() -> Check {
    let bad: Vec<f64> = qber_grid()
        .into_iter()
        .filter(|&e| gains(1_000_000, e).map_or(true, |g| g.g_c < g.g_d))
        .collect();
    Check {
        name: "gain-ordering",
        pass: bad.is_empty(),
        detail: json!({ "violations": bad }),
    }
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let seed = args.common.seed;
    let samples =
        usize::try_from(args.samples).map_err(|_| Failure::Usage("--samples too large".into()))?;
    let trials =
        usize::try_from(args.trials).map_err(|_| Failure::Usage("--trials too large".into()))?;
    let checks = [
        check_symmetrization(trials, seed),
        check_bound(samples, seed),
        check_curve_identity(),
        check_optimal_tightness(args.perturb_delta.unwrap_or(0.0)),
        check_sb_geometry(),
        check_gains(),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "version": fpep_core::VERSION,
        "seed": seed,
        "samples": samples,
        "trials": trials,
        "pass": pass,
        "checks": checks
            .iter()
            .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
            .collect::<Vec<_>>(),
    });
    write_json(&report, args.common.out.as_deref())?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(Failure::Check(failed.join(", ")))
    }
}
