//! Reduced-scale self-test: the acceptance checks at lower shot counts
//! with correspondingly widened statistical tolerances. One line per
//! check; exit code zero only when everything passes.

use std::process::ExitCode;

use transim::analysis::{fit_exponential, fit_hanger, fit_ramsey, fit_rb, floor_se, rb_fidelities};
use transim::clifford::{
    compose_sequence, random_clifford, recovery_gate, CliffordElement, PhysicalGate,
};
use transim::device::{ej_from_inductance, ej_from_spectrum};
use transim::experiments::{
    run_ramsey, run_rb, run_t1, run_vna_sweep, ExperimentPlan, Grid, PlanKind, RbNoise, RbPlan,
    VnaConditioning,
};
use transim::presets;
use transim::readout::separation_fidelity;
use transim::rng::{domain, StreamKey};

type Check = (&'static str, fn() -> Result<String, String>);

pub fn run() -> ExitCode {
    let checks: [Check; 8] = [
        ("parameter-relations", parameter_relations),
        ("clifford-exactness", clifford_exactness),
        ("t1-recovery", t1_recovery),
        ("ramsey-recovery", ramsey_recovery),
        ("rb-pipeline", rb_pipeline),
        ("hanger-roundtrip", hanger_roundtrip),
        ("readout-statistics", readout_statistics),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("selftest {name:<22} PASS  {detail}"),
            Err(reason) => {
                failures += 1;
                println!("selftest {name:<22} FAIL  {reason}");
            }
        }
    }
    if failures == 0 {
        println!("selftest: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("selftest: {failures} check(s) failed");
        ExitCode::FAILURE
    }
}

fn rel_ok(value: f64, expected: f64, tol: f64) -> Result<(), String> {
    if (value - expected).abs() <= tol * expected.abs() {
        Ok(())
    } else {
        Err(format!("{value:.6} vs {expected:.6} (tol {tol:.3})"))
    }
}

fn parameter_relations() -> Result<String, String> {
    rel_ok(ej_from_spectrum(4.962, -0.260).map_err(|e| e.to_string())?, 13.1, 0.01)?;
    rel_ok(ej_from_spectrum(5.652, -0.300).map_err(|e| e.to_string())?, 14.8, 0.01)?;
    rel_ok(ej_from_inductance(22.0, 2).map_err(|e| e.to_string())?, 14.8, 0.02)?;
    for (name, g_mhz, tol) in [("si", 135.0, 0.03), ("soi", 177.0, 0.01)] {
        let device = presets::device(name).map_err(|e| e.to_string())?;
        rel_ok(device.coupling.g * 1e3, g_mhz, tol)?;
    }
    let si = presets::device("si").map_err(|e| e.to_string())?;
    rel_ok(si.purcell_t1_loaded().map_err(|e| e.to_string())?, 18.5, 0.06)?;
    rel_ok(si.purcell_t1_external().map_err(|e| e.to_string())?, 57.0, 0.05)?;
    let soi = presets::device("soi").map_err(|e| e.to_string())?;
    rel_ok(soi.purcell_t1_loaded().map_err(|e| e.to_string())?, 8.5, 0.05)?;
    Ok("E_J, g, and Purcell estimates match the reference values".to_string())
}

fn clifford_exactness() -> Result<String, String> {
    for a in CliffordElement::all() {
        if a.then(a.inverse()) != CliffordElement::IDENTITY {
            return Err(format!("element {} has a broken inverse", a.index()));
        }
    }
    let mut rng = StreamKey::new(1, domain::TEST, 0, 0).rng();
    for _ in 0..500 {
        let seq: Vec<CliffordElement> = (0..50).map(|_| random_clifford(&mut rng)).collect();
        let c = recovery_gate(&seq);
        if !compose_sequence(&seq).then(c).maps_ground_to_excited() {
            return Err("recovery postcondition violated".to_string());
        }
    }
    Ok("group inverses and 500 recovery gates verified".to_string())
}

fn t1_recovery() -> Result<String, String> {
    let mut details = Vec::new();
    for name in ["si", "soi"] {
        let device = presets::device(name).map_err(|e| e.to_string())?;
        let t1_ns = 1e3 * device.transmon.t1;
        let tau = Grid::log(t1_ns * 0.01, 5.0 * t1_ns, 21)
            .values()
            .map_err(|e| e.to_string())?;
        let plan = ExperimentPlan::new(PlanKind::T1 { tau }, 2_000, 1);
        plan.validate().map_err(|e| e.to_string())?;
        let out = run_t1(&device, &plan, false).map_err(|e| e.to_string())?;
        let ds = &out.datasets[0];
        let (p, se, shots) = ds.population_columns().map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..p.len()).map(|k| ds.coords(k)[0]).collect();
        let fit =
            fit_exponential(&x, &p, &floor_se(&se, &shots)).map_err(|e| e.to_string())?;
        let fitted = fit.parameter("tau").map_err(|e| e.to_string())? / 1e3;
        rel_ok(fitted, device.transmon.t1, 0.10)?;
        details.push(format!("{name}: {fitted:.2} us"));
    }
    Ok(details.join(", "))
}

fn ramsey_recovery() -> Result<String, String> {
    let mut details = Vec::new();
    for name in ["si", "soi"] {
        let device = presets::device(name).map_err(|e| e.to_string())?;
        let t2_ns = 1e3 * device.transmon.t2;
        let detuning = 5.0 / (3.0 * t2_ns);
        let tau = Grid::linear(0.0, 3.0 * t2_ns, 41).values().map_err(|e| e.to_string())?;
        let plan =
            ExperimentPlan::new(PlanKind::Ramsey { tau, detuning_ghz: detuning }, 2_000, 2);
        plan.validate().map_err(|e| e.to_string())?;
        let out = run_ramsey(&device, &plan, false).map_err(|e| e.to_string())?;
        let ds = &out.datasets[0];
        let (p, se, shots) = ds.population_columns().map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..p.len()).map(|k| ds.coords(k)[0]).collect();
        let fit = fit_ramsey(&x, &p, &floor_se(&se, &shots)).map_err(|e| e.to_string())?;
        let t2 = fit.parameter("t2").map_err(|e| e.to_string())? / 1e3;
        let freq = fit.parameter("frequency").map_err(|e| e.to_string())?;
        rel_ok(t2, device.transmon.t2, 0.10)?;
        rel_ok(freq, detuning, 0.02)?;
        details.push(format!("{name}: T2 {t2:.2} us, fringe {:.1} kHz", freq * 1e6));
    }
    Ok(details.join(", "))
}

fn rb_pipeline() -> Result<String, String> {
    let device = presets::device("si").map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::new(
        PlanKind::Rb(RbPlan {
            lengths: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
            n_sequences: 12,
            noise: RbNoise::Depolarizing { p_clifford: 0.9904, p_gate: 0.99 },
            interleaved_gate: Some(PhysicalGate::XPi),
        }),
        200,
        3,
    );
    let out = run_rb(&device, &plan).map_err(|e| e.to_string())?;
    let fit_curve = |ds: &transim::dataset::DataSet| -> Result<_, String> {
        let (p, se, shots) = ds.population_columns().map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..p.len()).map(|k| ds.coords(k)[0]).collect();
        fit_rb(&x, &p, &floor_se(&se, &shots)).map_err(|e| e.to_string())
    };
    let fit_ref = fit_curve(&out.datasets[0])?;
    let fit_int = fit_curve(&out.datasets[1])?;
    let fid = rb_fidelities(&fit_ref, &fit_int).map_err(|e| e.to_string())?;
    if (fid.avg_clifford_fidelity - 0.9952).abs() > 0.004 {
        return Err(format!("f(C) = {:.5} vs 0.9952", fid.avg_clifford_fidelity));
    }
    if (fid.gate_fidelity - 0.995).abs() > 0.004 {
        return Err(format!("f(G) = {:.5} vs 0.995", fid.gate_fidelity));
    }
    Ok(format!(
        "f(C) = {:.5}, f(X_pi) = {:.5}",
        fid.avg_clifford_fidelity, fid.gate_fidelity
    ))
}

fn hanger_roundtrip() -> Result<String, String> {
    let device = presets::device("si").map_err(|e| e.to_string())?;
    let r = &device.resonator;
    let width = r.f_r / r.q_total();
    let freq = Grid::linear(r.f_r - 10.0 * width, r.f_r + 10.0 * width, 301)
        .values()
        .map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::new(
        PlanKind::VnaSweep {
            frequency: freq,
            conditioned: VnaConditioning::None,
            snr: Some(100.0),
        },
        1,
        4,
    );
    let out = run_vna_sweep(&device, &plan).map_err(|e| e.to_string())?;
    let ds = &out.datasets[0];
    let s21 = ds.complex_columns().map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..s21.len()).map(|k| ds.coords(k)[0]).collect();
    let fit = fit_hanger(&x, &s21, Some(0.01)).map_err(|e| e.to_string())?;
    rel_ok(fit.parameter("f_r").map_err(|e| e.to_string())?, r.f_r, 0.02)?;
    rel_ok(fit.parameter("q_internal").map_err(|e| e.to_string())?, r.q_internal, 0.02)?;
    rel_ok(fit.parameter("q_external").map_err(|e| e.to_string())?, r.q_external, 0.02)?;
    Ok(format!(
        "f_r {:.4} GHz, Q_i {:.0}, Q_e {:.0} at SNR 100",
        fit.parameter("f_r").unwrap(),
        fit.parameter("q_internal").unwrap(),
        fit.parameter("q_external").unwrap()
    ))
}

fn readout_statistics() -> Result<String, String> {
    let model = transim::readout::ReadoutModel {
        mean_ground: transim::readout::IqPoint { i: 0.0, q: 0.0 },
        mean_excited: transim::readout::IqPoint { i: 0.8, q: 0.0 },
        sigma: 0.2,
        eps0: 0.0,
        eps1: 0.0,
    };
    let analytic = separation_fidelity(&model).map_err(|e| e.to_string())?;
    let n = 100_000u64;
    let mut correct = 0u64;
    for s in 0..n {
        let excited = s % 2 == 1;
        let p = if excited { 1.0 } else { 0.0 };
        let rec = transim::readout::sample_shot_from_probability(
            p,
            &model,
            StreamKey::new(9, domain::TEST, 0, s),
        );
        if (rec.bit == 1) == excited {
            correct += 1;
        }
    }
    let mc = correct as f64 / n as f64;
    let sigma = (analytic * (1.0 - analytic).max(1e-12) / n as f64).sqrt().max(1e-6);
    if (mc - analytic).abs() > 4.0 * sigma {
        return Err(format!("monte carlo {mc:.6} vs closed form {analytic:.6}"));
    }
    Ok(format!("separation fidelity {mc:.6} vs closed form {analytic:.6}"))
}

fn determinism() -> Result<String, String> {
    let device = presets::device("si").map_err(|e| e.to_string())?;
    let tau = Grid::linear(0.0, 10_000.0, 7).values().map_err(|e| e.to_string())?;
    let plan = ExperimentPlan::new(
        PlanKind::Ramsey { tau, detuning_ghz: 0.0003 },
        300,
        5,
    );
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let out =
            pool.install(|| run_ramsey(&device, &plan, false)).map_err(|e| e.to_string())?;
        Ok(out.datasets[0].to_csv())
    };
    let a = run(1)?;
    let b = run(4)?;
    if a != b {
        return Err("outputs differ across worker counts".to_string());
    }
    Ok("byte-identical outputs at 1 and 4 workers".to_string())
}
