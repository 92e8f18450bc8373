//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible with `--nocapture`). Tolerances are pinned
//! in the assertions.
//!
//! Run with: cargo test -p deltasol-cli --test acceptance

use std::path::PathBuf;
use std::process::Command;

use deltasol::dynamics::{
    integrate_mode_a, integrate_mode_b, ShelfInit, WidthClosure,
};
use deltasol::flux::Flux;
use deltasol::hopf::{Background, Datum};
use deltasol::mollifiers::{Mollifier, Orientation};
use deltasol::profiles::{solve_profile, solve_profile_by_amplitude, speed_for_amplitude};
use deltasol::verify::{
    build_smooth_ansatz, def11_check, entropy_peak_slot, hopf_delta_exact,
    lemma_identity_residuals, nonuniqueness_demo, residual_pairing, AmplitudeHistory,
    OperatorSpec, ProfileSource, SpectralConfig, TestFunctionBank,
};

fn sweep() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025, 0.0125]
}

/// The shared deformed-background scenario of the order criteria: a gentle
/// rising ramp, unit amplitude, one time unit.
fn ramp() -> Background {
    Background::new(
        Datum::TanhRamp {
            base: 0.3,
            amp: 0.35,
            steep: 0.9,
        },
        Flux::quadratic(),
    )
}

fn compat_shelf(bf: &Background, g0: f64, phi0: f64) -> ShelfInit {
    let u0x = bf.eval_dx(phi0, 0.0).unwrap();
    let g_t0 = -(4.0 / 3.0) * g0 * u0x;
    ShelfInit::Bump {
        amp: -1.5 * 6.0_f64.sqrt() * g_t0 / g0.powf(1.5),
        center: phi0,
        width: 1.5,
    }
}

#[test]
fn criterion_01_kernel_moments() {
    let m = Mollifier::sech2_kernel();
    let vals = [
        m.moment(1).unwrap(),
        m.moment(2).unwrap(),
        m.moment(3).unwrap(),
        m.grad_moment().unwrap(),
    ];
    let want = [2.0, 4.0 / 3.0, 16.0 / 15.0, 16.0 / 15.0];
    for (v, w) in vals.iter().zip(want) {
        assert!((v - w).abs() <= 1e-8, "moment {v} vs {w}");
    }
    println!(
        "criterion 1 PASS: kernel moments {:.12}, {:.12}, {:.12}, {:.12}",
        vals[0], vals[1], vals[2], vals[3]
    );
}

#[test]
fn criterion_02_profile_solver() {
    let g = 1.0;
    let sol = solve_profile(&Flux::quadratic(), 0.0, 2.0 * g / 3.0).unwrap();
    let alpha = (g / 6.0_f64).sqrt();
    let sech = |z: f64| {
        let e = (-z.abs()).exp();
        2.0 * e / (1.0 + e * e)
    };
    let mut sup: f64 = 0.0;
    let mut tau = -10.0;
    while tau <= 10.0 {
        let s = sech(alpha * tau);
        sup = sup.max((sol.shape(tau) - g * s * s).abs());
        tau += 0.013;
    }
    assert!(sup <= 1e-6, "profile sup-norm {sup:e}");

    let p = sol.potential();
    let h = 1e-3;
    let mut res: f64 = 0.0;
    let mut tau = 0.0;
    while tau <= 12.0 {
        let d = (-sol.shape(tau + 2.0 * h) + 8.0 * sol.shape(tau + h)
            - 8.0 * sol.shape(tau - h)
            + sol.shape(tau - 2.0 * h))
            / (12.0 * h);
        res = res.max((0.5 * d * d + p.eval(sol.shape(tau))).abs());
        tau += 0.171;
    }
    assert!(res <= 1e-8, "first-integral residual {res:e}");
    println!("criterion 2 PASS: sup-norm {sup:.3e}, first-integral residual {res:.3e}");
}

#[test]
fn criterion_03_exact_soliton_calibration() {
    let bf = Background::new(Datum::Constant { value: 0.0 }, Flux::quadratic());
    let traj = integrate_mode_b(&bf, 1.0, 0.0, &ShelfInit::Zero, 1.0, 100, false).unwrap();
    let step = Mollifier::sech2().heaviside(Orientation::Minus).unwrap();
    let bank = TestFunctionBank::standard(traj.phi(0.5));
    let op = OperatorSpec::kdv();
    let sup_psi = (-1.0_f64).exp();
    let mut worst: f64 = 0.0;
    for &eps in &sweep() {
        let u = build_smooth_ansatz(&traj, ProfileSource::ClosedForm, step.clone(), eps).unwrap();
        for m in bank.members() {
            for k in 0..=4 {
                let t = 0.25 * k as f64;
                let v = residual_pairing(&u, &op, m, t).unwrap().abs();
                worst = worst.max(v);
            }
        }
    }
    assert!(
        worst <= 1e-10 * sup_psi,
        "calibration pairing {worst:e} vs bound {:e}",
        1e-10 * sup_psi
    );
    println!(
        "criterion 3 PASS: worst exact-soliton pairing {worst:.3e} (bound {:.3e})",
        1e-10 * sup_psi
    );
}

#[test]
fn criterion_04_mode_b_two_pairing_orders() {
    let bf = ramp();
    let (g0, phi0) = (1.0, -2.0);
    let shelf = compat_shelf(&bf, g0, phi0);
    let traj = integrate_mode_b(&bf, g0, phi0, &shelf, 1.0, 200, false).unwrap();
    assert!(traj.corner_mismatch.is_none(), "corner should be compatible");
    let step = Mollifier::sech2().heaviside(Orientation::Minus).unwrap();
    let bank = TestFunctionBank::standard(traj.phi(0.5));
    let rep = def11_check(
        &traj,
        ProfileSource::ClosedForm,
        &step,
        &OperatorSpec::kdv(),
        &sweep(),
        &bank,
    )
    .unwrap();
    let fl = rep.transport_fit.expect("transport fit");
    let fu = rep.entropy_fit.expect("entropy fit");
    assert!(
        fl.slope >= 1.8 && fl.residual <= 0.1,
        "transport pairing slope {:.3} residual {:.3}",
        fl.slope,
        fl.residual
    );
    assert!(
        fu.slope >= 1.8 && fu.residual <= 0.1,
        "entropy pairing slope {:.3} residual {:.3}",
        fu.slope,
        fu.residual
    );
    println!(
        "criterion 4 PASS: mode B slopes L {:.3} (resid {:.3}), uL {:.3} (resid {:.3})",
        fl.slope, fl.residual, fu.slope, fu.residual
    );
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_deltasol"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &std::path::Path, heaviside: &str) -> PathBuf {
    let text = format!(
        r#"
mode = "A"
t_end = 1.0
steps = 200

[flux]
preset = "u2"

[background]
preset = "tanh_ramp"
base = 0.3
amp = 0.35
steep = 0.9

[heaviside]
preset = "{heaviside}"

[soliton]
g0 = 1.0
phi0 = -2.0

[shelf]
preset = "bump"
amp = 0.25
center = 0.0
width = 1.5
"#
    );
    let path = dir.join(format!("mode_a_{heaviside}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn data_rows(path: &std::path::Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_05_mode_a_order_and_step_independence() {
    let bf = ramp();
    let (g0, phi0) = (1.0, -2.0);
    let shelf = ShelfInit::Bump {
        amp: 0.25,
        center: 0.0,
        width: 1.5,
    };
    let kernel = Mollifier::sech2_kernel();
    let traj =
        integrate_mode_a(&bf, &kernel, WidthClosure::SqrtG6, g0, phi0, &shelf, 1.0, 200)
            .unwrap();
    let step = Mollifier::sech2().heaviside(Orientation::Plus).unwrap();
    let bank = TestFunctionBank::standard(traj.phi(0.5));
    let rep = def11_check(
        &traj,
        ProfileSource::ClosedForm,
        &step,
        &OperatorSpec::hopf(),
        &sweep(),
        &bank,
    )
    .unwrap();
    let fl = rep.transport_fit.expect("transport fit");
    assert!(
        fl.slope >= 1.8 && fl.residual <= 0.1,
        "transport slope {:.3} residual {:.3}",
        fl.slope,
        fl.residual
    );

    // Step-approximation independence: the integrated trajectory never sees
    // the step generator, so swapping presets leaves the table bit-identical.
    let dir = std::env::temp_dir().join("deltasol-acc-c5");
    std::fs::create_dir_all(&dir).unwrap();
    let mut digests = Vec::new();
    for h in ["sech2", "gaussian"] {
        let cfg = write_scenario(&dir, h);
        let outdir = dir.join(format!("out-{h}"));
        let out = run_cli(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            outdir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "simulate failed: {out:?}");
        digests.push(data_rows(&outdir.join("trajectory.csv")));
    }
    assert_eq!(digests[0], digests[1], "trajectory must not depend on the step preset");
    println!(
        "criterion 5 PASS: mode A transport slope {:.3} (resid {:.3}); trajectories identical under step swap",
        fl.slope, fl.residual
    );
}

#[test]
fn criterion_06_conservation_and_entropy_slot() {
    let bf = ramp();
    let (g0, phi0) = (1.0, -2.0);
    let shelf = compat_shelf(&bf, g0, phi0);
    let traj = integrate_mode_b(&bf, g0, phi0, &shelf, 1.0, 200, false).unwrap();
    let mut worst_k: f64 = 0.0;
    for k in 0..=50 {
        let t = k as f64 / 50.0;
        worst_k = worst_k.max(traj.conserved_residual(t).abs());
    }
    assert!(worst_k <= 1e-10, "conserved-combination residual {worst_k:e}");
    let mut worst_slot: f64 = 0.0;
    for k in 0..=4 {
        let t = 0.1 + 0.2 * k as f64;
        worst_slot = worst_slot.max(entropy_peak_slot(&traj, t).unwrap().abs());
    }
    assert!(worst_slot <= 1e-6, "entropy-budget peak slot {worst_slot:e}");
    println!(
        "criterion 6 PASS: conserved residual {worst_k:.3e}, entropy peak slot {worst_slot:.3e}"
    );
}

#[test]
fn criterion_07_derivative_peak_identities() {
    let fluxes = [Flux::quadratic(), Flux::cubic(), Flux::quadratic_cubic(0.1)];
    let mut worst_main: f64 = 0.0;
    let mut worst_inter: f64 = 0.0;
    for flux in &fluxes {
        for k in 0..10 {
            let u0 = 0.05 * k as f64;
            let amp = 0.4 + 0.12 * k as f64;
            let c = speed_for_amplitude(flux, u0, amp);
            let sol = solve_profile_by_amplitude(flux, u0, amp).unwrap();
            assert!((sol.speed() - c).abs() < 1e-12);
            let r = lemma_identity_residuals(&sol, flux);
            worst_main = worst_main.max(r.main);
            worst_inter = worst_inter.max(r.energy.max(r.virial).max(r.recombination));
        }
    }
    assert!(worst_main <= 1e-6, "main identity {worst_main:e}");
    assert!(worst_inter <= 1e-7, "intermediate identities {worst_inter:e}");
    println!(
        "criterion 7 PASS: main identity {worst_main:.3e}, intermediates {worst_inter:.3e} over 30 samples"
    );
}

#[test]
fn criterion_08_peak_seeded_counterexample() {
    // Independent trapezoid oracle for the second moment of the unit-mass
    // kernel, computed before asserting the inequality.
    let m = Mollifier::sech2();
    let oracle = {
        let n = 400_000;
        let (a, b) = (-30.0, 30.0);
        let h = (b - a) / n as f64;
        let f = |z: f64| {
            let e = (-z.abs() as f64).exp();
            let s = 2.0 * e / (1.0 + e * e);
            (0.5 * s * s) * (0.5 * s * s)
        };
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..n {
            s += f(a + k as f64 * h);
        }
        s * h
    };
    assert!((oracle - 1.0 / 3.0).abs() < 1e-10, "oracle {oracle}");

    let eps = 0.01;
    let t0 = 1.0;
    let chk = hopf_delta_exact(&m, eps, t0).unwrap();
    assert!(chk.weak_limit_gap <= 1e-6 * eps, "weak limit gap {:e}", chk.weak_limit_gap);
    assert!((chk.predicted_position - t0 * oracle).abs() < 1e-9);
    assert!((chk.support_end - 0.2).abs() < 1e-14);
    assert!(
        chk.outside_support && chk.predicted_position > chk.support_end,
        "formal position {} must exceed the support end {}",
        chk.predicted_position,
        chk.support_end
    );
    println!(
        "criterion 8 PASS: weak-limit gap {:.3e} <= {:.1e}; formal position {:.4} outside support [0, {:.3}]",
        chk.weak_limit_gap,
        1e-6 * eps,
        chk.predicted_position,
        chk.support_end
    );
}

#[test]
fn criterion_09_direct_cross_validation() {
    let datum = Datum::PeriodicRamp {
        base: 0.2,
        amp: 0.25,
        steep: 0.25,
        center: 0.0,
        period: 40.0,
    };
    let bf = Background::new(datum, Flux::quadratic());
    let (g0, phi0, eps, t_end) = (1.0, -3.0, 0.05, 1.0);
    let traj = integrate_mode_b(&bf, g0, phi0, &ShelfInit::Zero, t_end, 400, false).unwrap();

    let cfg = SpectralConfig {
        domain: (-20.0, 20.0),
        n: 8192,
        cfl: 0.4,
        outputs: 20,
    };
    let run = deltasol::verify::kdv_direct(&bf, g0, phi0, eps, t_end, &cfg).unwrap();
    let cfg2 = SpectralConfig {
        domain: (-40.0, 40.0),
        n: 16384,
        cfl: 0.4,
        outputs: 20,
    };
    let run2 = deltasol::verify::kdv_direct(&bf, g0, phi0, eps, t_end, &cfg2).unwrap();
    let mut doubling: f64 = 0.0;
    for (i, &t) in run.times.iter().enumerate() {
        if let Some(j) = run2.times.iter().position(|&s| (s - t).abs() < 1e-12) {
            doubling = doubling.max((run.peak_x[i] - run2.peak_x[j]).abs());
        }
    }
    assert!(doubling <= 1e-8, "domain-doubling influence {doubling:e}");
    assert!(run.mass_drift <= 1e-8, "mass drift {:e}", run.mass_drift);
    assert!(run.energy_drift <= 1e-6, "energy drift {:e}", run.energy_drift);

    let width = eps / (g0 / 6.0_f64).sqrt();
    let mut worst_pos: f64 = 0.0;
    let mut worst_amp: f64 = 0.0;
    for (i, &t) in run.times.iter().enumerate() {
        worst_pos = worst_pos.max((run.peak_x[i] - traj.phi(t)).abs());
        worst_amp = worst_amp.max((run.peak_amplitude[i] - traj.g(t)).abs() / traj.g(t));
    }
    assert!(
        worst_pos <= 0.05 * width,
        "peak position error {worst_pos:e} vs bound {:e}",
        0.05 * width
    );
    assert!(worst_amp <= 0.05, "amplitude error {worst_amp:e}");
    println!(
        "criterion 9 PASS: position error {worst_pos:.3e} (bound {:.3e}), amplitude {:.2}%, doubling {doubling:.2e}",
        0.05 * width,
        100.0 * worst_amp
    );
}

#[test]
fn criterion_10_nonuniqueness_demo() {
    let bf = ramp();
    let h1 = AmplitudeHistory::constant(1.0);
    let h2 = AmplitudeHistory::quadratic_growth(1.0, 0.3);
    let (rep, _, _) =
        nonuniqueness_demo(&bf, -2.0, &ShelfInit::Zero, (&h1, &h2), 1.0, 400).unwrap();
    assert!(rep.wedge_gap > 1e-3, "wedge gap {:e}", rep.wedge_gap);
    assert!(rep.transport_residual <= 1e-6, "transport {:e}", rep.transport_residual);
    assert!(rep.speed_residual <= 1e-6, "speed {:e}", rep.speed_residual);
    assert!(rep.boundary_residual <= 1e-6, "boundary {:e}", rep.boundary_residual);
    println!(
        "criterion 10 PASS: wedge gap {:.3e} with residuals transport {:.1e}, speed {:.1e}, boundary {:.1e}",
        rep.wedge_gap, rep.transport_residual, rep.speed_residual, rep.boundary_residual
    );
}

#[test]
fn criterion_11_byte_identical_reruns() {
    let dir = std::env::temp_dir().join("deltasol-acc-c11");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_scenario(&dir, "sech2");
    let mut bytes = Vec::new();
    for run in 0..2 {
        let outdir = dir.join(format!("run-{run}"));
        let out = run_cli(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            outdir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "simulate failed: {out:?}");
        bytes.push(std::fs::read(outdir.join("trajectory.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "repeated runs must be byte-identical");
    println!(
        "criterion 11 PASS: repeated simulate runs byte-identical ({} bytes)",
        bytes[0].len()
    );
}
