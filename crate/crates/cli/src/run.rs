//! Subcommand implementations: each builds objects from the scenario,
//! runs the corresponding piece of the library and writes CSV tables.

use std::path::Path;

use anyhow::{bail, Result};
use rayon::prelude::*;

use deltasol::dynamics::{
    integrate_mode_a, integrate_mode_b, integrate_mode_c, integrate_mode_d, Mode, Trajectory,
};
use deltasol::profiles::solve_profile_by_amplitude;
use deltasol::verify::{
    self, def11_check, hopf_delta_exact, lemma_identity_residuals, nonuniqueness_demo,
    AmplitudeHistory, OperatorSpec, ProfileSource, ResidualReport, TestFunctionBank,
};

use crate::config::Scenario;
use crate::csvout::{Cell, Table};
use crate::svg;

pub fn integrate(sc: &Scenario, strict_corner: bool) -> Result<Trajectory> {
    let bf = sc.background()?;
    let shelf = sc.shelf_init(&bf)?;
    let traj = match sc.mode()? {
        Mode::A => integrate_mode_a(
            &bf,
            &sc.mollifier()?,
            sc.width_closure(),
            sc.soliton.g0,
            sc.soliton.phi0,
            &shelf,
            sc.t_end,
            sc.steps,
        )?,
        Mode::B => integrate_mode_b(
            &bf,
            sc.soliton.g0,
            sc.soliton.phi0,
            &shelf,
            sc.t_end,
            sc.steps,
            strict_corner,
        )?,
        Mode::C => integrate_mode_c(
            &bf,
            sc.soliton.g0,
            sc.soliton.phi0,
            &shelf,
            sc.t_end,
            sc.steps,
        )?,
        Mode::D => integrate_mode_d(
            &bf,
            sc.soliton.g0,
            sc.soliton.phi0,
            &shelf,
            sc.t_end,
            sc.steps,
        )?,
    };
    if let Some(gap) = traj.corner_mismatch {
        eprintln!(
            "warning: shelf initial value misses the emitted corner value by {gap:.3e}; \
             the mismatch rides one characteristic (use --strict-compat to reject)"
        );
    }
    Ok(traj)
}

pub fn cmd_moments(sc: &Scenario, out: &Path) -> Result<()> {
    let m = sc.mollifier()?;
    let mut t = Table::new(&["quantity", "order", "value"]);
    for n in 1..=3u32 {
        t.push(vec![
            Cell::from("moment"),
            Cell::Int(n as i64),
            Cell::Num(m.moment(n)?),
        ]);
    }
    t.push(vec![
        Cell::from("grad_moment"),
        Cell::Int(2),
        Cell::Num(m.grad_moment()?),
    ]);
    t.push(vec![
        Cell::from("decay_constant"),
        Cell::Int(0),
        Cell::Num(m.decay_constant()),
    ]);
    let p = t.write(out, "moments.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn cmd_profile(sc: &Scenario, out: &Path) -> Result<()> {
    let bf = sc.background()?;
    let flux = sc.flux()?;
    let u0 = bf.eval(sc.soliton.phi0, 0.0)?;
    let profile = solve_profile_by_amplitude(&flux, u0, sc.soliton.g0)?;
    let m = profile.moments();
    let a = profile.averages();
    let lem = lemma_identity_residuals(&profile, &flux);

    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("amplitude", profile.amplitude()),
        ("speed", profile.speed()),
        ("background", profile.background()),
        ("mass", m.mass),
        ("square", m.square),
        ("cube", m.cube),
        ("grad_energy", m.grad_energy),
        ("flux_excess", a.excess),
        ("entropy_excess", a.entropy_excess),
        ("primitive_excess", a.primitive_excess),
        ("weighted_excess", a.weighted_excess),
        ("identity_main", lem.main),
        ("identity_energy", lem.energy),
        ("identity_virial", lem.virial),
        ("identity_recombination", lem.recombination),
        ("speed_consistency", (profile.speed() * m.mass - a.excess).abs()),
    ] {
        t.push(vec![Cell::from(k), Cell::Num(v)]);
    }
    let p = t.write(out, "profile.csv", &sc.digest())?;
    println!("wrote {}", p.display());

    let mut shape = Table::new(&["tau", "w", "w_tau"]);
    let mut tau = -12.0;
    while tau <= 12.0 + 1e-9 {
        shape.push(vec![
            Cell::Num(tau),
            Cell::Num(profile.shape(tau)),
            Cell::Num(profile.shape_d1(tau)),
        ]);
        tau += 0.05;
    }
    let p = shape.write(out, "profile_shape.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn cmd_simulate(sc: &Scenario, out: &Path, strict_corner: bool) -> Result<()> {
    let traj = integrate(sc, strict_corner)?;
    let rows = sc.output.trajectory_rows.unwrap_or(50).max(2);
    let mut t = Table::new(&["t", "phi", "g", "e_at_phi", "conserved_K_residual"]);
    for k in 0..=rows {
        let tt = sc.t_end * k as f64 / rows as f64;
        t.push(vec![
            Cell::Num(tt),
            Cell::Num(traj.phi(tt)),
            Cell::Num(traj.g(tt)),
            Cell::Num(traj.shelf_trace(tt)),
            Cell::Num(traj.conserved_residual(tt)),
        ]);
    }
    let p = t.write(out, "trajectory.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    println!(
        "step-halving check: dphi {:.3e}, dg {:.3e}; min speed margin {:.3e}",
        traj.step_check.0, traj.step_check.1, traj.min_speed_margin
    );

    if sc.output.plots {
        let mut phi_pts = Vec::new();
        let mut g_pts = Vec::new();
        for k in 0..=200 {
            let tt = sc.t_end * k as f64 / 200.0;
            phi_pts.push((tt, traj.phi(tt)));
            g_pts.push((tt, traj.g(tt)));
        }
        svg::line_plot(
            &out.join("trajectory.svg"),
            "soliton position and amplitude",
            &[
                svg::Series { label: "phi(t)", points: phi_pts },
                svg::Series { label: "g(t)", points: g_pts },
            ],
            false,
        )?;
    }
    Ok(())
}

fn report_rows(table: &mut Table, op_name: &str, pairing: &str, rep: &ResidualReport, member: impl Fn(&verify::MemberRow) -> (&Vec<f64>, Option<verify::SlopeFit>)) {
    for row in &rep.rows {
        let (vals, fit) = member(row);
        for (ei, &e) in rep.eps.iter().enumerate() {
            table.push(vec![
                Cell::from(op_name),
                Cell::from(pairing),
                Cell::Num(row.testfn.center),
                Cell::Num(row.testfn.width),
                Cell::Num(e),
                Cell::Num(vals[ei]),
                Cell::Num(fit.map(|f| f.slope).unwrap_or(f64::NAN)),
                Cell::Num(fit.map(|f| f.residual).unwrap_or(f64::NAN)),
                Cell::Flag(fit.map(|f| f.residual <= 0.1).unwrap_or(false)),
                Cell::Flag(fit.map(|f| f.excluded_largest).unwrap_or(false)),
            ]);
        }
    }
}

pub fn cmd_verify_order(sc: &Scenario, out: &Path, eps_override: Option<Vec<f64>>) -> Result<()> {
    let traj = integrate(sc, false)?;
    let step = sc.heaviside()?;
    let eps = eps_override.unwrap_or_else(|| sc.sweep.eps.clone());
    let bank = TestFunctionBank::standard(traj.phi(sc.t_end / 2.0));
    let mode = sc.mode()?;
    let source = match mode {
        Mode::A | Mode::B => ProfileSource::ClosedForm,
        Mode::C | Mode::D => ProfileSource::Solved,
    };
    let flux = sc.flux()?;

    let mut ops: Vec<(&str, OperatorSpec)> = Vec::new();
    match mode {
        Mode::A | Mode::C => {
            ops.push(("transport", OperatorSpec::general(flux.clone(), false)));
            ops.push(("dispersive", OperatorSpec::general(flux.clone(), true)));
        }
        Mode::B | Mode::D => {
            ops.push(("dispersive", OperatorSpec::general(flux.clone(), true)));
        }
    }

    let reports: Vec<(String, ResidualReport)> = ops
        .par_iter()
        .map(|(name, op)| -> Result<(String, ResidualReport)> {
            let rep = def11_check(&traj, source, &step, op, &eps, &bank)?;
            Ok((name.to_string(), rep))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = Table::new(&[
        "operator", "pairing", "center", "width", "eps", "value", "slope", "fit_residual",
        "converged", "excluded_largest",
    ]);
    let mut agg = Table::new(&[
        "operator", "pairing", "slope", "fit_residual", "converged", "excluded_largest",
    ]);
    for (name, rep) in &reports {
        report_rows(&mut t, name, "L", rep, |r| (&r.transport, r.transport_fit));
        report_rows(&mut t, name, "uL", rep, |r| (&r.entropy, r.entropy_fit));
        for (pairing, fit) in [("L", rep.transport_fit), ("uL", rep.entropy_fit)] {
            agg.push(vec![
                Cell::from(name.as_str()),
                Cell::from(pairing),
                Cell::Num(fit.map(|f| f.slope).unwrap_or(f64::NAN)),
                Cell::Num(fit.map(|f| f.residual).unwrap_or(f64::NAN)),
                Cell::Flag(fit.map(|f| f.residual <= 0.1).unwrap_or(false)),
                Cell::Flag(fit.map(|f| f.excluded_largest).unwrap_or(false)),
            ]);
        }
    }
    let p = t.write(out, "order.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    let p = agg.write(out, "order_aggregate.csv", &sc.digest())?;
    println!("wrote {}", p.display());

    if sc.output.plots {
        let mut series = Vec::new();
        for (name, rep) in &reports {
            let mut sum = vec![0.0; rep.eps.len()];
            for r in &rep.rows {
                for i in 0..rep.eps.len() {
                    sum[i] += r.transport[i];
                }
            }
            series.push(svg::Series {
                label: Box::leak(format!("{name} L").into_boxed_str()),
                points: rep.eps.iter().copied().zip(sum).collect(),
            });
        }
        svg::line_plot(&out.join("order.svg"), "bank-summed residual vs eps (log-log)", &series, true)?;
    }
    Ok(())
}

pub fn cmd_compare_direct(sc: &Scenario, out: &Path) -> Result<()> {
    let mode = sc.mode()?;
    if !matches!(mode, Mode::B) {
        bail!("compare-direct runs against the mode B prediction; set mode = \"B\"");
    }
    let bf = sc.background()?;
    let traj = integrate(sc, false)?;
    let eps = sc.direct.eps;
    let half = sc.direct.domain / 2.0;
    let cfg = verify::SpectralConfig {
        domain: (-half, half),
        n: sc.direct.n,
        cfl: 0.4,
        outputs: sc.direct.outputs,
    };
    let run = verify::kdv_direct(&bf, sc.soliton.g0, sc.soliton.phi0, eps, sc.t_end, &cfg)?;
    let cfg2 = verify::SpectralConfig {
        domain: (-sc.direct.domain, sc.direct.domain),
        n: sc.direct.n * 2,
        cfl: 0.4,
        outputs: sc.direct.outputs,
    };
    let run2 = verify::kdv_direct(&bf, sc.soliton.g0, sc.soliton.phi0, eps, sc.t_end, &cfg2)?;
    let mut doubling_gap = 0.0_f64;
    for (i, &tt) in run.times.iter().enumerate() {
        if let Some(j) = run2.times.iter().position(|&s| (s - tt).abs() < 1e-12) {
            doubling_gap = doubling_gap.max((run.peak_x[i] - run2.peak_x[j]).abs());
        }
    }

    let mut t = Table::new(&[
        "t", "x_peak", "amplitude", "phi_predicted", "g_predicted", "position_error",
        "amplitude_rel_error",
    ]);
    let width = eps / (sc.soliton.g0 / 6.0_f64).sqrt();
    let mut worst_pos = 0.0_f64;
    let mut worst_amp = 0.0_f64;
    for (i, &tt) in run.times.iter().enumerate() {
        let (phi, g) = (traj.phi(tt), traj.g(tt));
        let dpos = (run.peak_x[i] - phi).abs();
        let damp = (run.peak_amplitude[i] - g).abs() / g;
        worst_pos = worst_pos.max(dpos);
        worst_amp = worst_amp.max(damp);
        t.push(vec![
            Cell::Num(tt),
            Cell::Num(run.peak_x[i]),
            Cell::Num(run.peak_amplitude[i]),
            Cell::Num(phi),
            Cell::Num(g),
            Cell::Num(dpos),
            Cell::Num(damp),
        ]);
    }
    let p = t.write(out, "compare.csv", &sc.digest())?;
    println!("wrote {}", p.display());

    let mut checks = Table::new(&["check", "value", "bound", "pass"]);
    for (name, value, bound) in [
        ("position_error_max", worst_pos, 0.05 * width),
        ("amplitude_rel_error_max", worst_amp, 0.05),
        ("mass_drift_per_unit_time", run.mass_drift, 1e-8),
        ("energy_drift_per_unit_time", run.energy_drift, 1e-6),
        ("domain_doubling_gap", doubling_gap, 1e-8),
    ] {
        checks.push(vec![
            Cell::from(name),
            Cell::Num(value),
            Cell::Num(bound),
            Cell::Flag(value <= bound),
        ]);
    }
    let p = checks.write(out, "direct_checks.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn cmd_counterexample(sc: &Scenario, out: &Path, t0: f64) -> Result<()> {
    let m = sc.mollifier()?;
    let normalized = if (m.moment(1)? - 1.0).abs() > 1e-8 {
        m.normalized()?
    } else {
        m
    };
    let mut t = Table::new(&[
        "eps", "t0", "support_end", "predicted_position", "outside_support", "weak_limit_gap",
        "weak_limit_bound",
    ]);
    for &eps in &sc.sweep.eps {
        let chk = hopf_delta_exact(&normalized, eps, t0)?;
        t.push(vec![
            Cell::Num(eps),
            Cell::Num(t0),
            Cell::Num(chk.support_end),
            Cell::Num(chk.predicted_position),
            Cell::Flag(chk.outside_support),
            Cell::Num(chk.weak_limit_gap),
            Cell::Num(1e-6 * eps),
        ]);
    }
    let p = t.write(out, "counterexample.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn cmd_nonuniqueness(sc: &Scenario, out: &Path) -> Result<()> {
    let bf = sc.background()?;
    let g0 = sc.soliton.g0;
    let h1 = AmplitudeHistory::constant(g0);
    let h2 = AmplitudeHistory::quadratic_growth(g0, 0.3);
    let (rep, f1, f2) = nonuniqueness_demo(
        &bf,
        sc.soliton.phi0,
        &sc.shelf_init(&bf)?,
        (&h1, &h2),
        sc.t_end,
        sc.steps.max(200),
    )?;
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("wedge_gap", rep.wedge_gap),
        ("transport_residual", rep.transport_residual),
        ("speed_residual", rep.speed_residual),
        ("boundary_residual", rep.boundary_residual),
        ("wedge_width_end", rep.wedge_width_end),
        ("phi_end_constant_history", f1.phi(sc.t_end)),
        ("phi_end_growing_history", f2.phi(sc.t_end)),
    ] {
        t.push(vec![Cell::from(k), Cell::Num(v)]);
    }
    let p = t.write(out, "nonuniqueness.csv", &sc.digest())?;
    println!("wrote {}", p.display());
    Ok(())
}
