//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line whatever the outcome; the process fails if any line fails.

mod common;

use std::process::ExitCode;

use nalgebra::{DVector, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use quadsim::allocator::{allocate, AllocationProblem, AllocatorWeights};
use quadsim::harness::{default_grid, run_sweep, Mode, ScenarioConfig, SweepCell};
use quadsim::impact::resolve_impact;
use quadsim::math::rk4_step;
use quadsim::nmpc::{solve_ocp, OcpConfig};
use quadsim::rate_mrac::{build_regressor, pack_gamma};
use quadsim::sim::{mae_position, mae_velocity, run_scenario, settling_time};
use quadsim::vehicle::{effectiveness_matrix, nominal_derivative, system_inertia, LoadedParams};
use quadsim::{VehicleParams, VehicleState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn worst_static() -> Verdict {
    let cfg = ScenarioConfig::new(Mode::StaticHover, 0.5, 0.8);
    let out = run_scenario(&cfg).expect("scenario runs");
    let impact = cfg.scenario.impact_time;
    let settle = settling_time(&out.trace, impact, 0.05, |r| r.state.v.norm());
    let recovery = settle.map(|t| t - impact);
    let mae = mae_velocity(&out.trace);
    let pass = !out.failed && recovery.is_some_and(|r| r <= 3.0) && mae <= 33.0 && out.runtime_s <= 120.0;
    verdict(
        pass,
        format!(
            "failed={} |v|<0.05 m/s after {} s (limit 3) MAE_v={mae:.3} cm/s (limit 33) runtime={:.1} s (limit 120)",
            out.failed,
            recovery.map_or("never".into(), |r| format!("{r:.3}")),
            out.runtime_s
        ),
    )
}

fn mae_column(cells: &[SweepCell]) -> Vec<f64> {
    cells.iter().map(|c| c.summary.mae_v_cm_s).collect()
}

fn static_trend(cells: &[SweepCell]) -> Verdict {
    // rows are mass-major: [0.2 × (0.2, 0.5, 0.8), 0.5 × (0.2, 0.5, 0.8)]
    let v = mae_column(cells);
    let monotone = v[0..3].windows(2).all(|w| w[1] >= w[0]) && v[3..6].windows(2).all(|w| w[1] >= w[0]);
    let heavier = (0..3).all(|i| v[i + 3] > v[i]);
    let none_failed = cells.iter().all(|c| !c.summary.failed);
    verdict(
        monotone && heavier && none_failed,
        format!(
            "MAE_v m_P=0.2: {:.3} {:.3} {:.3}; m_P=0.5: {:.3} {:.3} {:.3} cm/s",
            v[0], v[1], v[2], v[3], v[4], v[5]
        ),
    )
}

fn worst_dynamic() -> Verdict {
    let cfg = ScenarioConfig::new(Mode::DynamicCircle, 0.5, 0.8);
    let out = run_scenario(&cfg).expect("scenario runs");
    let impact = cfg.scenario.impact_time;
    let circle = cfg.circle();
    let settle = settling_time(&out.trace, impact, 0.05, |r| circle.radial_error(&r.state.p));
    let recovery = settle.map(|t| t - impact);
    let mae = mae_position(&out.trace);
    let pass = !out.failed && mae <= 18.0 && recovery.is_some_and(|r| r <= 4.0);
    verdict(
        pass,
        format!(
            "failed={} MAE_p={mae:.3} cm (limit 18) radial error <5 cm after {} s (limit 4)",
            out.failed,
            recovery.map_or("never".into(), |r| format!("{r:.3}"))
        ),
    )
}

fn dynamic_sweep(cells: &[SweepCell]) -> Verdict {
    let failed: Vec<String> = cells
        .iter()
        .filter(|c| c.summary.failed)
        .map(|c| format!("({}, {})", c.summary.payload_mass, c.summary.drop_height))
        .collect();
    let maes: Vec<String> = cells.iter().map(|c| format!("{:.2}", c.summary.mae_p_cm)).collect();
    verdict(
        failed.is_empty(),
        format!("failed cells: [{}]; MAE_p cm: {}", failed.join(" "), maes.join(" ")),
    )
}

fn impact_oracle() -> Verdict {
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap = 0.0f64;
    let mut worst_gain = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (x, geom) = random_impact(&mut rng, &params);
        let out = resolve_impact(&x, &geom, &params).expect("approaching contact");
        let vb = out.state.q.inverse_rotate(&out.state.v) + out.state.omega.cross(&geom.contact_point);
        let gap = (vb - out.state.q.inverse_rotate(&out.payload_velocity)).dot(&geom.normal);
        worst_gap = worst_gap.max(gap.abs());
        let before = kinetic_energy(&x, &geom.payload_velocity, geom.payload_mass, &params);
        let after = kinetic_energy(&out.state, &out.payload_velocity, geom.payload_mass, &params);
        worst_gain = worst_gain.max(after - before);
    }
    verdict(
        worst_gap < 1e-10 && worst_gain <= 1e-12,
        format!("max contact gap {worst_gap:.2e} m/s (limit 1e-10), max energy change {worst_gain:.2e} J (limit 0)"),
    )
}

fn thrust_stability() -> Verdict {
    let dt = 1e-3;
    let run = thrust_closed_loop(0.5, 8.0, dt);
    let rise = max_increase(&run.lyapunov);
    let late = run.error_norm[(5.0 / dt) as usize..].iter().copied().fold(0.0, f64::max);
    let k_err = (run.k_t - 1.5).abs() / 1.5;
    verdict(
        rise <= 1e-6 * dt && late < 1e-3 && k_err <= 0.02,
        format!(
            "max dV_t {rise:.2e} (limit {:.0e}) max |e_v| after 5 s {late:.2e} (limit 1e-3) k_t={:.4} ({:.2}% from 1.5)",
            1e-6 * dt,
            run.k_t,
            k_err * 100.0
        ),
    )
}

fn rate_stability() -> Verdict {
    let dt = 1e-3;
    let base = VehicleParams::default();
    let r = Vector3::new(0.2, 0.2, 0.0);
    let j = system_inertia(&base, 0.5, &r);
    let tau = LoadedParams::new(base.clone(), 0.5, r).level_gravity_torque();
    let init = pack_gamma(&base.inertia_matrix(), &Vector3::zeros());
    let run = rate_closed_loop(j, tau, init, Vector3::new(0.5, -0.3, 0.2), 4.0, dt);
    let rise = max_increase(&run.lyapunov);
    let late = run.error_norm[(2.0 / dt) as usize..].iter().copied().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut identity = 0.0f64;
    for _ in 0..10_000 {
        let j = random_inertia(&mut rng);
        let tau = Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let phi = Vector3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
        let lhs = build_regressor(&phi).apply(&pack_gamma(&j, &tau));
        identity = identity.max((lhs - (j * phi + Vector3::new(tau.x, tau.y, 0.0))).amax());
    }
    verdict(
        rise <= 1e-6 * dt && late < 0.01 && identity <= 1e-12,
        format!(
            "max dV_w {rise:.2e} (limit {:.0e}) max |e_w| after 2 s {late:.2e} (limit 0.01) regressor identity {identity:.1e} (limit 1e-12)",
            1e-6 * dt
        ),
    )
}

fn nmpc_correctness() -> Verdict {
    let params = VehicleParams::default();
    let cfg = OcpConfig::default();
    let origin = Vector3::new(0.0, 0.0, 1.0);
    let refs = hover_horizon(origin, &params, cfg.steps);
    let hover = solve_ocp(&VehicleState::at_rest(origin), &refs, None, &cfg, &params).expect("hover solve");
    let hover_err = (hover.inputs[0] - Vector4::new(params.mass * params.gravity, 0.0, 0.0, 0.0)).amax();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_kkt = 0.0f64;
    let mut worst_repeat = 0.0f64;
    for _ in 0..100 {
        let x = perturbed_hover(&mut rng, origin, 1.0);
        let sol = solve_ocp(&x, &refs, None, &cfg, &params).expect("solve");
        worst_kkt = worst_kkt.max(sol.kkt_residual);
        let a = solve_ocp(&x, &refs, Some(&sol), &cfg, &params).expect("warm solve");
        let b = solve_ocp(&x, &refs, Some(&sol), &cfg, &params).expect("warm solve");
        worst_repeat = worst_repeat.max((a.inputs[0] - b.inputs[0]).amax());
    }
    verdict(
        hover_err <= 1e-6 && worst_kkt < 1e-6 && worst_repeat <= 1e-9,
        format!(
            "hover input error {hover_err:.1e} (limit 1e-6) max KKT {worst_kkt:.2e} (limit 1e-6) warm re-solve spread {worst_repeat:.1e} (limit 1e-9)"
        ),
    )
}

fn allocation_correctness() -> Verdict {
    let params = VehicleParams::default();
    let g = effectiveness_matrix(&params);
    let g_inv = g.try_inverse().expect("invertible effectiveness");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let no_effort = AllocatorWeights { effort: [0.0; 4], ..AllocatorWeights::default() };
    let mut interior = 0.0f64;
    for _ in 0..1000 {
        let u = Vector4::from_fn(|_, _| rng.gen_range(1.0..params.thrust_max - 1.0));
        let p = AllocationProblem::new(g * u, g, &no_effort, params.thrust_min, params.thrust_max);
        let sol = allocate(&p, None).expect("allocation");
        interior = interior.max((sol - g_inv * (g * u)).amax());
    }
    let mut constrained = 0.0f64;
    for _ in 0..1000 {
        let w = Vector4::new(
            rng.gen_range(-5.0..70.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-1.0..1.0),
        );
        let p = AllocationProblem::new(w, g, &AllocatorWeights::default(), params.thrust_min, params.thrust_max);
        let sol = allocate(&p, None).expect("allocation");
        let qp = p.to_qp();
        let oracle = enumerate_box_qp(&qp.hessian, &qp.gradient, &qp.lower, &qp.upper);
        constrained = constrained.max((DVector::from_column_slice(sol.as_slice()) - oracle).amax());
    }
    verdict(
        interior <= 1e-9 && constrained <= 1e-7,
        format!("interior vs inverse {interior:.1e} (limit 1e-9) constrained vs enumeration {constrained:.1e} (limit 1e-7)"),
    )
}

fn numerics() -> Verdict {
    let slope = (spin_error(0.02, 2.0) / spin_error(0.01, 2.0)).log2();

    let params = VehicleParams::default();
    let mut x = VehicleState { omega: Vector3::new(2.0, -1.5, 3.0), ..VehicleState::default() }.to_vector();
    let mut drift = 0.0f64;
    for _ in 0..20_000 {
        let next = rk4_step(|s| nominal_derivative(s, 9.81, &Vector3::new(0.01, -0.02, 0.005), &params), &x, 5e-4)
            .expect("finite");
        drift = drift.max((VehicleState::from_vector(&next).q.norm() - 1.0).abs());
        x = VehicleState::from_vector(&next).normalized().to_vector();
    }
    verdict(
        (3.8..=4.2).contains(&slope) && drift < 1e-9,
        format!("RK4 slope {slope:.3} (3.8-4.2) max quaternion norm drift per step {drift:.1e} (limit 1e-9)"),
    )
}

fn main() -> ExitCode {
    let base = ScenarioConfig::default();
    let static_cells = run_sweep(&base, Mode::StaticHover, &default_grid(), None).expect("static sweep");
    let dynamic_cells = run_sweep(&base, Mode::DynamicCircle, &default_grid(), None).expect("dynamic sweep");

    let results = [
        ("worst-case static recovery", worst_static()),
        ("static sweep ordering", static_trend(&static_cells)),
        ("worst-case dynamic tracking", worst_dynamic()),
        ("dynamic sweep completes", dynamic_sweep(&dynamic_cells)),
        ("impact oracle", impact_oracle()),
        ("thrust channel stability", thrust_stability()),
        ("rate channel stability", rate_stability()),
        ("nmpc correctness", nmpc_correctness()),
        ("allocation correctness", allocation_correctness()),
        ("numerics", numerics()),
    ];
    let mut all = true;
    for (i, (name, v)) in results.iter().enumerate() {
        all &= v.pass;
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
