use std::sync::Arc;

use irc_core::exec::Execution;
use irc_core::potentials::ModelId;
use irc_core::scenarios::{
    clutter_metrics, contact_onset, convergence_study, gliding_offset, kinetic_energy_drift, position_error, run_cached, run_scenario,
    slide_to_roll, sweep, ScenarioId, ScenarioSpec, SweepParam, Trajectory,
};
use irc_core::Error;

const MODELS: [ModelId; 3] = [ModelId::Sap, ModelId::Lagged, ModelId::Similar];

fn belt(model: ModelId) -> Trajectory {
    run_scenario(&ScenarioSpec::new(ScenarioId::Belt, model)).unwrap()
}

/// Largest `|v_n|` over active contacts in sliding frames and in frames at
/// least `settle` steps into a stiction phase, after `t0`.
fn belt_normal_velocity(traj: &Trajectory, t0: f64, settle: usize) -> (f64, f64) {
    let (mut slide, mut stick) = (0.0f64, 0.0f64);
    let mut sticking_for = 0usize;
    for f in traj.frames.iter().skip(1) {
        let Some(c) = f.contacts.first() else { continue };
        sticking_for = if c.v_t < c.eps_eff { sticking_for + 1 } else { 0 };
        if f.t < t0 {
            continue;
        }
        let v_n = f.contacts.iter().map(|c| c.v_n.abs()).fold(0.0, f64::max);
        if sticking_for == 0 {
            slide = slide.max(v_n);
        } else if sticking_for >= settle {
            stick = stick.max(v_n);
        }
    }
    (slide, stick)
}

#[test]
fn belt_normal_transients_only_while_sliding() {
    let (lagged_slide, lagged_stick) = belt_normal_velocity(&belt(ModelId::Lagged), 0.1, 3);
    for model in [ModelId::Similar, ModelId::Sap] {
        let (slide, stick) = belt_normal_velocity(&belt(model), 0.1, 3);
        assert!(slide > 1e-3, "{model}: expected a gliding transient, got {slide:e}");
        assert!(stick < 1e-2 * slide, "{model}: stiction |v_n| {stick:e} vs sliding {slide:e}");
        assert!(lagged_slide < 1e-2 * slide);
    }
    // the lagged normal direction carries no friction coupling at all
    assert!(lagged_slide.max(lagged_stick) < 1e-4);
}

#[test]
fn lagged_belt_box_does_not_heave_while_sliding() {
    // corner v_n also carries rocking when friction flips, so check the center
    let traj = belt(ModelId::Lagged);
    let heave = traj
        .frames
        .iter()
        .skip(1)
        .filter(|f| f.t >= 0.1 && f.contacts.first().is_some_and(|c| c.v_t >= c.eps_eff))
        .map(|f| f.v[1].abs())
        .fold(0.0, f64::max);
    assert!(heave <= 1e-6, "{heave:e}");
}

#[test]
fn belt_alternates_between_slip_and_stick() {
    let traj = belt(ModelId::Lagged);
    let phases: Vec<bool> = traj.frames.iter().filter_map(|f| f.contacts.first()).map(|c| c.v_t < c.eps_eff).collect();
    let switches = phases.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(switches >= 4, "only {switches} stick/slip switches");
    assert!(traj.frames.iter().skip(1).all(|f| f.contacts.len() == 2));
}

#[test]
fn falling_sphere_rolls_without_slip_or_energy_loss() {
    for model in MODELS {
        let spec = ScenarioSpec::new(ScenarioId::FallingSphere, model);
        let traj = run_scenario(&spec).unwrap();
        let roll = slide_to_roll(&traj, spec.v_s).unwrap_or_else(|| panic!("{model}: never rolls"));
        assert!(roll + 0.2 <= spec.duration);
        for f in traj.frames.iter().filter(|f| f.t >= roll && f.t <= roll + 0.2) {
            for c in f.contacts.iter().filter(|c| c.f_n > 0.0) {
                assert!(c.v_t < spec.v_s, "{model}: slip {:e} at t = {}", c.v_t, f.t);
            }
        }
        let drift = kinetic_energy_drift(&traj, roll, roll + 0.2).unwrap();
        assert!(drift < 0.01, "{model}: energy drift {drift:e}");
    }
}

#[test]
fn runs_are_deterministic() {
    let spec = ScenarioSpec { duration: 0.3, ..ScenarioSpec::new(ScenarioId::Clutter, ModelId::Sap) };
    assert_eq!(run_scenario(&spec).unwrap(), run_scenario(&spec).unwrap());
}

#[test]
fn cached_runs_are_shared() {
    let spec = ScenarioSpec { duration: 0.05, ..ScenarioSpec::new(ScenarioId::FallingSphere, ModelId::Lagged) };
    let a = run_cached(&spec).unwrap();
    let b = run_cached(&spec).unwrap();
    assert!(Arc::ptr_eq(&a, &b));
    let other = run_cached(&spec.with_dt(1e-3)).unwrap();
    assert!(!Arc::ptr_eq(&a, &other));
}

#[test]
fn spec_keys_round_trip_for_every_scenario() {
    for id in ScenarioId::ALL {
        for model in ModelId::ALL {
            let spec = ScenarioSpec::new(id, model);
            spec.validate().unwrap();
            let mut parsed = ScenarioSpec::new(ScenarioId::Belt, ModelId::Lagged);
            for (k, v) in spec.to_key_values() {
                parsed.set(k, &v).unwrap();
            }
            assert_eq!(parsed, spec);
            assert_eq!(id.as_str().parse::<ScenarioId>().unwrap(), id);
        }
    }
    let mut spec = ScenarioSpec::new(ScenarioId::Belt, ModelId::Lagged);
    assert!(spec.set("stiffness", "1e7").is_err());
    assert!(spec.set("bodies", "-1").is_err());
    assert!(spec.set("condition_numbers", "yes").is_err());
}

#[test]
fn invalid_specs_rejected() {
    let base = ScenarioSpec::new(ScenarioId::Belt, ModelId::Lagged);
    for bad in [
        ScenarioSpec { dt: 0.0, ..base.clone() },
        ScenarioSpec { duration: -1.0, ..base.clone() },
        ScenarioSpec { k: -1.0, ..base.clone() },
        ScenarioSpec { mu: f64::NAN, ..base.clone() },
        ScenarioSpec { size: 0.0, ..base.clone() },
    ] {
        assert!(run_scenario(&bad).is_err(), "{bad:?}");
    }
}

#[test]
fn study_and_window_arguments_validated() {
    let spec = ScenarioSpec { duration: 0.05, ..ScenarioSpec::new(ScenarioId::FallingSphere, ModelId::Lagged) };
    assert!(convergence_study(&spec, &[1e-2], Execution::Sequential).is_err());
    assert!(convergence_study(&spec, &[1e-3, 1e-2], Execution::Sequential).is_err());
    assert!(convergence_study(&spec, &[1e-2, 1e-2], Execution::Sequential).is_err());

    let traj = belt(ModelId::Lagged);
    // the box sticks to the belt for a while around t = 0.2 s
    assert!(gliding_offset(&traj, (0.15, 0.3), 1e-3).is_err());
    assert!(gliding_offset(&traj, (5.0, 6.0), 1e-3).is_err());
    assert!(clutter_metrics(&traj, 0.0).is_err());
    assert!(clutter_metrics(&traj, 10.0).is_err());
}

#[test]
fn position_error_requires_matching_scenarios() {
    let sphere = run_scenario(&ScenarioSpec { duration: 0.05, ..ScenarioSpec::new(ScenarioId::FallingSphere, ModelId::Lagged) }).unwrap();
    let rod = run_scenario(&ScenarioSpec { duration: 1e-4, ..ScenarioSpec::new(ScenarioId::SlidingRod, ModelId::Lagged) }).unwrap();
    assert!(matches!(position_error(&sphere, &rod, 0.05), Err(Error::Mismatch(_))));
    assert!(position_error(&sphere, &sphere, 0.05).unwrap() < 1e-12);
}

#[test]
fn sweep_is_independent_of_execution_mode() {
    let spec = ScenarioSpec { duration: 0.15, bodies: 4, ..ScenarioSpec::new(ScenarioId::Clutter, ModelId::Lagged) };
    let values = [1e5, 1e7];
    let models = [ModelId::Lagged, ModelId::Similar];
    let seq = sweep(&spec, &models, SweepParam::Stiffness, &values, 0.05, Execution::Sequential).unwrap();
    let par = sweep(&spec, &models, SweepParam::Stiffness, &values, 0.05, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let order: Vec<(ModelId, f64)> = seq.iter().map(|e| (e.model, e.value)).collect();
    assert_eq!(order, [(ModelId::Lagged, 1e5), (ModelId::Lagged, 1e7), (ModelId::Similar, 1e5), (ModelId::Similar, 1e7)]);
}

#[test]
fn clutter_spheres_land_and_stay_in_the_box() {
    let spec = ScenarioSpec { duration: 1.0, ..ScenarioSpec::new(ScenarioId::Clutter, ModelId::Lagged) };
    let traj = run_scenario(&spec).unwrap();
    assert!(contact_onset(&traj).is_some());
    let half = 0.5 * spec.box_size;
    let r = 0.5 * spec.size;
    let last = traj.frames.last().unwrap();
    for body in last.q.chunks(7) {
        assert!(body[0].abs() <= half - r + 1e-3 && body[1].abs() <= half - r + 1e-3, "{body:?}");
        assert!(body[2] >= r - 1e-3, "{body:?}");
        let norm: f64 = body[3..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
