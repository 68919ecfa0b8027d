//! CSV and summary rendering.
//!
//! Every CSV starts with `#` comment lines (schema version, then the effective
//! config), followed by the column header row and the data rows. Numbers use
//! `{:.16e}`, i.e. 17 significant digits, which round-trips every `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use irc_core::dynamics::{ContactKey, Dim};
use irc_core::scenarios::{contact_onset, peak_normal_force, ConvergenceTable, ScenarioSpec, SweepEntry, SweepParam, Trajectory};
use irc_core::solver::STOPPING_CRITERION;
use irc_core::validation::ValidationReport;

pub const TRAJECTORY_SCHEMA: &str = "irc-trajectory/1";
pub const STUDY_SCHEMA: &str = "irc-study/1";
pub const SWEEP_SCHEMA: &str = "irc-sweep/1";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn preamble(out: &mut String, schema: &str, spec: &ScenarioSpec) {
    writeln!(out, "# schema={schema}").unwrap();
    for (k, v) in spec.to_key_values() {
        writeln!(out, "# {k}={v}").unwrap();
    }
    writeln!(out, "# stopping_criterion={STOPPING_CRITERION}").unwrap();
}

/// Contact keys in order of first appearance; each gets a fixed column group.
fn contact_slots(traj: &Trajectory) -> BTreeMap<ContactKey, usize> {
    let mut slots = BTreeMap::new();
    for c in traj.frames.iter().flat_map(|f| &f.contacts) {
        let next = slots.len();
        slots.entry(c.key).or_insert(next);
    }
    slots
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    preamble(&mut out, TRAJECTORY_SCHEMA, &traj.spec);
    let slots = contact_slots(traj);
    let mut by_slot: Vec<(&ContactKey, &usize)> = slots.iter().collect();
    by_slot.sort_by_key(|(_, s)| **s);
    for (key, s) in &by_slot {
        writeln!(out, "# contact c{s}: bodies {} {} feature {}", key.a, key.b, key.feature).unwrap();
    }

    let (q_names, v_names): (&[&str], &[&str]) = match traj.dim {
        Dim::Planar => (&["x", "y", "theta"], &["vx", "vy", "omega"]),
        Dim::Spatial => (&["x", "y", "z", "qw", "qx", "qy", "qz"], &["vx", "vy", "vz", "wx", "wy", "wz"]),
    };
    let mut header = vec!["t".to_string()];
    for b in 0..traj.num_bodies() {
        header.extend(q_names.iter().map(|n| format!("b{b}_{n}")));
    }
    for b in 0..traj.num_bodies() {
        header.extend(v_names.iter().map(|n| format!("b{b}_{n}")));
    }
    for s in 0..slots.len() {
        header.extend(["v_n", "v_t", "f_n", "f_t", "eps_s_eff"].iter().map(|n| format!("c{s}_{n}")));
    }
    header.extend(["iters".to_string(), "cond".to_string()]);
    out.push_str(&header.join(","));
    out.push('\n');

    for f in &traj.frames {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(num(f.t));
        row.extend(f.q.iter().map(|x| num(*x)));
        row.extend(f.v.iter().map(|x| num(*x)));
        let mut cells = vec![String::new(); 5 * slots.len()];
        for c in &f.contacts {
            let s = 5 * slots[&c.key];
            for (i, x) in [c.v_n, c.v_t, c.f_n, c.f_t, c.eps_eff].into_iter().enumerate() {
                cells[s + i] = num(x);
            }
        }
        row.extend(cells);
        row.push(f.diagnostics.as_ref().map(|d| d.iterations.to_string()).unwrap_or_default());
        row.push(opt(f.diagnostics.as_ref().and_then(|d| d.condition_number)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn run_summary(traj: &Trajectory) -> String {
    let steps: Vec<usize> = traj.frames.iter().filter_map(|f| f.diagnostics.as_ref()).map(|d| d.iterations).collect();
    let mean_iters = if steps.is_empty() { 0.0 } else { steps.iter().sum::<usize>() as f64 / steps.len() as f64 };
    let last = traj.frames.last().expect("trajectory has an initial frame");
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
    line("scenario", traj.spec.scenario.to_string());
    line("model", traj.spec.model.to_string());
    line("steps", steps.len().to_string());
    line("final_time", num(last.t));
    line("mean_iterations", num(mean_iters));
    line("max_iterations", steps.iter().max().copied().unwrap_or(0).to_string());
    line("max_contacts", traj.max_contacts().to_string());
    line("contact_onset", opt(contact_onset(traj)));
    let peak = peak_normal_force(traj);
    line("peak_normal_force_time", opt(peak.map(|p| p.0)));
    line("peak_normal_force", opt(peak.map(|p| p.1)));
    line("final_kinetic_energy", num(last.kinetic_energy));
    line("final_potential_energy", num(last.potential_energy));
    out
}

pub fn study_csv(spec: &ScenarioSpec, tables: &[ConvergenceTable]) -> String {
    let mut out = String::new();
    preamble(&mut out, STUDY_SCHEMA, spec);
    if let Some(t) = tables.first() {
        writeln!(out, "# reference_model=lagged").unwrap();
        writeln!(out, "# dt_ref={}", num(t.dt_ref)).unwrap();
        writeln!(out, "# horizon={}", num(t.horizon)).unwrap();
    }
    out.push_str("model,dt,e_q,local_order,fitted_order\n");
    for t in tables {
        let local = t.local_orders();
        for (i, r) in t.rows.iter().enumerate() {
            let lo = if i == 0 { String::new() } else { num(local[i - 1]) };
            writeln!(out, "{},{},{},{},{}", t.model, num(r.dt), num(r.error), lo, num(t.order)).unwrap();
        }
    }
    out
}

pub fn sweep_csv(spec: &ScenarioSpec, param: SweepParam, tail: f64, entries: &[SweepEntry]) -> String {
    let mut out = String::new();
    preamble(&mut out, SWEEP_SCHEMA, spec);
    let name = match param {
        SweepParam::Stiffness => "k",
        SweepParam::TimeStep => "dt",
    };
    writeln!(out, "# tail={}", num(tail)).unwrap();
    writeln!(
        out,
        "model,{name},mean_penetration,max_penetration,mean_iterations,mean_iterations_impact,mean_iterations_settled,\
         mean_condition_impact,mean_condition_settled,mean_eps_s_eff,min_eps_s_eff,max_eps_s_eff,final_kinetic_energy"
    )
    .unwrap();
    for e in entries {
        let m = &e.metrics;
        let cells = [
            num(e.value),
            num(m.mean_penetration),
            num(m.max_penetration),
            num(m.mean_iterations),
            num(m.mean_iterations_impact),
            num(m.mean_iterations_settled),
            opt(m.mean_condition_impact),
            opt(m.mean_condition_settled),
            num(m.mean_effective_vs),
            num(if m.min_effective_vs.is_finite() { m.min_effective_vs } else { 0.0 }),
            num(m.max_effective_vs),
            num(m.final_kinetic_energy),
        ];
        writeln!(out, "{},{}", e.model, cells.join(",")).unwrap();
    }
    out
}

/// Report block followed by the acceptance verdict; the naive field is a
/// negative control and gets no verdict.
pub fn validation_block(report: &ValidationReport, verdict: Option<bool>) -> String {
    let mut out = report.to_key_values();
    match verdict {
        Some(pass) => writeln!(out, "pass={pass}").unwrap(),
        None => writeln!(out, "negative_control=true").unwrap(),
    }
    out
}

/// Writes `contents` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
