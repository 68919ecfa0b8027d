//! The benchmark experiments: a box on an oscillating belt, a disk dropped
//! with horizontal speed, a rod sliding at high speed (Painlevé), and spheres
//! falling into a box. Also the measurements taken on their trajectories.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{assemble_problem, Body, ContactKey, ContactMaterial, Dim, Orientation, Prescribed, World};
use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::normal::NormalLaw;
use crate::potentials::{effective_stiction_tolerance, FrictionParams, ModelId};
use crate::solver::{solve_step, SolveOptions};

/// Impact phase boundary used by the clutter metrics, s.
pub const CLUTTER_IMPACT_PHASE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    Belt,
    FallingSphere,
    SlidingRod,
    Clutter,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::Belt, ScenarioId::FallingSphere, ScenarioId::SlidingRod, ScenarioId::Clutter];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::Belt => "belt",
            ScenarioId::FallingSphere => "falling_sphere",
            ScenarioId::SlidingRod => "sliding_rod",
            ScenarioId::Clutter => "clutter",
        }
    }

    pub fn dim(&self) -> Dim {
        match self {
            ScenarioId::Clutter => Dim::Spatial,
            _ => Dim::Planar,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| invalid("scenario", format!("unknown scenario '{s}' (belt|falling_sphere|sliding_rod|clutter)")))
    }
}

/// Flat scenario description. Geometry keys are shared between scenarios:
///
/// | key | belt | falling_sphere | sliding_rod | clutter |
/// |---|---|---|---|---|
/// | `mass` | box | disk | rod | each sphere |
/// | `size` | box side | disk diameter | rod length | sphere diameter |
/// | `height` | — | initial center height | — | drop height of the lowest row |
/// | `speed` | — | initial horizontal speed | initial horizontal speed | — |
/// | `angle_deg` | — | — | initial angle with the ground | — |
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: ScenarioId,
    pub model: ModelId,
    pub dt: f64,
    pub duration: f64,
    pub k: f64,
    pub d: f64,
    pub mu: f64,
    pub v_s: f64,
    pub sigma: f64,
    pub tau_d: f64,
    /// Contact detection margin, m. Must exceed the models' action at a
    /// distance (`μ(δt+τ_d)‖v_t‖` for SAP) or contacts appear too late.
    pub margin: f64,
    pub mass: f64,
    pub size: f64,
    pub height: f64,
    pub speed: f64,
    pub angle_deg: f64,
    /// Belt oscillation amplitude, m.
    pub amplitude: f64,
    /// Belt oscillation frequency, Hz.
    pub frequency: f64,
    /// Clutter body count.
    pub bodies: usize,
    /// Clutter box side, m.
    pub box_size: f64,
    /// Clutter layout jitter seed.
    pub seed: u64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub condition_numbers: bool,
}

impl ScenarioSpec {
    pub fn new(scenario: ScenarioId, model: ModelId) -> Self {
        let base = Self {
            scenario,
            model,
            dt: 0.01,
            duration: 1.0,
            k: 1e7,
            d: 500.0,
            mu: 0.5,
            v_s: 1e-4,
            sigma: 1e-3,
            tau_d: 1e-3,
            margin: 1e-2,
            mass: 1.0,
            size: 0.05,
            height: 0.0,
            speed: 0.0,
            angle_deg: 0.0,
            amplitude: 0.2,
            frequency: 1.0,
            bodies: 12,
            box_size: 0.8,
            seed: 0,
            rel_tol: 1e-5,
            max_iters: 100,
            condition_numbers: false,
        };
        match scenario {
            ScenarioId::Belt => Self { duration: 2.0, mu: 0.7, margin: 2e-2, ..base },
            ScenarioId::FallingSphere => Self { dt: 2e-3, duration: 0.4, mass: 0.5, size: 0.05, height: 0.05, speed: 2.0, ..base },
            ScenarioId::SlidingRod => Self {
                dt: 1e-5,
                duration: 0.05,
                d: 0.2,
                tau_d: 4e-6,
                mu: 2.3,
                margin: 1e-3,
                mass: 0.3,
                size: 0.5,
                speed: 10.0,
                angle_deg: 30.0,
                ..base
            },
            ScenarioId::Clutter => {
                Self { dt: 2e-3, duration: 3.0, d: 10.0, tau_d: 1e-4, mu: 1.0, mass: 0.524, size: 0.1, height: 0.1, ..base }
            }
        }
    }

    pub fn with_model(&self, model: ModelId) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn friction(&self) -> FrictionParams {
        FrictionParams {
            mu: self.mu,
            v_s: self.v_s,
            sigma: self.sigma,
            tau_d: self.tau_d,
            regularize_impacts: self.model.regularizes_impacts(),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_tol: self.rel_tol,
            max_iters: self.max_iters,
            compute_condition_number: self.condition_numbers,
            ..SolveOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {x}")))
            }
        };
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        positive("mass", self.mass)?;
        positive("size", self.size)?;
        if self.steps() == 0 {
            return Err(invalid("duration", "shorter than one time step"));
        }
        if !(self.margin >= 0.0) {
            return Err(invalid("margin", "must be non-negative"));
        }
        NormalLaw::HuntCrossley { k: self.k, d: self.d }.validate()?;
        self.friction().validate()?;
        self.solve_options().validate()?;
        match self.scenario {
            ScenarioId::Belt => {
                positive("frequency", self.frequency)?;
                if !(self.amplitude >= 0.0) {
                    return Err(invalid("amplitude", "must be non-negative"));
                }
            }
            ScenarioId::FallingSphere => {
                if !(self.height >= 0.5 * self.size) {
                    return Err(invalid("height", "disk starts below the ground"));
                }
            }
            ScenarioId::SlidingRod => {
                if !(self.angle_deg > 0.0 && self.angle_deg < 90.0) {
                    return Err(invalid("angle_deg", "must lie in (0, 90)"));
                }
            }
            ScenarioId::Clutter => {
                if self.bodies == 0 || self.bodies > 40 {
                    return Err(invalid("bodies", "clutter supports 1 to 40 spheres"));
                }
                if !(self.box_size > 2.0 * self.size) {
                    return Err(invalid("box_size", "box must be wider than two spheres"));
                }
            }
        }
        Ok(())
    }

    /// Ordered `key=value` lines; parsing them back yields the same spec.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenario", self.scenario.to_string()),
            ("model", self.model.to_string()),
            ("dt", fmt_f64(self.dt)),
            ("duration", fmt_f64(self.duration)),
            ("k", fmt_f64(self.k)),
            ("d", fmt_f64(self.d)),
            ("mu", fmt_f64(self.mu)),
            ("v_s", fmt_f64(self.v_s)),
            ("sigma", fmt_f64(self.sigma)),
            ("tau_d", fmt_f64(self.tau_d)),
            ("margin", fmt_f64(self.margin)),
            ("mass", fmt_f64(self.mass)),
            ("size", fmt_f64(self.size)),
            ("height", fmt_f64(self.height)),
            ("speed", fmt_f64(self.speed)),
            ("angle_deg", fmt_f64(self.angle_deg)),
            ("amplitude", fmt_f64(self.amplitude)),
            ("frequency", fmt_f64(self.frequency)),
            ("bodies", self.bodies.to_string()),
            ("box_size", fmt_f64(self.box_size)),
            ("seed", self.seed.to_string()),
            ("rel_tol", fmt_f64(self.rel_tol)),
            ("max_iters", self.max_iters.to_string()),
            ("condition_numbers", self.condition_numbers.to_string()),
        ]
    }

    /// Sets one key; unknown keys and malformed values are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &'static str, value: &str) -> Result<T> {
            value.trim().parse().map_err(|_| invalid(key, format!("cannot parse '{value}'")))
        }
        match key.trim() {
            "scenario" => self.scenario = value.parse()?,
            "model" => self.model = value.parse()?,
            "dt" => self.dt = num("dt", value)?,
            "duration" => self.duration = num("duration", value)?,
            "k" => self.k = num("k", value)?,
            "d" => self.d = num("d", value)?,
            "mu" => self.mu = num("mu", value)?,
            "v_s" => self.v_s = num("v_s", value)?,
            "sigma" => self.sigma = num("sigma", value)?,
            "tau_d" => self.tau_d = num("tau_d", value)?,
            "margin" => self.margin = num("margin", value)?,
            "mass" => self.mass = num("mass", value)?,
            "size" => self.size = num("size", value)?,
            "height" => self.height = num("height", value)?,
            "speed" => self.speed = num("speed", value)?,
            "angle_deg" => self.angle_deg = num("angle_deg", value)?,
            "amplitude" => self.amplitude = num("amplitude", value)?,
            "frequency" => self.frequency = num("frequency", value)?,
            "bodies" => self.bodies = num("bodies", value)?,
            "box_size" => self.box_size = num("box_size", value)?,
            "seed" => self.seed = num("seed", value)?,
            "rel_tol" => self.rel_tol = num("rel_tol", value)?,
            "max_iters" => self.max_iters = num("max_iters", value)?,
            "condition_numbers" => self.condition_numbers = num("condition_numbers", value)?,
            other => return Err(invalid("key", format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Cache key covering every field.
    fn cache_key(&self) -> String {
        self.to_key_values().into_iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

/// Shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Builds the initial world of a scenario.
pub fn build_world(spec: &ScenarioSpec) -> Result<World> {
    spec.validate()?;
    let dim = spec.scenario.dim();
    let material = ContactMaterial { k: spec.k, d: spec.d, friction: spec.friction() };
    let mut world = World::new(dim, material);
    world.margin = spec.margin;
    let g = world.gravity;
    match spec.scenario {
        ScenarioId::Belt => {
            let belt = Prescribed::Oscillation { axis: Vector3::x(), amplitude: spec.amplitude, frequency: spec.frequency };
            world.add(Body::half_space(dim, Vector3::y(), 0.0, belt));
            let half = 0.5 * spec.size;
            // corners start at their frictionless equilibrium penetration
            let sink = spec.mass * g / (2.0 * spec.k);
            world.add(Body::rectangle(spec.mass, half, half, Vector3::new(0.0, half - sink, 0.0)));
        }
        ScenarioId::FallingSphere => {
            world.add(Body::half_space(dim, Vector3::y(), 0.0, Prescribed::Fixed));
            let disk = Body::disk(spec.mass, 0.5 * spec.size, Vector3::new(0.0, spec.height, 0.0));
            world.add(disk.with_velocity(Vector3::new(spec.speed, 0.0, 0.0), Vector3::zeros()));
        }
        ScenarioId::SlidingRod => {
            world.add(Body::half_space(dim, Vector3::y(), 0.0, Prescribed::Fixed));
            let phi = spec.angle_deg.to_radians();
            let com = Vector3::new(0.0, 0.5 * spec.size * phi.sin(), 0.0);
            // body x axis points to the lower, leading endpoint
            let rod = Body::rod(spec.mass, spec.size, com, -phi);
            world.add(rod.with_velocity(Vector3::new(spec.speed, 0.0, 0.0), Vector3::zeros()));
        }
        ScenarioId::Clutter => {
            world.add(Body::half_space(dim, Vector3::z(), 0.0, Prescribed::Fixed));
            let half = 0.5 * spec.box_size;
            for n in [Vector3::x(), -Vector3::x(), Vector3::y(), -Vector3::y()] {
                world.add(Body::half_space(dim, n, -half, Prescribed::Fixed));
            }
            for p in clutter_layout(spec) {
                world.add(Body::sphere(spec.mass, 0.5 * spec.size, p));
            }
        }
    }
    Ok(world)
}

/// Columns of four spheres with seeded horizontal jitter.
fn clutter_layout(spec: &ScenarioSpec) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_column = 4;
    let columns = spec.bodies.div_ceil(per_column);
    let r = 0.5 * spec.size;
    let spacing = spec.box_size / (columns as f64 + 1.0);
    let jitter = 0.2 * r;
    (0..spec.bodies)
        .map(|i| {
            let (col, row) = (i / per_column, i % per_column);
            let x = -0.5 * spec.box_size + spacing * (col as f64 + 1.0);
            let z = spec.height + r + row as f64 * 2.4 * r;
            Vector3::new(x + rng.gen_range(-jitter..jitter), rng.gen_range(-jitter..jitter), z)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSample {
    pub key: ContactKey,
    pub v_n: f64,
    /// `‖v_t‖`.
    pub v_t: f64,
    /// Normal force `γ_n/δt`, N.
    pub f_n: f64,
    /// `‖γ_t‖/δt`, N.
    pub f_t: f64,
    /// Penetration at the start of the step.
    pub x0: f64,
    pub eps_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub condition_number: Option<f64>,
    pub gradient_norm: f64,
}

/// State after a step together with the contacts solved during it.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    /// Per free body: planar `(x, y, θ)`, spatial `(x, y, z, q_w, q_x, q_y, q_z)`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub contacts: Vec<ContactSample>,
    pub diagnostics: Option<StepDiagnostics>,
    pub kinetic_energy: f64,
    pub potential_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: ScenarioSpec,
    pub dim: Dim,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn coords_per_body(&self) -> usize {
        match self.dim {
            Dim::Planar => 3,
            Dim::Spatial => 7,
        }
    }

    pub fn num_bodies(&self) -> usize {
        self.frames.first().map_or(0, |f| f.q.len() / self.coords_per_body())
    }

    /// Largest number of simultaneous contacts.
    pub fn max_contacts(&self) -> usize {
        self.frames.iter().map(|f| f.contacts.len()).max().unwrap_or(0)
    }
}

fn pose_coords(world: &World) -> Vec<f64> {
    let mut q = Vec::new();
    for b in world.bodies.iter().filter(|b| b.is_free()) {
        match b.orientation {
            Orientation::Planar(angle) => q.extend([b.position.x, b.position.y, angle]),
            Orientation::Spatial(r) => {
                q.extend(b.position.iter());
                q.extend([r.w, r.i, r.j, r.k]);
            }
        }
    }
    q
}

fn frame_of(world: &World, contacts: Vec<ContactSample>, diagnostics: Option<StepDiagnostics>) -> Frame {
    Frame {
        t: world.time,
        q: pose_coords(world),
        v: world.velocities().iter().copied().collect(),
        contacts,
        diagnostics,
        kinetic_energy: world.kinetic_energy(),
        potential_energy: world.potential_energy(),
    }
}

/// Runs a scenario to completion. Any step that fails to converge aborts the
/// run with its index.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Trajectory> {
    let mut world = build_world(spec)?;
    let opts = spec.solve_options();
    let dt = spec.dt;
    let mut frames = Vec::with_capacity(spec.steps() + 1);
    frames.push(frame_of(&world, Vec::new(), None));
    for step in 0..spec.steps() {
        let problem = assemble_problem(&world, dt, spec.model)?;
        let sol = solve_step(&problem, spec.model, &opts)?;
        if !sol.converged {
            return Err(Error::NonConvergence { step, time: world.time, iterations: sol.iterations, residual: sol.gradient_norm });
        }
        let mut impulses = HashMap::with_capacity(problem.contacts.len());
        let mut samples = Vec::with_capacity(problem.contacts.len());
        for (c, gamma) in problem.contacts.iter().zip(&sol.impulses) {
            let k = &c.kinematics;
            let v_c: DVector<f64> = &k.jacobian * &sol.v + &k.bias;
            let m = c.data.tangent_dim();
            let gamma_n = gamma[m];
            impulses.insert(k.key, gamma_n);
            samples.push(ContactSample {
                key: k.key,
                v_n: v_c[m],
                v_t: v_c.rows(0, m).norm(),
                f_n: gamma_n / dt,
                f_t: gamma.rows(0, m).norm() / dt,
                x0: k.x0,
                eps_eff: effective_stiction_tolerance(spec.model.contact_model(), &c.data, gamma_n),
            });
        }
        world.advance(&sol.v, dt, impulses);
        let diagnostics =
            StepDiagnostics { iterations: sol.iterations, condition_number: sol.condition_number, gradient_norm: sol.gradient_norm };
        frames.push(frame_of(&world, samples, Some(diagnostics)));
    }
    Ok(Trajectory { spec: spec.clone(), dim: spec.scenario.dim(), frames })
}

fn reference_cache() -> &'static Mutex<HashMap<String, Arc<Trajectory>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<Trajectory>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Runs `spec`, reusing an earlier identical run from this process.
pub fn run_cached(spec: &ScenarioSpec) -> Result<Arc<Trajectory>> {
    let key = spec.cache_key();
    if let Some(t) = reference_cache().lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(t));
    }
    let traj = Arc::new(run_scenario(spec)?);
    reference_cache().lock().expect("cache lock").insert(key, Arc::clone(&traj));
    Ok(traj)
}

/// Reference spec for a convergence study: Lagged at `δt_ref`.
pub fn reference_spec(spec: &ScenarioSpec, dt_ref: f64) -> ScenarioSpec {
    ScenarioSpec { model: ModelId::Lagged, dt: dt_ref, ..spec.clone() }
}

fn interpolate(traj: &Trajectory, t: f64) -> Vec<f64> {
    let frames = &traj.frames;
    let dt = traj.spec.dt;
    let pos = (t / dt).clamp(0.0, (frames.len() - 1) as f64);
    let i = (pos.floor() as usize).min(frames.len().saturating_sub(2));
    let s = pos - i as f64;
    let (a, b) = (&frames[i].q, &frames[(i + 1).min(frames.len() - 1)].q);
    let mut q: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
    if traj.dim == Dim::Spatial {
        // renormalize interpolated quaternions
        for body in q.chunks_mut(7) {
            let n = body[3..7].iter().map(|x| x * x).sum::<f64>().sqrt();
            body[3..7].iter_mut().for_each(|x| *x /= n);
        }
    }
    q
}

fn pose_distance_sq(dim: Dim, a: &[f64], b: &[f64]) -> f64 {
    match dim {
        Dim::Planar => {
            a.chunks(3).zip(b.chunks(3)).map(|(p, r)| (p[0] - r[0]).powi(2) + (p[1] - r[1]).powi(2) + (p[2] - r[2]).powi(2)).sum()
        }
        Dim::Spatial => a
            .chunks(7)
            .zip(b.chunks(7))
            .map(|(p, r)| {
                let dx: f64 = (0..3).map(|i| (p[i] - r[i]).powi(2)).sum();
                let dot: f64 = (3..7).map(|i| p[i] * r[i]).sum::<f64>().abs().min(1.0);
                let angle = 2.0 * dot.acos();
                dx + angle * angle
            })
            .sum(),
    }
}

/// `e_q = (1/T ∫₀ᵀ ‖q − q_ref‖² dt)^{1/2}` by the trapezoid rule on the
/// coarse samples, with the reference interpolated linearly.
pub fn position_error(traj: &Trajectory, reference: &Trajectory, horizon: f64) -> Result<f64> {
    let (a, b) = (&traj.spec, &reference.spec);
    if a.scenario != b.scenario || traj.num_bodies() != reference.num_bodies() || traj.dim != reference.dim {
        return Err(Error::Mismatch(format!("cannot compare {} with {}", a.scenario, b.scenario)));
    }
    let last_ref = reference.frames.last().map_or(0.0, |f| f.t);
    let last = traj.frames.last().map_or(0.0, |f| f.t);
    if !(horizon > 0.0) || horizon > last_ref + 1e-9 || horizon > last + 1e-9 {
        return Err(invalid("horizon", format!("{horizon} s exceeds the trajectories")));
    }
    let errs: Vec<(f64, f64)> = traj
        .frames
        .iter()
        .take_while(|f| f.t <= horizon + 1e-12)
        .map(|f| (f.t, pose_distance_sq(traj.dim, &f.q, &interpolate(reference, f.t))))
        .collect();
    let integral: f64 = errs.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    let span = errs.last().map_or(0.0, |e| e.0) - errs.first().map_or(0.0, |e| e.0);
    if span <= 0.0 {
        return Ok(errs.first().map_or(0.0, |e| e.1.sqrt()));
    }
    Ok((integral / span).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub model: ModelId,
    pub dt_ref: f64,
    pub horizon: f64,
    /// Sorted by descending `δt`.
    pub rows: Vec<ConvergenceRow>,
    pub order: f64,
}

impl ConvergenceTable {
    /// Observed order between consecutive ladder entries.
    pub fn local_orders(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| fitted_order(&[(w[0].dt, w[0].error), (w[1].dt, w[1].error)])).collect()
    }
}

/// Error of `spec.model` at each step of `ladder` against a Lagged reference at
/// a ten times smaller step.
pub fn convergence_study(spec: &ScenarioSpec, ladder: &[f64], exec: Execution) -> Result<ConvergenceTable> {
    if ladder.len() < 2 {
        return Err(invalid("ladder", "at least two time steps are required"));
    }
    if ladder.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("ladder", "time steps must be sorted in descending order"));
    }
    let dt_ref = ladder[ladder.len() - 1] / 10.0;
    let reference = run_cached(&reference_spec(spec, dt_ref))?;
    let runs = exec::map(exec, ladder, |&dt| run_scenario(&spec.with_dt(dt)));
    let horizon = spec.duration;
    let mut rows = Vec::with_capacity(ladder.len());
    for (dt, run) in ladder.iter().zip(runs) {
        let traj = run?;
        rows.push(ConvergenceRow { dt: *dt, error: position_error(&traj, &reference, horizon)? });
    }
    let order = fitted_order(&rows.iter().map(|r| (r.dt, r.error)).collect::<Vec<_>>());
    Ok(ConvergenceTable { model: spec.model, dt_ref, horizon, rows, order })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlidingOffset {
    /// Mean of `f_n/k − (x0 − δt·v_n)` over the window's contact samples.
    pub measured: f64,
    /// Model prediction averaged over the same samples.
    pub predicted: f64,
    /// `μ·δt·‖v_t‖` averaged over the samples (scale for the Lagged bound).
    pub scale: f64,
    pub samples: usize,
}

/// Offset between the frictionless equilibrium penetration and the observed
/// one during steady sliding. Windows containing contact samples slower than
/// `min_slip` are rejected.
pub fn gliding_offset(traj: &Trajectory, window: (f64, f64), min_slip: f64) -> Result<GlidingOffset> {
    let spec = &traj.spec;
    let dt = spec.dt;
    let (mut measured, mut predicted, mut scale, mut n) = (0.0, 0.0, 0.0, 0usize);
    for f in traj.frames.iter().filter(|f| f.t >= window.0 && f.t <= window.1) {
        for c in f.contacts.iter().filter(|c| c.f_n > 0.0) {
            if c.v_t < min_slip {
                return Err(invalid("window", format!("contains stiction samples (t = {}, ‖v_t‖ = {:e})", f.t, c.v_t)));
            }
            let x_eq = c.f_n / spec.k;
            let x_obs = c.x0 - dt * c.v_n;
            measured += x_eq - x_obs;
            scale += spec.mu * dt * c.v_t;
            predicted += match spec.model {
                ModelId::Sap => spec.mu * (dt + spec.tau_d) * c.v_t,
                ModelId::Similar => spec.mu * dt * c.v_t,
                ModelId::Lagged | ModelId::LaggedRegularized => 0.0,
            };
            n += 1;
        }
    }
    if n == 0 {
        return Err(invalid("window", "no active contacts in the window"));
    }
    let n_f = n as f64;
    Ok(GlidingOffset { measured: measured / n_f, predicted: predicted / n_f, scale: scale / n_f, samples: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterMetrics {
    /// Mean positive penetration over the tail window.
    pub mean_penetration: f64,
    pub max_penetration: f64,
    /// Mean Newton iterations per step over the whole run.
    pub mean_iterations: f64,
    pub mean_iterations_impact: f64,
    pub mean_iterations_settled: f64,
    pub mean_condition_impact: Option<f64>,
    pub mean_condition_settled: Option<f64>,
    /// Mean effective stiction tolerance over active contacts.
    pub mean_effective_vs: f64,
    pub min_effective_vs: f64,
    pub max_effective_vs: f64,
    pub final_kinetic_energy: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn clutter_metrics(traj: &Trajectory, tail: f64) -> Result<ClutterMetrics> {
    let end = traj.frames.last().map_or(0.0, |f| f.t);
    if !(tail > 0.0 && tail <= end + 1e-12) {
        return Err(invalid("tail", format!("must lie in (0, {end}]")));
    }
    let t0 = end - tail;
    let tail_pen = || traj.frames.iter().filter(move |f| f.t > t0).flat_map(|f| f.contacts.iter()).filter(|c| c.x0 > 0.0).map(|c| c.x0);
    let steps = |impact: bool| traj.frames.iter().filter(move |f| f.diagnostics.is_some() && ((f.t < CLUTTER_IMPACT_PHASE) == impact));
    let iters = |impact: bool| mean(steps(impact).map(|f| f.diagnostics.as_ref().expect("diagnostics").iterations as f64)).unwrap_or(0.0);
    let conds = |impact: bool| mean(steps(impact).filter_map(|f| f.diagnostics.as_ref().and_then(|d| d.condition_number)));
    let active = || traj.frames.iter().flat_map(|f| f.contacts.iter()).filter(|c| c.f_n > 0.0).map(|c| c.eps_eff);
    Ok(ClutterMetrics {
        mean_penetration: mean(tail_pen()).unwrap_or(0.0),
        max_penetration: tail_pen().fold(0.0, f64::max),
        mean_iterations: mean(traj.frames.iter().filter_map(|f| f.diagnostics.as_ref()).map(|d| d.iterations as f64)).unwrap_or(0.0),
        mean_iterations_impact: iters(true),
        mean_iterations_settled: iters(false),
        mean_condition_impact: conds(true),
        mean_condition_settled: conds(false),
        mean_effective_vs: mean(active()).unwrap_or(0.0),
        min_effective_vs: active().fold(f64::INFINITY, f64::min),
        max_effective_vs: active().fold(0.0, f64::max),
        final_kinetic_energy: traj.frames.last().map_or(0.0, |f| f.kinetic_energy),
    })
}

/// Parameter varied by a clutter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Stiffness,
    TimeStep,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "k" | "stiffness" => Ok(SweepParam::Stiffness),
            "dt" | "time_step" => Ok(SweepParam::TimeStep),
            other => Err(invalid("param", format!("unknown sweep parameter '{other}' (k|dt)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub model: ModelId,
    pub value: f64,
    pub metrics: ClutterMetrics,
}

/// Runs every `(model, value)` combination concurrently.
pub fn sweep(
    spec: &ScenarioSpec,
    models: &[ModelId],
    param: SweepParam,
    values: &[f64],
    tail: f64,
    exec: Execution,
) -> Result<Vec<SweepEntry>> {
    let jobs: Vec<(ModelId, f64)> = models.iter().flat_map(|m| values.iter().map(move |v| (*m, *v))).collect();
    let results = exec::map(exec, &jobs, |&(model, value)| -> Result<SweepEntry> {
        let mut s = spec.with_model(model);
        match param {
            SweepParam::Stiffness => s.k = value,
            SweepParam::TimeStep => s.dt = value,
        }
        let traj = run_scenario(&s)?;
        Ok(SweepEntry { model, value, metrics: clutter_metrics(&traj, tail)? })
    });
    results.into_iter().collect()
}

/// Time of the first frame with a positive normal force.
pub fn contact_onset(traj: &Trajectory) -> Option<f64> {
    traj.frames.iter().find(|f| f.contacts.iter().any(|c| c.f_n > 0.0)).map(|f| f.t)
}

/// First time after contact onset at which an active contact slips slower
/// than `threshold`.
pub fn slide_to_roll(traj: &Trajectory, threshold: f64) -> Option<f64> {
    let onset = contact_onset(traj)?;
    traj.frames.iter().filter(|f| f.t > onset).find(|f| f.contacts.iter().any(|c| c.f_n > 0.0 && c.v_t < threshold)).map(|f| f.t)
}

/// Largest normal force over all contacts and its time.
pub fn peak_normal_force(traj: &Trajectory) -> Option<(f64, f64)> {
    traj.frames.iter().flat_map(|f| f.contacts.iter().map(move |c| (f.t, c.f_n))).max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Sum of the normal forces at each frame.
pub fn normal_force_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.frames.iter().skip(1).map(|f| (f.t, f.contacts.iter().map(|c| c.f_n).sum())).collect()
}

/// Longest contiguous run of frames whose active contact slips slower than
/// `threshold`, in seconds.
pub fn stiction_dwell(traj: &Trajectory, threshold: f64) -> f64 {
    let dt = traj.spec.dt;
    let mut best = 0usize;
    let mut run = 0usize;
    for f in traj.frames.iter().skip(1) {
        let sticking = f.contacts.iter().any(|c| c.f_n > 0.0 && c.v_t < threshold);
        run = if sticking { run + 1 } else { 0 };
        best = best.max(run);
    }
    best as f64 * dt
}

/// Time after the force peak at which the contact force vanishes for good.
pub fn liftoff_after_peak(traj: &Trajectory) -> Option<f64> {
    let (t_peak, _) = peak_normal_force(traj)?;
    let series = normal_force_series(traj);
    let after: Vec<&(f64, f64)> = series.iter().filter(|(t, _)| *t > t_peak).collect();
    let last_active = after.iter().rposition(|(_, f)| *f > 0.0);
    match last_active {
        Some(i) if i + 1 < after.len() => Some(after[i + 1].0),
        Some(_) => None,
        None => after.first().map(|(t, _)| *t),
    }
}

/// Kinetic energy relative drift `(max − min)/mean` over `[t0, t1]`.
pub fn kinetic_energy_drift(traj: &Trajectory, t0: f64, t1: f64) -> Option<f64> {
    let ke: Vec<f64> = traj.frames.iter().filter(|f| f.t >= t0 && f.t <= t1).map(|f| f.kinetic_energy).collect();
    let avg = mean(ke.iter().copied())?;
    let (lo, hi) = ke.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    Some((hi - lo) / avg)
}

/// Unit quaternion of a spatial body from its pose coordinates.
pub fn quaternion_of(q: &[f64]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[4], q[5], q[6]))
}
