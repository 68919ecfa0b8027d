//! Rigid bodies, contact kinematics and assembly of the per-step convex
//! problem.
//!
//! Planar worlds live in the `xy` plane with gravity along `−y` and three
//! velocity DOFs per free body `(v_x, v_y, ω_z)`. Spatial worlds use gravity
//! along `−z` and six DOFs `(v, ω)` with `ω` in the world frame. All vectors
//! are stored as 3-vectors; planar bodies keep `z = 0`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};

use crate::collision::{self, ContactPoint, Plane, Shape};
use crate::error::{invalid, Error, Result};
use crate::normal::{DiscreteNormal, NormalLaw};
use crate::potentials::{ContactData, FrictionParams, ModelId};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Planar,
    Spatial,
}

impl Dim {
    /// Contact-space dimension.
    pub fn contact_dim(&self) -> usize {
        match self {
            Dim::Planar => 2,
            Dim::Spatial => 3,
        }
    }

    pub fn dofs_per_body(&self) -> usize {
        match self {
            Dim::Planar => 3,
            Dim::Spatial => 6,
        }
    }

    pub fn up(&self) -> Vector3<f64> {
        match self {
            Dim::Planar => Vector3::y(),
            Dim::Spatial => Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    Planar(f64),
    Spatial(UnitQuaternion<f64>),
}

impl Orientation {
    pub fn rotation(&self) -> Matrix3<f64> {
        match self {
            Orientation::Planar(angle) => {
                let (s, c) = angle.sin_cos();
                Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
            }
            Orientation::Spatial(q) => q.to_rotation_matrix().into_inner(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inertia {
    Planar(f64),
    /// Body-frame inertia tensor.
    Spatial(Matrix3<f64>),
}

/// Kinematically driven motion, displacement measured from the initial pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prescribed {
    Fixed,
    /// `u(t) = A·(1 − cos 2πft)` along `axis`; starts at rest.
    Oscillation {
        axis: Vector3<f64>,
        amplitude: f64,
        frequency: f64,
    },
}

impl Prescribed {
    pub fn displacement(&self, t: f64) -> Vector3<f64> {
        match *self {
            Prescribed::Fixed => Vector3::zeros(),
            Prescribed::Oscillation { axis, amplitude, frequency } => {
                axis * amplitude * (1.0 - (std::f64::consts::TAU * frequency * t).cos())
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        match *self {
            Prescribed::Fixed => Vector3::zeros(),
            Prescribed::Oscillation { axis, amplitude, frequency } => {
                let omega = std::f64::consts::TAU * frequency;
                axis * amplitude * omega * (omega * t).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Free,
    Prescribed { motion: Prescribed, origin: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub shape: Shape,
    pub mass: f64,
    pub inertia: Inertia,
    pub position: Vector3<f64>,
    pub orientation: Orientation,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub motion: Motion,
}

impl Body {
    /// Disk with inertia `½mr²`.
    pub fn disk(mass: f64, radius: f64, position: Vector3<f64>) -> Self {
        Self::free(Shape::Sphere { radius }, mass, Inertia::Planar(0.5 * mass * radius * radius), position, Orientation::Planar(0.0))
    }

    /// Solid sphere with inertia `⅖mr²`.
    pub fn sphere(mass: f64, radius: f64, position: Vector3<f64>) -> Self {
        let i = 0.4 * mass * radius * radius;
        Self::free(
            Shape::Sphere { radius },
            mass,
            Inertia::Spatial(Matrix3::from_diagonal_element(i)),
            position,
            Orientation::Spatial(UnitQuaternion::identity()),
        )
    }

    /// Planar rectangle of width `2h_x` and height `2h_y`.
    pub fn rectangle(mass: f64, half_width: f64, half_height: f64, position: Vector3<f64>) -> Self {
        let i = mass * (half_width * half_width + half_height * half_height) / 3.0;
        Self::free(
            Shape::Box { half_extents: Vector3::new(half_width, half_height, half_width.min(half_height)) },
            mass,
            Inertia::Planar(i),
            position,
            Orientation::Planar(0.0),
        )
    }

    /// Slender planar rod with inertia `mL²/12`.
    pub fn rod(mass: f64, length: f64, position: Vector3<f64>, angle: f64) -> Self {
        Self::free(Shape::Rod { length }, mass, Inertia::Planar(mass * length * length / 12.0), position, Orientation::Planar(angle))
    }

    fn free(shape: Shape, mass: f64, inertia: Inertia, position: Vector3<f64>, orientation: Orientation) -> Self {
        Self {
            shape,
            mass,
            inertia,
            position,
            orientation,
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            motion: Motion::Free,
        }
    }

    /// Half-space `normal·p ≤ offset`, fixed or driven tangentially.
    pub fn half_space(dim: Dim, normal: Vector3<f64>, offset: f64, motion: Prescribed) -> Self {
        let orientation = match dim {
            Dim::Planar => Orientation::Planar(0.0),
            Dim::Spatial => Orientation::Spatial(UnitQuaternion::identity()),
        };
        Self {
            shape: Shape::HalfSpace { normal, offset },
            mass: 0.0,
            inertia: Inertia::Planar(0.0),
            position: Vector3::zeros(),
            orientation,
            velocity: motion.velocity(0.0),
            angular_velocity: Vector3::zeros(),
            motion: Motion::Prescribed { motion, origin: Vector3::zeros() },
        }
    }

    pub fn with_velocity(mut self, v: Vector3<f64>, omega: Vector3<f64>) -> Self {
        self.velocity = v;
        self.angular_velocity = omega;
        self
    }

    pub fn is_free(&self) -> bool {
        matches!(self.motion, Motion::Free)
    }

    /// World-frame rotational inertia at the current pose.
    pub fn world_inertia(&self) -> Matrix3<f64> {
        match self.inertia {
            Inertia::Planar(i) => Matrix3::from_diagonal_element(i),
            Inertia::Spatial(ib) => {
                let r = self.orientation.rotation();
                r * ib * r.transpose()
            }
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        if !self.is_free() {
            return 0.0;
        }
        let rot = match self.inertia {
            Inertia::Planar(i) => i * self.angular_velocity.z * self.angular_velocity.z,
            Inertia::Spatial(_) => self.angular_velocity.dot(&(self.world_inertia() * self.angular_velocity)),
        };
        0.5 * (self.mass * self.velocity.norm_squared() + rot)
    }

    fn plane(&self) -> Option<Plane> {
        match self.shape {
            Shape::HalfSpace { normal, offset } => {
                let n = self.orientation.rotation() * normal;
                Some(Plane::new(n, offset + n.dot(&self.position)))
            }
            _ => None,
        }
    }

    fn validate(&self, dim: Dim) -> Result<()> {
        self.shape.validate()?;
        match (self.orientation, dim) {
            (Orientation::Planar(_), Dim::Planar) | (Orientation::Spatial(_), Dim::Spatial) => {}
            _ => return Err(invalid("orientation", "body orientation does not match the world dimension")),
        }
        if self.is_free() {
            if !(self.mass > 0.0 && self.mass.is_finite()) {
                return Err(invalid("mass", format!("free bodies need positive mass, got {}", self.mass)));
            }
            let spd = match (self.inertia, dim) {
                (Inertia::Planar(i), Dim::Planar) => i > 0.0,
                (Inertia::Spatial(m), Dim::Spatial) => m.cholesky().is_some(),
                _ => false,
            };
            if !spd {
                return Err(invalid("inertia", "free bodies need SPD inertia matching the world dimension"));
            }
            if matches!(self.shape, Shape::HalfSpace { .. }) {
                return Err(invalid("shape", "half-spaces must be prescribed"));
            }
        }
        Ok(())
    }
}

/// Advances a free body's pose with the first-order kinematic map.
pub fn advance_state(body: &Body, v_next: &Vector3<f64>, omega_next: &Vector3<f64>, dt: f64) -> Body {
    let mut b = body.clone();
    b.velocity = *v_next;
    b.angular_velocity = *omega_next;
    b.position += dt * v_next;
    b.orientation = match body.orientation {
        Orientation::Planar(angle) => Orientation::Planar(angle + dt * omega_next.z),
        Orientation::Spatial(q) => {
            let q = q.into_inner();
            let w = nalgebra::Quaternion::from_imag(*omega_next);
            Orientation::Spatial(UnitQuaternion::from_quaternion(q + (w * q) * (0.5 * dt)))
        }
    };
    b
}

/// Contact material shared by every contact of a world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactMaterial {
    pub k: f64,
    pub d: f64,
    pub friction: FrictionParams,
}

/// Identifies a contact across steps: body `a`, body `b` and a geometric
/// feature id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContactKey {
    pub a: usize,
    pub b: usize,
    pub feature: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub key: ContactKey,
    pub geometry: ContactPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactKinematics {
    pub key: ContactKey,
    /// Rows `t1, (t2), n` in world coordinates.
    pub frame: Vec<Vector3<f64>>,
    /// `dim × n_v` block with `v_c = J v + b`.
    pub jacobian: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub x0: f64,
    pub point: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemContact {
    pub kinematics: ContactKinematics,
    pub data: ContactData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepProblem {
    pub a: DMatrix<f64>,
    pub v0: DVector<f64>,
    pub v_star: DVector<f64>,
    pub contacts: Vec<ProblemContact>,
    pub dt: f64,
}

impl StepProblem {
    pub fn num_dofs(&self) -> usize {
        self.a.nrows()
    }
}

/// Tangent rows completing `n` to a right-handed frame.
pub fn contact_frame(dim: Dim, n: &Vector3<f64>) -> Vec<Vector3<f64>> {
    match dim {
        Dim::Planar => vec![Vector3::new(n.y, -n.x, 0.0), *n],
        Dim::Spatial => {
            let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let t1 = (seed - seed.dot(n) * n).normalize();
            let t2 = n.cross(&t1);
            vec![t1, t2, *n]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub dim: Dim,
    pub bodies: Vec<Body>,
    pub gravity: f64,
    pub material: ContactMaterial,
    /// Contacts are created once the gap falls below this distance.
    pub margin: f64,
    pub time: f64,
    /// Normal impulse of each contact at the previous step.
    pub previous: HashMap<ContactKey, f64>,
}

impl World {
    pub fn new(dim: Dim, material: ContactMaterial) -> Self {
        Self { dim, bodies: Vec::new(), gravity: GRAVITY, material, margin: collision::DEFAULT_MARGIN, time: 0.0, previous: HashMap::new() }
    }

    pub fn add(&mut self, body: Body) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.bodies {
            b.validate(self.dim)?;
        }
        if !(self.margin >= 0.0) {
            return Err(invalid("margin", "detection margin must be non-negative"));
        }
        NormalLaw::HuntCrossley { k: self.material.k, d: self.material.d }.validate()?;
        self.material.friction.validate()
    }

    /// Velocity-DOF offset of each free body.
    pub fn dof_offsets(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.bodies
            .iter()
            .map(|b| {
                b.is_free().then(|| {
                    let o = next;
                    next += self.dim.dofs_per_body();
                    o
                })
            })
            .collect()
    }

    pub fn num_dofs(&self) -> usize {
        self.bodies.iter().filter(|b| b.is_free()).count() * self.dim.dofs_per_body()
    }

    /// Stacked generalized velocity of the free bodies.
    pub fn velocities(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.num_dofs());
        for (b, o) in self.bodies.iter().zip(self.dof_offsets()) {
            if let Some(o) = o {
                self.write_dofs(&mut v, o, &b.velocity, &b.angular_velocity);
            }
        }
        v
    }

    fn write_dofs(&self, v: &mut DVector<f64>, o: usize, lin: &Vector3<f64>, ang: &Vector3<f64>) {
        match self.dim {
            Dim::Planar => {
                v[o] = lin.x;
                v[o + 1] = lin.y;
                v[o + 2] = ang.z;
            }
            Dim::Spatial => {
                v.rows_mut(o, 3).copy_from(lin);
                v.rows_mut(o + 3, 3).copy_from(ang);
            }
        }
    }

    fn read_dofs(&self, v: &DVector<f64>, o: usize) -> (Vector3<f64>, Vector3<f64>) {
        match self.dim {
            Dim::Planar => (Vector3::new(v[o], v[o + 1], 0.0), Vector3::new(0.0, 0.0, v[o + 2])),
            Dim::Spatial => (v.fixed_rows::<3>(o).into_owned(), v.fixed_rows::<3>(o + 3).into_owned()),
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(Body::kinetic_energy).sum()
    }

    pub fn potential_energy(&self) -> f64 {
        let up = self.dim.up();
        self.bodies.iter().filter(|b| b.is_free()).map(|b| b.mass * self.gravity * b.position.dot(&up)).sum()
    }

    /// All-pairs narrow phase with bounding-sphere pruning.
    pub fn detect(&self) -> Vec<Contact> {
        let mut out = Vec::new();
        let n = self.bodies.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (&self.bodies[i], &self.bodies[j]);
                if !a.is_free() {
                    continue;
                }
                // free pairs are visited once, with a the lower index
                if b.is_free() && j < i {
                    continue;
                }
                let reach = a.shape.bounding_radius() + b.shape.bounding_radius() + self.margin;
                if reach.is_finite() && (a.position - b.position).norm() > reach {
                    continue;
                }
                for geometry in self.pair(a, b) {
                    out.push(Contact { key: ContactKey { a: i, b: j, feature: geometry.feature }, geometry });
                }
            }
        }
        out
    }

    fn pair(&self, a: &Body, b: &Body) -> Vec<ContactPoint> {
        let margin = self.margin;
        let rot = a.orientation.rotation();
        match (a.shape, b.shape, b.plane()) {
            (Shape::Sphere { radius }, _, Some(plane)) => {
                collision::sphere_halfspace(&a.position, radius, &plane, margin).into_iter().collect()
            }
            (Shape::Box { half_extents }, _, Some(plane)) => {
                collision::box_halfspace_corners(&a.position, &rot, &half_extents, self.dim == Dim::Planar, &plane, margin)
            }
            (Shape::Rod { length }, _, Some(plane)) => {
                collision::rod_endpoint_halfspace(&a.position, &rot, length, &plane, margin).into_iter().collect()
            }
            (Shape::Sphere { radius: ra }, Shape::Sphere { radius: rb }, None) => {
                collision::sphere_sphere(&a.position, ra, &b.position, rb, margin, &self.dim.up()).into_iter().collect()
            }
            _ => Vec::new(),
        }
    }

    /// Velocity of a prescribed (translating) body at time `t`.
    fn prescribed_point_velocity(&self, body: &Body, t: f64) -> Vector3<f64> {
        match body.motion {
            Motion::Prescribed { motion, .. } => motion.velocity(t),
            Motion::Free => Vector3::zeros(),
        }
    }

    fn kinematics(&self, contact: &Contact, offsets: &[Option<usize>], dt: f64) -> ContactKinematics {
        let dim = self.dim.contact_dim();
        let n_v = self.num_dofs();
        let g = &contact.geometry;
        let frame = contact_frame(self.dim, &g.normal);
        let mut jacobian = DMatrix::zeros(dim, n_v);
        let mut bias = DVector::zeros(dim);
        for (idx, sign) in [(contact.key.a, 1.0), (contact.key.b, -1.0)] {
            let body = &self.bodies[idx];
            match offsets[idx] {
                Some(o) => {
                    let r = g.point - body.position;
                    for (row, e) in frame.iter().enumerate() {
                        let re = r.cross(e);
                        match self.dim {
                            Dim::Planar => {
                                jacobian[(row, o)] = sign * e.x;
                                jacobian[(row, o + 1)] = sign * e.y;
                                jacobian[(row, o + 2)] = sign * re.z;
                            }
                            Dim::Spatial => {
                                for c in 0..3 {
                                    jacobian[(row, o + c)] = sign * e[c];
                                    jacobian[(row, o + 3 + c)] = sign * re[c];
                                }
                            }
                        }
                    }
                }
                None => {
                    let vel = self.prescribed_point_velocity(body, self.time + dt);
                    for (row, e) in frame.iter().enumerate() {
                        bias[row] += sign * e.dot(&vel);
                    }
                }
            }
        }
        ContactKinematics { key: contact.key, frame, jacobian, bias, x0: g.x0, point: g.point }
    }

    /// Block-diagonal mass matrix over the free DOFs, rotational inertia at the
    /// current pose.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let n_v = self.num_dofs();
        let mut a = DMatrix::zeros(n_v, n_v);
        for (b, o) in self.bodies.iter().zip(self.dof_offsets()) {
            let Some(o) = o else { continue };
            match self.dim {
                Dim::Planar => {
                    a[(o, o)] = b.mass;
                    a[(o + 1, o + 1)] = b.mass;
                    a[(o + 2, o + 2)] = b.world_inertia()[(2, 2)];
                }
                Dim::Spatial => {
                    for c in 0..3 {
                        a[(o + c, o + c)] = b.mass;
                    }
                    a.view_mut((o + 3, o + 3), (3, 3)).copy_from(&b.world_inertia());
                }
            }
        }
        a
    }

    /// Applies the solved velocities, advances every pose by `dt` and records
    /// normal impulses for the next step's persistence lookup.
    pub fn advance(&mut self, v: &DVector<f64>, dt: f64, normal_impulses: HashMap<ContactKey, f64>) {
        let offsets = self.dof_offsets();
        let t_next = self.time + dt;
        for (i, offset) in offsets.into_iter().enumerate() {
            match (offset, self.bodies[i].motion) {
                (Some(o), _) => {
                    let (lin, ang) = self.read_dofs(v, o);
                    self.bodies[i] = advance_state(&self.bodies[i], &lin, &ang, dt);
                }
                (None, Motion::Prescribed { motion, origin }) => {
                    let b = &mut self.bodies[i];
                    b.position = origin + motion.displacement(t_next);
                    b.velocity = motion.velocity(t_next);
                }
                (None, Motion::Free) => unreachable!("free bodies always own DOFs"),
            }
        }
        self.previous = normal_impulses;
        self.time = t_next;
    }
}

/// Builds the convex problem for one step of size `dt`.
pub fn assemble_problem(world: &World, dt: f64, model: ModelId) -> Result<StepProblem> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("time step must be positive, got {dt}")));
    }
    world.validate()?;
    let a = world.mass_matrix();
    let v0 = world.velocities();
    let mut gravity = DVector::zeros(v0.len());
    for (b, o) in world.bodies.iter().zip(world.dof_offsets()) {
        if let Some(o) = o {
            world.write_dofs(&mut gravity, o, &(-b.mass * world.gravity * world.dim.up()), &Vector3::zeros());
        }
    }
    let a_inv = invert_spd(&a)?;
    let v_star = &v0 + dt * &a_inv * gravity;

    let offsets = world.dof_offsets();
    let law = NormalLaw::HuntCrossley { k: world.material.k, d: world.material.d };
    let mut friction = world.material.friction;
    friction.regularize_impacts = model.regularizes_impacts();
    let mut contacts = Vec::new();
    for c in world.detect() {
        let kinematics = world.kinematics(&c, &offsets, dt);
        let w = delassus_weight(&kinematics.jacobian, &a_inv);
        if !(w > 0.0) {
            return Err(Error::DegenerateContact(format!("contact {:?} has no free DOFs", c.key)));
        }
        let normal = DiscreteNormal::new(law, kinematics.x0, dt)?;
        let gamma_n0 = world.previous.get(&c.key).copied().unwrap_or(0.0);
        let data = ContactData::new(normal, friction, gamma_n0, w, world.dim.contact_dim())?;
        contacts.push(ProblemContact { kinematics, data });
    }
    Ok(StepProblem { a, v0, v_star, contacts, dt })
}

fn invert_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    a.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::NotPositiveDefinite("mass matrix".into()))
}

fn delassus_weight(j: &DMatrix<f64>, a_inv: &DMatrix<f64>) -> f64 {
    let w = j * a_inv * j.transpose();
    w.trace() / j.nrows() as f64
}

/// Per-contact `trace(J_i A⁻¹ J_iᵀ)/dim`.
pub fn delassus_diagonal(problem: &StepProblem) -> Result<Vec<f64>> {
    let a_inv = invert_spd(&problem.a)?;
    Ok(problem.contacts.iter().map(|c| delassus_weight(&c.kinematics.jacobian, &a_inv)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn material() -> ContactMaterial {
        ContactMaterial { k: 1e7, d: 0.0, friction: FrictionParams::default() }
    }

    fn planar_world() -> World {
        let mut w = World::new(Dim::Planar, material());
        w.add(Body::half_space(Dim::Planar, Vector3::y(), 0.0, Prescribed::Fixed));
        w
    }

    #[test]
    fn point_mass_delassus() {
        let mut w = planar_world();
        w.add(Body::disk(2.0, 0.1, Vector3::new(0.0, 0.1, 0.0)));
        let p = assemble_problem(&w, 1e-3, ModelId::Lagged).unwrap();
        assert_eq!(p.contacts.len(), 1);
        // contact point below the COM: tangential row picks up r×t
        let j = &p.contacts[0].kinematics.jacobian;
        assert_relative_eq!(j[(0, 2)], 0.1, max_relative = 1e-12);
        let a_inv = p.a.clone().try_inverse().unwrap();
        let full = j * a_inv * j.transpose();
        assert_relative_eq!(full[(1, 1)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(full[(0, 0)], 0.5 + 0.01 / (0.5 * 2.0 * 0.01), max_relative = 1e-12);
    }

    #[test]
    fn two_bodies_double_weight() {
        let mut single = World::new(Dim::Spatial, material());
        single.add(Body::half_space(Dim::Spatial, Vector3::z(), 0.0, Prescribed::Fixed));
        single.add(Body::sphere(1.0, 0.05, Vector3::new(0.0, 0.0, 0.05)));
        let ws = delassus_diagonal(&assemble_problem(&single, 1e-3, ModelId::Sap).unwrap()).unwrap();

        let mut pair = World::new(Dim::Spatial, material());
        pair.add(Body::sphere(1.0, 0.05, Vector3::new(0.0, 0.0, 0.1)));
        pair.add(Body::sphere(1.0, 0.05, Vector3::zeros()));
        let wp = delassus_diagonal(&assemble_problem(&pair, 1e-3, ModelId::Sap).unwrap()).unwrap();
        assert_relative_eq!(wp[0], 2.0 * ws[0], max_relative = 1e-12);
    }

    #[test]
    fn free_motion_velocity() {
        let mut w = World::new(Dim::Planar, material());
        w.add(Body::disk(1.0, 0.1, Vector3::new(0.0, 5.0, 0.0)).with_velocity(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros()));
        let p = assemble_problem(&w, 0.01, ModelId::Similar).unwrap();
        assert!(p.contacts.is_empty());
        assert_relative_eq!(p.v_star[1], -0.0981, max_relative = 1e-12);
        assert_eq!(p.v_star[0], 1.0);
    }

    #[test]
    fn belt_velocity_enters_bias_only() {
        let mut w = World::new(Dim::Planar, material());
        let belt = Prescribed::Oscillation { axis: Vector3::x(), amplitude: 0.2, frequency: 1.0 };
        w.add(Body::half_space(Dim::Planar, Vector3::y(), 0.0, belt));
        w.add(Body::rectangle(1.0, 0.025, 0.025, Vector3::new(0.0, 0.025, 0.0)));
        let dt = 0.01;
        let p = assemble_problem(&w, dt, ModelId::Lagged).unwrap();
        assert_eq!(p.num_dofs(), 3);
        assert_eq!(p.contacts.len(), 2);
        let expected = -0.2 * std::f64::consts::TAU * (std::f64::consts::TAU * dt).sin();
        for c in &p.contacts {
            assert_relative_eq!(c.kinematics.bias[0], expected, max_relative = 1e-12);
            assert_eq!(c.kinematics.bias[1], 0.0);
        }
    }

    #[test]
    fn persistence_by_key() {
        let mut w = planar_world();
        w.add(Body::disk(1.0, 0.1, Vector3::new(0.0, 0.1 - 1e-6, 0.0)));
        let key = ContactKey { a: 1, b: 0, feature: 0 };
        w.previous.insert(key, 0.25);
        let p = assemble_problem(&w, 1e-3, ModelId::Lagged).unwrap();
        assert_eq!(p.contacts[0].data.gamma_n0, 0.25);
        w.previous.clear();
        w.previous.insert(ContactKey { a: 1, b: 0, feature: 3 }, 0.25);
        let p = assemble_problem(&w, 1e-3, ModelId::Lagged).unwrap();
        assert_eq!(p.contacts[0].data.gamma_n0, 0.0);
    }

    #[test]
    fn advance_keeps_pose_at_rest() {
        let b = Body::sphere(1.0, 0.1, Vector3::new(1.0, 2.0, 3.0));
        let a = advance_state(&b, &Vector3::zeros(), &Vector3::zeros(), 0.1);
        assert_eq!(a.position, b.position);
        assert_eq!(a.orientation, b.orientation);
    }

    #[test]
    fn spatial_rotation_drift() {
        let mut b = Body::sphere(1.0, 0.1, Vector3::zeros());
        let omega = Vector3::new(0.0, 0.0, std::f64::consts::TAU);
        for _ in 0..1000 {
            b = advance_state(&b, &Vector3::zeros(), &omega, 1e-3);
        }
        let Orientation::Spatial(q) = b.orientation else { unreachable!() };
        assert!((q.norm() - 1.0).abs() < 1e-12);
        // full turn: back to identity up to first-order drift
        assert!(q.angle() < 1e-2, "residual rotation {}", q.angle());
    }

    #[test]
    fn rejects_massless_free_body() {
        let mut w = planar_world();
        w.add(Body::disk(0.0, 0.1, Vector3::new(0.0, 1.0, 0.0)));
        assert!(assemble_problem(&w, 1e-3, ModelId::Lagged).is_err());
        assert!(assemble_problem(&planar_world(), 0.0, ModelId::Lagged).is_err());
    }
}
