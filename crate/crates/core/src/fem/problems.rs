//! Built-in benchmark problems.

use serde::{Deserialize, Serialize};

use super::element::ElementKind;
use super::mesh::{hex_mesh, quad_mesh};
use super::solver::{Dirichlet, FemError, LoadMeasure, Problem, Traction};

pub const BUILTIN_NAMES: [&str; 4] = ["cook2d", "punch2d", "plate2d", "patch3d"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuiltinOptions {
    pub load_steps: usize,
    /// Ignored by `plate2d`, which only loads.
    pub unload_steps: usize,
    /// Load factor reached at the end of unloading; negative values reverse
    /// the load past zero.
    pub unload_to: f64,
    pub cook_mesh: [usize; 2],
    pub punch_mesh: [usize; 2],
    pub plate_mesh: [usize; 2],
    pub cook_q0: f64,
    pub punch_u0: f64,
    pub plate_q0: f64,
    pub patch_strain: f64,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        Self {
            load_steps: 20,
            unload_steps: 20,
            unload_to: 0.0,
            cook_mesh: [8, 5],
            punch_mesh: [10, 10],
            plate_mesh: [5, 10],
            cook_q0: 0.03,
            punch_u0: 0.07,
            plate_q0: -20.0,
            patch_strain: 0.2,
        }
    }
}

/// Load factors `k/n` up to one, then linearly down to `unload_to`.
pub fn load_unload_schedule(n_load: usize, n_unload: usize, unload_to: f64) -> Vec<f64> {
    let up = (1..=n_load).map(|k| k as f64 / n_load as f64);
    let down = (1..=n_unload).map(|k| 1.0 - (1.0 - unload_to) * k as f64 / n_unload as f64);
    up.chain(down).collect()
}

pub fn builtin_problem(name: &str, opts: &BuiltinOptions) -> Result<Problem, FemError> {
    if opts.load_steps == 0 {
        return Err(FemError::Problem("load_steps must be positive".into()));
    }
    if !(opts.unload_to.is_finite() && opts.unload_to < 1.0) {
        return Err(FemError::Problem(format!("unload_to must be finite and below 1, got {}", opts.unload_to)));
    }
    match name {
        "cook2d" => cook2d(opts),
        "punch2d" => punch2d(opts),
        "plate2d" => plate2d(opts),
        "patch3d" => patch3d(opts),
        _ => Err(FemError::Problem(format!("unknown builtin problem {name:?}; expected one of {BUILTIN_NAMES:?}"))),
    }
}

fn node_at(mesh: &super::mesh::Mesh, p: &[f64]) -> Result<usize, FemError> {
    mesh.find_node(p, 1e-9).ok_or_else(|| FemError::Problem(format!("no node at {p:?}")))
}

/// Tapered cantilever clamped on the left, vertical shear on the right edge.
fn cook2d(opts: &BuiltinOptions) -> Result<Problem, FemError> {
    let [nx, ny] = opts.cook_mesh;
    let mesh = quad_mesh([[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]], nx, ny, ElementKind::Q9)?;
    let dirichlet = mesh
        .nodes_where(|x| x[0].abs() < 1e-9)
        .into_iter()
        .flat_map(|n| (0..2).map(move |i| Dirichlet { dof: 2 * n + i, value: 0.0, scaled: false }))
        .collect();
    let tractions = mesh.boundaries["right"].iter().map(|f| Traction { facet: f.clone(), vector: vec![0.0, opts.cook_q0] }).collect();
    let tracked_node = node_at(&mesh, &[48.0, 60.0])?;
    Ok(Problem {
        name: "cook2d".into(),
        mesh,
        dirichlet,
        tractions,
        schedule: load_unload_schedule(opts.load_steps, opts.unload_steps, opts.unload_to),
        tracked_node,
        tracked_component: 1,
        load_measure: LoadMeasure::Factor { scale: opts.cook_q0 },
    })
}

/// Unit block on a frictionless base, pressed down over the left half of the
/// top face.
fn punch2d(opts: &BuiltinOptions) -> Result<Problem, FemError> {
    let [nx, ny] = opts.punch_mesh;
    let mesh = quad_mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], nx, ny, ElementKind::Q4)?;
    let mut dirichlet: Vec<Dirichlet> =
        mesh.nodes_where(|x| x[1].abs() < 1e-9).into_iter().map(|n| Dirichlet { dof: 2 * n + 1, value: 0.0, scaled: false }).collect();
    dirichlet.push(Dirichlet { dof: 2 * node_at(&mesh, &[0.0, 0.0])?, value: 0.0, scaled: false });
    dirichlet.extend(
        mesh.nodes_where(|x| (x[1] - 1.0).abs() < 1e-9 && x[0] <= 0.5 + 1e-9)
            .into_iter()
            .map(|n| Dirichlet { dof: 2 * n + 1, value: -opts.punch_u0, scaled: true }),
    );
    let tracked_node = node_at(&mesh, &[0.0, 1.0])?;
    Ok(Problem {
        name: "punch2d".into(),
        mesh,
        dirichlet,
        tractions: Vec::new(),
        schedule: load_unload_schedule(opts.load_steps, opts.unload_steps, opts.unload_to),
        tracked_node,
        tracked_component: 1,
        load_measure: LoadMeasure::Reaction,
    })
}

/// 1 x 2 block compressed by a dead pressure on its top face.
fn plate2d(opts: &BuiltinOptions) -> Result<Problem, FemError> {
    let [nx, ny] = opts.plate_mesh;
    let mesh = quad_mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [0.0, 2.0]], nx, ny, ElementKind::Q4)?;
    let mut dirichlet: Vec<Dirichlet> =
        mesh.nodes_where(|x| x[1].abs() < 1e-9).into_iter().map(|n| Dirichlet { dof: 2 * n + 1, value: 0.0, scaled: false }).collect();
    dirichlet.push(Dirichlet { dof: 2 * node_at(&mesh, &[0.0, 0.0])?, value: 0.0, scaled: false });
    let tractions = mesh.boundaries["top"].iter().map(|f| Traction { facet: f.clone(), vector: vec![0.0, opts.plate_q0] }).collect();
    let tracked_node = node_at(&mesh, &[0.0, 2.0])?;
    Ok(Problem {
        name: "plate2d".into(),
        mesh,
        dirichlet,
        tractions,
        schedule: load_unload_schedule(opts.load_steps, 0, 0.0),
        tracked_node,
        tracked_component: 1,
        load_measure: LoadMeasure::Factor { scale: opts.plate_q0 },
    })
}

/// Unit cube with symmetry planes, stretched along x.
fn patch3d(opts: &BuiltinOptions) -> Result<Problem, FemError> {
    let mesh = hex_mesh([1.0; 3], [1; 3])?;
    let mut dirichlet = Vec::new();
    for (axis, face) in ["x0", "y0", "z0"].into_iter().enumerate() {
        let mut nodes: Vec<usize> = mesh.boundaries[face].iter().flatten().copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        dirichlet.extend(nodes.into_iter().map(|n| Dirichlet { dof: 3 * n + axis, value: 0.0, scaled: false }));
    }
    dirichlet.extend(
        mesh.nodes_where(|x| (x[0] - 1.0).abs() < 1e-9)
            .into_iter()
            .map(|n| Dirichlet { dof: 3 * n, value: opts.patch_strain, scaled: true }),
    );
    let tracked_node = node_at(&mesh, &[1.0, 1.0, 1.0])?;
    Ok(Problem {
        name: "patch3d".into(),
        mesh,
        dirichlet,
        tractions: Vec::new(),
        schedule: load_unload_schedule(opts.load_steps, opts.unload_steps, opts.unload_to),
        tracked_node,
        tracked_component: 0,
        load_measure: LoadMeasure::Reaction,
    })
}
