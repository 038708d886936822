//! Global assembly and incremental Newton-Raphson.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::constitutive::{ConstitutiveError, Constitutive, Kinematics};
use super::element::{facet_gauss, facet_shape};
use super::mesh::{Mesh, MeshError, PointGeometry};

#[derive(Debug, Error)]
pub enum FemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("element {element}, Gauss point {point}: {source}")]
    Constitutive { element: usize, point: usize, source: ConstitutiveError },
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("step {step} (load factor {factor}) did not converge after {bisections} bisections")]
    NotConverged { step: usize, factor: f64, bisections: usize, report: Box<SolveReport> },
}

/// Prescribed displacement of one dof. `scaled` values follow the load
/// factor; the others are held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dirichlet {
    pub dof: usize,
    pub value: f64,
    pub scaled: bool,
}

/// Dead load per unit length (2D) or area (3D) on a boundary facet, scaled
/// by the load factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traction {
    pub facet: Vec<usize>,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LoadMeasure {
    /// Load factor times a nominal magnitude.
    Factor { scale: f64 },
    /// Sum of internal forces at the load-factor-scaled prescribed dofs.
    Reaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub mesh: Mesh,
    pub dirichlet: Vec<Dirichlet>,
    pub tractions: Vec<Traction>,
    /// Load factor at the end of each step.
    pub schedule: Vec<f64>,
    pub tracked_node: usize,
    pub tracked_component: usize,
    pub load_measure: LoadMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub tol_r: f64,
    pub max_iter: usize,
    pub max_bisections: usize,
    /// Step halvings tried when a Newton update does not reduce the residual.
    pub line_search: usize,
    pub serial: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_r: 1e-8, max_iter: 25, max_bisections: 4, line_search: 6, serial: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub factor: f64,
    pub iterations: usize,
    /// Free-dof residual norm measured at each iterate.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub factor: f64,
    pub load: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    /// Tracked load-deflection pairs, starting with the unloaded state.
    pub curve: Vec<CurvePoint>,
    /// Nodal displacements after each completed schedule step.
    pub displacements: Vec<Vec<f64>>,
}

impl SolveReport {
    pub fn final_displacement(&self) -> Option<&[f64]> {
        self.displacements.last().map(|v| v.as_slice())
    }
}

/// Internal forces, optional tangent and the trial states of every point.
pub struct Assembly<S> {
    pub f_int: DVector<f64>,
    pub k: Option<DMatrix<f64>>,
    pub states: Vec<Vec<S>>,
}

/// Element forces, optional element stiffness and point states.
type ElementOutput<S> = (DVector<f64>, Option<DMatrix<f64>>, Vec<S>);

/// Converged displacements, point states and internal forces.
type Converged<S> = (DVector<f64>, Vec<Vec<S>>, DVector<f64>);

pub struct Model<'a, M: Constitutive> {
    pub problem: &'a Problem,
    pub material: &'a M,
    geometry: Vec<Vec<PointGeometry>>,
    f_ext_unit: DVector<f64>,
}

impl<'a, M: Constitutive> Model<'a, M> {
    pub fn new(problem: &'a Problem, material: &'a M) -> Result<Self, FemError> {
        let mesh = &problem.mesh;
        mesh.validate()?;
        let n = mesh.n_dofs();
        for bc in &problem.dirichlet {
            if bc.dof >= n {
                return Err(FemError::Problem(format!("dirichlet dof {} out of range", bc.dof)));
            }
        }
        if problem.tracked_node >= mesh.nodes.len() || problem.tracked_component >= mesh.dim {
            return Err(FemError::Problem("tracked node out of range".into()));
        }
        let geometry = (0..mesh.elements.len()).map(|e| mesh.element_geometry(e)).collect::<Result<_, _>>()?;
        let f_ext_unit = traction_forces(mesh, &problem.tractions)?;
        let constrained: std::collections::HashSet<usize> = problem.dirichlet.iter().map(|b| b.dof).collect();
        for (dof, f) in f_ext_unit.iter().enumerate() {
            if *f != 0.0 && constrained.contains(&dof) {
                return Err(FemError::Problem(format!("dof {dof} is both constrained and loaded")));
            }
        }
        Ok(Self { problem, material, geometry, f_ext_unit })
    }

    pub fn initial_states(&self) -> Vec<Vec<M::State>> {
        let d = self.problem.mesh.dim;
        self.geometry.iter().map(|g| vec![self.material.initial_state(d); g.len()]).collect()
    }

    pub fn external_force(&self, factor: f64) -> DVector<f64> {
        &self.f_ext_unit * factor
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let mut c = vec![false; self.problem.mesh.n_dofs()];
        for bc in &self.problem.dirichlet {
            c[bc.dof] = true;
        }
        (0..c.len()).filter(|&i| !c[i]).collect()
    }

    fn element(&self, e: usize, u: &DVector<f64>, states: &[M::State], tangent: bool) -> Result<ElementOutput<M::State>, FemError> {
        let mesh = &self.problem.mesh;
        let el = &mesh.elements[e];
        let d = mesh.dim;
        let nd = el.nodes.len() * d;
        let mut fe = DVector::zeros(nd);
        let mut ke = tangent.then(|| DMatrix::zeros(nd, nd));
        let mut new_states = Vec::with_capacity(states.len());
        let kin = self.material.kinematics();
        for (p, g) in self.geometry[e].iter().enumerate() {
            let mut grad = DMatrix::zeros(d, d);
            for (a, &node) in el.nodes.iter().enumerate() {
                for i in 0..d {
                    for j in 0..d {
                        grad[(i, j)] += u[node * d + i] * g.dndx[(a, j)];
                    }
                }
            }
            let r = self
                .material
                .evaluate(&grad, &states[p], tangent)
                .map_err(|source| FemError::Constitutive { element: e, point: p, source })?;
            let b = match kin {
                Kinematics::SmallStrain => strain_operator(&g.dndx),
                Kinematics::FiniteStrain => gradient_operator(&g.dndx),
            };
            fe += b.transpose() * &r.flux * g.weight;
            if let (Some(k), Some(c)) = (ke.as_mut(), r.tangent.as_ref()) {
                *k += b.transpose() * c * &b * g.weight;
            }
            new_states.push(r.state);
        }
        Ok((fe, ke, new_states))
    }

    pub fn assemble(&self, u: &DVector<f64>, states: &[Vec<M::State>], tangent: bool, serial: bool) -> Result<Assembly<M::State>, FemError> {
        let mesh = &self.problem.mesh;
        let n = mesh.n_dofs();
        let run = |e: usize| self.element(e, u, &states[e], tangent);
        let parts: Vec<_> = if serial {
            (0..mesh.elements.len()).map(run).collect::<Result<_, _>>()?
        } else {
            (0..mesh.elements.len()).into_par_iter().map(run).collect::<Result<_, _>>()?
        };
        let mut f_int = DVector::zeros(n);
        let mut k = tangent.then(|| DMatrix::zeros(n, n));
        let mut out_states = Vec::with_capacity(parts.len());
        for (e, (fe, ke, st)) in parts.into_iter().enumerate() {
            let dofs = element_dofs(&mesh.elements[e].nodes, mesh.dim);
            for (a, &ga) in dofs.iter().enumerate() {
                f_int[ga] += fe[a];
                if let (Some(k), Some(ke)) = (k.as_mut(), ke.as_ref()) {
                    for (b, &gb) in dofs.iter().enumerate() {
                        k[(ga, gb)] += ke[(a, b)];
                    }
                }
            }
            out_states.push(st);
        }
        Ok(Assembly { f_int, k, states: out_states })
    }

    /// `R = f_ext - f_int`.
    pub fn residual(&self, u: &DVector<f64>, states: &[Vec<M::State>], factor: f64, serial: bool) -> Result<DVector<f64>, FemError> {
        let a = self.assemble(u, states, false, serial)?;
        Ok(self.external_force(factor) - a.f_int)
    }

    fn apply_dirichlet(&self, u: &mut DVector<f64>, factor: f64) {
        for bc in &self.problem.dirichlet {
            u[bc.dof] = if bc.scaled { bc.value * factor } else { bc.value };
        }
    }

    fn curve_point(&self, step: usize, factor: f64, u: &DVector<f64>, f_int: &DVector<f64>) -> CurvePoint {
        let d = self.problem.mesh.dim;
        let load = match self.problem.load_measure {
            LoadMeasure::Factor { scale } => factor * scale,
            LoadMeasure::Reaction => self.problem.dirichlet.iter().filter(|b| b.scaled).map(|b| f_int[b.dof]).sum(),
        };
        CurvePoint { step, factor, load, displacement: u[self.problem.tracked_node * d + self.problem.tracked_component] }
    }

    /// Newton iterations at a fixed load factor from the converged state.
    fn newton(
        &self,
        u0: &DVector<f64>,
        states: &[Vec<M::State>],
        factor: f64,
        free: &[usize],
        opts: &SolverOptions,
        record: &mut StepRecord,
    ) -> Result<Option<Converged<M::State>>, FemError> {
        let mut u = u0.clone();
        self.apply_dirichlet(&mut u, factor);
        let f_ext = self.external_force(factor);
        let f_ext_norm = free.iter().map(|&i| f_ext[i] * f_ext[i]).sum::<f64>().sqrt();
        let tol = opts.tol_r * (1.0 + f_ext_norm);
        let Some(mut asm) = self.try_assemble(&u, states, factor, opts)? else {
            return Ok(None);
        };
        let mut norm = self.free_residual(&f_ext, &asm.f_int, free).norm();
        for it in 0..=opts.max_iter {
            record.residuals.push(norm);
            record.iterations = it;
            if !norm.is_finite() {
                return Ok(None);
            }
            if norm <= tol {
                return Ok(Some((u, asm.states, asm.f_int)));
            }
            if it == opts.max_iter {
                break;
            }
            let rf = self.free_residual(&f_ext, &asm.f_int, free);
            let k = asm.k.as_ref().expect("tangent requested");
            let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
            let Some(du) = kff.lu().solve(&rf) else {
                return Ok(None);
            };
            if du.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            // backtrack on the residual norm; the last trial is kept even if
            // it never decreased, so Newton can still escape a kink
            let mut alpha = 1.0;
            for ls in 0..=opts.line_search {
                let mut trial = u.clone();
                for (a, &i) in free.iter().enumerate() {
                    trial[i] += alpha * du[a];
                }
                let Some(ta) = self.try_assemble(&trial, states, factor, opts)? else {
                    if ls == opts.line_search {
                        return Ok(None);
                    }
                    alpha *= 0.5;
                    continue;
                };
                let tn = self.free_residual(&f_ext, &ta.f_int, free).norm();
                let last = ls == opts.line_search;
                if tn.is_finite() && tn < (1.0 - 1e-4 * alpha) * norm || last {
                    u = trial;
                    asm = ta;
                    norm = tn;
                    break;
                }
                alpha *= 0.5;
            }
        }
        Ok(None)
    }

    fn try_assemble(&self, u: &DVector<f64>, states: &[Vec<M::State>], factor: f64, opts: &SolverOptions) -> Result<Option<Assembly<M::State>>, FemError> {
        match self.assemble(u, states, true, opts.serial) {
            Ok(a) => Ok(Some(a)),
            Err(FemError::Constitutive { element, point, source }) => {
                log::debug!("factor {factor}: element {element} point {point}: {source}");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn free_residual(&self, f_ext: &DVector<f64>, f_int: &DVector<f64>, free: &[usize]) -> DVector<f64> {
        DVector::from_iterator(free.len(), free.iter().map(|&i| f_ext[i] - f_int[i]))
    }

    /// Runs the whole load schedule, bisecting failed increments.
    pub fn solve(&self, opts: &SolverOptions) -> Result<SolveReport, FemError> {
        let free = self.free_dofs();
        let n = self.problem.mesh.n_dofs();
        let mut u = DVector::zeros(n);
        let mut states = self.initial_states();
        let mut report = SolveReport::default();
        let f0 = self.assemble(&u, &states, false, opts.serial)?.f_int;
        report.curve.push(self.curve_point(0, 0.0, &u, &f0));
        let mut factor = 0.0;
        for (s, &target) in self.problem.schedule.iter().enumerate() {
            let step = s + 1;
            // pending sub-targets, processed last-in first-out
            let mut pending = vec![(target, 0usize)];
            let mut last_f_int = f0.clone();
            while let Some((t, depth)) = pending.pop() {
                let mut rec = StepRecord { step, factor: t, iterations: 0, residuals: Vec::new(), converged: false, depth };
                match self.newton(&u, &states, t, &free, opts, &mut rec)? {
                    Some((nu, ns, fi)) => {
                        rec.converged = true;
                        report.steps.push(rec);
                        u = nu;
                        states = ns;
                        factor = t;
                        last_f_int = fi;
                    }
                    None => {
                        report.steps.push(rec);
                        if depth >= opts.max_bisections {
                            return Err(FemError::NotConverged { step, factor: t, bisections: depth, report: Box::new(report) });
                        }
                        let mid = 0.5 * (factor + t);
                        pending.push((t, depth + 1));
                        pending.push((mid, depth + 1));
                    }
                }
            }
            report.curve.push(self.curve_point(step, factor, &u, &last_f_int));
            report.displacements.push(u.iter().copied().collect());
        }
        Ok(report)
    }
}

pub fn element_dofs(nodes: &[usize], dim: usize) -> Vec<usize> {
    nodes.iter().flat_map(|&n| (0..dim).map(move |i| n * dim + i)).collect()
}

/// Small-strain `B` (Voigt strain with engineering shear).
pub fn strain_operator(dndx: &DMatrix<f64>) -> DMatrix<f64> {
    let (nn, d) = dndx.shape();
    let nv = if d == 2 { 3 } else { 6 };
    let mut b = DMatrix::zeros(nv, nn * d);
    for a in 0..nn {
        for i in 0..d {
            b[(i, a * d + i)] = dndx[(a, i)];
        }
        let shear: &[(usize, usize)] = if d == 2 { &[(0, 1)] } else { &[(0, 1), (1, 2), (0, 2)] };
        for (s, &(i, j)) in shear.iter().enumerate() {
            b[(d + s, a * d + i)] = dndx[(a, j)];
            b[(d + s, a * d + j)] = dndx[(a, i)];
        }
    }
    b
}

/// `G` mapping element dofs to the row-major displacement gradient.
pub fn gradient_operator(dndx: &DMatrix<f64>) -> DMatrix<f64> {
    let (nn, d) = dndx.shape();
    let mut g = DMatrix::zeros(d * d, nn * d);
    for a in 0..nn {
        for i in 0..d {
            for j in 0..d {
                g[(i * d + j, a * d + i)] = dndx[(a, j)];
            }
        }
    }
    g
}

/// Consistent nodal forces of unit-factor tractions.
pub fn traction_forces(mesh: &Mesh, tractions: &[Traction]) -> Result<DVector<f64>, FemError> {
    let d = mesh.dim;
    let mut f = DVector::zeros(mesh.n_dofs());
    for t in tractions {
        if t.vector.len() != d {
            return Err(FemError::Problem(format!("traction vector of length {} in {d}D", t.vector.len())));
        }
        let nf = t.facet.len();
        if !((d == 2 && (nf == 2 || nf == 3)) || (d == 3 && nf == 4)) {
            return Err(FemError::Problem(format!("{nf}-node facet in {d}D")));
        }
        if let Some(&bad) = t.facet.iter().find(|&&n| n >= mesh.nodes.len()) {
            return Err(FemError::Problem(format!("facet node {bad} out of range")));
        }
        for (s, w) in facet_gauss(nf) {
            let (n, dn) = facet_shape(nf, &s);
            let measure = if d == 2 {
                let tx: f64 = (0..nf).map(|a| dn[a][0] * mesh.nodes[t.facet[a]][0]).sum();
                let ty: f64 = (0..nf).map(|a| dn[a][0] * mesh.nodes[t.facet[a]][1]).sum();
                tx.hypot(ty)
            } else {
                let tang = |k: usize| -> [f64; 3] { std::array::from_fn(|i| (0..nf).map(|a| dn[a][k] * mesh.nodes[t.facet[a]][i]).sum()) };
                let (u, v) = (tang(0), tang(1));
                let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            };
            for a in 0..nf {
                for i in 0..d {
                    f[t.facet[a] * d + i] += n[a] * t.vector[i] * measure * w;
                }
            }
        }
    }
    Ok(f)
}

pub fn newton_solve<M: Constitutive>(problem: &Problem, material: &M, opts: &SolverOptions) -> Result<SolveReport, FemError> {
    Model::new(problem, material)?.solve(opts)
}
