//! Small displacement-based nonlinear finite element solver.

pub mod constitutive;
pub mod element;
pub mod mesh;
pub mod problems;
pub mod solver;


pub use constitutive::{
    ConstitutiveError, Constitutive, HyperSurrogate, Kinematics, LinearElastic, NeoHookean, PointResponse, ReferencePlasticity, SurrogatePlasticity,
};
pub use element::ElementKind;
pub use mesh::{hex_mesh, quad_mesh, Element, Mesh, MeshError};
pub use problems::{builtin_problem, load_unload_schedule, BuiltinOptions, BUILTIN_NAMES};
pub use solver::{newton_solve, CurvePoint, Dirichlet, FemError, LoadMeasure, Model, Problem, SolveReport, SolverOptions, StepRecord, Traction};
