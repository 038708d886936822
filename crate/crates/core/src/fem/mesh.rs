//! Meshes, structured generators and reference-configuration geometry.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::element::ElementKind;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("element {element}: node index {node} out of range")]
    NodeIndex { element: usize, node: usize },
    #[error("element {element}: expected {expected} nodes, got {got}")]
    Connectivity { element: usize, expected: usize, got: usize },
    #[error("element {element}: non-positive Jacobian {det:e} at Gauss point {point}")]
    Jacobian { element: usize, point: usize, det: f64 },
    #[error("element {element} is {kind:?} in a {dim}D mesh")]
    Kind { element: usize, kind: ElementKind, dim: usize },
    #[error("invalid mesh parameters: {0}")]
    Parameters(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub elements: Vec<Element>,
    /// Named boundary facets (edges in 2D, faces in 3D), each a node list.
    #[serde(default)]
    pub boundaries: BTreeMap<String, Vec<Vec<usize>>>,
}

/// Shape functions and spatial derivatives at one Gauss point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub n: Vec<f64>,
    /// `n_nodes x dim`
    pub dndx: DMatrix<f64>,
    /// Gauss weight times Jacobian determinant.
    pub weight: f64,
}

impl Mesh {
    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.dim
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        for (e, el) in self.elements.iter().enumerate() {
            if el.kind.dim() != self.dim {
                return Err(MeshError::Kind { element: e, kind: el.kind, dim: self.dim });
            }
            if el.nodes.len() != el.kind.n_nodes() {
                return Err(MeshError::Connectivity { element: e, expected: el.kind.n_nodes(), got: el.nodes.len() });
            }
            if let Some(&node) = el.nodes.iter().find(|&&n| n >= self.nodes.len()) {
                return Err(MeshError::NodeIndex { element: e, node });
            }
            self.element_geometry(e)?;
        }
        Ok(())
    }

    pub fn element_geometry(&self, e: usize) -> Result<Vec<PointGeometry>, MeshError> {
        let el = &self.elements[e];
        let d = self.dim;
        let mut out = Vec::new();
        for (p, (xi, w)) in el.kind.gauss_points().into_iter().enumerate() {
            let (n, dn) = el.kind.shape(&xi);
            let mut jac = DMatrix::<f64>::zeros(d, d);
            for (a, &node) in el.nodes.iter().enumerate() {
                for i in 0..d {
                    for k in 0..d {
                        jac[(i, k)] += self.nodes[node][i] * dn[a][k];
                    }
                }
            }
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(MeshError::Jacobian { element: e, point: p, det });
            }
            let inv = jac.try_inverse().ok_or(MeshError::Jacobian { element: e, point: p, det })?;
            let dndxi = DMatrix::from_fn(el.nodes.len(), d, |a, k| dn[a][k]);
            out.push(PointGeometry { n, dndx: dndxi * inv, weight: w * det });
        }
        Ok(out)
    }

    /// Nearest node within `tol` of `point`.
    pub fn find_node(&self, point: &[f64], tol: f64) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
            .filter(|&(_, dist)| dist <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn nodes_where(&self, pred: impl Fn(&[f64]) -> bool) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| pred(&self.nodes[i])).collect()
    }

    pub fn volume(&self) -> Result<f64, MeshError> {
        let mut v = 0.0;
        for e in 0..self.elements.len() {
            v += self.element_geometry(e)?.iter().map(|g| g.weight).sum::<f64>();
        }
        Ok(v)
    }
}

/// Structured quadrilateral mesh of the bilinear patch with corners
/// `(0,0) -> c0, (1,0) -> c1, (1,1) -> c2, (0,1) -> c3`. Boundaries are named
/// `bottom` (c0-c1), `right` (c1-c2), `top` (c3-c2) and `left` (c0-c3).
pub fn quad_mesh(corners: [[f64; 2]; 4], nx: usize, ny: usize, kind: ElementKind) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::Parameters(format!("{nx}x{ny} elements")));
    }
    let p = match kind {
        ElementKind::Q4 => 1,
        ElementKind::Q9 => 2,
        ElementKind::H8 => return Err(MeshError::Parameters("quad_mesh needs Q4 or Q9".into())),
    };
    let (gx, gy) = (p * nx + 1, p * ny + 1);
    let g = |i: usize, j: usize| j * gx + i;
    let mut nodes = Vec::with_capacity(gx * gy);
    for j in 0..gy {
        for i in 0..gx {
            let (s, t) = (i as f64 / (gx - 1) as f64, j as f64 / (gy - 1) as f64);
            let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
            nodes.push((0..2).map(|k| (0..4).map(|c| w[c] * corners[c][k]).sum()).collect());
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for ey in 0..ny {
        for ex in 0..nx {
            let (i, j) = (p * ex, p * ey);
            let conn = if p == 1 {
                vec![g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)]
            } else {
                vec![
                    g(i, j),
                    g(i + 2, j),
                    g(i + 2, j + 2),
                    g(i, j + 2),
                    g(i + 1, j),
                    g(i + 2, j + 1),
                    g(i + 1, j + 2),
                    g(i, j + 1),
                    g(i + 1, j + 1),
                ]
            };
            elements.push(Element { kind, nodes: conn });
        }
    }
    let line = |f: &dyn Fn(usize) -> usize, k: usize| -> Vec<usize> { (0..=p).map(|s| f(p * k + s)).collect() };
    let mut boundaries = BTreeMap::new();
    boundaries.insert("bottom".to_string(), (0..nx).map(|k| line(&|i| g(i, 0), k)).collect());
    boundaries.insert("top".to_string(), (0..nx).map(|k| line(&|i| g(i, gy - 1), k)).collect());
    boundaries.insert("left".to_string(), (0..ny).map(|k| line(&|j| g(0, j), k)).collect());
    boundaries.insert("right".to_string(), (0..ny).map(|k| line(&|j| g(gx - 1, j), k)).collect());
    let mesh = Mesh { dim: 2, nodes, elements, boundaries };
    mesh.validate()?;
    Ok(mesh)
}

/// Structured H8 mesh of `[0,lx] x [0,ly] x [0,lz]` with faces `x0, x1, y0,
/// y1, z0, z1`.
pub fn hex_mesh(size: [f64; 3], n: [usize; 3]) -> Result<Mesh, MeshError> {
    if n.contains(&0) {
        return Err(MeshError::Parameters(format!("{n:?} elements")));
    }
    let (gx, gy, gz) = (n[0] + 1, n[1] + 1, n[2] + 1);
    let g = |i: usize, j: usize, k: usize| (k * gy + j) * gx + i;
    let mut nodes = Vec::new();
    for k in 0..gz {
        for j in 0..gy {
            for i in 0..gx {
                nodes.push(vec![
                    size[0] * i as f64 / n[0] as f64,
                    size[1] * j as f64 / n[1] as f64,
                    size[2] * k as f64 / n[2] as f64,
                ]);
            }
        }
    }
    let mut elements = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                elements.push(Element {
                    kind: ElementKind::H8,
                    nodes: vec![
                        g(i, j, k),
                        g(i + 1, j, k),
                        g(i + 1, j + 1, k),
                        g(i, j + 1, k),
                        g(i, j, k + 1),
                        g(i + 1, j, k + 1),
                        g(i + 1, j + 1, k + 1),
                        g(i, j + 1, k + 1),
                    ],
                });
            }
        }
    }
    let mut boundaries = BTreeMap::new();
    let mut faces = |name: &str, fixed: usize, at: usize| {
        let (a, b) = [(1, 2), (0, 2), (0, 1)][fixed];
        let mut list = Vec::new();
        for v in 0..n[b] {
            for u in 0..n[a] {
                let idx = |du: usize, dv: usize| {
                    let mut c = [0; 3];
                    c[fixed] = at;
                    c[a] = u + du;
                    c[b] = v + dv;
                    g(c[0], c[1], c[2])
                };
                list.push(vec![idx(0, 0), idx(1, 0), idx(1, 1), idx(0, 1)]);
            }
        }
        boundaries.insert(name.to_string(), list);
    };
    faces("x0", 0, 0);
    faces("x1", 0, n[0]);
    faces("y0", 1, 0);
    faces("y1", 1, n[1]);
    faces("z0", 2, 0);
    faces("z1", 2, n[2]);
    let mesh = Mesh { dim: 3, nodes, elements, boundaries };
    mesh.validate()?;
    Ok(mesh)
}
