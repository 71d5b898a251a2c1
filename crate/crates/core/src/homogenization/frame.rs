//! 3D Euler-Bernoulli frame elements and the periodic frame system.
//!
//! Each node carries six DOFs `[ux, uy, uz, rx, ry, rz]`. Displacements are
//! split into an affine part `eps * x` and a periodic fluctuation; nodes on
//! upper faces are slaved to their canonical image, so the unknowns are the
//! fluctuations of the canonical nodes only. Struts that are periodic copies
//! of each other (same end images, same chord vector) describe one physical
//! strut and are assembled once.

use std::collections::HashSet;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::skyline::SparseSymmetric;
use super::Material;
use crate::error::{invalid, Result};
use crate::lattice::{LatticeGraph, DEDUP_TOLERANCE};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Vector12 = SVector<f64, 12>;

pub const DOF_PER_NODE: usize = 6;

/// Circular section constants for a strut of diameter `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Section {
    pub area: f64,
    pub inertia: f64,
    pub torsion: f64,
}

impl Section {
    pub fn circular(d: f64) -> Self {
        let pi = std::f64::consts::PI;
        Section { area: pi * d * d / 4.0, inertia: pi * d.powi(4) / 64.0, torsion: pi * d.powi(4) / 32.0 }
    }
}

/// Element stiffness in local axes (x along the strut).
pub fn local_stiffness(length: f64, section: Section, material: &Material) -> Matrix12 {
    let e = material.young_modulus;
    let g = material.shear_modulus();
    let l = length;
    let ea = e * section.area / l;
    let gj = g * section.torsion / l;
    let b12 = 12.0 * e * section.inertia / l.powi(3);
    let b6 = 6.0 * e * section.inertia / l.powi(2);
    let b4 = 4.0 * e * section.inertia / l;
    let b2 = 2.0 * e * section.inertia / l;

    let mut k = Matrix12::zeros();
    let mut set = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };
    set(0, 0, ea);
    set(6, 6, ea);
    set(0, 6, -ea);
    set(3, 3, gj);
    set(9, 9, gj);
    set(3, 9, -gj);
    // bending in the local x-y plane: v, rz
    set(1, 1, b12);
    set(7, 7, b12);
    set(1, 7, -b12);
    set(1, 5, b6);
    set(1, 11, b6);
    set(5, 7, -b6);
    set(7, 11, -b6);
    set(5, 5, b4);
    set(11, 11, b4);
    set(5, 11, b2);
    // bending in the local x-z plane: w, ry
    set(2, 2, b12);
    set(8, 8, b12);
    set(2, 8, -b12);
    set(2, 4, -b6);
    set(2, 10, -b6);
    set(4, 8, b6);
    set(8, 10, b6);
    set(4, 4, b4);
    set(10, 10, b4);
    set(4, 10, b2);
    k
}

/// Rows are the local axes expressed in global coordinates.
pub fn local_axes(chord: Vector3<f64>) -> Matrix3<f64> {
    let e1 = chord.normalize();
    let helper = if e1.z.abs() < 0.9 { Vector3::z() } else { Vector3::y() };
    let e2 = helper.cross(&e1).normalize();
    let e3 = e1.cross(&e2);
    Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
}

/// Element stiffness in global axes for a strut from `xa` to `xb`.
pub fn global_stiffness(xa: [f64; 3], xb: [f64; 3], section: Section, material: &Material) -> Matrix12 {
    let chord = Vector3::from(xb) - Vector3::from(xa);
    let r = local_axes(chord);
    let mut t = Matrix12::zeros();
    for blk in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(&r);
    }
    let k = local_stiffness(chord.norm(), section, material);
    let kg = t.transpose() * k * t;
    // remove round-off asymmetry
    (kg + kg.transpose()) * 0.5
}

#[derive(Clone, Debug)]
pub struct FrameElement {
    pub a: usize,
    pub b: usize,
    pub xa: [f64; 3],
    pub xb: [f64; 3],
    pub stiffness: Matrix12,
}

impl FrameElement {
    pub fn chord(&self) -> [f64; 3] {
        [self.xb[0] - self.xa[0], self.xb[1] - self.xa[1], self.xb[2] - self.xa[2]]
    }
}

/// Periodic frame model: canonical nodes, unique elements and the reduced
/// stiffness with the first canonical node's translations pinned.
#[derive(Clone, Debug)]
pub struct FrameSystem {
    canonical_nodes: usize,
    elements: Vec<FrameElement>,
    dof_map: Vec<Option<usize>>,
    stiffness: SparseSymmetric,
}

impl FrameSystem {
    pub fn assemble(graph: &LatticeGraph, material: &Material) -> Result<Self> {
        let nodes = graph.nodes();
        let mut canonical_of = vec![usize::MAX; nodes.len()];
        for image in graph.periodicity() {
            canonical_of[image.node] = image.image;
        }
        let mut index = vec![usize::MAX; nodes.len()];
        let mut canonical_nodes = 0;
        for i in 0..nodes.len() {
            if canonical_of[i] == usize::MAX {
                canonical_of[i] = i;
            }
        }
        for i in 0..nodes.len() {
            let c = canonical_of[i];
            if index[c] == usize::MAX {
                index[c] = canonical_nodes;
                canonical_nodes += 1;
            }
            index[i] = index[c];
        }
        if canonical_nodes == 0 {
            return Err(invalid("graph has no nodes"));
        }

        let tol = DEDUP_TOLERANCE * graph.cell_size();
        let section = Section::circular(graph.strut_diameter());
        let mut seen = HashSet::new();
        let mut elements = Vec::with_capacity(graph.struts().len());
        for &[a, b] in graph.struts() {
            let (xa, xb) = (nodes[a], nodes[b]);
            let (ma, mb) = (index[a], index[b]);
            let chord = [xb[0] - xa[0], xb[1] - xa[1], xb[2] - xa[2]].map(|v| (v / tol).round() as i64);
            let neg = chord.map(|v| -v);
            let key = if ma < mb || (ma == mb && chord >= neg) { (ma, mb, chord) } else { (mb, ma, neg) };
            if seen.insert(key) {
                elements.push(FrameElement {
                    a: ma,
                    b: mb,
                    xa,
                    xb,
                    stiffness: global_stiffness(xa, xb, section, material),
                });
            }
        }

        let mut dof_map = Vec::with_capacity(DOF_PER_NODE * canonical_nodes);
        let mut free = 0;
        for n in 0..canonical_nodes {
            for d in 0..DOF_PER_NODE {
                if n == 0 && d < 3 {
                    dof_map.push(None);
                } else {
                    dof_map.push(Some(free));
                    free += 1;
                }
            }
        }
        let mut stiffness = SparseSymmetric::new(free);
        for el in &elements {
            let dofs = element_dofs(el);
            for i in 0..12 {
                let Some(gi) = dof_map[dofs[i]] else { continue };
                for j in 0..=i {
                    let Some(gj) = dof_map[dofs[j]] else { continue };
                    let v = el.stiffness[(i, j)];
                    if v == 0.0 {
                        continue;
                    }
                    if gi == gj && i != j {
                        // both ends share a canonical node
                        stiffness.add(gi, gj, 2.0 * v);
                    } else {
                        stiffness.add(gi, gj, v);
                    }
                }
            }
        }
        Ok(FrameSystem { canonical_nodes, elements, dof_map, stiffness })
    }

    pub fn canonical_nodes(&self) -> usize {
        self.canonical_nodes
    }

    pub fn elements(&self) -> &[FrameElement] {
        &self.elements
    }

    pub fn free_dofs(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn stiffness(&self) -> &SparseSymmetric {
        &self.stiffness
    }

    /// Affine element displacement for macro strain `eps` (rotations zero).
    pub fn affine_displacement(el: &FrameElement, eps: &Matrix3<f64>) -> Vector12 {
        let ua = eps * Vector3::from(el.xa);
        let ub = eps * Vector3::from(el.xb);
        let mut d = Vector12::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&ua);
        d.fixed_rows_mut::<3>(6).copy_from(&ub);
        d
    }

    /// Load vector `-sum P^T K d_affine` driving the fluctuation field.
    pub fn load_vector(&self, eps: &Matrix3<f64>) -> Vec<f64> {
        let mut f = vec![0.0; self.free_dofs()];
        for el in &self.elements {
            let fe = el.stiffness * Self::affine_displacement(el, eps);
            for (i, dof) in element_dofs(el).into_iter().enumerate() {
                if let Some(g) = self.dof_map[dof] {
                    f[g] -= fe[i];
                }
            }
        }
        f
    }

    /// Total element displacements for a solved fluctuation field.
    pub fn element_displacements(&self, eps: &Matrix3<f64>, fluctuation: &[f64]) -> Vec<Vector12> {
        self.elements
            .iter()
            .map(|el| {
                let mut d = Self::affine_displacement(el, eps);
                for (i, dof) in element_dofs(el).into_iter().enumerate() {
                    if let Some(g) = self.dof_map[dof] {
                        d[i] += fluctuation[g];
                    }
                }
                d
            })
            .collect()
    }
}

fn element_dofs(el: &FrameElement) -> [usize; 12] {
    let mut dofs = [0; 12];
    for d in 0..DOF_PER_NODE {
        dofs[d] = DOF_PER_NODE * el.a + d;
        dofs[DOF_PER_NODE + d] = DOF_PER_NODE * el.b + d;
    }
    dofs
}
