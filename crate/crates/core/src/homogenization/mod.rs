//! Effective elastic stiffness of periodic strut lattices.
//!
//! The lattice is modelled as a rigid-jointed 3D frame. For each of the six
//! unit macro strains (Voigt order 11, 22, 33, 12, 13, 23 with engineering
//! shears) the periodic fluctuation field is solved with one factorization of
//! the reduced stiffness. The stiffness matrix is then read off the strain
//! energy: `C_qq = 2 U(q) / V` and `C_pq = [U(p+q) - U(p) - U(q)] / V`, the
//! combined cases being obtained by superposing the solved fields.

pub mod frame;
pub mod skyline;

use nalgebra::{Matrix3, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{build_unit_cell, relative_density, tessellate, LatticeGraph, TessellationSpec, Topology};
use frame::FrameSystem;
use skyline::SkylineCholesky;

/// Isotropic parent alloy. Conductivity is carried along but never used by
/// the mechanical solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(rename = "E")]
    pub young_modulus: f64,
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    #[serde(rename = "k")]
    pub conductivity: f64,
}

impl Material {
    pub const INCONEL_625: Material = Material { young_modulus: 208.0, poisson_ratio: 0.28, conductivity: 9.7 };
    /// Values as they appear in the simulation table (nu = 0.342).
    pub const TI_6AL_4V: Material = Material { young_modulus: 138.8, poisson_ratio: 0.342, conductivity: 6.7 };

    pub fn new(young_modulus: f64, poisson_ratio: f64, conductivity: f64) -> Result<Self> {
        let m = Material { young_modulus, poisson_ratio, conductivity };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus.is_finite() && self.young_modulus > 0.0) {
            return Err(invalid(format!("Young's modulus must be positive, got {}", self.young_modulus)));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(invalid(format!("Poisson ratio must lie in (-1, 0.5), got {}", self.poisson_ratio)));
        }
        if !self.conductivity.is_finite() {
            return Err(invalid("conductivity must be finite"));
        }
        Ok(())
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
}

/// One of the six unit macro strains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrainCase {
    index: usize,
}

impl StrainCase {
    pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

    /// `index` in 1..=6 following the Voigt order.
    pub fn new(index: usize) -> Result<Self> {
        if !(1..=6).contains(&index) {
            return Err(invalid(format!("strain case index must be 1..=6, got {index}")));
        }
        Ok(StrainCase { index })
    }

    pub fn all() -> [StrainCase; 6] {
        [1, 2, 3, 4, 5, 6].map(|index| StrainCase { index })
    }

    pub fn index(self) -> usize {
        self.index
    }

    /// Tensor strain; shear cases carry gamma = 1, i.e. 1/2 off-diagonal.
    pub fn macro_strain(self) -> Matrix3<f64> {
        voigt_to_tensor(&unit(self.index - 1))
    }
}

fn unit(q: usize) -> [f64; 6] {
    let mut v = [0.0; 6];
    v[q] = 1.0;
    v
}

fn voigt_to_tensor(v: &[f64; 6]) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (q, &(i, j)) in StrainCase::VOIGT_PAIRS.iter().enumerate() {
        if i == j {
            m[(i, i)] = v[q];
        } else {
            m[(i, j)] = 0.5 * v[q];
            m[(j, i)] = 0.5 * v[q];
        }
    }
    m
}

/// 6x6 Voigt stiffness in GPa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveStiffness {
    #[serde(rename = "C")]
    pub c: [[f64; 6]; 6],
}

impl EffectiveStiffness {
    pub fn matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.c[i][j])
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                worst = worst.max((self.c[i][j] - self.c[j][i]).abs());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> [f64; 6] {
        let m = self.matrix();
        let sym = (m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3], ev[4], ev[5]]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EffectiveStiffness { c: self.c.map(|row| row.map(|v| v * factor)) }
    }

    /// Stiffness of an isotropic solid, for reference and testing.
    pub fn isotropic(young_modulus: f64, poisson_ratio: f64) -> Self {
        let (e, nu) = (young_modulus, poisson_ratio);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut c = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = lambda;
            }
            c[i][i] = lambda + 2.0 * mu;
            c[i + 3][i + 3] = mu;
        }
        EffectiveStiffness { c }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineeringConstants {
    #[serde(rename = "Ex")]
    pub e_x: f64,
    #[serde(rename = "Ey")]
    pub e_y: f64,
    #[serde(rename = "Ez")]
    pub e_z: f64,
    #[serde(rename = "Gxy")]
    pub g_xy: f64,
    #[serde(rename = "Gxz")]
    pub g_xz: f64,
    #[serde(rename = "Gyz")]
    pub g_yz: f64,
    pub nu_xy: f64,
    pub nu_xz: f64,
    pub nu_yz: f64,
}

/// Directional moduli and Poisson ratios from the compliance `S = C^-1`.
pub fn engineering_constants(stiffness: &EffectiveStiffness) -> Result<EngineeringConstants> {
    let c = stiffness.matrix();
    let scale = stiffness.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::NotInvertible("stiffness matrix is zero or non-finite".into()));
    }
    let s = (c / scale)
        .try_inverse()
        .map(|s| s / scale)
        .ok_or_else(|| Error::NotInvertible("stiffness matrix is singular".into()))?;
    if (0..6).any(|i| !(s[(i, i)].is_finite() && s[(i, i)] > 0.0)) {
        return Err(Error::NotInvertible("compliance has a non-positive diagonal".into()));
    }
    Ok(EngineeringConstants {
        e_x: 1.0 / s[(0, 0)],
        e_y: 1.0 / s[(1, 1)],
        e_z: 1.0 / s[(2, 2)],
        g_xy: 1.0 / s[(3, 3)],
        g_xz: 1.0 / s[(4, 4)],
        g_yz: 1.0 / s[(5, 5)],
        nu_xy: -s[(1, 0)] / s[(0, 0)],
        nu_xz: -s[(2, 0)] / s[(0, 0)],
        nu_yz: -s[(2, 1)] / s[(1, 1)],
    })
}

/// Solved fields of the six unit strain cases on one frame system.
struct CaseSolutions {
    system: FrameSystem,
    /// `displacements[q][e]`: full displacement of element `e` in case `q`.
    displacements: Vec<Vec<frame::Vector12>>,
    volume: f64,
}

fn solve_unit_cases(graph: &LatticeGraph, material: &Material) -> Result<CaseSolutions> {
    material.validate()?;
    let system = FrameSystem::assemble(graph, material)?;
    let factor = SkylineCholesky::factor(system.stiffness())?;
    let mut displacements = Vec::with_capacity(6);
    for case in StrainCase::all() {
        let eps = case.macro_strain();
        let fluctuation = factor.solve(&system.load_vector(&eps))?;
        displacements.push(system.element_displacements(&eps, &fluctuation));
    }
    Ok(CaseSolutions { system, displacements, volume: graph.box_volume() })
}

fn finish(c: [[f64; 6]; 6]) -> Result<EffectiveStiffness> {
    if c.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("stiffness contains non-finite entries".into()));
    }
    let mut sym = c;
    for i in 0..6 {
        for j in 0..i {
            let v = 0.5 * (c[i][j] + c[j][i]);
            sym[i][j] = v;
            sym[j][i] = v;
        }
    }
    Ok(EffectiveStiffness { c: sym })
}

/// Energy-method stiffness of a tessellated lattice graph.
pub fn effective_stiffness(graph: &LatticeGraph, material: &Material) -> Result<EffectiveStiffness> {
    let sol = solve_unit_cases(graph, material)?;
    let elements = sol.system.elements();
    let energy = |p: usize, q: usize| -> f64 {
        elements
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let (dp, dq) = (&sol.displacements[p][e], &sol.displacements[q][e]);
                0.5 * (dp + dq).dot(&(el.stiffness * (dp + dq)))
            })
            .sum()
    };
    let single: Vec<f64> = (0..6)
        .map(|q| {
            elements
                .iter()
                .enumerate()
                .map(|(e, el)| {
                    let d = &sol.displacements[q][e];
                    0.5 * d.dot(&(el.stiffness * d))
                })
                .sum()
        })
        .collect();
    let mut c = [[0.0; 6]; 6];
    for p in 0..6 {
        c[p][p] = 2.0 * single[p] / sol.volume;
        for q in 0..p {
            let v = (energy(p, q) - single[p] - single[q]) / sol.volume;
            c[p][q] = v;
            c[q][p] = v;
        }
    }
    finish(c)
}

/// Stiffness from volume-averaged strut end forces,
/// `sigma = (1/V) sum f_b (x) (x_b - x_a)`. Independent route used to
/// cross-check [`effective_stiffness`].
pub fn stiffness_from_strut_forces(graph: &LatticeGraph, material: &Material) -> Result<EffectiveStiffness> {
    let sol = solve_unit_cases(graph, material)?;
    let mut c = [[0.0; 6]; 6];
    for q in 0..6 {
        let mut stress = Matrix3::zeros();
        for (e, el) in sol.system.elements().iter().enumerate() {
            let forces = el.stiffness * sol.displacements[q][e];
            let fb = nalgebra::Vector3::new(forces[6], forces[7], forces[8]);
            let chord = nalgebra::Vector3::from(el.chord());
            stress += fb * chord.transpose();
        }
        stress /= sol.volume;
        for (p, &(i, j)) in StrainCase::VOIGT_PAIRS.iter().enumerate() {
            c[p][q] = 0.5 * (stress[(i, j)] + stress[(j, i)]);
        }
    }
    finish(c)
}

/// Everything the `homogenize` command and endpoint report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationReport {
    pub topology: Topology,
    pub thickness_mm: f64,
    pub cell_size_mm: f64,
    pub material: Material,
    #[serde(rename = "C")]
    pub c: [[f64; 6]; 6],
    pub engineering: EngineeringConstants,
    pub relative_density: f64,
}

/// Build, tessellate and homogenize in one go.
pub fn homogenize(
    topology: Topology,
    thickness: f64,
    material: &Material,
    cell_size: f64,
    spec: TessellationSpec,
) -> Result<HomogenizationReport> {
    let cell = build_unit_cell(topology, cell_size, thickness)?;
    let graph = tessellate(&cell, spec)?;
    let density = relative_density(&graph)?;
    let stiffness = effective_stiffness(&graph, material)?;
    let engineering = engineering_constants(&stiffness)?;
    Ok(HomogenizationReport {
        topology,
        thickness_mm: thickness,
        cell_size_mm: cell_size,
        material: *material,
        c: stiffness.c,
        engineering,
        relative_density: density,
    })
}

/// Effective Young's modulus along x, `1 / S11`.
pub fn homogenize_young_modulus(
    topology: Topology,
    thickness: f64,
    material: &Material,
    cell_size: f64,
    spec: TessellationSpec,
) -> Result<f64> {
    homogenize(topology, thickness, material, cell_size, spec).map(|r| r.engineering.e_x)
}
