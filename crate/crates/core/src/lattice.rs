//! Graph-based lattice unit cells.
//!
//! Every topology is described as a strut graph inside a cubic cell of edge
//! `cell_size`. Nodes are placed at exact rational fractions of the cell edge
//! so that translated copies fuse cleanly when a cell is tessellated. Each
//! unit cell is face-complete: a node lying on a lower face has its image on
//! the opposite upper face, which keeps the periodic pairing well defined for
//! any tessellation.
//!
//! The catalogue (fractional coordinates, cell edge = 1):
//!
//! | topology              | nodes | struts | construction                                            |
//! |-----------------------|------:|-------:|---------------------------------------------------------|
//! | Simple Cubic          |     8 |     12 | cube edges                                              |
//! | Body Centred Cubic    |     9 |      8 | centre to every corner                                  |
//! | Face Centred Cubic    |    14 |     24 | each face centre to its four corners                    |
//! | Octet                 |    14 |     36 | FCC sites, all nearest-neighbour pairs (d = 1/sqrt 2)   |
//! | Diamond               |    14 |     16 | diamond-cubic bonds, 4 interior sites x 4 bonds         |
//! | Kelvin Cell           |    24 |     36 | truncated octahedron 1/2 + perm(0, +-1/4, +-1/2)        |
//! | Iso Truss             |    15 |     14 | centre to the 6 face centres and the 8 corners          |
//! | FCC Foam              |    21 |     32 | rhombic-dodecahedron skeleton: tetrahedral holes to     |
//! |                       |       |        | octahedral holes (body centre, edge midpoints)          |
//! | Hexagonal Honeycomb   |    21 |     35 | 7-node hexagonal wall graph, extruded                   |
//! | Triangular Honeycomb  |    30 |     65 | 10-node triangulated wall graph, extruded               |
//! | Re entrant Honeycomb  |    30 |     47 | 10-node bow-tie wall graph, extruded                    |
//!
//! Honeycombs are prismatic frames: the in-plane wall graph (x-y) is repeated
//! on the layers z = 0, 1/2 and 1, and every in-plane vertex carries vertical
//! struts between consecutive layers.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance (times cell size) under which two nodes are the same.
pub const DEDUP_TOLERANCE: f64 = 1e-9;

/// Default cubic cell edge in millimetres.
pub const DEFAULT_CELL_SIZE: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    SimpleCubic,
    Octet,
    TriangularHoneycomb,
    ReEntrantHoneycomb,
    Diamond,
    BodyCentredCubic,
    FaceCentredCubic,
    HexagonalHoneycomb,
    KelvinCell,
    IsoTruss,
    FccFoam,
}

impl Topology {
    pub const ALL: [Topology; 11] = [
        Topology::SimpleCubic,
        Topology::Octet,
        Topology::TriangularHoneycomb,
        Topology::ReEntrantHoneycomb,
        Topology::Diamond,
        Topology::BodyCentredCubic,
        Topology::FaceCentredCubic,
        Topology::HexagonalHoneycomb,
        Topology::KelvinCell,
        Topology::IsoTruss,
        Topology::FccFoam,
    ];

    /// Dataset label, e.g. `"Re entrant Honeycomb"`.
    pub fn label(self) -> &'static str {
        match self {
            Topology::SimpleCubic => "Simple Cubic",
            Topology::Octet => "Octet",
            Topology::TriangularHoneycomb => "Triangular Honeycomb",
            Topology::ReEntrantHoneycomb => "Re entrant Honeycomb",
            Topology::Diamond => "Diamond",
            Topology::BodyCentredCubic => "Body Centred Cubic",
            Topology::FaceCentredCubic => "Face Centred Cubic",
            Topology::HexagonalHoneycomb => "Hexagonal Honeycomb",
            Topology::KelvinCell => "Kelvin Cell",
            Topology::IsoTruss => "Iso Truss",
            Topology::FccFoam => "FCC Foam",
        }
    }

    /// Command-line / query-string identifier, e.g. `"re_entrant_honeycomb"`.
    pub fn slug(self) -> &'static str {
        match self {
            Topology::SimpleCubic => "simple_cubic",
            Topology::Octet => "octet",
            Topology::TriangularHoneycomb => "triangular_honeycomb",
            Topology::ReEntrantHoneycomb => "re_entrant_honeycomb",
            Topology::Diamond => "diamond",
            Topology::BodyCentredCubic => "body_centred_cubic",
            Topology::FaceCentredCubic => "face_centred_cubic",
            Topology::HexagonalHoneycomb => "hexagonal_honeycomb",
            Topology::KelvinCell => "kelvin_cell",
            Topology::IsoTruss => "iso_truss",
            Topology::FccFoam => "fcc_foam",
        }
    }

    pub fn from_label(label: &str) -> Option<Topology> {
        Topology::ALL.into_iter().find(|t| t.label() == label)
    }

    /// Topologies whose strut graph is invariant under the cubic point group.
    pub fn is_cubic(self) -> bool {
        matches!(
            self,
            Topology::SimpleCubic
                | Topology::BodyCentredCubic
                | Topology::FaceCentredCubic
                | Topology::Octet
                | Topology::Diamond
                | Topology::KelvinCell
                | Topology::IsoTruss
        )
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Topology {
    type Err = Error;

    /// Accepts the dataset label, the slug, or either with `-`/space/`_` and
    /// case differences (`"Body-Centred cubic"`, `"bcc"` is not accepted).
    fn from_str(s: &str) -> Result<Topology> {
        let norm = |v: &str| {
            v.chars()
                .filter(|c| !matches!(c, ' ' | '_' | '-'))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        };
        let wanted = norm(s);
        Topology::ALL
            .into_iter()
            .find(|t| norm(t.slug()) == wanted)
            .ok_or_else(|| Error::UnknownLabel {
                label: s.to_string(),
                known: Topology::ALL.iter().map(|t| t.label().to_string()).collect(),
            })
    }
}

/// Number of unit cells along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TessellationSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl TessellationSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(invalid(format!("tessellation counts must be >= 1, got ({nx},{ny},{nz})")));
        }
        Ok(TessellationSpec { nx, ny, nz })
    }

    pub fn single() -> Self {
        TessellationSpec { nx: 1, ny: 1, nz: 1 }
    }

    fn counts(self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl Default for TessellationSpec {
    fn default() -> Self {
        TessellationSpec { nx: 2, ny: 2, nz: 2 }
    }
}

/// `node` sits at `image + shift * box`; `image` is the canonical copy of the
/// node inside the half-open periodic box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicImage {
    pub node: usize,
    pub image: usize,
    pub shift: [i32; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGraph {
    cell_size: f64,
    strut_diameter: f64,
    cells: [usize; 3],
    nodes: Vec<[f64; 3]>,
    struts: Vec<[usize; 2]>,
    periodicity: Vec<PeriodicImage>,
}

/// JSON export consumed by the CLI and the web client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub cell_size: f64,
    pub strut_diameter: f64,
    pub nodes: Vec<[f64; 3]>,
    pub struts: Vec<[usize; 2]>,
}

impl LatticeGraph {
    /// Validates the graph and derives its periodicity map for the box
    /// `cell_size * cells`.
    pub fn new(
        nodes: Vec<[f64; 3]>,
        struts: Vec<[usize; 2]>,
        cell_size: f64,
        strut_diameter: f64,
        cells: [usize; 3],
    ) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(invalid(format!("cell size must be positive, got {cell_size}")));
        }
        if !(strut_diameter.is_finite() && strut_diameter > 0.0 && strut_diameter < cell_size) {
            return Err(invalid(format!(
                "strut diameter must lie in (0, {cell_size}), got {strut_diameter}"
            )));
        }
        if cells.contains(&0) {
            return Err(invalid("cell counts must be >= 1"));
        }
        let tol = DEDUP_TOLERANCE * cell_size;
        let extent = cells.map(|c| c as f64 * cell_size);
        let mut seen = HashMap::with_capacity(nodes.len());
        for (i, p) in nodes.iter().enumerate() {
            for a in 0..3 {
                if !p[a].is_finite() || p[a] < -tol || p[a] > extent[a] + tol {
                    return Err(invalid(format!("node {i} at {p:?} lies outside the bounding box")));
                }
            }
            if let Some(j) = seen.insert(grid_key(*p, tol), i) {
                return Err(invalid(format!("nodes {j} and {i} coincide")));
            }
        }
        let mut pairs = HashSet::with_capacity(struts.len());
        for (k, &[a, b]) in struts.iter().enumerate() {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(invalid(format!("strut {k} references a missing node")));
            }
            if distance(nodes[a], nodes[b]) <= tol {
                return Err(invalid(format!("strut {k} has zero length")));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(invalid(format!("strut {k} duplicates ({a},{b})")));
            }
        }

        let periodicity = periodic_images(&nodes, &seen, extent, tol);
        Ok(LatticeGraph { cell_size, strut_diameter, cells, nodes, struts, periodicity })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn strut_diameter(&self) -> f64 {
        self.strut_diameter
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn struts(&self) -> &[[usize; 2]] {
        &self.struts
    }

    pub fn periodicity(&self) -> &[PeriodicImage] {
        &self.periodicity
    }

    /// Edge lengths of the periodic box.
    pub fn box_extent(&self) -> [f64; 3] {
        self.cells.map(|c| c as f64 * self.cell_size)
    }

    pub fn box_volume(&self) -> f64 {
        self.box_extent().iter().product()
    }

    pub fn strut_length(&self, strut: usize) -> f64 {
        let [a, b] = self.struts[strut];
        distance(self.nodes[a], self.nodes[b])
    }

    /// Same geometry with a different strut diameter.
    pub fn with_diameter(&self, strut_diameter: f64) -> Result<Self> {
        if !(strut_diameter.is_finite() && strut_diameter > 0.0 && strut_diameter < self.cell_size) {
            return Err(invalid(format!(
                "strut diameter must lie in (0, {}), got {strut_diameter}",
                self.cell_size
            )));
        }
        Ok(LatticeGraph { strut_diameter, ..self.clone() })
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            cell_size: self.cell_size,
            strut_diameter: self.strut_diameter,
            nodes: self.nodes.clone(),
            struts: self.struts.clone(),
        }
    }
}

fn grid_key(p: [f64; 3], tol: f64) -> [i64; 3] {
    p.map(|x| (x / tol).round() as i64)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn periodic_images(
    nodes: &[[f64; 3]],
    index: &HashMap<[i64; 3], usize>,
    extent: [f64; 3],
    tol: f64,
) -> Vec<PeriodicImage> {
    let mut out = Vec::new();
    for (i, p) in nodes.iter().enumerate() {
        let mut shift = [0i32; 3];
        let mut reduced = *p;
        for a in 0..3 {
            if (p[a] - extent[a]).abs() <= tol {
                shift[a] = 1;
                reduced[a] = 0.0;
            }
        }
        if shift == [0; 3] {
            continue;
        }
        if let Some(&image) = index.get(&grid_key(reduced, tol)) {
            out.push(PeriodicImage { node: i, image, shift });
        }
    }
    out
}

/// Canonical single-cell graph for `topology`; `thickness` is the strut
/// diameter in millimetres.
pub fn build_unit_cell(topology: Topology, cell_size: f64, thickness: f64) -> Result<LatticeGraph> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(invalid(format!("cell size must be positive, got {cell_size}")));
    }
    if !(thickness.is_finite() && thickness > 0.0 && thickness < cell_size) {
        return Err(invalid(format!("thickness must lie in (0, {cell_size}), got {thickness}")));
    }
    let mut cell = CellBuilder::default();
    match topology {
        Topology::SimpleCubic => simple_cubic(&mut cell),
        Topology::BodyCentredCubic => body_centred(&mut cell),
        Topology::FaceCentredCubic => face_centred(&mut cell),
        Topology::Octet => {
            face_centred(&mut cell);
            for (i, a) in FACE_CENTRES.iter().enumerate() {
                for b in &FACE_CENTRES[i + 1..] {
                    // adjacent faces share no axis at 0 or 1 in the same slot
                    if a.iter().zip(b).filter(|(x, y)| x == y).count() == 1 {
                        cell.strut(*a, *b);
                    }
                }
            }
        }
        Topology::Diamond => diamond(&mut cell),
        Topology::KelvinCell => kelvin(&mut cell),
        Topology::IsoTruss => {
            for f in FACE_CENTRES {
                cell.strut(CENTRE, f);
            }
            for c in corners() {
                cell.strut(CENTRE, c);
            }
        }
        Topology::FccFoam => fcc_foam(&mut cell),
        Topology::HexagonalHoneycomb => extrude(&mut cell, &HEXAGONAL_WALLS),
        Topology::TriangularHoneycomb => extrude(&mut cell, &TRIANGULAR_WALLS),
        Topology::ReEntrantHoneycomb => extrude(&mut cell, &RE_ENTRANT_WALLS),
    }
    let nodes = cell.nodes.iter().map(|p| p.map(|x| x * cell_size)).collect();
    LatticeGraph::new(nodes, cell.struts, cell_size, thickness, [1, 1, 1])
}

/// Translates `cell` over an `nx x ny x nz` block, fusing coincident nodes and
/// dropping struts that appear twice on shared faces.
pub fn tessellate(cell: &LatticeGraph, spec: TessellationSpec) -> Result<LatticeGraph> {
    let counts = spec.counts();
    if counts.contains(&0) {
        return Err(invalid("tessellation counts must be >= 1"));
    }
    let step = cell.box_extent();
    let tol = DEDUP_TOLERANCE * cell.cell_size;
    let mut nodes = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut struts = Vec::new();
    let mut pairs = HashSet::new();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let offset = [i as f64 * step[0], j as f64 * step[1], k as f64 * step[2]];
                let map: Vec<usize> = cell
                    .nodes
                    .iter()
                    .map(|p| {
                        let q = [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]];
                        *index.entry(grid_key(q, tol)).or_insert_with(|| {
                            nodes.push(q);
                            nodes.len() - 1
                        })
                    })
                    .collect();
                for &[a, b] in &cell.struts {
                    let (a, b) = (map[a], map[b]);
                    if pairs.insert((a.min(b), a.max(b))) {
                        struts.push([a, b]);
                    }
                }
            }
        }
    }
    let cells = [0, 1, 2].map(|a| cell.cells[a] * counts[a]);
    LatticeGraph::new(nodes, struts, cell.cell_size, cell.strut_diameter, cells)
}

/// Solid fraction of the bounding box, summing full cylinder volumes with no
/// correction for overlap at the nodes.
pub fn relative_density(graph: &LatticeGraph) -> Result<f64> {
    let area = std::f64::consts::PI * graph.strut_diameter.powi(2) / 4.0;
    let solid: f64 = (0..graph.struts.len()).map(|s| area * graph.strut_length(s)).sum();
    let density = solid / graph.box_volume();
    if density >= 1.0 {
        return Err(Error::GeometryTooDense { density });
    }
    Ok(density)
}

#[derive(Default)]
struct CellBuilder {
    nodes: Vec<[f64; 3]>,
    struts: Vec<[usize; 2]>,
}

impl CellBuilder {
    fn node(&mut self, p: [f64; 3]) -> usize {
        if let Some(i) = self.nodes.iter().position(|q| distance(*q, p) < 1e-12) {
            return i;
        }
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    fn strut(&mut self, a: [f64; 3], b: [f64; 3]) {
        let (i, j) = (self.node(a), self.node(b));
        if !self.struts.iter().any(|&[x, y]| (x, y) == (i, j) || (x, y) == (j, i)) {
            self.struts.push([i, j]);
        }
    }
}

const CENTRE: [f64; 3] = [0.5, 0.5, 0.5];

const FACE_CENTRES: [[f64; 3]; 6] = [
    [0.0, 0.5, 0.5],
    [1.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 1.0, 0.5],
    [0.5, 0.5, 0.0],
    [0.5, 0.5, 1.0],
];

fn corners() -> impl Iterator<Item = [f64; 3]> {
    (0..8).map(|m| [(m & 1) as f64, ((m >> 1) & 1) as f64, ((m >> 2) & 1) as f64])
}

fn simple_cubic(cell: &mut CellBuilder) {
    for c in corners() {
        for a in 0..3 {
            if c[a] == 0.0 {
                let mut d = c;
                d[a] = 1.0;
                cell.strut(c, d);
            }
        }
    }
}

fn body_centred(cell: &mut CellBuilder) {
    for c in corners() {
        cell.strut(CENTRE, c);
    }
}

fn face_centred(cell: &mut CellBuilder) {
    for f in FACE_CENTRES {
        let axis = (0..3).find(|&a| f[a] != 0.5).expect("face centre has one fixed axis");
        for c in corners().filter(|c| c[axis] == f[axis]) {
            cell.strut(f, c);
        }
    }
}

fn diamond(cell: &mut CellBuilder) {
    // Second sublattice sites (FCC shifted by 1/4) and their four bond vectors.
    const SITES: [[f64; 3]; 4] =
        [[0.25, 0.25, 0.25], [0.25, 0.75, 0.75], [0.75, 0.25, 0.75], [0.75, 0.75, 0.25]];
    const BONDS: [[f64; 3]; 4] =
        [[-0.25, -0.25, -0.25], [-0.25, 0.25, 0.25], [0.25, -0.25, 0.25], [0.25, 0.25, -0.25]];
    for s in SITES {
        for b in BONDS {
            cell.strut(s, [s[0] + b[0], s[1] + b[1], s[2] + b[2]]);
        }
    }
}

fn kelvin(cell: &mut CellBuilder) {
    let mut verts = Vec::with_capacity(24);
    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        for s1 in [-1.0, 1.0] {
            for s2 in [-1.0, 1.0] {
                let base = [0.0, 0.25 * s1, 0.5 * s2];
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[perm[a]] = 0.5 + base[a];
                }
                verts.push(v);
            }
        }
    }
    let edge = 2f64.sqrt() / 4.0;
    for (i, a) in verts.iter().enumerate() {
        for b in &verts[i + 1..] {
            if (distance(*a, *b) - edge).abs() < 1e-9 {
                cell.strut(*a, *b);
            }
        }
    }
}

fn fcc_foam(cell: &mut CellBuilder) {
    let is_octahedral_hole = |p: [f64; 3]| {
        let halves = p.iter().filter(|&&x| x == 0.5).count();
        halves == 3 || (halves == 1 && p.iter().all(|&x| x == 0.0 || x == 0.5 || x == 1.0))
    };
    for m in 0..8 {
        let t = [0.25 + 0.5 * (m & 1) as f64, 0.25 + 0.5 * ((m >> 1) & 1) as f64, 0.25 + 0.5 * ((m >> 2) & 1) as f64];
        for d in 0..8 {
            let s = [(d & 1) as f64, ((d >> 1) & 1) as f64, ((d >> 2) & 1) as f64].map(|b| 0.5 * b - 0.25);
            let q = [t[0] + s[0], t[1] + s[1], t[2] + s[2]];
            if is_octahedral_hole(q) {
                cell.strut(t, q);
            }
        }
    }
}

type Wall = ([f64; 2], [f64; 2]);

const HEXAGONAL_WALLS: [Wall; 7] = [
    ([0.0, 1.0 / 6.0], [0.0, 0.5]),
    ([1.0, 1.0 / 6.0], [1.0, 0.5]),
    ([0.0, 0.5], [0.5, 2.0 / 3.0]),
    ([1.0, 0.5], [0.5, 2.0 / 3.0]),
    ([0.5, 2.0 / 3.0], [0.5, 1.0]),
    ([0.5, 0.0], [0.0, 1.0 / 6.0]),
    ([0.5, 0.0], [1.0, 1.0 / 6.0]),
];

const TRIANGULAR_WALLS: [Wall; 15] = [
    ([0.0, 0.0], [0.5, 0.0]),
    ([0.5, 0.0], [1.0, 0.0]),
    ([0.0, 1.0], [0.5, 1.0]),
    ([0.5, 1.0], [1.0, 1.0]),
    ([0.0, 0.5], [0.25, 0.5]),
    ([0.25, 0.5], [0.75, 0.5]),
    ([0.75, 0.5], [1.0, 0.5]),
    ([0.0, 0.0], [0.25, 0.5]),
    ([0.5, 0.0], [0.25, 0.5]),
    ([0.5, 0.0], [0.75, 0.5]),
    ([1.0, 0.0], [0.75, 0.5]),
    ([0.25, 0.5], [0.0, 1.0]),
    ([0.25, 0.5], [0.5, 1.0]),
    ([0.75, 0.5], [0.5, 1.0]),
    ([0.75, 0.5], [1.0, 1.0]),
];

// Vertical walls of length 5/8 joined by walls inclined 1/8 downward toward
// the middle column; the left column is split where it crosses y = 0.
const RE_ENTRANT_WALLS: [Wall; 9] = [
    ([0.0, 0.0], [0.0, 5.0 / 16.0]),
    ([0.0, 11.0 / 16.0], [0.0, 1.0]),
    ([1.0, 0.0], [1.0, 5.0 / 16.0]),
    ([1.0, 11.0 / 16.0], [1.0, 1.0]),
    ([0.5, 3.0 / 16.0], [0.5, 13.0 / 16.0]),
    ([0.0, 5.0 / 16.0], [0.5, 3.0 / 16.0]),
    ([1.0, 5.0 / 16.0], [0.5, 3.0 / 16.0]),
    ([0.5, 13.0 / 16.0], [0.0, 11.0 / 16.0]),
    ([0.5, 13.0 / 16.0], [1.0, 11.0 / 16.0]),
];

fn extrude(cell: &mut CellBuilder, walls: &[Wall]) {
    const LAYERS: [f64; 3] = [0.0, 0.5, 1.0];
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    for &(a, b) in walls {
        for p in [a, b] {
            if !vertices.iter().any(|v| v == &p) {
                vertices.push(p);
            }
        }
    }
    for z in LAYERS {
        for &(a, b) in walls {
            cell.strut([a[0], a[1], z], [b[0], b[1], z]);
        }
    }
    for v in &vertices {
        for w in LAYERS.windows(2) {
            cell.strut([v[0], v[1], w[0]], [v[0], v[1], w[1]]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for t in Topology::ALL {
            assert_eq!(Topology::from_label(t.label()), Some(t));
            assert_eq!(t.label().parse::<Topology>().unwrap(), t);
            assert_eq!(t.slug().parse::<Topology>().unwrap(), t);
        }
        assert!("Gyroid".parse::<Topology>().is_err());
    }

    #[test]
    fn simple_cubic_is_the_cube_frame() {
        let g = build_unit_cell(Topology::SimpleCubic, 5.0, 0.3).unwrap();
        assert_eq!(g.nodes().len(), 8);
        assert_eq!(g.struts().len(), 12);
        assert!((0..12).all(|s| (g.strut_length(s) - 5.0).abs() < 1e-12));
        assert_eq!(g.strut_diameter(), 0.3);
    }

    #[test]
    fn body_centred_cubic_has_eight_diagonals() {
        let g = build_unit_cell(Topology::BodyCentredCubic, 5.0, 0.3).unwrap();
        assert_eq!(g.nodes().len(), 9);
        assert_eq!(g.struts().len(), 8);
        let diag = 5.0 * 3f64.sqrt() / 2.0;
        assert!((0..8).all(|s| (g.strut_length(s) - diag).abs() < 1e-12));
    }

    #[test]
    fn catalogue_counts_match_module_table() {
        let expected = [
            (Topology::SimpleCubic, 8, 12),
            (Topology::BodyCentredCubic, 9, 8),
            (Topology::FaceCentredCubic, 14, 24),
            (Topology::Octet, 14, 36),
            (Topology::Diamond, 14, 16),
            (Topology::KelvinCell, 24, 36),
            (Topology::IsoTruss, 15, 14),
            (Topology::FccFoam, 21, 32),
            (Topology::HexagonalHoneycomb, 21, 35),
            (Topology::TriangularHoneycomb, 30, 65),
            (Topology::ReEntrantHoneycomb, 30, 47),
        ];
        for (t, n, s) in expected {
            let g = build_unit_cell(t, 5.0, 0.3).unwrap();
            assert_eq!((g.nodes().len(), g.struts().len()), (n, s), "{t}");
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(build_unit_cell(Topology::Octet, 0.0, 0.3), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_unit_cell(Topology::Octet, 5.0, -0.1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_unit_cell(Topology::Octet, 5.0, 5.0), Err(Error::InvalidArgument(_))));
        assert!(TessellationSpec::new(0, 2, 2).is_err());
    }

    #[test]
    fn graph_rejects_duplicates_and_degenerate_struts() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert!(LatticeGraph::new(nodes.clone(), vec![[0, 1], [1, 0]], 1.0, 0.1, [1, 1, 1]).is_err());
        assert!(LatticeGraph::new(nodes.clone(), vec![[0, 0]], 1.0, 0.1, [1, 1, 1]).is_err());
        let twins = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1e-12]];
        assert!(LatticeGraph::new(twins, vec![], 1.0, 0.1, [1, 1, 1]).is_err());
        let outside = vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]];
        assert!(LatticeGraph::new(outside, vec![[0, 1]], 1.0, 0.1, [1, 1, 1]).is_err());
    }

    #[test]
    fn identity_tessellation_keeps_the_graph() {
        for t in Topology::ALL {
            let g = build_unit_cell(t, 5.0, 0.3).unwrap();
            let same = tessellate(&g, TessellationSpec::single()).unwrap();
            assert_eq!(same.nodes().len(), g.nodes().len());
            assert_eq!(same.struts().len(), g.struts().len());
        }
    }

    #[test]
    fn relative_density_of_simple_cubic_cell() {
        let g = build_unit_cell(Topology::SimpleCubic, 5.0, 0.5).unwrap();
        // 12 * (pi * 0.25 / 4) * 5 / 125
        let expected = 12.0 * (std::f64::consts::PI * 0.25 / 4.0) * 5.0 / 125.0;
        assert!((relative_density(&g).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.0942).abs() < 5e-5);
    }

    #[test]
    fn overly_thick_struts_are_rejected() {
        let g = build_unit_cell(Topology::Octet, 1.0, 0.9).unwrap();
        assert!(matches!(relative_density(&g), Err(Error::GeometryTooDense { .. })));
    }

    #[test]
    fn export_lists_nodes_and_struts() {
        let g = build_unit_cell(Topology::BodyCentredCubic, 5.0, 0.2).unwrap();
        let json = serde_json::to_value(g.export()).unwrap();
        assert_eq!(json["nodes"].as_array().unwrap().len(), 9);
        assert_eq!(json["struts"].as_array().unwrap().len(), 8);
        assert_eq!(json["cell_size"], 5.0);
    }
}
