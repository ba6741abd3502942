//! Closed, consistently oriented triangle meshes.
//!
//! A [`TriangleMesh`] bounds the compact set `Ω` and its faces are wound
//! counterclockwise when seen from the exterior domain `U`, so face normals
//! point out of `Ω` (into `U`). Construction validates closedness,
//! orientation and positive enclosed volume; every other module may rely on
//! those invariants.

mod classify;
pub(crate) mod generate;
pub(crate) mod geometry;
mod io;

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::Vec3;

pub use classify::{classify, ClassifyTolerances, HypothesisFlags};
pub use generate::{
    make_dumbbell, make_egg, make_ellipsoid, make_icosphere, make_revolution, make_torus,
};
pub use geometry::{angle_defects, compute_geometry, SurfaceGeometry};
pub use io::{load_mesh, parse_mesh, write_off, MeshFormat};

/// Errors raised while reading or validating a mesh.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh has no faces")]
    Empty,
    #[error("face {face} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("vertex {0} is not referenced by any face")]
    UnreferencedVertex(usize),
    #[error("edge ({0}, {1}) is shared by {2} faces, expected exactly 2")]
    NonManifold(usize, usize, usize),
    #[error("orientation error: {0}")]
    Orientation(String),
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("curvature fit failed at vertex {vertex}")]
    CurvatureFit { vertex: usize },
}

/// Options applied while building a mesh from raw vertex and face lists.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Flip faces to restore a consistent winding instead of failing.
    pub repair_orientation: bool,
}

/// Edge and vertex incidence tables of a closed triangle mesh.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Undirected edge `(min, max)` to its two incident faces.
    pub edge_faces: BTreeMap<(usize, usize), [usize; 2]>,
    /// Faces incident to each vertex.
    pub vertex_faces: Vec<Vec<usize>>,
    /// Sorted one-ring vertex neighbours.
    pub vertex_neighbors: Vec<Vec<usize>>,
    /// Face across each edge `(f[k], f[k+1])`.
    pub face_neighbors: Vec<[usize; 3]>,
}

/// A closed, oriented triangulated surface in R³.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    adjacency: Adjacency,
}

impl TriangleMesh {
    /// Builds and validates a mesh; see [`TriangleMesh::with_options`].
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        Self::with_options(vertices, faces, LoadOptions::default())
    }

    /// Builds a mesh, checking that every edge has exactly two faces, that
    /// windings agree across every edge, and that each connected component
    /// encloses positive volume. Components with negative volume are flipped
    /// as a whole; inconsistent windings are repaired only when requested.
    pub fn with_options(
        vertices: Vec<Vec3>,
        mut faces: Vec<[usize; 3]>,
        options: LoadOptions,
    ) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let count = vertices.len();
        let mut used = vec![false; count];
        for (fi, f) in faces.iter().enumerate() {
            for &index in f {
                if index >= count {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index,
                        count,
                    });
                }
                used[index] = true;
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi, area: 0.0 });
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnreferencedVertex(v));
        }

        let edge_faces = undirected_edges(&faces)?;
        let face_neighbors = face_neighbors(&faces, &edge_faces);
        let components = face_components(faces.len(), &face_neighbors);

        orient_components(&mut faces, &edge_faces, &components, options)?;

        // Global reorientation per component.
        let component_count = components.iter().copied().max().map_or(0, |m| m + 1);
        let mut volumes = vec![0.0; component_count];
        for (fi, f) in faces.iter().enumerate() {
            volumes[components[fi]] += triple(&vertices, f) / 6.0;
        }
        for (fi, f) in faces.iter_mut().enumerate() {
            if volumes[components[fi]] < 0.0 {
                f.swap(1, 2);
            }
        }
        for (c, v) in volumes.iter().enumerate() {
            if v.abs() <= 0.0 || !v.is_finite() {
                return Err(MeshError::Orientation(format!(
                    "component {c} encloses non-positive volume {v:e}"
                )));
            }
        }

        let mut vertex_faces = vec![Vec::new(); count];
        let mut vertex_neighbors = vec![Vec::new(); count];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                vertex_faces[f[k]].push(fi);
                vertex_neighbors[f[k]].push(f[(k + 1) % 3]);
                vertex_neighbors[f[k]].push(f[(k + 2) % 3]);
            }
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let face_neighbors = self::face_neighbors(&faces, &edge_faces);
        Ok(Self {
            vertices,
            faces,
            adjacency: Adjacency {
                edge_faces,
                vertex_faces,
                vertex_neighbors,
                face_neighbors,
            },
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_faces.len()
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    /// Number of connected components of the face graph.
    pub fn component_count(&self) -> usize {
        face_components(self.faces.len(), &self.adjacency.face_neighbors)
            .into_iter()
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Half the cross product of two edges; its norm is the face area.
    pub fn area_vector(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(face);
        0.5 * (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        self.area_vector(face).norm()
    }

    /// Unit normal pointing out of the enclosed region.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.area_vector(face).normalize()
    }

    pub fn face_centroid(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(face);
        (a + b + c) / 3.0
    }

    /// Total polyhedral surface area.
    pub fn area(&self) -> f64 {
        (0..self.face_count()).map(|f| self.face_area(f)).sum()
    }

    /// Sum of the face area vectors; vanishes on closed surfaces.
    pub fn total_area_vector(&self) -> Vec3 {
        (0..self.face_count()).map(|f| self.area_vector(f)).sum()
    }

    /// Axis-aligned bounding box diagonal.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }

    /// Mean edge length over the whole mesh.
    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self
            .adjacency
            .edge_faces
            .keys()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum();
        total / self.edge_count() as f64
    }

    /// Longest edge incident to a vertex.
    pub fn local_edge_length(&self, vertex: usize) -> f64 {
        self.adjacency.vertex_neighbors[vertex]
            .iter()
            .map(|&w| (self.vertices[w] - self.vertices[vertex]).norm())
            .fold(0.0, f64::max)
    }

    /// Longest edge of a face.
    pub fn face_diameter(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_vertices(face);
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    /// Enclosed volume `(1/3) Σ ⟨centroid, area vector⟩`.
    pub fn enclosed_volume(&self) -> f64 {
        self.faces.iter().map(|f| triple(&self.vertices, f)).sum::<f64>() / 6.0
    }

    /// Applies `map` to every vertex, keeping connectivity. `map` must be
    /// orientation preserving.
    pub fn map_vertices(&self, map: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(map).collect(),
            faces: self.faces.clone(),
            adjacency: self.adjacency.clone(),
        }
    }

    /// Uniform scaling about the origin. Panics unless `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        self.map_vertices(|v| v * factor)
    }

    pub fn translated(&self, shift: Vec3) -> Self {
        self.map_vertices(|v| v + shift)
    }

    /// Applies a proper rotation.
    pub fn rotated(&self, rotation: &nalgebra::Rotation3<f64>) -> Self {
        self.map_vertices(|v| rotation * v)
    }
}

fn triple(vertices: &[Vec3], f: &[usize; 3]) -> f64 {
    vertices[f[0]].dot(&vertices[f[1]].cross(&vertices[f[2]]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn undirected_edges(
    faces: &[[usize; 3]],
) -> Result<BTreeMap<(usize, usize), [usize; 2]>, MeshError> {
    let mut incident: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            incident
                .entry(edge_key(f[k], f[(k + 1) % 3]))
                .or_default()
                .push(fi);
        }
    }
    incident
        .into_iter()
        .map(|(e, fs)| {
            if fs.len() == 2 {
                Ok((e, [fs[0], fs[1]]))
            } else {
                Err(MeshError::NonManifold(e.0, e.1, fs.len()))
            }
        })
        .collect()
}

fn face_neighbors(
    faces: &[[usize; 3]],
    edge_faces: &BTreeMap<(usize, usize), [usize; 2]>,
) -> Vec<[usize; 3]> {
    faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut out = [0; 3];
            for k in 0..3 {
                let pair = edge_faces[&edge_key(f[k], f[(k + 1) % 3])];
                out[k] = if pair[0] == fi { pair[1] } else { pair[0] };
            }
            out
        })
        .collect()
}

fn face_components(face_count: usize, neighbors: &[[usize; 3]]) -> Vec<usize> {
    let mut label = vec![usize::MAX; face_count];
    let mut next = 0;
    for seed in 0..face_count {
        if label[seed] != usize::MAX {
            continue;
        }
        label[seed] = next;
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            for &g in &neighbors[f] {
                if label[g] == usize::MAX {
                    label[g] = next;
                    queue.push_back(g);
                }
            }
        }
        next += 1;
    }
    label
}

fn has_directed_edge(f: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b)
}

/// Makes windings agree across every edge, flipping faces breadth-first from
/// one seed per component when `repair_orientation` is set.
fn orient_components(
    faces: &mut [[usize; 3]],
    edge_faces: &BTreeMap<(usize, usize), [usize; 2]>,
    components: &[usize],
    options: LoadOptions,
) -> Result<(), MeshError> {
    let mut visited = vec![false; faces.len()];
    let mut seeded = Vec::new();
    for seed in 0..faces.len() {
        if visited[seed] || seeded.contains(&components[seed]) {
            continue;
        }
        seeded.push(components[seed]);
        visited[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(fi) = queue.pop_front() {
            let f = faces[fi];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let pair = edge_faces[&edge_key(a, b)];
                let g = if pair[0] == fi { pair[1] } else { pair[0] };
                let consistent = has_directed_edge(&faces[g], b, a);
                if visited[g] {
                    if !consistent {
                        return Err(MeshError::Orientation(if options.repair_orientation {
                            "surface is not orientable".to_string()
                        } else {
                            format!("faces {fi} and {g} disagree on edge ({a}, {b})")
                        }));
                    }
                    continue;
                }
                if !consistent {
                    if !options.repair_orientation {
                        return Err(MeshError::Orientation(format!(
                            "faces {fi} and {g} disagree on edge ({a}, {b})"
                        )));
                    }
                    faces[g].swap(1, 2);
                }
                visited[g] = true;
                queue.push_back(g);
            }
        }
    }
    Ok(())
}
