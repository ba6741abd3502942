//! Procedural test geometry: icospheres, ellipsoids, tori and surfaces of
//! revolution.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::TriangleMesh;
use crate::Vec3;

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

/// Unit-sphere points and faces of the `subdivisions`-times refined
/// icosahedron: `10·4^s + 2` vertices, `20·4^s` faces.
pub(crate) fn unit_icosphere_raw(subdivisions: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces = ICOSAHEDRON_FACES.to_vec();

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut split = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = split(a, b, &mut vertices);
            let bc = split(b, c, &mut vertices);
            let ca = split(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Origin-centred icosphere whose vertices lie exactly on the sphere.
pub fn make_icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    make_ellipsoid(radius, radius, radius, subdivisions)
}

/// Axis-aligned, origin-centred ellipsoid with semi-axes `a`, `b`, `c`,
/// obtained by stretching a unit icosphere.
pub fn make_ellipsoid(a: f64, b: f64, c: f64, subdivisions: u32) -> TriangleMesh {
    assert!(a > 0.0 && b > 0.0 && c > 0.0, "semi-axes must be positive");
    let (vertices, faces) = unit_icosphere_raw(subdivisions);
    let vertices = vertices
        .into_iter()
        .map(|v| Vec3::new(a * v.x, b * v.y, c * v.z))
        .collect();
    TriangleMesh::new(vertices, faces).expect("icosphere is a valid closed mesh")
}

/// Torus around the z axis with tube radius `minor` about a circle of radius
/// `major`, sampled on a `rings × sides` grid.
pub fn make_torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    assert!(major > minor && minor > 0.0 && rings >= 3 && sides >= 3);
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = 2.0 * PI * i as f64 / rings as f64;
        for j in 0..sides {
            let v = 2.0 * PI * j as f64 / sides as f64;
            let rho = major + minor * v.cos();
            vertices.push(Vec3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % rings) * sides + (j % sides);
    let mut faces = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus grid is a valid closed mesh")
}

/// Surface of revolution about the z axis with radius profile `profile(z)`
/// on `[z_min, z_max]`; the profile must vanish at both ends. Rings cluster
/// toward the poles so the caps stay well shaped.
pub fn make_revolution(
    profile: impl Fn(f64) -> f64,
    z_min: f64,
    z_max: f64,
    rings: usize,
    segments: usize,
) -> TriangleMesh {
    assert!(z_max > z_min && rings >= 2 && segments >= 3);
    let mut vertices = vec![Vec3::new(0.0, 0.0, z_min)];
    for i in 1..rings {
        let s = i as f64 / rings as f64;
        let z = z_min + (z_max - z_min) * (1.0 - (PI * s).cos()) / 2.0;
        let rho = profile(z);
        assert!(rho > 0.0, "profile must be positive inside the interval");
        // staggered rings give near-equilateral triangles
        let offset = if i % 2 == 0 { 0.0 } else { 0.5 };
        for j in 0..segments {
            let phi = 2.0 * PI * (j as f64 + offset) / segments as f64;
            vertices.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), z));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, z_max));
    let top = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);

    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, ring(1, j + 1), ring(1, j)]);
        faces.push([top, ring(rings - 1, j), ring(rings - 1, j + 1)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            if i % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([b, d, c]);
            } else {
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("revolution grid is a valid closed mesh")
}

/// Two round lobes joined by a pinched neck at `z = 0`. The neck has
/// negative mean curvature and the flanks break star-shapedness.
pub fn make_dumbbell(rings: usize, segments: usize) -> TriangleMesh {
    let half = 2.0;
    make_revolution(
        |z: f64| (half * half - z * z).sqrt() * (1.0 - 0.9 * (-z * z / 0.1).exp()),
        -half,
        half,
        rings,
        segments,
    )
}

/// A convex egg: unit sphere profile widened toward `+z`, so it has no
/// reflection symmetry through the `xy` plane.
pub fn make_egg(rings: usize, segments: usize) -> TriangleMesh {
    make_revolution(
        |z: f64| (1.0 - z * z).sqrt() * (1.0 + 0.25 * z),
        -1.0,
        1.0,
        rings,
        segments,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = make_icosphere(1.0, s);
            assert_eq!(m.face_count(), 20 * 4usize.pow(s));
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.euler_characteristic(), 2);
        }
        let m = make_icosphere(1.0, 3);
        assert_eq!((m.vertex_count(), m.face_count()), (642, 1280));
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let m = make_icosphere(2.5, 3);
        for v in m.vertices() {
            assert!((v.norm() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn icosphere_area_and_volume_converge() {
        let m = make_icosphere(1.0, 3);
        assert!((m.area() / (4.0 * PI) - 1.0).abs() < 5e-3);
        assert!((m.enclosed_volume() / (4.0 * PI / 3.0) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn ellipsoid_volume() {
        let m = make_ellipsoid(2.0, 1.0, 0.5, 3);
        let exact = 4.0 * PI / 3.0 * 2.0 * 1.0 * 0.5;
        assert!((m.enclosed_volume() / exact - 1.0).abs() < 1e-2);
    }

    #[test]
    fn degenerate_ellipsoid_is_icosphere() {
        let a = make_ellipsoid(1.0, 1.0, 1.0, 2);
        let b = make_icosphere(1.0, 2);
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.faces(), b.faces());
    }

    #[test]
    fn torus_topology() {
        let t = make_torus(2.0, 0.7, 64, 32);
        assert_eq!(t.euler_characteristic(), 0);
        let exact = 2.0 * PI * PI * 2.0 * 0.49;
        assert!((t.enclosed_volume() / exact - 1.0).abs() < 1.5e-2);
    }

    #[test]
    fn revolution_shapes_are_closed() {
        for m in [make_dumbbell(40, 24), make_egg(24, 24)] {
            assert_eq!(m.euler_characteristic(), 2);
            assert_eq!(m.component_count(), 1);
            assert!(m.enclosed_volume() > 0.0);
        }
    }
}
