//! Procedural meshes used by the synthetic generator and the tests.

use crate::geometry::MeshModel;
use nalgebra::Vector3;

/// Axis-aligned cuboid centered at the origin with the given side lengths.
pub fn cuboid(name: &str, sx: f64, sy: f64, sz: f64) -> MeshModel {
    let (hx, hy, hz) = (sx * 0.5, sy * 0.5, sz * 0.5);
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8usize {
        vertices.push(Vector3::new(
            if i & 1 != 0 { hx } else { -hx },
            if i & 2 != 0 { hy } else { -hy },
            if i & 4 != 0 { hz } else { -hz },
        ));
    }
    // two triangles per face, indices in the bit ordering above
    let triangles = vec![
        [0, 2, 1],
        [1, 2, 3], // z = -hz
        [4, 5, 6],
        [5, 7, 6], // z = +hz
        [0, 1, 4],
        [1, 5, 4], // y = -hy
        [2, 6, 3],
        [3, 6, 7], // y = +hy
        [0, 4, 2],
        [2, 4, 6], // x = -hx
        [1, 3, 5],
        [3, 7, 5], // x = +hx
    ];
    MeshModel::new(name, vertices, triangles).expect("cuboid mesh is valid")
}

/// Square plate of the given side in the z = 0 plane, two triangles.
pub fn plate(name: &str, side: f64) -> MeshModel {
    let h = side * 0.5;
    let vertices = vec![
        Vector3::new(-h, -h, 0.0),
        Vector3::new(h, -h, 0.0),
        Vector3::new(-h, h, 0.0),
        Vector3::new(h, h, 0.0),
    ];
    MeshModel::new(name, vertices, vec![[0, 1, 2], [1, 3, 2]]).expect("plate mesh is valid")
}

/// Closed cylinder of revolution about the object z axis: radius `r`,
/// height `h`, `n` segments around the rim.
pub fn cylinder(name: &str, r: f64, h: f64, n: usize) -> MeshModel {
    assert!(n >= 3);
    let half = h * 0.5;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for ring in 0..2 {
        let z = if ring == 0 { -half } else { half };
        for i in 0..n {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vertices.push(Vector3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    let bottom_center = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, -half));
    let top_center = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, half));

    let mut triangles = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        // side quad
        triangles.push([i, j, n + i]);
        triangles.push([j, n + j, n + i]);
        // caps
        triangles.push([bottom_center, j, i]);
        triangles.push([top_center, n + i, n + j]);
    }
    MeshModel::new(name, vertices, triangles).expect("cylinder mesh is valid")
}

/// Point ring in the z = 0 plane: `n` points evenly spaced on a circle of
/// radius `r`. As a vertex set it is invariant under rotation by 2π/n
/// about the z axis, which makes it the reference object for the
/// symmetry-quotient tests.
pub fn ring_points(name: &str, r: f64, n: usize) -> MeshModel {
    assert!(n >= 3);
    let vertices = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Vector3::new(r * a.cos(), r * a.sin(), 0.0)
        })
        .collect();
    MeshModel::new(name, vertices, vec![]).expect("ring is valid")
}
