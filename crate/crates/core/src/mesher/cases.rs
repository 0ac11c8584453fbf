//! Marching-cubes case table, built from per-face rules so neighbouring
//! cubes always agree on the segments of their shared face.
//!
//! Corner `i` sits at offset `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`. A corner
//! is inside when its occupancy is at least the level. On a face with two
//! diagonal inside corners, each inside corner is cut off separately.

use std::sync::OnceLock;

/// Corner pairs of the 12 cube edges.
pub const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Face corners in counter-clockwise order seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
];

fn edge_index(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|&(p, q)| (p, q) == (a, b) || (p, q) == (b, a))
        .expect("cube edge")
}

/// Triangles (as edge triples) for one inside-corner mask.
fn triangulate(mask: u8) -> Vec<[u8; 3]> {
    let inside = |c: usize| mask & (1 << c) != 0;
    // next[e] = edge reached after crossing edge e, walking with the inside
    // on the right.
    let mut next = [usize::MAX; 12];
    for face in FACES {
        let mut entries = Vec::new();
        let mut exits = Vec::new();
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            if inside(a) != inside(b) {
                if inside(b) {
                    entries.push((k, edge_index(a, b)));
                } else {
                    exits.push((k, edge_index(a, b)));
                }
            }
        }
        // Pair each entry with the first exit after it along the face
        // boundary; this isolates every inside corner on ambiguous faces.
        for &(k, e) in &entries {
            let (_, x) = exits
                .iter()
                .copied()
                .min_by_key(|&(j, _)| (j + 4 - k) % 4)
                .expect("balanced crossings");
            next[e] = x;
        }
    }

    let mut visited = [false; 12];
    let mut triangles = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || visited[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !visited[e] {
            visited[e] = true;
            ring.push(e as u8);
            e = next[e];
        }
        for i in 1..ring.len() - 1 {
            triangles.push([ring[0], ring[i], ring[i + 1]]);
        }
    }
    triangles
}

/// Triangles for all 256 corner masks.
pub fn table() -> &'static [Vec<[u8; 3]>] {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=255u8).map(triangulate).collect())
}
