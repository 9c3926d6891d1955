//! Minimum-weight perfect matching decoder.
//!
//! Vertex defects (`sx`) and plaquette defects (`sz`) are matched
//! independently under the torus Manhattan distance. Each matched pair is
//! joined by a shortest path (row leg first, then column leg) and the
//! composed correction is reported through its logical content.

pub mod blossom;

use crate::code::{Lattice, LogicalBits, Orientation, PauliError, Syndrome};
use crate::error::Result;

use blossom::{max_weight_matching, Weight};

/// Defect counts up to this size are matched on the complete graph directly.
const DENSE_LIMIT: usize = 24;
/// Nearest neighbours kept per defect in the sparse candidate graph.
const NEIGHBOURS: usize = 6;

/// Shortest signed displacement from `a` to `b` on a cycle of length `l`.
fn signed_step(a: usize, b: usize, l: usize) -> isize {
    let d = (b + l - a) % l;
    if 2 * d <= l {
        d as isize
    } else {
        d as isize - l as isize
    }
}

/// Manhattan distance between two sites on the `l x l` torus.
pub fn torus_distance(l: usize, a: (usize, usize), b: (usize, usize)) -> usize {
    signed_step(a.0, b.0, l).unsigned_abs() + signed_step(a.1, b.1, l).unsigned_abs()
}

/// Exact minimum-weight perfect matching of `n` points (`n` even) under a
/// symmetric non-negative distance. Returns pairs `(i, j)` with `i < j`.
///
/// Large instances are solved on a sparse nearest-neighbour graph and the
/// optimal duals are then checked against every pair; violated pairs are
/// added and the solve repeated, so the result is always globally optimal.
pub fn min_weight_perfect_matching(n: usize, dist: impl Fn(usize, usize) -> usize) -> Vec<(usize, usize)> {
    assert!(n.is_multiple_of(2), "perfect matching needs an even number of points");
    if n == 0 {
        return Vec::new();
    }
    let mut d = vec![0 as Weight; n * n];
    let mut dmax: Weight = 0;
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(i, j) as Weight;
            d[i * n + j] = v;
            d[j * n + i] = v;
            dmax = dmax.max(v);
        }
    }
    // Any perfect matching outweighs every non-perfect one.
    let offset = (n as Weight / 2) * dmax + 1;
    let weight = |i: usize, j: usize| offset - d[i * n + j];

    let mut present = vec![false; n * n];
    let mut edges = Vec::new();
    let add = |i: usize, j: usize, present: &mut [bool], edges: &mut Vec<(usize, usize, Weight)>| {
        let (a, b) = (i.min(j), i.max(j));
        if !present[a * n + b] {
            present[a * n + b] = true;
            edges.push((a, b, weight(a, b)));
        }
    };
    if n <= DENSE_LIMIT {
        for i in 0..n {
            for j in i + 1..n {
                add(i, j, &mut present, &mut edges);
            }
        }
    } else {
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            order.clear();
            order.extend((0..n).filter(|&j| j != i));
            let k = NEIGHBOURS.min(order.len());
            if k < order.len() {
                order.select_nth_unstable_by_key(k, |&j| (d[i * n + j], j));
            }
            for &j in &order[..k] {
                add(i, j, &mut present, &mut edges);
            }
        }
    }

    loop {
        let m = max_weight_matching(n, &edges, false);
        let violated = m.violations(|i, j| !present[i * n + j], weight);
        if violated.is_empty() {
            debug_assert!(m.is_perfect());
            return m.pairs();
        }
        for (i, j) in violated {
            add(i, j, &mut present, &mut edges);
        }
    }
}

/// Matching decoder for the toric code under independent X/Z weights.
#[derive(Clone, Debug)]
pub struct MwpmDecoder {
    lattice: Lattice,
}

impl MwpmDecoder {
    pub fn new(lattice: Lattice) -> Self {
        Self { lattice }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Correction whose syndrome equals `syndrome`.
    pub fn correction(&self, syndrome: &Syndrome) -> Result<PauliError> {
        if syndrome.lattice() != self.lattice {
            return Err(crate::Error::SizeMismatch {
                expected: self.lattice.size(),
                found: syndrome.lattice().size(),
            });
        }
        syndrome.ensure_valid()?;
        let lat = self.lattice;
        let l = lat.size();
        let mut correction = PauliError::identity(lat);

        let vertex_defects: Vec<(usize, usize)> = syndrome.x_bits().iter_ones().map(|s| lat.site_coords(s)).collect();
        for (a, b) in self.pair_up(&vertex_defects) {
            let (a, b) = (vertex_defects[a], vertex_defects[b]);
            let (mut r, mut c) = (a.0 as isize, a.1 as isize);
            let dc = signed_step(a.1, b.1, l);
            for _ in 0..dc.unsigned_abs() {
                if dc > 0 {
                    correction.toggle_z(lat.edge(r, c, Orientation::Horizontal));
                    c += 1;
                } else {
                    correction.toggle_z(lat.edge(r, c - 1, Orientation::Horizontal));
                    c -= 1;
                }
            }
            let dr = signed_step(a.0, b.0, l);
            for _ in 0..dr.unsigned_abs() {
                if dr > 0 {
                    correction.toggle_z(lat.edge(r, c, Orientation::Vertical));
                    r += 1;
                } else {
                    correction.toggle_z(lat.edge(r - 1, c, Orientation::Vertical));
                    r -= 1;
                }
            }
        }

        let plaquette_defects: Vec<(usize, usize)> =
            syndrome.z_bits().iter_ones().map(|s| lat.site_coords(s)).collect();
        for (a, b) in self.pair_up(&plaquette_defects) {
            let (a, b) = (plaquette_defects[a], plaquette_defects[b]);
            let (mut r, mut c) = (a.0 as isize, a.1 as isize);
            let dc = signed_step(a.1, b.1, l);
            for _ in 0..dc.unsigned_abs() {
                if dc > 0 {
                    correction.toggle_x(lat.edge(r, c + 1, Orientation::Vertical));
                    c += 1;
                } else {
                    correction.toggle_x(lat.edge(r, c, Orientation::Vertical));
                    c -= 1;
                }
            }
            let dr = signed_step(a.0, b.0, l);
            for _ in 0..dr.unsigned_abs() {
                if dr > 0 {
                    correction.toggle_x(lat.edge(r + 1, c, Orientation::Horizontal));
                    r += 1;
                } else {
                    correction.toggle_x(lat.edge(r, c, Orientation::Horizontal));
                    r -= 1;
                }
            }
        }
        Ok(correction)
    }

    /// Logical class of the matching correction.
    pub fn decode(&self, syndrome: &Syndrome) -> Result<LogicalBits> {
        let correction = self.correction(syndrome)?;
        self.lattice.logical_content(&correction)
    }

    fn pair_up(&self, defects: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let l = self.lattice.size();
        min_weight_perfect_matching(defects.len(), |i, j| torus_distance(l, defects[i], defects[j]))
    }
}
