//! Toric code geometry and Pauli algebra over F2.
//!
//! Coordinates are `(row, col)` taken mod `L`. Row grows downwards and
//! column grows to the right; `(0, 0)` is the reference (middle) vertex.
//! The unit cell `(r, c)` owns two edges:
//!
//! * the horizontal edge `h(r, c)` joining vertices `(r, c)` and `(r, c+1)`,
//! * the vertical edge `v(r, c)` joining vertices `(r, c)` and `(r+1, c)`.
//!
//! Plaquette `(r, c)` sits to the bottom-right of vertex `(r, c)` and is
//! bounded by `h(r, c)`, `h(r+1, c)`, `v(r, c)` and `v(r, c+1)`.
//!
//! Z errors live on primal paths and are detected by the vertex (X-type)
//! stabilizers; X errors live on dual paths and are detected by the
//! plaquette (Z-type) stabilizers.

use std::ops::{BitXor, BitXorAssign};

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Periodic `L x L` square lattice with odd `L >= 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Lattice {
    size: usize,
}

impl TryFrom<usize> for Lattice {
    type Error = Error;

    fn try_from(size: usize) -> Result<Self> {
        Lattice::new(size)
    }
}

impl From<Lattice> for usize {
    fn from(lattice: Lattice) -> usize {
        lattice.size
    }
}

impl Lattice {
    pub fn new(size: usize) -> Result<Self> {
        if size < 3 || size.is_multiple_of(2) {
            return Err(Error::InvalidLattice(size));
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_edges(&self) -> usize {
        2 * self.size * self.size
    }

    pub fn num_vertices(&self) -> usize {
        self.size * self.size
    }

    pub fn num_plaquettes(&self) -> usize {
        self.size * self.size
    }

    #[inline]
    pub fn wrap(&self, coord: isize) -> usize {
        coord.rem_euclid(self.size as isize) as usize
    }

    /// Row-major index of a vertex or plaquette.
    #[inline]
    pub fn site(&self, row: isize, col: isize) -> usize {
        self.wrap(row) * self.size + self.wrap(col)
    }

    #[inline]
    pub fn site_coords(&self, site: usize) -> (usize, usize) {
        (site / self.size, site % self.size)
    }

    #[inline]
    pub fn edge(&self, row: isize, col: isize, orientation: Orientation) -> usize {
        let o = match orientation {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
        };
        2 * self.site(row, col) + o
    }

    pub fn edge_coords(&self, edge: usize) -> (usize, usize, Orientation) {
        let (row, col) = self.site_coords(edge / 2);
        let o = if edge.is_multiple_of(2) { Orientation::Horizontal } else { Orientation::Vertical };
        (row, col, o)
    }

    /// The two vertices joined by an edge.
    pub fn edge_vertices(&self, edge: usize) -> [usize; 2] {
        let (r, c, o) = self.edge_coords(edge);
        let (r, c) = (r as isize, c as isize);
        match o {
            Orientation::Horizontal => [self.site(r, c), self.site(r, c + 1)],
            Orientation::Vertical => [self.site(r, c), self.site(r + 1, c)],
        }
    }

    /// The two plaquettes sharing an edge.
    pub fn edge_plaquettes(&self, edge: usize) -> [usize; 2] {
        let (r, c, o) = self.edge_coords(edge);
        let (r, c) = (r as isize, c as isize);
        match o {
            Orientation::Horizontal => [self.site(r, c), self.site(r - 1, c)],
            Orientation::Vertical => [self.site(r, c), self.site(r, c - 1)],
        }
    }

    pub fn vertex_edges(&self, row: isize, col: isize) -> [usize; 4] {
        use Orientation::*;
        [
            self.edge(row, col, Horizontal),
            self.edge(row, col - 1, Horizontal),
            self.edge(row, col, Vertical),
            self.edge(row - 1, col, Vertical),
        ]
    }

    pub fn plaquette_edges(&self, row: isize, col: isize) -> [usize; 4] {
        use Orientation::*;
        [
            self.edge(row, col, Horizontal),
            self.edge(row + 1, col, Horizontal),
            self.edge(row, col, Vertical),
            self.edge(row, col + 1, Vertical),
        ]
    }

    /// Bit flips around vertex `(row, col)`.
    pub fn stabilizer_x(&self, row: isize, col: isize) -> PauliError {
        let mut e = PauliError::identity(*self);
        for edge in self.vertex_edges(row, col) {
            e.x.toggle(edge);
        }
        e
    }

    /// Phase flips around plaquette `(row, col)`.
    pub fn stabilizer_z(&self, row: isize, col: isize) -> PauliError {
        let mut e = PauliError::identity(*self);
        for edge in self.plaquette_edges(row, col) {
            e.z.toggle(edge);
        }
        e
    }

    /// The logical operators `(X1, X2, Z1, Z2)`.
    ///
    /// * `Z1`: Z on the vertical primal column through vertex column 0.
    /// * `Z2`: Z on the horizontal primal row through vertex row 0.
    /// * `X1`: X on the dual row just below vertex row 0 (crosses `v(0, c)`).
    /// * `X2`: X on the dual column just right of vertex column 0 (crosses `h(r, 0)`).
    pub fn logical_operators(&self) -> [PauliError; 4] {
        use Orientation::*;
        let n = self.size as isize;
        let mut ops = [
            PauliError::identity(*self),
            PauliError::identity(*self),
            PauliError::identity(*self),
            PauliError::identity(*self),
        ];
        for k in 0..n {
            ops[0].x.set(self.edge(0, k, Vertical), true);
            ops[1].x.set(self.edge(k, 0, Horizontal), true);
            ops[2].z.set(self.edge(k, 0, Vertical), true);
            ops[3].z.set(self.edge(0, k, Horizontal), true);
        }
        ops
    }

    pub fn syndrome(&self, error: &PauliError) -> Result<Syndrome> {
        self.check(error.lattice)?;
        let mut s = Syndrome::zero(*self);
        for edge in error.z.iter_ones() {
            for v in self.edge_vertices(edge) {
                s.x.toggle(v);
            }
        }
        for edge in error.x.iter_ones() {
            for p in self.edge_plaquettes(edge) {
                s.z.toggle(p);
            }
        }
        Ok(s)
    }

    /// `gamma_a = omega(E, L_a)` with `L = (X1, X2, Z1, Z2)`.
    pub fn logical_content(&self, error: &PauliError) -> Result<LogicalBits> {
        use Orientation::*;
        self.check(error.lattice)?;
        let n = self.size as isize;
        let mut bits = [0u8; 4];
        for k in 0..n {
            bits[0] ^= error.z.get(self.edge(0, k, Vertical)) as u8;
            bits[1] ^= error.z.get(self.edge(k, 0, Horizontal)) as u8;
            bits[2] ^= error.x.get(self.edge(k, 0, Vertical)) as u8;
            bits[3] ^= error.x.get(self.edge(0, k, Horizontal)) as u8;
        }
        Ok(LogicalBits::from_bits(bits))
    }

    fn check(&self, other: Lattice) -> Result<()> {
        if other != *self {
            return Err(Error::SizeMismatch { expected: self.size, found: other.size });
        }
        Ok(())
    }
}

/// A Pauli error up to phase: one X bit and one Z bit per edge.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliError {
    lattice: Lattice,
    pub(crate) x: BitSet,
    pub(crate) z: BitSet,
}

impl PauliError {
    pub fn identity(lattice: Lattice) -> Self {
        let n = lattice.num_edges();
        Self { lattice, x: BitSet::zeros(n), z: BitSet::zeros(n) }
    }

    pub fn from_parts(lattice: Lattice, x: BitSet, z: BitSet) -> Result<Self> {
        let n = lattice.num_edges();
        if x.len() != n || z.len() != n {
            return Err(Error::Shape(format!("expected {n} edge bits, got {} and {}", x.len(), z.len())));
        }
        Ok(Self { lattice, x, z })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn x_part(&self) -> &BitSet {
        &self.x
    }

    pub fn z_part(&self) -> &BitSet {
        &self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    /// Number of edges carrying a non-identity Pauli.
    pub fn weight(&self) -> usize {
        self.x.or_count(&self.z)
    }

    pub fn toggle_x(&mut self, edge: usize) {
        self.x.toggle(edge);
    }

    pub fn toggle_z(&mut self, edge: usize) {
        self.z.toggle(edge);
    }

    /// `omega(a, b)`: 1 iff the two operators anticommute.
    pub fn symplectic_product(&self, other: &PauliError) -> Result<u8> {
        self.lattice.check(other.lattice)?;
        let overlaps = self.x.and_count(&other.z) + self.z.and_count(&other.x);
        Ok((overlaps & 1) as u8)
    }

    /// Composition (phases discarded). Fails on mismatched lattices.
    pub fn compose(&self, other: &PauliError) -> Result<PauliError> {
        self.lattice.check(other.lattice)?;
        Ok(self ^ other)
    }
}

impl BitXorAssign<&PauliError> for PauliError {
    fn bitxor_assign(&mut self, rhs: &PauliError) {
        assert_eq!(self.lattice, rhs.lattice, "composing errors on different lattices");
        self.x ^= &rhs.x;
        self.z ^= &rhs.z;
    }
}

impl BitXor for &PauliError {
    type Output = PauliError;

    fn bitxor(self, rhs: &PauliError) -> PauliError {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

/// Stabilizer violations: `x` over vertices (X-type checks, flipped by Z
/// errors) and `z` over plaquettes (Z-type checks, flipped by X errors).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Syndrome {
    lattice: Lattice,
    pub(crate) x: BitSet,
    pub(crate) z: BitSet,
}

impl Syndrome {
    pub fn zero(lattice: Lattice) -> Self {
        let n = lattice.num_vertices();
        Self { lattice, x: BitSet::zeros(n), z: BitSet::zeros(n) }
    }

    pub fn from_parts(lattice: Lattice, x: BitSet, z: BitSet) -> Result<Self> {
        let n = lattice.num_vertices();
        if x.len() != n || z.len() != n {
            return Err(Error::Shape(format!("expected {n} syndrome bits, got {} and {}", x.len(), z.len())));
        }
        Ok(Self { lattice, x, z })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Vertex syndrome bits, row-major.
    pub fn x_bits(&self) -> &BitSet {
        &self.x
    }

    /// Plaquette syndrome bits, row-major.
    pub fn z_bits(&self) -> &BitSet {
        &self.z
    }

    pub fn x_at(&self, row: isize, col: isize) -> u8 {
        self.x.get(self.lattice.site(row, col)) as u8
    }

    pub fn z_at(&self, row: isize, col: isize) -> u8 {
        self.z.get(self.lattice.site(row, col)) as u8
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    /// Both species carry an even number of defects.
    pub fn is_valid(&self) -> bool {
        self.x.parity() == 0 && self.z.parity() == 0
    }

    pub fn ensure_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidSyndrome(format!(
                "odd defect count (vertex {}, plaquette {})",
                self.x.count_ones(),
                self.z.count_ones()
            )))
        }
    }

    /// Packs the syndrome into an integer key (`x` in the low bits).
    /// Only available while `2 L^2 <= 64`.
    pub fn packed(&self) -> Option<u64> {
        let n = self.lattice.num_vertices();
        (2 * n <= 64).then(|| self.x.to_u64() | (self.z.to_u64() << n))
    }
}

/// Logical content `gamma = (g1, g2, g3, g4)`, stored as a 4-bit class index
/// with `g1` as the most significant bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogicalBits(u8);

impl LogicalBits {
    pub const ZERO: LogicalBits = LogicalBits(0);

    pub fn from_index(index: usize) -> Self {
        assert!(index < 16, "logical class index out of range");
        Self(index as u8)
    }

    pub fn from_bits(bits: [u8; 4]) -> Self {
        Self(bits.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Component `a` in `0..4` (i.e. `gamma_{a+1}`).
    #[inline]
    pub fn bit(self, a: usize) -> u8 {
        (self.0 >> (3 - a)) & 1
    }

    pub fn bits(self) -> [u8; 4] {
        [self.bit(0), self.bit(1), self.bit(2), self.bit(3)]
    }

    pub fn all() -> impl Iterator<Item = LogicalBits> {
        (0..16u8).map(LogicalBits)
    }
}

impl BitXor for LogicalBits {
    type Output = LogicalBits;

    fn bitxor(self, rhs: LogicalBits) -> LogicalBits {
        LogicalBits(self.0 ^ rhs.0)
    }
}

impl std::fmt::Display for LogicalBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, c, d] = self.bits();
        write!(f, "({a},{b},{c},{d})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l3() -> Lattice {
        Lattice::new(3).unwrap()
    }

    fn all_stabilizers(lat: Lattice) -> Vec<PauliError> {
        let n = lat.size() as isize;
        let mut out = Vec::new();
        for r in 0..n {
            for c in 0..n {
                out.push(lat.stabilizer_x(r, c));
                out.push(lat.stabilizer_z(r, c));
            }
        }
        out
    }

    #[test]
    fn even_or_small_sizes_rejected() {
        assert!(matches!(Lattice::new(4), Err(Error::InvalidLattice(4))));
        assert!(Lattice::new(1).is_err());
        assert!(Lattice::new(5).is_ok());
    }

    #[test]
    fn counts_and_wrapping() {
        let lat = Lattice::new(5).unwrap();
        assert_eq!(lat.num_edges(), 50);
        assert_eq!(lat.num_vertices(), 25);
        assert_eq!(lat.site(-1, 0), lat.site(4, 0));
        assert_eq!(lat.site(5, 7), lat.site(0, 2));
        for e in 0..lat.num_edges() {
            let (r, c, o) = lat.edge_coords(e);
            assert_eq!(lat.edge(r as isize, c as isize, o), e);
        }
    }

    #[test]
    fn self_commutation() {
        let lat = l3();
        for s in all_stabilizers(lat) {
            assert_eq!(s.symplectic_product(&s).unwrap(), 0);
        }
        let mut e = PauliError::identity(lat);
        e.toggle_x(3);
        e.toggle_z(3);
        e.toggle_z(7);
        assert_eq!(e.symplectic_product(&e).unwrap(), 0);
    }

    #[test]
    fn stabilizers_pairwise_commute_exhaustively() {
        let lat = l3();
        let stabs = all_stabilizers(lat);
        assert_eq!(stabs.len(), 18);
        for a in &stabs {
            for b in &stabs {
                assert_eq!(a.symplectic_product(b).unwrap(), 0);
            }
        }
    }

    #[test]
    fn stabilizers_have_weight_four_and_trivial_syndrome() {
        for size in [3, 5] {
            let lat = Lattice::new(size).unwrap();
            for s in all_stabilizers(lat) {
                assert_eq!(s.weight(), 4);
                assert!(lat.syndrome(&s).unwrap().is_zero());
                assert_eq!(lat.logical_content(&s).unwrap(), LogicalBits::ZERO);
            }
        }
    }

    #[test]
    fn product_of_all_vertex_stabilizers_is_identity() {
        let lat = Lattice::new(5).unwrap();
        let n = lat.size() as isize;
        let mut px = PauliError::identity(lat);
        let mut pz = PauliError::identity(lat);
        for r in 0..n {
            for c in 0..n {
                px ^= &lat.stabilizer_x(r, c);
                pz ^= &lat.stabilizer_z(r, c);
            }
        }
        assert!(px.is_identity());
        assert!(pz.is_identity());
    }

    #[test]
    fn logical_commutation_structure() {
        for size in [3, 5, 7] {
            let lat = Lattice::new(size).unwrap();
            let [x1, x2, z1, z2] = lat.logical_operators();
            for op in [&x1, &x2, &z1, &z2] {
                assert_eq!(op.weight(), size);
                assert!(lat.syndrome(op).unwrap().is_zero());
            }
            assert_eq!(x1.symplectic_product(&z1).unwrap(), 1);
            assert_eq!(x2.symplectic_product(&z2).unwrap(), 1);
            assert_eq!(x1.symplectic_product(&z2).unwrap(), 0);
            assert_eq!(x2.symplectic_product(&z1).unwrap(), 0);
            assert_eq!(x1.symplectic_product(&x2).unwrap(), 0);
            assert_eq!(z1.symplectic_product(&z2).unwrap(), 0);
            for s in all_stabilizers(lat) {
                for op in [&x1, &x2, &z1, &z2] {
                    assert_eq!(op.symplectic_product(&s).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn logical_content_of_logicals() {
        let lat = l3();
        let [x1, x2, z1, z2] = lat.logical_operators();
        assert_eq!(lat.logical_content(&x1).unwrap().bits(), [0, 0, 1, 0]);
        assert_eq!(lat.logical_content(&x2).unwrap().bits(), [0, 0, 0, 1]);
        assert_eq!(lat.logical_content(&z1).unwrap().bits(), [1, 0, 0, 0]);
        assert_eq!(lat.logical_content(&z2).unwrap().bits(), [0, 1, 0, 0]);
        // Z1 X2 anticommutes with X1 (via Z1) and Z2 (via X2).
        let e = &z1 ^ &x2;
        let direct = [&x1, &x2, &z1, &z2].map(|l| e.symplectic_product(l).unwrap());
        assert_eq!(lat.logical_content(&e).unwrap().bits(), direct);
        assert_eq!(direct, [1, 0, 0, 1]);
    }

    #[test]
    fn single_edge_syndromes_come_in_pairs() {
        let lat = Lattice::new(5).unwrap();
        for edge in 0..lat.num_edges() {
            let mut z = PauliError::identity(lat);
            z.toggle_z(edge);
            let s = lat.syndrome(&z).unwrap();
            let mut hit: Vec<usize> = s.x_bits().iter_ones().collect();
            let mut ends = lat.edge_vertices(edge).to_vec();
            hit.sort();
            ends.sort();
            assert_eq!(hit, ends);
            assert!(s.z_bits().is_zero());

            let mut x = PauliError::identity(lat);
            x.toggle_x(edge);
            let s = lat.syndrome(&x).unwrap();
            assert_eq!(s.z_bits().count_ones(), 2);
            assert!(s.x_bits().is_zero());
        }
    }

    #[test]
    fn syndrome_matches_symplectic_definition() {
        let lat = l3();
        let mut e = PauliError::identity(lat);
        for edge in [0, 4, 5, 11, 17] {
            e.toggle_x(edge);
        }
        for edge in [2, 4, 9, 12] {
            e.toggle_z(edge);
        }
        let s = lat.syndrome(&e).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(s.x_at(r, c), e.symplectic_product(&lat.stabilizer_x(r, c)).unwrap());
                assert_eq!(s.z_at(r, c), e.symplectic_product(&lat.stabilizer_z(r, c)).unwrap());
            }
        }
    }

    #[test]
    fn mismatched_lattices_error() {
        let a = PauliError::identity(l3());
        let b = PauliError::identity(Lattice::new(5).unwrap());
        assert!(matches!(a.symplectic_product(&b), Err(Error::SizeMismatch { .. })));
        assert!(l3().syndrome(&b).is_err());
    }

    #[test]
    fn logical_bits_indexing() {
        let g = LogicalBits::from_bits([1, 0, 1, 1]);
        assert_eq!(g.index(), 0b1011);
        assert_eq!(g.bit(0), 1);
        assert_eq!(g.bit(1), 0);
        assert_eq!((g ^ LogicalBits::from_index(0b1000)).bits(), [0, 0, 1, 1]);
    }
}
