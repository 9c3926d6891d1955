//! Translation symmetry of the maximum-likelihood decoder.
//!
//! A translation `g = (right, down)` moves errors and syndromes by `right`
//! columns and `down` rows. Translating an error by `g` maps the logical
//! operators onto homologous copies, so the logical tensor of a syndrome
//! relates to that of the pulled-back syndrome `g^-1 . s` by flipping the
//! logical indices whose operator path swept over an odd number of
//! defects. That flip is the [`Twist`] of `(g, s)`:
//!
//! `p(s)[gamma] = p(g^-1 . s)[gamma ^ twist(g, s)]`.
//!
//! For translations the permutation part of the twist is trivial, so a twist
//! is just a 4-bit XOR mask on class indices.

use serde::Serialize;

use crate::code::{Lattice, LogicalBits, PauliError, Syndrome};
use crate::logical::LogicalTensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Translation {
    pub right: isize,
    pub down: isize,
}

impl Translation {
    pub const IDENTITY: Translation = Translation { right: 0, down: 0 };

    pub fn new(right: isize, down: isize) -> Self {
        Self { right, down }
    }

    pub fn compose(self, other: Translation) -> Translation {
        Translation::new(self.right + other.right, self.down + other.down)
    }

    pub fn inverse(self) -> Translation {
        Translation::new(-self.right, -self.down)
    }

    /// Representative with both components in `0..L`.
    pub fn reduced(self, lattice: Lattice) -> (usize, usize) {
        (lattice.wrap(self.right), lattice.wrap(self.down))
    }

    /// All `L^2` group elements in row-major position order.
    pub fn all(lattice: Lattice) -> impl Iterator<Item = Translation> {
        let n = lattice.size() as isize;
        (0..n).flat_map(move |down| (0..n).map(move |right| Translation::new(right, down)))
    }
}

pub fn translate_error(g: Translation, error: &PauliError) -> PauliError {
    let lat = error.lattice();
    let mut out = PauliError::identity(lat);
    let shift = |edge: usize| {
        let (r, c, o) = lat.edge_coords(edge);
        lat.edge(r as isize + g.down, c as isize + g.right, o)
    };
    for edge in error.x_part().iter_ones() {
        out.toggle_x(shift(edge));
    }
    for edge in error.z_part().iter_ones() {
        out.toggle_z(shift(edge));
    }
    out
}

/// `g . s`: the syndrome grids cyclically shifted by `g`.
pub fn translate_syndrome(g: Translation, syndrome: &Syndrome) -> Syndrome {
    let lat = syndrome.lattice();
    let mut out = Syndrome::zero(lat);
    let shift = |site: usize| {
        let (r, c) = lat.site_coords(site);
        lat.site(r as isize + g.down, c as isize + g.right)
    };
    for v in syndrome.x_bits().iter_ones() {
        out.x.set(shift(v), true);
    }
    for p in syndrome.z_bits().iter_ones() {
        out.z.set(shift(p), true);
    }
    out
}

/// Parity of the defects of `pulled` swept by each logical operator when it
/// is moved by `g^-1` back onto its reference path.
///
/// With `g = (i, j)` reduced to `0..L`:
///
/// * `X1` sweeps vertex rows `-j+1 ..= 0`,
/// * `X2` sweeps vertex columns `-i+1 ..= 0`,
/// * `Z1` sweeps plaquette columns `-i ..= -1`,
/// * `Z2` sweeps plaquette rows `-j ..= -1`.
///
/// For `g = (1, 0)` this is `(0, sum_r x[r][0], sum_r z[r][-1], 0)`.
pub fn path_parities(g: Translation, pulled: &Syndrome) -> LogicalBits {
    let lat = pulled.lattice();
    let n = lat.size() as isize;
    let (i, j) = g.reduced(lat);
    let (i, j) = (i as isize, j as isize);
    let mut bits = [0u8; 4];
    for k in 0..n {
        for r in (-j + 1)..=0 {
            bits[0] ^= pulled.x_at(r, k);
        }
        for c in (-i + 1)..=0 {
            bits[1] ^= pulled.x_at(k, c);
        }
        for c in -i..=-1 {
            bits[2] ^= pulled.z_at(k, c);
        }
        for r in -j..=-1 {
            bits[3] ^= pulled.z_at(r, k);
        }
    }
    LogicalBits::from_bits(bits)
}

/// `Delta_g(g^-1 . s)`: the pull-back is applied here, so callers always pass
/// the unshifted syndrome.
pub fn delta(g: Translation, syndrome: &Syndrome) -> LogicalBits {
    path_parities(g, &translate_syndrome(g.inverse(), syndrome))
}

/// Logical-index flip associated with a translation and a syndrome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Twist {
    pub mask: LogicalBits,
}

impl Twist {
    pub const IDENTITY: Twist = Twist { mask: LogicalBits::ZERO };

    pub fn compose(self, other: Twist) -> Twist {
        Twist { mask: self.mask ^ other.mask }
    }
}

pub fn twist(g: Translation, syndrome: &Syndrome) -> Twist {
    Twist { mask: delta(g, syndrome) }
}

/// `out[gamma] = t[gamma ^ mask]`. An involution.
pub fn apply_twist<T: Copy>(m: Twist, t: &LogicalTensor<T>) -> LogicalTensor<T> {
    LogicalTensor(std::array::from_fn(|gamma| t.0[gamma ^ m.mask.index()]))
}

/// Twists of every translation for one syndrome, laid out by position:
/// entry `(row, col)` belongs to `g = (col, row)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistGrid {
    size: usize,
    masks: Vec<LogicalBits>,
}

impl TwistGrid {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn at_position(&self, row: usize, col: usize) -> Twist {
        Twist { mask: self.masks[row * self.size + col] }
    }

    pub fn get(&self, g: Translation, lattice: Lattice) -> Twist {
        let (right, down) = g.reduced(lattice);
        self.at_position(down, right)
    }

    /// Mask class indices in row-major position order.
    pub fn masks(&self) -> &[LogicalBits] {
        &self.masks
    }

    pub fn is_identity(&self) -> bool {
        self.masks.iter().all(|&m| m == LogicalBits::ZERO)
    }
}

/// All `L^2` twists in `O(L^2)`.
///
/// Horizontal and vertical parts factor, `M(i,j) = M(i,0) M(0,j)`, and each
/// part follows the recursion `M(i,0)(s) = M(i-1,0)(s) M(1,0)((-i+1,0) . s)`,
/// where the unit step only needs one column parity of each species.
pub fn all_twists(syndrome: &Syndrome) -> TwistGrid {
    let lat = syndrome.lattice();
    let n = lat.size();
    let mut col_x = vec![0u8; n];
    let mut col_z = vec![0u8; n];
    let mut row_x = vec![0u8; n];
    let mut row_z = vec![0u8; n];
    for site in syndrome.x_bits().iter_ones() {
        let (r, c) = lat.site_coords(site);
        col_x[c] ^= 1;
        row_x[r] ^= 1;
    }
    for site in syndrome.z_bits().iter_ones() {
        let (r, c) = lat.site_coords(site);
        col_z[c] ^= 1;
        row_z[r] ^= 1;
    }

    // M(1,0)((-k,0) . s) flips (X2, Z1) by (col_x[k+1], col_z[k]);
    // M(0,1)((0,-k) . s) flips (X1, Z2) by (row_x[k+1], row_z[k]).
    let mut horizontal = vec![LogicalBits::ZERO; n];
    let mut vertical = vec![LogicalBits::ZERO; n];
    for i in 1..n {
        let k = i - 1;
        let step_h = LogicalBits::from_bits([0, col_x[(k + 1) % n], col_z[k], 0]);
        horizontal[i] = horizontal[i - 1] ^ step_h;
        let step_v = LogicalBits::from_bits([row_x[(k + 1) % n], 0, 0, row_z[k]]);
        vertical[i] = vertical[i - 1] ^ step_v;
    }

    let mut masks = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            masks.push(horizontal[col] ^ vertical[row]);
        }
    }
    TwistGrid { size: n, masks }
}
