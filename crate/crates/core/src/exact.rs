//! Exact maximum-likelihood decoding by summing the noise distribution over
//! every stabilizer coset.
//!
//! The stabilizer group of the `L = 3` torus has `2^(2 L^2 - 2) = 65536`
//! elements. Each coset is reduced to an integer histogram of
//! `(#X, #Z, #XZ)` edge counts, which is then contracted with the per-edge
//! probabilities of the noise model. Integer histograms make the result
//! independent of enumeration order, so syndromes related by a symmetry give
//! bitwise-identical tensors.

use std::collections::HashMap;

use crate::code::{Lattice, LogicalBits, Orientation, PauliError, Syndrome};
use crate::error::{Error, Result};
use crate::logical::LogicalTensor;
use crate::noise::NoiseModel;
use crate::scalar::Scalar;

/// Largest lattice the enumeration accepts.
pub const MAX_EXACT_SIZE: usize = 3;

/// An error with the given syndrome and logical content.
///
/// Every vertex defect is routed to vertex `(0, 0)` along its row and then
/// along column 0 with Z flips; plaquette defects are routed to plaquette
/// `(0, 0)` on the dual lattice with X flips. Pairs of routes cancel at the
/// reference site, and logical operators are multiplied in last to set each
/// bit of `gamma`.
pub fn representative_error(syndrome: &Syndrome, gamma: LogicalBits) -> Result<PauliError> {
    use Orientation::*;
    syndrome.ensure_valid()?;
    let lat = syndrome.lattice();
    let mut e = PauliError::identity(lat);
    for site in syndrome.x_bits().iter_ones() {
        let (r, c) = lat.site_coords(site);
        for k in 0..c as isize {
            e.toggle_z(lat.edge(r as isize, k, Horizontal));
        }
        for k in 0..r as isize {
            e.toggle_z(lat.edge(k, 0, Vertical));
        }
    }
    for site in syndrome.z_bits().iter_ones() {
        let (r, c) = lat.site_coords(site);
        for k in 1..=c as isize {
            e.toggle_x(lat.edge(r as isize, k, Vertical));
        }
        for k in 1..=r as isize {
            e.toggle_x(lat.edge(k, 0, Horizontal));
        }
    }
    let current = lat.logical_content(&e)?;
    let [x1, x2, z1, z2] = lat.logical_operators();
    // Z1 flips gamma_1, Z2 flips gamma_2, X1 flips gamma_3, X2 flips gamma_4.
    let flippers = [&z1, &z2, &x1, &x2];
    let diff = current ^ gamma;
    for (a, op) in flippers.iter().enumerate() {
        if diff.bit(a) == 1 {
            e ^= op;
        }
    }
    Ok(e)
}

fn check_capacity(lattice: Lattice) -> Result<()> {
    if lattice.size() > MAX_EXACT_SIZE {
        return Err(Error::Capacity(format!(
            "exact decoding enumerates 2^{} stabilizers at L = {}; only L <= {MAX_EXACT_SIZE} is supported",
            2 * lattice.num_vertices() - 2,
            lattice.size()
        )));
    }
    Ok(())
}

/// The stabilizer group of a small lattice as packed edge masks.
#[derive(Clone, Debug)]
pub struct StabilizerGroup {
    lattice: Lattice,
    /// X parts generated by the vertex stabilizers.
    x_elements: Vec<u64>,
    /// Z parts generated by the plaquette stabilizers.
    z_elements: Vec<u64>,
}

impl StabilizerGroup {
    pub fn new(lattice: Lattice) -> Result<Self> {
        check_capacity(lattice)?;
        let n = lattice.size() as isize;
        let mut x_gens = Vec::new();
        let mut z_gens = Vec::new();
        // The last vertex and plaquette are products of the others.
        for r in 0..n {
            for c in 0..n {
                if r == n - 1 && c == n - 1 {
                    continue;
                }
                x_gens.push(lattice.stabilizer_x(r, c).x_part().to_u64());
                z_gens.push(lattice.stabilizer_z(r, c).z_part().to_u64());
            }
        }
        Ok(Self { lattice, x_elements: gray_code_span(&x_gens), z_elements: gray_code_span(&z_gens) })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.x_elements.len() * self.z_elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every group element as a Pauli error.
    pub fn elements(&self) -> impl Iterator<Item = PauliError> + '_ {
        let edges = self.lattice.num_edges();
        self.x_elements.iter().flat_map(move |&x| {
            self.z_elements.iter().map(move |&z| {
                PauliError::from_parts(
                    self.lattice,
                    crate::bits::BitSet::from_u64(edges, x),
                    crate::bits::BitSet::from_u64(edges, z),
                )
                .expect("lattice-sized masks")
            })
        })
    }

    /// Histogram of `(#X-only, #Z-only, #XZ)` over the coset `rep . S`.
    pub fn coset_histogram(&self, rep: &PauliError) -> CosetHistogram {
        let n = self.lattice.num_edges();
        let side = n + 1;
        let mut counts = vec![0u32; side * side * side];
        let x0 = rep.x_part().to_u64();
        let z0 = rep.z_part().to_u64();
        for &xs in &self.x_elements {
            let x = x0 ^ xs;
            let cx = x.count_ones() as usize;
            for &zs in &self.z_elements {
                let z = z0 ^ zs;
                let y = (x & z).count_ones() as usize;
                let cz = z.count_ones() as usize;
                counts[((cx - y) * side + (cz - y)) * side + y] += 1;
            }
        }
        CosetHistogram { edges: n, counts }
    }
}

/// Enumerates the span of `gens` in Gray-code order: consecutive elements
/// differ by exactly one generator.
fn gray_code_span(gens: &[u64]) -> Vec<u64> {
    let total = 1usize << gens.len();
    let mut out = Vec::with_capacity(total);
    let mut current = 0u64;
    out.push(current);
    for step in 1..total {
        current ^= gens[step.trailing_zeros() as usize];
        out.push(current);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetHistogram {
    edges: usize,
    counts: Vec<u32>,
}

impl CosetHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// `sum_E p(E)` over the coset for an i.i.d. edge channel.
    pub fn probability<T: Scalar, N: NoiseModel + ?Sized>(&self, model: &N) -> T {
        let side = self.edges + 1;
        let [pi, px, pz, py] = model.pauli_probabilities().map(T::of);
        let powers = |base: T| -> Vec<T> {
            let mut v = Vec::with_capacity(side);
            let mut acc = T::one();
            for _ in 0..side {
                v.push(acc);
                acc *= base;
            }
            v
        };
        let (pow_i, pow_x, pow_z, pow_y) = (powers(pi), powers(px), powers(pz), powers(py));
        let mut total = T::zero();
        for nx in 0..side {
            for nz in 0..side - nx {
                for ny in 0..side - nx - nz {
                    let count = self.counts[(nx * side + nz) * side + ny];
                    if count == 0 {
                        continue;
                    }
                    let ni = self.edges - nx - nz - ny;
                    let w = pow_x[nx] * pow_z[nz] * pow_y[ny] * pow_i[ni];
                    total += T::from_u32(count).expect("count fits") * w;
                }
            }
        }
        total
    }
}

/// Joint probabilities `p(gamma, s)` for all 16 classes (unnormalized in
/// `gamma`; summing over every syndrome and class gives 1).
pub fn exact_distribution<T: Scalar, N: NoiseModel + ?Sized>(
    syndrome: &Syndrome,
    model: &N,
) -> Result<LogicalTensor<T>> {
    let group = StabilizerGroup::new(syndrome.lattice())?;
    exact_distribution_with(&group, syndrome, model)
}

pub fn exact_distribution_with<T: Scalar, N: NoiseModel + ?Sized>(
    group: &StabilizerGroup,
    syndrome: &Syndrome,
    model: &N,
) -> Result<LogicalTensor<T>> {
    if syndrome.lattice() != group.lattice() {
        return Err(Error::SizeMismatch { expected: group.lattice().size(), found: syndrome.lattice().size() });
    }
    syndrome.ensure_valid()?;
    let mut out = LogicalTensor::zeros();
    for gamma in LogicalBits::all() {
        let rep = representative_error(syndrome, gamma)?;
        out[gamma] = group.coset_histogram(&rep).probability(model);
    }
    Ok(out)
}

/// `p(gamma | s)`.
pub fn exact_posterior<T: Scalar, N: NoiseModel + ?Sized>(
    syndrome: &Syndrome,
    model: &N,
) -> Result<LogicalTensor<T>> {
    Ok(exact_distribution::<T, N>(syndrome, model)?.normalized())
}

/// `argmax_gamma p(gamma | s)`, ties broken toward the smallest class index.
pub fn decode_mld<N: NoiseModel + ?Sized>(syndrome: &Syndrome, model: &N) -> Result<LogicalBits> {
    Ok(exact_distribution::<f64, N>(syndrome, model)?.argmax())
}

/// Memoizing exact decoder for repeated evaluation on one lattice.
pub struct MldDecoder<N> {
    group: StabilizerGroup,
    model: N,
    cache: HashMap<u64, LogicalBits>,
}

impl<N: NoiseModel> MldDecoder<N> {
    pub fn new(lattice: Lattice, model: N) -> Result<Self> {
        Ok(Self { group: StabilizerGroup::new(lattice)?, model, cache: HashMap::new() })
    }

    pub fn distribution(&self, syndrome: &Syndrome) -> Result<LogicalTensor<f64>> {
        exact_distribution_with(&self.group, syndrome, &self.model)
    }

    pub fn decode(&mut self, syndrome: &Syndrome) -> Result<LogicalBits> {
        let key = syndrome.packed().expect("small lattice");
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let decoded = self.distribution(syndrome)?.argmax();
        self.cache.insert(key, decoded);
        Ok(decoded)
    }
}

/// Every valid (even-parity) syndrome of a lattice with at most 32 sites.
pub fn all_valid_syndromes(lattice: Lattice) -> impl Iterator<Item = Syndrome> {
    let sites = lattice.num_vertices();
    assert!(sites <= 16, "syndrome enumeration only for tiny lattices");
    let half: Vec<u64> = (0..1u64 << sites).filter(|m| m.count_ones() % 2 == 0).collect();
    let half2 = half.clone();
    half.into_iter().flat_map(move |x| {
        half2.clone().into_iter().map(move |z| {
            Syndrome::from_parts(
                lattice,
                crate::bits::BitSet::from_u64(sites, x),
                crate::bits::BitSet::from_u64(sites, z),
            )
            .expect("sized parts")
        })
    })
}
