//! Truncated Fock spaces and sparse ladder operators.
//!
//! Basis states are occupation-number vectors over a fixed list of modes,
//! enumerated lexicographically (first mode most significant). Bosonic
//! operators carry the sqrt(n) / sqrt(n+1) amplitudes; fermionic ones are
//! hard-capped at single occupancy and pick up the Jordan-Wigner parity of
//! the modes preceding the acted-on mode. Every ladder operator maps each
//! basis state to at most one other state, so the matrices are stored as one
//! optional (row, amplitude) entry per column.

use alloc::vec;
use alloc::vec::Vec;
// Float supplies the math methods the std prelude would; only the
// no_std build resolves through it.
#[cfg(not(test))]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Boson,
    Fermion,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FockError {
    /// num_modes = 0 or max_occ = 0 leaves nothing to enumerate.
    EmptyBasis,
    /// Fermionic modes hold at most one particle.
    FermionOccupancy { max_occ: usize },
    /// Mode index outside the basis.
    ModeOutOfRange { mode: usize, num_modes: usize },
    /// Photon-counting element needs at least one incoming photon.
    NoIncomingPhotons,
    /// Requested occupancy does not fit in the truncated basis.
    ExceedsTruncation { n: usize, max_occ: usize },
    /// Photon-counting element is defined on a two-mode bosonic basis.
    WrongBasisShape,
}

impl core::fmt::Display for FockError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FockError::EmptyBasis => write!(f, "basis needs at least one mode and occupancy 1"),
            FockError::FermionOccupancy { max_occ } => {
                write!(f, "fermionic basis requires max_occ = 1, got {max_occ}")
            }
            FockError::ModeOutOfRange { mode, num_modes } => {
                write!(f, "mode {mode} outside basis with {num_modes} modes")
            }
            FockError::NoIncomingPhotons => write!(f, "photon count must be at least 1"),
            FockError::ExceedsTruncation { n, max_occ } => {
                write!(f, "occupancy {n} exceeds basis truncation {max_occ}")
            }
            FockError::WrongBasisShape => {
                write!(f, "expected a two-mode bosonic basis (incoming, scattered)")
            }
        }
    }
}

/// Truncated occupation-number basis.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub num_modes: usize,
    pub max_occ: usize,
    pub statistics: Statistics,
}

impl ModeBasis {
    pub fn new(
        num_modes: usize,
        max_occ: usize,
        statistics: Statistics,
    ) -> Result<Self, FockError> {
        if num_modes == 0 || max_occ == 0 {
            return Err(FockError::EmptyBasis);
        }
        if statistics == Statistics::Fermion && max_occ != 1 {
            return Err(FockError::FermionOccupancy { max_occ });
        }
        Ok(ModeBasis {
            num_modes,
            max_occ,
            statistics,
        })
    }

    /// (max_occ + 1)^num_modes basis states.
    pub fn dimension(&self) -> usize {
        (self.max_occ + 1).pow(self.num_modes as u32)
    }

    /// Lexicographic index of an occupation vector; first mode most significant.
    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        if occ.len() != self.num_modes || occ.iter().any(|&n| n > self.max_occ) {
            return None;
        }
        let base = self.max_occ + 1;
        Some(occ.iter().fold(0usize, |acc, &n| acc * base + n))
    }

    /// Occupation vector of a basis index.
    pub fn occupancy(&self, mut index: usize) -> Vec<usize> {
        let base = self.max_occ + 1;
        let mut occ = vec![0usize; self.num_modes];
        for slot in occ.iter_mut().rev() {
            *slot = index % base;
            index /= base;
        }
        occ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Creation,
    Annihilation,
}

/// Sparse ladder operator: at most one (row, amplitude) entry per column.
#[derive(Debug, Clone)]
pub struct LadderOperator {
    pub mode: usize,
    pub kind: LadderKind,
    cols: Vec<Option<(usize, f64)>>,
}

impl LadderOperator {
    pub fn new(basis: &ModeBasis, mode: usize, kind: LadderKind) -> Result<Self, FockError> {
        if mode >= basis.num_modes {
            return Err(FockError::ModeOutOfRange {
                mode,
                num_modes: basis.num_modes,
            });
        }
        let dim = basis.dimension();
        let mut cols = vec![None; dim];
        for (col, slot) in cols.iter_mut().enumerate() {
            let mut occ = basis.occupancy(col);
            let n = occ[mode];
            *slot = match (basis.statistics, kind) {
                (Statistics::Boson, LadderKind::Annihilation) if n > 0 => {
                    occ[mode] = n - 1;
                    Some((basis.index_of(&occ).unwrap(), (n as f64).sqrt()))
                }
                (Statistics::Boson, LadderKind::Creation) if n < basis.max_occ => {
                    occ[mode] = n + 1;
                    Some((basis.index_of(&occ).unwrap(), ((n + 1) as f64).sqrt()))
                }
                (Statistics::Fermion, LadderKind::Annihilation) if n == 1 => {
                    occ[mode] = 0;
                    Some((basis.index_of(&occ).unwrap(), jw_sign(&occ, mode)))
                }
                (Statistics::Fermion, LadderKind::Creation) if n == 0 => {
                    occ[mode] = 1;
                    Some((basis.index_of(&occ).unwrap(), jw_sign(&occ, mode)))
                }
                // Truncation boundary or Pauli blocking: state annihilated.
                _ => None,
            };
        }
        Ok(LadderOperator { mode, kind, cols })
    }

    /// Image of a basis state, if any.
    pub fn apply_basis(&self, index: usize) -> Option<(usize, f64)> {
        self.cols[index]
    }

    /// Number of nonzero entries in a column (0 or 1 by construction).
    pub fn column_fill(&self, index: usize) -> usize {
        usize::from(self.cols[index].is_some())
    }

    pub fn dimension(&self) -> usize {
        self.cols.len()
    }

    /// Dense action on a coefficient vector.
    pub fn apply_dense(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols.len()];
        for (col, entry) in self.cols.iter().enumerate() {
            if let Some((row, amp)) = entry {
                out[*row] += amp * v[col];
            }
        }
        out
    }
}

/// Jordan-Wigner parity (-1)^(number of occupied modes before `mode`).
fn jw_sign(occ: &[usize], mode: usize) -> f64 {
    let swaps: usize = occ[..mode].iter().sum();
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Apply a chain of ladder operators to a basis state, rightmost first.
pub fn apply_chain(ops: &[&LadderOperator], index: usize) -> Option<(usize, f64)> {
    let mut state = index;
    let mut amp = 1.0;
    for op in ops.iter().rev() {
        let (next, a) = op.apply_basis(state)?;
        state = next;
        amp *= a;
    }
    Some((state, amp))
}

/// Matrix element of an operator chain between occupation vectors.
pub fn chain_element(
    basis: &ModeBasis,
    bra: &[usize],
    ops: &[&LadderOperator],
    ket: &[usize],
) -> Option<f64> {
    let bra_idx = basis.index_of(bra)?;
    let ket_idx = basis.index_of(ket)?;
    match apply_chain(ops, ket_idx) {
        Some((row, amp)) if row == bra_idx => Some(amp),
        _ => Some(0.0),
    }
}

/// Residuals of the bosonic commutators [a_i, a_j^dag] - delta_ij.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorResidual {
    /// Largest residual over columns whose creation mode sits below max_occ.
    pub interior: f64,
    /// Largest residual on truncation-boundary columns (grows like max_occ + 1).
    pub boundary: f64,
}

/// Check the canonical commutation relations on a bosonic basis.
pub fn commutator_check(basis: &ModeBasis) -> Result<CommutatorResidual, FockError> {
    debug_assert_eq!(basis.statistics, Statistics::Boson);
    let dim = basis.dimension();
    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for i in 0..basis.num_modes {
        let a_i = LadderOperator::new(basis, i, LadderKind::Annihilation)?;
        for j in 0..basis.num_modes {
            let adag_j = LadderOperator::new(basis, j, LadderKind::Creation)?;
            for col in 0..dim {
                let occ = basis.occupancy(col);
                let mut residual = ColumnAccum::new();
                if let Some((row, amp)) = apply_chain(&[&a_i, &adag_j], col) {
                    residual.add(row, amp);
                }
                if let Some((row, amp)) = apply_chain(&[&adag_j, &a_i], col) {
                    residual.add(row, -amp);
                }
                if i == j {
                    residual.add(col, -1.0);
                }
                let r = residual.max_abs();
                if occ[j] == basis.max_occ {
                    boundary = boundary.max(r);
                } else {
                    interior = interior.max(r);
                }
            }
        }
    }
    Ok(CommutatorResidual { interior, boundary })
}

/// Residuals of the fermionic anticommutators.
#[derive(Debug, Clone, Copy)]
pub struct AnticommutatorResidual {
    /// Largest residual of {b_i, b_j^dag} - delta_ij.
    pub mixed: f64,
    /// Largest residual of {b_i, b_j}.
    pub pair: f64,
}

/// Check the canonical anticommutation relations on a fermionic basis.
pub fn anticommutator_check(basis: &ModeBasis) -> Result<AnticommutatorResidual, FockError> {
    debug_assert_eq!(basis.statistics, Statistics::Fermion);
    let dim = basis.dimension();
    let mut mixed = 0.0f64;
    let mut pair = 0.0f64;
    for i in 0..basis.num_modes {
        let b_i = LadderOperator::new(basis, i, LadderKind::Annihilation)?;
        let b_i_ann = &b_i;
        for j in 0..basis.num_modes {
            let bdag_j = LadderOperator::new(basis, j, LadderKind::Creation)?;
            let b_j = LadderOperator::new(basis, j, LadderKind::Annihilation)?;
            for col in 0..dim {
                let mut acc = ColumnAccum::new();
                if let Some((row, amp)) = apply_chain(&[b_i_ann, &bdag_j], col) {
                    acc.add(row, amp);
                }
                if let Some((row, amp)) = apply_chain(&[&bdag_j, b_i_ann], col) {
                    acc.add(row, amp);
                }
                if i == j {
                    acc.add(col, -1.0);
                }
                mixed = mixed.max(acc.max_abs());

                let mut acc2 = ColumnAccum::new();
                if let Some((row, amp)) = apply_chain(&[b_i_ann, &b_j], col) {
                    acc2.add(row, amp);
                }
                if let Some((row, amp)) = apply_chain(&[&b_j, b_i_ann], col) {
                    acc2.add(row, amp);
                }
                pair = pair.max(acc2.max_abs());
            }
        }
    }
    Ok(AnticommutatorResidual { mixed, pair })
}

/// Photon-counting matrix element
/// `<n-1, 1_s| a_in a_s^dag + a_s^dag a_in |n, 0_s> = 2 sqrt(n)`.
///
/// The basis must be bosonic with exactly two modes (incoming, scattered)
/// and truncation at or above `n_in`.
pub fn xray_transition_element(basis: &ModeBasis, n_in: usize) -> Result<f64, FockError> {
    if basis.statistics != Statistics::Boson || basis.num_modes != 2 {
        return Err(FockError::WrongBasisShape);
    }
    if n_in == 0 {
        return Err(FockError::NoIncomingPhotons);
    }
    if n_in > basis.max_occ {
        return Err(FockError::ExceedsTruncation {
            n: n_in,
            max_occ: basis.max_occ,
        });
    }
    let a_in = LadderOperator::new(basis, 0, LadderKind::Annihilation)?;
    let adag_s = LadderOperator::new(basis, 1, LadderKind::Creation)?;
    let bra = [n_in - 1, 1];
    let ket = [n_in, 0];
    let first = chain_element(basis, &bra, &[&a_in, &adag_s], &ket).unwrap_or(0.0);
    let second = chain_element(basis, &bra, &[&adag_s, &a_in], &ket).unwrap_or(0.0);
    Ok(first + second)
}

/// Tiny accumulator for at most a handful of (row, coefficient) pairs.
struct ColumnAccum {
    entries: Vec<(usize, f64)>,
}

impl ColumnAccum {
    fn new() -> Self {
        ColumnAccum {
            entries: Vec::with_capacity(3),
        }
    }

    fn add(&mut self, row: usize, coeff: f64) {
        for e in self.entries.iter_mut() {
            if e.0 == row {
                e.1 += coeff;
                return;
            }
        }
        self.entries.push((row, coeff));
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }
}
