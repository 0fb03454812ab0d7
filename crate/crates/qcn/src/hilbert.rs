//! Tensor-product Hilbert space: layouts, embedded operators, density
//! matrices.
//!
//! A [`SpaceLayout`] is an ordered list of subsystems (the three-level
//! emitter and truncated bosonic modes). Basis states are enumerated
//! row-major in layout order, so the first listed subsystem has the slowest
//! index; this ordering is fixed so that matrix elements and emitted files
//! are reproducible. Operators are stored sparse, density matrices dense.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::hermitian_eigenvalues;
use crate::sparse::CsrMatrix;

/// Hermiticity tolerance for density matrices (max elementwise |ρ − ρ†|).
pub const DENSITY_HERMITICITY_TOL: f64 = 1e-10;
/// Allowed trace deviation |tr ρ − 1| after normalization.
pub const DENSITY_TRACE_TOL: f64 = 1e-8;
/// Most negative admissible eigenvalue (numerical positivity slack).
pub const DENSITY_POSITIVITY_TOL: f64 = -1e-8;
/// Imaginary parts of Hermitian-observable expectations above this are
/// treated as an error rather than discarded.
pub const OBSERVABLE_IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum HilbertError {
    #[error("duplicate subsystem label {0}")]
    DuplicateLabel(Subsystem),
    #[error("subsystem {0} has zero dimension")]
    ZeroDimension(Subsystem),
    #[error("emitter must have dimension 3, got {0}")]
    EmitterDimension(usize),
    #[error("subsystem {0} not present in layout")]
    UnknownSubsystem(Subsystem),
    #[error("subsystem {0} is not bosonic")]
    NotBosonic(Subsystem),
    #[error("emitter level {0} outside 1..=3")]
    LevelOutOfRange(usize),
    #[error("operands live on different layouts")]
    LayoutMismatch,
    #[error("matrix dimension {got} does not match layout dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("density matrix is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("density matrix trace deviates from one by {0:.3e}")]
    TraceDeviation(f64),
    #[error("density matrix has eigenvalue {0:.3e} below the positivity floor")]
    NegativeEigenvalue(f64),
    #[error("expectation of hermitian observable has imaginary part {0:.3e}")]
    ImaginaryExpectation(f64),
    #[error("state occupation {occ} outside subsystem dimension {dim}")]
    OccupationOutOfRange { occ: usize, dim: usize },
    #[error("density matrix has zero trace")]
    ZeroTrace,
}

/// The subsystems a layout may contain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subsystem {
    /// Three-level V-type emitter.
    Qe,
    /// Signal cavity mode a.
    CavA,
    /// Probe cavity mode b.
    CavB,
    /// Source cavity feeding mode a.
    SrcD1,
    /// Source cavity feeding mode b.
    SrcD2,
}

impl Subsystem {
    pub fn as_str(self) -> &'static str {
        match self {
            Subsystem::Qe => "qe",
            Subsystem::CavA => "cav_a",
            Subsystem::CavB => "cav_b",
            Subsystem::SrcD1 => "src_d1",
            Subsystem::SrcD2 => "src_d2",
        }
    }

    pub fn is_bosonic(self) -> bool {
        !matches!(self, Subsystem::Qe)
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered list of subsystems with their dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    subsystems: Vec<(Subsystem, usize)>,
}

impl SpaceLayout {
    /// Build a layout, validating uniqueness and dimensions. The subsystem
    /// order is kept as given.
    pub fn new(specs: &[(Subsystem, usize)]) -> Result<Arc<Self>, HilbertError> {
        for (i, &(label, dim)) in specs.iter().enumerate() {
            if dim == 0 {
                return Err(HilbertError::ZeroDimension(label));
            }
            if label == Subsystem::Qe && dim != 3 {
                return Err(HilbertError::EmitterDimension(dim));
            }
            if specs[..i].iter().any(|&(l, _)| l == label) {
                return Err(HilbertError::DuplicateLabel(label));
            }
        }
        Ok(Arc::new(Self { subsystems: specs.to_vec() }))
    }

    pub fn subsystems(&self) -> &[(Subsystem, usize)] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|&(_, d)| d).product()
    }

    pub fn contains(&self, s: Subsystem) -> bool {
        self.subsystems.iter().any(|&(l, _)| l == s)
    }

    pub fn dim_of(&self, s: Subsystem) -> Option<usize> {
        self.subsystems.iter().find(|&&(l, _)| l == s).map(|&(_, d)| d)
    }

    fn position_of(&self, s: Subsystem) -> Option<usize> {
        self.subsystems.iter().position(|&(l, _)| l == s)
    }

    /// Dimensions of everything before and after a given subsystem.
    fn split_dims(&self, pos: usize) -> (usize, usize) {
        let before = self.subsystems[..pos].iter().map(|&(_, d)| d).product();
        let after = self.subsystems[pos + 1..].iter().map(|&(_, d)| d).product();
        (before, after)
    }

    /// Flat basis index of a product state given one local index per
    /// subsystem, in layout order.
    pub fn basis_index(&self, occ: &[usize]) -> Result<usize, HilbertError> {
        if occ.len() != self.subsystems.len() {
            return Err(HilbertError::DimensionMismatch { got: occ.len(), want: self.subsystems.len() });
        }
        let mut idx = 0;
        for (&o, &(_, d)) in occ.iter().zip(&self.subsystems) {
            if o >= d {
                return Err(HilbertError::OccupationOutOfRange { occ: o, dim: d });
            }
            idx = idx * d + o;
        }
        Ok(idx)
    }
}

fn same_layout(a: &Arc<SpaceLayout>, b: &Arc<SpaceLayout>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Complex operator on the full tensor space.
#[derive(Clone, Debug)]
pub struct QuantumOperator {
    layout: Arc<SpaceLayout>,
    matrix: CsrMatrix,
}

impl QuantumOperator {
    pub(crate) fn from_csr(layout: Arc<SpaceLayout>, matrix: CsrMatrix) -> Self {
        debug_assert_eq!(layout.total_dim(), matrix.dim());
        Self { layout, matrix }
    }

    pub fn zero(layout: &Arc<SpaceLayout>) -> Self {
        Self::from_csr(layout.clone(), CsrMatrix::zeros(layout.total_dim()))
    }

    pub fn identity(layout: &Arc<SpaceLayout>) -> Self {
        Self::from_csr(layout.clone(), CsrMatrix::identity(layout.total_dim()))
    }

    /// Embed a local operator (given as triplets on one subsystem) by
    /// tensoring identities on all the other factors.
    fn embed(
        layout: &Arc<SpaceLayout>,
        s: Subsystem,
        local: CsrMatrix,
    ) -> Result<Self, HilbertError> {
        let pos = layout.position_of(s).ok_or(HilbertError::UnknownSubsystem(s))?;
        let (before, after) = layout.split_dims(pos);
        let m = CsrMatrix::identity(before).kron(&local).kron(&CsrMatrix::identity(after));
        Ok(Self::from_csr(layout.clone(), m))
    }

    /// Annihilation operator on a bosonic subsystem: ⟨n−1|a|n⟩ = √n up to
    /// the truncation.
    pub fn destroy(layout: &Arc<SpaceLayout>, s: Subsystem) -> Result<Self, HilbertError> {
        if !s.is_bosonic() {
            return Err(HilbertError::NotBosonic(s));
        }
        let dim = layout.dim_of(s).ok_or(HilbertError::UnknownSubsystem(s))?;
        let triplets = (1..dim)
            .map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))
            .collect();
        Self::embed(layout, s, CsrMatrix::from_triplets(dim, triplets))
    }

    /// Creation operator on a bosonic subsystem.
    pub fn create(layout: &Arc<SpaceLayout>, s: Subsystem) -> Result<Self, HilbertError> {
        Ok(Self::destroy(layout, s)?.adjoint())
    }

    /// Number operator a†a on a bosonic subsystem.
    pub fn number(layout: &Arc<SpaceLayout>, s: Subsystem) -> Result<Self, HilbertError> {
        if !s.is_bosonic() {
            return Err(HilbertError::NotBosonic(s));
        }
        let dim = layout.dim_of(s).ok_or(HilbertError::UnknownSubsystem(s))?;
        let triplets = (1..dim).map(|n| (n, n, C64::new(n as f64, 0.0))).collect();
        Self::embed(layout, s, CsrMatrix::from_triplets(dim, triplets))
    }

    /// Emitter transition |m⟩⟨n| with 1-based levels m, n ∈ {1, 2, 3}.
    pub fn transition(
        layout: &Arc<SpaceLayout>,
        m: usize,
        n: usize,
    ) -> Result<Self, HilbertError> {
        for lvl in [m, n] {
            if !(1..=3).contains(&lvl) {
                return Err(HilbertError::LevelOutOfRange(lvl));
            }
        }
        let local = CsrMatrix::from_triplets(3, vec![(m - 1, n - 1, C64::new(1.0, 0.0))]);
        Self::embed(layout, Subsystem::Qe, local)
    }

    /// Build from a dense matrix; mainly useful in tests.
    pub fn from_dense(
        layout: &Arc<SpaceLayout>,
        dense: &Array2<C64>,
    ) -> Result<Self, HilbertError> {
        let d = layout.total_dim();
        if dense.nrows() != d || dense.ncols() != d {
            return Err(HilbertError::DimensionMismatch { got: dense.nrows(), want: d });
        }
        let triplets = dense
            .indexed_iter()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Ok(Self::from_csr(layout.clone(), CsrMatrix::from_triplets(d, triplets)))
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    pub(crate) fn csr(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix.get(i, j)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, HilbertError> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(Self::from_csr(self.layout.clone(), self.matrix.add(&other.matrix)))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, HilbertError> {
        self.checked_add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, HilbertError> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(Self::from_csr(self.layout.clone(), self.matrix.matmul(&other.matrix)))
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_csr(self.layout.clone(), self.matrix.scaled(s))
    }

    pub fn scaled_re(&self, s: f64) -> Self {
        self.scaled(C64::new(s, 0.0))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_csr(self.layout.clone(), self.matrix.adjoint())
    }

    /// [self, other]
    pub fn commutator(&self, other: &Self) -> Result<Self, HilbertError> {
        self.checked_mul(other)?.checked_sub(&other.checked_mul(self)?)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.matrix.is_hermitian(tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    /// tr(self · ρ).
    pub fn expect(&self, rho: &DensityMatrix) -> Result<C64, HilbertError> {
        if !same_layout(&self.layout, &rho.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(self.matrix.expect(&rho.matrix))
    }

    /// Expectation of a Hermitian observable; the imaginary part must be
    /// negligible and is discarded.
    pub fn expect_real(&self, rho: &DensityMatrix) -> Result<f64, HilbertError> {
        let v = self.expect(rho)?;
        if v.im.abs() > OBSERVABLE_IMAG_TOL * v.re.abs().max(1.0) {
            return Err(HilbertError::ImaginaryExpectation(v.im));
        }
        Ok(v.re)
    }
}

impl std::ops::Add for &QuantumOperator {
    type Output = QuantumOperator;
    /// Panics on layout mismatch; use [`QuantumOperator::checked_add`] to
    /// handle the error.
    fn add(self, rhs: &QuantumOperator) -> QuantumOperator {
        self.checked_add(rhs).expect("operator addition")
    }
}

impl std::ops::Sub for &QuantumOperator {
    type Output = QuantumOperator;
    fn sub(self, rhs: &QuantumOperator) -> QuantumOperator {
        self.checked_sub(rhs).expect("operator subtraction")
    }
}

impl std::ops::Mul for &QuantumOperator {
    type Output = QuantumOperator;
    fn mul(self, rhs: &QuantumOperator) -> QuantumOperator {
        self.checked_mul(rhs).expect("operator product")
    }
}

/// Dense density matrix tagged with its layout.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: Arc<SpaceLayout>,
    matrix: Array2<C64>,
}

impl DensityMatrix {
    /// Pure product state from one local ket per subsystem, in layout order.
    pub fn pure_from_factors(
        layout: &Arc<SpaceLayout>,
        factors: &[Vec<C64>],
    ) -> Result<Self, HilbertError> {
        if factors.len() != layout.subsystems().len() {
            return Err(HilbertError::DimensionMismatch {
                got: factors.len(),
                want: layout.subsystems().len(),
            });
        }
        let mut ket = vec![C64::new(1.0, 0.0)];
        for (f, &(_, d)) in factors.iter().zip(layout.subsystems()) {
            if f.len() != d {
                return Err(HilbertError::DimensionMismatch { got: f.len(), want: d });
            }
            let mut next = Vec::with_capacity(ket.len() * d);
            for &a in &ket {
                for &b in f {
                    next.push(a * b);
                }
            }
            ket = next;
        }
        let norm: f64 = ket.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(HilbertError::ZeroTrace);
        }
        let d = layout.total_dim();
        let mut m = Array2::zeros((d, d));
        for (i, &a) in ket.iter().enumerate() {
            for (j, &b) in ket.iter().enumerate() {
                m[(i, j)] = a * b.conj() / (norm * norm);
            }
        }
        Ok(Self { layout: layout.clone(), matrix: m })
    }

    /// Pure product basis state from one occupation number per subsystem
    /// (emitter: 0, 1, 2 for levels |1⟩, |2⟩, |3⟩).
    pub fn pure_product(layout: &Arc<SpaceLayout>, occ: &[usize]) -> Result<Self, HilbertError> {
        let idx = layout.basis_index(occ)?;
        let d = layout.total_dim();
        let mut m = Array2::zeros((d, d));
        m[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(Self { layout: layout.clone(), matrix: m })
    }

    /// Emitter in its ground state, every bosonic mode empty.
    pub fn vacuum(layout: &Arc<SpaceLayout>) -> Self {
        let occ = vec![0; layout.subsystems().len()];
        Self::pure_product(layout, &occ).expect("vacuum occupation is always valid")
    }

    pub fn maximally_mixed(layout: &Arc<SpaceLayout>) -> Self {
        let d = layout.total_dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            m[(i, i)] = C64::new(1.0 / d as f64, 0.0);
        }
        Self { layout: layout.clone(), matrix: m }
    }

    /// Wrap a dense matrix: normalized, then validated.
    pub fn from_matrix(
        layout: &Arc<SpaceLayout>,
        matrix: Array2<C64>,
    ) -> Result<Self, HilbertError> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HilbertError::DimensionMismatch { got: matrix.nrows(), want: d });
        }
        let mut rho = Self { layout: layout.clone(), matrix };
        rho.normalize()?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(layout: Arc<SpaceLayout>, matrix: Array2<C64>) -> Self {
        Self { layout, matrix }
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().iter().sum()
    }

    pub fn normalize(&mut self) -> Result<(), HilbertError> {
        let tr = self.trace();
        if tr.norm() == 0.0 {
            return Err(HilbertError::ZeroTrace);
        }
        self.matrix.mapv_inplace(|v| v / tr);
        Ok(())
    }

    /// Replace ρ by (ρ + ρ†)/2.
    pub fn hermitize(&mut self) {
        let adj = self.matrix.t().mapv(|v| v.conj());
        self.matrix = (&self.matrix + &adj).mapv(|v| v * 0.5);
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let dev = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                max = max.max(dev);
            }
        }
        max
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    /// Smallest eigenvalue of a raw Hermitian matrix, for positivity
    /// diagnostics on sampled states that are not validated density
    /// matrices yet.
    pub fn min_eigenvalue_of(matrix: &Array2<C64>) -> f64 {
        hermitian_eigenvalues(matrix)[0]
    }

    /// Check the three density-matrix invariants: hermiticity, unit trace,
    /// positivity up to numerical noise.
    pub fn validate(&self) -> Result<(), HilbertError> {
        let dev = self.hermiticity_deviation();
        if dev > DENSITY_HERMITICITY_TOL {
            return Err(HilbertError::NotHermitian(dev));
        }
        let tr = self.trace();
        let tdev = (tr - C64::new(1.0, 0.0)).norm();
        if tdev > DENSITY_TRACE_TOL {
            return Err(HilbertError::TraceDeviation(tdev));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < DENSITY_POSITIVITY_TOL {
            return Err(HilbertError::NegativeEigenvalue(min_eig));
        }
        Ok(())
    }

    /// ½ Σ |λ_i(ρ − σ)|.
    pub fn trace_distance(&self, other: &Self) -> Result<f64, HilbertError> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qab(na: usize, nb: usize) -> Arc<SpaceLayout> {
        SpaceLayout::new(&[
            (Subsystem::Qe, 3),
            (Subsystem::CavA, na),
            (Subsystem::CavB, nb),
        ])
        .unwrap()
    }

    #[test]
    fn layout_dimensions() {
        assert_eq!(qab(5, 5).total_dim(), 75);
        assert_eq!(SpaceLayout::new(&[(Subsystem::Qe, 3)]).unwrap().total_dim(), 3);
        let full = SpaceLayout::new(&[
            (Subsystem::Qe, 3),
            (Subsystem::CavA, 4),
            (Subsystem::CavB, 3),
            (Subsystem::SrcD1, 4),
            (Subsystem::SrcD2, 3),
        ])
        .unwrap();
        assert_eq!(full.total_dim(), 432);
    }

    #[test]
    fn layout_rejects_bad_specs() {
        assert_eq!(
            SpaceLayout::new(&[(Subsystem::Qe, 3), (Subsystem::Qe, 3)]).unwrap_err(),
            HilbertError::DuplicateLabel(Subsystem::Qe)
        );
        assert_eq!(
            SpaceLayout::new(&[(Subsystem::CavA, 0)]).unwrap_err(),
            HilbertError::ZeroDimension(Subsystem::CavA)
        );
        assert_eq!(
            SpaceLayout::new(&[(Subsystem::Qe, 4)]).unwrap_err(),
            HilbertError::EmitterDimension(4)
        );
    }

    #[test]
    fn destroy_matrix_elements() {
        let layout = SpaceLayout::new(&[(Subsystem::CavA, 4)]).unwrap();
        let a = QuantumOperator::destroy(&layout, Subsystem::CavA).unwrap();
        for n in 1..4usize {
            assert_eq!(a.get(n - 1, n), c((n as f64).sqrt(), 0.0));
        }
        assert_eq!(a.csr().nnz(), 3);

        // annihilating the vacuum gives the zero column
        for i in 0..4 {
            assert_eq!(a.get(i, 0), c(0.0, 0.0));
        }
    }

    #[test]
    fn destroy_rejects_emitter_and_unknown() {
        let layout = qab(2, 2);
        assert_eq!(
            QuantumOperator::destroy(&layout, Subsystem::Qe).unwrap_err(),
            HilbertError::NotBosonic(Subsystem::Qe)
        );
        assert_eq!(
            QuantumOperator::destroy(&layout, Subsystem::SrcD1).unwrap_err(),
            HilbertError::UnknownSubsystem(Subsystem::SrcD1)
        );
    }

    #[test]
    fn truncated_commutator_corner_element() {
        // [a, a†] = 1 everywhere except the top Fock level, where the
        // truncation leaves 1 − dim = −3 for dim 4.
        let layout = SpaceLayout::new(&[(Subsystem::CavA, 4)]).unwrap();
        let a = QuantumOperator::destroy(&layout, Subsystem::CavA).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        for n in 0..3 {
            assert!((comm.get(n, n) - c(1.0, 0.0)).norm() < 1e-14);
        }
        assert!((comm.get(3, 3) - c(-3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn number_counts_fock_levels() {
        let layout = SpaceLayout::new(&[(Subsystem::CavB, 6)]).unwrap();
        let a = QuantumOperator::destroy(&layout, Subsystem::CavB).unwrap();
        let n_op = a.adjoint().checked_mul(&a).unwrap();
        for n in 0..6 {
            assert!((n_op.get(n, n) - c(n as f64, 0.0)).norm() < 1e-14);
        }
        let direct = QuantumOperator::number(&layout, Subsystem::CavB).unwrap();
        assert!(n_op.checked_sub(&direct).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn transition_algebra() {
        let layout = qab(2, 2);
        let s12 = QuantumOperator::transition(&layout, 1, 2).unwrap();
        let s21 = QuantumOperator::transition(&layout, 2, 1).unwrap();
        let s11 = QuantumOperator::transition(&layout, 1, 1).unwrap();

        // σ₁₂σ₂₁ = σ₁₁
        let prod = s12.checked_mul(&s21).unwrap();
        assert!(prod.checked_sub(&s11).unwrap().max_abs() < 1e-14);

        // completeness on the emitter factor
        let sum = [(1, 1), (2, 2), (3, 3)]
            .iter()
            .map(|&(m, n)| QuantumOperator::transition(&layout, m, n).unwrap())
            .reduce(|a, b| a.checked_add(&b).unwrap())
            .unwrap();
        let id = QuantumOperator::identity(&layout);
        assert!(sum.checked_sub(&id).unwrap().max_abs() < 1e-14);

        // σ₂₁σ₁₃ = |2⟩⟨3|
        let s13 = QuantumOperator::transition(&layout, 1, 3).unwrap();
        let s23 = QuantumOperator::transition(&layout, 2, 3).unwrap();
        let prod = s21.checked_mul(&s13).unwrap();
        assert!(prod.checked_sub(&s23).unwrap().max_abs() < 1e-14);

        assert_eq!(
            QuantumOperator::transition(&layout, 0, 1).unwrap_err(),
            HilbertError::LevelOutOfRange(0)
        );
        assert_eq!(
            QuantumOperator::transition(&layout, 1, 4).unwrap_err(),
            HilbertError::LevelOutOfRange(4)
        );
    }

    #[test]
    fn adjoint_involution() {
        let layout = qab(3, 2);
        let a = QuantumOperator::destroy(&layout, Subsystem::CavA).unwrap();
        assert!(a.adjoint().adjoint().checked_sub(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let layout = qab(3, 3);
        let a = QuantumOperator::destroy(&layout, Subsystem::CavA).unwrap();
        let b = QuantumOperator::destroy(&layout, Subsystem::CavB).unwrap();
        assert!(a.commutator(&b).unwrap().max_abs() < 1e-15);
        let s21 = QuantumOperator::transition(&layout, 2, 1).unwrap();
        assert!(s21.commutator(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let la = qab(2, 2);
        let lb = qab(3, 2);
        let a = QuantumOperator::destroy(&la, Subsystem::CavA).unwrap();
        let b = QuantumOperator::destroy(&lb, Subsystem::CavA).unwrap();
        assert_eq!(a.checked_add(&b).unwrap_err(), HilbertError::LayoutMismatch);
        assert_eq!(a.checked_mul(&b).unwrap_err(), HilbertError::LayoutMismatch);
    }

    #[test]
    fn expectations() {
        let layout = qab(3, 3);
        // emitter in |2⟩ (local index 1), cavity a in Fock |2⟩, cavity b empty
        let rho = DensityMatrix::pure_product(&layout, &[1, 2, 0]).unwrap();
        let n_a = QuantumOperator::number(&layout, Subsystem::CavA).unwrap();
        assert!((n_a.expect_real(&rho).unwrap() - 2.0).abs() < 1e-14);
        let id = QuantumOperator::identity(&layout);
        assert!((id.expect_real(&rho).unwrap() - 1.0).abs() < 1e-14);
        let s22 = QuantumOperator::transition(&layout, 2, 2).unwrap();
        assert!((s22.expect_real(&rho).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn number_expectation_below_truncation() {
        let layout = SpaceLayout::new(&[(Subsystem::CavA, 5)]).unwrap();
        let n_op = QuantumOperator::number(&layout, Subsystem::CavA).unwrap();
        for n in 0..5 {
            let rho = DensityMatrix::pure_product(&layout, &[n]).unwrap();
            assert!((n_op.expect_real(&rho).unwrap() - n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn density_invariants() {
        let layout = qab(2, 2);
        let rho = DensityMatrix::vacuum(&layout);
        rho.validate().unwrap();
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(rho.min_eigenvalue() > -1e-15);

        let mixed = DensityMatrix::maximally_mixed(&layout);
        mixed.validate().unwrap();
        assert!((mixed.trace_distance(&mixed).unwrap()).abs() < 1e-12);
        // distance between orthogonal pure states is 1
        let e1 = DensityMatrix::pure_product(&layout, &[0, 0, 0]).unwrap();
        let e2 = DensityMatrix::pure_product(&layout, &[1, 0, 0]).unwrap();
        assert!((e1.trace_distance(&e2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_matrix_rejects_non_hermitian() {
        let layout = SpaceLayout::new(&[(Subsystem::CavA, 2)]).unwrap();
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(
            DensityMatrix::from_matrix(&layout, m).unwrap_err(),
            HilbertError::NotHermitian(_)
        ));
    }

    // Embedding commutes with products: same subsystem gives embed(A·B),
    // different subsystems give the factor-wise tensor product.
    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn embedding_commutes_with_products(
            re_a in proptest::collection::vec(-1.0f64..1.0, 9),
            im_a in proptest::collection::vec(-1.0f64..1.0, 9),
            re_b in proptest::collection::vec(-1.0f64..1.0, 9),
            im_b in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let layout = SpaceLayout::new(&[(Subsystem::CavA, 3), (Subsystem::CavB, 3)]).unwrap();
            let mk = |re: &[f64], im: &[f64]| {
                Array2::from_shape_fn((3, 3), |(i, j)| c(re[3 * i + j], im[3 * i + j]))
            };
            let a_local = mk(&re_a, &im_a);
            let b_local = mk(&re_b, &im_b);
            let embed = |local: &Array2<C64>, s: Subsystem| {
                let full = match s {
                    Subsystem::CavA => ndarray::linalg::kron(local, &Array2::eye(3)),
                    _ => ndarray::linalg::kron(&Array2::eye(3), local),
                };
                QuantumOperator::from_dense(&layout, &full).unwrap()
            };

            // same subsystem
            let lhs = embed(&a_local, Subsystem::CavA)
                .checked_mul(&embed(&b_local, Subsystem::CavA)).unwrap();
            let rhs = embed(&a_local.dot(&b_local), Subsystem::CavA);
            prop_assert!(lhs.checked_sub(&rhs).unwrap().max_abs() < 1e-12);

            // disjoint subsystems: embed(A)·embed(B) = A ⊗ B
            let lhs = embed(&a_local, Subsystem::CavA)
                .checked_mul(&embed(&b_local, Subsystem::CavB)).unwrap();
            let tensor = ndarray::linalg::kron(&a_local, &b_local);
            let rhs = QuantumOperator::from_dense(&layout, &tensor).unwrap();
            prop_assert!(lhs.checked_sub(&rhs).unwrap().max_abs() < 1e-12);
        }
    }
}
