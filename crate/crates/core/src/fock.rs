//! Operators on truncated single-mode and joint two-mode Fock spaces.
//!
//! Joint basis states |n_a, n_b⟩ are indexed row-major over (n_a, n_b):
//! `index = n_a * (cutoff_b + 1) + n_b`. This is the ordering produced by
//! `a ⊗ b` Kronecker products and it fixes the neuron order of every readout.

use core::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Photon-number cutoffs of the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpec {
    cutoff_a: usize,
    cutoff_b: usize,
}

impl FockSpec {
    pub fn new(cutoff_a: usize, cutoff_b: usize) -> Result<Self> {
        if cutoff_a < 1 || cutoff_b < 1 {
            return Err(Error::invalid("Fock cutoffs must be at least 1"));
        }
        Ok(FockSpec { cutoff_a, cutoff_b })
    }

    pub fn cutoff_a(&self) -> usize {
        self.cutoff_a
    }

    pub fn cutoff_b(&self) -> usize {
        self.cutoff_b
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        match mode {
            Mode::A => self.cutoff_a,
            Mode::B => self.cutoff_b,
        }
    }

    pub fn dim_a(&self) -> usize {
        self.cutoff_a + 1
    }

    pub fn dim_b(&self) -> usize {
        self.cutoff_b + 1
    }

    /// Dimension of the joint space.
    pub fn dim(&self) -> usize {
        self.dim_a() * self.dim_b()
    }

    /// Joint index of |n_a, n_b⟩.
    pub fn index(&self, n_a: usize, n_b: usize) -> Result<usize> {
        if n_a > self.cutoff_a || n_b > self.cutoff_b {
            return Err(Error::invalid(alloc::format!(
                "state |{n_a},{n_b}> outside truncation {}/{}",
                self.cutoff_a,
                self.cutoff_b
            )));
        }
        Ok(n_a * self.dim_b() + n_b)
    }

    /// Photon numbers (n_a, n_b) of a joint index.
    pub fn levels(&self, index: usize) -> (usize, usize) {
        (index / self.dim_b(), index % self.dim_b())
    }
}

impl Default for FockSpec {
    /// Seven photons per mode, 64 joint states.
    fn default() -> Self {
        FockSpec {
            cutoff_a: 7,
            cutoff_b: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
}

/// Single-mode annihilation operator with `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(cutoff: usize) -> Result<DMatrix<C64>> {
    if cutoff < 1 {
        return Err(Error::invalid("annihilation cutoff must be at least 1"));
    }
    let dim = cutoff + 1;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new(libm::sqrt(n as f64), 0.0);
    }
    Ok(m)
}

/// Single-mode number operator `a†a`.
pub fn number(cutoff: usize) -> Result<DMatrix<C64>> {
    let a = annihilation(cutoff)?;
    Ok(a.adjoint() * a)
}

/// Dense operator on the joint two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOperator {
    spec: FockSpec,
    matrix: DMatrix<C64>,
}

impl JointOperator {
    pub fn from_matrix(spec: FockSpec, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != spec.dim() || matrix.ncols() != spec.dim() {
            return Err(Error::invalid(alloc::format!(
                "operator is {}x{}, joint dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                spec.dim()
            )));
        }
        Ok(JointOperator { spec, matrix })
    }

    pub fn zeros(spec: FockSpec) -> Self {
        JointOperator {
            spec,
            matrix: DMatrix::zeros(spec.dim(), spec.dim()),
        }
    }

    pub fn identity(spec: FockSpec) -> Self {
        JointOperator {
            spec,
            matrix: DMatrix::identity(spec.dim(), spec.dim()),
        }
    }

    pub fn spec(&self) -> FockSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        JointOperator {
            spec: self.spec,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        JointOperator {
            spec: self.spec,
            matrix: &self.matrix * factor,
        }
    }

    pub fn commutator(&self, other: &JointOperator) -> Self {
        JointOperator {
            spec: self.spec,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }

    /// Largest elementwise |A − A†|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

impl Add for &JointOperator {
    type Output = JointOperator;
    fn add(self, rhs: &JointOperator) -> JointOperator {
        JointOperator {
            spec: self.spec,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &JointOperator {
    type Output = JointOperator;
    fn sub(self, rhs: &JointOperator) -> JointOperator {
        JointOperator {
            spec: self.spec,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &JointOperator {
    type Output = JointOperator;
    fn mul(self, rhs: &JointOperator) -> JointOperator {
        JointOperator {
            spec: self.spec,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Embed a single-mode operator into the joint space: `op ⊗ I_b` for mode a,
/// `I_a ⊗ op` for mode b.
pub fn embed(op: &DMatrix<C64>, mode: Mode, spec: FockSpec) -> Result<JointOperator> {
    let want = spec.cutoff(mode) + 1;
    if op.nrows() != want || op.ncols() != want {
        return Err(Error::invalid(alloc::format!(
            "single-mode operator is {}x{}, mode {:?} needs {want}x{want}",
            op.nrows(),
            op.ncols(),
            mode
        )));
    }
    let matrix = match mode {
        Mode::A => op.kronecker(&DMatrix::identity(spec.dim_b(), spec.dim_b())),
        Mode::B => DMatrix::identity(spec.dim_a(), spec.dim_a()).kronecker(op),
    };
    Ok(JointOperator { spec, matrix })
}

/// Joint annihilation operator of one mode.
pub fn mode_annihilation(mode: Mode, spec: FockSpec) -> Result<JointOperator> {
    embed(&annihilation(spec.cutoff(mode))?, mode, spec)
}

/// Rank-one projector |n_a n_b⟩⟨n_a n_b|.
pub fn projector(n_a: usize, n_b: usize, spec: FockSpec) -> Result<JointOperator> {
    let idx = spec.index(n_a, n_b)?;
    let mut op = JointOperator::zeros(spec);
    op.matrix[(idx, idx)] = C64::new(1.0, 0.0);
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() < 1e-14
    }

    #[test]
    fn annihilation_small_cases() {
        let a = annihilation(1).unwrap();
        assert_eq!(a.shape(), (2, 2));
        assert!(close(a[(0, 1)], 1.0));
        assert!(close(a[(0, 0)], 0.0) && close(a[(1, 0)], 0.0) && close(a[(1, 1)], 0.0));

        let a = annihilation(7).unwrap();
        assert!((a[(1, 2)].re - core::f64::consts::SQRT_2).abs() < 1e-15);

        let mut vac = nalgebra::DVector::<C64>::zeros(8);
        vac[0] = C64::new(1.0, 0.0);
        assert!((a * vac).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_cutoff_is_rejected() {
        assert!(matches!(annihilation(0), Err(Error::InvalidSpecification(_))));
        assert!(FockSpec::new(0, 3).is_err());
    }

    #[test]
    fn truncated_commutator_has_edge_artifact() {
        for c in 1..=9 {
            let a = annihilation(c).unwrap();
            let comm = &a * a.adjoint() - a.adjoint() * &a;
            for i in 0..=c {
                for j in 0..=c {
                    let want = match (i == j, i == c) {
                        (true, false) => 1.0,
                        (true, true) => -(c as f64),
                        _ => 0.0,
                    };
                    // sqrt(n)^2 is exact only up to rounding
                    let err = (comm[(i, j)] - C64::new(want, 0.0)).norm();
                    assert!(err <= 8.0 * f64::EPSILON * c as f64, "c={c} ({i},{j})");
                }
            }
            let n = number(c).unwrap();
            for i in 0..=c {
                assert!((n[(i, i)].re - i as f64).abs() <= 4.0 * f64::EPSILON * i as f64);
            }
        }
    }

    #[test]
    fn embedding_shapes_and_commutation() {
        let spec = FockSpec::default();
        let a = mode_annihilation(Mode::A, spec).unwrap();
        let b = mode_annihilation(Mode::B, spec).unwrap();
        assert_eq!(a.dim(), 64);
        assert!(a.commutator(&b).matrix().iter().all(|z| z.norm() == 0.0));
        assert!(embed(&annihilation(3).unwrap(), Mode::A, spec).is_err());
    }

    #[test]
    fn embedded_number_operator_matches_nested_loops() {
        let spec = FockSpec::new(3, 2).unwrap();
        let a = mode_annihilation(Mode::A, spec).unwrap();
        let b = mode_annihilation(Mode::B, spec).unwrap();
        let na = &a.adjoint() * &a;
        let nb = &b.adjoint() * &b;
        let mut idx = 0;
        for n_a in 0..=3 {
            for n_b in 0..=2 {
                assert!(close(na.matrix()[(idx, idx)], n_a as f64));
                assert!(close(nb.matrix()[(idx, idx)], n_b as f64));
                idx += 1;
            }
        }
        // Off-diagonal entries vanish.
        for i in 0..spec.dim() {
            for j in 0..spec.dim() {
                if i != j {
                    assert!(close(na.matrix()[(i, j)], 0.0));
                }
            }
        }
    }

    #[test]
    fn embedded_spectrum_has_expected_multiplicity() {
        let spec = FockSpec::new(4, 2).unwrap();
        let a = mode_annihilation(Mode::A, spec).unwrap();
        let na = (&a.adjoint() * &a).into_matrix();
        let mut eig: alloc::vec::Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (k, e) in eig.iter().enumerate() {
            assert!((e - (k / 3) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn projectors() {
        let spec = FockSpec::default();
        let p = projector(0, 0, spec).unwrap();
        assert!(close(p.trace(), 1.0));
        assert!(close(p.matrix()[(0, 0)], 1.0));

        let p = projector(3, 3, spec).unwrap();
        assert!(close(p.matrix()[(27, 27)], 1.0));
        assert!(close(p.trace(), 1.0));

        let mut sum = JointOperator::zeros(spec);
        for n_a in 0..=7 {
            for n_b in 0..=7 {
                sum = &sum + &projector(n_a, n_b, spec).unwrap();
            }
        }
        assert_eq!(sum, JointOperator::identity(spec));

        assert!(projector(8, 0, spec).is_err());
        assert!(projector(0, 8, spec).is_err());
    }

    #[test]
    fn index_round_trip() {
        let spec = FockSpec::new(5, 3).unwrap();
        for i in 0..spec.dim() {
            let (na, nb) = spec.levels(i);
            assert_eq!(spec.index(na, nb).unwrap(), i);
        }
    }
}
