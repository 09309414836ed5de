//! Fixed-step RK4 integration of the Lindblad master equation
//!
//!   dρ/dt = −i[H, ρ] + Σ_k (C_k ρ C_k† − ½ C_k†C_k ρ − ½ ρ C_k†C_k)
//!
//! for Hamiltonians that are constant over a segment. Rates are angular
//! frequencies (rad/s), times are seconds.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{FockSpec, JointOperator};
use crate::C64;

/// Largest elementwise |H − H†| accepted for a Hamiltonian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Trace drift over one segment that is reported as divergence.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Most negative eigenvalue tolerated at segment end.
pub const POSITIVITY_LIMIT: f64 = 1e-6;
/// Upper bound on `dt * max_rate`.
pub const STEP_RATE_LIMIT: f64 = 0.05;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Hermitian, unit-trace, positive semidefinite state of the joint system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    spec: FockSpec,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn vacuum(spec: FockSpec) -> Self {
        let mut matrix = DMatrix::zeros(spec.dim(), spec.dim());
        matrix[(0, 0)] = C64::new(1.0, 0.0);
        DensityMatrix { spec, matrix }
    }

    /// Pure Fock state |n_a, n_b⟩⟨n_a, n_b|.
    pub fn fock(n_a: usize, n_b: usize, spec: FockSpec) -> Result<Self> {
        let idx = spec.index(n_a, n_b)?;
        let mut matrix = DMatrix::zeros(spec.dim(), spec.dim());
        matrix[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(DensityMatrix { spec, matrix })
    }

    /// Validate and wrap a matrix: Hermitian within 1e-10, trace within 1e-8
    /// of one, minimum eigenvalue at least −1e-8.
    pub fn from_matrix(spec: FockSpec, matrix: DMatrix<C64>) -> Result<Self> {
        let op = JointOperator::from_matrix(spec, matrix)?;
        if op.hermiticity_error() > 1e-10 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let rho = DensityMatrix {
            spec,
            matrix: op.into_matrix(),
        };
        if (rho.trace() - 1.0).abs() > 1e-8 {
            return Err(Error::invalid("density matrix trace differs from 1"));
        }
        if rho.min_eigenvalue() < -1e-8 {
            return Err(Error::invalid("density matrix is not positive semidefinite"));
        }
        Ok(rho)
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

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// ⟨n_a n_b|ρ|n_a n_b⟩.
    pub fn population(&self, n_a: usize, n_b: usize) -> Result<f64> {
        let i = self.spec.index(n_a, n_b)?;
        Ok(self.matrix[(i, i)].re)
    }

    /// All diagonal populations in joint-index order.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// trace(ρ A).
    pub fn expectation(&self, op: &JointOperator) -> C64 {
        let n = self.dim();
        let a = op.matrix();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.matrix[(i, k)] * a[(k, i)];
            }
        }
        acc
    }

    fn check_positive(&self, limit: f64) -> Result<()> {
        let shifted = &self.matrix + DMatrix::<C64>::identity(self.dim(), self.dim()) * C64::new(limit, 0.0);
        match shifted.cholesky() {
            Some(_) => Ok(()),
            None => Err(Error::PositivityViolation { limit: -limit }),
        }
    }
}

/// Hamiltonian, collapse operators and integrator step for one segment.
#[derive(Debug, Clone)]
pub struct LindbladProblem {
    hamiltonian: JointOperator,
    collapse_ops: Vec<JointOperator>,
    dt: f64,
    kernel: Kernel,
}

impl LindbladProblem {
    pub fn new(hamiltonian: JointOperator, collapse_ops: Vec<JointOperator>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("integrator step must be positive"));
        }
        if hamiltonian.hermiticity_error() > HERMITIAN_TOLERANCE {
            return Err(Error::invalid("Hamiltonian is not Hermitian"));
        }
        let spec = hamiltonian.spec();
        if collapse_ops.iter().any(|c| c.spec() != spec) {
            return Err(Error::invalid("collapse operator lives on a different Fock space"));
        }
        let kernel = Kernel::new(&hamiltonian, &collapse_ops);
        Ok(LindbladProblem {
            hamiltonian,
            collapse_ops,
            dt,
            kernel,
        })
    }

    /// Stability guard: reject steps with `dt * max_rate > 0.05`.
    pub fn check_step(&self, max_rate: f64) -> Result<()> {
        if self.dt * max_rate > STEP_RATE_LIMIT {
            return Err(Error::invalid(alloc::format!(
                "dt * max_rate = {:.3} exceeds {STEP_RATE_LIMIT}",
                self.dt * max_rate
            )));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> &JointOperator {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[JointOperator] {
        &self.collapse_ops
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spec(&self) -> FockSpec {
        self.hamiltonian.spec()
    }
}

/// dρ/dt evaluated with dense products. Accepts any matrix, Hermitian or not.
pub fn lindblad_rhs(problem: &LindbladProblem, rho: &DensityMatrix) -> Result<DMatrix<C64>> {
    if rho.spec() != problem.spec() {
        return Err(Error::invalid("density matrix and problem dimensions differ"));
    }
    Ok(dense_rhs(problem, rho.matrix()))
}

pub(crate) fn dense_rhs(problem: &LindbladProblem, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let h = problem.hamiltonian.matrix();
    let mi = C64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h) * mi;
    for c in &problem.collapse_ops {
        let c = c.matrix();
        let cd = c.adjoint();
        let cdc = &cd * c;
        out += c * rho * &cd - (&cdc * rho + rho * &cdc) * C64::new(0.5, 0.0);
    }
    out
}

/// Advance `rho` by `duration` seconds with classical RK4 at the problem's
/// step. The last step is shortened so the segment ends exactly at
/// `duration`. The state is re-Hermitized after every step.
pub fn evolve_segment(problem: &LindbladProblem, rho: &DensityMatrix, duration: f64) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    evolve_in_place(problem, &mut out, duration)?;
    Ok(out)
}

pub(crate) fn evolve_in_place(problem: &LindbladProblem, rho: &mut DensityMatrix, duration: f64) -> Result<()> {
    if rho.spec() != problem.spec() {
        return Err(Error::invalid("density matrix and problem dimensions differ"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::invalid("segment duration must be non-negative"));
    }
    if duration == 0.0 {
        return Ok(());
    }
    let trace_in = rho.trace();
    let dt = problem.dt;
    let full = libm::floor(duration / dt * (1.0 + 1e-12)) as usize;
    let rest = duration - full as f64 * dt;

    let n = rho.dim();
    let mut state = Split::zeros(n * n);
    state.load(rho.matrix.as_slice());
    let mut ws = Workspace::new(n);
    for _ in 0..full {
        problem.kernel.rk4_step(&mut state, dt, &mut ws);
    }
    if rest > dt * 1e-9 {
        problem.kernel.rk4_step(&mut state, rest, &mut ws);
    }
    state.store(rho.matrix.as_mut_slice());

    let drift = (rho.trace() - trace_in).abs();
    if !(drift <= TRACE_DRIFT_LIMIT) {
        return Err(Error::IntegratorDivergence {
            drift,
            limit: TRACE_DRIFT_LIMIT,
        });
    }
    rho.check_positive(POSITIVITY_LIMIT)
}

/// Complex buffer with separate real and imaginary parts, so the band loops
/// vectorize.
#[derive(Debug, Clone)]
struct Split {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Split {
    fn zeros(len: usize) -> Self {
        Split {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    #[cfg(test)]
    fn from_complex(z: &[C64]) -> Self {
        let mut s = Split::zeros(z.len());
        s.load(z);
        s
    }

    fn load(&mut self, z: &[C64]) {
        for ((r, i), v) in self.re.iter_mut().zip(self.im.iter_mut()).zip(z) {
            *r = v.re;
            *i = v.im;
        }
    }

    fn store(&self, z: &mut [C64]) {
        for ((r, i), v) in self.re.iter().zip(&self.im).zip(z.iter_mut()) {
            *v = C64::new(*r, *i);
        }
    }

    fn clear(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }
}

/// A matrix stored by its nonzero diagonals: entry (i, i + offset) is
/// `coeffs[i - lo]` for `i` in `lo..hi`.
#[derive(Debug, Clone)]
struct Band {
    offset: isize,
    lo: usize,
    hi: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Banded {
    dim: usize,
    bands: Vec<Band>,
}

impl Banded {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut bands = Vec::new();
        for offset in -(n as isize - 1)..(n as isize) {
            let lo = if offset < 0 { (-offset) as usize } else { 0 };
            let hi = if offset > 0 { n - offset as usize } else { n };
            let coeffs: Vec<C64> = (lo..hi).map(|i| m[(i, (i as isize + offset) as usize)]).collect();
            if coeffs.iter().any(|z| *z != ZERO) {
                bands.push(Band {
                    offset,
                    lo,
                    hi,
                    re: coeffs.iter().map(|z| z.re).collect(),
                    im: coeffs.iter().map(|z| z.im).collect(),
                });
            }
        }
        Banded { dim: n, bands }
    }

    /// out += A x, column-major `dim × dim` buffers.
    fn mul_acc(&self, x: &Split, out: &mut Split) {
        let n = self.dim;
        for j in 0..n {
            let col = j * n;
            for b in &self.bands {
                let len = b.hi - b.lo;
                let src = (col as isize + b.lo as isize + b.offset) as usize;
                let dst = col + b.lo;
                cmac(
                    &b.re[..len],
                    &b.im[..len],
                    &x.re[src..src + len],
                    &x.im[src..src + len],
                    &mut out.re[dst..dst + len],
                    &mut out.im[dst..dst + len],
                );
            }
        }
    }

    /// out += x A†.
    fn mul_adjoint_right_acc(&self, x: &Split, out: &mut Split) {
        let n = self.dim;
        for b in &self.bands {
            for (k, j) in (b.lo..b.hi).enumerate() {
                // conj(c)
                let (cr, ci) = (b.re[k], -b.im[k]);
                let src = (j as isize + b.offset) as usize * n;
                let dst = j * n;
                let (xr, xi) = (&x.re[src..src + n], &x.im[src..src + n]);
                let (or, oi) = (&mut out.re[dst..dst + n], &mut out.im[dst..dst + n]);
                for i in 0..n {
                    or[i] += cr * xr[i] - ci * xi[i];
                    oi[i] += cr * xi[i] + ci * xr[i];
                }
            }
        }
    }
}

/// o += c · x elementwise on split complex slices of equal length.
#[inline(always)]
fn cmac(cr: &[f64], ci: &[f64], xr: &[f64], xi: &[f64], or: &mut [f64], oi: &mut [f64]) {
    let len = or.len();
    let (cr, ci, xr, xi, oi) = (&cr[..len], &ci[..len], &xr[..len], &xi[..len], &mut oi[..len]);
    for k in 0..len {
        or[k] += cr[k] * xr[k] - ci[k] * xi[k];
        oi[k] += cr[k] * xi[k] + ci[k] * xr[k];
    }
}

/// Precomputed right-hand side. With G = −iH − ½ Σ C†C and Hermitian ρ,
/// dρ/dt = Gρ + (Gρ)† + Σ CρC†.
#[derive(Debug, Clone)]
struct Kernel {
    dim: usize,
    generator: Banded,
    collapse: Vec<Banded>,
}

struct Workspace {
    k: [Split; 4],
    stage: Split,
    x: Split,
    y: Split,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let n = dim * dim;
        Workspace {
            k: [Split::zeros(n), Split::zeros(n), Split::zeros(n), Split::zeros(n)],
            stage: Split::zeros(n),
            x: Split::zeros(n),
            y: Split::zeros(n),
        }
    }
}

impl Kernel {
    fn new(h: &JointOperator, collapse: &[JointOperator]) -> Self {
        let dim = h.dim();
        let mut g = h.matrix() * C64::new(0.0, -1.0);
        for c in collapse {
            g -= c.matrix().adjoint() * c.matrix() * C64::new(0.5, 0.0);
        }
        Kernel {
            dim,
            generator: Banded::from_dense(&g),
            collapse: collapse.iter().map(|c| Banded::from_dense(c.matrix())).collect(),
        }
    }

    fn rhs(&self, rho: &Split, out: &mut Split, x: &mut Split, y: &mut Split) {
        let n = self.dim;
        x.clear();
        out.clear();
        self.generator.mul_acc(rho, x);
        for c in &self.collapse {
            y.clear();
            c.mul_acc(rho, y);
            c.mul_adjoint_right_acc(y, out);
        }
        // out += x + x†, in tiles so both sides stay cached
        const TILE: usize = 8;
        for jb in (0..n).step_by(TILE) {
            for ib in (0..n).step_by(TILE) {
                for j in jb..(jb + TILE).min(n) {
                    for i in ib..(ib + TILE).min(n) {
                        let (u, l) = (j * n + i, i * n + j);
                        out.re[u] += x.re[u] + x.re[l];
                        out.im[u] += x.im[u] - x.im[l];
                    }
                }
            }
        }
    }

    fn rk4_step(&self, rho: &mut Split, h: f64, ws: &mut Workspace) {
        let Workspace { k, stage, x, y } = ws;
        let [k1, k2, k3, k4] = k;
        self.rhs(rho, k1, x, y);
        axpy_into(stage, rho, 0.5 * h, k1);
        self.rhs(stage, k2, x, y);
        axpy_into(stage, rho, 0.5 * h, k2);
        self.rhs(stage, k3, x, y);
        axpy_into(stage, rho, h, k3);
        self.rhs(stage, k4, x, y);
        let w = h / 6.0;
        for (part, (a, b, c, d)) in [
            (&mut rho.re, (&k1.re, &k2.re, &k3.re, &k4.re)),
            (&mut rho.im, (&k1.im, &k2.im, &k3.im, &k4.im)),
        ] {
            for ((p, (a, b)), (c, d)) in part.iter_mut().zip(a.iter().zip(b)).zip(c.iter().zip(d)) {
                *p += (a + 2.0 * (b + c) + d) * w;
            }
        }
        hermitize(rho, self.dim);
    }
}

fn axpy_into(out: &mut Split, base: &Split, h: f64, k: &Split) {
    for ((o, b), v) in out.re.iter_mut().zip(&base.re).zip(&k.re) {
        *o = b + v * h;
    }
    for ((o, b), v) in out.im.iter_mut().zip(&base.im).zip(&k.im) {
        *o = b + v * h;
    }
}

fn hermitize(rho: &mut Split, n: usize) {
    for j in 0..n {
        rho.im[j * n + j] = 0.0;
        for i in 0..j {
            let (u, l) = (j * n + i, i * n + j);
            let re = 0.5 * (rho.re[u] + rho.re[l]);
            let im = 0.5 * (rho.im[u] - rho.im[l]);
            rho.re[u] = re;
            rho.im[u] = im;
            rho.re[l] = re;
            rho.im[l] = -im;
        }
    }
}
