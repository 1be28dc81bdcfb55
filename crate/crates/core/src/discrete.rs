//! Finite-difference discretization on the broken grid, dense spectra,
//! nonhomogeneous solves and discrete broken Sobolev norms.
//!
//! Unknowns are ordered left piece first: index `i` is `x = -1 + i h` for
//! `i = 0..=n`, index `n + 1 + i` is `x = i h` on the right piece. The
//! interface carries two unknowns, one for `0-` and one for `0+`.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Factorization, Lu4, C64, ZERO};
use crate::problem::{BrokenFunction, StiffnessCase, TransmissionProblem};
use crate::shooting::{Branch, EigenvalueRecord, Source};

pub const MIN_CELLS: usize = 8;
const MAX_DENSE: usize = 4096;

/// Uniform grid with `n` cells on each piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokenGrid {
    n: usize,
}

impl BrokenGrid {
    pub fn new(n_per_interval: usize) -> Result<Self> {
        if n_per_interval < MIN_CELLS {
            return Err(Error::TooCoarse {
                n: n_per_interval,
                min: MIN_CELLS,
            });
        }
        Ok(BrokenGrid { n: n_per_interval })
    }

    pub fn n_per_interval(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn unknowns(&self) -> usize {
        2 * (self.n + 1)
    }

    /// Coordinate of global unknown `k`.
    pub fn x(&self, k: usize) -> f64 {
        if k <= self.n {
            -1.0 + k as f64 * self.h()
        } else {
            (k - self.n - 1) as f64 * self.h()
        }
    }

    /// Indices of the four condition unknowns: `-1`, `0-`, `0+`, `1`.
    pub fn condition_indices(&self) -> [usize; 4] {
        [0, self.n, self.n + 1, 2 * self.n + 1]
    }

    /// Rows holding `L1, L2, L3, L4`, in that order.
    pub fn condition_rows(&self) -> [usize; 4] {
        [0, 2 * self.n + 1, self.n, self.n + 1]
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (1..self.n).chain(self.n + 2..2 * self.n + 1).collect()
    }

    /// Trapezoid weight of unknown `k` on its own piece.
    pub fn weight(&self, k: usize) -> f64 {
        let h = self.h();
        if k == 0 || k == self.n || k == self.n + 1 || k == 2 * self.n + 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Samples `f` at every unknown.
    pub fn sample(&self, f: impl Fn(f64) -> C64) -> Vec<C64> {
        (0..self.unknowns()).map(|k| f(self.x(k))).collect()
    }

    /// Flattens a function living on this grid.
    pub fn flatten(&self, u: &BrokenFunction) -> Result<Vec<C64>> {
        self.check(u)?;
        Ok(u.left().iter().chain(u.right()).copied().collect())
    }

    /// Builds a function from nodal values; traces use the same one-sided
    /// differences as the condition rows.
    pub fn unflatten(&self, v: &[C64]) -> Result<BrokenFunction> {
        if v.len() != self.unknowns() {
            return Err(Error::InvalidInput(format!(
                "expected {} nodal values, got {}",
                self.unknowns(),
                v.len()
            )));
        }
        BrokenFunction::from_samples(v[..=self.n].to_vec(), v[self.n + 1..].to_vec())
    }

    fn check(&self, u: &BrokenFunction) -> Result<()> {
        if u.left().len() != self.n + 1 || u.right().len() != self.n + 1 {
            return Err(Error::InvalidInput(format!(
                "function sampled with {} + {} points does not match a grid with {} cells per piece",
                u.left().len(),
                u.right().len(),
                self.n
            )));
        }
        Ok(())
    }
}

pub fn build_grid(n_per_interval: usize) -> Result<BrokenGrid> {
    BrokenGrid::new(n_per_interval)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Interior,
    BoundaryLeft,
    BoundaryRight,
    InterfaceMinus,
    InterfacePlus,
}

/// Full discrete operator: interior rows hold `p u'' + A u`, the four
/// condition rows hold `L1..L4`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: Mat<C64>,
    pub row_kinds: Vec<RowKind>,
    pub grid: BrokenGrid,
    local: bool,
}

impl DiscreteOperator {
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        linalg::matvec(self.matrix.as_ref(), u)
    }

    /// True when the operator has no dense kernel part.
    pub fn is_local(&self) -> bool {
        self.local
    }
}

pub fn assemble_operator(problem: &TransmissionProblem, grid: &BrokenGrid) -> DiscreteOperator {
    let n = grid.n;
    let h = grid.h();
    let size = grid.unknowns();
    let c = problem.coefficients();
    let pert = problem.perturbation();
    let mut m = Mat::<C64>::zeros(size, size);
    let mut kinds = vec![RowKind::Interior; size];

    for k in grid.interior_indices() {
        let x = grid.x(k);
        let p = if k < n { c.p1 } else { c.p2 };
        let d2 = p / (h * h);
        m[(k, k - 1)] += C64::from(d2);
        m[(k, k)] += C64::from(-2.0 * d2 + pert.q(x));
        m[(k, k + 1)] += C64::from(d2);
        let cx = pert.c(x);
        if cx != 0.0 {
            m[(k, k - 1)] -= C64::from(cx / (2.0 * h));
            m[(k, k + 1)] += C64::from(cx / (2.0 * h));
        }
        if let crate::problem::PerturbationSpec::IntegralKernel(kern) = pert {
            for j in 0..size {
                m[(k, j)] += C64::from(grid.weight(j) * kern(x, grid.x(j)));
            }
        }
    }

    let d = 1.0 / (2.0 * h);
    let [e0, em, ep, e1] = grid.condition_indices();
    // L1 at x = -1
    kinds[e0] = RowKind::BoundaryLeft;
    m[(e0, 0)] += C64::from(c.alpha0 - 3.0 * c.alpha1 * d);
    m[(e0, 1)] += C64::from(4.0 * c.alpha1 * d);
    m[(e0, 2)] += C64::from(-c.alpha1 * d);
    // L3 at 0-
    kinds[em] = RowKind::InterfaceMinus;
    m[(em, n)] += C64::from(3.0 * d - c.gamma0);
    m[(em, n - 1)] += C64::from(-4.0 * d);
    m[(em, n - 2)] += C64::from(d);
    m[(em, n + 1)] += C64::from(-c.delta0);
    // L4 at 0+
    kinds[ep] = RowKind::InterfacePlus;
    m[(ep, n + 1)] += C64::from(-3.0 * d - c.delta1);
    m[(ep, n + 2)] += C64::from(4.0 * d);
    m[(ep, n + 3)] += C64::from(-d);
    m[(ep, n)] += C64::from(-c.gamma1);
    // L2 at x = 1
    kinds[e1] = RowKind::BoundaryRight;
    m[(e1, e1)] += C64::from(c.beta0 + 3.0 * c.beta1 * d);
    m[(e1, e1 - 1)] += C64::from(-4.0 * c.beta1 * d);
    m[(e1, e1 - 2)] += C64::from(c.beta1 * d);

    DiscreteOperator {
        matrix: m,
        row_kinds: kinds,
        grid: *grid,
        local: pert.is_local(),
    }
}

/// The standard eigenproblem left after eliminating the four condition
/// unknowns: `u_E = T u_I` and `S = M_II + M_IE T`.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    pub s: Mat<C64>,
    pub grid: BrokenGrid,
    interior: Vec<usize>,
    elimination: [Vec<C64>; 4],
    band: Option<(usize, usize)>,
}

impl ReducedOperator {
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let grid = op.grid;
        let interior = grid.interior_indices();
        let cond = grid.condition_indices();
        let ni = interior.len();
        let m = &op.matrix;

        let mut cee = [[ZERO; 4]; 4];
        for (r, &ri) in cond.iter().enumerate() {
            for (c, &ci) in cond.iter().enumerate() {
                cee[r][c] = m[(ri, ci)];
            }
        }
        let lu = Lu4::new(cee);
        if lu.condition(&cee) > 1e12 {
            return Err(Error::EliminationSingular);
        }
        // T = -C_EE^{-1} C_EI, one column per interior unknown.
        let mut elimination: [Vec<C64>; 4] = std::array::from_fn(|_| vec![ZERO; ni]);
        for (j, &gj) in interior.iter().enumerate() {
            let col = [
                m[(cond[0], gj)],
                m[(cond[1], gj)],
                m[(cond[2], gj)],
                m[(cond[3], gj)],
            ];
            if col.iter().all(|z| *z == ZERO) {
                continue;
            }
            let t = lu.solve(col).ok_or(Error::EliminationSingular)?;
            for r in 0..4 {
                elimination[r][j] = -t[r];
            }
        }

        let mut s = Mat::<C64>::from_fn(ni, ni, |i, j| m[(interior[i], interior[j])]);
        for (i, &gi) in interior.iter().enumerate() {
            for (r, &cr) in cond.iter().enumerate() {
                let w = m[(gi, cr)];
                if w == ZERO {
                    continue;
                }
                for j in 0..ni {
                    let t = elimination[r][j];
                    if t != ZERO {
                        s[(i, j)] += w * t;
                    }
                }
            }
        }
        let band = if op.is_local() {
            Some(linalg::bandwidths(s.as_ref(), 0.0))
        } else {
            None
        };
        Ok(ReducedOperator {
            s,
            grid,
            interior,
            elimination,
            band,
        })
    }

    /// Wraps an arbitrary square matrix; only the spectral methods are meaningful.
    #[cfg(test)]
    pub(crate) fn from_matrix(s: Mat<C64>) -> Self {
        let n = s.nrows();
        ReducedOperator {
            s,
            grid: BrokenGrid::new(8).unwrap(),
            interior: (0..n).collect(),
            elimination: std::array::from_fn(|_| vec![ZERO; n]),
            band: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.interior.len()
    }

    pub fn bandwidth(&self) -> Option<(usize, usize)> {
        self.band
    }

    /// Nodal values on the whole grid from interior values.
    pub fn expand(&self, ui: &[C64]) -> Vec<C64> {
        let mut full = vec![ZERO; self.grid.unknowns()];
        for (j, &g) in self.interior.iter().enumerate() {
            full[g] = ui[j];
        }
        for (r, &g) in self.grid.condition_indices().iter().enumerate() {
            full[g] = self.elimination[r].iter().zip(ui).map(|(t, u)| t * u).sum();
        }
        full
    }

    pub fn to_broken(&self, ui: &[C64]) -> Result<BrokenFunction> {
        self.grid.unflatten(&self.expand(ui))
    }

    /// Interior samples of `u`.
    pub fn restrict(&self, u: &BrokenFunction) -> Result<Vec<C64>> {
        let full = self.grid.flatten(u)?;
        Ok(self.interior.iter().map(|&g| full[g]).collect())
    }

    /// Factorization of `z I - S`.
    pub fn factor_shifted(&self, z: C64) -> Factorization {
        let a = Mat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                z - self.s[(i, j)]
            } else {
                -self.s[(i, j)]
            }
        });
        match self.band {
            Some((kl, ku)) => Factorization::with_band(a.as_ref(), kl, ku),
            None => Factorization::new(a.as_ref()),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        eigen_dense(self.s.as_ref())
    }

    /// Relative backward error of `mu` as an eigenvalue, from two steps of
    /// inverse iteration.
    pub fn backward_error(&self, mu: C64) -> f64 {
        let norm_s = frobenius(&self.s).max(1.0);
        let perturbed = mu + C64::new(1e-12, 1e-12) * mu.norm().max(1.0);
        let f = self.factor_shifted(perturbed);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<C64> = (0..self.dim())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for _ in 0..2 {
            f.solve_in_place(&mut v);
            let nv = linalg::norm2(&v);
            if !(nv.is_finite() && nv > 0.0) {
                return 0.0;
            }
            v.iter_mut().for_each(|z| *z /= nv);
        }
        let sv = linalg::matvec(self.s.as_ref(), &v);
        let r: Vec<C64> = sv.iter().zip(&v).map(|(a, b)| a - mu * b).collect();
        linalg::norm2(&r) / norm_s
    }
}

fn frobenius(m: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// All eigenvalues of a square matrix; matrices with zero imaginary parts
/// go through the real solver.
pub fn eigen_dense(m: faer::MatRef<'_, C64>) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    if m.nrows() > MAX_DENSE {
        return Err(Error::PreconditionViolated(format!(
            "dense eigensolve limited to size {MAX_DENSE}, got {}",
            m.nrows()
        )));
    }
    if linalg::is_real(m) {
        linalg::eigenvalues_real(m)
    } else {
        linalg::eigenvalues(m)
    }
}

/// Every eigenvalue of the discretization, sorted by modulus.
pub fn full_discrete_spectrum(
    problem: &TransmissionProblem,
    grid: &BrokenGrid,
) -> Result<Vec<C64>> {
    let op = assemble_operator(problem, grid);
    let red = ReducedOperator::new(&op)?;
    let mut ev = red.eigenvalues()?;
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(ev)
}

/// The `count` eigenvalues of smallest modulus. When the stiffness signs
/// differ the count applies to each half-plane separately, so both
/// asymptotic branches are represented.
pub fn discrete_spectrum(
    problem: &TransmissionProblem,
    grid: &BrokenGrid,
    count: usize,
) -> Result<Vec<EigenvalueRecord>> {
    if count > grid.n / 4 {
        return Err(Error::PreconditionViolated(format!(
            "count {count} exceeds n_per_interval / 4 = {}",
            grid.n / 4
        )));
    }
    let op = assemble_operator(problem, grid);
    let red = ReducedOperator::new(&op)?;
    let mut ev = red.eigenvalues()?;
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let chosen: Vec<C64> = match problem.case() {
        StiffnessCase::SameSign => ev.into_iter().take(count).collect(),
        StiffnessCase::OppositeSigns => {
            let right = ev.iter().filter(|z| z.re >= 0.0).take(count);
            let left = ev.iter().filter(|z| z.re < 0.0).take(count);
            let mut v: Vec<C64> = right.chain(left).copied().collect();
            v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            v
        }
    };
    Ok(chosen
        .into_iter()
        .map(|value| EigenvalueRecord {
            value,
            multiplicity: 1,
            branch: Branch::Single,
            source: Source::Matrix,
            residual: if red.band.is_some() {
                red.backward_error(value)
            } else {
                f64::NAN
            },
        })
        .collect())
}

/// Solves `p u'' + A u - lambda u = f` in the interior with `L_v u = f_v`.
pub fn solve_nonhomogeneous(
    problem: &TransmissionProblem,
    grid: &BrokenGrid,
    lambda: C64,
    f: &BrokenFunction,
    fv: [C64; 4],
) -> Result<BrokenFunction> {
    let op = assemble_operator(problem, grid);
    let size = grid.unknowns();
    let mut a = op.matrix.clone();
    for k in grid.interior_indices() {
        a[(k, k)] -= lambda;
    }
    let fl = grid.flatten(f)?;
    let mut rhs = vec![ZERO; size];
    for k in grid.interior_indices() {
        rhs[k] = fl[k];
    }
    for (g, v) in grid.condition_rows().into_iter().zip(fv) {
        rhs[g] = v;
    }
    let fact = if op.is_local() {
        let (kl, ku) = linalg::bandwidths(a.as_ref(), 0.0);
        Factorization::with_band(a.as_ref(), kl, ku)
    } else {
        Factorization::new(a.as_ref())
    };

    // Distance estimate from a random interior probe: |B x| / |x| with
    // (M - lambda B) x = B r.
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
    let mut probe = vec![ZERO; size];
    for k in grid.interior_indices() {
        probe[k] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let pn = linalg::norm2(&probe);
    fact.solve_in_place(&mut probe);
    let xn: f64 = grid
        .interior_indices()
        .iter()
        .map(|&k| probe[k].norm_sqr())
        .sum::<f64>()
        .sqrt();
    let distance = if xn.is_finite() && xn > 0.0 {
        pn / xn
    } else {
        0.0
    };
    if distance < 1e-6 {
        return Err(Error::NearSingular { distance });
    }

    let mut u = fact.solve(&rhs);
    // One step of iterative refinement.
    let r: Vec<C64> = linalg::matvec(a.as_ref(), &u)
        .iter()
        .zip(&rhs)
        .map(|(x, y)| y - x)
        .collect();
    let du = fact.solve(&r);
    for (x, d) in u.iter_mut().zip(du) {
        *x += d;
    }
    if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NearSingular { distance: 0.0 });
    }
    grid.unflatten(&u)
}

/// Residual `|(M - lambda B) u - rhs| / |rhs|` of a nonhomogeneous solve.
pub fn nonhomogeneous_residual(
    problem: &TransmissionProblem,
    grid: &BrokenGrid,
    lambda: C64,
    u: &BrokenFunction,
    f: &BrokenFunction,
    fv: [C64; 4],
) -> Result<f64> {
    let op = assemble_operator(problem, grid);
    let ul = grid.flatten(u)?;
    let fl = grid.flatten(f)?;
    let mut mu = op.apply(&ul);
    let mut rhs = vec![ZERO; grid.unknowns()];
    for k in grid.interior_indices() {
        mu[k] -= lambda * ul[k];
        rhs[k] = fl[k];
    }
    for (g, v) in grid.condition_rows().into_iter().zip(fv) {
        rhs[g] = v;
    }
    let diff: Vec<C64> = mu.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(linalg::norm2(&diff) / linalg::norm2(&rhs).max(1e-300))
}

fn piece_norm_sq(v: &[C64], h: f64, order: usize) -> f64 {
    let n = v.len();
    let mut s: f64 = v
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            w * z.norm_sqr()
        })
        .sum::<f64>()
        * h;
    if order >= 1 {
        s += v
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h).norm_sqr())
            .sum::<f64>()
            * h;
    }
    if order >= 2 {
        s += v
            .windows(3)
            .map(|w| ((w[0] - 2.0 * w[1] + w[2]) / (h * h)).norm_sqr())
            .sum::<f64>()
            * h;
    }
    s
}

/// Discrete `W^k` norm on `[-1, 0] + [0, 1]`, `k` in `{0, 1, 2}`.
pub fn broken_sobolev_norm(u: &BrokenFunction, grid: &BrokenGrid, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    grid.check(u)?;
    let h = grid.h();
    Ok((piece_norm_sq(u.left(), h, order) + piece_norm_sq(u.right(), h, order)).sqrt())
}

/// Discrete `W^k` norm for a function on its own grid.
pub fn sobolev_norm(u: &BrokenFunction, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok((piece_norm_sq(u.left(), u.left_step(), order)
        + piece_norm_sq(u.right(), u.right_step(), order))
    .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::problem::{validate_problem, Coefficients, PerturbationSpec};
    use std::f64::consts::PI;

    fn decoupled() -> TransmissionProblem {
        validate_problem(Coefficients::dirichlet(1.0, 1.0), PerturbationSpec::Zero).unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(build_grid(8).unwrap().unknowns(), 18);
        assert!((build_grid(1000).unwrap().h() - 1e-3).abs() < 1e-18);
        assert!(matches!(
            build_grid(4),
            Err(Error::TooCoarse { n: 4, min: 8 })
        ));
    }

    #[test]
    fn interior_stencil_and_shift() {
        let g = build_grid(8).unwrap();
        let op = assemble_operator(&decoupled(), &g);
        let h2 = 64.0;
        assert_eq!(op.matrix[(3, 2)], C64::from(h2));
        assert_eq!(op.matrix[(3, 3)], C64::from(-2.0 * h2));
        assert_eq!(op.matrix[(3, 4)], C64::from(h2));
        assert_eq!(
            op.row_kinds
                .iter()
                .filter(|k| **k != RowKind::Interior)
                .count(),
            4
        );
        let q = decoupled()
            .with_perturbation(PerturbationSpec::multiplication(|_| 5.0))
            .unwrap();
        let opq = assemble_operator(&q, &g);
        for k in g.interior_indices() {
            assert_eq!(opq.matrix[(k, k)] - op.matrix[(k, k)], C64::from(5.0));
        }
    }

    #[test]
    fn constant_kernel_weights_sum_to_two() {
        let g = build_grid(16).unwrap();
        let p = decoupled()
            .with_perturbation(PerturbationSpec::integral_kernel(|_, _| 1.0))
            .unwrap();
        let a = assemble_operator(&p, &g);
        let b = assemble_operator(&decoupled(), &g);
        for k in g.interior_indices() {
            let s: C64 = (0..g.unknowns())
                .map(|j| a.matrix[(k, j)] - b.matrix[(k, j)])
                .sum();
            assert!((s - C64::from(2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn interior_rows_are_second_order() {
        let err = |n: usize| {
            let g = build_grid(n).unwrap();
            let p = validate_problem(Coefficients::dirichlet(-1.0, 2.0), PerturbationSpec::Zero)
                .unwrap();
            let op = assemble_operator(&p, &g);
            let u = g.sample(|x| C64::from((2.0 * x).sin()));
            let mu = op.apply(&u);
            g.interior_indices()
                .iter()
                .map(|&k| {
                    let x = g.x(k);
                    let pk = if k <= n { -1.0 } else { 2.0 };
                    (mu[k] - C64::from(-4.0 * pk * (2.0 * x).sin())).norm()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn eigen_dense_small_cases() {
        let sorted = |m: Mat<C64>| {
            let mut e = eigen_dense(m.as_ref()).unwrap();
            e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            e
        };
        let c = |x: f64| C64::from(x);
        let swap = Mat::from_fn(2, 2, |i, j| if i != j { c(1.0) } else { c(0.0) });
        let e = sorted(swap);
        assert!((e[0] + ONE).norm() < 1e-14 && (e[1] - ONE).norm() < 1e-14);
        let rot = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(-1.0),
            (1, 0) => c(1.0),
            _ => c(0.0),
        });
        let e = sorted(rot);
        assert!((e[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((e[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
        let companion = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(3.0),
            (0, 1) => c(-2.0),
            (1, 0) => c(1.0),
            _ => c(0.0),
        });
        let e = sorted(companion);
        assert!((e[0] - c(1.0)).norm() < 1e-13 && (e[1] - c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn decoupled_first_eigenvalue() {
        let g = build_grid(1000).unwrap();
        let ev = discrete_spectrum(&decoupled(), &g, 3).unwrap();
        let exact = -PI * PI / 4.0;
        assert!((ev[0].value.re - exact).abs() <= 1e-4 * exact.abs());
        assert!(ev.iter().all(|e| e.source == Source::Matrix));
        assert!(ev.iter().all(|e| e.residual <= 1e-10), "{ev:?}");
    }

    #[test]
    fn eigenvalue_error_is_second_order() {
        let exact: Vec<f64> = (1..=3).map(|k| -((k as f64 - 0.5) * PI).powi(2)).collect();
        let errs = |n: usize| {
            let ev = full_discrete_spectrum(&decoupled(), &build_grid(n).unwrap()).unwrap();
            // Double eigenvalues: compare every other one.
            (0..3)
                .map(|k| (ev[2 * k].re - exact[k]).abs())
                .collect::<Vec<_>>()
        };
        let a = errs(50);
        let b = errs(100);
        for k in 0..3 {
            let r = a[k] / b[k];
            assert!((3.0..=5.0).contains(&r), "eigenvalue {k}: ratio {r}");
        }
    }

    #[test]
    fn count_guard() {
        let g = build_grid(40).unwrap();
        assert!(matches!(
            discrete_spectrum(&decoupled(), &g, 11),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn reduced_operator_is_narrow_banded() {
        let g = build_grid(64).unwrap();
        let op = assemble_operator(&decoupled(), &g);
        let red = ReducedOperator::new(&op).unwrap();
        let (kl, ku) = red.bandwidth().unwrap();
        assert!(kl <= 3 && ku <= 3, "{kl} {ku}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = build_grid(32).unwrap();
        let f = BrokenFunction::zeros(32).unwrap();
        let u = solve_nonhomogeneous(&decoupled(), &g, C64::new(1.0, 2.0), &f, [ZERO; 4]).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let c = Coefficients {
            p1: -1.0,
            p2: 2.0,
            alpha0: 1.0,
            alpha1: 0.5,
            beta0: 1.0,
            beta1: -0.3,
            gamma0: 0.2,
            delta0: 1.0,
            gamma1: -0.5,
            delta1: 0.1,
        };
        let p = validate_problem(c, PerturbationSpec::multiplication(|x| (PI * x).cos())).unwrap();
        let lam = C64::new(0.5, 3.0);
        let err = |n: usize| {
            let g = build_grid(n).unwrap();
            // w = exp(x) on the left, cos(2x) on the right.
            let w = BrokenFunction::sample(
                n,
                |x| (C64::from(x.exp()), C64::from(x.exp())),
                |x| {
                    (
                        C64::from((2.0 * x).cos()),
                        C64::from(-2.0 * (2.0 * x).sin()),
                    )
                },
            )
            .unwrap();
            let f = BrokenFunction::sample(
                n,
                |x| {
                    (
                        C64::from(-x.exp() + (PI * x).cos() * x.exp()) - lam * x.exp(),
                        ZERO,
                    )
                },
                |x| {
                    let v = (2.0 * x).cos();
                    (C64::from(-8.0 * v + (PI * x).cos() * v) - lam * v, ZERO)
                },
            )
            .unwrap();
            let e = (-1.0f64).exp();
            let fv = [
                C64::from(e + 0.5 * e),
                C64::from(2f64.cos() - 0.3 * (-2.0 * 2f64.sin())),
                C64::from(1.0 - 0.2 - 1.0),
                C64::from(0.0 + 0.5 - 0.1),
            ];
            let u = solve_nonhomogeneous(&p, &g, lam, &f, fv).unwrap();
            assert!(nonhomogeneous_residual(&p, &g, lam, &u, &f, fv).unwrap() <= 1e-9);
            u.left()
                .iter()
                .zip(w.left())
                .chain(u.right().iter().zip(w.right()))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() <= 1.2, "{ratio} {e1} {e2}");
    }

    #[test]
    fn near_spectrum_is_rejected() {
        let g = build_grid(64).unwrap();
        let ev = full_discrete_spectrum(&decoupled(), &g).unwrap();
        let f = BrokenFunction::sample(64, |_| (ONE, ZERO), |_| (ONE, ZERO)).unwrap();
        let r = solve_nonhomogeneous(&decoupled(), &g, ev[0], &f, [ZERO; 4]);
        assert!(matches!(r, Err(Error::NearSingular { .. })), "{r:?}");
    }

    #[test]
    fn sobolev_norms() {
        let g = build_grid(1000).unwrap();
        let one = BrokenFunction::sample(1000, |_| (ONE, ZERO), |_| (ONE, ZERO)).unwrap();
        assert!((broken_sobolev_norm(&one, &g, 0).unwrap() - 2f64.sqrt()).abs() < 1e-10);
        let s = |x: f64| (C64::from((PI * x).sin()), C64::from(PI * (PI * x).cos()));
        let u = BrokenFunction::sample(1000, s, s).unwrap();
        let n0 = broken_sobolev_norm(&u, &g, 0).unwrap();
        let n1 = broken_sobolev_norm(&u, &g, 1).unwrap();
        let n2 = broken_sobolev_norm(&u, &g, 2).unwrap();
        assert!((n0 - 1.0).abs() < 1e-3);
        assert!((n1 - (1.0 + PI * PI).sqrt()).abs() < 1e-3);
        assert!(n0 <= n1 && n1 <= n2);
        assert!(matches!(
            broken_sobolev_norm(&u, &g, 3),
            Err(Error::UnsupportedOrder(3))
        ));
    }
}
