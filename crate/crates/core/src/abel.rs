//! Spectral projectors from resolvent contour integrals and Abel-regularized
//! root-function expansions.
//!
//! A projector is never formed densely. Its range is captured from a random
//! sketch `P Omega` and its corange from adjoint resolvent solves, so that
//! `P = Q W^*` with `Q` orthonormal. For the banded reduced operator each
//! projector costs a few hundred `O(n)` solves.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::{assemble_operator, BrokenGrid, ReducedOperator};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::problem::{BrokenFunction, TransmissionProblem};

/// Order of the perturbation's subordination and the decay exponent used to
/// validate Abel orders.
pub const SUBORDINATION_ORDER: f64 = 0.5;
pub const SECTOR_EXPONENT: f64 = 0.5;

/// `max{s - p + 1, 0}`.
pub fn min_abel_order(s: f64, p: f64) -> f64 {
    (s - p + 1.0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelSettings {
    pub alpha: f64,
    pub theta: f64,
}

impl Default for AbelSettings {
    fn default() -> Self {
        AbelSettings {
            alpha: 1.5,
            theta: PI / 4.0,
        }
    }
}

impl AbelSettings {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        let s = AbelSettings { alpha, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let floor = min_abel_order(SUBORDINATION_ORDER, SECTOR_EXPONENT);
        if !(self.alpha > floor) {
            return Err(Error::PreconditionViolated(format!(
                "Abel order {} must exceed {floor}",
                self.alpha
            )));
        }
        if !(self.theta > 0.0 && self.theta < PI / 2.0) {
            return Err(Error::PreconditionViolated(format!(
                "sector half-angle {} must lie in (0, pi/2)",
                self.theta
            )));
        }
        if !(self.alpha < PI / (2.0 * self.theta)) {
            return Err(Error::PreconditionViolated(format!(
                "Abel order {} must stay below pi / (2 theta) = {}",
                self.alpha,
                PI / (2.0 * self.theta)
            )));
        }
        Ok(())
    }
}

/// `exp(-lambda^alpha t)` inside the sector `|arg lambda| < theta`, the same
/// with `-lambda` inside the mirrored sector around the negative axis, and 1
/// elsewhere. Powers use the principal branch.
pub fn abel_weight(lambda: C64, alpha: f64, t: f64, theta: f64) -> C64 {
    let damp = |z: C64| {
        let power = C64::from_polar(z.norm().powf(alpha), alpha * z.arg());
        (-power * t).exp()
    };
    if lambda == ZERO || lambda.arg().abs() < theta {
        damp(lambda)
    } else if (-lambda).arg().abs() < theta {
        damp(-lambda)
    } else {
        C64::from(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSettings {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Relative change of the sketch between `N` and `2N` nodes.
    pub tolerance: f64,
    /// Columns of the random sketch; bounds the detectable multiplicity.
    pub sketch: usize,
    pub seed: u64,
}

impl Default for ContourSettings {
    fn default() -> Self {
        ContourSettings {
            initial_nodes: 32,
            max_nodes: 1024,
            tolerance: 1e-6,
            sketch: 8,
            seed: 0xab31,
        }
    }
}

/// Projector `P = (1/2 pi i) oint (z I - S)^{-1} dz` around one eigenvalue,
/// stored as `Q W^*`.
#[derive(Debug, Clone)]
pub struct ProjectorRecord {
    pub eigenvalue: C64,
    pub radius: f64,
    /// Numerical rank, the algebraic multiplicity inside the circle.
    pub rank: usize,
    /// Quadrature nodes at convergence.
    pub nodes: usize,
    /// `||P^2 - P||_F / ||P||_F`.
    pub idempotence_defect: f64,
    range: Mat<C64>,
    corange: Mat<C64>,
}

impl ProjectorRecord {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let r = self.rank;
        let n = self.range.nrows();
        let mut y = vec![ZERO; n];
        for k in 0..r {
            let c: C64 = (0..n).map(|i| self.corange[(i, k)].conj() * x[i]).sum();
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += self.range[(i, k)] * c;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.range.nrows();
        Mat::from_fn(n, n, |i, j| {
            (0..self.rank)
                .map(|k| self.range[(i, k)] * self.corange[(j, k)].conj())
                .sum()
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        gram(&self.corange, &self.corange)
            .iter()
            .enumerate()
            .map(|(k, row)| row[k].re)
            .sum::<f64>()
            .sqrt()
    }

    /// `||P_self P_other||_F`.
    pub fn product_norm(&self, other: &ProjectorRecord) -> f64 {
        // Q1 (W1^* Q2) W2^*, and Q1 has orthonormal columns.
        let m = gram(&self.corange, &other.range);
        let g = gram(&other.corange, &other.corange);
        frobenius_of_mw(&m, &g)
    }
}

/// `A^* B` for tall matrices, as nested rows.
fn gram(a: &Mat<C64>, b: &Mat<C64>) -> Vec<Vec<C64>> {
    (0..a.ncols())
        .map(|i| {
            (0..b.ncols())
                .map(|j| (0..a.nrows()).map(|k| a[(k, i)].conj() * b[(k, j)]).sum())
                .collect()
        })
        .collect()
}

/// `||M W^*||_F` from `M` and `G = W^* W`, as `sqrt(tr(M G M^*))`.
fn frobenius_of_mw(m: &[Vec<C64>], g: &[Vec<C64>]) -> f64 {
    let mut s = ZERO;
    for row in m {
        for (a, ga) in g.iter().enumerate() {
            for (b, gab) in ga.iter().enumerate() {
                s += row[a] * gab * row[b].conj();
            }
        }
    }
    s.re.max(0.0).sqrt()
}

/// Half the distance from `lambda` to the nearest distinct member of the
/// spectrum, capped at 1. Members within `1e-8 max(1, |lambda|)` count as the
/// same eigenvalue.
pub fn projector_radius(spectrum: &[C64], lambda: C64) -> f64 {
    let same = 1e-8 * lambda.norm().max(1.0);
    let gap = spectrum
        .iter()
        .map(|mu| (mu - lambda).norm())
        .filter(|&d| d > same)
        .fold(f64::INFINITY, f64::min);
    (0.5 * gap).min(1.0)
}

fn node(center: C64, radius: f64, k: usize, n: usize) -> (C64, C64) {
    let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
    (center + radius * e, radius * e)
}

/// Sum of `r e^{i theta_k} (z_k I - S)^{-1} X` over the nodes `k` of an
/// `n`-point rule selected by `pick`.
fn contour_sum(
    op: &ReducedOperator,
    center: C64,
    radius: f64,
    n: usize,
    pick: impl Fn(usize) -> bool,
    x: &Mat<C64>,
    adjoint: bool,
) -> Mat<C64> {
    let dim = op.dim();
    let mut acc = Mat::<C64>::zeros(dim, x.ncols());
    for k in (0..n).filter(|&k| pick(k)) {
        let (z, w) = node(center, radius, k, n);
        let f = op.factor_shifted(z);
        let w = if adjoint { w.conj() } else { w };
        for j in 0..x.ncols() {
            let mut col: Vec<C64> = (0..dim).map(|i| x[(i, j)]).collect();
            if adjoint {
                f.solve_adjoint_in_place(&mut col);
            } else {
                f.solve_in_place(&mut col);
            }
            for i in 0..dim {
                acc[(i, j)] += w * col[i];
            }
        }
    }
    acc
}

fn scaled(m: &Mat<C64>, a: f64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * a)
}

fn frob(m: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Projector onto the root lineal of the eigenvalues inside the circle of
/// `radius` around `eigenvalue`, by the trapezoid rule with node doubling.
///
/// `spectrum` is the computed spectrum of `op`; a member within 5% of the
/// radius from the circle is rejected because the rule would not converge.
pub fn spectral_projector(
    op: &ReducedOperator,
    spectrum: &[C64],
    eigenvalue: C64,
    radius: f64,
    settings: &ContourSettings,
) -> Result<ProjectorRecord> {
    if settings.initial_nodes < 32 {
        return Err(Error::PreconditionViolated(format!(
            "at least 32 quadrature nodes are required, got {}",
            settings.initial_nodes
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if let Some(mu) = spectrum
        .iter()
        .find(|mu| ((*mu - eigenvalue).norm() - radius).abs() <= 0.05 * radius)
    {
        return Err(Error::CircleHitsSpectrum { other: *mu });
    }

    let dim = op.dim();
    let k = settings.sketch.clamp(1, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let omega = Mat::<C64>::from_fn(dim, k, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });

    let mut n = settings.initial_nodes;
    let mut total = contour_sum(op, eigenvalue, radius, n, |_| true, &omega, false);
    let mut change = f64::INFINITY;
    let mut sketch = Mat::<C64>::zeros(dim, k);
    while 2 * n <= settings.max_nodes.max(2 * settings.initial_nodes) {
        let coarse = scaled(&total, 1.0 / n as f64);
        let odd = contour_sum(op, eigenvalue, radius, 2 * n, |j| j % 2 == 1, &omega, false);
        total = &total + &odd;
        n *= 2;
        sketch = scaled(&total, 1.0 / n as f64);
        let scale = frob(&sketch);
        change = frob(&(&sketch - &coarse)) / scale.max(f64::MIN_POSITIVE);
        if change <= settings.tolerance {
            break;
        }
    }
    if !(change <= settings.tolerance) {
        return Err(Error::QuadratureNotConverged { change });
    }

    let (range, _) = linalg::range_basis(sketch.as_ref(), 1e-8)?;
    let rank = range.ncols();
    if rank == 0 {
        return Err(Error::InvalidInput(format!(
            "no eigenvalue inside the circle of radius {radius} around {eigenvalue}"
        )));
    }
    let corange = scaled(
        &contour_sum(op, eigenvalue, radius, n, |_| true, &range, true),
        1.0 / n as f64,
    );

    // P^2 - P = Q (W^* Q - I) W^*.
    let mut m = gram(&corange, &range);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    let g = gram(&corange, &corange);
    let norm_p = (0..rank).map(|i| g[i][i].re).sum::<f64>().sqrt();
    let idempotence_defect = frobenius_of_mw(&m, &g) / norm_p;

    Ok(ProjectorRecord {
        eigenvalue,
        radius,
        rank,
        nodes: n,
        idempotence_defect,
        range,
        corange,
    })
}

/// `sum_j w_j P_j f` on the interior unknowns of `op`.
fn weighted_sum(
    projectors: &[ProjectorRecord],
    fi: &[C64],
    weight: impl Fn(C64) -> C64,
) -> Vec<C64> {
    let mut acc = vec![ZERO; fi.len()];
    for p in projectors {
        let w = weight(p.eigenvalue);
        if w == ZERO {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(p.apply(fi)) {
            *a += w * v;
        }
    }
    acc
}

fn check_disjoint(projectors: &[ProjectorRecord]) -> Result<()> {
    for (i, a) in projectors.iter().enumerate() {
        for b in &projectors[i + 1..] {
            if (a.eigenvalue - b.eigenvalue).norm() < a.radius + b.radius {
                return Err(Error::PreconditionViolated(format!(
                    "projection circles around {} and {} overlap",
                    a.eigenvalue, b.eigenvalue
                )));
            }
        }
    }
    Ok(())
}

/// `sum_j abel_weight(lambda_j) P_j f`.
pub fn abel_partial_sum(
    op: &ReducedOperator,
    f: &BrokenFunction,
    projectors: &[ProjectorRecord],
    settings: AbelSettings,
    t: f64,
) -> Result<BrokenFunction> {
    check_disjoint(projectors)?;
    let fi = op.restrict(f)?;
    let s = weighted_sum(projectors, &fi, |z| {
        abel_weight(z, settings.alpha, t, settings.theta)
    });
    op.to_broken(&s)
}

/// `f - sum_j P_j f`, the part of `f` outside the captured root lineals.
pub fn deflate(
    op: &ReducedOperator,
    f: &BrokenFunction,
    projectors: &[ProjectorRecord],
) -> Result<BrokenFunction> {
    let fi = op.restrict(f)?;
    let s = weighted_sum(projectors, &fi, |_| C64::from(1.0));
    let r: Vec<C64> = fi.iter().zip(&s).map(|(a, b)| a - b).collect();
    op.to_broken(&r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelExpansion {
    pub alpha: f64,
    pub theta: f64,
    pub t_values: Vec<f64>,
    /// Discrete L2 errors `||f - sum_j w_j(t) P_j f||`, one per `t`.
    pub errors: Vec<f64>,
    pub mode_count: usize,
    pub projector_count: usize,
    pub max_idempotence_defect: f64,
    /// The error at the smallest `t` does not exceed the error at the largest.
    pub monotone: bool,
}

/// Discrete operator, its spectrum and eigenvectors, reused across studies.
#[derive(Debug, Clone)]
pub struct AbelWorkspace {
    pub op: ReducedOperator,
    /// Eigenvalues sorted by modulus.
    pub spectrum: Vec<C64>,
    vectors: Mat<C64>,
}

impl AbelWorkspace {
    pub fn new(problem: &TransmissionProblem, grid: &BrokenGrid) -> Result<Self> {
        let op = ReducedOperator::new(&assemble_operator(problem, grid))?;
        let (values, vecs) = linalg::eigenpairs(op.s.as_ref())?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()));
        let spectrum = order.iter().map(|&k| values[k]).collect();
        let vectors = Mat::from_fn(vecs.nrows(), order.len(), |i, j| vecs[(i, order[j])]);
        Ok(AbelWorkspace {
            op,
            spectrum,
            vectors,
        })
    }

    /// The `k`-th eigenvector (0-based, by modulus) as a function with unit
    /// discrete L2 norm.
    pub fn eigenfunction(&self, k: usize) -> Result<BrokenFunction> {
        if k >= self.spectrum.len() {
            return Err(Error::TooFewEigenvalues {
                needed: k + 1,
                got: self.spectrum.len(),
            });
        }
        let v: Vec<C64> = (0..self.vectors.nrows())
            .map(|i| self.vectors[(i, k)])
            .collect();
        let u = self.op.to_broken(&v)?;
        Ok(u.scale(C64::from(1.0 / u.l2_norm())))
    }

    /// Projectors for the smallest eigenvalues until `mode_count` of them,
    /// with multiplicity, are covered.
    pub fn projectors(
        &self,
        mode_count: usize,
        contour: &ContourSettings,
    ) -> Result<Vec<ProjectorRecord>> {
        if mode_count > self.spectrum.len() {
            return Err(Error::TooFewEigenvalues {
                needed: mode_count,
                got: self.spectrum.len(),
            });
        }
        let mut out: Vec<ProjectorRecord> = Vec::new();
        let mut covered = 0;
        for &lambda in &self.spectrum {
            if covered >= mode_count {
                break;
            }
            if out
                .iter()
                .any(|p| (p.eigenvalue - lambda).norm() < p.radius)
            {
                continue;
            }
            let radius = projector_radius(&self.spectrum, lambda);
            let p = spectral_projector(&self.op, &self.spectrum, lambda, radius, contour)?;
            covered += p.rank;
            out.push(p);
        }
        Ok(out)
    }

    pub fn study(
        &self,
        f: &BrokenFunction,
        projectors: &[ProjectorRecord],
        settings: AbelSettings,
        t_list: &[f64],
    ) -> Result<AbelExpansion> {
        settings.validate()?;
        check_disjoint(projectors)?;
        if t_list.is_empty() || t_list.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidInput("t values must be nonnegative".into()));
        }
        let fi = self.op.restrict(f)?;
        let mut errors = Vec::with_capacity(t_list.len());
        for &t in t_list {
            let s = weighted_sum(projectors, &fi, |z| {
                abel_weight(z, settings.alpha, t, settings.theta)
            });
            let approx = self.op.to_broken(&s)?;
            errors.push(
                f.combine(C64::from(1.0), &approx, C64::from(-1.0))?
                    .l2_norm(),
            );
        }
        let by_t = |pick: fn(f64, f64) -> bool| {
            let mut best = 0;
            for (i, &t) in t_list.iter().enumerate() {
                if pick(t, t_list[best]) {
                    best = i;
                }
            }
            best
        };
        let lo = by_t(|a, b| a < b);
        let hi = by_t(|a, b| a > b);
        Ok(AbelExpansion {
            alpha: settings.alpha,
            theta: settings.theta,
            t_values: t_list.to_vec(),
            monotone: errors[lo] <= errors[hi],
            errors,
            mode_count: projectors.iter().map(|p| p.rank).sum(),
            projector_count: projectors.len(),
            max_idempotence_defect: projectors
                .iter()
                .map(|p| p.idempotence_defect)
                .fold(0.0, f64::max),
        })
    }
}

/// Reconstruction errors of the Abel-regularized expansion of `f` in the
/// first `mode_count` root functions of the discretized operator.
pub fn abel_convergence_study(
    problem: &TransmissionProblem,
    grid: &BrokenGrid,
    f: &BrokenFunction,
    mode_count: usize,
    settings: AbelSettings,
    t_list: &[f64],
) -> Result<AbelExpansion> {
    let ws = AbelWorkspace::new(problem, grid)?;
    let projectors = ws.projectors(mode_count, &ContourSettings::default())?;
    ws.study(f, &projectors, settings, t_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::build_grid;
    use crate::problem::{validate_problem, Coefficients, PerturbationSpec};

    fn symmetric() -> TransmissionProblem {
        validate_problem(
            Coefficients::dirichlet(1.0, 4.0).with_coupling(2.0, -0.5),
            PerturbationSpec::Zero,
        )
        .unwrap()
    }

    #[test]
    fn min_order_formula() {
        assert_eq!(min_abel_order(0.5, 0.5), 1.0);
        assert_eq!(min_abel_order(0.0, 0.0), 1.0);
        assert!((min_abel_order(0.3, 0.9) - 0.4).abs() < 1e-15);
        assert_eq!(min_abel_order(0.0, 1.5), 0.0);
    }

    #[test]
    fn settings_validation() {
        assert!(AbelSettings::default().validate().is_ok());
        assert!(AbelSettings::new(1.0, PI / 4.0).is_err());
        assert!(AbelSettings::new(2.5, PI / 4.0).is_err());
        assert!(AbelSettings::new(1.5, PI / 2.0).is_err());
    }

    #[test]
    fn weights() {
        let (a, t, th) = (1.5, 0.1, PI / 4.0);
        let w = abel_weight(C64::from(4.0), a, t, th);
        assert!((w - C64::from((-0.8f64).exp())).norm() < 1e-14);
        assert!((abel_weight(C64::from(-4.0), a, t, th) - w).norm() < 1e-14);
        assert_eq!(abel_weight(C64::new(0.0, 4.0), a, t, th), C64::from(1.0));
        assert!((abel_weight(C64::from(7.0), a, 0.0, th) - 1.0).norm() < 1e-15);
        assert!((abel_weight(ZERO, a, t, th) - 1.0).norm() < 1e-15);
    }

    fn reduced_from(s: Mat<C64>) -> ReducedOperator {
        ReducedOperator::from_matrix(s)
    }

    #[test]
    fn diagonal_projector_is_exact() {
        let s = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                C64::from((i + 1) as f64)
            } else {
                ZERO
            }
        });
        let op = reduced_from(s);
        let spec = [C64::from(1.0), C64::from(2.0)];
        let p = spectral_projector(&op, &spec, spec[0], 0.4, &ContourSettings::default()).unwrap();
        let d = p.to_dense();
        let want = [[1.0, 0.0], [0.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - want[i][j]).norm() < 1e-10);
            }
        }
        assert_eq!(p.rank, 1);
        assert!(p.idempotence_defect < 1e-10);
    }

    #[test]
    fn jordan_block_has_rank_two() {
        let s = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) | (1, 1) => C64::from(1.0),
            (0, 1) => C64::from(1.0),
            (2, 2) => C64::from(3.0),
            _ => ZERO,
        });
        let op = reduced_from(s);
        let spec = [C64::from(1.0), C64::from(1.0), C64::from(3.0)];
        let p = spectral_projector(&op, &spec, spec[0], 1.0, &ContourSettings::default()).unwrap();
        assert_eq!(p.rank, 2);
        assert!(p.idempotence_defect < 1e-10);
    }

    #[test]
    fn circle_through_spectrum_is_rejected() {
        let s = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                C64::from((i + 1) as f64)
            } else {
                ZERO
            }
        });
        let op = reduced_from(s);
        let spec = [C64::from(1.0), C64::from(2.0)];
        assert!(matches!(
            spectral_projector(&op, &spec, spec[0], 1.0, &ContourSettings::default()),
            Err(Error::CircleHitsSpectrum { .. })
        ));
        let few = ContourSettings {
            initial_nodes: 16,
            ..Default::default()
        };
        assert!(spectral_projector(&op, &spec, spec[0], 0.4, &few).is_err());
    }

    #[test]
    fn simple_eigenvalue_projector_matches_eigenfunction() {
        let grid = build_grid(200).unwrap();
        let ws = AbelWorkspace::new(&symmetric(), &grid).unwrap();
        let ps = ws.projectors(3, &ContourSettings::default()).unwrap();
        assert!(ps
            .iter()
            .all(|p| p.rank == 1 && p.idempotence_defect < 1e-6));
        let u = ws.eigenfunction(1).unwrap();
        // P u = u for its own eigenfunction, P_i u = 0 for the others.
        let ui = ws.op.restrict(&u).unwrap();
        let pu = ps[1].apply(&ui);
        let d: Vec<C64> = pu.iter().zip(&ui).map(|(a, b)| a - b).collect();
        assert!(linalg::norm2(&d) <= 1e-6 * linalg::norm2(&ui));
        assert!(linalg::norm2(&ps[0].apply(&ui)) <= 1e-6 * linalg::norm2(&ui));
        for (i, a) in ps.iter().enumerate() {
            for b in &ps[i + 1..] {
                assert!(a.product_norm(b) <= 1e-6 * a.frobenius_norm() * b.frobenius_norm());
            }
        }
    }

    #[test]
    fn orthogonal_projection_in_the_self_adjoint_case() {
        // The discrete operator is self-adjoint only up to O(h^2), so the
        // comparison with <f,u>u/<u,u> is made at that scale.
        let grid = build_grid(400).unwrap();
        let ws = AbelWorkspace::new(&symmetric(), &grid).unwrap();
        let ps = ws.projectors(1, &ContourSettings::default()).unwrap();
        let u = ws.eigenfunction(0).unwrap();
        let f = BrokenFunction::sample(
            grid.n_per_interval(),
            |x| (C64::from(x * (1.0 + x)), C64::from(1.0 + 2.0 * x)),
            |x| (C64::from(x * (1.0 - x) * (x + 0.3)), C64::from(0.0)),
        )
        .unwrap();
        let pf = ws
            .op
            .to_broken(&ps[0].apply(&ws.op.restrict(&f).unwrap()))
            .unwrap();
        let c = f.inner(&u).unwrap() / u.inner(&u).unwrap();
        let err = pf.combine(C64::from(1.0), &u, -c).unwrap().l2_norm();
        assert!(err <= 1e-3 * pf.l2_norm(), "err {err}");
    }

    #[test]
    fn decoupled_double_eigenvalue_has_rank_two() {
        let p =
            validate_problem(Coefficients::dirichlet(1.0, 1.0), PerturbationSpec::Zero).unwrap();
        let ws = AbelWorkspace::new(&p, &build_grid(100).unwrap()).unwrap();
        let ps = ws.projectors(2, &ContourSettings::default()).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].rank, 2);
        assert!((ps[0].eigenvalue.re + PI * PI / 4.0).abs() < 1e-3);
    }

    #[test]
    fn partial_sums_on_eigenfunctions() {
        let grid = build_grid(200).unwrap();
        let ws = AbelWorkspace::new(&symmetric(), &grid).unwrap();
        let ps = ws.projectors(5, &ContourSettings::default()).unwrap();
        let s = AbelSettings::default();
        let u = ws.eigenfunction(0).unwrap();
        let out = abel_partial_sum(&ws.op, &u, &ps, s, 0.3).unwrap();
        let w = abel_weight(ws.spectrum[0], s.alpha, 0.3, s.theta);
        let err = out.combine(C64::from(1.0), &u, -w).unwrap().l2_norm();
        assert!(err <= 1e-6, "err {err}");
        // The smallest eigenvalue sits near 0, so damp a later mode instead.
        let v = ws.eigenfunction(3).unwrap();
        let far = abel_partial_sum(&ws.op, &v, &ps, s, 1e3).unwrap();
        assert!(far.l2_norm() < 1e-10);
    }

    #[test]
    fn span_reconstruction_and_deflation() {
        // At unit stiffness the fifth eigenvalue is large enough that its
        // weight at t = 1e-4 is still visibly below 1; scaling the stiffness
        // keeps the low modes near the origin.
        let soft = validate_problem(
            Coefficients::dirichlet(0.01, 0.04).with_coupling(2.0, -0.5),
            PerturbationSpec::Zero,
        )
        .unwrap();
        let grid = build_grid(200).unwrap();
        let ws = AbelWorkspace::new(&soft, &grid).unwrap();
        let ps = ws.projectors(8, &ContourSettings::default()).unwrap();
        let mut f = ws.eigenfunction(0).unwrap();
        for k in 1..5 {
            f = f
                .combine(
                    C64::from(1.0),
                    &ws.eigenfunction(k).unwrap(),
                    C64::from(1.0),
                )
                .unwrap();
        }
        f = f.scale(C64::from(1.0 / f.l2_norm()));
        let s = AbelSettings::default();
        let e = ws.study(&f, &ps, s, &[1e-4, 1e-1]).unwrap();
        assert!(e.errors[0] <= 1e-3, "{:?}", e.errors);
        assert!(e.monotone);

        let g = BrokenFunction::sample(
            grid.n_per_interval(),
            |x| (C64::from((3.0 * x).sin()), C64::from(3.0 * (3.0 * x).cos())),
            |x| (C64::from(x * x), C64::from(2.0 * x)),
        )
        .unwrap();
        let d = deflate(&ws.op, &g, &ps).unwrap();
        let e = ws.study(&d, &ps, s, &[1e-4, 1e-2, 1.0]).unwrap();
        for err in &e.errors {
            assert!((err - d.l2_norm()).abs() <= 1e-6 * d.l2_norm());
        }
    }
}
