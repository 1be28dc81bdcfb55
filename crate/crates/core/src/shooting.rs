//! Characteristic determinant by shooting, real and complex root location,
//! argument-principle counting and eigenfunctions.
//!
//! Two characteristic functions are available. [`characteristic_determinant`]
//! is the 4x4 determinant `det [L_i(v_j)]` of the fundamental system started
//! at the left end of each piece. It is exact but loses all relative accuracy
//! once one piece is in the exponential regime, since its columns become
//! nearly parallel. Root finding therefore uses the reduced function
//!
//! ```text
//! D(lambda) = (a' - gamma0 a)(b' - delta1 b) - delta0 gamma1 a b
//! ```
//!
//! where `(a, a')` are the traces at `0-` of the solution satisfying `L1 = 0`
//! started at `-1`, and `(b, b')` those at `0+` of the solution satisfying
//! `L2 = 0` started at `1`. Both are integrated towards the interior, which is
//! the stable direction. `D` differs from the 4x4 determinant by a nowhere
//! vanishing entire factor, so zeros and their orders coincide. It is divided
//! by the positive number `|(a, a')| |(b, b')|` to stay of unit size; this
//! leaves signs on the real axis and arguments on contours untouched.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Lu4, C64, ONE, ZERO};
use crate::problem::{symmetry_defect, BrokenFunction, InterfaceTraces, TransmissionProblem};

pub const DEFAULT_STEPS: usize = 2048;
pub const MIN_STEPS: usize = 64;
pub const DEFAULT_NODES_PER_SIDE: usize = 64;
const MULLER_MAX_ITER: usize = 100;

/// Which asymptotic branch an eigenvalue belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Branch1,
    Branch2,
    Single,
}

/// Engine that produced an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Shooting,
    Matrix,
}

/// One eigenvalue with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueRecord {
    pub value: C64,
    pub multiplicity: usize,
    pub branch: Branch,
    pub source: Source,
    /// Normalized characteristic function at `value` for shooting roots,
    /// relative backward error for matrix eigenvalues.
    pub residual: f64,
}

impl EigenvalueRecord {
    pub fn shooting(value: C64, multiplicity: usize, residual: f64) -> Self {
        EigenvalueRecord {
            value,
            multiplicity,
            branch: Branch::Single,
            source: Source::Shooting,
            residual,
        }
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    /// Square of half-width `half` around `z`.
    pub fn around(z: C64, half: f64) -> Self {
        Rect::new(z.re - half, z.re + half, z.im - half, z.im + half)
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> C64 {
        C64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Left,
    Right,
}

/// One solution of the ODE on one piece, sampled at every integration node.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub piece: Piece,
    pub values: Vec<C64>,
    pub derivatives: Vec<C64>,
}

impl SolutionRecord {
    /// `(u, u')` at the left end of the piece.
    pub fn start(&self) -> (C64, C64) {
        (self.values[0], self.derivatives[0])
    }

    /// `(u, u')` at the right end of the piece.
    pub fn end(&self) -> (C64, C64) {
        let n = self.values.len() - 1;
        (self.values[n], self.derivatives[n])
    }

    /// Extends the solution by zero to the other piece.
    pub fn to_broken(&self) -> Result<BrokenFunction> {
        let zeros = vec![ZERO; self.values.len()];
        match self.piece {
            Piece::Left => {
                let (u, du) = self.end();
                BrokenFunction::new(
                    self.values.clone(),
                    zeros,
                    InterfaceTraces {
                        u_minus: u,
                        du_minus: du,
                        u_plus: ZERO,
                        du_plus: ZERO,
                    },
                )
            }
            Piece::Right => {
                let (u, du) = self.start();
                BrokenFunction::new(
                    zeros,
                    self.values.clone(),
                    InterfaceTraces {
                        u_minus: ZERO,
                        du_minus: ZERO,
                        u_plus: u,
                        du_plus: du,
                    },
                )
            }
        }
    }
}

/// Solutions with data `(1, 0)` and `(0, 1)` at the left end of each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSystem {
    pub lambda: C64,
    pub left: [SolutionRecord; 2],
    pub right: [SolutionRecord; 2],
}

impl FundamentalSystem {
    /// `p (u1 u2' - u1' u2)` at every node of a pair.
    pub fn wronskians(&self, piece: Piece, p: f64) -> Vec<C64> {
        let pair = match piece {
            Piece::Left => &self.left,
            Piece::Right => &self.right,
        };
        (0..pair[0].values.len())
            .map(|i| {
                p * (pair[0].values[i] * pair[1].derivatives[i]
                    - pair[0].derivatives[i] * pair[1].values[i])
            })
            .collect()
    }

    /// The matrix `[L_i(v_j)]`.
    pub fn condition_matrix(&self, problem: &TransmissionProblem) -> [[C64; 4]; 4] {
        let c = problem.coefficients();
        let (u1, du1) = self.left[0].end();
        let (u2, du2) = self.left[1].end();
        let (u3, du3) = self.right[0].end();
        let (u4, du4) = self.right[1].end();
        let r = |x: f64| C64::from(x);
        [
            [r(c.alpha0), r(c.alpha1), ZERO, ZERO],
            [
                ZERO,
                ZERO,
                c.beta0 * u3 + c.beta1 * du3,
                c.beta0 * u4 + c.beta1 * du4,
            ],
            [du1 - c.gamma0 * u1, du2 - c.gamma0 * u2, r(-c.delta0), ZERO],
            [-c.gamma1 * u1, -c.gamma1 * u2, r(-c.delta1), ONE],
        ]
    }
}

#[derive(Debug, Clone)]
struct PieceTable {
    p: f64,
    n: usize,
    h: f64,
    /// `q` and `c` at half-step nodes `a + i h / 2`, `i = 0..=2n`.
    q: Vec<f64>,
    c: Vec<f64>,
}

impl PieceTable {
    fn new(problem: &TransmissionProblem, piece: Piece, n: usize) -> Self {
        let (p, a) = match piece {
            Piece::Left => (problem.p1(), -1.0),
            Piece::Right => (problem.p2(), 0.0),
        };
        let h = 1.0 / n as f64;
        let pert = problem.perturbation();
        let xs: Vec<f64> = (0..=2 * n).map(|i| a + 0.5 * h * i as f64).collect();
        PieceTable {
            p,
            n,
            h,
            q: xs.iter().map(|&x| pert.q(x)).collect(),
            c: xs.iter().map(|&x| pert.c(x)).collect(),
        }
    }

    /// RK4 for `p u'' + c u' + q u = lambda u` across the whole piece.
    fn propagate(
        &self,
        lambda: C64,
        start: (C64, C64),
        forward: bool,
        mut record: Option<&mut Vec<(C64, C64)>>,
    ) -> (C64, C64) {
        let n = self.n;
        let h = if forward { self.h } else { -self.h };
        let inv_p = 1.0 / self.p;
        let f = |i: usize, u: C64, v: C64| (v, ((lambda - self.q[i]) * u - self.c[i] * v) * inv_p);
        let (mut u, mut v) = start;
        if let Some(r) = record.as_deref_mut() {
            r.push((u, v));
        }
        for s in 0..n {
            let (i0, i1, i2) = if forward {
                (2 * s, 2 * s + 1, 2 * s + 2)
            } else {
                let k = 2 * (n - s);
                (k, k - 1, k - 2)
            };
            let (k1u, k1v) = f(i0, u, v);
            let (k2u, k2v) = f(i1, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = f(i1, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = f(i2, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if let Some(r) = record.as_deref_mut() {
                r.push((u, v));
            }
        }
        (u, v)
    }
}

/// Reduced characteristic data at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    /// `D / scale`.
    pub value: C64,
    /// Unnormalized `D`.
    pub raw: C64,
    pub scale: f64,
    /// Traces at `0-` of the left boundary solution.
    pub left: (C64, C64),
    /// Traces at `0+` of the right boundary solution.
    pub right: (C64, C64),
}

/// Precomputed integrator for one problem and one step count.
#[derive(Debug, Clone)]
pub struct Shooter<'a> {
    problem: &'a TransmissionProblem,
    left: PieceTable,
    right: PieceTable,
}

fn state_norm(s: (C64, C64)) -> f64 {
    (s.0.norm_sqr() + s.1.norm_sqr()).sqrt()
}

impl<'a> Shooter<'a> {
    pub fn new(problem: &'a TransmissionProblem, steps: usize) -> Result<Self> {
        if !problem.perturbation().is_local() {
            return Err(Error::NonlocalPerturbation);
        }
        if steps < MIN_STEPS {
            return Err(Error::PreconditionViolated(format!(
                "at least {MIN_STEPS} integration steps per piece are required, got {steps}"
            )));
        }
        Ok(Shooter {
            problem,
            left: PieceTable::new(problem, Piece::Left, steps),
            right: PieceTable::new(problem, Piece::Right, steps),
        })
    }

    pub fn with_default_steps(problem: &'a TransmissionProblem) -> Result<Self> {
        Self::new(problem, DEFAULT_STEPS)
    }

    pub fn problem(&self) -> &TransmissionProblem {
        self.problem
    }

    pub fn steps(&self) -> usize {
        self.left.n
    }

    pub fn fundamental_system(&self, lambda: C64) -> FundamentalSystem {
        let run = |t: &PieceTable, piece: Piece, start: (C64, C64)| {
            let mut rec = Vec::with_capacity(t.n + 1);
            t.propagate(lambda, start, true, Some(&mut rec));
            let (values, derivatives) = rec.into_iter().unzip();
            SolutionRecord {
                piece,
                values,
                derivatives,
            }
        };
        FundamentalSystem {
            lambda,
            left: [
                run(&self.left, Piece::Left, (ONE, ZERO)),
                run(&self.left, Piece::Left, (ZERO, ONE)),
            ],
            right: [
                run(&self.right, Piece::Right, (ONE, ZERO)),
                run(&self.right, Piece::Right, (ZERO, ONE)),
            ],
        }
    }

    /// `det [L_i(v_j)]` for the left-end fundamental system.
    pub fn determinant(&self, lambda: C64) -> C64 {
        let run = |t: &PieceTable, s| t.propagate(lambda, s, true, None);
        let c = self.problem.coefficients();
        let (u1, du1) = run(&self.left, (ONE, ZERO));
        let (u2, du2) = run(&self.left, (ZERO, ONE));
        let (u3, du3) = run(&self.right, (ONE, ZERO));
        let (u4, du4) = run(&self.right, (ZERO, ONE));
        let r = |x: f64| C64::from(x);
        let m = [
            [r(c.alpha0), r(c.alpha1), ZERO, ZERO],
            [
                ZERO,
                ZERO,
                c.beta0 * u3 + c.beta1 * du3,
                c.beta0 * u4 + c.beta1 * du4,
            ],
            [du1 - c.gamma0 * u1, du2 - c.gamma0 * u2, r(-c.delta0), ZERO],
            [-c.gamma1 * u1, -c.gamma1 * u2, r(-c.delta1), ONE],
        ];
        Lu4::new(m).det()
    }

    fn boundary_starts(&self) -> ((C64, C64), (C64, C64)) {
        let c = self.problem.coefficients();
        (
            (C64::from(c.alpha1), C64::from(-c.alpha0)),
            (C64::from(c.beta1), C64::from(-c.beta0)),
        )
    }

    /// The reduced characteristic function at `lambda`.
    pub fn characteristic(&self, lambda: C64) -> Characteristic {
        let c = self.problem.coefficients();
        let (sl, sr) = self.boundary_starts();
        let (a, da) = self.left.propagate(lambda, sl, true, None);
        let (b, db) = self.right.propagate(lambda, sr, false, None);
        let raw = (da - c.gamma0 * a) * (db - c.delta1 * b) - c.delta0 * c.gamma1 * a * b;
        let scale = state_norm((a, da)) * state_norm((b, db));
        Characteristic {
            value: raw / scale,
            raw,
            scale,
            left: (a, da),
            right: (b, db),
        }
    }

    /// Normalized reduced characteristic function.
    pub fn reduced(&self, lambda: C64) -> C64 {
        self.characteristic(lambda).value
    }

    /// Value and slope of the normalized function on the real axis; the slope
    /// is that of `D` divided by the scale at `x`, via a complex step.
    fn real_value_and_slope(&self, x: f64) -> (f64, f64) {
        let ch = self.characteristic(C64::from(x));
        let h = 1e-20 * x.abs().max(1.0);
        let shifted = self.characteristic(C64::new(x, h));
        (ch.value.re, shifted.raw.im / h / ch.scale)
    }

    fn real_value(&self, x: f64) -> f64 {
        self.characteristic(C64::from(x)).value.re
    }

    /// Winding number of the reduced function around `rect`.
    pub fn count_in_rect(&self, rect: &Rect, nodes_per_side: usize) -> Result<usize> {
        if nodes_per_side < DEFAULT_NODES_PER_SIDE {
            return Err(Error::PreconditionViolated(format!(
                "nodes_per_side must be at least {DEFAULT_NODES_PER_SIDE}, got {nodes_per_side}"
            )));
        }
        if !(rect.width() > 0.0 && rect.height() > 0.0) {
            return Err(Error::InvalidInput("rectangle has empty interior".into()));
        }
        let scale = rect.center().norm().max(rect.diameter()).max(1.0);
        let min_len = 1e-13 * scale;
        let corners = rect.corners();
        let mut total = 0.0;
        for k in 0..4 {
            let z0 = corners[k];
            let z1 = corners[(k + 1) % 4];
            let mut prev_z = z0;
            let mut prev_f = self.checked(z0)?;
            for j in 1..=nodes_per_side {
                let z = z0 + (z1 - z0) * (j as f64 / nodes_per_side as f64);
                let f = self.checked(z)?;
                total += self.phase_change(prev_z, prev_f, z, f, 60, min_len)?;
                prev_z = z;
                prev_f = f;
            }
        }
        let winding = total / (2.0 * PI);
        let rounded = winding.round();
        if (winding - rounded).abs() > 0.1 || rounded < 0.0 {
            return Err(Error::PhaseInconsistent { winding });
        }
        Ok(rounded as usize)
    }

    fn checked(&self, z: C64) -> Result<C64> {
        let f = self.reduced(z);
        if !(f.norm() > 1e-300) || !f.re.is_finite() || !f.im.is_finite() {
            return Err(Error::BoundaryTooCloseToZero { near: z });
        }
        Ok(f)
    }

    fn phase_change(
        &self,
        z0: C64,
        f0: C64,
        z1: C64,
        f1: C64,
        depth: usize,
        min_len: f64,
    ) -> Result<f64> {
        let d = (f1 / f0).arg();
        if d.abs() <= PI / 4.0 {
            return Ok(d);
        }
        if depth == 0 || (z1 - z0).norm() < min_len {
            return Err(Error::BoundaryTooCloseToZero {
                near: 0.5 * (z0 + z1),
            });
        }
        let zm = 0.5 * (z0 + z1);
        let fm = self.checked(zm)?;
        Ok(self.phase_change(z0, f0, zm, fm, depth - 1, min_len)?
            + self.phase_change(zm, fm, z1, f1, depth - 1, min_len)?)
    }

    /// Muller iteration on the reduced function.
    pub fn refine(&self, seed: C64) -> Result<EigenvalueRecord> {
        let f0 = self.reduced(seed);
        if !(f0.re.is_finite() && f0.im.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "characteristic function not finite at {seed}"
            )));
        }
        let scale = seed.norm().max(1.0);
        let d = 1e-4 * scale;
        let mut x = [seed - d, seed + C64::new(0.0, 0.5 * d), seed];
        let mut f = [self.reduced(x[0]), self.reduced(x[1]), f0];
        for _ in 0..MULLER_MAX_ITER {
            if f[2] == ZERO {
                return self.finish_root(x[2]);
            }
            let h1 = x[1] - x[0];
            let h2 = x[2] - x[1];
            let d1 = (f[1] - f[0]) / h1;
            let d2 = (f[2] - f[1]) / h2;
            let a = (d2 - d1) / (h2 + h1);
            let b = a * h2 + d2;
            let disc = (b * b - 4.0 * a * f[2]).sqrt();
            let den = if (b + disc).norm() >= (b - disc).norm() {
                b + disc
            } else {
                b - disc
            };
            let dx = if den.norm() > 0.0 && den.re.is_finite() && den.im.is_finite() {
                -2.0 * f[2] / den
            } else {
                C64::new(1e-6, 1e-6) * x[2].norm().max(1.0)
            };
            let next = x[2] + dx;
            let fnext = self.reduced(next);
            x = [x[1], x[2], next];
            f = [f[1], f[2], fnext];
            if dx.norm() <= 1e-14 * next.norm().max(1.0) || fnext.norm() <= 1e-15 {
                return self.finish_root(next);
            }
        }
        Err(Error::NoConvergence {
            iterations: MULLER_MAX_ITER,
        })
    }

    fn finish_root(&self, z: C64) -> Result<EigenvalueRecord> {
        let residual = self.reduced(z).norm();
        let half = 1e-3 * z.norm().max(1.0) * 0.5;
        let multiplicity = self.box_multiplicity(z, half).unwrap_or(1).max(1);
        Ok(EigenvalueRecord::shooting(z, multiplicity, residual))
    }

    /// Zeros counted in a small square around `z`, shrinking the box when
    /// its boundary runs into another zero.
    fn box_multiplicity(&self, z: C64, half: f64) -> Result<usize> {
        let mut h = half;
        let mut last = Err(Error::BoundaryTooCloseToZero { near: z });
        for _ in 0..4 {
            match self.count_in_rect(&Rect::around(z, h), DEFAULT_NODES_PER_SIDE) {
                Ok(n) => return Ok(n),
                Err(e) => last = Err(e),
            }
            h *= 0.37;
        }
        last
    }

    /// Real roots of the reduced function on `[lo, hi]`.
    pub fn scan_real(&self, lo: f64, hi: f64, grid_points: usize) -> Result<Vec<EigenvalueRecord>> {
        if !(lo < hi) {
            return Err(Error::WindowEmpty { lo, hi });
        }
        if grid_points < 100 {
            return Err(Error::PreconditionViolated(format!(
                "grid_points must be at least 100, got {grid_points}"
            )));
        }
        let defect = symmetry_defect(self.problem);
        if defect != 0.0 {
            log::warn!("real scan on a problem with interface symmetry defect {defect}; complex eigenvalues are not reported");
        }
        let xs: Vec<f64> = (0..grid_points)
            .map(|i| lo + (hi - lo) * i as f64 / (grid_points - 1) as f64)
            .collect();
        let samples: Vec<(f64, f64)> = xs.iter().map(|&x| self.real_value_and_slope(x)).collect();
        let mut mags: Vec<f64> = samples.iter().map(|s| s.0.abs()).collect();
        mags.sort_by(|a, b| a.total_cmp(b));
        let typical = mags[mags.len() / 2].max(1e-300);
        let zero_tol = 1e-9 * typical;

        let mut roots = Vec::new();
        for (i, &(v, _)) in samples.iter().enumerate() {
            if v.abs() <= zero_tol {
                roots.push(xs[i]);
            }
        }
        for i in 0..grid_points - 1 {
            let (a, b) = (xs[i], xs[i + 1]);
            let (fa, sa) = samples[i];
            let (fb, sb) = samples[i + 1];
            if fa.abs() <= zero_tol || fb.abs() <= zero_tol {
                continue;
            }
            if fa.signum() != fb.signum() {
                roots.push(self.bisect(a, b, fa, |x| self.real_value(x)));
            } else if sa.signum() != sb.signum() && sa != 0.0 && sb != 0.0 {
                // |D| has an interior extremum: either a touching zero or a
                // hidden pair of sign changes.
                let slope = |x: f64| self.real_value_and_slope(x).1;
                let m = self.bisect(a, b, sa, slope);
                let fm = self.real_value(m);
                if fm.abs() >= fa.abs().min(fb.abs()) {
                    continue;
                }
                if fm.abs() <= zero_tol {
                    roots.push(m);
                } else if fm.signum() != fa.signum() {
                    roots.push(self.bisect(a, m, fa, |x| self.real_value(x)));
                    roots.push(self.bisect(m, b, fm, |x| self.real_value(x)));
                }
            }
        }
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-8 * a.abs().max(1.0));

        let mut out = Vec::with_capacity(roots.len());
        for (k, &r) in roots.iter().enumerate() {
            let mut gap = f64::INFINITY;
            if k > 0 {
                gap = gap.min(r - roots[k - 1]);
            }
            if k + 1 < roots.len() {
                gap = gap.min(roots[k + 1] - r);
            }
            let half = (0.5e-3 * r.abs().max(1.0)).min(0.25 * gap);
            let z = C64::from(r);
            let multiplicity = match self.box_multiplicity(z, half) {
                Ok(m) if m >= 1 => m,
                Ok(_) | Err(_) => {
                    log::warn!("could not confirm the multiplicity of the real root {r}");
                    1
                }
            };
            out.push(EigenvalueRecord::shooting(
                z,
                multiplicity,
                self.reduced(z).norm(),
            ));
        }
        Ok(out)
    }

    /// Bisection for a sign change of `g` on `[a, b]` with `g(a) = ga`.
    fn bisect(&self, mut a: f64, mut b: f64, ga: f64, g: impl Fn(f64) -> f64) -> f64 {
        let sa = ga.signum();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a) <= 1e-10 * m.abs().max(1.0) * 1e-2 || m == a || m == b {
                break;
            }
            let gm = g(m);
            if gm == 0.0 {
                return m;
            }
            if gm.signum() == sa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Eigenfunction at `eig`, normalized in the discrete L2 norm, sampled at
    /// the integration nodes.
    pub fn eigenfunction(&self, eig: &EigenvalueRecord) -> Result<BrokenFunction> {
        let lambda = eig.value;
        let c = self.problem.coefficients();
        let (sl, sr) = self.boundary_starts();
        let mut left = Vec::with_capacity(self.left.n + 1);
        let mut right = Vec::with_capacity(self.right.n + 1);
        let (a, da) = self.left.propagate(lambda, sl, true, Some(&mut left));
        let (b, db) = self.right.propagate(lambda, sr, false, Some(&mut right));
        right.reverse();
        let nl = state_norm((a, da));
        let nr = state_norm((b, db));
        // Interface matrix acting on the coefficients of the two boundary
        // solutions, columns normalized.
        let m = [
            [(da - c.gamma0 * a) / nl, -c.delta0 * b / nr],
            [-c.gamma1 * a / nl, (db - c.delta1 * b) / nr],
        ];
        let cand1 = [m[0][1], -m[0][0]];
        let cand2 = [m[1][1], -m[1][0]];
        let n1 = cand1[0].norm().hypot(cand1[1].norm());
        let n2 = cand2[0].norm().hypot(cand2[1].norm());
        let tol = 1e-6;
        let coef = if n1.max(n2) <= tol {
            if eig.multiplicity <= 1 {
                return Err(Error::DegenerateNullspace { dimension: 2 });
            }
            [ONE, ZERO]
        } else if n1 >= n2 {
            cand1
        } else {
            cand2
        };
        let (c1, c2) = (coef[0] / nl, coef[1] / nr);
        let lv = left.iter().map(|s| c1 * s.0).collect();
        let rv = right.iter().map(|s| c2 * s.0).collect();
        let u = BrokenFunction::new(
            lv,
            rv,
            InterfaceTraces {
                u_minus: c1 * a,
                du_minus: c1 * da,
                u_plus: c2 * b,
                du_plus: c2 * db,
            },
        )?;
        let norm = u.l2_norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateNullspace { dimension: 0 });
        }
        Ok(u.scale(C64::from(1.0 / norm)))
    }

    /// All eigenvalues with real part in `[lo, hi]`: real roots by scanning,
    /// then non-real ones by recursive argument-principle bisection of the
    /// upper half of the strip, mirrored by conjugation.
    pub fn locate(&self, lo: f64, hi: f64, grid_points: usize) -> Result<Vec<EigenvalueRecord>> {
        let mut out = self.scan_real(lo, hi, grid_points)?;
        let reach = lo.abs().max(hi.abs()).max(1.0);
        let height = 0.25 * reach.sqrt() + 5.0;
        let (a, b) = self.nudged_window(lo, hi, &out);
        let strip = Rect::new(a, b, -height, height);
        let total = self.count_with_retries(strip)?;
        let real_total: usize = out
            .iter()
            .filter(|e| e.value.re >= a && e.value.re <= b)
            .map(|e| e.multiplicity)
            .sum();
        if total > real_total {
            let floor = 1e-6 * reach;
            let upper = Rect::new(a, b, floor, height);
            let expected = (total - real_total) / 2;
            let mut found = Vec::new();
            self.search_rect(upper, 0, &mut found)?;
            let got: usize = found.iter().map(|e| e.multiplicity).sum();
            if got != expected {
                log::warn!(
                    "complex search found {got} eigenvalues in the upper half of the strip, expected {expected}"
                );
            }
            for e in found {
                let mut conj = e;
                conj.value = e.value.conj();
                out.push(e);
                out.push(conj);
            }
        } else if total < real_total {
            log::warn!("strip count {total} is below the number of real roots {real_total}");
        }
        out.sort_by(|x, y| {
            x.value
                .re
                .total_cmp(&y.value.re)
                .then(x.value.im.total_cmp(&y.value.im))
        });
        Ok(out)
    }

    fn nudged_window(&self, lo: f64, hi: f64, roots: &[EigenvalueRecord]) -> (f64, f64) {
        let nudge = |x: f64, dir: f64| {
            let mut x = x;
            let tol = 1e-4 * x.abs().max(1.0);
            while roots.iter().any(|e| (e.value.re - x).abs() < tol) {
                x += dir * tol;
            }
            x
        };
        (nudge(lo, -1.0), nudge(hi, 1.0))
    }

    fn count_with_retries(&self, rect: Rect) -> Result<usize> {
        let mut r = rect;
        let mut last = None;
        for k in 0..5 {
            match self.count_in_rect(&r, DEFAULT_NODES_PER_SIDE) {
                Ok(n) => return Ok(n),
                Err(e) => last = Some(e),
            }
            let grow = 1e-3 * (k as f64 + 1.0) * r.diameter();
            r = Rect::new(
                r.re_min - grow,
                r.re_max + grow,
                r.im_min - grow,
                r.im_max + grow,
            );
        }
        Err(last.unwrap_or(Error::PhaseInconsistent { winding: f64::NAN }))
    }

    fn search_rect(&self, rect: Rect, depth: usize, out: &mut Vec<EigenvalueRecord>) -> Result<()> {
        let count = self.count_in_rect(&rect, DEFAULT_NODES_PER_SIDE)?;
        if count == 0 {
            return Ok(());
        }
        let center = rect.center();
        if count == 1 {
            if let Ok(rec) = self.refine(center) {
                if rect.contains(rec.value) {
                    out.push(EigenvalueRecord {
                        multiplicity: 1,
                        ..rec
                    });
                    return Ok(());
                }
            }
        }
        let tiny = rect.diameter() <= 1e-9 * center.norm().max(1.0);
        if tiny || depth >= 80 {
            out.push(EigenvalueRecord::shooting(
                center,
                count,
                self.reduced(center).norm(),
            ));
            return Ok(());
        }
        let split_re = rect.width() >= rect.height();
        for frac in [0.5, 0.47, 0.53, 0.41, 0.59, 0.35, 0.65] {
            let halves = if split_re {
                let m = rect.re_min + frac * rect.width();
                [
                    Rect::new(rect.re_min, m, rect.im_min, rect.im_max),
                    Rect::new(m, rect.re_max, rect.im_min, rect.im_max),
                ]
            } else {
                let m = rect.im_min + frac * rect.height();
                [
                    Rect::new(rect.re_min, rect.re_max, rect.im_min, m),
                    Rect::new(rect.re_min, rect.re_max, m, rect.im_max),
                ]
            };
            let mut local = Vec::new();
            let ok = halves
                .iter()
                .try_for_each(|h| self.search_rect(*h, depth + 1, &mut local));
            if ok.is_ok() {
                out.extend(local);
                return Ok(());
            }
        }
        Err(Error::BoundaryTooCloseToZero { near: center })
    }
}

/// Fundamental system with data `(1, 0)`, `(0, 1)` at the left end of each piece.
pub fn fundamental_system(
    problem: &TransmissionProblem,
    lambda: C64,
    steps: usize,
) -> Result<FundamentalSystem> {
    Ok(Shooter::new(problem, steps)?.fundamental_system(lambda))
}

/// `det [L_i(v_j)]` with the default step count.
pub fn characteristic_determinant(problem: &TransmissionProblem, lambda: C64) -> Result<C64> {
    Ok(Shooter::with_default_steps(problem)?.determinant(lambda))
}

pub fn scan_real_eigenvalues(
    problem: &TransmissionProblem,
    window: (f64, f64),
    grid_points: usize,
) -> Result<Vec<EigenvalueRecord>> {
    Shooter::with_default_steps(problem)?.scan_real(window.0, window.1, grid_points)
}

pub fn count_eigenvalues_in_rectangle(
    problem: &TransmissionProblem,
    rect: &Rect,
    nodes_per_side: usize,
) -> Result<usize> {
    Shooter::with_default_steps(problem)?.count_in_rect(rect, nodes_per_side)
}

pub fn refine_complex_root(problem: &TransmissionProblem, seed: C64) -> Result<EigenvalueRecord> {
    let rec = Shooter::with_default_steps(problem)?.refine(seed)?;
    if (rec.value - seed).norm() > 1.0 {
        log::warn!(
            "root {} lies outside the unit disk around the seed {seed}",
            rec.value
        );
    }
    Ok(rec)
}

pub fn eigenfunction(
    problem: &TransmissionProblem,
    eig: &EigenvalueRecord,
    steps: usize,
) -> Result<BrokenFunction> {
    Shooter::new(problem, steps)?.eigenfunction(eig)
}

/// All eigenvalues with real part in the window, real and non-real.
pub fn locate_spectrum(
    problem: &TransmissionProblem,
    window: (f64, f64),
    grid_points: usize,
) -> Result<Vec<EigenvalueRecord>> {
    Shooter::with_default_steps(problem)?.locate(window.0, window.1, grid_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{condition_values, validate_problem, Coefficients, PerturbationSpec};

    fn decoupled() -> TransmissionProblem {
        validate_problem(Coefficients::dirichlet(1.0, 1.0), PerturbationSpec::Zero).unwrap()
    }

    fn coupled() -> TransmissionProblem {
        validate_problem(
            Coefficients::dirichlet(-1.0, 1.0).with_coupling(1.0, -1.0),
            PerturbationSpec::Zero,
        )
        .unwrap()
    }

    fn symmetric() -> TransmissionProblem {
        validate_problem(
            Coefficients::dirichlet(1.0, 4.0).with_coupling(2.0, -0.5),
            PerturbationSpec::Zero,
        )
        .unwrap()
    }

    #[test]
    fn cosine_basis_at_minus_pi_squared() {
        let p = decoupled();
        let fs = fundamental_system(&p, C64::from(-PI * PI), 512).unwrap();
        let (u, du) = fs.left[0].end();
        assert!((u - C64::from(-1.0)).norm() < 1e-9);
        assert!(du.norm() < 1e-8);
    }

    #[test]
    fn linear_basis_at_zero() {
        let p = decoupled();
        let fs = fundamental_system(&p, ZERO, 64).unwrap();
        let (u, du) = fs.left[1].end();
        assert!((u - ONE).norm() < 1e-14 && (du - ONE).norm() < 1e-14);
    }

    #[test]
    fn constant_multiplier_shifts_lambda() {
        let base = symmetric();
        let shifted = base
            .with_perturbation(PerturbationSpec::multiplication(|_| 1.7))
            .unwrap();
        let lam = C64::new(-3.0, 2.0);
        let d0 = Shooter::new(&base, 512).unwrap().determinant(lam - 1.7);
        let d1 = Shooter::new(&shifted, 512).unwrap().determinant(lam);
        assert!((d0 - d1).norm() <= 1e-12 * d0.norm().max(1.0));
    }

    #[test]
    fn rejects_kernel_and_short_runs() {
        let p = decoupled()
            .with_perturbation(PerturbationSpec::integral_kernel(|x, y| x * y))
            .unwrap();
        assert!(matches!(
            Shooter::new(&p, 128),
            Err(Error::NonlocalPerturbation)
        ));
        assert!(matches!(
            Shooter::new(&decoupled(), 10),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn determinant_of_decoupled_problem() {
        let p = decoupled();
        let d = characteristic_determinant(&p, C64::from(-PI * PI / 4.0)).unwrap();
        assert!(d.norm() <= 1e-9, "{d}");
        let d0 = characteristic_determinant(&p, ZERO).unwrap();
        assert!((d0.norm() - 1.0).abs() < 1e-12, "{d0}");
    }

    #[test]
    fn determinant_is_conjugate_symmetric() {
        let p = coupled()
            .with_perturbation(PerturbationSpec::first_order(|x| 0.3 * x))
            .unwrap();
        let s = Shooter::new(&p, 256).unwrap();
        for lam in [
            C64::new(3.0, 1.0),
            C64::new(-20.0, 7.5),
            C64::new(0.1, -40.0),
        ] {
            let a = s.determinant(lam.conj());
            let b = s.determinant(lam).conj();
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn wronskian_is_constant() {
        let p = coupled()
            .with_perturbation(PerturbationSpec::multiplication(|x| (PI * x).cos()))
            .unwrap();
        let fs = fundamental_system(&p, C64::new(12.0, 3.0), 1024).unwrap();
        for (piece, pk) in [(Piece::Left, -1.0), (Piece::Right, 1.0)] {
            let w = fs.wronskians(piece, pk);
            let w0 = w[0];
            let dev = w.iter().map(|z| (z - w0).norm()).fold(0.0, f64::max);
            assert!(dev <= 1e-8 * w0.norm(), "{piece:?}: {dev}");
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = coupled()
            .with_perturbation(PerturbationSpec::multiplication(|x| (PI * x).cos()))
            .unwrap();
        let lam = C64::new(40.0, 5.0);
        let d = |n| Shooter::new(&p, n).unwrap().determinant(lam);
        let reference = d(8 * 128);
        let ratio = (d(128) - reference).norm() / (d(256) - reference).norm();
        assert!((ratio - 16.0).abs() <= 4.0, "ratio {ratio}");
    }

    #[test]
    fn reduced_and_full_determinants_share_zeros() {
        let p = symmetric();
        let s = Shooter::new(&p, 1024).unwrap();
        let roots = s.scan_real(-70.0, -0.5, 400).unwrap();
        assert!(!roots.is_empty());
        for r in roots {
            let full = s.determinant(r.value).norm();
            let nearby = s.determinant(r.value + 0.05).norm();
            assert!(full <= 1e-6 * nearby, "{} {full} {nearby}", r.value);
        }
    }

    #[test]
    fn scan_finds_decoupled_double_roots() {
        let roots = scan_real_eigenvalues(&decoupled(), (-100.0, -0.1), 400).unwrap();
        let expected: Vec<f64> = (1..=3).map(|n| -((n as f64 - 0.5) * PI).powi(2)).collect();
        assert_eq!(roots.len(), 3, "{roots:?}");
        for (r, e) in roots.iter().rev().zip(&expected) {
            assert!(
                (r.value.re - e).abs() <= 1e-6 * e.abs(),
                "{} vs {e}",
                r.value
            );
            assert_eq!(r.multiplicity, 2);
        }
    }

    #[test]
    fn scan_finds_coupled_positive_roots() {
        let roots = scan_real_eigenvalues(&coupled(), (0.1, 200.0), 400).unwrap();
        assert!(roots.len() >= 3);
        // The interface coupling shifts the index by one half:
        // lambda_n ~ pi^2 (n + 1/2)^2 = pi^2 n^2 + O(n).
        for (k, r) in roots.iter().enumerate() {
            let n = (k + 1) as f64;
            let model = PI * PI * (n + 0.5).powi(2);
            assert!(
                (r.value.re - model).abs() <= 0.25 * model,
                "{} vs {model}",
                r.value
            );
        }
        assert!(roots.windows(2).all(|w| w[0].value.re < w[1].value.re));
    }

    #[test]
    fn scan_without_roots_is_empty_and_bad_window_errors() {
        let roots = scan_real_eigenvalues(&decoupled(), (-2.0, -0.1), 100).unwrap();
        assert!(roots.is_empty());
        assert!(matches!(
            scan_real_eigenvalues(&decoupled(), (1.0, 1.0), 100),
            Err(Error::WindowEmpty { .. })
        ));
    }

    #[test]
    fn counts_double_root_and_gap() {
        let p = decoupled();
        let first = Rect::new(-10.0, -1.0, -1.0, 1.0);
        assert_eq!(count_eigenvalues_in_rectangle(&p, &first, 64).unwrap(), 2);
        let gap = Rect::new(-20.0, -10.0, -1.0, 1.0);
        assert_eq!(count_eigenvalues_in_rectangle(&p, &gap, 64).unwrap(), 0);
        let both = Rect::new(-30.0, -1.0, -1.0, 1.0);
        let second = Rect::new(-30.0, -10.0, -1.0, 1.0);
        let a = count_eigenvalues_in_rectangle(&p, &first, 64).unwrap();
        let b = count_eigenvalues_in_rectangle(&p, &second, 64).unwrap();
        assert_eq!(
            count_eigenvalues_in_rectangle(&p, &both, 64).unwrap(),
            a + b
        );
    }

    #[test]
    fn refine_keeps_a_real_root() {
        let p = symmetric();
        let roots = scan_real_eigenvalues(&p, (-30.0, -5.0), 200).unwrap();
        let r = refine_complex_root(&p, roots[0].value).unwrap();
        assert!((r.value - roots[0].value).norm() <= 1e-9 * roots[0].value.norm());
        assert!(r.value.im.abs() <= 1e-9);
    }

    #[test]
    fn small_multiplier_moves_a_simple_root_slightly() {
        let p = symmetric();
        let root = scan_real_eigenvalues(&p, (-30.0, -5.0), 200).unwrap()[0].value;
        let q = p
            .with_perturbation(PerturbationSpec::multiplication(|x| 0.1 * (PI * x).cos()))
            .unwrap();
        let r = refine_complex_root(&q, root).unwrap();
        assert!((r.value - root).norm() <= 0.2);
    }

    #[test]
    fn refine_from_empty_region_is_flagged() {
        let p = decoupled();
        match refine_complex_root(&p, C64::new(-12.0, 0.0)) {
            Err(Error::NoConvergence { .. }) => {}
            Ok(r) => assert!((r.value - C64::new(-12.0, 0.0)).norm() > 1.0),
            Err(e) => panic!("{e}"),
        }
    }

    /// Fourth-order interior residual of `p u'' + q u - lambda u` in the discrete L2 norm.
    fn ode_residual(p: &TransmissionProblem, u: &BrokenFunction, lambda: C64) -> f64 {
        let piece = |v: &[C64], h: f64, pk: f64, x0: f64| {
            let mut s = 0.0;
            for i in 2..v.len() - 2 {
                let d2 = (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2])
                    / (12.0 * h * h);
                let x = x0 + i as f64 * h;
                let r = pk * d2 + p.perturbation().q(x) * v[i] - lambda * v[i];
                s += r.norm_sqr() * h;
            }
            s
        };
        (piece(u.left(), u.left_step(), p.p1(), -1.0)
            + piece(u.right(), u.right_step(), p.p2(), 0.0))
        .sqrt()
    }

    #[test]
    fn decoupled_eigenfunction() {
        let p = decoupled();
        let lam = -PI * PI / 4.0;
        let rec = EigenvalueRecord::shooting(C64::from(lam), 2, 0.0);
        let u = eigenfunction(&p, &rec, 2048).unwrap();
        assert!((u.l2_norm() - 1.0).abs() < 1e-12);
        assert!(ode_residual(&p, &u, rec.value) <= 1e-6);
        assert!(condition_values(&p, &u).max_abs() <= 1e-6);
    }

    #[test]
    fn coupled_eigenfunction_satisfies_interface() {
        let p = coupled();
        let rec = scan_real_eigenvalues(&p, (0.1, 30.0), 200).unwrap()[0];
        let u = eigenfunction(&p, &rec, 2048).unwrap();
        let t = u.traces();
        assert!((t.du_minus - t.u_plus).norm() <= 1e-7);
        assert!((t.du_plus + t.u_minus).norm() <= 1e-7);
        assert!(ode_residual(&p, &u, rec.value) <= 1e-6);
        let scaled = eigenfunction(
            &p,
            &EigenvalueRecord {
                residual: 1.0,
                ..rec
            },
            2048,
        )
        .unwrap();
        assert!((scaled.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locate_finds_complex_pair_of_nonsymmetric_problem() {
        let p = validate_problem(
            Coefficients::dirichlet(1.0, 1.0).with_coupling(1.0, 1.0),
            PerturbationSpec::Zero,
        )
        .unwrap();
        let s = Shooter::new(&p, 1024).unwrap();
        let all = s.locate(-10.0, 5.0, 200).unwrap();
        let complex: Vec<_> = all.iter().filter(|e| e.value.im.abs() > 1e-6).collect();
        assert_eq!(complex.len(), 2, "{all:?}");
        for e in &complex {
            assert!(s.reduced(e.value).norm() <= 1e-9);
        }
    }
}
