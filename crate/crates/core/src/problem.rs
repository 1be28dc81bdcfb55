//! Problem data model, condition functionals and domain projection.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Lu4, C64, ZERO};

/// The ten real coefficients of the differential expression and conditions.
///
/// ```text
/// L1 u = alpha0 u(-1) + alpha1 u'(-1)
/// L2 u = beta0 u(1) + beta1 u'(1)
/// L3 u = u'(0-) - gamma0 u(0-) - delta0 u(0+)
/// L4 u = u'(0+) - gamma1 u(0-) - delta1 u(0+)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub p1: f64,
    pub p2: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub gamma0: f64,
    pub delta0: f64,
    pub gamma1: f64,
    pub delta1: f64,
}

impl Coefficients {
    /// Dirichlet ends, no interface coupling.
    pub fn dirichlet(p1: f64, p2: f64) -> Self {
        Coefficients {
            p1,
            p2,
            alpha0: 1.0,
            alpha1: 0.0,
            beta0: 1.0,
            beta1: 0.0,
            gamma0: 0.0,
            delta0: 0.0,
            gamma1: 0.0,
            delta1: 0.0,
        }
    }

    /// Same ends with interface coupling `u'(0-) = delta0 u(0+)`, `u'(0+) = gamma1 u(0-)`.
    pub fn with_coupling(mut self, delta0: f64, gamma1: f64) -> Self {
        self.delta0 = delta0;
        self.gamma1 = gamma1;
        self
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The bounded perturbation `A`.
#[derive(Clone, Default)]
pub enum PerturbationSpec {
    #[default]
    Zero,
    /// `(A u)(x) = q(x) u(x)`
    Multiplication(RealFn),
    /// `(A u)(x) = c(x) u'(x)`
    FirstOrder(RealFn),
    /// `(A u)(x) = integral of K(x, y) u(y) over [-1, 1]`
    IntegralKernel(KernelFn),
}

impl PerturbationSpec {
    pub fn multiplication(q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PerturbationSpec::Multiplication(Arc::new(q))
    }

    pub fn first_order(c: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PerturbationSpec::FirstOrder(Arc::new(c))
    }

    pub fn integral_kernel(k: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        PerturbationSpec::IntegralKernel(Arc::new(k))
    }

    /// Local perturbations act pointwise on `u` and `u'`.
    pub fn is_local(&self) -> bool {
        !matches!(self, PerturbationSpec::IntegralKernel(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PerturbationSpec::Zero)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PerturbationSpec::Zero => "zero",
            PerturbationSpec::Multiplication(_) => "multiplication",
            PerturbationSpec::FirstOrder(_) => "first_order",
            PerturbationSpec::IntegralKernel(_) => "integral_kernel",
        }
    }

    /// Multiplier `q(x)`, zero for the other variants.
    pub fn q(&self, x: f64) -> f64 {
        match self {
            PerturbationSpec::Multiplication(q) => q(x),
            _ => 0.0,
        }
    }

    /// First-order coefficient `c(x)`, zero for the other variants.
    pub fn c(&self, x: f64) -> f64 {
        match self {
            PerturbationSpec::FirstOrder(c) => c(x),
            _ => 0.0,
        }
    }

    fn check_bounded(&self) -> Result<()> {
        const SAMPLES: usize = 401;
        let xs = (0..SAMPLES).map(|i| -1.0 + 2.0 * i as f64 / (SAMPLES - 1) as f64);
        match self {
            PerturbationSpec::Zero => Ok(()),
            PerturbationSpec::Multiplication(f) | PerturbationSpec::FirstOrder(f) => {
                for x in xs {
                    let v = f(x);
                    if !v.is_finite() {
                        return Err(Error::UnboundedPerturbation(format!(
                            "{} coefficient is {v} at x = {x}",
                            self.kind()
                        )));
                    }
                }
                Ok(())
            }
            PerturbationSpec::IntegralKernel(k) => {
                const KS: usize = 81;
                for i in 0..KS {
                    for j in 0..KS {
                        let x = -1.0 + 2.0 * i as f64 / (KS - 1) as f64;
                        let y = -1.0 + 2.0 * j as f64 / (KS - 1) as f64;
                        let v = k(x, y);
                        if !v.is_finite() {
                            return Err(Error::UnboundedPerturbation(format!(
                                "kernel is {v} at ({x}, {y})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PerturbationSpec::{}", self.kind())
    }
}

/// Relative sign of the two stiffness coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessCase {
    OppositeSigns,
    SameSign,
}

/// A validated transmission problem. Construct with [`validate_problem`].
#[derive(Debug, Clone)]
pub struct TransmissionProblem {
    coefficients: Coefficients,
    perturbation: PerturbationSpec,
}

impl TransmissionProblem {
    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn perturbation(&self) -> &PerturbationSpec {
        &self.perturbation
    }

    pub fn p1(&self) -> f64 {
        self.coefficients.p1
    }

    pub fn p2(&self) -> f64 {
        self.coefficients.p2
    }

    pub fn case(&self) -> StiffnessCase {
        if self.coefficients.p1 * self.coefficients.p2 < 0.0 {
            StiffnessCase::OppositeSigns
        } else {
            StiffnessCase::SameSign
        }
    }

    /// The same coefficients with the perturbation removed.
    pub fn unperturbed(&self) -> TransmissionProblem {
        TransmissionProblem {
            coefficients: self.coefficients,
            perturbation: PerturbationSpec::Zero,
        }
    }

    /// The same coefficients with another perturbation.
    pub fn with_perturbation(&self, perturbation: PerturbationSpec) -> Result<TransmissionProblem> {
        validate_problem(self.coefficients, perturbation)
    }
}

/// Checks the coefficient constraints and samples the perturbation for finiteness.
pub fn validate_problem(
    coefficients: Coefficients,
    perturbation: PerturbationSpec,
) -> Result<TransmissionProblem> {
    let c = coefficients;
    let all = [
        c.p1, c.p2, c.alpha0, c.alpha1, c.beta0, c.beta1, c.gamma0, c.delta0, c.gamma1, c.delta1,
    ];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("coefficients must be finite".into()));
    }
    if c.p1 == 0.0 || c.p2 == 0.0 {
        return Err(Error::ZeroStiffness { p1: c.p1, p2: c.p2 });
    }
    if c.alpha0 == 0.0 && c.alpha1 == 0.0 {
        return Err(Error::DegenerateBoundary { side: "left" });
    }
    if c.beta0 == 0.0 && c.beta1 == 0.0 {
        return Err(Error::DegenerateBoundary { side: "right" });
    }
    perturbation.check_bounded()?;
    Ok(TransmissionProblem {
        coefficients,
        perturbation,
    })
}

/// Coefficient of the interface term in the Lagrange identity,
/// `p1 delta0 + p2 gamma1`. The unperturbed operator is symmetric in
/// `L2(-1, 1)` exactly when this vanishes.
///
/// Integrating by parts on each piece leaves `p1 W(0-) - p2 W(0+)` with
/// `W = u' conj(v) - u conj(v')`; substituting the interface conditions
/// gives `(p1 delta0 + p2 gamma1) (u(0+) conj(v(0-)) - u(0-) conj(v(0+)))`.
pub fn symmetry_defect(problem: &TransmissionProblem) -> f64 {
    let c = &problem.coefficients;
    c.p1 * c.delta0 + c.p2 * c.gamma1
}

/// The sign-flipped combination `p1 delta0 - p2 gamma1`. Reported alongside
/// [`symmetry_defect`] so both readings of the interface criterion are visible.
pub fn sign_flipped_symmetry_defect(problem: &TransmissionProblem) -> f64 {
    let c = &problem.coefficients;
    c.p1 * c.delta0 - c.p2 * c.gamma1
}

/// One-sided traces at the interior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTraces {
    pub u_minus: C64,
    pub du_minus: C64,
    pub u_plus: C64,
    pub du_plus: C64,
}

impl InterfaceTraces {
    fn combine(&self, a: C64, other: &InterfaceTraces, b: C64) -> InterfaceTraces {
        InterfaceTraces {
            u_minus: a * self.u_minus + b * other.u_minus,
            du_minus: a * self.du_minus + b * other.du_minus,
            u_plus: a * self.u_plus + b * other.u_plus,
            du_plus: a * self.du_plus + b * other.du_plus,
        }
    }
}

/// A function on `[-1, 0) U (0, 1]` sampled on a uniform grid of each piece,
/// carrying its own one-sided traces at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenFunction {
    left: Vec<C64>,
    right: Vec<C64>,
    traces: InterfaceTraces,
}

/// Second-order one-sided first derivative at the start of `u`.
fn forward_derivative(u: &[C64], h: f64) -> C64 {
    (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
}

/// Second-order one-sided first derivative at the end of `u`.
fn backward_derivative(u: &[C64], h: f64) -> C64 {
    let n = u.len();
    (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h)
}

fn trapezoid(values: impl ExactSizeIterator<Item = C64>, h: f64) -> C64 {
    let n = values.len();
    let mut s = ZERO;
    for (i, v) in values.enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        s += v * w;
    }
    s * h
}

impl BrokenFunction {
    pub const MIN_POINTS: usize = 3;

    /// Builds a function from samples and explicit interface traces.
    pub fn new(left: Vec<C64>, right: Vec<C64>, traces: InterfaceTraces) -> Result<Self> {
        let got = left.len().min(right.len());
        if got < Self::MIN_POINTS {
            return Err(Error::GridTooCoarse {
                needed: Self::MIN_POINTS,
                got,
            });
        }
        Ok(BrokenFunction {
            left,
            right,
            traces,
        })
    }

    /// Builds a function from samples, reconstructing the traces by one-sided
    /// second-order differences.
    pub fn from_samples(left: Vec<C64>, right: Vec<C64>) -> Result<Self> {
        let got = left.len().min(right.len());
        if got < Self::MIN_POINTS {
            return Err(Error::GridTooCoarse {
                needed: Self::MIN_POINTS,
                got,
            });
        }
        let hl = 1.0 / (left.len() - 1) as f64;
        let hr = 1.0 / (right.len() - 1) as f64;
        let traces = InterfaceTraces {
            u_minus: left[left.len() - 1],
            du_minus: backward_derivative(&left, hl),
            u_plus: right[0],
            du_plus: forward_derivative(&right, hr),
        };
        Ok(BrokenFunction {
            left,
            right,
            traces,
        })
    }

    /// Samples closures returning `(u, u')` on `n` cells per piece; traces
    /// come from the derivative closures.
    pub fn sample(
        n: usize,
        left: impl Fn(f64) -> (C64, C64),
        right: impl Fn(f64) -> (C64, C64),
    ) -> Result<Self> {
        if n + 1 < Self::MIN_POINTS {
            return Err(Error::GridTooCoarse {
                needed: Self::MIN_POINTS,
                got: n + 1,
            });
        }
        let h = 1.0 / n as f64;
        let l: Vec<C64> = (0..=n).map(|i| left(-1.0 + i as f64 * h).0).collect();
        let r: Vec<C64> = (0..=n).map(|i| right(i as f64 * h).0).collect();
        let (um, dum) = left(0.0);
        let (up, dup) = right(0.0);
        BrokenFunction::new(
            l,
            r,
            InterfaceTraces {
                u_minus: um,
                du_minus: dum,
                u_plus: up,
                du_plus: dup,
            },
        )
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::sample(n, |_| (ZERO, ZERO), |_| (ZERO, ZERO))
    }

    pub fn left(&self) -> &[C64] {
        &self.left
    }

    pub fn right(&self) -> &[C64] {
        &self.right
    }

    pub fn traces(&self) -> &InterfaceTraces {
        &self.traces
    }

    pub fn left_step(&self) -> f64 {
        1.0 / (self.left.len() - 1) as f64
    }

    pub fn right_step(&self) -> f64 {
        1.0 / (self.right.len() - 1) as f64
    }

    /// Grid coordinates of the left samples, from -1 to 0.
    pub fn left_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.left_step();
        (0..self.left.len()).map(move |i| -1.0 + i as f64 * h)
    }

    /// Grid coordinates of the right samples, from 0 to 1.
    pub fn right_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.right_step();
        (0..self.right.len()).map(move |i| i as f64 * h)
    }

    pub fn same_grid(&self, other: &BrokenFunction) -> bool {
        self.left.len() == other.left.len() && self.right.len() == other.right.len()
    }

    /// `u'(-1)` by a one-sided second-order difference.
    pub fn derivative_at_left_end(&self) -> C64 {
        forward_derivative(&self.left, self.left_step())
    }

    /// `u'(1)` by a one-sided second-order difference.
    pub fn derivative_at_right_end(&self) -> C64 {
        backward_derivative(&self.right, self.right_step())
    }

    /// `a self + b other`, traces included.
    pub fn combine(&self, a: C64, other: &BrokenFunction, b: C64) -> Result<BrokenFunction> {
        if !self.same_grid(other) {
            return Err(Error::InvalidInput(
                "broken functions live on different grids".into(),
            ));
        }
        let mix = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        Ok(BrokenFunction {
            left: mix(&self.left, &other.left),
            right: mix(&self.right, &other.right),
            traces: self.traces.combine(a, &other.traces, b),
        })
    }

    pub fn scale(&self, a: C64) -> BrokenFunction {
        BrokenFunction {
            left: self.left.iter().map(|u| a * u).collect(),
            right: self.right.iter().map(|u| a * u).collect(),
            traces: self.traces.combine(a, &self.traces, ZERO),
        }
    }

    /// `integral of u conj(v)` by the trapezoid rule on each piece.
    pub fn inner(&self, other: &BrokenFunction) -> Result<C64> {
        if !self.same_grid(other) {
            return Err(Error::InvalidInput(
                "broken functions live on different grids".into(),
            ));
        }
        let l = trapezoid(
            self.left.iter().zip(&other.left).map(|(u, v)| u * v.conj()),
            self.left_step(),
        );
        let r = trapezoid(
            self.right
                .iter()
                .zip(&other.right)
                .map(|(u, v)| u * v.conj()),
            self.right_step(),
        );
        Ok(l + r)
    }

    pub fn l2_norm(&self) -> f64 {
        let l = trapezoid(
            self.left.iter().map(|u| C64::from(u.norm_sqr())),
            self.left_step(),
        );
        let r = trapezoid(
            self.right.iter().map(|u| C64::from(u.norm_sqr())),
            self.right_step(),
        );
        (l.re + r.re).sqrt()
    }

    /// Largest sample modulus.
    pub fn max_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Values of the four condition functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionValues {
    pub l1: C64,
    pub l2: C64,
    pub l3: C64,
    pub l4: C64,
}

impl ConditionValues {
    pub fn as_array(&self) -> [C64; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Evaluates `L1..L4` on `u`. End derivatives use one-sided second-order
/// differences; interface data come from the stored traces.
pub fn condition_values(problem: &TransmissionProblem, u: &BrokenFunction) -> ConditionValues {
    let c = &problem.coefficients;
    let t = &u.traces;
    ConditionValues {
        l1: c.alpha0 * u.left[0] + c.alpha1 * u.derivative_at_left_end(),
        l2: c.beta0 * u.right[u.right.len() - 1] + c.beta1 * u.derivative_at_right_end(),
        l3: t.du_minus - c.gamma0 * t.u_minus - c.delta0 * t.u_plus,
        l4: t.du_plus - c.gamma1 * t.u_minus - c.delta1 * t.u_plus,
    }
}

/// One Fourier mode `cos_coef cos(frequency x) + sin_coef sin(frequency x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub frequency: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
}

/// A smooth function on one piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPiece {
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
    Trigonometric {
        constant: f64,
        modes: Vec<TrigMode>,
    },
}

impl SeedPiece {
    pub fn sine(frequency: f64) -> Self {
        SeedPiece::Trigonometric {
            constant: 0.0,
            modes: vec![TrigMode {
                frequency,
                cos_coef: 0.0,
                sin_coef: 1.0,
            }],
        }
    }

    pub fn constant(c: f64) -> Self {
        SeedPiece::Polynomial(vec![c])
    }

    /// Value and first two derivatives.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            SeedPiece::Polynomial(coef) => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &a in coef.iter().rev() {
                    d2 = d2 * x + 2.0 * d1;
                    d1 = d1 * x + v;
                    v = v * x + a;
                }
                (v, d1, d2)
            }
            SeedPiece::Trigonometric { constant, modes } => {
                let (mut v, mut d1, mut d2) = (*constant, 0.0, 0.0);
                for m in modes {
                    let (s, c) = (m.frequency * x).sin_cos();
                    let w = m.frequency;
                    v += m.cos_coef * c + m.sin_coef * s;
                    d1 += w * (-m.cos_coef * s + m.sin_coef * c);
                    d2 -= w * w * (m.cos_coef * c + m.sin_coef * s);
                }
                (v, d1, d2)
            }
        }
    }

    /// Random trigonometric piece with frequencies `pi k`, `k = 1..=modes`,
    /// and coefficients uniform in `[-1, 1]`.
    pub fn random_trig<R: Rng + ?Sized>(rng: &mut R, modes: usize) -> Self {
        SeedPiece::Trigonometric {
            constant: rng.gen_range(-1.0..1.0),
            modes: (1..=modes)
                .map(|k| TrigMode {
                    frequency: std::f64::consts::PI * k as f64,
                    cos_coef: rng.gen_range(-1.0..1.0),
                    sin_coef: rng.gen_range(-1.0..1.0),
                })
                .collect(),
        }
    }
}

/// Seed pieces on `[-1, 0]` and `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub left: SeedPiece,
    pub right: SeedPiece,
}

impl Seed {
    pub fn new(left: SeedPiece, right: SeedPiece) -> Self {
        Seed { left, right }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, modes: usize) -> Self {
        Seed {
            left: SeedPiece::random_trig(rng, modes),
            right: SeedPiece::random_trig(rng, modes),
        }
    }

    /// Samples the seed on `n` cells per piece with exact interface traces.
    pub fn sample(&self, n: usize) -> Result<BrokenFunction> {
        let f = |p: &SeedPiece, x: f64| {
            let (v, d, _) = p.eval(x);
            (C64::from(v), C64::from(d))
        };
        BrokenFunction::sample(n, |x| f(&self.left, x), |x| f(&self.right, x))
    }
}

/// Cubic Hermite basis on `[0, 1]`: values and first derivatives of
/// `h00, h10, h01, h11`.
fn hermite(s: f64) -> ([f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [
            2.0 * s3 - 3.0 * s2 + 1.0,
            s3 - 2.0 * s2 + s,
            -2.0 * s3 + 3.0 * s2,
            s3 - s2,
        ],
        [
            6.0 * s2 - 6.0 * s,
            3.0 * s2 - 4.0 * s + 1.0,
            -6.0 * s2 + 6.0 * s,
            3.0 * s2 - 2.0 * s,
        ],
    )
}

/// Result of [`project_to_domain_with_correction`].
#[derive(Debug, Clone)]
pub struct DomainProjection {
    pub function: BrokenFunction,
    /// Coefficients of the four cubic correctors.
    pub correction: [C64; 4],
    pub condition_number: f64,
}

const CORRECTION_CONDITION_LIMIT: f64 = 1e12;

/// Samples the seed on `n` cells per piece and adds a cubic correction so
/// that all four discrete condition functionals vanish.
pub fn project_to_domain(
    problem: &TransmissionProblem,
    seed: &Seed,
    n: usize,
) -> Result<BrokenFunction> {
    project_to_domain_with_correction(problem, seed, n).map(|p| p.function)
}

pub fn project_to_domain_with_correction(
    problem: &TransmissionProblem,
    seed: &Seed,
    n: usize,
) -> Result<DomainProjection> {
    let base = seed.sample(n)?;
    let c = &problem.coefficients;
    let na = c.alpha0 * c.alpha0 + c.alpha1 * c.alpha1;
    let (a, b) = (c.alpha0 / na, c.alpha1 / na);
    let nb = c.beta0 * c.beta0 + c.beta1 * c.beta1;
    let (a2, b2) = (c.beta0 / nb, c.beta1 / nb);

    // Corrector k is a cubic on one piece, zero on the other. Each one
    // targets a single condition: phi1 at -1, phi2 via u'(0-), phi3 via
    // u'(0+), phi4 at 1.
    let left_piece = |w: [f64; 4]| {
        move |x: f64| {
            let (h, dh) = hermite(x + 1.0);
            let v: f64 = (0..4).map(|i| w[i] * h[i]).sum();
            let d: f64 = (0..4).map(|i| w[i] * dh[i]).sum();
            (C64::from(v), C64::from(d))
        }
    };
    let right_piece = |w: [f64; 4]| {
        move |x: f64| {
            let (h, dh) = hermite(x);
            let v: f64 = (0..4).map(|i| w[i] * h[i]).sum();
            let d: f64 = (0..4).map(|i| w[i] * dh[i]).sum();
            (C64::from(v), C64::from(d))
        }
    };
    let zero = |_: f64| (ZERO, ZERO);
    let phis = [
        BrokenFunction::sample(n, left_piece([a, b, 0.0, 0.0]), zero)?,
        BrokenFunction::sample(n, left_piece([0.0, 0.0, 0.0, 1.0]), zero)?,
        BrokenFunction::sample(n, zero, right_piece([0.0, 1.0, 0.0, 0.0]))?,
        BrokenFunction::sample(n, zero, right_piece([0.0, 0.0, a2, b2]))?,
    ];

    let mut m = [[ZERO; 4]; 4];
    for (k, phi) in phis.iter().enumerate() {
        let cv = condition_values(problem, phi).as_array();
        for i in 0..4 {
            m[i][k] = cv[i];
        }
    }
    let lu = Lu4::new(m);
    let condition = lu.condition(&m);
    if !(condition <= CORRECTION_CONDITION_LIMIT) {
        return Err(Error::SingularCorrection { condition });
    }
    let rhs = condition_values(problem, &base).as_array().map(|z| -z);
    let coef = lu
        .solve(rhs)
        .ok_or(Error::SingularCorrection { condition })?;

    let mut u = base;
    for (k, phi) in phis.iter().enumerate() {
        if coef[k] != ZERO {
            u = u.combine(crate::linalg::ONE, phi, coef[k])?;
        }
    }
    Ok(DomainProjection {
        function: u,
        correction: coef,
        condition_number: condition,
    })
}
