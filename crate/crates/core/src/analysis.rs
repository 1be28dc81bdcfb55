//! Branch assignment, asymptotic fits, counting functions and sector bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::problem::{StiffnessCase, TransmissionProblem};
use crate::shooting::{Branch, EigenvalueRecord};

/// An eigenvalue with its first 1-based index in its branch. A record of
/// multiplicity `m` occupies indices `index..index + m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexedEigenvalue {
    pub index: usize,
    pub record: EigenvalueRecord,
}

/// Eigenvalues split by asymptotic branch and sorted by modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchedSpectrum {
    pub case: StiffnessCase,
    /// Right half-plane when the stiffness signs differ, otherwise the whole spectrum.
    pub branch1: Vec<IndexedEigenvalue>,
    /// Left half-plane when the stiffness signs differ, otherwise empty.
    pub branch2: Vec<IndexedEigenvalue>,
    /// Members with `|Re lambda| <= 1e-9 |lambda|`, placed by the tie-break.
    pub ambiguous: Vec<C64>,
    pub warnings: Vec<String>,
}

impl BranchedSpectrum {
    /// Every record of both branches, in branch order.
    pub fn merged(&self) -> Vec<EigenvalueRecord> {
        self.branch1
            .iter()
            .chain(&self.branch2)
            .map(|e| e.record)
            .collect()
    }

    pub fn branch(&self, which: Branch) -> &[IndexedEigenvalue] {
        match which {
            Branch::Branch2 => &self.branch2,
            Branch::Branch1 | Branch::Single => &self.branch1,
        }
    }
}

/// `(n, lambda_n)` with every eigenvalue repeated by its multiplicity.
pub fn expand(branch: &[IndexedEigenvalue]) -> Vec<(usize, C64)> {
    branch
        .iter()
        .flat_map(|e| (0..e.record.multiplicity).map(move |k| (e.index + k, e.record.value)))
        .collect()
}

fn index_sorted(mut v: Vec<EigenvalueRecord>, tag: Branch) -> Vec<IndexedEigenvalue> {
    v.sort_by(|a, b| a.value.norm().total_cmp(&b.value.norm()));
    let mut next = 1;
    v.into_iter()
        .map(|mut record| {
            record.branch = tag;
            let e = IndexedEigenvalue {
                index: next,
                record,
            };
            next += record.multiplicity;
            e
        })
        .collect()
}

/// Splits by the sign of `Re lambda` when the stiffness signs differ.
/// Members on the imaginary axis go to branch1 when `Im lambda >= 0` and to
/// branch2 otherwise, and are listed as ambiguous.
pub fn assign_branches(
    spectrum: &[EigenvalueRecord],
    problem: &TransmissionProblem,
) -> Result<BranchedSpectrum> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("spectrum is empty".into()));
    }
    let case = problem.case();
    let mut warnings = Vec::new();
    let mut ambiguous = Vec::new();
    match case {
        StiffnessCase::SameSign => Ok(BranchedSpectrum {
            case,
            branch1: index_sorted(spectrum.to_vec(), Branch::Single),
            branch2: Vec::new(),
            ambiguous,
            warnings,
        }),
        StiffnessCase::OppositeSigns => {
            let mut b1 = Vec::new();
            let mut b2 = Vec::new();
            for e in spectrum {
                let z = e.value;
                if z.re.abs() <= 1e-9 * z.norm() {
                    ambiguous.push(z);
                    if z.im >= 0.0 {
                        b1.push(*e);
                    } else {
                        b2.push(*e);
                    }
                } else if z.re > 0.0 {
                    b1.push(*e);
                } else {
                    b2.push(*e);
                }
            }
            if !ambiguous.is_empty() {
                let msg = format!(
                    "{} eigenvalue(s) on the imaginary axis assigned by the sign of Im: {:?}",
                    ambiguous.len(),
                    ambiguous
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            if b1.is_empty() {
                warnings.push("branch1 (right half-plane) is empty".into());
            }
            if b2.is_empty() {
                warnings.push("branch2 (left half-plane) is empty".into());
            }
            Ok(BranchedSpectrum {
                case,
                branch1: index_sorted(b1, Branch::Branch1),
                branch2: index_sorted(b2, Branch::Branch2),
                ambiguous,
                warnings,
            })
        }
    }
}

/// Leading coefficients `c` in `lambda_n ~ c n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeadingCoefficients {
    /// Right half-plane branch, then left half-plane branch.
    Pair { branch1: f64, branch2: f64 },
    /// `interpretation` is set when both stiffness values are negative.
    Single { value: f64, interpretation: bool },
}

impl LeadingCoefficients {
    pub fn for_branch(&self, which: Branch) -> f64 {
        match (*self, which) {
            (LeadingCoefficients::Pair { branch2, .. }, Branch::Branch2) => branch2,
            (LeadingCoefficients::Pair { branch1, .. }, _) => branch1,
            (LeadingCoefficients::Single { value, .. }, _) => value,
        }
    }
}

/// Opposite signs: each piece carries its own branch with `-p_i pi^2`.
/// Same sign: the merged sequence grows like `-pi^2 p1 p2 / (sqrt|p1| + sqrt|p2|)^2`,
/// with the sign of the stiffness.
pub fn predicted_leading_coefficient(problem: &TransmissionProblem) -> LeadingCoefficients {
    let (p1, p2) = (problem.p1(), problem.p2());
    match problem.case() {
        StiffnessCase::OppositeSigns => {
            let (neg, pos) = if p1 < 0.0 { (p1, p2) } else { (p2, p1) };
            LeadingCoefficients::Pair {
                branch1: -neg * PI * PI,
                branch2: -pos * PI * PI,
            }
        }
        StiffnessCase::SameSign => {
            let (a, b) = (p1.abs(), p2.abs());
            let mag = PI * PI * a * b / (a.sqrt() + b.sqrt()).powi(2);
            if p1 > 0.0 {
                LeadingCoefficients::Single {
                    value: -mag,
                    interpretation: false,
                }
            } else {
                LeadingCoefficients::Single {
                    value: mag,
                    interpretation: true,
                }
            }
        }
    }
}

/// Absolute value of the stiffness that drives a branch.
pub fn branch_stiffness(problem: &TransmissionProblem, which: Branch) -> f64 {
    let (p1, p2) = (problem.p1(), problem.p2());
    let (neg, pos) = if p1 < 0.0 { (p1, p2) } else { (p2, p1) };
    match which {
        Branch::Branch2 => pos.abs(),
        _ => neg.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub leading_coefficient: f64,
    pub linear_coefficient: f64,
    pub predicted: f64,
    pub relative_error: f64,
    /// `max |Re lambda_n - predicted n^2| / n` over the tail.
    pub residual_bound_constant: f64,
    /// First and last index of the tail.
    pub fit_window: (usize, usize),
}

pub const DEFAULT_TAIL_START: usize = 10;

/// Least squares `Re lambda_n = a n^2 + b n` over `n >= tail_start`.
///
/// The linear and constant terms absorb index shifts such as
/// `pi^2 (n + 1/2)^2`, which a pure `a n^2` fit would misread as a few
/// percent of error in `a`.
pub fn fit_asymptotics(
    branch: &[(usize, C64)],
    predicted: f64,
    tail_start: usize,
) -> Result<AsymptoticFit> {
    let tail: Vec<(f64, f64)> = branch
        .iter()
        .filter(|(n, _)| *n >= tail_start)
        .map(|&(n, z)| (n as f64, z.re))
        .collect();
    let needed = tail_start + 10;
    let max_index = branch.iter().map(|e| e.0).max().unwrap_or(0);
    if max_index < needed || tail.len() < 3 {
        return Err(Error::TooFewEigenvalues {
            needed,
            got: max_index,
        });
    }
    // Model a n^2 + b n: the law is c n^2 + O(n), and a constant term lies
    // inside O(n). Normal equations in t = n / scale.
    let scale = tail.iter().map(|t| t.0).fold(0.0, f64::max);
    let (mut g11, mut g12, mut g22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, y) in &tail {
        let t = n / scale;
        g11 += t * t * t * t;
        g12 += t * t * t;
        g22 += t * t;
        r1 += t * t * y;
        r2 += t * y;
    }
    let det = g11 * g22 - g12 * g12;
    if det <= f64::EPSILON * g11 * g22 {
        return Err(Error::InvalidInput("degenerate fit window".into()));
    }
    let a = (r1 * g22 - r2 * g12) / det / (scale * scale);
    let b = (g11 * r2 - g12 * r1) / det / scale;
    let residual_bound_constant = tail
        .iter()
        .map(|&(n, y)| (y - predicted * n * n).abs() / n)
        .fold(0.0, f64::max);
    Ok(AsymptoticFit {
        leading_coefficient: a,
        linear_coefficient: b,
        predicted,
        relative_error: (a - predicted).abs() / predicted.abs(),
        residual_bound_constant,
        fit_window: (tail_start, max_index),
    })
}

/// Region of the plane used by [`counting_function`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// The whole plane.
    All,
    /// `Re lambda >= 0`.
    PositiveReal,
    /// `Re lambda < 0`.
    NegativeReal,
    /// `|arg lambda - direction| <= half_opening`.
    Angle { direction: f64, half_opening: f64 },
}

impl Sector {
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Sector::All => true,
            Sector::PositiveReal => z.re >= 0.0,
            Sector::NegativeReal => z.re < 0.0,
            Sector::Angle {
                direction,
                half_opening,
            } => {
                let d = (z.arg() - direction + PI).rem_euclid(2.0 * PI) - PI;
                d.abs() <= half_opening
            }
        }
    }
}

/// Eigenvalues with `|lambda| <= r` in the sector, with multiplicity.
pub fn counting_function(spectrum: &[EigenvalueRecord], r: f64, sector: Sector) -> usize {
    spectrum
        .iter()
        .filter(|e| e.value.norm() <= r && sector.contains(e.value))
        .map(|e| e.multiplicity)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingRow {
    pub r: f64,
    pub count: usize,
    /// `sqrt(r) / (pi sqrt|p|)`.
    pub predicted: f64,
    /// `sqrt(r) / sqrt(|p| pi)`, the radical placed over `pi` as well.
    pub alternate_predicted: f64,
    /// `count / predicted`, absent when the count is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingLawTable {
    pub branch1: Vec<CountingRow>,
    pub branch2: Vec<CountingRow>,
    /// Ratios of both branches at the largest radius lie in `[0.9, 1.1]`.
    pub pass: bool,
}

fn counting_rows(
    branch: &[IndexedEigenvalue],
    stiffness: f64,
    r_list: &[f64],
) -> Result<Vec<CountingRow>> {
    let records: Vec<EigenvalueRecord> = branch.iter().map(|e| e.record).collect();
    let reach = records.iter().map(|e| e.value.norm()).fold(0.0, f64::max);
    let r_max = r_list.iter().copied().fold(0.0, f64::max);
    if reach < r_max {
        return Err(Error::SpectrumTooShort {
            covered: reach,
            requested: r_max,
        });
    }
    Ok(r_list
        .iter()
        .map(|&r| {
            let count = counting_function(&records, r, Sector::All);
            let predicted = r.sqrt() / (PI * stiffness.sqrt());
            CountingRow {
                r,
                count,
                predicted,
                alternate_predicted: r.sqrt() / (stiffness * PI).sqrt(),
                ratio: (count > 0).then(|| count as f64 / predicted),
            }
        })
        .collect())
}

/// Counting law `N(r) ~ sqrt(r) / (pi sqrt|p_i|)` for each branch.
pub fn counting_law_check(
    branched: &BranchedSpectrum,
    problem: &TransmissionProblem,
    r_list: &[f64],
) -> Result<CountingLawTable> {
    if branched.case != StiffnessCase::OppositeSigns {
        return Err(Error::PreconditionViolated(
            "the counting law is stated for stiffness values of opposite sign".into(),
        ));
    }
    if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let b1 = counting_rows(
        &branched.branch1,
        branch_stiffness(problem, Branch::Branch1),
        r_list,
    )?;
    let b2 = counting_rows(
        &branched.branch2,
        branch_stiffness(problem, Branch::Branch2),
        r_list,
    )?;
    let ok = |rows: &[CountingRow]| {
        rows.iter()
            .max_by(|a, b| a.r.total_cmp(&b.r))
            .and_then(|row| row.ratio)
            .is_some_and(|x| (0.9..=1.1).contains(&x))
    };
    let pass = ok(&b1) && ok(&b2);
    Ok(CountingLawTable {
        branch1: b1,
        branch2: b2,
        pass,
    })
}

/// Smallest `b` with `|Im lambda| <= b |lambda|^exponent` over `|lambda| >= 1`.
pub fn sector_enclosure(spectrum: &[EigenvalueRecord], exponent: f64) -> f64 {
    spectrum
        .iter()
        .filter(|e| e.value.norm() >= 1.0)
        .map(|e| e.value.im.abs() / e.value.norm().powf(exponent))
        .fold(0.0, f64::max)
}
