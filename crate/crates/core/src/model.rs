//! Problem data, partitions of the interval and their deformation metrics.
//!
//! A partition stands for a piecewise-affine deformation of the reference
//! grid `P_k` (cells of length `1/k`) onto `[a, b]`. Everything the solver
//! needs depends only on the cell images, so a partition is stored as its
//! breakpoints plus the alternating cell signs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One additive term of the forcing `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingTerm {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[i] x^i`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `amplitude · sin(frequency · x + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sign(sin(k π (x − a)/(b − a)))`, with the sign taken per
    /// nodal interval so it never vanishes.
    SignOfEigenfunction {
        amplitude: f64,
        k: usize,
        a: f64,
        b: f64,
    },
}

impl ForcingTerm {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ForcingTerm::Constant { value } => *value,
            ForcingTerm::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ForcingTerm::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).sin(),
            ForcingTerm::SignOfEigenfunction { amplitude, k, a, b } => {
                amplitude * eigen_sign(*k, *a, *b, x)
            }
        }
    }

    /// Derivative in `x`; zero for the piecewise-constant kind away from jumps.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ForcingTerm::Constant { .. } | ForcingTerm::SignOfEigenfunction { .. } => 0.0,
            ForcingTerm::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c),
            ForcingTerm::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * frequency * (frequency * x + phase).cos(),
        }
    }
}

impl ForcingTerm {
    /// Piecewise-constant terms are integrated exactly against hat functions.
    pub fn is_step(&self) -> bool {
        matches!(self, ForcingTerm::SignOfEigenfunction { .. })
    }

    /// Jump locations and sizes `w(x+) − w(x−)`.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        match self {
            ForcingTerm::SignOfEigenfunction { amplitude, k, a, b } => (1..*k)
                .map(|i| {
                    let x = a + i as f64 * (b - a) / *k as f64;
                    let size = if i % 2 == 1 { -2.0 } else { 2.0 };
                    (x, size * amplitude)
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// `∫ w φ` for the hat `φ` with support `[x0, x2]` and peak at `x1`.
    /// Exact for step terms; lumped `½(x2 − x0) w(x1)` otherwise.
    pub fn hat_integral(&self, x0: f64, x1: f64, x2: f64) -> f64 {
        if !self.is_step() {
            return 0.5 * (x2 - x0) * self.eval(x1);
        }
        let cuts = self.jumps();
        let ramp = |lo: f64, hi: f64, rising: bool| {
            let h = hi - lo;
            let mut pts = vec![lo];
            pts.extend(cuts.iter().map(|c| c.0).filter(|&c| c > lo && c < hi));
            pts.push(hi);
            pts.windows(2)
                .map(|w| {
                    let g = self.eval(0.5 * (w[0] + w[1]));
                    let area = if rising {
                        ((w[1] - lo).powi(2) - (w[0] - lo).powi(2)) / (2.0 * h)
                    } else {
                        ((hi - w[0]).powi(2) - (hi - w[1]).powi(2)) / (2.0 * h)
                    };
                    g * area
                })
                .sum::<f64>()
        };
        ramp(x0, x1, true) + ramp(x1, x2, false)
    }
}

/// Sign of `sin(k π (x − a)/(b − a))` resolved by nodal interval.
pub fn eigen_sign(k: usize, a: f64, b: f64, x: f64) -> f64 {
    let s = (k as f64 * (x - a) / (b - a)).floor();
    let i = s.clamp(0.0, k.saturating_sub(1) as f64) as i64;
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The forcing `w` as a finite sum of bounded piecewise-smooth terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub terms: Vec<ForcingTerm>,
}

impl ForcingSpec {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: vec![ForcingTerm::Constant { value }],
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            terms: vec![ForcingTerm::Sinusoid {
                amplitude,
                frequency,
                phase,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match t {
            ForcingTerm::Constant { value } => *value == 0.0,
            ForcingTerm::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            ForcingTerm::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            ForcingTerm::SignOfEigenfunction { amplitude, .. } => *amplitude == 0.0,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.derivative(x)).sum()
    }

    /// Load entry `∫ w φ` for the hat on `[x0, x2]` peaking at `x1`.
    pub fn hat_integral(&self, x0: f64, x1: f64, x2: f64) -> f64 {
        self.terms.iter().map(|t| t.hat_integral(x0, x1, x2)).sum()
    }

    /// Jumps strictly inside `(lo, hi)`.
    pub fn jumps_in(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.terms
            .iter()
            .flat_map(|t| t.jumps())
            .filter(|&(x, _)| x > lo && x < hi)
            .collect()
    }

    /// The same forcing seen from a domain shifted right by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                ForcingTerm::Constant { .. } => t.clone(),
                ForcingTerm::Polynomial { coeffs } => {
                    // p(x - s) expanded by Horner-style synthetic composition
                    let mut out = vec![0.0; coeffs.len()];
                    for c in coeffs.iter().rev() {
                        // out = out * (x - s) + c
                        let mut next = vec![0.0; coeffs.len()];
                        for (i, v) in out.iter().enumerate() {
                            if i + 1 < next.len() {
                                next[i + 1] += v;
                            }
                            next[i] -= shift * v;
                        }
                        next[0] += c;
                        out = next;
                    }
                    ForcingTerm::Polynomial { coeffs: out }
                }
                ForcingTerm::Sinusoid {
                    amplitude,
                    frequency,
                    phase,
                } => ForcingTerm::Sinusoid {
                    amplitude: *amplitude,
                    frequency: *frequency,
                    phase: phase - frequency * shift,
                },
                ForcingTerm::SignOfEigenfunction { amplitude, k, a, b } => {
                    ForcingTerm::SignOfEigenfunction {
                        amplitude: *amplitude,
                        k: *k,
                        a: a + shift,
                        b: b + shift,
                    }
                }
            })
            .collect();
        Self { terms }
    }
}

/// `−u″ = c₊(u⁺)ᵖ − c₋(u⁻)ᵖ + w` on `(a, b)` with `u(a) = u(b) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    #[serde(default)]
    pub forcing: ForcingSpec,
}

impl ProblemSpec {
    pub fn new(a: f64, b: f64, p: f64, c_plus: f64, c_minus: f64, forcing: ForcingSpec) -> Result<Self> {
        let spec = Self {
            a,
            b,
            p,
            c_plus,
            c_minus,
            forcing,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric problem on `(a, b)`.
    pub fn symmetric(a: f64, b: f64, p: f64, forcing: ForcingSpec) -> Result<Self> {
        Self::new(a, b, p, 1.0, 1.0, forcing)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.p, self.c_plus, self.c_minus]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProblem("non-finite parameter".into()));
        }
        if !(self.b > self.a) {
            return Err(Error::InvalidProblem(format!("need b > a, got [{}, {}]", self.a, self.b)));
        }
        if !(self.p > 1.0) {
            return Err(Error::InvalidProblem(format!("need p > 1, got {}", self.p)));
        }
        if !(self.c_plus > 0.0 && self.c_minus > 0.0) {
            return Err(Error::InvalidProblem("need c_plus > 0 and c_minus > 0".into()));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// `f(t) = c₊(t⁺)ᵖ − c₋(t⁻)ᵖ`.
    pub fn nonlinearity(&self, t: f64) -> f64 {
        nonlinearity(self.p, self.c_plus, self.c_minus, t)
    }

    /// Potential `[c₊(t⁺)^{p+1} + c₋(t⁻)^{p+1}]/(p+1)`.
    pub fn potential(&self, t: f64) -> f64 {
        potential(self.p, self.c_plus, self.c_minus, t)
    }

    /// Same problem with `w ≡ 0`.
    pub fn unforced(&self) -> Self {
        Self {
            forcing: ForcingSpec::zero(),
            ..self.clone()
        }
    }

    /// Same problem on a different interval.
    pub fn on_interval(&self, a: f64, b: f64) -> Self {
        Self { a, b, ..self.clone() }
    }
}

pub fn nonlinearity(p: f64, c_plus: f64, c_minus: f64, t: f64) -> f64 {
    if t >= 0.0 {
        c_plus * t.powf(p)
    } else {
        -c_minus * (-t).powf(p)
    }
}

pub fn nonlinearity_derivative(p: f64, c_plus: f64, c_minus: f64, t: f64) -> f64 {
    if t >= 0.0 {
        p * c_plus * t.powf(p - 1.0)
    } else {
        p * c_minus * (-t).powf(p - 1.0)
    }
}

pub fn potential(p: f64, c_plus: f64, c_minus: f64, t: f64) -> f64 {
    if t >= 0.0 {
        c_plus * t.powf(p + 1.0) / (p + 1.0)
    } else {
        c_minus * (-t).powf(p + 1.0) / (p + 1.0)
    }
}

/// Checkerboard sign of the 1D index `z`: `(−1)^z`.
pub fn sigma(z: i64) -> i8 {
    if z.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Breakpoints `a = y₀ < … < y_J = b` with alternating cell signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    pub breakpoints: Vec<f64>,
    pub signs: Vec<i8>,
}

impl Partition {
    /// Partition with signs alternating from `first_sign` on cell 0.
    pub fn new(k: usize, breakpoints: Vec<f64>, first_sign: i8) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPartition("k must be positive".into()));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidPartition("need at least one cell".into()));
        }
        if first_sign != 1 && first_sign != -1 {
            return Err(Error::InvalidPartition("first sign must be ±1".into()));
        }
        if breakpoints.iter().any(|y| !y.is_finite()) || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPartition("breakpoints must be strictly increasing".into()));
        }
        let signs = (0..breakpoints.len() - 1)
            .map(|i| first_sign * sigma(i as i64))
            .collect();
        Ok(Self { k, breakpoints, signs })
    }

    /// Partition from cell lengths starting at `a`.
    pub fn from_lengths(k: usize, a: f64, lengths: &[f64], first_sign: i8) -> Result<Self> {
        let mut y = Vec::with_capacity(lengths.len() + 1);
        y.push(a);
        let mut acc = a;
        for l in lengths {
            acc += l;
            y.push(acc);
        }
        Self::new(k, y, first_sign)
    }

    pub fn cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn first_sign(&self) -> i8 {
        self.signs[0]
    }

    /// 𝓛(T) of the piecewise-affine representative.
    pub fn lipschitz(&self) -> f64 {
        lipschitz_constant(self)
    }

    /// Same breakpoints with every sign flipped.
    pub fn flipped(&self) -> Self {
        Self {
            k: self.k,
            breakpoints: self.breakpoints.clone(),
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// Same cells translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            k: self.k,
            breakpoints: self.breakpoints.iter().map(|y| y + shift).collect(),
            signs: self.signs.clone(),
        }
    }

    /// The equally spaced partition with the same `k` and cell count.
    pub fn uniform_reference(&self) -> Self {
        let a = self.breakpoints[0];
        let b = *self.breakpoints.last().unwrap();
        let j = self.cells();
        let breakpoints = (0..=j)
            .map(|i| if i == j { b } else { a + (b - a) * i as f64 / j as f64 })
            .collect();
        Self {
            k: self.k,
            breakpoints,
            signs: self.signs.clone(),
        }
    }
}

/// Equally spaced covering partition of `[a, b]` into `cells` cells.
///
/// Fails when the resulting 𝓛 exceeds `l_bound`.
pub fn uniform_partition(spec: &ProblemSpec, k: usize, cells: usize, l_bound: f64) -> Result<Partition> {
    if k == 0 || cells == 0 {
        return Err(Error::InvalidPartition("k and J must be positive".into()));
    }
    let scaled = k as f64 * spec.length() / cells as f64;
    let required = scaled.max(1.0 / scaled);
    if required > l_bound * (1.0 + 1e-12) {
        return Err(Error::InfeasiblePartition {
            k,
            cells,
            required,
            bound: l_bound,
        });
    }
    let breakpoints = (0..=cells)
        .map(|i| {
            if i == cells {
                spec.b
            } else {
                spec.a + spec.length() * i as f64 / cells as f64
            }
        })
        .collect();
    Partition::new(k, breakpoints, 1)
}

/// `max_i max(k ℓ_i, 1/(k ℓ_i))`.
pub fn lipschitz_constant(partition: &Partition) -> f64 {
    let k = partition.k as f64;
    partition
        .lengths()
        .iter()
        .map(|l| (k * l).max(1.0 / (k * l)))
        .fold(1.0, f64::max)
}

/// 𝓛 and the distance `d_k` to a reference deformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationMetrics {
    pub lipschitz_l: f64,
    pub distance_to_reference: f64,
    pub sup_distance: f64,
    pub lip_distance: f64,
}

impl DeformationMetrics {
    /// Strict interiority in the `d_k`-ball of radius `r`.
    pub fn is_interior(&self, r: f64) -> bool {
        self.distance_to_reference < r
    }
}

/// `d_k(T, T₀) = sup|T − T₀| + Lip(T − T₀)` for piecewise-affine maps on the
/// same reference grid. Both terms are attained at breakpoints / per cell.
pub fn deformation_distance(t: &Partition, t0: &Partition) -> Result<DeformationMetrics> {
    if t.k != t0.k || t.cells() != t0.cells() {
        return Err(Error::MismatchedGrids {
            k0: t0.k,
            j0: t0.cells(),
            k1: t.k,
            j1: t.cells(),
        });
    }
    let k = t.k as f64;
    let sup_distance = t
        .breakpoints
        .iter()
        .zip(&t0.breakpoints)
        .map(|(y, y0)| (y - y0).abs())
        .fold(0.0, f64::max);
    let lip_distance = t
        .lengths()
        .iter()
        .zip(t0.lengths())
        .map(|(l, l0)| (k * l - k * l0).abs())
        .fold(0.0, f64::max);
    Ok(DeformationMetrics {
        lipschitz_l: lipschitz_constant(t),
        distance_to_reference: sup_distance + lip_distance,
        sup_distance,
        lip_distance,
    })
}

/// JSON document for a partition: `{k, breakpoints, signs, L, d_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub k: usize,
    pub breakpoints: Vec<f64>,
    pub signs: Vec<i8>,
    #[serde(rename = "L")]
    pub l: f64,
    pub d_k: f64,
}

impl PartitionDocument {
    /// Document with `d_k` measured against `reference` (the uniform partition
    /// when `None`).
    pub fn new(partition: &Partition, reference: Option<&Partition>) -> Result<Self> {
        let uniform;
        let reference = match reference {
            Some(r) => r,
            None => {
                uniform = partition.uniform_reference();
                &uniform
            }
        };
        let metrics = deformation_distance(partition, reference)?;
        Ok(Self {
            k: partition.k,
            breakpoints: partition.breakpoints.clone(),
            signs: partition.signs.clone(),
            l: metrics.lipschitz_l,
            d_k: metrics.distance_to_reference,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> ProblemSpec {
        ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::zero()).unwrap()
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(0), 1);
        assert_eq!(sigma(1), -1);
        assert_eq!(sigma(4), 1);
        for z in -50..50 {
            assert_eq!(sigma(z + 1), -sigma(z));
        }
    }

    #[test]
    fn uniform_examples() {
        let p = uniform_partition(&unit(), 4, 4, 1.0).unwrap();
        assert_eq!(p.breakpoints, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.signs, vec![1, -1, 1, -1]);
        assert_eq!(p.lipschitz(), 1.0);

        let p = uniform_partition(&unit(), 4, 3, 2.0).unwrap();
        assert_relative_eq!(p.lipschitz(), 4.0 / 3.0, max_relative = 1e-14);
        let p = uniform_partition(&unit(), 4, 5, 2.0).unwrap();
        assert_relative_eq!(p.lipschitz(), 5.0 / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn uniform_rejects_infeasible_bound() {
        let err = uniform_partition(&unit(), 4, 3, 1.0).unwrap_err();
        match err {
            Error::InfeasiblePartition { required, .. } => assert_relative_eq!(required, 4.0 / 3.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn lipschitz_examples() {
        let p = Partition::new(10, vec![0.0, 0.05, 0.2], 1).unwrap();
        assert_relative_eq!(lipschitz_constant(&p), 2.0, max_relative = 1e-12);
        let p = Partition::new(3, vec![0.0, 1.0 / 6.0], 1).unwrap();
        assert_relative_eq!(lipschitz_constant(&p), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let t0 = Partition::new(2, vec![0.0, 0.5, 1.0], 1).unwrap();
        let d = deformation_distance(&t0, &t0).unwrap();
        assert_eq!(d.distance_to_reference, 0.0);
        let t = Partition::new(2, vec![0.0, 0.6, 1.0], 1).unwrap();
        let d = deformation_distance(&t, &t0).unwrap();
        assert_relative_eq!(d.sup_distance, 0.1, max_relative = 1e-12);
        assert_relative_eq!(d.lip_distance, 0.2, max_relative = 1e-12);
        assert_relative_eq!(d.distance_to_reference, 0.3, max_relative = 1e-12);
        assert!(d.is_interior(0.31));
        assert!(!d.is_interior(0.29));
        let other = Partition::new(3, vec![0.0, 0.6, 1.0], 1).unwrap();
        assert!(matches!(
            deformation_distance(&other, &t0),
            Err(Error::MismatchedGrids { .. })
        ));
    }

    #[test]
    fn partition_rejects_bad_breakpoints() {
        assert!(Partition::new(2, vec![0.0, 0.5, 0.5, 1.0], 1).is_err());
        assert!(Partition::new(2, vec![0.0], 1).is_err());
        assert!(Partition::new(2, vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn document_field_names() {
        let p = uniform_partition(&unit(), 2, 2, 1.0).unwrap();
        let doc = PartitionDocument::new(&p, None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&doc).unwrap();
        for key in ["k", "breakpoints", "signs", "L", "d_k"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["d_k"], 0.0);
    }

    #[test]
    fn forcing_shift_and_derivative() {
        let w = ForcingSpec {
            terms: vec![
                ForcingTerm::Polynomial { coeffs: vec![1.0, -2.0, 3.0] },
                ForcingTerm::Sinusoid { amplitude: 2.0, frequency: 3.0, phase: 0.4 },
                ForcingTerm::Constant { value: -0.5 },
            ],
        };
        let s = w.shifted(0.7);
        for x in [0.0, 0.3, 1.1] {
            assert_relative_eq!(s.eval(x + 0.7), w.eval(x), max_relative = 1e-12);
            let fd = (w.eval(x + 1e-6) - w.eval(x - 1e-6)) / 2e-6;
            assert_relative_eq!(w.derivative(x), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn problem_validation() {
        assert!(ProblemSpec::symmetric(1.0, 0.0, 3.0, ForcingSpec::zero()).is_err());
        assert!(ProblemSpec::symmetric(0.0, 1.0, 1.0, ForcingSpec::zero()).is_err());
        assert!(ProblemSpec::new(0.0, 1.0, 2.0, 0.0, 1.0, ForcingSpec::zero()).is_err());
        let s = ProblemSpec::new(0.0, 1.0, 2.5, 2.0, 3.0, ForcingSpec::zero()).unwrap();
        assert_eq!(s.nonlinearity(0.0), 0.0);
        for t in [2.0, 10.0, -3.0, -50.0] {
            assert!(s.nonlinearity(t) * t > 0.0);
            let fd = (s.potential(t + 1e-6) - s.potential(t - 1e-6)) / 2e-6;
            assert_relative_eq!(fd, s.nonlinearity(t), max_relative = 1e-6);
        }
    }

    fn arb_partition() -> impl Strategy<Value = Partition> {
        (1usize..20, proptest::collection::vec(0.05f64..1.0, 1..12)).prop_map(|(k, ls)| {
            Partition::from_lengths(k, 0.0, &ls, 1).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lipschitz_at_least_one(p in arb_partition()) {
            let l = lipschitz_constant(&p);
            prop_assert!(l >= 1.0);
            let all_exact = p.lengths().iter().all(|&x| (p.k as f64 * x - 1.0).abs() < 1e-12);
            prop_assert_eq!(l - 1.0 < 1e-12, all_exact);
        }

        #[test]
        fn equal_one_iff_cells_are_one_over_k(k in 1usize..30, j in 1usize..30) {
            let ls = vec![1.0 / k as f64; j];
            let p = Partition::from_lengths(k, 0.0, &ls, 1).unwrap();
            prop_assert!((lipschitz_constant(&p) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distance_is_a_metric(
            k in 1usize..10,
            a in proptest::collection::vec(0.1f64..1.0, 4),
            b in proptest::collection::vec(0.1f64..1.0, 4),
            c in proptest::collection::vec(0.1f64..1.0, 4),
        ) {
            let pa = Partition::from_lengths(k, 0.0, &a, 1).unwrap();
            let pb = Partition::from_lengths(k, 0.0, &b, 1).unwrap();
            let pc = Partition::from_lengths(k, 0.0, &c, 1).unwrap();
            let d = |x: &Partition, y: &Partition| deformation_distance(x, y).unwrap().distance_to_reference;
            prop_assert_eq!(d(&pa, &pb), d(&pb, &pa));
            prop_assert!(d(&pa, &pc) <= d(&pa, &pb) + d(&pb, &pc) + 1e-12);
            prop_assert_eq!(d(&pa, &pa), 0.0);
            if a != b {
                prop_assert!(d(&pa, &pb) > 0.0);
            }
        }
    }
}
