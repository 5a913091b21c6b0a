//! The structure function `t(x) = -ln(1-x)/ρ'(x)` and everything derived
//! from it: the lower and upper envelopes, their discontinuities, the
//! graph-like / bicritical / exceptional taxonomy, and the closed-form limit
//! predictors for identifiable vertices and edges.
//!
//! All envelope work reduces to the sign of `h_s(x) = s·ρ'(x) + ln(1-x)`,
//! which is negative exactly where `t(x) > s`. The coefficients are sampled
//! once on a uniform grid; every query scans the grid for the first (or
//! last) sign change, also checking interior extrema of `h_s` so narrow dips
//! between grid points are not missed, then bisects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::MixingDistribution;
use crate::numeric::{bisect, bisect_point, choose_ratio, ln_choose};

/// Largest `x` ever evaluated; keeps `ln(1-x)` finite.
pub const X_MAX: f64 = 1.0 - 1e-12;
pub const DEFAULT_GRID_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureOptions {
    pub grid_resolution: f64,
    pub root_tolerance: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions {
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            root_tolerance: DEFAULT_ROOT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    GraphLike,
    Bicritical,
    Exceptional,
}

/// A discontinuity of an envelope at `s`, from `left` to `right`.
///
/// For the lower envelope `left = g(s-)` and `right = g(s)`. For the upper
/// envelope `left = g★(s)` and `right = g★(s+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub s: f64,
    pub left: f64,
    pub right: f64,
}

impl Jump {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryKind {
    LocalMax,
    LocalMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub x: f64,
    pub t: f64,
    pub kind: StationaryKind,
}

/// `t(x)` for `0 < x < 1`.
pub fn structure_function(m: &MixingDistribution, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::DomainError(format!(
            "structure function needs 0 < x < 1, got {x}"
        )));
    }
    let d = m.derivative(x);
    if d <= 0.0 {
        return Err(Error::DomainError(format!("ρ'({x}) = {d} is not positive")));
    }
    Ok(-(-x).ln_1p() / d)
}

/// Continuous extension of `t` at `0+`: zero when `ρ₁ > 0`, `1/(2ρ₂)` when
/// `ρ₁ = 0 < ρ₂`, and `+∞` otherwise.
pub fn structure_function_at_zero(m: &MixingDistribution) -> f64 {
    if m.coeff(1) > 0.0 {
        0.0
    } else if m.coeff(2) > 0.0 {
        1.0 / (2.0 * m.coeff(2))
    } else {
        f64::INFINITY
    }
}

/// Grid samples of `ρ'`, `ρ''` and `ln(1-x)`.
#[derive(Debug, Clone)]
pub struct StructureGrid {
    mixing: MixingDistribution,
    options: StructureOptions,
    xs: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    log1m: Vec<f64>,
}

/// Sign of `h_s` immediately to the right of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StartSign {
    Positive,
    Negative,
    Undecided,
}

impl StructureGrid {
    pub fn new(mixing: &MixingDistribution, options: StructureOptions) -> Result<Self> {
        let res = options.grid_resolution;
        if !(res > 0.0 && res < 0.5) {
            return Err(Error::DomainError(format!("grid resolution {res} out of range")));
        }
        if options.root_tolerance.is_nan() || options.root_tolerance < 0.0 {
            return Err(Error::DomainError("negative root tolerance".into()));
        }
        mixing.require_low_order_mass()?;
        let steps = (1.0 / res).floor() as usize;
        let mut xs: Vec<f64> = (1..steps).map(|i| i as f64 * res).filter(|&x| x < X_MAX).collect();
        xs.push(X_MAX);
        let mut d1 = Vec::with_capacity(xs.len());
        let mut d2 = Vec::with_capacity(xs.len());
        let mut log1m = Vec::with_capacity(xs.len());
        for &x in &xs {
            let (_, a, b) = mixing.eval_unchecked(x);
            d1.push(a);
            d2.push(b);
            log1m.push((-x).ln_1p());
        }
        Ok(StructureGrid {
            mixing: mixing.clone(),
            options,
            xs,
            d1,
            d2,
            log1m,
        })
    }

    pub fn mixing(&self) -> &MixingDistribution {
        &self.mixing
    }

    pub fn options(&self) -> StructureOptions {
        self.options
    }

    /// Grid abscissae (excluding zero).
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// `h_s(x) = s·ρ'(x) + ln(1-x)`.
    pub fn h(&self, s: f64, x: f64) -> f64 {
        s * self.mixing.derivative(x) + (-x).ln_1p()
    }

    fn h_prime(&self, s: f64, x: f64) -> f64 {
        s * self.mixing.second_derivative(x) - 1.0 / (1.0 - x)
    }

    #[inline]
    fn h_at(&self, s: f64, i: usize) -> f64 {
        s * self.d1[i] + self.log1m[i]
    }

    #[inline]
    fn h_prime_at(&self, s: f64, i: usize) -> f64 {
        s * self.d2[i] - 1.0 / (1.0 - self.xs[i])
    }

    pub fn t(&self, x: f64) -> f64 {
        if x <= 0.0 {
            structure_function_at_zero(&self.mixing)
        } else {
            -(-x).ln_1p() / self.mixing.derivative(x)
        }
    }

    /// Numerator of `t'`: `ρ'(x)/(1-x) + ln(1-x)·ρ''(x)`.
    fn t_slope_numerator(&self, x: f64) -> f64 {
        let (_, a, b) = self.mixing.eval_unchecked(x);
        a / (1.0 - x) + (-x).ln_1p() * b
    }

    fn t_slope_numerator_at(&self, i: usize) -> f64 {
        self.d1[i] / (1.0 - self.xs[i]) + self.log1m[i] * self.d2[i]
    }

    fn start_sign(&self, s: f64) -> StartSign {
        let r1 = self.mixing.coeff(1);
        if r1 > 0.0 {
            return StartSign::Positive;
        }
        // h_s(x) ≈ (2sρ₂ - 1)x near zero.
        // Rounding in s = 1/(2ρ₂) must not pick a side.
        let lead = 2.0 * s * self.mixing.coeff(2) - 1.0;
        if lead > 1e-14 {
            StartSign::Positive
        } else if lead < -1e-14 {
            StartSign::Negative
        } else {
            StartSign::Undecided
        }
    }

    fn refine(&self, lo: f64, hi: f64, tol: f64, negative_at_hi: bool, s: f64) -> f64 {
        // Boundary between h ≥ 0 and h < 0 (or the reverse).
        if negative_at_hi {
            bisect_point(lo, hi, tol, |x| self.h(s, x) < 0.0)
        } else {
            bisect_point(lo, hi, tol, |x| self.h(s, x) >= 0.0)
        }
    }

    /// Where `h_s'` changes sign inside `[lo, hi]`.
    fn extremum(&self, s: f64, lo: f64, hi: f64, rising: bool) -> f64 {
        if rising {
            bisect_point(lo, hi, 0.0, |x| self.h_prime(s, x) >= 0.0)
        } else {
            bisect_point(lo, hi, 0.0, |x| self.h_prime(s, x) <= 0.0)
        }
    }

    /// First `x ≥ from` where `h_s` drops below zero, refined to `tol`.
    /// `from_index` is the first grid index strictly above `from`; `h_s` is
    /// assumed non-negative at `from`.
    fn first_drop(&self, s: f64, from: f64, from_index: usize, tol: f64) -> f64 {
        let mut prev_x = from;
        let mut prev_slope = self.h_prime(s, from.max(0.0));
        for i in from_index..self.xs.len() {
            let x = self.xs[i];
            if self.h_at(s, i) < 0.0 {
                return self.refine(prev_x, x, tol, true, s);
            }
            let slope = self.h_prime_at(s, i);
            if prev_slope < 0.0 && slope >= 0.0 {
                let xm = self.extremum(s, prev_x, x, true);
                if self.h(s, xm) < 0.0 {
                    return self.refine(prev_x, xm, tol, true, s);
                }
            }
            prev_x = x;
            prev_slope = slope;
        }
        X_MAX
    }

    /// Lower envelope `g(s) = inf{x ∈ (0,1) : t(x) > s}`.
    pub fn lower(&self, s: f64) -> f64 {
        self.lower_with_tolerance(s, self.options.root_tolerance)
    }

    fn lower_with_tolerance(&self, s: f64, tol: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.start_sign(s) {
            StartSign::Negative => 0.0,
            StartSign::Positive => self.first_drop(s, 0.0, 0, tol),
            StartSign::Undecided => {
                if self.h_at(s, 0) < 0.0 {
                    0.0
                } else {
                    self.first_drop(s, self.xs[0], 1, tol)
                }
            }
        }
    }

    /// Upper envelope `g★(s) = sup{x ∈ (0,1) : t(x) < s} ∨ 0`.
    pub fn upper(&self, s: f64) -> f64 {
        self.upper_with_tolerance(s, self.options.root_tolerance)
    }

    fn upper_with_tolerance(&self, s: f64, tol: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let last = self.xs.len() - 1;
        self.last_rise(s, last, tol)
    }

    /// Largest `x ≤ xs[top]` with `h_s(x) > 0`, or zero.
    fn last_rise(&self, s: f64, top: usize, tol: f64) -> f64 {
        if self.h_at(s, top) > 0.0 {
            return self.xs[top];
        }
        let mut next_x = self.xs[top];
        let mut next_slope = self.h_prime_at(s, top);
        for i in (0..top).rev() {
            let x = self.xs[i];
            if self.h_at(s, i) > 0.0 {
                return self.refine(x, next_x, tol, true, s);
            }
            let slope = self.h_prime_at(s, i);
            if slope > 0.0 && next_slope <= 0.0 {
                let xm = self.extremum(s, x, next_x, false);
                if self.h(s, xm) > 0.0 {
                    return self.refine(xm, next_x, tol, true, s);
                }
            }
            next_x = x;
            next_slope = slope;
        }
        // Interval (0, xs[0]].
        match self.start_sign(s) {
            StartSign::Positive => self.refine(0.0, next_x, tol, true, s),
            _ => 0.0,
        }
    }

    /// Sign changes of `t'`, refined to full precision.
    pub fn stationary_points(&self) -> Vec<StationaryPoint> {
        let mut out = Vec::new();
        let mut prev_x = self.xs[0];
        let mut prev = self.t_slope_numerator_at(0);
        for i in 1..self.xs.len() {
            let cur = self.t_slope_numerator_at(i);
            if (prev > 0.0) != (cur > 0.0) {
                let falling = prev > 0.0;
                let x = bisect_point(prev_x, self.xs[i], 0.0, |x| {
                    (self.t_slope_numerator(x) > 0.0) != falling
                });
                out.push(StationaryPoint {
                    x,
                    t: self.t(x),
                    kind: if falling {
                        StationaryKind::LocalMax
                    } else {
                        StationaryKind::LocalMin
                    },
                });
            }
            prev_x = self.xs[i];
            prev = cur;
        }
        out
    }

    /// Whether `t` decreases immediately to the right of zero. Only possible
    /// when `ρ₁ = 0`, in which case zero acts as a local maximum.
    fn decreasing_at_zero(&self) -> bool {
        self.mixing.coeff(1) == 0.0 && self.t_slope_numerator_at(0) < 0.0
    }

    fn index_above(&self, x: f64) -> usize {
        self.xs.partition_point(|&g| g <= x)
    }

    /// Jumps of the lower envelope: the local maxima of `t` that exceed
    /// every earlier value of `t`.
    pub fn lower_jumps(&self, stationary: &[StationaryPoint]) -> Result<Vec<Jump>> {
        let t0 = structure_function_at_zero(&self.mixing);
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        if self.decreasing_at_zero() {
            candidates.push((0.0, t0));
        }
        candidates.extend(
            stationary
                .iter()
                .filter(|p| p.kind == StationaryKind::LocalMax)
                .map(|p| (p.x, p.t)),
        );
        let mut running_max = if self.decreasing_at_zero() { f64::NEG_INFINITY } else { t0 };
        let mut jumps = Vec::new();
        for (x, s) in candidates {
            if s <= running_max {
                continue;
            }
            running_max = s;
            // h_s touches zero at x itself; rounding there can read as a
            // drop, so the scan starts one grid point further right.
            let i = self.index_above(x);
            let right = if i < self.xs.len() && self.h_at(s, i) >= 0.0 {
                self.first_drop(s, self.xs[i], i + 1, 0.0)
            } else {
                self.first_drop(s, x, i, 0.0)
            };
            jumps.push(Jump { s, left: x, right });
        }
        for j in &jumps {
            self.check_two_zeros(j, stationary)?;
        }
        Ok(jumps)
    }

    /// Jumps of the upper envelope: local minima of `t` below every later
    /// value of `t`.
    pub fn upper_jumps(&self, stationary: &[StationaryPoint]) -> Vec<Jump> {
        let mut running_min = f64::INFINITY;
        let mut jumps = Vec::new();
        for p in stationary
            .iter()
            .rev()
            .filter(|p| p.kind == StationaryKind::LocalMin)
        {
            if p.t >= running_min {
                continue;
            }
            running_min = p.t;
            let below = self.index_above(p.x).saturating_sub(1);
            let top = below.min(self.xs.len() - 1);
            let left = if top == 0 {
                0.0
            } else {
                self.last_rise(p.t, top - 1, 0.0).min(p.x)
            };
            jumps.push(Jump {
                s: p.t,
                left,
                right: p.x,
            });
        }
        jumps.reverse();
        jumps
    }

    /// No zero of `h_s` strictly between the two ends of a jump.
    fn check_two_zeros(&self, jump: &Jump, stationary: &[StationaryPoint]) -> Result<()> {
        let slack = 1e-9 * jump.s.max(1.0);
        let offender = stationary.iter().find(|p| {
            p.kind == StationaryKind::LocalMax
                && p.x > jump.left
                && p.x < jump.right
                && p.t >= jump.s - slack
        });
        match offender {
            Some(p) => Err(Error::AssumptionViolated(format!(
                "h_s has a third zero at x = {} inside the jump ({}, {}) at s = {}",
                p.x, jump.left, jump.right, jump.s
            ))),
            None => Ok(()),
        }
    }
}

/// The analysed structure function of one mixing law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureProfile {
    pub mixing: MixingDistribution,
    pub grid_resolution: f64,
    pub root_tolerance: f64,
    /// Discontinuities of the lower envelope (the set Ξ).
    pub xi: Vec<Jump>,
    /// Discontinuities of the upper envelope.
    pub upper_jumps: Vec<Jump>,
    pub classification: Classification,
    pub stationary_points: Vec<StationaryPoint>,
    #[serde(skip)]
    grid: Option<StructureGrid>,
}

impl StructureProfile {
    pub fn analyze(mixing: &MixingDistribution, options: StructureOptions) -> Result<Self> {
        let grid = StructureGrid::new(mixing, options)?;
        let stationary = grid.stationary_points();
        let xi = grid.lower_jumps(&stationary)?;
        let upper_jumps = grid.upper_jumps(&stationary);
        let classification = if stationary.is_empty() && xi.is_empty() && upper_jumps.is_empty() {
            Classification::GraphLike
        } else if xi.len() == 1 && upper_jumps.len() == 1 {
            Classification::Bicritical
        } else {
            Classification::Exceptional
        };
        Ok(StructureProfile {
            mixing: mixing.clone(),
            grid_resolution: options.grid_resolution,
            root_tolerance: options.root_tolerance,
            xi,
            upper_jumps,
            classification,
            stationary_points: stationary,
            grid: Some(grid),
        })
    }

    pub fn with_defaults(mixing: &MixingDistribution) -> Result<Self> {
        Self::analyze(mixing, StructureOptions::default())
    }

    fn grid(&self) -> &StructureGrid {
        self.grid
            .as_ref()
            .expect("profile built by analyze() carries its grid")
    }

    pub fn t(&self, x: f64) -> f64 {
        self.grid().t(x)
    }

    pub fn lower(&self, s: f64) -> f64 {
        // At a jump h_s is tangent to zero at the left end, which the grid
        // scan cannot resolve; g is right-continuous there.
        match self.xi.iter().find(|j| j.s == s) {
            Some(j) => j.right,
            None => self.grid().lower(s),
        }
    }

    pub fn upper(&self, s: f64) -> f64 {
        self.grid().upper(s)
    }

    /// The jump of `g` at `s`, if `s` is (numerically) in Ξ.
    pub fn jump_at(&self, s: f64) -> Option<Jump> {
        self.xi
            .iter()
            .copied()
            .find(|j| (j.s - s).abs() <= 1e-9 * j.s.max(1.0))
    }

    /// `g(s-)`.
    pub fn lower_left_limit(&self, s: f64) -> f64 {
        match self.jump_at(s) {
            Some(j) => j.left,
            None => self.lower(s),
        }
    }

    /// `(s, g(s), g★(s))` rows for plotting.
    pub fn envelope_table(&self, s_values: &[f64]) -> Vec<(f64, f64, f64)> {
        s_values
            .iter()
            .map(|&s| (s, self.lower(s), self.upper(s)))
            .collect()
    }

    /// Limit law of `(T̃, Z̃)` at time `t` for a process with patches.
    pub fn fluid_prediction(&self, t: f64) -> Result<FluidPrediction> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::DomainError(format!("time must be non-negative, got {t}")));
        }
        if self.mixing.coeff(1) <= 0.0 {
            return Err(Error::DomainError(
                "the with-patch limit needs a positive coefficient of x; \
                 use macroscopic_prediction instead"
                    .into(),
            ));
        }
        let atom = |p: f64, x: f64| FluidAtom::at(&self.mixing, t, x, p);
        Ok(match self.jump_at(t) {
            Some(j) => FluidPrediction {
                t,
                on_jump: true,
                atoms: vec![atom(0.5, j.left), atom(0.5, j.right)],
            },
            None => FluidPrediction {
                t,
                on_jump: false,
                atoms: vec![atom(1.0, self.lower(t))],
            },
        })
    }

    /// Limit law of `(T̄, Z̄)` for the domain of a vertex in a patch-free
    /// process: zero with probability `1 - g₂(t)`, otherwise the fluid atom
    /// at `g(t)`.
    pub fn macroscopic_prediction(&self, t: f64) -> Result<FluidPrediction> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::DomainError(format!("time must be non-negative, got {t}")));
        }
        let rho2 = self.mixing.coeff(2);
        if self.mixing.coeff(1) != 0.0 || rho2 <= 0.0 {
            return Err(Error::DomainError(
                "the domain limit needs ρ₁ = 0 < ρ₂".into(),
            ));
        }
        let escape = graph_envelope(rho2, t);
        Ok(FluidPrediction {
            t,
            on_jump: false,
            atoms: vec![
                FluidAtom::at(&self.mixing, t, 0.0, 1.0 - escape),
                FluidAtom::at(&self.mixing, t, self.lower(t), escape),
            ],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidAtom {
    pub probability: f64,
    /// Rescaled identifiable vertices.
    pub vertices: f64,
    /// Rescaled identifiable edges, `tρ(x) - (1-x)ln(1-x)`.
    pub edges: f64,
    /// Rescaled essential edges, `-(1-x)ln(1-x)`.
    pub essential: f64,
}

impl FluidAtom {
    fn at(m: &MixingDistribution, t: f64, x: f64, probability: f64) -> Self {
        let essential = identifiable_edge_excess(x);
        FluidAtom {
            probability,
            vertices: x,
            edges: t * m.value(x) + essential,
            essential,
        }
    }
}

/// `-(1-x)ln(1-x)`, zero at `x = 0`.
fn identifiable_edge_excess(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(1.0 - x) * (-x).ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidPrediction {
    pub t: f64,
    pub on_jump: bool,
    pub atoms: Vec<FluidAtom>,
}

impl FluidPrediction {
    pub fn mean_vertices(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability * a.vertices).sum()
    }
}

pub fn lower_envelope(m: &MixingDistribution, s: f64) -> Result<f64> {
    Ok(StructureGrid::new(m, StructureOptions::default())?.lower(s))
}

pub fn upper_envelope(m: &MixingDistribution, s: f64) -> Result<f64> {
    Ok(StructureGrid::new(m, StructureOptions::default())?.upper(s))
}

pub fn discontinuity_set(m: &MixingDistribution) -> Result<Vec<Jump>> {
    Ok(StructureProfile::with_defaults(m)?.xi)
}

pub fn classify(m: &MixingDistribution) -> Result<Classification> {
    Ok(StructureProfile::with_defaults(m)?.classification)
}

/// Largest root in `[0, 1)` of `μx + ln(1-x) = 0`: the survival probability
/// of a Poisson(μ) branching process. Zero for `μ ≤ 1`.
pub fn escape_probability(mu: f64) -> f64 {
    if mu <= 1.0 {
        return 0.0;
    }
    // μ + ln(1-x)/x falls from μ - 1 > 0 to -∞.
    let negative = |x: f64| mu * x + (-x).ln_1p() < 0.0;
    if !negative(X_MAX) {
        return X_MAX;
    }
    bisect_point(0.0, X_MAX, 0.0, negative)
}

/// `φ_t`: largest root in `[0, 1]` of `2tρ₂x + ln(1-x) = 0`.
pub fn largest_root_phi(t: f64, rho2: f64) -> f64 {
    escape_probability(2.0 * t * rho2)
}

/// Lower envelope `g₂` of the two-edge structure function
/// `t₂(x) = -ln(1-x)/(2ρ₂x)`.
pub fn graph_envelope(rho2: f64, s: f64) -> f64 {
    largest_root_phi(s, rho2)
}

/// Exact finite-`N` mean of the number of non-identifiable edges at time
/// `t` given `m` identifiable vertices.
pub fn nonidentifiable_mean(rho: &MixingDistribution, n: usize, t: f64, m: usize) -> Result<f64> {
    if m > n {
        return Err(Error::DomainError(format!("{m} identifiable vertices out of {n}")));
    }
    let (n64, m64) = (n as u64, m as u64);
    let mut sum = 0.0;
    for k in 1..=rho.max_cardinality().min(n) {
        let k64 = k as u64;
        let inside = choose_ratio(m64, k64, n64, k64);
        let one_out = (n - m) as f64 * choose_ratio(m64, k64 - 1, n64, k64);
        sum += rho.coeff(k) * (1.0 - inside - one_out);
    }
    Ok(n as f64 * t * sum)
}

/// Large-`N` form of [`nonidentifiable_mean`] with `γ = m/N`.
pub fn nonidentifiable_mean_asymptotic(rho: &MixingDistribution, n: usize, t: f64, gamma: f64) -> f64 {
    let (v, d, _) = rho.eval_unchecked(gamma);
    n as f64 * t * (rho.total() - v - (1.0 - gamma) * d)
}

/// Intensities `β_1..β_K` of the residual hypergraph on the `N - m`
/// non-identifiable vertices; `β_1 = 0`. Index `j - 1` holds `β_j`.
pub fn conditional_beta(rho: &MixingDistribution, n: usize, t: f64, m: usize) -> Result<Vec<f64>> {
    if m >= n {
        return Err(Error::DomainError(format!(
            "need fewer than {n} identifiable vertices, got {m}"
        )));
    }
    let (n64, m64) = (n as u64, m as u64);
    let rest = n64 - m64;
    let top = rho.max_cardinality().min(n);
    let scale = t / (1.0 - m as f64 / n as f64);
    let mut beta = vec![0.0; top.min(rest as usize).max(1)];
    for (idx, b) in beta.iter_mut().enumerate().skip(1) {
        let j = idx as u64 + 1;
        let mut acc = 0.0;
        for i in 0..=m64.min(top as u64 - j) {
            let c = rho.coeff((i + j) as usize);
            if c > 0.0 {
                acc += c
                    * (ln_choose(rest, j) + ln_choose(m64, i) - ln_choose(n64, i + j)).exp();
            }
        }
        *b = scale * acc;
    }
    Ok(beta)
}

/// `(y(s), z(s))`: rescaled patches and debris along the fluid path of
/// randomized collapse for intensity `β`.
pub fn collapse_fluid_path(beta: &MixingDistribution, s: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::DomainError(format!("fluid path needs 0 ≤ s < 1, got {s}")));
    }
    let (v, d, _) = beta.eval_unchecked(s);
    let l = (-s).ln_1p();
    Ok(((1.0 - s) * (d + l), v - (1.0 - s) * l))
}

/// First zero of the fluid patch curve `y` on `(0, 1)`, where `y` first
/// turns negative.
pub fn collapse_fluid_stop(beta: &MixingDistribution, resolution: f64) -> f64 {
    let y = |s: f64| {
        let (_, d, _) = beta.eval_unchecked(s);
        d + (-s).ln_1p()
    };
    let mut prev = 0.0;
    let mut x = resolution;
    while x < X_MAX {
        if y(x) < 0.0 {
            let (lo, hi) = bisect(prev, x, 0.0, |s| y(s) < 0.0);
            return 0.5 * (lo + hi);
        }
        prev = x;
        x += resolution;
    }
    X_MAX
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(c: &[f64]) -> MixingDistribution {
        MixingDistribution::probability(c.to_vec()).unwrap()
    }

    /// Root of 2x + ln(1-x) = 0 by a plain bisection, independent of the
    /// envelope code.
    fn giant_fraction_oracle() -> f64 {
        let (mut lo, mut hi) = (0.5f64, 0.99f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid + (1.0 - mid).ln() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn oracle_value() {
        let x = giant_fraction_oracle();
        assert!((x - 0.796812130).abs() < 1e-8);
        assert!(((1.0 - x) - (-2.0 * x).exp()).abs() < 1e-14);
    }

    #[test]
    fn structure_function_examples() {
        let sq = law(&[0.0, 1.0]);
        assert!((structure_function(&sq, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(structure_function_at_zero(&sq), 0.5);
        assert_eq!(structure_function_at_zero(&law(&[0.2, 0.8])), 0.0);
        assert!(structure_function(&sq, 0.0).is_err());
        assert!(structure_function(&sq, 1.0).is_err());
        let near_one = structure_function(&sq, 1.0 - 1e-9).unwrap();
        assert!(near_one > structure_function(&sq, 0.99).unwrap() && near_one > 10.0);
    }

    #[test]
    fn lower_envelope_examples() {
        let sq = law(&[0.0, 1.0]);
        assert_eq!(lower_envelope(&sq, 0.4).unwrap(), 0.0);
        assert_eq!(lower_envelope(&sq, 0.5).unwrap(), 0.0);
        assert!((lower_envelope(&sq, 1.0).unwrap() - giant_fraction_oracle()).abs() < 1e-11);
    }

    #[test]
    fn upper_envelope_examples() {
        let sq = law(&[0.0, 1.0]);
        assert_eq!(upper_envelope(&sq, 0.0).unwrap(), 0.0);
        let g = StructureGrid::new(&law(&[0.5, 0.5]), StructureOptions::default()).unwrap();
        for i in 1..60 {
            let s = i as f64 * 0.1;
            let (lo, up) = (g.lower(s), g.upper(s));
            assert!((lo - up).abs() < 1e-11, "s = {s}: {lo} vs {up}");
        }
    }

    #[test]
    fn envelopes_are_monotone() {
        for c in [&[0.1, 0.2, 0.7][..], &[0.5, 0.5], &[0.0, 0.3, 0.7]] {
            let g = StructureGrid::new(&law(c), StructureOptions::default()).unwrap();
            let mut prev = (0.0, 0.0);
            for i in 0..1000 {
                let s = i as f64 * 0.005;
                let cur = (g.lower(s), g.upper(s));
                assert!(cur.0 >= prev.0 && cur.1 >= prev.1, "{c:?} at s = {s}");
                assert!(cur.0 <= cur.1 + 1e-12);
                prev = cur;
            }
        }
    }

    #[test]
    fn graph_envelope_examples() {
        assert_eq!(graph_envelope(1.0, 0.5), 0.0);
        assert!((graph_envelope(1.0, 1.0) - giant_fraction_oracle()).abs() < 1e-12);
        assert!(graph_envelope(1.0, 100.0) > 0.999);
        assert_eq!(largest_root_phi(0.5, 1.0), 0.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let phi = largest_root_phi(0.5 + i as f64 * 0.01, 1.0);
            assert!(phi > prev);
            prev = phi;
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&law(&[0.35, 0.5, 0.15])).unwrap(), Classification::GraphLike);
        assert_eq!(classify(&law(&[0.2, 0.6, 0.2])).unwrap(), Classification::GraphLike);
        assert_eq!(classify(&law(&[0.1, 0.2, 0.7])).unwrap(), Classification::Bicritical);
        let mut ex = vec![0.0; 200];
        ex[0] = 0.001;
        ex[2] = 0.005;
        ex[199] = 0.994;
        let p = StructureProfile::with_defaults(&law(&ex)).unwrap();
        assert_eq!(p.classification, Classification::Exceptional);
        assert!(p.xi.len().max(p.upper_jumps.len()) >= 2);
    }

    #[test]
    fn bicritical_jump_is_consistent() {
        let p = StructureProfile::with_defaults(&law(&[0.1, 0.2, 0.7])).unwrap();
        assert_eq!(p.xi.len(), 1);
        let j = p.xi[0];
        assert!(j.left < j.right);
        let g = p.grid();
        assert!(g.h(j.s, j.left).abs() < 1e-12);
        assert!(g.h(j.s, j.right).abs() < 1e-12);
        assert!((p.t(j.left) - j.s).abs() < 1e-10 && (p.t(j.right) - j.s).abs() < 1e-10);
        assert!((p.lower(j.s) - j.right).abs() < 1e-11);
        assert!((p.lower(j.s * (1.0 - 1e-9)) - j.left).abs() < 1e-3);
        // Independent scan: away from s★, g moves by far less than the jump.
        let mut prev = p.lower(0.0);
        let mut found = Vec::new();
        for i in 1..=40_000 {
            let s = i as f64 * 1e-4;
            let cur = p.lower(s);
            if cur - prev > 0.1 * (j.right - j.left) {
                found.push(s);
            }
            prev = cur;
        }
        assert_eq!(found.len(), 1);
        assert!(found[0] >= j.s && found[0] - j.s < 1e-4 + 1e-12);
    }

    #[test]
    fn rho1_zero_threshold_jump() {
        // 3ρ₃ > ρ₂ with ρ₁ = 0: g jumps at 1/(2ρ₂).
        let p = StructureProfile::with_defaults(&law(&[0.0, 0.4, 0.6])).unwrap();
        assert_eq!(p.xi.len(), 1);
        assert!((p.xi[0].s - 1.25).abs() < 1e-12);
        assert_eq!(p.xi[0].left, 0.0);
        assert!(p.xi[0].right > 0.1);
        assert_eq!(p.classification, Classification::Bicritical);
        // 3ρ₃ < ρ₂: continuous at the threshold.
        let q = StructureProfile::with_defaults(&law(&[0.0, 0.9, 0.1])).unwrap();
        assert!(q.xi.is_empty());
        assert_eq!(q.classification, Classification::GraphLike);
    }

    #[test]
    fn fluid_prediction_examples() {
        let p = StructureProfile::with_defaults(&law(&[0.5, 0.5])).unwrap();
        let zero = p.fluid_prediction(0.0).unwrap();
        assert_eq!(zero.atoms.len(), 1);
        assert_eq!((zero.atoms[0].vertices, zero.atoms[0].edges, zero.atoms[0].essential), (0.0, 0.0, 0.0));
        assert!(p.fluid_prediction(-1.0).is_err());

        let sq = StructureProfile::with_defaults(&law(&[0.0, 1.0])).unwrap();
        let macro_law = sq.macroscopic_prediction(1.0).unwrap();
        let big = macro_law.atoms[1];
        let oracle = giant_fraction_oracle();
        assert!((big.vertices - oracle).abs() < 1e-11);
        assert!((big.probability - oracle).abs() < 1e-11);
        assert!(sq.fluid_prediction(1.0).is_err());

        let b = StructureProfile::with_defaults(&law(&[0.1, 0.2, 0.7])).unwrap();
        let j = b.xi[0];
        let at_jump = b.fluid_prediction(j.s).unwrap();
        assert!(at_jump.on_jump);
        assert_eq!(at_jump.atoms.len(), 2);
        assert_eq!((at_jump.atoms[0].vertices, at_jump.atoms[1].vertices), (j.left, j.right));
    }

    #[test]
    fn edge_formula_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        while checked < 100 {
            let k = rng.random_range(2..6);
            let mut c: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            c[0] += 0.05;
            let total: f64 = c.iter().sum();
            c.iter_mut().for_each(|x| *x /= total);
            let m = law(&c);
            let Ok(p) = StructureProfile::with_defaults(&m) else { continue };
            let t = rng.random_range(0.05..5.0);
            let g = p.lower(t);
            if g <= 0.0 || g >= X_MAX || p.jump_at(t).is_some() {
                continue;
            }
            let pred = p.fluid_prediction(t).unwrap().atoms[0].edges;
            let (v, d, _) = m.eval_unchecked(g);
            let formula = t * (v + (1.0 - g) * d);
            assert!((pred - formula).abs() < 1e-9, "{c:?} t = {t}: {pred} vs {formula}");
            checked += 1;
        }
    }

    #[test]
    fn nonidentifiable_mean_examples() {
        let m = law(&[0.3, 0.5, 0.2]);
        let (n, t) = (1000, 1.7);
        let none = nonidentifiable_mean(&m, n, t, 0).unwrap();
        assert!((none - n as f64 * t * 0.7).abs() < 1e-9);
        assert!(nonidentifiable_mean(&m, n, t, n).unwrap().abs() < 1e-9);
        assert!(nonidentifiable_mean(&m, n, t, n + 1).is_err());

        let n = 10_000;
        let exact = nonidentifiable_mean(&m, n, t, 3000).unwrap();
        let asym = nonidentifiable_mean_asymptotic(&m, n, t, 0.3);
        assert!((exact - asym).abs() / asym < 0.01);
    }

    #[test]
    fn conditional_beta_examples() {
        let m = law(&[0.3, 0.5, 0.2]);
        let beta = conditional_beta(&m, 500, 1.3, 0).unwrap();
        assert_eq!(beta[0], 0.0);
        assert!((beta[1] - 1.3 * 0.5).abs() < 1e-12);
        assert!((beta[2] - 1.3 * 0.2).abs() < 1e-12);

        for (n, mt) in [(500, 120), (60, 59), (5000, 2500), (40, 0)] {
            let beta = conditional_beta(&m, n, 1.3, mt).unwrap();
            assert!(beta.iter().all(|&b| b >= 0.0));
            let total = (n - mt) as f64 * beta.iter().sum::<f64>();
            let mean = nonidentifiable_mean(&m, n, 1.3, mt).unwrap();
            assert!((total - mean).abs() <= 1e-9 * mean.max(1.0), "{n} {mt}: {total} vs {mean}");
        }
        assert!(conditional_beta(&m, 10, 1.0, 10).is_err());
    }

    #[test]
    fn fluid_path_examples() {
        let rho = law(&[0.3, 0.5, 0.2]);
        let t = 1.4;
        let beta = rho.scaled(t);
        assert_eq!(collapse_fluid_path(&beta, 0.0).unwrap(), (0.3 * t, 0.0));
        let stop = collapse_fluid_stop(&beta, 1e-4);
        let p = StructureProfile::with_defaults(&rho).unwrap();
        assert!((stop - p.lower(t)).abs() < 1e-10);
        let (y, z) = collapse_fluid_path(&beta, stop).unwrap();
        assert!(y.abs() < 1e-9);
        assert!((z - p.fluid_prediction(t).unwrap().atoms[0].edges).abs() < 1e-9);
        assert!(collapse_fluid_path(&beta, 1.0).is_err());
    }
}
