//! Periodic two-slope profiles and their gap-space parametrization.

use serde::{Deserialize, Serialize};

use crate::kernel::Segment;
use crate::{Error, Result};

/// Relative tolerance used when validating geometric constraints.
const GEOM_TOL: f64 = 1e-10;

/// Problem parameters. The period is determined by the constraint that the
/// profile returns to its value after one period: `T = L (Lambda + 1) delta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ProblemParams {
    pub s: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub big_l: u32,
    #[serde(rename = "T")]
    pub period: f64,
}

impl ProblemParams {
    pub fn new(s: f64, lambda: f64, delta: f64, big_l: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !s.is_finite() {
            return Err(Error::InvalidParams(format!("s = {s} outside [0, 1]")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("Lambda = {lambda} must be positive")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParams(format!("delta = {delta} must be positive")));
        }
        if big_l == 0 {
            return Err(Error::InvalidParams("L must be at least 1".into()));
        }
        let period = big_l as f64 * (lambda + 1.0) * delta;
        Ok(ProblemParams { s, lambda, delta, big_l, period })
    }

    /// Total gap budget per period: `sum(gaps) = L * Lambda * delta`.
    pub fn gap_budget(&self) -> f64 {
        self.big_l as f64 * self.lambda * self.delta
    }
}

/// Gap-space coordinates: the positive-slope run lengths between consecutive
/// negative intervals. Lives on the simplex `{g_i >= 0, sum g_i = L Lambda delta}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapConfiguration {
    pub gaps: Vec<f64>,
}

impl GapConfiguration {
    pub fn validated(gaps: Vec<f64>, params: &ProblemParams) -> Result<Self> {
        if gaps.len() != params.big_l as usize {
            return Err(Error::SimplexViolation(format!(
                "expected {} gaps, got {}",
                params.big_l,
                gaps.len()
            )));
        }
        let budget = params.gap_budget();
        let tol = GEOM_TOL * params.period.max(1.0);
        let mut clean = Vec::with_capacity(gaps.len());
        for &g in &gaps {
            if !g.is_finite() || g < -tol {
                return Err(Error::SimplexViolation(format!("negative gap {g}")));
            }
            clean.push(g.max(0.0));
        }
        let sum: f64 = clean.iter().sum();
        if (sum - budget).abs() > tol {
            return Err(Error::SimplexViolation(format!(
                "gaps sum to {sum}, budget is {budget}"
            )));
        }
        Ok(GapConfiguration { gaps: clean })
    }
}

/// A `T`-periodic continuous piecewise-affine profile with slopes `1` and
/// `-Lambda`. The slope is `-Lambda` exactly on the union of `L` intervals of
/// length `delta` per period; `neg_interval_right_endpoints` holds their right
/// endpoints, sorted, in `[0, T)`. `anchor_value` is the profile value at `0`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TwoSlopeProfile {
    pub params: ProblemParams,
    pub neg_interval_right_endpoints: Vec<f64>,
    pub anchor_value: f64,
}

impl TwoSlopeProfile {
    pub fn new(
        params: ProblemParams,
        neg_interval_right_endpoints: Vec<f64>,
        anchor_value: f64,
    ) -> Result<Self> {
        let l = params.big_l as usize;
        let t = params.period;
        let delta = params.delta;
        let tol = GEOM_TOL * t.max(1.0);
        if neg_interval_right_endpoints.len() != l {
            return Err(Error::InvalidParams(format!(
                "expected {} endpoints, got {}",
                l,
                neg_interval_right_endpoints.len()
            )));
        }
        if !anchor_value.is_finite() {
            return Err(Error::InvalidParams("anchor value must be finite".into()));
        }
        let e = &neg_interval_right_endpoints;
        for (k, &x) in e.iter().enumerate() {
            if !x.is_finite() || !(-tol..t + tol).contains(&x) {
                return Err(Error::InvalidParams(format!("endpoint {x} outside [0, T)")));
            }
            if k + 1 < l && e[k + 1] - x < delta - tol {
                return Err(Error::InvalidParams(format!(
                    "negative intervals ending at {x} and {} overlap",
                    e[k + 1]
                )));
            }
        }
        if l > 1 {
            let wrap = e[0] + t - e[l - 1];
            if wrap < delta - tol {
                return Err(Error::InvalidParams(
                    "negative intervals overlap across the period boundary".into(),
                ));
            }
        } else if t < delta - tol {
            return Err(Error::InvalidParams("period shorter than delta".into()));
        }
        Ok(TwoSlopeProfile { params, neg_interval_right_endpoints, anchor_value })
    }

    /// The sawtooth minimizer: equally spaced negative intervals `(k S - delta, k S)`
    /// with `S = (Lambda + 1) delta`, vanishing at `0`.
    pub fn build_canonical(params: ProblemParams) -> Result<Self> {
        let spacing = (params.lambda + 1.0) * params.delta;
        let endpoints = (0..params.big_l).map(|k| k as f64 * spacing).collect();
        Self::new(params, endpoints, 0.0)
    }

    /// Builds the profile whose positive-slope runs have the given lengths.
    /// The first negative interval is `(-delta, 0)` and the value at `0` is `0`.
    pub fn from_gaps(params: ProblemParams, gaps: &GapConfiguration) -> Result<Self> {
        let gaps = GapConfiguration::validated(gaps.gaps.clone(), &params)?;
        let mut endpoints = Vec::with_capacity(gaps.gaps.len());
        let mut x = 0.0;
        for &g in &gaps.gaps {
            endpoints.push(x);
            x += g + params.delta;
        }
        Self::new(params, endpoints, 0.0)
    }

    /// Inverse of [`from_gaps`](Self::from_gaps) up to translation.
    pub fn gaps(&self) -> GapConfiguration {
        let e = &self.neg_interval_right_endpoints;
        let l = e.len();
        let mut gaps = Vec::with_capacity(l);
        for k in 0..l {
            let next = if k + 1 < l { e[k + 1] } else { e[0] + self.params.period };
            gaps.push((next - e[k] - self.params.delta).max(0.0));
        }
        GapConfiguration { gaps }
    }

    fn reduce(&self, x: f64) -> f64 {
        let t = self.params.period;
        let r = x - t * (x / t).floor();
        if r >= t {
            0.0
        } else {
            r
        }
    }

    /// Lebesgue measure of the negative-slope set intersected with `(0, t)`,
    /// for `t` in `[0, T]`.
    fn neg_measure(&self, t: f64) -> f64 {
        let period = self.params.period;
        let delta = self.params.delta;
        let mut m = 0.0;
        for &e in &self.neg_interval_right_endpoints {
            // an interval straddling 0 wraps to the top of the period
            for shift in [0.0, period] {
                let lo = (e - delta + shift).max(0.0);
                let hi = (e + shift).min(t);
                if hi > lo {
                    m += hi - lo;
                }
            }
        }
        m
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let xr = self.reduce(x);
        let m = self.neg_measure(xr);
        self.anchor_value + (xr - m) - self.params.lambda * m
    }

    fn in_negative_set(&self, x: f64) -> bool {
        let xr = self.reduce(x);
        let period = self.params.period;
        let delta = self.params.delta;
        self.neg_interval_right_endpoints.iter().any(|&e| {
            [-period, 0.0, period]
                .iter()
                .any(|&sh| xr > e - delta + sh && xr < e + sh)
        })
    }

    /// Affinity segments covering the base period `[0, T)`, in increasing order.
    /// Zero-length pieces (touching intervals) are dropped.
    pub fn base_segments(&self) -> Vec<Segment> {
        let t = self.params.period;
        let tol = GEOM_TOL * t.max(1.0);
        let mut brk = vec![0.0, t];
        for &e in &self.neg_interval_right_endpoints {
            for p in [self.reduce(e), self.reduce(e - self.params.delta)] {
                brk.push(p);
            }
        }
        brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brk.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let mut segs = Vec::new();
        for w in brk.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= tol {
                continue;
            }
            let slope = if self.in_negative_set(0.5 * (lo + hi)) {
                -self.params.lambda
            } else {
                1.0
            };
            segs.push(Segment::new(lo, hi, self.evaluate(lo), slope).expect("valid by construction"));
        }
        segs
    }

    /// Affinity segments of the profile restricted to periods `k_lo ..= k_hi`,
    /// i.e. the interval `[k_lo T, (k_hi + 1) T]`.
    pub fn segments_in_window(&self, k_lo: i64, k_hi: i64) -> Vec<Segment> {
        let base = self.base_segments();
        let t = self.params.period;
        let mut out = Vec::with_capacity(base.len() * (k_hi - k_lo + 1).max(0) as usize);
        for k in k_lo..=k_hi {
            let dt = k as f64 * t;
            out.extend(base.iter().map(|s| s.translated(dt)));
        }
        out
    }

    /// Oscillation (max - min) over one period. Extremes sit at slope changes.
    pub fn oscillation(&self) -> f64 {
        let segs = self.base_segments();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &segs {
            for v in [s.value_at_lo, s.value_at_hi()] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }

    /// `integral_0^T y^k u(y) dy` for `k <= 2`.
    pub fn moment_u(&self, k: u32) -> f64 {
        self.base_segments().iter().map(|s| poly_moment(s, k, 1)).sum()
    }

    /// `integral_0^T y^k u(y)^2 dy` for `k <= 2`.
    pub fn moment_u2(&self, k: u32) -> f64 {
        self.base_segments().iter().map(|s| poly_moment(s, k, 2)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment_u(0) / self.params.period
    }

    /// The profile `x -> u(x - shift)`.
    pub fn translated(&self, shift: f64) -> Result<Self> {
        let mut endpoints: Vec<f64> = self
            .neg_interval_right_endpoints
            .iter()
            .map(|&e| self.reduce(e + shift))
            .collect();
        endpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let anchor = self.evaluate(-shift);
        Self::new(self.params, endpoints, anchor)
    }
}

/// `integral_lo^hi y^k v(y)^m dy` for an affine `v`, `k <= 2`, `m <= 2`.
fn poly_moment(s: &Segment, k: u32, m: u32) -> f64 {
    // v(y) = c0 + c1 y
    let c1 = s.slope;
    let c0 = s.value_at_lo - c1 * s.lo;
    // coefficients of v^m
    let coef: Vec<f64> = match m {
        1 => vec![c0, c1],
        2 => vec![c0 * c0, 2.0 * c0 * c1, c1 * c1],
        _ => panic!("unsupported power {m}"),
    };
    let mut acc = 0.0;
    for (j, &c) in coef.iter().enumerate() {
        let p = (k + j as u32 + 1) as i32;
        acc += c * (s.hi.powi(p) - s.lo.powi(p)) / p as f64;
    }
    acc
}
