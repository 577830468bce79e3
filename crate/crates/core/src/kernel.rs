//! Closed-form singular-kernel integrals over affine segments, and the
//! pointwise / interval-averaged fractional Laplacian of two-slope profiles.
//!
//! Everything here reduces to antiderivatives of `w^p` and `w^j ln^m w`; the
//! `1 - 2s` exponent that degenerates to a logarithm at `s = 1/2` is handled
//! by a four-term series in the exponent inside a fixed window around zero.

use serde::{Deserialize, Serialize};

use crate::numeric::{pow_log_integral, pow_quot, KahanSum, BRANCH_WINDOW};
use crate::profile::TwoSlopeProfile;
use crate::{quad, Error, Result};

/// Relative tolerance for "touching" position detection.
const POS_TOL: f64 = 1e-12;
/// Relative tolerance below which a value jump at a contact point is snapped
/// to zero (profiles are continuous; this absorbs construction roundoff).
const VAL_TOL: f64 = 1e-9;
/// Hard cap on the number of periods summed per side in window truncations.
const PERIOD_CAP: u64 = 20_000_000;

/// Validated kernel exponent `s` in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelExponent {
    s: f64,
}

impl KernelExponent {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > 0.0 && s < 1.0 {
            Ok(KernelExponent { s })
        } else {
            Err(Error::InvalidExponent(s))
        }
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    /// True when `1 - 2s` falls inside the logarithmic branch window.
    #[inline]
    pub fn near_half(&self) -> bool {
        (1.0 - 2.0 * self.s).abs() < BRANCH_WINDOW
    }
}

impl TryFrom<f64> for KernelExponent {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        KernelExponent::new(s)
    }
}

impl From<KernelExponent> for f64 {
    fn from(k: KernelExponent) -> f64 {
        k.s
    }
}

/// An affine piece of a profile: `v(x) = value_at_lo + slope (x - lo)` on
/// `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub value_at_lo: f64,
    pub slope: f64,
}

impl Segment {
    pub fn new(lo: f64, hi: f64, value_at_lo: f64, slope: f64) -> Result<Self> {
        if ![lo, hi, value_at_lo, slope].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSegment("non-finite field".into()));
        }
        if !(hi > lo) {
            return Err(Error::InvalidSegment(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Segment { lo, hi, value_at_lo, slope })
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Affine extension: valid outside `[lo, hi]` as well.
    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        self.value_at_lo + self.slope * (x - self.lo)
    }

    #[inline]
    pub fn value_at_hi(&self) -> f64 {
        self.value_at(self.hi)
    }

    pub fn translated(&self, dt: f64) -> Segment {
        Segment { lo: self.lo + dt, hi: self.hi + dt, ..*self }
    }

    /// The segment of the reflected field `v'(x) = v(-x)`.
    pub fn reflected(&self) -> Segment {
        Segment {
            lo: -self.hi,
            hi: -self.lo,
            value_at_lo: self.value_at_hi(),
            slope: -self.slope,
        }
    }
}

/// Double integral of `(v(x) - v(y))^2 |x - y|^(-1-2s)` over a segment with
/// itself: `slope^2 len^(3-2s) / ((1-s)(3-2s))`.
pub fn self_segment_energy(len: f64, slope: f64, k: &KernelExponent) -> Result<f64> {
    if !(len > 0.0 && len.is_finite() && slope.is_finite()) {
        return Err(Error::InvalidSegment(format!("len = {len}")));
    }
    let s = k.s();
    Ok(slope * slope * len.powf(3.0 - 2.0 * s) / ((1.0 - s) * (3.0 - 2.0 * s)))
}

/// Pair geometry after canonical left/right ordering.
struct PairGeom {
    touching: bool,
    /// Value jump `v_left(hi) - v_right(lo)` at a contact point (0 if snapped).
    jump: f64,
    /// `g` extrapolated at `right.lo` / `right.hi`, where
    /// `g(x) = v_left(x) - v_right_ext(x)` has slope `gamma`.
    h_lo: f64,
    h_hi: f64,
    gamma: f64,
}

fn pair_geometry(a: &Segment, b: &Segment) -> Result<PairGeom> {
    let scale = a.hi.abs().max(b.hi.abs()).max(a.len()).max(b.len()).max(1.0);
    let gap = b.lo - a.hi;
    if gap < -POS_TOL * scale {
        return Err(Error::OverlappingSegments);
    }
    let touching = gap <= POS_TOL * scale;
    let gamma = a.slope - b.slope;
    let (jump, h_lo) = if touching {
        let vscale = a
            .value_at_lo
            .abs()
            .max(a.value_at_hi().abs())
            .max(b.value_at_lo.abs())
            .max(b.value_at_hi().abs())
            .max(1.0);
        let mut j = a.value_at_hi() - b.value_at_lo;
        if j.abs() <= VAL_TOL * vscale {
            j = 0.0;
        }
        (j, j)
    } else {
        (0.0, a.value_at(b.lo) - b.value_at_lo)
    };
    Ok(PairGeom { touching, jump, h_lo, h_hi: h_lo + gamma * b.len(), gamma })
}

fn binom(k: u32, j: u32) -> f64 {
    match (k, j) {
        (_, 0) => 1.0,
        (1, 1) | (2, 2) => 1.0,
        (2, 1) => 2.0,
        _ => panic!("binom({k}, {j}) out of supported range"),
    }
}

/// Coefficient `C(k,j) h^(k-j) (-gamma)^j` with the `0^0 = 1` convention.
fn term_coef(k: u32, j: u32, h: f64, gamma: f64) -> f64 {
    let hp = if k == j { 1.0 } else { h.powi((k - j) as i32) };
    let gp = if j == 0 { 1.0 } else { (-gamma).powi(j as i32) };
    binom(k, j) * hp * gp
}

/// `integral over x in [a_lo, a_hi] of A(x)^k (c - x)^p dx`, where
/// `A(x) = h - gamma (c - x)` (so `A` has value `h` extrapolated at `c`).
/// `w_lo` is `c - a_hi`, passed explicitly so contact points are exact zeros.
fn outer_power(a_lo: f64, c: f64, w_lo: f64, h: f64, gamma: f64, k: u32, p: f64) -> f64 {
    let w_hi = c - a_lo;
    let mut acc = 0.0;
    for j in 0..=k {
        let coef = term_coef(k, j, h, gamma);
        if coef == 0.0 {
            continue;
        }
        acc += coef * pow_quot(w_lo, w_hi, p + (j + 1) as f64);
    }
    acc
}

/// `integral over x in [a_lo, a_hi] of A(x)^k ln^m(c - x) dx` (same `A`).
fn outer_log(a_lo: f64, c: f64, w_lo: f64, h: f64, gamma: f64, k: u32, m: u32) -> f64 {
    let w_hi = c - a_lo;
    let mut acc = 0.0;
    for j in 0..=k {
        let coef = term_coef(k, j, h, gamma);
        if coef == 0.0 {
            continue;
        }
        acc += coef * pow_log_integral(w_lo, w_hi, j, m);
    }
    acc
}

/// `integral over x in a of A(x)^k [(c1 - x)^p - (c0 - x)^p] / p dx`, the
/// outer integral of an inner power quotient. Near `p = 0` the quotient is
/// expanded as `sum_{m>=1} p^(m-1)/m! [ln^m(c1-x) - ln^m(c0-x)]` (four terms,
/// error O(p^4) which is < 1e-24 relative inside the branch window).
#[allow(clippy::too_many_arguments)]
fn weighted_quotient(
    a_lo: f64,
    a_hi: f64,
    c0: f64,
    w0_lo: f64,
    h0: f64,
    c1: f64,
    h1: f64,
    gamma: f64,
    k: u32,
    p: f64,
) -> f64 {
    let w1_lo = c1 - a_hi;
    if p.abs() >= BRANCH_WINDOW {
        (outer_power(a_lo, c1, w1_lo, h1, gamma, k, p)
            - outer_power(a_lo, c0, w0_lo, h0, gamma, k, p))
            / p
    } else {
        let mut acc = 0.0;
        let mut pfac = 1.0; // p^(m-1) / m!
        for m in 1..=4u32 {
            pfac /= m as f64;
            acc += pfac
                * (outer_log(a_lo, c1, w1_lo, h1, gamma, k, m)
                    - outer_log(a_lo, c0, w0_lo, h0, gamma, k, m));
            pfac *= p;
        }
        acc
    }
}

/// Far-field evaluation for `b` far to the right of `a`: the kernel
/// `(D + tau)^e` with `D = b.lo - a.lo`, `tau = eta - xi`, is expanded
/// binomially in `tau / D`; order `m` reduces to the exact polynomial moment
/// `S_m = integral integral F(xi, eta) tau^m`. With `(len_a + len_b) / D <=
/// 1/8` the terms decay geometrically and the truncation sits below f64
/// roundoff. This avoids the antiderivative chain, whose evaluation at the
/// far endpoints cancels catastrophically for large separations.
fn far_pair(a: &Segment, b: &Segment, e: f64, quadratic: bool) -> f64 {
    let (la, lb) = (a.len(), b.len());
    let d = b.lo - a.lo;
    let (alpha, beta) = (a.slope, b.slope);
    let a0 = a.value_at_lo - b.value_at_lo;
    // monomial coefficients of F on xi^u eta^v, where
    // F = (a0 + alpha xi - beta eta)^(1 or 2)
    let fc: &[(u32, u32, f64)] = &if quadratic {
        vec![
            (0, 0, a0 * a0),
            (1, 0, 2.0 * a0 * alpha),
            (0, 1, -2.0 * a0 * beta),
            (2, 0, alpha * alpha),
            (1, 1, -2.0 * alpha * beta),
            (0, 2, beta * beta),
        ]
    } else {
        vec![(0, 0, a0), (1, 0, alpha), (0, 1, -beta)]
    };
    let mut acc = 0.0;
    let mut scale: f64 = 0.0;
    let mut coef = d.powf(e); // binom(e, m) d^(e - m)
    let mut m: u32 = 0;
    let mut small_streak: u32 = 0;
    loop {
        let mut sm = 0.0;
        let mut bin = 1.0_f64; // binom(m, j)
        for j in 0..=m {
            let sgn = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
            for &(u, v, q) in fc {
                let iu = m - j + u + 1;
                let jv = j + v + 1;
                sm += bin * sgn * q * la.powi(iu as i32) / iu as f64 * lb.powi(jv as i32)
                    / jv as f64;
            }
            bin = bin * (m - j) as f64 / (j + 1) as f64;
        }
        let term = coef * sm;
        acc += term;
        scale = scale.max(term.abs());
        // symmetric pairs have identically zero odd moments, so one small
        // term proves nothing; demand two in a row
        small_streak = if term.abs() <= 1e-17 * scale { small_streak + 1 } else { 0 };
        if m >= 3 && small_streak >= 2 {
            break;
        }
        m += 1;
        debug_assert!(m < 400, "far-field series failed to converge");
        if m >= 400 {
            break;
        }
        coef *= (e - (m - 1) as f64) / (m as f64 * d);
    }
    acc
}

/// Separation threshold for the far-field branch.
fn is_far(a: &Segment, b: &Segment) -> bool {
    b.lo - a.hi >= 8.0 * (a.len() + b.len())
}

/// Core pair integral: `integral_a integral_b (v_a(x) - v_b(y))^2 (y - x)^e`
/// for `b` weakly to the right of `a`. `e = -1-2s` gives the energy kernel;
/// `e = 0, 1, 2` give the moments used in lattice tail expansions.
pub(crate) fn pair_weighted(a: &Segment, b: &Segment, e: f64, allow_jump: bool) -> Result<f64> {
    if is_far(a, b) {
        return Ok(far_pair(a, b, e, true));
    }
    let geom = pair_geometry(a, b)?;
    if geom.touching && geom.jump != 0.0 {
        if !allow_jump {
            return Err(Error::JumpNotAllowed { jump: geom.jump });
        }
        // the contact-point exponent must stay integrable with margin
        if e + 2.0 <= BRANCH_WINDOW {
            return Err(Error::JumpNotAllowed { jump: geom.jump });
        }
    }
    let w0_lo = if geom.touching { 0.0 } else { b.lo - a.hi };
    let p0 = e + 1.0;
    let sq = weighted_quotient(a.lo, a.hi, b.lo, w0_lo, geom.h_lo, b.hi, geom.h_hi, geom.gamma, 2, p0);
    let lin =
        weighted_quotient(a.lo, a.hi, b.lo, w0_lo, geom.h_lo, b.hi, geom.h_hi, geom.gamma, 1, p0 + 1.0);
    let cst =
        weighted_quotient(a.lo, a.hi, b.lo, w0_lo, geom.h_lo, b.hi, geom.h_hi, geom.gamma, 0, p0 + 2.0);
    Ok(sq - 2.0 * b.slope * lin + b.slope * b.slope * cst)
}

/// Orders two non-overlapping segments left-to-right.
fn ordered<'a>(a: &'a Segment, b: &'a Segment) -> Result<(&'a Segment, &'a Segment)> {
    let scale = a.hi.abs().max(b.hi.abs()).max(a.len()).max(b.len()).max(1.0);
    if b.lo - a.hi >= -POS_TOL * scale {
        Ok((a, b))
    } else if a.lo - b.hi >= -POS_TOL * scale {
        Ok((b, a))
    } else {
        Err(Error::OverlappingSegments)
    }
}

/// Closed-form `integral_a integral_b (v_a(x) - v_b(y))^2 |x - y|^(-1-2s)`
/// for segments with disjoint interiors. Touching segments must either join
/// continuously or carry `allow_jump = true` with `s < 1/2` (away from the
/// branch window), since a jump at the contact makes the integral diverge
/// for `s >= 1/2`.
pub fn segment_pair_energy(
    a: &Segment,
    b: &Segment,
    k: &KernelExponent,
    allow_jump: bool,
) -> Result<f64> {
    let (l, r) = ordered(a, b)?;
    pair_weighted(l, r, -1.0 - 2.0 * k.s(), allow_jump)
}

/// `integral_a integral_b (v_a(x) - v_b(y))^2 |y - x|^n` for `n = 0, 1, 2`,
/// with `y - x >= 0` enforced by ordering. Used for lattice tail moments.
pub fn pair_power_moment(a: &Segment, b: &Segment, n: u32) -> Result<f64> {
    if n > 2 {
        return Err(Error::Unsupported("moment order <= 2".into()));
    }
    let (l, r) = ordered(a, b)?;
    pair_weighted(l, r, n as f64, true)
}

/// `integral_p integral_j (v_p(x) - v_j(y)) (y - x)^(-1-2s)` for `j` weakly
/// right of `p`. First-moment analogue of the pair energy, used by the
/// interval-averaged fractional Laplacian.
pub(crate) fn pair_linear(p_seg: &Segment, j_seg: &Segment, k: &KernelExponent) -> Result<f64> {
    if is_far(p_seg, j_seg) {
        return Ok(far_pair(p_seg, j_seg, -1.0 - 2.0 * k.s(), false));
    }
    let geom = pair_geometry(p_seg, j_seg)?;
    if geom.touching && geom.jump != 0.0 && 1.0 - 2.0 * k.s() <= BRANCH_WINDOW {
        return Err(Error::JumpNotAllowed { jump: geom.jump });
    }
    let w0_lo = if geom.touching { 0.0 } else { j_seg.lo - p_seg.hi };
    let e = -1.0 - 2.0 * k.s();
    let lin = weighted_quotient(
        p_seg.lo, p_seg.hi, j_seg.lo, w0_lo, geom.h_lo, j_seg.hi, geom.h_hi, geom.gamma, 1,
        e + 1.0,
    );
    let cst = weighted_quotient(
        p_seg.lo, p_seg.hi, j_seg.lo, w0_lo, geom.h_lo, j_seg.hi, geom.h_hi, geom.gamma, 0,
        e + 2.0,
    );
    Ok(lin - j_seg.slope * cst)
}

/// Independent numerical oracle for [`segment_pair_energy`] and
/// [`self_segment_energy`]: nested adaptive Gauss-Kronrod on the raw double
/// integral. Nothing here shares code with the closed forms above.
pub fn quadrature_oracle(a: &Segment, b: &Segment, k: &KernelExponent, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("oracle tolerance must be positive".into()));
    }
    let s = k.s();
    let expo = -1.0 - 2.0 * s;
    let same = (a.lo - b.lo).abs() <= POS_TOL * (1.0 + a.lo.abs())
        && (a.hi - b.hi).abs() <= POS_TOL * (1.0 + a.hi.abs());
    let inner_budget = 4000;
    // worst inner error estimate across all outer-node evaluations; it enters
    // the final certification scaled by the outer domain length
    let mut inner_worst: f64 = 0.0;
    let (value, outer_err, outer_len) = if same {
        // diagonal singularity: split the inner integral at y = x
        let seg = *a;
        let inner_tol = tol * 0.05 / seg.len();
        let mut f = |x: f64| {
            let vx = seg.value_at(x);
            let mut g = |y: f64| {
                let w = (y - x).abs();
                if w == 0.0 {
                    return 0.0; // measure-zero diagonal point
                }
                let d = vx - seg.value_at(y);
                d * d * w.powf(expo)
            };
            let (l, le) = quad::adaptive_soft(&mut g, seg.lo, x, inner_tol * 0.5, inner_budget);
            let (r, re) = quad::adaptive_soft(&mut g, x, seg.hi, inner_tol * 0.5, inner_budget);
            inner_worst = inner_worst.max(le + re);
            l + r
        };
        let (v, e) = quad::adaptive_soft(&mut f, seg.lo, seg.hi, tol * 0.5, inner_budget);
        (v, e, seg.len())
    } else {
        let (l, r) = ordered(a, b)?;
        let inner_tol = tol * 0.05 / l.len();
        let mut f = |x: f64| {
            let vx = l.value_at(x);
            let mut g = |y: f64| {
                let w = y - x;
                if w <= 0.0 {
                    return 0.0;
                }
                let d = vx - r.value_at(y);
                d * d * w.powf(expo)
            };
            let (v, e) = quad::adaptive_soft(&mut g, r.lo.max(x), r.hi, inner_tol, inner_budget);
            inner_worst = inner_worst.max(e);
            v
        };
        let (v, e) = quad::adaptive_soft(&mut f, l.lo, l.hi, tol * 0.5, inner_budget);
        (v, e, l.len())
    };
    let err_est = outer_err + inner_worst * outer_len;
    if !value.is_finite() || !(err_est <= tol) {
        return Err(Error::OracleBudget { err_est });
    }
    Ok(value)
}

/// A certified pointwise or averaged fractional Laplacian value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaplacianValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// A maximal run of constant slope (touching same-slope segments merged).
#[derive(Debug, Clone, Copy)]
struct Run {
    lo: f64,
    hi: f64,
    slope: f64,
}

fn merge_runs(segs: &[Segment], pos_tol: f64) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for s in segs {
        match runs.last_mut() {
            Some(r)
                if (s.lo - r.hi).abs() <= pos_tol
                    && (s.slope - r.slope).abs() <= 1e-12 * (1.0 + r.slope.abs()) =>
            {
                r.hi = s.hi;
            }
            _ => runs.push(Run { lo: s.lo, hi: s.hi, slope: s.slope }),
        }
    }
    runs
}

fn clip_segments(segs: &[Segment], xl: f64, xr: f64, pos_tol: f64) -> Vec<Segment> {
    let mut out = Vec::with_capacity(segs.len());
    for s in segs {
        let lo = s.lo.max(xl);
        let hi = s.hi.min(xr);
        if hi - lo > pos_tol {
            out.push(Segment { lo, hi, value_at_lo: s.value_at(lo), slope: s.slope });
        }
    }
    out
}

/// Shared window setup for the fractional Laplacian evaluators. Returns the
/// clipped window segments, the merged runs, the window half-width `W = K T`
/// and the number of periods `K`.
fn window_setup(
    u: &TwoSlopeProfile,
    center: f64,
    k_periods: u64,
) -> (Vec<Segment>, Vec<Run>, f64) {
    let t = u.params.period;
    let w = k_periods as f64 * t;
    let (xl, xr) = (center - w, center + w);
    let k_lo = (xl / t).floor() as i64;
    let k_hi = (xr / t).floor() as i64;
    let pos_tol = POS_TOL * t.max(1.0);
    let segs = clip_segments(&u.segments_in_window(k_lo, k_hi), xl, xr, pos_tol);
    let runs = merge_runs(&segs, pos_tol);
    (segs, runs, w)
}

/// Pointwise fractional Laplacian
/// `2 PV integral (u(x) - u(y)) |x - y|^(-1-2s) dy` of a two-slope profile.
///
/// The integral over a symmetric window of `K` whole periods on each side is
/// evaluated in closed form; the exterior is replaced by the mean of `u`
/// (exact closed form) plus a rigorously bounded zero-average remainder.
/// `x` must not sit at a slope discontinuity.
pub fn frac_laplacian_point(
    u: &TwoSlopeProfile,
    x: f64,
    k: &KernelExponent,
    tol: f64,
) -> Result<LaplacianValue> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let s = k.s();
    let t = u.params.period;
    let mphi = 0.5 * u.oscillation() * t;
    // remainder bound: 4 Mphi (K T)^(-1-2s) <= tol
    let w_needed = (4.0 * mphi / tol).powf(1.0 / (1.0 + 2.0 * s));
    let k_periods = ((w_needed / t).ceil() as u64).max(2);
    if k_periods > PERIOD_CAP {
        let best = 4.0 * mphi * (PERIOD_CAP as f64 * t).powf(-1.0 - 2.0 * s);
        return Err(Error::Certification { best_bound: best });
    }
    let xc = x - t * (x / t).floor();
    let (segs, runs, w) = window_setup(u, xc, k_periods);
    let kink_tol = 1e-11 * t.max(1.0);
    let run = runs
        .iter()
        .find(|r| xc > r.lo && xc < r.hi)
        .copied()
        .ok_or(Error::KinkPoint(x))?;
    if (xc - run.lo).min(run.hi - xc) <= kink_tol {
        return Err(Error::KinkPoint(x));
    }
    let ux = u.evaluate(xc);
    let mut acc = KahanSum::new();
    // principal value over the own affinity run
    acc.add(-run.slope * pow_quot(xc - run.lo, run.hi - xc, 1.0 - 2.0 * s));
    let pos_tol = POS_TOL * t.max(1.0);
    for seg in &segs {
        if seg.lo >= run.lo - pos_tol && seg.hi <= run.hi + pos_tol {
            continue; // covered by the principal-value term
        }
        let a = ux - seg.value_at(xc);
        if seg.hi <= xc {
            acc.add(
                a * pow_quot(xc - seg.hi, xc - seg.lo, -2.0 * s)
                    + seg.slope * pow_quot(xc - seg.hi, xc - seg.lo, 1.0 - 2.0 * s),
            );
        } else {
            acc.add(
                a * pow_quot(seg.lo - xc, seg.hi - xc, -2.0 * s)
                    - seg.slope * pow_quot(seg.lo - xc, seg.hi - xc, 1.0 - 2.0 * s),
            );
        }
    }
    // exterior mean part, both sides at exact distance W
    acc.add((ux - u.mean()) * w.powf(-2.0 * s) / s);
    Ok(LaplacianValue {
        value: 2.0 * acc.value(),
        tail_bound: 4.0 * mphi * w.powf(-1.0 - 2.0 * s),
    })
}

/// Integral (not average) of the pointwise fractional Laplacian over an
/// interval of length at most one period:
/// `integral_I (-Delta)^s u(x) dx`, certified like the pointwise version.
/// Endpoints may sit at kinks; the integrand's kink singularities are
/// integrable and handled in closed form.
pub fn frac_laplacian_avg(
    u: &TwoSlopeProfile,
    interval: (f64, f64),
    k: &KernelExponent,
    tol: f64,
) -> Result<LaplacianValue> {
    let (ia, ib) = interval;
    let t = u.params.period;
    if !(ib > ia) || !(ib - ia <= t * (1.0 + POS_TOL)) {
        return Err(Error::DegenerateInterval);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let s = k.s();
    let ilen = ib - ia;
    let mid = 0.5 * (ia + ib);
    let mphi = 0.5 * u.oscillation() * t;
    // remainder bound: 4 Mphi |I| (K T - |I|/2)^(-1-2s) <= tol
    let w_needed = (4.0 * mphi * ilen / tol).powf(1.0 / (1.0 + 2.0 * s)) + 0.5 * ilen;
    let k_periods = ((w_needed / t).ceil() as u64).max(2);
    if k_periods > PERIOD_CAP {
        let wcap = PERIOD_CAP as f64 * t;
        let best = 4.0 * mphi * ilen * (wcap - 0.5 * ilen).powf(-1.0 - 2.0 * s);
        return Err(Error::Certification { best_bound: best });
    }
    let (segs, runs, w) = window_setup(u, mid, k_periods);
    let (xl, xr) = (mid - w, mid + w);
    let pos_tol = POS_TOL * t.max(1.0);
    let mean = u.mean();
    let p = 1.0 - 2.0 * s;
    let mut acc = KahanSum::new();
    for run in &runs {
        let plo = run.lo.max(ia);
        let phi = run.hi.min(ib);
        if phi - plo <= pos_tol {
            continue;
        }
        let pseg = Segment::new(plo, phi, u.evaluate(plo), run.slope)?;
        // edge distances from the piece to its run; reconstructed run
        // endpoints drift by O(w eps) over the tiled window, and for
        // s > 1/2 the antiderivative exponent p + 1 < 1 amplifies a
        // spurious epsilon into epsilon^(p+1), so snap to zero
        let drift = pos_tol + 4.0 * f64::EPSILON * w;
        let snap = |d: f64| if d <= drift { 0.0 } else { d };
        let d_hi = snap(run.hi - phi);
        let d_lo = snap(plo - run.lo);
        let plen = phi - plo;
        // principal value over the run containing this piece:
        // -sigma integral_P [(r - x)^p - (x - l)^p] / p dx
        if p.abs() >= BRANCH_WINDOW {
            acc.add(
                -run.slope
                    * (pow_quot(d_hi, d_hi + plen, p + 1.0)
                        - pow_quot(d_lo, d_lo + plen, p + 1.0))
                    / p,
            );
        } else {
            let mut pv = 0.0;
            let mut pfac = 1.0;
            for m in 1..=4u32 {
                pfac /= m as f64;
                pv += pfac
                    * (pow_log_integral(d_hi, d_hi + plen, 0, m)
                        - pow_log_integral(d_lo, d_lo + plen, 0, m));
                pfac *= p;
            }
            acc.add(-run.slope * pv);
        }
        // cross terms against every segment outside this run
        for seg in &segs {
            if seg.lo >= run.lo - pos_tol && seg.hi <= run.hi + pos_tol {
                continue;
            }
            let v = if seg.hi <= plo + pos_tol {
                pair_linear(&pseg.reflected(), &seg.reflected(), k)?
            } else {
                pair_linear(&pseg, seg, k)?
            };
            acc.add(v);
        }
        // exterior mean part integrated over the piece
        let hl = pseg.value_at(xl) - mean;
        acc.add(
            (hl * pow_quot(plo - xl, phi - xl, 1.0 - 2.0 * s)
                + run.slope * pow_quot(plo - xl, phi - xl, 2.0 - 2.0 * s))
                / (2.0 * s),
        );
        let hr = pseg.value_at(xr) - mean;
        acc.add(
            (hr * pow_quot(xr - phi, xr - plo, 1.0 - 2.0 * s)
                - run.slope * pow_quot(xr - phi, xr - plo, 2.0 - 2.0 * s))
                / (2.0 * s),
        );
    }
    Ok(LaplacianValue {
        value: 2.0 * acc.value(),
        tail_bound: 4.0 * mphi * ilen * (w - 0.5 * ilen).powf(-1.0 - 2.0 * s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{GapConfiguration, ProblemParams, TwoSlopeProfile};
    use approx::assert_relative_eq;

    fn kexp(s: f64) -> KernelExponent {
        KernelExponent::new(s).unwrap()
    }

    fn seg(lo: f64, hi: f64, v: f64, sl: f64) -> Segment {
        Segment::new(lo, hi, v, sl).unwrap()
    }

    #[test]
    fn self_energy_matches_oracle() {
        for &s in &[0.25, 0.5, 0.75] {
            let k = kexp(s);
            for &(len, slope) in &[(1.0, 1.0), (0.3, -2.5), (2.0, 0.7)] {
                let a = seg(0.4, 0.4 + len, 0.2, slope);
                let closed = self_segment_energy(len, slope, &k).unwrap();
                let oracle = quadrature_oracle(&a, &a, &k, 1e-8 * closed.abs().max(1.0)).unwrap();
                assert_relative_eq!(closed, oracle, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn pair_energy_matches_oracle_disjoint() {
        let pairs = [
            (seg(0.0, 1.0, 0.0, 1.0), seg(1.5, 2.0, -0.3, -4.0)),
            (seg(-2.0, -0.7, 1.0, -0.5), seg(0.01, 0.02, 0.0, 2.0)),
            (seg(0.0, 0.5, 0.1, 0.0), seg(0.5001, 3.0, -1.0, 1.0)),
        ];
        for &s in &[0.1, 0.25, 0.5, 0.6, 0.75, 0.9] {
            let k = kexp(s);
            for (a, b) in &pairs {
                let closed = segment_pair_energy(a, b, &k, false).unwrap();
                let oracle = quadrature_oracle(a, b, &k, 1e-9 * closed.abs().max(1.0)).unwrap();
                assert_relative_eq!(closed, oracle, max_relative = 1e-8, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pair_energy_touching_continuous() {
        // continuous kink at x = 1: both sides take value 0.7 there
        let a = seg(0.0, 1.0, -0.3, 1.0);
        let b = seg(1.0, 1.8, 0.7, -2.0);
        for &s in &[0.2, 0.5, 0.8] {
            let k = kexp(s);
            let closed = segment_pair_energy(&a, &b, &k, false).unwrap();
            let oracle = quadrature_oracle(&a, &b, &k, 1e-10).unwrap();
            assert_relative_eq!(closed, oracle, max_relative = 1e-7);
        }
    }

    #[test]
    fn pair_energy_touching_jump() {
        let a = seg(0.0, 1.0, 0.0, 1.0);
        let b = seg(1.0, 2.0, 1.5, 1.0); // jump of 0.5 at the contact
        let k = kexp(0.2);
        assert!(matches!(
            segment_pair_energy(&a, &b, &k, false),
            Err(Error::JumpNotAllowed { .. })
        ));
        let closed = segment_pair_energy(&a, &b, &k, true).unwrap();
        // the contact singularity caps how tightly the oracle can certify
        let oracle = quadrature_oracle(&a, &b, &k, 1e-4).unwrap();
        assert_relative_eq!(closed, oracle, max_relative = 2e-4);
        // for s >= 1/2 the integral diverges at the contact
        assert!(segment_pair_energy(&a, &b, &kexp(0.5), true).is_err());
        assert!(segment_pair_energy(&a, &b, &kexp(0.7), true).is_err());
    }

    #[test]
    fn constant_offset_log_value() {
        // unit offset across a gap delta, s = 1/2:
        // value = ln(1/delta) + ln((delta+rho)^2 / (delta+2rho))
        let (delta, rho) = (0.01, 0.25);
        let a = seg(1.0 - rho, 1.0, 0.0, 0.0);
        let b = seg(1.0 + delta, 1.0 + delta + rho, 1.0, 0.0);
        let expect = (1.0 / delta).ln() + ((delta + rho).powi(2) / (delta + 2.0 * rho)).ln();
        let got = segment_pair_energy(&a, &b, &kexp(0.5), false).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn branch_continuity_across_half() {
        let a = seg(0.0, 1.0, 0.0, 1.0);
        let b = seg(1.0, 1.9, 1.0, -3.0);
        let c = seg(2.5, 3.1, 0.4, 0.5);
        for pair in [(&a, &b), (&a, &c), (&b, &c)] {
            let mid = segment_pair_energy(pair.0, pair.1, &kexp(0.5), false).unwrap();
            for ds in [-1e-7, 1e-7] {
                let v = segment_pair_energy(pair.0, pair.1, &kexp(0.5 + ds), false).unwrap();
                assert_relative_eq!(v, mid, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn pair_energy_invariances() {
        let a = seg(0.0, 1.0, 0.2, 1.0);
        let b = seg(1.4, 2.2, -0.5, -2.0);
        let k = kexp(0.35);
        let e = segment_pair_energy(&a, &b, &k, false).unwrap();
        // argument order, translation, reflection
        assert_relative_eq!(segment_pair_energy(&b, &a, &k, false).unwrap(), e);
        let (at, bt) = (a.translated(-7.3), b.translated(-7.3));
        assert_relative_eq!(segment_pair_energy(&at, &bt, &k, false).unwrap(), e, max_relative = 1e-12);
        let (ar, br) = (a.reflected(), b.reflected());
        assert_relative_eq!(segment_pair_energy(&br, &ar, &k, false).unwrap(), e, max_relative = 1e-12);
    }

    #[test]
    fn power_moments_match_riemann() {
        let a = seg(0.0, 0.8, 0.1, 1.0);
        let b = seg(1.1, 1.7, -0.4, -2.0);
        for n in 0..=2u32 {
            let closed = pair_power_moment(&a, &b, n).unwrap();
            let (na, nb) = (800, 800);
            let (ha, hb) = (a.len() / na as f64, b.len() / nb as f64);
            let mut acc = 0.0;
            for i in 0..na {
                let x = a.lo + (i as f64 + 0.5) * ha;
                for j in 0..nb {
                    let y = b.lo + (j as f64 + 0.5) * hb;
                    let d = a.value_at(x) - b.value_at(y);
                    acc += d * d * (y - x).powi(n as i32) * ha * hb;
                }
            }
            assert_relative_eq!(closed, acc, max_relative = 1e-5);
        }
        assert!(pair_power_moment(&a, &b, 3).is_err());
    }

    /// Numerical fractional Laplacian: symmetric pairing of y = x ± r keeps
    /// the integrand integrable at r = 0, mean field beyond the window.
    fn flp_oracle(u: &TwoSlopeProfile, x: f64, k: &KernelExponent, periods: u64) -> f64 {
        let s = k.s();
        let t = u.params.period;
        let w = periods as f64 * t;
        let ux = u.evaluate(x);
        let mut g = |r: f64| (2.0 * ux - u.evaluate(x + r) - u.evaluate(x - r)) * r.powf(-1.0 - 2.0 * s);
        // the paired numerator vanishes identically until r reaches the
        // nearest kink; starting there avoids roundoff amplified by r^(-1-2s)
        let xr = x - t * (x / t).floor();
        let r0 = u
            .base_segments()
            .iter()
            .flat_map(|sg| [sg.lo, sg.hi, sg.lo + t, sg.hi + t])
            .filter(|&b| (b - xr).abs() > 1e-14)
            .map(|b| (b - xr).abs())
            .fold(f64::INFINITY, f64::min);
        let mut acc = 0.0;
        // integrate period by period so the adaptive rule sees the kinks
        let n = periods.max(1);
        for i in 0..n {
            let (lo, hi) = ((i as f64 * t).max(r0), (i + 1) as f64 * t);
            if hi <= lo {
                continue;
            }
            let (v, _) = quad::adaptive(&mut g, lo, hi, 1e-10, 60_000).unwrap();
            acc += v;
        }
        2.0 * acc + 2.0 * (ux - u.mean()) * w.powf(-2.0 * s) / s
    }

    fn sample_profile() -> TwoSlopeProfile {
        let params = ProblemParams::new(0.5, 2.0, 0.2, 2).unwrap();
        let gaps = GapConfiguration::validated(vec![0.55, 0.25], &params).unwrap();
        TwoSlopeProfile::from_gaps(params, &gaps).unwrap()
    }

    #[test]
    fn laplacian_point_matches_oracle() {
        let u = sample_profile();
        let t = u.params.period;
        for &s in &[0.3, 0.5, 0.75] {
            let k = kexp(s);
            for &x in &[0.31, -0.07, 0.9] {
                let got = frac_laplacian_point(&u, x, &k, 1e-6).unwrap();
                let periods = 60;
                let oracle = flp_oracle(&u, x, &k, periods);
                let osc_tail = 2.0 * u.oscillation() * t * (periods as f64 * t).powf(-1.0 - 2.0 * s);
                assert!(
                    (got.value - oracle).abs() <= got.tail_bound + osc_tail + 1e-7,
                    "s={s} x={x}: {} vs {}",
                    got.value,
                    oracle
                );
            }
        }
    }

    #[test]
    fn laplacian_point_rejects_kinks() {
        let u = sample_profile();
        let k = kexp(0.4);
        assert!(matches!(frac_laplacian_point(&u, 0.0, &k, 1e-6), Err(Error::KinkPoint(_))));
        // right endpoint of the first gap: kink at delta + g_1
        assert!(frac_laplacian_point(&u, 0.75, &k, 1e-6).is_err());
    }

    #[test]
    fn laplacian_avg_matches_point_integral() {
        let u = sample_profile();
        // interval spanning a kink at x = 0.75 (gap end) inside the period
        let interval = (0.6, 0.85);
        for &s in &[0.3, 0.5, 0.7] {
            let k = kexp(s);
            let got = frac_laplacian_avg(&u, interval, &k, 1e-8).unwrap();
            let mut f = |x: f64| frac_laplacian_point(&u, x, &k, 1e-6).unwrap().value;
            // fixed panels, split at the interior kink
            let mut total = 0.0;
            let mut err = 0.0;
            for (lo, hi) in [(interval.0, 0.75), (0.75, interval.1)] {
                let n = 6;
                let h = (hi - lo) / n as f64;
                for i in 0..n {
                    let (v, e) = quad::gk15(&mut f, lo + i as f64 * h, lo + (i + 1) as f64 * h);
                    total += v;
                    err += e;
                }
            }
            assert!(
                (got.value - total).abs() <= got.tail_bound + err + 1e-4,
                "s={s}: {} vs {} (err {err})",
                got.value,
                total
            );
        }
    }

    #[test]
    fn laplacian_avg_vanishes_on_canonical_negative_interval() {
        // the sawtooth is stationary: the averaged Laplacian over its
        // negative interval cancels to within the certified tail
        for &s in &[0.25, 0.5, 0.75] {
            let params = ProblemParams::new(s, 3.0, 0.125, 1).unwrap();
            let u = TwoSlopeProfile::build_canonical(params).unwrap();
            let k = kexp(s);
            let got = frac_laplacian_avg(&u, (-params.delta, 0.0), &k, 1e-10).unwrap();
            assert!(
                got.value.abs() <= got.tail_bound + 1e-12,
                "s={s}: value {} bound {}",
                got.value,
                got.tail_bound
            );
        }
    }

    #[test]
    fn laplacian_avg_rejects_bad_intervals() {
        let u = sample_profile();
        let k = kexp(0.5);
        assert!(frac_laplacian_avg(&u, (0.5, 0.5), &k, 1e-6).is_err());
        let t = u.params.period;
        assert!(frac_laplacian_avg(&u, (0.0, 1.5 * t), &k, 1e-6).is_err());
    }
}
