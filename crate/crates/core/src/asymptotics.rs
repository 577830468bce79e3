//! Scaling laws of the canonical profile as `delta -> 0` at `Lambda delta = 1`:
//! the divergence normalizers for `s >= 1/2`, the finite mantissa-limit
//! constant for `s < 1/2`, and the extremal constants `1/24` and `1/2`.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{energy, energy_s0, energy_s1, lattice_interaction};
use crate::kernel::{self_segment_energy, KernelExponent, Segment};
use crate::profile::{ProblemParams, TwoSlopeProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub sigma: f64,
    pub energy: f64,
    pub ratio: f64,
    pub tail_bound: f64,
}

/// The energy normalizer: `log(1/delta)` at `s = 1/2`, and
/// `delta^(1-2s) / (2s(1-s)(2s-1)(3-2s))` for `1/2 < s < 1`.
pub fn sigma(s: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("delta = {delta} outside (0,1)")));
    }
    if !(0.5..1.0).contains(&s) {
        return Err(Error::SigmaUndefined(s));
    }
    if s == 0.5 {
        Ok((1.0 / delta).ln())
    } else {
        Ok(delta.powf(1.0 - 2.0 * s)
            / (2.0 * s * (1.0 - s) * (2.0 * s - 1.0) * (3.0 - 2.0 * s)))
    }
}

/// Certified energy/normalizer ratios of the canonical profile at
/// `Lambda = 1/delta`, `L = 1`, one row per `delta`, ordered by decreasing
/// `delta`. `tol` is relative to a two-pass estimate of the energy scale.
pub fn ratio_sweep(s: f64, deltas: &[f64], tol: f64) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() {
        return Err(Error::InvalidParams("empty delta list".into()));
    }
    let mut ds = deltas.to_vec();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let rows: Vec<Result<SweepRow>> = ds
        .par_iter()
        .map(|&delta| {
            let sg = sigma(s, delta)?;
            let params = ProblemParams::new(s, 1.0 / delta, delta, 1)?;
            let u = TwoSlopeProfile::build_canonical(params)?;
            let en = energy(&u, s, tol * sg.abs().max(1.0))?;
            Ok(SweepRow {
                delta,
                sigma: sg,
                energy: en.value,
                ratio: en.value / sg,
                tail_bound: en.tail_bound,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// CSV serialization of a sweep, deterministic 17-significant-digit floats.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta,sigma,energy,ratio,tail_bound\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.delta, r.sigma, r.energy, r.ratio, r.tail_bound
        ));
    }
    out
}

/// The `s < 1/2` limit constant
/// `(1/2) integral_0^1 integral_R (w(x)-w(y))^2 |x-y|^(-1-2s) dy dx`
/// for the mantissa `w(x) = x - floor(x)`, via jump-enabled unit-slope
/// segments over whole periods plus the certified lattice tail. Returns
/// `(value, tail_bound)`.
pub fn mantissa_constant(s: f64, tol: f64) -> Result<(f64, f64)> {
    let kexp = KernelExponent::new(s)?;
    if s >= 0.5 || kexp.near_half() {
        return Err(Error::InvalidParams(format!(
            "mantissa constant requires s < 1/2, got {s}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let base = Segment::new(0.0, 1.0, 0.0, 1.0)?;
    // right half-line: periods [1,2], [2,3], ...; the left half-line equals
    // the right one by periodicity of the integrand
    let lat = lattice_interaction(&[base], &[base.translated(1.0)], 1.0, &kexp, true, tol)?;
    let own = self_segment_energy(1.0, 1.0, &kexp)?;
    Ok((0.5 * (own + 2.0 * (lat.near + lat.tail)), lat.bound))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtremalRow {
    pub delta: f64,
    /// `energy_s0` of the canonical profile at the antisymmetric offset.
    pub s0_value: f64,
    /// `delta * energy_s1` (constant `1/2` on the whole class).
    pub delta_s1_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub limit_s0: f64,
    pub limit_s1: f64,
    pub rows: Vec<ExtremalRow>,
}

pub const DEFAULT_EXTREMAL_DELTAS: [f64; 4] = [0.5, 0.1, 1e-2, 1e-3];

/// The extremal constants `(1/24, 1/2)` with finite-`delta` evaluations of
/// `energy_s0(u, -Lambda delta / 2)` and `delta * energy_s1(u)` at
/// `Lambda = 1/delta`, `L = 1`, demonstrating convergence.
pub fn extremal_limits(deltas: &[f64]) -> Result<ExtremalReport> {
    // the kernel exponent is irrelevant for the extremal functionals
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let params = ProblemParams::new(0.5, 1.0 / delta, delta, 1)?;
        let u = TwoSlopeProfile::build_canonical(params)?;
        rows.push(ExtremalRow {
            delta,
            s0_value: energy_s0(&u, -0.5),
            delta_s1_value: delta * energy_s1(&u),
        });
    }
    Ok(ExtremalReport { limit_s0: 1.0 / 24.0, limit_s1: 0.5, rows })
}
