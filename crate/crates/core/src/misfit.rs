//! Semi-coherent interface model: linearized misfit relations, optimal load
//! split between the layers, and the interface energy density expressed
//! through the s = 1/2 seminorm of the canonical dislocation profile,
//! together with the generalized van der Merwe leading-order formula.

use serde::{Deserialize, Serialize};

use crate::energy::energy;
use crate::profile::{ProblemParams, TwoSlopeProfile};
use crate::{Error, Result};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MisfitInputs {
    pub g_plus: f64,
    pub g_minus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl MisfitInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_plus > 0.0 && self.g_minus > 0.0) {
            return Err(Error::InvalidParams("shear moduli must be positive".into()));
        }
        for nu in [self.nu_plus, self.nu_minus] {
            if !(nu > -0.5 && nu < 1.0) {
                return Err(Error::InvalidParams(format!("Poisson ratio {nu} outside (-1/2, 1)")));
            }
        }
        if !(self.c_plus > 0.0 && self.c_minus >= self.c_plus) {
            return Err(Error::InvalidParams(
                "lattice spacings must satisfy c_minus >= c_plus > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Plastic displacement-gradient pair `(m_p_plus, m_p_minus)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlasticSlopes {
    pub m_p_plus: f64,
    pub m_p_minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MisfitReport {
    /// Mean lattice spacing `(c_plus + c_minus)/2`.
    pub c: f64,
    /// Misfit strain `(c_minus - c_plus)/c`.
    pub m: f64,
    pub alpha_min: f64,
    /// Dislocation core radius `epsilon = c (alpha + 1)`.
    pub epsilon_core: f64,
    /// Dislocation spacing `Delta = c^2/(c_minus - c_plus) + epsilon`.
    pub delta_spacing: f64,
    /// `G+ G- / (2 pi (G-(1-nu+) + G+(1-nu-)))`.
    pub prefactor: f64,
    /// Generalized van der Merwe density
    /// `prefactor * |b|^2 * log(Delta/|b|) / Delta` with `|b| = c`.
    pub leading_density: f64,
    /// Certified density from the s = 1/2 seminorm of the canonical profile.
    pub finite_delta_density: f64,
    pub finite_delta_tail_bound: f64,
    /// Slopes from the linearized matching relation.
    pub plastic_linearized: PlasticSlopes,
    /// Slopes from the exact nonlinear matching relation, exposing the
    /// linearization error.
    pub plastic_nonlinear: PlasticSlopes,
    /// True when `c_plus = c_minus`: no dislocations, zero densities.
    pub coherent: bool,
    /// Set when the misfit strain is outside the semi-coherent regime
    /// (m >= 0.2): results reported but the linearization is stretched.
    pub semi_coherent_warning: bool,
}

/// Optimal elastic load split `alpha` between the layers:
/// `G-(1-nu+) / (G+(1-nu-) + G-(1-nu+))`, the exact minimizer of the
/// quadratic `alpha^2 A+ + (1-alpha)^2 A-` with `A± = G±/(2 pi (1-nu±))`.
pub fn alpha_min(inputs: &MisfitInputs) -> Result<f64> {
    inputs.validate()?;
    let num = inputs.g_minus * (1.0 - inputs.nu_plus);
    let den = inputs.g_plus * (1.0 - inputs.nu_minus) + num;
    Ok(num / den)
}

/// The trace-energy constant `G / (2 pi (1 - nu))`: the elastic energy of
/// the optimal half-plane extension per unit of `H^(1/2)` seminorm squared
/// of its boundary trace.
pub fn trace_energy_constant(g: f64, nu: f64) -> Result<f64> {
    if !(g > 0.0) || !(nu > -0.5 && nu < 1.0) {
        return Err(Error::InvalidParams(format!("invalid (G, nu) = ({g}, {nu})")));
    }
    Ok(g / (2.0 * PI * (1.0 - nu)))
}

pub fn misfit_solve(inputs: &MisfitInputs, tol: f64) -> Result<MisfitReport> {
    inputs.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let c = 0.5 * (inputs.c_plus + inputs.c_minus);
    let m = (inputs.c_minus - inputs.c_plus) / c;
    let alpha = alpha_min(inputs)?;
    let epsilon_core = c * (alpha + 1.0);
    let prefactor = inputs.g_plus * inputs.g_minus
        / (2.0
            * PI
            * (inputs.g_minus * (1.0 - inputs.nu_plus)
                + inputs.g_plus * (1.0 - inputs.nu_minus)));
    // linearized plastic slopes: m+ - m- = -1/(alpha+1), (1-a) m+ = -a m-
    let plastic_linearized = PlasticSlopes {
        m_p_plus: -alpha / (alpha + 1.0),
        m_p_minus: (1.0 - alpha) / (alpha + 1.0),
    };
    // nonlinear matching: (1 + m+)/(1 + m-) = c-/(2 c+) with the same split
    let r = inputs.c_minus / (2.0 * inputs.c_plus);
    let beta = alpha / (1.0 - alpha);
    let m_p_minus_nl = (1.0 - r) / (r + beta);
    let plastic_nonlinear =
        PlasticSlopes { m_p_plus: -beta * m_p_minus_nl, m_p_minus: m_p_minus_nl };
    if m == 0.0 {
        return Ok(MisfitReport {
            c,
            m,
            alpha_min: alpha,
            epsilon_core,
            delta_spacing: f64::INFINITY,
            prefactor,
            leading_density: 0.0,
            finite_delta_density: 0.0,
            finite_delta_tail_bound: 0.0,
            plastic_linearized,
            plastic_nonlinear,
            coherent: true,
            semi_coherent_warning: false,
        });
    }
    let delta_spacing = c * c / (inputs.c_minus - inputs.c_plus) + epsilon_core;
    let b = c;
    let leading_density =
        prefactor * b * b * (delta_spacing / b).ln() / delta_spacing;
    // finite-delta density via the dimensionless canonical profile with
    // delta = (alpha + 1) m, Lambda = 1/delta, L = 1
    let delta_dimless = (alpha + 1.0) * m;
    if delta_dimless >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "dimensionless core fraction {delta_dimless} >= 1; not a dilute dislocation regime"
        )));
    }
    let params = ProblemParams::new(0.5, 1.0 / delta_dimless, delta_dimless, 1)?;
    let v = TwoSlopeProfile::build_canonical(params)?;
    let en = energy(&v, 0.5, tol)?;
    let stiffness = alpha * alpha * inputs.g_plus / (2.0 * PI * (1.0 - inputs.nu_plus))
        + (1.0 - alpha) * (1.0 - alpha) * inputs.g_minus / (2.0 * PI * (1.0 - inputs.nu_minus));
    let finite_delta_density = stiffness * c * m * en.value;
    let finite_delta_tail_bound = stiffness * c * m * en.tail_bound;
    Ok(MisfitReport {
        c,
        m,
        alpha_min: alpha,
        epsilon_core,
        delta_spacing,
        prefactor,
        leading_density,
        finite_delta_density,
        finite_delta_tail_bound,
        plastic_linearized,
        plastic_nonlinear,
        coherent: false,
        semi_coherent_warning: m >= 0.2,
    })
}
