//! Records of computed solutions.

use crate::functionals::{EnergyBreakdown, PspResidual};
use crate::grid::RadialField;
use serde::Serialize;

/// A computed critical point `(lambda, v)` of the dual problem, with diagnostics.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub lambda: f64,
    /// Frequency `mu = e^lambda`.
    pub mu: f64,
    /// Dual mass `|f(v)|_2^2`.
    pub mass: f64,
    /// Level attached to the point by the routine that produced it.
    pub energy: f64,
    pub breakdown: EnergyBreakdown,
    /// `|P| / (|grad v|^2 + e^lambda |f(v)|^2)`.
    pub pohozaev_residual: f64,
    pub psp: PspResidual,
    /// The dual field `v`.
    pub field: RadialField,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointRecord {
    pub mu: f64,
    pub lambda: f64,
    pub mass: f64,
    pub energy: f64,
    pub pohozaev_residual: f64,
    pub psp_residual: [f64; 3],
    pub breakdown: EnergyBreakdown,
    pub sup_v: f64,
    pub r_max: f64,
}

impl CriticalPoint {
    pub fn record(&self) -> CriticalPointRecord {
        CriticalPointRecord {
            mu: self.mu,
            lambda: self.lambda,
            mass: self.mass,
            energy: self.energy,
            pohozaev_residual: self.pohozaev_residual,
            psp_residual: self.psp.as_array(),
            breakdown: self.breakdown,
            sup_v: self.field.sup_abs(),
            r_max: self.field.grid.r_max(),
        }
    }

    /// Physical profile `u = f(v)` on the field's grid.
    pub fn profile_u(&self) -> Vec<f64> {
        self.field.values.iter().map(|&t| crate::transform::f_of(t)).collect()
    }
}
