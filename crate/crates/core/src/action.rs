//! The causal action, the difference-of-actions functional computed from a
//! signed difference, the EL function ell, and residual diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::LagrangianKernel;
use crate::linalg::pairwise_sum;
use crate::measure::{difference, DiscreteMeasure};
use crate::space::Point;

/// EL residual diagnostics for a measure against a kernel: the on-support
/// residual of ell and the worst negative excursion over a probe grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ELReport {
    pub s_param: f64,
    pub support_residual: f64,
    pub exterior_violation: f64,
    pub probe_count: usize,
}

/// S(rho): full double sum of the kernel over atom pairs, diagonal included.
pub fn action(k: &LagrangianKernel, m: &DiscreteMeasure) -> Result<f64> {
    let atoms = m.atoms();
    let mut rows = Vec::with_capacity(atoms.len());
    for a in atoms {
        let mut row = Vec::with_capacity(atoms.len());
        for b in atoms {
            row.push(a.weight * b.weight * k.eval(&a.point, &b.point)?);
        }
        rows.push(pairwise_sum(&row));
    }
    Ok(pairwise_sum(&rows))
}

/// ell(x) = integral of L(x, .) against the measure, minus the parameter.
pub fn ell(
    k: &LagrangianKernel,
    m: &DiscreteMeasure,
    x: &Point,
    s_param: f64,
) -> Result<f64> {
    Ok(integral_against(k, m, x)? - s_param)
}

/// The integral of L(x, .) against the measure (ell without the offset).
pub fn integral_against(k: &LagrangianKernel, m: &DiscreteMeasure, x: &Point) -> Result<f64> {
    let mut terms = Vec::with_capacity(m.atoms().len());
    for a in m.atoms() {
        terms.push(a.weight * k.eval(x, &a.point)?);
    }
    Ok(pairwise_sum(&terms))
}

/// S(rho_tilde) - S(rho), computed from the cancelled signed difference so
/// precision survives a large shared part:
/// 2 * sum_Delta sum_rho + sum_Delta sum_Delta.
pub fn delta_action(
    k: &LagrangianKernel,
    rho: &DiscreteMeasure,
    rho_tilde: &DiscreteMeasure,
) -> Result<f64> {
    let diff = difference(rho_tilde, rho)?;
    let net = diff.net_volume_change();
    if net.abs() > 1e-9 {
        return Err(Error::NotAVariation {
            net,
            tol: 1e-9,
        });
    }
    let delta = diff.signed_atoms();
    let mut cross_rows = Vec::with_capacity(delta.len());
    for (p, dw) in &delta {
        let mut row = Vec::with_capacity(rho.atoms().len());
        for a in rho.atoms() {
            row.push(dw * a.weight * k.eval(p, &a.point)?);
        }
        cross_rows.push(pairwise_sum(&row));
    }
    let mut quad_rows = Vec::with_capacity(delta.len());
    for (p, dw) in &delta {
        let mut row = Vec::with_capacity(delta.len());
        for (q, dv) in &delta {
            row.push(dw * dv * k.eval(p, q)?);
        }
        quad_rows.push(pairwise_sum(&row));
    }
    Ok(2.0 * pairwise_sum(&cross_rows) + pairwise_sum(&quad_rows))
}

/// Support residual and exterior violation of the EL equations at the given
/// parameter.
pub fn el_residual(
    k: &LagrangianKernel,
    m: &DiscreteMeasure,
    probes: &[Point],
    s_param: f64,
) -> Result<ELReport> {
    if probes.is_empty() {
        return Err(Error::Config("EL residual needs a nonempty probe list".into()));
    }
    let mut support_residual = 0.0f64;
    for a in m.atoms() {
        support_residual = support_residual.max(ell(k, m, &a.point, s_param)?.abs());
    }
    let mut min_probe = f64::INFINITY;
    for p in probes {
        min_probe = min_probe.min(ell(k, m, p, s_param)?);
    }
    Ok(ELReport {
        s_param,
        support_residual,
        exterior_violation: (-min_probe).max(0.0),
        probe_count: probes.len(),
    })
}

/// Finite lower bound on sup_x of the integral of L(x, .) against the
/// measure, over probes and support.
pub fn check_condition_iv(
    k: &LagrangianKernel,
    m: &DiscreteMeasure,
    probes: &[Point],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::Config("condition (iv) needs a nonempty probe list".into()));
    }
    let mut best = 0.0f64;
    for p in probes.iter().chain(m.support().iter()) {
        best = best.max(integral_against(k, m, p)?);
    }
    Ok(best)
}
