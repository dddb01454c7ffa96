//! Analytic precoder gradients and projected conjugate gradient descent,
//! plus the optimality diagnostics built on them.
//!
//! The gradient returned here is the exact conjugate-coordinate (Wirtinger)
//! gradient of [`crate::metrics::merit_value`], so a central finite
//! difference of the merit along any real/imaginary coordinate equals twice
//! the real/imaginary part of the corresponding gradient entry.

use crate::alignment::{normalize_power, PrecoderSet, SchemeTag};
use crate::constellation::SymbolSpace;
use crate::linalg::{adjoint, eigh_desc, frobenius_sq, inv, subassign_best_rows};
use crate::metrics::{
    alpha_weights, distance_table_with_rinv, error_covariance, gradient_weights,
    interference_covariance, merit_value, objective_value, DistanceTable, ObjectiveSpec,
};
use crate::scenario::ChannelSet;
use crate::{C64, Error, Result};
use ndarray::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Where the optimizer starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Closed-form IA precoders (3-user MIMO, even dimension).
    Ia,
    /// Closed-form aligned precoders at the configured stream counts.
    Fia,
    /// Seeded random precoders at unit power.
    Random,
    /// Caller-provided precoders.
    Custom,
}

/// Conjugate-gradient-descent settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop when the stacked gradient Frobenius norm falls below this.
    pub grad_tol: f64,
    /// Conjugate direction reset period.
    pub restart_period: usize,
    pub ls_initial_step: f64,
    pub ls_shrink: f64,
    pub ls_sufficient_decrease: f64,
    /// Line-search attempts before declaring a stall.
    pub ls_max_shrinks: usize,
    pub init: InitKind,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iters: 500,
            grad_tol: 1e-6,
            restart_period: 20,
            ls_initial_step: 1.0,
            ls_shrink: 0.5,
            ls_sufficient_decrease: 1e-4,
            ls_max_shrinks: 40,
            init: InitKind::Random,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restart_period == 0 {
            return Err(Error::Validation(
                "optimizer: max_iters and restart_period must be positive".into(),
            ));
        }
        if !(self.grad_tol > 0.0) || !(self.ls_initial_step > 0.0) {
            return Err(Error::Validation(
                "optimizer: grad_tol and ls_initial_step must be positive".into(),
            ));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(Error::Validation(format!(
                "optimizer: ls_shrink = {} must lie in (0, 1)",
                self.ls_shrink
            )));
        }
        if !(self.ls_sufficient_decrease > 0.0) {
            return Err(Error::Validation(
                "optimizer: ls_sufficient_decrease must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Random unit-power precoders with the given stream counts.
pub fn random_init<R: Rng>(dim: usize, streams: &[usize], rng: &mut R) -> PrecoderSet {
    let matrices = streams
        .iter()
        .map(|&n| {
            let mut q = Array2::from_shape_fn((dim, n), |_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im)
            });
            let tau = frobenius_sq(&q);
            q.mapv_inplace(|z| z / tau.sqrt());
            q
        })
        .collect();
    PrecoderSet {
        matrices,
        scheme_tag: SchemeTag::Custom,
    }
}

struct UserState {
    r_inv: Array2<C64>,
    table: DistanceTable,
}

fn per_user_state(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<Vec<UserState>> {
    (0..channels.users())
        .map(|u| {
            let r = interference_covariance(u, channels, precoders, sigma2);
            let r_inv = inv(&r, "interference covariance")?;
            let table = distance_table_with_rinv(u, channels, precoders, &spaces[u], &r_inv)?;
            Ok(UserState { r_inv, table })
        })
        .collect()
}

/// Exact merit gradients with respect to the conjugate of every precoder.
pub fn gradient_all(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<Vec<Array2<C64>>> {
    let k = channels.users();
    let states = per_user_state(channels, precoders, spaces, sigma2)?;

    // per-user pieces shared by the desired and cross terms
    let mut hq = Vec::with_capacity(k);
    let mut e_mats = Vec::with_capacity(k);
    let mut cross_core = Vec::with_capacity(k);
    for u in 0..k {
        let w = gradient_weights(spec, &states[u].table, &spaces[u])?;
        let e = error_covariance(&spaces[u], &w);
        let hq_u = channels.at(u, u).dot(&precoders.matrices[u]);
        let rinv_hq = states[u].r_inv.dot(&hq_u);
        // R_u^{-1} H_uu Q_u E_u Q_u^H H_uu^H R_u^{-1}
        let core = rinv_hq.dot(&e).dot(&adjoint(&rinv_hq));
        hq.push(hq_u);
        e_mats.push(e);
        cross_core.push(core);
    }

    let mut grads = Vec::with_capacity(k);
    for i in 0..k {
        let desired = adjoint(channels.at(i, i))
            .dot(&states[i].r_inv)
            .dot(&hq[i])
            .dot(&e_mats[i]);
        let mut g = desired.mapv(|z| -z);
        for l in 0..k {
            if l == i {
                continue;
            }
            let h_li = channels.at(l, i);
            let term = adjoint(h_li)
                .dot(&cross_core[l])
                .dot(h_li)
                .dot(&precoders.matrices[i]);
            g = g + term;
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Gradient for a single transmitter; see [`gradient_all`].
pub fn gradient(
    i: usize,
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<Array2<C64>> {
    Ok(gradient_all(channels, precoders, spec, spaces, sigma2)?.remove(i))
}

fn stacked_norm(mats: &[Array2<C64>]) -> f64 {
    mats.iter().map(frobenius_sq).sum::<f64>().sqrt()
}

fn real_inner(a: &[Array2<C64>], b: &[Array2<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y.iter())
                .map(|(p, q)| (p.conj() * q).re)
                .sum::<f64>()
        })
        .sum()
}

fn merit_of(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<f64> {
    let states = per_user_state(channels, precoders, spaces, sigma2)?;
    let tables: Vec<DistanceTable> = states.into_iter().map(|s| s.table).collect();
    merit_value(spec, &tables, spaces)
}

/// Outcome of one CGD run.
#[derive(Debug, Clone)]
pub struct CgdOutcome {
    pub precoders: PrecoderSet,
    /// Merit at the initial point and after every accepted step;
    /// nonincreasing.
    pub trace: Vec<f64>,
    /// Stacked gradient norm matching each trace entry.
    pub grad_norms: Vec<f64>,
    pub accepted_steps: usize,
    /// True when the line search could not find a decreasing step.
    pub stalled: bool,
}

/// Projected Polak-Ribiere conjugate gradient descent on the stacked
/// precoders.
///
/// Every trial point is projected onto the per-user power balls before the
/// sufficient-decrease test, so the accepted merit sequence is nonincreasing
/// and feasibility holds throughout (the projection plays the role of the
/// power multiplier). Directions fall back to steepest descent whenever the
/// conjugate direction loses the descent property or the restart period
/// elapses.
pub fn cgd_optimize(
    channels: &ChannelSet,
    init: PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
    max_power: &[f64],
    opts: &OptimizerOptions,
) -> Result<CgdOutcome> {
    opts.validate()?;
    spec.validate()?;
    let (mut current, _) = normalize_power(&init, max_power);
    current.scheme_tag = SchemeTag::Optimized;

    let mut merit = merit_of(channels, &current, spec, spaces, sigma2)?;
    let mut grad = gradient_all(channels, &current, spec, spaces, sigma2)?;
    let mut grad_norm = stacked_norm(&grad);
    let mut trace = vec![merit];
    let mut grad_norms = vec![grad_norm];
    let mut direction: Vec<Array2<C64>> = grad.iter().map(|g| g.mapv(|z| -z)).collect();
    let mut accepted = 0usize;
    let mut stalled = false;

    for iter in 0..opts.max_iters {
        if grad_norm <= opts.grad_tol {
            break;
        }
        // directional derivative of the merit along the complex direction
        let mut dd = 2.0 * real_inner(&grad, &direction);
        if dd >= 0.0 {
            direction = grad.iter().map(|g| g.mapv(|z| -z)).collect();
            dd = 2.0 * real_inner(&grad, &direction);
            if dd >= 0.0 {
                break; // numerically flat
            }
        }

        let mut step = opts.ls_initial_step;
        let mut accepted_point: Option<(PrecoderSet, f64)> = None;
        for _ in 0..=opts.ls_max_shrinks {
            let trial_mats: Vec<Array2<C64>> = current
                .matrices
                .iter()
                .zip(&direction)
                .map(|(q, d)| q + &d.mapv(|z| z * step))
                .collect();
            let trial = PrecoderSet {
                matrices: trial_mats,
                scheme_tag: SchemeTag::Optimized,
            };
            let (projected, _) = normalize_power(&trial, max_power);
            let trial_merit = merit_of(channels, &projected, spec, spaces, sigma2)?;
            if trial_merit <= merit + opts.ls_sufficient_decrease * step * dd {
                accepted_point = Some((projected, trial_merit));
                break;
            }
            step *= opts.ls_shrink;
        }

        let Some((next, next_merit)) = accepted_point else {
            stalled = true;
            break;
        };

        let next_grad = gradient_all(channels, &next, spec, spaces, sigma2)?;
        let denom = real_inner(&grad, &grad);
        let mut beta = 0.0;
        if denom > 0.0 && (iter + 1) % opts.restart_period != 0 {
            let diff: Vec<Array2<C64>> =
                next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            beta = (real_inner(&next_grad, &diff) / denom).max(0.0);
        }
        direction = next_grad
            .iter()
            .zip(&direction)
            .map(|(g, d)| d.mapv(|z| z * beta) - g)
            .collect();

        current = next;
        merit = next_merit;
        grad = next_grad;
        grad_norm = stacked_norm(&grad);
        trace.push(merit);
        grad_norms.push(grad_norm);
        accepted += 1;
    }

    Ok(CgdOutcome {
        precoders: current,
        trace,
        grad_norms,
        accepted_steps: accepted,
        stalled,
    })
}

/// Max relative error between the analytic gradient and central finite
/// differences of the merit along `n_coords` random real/imaginary
/// coordinates.
pub fn finite_difference_check<R: Rng>(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
    n_coords: usize,
    h: f64,
    rng: &mut R,
) -> Result<f64> {
    let grads = gradient_all(channels, precoders, spec, spaces, sigma2)?;
    let k = precoders.matrices.len();
    let mut worst = 0.0_f64;
    for _ in 0..n_coords {
        let u = rng.gen_range(0..k);
        let rows = precoders.matrices[u].nrows();
        let cols = precoders.matrices[u].ncols();
        let (r, c) = (rng.gen_range(0..rows), rng.gen_range(0..cols));
        let imaginary = rng.gen_bool(0.5);

        let mut perturbed = |delta: f64| -> Result<f64> {
            let mut p = precoders.clone();
            let unit = if imaginary {
                C64::new(0.0, delta)
            } else {
                C64::new(delta, 0.0)
            };
            p.matrices[u][[r, c]] += unit;
            merit_of(channels, &p, spec, spaces, sigma2)
        };
        let fd = (perturbed(h)? - perturbed(-h)?) / (2.0 * h);
        let analytic = if imaginary {
            2.0 * grads[u][[r, c]].im
        } else {
            2.0 * grads[u][[r, c]].re
        };
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Structure residual of one precoder against the simultaneous
/// diagonalization form of a stationary point.
#[derive(Debug, Clone, Copy)]
pub struct StructureResidual {
    /// Fraction of energy off the best diagonal pairing, in `[0, 1]`.
    pub residual: f64,
    /// True when either eigendecomposition has (nearly) repeated
    /// eigenvalues, which makes the eigenbasis ambiguous.
    pub degenerate_eigenvalues: bool,
}

/// Residual of `Q` against the form `U_A Lambda U_E^H` given the two
/// eigenbases: energy of `U_A^H Q U_E` off its best one-row-per-column
/// pairing, divided by total energy. The pairing search removes the
/// ordering ambiguity of the eigenbases.
pub fn structure_residual_for(u_a: &Array2<C64>, u_e: &Array2<C64>, q: &Array2<C64>) -> f64 {
    let m = adjoint(u_a).dot(q).dot(u_e);
    let total = frobenius_sq(&m);
    if total == 0.0 {
        return 0.0;
    }
    let captured = subassign_best_rows(&m.mapv(|z| z.norm_sqr()));
    (1.0 - captured / total).max(0.0)
}

/// Per-user residual of the stationary-point structure: the left factor
/// diagonalizes the whitened desired channel `H_ii^H R_i^{-1} H_ii`, the
/// right factor diagonalizes the error covariance.
pub fn local_opt_structure_residual(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<Vec<StructureResidual>> {
    let states = per_user_state(channels, precoders, spaces, sigma2)?;
    let mut out = Vec::with_capacity(channels.users());
    for u in 0..channels.users() {
        let h = channels.at(u, u);
        let kernel = adjoint(h).dot(&states[u].r_inv).dot(h);
        let (ha_vals, u_a) = eigh_desc(&kernel)?;
        let alpha = alpha_weights(spec, &states[u].table, &spaces[u])?;
        let e = error_covariance(&spaces[u], &alpha);
        let (he_vals, u_e) = eigh_desc(&e)?;

        let gap_ok = |vals: &[f64]| {
            let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            vals.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-8 * scale)
        };
        let degenerate = !gap_ok(&ha_vals) || !gap_ok(&he_vals);

        out.push(StructureResidual {
            residual: structure_residual_for(&u_a, &u_e, &precoders.matrices[u]),
            degenerate_eigenvalues: degenerate,
        });
    }
    Ok(out)
}

/// Result of the power-shrink monotonicity check.
#[derive(Debug, Clone)]
pub struct MonotonicityCheck {
    /// `(epsilon, inequality holds)` per grid point.
    pub holds: Vec<(f64, bool)>,
    /// Objective gaps `C(sqrt(1 - eps) Q) - C(Q)` per grid point.
    pub gaps: Vec<f64>,
    /// All-zero precoders are the excluded degenerate case.
    pub degenerate: bool,
}

/// Checks `C({sqrt(1-eps) Q_i}) > C({Q_i})` over an epsilon grid: shrinking
/// every precoder is equivalent to raising the noise variance, which can
/// only worsen a distance-monotone objective.
pub fn power_scaling_monotonicity_check(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spec: &ObjectiveSpec,
    spaces: &[SymbolSpace],
    sigma2: f64,
    eps_grid: &[f64],
) -> Result<MonotonicityCheck> {
    let degenerate = precoders.matrices.iter().all(|q| frobenius_sq(q) == 0.0);
    if degenerate {
        return Ok(MonotonicityCheck {
            holds: Vec::new(),
            gaps: Vec::new(),
            degenerate: true,
        });
    }
    let tables = crate::metrics::distance_tables(channels, precoders, spaces, sigma2)?;
    let base = objective_value(spec, &tables, spaces)?;
    let mut holds = Vec::with_capacity(eps_grid.len());
    let mut gaps = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Validation(format!(
                "power scaling: epsilon {eps} must lie in (0, 1)"
            )));
        }
        let scale = (1.0 - eps).sqrt();
        let shrunk = PrecoderSet {
            matrices: precoders
                .matrices
                .iter()
                .map(|q| q.mapv(|z| z * scale))
                .collect(),
            scheme_tag: precoders.scheme_tag,
        };
        let tables = crate::metrics::distance_tables(channels, &shrunk, spaces, sigma2)?;
        let value = objective_value(spec, &tables, spaces)?;
        holds.push((eps, value > base));
        gaps.push(value - base);
    }
    Ok(MonotonicityCheck {
        holds,
        gaps,
        degenerate: false,
    })
}

/// Rank of the reciprocal-channel combiner images at every transmitter,
/// computed on the positive-semidefinite form
/// `B_i = sum_{j != i} (H_ji^H G_j)(H_ji^H G_j)^H` with the LMMSE combiners
/// `G_j = R_j^{-1} H_jj Q_j`.
///
/// The exact rank equals that of the stacked images; ranking the
/// outer-product sum separates the near-aligned directions quadratically,
/// which keeps the decision stable at vanishing noise where the combiner
/// magnitudes span many orders.
pub fn reciprocal_rank_b(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    sigma2: f64,
    tol: f64,
) -> Result<Vec<usize>> {
    let k = channels.users();
    let dim = channels.dim();
    let mut combiners = Vec::with_capacity(k);
    for j in 0..k {
        let r = interference_covariance(j, channels, precoders, sigma2);
        let r_inv = inv(&r, "interference covariance")?;
        combiners.push(r_inv.dot(&channels.at(j, j).dot(&precoders.matrices[j])));
    }
    let mut ranks = Vec::with_capacity(k);
    for i in 0..k {
        let mut b = Array2::<C64>::zeros((dim, dim));
        for j in 0..k {
            if j == i {
                continue;
            }
            let img = adjoint(channels.at(j, i)).dot(&combiners[j]);
            b = b + img.dot(&adjoint(&img));
        }
        ranks.push(crate::linalg::numerical_rank(&b, tol)?);
    }
    Ok(ranks)
}
