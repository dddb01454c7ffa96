//! Closed-form aligned precoder constructions and subspace verification.
//!
//! Covers the 3-user MIMO eigenvector construction (interference confined to
//! `d <= M-1` dimensions per receiver), the conventional IA special case
//! (`d = M/2`), the 3-user SISO symbol-extension construction, the K-user
//! product-set construction with finite exponent order, column selection for
//! intermediate stream counts, and the rank checks that certify the
//! alignment constraints.

use crate::linalg::{frobenius_sq, hstack, inv_checked, numerical_rank};
use crate::scenario::ChannelSet;
use crate::{C64, Error, Result};
use ndarray::prelude::*;

/// Condition-number gate on every matrix inverse taken by a construction.
pub const MAX_CONDITION: f64 = 1e12;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Provenance tag of a precoder set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeTag {
    Ia,
    FiaMimo,
    FiaSiso,
    KuserAsymptotic,
    Optimized,
    Custom,
}

impl SchemeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeTag::Ia => "ia",
            SchemeTag::FiaMimo => "fia-mimo",
            SchemeTag::FiaSiso => "fia-siso",
            SchemeTag::KuserAsymptotic => "kuser-asymptotic",
            SchemeTag::Optimized => "optimized",
            SchemeTag::Custom => "custom",
        }
    }
}

/// The K precoder matrices, `Q_i` of shape `(M L) x n_i`.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub matrices: Vec<Array2<C64>>,
    pub scheme_tag: SchemeTag,
}

impl PrecoderSet {
    /// Transmit power of user `i`: squared Frobenius norm of `Q_i`.
    pub fn power(&self, i: usize) -> f64 {
        frobenius_sq(&self.matrices[i])
    }

    pub fn streams(&self) -> Vec<usize> {
        self.matrices.iter().map(|q| q.ncols()).collect()
    }

    /// Checks full column rank of every precoder at the given tolerance.
    pub fn validate_full_rank(&self, tol: f64) -> Result<()> {
        for (i, q) in self.matrices.iter().enumerate() {
            let rank = numerical_rank(q, tol)?;
            if rank < q.ncols() {
                return Err(Error::Conditioning(format!(
                    "precoder {i} is column-rank deficient ({rank} < {})",
                    q.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Per-receiver alignment diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentReport {
    /// Dimension of the interference subspace.
    pub interference_dim: usize,
    /// Dimension of the union of desired and interference subspaces.
    pub joint_dim: usize,
    /// True when the desired signal is not contained in the interference.
    pub signal_not_contained: bool,
    pub tol: f64,
}

/// Rank of the horizontally stacked column spaces at relative tolerance
/// `tol`. Empty input has rank 0.
pub fn subspace_rank(columns: &[ArrayView2<C64>], tol: f64) -> Result<usize> {
    let nonempty: Vec<ArrayView2<C64>> =
        columns.iter().filter(|m| m.ncols() > 0).cloned().collect();
    if nonempty.is_empty() {
        return Ok(0);
    }
    let stacked = hstack(&nonempty);
    numerical_rank(&stacked, tol)
}

/// Scales every precoder to exact power `p_i` (up or down). Zero matrices
/// are left untouched.
pub fn set_exact_power(p: &PrecoderSet, powers: &[f64]) -> PrecoderSet {
    let matrices = p
        .matrices
        .iter()
        .zip(powers)
        .map(|(q, &pw)| {
            let tau = frobenius_sq(q);
            if tau > 0.0 {
                q.mapv(|z| z * (pw / tau).sqrt())
            } else {
                q.clone()
            }
        })
        .collect();
    PrecoderSet {
        matrices,
        scheme_tag: p.scheme_tag,
    }
}

fn unit_power(p: PrecoderSet) -> PrecoderSet {
    let powers = vec![1.0; p.matrices.len()];
    set_exact_power(&p, &powers)
}

/// Enforces `tau(Q_i) <= P_i`: precoders over budget are scaled down,
/// others are untouched. Returns the indices of zero precoders, which are
/// flagged rather than scaled.
pub fn normalize_power(p: &PrecoderSet, max_power: &[f64]) -> (PrecoderSet, Vec<usize>) {
    let mut flagged = Vec::new();
    let matrices = p
        .matrices
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let tau = frobenius_sq(q);
            if tau == 0.0 {
                flagged.push(i);
                q.clone()
            } else if tau > max_power[i] {
                q.mapv(|z| z * (max_power[i] / tau).sqrt())
            } else {
                q.clone()
            }
        })
        .collect();
    (
        PrecoderSet {
            matrices,
            scheme_tag: p.scheme_tag,
        },
        flagged,
    )
}

/// Alignment diagnostics at every receiver: interference dimension, joint
/// dimension with the desired signal, and the containment check.
pub fn check_fia_constraints(
    channels: &ChannelSet,
    p: &PrecoderSet,
    tol: f64,
) -> Result<Vec<AlignmentReport>> {
    let k = channels.users();
    let mut reports = Vec::with_capacity(k);
    for i in 0..k {
        let cross: Vec<Array2<C64>> = (0..k)
            .filter(|&j| j != i)
            .map(|j| channels.at(i, j).dot(&p.matrices[j]))
            .collect();
        let cross_views: Vec<ArrayView2<C64>> = cross.iter().map(|m| m.view()).collect();
        let interference_dim = subspace_rank(&cross_views, tol)?;

        let desired = channels.at(i, i).dot(&p.matrices[i]);
        let mut joint_views = cross_views.clone();
        joint_views.push(desired.view());
        let joint_dim = subspace_rank(&joint_views, tol)?;

        reports.push(AlignmentReport {
            interference_dim,
            joint_dim,
            signal_not_contained: joint_dim > interference_dim,
            tol,
        });
    }
    Ok(reports)
}

fn require_three_users(channels: &ChannelSet, what: &str) -> Result<()> {
    if channels.users() != 3 {
        return Err(Error::Validation(format!(
            "{what} requires exactly 3 users, got {}",
            channels.users()
        )));
    }
    Ok(())
}

/// 3-user MIMO construction: interference at every receiver is confined to
/// the span of `d` eigenvectors of the round-trip chain matrix.
///
/// `T = H_12^{-1} H_10 H_20^{-1} H_21 H_01^{-1} H_02` (0-based receivers x
/// transmitters); the precoder of user 2 takes the first `d` eigenvectors of
/// `T` sorted by descending eigenvalue magnitude, and users 0 and 1 map them
/// through the alignment relations. All precoders are scaled to unit power.
pub fn fia_3user_mimo(channels: &ChannelSet, d: usize) -> Result<PrecoderSet> {
    require_three_users(channels, "fia_3user_mimo")?;
    let m = channels.dim();
    if m < 2 {
        return Err(Error::Validation(
            "fia_3user_mimo requires at least 2 signal dimensions".into(),
        ));
    }
    if d == 0 || d > m - 1 {
        return Err(Error::Validation(format!(
            "fia_3user_mimo: columns d = {d} must satisfy 1 <= d <= {}",
            m - 1
        )));
    }

    let inv_h12 = inv_checked(channels.at(1, 2), MAX_CONDITION, "H(1,2)")?;
    let inv_h20 = inv_checked(channels.at(2, 0), MAX_CONDITION, "H(2,0)")?;
    let inv_h01 = inv_checked(channels.at(0, 1), MAX_CONDITION, "H(0,1)")?;
    let inv_h10 = inv_checked(channels.at(1, 0), MAX_CONDITION, "H(1,0)")?;

    let t = inv_h12
        .dot(channels.at(1, 0))
        .dot(&inv_h20.dot(channels.at(2, 1)))
        .dot(&inv_h01.dot(channels.at(0, 2)));
    let (_, vecs) = crate::linalg::eig_desc(&t)?;
    let q2 = vecs.slice(s![.., ..d]).to_owned();
    let q1 = inv_h01.dot(channels.at(0, 2)).dot(&q2);
    let q0 = inv_h10.dot(channels.at(1, 2)).dot(&q2);

    Ok(unit_power(PrecoderSet {
        matrices: vec![q0, q1, q2],
        scheme_tag: SchemeTag::FiaMimo,
    }))
}

/// Conventional IA for the 3-user MIMO channel: the `d = M/2` special case
/// of [`fia_3user_mimo`], requiring an even number of dimensions.
pub fn ia_3user_closed_form(channels: &ChannelSet) -> Result<PrecoderSet> {
    require_three_users(channels, "ia_3user_closed_form")?;
    let m = channels.dim();
    if m % 2 != 0 {
        return Err(Error::Validation(format!(
            "ia_3user_closed_form requires an even dimension, got {m}"
        )));
    }
    let mut p = fia_3user_mimo(channels, m / 2)?;
    p.scheme_tag = SchemeTag::Ia;
    Ok(p)
}

fn diag_of(m: &Array2<C64>) -> Array1<C64> {
    m.diag().to_owned()
}

fn check_diag_invertible(d: &ArrayView1<C64>, ctx: &str) -> Result<()> {
    let mags: Vec<f64> = d.iter().map(|z| z.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min < max / MAX_CONDITION {
        return Err(Error::Conditioning(format!(
            "{ctx}: diagonal channel condition number exceeds {MAX_CONDITION:.1e}"
        )));
    }
    Ok(())
}

fn require_diagonal(channels: &ChannelSet, what: &str) -> Result<()> {
    if !channels.is_diagonal() {
        return Err(Error::Validation(format!(
            "{what} requires diagonal (symbol-extended SISO) channels"
        )));
    }
    Ok(())
}

/// 3-user SISO construction over `M` symbol extensions with stream counts
/// `(M-1, M-1, M-2)`.
///
/// With `w` the all-ones vector and `T` the diagonal round-trip chain
/// `H_12^{-1} H_10 H_20^{-1} H_21 H_01^{-1} H_02`, user 2 transmits on
/// `[Tw ... T^{M-2}w]`, user 0 on `H_10^{-1} H_12 [Tw ... T^{M-1}w]` and
/// user 1 on `H_01^{-1} H_02 [w ... T^{M-2}w]`. Power-iteration columns are
/// normalized individually, which leaves every span unchanged.
pub fn fia_3user_siso(channels: &ChannelSet, m: usize) -> Result<PrecoderSet> {
    require_three_users(channels, "fia_3user_siso")?;
    require_diagonal(channels, "fia_3user_siso")?;
    if m != channels.dim() {
        return Err(Error::Validation(format!(
            "fia_3user_siso: extension {m} does not match channel dimension {}",
            channels.dim()
        )));
    }
    if m < 3 {
        return Err(Error::Validation(
            "fia_3user_siso requires an extension of at least 3".into(),
        ));
    }

    let h = |i: usize, j: usize| diag_of(channels.at(i, j));
    for (i, j) in [(1, 2), (2, 0), (0, 1), (1, 0), (0, 2), (2, 1)] {
        check_diag_invertible(&h(i, j).view(), &format!("H({i},{j})"))?;
    }

    // diagonal round-trip chain
    let mut t = Array1::<C64>::from_elem(m, C64::new(1.0, 0.0));
    for i in 0..m {
        t[i] = h(1, 0)[i] / h(1, 2)[i] * (h(2, 1)[i] / h(2, 0)[i]) * (h(0, 2)[i] / h(0, 1)[i]);
    }

    // powers of T applied to the all-ones vector, normalized per column
    let mut powers: Vec<Array1<C64>> = Vec::with_capacity(m);
    let mut v = Array1::<C64>::from_elem(m, C64::new(1.0, 0.0));
    let norm = (m as f64).sqrt();
    v.mapv_inplace(|z| z / norm);
    powers.push(v.clone());
    for _ in 1..m {
        let mut next = Array1::from_shape_fn(m, |i| v[i] * t[i]);
        let norm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Conditioning(
                "fia_3user_siso: chain power collapsed to zero".into(),
            ));
        }
        next.mapv_inplace(|z| z / norm);
        powers.push(next.clone());
        v = next;
    }

    let cols_to_matrix = |idx: std::ops::Range<usize>| -> Array2<C64> {
        let views: Vec<ArrayView2<C64>> = idx
            .clone()
            .map(|k| powers[k].view().insert_axis(Axis(1)))
            .collect();
        hstack(&views)
    };

    let a = cols_to_matrix(1..m - 1); // T w .. T^{M-2} w
    let b = cols_to_matrix(1..m); // T w .. T^{M-1} w
    let c = cols_to_matrix(0..m - 1); // w .. T^{M-2} w

    let apply_diag_ratio = |num: &Array1<C64>, den: &Array1<C64>, mat: &Array2<C64>| {
        let mut out = mat.clone();
        for (row, mut r) in out.outer_iter_mut().enumerate() {
            let f = num[row] / den[row];
            r.mapv_inplace(|z| z * f);
        }
        out
    };

    let q0 = apply_diag_ratio(&h(1, 2), &h(1, 0), &b);
    let q1 = apply_diag_ratio(&h(0, 2), &h(0, 1), &c);
    let q2 = a;

    Ok(unit_power(PrecoderSet {
        matrices: vec![q0, q1, q2],
        scheme_tag: SchemeTag::FiaSiso,
    }))
}

/// Result of the K-user product-set construction.
#[derive(Debug, Clone)]
pub struct KuserDesign {
    pub precoders: PrecoderSet,
    /// Exponent bound of the product set actually used.
    pub exponent_order: usize,
    /// Number of distinct cross-link maps.
    pub map_count: usize,
    /// Streams over dimensions, identical for every user.
    pub spac_per_user: f64,
    pub reports: Vec<AlignmentReport>,
}

/// K-user SISO construction: every transmitter signals inside one shared
/// product-set subspace built from the distinct cross-link maps, so each
/// receiver sees all interference inside a proper subspace.
///
/// The exponent order starts at the largest `n` with
/// `(n+1)^kappa <= M - 1` and is reduced until the alignment constraints
/// verify numerically; order 0 failing is reported as infeasible.
pub fn kuser_siso_asymptotic(channels: &ChannelSet, m: usize) -> Result<KuserDesign> {
    let k = channels.users();
    if k < 3 {
        return Err(Error::Validation(format!(
            "kuser_siso_asymptotic requires K >= 3, got {k}"
        )));
    }
    require_diagonal(channels, "kuser_siso_asymptotic")?;
    if m != channels.dim() {
        return Err(Error::Validation(format!(
            "kuser_siso_asymptotic: extension {m} does not match channel dimension {}",
            channels.dim()
        )));
    }
    if m < 2 {
        return Err(Error::Infeasible(
            "kuser_siso_asymptotic: at least 2 dimensions are needed for order 0".into(),
        ));
    }

    let h = |i: usize, j: usize| diag_of(channels.at(i, j));
    for i in 0..k {
        for j in 0..k {
            if i != j {
                check_diag_invertible(&h(i, j).view(), &format!("H({i},{j})"))?;
            }
        }
    }

    // Distinct cross-link maps T_(i,j) with H(i,j) Q_j = T_(i,j) Q_0:
    //   tx 0:      T_(i,0) = H(i,0)                       i != 0
    //   tx 1:      T_(i,1) = H(i,1) H(2,1)^{-1} H(2,0)    i != 1, i != 2
    //   tx j >= 2: T_(i,j) = H(i,j) H(1,j)^{-1} H(1,0)    i != j, i != 1
    // The skipped pairs collapse to maps already in the list.
    let mut maps: Vec<Array1<C64>> = Vec::new();
    for i in 1..k {
        maps.push(h(i, 0));
    }
    for i in (0..k).filter(|&i| i != 1 && i != 2) {
        let mut t = h(i, 1);
        for r in 0..m {
            t[r] = t[r] / h(2, 1)[r] * h(2, 0)[r];
        }
        maps.push(t);
    }
    for j in 2..k {
        for i in (0..k).filter(|&i| i != j && i != 1) {
            let mut t = h(i, j);
            for r in 0..m {
                t[r] = t[r] / h(1, j)[r] * h(1, 0)[r];
            }
            maps.push(t);
        }
    }
    let kappa = maps.len();
    debug_assert_eq!(kappa, (k - 1) * (k - 1));

    // largest n with (n+1)^kappa <= M-1; overflow counts as too large
    let max_order = {
        let mut n = 0usize;
        loop {
            match ((n + 2) as u128).checked_pow(kappa as u32) {
                Some(size) if size <= (m - 1) as u128 => n += 1,
                _ => break n,
            }
        }
    };

    let mut order = max_order;
    loop {
        let design = build_kuser_order(channels, &maps, m, k, order)?;
        let reports = check_fia_constraints(channels, &design, DEFAULT_RANK_TOL)?;
        let feasible = reports
            .iter()
            .all(|r| r.interference_dim < m && r.signal_not_contained);
        if feasible {
            let spac = design.matrices[0].ncols() as f64 / m as f64;
            return Ok(KuserDesign {
                precoders: design,
                exponent_order: order,
                map_count: kappa,
                spac_per_user: spac,
                reports,
            });
        }
        if order == 0 {
            return Err(Error::Infeasible(format!(
                "kuser_siso_asymptotic: alignment constraints fail even at order 0 \
                 (K = {k}, M = {m})"
            )));
        }
        order -= 1;
    }
}

fn build_kuser_order(
    channels: &ChannelSet,
    maps: &[Array1<C64>],
    m: usize,
    k: usize,
    order: usize,
) -> Result<PrecoderSet> {
    let kappa = maps.len();
    let count = (order as u128 + 1).pow(kappa as u32) as usize;

    // product-set columns via an exponent odometer over the maps
    let mut cols: Vec<Array1<C64>> = Vec::with_capacity(count);
    let mut exps = vec![0usize; kappa];
    loop {
        let mut v = Array1::<C64>::from_elem(m, C64::new(1.0, 0.0));
        for (t, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                for r in 0..m {
                    v[r] *= maps[t][r];
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Conditioning(
                "kuser_siso_asymptotic: product column collapsed to zero".into(),
            ));
        }
        v.mapv_inplace(|z| z / norm);
        cols.push(v);

        // odometer increment
        let mut slot = 0;
        loop {
            if slot == kappa {
                break;
            }
            if exps[slot] < order {
                exps[slot] += 1;
                break;
            }
            exps[slot] = 0;
            slot += 1;
        }
        if slot == kappa {
            break;
        }
    }
    debug_assert_eq!(cols.len(), count);

    let views: Vec<ArrayView2<C64>> = cols
        .iter()
        .map(|v| v.view().insert_axis(Axis(1)))
        .collect();
    let q0 = hstack(&views);

    let h = |i: usize, j: usize| diag_of(channels.at(i, j));
    let ratio_apply = |num: &Array1<C64>, den: &Array1<C64>| -> Array2<C64> {
        let mut out = q0.clone();
        for (row, mut r) in out.outer_iter_mut().enumerate() {
            let f = num[row] / den[row];
            r.mapv_inplace(|z| z * f);
        }
        out
    };

    let mut matrices = Vec::with_capacity(k);
    matrices.push(q0.clone());
    matrices.push(ratio_apply(&h(2, 0), &h(2, 1))); // user 1
    for j in 2..k {
        matrices.push(ratio_apply(&h(1, 0), &h(1, j)));
    }

    Ok(unit_power(PrecoderSet {
        matrices,
        scheme_tag: SchemeTag::KuserAsymptotic,
    }))
}

/// Keeps the listed columns of every precoder (re-normalized to unit
/// power), preserving the scheme tag.
pub fn select_spac_columns(p: &PrecoderSet, keep: &[Vec<usize>]) -> Result<PrecoderSet> {
    if keep.len() != p.matrices.len() {
        return Err(Error::Validation(format!(
            "select_spac_columns: {} keep lists for {} users",
            keep.len(),
            p.matrices.len()
        )));
    }
    let mut matrices = Vec::with_capacity(p.matrices.len());
    for (u, (q, cols)) in p.matrices.iter().zip(keep).enumerate() {
        if cols.is_empty() {
            return Err(Error::Validation(format!(
                "select_spac_columns: empty keep list for user {u}"
            )));
        }
        let mut seen = vec![false; q.ncols()];
        for &c in cols {
            if c >= q.ncols() {
                return Err(Error::Validation(format!(
                    "select_spac_columns: column {c} out of range for user {u} ({} columns)",
                    q.ncols()
                )));
            }
            if seen[c] {
                return Err(Error::Validation(format!(
                    "select_spac_columns: duplicate column {c} for user {u}"
                )));
            }
            seen[c] = true;
        }
        let views: Vec<ArrayView2<C64>> = cols
            .iter()
            .map(|&c| q.slice(s![.., c..c + 1]))
            .collect();
        matrices.push(hstack(&views));
    }
    Ok(unit_power(PrecoderSet {
        matrices,
        scheme_tag: p.scheme_tag,
    }))
}
