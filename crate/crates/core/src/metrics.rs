//! Receiver distance tables, interference-plus-noise covariances, objective
//! functions and their weight matrices.
//!
//! Two flavors of objective live here and both are kept:
//!
//! - [`objective_value`] is the reported metric: Q-function pairwise error
//!   sums for SER/BER, the log-sum-exp rate expression for MI (negated so
//!   that smaller is better), and the inverse-power min-distance proxy.
//! - [`merit_value`] is the smooth exponential form actually minimized by
//!   the optimizer; its exact gradient is what [`alpha_weights`] and the
//!   gradient assembly in [`crate::optimizer`] produce, which is what makes
//!   finite-difference gradient checks meaningful.
//!
//! Both are monotone decreasing in every pairwise distance, so they push
//! precoders the same way; they differ in scale and tail behavior only.

use crate::alignment::PrecoderSet;
use crate::constellation::SymbolSpace;
use crate::linalg::{adjoint, identity, inv};
use crate::scenario::ChannelSet;
use crate::{C64, Error, Result};
use ndarray::prelude::*;

/// Objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Ser,
    Ber,
    Mi,
    Md,
}

impl ObjectiveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveKind::Ser => "ser",
            ObjectiveKind::Ber => "ber",
            ObjectiveKind::Mi => "mi",
            ObjectiveKind::Md => "md",
        }
    }
}

/// Per-user objective configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    /// One kind per user.
    pub kinds: Vec<ObjectiveKind>,
    /// Argument scaling of the SER/BER/MI reported objectives.
    pub eta: f64,
    /// Exponent of the min-distance proxy.
    pub md_exponent: f64,
}

impl ObjectiveSpec {
    /// Same objective at every transmitter-receiver pair.
    pub fn uniform(kind: ObjectiveKind, users: usize) -> Self {
        ObjectiveSpec {
            kinds: vec![kind; users],
            eta: 2.0,
            md_exponent: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::Validation("objective: no per-user kinds".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Validation(format!(
                "objective.eta = {} must be positive",
                self.eta
            )));
        }
        if !(self.md_exponent >= 1.0) {
            return Err(Error::Validation(format!(
                "objective.md_exponent = {} must be >= 1",
                self.md_exponent
            )));
        }
        Ok(())
    }

    pub fn kind_for(&self, user: usize) -> ObjectiveKind {
        self.kinds[user.min(self.kinds.len() - 1)]
    }
}

/// Pairwise receiver distances `d[j][k]` for one user; `d[j][j] = 0`.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    pub user_index: usize,
    pub d: Array2<f64>,
}

impl DistanceTable {
    pub fn min_off_diagonal(&self) -> f64 {
        let n = self.d.nrows();
        let mut best = f64::INFINITY;
        for j in 0..n {
            for k in 0..n {
                if j != k && self.d[[j, k]] < best {
                    best = self.d[[j, k]];
                }
            }
        }
        best
    }
}

/// Gaussian tail function `Q(x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Interference-plus-noise covariance at receiver `i`:
/// `R_i = sum_{j != i} (H_ij Q_j)(H_ij Q_j)^H + sigma2 I`.
pub fn interference_covariance(
    i: usize,
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    sigma2: f64,
) -> Array2<C64> {
    let dim = channels.dim();
    let mut r = identity(dim).mapv(|z| z * sigma2);
    for j in 0..channels.users() {
        if j == i {
            continue;
        }
        let hq = channels.at(i, j).dot(&precoders.matrices[j]);
        r = r + hq.dot(&adjoint(&hq));
    }
    r
}

/// Whitened-kernel distance table at receiver `i`:
/// `d[j][k] = e^H (Q_i^H H_ii^H R_i^{-1} H_ii Q_i) e` with `e = x_j - x_k`.
pub fn distance_table(
    i: usize,
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    space: &SymbolSpace,
    sigma2: f64,
) -> Result<DistanceTable> {
    let r = interference_covariance(i, channels, precoders, sigma2);
    let r_inv = inv(&r, "interference covariance")?;
    distance_table_with_rinv(i, channels, precoders, space, &r_inv)
}

/// Same as [`distance_table`] but with a precomputed `R_i^{-1}`.
pub fn distance_table_with_rinv(
    i: usize,
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    space: &SymbolSpace,
    r_inv: &Array2<C64>,
) -> Result<DistanceTable> {
    let hq = channels.at(i, i).dot(&precoders.matrices[i]);
    let kernel = adjoint(&hq).dot(&r_inv.dot(&hq));
    let n = space.len();
    // Gram trick: d[j][k] = g[j][j] + g[k][k] - 2 Re g[j][k] with
    // g[j][k] = x_j^H K x_k.
    let kx: Vec<Array1<C64>> = space.vectors.iter().map(|v| kernel.dot(v)).collect();
    let mut g = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..space.dimension {
                acc += space.vectors[j][t].conj() * kx[k][t];
            }
            g[[j, k]] = acc;
        }
    }
    let mut d = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let val = g[[j, j]].re + g[[k, k]].re - 2.0 * g[[j, k]].re;
                d[[j, k]] = val.max(0.0);
            }
        }
    }
    Ok(DistanceTable {
        user_index: space.user_index,
        d,
    })
}

/// Distance tables for every user.
pub fn distance_tables(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    spaces: &[SymbolSpace],
    sigma2: f64,
) -> Result<Vec<DistanceTable>> {
    (0..channels.users())
        .map(|i| distance_table(i, channels, precoders, &spaces[i], sigma2))
        .collect()
}

/// Reported objective `C = sum_i f_i`, smaller is better for every kind.
///
/// SER/BER sum `Q(d / eta)` over ordered symbol pairs, MI enters negated
/// (log2-sum-exp of `-d/eta` including the self term), MD sums `d^{-r}`.
pub fn objective_value(
    spec: &ObjectiveSpec,
    tables: &[DistanceTable],
    spaces: &[SymbolSpace],
) -> Result<f64> {
    spec.validate()?;
    let mut total = 0.0;
    for table in tables {
        let u = table.user_index;
        let n = table.d.nrows();
        total += match spec.kind_for(u) {
            ObjectiveKind::Ser => {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            acc += q_func(table.d[[j, k]] / spec.eta);
                        }
                    }
                }
                acc
            }
            ObjectiveKind::Ber => {
                let beta = &spaces[u].beta;
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            acc += beta[[j, k]] as f64 * q_func(table.d[[j, k]] / spec.eta);
                        }
                    }
                }
                acc
            }
            ObjectiveKind::Mi => {
                let mut acc = 0.0;
                for j in 0..n {
                    let inner: f64 = (0..n).map(|l| (-table.d[[j, l]] / spec.eta).exp()).sum();
                    acc += inner.log2();
                }
                acc
            }
            ObjectiveKind::Md => {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            let d = table.d[[j, k]];
                            if d == 0.0 {
                                return Err(Error::SingularDistance { user: u, pair: (j, k) });
                            }
                            acc += d.powf(-spec.md_exponent);
                        }
                    }
                }
                acc
            }
        };
    }
    Ok(total)
}

/// Smooth optimization merit whose exact gradient is assembled from the
/// weight matrices: exponential pairwise sums for SER/BER, log-sum-exp for
/// MI, and the same inverse-power sum as the reported MD objective.
pub fn merit_value(
    spec: &ObjectiveSpec,
    tables: &[DistanceTable],
    spaces: &[SymbolSpace],
) -> Result<f64> {
    spec.validate()?;
    let mut total = 0.0;
    for table in tables {
        let u = table.user_index;
        let n = table.d.nrows();
        total += match spec.kind_for(u) {
            ObjectiveKind::Ser => {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            acc += (-table.d[[j, k]]).exp();
                        }
                    }
                }
                acc
            }
            ObjectiveKind::Ber => {
                let beta = &spaces[u].beta;
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            acc += beta[[j, k]] as f64 * (-table.d[[j, k]]).exp();
                        }
                    }
                }
                acc
            }
            ObjectiveKind::Mi => {
                let mut acc = 0.0;
                for j in 0..n {
                    let inner: f64 = (0..n).map(|l| (-table.d[[j, l]]).exp()).sum();
                    acc += inner.ln();
                }
                acc
            }
            ObjectiveKind::Md => {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            let d = table.d[[j, k]];
                            if d == 0.0 {
                                return Err(Error::SingularDistance { user: u, pair: (j, k) });
                            }
                            acc += d.powf(-spec.md_exponent);
                        }
                    }
                }
                acc
            }
        };
    }
    Ok(total)
}

/// Pairwise weights of the four objectives, as consumed by the error
/// covariance and the gradient:
///
/// - SER: `exp(-d)`
/// - BER: `beta * exp(-d)`
/// - MI:  `exp(-d[j][k]) / sum_l exp(-d[j][l])`, self term included
/// - MD:  `-r * d^(-r-1)` (negative; the gradient assembly consumes the sign)
pub fn alpha_weights(
    spec: &ObjectiveSpec,
    table: &DistanceTable,
    space: &SymbolSpace,
) -> Result<Array2<f64>> {
    spec.validate()?;
    let u = table.user_index;
    let n = table.d.nrows();
    let mut alpha = Array2::<f64>::zeros((n, n));
    match spec.kind_for(u) {
        ObjectiveKind::Ser => {
            for j in 0..n {
                for k in 0..n {
                    if j != k {
                        alpha[[j, k]] = (-table.d[[j, k]]).exp();
                    }
                }
            }
        }
        ObjectiveKind::Ber => {
            for j in 0..n {
                for k in 0..n {
                    if j != k {
                        alpha[[j, k]] = space.beta[[j, k]] as f64 * (-table.d[[j, k]]).exp();
                    }
                }
            }
        }
        ObjectiveKind::Mi => {
            for j in 0..n {
                let denom: f64 = (0..n).map(|l| (-table.d[[j, l]]).exp()).sum();
                for k in 0..n {
                    if j != k {
                        alpha[[j, k]] = (-table.d[[j, k]]).exp() / denom;
                    }
                }
            }
        }
        ObjectiveKind::Md => {
            let r = spec.md_exponent;
            for j in 0..n {
                for k in 0..n {
                    if j != k {
                        let d = table.d[[j, k]];
                        if d == 0.0 {
                            return Err(Error::SingularDistance { user: u, pair: (j, k) });
                        }
                        alpha[[j, k]] = -r * d.powf(-r - 1.0);
                    }
                }
            }
        }
    }
    Ok(alpha)
}

/// Weights equal to `-d(merit)/d(d[j][k])`: [`alpha_weights`] with the MD
/// sign flipped, so the assembled matrices are the exact gradient of
/// [`merit_value`] for every kind.
pub(crate) fn gradient_weights(
    spec: &ObjectiveSpec,
    table: &DistanceTable,
    space: &SymbolSpace,
) -> Result<Array2<f64>> {
    let mut w = alpha_weights(spec, table, space)?;
    if spec.kind_for(table.user_index) == ObjectiveKind::Md {
        w.mapv_inplace(|x| -x);
    }
    Ok(w)
}

/// Error covariance `E = sum_{j,k} alpha[j][k] e_jk e_jk^H`. Hermitian by
/// construction; positive semidefinite when all weights are nonnegative.
pub fn error_covariance(space: &SymbolSpace, alpha: &Array2<f64>) -> Array2<C64> {
    let dim = space.dimension;
    let n = space.len();
    let mut e = Array2::<C64>::zeros((dim, dim));
    for j in 0..n {
        for k in 0..n {
            if j == k || alpha[[j, k]] == 0.0 {
                continue;
            }
            let w = alpha[[j, k]];
            let ev = &space.vectors[j] - &space.vectors[k];
            for a in 0..dim {
                for b in 0..dim {
                    e[[a, b]] += ev[a] * ev[b].conj() * w;
                }
            }
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::SchemeTag;
    use crate::constellation::{enumerate_vectors, Constellation};
    use crate::linalg::{frobenius_sq, min_eig_hermitian};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn precoders(mats: Vec<Array2<C64>>) -> PrecoderSet {
        PrecoderSet {
            matrices: mats,
            scheme_tag: SchemeTag::Custom,
        }
    }

    fn scalar_channels(h: [[C64; 2]; 2]) -> ChannelSet {
        let mats = vec![
            array![[h[0][0]]],
            array![[h[0][1]]],
            array![[h[1][0]]],
            array![[h[1][1]]],
        ];
        ChannelSet::from_matrices(2, mats, 0).unwrap()
    }

    #[test]
    fn covariance_with_no_interferers_is_noise_only() {
        let mats = vec![array![[c(1.0, 2.0), c(0.0, 1.0)], [c(0.5, 0.0), c(1.0, -1.0)]]];
        let ch = ChannelSet::from_matrices(1, mats, 0).unwrap();
        let p = precoders(vec![array![[c(1.0, 0.0)], [c(0.0, 0.0)]]]);
        let r = interference_covariance(0, &ch, &p, 0.3);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.3 } else { 0.0 };
                assert_relative_eq!(r[[i, j]].re, expect, epsilon = 1e-15);
                assert_relative_eq!(r[[i, j]].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn covariance_with_zero_precoders_is_noise_only() {
        let sc = crate::scenario::Scenario {
            users: 3,
            antennas: 2,
            extension: 1,
            streams: vec![1; 3],
            noise_variance: 0.5,
            interference_gain: 1.0,
            max_power: vec![1.0; 3],
            channel_kind: crate::scenario::ChannelKind::MimoDense,
        };
        let ch = crate::scenario::draw_channels(&sc, 1).unwrap();
        let p = precoders(vec![Array2::zeros((2, 1)); 3]);
        let r = interference_covariance(0, &ch, &p, 0.5);
        assert_relative_eq!(r[[0, 0]].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r[[0, 1]].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_matches_hand_expansion() {
        // K=2, 2x2 explicit numbers
        let h01 = array![[c(1.0, 1.0), c(0.0, -1.0)], [c(2.0, 0.0), c(0.5, 0.5)]];
        let mats = vec![
            array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
            h01.clone(),
            h01.clone(),
            array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        ];
        let ch = ChannelSet::from_matrices(2, mats, 0).unwrap();
        let q1 = array![[c(0.3, -0.2)], [c(0.7, 0.1)]];
        let p = precoders(vec![array![[c(1.0, 0.0)], [c(0.0, 0.0)]], q1.clone()]);
        let sigma2 = 0.25;
        let r = interference_covariance(0, &ch, &p, sigma2);
        let hq = h01.dot(&q1);
        for i in 0..2 {
            for j in 0..2 {
                let mut expect = hq[[i, 0]] * hq[[j, 0]].conj();
                if i == j {
                    expect += sigma2;
                }
                assert!((r[[i, j]] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_dominates_noise_floor() {
        let sc = crate::scenario::tests_support::mimo(3, 4, 2);
        let ch = crate::scenario::draw_channels(&sc, 42).unwrap();
        let p = precoders(
            (0..3)
                .map(|_| {
                    Array2::from_shape_fn((4, 2), |(i, j)| {
                        c(((i + j) as f64 * 0.17).sin(), ((i * 2 + j) as f64 * 0.31).cos())
                    })
                })
                .collect(),
        );
        let sigma2 = 0.1;
        let r = interference_covariance(0, &ch, &p, sigma2);
        assert!(min_eig_hermitian(&r).unwrap() >= sigma2 - 1e-12);
    }

    #[test]
    fn unitary_interferer_rotation_leaves_table_unchanged() {
        let sc = crate::scenario::tests_support::mimo(3, 4, 2);
        let ch = crate::scenario::draw_channels(&sc, 9).unwrap();
        let space = enumerate_vectors(&Constellation::qpsk(), 0, 2).unwrap();
        let base: Vec<Array2<C64>> = (0..3)
            .map(|u| {
                Array2::from_shape_fn((4, 2), |(i, j)| {
                    c(
                        ((u + i + j) as f64 * 0.23).sin(),
                        ((u * 3 + i + 2 * j) as f64 * 0.41).cos(),
                    ) * 0.4
                })
            })
            .collect();
        let p = precoders(base.clone());
        let t0 = distance_table(0, &ch, &p, &space, 0.2).unwrap();

        // rotate interferer 1 by a unitary matrix
        let theta = 0.7_f64;
        let u_rot = array![
            [c(theta.cos(), 0.0), c(-theta.sin(), 0.0)],
            [c(theta.sin(), 0.0), c(theta.cos(), 0.0)]
        ];
        let mut rotated = base;
        rotated[1] = rotated[1].dot(&u_rot);
        let p_rot = precoders(rotated);
        let t1 = distance_table(0, &ch, &p_rot, &space, 0.2).unwrap();
        for j in 0..space.len() {
            for k in 0..space.len() {
                assert_relative_eq!(t0.d[[j, k]], t1.d[[j, k]], epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn scaling_own_precoder_scales_own_table() {
        let sc = crate::scenario::tests_support::mimo(2, 2, 1);
        let ch = crate::scenario::draw_channels(&sc, 30).unwrap();
        let space = enumerate_vectors(&Constellation::bpsk(), 0, 1).unwrap();
        let q0 = array![[c(0.4, 0.1)], [c(-0.2, 0.3)]];
        let q1 = array![[c(0.1, -0.5)], [c(0.6, 0.0)]];
        let p = precoders(vec![q0.clone(), q1.clone()]);
        let t = distance_table(0, &ch, &p, &space, 0.3).unwrap();

        let beta = 2.5_f64;
        let p_scaled = precoders(vec![q0.mapv(|z| z * beta.sqrt()), q1]);
        let t_scaled = distance_table(0, &ch, &p_scaled, &space, 0.3).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(t_scaled.d[[j, k]], beta * t.d[[j, k]], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn scalar_two_user_bpsk_matches_closed_form() {
        // d = |h|^2 |q|^2 |e|^2 / (|g|^2 |p|^2 + sigma2)
        let h = c(0.8, -0.3);
        let g = c(0.5, 0.2);
        let q = c(0.9, 0.1);
        let p_other = c(0.4, -0.6);
        let sigma2 = 0.2;
        let ch = scalar_channels([[h, g], [g, h]]);
        let p = precoders(vec![array![[q]], array![[p_other]]]);
        let space = enumerate_vectors(&Constellation::bpsk(), 0, 1).unwrap();
        let t = distance_table(0, &ch, &p, &space, sigma2).unwrap();
        let expect = h.norm_sqr() * q.norm_sqr() * 4.0 / (g.norm_sqr() * p_other.norm_sqr() + sigma2);
        assert_relative_eq!(t.d[[0, 1]], expect, max_relative = 1e-12);
        assert_relative_eq!(t.d[[1, 0]], expect, max_relative = 1e-12);
    }

    #[test]
    fn objective_limits_large_distance_and_zero_distance() {
        let space = enumerate_vectors(&Constellation::bpsk(), 0, 1).unwrap();
        let spaces = vec![space];

        let huge = DistanceTable {
            user_index: 0,
            d: array![[0.0, 1e9], [1e9, 0.0]],
        };
        let spec = ObjectiveSpec::uniform(ObjectiveKind::Ser, 1);
        let v = objective_value(&spec, &[huge.clone()], &spaces).unwrap();
        assert!(v.abs() < 1e-12, "f_SER -> 0 in the large-distance limit, got {v}");

        let spec_mi = ObjectiveSpec::uniform(ObjectiveKind::Mi, 1);
        let v = objective_value(&spec_mi, &[huge], &spaces).unwrap();
        assert!(v.abs() < 1e-12, "f_MI -> 0 in the large-distance limit, got {v}");

        // each ordered pair with d = 0 contributes Q(0) = 1/2
        let zero = DistanceTable {
            user_index: 0,
            d: array![[0.0, 0.0], [0.0, 0.0]],
        };
        let v = objective_value(&spec, &[zero], &spaces).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn objective_matches_scalar_oracle_for_all_kinds() {
        // 2-user BPSK scalar case, evaluated directly from the formulas
        let ch = scalar_channels([
            [c(0.9, 0.2), c(0.3, -0.4)],
            [c(-0.2, 0.5), c(1.1, 0.0)],
        ]);
        let p = precoders(vec![array![[c(0.7, -0.1)]], array![[c(0.5, 0.3)]]]);
        let spaces = vec![
            enumerate_vectors(&Constellation::bpsk(), 0, 1).unwrap(),
            enumerate_vectors(&Constellation::bpsk(), 1, 1).unwrap(),
        ];
        let sigma2 = 0.4;
        let tables = distance_tables(&ch, &p, &spaces, sigma2).unwrap();

        let eta = 2.0;
        let r_exp = 8.0;
        let mut expect_ser = 0.0;
        let mut expect_ber = 0.0;
        let mut expect_mi = 0.0;
        let mut expect_md = 0.0;
        for t in &tables {
            let d01 = t.d[[0, 1]];
            expect_ser += 2.0 * q_func(d01 / eta);
            expect_ber += 2.0 * q_func(d01 / eta); // beta = 1 for BPSK
            expect_mi += 2.0 * (1.0 + (-d01 / eta).exp()).log2();
            expect_md += 2.0 * d01.powf(-r_exp);
        }
        for (kind, expect) in [
            (ObjectiveKind::Ser, expect_ser),
            (ObjectiveKind::Ber, expect_ber),
            (ObjectiveKind::Mi, expect_mi),
            (ObjectiveKind::Md, expect_md),
        ] {
            let spec = ObjectiveSpec::uniform(kind, 2);
            let v = objective_value(&spec, &tables, &spaces).unwrap();
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }
    }

    fn three_symbol_space() -> SymbolSpace {
        // hand-built space for weight-formula tests
        SymbolSpace {
            user_index: 0,
            dimension: 1,
            vectors: vec![
                array![c(1.0, 0.0)],
                array![c(-1.0, 0.0)],
                array![c(0.0, 1.0)],
            ],
            beta: array![[0, 1, 2], [1, 0, 3], [2, 3, 0]],
            bits_per_vector: 2,
            points_per_coord: 3,
        }
    }

    #[test]
    fn alpha_formulas_match_direct_evaluation() {
        let space = three_symbol_space();
        let table = DistanceTable {
            user_index: 0,
            d: array![[0.0, 0.5, 1.2], [0.5, 0.0, 2.0], [1.2, 2.0, 0.0]],
        };

        let ser = alpha_weights(&ObjectiveSpec::uniform(ObjectiveKind::Ser, 1), &table, &space)
            .unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let expect = if j == k { 0.0 } else { (-table.d[[j, k]]).exp() };
                assert_relative_eq!(ser[[j, k]], expect, epsilon = 1e-15);
            }
        }

        let ber = alpha_weights(&ObjectiveSpec::uniform(ObjectiveKind::Ber, 1), &table, &space)
            .unwrap();
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert_relative_eq!(
                        ber[[j, k]] / ser[[j, k]],
                        space.beta[[j, k]] as f64,
                        epsilon = 1e-12
                    );
                }
            }
        }

        let mi = alpha_weights(&ObjectiveSpec::uniform(ObjectiveKind::Mi, 1), &table, &space)
            .unwrap();
        for j in 0..3 {
            let denom: f64 = (0..3).map(|l| (-table.d[[j, l]]).exp()).sum();
            let row_sum: f64 = (0..3).map(|k| mi[[j, k]]).sum();
            // self-term convention keeps each row below 1
            assert!(row_sum <= 1.0 + 1e-12);
            for k in 0..3 {
                if j != k {
                    assert_relative_eq!(mi[[j, k]], (-table.d[[j, k]]).exp() / denom, epsilon = 1e-15);
                }
            }
        }

        let md = alpha_weights(&ObjectiveSpec::uniform(ObjectiveKind::Md, 1), &table, &space)
            .unwrap();
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!(md[[j, k]] < 0.0, "md weights are negative as defined");
                    assert_relative_eq!(
                        md[[j, k]],
                        -8.0 * table.d[[j, k]].powf(-9.0),
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn md_rejects_zero_distance() {
        let space = three_symbol_space();
        let table = DistanceTable {
            user_index: 0,
            d: array![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
        };
        let err = alpha_weights(&ObjectiveSpec::uniform(ObjectiveKind::Md, 1), &table, &space)
            .unwrap_err();
        assert!(matches!(err, Error::SingularDistance { user: 0, pair: (0, 1) }));
    }

    #[test]
    fn error_covariance_zero_uniform_and_hermitian() {
        let space = enumerate_vectors(&Constellation::bpsk(), 0, 1).unwrap();

        let zero = Array2::<f64>::zeros((2, 2));
        let e = error_covariance(&space, &zero);
        assert_eq!(frobenius_sq(&e), 0.0);

        // uniform alpha = 1: two ordered pairs with |e|^2 = 4 each
        let ones = array![[0.0, 1.0], [1.0, 0.0]];
        let e = error_covariance(&space, &ones);
        assert_relative_eq!(e[[0, 0]].re, 8.0, epsilon = 1e-15);

        // random symmetric alpha stays Hermitian
        let space2 = enumerate_vectors(&Constellation::qpsk(), 0, 1).unwrap();
        let mut alpha = Array2::<f64>::zeros((4, 4));
        for j in 0..4 {
            for k in 0..4 {
                if j != k {
                    let v = ((j * 7 + k * 3) as f64 * 0.37).sin().abs();
                    alpha[[j, k]] = v;
                    alpha[[k, j]] = v;
                }
            }
        }
        let e = error_covariance(&space2, &alpha);
        let diff = &e - &adjoint(&e);
        assert!(frobenius_sq(&diff) < 1e-28);
    }

    #[test]
    fn merit_is_exact_antiderivative_of_weights() {
        // numerical check d(merit)/d(d_jk) = -gradient_weight_jk
        let space = enumerate_vectors(&Constellation::qpsk(), 0, 1).unwrap();
        let spaces = vec![space.clone()];
        let base = DistanceTable {
            user_index: 0,
            d: array![
                [0.0, 0.8, 1.4, 2.2],
                [0.8, 0.0, 0.9, 1.1],
                [1.4, 0.9, 0.0, 0.6],
                [2.2, 1.1, 0.6, 0.0]
            ],
        };
        let h = 1e-6;
        for kind in [
            ObjectiveKind::Ser,
            ObjectiveKind::Ber,
            ObjectiveKind::Mi,
            ObjectiveKind::Md,
        ] {
            let spec = ObjectiveSpec::uniform(kind, 1);
            let w = gradient_weights(&spec, &base, &space).unwrap();
            for (j, k) in [(0usize, 1usize), (2, 3), (1, 2)] {
                let mut up = base.clone();
                up.d[[j, k]] += h;
                let mut dn = base.clone();
                dn.d[[j, k]] -= h;
                let fd = (merit_value(&spec, &[up], &spaces).unwrap()
                    - merit_value(&spec, &[dn], &spaces).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(fd, -w[[j, k]], max_relative = 1e-4);
            }
        }
    }
}
