//! Joint power spectral density estimation, spectral smoothing, JWSS
//! synthesis and stationarity diagnostics.
//!
//! A time-vertex process is jointly wide-sense stationary (JWSS) when its
//! covariance is diagonalized by the joint basis `U_T (x) U_G`; the diagonal
//! is the joint power spectral density (JPSD), one nonnegative power per
//! `(graph frequency, temporal frequency)` pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::SpectralBasis;
use crate::time_vertex::{jft, JointResponse, TemporalBasis, TimeVertexSignal};

type C64 = Complex<f64>;

/// Nonnegative `N x T` matrix of joint spectral power.
#[derive(Debug, Clone)]
pub struct Jpsd {
    values: DMatrix<f64>,
}

impl Jpsd {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("JPSD entries must be finite and nonnegative"));
        }
        Ok(Jpsd { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }
}

/// Gaussian widths for JPSD smoothing; zero disables the corresponding axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Width along graph frequencies, in units of lambda.
    pub sigma_g: f64,
    /// Width along temporal frequencies, in radians.
    pub sigma_t: f64,
}

impl SmoothingConfig {
    pub fn none() -> Self {
        SmoothingConfig {
            sigma_g: 0.0,
            sigma_t: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_g.is_finite() && self.sigma_g >= 0.0)
            || !(self.sigma_t.is_finite() && self.sigma_t >= 0.0)
        {
            return Err(Error::invalid("smoothing widths must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.sigma_g == 0.0 && self.sigma_t == 0.0
    }
}

/// Average `|JFT(X)|^2` over realizations.
///
/// The reduction over realizations is a fixed fan-in-2 pairwise tree, so the
/// summation order (and therefore the result, bit for bit) does not depend
/// on how the work might be scheduled.
pub fn estimate_jpsd(
    basis: &SpectralBasis,
    tbasis: &TemporalBasis,
    realizations: &[TimeVertexSignal],
) -> Result<Jpsd> {
    if realizations.is_empty() {
        return Err(Error::invalid("need at least one realization"));
    }
    let shape = realizations[0].shape();
    let mut terms: Vec<DMatrix<f64>> = Vec::with_capacity(realizations.len());
    for x in realizations {
        if x.shape() != shape {
            return Err(Error::dims("realizations must all have the same shape"));
        }
        let spectrum = jft(basis, tbasis, x)?;
        terms.push(spectrum.map(|c| c.norm_sqr()));
    }
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut iter = terms.into_iter();
        while let Some(first) = iter.next() {
            match iter.next() {
                Some(second) => next.push(first + second),
                None => next.push(first),
            }
        }
        terms = next;
    }
    let mean = terms.pop().unwrap() / realizations.len() as f64;
    Jpsd::new(mean)
}

fn gaussian_sq(x: f64, sigma: f64) -> f64 {
    // squared window, per the smoothing convolution
    let g = (-x * x / (2.0 * sigma * sigma)).exp();
    g * g
}

/// Smooth a JPSD with squared Gaussian windows along both frequency axes.
///
/// Weights are normalized to sum to one for every output point, so the
/// output is a convex combination of inputs. Temporal distance is circular
/// in omega; graph-frequency distance is plain `|lambda - lambda'|`. A zero
/// width reduces that axis to the identity.
pub fn smooth_jpsd(
    jpsd: &Jpsd,
    eigenvalues: &DVector<f64>,
    frequencies: &[f64],
    config: &SmoothingConfig,
) -> Result<Jpsd> {
    config.validate()?;
    let (n, t) = jpsd.shape();
    if eigenvalues.len() != n || frequencies.len() != t {
        return Err(Error::dims("grid sizes do not match the JPSD shape"));
    }
    let wg = if config.sigma_g == 0.0 {
        DMatrix::identity(n, n)
    } else {
        let mut m = DMatrix::from_fn(n, n, |out, inp| {
            gaussian_sq(eigenvalues[out] - eigenvalues[inp], config.sigma_g)
        });
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    };
    let wt = if config.sigma_t == 0.0 {
        DMatrix::identity(t, t)
    } else {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut m = DMatrix::from_fn(t, t, |out, inp| {
            let raw = (frequencies[out] - frequencies[inp]).abs() % two_pi;
            let circ = raw.min(two_pi - raw);
            gaussian_sq(circ, config.sigma_t)
        });
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    };
    Jpsd::new(&wg * jpsd.values() * wt.transpose())
}

/// Draw one realization of a zero-mean JWSS process with the given JPSD by
/// filtering unit-variance white noise with the zero-phase response
/// `sqrt(JPSD)`.
///
/// Only the magnitude matters for second-order statistics. The output is
/// the real part of the filtered noise; for any JPSD that is
/// mirror-symmetric in omega (every JPSD of a real process is) the
/// imaginary part vanishes to round-off.
pub fn synth_jwss(
    basis: &SpectralBasis,
    tbasis: &TemporalBasis,
    jpsd: &Jpsd,
    seed: u64,
) -> Result<TimeVertexSignal> {
    let (n, t) = jpsd.shape();
    if n != basis.n() || t != tbasis.len() {
        return Err(Error::dims("JPSD shape does not match the bases"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng));
    let spectrum = jft(basis, tbasis, &noise)?;
    let shaped = DMatrix::from_fn(n, t, |i, j| spectrum[(i, j)] * jpsd.values[(i, j)].sqrt());
    let mixed = shaped * tbasis.dft_matrix().transpose();
    Ok(basis.eigenvectors.clone() * mixed.map(|c| c.re))
}

/// JPSD of the joint non-causal model `a(L_J) x = b(L_J) eps`:
/// entrywise `|b|^2 / |a|^2`.
pub fn noncausal_jpsd(a_response: &JointResponse, b_response: &JointResponse) -> Result<Jpsd> {
    let a = a_response.values();
    let b = b_response.values();
    if a.shape() != b.shape() {
        return Err(Error::dims("responses must share one grid"));
    }
    if a.iter().any(|v| v.norm() <= 1e-8) {
        return Err(Error::numerical(
            "a-response is numerically singular somewhere on the grid",
        ));
    }
    Jpsd::new(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        b[(i, j)].norm_sqr() / a[(i, j)].norm_sqr()
    }))
}

/// Materialize the joint basis `U_T (x) U_G` as a dense `NT x NT` matrix.
/// Vectorization is column-major, so entry `k = N t + n` of a vectorized
/// signal is node `n` at time `t`.
pub fn joint_basis(basis: &SpectralBasis, tbasis: &TemporalBasis) -> DMatrix<C64> {
    let n = basis.n();
    let t = tbasis.len();
    let ut = tbasis.dft_matrix();
    let ug = &basis.eigenvectors;
    DMatrix::from_fn(n * t, n * t, |row, col| {
        ut[(row / n, col / n)] * ug[(row % n, col % n)]
    })
}

/// How close a covariance is to being diagonalized by the joint basis:
/// `||diag(M)||_2 / ||M||_F` for `M = U_J^H Sigma U_J`. Equals 1 exactly
/// when the process is JWSS with this graph and horizon.
pub fn diagonalization_score(
    basis: &SpectralBasis,
    tbasis: &TemporalBasis,
    sample_covariance: &DMatrix<f64>,
) -> Result<f64> {
    let nt = basis.n() * tbasis.len();
    if sample_covariance.nrows() != nt || sample_covariance.ncols() != nt {
        return Err(Error::dims(format!(
            "covariance must be {nt}x{nt}, got {}x{}",
            sample_covariance.nrows(),
            sample_covariance.ncols()
        )));
    }
    let scale = sample_covariance.norm().max(1e-300);
    for i in 0..nt {
        for j in (i + 1)..nt {
            if (sample_covariance[(i, j)] - sample_covariance[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::invalid("covariance must be symmetric"));
            }
        }
    }
    let min_eig = sample_covariance
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 * scale {
        return Err(Error::invalid("covariance must be positive semidefinite"));
    }
    let uj = joint_basis(basis, tbasis);
    let sigma_c = sample_covariance.map(|v| C64::new(v, 0.0));
    let rotated = uj.adjoint() * sigma_c * uj;
    let diag_norm: f64 = (0..nt)
        .map(|k| rotated[(k, k)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    let full_norm = rotated.norm();
    if full_norm == 0.0 {
        return Ok(1.0);
    }
    Ok(diag_norm / full_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, Normalization};
    use crate::time_vertex::ijft;
    use rand::RngExt;

    fn small_setup(n: usize, t: usize, seed: u64) -> (SpectralBasis, TemporalBasis) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let u: f64 = rng.random();
                if u < 0.8 {
                    edges.push((i, j, 0.2 + u));
                }
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (i.min(j), i.max(j));
            if !edges.iter().any(|&(x, y, _)| x == a && y == b) {
                edges.push((a, b, 1.0));
            }
        }
        let g = Graph::new(n, edges).unwrap();
        (
            SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap(),
            TemporalBasis::new(t).unwrap(),
        )
    }

    /// Mirror-symmetric random JPSD, i.e. a valid JPSD of a real process.
    fn symmetric_jpsd(n: usize, t: usize, seed: u64) -> Jpsd {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = DMatrix::zeros(n, t);
        for i in 0..n {
            for j in 0..=t / 2 {
                let v: f64 = 0.2 + rng.random::<f64>();
                p[(i, j)] = v;
                p[(i, (t - j) % t)] = v;
            }
        }
        Jpsd::new(p).unwrap()
    }

    #[test]
    fn estimate_zero_and_single_mode() {
        let (basis, tbasis) = small_setup(3, 4, 1);
        let zero = estimate_jpsd(&basis, &tbasis, &[DMatrix::zeros(3, 4)]).unwrap();
        assert_eq!(zero.values(), &DMatrix::zeros(3, 4));

        // unit coefficient at (n0 = 1, omega = 0): constant-in-time graph mode
        let mut spec = DMatrix::from_element(3, 4, C64::new(0.0, 0.0));
        spec[(1, 0)] = C64::new(1.0, 0.0);
        let x = ijft(&basis, &tbasis, &spec).unwrap();
        let p = estimate_jpsd(&basis, &tbasis, &[x]).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 0) { 1.0 } else { 0.0 };
                assert!((p.values()[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimate_white_noise_is_flat() {
        let (basis, tbasis) = small_setup(4, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<DMatrix<f64>> = (0..2000)
            .map(|_| DMatrix::from_fn(4, 8, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let p = estimate_jpsd(&basis, &tbasis, &draws).unwrap();
        for v in p.values().iter() {
            assert!((v - 1.0).abs() < 0.1, "entry {v} not within 10% of 1");
        }
    }

    #[test]
    fn estimate_rejects_bad_input() {
        let (basis, tbasis) = small_setup(3, 4, 4);
        assert!(estimate_jpsd(&basis, &tbasis, &[]).is_err());
        let a = DMatrix::zeros(3, 4);
        let b = DMatrix::zeros(3, 5);
        assert!(estimate_jpsd(&basis, &tbasis, &[a, b]).is_err());
    }

    #[test]
    fn smoothing_identity_and_constant() {
        let (basis, tbasis) = small_setup(4, 6, 5);
        let p = symmetric_jpsd(4, 6, 6);
        let none = smooth_jpsd(
            &p,
            &basis.eigenvalues,
            tbasis.frequencies(),
            &SmoothingConfig::none(),
        )
        .unwrap();
        assert_eq!(none.values(), p.values());

        let flat = Jpsd::new(DMatrix::from_element(4, 6, 2.5)).unwrap();
        let cfg = SmoothingConfig {
            sigma_g: 0.7,
            sigma_t: 1.3,
        };
        let out = smooth_jpsd(&flat, &basis.eigenvalues, tbasis.frequencies(), &cfg).unwrap();
        for v in out.values().iter() {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_matches_double_sum_oracle() {
        let (basis, tbasis) = small_setup(3, 4, 7);
        let p = symmetric_jpsd(3, 4, 8);
        let cfg = SmoothingConfig {
            sigma_g: 0.25,
            sigma_t: 0.9,
        };
        let got = smooth_jpsd(&p, &basis.eigenvalues, tbasis.frequencies(), &cfg).unwrap();

        // naive O((NT)^2) evaluation
        let two_pi = 2.0 * std::f64::consts::PI;
        for out_n in 0..3 {
            for out_t in 0..4 {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for in_n in 0..3 {
                    for in_t in 0..4 {
                        let dg = basis.eigenvalues[out_n] - basis.eigenvalues[in_n];
                        let raw = (tbasis.frequencies()[out_t] - tbasis.frequencies()[in_t]).abs() % two_pi;
                        let dt = raw.min(two_pi - raw);
                        let w = gaussian_sq(dg, cfg.sigma_g) * gaussian_sq(dt, cfg.sigma_t);
                        acc += w * p.values()[(in_n, in_t)];
                        wsum += w;
                    }
                }
                let expect = acc / wsum;
                assert!((got.values()[(out_n, out_t)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn temporal_smoothing_preserves_energy() {
        // the omega grid is uniform and circular, so row normalization is
        // doubly stochastic there and total power is conserved
        let (basis, tbasis) = small_setup(4, 8, 9);
        let p = symmetric_jpsd(4, 8, 10);
        let cfg = SmoothingConfig {
            sigma_g: 0.0,
            sigma_t: 0.8,
        };
        let out = smooth_jpsd(&p, &basis.eigenvalues, tbasis.frequencies(), &cfg).unwrap();
        assert!((out.values().sum() - p.values().sum()).abs() < 1e-10);
    }

    #[test]
    fn synth_zero_and_rank_one() {
        let (basis, tbasis) = small_setup(3, 4, 11);
        let zero = Jpsd::new(DMatrix::zeros(3, 4)).unwrap();
        let x = synth_jwss(&basis, &tbasis, &zero, 42).unwrap();
        assert_eq!(x, DMatrix::zeros(3, 4));

        // single nonzero power at (n0 = 2, omega = 0): every draw is a
        // multiple of that one joint Fourier mode
        let mut p = DMatrix::zeros(3, 4);
        p[(2, 0)] = 1.0;
        let p = Jpsd::new(p).unwrap();
        for seed in 0..5 {
            let x = synth_jwss(&basis, &tbasis, &p, seed).unwrap();
            let u = basis.eigenvectors.column(2);
            for t in 0..4 {
                let col = x.column(t);
                // column proportional to u, identical across t
                let scale = col.dot(&u);
                assert!((col - u * scale).norm() < 1e-12);
                assert!((col - x.column(0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn synth_white_jpsd_yields_identity_covariance() {
        let (basis, tbasis) = small_setup(3, 4, 13);
        let p = Jpsd::new(DMatrix::from_element(3, 4, 1.0)).unwrap();
        let nt = 12;
        let m = 5000;
        let mut cov = DMatrix::<f64>::zeros(nt, nt);
        for seed in 0..m {
            let x = synth_jwss(&basis, &tbasis, &p, seed as u64).unwrap();
            let v = DVector::from_iterator(nt, x.iter().cloned());
            cov += &v * v.transpose();
        }
        cov /= m as f64;
        let eye = DMatrix::identity(nt, nt);
        let rel = (cov - &eye).norm() / eye.norm();
        assert!(rel < 0.1, "relative Frobenius error {rel}");
    }

    #[test]
    fn synth_sample_jpsd_recovers_input() {
        let (basis, tbasis) = small_setup(4, 8, 15);
        let p = symmetric_jpsd(4, 8, 16);
        let draws: Vec<DMatrix<f64>> = (0..5000)
            .map(|seed| synth_jwss(&basis, &tbasis, &p, seed as u64).unwrap())
            .collect();
        let est = estimate_jpsd(&basis, &tbasis, &draws).unwrap();
        let rel = (est.values() - p.values()).norm() / p.values().norm();
        assert!(rel < 0.1, "relative Frobenius error {rel}");
    }

    #[test]
    fn noncausal_constants() {
        let (basis, tbasis) = small_setup(2, 2, 17);
        let one = JointResponse::from_fn(&basis, &tbasis, |_, _| C64::new(1.0, 0.0)).unwrap();
        let two = JointResponse::from_fn(&basis, &tbasis, |_, _| C64::new(2.0, 0.0)).unwrap();
        let p = noncausal_jpsd(&one, &one).unwrap();
        assert!(p.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let p = noncausal_jpsd(&two, &one).unwrap();
        assert!(p.values().iter().all(|v| (v - 0.25).abs() < 1e-12));

        let tiny = JointResponse::from_fn(&basis, &tbasis, |_, _| C64::new(1e-9, 0.0)).unwrap();
        assert!(noncausal_jpsd(&tiny, &one).is_err());
    }

    #[test]
    fn noncausal_synthesis_covariance_matches_oracle() {
        // Filter white noise by b and solve by a, directly in the joint
        // spectral domain; the sample covariance must match
        // U_J diag(p) U_J^H with p = |b|^2/|a|^2.
        let (basis, tbasis) = small_setup(2, 2, 19);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = JointResponse::from_fn(&basis, &tbasis, |_, _| {
            C64::new(1.0 + rng.random::<f64>(), 0.0)
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = JointResponse::from_fn(&basis, &tbasis, |_, _| {
            C64::new(0.5 + rng.random::<f64>(), 0.0)
        })
        .unwrap();
        let p = noncausal_jpsd(&a, &b).unwrap();

        let nt = 4;
        let mut draw_rng = ChaCha8Rng::seed_from_u64(22);
        let mut cov = DMatrix::<f64>::zeros(nt, nt);
        for _ in 0..10_000 {
            let noise = DMatrix::from_fn(2, 2, |_, _| StandardNormal.sample(&mut draw_rng));
            let spec = jft(&basis, &tbasis, &noise).unwrap();
            let shaped = DMatrix::from_fn(2, 2, |i, j| {
                spec[(i, j)] * b.values()[(i, j)] / a.values()[(i, j)]
            });
            let x = ijft(&basis, &tbasis, &shaped).unwrap();
            let v = DVector::from_iterator(nt, x.iter().cloned());
            cov += &v * v.transpose();
        }
        cov /= 10_000.0;

        let uj = joint_basis(&basis, &tbasis);
        let diag = DMatrix::from_fn(nt, nt, |i, j| {
            if i == j {
                C64::new(p.values()[(i % 2, i / 2)], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let oracle = (&uj * diag * uj.adjoint()).map(|c| c.re);
        let rel = (cov - &oracle).norm() / oracle.norm();
        assert!(rel < 0.15, "relative Frobenius error {rel}");
    }

    #[test]
    fn diagonalization_score_cases() {
        let (basis, tbasis) = small_setup(3, 2, 23);
        let nt = 6;
        let eye = DMatrix::identity(nt, nt);
        let s = diagonalization_score(&basis, &tbasis, &eye).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        // exactly JWSS covariance scores 1
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let uj = joint_basis(&basis, &tbasis);
        let mut p = DMatrix::zeros(3, 2);
        for i in 0..3 {
            for j in 0..2 {
                p[(i, j)] = 0.5 + rng.random::<f64>();
            }
        }
        let diag = DMatrix::from_fn(nt, nt, |i, j| {
            if i == j {
                C64::new(p[(i % 3, i / 3)], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let sigma = (&uj * diag * uj.adjoint()).map(|c| c.re);
        let s = diagonalization_score(&basis, &tbasis, &sigma).unwrap();
        assert!((s - 1.0).abs() < 1e-10, "score {s}");

        // generic SPD matrix scores strictly below 1
        let m = DMatrix::from_fn(nt, nt, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let spd = &m * m.transpose() + DMatrix::identity(nt, nt) * 0.1;
        let s = diagonalization_score(&basis, &tbasis, &spd).unwrap();
        assert!(s < 0.999, "random SPD scored {s}");

        assert!(diagonalization_score(&basis, &tbasis, &DMatrix::zeros(5, 5)).is_err());
    }
}
