//! Joint time-vertex transforms and the two-dimensional time-vertex ARMA
//! recursion.
//!
//! A time-varying graph signal is an `N x T` matrix whose column `t` is the
//! graph signal at time `t`. The joint Fourier transform (JFT) applies the
//! GFT along the node dimension and a unitary DFT along the time dimension;
//! in vectorized form its basis is `U_T (x) U_G` (Kronecker product).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::graph::{SparseSym, SpectralBasis};

/// `N x T` matrix of node values over time; column `t` is the graph signal
/// at time `t`.
pub type TimeVertexSignal = DMatrix<f64>;

type C64 = Complex<f64>;

/// Unitary DFT basis for the time dimension.
///
/// `dft[(t, s)] = exp(j * omega_s * t) / sqrt(T)` with
/// `omega_s = 2 pi s / T`, the eigenvector matrix of the circulant
/// time-shift operator.
#[derive(Debug, Clone)]
pub struct TemporalBasis {
    len: usize,
    frequencies: Vec<f64>,
    dft: DMatrix<C64>,
}

impl TemporalBasis {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("temporal basis length must be at least 1"));
        }
        let t = len as f64;
        let frequencies: Vec<f64> = (0..len)
            .map(|s| 2.0 * std::f64::consts::PI * s as f64 / t)
            .collect();
        let scale = 1.0 / t.sqrt();
        let dft = DMatrix::from_fn(len, len, |row, col| {
            let phase = frequencies[col] * row as f64;
            C64::new(phase.cos(), phase.sin()) * scale
        });
        Ok(TemporalBasis {
            len,
            frequencies,
            dft,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Angular frequencies `omega_s = 2 pi s / T`.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn dft_matrix(&self) -> &DMatrix<C64> {
        &self.dft
    }
}

fn check_shape(basis: &SpectralBasis, tbasis: &TemporalBasis, rows: usize, cols: usize) -> Result<()> {
    if rows != basis.n() || cols != tbasis.len() {
        return Err(Error::dims(format!(
            "signal is {rows}x{cols}, expected {}x{}",
            basis.n(),
            tbasis.len()
        )));
    }
    Ok(())
}

/// Joint time-vertex Fourier transform: `U_G^T X U_T^*`.
pub fn jft(basis: &SpectralBasis, tbasis: &TemporalBasis, x: &TimeVertexSignal) -> Result<DMatrix<C64>> {
    check_shape(basis, tbasis, x.nrows(), x.ncols())?;
    let gft_cols = basis.eigenvectors.transpose() * x;
    let complex = gft_cols.map(|v| C64::new(v, 0.0));
    Ok(complex * tbasis.dft.conjugate())
}

/// Inverse JFT: `U_G Xhat U_T^T`.
///
/// The reconstruction must be real; an imaginary residue above `1e-9`
/// (infinity norm) signals an inconsistent spectrum and is an error.
pub fn ijft(basis: &SpectralBasis, tbasis: &TemporalBasis, xhat: &DMatrix<C64>) -> Result<TimeVertexSignal> {
    check_shape(basis, tbasis, xhat.nrows(), xhat.ncols())?;
    let mixed = xhat * tbasis.dft.transpose();
    let real_part = mixed.map(|v| v.re);
    let residue = mixed.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    if residue > 1e-9 {
        return Err(Error::numerical(format!(
            "inverse JFT has imaginary residue {residue:.3e}; spectrum is not conjugate-symmetric"
        )));
    }
    Ok(basis.eigenvectors.clone() * real_part)
}

/// Joint frequency response evaluated on the `(lambda_n, omega_t)` grid.
#[derive(Debug, Clone)]
pub struct JointResponse {
    values: DMatrix<C64>,
}

impl JointResponse {
    pub fn new(values: DMatrix<C64>) -> Result<Self> {
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("joint response has non-finite entries"));
        }
        Ok(JointResponse { values })
    }

    /// Evaluate `h(lambda, omega)` over the basis grid.
    pub fn from_fn<F>(basis: &SpectralBasis, tbasis: &TemporalBasis, mut h: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> C64,
    {
        let values = DMatrix::from_fn(basis.n(), tbasis.len(), |n, t| {
            h(basis.eigenvalues[n], tbasis.frequencies[t])
        });
        JointResponse::new(values)
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }
}

/// Filter a time-vertex signal in the joint frequency domain:
/// `Y = iJFT(response .* JFT(X))`.
pub fn apply_joint_filter(
    basis: &SpectralBasis,
    tbasis: &TemporalBasis,
    response: &JointResponse,
    x: &TimeVertexSignal,
) -> Result<TimeVertexSignal> {
    check_shape(basis, tbasis, x.nrows(), x.ncols())?;
    if response.values.nrows() != basis.n() || response.values.ncols() != tbasis.len() {
        return Err(Error::dims("response grid does not match the bases"));
    }
    let spectrum = jft(basis, tbasis, x)?;
    let filtered = spectrum.zip_map(&response.values, |a, b| a * b);
    ijft(basis, tbasis, &filtered)
}

/// Coefficients of the two-dimensional time-vertex ARMA recursion
///
/// `y_t + sum_{p=1..P} sum_{l=0..L_p} psi[l][p] L^l y_{t-p}
///      = sum_{q=0..Q} sum_{k=0..K_q} phi[k][q] L^k x_{t-q}`.
///
/// Coefficients are stored densely: `psi[p-1]` holds the lag-`p` polynomial
/// `psi_{0,p} .. psi_{L_p,p}` and `phi[q]` holds `phi_{0,q} .. phi_{K_q,q}`.
/// Complex values are allowed for response evaluation; the time-domain
/// recursion requires real coefficients.
#[derive(Debug, Clone)]
pub struct TvArmaCoeffs {
    psi: Vec<Vec<C64>>,
    phi: Vec<Vec<C64>>,
}

impl TvArmaCoeffs {
    pub fn new(psi: Vec<Vec<C64>>, phi: Vec<Vec<C64>>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::invalid("phi must contain at least the q = 0 polynomial"));
        }
        for (p, row) in psi.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::invalid(format!("psi polynomial at lag {} is empty", p + 1)));
            }
        }
        for (q, row) in phi.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::invalid(format!("phi polynomial at lag {q} is empty")));
            }
        }
        let finite = |rows: &[Vec<C64>]| {
            rows.iter()
                .flatten()
                .all(|c| c.re.is_finite() && c.im.is_finite())
        };
        if !finite(&psi) || !finite(&phi) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(TvArmaCoeffs { psi, phi })
    }

    pub fn from_real(psi: Vec<Vec<f64>>, phi: Vec<Vec<f64>>) -> Result<Self> {
        let lift = |rows: Vec<Vec<f64>>| {
            rows.into_iter()
                .map(|r| r.into_iter().map(|v| C64::new(v, 0.0)).collect())
                .collect()
        };
        TvArmaCoeffs::new(lift(psi), lift(phi))
    }

    /// Autoregressive temporal order `P`.
    pub fn p(&self) -> usize {
        self.psi.len()
    }

    /// Moving-average temporal order `Q`.
    pub fn q(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn psi(&self) -> &[Vec<C64>] {
        &self.psi
    }

    pub fn phi(&self) -> &[Vec<C64>] {
        &self.phi
    }

    fn is_real(&self) -> bool {
        self.psi
            .iter()
            .chain(self.phi.iter())
            .flatten()
            .all(|c| c.im == 0.0)
    }

    fn real_psi(&self) -> Vec<Vec<f64>> {
        self.psi.iter().map(|r| r.iter().map(|c| c.re).collect()).collect()
    }

    fn real_phi(&self) -> Vec<Vec<f64>> {
        self.phi.iter().map(|r| r.iter().map(|c| c.re).collect()).collect()
    }

    /// Denominator `1 + sum psi_{l,p} lambda^l e^{-j omega p}`.
    fn denominator(&self, lambda: f64, omega: f64) -> C64 {
        let mut den = C64::new(1.0, 0.0);
        for (pm1, poly) in self.psi.iter().enumerate() {
            let p = (pm1 + 1) as f64;
            let rot = C64::from_polar(1.0, -omega * p);
            let mut lam_pow = 1.0;
            for &c in poly {
                den += c * lam_pow * rot;
                lam_pow *= lambda;
            }
        }
        den
    }

    /// Numerator `sum phi_{k,q} lambda^k e^{-j omega q}`.
    fn numerator(&self, lambda: f64, omega: f64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        for (q, poly) in self.phi.iter().enumerate() {
            let rot = C64::from_polar(1.0, -omega * q as f64);
            let mut lam_pow = 1.0;
            for &c in poly {
                num += c * lam_pow * rot;
                lam_pow *= lambda;
            }
        }
        num
    }
}

/// Result of the stability screen.
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    pub stable: bool,
    /// Minimum denominator modulus over all eigenvalues and the omega grid.
    pub margin: f64,
}

const STABILITY_GRID: usize = 4096;

/// Screen the AR coefficients for stability: the recursion denominator must
/// stay away from zero for every graph frequency and every temporal
/// frequency. Evaluated on a dense 4096-point omega grid; this is a
/// conservative screen, not a proof over continuous omega.
pub fn check_stability(coeffs: &TvArmaCoeffs, eigenvalues: &DVector<f64>) -> StabilityReport {
    let mut margin = f64::INFINITY;
    for n in 0..eigenvalues.len() {
        let lambda = eigenvalues[n];
        for g in 0..STABILITY_GRID {
            let omega = 2.0 * std::f64::consts::PI * g as f64 / STABILITY_GRID as f64;
            let m = coeffs.denominator(lambda, omega).norm();
            if m < margin {
                margin = m;
            }
        }
    }
    StabilityReport {
        stable: margin > 1e-6,
        margin,
    }
}

/// Evaluate the two-dimensional frequency response of the recursion on the
/// `(lambda_n, omega_t)` grid. Errors when the denominator modulus drops
/// below `1e-8` anywhere on the grid.
pub fn tv_arma_response(
    coeffs: &TvArmaCoeffs,
    basis: &SpectralBasis,
    tbasis: &TemporalBasis,
) -> Result<JointResponse> {
    let values = DMatrix::from_fn(basis.n(), tbasis.len(), |n, t| {
        let lambda = basis.eigenvalues[n];
        let omega = tbasis.frequencies[t];
        let den = coeffs.denominator(lambda, omega);
        if den.norm() < 1e-8 {
            C64::new(f64::NAN, 0.0)
        } else {
            coeffs.numerator(lambda, omega) / den
        }
    });
    if values.iter().any(|v| v.re.is_nan()) {
        return Err(Error::Unstable(
            "recursion denominator vanishes on the frequency grid".into(),
        ));
    }
    JointResponse::new(values)
}

/// Pre-history for [`tv_arma_run`]. Matrices are chronological: the last
/// column is the sample immediately before the first output step.
#[derive(Debug, Clone)]
pub enum TvInit {
    Zero,
    PreHistory {
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
    },
}

/// Run the time-vertex ARMA recursion in the vertex domain.
///
/// Laplacian polynomials are applied by Horner's rule with sparse mat-vecs;
/// no matrix power is ever materialized. Coefficients must be real.
/// Stability is not checked here: the recursion is well defined for any
/// finite horizon (use [`check_stability`] to screen coefficients).
pub fn tv_arma_run(
    coeffs: &TvArmaCoeffs,
    laplacian: &DMatrix<f64>,
    x: &TimeVertexSignal,
    init: &TvInit,
) -> Result<TimeVertexSignal> {
    if !coeffs.is_real() {
        return Err(Error::invalid(
            "time-domain recursion requires real coefficients",
        ));
    }
    let n = laplacian.nrows();
    if x.nrows() != n {
        return Err(Error::dims(format!(
            "signal has {} rows, laplacian is {n}x{n}",
            x.nrows()
        )));
    }
    if let TvInit::PreHistory { inputs, outputs } = init {
        if inputs.nrows() != n || outputs.nrows() != n {
            return Err(Error::dims("pre-history rows must match the laplacian size"));
        }
    }
    let sparse = SparseSym::from_dense(laplacian)?;
    let psi = coeffs.real_psi();
    let phi = coeffs.real_phi();
    let t_len = x.ncols();
    let mut y = DMatrix::zeros(n, t_len);

    let past_input = |t: isize| -> Option<DVector<f64>> {
        if t >= 0 {
            return Some(x.column(t as usize).into_owned());
        }
        if let TvInit::PreHistory { inputs, .. } = init {
            let back = (-t) as usize; // 1 = last pre-history column
            if back <= inputs.ncols() {
                return Some(inputs.column(inputs.ncols() - back).into_owned());
            }
        }
        None
    };

    for t in 0..t_len {
        let mut acc = DVector::zeros(n);
        for (q, poly) in phi.iter().enumerate() {
            if let Some(col) = past_input(t as isize - q as isize) {
                acc += sparse.poly_apply(poly, &col);
            }
        }
        for (pm1, poly) in psi.iter().enumerate() {
            let p = pm1 + 1;
            let prev = if t >= p {
                Some(y.column(t - p).into_owned())
            } else if let TvInit::PreHistory { outputs, .. } = init {
                let back = p - t;
                if back <= outputs.ncols() {
                    Some(outputs.column(outputs.ncols() - back).into_owned())
                } else {
                    None
                }
            } else {
                None
            };
            if let Some(col) = prev {
                acc -= sparse.poly_apply(poly, &col);
            }
        }
        y.column_mut(t).copy_from(&acc);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, Normalization};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_graph(n: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let u: f64 = rng.random();
                if u < 0.7 {
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
        Graph::new(n, edges).unwrap()
    }

    fn random_signal(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng))
    }

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        let (ar, ac) = a.shape();
        let (br, bc) = b.shape();
        DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
    }

    fn vec_cm(m: &DMatrix<C64>) -> DVector<C64> {
        DVector::from_iterator(m.len(), m.iter().cloned())
    }

    #[test]
    fn temporal_basis_is_unitary_with_stated_frequencies() {
        let tb = TemporalBasis::new(6).unwrap();
        for (s, &w) in tb.frequencies().iter().enumerate() {
            assert_eq!(w, 2.0 * std::f64::consts::PI * s as f64 / 6.0);
        }
        let gram = tb.dft_matrix().adjoint() * tb.dft_matrix();
        let eye = DMatrix::<C64>::identity(6, 6);
        assert!((gram - eye).norm() < 1e-10);
    }

    #[test]
    fn jft_single_node_is_conjugate_dft() {
        let g = Graph::new(1, vec![]).unwrap();
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(8).unwrap();
        let x = random_signal(1, 8, 3);
        let xhat = jft(&basis, &tb, &x).unwrap();
        for s in 0..8 {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..8 {
                let phase = -tb.frequencies()[s] * t as f64;
                acc += C64::from_polar(1.0, phase) * x[(0, t)];
            }
            acc /= 8.0f64.sqrt();
            assert!((xhat[(0, s)] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn jft_single_column_is_gft() {
        let g = random_graph(5, 1);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(1).unwrap();
        let x = random_signal(5, 1, 5);
        let xhat = jft(&basis, &tb, &x).unwrap();
        let gft_col = basis.eigenvectors.transpose() * x.column(0);
        for n in 0..5 {
            assert!((xhat[(n, 0)] - C64::new(gft_col[n], 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn jft_matches_kronecker_oracle() {
        let g = random_graph(3, 7);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(4).unwrap();
        let x = random_signal(3, 4, 9);

        let ug = basis.eigenvectors.map(|v| C64::new(v, 0.0));
        let uj = kron(tb.dft_matrix(), &ug);
        let expect = uj.adjoint() * vec_cm(&x.map(|v| C64::new(v, 0.0)));

        let got = vec_cm(&jft(&basis, &tb, &x).unwrap());
        let err = (got - expect).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(err < 1e-10, "max abs error {err}");
    }

    #[test]
    fn ijft_round_trip_and_zero() {
        let g = random_graph(4, 11);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(7).unwrap();
        let x = random_signal(4, 7, 13);
        let back = ijft(&basis, &tb, &jft(&basis, &tb, &x).unwrap()).unwrap();
        assert!((back - &x).norm() < 1e-10);

        let zero = ijft(&basis, &tb, &DMatrix::zeros(4, 7)).unwrap();
        assert_eq!(zero, DMatrix::zeros(4, 7));
    }

    #[test]
    fn ijft_of_conjugate_symmetric_spectrum_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = random_graph(3, 15);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let t = 6;
        let tb = TemporalBasis::new(t).unwrap();
        let mut spec = DMatrix::from_element(3, t, C64::new(0.0, 0.0));
        for n in 0..3 {
            spec[(n, 0)] = C64::new(StandardNormal.sample(&mut rng), 0.0);
            spec[(n, t / 2)] = C64::new(StandardNormal.sample(&mut rng), 0.0);
            for s in 1..t / 2 {
                let v = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                spec[(n, s)] = v;
                spec[(n, t - s)] = v.conj();
            }
        }
        // must not trip the 1e-9 residue check
        let y = ijft(&basis, &tb, &spec).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ijft_rejects_asymmetric_spectrum() {
        let g = random_graph(3, 19);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(4).unwrap();
        let mut spec = DMatrix::from_element(3, 4, C64::new(0.0, 0.0));
        spec[(1, 1)] = C64::new(1.0, 0.0); // lone complex mode
        assert!(ijft(&basis, &tb, &spec).is_err());
    }

    #[test]
    fn joint_filter_identity_and_separable() {
        let g = random_graph(4, 21);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(5).unwrap();
        let x = random_signal(4, 5, 23);

        let ones = JointResponse::from_fn(&basis, &tb, |_, _| C64::new(1.0, 0.0)).unwrap();
        let y = apply_joint_filter(&basis, &tb, &ones, &x).unwrap();
        assert!((&y - &x).norm() < 1e-10);

        // no omega dependence: each column filtered independently
        let h_g = |l: f64| 1.0 / (1.0 + l);
        let resp = JointResponse::from_fn(&basis, &tb, |l, _| C64::new(h_g(l), 0.0)).unwrap();
        let y = apply_joint_filter(&basis, &tb, &resp, &x).unwrap();
        for t in 0..5 {
            let col = crate::graph::apply_graph_filter(&basis, h_g, &x.column(t).into_owned()).unwrap();
            assert!((y.column(t) - col).norm() < 1e-10);
        }
    }

    #[test]
    fn joint_filter_matches_dense_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_graph(2, 25);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let t = 3;
        let tb = TemporalBasis::new(t).unwrap();
        let x = random_signal(2, t, 27);

        // conjugate-symmetric response so the output is real
        let mut h = DMatrix::from_element(2, t, C64::new(0.0, 0.0));
        for n in 0..2 {
            h[(n, 0)] = C64::new(StandardNormal.sample(&mut rng), 0.0);
            let v = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            h[(n, 1)] = v;
            h[(n, 2)] = v.conj();
        }
        let resp = JointResponse::new(h.clone()).unwrap();
        let y = apply_joint_filter(&basis, &tb, &resp, &x).unwrap();

        let ug = basis.eigenvectors.map(|v| C64::new(v, 0.0));
        let uj = kron(tb.dft_matrix(), &ug);
        // diagonal ordering k = N*(t-1)+n matches column-major vec
        let hd = DMatrix::from_fn(2 * t, 2 * t, |i, j| {
            if i == j {
                h[(i % 2, i / 2)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let expect = &uj * hd * uj.adjoint() * vec_cm(&x.map(|v| C64::new(v, 0.0)));
        let got = vec_cm(&y.map(|v| C64::new(v, 0.0)));
        let err = (got - expect).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(err < 1e-10, "max abs error {err}");
    }

    #[test]
    fn response_of_identity_and_zero_coeffs() {
        let g = random_graph(3, 31);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(4).unwrap();

        let ident = TvArmaCoeffs::from_real(vec![], vec![vec![1.0]]).unwrap();
        let r = tv_arma_response(&ident, &basis, &tb).unwrap();
        assert!(r.values().iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-12));

        let zero = TvArmaCoeffs::from_real(vec![], vec![vec![0.0]]).unwrap();
        let r = tv_arma_response(&zero, &basis, &tb).unwrap();
        assert!(r.values().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn response_spot_check() {
        // h(lambda, omega) = 1 / (1 + 0.3 lambda e^{-j omega}) at lambda = 1, omega = 0.
        let coeffs = TvArmaCoeffs::from_real(vec![vec![0.0, 0.3]], vec![vec![1.0]]).unwrap();
        let den = coeffs.denominator(1.0, 0.0);
        let h = coeffs.numerator(1.0, 0.0) / den;
        assert!((h - C64::new(1.0 / 1.3, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stability_screen() {
        let lambda = DVector::from_vec(vec![0.0, 0.5, 1.0]);

        let unstable = TvArmaCoeffs::from_real(vec![vec![-1.0]], vec![vec![1.0]]).unwrap();
        let rep = check_stability(&unstable, &lambda);
        assert!(!rep.stable);

        let trivial = TvArmaCoeffs::from_real(vec![], vec![vec![1.0]]).unwrap();
        let rep = check_stability(&trivial, &lambda);
        assert!(rep.stable);
        assert!((rep.margin - 1.0).abs() < 1e-12);

        let damped = TvArmaCoeffs::from_real(vec![vec![-0.5]], vec![vec![1.0]]).unwrap();
        let rep = check_stability(&damped, &lambda);
        assert!(rep.stable);
        assert!((rep.margin - 0.5).abs() < 1e-9);
    }

    #[test]
    fn run_identity_and_zero() {
        let g = random_graph(4, 33);
        let l = crate::graph::laplacian(&g, Normalization::Combinatorial).unwrap();
        let x = random_signal(4, 6, 35);

        let ident = TvArmaCoeffs::from_real(vec![], vec![vec![1.0]]).unwrap();
        let y = tv_arma_run(&ident, &l, &x, &TvInit::Zero).unwrap();
        assert_eq!(y, x);

        let zero = TvArmaCoeffs::from_real(vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        let y = tv_arma_run(&zero, &l, &x, &TvInit::Zero).unwrap();
        assert_eq!(y, DMatrix::zeros(4, 6));
    }

    #[test]
    fn run_with_pre_history_continues_a_longer_run() {
        // running the tail of a signal with the head supplied as
        // pre-history must reproduce the full run exactly
        let g = random_graph(4, 57);
        let l = crate::graph::laplacian(&g, Normalization::UnitSpectralNorm).unwrap();
        let coeffs = TvArmaCoeffs::from_real(
            vec![vec![0.2, -0.1], vec![0.05]],
            vec![vec![1.0, 0.3], vec![0.4]],
        )
        .unwrap();
        let x = random_signal(4, 20, 59);
        let full = tv_arma_run(&coeffs, &l, &x, &TvInit::Zero).unwrap();

        let split = 12;
        let init = TvInit::PreHistory {
            inputs: x.columns(0, split).into_owned(),
            outputs: full.columns(0, split).into_owned(),
        };
        let tail_in = x.columns(split, 20 - split).into_owned();
        let tail_out = tv_arma_run(&coeffs, &l, &tail_in, &init).unwrap();
        let expect = full.columns(split, 20 - split).into_owned();
        assert!((tail_out - expect).norm() < 1e-12);
    }

    #[test]
    fn jft_preserves_frobenius_norm() {
        let g = random_graph(5, 61);
        let basis = SpectralBasis::from_graph(&g, Normalization::Combinatorial).unwrap();
        let tb = TemporalBasis::new(9).unwrap();
        let x = random_signal(5, 9, 63);
        let spectrum = jft(&basis, &tb, &x).unwrap();
        assert!((spectrum.norm() - x.norm()).abs() < 1e-10);
    }

    #[test]
    fn run_rejects_complex_coefficients() {
        let g = random_graph(3, 37);
        let l = crate::graph::laplacian(&g, Normalization::Combinatorial).unwrap();
        let x = random_signal(3, 4, 39);
        let coeffs = TvArmaCoeffs::new(
            vec![vec![C64::new(0.0, 0.1)]],
            vec![vec![C64::new(1.0, 0.0)]],
        )
        .unwrap();
        assert!(tv_arma_run(&coeffs, &l, &x, &TvInit::Zero).is_err());
    }

    #[test]
    fn steady_state_gain_matches_response() {
        // Periodic single joint Fourier mode in, steady-state amplitude ratio
        // out; must match |h| from the rational response.
        let g = random_graph(5, 41);
        let basis = SpectralBasis::from_graph(&g, Normalization::UnitSpectralNorm).unwrap();
        let coeffs = TvArmaCoeffs::from_real(
            vec![vec![0.1, -0.2], vec![0.05, 0.1]],
            vec![vec![1.0, 0.3], vec![0.2, -0.1]],
        )
        .unwrap();
        let rep = check_stability(&coeffs, &basis.eigenvalues);
        assert!(rep.stable, "test coefficients must be stable, margin {}", rep.margin);

        let t_period = 16;
        let tb = TemporalBasis::new(t_period).unwrap();
        let mode_n = 2;
        let mode_k = 3;
        let omega = tb.frequencies()[mode_k];
        let burn_periods = 200;
        let total = (burn_periods + 1) * t_period;

        let u = basis.eigenvectors.column(mode_n).into_owned();
        let x = DMatrix::from_fn(5, total, |i, t| u[i] * (omega * t as f64).cos());
        let y = tv_arma_run(&coeffs, &basis.laplacian, &x, &TvInit::Zero).unwrap();

        // complex amplitude at omega over the last period
        let window = total - t_period..total;
        let mut ay = C64::new(0.0, 0.0);
        let mut ax = C64::new(0.0, 0.0);
        for t in window {
            let rot = C64::from_polar(1.0, -omega * t as f64);
            let proj_y: f64 = u.dot(&y.column(t).into_owned());
            let proj_x: f64 = u.dot(&x.column(t).into_owned());
            ay += rot * proj_y;
            ax += rot * proj_x;
        }
        let gain = (ay / ax).norm();
        let h = tv_arma_response(&coeffs, &basis, &tb).unwrap();
        let expect = h.values()[(mode_n, mode_k)].norm();
        assert!(
            (gain - expect).abs() < 1e-4,
            "steady-state gain {gain} vs response {expect}"
        );
    }

    #[test]
    fn fir_specialization_has_finite_memory() {
        // all psi = 0: output at t depends only on x_{t-Q..t}
        let g = random_graph(4, 43);
        let l = crate::graph::laplacian(&g, Normalization::Combinatorial).unwrap();
        let coeffs = TvArmaCoeffs::from_real(
            vec![],
            vec![vec![0.5, 0.2], vec![0.3], vec![-0.4, 0.1]],
        )
        .unwrap();
        let x1 = random_signal(4, 10, 45);
        let mut x2 = x1.clone();
        // perturb an early column; outputs beyond lag Q = 2 must not change
        x2.column_mut(2).add_scalar_mut(5.0);
        let y1 = tv_arma_run(&coeffs, &l, &x1, &TvInit::Zero).unwrap();
        let y2 = tv_arma_run(&coeffs, &l, &x2, &TvInit::Zero).unwrap();
        for t in 5..10 {
            assert!((y1.column(t) - y2.column(t)).norm() < 1e-14);
        }
        assert!((y1.column(2) - y2.column(2)).norm() > 0.1);
    }

    #[test]
    fn separable_coefficients_factor_the_response() {
        // psi_{l,p} = psi_l * a_p and phi separable: h factors into a graph
        // response times a temporal response.
        let g = random_graph(4, 47);
        let basis = SpectralBasis::from_graph(&g, Normalization::UnitSpectralNorm).unwrap();
        let tb = TemporalBasis::new(8).unwrap();

        let psi_l = [0.3, -0.15];
        let a_p = [0.4, -0.2];
        let phi_k = [1.0, 0.25];
        let b_q = [1.0, 0.5];
        let psi: Vec<Vec<f64>> = a_p.iter().map(|a| psi_l.iter().map(|p| p * a).collect()).collect();
        let phi: Vec<Vec<f64>> = b_q.iter().map(|b| phi_k.iter().map(|k| k * b).collect()).collect();
        let coeffs = TvArmaCoeffs::from_real(psi, phi).unwrap();
        let h = tv_arma_response(&coeffs, &basis, &tb).unwrap();

        for n in 0..4 {
            for s in 0..8 {
                let lambda = basis.eigenvalues[n];
                let omega = tb.frequencies()[s];
                let pg: f64 = psi_l.iter().enumerate().map(|(l, c)| c * lambda.powi(l as i32)).sum();
                let fg: f64 = phi_k.iter().enumerate().map(|(k, c)| c * lambda.powi(k as i32)).sum();
                let mut den = C64::new(1.0, 0.0);
                let mut num = C64::new(0.0, 0.0);
                for (idx, &a) in a_p.iter().enumerate() {
                    den += C64::from_polar(1.0, -omega * (idx + 1) as f64) * (a * pg);
                }
                for (idx, &b) in b_q.iter().enumerate() {
                    num += C64::from_polar(1.0, -omega * idx as f64) * (b * fg);
                }
                let expect = num / den;
                assert!((h.values()[(n, s)] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn per_frequency_relation_holds_for_periodic_input() {
        // After burn-in, GFT+DFT of input and output obey the scalar relation
        // den * yhat = num * xhat at every grid frequency.
        let g = random_graph(4, 49);
        let basis = SpectralBasis::from_graph(&g, Normalization::UnitSpectralNorm).unwrap();
        let coeffs = TvArmaCoeffs::from_real(
            vec![vec![0.2, -0.1]],
            vec![vec![1.0, 0.1], vec![0.3]],
        )
        .unwrap();
        assert!(check_stability(&coeffs, &basis.eigenvalues).stable);

        let t_period = 12;
        let tb = TemporalBasis::new(t_period).unwrap();
        let x_period = random_signal(4, t_period, 51);
        let burn = 400;
        let total = burn + t_period;
        let x = DMatrix::from_fn(4, total, |i, t| x_period[(i, t % t_period)]);
        let y = tv_arma_run(&coeffs, &basis.laplacian, &x, &TvInit::Zero).unwrap();

        let tail = |m: &DMatrix<f64>| m.columns(total - t_period, t_period).into_owned();
        let xhat = jft(&basis, &tb, &tail(&x)).unwrap();
        let yhat = jft(&basis, &tb, &tail(&y)).unwrap();
        for n in 0..4 {
            for s in 0..t_period {
                let lambda = basis.eigenvalues[n];
                let den = coeffs.denominator(lambda, tb.frequencies()[s]);
                let num = coeffs.numerator(lambda, tb.frequencies()[s]);
                let lhs = den * yhat[(n, s)];
                let rhs = num * xhat[(n, s)];
                assert!(
                    (lhs - rhs).norm() < 1e-6 * (1.0 + rhs.norm()),
                    "freq ({n},{s}): {lhs} vs {rhs}"
                );
            }
        }
    }
}
