//! Problem model: measurement matrices, complex signals held as split
//! real/imaginary parts, the Bernoulli-Gaussian prior, synthetic instance
//! generation and the NMSE / SNR bookkeeping used by the experiments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Self::new(m, n, rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(n, n, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column_norm(&self, c: usize) -> f64 {
        (0..self.rows)
            .map(|r| self.get(r, c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "A has {} columns but x has length {}",
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// `out = Aᵀ z`
    pub fn tr_mul_vec_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (&zi, row) in z.iter().zip(self.data.chunks_exact(self.cols)) {
            if zi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o += zi * a;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize the reduction
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Complex vector kept as two parallel real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension(format!(
                "real part has length {} but imaginary part has length {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    /// Part 0 is the real part, part 1 the imaginary part.
    pub fn part(&self, p: usize) -> &[f64] {
        match p {
            0 => &self.re,
            1 => &self.im,
            _ => panic!("complex vectors have two parts, got index {p}"),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.re) + norm_sq(&self.im)
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().chain(&self.im).all(|&v| v == 0.0)
    }

    /// Indices where either part is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.re[i] != 0.0 || self.im[i] != 0.0)
            .collect()
    }

    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        (self.re.clone(), self.im.clone())
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.re, self.im)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            re: self.re.iter().map(|v| c * v).collect(),
            im: self.im.iter().map(|v| c * v).collect(),
        }
    }
}

/// `x̂ = x̂_re + j x̂_im`
pub fn combine(x_re: Vec<f64>, x_im: Vec<f64>) -> Result<ComplexVector> {
    ComplexVector::new(x_re, x_im)
}

/// Circularly-symmetric complex Bernoulli-Gaussian prior: each component is
/// zero with probability `gamma0[n]`, otherwise complex Gaussian with
/// variance `sigma_x2` (each part `sigma_x2 / 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliGaussianPrior {
    gamma0: Vec<f64>,
    sigma_x2: f64,
}

impl BernoulliGaussianPrior {
    pub fn new(gamma0: Vec<f64>, sigma_x2: f64) -> Result<Self> {
        if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "signal variance must be positive, got {sigma_x2}"
            )));
        }
        if let Some(g) = gamma0.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidParameter(format!(
                "zero probability {g} outside [0, 1]"
            )));
        }
        Ok(Self { gamma0, sigma_x2 })
    }

    /// Broadcasts a scalar zero probability to `n` components.
    pub fn uniform(n: usize, gamma0: f64, sigma_x2: f64) -> Result<Self> {
        Self::new(vec![gamma0; n], sigma_x2)
    }

    pub fn gamma0(&self) -> &[f64] {
        &self.gamma0
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    /// Variance of the real (or imaginary) part of an active component.
    pub fn part_variance(&self) -> f64 {
        self.sigma_x2 / 2.0
    }

    pub fn len(&self) -> usize {
        self.gamma0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma0.is_empty()
    }
}

/// One synthetic recovery problem `y = A x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub a: RealMatrix,
    pub x_true: ComplexVector,
    pub w: ComplexVector,
    pub y: ComplexVector,
    pub prior: BernoulliGaussianPrior,
    /// Complex noise variance; zero for noiseless instances.
    pub sigma_w2: f64,
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(
        a: RealMatrix,
        x_true: ComplexVector,
        w: ComplexVector,
        prior: BernoulliGaussianPrior,
        sigma_w2: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        if prior.len() != a.cols() {
            return Err(Error::Dimension(format!(
                "prior has {} components but A has {} columns",
                prior.len(),
                a.cols()
            )));
        }
        let y = measure(&a, &x_true, &w)?;
        Ok(Self {
            a,
            x_true,
            w,
            y,
            prior,
            sigma_w2,
            seed,
        })
    }

    /// Re-checks `y = A x + w` on both parts.
    pub fn is_consistent(&self, tol: f64) -> bool {
        match measure(&self.a, &self.x_true, &self.w) {
            Ok(y) => y
                .re()
                .iter()
                .chain(y.im())
                .zip(self.y.re().iter().chain(self.y.im()))
                .all(|(a, b)| (a - b).abs() <= tol),
            Err(_) => false,
        }
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }
}

/// Noise setting for generated instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Noiseless,
    /// SNR in dB, converted to a linear ratio for calibration.
    SnrDb(f64),
}

/// Which signal generator an instance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalModel {
    /// Exactly `K` nonzeros on a uniformly random support.
    ExactK,
    /// Independent activity with zero probability `1 - K/N`.
    Bernoulli,
}

/// Matrix with i.i.d. equiprobable entries `±1/√M`.
pub fn gen_matrix<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<RealMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect();
    RealMatrix::new(m, n, data)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, part_sd: f64) -> (f64, f64) {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (part_sd * re, part_sd * im)
}

/// Signal with exactly `k` nonzeros on a uniformly random support.
pub fn gen_signal_exact_k<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    sigma_x2: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {k} exceeds length {n}"
        )));
    }
    if !(sigma_x2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "signal variance must be positive, got {sigma_x2}"
        )));
    }
    let sd = (sigma_x2 / 2.0).sqrt();
    let mut x = ComplexVector::zeros(n);
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    for i in support {
        let (re, im) = complex_gaussian(rng, sd);
        x.re[i] = re;
        x.im[i] = im;
    }
    Ok(x)
}

/// Signal drawn component-wise from the Bernoulli-Gaussian prior.
pub fn gen_signal_bernoulli<R: Rng + ?Sized>(
    n: usize,
    prior: &BernoulliGaussianPrior,
    rng: &mut R,
) -> Result<ComplexVector> {
    if prior.len() != n {
        return Err(Error::Dimension(format!(
            "prior has {} components, requested length {n}",
            prior.len()
        )));
    }
    let sd = prior.part_variance().sqrt();
    let mut x = ComplexVector::zeros(n);
    for (i, &g) in prior.gamma0().iter().enumerate() {
        // draw both the activity and the amplitude so the stream layout does
        // not depend on the outcome
        let active = rng.random::<f64>() >= g;
        let (re, im) = complex_gaussian(rng, sd);
        if active {
            x.re[i] = re;
            x.im[i] = im;
        }
    }
    Ok(x)
}

/// `y = A x + w`, applied to each part separately.
pub fn measure(a: &RealMatrix, x: &ComplexVector, w: &ComplexVector) -> Result<ComplexVector> {
    if x.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "A has {} columns but x has length {}",
            a.cols(),
            x.len()
        )));
    }
    if w.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "A has {} rows but w has length {}",
            a.rows(),
            w.len()
        )));
    }
    let mut re = a.mul_vec(x.re())?;
    let mut im = a.mul_vec(x.im())?;
    for (v, n) in re.iter_mut().zip(w.re()) {
        *v += n;
    }
    for (v, n) in im.iter_mut().zip(w.im()) {
        *v += n;
    }
    ComplexVector::new(re, im)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Draws complex noise so that `‖Ax‖² / (M σ_w²)` equals `snr` for this
/// realization. Returns the noise and its complex variance `σ_w²`.
pub fn calibrate_noise<R: Rng + ?Sized>(
    a: &RealMatrix,
    x: &ComplexVector,
    snr: f64,
    rng: &mut R,
) -> Result<(ComplexVector, f64)> {
    if !(snr > 0.0) || snr.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "SNR must be positive, got {snr}"
        )));
    }
    let m = a.rows();
    let ax = measure(a, x, &ComplexVector::zeros(m))?;
    let energy = ax.norm_sq();
    if energy == 0.0 {
        return Err(Error::InvalidParameter(
            "cannot calibrate noise against a zero signal".into(),
        ));
    }
    let sigma_w2 = energy / (m as f64 * snr);
    Ok((gaussian_noise(m, sigma_w2, rng), sigma_w2))
}

/// Complex Gaussian noise with complex variance `sigma_w2` per entry.
pub fn gaussian_noise<R: Rng + ?Sized>(m: usize, sigma_w2: f64, rng: &mut R) -> ComplexVector {
    let sd = (sigma_w2 / 2.0).sqrt();
    let mut w = ComplexVector::zeros(m);
    for i in 0..m {
        let (re, im) = complex_gaussian(rng, sd);
        w.re[i] = re;
        w.im[i] = im;
    }
    w
}

/// `‖x̂ − x‖² / ‖x‖²`
pub fn nmse(x_hat: &ComplexVector, x: &ComplexVector) -> Result<f64> {
    if x_hat.len() != x.len() {
        return Err(Error::Dimension(format!(
            "estimate has length {} but signal has length {}",
            x_hat.len(),
            x.len()
        )));
    }
    let energy = x.norm_sq();
    if energy == 0.0 {
        return Err(Error::InvalidParameter(
            "NMSE is undefined for a zero signal".into(),
        ));
    }
    let err: f64 = x_hat
        .re()
        .iter()
        .zip(x.re())
        .chain(x_hat.im().iter().zip(x.im()))
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(err / energy)
}

/// Generates a full instance: matrix, signal and (optionally) noise, all from
/// one seeded stream. The prior is Bernoulli-Gaussian with `γ⁽⁰⁾ = 1 − K/N`.
pub fn generate_instance<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    k: usize,
    sigma_x2: f64,
    noise: NoiseSpec,
    signal: SignalModel,
    rng: &mut R,
) -> Result<ProblemInstance> {
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {k} exceeds length {n}"
        )));
    }
    let gamma0 = 1.0 - k as f64 / n as f64;
    let prior = BernoulliGaussianPrior::uniform(n, gamma0, sigma_x2)?;
    let a = gen_matrix(m, n, rng)?;
    let x = match signal {
        SignalModel::ExactK => gen_signal_exact_k(n, k, sigma_x2, rng)?,
        SignalModel::Bernoulli => gen_signal_bernoulli(n, &prior, rng)?,
    };
    let (w, sigma_w2) = match noise {
        NoiseSpec::Noiseless => (ComplexVector::zeros(m), 0.0),
        NoiseSpec::SnrDb(db) => calibrate_noise(&a, &x, db_to_linear(db), rng)?,
    };
    ProblemInstance::new(a, x, w, prior, sigma_w2, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn matrix_entries_are_plus_minus_half_for_m4() {
        let a = gen_matrix(4, 8, &mut rng(3)).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.5 || v == -0.5));
        assert_eq!(a.data().len(), 32);
    }

    #[test]
    fn matrix_columns_have_unit_norm() {
        let a = gen_matrix(77, 256, &mut rng(11)).unwrap();
        for c in 0..a.cols() {
            assert!((a.column_norm(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_generation_is_deterministic() {
        let a = gen_matrix(5, 9, &mut rng(42)).unwrap();
        let b = gen_matrix(5, 9, &mut rng(42)).unwrap();
        assert_eq!(a, b);
        let c = gen_matrix(5, 9, &mut rng(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(gen_matrix(0, 3, &mut rng(0)).is_err());
        assert!(gen_matrix(3, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn exact_k_signals() {
        let x = gen_signal_exact_k(50, 0, 1.0, &mut rng(1)).unwrap();
        assert!(x.is_zero());

        let x = gen_signal_exact_k(50, 7, 1.0, &mut rng(1)).unwrap();
        let sr: Vec<usize> = (0..50).filter(|&i| x.re()[i] != 0.0).collect();
        let si: Vec<usize> = (0..50).filter(|&i| x.im()[i] != 0.0).collect();
        assert_eq!(sr.len(), 7);
        assert_eq!(sr, si);

        assert!(gen_signal_exact_k(5, 6, 1.0, &mut rng(1)).is_err());
    }

    #[test]
    fn full_support_part_variance_is_half() {
        let n = 40_000;
        let x = gen_signal_exact_k(n, n, 1.0, &mut rng(5)).unwrap();
        assert!(x.re().iter().all(|&v| v != 0.0));
        let var = x.re().iter().map(|v| v * v).sum::<f64>() / n as f64;
        // sd of the sample variance is 0.5·sqrt(2/n) ≈ 0.0035
        assert!((var - 0.5).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn bernoulli_signal_extremes() {
        let p1 = BernoulliGaussianPrior::uniform(100, 1.0, 1.0).unwrap();
        assert!(gen_signal_bernoulli(100, &p1, &mut rng(2)).unwrap().is_zero());
        let p0 = BernoulliGaussianPrior::uniform(100, 0.0, 1.0).unwrap();
        let x = gen_signal_bernoulli(100, &p0, &mut rng(2)).unwrap();
        assert_eq!(x.support().len(), 100);
    }

    #[test]
    fn bernoulli_signal_count_concentrates() {
        // Binomial(10⁴, 0.5): mean 5000, sd 50, so 4σ = 200.
        let n = 10_000;
        let p = BernoulliGaussianPrior::uniform(n, 0.5, 1.0).unwrap();
        let x = gen_signal_bernoulli(n, &p, &mut rng(9)).unwrap();
        let count = x.support().len() as f64;
        assert!((count - 5000.0).abs() <= 200.0, "count {count}");
    }

    #[test]
    fn prior_validation() {
        assert!(BernoulliGaussianPrior::uniform(3, 1.2, 1.0).is_err());
        assert!(BernoulliGaussianPrior::uniform(3, 0.2, 0.0).is_err());
        let p = BernoulliGaussianPrior::uniform(3, 0.2, 2.0).unwrap();
        assert_eq!(p.gamma0(), &[0.2, 0.2, 0.2]);
        assert_eq!(p.part_variance(), 1.0);
    }

    fn naive_mul(a: &RealMatrix, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.rows()];
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                out[r] += a.get(r, c) * x[c];
            }
        }
        out
    }

    #[test]
    fn measure_basics() {
        let a = gen_matrix(6, 11, &mut rng(4)).unwrap();
        let y = measure(&a, &ComplexVector::zeros(11), &ComplexVector::zeros(6)).unwrap();
        assert!(y.is_zero());

        let eye = RealMatrix::identity(5).unwrap();
        let x = gen_signal_exact_k(5, 5, 1.0, &mut rng(4)).unwrap();
        let y = measure(&eye, &x, &ComplexVector::zeros(5)).unwrap();
        assert_eq!(y, x);

        let x = gen_signal_exact_k(11, 4, 1.0, &mut rng(8)).unwrap();
        let w = gaussian_noise(6, 0.1, &mut rng(10));
        let y = measure(&a, &x, &w).unwrap();
        let re = naive_mul(&a, x.re());
        let im = naive_mul(&a, x.im());
        for i in 0..6 {
            assert!((y.re()[i] - re[i] - w.re()[i]).abs() < 1e-12);
            assert!((y.im()[i] - im[i] - w.im()[i]).abs() < 1e-12);
        }

        assert!(measure(&a, &ComplexVector::zeros(10), &ComplexVector::zeros(6)).is_err());
        assert!(measure(&a, &ComplexVector::zeros(11), &ComplexVector::zeros(5)).is_err());
    }

    #[test]
    fn transpose_multiply_matches_naive() {
        let a = gen_matrix(7, 13, &mut rng(21)).unwrap();
        let z: Vec<f64> = (0..7).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; 13];
        a.tr_mul_vec_into(&z, &mut out);
        for c in 0..13 {
            let expect: f64 = (0..7).map(|r| a.get(r, c) * z[r]).sum();
            assert!((out[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrated_noise_variance() {
        let a = gen_matrix(20, 40, &mut rng(12)).unwrap();
        let x = gen_signal_exact_k(40, 5, 1.0, &mut rng(13)).unwrap();
        let ax = measure(&a, &x, &ComplexVector::zeros(20)).unwrap();
        let (_, s2) = calibrate_noise(&a, &x, 1.0, &mut rng(14)).unwrap();
        assert!((s2 - ax.norm_sq() / 20.0).abs() < 1e-12);

        assert!(calibrate_noise(&a, &x, 0.0, &mut rng(14)).is_err());
        assert!(calibrate_noise(&a, &ComplexVector::zeros(40), 1.0, &mut rng(14)).is_err());
    }

    #[test]
    fn noise_energy_concentrates() {
        // ‖w‖²/M over 10⁴ entries: relative sd is 1/sqrt(10⁴) = 1%.
        let m = 10_000;
        let w = gaussian_noise(m, 0.3, &mut rng(15));
        let est = w.norm_sq() / m as f64;
        assert!((est / 0.3 - 1.0).abs() < 0.05, "estimate {est}");
    }

    #[test]
    fn noiseless_instance_has_zero_noise() {
        let inst = generate_instance(
            8,
            16,
            2,
            1.0,
            NoiseSpec::Noiseless,
            SignalModel::ExactK,
            &mut rng(1),
        )
        .unwrap();
        assert!(inst.w.is_zero());
        assert_eq!(inst.sigma_w2, 0.0);
        assert!(inst.is_consistent(0.0));
    }

    #[test]
    fn nmse_identities() {
        let x = gen_signal_exact_k(30, 6, 1.0, &mut rng(2)).unwrap();
        assert_eq!(nmse(&x, &x).unwrap(), 0.0);
        assert_eq!(nmse(&ComplexVector::zeros(30), &x).unwrap(), 1.0);
        assert!((nmse(&x.scaled(2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&x, &ComplexVector::zeros(30)).is_err());
        assert!(nmse(&ComplexVector::zeros(29), &x).is_err());
    }

    #[test]
    fn combine_round_trip() {
        assert!(combine(vec![0.0; 3], vec![0.0; 3]).unwrap().is_zero());
        let v = combine(vec![1.0, -2.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(v.re(), &[1.0, -2.0]);
        assert!(combine(vec![1.0], vec![]).is_err());
        let x = gen_signal_exact_k(9, 3, 1.0, &mut rng(6)).unwrap();
        let (re, im) = x.split();
        assert_eq!(combine(re, im).unwrap(), x);
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(20.0) - 100.0).abs() < 1e-12);
        assert!((linear_to_db(1000.0) - 30.0).abs() < 1e-12);
    }
}
