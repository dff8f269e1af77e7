//! Covariance-matrix algebra for one- and two-mode Gaussian states.
//!
//! Quadratures are ordered `(x₁, p₁, …, x_n, p_n)` with `x = a† + a` and
//! `p = i(a† − a)`, so the vacuum covariance matrix is the identity.

use nalgebra::{DMatrix, Matrix2, Schur};

use crate::error::{Error, Result};

/// Symplectic eigenvalues below `1 - PHYSICAL_TOLERANCE` mark an unphysical state.
pub const PHYSICAL_TOLERANCE: f64 = 1e-9;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// The symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` on `n` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let dim = 2 * self.n_modes;
        let mut omega = DMatrix::zeros(dim, dim);
        for k in 0..self.n_modes {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }
}

/// Real symmetric `2n × 2n` matrix of quadrature second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps a matrix after checking it is square, of even dimension and
    /// symmetric within a relative tolerance of `1e-12`. The stored matrix is
    /// exactly symmetrized.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&entries)?;
        let scale = entries.amax().max(1.0);
        let dim = entries.nrows();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let gap = (entries[(i, j)] - entries[(j, i)]).abs();
                if gap > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::Structural(format!(
                        "matrix is not symmetric: |γ[{i},{j}] - γ[{j},{i}]| = {gap:e}"
                    )));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("matrix has non-finite entries".into()));
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        Ok(Self { entries })
    }

    pub fn from_row_major(n_modes: usize, values: &[f64]) -> Result<Self> {
        let dim = 2 * n_modes;
        if n_modes == 0 || values.len() != dim * dim {
            return Err(Error::Structural(format!(
                "expected {} entries for {n_modes} modes, got {}",
                dim * dim,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    /// `n` uncorrelated vacuum modes.
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            entries: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Two-mode squeezed vacuum with quadrature variance `v` in each mode.
    pub fn tmsv(v: f64) -> Result<Self> {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::Domain(format!("state variance must be >= 1, got {v}")));
        }
        Ok(Self::standard_form(v, v, (v * v - 1.0).sqrt()))
    }

    /// Two-mode matrix `[[a·I, c·σ_z], [c·σ_z, b·I]]`.
    pub fn standard_form(a: f64, b: f64, c: f64) -> Self {
        #[rustfmt::skip]
        let entries = DMatrix::from_row_slice(4, 4, &[
            a,   0.0, c,   0.0,
            0.0, a,   0.0, -c,
            c,   0.0, b,   0.0,
            0.0, -c,  0.0, b,
        ]);
        Self { entries }
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let dim = self.entries.nrows();
        let mut out = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    /// The 2×2 block coupling mode `i` (rows) with mode `j` (columns).
    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.entries
            .fixed_view::<2, 2>(2 * i, 2 * j)
            .into_owned()
    }

    /// Reduced single-mode state obtained by tracing out every other mode.
    pub fn reduced(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let b = self.block(mode, mode);
        Ok(Self {
            entries: DMatrix::from_row_slice(2, 2, &[b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]]),
        })
    }

    /// `S γ Sᵀ` for a real `2n × 2n` transform `S`.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        let dim = self.entries.nrows();
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Structural(format!(
                "transform is {}x{}, state is {dim}x{dim}",
                s.nrows(),
                s.ncols()
            )));
        }
        Self::new(s * &self.entries * s.transpose())
    }

    /// Mixes `mode` with a vacuum on a beamsplitter of transmittance `eta`,
    /// discards the reflected port, then adds `chi` to the diagonal of `mode`.
    pub fn apply_loss_channel(&self, mode: usize, eta: f64, chi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("transmittance must lie in [0, 1], got {eta}")));
        }
        if !(chi >= 0.0) {
            return Err(Error::Domain(format!("excess noise must be >= 0, got {chi}")));
        }
        let n = self.n_modes();
        let mut extended = DMatrix::identity(2 * n + 2, 2 * n + 2);
        extended
            .view_mut((0, 0), (2 * n, 2 * n))
            .copy_from(&self.entries);
        let s = beamsplitter(n + 1, mode, n, eta)?;
        let mixed = &s * extended * s.transpose();
        let mut out = mixed.view((0, 0), (2 * n, 2 * n)).into_owned();
        out[(2 * mode, 2 * mode)] += chi;
        out[(2 * mode + 1, 2 * mode + 1)] += chi;
        Self::new(out)
    }

    /// Flips the sign of the `p` quadrature of `mode`.
    pub fn partial_transpose(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.entries.clone();
        let k = 2 * mode + 1;
        for j in 0..out.ncols() {
            if j != k {
                out[(k, j)] = -out[(k, j)];
                out[(j, k)] = -out[(j, k)];
            }
        }
        Ok(Self { entries: out })
    }

    /// Moduli of the eigenvalues of `iΩγ`, one per mode, sorted descending.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_spectrum(&self.entries)
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        let spectrum = self.symplectic_eigenvalues()?;
        Ok(spectrum.last().copied().unwrap_or(f64::NAN))
    }

    /// `γ + iΩ ≥ 0`, checked through the symplectic spectrum.
    pub fn is_physical(&self) -> bool {
        self.is_physical_within(PHYSICAL_TOLERANCE)
    }

    pub fn is_physical_within(&self, tolerance: f64) -> bool {
        self.min_symplectic_eigenvalue()
            .map(|l| l >= 1.0 - tolerance)
            .unwrap_or(false)
    }

    /// `1 / √det γ`.
    pub fn purity(&self) -> Result<f64> {
        let det = self.entries.determinant();
        if !(det > 0.0) {
            return Err(Error::Unphysical(format!("determinant {det:e} is not positive")));
        }
        Ok(1.0 / det.sqrt())
    }

    /// `max(0, −ln λ̃₋)` with `λ̃₋` the smallest symplectic eigenvalue of the
    /// state partially transposed on mode B.
    pub fn log_negativity(&self) -> Result<f64> {
        self.require_two_modes()?;
        let lambda = self.partial_transpose(1)?.min_symplectic_eigenvalue()?;
        if !(lambda > 0.0) {
            return Err(Error::Unphysical(format!(
                "partially transposed spectrum has eigenvalue {lambda}"
            )));
        }
        Ok((-lambda.ln()).max(0.0))
    }

    /// `Σ_k G((λ_k − 1)/2)` in bits.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let mut total = 0.0;
        for lambda in self.symplectic_eigenvalues()? {
            total += entropy_of_symplectic_eigenvalue(lambda)?;
        }
        Ok(total)
    }

    /// Conditional matrix of mode A after an x-homodyne measurement on mode B:
    /// `γ_A − σ_AB (X γ_B X)^MP σ_ABᵀ`, `X = diag(1, 0)`.
    pub fn conditional_homodyne_x(&self) -> Result<Self> {
        self.require_two_modes()?;
        let gamma_a = self.block(0, 0);
        let sigma_ab = self.block(0, 1);
        let v = self.entries[(2, 2)];
        let cond = if v > 0.0 {
            let c = sigma_ab.column(0);
            gamma_a - (c * c.transpose()) / v
        } else {
            gamma_a
        };
        Self::new(DMatrix::from_row_slice(
            2,
            2,
            &[cond[(0, 0)], cond[(0, 1)], cond[(1, 0)], cond[(1, 1)]],
        ))
    }

    /// `S(ρ_A) − S(ρ_AB)`; positive values certify distillable entanglement.
    pub fn distillable_entanglement_lower_bound(&self) -> Result<f64> {
        self.require_two_modes()?;
        Ok(self.reduced(0)?.von_neumann_entropy()? - self.von_neumann_entropy()?)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::Structural(format!(
                "mode {mode} out of range for a {}-mode state",
                self.n_modes()
            )));
        }
        Ok(())
    }

    fn require_two_modes(&self) -> Result<()> {
        if self.n_modes() != 2 {
            return Err(Error::Structural(format!(
                "operation needs a two-mode state, got {} modes",
                self.n_modes()
            )));
        }
        Ok(())
    }
}

fn check_shape(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Structural(format!(
            "matrix is not square: {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 || !m.nrows().is_multiple_of(2) {
        return Err(Error::Structural(format!(
            "dimension {} is not a positive even number",
            m.nrows()
        )));
    }
    Ok(())
}

/// Symplectic spectrum of a raw matrix, from the eigenvalues `±iλ_k` of `Ωγ`.
pub fn symplectic_spectrum(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_shape(m)?;
    let n = m.nrows() / 2;
    let omega_gamma = SymplecticForm::new(n).matrix() * m;
    let schur = Schur::try_new(omega_gamma, SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numeric("Schur decomposition of Ωγ did not converge".into()))?;
    // Eigenvalues of Ωγ come in pairs ±iλ; the modulus discards the real residue.
    let mut moduli: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| if z.re.abs() < 1e-10 { z.im.abs() } else { z.norm() })
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
}

/// Embeds the beamsplitter `(r_i, r_j) → (√η r_i + √(1−η) r_j, −√(1−η) r_i + √η r_j)`
/// into an `n`-mode phase space.
pub fn beamsplitter(n_modes: usize, i: usize, j: usize, eta: f64) -> Result<DMatrix<f64>> {
    if i >= n_modes || j >= n_modes || i == j {
        return Err(Error::Structural(format!(
            "beamsplitter needs two distinct modes below {n_modes}, got {i} and {j}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("transmittance must lie in [0, 1], got {eta}")));
    }
    let t = eta.sqrt();
    let r = (1.0 - eta).sqrt();
    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = t;
        s[(a, b)] = r;
        s[(b, a)] = -r;
        s[(b, b)] = t;
    }
    Ok(s)
}

/// Bosonic entropy function `G(x) = (x+1)log₂(x+1) − x log₂x`, with `G(0) = 0`.
pub fn bosonic_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 1e-12 {
        x * (1.0 / x).log2() + x * std::f64::consts::LOG2_E
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

/// `G((λ − 1)/2)`, clamping eigenvalues within tolerance of 1.
pub fn entropy_of_symplectic_eigenvalue(lambda: f64) -> Result<f64> {
    if !(lambda >= 1.0 - PHYSICAL_TOLERANCE) {
        return Err(Error::Unphysical(format!("symplectic eigenvalue {lambda} < 1")));
    }
    Ok(bosonic_entropy((lambda.max(1.0) - 1.0) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    /// Dense oracle: eigenvalues of `−(γ^{1/2} Ω γ^{1/2})²` are `λ_k²`, each twice.
    fn oracle_spectrum(gamma: &DMatrix<f64>) -> Vec<f64> {
        let n = gamma.nrows() / 2;
        let eig = SymmetricEigen::new(gamma.clone());
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let a = &root * SymplecticForm::new(n).matrix() * &root;
        let sq = -(&a * &a);
        let mut vals: Vec<f64> = SymmetricEigen::new(sq)
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    #[test]
    fn symplectic_form_properties() {
        let omega = SymplecticForm::new(3).matrix();
        assert_eq!(omega.transpose(), -&omega);
        assert_eq!(&omega * &omega, -DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn tmsv_construction() {
        assert_eq!(CovarianceMatrix::tmsv(1.0).unwrap(), CovarianceMatrix::vacuum(2));
        let g = CovarianceMatrix::tmsv(10.0).unwrap();
        assert_abs_diff_eq!(g.get(0, 2), 99f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(0, 2), 9.9499, epsilon = 1e-4);
        assert_abs_diff_eq!(g.get(1, 3), -99f64.sqrt(), epsilon = 1e-15);
        for l in g.symplectic_eigenvalues().unwrap() {
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-9);
        }
        assert!(matches!(CovarianceMatrix::tmsv(0.9), Err(Error::Domain(_))));
    }

    #[test]
    fn loss_channel_limits() {
        let g = CovarianceMatrix::tmsv(4.0).unwrap();
        let same = g.apply_loss_channel(1, 1.0, 0.0).unwrap();
        assert!((same.entries() - g.entries()).amax() < 1e-14);

        let lost = g.apply_loss_channel(1, 0.0, 0.0).unwrap();
        assert!((lost.block(1, 1) - Matrix2::identity()).amax() < 1e-14);
        assert!(lost.block(0, 1).amax() < 1e-14);
        assert!((lost.block(0, 0) - Matrix2::identity() * 4.0).amax() < 1e-14);
    }

    #[test]
    fn half_loss_on_tmsv3() {
        let g = CovarianceMatrix::tmsv(3.0)
            .unwrap()
            .apply_loss_channel(1, 0.5, 0.0)
            .unwrap();
        let c = 0.5f64.sqrt() * 8f64.sqrt();
        assert!((g.block(1, 1) - Matrix2::identity() * 2.0).amax() < 1e-14);
        assert_abs_diff_eq!(g.get(0, 2), c, epsilon = 1e-14);
        assert_abs_diff_eq!(g.get(1, 3), -c, epsilon = 1e-14);
    }

    #[test]
    fn loss_channel_rejects_bad_transmittance() {
        let g = CovarianceMatrix::tmsv(2.0).unwrap();
        assert!(matches!(g.apply_loss_channel(1, 1.2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(g.apply_loss_channel(1, -0.1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(g.apply_loss_channel(2, 0.5, 0.0), Err(Error::Structural(_))));
    }

    #[test]
    fn spectrum_matches_dense_oracle() {
        let g = CovarianceMatrix::tmsv(10.0)
            .unwrap()
            .apply_loss_channel(1, 0.5, 0.0)
            .unwrap();
        let got = g.symplectic_eigenvalues().unwrap();
        let want = oracle_spectrum(g.entries());
        assert_eq!(got.len(), 2);
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert_eq!(CovarianceMatrix::vacuum(2).symplectic_eigenvalues().unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn spectrum_rejects_bad_shapes() {
        assert!(matches!(
            symplectic_spectrum(&DMatrix::zeros(3, 3)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            symplectic_spectrum(&DMatrix::zeros(2, 4)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn log_negativity_of_tmsv() {
        assert_eq!(CovarianceMatrix::vacuum(2).log_negativity().unwrap(), 0.0);
        let e = CovarianceMatrix::tmsv(10.0).unwrap().log_negativity().unwrap();
        assert_abs_diff_eq!(e, (10.0 + 99f64.sqrt()).ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(e, 2.9932, epsilon = 1e-4);
    }

    #[test]
    fn purity_values() {
        assert_abs_diff_eq!(CovarianceMatrix::tmsv(7.0).unwrap().purity().unwrap(), 1.0, epsilon = 1e-9);
        let bad = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(bad.purity(), Err(Error::Unphysical(_))));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(CovarianceMatrix::vacuum(2).von_neumann_entropy().unwrap(), 0.0);
        let thermal = CovarianceMatrix::new(DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_abs_diff_eq!(thermal.von_neumann_entropy().unwrap(), 2.0, epsilon = 1e-12);

        let v = 5.0;
        let a = CovarianceMatrix::tmsv(v).unwrap().reduced(0).unwrap();
        assert_abs_diff_eq!(
            a.von_neumann_entropy().unwrap(),
            bosonic_entropy((v - 1.0) / 2.0),
            epsilon = 1e-12
        );

        let squeezed_too_far = CovarianceMatrix::new(DMatrix::identity(2, 2) * 0.5).unwrap();
        assert!(matches!(squeezed_too_far.von_neumann_entropy(), Err(Error::Unphysical(_))));
        assert_eq!(entropy_of_symplectic_eigenvalue(1.0 - 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn bosonic_entropy_near_zero_is_continuous() {
        let x = 1e-12;
        let guarded = bosonic_entropy(x * 0.999);
        let direct = bosonic_entropy(x * 1.001);
        assert!((guarded - direct).abs() < 1e-13);
        assert_eq!(bosonic_entropy(0.0), 0.0);
    }

    #[test]
    fn conditional_matrix_cases() {
        let v = 6.0;
        let blocked = CovarianceMatrix::tmsv(v)
            .unwrap()
            .apply_loss_channel(1, 0.0, 0.0)
            .unwrap()
            .conditional_homodyne_x()
            .unwrap();
        assert!((blocked.entries() - DMatrix::identity(2, 2) * v).amax() < 1e-12);

        let ideal = CovarianceMatrix::tmsv(v).unwrap().conditional_homodyne_x().unwrap();
        assert_abs_diff_eq!(ideal.get(0, 0), 1.0 / v, epsilon = 1e-12);
        assert_abs_diff_eq!(ideal.get(1, 1), v, epsilon = 1e-12);
        assert_abs_diff_eq!(ideal.symplectic_eigenvalues().unwrap()[0], 1.0, epsilon = 1e-9);

        let half = CovarianceMatrix::tmsv(3.0)
            .unwrap()
            .apply_loss_channel(1, 0.5, 0.0)
            .unwrap()
            .conditional_homodyne_x()
            .unwrap();
        assert_abs_diff_eq!(half.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.get(1, 1), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.get(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn distillable_bound_cases() {
        assert_abs_diff_eq!(
            CovarianceMatrix::vacuum(2).distillable_entanglement_lower_bound().unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let v = 10.0;
        let b = CovarianceMatrix::tmsv(v).unwrap().distillable_entanglement_lower_bound().unwrap();
        assert_abs_diff_eq!(b, bosonic_entropy((v - 1.0) / 2.0), epsilon = 1e-8);
        assert!(b > 0.0);
    }

    #[test]
    fn two_mode_ops_need_two_modes() {
        let single = CovarianceMatrix::vacuum(1);
        assert!(matches!(single.log_negativity(), Err(Error::Structural(_))));
        assert!(matches!(single.conditional_homodyne_x(), Err(Error::Structural(_))));
    }

    #[test]
    fn row_major_round_trip() {
        let g = CovarianceMatrix::tmsv(2.5).unwrap();
        let back = CovarianceMatrix::from_row_major(2, &g.to_row_major()).unwrap();
        assert_eq!(back, g);
        assert!(CovarianceMatrix::from_row_major(2, &[1.0; 9]).is_err());
    }
}
