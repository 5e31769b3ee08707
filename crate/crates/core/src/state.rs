//! Density matrices and projection back onto the state space.

use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, frobenius, hermitian_eigen, hermitian_error, hermitian_part, is_positive_with_shift,
    spectral_map, trace, CMatrix,
};

/// Validity tolerances for density matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-9,
            trace: 1e-9,
            psd: 1e-8,
        }
    }
}

/// How far a state is from satisfying the density matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validity {
    pub hermitian_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl Validity {
    pub fn of(m: &CMatrix) -> Self {
        Self {
            hermitian_error: hermitian_error(m),
            trace_error: (trace(m) - c(1.0)).norm(),
            min_eigenvalue: hermitian_eigen(m).0[0],
        }
    }

    pub fn within(&self, tol: &Tolerances) -> bool {
        self.hermitian_error <= tol.hermitian
            && self.trace_error <= tol.trace
            && self.min_eigenvalue >= -tol.psd
    }

    /// Worst case of two reports.
    pub fn merge(&self, other: &Validity) -> Validity {
        Validity {
            hermitian_error: self.hermitian_error.max(other.hermitian_error),
            trace_error: self.trace_error.max(other.trace_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }

    pub fn perfect() -> Self {
        Validity {
            hermitian_error: 0.0,
            trace_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite N×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() < 2 {
            return Err(Error::InvalidState("dimension must be at least 2".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let v = Validity::of(&m);
        if v.hermitian_error > tol.hermitian {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {:e})",
                v.hermitian_error
            )));
        }
        if v.trace_error > tol.trace {
            return Err(Error::InvalidState(format!(
                "trace differs from 1 by {:e}",
                v.trace_error
            )));
        }
        if v.min_eigenvalue < -tol.psd {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                v.min_eigenvalue
            )));
        }
        Ok(Self { m })
    }

    /// Diagonal state `diag(p_0, …, p_{N-1})`.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(populations[i])
            } else {
                c(0.0)
            }
        }))
    }

    /// The `J_z` eigenstate `e_n e_n*`.
    ///
    /// Panics if `n >= dim`.
    pub fn eigenstate(dim: usize, n: usize) -> Self {
        assert!(
            n < dim,
            "eigenstate index {n} out of range for dimension {dim}"
        );
        let mut m = CMatrix::zeros(dim, dim);
        m[(n, n)] = c(1.0);
        Self { m }
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// `ρ_kk = Tr(ρ e_k e_k*)`
    pub fn population(&self, k: usize) -> f64 {
        self.m[(k, k)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        populations(&self.m)
    }

    pub fn validity(&self) -> Validity {
        Validity::of(&self.m)
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.m
    }
}

/// Row-major `[[re, im], …]` rows, the same layout accepted by
/// [`DensityMatrix::from_json_rows`].
impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut rows = serializer.serialize_seq(Some(n))?;
        for i in 0..n {
            let row: Vec<[f64; 2]> = (0..n)
                .map(|j| [self.m[(i, j)].re, self.m[(i, j)].im])
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl DensityMatrix {
    /// Parses a JSON array of rows whose entries are `[re, im]` pairs.
    pub fn from_json_rows(text: &str) -> Result<Self> {
        let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(text)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidState(
                "matrix rows have unequal length".into(),
            ));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            num_complex::Complex64::new(rows[i][j][0], rows[i][j][1])
        }))
    }
}

pub(crate) fn populations(m: &CMatrix) -> Vec<f64> {
    m.diagonal().iter().map(|z| z.re).collect()
}

/// Controls [`project_to_state_space`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionPolicy {
    /// Clip eigenvalues below `-tol.psd` to zero.
    pub clip_enabled: bool,
    /// Largest tolerated distance (Frobenius) from the Hermitian PSD cone
    /// before the step is treated as unstable.
    pub drift_bound: f64,
}

impl Default for ProjectionPolicy {
    fn default() -> Self {
        Self {
            clip_enabled: true,
            drift_bound: 0.05,
        }
    }
}

impl ProjectionPolicy {
    pub fn no_clip() -> Self {
        Self {
            clip_enabled: false,
            ..Self::default()
        }
    }
}

/// Pulls a nearly valid matrix back onto the state space: Hermitize, clip
/// negative eigenvalues (if enabled), renormalize the trace.
///
/// Matrices already in the state space are returned unchanged apart from
/// the trace division, so exact zeros (e.g. vanishing populations) survive.
pub fn project_to_state_space(
    m: &CMatrix,
    policy: &ProjectionPolicy,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DriftExceeded {
            distance: f64::INFINITY,
            bound: policy.drift_bound,
        });
    }
    let h = hermitian_part(m);
    let mut drift = frobenius(&(m - &h));

    let tr = trace(&h).re;
    if !(tr > 0.0) {
        return Err(Error::NonPositiveTrace(tr));
    }

    let h = if is_positive_with_shift(&h, tol.psd * tr) {
        h
    } else {
        let (values, vectors) = hermitian_eigen(&h);
        if !policy.clip_enabled {
            return Err(Error::NotPositive(values[0] / tr));
        }
        drift += values
            .iter()
            .filter(|&&l| l < 0.0)
            .map(|l| l * l)
            .sum::<f64>()
            .sqrt();
        if drift > policy.drift_bound {
            return Err(Error::DriftExceeded {
                distance: drift,
                bound: policy.drift_bound,
            });
        }
        spectral_map(&values, &vectors, |l| l.max(0.0))
    };
    if drift > policy.drift_bound {
        return Err(Error::DriftExceeded {
            distance: drift,
            bound: policy.drift_bound,
        });
    }
    let tr = trace(&h).re;
    if !(tr > 0.0) {
        return Err(Error::NonPositiveTrace(tr));
    }
    let mut out = h;
    if tr != 1.0 {
        out.unscale_mut(tr);
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn rejects_invalid_states() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.5);
        m[(1, 1)] = c(0.5);
        m[(0, 1)] = c(0.1);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).is_ok());
    }

    #[test]
    fn projection_is_identity_on_valid_states() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).unwrap();
        let p = project_to_state_space(
            rho.matrix(),
            &ProjectionPolicy::default(),
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(p, rho);
    }

    #[test]
    fn projection_renormalizes_trace() {
        let m = DensityMatrix::diagonal(&[0.6, 0.6, 0.0]);
        assert!(m.is_err());
        let raw = CMatrix::from_fn(3, 3, |i, j| if i == j && i < 2 { c(0.6) } else { c(0.0) });
        let p = project_to_state_space(&raw, &ProjectionPolicy::default(), &Tolerances::default())
            .unwrap();
        let want = DensityMatrix::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        assert!(max_abs(&(p.matrix() - want.matrix())) < 1e-15);
    }

    #[test]
    fn projection_clips_then_renormalizes() {
        let raw = CMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => c(1.01),
            (1, 1) => c(-0.01),
            _ => c(0.0),
        });
        let p = project_to_state_space(&raw, &ProjectionPolicy::default(), &Tolerances::default())
            .unwrap();
        let want = DensityMatrix::eigenstate(3, 0);
        assert!(max_abs(&(p.matrix() - want.matrix())) < 1e-15);

        let err =
            project_to_state_space(&raw, &ProjectionPolicy::no_clip(), &Tolerances::default());
        assert!(matches!(err, Err(Error::NotPositive(_))));
    }

    #[test]
    fn projection_flags_large_drift() {
        let raw = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(1.5),
            (1, 1) => c(-0.5),
            _ => c(0.0),
        });
        let err =
            project_to_state_space(&raw, &ProjectionPolicy::default(), &Tolerances::default());
        assert!(matches!(err, Err(Error::DriftExceeded { .. })));
        let zero = CMatrix::zeros(2, 2);
        let err =
            project_to_state_space(&zero, &ProjectionPolicy::default(), &Tolerances::default());
        assert!(matches!(err, Err(Error::NonPositiveTrace(_))));
    }

    #[test]
    fn json_rows_round_trip() {
        let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        assert_eq!(text, "[[[0.25,0.0],[0.0,0.0]],[[0.0,0.0],[0.75,0.0]]]");
        assert_eq!(DensityMatrix::from_json_rows(&text).unwrap(), rho);
    }
}
