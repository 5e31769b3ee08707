//! Model parameters and the angular momentum operators `J_z`, `J_y`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, I};
use crate::state::DensityMatrix;

/// Physical parameters of an N-level spin under continuous `J_z`
/// measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    levels: usize,
    /// Free Hamiltonian frequency (1/time).
    omega: f64,
    /// Detector efficiency in (0, 1].
    eta: f64,
    /// Measurement strength (1/time).
    #[serde(rename = "M")]
    strength: f64,
}

impl ModelParams {
    pub fn new(levels: usize, omega: f64, eta: f64, strength: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 levels, got {levels}"
            )));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "omega must be >= 0, got {omega}"
            )));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "eta must lie in (0, 1], got {eta}"
            )));
        }
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "M must be > 0, got {strength}"
            )));
        }
        Ok(Self {
            levels,
            omega,
            eta,
            strength,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `J = (N - 1) / 2`
    pub fn spin(&self) -> f64 {
        (self.levels as f64 - 1.0) / 2.0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Measurement strength `M`.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// `η·M`, the rate that sets every convergence exponent.
    pub fn eta_m(&self) -> f64 {
        self.eta * self.strength
    }
}

/// `J_z`, `J_y` and the ladder coefficients `c_1..c_{2J}`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub jz: CMatrix,
    pub jy: CMatrix,
    /// `jz²`, cached for the drift terms.
    pub jz2: CMatrix,
    /// `c[m - 1] = c_m = ½√((2J+1-m)m)`.
    pub c: Vec<f64>,
    /// Diagonal of `jz` as reals: `J, J-1, …, -J`.
    pub jz_diag: Vec<f64>,
}

impl SpinOperators {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.levels();
        let j = params.spin();
        let coeffs: Vec<f64> = (1..n)
            .map(|m| {
                let m = m as f64;
                0.5 * ((2.0 * j + 1.0 - m) * m).sqrt()
            })
            .collect();
        let jz_diag: Vec<f64> = (0..n).map(|k| j - k as f64).collect();
        let jz = CMatrix::from_fn(n, n, |r, col| if r == col { c(jz_diag[r]) } else { c(0.0) });
        let mut jy = CMatrix::zeros(n, n);
        for m in 1..n {
            let cm = coeffs[m - 1];
            jy[(m - 1, m)] = -I * cm;
            jy[(m, m - 1)] = I * cm;
        }
        let jz2 = &jz * &jz;
        Self {
            jz,
            jy,
            jz2,
            c: coeffs,
            jz_diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.jz_diag.len()
    }

    /// `c_m`, with the convention `c_0 = c_{2J+1} = 0`.
    pub fn coefficient(&self, m: usize) -> f64 {
        if m == 0 || m > self.c.len() {
            0.0
        } else {
            self.c[m - 1]
        }
    }

    pub fn spin(&self) -> f64 {
        (self.dim() as f64 - 1.0) / 2.0
    }
}

/// Construct the operators for `params`.
pub fn build_operators(params: &ModelParams) -> SpinOperators {
    SpinOperators::new(params)
}

/// Index `n̄` of a `J_z` eigenstate `e_n̄ e_n̄*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PureTarget {
    nbar: usize,
    levels: usize,
}

impl PureTarget {
    pub fn new(nbar: usize, levels: usize) -> Result<Self> {
        if nbar >= levels {
            return Err(Error::InvalidParams(format!(
                "target index {nbar} out of range for {levels} levels"
            )));
        }
        Ok(Self { nbar, levels })
    }

    pub fn index(&self) -> usize {
        self.nbar
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Whether the target is `e_0` or `e_{2J}`.
    pub fn is_edge(&self) -> bool {
        self.nbar == 0 || self.nbar + 1 == self.levels
    }

    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::eigenstate(self.levels, self.nbar)
    }
}

/// Bundles the parameters with the operators built from them.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub ops: SpinOperators,
}

impl Model {
    pub fn new(params: ModelParams) -> Self {
        let ops = SpinOperators::new(&params);
        Self { params, ops }
    }

    pub fn dim(&self) -> usize {
        self.params.levels()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_error, trace};

    #[test]
    fn jz_for_spin_one() {
        let ops = build_operators(&ModelParams::new(3, 0.0, 0.3, 1.0).unwrap());
        assert_eq!(ops.jz_diag, vec![1.0, 0.0, -1.0]);
        assert_eq!(ops.jz[(0, 0)], c(1.0));
        assert_eq!(ops.jz[(2, 2)], c(-1.0));
        assert_eq!(ops.jz[(0, 1)], c(0.0));
    }

    #[test]
    fn jy_for_spin_half() {
        let ops = build_operators(&ModelParams::new(2, 0.0, 1.0, 1.0).unwrap());
        assert_eq!(ops.c, vec![0.5]);
        assert_eq!(ops.jy[(0, 1)], -I * 0.5);
        assert_eq!(ops.jy[(1, 0)], I * 0.5);
        assert_eq!(ops.jy[(0, 0)], c(0.0));
    }

    #[test]
    fn spin_one_coefficients() {
        let ops = build_operators(&ModelParams::new(3, 0.0, 1.0, 1.0).unwrap());
        let expected = 2f64.sqrt() / 2.0;
        assert!((ops.c[0] - expected).abs() < 1e-15);
        assert!((ops.c[1] - expected).abs() < 1e-15);
        assert_eq!(ops.coefficient(0), 0.0);
        assert_eq!(ops.coefficient(3), 0.0);
    }

    #[test]
    fn operators_are_hermitian_and_jz_traceless() {
        for n in 2..=12 {
            let ops = build_operators(&ModelParams::new(n, 0.0, 1.0, 1.0).unwrap());
            assert_eq!(hermitian_error(&ops.jz), 0.0);
            assert_eq!(hermitian_error(&ops.jy), 0.0);
            assert!(trace(&ops.jz).norm() < 1e-12);
            for k in 0..n {
                assert_eq!(ops.jy[(k, k)], c(0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1, 0.0, 0.5, 1.0).is_err());
        assert!(ModelParams::new(3, -1.0, 0.5, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1.5, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 0.5, 0.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1.0, 1.0).is_ok());
        assert!(PureTarget::new(3, 3).is_err());
    }
}
