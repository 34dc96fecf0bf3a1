//! Directed communication topology and the spectral quantities behind the
//! sampling-period condition.
//!
//! Edge convention: `adjacency[(i, j)] > 0` means DG `j` sends to DG `i`
//! (`j` is an in-neighbour of `i`). Row `i` of the Laplacian therefore
//! collects everything DG `i` listens to.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue floor used when testing positive definiteness.
pub const DEFINITENESS_TOL: f64 = 1e-12;
/// Eigenvalue floor used by the semi-definiteness check on `WL + LᵀW`.
pub const SEMIDEFINITE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommGraph {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

impl CommGraph {
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no agents".into()));
        }
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: adjacency.ncols(),
            });
        }
        if pinning.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: pinning.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "edge weight a[{i}][{j}] = {a} must be finite and non-negative"
                    )));
                }
                if i == j && a != 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "self loop on agent {i} (a[{i}][{i}] = {a})"
                    )));
                }
            }
        }
        if pinning.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidGraph(
                "pinning gains must be finite and non-negative".into(),
            ));
        }
        if pinning.iter().all(|g| *g == 0.0) {
            return Err(Error::InvalidGraph(
                "no agent is pinned to the reference".into(),
            ));
        }
        Ok(Self { adjacency, pinning })
    }

    /// Builds a graph from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>], pinning: &[f64]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let adjacency = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(adjacency, DVector::from_column_slice(pinning))
    }

    /// Unit-weight directed ring `1 → 2 → … → n → 1`.
    pub fn directed_ring(n: usize, pinning: &[f64]) -> Result<Self> {
        let adjacency = DMatrix::from_fn(n, n, |i, j| {
            if n > 1 && j == (i + n - 1) % n {
                1.0
            } else {
                0.0
            }
        });
        Self::new(adjacency, DVector::from_column_slice(pinning))
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    pub fn pinning_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.pinning)
    }

    /// `c · (L + G)`.
    pub fn pinned_laplacian(&self, gain: f64) -> DMatrix<f64> {
        (laplacian(self) + self.pinning_matrix()) * gain
    }
}

/// Unpinned Laplacian: `l_ii = Σ_{j≠i} a_ij`, `l_ij = -a_ij`.
pub fn laplacian(graph: &CommGraph) -> DMatrix<f64> {
    let a = graph.adjacency();
    let n = graph.n();
    let mut l = -a.clone();
    for i in 0..n {
        let degree: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        l[(i, i)] = degree;
    }
    l
}

pub fn is_strongly_connected(graph: &CommGraph) -> bool {
    let n = graph.n();
    // j -> i whenever a_ij > 0
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if forward {
                    graph.weight(v, u) > 0.0
                } else {
                    graph.weight(u, v) > 0.0
                };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Positive left null vector `w` of a Laplacian (`wL = 0`), scaled so that
/// `Σ w_i = n`.
pub fn left_perron_vector(laplacian: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = laplacian.nrows();
    if laplacian.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: laplacian.ncols(),
        });
    }
    // Lᵀ wᵀ = 0 with the last equation replaced by the normalisation.
    let mut system = laplacian.transpose();
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = n as f64;
    let w = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::NotStronglyConnected)?;
    let scale = laplacian.amax().max(1.0);
    let residual = (w.transpose() * laplacian).amax();
    if w.iter().any(|x| !x.is_finite() || *x <= 0.0) || residual > 1e-9 * scale {
        return Err(Error::NotStronglyConnected);
    }
    Ok(w)
}

/// True iff every eigenvalue of `W L + Lᵀ W` is at least `-1e-9`.
pub fn lemma1_check(laplacian: &DMatrix<f64>, w: &DVector<f64>) -> Result<bool> {
    let n = laplacian.nrows();
    if laplacian.ncols() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if laplacian.ncols() != n {
                laplacian.ncols()
            } else {
                w.len()
            },
        });
    }
    let big_w = DMatrix::from_diagonal(w);
    let m = &big_w * laplacian + laplacian.transpose() * &big_w;
    Ok(min_eigenvalue(&m) >= -SEMIDEFINITE_TOL)
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetric_part(sym))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest generalized eigenvalue of the symmetric pencil `(num, den)`,
/// `den` positive definite. Reduced to a standard problem through the
/// Cholesky factor of `den`.
fn max_generalized_eigenvalue(
    num: &DMatrix<f64>,
    den: &DMatrix<f64>,
    den_name: &'static str,
) -> Result<f64> {
    let chol = Cholesky::new(symmetric_part(den)).ok_or(Error::NotPositiveDefinite(den_name))?;
    let l = chol.l();
    let n = num.nrows();
    // C = L⁻¹ · num · L⁻ᵀ
    let left = l
        .solve_lower_triangular(num)
        .ok_or(Error::NotPositiveDefinite(den_name))?;
    let c = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(Error::NotPositiveDefinite(den_name))?;
    debug_assert_eq!(c.nrows(), n);
    Ok(SymmetricEigen::new(symmetric_part(&c))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `λ = max_{‖x‖=1} xᵀAᵀWAx / xᵀWAx` for `A = c·(L + G)`.
///
/// Only the symmetric part of `WA` contributes to the denominator, so this
/// is the top eigenvalue of the pencil `(AᵀWA, sym(WA))`.
pub fn compute_lambda(pinned_laplacian: &DMatrix<f64>, big_w: &DMatrix<f64>) -> Result<f64> {
    let n = pinned_laplacian.nrows();
    if pinned_laplacian.ncols() != n || big_w.nrows() != n || big_w.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: big_w.nrows(),
        });
    }
    let a = pinned_laplacian;
    let num = symmetric_part(&(a.transpose() * big_w * a));
    let den = symmetric_part(&(big_w * a));
    if min_eigenvalue(&num) < DEFINITENESS_TOL {
        return Err(Error::NotPositiveDefinite("AᵀWA"));
    }
    if min_eigenvalue(&den) < DEFINITENESS_TOL {
        return Err(Error::NotPositiveDefinite("WA + AᵀW"));
    }
    max_generalized_eigenvalue(&num, &den, "WA + AᵀW")
}

/// The same Rayleigh ratio evaluated on `B = c·L` (no pinning), restricted
/// to disagreement vectors orthogonal to the consensus direction `1`.
///
/// For a circulant ring this is `2c` regardless of `n`; reported next to
/// [`compute_lambda`] so the two can be compared.
pub fn disagreement_lambda(
    laplacian: &DMatrix<f64>,
    big_w: &DMatrix<f64>,
    gain: f64,
) -> Result<f64> {
    let n = laplacian.nrows();
    if n < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: n,
        });
    }
    // Orthonormal basis of 1^⊥: drop the first column of a QR of [1 | I].
    let mut seed = DMatrix::zeros(n, n);
    for i in 0..n {
        seed[(i, 0)] = 1.0;
    }
    for j in 1..n {
        seed[(j, j)] = 1.0;
    }
    let q_full = seed.qr().q();
    let basis = q_full.columns(1, n - 1).into_owned();
    let b = laplacian * gain;
    let num = basis.transpose() * (b.transpose() * big_w * &b) * &basis;
    let den = basis.transpose() * symmetric_part(&(big_w * &b)) * &basis;
    if min_eigenvalue(&den) < DEFINITENESS_TOL {
        return Err(Error::NotPositiveDefinite("W L + Lᵀ W on 1^⊥"));
    }
    max_generalized_eigenvalue(&num, &den, "W L + Lᵀ W on 1^⊥")
}

/// `h/2 + σ < 1/λ`, strict.
pub fn check_theorem1_condition(h: f64, sigma: f64, lambda: f64) -> bool {
    h / 2.0 + sigma < 1.0 / lambda
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    pub laplacian: DMatrix<f64>,
    pub pinned: DMatrix<f64>,
    pub w: DVector<f64>,
    pub big_w: DMatrix<f64>,
    pub lambda: f64,
}

/// `w` from the unpinned Laplacian, `W = diag(w)`, and `λ` on
/// `A = gain · (L + G)`.
pub fn spectral_data(graph: &CommGraph, gain: f64) -> Result<SpectralData> {
    let lap = laplacian(graph);
    let w = left_perron_vector(&lap)?;
    let big_w = DMatrix::from_diagonal(&w);
    let pinned = graph.pinned_laplacian(gain);
    let lambda = compute_lambda(&pinned, &big_w)?;
    Ok(SpectralData {
        laplacian: lap,
        pinned,
        w,
        big_w,
        lambda,
    })
}
