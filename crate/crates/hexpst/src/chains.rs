//! Reference chains: uniform and coupling-engineered XY chains in the
//! single-excitation sector.
//!
//! Everything in this module is self-contained ground truth for the rest of
//! the crate. Transfer amplitudes come from an explicit Jacobi eigensolver on
//! the tridiagonal hopping matrix, deliberately sharing no code with the
//! dense spectral propagator in [`crate::dynamics`], so the two paths can
//! legitimately cross-check each other.

use num_complex::Complex64;

/// Single-excitation hopping Hamiltonian of an open chain: site `m` couples
/// to site `m+1` with strength `couplings[m]`; the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainHamiltonian {
    couplings: Vec<f64>,
}

impl ChainHamiltonian {
    /// A chain with the given nearest-neighbour couplings (all > 0).
    pub fn new(couplings: Vec<f64>) -> Self {
        assert!(!couplings.is_empty(), "a chain needs at least two sites");
        assert!(
            couplings.iter().all(|&k| k > 0.0),
            "chain couplings must be positive"
        );
        Self { couplings }
    }

    /// Uniformly coupled chain of `n ≥ 2` sites, coupling 1.
    ///
    /// Only `n = 2` (transfer time [`crate::T0`], amplitude −i) and `n = 3`
    /// (transfer time [`crate::T1`], amplitude −1) transfer perfectly; see
    /// the four-site negative check in the tests.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 2, "a chain needs at least two sites");
        Self::new(vec![1.0; n - 1])
    }

    /// Chain of `n ≥ 2` sites with K_{m,m+1} = √(m(n−m)), m = 1..n−1.
    ///
    /// This hopping matrix is twice the spin-x generator in the spin-(n−1)/2
    /// representation, so e^{−iHt} is a global spin rotation by the angle 2t:
    /// every site maps onto its mirror at t = π/2 (modulus 1), and t = π is a
    /// full revival e^{−iHπ} = ±1, not a transfer.
    pub fn engineered(n: usize) -> Self {
        assert!(n >= 2, "a chain needs at least two sites");
        Self::new((1..n).map(|m| ((m * (n - m)) as f64).sqrt()).collect())
    }

    /// Number of sites.
    pub fn sites(&self) -> usize {
        self.couplings.len() + 1
    }

    /// Nearest-neighbour couplings, `couplings()[m]` joining sites m, m+1.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Mirror image of a site index under the chain flip.
    pub fn mirror(&self, site: usize) -> usize {
        self.sites() - 1 - site
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.sites();
        let mut a = vec![vec![0.0; n]; n];
        for (m, &k) in self.couplings.iter().enumerate() {
            a[m][m + 1] = k;
            a[m + 1][m] = k;
        }
        a
    }

    /// Exact eigendecomposition of the tridiagonal matrix.
    pub fn eigensystem(&self) -> ChainEigensystem {
        let (values, vectors) = jacobi_eigensystem(self.matrix());
        ChainEigensystem { values, vectors }
    }

    /// ⟨site_out| e^{−iHt} |site_in⟩, sites indexed from 0.
    ///
    /// Recomputes the eigensystem; when scanning many times, hold a
    /// [`ChainEigensystem`] and call [`ChainEigensystem::amplitude`].
    pub fn transfer_amplitude(&self, site_in: usize, site_out: usize, t: f64) -> Complex64 {
        let n = self.sites();
        assert!(site_in < n && site_out < n, "chain site out of range");
        self.eigensystem().amplitude(site_in, site_out, t)
    }
}

/// Spectral data of a chain: `vectors[k]` is the unit eigenvector belonging
/// to `values[k]`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct ChainEigensystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl ChainEigensystem {
    /// ⟨site_out| e^{−iHt} |site_in⟩ by eigenexpansion.
    pub fn amplitude(&self, site_in: usize, site_out: usize, t: f64) -> Complex64 {
        let mut a = Complex64::new(0.0, 0.0);
        for (k, &lambda) in self.values.iter().enumerate() {
            let weight = self.vectors[k][site_out] * self.vectors[k][site_in];
            a += weight * Complex64::cis(-lambda * t);
        }
        a
    }
}

/// Cyclic Jacobi diagonalization of a small dense symmetric matrix.
///
/// Returns eigenvalues ascending with matching row eigenvectors. Quadratic
/// convergence makes a handful of sweeps enough at the sizes used here
/// (chains of at most a few dozen sites).
#[allow(clippy::needless_range_loop)] // classical Jacobi index juggling
fn jacobi_eigensystem(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    // v accumulates the product of plane rotations; eigenvector k ends up in
    // column k, i.e. v[i][k].
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let scale: f64 = a
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    // Rotation angle underflows; 1/(2θ) avoids θ² overflow.
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[p][p];
                let aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r][p];
                        let arq = a[r][q];
                        a[r][p] = arp - s * (arq + tau * arp);
                        a[p][r] = a[r][p];
                        a[r][q] = arq + s * (arp - tau * arq);
                        a[q][r] = a[r][q];
                    }
                }
                for row in v.iter_mut() {
                    let vrp = row[p];
                    let vrq = row[q];
                    row[p] = vrp - s * (vrq + tau * vrp);
                    row[q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i][k]).collect())
        .collect();
    (values, vectors)
}
