//! Single-excitation Hamiltonian assembly, the ξ-basis transform, and the
//! exact verification that the transformed matrix splits into uniform 2- and
//! 3-chains.
//!
//! All matrix entries here are dyadic rationals (±1/2, sums of ±1/4), so the
//! assembly, the transform, and the conjugation QᵀHQ are *exact* in binary
//! floating point. The verifier's tolerances exist to catch construction
//! bugs, not roundoff.

use crate::lattice::{LatticeGraph, SiteId, VertexId, HADAMARD_SIGNS};
use crate::tol;
use nalgebra::{Complex, DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

type Complex64 = Complex<f64>;

/// Schema tag heading a matrix triplet dump.
pub const MATRIX_SCHEMA: &str = "hexpst-matrix/1";

/// Sparse real-symmetric single-excitation Hamiltonian.
///
/// Stored as canonical upper-triangle triplets `(i, j, w)` with `i ≤ j`,
/// sorted; the matrix it represents is the symmetrization. A valid assembled
/// Hamiltonian has zero diagonal and every off-diagonal magnitude 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    dim: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl Hamiltonian {
    /// Assemble from a graph: one matrix entry per coupling, unchanged.
    pub fn assemble(graph: &LatticeGraph) -> Self {
        Hamiltonian {
            dim: graph.site_count(),
            triplets: graph.couplings.clone(),
        }
    }

    /// Build from raw triplets (test hook for injecting corrupted matrices).
    /// Entries are canonicalized to the upper triangle and duplicates summed.
    pub fn from_triplets(dim: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in entries {
            assert!(i < dim && j < dim, "triplet index out of range");
            *acc.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
        Hamiltonian {
            dim,
            triplets: acc.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, w) in &self.triplets {
            m[(i, j)] += w;
            if i != j {
                m[(j, i)] += w;
            }
        }
        m
    }

    /// y = H·x on complex amplitudes.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(x.len(), self.dim, "state dimension mismatch");
        let mut y = DVector::from_element(self.dim, Complex64::new(0.0, 0.0));
        for &(i, j, w) in &self.triplets {
            y[i] += w * x[j];
            if i != j {
                y[j] += w * x[i];
            }
        }
        y
    }

    /// Gershgorin bound: every eigenvalue satisfies |λ| ≤ max row sum of
    /// absolute values. For switch lattices this is at most 4.
    pub fn gershgorin_bound(&self) -> f64 {
        let mut row_sum = vec![0.0f64; self.dim];
        for &(i, j, w) in &self.triplets {
            row_sum[i] += w.abs();
            if i != j {
                row_sum[j] += w.abs();
            }
        }
        row_sum.into_iter().fold(0.0, f64::max)
    }

    /// Triplet text dump with the site table as header, line-diffable and
    /// byte-stable across runs.
    pub fn dump(&self, graph: &LatticeGraph) -> String {
        use fmt::Write;
        assert_eq!(graph.site_count(), self.dim, "graph does not match matrix");
        let mut out = String::new();
        writeln!(out, "{MATRIX_SCHEMA}").unwrap();
        writeln!(out, "sites {}", self.dim).unwrap();
        for (index, site) in graph.sites().iter().enumerate() {
            writeln!(out, "{index} {site}").unwrap();
        }
        writeln!(out, "triplets {}", self.triplets.len()).unwrap();
        for &(i, j, w) in &self.triplets {
            writeln!(out, "{i} {j} {w:+}").unwrap();
        }
        out
    }
}

/// The orthogonal change of basis to ξ states: identity on external sites,
/// and on each switch's four centers the 4×4 Hadamard block (signs halved).
/// Symmetric and involutive, so Q = Qᵀ = Q⁻¹.
#[derive(Clone, Debug)]
pub struct XiTransform {
    dim: usize,
    /// Center site indices per complete switch block, α-major within.
    blocks: Vec<[usize; 4]>,
    /// Reverse map: site index → (block number, α), for centers only.
    block_of: Vec<Option<(usize, u8)>>,
}

impl XiTransform {
    pub fn from_graph(graph: &LatticeGraph) -> Self {
        let dim = graph.site_count();
        let mut blocks = Vec::new();
        let mut block_of = vec![None; dim];
        for vertex in graph.vertices() {
            let indices: Option<Vec<usize>> =
                (0..4).map(|alpha| graph.center_index(vertex, alpha)).collect();
            // Incomplete switch blocks (possible only in corrupted dumps) are
            // left untransformed; validate() reports them separately.
            if let Some(idx) = indices {
                let block: [usize; 4] = idx.try_into().unwrap();
                for (alpha, &site) in block.iter().enumerate() {
                    block_of[site] = Some((blocks.len(), alpha as u8));
                }
                blocks.push(block);
            }
        }
        XiTransform { dim, blocks, block_of }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.dim, self.dim);
        for block in &self.blocks {
            for (a, &row) in block.iter().enumerate() {
                for (b, &col) in block.iter().enumerate() {
                    q[(row, col)] = 0.5 * f64::from(HADAMARD_SIGNS[a][b]);
                }
            }
        }
        q
    }

    /// Nonzero entries of column `i` of Q as (row, value).
    fn column(&self, i: usize) -> Vec<(usize, f64)> {
        match self.block_of[i] {
            None => vec![(i, 1.0)],
            Some((block, alpha)) => self.blocks[block]
                .iter()
                .enumerate()
                .map(|(a, &row)| (row, 0.5 * f64::from(HADAMARD_SIGNS[a][alpha as usize])))
                .collect(),
        }
    }

    /// Q·x (equal to Qᵀ·x by symmetry).
    pub fn apply_vec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(x.len(), self.dim, "state dimension mismatch");
        let mut y = x.clone();
        for block in &self.blocks {
            let old: [Complex64; 4] = std::array::from_fn(|a| x[block[a]]);
            for (a, &row) in block.iter().enumerate() {
                y[row] = (0..4)
                    .map(|b| 0.5 * f64::from(HADAMARD_SIGNS[a][b]) * old[b])
                    .sum();
            }
        }
        y
    }

    /// Exact sparse conjugation QᵀHQ. Every product is a sum of dyadic
    /// rationals, so cancellations are exact; entries equal to 0.0 are
    /// dropped, anything else (however small) is kept for the verifier.
    pub fn conjugate(&self, h: &Hamiltonian) -> Hamiltonian {
        assert_eq!(h.dim(), self.dim, "matrix does not match transform");
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut add = |r: usize, c: usize, w: f64, q: &Self| {
            for (a, qa) in q.column(r) {
                for (b, qb) in q.column(c) {
                    if a <= b {
                        *acc.entry((a, b)).or_insert(0.0) += qa * w * qb;
                    }
                }
            }
        };
        for &(i, j, w) in h.triplets() {
            add(i, j, w, self);
            if i != j {
                add(j, i, w, self);
            }
        }
        Hamiltonian {
            dim: self.dim,
            triplets: acc
                .into_iter()
                .filter_map(|((i, j), w)| (w != 0.0).then_some((i, j, w)))
                .collect(),
        }
    }
}

/// One effective chain of the ξ-basis decomposition.
#[derive(Clone, Debug, PartialEq)]
pub enum Chain {
    /// Head (or dangling link) coupled to a single ξ state.
    Two { xi: XiRef, outer: usize, outer_site: SiteId },
    /// ξ — external — ξ, via an in-plane link or an inter-plane connector.
    Three { left: XiRef, middle: usize, middle_site: SiteId, right: XiRef },
    /// A ξ state whose leg has no attached qubit.
    Isolated { xi: XiRef },
}

/// A ξ state: the vertex, its leg/layer index α, and the dense site index it
/// occupies (the same index as center (vertex, α)).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XiRef {
    pub vertex: VertexId,
    pub alpha: u8,
    pub index: usize,
}

impl fmt::Display for XiRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "xi[{}].{}", self.vertex, self.alpha)
    }
}

/// The verified chain decomposition, plus the worst deviations encountered
/// (both within tolerance whenever this is returned as `Ok`).
#[derive(Clone, Debug)]
pub struct ChainInventory {
    pub chains: Vec<Chain>,
    /// Largest |entry| seen off the expected coupling pattern.
    pub max_off_pattern: f64,
    /// Largest |entry − 1| over the expected chain couplings.
    pub max_coupling_error: f64,
}

impl ChainInventory {
    /// (two-chains, three-chains, isolated) counts.
    pub fn census(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for chain in &self.chains {
            match chain {
                Chain::Two { .. } => counts.0 += 1,
                Chain::Three { .. } => counts.1 += 1,
                Chain::Isolated { .. } => counts.2 += 1,
            }
        }
        counts
    }

    pub fn census_line(&self) -> String {
        let (two, three, isolated) = self.census();
        format!("2-chains: {two}, 3-chains: {three}, isolated: {isolated}")
    }

    /// Number of three-chains whose middle qubit is an inter-plane connector.
    pub fn interplane_three_chains(&self) -> usize {
        self.chains
            .iter()
            .filter(|c| matches!(c, Chain::Three { middle_site: SiteId::Connector { .. }, .. }))
            .count()
    }

    /// The eigenvalue multiset implied by the chains, ascending: {±1} per
    /// 2-chain, {0, ±√2} per 3-chain, {0} per isolated state.
    pub fn chain_spectrum(&self) -> Vec<f64> {
        let mut values = Vec::new();
        for chain in &self.chains {
            match chain {
                Chain::Two { .. } => values.extend([-1.0, 1.0]),
                Chain::Three { .. } => {
                    values.extend([-std::f64::consts::SQRT_2, 0.0, std::f64::consts::SQRT_2])
                }
                Chain::Isolated { .. } => values.push(0.0),
            }
        }
        values.sort_unstable_by(f64::total_cmp);
        values
    }

    /// Structured text listing, one chain per line, deterministic order.
    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        writeln!(out, "{}", self.census_line()).unwrap();
        for chain in &self.chains {
            match chain {
                Chain::Two { xi, outer_site, .. } => {
                    writeln!(out, "two      {outer_site} -- {xi}").unwrap()
                }
                Chain::Three { left, middle_site, right, .. } => {
                    writeln!(out, "three    {left} -- {middle_site} -- {right}").unwrap()
                }
                Chain::Isolated { xi } => writeln!(out, "isolated {xi}").unwrap(),
            }
        }
        out
    }
}

/// A single deviation from the expected ξ-basis block structure.
#[derive(Clone, Debug, PartialEq)]
pub enum StructureViolation {
    /// Nonzero entry outside the chain coupling pattern.
    OffPattern { a: usize, b: usize, value: f64 },
    /// Nonzero diagonal entry.
    Diagonal { index: usize, value: f64 },
    /// Chain coupling present but not 1.
    CouplingValue { a: usize, b: usize, value: f64 },
    /// Chain coupling absent altogether.
    MissingCoupling { a: usize, b: usize },
    /// Sites that do not form a valid 1/2/3-site component.
    BadComponent { sites: Vec<usize> },
}

/// Failed verification: everything that deviated, with the worst magnitudes.
#[derive(Clone, Debug)]
pub struct StructureReport {
    pub violations: Vec<StructureViolation>,
    pub max_off_pattern: f64,
}

impl StructureReport {
    /// Human-readable dump with site labels resolved against the graph.
    pub fn describe(&self, graph: &LatticeGraph) -> String {
        use fmt::Write;
        let label = |i: usize| {
            graph
                .sites()
                .get(i)
                .map_or_else(|| format!("#{i}"), |s| s.to_string())
        };
        let mut out = String::new();
        writeln!(
            out,
            "block structure verification failed: {} violation(s), max off-pattern {:.3e}",
            self.violations.len(),
            self.max_off_pattern
        )
        .unwrap();
        for v in &self.violations {
            match v {
                StructureViolation::OffPattern { a, b, value } => {
                    writeln!(out, "  off-pattern {} -- {}: {value:e}", label(*a), label(*b)).unwrap()
                }
                StructureViolation::Diagonal { index, value } => {
                    writeln!(out, "  diagonal at {}: {value:e}", label(*index)).unwrap()
                }
                StructureViolation::CouplingValue { a, b, value } => {
                    writeln!(out, "  coupling {} -- {} is {value}, expected 1", label(*a), label(*b)).unwrap()
                }
                StructureViolation::MissingCoupling { a, b } => {
                    writeln!(out, "  coupling {} -- {} missing", label(*a), label(*b)).unwrap()
                }
                StructureViolation::BadComponent { sites } => {
                    let names: Vec<String> = sites.iter().map(|&i| label(i)).collect();
                    writeln!(out, "  malformed component [{}]", names.join(", ")).unwrap()
                }
            }
        }
        out
    }
}

/// Verify that QᵀHQ is exactly the direct sum of uniform 2- and 3-chains the
/// lattice structure predicts, and return the classified chain inventory.
///
/// This is the primary correctness oracle for the whole construction: the
/// expected pattern is derived from the *site table* (which external sits on
/// which leg), then every numeric entry of the exact conjugation is checked
/// against it — off-pattern entries above [`tol::STRUCTURAL_ZERO`], chain
/// couplings off 1 by more than [`tol::CHAIN_COUPLING`], nonzero diagonals,
/// and malformed components are all reported.
pub fn verify_block_structure(
    graph: &LatticeGraph,
    h: &Hamiltonian,
    q: &XiTransform,
) -> Result<ChainInventory, StructureReport> {
    let mut violations = Vec::new();

    // The expected coupling pattern and chain classification, from structure.
    let mut chains = Vec::new();
    let mut expected: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut xi_used = vec![false; graph.site_count()];
    let xi_ref = |vertex: VertexId, alpha: u8| -> Option<XiRef> {
        graph
            .center_index(vertex, alpha)
            .map(|index| XiRef { vertex, alpha, index })
    };
    for (index, &site) in graph.sites().iter().enumerate() {
        if matches!(site, SiteId::Center { .. }) {
            continue;
        }
        let refs: Vec<XiRef> = graph
            .attachments(site)
            .into_iter()
            .filter_map(|(v, leg)| xi_ref(v, leg))
            .collect();
        for r in &refs {
            expected.insert((r.index.min(index), r.index.max(index)));
            if std::mem::replace(&mut xi_used[r.index], true) {
                violations.push(StructureViolation::BadComponent { sites: vec![r.index, index] });
            }
        }
        match refs.as_slice() {
            [xi] => chains.push(Chain::Two { xi: *xi, outer: index, outer_site: site }),
            [left, right] => chains.push(Chain::Three {
                left: *left,
                middle: index,
                middle_site: site,
                right: *right,
            }),
            _ => violations.push(StructureViolation::BadComponent { sites: vec![index] }),
        }
    }
    for (index, &site) in graph.sites().iter().enumerate() {
        if let SiteId::Center { vertex, alpha } = site {
            if !xi_used[index] {
                chains.push(Chain::Isolated { xi: XiRef { vertex, alpha, index } });
            }
        }
    }

    // Numeric check of the exact conjugation against the pattern.
    let conj = q.conjugate(h);
    let mut max_off_pattern = 0.0f64;
    let mut max_coupling_error = 0.0f64;
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(a, b, value) in conj.triplets() {
        if a == b {
            if value.abs() > tol::STRUCTURAL_ZERO {
                violations.push(StructureViolation::Diagonal { index: a, value });
            }
            max_off_pattern = max_off_pattern.max(value.abs());
        } else if expected.contains(&(a, b)) {
            seen.insert((a, b));
            max_coupling_error = max_coupling_error.max((value - 1.0).abs());
            if (value - 1.0).abs() > tol::CHAIN_COUPLING {
                violations.push(StructureViolation::CouplingValue { a, b, value });
            }
        } else {
            max_off_pattern = max_off_pattern.max(value.abs());
            if value.abs() > tol::STRUCTURAL_ZERO {
                violations.push(StructureViolation::OffPattern { a, b, value });
            }
        }
    }
    for &(a, b) in expected.difference(&seen) {
        violations.push(StructureViolation::MissingCoupling { a, b });
        max_coupling_error = 1.0;
    }

    if violations.is_empty() {
        Ok(ChainInventory { chains, max_off_pattern, max_coupling_error })
    } else {
        Err(StructureReport { violations, max_off_pattern })
    }
}
