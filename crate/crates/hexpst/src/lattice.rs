//! Hexagonal switch lattices: vertex grid, site enumeration, signed couplings.
//!
//! A lattice is a stack of honeycomb planes drawn brick-wall style. Every
//! vertex hosts a *switch*: four center qubits (layer 0 lies in the plane,
//! layers 1–3 are control layers) that couple to the external qubits sitting
//! on the vertex's legs with the signed weights of a 4×4 Hadamard matrix
//! scaled by 1/2. Legs 1–3 carry link qubits shared with the neighboring
//! switch (or dangling at the boundary); leg 0 carries either a read/write
//! head or an inter-plane connector qubit, never both.
//!
//! The module owns the declarative [`LatticeSpec`], the realized
//! [`LatticeGraph`] (site table plus coupling list), the invariant checker
//! [`LatticeGraph::validate`], and a deterministic text dump suitable for
//! diffing.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Schema tag required at the top of every lattice spec file.
pub const LATTICE_SCHEMA: &str = "hexpst-lattice/1";

/// Schema tag heading a graph dump.
pub const GRAPH_SCHEMA: &str = "hexpst-graph/1";

/// Sign pattern of the 4×4 Hadamard matrix. Row α is the center layer,
/// column β is the leg; the physical coupling is the sign scaled by 1/2 so
/// each column has unit norm.
pub const HADAMARD_SIGNS: [[i8; 4]; 4] = [
    [1, 1, 1, 1],
    [1, 1, -1, -1],
    [1, -1, 1, -1],
    [1, -1, -1, 1],
];

/// Coupling weight between center layer `alpha` of a switch and the external
/// qubit attached to its leg `leg`. Exactly ±0.5.
pub fn switch_weight(alpha: u8, leg: u8) -> f64 {
    0.5 * f64::from(HADAMARD_SIGNS[alpha as usize][leg as usize])
}

/// Honeycomb sublattice color. No two adjacent vertices share a color.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sublattice {
    A,
    B,
}

/// A lattice vertex: plane index plus brick-wall (row, col) coordinates.
///
/// Rendered and parsed as `p<plane>:<row>,<col>`, e.g. `p0:1,2`. Ordering is
/// lexicographic in (plane, row, col) and fixes every deterministic order in
/// the crate (site tables, tie-breaking in the route planner).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VertexId {
    pub plane: u32,
    pub row: i32,
    pub col: i32,
}

impl VertexId {
    pub fn new(plane: u32, row: i32, col: i32) -> Self {
        VertexId { plane, row, col }
    }

    /// Bipartite color: (row + col) even is A, odd is B.
    pub fn sublattice(self) -> Sublattice {
        if (self.row + self.col).rem_euclid(2) == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    /// The vertex this one's leg `dir` (1–3) points at, whether or not it is
    /// part of any particular patch.
    ///
    /// Convention: from an A-vertex, leg 1 points up, 2 lower-left,
    /// 3 lower-right; from a B-vertex, 1 points down, 2 upper-right,
    /// 3 upper-left. Mirroring the directions on the two colors makes a link
    /// carry the same leg index at both endpoints.
    pub fn neighbor(self, dir: u8) -> VertexId {
        let (dr, dc) = match (self.sublattice(), dir) {
            (Sublattice::A, 1) => (1, 0),
            (Sublattice::A, 2) => (0, -1),
            (Sublattice::A, 3) => (0, 1),
            (Sublattice::B, 1) => (-1, 0),
            (Sublattice::B, 2) => (0, 1),
            (Sublattice::B, 3) => (0, -1),
            _ => panic!("leg direction must be 1, 2, or 3 (got {dir})"),
        };
        VertexId::new(self.plane, self.row + dr, self.col + dc)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}:{},{}", self.plane, self.row, self.col)
    }
}

/// Error for unparseable [`VertexId`] / [`SiteId`] text forms.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("expected {expected}, got {got:?}")]
pub struct ParseIdError {
    expected: &'static str,
    got: String,
}

impl ParseIdError {
    fn new(expected: &'static str, got: &str) -> Self {
        ParseIdError {
            expected,
            got: got.to_owned(),
        }
    }
}

impl FromStr for VertexId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseIdError::new("vertex id like p0:1,2", s);
        let rest = s.trim().strip_prefix('p').ok_or_else(err)?;
        let (plane, coords) = rest.split_once(':').ok_or_else(err)?;
        let (row, col) = coords.split_once(',').ok_or_else(err)?;
        Ok(VertexId {
            plane: plane.parse().map_err(|_| err())?,
            row: row.trim().parse().map_err(|_| err())?,
            col: col.trim().parse().map_err(|_| err())?,
        })
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(D::Error::custom)
    }
}

/// Patch size of one plane, counted in hexagonal cells.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct HexExtent {
    pub rows: u32,
    pub cols: u32,
}

impl From<[u32; 2]> for HexExtent {
    fn from([rows, cols]: [u32; 2]) -> Self {
        HexExtent { rows, cols }
    }
}

impl From<HexExtent> for [u32; 2] {
    fn from(e: HexExtent) -> Self {
        [e.rows, e.cols]
    }
}

impl HexExtent {
    pub fn new(rows: u32, cols: u32) -> Self {
        HexExtent { rows, cols }
    }

    /// Inclusive column range of vertex row `row`, or `None` when the row is
    /// outside the patch. Brick rows are offset by one column per row, so the
    /// interior rows span `[row−1, row+2·cols]` while the extreme rows only
    /// border bricks on one side.
    fn col_range(self, row: i32) -> Option<(i32, i32)> {
        let (r, c) = (self.rows as i32, self.cols as i32);
        if r == 0 || c == 0 || row < 0 || row > r {
            return None;
        }
        Some(if row == 0 {
            (0, 2 * c)
        } else if row == r {
            (r - 1, r + 2 * c - 1)
        } else {
            (row - 1, row + 2 * c)
        })
    }

    /// Whether (row, col) names a vertex of this patch.
    pub fn contains(self, row: i32, col: i32) -> bool {
        self.col_range(row)
            .is_some_and(|(lo, hi)| (lo..=hi).contains(&col))
    }

    /// All vertices of one plane in canonical (row, col) order.
    pub fn vertices(self, plane: u32) -> Vec<VertexId> {
        let mut out = Vec::new();
        for row in 0..=self.rows as i32 {
            if let Some((lo, hi)) = self.col_range(row) {
                out.extend((lo..=hi).map(|col| VertexId::new(plane, row, col)));
            }
        }
        out
    }
}

/// What happens to boundary legs whose neighbor vertex is outside the patch.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// No link qubit on legs without a neighbor (the matching ξ state ends up
    /// isolated).
    #[default]
    TrimDangling,
    /// Keep a single-ended link qubit on every boundary leg.
    KeepDangling,
}

/// Which vertices carry a read/write head on their leg 0.
///
/// Connector endpoints never carry a head: under `AllVertices` the connector
/// silently takes precedence, while naming a connector endpoint in `Listed`
/// is a spec inconsistency and rejected.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadPolicy {
    #[default]
    AllVertices,
    Listed(Vec<VertexId>),
}

/// One inter-plane connector: a single qubit joining leg 0 of a vertex on
/// plane `plane_a` to leg 0 of a vertex on plane `plane_b`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ConnectorSpec {
    pub plane_a: u32,
    pub plane_b: u32,
    /// (row, col) on `plane_a`.
    pub vertex_on_a: [i32; 2],
    /// (row, col) on `plane_b`.
    pub vertex_on_b: [i32; 2],
}

impl ConnectorSpec {
    pub fn endpoint_a(&self) -> VertexId {
        VertexId::new(self.plane_a, self.vertex_on_a[0], self.vertex_on_a[1])
    }

    pub fn endpoint_b(&self) -> VertexId {
        VertexId::new(self.plane_b, self.vertex_on_b[0], self.vertex_on_b[1])
    }
}

fn default_planes() -> u32 {
    1
}

/// Declarative description of a lattice, loadable from JSON.
///
/// The serialized form mirrors the fields one-to-one; `schema` must equal
/// [`LATTICE_SCHEMA`]. Unknown fields are rejected so a typo cannot silently
/// change the built lattice.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub schema: String,
    #[serde(default = "default_planes")]
    pub planes: u32,
    pub hex_extent: HexExtent,
    #[serde(default)]
    pub boundary_policy: BoundaryPolicy,
    #[serde(default)]
    pub rw_head_policy: HeadPolicy,
    #[serde(default)]
    pub interplane_connectors: Vec<ConnectorSpec>,
    #[serde(default)]
    pub faulty_switches: Vec<VertexId>,
}

impl LatticeSpec {
    /// A fresh spec with the given stack depth and per-plane extent, default
    /// policies, no connectors, no faults.
    pub fn new(planes: u32, extent: HexExtent) -> Self {
        LatticeSpec {
            schema: LATTICE_SCHEMA.to_owned(),
            planes,
            hex_extent: extent,
            boundary_policy: BoundaryPolicy::default(),
            rw_head_policy: HeadPolicy::default(),
            interplane_connectors: Vec::new(),
            faulty_switches: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: LatticeSpec = serde_json::from_str(text)?;
        if spec.schema != LATTICE_SCHEMA {
            return Err(SpecError::Schema(spec.schema));
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("spec serializes");
        text.push('\n');
        text
    }
}

/// Dense-indexed site of the realized lattice.
///
/// The variant order here *is* the global site order: all centers
/// (vertex-major, layer-minor), then heads, then link qubits
/// (owner-major, leg-minor), then connector qubits (declaration order).
/// Text forms: `c[p0:1,2].0`, `h[p0:1,2]`, `l[p0:1,2].3`, `x[0]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum SiteId {
    /// Center qubit of the switch at `vertex`, control layer `alpha` (0–3).
    Center { vertex: VertexId, alpha: u8 },
    /// Read/write head on leg 0 of `vertex`.
    Head { vertex: VertexId },
    /// Link qubit on leg `dir` (1–3) of `owner`. For a link shared by two
    /// switches the owner is the A-sublattice endpoint; a dangling link is
    /// owned by its only endpoint.
    Link { owner: VertexId, dir: u8 },
    /// Inter-plane connector qubit, numbered by declaration order.
    Connector { id: usize },
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SiteId::Center { vertex, alpha } => write!(f, "c[{vertex}].{alpha}"),
            SiteId::Head { vertex } => write!(f, "h[{vertex}]"),
            SiteId::Link { owner, dir } => write!(f, "l[{owner}].{dir}"),
            SiteId::Connector { id } => write!(f, "x[{id}]"),
        }
    }
}

impl FromStr for SiteId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseIdError::new("site label like c[p0:1,2].0, h[p0:1,2], l[p0:1,2].1, or x[0]", s);
        let text = s.trim();
        let (kind, rest) = text.split_at(text.char_indices().nth(1).map_or(text.len(), |(i, _)| i));
        let inner = rest.strip_prefix('[').ok_or_else(err)?;
        let (body, suffix) = inner.split_once(']').ok_or_else(err)?;
        let index_after_dot = |sfx: &str| sfx.strip_prefix('.').map(str::parse::<u8>);
        match kind {
            "c" => {
                let alpha = index_after_dot(suffix).ok_or_else(err)?.map_err(|_| err())?;
                if alpha > 3 {
                    return Err(err());
                }
                Ok(SiteId::Center { vertex: body.parse()?, alpha })
            }
            "l" => {
                let dir = index_after_dot(suffix).ok_or_else(err)?.map_err(|_| err())?;
                if !(1..=3).contains(&dir) {
                    return Err(err());
                }
                Ok(SiteId::Link { owner: body.parse()?, dir })
            }
            "h" if suffix.is_empty() => Ok(SiteId::Head { vertex: body.parse()? }),
            "x" if suffix.is_empty() => {
                let id = body.parse().map_err(|_| err())?;
                Ok(SiteId::Connector { id })
            }
            _ => Err(err()),
        }
    }
}

/// One hop of vertex adjacency: an in-plane link (with its shared leg index)
/// or an inter-plane connector.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Edge {
    InPlane { dir: u8 },
    Connector { id: usize },
}

/// Rejection diagnostics for inconsistent specs, dump parsing, and adjacency
/// queries.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("spec schema must be {LATTICE_SCHEMA:?}, got {0:?}")]
    Schema(String),
    #[error("spec is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("planes must be at least 1")]
    NoPlanes,
    #[error("{role} references vertex {vertex}, which is not in the lattice")]
    UnknownVertex { role: &'static str, vertex: VertexId },
    #[error("connector {index} joins plane {plane} to itself")]
    ConnectorSamePlane { index: usize, plane: u32 },
    #[error("connector {index} references plane {plane}, but the spec has {planes} plane(s)")]
    ConnectorPlaneRange { index: usize, plane: u32, planes: u32 },
    #[error("connectors {first} and {second} both claim leg 0 of vertex {vertex}")]
    ConnectorClash { first: usize, second: usize, vertex: VertexId },
    #[error("vertex {vertex} is endpoint of connector {connector} but is also a listed RW head")]
    HeadConnectorClash { connector: usize, vertex: VertexId },
    #[error("vertices {a} and {b} are not joined by an in-plane link")]
    NotAdjacent { a: VertexId, b: VertexId },
    #[error("graph dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

/// A single invariant violation found by [`LatticeGraph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `sites[position]` is out of order or duplicates its predecessor.
    NonCanonicalSiteOrder { position: usize },
    /// Coupling entry with an index outside the site table or not in
    /// canonical (low, high) form.
    IndexOutOfRange { entry: usize },
    /// Two center qubits coupled (switch centers never interact).
    CenterCenterCoupling { a: usize, b: usize },
    /// Two external qubits coupled directly.
    ExternalExternalCoupling { a: usize, b: usize },
    /// Center–external coupling present with the wrong value.
    WrongWeight { center: usize, external: usize, expected: f64, got: f64 },
    /// External qubit coupled to a switch it is not attached to.
    ForeignAttachment { external: usize, vertex: VertexId },
    /// An attached external is missing couplings to some of the four centers
    /// of this switch.
    IncompleteSwitchBlock { vertex: VertexId, external: usize },
    /// More than one external qubit claims the same leg of the same switch.
    LegConflict { vertex: VertexId, leg: u8 },
    /// A shared link stored under its B-sublattice endpoint.
    NonCanonicalOwnership { external: usize },
    /// An in-plane link joining two same-color vertices.
    NotBipartite { a: VertexId, b: VertexId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonCanonicalSiteOrder { position } => {
                write!(f, "site table out of canonical order at position {position}")
            }
            Violation::IndexOutOfRange { entry } => {
                write!(f, "coupling entry {entry} has an out-of-range or non-canonical index pair")
            }
            Violation::CenterCenterCoupling { a, b } => {
                write!(f, "center qubits {a} and {b} are coupled")
            }
            Violation::ExternalExternalCoupling { a, b } => {
                write!(f, "external qubits {a} and {b} are coupled")
            }
            Violation::WrongWeight { center, external, expected, got } => write!(
                f,
                "coupling between center {center} and external {external} is {got}, expected {expected}"
            ),
            Violation::ForeignAttachment { external, vertex } => {
                write!(f, "external qubit {external} couples to switch {vertex} without being attached to it")
            }
            Violation::IncompleteSwitchBlock { vertex, external } => {
                write!(f, "external qubit {external} is missing couplings to some centers of switch {vertex}")
            }
            Violation::LegConflict { vertex, leg } => {
                write!(f, "multiple external qubits claim leg {leg} of vertex {vertex}")
            }
            Violation::NonCanonicalOwnership { external } => {
                write!(f, "link site {external} is owned by its B-sublattice endpoint")
            }
            Violation::NotBipartite { a, b } => {
                write!(f, "link joins same-color vertices {a} and {b}")
            }
        }
    }
}

/// The realized lattice: ordered site table, signed coupling list, vertex
/// adjacency, and the head/fault/connector bookkeeping.
///
/// Immutable after construction (the public `couplings` field exists so tests
/// can inject corruptions for [`LatticeGraph::validate`] to catch).
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    sites: Vec<SiteId>,
    site_index: BTreeMap<SiteId, usize>,
    vertices: BTreeSet<VertexId>,
    heads: BTreeSet<VertexId>,
    faulty: BTreeSet<VertexId>,
    /// Endpoint pairs of the inter-plane connectors, by connector id.
    connectors: Vec<(VertexId, VertexId)>,
    adjacency: BTreeMap<VertexId, Vec<(VertexId, Edge)>>,
    /// Symmetric couplings as canonical (low index, high index, weight)
    /// triples, each pair listed once, sorted.
    pub couplings: Vec<(usize, usize, f64)>,
}

impl LatticeGraph {
    /// Realize a declarative spec. All spec invariants are checked here and
    /// yield [`SpecError`] diagnostics.
    pub fn build(spec: &LatticeSpec) -> Result<Self, SpecError> {
        if spec.planes == 0 {
            return Err(SpecError::NoPlanes);
        }
        let mut vertices = Vec::new();
        for plane in 0..spec.planes {
            vertices.extend(spec.hex_extent.vertices(plane));
        }
        let vertex_set: BTreeSet<VertexId> = vertices.iter().copied().collect();

        // Connectors claim leg 0 of their endpoints; at most one claim each.
        let mut connector_at: BTreeMap<VertexId, usize> = BTreeMap::new();
        let mut connectors = Vec::new();
        for (index, c) in spec.interplane_connectors.iter().enumerate() {
            for plane in [c.plane_a, c.plane_b] {
                if plane >= spec.planes {
                    return Err(SpecError::ConnectorPlaneRange { index, plane, planes: spec.planes });
                }
            }
            if c.plane_a == c.plane_b {
                return Err(SpecError::ConnectorSamePlane { index, plane: c.plane_a });
            }
            for vertex in [c.endpoint_a(), c.endpoint_b()] {
                if !vertex_set.contains(&vertex) {
                    return Err(SpecError::UnknownVertex { role: "interplane_connectors", vertex });
                }
                if let Some(&first) = connector_at.get(&vertex) {
                    return Err(SpecError::ConnectorClash { first, second: index, vertex });
                }
                connector_at.insert(vertex, index);
            }
            connectors.push((c.endpoint_a(), c.endpoint_b()));
        }

        let mut faulty = BTreeSet::new();
        for &vertex in &spec.faulty_switches {
            if !vertex_set.contains(&vertex) {
                return Err(SpecError::UnknownVertex { role: "faulty_switches", vertex });
            }
            faulty.insert(vertex);
        }

        let heads: BTreeSet<VertexId> = match &spec.rw_head_policy {
            // A connector takes over leg 0; those vertices simply get no head.
            HeadPolicy::AllVertices => vertices
                .iter()
                .copied()
                .filter(|v| !connector_at.contains_key(v))
                .collect(),
            HeadPolicy::Listed(list) => {
                let mut set = BTreeSet::new();
                for &vertex in list {
                    if !vertex_set.contains(&vertex) {
                        return Err(SpecError::UnknownVertex { role: "rw_head_policy", vertex });
                    }
                    if let Some(&connector) = connector_at.get(&vertex) {
                        return Err(SpecError::HeadConnectorClash { connector, vertex });
                    }
                    set.insert(vertex);
                }
                set
            }
        };

        // Link qubits, keyed by (owner, leg). A shared link belongs to its
        // A-sublattice endpoint, so it is recorded exactly once.
        let mut links = BTreeSet::new();
        for &v in &vertices {
            for dir in 1..=3u8 {
                let w = v.neighbor(dir);
                if vertex_set.contains(&w) {
                    let owner = if matches!(v.sublattice(), Sublattice::A) { v } else { w };
                    links.insert((owner, dir));
                } else if spec.boundary_policy == BoundaryPolicy::KeepDangling {
                    links.insert((v, dir));
                }
            }
        }

        Ok(Self::assemble(vertices, heads, links, connectors, faulty))
    }

    /// A single switch in isolation: one vertex with its head and all three
    /// link qubits kept dangling — the smallest complete switch (8 sites).
    pub fn standalone_switch() -> Self {
        let v = VertexId::new(0, 0, 0);
        Self::assemble(
            vec![v],
            BTreeSet::from([v]),
            (1..=3).map(|dir| (v, dir)).collect(),
            Vec::new(),
            BTreeSet::new(),
        )
    }

    fn assemble(
        vertices: Vec<VertexId>,
        heads: BTreeSet<VertexId>,
        links: BTreeSet<(VertexId, u8)>,
        connectors: Vec<(VertexId, VertexId)>,
        faulty: BTreeSet<VertexId>,
    ) -> Self {
        let mut sites = Vec::new();
        for &vertex in &vertices {
            sites.extend((0..4).map(|alpha| SiteId::Center { vertex, alpha }));
        }
        sites.extend(heads.iter().map(|&vertex| SiteId::Head { vertex }));
        sites.extend(links.iter().map(|&(owner, dir)| SiteId::Link { owner, dir }));
        sites.extend((0..connectors.len()).map(|id| SiteId::Connector { id }));

        let mut graph = Self::from_site_table(sites, connectors, faulty);
        graph.couplings = graph.regenerate_couplings();
        graph
    }

    /// Wrap an explicit site table (used by [`Self::parse_dump`]); couplings
    /// are left for the caller.
    fn from_site_table(
        sites: Vec<SiteId>,
        connectors: Vec<(VertexId, VertexId)>,
        faulty: BTreeSet<VertexId>,
    ) -> Self {
        let site_index: BTreeMap<SiteId, usize> =
            sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut vertices = BTreeSet::new();
        let mut heads = BTreeSet::new();
        for &site in &sites {
            match site {
                SiteId::Center { vertex, .. } => {
                    vertices.insert(vertex);
                }
                SiteId::Head { vertex } => {
                    heads.insert(vertex);
                }
                _ => {}
            }
        }

        let mut adjacency: BTreeMap<VertexId, Vec<(VertexId, Edge)>> =
            vertices.iter().map(|&v| (v, Vec::new())).collect();
        for &site in &sites {
            if let SiteId::Link { owner, dir } = site {
                let other = owner.neighbor(dir);
                if vertices.contains(&other) && vertices.contains(&owner) {
                    adjacency.get_mut(&owner).unwrap().push((other, Edge::InPlane { dir }));
                    adjacency.get_mut(&other).unwrap().push((owner, Edge::InPlane { dir }));
                }
            }
        }
        for (id, &(a, b)) in connectors.iter().enumerate() {
            if let Some(list) = adjacency.get_mut(&a) {
                list.push((b, Edge::Connector { id }));
            }
            if let Some(list) = adjacency.get_mut(&b) {
                list.push((a, Edge::Connector { id }));
            }
        }
        for list in adjacency.values_mut() {
            list.sort_unstable();
        }

        LatticeGraph {
            sites,
            site_index,
            vertices,
            heads,
            faulty,
            connectors,
            adjacency,
            couplings: Vec::new(),
        }
    }

    /// The switches each external qubit touches, as (vertex, leg) pairs.
    /// Derived from the site table alone, independent of the coupling list.
    /// Centers have no attachments; links report one or two endpoints.
    pub fn attachments(&self, site: SiteId) -> Vec<(VertexId, u8)> {
        match site {
            SiteId::Center { .. } => Vec::new(),
            SiteId::Head { vertex } => vec![(vertex, 0)],
            SiteId::Link { owner, dir } => {
                let mut at = vec![(owner, dir)];
                let other = owner.neighbor(dir);
                if self.vertices.contains(&other) {
                    at.push((other, dir));
                }
                at
            }
            SiteId::Connector { id } => match self.connectors.get(id) {
                Some(&(a, b)) => vec![(a, 0), (b, 0)],
                None => Vec::new(),
            },
        }
    }

    /// The canonical coupling list implied by the site table: every external
    /// couples to the four centers of each switch it is attached to, with the
    /// Hadamard column weights.
    fn regenerate_couplings(&self) -> Vec<(usize, usize, f64)> {
        let mut couplings = Vec::new();
        for (index, &site) in self.sites.iter().enumerate() {
            for (vertex, leg) in self.attachments(site) {
                for alpha in 0..4u8 {
                    if let Some(center) = self.site_index.get(&SiteId::Center { vertex, alpha }) {
                        couplings.push((*center, index, switch_weight(alpha, leg)));
                    }
                }
            }
        }
        couplings.sort_unstable_by_key(|&(row, col, _)| (row, col));
        couplings
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site_index(&self, site: SiteId) -> Option<usize> {
        self.site_index.get(&site).copied()
    }

    /// All switch vertices in canonical order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_exists(&self, vertex: VertexId) -> bool {
        self.vertices.contains(&vertex)
    }

    pub fn center_index(&self, vertex: VertexId, alpha: u8) -> Option<usize> {
        self.site_index(SiteId::Center { vertex, alpha })
    }

    pub fn head_index(&self, vertex: VertexId) -> Option<usize> {
        self.site_index(SiteId::Head { vertex })
    }

    /// Vertices carrying a read/write head, in canonical order.
    pub fn heads(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.heads.iter().copied()
    }

    pub fn is_faulty(&self, vertex: VertexId) -> bool {
        self.faulty.contains(&vertex)
    }

    pub fn faulty(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.faulty.iter().copied()
    }

    /// Endpoint pairs of the inter-plane connectors, indexed by connector id.
    pub fn connectors(&self) -> &[(VertexId, VertexId)] {
        &self.connectors
    }

    /// Adjacent vertices (links and connectors), sorted by neighbor id.
    pub fn neighbors(&self, vertex: VertexId) -> &[(VertexId, Edge)] {
        self.adjacency.get(&vertex).map_or(&[], Vec::as_slice)
    }

    /// Leg index (1–3) of the in-plane link joining two vertices; identical
    /// from both sides by the direction convention.
    pub fn link_direction_index(&self, vertex: VertexId, neighbor: VertexId) -> Result<u8, SpecError> {
        self.neighbors(vertex)
            .iter()
            .find_map(|&(w, edge)| match edge {
                Edge::InPlane { dir } if w == neighbor => Some(dir),
                _ => None,
            })
            .ok_or(SpecError::NotAdjacent { a: vertex, b: neighbor })
    }

    /// All center sites as (site index, vertex, layer) — the pulse targets.
    pub fn center_sites(&self) -> impl Iterator<Item = (usize, VertexId, u8)> + '_ {
        self.sites.iter().enumerate().filter_map(|(i, &s)| match s {
            SiteId::Center { vertex, alpha } => Some((i, vertex, alpha)),
            _ => None,
        })
    }

    /// Site indices of every center in control layer `alpha`.
    pub fn layer_sites(&self, alpha: u8) -> Vec<usize> {
        self.center_sites()
            .filter_map(|(i, _, a)| (a == alpha).then_some(i))
            .collect()
    }

    /// Check every structural invariant and report all violations found.
    /// The constructor output is always clean; this exists to catch corrupted
    /// or hand-edited graphs.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();

        for position in 1..self.sites.len() {
            if self.sites[position - 1] >= self.sites[position] {
                violations.push(Violation::NonCanonicalSiteOrder { position });
            }
        }

        // Structural leg bookkeeping from the site table.
        let mut leg_claims: BTreeMap<(VertexId, u8), usize> = BTreeMap::new();
        for (index, &site) in self.sites.iter().enumerate() {
            if let SiteId::Link { owner, dir } = site {
                let other = owner.neighbor(dir);
                if self.vertices.contains(&other) {
                    if matches!(owner.sublattice(), Sublattice::B) {
                        violations.push(Violation::NonCanonicalOwnership { external: index });
                    }
                    if owner.sublattice() == other.sublattice() {
                        violations.push(Violation::NotBipartite { a: owner, b: other });
                    }
                }
            }
            for claim in self.attachments(site) {
                *leg_claims.entry(claim).or_insert(0) += 1;
            }
        }
        for (&(vertex, leg), &count) in &leg_claims {
            if count > 1 {
                violations.push(Violation::LegConflict { vertex, leg });
            }
        }

        // Couplings against the attachment structure.
        let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut foreign: BTreeSet<(usize, VertexId)> = BTreeSet::new();
        for (entry, &(a, b, w)) in self.couplings.iter().enumerate() {
            if a >= b || b >= self.sites.len() {
                violations.push(Violation::IndexOutOfRange { entry });
                continue;
            }
            match (self.sites[a], self.sites[b]) {
                (SiteId::Center { .. }, SiteId::Center { .. }) => {
                    violations.push(Violation::CenterCenterCoupling { a, b });
                }
                (SiteId::Center { vertex, alpha }, external_site) => {
                    match self
                        .attachments(external_site)
                        .iter()
                        .find(|&&(v, _)| v == vertex)
                    {
                        Some(&(_, leg)) => {
                            let expected = switch_weight(alpha, leg);
                            if w != expected {
                                violations.push(Violation::WrongWeight {
                                    center: a,
                                    external: b,
                                    expected,
                                    got: w,
                                });
                            }
                            seen.insert((a, b), w);
                        }
                        None => {
                            if foreign.insert((b, vertex)) {
                                violations.push(Violation::ForeignAttachment { external: b, vertex });
                            }
                        }
                    }
                }
                _ => violations.push(Violation::ExternalExternalCoupling { a, b }),
            }
        }

        // Every attachment must be realized by all four center couplings.
        for (index, &site) in self.sites.iter().enumerate() {
            for (vertex, leg) in self.attachments(site) {
                let complete = (0..4u8).all(|alpha| {
                    self.site_index(SiteId::Center { vertex, alpha })
                        .and_then(|c| seen.get(&(c, index)))
                        .is_some_and(|&w| w == switch_weight(alpha, leg))
                });
                if !complete {
                    violations.push(Violation::IncompleteSwitchBlock { vertex, external: index });
                }
            }
        }

        violations
    }

    /// Deterministic text dump: site table, connector endpoints, fault list,
    /// coupling triplets. Line-diffable; [`Self::parse_dump`] inverts it
    /// bit-exactly.
    pub fn dump(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        writeln!(out, "{GRAPH_SCHEMA}").unwrap();
        writeln!(out, "sites {}", self.sites.len()).unwrap();
        for (index, site) in self.sites.iter().enumerate() {
            writeln!(out, "{index} {site}").unwrap();
        }
        writeln!(out, "connectors {}", self.connectors.len()).unwrap();
        for (id, (a, b)) in self.connectors.iter().enumerate() {
            writeln!(out, "{id} {a} {b}").unwrap();
        }
        writeln!(out, "faults {}", self.faulty.len()).unwrap();
        for vertex in &self.faulty {
            writeln!(out, "{vertex}").unwrap();
        }
        writeln!(out, "couplings {}", self.couplings.len()).unwrap();
        for &(a, b, w) in &self.couplings {
            writeln!(out, "{a} {b} {w:+}").unwrap();
        }
        out
    }

    /// Parse a [`Self::dump`] back into a graph. Structure errors carry the
    /// offending line; semantic corruption is left for [`Self::validate`].
    pub fn parse_dump(text: &str) -> Result<Self, SpecError> {
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| {
            lines
                .next()
                .map(|(n, line)| (n + 1, line))
                .ok_or_else(|| SpecError::Dump { line: 0, msg: format!("missing {expect}") })
        };
        let fail = |line: usize, msg: String| SpecError::Dump { line, msg };

        let (line, header) = next("schema header")?;
        if header.trim() != GRAPH_SCHEMA {
            return Err(fail(line, format!("schema must be {GRAPH_SCHEMA:?}, got {header:?}")));
        }

        let section_len = |tag: &str, (line, text): (usize, &str)| -> Result<usize, SpecError> {
            match text.split_once(' ') {
                Some((t, n)) if t == tag => {
                    n.trim().parse().map_err(|_| fail(line, format!("bad {tag} count {n:?}")))
                }
                _ => Err(fail(line, format!("expected \"{tag} <count>\", got {text:?}"))),
            }
        };

        let n_sites = section_len("sites", next("sites header")?)?;
        let mut sites = Vec::with_capacity(n_sites);
        for expected in 0..n_sites {
            let (line, text) = next("site row")?;
            let (index, label) = text
                .split_once(' ')
                .ok_or_else(|| fail(line, format!("expected \"<index> <site>\", got {text:?}")))?;
            if index.parse::<usize>().ok() != Some(expected) {
                return Err(fail(line, format!("site index must be {expected}, got {index:?}")));
            }
            sites.push(label.parse::<SiteId>().map_err(|e| fail(line, e.to_string()))?);
        }

        let n_connectors = section_len("connectors", next("connectors header")?)?;
        let mut connectors = Vec::with_capacity(n_connectors);
        for expected in 0..n_connectors {
            let (line, text) = next("connector row")?;
            let mut fields = text.split_whitespace();
            let parsed = (|| {
                let id: usize = fields.next()?.parse().ok()?;
                let a: VertexId = fields.next()?.parse().ok()?;
                let b: VertexId = fields.next()?.parse().ok()?;
                (id == expected && fields.next().is_none()).then_some((a, b))
            })();
            match parsed {
                Some(pair) => connectors.push(pair),
                None => return Err(fail(line, format!("expected \"{expected} <vertex> <vertex>\", got {text:?}"))),
            }
        }

        let n_faults = section_len("faults", next("faults header")?)?;
        let mut faulty = BTreeSet::new();
        for _ in 0..n_faults {
            let (line, text) = next("fault row")?;
            faulty.insert(text.trim().parse::<VertexId>().map_err(|e| fail(line, e.to_string()))?);
        }

        let n_couplings = section_len("couplings", next("couplings header")?)?;
        let mut couplings = Vec::with_capacity(n_couplings);
        for _ in 0..n_couplings {
            let (line, text) = next("coupling row")?;
            let mut fields = text.split_whitespace();
            let parsed = (|| {
                let a: usize = fields.next()?.parse().ok()?;
                let b: usize = fields.next()?.parse().ok()?;
                let w: f64 = fields.next()?.parse().ok()?;
                fields.next().is_none().then_some((a, b, w))
            })();
            match parsed {
                Some(triple) => couplings.push(triple),
                None => return Err(fail(line, format!("expected \"<i> <j> <weight>\", got {text:?}"))),
            }
        }
        if let Some((line, text)) = lines.next() {
            if !text.trim().is_empty() {
                return Err(fail(line + 1, format!("trailing content {text:?}")));
            }
        }

        let mut graph = Self::from_site_table(sites, connectors, faulty);
        graph.couplings = couplings;
        Ok(graph)
    }
}
