//! Shortest-path-distance structural encoding and its bucket scheme.
//!
//! A pair (v, u) is encoded by its hop distance, clamped into a finite code
//! table: codes `0..=d_max` are exact distances, `d_max + 1` means "finite
//! but longer than d_max", and `d_max + 2` means unreachable. The
//! unreachable code is separate from the overflow code so disconnected
//! pairs never alias long finite paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SpdTable};

/// Bucketing parameters: the anchor hop bound `k` and the largest exactly
/// represented distance `d_max`.
///
/// `d_max >= k + 1` is enforced so the code table keeps the boundary
/// between "inside the k-hop ball" and "anchor beyond it" — collapsing
/// those would lose anchor-distinguishability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingConfig {
    k: u32,
    d_max: u32,
}

impl EncodingConfig {
    pub const DEFAULT_D_MAX: u32 = 8;

    pub fn new(k: u32, d_max: u32) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if d_max < k + 1 {
            return Err(Error::InvalidConfig(format!(
                "d_max = {d_max} must be >= k + 1 = {}",
                k + 1
            )));
        }
        Ok(EncodingConfig { k, d_max })
    }

    /// Default table: `d_max = max(8, k + 1)`.
    pub fn for_k(k: u32) -> Result<Self> {
        EncodingConfig::new(k, Self::DEFAULT_D_MAX.max(k + 1))
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    /// Number of distinct codes: exact distances, overflow, unreachable.
    pub fn bucket_count(&self) -> usize {
        self.d_max as usize + 3
    }

    /// Code for "finite but > d_max".
    pub fn beyond_code(&self) -> u16 {
        (self.d_max + 1) as u16
    }

    /// Code for "no path".
    pub fn unreachable_code(&self) -> u16 {
        (self.d_max + 2) as u16
    }

    /// Bucket a raw distance (`None` = unreachable).
    pub fn bucket_for(&self, dist: Option<u32>) -> SpdBucket {
        match dist {
            None => SpdBucket(self.unreachable_code()),
            Some(d) if d > self.d_max => SpdBucket(self.beyond_code()),
            Some(d) => SpdBucket(d as u16),
        }
    }
}

/// One code from the SPD bucket table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpdBucket(pub u16);

impl SpdBucket {
    pub fn code(&self) -> usize {
        self.0 as usize
    }
}

/// Bucketed SPD code for the pair `(spd.source(), u)`.
///
/// Symmetric in its endpoints because hop distance is. The table must be
/// uncapped, or capped deep enough that a missing entry genuinely means
/// unreachable; otherwise the overflow and unreachable codes would mix.
pub fn encode_pair(spd: &SpdTable, u: NodeId, cfg: &EncodingConfig) -> SpdBucket {
    let dist = spd.distance(u);
    assert!(
        dist.is_some() || spd.cap().is_none(),
        "capped SPD table cannot decide unreachable vs beyond-cap for node {u}"
    );
    cfg.bucket_for(dist)
}

/// The encoding families the distinguishability predicates are defined over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingScheme {
    /// Bucketed shortest-path distance with the given exact-code bound.
    Spd { d_max: u32 },
    /// Maps every pair to one code. Useful only as a negative example.
    Constant,
}

impl EncodingScheme {
    /// Whether a decision function over codes recovers adjacency exactly.
    /// For SPD bucketing that function is `code == 1`, available whenever
    /// distance 1 has its own code.
    pub fn is_neighbor_distinguishable(&self) -> bool {
        match *self {
            EncodingScheme::Spd { d_max } => d_max >= 1,
            EncodingScheme::Constant => false,
        }
    }

    /// Whether codes separate "anchor outside the k-hop ball" from every
    /// other receptive-field pair. SPD needs `d_max >= k + 1`, otherwise
    /// bucketing collapses distance k with distance k + 1.
    pub fn is_anchor_distinguishable(&self, k: u32) -> bool {
        match *self {
            EncodingScheme::Spd { d_max } => d_max >= k + 1,
            EncodingScheme::Constant => false,
        }
    }
}

/// Learnable scalar bias per SPD code per attention head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    heads: usize,
    d_max: u32,
    biases: Vec<Vec<f64>>,
}

impl BiasTable {
    pub fn zeros(heads: usize, cfg: &EncodingConfig) -> Self {
        BiasTable {
            heads,
            d_max: cfg.d_max(),
            biases: vec![vec![0.0; cfg.bucket_count()]; heads],
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn bucket_count(&self) -> usize {
        self.d_max as usize + 3
    }

    pub fn get(&self, head: usize, code: usize) -> f64 {
        self.biases[head][code]
    }

    pub fn set(&mut self, head: usize, code: usize, value: f64) {
        self.biases[head][code] = value;
    }

    pub fn row(&self, head: usize) -> &[f64] {
        &self.biases[head]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bias table serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let table: BiasTable = serde_json::from_str(json)?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.biases.len() != self.heads {
            return Err(Error::ShapeMismatch(format!(
                "bias table has {} rows for {} heads",
                self.biases.len(),
                self.heads
            )));
        }
        for row in &self.biases {
            if row.len() != self.bucket_count() {
                return Err(Error::ShapeMismatch(format!(
                    "bias row has {} entries, expected {}",
                    row.len(),
                    self.bucket_count()
                )));
            }
            if row.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("bias table"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_spd, Graph};

    fn p5() -> Graph {
        Graph::from_edge_list(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5).unwrap()
    }

    #[test]
    fn config_floor_enforced() {
        assert!(EncodingConfig::new(2, 2).is_err());
        assert!(EncodingConfig::new(2, 3).is_ok());
        assert_eq!(EncodingConfig::for_k(2).unwrap().d_max(), 8);
        assert_eq!(EncodingConfig::for_k(9).unwrap().d_max(), 10);
    }

    #[test]
    fn bucket_examples() {
        let g = p5();
        let cfg4 = EncodingConfig::new(1, 4).unwrap();
        let spd0 = bfs_spd(&g, 0, None).unwrap();
        assert_eq!(encode_pair(&spd0, 1, &cfg4).code(), 1);

        let cfg3 = EncodingConfig::new(1, 3).unwrap();
        assert_eq!(encode_pair(&spd0, 4, &cfg3).code(), 4); // finite but > d_max

        let disjoint = Graph::from_edge_list(&[(0, 1), (2, 3)], 4).unwrap();
        let spd = bfs_spd(&disjoint, 0, None).unwrap();
        assert_eq!(
            encode_pair(&spd, 2, &cfg3).code(),
            cfg3.unreachable_code() as usize
        );
    }

    #[test]
    fn bucket_symmetry_on_path() {
        let g = p5();
        let cfg = EncodingConfig::for_k(2).unwrap();
        for v in g.nodes() {
            let sv = bfs_spd(&g, v, None).unwrap();
            for u in g.nodes() {
                let su = bfs_spd(&g, u, None).unwrap();
                assert_eq!(encode_pair(&sv, u, &cfg), encode_pair(&su, v, &cfg));
            }
        }
    }

    #[test]
    fn scheme_predicates() {
        assert!(EncodingScheme::Spd { d_max: 4 }.is_neighbor_distinguishable());
        assert!(EncodingScheme::Spd { d_max: 1 }.is_neighbor_distinguishable());
        assert!(!EncodingScheme::Constant.is_neighbor_distinguishable());

        assert!(EncodingScheme::Spd { d_max: 4 }.is_anchor_distinguishable(2));
        assert!(!EncodingScheme::Spd { d_max: 1 }.is_anchor_distinguishable(2));
        assert!(!EncodingScheme::Constant.is_anchor_distinguishable(2));
    }

    #[test]
    fn shallow_table_collapses_k_boundary() {
        // P4 with an anchor at distance 3 and a non-anchor at distance 2
        // from node 0: with d_max = 1 both pairs land in the overflow code.
        let p4 = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 3)], 4).unwrap();
        let spd = bfs_spd(&p4, 0, None).unwrap();
        let cfg = EncodingConfig { k: 2, d_max: 1 }; // bypasses the floor on purpose
        assert_eq!(encode_pair(&spd, 2, &cfg), encode_pair(&spd, 3, &cfg));
    }

    #[test]
    fn bias_table_json() {
        let cfg = EncodingConfig::for_k(2).unwrap();
        let mut t = BiasTable::zeros(2, &cfg);
        t.set(1, 3, -0.5);
        let back = BiasTable::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        assert!(BiasTable::from_json("{\"heads\":1,\"d_max\":8,\"biases\":[[1.0]]}").is_err());
    }
}
