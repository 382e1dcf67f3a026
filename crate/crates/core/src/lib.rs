//! Hierarchical clustering driven by a noisy triplet splitting oracle.
//!
//! The crate builds partial hierarchical clustering trees from oracle answers
//! (strongly or weakly consistent with a reference tree), completes them into
//! full trees for the Dasgupta and Moseley-Wang objectives, and ships the
//! brute-force and checker machinery used to validate every construction at
//! small scale.
//!
//! ```
//! use hcsplit_core::graph::{generate_planted, Profile};
//! use hcsplit_core::oracle::{OracleConfig, SplittingOracle};
//! use hcsplit_core::partial::{build_strong_partial, SplitParams};
//! use hcsplit_core::hctree::check_strong_consistency;
//!
//! let inst = generate_planted(64, 7, &Profile::default()).unwrap();
//! let oracle = SplittingOracle::new(&inst.tree, OracleConfig::perfect(7)).unwrap();
//! let mut params = SplitParams::desk(64);
//! params.exact_counters = true;
//! let (partial, _trace) = build_strong_partial(&inst.tree.vertices(), &oracle, &params).unwrap();
//! assert!(check_strong_consistency(&partial, &inst.tree).is_consistent());
//! ```

pub mod error;
pub mod graph;
pub mod hctree;
pub mod io;
pub mod objectives;
pub mod oracle;
pub mod partial;
pub mod pipeline;
pub mod sparsest;

mod util;

pub use error::{Error, Result};
pub use graph::{Graph, PlantedInstance};
pub use hctree::{HCTree, PartialHCTree};
pub use oracle::{Adversary, OracleConfig, SplittingOracle};
pub use partial::SplitParams;
