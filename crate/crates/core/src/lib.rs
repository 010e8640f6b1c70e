//! Constraint satisfaction with sparse 0/1 factor tables.
//!
//! Clauses become factor tables. The solver alternates between loopy max-product
//! belief update over a cluster graph, which deletes table entries that cannot be
//! part of any solution, and merging of strongly related factors, until the cluster
//! graph is a tree and every remaining table is exact.
//!
//! ```
//! use purgemerge::codec::parse_sudoku;
//! use purgemerge::solver::{enumerate_solutions, purge_and_merge, SolverConfig};
//!
//! let puzzle = parse_sudoku("1...\n..3.\n.4..\n...2").unwrap();
//! let report = purge_and_merge(&puzzle, &SolverConfig::default()).unwrap();
//! let all = enumerate_solutions(&report, 100);
//! assert!(!all.solutions.is_empty());
//! ```

pub mod codec;
pub mod error;
pub mod factor;
pub mod graph;
pub mod inference;
pub mod merge;
pub mod oracle;
pub mod purge;
pub mod solver;

pub use error::{Error, Result};
pub use factor::{DomainTable, Evidence, SparseFactor, Value, ValueSet, VarId};
