//! Three embedded storage engines with deliberately different data models:
//!
//! * [`relational`] — tables of typed rows behind a small SQL dialect,
//!   hash-based `DISTINCT` and equi-joins.
//! * [`mod@array`] — dense n-dimensional float arrays behind a functional
//!   operator language, metadata `count` and tight-loop `multiply`.
//! * [`keyvalue`] — an ordered key → field-map store with prefix scans
//!   and term counting over text fields.
//!
//! Each engine is self-contained and safe for concurrent readers; loads
//! and stores take exclusive locks. None of them persist data across
//! process restarts.

pub mod array;
pub mod keyvalue;
pub mod relational;
pub mod value;

pub use array::{ArrayEngine, ArrayError, ArrayOutput, ArrayResult, DenseArray};
pub use keyvalue::{Document, KvEngine, KvError};
pub use relational::{RelOutput, Relation, RelationalEngine, RelationalError, Schema};
pub use value::{Value, ValueType};
