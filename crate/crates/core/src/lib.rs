//! Reference monitor core: formal model oracle, `.db`-file dialect, query
//! sandbox, wiring compiler and the ecosystem consistency graph.

pub mod graph;
pub mod lex;
pub mod model;
pub mod sandbox;
pub mod schema;
pub mod sql;
pub mod value;
pub mod wiring;
