//! Backend for interactive mask annotation: serves images at integer zoom
//! levels, stores submitted masks with an audit trail, records timed click
//! trails and exports finished annotations as a masked dataset.

pub mod http;
pub mod store;

pub use http::{router, serve};
pub use store::{AnnotateError, Click, ImageStatus, SessionStore, Tool};
