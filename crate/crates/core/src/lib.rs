pub mod checklist;
pub mod error;
pub mod ledger;
pub mod report;
pub mod ring;
pub mod scene;
pub mod search;
pub mod sheaf;
pub mod stability;

pub use error::{Error, Result};
