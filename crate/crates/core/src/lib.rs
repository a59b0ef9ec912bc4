pub mod bench;
pub mod cong3d;
pub mod congiden2d;
pub mod error;
pub mod exact;
pub mod field;
pub mod fingerprint;
pub mod gen;
pub mod geomhash;
pub mod moments;
pub mod oracle;
pub mod params;
pub mod ser;
pub mod stream;

pub use error::{Error, Result};
pub use params::Mode;
