pub mod codec;
pub mod data;
pub mod error;
pub mod field;
pub mod hash;
pub mod mle;
pub mod ntt;
pub mod pcs;
pub mod protocol;
pub mod sumcheck;
pub mod super_oracle;
pub mod transcript;
pub mod valuation;
pub mod witness;

pub use error::{Error, Result};
pub use field::{Ext, Field, Fp};
