//! File formats: WAV audio, `SGMEL1` log-mel tensors, CSV filter exports and
//! flat `key = value` run configurations.

mod config;
mod csv;
mod sgmel;
mod wav;

pub use self::config::RunConfig;
pub use self::csv::{read_filter_csv, write_filter_csv};
pub use self::sgmel::{decode_sgmel, encode_sgmel, read_sgmel, write_sgmel, SGMEL_MAGIC};
pub use self::wav::{read_wav, write_wav, WavEncoding};
