//! Dataset model, file format, preprocessing and batching.

mod batch;
mod format;
mod imdl;
mod preprocess;
mod record;
mod split;
mod synth;

pub use batch::{pad_to_longest, pad_truncate, PaddedBatch, DEFAULT_CAP};
pub use format::{load_dataset, parse_dataset, save_dataset, write_dataset, FORMAT_NAME, FORMAT_VERSION};
pub use imdl::{imdl_tokens, imdl_transform, imdl_tweet, ImdlStats, CUE_SUBSTRINGS};
pub use preprocess::{preprocess_tweet, strip_noise, tokenize, MIN_TOKENS};
pub use record::{Dataset, SplitTag, UserRecord};
pub use split::{split, split_counts};
pub use synth::{synth_generate, SynthConfig};
