//! Sound mixture-to-mixture editing.
//!
//! A mixture `x = Σ s_i` is edited into `y = Σ α_i s_i`, where every source
//! receives one of four actions (remove, keep, volume up, volume down). The
//! crate covers the symbolic side (instructions, the 16-task taxonomy,
//! prompt templating and parsing), the signal side (resampling, SNR-controlled
//! mixing, STFT masks, a FiLM-conditioned mask network) and evaluation.

pub mod dataset;
pub mod dsp;
pub mod editor;
pub mod instruction;
pub mod metrics;
pub mod mixer;
pub mod prompt;
pub mod seed;
pub mod taskspace;

pub use instruction::{Action, ClassLabel, Instruction, Signature, StyleVector};
pub use taskspace::{Composition, Task};
