pub mod chain;
pub mod ess;
pub mod geweke;
pub mod slice;

pub use chain::{coord_layout, hyper_coords, sample_params_prior, ChainState, HyperCoord, Priors, Sampler, SamplerConfig};
pub use ess::{ess_step, ess_step_with_aux, EssOutcome};
pub use slice::{slice_sample_1d, SliceConfig};
