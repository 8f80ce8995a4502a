//! Gibbs measures over the oscillator prior: the sharp-cutoff `μ_N`, the
//! smooth-cutoff `ρ_N` and the limit process `ρ`.

pub mod cutoff;
pub mod feynman_kac;
pub mod measure;
pub mod partition;
pub mod pcn;
pub mod rho_exact;

pub use cutoff::{build_chi, build_chi_subgrid, CutoffKind, CutoffProfile};
pub use feynman_kac::{feynman_kac_gap, mu_marginal_density, BoundedObservable, RadialCdf};
pub use measure::{MeasureKind, MeasureSpec, SamplerKind};
pub use partition::{estimate_partition, PartitionEstimate};
pub use pcn::{sample_gibbs_pcn, sample_gibbs_pcn_with, sample_gibbs_rejection, PcnConfig, Sampled};
pub use rho_exact::{sample_rho_exact, RhoSampler};
