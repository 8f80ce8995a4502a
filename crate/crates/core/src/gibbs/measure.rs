use num_complex::Complex64;

use super::cutoff::{CutoffKind, CutoffProfile};
use crate::error::{Error, Result};
use crate::field_sampler::OuPrior;
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    PriorQ,
    MuN,
    RhoN,
    RhoLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Exact rejection from prior draws, accepting with probability `e^{-Φ}`.
    Importance,
    PcnMcmc,
    TransferExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub cutoff: Option<CutoffProfile>,
    pub quartic_coefficient: f64,
    pub sampler: SamplerKind,
    pub prior: OuPrior,
}

pub const DEFAULT_QUARTIC: f64 = 0.5;

impl MeasureSpec {
    pub fn prior_q() -> Self {
        Self {
            kind: MeasureKind::PriorQ,
            cutoff: None,
            quartic_coefficient: DEFAULT_QUARTIC,
            sampler: SamplerKind::Importance,
            prior: OuPrior::default(),
        }
    }

    /// `μ_N`: sharp cutoff on `[-N, N]`.
    pub fn mu_n(radius: f64, grid: Grid1D) -> Result<Self> {
        Ok(Self {
            kind: MeasureKind::MuN,
            cutoff: Some(CutoffProfile::sharp(radius, grid)?),
            quartic_coefficient: DEFAULT_QUARTIC,
            sampler: SamplerKind::PcnMcmc,
            prior: OuPrior::default(),
        })
    }

    /// `ρ_N` with the given smooth profile.
    pub fn rho_n(chi: CutoffProfile) -> Result<Self> {
        let s = Self {
            kind: MeasureKind::RhoN,
            cutoff: Some(chi),
            quartic_coefficient: DEFAULT_QUARTIC,
            sampler: SamplerKind::PcnMcmc,
            prior: OuPrior::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn rho_limit() -> Self {
        Self {
            kind: MeasureKind::RhoLimit,
            cutoff: None,
            quartic_coefficient: DEFAULT_QUARTIC,
            sampler: SamplerKind::TransferExact,
            prior: OuPrior::default(),
        }
    }

    pub fn with_quartic(mut self, lambda: f64) -> Result<Self> {
        self.quartic_coefficient = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sampler(mut self, sampler: SamplerKind) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_prior(mut self, prior: OuPrior) -> Self {
        self.prior = prior;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quartic_coefficient > 0.0 && self.quartic_coefficient.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quartic coefficient must be positive, got {}",
                self.quartic_coefficient
            )));
        }
        let kind = self.cutoff.as_ref().map(|c| c.kind);
        let ok = match self.kind {
            MeasureKind::PriorQ | MeasureKind::RhoLimit => kind.is_none(),
            MeasureKind::MuN => kind == Some(CutoffKind::Sharp),
            MeasureKind::RhoN => kind == Some(CutoffKind::Smooth),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("{:?} cannot carry a {kind:?} cutoff", self.kind)));
        }
        Ok(())
    }

    pub fn is_cutoff_measure(&self) -> bool {
        matches!(self.kind, MeasureKind::MuN | MeasureKind::RhoN)
    }

    pub fn radius(&self) -> Option<f64> {
        self.cutoff.as_ref().map(|c| c.radius)
    }

    /// `Φ(u) = λ ∫ cutoff |u|^4`; zero for cutoff-free measures.
    pub fn potential(&self, u: &[Complex64]) -> f64 {
        match &self.cutoff {
            Some(c) => self.quartic_coefficient * c.quartic_integral(u),
            None => 0.0,
        }
    }

    /// Cutoff-measure precondition: the spec's cutoff lives on `grid` and the
    /// grid extends two correlation lengths past its support.
    pub(crate) fn check_grid(&self, grid: &Grid1D) -> Result<&CutoffProfile> {
        self.validate()?;
        let Some(cutoff) = self.cutoff.as_ref().filter(|_| self.is_cutoff_measure()) else {
            return Err(Error::InvalidArgument(format!("{:?} is not a cutoff measure", self.kind)));
        };
        if !cutoff.grid.same_as(grid) {
            return Err(Error::GridMismatch("cutoff profile was built on a different grid".into()));
        }
        let need = cutoff.support() + 2.0;
        if grid.x_min > -need || grid.x_max < need {
            return Err(Error::InvalidGrid(format!(
                "grid [{}, {}] must cover [-{need}, {need}] (support plus two correlation lengths)",
                grid.x_min, grid.x_max
            )));
        }
        Ok(cutoff)
    }
}
