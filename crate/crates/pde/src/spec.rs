//! Equation identifiers, constants and default solver settings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use fern_core::{FernError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PdeKind {
    AllenCahn,
    CahnHilliard,
    FokkerPlanck,
    AggregationDiffusion,
    KellerSegel,
    Kdv,
    Burgers,
}

impl PdeKind {
    pub const ALL: [PdeKind; 7] = [
        PdeKind::AllenCahn,
        PdeKind::CahnHilliard,
        PdeKind::FokkerPlanck,
        PdeKind::AggregationDiffusion,
        PdeKind::KellerSegel,
        PdeKind::Kdv,
        PdeKind::Burgers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PdeKind::AllenCahn => "allen_cahn",
            PdeKind::CahnHilliard => "cahn_hilliard",
            PdeKind::FokkerPlanck => "fokker_planck",
            PdeKind::AggregationDiffusion => "aggregation_diffusion",
            PdeKind::KellerSegel => "keller_segel",
            PdeKind::Kdv => "kdv",
            PdeKind::Burgers => "burgers",
        }
    }

    pub fn domain(self) -> [f64; 2] {
        match self {
            PdeKind::AggregationDiffusion => [-6.0, 6.0],
            PdeKind::Kdv => [0.0, 2.0],
            _ => [0.0, 1.0],
        }
    }

    pub fn t_final(self) -> f64 {
        match self {
            PdeKind::AllenCahn | PdeKind::CahnHilliard => 10.0,
            PdeKind::FokkerPlanck => 0.1,
            PdeKind::AggregationDiffusion => 200.0,
            PdeKind::KellerSegel | PdeKind::Burgers => 1.0,
            PdeKind::Kdv => 2.0,
        }
    }

    /// Accepted numbers of free initial-condition parameters.
    pub fn allowed_dofs(self) -> &'static [usize] {
        match self {
            PdeKind::AllenCahn | PdeKind::CahnHilliard => &[1, 2],
            PdeKind::FokkerPlanck | PdeKind::Burgers => &[2],
            _ => &[1],
        }
    }

    pub fn default_dofs(self) -> usize {
        self.allowed_dofs()[0]
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, PdeKind::Kdv | PdeKind::Burgers)
    }

    /// Equations written in divergence form (mass is conserved).
    pub fn is_conservative(self) -> bool {
        !matches!(self, PdeKind::AllenCahn)
    }

    pub fn default_constants(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            PdeKind::AllenCahn => &[("epsilon", 0.01)],
            PdeKind::CahnHilliard => &[("mobility", 0.01), ("epsilon", 0.01), ("stabilization", 2.0)],
            PdeKind::FokkerPlanck => &[("diffusion", 1.0)],
            PdeKind::AggregationDiffusion => &[("D", 0.4), ("m", 2.0), ("sigma", 1.0), ("x0", 2.0)],
            PdeKind::KellerSegel => &[("D", 0.01), ("chi", 5.0)],
            PdeKind::Kdv => &[("epsilon", 0.01), ("c2", 0.5), ("k1", 8.0), ("k2", 8.0), ("x1", 0.5), ("x2", 1.0)],
            PdeKind::Burgers => &[("nu", 0.01)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    pub fn default_settings(self) -> SolverSettings {
        let dt = match self {
            PdeKind::AllenCahn => 1e-3,
            PdeKind::CahnHilliard => 1e-4,
            PdeKind::FokkerPlanck => 1e-4,
            PdeKind::AggregationDiffusion => 2e-2,
            PdeKind::KellerSegel => 5e-4,
            PdeKind::Kdv | PdeKind::Burgers => 1e-4,
        };
        let cells = if self == PdeKind::KellerSegel { 512 } else { 256 };
        SolverSettings { cells, dt }
    }

    pub fn scheme(self) -> &'static str {
        match self {
            PdeKind::AllenCahn => "cosine-spectral semi-implicit euler",
            PdeKind::CahnHilliard => "cosine-spectral stabilized semi-implicit euler",
            PdeKind::FokkerPlanck => "finite-volume scharfetter-gummel ssp-rk2",
            PdeKind::AggregationDiffusion => "finite-volume gradient-flow upwind, implicit diffusion",
            PdeKind::KellerSegel => "cosine pseudo-spectral integrating-factor rk4, 2/3 dealiasing",
            PdeKind::Kdv | PdeKind::Burgers => "fourier pseudo-spectral integrating-factor rk4, 2/3 dealiasing",
        }
    }
}

impl fmt::Display for PdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PdeKind {
    type Err = FernError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match key.as_str() {
            "allen_cahn" | "ac" => PdeKind::AllenCahn,
            "cahn_hilliard" | "ch" => PdeKind::CahnHilliard,
            "fokker_planck" | "fp" => PdeKind::FokkerPlanck,
            "aggregation_diffusion" | "ad" => PdeKind::AggregationDiffusion,
            "keller_segel" | "ks" => PdeKind::KellerSegel,
            "kdv" => PdeKind::Kdv,
            "burgers" => PdeKind::Burgers,
            _ => return Err(FernError::domain(format!("unknown pde `{s}`"))),
        };
        Ok(kind)
    }
}

/// Spatial resolution and time step of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub cells: usize,
    /// Time step; CFL-limited schemes treat it as an upper bound.
    pub dt: f64,
}

impl SolverSettings {
    pub fn refined(self) -> Self {
        Self { cells: 2 * self.cells, dt: 0.5 * self.dt }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSpec {
    pub kind: PdeKind,
    pub domain: [f64; 2],
    pub t_final: f64,
    pub constants: BTreeMap<String, f64>,
}

impl PdeSpec {
    pub fn new(kind: PdeKind) -> Self {
        Self { kind, domain: kind.domain(), t_final: kind.t_final(), constants: kind.default_constants() }
    }

    pub fn with_t_final(mut self, t: f64) -> Self {
        self.t_final = t;
        self
    }

    /// Overrides one constant; unknown names are rejected.
    pub fn with_constant(mut self, name: &str, value: f64) -> Result<Self> {
        match self.constants.get_mut(name) {
            Some(v) => *v = value,
            None => return Err(FernError::domain(format!("{} has no constant `{name}`", self.kind))),
        }
        Ok(self)
    }

    pub fn constant(&self, name: &str) -> f64 {
        self.constants[name]
    }

    pub fn length(&self) -> f64 {
        self.domain[1] - self.domain[0]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.domain[1] > self.domain[0]) || !(self.t_final >= 0.0) {
            return Err(FernError::domain("invalid domain or final time"));
        }
        if self.constants.values().any(|v| !v.is_finite()) {
            return Err(FernError::domain("non-finite constant"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PdeKind::ALL {
            assert_eq!(k.name().parse::<PdeKind>().unwrap(), k);
        }
        assert_eq!("Allen-Cahn".parse::<PdeKind>().unwrap(), PdeKind::AllenCahn);
        assert!("heat".parse::<PdeKind>().is_err());
    }

    #[test]
    fn stated_constants() {
        let ad = PdeSpec::new(PdeKind::AggregationDiffusion);
        assert_eq!((ad.constant("D"), ad.constant("m"), ad.constant("sigma")), (0.4, 2.0, 1.0));
        let ks = PdeSpec::new(PdeKind::KellerSegel);
        assert_eq!((ks.constant("D"), ks.constant("chi")), (0.01, 5.0));
        assert_eq!(PdeSpec::new(PdeKind::CahnHilliard).constant("mobility"), 0.01);
        assert!(PdeSpec::new(PdeKind::Burgers).with_constant("chi", 1.0).is_err());
    }
}
