//! Parametric initial conditions and their samplers.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use fern_core::{FernError, Result};
use rand::Rng;

use crate::spec::{PdeKind, PdeSpec};

/// One member of a PDE's initial-condition family.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub kind: PdeKind,
    /// Free parameters only; fixed ones come from `constants`.
    pub params: BTreeMap<String, f64>,
    constants: BTreeMap<String, f64>,
    length: f64,
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

impl InitialCondition {
    /// Builds an IC from explicit free parameters (missing ones are errors).
    pub fn new(spec: &PdeSpec, dofs: usize, params: BTreeMap<String, f64>) -> Result<Self> {
        check_dofs(spec.kind, dofs)?;
        for name in free_names(spec.kind, dofs) {
            if !params.get(*name).is_some_and(|v| v.is_finite()) {
                return Err(FernError::domain(format!("missing initial-condition parameter `{name}`")));
            }
        }
        Ok(Self { kind: spec.kind, params, constants: spec.constants.clone(), length: spec.length() })
    }

    fn p(&self, name: &str) -> f64 {
        self.params.get(name).or_else(|| self.constants.get(name)).copied().unwrap_or(f64::NAN)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            PdeKind::AllenCahn | PdeKind::CahnHilliard => {
                let lambda = self.p("lambda");
                let mu = self.params.get("mu").copied().unwrap_or(0.5);
                lambda * (2.0 * PI * x).sin() + (1.0 - lambda) * (6.0 * PI * (x - 0.5 + mu)).sin()
            }
            PdeKind::FokkerPlanck => {
                let (c0, c1) = (self.p("c0"), self.p("c1"));
                c1 * (-100.0 * (x - c0).powi(2)).exp() + 1e-3
            }
            PdeKind::AggregationDiffusion => {
                let (c0, x0) = (self.p("c0"), self.p("x0"));
                c0 / (2.0 * (2.0 * PI).sqrt()) * ((-(x - x0).powi(2) / 2.0).exp() + (-(x + x0).powi(2) / 2.0).exp())
            }
            PdeKind::KellerSegel => 1.0 + self.p("c0") * (2.0 * PI * (x - 0.25)).sin(),
            PdeKind::Kdv => {
                // Summed over neighbouring periods so the profile is periodic.
                let [c1, c2, k1, k2, x1, x2] = ["c1", "c2", "k1", "k2", "x1", "x2"].map(|n| self.p(n));
                (-2..=2)
                    .map(|m| {
                        let s = m as f64 * self.length;
                        3.0 * c1 * sech2(k1 * (x - x1 - s)) + 3.0 * c2 * sech2(k2 * (x - x2 - s))
                    })
                    .sum()
            }
            PdeKind::Burgers => self.p("c1") * (2.0 * PI * (x - self.p("c0"))).sin() + 0.5,
        }
    }

    pub fn sample_on(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

fn check_dofs(kind: PdeKind, dofs: usize) -> Result<()> {
    if kind.allowed_dofs().contains(&dofs) {
        Ok(())
    } else {
        Err(FernError::domain(format!("{kind} supports dofs {:?}, got {dofs}", kind.allowed_dofs())))
    }
}

/// Free parameter names, in draw order.
pub fn free_names(kind: PdeKind, dofs: usize) -> &'static [&'static str] {
    match (kind, dofs) {
        (PdeKind::AllenCahn | PdeKind::CahnHilliard, 1) => &["lambda"],
        (PdeKind::AllenCahn | PdeKind::CahnHilliard, _) => &["lambda", "mu"],
        (PdeKind::FokkerPlanck | PdeKind::Burgers, _) => &["c0", "c1"],
        (PdeKind::AggregationDiffusion | PdeKind::KellerSegel, _) => &["c0"],
        (PdeKind::Kdv, _) => &["c1"],
    }
}

fn range(kind: PdeKind, name: &str) -> (f64, f64) {
    match (kind, name) {
        (PdeKind::FokkerPlanck, "c0") => (0.3, 0.7),
        (PdeKind::FokkerPlanck, "c1") => (1.0, 10.0),
        (PdeKind::AggregationDiffusion, "c0") => (1.0, 5.0),
        (PdeKind::KellerSegel, "c0") => (0.2, 0.8),
        (PdeKind::Burgers, "c0") => (0.0, 0.5),
        (PdeKind::Burgers, "c1") => (0.5, 1.0),
        _ => (0.0, 1.0),
    }
}

/// Draws the free parameters uniformly from their ranges.
pub fn sample_ic<R: Rng + ?Sized>(spec: &PdeSpec, dofs: usize, rng: &mut R) -> Result<InitialCondition> {
    check_dofs(spec.kind, dofs)?;
    let params = free_names(spec.kind, dofs)
        .iter()
        .map(|&name| {
            let (lo, hi) = range(spec.kind, name);
            (name.to_string(), rng.gen_range(lo..hi))
        })
        .collect();
    InitialCondition::new(spec, dofs, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fern_core::seeding::stream_rng;

    fn ic(kind: PdeKind, dofs: usize, params: &[(&str, f64)]) -> InitialCondition {
        let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        InitialCondition::new(&PdeSpec::new(kind), dofs, map).unwrap()
    }

    #[test]
    fn lambda_one_gives_a_single_sine() {
        let u = ic(PdeKind::AllenCahn, 1, &[("lambda", 1.0)]);
        for x in [0.0, 0.1, 0.37, 0.9] {
            assert!((u.eval(x) - (2.0 * PI * x).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_peak_and_sine_origin() {
        assert_eq!(ic(PdeKind::FokkerPlanck, 2, &[("c0", 0.5), ("c1", 1.0)]).eval(0.5), 1.0 + 1e-3);
        assert_eq!(ic(PdeKind::KellerSegel, 1, &[("c0", 0.2)]).eval(0.25), 1.0);
    }

    #[test]
    fn kdv_profile_is_periodic() {
        let u = ic(PdeKind::Kdv, 1, &[("c1", 0.7)]);
        assert!((u.eval(0.0) - u.eval(2.0)).abs() < 1e-12);
        assert!((u.eval(0.5) - 3.0 * 0.7 - 3.0 * 0.5 * sech2(4.0)).abs() < 1e-3);
    }

    #[test]
    fn draws_stay_in_range() {
        let spec = PdeSpec::new(PdeKind::Burgers);
        let mut rng = stream_rng(1, 0);
        for _ in 0..200 {
            let u = sample_ic(&spec, 2, &mut rng).unwrap();
            assert!((0.0..0.5).contains(&u.params["c0"]));
            assert!((0.5..1.0).contains(&u.params["c1"]));
        }
    }

    #[test]
    fn unsupported_dofs_are_rejected() {
        let mut rng = stream_rng(1, 0);
        assert!(sample_ic(&PdeSpec::new(PdeKind::AllenCahn), 3, &mut rng).is_err());
        assert!(sample_ic(&PdeSpec::new(PdeKind::KellerSegel), 2, &mut rng).is_err());
    }
}
