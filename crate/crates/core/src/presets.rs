//! Named `f64` models used by the CLI and the test suites, and the serde form
//! of an inline model.

use serde::{Deserialize, Serialize};

use crate::error::{GouError, Result};
use crate::jump_law::{Atom1, JumpLaw2, Marginal};
use crate::levy_model::{GaussianCov, LevyModel2};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub model: LevyModel2<f64>,
    /// Step used when the model has a Gaussian part.
    pub grid_dt: f64,
}

pub const PRESET_NAMES: [&str; 6] = [
    "zero",
    "drift-ou",
    "cramer-paulsen",
    "dufresne",
    "degenerate-k",
    "nonmonotone",
];

/// Inline model description, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub drift: [f64; 2],
    #[serde(default = "GaussianCov::zero")]
    pub cov: GaussianCov<f64>,
    #[serde(default)]
    pub jump_intensity: f64,
    #[serde(default)]
    pub jump_law: Option<JumpLaw2<f64>>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<LevyModel2<f64>> {
        let law = match (&self.jump_law, self.jump_intensity > 0.0) {
            (Some(law), _) => law.clone(),
            (None, false) => JumpLaw2::none(),
            (None, true) => {
                return Err(GouError::InvalidModel("positive jump intensity needs a jump law".into()));
            }
        };
        LevyModel2::new(self.drift, self.cov.clone(), self.jump_intensity, law)
    }
}

fn atoms(values: &[(f64, f64)]) -> Marginal<f64> {
    Marginal::Atoms {
        atoms: values.iter().map(|&(value, p)| Atom1 { value, p }).collect(),
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let (summary, model, grid_dt) = match name {
        "zero" => ("U = L = 0; V stays at its start", LevyModel2::zero(), 1e-2),
        "drift-ou" => (
            "mean-reverting drift, jumps of U of size 1/2 with exponential jumps of L",
            LevyModel2::new(
                [-2.0, 0.2],
                GaussianCov::zero(),
                2.0,
                JumpLaw2::Independent {
                    du: atoms(&[(0.5, 1.0)]),
                    dl: Marginal::Exponential {
                        mean: 0.5,
                        negative: false,
                    },
                },
            )?,
            1e-2,
        ),
        "cramer-paulsen" => (
            "risk process with interest and volatile returns, exponential claims",
            LevyModel2::new(
                [1.0, 1.0],
                GaussianCov {
                    uu: 0.04,
                    ul: 0.0,
                    ll: 0.0,
                },
                1.0,
                JumpLaw2::Independent {
                    du: atoms(&[(0.0, 1.0)]),
                    dl: Marginal::Exponential {
                        mean: 0.8,
                        negative: true,
                    },
                },
            )?,
            1e-3,
        ),
        "dufresne" => (
            "geometric Brownian exponential with unit drift of L; stationary law 1/Gamma(3, 1)",
            LevyModel2::new(
                [-2.0, 1.0],
                GaussianCov {
                    uu: 2.0,
                    ul: 0.0,
                    ll: 0.0,
                },
                0.0,
                JumpLaw2::none(),
            )?,
            1e-3,
        ),
        "degenerate-k" => (
            "jumps on the line l = -2u; V started at 2 never moves",
            LevyModel2::new(
                [0.5, -1.0],
                GaussianCov::zero(),
                1.5,
                JumpLaw2::point_mass(vec![(0.5, -1.0, 0.5), (-0.4, 0.8, 0.3), (1.5, -3.0, 0.2)]),
            )?,
            1e-2,
        ),
        "nonmonotone" => (
            "jumps of U below -1 make x -> P(V_t^x >= y) non-monotone",
            LevyModel2::new(
                [0.0, 0.1],
                GaussianCov::zero(),
                2.0,
                JumpLaw2::point_mass(vec![(-2.0, 0.0, 0.6), (0.5, 0.3, 0.4)]),
            )?,
            1e-2,
        ),
        other => {
            return Err(GouError::InvalidArgument(format!(
                "unknown preset `{other}`; known presets: {}",
                PRESET_NAMES.join(", ")
            )));
        }
    };
    Ok(Preset {
        name: PRESET_NAMES.iter().find(|n| **n == name).copied().unwrap_or("zero"),
        summary,
        model,
        grid_dt,
    })
}

/// Law of `∫_0^∞ E(U)_s ds` for the `dufresne` preset: `1 / Gamma(3, 1)`.
pub fn dufresne_cdf(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let w = 1.0 / v;
    (-w).exp() * (1.0 + w + 0.5 * w * w)
}
