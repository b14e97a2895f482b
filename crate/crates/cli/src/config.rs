//! TOML configuration document and its resolution into core types.
//!
//! One self-describing document covers all subcommands; every section is
//! optional and falls back to the defaults below. Command-line flags
//! (--method, --alpha, --c, --grid, --seed) override the document.

use betcs::betting::{Atom, BetaComponent};
use betcs::predictives::{BetaParams, GammaParams};
use betcs::sim::{MethodName, PriorRegime};
use betcs::TrueLaw;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub betting: BettingSection,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub prior: Option<PriorSection>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub lucb: LucbSection,
    #[serde(default)]
    pub ppi: PpiSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BettingSection {
    pub alpha: f64,
    pub c: f64,
    pub grid: usize,
}

impl Default for BettingSection {
    fn default() -> Self {
        BettingSection {
            alpha: 0.1,
            c: 0.95,
            grid: 500,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodSection {
    pub name: String,
    pub kappa: f64,
    /// Regularizer weight for retel (betel is fixed at 0).
    pub tau: f64,
    pub g_etel: usize,
    pub rho_grid: usize,
    pub nu_grid: usize,
}

impl Default for MethodSection {
    fn default() -> Self {
        MethodSection {
            name: "empirical".to_string(),
            kappa: 50.0,
            tau: 1.0,
            g_etel: 1000,
            rho_grid: 40,
            nu_grid: 25,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Beta shapes for the working-model mean rho.
    pub rho: [f64; 2],
    /// Gamma (shape, rate) for the concentration nu.
    pub nu: [f64; 2],
    /// Beta shapes for the mean prior of betel/retel; defaults to `rho`.
    pub mu: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub law: Option<String>,
    pub prior_regime: Option<String>,
    pub horizon: Option<usize>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub tracked_mus: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LucbSection {
    pub m: usize,
    pub epsilon: f64,
    pub max_pulls: u64,
    pub union_bound: bool,
    #[serde(default)]
    pub arms: Vec<String>,
    pub replay: Option<String>,
    pub prior_regime: Option<String>,
}

impl Default for LucbSection {
    fn default() -> Self {
        LucbSection {
            m: 1,
            epsilon: 0.1,
            max_pulls: 100_000,
            union_bound: false,
            arms: Vec::new(),
            replay: None,
            prior_regime: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpiSection {
    pub n0: u64,
    pub bounds: [f64; 2],
    pub null_threshold: f64,
    pub classical: bool,
    pub labeled: Option<String>,
    pub unlabeled: Option<String>,
}

impl Default for PpiSection {
    fn default() -> Self {
        PpiSection {
            n0: 1000,
            bounds: [-1.0, 1.0],
            null_threshold: 0.0,
            classical: false,
            labeled: None,
            unlabeled: None,
        }
    }
}

impl PriorSection {
    pub fn to_spec(&self) -> betcs::sim::PriorSpec {
        let rho = BetaParams {
            a: self.rho[0],
            b: self.rho[1],
        };
        let mu = self.mu.map_or(rho, |m| BetaParams { a: m[0], b: m[1] });
        betcs::sim::PriorSpec {
            rho,
            nu: GammaParams {
                shape: self.nu[0],
                rate: self.nu[1],
            },
            mu,
        }
    }
}

/// Parses a law expression: `bernoulli(p)`, `beta(a,b)`,
/// `beta_mix(w:a:b, ...)`, or `atoms(x:w, ...)`.
pub fn parse_law(s: &str) -> Result<TrueLaw, String> {
    let s = s.trim();
    let (name, rest) = s
        .split_once('(')
        .ok_or_else(|| format!("law `{s}`: expected name(args)"))?;
    let args = rest
        .strip_suffix(')')
        .ok_or_else(|| format!("law `{s}`: missing closing parenthesis"))?;
    let nums = |part: &str| -> Result<Vec<f64>, String> {
        part.split(':')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("law `{s}`: bad number `{f}`"))
            })
            .collect()
    };
    let law = match name.trim() {
        "bernoulli" => TrueLaw::Bernoulli(
            args.trim()
                .parse()
                .map_err(|_| format!("law `{s}`: bad probability"))?,
        ),
        "beta" => {
            let parts: Vec<f64> = args
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("law `{s}`: bad shape `{f}`"))
                })
                .collect::<Result<_, _>>()?;
            if parts.len() != 2 {
                return Err(format!("law `{s}`: beta takes two shapes"));
            }
            TrueLaw::Beta {
                a: parts[0],
                b: parts[1],
            }
        }
        "beta_mix" => {
            let mut comps = Vec::new();
            for part in args.split(',') {
                let v = nums(part)?;
                if v.len() != 3 {
                    return Err(format!("law `{s}`: components are weight:a:b"));
                }
                comps.push(BetaComponent {
                    w: v[0],
                    a: v[1],
                    b: v[2],
                });
            }
            TrueLaw::BetaMixture(comps)
        }
        "atoms" => {
            let mut atoms = Vec::new();
            for part in args.split(',') {
                let v = nums(part)?;
                if v.len() != 2 {
                    return Err(format!("law `{s}`: atoms are x:weight"));
                }
                atoms.push(Atom { x: v[0], w: v[1] });
            }
            TrueLaw::FiniteAtoms(atoms)
        }
        other => {
            return Err(format!(
                "unknown law `{other}`; expected bernoulli, beta, beta_mix or atoms"
            ))
        }
    };
    law.validate().map_err(|e| e.to_string())?;
    Ok(law)
}

pub fn parse_method(s: &str) -> Result<MethodName, String> {
    MethodName::parse(s).ok_or_else(|| {
        let valid: Vec<&str> = MethodName::ALL.iter().map(|m| m.as_str()).collect();
        format!("unknown method `{s}`; valid methods: {}", valid.join(", "))
    })
}

pub fn parse_regime(s: &str) -> Result<PriorRegime, String> {
    PriorRegime::parse(s).ok_or_else(|| {
        format!("unknown prior regime `{s}`; valid: informative, noninformative, misspecified, custom")
    })
}
