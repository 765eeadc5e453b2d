use serde::{Deserialize, Serialize};

use incoherence::basis::BasisConfig;
use incoherence::coherence::{DecayModel, WaveletKind};
use incoherence::ordering::OrderingSpec;
use incoherence::wavelet::build_family;
use incoherence::{Error, Result};

pub const SCHEMA: u32 = 1;

pub fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA {
        return Err(Error::InvalidConfig(format!("schema {schema} (expected {SCHEMA})")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    /// `haar`, `db1` … `db10`, or `legendre`.
    pub family: String,
    #[serde(default)]
    pub j0: u32,
    #[serde(default)]
    pub eps: Option<f64>,
}

pub enum Basis {
    Wavelet(BasisConfig),
    Legendre { eps: f64 },
}

impl BasisSpec {
    pub fn resolve(&self, d: usize) -> Result<Basis> {
        let f = self.family.to_ascii_lowercase();
        if f == "legendre" {
            return Ok(Basis::Legendre { eps: self.eps.unwrap_or(0.45) });
        }
        let p = if f == "haar" {
            1
        } else if let Some(rest) = f.strip_prefix("db") {
            rest.parse().map_err(|_| Error::UnsupportedFamily(self.family.clone()))?
        } else {
            return Err(Error::UnsupportedFamily(self.family.clone()));
        };
        let fam = build_family(p)?;
        let cfg = match self.eps {
            Some(eps) => BasisConfig::new(d, fam, self.j0, eps)?,
            None => BasisConfig::with_default_eps(d, fam, self.j0)?,
        };
        Ok(Basis::Wavelet(cfg))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSide {
    /// `μ(π_N U)` along an ordering of frequencies.
    #[default]
    Fourier,
    /// `μ(U π_N)` along an ordering of the reconstruction basis.
    Basis,
}

fn separable() -> WaveletKind {
    WaveletKind::Separable
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub decay: DecayModel,
    #[serde(default)]
    pub window: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub schema: u32,
    pub dimension: usize,
    pub basis: BasisSpec,
    #[serde(default = "separable")]
    pub kind: WaveletKind,
    #[serde(default)]
    pub profile: ProfileSide,
    /// Frequency ordering for the Fourier side; the basis side of a wavelet
    /// basis uses the leveled or tensor-hyperbolic ordering implied by `kind`.
    #[serde(default)]
    pub ordering: Option<OrderingSpec>,
    pub horizon: usize,
    /// Also export the coherence over the box `‖n‖_∞ ≤ extent`.
    #[serde(default)]
    pub extent: Option<usize>,
    #[serde(default)]
    pub fit: Option<FitSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    pub schema: u32,
    pub dimension: usize,
    pub ordering: OrderingSpec,
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingConfig {
    pub schema: u32,
    pub dimension: usize,
    pub ordering: OrderingSpec,
    pub length: usize,
    /// Needed by the wavelet orderings.
    #[serde(default)]
    pub basis: Option<BasisSpec>,
}
