//! JSON input documents.
//!
//! Vectors are written either as a kernel `{"kind": "kernel", "s": 0.5}`
//! (`"kernel_deriv"` is accepted as a synonym) or through their derivative
//! `{"kind": "deriv", "deriv": [...]}`, where `"kind"` may be omitted.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::affine::{AffineSubspace, ConditionedLaw};
use crate::cm_space::{CmVector, Grid};
use crate::error::{Error, Result};
use crate::hermite_ito::ProductFunctional;
use crate::mc_oracle::Functional;

/// Parses `text` into `T`, reporting the failing field path and position.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        if matches!(path.as_str(), "" | "." | "?") {
            Error::Schema(inner.to_string())
        } else {
            Error::Schema(format!("field `{path}`: {inner}"))
        }
    })?;
    de.end().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpec {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub deriv: Option<Vec<f64>>,
}

impl VectorSpec {
    pub fn kernel(s: f64) -> Self {
        Self {
            kind: Some("kernel".into()),
            s: Some(s),
            deriv: None,
        }
    }

    pub fn from_deriv(deriv: Vec<f64>) -> Self {
        Self {
            kind: Some("deriv".into()),
            s: None,
            deriv: Some(deriv),
        }
    }

    /// Grid implied by a derivative array, if any.
    pub fn implied_steps(&self) -> Option<usize> {
        self.deriv.as_ref().map(Vec::len)
    }

    /// Materializes the vector on `grid`; derivative arrays on a coarser
    /// grid are refined.
    pub fn resolve(&self, grid: Grid) -> Result<CmVector> {
        let kind = self
            .kind
            .as_deref()
            .unwrap_or(if self.deriv.is_some() { "deriv" } else { "" });
        match kind {
            "kernel" | "kernel_deriv" => {
                let s = self
                    .s
                    .ok_or_else(|| Error::Schema(format!("`{kind}` vector needs a field `s`")))?;
                CmVector::kernel(s, grid)
            }
            "deriv" => {
                let deriv = self
                    .deriv
                    .clone()
                    .ok_or_else(|| Error::Schema("`deriv` vector needs a field `deriv`".into()))?;
                let own = Grid::new(deriv.len())?;
                CmVector::new(own, deriv)?.refine(grid)
            }
            "" => Err(Error::Schema(
                "vector needs a `kind` or a `deriv` array".into(),
            )),
            other => Err(Error::Schema(format!("unknown vector kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SubspaceSpec {
    pub grid: usize,
    pub constraints: Vec<VectorSpec>,
    pub levels: Vec<f64>,
}

impl SubspaceSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid)
    }

    pub fn build(&self) -> Result<AffineSubspace> {
        let grid = self.grid()?;
        let constraints = self
            .constraints
            .iter()
            .map(|v| v.resolve(grid))
            .collect::<Result<Vec<_>>>()?;
        AffineSubspace::new(constraints, self.levels.clone())
    }

    /// The conditioned law; an empty constraint list gives plain Wiener measure.
    pub fn law(&self) -> Result<ConditionedLaw> {
        if self.constraints.is_empty() && self.levels.is_empty() {
            return Ok(ConditionedLaw::unconditioned(self.grid()?));
        }
        self.build()?.closest_point()
    }
}

/// `{"factors": [...], "T": t, "c": v, "n": k}` with an optional `"grid"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoSpec {
    pub factors: Vec<VectorSpec>,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub c: f64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub grid: Option<usize>,
}

impl ItoSpec {
    /// Grid from the document, else from `fallback`, refined so that every
    /// derivative array fits.
    pub fn grid(&self, fallback: usize) -> Result<Grid> {
        let mut grid = Grid::new(self.grid.unwrap_or(fallback))?;
        for steps in self.factors.iter().filter_map(VectorSpec::implied_steps) {
            grid = grid.common_refinement(&Grid::new(steps)?);
        }
        Ok(grid)
    }

    /// The product kernel: a single factor with `n` means `f^{⊗n}`.
    pub fn kernel(&self, grid: Grid) -> Result<ProductFunctional> {
        let factors = self
            .factors
            .iter()
            .map(|v| v.resolve(grid))
            .collect::<Result<Vec<_>>>()?;
        match (self.n, factors.len()) {
            (_, 0) => Err(Error::EmptyProduct),
            (Some(n), 1) => ProductFunctional::power(factors.into_iter().next().unwrap(), n),
            (Some(n), len) if n != len => Err(Error::Schema(format!(
                "`n` = {n} but {len} factors were given (use one factor for a power)"
            ))),
            _ => ProductFunctional::new(factors, true),
        }
    }
}

/// Monte Carlo functional: `{"kind": "wiener_integral", "f": vector}`,
/// `{"kind": "hermite_of_wiener", "n", "f", "u2"}`,
/// `{"kind": "exp_of_wiener", "z", "f"}`, or `{"kind": "path_eval", "t"}`.
pub fn parse_functional(value: &Value, grid: Grid) -> Result<Functional> {
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema("functional needs a string field `kind`".into()))?;
    let field = |name: &str| -> Result<&Value> {
        value
            .get(name)
            .ok_or_else(|| Error::Schema(format!("functional `{kind}` needs a field `{name}`")))
    };
    let number = |name: &str| -> Result<f64> {
        field(name)?
            .as_f64()
            .ok_or_else(|| Error::Schema(format!("field `{name}` must be a number")))
    };
    let vector = |name: &str| -> Result<CmVector> {
        let spec: VectorSpec = serde_json::from_value(field(name)?.clone())
            .map_err(|e| Error::Schema(format!("field `{name}`: {e}")))?;
        spec.resolve(grid)
    };
    Ok(match kind {
        "wiener_integral" => Functional::WienerIntegral(vector("f")?),
        "hermite_of_wiener" => Functional::HermiteOfWiener {
            n: field("n")?
                .as_u64()
                .ok_or_else(|| Error::Schema("field `n` must be a nonnegative integer".into()))?
                as usize,
            f: vector("f")?,
            u2: number("u2")?,
        },
        "exp_of_wiener" => Functional::ExpOfWiener {
            z: number("z")?,
            f: vector("f")?,
        },
        "path_eval" => Functional::PathEval(number("t")?),
        other => return Err(Error::UnknownFunctional(other.to_string())),
    })
}
