use super::{ExpFamilyTriplet, FiniteTriplet, ImmigrationMeasure, LfTriplet, SubStochasticKernel, TypePoint};
use crate::error::{Error, Result};
use crate::spectral::LifeLengthLaw;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// On-disk triplet description.
///
/// `{"family":"finite","K":[[...]],"gamma":[...],"m":...}` or
/// `{"family":"exp","lambda":...,"mu":...,"m":...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum TripletSpec {
    Finite {
        #[serde(rename = "K")]
        k: Vec<Vec<f64>>,
        gamma: Vec<f64>,
        m: f64,
    },
    Exp { lambda: f64, mu: f64, m: f64 },
}

/// A triplet from one of the two built-in families.
#[derive(Debug, Clone)]
pub enum Triplet {
    Finite(FiniteTriplet),
    Exp(ExpFamilyTriplet),
}

impl TripletSpec {
    pub fn build(&self) -> Result<Triplet> {
        match self {
            TripletSpec::Finite { k, gamma, m } => FiniteTriplet::new(k.clone(), gamma.clone(), *m).map(Triplet::Finite),
            TripletSpec::Exp { lambda, mu, m } => ExpFamilyTriplet::new(*lambda, *mu, *m).map(Triplet::Exp),
        }
    }
}

impl Triplet {
    fn inner(&self) -> &dyn LfTriplet {
        match self {
            Triplet::Finite(t) => t,
            Triplet::Exp(t) => t,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Triplet::Finite(_) => "finite",
            Triplet::Exp(_) => "exp",
        }
    }

    pub fn spec(&self) -> TripletSpec {
        match self {
            Triplet::Finite(t) => TripletSpec::Finite {
                k: (0..t.dim()).map(|i| t.k_matrix().row(i).iter().copied().collect()).collect(),
                gamma: t.gamma_vector().to_vec(),
                m: t.m(),
            },
            Triplet::Exp(t) => TripletSpec::Exp {
                lambda: t.lambda(),
                mu: t.mu(),
                m: t.m(),
            },
        }
    }

    /// Parse a type point in this triplet's type space.
    pub fn parse_point(&self, text: &str) -> Result<TypePoint> {
        let p = match self {
            Triplet::Finite(_) => text.trim().parse::<usize>().ok().map(TypePoint::Index),
            Triplet::Exp(_) => text.trim().parse::<f64>().ok().map(TypePoint::Real),
        };
        match p {
            Some(p) if self.contains(p) => Ok(p),
            _ => Err(Error::InvalidType(text.to_string())),
        }
    }

    /// A representative type: index 0, or the mean of γ.
    pub fn default_point(&self) -> TypePoint {
        match self {
            Triplet::Finite(_) => TypePoint::Index(0),
            Triplet::Exp(t) => TypePoint::Real(1.0 / t.mu()),
        }
    }
}

impl LfTriplet for Triplet {
    fn kernel(&self) -> &dyn SubStochasticKernel {
        self.inner().kernel()
    }
    fn gamma(&self) -> &dyn ImmigrationMeasure {
        self.inner().gamma()
    }
    fn m(&self) -> f64 {
        self.inner().m()
    }
    fn contains(&self, x: TypePoint) -> bool {
        self.inner().contains(x)
    }
    fn tail(&self, n: usize) -> Result<f64> {
        self.inner().tail(n)
    }
    fn gamma_power_apply(&self, g: &super::TestFn<'_>, n: usize) -> Result<f64> {
        self.inner().gamma_power_apply(g, n)
    }
    fn sample_gamma_power(&self, n: usize, rng: &mut dyn RngCore) -> Option<TypePoint> {
        self.inner().sample_gamma_power(n, rng)
    }
    fn life_length_law(&self) -> Result<LifeLengthLaw> {
        self.inner().life_length_law()
    }
    fn as_finite(&self) -> Option<&FiniteTriplet> {
        self.inner().as_finite()
    }
}

/// Line of the first occurrence of the key `"name"` in `text`.
fn key_line(text: &str, field: &str) -> Option<usize> {
    let key = field.split('[').next().unwrap_or(field);
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Parse and validate a triplet document.
pub fn parse_triplet(text: &str) -> Result<Triplet> {
    let spec: TripletSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.build().map_err(|e| match e {
        Error::InvalidTriplet { field, reason } => {
            let field = match key_line(text, &field) {
                Some(line) => format!("{field} (line {line})"),
                None => field,
            };
            Error::InvalidTriplet { field, reason }
        }
        other => other,
    })
}

/// Inline JSON when `source` starts with `{`, otherwise a file path.
pub fn load_triplet(source: &str) -> Result<Triplet> {
    if source.trim_start().starts_with('{') {
        return parse_triplet(source);
    }
    let text = std::fs::read_to_string(Path::new(source)).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: format!("{source}: {e}"),
    })?;
    parse_triplet(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_families() {
        let t = parse_triplet(r#"{"family":"finite","K":[[0.4]],"gamma":[1],"m":1}"#).unwrap();
        assert_eq!(t.family(), "finite");
        let t = parse_triplet(r#"{"family":"exp","lambda":1,"mu":2,"m":0.5}"#).unwrap();
        assert_eq!(t.family(), "exp");
        assert_eq!(
            t.spec(),
            TripletSpec::Exp {
                lambda: 1.0,
                mu: 2.0,
                m: 0.5
            }
        );
    }

    #[test]
    fn invariant_violation_names_field_and_line() {
        let doc = "{\n  \"family\": \"finite\",\n  \"K\": [[0.9, 0.3]],\n  \"gamma\": [1, 0],\n  \"m\": 1\n}";
        let err = parse_triplet(doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("K[0]") && msg.contains("line 3"), "{msg}");
        let doc = "{\"family\":\"exp\",\"lambda\":1,\"mu\":1,\"m\":-2}";
        assert!(parse_triplet(doc).unwrap_err().to_string().contains("m"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_triplet("{\n\"family\": \"exp\",\n\"lambda\": }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_triplet(r#"{"family":"cubic","m":1}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn points_are_validated() {
        let t = parse_triplet(r#"{"family":"finite","K":[[0.4,0],[0,0.1]],"gamma":[0.5,0.5],"m":1}"#).unwrap();
        assert_eq!(t.parse_point("1").unwrap(), TypePoint::Index(1));
        assert!(t.parse_point("2").is_err());
        let t = parse_triplet(r#"{"family":"exp","lambda":1,"mu":1,"m":1}"#).unwrap();
        assert!(t.parse_point("-0.5").is_err());
        assert_eq!(t.parse_point("0.5").unwrap(), TypePoint::Real(0.5));
    }
}
