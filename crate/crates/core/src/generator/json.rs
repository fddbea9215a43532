use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeneratorSpec, Histogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorJson {
    family: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mixture: Option<MixtureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<GeneratorJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureJson {
    weight: f64,
    first: Box<GeneratorJson>,
    second: Box<GeneratorJson>,
}

fn to_json(spec: &GeneratorSpec) -> GeneratorJson {
    let mut out = GeneratorJson {
        family: spec.family().to_string(),
        params: spec
            .params()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        mixture: None,
        grid: None,
        base: None,
    };
    match spec {
        GeneratorSpec::Mixture {
            weight,
            first,
            second,
        } => {
            out.mixture = Some(MixtureJson {
                weight: *weight,
                first: Box::new(to_json(first)),
                second: Box::new(to_json(second)),
            });
        }
        GeneratorSpec::Tabulated(h) => out.grid = Some(h.values().to_vec()),
        GeneratorSpec::Rotated { base, .. } | GeneratorSpec::Reflected { base } => {
            out.base = Some(Box::new(to_json(base)));
        }
        _ => {}
    }
    out
}

fn from_json(j: &GeneratorJson) -> Result<GeneratorSpec> {
    let p = |name: &str| -> Result<f64> {
        j.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("family '{}' needs parameter '{name}'", j.family)))
    };
    let base = || -> Result<GeneratorSpec> {
        let b = j.base.as_ref().ok_or_else(|| {
            Error::Schema(format!("family '{}' needs a 'base' generator", j.family))
        })?;
        from_json(b)
    };
    match j.family.as_str() {
        "uniform" => Ok(GeneratorSpec::Uniform),
        "triangular" => GeneratorSpec::triangular(p("b")?, p("m")?),
        "beta" => GeneratorSpec::beta(p("alpha")?, p("beta")?),
        "trunc_normal" => GeneratorSpec::trunc_normal(p("mu")?, p("sigma")?),
        "kumaraswamy" => GeneratorSpec::kumaraswamy(p("a")?, p("b")?),
        "logit_normal" => GeneratorSpec::logit_normal(p("mu")?, p("sigma")?),
        "von_mises" => GeneratorSpec::von_mises(p("phi1")?, p("phi2")?),
        "piecewise_constant" => {
            let n = p("n")?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Schema(format!(
                    "piecewise_constant needs integer n >= 1, got {n}"
                )));
            }
            GeneratorSpec::piecewise_constant(n as usize)
        }
        "mixture" => {
            let m = j
                .mixture
                .as_ref()
                .ok_or_else(|| Error::Schema("family 'mixture' needs a 'mixture' object".into()))?;
            GeneratorSpec::mixture(m.weight, from_json(&m.first)?, from_json(&m.second)?)
        }
        "tabulated" => {
            let grid = j
                .grid
                .clone()
                .ok_or_else(|| Error::Schema("family 'tabulated' needs a 'grid' array".into()))?;
            Ok(GeneratorSpec::Tabulated(Histogram::new(grid)?))
        }
        "rotated" => GeneratorSpec::rotated(base()?, p("shift")?),
        "reflected" => Ok(GeneratorSpec::Reflected {
            base: Box::new(base()?),
        }),
        other => Err(Error::Schema(format!("unknown generator family '{other}'"))),
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        to_json(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = GeneratorJson::deserialize(deserializer)?;
        from_json(&j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let specs = vec![
            GeneratorSpec::Uniform,
            GeneratorSpec::beta(0.5, 2.0).unwrap(),
            GeneratorSpec::von_mises(-17.19, -0.8).unwrap(),
            GeneratorSpec::quarter_mixture(),
            GeneratorSpec::tabulated(vec![0.5, 1.5]).unwrap(),
            GeneratorSpec::piecewise_constant(4).unwrap(),
            GeneratorSpec::rotated(GeneratorSpec::von_mises(1.0, 2.0).unwrap(), 0.5).unwrap(),
            GeneratorSpec::kumaraswamy(2.0, 3.0).unwrap().reflect(),
        ];
        for s in specs {
            let text = serde_json::to_string(&s).unwrap();
            let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s, "{text}");
        }
    }

    #[test]
    fn reads_documented_shape() {
        let s: GeneratorSpec =
            serde_json::from_str(r#"{"family":"beta","params":{"alpha":1.5,"beta":1.5}}"#).unwrap();
        assert_eq!(s, GeneratorSpec::beta(1.5, 1.5).unwrap());
        let m: GeneratorSpec = serde_json::from_str(
            r#"{"family":"mixture","mixture":{"weight":0.3,
                "first":{"family":"uniform"},
                "second":{"family":"trunc_normal","params":{"mu":0.2,"sigma":0.1}}}}"#,
        )
        .unwrap();
        assert!(matches!(m, GeneratorSpec::Mixture { weight, .. } if weight == 0.3));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(
            serde_json::from_str::<GeneratorSpec>(r#"{"family":"beta","params":{"alpha":1}}"#)
                .is_err()
        );
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"family":"gamma"}"#).is_err());
        assert!(serde_json::from_str::<GeneratorSpec>(
            r#"{"family":"trunc_normal","params":{"mu":0.5,"sigma":-1}}"#
        )
        .is_err());
    }
}
