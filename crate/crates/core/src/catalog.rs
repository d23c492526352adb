//! Named channel builders and the channel description file.
//!
//! Builders are addressed as `name:args` with comma-separated reals:
//! `pauli:p0,p1,p2,p3`, `depol:lambda`, `adamp:p`. A description file is a
//! JSON object `{"dim_in": N, "dim_out": M, "kraus": [matrix, ...]}` or
//! `{"dim_in": N, "dim_out": M, "choi": matrix}`, addressed as `file:PATH`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::{
    amplitude_damping, choi_from_kraus, depolarizing, pauli_channel, ChoiMatrix, KrausSet,
};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Scalar;

pub const AVAILABLE: &str = "pauli:p0,p1,p2,p3 | depol:lambda | adamp:p | file:PATH";

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    Pauli([f64; 4]),
    Depolarizing(f64),
    AmplitudeDamping(f64),
    File(PathBuf),
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').ok_or_else(|| {
            Error::InvalidParameter(format!(
                "channel spec `{s}` has no `name:` prefix; available: {AVAILABLE}"
            ))
        })?;
        if name == "file" {
            return Ok(ChannelSpec::File(PathBuf::from(args)));
        }
        let values = args
            .split(',')
            .map(|x| {
                x.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("`{x}` is not a number in channel spec `{s}`"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let arity = |n: usize| -> Result<()> {
            if values.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "`{name}` takes {n} parameter(s), got {}",
                    values.len()
                )))
            }
        };
        match name {
            "pauli" => {
                arity(4)?;
                Ok(ChannelSpec::Pauli([
                    values[0], values[1], values[2], values[3],
                ]))
            }
            "depol" => {
                arity(1)?;
                Ok(ChannelSpec::Depolarizing(values[0]))
            }
            "adamp" => {
                arity(1)?;
                Ok(ChannelSpec::AmplitudeDamping(values[0]))
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown channel `{other}`; available: {AVAILABLE}"
            ))),
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Pauli(p) => write!(f, "pauli:{},{},{},{}", p[0], p[1], p[2], p[3]),
            ChannelSpec::Depolarizing(l) => write!(f, "depol:{l}"),
            ChannelSpec::AmplitudeDamping(p) => write!(f, "adamp:{p}"),
            ChannelSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl ChannelSpec {
    /// Kraus form when the channel has one without a decomposition step.
    pub fn kraus<T: Scalar>(&self) -> Result<Option<KrausSet<T>>> {
        Ok(match self {
            ChannelSpec::Pauli(p) => Some(pauli_channel(p.map(T::lit))?),
            ChannelSpec::Depolarizing(l) => Some(depolarizing(T::lit(*l))?),
            ChannelSpec::AmplitudeDamping(p) => Some(amplitude_damping(T::lit(*p))?),
            ChannelSpec::File(path) => match load_channel_file::<T>(path)? {
                ChannelDescription::Kraus(k) => Some(k),
                ChannelDescription::Choi(_) => None,
            },
        })
    }

    pub fn choi<T: Scalar>(&self) -> Result<ChoiMatrix<T>> {
        match self {
            ChannelSpec::File(path) => Ok(load_channel_file::<T>(path)?.choi()),
            other => Ok(choi_from_kraus(
                &other.kraus::<T>()?.expect("named builders are Kraus"),
            )),
        }
    }
}

/// Contents of a channel description file.
#[derive(Clone, Debug)]
pub enum ChannelDescription<T> {
    Kraus(KrausSet<T>),
    Choi(ChoiMatrix<T>),
}

impl<T: Scalar> ChannelDescription<T> {
    pub fn choi(&self) -> ChoiMatrix<T> {
        match self {
            ChannelDescription::Kraus(k) => choi_from_kraus(k),
            ChannelDescription::Choi(c) => c.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ChannelFile<T: Scalar> {
    dim_in: usize,
    dim_out: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kraus: Option<Vec<ComplexMatrix<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choi: Option<ComplexMatrix<T>>,
}

pub fn parse_channel_description<T: Scalar>(text: &str) -> Result<ChannelDescription<T>> {
    let file: ChannelFile<T> =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("channel file: {e}")))?;
    match (file.kraus, file.choi) {
        (Some(ops), None) => {
            let k = KrausSet::without_tp_check(ops)?;
            if k.dim_in() != file.dim_in || k.dim_out() != file.dim_out {
                return Err(Error::Format(format!(
                    "Kraus operators are {}x{}, header says dim_out={} dim_in={}",
                    k.dim_out(),
                    k.dim_in(),
                    file.dim_out,
                    file.dim_in
                )));
            }
            Ok(ChannelDescription::Kraus(k))
        }
        (None, Some(s)) => Ok(ChannelDescription::Choi(ChoiMatrix::new(
            s,
            file.dim_in,
            file.dim_out,
        )?)),
        _ => Err(Error::Format(
            "channel file needs exactly one of `kraus` or `choi`".into(),
        )),
    }
}

pub fn load_channel_file<T: Scalar>(path: &Path) -> Result<ChannelDescription<T>> {
    parse_channel_description(&std::fs::read_to_string(path)?)
}

pub fn channel_description_json<T: Scalar>(desc: &ChannelDescription<T>) -> Result<String> {
    let file = match desc {
        ChannelDescription::Kraus(k) => ChannelFile {
            dim_in: k.dim_in(),
            dim_out: k.dim_out(),
            kraus: Some(k.operators().to_vec()),
            choi: None,
        },
        ChannelDescription::Choi(c) => ChannelFile {
            dim_in: c.dim_in(),
            dim_out: c.dim_out(),
            kraus: None,
            choi: Some(c.matrix().clone()),
        },
    };
    Ok(serde_json::to_string(&file)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_builders() {
        assert_eq!(
            "pauli:0.3,0.2,0.4,0.1".parse::<ChannelSpec>().unwrap(),
            ChannelSpec::Pauli([0.3, 0.2, 0.4, 0.1])
        );
        assert_eq!(
            "depol:0.8".parse::<ChannelSpec>().unwrap(),
            ChannelSpec::Depolarizing(0.8)
        );
        assert_eq!(
            "adamp:0.5".parse::<ChannelSpec>().unwrap(),
            ChannelSpec::AmplitudeDamping(0.5)
        );
        let spec: ChannelSpec = "depol:0.8".parse().unwrap();
        assert_eq!(spec.to_string().parse::<ChannelSpec>().unwrap(), spec);
    }

    #[test]
    fn rejects_bad_specs() {
        let err = "bitflip:0.1"
            .parse::<ChannelSpec>()
            .unwrap_err()
            .to_string();
        assert!(err.contains("pauli") && err.contains("adamp"));
        assert!("pauli:0.5,0.5".parse::<ChannelSpec>().is_err());
        assert!("depol:abc".parse::<ChannelSpec>().is_err());
        assert!("depol".parse::<ChannelSpec>().is_err());
        assert!("adamp:2"
            .parse::<ChannelSpec>()
            .unwrap()
            .choi::<f64>()
            .is_err());
    }

    #[test]
    fn description_round_trip() {
        let k = amplitude_damping(0.3f64).unwrap();
        let json = channel_description_json(&ChannelDescription::Kraus(k.clone())).unwrap();
        let back = parse_channel_description::<f64>(&json).unwrap();
        assert!(back.choi().matrix().distance(choi_from_kraus(&k).matrix()) < 1e-15);

        let c = choi_from_kraus(&k);
        let json = channel_description_json(&ChannelDescription::Choi(c.clone())).unwrap();
        assert!(json.contains("\"choi\""));
        let back = parse_channel_description::<f64>(&json).unwrap();
        assert_eq!(back.choi(), c);
    }

    #[test]
    fn description_errors() {
        assert!(parse_channel_description::<f64>("{\"dim_in\":2,\"dim_out\":2}").is_err());
        assert!(parse_channel_description::<f64>("not json").is_err());
        let wrong_dims = r#"{"dim_in":3,"dim_out":2,"kraus":[{"rows":2,"cols":2,"entries":[[1,0],[0,0],[0,0],[1,0]]}]}"#;
        assert!(parse_channel_description::<f64>(wrong_dims).is_err());
        let not_psd = r#"{"dim_in":1,"dim_out":2,"choi":{"rows":2,"cols":2,"entries":[[1,0],[0,0],[0,0],[-1,0]]}}"#;
        assert!(parse_channel_description::<f64>(not_psd).is_err());
    }

    #[test]
    fn file_spec_loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ch.json");
        let k = depolarizing(0.5f64).unwrap();
        std::fs::write(
            &path,
            channel_description_json(&ChannelDescription::Kraus(k.clone())).unwrap(),
        )
        .unwrap();
        let spec: ChannelSpec = format!("file:{}", path.display()).parse().unwrap();
        let c = spec.choi::<f64>().unwrap();
        assert!(c.matrix().distance(choi_from_kraus(&k).matrix()) < 1e-15);
    }
}
