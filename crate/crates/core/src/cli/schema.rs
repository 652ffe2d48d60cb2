//! JSON problem files and the flat CSV importer.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::combine::CombinerSpec;
use crate::error::{Error, Result};
use crate::model::{DependenceLabel, IcMode, Layer, PValues, Problem};
use crate::reshape::{Atom, ReshapeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub ic: IcMode,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupsFile {
    Named(String),
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub groups: GroupsFile,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default = "identity")]
    pub reshape: ReshapeFile,
    #[serde(default = "simes")]
    pub combiner: CombinerFile,
    #[serde(default)]
    pub dependence: DependenceLabel,
}

fn identity() -> ReshapeFile {
    ReshapeFile::Named("identity".into())
}

fn simes() -> CombinerFile {
    CombinerFile::Named("simes".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReshapeFile {
    /// `"identity"` or `"by"` (sized to the layer or group).
    Named(String),
    /// BY with an explicit domain size.
    By { by: usize },
    Atoms { atoms: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CombinerObject {
    Wsimes(Vec<Vec<f64>>),
    Rwsimes {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reshape: Option<ReshapeFile>,
    },
    Ruger(usize),
    External(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CombinerFile {
    Named(String),
    Object(CombinerObject),
}

fn reshape_from(file: &ReshapeFile, default_size: usize, layer: usize) -> Result<ReshapeSpec> {
    match file {
        ReshapeFile::Named(s) if s == "identity" => Ok(ReshapeSpec::Identity),
        ReshapeFile::Named(s) if s == "by" => Ok(ReshapeSpec::by(default_size)),
        ReshapeFile::Named(s) => Err(Error::Config(format!("layers[{layer}].reshape: unknown name {s:?}"))),
        ReshapeFile::By { by } => Ok(ReshapeSpec::by(*by)),
        ReshapeFile::Atoms { atoms } => ReshapeSpec::measure(atoms.iter().map(|a| (a[0], a[1])).collect())
            .map_err(|e| Error::Config(format!("layers[{layer}].reshape: {e}"))),
    }
}

fn reshape_to(spec: &ReshapeSpec, default_size: usize) -> ReshapeFile {
    match spec {
        ReshapeSpec::Identity => identity(),
        ReshapeSpec::By { domain_size, .. } if *domain_size == default_size => ReshapeFile::Named("by".into()),
        ReshapeSpec::By { domain_size, .. } => ReshapeFile::By { by: *domain_size },
        ReshapeSpec::Measure(atoms) => ReshapeFile::Atoms {
            atoms: atoms.iter().map(|a: &Atom| [a.x, a.mass]).collect(),
        },
    }
}

fn combiner_from(file: &CombinerFile, layer: usize) -> Result<CombinerSpec> {
    Ok(match file {
        CombinerFile::Named(s) => match s.as_str() {
            "simes" => CombinerSpec::Simes,
            "wsimes" => CombinerSpec::WeightedSimes { weights: None },
            "rwsimes" => CombinerSpec::ReshapedWeightedSimes {
                weights: None,
                reshape: None,
            },
            "fisher" => CombinerSpec::Fisher,
            "stouffer" => CombinerSpec::Stouffer,
            "bonferroni" => CombinerSpec::Bonferroni,
            "ruschendorf" => CombinerSpec::Ruschendorf,
            other => return Err(Error::Config(format!("layers[{layer}].combiner: unknown name {other:?}"))),
        },
        CombinerFile::Object(CombinerObject::Wsimes(w)) => CombinerSpec::WeightedSimes { weights: Some(w.clone()) },
        CombinerFile::Object(CombinerObject::Rwsimes { weights, reshape }) => CombinerSpec::ReshapedWeightedSimes {
            weights: weights.clone(),
            // within-group reshapes are sized explicitly or by the group
            reshape: match reshape {
                None => None,
                Some(ReshapeFile::Named(s)) if s == "by" => None,
                Some(r) => Some(reshape_from(r, 0, layer)?),
            },
        },
        CombinerFile::Object(CombinerObject::Ruger(k)) => CombinerSpec::Ruger(*k),
        CombinerFile::Object(CombinerObject::External(v)) => CombinerSpec::External(v.clone()),
    })
}

fn combiner_to(spec: &CombinerSpec) -> CombinerFile {
    let named = |s: &str| CombinerFile::Named(s.into());
    match spec {
        CombinerSpec::Simes => named("simes"),
        CombinerSpec::WeightedSimes { weights: None } => named("wsimes"),
        CombinerSpec::WeightedSimes { weights: Some(w) } => CombinerFile::Object(CombinerObject::Wsimes(w.clone())),
        CombinerSpec::ReshapedWeightedSimes {
            weights: None,
            reshape: None,
        } => named("rwsimes"),
        CombinerSpec::ReshapedWeightedSimes { weights, reshape } => CombinerFile::Object(CombinerObject::Rwsimes {
            weights: weights.clone(),
            reshape: reshape.as_ref().map(|r| reshape_to(r, usize::MAX)),
        }),
        CombinerSpec::Fisher => named("fisher"),
        CombinerSpec::Stouffer => named("stouffer"),
        CombinerSpec::Bonferroni => named("bonferroni"),
        CombinerSpec::Ruschendorf => named("ruschendorf"),
        CombinerSpec::Ruger(k) => CombinerFile::Object(CombinerObject::Ruger(*k)),
        CombinerSpec::External(v) => CombinerFile::Object(CombinerObject::External(v.clone())),
    }
}

/// λ used when a layer is adaptive but names none.
pub const DEFAULT_LAMBDA: f64 = 0.5;

impl ProblemFile {
    /// Builds the problem. Missing weights default to one (with a logged
    /// note); structural errors are reported with their field path.
    pub fn to_problem(&self) -> Result<Problem> {
        let n = self.p.len();
        if let Some(declared) = self.n {
            if declared != n {
                return Err(Error::Config(format!("n = {declared} but p has {n} entries")));
            }
        }
        let pvalues = PValues::new(self.p.clone()).map_err(|e| Error::Config(format!("p: {e}")))?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (m, lf) in self.layers.iter().enumerate() {
            let groups = match &lf.groups {
                GroupsFile::Named(s) if s == "finest" => (0..n).map(|i| vec![i]).collect(),
                GroupsFile::Named(s) if s == "coarsest" => vec![(0..n).collect()],
                GroupsFile::Named(s) => {
                    return Err(Error::Config(format!(
                        "layers[{m}].groups: expected an array of index arrays, \"finest\" or \"coarsest\", got {s:?}"
                    )))
                }
                GroupsFile::Explicit(g) => g.clone(),
            };
            let g = groups.len();
            let w = lf.w.clone().unwrap_or_else(|| {
                log::info!("layers[{m}]: no prior weights given, using w = 1");
                vec![1.0; g]
            });
            let u = lf.u.clone().unwrap_or_else(|| {
                log::info!("layers[{m}]: no penalty weights given, using u = 1");
                vec![1.0; g]
            });
            let mut layer = Layer::new(groups, lf.alpha).with_weights(w, u);
            if lf.adaptive {
                layer = layer.with_adaptivity(lf.lambda.unwrap_or_else(|| {
                    log::info!("layers[{m}]: adaptive without lambda, using {DEFAULT_LAMBDA}");
                    DEFAULT_LAMBDA
                }));
            } else if let Some(l) = lf.lambda {
                layer.lambda = l;
            }
            layer.reshape = reshape_from(&lf.reshape, g, m)?;
            layer.combiner = combiner_from(&lf.combiner, m)?;
            layer.dependence = lf.dependence;
            layers.push(layer);
        }
        Ok(Problem::new(pvalues, layers, self.ic))
    }

    /// Canonical form: every field explicit, groups spelled out.
    pub fn from_problem(problem: &Problem) -> Self {
        Self {
            n: Some(problem.n()),
            p: problem.pvalues.as_slice().to_vec(),
            ic: problem.ic_mode,
            layers: problem
                .layers
                .iter()
                .map(|l| LayerFile {
                    groups: GroupsFile::Explicit(l.groups.clone()),
                    alpha: l.alpha,
                    lambda: Some(l.lambda),
                    adaptive: l.adaptive,
                    w: Some(l.prior_weights.clone()),
                    u: Some(l.penalty_weights.clone()),
                    reshape: reshape_to(&l.reshape, l.groups.len()),
                    combiner: combiner_to(&l.combiner),
                    dependence: l.dependence,
                })
                .collect(),
        }
    }
}

/// Parses a JSON problem document. Syntax and schema errors carry the
/// line and column.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("input: {e}")))?;
    file.to_problem()
}

/// Canonical JSON text of `problem`.
pub fn write_problem(problem: &Problem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ProblemFile::from_problem(problem))?)
}

/// Reads one p-value per line, with an optional non-numeric header.
pub fn read_csv_pvalues<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Config(format!("csv line {}: {e}", line + 1)))?;
        let field = record.get(0).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if line == 0 => {}
            Err(_) => return Err(Error::Config(format!("csv line {}: {field:?} is not a number", line + 1))),
        }
    }
    Ok(out)
}

/// A single finest layer over CSV p-values.
pub fn problem_from_csv<R: Read>(reader: R, alpha: f64) -> Result<Problem> {
    let p = read_csv_pvalues(reader)?;
    let n = p.len();
    let pvalues = PValues::new(p).map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(Problem::new(pvalues, vec![Layer::finest(n, alpha)], IcMode::Weak))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BH: &str = r#"{"n": 4, "p": [0.01, 0.02, 0.03, 0.9], "layers": [{"groups": "finest", "alpha": 0.1}]}"#;

    #[test]
    fn defaults_fill_in() {
        let p = parse_problem(BH).unwrap();
        assert_eq!(p.layers[0].prior_weights, vec![1.0; 4]);
        assert_eq!(p.layers[0].penalty_weights, vec![1.0; 4]);
        assert_eq!(p.layers[0].combiner, CombinerSpec::Simes);
        assert_eq!(p.ic_mode, IcMode::Weak);
    }

    #[test]
    fn round_trip_is_exact() {
        let text = r#"{
          "p": [0.1, 0.30000000000000004, 1e-300, 1.0],
          "ic": "strong",
          "layers": [
            {"groups": [[0, 1], [2, 3]], "alpha": 0.2, "adaptive": true, "lambda": 0.4,
             "w": [1.5, 0.5], "u": [1.0, 1.0], "reshape": "by", "combiner": {"ruger": 1}},
            {"groups": [[0], [1, 2]], "alpha": 0.1, "reshape": {"atoms": [[1.0, 0.25], [2.0, 0.75]]},
             "combiner": {"rwsimes": {"weights": [[1.0], [0.5, 1.5]], "reshape": {"by": 3}}}, "dependence": "prds"},
            {"groups": "coarsest", "alpha": 0.3, "combiner": "fisher", "reshape": {"by": 7}}
          ]
        }"#;
        let p = parse_problem(text).unwrap();
        let canonical = write_problem(&p).unwrap();
        let again = parse_problem(&canonical).unwrap();
        assert_eq!(p, again);
        assert_eq!(canonical, write_problem(&again).unwrap());
    }

    #[test]
    fn errors_point_at_the_problem() {
        let e = parse_problem(r#"{"p": [0.1], "layers": [{"groups": "nope", "alpha": 0.1}]}"#).unwrap_err();
        assert!(e.to_string().contains("layers[0].groups"), "{e}");
        let e = parse_problem("{\"p\": [0.1],\n \"layers\": [{\"alpha\": 0.1}]}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_problem(r#"{"n": 3, "p": [0.1], "layers": []}"#).is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let p = read_csv_pvalues("pvalue\n0.1\n0.2\n".as_bytes()).unwrap();
        assert_eq!(p, vec![0.1, 0.2]);
        let p = read_csv_pvalues("0.3\n 0.4 \n".as_bytes()).unwrap();
        assert_eq!(p, vec![0.3, 0.4]);
        assert!(read_csv_pvalues("0.3\nx\n".as_bytes()).is_err());
    }
}
