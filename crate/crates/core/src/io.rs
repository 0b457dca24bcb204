//! File formats. Model specs are JSON documents; graphs are plain text with a
//! header line `n m k` followed by one `wid v1 .. vk` line per clause. Weight
//! ids, vertices and community labels are 1-based in every external format.
//!
//! ```json
//! {"k": 2, "q": 2, "pi": [0.5, 0.5], "d": 3.0,
//!  "weights": [{"mass": 1.0, "table": [5, 1, 1, 5]}]}
//! {"k": 2, "q": 2, "pi": [0.5, 0.5], "d": 3.0, "m0": [1.667, 0.333, 0.333, 1.667]}
//! {"k": 2, "q": 2, "a": 5.0, "b": 1.0}
//! ```
//!
//! Tables list colorings in row-major order, first slot most significant.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hsbm_to_factor_spec, CommunityAssignment, FactorGraph, HsbmSpec, ModelSpec, WeightFunction, WeightPrior};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightEntry {
    pub mass: f64,
    pub table: Vec<f64>,
}

/// The on-disk shape of a model spec; exactly one of `weights`, `m0`, or `a`/`b` is given.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub k: usize,
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightEntry>>,
    /// Close the prior under slot permutations before use.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub symmetrize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

/// A parsed spec: a planted factor model or a hypergraph SBM.
#[derive(Clone, Debug)]
pub enum Spec {
    Factor(ModelSpec),
    Hsbm { hsbm: HsbmSpec, ab: Option<(f64, f64)> },
}

impl Spec {
    /// The factor-model view (an HSBM becomes a point mass on `d·M₀`).
    pub fn factor(&self) -> Result<ModelSpec> {
        match self {
            Spec::Factor(s) => Ok(s.clone()),
            Spec::Hsbm { hsbm, .. } => hsbm_to_factor_spec(hsbm),
        }
    }

    pub fn hsbm(&self) -> Result<&HsbmSpec> {
        match self {
            Spec::Hsbm { hsbm, .. } => Ok(hsbm),
            Spec::Factor(_) => Err(Error::InvalidModel("this operation needs an HSBM spec (\"m0\" or \"a\"/\"b\")".into())),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Spec::Factor(s) => s.k,
            Spec::Hsbm { hsbm, .. } => hsbm.k,
        }
    }

    pub fn q(&self) -> usize {
        match self {
            Spec::Factor(s) => s.q,
            Spec::Hsbm { hsbm, .. } => hsbm.q,
        }
    }

    pub fn d(&self) -> f64 {
        match self {
            Spec::Factor(s) => s.d,
            Spec::Hsbm { hsbm, .. } => hsbm.d,
        }
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Ok(match self {
            Spec::Factor(s) => Spec::Factor(s.with_d(d)?),
            Spec::Hsbm { hsbm, .. } => Spec::Hsbm { hsbm: hsbm.with_d(d)?, ab: None },
        })
    }

    pub fn to_document(&self) -> SpecDocument {
        match self {
            Spec::Factor(s) => SpecDocument {
                k: s.k,
                q: s.q,
                pi: Some(s.pi.clone()),
                d: Some(s.d),
                weights: Some(s.weights.entries().iter().map(|(w, p)| WeightEntry { mass: *p, table: w.table.clone() }).collect()),
                ..Default::default()
            },
            Spec::Hsbm { hsbm, ab } => match ab {
                Some((a, b)) => SpecDocument { k: hsbm.k, q: hsbm.q, a: Some(*a), b: Some(*b), ..Default::default() },
                None => SpecDocument {
                    k: hsbm.k,
                    q: hsbm.q,
                    pi: Some(hsbm.pi.clone()),
                    d: Some(hsbm.d),
                    m0: Some(hsbm.m0.clone()),
                    ..Default::default()
                },
            },
        }
    }
}

impl SpecDocument {
    pub fn into_spec(self) -> Result<Spec> {
        let given = [self.weights.is_some(), self.m0.is_some(), self.a.is_some() || self.b.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Error::Parse("give exactly one of \"weights\", \"m0\", or \"a\"/\"b\"".into()));
        }
        let (k, q) = (self.k, self.q);
        let pi = || self.pi.clone().ok_or_else(|| Error::Parse("missing \"pi\"".into()));
        let d = || self.d.ok_or_else(|| Error::Parse("missing \"d\"".into()));
        if let Some(entries) = &self.weights {
            let ws = entries
                .iter()
                .enumerate()
                .map(|(i, e)| Ok((WeightFunction::new(i, k, q, e.table.clone())?, e.mass)))
                .collect::<Result<Vec<_>>>()?;
            let prior = if self.symmetrize { WeightPrior::symmetrized(ws)? } else { WeightPrior::new(ws)? };
            return Ok(Spec::Factor(ModelSpec::new(pi()?, prior, d()?)?));
        }
        if let Some(m0) = &self.m0 {
            return Ok(Spec::Hsbm { hsbm: HsbmSpec::new(k, q, pi()?, m0.clone(), d()?)?, ab: None });
        }
        let (a, b) = match (self.a, self.b) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Parse("\"a\" and \"b\" must be given together".into())),
        };
        if self.pi.is_some() || self.d.is_some() {
            return Err(Error::Parse("the \"a\"/\"b\" form implies uniform π and d; drop \"pi\" and \"d\"".into()));
        }
        Ok(Spec::Hsbm { hsbm: HsbmSpec::symmetric(k, q, a, b)?, ab: Some((a, b)) })
    }
}

pub fn parse_spec(text: &str) -> Result<Spec> {
    serde_json::from_str::<SpecDocument>(text).map_err(|e| Error::Parse(e.to_string()))?.into_spec()
}

pub fn read_spec(path: &Path) -> Result<Spec> {
    parse_spec(&fs::read_to_string(path)?)
}

pub fn spec_to_json(spec: &Spec) -> String {
    serde_json::to_string_pretty(&spec.to_document()).expect("spec documents serialize")
}

pub fn graph_to_string(g: &FactorGraph) -> String {
    let mut out = String::with_capacity(16 * (g.m() + 1));
    writeln!(out, "{} {} {}", g.n, g.m(), g.k).expect("writing to a String");
    for (w, vars) in g.clauses() {
        write!(out, "{}", w + 1).expect("writing to a String");
        for v in vars {
            write!(out, " {}", v + 1).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<FactorGraph> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let nums = |line: &str| -> Result<Vec<usize>> {
        line.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("not a nonnegative integer: {t:?}")))).collect()
    };
    let h = nums(header)?;
    let [n, m, k] = h[..] else {
        return Err(Error::Parse(format!("header must be \"n m k\", got {header:?}")));
    };
    let mut g = FactorGraph::with_capacity(n, k, m);
    let mut buf = vec![0; k];
    for (i, line) in lines.enumerate() {
        let row = nums(line)?;
        if row.len() != k + 1 {
            return Err(Error::Parse(format!("clause line {} has {} fields, expected {}", i + 1, row.len(), k + 1)));
        }
        if row.contains(&0) {
            return Err(Error::Parse(format!("clause line {}: ids are 1-based", i + 1)));
        }
        for (b, v) in buf.iter_mut().zip(&row[1..]) {
            *b = v - 1;
        }
        g.push(row[0] - 1, &buf)?;
    }
    if g.m() != m {
        return Err(Error::Parse(format!("header announces {m} clauses, found {}", g.m())));
    }
    Ok(g)
}

pub fn read_graph(path: &Path) -> Result<FactorGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

/// Sidecar document for a planted assignment, labels 1-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssignmentDocument {
    pub q: usize,
    pub labels: Vec<usize>,
}

impl From<&CommunityAssignment> for AssignmentDocument {
    fn from(s: &CommunityAssignment) -> Self {
        Self { q: s.q, labels: s.labels.iter().map(|l| l + 1).collect() }
    }
}

impl AssignmentDocument {
    pub fn into_assignment(self) -> Result<CommunityAssignment> {
        if self.labels.contains(&0) {
            return Err(Error::Parse("community labels are 1-based".into()));
        }
        CommunityAssignment::new(self.q, self.labels.into_iter().map(|l| l - 1).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::samplers::{sample_poisson_model, Law};
    use proptest::prelude::*;

    #[test]
    fn spec_forms() {
        let s = parse_spec(r#"{"k":2,"q":2,"a":5,"b":1}"#).unwrap();
        assert_eq!(s.d(), 3.0);
        let back = parse_spec(&spec_to_json(&s)).unwrap();
        assert_eq!(back.hsbm().unwrap(), s.hsbm().unwrap());
        let f = parse_spec(r#"{"k":2,"q":2,"pi":[0.5,0.5],"d":3,"weights":[{"mass":1,"table":[5,1,1,5]}]}"#).unwrap();
        assert!((f.factor().unwrap().xi() - 3.0).abs() < 1e-12);
        let m0 = parse_spec(r#"{"k":2,"q":2,"pi":[0.5,0.5],"d":2,"m0":[1.5,0.5,0.5,1.5]}"#).unwrap();
        assert!(m0.hsbm().unwrap().degree_balanced);
        let sym = parse_spec(r#"{"k":2,"q":2,"pi":[0.5,0.5],"d":1,"symmetrize":true,"weights":[{"mass":1,"table":[1,2,3,4]}]}"#).unwrap();
        assert_eq!(sym.factor().unwrap().weights.len(), 2);
    }

    #[test]
    fn spec_errors() {
        for bad in [
            r#"{"k":2,"q":2}"#,
            r#"{"k":2,"q":2,"a":5}"#,
            r#"{"k":2,"q":2,"a":5,"b":1,"d":3}"#,
            r#"{"k":2,"q":2,"pi":[0.5,0.5],"d":3,"weights":[{"mass":1,"table":[5,1,1,0]}]}"#,
            r#"{"k":2,"q":2,"pi":[0.5,0.5],"d":3,"m0":[1,1,1,1],"a":1,"b":1}"#,
            r#"{"k":2,"q":2,"a":5,"b":1,"extra":1}"#,
            "not json",
        ] {
            assert!(parse_spec(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn graph_format_example() {
        let g = parse_graph("# comment\n3 2 2\n1 1 2\n1 2 3\n").unwrap();
        assert_eq!((g.n, g.m(), g.k), (3, 2, 2));
        assert_eq!(g.clause(1), (0, &[1usize, 2][..]));
        assert_eq!(graph_to_string(&g), "3 2 2\n1 1 2\n1 2 3\n");
        assert!(parse_graph("3 2 2\n1 1 2\n").is_err());
        assert!(parse_graph("3 1 2\n1 0 2\n").is_err());
        assert!(parse_graph("3 1 2\n1 1 4\n").is_err());
        assert!(parse_graph("3 1\n").is_err());
    }

    #[test]
    fn assignment_sidecar_is_one_based() {
        let s = CommunityAssignment::new(3, vec![0, 2, 1]).unwrap();
        let doc = AssignmentDocument::from(&s);
        assert_eq!(doc.labels, vec![1, 3, 2]);
        assert_eq!(doc.into_assignment().unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn prop_graph_roundtrip(seed in 0u64..100_000, n in 1usize..40) {
            let spec = parse_spec(r#"{"k":3,"q":2,"pi":[0.4,0.6],"d":2,"weights":[{"mass":0.5,"table":[2,1,1,1,1,1,1,2]},{"mass":0.5,"table":[1,1,1,1,1,1,1,1]}]}"#)
                .unwrap()
                .factor()
                .unwrap();
            let (_, g) = sample_poisson_model(&spec, n, Law::Planted, Seed::new(seed));
            let back = parse_graph(&graph_to_string(&g)).unwrap();
            prop_assert_eq!(graph_to_string(&back), graph_to_string(&g));
        }
    }
}
