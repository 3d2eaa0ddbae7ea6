//! JSON formats for chains and automata.
//!
//! Chain:
//! `{"states":[{"id","labels","rate"}],"initial":id,"transitions":[{"from","to","prob"}]}`
//!
//! Automaton:
//! `{"clocks","locations","initial","acceptance","edges":[{"from","symbol","guard","resets","to"}]}`
//! where `acceptance` is `{"kind":"finite","locations":[..]}` or
//! `{"kind":"muller","family":[[..],..]}` and a guard is a list of
//! `{"clock","op","const"}` atoms (empty means true).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{Ctmc, Label};
use crate::timed::{
    validate_dta, Acceptance, Atom, ClockConstraint, ClockId, Comparator, Dta, DtaEdge,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CtmcFile {
    states: Vec<StateEntry>,
    initial: String,
    transitions: Vec<TransitionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    id: String,
    #[serde(default)]
    labels: Vec<String>,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    to: String,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DtaFile {
    #[serde(default)]
    clocks: Vec<String>,
    locations: Vec<String>,
    initial: String,
    acceptance: AcceptanceEntry,
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum AcceptanceEntry {
    Finite { locations: Vec<String> },
    Muller { family: Vec<Vec<String>> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    from: String,
    #[serde(default)]
    symbol: Vec<String>,
    #[serde(default)]
    guard: Vec<AtomEntry>,
    #[serde(default)]
    resets: Vec<String>,
    to: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomEntry {
    clock: String,
    op: String,
    #[serde(rename = "const")]
    constant: u64,
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, source_name: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        // The position is reported separately.
        let text = inner.to_string();
        let suffix = format!(" at line {} column {}", inner.line(), inner.column());
        let text = text.strip_suffix(&suffix).unwrap_or(&text);
        let message = if path.is_empty() || path == "." {
            text.to_string()
        } else {
            format!("{path}: {text}")
        };
        Error::Parse {
            source_name: source_name.to_string(),
            line: inner.line(),
            column: inner.column(),
            message,
        }
    })
}

/// Resolves names to indices, naming the offending field on failure.
struct Names<'a> {
    what: &'a str,
    index: HashMap<&'a str, usize>,
}

impl<'a> Names<'a> {
    fn new(what: &'a str, names: &'a [String]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate {what} {n:?}")));
            }
        }
        Ok(Names { what, index })
    }

    fn get(&self, name: &str, field: impl FnOnce() -> String) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| {
            Error::InvalidModel(format!("{}: unknown {} {name:?}", field(), self.what))
        })
    }
}

/// Parses and validates a chain; `source_name` appears in error messages.
pub fn parse_ctmc(text: &str, source_name: &str) -> Result<Ctmc> {
    let file: CtmcFile = parse_json(text, source_name)?;
    let names: Vec<String> = file.states.iter().map(|s| s.id.clone()).collect();
    let ids = Names::new("state", &names)?;
    let n = names.len();
    let mut jump = nalgebra::DMatrix::zeros(n, n);
    for (i, t) in file.transitions.iter().enumerate() {
        let from = ids.get(&t.from, || format!("transitions[{i}].from"))?;
        let to = ids.get(&t.to, || format!("transitions[{i}].to"))?;
        if !(t.prob.is_finite() && t.prob >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "transitions[{i}].prob: {} is not a probability",
                t.prob
            )));
        }
        jump[(from, to)] += t.prob;
    }
    let initial = ids.get(&file.initial, || "initial".into())?;
    let labels: Vec<Label> = file
        .states
        .iter()
        .map(|s| s.labels.iter().cloned().collect())
        .collect();
    let rates = file.states.iter().map(|s| s.rate).collect();
    Ctmc::new(names, labels, jump, rates, initial)
}

/// Parses an automaton and checks it with [`validate_dta`]. The automaton is
/// returned as written; engines apply the validator's normalization.
pub fn parse_dta(text: &str, source_name: &str) -> Result<Dta> {
    let file: DtaFile = parse_json(text, source_name)?;
    let clocks = Names::new("clock", &file.clocks)?;
    let locs = Names::new("location", &file.locations)?;
    let set = |names: &[String], field: &str| -> Result<BTreeSet<usize>> {
        names
            .iter()
            .map(|n| locs.get(n, || field.to_string()))
            .collect()
    };
    let acceptance = match &file.acceptance {
        AcceptanceEntry::Finite { locations } => {
            Acceptance::Finite(set(locations, "acceptance.locations")?)
        }
        AcceptanceEntry::Muller { family } => Acceptance::Muller(
            family
                .iter()
                .enumerate()
                .map(|(i, f)| set(f, &format!("acceptance.family[{i}]")))
                .collect::<Result<_>>()?,
        ),
    };
    let mut edges = Vec::with_capacity(file.edges.len());
    for (i, e) in file.edges.iter().enumerate() {
        let atoms = e
            .guard
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let clock = ClockId(clocks.get(&a.clock, || format!("edges[{i}].guard[{j}].clock"))?);
                let op = Comparator::parse(&a.op).ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "edges[{i}].guard[{j}].op: expected one of <, <=, >, >=, got {:?}",
                        a.op
                    ))
                })?;
                Ok(Atom {
                    clock,
                    op,
                    constant: a.constant,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let resets = e
            .resets
            .iter()
            .enumerate()
            .map(|(j, x)| Ok(ClockId(clocks.get(x, || format!("edges[{i}].resets[{j}]"))?)))
            .collect::<Result<Vec<_>>>()?;
        edges.push(DtaEdge {
            from: locs.get(&e.from, || format!("edges[{i}].from"))?,
            symbol: e.symbol.iter().cloned().collect(),
            guard: ClockConstraint::new(atoms),
            resets,
            to: locs.get(&e.to, || format!("edges[{i}].to"))?,
        });
    }
    let initial = locs.get(&file.initial, || "initial".into())?;
    let dta = Dta::new(file.clocks, file.locations, initial, acceptance, edges)?;
    validate_dta(&dta)?;
    Ok(dta)
}

pub fn load_ctmc(path: impl AsRef<Path>) -> Result<Ctmc> {
    let path = path.as_ref();
    parse_ctmc(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn load_dta(path: impl AsRef<Path>) -> Result<Dta> {
    let path = path.as_ref();
    parse_dta(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn ctmc_to_json(c: &Ctmc) -> String {
    let states = (0..c.num_states())
        .map(|s| StateEntry {
            id: c.name(s).to_string(),
            labels: c.label(s).iter().cloned().collect(),
            rate: c.rate(s),
        })
        .collect();
    let transitions = (0..c.num_states())
        .flat_map(|s| {
            c.successors(s).map(move |(t, p)| TransitionEntry {
                from: c.name(s).to_string(),
                to: c.name(t).to_string(),
                prob: p,
            })
        })
        .collect();
    let file = CtmcFile {
        states,
        initial: c.name(c.initial()).to_string(),
        transitions,
    };
    serde_json::to_string_pretty(&file).expect("chain serializes")
}

pub fn dta_to_json(a: &Dta) -> String {
    let loc = |q: usize| a.locations()[q].clone();
    let clock = |x: ClockId| a.clocks()[x.0].clone();
    let names = |set: &BTreeSet<usize>| set.iter().map(|&q| loc(q)).collect();
    let acceptance = match a.acceptance() {
        Acceptance::Finite(f) => AcceptanceEntry::Finite { locations: names(f) },
        Acceptance::Muller(fam) => AcceptanceEntry::Muller {
            family: fam.iter().map(names).collect(),
        },
    };
    let edges = a
        .edges()
        .iter()
        .map(|e| EdgeEntry {
            from: loc(e.from),
            symbol: e.symbol.iter().cloned().collect(),
            guard: e
                .guard
                .atoms()
                .iter()
                .map(|at| AtomEntry {
                    clock: clock(at.clock),
                    op: at.op.as_str().to_string(),
                    constant: at.constant,
                })
                .collect(),
            resets: e.resets.iter().map(|&x| clock(x)).collect(),
            to: loc(e.to),
        })
        .collect();
    let file = DtaFile {
        clocks: a.clocks().to_vec(),
        locations: a.locations().to_vec(),
        initial: loc(a.initial()),
        acceptance,
        edges,
    };
    serde_json::to_string_pretty(&file).expect("automaton serializes")
}

pub fn save_ctmc(c: &Ctmc, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, ctmc_to_json(c) + "\n")?)
}

pub fn save_dta(a: &Dta, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, dta_to_json(a) + "\n")?)
}
