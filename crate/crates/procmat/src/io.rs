//! File formats: JSON for tensors, unitaries, processes and circuits
//! (bit-exact float round-trips), CSV with exact rationals for
//! correlations.

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causality::{Correlation, Q};
use crate::circuit::{Gate, TemporalCircuit};
use crate::process::{PartySpec, ProcessVector};
use crate::tensor::{LabeledTensor, SystemLabel, UnitaryBlock, C64, DEFAULT_TOL};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Process(#[from] crate::process::ProcessError),
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
    #[error("csv parse error on line {line}: {what}")]
    Csv { line: usize, what: String },
    #[error("correlation shape: {0}")]
    Correlation(String),
}

type Result<T> = std::result::Result<T, IoError>;

#[derive(Serialize, Deserialize)]
pub struct TensorJson {
    pub labels: Vec<SystemLabel>,
    pub amps: Vec<(f64, f64)>,
}

pub fn tensor_to_json(t: &LabeledTensor) -> TensorJson {
    TensorJson {
        labels: t.labels().to_vec(),
        amps: t.amps().iter().map(|a| (a.re, a.im)).collect(),
    }
}

pub fn tensor_from_json(j: &TensorJson) -> Result<LabeledTensor> {
    Ok(LabeledTensor::new(
        j.labels.clone(),
        j.amps.iter().map(|&(re, im)| C64::new(re, im)).collect(),
    )?)
}

#[derive(Serialize, Deserialize)]
pub struct UnitaryJson {
    #[serde(rename = "in")]
    pub in_labels: Vec<SystemLabel>,
    #[serde(rename = "out")]
    pub out_labels: Vec<SystemLabel>,
    /// rows over the output space, columns over the input space
    pub matrix: Vec<Vec<(f64, f64)>>,
}

pub fn block_to_json(u: &UnitaryBlock) -> UnitaryJson {
    let n = u.in_dim();
    UnitaryJson {
        in_labels: u.in_labels.clone(),
        out_labels: u.out_labels.clone(),
        matrix: (0..u.out_dim())
            .map(|r| {
                (0..n)
                    .map(|c| {
                        let v = u.matrix[r * n + c];
                        (v.re, v.im)
                    })
                    .collect()
            })
            .collect(),
    }
}

pub fn block_from_json(j: &UnitaryJson) -> Result<UnitaryBlock> {
    let mut matrix = Vec::new();
    for row in &j.matrix {
        for &(re, im) in row {
            matrix.push(C64::new(re, im));
        }
    }
    Ok(UnitaryBlock::new_raw(
        j.in_labels.clone(),
        j.out_labels.clone(),
        matrix,
    )?)
}

#[derive(Serialize, Deserialize)]
pub struct PartyJson {
    pub name: String,
    #[serde(rename = "in")]
    pub in_labels: Vec<SystemLabel>,
    #[serde(rename = "out")]
    pub out_labels: Vec<SystemLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anc_in: Option<SystemLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anc_out: Option<SystemLabel>,
}

#[derive(Serialize, Deserialize)]
pub struct ProcessJson {
    pub tensor: TensorJson,
    pub parties: Vec<PartyJson>,
    pub past: Vec<SystemLabel>,
    pub future: Vec<SystemLabel>,
}

pub fn process_to_json(u: &ProcessVector) -> ProcessJson {
    ProcessJson {
        tensor: tensor_to_json(u.tensor()),
        parties: u
            .parties()
            .iter()
            .map(|p| PartyJson {
                name: p.name.clone(),
                in_labels: p.in_labels.clone(),
                out_labels: p.out_labels.clone(),
                anc_in: p.anc_in.clone(),
                anc_out: p.anc_out.clone(),
            })
            .collect(),
        past: u.past().to_vec(),
        future: u.future().to_vec(),
    }
}

pub fn process_from_json(j: &ProcessJson, tol: f64) -> Result<ProcessVector> {
    let tensor = tensor_from_json(&j.tensor)?;
    let parties = j
        .parties
        .iter()
        .map(|p| {
            let mut spec = PartySpec::new(&p.name, p.in_labels.clone(), p.out_labels.clone());
            spec.anc_in = p.anc_in.clone();
            spec.anc_out = p.anc_out.clone();
            spec
        })
        .collect();
    Ok(ProcessVector::new(
        tensor,
        parties,
        j.past.clone(),
        j.future.clone(),
        tol,
    )?)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateJson {
    Unitary {
        block: UnitaryJson,
    },
    ControlledPair {
        branch0: UnitaryJson,
        branch1: UnitaryJson,
        control_in: SystemLabel,
        control_out: SystemLabel,
    },
    Prepare {
        wire: SystemLabel,
        state: Vec<(f64, f64)>,
    },
    Project {
        wire: SystemLabel,
        state: Vec<(f64, f64)>,
    },
    TraceOut {
        wire: SystemLabel,
    },
}

#[derive(Serialize, Deserialize)]
pub struct CircuitJson {
    pub gates: Vec<GateJson>,
    pub external_in: Vec<SystemLabel>,
    pub external_out: Vec<SystemLabel>,
}

fn state_to_json(v: &[C64]) -> Vec<(f64, f64)> {
    v.iter().map(|a| (a.re, a.im)).collect()
}

fn state_from_json(v: &[(f64, f64)]) -> Vec<C64> {
    v.iter().map(|&(re, im)| C64::new(re, im)).collect()
}

pub fn circuit_to_json(c: &TemporalCircuit) -> CircuitJson {
    CircuitJson {
        gates: c
            .gates
            .iter()
            .map(|g| match g {
                Gate::Unitary(b) => GateJson::Unitary {
                    block: block_to_json(b),
                },
                Gate::ControlledPair {
                    branch0,
                    branch1,
                    control_in,
                    control_out,
                } => GateJson::ControlledPair {
                    branch0: block_to_json(branch0),
                    branch1: block_to_json(branch1),
                    control_in: control_in.clone(),
                    control_out: control_out.clone(),
                },
                Gate::Prepare { wire, state } => GateJson::Prepare {
                    wire: wire.clone(),
                    state: state_to_json(state),
                },
                Gate::Project { wire, state } => GateJson::Project {
                    wire: wire.clone(),
                    state: state_to_json(state),
                },
                Gate::TraceOut { wire } => GateJson::TraceOut { wire: wire.clone() },
            })
            .collect(),
        external_in: c.external_in.clone(),
        external_out: c.external_out.clone(),
    }
}

pub fn circuit_from_json(j: &CircuitJson) -> Result<TemporalCircuit> {
    let gates = j
        .gates
        .iter()
        .map(|g| {
            Ok(match g {
                GateJson::Unitary { block } => Gate::Unitary(block_from_json(block)?),
                GateJson::ControlledPair {
                    branch0,
                    branch1,
                    control_in,
                    control_out,
                } => Gate::ControlledPair {
                    branch0: block_from_json(branch0)?,
                    branch1: block_from_json(branch1)?,
                    control_in: control_in.clone(),
                    control_out: control_out.clone(),
                },
                GateJson::Prepare { wire, state } => Gate::Prepare {
                    wire: wire.clone(),
                    state: state_from_json(state),
                },
                GateJson::Project { wire, state } => Gate::Project {
                    wire: wire.clone(),
                    state: state_from_json(state),
                },
                GateJson::TraceOut { wire } => Gate::TraceOut { wire: wire.clone() },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TemporalCircuit::new(
        gates,
        j.external_in.clone(),
        j.external_out.clone(),
    )?)
}

/// Correlation rows as CSV: `i_A,…,o_A,…,p` with exact `num/den` rationals.
pub fn correlation_to_csv(c: &Correlation) -> String {
    let names = ["A", "B", "C", "D"];
    let mut header: Vec<String> = (0..c.parties()).map(|k| format!("i_{}", names[k])).collect();
    header.extend((0..c.parties()).map(|k| format!("o_{}", names[k])));
    header.push("p".into());
    let mut out = header.join(",");
    out.push('\n');
    let n_out = c.n_out();
    for i in 0..c.n_in() {
        let i_digits = digits(i, &c.in_cards);
        for o in 0..n_out {
            let p = &c.probs[i * n_out + o];
            if p.to_string() == "0" {
                continue;
            }
            let o_digits = digits(o, &c.out_cards);
            let mut row: Vec<String> = i_digits.iter().map(|d| d.to_string()).collect();
            row.extend(o_digits.iter().map(|d| d.to_string()));
            row.push(rational_str(p));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn rational_str(p: &Q) -> String {
    if p.denom() == &num_bigint::BigInt::from(1) {
        format!("{}", p.numer())
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

fn digits(mut lin: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; cards.len()];
    for k in (0..cards.len()).rev() {
        out[k] = lin % cards[k];
        lin /= cards[k];
    }
    out
}

/// Parse the CSV format written by [`correlation_to_csv`]. The party count
/// is read off the header; missing rows are zeros.
pub fn correlation_from_csv(text: &str) -> Result<Correlation> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(IoError::Csv {
        line: 0,
        what: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    let n_in = cols.iter().filter(|c| c.starts_with("i_")).count();
    let n_out = cols.iter().filter(|c| c.starts_with("o_")).count();
    if n_in == 0 || n_in != n_out || cols.len() != n_in + n_out + 1 {
        return Err(IoError::Csv {
            line: 1,
            what: format!("unexpected header `{header}`"),
        });
    }
    let cells_in = 1usize << n_in;
    let cells_out = 1usize << n_out;
    let mut probs = vec![Q::from_integer(0.into()); cells_in * cells_out];
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if parts.len() != n_in + n_out + 1 {
            return Err(IoError::Csv {
                line: lineno + 1,
                what: "wrong column count".into(),
            });
        }
        let parse_bit = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&b| b < 2)
                .ok_or(IoError::Csv {
                    line: lineno + 1,
                    what: format!("bad setting/outcome `{s}`"),
                })
        };
        let mut i = 0usize;
        for part in &parts[..n_in] {
            i = i * 2 + parse_bit(part)?;
        }
        let mut o = 0usize;
        for part in &parts[n_in..n_in + n_out] {
            o = o * 2 + parse_bit(part)?;
        }
        let p = BigRational::from_str(parts[n_in + n_out]).map_err(|e| IoError::Csv {
            line: lineno + 1,
            what: format!("bad rational: {e}"),
        })?;
        probs[i * cells_out + o] = p;
    }
    Correlation::new(vec![2; n_in], vec![2; n_out], probs)
        .map_err(|e| IoError::Correlation(e.to_string()))
}

/// Convenience: parse a process file, defaulting the tolerance.
pub fn read_process(text: &str) -> Result<ProcessVector> {
    let j: ProcessJson = serde_json::from_str(text)?;
    process_from_json(&j, DEFAULT_TOL.max(1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::catalog;
    use crate::rng::{random_tensor, seeded};

    #[test]
    fn tensor_json_round_trip_is_bit_exact() {
        let mut rng = seeded(61);
        let t = random_tensor(
            &mut rng,
            vec![SystemLabel::new("A", 2), SystemLabel::new("B", 3)],
        );
        let text = serde_json::to_string(&tensor_to_json(&t)).unwrap();
        let parsed: TensorJson = serde_json::from_str(&text).unwrap();
        let back = tensor_from_json(&parsed).unwrap();
        assert_eq!(back.amps(), t.amps());
        assert_eq!(back.labels(), t.labels());
    }

    #[test]
    fn unitary_json_round_trip_is_bit_exact() {
        let mut rng = seeded(62);
        let u = crate::rng::random_unitary_block(
            &mut rng,
            vec![SystemLabel::new("X", 3)],
            vec![SystemLabel::new("Y", 3)],
        );
        let text = serde_json::to_string(&block_to_json(&u)).unwrap();
        let parsed: UnitaryJson = serde_json::from_str(&text).unwrap();
        let back = block_from_json(&parsed).unwrap();
        assert_eq!(back.matrix, u.matrix);
    }

    #[test]
    fn process_json_round_trip() {
        let u = catalog::make_switch().unwrap();
        let text = serde_json::to_string(&process_to_json(&u)).unwrap();
        let back = read_process(&text).unwrap();
        assert_eq!(back.tensor().amps(), u.tensor().amps());
        assert_eq!(back.parties().len(), 2);
    }

    #[test]
    fn circuit_json_round_trip_preserves_simulation() {
        let ua = catalog::ci_strategy("A", 0);
        let ub = catalog::ci_strategy("B", 1);
        let uc = catalog::ci_strategy("C", 1);
        let (circuit, _) = crate::bw::build_bw_circuit(&ua, &ub, &uc).unwrap();
        let text = serde_json::to_string(&circuit_to_json(&circuit)).unwrap();
        let parsed: CircuitJson = serde_json::from_str(&text).unwrap();
        let back = circuit_from_json(&parsed).unwrap();
        let s1 = circuit.simulate_choi().unwrap().choi;
        let s2 = back.simulate_choi().unwrap().choi;
        assert!(s1.max_diff(&s2).unwrap() == 0.0);
    }

    #[test]
    fn correlation_csv_round_trip() {
        let c = Correlation::deterministic(3, |i| {
            vec![(1 - i[1]) & i[2], (1 - i[2]) & i[0], (1 - i[0]) & i[1]]
        });
        let text = correlation_to_csv(&c);
        assert!(text.starts_with("i_A,i_B,i_C,o_A,o_B,o_C,p\n"));
        let back = correlation_from_csv(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn correlation_csv_keeps_exact_rationals() {
        let c = Correlation::uniform(2);
        let text = correlation_to_csv(&c);
        assert!(text.contains("1/4"));
        let back = correlation_from_csv(&text).unwrap();
        assert_eq!(back, c);
    }
}
