use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Name reserved for the exact full adder.
pub const EXACT_MODEL: &str = "exact";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
    Xnor,
    Nand,
    Nor,
}

impl GateKind {
    fn eval(self, inputs: &[bool]) -> bool {
        let and = || inputs.iter().all(|&b| b);
        let or = || inputs.iter().any(|&b| b);
        let xor = || inputs.iter().fold(false, |acc, &b| acc ^ b);
        match self {
            GateKind::And => and(),
            GateKind::Or => or(),
            GateKind::Not => !inputs[0],
            GateKind::Xor => xor(),
            GateKind::Xnor => !xor(),
            GateKind::Nand => !and(),
            GateKind::Nor => !or(),
        }
    }
}

/// One gate of a netlist. `inputs` name either a primary input (`a`, `b`,
/// `cin`) or the `out` of an earlier gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub out: String,
    pub gate: GateKind,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    pub gates: Vec<Gate>,
    /// Signal driving the sum output.
    pub sum: String,
    /// Signal driving the carry output.
    pub cout: String,
}

impl Netlist {
    /// Evaluates the netlist for one input combination. Signals must be
    /// defined before use.
    pub fn eval(&self, a: bool, b: bool, cin: bool) -> Result<(bool, bool)> {
        let mut signals: HashMap<&str, bool> = HashMap::new();
        signals.insert("a", a);
        signals.insert("b", b);
        signals.insert("cin", cin);
        for g in &self.gates {
            let arity_ok = match g.gate {
                GateKind::Not => g.inputs.len() == 1,
                _ => g.inputs.len() >= 2,
            };
            if !arity_ok {
                return Err(Error::config(format!(
                    "gate `{}` ({:?}) has {} inputs",
                    g.out,
                    g.gate,
                    g.inputs.len()
                )));
            }
            let ins = g
                .inputs
                .iter()
                .map(|name| {
                    signals.get(name.as_str()).copied().ok_or_else(|| {
                        Error::config(format!("gate `{}` reads undefined signal `{name}`", g.out))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if signals.insert(g.out.as_str(), g.gate.eval(&ins)).is_some() {
                return Err(Error::config(format!("signal `{}` driven twice", g.out)));
            }
        }
        let read = |name: &str| {
            signals
                .get(name)
                .copied()
                .ok_or_else(|| Error::config(format!("output reads undefined signal `{name}`")))
        };
        Ok((read(&self.sum)?, read(&self.cout)?))
    }
}

/// Index of the table row for `(a, b, cin)`; rows run 000, 001, ..., 111.
#[inline]
pub(crate) fn row_index(a: bool, b: bool, cin: bool) -> usize {
    ((a as usize) << 2) | ((b as usize) << 1) | cin as usize
}

fn exact_row(row: usize) -> (bool, bool) {
    let (a, b, c) = (row & 4 != 0, row & 2 != 0, row & 1 != 0);
    (a ^ b ^ c, (a & b) | (a & c) | (b & c))
}

/// A one-bit full adder: truth table plus optional netlist and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAdderModel {
    name: String,
    table: [(bool, bool); 8],
    netlist: Option<Netlist>,
    cost: f64,
    transistor_count: Option<u32>,
}

impl FullAdderModel {
    /// Builds and validates a model. A present netlist must reproduce the
    /// table on all 8 rows, and the model named [`EXACT_MODEL`] must be an
    /// exact full adder.
    pub fn new(
        name: impl Into<String>,
        table: [(bool, bool); 8],
        netlist: Option<Netlist>,
        cost: f64,
        transistor_count: Option<u32>,
    ) -> Result<Self> {
        let name = name.into();
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::config(format!(
                "model `{name}`: cost must be >= 0, got {cost}"
            )));
        }
        let model = FullAdderModel {
            name,
            table,
            netlist,
            cost,
            transistor_count,
        };
        if let Some(row) = model.netlist_mismatch()? {
            return Err(Error::config(format!(
                "model `{}`: netlist disagrees with truth table at row {row:03b}",
                model.name
            )));
        }
        if model.name == EXACT_MODEL && !model.is_exact() {
            return Err(Error::config("model `exact` is not an exact full adder"));
        }
        Ok(model)
    }

    /// The textbook full adder, `sum = a^b^cin`, `cout = maj(a, b, cin)`.
    pub fn exact(cost: f64) -> Self {
        let table = std::array::from_fn(exact_row);
        FullAdderModel {
            name: EXACT_MODEL.to_string(),
            table,
            netlist: None,
            cost,
            transistor_count: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &[(bool, bool); 8] {
        &self.table
    }

    pub fn netlist(&self) -> Option<&Netlist> {
        self.netlist.as_ref()
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn transistor_count(&self) -> Option<u32> {
        self.transistor_count
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }

    pub fn is_exact(&self) -> bool {
        (0..8).all(|row| self.table[row] == exact_row(row))
    }

    /// Number of rows (out of 8) whose sum or carry differs from exact.
    pub fn erroneous_rows(&self) -> usize {
        (0..8)
            .filter(|&row| self.table[row] != exact_row(row))
            .count()
    }

    /// First row at which netlist and table disagree, if any.
    pub fn netlist_mismatch(&self) -> Result<Option<usize>> {
        let Some(net) = &self.netlist else {
            return Ok(None);
        };
        for row in 0..8 {
            let got = net.eval(row & 4 != 0, row & 2 != 0, row & 1 != 0)?;
            if got != self.table[row] {
                return Ok(Some(row));
            }
        }
        Ok(None)
    }

    #[inline]
    pub fn eval(&self, a: bool, b: bool, cin: bool) -> (bool, bool) {
        self.table[row_index(a, b, cin)]
    }
}

/// `fa_eval` over `0/1` integers, for callers working with bit values.
pub fn fa_eval(model: &FullAdderModel, a: u8, b: u8, cin: u8) -> (u8, u8) {
    let (s, c) = model.eval(a != 0, b != 0, cin != 0);
    (s as u8, c as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_netlist() -> Netlist {
        let g = |out: &str, gate, ins: &[&str]| Gate {
            out: out.into(),
            gate,
            inputs: ins.iter().map(|s| s.to_string()).collect(),
        };
        Netlist {
            gates: vec![
                g("x1", GateKind::Xor, &["a", "b"]),
                g("s", GateKind::Xor, &["x1", "cin"]),
                g("g", GateKind::And, &["a", "b"]),
                g("p", GateKind::And, &["x1", "cin"]),
                g("c", GateKind::Or, &["g", "p"]),
            ],
            sum: "s".into(),
            cout: "c".into(),
        }
    }

    #[test]
    fn exact_identities() {
        let m = FullAdderModel::exact(1.0);
        assert_eq!(fa_eval(&m, 1, 1, 0), (0, 1));
        assert_eq!(fa_eval(&m, 0, 0, 0), (0, 0));
        assert_eq!(fa_eval(&m, 1, 1, 1), (1, 1));
        assert!(m.is_exact());
        assert_eq!(m.erroneous_rows(), 0);
    }

    #[test]
    fn netlist_must_match_table() {
        let table = *FullAdderModel::exact(1.0).table();
        assert!(FullAdderModel::new("exact", table, Some(exact_netlist()), 1.0, None).is_ok());
        let mut bad = table;
        bad[3] = (true, true);
        let err = FullAdderModel::new("x", bad, Some(exact_netlist()), 1.0, None).unwrap_err();
        assert!(err.to_string().contains("row 011"), "{err}");
    }

    #[test]
    fn exact_name_is_reserved() {
        let mut table = *FullAdderModel::exact(1.0).table();
        table[0] = (true, false);
        assert!(FullAdderModel::new("exact", table, None, 1.0, None).is_err());
        assert!(FullAdderModel::new("other", table, None, 1.0, None).is_ok());
    }

    #[test]
    fn netlist_rejects_undefined_and_bad_arity() {
        let mut net = exact_netlist();
        net.gates[1].inputs[0] = "nope".into();
        assert!(net.eval(false, false, false).is_err());
        let mut net = exact_netlist();
        net.gates[0].gate = GateKind::Not;
        assert!(net.eval(false, false, false).is_err());
    }

    #[test]
    fn negative_cost_rejected() {
        let table = *FullAdderModel::exact(1.0).table();
        assert!(FullAdderModel::new("m", table, None, -1.0, None).is_err());
    }
}
