//! Tensor-network circuit topologies (QMPS, QTTN, QMERA) as gate layouts.
//!
//! All three are built from the same two-qubit block: an RY rotation on each
//! qubit of the pair followed by a CNOT. Parameter slots are numbered in gate
//! declaration order.

use std::fmt;

use crate::error::{Error, Result};

/// Where a rotation gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleSource {
    /// Index into the bound parameter vector.
    Param(usize),
    /// Fixed angle baked into the layout.
    Fixed(f64),
}

/// One gate slot in a layout; rotations may reference a parameter slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateSlot {
    Ry { qubit: usize, angle: AngleSource },
    Rz { qubit: usize, angle: AngleSource },
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Qmps,
    Qttn,
    Qmera,
    /// Hand-assembled layout; used by tests and small fixtures.
    Custom,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Topology::Qmps => "QMPS",
            Topology::Qttn => "QTTN",
            Topology::Qmera => "QMERA",
            Topology::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// Ordered gate list realizing one of the tensor-network topologies.
///
/// Invariants: parameter slots are exactly `0..param_count`, each used once,
/// and every target index is below `n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitLayout {
    pub n_qubits: usize,
    pub gates: Vec<GateSlot>,
    pub param_count: usize,
    pub topology: Topology,
}

impl CircuitLayout {
    /// Builds a custom layout, validating slot and target invariants.
    pub fn custom(n_qubits: usize, gates: Vec<GateSlot>, param_count: usize) -> Self {
        let layout = CircuitLayout {
            n_qubits,
            gates,
            param_count,
            topology: Topology::Custom,
        };
        layout.validate().expect("invalid custom layout");
        layout
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.param_count];
        for gate in &self.gates {
            match *gate {
                GateSlot::Ry { qubit, angle } | GateSlot::Rz { qubit, angle } => {
                    if qubit >= self.n_qubits {
                        return Err(Error::usage(format!(
                            "gate qubit {qubit} out of range for {} qubits",
                            self.n_qubits
                        )));
                    }
                    if let AngleSource::Param(slot) = angle {
                        if slot >= self.param_count || seen[slot] {
                            return Err(Error::usage(format!(
                                "parameter slot {slot} out of range or reused"
                            )));
                        }
                        seen[slot] = true;
                    }
                }
                GateSlot::Cnot { control, target } => {
                    if control >= self.n_qubits || target >= self.n_qubits || control == target {
                        return Err(Error::usage(format!(
                            "bad CNOT targets ({control}, {target})"
                        )));
                    }
                }
            }
        }
        if seen.iter().any(|&used| !used) {
            return Err(Error::usage("unused parameter slot".to_string()));
        }
        Ok(())
    }

    /// Human-readable dump used by the CLI `param-count` command.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "{} on {} qubits, {} parameters\n",
            self.topology, self.n_qubits, self.param_count
        );
        for gate in &self.gates {
            match *gate {
                GateSlot::Ry { qubit, angle } => {
                    out.push_str(&format!("  RY q{qubit} {}\n", describe_angle(angle)))
                }
                GateSlot::Rz { qubit, angle } => {
                    out.push_str(&format!("  RZ q{qubit} {}\n", describe_angle(angle)))
                }
                GateSlot::Cnot { control, target } => {
                    out.push_str(&format!("  CNOT q{control} -> q{target}\n"))
                }
            }
        }
        out
    }
}

fn describe_angle(angle: AngleSource) -> String {
    match angle {
        AngleSource::Param(slot) => format!("theta[{slot}]"),
        AngleSource::Fixed(v) => format!("fixed({v})"),
    }
}

struct LayoutBuilder {
    gates: Vec<GateSlot>,
    next_slot: usize,
}

impl LayoutBuilder {
    fn new() -> Self {
        LayoutBuilder {
            gates: Vec::new(),
            next_slot: 0,
        }
    }

    /// RY on both qubits of the pair, then CNOT(control -> target).
    fn block(&mut self, control: usize, target: usize) {
        self.gates.push(GateSlot::Ry {
            qubit: control,
            angle: AngleSource::Param(self.next_slot),
        });
        self.gates.push(GateSlot::Ry {
            qubit: target,
            angle: AngleSource::Param(self.next_slot + 1),
        });
        self.next_slot += 2;
        self.gates.push(GateSlot::Cnot { control, target });
    }

    fn finish(self, n_qubits: usize, topology: Topology) -> CircuitLayout {
        let layout = CircuitLayout {
            n_qubits,
            gates: self.gates,
            param_count: self.next_slot,
            topology,
        };
        debug_assert!(layout.validate().is_ok());
        layout
    }
}

/// Matrix-product-state staircase: blocks on (i, i+1) per layer.
///
/// Parameter count is `n_layers * 2 * (n_qubits - 1)`.
pub fn build_qmps(n_qubits: usize, n_layers: usize) -> Result<CircuitLayout> {
    if n_qubits < 2 || n_qubits > crate::qsim::MAX_QUBITS {
        return Err(Error::config(format!(
            "QMPS needs 2..={} qubits, got {n_qubits}",
            crate::qsim::MAX_QUBITS
        )));
    }
    if n_layers < 1 {
        return Err(Error::config("QMPS needs at least 1 layer".to_string()));
    }
    let mut b = LayoutBuilder::new();
    for _ in 0..n_layers {
        for i in 0..n_qubits - 1 {
            b.block(i, i + 1);
        }
    }
    Ok(b.finish(n_qubits, Topology::Qmps))
}

/// Binary-tree coarse-graining. At level `l` the surviving qubits sit at
/// multiples of `2^l`; each block merges (base, base + 2^l) with the lower
/// index surviving as the parent, so the final root is qubit 0.
///
/// Parameter count is `2 * (n_qubits - 1)`.
pub fn build_qttn(n_qubits: usize) -> Result<CircuitLayout> {
    check_power_of_two(n_qubits, 2, "QTTN")?;
    let mut b = LayoutBuilder::new();
    let levels = n_qubits.trailing_zeros() as usize;
    for level in 0..levels {
        let stride = 1usize << level;
        for k in 0..n_qubits / (stride * 2) {
            let parent = 2 * stride * k;
            b.block(parent + stride, parent);
        }
    }
    Ok(b.finish(n_qubits, Topology::Qttn))
}

/// QTTN tree with a disentangler row before each tree level. Disentanglers
/// bridge adjacent branches: at level `l` they act on pairs shifted by `2^l`
/// relative to the tree blocks.
pub fn build_qmera(n_qubits: usize) -> Result<CircuitLayout> {
    check_power_of_two(n_qubits, 4, "QMERA")?;
    let mut b = LayoutBuilder::new();
    let levels = n_qubits.trailing_zeros() as usize;
    for level in 0..levels {
        let stride = 1usize << level;
        let pairs = n_qubits / (stride * 2);
        // disentangler row bridging branch boundaries
        for k in 0..pairs.saturating_sub(1) {
            let a = stride * (2 * k + 1);
            let c = stride * (2 * k + 2);
            b.block(a, c);
        }
        // tree level
        for k in 0..pairs {
            let parent = 2 * stride * k;
            b.block(parent + stride, parent);
        }
    }
    Ok(b.finish(n_qubits, Topology::Qmera))
}

fn check_power_of_two(n_qubits: usize, min: usize, name: &str) -> Result<()> {
    if n_qubits < min || !n_qubits.is_power_of_two() || n_qubits > crate::qsim::MAX_QUBITS {
        return Err(Error::config(format!(
            "{name} needs a power-of-two qubit count in {min}..={}, got {n_qubits}",
            crate::qsim::MAX_QUBITS
        )));
    }
    Ok(())
}

/// Number of distinct parameter slots in a layout.
pub fn param_count(layout: &CircuitLayout) -> usize {
    layout.param_count
}
