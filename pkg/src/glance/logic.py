"""Differentiable two-input logic gates.

Each logic neuron reads two fixed, randomly wired input columns, squashes
them to [0, 1] and outputs a softmax-weighted mixture of the 16 real-valued
relaxations of the binary Boolean functions.  Every relaxation is affine in
(1, a, b, ab), so the mixture collapses to four per-neuron coefficients.

  id  gate           relaxation          00 01 10 11
   0  ZERO           0                    0  0  0  0
   1  AND            ab                   0  0  0  1
   2  A_AND_NOT_B    a - ab               0  0  1  0
   3  A              a                    0  0  1  1
   4  NOT_A_AND_B    b - ab               0  1  0  0
   5  B              b                    0  1  0  1
   6  XOR            a + b - 2ab          0  1  1  0
   7  OR             a + b - ab           0  1  1  1
   8  NOR            1 - (a + b - ab)     1  0  0  0
   9  XNOR           1 - (a + b - 2ab)    1  0  0  1
  10  NOT_B          1 - b                1  0  1  0
  11  A_OR_NOT_B     1 - b + ab           1  0  1  1
  12  NOT_A          1 - a                1  1  0  0
  13  NOT_A_OR_B     1 - a + ab           1  1  0  1
  14  NAND           1 - ab               1  1  1  0
  15  ONE            1                    1  1  1  1

(columns are the outputs at (a, b) = 00, 01, 10, 11)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, ValidationError
from .tensor import Tensor

GATE_NAMES = (
    "ZERO", "AND", "A_AND_NOT_B", "A", "NOT_A_AND_B", "B", "XOR", "OR",
    "NOR", "XNOR", "NOT_B", "A_OR_NOT_B", "NOT_A", "NOT_A_OR_B", "NAND", "ONE",
)
NUM_GATES = len(GATE_NAMES)

# coefficients of (1, a, b, ab) for each gate, in GATE_NAMES order
GATE_COEFFICIENTS = np.array([
    [0, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 1, 0, -1],
    [0, 1, 0, 0],
    [0, 0, 1, -1],
    [0, 0, 1, 0],
    [0, 1, 1, -2],
    [0, 1, 1, -1],
    [1, -1, -1, 1],
    [1, -1, -1, 2],
    [1, 0, -1, 0],
    [1, 0, -1, 1],
    [1, -1, 0, 0],
    [1, -1, 0, 1],
    [1, 0, 0, -1],
    [1, 0, 0, 0],
], dtype=np.float64)
GATE_COEFFICIENTS.flags.writeable = False


def gate_value(gate: int, a, b):
    """Relaxed output of a single gate (works on floats or arrays)."""
    c0, c1, c2, c3 = GATE_COEFFICIENTS[gate]
    return c0 + c1 * a + c2 * b + c3 * a * b


@dataclass
class LogicLayerParams:
    wiring: np.ndarray  # L x 2 input column indices, fixed
    gate_logits: Tensor  # L x 16
    input_width: int

    def __post_init__(self):
        w = np.asarray(self.wiring, dtype=np.int64).reshape(-1, 2)
        w.flags.writeable = False
        self.wiring = w
        if self.gate_logits.shape != (len(w), NUM_GATES):
            raise DimensionError(
                f"gate logits must be {len(w)} x {NUM_GATES}, got {self.gate_logits.shape}"
            )
        if len(w) and (w.min() < 0 or w.max() >= self.input_width):
            raise ValidationError(f"wiring indices must lie in [0, {self.input_width})")

    @property
    def num_neurons(self) -> int:
        return len(self.wiring)


def random_wiring(num_neurons: int, input_width: int, rng: np.random.Generator) -> np.ndarray:
    """Two input columns per neuron, drawn uniformly."""
    if num_neurons < 1 or input_width < 1:
        raise ValidationError("logic layer needs at least one neuron and one input")
    return rng.integers(0, input_width, size=(num_neurons, 2))


def logic_gates(a: Tensor, b: Tensor, gate_logits: Tensor) -> Tensor:
    """Mix the 16 gates over inputs already in [0, 1]; a, b are n x L."""
    if a.shape != b.shape or a.cols != gate_logits.rows:
        raise DimensionError(
            f"logic_gates: inputs {a.shape}, {b.shape} do not match {gate_logits.rows} neurons"
        )
    probs = T.softmax_rows(gate_logits)
    coef = T.transpose(T.matmul(probs, Tensor(GATE_COEFFICIENTS)))  # 4 x L
    c0, c1, c2, c3 = (T.row_select(coef, [r]) for r in range(4))
    out = T.add(T.mul_row(a, c1), T.mul_row(b, c2))
    out = T.add(out, T.mul_row(T.mul(a, b), c3))
    return T.add_row(out, c0)


def logic_forward(h: Tensor, params: LogicLayerParams) -> Tensor:
    if h.cols != params.input_width:
        raise DimensionError(
            f"logic layer wired for width {params.input_width}, got input {h.shape}"
        )
    s = T.sigmoid(h)
    a = T.col_select(s, params.wiring[:, 0])
    b = T.col_select(s, params.wiring[:, 1])
    return logic_gates(a, b, params.gate_logits)


def logic_loss(params: LogicLayerParams) -> Tensor:
    """Mean normalized entropy of the gate distributions, in [0, 1]."""
    return T.scale(T.mean(T.entropy_rows(params.gate_logits)), 1.0 / math.log(NUM_GATES))


def normalized_entropy(gate_logits: np.ndarray) -> np.ndarray:
    return T.entropy_rows(Tensor(gate_logits)).values[:, 0] / math.log(NUM_GATES)


def harden(params: LogicLayerParams) -> dict:
    """Discrete circuit: argmax gate per neuron (ties to lowest index) plus wiring."""
    logits = params.gate_logits.values if isinstance(params.gate_logits, Tensor) else params.gate_logits
    choice = np.argmax(logits, axis=1)
    return {
        "neurons": [
            {"gate": GATE_NAMES[int(g)], "inputs": [int(a), int(b)]}
            for g, (a, b) in zip(choice, params.wiring)
        ]
    }


def evaluate_circuit(circuit: dict, inputs: np.ndarray) -> np.ndarray:
    """Run a hardened circuit on Boolean input rows (n x width) -> n x L of {0,1}."""
    x = np.asarray(inputs)
    cols = []
    for neuron in circuit["neurons"]:
        gate = GATE_NAMES.index(neuron["gate"])
        a, b = neuron["inputs"]
        cols.append(gate_value(gate, x[:, a], x[:, b]))
    return np.rint(np.stack(cols, axis=1)).astype(np.int64)
