"""BDD-driven reversible-circuit synthesis with cost accounting.

Every internal BDD node is synthesized once (shared nodes are reused) onto a
fresh ancilla line initialized to 0, by XOR-composing its two disjoint
branch terms; children are synthesized first. With x the node's variable
line, f0/f1 the child results, and T the target line:

    child pattern            gates                                  cost
    low=0                    (no low term)
    low=1                    NOT(T), CNOT(x, T)                     1 + 1
    low=g                    TOFFOLI(-x, g, T)                      5
    high=0                   (no high term)
    high=1                   CNOT(x, T)                             1
    high=g                   TOFFOLI(+x, g, T)                      5
    low=0, high=1            none: the variable line itself is f

Since exactly one of x / not-x holds, the two terms never overlap and the
XOR accumulation realizes f = (not-x AND f0) OR (x AND f1). Primary-output
lines are marked non-garbage; every other line is garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bdd import FALSE, TRUE, BddManager
from .blif import Netlist, simulate

NOT = "t1"
CNOT = "t2"
TOFFOLI = "t3"

_KIND_BY_CONTROLS = {0: NOT, 1: CNOT, 2: TOFFOLI}


@dataclass(frozen=True)
class RevGate:
    controls: tuple[tuple[int, bool], ...]  # (line, positive polarity)
    target: int

    def __post_init__(self):
        if any(line == self.target for line, _ in self.controls):
            raise ValueError("gate target among controls")
        if len(self.controls) > 2:
            raise ValueError("at most two controls supported")

    @property
    def kind(self) -> str:
        return _KIND_BY_CONTROLS[len(self.controls)]

    def fires(self, state) -> bool:
        return all(state[line] == pol for line, pol in self.controls)


@dataclass
class ReversibleCircuit:
    lines: int
    line_names: list[str]
    constants: list[int | None]  # initial value for ancilla lines, None for inputs
    garbage: list[bool]
    output_names: list[str | None]  # primary-output name carried by a line
    gates: list[RevGate]

    def validate(self) -> None:
        assert len(self.line_names) == self.lines
        assert len(self.constants) == self.lines
        assert len(self.garbage) == self.lines
        assert len(self.output_names) == self.lines
        for g in self.gates:
            assert 0 <= g.target < self.lines
            for line, _ in g.controls:
                assert 0 <= line < self.lines
        for i, name in enumerate(self.output_names):
            if name is not None:
                assert not self.garbage[i]


@dataclass
class CostModel:
    not_cost: int = 1
    cnot_cost: int = 1
    toffoli_cost: int = 5
    toffoli_two_negative_cost: int = 6
    transistors_per_control: int = 8


def quantum_cost(circuit: ReversibleCircuit, model: CostModel = CostModel()) -> int:
    total = 0
    for g in circuit.gates:
        n_controls = len(g.controls)
        if n_controls == 0:
            total += model.not_cost
        elif n_controls == 1:
            total += model.cnot_cost
        else:
            negatives = sum(1 for _, pol in g.controls if not pol)
            if negatives == 2:
                total += model.toffoli_two_negative_cost
            else:
                total += model.toffoli_cost
    return total


def transistor_cost(circuit: ReversibleCircuit, model: CostModel = CostModel()) -> int:
    return sum(
        model.transistors_per_control * len(g.controls) for g in circuit.gates
    )


def simulate_reversible(circuit: ReversibleCircuit, assignment) -> list[int]:
    """Run the cascade; assignment supplies values for the non-constant lines."""
    state = []
    it = iter(assignment)
    for i in range(circuit.lines):
        if circuit.constants[i] is None:
            state.append(int(next(it)))
        else:
            state.append(circuit.constants[i])
    for g in circuit.gates:
        if g.fires(state):
            state[g.target] ^= 1
    return state


def apply_to_state(circuit: ReversibleCircuit, state) -> list[int]:
    """Run the cascade on a full line-state vector, ignoring constants."""
    out = [int(b) for b in state]
    for g in circuit.gates:
        if g.fires(out):
            out[g.target] ^= 1
    return out


def synthesize(
    manager: BddManager, roots, netlist: Netlist
) -> ReversibleCircuit:
    """Map the BDDs under `roots` to a NOT/CNOT/Toffoli cascade.

    One line per primary input plus one ancilla per synthesized internal
    node; literal nodes reuse their variable's input line outright.
    """
    n_pi = len(netlist.primary_inputs)
    line_names = list(netlist.primary_inputs)
    constants: list[int | None] = [None] * n_pi
    gates: list[RevGate] = []
    node_line: dict[int, int] = {}

    def new_line(name: str, init: int) -> int:
        line_names.append(name)
        constants.append(init)
        return len(line_names) - 1

    def var_line(ref: int) -> int:
        return manager.var_of(ref)  # PI lines are in declaration order

    # children-first over the distinct internal nodes reachable from the roots
    post: list[int] = []
    seen: set[int] = set()

    def visit(ref: int) -> None:
        if ref in seen or ref <= TRUE:
            return
        seen.add(ref)
        visit(manager.low(ref))
        visit(manager.high(ref))
        post.append(ref)

    for r in roots:
        visit(r)

    for ref in post:
        low, high = manager.low(ref), manager.high(ref)
        x = var_line(ref)
        if low == FALSE and high == TRUE:
            node_line[ref] = x  # the function is the variable itself
            continue
        target = new_line(f"w{len(node_line)}", 0)
        node_line[ref] = target
        if low == TRUE:
            gates.append(RevGate((), target))
            gates.append(RevGate(((x, True),), target))
        elif low != FALSE:
            gates.append(RevGate(((x, False), (node_line[low], True)), target))
        if high == TRUE:
            gates.append(RevGate(((x, True),), target))
        elif high != FALSE:
            gates.append(RevGate(((x, True), (node_line[high], True)), target))

    # attach primary outputs, copying when a line is already claimed
    output_names: list[str | None] = [None] * len(line_names)
    for po_name, ref in zip(netlist.primary_outputs, roots):
        if ref == FALSE:
            line = new_line(f"o_{po_name}", 0)
            output_names.append(None)
        elif ref == TRUE:
            line = new_line(f"o_{po_name}", 0)
            output_names.append(None)
            gates.append(RevGate((), line))
        else:
            line = node_line[ref]
        if output_names[line] is not None:
            copy = new_line(f"o_{po_name}", 0)
            output_names.append(None)
            gates.append(RevGate(((line, True),), copy))
            line = copy
        output_names[line] = po_name

    circuit = ReversibleCircuit(
        lines=len(line_names),
        line_names=line_names,
        constants=constants,
        garbage=[name is None for name in output_names],
        output_names=output_names,
        gates=gates,
    )
    circuit.validate()
    return circuit


def verify_synthesis(circuit: ReversibleCircuit, netlist: Netlist) -> bool:
    """Exhaustive check that PO lines reproduce the netlist on all inputs."""
    n = len(netlist.primary_inputs)
    po_lines = {}
    for i, name in enumerate(circuit.output_names):
        if name is not None:
            po_lines[name] = i
    for i in range(1 << n):
        assignment = [(i >> (n - 1 - j)) & 1 for j in range(n)]
        expected = simulate(netlist, assignment)
        state = simulate_reversible(circuit, assignment)
        for name, bit in zip(netlist.primary_outputs, expected):
            if state[po_lines[name]] != bit:
                return False
    return True


def is_bijection(circuit: ReversibleCircuit) -> bool:
    """The full line-state map is a permutation of {0,1}^lines."""
    images = set()
    for i in range(1 << circuit.lines):
        state = [(i >> k) & 1 for k in range(circuit.lines)]
        images.add(tuple(apply_to_state(circuit, state)))
    return len(images) == 1 << circuit.lines


# -- .real format ---------------------------------------------------------------


def write_real(circuit: ReversibleCircuit) -> str:
    lines = [".version 2.0", f".numvars {circuit.lines}"]
    lines.append(".variables " + " ".join(circuit.line_names))
    lines.append(".inputs " + " ".join(circuit.line_names))
    outs = [
        name if name is not None else circuit.line_names[i]
        for i, name in enumerate(circuit.output_names)
    ]
    lines.append(".outputs " + " ".join(outs))
    lines.append(
        ".constants "
        + "".join("-" if c is None else str(c) for c in circuit.constants)
    )
    lines.append(".garbage " + "".join("1" if g else "0" for g in circuit.garbage))
    lines.append(".begin")
    for g in circuit.gates:
        parts = [f"{g.kind}"]
        for line, pol in g.controls:
            parts.append(("" if pol else "-") + circuit.line_names[line])
        parts.append(circuit.line_names[g.target])
        lines.append(" ".join(parts))
    lines.append(".end")
    return "\n".join(lines) + "\n"


def read_real(text: str) -> ReversibleCircuit:
    """Round-trip reader for the subset emitted by write_real."""
    numvars = 0
    names: list[str] = []
    outs: list[str] = []
    constants: list[int | None] = []
    garbage: list[bool] = []
    gates: list[RevGate] = []
    in_body = False
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == ".version":
            continue
        if head == ".numvars":
            numvars = int(tokens[1])
        elif head == ".variables":
            names = tokens[1:]
        elif head == ".inputs":
            continue
        elif head == ".outputs":
            outs = tokens[1:]
        elif head == ".constants":
            constants = [None if c == "-" else int(c) for c in tokens[1]]
        elif head == ".garbage":
            garbage = [c == "1" for c in tokens[1]]
        elif head == ".begin":
            in_body = True
        elif head == ".end":
            in_body = False
        elif in_body:
            arity = int(head[1:])
            operands = tokens[1:]
            if len(operands) != arity:
                raise ValueError(f"bad gate line: {raw!r}")
            index = {name: i for i, name in enumerate(names)}
            controls = []
            for op in operands[:-1]:
                if op.startswith("-"):
                    controls.append((index[op[1:]], False))
                else:
                    controls.append((index[op], True))
            gates.append(RevGate(tuple(controls), index[operands[-1]]))
        else:
            raise ValueError(f"unknown directive {head}")
    output_names = [
        None if garbage[i] else outs[i] for i in range(numvars)
    ]
    circuit = ReversibleCircuit(
        lines=numvars,
        line_names=names,
        constants=constants,
        garbage=garbage,
        output_names=output_names,
        gates=gates,
    )
    circuit.validate()
    return circuit
