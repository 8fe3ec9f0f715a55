"""One-round non-local computation: representation, execution, constructors.

A protocol is compiled to a flat ``Program`` over named registers.  The
executor propagates a state tensor (optionally with a column axis carrying
basis inputs, which turns a pure branch into the matrix of the induced
linear map) and enumerates or forces measurement outcomes; classical
outcomes live in a per-branch dict that downstream corrections read.
Success probabilities and Choi operators are therefore computed by exact
outcome sweeps, never by sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import pauli, qudit, teleport
from .errors import CapExceeded, DimensionMismatch, IOFailure

BRANCH_PRUNE = 1e-22  # squared-norm threshold below which a branch is dropped


# ---------------------------------------------------------------------------
# wires: named-register state tensors
# ---------------------------------------------------------------------------

class Wire:
    """State over named d-dimensional registers with a trailing column axis."""

    __slots__ = ("d", "tensor", "regs")

    def __init__(self, d: int, tensor: np.ndarray, regs):
        self.d = d
        self.regs = list(regs)
        self.tensor = tensor  # shape (d,)*len(regs) + (cols,)

    @classmethod
    def from_matrix(cls, d: int, mat: np.ndarray, regs) -> "Wire":
        regs = list(regs)
        mat = np.asarray(mat, dtype=complex)
        cols = mat.shape[1] if mat.ndim == 2 else 1
        return cls(d, mat.reshape((d,) * len(regs) + (cols,)), regs)

    @property
    def cols(self) -> int:
        return self.tensor.shape[-1]

    def positions(self, names) -> list:
        return [self.regs.index(nm) for nm in names]

    def squared_norm(self) -> float:
        return float(np.linalg.norm(self.tensor) ** 2)

    def apply(self, mat: np.ndarray, names) -> "Wire":
        d = self.d
        pos = self.positions(names)
        k = len(pos)
        t = np.moveaxis(self.tensor, pos, range(k))
        rest = t.shape[k:]
        t = np.asarray(mat, dtype=complex) @ t.reshape(d**k, -1)
        t = np.moveaxis(t.reshape((d,) * k + rest), range(k), pos)
        return Wire(d, t, list(self.regs))

    def apply_circuit(self, circuit: pauli.CliffordCircuit, names) -> "Wire":
        d = self.d
        w = self
        for g in circuit.gates:
            mat = qudit.gate_matrix(g.name, d, g.power)
            w = w.apply(mat, [names[q] for q in g.targets])
        return w

    def apply_pauli(self, word: pauli.PauliWord, names) -> "Wire":
        w = self
        for q, nm in enumerate(names):
            a, b = word.x[q], word.z[q]
            if a or b:
                w = w.apply(qudit.weyl(self.d, a, b), [nm])
        w = Wire(self.d, w.tensor * pauli.tau(self.d) ** word.phase, w.regs)
        return w

    def append(self, vec: np.ndarray, names) -> "Wire":
        d = self.d
        names = list(names)
        add = np.asarray(vec, dtype=complex).reshape((d,) * len(names))
        t = np.multiply.outer(self.tensor, add)
        # move the column axis back to the end
        col_axis = len(self.regs)
        t = np.moveaxis(t, col_axis, -1)
        return Wire(d, t, self.regs + names)

    def project_bell(self, pair, outcome) -> "Wire":
        """Contract a register pair with the Bell vector for ``outcome``.

        The result carries the branch amplitude (it is not renormalized).
        """
        d = self.d
        a, b = outcome
        pos = self.positions(pair)
        t = np.moveaxis(self.tensor, pos, (0, 1))
        vec = qudit.bell_basis_vector(d, a, b).conj().reshape(d, d)
        t = np.tensordot(vec, t, axes=([0, 1], [0, 1]))
        regs = [nm for nm in self.regs if nm not in pair]
        return Wire(d, t, regs)

    def rename(self, mapping) -> "Wire":
        return Wire(self.d, self.tensor, [mapping.get(nm, nm) for nm in self.regs])

    def as_matrix(self, out_names) -> np.ndarray:
        """Reorder to ``out_names`` and flatten to (dim, cols)."""
        if set(out_names) != set(self.regs):
            raise DimensionMismatch(
                f"output registers {out_names} do not match wire {self.regs}"
            )
        pos = self.positions(out_names)
        t = np.moveaxis(self.tensor, pos, range(len(pos)))
        return t.reshape(-1, self.cols)

    def density_keeping(self, keep_names) -> np.ndarray:
        """Partial trace onto ``keep_names``; requires a single column."""
        if self.cols != 1:
            raise DimensionMismatch("density finalize needs a single input column")
        d = self.d
        keep = list(keep_names)
        drop = [nm for nm in self.regs if nm not in keep]
        pos = self.positions(keep + drop)
        t = np.moveaxis(self.tensor, pos, range(len(pos)))
        m = t.reshape(d ** len(keep), d ** len(drop))
        return m @ m.conj().T

    def factor_out(self, names, atol=1e-9) -> "Wire":
        """Drop registers that are in a product state with the rest."""
        if not names:
            return self
        d = self.d
        pos = self.positions(names)
        t = np.moveaxis(self.tensor, pos, range(len(pos)))
        m = t.reshape(d ** len(names), -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        nrm = np.linalg.norm(s)
        if nrm > 0 and (np.linalg.norm(s[1:]) > atol * nrm):
            raise DimensionMismatch(
                "discarded registers are entangled with the remainder"
            )
        rest_shape = t.shape[len(names):]
        keep = [nm for nm in self.regs if nm not in names]
        return Wire(d, (s[0] * vh[0]).reshape(rest_shape), keep)


# ---------------------------------------------------------------------------
# program ops
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GateOp:
    matrix: np.ndarray = field(repr=False)
    targets: tuple = ()


@dataclass(frozen=True, eq=False)
class CircuitOp:
    circuit: pauli.CliffordCircuit
    targets: tuple = ()


@dataclass(frozen=True, eq=False)
class BellMeasureOp:
    pair: tuple
    label: str


@dataclass(frozen=True, eq=False)
class CorrectionOp:
    """Unitary on targets chosen by a rule reading recorded outcomes."""

    labels: tuple
    targets: tuple
    rule: object = field(repr=False)  # outcomes dict -> matrix

    def matrix(self, outcomes) -> np.ndarray:
        return self.rule({k: outcomes[k] for k in self.labels})


@dataclass(frozen=True, eq=False)
class PauliCorrectionOp:
    """Pauli-word correction chosen by a rule reading recorded outcomes."""

    labels: tuple
    targets: tuple
    rule: object = field(repr=False)  # outcomes dict -> PauliWord

    def word(self, outcomes) -> pauli.PauliWord:
        return self.rule({k: outcomes[k] for k in self.labels})


@dataclass(frozen=True, eq=False)
class PortMeasureOp:
    label: str
    input_regs: tuple
    port_groups: tuple  # tuple of register-name tuples
    params: teleport.PBTParams


@dataclass(frozen=True, eq=False)
class SelectPortOp:
    """Keep the port named by an outcome; mark the others for discard."""

    label: str
    port_groups: tuple
    renamed: tuple  # canonical names for the surviving group


@dataclass(frozen=True, eq=False)
class DiscardOp:
    targets: tuple


@dataclass(frozen=True, eq=False)
class AppendOp:
    """Adjoin fresh registers in a given pure state mid-program."""

    names: tuple
    vec: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class Program:
    d: int
    in_regs: tuple
    init: tuple  # ((names, amplitude vector), ...) appended before ops
    ops: tuple
    out_regs: tuple


@dataclass(frozen=True, eq=False)
class Branch:
    outcomes: dict
    wire: Wire
    pending_discards: tuple


def _run_ops(ops, wire, outcomes, pending, forced, pgm_cache):
    if not ops:
        yield Branch(dict(outcomes), wire, tuple(pending))
        return
    op, rest = ops[0], ops[1:]
    if isinstance(op, GateOp):
        yield from _run_ops(rest, wire.apply(op.matrix, op.targets), outcomes, pending, forced, pgm_cache)
    elif isinstance(op, CircuitOp):
        yield from _run_ops(rest, wire.apply_circuit(op.circuit, op.targets), outcomes, pending, forced, pgm_cache)
    elif isinstance(op, CorrectionOp):
        m = op.matrix(outcomes)
        yield from _run_ops(rest, wire.apply(m, op.targets), outcomes, pending, forced, pgm_cache)
    elif isinstance(op, PauliCorrectionOp):
        w = op.word(outcomes)
        yield from _run_ops(rest, wire.apply_pauli(w, op.targets), outcomes, pending, forced, pgm_cache)
    elif isinstance(op, BellMeasureOp):
        d = wire.d
        if forced is not None and op.label in forced:
            choices = [tuple(forced[op.label])]
        else:
            choices = [(a, b) for a in range(d) for b in range(d)]
        for ab in choices:
            w2 = wire.project_bell(op.pair, ab)
            if len(choices) > 1 and w2.squared_norm() < BRANCH_PRUNE:
                continue
            outcomes[op.label] = ab
            yield from _run_ops(rest, w2, outcomes, pending, forced, pgm_cache)
        outcomes.pop(op.label, None)
    elif isinstance(op, PortMeasureOp):
        key = (op.params.d_a, op.params.n_ports)
        if key not in pgm_cache:
            pgm_cache[key] = teleport.build_pgm(op.params).sqrt_povm()
        sqrts = pgm_cache[key]
        names = list(op.input_regs) + [nm for g in op.port_groups for nm in g]
        if forced is not None and op.label in forced:
            choices = [int(forced[op.label])]
        else:
            choices = list(range(op.params.n_ports))
        for i in choices:
            w2 = wire.apply(sqrts[i], names)
            if len(choices) > 1 and w2.squared_norm() < BRANCH_PRUNE:
                continue
            outcomes[op.label] = i
            yield from _run_ops(rest, w2, outcomes, pending, forced, pgm_cache)
        outcomes.pop(op.label, None)
    elif isinstance(op, SelectPortOp):
        i = int(outcomes[op.label])
        drop = [nm for k, g in enumerate(op.port_groups) if k != i for nm in g]
        mapping = dict(zip(op.port_groups[i], op.renamed))
        yield from _run_ops(
            rest, wire.rename(mapping), outcomes, pending + list(drop), forced, pgm_cache
        )
    elif isinstance(op, DiscardOp):
        yield from _run_ops(rest, wire, outcomes, pending + list(op.targets), forced, pgm_cache)
    elif isinstance(op, AppendOp):
        yield from _run_ops(rest, wire.append(op.vec, op.names), outcomes, pending, forced, pgm_cache)
    else:
        raise DimensionMismatch(f"unknown op {op!r}")


def run_program(program: Program, input_mat: np.ndarray, *, extra_regs=(), forced=None):
    """Yield branches for the given input columns.

    ``input_mat`` has shape (d**len(in_regs + extra_regs), cols); extra
    registers (a reference system) ride along untouched.
    """
    regs = list(program.in_regs) + list(extra_regs)
    wire = Wire.from_matrix(program.d, input_mat, regs)
    for names, vec in program.init:
        wire = wire.append(vec, names)
    yield from _run_ops(list(program.ops), wire, {}, [], forced, {})


def branch_map(branch: Branch, out_regs, extra_regs=()) -> np.ndarray:
    """Matrix of a pure branch on (out + extra) registers; discards dropped."""
    w = branch.wire
    if branch.pending_discards:
        w = w.factor_out(list(branch.pending_discards))
    return w.as_matrix(list(out_regs) + list(extra_regs))


def branch_density(branch: Branch, out_regs, extra_regs=()) -> np.ndarray:
    """Unnormalized density of a branch on (out + extra); trace = probability."""
    return branch.wire.density_keeping(list(out_regs) + list(extra_regs))


# ---------------------------------------------------------------------------
# resources
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Resource:
    """Entangled resource on L (x) R with a declared bipartition."""

    d: int
    n_l: int
    n_r: int
    state: np.ndarray = field(repr=False)  # pure amplitude vector
    pair_count: int | None = None

    @classmethod
    def pairs(cls, d: int, k: int) -> "Resource":
        """k maximally entangled pairs; register order L_1..L_k R_1..R_k."""
        vec = np.ones(1, dtype=complex)
        for _ in range(k):
            vec = np.kron(vec, qudit.bell_pair(d).amplitudes)
        if k:
            t = vec.reshape((d,) * (2 * k))
            order = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
            vec = np.transpose(t, order).reshape(-1)
        return cls(d, k, k, vec, pair_count=k)

    @classmethod
    def pure(cls, d: int, n_l: int, n_r: int, vec) -> "Resource":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if v.shape[0] != d ** (n_l + n_r):
            raise DimensionMismatch("resource vector length mismatch")
        return cls(d, n_l, n_r, v)

    def density(self) -> qudit.DensityOperator:
        return qudit.DensityOperator(
            self.d, self.n_l + self.n_r, np.outer(self.state, self.state.conj())
        )

    def product_replacement(self) -> list:
        """Eigen-ensemble of rho_L (x) rho_R, as (weight, vector) pairs."""
        rho = self.density()
        left = qudit.partial_trace(rho, range(self.n_l))
        right = qudit.partial_trace(rho, range(self.n_l, self.n_l + self.n_r))
        wl, vl = np.linalg.eigh(left.matrix)
        wr, vr = np.linalg.eigh(right.matrix)
        out = []
        for pl, ul in zip(wl, vl.T):
            if pl < 1e-14:
                continue
            for pr, ur in zip(wr, vr.T):
                if pr < 1e-14:
                    continue
                out.append((float(pl * pr), np.kron(ul, ur)))
        return out

    def account(self) -> "ResourceAccount":
        rho = self.density()
        nats = qudit.mutual_information_bipartite(rho, self.n_l, base="e")
        ebits = nats / np.log(2.0)
        return ResourceAccount(self.pair_count, nats, ebits)


@dataclass(frozen=True)
class ResourceAccount:
    """Entanglement bookkeeping; mutual information reported in both units."""

    ebit_count: int | None
    mutual_information_nats: float
    mutual_information_ebits: float

    def consistent_with_pairs(self, d: int, atol: float = 1e-6) -> bool:
        if self.ebit_count is None:
            return True
        want = 2.0 * self.ebit_count * np.log2(d)
        return abs(self.mutual_information_ebits - want) <= atol


# ---------------------------------------------------------------------------
# one-round protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Stage:
    """Local operations of one party in one round."""

    ops: tuple
    keep: tuple
    cross: tuple


@dataclass(frozen=True, eq=False)
class OneRoundProtocol:
    """Resource + two first-round and two second-round local operations.

    The compiled ``program`` realizes: (C_left (x) C_right) after crossing
    the L'/R' messages, after (B_left (x) B_right) on input (x) resource.
    """

    d: int
    n_a0: int
    n_a1: int
    resource: Resource
    b_left: Stage
    b_right: Stage
    c_left: Stage
    c_right: Stage
    program: Program
    target: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_inputs(self) -> int:
        return self.n_a0 + self.n_a1

    def account(self) -> ResourceAccount:
        return self.resource.account()

    def validate(self, atol: float = 1e-9) -> None:
        """Check every stage operation is a channel on its registers.

        Unitary ops must be unitary, measurement ops complete; correction
        ops are unitary-valued by construction and are exercised by the
        executor rather than enumerated here.
        """
        d = self.d
        for op in self.program.ops:
            if isinstance(op, GateOp):
                m = np.asarray(op.matrix)
                if np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() > atol:
                    raise DimensionMismatch("stage gate is not unitary")
            elif isinstance(op, CircuitOp):
                for g in op.circuit.gates:
                    mat = qudit.gate_matrix(g.name, d, g.power)
                    if np.abs(mat @ mat.conj().T - np.eye(mat.shape[0])).max() > atol:
                        raise DimensionMismatch("circuit gate is not unitary")
            elif isinstance(op, BellMeasureOp):
                total = sum(
                    np.outer(v, v.conj())
                    for v in (
                        qudit.bell_basis_vector(d, a, b)
                        for a in range(d)
                        for b in range(d)
                    )
                )
                if np.abs(total - np.eye(d * d)).max() > atol:
                    raise DimensionMismatch("Bell basis is not complete")
            elif isinstance(op, PortMeasureOp):
                teleport.build_pgm(op.params)  # POVM invariants checked there


def _a_names(n0, n1):
    return [f"a0_{i}" for i in range(n0)], [f"a1_{i}" for i in range(n1)]


def assemble_protocol(
    d, n0, n1, resource, b_left, b_right, c_left, c_right, out_regs,
    target=None, meta=None,
) -> OneRoundProtocol:
    """Wire the four stages into a flat program (the one-round shape)."""
    a0, a1 = _a_names(n0, n1)
    l_names = [f"L_{i}" for i in range(resource.n_l)]
    r_names = [f"R_{i}" for i in range(resource.n_r)]
    init = (((l_names + r_names), resource.state),) if (l_names or r_names) else ()
    ops = tuple(b_left.ops) + tuple(b_right.ops) + tuple(c_left.ops) + tuple(c_right.ops)
    program = Program(d, tuple(a0 + a1), init, ops, tuple(out_regs))
    return OneRoundProtocol(
        d, n0, n1, resource, b_left, b_right, c_left, c_right, program,
        target=target, meta=dict(meta or {}),
    )


def execute(
    protocol: OneRoundProtocol,
    input_state: qudit.DenseState,
    *,
    forced=None,
) -> qudit.DensityOperator:
    """Run on a state whose first n_a0+n_a1 qudits are the protocol inputs.

    Remaining qudits are treated as an untouched reference.  All unforced
    measurement outcomes are enumerated and summed, so the result is the
    exact channel output.
    """
    d = protocol.d
    if input_state.d != d:
        raise DimensionMismatch("input dimension does not match protocol")
    n_in = protocol.n_inputs
    if input_state.n < n_in:
        raise DimensionMismatch("input state has too few qudits")
    n_ref = input_state.n - n_in
    extra = [f"ref_{i}" for i in range(n_ref)]
    total = np.zeros((d ** (n_in + n_ref),) * 2, dtype=complex)
    out_names = list(protocol.program.out_regs) + extra
    for br in run_program(
        protocol.program,
        input_state.amplitudes.reshape(-1, 1),
        extra_regs=extra,
        forced=forced,
    ):
        total += br.wire.density_keeping(out_names)
    if forced is not None:
        total /= np.trace(total).real
    return qudit.DensityOperator(d, n_in + n_ref, total)


def _auto_batch(program: Program, budget: int = 2**23) -> int:
    """Column batch size keeping the peak tensor under ``budget`` entries."""
    d = program.d
    regs = len(program.in_regs)
    peak = regs + sum(len(names) for names, _ in program.init)
    live = peak
    for op in program.ops:
        if isinstance(op, AppendOp):
            live += len(op.names)
            peak = max(peak, live)
        elif isinstance(op, BellMeasureOp):
            live -= 2
    dim = d ** len(program.in_regs)
    return int(max(1, min(dim, budget // max(1, d**peak))))


def sweep_branch_maps(program: Program, batch: int | None = None):
    """Assembled (outcomes, M) per forced branch, run in column batches.

    M is the unnormalized matrix of the branch map on the program inputs;
    column norms squared are the branch probabilities per basis input.
    Batches keep memory bounded when many registers coexist.
    """
    d = program.d
    dim = d ** len(program.in_regs)
    if batch is None:
        batch = _auto_batch(program)
    acc: dict = {}
    for start in range(0, dim, batch):
        stop = min(dim, start + batch)
        cols = np.zeros((dim, stop - start), dtype=complex)
        cols[np.arange(start, stop), np.arange(stop - start)] = 1.0
        for br in run_program(program, cols):
            m = branch_map(br, program.out_regs)
            key = tuple(sorted(br.outcomes.items()))
            if key not in acc:
                acc[key] = (dict(br.outcomes), np.zeros((m.shape[0], dim), dtype=complex))
            acc[key][1][:, start:stop] = m
    for outcomes, m in acc.values():
        yield outcomes, m


def pure_branches(protocol: OneRoundProtocol, forced=None):
    """(outcomes, M) for each branch run on computational basis columns."""
    if forced is None:
        yield from sweep_branch_maps(protocol.program)
        return
    d, n_in = protocol.d, protocol.n_inputs
    eye = np.eye(d**n_in, dtype=complex)
    for br in run_program(protocol.program, eye, forced=forced):
        yield br.outcomes, branch_map(br, protocol.program.out_regs)


def protocol_choi(protocol: OneRoundProtocol, *, method: str = "auto") -> np.ndarray:
    """Trace-1 Choi matrix of the protocol channel on its input registers."""
    d, n_in = protocol.d, protocol.n_inputs
    dim = d**n_in
    has_trace = any(
        isinstance(op, (SelectPortOp, DiscardOp, PortMeasureOp))
        for op in protocol.program.ops
    )
    if method == "auto":
        method = "ref" if has_trace else "columns"
    if method == "columns":
        return program_choi_columns(protocol.program)
    # reference path: feed half of a maximally entangled state
    ref = [f"ref_{i}" for i in range(n_in)]
    inp = qudit.max_entangled_tensor(dim).reshape(-1, 1)
    j = np.zeros((dim * dim, dim * dim), dtype=complex)
    out_names = list(protocol.program.out_regs) + ref
    for br in run_program(protocol.program, inp, extra_regs=ref, forced=None):
        j += br.wire.density_keeping(out_names)
    return j


@dataclass(frozen=True)
class VerifyReport:
    choi_distance: float
    passed: bool


def rank1_choi_distance(m: np.ndarray, target_u: np.ndarray) -> float:
    """Trace distance between the rank-1 Chois of a pure branch map and U.

    Computed as the norm of the component of the branch vector orthogonal
    to the target vector, which stays accurate near zero (the naive
    sqrt(1 - overlap**2) loses half the working precision there).
    """
    v = m.reshape(-1)
    nv = np.linalg.norm(v)
    if nv < 1e-30:
        return 1.0
    v = v / nv
    u = target_u.reshape(-1)
    u = u / np.linalg.norm(u)
    w = v - np.vdot(u, v) * u
    return float(min(1.0, np.linalg.norm(w)))


def verify_implements(
    protocol: OneRoundProtocol, target: np.ndarray, tol: float = 1e-9
) -> VerifyReport:
    """Choi trace distance between the protocol channel and a target unitary.

    The Choi distance lower-bounds the (half) diamond distance, so "passed"
    certifies a necessary condition for diamond-norm closeness.
    """
    target = np.asarray(target, dtype=complex)
    dim = protocol.d**protocol.n_inputs
    if target.shape != (dim, dim):
        raise DimensionMismatch("target unitary has the wrong dimension")
    j = protocol_choi(protocol)
    jt = qudit.choi_of_unitary(target)
    dist = qudit.trace_distance_matrices(j, jt)
    return VerifyReport(dist, dist <= tol)


def program_exactness(program: Program, target: np.ndarray):
    """Max per-branch rank-1 Choi distance to target, probability, branches."""
    dim = program.d ** len(program.in_regs)
    dists = []
    ptot = 0.0
    for _, m in sweep_branch_maps(program):
        dists.append(rank1_choi_distance(m, target))
        ptot += float(np.linalg.norm(m) ** 2) / dim
    return max(dists), ptot, len(dists)


def program_choi_columns(program: Program) -> np.ndarray:
    dim = program.d ** len(program.in_regs)
    j = np.zeros((dim * dim, dim * dim), dtype=complex)
    for _, m in sweep_branch_maps(program):
        v = m.reshape(-1)
        j += np.outer(v, v.conj()) / dim
    return j


def branch_exactness(protocol: OneRoundProtocol, target: np.ndarray):
    """Per-forced-outcome distances to the target plus probability total."""
    return program_exactness(protocol.program, target)


# ---------------------------------------------------------------------------
# interaction decompositions and Protocol-2 style constructors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InteractionDecomposition:
    """Pre/post local circuits around an interaction core circuit."""

    d: int
    n0: int
    n1: int
    pre_left: pauli.CliffordCircuit
    pre_right: pauli.CliffordCircuit
    core: pauli.CliffordCircuit  # on core0 + core1 slots, original order
    post_left: pauli.CliffordCircuit
    post_right: pauli.CliffordCircuit
    core0: tuple  # original qudit indices entering the core, left side
    core1: tuple

    @property
    def n0_core(self) -> int:
        return len(self.core0)

    @property
    def n1_core(self) -> int:
        return len(self.core1)

    def core_slots(self) -> dict:
        order = sorted(self.core0 + self.core1)
        return {q: i for i, q in enumerate(order)}


def reduce_circuit(circuit: pauli.CliffordCircuit, n0: int) -> InteractionDecomposition:
    """Built-in reduction: peel one-sided prefix/suffix gates, strip idle qudits.

    Gates wholly on one side at the start move into the pre stages, those at
    the end into the post stages; the remaining core keeps only qudits it
    touches.  No search is attempted beyond this.
    """
    d, n = circuit.d, circuit.n
    n1 = n - n0
    side = lambda q: 0 if q < n0 else 1

    def one_sided(g):
        return len({side(q) for q in g.targets}) == 1

    gates = list(circuit.gates)
    pre = []
    while gates and one_sided(gates[0]):
        pre.append(gates.pop(0))
    post = []
    while gates and one_sided(gates[-1]):
        post.insert(0, gates.pop())
    core_qudits = sorted({q for g in gates for q in g.targets})
    core0 = tuple(q for q in core_qudits if side(q) == 0)
    core1 = tuple(q for q in core_qudits if side(q) == 1)
    slot = {q: i for i, q in enumerate(core_qudits)}
    core = pauli.CliffordCircuit(
        d, len(core_qudits),
        tuple(pauli.CliffordGate(g.name, tuple(slot[q] for q in g.targets), g.power) for g in gates),
    )

    def side_circuit(glist, which):
        names = [q for q in range(n) if side(q) == which]
        pos = {q: i for i, q in enumerate(names)}
        picked = [g for g in glist if side(g.targets[0]) == which]
        return pauli.CliffordCircuit(
            d, len(names),
            tuple(pauli.CliffordGate(g.name, tuple(pos[q] for q in g.targets), g.power) for g in picked),
        )

    return InteractionDecomposition(
        d, n0, n1,
        side_circuit(pre, 0), side_circuit(pre, 1),
        core,
        side_circuit(post, 0), side_circuit(post, 1),
        core0, core1,
    )


def _teleport_error_word(core: pauli.CliffordCircuit, tele_slots, outcomes_list):
    """Pauli word X^a Z^b on the teleported core slots for given outcomes."""
    d, n = core.d, core.n
    x = [0] * n
    z = [0] * n
    for slot, (a, b) in zip(tele_slots, outcomes_list):
        x[slot], z[slot] = a, b
    return pauli.PauliWord(d, n, tuple(x), tuple(z))


def clifford_protocol(
    circuit: pauli.CliffordCircuit,
    split: tuple,
    decomposition: InteractionDecomposition | None = None,
) -> OneRoundProtocol:
    """One-round protocol implementing a Clifford exactly.

    The smaller core side is Bell-teleported to the other party, who applies
    the interaction core before knowing the outcome; both parties compute
    the propagated Pauli from the broadcast outcome and undo their halves.
    Consumes min(n0', n1') pairs.
    """
    n0, n1 = split
    if n0 + n1 != circuit.n:
        raise DimensionMismatch("split does not cover the circuit register")
    dec = decomposition or reduce_circuit(circuit, n0)
    if decomposition is not None and (dec.n0 != n0 or dec.n1 != n1):
        raise DimensionMismatch("decomposition split mismatch")
    d = circuit.d
    a0, a1 = _a_names(n0, n1)
    slots = dec.core_slots()
    core = dec.core

    # teleport the smaller core side toward the other party
    tele_side = 0 if dec.n0_core <= dec.n1_core else 1
    k = min(dec.n0_core, dec.n1_core)
    pair_l = [f"L_{i}" for i in range(k)]
    pair_r = [f"R_{i}" for i in range(k)]
    labels = tuple(f"x_{j}" for j in range(k))

    side0_regs = {q: a0[q] for q in range(n0)}
    side1_regs = {q: a1[q - n0] for q in range(n0, n0 + n1)}

    def correction_rule(which):
        tele = dec.core0 if tele_side == 0 else dec.core1
        tele_slots = [slots[q] for q in tele]
        own = dec.core0 if which == 0 else dec.core1
        own_slots = [slots[q] for q in own]

        def rule(outcomes):
            err = _teleport_error_word(core, tele_slots, [outcomes[l] for l in labels])
            img = pauli.conjugate_pauli(core, err).inverse()
            sub_x = tuple(img.x[s] for s in own_slots)
            sub_z = tuple(img.z[s] for s in own_slots)
            ph = img.phase if which == tele_side else 0
            return pauli.PauliWord(d, len(own_slots), sub_x, sub_z, ph)

        return rule

    if tele_side == 0:
        tele_regs = [side0_regs[q] for q in dec.core0]
        # core slots sort as core0 then core1 since side-0 indices come first
        core_targets = pair_r + [side1_regs[q] for q in dec.core1]
        b_left = Stage(
            ops=(CircuitOp(dec.pre_left, tuple(a0)),)
            + tuple(BellMeasureOp((tele_regs[j], pair_l[j]), labels[j]) for j in range(k)),
            keep=tuple(nm for nm in a0 if nm not in tele_regs),
            cross=(),
        )
        b_right = Stage(
            ops=(CircuitOp(dec.pre_right, tuple(a1)), CircuitOp(core, tuple(core_targets))),
            keep=tuple(a1),
            cross=tuple(pair_r),
        )
        c_left = Stage(
            ops=(
                PauliCorrectionOp(labels, tuple(pair_r), correction_rule(0)),
                CircuitOp(dec.post_left, tuple(
                    pair_r[dec.core0.index(q)] if q in dec.core0 else side0_regs[q]
                    for q in range(n0)
                )),
            ),
            keep=tuple(
                pair_r[dec.core0.index(q)] if q in dec.core0 else side0_regs[q]
                for q in range(n0)
            ),
            cross=(),
        )
        c_right = Stage(
            ops=(
                PauliCorrectionOp(labels, tuple(side1_regs[q] for q in dec.core1), correction_rule(1)),
                CircuitOp(dec.post_right, tuple(a1)),
            ),
            keep=tuple(a1),
            cross=(),
        )
        out_regs = list(c_left.keep) + list(c_right.keep)
    else:
        tele_regs = [side1_regs[q] for q in dec.core1]
        core_targets = [None] * core.n
        for q in dec.core0:
            core_targets[slots[q]] = side0_regs[q]
        for j, q in enumerate(dec.core1):
            core_targets[slots[q]] = pair_l[j]
        b_right = Stage(
            ops=(CircuitOp(dec.pre_right, tuple(a1)),)
            + tuple(BellMeasureOp((tele_regs[j], pair_r[j]), labels[j]) for j in range(k)),
            keep=tuple(nm for nm in a1 if nm not in tele_regs),
            cross=(),
        )
        b_left = Stage(
            ops=(CircuitOp(dec.pre_left, tuple(a0)), CircuitOp(core, tuple(core_targets))),
            keep=tuple(a0),
            cross=tuple(pair_l),
        )
        c_right = Stage(
            ops=(
                PauliCorrectionOp(labels, tuple(pair_l), correction_rule(1)),
                CircuitOp(dec.post_right, tuple(
                    pair_l[dec.core1.index(q)] if q in dec.core1 else side1_regs[q]
                    for q in range(n0, n0 + n1)
                )),
            ),
            keep=tuple(
                pair_l[dec.core1.index(q)] if q in dec.core1 else side1_regs[q]
                for q in range(n0, n0 + n1)
            ),
            cross=(),
        )
        c_left = Stage(
            ops=(
                PauliCorrectionOp(labels, tuple(side0_regs[q] for q in dec.core0), correction_rule(0)),
                CircuitOp(dec.post_left, tuple(a0)),
            ),
            keep=tuple(a0),
            cross=(),
        )
        out_regs = list(c_left.keep) + list(c_right.keep)

    resource = Resource.pairs(d, k)
    meta = {"decomposition": dec, "pairs": k, "labels": labels, "tele_side": tele_side}
    return assemble_protocol(
        d, n0, n1, resource, b_left, b_right, c_left, c_right, out_regs,
        target=circuit.unitary(), meta=meta,
    )


# ---------------------------------------------------------------------------
# Beigi-Koenig style protocol (port teleportation of the joint register)
# ---------------------------------------------------------------------------

def bk_protocol(
    u: np.ndarray, split: tuple, n_ports: int, cap_dim: int = teleport.POVM_DIM_CAP
) -> OneRoundProtocol:
    """Approximate one-round protocol for an arbitrary unitary.

    One party Bell-measures its input against shared pairs; the other
    port-teleports the joint register back; the first applies U(P^x (x) I)
    to every port, and after the round everything but port i* is discarded.
    """
    u = np.asarray(u, dtype=complex)
    n0, n1 = split
    n = n0 + n1
    d = _infer_d(u.shape[0], n)
    d_a = d**n
    if d_a ** (n_ports + 1) > cap_dim:
        raise CapExceeded(
            f"port measurement dimension {d_a ** (n_ports + 1)} exceeds cap {cap_dim}"
        )
    a0, a1 = _a_names(n0, n1)
    f0 = [f"F0_{i}" for i in range(n0)]
    f1 = [f"F1_{i}" for i in range(n0)]
    ports_l = [[f"P{k}L_{i}" for i in range(n)] for k in range(n_ports)]
    ports_r = [[f"P{k}R_{i}" for i in range(n)] for k in range(n_ports)]

    labels = tuple(f"x_{j}" for j in range(n0))

    def gx_rule(outcomes):
        # undo the teleportation Weyl (its own inverse up to phase at d=2),
        # then apply the target on every port
        px = np.eye(1, dtype=complex)
        for j in range(n0):
            a, b = outcomes[labels[j]]
            px = np.kron(px, qudit.weyl(d, a, b))
        px = np.kron(px, np.eye(d**n1))
        return u @ px.conj().T

    b_left = Stage(
        ops=tuple(BellMeasureOp((a0[j], f0[j]), labels[j]) for j in range(n0))
        + tuple(
            CorrectionOp(labels, tuple(ports_l[k]), gx_rule) for k in range(n_ports)
        ),
        keep=tuple(nm for k in range(n_ports) for nm in ports_l[k][:n0]),
        cross=tuple(nm for k in range(n_ports) for nm in ports_l[k][n0:]),
    )
    b_right = Stage(
        ops=(
            PortMeasureOp(
                "port",
                tuple(f1 + a1),
                tuple(tuple(g) for g in ports_r),
                teleport.PBTParams(d_a, n_ports),
            ),
        ),
        keep=(),
        cross=(),
    )
    out_names = tuple(f"B_{i}" for i in range(n))
    select = SelectPortOp("port", tuple(tuple(g) for g in ports_l), out_names)
    drop_meas = DiscardOp(tuple(f1 + a1) + tuple(nm for g in ports_r for nm in g))
    c_left = Stage(ops=(select, drop_meas), keep=out_names[:n0], cross=())
    c_right = Stage(ops=(), keep=out_names[n0:], cross=())

    k_pairs = n0 + n_ports * n
    # resource: F pairs then port pairs, L halves then R halves
    vec = np.ones(1, dtype=complex)
    for _ in range(k_pairs):
        vec = np.kron(vec, qudit.bell_pair(d).amplitudes)
    t = vec.reshape((d,) * (2 * k_pairs))
    order = [2 * i for i in range(k_pairs)] + [2 * i + 1 for i in range(k_pairs)]
    vec = np.transpose(t, order).reshape(-1)
    resource = Resource(d, k_pairs, k_pairs, vec, pair_count=k_pairs)

    # resource register names must line up with the stage wiring
    l_names = f0 + [nm for g in ports_l for nm in g]
    r_names = f1 + [nm for g in ports_r for nm in g]
    init = ((tuple(l_names + r_names), resource.state),)
    ops = tuple(b_left.ops) + tuple(b_right.ops) + tuple(c_left.ops) + tuple(c_right.ops)
    program = Program(d, tuple(a0 + a1), init, ops, out_names)
    meta = {"n_ports": n_ports, "pairs": k_pairs, "d_a": d_a}
    return OneRoundProtocol(
        d, n0, n1, resource, b_left, b_right, c_left, c_right, program,
        target=u, meta=meta,
    )


def _infer_d(dim: int, n: int) -> int:
    d = round(dim ** (1.0 / n))
    for cand in (d - 1, d, d + 1):
        if cand >= 2 and cand**n == dim:
            return cand
    raise DimensionMismatch(f"dimension {dim} is not a {n}-th power")


def bk_choi(
    u: np.ndarray, split: tuple, n_ports: int, *, method: str = "reduced",
    cap_dim: int = teleport.POVM_DIM_CAP,
) -> np.ndarray:
    """Choi matrix of the BK channel.

    ``reduced`` composes the exact per-port reduced channels of the PGM with
    the Bell branches and the port-wise corrections; it relies on the
    trace/conjugation commutation identity checked by
    ``teleport.trace_commutation_check``.  ``protocol`` runs the full
    program on a referenced input (feasible only for small N).
    """
    u = np.asarray(u, dtype=complex)
    n0, n1 = split
    n = n0 + n1
    d = _infer_d(u.shape[0], n)
    d_a = d**n
    if method == "protocol":
        return protocol_choi(bk_protocol(u, split, n_ports, cap_dim))
    if d_a ** (n_ports + 1) > cap_dim:
        raise CapExceeded(
            f"port measurement dimension {d_a ** (n_ports + 1)} exceeds cap {cap_dim}"
        )
    inst = teleport.build_pgm(teleport.PBTParams(d_a, n_ports), cap_dim)
    port_chois = teleport.reduced_port_choi(inst)

    j_total = np.zeros((d_a * d_a, d_a * d_a), dtype=complex)
    d0 = d**n0
    for x in np.ndindex(*(d, d) * n0):
        pairs = [(x[2 * j], x[2 * j + 1]) for j in range(n0)]
        tx = np.eye(1, dtype=complex)
        for a, b in pairs:
            tx = np.kron(tx, qudit.weyl(d, a, b) / d)
        tx = np.kron(tx, np.eye(d**n1))  # branch map A0A1 -> F1 A1
        px = np.eye(1, dtype=complex)
        for a, b in pairs:
            px = np.kron(px, qudit.weyl(d, a, b))
        gx = u @ np.kron(px, np.eye(d**n1)).conj().T
        for jp in port_chois:
            # pre-composition with rho -> tx rho tx^dag twists the reference
            # copy by tx^T; post-composition with G_x acts on the output slot
            m = np.kron(gx, tx.T)
            j_total += m @ jp @ m.conj().T
    return j_total


# ---------------------------------------------------------------------------
# product replacement bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Product-replacement bound data.

    ``lhs`` is I/2 in nats and ``passed`` compares it against ``rhs`` =
    -ln p_suc(product).  The relative-entropy argument (I(L:R) equals
    S(rho_LR || rho_L x rho_R), and data processing on the success POVM)
    only supports the full-I version, reported as ``passed_full``; exact
    teleportation protocols saturate -ln p_suc = I, so ``passed`` is
    genuinely false for them.
    """

    mutual_information_nats: float
    mutual_information_ebits: float
    p_suc_original: float
    p_suc_product: float
    lhs: float
    rhs: float
    passed: bool
    passed_full: bool


def projector_task(target_u: np.ndarray):
    """Success POVM: projector onto (U (x) I)|Phi+> on output + reference."""
    dim = target_u.shape[0]
    v = (np.asarray(target_u, dtype=complex) @ qudit.max_entangled_tensor(dim)).reshape(-1)

    def task(density: np.ndarray) -> float:
        return float(np.real(v.conj() @ density @ v))

    return task


def _success_probability(protocol: OneRoundProtocol, task, resource_vecs) -> float:
    """Exact success probability with the resource replaced by an ensemble."""
    d, n_in = protocol.d, protocol.n_inputs
    dim = d**n_in
    ref = [f"ref_{i}" for i in range(n_in)]
    inp = qudit.max_entangled_tensor(dim).reshape(-1, 1)
    prog = protocol.program
    total = 0.0
    out_names = list(prog.out_regs) + ref
    for weight, vec in resource_vecs:
        prog_w = replace(prog, init=((prog.init[0][0], vec),) if prog.init else ())
        for br in run_program(prog_w, inp, extra_regs=ref):
            rho = br.wire.density_keeping(out_names)
            total += weight * task(rho)
    return total


def product_replacement_check(
    protocol: OneRoundProtocol, task=None, *, slack: float = 1e-9
) -> BoundReport:
    """Check I(L:R)/2 >= -ln p_suc under product replacement of the resource.

    The task is a functional on the unnormalized output (x) reference density
    of each forced branch (defaults to the projector onto the protocol
    target's Choi state); summing it over branches weighted by their exact
    probabilities gives the success probability, computed once with the true
    resource and once with the product of its marginals.
    """
    if task is None:
        if protocol.target is None:
            raise DimensionMismatch("no target recorded; pass an explicit task")
        task = projector_task(protocol.target)
    account = protocol.resource.account()
    p_orig = _success_probability(
        protocol, task, [(1.0, protocol.resource.state)]
    )
    p_prod = _success_probability(
        protocol, task, protocol.resource.product_replacement()
    )
    lhs = account.mutual_information_nats / 2.0
    rhs = -np.log(max(p_prod, 1e-300))
    return BoundReport(
        account.mutual_information_nats,
        account.mutual_information_ebits,
        p_orig,
        p_prod,
        lhs,
        float(rhs),
        bool(lhs >= rhs - slack),
        bool(account.mutual_information_nats >= rhs - slack),
    )


# ---------------------------------------------------------------------------
# protocol file format
# ---------------------------------------------------------------------------

def load_protocol_json(source) -> OneRoundProtocol:
    """Load a Clifford protocol description.

    ``{"n0": int, "n1": int, "split_circuit": {...}}`` builds the
    teleportation protocol for the circuit JSON under ``split_circuit``.
    Optional ``"d"`` and ``"resource": {"pairs": k}`` entries are checked
    against the constructed protocol for consistency.
    """
    doc = json.loads(source) if isinstance(source, str) else source
    try:
        n0, n1 = int(doc["n0"]), int(doc["n1"])
        spec = qudit.load_circuit_json(doc["split_circuit"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IOFailure(f"malformed protocol document: {exc}") from exc
    circuit = pauli.CliffordCircuit.from_circuit_spec(spec)
    if n0 + n1 != circuit.n:
        raise IOFailure("n0 + n1 does not match the circuit register")
    if "d" in doc and int(doc["d"]) != circuit.d:
        raise IOFailure("declared d does not match the circuit")
    protocol = clifford_protocol(circuit, (n0, n1))
    declared = doc.get("resource", {}).get("pairs")
    if declared is not None and int(declared) != protocol.meta["pairs"]:
        raise IOFailure(
            f"declared resource of {declared} pairs, construction needs "
            f"{protocol.meta['pairs']}"
        )
    return protocol
