"""Trap-based verification: single-trap patterns and the full verifiable
protocol over ``K~_{3N}``.

In the full protocol the P-vertices are split at random into three parts of
size ``N``. Part 1 carries the computation, part 2 becomes isolated white
traps (its A-vertices are dummies) and part 3 yields black traps (its
P-vertices are dummies, so its A-vertices are isolated).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import graphs as gr
from . import pattern as pt
from . import protocol as pr
from . import sim

__all__ = [
    "TrapConfig",
    "Identity",
    "RepetitionClassical",
    "ExternalRHG",
    "rhg_lattice",
    "rhg_parameters",
    "make_trap_pattern",
    "random_trap_pattern",
    "P8Choice",
    "choose_pattern",
    "a_vertex_position",
    "random_linear_extension",
    "VerifiedOutcome",
    "run_protocol8",
    "incorrect_projector",
    "disjoint_copies",
]


@dataclass(frozen=True)
class TrapConfig:
    white: frozenset = frozenset()
    black: frozenset = frozenset()
    dummies: frozenset = frozenset()

    @property
    def traps(self) -> frozenset:
        return self.white | self.black


def make_trap_pattern(base: pt.Pattern, t: int) -> tuple[pt.Pattern, TrapConfig]:
    """Isolate vertex ``t`` as a trap by turning all its neighbours into dummies."""
    if t not in base.graph.vertices:
        raise pt.PatternError(f"trap position {t} out of range")
    if base.traps or base.bridges:
        raise pt.PatternError("base pattern already carries traps or bridges")
    dummies = base.dummies | base.graph.neighbors(t)
    angles = {v: k for v, k in base.angles.items() if v not in dummies and v != t}
    p = pt.Pattern(base.graph, base.flow, angles, base.order, dummies, frozenset({t}),
                   frozenset(), base.output_mode)
    return p, TrapConfig(white=frozenset({t}), dummies=frozenset(dummies))


def random_trap_pattern(base: pt.Pattern, rng: np.random.Generator):
    t = base.graph.vertices[int(rng.integers(base.m))]
    return make_trap_pattern(base, t)


# ---------------------------------------------------------------------------
# encoding providers


@dataclass(frozen=True)
class Identity:
    d: int = 1

    def encode(self, circuit: pt.Pattern) -> pt.Pattern:
        return circuit

    def decode(self, bits: Sequence[int]) -> tuple[tuple, bool]:
        return tuple(bits), False


def disjoint_copies(p: pt.Pattern, d: int) -> pt.Pattern:
    """``d`` relabelled copies of a plain pattern side by side.

    Copy ``c`` of vertex ``v`` is ``c * m + v``; outputs are listed copy by
    copy.
    """
    m = p.m
    lab = lambda c, v: c * m + v  # noqa: E731
    edges = [(lab(c, i), lab(c, j)) for c in range(d) for i, j in p.graph.edges]
    g = gr.OpenGraph(
        tuple(range(d * m)),
        frozenset(edges),
        tuple(lab(c, v) for c in range(d) for v in p.inputs),
        tuple(lab(c, v) for c in range(d) for v in p.outputs),
    )
    flow = gr.Flow(
        {lab(c, i): lab(c, j) for c in range(d) for i, j in p.flow.f.items()},
        tuple(lab(c, v) for c in range(d) for v in p.flow.order),
    )
    angles = {lab(c, v): k for c in range(d) for v, k in p.angles.items()}
    order = tuple(lab(c, v) for c in range(d) for v in p.order)
    return pt.Pattern(g, flow, angles, order, output_mode=p.output_mode)


@dataclass(frozen=True)
class RepetitionClassical:
    """Each logical output bit is computed on ``d`` independent copies.

    Decoding takes the majority and flags an error whenever the copies
    disagree, so any flip pattern touching fewer than ``d`` copies of a bit
    is either harmless or flagged.
    """

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("repetition distance must be positive")

    @property
    def lam(self) -> int:
        return rhg_parameters(self.d)[0]

    @property
    def levels(self) -> int:
        return rhg_parameters(self.d)[1]

    def encode(self, circuit: pt.Pattern) -> pt.Pattern:
        if circuit.output_mode != pt.CLASSICAL:
            raise ValueError("repetition encoding needs classical output")
        return disjoint_copies(circuit, self.d)

    def decode(self, bits: Sequence[int]) -> tuple[tuple, bool]:
        k = len(bits) // self.d
        copies = [bits[c * k:(c + 1) * k] for c in range(self.d)]
        out, flagged = [], False
        for j in range(k):
            col = [cp[j] for cp in copies]
            ones = sum(col)
            out.append(int(2 * ones > self.d))
            flagged |= 0 < ones < self.d
        return tuple(out), flagged


def _ceil_log3(d: int) -> int:
    level, power = 0, 1
    while power < d:
        power *= 3
        level += 1
    return level


@dataclass(frozen=True)
class ExternalRHG:
    """Parameter record for the topological encoding; no runnable decoder.

    Fields derived from the defect thickness ``d``: lattice scale
    ``lam = 5 d``, ``levels = ceil(log3 d)`` distillation levels, and the
    per-level thickness ``d_1 = 1, d_l = 3 d_(l-1)`` with the last level
    pinned to ``d``. Per-level scale keeps ``lam_l = lam_(l-1)`` from
    ``lam_1 = 5`` with the last level pinned to ``lam``. There is always at
    least one level entry, so ``d = 1`` gives ``thickness == (1,)``.
    """

    d: int
    lam: int = field(init=False)
    levels: int = field(init=False)
    thickness: tuple = field(init=False)
    scale: tuple = field(init=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("defect thickness must be positive")
        lam, levels = rhg_parameters(self.d)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "levels", levels)
        n = max(levels, 1)
        thick = [3**k for k in range(n)]
        thick[-1] = self.d
        scale = [5] * n
        scale[-1] = lam
        object.__setattr__(self, "thickness", tuple(thick))
        object.__setattr__(self, "scale", tuple(scale))

    def encode(self, circuit):
        raise NotImplementedError("topological encoding is not implemented")

    def decode(self, bits):
        raise NotImplementedError("topological decoding is not implemented")


def rhg_parameters(d: int) -> tuple[int, int]:
    """``(lam, levels)`` for defect thickness ``d``: ``5 d`` and ``ceil(log3 d)``."""
    if d < 1:
        raise ValueError("defect thickness must be positive")
    return 5 * d, _ceil_log3(d)


def rhg_lattice(dx: int, dy: int, dz: int) -> gr.OpenGraph:
    """Cluster-state graph of a ``dx x dy x dz`` cell cubic lattice.

    Qubits sit on cube edges and faces; each face qubit is joined to the
    four edge qubits on its boundary.
    """
    if min(dx, dy, dz) < 1:
        raise gr.GraphError("invalid-dimension", "lattice needs at least one cell per axis")
    index: dict = {}

    def q(key):
        if key not in index:
            index[key] = len(index)
        return index[key]

    edges = set()
    dims = (dx, dy, dz)
    for a in range(3):
        b, c = [k for k in range(3) if k != a]
        # faces normal to axis a, spanned by axes b and c
        for pos in np.ndindex(*(dims[k] + (1 if k == a else 0) for k in range(3))):
            pos = list(pos)
            if pos[b] >= dims[b] or pos[c] >= dims[c]:
                continue
            face = q(("f", a, tuple(pos)))
            for axis, other in ((b, c), (c, b)):
                for off in (0, 1):
                    e = list(pos)
                    e[other] += off
                    edges.add(tuple(sorted((face, q(("e", axis, tuple(e)))))))
    return gr.OpenGraph.from_edges(len(index), edges)


# ---------------------------------------------------------------------------
# pattern choice over K~_{3N}


def a_vertex_position(n_total: int, i: int, j: int) -> int:
    """1-based measurement slot of the A-vertex between P-ranks ``i < j``."""
    return n_total * (i - 1) + j - i * (i + 1) // 2


def random_linear_extension(items: Sequence[int], before: Mapping[int, set],
                            rng: np.random.Generator) -> list[int]:
    """Random topological order of ``items``; ``before[v]`` must precede ``v``.

    Each step picks uniformly among the currently available items. This
    respects every constraint but is not uniform over linear extensions.
    """
    remaining = set(items)
    placed: list[int] = []
    done: set = set()
    while remaining:
        ready = sorted(v for v in remaining if before.get(v, set()) <= done)
        if not ready:
            raise ValueError("ordering constraints contain a cycle")
        v = ready[int(rng.integers(len(ready)))]
        placed.append(v)
        done.add(v)
        remaining.discard(v)
    return placed


@dataclass(frozen=True)
class P8Choice:
    pattern: pt.Pattern
    n: int
    partition: tuple
    traps: TrapConfig
    p_map: Mapping[int, int]
    encoding: object
    logical: pt.Pattern
    p_order: tuple

    @property
    def computation_outputs(self) -> tuple:
        return self.pattern.computation_outputs


def choose_pattern(d: int, circuit: pt.Pattern, n: int, rng: np.random.Generator,
                   encoding=None) -> P8Choice:
    """Overall pattern on ``K~_{3n}`` hiding ``circuit`` among traps.

    ``circuit`` is a plain classical-output pattern; the encoding provider
    (default :class:`Identity`) maps it to the computation pattern, which
    must fit in ``n`` vertices.
    """
    encoding = encoding or (Identity() if d == 1 else RepetitionClassical(d))
    if getattr(encoding, "d", d) != d:
        raise ValueError("encoding distance does not match d")
    if circuit.output_mode != pt.CLASSICAL:
        raise ValueError("the verifiable protocol measures every qubit; use classical output")
    comp = encoding.encode(circuit)
    if comp.m > n:
        raise ValueError(f"computation needs {comp.m} vertices but N = {n}")
    total = 3 * n
    dotted = gr.dotted_complete(total)
    perm = [int(v) for v in rng.permutation(total)]
    parts = tuple(frozenset(perm[k * n:(k + 1) * n]) for k in range(3))
    p1 = sorted(parts[0])
    p_map = {k: p1[k] for k in range(comp.m)}
    where = {v: k for k, part in enumerate(parts) for v in part}

    black = frozenset(a for a, (i, j) in dotted.edge_of.items() if where[i] == where[j] == 2)
    white = parts[1]
    cross = gr.partition_plan(n, parts)

    target = comp.graph
    tv = {v: k for k, v in enumerate(target.vertices)}
    wanted = {gr._canon(p_map[tv[i]], p_map[tv[j]]) for i, j in target.edges}
    bridges = frozenset(a for a, e in dotted.edge_of.items() if e in wanted)
    used = {p_map[tv[v]] for v in target.vertices}
    dummies = (frozenset(dotted.a_vertices) - bridges - black) | parts[2] | (parts[0] - used)
    assert cross <= dummies

    lab = {v: p_map[tv[v]] for v in target.vertices}
    g = dotted.graph.with_io(tuple(lab[v] for v in target.inputs), tuple(lab[v] for v in target.outputs))
    flow = gr.Flow({lab[i]: lab[j] for i, j in comp.flow.f.items()},
                   tuple(lab[v] for v in comp.flow.order))
    angles = {lab[v]: k for v, k in comp.angles.items()}

    # flow constraints among computation vertices, carried over to P order
    deps = comp.deps
    before: dict[int, set] = {}
    for v in target.vertices:
        srcs = set(deps.zdep.get(v, ()))
        if v in deps.xdep:
            srcs.add(deps.xdep[v])
        before[lab[v]] = {lab[u] for u in srcs}
    p_order = random_linear_extension(sorted(dotted.p_vertices), before, rng)
    rank = {v: k + 1 for k, v in enumerate(p_order)}
    slots = {}
    for a, (i, j) in dotted.edge_of.items():
        ri, rj = sorted((rank[i], rank[j]))
        slots[a_vertex_position(total, ri, rj)] = a
    a_order = [slots[k] for k in sorted(slots)]
    order = tuple(a_order) + tuple(p_order)

    pattern = pt.Pattern(g, flow, angles, order, dummies, white | black, bridges, pt.CLASSICAL)
    return P8Choice(pattern, n, parts, TrapConfig(white, black, dummies), p_map, encoding,
                    circuit, tuple(p_order))


@dataclass
class VerifiedOutcome:
    outcome: pr.OutcomeRecord
    accept: bool
    trap_bits: dict
    bits: tuple
    decode_error: bool
    transcript: pr.Transcript | None = None


def run_protocol8(choice: P8Choice, rng: np.random.Generator, attack: pr.AttackSpec | None = None,
                  classical_input: Mapping[int, int] | None = None, transport=None,
                  server_rng: np.random.Generator | None = None) -> VerifiedOutcome:
    """One session of the verifiable protocol.

    ``classical_input`` is keyed by vertices of the logical circuit; inputs
    of every encoded copy receive the same bit.
    """
    pattern = choice.pattern
    ci = None
    if choice.pattern.inputs:
        ci = {}
        src = choice.logical
        m = src.m
        comp_in = choice.encoding.encode(src).inputs
        for v in comp_in:
            ci[choice.p_map[v]] = (classical_input or {}).get(v % m, 0)
    client = pr.Client(pattern, "P2", rng, classical_input=ci)
    server_rng = server_rng if server_rng is not None else np.random.default_rng(rng.integers(2**63))
    if attack is None:
        server = pr.HonestServer(client.env, server_rng)
    else:
        server = pr.AdversarialServer(client.env, attack, server_rng)
    transcript, outcome = pr.run_session(client, server, transport)
    bits, flagged = choice.encoding.decode(outcome.output)
    return VerifiedOutcome(outcome, bool(outcome.accept), outcome.trap_bits, bits, flagged, transcript)


# ---------------------------------------------------------------------------


def incorrect_projector(ideal, trap_state) -> np.ndarray:
    """``(I - P_ideal) x |eta><eta|`` on output space then trap space.

    ``ideal`` may be a state vector, a density matrix (its support is used)
    or a tuple of classical bits. ``trap_state`` is the vector ``|eta>``;
    pass ``None`` when no trap qubit is involved.
    """
    if isinstance(ideal, tuple):
        dim = 2 ** len(ideal)
        vec = np.zeros(dim, dtype=complex)
        vec[int("".join(map(str, ideal)) or "0", 2)] = 1
        ideal = vec
    ideal = np.asarray(ideal, dtype=complex)
    if ideal.ndim == 1:
        if abs(np.linalg.norm(ideal) - 1) > 1e-10:
            raise ValueError("ideal vector is not normalized")
        support = np.outer(ideal, ideal.conj())
    else:
        w, v = np.linalg.eigh(ideal)
        keep = v[:, w > 1e-10]
        support = keep @ keep.conj().T
    perp = np.eye(support.shape[0]) - support
    if trap_state is None:
        return perp
    eta = np.asarray(trap_state, dtype=complex)
    if eta.ndim != 1:
        raise ValueError("trap state must be a vector")
    return np.kron(perp, np.outer(eta, eta.conj()))
