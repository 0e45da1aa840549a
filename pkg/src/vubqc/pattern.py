"""Measurement patterns and their honest single-party execution.

A pattern lives on an open graph ``G``. Some vertices play special roles:

* dummies ``D`` are prepared in ``|d>`` and only cut the graph;
* bridges are measured in the Pauli-Y basis to join their two neighbours;
* traps are isolated qubits measured at angle 0.

What remains after cutting the dummies, bridging and dropping traps is the
computation graph. Flow dependencies are taken on that graph, restricted to
pairs that survive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import graphs as gr
from . import sim

__all__ = [
    "QUANTUM",
    "CLASSICAL",
    "PatternError",
    "Pattern",
    "Dependencies",
    "Random",
    "Forced",
    "ReferenceResult",
    "BranchRecord",
    "adapted_angle",
    "bridge_rotation",
    "run_reference",
    "branch_enumerate",
    "embed_dotted",
    "line_pattern",
    "with_output_mode",
    "choi_input",
    "unitary_from_choi",
    "same_up_to_phase",
]

QUANTUM = "quantum"
CLASSICAL = "classical"
Y_ANGLE = 2


class PatternError(ValueError):
    pass


def adapted_angle(phi: int, theta: int = 0, r: int = 0, x: int = 0, sx: int = 0,
                  sz: int = 0, alpha: int = 0) -> int:
    """Angle index sent to the server.

    ``sx`` and ``sz`` are the parities of the X and Z dependencies, ``x`` the
    input pad bit and ``alpha`` the residual rotation left by bridges. The
    result is always in ``0..7``.
    """
    sign_phi = -1 if (x + sx) % 2 else 1
    sign_alpha = -1 if x % 2 else 1
    return (sign_phi * phi + sign_alpha * alpha + 4 * (sz + r) + theta) % 8


def bridge_rotation(s: int) -> int:
    """Z rotation left on each neighbour after a Y outcome ``s``."""
    return (Y_ANGLE + 4 * s) % 8


@dataclass(frozen=True)
class Dependencies:
    comp: gr.OpenGraph
    f: Mapping[int, int]
    xdep: Mapping[int, int]
    zdep: Mapping[int, frozenset]
    pads: Mapping[int, frozenset]
    bridged_by: Mapping[int, frozenset]


@dataclass(frozen=True)
class Pattern:
    """A measurement pattern.

    ``angles`` must cover every measured computation vertex. ``order`` lists
    every measured vertex: all vertices in classical mode, all non-outputs
    otherwise.
    """

    graph: gr.OpenGraph
    flow: gr.Flow
    angles: Mapping[int, int]
    order: tuple[int, ...]
    dummies: frozenset = frozenset()
    traps: frozenset = frozenset()
    bridges: frozenset = frozenset()
    output_mode: str = QUANTUM

    def __post_init__(self):
        object.__setattr__(self, "angles", {int(k): int(v) % 8 for k, v in self.angles.items()})
        object.__setattr__(self, "order", tuple(self.order))
        for name in ("dummies", "traps", "bridges"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        self.validate()

    # structure -------------------------------------------------------------
    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def inputs(self) -> tuple:
        return self.graph.inputs

    @property
    def outputs(self) -> tuple:
        return self.graph.outputs

    @property
    def measured(self) -> tuple:
        if self.output_mode == CLASSICAL:
            return self.graph.vertices
        outs = set(self.graph.outputs)
        return tuple(v for v in self.graph.vertices if v not in outs)

    @property
    def computation_outputs(self) -> tuple:
        skip = self.dummies | self.traps
        return tuple(o for o in self.graph.outputs if o not in skip)

    @property
    def returned(self) -> tuple:
        """Qubits handed back in quantum mode (traps included)."""
        return self.graph.outputs if self.output_mode == QUANTUM else ()

    def angle(self, v: int) -> int:
        if v in self.bridges:
            return Y_ANGLE
        if v in self.dummies or v in self.traps:
            return 0
        return self.angles.get(v, 0)

    @cached_property
    def deps(self) -> Dependencies:
        g = self.graph.without(self.dummies)
        for b in sorted(self.bridges):
            g = gr.bridge(g, b)
        comp = g.without(self.traps)
        verts = set(comp.vertices)
        f = {i: j for i, j in self.flow.f.items() if i in verts and j in verts}
        xdep = {j: i for i, j in f.items()}
        zdep: dict[int, set] = {v: set() for v in verts}
        for i, fi in f.items():
            for j in comp.neighbors(fi):
                if j != i:
                    zdep[j].add(i)
        inputs = set(self.graph.inputs)
        pads = {
            v: frozenset(k for k in self.graph.neighbors(v) if k in inputs)
            for v in self.graph.vertices
        }
        bridged: dict[int, set] = {v: set() for v in self.graph.vertices}
        for b in self.bridges:
            for a in self.graph.neighbors(b):
                bridged[a].add(b)
        return Dependencies(
            comp,
            f,
            xdep,
            {v: frozenset(s) for v, s in zdep.items()},
            pads,
            {v: frozenset(s) for v, s in bridged.items()},
        )

    def validate(self) -> None:
        g = self.graph
        verts = set(g.vertices)
        for name in ("dummies", "traps", "bridges"):
            if not getattr(self, name) <= verts:
                raise PatternError(f"{name} reference unknown vertices")
        if self.dummies & set(g.inputs):
            raise PatternError("dummies may not be inputs")
        if self.traps & (self.dummies | self.bridges | set(g.inputs)):
            raise PatternError("traps must be plain non-input vertices")
        if self.bridges & (self.dummies | set(g.outputs) | set(g.inputs)):
            raise PatternError("bridges must be measured non-input vertices")
        for t in self.traps:
            if not g.neighbors(t) <= self.dummies:
                raise PatternError(f"trap {t} has a non-dummy neighbour")
        if self.output_mode not in (QUANTUM, CLASSICAL):
            raise PatternError(f"unknown output mode {self.output_mode!r}")
        measured = self.measured
        if sorted(self.order) != sorted(measured):
            raise PatternError("order must list every measured vertex exactly once")
        try:
            deps = self.deps
        except gr.GraphError as exc:
            raise PatternError(f"bridge failed: {exc}") from exc
        pos = {v: k for k, v in enumerate(self.order)}
        first_comp = min(
            (pos[v] for v in deps.comp.vertices if v in pos), default=len(self.order)
        )
        for b in self.bridges:
            if pos[b] > first_comp:
                raise PatternError("bridges must be measured before computation vertices")
        for v in deps.comp.vertices:
            if v in pos and v not in self.angles:
                raise PatternError(f"missing angle for vertex {v}")
            srcs = set(deps.zdep.get(v, ()))
            if v in deps.xdep:
                srcs.add(deps.xdep[v])
            for src in srcs:
                if src not in pos:
                    raise PatternError(f"dependency source {src} is never measured")
                if v in pos and pos[src] > pos[v]:
                    raise PatternError(f"vertex {v} measured before its dependency {src}")

    # angle bookkeeping ------------------------------------------------------
    def dependency_bits(self, v: int, s: Mapping[int, int]) -> tuple[int, int]:
        deps = self.deps
        sx = s.get(deps.xdep[v], 0) if v in deps.xdep else 0
        sz = sum(s.get(j, 0) for j in deps.zdep.get(v, ())) % 2
        return sx, sz

    def alpha(self, v: int, s: Mapping[int, int]) -> int:
        return sum(bridge_rotation(s.get(b, 0)) for b in self.deps.bridged_by[v]) % 8

    def pad_parity(self, v: int, x: Mapping[int, int]) -> int:
        return sum(x.get(k, 0) for k in self.deps.pads[v]) % 2

    def delta(self, v: int, s: Mapping[int, int], theta: Mapping[int, int] | None = None,
              r: Mapping[int, int] | None = None, x: Mapping[int, int] | None = None) -> int:
        """Adapted angle for measured vertex ``v`` given corrected outcomes ``s``."""
        theta = theta or {}
        r = r or {}
        x = x or {}
        if v in self.dummies:
            return (theta.get(v, 0) + 4 * r.get(v, 0)) % 8
        if v in self.deps.comp.vertices:
            sx, sz = self.dependency_bits(v, s)
        else:
            sx, sz = 0, 0
        sz += self.pad_parity(v, x)
        return adapted_angle(
            self.angle(v), theta.get(v, 0), r.get(v, 0), x.get(v, 0), sx, sz, self.alpha(v, s)
        )

    def correct_output(self, env: sim.Environment, o: int, s: Mapping[int, int],
                       theta: Mapping[int, int] | None = None,
                       x: Mapping[int, int] | None = None) -> None:
        """Undo pads, bridge rotations and byproducts on returned output ``o``."""
        theta = theta or {}
        x = x or {}
        if theta.get(o, 0):
            env.local(o, ("Z", -theta[o] % 8))
        if x.get(o, 0):
            env.local(o, "X")
        if self.pad_parity(o, x):
            env.local(o, "Z")
        a = self.alpha(o, s)
        if a:
            env.local(o, ("Z", -a % 8))
        sx, sz = self.dependency_bits(o, s)
        if sx:
            env.local(o, "X")
        if sz:
            env.local(o, "Z")

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "angles": [[v, self.angles[v]] for v in sorted(self.angles)],
            "bridges": sorted(self.bridges),
            "dummies": sorted(self.dummies),
            "flow": self.flow.to_dict(),
            "graph": self.graph.to_dict(),
            "order": list(self.order),
            "output_mode": self.output_mode,
            "traps": sorted(self.traps),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Pattern":
        return cls(
            graph=gr.OpenGraph.from_dict(d["graph"]),
            flow=gr.Flow.from_dict(d["flow"]),
            angles={int(v): int(k) for v, k in d["angles"]},
            order=tuple(int(v) for v in d["order"]),
            dummies=frozenset(int(v) for v in d.get("dummies", ())),
            traps=frozenset(int(v) for v in d.get("traps", ())),
            bridges=frozenset(int(v) for v in d.get("bridges", ())),
            output_mode=d.get("output_mode", QUANTUM),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "Pattern":
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class Random:
    rng: np.random.Generator


@dataclass(frozen=True)
class Forced:
    bits: Mapping[int, int]


@dataclass
class ReferenceResult:
    s: dict
    probability: float
    env: sim.Environment
    outputs: tuple
    refs: tuple = ()
    bits: tuple | None = None
    null: bool = False

    def vector(self, qids: Sequence | None = None) -> np.ndarray:
        """Corrected output vector over ``qids`` (default: outputs then refs)."""
        if qids is None:
            qids = list(self.outputs) + list(self.refs)
        return self.env.vector(list(qids))

    def density(self, qids: Sequence) -> np.ndarray:
        return self.env.reduced_density(list(qids))


@dataclass(frozen=True)
class BranchRecord:
    s: tuple
    probability: float
    output: np.ndarray | tuple


def _ref_ids(n: int) -> tuple:
    return tuple(f"ref{k}" for k in range(n))


def _prepare(pattern: Pattern, input_state, dummy_bits, n_refs, factoring, classical_input=None):
    env = sim.Environment(factoring)
    g = pattern.graph
    dummy_bits = dummy_bits or {}
    refs = _ref_ids(n_refs)
    if classical_input is None:
        ins = list(g.inputs)
        if input_state is None:
            vec = np.ones(2 ** (len(ins) + n_refs), dtype=complex) / np.sqrt(2 ** (len(ins) + n_refs))
        else:
            vec = np.asarray(input_state, dtype=complex)
        env.add_register(ins + list(refs), vec)
        for v in ins:
            if sum(dummy_bits.get(j, 0) for j in g.neighbors(v) if j in pattern.dummies) % 2:
                env.local(v, "Z")
    else:
        ins = []
    for v in g.vertices:
        if v in ins:
            continue
        if v in pattern.dummies:
            env.add(v, sim.Computational(dummy_bits.get(v, 0)))
        else:
            k = 4 * sum(dummy_bits.get(j, 0) for j in g.neighbors(v) if j in pattern.dummies)
            if classical_input is not None and v in g.inputs:
                k += 4 * (classical_input.get(v, 0) & 1)
            env.add(v, sim.PlusTheta(k % 8))
    for i, j in g.sorted_edges():
        env.cz(i, j)
    return env, refs


def run_reference(pattern: Pattern, input_state=None, mode=None, dummy_bits=None,
                  n_refs: int = 0, factoring: bool = True, classical_input=None) -> ReferenceResult:
    """Honest execution without any blinding.

    Parameters
    ----------
    input_state : array, optional
        Joint vector over ``pattern.inputs`` followed by ``n_refs`` reference
        qubits, big-endian. Defaults to ``|+>`` on every qubit.
    mode : Random or Forced
        Outcome policy; ``Forced`` takes raw outcome bits per vertex.
    classical_input : mapping, optional
        Input bits prepared as ``|+_{i pi}>``; replaces ``input_state``.
    """
    if mode is None:
        mode = Random(np.random.default_rng())
    env, refs = _prepare(pattern, input_state, dummy_bits, n_refs, factoring, classical_input)
    s: dict[int, int] = {}
    prob = 1.0
    for v in pattern.order:
        k = pattern.delta(v, s)
        if isinstance(mode, Forced):
            b, p = env.measure(v, sim.XY(k), forced=mode.bits.get(v, 0))
        else:
            b, p = env.measure(v, sim.XY(k), rng=mode.rng)
        s[v] = b
        prob *= p
    bits = None
    outs = pattern.computation_outputs
    if pattern.output_mode == QUANTUM:
        for o in outs:
            pattern.correct_output(env, o, s)
    else:
        bits = tuple(s[o] for o in outs)
    return ReferenceResult(s, prob, env, tuple(pattern.graph.outputs) if pattern.output_mode == QUANTUM else (),
                           refs, bits, env.null)


def branch_enumerate(pattern: Pattern, input_state=None, dummy_bits=None, cap: int = 12,
                     n_refs: int = 0, output_qubits: Sequence | None = None) -> list[BranchRecord]:
    """Every outcome string of the measured vertices, zero-probability
    branches included, via forced measurements.

    The output of each record is the corrected vector over
    ``output_qubits`` (default: computation outputs then references) in
    quantum mode, or the output bits in classical mode.
    """
    order = pattern.order
    if len(order) > cap:
        raise PatternError(f"{len(order)} measured qubits exceeds cap {cap}")
    env0, refs = _prepare(pattern, input_state, dummy_bits, n_refs, True)
    if output_qubits is None:
        output_qubits = list(pattern.computation_outputs) + list(refs)
    out: list[BranchRecord] = []

    def walk(env, depth, s, prob):
        if depth == len(order):
            if pattern.output_mode == QUANTUM:
                if prob > sim.NULL_TOL:
                    for o in pattern.computation_outputs:
                        pattern.correct_output(env, o, s)
                    vec = env.vector(output_qubits)
                else:
                    vec = np.zeros(2 ** len(output_qubits), dtype=complex)
                out.append(BranchRecord(tuple(s[v] for v in order), prob, vec))
            else:
                bits = tuple(s[o] for o in pattern.computation_outputs)
                out.append(BranchRecord(tuple(s[v] for v in order), prob, bits))
            return
        v = order[depth]
        k = pattern.delta(v, s)
        for b in (0, 1):
            e = env.copy() if b == 0 else env
            _, p = e.measure(v, sim.XY(k), forced=b)
            walk(e, depth + 1, {**s, v: b}, prob * p)

    walk(env0, 0, {}, 1.0)
    return out


# ---------------------------------------------------------------------------
# constructions and oracle helpers


def line_pattern(angles: Sequence[int], with_input: bool = True,
                 output_mode: str = QUANTUM) -> Pattern:
    """Line with ``len(angles) + 1`` vertices; the last one is the output."""
    m = len(angles) + 1
    g = gr.line_graph(m, with_input)
    ang = {i: a for i, a in enumerate(angles)}
    order = tuple(range(m - 1))
    if output_mode == CLASSICAL:
        ang[m - 1] = 0
        order = tuple(range(m))
    return Pattern(g, gr.line_flow(m), ang, order, output_mode=output_mode)


def with_output_mode(pattern: Pattern, mode: str) -> Pattern:
    """Same computation with outputs returned (quantum) or measured at
    angle 0 after every other vertex (classical)."""
    if mode == pattern.output_mode:
        return pattern
    outs = pattern.graph.outputs
    if mode == CLASSICAL:
        order = pattern.order + tuple(outs)
        angles = {**{o: 0 for o in pattern.computation_outputs}, **pattern.angles}
    elif mode == QUANTUM:
        order = tuple(v for v in pattern.order if v not in set(outs))
        angles = {v: k for v, k in pattern.angles.items() if v not in set(outs)}
    else:
        raise PatternError(f"unknown output mode {mode!r}")
    return Pattern(pattern.graph, pattern.flow, angles, order, pattern.dummies, pattern.traps,
                   pattern.bridges, mode)


def embed_dotted(pattern: Pattern, n: int, p_map: Mapping[int, int] | None = None,
                 dotted: gr.DottedGraph | None = None) -> Pattern:
    """Re-express a plain pattern (no dummies, traps or bridges) on ``K~_n``.

    Target vertex ``k`` (sorted order) sits on P-vertex ``p_map[k]``
    (default ``k``). A-vertices over wanted edges become Y bridges, all other
    A-vertices and unused P-vertices become dummies. Bridges are measured
    first.
    """
    if pattern.dummies or pattern.traps or pattern.bridges:
        raise PatternError("embed_dotted needs a plain pattern")
    target = pattern.graph
    if target.m > n:
        raise gr.GraphError("size-mismatch", f"target has {target.m} vertices, need at most {n}")
    dotted = dotted or gr.dotted_complete(n)
    if p_map is None:
        p_map = {v: k for k, v in enumerate(target.vertices)}
    else:
        p_map = {v: p_map[k] for k, v in enumerate(target.vertices)}
    used = set(p_map.values())
    wanted = {gr._canon(p_map[i], p_map[j]) for i, j in target.edges}
    bridges = frozenset(a for a, e in dotted.edge_of.items() if e in wanted)
    dummies = frozenset(a for a in dotted.a_vertices if a not in bridges) | frozenset(
        p for p in dotted.p_vertices if p not in used
    )
    g = dotted.graph.with_io(
        tuple(p_map[v] for v in target.inputs), tuple(p_map[v] for v in target.outputs)
    )
    flow = gr.Flow(
        {p_map[i]: p_map[j] for i, j in pattern.flow.f.items()},
        tuple(p_map[v] for v in pattern.flow.order),
    )
    angles = {p_map[v]: k for v, k in pattern.angles.items()}
    measured_extra = sorted(dummies - set(g.outputs)) if pattern.output_mode == QUANTUM else sorted(dummies)
    order = tuple(sorted(bridges)) + tuple(measured_extra) + tuple(p_map[v] for v in pattern.order)
    return Pattern(g, flow, angles, order, dummies, frozenset(), bridges, pattern.output_mode)


def choi_input(n: int) -> np.ndarray:
    """Maximally entangled state between ``n`` inputs and ``n`` references."""
    d = 2**n
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def unitary_from_choi(vec: np.ndarray, n_out: int, n_in: int) -> np.ndarray:
    """Map ``(U x I)|Phi+>`` over outputs then references back to ``U``."""
    return vec.reshape(2**n_out, 2**n_in) * np.sqrt(2**n_in)


def same_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether two equal-shape operators agree up to a global phase."""
    d = a.shape[0]
    overlap = abs(np.trace(a.conj().T @ b)) / d
    return abs(overlap - 1) < tol and np.allclose(np.abs(a), np.abs(b), atol=1e-7)
