"""Brute-force and statistical oracles for the security statements.

* :func:`blindness_audit` averages Bob's initial view over Alice's secrets
  and tallies the angles he is sent.
* :func:`p_incorrect_exact` sums the probability of accepting a wrong
  output over every trap position, secret and measurement branch.
* :func:`partition_stats` counts trap placements over random partitions.
* :func:`graph_state` and the reduction checks back the graph lemmas.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from . import graphs as gr
from . import pattern as pt
from . import protocol as pr
from . import sim
from . import verification as vf

__all__ = [
    "Exact",
    "MonteCarlo",
    "BlindConfig",
    "BlindnessReport",
    "blindness_audit",
    "AuditCapError",
    "all_single_pauli_attacks",
    "VerifiabilityEntry",
    "p_incorrect_exact",
    "p_incorrect_sampled",
    "p_incorrect_cells",
    "p_incorrect_engine_cell",
    "Poly",
    "Amplified",
    "BoundReport",
    "bound_suite",
    "Exhaustive",
    "Sampled",
    "PartitionStats",
    "partition_stats",
    "graph_state",
    "pauli_measurement_fidelity",
    "reduction_fidelity",
    "all_graphs",
]


class AuditCapError(ValueError):
    pass


# ---------------------------------------------------------------------------
# blindness


@dataclass(frozen=True)
class Exact:
    cap: int = 3


@dataclass(frozen=True)
class MonteCarlo:
    samples: int
    seed: int = 0
    chunk: int = 4096


@dataclass(frozen=True)
class BlindConfig:
    """An honest computation whose secrets are averaged out.

    ``s`` fixes the corrected outcome of each measured vertex (default all
    zero); Bob's view is then a function of the secrets alone.
    """

    pattern: pt.Pattern
    variant: str
    input_state: np.ndarray | None = None
    classical_input: Mapping[int, int] | None = None
    s: Mapping[int, int] | None = None


@dataclass
class BlindnessReport:
    delta_histogram: np.ndarray
    bob_state_distance: float
    mode: object
    samples: int
    flat: bool
    p_values: tuple = ()
    transcripts: int = 0

    def to_dict(self) -> dict:
        return {
            "delta_histogram": self.delta_histogram.tolist(),
            "bob_state_distance": self.bob_state_distance,
            "mode": type(self.mode).__name__,
            "samples": self.samples,
            "flat": self.flat,
            "p_values": list(self.p_values),
            "transcripts": self.transcripts,
        }


def _secret_space(p: pt.Pattern, variant: str):
    verts = p.graph.vertices
    inputs = () if variant == "P2" else p.inputs
    dummies = tuple(sorted(p.dummies))
    return verts, tuple(p.order), inputs, dummies


def blindness_audit(config: BlindConfig, mode) -> BlindnessReport:
    p = config.pattern
    if isinstance(mode, Exact):
        if p.m > mode.cap:
            raise AuditCapError(f"exact audit needs m <= {mode.cap}, got {p.m}")
        return _blind_exact(config, mode)
    if isinstance(mode, MonteCarlo):
        return _blind_monte_carlo(config, mode)
    raise ValueError(f"unknown mode {mode!r}")


def _blind_exact(config: BlindConfig, mode: Exact) -> BlindnessReport:
    p, variant = config.pattern, config.variant
    verts, order, inputs, dummies = _secret_space(p, variant)
    s = dict(config.s or {v: 0 for v in order})
    hist = np.zeros((len(order), 8), dtype=np.int64)
    groups: dict[tuple, list] = {}
    total = None
    count = 0
    for theta_t in itertools.product(range(8), repeat=len(verts)):
        theta = dict(zip(verts, theta_t))
        for r_t in itertools.product((0, 1), repeat=len(order)):
            r = dict(zip(order, r_t))
            for x_t in itertools.product((0, 1), repeat=len(inputs)):
                x = dict(zip(inputs, x_t))
                for d_t in itertools.product((0, 1), repeat=len(dummies)):
                    d = dict(zip(dummies, d_t))
                    sec = pr.ClientSecrets(theta, r, x, d, p.traps)
                    client = pr.Client(p, variant, np.random.default_rng(0),
                                       input_state=config.input_state,
                                       classical_input=config.classical_input, secrets=sec)
                    client.prepare()
                    rho = client.env.reduced_density(list(verts))
                    deltas = tuple(p.delta(v, s, theta, r, x) for v in order)
                    for k, dv in enumerate(deltas):
                        hist[k, dv] += 1
                    acc = groups.get(deltas)
                    groups[deltas] = [rho, 1] if acc is None else [acc[0] + rho, acc[1] + 1]
                    total = rho if total is None else total + rho
                    count += 1
    dim = 2 ** len(verts)
    mixed = np.eye(dim) / dim
    dist = max(sim.trace_distance(acc / n, mixed) for acc, n in groups.values())
    dist = max(dist, sim.trace_distance(total / count, mixed))
    flat = bool(all((row == row[0]).all() for row in hist))
    return BlindnessReport(hist, dist, mode, count, flat, (), len(groups))


def _factor_product(vec: np.ndarray, n: int) -> list[np.ndarray]:
    """Split a product state into single-qubit vectors or raise."""
    out = []
    rest = np.asarray(vec, dtype=complex)
    for _ in range(n - 1):
        mat = rest.reshape(2, -1)
        u, sv, vh = np.linalg.svd(mat)
        if sv[1] > 1e-9:
            raise ValueError("Monte Carlo audit needs a product input state")
        out.append(u[:, 0] * sv[0])
        rest = vh[0]
    out.append(rest)
    return out


def _blind_monte_carlo(config: BlindConfig, mode: MonteCarlo) -> BlindnessReport:
    """Sampled audit with vectorised preparation.

    Each sample draws every secret independently; Bob's initial state is a
    product over vertices, so the ensemble average is accumulated as
    ``Psi^dagger Psi`` in chunks.
    """
    p, variant = config.pattern, config.variant
    verts, order, inputs, dummies = _secret_space(p, variant)
    m = len(verts)
    s = dict(config.s or {v: 0 for v in order})
    rng = np.random.default_rng(mode.seed)
    col = {v: k for k, v in enumerate(verts)}
    qin = {}
    if inputs:
        vec = config.input_state
        if vec is None:
            vec = np.ones(2 ** len(inputs), dtype=complex) / np.sqrt(2 ** len(inputs))
        qin = dict(zip(inputs, _factor_product(vec, len(inputs))))
    ci = dict(config.classical_input or {})
    dim = 2**m
    acc = np.zeros((dim, dim), dtype=complex)
    hist = np.zeros((len(order), 8), dtype=np.int64)
    done = 0
    while done < mode.samples:
        n = min(mode.chunk, mode.samples - done)
        theta = rng.integers(0, 8, (n, m))
        r = rng.integers(0, 2, (n, m))
        x = np.zeros((n, m), dtype=np.int64)
        for v in inputs:
            x[:, col[v]] = rng.integers(0, 2, n)
        dbits = np.zeros((n, m), dtype=np.int64)
        for v in dummies:
            dbits[:, col[v]] = rng.integers(0, 2, n)
        psi = np.ones((n, 1), dtype=complex)
        for v in verts:
            c = col[v]
            dpar = sum(dbits[:, col[j]] for j in p.graph.neighbors(v) if j in p.dummies) % 2
            if v in p.dummies:
                amp = np.zeros((n, 2), dtype=complex)
                amp[np.arange(n), dbits[:, c]] = 1
            elif v in qin:
                a0, a1 = qin[v]
                flip = x[:, c] == 1
                amp = np.stack([np.where(flip, a1, a0), np.where(flip, a0, a1)], axis=1)
                amp[:, 1] *= sim.W8[(theta[:, c] + 4 * dpar) % 8]
            else:
                k = theta[:, c] + 4 * dpar
                if variant == "P2" and v in p.inputs:
                    k = k + 4 * (ci.get(v, 0) & 1)
                amp = np.stack([np.ones(n), sim.W8[k % 8]], axis=1) / np.sqrt(2)
            psi = (psi[:, :, None] * amp[:, None, :]).reshape(n, -1)
        acc += psi.T @ psi.conj()
        for k, v in enumerate(order):
            c = col[v]
            if v in p.dummies:
                delta = theta[:, c] + 4 * r[:, c]
            else:
                xin = {u: x[:, col[u]] for u in inputs}
                pad = sum(xin[u] for u in p.deps.pads[v] if u in xin) % 2 if inputs else 0
                if v in p.deps.comp.vertices:
                    sx, sz = p.dependency_bits(v, s)
                else:
                    sx, sz = 0, 0
                xv = x[:, c]
                sign_phi = 1 - 2 * ((xv + sx) % 2)
                sign_alpha = 1 - 2 * xv
                delta = (sign_phi * p.angle(v) + sign_alpha * p.alpha(v, s)
                         + 4 * (sz + pad + r[:, c]) + theta[:, c])
            hist[k] += np.bincount(delta % 8, minlength=8)
        done += n
    rho = acc / mode.samples
    dist = sim.trace_distance(rho, np.eye(dim) / dim)
    pvals = tuple(float(stats.chisquare(row).pvalue) for row in hist)
    return BlindnessReport(hist, dist, mode, mode.samples, False, pvals, 0)


# ---------------------------------------------------------------------------
# verifiability


def all_single_pauli_attacks(base: pt.Pattern, stages: Sequence[int] | None = None) -> list:
    """Identity plus every single-qubit Pauli on a qubit Bob still holds.

    Stages default to every stage of the session, from receipt of the
    qubits to the return of the outputs.
    """
    order = base.order
    steps = len(order)
    stages = range(steps + 2) if stages is None else stages
    out = [pr.AttackSpec()]
    for stage in stages:
        gone = set(order[:max(stage - 1, 0)])
        live = [v for v in base.graph.vertices if v not in gone]
        if stage == steps + 1:
            live = [v for v in base.returned]
        for q in live:
            for pauli in "XYZ":
                out.append(pr.AttackSpec(((stage, pr.PauliDev({q: pauli})),)))
    return out


@dataclass
class VerifiabilityEntry:
    attack: object
    p_incorrect: float
    mass: float
    cardinalities: dict
    per_trap: dict = field(default_factory=dict)
    stderr: float = 0.0

    def to_dict(self) -> dict:
        return {
            "attack": describe_attack(self.attack),
            "p_incorrect": self.p_incorrect,
            "mass": self.mass,
            "cardinalities": self.cardinalities,
            "per_trap": {str(k): v for k, v in sorted(self.per_trap.items())},
            "stderr": self.stderr,
        }


def describe_attack(attack: pr.AttackSpec) -> list:
    out = []
    for stage, dev in attack.stages:
        if isinstance(dev, pr.PauliDev):
            desc = {"pauli": {str(k): v for k, v in sorted(dev.paulis.items(), key=lambda kv: repr(kv[0]))}}
        elif isinstance(dev, pr.DeltaShift):
            desc = {"delta_shift": dev.shift}
        elif isinstance(dev, pr.ResultFlip):
            desc = {"result_flip": True}
        else:
            desc = {"unitary": [str(q) for q in dev.qubits]}
        out.append({"stage": stage, **desc})
    return out


def trap_positions(base: pt.Pattern) -> tuple:
    """Vertices that can host a trap: neither inputs nor next to one."""
    ins = set(base.inputs)
    return tuple(v for v in base.graph.vertices
                 if v not in ins and not (base.graph.neighbors(v) & ins))


def _ancillas(attack: pr.AttackSpec) -> list:
    names = []
    for _, dev in attack.stages:
        if isinstance(dev, pr.UnitaryDev):
            names += [q for q in dev.qubits if isinstance(q, str) and q not in names]
    return names


def _ideal_projector(tp: pt.Pattern, t: int, d: Mapping[int, int], input_state):
    """Projector onto the complement of the honest output support.

    Quantum mode: a matrix over the returned qubits other than ``t``.
    Classical mode: the set of output bit strings the honest run can give.
    """
    if tp.output_mode == pt.QUANTUM:
        qids = [o for o in tp.outputs if o != t]
        recs = pt.branch_enumerate(tp, input_state, dict(d), output_qubits=qids)
        dim = 2 ** len(qids)
        rho = np.zeros((dim, dim), dtype=complex)
        for rec in recs:
            if rec.probability > 1e-12:
                rho += rec.probability * np.outer(rec.output, rec.output.conj())
        return qids, vf.incorrect_projector(rho, None)
    recs = pt.branch_enumerate(tp, input_state, dict(d))
    return None, {rec.output for rec in recs if rec.probability > 1e-12}


class _Dense:
    """Batched dense state: axis 0 runs over the ``theta`` grid."""

    def __init__(self, tensor: np.ndarray, labels: list):
        self.t = tensor
        self.labels = labels

    def ax(self, q) -> int:
        return self.labels.index(q) + 1

    def op(self, q, u: np.ndarray) -> None:
        a = self.ax(q)
        self.t = np.moveaxis(np.tensordot(u, self.t, axes=([1], [a])), 0, a)

    def ops(self, qs: Sequence, u: np.ndarray) -> None:
        k = len(qs)
        axes = [self.ax(q) for q in qs]
        t = np.tensordot(u.reshape((2,) * (2 * k)), self.t, axes=(list(range(k, 2 * k)), axes))
        self.t = np.moveaxis(t, list(range(k)), axes)

    def phase(self, q, k: np.ndarray) -> None:
        """``Z(k)`` with a batch of angle indices."""
        view = np.moveaxis(self.t, self.ax(q), 1)
        view[:, 1] *= sim.W8[k % 8].reshape((-1,) + (1,) * (view.ndim - 2))

    def cz(self, i, j) -> None:
        idx = [slice(None)] * self.t.ndim
        idx[self.ax(i)] = 1
        idx[self.ax(j)] = 1
        self.t[tuple(idx)] *= -1

    def project(self, q, delta: np.ndarray, bit: int) -> "_Dense":
        view = np.moveaxis(self.t, self.ax(q), 1)
        ph = np.conj(sim.W8[delta % 8]).reshape((-1,) + (1,) * (view.ndim - 2))
        sign = -1 if bit else 1
        out = (view[:, 0] + sign * ph * view[:, 1]) / np.sqrt(2)
        return _Dense(out, [lab for lab in self.labels if lab != q])

    def norms(self) -> np.ndarray:
        return (np.abs(self.t) ** 2).reshape(self.t.shape[0], -1).sum(axis=1)


def _stage(state: _Dense, attack: pr.AttackSpec, stage: int) -> None:
    for dev in attack.at(stage):
        if isinstance(dev, pr.PauliDev):
            for q, pauli in sorted(dev.paulis.items(), key=lambda kv: repr(kv[0])):
                if pauli != "I":
                    state.op(q, sim.gate(pauli))
        elif isinstance(dev, pr.UnitaryDev):
            state.ops(list(dev.qubits), np.asarray(dev.matrix, dtype=complex))


def _prepare_dense(tp: pt.Pattern, theta: np.ndarray, x, d, input_state, anc) -> _Dense:
    g = tp.graph
    col = {v: k for k, v in enumerate(g.vertices)}
    n = theta.shape[0]
    ins = list(g.inputs)
    if ins:
        vec = input_state
        if vec is None:
            vec = np.ones(2 ** len(ins), dtype=complex) / np.sqrt(2 ** len(ins))
        t = np.broadcast_to(np.asarray(vec, dtype=complex).reshape((1,) + (2,) * len(ins)),
                            (n,) + (2,) * len(ins)).copy()
    else:
        t = np.ones(n, dtype=complex)
    labels = list(ins)
    dpar = {v: sum(d.get(j, 0) for j in g.neighbors(v) if j in tp.dummies) % 2 for v in g.vertices}
    for v in g.vertices:
        if v in ins:
            continue
        if v in tp.dummies:
            amp = np.zeros((n, 2), dtype=complex)
            amp[:, d.get(v, 0)] = 1
        else:
            amp = np.stack([np.ones(n), sim.W8[(theta[:, col[v]] + 4 * dpar[v]) % 8]], axis=1) / np.sqrt(2)
        t = t[..., None] * amp.reshape((n,) + (1,) * (t.ndim - 1) + (2,))
        labels.append(v)
    for a in anc:
        zero = np.array([1, 0], dtype=complex)
        t = t[..., None] * zero
        labels.append(a)
    state = _Dense(t, labels)
    for v in ins:
        if x.get(v, 0):
            state.op(v, sim.gate("X"))
        state.phase(v, theta[:, col[v]] + 4 * dpar[v])
    return state


def p_incorrect_cells(base: pt.Pattern, attack: pr.AttackSpec, t: int,
                      input_state=None) -> dict:
    """Per-secret contributions for trap position ``t``.

    Returns a mapping ``(x, d, r) -> (contrib, mass)`` where both entries are
    arrays over the ``theta`` grid (vertex ``graph.vertices[k]`` is digit
    ``k`` of the flat index, most significant first). ``contrib`` is the
    branch-summed probability of accepting an incorrect output and
    ``mass`` the branch-summed probability.
    """
    tp, _ = vf.make_trap_pattern(base, t)
    g = tp.graph
    m = g.m
    col = {v: k for k, v in enumerate(g.vertices)}
    theta = np.indices((8,) * m).reshape(m, -1).T
    order = tp.order
    steps = len(order)
    anc = _ancillas(attack)
    ins = tp.inputs
    dummies = tuple(sorted(tp.dummies))
    used_r = tuple(v for v in g.vertices if v in set(order) or (v == t and v in tp.returned))
    fixes = {}
    for stage, dev in attack.stages:
        if isinstance(dev, pr.DeltaShift):
            fixes.setdefault(stage, [0, 0])[0] += dev.shift
        elif isinstance(dev, pr.ResultFlip):
            fixes.setdefault(stage, [0, 0])[1] ^= 1
    out = {}
    for d_t in itertools.product((0, 1), repeat=len(dummies)):
        d = dict(zip(dummies, d_t))
        qids, ideal = _ideal_projector(tp, t, d, input_state)
        for x_t in itertools.product((0, 1), repeat=len(ins)):
            x = dict(zip(ins, x_t))
            for r_t in itertools.product((0, 1), repeat=len(used_r)):
                r = dict(zip(used_r, r_t))
                state = _prepare_dense(tp, theta, x, d, input_state, anc)
                _stage(state, attack, 0)
                for i, j in g.sorted_edges():
                    state.cz(i, j)
                contrib = np.zeros(theta.shape[0])
                mass = np.zeros(theta.shape[0])

                def walk(st: _Dense, step: int, s: dict, b: dict):
                    nonlocal contrib, mass
                    if step == steps:
                        _stage(st, attack, steps + 1)
                        c, w = _leaf(tp, t, st, theta, col, s, b, r, x, qids, ideal)
                        contrib += c
                        mass += w
                        return
                    v = order[step]
                    _stage(st, attack, step + 1)
                    shift, flip = fixes.get(step + 1, (0, 0))
                    delta = (tp.delta(v, s, None, r, x) + theta[:, col[v]] + shift) % 8
                    for braw in (0, 1):
                        nxt = st.project(v, delta, braw)
                        rep = braw ^ flip
                        walk(nxt, step + 1, {**s, v: rep ^ r[v]}, {**b, v: rep})

                walk(state, 0, {}, {})
                out[(x_t, d_t, r_t)] = (contrib, mass)
    return out


def _leaf(tp, t, st: _Dense, theta, col, s, b, r, x, qids, ideal):
    if tp.output_mode == pt.CLASSICAL:
        w = st.norms()
        accept = b[t] == r[t]
        bits = tuple(s[o] for o in tp.computation_outputs)
        bad = bits not in ideal
        return (w if accept and bad else np.zeros_like(w)), w
    for o in tp.returned:
        if o == t or o in tp.dummies:
            continue
        st.phase(o, -theta[:, col[o]])
        if x.get(o, 0):
            st.op(o, sim.gate("X"))
        if tp.pad_parity(o, x):
            st.op(o, sim.gate("Z"))
        a = tp.alpha(o, s)
        if a:
            st.phase(o, np.full(theta.shape[0], -a))
        sx, sz = tp.dependency_bits(o, s)
        if sx:
            st.op(o, sim.gate("X"))
        if sz:
            st.op(o, sim.gate("Z"))
    w = st.norms()
    if t in tp.returned:
        st = st.project(t, theta[:, col[t]], 0)
    elif b[t] != r[t]:
        return np.zeros_like(w), w
    rest = [lab for lab in st.labels if lab not in qids]
    perm = [0] + [st.ax(q) for q in qids] + [st.ax(q) for q in rest]
    n = theta.shape[0]
    psi = np.transpose(st.t, perm).reshape(n, 2 ** len(qids), -1)
    c = np.einsum("bia,ij,bja->b", psi.conj(), ideal, psi).real
    return c, w


def _theta_index(theta: Mapping[int, int], verts: Sequence[int]) -> int:
    idx = 0
    for v in verts:
        idx = idx * 8 + theta[v] % 8
    return idx


def p_incorrect_engine_cell(base: pt.Pattern, attack: pr.AttackSpec, t: int,
                            secrets: pr.ClientSecrets, input_state=None) -> tuple[float, float]:
    """Same quantity as one cell of :func:`p_incorrect_cells` at one
    ``theta``, computed by running real sessions over every forced branch."""
    tp, _ = vf.make_trap_pattern(base, t)
    qids, ideal = _ideal_projector(tp, t, secrets.d, input_state)
    steps = len(tp.order)
    trap_out = t in tp.returned
    contrib = mass = 0.0
    for branch in itertools.product((0, 1), repeat=steps + int(trap_out)):
        forced = {k + 1: b for k, b in enumerate(branch[:steps])}
        tf = {t: branch[-1]} if trap_out else None
        variant = "P3" if tp.dummies else "P1"
        client = pr.Client(tp, variant, np.random.default_rng(0), input_state=input_state,
                           secrets=secrets, trap_forced=tf)
        server = pr.AdversarialServer(client.env, attack, np.random.default_rng(0), forced)
        _, outcome = pr.run_session(client, server)
        prob = server.probability * client.trap_probability
        if not trap_out:
            mass += prob
        elif branch[-1] == 0:
            # the two trap outcomes split one server branch
            mass += server.probability
        if not outcome.accept or prob < 1e-15:
            continue
        if tp.output_mode == pt.CLASSICAL:
            contrib += prob * (outcome.output not in ideal)
        else:
            rho = client.env.reduced_density(qids)
            contrib += prob * float(np.trace(ideal @ rho).real)
    return contrib, mass


def p_incorrect_exact(base: pt.Pattern, attack: pr.AttackSpec, input_state=None,
                      cap: int = 4) -> VerifiabilityEntry:
    """Exact probability of accepting an incorrect output with one random trap.

    The trap position is uniform over :func:`trap_positions`; ``theta``,
    ``r``, dummy bits and pads are uniform. Every measurement branch is
    enumerated.
    """
    if base.m > cap:
        raise AuditCapError(f"exact enumeration needs m <= {cap}, got {base.m}")
    cands = trap_positions(base)
    if not cands:
        raise ValueError("no vertex can host a trap")
    per_trap = {}
    masses = []
    cells = 0
    for t in cands:
        table = p_incorrect_cells(base, attack, t, input_state)
        cs = [c.mean() for c, _ in table.values()]
        ws = [w.mean() for _, w in table.values()]
        per_trap[t] = float(np.mean(cs))
        masses.append(float(np.mean(ws)))
        cells += len(table) * 8**base.m
    value = float(np.mean([per_trap[t] for t in cands]))
    card = {"traps": len(cands), "cells": cells, "theta": 8**base.m,
            "branches": 2 ** len(base.order)}
    return VerifiabilityEntry(attack, value, float(np.mean(masses)), card, per_trap)


def p_incorrect_sampled(base: pt.Pattern, attack: pr.AttackSpec, samples: int,
                        rng: np.random.Generator, input_state=None) -> VerifiabilityEntry:
    """Stratified estimate: equal samples per trap position, each sample
    enumerating every branch of one random secret through real sessions."""
    cands = trap_positions(base)
    per = max(1, samples // len(cands))
    per_trap, var = {}, []
    for t in cands:
        tp, _ = vf.make_trap_pattern(base, t)
        vals = []
        for _ in range(per):
            sec = pr.draw_secrets(tp, "P3", rng)
            vals.append(p_incorrect_engine_cell(base, attack, t, sec, input_state)[0])
        per_trap[t] = float(np.mean(vals))
        var.append(np.var(vals, ddof=1) / per if per > 1 else 0.0)
    value = float(np.mean(list(per_trap.values())))
    stderr = float(np.sqrt(np.sum(var)) / len(cands))
    card = {"traps": len(cands), "samples_per_trap": per, "branches": 2 ** len(base.order)}
    return VerifiabilityEntry(attack, value, 1.0, card, per_trap, stderr)


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class Poly:
    m: int
    classical: bool = False

    @property
    def value(self) -> Fraction:
        return 1 - Fraction(1, self.m if self.classical else 2 * self.m)


@dataclass(frozen=True)
class Amplified:
    c: Fraction
    d: int
    classical: bool = False

    @property
    def value(self) -> Fraction:
        c = Fraction(self.c)
        return (1 - c if self.classical else 1 - c / 2) ** self.d


@dataclass
class BoundReport:
    bound: float
    passed: bool
    worst_margin: float
    margins: list

    def to_dict(self) -> dict:
        return {"bound": self.bound, "pass": self.passed, "worst_margin": self.worst_margin,
                "margins": self.margins}


def bound_suite(results: Sequence[VerifiabilityEntry], bound, tol: float = 1e-12) -> BoundReport:
    b = float(bound.value)
    margins = [b - e.p_incorrect for e in results]
    worst = min(margins) if margins else b
    ok = all(0 <= e.p_incorrect <= 1 + tol for e in results) and worst >= -tol
    return BoundReport(b, bool(ok), float(worst), margins)


# ---------------------------------------------------------------------------
# trap placement statistics


@dataclass(frozen=True)
class Exhaustive:
    cap: int = 3


@dataclass(frozen=True)
class Sampled:
    samples: int
    seed: int = 0


@dataclass
class PartitionStats:
    partitions: int
    white: dict
    black: dict
    miss: dict


def _partitions(n: int):
    total = 3 * n
    verts = range(total)
    for p1 in itertools.combinations(verts, n):
        rest = [v for v in verts if v not in p1]
        for p2 in itertools.combinations(rest, n):
            p3 = tuple(v for v in rest if v not in p2)
            yield p1, p2, p3


def partition_stats(n: int, flips: Sequence[Sequence[int]] = (), mode=None) -> PartitionStats:
    """Trap statistics over equal three-way partitions of the P-vertices.

    ``white[p]`` is the probability that P-vertex ``p`` is a white trap,
    ``black[(i, j)]`` that the A-vertex between ``i`` and ``j`` is a black
    trap, and ``miss[k]`` that no vertex of ``flips[k]`` is a white trap.
    Exhaustive mode returns exact fractions.
    """
    mode = mode or Exhaustive()
    total = 3 * n
    pairs = list(itertools.combinations(range(total), 2))
    white = {p: 0 for p in range(total)}
    black = {e: 0 for e in pairs}
    miss = {k: 0 for k in range(len(flips))}

    def tally(p2, p3):
        p2, p3 = set(p2), set(p3)
        for p in p2:
            white[p] += 1
        for i, j in pairs:
            if i in p3 and j in p3:
                black[(i, j)] += 1
        for k, fl in enumerate(flips):
            if not p2 & set(fl):
                miss[k] += 1

    if isinstance(mode, Exhaustive):
        if n > mode.cap:
            raise AuditCapError(f"exhaustive partition count needs N <= {mode.cap}")
        count = 0
        for _, p2, p3 in _partitions(n):
            tally(p2, p3)
            count += 1
        assert count == math.factorial(total) // math.factorial(n) ** 3
        frac = lambda c: Fraction(c, count)  # noqa: E731
    else:
        rng = np.random.default_rng(mode.seed)
        count = mode.samples
        for _ in range(count):
            perm = rng.permutation(total)
            tally(perm[n:2 * n].tolist(), perm[2 * n:].tolist())
        frac = lambda c: c / count  # noqa: E731
    return PartitionStats(
        count,
        {p: frac(c) for p, c in white.items()},
        {e: frac(c) for e, c in black.items()},
        {k: frac(c) for k, c in miss.items()},
    )


# ---------------------------------------------------------------------------
# graph-state lemmas


def graph_state(g: gr.OpenGraph, vertices: Sequence[int] | None = None) -> np.ndarray:
    """Dense graph state over ``vertices`` (default sorted), big-endian."""
    vertices = list(g.vertices if vertices is None else vertices)
    n = len(vertices)
    pos = {v: k for k, v in enumerate(vertices)}
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))) & 1
    parity = np.zeros(2**n, dtype=np.int64)
    for i, j in g.edges:
        parity += bits[:, pos[i]] * bits[:, pos[j]]
    return ((-1.0) ** parity).astype(complex) / np.sqrt(2**n)


def _graph_env(g: gr.OpenGraph) -> sim.Environment:
    env = sim.Environment()
    for v in g.vertices:
        env.add(v, sim.PlusTheta(0))
    for i, j in g.sorted_edges():
        env.cz(i, j)
    return env


def pauli_measurement_fidelity(g: gr.OpenGraph, v: int, basis: str, s: int) -> float:
    """Measure ``v`` of the graph state in Z (``basis="Z"``) or Y and
    compare with the broken or bridged graph after local corrections.

    A Z outcome ``s`` leaves ``Z^s`` on every neighbour. A Y outcome ``s``
    on a degree-2 vertex leaves ``Z(2 + 4 s)`` on both neighbours. Returns
    0 for a zero-probability outcome.
    """
    env = _graph_env(g)
    if basis == "Z":
        _, p = env.measure(v, sim.PAULI_Z, forced=s)
        expected = gr.break_vertex(g, v)
        fix = [(u, "Z") for u in g.neighbors(v)] if s else []
    elif basis == "Y":
        if g.degree(v) != 2:
            raise gr.GraphError("invalid-degree", "Y bridge needs a degree-2 vertex")
        _, p = env.measure(v, sim.XY(pt.Y_ANGLE), forced=s)
        expected = gr.bridge(g, v)
        a = pt.bridge_rotation(s)
        fix = [(u, ("Z", -a % 8)) for u in g.neighbors(v)]
    else:
        raise ValueError("basis must be 'Z' or 'Y'")
    if p < 1e-12:
        return 0.0
    for u, op in fix:
        env.local(u, op)
    rest = list(expected.vertices)
    return sim.fidelity(env.vector(rest), graph_state(expected, rest))


def reduction_fidelity(n: int, target: gr.OpenGraph, rng: np.random.Generator) -> float:
    """Build ``K~_n``, measure its A-vertices as the planner says (Y for a
    bridge, Z for a break) with random outcomes, undo the tracked local
    corrections and compare with the target graph state."""
    dotted = gr.dotted_complete(n)
    plan = gr.reduction_plan(n, target)
    env = _graph_env(dotted.graph)
    for a in sorted(dotted.a_vertices):
        ends = dotted.edge_of[a]
        if plan.assignment[a] == gr.BRIDGE:
            s, _ = env.measure(a, sim.XY(pt.Y_ANGLE), rng=rng)
            for u in ends:
                env.local(u, ("Z", -pt.bridge_rotation(s) % 8))
        else:
            s, _ = env.measure(a, sim.PAULI_Z, rng=rng)
            if s:
                for u in ends:
                    env.local(u, "Z")
    ps = sorted(dotted.p_vertices)
    return sim.fidelity(env.vector(ps), graph_state(target, list(target.vertices)))


def all_graphs(n: int):
    """Every simple graph on vertices ``0..n-1``."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(2 ** len(pairs)):
        edges = [e for k, e in enumerate(pairs) if mask >> k & 1]
        yield gr.OpenGraph.from_edges(n, edges)
