"""Compile small circuits onto brickwork patterns.

Gate set: ``("J", w, k)`` for ``J(k) = H Z(k pi/4)`` on wire ``w``,
``("CZ", a, b)`` and ``("CNOT", control, target)`` on adjacent wires.

The brickwork is cut into layers of four measured columns. In each layer a
pair of adjacent wires either shares a brick or each wire runs alone. Angle
tables are not hard-coded: every slot is solved by searching the products of
``J`` operators, and the result is checked against the target unitary.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import graphs as gr
from . import pattern as pt
from . import sim

__all__ = [
    "CompileError",
    "j_matrix",
    "circuit_unitary",
    "brick_unitary",
    "solve_brick",
    "solve_wire",
    "compile_circuit",
    "pattern_unitary",
]

CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
MAX_LAYERS = 64


class CompileError(ValueError):
    pass


def j_matrix(k: int) -> np.ndarray:
    return sim.H @ np.diag([1, sim.W8[k % 8]])


def _measured(phis: Sequence[int]) -> np.ndarray:
    """Operator implemented by measuring a wire at ``phis`` in turn."""
    u = np.eye(2, dtype=complex)
    for p in phis:
        u = j_matrix(-p) @ u
    return u


def brick_unitary(top: Sequence[int], bottom: Sequence[int]) -> np.ndarray:
    """Two-wire operator of one brick given four measurement angles per row."""
    a1, a2 = _measured(top[:2]), _measured(top[2:])
    b1, b2 = _measured(bottom[:2]), _measured(bottom[2:])
    return CZ @ np.kron(a2, b2) @ CZ @ np.kron(a1, b1)


def _key(u: np.ndarray) -> tuple:
    u = u / (np.linalg.norm(u) / np.sqrt(u.shape[0]))
    flat = u.reshape(-1)
    k = int(np.argmax(np.abs(flat) > 0.1))
    flat = flat * np.conj(flat[k]) / abs(flat[k])
    return tuple(np.round(np.concatenate([flat.real, flat.imag]) * 1e6).astype(np.int64) + 0)


@lru_cache(maxsize=None)
def _pair_table():
    angles, mats, lookup = [], [], {}
    for a, b in itertools.product(range(8), repeat=2):
        u = _measured((a, b))
        angles.append((a, b))
        mats.append(u)
        lookup.setdefault(_key(u), (a, b))
    return angles, np.array(mats), lookup


@lru_cache(maxsize=None)
def _quad_table():
    lookup = {}
    for phis in itertools.product(range(8), repeat=4):
        lookup.setdefault(_key(_measured(phis)), phis)
    return lookup


def solve_wire(u: np.ndarray) -> tuple[int, int, int, int] | None:
    """Four measurement angles implementing ``u`` up to phase, or None."""
    return _quad_table().get(_key(np.asarray(u, dtype=complex)))


def solve_brick(t: np.ndarray):
    """Angles ``(top, bottom)`` for a brick implementing ``t``, or None.

    Meet in the middle: for each first half ``A1 x B1`` the second half
    must be the product operator ``CZ t (A1 x B1)^dagger CZ``.
    """
    t = np.asarray(t, dtype=complex)
    return _solve_brick_cached(_key(t), t.tobytes())


@lru_cache(maxsize=4096)
def _solve_brick_cached(_k, raw):
    t = np.frombuffer(raw, dtype=complex).reshape(4, 4)
    angles, mats, lookup = _pair_table()
    n = len(angles)
    kron = np.einsum("aij,bkl->abikjl", mats, mats).reshape(n * n, 4, 4)
    m = CZ @ t @ np.conj(np.transpose(kron, (0, 2, 1))) @ CZ
    r = m.reshape(-1, 2, 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(-1, 4, 4)
    u, s, vh = np.linalg.svd(r)
    rank1 = np.flatnonzero(s[:, 1] < 1e-8 * s[:, 0])
    for idx in rank1:
        a2 = (u[idx, :, 0] * np.sqrt(s[idx, 0])).reshape(2, 2)
        b2 = (vh[idx, 0, :] * np.sqrt(s[idx, 0])).reshape(2, 2)
        ka, kb = lookup.get(_key(a2)), lookup.get(_key(b2))
        if ka is None or kb is None:
            continue
        i1, j1 = divmod(int(idx), n)
        top = angles[i1] + ka
        bottom = angles[j1] + kb
        if pt.same_up_to_phase(brick_unitary(top, bottom), t):
            return top, bottom
    return None


def _gate_matrix(g) -> tuple[tuple[int, ...], np.ndarray]:
    kind = g[0]
    if kind == "J":
        return (g[1],), j_matrix(g[2])
    if kind in ("CZ", "CNOT"):
        a, b = g[1], g[2]
        if abs(a - b) != 1:
            raise CompileError(f"{kind} needs adjacent wires, got {a}, {b}")
        if kind == "CZ":
            return (min(a, b), max(a, b)), CZ
        if a < b:
            return (a, b), CNOT
        swap = np.eye(4)[[0, 2, 1, 3]]
        return (b, a), swap @ CNOT @ swap
    raise CompileError(f"unsupported gate {g!r}")


def circuit_unitary(gates: Sequence, n_wires: int) -> np.ndarray:
    """Direct matrix of a circuit; wire 0 is the most significant qubit."""
    u = np.eye(2**n_wires, dtype=complex)
    for g in gates:
        wires, m = _gate_matrix(g)
        full = np.eye(1, dtype=complex)
        w = 0
        while w < n_wires:
            if w == wires[0]:
                full = np.kron(full, m)
                w += len(wires)
            else:
                full = np.kron(full, np.eye(2))
                w += 1
        u = full @ u
    return u


def _slot_of(layer: int, wire: int, n: int) -> tuple:
    top = wire if (wire - layer) % 2 == 0 else wire - 1
    if top >= 0 and top + 1 < n:
        return ("brick", top)
    return ("wire", wire)


def compile_circuit(gates: Sequence, n_wires: int, layers: int | None = None) -> pt.Pattern:
    """Brickwork pattern implementing ``gates`` on ``n_wires`` wires.

    Parameters
    ----------
    layers : int, optional
        Number of four-column layers; must be odd. Extra layers are padded
        with identities. Defaults to the fewest that fit, rounded up to odd.
    """
    if n_wires < 1:
        raise CompileError("need at least one wire")
    targets: dict[tuple, np.ndarray] = {}
    last = [0] * n_wires
    expanded = []
    for g in gates:
        if g[0] == "CZ":
            # a lone CZ is not reachable in one brick; H-conjugated CNOT is
            lo = max(g[1], g[2])
            expanded += [("J", lo, 0), ("CNOT", min(g[1], g[2]), lo), ("J", lo, 0)]
        else:
            expanded.append(g)
    for g in expanded:
        wires, mat = _gate_matrix(g)
        if any(w < 0 or w >= n_wires for w in wires):
            raise CompileError(f"gate {g!r} references a missing wire")
        layer = max(last[w] for w in wires)
        while True:
            if layer >= MAX_LAYERS:
                raise CompileError("circuit does not fit the layer budget")
            slot = _slot_of(layer, wires[0], n_wires)
            fits = len(wires) == 1 or slot == ("brick", wires[0])
            if fits:
                key = (layer,) + slot
                size = 4 if slot[0] == "brick" else 2
                cur = targets.get(key, np.eye(size, dtype=complex))
                if size == 4 and len(wires) == 1:
                    emb = np.kron(mat, np.eye(2)) if wires[0] == slot[1] else np.kron(np.eye(2), mat)
                else:
                    emb = mat
                new = emb @ cur
                ok = solve_brick(new) if size == 4 else solve_wire(new)
                if ok is not None:
                    targets[key] = new
                    for w in wires:
                        last[w] = layer
                    break
                if key not in targets:
                    raise CompileError(f"gate {g!r} is not reachable in a single slot")
            layer += 1
    used = max((k[0] for k in targets), default=-1) + 1
    if layers is None:
        layers = max(used, 1)
        if layers % 2 == 0:
            layers += 1
    if layers % 2 == 0 or layers < used:
        raise CompileError(f"layers must be odd and at least {used}")
    cols = 4 * layers + 1
    graph = gr.build_brickwork(n_wires, cols)
    flow = gr.brickwork_flow(n_wires, cols)
    idx = lambda i, j: gr.brickwork_index(n_wires, i + 1, j + 1)  # noqa: E731
    angles = {}
    for layer in range(layers):
        w = 0
        while w < n_wires:
            slot = _slot_of(layer, w, n_wires)
            key = (layer,) + slot
            if slot[0] == "brick":
                target = targets.get(key, np.eye(4, dtype=complex))
                top, bottom = solve_brick(target)
                for c in range(4):
                    angles[idx(w, 4 * layer + c)] = top[c]
                    angles[idx(w + 1, 4 * layer + c)] = bottom[c]
                w += 2
            else:
                target = targets.get(key, np.eye(2, dtype=complex))
                phis = solve_wire(target)
                for c in range(4):
                    angles[idx(w, 4 * layer + c)] = phis[c]
                w += 1
    outs = set(graph.outputs)
    order = tuple(v for v in flow.order if v not in outs)
    return pt.Pattern(graph, flow, angles, order)


def pattern_unitary(pattern: pt.Pattern, forced: dict | None = None) -> np.ndarray:
    """Process matrix of a deterministic quantum pattern along one branch."""
    n_in = len(pattern.inputs)
    mode = pt.Forced(forced or {})
    res = pt.run_reference(pattern, pt.choi_input(n_in), mode, n_refs=n_in)
    vec = res.vector(list(pattern.computation_outputs) + list(res.refs))
    return pt.unitary_from_choi(vec, len(pattern.computation_outputs), n_in)
