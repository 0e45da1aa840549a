"""Pure-state simulator with register factoring.

The environment holds a list of disjoint registers, each a complex tensor of
shape ``(2,) * k`` over its qubits (big-endian: the first listed qubit is the
most significant axis). Qubits touched only by CZ while prepared in a
computational basis state never merge registers; the CZ is rewritten as a
local ``Z`` on the partner instead.

Angles are ``Z8`` integers ``k`` meaning ``k * pi / 4``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

__all__ = [
    "PlusTheta",
    "Computational",
    "Custom",
    "XY",
    "PAULI_Z",
    "Environment",
    "SimError",
    "allocate",
    "apply_cz",
    "apply_local",
    "measure",
    "reduced_density",
    "trace_distance",
    "fidelity",
    "plus_state",
    "gate",
    "W8",
]

SQRT2 = np.sqrt(2.0)
W8 = np.exp(1j * np.pi * np.arange(8) / 4)
NULL_TOL = 1e-14

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])


class SimError(ValueError):
    pass


def gate(name) -> np.ndarray:
    """Matrix of a named single-qubit gate, or of ``("Z", k)``."""
    if isinstance(name, tuple):
        kind, k = name
        if kind != "Z":
            raise SimError(f"unknown gate {name!r}")
        return np.diag([1, W8[k % 8]])
    table = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H, "S": S, "Sdg": SDG}
    try:
        return table[name]
    except KeyError:
        raise SimError(f"unknown gate {name!r}") from None


def plus_state(k: int) -> np.ndarray:
    """``|+_k> = (|0> + e^{ik pi/4}|1>) / sqrt 2``."""
    return np.array([1, W8[k % 8]]) / SQRT2


# ---------------------------------------------------------------------------
# preparation specs and bases


@dataclass(frozen=True)
class PlusTheta:
    k: int

    def amplitudes(self) -> np.ndarray:
        return plus_state(self.k)


@dataclass(frozen=True)
class Computational:
    bit: int

    def amplitudes(self) -> np.ndarray:
        v = np.zeros(2, dtype=complex)
        v[self.bit & 1] = 1
        return v


@dataclass(frozen=True)
class Custom:
    a0: complex
    a1: complex

    def __post_init__(self):
        if abs(abs(self.a0) ** 2 + abs(self.a1) ** 2 - 1) > 1e-12:
            raise SimError("custom amplitudes are not normalized")

    def amplitudes(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)


@dataclass(frozen=True)
class XY:
    """Basis ``{|+_k>, |-_k>}``; outcome 0 is ``|+_k>``."""

    k: int


@dataclass(frozen=True)
class _PauliZ:
    pass


PAULI_Z = _PauliZ()

_DIAGONAL = {"I", "Z", "S", "Sdg"}
_FLIP = {"X", "Y"}


class _Reg:
    __slots__ = ("qubits", "tensor")

    def __init__(self, qubits: list, tensor: np.ndarray):
        self.qubits = qubits
        self.tensor = tensor


class Environment:
    """Shared quantum state of a session.

    Parameters
    ----------
    factoring : bool
        Rewrite CZ against preparation-tagged computational qubits as a local
        ``Z``. Turning it off gives the plain dense simulation used to check
        that factoring is sound.
    defer : bool
        Hold each CZ until one of its qubits is next touched. CZs commute
        with everything acting elsewhere, so this is exact and keeps
        registers narrow on long patterns.
    """

    def __init__(self, factoring: bool = True, defer: bool = True):
        self.factoring = factoring
        self.defer = defer
        self._pending: dict[Hashable, set] = {}
        self._regs: dict[int, _Reg] = {}
        self._where: dict[Hashable, int] = {}
        self._next = 0
        self.owner: dict[Hashable, str] = {}
        self.tag: dict[Hashable, int] = {}
        self.null = False

    # construction --------------------------------------------------------
    def _new_reg(self, qubits: list, tensor: np.ndarray) -> int:
        rid = self._next
        self._next += 1
        self._regs[rid] = _Reg(qubits, tensor)
        for q in qubits:
            self._where[q] = rid
        return rid

    def add(self, qid: Hashable, prep, owner: str = "alice") -> None:
        if qid in self._where:
            raise SimError(f"qubit {qid!r} already live")
        self._new_reg([qid], np.asarray(prep.amplitudes(), dtype=complex).copy())
        self.owner[qid] = owner
        if isinstance(prep, Computational):
            self.tag[qid] = prep.bit & 1

    def add_register(self, qids: Sequence[Hashable], vector, owner: str = "alice") -> None:
        """Add a joint state over ``qids`` (big-endian flat vector)."""
        qids = list(qids)
        vec = np.asarray(vector, dtype=complex)
        if vec.shape != (2 ** len(qids),):
            raise SimError("vector length does not match qubit count")
        if abs(np.vdot(vec, vec).real - 1) > 1e-10:
            raise SimError("register vector is not normalized")
        for q in qids:
            if q in self._where:
                raise SimError(f"qubit {q!r} already live")
        if not qids:
            return
        self._new_reg(qids, vec.reshape((2,) * len(qids)).copy())
        for q in qids:
            self.owner[q] = owner

    def copy(self) -> "Environment":
        env = Environment(self.factoring, self.defer)
        env._pending = {q: set(v) for q, v in self._pending.items()}
        for rid, reg in self._regs.items():
            env._regs[rid] = _Reg(list(reg.qubits), reg.tensor.copy())
        env._where = dict(self._where)
        env._next = self._next
        env.owner = dict(self.owner)
        env.tag = dict(self.tag)
        env.null = self.null
        return env

    # inspection ----------------------------------------------------------
    @property
    def live(self) -> set:
        return set(self._where)

    def register_of(self, q: Hashable) -> tuple:
        """Qubits sharing a register with ``q``."""
        self.flush(q)
        return tuple(self._regs[self._rid(q)].qubits)

    def registers(self) -> list[tuple]:
        self.flush_all()
        return [tuple(r.qubits) for r in self._regs.values()]

    def flush(self, *qids: Hashable) -> None:
        """Apply every deferred CZ touching ``qids``."""
        for q in qids:
            for u in sorted(self._pending.pop(q, ()), key=repr):
                self._pending[u].discard(q)
                if not self._pending[u]:
                    del self._pending[u]
                self._cz_now(q, u)

    def flush_all(self) -> None:
        for q in sorted(self._pending, key=repr):
            self.flush(q)

    def set_owner(self, qids: Iterable[Hashable], owner: str) -> None:
        for q in qids:
            self._rid(q)
            self.owner[q] = owner

    def owned_by(self, owner: str) -> list:
        return [q for q in self._where if self.owner.get(q) == owner]

    def _rid(self, q: Hashable) -> int:
        try:
            return self._where[q]
        except KeyError:
            raise SimError(f"qubit {q!r} is not live") from None

    def _merge(self, rids: Iterable[int]) -> int:
        rids = sorted(set(rids))
        if len(rids) == 1:
            return rids[0]
        base = self._regs[rids[0]]
        for rid in rids[1:]:
            other = self._regs.pop(rid)
            base.tensor = np.multiply.outer(base.tensor, other.tensor)
            base.qubits = base.qubits + other.qubits
            for q in other.qubits:
                self._where[q] = rids[0]
        return rids[0]

    # gates ---------------------------------------------------------------
    def cz(self, i: Hashable, j: Hashable) -> None:
        if i == j:
            raise SimError("CZ needs two distinct qubits")
        self._rid(i), self._rid(j)
        if self.defer:
            # CZ is self-inverse, so a repeated pair cancels
            for a, b in ((i, j), (j, i)):
                peers = self._pending.setdefault(a, set())
                peers.symmetric_difference_update({b})
                if not peers:
                    del self._pending[a]
            return
        self._cz_now(i, j)

    def _cz_now(self, i: Hashable, j: Hashable) -> None:
        ri, rj = self._rid(i), self._rid(j)
        if self.factoring:
            for a, b in ((i, j), (j, i)):
                if a in self.tag and len(self._regs[self._where[a]].qubits) == 1:
                    if self.tag[a]:
                        self.local(b, "Z")
                    return
        rid = self._merge((ri, rj))
        reg = self._regs[rid]
        ai, aj = reg.qubits.index(i), reg.qubits.index(j)
        idx = [slice(None)] * reg.tensor.ndim
        idx[ai] = 1
        idx[aj] = 1
        reg.tensor[tuple(idx)] *= -1

    def local(self, q: Hashable, op) -> None:
        """Apply a named gate, ``("Z", k)`` or a 2x2 unitary to ``q``."""
        self.flush(q)
        if isinstance(op, np.ndarray):
            u = np.asarray(op, dtype=complex)
            if u.shape != (2, 2) or np.linalg.norm(u.conj().T @ u - I2) > 1e-10:
                raise SimError("custom single-qubit operator is not unitary")
            self.tag.pop(q, None)
        else:
            u = gate(op)
            if q in self.tag:
                if isinstance(op, tuple) or op in _DIAGONAL:
                    pass
                elif op in _FLIP:
                    self.tag[q] ^= 1
                else:
                    del self.tag[q]
        reg = self._regs[self._rid(q)]
        ax = reg.qubits.index(q)
        t = np.tensordot(u, reg.tensor, axes=([1], [ax]))
        reg.tensor = np.moveaxis(t, 0, ax)

    def unitary(self, qids: Sequence[Hashable], u: np.ndarray) -> None:
        """Apply a ``2^k x 2^k`` unitary to ``qids`` (big-endian)."""
        qids = list(qids)
        self.flush(*qids)
        k = len(qids)
        u = np.asarray(u, dtype=complex)
        if u.shape != (2**k, 2**k) or np.linalg.norm(u.conj().T @ u - np.eye(2**k)) > 1e-10:
            raise SimError("operator is not unitary on the given qubits")
        rid = self._merge(self._rid(q) for q in qids)
        reg = self._regs[rid]
        axes = [reg.qubits.index(q) for q in qids]
        t = np.tensordot(u.reshape((2,) * (2 * k)), reg.tensor, axes=(list(range(k, 2 * k)), axes))
        reg.tensor = np.moveaxis(t, list(range(k)), axes)
        for q in qids:
            self.tag.pop(q, None)

    # measurement ---------------------------------------------------------
    def measure(self, q: Hashable, basis, forced: int | None = None, rng=None) -> tuple[int, float]:
        """Measure and discard ``q``.

        Returns ``(bit, probability)``. A forced outcome with zero
        probability sets :attr:`null`; the remaining state is then
        meaningless and the caller should drop the branch.
        """
        self.flush(q)
        rid = self._rid(q)
        reg = self._regs[rid]
        ax = reg.qubits.index(q)
        t = np.moveaxis(reg.tensor, ax, 0)
        a0, a1 = t[0], t[1]
        if isinstance(basis, XY):
            ph = np.conj(W8[basis.k % 8])
            outs = ((a0 + ph * a1) / SQRT2, (a0 - ph * a1) / SQRT2)
        elif basis is PAULI_Z:
            outs = (a0, a1)
        else:
            raise SimError(f"unknown basis {basis!r}")
        p0 = float(np.vdot(outs[0], outs[0]).real)
        p1 = float(np.vdot(outs[1], outs[1]).real)
        total = p0 + p1
        if total <= 0:
            total = 1.0
        p0, p1 = p0 / total, p1 / total
        if forced is None:
            if rng is None:
                raise SimError("random measurement needs an rng")
            bit = 0 if rng.random() < p0 else 1
        else:
            bit = int(forced) & 1
        p = p0 if bit == 0 else p1
        out = outs[bit]
        if p > NULL_TOL:
            out = out / np.sqrt(p * total)
        else:
            self.null = True
        reg.qubits.pop(ax)
        del self._where[q]
        self.tag.pop(q, None)
        if reg.qubits:
            reg.tensor = out
        else:
            del self._regs[rid]
        return bit, p

    # readout -------------------------------------------------------------
    def vector(self, qids: Sequence[Hashable]) -> np.ndarray:
        """Pure state of ``qids`` (big-endian); they must not share a
        register with any other qubit."""
        qids = list(qids)
        self.flush(*qids)
        rids = {self._rid(q) for q in qids}
        covered = [q for r in rids for q in self._regs[r].qubits]
        if set(covered) != set(qids):
            raise SimError("qubits are entangled with others; use reduced_density")
        if not qids:
            return np.ones(1, dtype=complex)
        tensors = [(self._regs[r].qubits, self._regs[r].tensor) for r in sorted(rids)]
        order, t = tensors[0]
        order = list(order)
        for qs, tt in tensors[1:]:
            t = np.multiply.outer(t, tt)
            order += qs
        t = np.transpose(t, [order.index(q) for q in qids])
        return t.reshape(-1).copy()

    def reduced_density(self, qids: Sequence[Hashable]) -> np.ndarray:
        qids = list(qids)
        self.flush(*qids)
        if not qids:
            return np.ones((1, 1), dtype=complex)
        rids = sorted({self._rid(q) for q in qids})
        order: list = []
        t = np.ones((), dtype=complex)
        for r in rids:
            t = np.multiply.outer(t, self._regs[r].tensor)
            order += self._regs[r].qubits
        keep = [order.index(q) for q in qids]
        rest = [a for a in range(len(order)) if a not in keep]
        t = np.transpose(t, keep + rest).reshape(2 ** len(keep), -1)
        return t @ t.conj().T

    def norms(self) -> list[float]:
        self.flush_all()
        return [float(np.linalg.norm(r.tensor)) for r in self._regs.values()]

    def to_json(self) -> str:
        """Amplitude dump. Within each register, flat index bit ``k``
        (least significant first) is the ``k``-th listed qubit."""
        self.flush_all()
        regs = []
        for r in self._regs.values():
            flat = np.transpose(r.tensor, list(range(r.tensor.ndim))[::-1]).reshape(-1)
            regs.append(
                {
                    "qubits": [str(q) for q in r.qubits],
                    "amplitudes": [[float(a.real), float(a.imag)] for a in flat],
                }
            )
        return json.dumps({"endianness": "little", "registers": regs}, separators=(",", ":"))


# ---------------------------------------------------------------------------
# functional wrappers


def allocate(preps: Sequence, factoring: bool = True, ids: Sequence | None = None,
             owner: str = "alice", defer: bool = True) -> Environment:
    """One single-qubit register per prep spec; ids default to ``0..n-1``."""
    env = Environment(factoring, defer)
    ids = list(range(len(preps))) if ids is None else list(ids)
    for q, p in zip(ids, preps):
        env.add(q, p, owner)
    return env


def apply_cz(env: Environment, i, j) -> Environment:
    env.cz(i, j)
    return env


def apply_local(env: Environment, i, op) -> Environment:
    env.local(i, op)
    return env


def measure(env: Environment, i, basis, forced: int | None = None, rng=None) -> tuple[int, float]:
    return env.measure(i, basis, forced=forced, rng=rng)


def reduced_density(env: Environment, qids: Sequence) -> np.ndarray:
    return env.reduced_density(qids)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def fidelity(state: np.ndarray, ref: np.ndarray) -> float:
    """``|<ref|psi>|^2`` for a vector, ``<ref|rho|ref>`` for a matrix."""
    ref = np.asarray(ref, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        val = abs(np.vdot(ref, state)) ** 2
    else:
        val = np.vdot(ref, state @ ref).real
    return float(min(max(val, 0.0), 1.0))
