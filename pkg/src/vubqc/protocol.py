"""Client and server state machines for the hiding protocols.

Quantum messages are ownership transfers inside a shared
:class:`~vubqc.sim.Environment`; only qubit handles travel on the wire.
Classical messages are newline-delimited JSON objects ``{type, payload}``.

Variants: ``P1`` quantum input, ``P2`` classical input, ``P3`` quantum input
with dummy qubits (traps are dummies' isolated neighbours).
"""

from __future__ import annotations

import hashlib
import json
import socket
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import graphs as gr
from . import pattern as pt
from . import sim

__all__ = [
    "ProtocolViolation",
    "GraphAnnounce",
    "QubitTransfer",
    "MeasureRequest",
    "MeasureResult",
    "OutputTransfer",
    "Done",
    "encode",
    "decode",
    "InMemoryTransport",
    "StreamTransport",
    "ClientSecrets",
    "OutcomeRecord",
    "Client",
    "HonestServer",
    "AdversarialServer",
    "PauliDev",
    "UnitaryDev",
    "DeltaShift",
    "ResultFlip",
    "AttackSpec",
    "Transcript",
    "run_session",
    "draw_secrets",
    "single_pauli_attacks",
]

VARIANTS = ("P1", "P2", "P3")


class ProtocolViolation(RuntimeError):
    kind = "protocol-violation"


# ---------------------------------------------------------------------------
# messages


@dataclass(frozen=True)
class GraphAnnounce:
    graph: gr.OpenGraph
    steps: int

    def payload(self):
        return {"graph": self.graph.to_dict(), "steps": self.steps}


@dataclass(frozen=True)
class QubitTransfer:
    qubits: tuple

    def payload(self):
        return {"qubits": list(self.qubits)}


@dataclass(frozen=True)
class MeasureRequest:
    i: int
    delta: int

    def payload(self):
        return {"delta": self.delta, "i": self.i}


@dataclass(frozen=True)
class MeasureResult:
    i: int
    b: int

    def payload(self):
        return {"b": self.b, "i": self.i}


@dataclass(frozen=True)
class OutputTransfer:
    qubits: tuple

    def payload(self):
        return {"qubits": list(self.qubits)}


@dataclass(frozen=True)
class Done:
    def payload(self):
        return {}


_TYPES = {c.__name__: c for c in (GraphAnnounce, QubitTransfer, MeasureRequest, MeasureResult,
                                   OutputTransfer, Done)}


def encode(msg) -> str:
    """One JSON line, keys sorted, no whitespace."""
    return json.dumps({"payload": msg.payload(), "type": type(msg).__name__},
                      sort_keys=True, separators=(",", ":"))


def decode(line: str):
    obj = json.loads(line)
    kind, p = obj["type"], obj["payload"]
    if kind not in _TYPES:
        raise ProtocolViolation(f"unknown message type {kind!r}")
    if kind == "GraphAnnounce":
        return GraphAnnounce(gr.OpenGraph.from_dict(p["graph"]), int(p["steps"]))
    if kind in ("QubitTransfer", "OutputTransfer"):
        return _TYPES[kind](tuple(int(q) for q in p["qubits"]))
    if kind == "MeasureRequest":
        return MeasureRequest(int(p["i"]), int(p["delta"]))
    if kind == "MeasureResult":
        return MeasureResult(int(p["i"]), int(p["b"]))
    return Done()


# ---------------------------------------------------------------------------
# transports


@dataclass
class Transcript:
    lines: list = field(default_factory=list)

    def add(self, sender: str, line: str) -> None:
        self.lines.append((sender, line))

    def digest(self) -> str:
        h = hashlib.sha256()
        for sender, line in self.lines:
            h.update(f"{sender}:{line}\n".encode())
        return h.hexdigest()

    def deltas(self) -> list[int]:
        return [json.loads(l)["payload"]["delta"] for s, l in self.lines
                if s == "alice" and '"MeasureRequest"' in l]


class InMemoryTransport:
    def __init__(self):
        self._boxes = {"alice": deque(), "bob": deque()}
        self.transcript = Transcript()

    def send(self, sender: str, msg) -> None:
        line = encode(msg)
        self.transcript.add(sender, line)
        self._boxes["bob" if sender == "alice" else "alice"].append(line)

    def recv(self, receiver: str):
        box = self._boxes[receiver]
        return decode(box.popleft()) if box else None


class StreamTransport:
    """Same interface over a connected socket pair."""

    def __init__(self):
        a, b = socket.socketpair()
        self._sock = {"alice": a, "bob": b}
        self._file = {k: s.makefile("rwb") for k, s in self._sock.items()}
        self.transcript = Transcript()

    def send(self, sender: str, msg) -> None:
        line = encode(msg)
        self.transcript.add(sender, line)
        f = self._file[sender]
        f.write(line.encode() + b"\n")
        f.flush()

    def recv(self, receiver: str):
        raw = self._file[receiver].readline()
        return decode(raw.decode().rstrip("\n")) if raw else None

    def close(self) -> None:
        for f in self._file.values():
            f.close()
        for s in self._sock.values():
            s.close()


# ---------------------------------------------------------------------------
# client


@dataclass(frozen=True)
class ClientSecrets:
    theta: Mapping[int, int]
    r: Mapping[int, int]
    x: Mapping[int, int]
    d: Mapping[int, int]
    traps: frozenset = frozenset()


def draw_secrets(pattern: pt.Pattern, variant: str, rng: np.random.Generator) -> ClientSecrets:
    verts = pattern.graph.vertices
    theta = {v: int(k) for v, k in zip(verts, rng.integers(0, 8, len(verts)))}
    r = {v: int(b) for v, b in zip(verts, rng.integers(0, 2, len(verts)))}
    if variant == "P2":
        x = {}
    else:
        ins = pattern.inputs
        x = {v: int(b) for v, b in zip(ins, rng.integers(0, 2, len(ins)))}
    dummies = sorted(pattern.dummies)
    d = {v: int(b) for v, b in zip(dummies, rng.integers(0, 2, len(dummies)))}
    return ClientSecrets(theta, r, x, d, pattern.traps)


@dataclass
class OutcomeRecord:
    s: dict
    accept: bool | None
    output: object
    trap_bits: dict = field(default_factory=dict)
    transcript_digest: str | None = None
    probability: float = 1.0


class Client:
    """Alice.

    Parameters
    ----------
    pattern : Pattern
        The computation, already carrying any dummies, traps and bridges.
    variant : {"P1", "P2", "P3"}
    rng : numpy Generator
        Draws the secrets (unless ``secrets`` is given) and Alice's own
        measurements of returned traps.
    input_state : array, optional
        Quantum input over ``pattern.inputs`` followed by ``n_refs``
        reference qubits that Alice keeps.
    classical_input : mapping, optional
        P2 input bits per input vertex.
    """

    def __init__(self, pattern: pt.Pattern, variant: str, rng: np.random.Generator,
                 input_state=None, classical_input: Mapping[int, int] | None = None,
                 secrets: ClientSecrets | None = None, n_refs: int = 0,
                 env: sim.Environment | None = None, trap_forced: Mapping[int, int] | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if variant == "P2" and input_state is not None:
            raise ValueError("P2 takes classical input only")
        if variant != "P2" and classical_input is not None:
            raise ValueError("classical input needs variant P2")
        if variant == "P1" and (pattern.dummies or pattern.traps):
            raise ValueError("P1 patterns may not carry dummies or traps")
        if variant == "P3" and not pattern.dummies:
            raise ValueError("P3 needs a dummy set")
        self.pattern = pattern
        self.variant = variant
        self.rng = rng
        self.secrets = secrets or draw_secrets(pattern, variant, rng)
        self.input_state = input_state
        self.classical_input = dict(classical_input or {})
        self.n_refs = n_refs
        self.refs = tuple(f"ref{k}" for k in range(n_refs))
        self.env = env or sim.Environment()
        self.trap_forced = dict(trap_forced or {})
        self.s: dict[int, int] = {}
        self.b: dict[int, int] = {}
        self._step = 0
        self._pending: int | None = None
        self.outcome: OutcomeRecord | None = None
        self.trap_probability = 1.0

    # preparation -----------------------------------------------------------
    def _dummy_parity(self, v: int) -> int:
        g = self.pattern.graph
        return sum(self.secrets.d.get(j, 0) for j in g.neighbors(v) if j in self.pattern.dummies) % 2

    def prepare(self) -> None:
        p, sec, env = self.pattern, self.secrets, self.env
        g = p.graph
        quantum_in = self.variant != "P2"
        if quantum_in:
            ins = list(g.inputs)
            n = len(ins) + self.n_refs
            vec = self.input_state
            if vec is None:
                vec = np.ones(2**n, dtype=complex) / np.sqrt(2**n)
            env.add_register(ins + list(self.refs), vec, owner="alice")
            for v in ins:
                if sec.x.get(v, 0):
                    env.local(v, "X")
                k = (sec.theta[v] + 4 * self._dummy_parity(v)) % 8
                if k:
                    env.local(v, ("Z", k))
        else:
            ins = []
        for v in g.vertices:
            if v in ins:
                continue
            if v in p.dummies:
                env.add(v, sim.Computational(sec.d[v]), owner="alice")
                continue
            k = sec.theta[v] + 4 * self._dummy_parity(v)
            if not quantum_in and v in g.inputs:
                k += 4 * (self.classical_input.get(v, 0) & 1)
            env.add(v, sim.PlusTheta(k % 8), owner="alice")

    def start(self) -> list:
        self.prepare()
        qubits = tuple(self.pattern.graph.vertices)
        self.env.set_owner(qubits, "bob")
        msgs = [GraphAnnounce(self.pattern.graph, len(self.pattern.order)), QubitTransfer(qubits)]
        nxt = self._next_request()
        if nxt is not None:
            msgs.append(nxt)
        return msgs

    def _next_request(self):
        if self._step >= len(self.pattern.order):
            return None
        v = self.pattern.order[self._step]
        sec = self.secrets
        delta = self.pattern.delta(v, self.s, sec.theta, sec.r, sec.x)
        self._pending = v
        return MeasureRequest(v, delta)

    # reception -------------------------------------------------------------
    def receive(self, msg) -> list:
        if isinstance(msg, MeasureResult):
            if self._pending is None or msg.i != self._pending:
                raise ProtocolViolation(f"unexpected result for qubit {msg.i}")
            if msg.b not in (0, 1):
                raise ProtocolViolation("result must be a bit")
            self.b[msg.i] = msg.b
            self.s[msg.i] = msg.b ^ self.secrets.r.get(msg.i, 0)
            self._pending = None
            self._step += 1
            nxt = self._next_request()
            return [nxt] if nxt is not None else []
        if isinstance(msg, OutputTransfer):
            if self._step < len(self.pattern.order):
                raise ProtocolViolation("outputs returned before all measurements")
            if sorted(msg.qubits) != sorted(self.pattern.returned):
                raise ProtocolViolation("wrong output qubits returned")
            self.env.set_owner(msg.qubits, "alice")
            self._finish()
            return [Done()]
        raise ProtocolViolation(f"client cannot handle {type(msg).__name__}")

    def _finish(self) -> None:
        p, sec, env = self.pattern, self.secrets, self.env
        trap_bits = {}
        for t in p.traps:
            if t in self.b:
                trap_bits[t] = int(self.b[t] == sec.r[t])
        for o in p.returned:
            if o in p.traps:
                k = (sec.theta[o] + 4 * sec.r[o]) % 8
                if o in self.trap_forced:
                    bt, pt_ = env.measure(o, sim.XY(k), forced=self.trap_forced[o])
                else:
                    bt, pt_ = env.measure(o, sim.XY(k), rng=self.rng)
                self.trap_probability *= pt_
                self.b[o] = bt
                trap_bits[o] = int(bt == sec.r[o])
            elif o not in p.dummies:
                p.correct_output(env, o, self.s, sec.theta, sec.x)
        outs = list(p.computation_outputs)
        if p.output_mode == pt.QUANTUM:
            qids = outs + list(self.refs)
            try:
                output = env.vector(qids)
            except sim.SimError:
                output = env.reduced_density(qids)
        else:
            output = tuple(self.s[o] for o in outs)
        accept = all(trap_bits.values()) if p.traps else None
        self.outcome = OutcomeRecord(dict(self.s), accept, output, trap_bits)


# ---------------------------------------------------------------------------
# servers


class HonestServer:
    """Bob following the protocol.

    ``forced`` maps step numbers (1-based) to raw outcome bits; otherwise
    outcomes are sampled with ``rng``.
    """

    def __init__(self, env: sim.Environment, rng: np.random.Generator | None = None,
                 forced: Mapping[int, int] | None = None):
        self.env = env
        self.rng = rng if rng is not None else np.random.default_rng()
        self.forced = dict(forced or {})
        self.graph: gr.OpenGraph | None = None
        self.steps = 0
        self.step = 0
        self.qubits: tuple = ()
        self.probability = 1.0
        self.deltas: list[int] = []

    def receive(self, msg) -> list:
        if isinstance(msg, GraphAnnounce):
            self.graph, self.steps = msg.graph, msg.steps
            return []
        if isinstance(msg, QubitTransfer):
            if self.graph is None:
                raise ProtocolViolation("qubits before graph")
            self.qubits = msg.qubits
            self.on_stage(0)
            for i, j in self.graph.sorted_edges():
                self.env.cz(i, j)
            return self.finish() if self.steps == 0 else []
        if isinstance(msg, MeasureRequest):
            if not self.qubits or msg.i not in self.env.live or self.env.owner.get(msg.i) != "bob":
                raise ProtocolViolation(f"cannot measure qubit {msg.i}")
            if not 0 <= msg.delta < 8:
                raise ProtocolViolation("angle out of range")
            self.step += 1
            self.on_stage(self.step)
            self.deltas.append(msg.delta)
            b = self.measure(msg.i, msg.delta)
            out = [MeasureResult(msg.i, b)]
            if self.step == self.steps:
                out += self.finish()
            return out
        if isinstance(msg, Done):
            return []
        raise ProtocolViolation(f"server cannot handle {type(msg).__name__}")

    def finish(self) -> list:
        self.on_stage(self.steps + 1)
        outs = tuple(q for q in self.graph.outputs if q in self.env.live)
        self.env.set_owner(outs, "alice")
        return [OutputTransfer(outs)]

    def measure(self, i: int, delta: int) -> int:
        if self.step in self.forced:
            b, p = self.env.measure(i, sim.XY(delta), forced=self.forced[self.step])
        else:
            b, p = self.env.measure(i, sim.XY(delta), rng=self.rng)
        self.probability *= p
        return b

    def on_stage(self, stage: int) -> None:
        pass


@dataclass(frozen=True)
class PauliDev:
    paulis: Mapping


@dataclass(frozen=True)
class UnitaryDev:
    qubits: tuple
    matrix: np.ndarray


@dataclass(frozen=True)
class DeltaShift:
    shift: int


@dataclass(frozen=True)
class ResultFlip:
    pass


@dataclass(frozen=True)
class AttackSpec:
    """Deviations keyed by stage.

    Stage 0 is on receipt of the qubits, stage ``k`` (``1 <= k <= steps``)
    is just before the ``k``-th measurement (stage 1 is right after
    entangling), and stage ``steps + 1`` is before the outputs go back.
    ``DeltaShift`` and ``ResultFlip`` act on the measurement of their stage.
    Private ancillas are named ``"a0"``, ``"a1"`` and so on, start in
    ``|0>`` and are capped by ``ancilla_budget``.
    """

    stages: tuple = ()
    ancilla_budget: int = 4

    def __post_init__(self):
        for stage, dev in self.stages:
            if not isinstance(stage, int) or stage < 0:
                raise ValueError(f"bad stage {stage!r}")
            if isinstance(dev, PauliDev):
                if any(p not in ("I", "X", "Y", "Z") for p in dev.paulis.values()):
                    raise ValueError("Pauli deviations use I, X, Y, Z")
            elif isinstance(dev, UnitaryDev):
                u = np.asarray(dev.matrix, dtype=complex)
                d = 2 ** len(dev.qubits)
                if u.shape != (d, d) or np.linalg.norm(u.conj().T @ u - np.eye(d)) > 1e-10:
                    raise ValueError("unitary deviation is not unitary")
                anc = [q for q in dev.qubits if isinstance(q, str)]
                if len(anc) > self.ancilla_budget:
                    raise ValueError("ancilla budget exceeded")
            elif not isinstance(dev, (DeltaShift, ResultFlip)):
                raise ValueError(f"unknown deviation {dev!r}")

    def at(self, stage: int) -> list:
        return [d for s, d in self.stages if s == stage]

    def is_identity(self) -> bool:
        for _, dev in self.stages:
            if isinstance(dev, PauliDev) and all(p == "I" for p in dev.paulis.values()):
                continue
            if isinstance(dev, DeltaShift) and dev.shift % 8 == 0:
                continue
            return False
        return True


class AdversarialServer(HonestServer):
    def __init__(self, env, attack: AttackSpec, rng=None, forced=None):
        super().__init__(env, rng, forced)
        self.attack = attack
        self._ancillas: set = set()

    def _ancilla(self, name: str) -> None:
        if name in self._ancillas:
            return
        if len(self._ancillas) >= self.attack.ancilla_budget:
            raise ValueError("ancilla budget exceeded")
        self.env.add(name, sim.Computational(0), owner="bob")
        # the tag would let CZ factoring treat it as classical; ancillas are general
        self.env.tag.pop(name, None)
        self._ancillas.add(name)

    def on_stage(self, stage: int) -> None:
        for dev in self.attack.at(stage):
            if isinstance(dev, PauliDev):
                for q, p in sorted(dev.paulis.items(), key=lambda kv: repr(kv[0])):
                    if p != "I":
                        self.env.local(q, p)
            elif isinstance(dev, UnitaryDev):
                for q in dev.qubits:
                    if isinstance(q, str):
                        self._ancilla(q)
                self.env.unitary(dev.qubits, dev.matrix)

    def measure(self, i: int, delta: int) -> int:
        devs = self.attack.at(self.step)
        for dev in devs:
            if isinstance(dev, DeltaShift):
                delta = (delta + dev.shift) % 8
        b = super().measure(i, delta)
        if any(isinstance(d, ResultFlip) for d in devs):
            b ^= 1
        return b


def single_pauli_attacks(qubits: Sequence[int], stage: int = 1) -> list[AttackSpec]:
    """Identity plus every single-qubit X, Y, Z at ``stage``."""
    out = [AttackSpec()]
    for q in qubits:
        for p in "XYZ":
            out.append(AttackSpec(((stage, PauliDev({q: p})),)))
    return out


# ---------------------------------------------------------------------------


def run_session(client: Client, server: HonestServer, transport=None):
    """Drive both parties to completion.

    Returns ``(transcript, outcome)``. Any out-of-order or malformed message
    raises :class:`ProtocolViolation`.
    """
    transport = transport or InMemoryTransport()
    queue = deque(("alice", m) for m in client.start())
    while queue:
        sender, msg = queue.popleft()
        transport.send(sender, msg)
        receiver = "bob" if sender == "alice" else "alice"
        got = transport.recv(receiver)
        party = server if receiver == "bob" else client
        queue.extend((receiver, m) for m in party.receive(got))
    if client.outcome is None:
        raise ProtocolViolation("session ended before outputs were returned")
    client.outcome.transcript_digest = transport.transcript.digest()
    client.outcome.probability = server.probability
    return transport.transcript, client.outcome
