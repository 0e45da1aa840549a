"""Command-line entry point: ``vubqc run`` and ``vubqc audit``.

Both subcommands read a JSON config, validate it against the published
schema, execute it and write a JSON report. Exit codes: 0 on accept or
pass, 2 on reject or a failed bound, 1 on any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis as an
from . import compiler as cc
from . import graphs as gr
from . import pattern as pt
from . import protocol as pr
from . import sim
from . import verification as vf

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2
REPORT_ENV = "VUBQC_REPORT_DIR"
DEFAULT_SAMPLES = {"blindness": 100_000, "verifiability": 200, "partition": 10_000}


class ConfigError(ValueError):
    pass


def load_schema(command: str) -> dict:
    text = resources.files("vubqc").joinpath(f"schemas/{command}.schema.json").read_text()
    return json.loads(text)


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# config -> objects


def build_circuit(spec: dict) -> pt.Pattern:
    mode = spec.get("output", "quantum")
    if "line" in spec:
        line = spec["line"]
        p = pt.line_pattern(line["angles"], line.get("with_input", True))
    else:
        g = spec["gates"]
        gates = [tuple(x) for x in g["gates"]]
        p = cc.compile_circuit(gates, g["wires"], g.get("layers"))
    return pt.with_output_mode(p, mode)


def build_attack(items) -> pr.AttackSpec | None:
    if not items:
        return None
    stages = []
    for it in items:
        if "pauli" in it:
            dev = pr.PauliDev({int(q): p for q, p in it["pauli"].items()})
        elif "delta_shift" in it:
            dev = pr.DeltaShift(it["delta_shift"])
        else:
            dev = pr.ResultFlip()
        stages.append((it["stage"], dev))
    return pr.AttackSpec(tuple(stages))


def _embed(circuit: pt.Pattern, cfg: dict, rng, randomize: bool) -> pt.Pattern:
    n = cfg.get("N", circuit.m)
    p_map = None
    if randomize:
        p_map = [int(v) for v in rng.permutation(n)[: circuit.m]]
    return pt.embed_dotted(circuit, n, p_map)


def build_pattern(cfg: dict, rng) -> tuple[pt.Pattern, str]:
    """Pattern and client variant for protocols other than P8."""
    proto = cfg["protocol"]
    circuit = build_circuit(cfg["circuit"])
    if proto in ("P1", "P4"):
        if proto == "P4" and "gates" not in cfg["circuit"]:
            raise ConfigError("P4 runs on brickwork; give a gates circuit")
        return circuit, "P1"
    if proto == "P2":
        return circuit, "P2"
    if proto in ("P3", "P5"):
        if "trap" in cfg:
            return vf.make_trap_pattern(circuit, cfg["trap"])[0], "P3"
        return _embed(circuit, cfg, rng, proto == "P5"), "P3"
    if proto == "P6":
        if circuit.inputs:
            raise ConfigError("P6 circuits take no quantum input; use with_input false")
        if "trap" in cfg:
            return vf.make_trap_pattern(circuit, cfg["trap"])[0], "P3"
        return vf.random_trap_pattern(circuit, rng)[0], "P3"
    raise ConfigError(f"protocol {proto} has no single pattern")


def _input_bits(cfg: dict, pattern: pt.Pattern) -> dict | None:
    bits = cfg.get("input_bits")
    if bits is None:
        return None
    if len(bits) != len(pattern.inputs):
        raise ConfigError("input_bits must give one bit per input")
    return dict(zip(pattern.inputs, bits))


# ---------------------------------------------------------------------------
# run


def _reference_fidelity(pattern: pt.Pattern, variant: str, output, ci) -> float | None:
    if not isinstance(output, np.ndarray) or output.ndim != 1:
        return None
    ref = pt.run_reference(pattern, mode=pt.Forced({}), classical_input=ci if variant == "P2" else None)
    return sim.fidelity(output, ref.vector(list(pattern.computation_outputs)))


def cmd_run(cfg: dict, seed: int) -> tuple[dict, int]:
    rng = np.random.default_rng(seed)
    attack = build_attack(cfg.get("attack"))
    sessions = cfg.get("sessions", 1)
    records = []
    if cfg["protocol"] == "P8":
        circuit = build_circuit(cfg["circuit"])
        if circuit.inputs and cfg.get("input_bits") is None:
            raise ConfigError("P8 circuits with inputs need input_bits")
        d = cfg.get("d", 1)
        enc = vf.RepetitionClassical(d) if cfg.get("encoding", "identity") == "repetition" else vf.Identity()
        if isinstance(enc, vf.Identity) and d != 1:
            raise ConfigError("identity encoding needs d = 1")
        n = cfg.get("N", circuit.m * d)
        ci = dict(zip(circuit.inputs, cfg.get("input_bits", [])))
        for _ in range(sessions):
            choice = vf.choose_pattern(d, circuit, n, rng, enc)
            vo = vf.run_protocol8(choice, rng, attack, ci)
            records.append({
                "accept": vo.accept,
                "bits": list(vo.bits),
                "decode_error": vo.decode_error,
                "qubits": choice.pattern.m,
                "transcript_digest": vo.outcome.transcript_digest,
            })
    else:
        for _ in range(sessions):
            pattern, variant = build_pattern(cfg, rng)
            ci = _input_bits(cfg, pattern) if variant == "P2" else None
            client = pr.Client(pattern, variant, rng, classical_input=ci)
            srv_rng = np.random.default_rng(rng.integers(2**63))
            server = (pr.HonestServer(client.env, srv_rng) if attack is None
                      else pr.AdversarialServer(client.env, attack, srv_rng))
            _, outcome = pr.run_session(client, server)
            rec = {"accept": outcome.accept, "transcript_digest": outcome.transcript_digest}
            if pattern.output_mode == pt.CLASSICAL:
                rec["bits"] = list(outcome.output)
            elif attack is None and not pattern.traps:
                rec["fidelity"] = _reference_fidelity(pattern, variant, outcome.output, ci)
            records.append(rec)
    verdicts = [r["accept"] for r in records]
    accepted = all(v is None or v for v in verdicts)
    rejects = sum(1 for v in verdicts if v is False)
    report = {
        "accept": accepted,
        "p_estimates": {"reject_rate": rejects / len(records)},
        "sessions": records,
    }
    return report, EXIT_OK if accepted else EXIT_REJECT


# ---------------------------------------------------------------------------
# audit


def _verif_task(args):
    base_json, attack_items, mode, samples, seed = args
    base = pt.Pattern.from_json(base_json)
    attack = build_attack(attack_items) or pr.AttackSpec()
    if mode == "exact":
        entry = an.p_incorrect_exact(base, attack)
    else:
        entry = an.p_incorrect_sampled(base, attack, samples, np.random.default_rng(seed))
    return entry.to_dict()


def _attack_items(attack: pr.AttackSpec) -> list:
    items = []
    for stage, dev in attack.stages:
        if isinstance(dev, pr.PauliDev):
            items.append({"stage": stage, "pauli": {str(q): p for q, p in dev.paulis.items()}})
    return items


def cmd_audit(cfg: dict, seed: int, mode: str, jobs: int) -> tuple[dict, int]:
    kind = cfg["kind"]
    mode = mode or cfg.get("mode", "exact")
    samples = cfg.get("samples", DEFAULT_SAMPLES[kind])
    if kind == "partition":
        flips = [tuple(f) for f in cfg.get("flips", [])]
        n = cfg["N"]
        try:
            if mode == "exact":
                st = an.partition_stats(n, flips, an.Exhaustive(cfg.get("cap", 3)))
            else:
                raise an.AuditCapError("sampling requested")
        except an.AuditCapError:
            if mode == "exact" and not cfg.get("fallback", False):
                raise
            mode = "sample"
            st = an.partition_stats(n, flips, an.Sampled(samples, seed))
        white = set(st.white.values())
        black = set(st.black.values())
        black_expected = Fraction(n - 1, 3 * (3 * n - 1))
        miss_bounds = [Fraction(2, 3) ** len(set(f)) for f in flips]
        if mode == "exact":
            ok = white == {Fraction(1, 3)} and (n < 2 or black == {black_expected}) and all(
                st.miss[k] <= b for k, b in enumerate(miss_bounds))
        else:
            tol = cfg.get("tolerance", 0.02)
            ok = all(abs(w - 1 / 3) <= tol for w in white) and all(
                abs(b - float(black_expected)) <= tol for b in black) and all(
                st.miss[k] <= float(b) + tol for k, b in enumerate(miss_bounds))
        report = {
            "mode": mode,
            "partitions": st.partitions,
            "white": {str(k): str(v) for k, v in sorted(st.white.items())},
            "black": {f"{i}-{j}": str(v) for (i, j), v in sorted(st.black.items())},
            "miss": [str(st.miss[k]) for k in range(len(flips))],
            "miss_bounds": [str(b) for b in miss_bounds],
            "pass": bool(ok),
        }
        return report, EXIT_OK if ok else EXIT_REJECT

    rng = np.random.default_rng(seed)
    if kind == "blindness":
        pattern, variant = build_pattern({**cfg, "protocol": cfg.get("protocol", "P1")}, rng)
        ci = _input_bits(cfg, pattern) if variant == "P2" else None
        bcfg = an.BlindConfig(pattern, variant, classical_input=ci)
        if mode == "exact":
            try:
                rep = an.blindness_audit(bcfg, an.Exact(cfg.get("cap", 3)))
            except an.AuditCapError:
                if not cfg.get("fallback", False):
                    raise
                mode = "sample"
        if mode != "exact":
            rep = an.blindness_audit(bcfg, an.MonteCarlo(samples, seed))
        tol = cfg.get("tolerance", 1e-9 if mode == "exact" else 0.02)
        ok = rep.bob_state_distance <= tol and (mode != "exact" or rep.flat)
        report = {**rep.to_dict(), "mode": mode, "tolerance": tol, "pass": bool(ok)}
        return report, EXIT_OK if ok else EXIT_REJECT

    # verifiability of the single-trap protocol
    base = build_circuit(cfg["circuit"])
    if base.inputs:
        raise ConfigError("verifiability audits use circuits without quantum input")
    cap = cfg.get("cap", 4)
    if mode == "exact" and base.m > cap:
        if not cfg.get("fallback", False):
            raise an.AuditCapError(f"exact enumeration needs m <= {cap}, got {base.m}")
        mode = "sample"
    spec = cfg.get("attacks", "single_pauli")
    if spec == "single_pauli":
        items = [_attack_items(a) for a in an.all_single_pauli_attacks(base)]
    else:
        items = spec
    tasks = [(base.to_json(), it, mode, samples, seed + k) for k, it in enumerate(items)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            entries = list(ex.map(_verif_task, tasks))
    else:
        entries = [_verif_task(t) for t in tasks]
    classical = base.output_mode == pt.CLASSICAL
    if "bound" in cfg:
        bound = an.Amplified(Fraction(cfg["bound"]["c"]), cfg["bound"]["d"], classical)
    else:
        bound = an.Poly(base.m, classical)
    b = float(bound.value)
    margins = [b - e["p_incorrect"] - (2 * e["stderr"] if mode != "exact" else 0) for e in entries]
    ok = bool(min(margins) >= -1e-12)
    report = {
        "mode": mode,
        "bound": b,
        "bound_kind": type(bound).__name__,
        "entries": entries,
        "worst_margin": min(margins),
        "pass": ok,
    }
    return report, EXIT_OK if ok else EXIT_REJECT


# ---------------------------------------------------------------------------


def _report_path(out: str | None, digest: str) -> Path:
    if out:
        return Path(out)
    base = os.environ.get(REPORT_ENV) or "reports"
    return Path(base) / f"{digest}.json"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vubqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "audit"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--out", help="report path (default reports/<digest>.json)")
        sp.add_argument("--mode", choices=("exact", "sample"))
        sp.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        cfg = json.loads(Path(args.config).read_text())
        jsonschema.validate(cfg, load_schema(args.command))
        if cfg["command"] != args.command:
            raise ConfigError(f"config is for {cfg['command']}, not {args.command}")
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg.setdefault("seed", 0)
        if args.mode is not None and args.command == "audit":
            cfg["mode"] = args.mode
        digest = config_digest(cfg)
        if args.command == "run":
            body, code = cmd_run(cfg, cfg["seed"])
        else:
            body, code = cmd_audit(cfg, cfg["seed"], cfg.get("mode"), max(1, args.jobs))
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError, ConfigError,
            an.AuditCapError, gr.GraphError, pt.PatternError, cc.CompileError,
            pr.ProtocolViolation, ValueError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    report = {"command": args.command, "config_digest": digest, "seed": cfg["seed"], **body}
    path = _report_path(args.out, digest)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    verdict = {EXIT_OK: "pass", EXIT_REJECT: "reject"}[code]
    print(f"{args.command}: {verdict} -> {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
