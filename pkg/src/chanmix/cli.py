"""Experiment harness: argument/config parsing, subcommand dispatch, seeded
reproducibility, and machine-readable outputs.

Subcommands: ``decompose``, ``pec``, ``ccc``, ``lindblad``, ``resources``.
Every run writes one JSON record (``--output``) echoing its full validated
config, the seed, package versions, and wall-clock time; time series go to
CSV (``--csv``). Writes are atomic (temp file + rename), so failures never
leave partial output. Defaults: ``seed=0``, ``tol=1e-8``.

Config validation is strict: unknown keys are rejected and range violations
name the offending field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .channels import (
    ConvexCombination,
    KrausChannel,
    channel_from_json,
    convex_combination,
    apply_channel,
    unitary_channel,
    PAULIS,
)
from .circuit import (
    build_ccc_circuit,
    build_forking_circuit,
    circuit_from_json,
    compile_to_basis,
    count_resources,
    run_on_system,
)
from .lindblad import (
    RabiParams,
    ccc_series,
    exact_series,
    rabi_channel_set,
    rabi_lindblad_spec,
    sampled_series,
    trace_distance,
)
from .pec import (
    NoisyBasis,
    depolarized_pauli_basis,
    exact_cancellation_value,
    hybrid_protocol,
    layered_decomposition,
    quasiprob_decompose,
)
from .qops import DensityMatrix, expectation

__all__ = ["ExperimentConfig", "ResultRecord", "parse_config", "run_experiment", "main"]


# ---------------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------------


def _positive(name):
    def check(v):
        if v <= 0:
            raise ValueError(f"config field '{name}' must be positive, got {v}")

    return check


def _nonnegative(name):
    def check(v):
        if v < 0:
            raise ValueError(f"config field '{name}' must be nonnegative, got {v}")

    return check


def _probability(name):
    def check(v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"config field '{name}' must lie in [0, 1], got {v}")

    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ValueError(
                f"config field '{name}' must be one of {sorted(options)}, got {v!r}"
            )

    return check


def _any(_name):
    return lambda v: None


# field -> (default or REQUIRED, validator factory applied to value)
_REQUIRED = object()

_SCHEMAS: Dict[str, Dict[str, tuple]] = {
    "decompose": {
        "target": (_REQUIRED, _any),
        "basis": (_REQUIRED, _any),
        "tol": (1e-8, _positive),
    },
    "pec": {
        "layers": (_REQUIRED, _any),
        "noise_p": (0.1, _probability),
        "k": (0, _any),
        "samples": (1000, _positive),
        "seed": (0, _nonnegative),
        "tol": (1e-8, _positive),
    },
    "ccc": {
        "channels": (_REQUIRED, _any),
        "probs": (_REQUIRED, _any),
        "n_sys": (1, _positive),
    },
    "lindblad": {
        "omega0": (_REQUIRED, _nonnegative),
        "omega": (_REQUIRED, _nonnegative),
        "gamma": (_REQUIRED, _nonnegative),
        "dt": (_REQUIRED, _positive),
        "steps": (_REQUIRED, _positive),
        "method": ("ccc", _choice),
        "trajectories": (100, _positive),
        "seed": (0, _nonnegative),
        "initial": ("excited", _choice),
    },
    "resources": {
        "source": (_REQUIRED, _any),
    },
}

_CHOICES = {
    ("lindblad", "method"): {"exact", "sampled", "ccc", "forking"},
    ("lindblad", "initial"): {"excited", "ground", "plus"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    options: dict

    def to_json(self) -> dict:
        return {"experiment": self.kind, **self.options}


@dataclass(frozen=True)
class ResultRecord:
    config: dict
    outputs: dict
    seed: Optional[int]
    versions: dict
    wall_clock_s: float
    timestamp: str

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "outputs": self.outputs,
            "seed": self.seed,
            "versions": self.versions,
            "wall_clock_s": self.wall_clock_s,
            "timestamp": self.timestamp,
        }


def parse_config(source) -> ExperimentConfig:
    """Validate a config mapping (or a path to a JSON file holding one).

    The mapping must carry an ``experiment`` key naming the subcommand;
    unknown keys are rejected, missing required keys and range violations
    are reported by field name.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = dict(source)
    if "experiment" not in data:
        raise ValueError("config must name its 'experiment'")
    kind = data.pop("experiment")
    if kind not in _SCHEMAS:
        raise ValueError(
            f"unknown experiment {kind!r}; expected one of {sorted(_SCHEMAS)}"
        )
    schema = _SCHEMAS[kind]
    unknown = set(data) - set(schema)
    if unknown:
        raise ValueError(
            f"unknown config keys for '{kind}': {sorted(unknown)}"
        )
    options = {}
    for name, (default, validator_factory) in schema.items():
        if name in data:
            value = data[name]
        elif default is _REQUIRED:
            raise ValueError(f"config field '{name}' is required for '{kind}'")
        else:
            value = default
        if validator_factory is _choice:
            _choice(name, _CHOICES[(kind, name)])(value)
        else:
            validator_factory(name)(value)
        options[name] = value
    return ExperimentConfig(kind=kind, options=options)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _resolve_channel(payload) -> KrausChannel:
    if isinstance(payload, str):
        if payload in PAULIS:
            return unitary_channel(PAULIS[payload], label=payload)
        raise ValueError(f"unknown channel name {payload!r}")
    return channel_from_json(payload)


def _resolve_basis(payload) -> NoisyBasis:
    if isinstance(payload, dict) and "builtin" in payload:
        extra = set(payload) - {"builtin", "p", "n_qubits"}
        if extra:
            raise ValueError(f"unknown basis keys: {sorted(extra)}")
        if payload["builtin"] != "depolarized_pauli":
            raise ValueError(f"unknown builtin basis {payload['builtin']!r}")
        p = float(payload.get("p", 0.1))
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"config field 'basis.p' must lie in [0, 1], got {p}")
        return depolarized_pauli_basis(p, int(payload.get("n_qubits", 1)))
    return NoisyBasis(tuple(_resolve_channel(ch) for ch in payload))


def _run_decompose(options: dict) -> dict:
    target = _resolve_channel(options["target"])
    basis = _resolve_basis(options["basis"])
    rep = quasiprob_decompose(target, basis, tol=options["tol"])
    return {
        "coeffs": list(rep.coeffs),
        "gamma": rep.gamma,
        "signs": list(rep.signs),
        "probs": list(rep.probs),
        "residual": rep.residual,
        "basis_labels": list(rep.basis.labels),
    }


def _standard_layer_state(n_qubits: int) -> DensityMatrix:
    return DensityMatrix.ground((2,) * n_qubits)


def _run_pec(options: dict) -> dict:
    layer_names = options["layers"]
    if not isinstance(layer_names, list) or not layer_names:
        raise ValueError("config field 'layers' must be a nonempty list")
    basis = depolarized_pauli_basis(options["noise_p"], 1)
    layers = [(_resolve_channel(name), basis) for name in layer_names]
    rho0 = _standard_layer_state(1)
    observable = PAULIS["Z"]
    decomp = layered_decomposition(layers, rho0, observable, tol=options["tol"])
    ideal = exact_cancellation_value(decomp)
    ks = options["k"]
    single = isinstance(ks, int)
    if single:
        ks = [ks]
    sweep = []
    for k in ks:
        if not 0 <= k <= decomp.n_layers:
            raise ValueError(
                f"config field 'k' must lie in [0, {decomp.n_layers}], got {k}"
            )
        result = hybrid_protocol(
            decomp, tuple(range(k)), n_samples=options["samples"], seed=options["seed"]
        )
        circuits_resources = [
            {
                "qubits": c.layout.total,
                "coeff_qubits": c.layout.coeff_qubits,
                "items": len(c.items),
            }
            for c in result.circuits
        ]
        sweep.append(
            {
                "k": k,
                "estimate": result.estimate,
                "stderr": result.stderr,
                "residual_negativity": result.residual_negativity,
                "logical_qubits_used": result.logical_qubits_used,
                "circuits_resources": circuits_resources,
            }
        )
    outputs = {
        "Gamma": decomp.Gamma,
        "ideal_value": ideal,
        "sweep": sweep,
    }
    if single:
        for key in ("estimate", "stderr", "residual_negativity",
                    "circuits_resources"):
            outputs[key] = sweep[0][key]
    return outputs


def _run_ccc(options: dict) -> dict:
    chans = tuple(_resolve_channel(c) for c in options["channels"])
    probs = tuple(float(p) for p in options["probs"])
    cc = ConvexCombination(chans, probs)
    n_sys = int(options["n_sys"])
    circ = build_ccc_circuit(cc, n_sys)
    rho = _standard_layer_state(n_sys)
    marginal = run_on_system(circ, rho)
    mixture = apply_channel(convex_combination(cc), rho)
    deviation = float(np.max(np.abs(marginal.matrix - mixture.matrix)))
    return {
        "qubits": circ.layout.total,
        "coeff_qubits": circ.layout.coeff_qubits,
        "env_qubits": circ.layout.env_qubits,
        "marginal": [
            [[float(z.real), float(z.imag)] for z in row] for row in marginal.matrix
        ],
        "mixture_deviation": deviation,
    }


def _initial_state(name: str) -> DensityMatrix:
    if name == "excited":
        return DensityMatrix((2,), np.diag([0.0, 1.0]).astype(complex))
    if name == "ground":
        return DensityMatrix((2,), np.diag([1.0, 0.0]).astype(complex))
    return DensityMatrix((2,), np.full((2, 2), 0.5, dtype=complex))


def _run_lindblad(options: dict) -> tuple:
    params = RabiParams(
        omega0=float(options["omega0"]),
        Omega=float(options["omega"]),
        gamma=float(options["gamma"]),
        dt=float(options["dt"]),
        steps=int(options["steps"]),
    )
    rho0 = _initial_state(options["initial"])
    spec = rabi_lindblad_spec(params)
    exact = exact_series(spec, rho0, params.dt, params.steps)
    method = options["method"]
    if method == "exact":
        states = exact
    elif method == "ccc":
        states = ccc_series(params, rho0)
    elif method == "forking":
        circ = build_forking_circuit(rabi_channel_set(params).combination, 1)
        states = [rho0]
        for _ in range(params.steps):
            states.append(run_on_system(circ, states[-1]))
    else:  # sampled: average trajectories with per-trajectory substreams
        n_traj = int(options["trajectories"])
        acc = [np.zeros((2, 2), dtype=complex) for _ in range(params.steps + 1)]
        for t in range(n_traj):
            seq = np.random.SeedSequence(entropy=options["seed"], spawn_key=(t,))
            traj = sampled_series(params, rho0, seed=seq)
            for i, st in enumerate(traj):
                acc[i] += st.matrix
        states = [DensityMatrix.unchecked((2,), m / n_traj) for m in acc]
    rows = []
    for i, st in enumerate(states):
        rows.append(
            {
                "t": i * params.dt,
                "expect_z": expectation(st, PAULIS["Z"]),
                "expect_x": expectation(st, PAULIS["X"]),
                "excited_population": float(st.matrix[1, 1].real),
                "trace_distance_to_exact": trace_distance(st, exact[i]),
            }
        )
    summary = {
        "method": method,
        "final": rows[-1],
        "lam": params.lam,
        "tau": params.tau,
    }
    return summary, rows


def _run_resources(options: dict) -> tuple:
    source = options["source"]
    named = []
    if isinstance(source, dict) and source.get("builtin") == "rabi_step":
        extra = set(source) - {"builtin", "omega0", "omega", "gamma", "dt"}
        if extra:
            raise ValueError(f"unknown resource keys: {sorted(extra)}")
        params = RabiParams(
            omega0=float(source.get("omega0", 1.0)),
            Omega=float(source.get("omega", 0.5)),
            gamma=float(source.get("gamma", 0.1)),
            dt=float(source.get("dt", 0.05)),
            steps=1,
        )
        cc = rabi_channel_set(params).combination
        named = [
            ("ccc_step", build_ccc_circuit(cc, 1)),
            ("forking_step", build_forking_circuit(cc, 1)),
            ("forking_step_one_hot", build_forking_circuit(cc, 1, "one_hot")),
        ]
    elif isinstance(source, list):
        for entry in source:
            named.append((entry["name"], circuit_from_json(entry["circuit"])))
    else:
        raise ValueError(
            "config field 'source' must be a circuit list or a builtin spec"
        )
    outputs = {}
    rows = []
    for name, circ in named:
        res = count_resources(compile_to_basis(circ))
        outputs[name] = {
            "qubits": res.qubits,
            "two_qubit_gates": res.two_qubit_gates,
            "depth": res.depth,
        }
        rows.append(
            {
                "circuit": name,
                "qubits": res.qubits,
                "two_qubit_gates": res.two_qubit_gates,
                "depth": res.depth,
            }
        )
    if len(outputs) > 1 and "ccc_step" in outputs and "forking_step" in outputs:
        outputs["two_qubit_ratio_forking_over_ccc"] = (
            outputs["forking_step"]["two_qubit_gates"]
            / outputs["ccc_step"]["two_qubit_gates"]
        )
    return outputs, rows


def run_experiment(config: ExperimentConfig) -> tuple:
    """Dispatch a validated config; returns (ResultRecord, csv_rows)."""
    start = time.perf_counter()
    rows: List[dict] = []
    if config.kind == "decompose":
        outputs = _run_decompose(config.options)
    elif config.kind == "pec":
        outputs = _run_pec(config.options)
    elif config.kind == "ccc":
        outputs = _run_ccc(config.options)
    elif config.kind == "lindblad":
        outputs, rows = _run_lindblad(config.options)
    elif config.kind == "resources":
        outputs, rows = _run_resources(config.options)
    else:  # pragma: no cover - parse_config already rejects this
        raise ValueError(f"unknown experiment {config.kind!r}")
    record = ResultRecord(
        config=config.to_json(),
        outputs=outputs,
        seed=config.options.get("seed"),
        versions={
            "chanmix": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        wall_clock_s=round(time.perf_counter() - start, 6),
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    )
    return record, rows


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_record(path: str, record: ResultRecord) -> None:
    _atomic_write(path, json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n")


def write_csv(path: str, rows: List[dict]) -> None:
    if not rows:
        raise ValueError("no time-series rows to write")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (exclusive with flags)")
    parser.add_argument("--output", help="path for the JSON result record")
    parser.add_argument("--csv", help="optional path for the CSV time series")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanmix",
        description="channel-mixture circuits, error cancellation, and "
        "damped-Rabi evolution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="quasiprobability decomposition")
    _add_common(p)
    p.add_argument("--target", help="Pauli name or channel JSON file")
    p.add_argument("--basis-p", type=float, default=0.1,
                   help="depolarizing strength of the builtin Pauli basis")
    p.add_argument("--basis-file", help="JSON file with a list of channels")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("pec", help="error cancellation on a layered circuit")
    _add_common(p)
    p.add_argument("--layers", nargs="+", help="layer gates, e.g. X Z X")
    p.add_argument("--noise-p", type=float, default=0.1)
    p.add_argument("--k", type=int, nargs="+", default=[0],
                   help="absorbed prefix lengths (sweep)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("ccc", help="build and verify a mixture circuit")
    _add_common(p)
    p.add_argument("--channels-file", help="JSON list of channels")
    p.add_argument("--probs", type=float, nargs="+")
    p.add_argument("--n-sys", type=int, default=1)

    p = sub.add_parser("lindblad", help="damped-Rabi evolution")
    _add_common(p)
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--method", choices=["exact", "sampled", "ccc", "forking"],
                   default="ccc")
    p.add_argument("--trajectories", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial", choices=["excited", "ground", "plus"],
                   default="excited")

    p = sub.add_parser("resources", help="qubit/gate/depth counts")
    _add_common(p)
    p.add_argument("--circuits-file", help="JSON list of {name, circuit}")
    p.add_argument("--rabi-step", action="store_true",
                   help="compare the builtin Rabi step circuits")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        return parse_config(args.config)
    cmd = args.command
    if cmd == "decompose":
        if args.target is None:
            raise ValueError("decompose needs --target (or --config)")
        if args.basis_file:
            with open(args.basis_file) as fh:
                basis = json.load(fh)
        else:
            basis = {"builtin": "depolarized_pauli", "p": args.basis_p}
        data = {
            "experiment": "decompose",
            "target": args.target,
            "basis": basis,
            "tol": args.tol,
        }
    elif cmd == "pec":
        if not args.layers:
            raise ValueError("pec needs --layers (or --config)")
        data = {
            "experiment": "pec",
            "layers": list(args.layers),
            "noise_p": args.noise_p,
            "k": args.k if len(args.k) > 1 else args.k[0],
            "samples": args.samples,
            "seed": args.seed,
            "tol": args.tol,
        }
    elif cmd == "ccc":
        if not args.channels_file or not args.probs:
            raise ValueError("ccc needs --channels-file and --probs (or --config)")
        with open(args.channels_file) as fh:
            chans = json.load(fh)
        data = {
            "experiment": "ccc",
            "channels": chans,
            "probs": list(args.probs),
            "n_sys": args.n_sys,
        }
    elif cmd == "lindblad":
        missing = [n for n in ("omega0", "omega", "gamma", "dt", "steps")
                   if getattr(args, n) is None]
        if missing:
            raise ValueError(f"lindblad needs --{', --'.join(missing)} (or --config)")
        data = {
            "experiment": "lindblad",
            "omega0": args.omega0,
            "omega": args.omega,
            "gamma": args.gamma,
            "dt": args.dt,
            "steps": args.steps,
            "method": args.method,
            "trajectories": args.trajectories,
            "seed": args.seed,
            "initial": args.initial,
        }
    else:  # resources
        if args.rabi_step:
            source = {"builtin": "rabi_step"}
        elif args.circuits_file:
            with open(args.circuits_file) as fh:
                source = json.load(fh)
        else:
            raise ValueError("resources needs --rabi-step or --circuits-file")
        data = {"experiment": "resources", "source": source}
    return parse_config(data)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        record, rows = run_experiment(config)
    except Exception as exc:  # structured failure, nothing written
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    payload = json.dumps(record.to_json(), indent=2, sort_keys=True)
    if args.output:
        write_record(args.output, record)
    else:
        print(payload)
    if args.csv:
        if not rows:
            json.dump(
                {"error": "ValueError",
                 "message": f"'{config.kind}' produces no CSV time series"},
                sys.stderr,
            )
            sys.stderr.write("\n")
            return 1
        write_csv(args.csv, rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
