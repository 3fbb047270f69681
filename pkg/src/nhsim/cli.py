"""Experiment runner: presets, config parsing, and CSV/JSON emission.

Config files are flat key-value text with dotted keys (``vqs.dt = 0.1``);
``--set`` options override file and preset values.  One run per process
invocation.  Exit codes: 0 success, 2 config error, 3 numerical failure.
The ``NHSIM_THREADS`` environment variable caps BLAS thread pools.
"""

from __future__ import annotations

import os

if os.environ.get("NHSIM_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["NHSIM_THREADS"])

import json
import math
import sys

import click
import numpy as np

from . import __version__
from .circuit import AnsatzSpec, build_hea, parse_circuit, format_circuit, run
from .hadamard import merge_controlled_pair, add_control
from .lchs import Quadrature, build_quadrature, lchs_apply
from .mitigation import (
    CalibrationMatrix,
    MitigationError,
    ReadoutNoiseModel,
    calibrate,
    mitigate,
)
from .models import MODEL_NAMES, ModelError, build_model, number_operator
from .pauli import PauliError, PauliSum, hermitian_split, parse_operator
from .statevec import (
    ExactPropagator,
    StateError,
    StateVector,
    basis_state,
    expectation,
    inner_product,
    sample_counts,
)
from .vqs import VqsConfig, VqsError, run_evolution

CONFIG_EXIT = 2
NUMERIC_EXIT = 3

PRESETS: dict[str, dict[str, str]] = {
    "ising-fig2": {
        "model.name": "ising",
        "model.n": "6", "model.J": "1", "model.g_r": "2", "model.g_i": "2",
        "quad.K": "80", "quad.dk": "1",
        "vqs.dt": "0.1", "vqs.T": "5", "vqs.layers": "5",
        "vqs.backend": "direct-expm", "vqs.gradient": "adjoint",
        "vqs.threshold": "1e-5", "vqs.seed": "0",
    },
    "hn-fig3": {
        "model.name": "hatano-nelson",
        "model.n": "10", "model.g": "1", "model.U": "1",
        "quad.K": "100", "quad.dk": "0.5",
        "vqs.dt": "0.2", "vqs.T": "4", "vqs.layers": "8",
        "vqs.backend": "direct-expm", "vqs.gradient": "adjoint",
        "vqs.threshold": "1e-5", "vqs.penalty": "N:2", "vqs.penalty_coeff": "1",
        "vqs.seed": "0",
    },
    "ssh-figs1": {
        "model.name": "ssh",
        "model.v": "0.3", "model.r": "1", "model.gamma": "3.5",
        "model.k": str(0.3 * math.pi),
        "quad.K": "80", "quad.dk": "1",
        "bench.pairs": "40:1,80:2,80:1",
        "bench.t_max": "1.5", "bench.dt": "0.05",
    },
}


class ConfigError(click.ClickException):
    exit_code = CONFIG_EXIT


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(preset: str | None, config_path: str | None,
                   overrides: tuple[str, ...]) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        cfg.update(PRESETS[preset])
    if config_path is not None:
        try:
            with open(config_path) as f:
                cfg.update(parse_config_text(f.read()))
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _get(cfg: dict[str, str], key: str, conv, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    try:
        return conv(cfg[key])
    except (ValueError, TypeError):
        raise ConfigError(f"bad value for {key!r}: {cfg[key]!r}")


def _model_from_config(cfg: dict[str, str]):
    name = cfg.get("model.name")
    if name is None:
        raise ConfigError("missing required config key 'model.name'")
    if name == "custom":
        path = cfg.get("model.file")
        if path is None:
            raise ConfigError("model.name=custom requires model.file")
        try:
            with open(path) as f:
                ham = parse_operator(f.read())
        except OSError as e:
            raise ConfigError(f"cannot read operator file: {e}")
        bits = cfg.get("model.initial", "0" * ham.n_qubits)
        psi0 = basis_state(ham.n_qubits, bits)
        return ham, psi0, []
    if name not in MODEL_NAMES:
        raise ConfigError(
            f"unknown model {name!r}; available: {', '.join(MODEL_NAMES)}, custom"
        )
    params = {
        key.split(".", 1)[1]: value
        for key, value in cfg.items()
        if key.startswith("model.") and key != "model.name"
    }
    return build_model(name, params)


def _quadrature_from_config(cfg: dict[str, str]) -> Quadrature:
    return build_quadrature(
        _get(cfg, "quad.K", float), _get(cfg, "quad.dk", float)
    )


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_csv(path, header: list[str], rows: list[list[str]]):
    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def _write_manifest(path: str, cfg: dict[str, str], extra: dict):
    import scipy

    manifest = {
        "config": dict(sorted(cfg.items())),
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    manifest.update(extra)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _observable_value(state: StateVector, obs_spec, psi_ref: StateVector) -> float:
    if obs_spec.operator is None:
        return abs(inner_product(psi_ref, state)) ** 2
    return expectation(state, obs_spec.operator)


_common_options = [
    click.option("--preset", default=None, help="Named parameter bundle."),
    click.option("--config", "config_path", default=None,
                 type=click.Path(), help="Key-value config file."),
    click.option("--set", "overrides", multiple=True,
                 help="Override a config key, e.g. --set vqs.dt=0.05."),
]


def common_options(fn):
    for opt in reversed(_common_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Classical simulation tools for variational non-Hermitian dynamics."""


def _numeric_guard(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError:
            raise
        except (PauliError, StateError, ModelError, VqsError, MitigationError,
                np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError,
                OverflowError) as e:
            click.echo(f"numerical failure: {e}", err=True)
            sys.exit(NUMERIC_EXIT)

    return wrapper


@main.command("bench-lchs")
@common_options
@click.option("--out", default="-", help="CSV output path (default stdout).")
@_numeric_guard
def bench_lchs(preset, config_path, overrides, out):
    """Quadrature-accuracy curves versus the dense oracle."""
    cfg = resolve_config(preset, config_path, overrides)
    ham, psi0, observables = _model_from_config(cfg)
    if not observables:
        raise ConfigError("bench-lchs needs a model with named observables")
    obs = observables[0]
    pairs_text = cfg.get("bench.pairs", "")
    pairs = []
    for chunk in filter(None, (p.strip() for p in pairs_text.split(","))):
        try:
            k_str, dk_str = chunk.split(":")
            pairs.append((float(k_str), float(dk_str)))
        except ValueError:
            raise ConfigError(f"bad bench.pairs entry {chunk!r}; expected K:dk")
    t_max = _get(cfg, "bench.t_max", float, 1.5)
    dt = _get(cfg, "bench.dt", float, 0.05)
    t_grid = np.arange(0.0, t_max + dt / 2.0, dt)
    split = hermitian_split(ham)
    oracle = ExactPropagator(ham)
    rows = []
    for big_k, dk in pairs:
        quad = build_quadrature(big_k, dk)
        label = f"K={_fmt(big_k)};dk={_fmt(dk)}"
        for t in t_grid:
            s_l = lchs_apply(split, quad, float(t), psi0).state
            s_e = oracle.evolve(float(t), psi0).state
            v_l = _observable_value(s_l, obs, psi0)
            v_e = _observable_value(s_e, obs, psi0)
            rows.append([_fmt(float(t)), label, _fmt(v_l), _fmt(v_e),
                         _fmt(abs(v_l - v_e))])
    _write_csv(out, ["t", "config", "observable_lchs", "observable_exact",
                     "abs_error"], rows)


def _vqs_config_from(cfg: dict[str, str], ham, n_qubits: int) -> VqsConfig:
    layers = _get(cfg, "vqs.layers", int, 5)
    penalty: tuple = ()
    pen_text = cfg.get("vqs.penalty", "none")
    if pen_text not in ("", "none"):
        try:
            pname, target = pen_text.split(":")
            target = float(target)
        except ValueError:
            raise ConfigError(f"bad vqs.penalty {pen_text!r}; expected name:target")
        if pname != "N":
            raise ConfigError(f"unknown penalty observable {pname!r}")
        penalty = ((number_operator(n_qubits), target),)
    shots_text = cfg.get("vqs.shots", "20000")
    shots = None if shots_text == "exact" else int(shots_text)
    try:
        return VqsConfig(
            hamiltonian=ham,
            dt=_get(cfg, "vqs.dt", float),
            total_time=_get(cfg, "vqs.T", float),
            ansatz=AnsatzSpec(n_qubits, layers),
            quadrature=_quadrature_from_config(cfg),
            penalty_coeff=_get(cfg, "vqs.penalty_coeff", float, 1.0),
            penalty_observables=penalty,
            loss_backend=cfg.get("vqs.backend", "direct-expm"),
            convergence_threshold=_get(cfg, "vqs.threshold", float, 1e-2),
            shots=shots,
            max_iters=_get(cfg, "vqs.max_iters", int, 500),
            gradient_method=cfg.get("vqs.gradient") or None,
            rng_seed=_get(cfg, "vqs.seed", int, 0),
        )
    except VqsError as e:
        raise ConfigError(str(e))


@main.command("run-vqs")
@common_options
@click.option("--out", default="-", help="CSV output path (default stdout).")
@click.option("--manifest", default=None, help="JSON run-manifest path.")
@_numeric_guard
def run_vqs(preset, config_path, overrides, out, manifest):
    """Variational time evolution; optional shot-sampled replay."""
    cfg = resolve_config(preset, config_path, overrides)
    ham, psi0, observables = _model_from_config(cfg)
    if not observables:
        raise ConfigError("run-vqs needs a model with named observables")
    vqs_cfg = _vqs_config_from(cfg, ham, psi0.n_qubits)
    trace = run_evolution(vqs_cfg, psi0, observables)
    repetitions = _get(cfg, "run.repetitions", int, 0)
    header = ["t", "observable", "value", "loss", "iterations", "log_norm"]
    if repetitions:
        header += ["value_std", "value_min_bias"]
    replay_shots = _get(cfg, "run.shots", int, 20_000)
    replay_seed = _get(cfg, "run.seed", int, 1)
    from .vqs import AnsatzEngine

    engine = AnsatzEngine(vqs_cfg.ansatz)
    rows = []
    for step in trace.steps:
        for obs_spec in observables:
            row = [
                _fmt(step.t), obs_spec.name,
                _fmt(step.observables[obs_spec.name]),
                _fmt(step.loss_final), str(step.iterations_used),
                _fmt(step.log_norm_cumulative),
            ]
            if repetitions:
                if obs_spec.operator is None:
                    raise ConfigError("replay needs diagonal Pauli observables")
                state = engine.statevector(step.theta)
                exact_val = step.observables[obs_spec.name]
                diag = _diagonal_of(obs_spec.operator)
                if diag is None:
                    raise ConfigError(
                        f"observable {obs_spec.name} is not diagonal; "
                        "replay samples computational-basis readout only"
                    )
                estimates = []
                for rep in range(repetitions):
                    seed = replay_seed * 7_919 + rep * 104_729 + step.m
                    counts = sample_counts(state, replay_shots, seed)
                    est = sum(
                        c * diag[int(bits, 2)] for bits, c in counts.items()
                    ) / replay_shots
                    estimates.append(est)
                estimates = np.array(estimates)
                min_bias = estimates[np.argmin(np.abs(estimates - exact_val))]
                row += [_fmt(float(estimates.std(ddof=1))), _fmt(float(min_bias))]
                row[2] = _fmt(float(estimates.mean()))
            rows.append(row)
    _write_csv(out, header, rows)
    if manifest is not None:
        _write_manifest(manifest, cfg, {
            "n_steps": vqs_cfg.n_steps,
            "parameter_count": vqs_cfg.ansatz.parameter_count,
            "converged_steps": sum(1 for s in trace.steps if s.converged),
        })


def _diagonal_of(op: PauliSum) -> np.ndarray | None:
    """Diagonal of an I/Z-only observable; None when off-diagonal letters occur."""
    n = op.n_qubits
    diag = np.zeros(2**n)
    for term in op.terms:
        if set(term.letters) - {"I", "Z"}:
            return None
        signs = np.ones(1)
        for letter in term.letters:
            col = np.array([1.0, -1.0]) if letter == "Z" else np.array([1.0, 1.0])
            signs = np.kron(signs, col)
        diag += term.coefficient.real * signs
    return diag


@main.command("evolve-exact")
@common_options
@click.option("--out", default="-", help="CSV output path (default stdout).")
@_numeric_guard
def evolve_exact_cmd(preset, config_path, overrides, out):
    """Dense-oracle observable curves for any model or preset."""
    cfg = resolve_config(preset, config_path, overrides)
    ham, psi0, observables = _model_from_config(cfg)
    if not observables:
        raise ConfigError("evolve-exact needs a model with named observables")
    dt = _get(cfg, "vqs.dt", float, _get(cfg, "bench.dt", float, 0.1))
    t_max = _get(cfg, "vqs.T", float, _get(cfg, "bench.t_max", float, 1.0))
    t_grid = np.arange(0.0, t_max + dt / 2.0, dt)
    oracle = ExactPropagator(ham)
    rows = []
    for t in t_grid:
        res = oracle.evolve(float(t), psi0)
        for obs_spec in observables:
            rows.append([
                _fmt(float(t)), obs_spec.name,
                _fmt(_observable_value(res.state, obs_spec, psi0)),
                _fmt(res.log_norm),
            ])
    _write_csv(out, ["t", "observable", "value", "log_norm"], rows)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x.strip() != ""])
    except ValueError:
        raise ConfigError(f"bad parameter vector {text!r}")


@main.command("simplify")
@click.argument("gate_list", type=click.Path(exists=True))
@click.option("--theta", required=True, help="Comma-separated angles for U(theta).")
@click.option("--theta-m", required=True,
              help="Comma-separated angles for U(theta_m).")
@click.option("--out-prefix", default=None,
              help="Write <prefix>.reference.txt and <prefix>.simplified.txt.")
@_numeric_guard
def simplify_cmd(gate_list, theta, theta_m, out_prefix):
    """Rewrite the two-copy controlled product of a parameterized circuit."""
    with open(gate_list) as f:
        template = parse_circuit(f.read())
    th = _parse_vector(theta)
    th_m = _parse_vector(theta_m)
    from .circuit import ROTATION_KINDS, Circuit, Gate

    rot_slots = [i for i, g in enumerate(template.gates)
                 if g.kind in ROTATION_KINDS and not g.controls]
    if len(th) != len(rot_slots) or len(th_m) != len(rot_slots):
        raise ConfigError(
            f"circuit has {len(rot_slots)} free rotation angles; "
            f"got {len(th)} / {len(th_m)}"
        )

    def bind(angles) -> Circuit:
        gates = list(template.gates)
        for slot, a in zip(rot_slots, angles):
            g = gates[slot]
            gates[slot] = Gate(g.kind, g.targets, float(a), g.controls)
        return Circuit(template.n_qubits, tuple(gates), template.global_phase)

    u = bind(th)
    u_m = bind(th_m)
    ancilla = template.n_qubits
    reference = Circuit(
        ancilla + 1,
        add_control(u, ancilla, 0).gates + add_control(u_m, ancilla, 1).gates,
        global_phase=(add_control(u, ancilla, 0).global_phase
                      + add_control(u_m, ancilla, 1).global_phase),
    )
    simplified = merge_controlled_pair(u, u_m, ancilla)
    verdict = "unchecked (register too wide)"
    if reference.n_qubits <= 12:
        from .circuit import dense_unitary

        dist = float(np.abs(dense_unitary(reference)
                            - dense_unitary(simplified)).max())
        verdict = f"equivalent, {dist:.3e}" if dist <= 1e-10 else \
            f"NOT equivalent, {dist:.3e}"
    ref_text = format_circuit(reference)
    simp_text = format_circuit(simplified)
    if out_prefix is not None:
        with open(out_prefix + ".reference.txt", "w") as f:
            f.write(ref_text)
        with open(out_prefix + ".simplified.txt", "w") as f:
            f.write(simp_text)
    else:
        click.echo("# reference")
        click.echo(ref_text)
        click.echo("# simplified")
        click.echo(simp_text)
    click.echo(
        f"gates: {len(reference.gates)} -> {len(simplified.gates)}; "
        f"max width: {reference.max_gate_width()} -> "
        f"{simplified.max_gate_width()}; verdict: {verdict}"
    )


@main.command("mitigate")
@click.argument("counts_file", type=click.Path(exists=True))
@click.argument("calibration_file", type=click.Path(exists=True))
@click.option("--out", default="-", help="CSV output path (default stdout).")
@_numeric_guard
def mitigate_cmd(counts_file, calibration_file, out):
    """Invert per-qubit readout confusion on a measured count distribution.

    COUNTS_FILE: one `<bitstring> <count>` per line.
    CALIBRATION_FILE: one `<p01> <p10>` per line per qubit, where p01 is
    P(read 0 | true 1) and p10 is P(read 1 | true 0).
    """
    counts: dict[str, int] = {}
    with open(counts_file) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                bits, c = line.split()
                counts[bits] = counts.get(bits, 0) + int(c)
            except ValueError:
                raise ConfigError(f"counts line {lineno}: expected 'bits count'")
    pairs = []
    with open(calibration_file) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                p01, p10 = (float(x) for x in line.split())
                pairs.append((p01, p10))
            except ValueError:
                raise ConfigError(f"calibration line {lineno}: expected 'p01 p10'")
    model = ReadoutNoiseModel.asymmetric(pairs)
    result = mitigate(counts, calibrate(model))
    n = model.n_qubits
    rows = [
        [format(i, f"0{n}b"), _fmt(float(p)), _fmt(float(q))]
        for i, (p, q) in enumerate(
            zip(result.probabilities, result.quasi_probabilities)
        )
        if p > 0.0 or abs(q) > 1e-15
    ]
    _write_csv(out, ["bitstring", "probability", "quasi_probability"], rows)
    click.echo(f"negative quasi-probability mass clipped: "
               f"{_fmt(result.negative_mass)}", err=True)
    per_qubit = []
    tens = result.probabilities.reshape((2,) * n)
    for q in range(n):
        p1 = float(np.moveaxis(tens, q, 0)[1].sum())
        per_qubit.append(f"<Z_{q}>={_fmt(1.0 - 2.0 * p1)}")
    click.echo("expectations: " + " ".join(per_qubit), err=True)


if __name__ == "__main__":
    main()
