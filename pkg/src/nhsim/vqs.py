"""Variational time stepping: losses, gradients, BFGS optimization with warm
starts, and production of the per-step parameter sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .circuit import AnsatzSpec, build_hea, run
from .hadamard import build_simplified_test, measure_overlap
from .lchs import Quadrature, node_generator, shifted_v
from .models import ObservableSpec
from .pauli import PauliError, PauliSum, hermitian_split
from .statevec import (
    ExactPropagator,
    StateVector,
    apply_pauli_sum,
    basis_state,
    expectation,
    inner_product,
)

LOSS_BACKENDS = ("direct-expm", "lchs-sum", "sampled-circuit")
GRADIENT_METHODS = ("fd", "parameter-shift", "adjoint")


class VqsError(RuntimeError):
    pass


@dataclass(frozen=True)
class VqsConfig:
    hamiltonian: PauliSum
    dt: float
    total_time: float
    ansatz: AnsatzSpec
    quadrature: Quadrature
    penalty_coeff: float = 1.0
    penalty_observables: tuple[tuple[PauliSum, float], ...] = ()
    loss_backend: str = "direct-expm"
    convergence_threshold: float = 1e-2
    shots: int = 20_000
    max_iters: int = 500
    fd_step: float = 1e-6
    gradient_method: str | None = None  # None: fd for exact, shift for sampled
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise VqsError("dt must be positive")
        steps = self.total_time / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise VqsError("total_time / dt must be integral")
        if self.loss_backend not in LOSS_BACKENDS:
            raise VqsError(f"unknown loss backend {self.loss_backend!r}")
        if self.gradient_method is not None and \
                self.gradient_method not in GRADIENT_METHODS:
            raise VqsError(f"unknown gradient method {self.gradient_method!r}")
        for obs, _ in self.penalty_observables:
            if not obs.is_hermitian():
                raise PauliError("penalty observables must be Hermitian")

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.dt))

    def resolved_gradient_method(self) -> str:
        if self.gradient_method is not None:
            return self.gradient_method
        return "parameter-shift" if self.loss_backend == "sampled-circuit" else "fd"


@dataclass(frozen=True)
class StepRecord:
    m: int
    t: float
    theta: np.ndarray
    loss_final: float
    residual: float
    penalty_values: tuple[float, ...]
    observables: dict[str, float]
    log_norm_cumulative: float
    iterations_used: int
    converged: bool


@dataclass
class VqsTrace:
    steps: list[StepRecord] = field(default_factory=list)

    def thetas(self) -> list[np.ndarray]:
        return [s.theta for s in self.steps]


# --- fast hardware-efficient-ansatz engine --------------------------------

_GENERATORS = {"Rx": "X", "Ry": "Y", "Rz": "Z"}


class AnsatzEngine:
    """Vectorized forward/adjoint evaluation of the HEA state.

    Equivalent to run(build_hea(spec, theta), |0...0>); the circuit-level path
    stays the reference in tests.
    """

    def __init__(self, spec: AnsatzSpec):
        self.spec = spec
        self.n = spec.n_qubits
        ops: list[tuple] = []
        idx = 0
        for _ in range(spec.layers):
            for q in range(self.n):
                ops.append(("rot", "Rx", q, idx))
                ops.append(("rot", "Rz", q, idx + 1))
                ops.append(("rot", "Rx", q, idx + 2))
                idx += 3
            for start in (0, 1):
                for q in range(start, self.n - 1, 2):
                    ops.append(("cz", q, q + 1, None))
        self.ops = ops

    @staticmethod
    def _rot(tens, kind, q, angle, dagger=False):
        a = -angle if dagger else angle
        c, s = math.cos(a / 2.0), math.sin(a / 2.0)
        t = np.moveaxis(tens, q, 0)
        x0, x1 = t[0], t[1]
        if kind == "Rx":
            t = np.stack([c * x0 - 1j * s * x1, -1j * s * x0 + c * x1])
        elif kind == "Ry":
            t = np.stack([c * x0 - s * x1, s * x0 + c * x1])
        else:  # Rz
            t = np.stack([np.exp(-0.5j * a) * x0, np.exp(0.5j * a) * x1])
        return np.moveaxis(t, 0, q)

    @staticmethod
    def _cz(tens, a, b):
        t = np.moveaxis(tens, (a, b), (0, 1)).copy()
        t[1, 1] = -t[1, 1]
        return np.moveaxis(t, (0, 1), (a, b))

    @staticmethod
    def _pauli(tens, letter, q):
        t = np.moveaxis(tens, q, 0)
        if letter == "X":
            t = t[::-1]
        elif letter == "Y":
            t = np.stack([-1j * t[1], 1j * t[0]])
        else:
            t = np.stack([t[0], -t[1]])
        return np.moveaxis(t, 0, q)

    def state(self, theta: np.ndarray) -> np.ndarray:
        tens = np.zeros((2,) * self.n, dtype=complex)
        tens[(0,) * self.n] = 1.0
        for op in self.ops:
            if op[0] == "rot":
                _, kind, q, pidx = op
                tens = self._rot(tens, kind, q, theta[pidx])
            else:
                tens = self._cz(tens, op[1], op[2])
        return tens.reshape(-1)

    def statevector(self, theta: np.ndarray) -> StateVector:
        return StateVector(self.n, self.state(theta))

    def overlap_with_gradient(self, theta: np.ndarray, phi: np.ndarray):
        """M = <psi(theta)|phi> and dM/dtheta by a reverse sweep."""
        tapes = []
        tens = np.zeros((2,) * self.n, dtype=complex)
        tens[(0,) * self.n] = 1.0
        for op in self.ops:
            if op[0] == "rot":
                _, kind, q, pidx = op
                tens = self._rot(tens, kind, q, theta[pidx])
            else:
                tens = self._cz(tens, op[1], op[2])
            tapes.append(tens)
        psi = tapes[-1].reshape(-1)
        m_val = complex(np.vdot(psi, phi))
        lam = phi.reshape((2,) * self.n)
        grad = np.zeros(len(theta), dtype=complex)
        # dM/dtheta_j = f_j^dagger (i P/2) lambda_j, lambda_j = suffix^dagger phi
        for k in range(len(self.ops) - 1, -1, -1):
            op = self.ops[k]
            if op[0] == "rot":
                _, kind, q, pidx = op
                f_k = tapes[k]
                probe = self._pauli(lam, _GENERATORS[kind], q)
                grad[pidx] += np.vdot(f_k.reshape(-1), 0.5j * probe.reshape(-1))
                lam = self._rot(lam, kind, q, theta[pidx], dagger=True)
            else:
                lam = self._cz(lam, op[1], op[2])
        return m_val, grad

    def expectations_with_gradient(self, theta: np.ndarray,
                                   weighted_obs: np.ndarray):
        """E = <psi|W|psi> for a combined observable given as a dense-action
        callable result W|psi>; returns (E, dE/dtheta)."""
        psi = self.state(theta)
        w_psi = weighted_obs
        m_val, grad = self.overlap_with_gradient(theta, w_psi)
        # E = <psi|W|psi>; dE = 2 Re[(dpsi)^dagger W psi]
        return m_val.real, 2.0 * grad.real


# --- per-step loss context -------------------------------------------------


class StepContext:
    """Everything needed to evaluate the loss at one time step m."""

    def __init__(self, config: VqsConfig, theta_m: np.ndarray,
                 shared: "SharedState | None" = None):
        self.config = config
        self.theta_m = np.asarray(theta_m, dtype=float)
        self.shared = shared or SharedState(config)
        self.engine = self.shared.engine
        psi_m = self.engine.state(self.theta_m)
        self.psi_m = psi_m
        self._eval_counter = 0
        backend = config.loss_backend
        split = self.shared.split
        if backend == "direct-expm":
            res = self.shared.full_propagator.evolve(
                config.dt, StateVector(config.ansatz.n_qubits, psi_m)
            )
            self.phi = math.exp(res.log_norm) * res.state.amplitudes
        elif backend == "lchs-sum":
            acc = np.zeros_like(psi_m)
            sv = StateVector(config.ansatz.n_qubits, psi_m)
            for (k, c_k), prop in zip(config.quadrature.nodes,
                                      self.shared.node_propagators):
                r = prop.evolve(config.dt, sv)
                acc = acc + c_k * math.exp(r.log_norm) * r.state.amplitudes
            # fold the exact shift factor back out of the modulus
            self.phi = math.exp(split.shift * config.dt) * acc
        else:  # sampled-circuit
            self.phi = None
        self.floor = None if self.phi is None else 1.0 - float(
            np.linalg.norm(self.phi) ** 2
        )

    # -- loss pieces

    def fidelity_loss(self, theta: np.ndarray) -> float:
        cfg = self.config
        if cfg.loss_backend == "sampled-circuit":
            s = self._sampled_overlap_sum(theta)
            return 1.0 - abs(s) ** 2
        psi = self.engine.state(theta)
        return 1.0 - abs(np.vdot(psi, self.phi)) ** 2

    def _sampled_overlap_sum(self, theta: np.ndarray,
                             shots: int | None = "config") -> complex:
        cfg = self.config
        if shots == "config":
            shots = cfg.shots
        split = self.shared.split
        total = 0.0 + 0.0j
        for i, (k, c_k) in enumerate(cfg.quadrature.nodes):
            pair = build_simplified_test(
                theta, self.theta_m, cfg.ansatz,
                self.shared.node_generators[i], cfg.dt,
            )
            seed = cfg.rng_seed * 1_000_003 + self._eval_counter * 1009 + i
            x = measure_overlap(pair, shots=shots, rng_seed=seed)
            total += c_k * x
        self._eval_counter += 1
        return total * math.exp(split.shift * cfg.dt)

    def penalty_terms(self, theta: np.ndarray) -> tuple[float, ...]:
        psi = StateVector(self.config.ansatz.n_qubits, self.engine.state(theta))
        return tuple(
            expectation(psi, obs) for obs, _ in self.config.penalty_observables
        )

    def penalty_loss(self, theta: np.ndarray) -> float:
        if not self.config.penalty_observables or self.config.penalty_coeff == 0.0:
            return 0.0
        vals = self.penalty_terms(theta)
        return self.config.penalty_coeff * sum(
            (v - tar) ** 2
            for v, (_, tar) in zip(vals, self.config.penalty_observables)
        )

    def total_loss(self, theta: np.ndarray) -> float:
        return self.fidelity_loss(theta) + self.penalty_loss(theta)

    def residual(self, theta: np.ndarray) -> float:
        """Loss above its attainable floor; used as the convergence measure.

        For exact backends this is |phi|^2 (1 - fidelity) + penalty, which is
        zero at the ideal optimum even when the raw loss minimum is the norm
        defect.  The sampled backend has no computable floor and falls back
        to the raw loss.
        """
        if self.floor is None:
            return self.total_loss(theta)
        return self.total_loss(theta) - self.floor

    # -- gradients

    def gradient(self, theta: np.ndarray, method: str | None = None) -> np.ndarray:
        method = method or self.config.resolved_gradient_method()
        if method == "fd":
            return self._fd_gradient(theta)
        if method == "parameter-shift":
            return self._shift_gradient(theta)
        if method == "adjoint":
            return self._adjoint_gradient(theta)
        raise VqsError(f"unknown gradient method {method!r}")

    def _fd_gradient(self, theta: np.ndarray) -> np.ndarray:
        h = self.config.fd_step
        grad = np.empty_like(theta)
        for j in range(len(theta)):
            up = theta.copy(); up[j] += h
            dn = theta.copy(); dn[j] -= h
            grad[j] = (self.total_loss(up) - self.total_loss(dn)) / (2.0 * h)
        return grad

    def _shift_gradient(self, theta: np.ndarray) -> np.ndarray:
        cfg = self.config
        grad = np.zeros_like(theta)
        half_pi = math.pi / 2.0
        # fidelity part is trigonometric of degree one per angle
        for j in range(len(theta)):
            up = theta.copy(); up[j] += half_pi
            dn = theta.copy(); dn[j] -= half_pi
            grad[j] = (self.fidelity_loss(up) - self.fidelity_loss(dn)) / 2.0
        # penalty via chain rule on each expectation value
        if cfg.penalty_observables and cfg.penalty_coeff != 0.0:
            vals = self.penalty_terms(theta)
            for (obs, tar), v in zip(cfg.penalty_observables, vals):
                w = 2.0 * cfg.penalty_coeff * (v - tar)
                if w == 0.0:
                    continue
                for j in range(len(theta)):
                    up = theta.copy(); up[j] += half_pi
                    dn = theta.copy(); dn[j] -= half_pi
                    e_up = expectation(
                        StateVector(cfg.ansatz.n_qubits, self.engine.state(up)), obs
                    )
                    e_dn = expectation(
                        StateVector(cfg.ansatz.n_qubits, self.engine.state(dn)), obs
                    )
                    grad[j] += w * (e_up - e_dn) / 2.0
        return grad

    def _adjoint_gradient(self, theta: np.ndarray) -> np.ndarray:
        if self.phi is None:
            raise VqsError("adjoint gradient needs an exact backend")
        cfg = self.config
        m_val, dm = self.engine.overlap_with_gradient(theta, self.phi)
        grad = -2.0 * (np.conj(m_val) * dm).real
        if cfg.penalty_observables and cfg.penalty_coeff != 0.0:
            psi = self.engine.state(theta)
            sv = StateVector(cfg.ansatz.n_qubits, psi)
            weighted = np.zeros_like(psi)
            for obs, tar in cfg.penalty_observables:
                v = expectation(sv, obs)
                w = 2.0 * cfg.penalty_coeff * (v - tar)
                if w != 0.0:
                    weighted = weighted + w * apply_pauli_sum(sv, obs)
            if np.any(weighted):
                _, dg = self.engine.overlap_with_gradient(theta, weighted)
                grad = grad + 2.0 * dg.real
        return grad


class SharedState:
    """Caches reused across steps: the split, node propagators, ansatz engine."""

    def __init__(self, config: VqsConfig):
        self.config = config
        self.engine = AnsatzEngine(config.ansatz)
        self.split = hermitian_split(config.hamiltonian)
        self.full_propagator = ExactPropagator(config.hamiltonian)
        self.node_generators = [
            node_generator(self.split, k) for k, _ in config.quadrature.nodes
        ]
        if config.loss_backend == "lchs-sum":
            self.node_propagators = [
                ExactPropagator(g) for g in self.node_generators
            ]
        else:
            self.node_propagators = []


# --- public operation surface ----------------------------------------------


def fidelity_loss(theta, theta_m, config: VqsConfig) -> float:
    return StepContext(config, theta_m).fidelity_loss(np.asarray(theta, float))


def penalty_loss(theta, config: VqsConfig) -> float:
    theta = np.asarray(theta, float)
    return StepContext(config, theta).penalty_loss(theta)


def total_loss(theta, theta_m, config: VqsConfig) -> float:
    return StepContext(config, theta_m).total_loss(np.asarray(theta, float))


def gradient(theta, theta_m, config: VqsConfig,
             method: str | None = None) -> np.ndarray:
    return StepContext(config, theta_m).gradient(np.asarray(theta, float), method)


class _Converged(Exception):
    pass


_JITTER_SCALES = (0.0, 1e-2, 1e-1, 0.3, 1.0)


def _minimize(objective, jac, theta0, threshold_check, max_iters, rng_seed=0):
    """BFGS with convergence short-circuit, jittered restarts, and a capped
    gradient-descent fallback.

    Restarts recover both from line-search stalls (fresh inverse Hessian) and
    from exact stationary points of symmetric warm starts, where BFGS
    terminates with zero iterations; ``threshold_check(loss, theta)`` returns
    True to stop early.  Tracks and returns the best evaluation seen.
    """
    theta0 = np.asarray(theta0, float)
    best = {"loss": math.inf, "theta": theta0.copy()}

    def wrapped(theta):
        val = objective(theta)
        if val < best["loss"]:
            best["loss"] = val
            best["theta"] = theta.copy()
        if threshold_check(val, theta):
            raise _Converged
        return val

    rng = np.random.default_rng(rng_seed)
    converged = False
    iterations = 0
    start = theta0
    for scale in _JITTER_SCALES:
        if scale > 0.0:
            start = best["theta"] + rng.normal(0.0, scale, len(theta0))
        try:
            res = scipy.optimize.minimize(
                wrapped, start, jac=jac, method="BFGS",
                options={"maxiter": max_iters, "gtol": 1e-10},
            )
            iterations += int(res.nit)
        except _Converged:
            converged = True
            break
        if threshold_check(best["loss"], best["theta"]):
            converged = True
            break
        made_progress = res.nit > 0
        if made_progress and scale == 0.0:
            # stalled line search rather than a stationary start: one plain
            # restart from the best point before resorting to jitter
            start = best["theta"]
    if not converged:
        # plain descent with backtracking as a final fallback
        theta = best["theta"].copy()
        current = objective(theta)
        step = 0.1
        for _ in range(min(max_iters, 100)):
            g = jac(theta)
            if np.linalg.norm(g) < 1e-12:
                break
            trial = theta - step * g
            try:
                val = wrapped(trial)
            except _Converged:
                converged = True
                break
            if val < current:
                theta, current = trial, val
                step = min(step * 1.5, 1.0)
            else:
                step *= 0.5
                if step < 1e-12:
                    break
            iterations += 1
    return best["theta"], best["loss"], iterations, converged


def init_theta0(config: VqsConfig, psi0: StateVector) -> np.ndarray:
    """Parameters preparing psi0; analytic for computational basis states."""
    spec = config.ansatz
    n_par = spec.parameter_count
    amps = psi0.amplitudes
    hot = np.flatnonzero(np.abs(amps) > 1e-12)
    if len(hot) == 1:
        bits = format(int(hot[0]), f"0{spec.n_qubits}b")
        theta = np.zeros(n_par)
        for q, b in enumerate(bits):
            if b == "1":
                theta[3 * q] = math.pi  # first-layer leading Rx
        return theta
    engine = AnsatzEngine(spec)

    def objective(theta):
        return 1.0 - abs(np.vdot(engine.state(theta), amps)) ** 2

    def jac(theta):
        m_val, dm = engine.overlap_with_gradient(theta, amps)
        return -2.0 * (np.conj(m_val) * dm).real

    theta, loss, _, converged = _minimize(
        objective, jac, np.zeros(n_par),
        lambda v, t: v <= config.convergence_threshold, config.max_iters,
        rng_seed=config.rng_seed,
    )
    if not converged:
        rng = np.random.default_rng(config.rng_seed)
        for _ in range(5):
            start = rng.uniform(-math.pi, math.pi, n_par)
            theta2, loss2, _, converged = _minimize(
                objective, jac, start,
                lambda v, t: v <= config.convergence_threshold, config.max_iters,
                rng_seed=config.rng_seed,
            )
            if loss2 < loss:
                theta, loss = theta2, loss2
            if converged:
                break
    if loss > config.convergence_threshold:
        raise VqsError(
            f"initial-state fit failed: residual {loss} above "
            f"{config.convergence_threshold}"
        )
    return theta


def optimize_step(theta_init, theta_m, config: VqsConfig,
                  shared: SharedState | None = None,
                  ctx: StepContext | None = None):
    """One quasi-Newton step: returns (theta_next, iterations, final_loss,
    converged)."""
    ctx = ctx or StepContext(config, np.asarray(theta_m, float), shared)
    method = config.resolved_gradient_method()

    def threshold_check(val, theta):
        if ctx.floor is None:
            return val < config.convergence_threshold
        return (val - ctx.floor) < config.convergence_threshold

    theta, loss, iters, converged = _minimize(
        ctx.total_loss, lambda th: ctx.gradient(th, method),
        np.asarray(theta_init, float), threshold_check, config.max_iters,
        rng_seed=config.rng_seed + 1,
    )
    return theta, iters, loss, converged


def run_evolution(config: VqsConfig, psi0: StateVector,
                  observables: list[ObservableSpec]) -> VqsTrace:
    """Full time evolution: init fit, then n_steps warm-started optimizations.

    The per-step target is built from the previous ansatz state, so drift
    against the exact trajectory is an emergent, measured quantity.
    """
    shared = SharedState(config)
    engine = shared.engine

    def record(m, theta, loss, iters, converged, log_norm, pen_ctx=None):
        sv = engine.statevector(theta)
        obs_vals = {}
        for spec_o in observables:
            if spec_o.operator is None:
                obs_vals[spec_o.name] = abs(inner_product(psi0, sv)) ** 2
            else:
                obs_vals[spec_o.name] = expectation(sv, spec_o.operator)
        pen_vals = tuple(
            expectation(sv, obs) for obs, _ in config.penalty_observables
        )
        residual = loss if pen_ctx is None else loss - (pen_ctx.floor or 0.0)
        return StepRecord(
            m=m, t=m * config.dt, theta=theta, loss_final=loss,
            residual=residual, penalty_values=pen_vals, observables=obs_vals,
            log_norm_cumulative=log_norm, iterations_used=iters,
            converged=converged,
        )

    trace = VqsTrace()
    theta = init_theta0(config, psi0)
    trace.steps.append(record(0, theta, 0.0, 0, True, 0.0))
    log_norm = 0.0
    theta_prev = None
    for m in range(config.n_steps):
        ctx = StepContext(config, theta, shared)
        theta_init = theta
        if theta_prev is not None:
            # secant extrapolation of the parameter trajectory; keep it only
            # when it beats the plain warm start, which is also a stationary
            # point for some models
            extrap = 2.0 * theta - theta_prev
            if ctx.total_loss(extrap) < ctx.total_loss(theta):
                theta_init = extrap
        theta_next, iters, loss, converged = optimize_step(
            theta_init, theta, config, shared=shared, ctx=ctx
        )
        # ledger the exact per-step norm factor of the evolution itself
        log_norm += shared.full_propagator.evolve(
            config.dt, StateVector(config.ansatz.n_qubits, ctx.psi_m)
        ).log_norm
        trace.steps.append(
            record(m + 1, theta_next, loss, iters, converged, log_norm, ctx)
        )
        theta_prev = theta
        theta = theta_next
    return trace
