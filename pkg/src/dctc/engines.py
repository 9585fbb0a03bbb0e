"""Fixed-point engines for the loop's consistency condition.

Three procedures compute consistent CV states, mirroring the three pictures
in the closed-timelike-curve literature:

* ``deutsch_cesaro``: Cesaro average of the noiseless orbit. Orbits that
  reach a fixed point or an exact cycle give the limit directly (the Cesaro
  limit of a convergent sequence is its limit, and of an eventually periodic
  orbit is the cycle's arithmetic mean); otherwise the running mean is
  tracked until successive means and the consistency residual both fall
  below tolerance.
* ``allen_cesaro``: Cesaro average across the depolarization-interleaved
  orbit. For ``p > 0`` the interleaved orbit contracts geometrically, so
  the average's limit equals the orbit limit, which is what is returned.
* ``ralph_iterate`` / ``ralph_closed_form``: direct iteration of the noisy
  map, and the same fixed point from one linear solve of
  ``(Id - (1-p) M) vec(tau) = p vec(I/d)``.

Cycle detection: a new iterate matching a window entry at lag T (trace
distance below ``tol``) is declared a cycle only when the lag-1 motion is
at least ``10 * tol`` and has not decayed over the last period (ratio of
Frobenius motions >= 0.99). Without the guards, an alternating orbit that
is merely converging (a negative real eigenvalue of the map) would be
misreported as a period-2 cycle. Guards use Frobenius norms; the match
itself uses trace distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import (
    CtcSystem,
    _interact,
    apply_superoperator,
    superoperator,
    unvec,
    vec,
)
from .qmat import PSD_TOL, check_density, maximally_mixed, trace_distance

FIXED_SUBSPACE_SVD_TOL = 1e-8
_CYCLE_GUARD = 10.0
_CYCLE_DECAY_MIN = 0.99


class ConvergenceError(RuntimeError):
    """A limit required by the caller does not exist numerically."""


@dataclass(frozen=True)
class EngineConfig:
    """Iteration controls shared by the fixed-point engines."""

    max_iter: int = 10000
    tol: float = 1e-10
    cycle_window: int = 64

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.cycle_window < 2:
            raise ValueError("cycle_window must be at least 2")


@dataclass(frozen=True)
class IterationOutcome:
    """Result of a fixed-point run.

    status : "converged", "cycle", or "exhausted"
    state : the consistent state; for "cycle" the Cesaro mean of the cycle,
        for "exhausted" the engine's best estimate
    steps : number of map applications performed
    residual : for "converged"/"exhausted", trace distance between the
        engine map's image of ``state`` and ``state``; for "cycle", the
        cycle-closure defect (distance from the image of the last cycle
        state to the first)
    cycle_states : the detected cycle, in orbit order, or None
    """

    status: str
    state: np.ndarray
    steps: int
    residual: float
    cycle_states: tuple[np.ndarray, ...] | None = None

    @property
    def period(self) -> int | None:
        return None if self.cycle_states is None else len(self.cycle_states)


@dataclass(frozen=True)
class FixedSubspace:
    """Orthonormal Hermitian basis of the noiseless map's fixed operators."""

    basis: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)


def _sym(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


@dataclass
class _OrbitResult:
    kind: str  # "fixed" | "cycle" | "mean" | "exhausted"
    last: np.ndarray
    mean: np.ndarray
    steps: int
    cycle_states: tuple[np.ndarray, ...] | None = None


def _run_orbit(step, tau0: np.ndarray, cfg: EngineConfig,
               mean_stop_map=None, scan_cycles: bool = True) -> _OrbitResult:
    """Drive ``step`` from ``tau0`` until fixed point, cycle, mean
    convergence (when ``mean_stop_map`` is given), or exhaustion.

    ``scan_cycles=False`` turns the cycle scan off; callers use it when the
    map is a strict contraction (depolarizing strength p > 0), where no
    nontrivial cycle can exist.
    """
    x = _sym(np.asarray(tau0, dtype=complex))
    mean = x.copy()
    window = [x]          # x_0 .. x_{n-1}, trimmed to cycle_window entries
    motions = [np.inf]    # Frobenius ||x_k - x_{k-1}||, aligned with window
    tol = cfg.tol

    for n in range(1, cfg.max_iter + 1):
        x_new = _sym(step(x))
        d1_fro = float(np.linalg.norm(x_new - x))

        # Fixed point: trace distance between successive iterates below tol.
        if 0.5 * d1_fro < tol and trace_distance(x_new, x) < tol:
            mean += (x_new - mean) / (n + 1.0)
            return _OrbitResult("fixed", x_new, mean, n)

        # Cycle scan over lags 2..window, smallest lag wins.
        if scan_cycles and 0.5 * d1_fro >= _CYCLE_GUARD * tol and len(window) >= 2:
            stack = np.stack(window)
            fro = np.linalg.norm((stack - x_new).reshape(len(window), -1), axis=1)
            for lag in range(2, len(window) + 1):
                k = len(window) - lag  # window[k] is x_{n-lag}
                if 0.5 * fro[k] >= tol:
                    continue
                if trace_distance(x_new, window[k]) >= tol:
                    continue
                prev_motion = motions[k]
                if not np.isfinite(prev_motion) or prev_motion <= 0:
                    continue  # not enough history; keep iterating
                if d1_fro / prev_motion < _CYCLE_DECAY_MIN:
                    continue  # motion is decaying: converging, not cycling
                cycle = tuple(window[len(window) - lag:])
                mean += (x_new - mean) / (n + 1.0)
                return _OrbitResult("cycle", x_new, mean, n, cycle)

        prev_mean = mean
        mean = mean + (x_new - mean) / (n + 1.0)

        if mean_stop_map is not None:
            dm_fro = float(np.linalg.norm(mean - prev_mean))
            if 0.5 * dm_fro < tol and trace_distance(mean, prev_mean) < tol:
                m_sym = _sym(mean)
                resid = trace_distance(mean_stop_map(m_sym), m_sym)
                if resid < _CYCLE_GUARD * tol:
                    return _OrbitResult("mean", x_new, m_sym, n)

        if scan_cycles:
            window.append(x_new)
            motions.append(d1_fro)
            if len(window) > cfg.cycle_window:
                window.pop(0)
                motions.pop(0)
        x = x_new

    return _OrbitResult("exhausted", x, _sym(mean), cfg.max_iter)


def _validated_start(sys: CtcSystem, tau0) -> np.ndarray:
    t = check_density(tau0)
    if t.shape[0] != sys.d_cv:
        raise ValueError(f"CV state dimension {t.shape[0]} does not match d_cv={sys.d_cv}")
    return t


def _linear_step(sys: CtcSystem, include_noise: bool):
    """The loop map as one superoperator matvec per step.

    Identical to conjugate-and-trace application up to rounding (they agree
    to machine precision) and an order of magnitude cheaper across the long
    orbits the experiments run.
    """
    m = superoperator(sys, include_noise=include_noise)
    d = sys.d_cv

    def step(x):
        return (m @ x.reshape(-1, order="F")).reshape(d, d, order="F")

    return step


def ralph_iterate(sys: CtcSystem, tau0, cfg: EngineConfig | None = None) -> IterationOutcome:
    """Iterate the noisy map ``tau -> (1-p) D(tau) + p I/d`` from ``tau0``.

    With ``p = 0`` this is plain iteration of the loop map; orbits may then
    land on a cycle, reported with the cycle's Cesaro mean as the state.
    """
    cfg = cfg or EngineConfig()
    t0 = _validated_start(sys, tau0)
    step = _linear_step(sys, include_noise=True)
    res = _run_orbit(step, t0, cfg, scan_cycles=sys.p == 0.0)
    if res.kind == "fixed":
        state = res.last
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(state)), state))
    if res.kind == "cycle":
        cycle = res.cycle_states
        state = _sym(sum(cycle) / len(cycle))
        resid = trace_distance(_sym(step(cycle[-1])), cycle[0])
        return IterationOutcome("cycle", state, res.steps, resid, cycle)
    state = res.last
    return IterationOutcome("exhausted", state, res.steps,
                            trace_distance(_sym(step(state)), state))


def deutsch_cesaro(sys: CtcSystem, tau0, cfg: EngineConfig | None = None) -> IterationOutcome:
    """Cesaro-averaged noiseless orbit from ``tau0``; ``sys.p`` is ignored.

    A convergent orbit returns its limit, an exact cycle returns the cycle's
    arithmetic mean (both equal the Cesaro limit); otherwise the running
    mean is returned once successive means differ by less than ``tol`` and
    the consistency residual is below ``10 * tol``.
    """
    cfg = cfg or EngineConfig()
    t0 = _validated_start(sys, tau0)
    step = _linear_step(sys, include_noise=False)
    res = _run_orbit(step, t0, cfg, mean_stop_map=step)
    if res.kind == "fixed":
        state = res.last
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(state)), state))
    if res.kind == "cycle":
        cycle = res.cycle_states
        state = _sym(sum(cycle) / len(cycle))
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(state)), state), cycle)
    if res.kind == "mean":
        state = res.mean
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(state)), state))
    state = res.mean
    return IterationOutcome("exhausted", state, res.steps,
                            trace_distance(_sym(step(state)), state))


def allen_cesaro(sys: CtcSystem, tau0, cfg: EngineConfig | None = None) -> IterationOutcome:
    """Cesaro-averaged depolarization-interleaved orbit from ``tau0``.

    Requires ``sys.p > 0``. The interleaved orbit contracts geometrically,
    so its Cesaro limit equals the orbit limit; that limit is returned once
    successive iterates differ by less than ``tol``. It coincides with the
    fixed point of ``ralph_iterate`` and ``ralph_closed_form``.
    """
    if sys.p <= 0.0:
        raise ValueError("allen_cesaro requires a system with p > 0")
    cfg = cfg or EngineConfig()
    t0 = _validated_start(sys, tau0)
    step = _linear_step(sys, include_noise=True)
    res = _run_orbit(step, t0, cfg, scan_cycles=False)
    if res.kind == "fixed":
        state = res.last
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(state)), state))
    if res.kind == "cycle":
        cycle = res.cycle_states
        state = _sym(sum(cycle) / len(cycle))
        return IterationOutcome("converged", state, res.steps,
                                trace_distance(_sym(step(cycle[-1])), cycle[0]), cycle)
    state = res.mean
    return IterationOutcome("exhausted", state, res.steps,
                            trace_distance(_sym(step(state)), state))


def ralph_closed_form(sys: CtcSystem) -> np.ndarray:
    """Unique noisy fixed point from the linear solve
    ``(Id - (1-p) M) vec(tau) = p vec(I/d)``; requires ``sys.p > 0``."""
    if sys.p <= 0.0:
        raise ValueError("ralph_closed_form requires a system with p > 0")
    d = sys.d_cv
    m = superoperator(sys, include_noise=False)
    a = np.eye(d * d, dtype=complex) - (1.0 - sys.p) * m
    b = sys.p * vec(maximally_mixed(d))
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"singular fixed-point system at p={sys.p}: {exc}") from exc
    tau = _sym(unvec(x, d))
    # The exact solution has unit trace (the map preserves trace), but the
    # system's conditioning grows like 1/p, so rounding error of order
    # eps/p survives the solve. Renormalize and widen the PSD guard
    # accordingly; at moderate p the guard stays at its strict default.
    tau = tau / np.real(np.trace(tau))
    guard = max(PSD_TOL, 100.0 * np.finfo(float).eps / sys.p)
    return check_density(tau, psd_tol=guard)


def consistency_residual(sys: CtcSystem, tau) -> float:
    """Trace distance between the noiseless map's image of ``tau`` and ``tau``."""
    t = _validated_start(sys, tau)
    return trace_distance(_sym(_interact(sys, t, include_noise=False)), t)


def _orthonormalize_hermitian(mats, drop_tol: float = 1e-10):
    """Gram-Schmidt over the real span of Hermitian matrices (HS inner product)."""
    basis: list[np.ndarray] = []
    for m in mats:
        v = m.astype(complex)
        for _ in range(2):  # two passes for numerical stability
            for b in basis:
                v = v - np.real(np.trace(b.conj().T @ v)) * b
        norm = float(np.linalg.norm(v))
        if norm > drop_tol:
            basis.append(_sym(v / norm))
    return basis


def fixed_subspace(sys: CtcSystem) -> FixedSubspace:
    """Hermitian basis of the noiseless map's fixed operators.

    The kernel of ``M - Id`` is found by SVD (singular values below 1e-8),
    closed under the adjoint, Hermitized, and orthonormalized.
    """
    d = sys.d_cv
    m = superoperator(sys, include_noise=False)
    k = m - np.eye(d * d, dtype=complex)
    _, s, vh = np.linalg.svd(k)
    null_vecs = [vh[i].conj() for i in range(len(s)) if s[i] <= FIXED_SUBSPACE_SVD_TOL]
    cands: list[np.ndarray] = []
    for v in null_vecs:
        b = unvec(v, d)
        cands.append(0.5 * (b + b.conj().T))
        cands.append((b - b.conj().T) / 2j)
    basis = _orthonormalize_hermitian(cands)
    basis = [b for b in basis
             if np.linalg.norm(apply_superoperator(m, b) - b) < FIXED_SUBSPACE_SVD_TOL]
    if not basis:
        raise ConvergenceError("no fixed directions found; the map should have at least one")
    return FixedSubspace(tuple(basis))


def limit_superoperator(sys: CtcSystem, cfg: EngineConfig | None = None) -> np.ndarray:
    """Limit of the iterated noiseless map by repeated squaring.

    Squares the superoperator until successive squarings differ by less
    than ``cfg.tol`` in Frobenius norm (at most 60 squarings); raises
    ``ConvergenceError`` when the powers keep rotating, as they do for a
    map with non-trivial eigenvalues on the unit circle.
    """
    cfg = cfg or EngineConfig()
    p = superoperator(sys, include_noise=False)
    for _ in range(60):
        q = p @ p
        if float(np.linalg.norm(q - p)) < cfg.tol:
            return q
        p = q
    raise ConvergenceError(
        "superoperator powers did not converge in 60 squarings; "
        "the map has rotating spectrum on the unit circle")


@dataclass(frozen=True)
class ExceptionalPReport:
    """Diagnostics for the noise strengths excluded by the closed form.

    ``exceptional`` is True when ``1/(1-p)`` lies in the noiseless map's
    spectrum (within 1e-9). For ``0 < p < 1`` the check is vacuous: the
    spectrum lies in the closed unit disk while the target exceeds 1.
    """

    exceptional: bool
    p: float
    target: float
    spectrum: np.ndarray
    min_gap: float
    note: str


def exceptional_p(sys: CtcSystem) -> ExceptionalPReport:
    """Check whether ``1/(1-p)`` is an eigenvalue of the noiseless map."""
    if not 0.0 <= sys.p < 1.0:
        raise ValueError(f"noise strength p={sys.p} outside [0, 1)")
    m = superoperator(sys, include_noise=False)
    spectrum = np.linalg.eigvals(m)
    target = 1.0 / (1.0 - sys.p)
    min_gap = float(np.abs(spectrum - target).min())
    exceptional = min_gap < 1e-9
    note = ("vacuous for 0 < p < 1: the spectrum lies in the closed unit disk "
            f"and the target {target:.6g} exceeds 1" if sys.p > 0 else
            "at p=0 the target is 1, which every trace-preserving map has in "
            "its spectrum; the closed form itself requires p > 0")
    return ExceptionalPReport(exceptional, sys.p, target, spectrum, min_gap, note)
