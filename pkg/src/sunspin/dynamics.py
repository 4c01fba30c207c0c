"""Time evolution engines for the 10-level manifold.

Pure-state Schroedinger propagation and Lindblad master-equation
propagation over piecewise-defined time-dependent Hamiltonians.
Hamiltonians are in ordinary frequency units (Hz); the 2*pi lives in
the equations of motion.  Rates are 1/e rates in 1/s.

Three segment kinds get dedicated treatment:

* ``constant``  - exact stepping through the eigendecomposition of H
  (pure states) or the exponential of the Liouvillian (density
  matrices); arbitrarily long steps at machine precision.
* ``diagonal``  - no coupling, diagonal entries linear in t (dark times
  and TLS ramps): phases by exact quadrature, populations through the
  exponential of the classical rate matrix, coherences through scalar
  decay factors.  Exact for the diagonal/transfer channel structure
  this package generates.
* ``general``   - adaptive RK45 on the state or the vectorized density
  matrix, with the maximum step bounded by 1/(50 f_max).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .spin_core import DIM, m_index

TWO_PI = 2.0 * np.pi

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


class DynamicsError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# schedule representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """One piecewise element of a compiled schedule.

    ``channels`` hold (jump operator, base rate); their rates are scaled
    by the linear TLS multiplier ramp mult_start -> mult_end across the
    segment.  ``channels_fixed`` are not multiplier-scaled.
    """

    t0: float
    t1: float
    kind: str                                    # constant | diagonal | general
    h_const: np.ndarray | None = None            # for kind == constant
    h_func: Callable[[float], np.ndarray] | None = None
    diag_start: np.ndarray | None = None         # for kind == diagonal (Hz)
    diag_end: np.ndarray | None = None
    channels: tuple[tuple[np.ndarray, float], ...] = ()
    channels_fixed: tuple[tuple[np.ndarray, float], ...] = ()
    mult_start: float = 1.0
    mult_end: float = 1.0
    f_max_hz: float = 0.0
    label: str = ""

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def hamiltonian(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return self.h_const
        if self.kind == "diagonal":
            return np.diag(self._diag_at(t)).astype(complex)
        return self.h_func(t)

    def _diag_at(self, t: float) -> np.ndarray:
        if self.duration <= 0:
            return self.diag_start
        s = (t - self.t0) / self.duration
        return self.diag_start + s * (self.diag_end - self.diag_start)

    def _diag_integral(self, ta: float, tb: float) -> np.ndarray:
        """Exact integral of the (linear-in-t) diagonal over [ta, tb], Hz*s."""
        return 0.5 * (self._diag_at(ta) + self._diag_at(tb)) * (tb - ta)

    def multiplier(self, t: float) -> float:
        if self.duration <= 0:
            return self.mult_start
        s = (t - self.t0) / self.duration
        return self.mult_start + s * (self.mult_end - self.mult_start)

    def _multiplier_integral(self, ta: float, tb: float) -> float:
        return 0.5 * (self.multiplier(ta) + self.multiplier(tb)) * (tb - ta)

    def effective_channels(self, t: float) -> list[tuple[np.ndarray, float]]:
        mult = self.multiplier(t)
        out = [(op, rate * mult) for op, rate in self.channels]
        out.extend(self.channels_fixed)
        return out


@dataclass(frozen=True)
class Schedule:
    """Ordered piecewise schedule; segments touch without gaps."""

    segments: tuple[Segment, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for a, b in zip(self.segments, self.segments[1:]):
            if abs(a.t1 - b.t0) > 1e-12 * max(1.0, abs(a.t1)):
                raise DynamicsError("schedule segments must be contiguous")

    @property
    def t0(self) -> float:
        return self.segments[0].t0

    @property
    def t1(self) -> float:
        return self.segments[-1].t1

    def hamiltonian(self, t: float) -> np.ndarray:
        return self._segment_at(t).hamiltonian(t)

    def _segment_at(self, t: float) -> Segment:
        for seg in self.segments:
            if seg.t0 <= t <= seg.t1 + 1e-15:
                return seg
        raise DynamicsError(f"time {t} outside schedule [{self.t0}, {self.t1}]")

    def has_dissipation(self) -> bool:
        return any(seg.channels or seg.channels_fixed for seg in self.segments)


def _coerce_schedule(hamiltonian, t0, t1, channels=()) -> Schedule:
    """Accept a matrix, a callable, or a Schedule."""
    if isinstance(hamiltonian, Schedule):
        return hamiltonian
    channels = tuple((np.asarray(op, dtype=complex), float(r)) for op, r in channels)
    if any(r < 0 for _, r in channels):
        raise DynamicsError("negative channel rate")
    if callable(hamiltonian):
        if getattr(hamiltonian, "is_constant", False):
            h0 = np.asarray(hamiltonian(t0), dtype=complex)
            _check_hermitian(h0)
            return Schedule((Segment(t0=t0, t1=t1, kind="constant", h_const=h0,
                                     channels=channels,
                                     f_max_hz=_f_scale(h0)),))
        f_max = getattr(hamiltonian, "f_max_hz", None)
        if f_max is None:
            f_max = max(_f_scale(np.asarray(hamiltonian(t), dtype=complex))
                        for t in np.linspace(t0, t1, 7))
        return Schedule((Segment(t0=t0, t1=t1, kind="general", h_func=hamiltonian,
                                 channels=channels, f_max_hz=f_max),))
    h0 = np.asarray(hamiltonian, dtype=complex)
    _check_hermitian(h0)
    return Schedule((Segment(t0=t0, t1=t1, kind="constant", h_const=h0,
                             channels=channels, f_max_hz=_f_scale(h0)),))


def _f_scale(h: np.ndarray) -> float:
    return float(np.max(np.abs(h))) if h.size else 0.0


def _check_hermitian(h: np.ndarray, tol: float = 1e-9):
    scale = max(1.0, np.max(np.abs(h)))
    if np.max(np.abs(h - h.conj().T)) > tol * scale:
        raise DynamicsError("non-Hermitian Hamiltonian sample")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled evolution: states at strictly increasing times."""

    times: np.ndarray
    states: np.ndarray          # (n, 10) complex or (n, 10, 10) complex
    kind: str                   # pure | density
    meta: dict = field(default_factory=dict)

    def populations(self) -> np.ndarray:
        if self.kind == "pure":
            return np.abs(self.states) ** 2
        return np.real(np.einsum("nii->ni", self.states))

    def coherence(self, m1: float, m2: float) -> np.ndarray:
        i, j = m_index(m1), m_index(m2)
        if self.kind == "pure":
            return self.states[:, i] * self.states[:, j].conj()
        return self.states[:, i, j]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, coherence_pairs: Sequence[tuple[float, float]] = ()):
        cols = [self.times] + list(self.populations().T)
        header = ["time_s"] + [f"pop_{m:+.1f}" for m in np.arange(DIM) - 4.5]
        for m1, m2 in coherence_pairs:
            c = self.coherence(m1, m2)
            cols += [c.real, c.imag]
            header += [f"re_coh_{m1:+.1f}_{m2:+.1f}", f"im_coh_{m1:+.1f}_{m2:+.1f}"]
        data = np.column_stack(cols)
        np.savetxt(path, data, delimiter=",", header=",".join(header),
                   comments="", fmt="%.12g")


def _resolve_times(schedule: Schedule, t_eval) -> np.ndarray:
    if t_eval is None:
        times = np.array([schedule.t0, schedule.t1])
    else:
        times = np.atleast_1d(np.asarray(t_eval, dtype=float))
    if np.any(np.diff(times) <= 0):
        raise DynamicsError("sample times must be strictly increasing")
    if times[0] < schedule.t0 - 1e-12 or times[-1] > schedule.t1 + 1e-12:
        raise DynamicsError("sample times outside the schedule span")
    return times


# ---------------------------------------------------------------------------
# pure-state propagation
# ---------------------------------------------------------------------------

def evolve_pure(state: np.ndarray, hamiltonian, t0: float = 0.0,
                t1: float | None = None, tol: float = DEFAULT_RTOL,
                t_eval=None) -> Trajectory:
    """Schroedinger evolution of a normalized pure state."""
    psi = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise DynamicsError("initial state is not normalized")
    schedule = _coerce_schedule(hamiltonian, t0, t1 if t1 is not None else t0)
    times = _resolve_times(schedule, t_eval)
    out = np.empty((len(times), DIM), dtype=complex)

    idx = 0
    current = psi.copy()
    t_cursor = schedule.t0
    for seg in schedule.segments:
        inside = [float(t) for t in times[idx:] if t <= seg.t1 + 1e-15]
        current, written = _pure_segment(current, seg, t_cursor, inside, out, idx, tol)
        idx += written
        t_cursor = seg.t1
        if idx >= len(times) and t_cursor >= times[-1] - 1e-15:
            break
    if idx < len(times):
        raise DynamicsError("failed to reach all sample times")
    norm_err = abs(np.linalg.norm(out[-1]) - 1.0)
    if norm_err > max(1e-6, 100 * tol):
        raise DynamicsError(f"norm drift {norm_err:.2e}; reduce tol or max step")
    return Trajectory(times=times, states=out, kind="pure",
                      meta={"tol": tol, **schedule.meta})


def _pure_segment(psi, seg: Segment, t_from, sample_ts, out, out_idx, tol):
    """Advance psi from t_from to seg.t1, writing samples; returns (psi, n_written)."""
    targets = list(sample_ts)
    if seg.kind == "constant":
        w, v = np.linalg.eigh(seg.h_const)
        coeff = v.conj().T @ psi
        for k, ts in enumerate(targets):
            out[out_idx + k] = v @ (np.exp(-1j * TWO_PI * w * (ts - t_from)) * coeff)
        psi = v @ (np.exp(-1j * TWO_PI * w * (seg.t1 - t_from)) * coeff)
        return psi, len(targets)
    if seg.kind == "diagonal":
        for k, ts in enumerate(targets):
            phase = np.exp(-1j * TWO_PI * seg._diag_integral(t_from, ts))
            out[out_idx + k] = phase * psi
        psi = np.exp(-1j * TWO_PI * seg._diag_integral(t_from, seg.t1)) * psi
        return psi, len(targets)

    def rhs(t, y):
        return -1j * TWO_PI * (seg.h_func(t) @ y)

    max_step = _max_step(seg, tol)
    sol = solve_ivp(rhs, (t_from, seg.t1), psi, t_eval=_eval_times(targets, seg.t1),
                    rtol=tol, atol=tol * 1e-3, max_step=max_step, method="RK45")
    if not sol.success:
        raise DynamicsError(f"integrator failure: {sol.message}")
    for k in range(len(targets)):
        out[out_idx + k] = sol.y[:, k]
    return sol.y[:, -1], len(targets)


def _eval_times(targets, t_end):
    """targets plus the segment end, without duplicating the last point."""
    if targets and targets[-1] >= t_end - 1e-18:
        return targets
    return targets + [t_end]


def _max_step(seg: Segment, tol: float) -> float:
    span = seg.duration
    if seg.f_max_hz <= 0:
        return span if span > 0 else np.inf
    return min(span, 1.0 / (50.0 * seg.f_max_hz)) if span > 0 else np.inf


# ---------------------------------------------------------------------------
# density-matrix propagation
# ---------------------------------------------------------------------------

def liouvillian(h: np.ndarray, channels: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Superoperator on row-major-vectorized rho (100x100), 1/s units."""
    eye = np.eye(DIM)
    sup = -1j * TWO_PI * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in channels:
        if rate == 0:
            continue
        ll = op.conj().T @ op
        sup += rate * (np.kron(op, op.conj())
                       - 0.5 * np.kron(ll, eye)
                       - 0.5 * np.kron(eye, ll.T))
    return sup


def _check_density(rho: np.ndarray, tol: float = 1e-10):
    if abs(np.trace(rho) - 1.0) > 1e-8:
        raise DynamicsError("density matrix trace != 1")
    if np.max(np.abs(rho - rho.conj().T)) > tol * 10:
        raise DynamicsError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise DynamicsError("density matrix is not positive semidefinite")


def evolve_density(rho: np.ndarray, hamiltonian, lindblad=None, t0: float = 0.0,
                   t1: float | None = None, tol: float = DEFAULT_RTOL,
                   t_eval=None, positivity_floor: float = -1e-8) -> Trajectory:
    """Lindblad master-equation evolution.

    ``lindblad`` may be a LindbladSpec-like object with ``.channels`` or a
    plain sequence of (operator, rate); ignored when ``hamiltonian`` is
    already a compiled Schedule (the schedule carries its own channels).
    Positivity is monitored, not enforced: eigenvalues below
    ``positivity_floor`` raise.
    """
    rho0 = np.asarray(rho, dtype=complex)
    _check_density(rho0)
    channels = ()
    if lindblad is not None and not isinstance(hamiltonian, Schedule):
        channels = getattr(lindblad, "channels", lindblad)
    schedule = _coerce_schedule(hamiltonian, t0, t1 if t1 is not None else t0,
                                channels=channels)
    times = _resolve_times(schedule, t_eval)
    out = np.empty((len(times), DIM, DIM), dtype=complex)

    idx = 0
    current = rho0.copy()
    t_cursor = schedule.t0
    for seg in schedule.segments:
        inside = [float(t) for t in times[idx:] if t <= seg.t1 + 1e-15]
        current, written = _density_segment(current, seg, t_cursor, inside,
                                            out, idx, tol)
        idx += written
        t_cursor = seg.t1
        if idx >= len(times) and t_cursor >= times[-1] - 1e-15:
            break
    if idx < len(times):
        raise DynamicsError("failed to reach all sample times")
    final = out[-1]
    if abs(np.trace(final).real - 1.0) > 1e-6:
        raise DynamicsError("trace drift beyond tolerance")
    min_eig = np.linalg.eigvalsh(0.5 * (final + final.conj().T)).min()
    if min_eig < positivity_floor:
        raise DynamicsError(f"positivity violation: min eigenvalue {min_eig:.2e}")
    return Trajectory(times=times, states=out, kind="density",
                      meta={"tol": tol, **schedule.meta})


def _is_diagonal_safe(channels) -> bool:
    """True if every op is diagonal or has a single nonzero entry."""
    for op, _ in channels:
        nz = np.count_nonzero(np.abs(op) > 1e-15)
        if nz == 0:
            continue
        if np.count_nonzero(np.abs(op - np.diag(np.diag(op))) > 1e-15) == 0:
            continue
        if nz == 1:
            continue
        return False
    return True


def _density_segment(rho, seg: Segment, t_from, sample_ts, out, out_idx, tol):
    targets = list(sample_ts)
    const_mult = abs(seg.mult_start - seg.mult_end) < 1e-15
    if seg.kind == "constant" and const_mult:
        sup = liouvillian(seg.h_const, seg.effective_channels(seg.t0))
        t_prev, vec = t_from, rho.flatten()
        for k, ts in enumerate(targets):
            if ts > t_prev:
                vec = expm(sup * (ts - t_prev)) @ vec
                t_prev = ts
            out[out_idx + k] = vec.reshape(DIM, DIM)
        if seg.t1 > t_prev:
            vec = expm(sup * (seg.t1 - t_prev)) @ vec
        return vec.reshape(DIM, DIM), len(targets)

    if seg.kind in ("diagonal", "constant") and _is_diagonal_safe(
            seg.channels + seg.channels_fixed) and (
            seg.kind == "diagonal" or _is_diag_matrix(seg.h_const)):
        return _density_diagonal_segment(rho, seg, t_from, targets, out, out_idx)

    def rhs(t, y):
        h = seg.hamiltonian(t)
        sup = liouvillian(h, seg.effective_channels(t))
        return sup @ y

    max_step = _max_step(seg, tol)
    sol = solve_ivp(rhs, (t_from, seg.t1), rho.flatten(),
                    t_eval=_eval_times(targets, seg.t1), rtol=tol,
                    atol=tol * 1e-3, max_step=max_step, method="RK45")
    if not sol.success:
        raise DynamicsError(f"integrator failure: {sol.message}")
    for k in range(len(targets)):
        out[out_idx + k] = sol.y[:, k].reshape(DIM, DIM)
    return sol.y[:, -1].reshape(DIM, DIM), len(targets)


def _is_diag_matrix(h) -> bool:
    return h is not None and np.count_nonzero(np.abs(h - np.diag(np.diag(h))) > 1e-15) == 0


def _density_diagonal_segment(rho, seg: Segment, t_from, targets, out, out_idx):
    """Exact evolution for diagonal H with diagonal/transfer channels."""
    scaled = list(seg.channels)
    fixed = list(seg.channels_fixed)

    # classical rate matrix for populations, split by multiplier scaling
    def rate_matrix(channels):
        t_mat = np.zeros((DIM, DIM))
        for op, rate in channels:
            if _is_diag_matrix(op):
                continue
            dst, src = np.nonzero(op)
            d, s = int(dst[0]), int(src[0])
            w = rate * abs(op[d, s]) ** 2
            t_mat[d, s] += w
            t_mat[s, s] -= w
        return t_mat

    # coherence decay rates for (a, b), split by scaling
    def coherence_rates(channels):
        g = np.zeros((DIM, DIM))
        for op, rate in channels:
            ll = (op.conj().T @ op).real
            dop = np.diag(op)
            for a in range(DIM):
                g[a, :] += 0.5 * rate * ll[a, a]
                g[:, a] += 0.5 * rate * ll[a, a]
            g -= rate * np.real(np.outer(dop.conj(), dop))
        np.fill_diagonal(g, 0.0)
        return g

    t_scaled, t_fixed = rate_matrix(scaled), rate_matrix(fixed)
    g_scaled, g_fixed = coherence_rates(scaled), coherence_rates(fixed)

    def diag_at(t):
        if seg.kind == "diagonal":
            return seg._diag_at(t)
        return np.diag(seg.h_const).real

    def diag_integral(ta, tb):
        if seg.kind == "diagonal":
            return seg._diag_integral(ta, tb)
        return np.diag(seg.h_const).real * (tb - ta)

    current = rho.copy()
    t_prev = t_from
    steps = targets + ([seg.t1] if (not targets or targets[-1] < seg.t1 - 1e-18) else [])
    for k, ts in enumerate(steps):
        dt = ts - t_prev
        if dt > 0:
            tau_eff = seg._multiplier_integral(t_prev, ts)
            pops = np.real(np.diag(current))
            pops = expm(t_scaled * tau_eff + t_fixed * dt) @ pops
            phases = diag_integral(t_prev, ts)
            phase_mat = np.exp(-1j * TWO_PI * (phases[:, None] - phases[None, :]))
            decay = np.exp(-(g_scaled * tau_eff + g_fixed * dt))
            current = current * phase_mat * decay
            np.fill_diagonal(current, pops)
        if k < len(targets):
            out[out_idx + k] = current
        t_prev = ts
    return current, len(targets)


# ---------------------------------------------------------------------------
# propagators and superoperators
# ---------------------------------------------------------------------------

def propagator(hamiltonian, t0: float = 0.0, t1: float | None = None,
               tol: float = DEFAULT_RTOL) -> np.ndarray:
    """Unitary time-ordered propagator of the schedule (no dissipation)."""
    schedule = _coerce_schedule(hamiltonian, t0, t1 if t1 is not None else t0)
    u = np.eye(DIM, dtype=complex)
    t_cursor = schedule.t0
    for seg in schedule.segments:
        if seg.duration <= 0:
            continue
        if seg.kind == "constant":
            w, v = np.linalg.eigh(seg.h_const)
            u_seg = (v * np.exp(-1j * TWO_PI * w * seg.duration)) @ v.conj().T
        elif seg.kind == "diagonal":
            u_seg = np.diag(np.exp(-1j * TWO_PI * seg._diag_integral(seg.t0, seg.t1)))
        else:
            def rhs(t, y):
                return (-1j * TWO_PI * (seg.h_func(t) @ y.reshape(DIM, DIM))).flatten()
            sol = solve_ivp(rhs, (seg.t0, seg.t1), np.eye(DIM, dtype=complex).flatten(),
                            rtol=tol, atol=tol * 1e-3, max_step=_max_step(seg, tol),
                            method="RK45")
            if not sol.success:
                raise DynamicsError(f"integrator failure: {sol.message}")
            u_seg = sol.y[:, -1].reshape(DIM, DIM)
        u = u_seg @ u
        t_cursor = seg.t1
    return u


def superoperator(schedule: Schedule, tol: float = DEFAULT_RTOL) -> np.ndarray:
    """Process matrix of the full schedule on row-major vec(rho)."""
    s = np.eye(DIM * DIM, dtype=complex)
    for seg in schedule.segments:
        if seg.duration <= 0:
            continue
        const_mult = abs(seg.mult_start - seg.mult_end) < 1e-15
        if seg.kind == "constant" and const_mult:
            sup = liouvillian(seg.h_const, seg.effective_channels(seg.t0))
            s_seg = expm(sup * seg.duration)
        else:
            def rhs(t, y):
                sup = liouvillian(seg.hamiltonian(t), seg.effective_channels(t))
                return (sup @ y.reshape(DIM * DIM, DIM * DIM)).flatten()
            sol = solve_ivp(rhs, (seg.t0, seg.t1),
                            np.eye(DIM * DIM, dtype=complex).flatten(),
                            rtol=tol, atol=tol * 1e-3,
                            max_step=_max_step(seg, tol), method="RK45")
            if not sol.success:
                raise DynamicsError(f"integrator failure: {sol.message}")
            s_seg = sol.y[:, -1].reshape(DIM * DIM, DIM * DIM)
        s = s_seg @ s
    return s


def unitary_superoperator(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())
