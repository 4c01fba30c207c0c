"""Pulse sequences and their compilation to evolution schedules.

A sequence is an ordered list of segments: Raman pulses with envelopes,
dark times, and TLS power ramps.  Compilation produces a
:class:`~sunspin.dynamics.Schedule` in the rotating frame of the (single)
RF local oscillator, whose frequency steps are phase-continuous like a
DDS.  The TLS multiplier scales the quadratic shift q, the vector part
of b, and every TLS-tied dissipation rate.

Units: durations s, frequencies Hz (ordinary), phases rad.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence as Seq

import numpy as np

from . import dynamics
from .model import (FieldParams, LindbladSpec, RamanTone, control_regime_check,
                    pair_splitting_hz)
from .spin_core import F, M_VALUES

ENVELOPES = ("square", "linear_ramp", "raised_cosine")


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class PulseSegment:
    """One timed element: tones (possibly none), envelope, TLS ramp.

    ``lo_freq_hz`` overrides the local-oscillator frequency (signed, Hz)
    for tone-free segments; otherwise the LO inherits the previous
    segment's frequency.  ``lo_phase_step`` is an instantaneous phase
    added to the DDS phase register at the segment start.
    """

    duration: float
    tones: tuple[RamanTone, ...] = ()
    envelope: str = "square"
    envelope_param: float = 0.25        # ramp fraction for linear_ramp
    tls_start: float = 1.0
    tls_end: float = 1.0
    lo_freq_hz: float | None = None
    lo_phase_step: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise SequenceError("segment duration must be positive")
        if not np.isfinite(self.duration):
            raise SequenceError("segment duration must be finite")
        if self.envelope not in ENVELOPES:
            raise SequenceError(f"envelope must be one of {ENVELOPES}")
        for v in (self.tls_start, self.tls_end):
            if not 0.0 <= v <= 1.0:
                raise SequenceError("tls multiplier endpoints must lie in [0, 1]")

    def area_fraction(self) -> float:
        """Pulse area divided by (peak Omega * duration) for this envelope."""
        if self.envelope == "square":
            return 1.0
        if self.envelope == "raised_cosine":
            return 0.5
        return 1.0 - self.envelope_param

    def envelope_fn(self):
        if self.envelope == "square":
            return lambda s: 1.0
        if self.envelope == "raised_cosine":
            return lambda s: 0.5 * (1.0 - np.cos(2 * np.pi * s))
        r = self.envelope_param
        def trapezoid(s):
            if s < r:
                return s / r
            if s > 1 - r:
                return (1 - s) / r
            return 1.0
        return trapezoid


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...]
    fields: FieldParams
    seed: int | None = None
    noise: object | None = None
    # per-shot realized field offsets (Hz); nominal fields still set LO freqs
    b_offset_hz: float = 0.0
    q_offset_hz: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise SequenceError("sequence must contain at least one segment")

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def describe(self) -> str:
        """Canonical one-line-per-segment audit dump."""
        lines = [f"# fields: b={self.fields.b_hz} Hz, q={self.fields.q_hz} Hz, "
                 f"b_vec={self.fields.b_vector_hz} Hz, seed={self.seed}"]
        t = 0.0
        for i, s in enumerate(self.segments):
            tone_txt = "; ".join(
                f"({t_.m_low:+.1f},{t_.m_high:+.1f}) O={t_.omega_hz:.6g}Hz "
                f"d={t_.detuning_hz:.6g}Hz ph={t_.phase:.6g}" for t_ in s.tones) or "dark"
            lo = "inherit" if s.lo_freq_hz is None else f"{s.lo_freq_hz:.6g}Hz"
            lines.append(
                f"{i:3d} t={t:.9g}s dur={s.duration:.9g}s {s.envelope} "
                f"tls={s.tls_start:g}->{s.tls_end:g} lo={lo} "
                f"step={s.lo_phase_step:.6g} {tone_txt} {s.label}".rstrip())
            t += s.duration
        return "\n".join(lines)


def pulse(pair: tuple[float, float], omega_hz: float, fields: FieldParams,
          area: float, envelope: str = "square", detuning_hz: float = 0.0,
          phase: float = 0.0, cg_weighting: bool = True,
          tls_multiplier: float = 1.0, label: str = "", warn_regime: bool = True
          ) -> PulseSegment:
    """Resonant pulse of the requested area (rad) on a pair."""
    if omega_hz <= 0:
        raise SequenceError("omega_hz must be positive")
    m_low, m_high = min(pair), max(pair)
    tone = RamanTone(m_low=m_low, m_high=m_high, omega_hz=omega_hz,
                     detuning_hz=detuning_hz, phase=phase,
                     cg_weighting=cg_weighting)
    seg = PulseSegment(duration=(area / (2 * np.pi)) / omega_hz / 1.0,
                       tones=(tone,), envelope=envelope,
                       tls_start=tls_multiplier, tls_end=tls_multiplier,
                       label=label or f"area{area:.3f}")
    if envelope != "square":
        seg = replace(seg, duration=seg.duration / seg.area_fraction())
    if warn_regime:
        report = control_regime_check(fields.b_hz, fields.q_hz, F)
        if not report.controllable:
            flagged = {m for p in report.degenerate_pairs for m in p[:2]}
            if m_low in flagged:
                warnings.warn(
                    f"pair ({m_low}, {m_high}) sits in a quasi-degenerate "
                    "resonance region; population transfer may be uncontrolled",
                    stacklevel=2)
    return seg


def pi_pulse(pair, omega_hz, fields, **kw) -> PulseSegment:
    return pulse(pair, omega_hz, fields, area=np.pi, **kw)


def pi_half_pulse(pair, omega_hz, fields, **kw) -> PulseSegment:
    return pulse(pair, omega_hz, fields, area=np.pi / 2, **kw)


def dark_time(duration: float, lo_freq_hz: float | None = None,
              tls_multiplier: float = 1.0, lo_phase_step: float = 0.0,
              label: str = "dark") -> PulseSegment:
    return PulseSegment(duration=duration, tones=(), lo_freq_hz=lo_freq_hz,
                        tls_start=tls_multiplier, tls_end=tls_multiplier,
                        lo_phase_step=lo_phase_step, label=label)


def tls_ramp(duration: float, start: float, end: float,
             label: str = "tls-ramp") -> PulseSegment:
    return PulseSegment(duration=duration, tones=(), tls_start=start,
                        tls_end=end, label=label)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

def compile(sequence: PulseSequence, lindblad: LindbladSpec | None = None,
            frame: str = "rwa") -> dynamics.Schedule:
    """Compile to a piecewise schedule in the LO rotating frame.

    The LO frequency is piecewise constant and phase-continuous; phase
    steps accumulate in a register applied to subsequent tone phases.
    Dissipation channels from ``lindblad`` are attached to every
    segment, TLS-tied rates scaled by the segment multiplier.
    """
    if frame not in ("rwa", "lab-beat"):
        raise SequenceError(f"unknown frame {frame!r}")
    scaled_ch: tuple = ()
    fixed_ch: tuple = ()
    if lindblad is not None:
        specs = lindblad if isinstance(lindblad, (list, tuple)) else [lindblad]
        for spec in specs:
            if spec.tls_scaled:
                scaled_ch += spec.channels
            else:
                fixed_ch += spec.channels

    fields = sequence.fields
    segments = []
    t = 0.0
    f_lo = 0.0
    d_ref = 1
    phase_register = 0.0
    lo_trace = []  # (t0, t1, f_lo_hz) for phase bookkeeping by protocols

    for seg in sequence.segments:
        phase_register += seg.lo_phase_step
        if seg.tones:
            primary = seg.tones[0]
            f_lo = primary.lo_freq_hz(fields)
            d_ref = primary.dm
        elif seg.lo_freq_hz is not None:
            f_lo = seg.lo_freq_hz
        lo_trace.append((t, t + seg.duration, f_lo))

        mu0, mu1 = seg.tls_start, seg.tls_end
        diag0 = _frame_diag(sequence, t, mu0, f_lo, d_ref)
        diag1 = _frame_diag(sequence, t + seg.duration, mu1, f_lo, d_ref)
        flat_mu = abs(mu1 - mu0) < 1e-15

        if not seg.tones:
            segments.append(dynamics.Segment(
                t0=t, t1=t + seg.duration, kind="diagonal",
                diag_start=diag0, diag_end=diag1,
                channels=scaled_ch, channels_fixed=fixed_ch,
                mult_start=mu0, mult_end=mu1,
                f_max_hz=float(max(np.max(np.abs(diag0)), np.max(np.abs(diag1)))),
                label=seg.label))
            t += seg.duration
            continue

        tone_terms = []
        f_beats = []
        for tone in seg.tones:
            cmat = tone.coupling_matrix() / 2.0
            if frame == "lab-beat":
                rate = tone.lo_freq_hz(fields)
                phi0 = tone.phase + phase_register
            else:
                f_tone = tone.lo_freq_hz(fields)
                rate = f_tone - f_lo * (tone.dm / d_ref)
                phi0 = tone.phase + phase_register
            tone_terms.append((cmat, rate, phi0))
            f_beats.append(abs(rate))

        env = seg.envelope_fn()
        square = seg.envelope == "square"
        static = (square and flat_mu
                  and all(abs(r) < 1e-12 for _, r, _ in tone_terms)
                  and frame == "rwa")
        if static:
            h = np.diag(diag0).astype(complex)
            for cmat, _, phi0 in tone_terms:
                # drive phase rides on the raising coupling |high><low|
                upper = cmat * np.exp(-1j * phi0)
                h += upper + upper.conj().T
            segments.append(dynamics.Segment(
                t0=t, t1=t + seg.duration, kind="constant", h_const=h,
                channels=scaled_ch, channels_fixed=fixed_ch,
                mult_start=mu0, mult_end=mu1,
                f_max_hz=float(np.max(np.abs(h))), label=seg.label))
        else:
            h_func = _make_h_func(sequence, seg, t, f_lo, d_ref, tone_terms,
                                  env, frame)
            f_max = float(max([np.max(np.abs(diag0)), np.max(np.abs(diag1))]
                              + f_beats))
            segments.append(dynamics.Segment(
                t0=t, t1=t + seg.duration, kind="general", h_func=h_func,
                channels=scaled_ch, channels_fixed=fixed_ch,
                mult_start=mu0, mult_end=mu1, f_max_hz=f_max, label=seg.label))
        t += seg.duration

    return dynamics.Schedule(tuple(segments),
                             meta={"frame": frame, "lo_trace": tuple(lo_trace),
                                   "total_duration": t})


def _true_fields(sequence: PulseSequence) -> FieldParams:
    f = sequence.fields
    return replace(f, b_hz=f.b_hz + sequence.b_offset_hz,
                   q_hz=f.q_hz + sequence.q_offset_hz)


def _frame_diag(sequence, t, mu, f_lo, d_ref) -> np.ndarray:
    f = _true_fields(sequence)
    bare = f.level_shifts(t, tls_multiplier=mu)
    return bare + (f_lo / d_ref) * M_VALUES


def _make_h_func(sequence, seg: PulseSegment, t_start, f_lo, d_ref,
                 tone_terms, env, frame):
    dur = seg.duration
    mu0, mu1 = seg.tls_start, seg.tls_end
    fields = _true_fields(sequence)

    def h(tt: float) -> np.ndarray:
        s = np.clip((tt - t_start) / dur, 0.0, 1.0)
        mu = mu0 + s * (mu1 - mu0)
        bare = fields.level_shifts(tt, tls_multiplier=mu)
        if frame == "rwa":
            hm = np.diag(bare + (f_lo / d_ref) * M_VALUES).astype(complex)
            for cmat, rate, phi0 in tone_terms:
                ph = np.exp(-1j * (2 * np.pi * rate * (tt - t_start) + phi0))
                upper = env(s) * cmat * ph
                hm += upper + upper.conj().T
        else:
            hm = np.diag(bare).astype(complex)
            for cmat, rate, phi0 in tone_terms:
                osc = np.cos(2 * np.pi * rate * (tt - t_start) + phi0)
                upper = 2.0 * env(s) * cmat * osc  # full beat, both quadrature terms
                hm += upper + upper.conj().T
        return hm

    return h


# ---------------------------------------------------------------------------
# running and per-shot noise realization
# ---------------------------------------------------------------------------

def realize(sequence: PulseSequence, rng: np.random.Generator) -> PulseSequence:
    """Draw one noisy realization of the sequence (pulse areas, b, q)."""
    noise = sequence.noise
    if noise is None:
        return sequence
    new_segments = []
    for seg in sequence.segments:
        if seg.tones and (noise.pulse_area_sigma > 0 or noise.pulse_area_fraction > 0):
            tone = seg.tones[0]
            area = 2 * np.pi * tone.omega_hz * seg.duration * seg.area_fraction()
            jitter = rng.normal(0.0, noise.pulse_area_sigma) if noise.pulse_area_sigma else 0.0
            jitter += area * rng.normal(0.0, noise.pulse_area_fraction) if noise.pulse_area_fraction else 0.0
            factor = max((area + jitter) / area, 0.0)
            new_tones = tuple(replace(t_, omega_hz=t_.omega_hz * factor)
                              for t_ in seg.tones)
            seg = replace(seg, tones=new_tones)
        new_segments.append(seg)
    db = rng.normal(0.0, noise.b_jitter_hz) if noise.b_jitter_hz else 0.0
    dq = rng.normal(0.0, noise.q_jitter_hz) if noise.q_jitter_hz else 0.0
    if noise.b_toggle_prob > 0 and rng.random() < noise.b_toggle_prob:
        db += noise.b_toggle_hz
    return replace(sequence, segments=tuple(new_segments),
                   b_offset_hz=sequence.b_offset_hz + db,
                   q_offset_hz=sequence.q_offset_hz + dq)


def run(sequence: PulseSequence, initial_state: np.ndarray,
        engine: str = "pure", lindblad: LindbladSpec | None = None,
        t_eval=None, tol: float = dynamics.DEFAULT_RTOL,
        apply_noise: bool = False, rng: np.random.Generator | None = None
        ) -> dynamics.Trajectory:
    """Evolve an initial state through the sequence."""
    if engine not in ("pure", "density"):
        raise SequenceError("engine must be 'pure' or 'density'")
    seq = sequence
    if apply_noise and sequence.noise is not None:
        rng = rng or np.random.default_rng(sequence.seed)
        seq = realize(sequence, rng)
    schedule = compile(seq, lindblad=lindblad)
    if engine == "pure":
        if schedule.has_dissipation():
            raise SequenceError("pure engine cannot carry dissipation channels")
        return dynamics.evolve_pure(initial_state, schedule, tol=tol, t_eval=t_eval)
    rho = initial_state
    if np.asarray(initial_state).ndim == 1:
        psi = np.asarray(initial_state, dtype=complex)
        rho = np.outer(psi, psi.conj())
    return dynamics.evolve_density(rho, schedule, tol=tol, t_eval=t_eval)


def sequence_to_dict(sequence: PulseSequence) -> dict:
    """JSON-ready description of a sequence (noise spec by value if it
    is a dataclass; reattach it after :func:`sequence_from_dict`)."""
    import dataclasses

    def tone_dict(t: RamanTone) -> dict:
        return {"m_low": t.m_low, "m_high": t.m_high, "omega_hz": t.omega_hz,
                "detuning_hz": t.detuning_hz, "phase": t.phase,
                "cg_weighting": t.cg_weighting}

    noise = sequence.noise
    if noise is not None and dataclasses.is_dataclass(noise):
        noise = dataclasses.asdict(noise)
    return {
        "fields": {"b_hz": sequence.fields.b_hz, "q_hz": sequence.fields.q_hz,
                   "b_vector_hz": sequence.fields.b_vector_hz},
        "seed": sequence.seed,
        "noise": noise,
        "segments": [
            {"duration": s.duration, "envelope": s.envelope,
             "envelope_param": s.envelope_param, "tls_start": s.tls_start,
             "tls_end": s.tls_end, "lo_freq_hz": s.lo_freq_hz,
             "lo_phase_step": s.lo_phase_step, "label": s.label,
             "tones": [tone_dict(t) for t in s.tones]}
            for s in sequence.segments],
    }


def sequence_from_dict(data: dict) -> PulseSequence:
    fields = FieldParams(**data["fields"])
    segments = tuple(
        PulseSegment(duration=s["duration"],
                     tones=tuple(RamanTone(**t) for t in s.get("tones", ())),
                     envelope=s.get("envelope", "square"),
                     envelope_param=s.get("envelope_param", 0.25),
                     tls_start=s.get("tls_start", 1.0),
                     tls_end=s.get("tls_end", 1.0),
                     lo_freq_hz=s.get("lo_freq_hz"),
                     lo_phase_step=s.get("lo_phase_step", 0.0),
                     label=s.get("label", ""))
        for s in data["segments"])
    return PulseSequence(segments=segments, fields=fields,
                         seed=data.get("seed"))


def lo_frequency_trace(schedule: dynamics.Schedule) -> tuple:
    """(t0, t1, f_lo_hz) spans recorded at compile time."""
    return schedule.meta.get("lo_trace", ())


def mean_lo_frequency(schedule: dynamics.Schedule, t0: float, t1: float) -> float:
    """Time-averaged signed LO frequency over [t0, t1] (Hz)."""
    total = 0.0
    for a, b, f in lo_frequency_trace(schedule):
        lo, hi = max(a, t0), min(b, t1)
        if hi > lo:
            total += f * (hi - lo)
    return total / (t1 - t0)
