"""Oscillation metrics and parameter sweeps over simulated traces.

Frequency comes from hysteresis-thresholded midline crossings rather
than a spectral estimate because the waveforms are strongly
non-sinusoidal superpositions; phase shifts come from the argmax of the
circular cross-correlation over an integer number of periods.  The
sweep harness runs one integration per grid cell, isolates per-cell
failures, and is deterministic regardless of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from io import StringIO

import csv

import numpy as np

from .dynamics import SolverConfig, assemble, initial_state, integrate
from .netlist import CircuitModel

__all__ = [
    "AnalysisError",
    "FrequencyEstimate",
    "OscillationReport",
    "CellResult",
    "SweepResult",
    "estimate_frequency",
    "estimate_phase_shift",
    "detect_settling",
    "analyze",
    "sweep",
    "wave_direction",
]

_BAND = 0.05  # hysteresis band, fraction of peak-to-peak amplitude


class AnalysisError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrequencyEstimate:
    frequency_hz: float
    period_std_s: float
    cycles: int


def _rising_crossings(
    t: np.ndarray,
    x: np.ndarray,
    midline: float | None = None,
    amplitude: float | None = None,
) -> np.ndarray:
    """Times of upward midline crossings, debounced by a hysteresis band
    of +-5 % of the amplitude around the midline."""
    m = float(np.mean(x)) if midline is None else midline
    amp = float(np.max(x) - np.min(x)) if amplitude is None else amplitude
    if amp <= 0.0 or not math.isfinite(amp):
        return np.empty(0)
    upper = m + _BAND * amp
    lower = m - _BAND * amp
    region = np.zeros(x.size, dtype=np.int8)
    region[x >= upper] = 1
    region[x <= lower] = -1
    nz = np.nonzero(region)[0]
    if nz.size < 2:
        return np.empty(0)
    states = region[nz]
    rising = np.nonzero((states[1:] == 1) & (states[:-1] == -1))[0]
    mid_up = np.nonzero((x[:-1] < m) & (x[1:] >= m))[0] + 1
    times = []
    for k in rising:
        lo, hi = nz[k], nz[k + 1]
        j_idx = np.searchsorted(mid_up, lo, side="right")
        if j_idx >= mid_up.size or mid_up[j_idx] > hi:
            continue  # band was crossed without a clean midline pass
        j = mid_up[j_idx]
        x0, x1 = x[j - 1], x[j]
        frac = (m - x0) / (x1 - x0) if x1 != x0 else 0.0
        times.append(t[j - 1] + frac * (t[j] - t[j - 1]))
    return np.asarray(times)


def estimate_frequency(t: np.ndarray, x: np.ndarray, min_cycles: int = 5) -> FrequencyEstimate:
    """Mean reciprocal period over the window, with the period scatter.

    Raises :class:`AnalysisError` when fewer than ``min_cycles`` full
    cycles are present.  Invariant under uniform scaling of ``x``.
    """
    crossings = _rising_crossings(np.asarray(t), np.asarray(x))
    if crossings.size < min_cycles + 1:
        raise AnalysisError(
            f"insufficient cycles: found {max(crossings.size - 1, 0)}, "
            f"need {min_cycles}"
        )
    periods = np.diff(crossings)
    return FrequencyEstimate(
        frequency_hz=float(np.mean(1.0 / periods)),
        period_std_s=float(np.std(periods)),
        cycles=int(periods.size),
    )


def estimate_phase_shift(t: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Phase of ``b`` relative to ``a`` in degrees within [0, 360).

    ``b(t) = a(t - T/3)`` reports 120.  Both series must oscillate at a
    common frequency (within 2 %); the shift is the argmax of the
    circular cross-correlation over an integer number of periods, with
    parabolic sub-sample refinement.
    """
    t = np.asarray(t)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa = estimate_frequency(t, a)
    fb = estimate_frequency(t, b)
    f_mean = 0.5 * (fa.frequency_hz + fb.frequency_hz)
    if abs(fa.frequency_hz - fb.frequency_hz) > 0.02 * f_mean:
        raise AnalysisError(
            f"traces are not at a common frequency "
            f"({fa.frequency_hz:.4g} Hz vs {fb.frequency_hz:.4g} Hz)"
        )
    period = 1.0 / f_mean
    dt = float(t[1] - t[0])
    per_period = period / dt
    k = int((t[-1] - t[0]) / period)
    if k < 1:
        raise AnalysisError("window shorter than one period")
    length = int(round(k * per_period))
    length = min(length, t.size)
    aa = a[-length:] - a[-length:].mean()
    bb = b[-length:] - b[-length:].mean()
    spec_a = np.fft.rfft(aa)
    spec_b = np.fft.rfft(bb)
    corr = np.fft.irfft(np.conj(spec_a) * spec_b, n=length)
    peak = int(np.argmax(corr))
    y1 = corr[(peak - 1) % length]
    y2 = corr[peak]
    y3 = corr[(peak + 1) % length]
    denom = y1 - 2.0 * y2 + y3
    delta = 0.5 * (y1 - y3) / denom if denom != 0.0 else 0.0
    lag = (peak + delta) * dt
    return float((lag % period) / period * 360.0) % 360.0


def detect_settling(t: np.ndarray, x: np.ndarray) -> tuple[float, bool]:
    """Earliest time after which every per-cycle peak-to-peak amplitude
    stays within 5 % of the median of the remaining cycles.

    Returns ``(t_end, False)`` when the series never settles into
    sustained cycling.  The cycle segmentation uses the midline of the
    trailing half so the startup transient cannot mask it.
    """
    t = np.asarray(t)
    x = np.asarray(x, dtype=float)
    tail = x[x.size // 2 :]
    midline = float(tail.mean())
    amplitude = float(tail.max() - tail.min())
    crossings = _rising_crossings(t, x, midline, amplitude)
    if crossings.size < 4:
        return float(t[-1]), False
    amps = []
    for k in range(crossings.size - 1):
        mask = (t >= crossings[k]) & (t < crossings[k + 1])
        seg = x[mask]
        amps.append(float(seg.max() - seg.min()) if seg.size else 0.0)
    amps_arr = np.asarray(amps)
    for k in range(amps_arr.size - 2):
        rest = amps_arr[k:]
        med = float(np.median(rest))
        if med > 0.0 and np.all(np.abs(rest - med) < 0.05 * med):
            return float(crossings[k]), True
    return float(t[-1]), False


@dataclass
class OscillationReport:
    """Verdict and metrics for one simulated run.

    ``oscillating`` requires every switch node to settle, to complete at
    least ``min_cycles`` cycles afterwards with amplitude variation
    below 5 %, and all node frequencies to agree within 2 %.
    """

    oscillating: bool
    frequency_hz: float
    period_std_s: float
    settling_time_s: float
    cycles_observed: int
    amplitude_vpp: dict[str, float] = field(default_factory=dict)
    phase_deg: dict[tuple[str, str], float] = field(default_factory=dict)
    cycle_order: list[str] = field(default_factory=list)
    cycle_steps_deg: list[float] = field(default_factory=list)
    nodes: list[str] = field(default_factory=list)
    failure_reason: str | None = None

    @property
    def cycle_phase_sum_deg(self) -> float:
        return float(sum(self.cycle_steps_deg))

    def to_kv_lines(self) -> list[str]:
        lines = [
            f"oscillating = {'true' if self.oscillating else 'false'}",
            f"frequency_hz = {self.frequency_hz!r}",
            f"period_std_s = {self.period_std_s!r}",
            f"settling_time_s = {self.settling_time_s!r}",
            f"cycles_observed = {self.cycles_observed}",
        ]
        for node in self.nodes:
            if node in self.amplitude_vpp:
                lines.append(f"amplitude_vpp.{node} = {self.amplitude_vpp[node]!r}")
        for (a, b), phi in sorted(self.phase_deg.items()):
            lines.append(f"phase_deg.{a}.{b} = {phi!r}")
        if self.cycle_order:
            lines.append(f"cycle_order = {','.join(self.cycle_order)}")
            lines.append(
                "cycle_steps_deg = "
                + ",".join(repr(v) for v in self.cycle_steps_deg)
            )
            lines.append(f"cycle_phase_sum_deg = {self.cycle_phase_sum_deg!r}")
        if self.failure_reason:
            lines.append(f"failure_reason = {self.failure_reason}")
        return lines


def _failed_report(nodes: list[str], t_end: float, reason: str) -> OscillationReport:
    return OscillationReport(
        oscillating=False,
        frequency_hz=float("nan"),
        period_std_s=float("nan"),
        settling_time_s=t_end,
        cycles_observed=0,
        nodes=nodes,
        failure_reason=reason,
    )


def analyze(trace, min_cycles: int = 5) -> OscillationReport:
    """Full oscillation report for a trace's switch-bearing nodes."""
    nodes = list(trace.osc_nodes)
    t = trace.t
    t_end = float(t[-1])
    if not nodes:
        return _failed_report(nodes, t_end, "circuit has no switch nodes")

    series = {n: trace.voltage(n) for n in nodes}
    settle_times = {}
    for node, x in series.items():
        t_settle, settled = detect_settling(t, x)
        if not settled:
            return _failed_report(nodes, t_end, f"node {node} never settles")
        settle_times[node] = t_settle
    settling = max(settle_times.values())
    window = t >= settling
    tw = t[window]

    windowed = {n: x[window] for n, x in series.items()}
    freqs = {}
    amps = {}
    cycles = []
    for node, xw in windowed.items():
        try:
            est = estimate_frequency(tw, xw, min_cycles)
        except AnalysisError as exc:
            return _failed_report(nodes, t_end, f"node {node}: {exc}")
        freqs[node] = est
        cycles.append(est.cycles)
        crossings = _rising_crossings(tw, xw)
        cycle_amps = []
        for k in range(crossings.size - 1):
            seg = xw[(tw >= crossings[k]) & (tw < crossings[k + 1])]
            if seg.size:
                cycle_amps.append(float(seg.max() - seg.min()))
        med = float(np.median(cycle_amps))
        variation = max(abs(a - med) for a in cycle_amps) / med if med else 1.0
        if variation >= 0.05:
            return _failed_report(
                nodes, t_end,
                f"node {node}: post-settling amplitude varies by "
                f"{variation * 100:.1f}%",
            )
        amps[node] = med

    f_values = [est.frequency_hz for est in freqs.values()]
    f_mean = float(np.mean(f_values))
    if (max(f_values) - min(f_values)) > 0.02 * f_mean:
        return _failed_report(nodes, t_end, "node frequencies disagree by more than 2%")

    phases: dict[tuple[str, str], float] = {}
    order = [nodes[0]]
    if len(nodes) > 1:
        for i, a in enumerate(nodes):
            for b in nodes[i + 1 :]:
                phases[(a, b)] = estimate_phase_shift(tw, windowed[a], windowed[b])
        rel = {nodes[0]: 0.0}
        for b in nodes[1:]:
            rel[b] = phases[(nodes[0], b)]
        order = sorted(nodes, key=lambda n: rel[n])
    steps = []
    if len(order) > 1:
        ring = order + [order[0]]
        for a, b in zip(ring[:-1], ring[1:]):
            steps.append(estimate_phase_shift(tw, windowed[a], windowed[b]))

    return OscillationReport(
        oscillating=True,
        frequency_hz=f_mean,
        period_std_s=float(np.mean([est.period_std_s for est in freqs.values()])),
        settling_time_s=settling,
        cycles_observed=int(min(cycles)),
        amplitude_vpp=amps,
        phase_deg=phases,
        cycle_order=order,
        cycle_steps_deg=steps,
        nodes=nodes,
    )


def wave_direction(trace, dea_chain: list[str], t_start: float = 0.0) -> int:
    """Sign of the travelling strain wave along a chain of actuators.

    +1 when later chain members peak later (wave moves toward higher
    indices), -1 for the opposite, 0 when no consistent ordering exists.
    """
    mask = trace.t >= t_start
    tw = trace.t[mask]
    steps = []
    for a, b in zip(dea_chain[:-1], dea_chain[1:]):
        phi = estimate_phase_shift(tw, trace.strain(a)[mask], trace.strain(b)[mask])
        steps.append(phi if phi <= 180.0 else phi - 360.0)
    mean_step = float(np.mean(steps))
    if mean_step > 0.0:
        return 1
    if mean_step < 0.0:
        return -1
    return 0


# --------------------------------------------------------------------------
# Parameter sweeps


@dataclass
class CellResult:
    rs_ohm: float | None
    vs_volt: float | None
    oscillating: bool
    freq_hz: float | None = None
    period_std_s: float | None = None
    settling_s: float | None = None
    cycles: int | None = None
    amp_min_vpp: float | None = None
    amp_max_vpp: float | None = None
    speed_mps: float | None = None
    error: str | None = None
    report: OscillationReport | None = None


@dataclass
class SweepResult:
    rs_values: list[float | None]
    vs_values: list[float | None]
    cells: list[CellResult]  # row-major: rs outer, vs inner

    CSV_HEADER = (
        "rs_ohm,vs_volt,oscillating,freq_hz,period_std_s,settling_s,"
        "cycles,amp_min_vpp,amp_max_vpp,speed_mps,error"
    )

    def cell(self, i: int, j: int) -> CellResult:
        return self.cells[i * len(self.vs_values) + j]

    def to_csv(self) -> str:
        buf = StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER.split(","))
        for cell in self.cells:
            writer.writerow(
                [
                    "" if cell.rs_ohm is None else repr(float(cell.rs_ohm)),
                    "" if cell.vs_volt is None else repr(float(cell.vs_volt)),
                    "true" if cell.oscillating else "false",
                    "" if cell.freq_hz is None else repr(float(cell.freq_hz)),
                    "" if cell.period_std_s is None else repr(float(cell.period_std_s)),
                    "" if cell.settling_s is None else repr(float(cell.settling_s)),
                    "" if cell.cycles is None else str(cell.cycles),
                    "" if cell.amp_min_vpp is None else repr(float(cell.amp_min_vpp)),
                    "" if cell.amp_max_vpp is None else repr(float(cell.amp_max_vpp)),
                    "" if cell.speed_mps is None else repr(float(cell.speed_mps)),
                    cell.error or "",
                ]
            )
        return buf.getvalue()


def _check_axis(name: str, values) -> list[float] | None:
    if values is None:
        return None
    out = [float(v) for v in values]
    if not out:
        raise ValueError(f"{name} axis is empty")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError(f"{name} axis must be strictly increasing")
    return out


def _run_cell(payload) -> CellResult:
    model, rs, vs, base_rs, config, with_gait = payload
    cell = CellResult(rs_ohm=rs, vs_volt=vs, oscillating=False)
    try:
        variant = model
        if rs is not None:
            variant = variant.rescaled(rs_factor=rs / base_rs)
        if vs is not None:
            variant = variant.with_supply_voltage(vs)
        system = assemble(variant)
        trace = integrate(system, config, initial_state(variant, config.perturbation))
        report = analyze(trace)
        cell.report = report
        cell.oscillating = report.oscillating
        cell.settling_s = report.settling_time_s
        if report.oscillating:
            cell.freq_hz = report.frequency_hz
            cell.period_std_s = report.period_std_s
            cell.cycles = report.cycles_observed
            cell.amp_min_vpp = min(report.amplitude_vpp.values())
            cell.amp_max_vpp = max(report.amplitude_vpp.values())
            if with_gait and variant.feet:
                from .locomotion import simulate_gait, speed

                gait = simulate_gait(trace, variant.feet)
                cell.speed_mps = speed(gait, t_start=report.settling_time_s)
        else:
            cell.error = report.failure_reason
    except Exception as exc:  # per-cell isolation is part of the contract
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def sweep(
    model: CircuitModel,
    rs_values=None,
    vs_values=None,
    config: SolverConfig | None = None,
    workers: int = 1,
    with_gait: bool = True,
) -> SweepResult:
    """Grid of independent runs over serial-resistance and supply axes.

    ``rs_values`` are target values in ohms for the first serial
    resistor; every resistor is scaled by the same factor so ratios are
    preserved.  ``vs_values`` are absolute supply voltages applied to
    every supply.  Either axis may be ``None`` to keep the netlist
    value.  Results are row-major (resistance outer) and deterministic
    regardless of ``workers``.
    """
    config = config or SolverConfig()
    rs_axis = _check_axis("RS", rs_values)
    vs_axis = _check_axis("VS", vs_values)
    if rs_axis is not None and not model.resistors:
        raise ValueError("netlist has no serial resistors to sweep")
    if vs_axis is not None and not model.supplies:
        raise ValueError("netlist has no supply to sweep")
    base_rs = model.resistors[0].resistance if model.resistors else None
    rs_list: list[float | None] = rs_axis if rs_axis is not None else [None]
    vs_list: list[float | None] = vs_axis if vs_axis is not None else [None]

    payloads = [
        (model, rs, vs, base_rs, config, with_gait)
        for rs in rs_list
        for vs in vs_list
    ]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, payloads))
    else:
        cells = [_run_cell(p) for p in payloads]
    return SweepResult(rs_values=rs_list, vs_values=vs_list, cells=cells)
