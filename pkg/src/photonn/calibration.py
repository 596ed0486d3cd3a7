"""Mesh calibration from chip observables alone.

``MeshDevice`` simulates a current-driven mesh whose truth (heater I-V
curves, power-per-pi, static phase offsets, crosstalk, local-oscillator
phase) is private. Calibration may only set heater currents and read heater
voltages, output powers, and homodyne quadratures, mirroring what a real
setup exposes.

The protocol has four stages:

1. Internal phases along the two diagonals. Light injected at an edge port
   can reach the opposite edge port through exactly one trajectory, so the
   transmitted power is a clean two-beam fringe of any single swept MZI on
   that chain regardless of the other settings. A coarse grid plus local
   refinement first parks the whole chain near the cross state for contrast.
2. Internal phases of the six remaining MZIs, each through a route planned
   over the already-calibrated devices. The planner tracks the unmeasured
   output branch and rejects any route where it could rejoin the measured
   one.
3. External and screen phase offsets. Pairs of 50:50 MZIs two columns apart
   form a larger interferometer whose arms cross the intermediate column in
   the bar state; one arm picks up that column's external phase, so sweeping
   it traces a fringe whose offset is a known +/-1 combination of unknown
   static offsets. Everything upstream of the 50:50 splitter is common path
   and cancels. The last-column externals never modulate any power, so
   their offsets come from homodyne phase readings instead. All offsets are
   then solved jointly as a wrapped linear system; the one-dimensional null
   space (a common shift of all screens and the LO phase, i.e. a global
   phase) is fixed by gauging screen 0 to zero.
4. Optionally, thermal crosstalk coefficients by linear response of a
   monitored internal phase to stepped aggressor drives.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize_scalar

from . import constants
from .errors import ConvergenceError, SchemaError
from .hardware import (
    CrosstalkMatrix,
    HardwareErrorModel,
    PhaseShifterCal,
    _poly_no_constant,
    apply_crosstalk_correction,
    current_for_phase,
    phase_from_current,
    physical_mesh_from_commanded,
)
from .mesh import MeshProgram, clements_layout

MESH_CALIBRATION_SCHEMA = "mesh-calibration/1"

TWO_PI = 2.0 * math.pi
SWEEP_POINTS = 120
QUAD_POINTS = 8


def _wrap_pm(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


# ---------------------------------------------------------------------------
# simulated device
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrueHeater:
    """Hidden ground truth for one heater."""

    v_coeffs: tuple[float, float, float, float]
    p_pi: float
    p0: float


class MeshDevice:
    """Current-driven mesh with hidden truth and hardware-like observables.

    Heater order is [internal x L, external x L, screen x n]; for an n-mode
    mesh that is n^2 heaters. ``true_transfer_matrix`` deliberately breaks
    the abstraction and exists only so tests and benchmark reports can score
    a calibration; the calibration routines never call it.
    """

    def __init__(
        self,
        heaters,
        splitter_dev=None,
        loss_db=None,
        crosstalk=None,
        lo_phase: float = 0.0,
        lo_amplitude: float = 1.0,
        readout_noise: float = 0.0,
        seed=0,
    ):
        heaters = tuple(heaters)
        n = int(round(math.sqrt(len(heaters))))
        if n * n != len(heaters) or n < 2:
            raise ValueError("need n^2 heaters for an n-mode mesh")
        L = n * (n - 1) // 2
        self._n = n
        self._heaters = heaters
        statics = np.array([h.p0 for h in heaters])
        self._errors = HardwareErrorModel(
            n=n,
            splitter_dev=np.zeros((L, 2)) if splitter_dev is None else splitter_dev,
            loss_db=np.zeros(L) if loss_db is None else loss_db,
            static_internal=statics[:L],
            static_external=statics[L : 2 * L],
            static_screen=statics[2 * L :],
            crosstalk=crosstalk,
        )
        self._currents = np.zeros(len(heaters))
        self._lo_phase = float(lo_phase)
        self._lo_amplitude = float(lo_amplitude)
        self._noise = float(readout_noise)
        self._rng = np.random.default_rng(seed)

    @property
    def n(self) -> int:
        return self._n

    @property
    def heater_count(self) -> int:
        return len(self._heaters)

    @property
    def mzi_count(self) -> int:
        return self._n * (self._n - 1) // 2

    def currents(self) -> np.ndarray:
        return self._currents.copy()

    def reset(self):
        self._currents[:] = 0.0

    def set_current(self, heater: int, amps: float):
        if not 0 <= heater < len(self._heaters):
            raise ValueError(f"no heater {heater}")
        if not 0.0 <= amps <= constants.HEATER_MAX_CURRENT_A:
            raise ValueError("drive current outside the supply range")
        self._currents[heater] = amps

    def set_currents(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != self._currents.shape:
            raise ValueError("need one current per heater")
        if np.any(vec < 0) or np.any(vec > constants.HEATER_MAX_CURRENT_A):
            raise ValueError("drive current outside the supply range")
        self._currents[:] = vec

    def _jitter(self, values):
        if self._noise:
            values = values * (1.0 + self._noise * self._rng.standard_normal(np.shape(values)))
        return values

    def heater_voltage(self, heater: int) -> float:
        h = self._heaters[heater]
        v = _poly_no_constant(h.v_coeffs, self._currents[heater])
        return float(self._jitter(v))

    def _commanded(self) -> np.ndarray:
        out = np.empty(len(self._heaters))
        for i, h in enumerate(self._heaters):
            current = self._currents[i]
            power = current * _poly_no_constant(h.v_coeffs, current)
            out[i] = h.p0 + math.pi * power / h.p_pi
        return out

    def _transfer(self) -> np.ndarray:
        return physical_mesh_from_commanded(self._errors, self._commanded())

    def output_powers(self, input_fields) -> np.ndarray:
        x = np.asarray(input_fields, dtype=complex)
        if x.shape != (self._n,):
            raise ValueError(f"need {self._n} input fields")
        p = np.abs(self._transfer() @ x) ** 2
        return np.asarray(self._jitter(p), dtype=float)

    def output_quadrature(self, input_fields, port: int, quad_phase: float) -> float:
        x = np.asarray(input_fields, dtype=complex)
        b = (self._transfer() @ x)[port]
        q = 2.0 * self._lo_amplitude * (
            b * np.exp(-1j * (self._lo_phase + quad_phase))
        ).real
        if self._noise:
            q += self._noise * 2.0 * self._lo_amplitude * self._rng.standard_normal()
        return float(q)

    def true_transfer_matrix(self) -> np.ndarray:
        """Oracle for tests and benchmark scoring; not a device observable."""
        return self._transfer()

    def true_heater(self, heater: int) -> TrueHeater:
        """Truth peek for tests; not a device observable."""
        return self._heaters[heater]


def make_random_device(
    seed=0,
    n: int = constants.N_MODES,
    resistance_spread: float = 0.05,
    v_nonlinearity: float = 0.03,
    p_pi_spread: float = 0.08,
    static_spread: float = TWO_PI,
    crosstalk_sigma: float | None = None,
    readout_noise: float = 0.0,
) -> MeshDevice:
    """Random phases-only device: ohmic-ish heaters with cubic I-V curves,
    spread power-per-pi, uniform static offsets, ideal splitters."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h_count = n * n
    i_max = constants.HEATER_MAX_CURRENT_A
    heaters = []
    for _ in range(h_count):
        r = constants.HEATER_RESISTANCE_OHM * (1.0 + resistance_spread * rng.standard_normal())
        a2 = v_nonlinearity * r / i_max * rng.standard_normal()
        # cubic only: dissipated power is then a quartic in current, which the
        # calibration's quartic phase basis represents exactly
        a3 = 0.5 * v_nonlinearity * r / i_max**2 * rng.standard_normal()
        heaters.append(
            TrueHeater(
                v_coeffs=(r, a2, a3, 0.0),
                p_pi=constants.P_PI_W * (1.0 + p_pi_spread * (2.0 * rng.random() - 1.0)),
                p0=rng.uniform(0.0, static_spread),
            )
        )
    xt = None
    if crosstalk_sigma is not None:
        xt = np.eye(h_count) + crosstalk_sigma * (
            rng.standard_normal((h_count, h_count)) * (1.0 - np.eye(h_count))
        )
    return MeshDevice(
        heaters,
        crosstalk=xt,
        lo_phase=rng.uniform(0.0, TWO_PI),
        readout_noise=readout_noise,
        seed=rng.integers(1 << 31),
    )


# ---------------------------------------------------------------------------
# fringe fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    """Fitted P(x) = A + B cos(pi x / p_pi + offset) over dissipated power x,
    plus the heater's I-V polynomial."""

    amp_offset: float
    amp_mod: float
    p_pi: float
    offset: float
    v_coeffs: tuple[float, float, float, float]
    rms: float


def _fringe_model(x, a, b, p_pi, delta):
    return a + b * np.cos(np.pi * x / p_pi + delta)


def fit_heater_voltage(currents, voltages) -> tuple[float, float, float, float]:
    """Least-squares I-V polynomial a1 I + ... + a4 I^4 (no constant)."""
    currents = np.asarray(currents, dtype=float)
    voltages = np.asarray(voltages, dtype=float)
    mc = currents.max()
    u = currents / mc
    basis = np.stack([u, u**2, u**3, u**4], axis=1)
    scaled, *_ = np.linalg.lstsq(basis, voltages, rcond=None)
    return tuple(c / mc ** (k + 1) for k, c in enumerate(scaled))


def fit_fringe(currents, voltages, powers) -> FringeFit:
    """Fit one transmission fringe swept in heater current.

    The abscissa is the measured dissipated power I V(I); an FFT of the
    uniformly resampled fringe seeds the period and phase for the refinement.
    """
    currents = np.asarray(currents, dtype=float)
    voltages = np.asarray(voltages, dtype=float)
    powers = np.asarray(powers, dtype=float)
    v_coeffs = fit_heater_voltage(currents, voltages)
    x = currents * voltages
    grid = np.linspace(0.0, x[-1], 256)
    resampled = np.interp(grid, x, powers)
    spectrum = np.fft.rfft(resampled - resampled.mean())
    k = int(np.argmax(np.abs(spectrum[1:]))) + 1
    freq = k / grid[-1]
    seed = [
        float(powers.mean()),
        float(0.5 * (powers.max() - powers.min())),
        1.0 / (2.0 * freq),
        float(np.angle(spectrum[k])),
    ]
    params, _ = curve_fit(_fringe_model, x, powers, p0=seed, maxfev=20000)
    a, b, p_pi, delta = (float(v) for v in params)
    if p_pi < 0:
        p_pi, delta = -p_pi, -delta
    if b < 0:
        b, delta = -b, delta + math.pi
    delta = float(np.mod(delta, TWO_PI))
    rms = float(np.sqrt(np.mean((_fringe_model(x, a, b, p_pi, delta) - powers) ** 2)))
    return FringeFit(a, b, p_pi, delta, v_coeffs, rms)


def _cal_from_fringe(fit: FringeFit, p0: float) -> PhaseShifterCal:
    total = fit.amp_offset + fit.amp_mod
    a = fit.amp_offset / total
    # noise can push the fitted modulation marginally past the offset; a
    # physical fringe keeps T >= 0
    b = min(fit.amp_mod / total, a)
    return PhaseShifterCal.from_power_curve(
        fit.v_coeffs,
        fit.p_pi,
        p0=float(np.mod(p0, TWO_PI)),
        amp_offset=a,
        amp_modulation=b,
    )


# ---------------------------------------------------------------------------
# layout helpers
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _layout_index(n):
    return {placement: i for i, placement in enumerate(clements_layout(n))}


def _mzi_at(n, col, mode):
    """(index, is_top) of the MZI covering ``mode`` in ``col``, or None."""
    start = 0 if col % 2 == 0 else 1
    if mode < start:
        return None
    top = mode if (mode - start) % 2 == 0 else mode - 1
    if top > n - 2:
        return None
    idx = _layout_index(n)[(col, top)]
    return idx, top == mode


def trajectory_count(n, input_port, output_port) -> int:
    """Number of distinct trajectories between two ports irrespective of
    settings. A count of one guarantees a clean single-chain fringe."""
    ways = np.zeros(n, dtype=np.int64)
    ways[input_port] = 1
    for col in range(n):
        start = 0 if col % 2 == 0 else 1
        for top in range(start, n - 1, 2):
            total = ways[top] + ways[top + 1]
            ways[top] = total
            ways[top + 1] = total
    return int(ways[output_port])


def diagonal_chain(n, anti: bool = False):
    """MZI indices of the edge-to-edge chain, one per column 0..n-2."""
    index = _layout_index(n)
    if not anti:
        return [index[(col, col)] for col in range(n - 1)]
    return [index[(col, n - 2 - col)] for col in range(n - 1)]


# ---------------------------------------------------------------------------
# stage 1: diagonal internal calibration
# ---------------------------------------------------------------------------


class _CalSession:
    """Mutable scratch state while calibrating one device."""

    def __init__(self, device: MeshDevice):
        self.device = device
        self.n = device.n
        self.L = device.mzi_count
        self.internal: dict[int, PhaseShifterCal] = {}
        self.external: dict[int, PhaseShifterCal] = {}
        self.screen: dict[int, PhaseShifterCal] = {}
        # best sweep fit seen so far per external/screen heater
        self.curve_fits: dict = {}
        self.equations: list = []
        self.info: dict = {}

    def set_internal_phase(self, idx: int, theta1: float):
        self.device.set_current(idx, current_for_phase(self.internal[idx], theta1))

    def apply_settings(self, settings):
        for idx, state in settings.items():
            theta1 = {"bar": math.pi, "cross": 0.0, "split": math.pi / 2.0}[state]
            self.set_internal_phase(idx, theta1)

    def remember_curve(self, key, fit: FringeFit):
        held = self.curve_fits.get(key)
        if held is None or fit.amp_mod > held.amp_mod:
            self.curve_fits[key] = fit


def _sweep_heater(session: _CalSession, heater: int, injection, port: int,
                  points: int = SWEEP_POINTS):
    """Sweep one heater current, recording voltage and one port's power."""
    device = session.device
    saved = device.currents()[heater]
    currents = np.linspace(0.0, constants.HEATER_MAX_CURRENT_A, points)
    volts = np.empty(points)
    powers = np.empty(points)
    for i, amps in enumerate(currents):
        device.set_current(heater, amps)
        volts[i] = device.heater_voltage(heater)
        powers[i] = device.output_powers(injection)[port]
    device.set_current(heater, saved)
    return currents, volts, powers


def _maximize_port_power(session: _CalSession, heaters, injection, port: int,
                         passes: int = 3, coarse: int = 64):
    """Coordinate ascent on transmitted power: coarse grid then local
    refinement per heater. Parks a chain near its cross state."""
    device = session.device
    i_max = constants.HEATER_MAX_CURRENT_A
    grid = np.linspace(0.0, i_max, coarse)
    for _ in range(passes):
        for heater in heaters:
            best_val = -1.0
            best_amps = 0.0
            for amps in grid:
                device.set_current(heater, amps)
                val = device.output_powers(injection)[port]
                if val > best_val:
                    best_val, best_amps = val, amps
            step = grid[1] - grid[0]
            lo = max(0.0, best_amps - step)
            hi = min(i_max, best_amps + step)

            def negated(amps):
                device.set_current(heater, amps)
                return -device.output_powers(injection)[port]

            result = minimize_scalar(negated, bounds=(lo, hi), method="bounded")
            device.set_current(heater, float(result.x))


def _calibrate_diagonal(session: _CalSession, anti: bool):
    n = session.n
    chain = diagonal_chain(n, anti)
    input_port = n - 1 if anti else 0
    output_port = 0 if anti else n - 1
    injection = np.zeros(n, dtype=complex)
    injection[input_port] = 1.0
    session.device.reset()
    # already-calibrated chain members (the shared center) go to exact cross
    todo = [idx for idx in chain if idx not in session.internal]
    for idx in chain:
        if idx in session.internal:
            session.set_internal_phase(idx, 0.0)
    _maximize_port_power(session, todo, injection, output_port)
    for idx in todo:
        currents, volts, powers = _sweep_heater(session, idx, injection, output_port)
        fit = fit_fringe(currents, volts, powers)
        # the chain transmits the cross port, so the fringe offset is the
        # static internal phase directly
        session.internal[idx] = _cal_from_fringe(fit, fit.offset)
        session.set_internal_phase(idx, 0.0)


# ---------------------------------------------------------------------------
# stage 2: isolation routes for the remaining internals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsolationRoute:
    """A measurement path for one MZI through already-calibrated devices."""

    target: int
    input_port: int
    settings: tuple[tuple[int, str], ...]
    measured_cross: bool
    measured_port: int


def plan_isolation_route(n, target: int, calibrated) -> IsolationRoute:
    """Depth-first route search.

    Before the target the light must follow a single path over calibrated
    MZIs only. After it, the measured branch is steered over calibrated MZIs
    while the discarded branch is tracked conservatively (an unset MZI
    spreads it to both rows); any chance of the two rejoining fails the
    candidate.
    """
    layout = clements_layout(n)
    calibrated = set(calibrated)
    col_t, m_t = layout[target]

    def taint_step(col, taint, blocked):
        """Taint sets reachable past this column, with any settings chosen to
        steer it through calibrated MZIs. None if it enters a blocked MZI."""
        groups: dict[int, set] = {}
        loose = set()
        for tm in taint:
            h = _mzi_at(n, col, tm)
            if h is None:
                loose.add(tm)
            else:
                groups.setdefault(h[0], set()).add(tm)
        states = [(loose, ())]
        for idx, members in groups.items():
            if idx in blocked:
                return None
            top = layout[idx][1]
            if idx in calibrated and len(members) == 1:
                tm = next(iter(members))
                mate = top + 1 if tm == top else top
                states = [
                    (acc | {out}, extra + ((idx, state),))
                    for acc, extra in states
                    for out, state in ((tm, "bar"), (mate, "cross"))
                ]
            else:
                # unknown phase (or both rows lit): assume it spreads fully
                states = [(acc | {top, top + 1}, extra) for acc, extra in states]
        return states

    def post(measured, taint, col, settings, measured_cross):
        if col == n:
            if measured not in taint:
                return settings, measured
            return None
        hit = _mzi_at(n, col, measured)
        if hit is None:
            choices = [(measured, None)]
        else:
            idx, is_top = hit
            mate = measured + 1 if is_top else measured - 1
            if idx not in calibrated or mate in taint:
                return None
            choices = [(measured, (idx, "bar")), (mate, (idx, "cross"))]
        for new_measured, decision in choices:
            new_settings = settings + ((decision,) if decision else ())
            blocked = {decision[0]} if decision else set()
            options = taint_step(col, taint, blocked)
            if options is None:
                continue
            for new_taint, extra in options:
                found = post(new_measured, frozenset(new_taint), col + 1,
                             new_settings + extra, measured_cross)
                if found:
                    return found
        return None

    def pre(mode, col, settings):
        if col == col_t:
            if mode not in (m_t, m_t + 1):
                return None
            other = m_t + 1 if mode == m_t else m_t
            for measured_cross in (True, False):
                measured0 = other if measured_cross else mode
                taint0 = frozenset({mode if measured_cross else other})
                found = post(measured0, taint0, col + 1, settings, measured_cross)
                if found:
                    final_settings, port = found
                    return IsolationRoute(
                        target=target,
                        input_port=input_port,
                        settings=final_settings,
                        measured_cross=measured_cross,
                        measured_port=port,
                    )
            return None
        hit = _mzi_at(n, col, mode)
        if hit is None:
            return pre(mode, col + 1, settings)
        idx, is_top = hit
        if idx == target or idx not in calibrated:
            return None
        mate = mode + 1 if is_top else mode - 1
        for state, new_mode in (("bar", mode), ("cross", mate)):
            found = pre(new_mode, col + 1, settings + ((idx, state),))
            if found:
                return found
        return None

    for input_port in range(n):
        found = pre(input_port, 0, ())
        if found:
            return found
    raise ConvergenceError(f"no isolation route found for MZI {target}")


def _calibrate_isolated(session: _CalSession, target: int):
    n = session.n
    route = plan_isolation_route(n, target, session.internal.keys())
    session.device.reset()
    session.apply_settings(dict(route.settings))
    injection = np.zeros(n, dtype=complex)
    injection[route.input_port] = 1.0
    currents, volts, powers = _sweep_heater(
        session, target, injection, route.measured_port
    )
    fit = fit_fringe(currents, volts, powers)
    # a bar-branch fringe is sin^2-shaped: offset sits pi away from the static
    p0 = fit.offset if route.measured_cross else fit.offset - math.pi
    session.internal[target] = _cal_from_fringe(fit, p0)
    return route


# ---------------------------------------------------------------------------
# stage 3: external and screen offsets
# ---------------------------------------------------------------------------


def _symbolic_terms(n, settings, injection_terms, upto_col):
    """Propagate (amplitude, unknown-coefficient) terms through columns
    [0, upto_col). Unknown keys are ('ext', idx), ('screen', j), ('lo',).

    Settings use calibrated internal states; each MZI's external phase stays
    at zero current, i.e. exactly its unknown static offset.
    """
    terms = dict(injection_terms)
    kappa = 1j * np.exp(1j * math.pi / 4.0) / math.sqrt(2.0)
    for col in range(upto_col):
        start = 0 if col % 2 == 0 else 1
        for top in range(start, n - 1, 2):
            t_in = terms.get(top)
            b_in = terms.get(top + 1)
            if t_in is None and b_in is None:
                continue
            idx = _layout_index(n)[(col, top)]
            state = settings.get(idx)
            ext = ("ext", idx)
            if state is None:
                raise ValueError(
                    f"light reached unset MZI {idx} during offset propagation"
                )
            if state == "bar":
                if t_in is not None:
                    amp, unk = t_in
                    terms[top] = (-amp, _bump(unk, ext))
            elif state == "cross":
                terms.pop(top, None)
                terms.pop(top + 1, None)
                if b_in is not None:
                    amp, unk = b_in
                    terms[top] = (1j * amp, _bump(unk, ext))
                if t_in is not None:
                    amp, unk = t_in
                    terms[top + 1] = (1j * amp, unk)
            elif state == "split":
                if t_in is not None and b_in is not None:
                    raise ValueError("both splitter inputs lit; arms would mix")
                amp, unk = t_in if t_in is not None else b_in
                sign = 1.0 if t_in is not None else -1.0
                terms[top] = (kappa * amp, _bump(unk, ext))
                terms[top + 1] = (sign * kappa * amp, unk)
            else:
                raise ValueError(f"unknown setting {state!r}")
    return terms


def _bump(unknowns, key, delta=1):
    out = dict(unknowns)
    out[key] = out.get(key, 0) + delta
    if out[key] == 0:
        del out[key]
    return out


def _diff_terms(term_hi, term_lo):
    """Offset expression arg(term_hi) - arg(term_lo) as (const, coeffs)."""
    amp_hi, unk_hi = term_hi
    amp_lo, unk_lo = term_lo
    coeffs = dict(unk_hi)
    for key, c in unk_lo.items():
        coeffs[key] = coeffs.get(key, 0) - c
        if coeffs[key] == 0:
            del coeffs[key]
    const = float(np.angle(amp_hi) - np.angle(amp_lo))
    return const, coeffs


@dataclass(frozen=True)
class OffsetEquation:
    """sum(coeffs * unknowns) = rhs (mod 2 pi)."""

    coeffs: tuple
    rhs: float


def _meta_experiments(n):
    """All two-arm interferometer geometries: (combiner column q, rows
    (r, r+1), settings, injection terms, sweep candidates)."""
    index = _layout_index(n)
    layout = clements_layout(n)
    experiments = []
    for combiner_idx, (q, r) in enumerate(layout):
        settings = {}
        sweeps = []  # heater ids driving a visible fringe
        if q >= 2:
            splitter = index[(q - 2, r)]
            injection = {r: (1.0, {("screen", r): 1})}
            input_port = r
            for col in range(q - 2):
                hit = _mzi_at(n, col, r)
                if hit is not None:
                    settings[hit[0]] = "bar"
            settings[splitter] = "split"
            sweeps.append(n * (n - 1) // 2 + splitter)  # splitter external
        elif q == 1:
            injection = {
                r: (1.0 / math.sqrt(2.0), {("screen", r): 1}),
                r + 1: (1.0 / math.sqrt(2.0), {("screen", r + 1): 1}),
            }
            input_port = None
        else:
            injection = {
                r: (1.0 / math.sqrt(2.0), {("screen", r): 1}),
                r + 1: (1.0 / math.sqrt(2.0), {("screen", r + 1): 1}),
            }
            input_port = None
            sweeps.append(2 * (n * (n - 1) // 2) + r)
            sweeps.append(2 * (n * (n - 1) // 2) + r + 1)
        if q >= 1:
            for mode in (r, r + 1):
                hit = _mzi_at(n, q - 1, mode)
                if hit is not None:
                    settings[hit[0]] = "bar"
                    if hit[1]:  # arm crossing a bar MZI as its top row
                        sweeps.append(n * (n - 1) // 2 + hit[0])
        settings[combiner_idx] = "split"
        for col in range(q + 1, n):
            for mode in (r, r + 1):
                hit = _mzi_at(n, col, mode)
                if hit is not None:
                    settings.setdefault(hit[0], "bar")
        experiments.append(
            {
                "combiner": combiner_idx,
                "q": q,
                "r": r,
                "settings": settings,
                "injection_terms": injection,
                "input_port": input_port,
                "sweeps": sweeps,
            }
        )
    return experiments


def _injection_fields(n, terms):
    x = np.zeros(n, dtype=complex)
    for mode, (amp, _) in terms.items():
        x[mode] = amp
    return x


def _run_meta_stage(session: _CalSession):
    n = session.n
    L = session.L
    for exp in _meta_experiments(n):
        q, r = exp["q"], exp["r"]
        terms = _symbolic_terms(n, exp["settings"], exp["injection_terms"], q)
        const, coeffs = _diff_terms(terms[r + 1], terms[r])
        injection = _injection_fields(n, exp["injection_terms"])
        for heater in exp["sweeps"]:
            if heater >= 2 * L:
                key = ("screen", heater - 2 * L)
            else:
                key = ("ext", heater - L)
            sign = coeffs.get(key)
            if sign not in (1, -1):
                raise ValueError("swept heater must appear in one arm")
            session.device.reset()
            session.apply_settings(exp["settings"])
            currents, volts, powers = _sweep_heater(session, heater, injection, r)
            fit = fit_fringe(currents, volts, powers)
            session.remember_curve(key, fit)
            rhs = float(_wrap_pm(sign * fit.offset - const))
            session.equations.append(OffsetEquation(tuple(sorted(coeffs.items())), rhs))


def _homodyne_phase(device: MeshDevice, injection, port: int) -> float:
    """arg(output field) - LO phase via a quadrature-phase scan."""
    acc = 0.0 + 0.0j
    for k in range(QUAD_POINTS):
        phi = TWO_PI * k / QUAD_POINTS
        acc += device.output_quadrature(injection, port, phi) * np.exp(1j * phi)
    return float(np.angle(acc))


def _row_settings(n, row):
    """Bar settings pinning one input row straight through to its port."""
    settings = {}
    for col in range(n):
        hit = _mzi_at(n, col, row)
        if hit is not None:
            settings[hit[0]] = "bar"
    return settings


def _run_homodyne_stage(session: _CalSession):
    """Output-port phase readings pin the last externals and the LO phase."""
    n = session.n
    L = session.L
    for row in range(n):
        settings = _row_settings(n, row)
        swept = None
        session.device.reset()
        session.apply_settings(settings)
        injection_terms = {row: (1.0, {("screen", row): 1})}
        terms = _symbolic_terms(n, settings, injection_terms, n)
        const, coeffs = _diff_terms(terms[row], (1.0, {("lo",): 1}))
        injection = _injection_fields(n, injection_terms)
        # externals whose offsets never modulate a power fringe get their
        # curve from the same scan: phase vs current is read out directly
        for key, c in coeffs.items():
            if key[0] == "ext" and key not in session.curve_fits and c == 1:
                swept = L + key[1]
                swept_key = key
        if swept is not None:
            i_grid = np.linspace(0.0, constants.HEATER_MAX_CURRENT_A, SWEEP_POINTS)
            volts = np.empty(SWEEP_POINTS)
            phases = np.empty(SWEEP_POINTS)
            for i, amps in enumerate(i_grid):
                session.device.set_current(swept, amps)
                volts[i] = session.device.heater_voltage(swept)
                phases[i] = _homodyne_phase(session.device, injection, row)
            session.device.set_current(swept, 0.0)
            drive = np.unwrap(phases) - phases[0]
            v_coeffs = fit_heater_voltage(i_grid, volts)
            x = i_grid * volts
            p_pi = math.pi * float(x @ x) / float(x @ drive)
            session.curve_fits[swept_key] = FringeFit(
                0.5, 0.5, p_pi, 0.0, v_coeffs, 0.0
            )
            measured = phases[0]
        else:
            measured = _homodyne_phase(session.device, injection, row)
        rhs = float(_wrap_pm(measured - const))
        session.equations.append(OffsetEquation(tuple(sorted(coeffs.items())), rhs))


def solve_phase_offsets(equations, n):
    """Joint wrapped least squares for all static offsets.

    Gauges screen 0 to zero (with the LO phase, a common screen shift is a
    global phase and unobservable). Integer wrap counts are re-estimated
    until stable.
    """
    L = n * (n - 1) // 2
    unknowns = [("ext", i) for i in range(L)]
    unknowns += [("screen", j) for j in range(n)]
    unknowns += [("lo",)]
    cols = {key: i for i, key in enumerate(unknowns)}
    rows = len(equations) + 1
    a = np.zeros((rows, len(unknowns)))
    b = np.zeros(rows)
    for i, eq in enumerate(equations):
        for key, c in eq.coeffs:
            a[i, cols[key]] = c
        b[i] = eq.rhs
    a[-1, cols[("screen", 0)]] = 1.0  # gauge
    rank = int(np.linalg.matrix_rank(a))
    if rank < len(unknowns):
        raise ConvergenceError(
            f"offset system rank {rank} < {len(unknowns)}; "
            "experiment coverage is incomplete"
        )
    u = np.zeros(len(unknowns))
    wraps = np.zeros(rows)
    for _ in range(60):
        target = b + TWO_PI * wraps
        u, *_ = np.linalg.lstsq(a, target, rcond=None)
        new_wraps = np.round((a @ u - b) / TWO_PI)
        new_wraps[-1] = 0.0
        if np.array_equal(new_wraps, wraps):
            break
        wraps = new_wraps
    residual = float(np.max(np.abs(_wrap_pm(a @ u - b))))
    solution = {key: float(u[i]) for key, i in cols.items()}
    return solution, {"rank": rank, "equations": len(equations), "max_residual": residual}


# ---------------------------------------------------------------------------
# assembled calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshCalibration:
    """Per-heater drive calibrations for a full mesh."""

    n: int
    internal: tuple[PhaseShifterCal, ...]
    external: tuple[PhaseShifterCal, ...]
    screen: tuple[PhaseShifterCal, ...]
    info: dict | None = None

    def __post_init__(self):
        L = self.n * (self.n - 1) // 2
        if len(self.internal) != L or len(self.external) != L or len(self.screen) != self.n:
            raise ValueError("calibration entry counts do not match the mesh size")

    def heater_cal(self, heater: int) -> PhaseShifterCal:
        L = self.n * (self.n - 1) // 2
        if heater < L:
            return self.internal[heater]
        if heater < 2 * L:
            return self.external[heater - L]
        return self.screen[heater - 2 * L]

    @property
    def heater_count(self) -> int:
        return self.n * self.n

    def static_vector(self) -> np.ndarray:
        return np.array(
            [self.heater_cal(h).phase_coeffs[0] for h in range(self.heater_count)]
        )

    def to_json(self) -> str:
        def cal_doc(cal: PhaseShifterCal):
            return json.loads(cal.to_json())

        return json.dumps(
            {
                "schema": MESH_CALIBRATION_SCHEMA,
                "n": self.n,
                "internal": [cal_doc(c) for c in self.internal],
                "external": [cal_doc(c) for c in self.external],
                "screen": [cal_doc(c) for c in self.screen],
                "info": self.info,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "MeshCalibration":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != MESH_CALIBRATION_SCHEMA:
            raise SchemaError(f"expected schema {MESH_CALIBRATION_SCHEMA!r}")

        def load(entry):
            return PhaseShifterCal.from_json(json.dumps(entry))

        return cls(
            n=doc["n"],
            internal=tuple(load(e) for e in doc["internal"]),
            external=tuple(load(e) for e in doc["external"]),
            screen=tuple(load(e) for e in doc["screen"]),
            info=doc.get("info"),
        )


def calibrate_device(device: MeshDevice) -> MeshCalibration:
    """Full calibration from device observables; see the module docstring."""
    session = _CalSession(device)
    _calibrate_diagonal(session, anti=False)
    _calibrate_diagonal(session, anti=True)
    layout = clements_layout(session.n)
    remaining = [i for i in range(session.L) if i not in session.internal]
    # later columns first: their post-target paths are short, and each newly
    # calibrated MZI widens the route choices for the earlier columns
    remaining.sort(key=lambda i: -layout[i][0])
    for target in remaining:
        _calibrate_isolated(session, target)
    _run_meta_stage(session)
    _run_homodyne_stage(session)
    solution, info = solve_phase_offsets(session.equations, session.n)
    device.reset()

    external = []
    for i in range(session.L):
        fit = session.curve_fits.get(("ext", i))
        if fit is None:
            raise ConvergenceError(f"no drive curve measured for external {i}")
        external.append(_cal_from_fringe(fit, solution[("ext", i)]))
    screen = []
    for j in range(session.n):
        fit = session.curve_fits.get(("screen", j))
        if fit is None:
            raise ConvergenceError(f"no drive curve measured for screen {j}")
        screen.append(_cal_from_fringe(fit, solution[("screen", j)]))
    internal = [session.internal[i] for i in range(session.L)]
    info = dict(info)
    info["lo_phase"] = float(np.mod(solution[("lo",)], TWO_PI))
    return MeshCalibration(
        n=session.n,
        internal=tuple(internal),
        external=tuple(external),
        screen=tuple(screen),
        info=info,
    )


def program_with_calibration(calibration: MeshCalibration, program: MeshProgram) -> np.ndarray:
    """Heater currents realizing a mesh program on the calibrated device."""
    if program.n != calibration.n:
        raise ValueError("program and calibration are for different mesh sizes")
    desired = np.concatenate(
        [
            program.theta1_vector(),
            program.theta2_vector(),
            np.asarray(program.input_phases, dtype=float),
        ]
    )
    return np.array(
        [
            current_for_phase(calibration.heater_cal(h), desired[h])
            for h in range(calibration.heater_count)
        ]
    )


# ---------------------------------------------------------------------------
# crosstalk measurement
# ---------------------------------------------------------------------------


def current_for_drive(cal: PhaseShifterCal, drive: float) -> float:
    """Current producing an unwrapped drive phase above the static offset."""
    if drive <= 0.0:
        return 0.0
    p0 = cal.phase_coeffs[0]

    def f(amps):
        return phase_from_current(cal, amps) - p0 - drive

    if f(cal.max_current) < 0:
        raise ValueError("requested drive exceeds the heater range")
    return float(brentq(f, 0.0, cal.max_current, xtol=1e-15, rtol=8.9e-16))


def _victim_phase(device, route: IsolationRoute, injection, norm: float) -> float:
    t = device.output_powers(injection)[route.measured_port] / norm
    t = min(max(float(t), 0.0), 1.0)
    if route.measured_cross:
        return 2.0 * math.acos(math.sqrt(t))
    return 2.0 * math.asin(math.sqrt(t))


def chain_route(n, victim: int) -> IsolationRoute | None:
    """Monitor route along a diagonal chain, if the victim sits on one.

    The edge-to-edge trajectory is unique, so light leaking off the chain
    (e.g. through crosstalk-detuned settings) can never rejoin the monitor
    port and the fringe is immune to stray interference.
    """
    main = diagonal_chain(n)
    if victim in main:
        settings = tuple((i, "cross") for i in main if i != victim)
        return IsolationRoute(victim, 0, settings, True, n - 1)
    anti = diagonal_chain(n, anti=True)
    if victim in anti:
        settings = tuple((i, "cross") for i in anti if i != victim)
        return IsolationRoute(victim, n - 1, settings, True, 0)
    return None


def monitor_route(n, victim: int) -> IsolationRoute:
    """Best monitor route for one internal phase: a diagonal chain when
    available, otherwise a planned isolation route."""
    route = chain_route(n, victim)
    if route is not None:
        return route
    L = n * (n - 1) // 2
    return plan_isolation_route(n, victim, set(range(L)) - {victim})


def _apply_route(device: MeshDevice, calibration: MeshCalibration,
                 route: IsolationRoute, victim_phase: float):
    device.reset()
    for idx, state in route.settings:
        device.set_current(
            idx,
            current_for_phase(
                calibration.internal[idx], {"bar": math.pi, "cross": 0.0}[state]
            ),
        )
    device.set_current(
        route.target, current_for_phase(calibration.internal[route.target], victim_phase)
    )


def _route_norm(device, calibration, route: IsolationRoute, injection,
                repeats: int) -> float:
    """Transmission normalization at the victim's fully-open state."""
    open_phase = 0.0 if route.measured_cross else math.pi
    device.set_current(
        route.target, current_for_phase(calibration.internal[route.target], open_phase)
    )
    norm = float(
        np.mean([device.output_powers(injection)[route.measured_port] for _ in range(repeats)])
    )
    device.set_current(
        route.target,
        current_for_phase(calibration.internal[route.target], math.pi / 2.0),
    )
    return norm


def _equivalent_drives(cal: PhaseShifterCal, state_phase: float, limit: int = 3):
    """Drives 2 pi apart realizing the same phase (mod 2 pi). Each is a
    distinct electrical state, so stepping between them exposes thermal
    coupling without changing the heater's own interference state."""
    base_amps = current_for_phase(cal, state_phase)
    base = phase_from_current(cal, base_amps) - cal.phase_coeffs[0]
    drives = [base]
    while len(drives) < limit:
        candidate = drives[-1] + TWO_PI
        try:
            current_for_drive(cal, candidate)
        except ValueError:
            break
        drives.append(candidate)
    return drives


def measure_crosstalk_matrix(
    device: MeshDevice,
    calibration: MeshCalibration,
    victims,
    aggressors,
    levels: int = 5,
    repeats: int = 3,
) -> CrosstalkMatrix:
    """Linear phase-coupling coefficients onto monitored internal phases.

    Each victim (an internal heater) is parked at quadrature on an isolation
    route while aggressor drives are stepped and the induced victim phase
    shift is fitted. External aggressors never alter a power reading, so
    they sweep a plain drive grid. An internal aggressor necessarily sits on
    the victim's monitor route; it is stepped between equivalent drives 2 pi
    apart, which leave its own interference state unchanged but expose its
    thermal coupling. Besides the requested aggressors, the internals of
    each victim's route are measured too, since a correction at work must
    subtract their (known, commanded) contribution. Unmeasured columns stay
    zero; the result is full heater width with a unit victim diagonal, ready
    for :func:`photonn.hardware.apply_crosstalk_correction`.
    """
    victims = list(victims)
    aggressors = list(aggressors)
    L = device.mzi_count
    n = calibration.n
    entries = np.zeros((len(victims), calibration.heater_count))
    drive_levels = list(np.linspace(0.0, TWO_PI, levels))
    for row, victim in enumerate(victims):
        entries[row, victim] = 1.0
        route = monitor_route(n, victim)
        route_states = dict(route.settings)
        injection = np.zeros(n, dtype=complex)
        injection[route.input_port] = 1.0
        _apply_route(device, calibration, route, math.pi / 2.0)
        norm = _route_norm(device, calibration, route, injection, repeats)
        targets = aggressors + [i for i in route_states if i not in aggressors]
        for agg in targets:
            if agg == victim:
                continue
            acal = calibration.heater_cal(agg)
            if agg < L:
                theta = math.pi if route_states[agg] == "bar" else 0.0
                drives = _equivalent_drives(acal, theta)
                restore = current_for_phase(acal, theta)
            else:
                drives = drive_levels
                restore = 0.0
            measured = np.empty(len(drives))
            for k, drive in enumerate(drives):
                device.set_current(agg, current_for_drive(acal, drive))
                samples = [
                    _victim_phase(device, route, injection, norm)
                    for _ in range(repeats)
                ]
                measured[k] = np.mean(samples)
            device.set_current(agg, restore)
            entries[row, agg] = np.polyfit(drives, measured, 1)[0]
    device.reset()
    return CrosstalkMatrix(entries, victim_index=tuple(victims))


def run_crosstalk_benchmark(
    seed=0,
    trials: int = 500,
    crosstalk_sigma: float = constants.CROSSTALK_SIGMA_BENCHMARK,
    readout_noise: float = constants.CROSSTALK_READOUT_NOISE,
) -> dict:
    """Quadrature-point stability with and without crosstalk correction.

    A device with random thermal crosstalk and noisy readout is driven to
    quadrature on a monitored MZI while aggressor heaters take random
    drives; the measured transmission spread with the fitted correction
    applied must shrink substantially versus the naive drive.
    """
    rng = np.random.default_rng(seed)
    device = make_random_device(
        seed=rng, crosstalk_sigma=crosstalk_sigma, readout_noise=readout_noise
    )
    n = device.n
    L = device.mzi_count
    # heater tables are taken as known here (built from the same truth the
    # device holds); the benchmark isolates crosstalk measurement + correction
    internal = [
        PhaseShifterCal.from_power_curve(
            device.true_heater(h).v_coeffs, device.true_heater(h).p_pi,
            p0=device.true_heater(h).p0,
        )
        for h in range(L)
    ]
    external = [
        PhaseShifterCal.from_power_curve(
            device.true_heater(L + h).v_coeffs, device.true_heater(L + h).p_pi,
            p0=device.true_heater(L + h).p0,
        )
        for h in range(L)
    ]
    screen = [
        PhaseShifterCal.from_power_curve(
            device.true_heater(2 * L + j).v_coeffs, device.true_heater(2 * L + j).p_pi,
            p0=device.true_heater(2 * L + j).p0,
        )
        for j in range(n)
    ]
    calibration = MeshCalibration(n, tuple(internal), tuple(external), tuple(screen))
    # victims sit on the diagonal chains so stray leakage cannot reach the
    # monitor ports; aggressors are externals, whose phases never change a
    # power reading, so the routes stay valid under any aggressor drive
    victims = sorted(set(diagonal_chain(n)) | {diagonal_chain(n, anti=True)[0]})
    aggressors = list(range(L, L + 2 * n))
    matrix = measure_crosstalk_matrix(device, calibration, victims, aggressors)
    statics = calibration.static_vector()
    routes = {v: monitor_route(n, v) for v in victims}
    uncorrected = np.empty(trials)
    corrected = np.empty(trials)
    for t in range(trials):
        victim = victims[t % len(victims)]
        route = routes[victim]
        injection = np.zeros(n, dtype=complex)
        injection[route.input_port] = 1.0
        device.reset()
        commanded = statics.copy()
        for idx, state in route.settings:
            theta = {"bar": math.pi, "cross": 0.0}[state]
            amps = current_for_phase(calibration.internal[idx], theta)
            device.set_current(idx, amps)
            commanded[idx] = phase_from_current(calibration.internal[idx], amps)
        for agg in aggressors:
            drive = rng.uniform(0.0, TWO_PI)
            device.set_current(agg, current_for_drive(calibration.heater_cal(agg), drive))
            commanded[agg] = statics[agg] + drive
        vcal = calibration.internal[victim]
        norm = _route_norm(device, calibration, route, injection, repeats=3)

        t_meas = device.output_powers(injection)[route.measured_port] / norm
        uncorrected[t] = t_meas

        fixed = apply_crosstalk_correction(
            np.array([math.pi / 2.0]),
            matrix.entries[[victims.index(victim)], :],
            statics,
            aggressor_phases=commanded,
            victim_index=(victim,),
        )
        device.set_current(victim, current_for_phase(vcal, fixed[victim]))
        t_corr = device.output_powers(injection)[route.measured_port] / norm
        corrected[t] = t_corr
    device.reset()
    return {
        "uncorrected": uncorrected,
        "corrected": corrected,
        "uncorrected_std": float(uncorrected.std()),
        "corrected_std": float(corrected.std()),
        "uncorrected_mean": float(uncorrected.mean()),
        "corrected_mean": float(corrected.mean()),
        "matrix": matrix,
    }
