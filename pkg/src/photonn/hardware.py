"""Physical simulation of transmitter, meshes, and receiver.

Models the real-device departures from the ideal mesh: directional couplers
with angle errors, per-MZI insertion loss, static heater phases, polynomial
current-to-voltage and current-to-phase responses, and linear thermal
crosstalk between heaters.

Heater bookkeeping for one mesh concatenates [internal x L, external x L,
screen x N] in canonical layout order, L = N(N-1)/2. Crosstalk acts on
phases: actual = static + M (commanded - static), where "commanded" is the
absolute phase a calibrated driver is asked to realize. With M = I the
statics cancel and commanded phases are realized exactly; statics matter in
the current-driven interface (they are each heater's zero-current phase) and
whenever M != I.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import constants
from .errors import PhaseRangeError, SchemaError
from .mesh import MeshProgram, MziPhases, clements_layout

HARDWARE_ERROR_SCHEMA = "hardware-error-model/1"
PHASE_SHIFTER_CAL_SCHEMA = "phase-shifter-cal/1"

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# phase shifter calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseShifterCal:
    """Polynomial model of one thermo-optic phase shifter.

    ``v_coeffs`` (a1..a4) gives V(I) = a1 I + a2 I^2 + a3 I^3 + a4 I^4;
    ``phase_coeffs`` (p0..p4) gives theta(I) = p0 + p1 I + ... + p4 I^4.
    ``p_pi`` is the dissipated electrical power per pi of phase.
    ``amp_offset``/``amp_modulation`` (A, B) set the transmission fringe
    T_cross = A + B cos(pi P/p_pi + p0), T_bar = A - B cos(...).
    """

    v_coeffs: tuple[float, float, float, float]
    phase_coeffs: tuple[float, float, float, float, float]
    p_pi: float
    amp_offset: float = 0.5
    amp_modulation: float = 0.5
    max_current: float = constants.HEATER_MAX_CURRENT_A

    def __post_init__(self):
        object.__setattr__(self, "v_coeffs", tuple(float(a) for a in self.v_coeffs))
        object.__setattr__(
            self, "phase_coeffs", tuple(float(p) for p in self.phase_coeffs)
        )
        if len(self.v_coeffs) != 4:
            raise ValueError("v_coeffs must be (a1, a2, a3, a4)")
        if len(self.phase_coeffs) != 5:
            raise ValueError("phase_coeffs must be (p0, p1, p2, p3, p4)")
        if not self.p_pi > 0:
            raise ValueError("p_pi must be positive")
        a, b = self.amp_offset, self.amp_modulation
        if not b > 0:
            raise ValueError("amp_modulation must be positive")
        if a - b < -1e-12 or a + b > 1 + 1e-12:
            raise ValueError("transmission fringe must stay within [0, 1]")
        if not self.max_current > 0:
            raise ValueError("max_current must be positive")

    @property
    def extinction_ratio(self) -> float:
        """(A+B)/(A-B); infinite when the fringe reaches zero."""
        lo = self.amp_offset - self.amp_modulation
        if lo <= 1e-15:
            return math.inf
        return (self.amp_offset + self.amp_modulation) / lo

    @classmethod
    def from_linear(cls, resistance=None, p_pi=None, p0=0.0, **kw):
        """Ohmic heater: V = R I, phase = p0 + pi R I^2 / p_pi (exact)."""
        r = constants.HEATER_RESISTANCE_OHM if resistance is None else resistance
        pp = constants.P_PI_W if p_pi is None else p_pi
        return cls(
            v_coeffs=(r, 0.0, 0.0, 0.0),
            phase_coeffs=(p0, 0.0, math.pi * r / pp, 0.0, 0.0),
            p_pi=pp,
            **kw,
        )

    @classmethod
    def from_power_curve(cls, v_coeffs, p_pi, p0=0.0, max_current=None, **kw):
        """Build phase_coeffs as a quartic least-squares fit of
        p0 + pi I V(I) / p_pi over [0, max_current].

        Exact for linear V; for higher-order V the dissipated power is a
        quintic in I and the quartic is the customary approximation.
        """
        mc = constants.HEATER_MAX_CURRENT_A if max_current is None else max_current
        grid = np.linspace(0.0, mc, 201)
        volts = _poly_no_constant(v_coeffs, grid)
        target = p0 + math.pi * grid * volts / p_pi
        # fit in the scaled variable I / mc to keep the Vandermonde well
        # conditioned, then unscale the coefficients
        scaled = np.polynomial.polynomial.polyfit(grid / mc, target, 4)
        coeffs = [c / mc**k for k, c in enumerate(scaled)]
        return cls(
            v_coeffs=tuple(v_coeffs),
            phase_coeffs=tuple(coeffs),
            p_pi=p_pi,
            max_current=mc,
            **kw,
        )

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": PHASE_SHIFTER_CAL_SCHEMA,
                "v_coeffs": list(self.v_coeffs),
                "phase_coeffs": list(self.phase_coeffs),
                "p_pi": self.p_pi,
                "amp_offset": self.amp_offset,
                "amp_modulation": self.amp_modulation,
                "max_current": self.max_current,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PhaseShifterCal":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != PHASE_SHIFTER_CAL_SCHEMA:
            raise SchemaError(f"expected schema {PHASE_SHIFTER_CAL_SCHEMA!r}")
        return cls(
            v_coeffs=tuple(doc["v_coeffs"]),
            phase_coeffs=tuple(doc["phase_coeffs"]),
            p_pi=doc["p_pi"],
            amp_offset=doc["amp_offset"],
            amp_modulation=doc["amp_modulation"],
            max_current=doc["max_current"],
        )


def _poly_no_constant(coeffs, current):
    """Evaluate c1 I + c2 I^2 + ... (no constant term)."""
    acc = np.zeros_like(np.asarray(current, dtype=float))
    for c in reversed(coeffs):
        acc = (acc + c) * current
    return acc


def heater_voltage(cal: PhaseShifterCal, current) -> float:
    """Heater I-V curve V(I); rejects negative drive current."""
    arr = np.asarray(current, dtype=float)
    if np.any(arr < 0):
        raise ValueError("drive current must be non-negative")
    out = _poly_no_constant(cal.v_coeffs, arr)
    return float(out) if np.isscalar(current) or arr.ndim == 0 else out


def dissipated_power(cal: PhaseShifterCal, current):
    """Electrical power I * V(I) dropped in the heater."""
    arr = np.asarray(current, dtype=float)
    out = arr * _poly_no_constant(cal.v_coeffs, arr)
    return float(out) if np.isscalar(current) or arr.ndim == 0 else out


def transmission_curve(cal: PhaseShifterCal, current, port: str):
    """Fringe transmission at ``port`` ("cross" or "bar") vs drive current."""
    if port not in ("bar", "cross"):
        raise ValueError(f"port must be 'bar' or 'cross', got {port!r}")
    arr = np.asarray(current, dtype=float)
    if np.any(arr < 0):
        raise ValueError("drive current must be non-negative")
    p = arr * _poly_no_constant(cal.v_coeffs, arr)
    fringe = np.cos(math.pi * p / cal.p_pi + cal.phase_coeffs[0])
    sign = 1.0 if port == "cross" else -1.0
    out = cal.amp_offset + sign * cal.amp_modulation * fringe
    return float(out) if np.isscalar(current) or arr.ndim == 0 else out


def phase_from_current(cal: PhaseShifterCal, current):
    """Programmed internal phase theta(I) from the polynomial model."""
    arr = np.asarray(current, dtype=float)
    if np.any(arr < 0):
        raise ValueError("drive current must be non-negative")
    p0, *rest = cal.phase_coeffs
    out = p0 + _poly_no_constant(rest, arr)
    return float(out) if np.isscalar(current) or arr.ndim == 0 else out


def current_for_phase(cal: PhaseShifterCal, target) -> float:
    """Drive current realizing ``target`` phase (mod 2 pi), by bracketed
    root finding on the monotone phase polynomial."""
    lo = phase_from_current(cal, 0.0)
    hi = phase_from_current(cal, cal.max_current)
    if hi < lo:
        raise ValueError("phase polynomial must be non-decreasing in current")
    target_eff = lo + (float(target) - lo) % TWO_PI
    if target_eff > hi + 1e-12:
        raise PhaseRangeError(target_eff, lo, hi)
    target_eff = min(target_eff, hi)
    if target_eff <= lo:
        return 0.0
    current = brentq(
        lambda i: phase_from_current(cal, i) - target_eff,
        0.0,
        cal.max_current,
        xtol=1e-15,
        rtol=8.9e-16,
    )
    return float(current)


# ---------------------------------------------------------------------------
# error model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Linear phase coupling: row = victim heater, column = aggressor.

    For a full mesh the matrix is square over all heaters. A transmitter
    measurement yields a rectangular slice (observable victims x all
    aggressors); ``victim_index`` maps each row to its heater column, and the
    victim-aligned diagonal is 1.
    """

    entries: np.ndarray
    victim_index: tuple[int, ...] | None = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        n_v, n_h = entries.shape
        vidx = self.victim_index
        if vidx is None:
            if n_v != n_h:
                raise ValueError("victim_index required for rectangular matrices")
            vidx = tuple(range(n_v))
        vidx = tuple(int(i) for i in vidx)
        if len(vidx) != n_v:
            raise ValueError("one victim_index entry per row required")
        object.__setattr__(self, "victim_index", vidx)
        diag = entries[np.arange(n_v), list(vidx)]
        if not np.allclose(diag, 1.0, atol=1e-9):
            raise ValueError("victim-aligned diagonal must be 1")

    @property
    def square(self) -> bool:
        e = self.entries
        return e.shape[0] == e.shape[1] and self.victim_index == tuple(
            range(e.shape[0])
        )


def _as_crosstalk_array(m):
    return m.entries if isinstance(m, CrosstalkMatrix) else np.asarray(m, dtype=float)


def apply_crosstalk_correction(desired, m, static0, *, aggressor_phases=None,
                               victim_index=None):
    """Commanded phases that realize ``desired`` after crosstalk.

    Inverts actual = static + M (commanded - static). Square M: returns the
    full commanded vector. Rectangular M (victims x heaters): ``desired``
    holds victim targets, ``aggressor_phases`` the commanded values of all
    heaters (victim entries ignored), and the victim block is solved after
    subtracting the known aggressor contribution; returns the full commanded
    vector with victim entries replaced.
    """
    mat = _as_crosstalk_array(m)
    if isinstance(m, CrosstalkMatrix) and victim_index is None:
        victim_index = m.victim_index
    static0 = np.asarray(static0, dtype=float)
    desired = np.asarray(desired, dtype=float)
    n_v, n_h = mat.shape
    if n_v == n_h and (victim_index is None or tuple(victim_index) == tuple(range(n_h))):
        if static0.shape != (n_h,) or desired.shape != (n_h,):
            raise ValueError("desired and static0 must have one entry per heater")
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > 1e8:
            raise ValueError(
                f"crosstalk matrix is singular or ill-conditioned (cond={cond:.3g})"
            )
        return static0 + np.linalg.solve(mat, desired - static0)

    if victim_index is None:
        raise ValueError("victim_index required for rectangular correction")
    vidx = np.asarray(victim_index, dtype=int)
    if aggressor_phases is None:
        raise ValueError("aggressor_phases required for rectangular correction")
    full = np.array(aggressor_phases, dtype=float)
    if full.shape != (n_h,) or static0.shape != (n_h,) or desired.shape != (len(vidx),):
        raise ValueError("inconsistent shapes for rectangular correction")
    others = np.setdiff1d(np.arange(n_h), vidx)
    m_vv = mat[:, vidx]
    m_va = mat[:, others]
    cond = np.linalg.cond(m_vv)
    if not np.isfinite(cond) or cond > 1e8:
        raise ValueError(
            f"victim block is singular or ill-conditioned (cond={cond:.3g})"
        )
    rhs = (desired - static0[vidx]) - m_va @ (full[others] - static0[others])
    full[vidx] = static0[vidx] + np.linalg.solve(m_vv, rhs)
    return full


@dataclass(frozen=True)
class HardwareErrorModel:
    """Splitter errors, losses, static phases, and crosstalk of one mesh."""

    n: int
    splitter_dev: np.ndarray  # (L, 2) radians added to the pi/4 coupler angle
    loss_db: np.ndarray  # (L,) insertion loss per MZI
    static_internal: np.ndarray  # (L,)
    static_external: np.ndarray  # (L,)
    static_screen: np.ndarray  # (n,)
    crosstalk: np.ndarray | None = None  # (H, H), H = 2L + n

    def __post_init__(self):
        L = self.n * (self.n - 1) // 2
        arrays = {
            "splitter_dev": (np.array(self.splitter_dev, dtype=float), (L, 2)),
            "loss_db": (np.array(self.loss_db, dtype=float), (L,)),
            "static_internal": (np.array(self.static_internal, dtype=float), (L,)),
            "static_external": (np.array(self.static_external, dtype=float), (L,)),
            "static_screen": (np.array(self.static_screen, dtype=float), (self.n,)),
        }
        for name, (arr, shape) in arrays.items():
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.loss_db < 0):
            raise ValueError("losses must be non-negative")
        if np.any(np.abs(self.splitter_dev) >= math.pi / 4):
            raise ValueError("splitter deviations must satisfy |dev| < pi/4")
        if self.crosstalk is not None:
            xt = np.array(self.crosstalk, dtype=float)
            h = self.heater_count
            if xt.shape != (h, h):
                raise ValueError(f"crosstalk must be {h}x{h}, got {xt.shape}")
            if not np.allclose(np.diagonal(xt), 1.0, atol=1e-9):
                raise ValueError("crosstalk diagonal must be 1")
            object.__setattr__(self, "crosstalk", xt)

    @property
    def mzi_count(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def heater_count(self) -> int:
        return 2 * self.mzi_count + self.n

    @property
    def static_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.static_internal, self.static_external, self.static_screen]
        )

    @classmethod
    def zero(cls, n: int) -> "HardwareErrorModel":
        L = n * (n - 1) // 2
        return cls(
            n=n,
            splitter_dev=np.zeros((L, 2)),
            loss_db=np.zeros(L),
            static_internal=np.zeros(L),
            static_external=np.zeros(L),
            static_screen=np.zeros(n),
        )

    @classmethod
    def random(
        cls,
        n: int,
        seed=None,
        splitter_sigma: float = 0.0,
        loss_db_mean: float = 0.0,
        loss_db_std: float = 0.0,
        static_spread: float = TWO_PI,
        crosstalk_sigma: float | None = None,
    ) -> "HardwareErrorModel":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        L = n * (n - 1) // 2
        h = 2 * L + n
        xt = None
        if crosstalk_sigma is not None:
            xt = np.eye(h) + crosstalk_sigma * (
                rng.standard_normal((h, h)) * (1 - np.eye(h))
            )
        return cls(
            n=n,
            splitter_dev=np.clip(
                rng.normal(0.0, splitter_sigma, (L, 2)) if splitter_sigma else np.zeros((L, 2)),
                -math.pi / 4 + 1e-9,
                math.pi / 4 - 1e-9,
            ),
            loss_db=np.clip(rng.normal(loss_db_mean, loss_db_std, L), 0.0, None)
            if (loss_db_mean or loss_db_std)
            else np.zeros(L),
            static_internal=rng.uniform(0.0, static_spread, L),
            static_external=rng.uniform(0.0, static_spread, L),
            static_screen=rng.uniform(0.0, static_spread, n),
            crosstalk=xt,
        )

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": HARDWARE_ERROR_SCHEMA,
                "n": self.n,
                "splitter_dev": self.splitter_dev.tolist(),
                "loss_db": self.loss_db.tolist(),
                "static_internal": self.static_internal.tolist(),
                "static_external": self.static_external.tolist(),
                "static_screen": self.static_screen.tolist(),
                "crosstalk": None if self.crosstalk is None else self.crosstalk.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "HardwareErrorModel":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != HARDWARE_ERROR_SCHEMA:
            raise SchemaError(f"expected schema {HARDWARE_ERROR_SCHEMA!r}")
        return cls(
            n=doc["n"],
            splitter_dev=np.array(doc["splitter_dev"]),
            loss_db=np.array(doc["loss_db"]),
            static_internal=np.array(doc["static_internal"]),
            static_external=np.array(doc["static_external"]),
            static_screen=np.array(doc["static_screen"]),
            crosstalk=None if doc["crosstalk"] is None else np.array(doc["crosstalk"]),
        )


def benchmark_error_model(seed=None, splitter_sigma=None) -> HardwareErrorModel:
    """Default error preset: splitter spread tuned so direct programming of
    Haar matrices lands near fidelity 0.90, plus nominal per-MZI loss and
    random statics (inert at the commanded-phase interface)."""
    sigma = constants.SPLITTER_SIGMA_BENCHMARK if splitter_sigma is None else splitter_sigma
    return HardwareErrorModel.random(
        constants.N_MODES,
        seed=seed,
        splitter_sigma=sigma,
        loss_db_mean=constants.LOSS_DB_PER_MZI_MEAN,
        loss_db_std=constants.LOSS_DB_PER_MZI_STD,
    )


# ---------------------------------------------------------------------------
# mesh simulation with errors
# ---------------------------------------------------------------------------


def program_phase_vector(program: MeshProgram) -> np.ndarray:
    """Commanded heater phases [internal, external, screen] for a program."""
    return np.concatenate(
        [
            program.theta1_vector(),
            program.theta2_vector(),
            np.asarray(program.input_phases, dtype=float),
        ]
    )


def apply_crosstalk(errors: HardwareErrorModel, commanded: np.ndarray) -> np.ndarray:
    """Actual heater phases: static + M (commanded - static)."""
    commanded = np.asarray(commanded, dtype=float)
    if commanded.shape != (errors.heater_count,):
        raise ValueError(
            f"expected {errors.heater_count} commanded phases, got {commanded.shape}"
        )
    if errors.crosstalk is None:
        return commanded.copy()
    s = errors.static_vector
    return s + errors.crosstalk @ (commanded - s)


def coupler(angle: float) -> np.ndarray:
    """Directional coupler with field coupling angle ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def physical_mzi(theta1, theta2, dev1=0.0, dev2=0.0, loss_db=0.0) -> np.ndarray:
    """2x2 transfer of one imperfect MZI: coupler, internal phase, coupler,
    external phase on the top output, then a scalar loss amplitude."""
    amp = 10.0 ** (-loss_db / 20.0)
    u = coupler(math.pi / 4 + dev2) @ np.diag([np.exp(1j * theta1), 1.0]) @ coupler(
        math.pi / 4 + dev1
    )
    u = np.diag([np.exp(1j * theta2), 1.0]) @ u
    return amp * u


def physical_mesh_from_commanded(errors: HardwareErrorModel,
                                 commanded: np.ndarray) -> np.ndarray:
    """Transfer matrix for an unwrapped commanded heater-phase vector.

    Commanded phases are absolute: with crosstalk present, a 2 pi shift of
    one heater is a different electrical state and leaks onto its neighbors,
    so no wrapping is applied here.
    """
    actual = apply_crosstalk(errors, commanded)
    L = errors.mzi_count
    theta1 = actual[:L]
    theta2 = actual[L : 2 * L]
    screen = actual[2 * L :]
    u = np.diag(np.exp(1j * screen)).astype(complex)
    for i, (_, m) in enumerate(clements_layout(errors.n)):
        block = physical_mzi(
            theta1[i],
            theta2[i],
            errors.splitter_dev[i, 0],
            errors.splitter_dev[i, 1],
            errors.loss_db[i],
        )
        u[m : m + 2, :] = block @ u[m : m + 2, :]
    return u


def physical_mesh_matrix(program: MeshProgram, errors: HardwareErrorModel) -> np.ndarray:
    """N x N transfer matrix of the erroneous mesh (generally non-unitary)."""
    n = program.n
    if errors.n != n:
        raise ValueError(f"error model is for n={errors.n}, program has n={n}")
    u = physical_mesh_from_commanded(errors, program_phase_vector(program))
    if program.global_phase != 0.0:
        u = np.exp(1j * program.global_phase) * u
    return u


def simulate_physical_mesh(program: MeshProgram, errors: HardwareErrorModel,
                           input_fields) -> np.ndarray:
    """Output fields of the erroneous mesh for a column (or stack) of inputs."""
    fields = np.asarray(input_fields, dtype=complex)
    if fields.shape[0] != program.n:
        raise ValueError(
            f"input fields must have {program.n} rows, got shape {fields.shape}"
        )
    return physical_mesh_matrix(program, errors) @ fields


# ---------------------------------------------------------------------------
# transmitter / receiver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransmitterState:
    """Per-channel MZI phases of the amplitude-and-phase encoder.

    Each channel is one MZI fed on its top port; the signal leaves the bar
    (same) port with amplitude sin(theta1/2), the cross port feeds a monitor
    photodiode with power cos^2(theta1/2), and theta2 sets the output phase.
    """

    channels: tuple[MziPhases, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))


def transmitter_program(x) -> TransmitterState:
    """Channel settings encoding the (possibly signed/complex) vector x."""
    x = np.asarray(x, dtype=complex).ravel()
    mag = np.abs(x)
    if np.any(mag > 1 + 1e-12):
        raise ValueError("encoded amplitudes must satisfy |x| <= 1")
    channels = []
    for a, phi in zip(np.clip(mag, 0.0, 1.0), np.angle(x)):
        theta1 = 2.0 * math.asin(a)
        # cancel the i e^{i theta1/2} bar-path factor so the field is exactly
        # a e^{i phi}
        theta2 = phi - math.pi / 2.0 - theta1 / 2.0
        channels.append(MziPhases(theta1, theta2))
    return TransmitterState(tuple(channels))


def transmit(x=None, tx: TransmitterState | None = None) -> np.ndarray:
    """Fields produced by the transmitter; from ``x`` directly (ideal
    settings) or from explicit channel settings ``tx``."""
    if tx is None:
        if x is None:
            raise ValueError("provide x or tx")
        tx = transmitter_program(x)
    out = np.empty(len(tx.channels), dtype=complex)
    for i, ph in enumerate(tx.channels):
        out[i] = (
            1j
            * np.exp(1j * (ph.theta1 / 2.0 + ph.theta2))
            * math.sin(ph.theta1 / 2.0)
        )
    return out


def transmitter_monitor_powers(tx: TransmitterState) -> np.ndarray:
    """Cross-port monitor photodiode powers of each transmitter channel."""
    return np.array([math.cos(ph.theta1 / 2.0) ** 2 for ph in tx.channels])


@dataclass(frozen=True)
class ReceiverState:
    """Common local oscillator plus per-channel quadrature phases."""

    lo_amplitude: float
    lo_phase: float = 0.0
    quad_phases: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.lo_amplitude > 0:
            raise ValueError("local oscillator power must be positive")
        object.__setattr__(
            self, "quad_phases", tuple(float(q) for q in self.quad_phases)
        )


@dataclass(frozen=True)
class Readout:
    intensity: np.ndarray
    quadrature: np.ndarray


def receive(fields, rx: ReceiverState) -> Readout:
    """Per-channel intensity |b|^2 and homodyne quadrature
    2 |E_LO| Re(b e^{-i(lo_phase + quad_phase)})."""
    b = np.asarray(fields, dtype=complex).ravel()
    quad = np.asarray(rx.quad_phases, dtype=float)
    if quad.size == 0:
        quad = np.zeros(b.size)
    if quad.size != b.size:
        raise ValueError("one quadrature phase per channel required")
    lo = rx.lo_amplitude
    q = 2.0 * lo * np.real(b * np.exp(-1j * (rx.lo_phase + quad)))
    return Readout(intensity=np.abs(b) ** 2, quadrature=q)


def fields_from_quadratures(q_inphase, q_quadrature, rx: ReceiverState) -> np.ndarray:
    """Invert two quadrature readings (quad phases 0 and pi/2) to fields."""
    qi = np.asarray(q_inphase, dtype=float)
    qq = np.asarray(q_quadrature, dtype=float)
    return (qi + 1j * qq) * np.exp(1j * rx.lo_phase) / (2.0 * rx.lo_amplitude)
