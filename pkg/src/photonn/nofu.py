"""Nonlinear optical function unit: tap, photodiode, and microring.

A fraction beta of the incident power is tapped onto a photodiode whose
photocurrent drives carrier injection into an all-pass microring; the
remaining light passes through the ring and picks up the power-dependent
transmission t = (r - a e^{i phi}) / (1 - r a e^{i phi}). Injected carriers
both blue-shift the resonance (delta-phi < 0) and add absorption (a drops
toward the self-coupling r, deepening the resonance dip to critical
coupling). The activation shape is set electro-optically by beta and by the
static detuning of the laser from resonance.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import SchemaError

NOFU_PARAMS_SCHEMA = "nofu-params/1"


def photon_lifetime(quality_factor=None, wavelength=None) -> float:
    """Cavity photon lifetime Q lambda / (2 pi c)."""
    q = constants.QUALITY_FACTOR if quality_factor is None else quality_factor
    lam = constants.WAVELENGTH_M if wavelength is None else wavelength
    if not q > 0:
        raise ValueError("quality factor must be positive")
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    return q * lam / (2.0 * math.pi * constants.C_LIGHT_M_S)


def ring_transfer(phi, a, r):
    """All-pass ring amplitude transmission (r - a e^{i phi})/(1 - r a e^{i phi}).

    ``phi`` is the round-trip phase detuning, ``a`` the round-trip amplitude,
    ``r`` the coupler self-coupling. Passive for a <= 1: |t| <= 1, with
    critical coupling (t = 0 on resonance) at a = r.
    """
    a_arr = np.asarray(a, dtype=float)
    r_f = float(r)
    if not 0.0 <= r_f < 1.0:
        raise ValueError("self-coupling r must lie in [0, 1)")
    if np.any(a_arr <= 0.0) or np.any(a_arr > 1.0):
        raise ValueError("round-trip amplitude a must lie in (0, 1]")
    if np.any(r_f * a_arr >= 1.0 - 1e-12):
        raise ValueError("r * a must stay below 1 (transfer pole)")
    z = a_arr * np.exp(1j * np.asarray(phi, dtype=float))
    t = (r_f - z) / (1.0 - r_f * z)
    if np.isscalar(phi) and np.isscalar(a):
        return complex(t)
    return t


@dataclass(frozen=True)
class NofuParams:
    """Electro-optic configuration and carrier response of one unit.

    ``beta`` is the tapped power fraction, ``phi_static`` the zero-current
    detuning phase, ``r`` the ring self-coupling. The carrier response is
    tabulated: ``table_current`` (A, increasing from 0) against the induced
    phase shift and round-trip amplitude; lookups interpolate linearly and
    clamp at the table edges.
    """

    beta: float
    phi_static: float
    r: float
    table_current: tuple[float, ...]
    table_delta_phi: tuple[float, ...]
    table_loss: tuple[float, ...]
    responsivity: float = constants.NOFU_RESPONSIVITY_A_W

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 <= self.r < 1.0:
            raise ValueError("self-coupling r must lie in [0, 1)")
        cur = np.asarray(self.table_current, dtype=float)
        dphi = np.asarray(self.table_delta_phi, dtype=float)
        loss = np.asarray(self.table_loss, dtype=float)
        if not (cur.size == dphi.size == loss.size) or cur.size < 2:
            raise ValueError("response tables must share a length of at least 2")
        if cur[0] != 0.0 or np.any(np.diff(cur) <= 0):
            raise ValueError("table_current must increase from 0")
        if np.any(loss <= 0.0) or np.any(loss > 1.0):
            raise ValueError("round-trip amplitudes must lie in (0, 1]")
        if np.any(self.r * loss >= 1.0 - 1e-12):
            raise ValueError("r * a must stay below 1 over the whole table")
        if not self.responsivity > 0:
            raise ValueError("responsivity must be positive")
        object.__setattr__(self, "table_current", tuple(float(x) for x in cur))
        object.__setattr__(self, "table_delta_phi", tuple(float(x) for x in dphi))
        object.__setattr__(self, "table_loss", tuple(float(x) for x in loss))

    @property
    def max_current(self) -> float:
        return self.table_current[-1]

    def delta_phi_at(self, current):
        return np.interp(current, self.table_current, self.table_delta_phi)

    def loss_at(self, current):
        return np.interp(current, self.table_current, self.table_loss)

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": NOFU_PARAMS_SCHEMA,
                "beta": self.beta,
                "phi_static": self.phi_static,
                "r": self.r,
                "table_current": list(self.table_current),
                "table_delta_phi": list(self.table_delta_phi),
                "table_loss": list(self.table_loss),
                "responsivity": self.responsivity,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "NofuParams":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != NOFU_PARAMS_SCHEMA:
            raise SchemaError(f"expected schema {NOFU_PARAMS_SCHEMA!r}")
        return cls(
            beta=doc["beta"],
            phi_static=doc["phi_static"],
            r=doc["r"],
            table_current=tuple(doc["table_current"]),
            table_delta_phi=tuple(doc["table_delta_phi"]),
            table_loss=tuple(doc["table_loss"]),
            responsivity=doc["responsivity"],
        )


def static_phase_for_detuning(delta_lambda_m: float) -> float:
    """Round-trip phase offset for a laser detuned by delta-lambda from
    resonance: one free spectral range spans 2 pi of round-trip phase."""
    return -2.0 * math.pi * delta_lambda_m / constants.FSR_M


def default_nofu_params(
    beta: float = 0.1,
    delta_lambda_m: float = 0.0,
    r: float = 0.885,
    a0: float = 0.985,
    n_samples: int = 64,
) -> NofuParams:
    """Carrier response anchored to the device constants: one linewidth of
    blue shift per 75 uA, and absorption reaching critical coupling
    (a = r) at 150 uA, both linear in current and tabulated."""
    i_max = 4.0 * constants.LINEWIDTH_CURRENT_A
    cur = np.linspace(0.0, i_max, n_samples)
    dphi = -constants.LINEWIDTH_PHASE_RAD * cur / constants.LINEWIDTH_CURRENT_A
    a = a0 - (a0 - r) * cur / (2.0 * constants.LINEWIDTH_CURRENT_A)
    a = np.clip(a, 0.5, a0)
    return NofuParams(
        beta=beta,
        phi_static=static_phase_for_detuning(delta_lambda_m),
        r=r,
        table_current=tuple(cur),
        table_delta_phi=tuple(dphi),
        table_loss=tuple(a),
    )


def nofu_photocurrent(params: NofuParams, fields):
    """Photodiode current drawn from the tapped fraction of each field."""
    power = params.beta * np.abs(np.asarray(fields, dtype=complex)) ** 2
    return params.responsivity * power


def nofu_apply(fields, params: NofuParams):
    """Elementwise activation: tap, carrier response, ring transmission.

    Photocurrents beyond the tabulated response clamp to the table edge with
    a warning (the physical drive saturates).
    """
    b = np.asarray(fields, dtype=complex)
    i_p = nofu_photocurrent(params, b)
    if np.any(i_p > params.max_current * (1 + 1e-12)):
        warnings.warn(
            "photocurrent beyond tabulated carrier response; clamping",
            stacklevel=2,
        )
    phi = params.phi_static + params.delta_phi_at(i_p)
    a = params.loss_at(i_p)
    t = ring_transfer(phi, a, params.r)
    out = math.sqrt(1.0 - params.beta) * b * t
    if np.isscalar(fields):
        return complex(out)
    return out


def nofu_power(mode: str, clock_hz: float = constants.CLOCK_AS_BUILT_HZ) -> dict:
    """Electrical cost of one unit: steady power, energy per clock, and
    energy per nonlinear op (two ops per clock, multiply and accumulate).

    "injection" is the forward-biased carrier-injection drive at the
    one-linewidth operating point; "depletion" is the reverse-biased
    depletion variant whose cost is capacitive, C V^2 per clock.
    """
    if clock_hz <= 0:
        raise ValueError("clock must be positive")
    if mode == "injection":
        power = constants.NOFU_BIAS_V * constants.LINEWIDTH_CURRENT_A
        per_clock = power / clock_hz
    elif mode == "depletion":
        per_clock = (
            constants.NOFU_DEPLETION_CAP_F * constants.NOFU_DEPLETION_DRIVE_V**2
        )
        power = per_clock * clock_hz
    else:
        raise ValueError(f"mode must be 'injection' or 'depletion', got {mode!r}")
    return {
        "power_w": power,
        "energy_per_clock_j": per_clock,
        "energy_per_nlop_j": per_clock / 2.0,
    }


@dataclass(frozen=True)
class ActivationCurve:
    """Sampled optical transfer of one unit at a fixed configuration."""

    input_amplitude: np.ndarray
    output_field: np.ndarray

    @property
    def input_power(self) -> np.ndarray:
        return self.input_amplitude**2

    @property
    def output_power(self) -> np.ndarray:
        return np.abs(self.output_field) ** 2

    def rows(self):
        """(input_power, output_power, output_phase) row iterator."""
        for x, y in zip(self.input_amplitude, self.output_field):
            yield float(x**2), float(abs(y) ** 2), float(np.angle(y))


def sample_activation(params: NofuParams, max_power_w: float,
                      n: int = 256) -> ActivationCurve:
    """Transfer curve over input powers [0, max_power_w]."""
    if max_power_w <= 0:
        raise ValueError("max_power_w must be positive")
    amp = np.sqrt(np.linspace(0.0, max_power_w, n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = nofu_apply(amp.astype(complex), params)
    return ActivationCurve(input_amplitude=amp, output_field=out)
