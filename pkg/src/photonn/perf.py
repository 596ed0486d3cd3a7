"""Performance models: op counts, latency, energy per op, throughput.

Three accounting styles coexist, matching how such systems are quoted:

* latency mode: one inference propagates through the as-built chip; energy
  is steady power times the end-to-end latency, divided by the op count.
* batched mode: inputs stream at the clock rate; energy per op divides the
  total power by clock times exact op count, including slow heater DACs.
* scaling model: the large-N projection used for architecture sweeps; same
  as batched but without the heater-DAC term, optionally re-adding receiver
  banks between layers ("intermediate readout").

``energy_per_op`` is the closed-form large-N approximation (op count taken
as 2 M N^2, one nonlinear unit per mode and layer); the batched and scaling
models use exact counts (2 M N^2 + 2 (M-1) N ops, (M-1) N nonlinear units).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import constants


def op_count(m_layers: int, n_modes: int) -> int:
    """Real multiply-accumulate ops per inference: each of the M unitaries
    contributes 2 N^2, each of the M-1 nonlinear layers 2 N."""
    m, n = int(m_layers), int(n_modes)
    if m < 1 or n < 1:
        raise ValueError("layer and mode counts must be positive")
    return 2 * m * n * n + 2 * (m - 1) * n


def latency(
    m_layers: int = constants.N_LAYERS,
    n_modes: int = constants.N_MODES,
    *,
    path_length_m: float | None = None,
    ring_passes: int | None = None,
) -> float:
    """End-to-end optical latency: group delay of the waveguide path plus
    one cavity lifetime per nonlinear layer traversed.

    With ``path_length_m`` given (the as-built value covers the full
    transmitter-to-receiver route), the geometry argument is used directly;
    otherwise the optimized-layout estimate M * N * device pitch applies.
    """
    if path_length_m is None:
        path_length_m = m_layers * n_modes * constants.DEVICE_LENGTH_M
    if ring_passes is None:
        ring_passes = m_layers - 1
    group_delay = path_length_m * constants.GROUP_INDEX / constants.C_LIGHT_M_S
    return group_delay + ring_passes * constants.CAVITY_LIFETIME_S


def as_built_latency() -> float:
    """Latency of the demo chip from its measured waveguide path."""
    return latency(path_length_m=constants.AS_BUILT_PATH_M, ring_passes=2)


@dataclass(frozen=True)
class SystemSpec:
    """One hardware operating point for the energy models."""

    label: str
    m_layers: int
    n_modes: int
    clock_hz: float
    ps_power_w: float
    nofu_power_w: float
    tx_power_w: float  # per input channel (drive DAC)
    icr_power_w: float  # per output channel (TIA + ADC)
    heater_dac_w: float = constants.HEATER_DAC_W
    intermediate_readout: bool = False

    def __post_init__(self):
        if self.m_layers < 1 or self.n_modes < 1:
            raise ValueError("layer and mode counts must be positive")
        if self.clock_hz <= 0:
            raise ValueError("clock must be positive")

    @property
    def ops(self) -> int:
        return op_count(self.m_layers, self.n_modes)


def as_built_spec() -> SystemSpec:
    return SystemSpec(
        label="as built, thermal, 1 GHz",
        m_layers=constants.N_LAYERS,
        n_modes=constants.N_MODES,
        clock_hz=constants.CLOCK_AS_BUILT_HZ,
        ps_power_w=constants.THERMAL_PS_W,
        nofu_power_w=constants.NOFU_INJECTION_W,
        tx_power_w=constants.DAC_1GHZ_W,
        icr_power_w=constants.TIA_1GHZ_W + constants.ADC_1GHZ_W,
    )


def _fast_spec(label, ps_power_w, m_layers, n_modes) -> SystemSpec:
    # at 50 GHz the nonlinear units run depletion mode: C V^2 per clock
    return SystemSpec(
        label=label,
        m_layers=m_layers,
        n_modes=n_modes,
        clock_hz=constants.CLOCK_FAST_HZ,
        ps_power_w=ps_power_w,
        nofu_power_w=constants.NOFU_DEPLETION_J_PER_CLOCK * constants.CLOCK_FAST_HZ,
        tx_power_w=constants.DAC_50GHZ_W,
        icr_power_w=constants.TIA_50GHZ_W + constants.ADC_50GHZ_W,
    )


def undercut_spec() -> SystemSpec:
    return _fast_spec(
        "undercut thermal, 50 GHz", constants.UNDERCUT_PS_W,
        constants.N_LAYERS, constants.N_MODES,
    )


def mems_spec(m_layers=constants.N_LAYERS, n_modes=constants.N_MODES) -> SystemSpec:
    return _fast_spec(
        f"MEMS, 50 GHz, N={n_modes}", constants.MEMS_PS_W, m_layers, n_modes
    )


def tops(spec: SystemSpec) -> float:
    """Sustained throughput in tera-ops/s at full pipelining."""
    m, n = spec.m_layers, spec.n_modes
    return 2.0 * spec.clock_hz * (m * n * n + (m - 1) * n) / 1e12


def energy_per_op_batched(spec: SystemSpec) -> dict:
    """Exact-count batched energy per op, split into the on-chip photonic
    part and the total including conversion electronics and heater DACs."""
    m, n = spec.m_layers, spec.n_modes
    ops_per_s = spec.clock_hz * spec.ops
    on_chip_w = m * n * n * spec.ps_power_w + (m - 1) * n * spec.nofu_power_w
    total_w = (
        on_chip_w
        + n * (spec.tx_power_w + spec.icr_power_w)
        + m * n * n * spec.heater_dac_w
    )
    if spec.intermediate_readout:
        total_w += (m - 1) * n * spec.icr_power_w
    return {
        "on_chip_j": on_chip_w / ops_per_s,
        "total_j": total_w / ops_per_s,
        "on_chip_w": on_chip_w,
        "total_w": total_w,
    }


def energy_per_op_latency_mode(
    latency_s: float | None = None,
    clock_hz: float = constants.CLOCK_AS_BUILT_HZ,
) -> dict:
    """As-built single-inference energy per op, with the component
    breakdown: phase shifters, nonlinear units, conversion electronics.

    The nominal published latency of the operating point is used unless a
    computed value is passed explicitly.
    """
    if latency_s is None:
        latency_s = constants.AS_BUILT_LATENCY_NOMINAL_S
    ops = op_count(constants.N_LAYERS, constants.N_MODES)
    ps_w = constants.PS_COUNT_AS_BUILT * constants.THERMAL_PS_W
    nofu_w = constants.NOFU_COUNT_AS_BUILT * constants.NOFU_INJECTION_W
    electronics_w = constants.SIGNAL_CHANNELS_AS_BUILT * (
        constants.DAC_1GHZ_W + constants.TIA_1GHZ_W + constants.ADC_1GHZ_W
    ) + constants.HEATER_DAC_COUNT_AS_BUILT * constants.HEATER_DAC_W
    scale = latency_s / ops
    out = {
        "phase_shifters_j": ps_w * scale,
        "nofu_j": nofu_w * scale,
        "electronics_j": electronics_w * scale,
        "latency_s": latency_s,
        "total_power_w": ps_w + nofu_w + electronics_w,
    }
    out["total_j"] = out["phase_shifters_j"] + out["nofu_j"] + out["electronics_j"]
    return out


def energy_per_op(
    m_layers: int,
    n_modes: int,
    clock_hz: float = constants.CLOCK_FAST_HZ,
    *,
    ps_power_w: float = constants.MEMS_PS_W,
    nofu_power_w: float = constants.NOFU_DEPLETION_J_PER_CLOCK * constants.CLOCK_FAST_HZ,
    tx_power_w: float = constants.DAC_50GHZ_W,
    icr_power_w: float = constants.TIA_50GHZ_W + constants.ADC_50GHZ_W,
) -> float:
    """Closed-form large-N energy per op:
    (P_PS + P_NOFU / N + (P_TX + P_ICR) / (M N)) / (2 f)."""
    m, n = int(m_layers), int(n_modes)
    if m < 1 or n < 1:
        raise ValueError("layer and mode counts must be positive")
    per_mac = (
        ps_power_w
        + nofu_power_w / n
        + (tx_power_w + icr_power_w) / (m * n)
    )
    return per_mac / (2.0 * clock_hz)


def scaling_energy(
    m_layers: int,
    n_modes: int,
    *,
    clock_hz: float = constants.CLOCK_FAST_HZ,
    ps_power_w: float = constants.MEMS_PS_W,
    nofu_power_w: float = constants.NOFU_DEPLETION_J_PER_CLOCK * constants.CLOCK_FAST_HZ,
    tx_power_w: float = constants.DAC_50GHZ_W,
    icr_power_w: float = constants.TIA_50GHZ_W + constants.ADC_50GHZ_W,
    intermediate_readout: bool = False,
) -> float:
    """Exact-count scaling-model energy per op (no heater-DAC term).

    ``intermediate_readout`` re-adds a receiver bank after each hidden
    layer, the regime where activations are digitized between meshes.
    """
    m, n = int(m_layers), int(n_modes)
    total_w = (
        m * n * n * ps_power_w
        + (m - 1) * n * nofu_power_w
        + n * (tx_power_w + icr_power_w)
    )
    if intermediate_readout:
        total_w += (m - 1) * n * icr_power_w
    return total_w / (clock_hz * op_count(m, n))


def scaling_threshold(
    m_layers: int,
    target_j: float,
    *,
    intermediate_readout: bool = False,
    n_max: int = 10_000,
    **kw,
) -> int:
    """Smallest mode count whose scaling-model energy per op is at or below
    ``target_j`` (the energy decreases monotonically with N)."""
    lo, hi = 2, n_max
    if scaling_energy(m_layers, hi, intermediate_readout=intermediate_readout, **kw) > target_j:
        raise ValueError(f"target {target_j!r} J not reached by N = {n_max}")
    while lo < hi:
        mid = (lo + hi) // 2
        if (
            scaling_energy(m_layers, mid, intermediate_readout=intermediate_readout, **kw)
            <= target_j
        ):
            hi = mid
        else:
            lo = mid + 1
    return lo


def throughput(
    batch: int,
    m_layers: int = constants.N_LAYERS,
    n_modes: int = constants.N_MODES,
    *,
    clock_hz: float = constants.CLOCK_AS_BUILT_HZ,
    latency_s: float | None = None,
) -> float:
    """Ops per second for a burst of ``batch`` pipelined inferences: the
    first result arrives after the latency, the rest at the clock rate."""
    if batch < 1:
        raise ValueError("batch must be at least 1")
    if latency_s is None:
        latency_s = latency(m_layers, n_modes)
    span = latency_s + (batch - 1) / clock_hz
    return op_count(m_layers, n_modes) * batch / span


def component_power_table() -> list[dict]:
    """Per-component electrical budget entries used by every preset."""
    rows = [
        ("drive DAC", "1 GHz", constants.DAC_1GHZ_W),
        ("drive DAC", "50 GHz", constants.DAC_50GHZ_W),
        ("receiver TIA", "1 GHz", constants.TIA_1GHZ_W),
        ("receiver TIA", "50 GHz", constants.TIA_50GHZ_W),
        ("ADC", "1 GHz", constants.ADC_1GHZ_W),
        ("ADC", "50 GHz", constants.ADC_50GHZ_W),
        ("thermal phase shifter", "static", constants.THERMAL_PS_W),
        ("undercut phase shifter", "static", constants.UNDERCUT_PS_W),
        ("MEMS phase shifter", "static", constants.MEMS_PS_W),
        ("heater DAC", "static", constants.HEATER_DAC_W),
        ("nonlinear unit, injection", "static", constants.NOFU_INJECTION_W),
    ]
    out = [
        {"component": name, "condition": cond, "power_w": watts}
        for name, cond, watts in rows
    ]
    out.append(
        {
            "component": "nonlinear unit, depletion",
            "condition": "per clock",
            "energy_j": constants.NOFU_DEPLETION_J_PER_CLOCK,
        }
    )
    return out


def performance_summary() -> list[dict]:
    """The six headline operating points: the as-built demo in latency mode
    and five batched projections at increasing integration levels."""
    rows = []
    demo = as_built_spec()
    lat = energy_per_op_latency_mode()
    rows.append(
        {
            "label": demo.label,
            "m": demo.m_layers,
            "n": demo.n_modes,
            "clock_hz": demo.clock_hz,
            "latency_s": lat["latency_s"],
            "tops": demo.ops / lat["latency_s"] / 1e12,
            "e_op_j": lat["phase_shifters_j"] + lat["nofu_j"],
            "e_total_j": lat["total_j"],
        }
    )
    for spec in (
        undercut_spec(),
        mems_spec(),
        mems_spec(n_modes=64),
        mems_spec(n_modes=128),
        mems_spec(n_modes=256),
    ):
        e = energy_per_op_batched(spec)
        rows.append(
            {
                "label": spec.label,
                "m": spec.m_layers,
                "n": spec.n_modes,
                "clock_hz": spec.clock_hz,
                "latency_s": None,
                "tops": tops(spec),
                "e_op_j": e["on_chip_j"],
                "e_total_j": e["total_j"],
            }
        )
    return rows
