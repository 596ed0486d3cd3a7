"""End-to-end inference and in-situ training of the simulated accelerator.

The trainable state is a flat vector of ``n_layers * n^2 + 2 n (n_layers - 1)``
real parameters (132 for the 6-mode, 3-layer system): 36 mesh phases per
layer plus a (beta, detuning) pair per activation unit. Every parameter is
stored on a 16-bit quantization grid, matching the drive electronics.

Training follows the hardware-in-the-loop recipe: perturb all parameters
simultaneously by a random Bernoulli displacement, estimate the directional
derivative of the loss from two batch evaluations, and step against it. One
more evaluation records the unperturbed loss, so each epoch batches the
training set exactly three times. A per-parameter finite-difference trainer
(2N batches per epoch) and an unconstrained digital reference model are
provided as comparators.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants
from .dataset import VowelDataset, train_test_split
from .errors import DegenerateReadout, SchemaError
from .hardware import (
    HardwareErrorModel,
    ReceiverState,
    benchmark_error_model,
    fields_from_quadratures,
    physical_mesh_matrix,
    receive,
    transmit,
)
from .mesh import (
    clements_decompose,
    haar_random_unitary,
    mesh_reconstruct,
    program_from_phases,
)
from .nofu import NofuParams, default_nofu_params, nofu_apply, static_phase_for_detuning

TWO_PI = 2.0 * math.pi

GRID_BITS = 16
GRID_LEVELS = 1 << GRID_BITS
PHASE_STEP = TWO_PI / GRID_LEVELS
BETA_STEP = 1.0 / GRID_LEVELS
DETUNE_STEP = constants.FSR_M / GRID_LEVELS

DEFAULT_LASER_POWER_W = 1e-3
READOUT_CLAMP = 1e-12

MODEL_PARAMS_SCHEMA = "model-params/1"
HISTORY_SCHEMA = "train-history/1"


# ---------------------------------------------------------------------------
# parameter layout and quantization
# ---------------------------------------------------------------------------


def model_param_count(n_modes: int = constants.N_MODES,
                      n_layers: int = constants.N_LAYERS) -> int:
    return n_layers * n_modes**2 + 2 * n_modes * (n_layers - 1)


@functools.lru_cache(maxsize=None)
def param_kinds(n_modes: int = constants.N_MODES,
                n_layers: int = constants.N_LAYERS) -> tuple[str, ...]:
    """Kind of each flat-vector entry: mesh 'phase', unit 'beta'/'detune'.

    Blocks alternate [mesh n^2][activations 2n] and end on a mesh; each
    activation block interleaves (beta, detune) per unit.
    """
    kinds = []
    for layer in range(n_layers):
        kinds.extend(["phase"] * n_modes**2)
        if layer < n_layers - 1:
            kinds.extend(["beta", "detune"] * n_modes)
    return tuple(kinds)


@functools.lru_cache(maxsize=None)
def param_scales(n_modes: int = constants.N_MODES,
                 n_layers: int = constants.N_LAYERS) -> np.ndarray:
    """Natural-unit span of each parameter relative to one phase radian.

    A perturbation of delta radians maps to delta * range / (2 pi) in each
    parameter's own units, so beta steps by delta / (2 pi) of its [0, 1]
    range and the detuning by the same fraction of one free spectral range.
    """
    span = {"phase": 1.0, "beta": 1.0 / TWO_PI, "detune": constants.FSR_M / TWO_PI}
    out = np.array([span[k] for k in param_kinds(n_modes, n_layers)])
    out.setflags(write=False)
    return out


def _canonical(values, kinds) -> np.ndarray:
    """Wrap phases and detunings onto their periodic ranges, clip beta."""
    out = np.array(values, dtype=float)
    kinds = np.asarray(kinds)
    p = kinds == "phase"
    out[p] = np.mod(out[p], TWO_PI)
    b = kinds == "beta"
    out[b] = np.clip(out[b], 0.0, 1.0)
    d = kinds == "detune"
    half = constants.FSR_M / 2.0
    out[d] = np.mod(out[d] + half, constants.FSR_M) - half
    return out


def _quantize(values, kinds, rng=None) -> np.ndarray:
    """Snap canonical values to the 16-bit drive grid.

    With ``rng`` the fractional part rounds stochastically (unbiased), so
    updates smaller than one grid step still make progress on average;
    without it, round to nearest.
    """
    out = np.array(values, dtype=float)
    kinds = np.asarray(kinds)
    steps = {"phase": PHASE_STEP, "beta": BETA_STEP, "detune": DETUNE_STEP}
    lows = {"phase": 0.0, "beta": 0.0, "detune": -constants.FSR_M / 2.0}
    for kind, step in steps.items():
        m = kinds == kind
        ticks = (out[m] - lows[kind]) / step
        if rng is None:
            k = np.round(ticks)
        else:
            whole = np.floor(ticks)
            k = whole + (rng.random(ticks.shape) < (ticks - whole))
        out[m] = lows[kind] + k * step
    return _canonical(out, kinds)


@dataclass(frozen=True)
class ModelParams:
    """Flat trainable parameter vector on the 16-bit drive grid."""

    values: np.ndarray
    n_modes: int = constants.N_MODES
    n_layers: int = constants.N_LAYERS

    def __post_init__(self):
        vec = np.asarray(self.values, dtype=float)
        expect = model_param_count(self.n_modes, self.n_layers)
        if vec.shape != (expect,):
            raise ValueError(f"expected {expect} parameters, got {vec.shape}")
        kinds = param_kinds(self.n_modes, self.n_layers)
        vec = _quantize(_canonical(vec, kinds), kinds)
        vec.setflags(write=False)
        object.__setattr__(self, "values", vec)

    def __len__(self) -> int:
        return self.values.size

    def _mesh_offset(self, layer: int) -> int:
        if not 0 <= layer < self.n_layers:
            raise IndexError(f"layer must lie in [0, {self.n_layers})")
        return layer * (self.n_modes**2 + 2 * self.n_modes)

    def mesh_phases(self, layer: int) -> np.ndarray:
        start = self._mesh_offset(layer)
        return self.values[start : start + self.n_modes**2]

    def nofu_values(self, layer: int) -> np.ndarray:
        """(beta, detune) pairs of the activation bank after mesh ``layer``."""
        if not 0 <= layer < self.n_layers - 1:
            raise IndexError(f"activation bank must lie in [0, {self.n_layers - 1})")
        start = self._mesh_offset(layer) + self.n_modes**2
        return self.values[start : start + 2 * self.n_modes]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": MODEL_PARAMS_SCHEMA,
                "n_modes": self.n_modes,
                "n_layers": self.n_layers,
                "values": [float(v) for v in self.values],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != MODEL_PARAMS_SCHEMA:
            raise SchemaError(f"expected schema {MODEL_PARAMS_SCHEMA!r}")
        return cls(
            values=np.array(doc["values"], dtype=float),
            n_modes=int(doc["n_modes"]),
            n_layers=int(doc["n_layers"]),
        )


def initial_params(
    seed=None,
    n_modes: int = constants.N_MODES,
    n_layers: int = constants.N_LAYERS,
    beta_range=(0.2, 0.4),
    detune_linewidths=(-1.5, -0.5),
) -> ModelParams:
    """Haar-random mesh phases; activation taps and detunings drawn uniform.

    The default detuning parks each ring red of resonance so that the
    photocurrent-induced blue shift sweeps it through resonance.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for layer in range(n_layers):
        program = clements_decompose(haar_random_unitary(n_modes, seed=rng))
        blocks.append(program.theta1_vector())
        blocks.append(program.theta2_vector())
        blocks.append(np.asarray(program.input_phases))
        if layer < n_layers - 1:
            pairs = np.empty(2 * n_modes)
            pairs[0::2] = rng.uniform(*beta_range, n_modes)
            pairs[1::2] = rng.uniform(*detune_linewidths, n_modes) * constants.LINEWIDTH_M
            blocks.append(pairs)
    return ModelParams(np.concatenate(blocks), n_modes, n_layers)


# ---------------------------------------------------------------------------
# system configuration and forward pass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    """Optical drive level, per-layer hardware errors, and readout."""

    laser_power_w: float = DEFAULT_LASER_POWER_W
    errors: tuple[HardwareErrorModel, ...] | None = None
    readout: str = "intensity"
    readout_noise: float = 0.0

    def __post_init__(self):
        if not self.laser_power_w > 0:
            raise ValueError("laser power must be positive")
        if self.readout not in ("intensity", "homodyne"):
            raise ValueError("readout must be 'intensity' or 'homodyne'")
        if self.readout_noise < 0:
            raise ValueError("readout noise must be non-negative")
        if self.errors is not None:
            object.__setattr__(self, "errors", tuple(self.errors))


def default_system(seed=0, splitter_sigma=None,
                   n_layers: int = constants.N_LAYERS) -> SystemConfig:
    """Benchmark error preset on every mesh layer."""
    errors = tuple(
        benchmark_error_model(seed=seed * n_layers + k, splitter_sigma=splitter_sigma)
        for k in range(n_layers)
    )
    return SystemConfig(errors=errors)


@functools.lru_cache(maxsize=1)
def _base_nofu() -> NofuParams:
    # carrier response tables are shared; only beta and the static detuning
    # phase vary per unit
    return default_nofu_params()


def _network(values, n_modes, n_layers, system: SystemConfig):
    """Materialize mesh matrices and activation banks from a flat vector."""
    kinds = param_kinds(n_modes, n_layers)
    vec = _canonical(values, kinds)
    if system.errors is not None and len(system.errors) != n_layers:
        raise ValueError("one error model per mesh layer required")
    L = n_modes * (n_modes - 1) // 2
    mesh_stride = n_modes**2 + 2 * n_modes
    base = _base_nofu()
    matrices, banks = [], []
    for layer in range(n_layers):
        start = layer * mesh_stride
        block = vec[start : start + n_modes**2]
        program = program_from_phases(
            n_modes, block[:L], block[L : 2 * L], block[2 * L :]
        )
        if system.errors is None:
            matrices.append(mesh_reconstruct(program))
        else:
            matrices.append(physical_mesh_matrix(program, system.errors[layer]))
        if layer < n_layers - 1:
            pairs = vec[start + n_modes**2 : start + mesh_stride]
            banks.append(
                tuple(
                    dataclasses.replace(
                        base,
                        beta=pairs[2 * k],
                        phi_static=static_phase_for_detuning(pairs[2 * k + 1]),
                    )
                    for k in range(n_modes)
                )
            )
    return matrices, banks


def _readout_intensities(fields, system: SystemConfig) -> np.ndarray:
    if system.readout == "homodyne":
        # reconstruct each field from two quadrature measurements, then
        # square; agrees with direct intensity detection and keeps the
        # receiver path exercised
        rx = ReceiverState(lo_amplitude=1.0)
        qi = receive(fields.ravel(order="F"), dataclasses.replace(
            rx, quad_phases=(0.0,) * fields.size)).quadrature
        qq = receive(fields.ravel(order="F"), dataclasses.replace(
            rx, quad_phases=(math.pi / 2.0,) * fields.size)).quadrature
        rebuilt = fields_from_quadratures(qi, qq, rx).reshape(
            fields.shape, order="F"
        )
        return np.abs(rebuilt) ** 2
    return np.abs(fields) ** 2


def _batch_probs(values, features, n_modes, n_layers, system: SystemConfig,
                 rng=None) -> np.ndarray:
    """Normalized output intensities for a feature batch, shape (B, n)."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != n_modes:
        raise ValueError(f"features must have {n_modes} columns")
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("encoded amplitudes must satisfy |x| <= 1")
    matrices, banks = _network(values, n_modes, n_layers, system)
    # the transmitter encodes any |x| <= 1 exactly, so the launched fields
    # are the features themselves at the configured optical power
    fields = x.T.astype(complex) * math.sqrt(system.laser_power_w)
    with warnings.catch_warnings():
        # drive saturation (table-edge clamp) is expected under perturbation
        warnings.filterwarnings("ignore", message="photocurrent beyond")
        for layer in range(n_layers):
            fields = matrices[layer] @ fields
            if layer < n_layers - 1:
                for k in range(n_modes):
                    fields[k] = nofu_apply(fields[k], banks[layer][k])
    intensities = _readout_intensities(fields, system).T
    if rng is not None and system.readout_noise > 0:
        intensities = intensities * (
            1.0 + system.readout_noise * rng.standard_normal(intensities.shape)
        )
        intensities = np.clip(intensities, 0.0, None)
    totals = intensities.sum(axis=1)
    if np.any(totals <= 0):
        raise DegenerateReadout("total readout power vanished; cannot normalize")
    return intensities / totals[:, None]


def forward(x, theta, system: SystemConfig | None = None, rng=None) -> np.ndarray:
    """One inference: encode, propagate through meshes and activations,
    read out intensities, and normalize them to a quasi-probability vector."""
    system = system or SystemConfig()
    if isinstance(theta, ModelParams):
        values, n, layers = theta.values, theta.n_modes, theta.n_layers
    else:
        values = np.asarray(theta, dtype=float)
        n, layers = constants.N_MODES, constants.N_LAYERS
    x = np.asarray(x, dtype=float).ravel()
    # route the single-sample path through the transmitter model proper
    launched = transmit(x) * math.sqrt(system.laser_power_w)
    matrices, banks = _network(values, n, layers, system)
    fields = launched
    for layer in range(layers):
        fields = matrices[layer] @ fields
        if layer < layers - 1:
            fields = np.array(
                [nofu_apply(fields[k], banks[layer][k]) for k in range(n)]
            )
    intensities = _readout_intensities(fields[:, None], system).ravel()
    if rng is not None and system.readout_noise > 0:
        intensities = np.clip(
            intensities
            * (1.0 + system.readout_noise * rng.standard_normal(intensities.shape)),
            0.0,
            None,
        )
    total = intensities.sum()
    if total <= 0:
        raise DegenerateReadout("total readout power vanished; cannot normalize")
    return intensities / total


# ---------------------------------------------------------------------------
# loss and evaluation
# ---------------------------------------------------------------------------


def _one_hot(labels, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 2:
        if y.shape[1] != n_classes:
            raise ValueError(f"one-hot labels must have {n_classes} columns")
        return np.asarray(y, dtype=float)
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y.astype(int)] = 1.0
    return out


def _cross_entropy(probs, onehot) -> float:
    clamped = np.clip(probs, READOUT_CLAMP, None)
    return float(-np.mean(np.sum(onehot * np.log(clamped), axis=1)))


def loss(batch, theta, system: SystemConfig | None = None) -> float:
    """Mean categorical cross-entropy of a (features, labels) batch."""
    system = system or SystemConfig()
    features, labels = batch
    if isinstance(theta, ModelParams):
        values, n, layers = theta.values, theta.n_modes, theta.n_layers
    else:
        values = np.asarray(theta, dtype=float)
        n, layers = constants.N_MODES, constants.N_LAYERS
    probs = _batch_probs(values, features, n, layers, system)
    return _cross_entropy(probs, _one_hot(labels, n))


def evaluate(split: VowelDataset, theta,
             system: SystemConfig | None = None):
    """Accuracy and the (true, predicted) confusion matrix of one split."""
    system = system or SystemConfig()
    if isinstance(theta, ModelParams):
        values, n, layers = theta.values, theta.n_modes, theta.n_layers
    else:
        values = np.asarray(theta, dtype=float)
        n, layers = constants.N_MODES, constants.N_LAYERS
    probs = _batch_probs(values, split.features, n, layers, system)
    predicted = np.argmax(probs, axis=1)
    confusion = np.zeros((n, n), dtype=int)
    for t, p in zip(split.labels, predicted):
        confusion[t, p] += 1
    accuracy = float(np.trace(confusion)) / max(len(split), 1)
    return accuracy, confusion


class _Evaluator:
    """Counts batch passes and keeps the accuracy of the latest pass."""

    def __init__(self, features, labels, n_modes, n_layers,
                 system: SystemConfig, mode: str, rng=None):
        self.features = np.asarray(features, dtype=float)
        self.onehot = _one_hot(labels, n_modes)
        self.truth = np.argmax(self.onehot, axis=1)
        self.n_modes = n_modes
        self.n_layers = n_layers
        self.system = system
        self.mode = mode
        self.rng = rng
        self.passes = 0
        self.last_accuracy = math.nan

    def __call__(self, values) -> float:
        probs = _batch_probs(
            values, self.features, self.n_modes, self.n_layers, self.system,
            rng=self.rng,
        )
        self.passes += 1
        self.last_accuracy = float(
            np.mean(np.argmax(probs, axis=1) == self.truth)
        )
        mean_nll = _cross_entropy(probs, self.onehot)
        # 'sum' is the hardware update signal: the batch total, not the mean
        return mean_nll * len(self.features) if self.mode == "sum" else mean_nll


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; the defaults follow the as-built system."""

    learning_rate: float = 0.002
    perturbation: float = 0.05
    epochs: int = 6000
    seed: int = 0
    readout: str = "intensity"
    loss: str = "sum"
    system: SystemConfig | None = None

    def __post_init__(self):
        # zero is allowed: it freezes the parameters while still measuring
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if not self.perturbation > 0:
            raise ValueError("perturbation must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.readout not in ("intensity", "homodyne"):
            raise ValueError("readout must be 'intensity' or 'homodyne'")
        if self.loss not in ("sum", "mean"):
            raise ValueError("loss must be 'sum' or 'mean'")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float


@dataclass(frozen=True)
class TrainState:
    """Final parameters, per-epoch history, and the batch-pass counter."""

    params: ModelParams
    history: tuple[EpochRecord, ...]
    passes: int

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))


def spsa_step(theta, batch, config: TrainConfig, rng, *, loss_fn=None):
    """One simultaneous-perturbation update.

    Exactly three loss evaluations: the two perturbed points that form the
    directional derivative, then the unperturbed point (last, so a stateful
    evaluator is left holding the current operating point). Returns the
    updated parameters, the unperturbed loss, and the directional derivative.

    ``theta`` may be a :class:`ModelParams` (perturbations are rescaled per
    parameter kind and the update lands back on the 16-bit grid through
    unbiased stochastic rounding) or a plain vector (unit scales, no
    quantization), in which case ``loss_fn`` maps vectors to loss values.
    """
    if isinstance(theta, ModelParams):
        vec = theta.values
        scales = param_scales(theta.n_modes, theta.n_layers)
        kinds = param_kinds(theta.n_modes, theta.n_layers)
    else:
        vec = np.asarray(theta, dtype=float)
        scales = np.ones(vec.size)
        kinds = None
    if loss_fn is None:
        if batch is None:
            raise ValueError("provide a batch or a loss_fn")
        features, labels = batch
        system = config.system or SystemConfig()
        if system.readout != config.readout:
            system = dataclasses.replace(system, readout=config.readout)
        base = theta if isinstance(theta, ModelParams) else None
        n = base.n_modes if base else constants.N_MODES
        layers = base.n_layers if base else constants.N_LAYERS
        loss_fn = _Evaluator(features, labels, n, layers, system, config.loss)

    signs = rng.integers(0, 2, vec.size) * 2.0 - 1.0
    delta = config.perturbation * scales * signs
    # the derivative normalizes by the perturbation norm in natural units,
    # delta * sqrt(N) for a Bernoulli displacement
    norm = config.perturbation * math.sqrt(vec.size)
    loss_plus = loss_fn(vec + delta)
    loss_minus = loss_fn(vec - delta)
    loss_center = loss_fn(vec)
    deriv = (loss_plus - loss_minus) / (2.0 * norm)
    raw = vec - config.learning_rate * deriv * delta
    if isinstance(theta, ModelParams):
        snapped = _quantize(_canonical(raw, kinds), kinds, rng=rng)
        updated = ModelParams(snapped, theta.n_modes, theta.n_layers)
    else:
        updated = raw
    return updated, loss_center, deriv


def _resolve_splits(dataset, config: TrainConfig):
    if isinstance(dataset, VowelDataset):
        return train_test_split(dataset, seed=config.seed)
    train_split, test_split = dataset
    return train_split, test_split


def train(dataset, config: TrainConfig | None = None) -> TrainState:
    """In-situ training: one simultaneous-perturbation step per epoch.

    ``dataset`` is either a full :class:`VowelDataset` (split by seed) or a
    (train, test) pair. Each epoch batches the training set exactly three
    times; accuracy on the training set comes from the unperturbed pass.

    The constant-rate perturbation update keeps wandering near a minimum,
    so the returned parameters are the best checkpoint by training accuracy
    (ties broken by the lower training loss; no extra passes, since the
    unperturbed pass measures both every epoch). The history covers every
    epoch as executed.
    """
    config = config or TrainConfig()
    train_split, test_split = _resolve_splits(dataset, config)
    system = config.system or SystemConfig()
    if system.readout != config.readout:
        system = dataclasses.replace(system, readout=config.readout)
    init_rng, step_rng, noise_rng = np.random.default_rng(config.seed).spawn(3)
    params = initial_params(init_rng)
    evaluator = _Evaluator(
        train_split.features, train_split.labels, params.n_modes,
        params.n_layers, system, config.loss,
        rng=noise_rng if system.readout_noise > 0 else None,
    )
    history = []
    best = (-1.0, math.inf, params)
    for epoch in range(config.epochs):
        updated, center_loss, _ = spsa_step(
            params, None, config, step_rng, loss_fn=evaluator
        )
        if (-evaluator.last_accuracy, center_loss) < (-best[0], best[1]):
            best = (evaluator.last_accuracy, center_loss, params)
        test_acc, _ = evaluate(test_split, params, system)
        mean_loss = center_loss / (
            len(train_split) if config.loss == "sum" else 1.0
        )
        history.append(
            EpochRecord(epoch, mean_loss, evaluator.last_accuracy, test_acc)
        )
        params = updated
    return TrainState(best[2], tuple(history), evaluator.passes)


def _central_difference_gradient(loss_fn, vec, steps):
    """Two-sided per-parameter differences: 2N evaluations of ``loss_fn``.

    Returns the gradient estimate and the mean of the first coordinate's
    pair of losses (a free O(step^2) stand-in for the center loss).
    """
    vec = np.asarray(vec, dtype=float)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), vec.shape)
    grad = np.zeros(vec.size)
    first_pair = math.nan
    for i in range(vec.size):
        probe = vec.copy()
        probe[i] = vec[i] + steps[i]
        loss_plus = loss_fn(probe)
        probe[i] = vec[i] - steps[i]
        loss_minus = loss_fn(probe)
        grad[i] = (loss_plus - loss_minus) / (2.0 * steps[i])
        if i == 0:
            first_pair = 0.5 * (loss_plus + loss_minus)
    return grad, first_pair


def forward_difference_train(dataset, config: TrainConfig | None = None) -> TrainState:
    """Per-parameter two-sided finite differences: 2N batches per epoch.

    A cost comparator for the simultaneous-perturbation trainer; the
    recorded loss and training accuracy come from perturbed passes (off the
    operating point by one coordinate step) to keep the count at exactly 2N.
    """
    config = config or TrainConfig()
    train_split, test_split = _resolve_splits(dataset, config)
    system = config.system or SystemConfig()
    if system.readout != config.readout:
        system = dataclasses.replace(system, readout=config.readout)
    init_rng, step_rng, noise_rng = np.random.default_rng(config.seed).spawn(3)
    params = initial_params(init_rng)
    scales = param_scales(params.n_modes, params.n_layers)
    kinds = param_kinds(params.n_modes, params.n_layers)
    evaluator = _Evaluator(
        train_split.features, train_split.labels, params.n_modes,
        params.n_layers, system, config.loss,
        rng=noise_rng if system.readout_noise > 0 else None,
    )
    history = []
    for epoch in range(config.epochs):
        vec = params.values
        grad, first_pair = _central_difference_gradient(
            evaluator, vec, config.perturbation * scales
        )
        raw = vec - config.learning_rate * grad * scales**2
        test_acc, _ = evaluate(test_split, params, system)
        mean_loss = first_pair / (
            len(train_split) if config.loss == "sum" else 1.0
        )
        history.append(
            EpochRecord(epoch, mean_loss, evaluator.last_accuracy, test_acc)
        )
        params = ModelParams(
            _quantize(_canonical(raw, kinds), kinds, rng=step_rng),
            params.n_modes, params.n_layers,
        )
    return TrainState(params, tuple(history), evaluator.passes)


# ---------------------------------------------------------------------------
# digital reference model
# ---------------------------------------------------------------------------


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def digital_reference_train(dataset, config: TrainConfig | None = None,
                            activation: str = "tanh"):
    """Unconstrained reference: three bias-free 6x6 layers, softmax readout.

    Same neuron budget as the photonic system (108 weights), trained with
    full-batch Adam on categorical cross-entropy. Returns the per-epoch
    history; ``activation`` selects 'tanh' or 'relu' hidden units.
    """
    if activation not in ("tanh", "relu"):
        raise ValueError("activation must be 'tanh' or 'relu'")
    config = config or TrainConfig()
    train_split, test_split = _resolve_splits(dataset, config)
    n = train_split.features.shape[1]
    x_train = train_split.features
    y_train = _one_hot(train_split.labels, n)
    x_test = test_split.features
    rng = np.random.default_rng(config.seed)
    weights = [rng.normal(0.0, math.sqrt(1.0 / n), (n, n)) for _ in range(3)]

    def act(z):
        return np.tanh(z) if activation == "tanh" else np.maximum(z, 0.0)

    def act_grad(z, h):
        return 1.0 - h**2 if activation == "tanh" else (z > 0).astype(float)

    # Adam state
    lr, b1, b2, eps = 0.02, 0.9, 0.999, 1e-8
    m = [np.zeros_like(w) for w in weights]
    v = [np.zeros_like(w) for w in weights]
    history = []
    batch = x_train.shape[0]
    for epoch in range(config.epochs):
        z1 = x_train @ weights[0].T
        h1 = act(z1)
        z2 = h1 @ weights[1].T
        h2 = act(z2)
        z3 = h2 @ weights[2].T
        probs = _softmax(z3)
        train_loss = _cross_entropy(probs, y_train)
        train_acc = float(np.mean(np.argmax(probs, axis=1) == train_split.labels))

        d3 = (probs - y_train) / batch
        g3 = d3.T @ h2
        d2 = (d3 @ weights[2]) * act_grad(z2, h2)
        g2 = d2.T @ h1
        d1 = (d2 @ weights[1]) * act_grad(z1, h1)
        g1 = d1.T @ x_train
        t = epoch + 1
        for w, g, mi, vi in zip(weights, (g1, g2, g3), m, v):
            mi += (1 - b1) * (g - mi)
            vi += (1 - b2) * (g**2 - vi)
            w -= lr * (mi / (1 - b1**t)) / (np.sqrt(vi / (1 - b2**t)) + eps)

        th1 = act(x_test @ weights[0].T)
        th2 = act(th1 @ weights[1].T)
        tp = _softmax(th2 @ weights[2].T)
        test_acc = float(np.mean(np.argmax(tp, axis=1) == test_split.labels))
        history.append(EpochRecord(epoch, train_loss, train_acc, test_acc))
    return history


# ---------------------------------------------------------------------------
# history persistence
# ---------------------------------------------------------------------------

HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "test_acc")


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {HISTORY_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for rec in history:
            writer.writerow(
                [rec.epoch, repr(float(rec.train_loss)),
                 repr(float(rec.train_acc)), repr(float(rec.test_acc))]
            )


def read_history_csv(path):
    out = []
    with open(path, newline="") as fh:
        rows = (r for r in csv.reader(fh) if r and not r[0].startswith("#"))
        header = next(rows)
        if tuple(header) != HISTORY_HEADER:
            raise ValueError(f"unexpected history header: {header}")
        for row in rows:
            out.append(
                EpochRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3]))
            )
    return out
