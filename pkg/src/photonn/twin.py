"""Digital twin: fit splitter and loss errors from intensity data, then
pre-compensate programs against the fitted model.

The twin reproduces the physical mesh as a chain of factors (input phase
screen, then one embedded 2x2 block per MZI in canonical order). Fitting
minimizes the mean squared error between measured and predicted output
powers over a set of probe programs and input vectors, with analytic
gradients propagated through the factor chain: for any scalar objective
with dJ = Re Tr(A dM), the contribution of factor c is
Re Tr[(Pre_{c-1} A Suf_{c+1}) dF_c], where Pre/Suf are the partial products
on either side. Compensation reuses the same machinery to maximize the
fidelity of the twin-predicted matrix to a target unitary over all 36 mesh
phases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import constants
from .errors import ConvergenceError, SchemaError
from .hardware import HardwareErrorModel, physical_mesh_matrix
from .mesh import (
    MeshProgram,
    clements_decompose,
    clements_layout,
    haar_random_unitary,
    normalized_fidelity,
    program_from_phases,
)

TWIN_MODEL_SCHEMA = "twin-model/1"

_LN10_OVER_20 = math.log(10.0) / 20.0


@dataclass(frozen=True)
class TwinModel:
    """Fitted splitter deviations (L, 2) and per-MZI losses (L,) in dB."""

    n: int
    splitter_dev: np.ndarray
    loss_db: np.ndarray

    def __post_init__(self):
        L = self.n * (self.n - 1) // 2
        dev = np.array(self.splitter_dev, dtype=float)
        loss = np.array(self.loss_db, dtype=float)
        if dev.shape != (L, 2) or loss.shape != (L,):
            raise ValueError(f"expected ({L}, 2) deviations and ({L},) losses")
        object.__setattr__(self, "splitter_dev", dev)
        object.__setattr__(self, "loss_db", loss)

    @property
    def mzi_count(self) -> int:
        return self.n * (self.n - 1) // 2

    def params_vector(self) -> np.ndarray:
        return np.concatenate([self.splitter_dev.ravel(), self.loss_db])

    @classmethod
    def from_vector(cls, n: int, vec) -> "TwinModel":
        L = n * (n - 1) // 2
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3 * L,):
            raise ValueError(f"expected {3 * L} twin parameters")
        return cls(n, vec[: 2 * L].reshape(L, 2), vec[2 * L :])

    def to_error_model(self) -> HardwareErrorModel:
        L = self.mzi_count
        return HardwareErrorModel(
            n=self.n,
            splitter_dev=self.splitter_dev,
            loss_db=np.clip(self.loss_db, 0.0, None),
            static_internal=np.zeros(L),
            static_external=np.zeros(L),
            static_screen=np.zeros(self.n),
        )

    def predict(self, program: MeshProgram) -> np.ndarray:
        """Twin-predicted transfer matrix for a commanded program."""
        return physical_mesh_matrix(program, self.to_error_model())

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": TWIN_MODEL_SCHEMA,
                "n": self.n,
                "splitter_dev": self.splitter_dev.tolist(),
                "loss_db": self.loss_db.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TwinModel":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != TWIN_MODEL_SCHEMA:
            raise SchemaError(f"expected schema {TWIN_MODEL_SCHEMA!r}")
        return cls(
            n=doc["n"],
            splitter_dev=np.array(doc["splitter_dev"]),
            loss_db=np.array(doc["loss_db"]),
        )


@dataclass(frozen=True)
class TwinFitDataset:
    """Probe programs with their input fields and measured output powers."""

    programs: tuple[MeshProgram, ...]
    inputs: tuple[np.ndarray, ...]  # (n, k) complex per program
    powers: tuple[np.ndarray, ...]  # (n, k) float per program

    def __post_init__(self):
        programs = tuple(self.programs)
        inputs = tuple(np.asarray(x, dtype=complex) for x in self.inputs)
        powers = tuple(np.asarray(p, dtype=float) for p in self.powers)
        if not (len(programs) == len(inputs) == len(powers)) or not programs:
            raise ValueError("need matching, non-empty program/input/power lists")
        for prog, x, p in zip(programs, inputs, powers):
            if x.shape != p.shape or x.shape[0] != prog.n:
                raise ValueError("inputs and powers must be (n, k) per program")
        object.__setattr__(self, "programs", programs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "powers", powers)

    @property
    def sample_count(self) -> int:
        return sum(p.size for p in self.powers)


def collect_dataset(
    errors: HardwareErrorModel,
    n_programs: int = 60,
    n_inputs: int = 20,
    seed=0,
    noise: float = 0.0,
) -> TwinFitDataset:
    """Probe the (simulated) hardware with random programs and inputs.

    ``noise`` adds multiplicative Gaussian readout error to the measured
    powers, as a fraction of each value.
    """
    rng = np.random.default_rng(seed)
    n = errors.n
    programs, inputs, powers = [], [], []
    for _ in range(n_programs):
        prog = clements_decompose(haar_random_unitary(n, rng))
        x = (rng.standard_normal((n, n_inputs)) + 1j * rng.standard_normal((n, n_inputs))) / math.sqrt(2 * n)
        p = np.abs(physical_mesh_matrix(prog, errors) @ x) ** 2
        if noise:
            p = np.clip(p * (1.0 + noise * rng.standard_normal(p.shape)), 0.0, None)
        programs.append(prog)
        inputs.append(x)
        powers.append(p)
    return TwinFitDataset(tuple(programs), tuple(inputs), tuple(powers))


# ---------------------------------------------------------------------------
# factor chain with analytic gradients
# ---------------------------------------------------------------------------


def _coupler_pair(angle):
    c, s = math.cos(angle), math.sin(angle)
    dc = np.array([[c, 1j * s], [1j * s, c]])
    ddc = np.array([[-s, 1j * c], [1j * c, -s]])
    return dc, ddc


def _program_arrays(program: MeshProgram):
    theta1 = program.theta1_vector()
    theta2 = program.theta2_vector()
    screen = np.asarray(program.input_phases, dtype=float)
    modes = np.array([p.top_mode for p in program.mzis])
    return theta1, theta2, screen, modes


def _chain(n, theta1, theta2, screen, modes, dev, loss_db):
    """All factor matrices [screen, block_1, ..., block_L] embedded n x n,
    plus the pieces needed for per-factor derivatives."""
    factors = [np.diag(np.exp(1j * screen))]
    pieces = []
    for i, m in enumerate(modes):
        dc1, ddc1 = _coupler_pair(math.pi / 4 + dev[i, 0])
        dc2, ddc2 = _coupler_pair(math.pi / 4 + dev[i, 1])
        p1 = np.diag([np.exp(1j * theta1[i]), 1.0])
        p2 = np.diag([np.exp(1j * theta2[i]), 1.0])
        amp = 10.0 ** (-loss_db[i] / 20.0)
        block = amp * (p2 @ dc2 @ p1 @ dc1)
        f = np.eye(n, dtype=complex)
        f[m : m + 2, m : m + 2] = block
        factors.append(f)
        pieces.append((dc1, ddc1, dc2, ddc2, p1, p2, amp, block))
    return factors, pieces


def _prefix_suffix(factors):
    n = factors[0].shape[0]
    count = len(factors)
    pre = [None] * (count + 1)  # pre[c] = F_{c-1} ... F_0, pre[0] = I
    suf = [None] * (count + 1)  # suf[c] = F_{C} ... F_c, suf[count] = I
    pre[0] = np.eye(n, dtype=complex)
    for c in range(count):
        pre[c + 1] = factors[c] @ pre[c]
    suf[count] = np.eye(n, dtype=complex)
    for c in range(count - 1, -1, -1):
        suf[c] = suf[c + 1] @ factors[c]
    return pre, suf


def _factor_cotangents(a, pre, suf, modes):
    """K_c = Pre_{c-1} A Suf_{c+1} for each factor; returns the screen
    cotangent and the per-MZI 2x2 sub-blocks."""
    count = len(pre) - 1
    k_screen = pre[0] @ a @ suf[1]
    k_blocks = []
    for i, m in enumerate(modes):
        c = i + 1
        k = pre[c] @ a @ suf[c + 1]
        k_blocks.append(k[m : m + 2, m : m + 2])
    return k_screen, k_blocks


def _error_param_grads(k_blocks, pieces):
    """Re Tr(K dblock) for the twin error parameters of every MZI."""
    L = len(pieces)
    g_dev = np.empty((L, 2))
    g_loss = np.empty(L)
    for i, (dc1, ddc1, dc2, ddc2, p1, p2, amp, block) in enumerate(pieces):
        k = k_blocks[i]
        d_d1 = amp * (p2 @ dc2 @ p1 @ ddc1)
        d_d2 = amp * (p2 @ ddc2 @ p1 @ dc1)
        g_dev[i, 0] = np.trace(k @ d_d1).real
        g_dev[i, 1] = np.trace(k @ d_d2).real
        g_loss[i] = -_LN10_OVER_20 * np.trace(k @ block).real
    return g_dev, g_loss


def _phase_param_grads(k_screen, k_blocks, pieces, screen):
    """Re Tr(K dblock) for all commanded phases (theta1, theta2, screen)."""
    L = len(pieces)
    g_t1 = np.empty(L)
    g_t2 = np.empty(L)
    for i, (dc1, ddc1, dc2, ddc2, p1, p2, amp, block) in enumerate(pieces):
        k = k_blocks[i]
        dp1 = np.diag([1j * p1[0, 0], 0.0])
        dp2 = np.diag([1j * p2[0, 0], 0.0])
        g_t1[i] = np.trace(k @ (amp * (p2 @ dc2 @ dp1 @ dc1))).real
        g_t2[i] = np.trace(k @ (amp * (dp2 @ dc2 @ p1 @ dc1))).real
    g_screen = (np.diagonal(k_screen) * 1j * np.exp(1j * screen)).real
    return g_t1, g_t2, g_screen


# ---------------------------------------------------------------------------
# twin fitting
# ---------------------------------------------------------------------------


def twin_loss_and_grad(vec, n, cached_programs, dataset: TwinFitDataset):
    """Dataset MSE and its gradient in the twin parameter vector."""
    L = n * (n - 1) // 2
    dev = vec[: 2 * L].reshape(L, 2)
    loss_db = vec[2 * L :]
    count = dataset.sample_count
    total = 0.0
    g_dev = np.zeros((L, 2))
    g_loss = np.zeros(L)
    for arrays, x, target in zip(cached_programs, dataset.inputs, dataset.powers):
        theta1, theta2, screen, modes = arrays
        factors, pieces = _chain(n, theta1, theta2, screen, modes, dev, loss_db)
        pre, suf = _prefix_suffix(factors)
        m_mat = pre[-1]
        o = m_mat @ x
        r = np.abs(o) ** 2 - target
        total += float(np.sum(r * r))
        w = (4.0 / count) * r * np.conj(o)
        a = x @ w.T
        _, k_blocks = _factor_cotangents(a, pre, suf, modes)
        dg_dev, dg_loss = _error_param_grads(k_blocks, pieces)
        g_dev += dg_dev
        g_loss += dg_loss
    return total / count, np.concatenate([g_dev.ravel(), g_loss])


def fit_twin(
    dataset: TwinFitDataset,
    n: int | None = None,
    init: TwinModel | None = None,
    maxiter: int = 400,
    dev_bound: float = 0.75,
    loss_bound_db: float = 3.0,
) -> tuple[TwinModel, dict]:
    """Fit splitter deviations and losses to measured powers.

    Returns the fitted twin and an info dict (final loss, iterations).
    Raises ConvergenceError if the optimizer aborts abnormally.
    """
    if n is None:
        n = dataset.programs[0].n
    L = n * (n - 1) // 2
    if init is None:
        x0 = np.concatenate(
            [np.zeros(2 * L), np.full(L, constants.LOSS_DB_PER_MZI_MEAN)]
        )
    else:
        x0 = init.params_vector()
    cached = [_program_arrays(p) for p in dataset.programs]
    bounds = [(-dev_bound, dev_bound)] * (2 * L) + [(0.0, loss_bound_db)] * L
    result = minimize(
        twin_loss_and_grad,
        x0,
        args=(n, cached, dataset),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": maxiter, "ftol": 1e-16, "gtol": 1e-14},
    )
    if result.status == 2:
        raise ConvergenceError(f"twin fit aborted: {result.message}")
    twin = TwinModel.from_vector(n, result.x)
    info = {"mse": float(result.fun), "iterations": int(result.nit)}
    return twin, info


def matrix_overlap(a, b) -> float:
    """|Tr(a^dagger b)| / (||a|| ||b||): 1 iff the matrices agree up to a
    complex scale, loss included."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("overlap of a zero matrix is undefined")
    return float(abs(np.trace(a.conj().T @ b)) / (na * nb))


def twin_heldout_fidelity(
    twin: TwinModel, errors: HardwareErrorModel, n_programs: int = 20, seed=0
) -> float:
    """Mean overlap between twin-predicted and true transfer matrices over
    fresh random programs."""
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_programs):
        prog = clements_decompose(haar_random_unitary(errors.n, rng))
        vals.append(
            matrix_overlap(twin.predict(prog), physical_mesh_matrix(prog, errors))
        )
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# program correction
# ---------------------------------------------------------------------------


def program_fidelity_and_grad(twin: TwinModel, target, vec):
    """Twin-predicted fidelity to a target unitary for a commanded phase
    vector [theta1 x L, theta2 x L, screen x n], with its gradient."""
    target = np.asarray(target, dtype=complex)
    n = twin.n
    L = twin.mzi_count
    modes = np.array([m for _, m in clements_layout(n)])
    t1 = vec[:L]
    t2 = vec[L : 2 * L]
    sc = vec[2 * L :]
    factors, pieces = _chain(n, t1, t2, sc, modes, twin.splitter_dev, twin.loss_db)
    pre, suf = _prefix_suffix(factors)
    m_mat = pre[-1]
    t_dag = target.conj().T
    sqrt_n = math.sqrt(n)
    z = np.trace(t_dag @ m_mat)
    h = np.linalg.norm(m_mat)
    fid = abs(z) / (sqrt_n * h)
    # dfid = Re Tr(B dM)
    b = (np.conj(z) / (abs(z) * sqrt_n * h)) * t_dag - (
        abs(z) / (sqrt_n * h**3)
    ) * m_mat.conj().T
    k_screen, k_blocks = _factor_cotangents(b, pre, suf, modes)
    g_t1, g_t2, g_screen = _phase_param_grads(k_screen, k_blocks, pieces, sc)
    return fid, np.concatenate([g_t1, g_t2, g_screen])


def corrected_program(
    twin: TwinModel,
    target: np.ndarray,
    init: MeshProgram | None = None,
    maxiter: int = 120,
) -> MeshProgram:
    """Commanded phases maximizing the twin-predicted fidelity to a target
    unitary, starting from the ideal decomposition."""
    target = np.asarray(target, dtype=complex)
    n = twin.n
    if target.shape != (n, n):
        raise ValueError(f"target must be {n}x{n}")
    if init is None:
        init = clements_decompose(target)
    theta1, theta2, screen, _ = _program_arrays(init)
    L = twin.mzi_count
    x0 = np.concatenate([theta1, theta2, screen])

    def objective(vec):
        fid, grad = program_fidelity_and_grad(twin, target, vec)
        return -fid, -grad

    result = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12},
    )
    vec = result.x
    return program_from_phases(
        n,
        np.mod(vec[:L], 2 * math.pi),
        np.mod(vec[L : 2 * L], 2 * math.pi),
        np.mod(vec[2 * L :], 2 * math.pi),
    )


# ---------------------------------------------------------------------------
# fidelity benchmark
# ---------------------------------------------------------------------------


def run_fidelity_benchmark(
    seed=0,
    n_targets: int = 500,
    n_programs: int = 60,
    n_inputs: int = 20,
    noise: float = 0.0,
    errors: HardwareErrorModel | None = None,
) -> dict:
    """Program random unitaries directly and through twin correction on the
    same simulated hardware; report both fidelity populations."""
    from .hardware import benchmark_error_model

    if errors is None:
        errors = benchmark_error_model(seed=seed)
    dataset = collect_dataset(errors, n_programs, n_inputs, seed=seed, noise=noise)
    twin, info = fit_twin(dataset)
    rng = np.random.default_rng(seed + 1)
    direct = np.empty(n_targets)
    corrected = np.empty(n_targets)
    for t in range(n_targets):
        u = haar_random_unitary(errors.n, rng)
        direct_prog = clements_decompose(u)
        direct[t] = normalized_fidelity(u, physical_mesh_matrix(direct_prog, errors))
        corr_prog = corrected_program(twin, u, init=direct_prog)
        corrected[t] = normalized_fidelity(
            u, physical_mesh_matrix(corr_prog, errors)
        )
    return {
        "direct": direct,
        "corrected": corrected,
        "direct_mean": float(direct.mean()),
        "direct_std": float(direct.std()),
        "corrected_mean": float(corrected.mean()),
        "corrected_std": float(corrected.std()),
        "twin_mse": info["mse"],
        "twin": twin,
    }
