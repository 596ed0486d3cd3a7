"""Ideal coherent linear algebra for rectangular interferometer meshes.

The building block is a Mach-Zehnder interferometer (MZI) with an internal
phase ``theta1`` and an external phase ``theta2`` on its top output:

    U(theta1, theta2) = i e^{i theta1/2} [[e^{i theta2} s, e^{i theta2} c],
                                          [c,              -s]]

with s = sin(theta1/2), c = cos(theta1/2). ``theta1 = 0`` routes all power to
the opposite port (cross state), ``theta1 = pi`` keeps it on the same port
(bar state).

A mesh program is the rectangular (Clements-style) arrangement of N(N-1)/2
such blocks plus a phase screen on the N inputs. Layout order is canonical
and documented at :func:`clements_layout`. With this block convention an
input-side screen makes the mesh exactly universal over U(N); an output-side
screen does not (every row-0 entry of a final block shares one phase, so e.g.
[[i, 1], [1, i]]/sqrt(2) would be unreachable), which is why the screen sits
on the input.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

TWO_PI = 2.0 * math.pi

MESH_PROGRAM_SCHEMA = "mesh-program/1"


def wrap_phase(value):
    """Wrap an angle to the principal interval [0, 2*pi)."""
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"phase must be finite, got {value!r}")
    return v % TWO_PI


@dataclass(frozen=True)
class MziPhases:
    """Internal and external phase of one MZI, wrapped to [0, 2*pi)."""

    theta1: float
    theta2: float

    def __post_init__(self):
        object.__setattr__(self, "theta1", wrap_phase(self.theta1))
        object.__setattr__(self, "theta2", wrap_phase(self.theta2))


@dataclass(frozen=True)
class PlacedMzi:
    """One MZI at (column, top_mode) in the rectangular layout."""

    column: int
    top_mode: int
    phases: MziPhases


def mzi_unitary(phases: MziPhases) -> np.ndarray:
    """2x2 unitary of a single MZI in the convention documented above."""
    t1 = phases.theta1
    s = math.sin(t1 / 2.0)
    c = math.cos(t1 / 2.0)
    pre = 1j * cmath.exp(1j * t1 / 2.0)
    ext = cmath.exp(1j * phases.theta2)
    return pre * np.array([[ext * s, ext * c], [c, -s]], dtype=complex)


def clements_layout(n: int) -> tuple[tuple[int, int], ...]:
    """Canonical (column, top_mode) placement list for an n-mode mesh.

    Columns run 0..n-1. Even columns hold blocks on mode pairs (0,1), (2,3),
    ...; odd columns hold (1,2), (3,4), ... The list is sorted by
    (column, top_mode) and has exactly n(n-1)/2 entries.
    """
    if n < 1:
        raise ValueError("mesh size must be a positive integer")
    out = []
    for col in range(n):
        start = 0 if col % 2 == 0 else 1
        for m in range(start, n - 1, 2):
            out.append((col, m))
    assert len(out) == n * (n - 1) // 2
    return tuple(out)


@dataclass(frozen=True)
class MeshProgram:
    """Phases for every MZI of one mesh plus the input phase screen.

    ``mzis`` follows :func:`clements_layout` order exactly. ``input_phases``
    is applied to the input fields before the first column. ``global_phase``
    is a scalar record kept for completeness; the decomposition always leaves
    it at zero because the input screen absorbs all residual phases.
    """

    n: int
    mzis: tuple[PlacedMzi, ...]
    input_phases: tuple[float, ...]
    global_phase: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("mesh size must be a positive integer")
        mzis = tuple(self.mzis)
        layout = clements_layout(self.n)
        got = tuple((p.column, p.top_mode) for p in mzis)
        if got != layout:
            raise ValueError(
                f"mesh program layout malformed: expected canonical "
                f"{len(layout)}-block layout for n={self.n}, got {got}"
            )
        phases = tuple(wrap_phase(p) for p in self.input_phases)
        if len(phases) != self.n:
            raise ValueError(
                f"input screen needs {self.n} phases, got {len(phases)}"
            )
        object.__setattr__(self, "mzis", mzis)
        object.__setattr__(self, "input_phases", phases)
        object.__setattr__(self, "global_phase", wrap_phase(self.global_phase))

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema": MESH_PROGRAM_SCHEMA,
            "n": self.n,
            "mzis": [
                {
                    "column": p.column,
                    "top_mode": p.top_mode,
                    "theta1": p.phases.theta1,
                    "theta2": p.phases.theta2,
                }
                for p in self.mzis
            ],
            "input_phases": list(self.input_phases),
            "global_phase": self.global_phase,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MeshProgram":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("schema") != MESH_PROGRAM_SCHEMA:
            raise SchemaError(
                f"expected schema {MESH_PROGRAM_SCHEMA!r}, "
                f"got {doc.get('schema')!r}"
                if isinstance(doc, dict)
                else "mesh program document must be a JSON object"
            )
        mzis = tuple(
            PlacedMzi(m["column"], m["top_mode"], MziPhases(m["theta1"], m["theta2"]))
            for m in doc["mzis"]
        )
        return cls(
            n=doc["n"],
            mzis=mzis,
            input_phases=tuple(doc["input_phases"]),
            global_phase=doc.get("global_phase", 0.0),
        )

    # -- convenience ----------------------------------------------------

    def theta1_vector(self) -> np.ndarray:
        return np.array([p.phases.theta1 for p in self.mzis])

    def theta2_vector(self) -> np.ndarray:
        return np.array([p.phases.theta2 for p in self.mzis])


def program_from_phases(n, theta1, theta2, input_phases, global_phase=0.0):
    """Assemble a MeshProgram from flat phase vectors in layout order."""
    layout = clements_layout(n)
    if len(theta1) != len(layout) or len(theta2) != len(layout):
        raise ValueError(
            f"need {len(layout)} internal and external phases for n={n}"
        )
    mzis = tuple(
        PlacedMzi(col, m, MziPhases(t1, t2))
        for (col, m), t1, t2 in zip(layout, theta1, theta2)
    )
    return MeshProgram(n, mzis, tuple(input_phases), global_phase)


def mesh_reconstruct(program: MeshProgram) -> np.ndarray:
    """Compose the program's blocks and screen into the full N x N unitary."""
    n = program.n
    u = np.diag(np.exp(1j * np.asarray(program.input_phases))).astype(complex)
    for placed in program.mzis:
        m = placed.top_mode
        block = mzi_unitary(placed.phases)
        u[m : m + 2, :] = block @ u[m : m + 2, :]
    if program.global_phase != 0.0:
        u = cmath.exp(1j * program.global_phase) * u
    return u


def haar_random_unitary(n: int, seed=None) -> np.ndarray:
    """Haar-distributed n x n unitary, reproducible from the seed."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def fidelity(u_target, u_measured) -> float:
    """|Tr(U_target^dag U_measured)| / n, invariant to global phase."""
    a = np.asarray(u_target, dtype=complex)
    b = np.asarray(u_measured, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need equal square matrices, got {a.shape} and {b.shape}")
    n = a.shape[0]
    return float(abs(np.trace(a.conj().T @ b)) / n)


def normalized_fidelity(u_target, v_measured) -> float:
    """Scale-invariant fidelity |Tr(U^dag V)| / (sqrt(n) * ||V||_F).

    Equals :func:`fidelity` when ``v_measured`` is unitary, and ignores any
    uniform amplitude factor (e.g. optical loss) on a measured matrix.
    """
    a = np.asarray(u_target, dtype=complex)
    v = np.asarray(v_measured, dtype=complex)
    if a.shape != v.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need equal square matrices, got {a.shape} and {v.shape}")
    n = a.shape[0]
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("measured matrix is identically zero")
    return float(abs(np.trace(a.conj().T @ v)) / (math.sqrt(n) * norm))


# -- decomposition ----------------------------------------------------------

_DEGENERATE = 1e-14


def _null_with_right_factor(v, r, m):
    """Phases (theta, phi) so that right-multiplying columns (m, m+1) by an
    MZI block zeros element (r, m)."""
    a = v[r, m]
    b = v[r, m + 1]
    if abs(a) < _DEGENERATE and abs(b) < _DEGENERATE:
        return math.pi, 0.0
    theta = 2.0 * math.atan2(abs(b), abs(a))
    phi = wrap_phase(math.pi + cmath.phase(b) - cmath.phase(a))
    return theta, phi


def _null_with_left_adjoint(v, m, c):
    """Phases (theta, phi) so that left-multiplying rows (m, m+1) by an MZI
    adjoint zeros element (m+1, c)."""
    a = v[m, c]
    b = v[m + 1, c]
    if abs(a) < _DEGENERATE and abs(b) < _DEGENERATE:
        return math.pi, 0.0
    theta = 2.0 * math.atan2(abs(a), abs(b))
    phi = wrap_phase(cmath.phase(a) - cmath.phase(b))
    return theta, phi


def clements_decompose(u, atol: float = 1e-8) -> MeshProgram:
    """Exact rectangular-mesh program implementing a unitary matrix.

    Givens-style nulling alternates between right-multiplications (which act
    on columns) and left-multiplications by block adjoints (which act on
    rows), reducing ``u`` to a diagonal. The diagonal is then commuted
    through the collected adjoint factors and lands on the input side as the
    phase screen, leaving zero residual global phase. The reconstruction
    satisfies fidelity(u, reconstruct(result)) > 1 - 1e-10.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"need a square matrix, got shape {u.shape}")
    n = u.shape[0]
    if n < 2:
        raise ValueError("decomposition requires n >= 2")
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(n))))
    if not dev < atol:
        raise ValueError(
            f"matrix is not unitary: max |U^dag U - I| entry {dev:.3e} "
            f"exceeds tolerance {atol:.1e}"
        )

    v = u.copy()
    right_ops = []  # (m, theta, phi): applied as v <- v @ block(m)
    left_ops = []  # (m, theta, phi): applied as v <- block(m)^dag @ v

    for k in range(n - 1):
        if k % 2 == 0:
            # null (n-1-j, k-j) by mixing columns (k-j, k-j+1)
            for j in range(k + 1):
                r = n - 1 - j
                m = k - j
                theta, phi = _null_with_right_factor(v, r, m)
                block = mzi_unitary(MziPhases(theta, phi))
                v[:, m : m + 2] = v[:, m : m + 2] @ block
                v[r, m] = 0.0
                right_ops.append((m, theta, phi))
        else:
            # null (n-1-k+j, j) by mixing rows (n-2-k+j, n-1-k+j)
            for j in range(k + 1):
                r = n - 1 - k + j
                m = r - 1
                theta, phi = _null_with_left_adjoint(v, m, j)
                block = mzi_unitary(MziPhases(theta, phi))
                v[m : m + 2, :] = block.conj().T @ v[m : m + 2, :]
                v[r, j] = 0.0
                left_ops.append((m, theta, phi))

    offdiag = float(np.max(np.abs(v - np.diag(np.diagonal(v)))))
    if not offdiag < 1e-10:
        raise RuntimeError(
            f"internal decomposition error: residual off-diagonal {offdiag:.3e}"
        )
    d = np.angle(np.diagonal(v)).copy()

    # v reduced to D means u = L_1..L_p D R_q^dag..R_1^dag. Commute D through
    # each adjoint: diag(a1, a2) . block(theta, phi)^dag on modes (m, m+1)
    # equals block(theta, a1 - a2) . diag(a2 - phi - theta - pi, a2 - theta - pi).
    converted = []
    for m, theta, phi in reversed(right_ops):
        a1 = d[m]
        a2 = d[m + 1]
        converted.append((m, theta, wrap_phase(a1 - a2)))
        d[m] = a2 - phi - theta - math.pi
        d[m + 1] = a2 - theta - math.pi

    # application order, input side first
    sequence = list(reversed(converted)) + list(reversed(left_ops))

    depth = [0] * n
    placed = []
    for m, theta, phi in sequence:
        col = max(depth[m], depth[m + 1])
        placed.append(PlacedMzi(col, m, MziPhases(theta, phi)))
        depth[m] = col + 1
        depth[m + 1] = col + 1
    placed.sort(key=lambda p: (p.column, p.top_mode))

    got = tuple((p.column, p.top_mode) for p in placed)
    if got != clements_layout(n):
        raise RuntimeError(
            "internal decomposition error: factor packing does not match the "
            "canonical layout"
        )
    return MeshProgram(
        n=n,
        mzis=tuple(placed),
        input_phases=tuple(wrap_phase(x) for x in d),
        global_phase=0.0,
    )
