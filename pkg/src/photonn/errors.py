"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage problems are argparse's domain,
`DataError` (malformed or inconsistent input data) exits with 3, and
`ConvergenceError` (an optimizer or fit that failed to meet its tolerance)
exits with 4.
"""


class DataError(ValueError):
    """Input data is malformed, inconsistent, or violates a schema."""


class SchemaError(DataError):
    """A serialized document does not carry the expected schema tag."""


class ConvergenceError(RuntimeError):
    """An iterative fit or optimization failed to reach its tolerance."""


class PhaseRangeError(ValueError):
    """A requested phase is outside the reachable range of a heater."""

    def __init__(self, target, lo, hi):
        self.target = float(target)
        self.lo = float(lo)
        self.hi = float(hi)
        super().__init__(
            f"phase {target:.6f} rad unreachable; achievable range "
            f"[{lo:.6f}, {hi:.6f}] rad"
        )


class DegenerateReadout(ValueError):
    """All readout channels are zero, so normalization is undefined."""
