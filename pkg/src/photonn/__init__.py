"""Simulation, calibration, and training toolkit for coherent photonic
neural networks built from rectangular MZI meshes."""

__version__ = "0.1.0"

from .calibration import (
    MeshCalibration,
    MeshDevice,
    calibrate_device,
    make_random_device,
    measure_crosstalk_matrix,
    program_with_calibration,
    run_crosstalk_benchmark,
)
from .dataset import (
    CLASS_NAMES,
    VowelDataset,
    ingest_vowel_csv,
    synthesize_vowels,
    train_test_split,
    write_vowel_csv,
)
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateReadout,
    PhaseRangeError,
    SchemaError,
)
from .hardware import (
    CrosstalkMatrix,
    HardwareErrorModel,
    PhaseShifterCal,
    apply_crosstalk_correction,
    benchmark_error_model,
    current_for_phase,
    phase_from_current,
    physical_mesh_matrix,
    simulate_physical_mesh,
)
from .mesh import (
    MeshProgram,
    MziPhases,
    PlacedMzi,
    clements_decompose,
    clements_layout,
    fidelity,
    haar_random_unitary,
    mesh_reconstruct,
    mzi_unitary,
    normalized_fidelity,
)
from .nofu import NofuParams, default_nofu_params, nofu_apply
from .perf import SystemSpec, as_built_spec, performance_summary
from .training import (
    ModelParams,
    SystemConfig,
    TrainConfig,
    TrainState,
    default_system,
    digital_reference_train,
    evaluate,
    forward,
    forward_difference_train,
    initial_params,
    loss,
    spsa_step,
    train,
)
from .twin import TwinModel, corrected_program, fit_twin, run_fidelity_benchmark

__all__ = [
    "CLASS_NAMES",
    "ConvergenceError",
    "CrosstalkMatrix",
    "DataError",
    "DegenerateReadout",
    "HardwareErrorModel",
    "MeshCalibration",
    "MeshDevice",
    "MeshProgram",
    "ModelParams",
    "MziPhases",
    "NofuParams",
    "PhaseRangeError",
    "PhaseShifterCal",
    "PlacedMzi",
    "SchemaError",
    "SystemConfig",
    "SystemSpec",
    "TrainConfig",
    "TrainState",
    "TwinModel",
    "VowelDataset",
    "apply_crosstalk_correction",
    "as_built_spec",
    "benchmark_error_model",
    "calibrate_device",
    "clements_decompose",
    "clements_layout",
    "corrected_program",
    "current_for_phase",
    "default_nofu_params",
    "default_system",
    "digital_reference_train",
    "evaluate",
    "fidelity",
    "fit_twin",
    "forward",
    "forward_difference_train",
    "haar_random_unitary",
    "ingest_vowel_csv",
    "initial_params",
    "loss",
    "make_random_device",
    "measure_crosstalk_matrix",
    "mesh_reconstruct",
    "mzi_unitary",
    "normalized_fidelity",
    "performance_summary",
    "phase_from_current",
    "physical_mesh_matrix",
    "program_with_calibration",
    "run_crosstalk_benchmark",
    "run_fidelity_benchmark",
    "simulate_physical_mesh",
    "spsa_step",
    "synthesize_vowels",
    "train",
    "train_test_split",
    "write_vowel_csv",
    "__version__",
]
