"""Command line interface to the simulation, calibration, and training stack.

Subcommands::

    decompose            rectangular-mesh program from a unitary matrix
    fidelity-benchmark   direct vs twin-corrected programming fidelity
    calibrate            full phase calibration of a simulated mesh device
    twin-fit             fit a digital twin from in-situ power measurements
    train                in-situ, finite-difference, or digital reference training
    infer                run a saved parameter vector over a dataset
    perf                 performance summary, component power, scaling tables

Option resolution, highest precedence first: explicit flag, environment
variable ``PHOTONN_<OPTION>`` (upper-case, underscores), the ``--config``
JSON file (flat keys or a per-command section), built-in default. Every
emitted document carries a schema tag: JSON payloads in a ``schema`` field,
CSV tables as a leading ``# schema:`` comment line.

Exit codes: 0 success, 2 usage error, 3 data error (malformed input,
schema mismatch, unreadable file), 4 convergence failure. Commands that
write a table to ``--out`` also render a PNG figure next to it unless
``--no-figures`` is given; with output on stdout no figure is rendered.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import constants
from .calibration import calibrate_device, make_random_device, program_with_calibration
from .dataset import CLASS_NAMES, ingest_vowel_csv, synthesize_vowels
from .errors import ConvergenceError, DataError, PhaseRangeError, SchemaError
from .hardware import HardwareErrorModel, benchmark_error_model
from .mesh import (
    clements_decompose,
    haar_random_unitary,
    mesh_reconstruct,
    normalized_fidelity,
)
from .perf import (
    component_power_table,
    performance_summary,
    scaling_energy,
)
from .training import (
    HISTORY_HEADER,
    HISTORY_SCHEMA,
    ModelParams,
    SystemConfig,
    TrainConfig,
    default_system,
    digital_reference_train,
    forward,
    forward_difference_train,
    train,
    write_history_csv,
)
from .twin import collect_dataset, fit_twin, run_fidelity_benchmark, twin_heldout_fidelity

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

ENV_PREFIX = "PHOTONN_"


class UsageError(Exception):
    """A required option is missing or option values are inconsistent."""


_COMMON_DEFAULTS = {"seed": 0, "out": None, "format": "csv", "no_figures": False}

_COMMAND_DEFAULTS = {
    "decompose": {"matrix": None, "haar": None, "atol": 1e-8},
    "fidelity-benchmark": {
        "targets": 500,
        "programs": 60,
        "inputs": 20,
        "noise": 0.0,
        "splitter_sigma": None,
        "ideal": False,
    },
    "calibrate": {"crosstalk_sigma": 0.0, "readout_noise": 0.0, "check": 10},
    "twin-fit": {
        "programs": 60,
        "inputs": 20,
        "noise": 0.0,
        "splitter_sigma": None,
        "heldout": 20,
    },
    "train": {
        "dataset": None,
        "mode": "insitu",
        "epochs": None,
        "learning_rate": None,
        "perturbation": None,
        "loss": "sum",
        "readout": "intensity",
        "noise": 0.0,
        "errors": False,
        "laser_power": None,
        "activation": "tanh",
    },
    "infer": {
        "params": None,
        "dataset": None,
        "noise": 0.0,
        "readout": "intensity",
        "errors": False,
        "laser_power": None,
    },
    "perf": {"section": "summary", "layers": constants.N_LAYERS},
}

# value types for options whose built-in default is None
_NONE_TYPES = {
    "matrix": str,
    "haar": int,
    "atol": float,
    "splitter_sigma": float,
    "epochs": int,
    "learning_rate": float,
    "perturbation": float,
    "laser_power": float,
    "dataset": str,
    "params": str,
    "out": str,
}

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


# ---------------------------------------------------------------------------
# option resolution
# ---------------------------------------------------------------------------


def _coerce(key, default, raw):
    """Cast a config-file or environment value to the option's type."""
    if raw is None:
        return None
    target = type(default) if default is not None else _NONE_TYPES.get(key, str)
    if target is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in _TRUTHY:
            return True
        if text in _FALSY:
            return False
        raise DataError(f"option {key!r} expects a boolean, got {raw!r}")
    try:
        return target(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"option {key!r}: {exc}") from None


def _load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError("config file must hold a JSON object")
    return doc


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment, and explicit flags."""
    defaults = dict(_COMMON_DEFAULTS)
    defaults.update(_COMMAND_DEFAULTS[args.command])
    opts = dict(defaults)

    config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        cfg = _load_config(config_path)
        for key, val in cfg.items():
            if key in defaults and not isinstance(val, dict):
                opts[key] = _coerce(key, defaults[key], val)
        section = cfg.get(args.command)
        if not isinstance(section, dict):
            section = cfg.get(args.command.replace("-", "_"))
        if isinstance(section, dict):
            for key, val in section.items():
                if key in defaults:
                    opts[key] = _coerce(key, defaults[key], val)

    for key in defaults:
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            opts[key] = _coerce(key, defaults[key], raw)

    for key, val in vars(args).items():
        if key in defaults:
            opts[key] = val

    opts["command"] = args.command
    return opts


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(rows, columns, schema, fmt, out=None) -> None:
    """Emit one table to a file or stdout in the selected format."""
    if fmt == "json":
        payload = {
            "schema": schema,
            "rows": [{col: row.get(col) for col in columns} for row in rows],
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# schema: {schema}\n")
        writer = csv.writer(buf)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in columns])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _figure_target(opts) -> Path | None:
    if opts["no_figures"] or not opts["out"]:
        return None
    return Path(opts["out"]).with_suffix(".png")


def _write_document(text: str, out, label: str) -> None:
    if out:
        Path(out).write_text(text)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _read_text(path, label: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {label}: {exc}") from None


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def _load_matrix(path) -> np.ndarray:
    text = _read_text(path, "matrix file")
    if str(path).endswith(".json"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"matrix file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or "re" not in doc or "im" not in doc:
            raise DataError("matrix JSON must hold 're' and 'im' 2-D arrays")
        try:
            return np.array(doc["re"], dtype=float) + 1j * np.array(doc["im"], dtype=float)
        except ValueError as exc:
            raise DataError(f"matrix JSON arrays are malformed: {exc}") from None
    try:
        return np.loadtxt(io.StringIO(text), dtype=complex, delimiter=",")
    except ValueError as exc:
        raise DataError(f"cannot parse matrix CSV: {exc}") from None


def cmd_decompose(opts) -> int:
    if opts["haar"] is not None:
        u = haar_random_unitary(opts["haar"], seed=opts["seed"])
    elif opts["matrix"]:
        u = _load_matrix(opts["matrix"])
    else:
        raise UsageError("decompose needs --matrix FILE or --haar N")
    u = np.atleast_2d(np.asarray(u, dtype=complex))
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DataError(f"matrix must be square, got shape {u.shape}")
    deviation = float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
    if deviation > opts["atol"]:
        raise DataError(
            f"matrix is not unitary: max deviation |U^H U - I| = {deviation:.3e} "
            f"exceeds tolerance {opts['atol']:.1e}"
        )
    program = clements_decompose(u)
    fidelity = normalized_fidelity(u, mesh_reconstruct(program))
    print(f"reconstruction fidelity: {fidelity:.12f}", file=sys.stderr)
    _write_document(program.to_json(), opts["out"], "program")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fidelity-benchmark
# ---------------------------------------------------------------------------


def _zero_error_model(n: int) -> HardwareErrorModel:
    L = n * (n - 1) // 2
    return HardwareErrorModel(
        n=n,
        splitter_dev=np.zeros((L, 2)),
        loss_db=np.zeros(L),
        static_internal=np.zeros(L),
        static_external=np.zeros(L),
        static_screen=np.zeros(n),
    )


def cmd_fidelity_benchmark(opts) -> int:
    if opts["ideal"]:
        errors = _zero_error_model(constants.N_MODES)
    elif opts["splitter_sigma"] is not None:
        errors = benchmark_error_model(opts["seed"], splitter_sigma=opts["splitter_sigma"])
    else:
        errors = None
    result = run_fidelity_benchmark(
        seed=opts["seed"],
        n_targets=opts["targets"],
        n_programs=opts["programs"],
        n_inputs=opts["inputs"],
        noise=opts["noise"],
        errors=errors,
    )
    rows = [
        {"target": t, "fidelity_direct": float(d), "fidelity_corrected": float(c)}
        for t, (d, c) in enumerate(zip(result["direct"], result["corrected"]))
    ]
    print(
        "direct mean {:.4f} (std {:.4f}); corrected mean {:.4f} (std {:.4f}); "
        "twin mse {:.3e}".format(
            result["direct_mean"],
            result["direct_std"],
            result["corrected_mean"],
            result["corrected_std"],
            result["twin_mse"],
        ),
        file=sys.stderr,
    )
    write_table(
        rows,
        ("target", "fidelity_direct", "fidelity_corrected"),
        "fidelity-benchmark/1",
        opts["format"],
        opts["out"],
    )
    figure = _figure_target(opts)
    if figure is not None:
        from . import plots

        plots.fidelity_histogram(result["direct"], result["corrected"], figure)
        print(f"wrote {figure}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def cmd_calibrate(opts) -> int:
    device = make_random_device(
        seed=opts["seed"],
        crosstalk_sigma=opts["crosstalk_sigma"] or None,
        readout_noise=opts["readout_noise"],
    )
    calibration = calibrate_device(device)
    row = {
        "n": calibration.n,
        "heaters": device.heater_count,
        "rank": calibration.info.get("rank"),
        "equations": calibration.info.get("equations"),
        "max_residual": calibration.info.get("max_residual"),
        "lo_phase": calibration.info.get("lo_phase"),
        "fidelity_mean": None,
        "fidelity_min": None,
    }
    if opts["check"] > 0:
        fids = []
        for s in range(opts["check"]):
            u = haar_random_unitary(calibration.n, seed=opts["seed"] * 1000 + s)
            device.set_currents(program_with_calibration(calibration, clements_decompose(u)))
            fids.append(normalized_fidelity(u, device.true_transfer_matrix()))
        row["fidelity_mean"] = float(np.mean(fids))
        row["fidelity_min"] = float(np.min(fids))
        print(
            f"programmed {opts['check']} random unitaries: fidelity mean "
            f"{row['fidelity_mean']:.6f}, min {row['fidelity_min']:.6f}",
            file=sys.stderr,
        )
    if opts["out"]:
        _write_document(calibration.to_json(), opts["out"], "calibration")
    write_table(
        [row],
        tuple(row),
        "calibration-summary/1",
        opts["format"],
        None,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# twin-fit
# ---------------------------------------------------------------------------


def cmd_twin_fit(opts) -> int:
    errors = benchmark_error_model(opts["seed"], splitter_sigma=opts["splitter_sigma"])
    dataset = collect_dataset(
        errors, opts["programs"], opts["inputs"], seed=opts["seed"], noise=opts["noise"]
    )
    twin, info = fit_twin(dataset)
    heldout = twin_heldout_fidelity(twin, errors, n_programs=opts["heldout"], seed=opts["seed"] + 1)
    print(
        f"fit mse {info['mse']:.3e} after {info['iterations']} iterations; "
        f"heldout fidelity {heldout:.6f}",
        file=sys.stderr,
    )
    if opts["out"]:
        _write_document(twin.to_json(), opts["out"], "twin model")
    write_table(
        [
            {
                "n": twin.n,
                "mse": float(info["mse"]),
                "iterations": int(info["iterations"]),
                "heldout_fidelity": float(heldout),
            }
        ],
        ("n", "mse", "iterations", "heldout_fidelity"),
        "twin-fit-summary/1",
        opts["format"],
        None,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / infer
# ---------------------------------------------------------------------------


def _build_system(opts) -> SystemConfig:
    system = default_system(opts["seed"]) if opts["errors"] else SystemConfig()
    replacements = {}
    if opts["laser_power"] is not None:
        replacements["laser_power_w"] = opts["laser_power"]
    if opts["noise"]:
        replacements["readout_noise"] = opts["noise"]
    if opts["readout"] != system.readout:
        replacements["readout"] = opts["readout"]
    if replacements:
        system = dataclasses.replace(system, **replacements)
    return system


def _load_vowels(opts):
    if opts["dataset"]:
        try:
            return ingest_vowel_csv(opts["dataset"])
        except OSError as exc:
            raise DataError(f"cannot read dataset: {exc}") from None
    return synthesize_vowels(seed=opts["seed"])


def cmd_train(opts) -> int:
    data = _load_vowels(opts)
    config_kwargs = {
        "seed": opts["seed"],
        "readout": opts["readout"],
        "loss": opts["loss"],
        "system": _build_system(opts),
    }
    for key in ("learning_rate", "perturbation", "epochs"):
        if opts[key] is not None:
            config_kwargs[key] = opts[key]
    config = TrainConfig(**config_kwargs)

    state = None
    if opts["mode"] == "digital":
        history = digital_reference_train(data, config, activation=opts["activation"])
    elif opts["mode"] == "fd":
        state = forward_difference_train(data, config)
        history = state.history
    else:
        state = train(data, config)
        history = state.history

    final = history[-1]
    passes = f", {state.passes} batch passes" if state is not None else ""
    print(
        f"{len(history)} epochs: final train accuracy {final.train_acc:.4f}, "
        f"test accuracy {final.test_acc:.4f}{passes}",
        file=sys.stderr,
    )

    if opts["out"]:
        write_history_csv(history, opts["out"])
        print(f"wrote {opts['out']}", file=sys.stderr)
        if state is not None:
            params_path = Path(opts["out"]).with_suffix("").as_posix() + "-params.json"
            _write_document(state.params.to_json(), params_path, "parameters")
        figure = _figure_target(opts)
        if figure is not None:
            from . import plots

            plots.training_curves(history, figure)
            print(f"wrote {figure}", file=sys.stderr)
    else:
        rows = [
            {
                "epoch": rec.epoch,
                "train_loss": float(rec.train_loss),
                "train_acc": float(rec.train_acc),
                "test_acc": float(rec.test_acc),
            }
            for rec in history
        ]
        write_table(rows, HISTORY_HEADER, HISTORY_SCHEMA, opts["format"], None)
    return EXIT_OK


def cmd_infer(opts) -> int:
    if not opts["params"]:
        raise UsageError("infer needs --params FILE (from a train run)")
    if not opts["dataset"]:
        raise UsageError("infer needs --dataset FILE")
    theta = ModelParams.from_json(_read_text(opts["params"], "parameter file"))
    try:
        data = ingest_vowel_csv(opts["dataset"])
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from None
    system = _build_system(opts)
    rng = np.random.default_rng(opts["seed"]) if opts["noise"] else None

    columns = ["sample", "label", "predicted", "correct"]
    columns += [f"p_{name}" for name in CLASS_NAMES]
    rows = []
    hits = 0
    for idx in range(data.features.shape[0]):
        probs = forward(data.features[idx], theta, system, rng=rng)
        pred = int(np.argmax(probs))
        true = int(data.labels[idx])
        hits += int(pred == true)
        row = {
            "sample": idx,
            "label": CLASS_NAMES[true],
            "predicted": CLASS_NAMES[pred],
            "correct": int(pred == true),
        }
        row.update({f"p_{name}": float(p) for name, p in zip(CLASS_NAMES, probs)})
        rows.append(row)
    accuracy = hits / len(rows)
    print(f"accuracy {accuracy:.4f} over {len(rows)} samples", file=sys.stderr)
    write_table(rows, tuple(columns), "predictions/1", opts["format"], opts["out"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# perf
# ---------------------------------------------------------------------------

SCALING_MODE_COUNTS = (8, 16, 32, 64, 128, 256, 512, 1024)


def cmd_perf(opts) -> int:
    section = opts["section"]
    if section == "summary":
        rows = performance_summary()
        write_table(
            rows,
            ("label", "m", "n", "clock_hz", "latency_s", "tops", "e_op_j", "e_total_j"),
            "perf-summary/1",
            opts["format"],
            opts["out"],
        )
        return EXIT_OK
    if section == "components":
        rows = component_power_table()
        write_table(
            rows,
            ("component", "condition", "power_w", "energy_j"),
            "component-power/1",
            opts["format"],
            opts["out"],
        )
        return EXIT_OK
    rows = [
        {
            "n": n,
            "e_op_j": scaling_energy(opts["layers"], n),
            "e_op_intermediate_j": scaling_energy(opts["layers"], n, intermediate_readout=True),
        }
        for n in SCALING_MODE_COUNTS
    ]
    write_table(
        rows,
        ("n", "e_op_j", "e_op_intermediate_j"),
        "scaling-energy/1",
        opts["format"],
        opts["out"],
    )
    figure = _figure_target(opts)
    if figure is not None:
        from . import plots

        plots.scaling_curves(rows, figure)
        print(f"wrote {figure}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with option defaults")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output file; stdout when omitted")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                        help="table format (default csv)")
    common.add_argument("--no-figures", action="store_true", default=argparse.SUPPRESS,
                        help="skip PNG figure rendering next to --out")

    parser = argparse.ArgumentParser(
        prog="photonn",
        description="Coherent photonic neural network simulation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common],
                       help="decompose a unitary into a mesh program")
    p.add_argument("--matrix", default=argparse.SUPPRESS,
                   help="matrix file (.json with re/im arrays, or CSV of complex entries)")
    p.add_argument("--haar", type=int, default=argparse.SUPPRESS, metavar="N",
                   help="decompose a random N x N Haar unitary instead of a file")
    p.add_argument("--atol", type=float, default=argparse.SUPPRESS,
                   help="unitarity tolerance (default 1e-8)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fidelity-benchmark", parents=[common],
                       help="direct vs corrected programming fidelity populations")
    p.add_argument("--targets", type=int, default=argparse.SUPPRESS,
                   help="random target unitaries (default 500)")
    p.add_argument("--programs", type=int, default=argparse.SUPPRESS,
                   help="twin-fit training programs (default 60)")
    p.add_argument("--inputs", type=int, default=argparse.SUPPRESS,
                   help="probe inputs per program (default 20)")
    p.add_argument("--noise", type=float, default=argparse.SUPPRESS,
                   help="relative readout noise during twin fitting (default 0)")
    p.add_argument("--splitter-sigma", type=float, default=argparse.SUPPRESS,
                   help="splitter angle spread in radians (default benchmark preset)")
    p.add_argument("--ideal", action="store_true", default=argparse.SUPPRESS,
                   help="zero out all hardware errors")
    p.set_defaults(func=cmd_fidelity_benchmark)

    p = sub.add_parser("calibrate", parents=[common],
                       help="calibrate a randomly generated mesh device")
    p.add_argument("--crosstalk-sigma", type=float, default=argparse.SUPPRESS,
                   help="thermal crosstalk coupling spread (default 0)")
    p.add_argument("--readout-noise", type=float, default=argparse.SUPPRESS,
                   help="relative detector noise (default 0)")
    p.add_argument("--check", type=int, default=argparse.SUPPRESS,
                   help="post-calibration fidelity spot checks (default 10)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("twin-fit", parents=[common],
                       help="fit a digital twin to simulated measurements")
    p.add_argument("--programs", type=int, default=argparse.SUPPRESS,
                   help="random programs in the fit dataset (default 60)")
    p.add_argument("--inputs", type=int, default=argparse.SUPPRESS,
                   help="probe inputs per program (default 20)")
    p.add_argument("--noise", type=float, default=argparse.SUPPRESS,
                   help="relative readout noise (default 0)")
    p.add_argument("--splitter-sigma", type=float, default=argparse.SUPPRESS,
                   help="splitter angle spread in radians (default benchmark preset)")
    p.add_argument("--heldout", type=int, default=argparse.SUPPRESS,
                   help="held-out programs for the fidelity report (default 20)")
    p.set_defaults(func=cmd_twin_fit)

    p = sub.add_parser("train", parents=[common],
                       help="train on a vowel dataset (bundled synthetic by default)")
    p.add_argument("--dataset", default=argparse.SUPPRESS,
                   help="vowel CSV file; omitted = bundled synthetic set")
    p.add_argument("--mode", choices=("insitu", "fd", "digital"),
                   default=argparse.SUPPRESS,
                   help="insitu (3 passes/epoch), fd (2N passes/epoch), or digital reference")
    p.add_argument("--epochs", type=int, default=argparse.SUPPRESS,
                   help="training epochs (default 6000)")
    p.add_argument("--learning-rate", type=float, default=argparse.SUPPRESS,
                   help="step size (default 0.002)")
    p.add_argument("--perturbation", type=float, default=argparse.SUPPRESS,
                   help="probe magnitude in grid-scaled units (default 0.05)")
    p.add_argument("--loss", choices=("sum", "mean"), default=argparse.SUPPRESS,
                   help="batch loss reduction driving updates (default sum)")
    p.add_argument("--readout", choices=("intensity", "homodyne"),
                   default=argparse.SUPPRESS, help="detection scheme (default intensity)")
    p.add_argument("--noise", type=float, default=argparse.SUPPRESS,
                   help="relative readout noise during training (default 0)")
    p.add_argument("--errors", action="store_true", default=argparse.SUPPRESS,
                   help="simulate fabrication errors in all three meshes")
    p.add_argument("--laser-power", type=float, default=argparse.SUPPRESS,
                   help="input laser power in watts (default 1e-3)")
    p.add_argument("--activation", choices=("tanh", "relu"), default=argparse.SUPPRESS,
                   help="digital-mode hidden activation (default tanh)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common],
                       help="run saved parameters over a vowel CSV")
    p.add_argument("--params", default=argparse.SUPPRESS,
                   help="parameter JSON written by train")
    p.add_argument("--dataset", default=argparse.SUPPRESS, help="vowel CSV file")
    p.add_argument("--readout", choices=("intensity", "homodyne"),
                   default=argparse.SUPPRESS, help="detection scheme (default intensity)")
    p.add_argument("--noise", type=float, default=argparse.SUPPRESS,
                   help="relative readout noise (default 0)")
    p.add_argument("--errors", action="store_true", default=argparse.SUPPRESS,
                   help="simulate fabrication errors in all three meshes")
    p.add_argument("--laser-power", type=float, default=argparse.SUPPRESS,
                   help="input laser power in watts (default 1e-3)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("perf", parents=[common],
                       help="performance summary, component power, or scaling tables")
    p.add_argument("--section", choices=("summary", "components", "scaling"),
                   default=argparse.SUPPRESS,
                   help="which table to emit (default summary)")
    p.add_argument("--layers", type=int, default=argparse.SUPPRESS,
                   help="mesh layers for the scaling sweep (default 3)")
    p.set_defaults(func=cmd_perf)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        return args.func(opts)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PhaseRangeError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
