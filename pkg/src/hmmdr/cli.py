"""
Command-line interface.

    hmmdr cluster  data.csv [--label-col y] --out DIR
    hmmdr classify data.csv --label-col y [--known-col k | --p-known 0.5] --out DIR
    hmmdr da       data.csv --label-col y [--known-col k | --p-known 0.5] --out DIR
    hmmdr simulate --scenario 1 --n 1000 --seed 7 --out DIR
    hmmdr eval     truth.csv estimate.csv [--truth-col c] [--est-col c]

Fitting commands write ``assignments.csv``, ``directions.csv``,
``projections.csv`` and ``metadata.json``; ``simulate`` writes ``data.csv``
and ``metadata.json``. Floats are written with ``repr`` so files round-trip
exactly and re-runs are byte-identical. Exit codes: 0 success, 2 input
error, 3 fitting failure (with ``error.json`` in the output directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .exceptions import (DomainError, FittingError, HMMDRError, InputError, MalformedRowError,
                         MissingFileError, NonNumericError, NumericalError, PipelineError,
                         UnknownColumnError)
from .metrics import ari
from .mixfit import Dataset, FitConfig, map_classify
from .pipeline import PipelineConfig, run_hmmdr, split_known
from .simgen import ScenarioSpec, simulate

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3
COMMAND_MODE = {"cluster": "clustering", "classify": "classification", "da": "discriminant"}
_TRUE = {"1", "true", "t", "yes", "y", "known"}
_FALSE = {"0", "false", "f", "no", "n", "unknown", ""}

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    g_min: int = 1
    g_max: int = 6
    epsilon: float = 1e-5
    max_iter: int = 500
    seed: int = 0
    standardize: bool = True
    p_known: float = 0.5
    output_dir: str = "."

    def __post_init__(self):
        if not 1 <= self.g_min <= self.g_max:
            raise DomainError(f"need 1 <= gmin <= gmax, got {self.g_min}, {self.g_max}")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.max_iter < 1:
            raise DomainError("max-iter must be at least 1")
        if not 0.0 <= self.p_known <= 1.0:
            raise DomainError("p-known must lie in [0, 1]")

    def pipeline(self) -> PipelineConfig:
        fit = FitConfig(epsilon=self.epsilon, max_iter=self.max_iter)
        return PipelineConfig(g_range=(self.g_min, self.g_max), fit=fit,
                              standardize=self.standardize)


@dataclass(eq=False)
class ParsedData:
    """A parsed file: the dataset plus names needed to label the outputs."""

    data: Dataset
    features: list
    classes: list
    known_given: bool


# ---------------------------------------------------------------- input

def _read_rows(path):
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MissingFileError(f"cannot open file ({exc.strerror})", path) from None
    rows = [r for r in rows if r]
    if not rows:
        raise MalformedRowError("file is empty, expected a header row", path, row=1)
    header = [h.strip() for h in rows[0]]
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise MalformedRowError(f"expected {len(header)} fields, found {len(r)}", path, row=i)
    if len(rows) < 2:
        raise MalformedRowError("no data rows after the header", path, row=2)
    return header, rows[1:]


def _column(header, name, path):
    if name not in header:
        raise UnknownColumnError(f"no column named {name!r}", path, column=name)
    return header.index(name)


def _float(cell, path, row, column):
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericError(f"non-numeric value {cell!r}", path, row=row, column=column) from None
    if not math.isfinite(v):
        raise NonNumericError(f"non-finite value {cell!r}", path, row=row, column=column)
    return v


def parse_dataset(path, label_column=None, known_column=None) -> ParsedData:
    """
    Read a comma-delimited file with a header row.

    Every column other than ``label_column``/``known_column`` is a feature and
    must be numeric. Labels map to class indices in order of first
    appearance; an empty label cell means the row's class is not recorded
    (index -1). The known column accepts 1/0, true/false, yes/no.

    Raises
    ------
    MissingFileError, MalformedRowError, NonNumericError, UnknownColumnError
    """
    header, rows = _read_rows(path)
    lab = _column(header, label_column, path) if label_column is not None else None
    kn = _column(header, known_column, path) if known_column is not None else None
    if kn is not None and lab is None:
        raise DomainError("a known column needs a label column")
    feat = [j for j in range(len(header)) if j not in (lab, kn)]
    if not feat:
        raise MalformedRowError("no feature columns", path, row=1)
    x = np.array([[_float(r[j].strip(), path, i, header[j]) for j in feat]
                  for i, r in enumerate(rows, start=2)])
    labels = known = None
    classes = []
    if lab is not None:
        index = {}
        labels = np.empty(len(rows), dtype=int)
        for i, r in enumerate(rows):
            cell = r[lab].strip()
            if cell == "":
                labels[i] = -1
                continue
            labels[i] = index.setdefault(cell, len(index))
        classes = list(index)
    if kn is not None:
        known = np.empty(len(rows), dtype=bool)
        for i, r in enumerate(rows):
            cell = r[kn].strip().lower()
            if cell not in _TRUE | _FALSE:
                raise NonNumericError(f"not a boolean: {r[kn]!r}", path, row=i + 2,
                                      column=header[kn])
            known[i] = cell in _TRUE
            if known[i] and labels[i] < 0:
                raise MalformedRowError("row marked known but has no label", path, row=i + 2,
                                        column=header[kn])
    data = Dataset(x, labels, known if known is not None else np.zeros(len(rows), dtype=bool))
    return ParsedData(data, [header[j] for j in feat], classes, kn is not None)


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v)) if isinstance(v, (np.integer, np.bool_)) else str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        # NaN/inf are not JSON
        return float(v) if math.isfinite(v) else None
    return v


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------- commands

def _prepare(parsed: ParsedData, config: RunConfig):
    """Dataset with the known mask the mode needs."""
    data = parsed.data
    mode = config.mode
    if mode == "clustering":
        return Dataset(data.x, data.labels, np.zeros(data.n, dtype=bool))
    if data.labels is None:
        raise DomainError(f"{mode} needs --label-col")
    labelled = data.labels >= 0
    if parsed.known_given:
        known = data.known_mask
    else:
        known = np.zeros(data.n, dtype=bool)
        known[labelled] = split_known(data.labels[labelled], [config.seed, 1], config.p_known)
    if not known.any():
        raise DomainError(f"{mode} needs at least one known label")
    return Dataset(data.x, data.labels, known)


def run_command(config: RunConfig, parsed: ParsedData, source=None) -> dict:
    """
    Fit, then write the four artifacts into ``config.output_dir``.

    Returns the metadata dictionary.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = _prepare(parsed, config)
    res = run_hmmdr(data, config.mode, config.pipeline(), config.seed)
    d = res.projected.shape[1]

    # assignments over the scored rows
    post_max = res.posterior.max(axis=1) if res.posterior.size else np.empty(0)
    # labelled modes report class names; clustering reports component indices
    if config.mode == "clustering" or not parsed.classes:
        name = lambda k: k
    else:
        name = lambda k: parsed.classes[k] if k < len(parsed.classes) else k
    _write_csv(out / "assignments.csv", ["row", "class", "max_posterior"],
               ((r, name(k), m) for r, k, m in zip(res.scored_rows, res.assignments, post_max)))

    names = [f"dir{k + 1}" for k in range(d)]
    rows = [[f, *res.loadings[j]] for j, f in enumerate(parsed.features)]
    rows.append(["eigenvalue", *res.eigenvalues])
    _write_csv(out / "directions.csv", ["variable", *names], rows)

    # estimated label for every row; scored rows use the reported assignment
    est = map_classify(res.final_model.predict_proba(res.projected))
    est[res.scored_rows] = res.assignments
    if config.mode != "clustering":
        est[data.known_mask] = data.labels[data.known_mask]
    truth = data.labels
    header = ["row", *names] + (["true_label"] if truth is not None else []) + ["estimated_label"]
    prow = []
    for i in range(data.n):
        r = [i, *res.projected[i]]
        if truth is not None:
            r.append(parsed.classes[truth[i]] if truth[i] >= 0 else "")
        r.append(name(est[i]))
        prow.append(r)
    _write_csv(out / "projections.csv", header, prow)

    meta = {
        "command": {v: k for k, v in COMMAND_MODE.items()}[config.mode],
        # output_dir is left out so runs into different directories compare equal
        "config": {k: v for k, v in asdict(config).items() if k != "output_dir"},
        "input": str(source) if source is not None else None,
        "n": data.n,
        "features": parsed.features,
        "classes": parsed.classes,
        "standardization": {"center": res.center, "scale": res.scale},
        "n_components": res.final_model.n_components,
        "bic": res.final_model.bic,
        "loglik_trace": res.final_model.loglik_trace,
        # indices into the HMMDR variables of the last outer iteration, in inclusion order
        "selected_features": res.selected_features.selected,
        "bic_diffs": res.selected_features.bic_diffs,
        "n_directions": d,
        "outer_iterations": res.iterations,
        "n_known": int(data.known_mask.sum()),
    }
    if truth is not None:
        rows_eval = res.scored_rows
        if config.mode == "classification":
            rows_eval = np.flatnonzero(~data.known_mask)
        rows_eval = rows_eval[truth[rows_eval] >= 0]
        if rows_eval.size:
            meta["ari"] = ari(truth[rows_eval], est[rows_eval])
            meta["ari_rows"] = "unknown" if config.mode != "clustering" else "all"
    _write_json(out / "metadata.json", meta)
    return meta


def _cmd_fit(args) -> int:
    config = RunConfig(mode=COMMAND_MODE[args.command], g_min=args.gmin, g_max=args.gmax,
                       epsilon=args.epsilon, max_iter=args.max_iter, seed=args.seed,
                       standardize=not args.no_standardize, p_known=args.p_known,
                       output_dir=args.out)
    parsed = parse_dataset(args.data, args.label_col, args.known_col)
    meta = run_command(config, parsed, args.data)
    line = f"G={meta['n_components']} features={meta['selected_features']}"
    if "ari" in meta:
        line += f" ARI={meta['ari']!r}"
    print(line)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(args.scenario, args.n, args.p, args.seed, args.lam, args.omega,
                        args.mean_scale)
    data = simulate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = [f"x{j + 1}" for j in range(data.p)]
    _write_csv(out / "data.csv", [*cols, "label"],
               ([*row, lab] for row, lab in zip(data.x, data.labels)))
    _write_json(out / "metadata.json", {"command": "simulate", "scenario": asdict(spec),
                                        "n": data.n, "p": data.p})
    print(f"wrote {data.n} rows to {out / 'data.csv'}")
    return EXIT_OK


def _label_vector(path, column):
    header, rows = _read_rows(path)
    if column is None:
        column = next((c for c in ("class", "estimated_label", "label") if c in header), None)
        if column is None:
            raise UnknownColumnError("no class/estimated_label/label column; pass one explicitly",
                                     path)
    j = _column(header, column, path)
    return [r[j].strip() for r in rows]


def _cmd_eval(args) -> int:
    a = _label_vector(args.truth, args.truth_col)
    b = _label_vector(args.estimate, args.est_col)
    if len(a) != len(b):
        raise MalformedRowError(f"files have {len(a)} and {len(b)} rows", args.estimate)
    keep = [i for i in range(len(a)) if a[i] != "" and b[i] != ""]
    if not keep:
        raise DomainError("no rows with both labels present")
    value = ari([a[i] for i in keep], [b[i] for i in keep])
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "eval.json", {"ari": value, "n": len(keep),
                                        "truth": str(args.truth), "estimate": str(args.estimate)})
    print(f"ARI {value!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmmdr", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, mode in COMMAND_MODE.items():
        p = sub.add_parser(name, help=f"HMMDR in {mode} mode")
        p.add_argument("data", help="comma-delimited file with a header row")
        p.add_argument("--label-col", default=None)
        p.add_argument("--known-col", default=None)
        p.add_argument("--p-known", type=float, default=0.5,
                       help="probability a label is known when --known-col is absent")
        p.add_argument("--gmin", type=int, default=1)
        p.add_argument("--gmax", type=int, default=6)
        p.add_argument("--epsilon", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=500)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-standardize", action="store_true")
        p.add_argument("--out", default=".")
        p.set_defaults(func=_cmd_fit)
    p = sub.add_parser("simulate", help="write a simulated data set")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, default=1000,
                   help="rows (scenarios 1, 2) or rows per component (scenario 3)")
    p.add_argument("--p", type=int, default=3, help="dimension for scenario 3")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--mean-scale", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_simulate)
    p = sub.add_parser("eval", help="adjusted Rand index between two label files")
    p.add_argument("truth")
    p.add_argument("estimate")
    p.add_argument("--truth-col", default=None)
    p.add_argument("--est-col", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)
    return parser


def _error_record(exc, code, out):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("row", "column", "stage", "iteration"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    if isinstance(exc, PipelineError):
        record["cause"] = f"{type(exc.cause).__name__}: {exc.cause}"
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            _write_json(Path(out) / "error.json", record)
        except OSError:
            pass
    print(f"error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    out = getattr(args, "out", None)
    try:
        return args.func(args)
    except (InputError, DomainError) as exc:
        return _error_record(exc, EXIT_INPUT, out)
    except (FittingError, PipelineError, NumericalError, HMMDRError) as exc:
        return _error_record(exc, EXIT_FIT, out)


if __name__ == "__main__":
    sys.exit(main())
