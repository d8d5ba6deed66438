"""Command-line front-end: ``hyvascore fit|select|simulate|kde --config <path>``.

Exit codes: ``0`` success, ``1`` input or configuration error, ``2``
numerical failure (non-convergence, undefined evidence).  Every command is
deterministic given its configuration; all outputs are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bandwidth import silverman_bandwidth
from .experiments import SCENARIOS, atomic_write_text, run_scenario
from .inference import fit_hposterior
from .models import DataSet, GaussianRegression, TemperedKDE, TukeyRegression, kde_predictive_density
from .priors import NlpSpec, gaussian_prior, kde_prior, nlp_penalty, tukey_prior
from .score import QuadratureGrid
from .selection import Candidate, compare_models, laplace_log_evidence

logger = logging.getLogger("hyvascore")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2
KDE_GRID_POINTS = 512


class InputError(Exception):
    """Bad configuration, missing file or malformed data (exit code 1)."""


# ---------------------------------------------------------------------------
# Configuration and data
# ---------------------------------------------------------------------------

def load_schema(name: str) -> dict:
    text = resources.files("hyvascore").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(document, schema_name: str) -> None:
    """Validate against a shipped schema; raises :class:`InputError` on failure."""
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(map(str, e.path)) or "<root>"
        raise InputError(f"{schema_name}: {where}: {e.message}")


def load_config(path, command: str) -> dict:
    path = Path(path)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: line {exc.lineno}: {exc.msg}") from None
    validate(config, f"{command}_config")
    # relative data paths are resolved against the config's directory
    if "data" in config and not Path(config["data"]).is_absolute():
        config["data"] = str((path.parent / config["data"]).resolve())
    return config


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV with a header row; errors carry the line number."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file (a header row is required)") from None
        if not header or any(not h for h in header):
            raise InputError(f"{path}: line 1: empty column name in header")
        if len(set(header)) != len(header):
            raise InputError(f"{path}: line 1: duplicate column names")
        try:
            float(header[0])
            raise InputError(f"{path}: line 1: header row looks numeric; a header is required")
        except ValueError:
            pass
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {line_no}: expected {len(header)} fields, found {len(row)}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}: line {line_no}: non-numeric value") from None
            if not all(np.isfinite(values)):
                raise InputError(f"{path}: line {line_no}: non-finite value")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def build_dataset(path, response: str | None = None, intercept: bool = True) -> tuple[DataSet, list[str], str]:
    """Response column ``response`` (default ``y``, else the first column); covariates are the rest."""
    header, table = read_table(path)
    if response is None:
        response = "y" if "y" in header else header[0]
    if response not in header:
        raise InputError(f"response column {response!r} not in header {header}")
    j = header.index(response)
    others = [k for k in range(len(header)) if k != j]
    X = table[:, others]
    columns = [header[k] for k in others]
    if intercept:
        X = np.column_stack([np.ones(table.shape[0]), X])
        columns = ["(intercept)"] + columns
    if X.shape[1] == 0:
        raise InputError("no covariates: enable the intercept or add columns")
    if X.shape[1] >= table.shape[0]:
        raise InputError(f"need more rows ({table.shape[0]}) than covariates ({X.shape[1]})")
    return DataSet(table[:, j], X), columns, response


def make_candidate(spec: dict, index: int = 0) -> tuple[Candidate, NlpSpec]:
    family = spec["family"]
    p = dict(spec.get("prior", {}))
    nlp = NlpSpec(p.pop("nlp_a0", NlpSpec.a0), p.pop("nlp_b0", NlpSpec.b0), p.pop("lp_scale", NlpSpec.lp_scale))
    name = spec.get("name", family if index == 0 else f"{family}_{index}")
    if family == "gaussian":
        if "nu2" in p or "truncate" in p:
            raise InputError(f"model {name!r}: 'nu2' and 'truncate' only apply to the tukey family")
        return Candidate(name, GaussianRegression(), gaussian_prior(**p)), nlp
    return Candidate(name, TukeyRegression(), tukey_prior(p.pop("nu2", "nlp"), nlp, **p)), nlp


def _fit_kwargs(config: dict) -> dict:
    opt = dict(config.get("optimizer", {}))
    return {"restarts": opt.pop("restarts", 3), **opt}


def _num(x):
    x = float(x)
    if np.isfinite(x):
        return x
    return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")


def _write_json(path: Path, document: dict, schema: str | None = None) -> None:
    if schema is not None:
        validate(document, schema)
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _clean(obj):
    """Recursively make a structure strict-JSON serialisable."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fit(config: dict, out: Path, seed: int) -> int:
    data, columns, response = build_dataset(config["data"], config.get("response"), config.get("intercept", True))
    cand, nlp = make_candidate(config["model"])
    prior = cand.prior
    nonlocal_nu2 = config["model"]["family"] == "tukey" and config["model"].get("prior", {}).get("nu2", "nlp") == "nlp"
    if nonlocal_nu2:  # mode under the paired local prior, evidence adjusted below
        prior = tukey_prior("lp", nlp, **{k: v for k, v in config["model"].get("prior", {}).items()
                                          if k in ("g", "a", "b", "truncate")})
    fit = fit_hposterior(cand.model, prior, data, seed=seed, **_fit_kwargs(config))
    log_ev, err = None, None
    try:
        log_ev = laplace_log_evidence(fit)
        if nonlocal_nu2:
            log_ev += nlp_penalty(nlp, fit.params["nu2"])
    except Exception as exc:  # evidence undefined is a numerical failure, still reported
        err = f"{type(exc).__name__}: {exc}"
    report = _clean({
        "command": "fit", "family": config["model"]["family"], "data": config["data"], "columns": columns,
        "response": response, "n": data.n, "seed": seed, "fit": fit.to_dict(),
        "log_evidence": None if log_ev is None else log_ev, "evidence_error": err,
    })
    _write_json(out / "fit.json", report, "fit_output")
    if not fit.converged:
        logger.error("optimiser did not converge (gradient norm %.3g)", fit.gradient_norm)
        return EXIT_NUMERICAL
    if err is not None:
        logger.error("log evidence undefined: %s", err)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_select(config: dict, out: Path, seed: int) -> int:
    if len(config["models"]) < 2:
        raise InputError("select needs at least two models")
    data, _, _ = build_dataset(config["data"], config.get("response"), config.get("intercept", True))
    pairs = [make_candidate(m, i) for i, m in enumerate(config["models"])]
    names = [c.name for c, _ in pairs]
    if len(set(names)) != len(names):
        raise InputError(f"model names must be unique, got {names}")
    weights = config.get("prior_weights")
    if weights is not None and len(weights) != len(names):
        raise InputError("prior_weights must have one entry per model")
    kw = _fit_kwargs(config)
    if set(kw) - {"restarts"}:
        raise InputError("select supports only 'restarts' in the optimizer block")
    nlp = pairs[0][1]
    report = compare_models([c for c, _ in pairs], data, weights, config.get("with_smic", False), nlp,
                            seed=seed, restarts=kw["restarts"])
    doc = _clean({"command": "select", "data": config["data"], "n": data.n, "seed": seed, **report.to_dict()})
    _write_json(out / "select.json", doc, "select_output")
    failed = [e.name for e in report.entries if e.error is not None or not e.converged]
    if failed:
        logger.error("evidence undefined or fit not converged for: %s", ", ".join(failed))
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(config: dict, out: Path, seed: int) -> int:
    name = config["scenario"]
    if name not in SCENARIOS:
        raise InputError(f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}")
    params = dict(config.get("params", {}))
    allowed = set(inspect.signature(SCENARIOS[name]).parameters) - {"seed", "scenario", "grid"}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise InputError(f"unknown parameter(s) for {name}: {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")
    try:
        result = run_scenario(name, params, out, seed=seed)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid parameters for {name}: {exc}") from None
    validate(result["manifest"], "manifest")
    logger.info("%s: %d rows in %.1f s", name, len(result["rows"]), result["elapsed"])
    return EXIT_OK


def cmd_kde(config: dict, out: Path, seed: int) -> int:
    header, table = read_table(config["data"])
    response = config.get("response") or ("y" if "y" in header else header[0])
    if response not in header:
        raise InputError(f"column {response!r} not in header {header}")
    y = table[:, header.index(response)]
    if y.size < 2:
        raise InputError("need at least two observations")
    learn_w = config.get("learn_w", True)
    prior = kde_prior(learn_w, config.get("b0"), config.get("lambda0"))
    fit = fit_hposterior(TemperedKDE(), prior, DataSet(y), seed=seed, **_fit_kwargs(config))
    params = {"h": fit.params["h"], "w": fit.params["w"]}
    g = config.get("grid", {})
    spread = y.max() - y.min()
    lo = g.get("lo", y.min() - 0.25 * spread - 3 * params["h"])
    hi = g.get("hi", y.max() + 0.25 * spread + 3 * params["h"])
    if not hi > lo:
        raise InputError("grid: 'hi' must exceed 'lo'")
    x = np.linspace(lo, hi, g.get("n_points", KDE_GRID_POINTS))
    dens = kde_predictive_density(x, y, params, QuadratureGrid(min(lo, -10.0), max(hi, 10.0)))
    lines = ["x,density"] + [f"{a!r},{b!r}" for a, b in zip(x.tolist(), dens.tolist())]
    atomic_write_text(out / "kde_density.csv", "\n".join(lines) + "\n")
    doc = _clean({
        "command": "kde", "data": config["data"], "n": int(y.size), "seed": seed, "h": params["h"],
        "w": params["w"], "learn_w": learn_w, "converged": fit.converged,
        "silverman_h": silverman_bandwidth(y), "density_file": "kde_density.csv", "fit": fit.to_dict(),
    })
    _write_json(out / "kde.json", doc, "kde_output")
    if not fit.converged:
        logger.error("optimiser did not converge (gradient norm %.3g)", fit.gradient_norm)
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate, "kde": cmd_kde}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyvascore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output directory (default: config 'out' or the current directory)")
        p.add_argument("--seed", type=_u64, help="root seed (overrides the config)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("fit", "select", "kde"):
            p.add_argument("--response", help="response column (default 'y', else the first column)")
        if name in ("fit", "select"):
            p.add_argument("--no-intercept", action="store_true", help="do not add an intercept column")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; the contract says 1
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="hyvascore: %(levelname)s: %(message)s")
    try:
        config = load_config(args.config, args.command)
        if getattr(args, "response", None):
            config["response"] = args.response
        if getattr(args, "no_intercept", False):
            config["intercept"] = False
        seed = args.seed if args.seed is not None else config.get("seed", 0)
        out = Path(args.out or config.get("out", "."))
        return COMMANDS[args.command](config, out, seed)
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a numerical failure
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
