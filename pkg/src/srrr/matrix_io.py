"""CSV and JSON file handling for the command-line tools.

Numeric CSV uses '.' decimals, comma separators, and %.17g formatting
so float64 values round-trip exactly. A single header row is detected
automatically (any token that does not parse as a float). All writes
go through a temp-file-then-rename so output files are never partial.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .estimator import FitConfig, FitResult, UnitRankFactor
from .exceptions import InputDataError
from .sparse_eig import SparsityRule

MODEL_SCHEMA_VERSION = 1


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(value: float) -> str:
    return "%.17g" % value


def write_matrix_csv(path: str, a, header=None) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    lines = []
    if header is not None:
        lines.append(",".join(str(h) for h in header))
    for row in a:
        lines.append(",".join(format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_row(tokens):
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        return None


def read_matrix_csv(path: str):
    """Read a numeric CSV; returns (matrix, header or None)."""
    try:
        with open(path) as handle:
            raw = [line.strip() for line in handle if line.strip()]
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc}") from exc
    if not raw:
        raise InputDataError(f"{path} is empty")
    header = None
    rows = []
    first = _parse_row(raw[0].split(","))
    start = 0
    if first is None:
        header = [tok.strip() for tok in raw[0].split(",")]
        start = 1
        if len(raw) == 1:
            raise InputDataError(f"{path} has a header but no data rows")
    for line_no, line in enumerate(raw[start:], start=start + 1):
        row = _parse_row(line.split(","))
        if row is None:
            raise InputDataError(f"{path}:{line_no}: non-numeric entry")
        rows.append(row)
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise InputDataError(f"{path}: rows have inconsistent lengths")
    return np.asarray(rows, dtype=float), header


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str):
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputDataError(f"{path} is not valid JSON: {exc}") from exc


def config_to_dict(config: FitConfig) -> dict:
    rule = config.u_rule
    return {
        "variant": config.variant,
        "rho": config.rho,
        "u_rule": None
        if rule is None
        else {"kind": rule.kind, "value": rule.value, "relative": rule.relative},
        "v_threshold": config.v_threshold,
        "mu": config.mu,
        "r_max": config.r_max,
        "refit": config.refit,
        "max_iters": config.max_iters,
        "tol": config.tol,
        "null_tol": config.null_tol,
    }


def config_from_dict(data: dict) -> FitConfig:
    rule = data.get("u_rule")
    u_rule = None
    if rule is not None:
        if rule["kind"] == "cardinality":
            u_rule = SparsityRule.cardinality(int(rule["value"]))
        else:
            u_rule = SparsityRule.threshold(
                float(rule["value"]), bool(rule.get("relative", True))
            )
    return FitConfig(
        variant=data.get("variant", "ridge"),
        rho=data.get("rho"),
        u_rule=u_rule,
        v_threshold=data.get("v_threshold"),
        mu=data.get("mu", 1e-3),
        r_max=data.get("r_max"),
        refit=data.get("refit", True),
        max_iters=data.get("max_iters", 1000),
        tol=data.get("tol", 1e-10),
        null_tol=data.get("null_tol", 1e-4),
    )


def model_to_dict(model: FitResult, selected_rank=None, coefficient=None) -> dict:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "rank": model.rank,
        "selected_rank": selected_rank,
        "config": config_to_dict(model.config),
        "factors": [
            {
                "u": f.u.tolist(),
                "v": f.v.tolist(),
                "lambda_hat": f.lambda_hat,
                "sigma_hat": f.sigma_hat,
            }
            for f in model.factors
        ],
        "extraction_values": list(model.extraction_values),
        "gic_trace": [
            {"rank": r, "loss": lo, "criterion": cr} for r, lo, cr in model.gic_trace
        ],
    }
    if coefficient is not None:
        doc["coefficient"] = np.asarray(coefficient, dtype=float).tolist()
    return doc


def model_from_dict(data: dict) -> tuple[FitResult, int, np.ndarray]:
    """Rebuild (model, selected_rank, coefficient) from model.json."""
    version = data.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise InputDataError(
            f"unsupported model schema_version {version!r}; "
            f"expected {MODEL_SCHEMA_VERSION}"
        )
    factors = [
        UnitRankFactor(
            u=np.asarray(f["u"], dtype=float),
            v=np.asarray(f["v"], dtype=float),
            lambda_hat=float(f["lambda_hat"]),
            sigma_hat=float(f["sigma_hat"]),
        )
        for f in data.get("factors", [])
    ]
    if "coefficient" in data:
        coeff = np.asarray(data["coefficient"], dtype=float)
    elif factors:
        coeff = np.zeros((factors[0].u.size, factors[0].v.size))
        for f in factors:
            coeff += np.outer(f.u, f.v)
    else:
        raise InputDataError("model.json has neither coefficient nor factors")
    model = FitResult(
        factors=factors,
        coefficient=coeff,
        rank=len(factors),
        gic_trace=[
            (int(t["rank"]), float(t["loss"]), float(t["criterion"]))
            for t in data.get("gic_trace", [])
        ],
        config=config_from_dict(data.get("config", {})),
        extraction_values=[float(v) for v in data.get("extraction_values", [])],
    )
    selected = data.get("selected_rank")
    return model, (model.rank if selected is None else int(selected)), coeff
