"""Run reports (one JSON document per corpus) and correlation inputs."""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from latentprobe import __version__
from latentprobe.errors import InputError
from latentprobe.stats import CorrelationTable, correlation_matrix

SCHEMA_VERSION = 1
TIMING_KEY = "timings"


def new_report(corpus: dict, normalization: str, seed: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "latentprobe", "version": __version__},
        "corpus": corpus,
        "normalization": normalization,
        "seeds": {"seed": seed},
        "geometry": None,
        "lsh_bucket_stats": [],
        "retrieval": [],
        "clustering": [],
        "purity": None,
        TIMING_KEY: {},
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    text = dumps(report)
    Path(path).write_text(text)


def read_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"report not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def strip_timings(obj):
    """Copy of a report without wall-time fields, for determinism comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != TIMING_KEY}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def schema() -> dict:
    return json.loads(resources.files("latentprobe").joinpath("data/run_report.schema.json").read_text())


def validate(report: dict) -> None:
    """Raise jsonschema.ValidationError if the report does not match the shipped schema."""
    import jsonschema

    jsonschema.validate(report, schema())


# ------------------------------------------------------------ correlations

def reference_tables() -> dict:
    return json.loads(resources.files("latentprobe").joinpath("data/reference_tables.json").read_text())


PROPERTY_KEYS = ("anisotropy", "skewness", "max_hub")


def fixture_tables(method: str = "t_approx") -> dict[str, CorrelationTable]:
    """Both correlation tables recomputed from the shipped printed tables."""
    ref = reference_tables()["imagenet"]
    props = {k: ref["geometry"][k] for k in PROPERTY_KEYS}
    metrics = {}
    for ix, cols in ref["retrieval"].items():
        for name, col in cols.items():
            metrics[f"{ix}.{name}"] = col["mean_x100"]
    return {
        "properties_vs_retrieval": correlation_matrix(props, metrics, method),
        "properties_vs_lsh16": correlation_matrix(props, dict(ref["lsh16"]), method),
    }


def _report_row(rep: dict, lsh_bits: int) -> tuple[dict, dict]:
    geo = rep.get("geometry") or {}
    props = {}
    if geo:
        props = {"anisotropy": geo["anisotropy"], "skewness": geo["skewness"], "max_hub": geo["worst_case_hub"]}
    metrics = {}
    for r in rep.get("retrieval", []):
        for m in ("p_at_k", "r_at_k", "map_at_k", "mrr"):
            metrics[f"{r['index_kind']}.{m}"] = r[m]["mean"]
    for s in rep.get("lsh_bucket_stats", []):
        if s["nbits"] == lsh_bits:
            metrics["unique_buckets"] = s["unique_buckets"]
            metrics["entropy_bits"] = s["entropy_bits"]
            metrics["max_bucket_fraction"] = s["max_bucket_fraction"]
    return props, metrics


def reports_table(reports: list[dict], lsh_bits: int = 16, method: str = "t_approx") -> CorrelationTable:
    names = [r["corpus"]["name"] for r in reports]
    if len(set(names)) != len(names):
        raise InputError(f"misaligned inputs: duplicate corpus names {names}")
    rows = [_report_row(r, lsh_bits) for r in reports]
    prop_keys = set.intersection(*(set(p) for p, _ in rows)) if rows else set()
    metric_keys = set.intersection(*(set(m) for _, m in rows)) if rows else set()
    if not prop_keys or not metric_keys:
        raise InputError("reports share no common geometry/metric sections to correlate")
    props = {k: [p[k] for p, _ in rows] for k in PROPERTY_KEYS if k in prop_keys}
    metrics = {k: [m[k] for _, m in rows] for k in sorted(metric_keys)}
    return correlation_matrix(props, metrics, method)


def _read_method_csv(path) -> dict[str, dict[str, float]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "method" not in reader.fieldnames:
                raise InputError(f"{path}: needs a 'method' column")
            out = {}
            for row in reader:
                name = row.pop("method")
                if name in out:
                    raise InputError(f"{path}: duplicate method {name!r}")
                out[name] = {k: float(v) for k, v in row.items()}
    except FileNotFoundError:
        raise InputError(f"csv not found: {path}") from None
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: {exc}") from None
    return out


def csv_tables(properties_csv, metrics_csv, method: str = "t_approx") -> CorrelationTable:
    props = _read_method_csv(properties_csv)
    mets = _read_method_csv(metrics_csv)
    if set(props) != set(mets):
        raise InputError(
            f"misaligned method names: only in properties {sorted(set(props) - set(mets))}, "
            f"only in metrics {sorted(set(mets) - set(props))}"
        )
    order = list(props)
    pcols = list(next(iter(props.values()))) if order else []
    mcols = list(next(iter(mets.values()))) if order else []
    return correlation_matrix(
        {c: [props[m][c] for m in order] for c in pcols},
        {c: [mets[m][c] for m in order] for c in mcols},
        method,
    )
