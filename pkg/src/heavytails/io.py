"""Descriptors, tensor files and CSV/JSON emission.

Numbers are written in their shortest round-trip decimal form, with integral
values printed without a trailing ``.0``, so text outputs are stable across
platforms and re-parse to the identical double.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constructions import EpsilonProfile, constructed_tail, preset_profile
from .errors import DescriptorError, HeavyTailsError
from .tails_core import Distribution, ParetoSpec, log_factor_tail, two_level_tail

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "format_number",
    "to_jsonable",
    "dumps_json",
    "write_csv",
    "read_csv",
    "parse_distribution",
    "distribution_descriptor",
    "load_tensor",
    "save_tensor",
    "load_config",
]


def format_number(x) -> str:
    """Shortest round-trip representation; ``2.0 -> "2"``, ``inf -> "inf"``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_jsonable(obj):
    """Recursively convert numpy types; non-finite floats become strings."""
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return format_number(v)
        return int(v) if v.is_integer() and abs(v) < 1e16 else v
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_csv(header: Sequence[str], rows: Iterable[Sequence], stream=None) -> str:
    """Write rows with :func:`format_number` for numeric cells; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([c if isinstance(c, str) else format_number(c) for c in row])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_csv(text: str) -> tuple[list[str], list[list]]:
    """Parse CSV text; numeric-looking cells become floats."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for row in reader:
        out = []
        for cell in row:
            try:
                out.append(float(cell))
            except ValueError:
                out.append(cell)
        rows.append(out)
    return header, rows


# --------------------------------------------------------------------------- distributions


def _numbers(body: str, count: int, name: str) -> list[float]:
    try:
        vals = [float(v) for v in body.split(",") if v.strip()]
    except ValueError:
        raise DescriptorError(f"{name}: parameters must be numbers, got {body!r}") from None
    if len(vals) != count:
        raise DescriptorError(f"{name}: expected {count} parameters, got {len(vals)}")
    return vals


def _from_dict(obj: Mapping) -> Distribution:
    kind = obj.get("kind")
    try:
        if kind == "pareto":
            return ParetoSpec(float(obj["alpha"]), float(obj.get("b", 1.0)), bool(obj.get("symmetric", False)))
        if kind == "two-level":
            return two_level_tail(float(obj["alpha"]), float(obj["a"]), float(obj["b"]))
        if kind == "log-factor":
            return log_factor_tail(float(obj["alpha"]), float(obj.get("b", 1.0)))
        if kind == "constructed":
            if "preset" in obj:
                prof = preset_profile(obj["preset"], float(obj["alpha"]), float(obj["rho"]),
                                      bool(obj.get("smoothed", False)))
            else:
                prof = EpsilonProfile.from_descriptor(dict(obj))
            return constructed_tail(prof)
    except KeyError as exc:
        raise DescriptorError(f"{kind} descriptor is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, HeavyTailsError):
            raise
        raise DescriptorError(f"invalid {kind} descriptor: {exc}") from None
    raise DescriptorError(f"unknown distribution kind {kind!r}")


def parse_distribution(desc) -> Distribution:
    """Build a distribution from a dict or a compact string.

    Strings: ``pareto:alpha,b``, ``pareto_s:alpha,b`` (symmetric),
    ``two-level:alpha,a,b``, ``log-factor:alpha,b`` and
    ``constructed:preset,alpha,rho[,smoothed]`` with preset ``inverse`` or ``sqrt``.
    """
    if isinstance(desc, Mapping):
        return _from_dict(desc)
    if not isinstance(desc, str) or ":" not in desc:
        raise DescriptorError(f"cannot parse distribution descriptor {desc!r}")
    kind, body = desc.split(":", 1)
    kind = kind.strip()
    if kind in ("pareto", "pareto_s"):
        alpha, b = _numbers(body, 2, kind)
        return _from_dict({"kind": "pareto", "alpha": alpha, "b": b, "symmetric": kind == "pareto_s"})
    if kind == "two-level":
        alpha, a, b = _numbers(body, 3, kind)
        return _from_dict({"kind": kind, "alpha": alpha, "a": a, "b": b})
    if kind == "log-factor":
        alpha, b = _numbers(body, 2, kind)
        return _from_dict({"kind": kind, "alpha": alpha, "b": b})
    if kind == "constructed":
        parts = [p.strip() for p in body.split(",")]
        if len(parts) not in (3, 4):
            raise DescriptorError("constructed: expected preset,alpha,rho[,smoothed]")
        alpha, rho = _numbers(",".join(parts[1:3]), 2, kind)
        smoothed = len(parts) == 4 and parts[3].lower() in ("1", "true", "smoothed")
        return _from_dict({"kind": kind, "preset": parts[0], "alpha": alpha, "rho": rho, "smoothed": smoothed})
    raise DescriptorError(f"unknown distribution kind {kind!r}")


def distribution_descriptor(dist: Distribution) -> dict:
    return dist.descriptor()


# --------------------------------------------------------------------------- tensors


def load_tensor(path):
    """Read a tensor file: JSON header ``{d, n, layout}`` with ``entries`` or a ``data_file`` sidecar."""
    from .chaos import CoefficientTensor

    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DescriptorError(f"cannot read tensor file {path}: {exc}") from None
    if not isinstance(header, dict):
        raise DescriptorError("tensor file must hold a JSON object")
    if header.get("layout", "row-major") != "row-major":
        raise DescriptorError("only row-major layout is supported")
    try:
        d, n = int(header["d"]), int(header["n"])
    except (KeyError, TypeError, ValueError):
        raise DescriptorError("tensor header needs integer d and n") from None
    if "entries" in header:
        data = np.asarray(header["entries"], dtype=float).ravel()
    elif "data_file" in header:
        side = path.parent / header["data_file"]
        try:
            data = np.fromfile(side, dtype="<f8")
        except OSError as exc:
            raise DescriptorError(f"cannot read sidecar {side}: {exc}") from None
    else:
        raise DescriptorError("tensor file needs 'entries' or 'data_file'")
    return CoefficientTensor(d, n, data)


def save_tensor(tensor, path, sidecar: bool = False) -> None:
    path = Path(path)
    header = {"d": tensor.d, "n": tensor.n, "layout": "row-major"}
    flat = np.asarray(tensor.entries, dtype=float).ravel()
    if sidecar:
        side = path.with_suffix(".bin")
        flat.astype("<f8").tofile(side)
        header["data_file"] = side.name
    else:
        header["entries"] = flat
    path.write_text(dumps_json(header))


def load_config(path) -> dict:
    """Read a JSON or TOML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise DescriptorError(f"cannot parse config {path}: {exc}") from None
