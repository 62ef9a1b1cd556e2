"""Bit-exact file formats: JSON for structured inputs, CSV for tables.

Floats are written with 17 significant digits, which round-trips every
finite IEEE-754 double; non-finite values are rejected at the boundary
in both directions.
"""

import csv
import json
import math

import numpy as np

from .errors import ParseError
from .linalg import JointDecomposition
from .rates import PowerConfig, TwrcInstance

__all__ = [
    "format_float",
    "matrix_to_obj",
    "obj_to_matrix",
    "save_matrix",
    "load_matrix",
    "save_channel",
    "load_channel",
    "save_decomposition",
    "write_csv",
    "read_csv",
    "read_sweep_csv",
    "read_region_csv",
]


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def matrix_to_obj(M) -> dict:
    """Row-major split into real and imaginary entry lists."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim = {M.ndim}")
    if M.size and not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    flat = M.reshape(-1)
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def _entries(obj, key: str, count: int, field: str):
    try:
        vals = obj[key]
    except (KeyError, TypeError):
        raise ParseError(f"{field}: missing key {key!r}") from None
    if not isinstance(vals, list):
        raise ParseError(f"{field}.{key}: expected a list")
    if len(vals) != count:
        raise ParseError(
            f"{field}.{key}: expected {count} entries, got {len(vals)}"
        )
    out = np.empty(count, dtype=float)
    for i, v in enumerate(vals):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{field}.{key}[{i}]: not a number: {v!r}")
        if not math.isfinite(v):
            raise ParseError(f"{field}.{key}[{i}]: non-finite value {v!r}")
        out[i] = float(v)
    return out


def obj_to_matrix(obj, field: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        raise ParseError(f"{field}: expected an object")
    dims = {}
    for key in ("rows", "cols"):
        v = obj.get(key)
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ParseError(f"{field}.{key}: expected a nonnegative integer")
        dims[key] = v
    n = dims["rows"] * dims["cols"]
    re = _entries(obj, "re", n, field)
    im = _entries(obj, "im", n, field)
    return (re + 1j * im).reshape(dims["rows"], dims["cols"])


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror or e}") from None


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, allow_nan=False, indent=1)
        fh.write("\n")


def save_matrix(path, M) -> None:
    _dump_json(path, matrix_to_obj(M))


def load_matrix(path) -> np.ndarray:
    return obj_to_matrix(_load_json(path), field=str(path))


_POWER_KEYS = ("P_A", "P_B", "P_R", "N0")


def save_channel(path, ch: TwrcInstance) -> None:
    obj = {
        "H_AR": matrix_to_obj(ch.H_AR),
        "H_BR": matrix_to_obj(ch.H_BR),
        "H_RA": matrix_to_obj(ch.H_RA),
        "H_RB": matrix_to_obj(ch.H_RB),
    }
    for key in _POWER_KEYS:
        obj[key] = getattr(ch.power, key)
    _dump_json(path, obj)


def load_channel(path) -> TwrcInstance:
    """Channel instance from JSON; downlinks default to transposed uplinks
    and powers to 1."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    mats = {}
    for key in ("H_AR", "H_BR"):
        if key not in obj:
            raise ParseError(f"{path}: missing key {key!r}")
        mats[key] = obj_to_matrix(obj[key], field=key)
    for key in ("H_RA", "H_RB"):
        if key in obj:
            mats[key] = obj_to_matrix(obj[key], field=key)
    mats.setdefault("H_RA", mats["H_AR"].T.copy())
    mats.setdefault("H_RB", mats["H_BR"].T.copy())
    powers = {}
    for key in _POWER_KEYS:
        v = obj.get(key, 1.0)
        if isinstance(v, bool) or not isinstance(v, (int, float)) \
                or not math.isfinite(v):
            raise ParseError(f"{key}: expected a finite number")
        powers[key] = float(v)
    try:
        return TwrcInstance(power=PowerConfig(**powers), **mats)
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from None


def save_decomposition(path, jd: JointDecomposition) -> None:
    obj = {
        "k": jd.k, "l": jd.l, "d_A": jd.d_A, "d_B": jd.d_B,
        "lambdas": [float(x) for x in jd.lambdas],
        "U": matrix_to_obj(jd.U),
        "D_A": matrix_to_obj(jd.D_A),
        "D_B": matrix_to_obj(jd.D_B),
        "G_A": matrix_to_obj(jd.G_A),
        "G_B": matrix_to_obj(jd.G_B),
    }
    _dump_json(path, obj)


def _cell(v) -> str:
    if isinstance(v, bool):
        raise ValueError("boolean cells are not part of any schema")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite cell {v!r}")
        return format_float(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    """Header and raw string rows; schema-aware readers add types."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: empty file") from None
            return tuple(header), [tuple(r) for r in reader]
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror or e}") from None


def _typed(path, header, rows, schema):
    expected = tuple(name for name, _ in schema)
    if header != expected:
        raise ParseError(f"{path}: header {header} != {expected}")
    out = []
    for ln, row in enumerate(rows, start=2):
        if len(row) != len(schema):
            raise ParseError(f"{path}:{ln}: expected {len(schema)} cells")
        vals = []
        for (name, typ), cell in zip(schema, row):
            if typ is str:
                vals.append(cell)
                continue
            try:
                v = typ(cell)
            except ValueError:
                raise ParseError(f"{path}:{ln}: field {name!r}: "
                                 f"bad {typ.__name__} {cell!r}") from None
            if typ is float and not math.isfinite(v):
                raise ParseError(f"{path}:{ln}: field {name!r}: non-finite")
            vals.append(v)
        out.append(tuple(vals))
    return out


_SWEEP_SCHEMA = (
    ("scheme", str), ("snr_db", float), ("n_a", int), ("n_b", int),
    ("n_r", int), ("mean_sum_rate", float), ("stderr", float),
    ("trials", int), ("seed", int),
)
_REGION_SCHEMA = (("r_a", float), ("r_b", float), ("scheme", str))


def read_sweep_csv(path):
    header, rows = read_csv(path)
    return _typed(path, header, rows, _SWEEP_SCHEMA)


def read_region_csv(path):
    header, rows = read_csv(path)
    return _typed(path, header, rows, _REGION_SCHEMA)
