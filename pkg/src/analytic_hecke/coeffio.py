"""Reading, writing and fetching exact q-expansion coefficients.

A coefficient file is a JSON object::

    {
     "level": 2,
     "weight": 8,
     "atkin_lehner_sign": 1,
     "coefficients": [
      "1",
      "-8",
      ...
     ]
    }

Coefficients are decimal strings (integers or rationals), a_1 first, so that
consumers with 64-bit integers do not overflow.  The writer puts one
coefficient per line.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import NetworkError, NotFound, NotNormalized, ParseError
from .qexp import EigenformHandle, from_coefficients

CACHE_ENV = "HECKE_EIGEN_CACHE"
DEFAULT_ENDPOINT = "https://www.lmfdb.org/api"
TIMEOUT = 30

Number = Union[int, Fraction]


@dataclass(frozen=True)
class CoefficientFile:
    level: int
    weight: int
    coefficients: tuple[Number, ...] = field(repr=False)
    atkin_lehner_sign: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if not self.coefficients:
            raise ParseError("coefficient list is empty")
        if self.coefficients[0] != 1:
            raise NotNormalized(f"a_1 = {self.coefficients[0]}, expected 1")
        if self.level < 1 or self.weight < 1:
            raise ParseError("level and weight must be positive")
        if self.atkin_lehner_sign not in (None, 1, -1):
            raise ParseError("atkin_lehner_sign must be 1 or -1")

    def to_handle(self, source: str = "file") -> EigenformHandle:
        return from_coefficients(self.level, self.weight, self.coefficients,
                                 self.atkin_lehner_sign, source=source, label=self.label)

    def dumps(self) -> str:
        head = {"level": self.level, "weight": self.weight}
        if self.atkin_lehner_sign is not None:
            head["atkin_lehner_sign"] = self.atkin_lehner_sign
        if self.label is not None:
            head["label"] = self.label
        lines = ["{"]
        lines += [f" {json.dumps(key)}: {json.dumps(val)}," for key, val in head.items()]
        lines.append(' "coefficients": [')
        body = [f"  {json.dumps(_render(c))}" for c in self.coefficients]
        lines.append(",\n".join(body))
        lines.append(" ]")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _render(c: Number) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _parse_number(text, index: int) -> Number:
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise ParseError(f"coefficient a_{index} is not a string: {text!r}")
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"coefficient a_{index} = {text!r} is not an exact number") from exc
    return value.numerator if value.denominator == 1 else value


def _require_int(obj: dict, key: str) -> int:
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ParseError(f"field {key!r} must be an integer, got {val!r}")
    return val


def parse_coefficients(text: str) -> CoefficientFile:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    level = _require_int(obj, "level")
    weight = _require_int(obj, "weight")
    raw = obj.get("coefficients")
    if not isinstance(raw, list) or not raw:
        raise ParseError("'coefficients' must be a non-empty list")
    coeffs = tuple(_parse_number(c, i + 1) for i, c in enumerate(raw))
    sign = obj.get("atkin_lehner_sign")
    if sign is not None and (isinstance(sign, bool) or sign not in (1, -1)):
        raise ParseError(f"atkin_lehner_sign must be 1 or -1, got {sign!r}")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError("label must be a string")
    return CoefficientFile(level, weight, coeffs, sign, label)


def ingest_coefficients(path: Union[str, Path]) -> CoefficientFile:
    """Read and validate a coefficient file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8 text") from exc
    return parse_coefficients(text)


def write_coefficients(cf: CoefficientFile, path: Union[str, Path]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(cf.dumps(), encoding="utf-8")
    os.replace(tmp, path)


# -- remote ------------------------------------------------------------------

def cache_dir(override: Optional[Union[str, Path]] = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "analytic_hecke"


def _cache_path(directory: Path, label: str) -> Path:
    safe = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in label)
    return directory / f"{safe}.json"


def fetch_remote_coefficients(level: int, weight: int, label: str,
                              endpoint_url: str = DEFAULT_ENDPOINT,
                              cache: Optional[Union[str, Path]] = None) -> CoefficientFile:
    """Coefficients of a rational newform from an LMFDB-style REST endpoint.

    Queries ``{endpoint}/mf_newforms/?label=...&_format=json`` and reads the
    first record of ``data``: its ``traces`` (a_1 first, possibly preceded by
    a_0 = 0), ``level``, ``weight``, ``dim`` and ``fricke_eigenval``.  A valid
    result is written to the cache; later calls are served from there with
    no network access.
    """
    directory = cache_dir(cache)
    cached = _cache_path(directory, label)
    if cached.exists():
        cf = ingest_coefficients(cached)
        _check_request(cf, level, weight)
        return cf

    query = urllib.parse.urlencode({"label": label, "_format": "json"})
    url = f"{endpoint_url.rstrip('/')}/mf_newforms/?{query}"
    try:
        with urllib.request.urlopen(url, timeout=TIMEOUT) as resp:
            payload = resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        if exc.code == 404:
            raise NotFound(f"no newform with label {label!r}") from exc
        raise NetworkError(f"request to {url} failed: HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkError(f"request to {url} failed: {exc}") from exc

    cf = _from_record(payload, label)
    _check_request(cf, level, weight)
    directory.mkdir(parents=True, exist_ok=True)
    write_coefficients(cf, cached)
    return cf


def _from_record(payload: str, label: str) -> CoefficientFile:
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"endpoint returned invalid JSON: {exc}") from exc
    data = obj.get("data") if isinstance(obj, dict) else None
    if not isinstance(data, list):
        raise ParseError("endpoint response has no 'data' list")
    if not data:
        raise NotFound(f"no newform with label {label!r}")
    rec = data[0]
    if not isinstance(rec, dict):
        raise ParseError("newform record is not an object")
    if rec.get("dim", 1) != 1:
        raise ParseError(f"newform {label} has dimension {rec.get('dim')}; only rational newforms are supported")
    traces = rec.get("traces")
    if not isinstance(traces, list) or not traces:
        raise ParseError("newform record has no 'traces'")
    coeffs = [_parse_number(t, i) for i, t in enumerate(traces)]
    if coeffs[0] == 0 and len(coeffs) > 1:
        coeffs = coeffs[1:]  # some sources list a_0
    level = _require_int(rec, "level")
    weight = _require_int(rec, "weight")
    sign = rec.get("fricke_eigenval")
    if sign is not None and sign not in (1, -1):
        raise ParseError(f"fricke_eigenval must be 1 or -1, got {sign!r}")
    return CoefficientFile(level, weight, tuple(coeffs), sign, label)


def _check_request(cf: CoefficientFile, level: int, weight: int) -> None:
    if (cf.level, cf.weight) != (level, weight):
        raise ParseError(
            f"requested level {level} weight {weight}, got level {cf.level} weight {cf.weight}")


def coefficients_from_sequence(level: int, weight: int, coeffs: Sequence[Number],
                               sign: Optional[int] = None, label: Optional[str] = None) -> CoefficientFile:
    return CoefficientFile(level, weight, tuple(coeffs), sign, label)
