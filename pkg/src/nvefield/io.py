"""Configuration loading, dataset ingestion and reproducible output records."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import numbers
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, DataError
from .constants import ChargeDensity
from .sensitivity import ProtocolParams
from .spectrum import PRESETS, BroadeningParams, SampleParams, Spectrum

SECTIONS = ("preset", "sample", "broadening", "protocol", "seeds", "output_dir")
DEFAULT_OUTPUT_DIR = "nvefield_out"


@dataclass(frozen=True)
class RunConfig:
    sample: SampleParams = SampleParams()
    broadening: BroadeningParams = BroadeningParams()
    protocol: ProtocolParams = ProtocolParams()
    seeds: tuple = (0,)
    output_dir: str = DEFAULT_OUTPUT_DIR
    preset: str | None = None

    def snapshot(self) -> dict:
        """Plain-data view used for digests and run records."""
        s = asdict(self.sample)
        s["rho_c"] = self.sample.rho_c.value_ppm
        s["hyperfine_shifts"] = list(self.sample.hyperfine_shifts)
        return {
            "preset": self.preset,
            "sample": s,
            "broadening": asdict(self.broadening),
            "protocol": asdict(self.protocol),
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
        }

    def digest(self) -> str:
        return sha256_text(canonical_json(self.snapshot()))

    @property
    def seed(self) -> int:
        return int(self.seeds[0])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- configuration ----------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool) and math.isfinite(v)


def _check_types(section: str, cls, values: dict) -> dict:
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, v in values.items():
        name = f"{section}.{key}"
        if key not in known:
            raise ConfigError(f"{name}: unknown key")
        default = known[key].default
        if isinstance(default, tuple):
            if not isinstance(v, list) or not all(_is_number(x) for x in v):
                raise ConfigError(f"{name}: expected a list of numbers")
            v = tuple(float(x) for x in v)
        elif default is None:
            if v is not None and not _is_number(v):
                raise ConfigError(f"{name}: expected a number or null")
        elif not _is_number(v):
            raise ConfigError(f"{name}: expected a number, got {v!r}")
        if key == "rho_c" and v < 0:
            raise ConfigError(f"{name}: must be positive")
        out[key] = v
    return out


def _build(section: str, base, values: dict):
    """Apply overrides to a validated dataclass, naming the key that breaks an invariant."""
    try:
        return replace(base, **values)
    except ValueError as exc:
        for key, v in values.items():
            try:
                replace(base, **{key: v})
            except ValueError as single:
                raise ConfigError(f"{section}.{key}: {single}") from None
        raise ConfigError(f"{section}: {exc}") from None


def config_from_dict(doc: dict | None) -> RunConfig:
    """Validate a parsed document and fill in defaults. Raises ConfigError."""
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"{key}: unknown key")
    for key in ("sample", "broadening", "protocol"):
        if doc.get(key) is not None and not isinstance(doc[key], dict):
            raise ConfigError(f"{key}: expected a mapping")

    preset = doc.get("preset")
    base_sample, base_b = SampleParams(), BroadeningParams()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}, choose from {sorted(PRESETS)}")
        base_b = PRESETS[preset].broadening
        base_sample = replace(base_sample, epsilon_c=PRESETS[preset].epsilon_c)

    sample_vals = _check_types("sample", SampleParams, doc.get("sample") or {})
    if "rho_c" in sample_vals:
        sample_vals["rho_c"] = ChargeDensity(float(sample_vals["rho_c"]))
    sample = _build("sample", base_sample, sample_vals)
    broadening = _build("broadening", base_b, _check_types("broadening", BroadeningParams, doc.get("broadening") or {}))
    protocol = _build("protocol", ProtocolParams(), _check_types("protocol", ProtocolParams, doc.get("protocol") or {}))

    seeds = doc.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds)):
        raise ConfigError("seeds: expected a non-empty list of non-negative integers")
    out_dir = doc.get("output_dir", DEFAULT_OUTPUT_DIR)
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output_dir: expected a non-empty string")
    return RunConfig(sample, broadening, protocol, tuple(seeds), out_dir, preset)


def load_config(path) -> RunConfig:
    """Read a YAML run configuration. Missing keys take their defaults."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{p}: parse error{where}: {problem}") from None
    return config_from_dict(doc)


# -- CSV output -------------------------------------------------------------


def format_value(v) -> str:
    """Shortest repr that round-trips floats exactly."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (numbers.Integral, np.integer)):
        return str(int(v))
    if isinstance(v, (numbers.Real, np.floating)):
        return repr(float(v))
    return str(v)


def header_lines(config: RunConfig | None, seed: int | None, extra: dict | None = None) -> list[str]:
    lines = [f"nvefield {__version__}"]
    lines.append(f"config_sha256 {config.digest() if config is not None else 'none'}")
    lines.append(f"seed {seed if seed is not None else 'none'}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} {v}")
    return lines


def write_csv(path, columns: list[str], rows, config: RunConfig | None = None, seed: int | None = None,
              extra: dict | None = None) -> Path:
    """Write a CSV with a '#' comment header. Output depends only on the arguments."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        for line in header_lines(config, seed, extra):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return p


def write_json(path, obj, config: RunConfig | None = None, seed: int | None = None) -> Path:
    """JSON has no comments, so the header travels as a '_header' entry."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    doc = {"_header": header_lines(config, seed), **obj}
    p.write_text(json.dumps(to_plain(doc), indent=2, sort_keys=True) + "\n")
    return p


def to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def spectra_rows(items):
    for detuning, spec in items:
        for w, s in zip(spec.mw_offset, spec.signal):
            yield (float(detuning), float(w), float(s))


SPECTRA_COLUMNS = ["detuning_ghz", "mw_offset_mhz", "signal"]
SPLITTING_COLUMNS = ["detuning_ghz", "pi_perp_mhz", "pi_perp_err_mhz"]


# -- ingestion --------------------------------------------------------------


def read_table(path, required: list[str]):
    """Yield (line number, {column: float}) for data rows, skipping '#' comments."""
    p = Path(path)
    try:
        fh = open(p, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {p}: {exc.strerror}") from None
    with fh:
        lines = ((i, line) for i, line in enumerate(fh, start=1) if line.strip() and not line.lstrip().startswith("#"))
        try:
            hline, header = next(lines)
        except StopIteration:
            raise DataError(f"{p}: no header row") from None
        cols = [c.strip() for c in next(csv.reader([header]))]
        missing = [c for c in required if c not in cols]
        if missing:
            raise DataError(f"{p}:{hline}: missing columns {missing}")
        idx = [cols.index(c) for c in required]
        for lineno, line in lines:
            cells = next(csv.reader([line]))
            if len(cells) != len(cols):
                raise DataError(f"{p}:{lineno}: expected {len(cols)} fields, got {len(cells)}")
            try:
                vals = [float(cells[i]) for i in idx]
            except ValueError:
                raise DataError(f"{p}:{lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{p}:{lineno}: non-finite value")
            yield lineno, dict(zip(required, vals))


def ingest_spectra(path) -> list[tuple[float, Spectrum]]:
    """Group rows by detuning into Spectrum objects, sorted canonically."""
    groups: dict[float, list] = {}
    for lineno, r in read_table(path, SPECTRA_COLUMNS):
        groups.setdefault(r["detuning_ghz"], []).append((r["mw_offset_mhz"], r["signal"], lineno))
    if not groups:
        raise DataError(f"{path}: no data rows")
    out = []
    for d in sorted(groups):
        rows = sorted(groups[d])
        w = np.array([r[0] for r in rows])
        dup = np.nonzero(np.diff(w) == 0)[0]
        if dup.size:
            a, b = rows[dup[0]][2], rows[dup[0] + 1][2]
            raise DataError(f"{path}: duplicate mw_offset {w[dup[0]]!r} at detuning {d!r} (lines {min(a, b)} and {max(a, b)})")
        if w.size < 3:
            raise DataError(f"{path}: detuning {d!r} has fewer than 3 points")
        out.append((d, Spectrum(w, np.array([r[1] for r in rows]))))
    return out


def ingest_splittings(path):
    """(detunings, pi_perp, pi_perp_err) arrays from a splitting table."""
    rows = sorted((r["detuning_ghz"], r["pi_perp_mhz"], r["pi_perp_err_mhz"], n)
                  for n, r in read_table(path, SPLITTING_COLUMNS))
    if len(rows) < 3:
        raise DataError(f"{path}: need at least 3 splittings")
    for (d0, *_), (d1, _, _, n) in zip(rows, rows[1:]):
        if d0 == d1:
            raise DataError(f"{path}:{n}: duplicate detuning {d1!r}")
    for d, _, e, n in rows:
        if not e > 0:
            raise DataError(f"{path}:{n}: pi_perp_err_mhz must be positive")
    arr = np.array([r[:3] for r in rows])
    return arr[:, 0], arr[:, 1], arr[:, 2]


# -- run records ------------------------------------------------------------


@dataclass
class RunRecord:
    command: str
    config: dict
    seeds: list
    version: str = __version__
    wall_clock_s: float = 0.0
    outputs: dict = field(default_factory=dict)  # relative path -> sha256

    def add(self, path, root) -> None:
        self.outputs[os.path.relpath(path, root)] = sha256_file(path)

    def write(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(to_plain(asdict(self)), indent=2, sort_keys=True) + "\n")
        return p
