"""Line-oriented key = value configuration files.

Zero-dependency format: one ``key = value`` pair per line, ``#`` starts a
comment, blank lines ignored.  Dotted keys (init.shape, init.r, ...)
describe the initial interface.  All randomness in a run flows from the
single integer ``seed``.
"""

from __future__ import annotations

from typing import Optional

from .shapes import Annulus, Disk, MultiDisk, PerturbedDisk, ShapeError
from .stepper import SimConfig


class ConfigError(ValueError):
    """Config file problem; carries the offending line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def parse_kv_file(path: str) -> dict:
    """Parse a key = value file into {key: (string_value, line_number)}."""
    pairs: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise ConfigError(f"empty key or value in {line!r}", lineno)
            if key in pairs:
                raise ConfigError(f"duplicate key '{key}'", lineno)
            pairs[key] = (value, lineno)
    return pairs


class _KV:
    def __init__(self, pairs: dict, path: str):
        self.pairs = pairs
        self.path = path
        self.used: set = set()

    def _fetch(self, key, convert, default=...):
        if key not in self.pairs:
            if default is ...:
                raise ConfigError(f"missing required key '{key}' in {self.path}")
            return default
        value, lineno = self.pairs[key]
        self.used.add(key)
        try:
            return convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", lineno) from exc

    def real(self, key, default=...):
        return self._fetch(key, float, default)

    def integer(self, key, default=...):
        return self._fetch(key, lambda s: int(s, 10), default)

    def text(self, key, default=...):
        return self._fetch(key, str, default)

    def real_list(self, key, default=...):
        return self._fetch(key, lambda s: [float(tok) for tok in s.split(",")], default)

    def int_list(self, key, default=...):
        return self._fetch(key, lambda s: [int(tok, 10) for tok in s.split(",")], default)

    def reject_unknown(self):
        unknown = set(self.pairs) - self.used
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key '{key}'", self.pairs[key][1])


def _parse_shape(kv: _KV, seed: int):
    shape = kv.text("init.shape")
    line = kv.pairs["init.shape"][1]
    try:
        if shape == "disk":
            return Disk(kv.real("init.cx"), kv.real("init.cy"), kv.real("init.r"))
        if shape == "disks":
            cx = kv.real_list("init.cx")
            cy = kv.real_list("init.cy")
            r = kv.real_list("init.r")
            if not len(cx) == len(cy) == len(r):
                raise ConfigError("init.cx, init.cy, init.r must have equal lengths", line)
            return MultiDisk(tuple(zip(cx, cy)), tuple(r))
        if shape == "annulus":
            return Annulus(
                kv.real("init.cx"),
                kv.real("init.cy"),
                kv.real("init.r_inner"),
                kv.real("init.r_outer"),
            )
        if shape == "perturbed_disk":
            return PerturbedDisk(
                kv.real("init.cx"),
                kv.real("init.cy"),
                kv.real("init.r"),
                kv.real("init.amplitude"),
                tuple(kv.int_list("init.modes", [2, 3, 4, 5])),
                seed,
            )
    except ShapeError as exc:
        raise ConfigError(str(exc), line) from exc
    raise ConfigError(
        f"unknown init.shape '{shape}' (disk, disks, annulus, perturbed_disk)", line
    )


def sim_config_from_file(path: str, out_dir: Optional[str] = None) -> SimConfig:
    """Build and validate a SimConfig from a config file."""
    kv = _KV(parse_kv_file(path), path)
    seed = kv.integer("seed", 0)
    shape = _parse_shape(kv, seed)
    try:
        cfg = SimConfig(
            epsilon=kv.real("epsilon"),
            A=kv.real("A"),
            t_end=kv.real("t_end"),
            nx=kv.integer("nx"),
            ny=kv.integer("ny"),
            lx=kv.real("lx"),
            ly=kv.real("ly"),
            init=shape,
            dt=kv.real("dt", None),
            target_mass=kv.real("target_mass", 1.0),
            output_every=kv.integer("output_every", 50),
            solver=kv.text("solver", "spectral"),
            seed=seed,
            snapshot_format=kv.text("snapshot_format", "text"),
            out_dir=out_dir if out_dir is not None else kv.text("out_dir", None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    kv.reject_unknown()
    if cfg.snapshot_format not in ("text", "binary"):
        raise ConfigError(f"snapshot_format must be text or binary, got '{cfg.snapshot_format}'")
    return cfg


def oracle_config_from_file(path: str) -> dict:
    """Parse an oracle run description (kind = circles | front)."""
    kv = _KV(parse_kv_file(path), path)
    kind = kv.text("kind")
    if kind == "circles":
        spec = {
            "kind": "circles",
            "d": kv.integer("d", 2),
            "radii": kv.real_list("radii"),
            "dt": kv.real("dt"),
            "t_end": kv.real("t_end"),
        }
        if spec["d"] not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if any(r <= 0.0 for r in spec["radii"]):
            raise ConfigError("all radii must be positive")
        if spec["dt"] <= 0.0 or spec["t_end"] < 0.0:
            raise ConfigError("need dt > 0 and t_end >= 0")
        kv.reject_unknown()
        return spec
    if kind == "front":
        spec = {
            "kind": "front",
            "shape": kv.text("shape", "ellipse"),
            "cx": kv.real("cx", 0.0),
            "cy": kv.real("cy", 0.0),
            "a": kv.real("a"),
            "b": kv.real("b", None),
            "n_nodes": kv.integer("n_nodes", 256),
            "dt": kv.real("dt"),
            "t_end": kv.real("t_end"),
            "store_every": kv.integer("store_every", 0),
        }
        if spec["shape"] not in ("circle", "ellipse"):
            raise ConfigError("shape must be circle or ellipse")
        if spec["shape"] == "ellipse" and spec["b"] is None:
            raise ConfigError("missing required key 'b' for an ellipse front")
        if spec["a"] <= 0.0 or (spec["b"] is not None and spec["b"] <= 0.0):
            raise ConfigError("semi-axes must be positive")
        if spec["n_nodes"] < 8:
            raise ConfigError("n_nodes must be at least 8")
        if spec["dt"] <= 0.0 or spec["t_end"] < 0.0:
            raise ConfigError("need dt > 0 and t_end >= 0")
        kv.reject_unknown()
        return spec
    raise ConfigError(f"unknown oracle kind '{kind}' (circles or front)")
