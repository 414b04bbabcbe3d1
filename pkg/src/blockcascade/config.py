"""Run configuration: defaults, validation and the flat ``key = value`` file."""
from dataclasses import dataclass, fields, replace, asdict

__all__ = ["Config", "ConfigError", "load_config", "dump_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    block_size: int = 8
    advance: int = 1
    rho: float = 0.01
    C1: float = 0.001
    C2: float = 0.0005
    vote_threshold: float = 0.90
    reinit_area: float = 0.70
    reinit_window: int = 15
    training_frames: int = 200
    variance_floor: float = 1e-4
    gate: float = 30.0
    min_blob_area: int = 15
    em_max_iter: int = 50
    em_tol: float = 1e-6

    def __post_init__(self):
        problems = []
        if self.block_size < 1:
            problems.append("block_size must be >= 1")
        if not 1 <= self.advance <= max(self.block_size, 1):
            problems.append("advance must lie in [1, block_size]")
        if not 0.0 < self.rho < 1.0:
            problems.append("rho must lie in (0, 1)")
        if not 0.0 <= self.C1 <= 2.0:
            problems.append("C1 must lie in [0, 2]")
        if not 0.0 <= self.C2 <= self.C1:
            problems.append("C2 must lie in [0, C1]")
        if not 0.0 < self.vote_threshold <= 1.0:
            problems.append("vote_threshold must lie in (0, 1]")
        if not 0.0 < self.reinit_area < 1.0:
            problems.append("reinit_area must lie in (0, 1)")
        if self.reinit_window < 1:
            problems.append("reinit_window must be >= 1")
        if self.training_frames < 2:
            problems.append("training_frames must be >= 2")
        if not self.variance_floor > 0.0:
            problems.append("variance_floor must be > 0")
        if not self.gate > 0.0:
            problems.append("gate must be > 0")
        if self.min_blob_area < 1:
            problems.append("min_blob_area must be >= 1")
        if self.em_max_iter < 1:
            problems.append("em_max_iter must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key, raw):
    kind = _TYPES[key]
    try:
        if kind in (int, "int"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text, base=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return replace(base or Config(), **values)


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config(fh.read(), base)


def dump_config(cfg):
    return "".join(f"{k} = {v}\n" for k, v in asdict(cfg).items())
