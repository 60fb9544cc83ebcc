import logging
import math
import os
from pathlib import Path

import yaml

from .criteria import DIVERGENT, TailStatement
from .errors import ConfigError, WCEError
from .measure import AtomicSpace, Cell, NonAtomicPanel, SubAlgebra, Weight

logger = logging.getLogger(__name__)

VALID_LOG_LEVELS = {"debug", "info", "warning", "error"}

# Config file path: override via env var WCE_CONFIG_PATH, default wce_config.json
CONFIG_PATH = Path(os.environ.get("WCE_CONFIG_PATH", "wce_config.json"))


class AnalysisConfig:
    """One analysis: space, partition, weights and exponents."""

    def __init__(self):
        # Space and sub-algebra
        self.space: AtomicSpace | None = None
        self.algebra: SubAlgebra | None = None

        # Weights (f only feeds the condexp command)
        self.u: Weight | None = None
        self.w: Weight | None = None
        self.f: Weight | None = None

        # Analysis
        self.p: float | None = None
        self.q: float | None = None
        self.terms: int | None = None
        self.tail_bound: float | None = None
        self.compact_tail: TailStatement | None = None
        self.oracle: bool = False

        # Norm-ascent oracle
        self.ascent_restarts: int = 20
        self.ascent_seed: int = 20240611
        self.ascent_max_iter: int = 300

        self.log_level: str = "warning"
        self.source: str = ""

    @property
    def is_finite_space(self) -> bool:
        return self.space is not None


_config = AnalysisConfig()


def _require(section: dict, key: str, where: str):
    if not isinstance(section, dict) or key not in section:
        raise ConfigError(f"{where}.{key} is required")
    return section[key]


def _number(value, where: str, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if kind is int and isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    try:
        number = kind(value)
    except (TypeError, ValueError, OverflowError):
        raise ConfigError(f"{where} must be a number, got {value!r}") from None
    if kind is float and math.isnan(number):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return number


def _flag(entry: dict, key: str, where: str) -> bool:
    value = entry.get(key, False)
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be true or false, got {value!r}")
    return value


def _parse_space(cfg: AnalysisConfig, raw) -> None:
    """Parse the space section: cells, blocks (the partition) and panels."""
    if not isinstance(raw, dict):
        raise ConfigError("space must be a mapping")
    cells_raw = _require(raw, "cells", "space")
    if not isinstance(cells_raw, list) or not cells_raw:
        raise ConfigError("space.cells must be a nonempty list")
    cells = []
    for i, entry in enumerate(cells_raw):
        where = f"space.cells[{i}]"
        cell_id = _number(_require(entry, "id", where), f"{where}.id", int)
        mass = _number(_require(entry, "mass", where), f"{where}.mass")
        try:
            cells.append(Cell(cell_id, mass))
        except WCEError as e:
            raise ConfigError(f"{where}.mass: {e}") from None
    try:
        cfg.space = AtomicSpace(tuple(cells))
    except WCEError as e:
        raise ConfigError(f"space.cells: {e}") from None

    panels = []
    for i, entry in enumerate(raw.get("panels") or []):
        where = f"space.panels[{i}]"
        panels.append(NonAtomicPanel(
            id=str(_require(entry, "id", where)),
            u_support_positive=_flag(entry, "u_support", where),
            w_support_positive=_flag(entry, "w_support", where),
        ))

    blocks_raw = raw.get("blocks")
    try:
        if blocks_raw is None:
            cfg.algebra = SubAlgebra.discrete(cfg.space)
            cfg.algebra = SubAlgebra(cfg.algebra.blocks, tuple(panels))
        else:
            groups = [[_number(cid, f"space.blocks[{i}]", int) for cid in block] for i, block in enumerate(blocks_raw)]
            cfg.algebra = SubAlgebra.from_partition(cfg.space, groups, panels)
    except WCEError as e:
        raise ConfigError(f"space.blocks: {e}") from None


def _parse_weight(raw, where: str, space: AtomicSpace) -> Weight:
    """A weight is {type: table, values: {...} | [...]} or {type: expr, formula: "..."}."""
    kind = str(_require(raw, "type", where)).lower()
    try:
        if kind == "expr":
            return Weight.expr(str(_require(raw, "formula", where)))
        if kind == "table":
            values = _require(raw, "values", where)
            if isinstance(values, list):
                return Weight.from_values(space, [_number(v, f"{where}.values[{i}]") for i, v in enumerate(values)])
            if isinstance(values, dict):
                return Weight.table({
                    _number(k, f"{where}.values key", int): _number(v, f"{where}.values[{k}]")
                    for k, v in values.items()
                })
            raise ConfigError(f"{where}.values must be a list or a mapping")
    except ConfigError:
        raise
    except WCEError as e:
        raise ConfigError(f"{where}: {e}") from None
    raise ConfigError(f"{where}.type must be 'table' or 'expr', got {kind!r}")


def _parse_analysis(cfg: AnalysisConfig, raw) -> None:
    if not isinstance(raw, dict):
        raise ConfigError("analysis must be a mapping")
    if "p" in raw:
        cfg.p = _number(raw["p"], "analysis.p")
    if "q" in raw:
        cfg.q = _number(raw["q"], "analysis.q")
    if raw.get("terms") is not None:
        cfg.terms = _number(raw["terms"], "analysis.terms", int)
        if cfg.terms < 1:
            raise ConfigError("analysis.terms must be >= 1")
    tail = raw.get("tail_bound")
    if tail is not None:
        if str(tail).lower() == "divergent":
            cfg.tail_bound = DIVERGENT
        else:
            cfg.tail_bound = _number(tail, "analysis.tail_bound")
            if cfg.tail_bound < 0:
                raise ConfigError("analysis.tail_bound must be nonnegative or 'divergent'")
    if raw.get("compact_tail") is not None:
        try:
            cfg.compact_tail = TailStatement(str(raw["compact_tail"]).lower())
        except ValueError:
            raise ConfigError("analysis.compact_tail must be one of finite, holds, fails") from None
    cfg.oracle = bool(raw.get("oracle", cfg.oracle))


def _parse_oracle_settings(cfg: AnalysisConfig, raw) -> None:
    if not isinstance(raw, dict):
        raise ConfigError("oracle_settings must be a mapping")
    cfg.ascent_restarts = _number(raw.get("restarts", cfg.ascent_restarts), "oracle_settings.restarts", int)
    cfg.ascent_seed = _number(raw.get("seed", cfg.ascent_seed), "oracle_settings.seed", int)
    cfg.ascent_max_iter = _number(raw.get("max_iter", cfg.ascent_max_iter), "oracle_settings.max_iter", int)
    if cfg.ascent_restarts < 20:
        raise ConfigError("oracle_settings.restarts must be >= 20")


def parse_config(data: dict, source: str = "<memory>") -> AnalysisConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    cfg = AnalysisConfig()
    cfg.source = source

    level = str(data.get("log_level", cfg.log_level)).lower()
    if level not in VALID_LOG_LEVELS:
        raise ConfigError(f"log_level must be one of {sorted(VALID_LOG_LEVELS)}")
    cfg.log_level = level

    if "space" in data:
        _parse_space(cfg, data["space"])

    weights = data.get("weights") or {}
    if cfg.space is not None:
        cfg.u = _parse_weight(_require(weights, "u", "weights"), "weights.u", cfg.space)
        cfg.w = _parse_weight(_require(weights, "w", "weights"), "weights.w", cfg.space)
        if "f" in weights:
            cfg.f = _parse_weight(weights["f"], "weights.f", cfg.space)
        # weights must be evaluable on every cell
        for name in ("u", "w", "f"):
            weight = getattr(cfg, name)
            if weight is None:
                continue
            try:
                weight.evaluate(cfg.space)
            except WCEError as e:
                raise ConfigError(f"weights.{name}: {e}") from None

    if "analysis" in data:
        _parse_analysis(cfg, data["analysis"])
    if "oracle_settings" in data:
        _parse_oracle_settings(cfg, data["oracle_settings"])
    return cfg


def load_config(path: Path | str | None = None) -> AnalysisConfig:
    """Load ``path`` (or the default CONFIG_PATH) into the module config.

    An explicit path must exist and validate. The default path may be
    absent, in which case defaults are used.
    """
    global _config

    explicit = path is not None
    config_path = Path(path) if explicit else CONFIG_PATH

    if not config_path.exists():
        if explicit:
            raise ConfigError(f"config file {config_path} not found")
        logger.warning("Config file %s not found, using defaults", config_path)
        _config = AnalysisConfig()
        return _config

    try:
        data = yaml.safe_load(config_path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{config_path}: not valid JSON/YAML ({e})") from None

    _config = parse_config(data, source=str(config_path))

    logger.info("Config loaded from %s", config_path)
    if _config.space is not None:
        logger.info("Space: %d cells, %d blocks, %d panels",
                    len(_config.space), len(_config.algebra), len(_config.algebra.panels))
    return _config


def get_config() -> AnalysisConfig:
    return _config
