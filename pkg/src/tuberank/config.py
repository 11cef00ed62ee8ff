"""Run configuration: a flat ``key = value`` file with typed, range-checked keys."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .changepoint import WEIGHTINGS
from .motion import MotionBoxParams
from .randomwalk import WalkParams
from .scoring import ScoreWeights


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    F: int = 5
    K: int = 20
    lambda_i: float = 1.0
    lambda_m: float = 1.0
    lambda_o: float = 1.0
    lambda_a: float = 1.0
    lambda_edge: float = 1.0
    nms_threshold: float = 0.8
    box_scales: tuple[float, ...] = (0.1, 0.2, 0.4, 0.6, 0.8)
    box_aspects: tuple[float, ...] = (0.5, 1.0, 2.0)
    box_stride: float = 0.25
    box_top_m: int = 200
    box_nms: float = 0.7
    contour_threshold: float | None = None
    kappa: float = 1.5
    sigma: float = 1.0
    walk_alpha: float | None = None
    walk_beta: float = 0.85
    walk_iterations: int = 100
    walk_keep: float = 0.8
    walk_include_self: bool = False
    seg_weighting: str = "divide"
    seg_grid: int = 16
    seg_tol: float = 1e-8
    seg_max_iter: int = 10000
    seed: int = 0

    def __post_init__(self):
        def need(ok, key, rule):
            if not ok:
                raise ConfigError(f"{key} = {getattr(self, key)!r}: must be {rule}")

        need(self.F >= 1, "F", ">= 1")
        need(self.K >= 1, "K", ">= 1")
        for k in ("lambda_i", "lambda_m", "lambda_o", "lambda_a", "lambda_edge"):
            need(getattr(self, k) >= 0, k, ">= 0")
        need(0 < self.nms_threshold <= 1, "nms_threshold", "in (0, 1]")
        need(len(self.box_scales) > 0 and all(0 < s <= 1 for s in self.box_scales), "box_scales", "in (0, 1]")
        need(len(self.box_aspects) > 0 and all(a > 0 for a in self.box_aspects), "box_aspects", "> 0")
        need(0 < self.box_stride <= 1, "box_stride", "in (0, 1]")
        need(self.box_top_m >= 1, "box_top_m", ">= 1")
        need(0 < self.box_nms <= 1, "box_nms", "in (0, 1]")
        need(self.contour_threshold is None or self.contour_threshold > 0, "contour_threshold", "> 0 or auto")
        need(self.kappa > 0, "kappa", "> 0")
        need(self.sigma > 0, "sigma", "> 0")
        need(self.walk_alpha is None or self.walk_alpha > 0, "walk_alpha", "> 0 or auto")
        need(0 < self.walk_beta < 1, "walk_beta", "in (0, 1)")
        need(self.walk_iterations >= 1, "walk_iterations", ">= 1")
        need(0 < self.walk_keep <= 1, "walk_keep", "in (0, 1]")
        need(self.seg_weighting in WEIGHTINGS, "seg_weighting", f"one of {WEIGHTINGS}")
        need(self.seg_grid >= 1, "seg_grid", ">= 1")
        need(self.seg_tol > 0, "seg_tol", "> 0")
        need(self.seg_max_iter >= 1, "seg_max_iter", ">= 1")

    @property
    def weights(self) -> ScoreWeights:
        return ScoreWeights(self.lambda_i, self.lambda_m, self.lambda_o, self.lambda_a, self.lambda_edge)

    @property
    def box_params(self) -> MotionBoxParams:
        return MotionBoxParams(self.box_scales, self.box_aspects, self.box_stride, self.box_top_m,
                               self.box_nms, self.kappa, self.contour_threshold)

    @property
    def walk_params(self) -> WalkParams:
        return WalkParams(self.walk_alpha, self.walk_beta, self.walk_iterations, self.walk_keep,
                          self.walk_include_self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, values: Mapping[str, str]) -> "RunConfig":
        """Apply ``key -> text value`` pairs parsed with each field's type."""
        fields = {f.name: f for f in dataclasses.fields(self)}
        changes = {}
        for key, text in values.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _parse_value(key, fields[key].type, text)
        return self.replace(**changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = "auto"
            elif isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, type_name: str, text: str):
    text = text.strip()
    try:
        if type_name == "int":
            return int(text)
        if type_name == "float":
            return float(text)
        if type_name == "float | None":
            return None if text.lower() == "auto" else float(text)
        if type_name == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if type_name == "str":
            return text
        if type_name == "tuple[float, ...]":
            return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type_name}") from None
    raise ConfigError(f"{key}: unsupported type {type_name}")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (e.g. from the command line)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    values.update(overrides or {})
    return RunConfig().with_overrides(values)
