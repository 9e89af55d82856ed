"""Loss models: deterministic maps from the unit cube to a scalar loss.

Two models are provided:

* ``SanModel``: a 15-edge stochastic activity network whose output is the
  project completion time, i.e. the maximum over ten fixed paths of the sum
  of exponential edge durations Y_j = -(1/lambda_j) * ln(u_j);
* ``ExpModel``: a one-dimensional exponential loss X = -(1/lambda) * ln(u)
  with closed-form quantile and expected shortfall, used for calibration.

Coordinates are clamped to [eps, 1 - eps] before the log so that every
point of the unit cube, including the origin emitted by unrandomized
digital sequences, maps to a finite loss.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigError

# largest double below 1 is 1 - 2^-53, so the clamp window is as wide as
# float64 permits
CLAMP_EPSILON = 2.0 ** -53

EDGE_COUNT = 15

# activity-on-arc network: the ten source-to-sink paths, as 1-based edge
# index tuples
DEFAULT_SAN_PATHS: Tuple[Tuple[int, ...], ...] = (
    (1, 4, 11, 15),
    (1, 4, 12),
    (2, 5, 11, 15),
    (2, 5, 12),
    (2, 6, 13),
    (2, 7, 14),
    (3, 8, 11, 15),
    (3, 8, 12),
    (3, 9, 15),
    (3, 10, 14),
)

# mean duration 2 on edges 1..8, mean 1 on edges 9..15
DEFAULT_SAN_RATES: Tuple[float, ...] = (0.5,) * 8 + (1.0,) * 7

ArrayLike = Union[float, np.ndarray]


def _clamp_open_unit(points: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(points, eps, 1.0 - eps)


def _check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 0.5:
        raise ConfigError(f"clamp_epsilon must lie in (0, 0.5), got {eps}")
    return eps


def _as_point_block(u: ArrayLike, dim: int) -> Tuple[np.ndarray, bool]:
    """Normalize input to an (n, dim) block; flag whether to return a scalar."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif arr.ndim == 1:
        if dim == 1:
            single = arr.size == 1
            arr = arr.reshape(-1, 1)
        else:
            single = True
            arr = arr.reshape(1, -1)
    elif arr.ndim == 2:
        single = False
    else:
        raise ConfigError(f"expected a point or an (n, {dim}) block, got ndim={arr.ndim}")
    if arr.shape[1] != dim:
        raise ConfigError(f"model expects dimension {dim}, got {arr.shape[1]}")
    return arr, single


@dataclass(frozen=True)
class SanModel:
    """Fixed-topology stochastic activity network with exponential edges."""

    rates: Tuple[float, ...] = DEFAULT_SAN_RATES
    paths: Tuple[Tuple[int, ...], ...] = DEFAULT_SAN_PATHS
    clamp_epsilon: float = CLAMP_EPSILON
    _path_cols: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != EDGE_COUNT:
            raise ConfigError(f"rates: expected {EDGE_COUNT} values, got {len(rates)}")
        if any(not r > 0.0 for r in rates):
            raise ConfigError("rates: every edge rate must be positive")
        if not self.paths:
            raise ConfigError("paths: need at least one path")
        cols = []
        for i, path in enumerate(self.paths):
            if not path:
                raise ConfigError(f"paths: path {i + 1} is empty")
            for j in path:
                if not 1 <= j <= EDGE_COUNT:
                    raise ConfigError(f"paths: path {i + 1} uses edge {j} outside 1..{EDGE_COUNT}")
            cols.append(np.asarray(path, dtype=np.intp) - 1)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "clamp_epsilon", _check_epsilon(self.clamp_epsilon))
        object.__setattr__(self, "_path_cols", tuple(cols))

    @property
    def dim(self) -> int:
        return EDGE_COUNT

    def evaluate(self, u: ArrayLike) -> ArrayLike:
        """Completion time: max over paths of summed edge durations."""
        block, single = _as_point_block(u, self.dim)
        uc = _clamp_open_unit(block, self.clamp_epsilon)
        durations = -np.log(uc) / np.asarray(self.rates)
        # per-path column sums, not a matmul: the reduction order is then
        # independent of batch size, so scalar and batch calls agree bitwise
        out = durations[:, self._path_cols[0]].sum(axis=1)
        for cols in self._path_cols[1:]:
            np.maximum(out, durations[:, cols].sum(axis=1), out=out)
        return float(out[0]) if single else out

    def true_quantile(self, p: float) -> Optional[float]:
        """No closed form for the completion-time distribution."""
        _check_level(p)
        return None

    def true_shortfall(self, p: float) -> Optional[float]:
        _check_level(p)
        return None


@dataclass(frozen=True)
class ExpModel:
    """One-dimensional exponential loss X = -(1/rate) * ln(u)."""

    rate: float = 1.0
    clamp_epsilon: float = CLAMP_EPSILON

    def __post_init__(self) -> None:
        rate = float(self.rate)
        if not rate > 0.0:
            raise ConfigError(f"lambda: rate must be positive, got {rate}")
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "clamp_epsilon", _check_epsilon(self.clamp_epsilon))

    @property
    def dim(self) -> int:
        return 1

    def evaluate(self, u: ArrayLike) -> ArrayLike:
        block, single = _as_point_block(u, self.dim)
        uc = _clamp_open_unit(block, self.clamp_epsilon)
        out = -np.log(uc[:, 0]) / self.rate
        return float(out[0]) if single else out

    def true_quantile(self, p: float) -> float:
        """v solving P(X <= v) = p; here X is Exp(rate) in distribution."""
        p = _check_level(p)
        return -math.log1p(-p) / self.rate

    def true_shortfall(self, p: float) -> float:
        """E[X | X <= v] = v - (1/p) * E[(v - X)^+] = v*(1 - 1/p) + 1/rate."""
        p = _check_level(p)
        v = self.true_quantile(p)
        return v * (1.0 - 1.0 / p) + 1.0 / self.rate


Model = Union[SanModel, ExpModel]


def _check_level(p: float) -> float:
    if not 0.0 < float(p) < 1.0:
        raise ConfigError(f"risk level must lie in (0, 1), got {p}")
    return float(p)


_MODEL_KEYS = {
    "san-15": {"kind", "rates", "clamp_epsilon"},
    "exp": {"kind", "lambda", "clamp_epsilon"},
}


def _parse_float(section: "configparser.SectionProxy", key: str) -> float:
    raw = section[key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def parse_sections(text: str) -> configparser.ConfigParser:
    """Parse key = value config text; headerless input goes to [model]."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",)
    )
    if not re.search(r"^\s*\[", text, flags=re.MULTILINE):
        text = "[model]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return parser


def model_from_section(section: "configparser.SectionProxy") -> Model:
    """Build a validated model from one parsed config section."""
    if "kind" not in section:
        raise ConfigError("kind: missing required key")
    kind = section["kind"].strip().lower()
    if kind not in _MODEL_KEYS:
        expected = ", ".join(sorted(_MODEL_KEYS))
        raise ConfigError(f"kind: unknown model kind {kind!r} (expected one of: {expected})")
    for key in section:
        if key not in _MODEL_KEYS[kind]:
            raise ConfigError(f"{key}: unknown key for model kind {kind!r}")

    eps = CLAMP_EPSILON
    if "clamp_epsilon" in section:
        eps = _parse_float(section, "clamp_epsilon")

    if kind == "exp":
        rate = _parse_float(section, "lambda") if "lambda" in section else 1.0
        return ExpModel(rate=rate, clamp_epsilon=eps)

    rates: Tuple[float, ...] = DEFAULT_SAN_RATES
    if "rates" in section:
        tokens = [t for t in re.split(r"[,\s]+", section["rates"].strip()) if t]
        try:
            parsed = tuple(float(t) for t in tokens)
        except ValueError:
            raise ConfigError("rates: expected a list of numbers") from None
        if len(parsed) != EDGE_COUNT:
            raise ConfigError(f"rates: expected {EDGE_COUNT} values, got {len(parsed)}")
        rates = parsed
    return SanModel(rates=rates, clamp_epsilon=eps)


def load_model(text: str) -> Model:
    """Parse a model config document (flat keys or a [model] section)."""
    parser = parse_sections(text)
    if parser.has_section("model"):
        return model_from_section(parser["model"])
    sections = parser.sections()
    if len(sections) == 1:
        return model_from_section(parser[sections[0]])
    raise ConfigError("model: config must contain a [model] section")
