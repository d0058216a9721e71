"""Statistics-based illuminant estimators under one Minkowski-norm framework.

Gray-world, White-patch, Shades-of-Gray and Gray-Edge are all instances of

    e_c = ( mean_x |d_c(x)|^p )^(1/p)

where ``d_c`` is either the channel itself (derivative order 0, optionally
smoothed) or the magnitude of its Gaussian derivative of order 1 or 2.
``p = inf`` is the per-channel maximum.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError, PreprocessingError
from .imaging import LinearImage, SaturationMask

KINDS = ("gray_world", "white_patch", "shades_of_gray", "gray_edge")

# Conventional defaults from the original Shades-of-Gray / Gray-Edge work.
DEFAULT_P = 6.0
DEFAULT_ORDER = 1
DEFAULT_SIGMA = 6.0


class Illuminant:
    """A light-source color as seen by the sensor: a unit RGB direction."""

    __slots__ = ("_rgb",)

    def __init__(self, rgb):
        v = np.array(rgb, dtype=np.float64).reshape(-1)
        if v.shape != (3,):
            raise DataError(f"an illuminant needs 3 components, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise DataError("illuminant components must be finite")
        if np.any(v < 0):
            raise DataError(f"illuminant components must be nonnegative: {v}")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DataError("an illuminant cannot be the zero vector")
        v = v / norm
        v.setflags(write=False)
        self._rgb = v

    @property
    def rgb(self) -> np.ndarray:
        return self._rgb

    def __array__(self, dtype=None, copy=None):
        return self._rgb if dtype is None else self._rgb.astype(dtype)

    def __iter__(self):
        return iter(self._rgb.tolist())

    def __eq__(self, other):
        if not isinstance(other, Illuminant):
            return NotImplemented
        return bool(np.array_equal(self._rgb, other._rgb))

    def __hash__(self):
        return hash(self._rgb.tobytes())

    def __repr__(self):
        r, g, b = self._rgb
        return f"Illuminant({r:.6f}, {g:.6f}, {b:.6f})"


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    p: float = 1.0
    derivative_order: int = 0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown estimator kind {self.kind!r}")
        p = float(self.p)
        object.__setattr__(self, "p", p)
        if not p >= 1:
            raise DataError(f"Minkowski exponent must be >= 1, got {p}")
        if self.derivative_order not in (0, 1, 2):
            raise DataError("derivative_order must be 0, 1 or 2")
        if self.sigma < 0:
            raise DataError("sigma must be nonnegative")
        if self.kind == "gray_world" and (p, self.derivative_order, self.sigma) != (1.0, 0, 0):
            raise DataError("gray_world is p=1, order 0, sigma 0")
        if self.kind == "white_patch" and (p != math.inf or self.derivative_order != 0):
            raise DataError("white_patch is p=inf, order 0")
        if self.kind == "shades_of_gray" and self.derivative_order != 0:
            raise DataError("shades_of_gray has derivative order 0; use gray_edge")
        if self.kind == "gray_edge":
            if self.derivative_order < 1:
                raise DataError("gray_edge requires derivative order >= 1")
            if self.sigma <= 0:
                raise DataError("gray_edge requires sigma > 0")

    @classmethod
    def gray_world(cls):
        return cls("gray_world")

    @classmethod
    def white_patch(cls, sigma: float = 0.0):
        return cls("white_patch", p=math.inf, sigma=sigma)

    @classmethod
    def shades_of_gray(cls, p: float = DEFAULT_P, sigma: float = 0.0):
        return cls("shades_of_gray", p=p, sigma=sigma)

    @classmethod
    def gray_edge(cls, order: int = DEFAULT_ORDER, p: float = DEFAULT_P,
                  sigma: float = DEFAULT_SIGMA):
        return cls("gray_edge", p=p, derivative_order=order, sigma=sigma)

    def describe(self) -> str:
        """Canonical CLI string; ``parse_estimator(s.describe()) == s``."""
        name = self.kind.replace("_", "-")
        if self.kind == "gray_world":
            return name
        params = []
        if self.kind == "gray_edge":
            params.append(f"n={self.derivative_order}")
        if self.kind in ("shades_of_gray", "gray_edge"):
            params.append("p=inf" if math.isinf(self.p) else f"p={self.p:g}")
        if self.sigma or self.kind == "gray_edge":
            params.append(f"sigma={self.sigma:g}")
        return name + (":" + ",".join(params) if params else "")


_ESTIMATOR_RE = re.compile(r"^\s*([a-z_-]+)\s*(?::(.*))?$")


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse estimator strings such as ``"gray-edge:n=1,p=1,sigma=6"``."""
    m = _ESTIMATOR_RE.match(text.lower())
    if not m:
        raise DataError(f"cannot parse estimator {text!r}")
    kind = m.group(1).replace("-", "_")
    params = {}
    if m.group(2):
        for item in m.group(2).split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in ("p", "n", "sigma"):
                raise DataError(f"bad estimator parameter {item!r} in {text!r}")
            try:
                params[key] = float(value)
            except ValueError:
                raise DataError(f"bad value for {key} in {text!r}") from None
    if "n" in params:
        if params["n"] != int(params["n"]):
            raise DataError("derivative order n must be an integer")
        params["n"] = int(params["n"])
    if kind == "gray_world":
        if params:
            raise DataError("gray-world takes no parameters")
        return EstimatorSpec.gray_world()
    if kind == "white_patch":
        extra = set(params) - {"sigma"}
        if extra:
            raise DataError(f"white-patch does not accept {sorted(extra)}")
        return EstimatorSpec.white_patch(sigma=params.get("sigma", 0.0))
    if kind == "shades_of_gray":
        if "n" in params:
            raise DataError("shades-of-gray does not take n; use gray-edge")
        return EstimatorSpec.shades_of_gray(p=params.get("p", DEFAULT_P),
                                            sigma=params.get("sigma", 0.0))
    if kind == "gray_edge":
        return EstimatorSpec.gray_edge(order=params.get("n", DEFAULT_ORDER),
                                       p=params.get("p", DEFAULT_P),
                                       sigma=params.get("sigma", DEFAULT_SIGMA))
    raise DataError(f"unknown estimator {m.group(1)!r}")


# -- Gaussian derivatives -----------------------------------------------------


def gaussian_kernels(sigma: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the (smoothing, derivative) 1-D kernels, radius ceil(3 sigma).

    The smoothing kernel sums to one. Derivative kernels are moment
    normalized so they are exact on polynomials of their order: the first
    derivative of ``x`` is 1, the second derivative of ``x**2`` is 2.
    """
    radius = max(int(math.ceil(3.0 * sigma)), 1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    if order == 0:
        return g, g
    if order == 1:
        d = x * g
        d /= np.sum(d * x)
        return g, d
    d = (x**2 - sigma**2) * g
    d -= g * d.sum()  # zero response to constants
    d /= np.sum(d * x**2) / 2.0
    return g, d


def gaussian_derivative(channel, order: int, sigma: float) -> np.ndarray:
    """Gaussian blur (order 0) or Gaussian-derivative magnitude (order 1, 2).

    For order ``n`` the result is ``sqrt(Lx^2 + Ly^2)`` with ``Lx`` the
    n-th x derivative of the blurred channel. Borders use reflect padding.
    """
    grid = np.asarray(channel, dtype=np.float64)
    if grid.ndim != 2:
        raise DataError("gaussian_derivative expects a 2-D grid")
    if order not in (0, 1, 2):
        raise DataError("order must be 0, 1 or 2")
    if sigma < 0:
        raise DataError("sigma must be nonnegative")
    if sigma == 0:
        if order:
            raise DataError("derivatives need sigma > 0")
        return grid.copy()
    g, d = gaussian_kernels(sigma, order)
    if order == 0:
        out = ndimage.correlate1d(grid, g, axis=0, mode="reflect")
        return ndimage.correlate1d(out, g, axis=1, mode="reflect")
    lx = ndimage.correlate1d(ndimage.correlate1d(grid, g, axis=0, mode="reflect"),
                             d, axis=1, mode="reflect")
    ly = ndimage.correlate1d(ndimage.correlate1d(grid, g, axis=1, mode="reflect"),
                             d, axis=0, mode="reflect")
    return np.hypot(lx, ly)


# -- estimation ---------------------------------------------------------------


def minkowski_mean(values: np.ndarray, p: float) -> float:
    """``(mean |v|^p)^(1/p)``, or ``max |v|`` for ``p = inf``.

    Values are scaled by their maximum first so large ``p`` cannot overflow.
    """
    v = np.abs(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise DataError("Minkowski mean of an empty set")
    if p == 1:
        return float(v.mean())
    top = v.max()
    if math.isinf(p) or top == 0:
        return float(top)
    return float(top * np.mean((v / top) ** p) ** (1.0 / p))


def estimate(img: LinearImage, spec: EstimatorSpec,
             mask: SaturationMask | None = None,
             allow_unsubtracted: bool = False) -> Illuminant:
    """Estimate the scene illuminant of a black-subtracted image.

    Masked (clipped) pixels are dropped from the statistics. Derivatives
    are still computed on the full image so the kernels see real neighbors.
    ``allow_unsubtracted`` exists only to reproduce the wrong pipeline on
    purpose.
    """
    if not img.black_subtracted and not allow_unsubtracted:
        raise PreprocessingError(
            "image still carries its black level; run subtract_black() first "
            "(statistics-based estimators assume a zero black level)"
        )
    if mask is not None and mask.flags.shape != img.data.shape[:2]:
        raise DataError("mask dimensions do not match the image")
    keep = np.ones(img.data.shape[:2], bool) if mask is None else ~mask.flags
    if not keep.any():
        raise DataError("every pixel is masked; nothing to estimate from")

    e = np.empty(3)
    for c in range(3):
        plane = img.data[:, :, c]
        if spec.sigma > 0 or spec.derivative_order > 0:
            plane = gaussian_derivative(plane, spec.derivative_order, spec.sigma)
        e[c] = minkowski_mean(plane[keep], spec.p)
    if not np.any(e > 0):
        raise DataError(f"{spec.describe()} produced a zero estimate (flat or black image)")
    return Illuminant(e)
