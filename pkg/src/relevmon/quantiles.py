"""Critical values: closed-form Gumbel and normal quantiles, simulated quantiles of the
Gaussian approximation and of the Brownian functionals behind the CUSUM detectors."""
import enum
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import _hot
from .kernels import KernelSpec, quartic, scaling_sequence

log = logging.getLogger(__name__)

CACHE_ENV = "RELEVMON_QUANTILE_CACHE"
DEFAULT_SEED = 20240101
BROWNIAN_REPS = 100_000
BROWNIAN_GRID = 10_000
_BLOCK = 256


class Source(str, enum.Enum):
    GUMBEL_ZERO = "GumbelZero"
    GUMBEL_LOG2 = "GumbelLog2"
    GAUSSIAN_SIGNED = "GaussianApproxSigned"
    GAUSSIAN_ABS = "GaussianApproxAbs"
    BROWNIAN_SUP = "BrownianSup"
    PAGE_BROWNIAN = "PageBrownian"
    NORMAL_UPPER = "NormalUpper"


@dataclass(frozen=True)
class QuantileRequest:
    alpha: float
    source: Source
    n: int = 0
    T: int = 0
    h: float = 0.0
    reps: int = 1000
    seed: int = DEFAULT_SEED
    grid: int = BROWNIAN_GRID
    restrict_to_monitored: bool = False

    def fingerprint(self) -> str:
        src = Source(self.source)
        parts = [src.value, f"alpha={self.alpha:.10g}"]
        if src in (Source.GAUSSIAN_SIGNED, Source.GAUSSIAN_ABS):
            parts += [f"n={self.n}", f"T={self.T}", f"h={round(self.h, 6):.6f}", f"reps={self.reps}", f"seed={self.seed}"]
            if self.restrict_to_monitored:
                parts.append("monitored")
        elif src in (Source.BROWNIAN_SUP, Source.PAGE_BROWNIAN):
            parts += [f"reps={self.reps}", f"grid={self.grid}", f"seed={self.seed}"]
        return "|".join(parts)


# -- closed forms ----------------------------------------------------------------


def gumbel_cdf(x: float, a: float = 0.0) -> float:
    return math.exp(-math.exp(-(x - a)))


def gumbel_quantile(a: float, p: float) -> float:
    """p-quantile of the Gumbel law with location ``a`` and unit scale."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} outside (0, 1)")
    return a - math.log(-math.log(p))


_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def _acklam(p: float) -> float:
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    if p > 1 - plow:
        return -_acklam(1 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)


def normal_quantile(p: float) -> float:
    """Standard normal quantile: rational approximation plus one Newton step."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} outside (0, 1)")
    x = _acklam(p)
    dens = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    if p > 0.5:
        # work with upper tails to avoid cancellation near 1
        err = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2))
        return x - err / dens
    err = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    return x - err / dens


# -- empirical quantiles -----------------------------------------------------------


def empirical_quantile(samples, p: float) -> float:
    """Upper order statistic: the ceil(reps * p)-th smallest sample (1-based)."""
    s = np.sort(np.asarray(samples, dtype=float))
    k = math.ceil(round(s.shape[0] * p, 9))
    return float(s[min(max(k, 1), s.shape[0]) - 1])


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, rep])


def kstar_weights(n: int, h: float, kernel: KernelSpec) -> np.ndarray:
    """K*((j/n)/h) at integer offsets j = -W..W, W = floor(n h)."""
    half = int(math.floor(n * h + 1e-9))
    j = np.arange(-half, half + 1)
    return np.asarray(kernel.jackknife(j / (n * h)), dtype=float)


def gaussian_approx_samples(
    n: int,
    T: int,
    h: float,
    reps: int,
    seed: int,
    absolute: bool,
    kernel: Optional[KernelSpec] = None,
    restrict_to_monitored: bool = False,
    use_numba=None,
) -> np.ndarray:
    """Simulated draws of l_n (sup_t S(t) - l_n) with S the normalised smoothed white noise."""
    kernel = kernel or quartic()
    ell = scaling_sequence(T, h, kernel)
    kvec = kstar_weights(n, h, kernel)
    N = T * n
    g_start = n if restrict_to_monitored else 0
    out = np.empty(reps)
    for start in range(0, reps, _BLOCK):
        stop = min(start + _BLOCK, reps)
        v = np.stack([_rep_rng(seed, r).standard_normal(N) for r in range(start, stop)])
        out[start:stop] = _hot.gaussian_sups(v, kvec, g_start, absolute, use_numba)
    sups = out / (kernel.l2_norm_Kstar * math.sqrt(n * h))
    return ell * (sups - ell)


_MEMO: Dict[str, float] = {}


def gaussian_approx_quantile(req: QuantileRequest, kernel: Optional[KernelSpec] = None) -> float:
    src = Source(req.source)
    if src not in (Source.GAUSSIAN_SIGNED, Source.GAUSSIAN_ABS):
        raise ValueError(f"{src.value} is not a Gaussian-approximation source")
    if req.reps < 100:
        raise ValueError("need at least 100 replications")
    kernel = kernel or quartic()
    key = req.fingerprint() + f"|{kernel.name}:{kernel.norm_convention}"
    if key not in _MEMO:
        draws = gaussian_approx_samples(
            req.n, req.T, req.h, req.reps, req.seed, src is Source.GAUSSIAN_ABS, kernel,
            req.restrict_to_monitored,
        )
        _MEMO[key] = empirical_quantile(draws, 1.0 - req.alpha)
    return _MEMO[key]


# -- Brownian functionals ----------------------------------------------------------

_SAMPLES: Dict[Tuple[int, int, int], Tuple[np.ndarray, np.ndarray]] = {}


def brownian_samples(reps: int, grid: int, seed: int, use_numba=None):
    """(sup|W|, Page functional) draws from the same simulated paths."""
    key = (reps, grid, seed)
    if key not in _SAMPLES:
        sup_abs = np.empty(reps)
        page = np.empty(reps)
        for start in range(0, reps, _BLOCK):
            stop = min(start + _BLOCK, reps)
            z = np.stack([_rep_rng(seed, r).standard_normal(grid) for r in range(start, stop)])
            sup_abs[start:stop], page[start:stop] = _hot.brownian_functionals(z, use_numba)
        _SAMPLES.clear()
        _SAMPLES[key] = (sup_abs, page)
    return _SAMPLES[key]


def _check_brownian(p, reps, grid):
    if not 0.0 < p < 1.0:
        raise ValueError(f"p={p} outside (0, 1)")
    if reps < 1000 or grid < 1000:
        raise ValueError("Brownian quantiles need reps >= 1000 and grid >= 1000")


def brownian_sup_quantile(p: float, reps: int = BROWNIAN_REPS, grid: int = BROWNIAN_GRID,
                          seed: int = DEFAULT_SEED, cache: Optional["QuantileCache"] = None) -> float:
    """p-quantile of sup_{0<t<1} |W(t)|."""
    _check_brownian(p, reps, grid)
    req = QuantileRequest(1.0 - p, Source.BROWNIAN_SUP, reps=reps, grid=grid, seed=seed)
    return _cached(req, cache, lambda: empirical_quantile(brownian_samples(reps, grid, seed)[0], p))


def page_brownian_quantile(p: float, reps: int = BROWNIAN_REPS, grid: int = BROWNIAN_GRID,
                           seed: int = DEFAULT_SEED, cache: Optional["QuantileCache"] = None) -> float:
    """p-quantile of sup_{0<t<1} sup_{0<s<=t} |W(t) - (1-t)/(1-s) W(s)|."""
    _check_brownian(p, reps, grid)
    req = QuantileRequest(1.0 - p, Source.PAGE_BROWNIAN, reps=reps, grid=grid, seed=seed)
    return _cached(req, cache, lambda: empirical_quantile(brownian_samples(reps, grid, seed)[1], p))


def _cached(req: QuantileRequest, cache, compute) -> float:
    cache = cache if cache is not None else default_cache()
    key = req.fingerprint()
    hit = cache.get(key)
    if hit is not None:
        return hit
    value = compute()
    cache.put(key, value)
    return value


# -- dispatcher --------------------------------------------------------------------


def quantile(req: QuantileRequest, kernel: Optional[KernelSpec] = None,
             cache: Optional["QuantileCache"] = None) -> float:
    """Upper (1 - alpha) critical value for any source."""
    src = Source(req.source)
    p = 1.0 - req.alpha
    if src is Source.GUMBEL_ZERO:
        return gumbel_quantile(0.0, p)
    if src is Source.GUMBEL_LOG2:
        return gumbel_quantile(math.log(2.0), p)
    if src is Source.NORMAL_UPPER:
        return normal_quantile(p)
    if src is Source.BROWNIAN_SUP:
        return brownian_sup_quantile(p, req.reps, req.grid, req.seed, cache)
    if src is Source.PAGE_BROWNIAN:
        return page_brownian_quantile(p, req.reps, req.grid, req.seed, cache)
    return gaussian_approx_quantile(req, kernel)


# -- on-disk cache -----------------------------------------------------------------


class QuantileCache:
    """JSON map from request fingerprint to value.

    Lookups fall back to the values bundled with the package; writes go to
    ``path`` atomically.
    """

    def __init__(self, path: Optional[os.PathLike] = None, bundled: bool = True):
        self.path = Path(path) if path is not None else None
        self._bundled = _load_bundled() if bundled else {}
        self._data: Dict[str, float] = {}
        if self.path is not None and self.path.exists():
            try:
                self._data = {k: float(v) for k, v in json.loads(self.path.read_text()).items()}
            except (ValueError, OSError) as exc:
                log.warning("ignoring unreadable quantile cache %s: %s", self.path, exc)

    def get(self, key: str) -> Optional[float]:
        if key in self._data:
            return self._data[key]
        return self._bundled.get(key)

    def put(self, key: str, value: float) -> None:
        self._data[key] = float(value)
        if self.path is None:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".quantiles-")
            with os.fdopen(fd, "w") as fh:
                json.dump(self._data, fh, indent=1, sort_keys=True)
            os.replace(tmp, self.path)
        except OSError as exc:
            log.warning("could not write quantile cache %s: %s", self.path, exc)

    def items(self):
        return dict(self._bundled, **self._data).items()


def _load_bundled() -> Dict[str, float]:
    try:
        text = resources.files("relevmon").joinpath("data/quantiles.json").read_text()
    except (FileNotFoundError, OSError):
        return {}
    return {k: float(v) for k, v in json.loads(text).items()}


def default_cache_path() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "relevmon" / "quantiles.json"


_DEFAULT: Optional[QuantileCache] = None


def default_cache() -> QuantileCache:
    global _DEFAULT
    path = default_cache_path()
    if _DEFAULT is None or _DEFAULT.path != path:
        _DEFAULT = QuantileCache(path)
    return _DEFAULT
