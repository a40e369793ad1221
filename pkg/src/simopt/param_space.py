"""Simulation-parameter space: transforms, Gaussian distribution, KL.

The search distribution is a full-covariance Gaussian over an unconstrained
*internal* space. Per-dimension transforms map internal values to *physical*
units: ``identity`` for signed quantities (compliances, positions), ``log``
for strictly positive ones (dampings, frictions, masses, scales), and
``affine(lo, hi)`` for linearly rescaled quantities whose nominal range is
``(lo, hi)``. Sampling happens in internal space; physical values that land
outside their declared bounds are clamped (the affine case), and clamp
events are counted and logged.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng

__all__ = [
    "Transform",
    "SimParams",
    "ParamDistribution",
    "sample",
    "sample_detailed",
    "log_density",
    "kl_divergence",
]

logger = logging.getLogger(__name__)

_JITTER_RETRIES = 5

# Fraction of the affine span kept as an interior margin when clamping, so
# that from_physical never sees an exact boundary value of its open domain.
_AFFINE_CLAMP_MARGIN = 1e-9


@dataclass(frozen=True)
class Transform:
    """Per-dimension map between internal and physical space.

    kind is one of ``"identity"``, ``"log"``, ``"affine"``. The affine map
    is ``physical = lo + (hi - lo) * internal``; its physical domain is the
    open interval (lo, hi) and sampled values outside it are clamped to a
    hair inside the bounds.
    """

    kind: str
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "log", "affine"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "affine" and not self.hi > self.lo:
            raise ValueError(f"affine transform needs hi > lo, got ({self.lo}, {self.hi})")

    def to_physical(self, x: float) -> float:
        if self.kind == "identity":
            return float(x)
        if self.kind == "log":
            return math.exp(x)
        return self.lo + (self.hi - self.lo) * float(x)

    def from_physical(self, value: float, name: str = "?") -> float:
        if self.kind == "identity":
            return float(value)
        if self.kind == "log":
            if not value > 0.0:
                raise ValueError(f"dimension {name!r}: log transform requires a positive physical value, got {value}")
            return math.log(value)
        if not (self.lo < value < self.hi):
            raise ValueError(
                f"dimension {name!r}: affine transform requires a value inside ({self.lo}, {self.hi}), got {value}"
            )
        return (float(value) - self.lo) / (self.hi - self.lo)

    def clamp_physical(self, value: float) -> tuple[float, bool]:
        """Clamp a physical value into the transform's domain.

        Returns the (possibly clamped) value and whether clamping occurred.
        Identity and log images always lie in their domains already.
        """
        if self.kind != "affine":
            return float(value), False
        margin = _AFFINE_CLAMP_MARGIN * (self.hi - self.lo)
        clamped = min(max(value, self.lo + margin), self.hi - margin)
        return clamped, clamped != value

    def spec_string(self) -> str:
        if self.kind == "affine":
            return f"affine({self.lo!r},{self.hi!r})"
        return self.kind

    @staticmethod
    def from_spec_string(text: str) -> "Transform":
        text = text.strip()
        if text == "identity" or text == "log":
            return Transform(text)
        if text.startswith("affine(") and text.endswith(")"):
            lo_s, hi_s = text[len("affine(") : -1].split(",")
            return Transform("affine", float(lo_s), float(hi_s))
        raise ValueError(f"cannot parse transform spec {text!r}")


@dataclass(frozen=True)
class SimParams:
    """One concrete simulation-parameter setting, in physical units."""

    names: tuple[str, ...]
    values: np.ndarray  # float64, shape (d,)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.names),):
            raise ValueError(f"values shape {vals.shape} does not match {len(self.names)} names")
        if not np.all(np.isfinite(vals)):
            bad = [n for n, v in zip(self.names, vals) if not np.isfinite(v)]
            raise ValueError(f"non-finite parameter values for: {', '.join(bad)}")
        object.__setattr__(self, "values", vals)

    def get(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def _chol_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky-factor a symmetrized covariance, escalating jitter on failure.

    Returns (effective covariance, lower factor). The jitter ladder starts at
    1e-8 * max(diag, 1e-12) and decuples up to 5 retries; the stored
    covariance is the jittered one, so chol @ chol.T reproduces it.
    """
    cov = 0.5 * (cov + cov.T)
    base = 1e-8 * max(float(np.max(np.diag(cov))), 1e-12)
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    lam = base
    for _ in range(_JITTER_RETRIES):
        jittered = cov + lam * np.eye(cov.shape[0])
        try:
            chol = np.linalg.cholesky(jittered)
            logger.debug("covariance needed jitter %.3e to factor", lam)
            return jittered, chol
        except np.linalg.LinAlgError:
            lam *= 10.0
    raise np.linalg.LinAlgError(
        f"covariance not positive definite even after {_JITTER_RETRIES} jitter retries (final jitter {lam:.3e})"
    )


@dataclass(frozen=True)
class ParamDistribution:
    """Full-covariance Gaussian over the internal parameter space.

    Construction symmetrizes the covariance and factors it, adding an
    escalating diagonal jitter when the factorization fails; the stored
    covariance is the effective (jittered) one so that the cached Cholesky
    factor satisfies ``chol @ chol.T == covariance`` to round-off.
    """

    names: tuple[str, ...]
    mean: np.ndarray  # internal space, shape (d,)
    covariance: np.ndarray  # internal space, shape (d, d), PD
    transforms: tuple[Transform, ...]

    def __post_init__(self):
        d = len(self.names)
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (d,):
            raise ValueError(f"mean shape {mean.shape} does not match {d} names")
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match {d} names")
        if len(self.transforms) != d:
            raise ValueError(f"{len(self.transforms)} transforms for {d} names")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("non-finite entries in mean or covariance")
        eff_cov, chol = _chol_with_jitter(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", eff_cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def chol(self) -> np.ndarray:
        return self._chol  # type: ignore[attr-defined]

    def to_physical(self, internal: np.ndarray) -> SimParams:
        """Map an internal-space vector to physical units."""
        internal = np.asarray(internal, dtype=np.float64)
        vals = np.array([t.to_physical(x) for t, x in zip(self.transforms, internal)])
        return SimParams(self.names, vals)

    def from_physical(self, params: SimParams) -> np.ndarray:
        """Map physical parameters back to internal space.

        Raises ValueError naming the offending dimension when a value lies
        outside its transform's domain (non-positive for log, outside the
        open (lo, hi) for affine).
        """
        if params.names != self.names:
            raise ValueError(f"parameter names {params.names} do not match distribution names {self.names}")
        return np.array(
            [t.from_physical(v, n) for t, v, n in zip(self.transforms, params.values, self.names)]
        )

    def to_json_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": [float(x) for x in self.mean],
            "covariance": [[float(x) for x in row] for row in self.covariance],
            "transforms": [t.spec_string() for t in self.transforms],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "ParamDistribution":
        return ParamDistribution(
            names=tuple(data["names"]),
            mean=np.array(data["mean"], dtype=np.float64),
            covariance=np.array(data["covariance"], dtype=np.float64),
            transforms=tuple(Transform.from_spec_string(s) for s in data["transforms"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(text: str) -> "ParamDistribution":
        return ParamDistribution.from_json_dict(json.loads(text))


def sample_detailed(
    dist: ParamDistribution, n: int, seed: int
) -> tuple[list[SimParams], np.ndarray, int]:
    """Draw n parameter settings; also return internal vectors and clamp count.

    Each sample index uses its own derived Philox stream, so the draw for
    index i is the same whether samples are generated serially, in chunks,
    or by parallel workers. The returned internal matrix holds the
    internal-space images of the *clamped* physical values (what the update
    step should see).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    d = dist.dim
    chol = dist.chol
    params_list: list[SimParams] = []
    internal = np.empty((n, d), dtype=np.float64)
    n_clamped = 0
    for i in range(n):
        z = make_rng(seed, "param-sample", i).standard_normal(d)
        x = dist.mean + chol @ z
        vals = np.empty(d)
        clamped_any = False
        for j, t in enumerate(dist.transforms):
            phys = t.to_physical(x[j])
            phys, was_clamped = t.clamp_physical(phys)
            vals[j] = phys
            if was_clamped:
                clamped_any = True
                x[j] = t.from_physical(phys, dist.names[j])
        if clamped_any:
            n_clamped += 1
        params_list.append(SimParams(dist.names, vals))
        internal[i] = x
    if n_clamped:
        logger.info("sample: clamped %d of %d draws to physical bounds", n_clamped, n)
    return params_list, internal, n_clamped


def sample(dist: ParamDistribution, n: int, seed: int) -> list[SimParams]:
    """Draw n physical parameter settings from the distribution."""
    return sample_detailed(dist, n, seed)[0]


def log_density(dist: ParamDistribution, params: SimParams) -> float:
    """Internal-space Gaussian log density of the given physical parameters.

    The value is log N(x; mean, covariance) evaluated at the internal-space
    image x of ``params`` (no transform Jacobian).
    """
    x = dist.from_physical(params)
    diff = x - dist.mean
    chol = dist.chol
    w = _forward_solve(chol, diff)
    quad = float(w @ w)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (quad + logdet + dist.dim * math.log(2.0 * math.pi))


def _forward_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve lower-triangular L x = b."""
    n = lower.shape[0]
    x = np.zeros_like(b, dtype=np.float64)
    for i in range(n):
        x[i] = (b[i] - lower[i, :i] @ x[:i]) / lower[i, i]
    return x


def kl_divergence(p: ParamDistribution, q: ParamDistribution) -> float:
    """Closed-form KL(p || q) between two internal-space Gaussians.

    0.5 * (tr(Sq^-1 Sp) + (mq-mp)^T Sq^-1 (mq-mp) - d + ln det Sq - ln det Sp).
    Requires matching names and transforms. Returns exactly 0.0 when both
    distributions hold identical arrays (fast path; the closed form would
    only reach ~1e-15 through round-off).
    """
    if p.names != q.names:
        raise ValueError("KL between distributions over different parameter names")
    if p.transforms != q.transforms:
        raise ValueError("KL between distributions with different transforms")
    if (
        p.mean.shape == q.mean.shape
        and np.array_equal(p.mean, q.mean)
        and np.array_equal(p.covariance, q.covariance)
    ):
        return 0.0
    d = p.dim
    lq = q.chol
    # tr(Sq^-1 Sp) = || Lq^-1 Lp ||_F^2
    a = _forward_solve_matrix(lq, p.chol)
    trace_term = float(np.sum(a * a))
    diff = p.mean - q.mean
    w = _forward_solve(lq, diff)
    quad = float(w @ w)
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(lq))))
    logdet_p = 2.0 * float(np.sum(np.log(np.diag(p.chol))))
    return 0.5 * (trace_term + quad - d + logdet_q - logdet_p)


def _forward_solve_matrix(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve lower-triangular L X = B for matrix B."""
    n = lower.shape[0]
    x = np.zeros_like(b, dtype=np.float64)
    for i in range(n):
        x[i] = (b[i] - lower[i, :i] @ x[:i]) / lower[i, i]
    return x
