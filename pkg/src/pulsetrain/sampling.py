"""Random systematic-error samples for training and testing.

Four sampling distributions cover the supported error statistics: uniform on
an interval, Gaussian with a given mean and *variance*, exponential with a
rate plus an offset and sign (support offset + sign*[0, inf)), and a Beta
distribution rescaled onto an arbitrary interval.  Any of them can be
truncated to an interval by rejection resampling.

Draws use numpy's PCG64 generator and are fully determined by the seed;
per-group child streams are derived from one master seed with
``np.random.SeedSequence`` spawn keys, so parallel and serial training see
identical samples.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .dynamics import ErrorModel

# cap on rejection resampling rounds before concluding the truncation
# interval has essentially no probability mass
_MAX_REJECTION_ROUNDS = 1000


def _check_truncate(truncate):
    if truncate is None:
        return None
    lo, hi = float(truncate[0]), float(truncate[1])
    if not lo < hi:
        raise ValueError("truncation interval needs lo < hi")
    return (lo, hi)


@dataclass(frozen=True)
class Uniform:
    """Uniform on [lo, hi]."""

    lo: float
    hi: float
    truncate: tuple | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("Uniform needs lo < hi")
        object.__setattr__(self, "truncate", _check_truncate(self.truncate))

    def _draw(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class Gaussian:
    """Normal with expectation `mean` and variance `variance` (not std dev)."""

    mean: float
    variance: float
    truncate: tuple | None = None

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("Gaussian needs variance > 0")
        object.__setattr__(self, "truncate", _check_truncate(self.truncate))

    def _draw(self, rng, n):
        return rng.normal(self.mean, np.sqrt(self.variance), size=n)


@dataclass(frozen=True)
class Exponential:
    """offset + sign * Exp(rate); support is one side of `offset`."""

    rate: float
    offset: float = 0.0
    sign: int = 1
    truncate: tuple | None = None

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("Exponential needs rate > 0")
        if self.sign not in (-1, 1):
            raise ValueError("Exponential sign must be +1 or -1")
        object.__setattr__(self, "truncate", _check_truncate(self.truncate))

    def _draw(self, rng, n):
        return self.offset + self.sign * rng.exponential(1.0 / self.rate, size=n)


@dataclass(frozen=True)
class Beta:
    """Beta(alpha, beta) rescaled affinely onto [lo, hi]."""

    alpha: float
    beta: float
    lo: float = 0.0
    hi: float = 1.0
    truncate: tuple | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta needs positive shape parameters")
        if not self.lo < self.hi:
            raise ValueError("Beta needs lo < hi")
        object.__setattr__(self, "truncate", _check_truncate(self.truncate))

    def _draw(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.beta(self.alpha, self.beta,
                                                        size=n)


_SPEC_TYPES = {"uniform": Uniform, "gaussian": Gaussian,
               "exponential": Exponential, "beta": Beta}


def spec_to_dict(spec) -> dict:
    """JSON-ready description of a distribution spec."""
    for name, cls in _SPEC_TYPES.items():
        if isinstance(spec, cls):
            out = {"kind": name}
            for f in fields(cls):
                val = getattr(spec, f.name)
                if f.name == "truncate":
                    out[f.name] = None if val is None else [val[0], val[1]]
                else:
                    out[f.name] = val
            return out
    raise TypeError(f"unknown distribution spec {type(spec).__name__}")


def spec_from_dict(data: dict):
    """Inverse of :func:`spec_to_dict`."""
    kind = data.get("kind")
    if kind not in _SPEC_TYPES:
        raise ValueError(f"unknown distribution kind {kind!r}")
    cls = _SPEC_TYPES[kind]
    kwargs = {f.name: data[f.name] for f in fields(cls) if f.name in data}
    if kwargs.get("truncate") is not None:
        kwargs["truncate"] = tuple(kwargs["truncate"])
    if kind == "exponential" and "sign" in kwargs:
        kwargs["sign"] = int(kwargs["sign"])
    return cls(**kwargs)


def _seed_provenance(seed):
    if seed is None:
        return None
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return int(seed)


def seed_from_provenance(prov):
    """Rebuild a draw seed from its JSON provenance."""
    if prov is None or isinstance(prov, int):
        return prov
    return np.random.SeedSequence(prov["entropy"],
                                  spawn_key=tuple(prov["spawn_key"]))


@dataclass(frozen=True)
class SampleSet:
    """K labeled error samples drawn from one distribution.

    `values` has shape (K, L) over the axes of `model`; `labels` is the
    all-ones target-fidelity vector of the supervised framing.
    """

    values: np.ndarray
    labels: np.ndarray
    spec: object
    seed: object
    model: ErrorModel

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        labels = np.asarray(self.labels, dtype=float).ravel().copy()
        if values.shape[0] != labels.size:
            raise ValueError("values and labels disagree on the sample count")
        if values.shape[1] != self.model.dimension:
            raise ValueError("sample dimension does not match the error model")
        if not np.all(labels == 1.0):
            raise ValueError("labels must all be 1 (perfect target fidelity)")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def to_dict(self) -> dict:
        return {
            "spec": spec_to_dict(self.spec),
            "seed": _seed_provenance(self.seed),
            "dimension": self.dimension,
            "model": [{"kind": ax.kind, "interval": ax.interval}
                      for ax in self.model.axes],
            "values": [[float(x) for x in row] for row in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SampleSet":
        from .dynamics import ErrorAxis
        model = ErrorModel(tuple(ErrorAxis(ax["kind"], ax["interval"])
                                 for ax in data["model"]))
        values = np.asarray(data["values"], dtype=float)
        return cls(values=values, labels=np.ones(values.shape[0]),
                   spec=spec_from_dict(data["spec"]),
                   seed=seed_from_provenance(data["seed"]), model=model)


def draw(spec, count: int, dim: int = 1, seed=None,
         model: ErrorModel | None = None) -> SampleSet:
    """Draw `count` i.i.d. sample vectors of dimension `dim`.

    Parameters
    ----------
    spec : Uniform | Gaussian | Exponential | Beta
        Distribution of every component.
    count, dim : int
        Number of samples K and components per sample L.
    seed : int | np.random.SeedSequence | None
        Determines the draw completely; None draws fresh OS entropy.
    model : ErrorModel, optional
        Semantic axes of the components.  Defaults to the single pulse-area
        axis when dim == 1; required otherwise.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if model is None:
        if dim != 1:
            raise ValueError("an explicit error model is required for dim > 1")
        model = ErrorModel.pulse_area()
    if model.dimension != dim:
        raise ValueError("error model dimension does not match dim")
    rng = np.random.default_rng(seed)
    need = count * dim
    if spec.truncate is None:
        flat = spec._draw(rng, need)
    else:
        lo, hi = spec.truncate
        parts = []
        have = 0
        for _ in range(_MAX_REJECTION_ROUNDS):
            block = spec._draw(rng, max(need - have, 64))
            block = block[(block >= lo) & (block <= hi)]
            parts.append(block)
            have += block.size
            if have >= need:
                break
        else:
            raise ValueError(
                "truncation interval rejects essentially all samples")
        flat = np.concatenate(parts)[:need]
    return SampleSet(values=flat.reshape(count, dim),
                     labels=np.ones(count), spec=spec, seed=seed, model=model)


@dataclass(frozen=True)
class SampleFactory:
    """Picklable per-group sample drawer for restart training."""

    spec: object
    count: int
    model: ErrorModel | None = None

    def __call__(self, group_index: int, seed) -> SampleSet:
        dim = 1 if self.model is None else self.model.dimension
        return draw(self.spec, self.count, dim, seed, model=self.model)


def empirical_moments(samples: SampleSet):
    """Per-component sample mean and unbiased variance, each shape (L,)."""
    if samples.size < 2:
        raise ValueError("need at least two samples for moments")
    return (samples.values.mean(axis=0), samples.values.var(axis=0, ddof=1))
