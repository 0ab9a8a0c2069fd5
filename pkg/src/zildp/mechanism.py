"""The zero-inflated Laplace release and its doubly-randomized variant.

Per-row noising is joint: one zero event and one SL vector per individual,
applied across that row's private columns. Public (unmasked) columns pass
through untouched.
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .distributions import NoiseParams, sample_sl, sample_zil
from .errors import DataError, ParameterError
from .rng import RngStream


@dataclass(frozen=True)
class SupportBox:
    """Declared per-attribute bounds with a mask of privatized columns."""

    lower: np.ndarray
    upper: np.ndarray
    private_mask: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "private_mask", np.asarray(self.private_mask, dtype=bool))
        if not (self.lower.shape == self.upper.shape == self.private_mask.shape):
            raise ParameterError("lower, upper and private_mask must share one shape")
        if self.lower.ndim != 1:
            raise ParameterError("support bounds must be 1-d")
        if np.any(self.lower >= self.upper):
            raise ParameterError("support requires lower_j < upper_j for every column")
        if self.column_names is not None:
            names = tuple(self.column_names)
            if len(names) != self.lower.size:
                raise ParameterError("column_names length must match the bounds")
            object.__setattr__(self, "column_names", names)

    @property
    def dim(self) -> int:
        return self.lower.size

    def to_dict(self) -> dict:
        d = {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "private_mask": self.private_mask.tolist(),
        }
        if self.column_names is not None:
            d["column_names"] = list(self.column_names)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SupportBox":
        return cls(
            np.asarray(d["lower"], dtype=float),
            np.asarray(d["upper"], dtype=float),
            np.asarray(d["private_mask"], dtype=bool),
            tuple(d["column_names"]) if "column_names" in d else None,
        )


def _require_masked(support: SupportBox):
    if not np.any(support.private_mask):
        raise ParameterError("the support declares no private columns")


def diam_attribute(support: SupportBox) -> float:
    """Largest single-attribute range among private columns."""
    _require_masked(support)
    widths = support.upper - support.lower
    return float(np.max(widths[support.private_mask]))


def diam_individual(support: SupportBox) -> float:
    """Euclidean diameter of the private sub-box."""
    _require_masked(support)
    widths = support.upper - support.lower
    return float(np.sqrt(np.sum(widths[support.private_mask] ** 2)))


@dataclass
class Dataset:
    """Values plus their declared support; masked columns are validated
    to lie inside the declared bounds on construction."""

    values: np.ndarray
    column_names: tuple[str, ...]
    support: SupportBox

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.column_names = tuple(self.column_names)
        if self.values.ndim != 2:
            raise DataError("dataset values must be an n x d matrix")
        if self.values.shape[1] != self.support.dim:
            raise DataError(
                f"dataset has {self.values.shape[1]} columns but the support "
                f"declares {self.support.dim}"
            )
        if len(self.column_names) != self.values.shape[1]:
            raise DataError("column_names length must match the data width")
        m = self.support.private_mask
        vals = self.values[:, m]
        lo = self.support.lower[m]
        hi = self.support.upper[m]
        bad = (vals < lo[None, :]) | (vals > hi[None, :])
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            col = np.flatnonzero(m)[j]
            raise DataError(
                f"value {vals[i, j]} in column {self.column_names[col]!r} "
                f"(row {i}) lies outside the declared support "
                f"[{lo[j]}, {hi[j]}]; refusing to clamp"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class ReleaseBundle:
    """Output of the doubly-random release: two aligned noisy matrices plus
    everything needed to recompute the privacy report."""

    x1: np.ndarray
    x2: np.ndarray
    params: NoiseParams
    support: SupportBox
    column_names: tuple[str, ...]
    seed_info: dict
    created_at: str


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def zil_release(data: Dataset, params: NoiseParams, rng: RngStream) -> np.ndarray:
    """One joint zero-inflated SL noise vector per row on private columns."""
    m = data.support.private_mask
    d_priv = int(np.sum(m))
    _require_masked(data.support)
    out = data.values.copy()
    noise = sample_zil(d_priv, params, data.n, rng)
    out[:, m] += noise
    return out


def drdp_release(data: Dataset, params: NoiseParams, rng: RngStream) -> ReleaseBundle:
    """Two-layer release: the zero-inflated matrix, then an extra SL layer
    with per-coordinate variance zero_mass * scale^2 on the same columns."""
    m = data.support.private_mask
    d_priv = int(np.sum(m))
    x1 = zil_release(data, params, rng.child(0))
    x2 = x1.copy()
    x2[:, m] += sample_sl(d_priv, params.zero_mass * params.scale**2, data.n, rng.child(1))
    return ReleaseBundle(
        x1=x1,
        x2=x2,
        params=params,
        support=data.support,
        column_names=data.column_names,
        seed_info=rng.describe(),
        created_at=_timestamp(),
    )


def privacy_report(support: SupportBox, params: NoiseParams,
                   epsilons=(0.25, 0.5, 1.0, 2.0, 4.0),
                   alphas=None) -> dict:
    """Achieved privacy in both neighboring-dataset senses.

    Reports c-values, points of the shrunk limiting trade-off curves for
    both, and an (epsilon, delta_dp) profile table.
    """
    from .tradeoff import beta_c_delta, delta_profile_zil

    if alphas is None:
        alphas = np.round(np.linspace(0.0, 1.0, 101), 4)
    c_a = diam_attribute(support) / params.scale
    c_i = diam_individual(support) / params.scale
    report = {
        "c_attribute": c_a,
        "c_individual": c_i,
        "zero_mass": params.zero_mass,
        "lambda": params.scale,
        "alphas": np.asarray(alphas, dtype=float).tolist(),
        "beta_adp": beta_c_delta(alphas, c_a, params.zero_mass).tolist(),
        "beta_dp": beta_c_delta(alphas, c_i, params.zero_mass).tolist(),
        "profile": [
            {"epsilon": float(e),
             "delta_dp": delta_profile_zil(c_i, float(e), params.zero_mass),
             "delta_dp_attribute": delta_profile_zil(c_a, float(e), params.zero_mass)}
            for e in epsilons
        ],
    }
    return report


# ---------------------------------------------------------------------------
# file formats


def load_support_json(path) -> SupportBox:
    with open(path) as fh:
        return SupportBox.from_dict(json.load(fh))


def load_dataset_csv(path, support: SupportBox) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        rows = [[float(v) for v in row] for row in reader if row]
    if support.column_names is not None and tuple(header) != support.column_names:
        raise DataError(
            f"{path}: CSV columns {header} do not match the support's "
            f"column_names {list(support.column_names)}"
        )
    return Dataset(np.asarray(rows, dtype=float), tuple(header), support)


def _write_matrix_csv(path, header, mat):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in mat:
            w.writerow([repr(float(v)) for v in row])


def write_bundle(bundle: ReleaseBundle, prefix: str) -> dict:
    """Persist as <prefix>.x1.csv, <prefix>.x2.csv and <prefix>.meta.json."""
    os.makedirs(os.path.dirname(prefix) or ".", exist_ok=True)
    _write_matrix_csv(f"{prefix}.x1.csv", bundle.column_names, bundle.x1)
    _write_matrix_csv(f"{prefix}.x2.csv", bundle.column_names, bundle.x2)
    meta = {
        "zero_mass": bundle.params.zero_mass,
        "lambda": bundle.params.scale,
        "seed": bundle.seed_info,
        "generator": bundle.seed_info.get("generator"),
        "support": bundle.support.to_dict(),
        "c_attribute": diam_attribute(bundle.support) / bundle.params.scale,
        "c_individual": diam_individual(bundle.support) / bundle.params.scale,
        "created_at": bundle.created_at,
    }
    with open(f"{prefix}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta


def read_bundle(prefix: str) -> ReleaseBundle:
    with open(f"{prefix}.meta.json") as fh:
        meta = json.load(fh)
    support = SupportBox.from_dict(meta["support"])

    def read_matrix(path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        return tuple(header), np.asarray(rows, dtype=float)

    names1, x1 = read_matrix(f"{prefix}.x1.csv")
    names2, x2 = read_matrix(f"{prefix}.x2.csv")
    if names1 != names2 or x1.shape != x2.shape:
        raise DataError(f"{prefix}: x1 and x2 files disagree on schema")
    return ReleaseBundle(
        x1=x1,
        x2=x2,
        params=NoiseParams(meta["zero_mass"], meta["lambda"]),
        support=support,
        column_names=names1,
        seed_info=meta["seed"],
        created_at=meta["created_at"],
    )
