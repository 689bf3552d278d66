"""Ground sets, costs and the noisy feedback oracle."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import truncnorm

from .kernels import GramMatrix, KernelSpec


class ItemSetError(ValueError):
    """Malformed or invalid item data.  ``row`` is 1-based (header is row 1)."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class Item(NamedTuple):
    id: int
    features: np.ndarray
    cost: float


@dataclass
class ItemSet:
    features: np.ndarray
    costs: np.ndarray
    budget_default: float = 1.0
    source_ids: Optional[list] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.costs = np.asarray(self.costs, dtype=float).ravel()
        n = self.features.shape[0]
        if n < 1:
            raise ItemSetError("an ItemSet needs at least one item")
        if self.costs.shape != (n,):
            raise ItemSetError(f"expected {n} costs, got {self.costs.size}")
        if not np.all(np.isfinite(self.costs)) or np.any(self.costs <= 0):
            raise ItemSetError("costs must be positive")
        if not np.all(np.isfinite(self.features)):
            raise ItemSetError("features must be finite")
        if not self.budget_default > 0:
            raise ItemSetError("budget_default must be positive")
        if self.source_ids is None:
            self.source_ids = list(range(n))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> Item:
        if not 0 <= i < self.n:
            raise IndexError(f"item id {i} out of range [0, {self.n})")
        return Item(i, self.features[i], float(self.costs[i]))

    @property
    def uniform_costs(self) -> bool:
        return bool(np.all(self.costs == self.costs[0]))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.costs).tobytes())
        return h.hexdigest()


class FeedbackOracle:
    """Hidden utilities f(v) >= 0 observed through bounded noise.

    Noise is Gaussian with standard deviation ``noise_bound / 2`` truncated
    to ``[-noise_bound, noise_bound]``, drawn i.i.d. per query from a single
    seeded stream.  Queries must therefore be issued in a fixed order for a
    run to be reproducible.
    """

    def __init__(self, true_values, noise_bound: float = 0.0, rng_seed: int = 0):
        values = np.asarray(true_values, dtype=float).ravel()
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ItemSetError("true values must be finite and non-negative")
        if noise_bound < 0:
            raise ItemSetError("noise bound must be non-negative")
        self._values = values
        self._values.setflags(write=False)
        self.noise_bound = float(noise_bound)
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)
        self.queries = 0

    @property
    def true_values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.size

    def reseed(self, seed: int) -> None:
        self.rng_seed = seed
        self._rng = np.random.default_rng(seed)
        self.queries = 0

    def query(self, i: int) -> float:
        if not 0 <= i < self._values.size:
            raise IndexError(f"item id {i} out of range [0, {self._values.size})")
        self.queries += 1
        if self.noise_bound == 0:
            return float(self._values[i])
        eps = truncnorm.rvs(-2.0, 2.0, scale=self.noise_bound / 2.0, random_state=self._rng)
        # guard the endpoints against rounding in the inverse-cdf sampler
        eps = min(max(float(eps), -self.noise_bound), self.noise_bound)
        return float(self._values[i]) + eps


def query(oracle: FeedbackOracle, i: int) -> float:
    return oracle.query(i)


# ---------------------------------------------------------------------------
# file formats


def _parse_float(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ItemSetError(f"column {column!r}: cannot parse {text!r} as a number", row)
    if not math.isfinite(value):
        raise ItemSetError(f"column {column!r}: non-finite value {text!r}", row)
    return value


def _feature_columns(keys):
    cols = [k for k in keys if k.startswith("f") and k[1:].isdigit()]
    return sorted(cols, key=lambda k: int(k[1:]))


def _build(records, budget_default):
    """records: list of (row_number, dict) with string or numeric values."""
    if not records:
        raise ItemSetError("no items in file")
    ids, feats, costs, values = [], [], [], []
    has_value = None
    d = None
    for row, rec in records:
        missing = [k for k in ("id", "cost") if k not in rec or rec[k] in (None, "")]
        if missing:
            raise ItemSetError(f"missing column(s) {missing}", row)
        fcols = _feature_columns(rec.keys())
        fcols = [c for c in fcols if rec[c] not in (None, "")]
        if [int(c[1:]) for c in fcols] != list(range(1, len(fcols) + 1)):
            raise ItemSetError("feature columns must be f1..fd without gaps", row)
        if d is None:
            d = len(fcols)
            if d == 0:
                raise ItemSetError("no feature columns", row)
        elif len(fcols) != d:
            raise ItemSetError(f"inconsistent dimension: expected {d}, got {len(fcols)}", row)
        ids.append(rec["id"])
        feats.append([_parse_float(rec[c], row, c) for c in fcols])
        cost = _parse_float(rec["cost"], row, "cost")
        if cost <= 0:
            raise ItemSetError(f"non-positive cost {cost}", row)
        costs.append(cost)
        row_has_value = rec.get("value") not in (None, "")
        if has_value is None:
            has_value = row_has_value
        elif has_value != row_has_value:
            raise ItemSetError("value column present on some rows only", row)
        if row_has_value:
            values.append(_parse_float(rec["value"], row, "value"))
    if len(set(map(str, ids))) != len(ids):
        raise ItemSetError("duplicate ids")
    items = ItemSet(np.array(feats), np.array(costs), budget_default, source_ids=ids)
    return items, (np.array(values) if has_value else None)


def load_itemset(path, format=None, noise_bound: float = 0.0, rng_seed: int = 0,
                 budget_default: float = 1.0):
    """Read an item file.

    Returns ``(items, oracle)``; ``oracle`` is None unless the file has a
    ``value`` column.  Ids are re-indexed to 0..n-1 in file order; the
    original ids are kept in ``items.source_ids``.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ItemSetError("empty file")
            records = []
            for row_number, rec in enumerate(reader, start=2):
                if None in rec:
                    raise ItemSetError("too many fields", row_number)
                records.append((row_number, rec))
    elif fmt == "json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ItemSetError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, list):
            raise ItemSetError("JSON item file must be an array of objects")
        records = []
        for row_number, rec in enumerate(data, start=1):
            if not isinstance(rec, dict):
                raise ItemSetError("expected an object", row_number)
            records.append((row_number, rec))
    else:
        raise ItemSetError(f"unknown format {fmt!r}")
    items, values = _build(records, budget_default)
    if values is None:
        return items, None
    if np.any(values < 0):
        raise ItemSetError("value column must be non-negative")
    return items, FeedbackOracle(values, noise_bound, rng_seed)


def save_itemset(path, items: ItemSet, values=None, format=None) -> None:
    """Write ``items`` (and optional true values) in the load_itemset format."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    fcols = [f"f{j + 1}" for j in range(items.d)]
    rows = []
    for i in range(items.n):
        rec = {"id": items.source_ids[i]}
        rec.update({c: float(x) for c, x in zip(fcols, items.features[i])})
        rec["cost"] = float(items.costs[i])
        if values is not None:
            rec["value"] = float(values[i])
        rows.append(rec)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for rec in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
    elif fmt == "json":
        path.write_text(json.dumps(rows, indent=1))
    else:
        raise ItemSetError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# synthetic instances


def sample_gp_values(K, rng, size=None, jitter_retries: int = 3) -> np.ndarray:
    """Zero-mean multivariate normal draws with covariance K + jitter*I.

    Jitter starts at 1e-10 * trace(K) / n and grows tenfold per retry.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    jitter = 1e-10 * max(np.trace(K) / n, 1e-300)
    for _ in range(jitter_retries + 1):
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
            break
        except np.linalg.LinAlgError:
            jitter *= 10
    else:
        raise RuntimeError("Gram matrix is not PSD even after jitter")
    shape = (n,) if size is None else (n, size)
    z = rng.standard_normal(shape)
    return L @ z if size is None else (L @ z).T


def _fourier_values(kernel: KernelSpec, X, rng, n_features=2000):
    # random Fourier features: approximate GP draw for an RBF kernel
    d = X.shape[1]
    omega = rng.standard_normal((d, n_features)) / kernel.bandwidth
    phase = rng.uniform(0.0, 2.0 * np.pi, n_features)
    weights = rng.standard_normal(n_features)
    return np.sqrt(2.0 / n_features) * (np.cos(X @ omega + phase) @ weights)


def synth_gp_itemset(n: int, d: int, kernel: KernelSpec, noise_bound: float,
                     cost_range=(1.0, 1.0), seed: int = 0, method: str = "auto",
                     budget_default: float = 1.0):
    """Random ground set with a utility drawn from a GP prior.

    Features are uniform on [0, 1]^d, the utility is one GP draw shifted so
    its minimum is zero, and costs are uniform on ``cost_range``.

    ``method`` is ``"exact"`` (Cholesky of the full Gram matrix),
    ``"fourier"`` (random Fourier features, RBF only) or ``"auto"``, which
    uses exact sampling up to n = 4000.  For linear-type kernels the weight
    space draw ``X @ w`` is exact at any size.
    """
    if n < 1 or d < 1:
        raise ItemSetError("n and d must be at least 1")
    c_min, c_max = map(float, cost_range)
    if not 0 < c_min <= c_max:
        raise ItemSetError("cost range must satisfy 0 < c_min <= c_max")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    kernel.check_dim(d)
    if method == "auto":
        method = "exact" if n <= 4000 else "fourier"
    if kernel.variant != "rbf":
        f = X @ rng.standard_normal(d)
    elif method == "exact":
        f = sample_gp_values(GramMatrix(kernel, X).entries, rng)
    elif method == "fourier":
        f = _fourier_values(kernel, X, rng)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    f = f - f.min()
    costs = rng.uniform(c_min, c_max, size=n) if c_max > c_min else np.full(n, c_min)
    items = ItemSet(X, costs, budget_default)
    oracle = FeedbackOracle(f, noise_bound, rng_seed=seed)
    return items, oracle
