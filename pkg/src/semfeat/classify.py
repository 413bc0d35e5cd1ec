"""Linear SVM trained by sequential minimal optimization, one-vs-one multiclass.

The dual problem per binary machine is

    max  sum(alpha) - 1/2 * sum_ij alpha_i alpha_j y_i y_j <x_i, x_j>
    s.t. 0 <= alpha_i <= C,  sum_i alpha_i y_i = 0

solved by pairwise coordinate ascent: the maximal KKT violator is paired
with the partner maximizing |E1 - E2|, the pair is updated analytically
with box clipping, and the error cache and bias are refreshed. Both dual
constraints hold after every step and the dual objective never decreases.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import FeatureVector

log = logging.getLogger(__name__)

DEFAULT_C = 1.0
DEFAULT_TOL = 1e-3
_EPS = 1e-12


@dataclass(frozen=True)
class BinarySvmModel:
    alphas: np.ndarray
    bias: float
    vectors: np.ndarray
    labels: np.ndarray
    C: float
    tol: float
    weights: np.ndarray
    objective_history: tuple[float, ...] = ()

    def decision(self, x) -> float | np.ndarray:
        out = np.asarray(x, dtype=float) @ self.weights + self.bias
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MulticlassModel:
    """One binary machine per unordered category pair; lower index is +1."""

    categories: tuple[str, ...]
    machines: tuple[tuple[int, int, BinarySvmModel], ...]
    C: float
    tol: float

    @property
    def dim(self) -> int:
        return self.machines[0][2].vectors.shape[1]


@dataclass(frozen=True)
class EvalReport:
    categories: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    accuracy: float
    per_category: dict[str, float | None]
    fold_accuracies: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "categories": list(self.categories),
            "confusion": [list(row) for row in self.confusion],
            "accuracy": self.accuracy,
            "per_category": dict(self.per_category),
            "fold_accuracies": list(self.fold_accuracies)
            if self.fold_accuracies is not None
            else None,
        }


class _Smo:
    """Bias-free error cache; the bias is fixed only at convergence.

    With E_i = sum_j alpha_j y_j K_ij - y_i, optimality of the dual is
    equivalent to max(E over I_low) - min(E over I_up) <= 0, where I_up
    holds the points whose alpha*y can still move up and I_low those that
    can move down. The midpoint of that interval is the optimal bias, so
    stopping at gap < 2*tol leaves every per-point KKT violation below tol.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, C: float, tol: float):
        self.X = X
        self.y = y
        self.C = C
        self.tol = tol
        self.n = len(y)
        self.K = X @ X.T
        self.alphas = np.zeros(self.n)
        self.b = 0.0
        self.E = -y.astype(float)  # decision minus label, zero alphas
        self.objective = self._objective()
        self.history = [self.objective]

    def _objective(self) -> float:
        ay = self.alphas * self.y
        return float(self.alphas.sum() - 0.5 * (ay @ self.K @ ay))

    def _index_sets(self) -> tuple[np.ndarray, np.ndarray]:
        pos, neg = self.y > 0, self.y < 0
        below_c = self.alphas < self.C - _EPS
        above_0 = self.alphas > _EPS
        i_up = (pos & below_c) | (neg & above_0)
        i_low = (neg & below_c) | (pos & above_0)
        return i_up, i_low

    def _bias_and_violations(self) -> tuple[float, np.ndarray]:
        i_up, i_low = self._index_sets()
        lo = float(self.E[i_up].min())  # b must be >= -lo
        hi = float(self.E[i_low].max())  # b must be <= -hi
        b = -0.5 * (lo + hi)
        v = np.zeros(self.n)
        v[i_up] = np.maximum(v[i_up], -self.E[i_up] - b)
        v[i_low] = np.maximum(v[i_low], b + self.E[i_low])
        return b, v

    def _pair_objective(self, i1: int, i2: int, t: float) -> float:
        a = self.alphas.copy()
        s = self.y[i1] * self.y[i2]
        a[i1] = self.alphas[i1] + s * (self.alphas[i2] - t)
        a[i2] = t
        ay = a * self.y
        return float(a.sum() - 0.5 * (ay @ self.K @ ay))

    def _step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alphas[i1], self.alphas[i2]
        y1, y2 = self.y[i1], self.y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if s < 0:
            L, H = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        if H - L < _EPS:
            return False
        k11, k12, k22 = self.K[i1, i1], self.K[i1, i2], self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > _EPS:
            a2_new = a2 + y2 * (E1 - E2) / eta
            a2_new = min(H, max(L, a2_new))
        else:
            # flat direction (duplicate or colinear points): pick the better end
            obj_l, obj_h = self._pair_objective(i1, i2, L), self._pair_objective(i1, i2, H)
            if obj_l > obj_h + _EPS:
                a2_new = L
            elif obj_h > obj_l + _EPS:
                a2_new = H
            else:
                return False
        if abs(a2_new - a2) < _EPS * (a2_new + a2 + _EPS):
            return False
        a1_new = min(self.C, max(0.0, a1 + s * (a2 - a2_new)))

        d1, d2 = y1 * (a1_new - a1), y2 * (a2_new - a2)
        self.E += d1 * self.K[i1] + d2 * self.K[i2]
        self.alphas[i1], self.alphas[i2] = a1_new, a2_new

        # dual feasibility must survive every step
        assert -_EPS <= self.alphas.min() and self.alphas.max() <= self.C + _EPS
        assert abs(float(self.alphas @ self.y)) < 1e-8
        new_obj = self._objective()
        assert new_obj >= self.objective - 1e-9 * max(1.0, abs(self.objective)), (
            "dual objective decreased"
        )
        self.objective = new_obj
        self.history.append(new_obj)
        return True

    def _partner_order(self, i1: int, i_up: np.ndarray, i_low: np.ndarray) -> np.ndarray:
        # A violating up-mover pairs with the I_low side and vice versa, so
        # the |E1 - E2| argmax lands on the other end of the maximal
        # violating pair. Remaining indices follow as a fallback.
        up_viol = -self.E[i1] - self.b if i_up[i1] else -np.inf
        low_viol = self.b + self.E[i1] if i_low[i1] else -np.inf
        opposite = i_low if up_viol >= low_viol else i_up
        gap = np.abs(self.E - self.E[i1])
        primary = np.argsort(-np.where(opposite, gap, -np.inf), kind="stable")
        rest = np.argsort(-np.where(opposite, -np.inf, gap), kind="stable")
        k = int(opposite.sum())
        return np.concatenate([primary[:k], rest[: self.n - k]])

    def solve(self, max_steps: int | None = None) -> None:
        # near-colinear support candidates make pairwise ascent march in
        # tiny steps, so the ceiling is generous; steps are O(n) cheap
        if max_steps is None:
            max_steps = max(20000, 1000 * self.n)
        for _ in range(max_steps):
            self.b, v = self._bias_and_violations()
            order1 = np.argsort(-v, kind="stable")
            if v[order1[0]] < self.tol:
                return
            i_up, i_low = self._index_sets()
            progressed = False
            for i1 in map(int, order1):
                if v[i1] < self.tol:
                    break
                for i2 in map(int, self._partner_order(i1, i_up, i_low)):
                    if i2 != i1 and self._step(i1, i2):
                        progressed = True
                        break
                if progressed:
                    break
            if not progressed:
                # unreachable while the gap exceeds 2*tol; guards roundoff
                log.warning(
                    "SMO stalled at max KKT violation %.3g (tol %.3g)",
                    float(v.max()), self.tol,
                )
                break
        else:
            log.warning("SMO stopped at step limit %d", max_steps)
        self.b, _ = self._bias_and_violations()


def train_binary(
    points: Sequence[tuple[Sequence[float], int]],
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
) -> BinarySvmModel:
    """Train one linear machine on (vector, +-1) pairs."""
    if C <= 0.0:
        raise ValueError("C must be positive")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    X = np.asarray([list(v) for v, _ in points], dtype=float)
    y = np.asarray([lab for _, lab in points], dtype=float)
    if X.size and not np.isfinite(X).all():
        raise ValueError("non-finite training vector")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1 or -1")
    if (y > 0).sum() == 0 or (y < 0).sum() == 0:
        raise ValueError("need at least one point of each sign")
    solver = _Smo(X, y, C, tol)
    solver.solve()
    weights = X.T @ (solver.alphas * y)
    return BinarySvmModel(
        alphas=solver.alphas,
        bias=solver.b,
        vectors=X,
        labels=y,
        C=C,
        tol=tol,
        weights=weights,
        objective_history=tuple(solver.history),
    )


def kkt_violations(model: BinarySvmModel) -> np.ndarray:
    """Per-point KKT violation magnitudes of a trained machine."""
    g = model.labels * model.decision(model.vectors) - 1.0
    v = np.zeros(len(g))
    up = (model.alphas < model.C - _EPS) & (g < 0)
    down = (model.alphas > _EPS) & (g > 0)
    v[up] = -g[up]
    v[down] = np.maximum(v[down], g[down])
    return v


def dual_objective(model: BinarySvmModel) -> float:
    ay = model.alphas * model.labels
    return float(model.alphas.sum() - 0.5 * (ay @ (model.vectors @ model.vectors.T) @ ay))


def train_multiclass(
    features: Sequence[FeatureVector],
    categories: Sequence[str],
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
) -> MulticlassModel:
    """One binary machine per category pair over the labeled vectors."""
    categories = tuple(categories)
    if len(categories) < 2:
        raise ValueError("need at least 2 categories")
    counts = {c: 0 for c in categories}
    for v in features:
        if v.label not in counts:
            raise ValueError(f"vector {v.image_id!r} has unknown category {v.label!r}")
        counts[v.label] += 1
    empty = [c for c, n in counts.items() if n == 0]
    if empty:
        raise ValueError(f"categories without training vectors: {empty}")

    machines = []
    for i in range(len(categories)):
        for j in range(i + 1, len(categories)):
            pts = [
                (v.values, 1 if v.label == categories[i] else -1)
                for v in features
                if v.label in (categories[i], categories[j])
            ]
            machines.append((i, j, train_binary(pts, C, tol)))
    return MulticlassModel(categories, tuple(machines), C, tol)


def predict(model: MulticlassModel, v: FeatureVector | Sequence[float]) -> str:
    """Majority vote over pairwise machines; ties go to the lowest index."""
    x = np.asarray(v.values if isinstance(v, FeatureVector) else v, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"dimension mismatch: expected {model.dim}, got {x.shape}")
    votes = np.zeros(len(model.categories), dtype=int)
    for i, j, mach in model.machines:
        d = mach.decision(x)
        votes[i if d > 0 else j if d < 0 else i] += 1
    return model.categories[int(np.argmax(votes))]


def _report_from_confusion(
    categories: tuple[str, ...],
    confusion: np.ndarray,
    fold_accuracies: tuple[float, ...] | None = None,
) -> EvalReport:
    total = int(confusion.sum())
    trace = int(np.trace(confusion))
    per_category: dict[str, float | None] = {}
    for idx, cat in enumerate(categories):
        row = int(confusion[idx].sum())
        per_category[cat] = (int(confusion[idx, idx]) / row) if row else None
    return EvalReport(
        categories=categories,
        confusion=tuple(tuple(int(x) for x in row) for row in confusion),
        accuracy=(trace / total) if total else 0.0,
        per_category=per_category,
        fold_accuracies=fold_accuracies,
    )


def evaluate(model: MulticlassModel, features: Sequence[FeatureVector]) -> EvalReport:
    index = {c: i for i, c in enumerate(model.categories)}
    confusion = np.zeros((len(model.categories), len(model.categories)), dtype=int)
    for v in features:
        if v.label not in index:
            raise ValueError(f"vector {v.image_id!r} has unknown category {v.label!r}")
        confusion[index[v.label], index[predict(model, v)]] += 1
    return _report_from_confusion(model.categories, confusion)


def cross_validate(
    features: Sequence[FeatureVector],
    folds: int,
    seed: int,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    categories: Sequence[str] | None = None,
) -> EvalReport:
    """Stratified k-fold evaluation, deterministic per seed.

    Folds are assigned round-robin over a per-category shuffle, so fold
    sizes differ by at most one within each category.
    """
    import random

    if folds < 2:
        raise ValueError("folds must be >= 2")
    if categories is None:
        seen: list[str] = []
        for v in features:
            if v.label not in seen:
                seen.append(v.label)
        categories = seen
    categories = tuple(categories)

    rng = random.Random(seed)
    fold_of = {}
    for cat in categories:
        idxs = [i for i, v in enumerate(features) if v.label == cat]
        if len(idxs) < 2:
            raise ValueError(f"category {cat!r} has {len(idxs)} vector(s); need >= 2")
        rng.shuffle(idxs)
        for t, i in enumerate(idxs):
            fold_of[i] = t % folds

    index = {c: i for i, c in enumerate(categories)}
    confusion = np.zeros((len(categories), len(categories)), dtype=int)
    fold_accuracies = []
    for f in range(folds):
        test = [v for i, v in enumerate(features) if fold_of[i] == f]
        if not test:
            continue
        train = [v for i, v in enumerate(features) if fold_of[i] != f]
        model = train_multiclass(train, categories, C, tol)
        correct = 0
        for v in test:
            pred = predict(model, v)
            confusion[index[v.label], index[pred]] += 1
            correct += pred == v.label
        fold_accuracies.append(correct / len(test))
    return _report_from_confusion(categories, confusion, tuple(fold_accuracies))


def save_model(model: MulticlassModel, path) -> None:
    payload = {
        "categories": list(model.categories),
        "C": model.C,
        "tol": model.tol,
        "machines": [
            {
                "pos": i,
                "neg": j,
                "alphas": list(map(float, m.alphas)),
                "bias": m.bias,
                "vectors": [list(map(float, row)) for row in m.vectors],
                "labels": list(map(int, m.labels)),
            }
            for i, j, m in model.machines
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> MulticlassModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    machines = []
    for m in payload["machines"]:
        X = np.asarray(m["vectors"], dtype=float)
        y = np.asarray(m["labels"], dtype=float)
        alphas = np.asarray(m["alphas"], dtype=float)
        machines.append(
            (
                int(m["pos"]),
                int(m["neg"]),
                BinarySvmModel(
                    alphas=alphas,
                    bias=float(m["bias"]),
                    vectors=X,
                    labels=y,
                    C=float(payload["C"]),
                    tol=float(payload["tol"]),
                    weights=X.T @ (alphas * y),
                ),
            )
        )
    return MulticlassModel(
        tuple(payload["categories"]), tuple(machines), float(payload["C"]), float(payload["tol"])
    )
