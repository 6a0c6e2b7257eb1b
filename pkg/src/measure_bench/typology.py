"""Typology of (measure, transformation) cells from their importance profiles:
Hellinger distances, PAM k-medoids and silhouette-based selection of k."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .regression import SEGMENT_TERMS, ImportanceTable
from .sweep import format_real


class TypologyError(ValueError):
    pass


@dataclass(frozen=True)
class ImportanceProfile:
    key: tuple[str, str]  # (measure, transform)
    terms: tuple[str, ...]
    proportions: np.ndarray


def importance_profiles(table: ImportanceTable, terms=SEGMENT_TERMS) -> list[ImportanceProfile]:
    """One profile per cell: squared beta weights of ``terms`` scaled to sum to 1.

    The default terms are the ten segments of a stacked bar; the cell intercept
    only reflects the cell's mean score and is left out.
    """
    terms = tuple(terms)
    profiles = []
    for m in table.measures:
        for t in table.transforms:
            cell = table.cell(m, t)
            values = np.array([cell[term] for term in terms], dtype=np.float64)
            total = values.sum()
            if not total > 0:
                raise TypologyError(f"cell {m}/{t} has zero total importance")
            profiles.append(ImportanceProfile((m, t), terms, values / total))
    return profiles


def hellinger(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise TypologyError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(((np.sqrt(a) - np.sqrt(b)) ** 2).sum() / 2))


def distance_matrix(profiles) -> np.ndarray:
    roots = np.sqrt(np.array([p.proportions for p in profiles]))
    diff = roots[:, None, :] - roots[None, :, :]
    return np.sqrt((diff**2).sum(axis=2) / 2)


def _cost(dist: np.ndarray, medoids) -> float:
    return float(dist[:, medoids].min(axis=1).sum())


def k_medoids(dist, k: int, return_history: bool = False):
    """PAM: greedy BUILD then SWAP until no swap lowers the total distance.

    Ties are broken by the lowest index, so the result is fully deterministic.
    Returns ``(labels, medoids)``, labels being indices into the sorted medoids,
    plus the objective after BUILD and every accepted swap if requested.
    """
    dist = np.asarray(dist, dtype=np.float64)
    size = dist.shape[0]
    if not 2 <= k < size:
        raise TypologyError(f"k must satisfy 2 <= k < {size}, got {k}")

    medoids = [int(np.argmin(dist.sum(axis=0)))]
    nearest = dist[:, medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - dist, 0).sum(axis=0)
        gains[medoids] = -np.inf
        best = int(np.argmax(gains))
        medoids.append(best)
        nearest = np.minimum(nearest, dist[:, best])

    cost = _cost(dist, medoids)
    history = [cost]
    while True:
        best_cost, best_swap = cost, None
        for mi in range(k):
            for cand in range(size):
                if cand in medoids:
                    continue
                trial = medoids.copy()
                trial[mi] = cand
                c = _cost(dist, trial)
                if c < best_cost - 1e-12:
                    best_cost, best_swap = c, (mi, cand)
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        cost = best_cost
        history.append(cost)

    medoids = sorted(medoids)
    labels = np.argmin(dist[:, medoids], axis=1)
    if return_history:
        return labels, medoids, history
    return labels, medoids


def silhouette(dist, labels) -> float:
    """Mean silhouette width; singleton clusters contribute 0."""
    dist = np.asarray(dist, dtype=np.float64)
    labels = np.asarray(labels)
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise TypologyError("silhouette needs at least two clusters")
    widths = np.zeros(labels.size)
    for i in range(labels.size):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, labels == c].mean() for c in clusters if c != labels[i])
        denom = max(a, b)
        widths[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(widths.mean())


@dataclass
class TypologyResult:
    keys: list[tuple[str, str]]
    distance: np.ndarray
    assignments: dict  # k -> labels
    medoids: dict  # k -> medoid indices
    silhouettes: dict  # k -> silhouette
    chosen_k: int

    def labels(self, k: int | None = None) -> np.ndarray:
        return self.assignments[self.chosen_k if k is None else k]

    def medoid_keys(self, k: int | None = None) -> list[tuple[str, str]]:
        return [self.keys[i] for i in self.medoids[self.chosen_k if k is None else k]]

    def grid(self, k: int | None = None) -> dict:
        """(measure, transform) -> cluster id for the chosen (or given) k."""
        return dict(zip(self.keys, self.labels(k).tolist()))


def select_typology(profiles, max_k: int = 10, parsimony: bool = False,
                    margin: float = 0.05) -> TypologyResult:
    """Cluster the profiles for every k in 2..min(max_k, count-1).

    The default choice is the k with the best silhouette. With ``parsimony``,
    the smallest k whose silhouette is within ``margin`` of the best wins.
    """
    if len(profiles) < 3:
        raise TypologyError("need at least 3 profiles")
    dist = distance_matrix(profiles)
    assignments, medoids, sils = {}, {}, {}
    for k in range(2, min(max_k, len(profiles) - 1) + 1):
        labels, meds = k_medoids(dist, k)
        assignments[k], medoids[k] = labels, meds
        sils[k] = silhouette(dist, labels) if np.unique(labels).size > 1 else -1.0
    best = max(sils.values())
    if parsimony:
        chosen = min(k for k, s in sils.items() if s >= best - margin)
    else:
        chosen = min(k for k, s in sils.items() if s == best)
    return TypologyResult([p.key for p in profiles], dist, assignments, medoids, sils, chosen)


def write_typology_csv(result: TypologyResult, path, k: int | None = None) -> None:
    k = result.chosen_k if k is None else k
    medoid_set = set(result.medoids[k])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("measure", "transform", "cluster_id", "is_medoid"))
        for i, (m, t) in enumerate(result.keys):
            writer.writerow((m, t, int(result.assignments[k][i]), "true" if i in medoid_set else "false"))


def write_silhouette_csv(result: TypologyResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("k", "silhouette"))
        for k in sorted(result.silhouettes):
            writer.writerow((k, format_real(result.silhouettes[k])))


def read_typology_csv(path) -> dict:
    with open(path, newline="") as fh:
        return {(r["measure"], r["transform"]): (int(r["cluster_id"]), r["is_medoid"] == "true")
                for r in csv.DictReader(fh)}
