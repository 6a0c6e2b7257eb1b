"""Dummy-variable regression of dissimilarity scores on the framework parameters,
relative importance by squared standardized coefficients, coefficient
difference tests and monotone trend scanning."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import stats

from .measures import MEASURES
from .sweep import format_real
from .transforms import KINDS

QUANTITATIVE = ("n", "k", "h", "q")
# term order of the model: intercept, main effects, pairwise interactions
TERMS = ("intercept", "n", "k", "q", "h", "n:k", "n:h", "n:q", "k:h", "k:q", "h:q")
SEGMENT_TERMS = TERMS[1:]
TREND_PARAMETERS = ("n", "k", "h", "q")

IMPORTANCE_HEADER = ("measure", "transform", "term", "beta", "beta_std", "importance", "importance_sqrt")
SIGNIFICANCE_HEADER = ("family", "fixed_key", "param_set", "item_a", "item_b", "p_value", "significant")


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class DesignSpec:
    cells: tuple[tuple[str, str], ...]  # (transform, measure)
    terms: tuple[str, ...]
    means: dict
    row_cells: np.ndarray

    @property
    def n_columns(self) -> int:
        return len(self.cells) * len(self.terms)

    def column(self, transform: str, measure: str, term: str) -> int:
        return self.cells.index((transform, measure)) * len(self.terms) + self.terms.index(term)

    def column_names(self) -> list[str]:
        return [f"{t}:{m}:{term}" for t, m in self.cells for term in self.terms]

    def intercept_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_columns, dtype=bool)
        mask[:: len(self.terms)] = self.terms[0] == "intercept"
        return mask


def _term_values(term: str, centered: dict) -> np.ndarray:
    if term == "intercept":
        return np.ones_like(centered["n"])
    out = np.ones_like(centered["n"])
    for var in term.split(":"):
        out = out * centered[var]
    return out


def records_to_arrays(records) -> dict:
    return {
        "n": np.array([r.n for r in records], dtype=np.float64),
        "k": np.array([r.k for r in records], dtype=np.float64),
        "h": np.array([r.h for r in records], dtype=np.float64),
        "q": np.array([r.q for r in records], dtype=np.float64),
        "transform": np.array([r.transform for r in records]),
        "measure": np.array([r.measure for r in records]),
        "y": np.array([r.y for r in records], dtype=np.float64),
    }


def build_design_matrix(records):
    """Cell-means design: one block of 11 columns per (transform, measure) cell.

    Quantitative variables are centered over the whole table before the
    interaction products are formed. Returns a sparse ``X``, ``y`` and the
    :class:`DesignSpec` describing the columns.
    """
    data = records_to_arrays(records)
    if data["y"].size == 0:
        raise RegressionError("no records to fit")
    means = {v: float(data[v].mean()) for v in QUANTITATIVE}
    centered = {v: data[v] - means[v] for v in QUANTITATIVE}
    present = set(zip(data["transform"].tolist(), data["measure"].tolist()))
    cells = tuple((t, m) for t in KINDS for m in MEASURES if (t, m) in present)
    cell_index = {c: i for i, c in enumerate(cells)}
    row_cells = np.array([cell_index[c] for c in zip(data["transform"].tolist(), data["measure"].tolist())])
    spec = DesignSpec(cells, TERMS, means, row_cells)

    for c, (t, m) in enumerate(cells):
        rows = row_cells == c
        for v in QUANTITATIVE:
            if np.unique(centered[v][rows]).size < 2:
                raise RegressionError(f"column {t}:{m}:{v} is constant within its cell; design is rank deficient")

    n_terms = len(TERMS)
    values = np.column_stack([_term_values(term, centered) for term in TERMS])
    row_idx = np.repeat(np.arange(values.shape[0]), n_terms)
    col_idx = (row_cells[:, None] * n_terms + np.arange(n_terms)).ravel()
    X = sp.csr_matrix((values.ravel(), (row_idx, col_idx)), shape=(values.shape[0], spec.n_columns))
    return X, data["y"], spec


@dataclass(frozen=True)
class RegressionModel:
    coefficients: np.ndarray
    covariance: np.ndarray
    residual_sigma: float
    r_squared: float
    n_obs: int
    x_sd: np.ndarray
    x_rms: np.ndarray
    y_sd: float
    y_mean: float
    column_names: tuple[str, ...]
    intercept_mask: np.ndarray
    spec: DesignSpec | None = None

    @property
    def df_resid(self) -> int:
        return self.n_obs - self.coefficients.size


def _qr_solve(X: np.ndarray, y: np.ndarray, names, tol: float = 1e-10):
    """Least squares by Householder QR on unit-norm columns; returns beta and (X'X)^-1."""
    norms = np.linalg.norm(X, axis=0)
    for j in np.flatnonzero(norms == 0):
        raise RegressionError(f"column {names[j]} is identically zero; design is rank deficient")
    Q, R = np.linalg.qr(X / norms, mode="reduced")
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(diag <= tol * diag.max())
    if bad.size:
        raise RegressionError(f"design is rank deficient at column {names[bad[0]]}")
    beta = scipy.linalg.solve_triangular(R, Q.T @ y) / norms
    r_inv = scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
    xtx_inv = (r_inv @ r_inv.T) / np.outer(norms, norms)
    return beta, xtx_inv


def fit_ols(X, y, spec: DesignSpec | None = None) -> RegressionModel:
    """Ordinary least squares through an orthogonal factorization.

    With a :class:`DesignSpec` the block-diagonal structure of the cell-means
    design is used: each cell is factorized on its own rows and the residual
    variance is pooled over all cells. Without one, ``X`` is factorized densely.
    """
    y = np.asarray(y, dtype=np.float64)
    n_obs = y.size
    names = spec.column_names() if spec is not None else [f"x{j}" for j in range(X.shape[1])]
    p = X.shape[1]
    if n_obs <= p:
        raise RegressionError(f"need more observations ({n_obs}) than coefficients ({p})")

    if spec is not None:
        Xc = X.tocsc() if sp.issparse(X) else sp.csc_matrix(X)
        width = len(spec.terms)
        beta = np.zeros(p)
        xtx_inv = np.zeros((p, p))
        for c in range(len(spec.cells)):
            rows = np.flatnonzero(spec.row_cells == c)
            cols = slice(c * width, (c + 1) * width)
            block = Xc[:, cols][rows].toarray()
            b, inv = _qr_solve(block, y[rows], names[cols])
            beta[cols] = b
            xtx_inv[cols, cols] = inv
        fitted = X @ beta
    else:
        Xd = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)
        beta, xtx_inv = _qr_solve(Xd, y, names)
        fitted = Xd @ beta

    resid = y - fitted
    sse = float(resid @ resid)
    y_mean = float(y.mean())
    sst = float(((y - y_mean) ** 2).sum())
    sigma2 = sse / (n_obs - p)
    if sp.issparse(X):
        col_mean = np.asarray(X.mean(axis=0)).ravel()
        col_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
    else:
        Xd = np.asarray(X, dtype=np.float64)
        col_mean = Xd.mean(axis=0)
        col_sq = (Xd * Xd).mean(axis=0)
    x_sd = np.sqrt(np.maximum(col_sq - col_mean**2, 0.0))
    mask = spec.intercept_mask() if spec is not None else np.zeros(p, dtype=bool)
    return RegressionModel(
        coefficients=beta,
        covariance=sigma2 * xtx_inv,
        residual_sigma=float(np.sqrt(sigma2)),
        r_squared=1.0 - sse / sst if sst > 0 else 1.0,
        n_obs=n_obs,
        x_sd=x_sd,
        x_rms=np.sqrt(col_sq),
        y_sd=float(np.sqrt(sst / n_obs)),
        y_mean=y_mean,
        column_names=tuple(names),
        intercept_mask=mask,
        spec=spec,
    )


def fit_records(records) -> RegressionModel:
    X, y, spec = build_design_matrix(records)
    return fit_ols(X, y, spec)


def standardized_coefficients(model: RegressionModel) -> np.ndarray:
    """Beta weights ``beta * sd(x) / sd(y)``, with sd over all rows.

    Cell intercepts are the exception: a cell's intercept is scored by its
    deviation from the overall mean of ``y``, scaled by the root mean square of
    its indicator column. Together with the slope terms, which have zero mean on
    a balanced grid, the squared weights then add up to R^2.
    """
    if model.y_sd == 0:
        raise RegressionError("y has zero variance; standardized coefficients are undefined")
    out = model.coefficients * model.x_sd / model.y_sd
    m = model.intercept_mask
    out[m] = (model.coefficients[m] - model.y_mean) * model.x_rms[m] / model.y_sd
    return out


@dataclass
class ImportanceTable:
    """Per (measure, transform) cell: coefficient, beta weight and importance for each term."""

    cells: tuple[tuple[str, str], ...]  # (transform, measure)
    terms: tuple[str, ...]
    beta: np.ndarray  # shape (cells, terms)
    beta_std: np.ndarray
    trends: dict = field(default_factory=dict)  # (measure, transform, parameter) -> flag

    @property
    def importance(self) -> np.ndarray:
        return self.beta_std**2

    @property
    def importance_sqrt(self) -> np.ndarray:
        return np.abs(self.beta_std)

    @property
    def measures(self) -> tuple[str, ...]:
        return tuple(m for m in MEASURES if any(c[1] == m for c in self.cells))

    @property
    def transforms(self) -> tuple[str, ...]:
        return tuple(t for t in KINDS if any(c[0] == t for c in self.cells))

    def get(self, measure: str, transform: str, term: str, what: str = "importance") -> float:
        row = self.cells.index((transform, measure))
        return float(getattr(self, what)[row, self.terms.index(term)])

    def cell(self, measure: str, transform: str, what: str = "importance") -> dict:
        row = self.cells.index((transform, measure))
        return dict(zip(self.terms, getattr(self, what)[row].tolist()))

    def rows(self):
        imp, root = self.importance, self.importance_sqrt
        for m in self.measures:
            for t in self.transforms:
                c = self.cells.index((t, m))
                for j, term in enumerate(self.terms):
                    yield (m, t, term, self.beta[c, j], self.beta_std[c, j], imp[c, j], root[c, j])


def relative_importance(model: RegressionModel) -> ImportanceTable:
    if model.spec is None:
        raise RegressionError("relative importance needs a model fitted on a cell-means design")
    shape = (len(model.spec.cells), len(model.spec.terms))
    return ImportanceTable(
        cells=model.spec.cells,
        terms=model.spec.terms,
        beta=model.coefficients.reshape(shape).copy(),
        beta_std=standardized_coefficients(model).reshape(shape),
    )


def write_importance_csv(table: ImportanceTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(IMPORTANCE_HEADER)
        for m, t, term, *vals in table.rows():
            writer.writerow((m, t, term, *(format_real(v) for v in vals)))


def read_importance_csv(path) -> ImportanceTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in IMPORTANCE_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise RegressionError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    values = defaultdict(dict)
    for row in rows:
        values[(row["transform"], row["measure"])][row["term"]] = (float(row["beta"]), float(row["beta_std"]))
    cells = tuple((t, m) for t in KINDS for m in MEASURES if (t, m) in values)
    terms = tuple(term for term in TERMS if term in values[cells[0]])
    for c in cells:
        if set(values[c]) != set(terms):
            raise RegressionError(f"{path}: cell {c[1]}/{c[0]} does not list the same terms as the others")
    beta = np.array([[values[c][term][0] for term in terms] for c in cells])
    beta_std = np.array([[values[c][term][1] for term in terms] for c in cells])
    return ImportanceTable(cells, terms, beta, beta_std)


def coefficient_difference_test(model: RegressionModel, idx_a: int, idx_b: int) -> float:
    """Two-sided t test of equality of two coefficients; returns the p-value."""
    if idx_a == idx_b:
        return 1.0
    cov = model.covariance
    var = cov[idx_a, idx_a] + cov[idx_b, idx_b] - 2 * cov[idx_a, idx_b]
    if not var > 0:
        raise RegressionError("variance of the coefficient difference is not positive")
    t = (model.coefficients[idx_a] - model.coefficients[idx_b]) / np.sqrt(var)
    return float(2 * stats.t.sf(abs(t), model.df_resid))


def significance_rows(model: RegressionModel, alpha: float = 0.05, terms=SEGMENT_TERMS):
    """Pairwise difference tests for the two families: transformations compared
    within each measure, and measures compared within each transformation."""
    spec = model.spec
    if spec is None:
        raise RegressionError("significance matrices need a model fitted on a cell-means design")
    transforms = tuple(t for t in KINDS if any(c[0] == t for c in spec.cells))
    measures = tuple(m for m in MEASURES if any(c[1] == m for c in spec.cells))
    rows = []
    for m in measures:
        for term in terms:
            for a, b in product(transforms, repeat=2):
                p = coefficient_difference_test(model, spec.column(a, m, term), spec.column(b, m, term))
                rows.append(("transformations", m, term, a, b, p, p <= alpha))
    for t in transforms:
        for term in terms:
            for a, b in product(measures, repeat=2):
                p = coefficient_difference_test(model, spec.column(t, a, term), spec.column(t, b, term))
                rows.append(("measures", t, term, a, b, p, p <= alpha))
    return rows


def write_significance_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SIGNIFICANCE_HEADER)
        for family, key, term, a, b, p, sig in rows:
            writer.writerow((family, key, term, a, b, format_real(p), "true" if sig else "false"))


def read_significance_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SIGNIFICANCE_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise RegressionError(f"{path}: missing column(s) {', '.join(missing)}")
        return [(r["family"], r["fixed_key"], r["param_set"], r["item_a"], r["item_b"],
                 float(r["p_value"]), r["significant"] == "true") for r in reader]


INCREASING, DECREASING, NO_TREND = "increasing", "decreasing", "none"


def monotonicity_scan(records, measure: str, transform: str, parameter: str, tol: float = 1e-9) -> str:
    """Trend of ``y`` along ``parameter`` that holds for every setting of the other parameters."""
    if parameter not in TREND_PARAMETERS:
        raise RegressionError(f"unknown parameter {parameter!r}")
    others = tuple(p for p in TREND_PARAMETERS if p != parameter)
    series = defaultdict(dict)
    for r in records:
        if r.measure == measure and r.transform == transform:
            series[tuple(getattr(r, p) for p in others)][getattr(r, parameter)] = r.y
    if not series:
        raise RegressionError(f"no records for {measure}/{transform}")
    axis = sorted({v for s in series.values() for v in s})
    levels = [sorted({key[i] for key in series}) for i in range(len(others))]
    expected = 1
    for lv in levels:
        expected *= len(lv)
    if len(series) != expected or any(len(s) != len(axis) for s in series.values()):
        raise RegressionError(f"incomplete grid for {measure}/{transform} along {parameter}")
    if len(axis) < 2:
        return NO_TREND
    diffs = np.diff(np.array([[s[v] for v in axis] for s in series.values()]), axis=1)
    if (diffs >= -tol).all() and (diffs > tol).any():
        return INCREASING
    if (diffs <= tol).all() and (diffs < -tol).any():
        return DECREASING
    return NO_TREND


def scan_trends(records, table: ImportanceTable | None = None, tol: float = 1e-9) -> dict:
    """Trend flags for every (measure, transform, parameter) present in ``records``."""
    cells = sorted({(r.measure, r.transform) for r in records},
                   key=lambda c: (MEASURES.index(c[0]), KINDS.index(c[1])))
    trends = {(m, t, p): monotonicity_scan(records, m, t, p, tol)
              for m, t in cells for p in TREND_PARAMETERS}
    if table is not None:
        table.trends = trends
    return trends
