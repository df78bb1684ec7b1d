"""Audible-noise study inputs and table serialization.

The 36-run design (a 2^(7-2) fractional factorial plus four replicated
runs at the high levels of all factors) is embedded below in cell-means
coding: an intercept followed by one indicator column per level of each of
the seven factors A-G. The response curves are not redistributed; point
:func:`load_noise_data` (or the ``FGLHT_NOISE_DATA`` environment variable)
at a CSV copy.

CSV layout for response curves
------------------------------
``orientation="rows"`` (one curve per row)::

    run,1000,1035.7,...,2500
    1,75.2,75.9,...,81.0
    ...

``orientation="columns"`` (one curve per column)::

    rpm,1,2,...,36
    1000,75.2,74.8,...
    ...

With ``header=False`` the file holds the bare numeric matrix and the speed
grid is taken as 43 equispaced values from 1000 to 2500 rpm. The speed
grid is always mapped affinely onto ``[0, 1]``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import urllib.request
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DataNotFoundError, InputError
from .model import (
    CoefficientEstimate,
    DesignMatrix,
    FunctionalDataset,
    Hypothesis,
    TimeGrid,
    build_design,
)

__all__ = [
    "FACTOR_NAMES",
    "N_RUNS",
    "N_SPEEDS",
    "DATA_ENV",
    "design_array",
    "build_factorial_design",
    "contrast_matrix",
    "build_contrast",
    "rpm_to_unit",
    "read_noise_csv",
    "write_noise_csv",
    "load_noise_data",
    "default_data_path",
    "fetch_noise_data",
    "read_beta_csv",
    "write_beta_csv",
    "reference_beta",
    "surrogate_curves",
    "TEST_COLUMNS",
    "LIBERAL_SIZE",
    "export_table",
    "format_rates_table",
    "format_pvalue_table",
    "read_rates_csv",
]

FACTOR_NAMES = ("A", "B", "C", "D", "E", "F", "G")
N_RUNS = 36
N_SPEEDS = 43
RPM_RANGE = (1000.0, 2500.0)
DATA_ENV = "FGLHT_NOISE_DATA"
SOURCE_PAGE = (
    "https://blog.nus.edu.sg/stazjt2020/research/monographs/"
    "analysis-of-variance-for-functional-data/"
)

# One string per run: intercept, then (low, high) indicators for A..G.
_DESIGN_ROWS = (
    "110101010100101",
    "110101010010110",
    "110101001101010",
    "110101001011001",
    "110100110101001",
    "110100110011010",
    "110100101100110",
    "110100101010101",
    "110011010101010",
    "110011010011001",
    "110011001100101",
    "110011001010110",
    "110010110100110",
    "110010110010101",
    "110010101101001",
    "110010101011010",
    "101101010101010",
    "101101010011001",
    "101101001100101",
    "101101001010110",
    "101100110100110",
    "101100110010101",
    "101100101101001",
    "101100101011010",
    "101011010100101",
    "101011010010110",
    "101011001101010",
    "101011001011001",
    "101010110101001",
    "101010110011010",
    "101010101100110",
    "101010101010101",
    "101010101010101",
    "101010101010101",
    "101010101010101",
    "101010101010101",
)
DESIGN_SHA256 = "fbca34b04ceb704dfcf92573c8079e20ff7ba7475366bc2e16d6699ad5710fc2"


def design_array() -> np.ndarray:
    """The 36 x 15 design matrix as a float array."""
    return np.array([[int(ch) for ch in row] for row in _DESIGN_ROWS], dtype=float)


def build_factorial_design() -> DesignMatrix:
    return build_design(design_array())


def contrast_matrix() -> np.ndarray:
    """7 x 15 matrix of main-effect contrasts ``alpha_i1 - alpha_i2``."""
    c = np.zeros((7, 15))
    for i in range(7):
        c[i, 1 + 2 * i] = 1.0
        c[i, 2 + 2 * i] = -1.0
    return c


def build_contrast(factor: int | str = "all") -> Hypothesis:
    """Hypothesis of no main effect for one factor or for all seven.

    ``factor`` is ``"all"``, a 1-based index, or a letter ``A``-``G``.
    """
    c = contrast_matrix()
    if isinstance(factor, str) and factor.lower() == "all":
        return Hypothesis(c)
    if isinstance(factor, str):
        key = factor.strip().upper()
        if key not in FACTOR_NAMES:
            raise InputError(f"unknown factor {factor!r}; expected one of A-G or 'all'")
        index = FACTOR_NAMES.index(key) + 1
    else:
        index = int(factor)
    if not 1 <= index <= 7:
        raise InputError(f"factor index {factor} out of range 1..7")
    return Hypothesis(c[index - 1 : index])


def rpm_to_unit(rpm) -> TimeGrid:
    """Map a speed grid affinely onto ``[0, 1]``."""
    rpm = np.asarray(rpm, dtype=float)
    if rpm.ndim != 1 or rpm.size < 2 or np.any(np.diff(rpm) <= 0):
        raise DataFormatError("speed grid must be strictly increasing")
    t = (rpm - rpm[0]) / (rpm[-1] - rpm[0])
    t[0], t[-1] = 0.0, 1.0
    return TimeGrid(t, 0.0, 1.0)


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"non-numeric cell {cell!r} at row {row}, column {col}") from None
    if not np.isfinite(value):
        raise DataFormatError(f"non-finite cell {cell!r} at row {row}, column {col}")
    return value


def read_noise_csv(
    path,
    orientation: str = "rows",
    header: bool = True,
    n_curves: int | None = N_RUNS,
    n_points: int | None = N_SPEEDS,
) -> tuple[FunctionalDataset, np.ndarray, list[str]]:
    """Read response curves from CSV.

    Returns the dataset on the unit grid, the raw speed grid and the run
    labels. ``n_curves``/``n_points`` are the expected dimensions
    (``None`` skips the check).
    """
    if orientation not in ("rows", "columns"):
        raise InputError("orientation must be 'rows' or 'columns'")
    path = Path(path)
    if not path.is_file():
        raise DataNotFoundError(f"response data file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise DataFormatError(f"{path} is empty")

    if header:
        head, body = rows[0], rows[1:]
        cols = [r[1:] for r in body]
        row_labels = [r[0] for r in body]
        col_labels = head[1:]
        offset = 2
    else:
        cols, row_labels, col_labels, offset = rows, None, None, 1
    widths = {len(r) for r in cols}
    if len(widths) != 1:
        raise DataFormatError(f"{path}: rows have differing lengths {sorted(widths)}")
    matrix = np.array(
        [
            [_parse_float(cell, i + offset, j + (2 if header else 1)) for j, cell in enumerate(r)]
            for i, r in enumerate(cols)
        ]
    )
    if orientation == "columns":
        matrix = matrix.T
        labels, speeds = col_labels, row_labels
    else:
        labels, speeds = row_labels, col_labels

    n, t = matrix.shape
    if (n_curves is not None and n != n_curves) or (n_points is not None and t != n_points):
        raise DataFormatError(
            f"{path}: expected {n_curves} curves x {n_points} points, found {n} x {t}"
            f" (orientation={orientation!r})"
        )
    if speeds is None:
        rpm = np.linspace(*RPM_RANGE, t)
    else:
        rpm = np.array([_parse_float(s, 1, j + 2) for j, s in enumerate(speeds)])
    if labels is None:
        labels = [str(i + 1) for i in range(n)]
    return FunctionalDataset(rpm_to_unit(rpm), matrix), rpm, list(labels)


def write_noise_csv(path, values, rpm, labels=None) -> None:
    """Write curves one per row in the layout :func:`read_noise_csv` expects."""
    values = np.asarray(values, dtype=float)
    if labels is None:
        labels = [str(i + 1) for i in range(values.shape[0])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", *[repr(float(r)) for r in rpm]])
        for label, row in zip(labels, values):
            w.writerow([label, *[repr(float(v)) for v in row]])


def default_data_path() -> Path | None:
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else None


def _checksum_file(path: Path) -> Path:
    return path.with_name(path.name + ".sha256")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_noise_data(path=None, orientation: str = "rows", header: bool = True):
    """Load the audible-noise curves from ``path`` or ``$FGLHT_NOISE_DATA``.

    If a ``<file>.sha256`` sidecar exists (written by
    :func:`fetch_noise_data`) the file is verified against it.
    """
    if path is None:
        path = default_data_path()
    if path is None:
        raise DataNotFoundError(
            f"no response data given: pass --data <csv> or set {DATA_ENV}. "
            f"The curves are published at {SOURCE_PAGE}; "
            "`fglht fetch --url <file-url> --dest <csv>` stores a copy with a checksum."
        )
    path = Path(path)
    if not path.is_file():
        raise DataNotFoundError(
            f"response data file not found: {path}. Set {DATA_ENV} or pass --data; "
            f"see `fglht fetch --help` (source: {SOURCE_PAGE})."
        )
    sidecar = _checksum_file(path)
    if sidecar.is_file():
        expected = sidecar.read_text().split()[0]
        if _sha256(path) != expected:
            raise DataFormatError(f"{path} does not match the checksum in {sidecar}")
    return read_noise_csv(path, orientation=orientation, header=header)


def fetch_noise_data(url: str, dest, timeout: float = 30.0) -> str:
    """Download ``url`` to ``dest`` and record its SHA-256 next to it."""
    dest = Path(dest)
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        payload = resp.read()
    dest.write_bytes(payload)
    digest = hashlib.sha256(payload).hexdigest()
    _checksum_file(dest).write_text(f"{digest}  {dest.name}\n")
    return digest


def write_beta_csv(path, beta: CoefficientEstimate) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[repr(float(t)) for t in beta.grid.points]])
        for i, row in enumerate(beta.beta_hat):
            w.writerow([f"beta{i}", *[repr(float(v)) for v in row]])


def read_beta_csv(source) -> CoefficientEstimate:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    grid = TimeGrid(np.array([float(v) for v in rows[0][1:]]))
    beta = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return CoefficientEstimate(grid, beta)


def _resource(name: str):
    return resources.files("fglht").joinpath("resources").joinpath(name)


def reference_beta() -> CoefficientEstimate:
    """Bundled coefficient curves used as the simulation signal.

    The bundled file is fitted from the surrogate curves of
    :func:`surrogate_curves`, not from the measured curves.
    """
    with _resource("reference_beta.csv").open() as fh:
        return read_beta_csv(fh)


def surrogate_curves() -> FunctionalDataset:
    """Bundled synthetic stand-in for the 36 sound-pressure curves."""
    with resources.as_file(_resource("surrogate_noise.csv")) as path:
        return read_noise_csv(path)[0]


# -- tables ---------------------------------------------------------------

TEST_COLUMNS = (
    "T^N",
    "T^B",
    "T^nb",
    "F^N",
    "F^B",
    "F^nb",
    "G^nb",
    "G^pb",
    "Fmax^nb",
    "Fmax^pb",
)
# Upper limit of the 95% binomial interval around 5% for 1000 runs.
LIBERAL_SIZE = 0.064
_META = ("case", "rho", "delta", "scaled", "n_sims", "m_boot", "seed")


def _fmt_rate(rate) -> str:
    return "n/a" if rate is None else f"{100.0 * rate:.1f}"


def _liberal_columns(reports) -> dict[tuple, set[str]]:
    """Columns whose null-size row exceeds the liberal threshold, per block."""
    flagged: dict[tuple, set[str]] = {}
    for r in reports:
        if r.delta == 0:
            block = (r.case, r.rho, r.scaled)
            flagged[block] = {
                col for col, rate in r.rates.items() if rate is not None and rate > LIBERAL_SIZE
            }
    return flagged


def format_rates_table(reports, fmt: str = "csv") -> str:
    """Empirical sizes/powers (percent, one decimal) in the standard column order.

    In the aligned-text layout a trailing ``*`` marks a test whose size in
    the same block exceeds 6.4%.
    """
    reports = list(reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*_META, *TEST_COLUMNS])
        for r in reports:
            meta = [r.case, r.rho if r.rho is not None else "", f"{r.delta:g}",
                    int(r.scaled), r.n_sims, r.m_boot, r.seed]
            w.writerow([*meta, *[_fmt_rate(r.rates.get(c)) for c in TEST_COLUMNS]])
        return buf.getvalue()
    if fmt != "text":
        raise InputError(f"unknown table format {fmt!r}")
    flagged = _liberal_columns(reports)
    head = ["case", "rho", "delta", *TEST_COLUMNS]
    lines = [head]
    for r in reports:
        marks = flagged.get((r.case, r.rho, r.scaled), set())
        cells = []
        for c in TEST_COLUMNS:
            cell = _fmt_rate(r.rates.get(c))
            cells.append(cell + ("*" if c in marks else ""))
        rho = "" if r.rho is None else f"{r.rho:g}"
        lines.append([r.case + (" (scaled)" if r.scaled else ""), rho, f"{r.delta:.2f}", *cells])
    widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
    return "\n".join(
        "  ".join(cell.rjust(wd) for cell, wd in zip(row, widths)) for row in lines
    ) + "\n"


def format_pvalue_table(pvalues: dict[str, dict[str, float]], fmt: str = "text") -> str:
    """Rows are factors, columns the tests in standard order, three decimals."""
    rows = [[name, *[("n/a" if pv.get(c) is None else f"{pv[c]:.3f}") for c in TEST_COLUMNS]]
            for name, pv in pvalues.items()]
    head = ["factor", *TEST_COLUMNS]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "text":
        raise InputError(f"unknown table format {fmt!r}")
    lines = [head, *rows]
    widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
    return "\n".join(
        "  ".join(cell.rjust(wd) for cell, wd in zip(row, widths)) for row in lines
    ) + "\n"


def export_table(obj, fmt: str = "csv") -> bytes:
    """Serialize a list of size/power reports or a factor -> p-value mapping."""
    if isinstance(obj, dict):
        return format_pvalue_table(obj, fmt).encode()
    return format_rates_table(obj, fmt).encode()


def read_rates_csv(text: str) -> list[dict]:
    """Parse :func:`format_rates_table` CSV back into dicts of fractions."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {k: rec[k] for k in _META}
        row["rates"] = {
            c: (None if rec[c] == "n/a" else float(rec[c]) / 100.0) for c in TEST_COLUMNS
        }
        out.append(row)
    return out
