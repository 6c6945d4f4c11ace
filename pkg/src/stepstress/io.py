"""File formats: datasets, simulation scenarios, machine-readable reports.

Datasets are small hand-editable text files: a header of ``key = value``
lines followed by one row per inspection time with the failure counts per
risk.  Stress levels can be given directly (``stress``) or as Kelvin
temperatures (``temperatures``), in which case the log-linear stress is
derived from the Arrhenius law.  All parse failures carry the offending
line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError
from .estimation import CountData
from .model import ModelParams, StepStressDesign
from .simulation import SimulationScenario, contamination_cells_for_intervals

__all__ = [
    "ArrheniusSpec",
    "arrhenius_stress",
    "load_dataset",
    "save_dataset",
    "load_scenario",
    "save_report",
]

#: Boltzmann constant in eV/K as used by the Arrhenius stress transform.
BOLTZMANN_EV = 8.36e-5


@dataclass(frozen=True)
class ArrheniusSpec:
    """Operating temperature and test temperatures, all in Kelvin."""

    T0: float
    T_levels: tuple[float, ...]
    boltzmann: float = BOLTZMANN_EV

    def __post_init__(self):
        object.__setattr__(self, "T_levels", tuple(float(t) for t in self.T_levels))
        if self.T0 <= 0 or any(t <= 0 for t in self.T_levels):
            raise DatasetFormatError("temperatures must be positive Kelvin values")


def arrhenius_stress(spec: ArrheniusSpec, normalize: bool = True) -> tuple[float, ...]:
    """Log-linear stress levels ``x_i = -(1/K)(1/T0 - 1/T_i)`` for the test temperatures.

    The operating temperature maps to exactly zero.  With ``normalize`` the
    levels are additionally divided by the raw level of largest magnitude,
    so a single elevated temperature maps to exactly one.
    """
    raw = tuple(
        -(1.0 / spec.boltzmann) * (1.0 / spec.T0 - 1.0 / t) if t != spec.T0 else 0.0
        for t in spec.T_levels
    )
    if not normalize:
        return raw
    scale = max(raw, key=abs, default=0.0)
    if scale == 0.0:
        return raw
    return tuple(x / scale for x in raw)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def _parse_lines(path: str):
    """Yield (line_number, content) for non-empty, non-comment lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield no, line


def _floats(text: str, path: str, line: int) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise DatasetFormatError(f"expected numbers, got {text!r}", path, line) from None


def load_dataset(
    path: str,
    time_scale: float = 1.0,
    normalize_stress: bool = True,
) -> tuple[StepStressDesign, CountData]:
    """Parse a dataset file into a design and its observed counts.

    ``time_scale`` multiplies every parsed time (inspection times, tau1,
    tau2), e.g. 0.01 to analyze a file recorded in hours on a
    hundreds-of-hours scale.  ``normalize_stress`` applies only when the
    header carries ``temperatures`` instead of ``stress``.
    """
    header: dict[str, tuple[list[float], int]] = {}
    rows: list[tuple[list[float], int]] = []
    for no, line in _parse_lines(str(path)):
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip().lower()] = (_floats(value, str(path), no), no)
        else:
            rows.append((_floats(line, str(path), no), no))

    def need(key: str) -> list[float]:
        if key not in header:
            raise DatasetFormatError(f"missing header key {key!r}", str(path))
        return header[key][0]

    n_units = int(need("n")[0])
    tau1 = need("tau1")[0] * time_scale
    tau2 = need("tau2")[0] * time_scale
    num_risks = int(need("risks")[0])

    if "stress" in header:
        stress = header["stress"][0]
        if len(stress) != 2:
            raise DatasetFormatError("stress must list two levels", str(path), header["stress"][1])
        x1, x2 = stress
        x0 = need("x0")[0] if "x0" in header else None
    elif "temperatures" in header:
        temps = header["temperatures"][0]
        if len(temps) != 3:
            raise DatasetFormatError(
                "temperatures must list T0 and the two test temperatures",
                str(path),
                header["temperatures"][1],
            )
        spec = ArrheniusSpec(T0=temps[0], T_levels=(temps[1], temps[2]))
        x1, x2 = arrhenius_stress(spec, normalize=normalize_stress)
        x0 = 0.0
    else:
        raise DatasetFormatError("need either a 'stress' or a 'temperatures' header", str(path))

    if not rows:
        raise DatasetFormatError("no data rows found", str(path))
    times, counts = [], []
    for vals, no in rows:
        if len(vals) != 1 + num_risks:
            raise DatasetFormatError(
                f"expected inspection time plus {num_risks} counts", str(path), no
            )
        times.append(vals[0] * time_scale)
        row = vals[1:]
        if any(c != int(c) or c < 0 for c in row):
            raise DatasetFormatError("counts must be nonnegative integers", str(path), no)
        counts.append([int(c) for c in row])

    n = np.asarray(counts, dtype=np.int64)
    n0 = n_units - int(n.sum())
    if n0 < 0:
        raise DatasetFormatError(f"counts exceed N={n_units}", str(path))
    try:
        design = StepStressDesign(
            x1=x1, x2=x2, tau1=tau1, tau2=tau2,
            inspection_times=tuple(times), num_risks=num_risks, x0=x0,
        )
    except Exception as exc:
        raise DatasetFormatError(f"invalid design: {exc}", str(path)) from exc
    return design, CountData(n=n, n0=n0)


def save_dataset(design: StepStressDesign, data: CountData, path: str, comment: str = ""):
    """Write a dataset file that :func:`load_dataset` parses back verbatim."""
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"N = {data.n_units}")
    lines.append(f"tau1 = {design.tau1!r}")
    lines.append(f"tau2 = {design.tau2!r}")
    lines.append(f"stress = {design.x1!r} {design.x2!r}")
    lines.append(f"x0 = {design.x0!r}")
    lines.append(f"risks = {design.num_risks}")
    for t, row in zip(design.inspection_times, np.asarray(data.n)):
        lines.append(f"{t!r} " + " ".join(str(int(c)) for c in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

def load_scenario(path: str) -> SimulationScenario:
    """Parse a Monte Carlo scenario file.

    Keys mirror :class:`~stepstress.simulation.SimulationScenario`;
    ``contamination_intervals`` is 1-based as in the tables the study
    reproduces, and spreads equal mass over every risk in those intervals.
    """
    header: dict[str, tuple[list[float], int]] = {}
    for no, line in _parse_lines(str(path)):
        if "=" not in line:
            raise DatasetFormatError("scenario files contain only key = value lines", str(path), no)
        key, _, value = line.partition("=")
        header[key.strip().lower()] = (_floats(value, str(path), no), no)

    def need(key: str) -> list[float]:
        if key not in header:
            raise DatasetFormatError(f"missing scenario key {key!r}", str(path))
        return header[key][0]

    def get(key: str, default=None):
        return header[key][0] if key in header else default

    num_risks = int(need("risks")[0])
    design = StepStressDesign(
        x1=need("x1")[0],
        x2=need("x2")[0],
        tau1=need("tau1")[0],
        tau2=need("tau2")[0],
        inspection_times=tuple(need("inspection_times")),
        num_risks=num_risks,
        x0=(get("x0") or [None])[0],
    )
    a = need("true_params")
    if len(a) != 2 * num_risks:
        raise DatasetFormatError(
            f"true_params must have {2 * num_risks} entries", str(path), header["true_params"][1]
        )
    eps = (get("epsilon") or [0.0])[0]
    intervals = get("contamination_intervals")
    cells = ()
    if intervals is not None:
        cells = contamination_cells_for_intervals(design, [int(i) - 1 for i in intervals])
    t0 = get("t0")
    return SimulationScenario(
        design=design,
        true_params=ModelParams(np.asarray(a)),
        n_units=int(need("n")[0]),
        contamination_fraction=eps,
        contamination_cells=cells,
        replications=int((get("replications") or [1000])[0]),
        betas=tuple(get("betas") or (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)),
        seed=int((get("seed") or [0])[0]),
        t0=t0[0] if t0 is not None else None,
        alpha0=(get("alpha0") or [0.5])[0],
        level=(get("level") or [0.95])[0],
    )


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def save_report(report: dict, path: str):
    """Write a structured report; deterministic byte-for-byte for equal inputs."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
