"""Deterministic CSV/JSON artifact writers and their readers."""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .bath import DiscreteBath
from .dynamics import CovarianceMatrix, OneExcitationEigensystem
from .transition import Phase, PoleReport
from .utils import format_float
from .wigner import GridSpec, WignerGrid

logger = logging.getLogger(__name__)

MOMENTS_HEADER = [
    "t",
    "re_u",
    "im_u",
    "abs_u",
    "v",
    "c_qq",
    "c_qp",
    "c_pp",
    "occupation",
    "purity",
]
WIGNER_HEADER = ["q", "p", "w"]
SWEEP_HEADER = ["eta", "eta_c", "phase", "e1", "c0sq", "p0_inf", "p1_inf"]
BATH_HEADER = ["i", "omega", "coupling"]
SPECTRUM_HEADER = ["j", "energy", "weight"]


@dataclass(frozen=True)
class MomentsRow:
    """One stored time of the moments series; ``u``/``v`` are absent for QBM runs."""

    t: float
    u: complex | None
    v: float | None
    cov: CovarianceMatrix
    occupation: float
    purity: float


@dataclass(frozen=True)
class SweepRow:
    eta: float
    eta_c: float | None
    phase: str
    e1: float | None
    c0sq: float | None
    p0_inf: float | None
    p1_inf: float | None


def _optional(raw: str) -> float | None:
    return None if raw == "" else float(raw)


def dump_json(data: Any) -> str:
    """Canonical JSON text: sorted keys, round-trip float reprs, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


class ArtifactWriter:
    """Write run artifacts under one output directory."""

    def __init__(self, root: str | Path, fmt: str = "csv") -> None:
        self.root = Path(root)
        self.fmt = fmt
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root / name

    def _write_rows(self, name: str, header: list[str], rows: list[list[str]]) -> Path:
        path = self._path(name)
        try:
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise
        self.written.append(path)
        logger.info(f"Wrote {path} ({len(rows)} rows)")
        return path

    def _write_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        try:
            path.write_text(text)
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def write_moments(self, rows: list[MomentsRow]) -> Path:
        body = []
        for row in rows:
            u = row.u
            body.append(
                [
                    format_float(row.t),
                    format_float(None if u is None else u.real),
                    format_float(None if u is None else u.imag),
                    format_float(None if u is None else abs(u)),
                    format_float(row.v),
                    format_float(row.cov.c_qq),
                    format_float(row.cov.c_qp),
                    format_float(row.cov.c_pp),
                    format_float(row.occupation),
                    format_float(row.purity),
                ],
            )
        return self._write_rows("moments.csv", MOMENTS_HEADER, body)

    def write_wigner(self, index: int, grid: WignerGrid) -> Path:
        if self.fmt == "json":
            data = {
                "grid": {
                    "q_min": grid.q_min,
                    "q_max": grid.q_max,
                    "p_min": grid.p_min,
                    "p_max": grid.p_max,
                    "n_q": grid.n_q,
                    "n_p": grid.n_p,
                },
                "values": [float(value) for value in grid.values.reshape(-1)],
            }
            return self._write_text(f"wigner_t{index}.json", dump_json(data))
        q_axis, p_axis = grid.spec.q_axis, grid.spec.p_axis
        body = [
            [format_float(q), format_float(p), format_float(grid.values[i, j])]
            for i, q in enumerate(q_axis)
            for j, p in enumerate(p_axis)
        ]
        return self._write_rows(f"wigner_t{index}.csv", WIGNER_HEADER, body)

    def write_sweep(self, reports: list[PoleReport]) -> Path:
        body = []
        for report in reports:
            diag = report.rho_inf_diag
            body.append(
                [
                    format_float(report.eta),
                    format_float(report.eta_c),
                    report.phase.value if report.phase else "error",
                    format_float(report.e1),
                    format_float(report.c0sq),
                    format_float(diag[0] if diag else None),
                    format_float(diag[1] if diag else None),
                ],
            )
        return self._write_rows("sweep.csv", SWEEP_HEADER, body)

    def write_spectrum(
        self,
        bath: DiscreteBath,
        eigs: OneExcitationEigensystem,
    ) -> list[Path]:
        bath_rows = [
            [str(i), format_float(omega), format_float(coupling)]
            for i, (omega, coupling) in enumerate(
                zip(bath.omegas, bath.couplings, strict=True),
            )
        ]
        spectrum_rows = [
            [str(j), format_float(energy), format_float(weight)]
            for j, (energy, weight) in enumerate(
                zip(eigs.energies, eigs.weights, strict=True),
            )
        ]
        return [
            self._write_rows("bath.csv", BATH_HEADER, bath_rows),
            self._write_rows("spectrum.csv", SPECTRUM_HEADER, spectrum_rows),
        ]

    def write_json(self, name: str, data: dict[str, Any]) -> Path:
        return self._write_text(name, dump_json(data))


def _read_rows(path: str | Path, header: list[str]) -> list[dict[str, str]]:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != header:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def read_moments(path: str | Path) -> list[MomentsRow]:
    rows = []
    for raw in _read_rows(path, MOMENTS_HEADER):
        re_u, im_u = _optional(raw["re_u"]), _optional(raw["im_u"])
        rows.append(
            MomentsRow(
                t=float(raw["t"]),
                u=None if re_u is None or im_u is None else complex(re_u, im_u),
                v=_optional(raw["v"]),
                cov=CovarianceMatrix(
                    float(raw["c_qq"]),
                    float(raw["c_qp"]),
                    float(raw["c_pp"]),
                ),
                occupation=float(raw["occupation"]),
                purity=float(raw["purity"]),
            ),
        )
    return rows


def read_wigner(path: str | Path) -> WignerGrid:
    """Read a Wigner grid written as CSV (``q,p,w``, p fastest) or JSON."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        spec = GridSpec(**data["grid"])
        values = np.array(data["values"], dtype=float).reshape(spec.n_q, spec.n_p)
        return WignerGrid(spec, values)
    raw = _read_rows(path, WIGNER_HEADER)
    q = np.array([float(row["q"]) for row in raw])
    p = np.array([float(row["p"]) for row in raw])
    w = np.array([float(row["w"]) for row in raw])
    q_axis = np.unique(q)
    p_axis = np.unique(p)
    spec = GridSpec(
        q_min=float(q_axis[0]),
        q_max=float(q_axis[-1]),
        p_min=float(p_axis[0]),
        p_max=float(p_axis[-1]),
        n_q=q_axis.size,
        n_p=p_axis.size,
    )
    return WignerGrid(spec, w.reshape(spec.n_q, spec.n_p))


def read_sweep(path: str | Path) -> list[SweepRow]:
    rows = []
    for raw in _read_rows(path, SWEEP_HEADER):
        if raw["phase"] not in {phase.value for phase in Phase} | {"error"}:
            raise ValueError(f"unknown phase label '{raw['phase']}'")
        rows.append(
            SweepRow(
                eta=float(raw["eta"]),
                eta_c=_optional(raw["eta_c"]),
                phase=raw["phase"],
                e1=_optional(raw["e1"]),
                c0sq=_optional(raw["c0sq"]),
                p0_inf=_optional(raw["p0_inf"]),
                p1_inf=_optional(raw["p1_inf"]),
            ),
        )
    return rows


def read_bath(path: str | Path) -> DiscreteBath:
    raw = _read_rows(path, BATH_HEADER)
    return DiscreteBath(
        omegas=np.array([float(row["omega"]) for row in raw]),
        couplings=np.array([float(row["coupling"]) for row in raw]),
    )


def read_spectrum(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Energies and weights from ``spectrum.csv``."""
    raw = _read_rows(path, SPECTRUM_HEADER)
    energies = np.array([float(row["energy"]) for row in raw])
    weights = np.array([float(row["weight"]) for row in raw])
    return energies, weights


def read_json(path: str | Path) -> dict[str, Any]:
    """Read a summary or validation report."""
    return json.loads(Path(path).read_text())
