"""Machine-readable report emission: canonical JSON and RFC-4180 CSV.

Reports are deterministic: identical config and seed produce byte-identical
files.  Wall-clock timing is therefore written to a sibling text file
rather than into the JSON payload.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import canonical_json


@dataclass
class ReportDocument:
    """Everything one command run produces, ready to serialize."""

    config: dict
    payload: dict
    checks: dict = field(default_factory=dict)
    timing: float = 0.0
    version: str = __version__

    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        return {
            "version": self.version,
            "config": self.config,
            "payload": self.payload,
            "checks": self.checks,
        }

    def write(self, out_dir, name="report"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.json"
        path.write_text(canonical_json(self.to_dict()), encoding="utf-8")
        (out / f"{name}.timing.txt").write_text(
            f"{self.timing:.3f} s\n", encoding="utf-8"
        )
        return path


def write_eigenvalue_csv(path, spectra):
    """Eigenvalue table with columns degree,index,re,im,converged.

    ``spectra`` is the per-degree list of row dicts from
    SpectralReport.to_dict()["spectra"].
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["degree", "index", "re", "im", "converged"])
        for rows in spectra:
            for r in rows:
                w.writerow(
                    [r["degree"], r["index"], repr(r["re"]), repr(r["im"]),
                     str(r["converged"]).lower()]
                )
    return path


def write_table_csv(path, header, rows):
    """Generic small numeric table (t/W/Z samples, densities, sweeps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path
