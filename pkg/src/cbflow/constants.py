"""Measured smoothing-estimate constants and their flat-file persistence."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ConstantReport", "EstimateConstants", "save_constants", "load_constants"]

CONSTANTS_CSV_HEADER = ["estimate", "p", "q_or_r", "C_measured", "samples", "t_min", "t_max"]


@dataclass
class ConstantReport:
    """One measured constant: the sup of scale-free ratios over random samples.

    argmax provenance is carried for inspection but excluded from equality,
    so a save/load round trip reproduces the report exactly.
    """

    value: float
    samples: int
    t_min: float
    t_max: float
    argmax_sample: int | None = field(default=None, compare=False)
    argmax_t: float | None = field(default=None, compare=False)
    skipped: int = field(default=0, compare=False)


@dataclass
class EstimateConstants:
    """The measured constants feeding the existence-time calculators."""

    p: float
    q: float | None = None
    r: float | None = None
    heat: ConstantReport | None = None
    grad: ConstantReport | None = None
    convection: ConstantReport | None = None
    damping: ConstantReport | None = None
    damping_derivative: ConstantReport | None = None

    def combined(self) -> float | None:
        """Single constant for the budget formulas: max of C_B and C_C."""
        vals = [rep.value for rep in (self.convection, self.damping) if rep is not None]
        return max(vals) if vals else None


_ROW_KEYS = {
    "heat": "q",
    "grad": "q",
    "convection": "",
    "damping": "r",
    "damping_derivative": "r",
}


def save_constants(path, constants: EstimateConstants) -> None:
    """Write the constants file (floats via repr, so reads are exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONSTANTS_CSV_HEADER)
        for name, qr in _ROW_KEYS.items():
            rep = getattr(constants, name)
            if rep is None:
                continue
            qr_val = ""
            if qr == "q" and constants.q is not None:
                qr_val = repr(float(constants.q))
            elif qr == "r" and constants.r is not None:
                qr_val = repr(float(constants.r))
            writer.writerow(
                [
                    name,
                    repr(float(constants.p)),
                    qr_val,
                    repr(rep.value),
                    rep.samples,
                    repr(rep.t_min),
                    repr(rep.t_max),
                ]
            )


def load_constants(path) -> EstimateConstants:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CONSTANTS_CSV_HEADER:
            raise ConfigError(f"unexpected constants header {header}")
        out = None
        for row in reader:
            name, p_s, qr_s, c_s, n_s, t0_s, t1_s = row
            if name not in _ROW_KEYS:
                raise ConfigError(f"unknown estimate name {name!r} in constants file")
            if out is None:
                out = EstimateConstants(p=float(p_s))
            rep = ConstantReport(
                value=float(c_s),
                samples=int(n_s),
                t_min=float(t0_s),
                t_max=float(t1_s),
            )
            setattr(out, name, rep)
            if qr_s:
                if _ROW_KEYS[name] == "q":
                    out.q = float(qr_s)
                elif _ROW_KEYS[name] == "r":
                    out.r = float(qr_s)
        if out is None:
            raise ConfigError(f"constants file {path} holds no rows")
        return out
