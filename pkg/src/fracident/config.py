"""Experiment configuration and CSV output with a metadata header.

Configuration files are flat ``key=value`` text with ``#`` comments.
CSV files start with a block of ``# key=value`` lines echoing the
configuration, so the settings of a result can be recovered with
:func:`config_from_csv`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import __version__


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def _parse_float_or_auto(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _parse_floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse_ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


@dataclass
class ExperimentConfig:
    """Settings shared by all subcommands.

    ``None`` stands for "auto" (``eta``, ``xi``) or for a
    problem-dependent default that :meth:`resolved` fills in.
    """

    problem: str = "II"
    n_elem: int = 1024
    s_range: tuple = (0.05, 0.95)
    eta: float | None = None
    xi: float | None = None
    q0: tuple | None = None
    s_star: float | None = None
    delta_star: float | None = None
    alpha: float = 5e-7
    beta: float | None = None
    sigma: float = 0.0
    seed: int = 0
    solver: str = "direct"
    solver_tol: float = 1e-10
    grad_tol: float = 1e-8
    max_iter: int = 200
    kernel_factor: float = 0.5
    levels: tuple = (4, 5, 6, 7, 8, 9)
    m_list: tuple = tuple(range(1, 13))
    output_path: str = "out.csv"

    _PARSERS = {
        "problem": str,
        "n_elem": int,
        "s_range": _parse_floats,
        "eta": _parse_float_or_auto,
        "xi": _parse_float_or_auto,
        "q0": lambda t: None if t.strip() == "auto" else _parse_floats(t),
        "s_star": _parse_float_or_auto,
        "delta_star": _parse_float_or_auto,
        "alpha": float,
        "beta": _parse_float_or_auto,
        "sigma": float,
        "seed": int,
        "solver": str,
        "solver_tol": float,
        "grad_tol": float,
        "max_iter": int,
        "kernel_factor": float,
        "levels": _parse_ints,
        "m_list": _parse_ints,
        "output_path": str,
    }

    def validate(self) -> "ExperimentConfig":
        if self.problem not in ("I", "II"):
            raise ValueError("problem must be I or II")
        if self.solver not in ("direct", "cholesky", "cg"):
            raise ValueError("solver must be direct, cholesky or cg")
        if self.n_elem < 2:
            raise ValueError("n_elem must be >= 2")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        return self

    def resolved(self) -> "ExperimentConfig":
        """Copy with problem-dependent defaults filled in."""
        c = dataclasses.replace(self)
        if c.problem == "I":
            c.s_star = 0.5 if c.s_star is None else c.s_star
            c.delta_star = math.inf
            c.beta = 0.0 if c.beta is None else c.beta
            c.q0 = c.q0 or (0.1, math.inf)
        else:
            c.s_star = 0.75 if c.s_star is None else c.s_star
            c.delta_star = 0.9 if c.delta_star is None else c.delta_star
            c.beta = 1e-6 if c.beta is None else c.beta
            c.q0 = c.q0 or (0.1, 0.5)
        if len(c.q0) == 1:
            c.q0 = (c.q0[0], math.inf)
        return c.validate()

    def items(self):
        for f in dataclasses.fields(self):
            yield f.name, getattr(self, f.name)

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.items())

    def update(self, mapping: dict) -> "ExperimentConfig":
        """Apply string-valued overrides (from a file or the command line)."""
        for key, text in mapping.items():
            if key not in self._PARSERS:
                raise KeyError(f"unknown configuration key {key!r}")
            setattr(self, key, self._PARSERS[key](text))
        return self


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig().update(parse_config(Path(path).read_text()))


def metadata_lines(cfg: ExperimentConfig, extra: dict | None = None) -> list:
    lines = [f"# {k}={_fmt(v)}" for k, v in cfg.items()]
    lines.append(f"# version={__version__}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={_fmt(v)}")
    return lines


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable], cfg: ExperimentConfig,
              extra: dict | None = None) -> Path:
    """Write rows with shortest round-trip number formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = metadata_lines(cfg, extra)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Return ``(metadata, header, rows)`` with rows as lists of strings."""
    meta_lines, rows, header = [], [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            meta_lines.append(line[1:].strip())
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return parse_config("\n".join(meta_lines)), header, rows


def config_from_csv(path) -> ExperimentConfig:
    meta, _, _ = read_csv(path)
    known = {k: v for k, v in meta.items() if k in ExperimentConfig._PARSERS}
    return ExperimentConfig().update(known)


def sibling(path, suffix: str) -> Path:
    """``out.csv`` -> ``out_<suffix>.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}")
