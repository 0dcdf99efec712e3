"""Sparse SDPA (.dat-s) export, round-trip reader, and file-based backend.

The feasibility program (PSD blocks, scalars, equality rows) is written in
the standard sparse SDPA file format.  The program maps onto the format's
dual side: the block-diagonal variable Y collects the PSD blocks plus one
diagonal block for the scalar variables, each equality row becomes one
constraint matrix F_k with tr(F_k Y) = b_k, and F_0 = 0 (pure feasibility,
zero objective).  Free scalars are split as differences of two nonnegative
diagonal entries; nonnegative scalars take a single diagonal entry.

Entry convention: ``SdpProblem`` stores upper-triangle coefficients whose
off-diagonal pairing is <F, X> = F_ii X_ii + 2 sum_{i<j} F_ij X_ij, which is
exactly the symmetric-matrix convention of the SDPA format, so coefficients
are written verbatim (1-based indices, upper triangle).
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .sos import SdpProblem
from .solvers import RawSolution

ENV_SOLVER = "PIESOS_SDPA_BIN"


# ----------------------------------------------------------------------
# layout shared by writer and backend
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SdpaLayout:
    """Block/column bookkeeping of one exported problem."""

    block_struct: tuple[int, ...]  # positive = PSD, negative = diagonal
    scalar_block: int | None  # 1-based index of the diagonal block
    scalar_slots: dict[str, tuple[int, int | None]]  # name -> (+slot, -slot)


def _layout(problem: SdpProblem) -> SdpaLayout:
    struct = [b.dim for b in problem.blocks]
    slots: dict[str, tuple[int, int | None]] = {}
    pos = 1
    for s in problem.scalars:
        if s.nonneg:
            slots[s.name] = (pos, None)
            pos += 1
        else:
            slots[s.name] = (pos, pos + 1)
            pos += 2
    diag = pos - 1
    scalar_block = None
    if diag:
        struct.append(-diag)
        scalar_block = len(struct)
    return SdpaLayout(tuple(struct), scalar_block, slots)


# ----------------------------------------------------------------------
# writer
# ----------------------------------------------------------------------


def export_sdpa(problem: SdpProblem, path: str | os.PathLike) -> SdpaLayout:
    """Write the problem as a sparse SDPA ``.dat-s`` file.

    Returns the layout used (needed to interpret an external solver's
    block output).  The written problem is a pure feasibility instance:
    zero objective matrix, one constraint matrix per equality row.
    """
    lay = _layout(problem)
    row_of = {key: k + 1 for k, key in enumerate(problem.row_keys)}
    lines = []
    lines.append('"sparse SDPA export: PIE stability feasibility program"')
    lines.append(f"{len(problem.row_keys)}")
    lines.append(f"{len(lay.block_struct)}")
    lines.append(" ".join(str(d) for d in lay.block_struct))
    lines.append(" ".join(repr(problem.rhs.get(key, 0.0)) for key in problem.row_keys))
    blk_no = {b.name: i + 1 for i, b in enumerate(problem.blocks)}
    for key in problem.row_keys:
        k = row_of[key]
        for col, val in sorted(problem.entries.get(key, {}).items(), key=repr):
            if val == 0.0:
                continue
            if col[0] == "B":
                _, name, i, j = col
                if i > j:
                    i, j = j, i
                lines.append(f"{k} {blk_no[name]} {i + 1} {j + 1} {val!r}")
            else:
                plus, minus = lay.scalar_slots[col[1]]
                lines.append(f"{k} {lay.scalar_block} {plus} {plus} {val!r}")
                if minus is not None:
                    lines.append(f"{k} {lay.scalar_block} {minus} {minus} {-val!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return lay


# ----------------------------------------------------------------------
# round-trip reader
# ----------------------------------------------------------------------


@dataclass
class SdpaData:
    """Plain contents of a sparse SDPA file."""

    m: int
    block_struct: tuple[int, ...]
    rhs: np.ndarray
    entries: dict[tuple[int, int], list[tuple[int, int, float]]] = field(
        default_factory=dict
    )

    def dense_matrix(self, matno: int, block: int) -> np.ndarray:
        """Symmetric dense form of F_matno's given block (1-based)."""
        dim = abs(self.block_struct[block - 1])
        M = np.zeros((dim, dim))
        for i, j, v in self.entries.get((matno, block), []):
            M[i - 1, j - 1] = v
            M[j - 1, i - 1] = v
        return M


def read_sdpa(path: str | os.PathLike) -> SdpaData:
    """Parse a sparse SDPA ``.dat-s`` file back into plain data."""
    raw_lines = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith('"') or line.startswith("*"):
                continue
            raw_lines.append(line)
    if len(raw_lines) < 2:
        raise ValueError("truncated SDPA file")
    m = int(raw_lines[0].split()[0])
    nblock = int(raw_lines[1].split()[0])
    idx = 2
    struct: tuple[int, ...] = ()
    if nblock:
        struct = tuple(
            int(tok) for tok in re.split(r"[,\s{}()]+", raw_lines[idx]) if tok
        )
        idx += 1
        if len(struct) != nblock:
            raise ValueError("block structure length mismatch")
    rhs = np.zeros(m)
    if m:
        vals = [
            float(tok) for tok in re.split(r"[,\s{}()]+", raw_lines[idx]) if tok
        ]
        idx += 1
        if len(vals) != m:
            raise ValueError("rhs length mismatch")
        rhs = np.array(vals)
    data = SdpaData(m, struct, rhs)
    for line in raw_lines[idx:]:
        toks = line.split()
        if len(toks) != 5:
            raise ValueError(f"malformed entry line: {line!r}")
        k, b, i, j, v = int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]), float(
            toks[4]
        )
        if not (0 <= k <= m and 1 <= b <= nblock):
            raise ValueError(f"entry indices out of range: {line!r}")
        data.entries.setdefault((k, b), []).append((i, j, v))
    return data


# ----------------------------------------------------------------------
# external-solver backend
# ----------------------------------------------------------------------


class SdpaFileBackend:
    """Solve by exporting .dat-s and invoking an external SDPA-format solver.

    The solver binary is taken from the constructor or the PIESOS_SDPA_BIN
    environment variable and must follow the classic calling convention
    ``solver input.dat-s output.result``.  Feasibility of the exported
    program is judged from the reported phase: the program lives on the
    file's dual side, so dual-infeasible phases mean infeasible here.
    """

    _FEASIBLE = {"pdOPT", "pdFEAS", "dFEAS", "pFEAS_dFEAS"}
    _INFEASIBLE = {"pUNBD", "pFEAS_dINF", "pdINF", "dINF"}

    def __init__(self, solver_cmd: str | None = None, workdir: str | None = None):
        self.solver_cmd = solver_cmd or os.environ.get(ENV_SOLVER)
        self.workdir = workdir

    def available(self) -> bool:
        return bool(self.solver_cmd)

    def solve_sdp(self, problem: SdpProblem) -> RawSolution:
        if not self.solver_cmd:
            raise RuntimeError(
                f"external SDPA solver not configured (set {ENV_SOLVER})"
            )
        own_tmp = self.workdir is None
        tmp = self.workdir or tempfile.mkdtemp(prefix="piesos-sdpa-")
        in_path = os.path.join(tmp, "problem.dat-s")
        out_path = os.path.join(tmp, "problem.result")
        lay = export_sdpa(problem, in_path)
        import time as _time

        t0 = _time.time()
        proc = subprocess.run(
            [self.solver_cmd, in_path, out_path],
            capture_output=True,
            text=True,
            timeout=3600,
        )
        wall = _time.time() - t0
        raw = RawSolution(
            status="numerical-failure",
            solver_status="external-error",
            solver_name=os.path.basename(self.solver_cmd),
            solve_time=wall,
        )
        if proc.returncode != 0 and not os.path.exists(out_path):
            return raw
        phase = None
        try:
            with open(out_path) as fh:
                for line in fh:
                    mm = re.search(r"phase\.value\s*=\s*(\S+)", line)
                    if mm:
                        phase = mm.group(1)
                        break
        except OSError:
            return raw
        if phase is None:
            return raw
        raw.solver_status = phase
        if phase in self._FEASIBLE:
            raw.status = "feasible"
        elif phase in self._INFEASIBLE:
            raw.status = "infeasible"
        else:
            raw.status = "numerical-failure"
        if own_tmp:
            for p in (in_path, out_path):
                try:
                    os.remove(p)
                except OSError:
                    pass
            try:
                os.rmdir(tmp)
            except OSError:
                pass
        return raw
