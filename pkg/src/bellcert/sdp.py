"""Dense primal-dual interior-point semidefinite programming.

Programs are linear matrix inequalities with explicit equality rows:

    maximize  c . y
    s.t.      F_b(y) = F0_b + sum_k y_k Fk_b  is PSD for every block b,
              E y = f.

Blocks are either dense symmetric matrices or batched 1x1 ("diag") blocks.
Per-variable coefficient matrices are sparse cell lists; within a dense
block every cell belongs to at most one variable (true for moment-matrix
structures), which lets the Schur complement be assembled with one small
GEMM plus a gather per variable.

The solver is an infeasible-start HKM predictor-corrector.  Primal
infeasibility is flagged when the dual objective diverges past a threshold
(default 1e8).  Problems without a Slater point (a moment matrix pinned to
an extremal behavior) accept a small `psd_shift`: F(y) + shift*I >= 0
enlarges the feasible set, so bounds computed this way remain valid upper
bounds for relaxation values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedProgram


@dataclass
class SemidefiniteProgram:
    nvars: int
    objective: np.ndarray                 # maximize objective . y
    dense_sizes: list = field(default_factory=list)
    diag_sizes: list = field(default_factory=list)
    dense_const: list = field(default_factory=list)   # (size, size) arrays
    dense_cells: list = field(default_factory=list)   # (i, j, var, coeff) arrays
    diag_const: list = field(default_factory=list)    # (size,) arrays
    diag_cells: list = field(default_factory=list)    # (i, var, coeff) arrays
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    tolerance: float = 1e-7

    def validate(self):
        if len(self.objective) != self.nvars:
            raise MalformedProgram("objective length != nvars")
        for size, const, cells in zip(self.dense_sizes, self.dense_const, self.dense_cells):
            i, j, k, _ = cells
            if const.shape != (size, size):
                raise MalformedProgram("dense block constant shape mismatch")
            if len(i):
                if i.max() >= size or j.max() >= size or k.max() >= self.nvars:
                    raise MalformedProgram("dense cell index out of range")
                flat = i * size + j
                if len(np.unique(flat)) != len(flat):
                    raise MalformedProgram("a dense cell carries more than one variable")
        for size, const, cells in zip(self.diag_sizes, self.diag_const, self.diag_cells):
            i, k, _ = cells
            if const.shape != (size,):
                raise MalformedProgram("diag block constant shape mismatch")
            if len(i) and (i.max() >= size or k.max() >= self.nvars):
                raise MalformedProgram("diag cell index out of range")
        if self.eq_matrix is not None and self.eq_matrix.shape[1] != self.nvars:
            raise MalformedProgram("equality matrix width != nvars")


class SdpBuilder:
    """Incremental construction of a SemidefiniteProgram."""

    def __init__(self, nvars):
        self.nvars = nvars
        self.objective = np.zeros(nvars)
        self._dense = []
        self._diag = []
        self._eq = []

    def add_dense_block(self, size) -> int:
        self._dense.append([size, np.zeros((size, size)), []])
        return len(self._dense) - 1

    def add_diag_block(self, size) -> int:
        self._diag.append([size, np.zeros(size), []])
        return len(self._diag) - 1

    def dense_const(self, block, i, j, value):
        m = self._dense[block][1]
        m[i, j] = value
        m[j, i] = value

    def dense_entry(self, block, i, j, var, coeff=1.0):
        """Variable `var` fills cell (i, j) (and its mirror) with `coeff`."""
        cells = self._dense[block][2]
        cells.append((i, j, var, float(coeff)))
        if i != j:
            cells.append((j, i, var, float(coeff)))

    def diag_const(self, block, i, value):
        self._diag[block][1][i] = value

    def diag_entry(self, block, i, var, coeff=1.0):
        self._diag[block][2].append((i, var, float(coeff)))

    def add_eq(self, row_vars, row_coeffs, rhs):
        self._eq.append(
            (np.asarray(row_vars, int), np.asarray(row_coeffs, float), float(rhs))
        )

    def build(self, tolerance=1e-7) -> SemidefiniteProgram:
        p = SemidefiniteProgram(
            nvars=self.nvars, objective=self.objective.copy(), tolerance=tolerance
        )
        for size, const, cells in self._dense:
            p.dense_sizes.append(size)
            p.dense_const.append(const)
            if cells:
                arr = np.array(cells, dtype=float)
                p.dense_cells.append(
                    (
                        arr[:, 0].astype(int),
                        arr[:, 1].astype(int),
                        arr[:, 2].astype(int),
                        arr[:, 3],
                    )
                )
            else:
                p.dense_cells.append(
                    (np.zeros(0, int), np.zeros(0, int), np.zeros(0, int), np.zeros(0))
                )
        for size, const, cells in self._diag:
            p.diag_sizes.append(size)
            p.diag_const.append(const)
            if cells:
                arr = np.array(cells, dtype=float)
                p.diag_cells.append(
                    (arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2])
                )
            else:
                p.diag_cells.append((np.zeros(0, int), np.zeros(0, int), np.zeros(0)))
        if self._eq:
            E = np.zeros((len(self._eq), self.nvars))
            f = np.zeros(len(self._eq))
            for r, (vars_, coeffs, rhs) in enumerate(self._eq):
                np.add.at(E[r], vars_, coeffs)
                f[r] = rhs
            p.eq_matrix, p.eq_rhs = E, f
        p.validate()
        return p


@dataclass
class SdpSolution:
    status: str                  # optimal | infeasible | stalled | max_iterations
    value: float | None = None
    y: np.ndarray | None = None
    dual_value: float | None = None
    gap: float | None = None
    iterations: int = 0
    diagnostics: str = ""


def _gather(p, y, shift):
    """F(y) per block kind, with +shift*I on every block."""
    dense = []
    for size, const, (ci, cj, ck, cv) in zip(p.dense_sizes, p.dense_const, p.dense_cells):
        m = const.copy()
        if len(ci):
            np.add.at(m, (ci, cj), cv * y[ck])
        if shift:
            m[np.diag_indices(size)] += shift
        dense.append(m)
    diag = []
    for size, const, (ci, ck, cv) in zip(p.diag_sizes, p.diag_const, p.diag_cells):
        v = const.copy()
        if len(ci):
            np.add.at(v, ci, cv * y[ck])
        if shift:
            v = v + shift
        diag.append(v)
    return dense, diag


def _trace_products(p, mats_dense, vecs_diag):
    """t_k = <F_k, M> over all blocks for every variable k."""
    t = np.zeros(p.nvars)
    for (ci, cj, ck, cv), m in zip(p.dense_cells, mats_dense):
        if len(ci):
            np.add.at(t, ck, cv * m[ci, cj])
    for (ci, ck, cv), v in zip(p.diag_cells, vecs_diag):
        if len(ci):
            np.add.at(t, ck, cv * v[ci])
    return t


def _min_eig_step(X, dX):
    """Largest alpha in (0, 1] keeping X + alpha*dX PSD (eigh-based, never
    raises on a marginally indefinite X)."""
    w, V = np.linalg.eigh((X + X.T) / 2)
    floor = max(w.max(), 1.0) * 1e-15
    w = np.maximum(w, floor)
    Xi_sqrt = V / np.sqrt(w)
    S = Xi_sqrt.T @ dX @ Xi_sqrt
    lam = np.linalg.eigvalsh((S + S.T) / 2).min()
    if lam >= -1e-14:
        return 1.0
    return min(1.0, -1.0 / lam)


def _is_pd(X):
    try:
        np.linalg.cholesky((X + X.T) / 2)
        return True
    except np.linalg.LinAlgError:
        return False


def _diag_step(x, dx):
    neg = dx < 0
    if not neg.any():
        return 1.0
    return min(1.0, float((-x[neg] / dx[neg]).min()))


class _Workspace:
    """Per-problem precomputations for the Schur assembly."""

    def __init__(self, p: SemidefiniteProgram):
        self.var_slices = []
        for (ci, cj, ck, cv), size in zip(p.dense_cells, p.dense_sizes):
            if len(ci) == 0:
                self.var_slices.append(None)
                continue
            order = np.argsort(ck, kind="stable")
            si, sj, sk, sv = ci[order], cj[order], ck[order], cv[order]
            bounds = np.searchsorted(sk, np.arange(p.nvars + 1))
            flat = si * size + sj
            self.var_slices.append((si, sj, sk, sv, bounds, flat))
        self.diag_D = []
        for (ci, ck, cv), size in zip(p.diag_cells, p.diag_sizes):
            D = np.zeros((size, p.nvars))
            if len(ci):
                np.add.at(D, (ci, ck), cv)
            self.diag_D.append(D)


def _schur(p, ws, Ud, Zd, Ug, Zg):
    n = p.nvars
    H = np.zeros((n, n))
    for data, U, Z, (ci, cj, ck, cv) in zip(ws.var_slices, Ud, Zd, p.dense_cells):
        if data is None:
            continue
        si, sj, sk, sv, bounds, flat = data
        Uf = np.ascontiguousarray(U)
        Zf = np.ascontiguousarray(Z)
        for k in np.unique(sk):
            lo, hi = bounds[k], bounds[k + 1]
            Mk = (Uf[:, si[lo:hi]] * sv[lo:hi]) @ Zf[sj[lo:hi], :]
            H[:, k] += np.bincount(sk, weights=sv * Mk.ravel()[flat], minlength=n)
    for D, u, z in zip(ws.diag_D, Ug, Zg):
        if D.shape[0]:
            w = u * z
            H += D.T @ (w[:, None] * D)
    return (H + H.T) / 2


def _independent_rows(E, f):
    """Keep a maximal independent subset of equality rows; flag an
    inconsistent dependent row by returning None."""
    kept = []
    basis = []
    for i in range(E.shape[0]):
        row = E[i].astype(float)
        res = row.copy()
        for b in basis:
            res -= (res @ b) * b
        nrm = np.linalg.norm(res)
        if nrm > 1e-9 * max(1.0, np.linalg.norm(row)):
            basis.append(res / nrm)
            kept.append(i)
        else:
            # dependent row: verify its rhs matches the kept combination
            sol, *_ = np.linalg.lstsq(E[kept].T, row, rcond=None)
            if abs(f[i] - sol @ f[kept]) > 1e-8 * max(1.0, abs(f[i])):
                return None, None
    return E[kept], f[kept]


def solve_sdp(
    p: SemidefiniteProgram,
    max_iterations=150,
    psd_shift=0.0,
    divergence_threshold=1e8,
    verbose=False,
) -> SdpSolution:
    """Infeasible-start HKM predictor-corrector for the block LMI form."""
    p.validate()
    tol = p.tolerance
    n = p.nvars
    c = np.asarray(p.objective, float)
    E = p.eq_matrix if p.eq_matrix is not None else np.zeros((0, n))
    f = p.eq_rhs if p.eq_rhs is not None else np.zeros(0)
    if E.shape[0]:
        E, f = _independent_rows(E, f)
        if E is None:
            return SdpSolution(
                "infeasible", None, None, None, None, 0,
                "inconsistent equality rows",
            )
    neq = E.shape[0]
    ntot = sum(p.dense_sizes) + sum(p.diag_sizes)
    if ntot == 0:
        raise MalformedProgram("no blocks")
    ws = _Workspace(p)

    y = np.zeros(n)
    if neq:
        y, *_ = np.linalg.lstsq(E, f, rcond=None)
    Fd, Fg = _gather(p, y, psd_shift)
    scale = max(
        1.0,
        max((np.abs(m).max() for m in Fd), default=0.0),
        max((np.abs(v).max() for v in Fg), default=0.0),
    )
    Xd = [np.eye(s) * scale for s in p.dense_sizes]
    Xg = [np.ones(s) * scale for s in p.diag_sizes]
    Zd = [np.eye(s) * scale for s in p.dense_sizes]
    Zg = [np.ones(s) * scale for s in p.diag_sizes]
    lam = np.zeros(neq)

    value = None
    best = None
    stall = 0
    prev_mu = None
    for it in range(1, max_iterations + 1):
        Fd, Fg = _gather(p, y, psd_shift)
        Rd_blocks = [F - X for F, X in zip(Fd, Xd)]
        Rg_blocks = [F - X for F, X in zip(Fg, Xg)]
        rd = c + _trace_products(p, Zd, Zg) - (E.T @ lam if neq else 0.0)
        rp = (f - E @ y) if neq else np.zeros(0)
        mu = (
            sum(np.tensordot(X, Z) for X, Z in zip(Xd, Zd))
            + sum(float(x @ z) for x, z in zip(Xg, Zg))
        ) / ntot
        value = float(c @ y)
        shifted_const_d = [
            F0 + psd_shift * np.eye(len(F0)) if psd_shift else F0
            for F0 in p.dense_const
        ]
        shifted_const_g = [
            F0 + psd_shift if psd_shift else F0 for F0 in p.diag_const
        ]
        dual_value = (
            (float(f @ lam) if neq else 0.0)
            + sum(np.tensordot(F0, Z) for F0, Z in zip(shifted_const_d, Zd))
            + sum(float(F0 @ z) for F0, z in zip(shifted_const_g, Zg))
        )
        gap = abs(value - dual_value) / (1 + abs(value))
        res_lmi = max(
            max((np.abs(R).max() for R in Rd_blocks), default=0.0),
            max((np.abs(R).max() for R in Rg_blocks), default=0.0),
        )
        res_p = float(np.abs(rp).max()) if neq else 0.0
        res_d = float(np.abs(rd).max())
        if verbose:
            print(
                f"  it {it:3d}  mu {mu:9.2e}  gap {gap:9.2e}  lmi {res_lmi:8.1e}  "
                f"eq {res_p:8.1e}  dual {res_d:8.1e}  val {value:.8f}"
            )
        if (
            mu < tol
            and gap < tol
            and res_lmi < tol
            and res_p < tol
            and res_d < max(100 * tol, 1e-5)
        ):
            return SdpSolution("optimal", value, y.copy(), dual_value, gap, it)
        if abs(dual_value) > divergence_threshold or abs(value) > divergence_threshold:
            return SdpSolution(
                "infeasible",
                None,
                None,
                dual_value,
                None,
                it,
                "dual objective diverged; primal deemed infeasible",
            )
        score = max(mu, res_lmi, res_p, gap)
        if best is None or score < best[0]:
            best = (score, value, y.copy(), dual_value, gap, it)
        if prev_mu is not None and mu > 0.98 * prev_mu:
            stall += 1
            if stall >= 8:
                _, bval, by, bdual, bgap, bit = best
                return SdpSolution(
                    "stalled",
                    bval,
                    by,
                    bdual,
                    bgap,
                    it,
                    f"progress stalled; best residual score {best[0]:.2e}",
                )
        else:
            stall = 0
        prev_mu = mu

        Ud = [np.linalg.inv(X) for X in Xd]
        Ug = [1.0 / x for x in Xg]
        H = _schur(p, ws, Ud, Zd, Ug, Zg)

        def solve_kkt(rhs_y, rhs_lam):
            if neq:
                K = np.zeros((n + neq, n + neq))
                K[:n, :n] = H
                K[np.diag_indices(n)] += 1e-12
                K[:n, n:] = E.T
                K[n:, :n] = E
                rhs = np.concatenate([rhs_y, rhs_lam])
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
                return sol[:n], sol[n:]
            try:
                return np.linalg.solve(H + 1e-12 * np.eye(n), rhs_y), np.zeros(0)
            except np.linalg.LinAlgError:
                return np.linalg.lstsq(H, rhs_y, rcond=None)[0], np.zeros(0)

        def direction(sigma):
            Td = [
                U @ (sigma * mu * np.eye(len(U)) - X @ Z - R @ Z)
                for U, X, Z, R in zip(Ud, Xd, Zd, Rd_blocks)
            ]
            Tg = [
                u * (sigma * mu - x * z - r * z)
                for u, x, z, r in zip(Ug, Xg, Zg, Rg_blocks)
            ]
            rhs_y = rd + _trace_products(p, Td, Tg)
            dy, dlam = solve_kkt(rhs_y, rp)
            Gd, Gg = _gather(p, dy, 0.0)
            dXd = [G - F0 + R for G, F0, R in zip(Gd, p.dense_const, Rd_blocks)]
            dXg = [G - F0 + R for G, F0, R in zip(Gg, p.diag_const, Rg_blocks)]
            dZd = []
            for U, X, Z, dX in zip(Ud, Xd, Zd, dXd):
                M = U @ (sigma * mu * np.eye(len(U)) - X @ Z - dX @ Z)
                dZd.append((M + M.T) / 2)
            dZg = [
                u * (sigma * mu - x * z - dx * z)
                for u, x, z, dx in zip(Ug, Xg, Zg, dXg)
            ]
            return dy, dlam, dXd, dXg, dZd, dZg

        def step_lengths(dXd, dXg, dZd, dZg):
            ap = min(
                [_min_eig_step(X, dX) for X, dX in zip(Xd, dXd)]
                + [_diag_step(x, dx) for x, dx in zip(Xg, dXg)]
                + [1.0]
            )
            ad = min(
                [_min_eig_step(Z, dZ) for Z, dZ in zip(Zd, dZd)]
                + [_diag_step(z, dz) for z, dz in zip(Zg, dZg)]
                + [1.0]
            )
            return ap, ad

        dy, dlam, dXd, dXg, dZd, dZg = direction(0.0)
        ap, ad = step_lengths(dXd, dXg, dZd, dZg)
        mu_aff = (
            sum(
                np.tensordot(X + ap * dX, Z + ad * dZ)
                for X, dX, Z, dZ in zip(Xd, dXd, Zd, dZd)
            )
            + sum(
                float((x + ap * dx) @ (z + ad * dz))
                for x, dx, z, dz in zip(Xg, dXg, Zg, dZg)
            )
        ) / ntot
        sigma = min(1.0, max(1e-4, (max(mu_aff, 0.0) / mu) ** 3))
        dy, dlam, dXd, dXg, dZd, dZg = direction(sigma)
        ap, ad = step_lengths(dXd, dXg, dZd, dZg)
        ap, ad = 0.98 * ap, 0.98 * ad
        for _ in range(30):
            okX = all(_is_pd(X + ap * dX) for X, dX in zip(Xd, dXd)) and all(
                (x + ap * dx > 0).all() for x, dx in zip(Xg, dXg)
            )
            if okX:
                break
            ap *= 0.8
        for _ in range(30):
            okZ = all(_is_pd(Z + ad * dZ) for Z, dZ in zip(Zd, dZd)) and all(
                (z + ad * dz > 0).all() for z, dz in zip(Zg, dZg)
            )
            if okZ:
                break
            ad *= 0.8
        y = y + ap * dy
        lam = lam + ad * dlam
        Xd = [(X + ap * dX + (X + ap * dX).T) / 2 for X, dX in zip(Xd, dXd)]
        Xg = [x + ap * dx for x, dx in zip(Xg, dXg)]
        Zd = [(Z + ad * dZ + (Z + ad * dZ).T) / 2 for Z, dZ in zip(Zd, dZd)]
        Zg = [z + ad * dz for z, dz in zip(Zg, dZg)]
    return SdpSolution(
        "max_iterations",
        value,
        y.copy(),
        None,
        None,
        max_iterations,
        "iteration limit reached",
    )


def dump_sdp(p: SemidefiniteProgram, path):
    doc = {
        "nvars": p.nvars,
        "objective": p.objective.tolist(),
        "tolerance": p.tolerance,
        "dense": [
            {
                "size": size,
                "const": const.tolist(),
                "cells": [list(map(float, cell)) for cell in zip(*cells)],
            }
            for size, const, cells in zip(p.dense_sizes, p.dense_const, p.dense_cells)
        ],
        "diag": [
            {
                "size": size,
                "const": const.tolist(),
                "cells": [list(map(float, cell)) for cell in zip(*cells)],
            }
            for size, const, cells in zip(p.diag_sizes, p.diag_const, p.diag_cells)
        ],
        "eq": None
        if p.eq_matrix is None
        else {"matrix": p.eq_matrix.tolist(), "rhs": p.eq_rhs.tolist()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_sdp(path) -> SemidefiniteProgram:
    with open(path) as fh:
        doc = json.load(fh)
    p = SemidefiniteProgram(
        nvars=doc["nvars"],
        objective=np.array(doc["objective"]),
        tolerance=doc.get("tolerance", 1e-7),
    )
    for blk in doc["dense"]:
        p.dense_sizes.append(blk["size"])
        p.dense_const.append(np.array(blk["const"]))
        cells = blk["cells"]
        if cells:
            arr = np.array(cells)
            p.dense_cells.append(
                (
                    arr[:, 0].astype(int),
                    arr[:, 1].astype(int),
                    arr[:, 2].astype(int),
                    arr[:, 3],
                )
            )
        else:
            p.dense_cells.append(
                (np.zeros(0, int), np.zeros(0, int), np.zeros(0, int), np.zeros(0))
            )
    for blk in doc["diag"]:
        p.diag_sizes.append(blk["size"])
        p.diag_const.append(np.array(blk["const"]))
        cells = blk["cells"]
        if cells:
            arr = np.array(cells)
            p.diag_cells.append((arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2]))
        else:
            p.diag_cells.append((np.zeros(0, int), np.zeros(0, int), np.zeros(0)))
    if doc["eq"]:
        p.eq_matrix = np.array(doc["eq"]["matrix"])
        p.eq_rhs = np.array(doc["eq"]["rhs"])
    p.validate()
    return p
