"""Global square system assembly, Newton iteration and time marching.

Unknowns are the incremental control translations and rotations, six per
control point, patch-major.  Field equations are collocated at the interior
Greville points; every patch end owns six boundary rows filled by a support,
a rigid joint or free-end force/couple conditions.  The system is square by
construction and solved with a sparse LU (dense for small problems) after
row equilibration.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import so3
from .beam_residual import (CollocationState, end_force_spatial,
                            end_moment_spatial, neumann_force_row,
                            neumann_moment_row, residual_force,
                            residual_moment, tangent_blocks_force,
                            tangent_blocks_moment)
from .integrator import (StepFailure, apply_increment, begin_step, commit_step,
                         initialize_accelerations)
from .model import END, START, BeamModel, Patch, Support
from .viscoelastic import effective_stiffness

log = logging.getLogger(__name__)

#: below this many unknowns a dense factorization is used
DENSE_LIMIT = 400


@dataclass
class NewtonSettings:
    """Newton-Raphson controls.

    Convergence is declared on the increment norm relative to the accumulated
    step increment (with an absolute floor of one), or immediately when the
    equilibrated residual is negligible.  A step fails on iteration
    exhaustion or when the residual grows three times in a row; the driver
    then retries with up to ``max_halvings`` step halvings.
    """
    max_iterations: int = 25
    tol_increment: float = 1.0e-8
    tol_residual: float = 1.0e-12
    max_halvings: int = 3
    #: cap on the increment inf-norm used only by the failure-retry path;
    #: the first attempt of every step is always plain (undamped) Newton
    retry_increment_cap: float = 0.3

    def __post_init__(self):
        if self.tol_increment <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_norms: list = field(default_factory=list)
    increment_norms: list = field(default_factory=list)


class PatchRuntime:
    """Mutable per-patch simulation data: collocation state + control net."""

    def __init__(self, patch: Patch):
        self.patch = patch
        self.state = CollocationState(patch.frames, patch.law)
        self.ctrl = patch.curve.points.copy()

    def snapshot(self):
        return (self.state.copy(), self.ctrl.copy())

    def restore(self, snap):
        self.state, self.ctrl = snap[0].copy(), snap[1].copy()

    def interp(self, dctrl: np.ndarray):
        """Increment fields (value, ,s, ,ss) at the collocation points."""
        p = self.patch
        gathered = dctrl[p.support_idx]  # (n, p+1, 3)
        f0 = np.einsum("nk,nkj->nj", p.phi0, gathered)
        f1 = np.einsum("nk,nkj->nj", p.phi1, gathered)
        f2 = np.einsum("nk,nkj->nj", p.phi2, gathered)
        return f0, f1, f2


def fd_tangent_blocks(runtime: PatchRuntime, law, CN_bar, CM_bar, n_dist,
                      m_dist, h, eps=1.0e-7):
    """Finite-difference替 tangent blocks (oracle-grade, for verification)."""
    from .beam_residual import TangentBlocks
    st = runtime.state
    n = st.n
    blocks_F = [np.zeros((n, 3, 3)) for _ in range(6)]
    blocks_V = [np.zeros((n, 3, 3)) for _ in range(6)]
    for ch in range(6):
        for comp in range(3):
            inc = [np.zeros((n, 3)) for _ in range(6)]
            inc[ch][:, comp] = eps
            sp_ = st.copy()
            apply_increment(sp_, *inc, h)
            sm = st.copy()
            inc_m = [-d for d in inc]
            apply_increment(sm, *inc_m, h)
            dF = (residual_force(sp_, law, CN_bar, n_dist, h)
                  - residual_force(sm, law, CN_bar, n_dist, h)) / (2 * eps)
            dV = (residual_moment(sp_, law, CN_bar, CM_bar, m_dist, h)
                  - residual_moment(sm, law, CN_bar, CM_bar, m_dist, h)) / (2 * eps)
            blocks_F[ch][:, :, comp] = dF
            blocks_V[ch][:, :, comp] = dV
    names = ("e", "es", "ess", "t", "ts", "tss")
    return (TangentBlocks(**dict(zip(names, blocks_F))),
            TangentBlocks(**dict(zip(names, blocks_V))))


class Simulation:
    """Owns the runtime states of a model and advances them in time."""

    def __init__(self, model: BeamModel, settings: NewtonSettings | None = None,
                 tangent_mode: str = "analytic"):
        self.model = model
        self.settings = settings or NewtonSettings()
        self.tangent_mode = tangent_mode
        self.runtimes = [PatchRuntime(p) for p in model.patches]
        offsets = np.cumsum([0] + [6 * p.n for p in model.patches])
        self.offsets = offsets[:-1]
        self.ndof = int(offsets[-1])
        self.t = 0.0
        self.total_iterations = 0
        self._supported = model.supported_ends()
        self._jointed = model.jointed_ends()
        self._joint_plans = self._plan_joints()
        self._interior_idx = self._plan_interior()
        self._init_conditions()

    # -- construction helpers ------------------------------------------------

    def _plan_joints(self):
        plans = []
        for joint in self.model.joints:
            ends = [tuple(e) for e in joint.ends]
            sup = [e for e in ends if e in self._supported]
            if len(sup) > 1:
                raise ValueError("a joint may carry at most one support")
            if sup:
                ends.remove(sup[0])
                ends.insert(0, sup[0])
            plans.append((joint, ends,
                          self._supported.get(ends[0])))
        return plans

    def _plan_interior(self):
        """Static sparse index arrays of the interior field-equation rows."""
        idx = []
        for rt, off in zip(self.runtimes, self.offsets):
            p = rt.patch
            n, w = p.n, p.degree + 1
            interior = np.arange(1, n - 1)
            rows = (off + 6 * interior[:, None, None, None]
                    + np.arange(6)[None, :, None, None])
            cols = (off + 6 * p.support_idx[interior][:, None, :, None]
                    + np.arange(6)[None, None, None, :])
            rows = np.broadcast_to(rows, (n - 2, 6, w, 6))
            cols = np.broadcast_to(cols, (n - 2, 6, w, 6))
            idx.append((interior, rows.reshape(-1), cols.reshape(-1)))
        return idx

    def _init_conditions(self, v0=None, W0=None):
        for k, rt in enumerate(self.runtimes):
            if v0 is not None:
                rt.state.v = np.tile(np.asarray(v0, dtype=float), (rt.patch.n, 1))
            if W0 is not None:
                rt.state.W = np.tile(np.asarray(W0, dtype=float), (rt.patch.n, 1))
            f, m = self.model.distributed_at(k, 0.0)
            initialize_accelerations(rt.state, rt.patch.law,
                                     np.tile(f, (rt.patch.n, 1)),
                                     np.tile(m, (rt.patch.n, 1)))
        for (pk, end), sup in self._supported.items():
            rt = self.runtimes[pk]
            i = rt.patch.end_index(end)
            if sup.kind == "clamp":
                rt.state.a[i] = 0.0
                rt.state.A[i] = 0.0
            elif sup.kind == "hinge":
                rt.state.a[i] = 0.0
            elif sup.kind == "roller_x3":
                rt.state.a[i, 2] = 0.0

    def set_initial_velocity(self, v0, W0=None):
        """Uniform initial velocities; re-derives consistent accelerations."""
        self._init_conditions(v0=v0, W0=W0 if W0 is not None else None)

    # -- assembly ------------------------------------------------------------

    def _dof_slice(self, k: int):
        off = self.offsets[k]
        return off, off + 6 * self.runtimes[k].patch.n

    def _end_cols(self, k: int, end: str):
        """Column indices (eta columns, theta columns) of the end basis row."""
        rt = self.runtimes[k]
        p = rt.patch
        i = p.end_index(end)
        ctrl = p.support_idx[i]
        base = self.offsets[k] + 6 * ctrl
        return i, ctrl, base

    def assemble(self, h: float, t_next: float):
        """Equilibrated sparse matrix and right-hand side at the current state."""
        data_parts, row_parts, col_parts = [], [], []
        rhs = np.zeros(self.ndof)
        per_patch = []
        for k, rt in enumerate(self.runtimes):
            law = rt.patch.law
            CN_bar, CM_bar = effective_stiffness(law, h)
            f, m = self.model.distributed_at(k, t_next)
            n_dist = np.tile(f, (rt.patch.n, 1))
            m_dist = np.tile(m, (rt.patch.n, 1))
            F = residual_force(rt.state, law, CN_bar, n_dist, h)
            V = residual_moment(rt.state, law, CN_bar, CM_bar, m_dist, h)
            if self.tangent_mode == "fd":
                bf, bm = fd_tangent_blocks(rt, law, CN_bar, CM_bar, n_dist,
                                           m_dist, h)
            else:
                bf = tangent_blocks_force(rt.state, law, CN_bar, n_dist, h)
                bm = tangent_blocks_moment(rt.state, law, CN_bar, CM_bar,
                                           m_dist, h)
            per_patch.append((CN_bar, CM_bar))

            p = rt.patch
            interior, rows, cols = self._interior_idx[k]
            phi0 = p.phi0[interior]
            phi1 = p.phi1[interior]
            phi2 = p.phi2[interior]
            blk = np.zeros((len(interior), 6, p.degree + 1, 6))
            # force rows (0:3): eta blocks and theta blocks
            blk[:, 0:3, :, 0:3] = (
                np.einsum("nab,nk->nakb", bf.e[interior], phi0)
                + np.einsum("nab,nk->nakb", bf.es[interior], phi1)
                + np.einsum("nab,nk->nakb", bf.ess[interior], phi2))
            blk[:, 0:3, :, 3:6] = (
                np.einsum("nab,nk->nakb", bf.t[interior], phi0)
                + np.einsum("nab,nk->nakb", bf.ts[interior], phi1))
            # moment rows (3:6)
            blk[:, 3:6, :, 0:3] = np.einsum("nab,nk->nakb", bm.es[interior],
                                            phi1)
            blk[:, 3:6, :, 3:6] = (
                np.einsum("nab,nk->nakb", bm.t[interior], phi0)
                + np.einsum("nab,nk->nakb", bm.ts[interior], phi1)
                + np.einsum("nab,nk->nakb", bm.tss[interior], phi2))
            data_parts.append(blk.reshape(-1))
            row_parts.append(rows)
            col_parts.append(cols)
            base = self.offsets[k] + 6 * interior
            rhs_rows = np.concatenate([(base[:, None] + np.arange(3)).ravel(),
                                       (base[:, None] + 3 + np.arange(3)).ravel()])
            rhs_vals = np.concatenate([-F[interior].ravel(),
                                       -V[interior].ravel()])
            rhs[rhs_rows] = rhs_vals

        self._boundary_rows(h, t_next, per_patch, data_parts, row_parts,
                            col_parts, rhs)
        A = sp.coo_matrix((np.concatenate(data_parts),
                           (np.concatenate(row_parts),
                            np.concatenate(col_parts))),
                          shape=(self.ndof, self.ndof)).tocsr()
        # row equilibration: rows mix stiffness scales with unit Dirichlet rows
        row_nnz = np.diff(A.indptr)
        if np.any(row_nnz == 0):
            empty = np.flatnonzero(row_nnz == 0)
            raise RuntimeError(f"under-constrained system: empty rows {empty[:10]}")
        scale = np.maximum.reduceat(np.abs(A.data), A.indptr[:-1])
        scale = np.where(scale > 0.0, scale, 1.0)
        inv = 1.0 / scale
        A = sp.diags(inv) @ A
        return A.tocsc(), rhs * inv

    def _add_row(self, parts, row, cols, vals):
        data_parts, row_parts, col_parts = parts
        data_parts.append(np.asarray(vals, dtype=float).ravel())
        col_parts.append(np.asarray(cols, dtype=int).ravel())
        row_parts.append(np.full(len(vals), row, dtype=int))

    def _add_block_row(self, parts, row_base, comp_rows, theta_blk, theta_s_blk,
                       eta_s_blk, k, end, eta_blk=None):
        """Append rows coupling one end's basis stencil with 3x3 blocks."""
        rt = self.runtimes[k]
        p = rt.patch
        i, ctrl, base = self._end_cols(k, end)
        phi0 = p.phi0[i]
        phi1 = p.phi1[i]
        for a in comp_rows:
            cols, vals = [], []
            for kk in range(p.degree + 1):
                for b in range(3):
                    v_eta = 0.0
                    if eta_blk is not None:
                        v_eta += eta_blk[a, b] * phi0[kk]
                    if eta_s_blk is not None:
                        v_eta += eta_s_blk[a, b] * phi1[kk]
                    if v_eta != 0.0:
                        cols.append(base[kk] + b)
                        vals.append(v_eta)
                    v_th = 0.0
                    if theta_blk is not None:
                        v_th += theta_blk[a, b] * phi0[kk]
                    if theta_s_blk is not None:
                        v_th += theta_s_blk[a, b] * phi1[kk]
                    if v_th != 0.0:
                        cols.append(base[kk] + 3 + b)
                        vals.append(v_th)
            self._add_row(parts, row_base + a, cols, vals)

    def _dirichlet_translation_rows(self, parts, rhs, row_base, comps, k, end,
                                    target):
        rt = self.runtimes[k]
        p = rt.patch
        i, ctrl, base = self._end_cols(k, end)
        phi0 = p.phi0[i]
        current = rt.state.c[i]
        for a in comps:
            cols = base + a
            self._add_row(parts, row_base + a, cols, phi0)
            rhs[row_base + a] = target[a] - current[a]

    def _dirichlet_rotation_rows(self, parts, rhs, row_base, k, end, R_target):
        rt = self.runtimes[k]
        p = rt.patch
        i, ctrl, base = self._end_cols(k, end)
        phi0 = p.phi0[i]
        mismatch = so3.log_so3(rt.state.R[i].T @ R_target)
        for a in range(3):
            cols = base + 3 + a
            self._add_row(parts, row_base + 3 + a, cols, phi0)
            rhs[row_base + 3 + a] = mismatch[a]

    def _boundary_rows(self, h, t_next, per_patch, data_parts, row_parts,
                       col_parts, rhs):
        parts = (data_parts, row_parts, col_parts)
        handled = set()
        for (joint, ends, support) in self._joint_plans:
            self._joint_rows(parts, rhs, h, t_next, per_patch, joint, ends,
                             support)
            handled.update(ends)
        for k, rt in enumerate(self.runtimes):
            for end in (START, END):
                key = (k, end)
                if key in handled:
                    continue
                row_base = self.offsets[k] + 6 * rt.patch.end_index(end)
                sup = self._supported.get(key)
                if sup is None:
                    self._free_end_rows(parts, rhs, row_base, h, t_next,
                                        per_patch, k, end)
                else:
                    self._support_rows(parts, rhs, row_base, h, t_next,
                                       per_patch, k, end, sup)

    def _free_end_rows(self, parts, rhs, row_base, h, t_next, per_patch, k,
                       end):
        rt = self.runtimes[k]
        law = rt.patch.law
        CN_bar, CM_bar = per_patch[k]
        i = rt.patch.end_index(end)
        sign = rt.patch.end_sign(end)
        f_c, m_c = self.model.end_load_at(k, end, t_next)
        rf = neumann_force_row(rt.state, law, CN_bar, i, f_c, sign)
        rm = neumann_moment_row(rt.state, law, CM_bar, i, m_c, sign)
        self._add_block_row(parts, row_base, range(3), rf.t, rf.ts, rf.es, k,
                            end)
        rhs[row_base:row_base + 3] = rf.residual
        self._add_block_row(parts, row_base + 3, range(3), rm.t, rm.ts, rm.es,
                            k, end)
        rhs[row_base + 3:row_base + 6] = rm.residual

    def _support_rows(self, parts, rhs, row_base, h, t_next, per_patch, k, end,
                      sup: Support):
        rt = self.runtimes[k]
        law = rt.patch.law
        CN_bar, CM_bar = per_patch[k]
        i = rt.patch.end_index(end)
        sign = rt.patch.end_sign(end)
        target = rt.patch.frames.c0[i].copy()
        if sup.motion is not None:
            target = target + sup.motion(t_next)
        if sup.kind == "clamp":
            self._dirichlet_translation_rows(parts, rhs, row_base, range(3), k,
                                             end, target)
            self._dirichlet_rotation_rows(parts, rhs, row_base, k, end,
                                          rt.patch.frames.R0[i])
        elif sup.kind == "hinge":
            self._dirichlet_translation_rows(parts, rhs, row_base, range(3), k,
                                             end, target)
            rm = neumann_moment_row(rt.state, law, CM_bar, i, np.zeros(3), sign)
            self._add_block_row(parts, row_base + 3, range(3), rm.t, rm.ts,
                                rm.es, k, end)
            rhs[row_base + 3:row_base + 6] = rm.residual
        elif sup.kind == "roller_x3":
            # spatial-frame force rows for the free components, vertical pin
            f, bt, bes = end_force_spatial(rt.state, law, CN_bar, i, sign)
            f_c, _ = self.model.end_load_at(k, end, t_next)
            for a in (0, 1):
                self._add_block_row(parts, row_base, [a], bt, None, bes, k,
                                    end)
                rhs[row_base + a] = f_c[a] - f[a]
            self._dirichlet_translation_rows(parts, rhs, row_base, [2], k, end,
                                             target)
            rm = neumann_moment_row(rt.state, law, CM_bar, i, np.zeros(3), sign)
            self._add_block_row(parts, row_base + 3, range(3), rm.t, rm.ts,
                                rm.es, k, end)
            rhs[row_base + 3:row_base + 6] = rm.residual

    def _joint_rows(self, parts, rhs, h, t_next, per_patch, joint, ends,
                    support):
        # row slots owned by each incident end
        slot = {}
        for (k, end) in ends:
            slot[(k, end)] = self.offsets[k] + 6 * self.runtimes[k].patch.end_index(end)
        k0, end0 = ends[0]
        rt0 = self.runtimes[k0]
        i0 = rt0.patch.end_index(end0)
        _, _, base0 = self._end_cols(k0, end0)
        phi0_0 = rt0.patch.phi0[i0]
        Q0 = rt0.state.R[i0] @ rt0.patch.frames.R0[i0].T

        # continuity rows in the slots of ends 1..k-1
        for (k, end) in ends[1:]:
            rt = self.runtimes[k]
            i = rt.patch.end_index(end)
            _, _, base = self._end_cols(k, end)
            phi0 = rt.patch.phi0[i]
            row_base = slot[(k, end)]
            # translation: d_eta_i - d_eta_0 = c_0 - c_i
            for a in range(3):
                cols = np.concatenate([base + a, base0 + a])
                vals = np.concatenate([phi0, -phi0_0])
                self._add_row(parts, row_base + a, cols, vals)
                rhs[row_base + a] = rt0.state.c[i0][a] - rt.state.c[i][a]
            # rotation: R_i dTheta_i - R_0 dTheta_0 = log(Q_0 Q_i^T)
            Qi = rt.state.R[i] @ rt.patch.frames.R0[i].T
            r_mis = so3.log_so3(Q0 @ Qi.T)
            Ri = rt.state.R[i]
            R0m = rt0.state.R[i0]
            for a in range(3):
                cols = []
                vals = []
                for kk in range(len(phi0)):
                    for b in range(3):
                        cols.append(base[kk] + 3 + b)
                        vals.append(Ri[a, b] * phi0[kk])
                        cols.append(base0[kk] + 3 + b)
                        vals.append(-R0m[a, b] * phi0_0[kk])
                self._add_row(parts, row_base + 3 + a, cols, vals)
                rhs[row_base + 3 + a] = r_mis[a]

        # balance rows (and support overrides) in the slot of end 0
        row_base = slot[(k0, end0)]
        f_J = joint.force(t_next) if joint.force is not None else np.zeros(3)
        m_J = joint.moment(t_next) if joint.moment is not None else np.zeros(3)
        force_terms = []
        moment_terms = []
        res_F = f_J.copy()
        res_M = m_J.copy()
        for (k, end) in ends:
            rt = self.runtimes[k]
            CN_bar, CM_bar = per_patch[k]
            i = rt.patch.end_index(end)
            sign = rt.patch.end_sign(end)
            f, bt, bes = end_force_spatial(rt.state, rt.patch.law, CN_bar, i,
                                           sign)
            m, mt, mts = end_moment_spatial(rt.state, rt.patch.law, CM_bar, i,
                                            sign)
            res_F -= f
            res_M -= m
            force_terms.append((k, end, bt, bes))
            moment_terms.append((k, end, mt, mts))

        sup_kind = support.kind if support is not None else None
        target = rt0.patch.frames.c0[i0].copy()
        if support is not None and support.motion is not None:
            target = target + support.motion(t_next)

        force_comps = {None: (0, 1, 2), "clamp": (), "hinge": (),
                       "roller_x3": (0, 1)}[sup_kind]
        dirichlet_comps = {None: (), "clamp": (0, 1, 2), "hinge": (0, 1, 2),
                           "roller_x3": (2,)}[sup_kind]
        for a in force_comps:
            for (k, end, bt, bes) in force_terms:
                self._add_block_row(parts, row_base, [a], bt, None, bes, k,
                                    end)
            rhs[row_base + a] = res_F[a]
        if dirichlet_comps:
            self._dirichlet_translation_rows(parts, rhs, row_base,
                                             dirichlet_comps, k0, end0, target)
        if sup_kind == "clamp":
            self._dirichlet_rotation_rows(parts, rhs, row_base, k0, end0,
                                          rt0.patch.frames.R0[i0])
        else:
            for a in range(3):
                for (k, end, mt, mts) in moment_terms:
                    self._add_block_row(parts, row_base + 3, [a], mt, mts,
                                        None, k, end)
                rhs[row_base + 3 + a] = res_M[a]

    # -- solving ---------------------------------------------------------------

    def _solve(self, A, rhs):
        if self.ndof <= DENSE_LIMIT:
            return np.linalg.solve(A.toarray(), rhs)
        return spla.splu(A).solve(rhs)

    def newton(self, h: float, t_next: float,
               increment_cap: float | None = None) -> NewtonReport:
        """Newton-Raphson loop at the current predictor state.

        ``increment_cap`` scales down any update whose inf-norm exceeds it;
        it is None on the plain first attempt of every step and is only set
        by the failure-retry path.
        """
        s = self.settings
        report = NewtonReport(converged=False, iterations=0)
        grow = 0
        for it in range(s.max_iterations + 1):
            A, rhs = self.assemble(h, t_next)
            res_norm = np.abs(rhs).max() if len(rhs) else 0.0
            report.residual_norms.append(res_norm)
            if res_norm <= s.tol_residual:
                report.converged = True
                break
            if len(report.residual_norms) >= 2 and \
                    res_norm > report.residual_norms[-2]:
                grow += 1
                if grow >= 3:
                    log.warning("newton diverging at t=%.6g (res %.3e)",
                                t_next, res_norm)
                    break
            else:
                grow = 0
            if it == s.max_iterations:
                break
            delta = self._solve(A, rhs)
            inc_norm = np.abs(delta).max()
            if increment_cap is not None and inc_norm > increment_cap:
                delta = delta * (increment_cap / inc_norm)
                inc_norm = increment_cap
            report.increment_norms.append(inc_norm)
            acc = 1.0
            for k, rt in enumerate(self.runtimes):
                lo, hi = self._dof_slice(k)
                d = delta[lo:hi].reshape(-1, 6)
                de = rt.interp(d[:, :3])
                dt = rt.interp(d[:, 3:])
                apply_increment(rt.state, de[0], de[1], de[2], dt[0], dt[1],
                                dt[2], h)
                rt.ctrl += d[:, :3]
                acc = max(acc, np.abs(rt.state.eta).max(),
                          np.abs(rt.state.Theta).max())
            report.iterations = it + 1
            log.debug("step t=%.6g iter=%d res=%.3e inc=%.3e", t_next, it + 1,
                      res_norm, inc_norm)
            if inc_norm <= s.tol_increment * acc:
                report.converged = True
                break
        self.total_iterations += report.iterations
        return report

    # -- time marching -----------------------------------------------------------

    def _attempt(self, h: float, increment_cap: float | None) -> None:
        snaps = [rt.snapshot() for rt in self.runtimes]
        t0 = self.t
        try:
            for rt in self.runtimes:
                begin_step(rt.state, rt.patch.law, h)
            report = self.newton(h, t0 + h, increment_cap)
            if not report.converged:
                raise StepFailure(f"newton did not converge at t={t0 + h:.6g}")
            for rt in self.runtimes:
                commit_step(rt.state, rt.patch.law, h)
            self.t = t0 + h
        except StepFailure:
            for rt, snap in zip(self.runtimes, snaps):
                rt.restore(snap)
            self.t = t0
            raise

    def advance(self, h: float, depth: int = 0) -> None:
        """One time step: plain Newton first, an increment-capped retry at the
        same size on failure, then step-halving retries (up to the limit)."""
        try:
            self._attempt(h, None)
            return
        except StepFailure:
            pass
        cap = self.settings.retry_increment_cap
        if cap is not None:
            log.info("retrying step at t=%.6g with increment cap %.2g", self.t,
                     cap)
            try:
                self._attempt(h, cap)
                return
            except StepFailure:
                pass
        if depth >= self.settings.max_halvings:
            raise StepFailure(f"step failed at t={self.t:.6g} after "
                              f"{depth} halvings")
        log.info("halving step at t=%.6g (h=%.3e)", self.t, h)
        self.advance(0.5 * h, depth + 1)
        self.advance(0.5 * h, depth + 1)

    def probe_displacement(self, probe) -> np.ndarray:
        rt = self.runtimes[probe.patch]
        kv = rt.patch.curve.kv
        from .splines import basis_eval
        w = rt.patch.curve.weights if rt.patch.curve.is_rational else None
        first, ders = basis_eval(kv, probe.u, 0, w)
        sl = slice(first, first + kv.degree + 1)
        return ders[0] @ (rt.ctrl[sl] - rt.patch.curve.points[sl])

    def sample_curve(self, k: int, n_samples: int = 200):
        """Dense current/initial positions of patch ``k`` for output."""
        rt = self.runtimes[k]
        us = np.linspace(0.0, 1.0, n_samples)
        from .splines import basis_matrices
        w = rt.patch.curve.weights if rt.patch.curve.is_rational else None
        B = basis_matrices(rt.patch.curve.kv, us, 0, w)[0]
        return B @ rt.ctrl, B @ rt.patch.curve.points


@dataclass
class Trajectory:
    times: np.ndarray
    probes: dict
    iterations: list
    wall_time: float


def time_march(sim: Simulation, t_end: float, h: float,
               observer=None) -> Trajectory:
    """March to ``t_end`` in steps of ``h``, sampling probes each step."""
    model = sim.model
    times = [sim.t]
    samples = {p.name: [sim.probe_displacement(p)] for p in model.probes}
    iters = []
    start = _time.perf_counter()
    n_steps = int(round((t_end - sim.t) / h))
    for _ in range(n_steps):
        before = sim.total_iterations
        sim.advance(h)
        iters.append(sim.total_iterations - before)
        times.append(sim.t)
        for p in model.probes:
            samples[p.name].append(sim.probe_displacement(p))
        if observer is not None:
            observer(sim)
    wall = _time.perf_counter() - start
    return Trajectory(np.array(times),
                      {k: np.array(v) for k, v in samples.items()},
                      iters, wall)
