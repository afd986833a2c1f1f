"""NumPy implementation of the network right-hand side.

This is the fallback kernel selected when the compiled extension is not
built, and it also provides the vectorized state reconstruction used to
turn dense solver output into traces.  The algorithm is identical to
the compiled kernel: group voltages, potential propagation along the
voltage-branch forest, the reduced conductance solve for nodes not
pinned by any voltage branch, leaf-peeling current recovery, and the
exact charge split inside parallel groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PyKernel", "BatchState", "batch_state"]


def _expit(x: np.ndarray) -> np.ndarray:
    # overflow-safe logistic, elementwise
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class PyKernel:
    """Callable ``f(t, y) -> dy/dt`` over a compiled :class:`OdeSystem`."""

    backend = "python"

    def __init__(self, system):
        self.system = system
        self.clamp_events = 0
        # K is implied by the table width
        self._table_k = system.tab_values.shape[1] - 1

    def equilibrium_targets(self, group_voltages: np.ndarray) -> np.ndarray:
        """Per-capacitor equilibrium strain from the lookup tables."""
        sys = self.system
        w = group_voltages[sys.cap_gid] ** 2
        pid = sys.cap_pid
        clamped = w >= sys.tab_wclamp[pid]
        u = np.minimum(w / sys.tab_wstep[pid], float(self._table_k))
        i = u.astype(np.int64)
        np.minimum(i, self._table_k - 1, out=i)
        frac = u - i
        lo = sys.tab_values[pid, i]
        hi = sys.tab_values[pid, i + 1]
        targets = np.where(clamped, sys.tab_scap[pid], lo + frac * (hi - lo))
        if clamped.any():
            self.clamp_events += int(np.count_nonzero(clamped))
        return targets

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        sys = self.system
        nc = sys.nc
        y = np.asarray(y)
        q = y[:nc]
        s_raw = y[nc:]
        s = np.clip(s_raw, 0.0, sys.cap_smax)
        c = sys.cap_cref * (1.0 + s) ** 2

        q_tot = np.bincount(sys.cap_gid, weights=q, minlength=sys.ng)
        c_tot = np.bincount(sys.cap_gid, weights=c, minlength=sys.ng)
        e_grp = q_tot / c_tot
        e_edges = np.concatenate((e_grp, sys.sup_v))

        # node potentials: propagate along the voltage-branch forest
        v = np.zeros(sys.n_nodes)
        for k in range(sys.fo_node.size):
            v[sys.fo_node[k]] = (
                v[sys.fo_parent[k]] + sys.fo_sign[k] * e_edges[sys.fo_edge[k]]
            )

        frac = _expit(sys.des_stp * (s[sys.des_cap] - sys.des_thr))
        log_r = sys.des_l10_off + (sys.des_l10_on - sys.des_l10_off) * frac
        g_des = 10.0 ** (-log_r)
        g_all = np.concatenate((sys.res_g, g_des))

        if sys.n_unknown:
            base = self._solve_unknown(v, g_all)
            mask = sys.node_u >= 0
            v[mask] += base[sys.node_u[mask]]

        cur = g_all * (v[sys.bra_a] - v[sys.bra_b])
        resid = np.zeros(sys.n_nodes)
        np.add.at(resid, sys.bra_a, cur)
        np.add.at(resid, sys.bra_b, -cur)

        i_edges = np.zeros(sys.n_edges)
        for k in range(sys.el_node.size):
            i_e = -sys.el_sign[k] * resid[sys.el_node[k]]
            i_edges[sys.el_edge[k]] = i_e
            resid[sys.el_other[k]] -= sys.el_sign[k] * i_e

        targets = self.equilibrium_targets(e_grp)
        s_dot = (targets - s_raw) / sys.cap_tau
        c_prime = 2.0 * sys.cap_cref * (1.0 + s)
        cps = np.bincount(sys.cap_gid, weights=c_prime * s_dot, minlength=sys.ng)
        v_dot = (i_edges[: sys.ng] - e_grp * cps) / c_tot
        q_dot = c * v_dot[sys.cap_gid] + e_grp[sys.cap_gid] * c_prime * s_dot
        return np.concatenate((q_dot, s_dot))

    def _solve_unknown(self, off: np.ndarray, g_all: np.ndarray) -> np.ndarray:
        sys = self.system
        nu = sys.n_unknown
        mat = np.zeros((nu, nu))
        rhs = np.zeros(nu)
        for k in range(sys.bra_a.size):
            g = g_all[k]
            ua, ub = sys.bra_ua[k], sys.bra_ub[k]
            d_off = off[sys.bra_a[k]] - off[sys.bra_b[k]]
            if ua >= 0:
                mat[ua, ua] += g
                rhs[ua] -= g * d_off
                if ub >= 0:
                    mat[ua, ub] -= g
            if ub >= 0:
                mat[ub, ub] += g
                rhs[ub] += g * d_off
                if ua >= 0:
                    mat[ub, ua] -= g
        return np.linalg.solve(mat, rhs)


@dataclass
class BatchState:
    voltages: np.ndarray  # (samples, all nodes incl. ground)
    resistances: np.ndarray  # (samples, switches)
    group_voltages: np.ndarray  # (samples, groups)


def batch_state(system, samples: np.ndarray) -> BatchState:
    """Vectorized node voltages and switch resistances for an array of
    states with shape (samples, 2 * actuators)."""
    sys = system
    nc = sys.nc
    t_n = samples.shape[0]
    q = samples[:, :nc]
    s = np.clip(samples[:, nc:], 0.0, sys.cap_smax)
    c = sys.cap_cref * (1.0 + s) ** 2

    q_tot = np.empty((t_n, sys.ng))
    c_tot = np.empty((t_n, sys.ng))
    for g in range(sys.ng):
        members = np.nonzero(sys.cap_gid == g)[0]
        q_tot[:, g] = q[:, members].sum(axis=1)
        c_tot[:, g] = c[:, members].sum(axis=1)
    e_grp = q_tot / c_tot
    e_edges = np.concatenate(
        (e_grp, np.broadcast_to(sys.sup_v, (t_n, sys.ns))), axis=1
    )

    v = np.zeros((t_n, sys.n_nodes))
    for k in range(sys.fo_node.size):
        v[:, sys.fo_node[k]] = (
            v[:, sys.fo_parent[k]] + sys.fo_sign[k] * e_edges[:, sys.fo_edge[k]]
        )

    x = sys.des_stp * (s[:, sys.des_cap] - sys.des_thr)
    frac = _expit(x)
    log_r = sys.des_l10_off + (sys.des_l10_on - sys.des_l10_off) * frac
    resistances = 10.0**log_r

    if sys.n_unknown:
        nu = sys.n_unknown
        g_des = 1.0 / resistances
        g_all = np.concatenate(
            (np.broadcast_to(sys.res_g, (t_n, sys.nr)), g_des), axis=1
        )
        mat = np.zeros((t_n, nu, nu))
        rhs = np.zeros((t_n, nu))
        for k in range(sys.bra_a.size):
            g = g_all[:, k]
            ua, ub = sys.bra_ua[k], sys.bra_ub[k]
            d_off = v[:, sys.bra_a[k]] - v[:, sys.bra_b[k]]
            if ua >= 0:
                mat[:, ua, ua] += g
                rhs[:, ua] -= g * d_off
                if ub >= 0:
                    mat[:, ua, ub] -= g
            if ub >= 0:
                mat[:, ub, ub] += g
                rhs[:, ub] += g * d_off
                if ua >= 0:
                    mat[:, ub, ua] -= g
        base = np.linalg.solve(mat, rhs[:, :, None])[:, :, 0]
        mask = sys.node_u >= 0
        v[:, mask] += base[:, sys.node_u[mask]]

    return BatchState(voltages=v, resistances=resistances, group_voltages=e_grp)
