# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled network right-hand side.

Mirrors the NumPy kernel step for step (same accumulation order) so the
two backends agree to rounding; see ``_rhs_py`` for the algorithm
description and ``benchmarks/bench_rhs.py`` for the speed comparison.
"""

from libc.math cimport exp, pow

import numpy as np


cdef inline double _expit(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef class CyKernel:
    cdef readonly long clamp_events
    cdef readonly str backend

    cdef Py_ssize_t nc, nd, nb, ng, ns, n_nodes, n_edges, n_forest, n_unknown
    cdef Py_ssize_t table_k

    cdef long long[::1] cap_gid, cap_pid, des_cap
    cdef double[::1] cap_cref, cap_tau, cap_smax
    cdef double[::1] des_l10_off, des_l10_on, des_thr, des_stp
    cdef double[::1] res_g, sup_v
    cdef long long[::1] fo_node, fo_parent, fo_edge
    cdef double[::1] fo_sign
    cdef long long[::1] el_node, el_edge, el_other
    cdef double[::1] el_sign
    cdef long long[::1] bra_a, bra_b, bra_ua, bra_ub, node_u
    cdef double[:, ::1] tab_values
    cdef double[::1] tab_wstep, tab_wclamp, tab_scap

    cdef double[::1] b_s, b_c, b_qtot, b_ctot, b_egrp, b_edges, b_v
    cdef double[::1] b_g, b_resid, b_ie, b_target, b_cps, b_vdot, b_rhs
    cdef double[:, ::1] b_mat

    def __init__(self, system):
        self.backend = "cython"
        self.clamp_events = 0
        self.nc = system.nc
        self.nd = system.nd
        self.ng = system.ng
        self.ns = system.ns
        self.n_nodes = system.n_nodes
        self.n_edges = system.n_edges
        self.n_unknown = system.n_unknown

        def i64(a):
            return np.ascontiguousarray(a, dtype=np.int64)

        def f64(a):
            return np.ascontiguousarray(a, dtype=np.float64)

        self.cap_gid = i64(system.cap_gid)
        self.cap_pid = i64(system.cap_pid)
        self.des_cap = i64(system.des_cap)
        self.cap_cref = f64(system.cap_cref)
        self.cap_tau = f64(system.cap_tau)
        self.cap_smax = f64(system.cap_smax)
        self.des_l10_off = f64(system.des_l10_off)
        self.des_l10_on = f64(system.des_l10_on)
        self.des_thr = f64(system.des_thr)
        self.des_stp = f64(system.des_stp)
        self.res_g = f64(system.res_g)
        self.sup_v = f64(system.sup_v)
        self.fo_node = i64(system.fo_node)
        self.fo_parent = i64(system.fo_parent)
        self.fo_edge = i64(system.fo_edge)
        self.fo_sign = f64(system.fo_sign)
        self.el_node = i64(system.el_node)
        self.el_edge = i64(system.el_edge)
        self.el_other = i64(system.el_other)
        self.el_sign = f64(system.el_sign)
        self.bra_a = i64(system.bra_a)
        self.bra_b = i64(system.bra_b)
        self.bra_ua = i64(system.bra_ua)
        self.bra_ub = i64(system.bra_ub)
        self.node_u = i64(system.node_u)
        self.tab_values = f64(system.tab_values)
        self.tab_wstep = f64(system.tab_wstep)
        self.tab_wclamp = f64(system.tab_wclamp)
        self.tab_scap = f64(system.tab_scap)
        self.n_forest = self.fo_node.shape[0]
        self.nb = self.bra_a.shape[0]
        self.table_k = self.tab_values.shape[1] - 1

        self.b_s = np.empty(self.nc)
        self.b_c = np.empty(self.nc)
        self.b_qtot = np.empty(self.ng)
        self.b_ctot = np.empty(self.ng)
        self.b_egrp = np.empty(self.ng)
        self.b_edges = np.empty(self.n_edges)
        self.b_v = np.empty(self.n_nodes)
        self.b_g = np.empty(self.nb)
        self.b_resid = np.empty(self.n_nodes)
        self.b_ie = np.empty(self.n_edges)
        self.b_target = np.empty(self.nc)
        self.b_cps = np.empty(self.ng)
        self.b_vdot = np.empty(self.ng)
        nu = max(self.n_unknown, 1)
        self.b_mat = np.empty((nu, nu))
        self.b_rhs = np.empty(nu)

    def __call__(self, double t, y):
        y_arr = np.ascontiguousarray(y, dtype=np.float64)
        out = np.empty(2 * self.nc)
        self._rhs(y_arr, out)
        return out

    cdef void _rhs(self, double[::1] y, double[::1] out):
        cdef Py_ssize_t i, k, e, n, a, b, pid, gid, idx
        cdef double s_raw, s, w, u, frac, lo, hi, cur, i_e, x
        cdef double log_r, d_off, g, c_prime, s_dot, q_dot

        for i in range(self.nc):
            s_raw = y[self.nc + i]
            s = s_raw
            if s < 0.0:
                s = 0.0
            elif s > self.cap_smax[i]:
                s = self.cap_smax[i]
            self.b_s[i] = s
            self.b_c[i] = self.cap_cref[i] * (1.0 + s) * (1.0 + s)

        for k in range(self.ng):
            self.b_qtot[k] = 0.0
            self.b_ctot[k] = 0.0
        for i in range(self.nc):
            gid = self.cap_gid[i]
            self.b_qtot[gid] += y[i]
            self.b_ctot[gid] += self.b_c[i]
        for k in range(self.ng):
            self.b_egrp[k] = self.b_qtot[k] / self.b_ctot[k]
            self.b_edges[k] = self.b_egrp[k]
        for k in range(self.ns):
            self.b_edges[self.ng + k] = self.sup_v[k]

        for n in range(self.n_nodes):
            self.b_v[n] = 0.0
        for k in range(self.n_forest):
            self.b_v[self.fo_node[k]] = (
                self.b_v[self.fo_parent[k]]
                + self.fo_sign[k] * self.b_edges[self.fo_edge[k]]
            )

        for k in range(self.nb - self.nd):
            self.b_g[k] = self.res_g[k]
        for k in range(self.nd):
            x = self.des_stp[k] * (self.b_s[self.des_cap[k]] - self.des_thr[k])
            log_r = self.des_l10_off[k] + (
                self.des_l10_on[k] - self.des_l10_off[k]
            ) * _expit(x)
            self.b_g[self.nb - self.nd + k] = pow(10.0, -log_r)

        if self.n_unknown > 0:
            self._solve_unknown()

        for n in range(self.n_nodes):
            self.b_resid[n] = 0.0
        for k in range(self.nb):
            cur = self.b_g[k] * (self.b_v[self.bra_a[k]] - self.b_v[self.bra_b[k]])
            self.b_resid[self.bra_a[k]] += cur
            self.b_resid[self.bra_b[k]] -= cur

        for e in range(self.n_edges):
            self.b_ie[e] = 0.0
        for k in range(self.el_node.shape[0]):
            i_e = -self.el_sign[k] * self.b_resid[self.el_node[k]]
            self.b_ie[self.el_edge[k]] = i_e
            self.b_resid[self.el_other[k]] -= self.el_sign[k] * i_e

        for i in range(self.nc):
            gid = self.cap_gid[i]
            pid = self.cap_pid[i]
            w = self.b_egrp[gid] * self.b_egrp[gid]
            if w >= self.tab_wclamp[pid]:
                self.b_target[i] = self.tab_scap[pid]
                self.clamp_events += 1
            else:
                u = w / self.tab_wstep[pid]
                if u > <double>self.table_k:
                    u = <double>self.table_k
                idx = <Py_ssize_t>u
                if idx > self.table_k - 1:
                    idx = self.table_k - 1
                frac = u - <double>idx
                lo = self.tab_values[pid, idx]
                hi = self.tab_values[pid, idx + 1]
                self.b_target[i] = lo + frac * (hi - lo)

        for k in range(self.ng):
            self.b_cps[k] = 0.0
        for i in range(self.nc):
            s_dot = (self.b_target[i] - y[self.nc + i]) / self.cap_tau[i]
            out[self.nc + i] = s_dot
            c_prime = 2.0 * self.cap_cref[i] * (1.0 + self.b_s[i])
            self.b_cps[self.cap_gid[i]] += c_prime * s_dot
        for k in range(self.ng):
            self.b_vdot[k] = (
                self.b_ie[k] - self.b_egrp[k] * self.b_cps[k]
            ) / self.b_ctot[k]
        for i in range(self.nc):
            gid = self.cap_gid[i]
            c_prime = 2.0 * self.cap_cref[i] * (1.0 + self.b_s[i])
            q_dot = (
                self.b_c[i] * self.b_vdot[gid]
                + self.b_egrp[gid] * c_prime * out[self.nc + i]
            )
            out[i] = q_dot

    cdef void _solve_unknown(self):
        """Dense Gaussian elimination with partial pivoting on the
        reduced conductance system; adds the solved base potentials to
        the forest offsets in ``b_v``."""
        cdef Py_ssize_t nu = self.n_unknown
        cdef Py_ssize_t i, j, k, ua, ub, piv, n
        cdef double g, d_off, best, factor, acc

        for i in range(nu):
            self.b_rhs[i] = 0.0
            for j in range(nu):
                self.b_mat[i, j] = 0.0
        for k in range(self.nb):
            g = self.b_g[k]
            ua = self.bra_ua[k]
            ub = self.bra_ub[k]
            d_off = self.b_v[self.bra_a[k]] - self.b_v[self.bra_b[k]]
            if ua >= 0:
                self.b_mat[ua, ua] += g
                self.b_rhs[ua] -= g * d_off
                if ub >= 0:
                    self.b_mat[ua, ub] -= g
            if ub >= 0:
                self.b_mat[ub, ub] += g
                self.b_rhs[ub] += g * d_off
                if ua >= 0:
                    self.b_mat[ub, ua] -= g

        for k in range(nu):
            piv = k
            best = self.b_mat[k, k]
            if best < 0.0:
                best = -best
            for i in range(k + 1, nu):
                g = self.b_mat[i, k]
                if g < 0.0:
                    g = -g
                if g > best:
                    best = g
                    piv = i
            if piv != k:
                for j in range(nu):
                    g = self.b_mat[k, j]
                    self.b_mat[k, j] = self.b_mat[piv, j]
                    self.b_mat[piv, j] = g
                g = self.b_rhs[k]
                self.b_rhs[k] = self.b_rhs[piv]
                self.b_rhs[piv] = g
            for i in range(k + 1, nu):
                factor = self.b_mat[i, k] / self.b_mat[k, k]
                if factor != 0.0:
                    for j in range(k, nu):
                        self.b_mat[i, j] -= factor * self.b_mat[k, j]
                    self.b_rhs[i] -= factor * self.b_rhs[k]
        for k in range(nu - 1, -1, -1):
            acc = self.b_rhs[k]
            for j in range(k + 1, nu):
                acc -= self.b_mat[k, j] * self.b_rhs[j]
            self.b_rhs[k] = acc / self.b_mat[k, k]

        for n in range(self.n_nodes):
            if self.node_u[n] >= 0:
                self.b_v[n] += self.b_rhs[self.node_u[n]]
