"""Charge/strain network dynamics: assembly, stiff integration, traces.

The state vector concatenates per-actuator charges and areal strains.
Each right-hand-side evaluation proceeds in four steps: switch
resistances from the coupled strains, node voltages from the resistive
network with every capacitor treated as a voltage source ``V = Q/C(s)``
(semi-explicit index-1 treatment), charging currents from Kirchhoff's
current law, and strain rates from the viscoelastic relaxation law.

Capacitors sharing one node pair are merged into a voltage group so the
nodal system stays non-singular; the group current is split among the
members exactly (equal voltage rate), which keeps one charge state per
actuator.  Any other loop of voltage-defining branches is rejected at
assembly.

Integration is delegated to SciPy's implicit solvers (Radau default),
which handle the up-to-six-decade resistance swing without event
handling because the switching law is smooth.  The hot kernel has two
interchangeable implementations: a compiled extension and a NumPy
fallback, selected at import.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.integrate import solve_ivp

from . import _rhs_py
from .electromech import equilibrium_strain, pull_in_voltage
from .netlist import CircuitModel

try:  # compiled kernel is optional; the NumPy one is always available
    from . import _rhs_cy

    DEFAULT_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    _rhs_cy = None
    DEFAULT_BACKEND = "python"

__all__ = [
    "AssemblyError",
    "SolverError",
    "Perturbation",
    "SolverConfig",
    "SimState",
    "Trace",
    "OdeSystem",
    "assemble",
    "initial_state",
    "integrate",
    "nodal_crosscheck",
    "read_trace_csv",
    "DEFAULT_BACKEND",
]

logger = logging.getLogger(__name__)

_TABLE_SIZE = 2048
_table_cache: dict[tuple, np.ndarray] = {}


class AssemblyError(ValueError):
    """The circuit cannot be cast into a solvable nodal system."""

    def __init__(self, message: str, nodes: list[str] | None = None):
        super().__init__(message)
        self.nodes = nodes or []


class SolverError(RuntimeError):
    """Integration failed (step-size underflow or non-finite state)."""

    def __init__(self, message: str, time: float | None = None, state=None):
        super().__init__(message)
        self.time = time
        self.state = state


@dataclass(frozen=True)
class Perturbation:
    """Deterministic self-start seed added to the rest state.

    ``charge_fractions`` maps actuator names to a fraction of
    ``C_ref * V_supply`` placed on that actuator's electrodes.  With no
    explicit entries and no jitter the default is one per cent on the
    first actuator.  ``jitter`` draws a seeded uniform fraction in
    ``[0, jitter)`` for every actuator instead.
    """

    charge_fractions: Mapping[str, float] | None = None
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.jitter < 0.0 or not math.isfinite(self.jitter):
            raise ValueError("jitter must be a finite non-negative fraction")


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-6
    atol_charge: float = 1e-12
    atol_strain: float = 1e-9
    max_step: float = 0.05
    sample_interval: float = 1e-3
    t_end: float = 40.0
    perturbation: Perturbation = field(default_factory=Perturbation)
    method: str = "Radau"

    def __post_init__(self):
        for name in ("rtol", "atol_charge", "atol_strain", "max_step",
                     "sample_interval", "t_end"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite")
        if self.sample_interval > self.t_end:
            raise ValueError("sample_interval must not exceed t_end")
        if self.method not in ("Radau", "BDF", "LSODA"):
            raise ValueError(f"unsupported method {self.method!r}")


@dataclass
class SimState:
    time: float
    charge: np.ndarray
    strain: np.ndarray


@dataclass
class Trace:
    """Uniformly sampled simulation output plus solver-step metadata."""

    t: np.ndarray
    node_names: list[str]  # non-ground nodes, model order
    voltages: np.ndarray  # (samples, nodes)
    dea_names: list[str]
    strains: np.ndarray  # (samples, actuators)
    charges: np.ndarray
    des_names: list[str]
    resistances: np.ndarray  # (samples, switches)
    osc_nodes: list[str]  # nodes carrying a switch (oscillator outputs)
    backend: str = "python"
    accepted_t: np.ndarray | None = field(default=None, repr=False)
    accepted_y: np.ndarray | None = field(default=None, repr=False)

    def voltage(self, node: str) -> np.ndarray:
        return self.voltages[:, self.node_names.index(node)]

    def strain(self, dea: str) -> np.ndarray:
        return self.strains[:, self.dea_names.index(dea)]

    def to_csv(self) -> str:
        header = ["t"]
        header += [f"V_{n}" for n in self.node_names]
        header += [f"s_{n}" for n in self.dea_names]
        header += [f"R_{n}" for n in self.des_names]
        lines = [",".join(header)]
        for i in range(self.t.size):
            row = [repr(float(self.t[i]))]
            row += [repr(float(v)) for v in self.voltages[i]]
            row += [repr(float(v)) for v in self.strains[i]]
            row += [repr(float(v)) for v in self.resistances[i]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def read_trace_csv(text: str) -> Trace:
    """Rebuild a :class:`Trace` from its CSV form (charges and solver
    metadata are not serialized and come back empty)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trace CSV")
    header = lines[0].split(",")
    if header[0] != "t":
        raise ValueError("trace CSV must start with a 't' column")
    nodes = [h[2:] for h in header if h.startswith("V_")]
    deas = [h[2:] for h in header if h.startswith("s_")]
    dess = [h[2:] for h in header if h.startswith("R_")]
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.shape[1] != 1 + len(nodes) + len(deas) + len(dess):
        raise ValueError("trace CSV has unrecognized columns")
    nv = len(nodes)
    nd = len(deas)
    return Trace(
        t=data[:, 0],
        node_names=nodes,
        voltages=data[:, 1 : 1 + nv],
        dea_names=deas,
        strains=data[:, 1 + nv : 1 + nv + nd],
        charges=np.zeros((data.shape[0], nd)),
        des_names=dess,
        resistances=data[:, 1 + nv + nd :],
        osc_nodes=[],
    )


# --------------------------------------------------------------------------
# Assembly


class OdeSystem:
    """Immutable compiled form of a circuit: index arrays for the nodal
    solve, the voltage-group forest, and equilibrium-strain tables.

    Shared read-only by any number of integrations.
    """

    def __init__(self, model: CircuitModel):
        self.model = model
        nodes = model.node_names
        self.n_nodes = len(nodes)
        self.ground = model.ground
        self.dea_names = model.dea_names
        self.des_names = model.des_names
        self.nonground_names = [n for i, n in enumerate(nodes) if i != self.ground]

        nc = len(model.deas)
        if nc == 0:
            raise AssemblyError("circuit contains no actuator capacitance")
        self.nc = nc
        self.cap_a = np.array([d.pos for d in model.deas], dtype=np.int64)
        self.cap_b = np.array([d.neg for d in model.deas], dtype=np.int64)
        self.cap_cref = np.array(
            [d.membrane.reference_capacitance for d in model.deas]
        )
        self.cap_tau = np.array(
            [d.membrane.viscoelastic_time_constant for d in model.deas]
        )
        self.cap_smax = np.array([d.s_max for d in model.deas])

        # equilibrium-strain tables, one per distinct membrane law
        pid_keys: list[tuple] = []
        cap_pid = np.empty(nc, dtype=np.int64)
        for i, dea in enumerate(model.deas):
            m = dea.membrane
            key = (
                m.permittivity,
                m.unstrained_thickness,
                m.pre_stretch,
                m.shear_modulus,
                dea.s_max,
            )
            if key not in pid_keys:
                pid_keys.append(key)
            cap_pid[i] = pid_keys.index(key)
        self.cap_pid = cap_pid
        tables = []
        caps_by_pid = {pid_keys.index(k): k for k in pid_keys}
        for pid in range(len(pid_keys)):
            rep = next(
                d for i, d in enumerate(model.deas) if cap_pid[i] == pid
            )
            tables.append(_strain_table(rep.membrane, rep.s_max))
        self.tab_values = np.vstack([t[0] for t in tables])
        self.tab_wstep = np.array([t[1] for t in tables])
        self.tab_wclamp = np.array([t[2] for t in tables])
        self.tab_scap = np.array([t[3] for t in tables])
        del caps_by_pid

        # parallel capacitors on one node pair form a voltage group
        group_of_pair: dict[tuple[int, int], int] = {}
        grp_plus: list[int] = []
        grp_minus: list[int] = []
        grp_members: list[list[int]] = []
        cap_gid = np.empty(nc, dtype=np.int64)
        for i, dea in enumerate(model.deas):
            pair = (min(dea.pos, dea.neg), max(dea.pos, dea.neg))
            gid = group_of_pair.get(pair)
            if gid is None:
                gid = len(grp_plus)
                group_of_pair[pair] = gid
                grp_plus.append(dea.pos)
                grp_minus.append(dea.neg)
                grp_members.append([])
            elif (dea.pos, dea.neg) != (grp_plus[gid], grp_minus[gid]):
                raise AssemblyError(
                    f"parallel capacitors between nodes "
                    f"{nodes[dea.pos]!r} and {nodes[dea.neg]!r} are declared "
                    f"with opposite polarity ({dea.name})",
                    nodes=[nodes[dea.pos], nodes[dea.neg]],
                )
            grp_members[gid].append(i)
            cap_gid[i] = gid
        self.ng = len(grp_plus)
        self.grp_plus = np.array(grp_plus, dtype=np.int64)
        self.grp_minus = np.array(grp_minus, dtype=np.int64)
        self.cap_gid = cap_gid

        self.nr = len(model.resistors)
        self.res_a = np.array([r.pos for r in model.resistors], dtype=np.int64)
        self.res_b = np.array([r.neg for r in model.resistors], dtype=np.int64)
        self.res_g = np.array([1.0 / r.resistance for r in model.resistors])

        self.nd = len(model.switches)
        self.des_a = np.array([d.pos for d in model.switches], dtype=np.int64)
        self.des_b = np.array([d.neg for d in model.switches], dtype=np.int64)
        self.des_cap = np.array(
            [d.coupled_dea for d in model.switches], dtype=np.int64
        )
        self.des_l10_off = np.array(
            [math.log10(d.curve.r_off) for d in model.switches]
        )
        self.des_l10_on = np.array(
            [math.log10(d.curve.r_on) for d in model.switches]
        )
        self.des_thr = np.array(
            [d.curve.threshold_actuation for d in model.switches]
        )
        self.des_stp = np.array([d.curve.steepness for d in model.switches])

        self.ns = len(model.supplies)
        self.sup_a = np.array([s.pos for s in model.supplies], dtype=np.int64)
        self.sup_b = np.array([s.neg for s in model.supplies], dtype=np.int64)
        self.sup_v = np.array([s.voltage for s in model.supplies])

        osc = sorted(
            {int(n) for n in np.concatenate((self.des_a, self.des_b))}
            - {self.ground}
        ) if self.nd else []
        self.osc_nodes = [nodes[i] for i in osc]

        self._build_forest()
        self._build_reduction()

        self._kernels: dict[str, object] = {}

    # -- voltage-defining branches: groups then supplies ------------------

    def _edges(self):
        plus = np.concatenate((self.grp_plus, self.sup_a))
        minus = np.concatenate((self.grp_minus, self.sup_b))
        labels = [f"capacitor group at ({self.model.node_names[a]},"
                  f"{self.model.node_names[b]})"
                  for a, b in zip(self.grp_plus, self.grp_minus)]
        labels += [s.name for s in self.model.supplies]
        return plus, minus, labels

    def _build_forest(self):
        nodes = self.model.node_names
        plus, minus, labels = self._edges()
        self.n_edges = len(plus)
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        parent_uf = list(range(self.n_nodes))

        def find(x):
            while parent_uf[x] != x:
                parent_uf[x] = parent_uf[parent_uf[x]]
                x = parent_uf[x]
            return x

        for e in range(self.n_edges):
            a, b = int(plus[e]), int(minus[e])
            ra, rb = find(a), find(b)
            if ra == rb:
                raise AssemblyError(
                    "loop of voltage-defining branches (capacitors/supplies) "
                    f"closed by {labels[e]} between nodes {nodes[a]!r} and "
                    f"{nodes[b]!r}; insert a resistive path",
                    nodes=[nodes[a], nodes[b]],
                )
            parent_uf[ra] = rb
            adjacency[a].append((b, e))
            adjacency[b].append((a, e))

        comp_of = np.full(self.n_nodes, -1, dtype=np.int64)
        fo_node: list[int] = []
        fo_parent: list[int] = []
        fo_edge: list[int] = []
        fo_sign: list[float] = []
        order = [self.ground] + [
            i for i in range(self.n_nodes) if i != self.ground
        ]
        n_comp = 0
        for root in order:
            if comp_of[root] >= 0:
                continue
            comp_of[root] = n_comp
            queue = [root]
            while queue:
                here = queue.pop(0)
                for other, e in adjacency[here]:
                    if comp_of[other] >= 0:
                        continue
                    comp_of[other] = n_comp
                    fo_node.append(other)
                    fo_parent.append(here)
                    fo_edge.append(e)
                    fo_sign.append(1.0 if int(plus[e]) == other else -1.0)
                    queue.append(other)
            n_comp += 1
        self.comp_of = comp_of
        self.n_comp = n_comp
        self.fo_node = np.array(fo_node, dtype=np.int64)
        self.fo_parent = np.array(fo_parent, dtype=np.int64)
        self.fo_edge = np.array(fo_edge, dtype=np.int64)
        self.fo_sign = np.array(fo_sign)

        # peel children bottom-up to recover branch currents
        self.el_node = self.fo_node[::-1].copy()
        self.el_edge = self.fo_edge[::-1].copy()
        self.el_other = self.fo_parent[::-1].copy()
        self.el_sign = self.fo_sign[::-1].copy()
        self.edge_plus = plus
        self.edge_minus = minus

    def _build_reduction(self):
        anchored = self.comp_of[self.ground]
        comp_u = np.full(self.n_comp, -1, dtype=np.int64)
        u = 0
        for c in range(self.n_comp):
            if c != anchored:
                comp_u[c] = u
                u += 1
        self.n_unknown = u
        self.node_u = comp_u[self.comp_of]
        self.bra_a = np.concatenate((self.res_a, self.des_a))
        self.bra_b = np.concatenate((self.res_b, self.des_b))
        self.bra_ua = self.node_u[self.bra_a]
        self.bra_ub = self.node_u[self.bra_b]

    # -- kernels -----------------------------------------------------------

    def kernel(self, backend: str | None = None):
        """Right-hand-side callable; ``backend`` is "cython", "python"
        or None for the import-time default."""
        name = backend or DEFAULT_BACKEND
        if name not in ("cython", "python"):
            raise ValueError(f"unknown backend {name!r}")
        if name == "cython" and _rhs_cy is None:
            raise RuntimeError("compiled kernel not available in this install")
        if name not in self._kernels:
            if name == "cython":
                self._kernels[name] = _rhs_cy.CyKernel(self)
            else:
                self._kernels[name] = _rhs_py.PyKernel(self)
        return self._kernels[name]

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.kernel()(t, y)

    def node_voltages(self, y: np.ndarray) -> np.ndarray:
        """Voltages of every node (ground included) at one state."""
        state = _rhs_py.batch_state(self, np.asarray(y)[None, :])
        return state.voltages[0]


def _strain_table(membrane, s_max: float):
    """Monotone lookup of the equilibrium strain over squared voltage.

    Uniform grid in ``v**2`` (the response is quadratic at small
    voltage, so the grid resolves the operating range well); beyond the
    clamp value the target strain is pinned at ``s_max``.
    """
    key = (
        membrane.permittivity,
        membrane.unstrained_thickness,
        membrane.pre_stretch,
        membrane.shear_modulus,
        s_max,
        _TABLE_SIZE,
    )
    cached = _table_cache.get(key)
    if cached is None:
        v_pi = pull_in_voltage(membrane, s_max)
        v_top = v_pi * (1.0 - 1e-4)
        w_clamp = v_top * v_top
        w_step = w_clamp / _TABLE_SIZE
        values = np.empty(_TABLE_SIZE + 1)
        for j in range(_TABLE_SIZE + 1):
            values[j] = equilibrium_strain(
                math.sqrt(j * w_step), membrane, s_max=s_max, clamp=True
            )
        cached = (values, w_step, w_clamp, s_max)
        _table_cache[key] = cached
    return cached


def assemble(model: CircuitModel) -> OdeSystem:
    """Compile a validated circuit into an integrable ODE system.

    Raises :class:`AssemblyError` for structurally singular circuits
    (loops of voltage-defining branches), naming the offending nodes.
    """
    return OdeSystem(model)


# --------------------------------------------------------------------------
# Initial conditions


def initial_state(model: CircuitModel, perturbation: Perturbation | None = None) -> SimState:
    """Rest state plus the configured self-start perturbation.

    Real builds start from fabrication asymmetry; the simulation injects
    an explicit, deterministic seed instead: by default one per cent of
    ``C_ref * V_supply`` on the first actuator only.
    """
    perturbation = perturbation or Perturbation()
    nc = len(model.deas)
    charge = np.zeros(nc)
    strain = np.zeros(nc)
    v_ref = model.supplies[0].voltage if model.supplies else 0.0
    names = model.dea_names

    fractions = perturbation.charge_fractions
    if fractions is None and perturbation.jitter == 0.0:
        fractions = {names[0]: 0.01} if nc else {}
    if fractions:
        index = {n: i for i, n in enumerate(names)}
        for name, frac in fractions.items():
            if name not in index:
                raise ValueError(f"perturbation names unknown actuator {name!r}")
            if not (0.0 <= frac <= 1.0) or not math.isfinite(frac):
                raise ValueError(
                    f"perturbation fraction for {name!r} must lie in [0, 1]"
                )
            dea = model.deas[index[name]]
            charge[index[name]] = frac * dea.membrane.reference_capacitance * v_ref
    if perturbation.jitter > 0.0:
        if perturbation.jitter > 1.0:
            raise ValueError("jitter fraction must not exceed 1")
        rng = np.random.default_rng(perturbation.seed)
        draws = rng.uniform(0.0, perturbation.jitter, nc)
        for i, dea in enumerate(model.deas):
            charge[i] += draws[i] * dea.membrane.reference_capacitance * v_ref
    return SimState(0.0, charge, strain)


def _project_groups(system: OdeSystem, q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Redistribute charge inside each parallel group so member voltages
    agree (ideal-wire reconciliation, conserves the group total)."""
    q = q.copy()
    c = system.cap_cref * (1.0 + np.clip(s, 0.0, system.cap_smax)) ** 2
    for gid in range(system.ng):
        members = np.nonzero(system.cap_gid == gid)[0]
        if members.size < 2:
            continue
        voltage = q[members].sum() / c[members].sum()
        q[members] = c[members] * voltage
    return q


# --------------------------------------------------------------------------
# Integration


def integrate(
    system: OdeSystem,
    config: SolverConfig,
    state0: SimState | None = None,
    backend: str | None = None,
) -> Trace:
    """Adaptive implicit integration to ``t_end`` with dense output
    sampled at the configured interval.

    Deterministic: identical system, config and initial state produce
    an identical trace on one platform.  Failures surface as
    :class:`SolverError` with the time and state attached; NaNs are
    never propagated silently.
    """
    if state0 is None:
        state0 = initial_state(system.model, config.perturbation)
    q0 = np.asarray(state0.charge, dtype=float)
    s0 = np.asarray(state0.strain, dtype=float)
    if q0.shape != (system.nc,) or s0.shape != (system.nc,):
        raise ValueError("initial state size does not match the circuit")
    if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(s0))):
        raise ValueError("initial state must be finite")
    if np.any(q0 < 0.0):
        raise ValueError("initial charges must be non-negative")
    if np.any(s0 < 0.0) or np.any(s0 > system.cap_smax):
        raise ValueError("initial strains must lie in [0, s_max]")
    q0 = _project_groups(system, q0, s0)
    y0 = np.concatenate((q0, s0))

    kernel = system.kernel(backend)
    clamp_before = kernel.clamp_events
    atol = np.concatenate(
        (
            np.full(system.nc, config.atol_charge),
            np.full(system.nc, config.atol_strain),
        )
    )
    try:
        sol = solve_ivp(
            kernel,
            (0.0, config.t_end),
            y0,
            method=config.method,
            rtol=config.rtol,
            atol=atol,
            max_step=config.max_step,
            dense_output=True,
        )
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        # scipy surfaces non-finite right-hand sides as raw errors
        raise SolverError(f"integration aborted: {exc}") from exc
    if not sol.success:
        t_last = float(sol.t[-1]) if sol.t.size else 0.0
        raise SolverError(
            f"integration failed at t={t_last:.6g} s: {sol.message}",
            time=t_last,
            state=sol.y[:, -1] if sol.y.size else None,
        )
    if not np.all(np.isfinite(sol.y)):
        bad = int(np.argmax(~np.isfinite(sol.y).all(axis=0)))
        raise SolverError(
            f"non-finite state detected at t={sol.t[bad]:.6g} s",
            time=float(sol.t[bad]),
            state=sol.y[:, bad],
        )
    if kernel.clamp_events > clamp_before:
        logger.warning(
            "equilibrium strain clamped at s_max %d times during the run "
            "(operating beyond the stable electromechanical range)",
            kernel.clamp_events - clamp_before,
        )

    n_samples = int(round(config.t_end / config.sample_interval))
    ts = np.linspace(0.0, config.t_end, n_samples + 1)
    samples = sol.sol(ts).T
    state = _rhs_py.batch_state(system, samples)
    nong = [i for i in range(system.n_nodes) if i != system.ground]
    return Trace(
        t=ts,
        node_names=system.nonground_names,
        voltages=state.voltages[:, nong],
        dea_names=system.dea_names,
        strains=samples[:, system.nc :],
        charges=samples[:, : system.nc],
        des_names=system.des_names,
        resistances=state.resistances,
        osc_nodes=system.osc_nodes,
        backend=backend or DEFAULT_BACKEND,
        accepted_t=sol.t.copy(),
        accepted_y=sol.y.T.copy(),
    )


# --------------------------------------------------------------------------
# Independent cross-check (dual route for the nodal solve)


@dataclass
class CrossCheck:
    kcl_residual: float  # max |sum of branch currents| over nodes, amps
    dq_mismatch: float  # max |kernel dQ/dt - MNA-derived dQ/dt|
    voltage_mismatch: float  # max |kernel voltage - MNA voltage|


def nodal_crosscheck(system: OdeSystem, y: np.ndarray) -> CrossCheck:
    """Re-derive node voltages and charging currents from a full saddle
    modified-nodal-analysis solve and compare against the production
    kernel.

    This is the independent oracle for charge bookkeeping: the MNA path
    shares no code with the supernode elimination the kernels use, and
    the strain targets come from the root finder rather than the
    kernel's lookup table.
    """
    y = np.asarray(y, dtype=float)
    nc = system.nc
    q = y[:nc]
    s_raw = y[nc:]
    s = np.clip(s_raw, 0.0, system.cap_smax)
    c = system.cap_cref * (1.0 + s) ** 2

    nodes = [i for i in range(system.n_nodes) if i != system.ground]
    row_of = {n: i for i, n in enumerate(nodes)}
    n_v = len(nodes)
    n_e = system.n_edges
    a_mat = np.zeros((n_v + n_e, n_v + n_e))
    rhs = np.zeros(n_v + n_e)

    def stamp_conductance(na: int, nb: int, g: float):
        if na != system.ground:
            i = row_of[na]
            a_mat[i, i] += g
            if nb != system.ground:
                a_mat[i, row_of[nb]] -= g
        if nb != system.ground:
            j = row_of[nb]
            a_mat[j, j] += g
            if na != system.ground:
                a_mat[j, row_of[na]] -= g

    for k in range(system.nr):
        stamp_conductance(int(system.res_a[k]), int(system.res_b[k]),
                          system.res_g[k])
    frac = 1.0 / (1.0 + np.exp(-np.clip(
        system.des_stp * (s[system.des_cap] - system.des_thr), -700.0, 700.0
    )))
    log_r = system.des_l10_off + (system.des_l10_on - system.des_l10_off) * frac
    g_des = 10.0 ** (-log_r)
    for k in range(system.nd):
        stamp_conductance(int(system.des_a[k]), int(system.des_b[k]), g_des[k])

    q_tot = np.bincount(system.cap_gid, weights=q, minlength=system.ng)
    c_tot = np.bincount(system.cap_gid, weights=c, minlength=system.ng)
    e_values = np.concatenate((q_tot / c_tot, system.sup_v))
    for e in range(n_e):
        plus, minus = int(system.edge_plus[e]), int(system.edge_minus[e])
        col = n_v + e
        if plus != system.ground:
            a_mat[row_of[plus], col] += 1.0
            a_mat[col, row_of[plus]] += 1.0
        if minus != system.ground:
            a_mat[row_of[minus], col] -= 1.0
            a_mat[col, row_of[minus]] -= 1.0
        rhs[col] = e_values[e]

    x = np.linalg.solve(a_mat, rhs)
    v = np.zeros(system.n_nodes)
    for n in nodes:
        v[n] = x[row_of[n]]
    i_edges = x[n_v:]

    # KCL residual from branch-by-branch summation
    residual = np.zeros(system.n_nodes)
    for k in range(system.nr):
        cur = system.res_g[k] * (v[system.res_a[k]] - v[system.res_b[k]])
        residual[system.res_a[k]] += cur
        residual[system.res_b[k]] -= cur
    for k in range(system.nd):
        cur = g_des[k] * (v[system.des_a[k]] - v[system.des_b[k]])
        residual[system.des_a[k]] += cur
        residual[system.des_b[k]] -= cur
    for e in range(n_e):
        residual[system.edge_plus[e]] += i_edges[e]
        residual[system.edge_minus[e]] -= i_edges[e]
    residual[system.ground] = 0.0
    kcl = float(np.max(np.abs(residual))) if residual.size else 0.0

    # independent dQ/dt from the MNA group currents and the root-found
    # equilibrium strains
    s_eq = np.empty(nc)
    for i, dea in enumerate(system.model.deas):
        voltage = abs(v[system.cap_a[i]] - v[system.cap_b[i]])
        s_eq[i] = equilibrium_strain(
            voltage, dea.membrane, s_max=dea.s_max, clamp=True
        )
    s_dot = (s_eq - s_raw) / system.cap_tau
    c_prime = 2.0 * system.cap_cref * (1.0 + s)
    e_grp = q_tot / c_tot
    cps = np.bincount(system.cap_gid, weights=c_prime * s_dot, minlength=system.ng)
    v_dot = (i_edges[: system.ng] - e_grp * cps) / c_tot
    dq_mna = c * v_dot[system.cap_gid] + e_grp[system.cap_gid] * c_prime * s_dot

    rhs_kernel = system.rhs(0.0, y)
    dq_err = float(np.max(np.abs(rhs_kernel[:nc] - dq_mna)))
    v_err = float(np.max(np.abs(system.node_voltages(y) - v)))
    return CrossCheck(kcl, dq_err, v_err)
