"""AC power flow: full-Newton polar solver, Q-limit handling, flows, violations.

The solver works on a CaseSpec, a flattened electrical view of the case
with any runtime overlay (breaker states, setpoints, taps, load scale)
already applied. Buses in islands that have no usable slack are treated
as de-energized: excluded from the solve and reported at V = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .model import (
    BranchStatus,
    BusType,
    GenStatus,
    LoadStatus,
    NetworkCase,
    ShuntStatus,
    build_admittance,
)

SLACK, PV, PQ = 0, 1, 2


class PowerFlowDiverged(Exception):
    """Newton iteration failed to converge: treated as voltage collapse upstream."""


@dataclass
class PowerFlowOptions:
    tolerance: float = 1e-6
    max_iter: int = 25
    flat_start: bool = False
    q_limit_rounds: int = 10


@dataclass
class CaseSpec:
    """Per-solve electrical inputs in bus order (pu on case base)."""

    ybus: sparse.csr_matrix
    kind: np.ndarray          # effective bus kinds before any Q-limit switching
    v_set: np.ndarray
    p_inj: np.ndarray         # net scheduled P injection (gens minus loads)
    q_inj: np.ndarray         # net scheduled Q injection where the bus runs PQ
    p_load: np.ndarray        # served load by bus, for generation bookkeeping
    q_load: np.ndarray
    q_min_bus: np.ndarray     # aggregate online generator Q range by bus
    q_max_bus: np.ndarray
    energized: np.ndarray     # bool: bus participates in the solve
    branch_closed: np.ndarray
    taps: np.ndarray
    gen_online: np.ndarray
    gen_p_mw: np.ndarray      # dispatched P per generator (slack pickup added later)
    base_mva: float


def build_case_spec(
    case: NetworkCase,
    branch_closed: Optional[np.ndarray] = None,
    taps: Optional[np.ndarray] = None,
    shunt_on: Optional[np.ndarray] = None,
    shunt_q: Optional[np.ndarray] = None,
    gen_online: Optional[np.ndarray] = None,
    gen_p_set: Optional[np.ndarray] = None,
    gen_v_set: Optional[np.ndarray] = None,
    gen_q_fixed: Optional[np.ndarray] = None,
    load_served: Optional[np.ndarray] = None,
    load_closed: Optional[np.ndarray] = None,
    load_scale: float = 1.0,
    extra_bus_q_mvar: Optional[dict[int, float]] = None,
) -> CaseSpec:
    """Assemble solver inputs from the case plus an optional runtime overlay.

    Every overlay array is positional over the corresponding case list and
    optional; omitted ones fall back to the values stored in the case.
    extra_bus_q_mvar adds reactive load by bus id (used for GIC losses).
    """
    n = len(case.buses)
    base = case.base_mva
    pos = case.bus_index()

    if branch_closed is None:
        branch_closed = np.array([b.status == BranchStatus.CLOSED for b in case.branches], dtype=bool)
    if taps is None:
        taps = np.array([b.tap_ratio for b in case.branches])
    if shunt_on is None:
        shunt_on = np.array([s.status == ShuntStatus.ON for s in case.shunts], dtype=bool)
    if shunt_q is None:
        shunt_q = np.array([s.q_nominal for s in case.shunts])
    if gen_online is None:
        gen_online = np.array([g.status == GenStatus.ONLINE for g in case.generators], dtype=bool)
    if gen_p_set is None:
        gen_p_set = np.array([g.p_set for g in case.generators])
    if gen_v_set is None:
        gen_v_set = np.array([g.v_setpoint for g in case.generators])
    if gen_q_fixed is None:
        gen_q_fixed = np.zeros(len(case.generators))
    if load_served is None:
        load_served = np.array([l.served_fraction for l in case.loads])
    if load_closed is None:
        load_closed = np.array([l.status == LoadStatus.CLOSED for l in case.loads], dtype=bool)

    ybus = build_admittance(case, branch_closed, taps, shunt_on, shunt_q)

    p_load = np.zeros(n)
    q_load = np.zeros(n)
    for j, l in enumerate(case.loads):
        if load_closed[j]:
            i = pos[l.bus]
            p_load[i] += l.p_nominal * load_served[j] * load_scale
            q_load[i] += l.q_nominal * load_served[j] * load_scale
    if extra_bus_q_mvar:
        for bus_id, mvar in extra_bus_q_mvar.items():
            q_load[pos[bus_id]] += mvar

    p_gen = np.zeros(n)
    q_gen_fixed = np.zeros(n)
    q_min_bus = np.zeros(n)
    q_max_bus = np.zeros(n)
    has_gen = np.zeros(n, dtype=bool)
    v_set = np.ones(n)
    for j, g in enumerate(case.generators):
        if not gen_online[j]:
            continue
        i = pos[g.bus]
        p_gen[i] += gen_p_set[j]
        q_gen_fixed[i] += gen_q_fixed[j]
        q_min_bus[i] += g.q_min
        q_max_bus[i] += g.q_max
        if not has_gen[i]:
            v_set[i] = gen_v_set[j]
        has_gen[i] = True

    # effective kinds: declared type demoted to pq when no generator is online
    kind = np.full(n, PQ, dtype=int)
    declared_slack = np.zeros(n, dtype=bool)
    for b in case.buses:
        i = pos[b.id]
        if b.type == BusType.SLACK and has_gen[i]:
            declared_slack[i] = True
        elif b.type == BusType.PV and has_gen[i]:
            kind[i] = PV

    # islands over closed branches: one slack per island, extras become pv,
    # islands without any usable slack are de-energized
    energized = np.zeros(n, dtype=bool)
    comp = _components(n, case, pos, branch_closed)
    for members in comp:
        slacks = sorted(i for i in members if declared_slack[i])
        if not slacks:
            continue
        kind[slacks[0]] = SLACK
        for extra in slacks[1:]:
            kind[extra] = PV
        for i in members:
            energized[i] = True

    p_inj = (p_gen - p_load) / base
    q_inj = (q_gen_fixed - q_load) / base

    return CaseSpec(
        ybus=ybus,
        kind=kind,
        v_set=v_set,
        p_inj=p_inj,
        q_inj=q_inj,
        p_load=p_load,
        q_load=q_load,
        q_min_bus=q_min_bus / base,
        q_max_bus=q_max_bus / base,
        energized=energized,
        branch_closed=branch_closed,
        taps=taps,
        gen_online=gen_online,
        gen_p_mw=np.where(gen_online, gen_p_set, 0.0),
        base_mva=base,
    )


def _components(n, case, pos, branch_closed):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k, br in enumerate(case.branches):
        if branch_closed[k]:
            a, b = find(pos[br.from_bus]), find(pos[br.to_bus])
            if a != b:
                parent[a] = b
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


@dataclass
class ViolationSet:
    bus_voltage: list[tuple[int, float, str]] = field(default_factory=list)
    branch_overload: list[tuple[int, float]] = field(default_factory=list)

    @property
    def n_bus(self) -> int:
        return len(self.bus_voltage)

    @property
    def n_branch(self) -> int:
        return len(self.branch_overload)

    def is_empty(self) -> bool:
        return not self.bus_voltage and not self.branch_overload


@dataclass
class PowerFlowSolution:
    vm: np.ndarray
    va: np.ndarray
    kind: np.ndarray                 # bus kinds after Q-limit switching
    iterations: int
    max_mismatch: float
    spec: CaseSpec
    v_complex: Optional[np.ndarray] = None
    pv_pq_switches: list[tuple[int, str]] = field(default_factory=list)
    q_limit_warning: bool = False
    # filled by compute_branch_flows / distribute_generation
    p_from_mw: Optional[np.ndarray] = None
    q_from_mvar: Optional[np.ndarray] = None
    p_to_mw: Optional[np.ndarray] = None
    q_to_mvar: Optional[np.ndarray] = None
    loading_pct: Optional[np.ndarray] = None
    gen_p_mw: Optional[np.ndarray] = None
    gen_q_mvar: Optional[np.ndarray] = None
    slack_p_mw: float = 0.0
    slack_p_sched_mw: float = 0.0

    @property
    def v(self) -> np.ndarray:
        if self.v_complex is not None:
            return self.v_complex
        return self.vm * np.exp(1j * self.va)

    def bus_injections_pu(self) -> np.ndarray:
        v = self.v
        return v * np.conj(self.spec.ybus @ v)


def newton_solve(ybus, p_spec, q_spec, kind, v_set, active, v0=None, tol=1e-6, max_iter=25):
    """Full-Newton power flow in polar form over the active (energized) buses.

    Returns (V complex, iterations, max_mismatch). Raises PowerFlowDiverged.
    """
    n = len(p_spec)
    act = np.flatnonzero(active)
    if act.size == 0:
        return np.zeros(n, dtype=complex), 0, 0.0
    if sparse.issparse(ybus):
        yr = ybus[act][:, act].tocsr()
    else:
        yr = sparse.csr_matrix(ybus[np.ix_(act, act)])

    kind_a = kind[act]
    slack_m = kind_a == SLACK
    pv_m = kind_a == PV
    pq_m = kind_a == PQ
    pvpq = np.flatnonzero(~slack_m)
    pq_i = np.flatnonzero(pq_m)

    p = p_spec[act]
    q = q_spec[act]
    s_spec = p + 1j * q

    # scipy sparse machinery is pure overhead on small systems
    dense = act.size <= 64
    yd = yr.toarray() if dense else None
    ymat = yd if dense else yr

    def mismatch(V):
        s_calc = V * np.conj(ymat @ V)
        d = s_calc - s_spec
        return np.concatenate([d.real[pvpq], d.imag[pq_i]])

    if v0 is None:
        V = np.where(pq_m, 1.0 + 0j, v_set[act].astype(complex))
    else:
        V = v0[act].astype(complex).copy()
        fixed = slack_m | pv_m
        constraints_hold = (
            np.all(np.abs(V) > 0.25)
            and np.max(np.abs(np.abs(V)[fixed] - v_set[act][fixed]), initial=0.0) < 1e-12
            and np.max(np.abs(np.angle(V)[slack_m]), initial=0.0) < 1e-12
        )
        if constraints_hold:
            F0 = mismatch(V)
            if (np.max(np.abs(F0)) if F0.size else 0.0) <= tol:
                # steady state: hand the warm start back untouched so repeated
                # quiet steps stay bit-identical
                out = np.zeros(n, dtype=complex)
                out[act] = V
                return out, 0, float(np.max(np.abs(F0)) if F0.size else 0.0)
        bad = np.abs(V) < 0.5
        V[bad] = 1.0 + 0j
        vm0 = np.abs(V)
        vm0[slack_m | pv_m] = v_set[act][slack_m | pv_m]
        V = vm0 * np.exp(1j * np.angle(V))
        V[slack_m] = v_set[act][slack_m]

    F = mismatch(V)
    norm = np.max(np.abs(F)) if F.size else 0.0
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise PowerFlowDiverged(f"no convergence after {max_iter} iterations (mismatch {norm:.3g})")
        if dense:
            Ibus = yd @ V
            vnorm = V / np.abs(V)
            dS_dVa = (1j * V)[:, None] * np.conj(np.diag(Ibus) - yd * V[None, :])
            dS_dVm = V[:, None] * np.conj(yd * vnorm[None, :]) + np.diag(np.conj(Ibus) * vnorm)
            J = np.block([
                [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, pq_i)].real],
                [dS_dVa[np.ix_(pq_i, pvpq)].imag, dS_dVm[np.ix_(pq_i, pq_i)].imag],
            ])
            try:
                dx = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                raise PowerFlowDiverged("singular Jacobian") from None
        else:
            Ibus = yr @ V
            diagV = sparse.diags(V)
            diagI = sparse.diags(Ibus)
            diagVnorm = sparse.diags(V / np.abs(V))
            dS_dVa = (1j * diagV @ (diagI - yr @ diagV).conjugate()).tocsr()
            dS_dVm = (diagV @ (yr @ diagVnorm).conjugate() + diagI.conjugate() @ diagVnorm).tocsr()
            J11 = dS_dVa[pvpq][:, pvpq].real
            J12 = dS_dVm[pvpq][:, pq_i].real
            J21 = dS_dVa[pq_i][:, pvpq].imag
            J22 = dS_dVm[pq_i][:, pq_i].imag
            J = sparse.bmat([[J11, J12], [J21, J22]], format="csr")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                dx = spsolve(J, -F)
        if not np.all(np.isfinite(dx)):
            raise PowerFlowDiverged("singular Jacobian")
        va = np.angle(V)
        vm = np.abs(V)
        va[pvpq] += dx[: pvpq.size]
        vm[pq_i] += dx[pvpq.size :]
        if np.any(vm <= 0) or np.any(vm > 3.0):
            raise PowerFlowDiverged("voltage magnitude left the physical region")
        V = vm * np.exp(1j * va)
        F = mismatch(V)
        norm = np.max(np.abs(F)) if F.size else 0.0
        it += 1

    out = np.zeros(n, dtype=complex)
    out[act] = V
    return out, it, norm


def solve_power_flow(
    case: NetworkCase,
    spec: Optional[CaseSpec] = None,
    options: Optional[PowerFlowOptions] = None,
    v0: Optional[np.ndarray] = None,
) -> PowerFlowSolution:
    """Solve the AC power flow for the case (plus overlay, if spec given).

    Raises PowerFlowDiverged on non-convergence. Q limits are NOT applied
    here; call enforce_q_limits on the result.
    """
    options = options or PowerFlowOptions()
    if spec is None:
        spec = build_case_spec(case)
    start = None if options.flat_start else v0
    V, iters, mis = newton_solve(
        spec.ybus, spec.p_inj, spec.q_inj, spec.kind, spec.v_set, spec.energized,
        v0=start, tol=options.tolerance, max_iter=options.max_iter,
    )
    return PowerFlowSolution(
        vm=np.abs(V), va=np.angle(V), kind=spec.kind.copy(),
        iterations=iters, max_mismatch=mis, spec=spec, v_complex=V,
    )


def enforce_q_limits(
    case: NetworkCase,
    sol: PowerFlowSolution,
    options: Optional[PowerFlowOptions] = None,
) -> PowerFlowSolution:
    """Hold generator reactive output inside its limits by PV/PQ re-typing.

    Buses whose aggregate generation saturates a Q limit are re-typed PQ at
    the binding limit and the case re-solved; a bus pinned at a limit whose
    voltage crosses back over the setpoint is released to PV again. Stops
    when a round makes no switches or the round budget is exhausted (the
    last consistent solution is returned with q_limit_warning set).
    """
    options = options or PowerFlowOptions()
    spec = sol.spec
    eps = 1e-9
    kind = sol.kind.copy()
    q_inj = spec.q_inj.copy()
    pinned: dict[int, str] = {}
    switches: list[tuple[int, str]] = []
    current = sol

    for _ in range(options.q_limit_rounds):
        inj = current.bus_injections_pu()
        changed = False
        for i in np.flatnonzero(spec.energized):
            if kind[i] == PV:
                q_gen = inj.imag[i] + spec.q_load[i] / spec.base_mva
                if q_gen > spec.q_max_bus[i] + eps:
                    kind[i] = PQ
                    q_inj[i] = spec.q_max_bus[i] - spec.q_load[i] / spec.base_mva
                    pinned[i] = "max"
                    switches.append((case.buses[i].id, "pv->pq@qmax"))
                    changed = True
                elif q_gen < spec.q_min_bus[i] - eps:
                    kind[i] = PQ
                    q_inj[i] = spec.q_min_bus[i] - spec.q_load[i] / spec.base_mva
                    pinned[i] = "min"
                    switches.append((case.buses[i].id, "pv->pq@qmin"))
                    changed = True
            elif i in pinned:
                vm = current.vm[i]
                if (pinned[i] == "max" and vm > spec.v_set[i] + eps) or (
                    pinned[i] == "min" and vm < spec.v_set[i] - eps
                ):
                    kind[i] = PV
                    q_inj[i] = spec.q_inj[i]
                    del pinned[i]
                    switches.append((case.buses[i].id, "pq->pv"))
                    changed = True
        if not changed:
            current.pv_pq_switches = switches
            return current
        V, iters, mis = newton_solve(
            spec.ybus, spec.p_inj, q_inj, kind, spec.v_set, spec.energized,
            v0=current.v, tol=options.tolerance, max_iter=options.max_iter,
        )
        current = PowerFlowSolution(
            vm=np.abs(V), va=np.angle(V), kind=kind.copy(),
            iterations=current.iterations + iters, max_mismatch=mis, spec=spec, v_complex=V,
        )

    current.pv_pq_switches = switches
    current.q_limit_warning = True
    return current


def branch_matrices(case: NetworkCase, branch_closed: np.ndarray, taps: np.ndarray):
    """Per-branch two-port admittance rows (yff, yft, ytf, ytt) and endpoint indices."""
    pos = case.bus_index()
    nb = len(case.branches)
    yff = np.zeros(nb, dtype=complex)
    yft = np.zeros(nb, dtype=complex)
    ytf = np.zeros(nb, dtype=complex)
    ytt = np.zeros(nb, dtype=complex)
    fi = np.zeros(nb, dtype=int)
    ti = np.zeros(nb, dtype=int)
    for k, br in enumerate(case.branches):
        fi[k], ti[k] = pos[br.from_bus], pos[br.to_bus]
        if not branch_closed[k]:
            continue
        ys = 1.0 / (br.r + 1j * br.x)
        half_b = 1j * br.b_charging / 2.0
        t = taps[k]
        yff[k] = (ys + half_b) / (t * t)
        yft[k] = -ys / t
        ytf[k] = -ys / t
        ytt[k] = ys + half_b
    return yff, yft, ytf, ytt, fi, ti


def compute_branch_flows(case: NetworkCase, sol: PowerFlowSolution) -> PowerFlowSolution:
    """Fill per-branch MW/Mvar flows at both ends and loading percent."""
    spec = sol.spec
    yff, yft, ytf, ytt, fi, ti = branch_matrices(case, spec.branch_closed, spec.taps)
    v = sol.v
    vf, vt = v[fi], v[ti]
    s_from = vf * np.conj(yff * vf + yft * vt) * spec.base_mva
    s_to = vt * np.conj(ytf * vf + ytt * vt) * spec.base_mva
    sol.p_from_mw = s_from.real
    sol.q_from_mvar = s_from.imag
    sol.p_to_mw = s_to.real
    sol.q_to_mvar = s_to.imag
    limits = np.array([b.mva_limit for b in case.branches])
    apparent = np.maximum(np.abs(s_from), np.abs(s_to))
    sol.loading_pct = apparent / limits * 100.0
    return sol


def distribute_generation(case: NetworkCase, sol: PowerFlowSolution) -> PowerFlowSolution:
    """Split solved bus-level injections into per-generator P and Q outputs.

    Non-slack generators keep their dispatched P. Slack pickup is shared by
    the slack bus's online units proportional to p_max. Reactive output is
    shared proportional to each unit's Q range, clamped to its limits.
    """
    spec = sol.spec
    pos = case.bus_index()
    inj = sol.bus_injections_pu()
    ng = len(case.generators)
    gen_p = np.zeros(ng)
    gen_q = np.zeros(ng)
    slack_actual = 0.0
    slack_sched = 0.0

    by_bus: dict[int, list[int]] = {}
    for j, g in enumerate(case.generators):
        if spec.gen_online[j]:
            by_bus.setdefault(pos[g.bus], []).append(j)

    for i, members in by_bus.items():
        if not spec.energized[i]:
            continue
        p_bus = inj.real[i] * spec.base_mva + spec.p_load[i]
        q_bus = inj.imag[i] * spec.base_mva + spec.q_load[i]
        if sol.kind[i] == SLACK:
            weights = np.array([max(case.generators[j].p_max, 1e-9) for j in members])
            shares = weights / weights.sum()
            for j, w in zip(members, shares):
                gen_p[j] = p_bus * w
            slack_actual += p_bus
            slack_sched += sum(spec.gen_p_mw[j] for j in members)
        else:
            for j in members:
                gen_p[j] = spec.gen_p_mw[j]
        spans = np.array([case.generators[j].q_max - case.generators[j].q_min for j in members])
        qmin_tot = sum(case.generators[j].q_min for j in members)
        qmax_tot = sum(case.generators[j].q_max for j in members)
        if qmax_tot > qmin_tot:
            alpha = (q_bus - qmin_tot) / (qmax_tot - qmin_tot)
            alpha = min(max(alpha, 0.0), 1.0)
            for j, span in zip(members, spans):
                gen_q[j] = case.generators[j].q_min + span * alpha
        else:
            for j in members:
                gen_q[j] = q_bus / len(members)
    sol.gen_p_mw = gen_p
    sol.gen_q_mvar = gen_q
    sol.slack_p_mw = slack_actual
    sol.slack_p_sched_mw = slack_sched
    return sol


def detect_violations(case: NetworkCase, sol: PowerFlowSolution) -> ViolationSet:
    """Strictly-outside-limits voltage and loading violations.

    De-energized buses read 0.0 pu and therefore count as under-voltage:
    dropping an island is a reliability event, not a free pass.
    """
    out = ViolationSet()
    for i, b in enumerate(case.buses):
        v = sol.vm[i]
        if v < b.v_min:
            out.bus_voltage.append((b.id, float(v), "under"))
        elif v > b.v_max:
            out.bus_voltage.append((b.id, float(v), "over"))
    if sol.loading_pct is not None:
        for k, br in enumerate(case.branches):
            if spec_closed(sol.spec, k) and sol.loading_pct[k] > 100.0:
                out.branch_overload.append((br.id, float(sol.loading_pct[k])))
    return out


def spec_closed(spec: CaseSpec, k: int) -> bool:
    return bool(spec.branch_closed[k])
