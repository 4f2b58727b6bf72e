"""Experiment runners behind the CLI.

Each runner takes a validated :class:`ExperimentConfig` and returns a
:class:`RunResult`: named tables, a JSON-ready summary and the truncation
metadata stamped on every output file. Parsing happens before any heavy
numerics so that a bad config fails fast.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import geomphase, histories, phasespace, stochlimit, testbeds, wigner
from .config import ConfigError, ExperimentConfig, Section, parse_matrix
from .ctp import CorrelatorRequest, correlator
from .hilbert import SizeCapError, random_hermitian
from .histories import HistoryProposition, SystemSpec, TimeGrid
from .phasespace import FockSpec

__all__ = ["RunResult", "Table", "BudgetExceeded", "RUNNERS", "run_experiment"]


class BudgetExceeded(RuntimeError):
    """The run went over ``limits.max_seconds``."""


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"{self.name}: row has {len(row)} fields, expected {len(self.columns)}")
        self.rows.append(row)


@dataclass
class RunResult:
    tables: list[Table]
    summary: dict
    truncation: dict


class _Budget:
    def __init__(self, seconds):
        self.deadline = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceeded("time budget exhausted")


# parsing helpers -------------------------------------------------------------

def _system(sec: Section, key: str = "system") -> SystemSpec:
    s = sec.sub(key, required=True)
    h = parse_matrix(s.get("hamiltonian", required=True), f"{s.path}.hamiltonian")
    rho = parse_matrix(s.get("rho0", required=True), f"{s.path}.rho0")
    _reject_unused(s)
    return SystemSpec(h, rho)


def _history(raw, path: str) -> HistoryProposition:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object with 'times' and 'projectors'")
    s = Section(raw, path)
    times = s.numbers("times", required=True)
    projs = s.get("projectors", required=True)
    if not isinstance(projs, list):
        raise ConfigError(f"{path}.projectors: expected a list")
    _reject_unused(s)
    return HistoryProposition(TimeGrid(tuple(times)),
                              tuple(parse_matrix(p, f"{path}.projectors[{k}]") for k, p in enumerate(projs)))


def _pairs(sec: Section, key: str, n: int) -> list[tuple[int, int]]:
    raw = sec.get(key, [])
    if not isinstance(raw, list):
        raise ConfigError(f"{sec.path}.{key}: expected a list of index pairs")
    out = []
    for p in raw:
        if (not isinstance(p, list) or len(p) != 2
                or not all(isinstance(i, int) and not isinstance(i, bool) and 0 <= i < n for i in p)):
            raise ConfigError(f"{sec.path}.{key}: bad pair {p!r}")
        out.append((p[0], p[1]))
    return out


def _fock(sec: Section, max_ncut: int = 200) -> FockSpec:
    return FockSpec(sec.number("ncut", required=True, lo=2, hi=max_ncut, integer=True),
                    sec.number("omega", 1.0, lo=1e-6))


def _reject_unused(sec: Section):
    extra = sec.unused()
    if extra:
        raise ConfigError(f"{sec.path}: unknown keys {extra}")


def _need_seed(cfg: ExperimentConfig, why: str) -> np.random.Generator:
    if cfg.seed is None:
        raise ConfigError(f"'seed' is required: {why}")
    return np.random.default_rng(cfg.seed)


def _c(z) -> tuple[float, float]:
    z = complex(z)
    return z.real, z.imag


# consistency -----------------------------------------------------------------

def _consistency(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    eps = float(cfg.raw.get("tolerances", {}).get("eps", 1e-6))
    rand = sec.get("random")
    tables, summary = [], {}
    truncation = {}
    if rand is not None:
        rs = Section(rand, "consistency.random") if isinstance(rand, dict) else None
        if rs is None:
            raise ConfigError("consistency.random: expected an object")
        count = rs.number("instances", 200, lo=1, hi=10000, integer=True)
        max_dim = rs.number("max_dim", 4, lo=2, hi=8, integer=True)
        max_times = rs.number("max_times", 4, lo=1, hi=6, integer=True)
        pure = bool(rs.get("pure", False))
        _reject_unused(rs)
        rng = _need_seed(cfg, "random instances requested")
    sys = hs = None
    if "histories" in sec.data or "system" in sec.data:
        sys = _system(sec)
        raw_hs = sec.get("histories", required=True)
        if not isinstance(raw_hs, list) or not raw_hs:
            raise ConfigError("consistency.histories: expected a non-empty list")
        hs = [_history(h, f"consistency.histories[{k}]") for k, h in enumerate(raw_hs)]
        pairs = _pairs(sec, "additivity_pairs", len(hs))
        rev_pairs = _pairs(sec, "reversal_pairs", len(hs))
        bnd = bool(sec.get("boundary_check", sys.is_pure()))
    _reject_unused(sec)
    if sys is None and rand is None:
        raise ConfigError("consistency: give 'system' with 'histories', or 'random'")

    if sys is not None:
        truncation["dim"] = sys.dim
        bad = histories.check_exclusive(hs)
        if bad:
            raise ConfigError(f"histories {bad[0]} are not exclusive")
        deficit = histories.check_exhaustive(hs)
        if deficit > 1e-9:
            raise ConfigError(f"histories are not exhaustive (rank deficit {deficit:.3g})")
        dm, ok = histories.consistency_check(hs, sys, eps)
        t = Table("decoherence_matrix", ("i", "j", "re", "im", "abs"))
        for i in range(len(hs)):
            for j in range(len(hs)):
                v = dm.values[i, j]
                t.add(i, j, *_c(v), abs(v))
        tables.append(t)
        summary.update(consistent=ok, max_offdiagonal=dm.max_offdiagonal, eps=eps,
                       diagonal_sum=dm.diagonal_sum, probabilities=dm.probabilities.tolist(),
                       histories=len(hs))
        if pairs:
            t = Table("additivity", ("i", "j", "defect", "two_abs_re_d", "residual"))
            for i, j in pairs:
                defect = histories.additivity_defect(hs[i], hs[j], sys)
                ref = 2 * abs(dm.values[i, j].real)
                t.add(i, j, defect, ref, abs(defect - ref))
            tables.append(t)
            summary["max_additivity_defect"] = max(r[2] for r in t.rows)
        if rev_pairs:
            t = Table("time_reversal", ("i", "j", "residual"))
            for i, j in rev_pairs:
                t.add(i, j, histories.reversal_identity_check(hs[i], hs[j], sys))
            tables.append(t)
            summary["max_reversal_residual"] = max(r[2] for r in t.rows)
        if bnd:
            if not sys.is_pure():
                raise ConfigError("boundary_check needs a pure initial state")
            worst = 0.0
            for a in hs:
                for b in hs:
                    if a.times == b.times:
                        worst = max(worst, abs(histories.boundary_decomposition(a, b, sys)
                                               - histories.decoherence_functional(a, b, sys)))
            summary["max_boundary_residual"] = worst
    if rand is not None:
        t = Table("axioms", ("instance", "dim", "times", "normalization", "hermiticity", "null",
                             "additivity", "positivity", "boundary"))
        worst: dict[str, float] = {}
        for k in range(count):
            budget.check()
            inst = testbeds.random_instance(rng, max_dim, max_times, pure)
            res = testbeds.axiom_residuals(inst, rng)
            res["boundary"] = testbeds.boundary_residual(inst, rng) if pure else float("nan")
            for key, v in res.items():
                if not np.isnan(v):
                    worst[key] = max(worst.get(key, 0.0), v)
            t.add(k, inst.sys.dim, len(inst.grid), res["normalization"], res["hermiticity"],
                  res["null"], res["additivity"], res["positivity"], res["boundary"])
        tables.append(t)
        summary["axiom_worst"] = worst
        summary["instances"] = count
        truncation["max_dim"] = max_dim
        truncation["max_times"] = max_times
    return RunResult(tables, summary, truncation)


# berry -------------------------------------------------------------------------

def _berry(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    theta = sec.number("theta", required=True, lo=0.0, hi=np.pi)
    ns = sec.numbers("n_values", required=True, integer=True)
    gauge = bool(sec.get("gauge_check", True))
    _reject_unused(sec)
    if min(ns) < 3 or max(ns) > 100000:
        raise ConfigError("berry.n_values must lie in [3, 100000]")
    if len(set(ns)) < 2:
        raise ConfigError("berry.n_values needs at least two distinct values")
    rng = _need_seed(cfg, "the gauge check draws random phases") if gauge else None
    exact = geomphase.wrap_phase(-2 * np.pi * np.sin(theta / 2) ** 2)
    t = Table("phase_vs_n", ("n", "phase", "error", "gauge_residual", "reversal_residual"))
    phases = []
    for n in sorted(ns):
        budget.check()
        path = geomphase.bloch_circle_path(theta, n)
        ph = geomphase.pancharatnam_phase(path)
        g = float("nan")
        if gauge:
            shifted = path.regauged(rng.uniform(-np.pi, np.pi, len(path)))
            g = abs(geomphase.wrap_phase(geomphase.pancharatnam_phase(shifted) - ph))
        rev = abs(geomphase.wrap_phase(geomphase.pancharatnam_phase(path.reversed()) + ph))
        phases.append(ph)
        t.add(n, ph, abs(geomphase.wrap_phase(ph - exact)), g, rev)
    extrap = geomphase.richardson(sorted(ns), phases, order=2)
    summary = {
        "theta": theta, "exact": exact, "richardson": extrap,
        "finest_n": max(ns), "finest_phase": phases[-1],
        "finest_vs_richardson": abs(phases[-1] - extrap),
        "richardson_vs_exact": abs(extrap - exact),
        "max_gauge_residual": max(r[3] for r in t.rows) if gauge else None,
    }
    return RunResult([t], summary, {"dim": 2})


# coherent-action ---------------------------------------------------------------

def _bump(sec: Section, key: str):
    s = sec.sub(key, required=True)
    amp = s.number("amplitude", required=True, lo=0.0)
    phase = s.number("phase", 0.0)
    _reject_unused(s)
    return amp, phase


def _coherent_action(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    spec = _fock(sec)
    ns = sec.numbers("n_values", required=True, integer=True)
    period = sec.number("period", 2 * np.pi, lo=1e-6)
    a_amp, a_ph = _bump(sec, "path_a")
    b_amp, b_ph = _bump(sec, "path_b")
    _reject_unused(sec)
    if min(ns) < 1 or max(ns) > 4096:
        raise ConfigError("coherent-action.n_values must lie in [1, 4096]")
    if max(a_amp, b_amp) ** 2 / 2 > spec.hard_radius2:
        raise phasespace.TruncationError("path amplitude exceeds the truncation")
    t = Table("discrepancy_vs_n", ("n", "operator_re", "operator_im", "action_re", "action_im",
                                   "modulus_discrepancy", "phase_discrepancy"))
    for n in sorted(ns):
        budget.check()
        za = testbeds.bump_path(a_amp, a_ph, n, period, spec.omega)
        zb = testbeds.bump_path(b_amp, b_ph, n, period, spec.omega)
        r = phasespace.coherent_history_decoherence(za, zb, spec)
        t.add(n, *_c(r.operator_side), *_c(r.action_side), r.modulus_discrepancy, r.phase_discrepancy)
    ph = [r[6] for r in t.rows]
    summary = {
        "phase_discrepancies": ph,
        "monotone_decrease": bool(all(b < a for a, b in zip(ph, ph[1:]))),
        "finest_n": max(ns), "finest_phase_discrepancy": ph[-1],
    }
    return RunResult([t], summary, {"ncut": spec.ncut, "omega": spec.omega})


# wigner-identities -------------------------------------------------------------

def _named_operator(name: str, spec: FockSpec) -> np.ndarray:
    q = phasespace.position(spec)
    p = phasespace.momentum(spec)
    table = {"q": q, "p": p, "q2": q @ q, "p2": p @ p, "h": (q @ q + p @ p) / 2, "qp": (q @ p + p @ q) / 2}
    if name not in table:
        raise ConfigError(f"unknown operator '{name}'; choose from {sorted(table)}")
    return table[name]


def _wigner_identities(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    spec = _fock(sec)
    npts = sec.number("grid_points", 65, lo=9, hi=1025, integer=True)
    count = sec.number("operators", 20, lo=0, hi=1000, integer=True)
    support = sec.number("support", max(2, spec.ncut // 10), lo=1, hi=spec.ncut, integer=True)
    moyal = sec.get("moyal_pairs", [])
    _reject_unused(sec)
    if not isinstance(moyal, list) or any(not isinstance(p, list) or len(p) != 2 for p in moyal):
        raise ConfigError("wigner-identities.moyal_pairs: expected [[name, name], ...]")
    pairs = [(_named_operator(a, spec), _named_operator(b, spec), f"{a},{b}") for a, b in moyal]
    grid = wigner.calibrated_grid(spec, npts)
    tables = []
    summary: dict = {"grid_points": npts, "support": support}
    if count:
        rng = _need_seed(cfg, "random operators requested")
        t = Table("trace_identities", ("index", "trace_rel_err", "product_rel_err"))
        for k in range(count):
            budget.check()
            a = np.zeros((spec.ncut, spec.ncut), dtype=np.complex128)
            b = np.zeros_like(a)
            a[:support, :support] = random_hermitian(rng, support)
            b[:support, :support] = random_hermitian(rng, support)
            r = wigner.trace_identities(a, b, grid, spec)
            t.add(k, r["trace_rel_err"], r["product_rel_err"])
        tables.append(t)
        summary["max_trace_rel_err"] = max(r[1] for r in t.rows)
        summary["max_product_rel_err"] = max(r[2] for r in t.rows)
    if pairs:
        t = Table("moyal", ("pair", "residual"))
        for a, b, label in pairs:
            budget.check()
            t.add(label, wigner.moyal_consistency_check(a, b, grid, spec))
        tables.append(t)
        summary["max_moyal_residual"] = max(r[1] for r in t.rows)
    if not tables:
        raise ConfigError("wigner-identities: nothing to do (operators = 0 and no moyal_pairs)")
    return RunResult(tables, summary, {"ncut": spec.ncut, "omega": spec.omega})


# multi-time-additivity ---------------------------------------------------------

def _nodes(sec: Section, key: str) -> list[tuple[float, float]]:
    raw = sec.get(key, [])
    if not isinstance(raw, list) or any(not isinstance(x, list) or len(x) != 2 for x in raw):
        raise ConfigError(f"{sec.path}.{key}: expected a list of [q, p] pairs")
    return [(float(q), float(p)) for q, p in raw]


def _oscillator_system(sec: Section, spec: FockSpec) -> SystemSpec:
    center = sec.get("coherent_state", [0.0, 0.0])
    if not isinstance(center, list) or len(center) != 2:
        raise ConfigError(f"{sec.path}.coherent_state: expected [q, p]")
    psi = phasespace.coherent_state(tuple(map(float, center)), spec)
    return SystemSpec.pure(phasespace.oscillator_hamiltonian(spec), psi)


def _multi_time(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    spec = _fock(sec)
    sys = _oscillator_system(sec, spec)
    times_a = sec.numbers("times_a", required=True)
    rest = _nodes(sec, "nodes_a_rest")
    times_b = sec.numbers("times_b", [], allow_empty=True)
    nodes_b = _nodes(sec, "nodes_b")
    npts = sec.number("grid_points", 65, lo=9, hi=1025, integer=True)
    factors = sec.numbers("refinements", [1, 2], integer=True)
    _reject_unused(sec)
    if any(f < 1 for f in factors):
        raise ConfigError("refinements must be positive integers")
    n, m = len(times_a), len(times_b)
    base = wigner.calibrated_grid(spec, npts)
    t = Table("residual_vs_grid", ("refinement", "points_per_axis", "residual"))
    for f in factors:
        budget.check()
        g = base.refined(f) if f > 1 else base
        t.add(f, g.nq, wigner.additivity_check(n, m, sys, spec, g, times_a, rest, times_b, nodes_b))
    res = [r[2] for r in t.rows]
    summary = {
        "n": n, "m": m, "residuals": res,
        "refinement_ratios": [b / a if a > 0 else None for a, b in zip(res, res[1:])],
    }
    return RunResult([t], summary, {"ncut": spec.ncut, "omega": spec.omega})


# ctp-correlators ---------------------------------------------------------------

def _ctp(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    sys = _system(sec)
    a = parse_matrix(sec.get("observable", required=True), "ctp-correlators.observable")
    grid = TimeGrid(tuple(sec.numbers("grid", required=True)))
    step = sec.number("step", 1e-3, lo=1e-8, hi=0.1)
    raw = sec.get("requests", required=True)
    _reject_unused(sec)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("ctp-correlators.requests: expected a non-empty list")
    reqs = []
    for k, r in enumerate(raw):
        rs = Section(r if isinstance(r, dict) else {}, f"ctp-correlators.requests[{k}]")
        req = CorrelatorRequest(tuple(rs.get("plus", [])), tuple(rs.get("minus", [])))
        _reject_unused(rs)
        req.check_grid(grid)
        reqs.append(req)
    t = Table("correlators", ("r", "s", "plus", "minus", "direct_re", "direct_im",
                              "fd_re", "fd_im", "residual", "step"))
    for req in reqs:
        budget.check()
        res = correlator(a, req, sys, grid, step)
        t.add(req.r, req.s, " ".join(map(repr, req.plus_times)), " ".join(map(repr, req.minus_times)),
              *_c(res.value), *_c(res.fd_value), res.residual, res.step)
    summary = {"requests": len(reqs), "max_residual": max(r[8] for r in t.rows),
               "all_within_threshold": all(r[8] <= 1e-5 for r in t.rows)}
    return RunResult([t], summary, {"dim": sys.dim})


# stochastic-limit --------------------------------------------------------------

def _stochastic(cfg: ExperimentConfig, budget: _Budget) -> RunResult:
    sec = cfg.params
    mode = sec.get("mode", "observable")
    vs = sec.numbers("V_sweep", required=True)
    times = sec.numbers("times", required=True)
    if any(v <= 0 for v in vs):
        raise ConfigError("V_sweep entries must be positive")
    if mode == "phase-space":
        spec = _fock(sec)
        sys = _oscillator_system(sec, spec)
        centers = _nodes(sec, "centers")
        _reject_unused(sec)
        pset = stochlimit.PhaseCellSet.product_cells(tuple(times), centers, sys, spec)
        t = Table("onset", ("V", "imag_witness"))
        for row in stochlimit.phase_cell_onset(pset, vs):
            budget.check()
            t.add(row.V, row.ratio)
        return RunResult([t], {"mode": mode, "witness": [r[1] for r in t.rows]},
                         {"ncut": spec.ncut, "omega": spec.omega})
    if mode != "observable":
        raise ConfigError(f"stochastic-limit.mode: unknown mode '{mode}'")
    sys = _system(sec)
    a = parse_matrix(sec.get("observable", required=True), "stochastic-limit.observable")
    centers = sec.numbers("centers", required=True)
    slot = sec.number("kolmogorov_slot", 0, lo=0, integer=True)
    oracle = bool(sec.get("transfer_oracle", False))
    _reject_unused(sec)
    hset = stochlimit.SmearedHistorySet.product_cells(tuple(times), centers, sys, a)
    if hset.n >= 2 and slot >= hset.n:
        raise ConfigError("kolmogorov_slot out of range")
    onset = Table("onset", ("V", "ratio", "bare_ratio", "kolmogorov_residual", "bookkeeping",
                            "family_sum"))
    probs = Table("probabilities", ("V", "cell", "p", "raw", "transfer", "error", "leak"))
    worst_excess = -np.inf
    for V in vs:
        budget.check()
        ratio, bare = stochlimit.decoherence_ratio(hset, V)
        table = stochlimit.extracted_probabilities(hset, V)
        if hset.n >= 2:
            kr = stochlimit.kolmogorov_residual(hset, V, slot)
            kres, book = kr.residual, kr.bookkeeping
        else:
            kres = book = float("nan")
        onset.add(V, ratio, bare, kres, book, table.family_sum)
        if oracle:
            ref = stochlimit.transfer_matrix_probabilities(hset)
            leak = stochlimit.overlap_leak(hset, V)
            for c, p, raw, lk in zip(hset.cells, table.probabilities, table.raw, leak):
                err = abs(raw - ref.get(c, 0.0))
                worst_excess = max(worst_excess, err - lk)
                probs.add(V, " ".join(map(repr, c)), p, raw, ref.get(c, 0.0), err, lk)
    ratios = [r[1] for r in onset.rows]
    kres = [r[3] for r in onset.rows]
    order = np.argsort(vs)
    summary = {
        "mode": mode,
        "ratios": ratios,
        "kolmogorov_residuals": kres,
        "ratio_nonincreasing": bool(all(ratios[j] <= ratios[i] + 1e-12 for i, j in zip(order, order[1:]))),
        "kolmogorov_nonincreasing": bool(all(kres[j] <= kres[i] + 1e-12
                                             for i, j in zip(order, order[1:]))),
    }
    tables = [onset]
    if oracle:
        summary["oracle_within_leak"] = bool(worst_excess <= 1e-12)
        summary["oracle_worst_excess"] = float(worst_excess)
        tables.append(probs)
    return RunResult(tables, summary, {"dim": sys.dim})


RUNNERS = {
    "consistency": _consistency,
    "berry": _berry,
    "coherent-action": _coherent_action,
    "wigner-identities": _wigner_identities,
    "multi-time-additivity": _multi_time,
    "ctp-correlators": _ctp,
    "stochastic-limit": _stochastic,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Dispatch ``cfg``; domain ``ValueError`` s become :class:`ConfigError`."""
    limits = cfg.raw.get("limits", {})
    if not isinstance(limits, dict):
        raise ConfigError("limits must be an object")
    seconds = limits.get("max_seconds")
    if seconds is not None and (isinstance(seconds, bool) or not isinstance(seconds, (int, float))
                                or seconds <= 0):
        raise ConfigError("limits.max_seconds must be positive")
    budget = _Budget(seconds)
    try:
        return RUNNERS[cfg.kind](cfg, budget)
    except (ConfigError, SizeCapError, phasespace.TruncationError):
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
