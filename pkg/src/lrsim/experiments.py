"""Experiment definitions: parameter schemas, validation and runners.

Each runner returns named tables (column names plus rows) and extra manifest
entries; writing files is left to the CLI.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import yaml

from . import bounds, decomp, gates
from .evolve import DenseOperator, EvolutionEngine, Mode, commutator_norm, heisenberg, pauli_operator
from .fitting import power_law_fit
from .lattice import heisenberg_chain, random_fields

U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output: str | None = None
    defaults_used: list = field(default_factory=list)


@dataclass
class Table:
    columns: list
    rows: list


@dataclass
class RunResult:
    tables: dict
    manifest: dict = field(default_factory=dict)


# -- schema helpers ------------------------------------------------------------------


def _num(v, name, errs, positive=False, integer=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append(f"{name} must be a number, got {v!r}")
        return None
    if integer and (not float(v).is_integer()):
        errs.append(f"{name} must be an integer, got {v!r}")
        return None
    if not math.isfinite(v):
        errs.append(f"{name} must be finite")
        return None
    if positive and v <= 0:
        errs.append(f"{name} must be positive, got {v!r}")
    if nonneg and v < 0:
        errs.append(f"{name} must be nonnegative, got {v!r}")
    return int(v) if integer else float(v)


def _num_list(v, name, errs, **kw):
    if not isinstance(v, (list, tuple)) or not v:
        errs.append(f"{name} must be a non-empty list")
        return None
    out = [_num(x, f"{name}[{k}]", errs, **kw) for k, x in enumerate(v)]
    return None if any(x is None for x in out) else out


def _choice(options):
    def check(v, name, errs):
        if v not in options:
            errs.append(f"{name} must be one of {sorted(options)}, got {v!r}")
            return None
        return v
    return check


def _bool(v, name, errs):
    if not isinstance(v, bool):
        errs.append(f"{name} must be true or false")
        return None
    return v


P = {
    "int+": lambda v, n, e: _num(v, n, e, positive=True, integer=True),
    "int0": lambda v, n, e: _num(v, n, e, nonneg=True, integer=True),
    "real+": lambda v, n, e: _num(v, n, e, positive=True),
    "real0": lambda v, n, e: _num(v, n, e, nonneg=True),
    "ints+": lambda v, n, e: _num_list(v, n, e, positive=True, integer=True),
    "reals+": lambda v, n, e: _num_list(v, n, e, positive=True),
    "bool": _bool,
}


@dataclass(frozen=True)
class Experiment:
    name: str
    schema: dict  # key -> (checker, default)
    check: Callable  # cross-field checks: (params, errs) -> None
    run: Callable  # (params, seed, threads) -> RunResult


def _block_constraint(ells, n, D, errs):
    for ell in ells:
        if 2 * ell > round(n ** (1 / D)):
            errs.append(f"ell={ell} violates the block-size constraint ell <= n^(1/D)/2 (n={n}, D={D})")


def _alpha_2d(alpha, D, errs):
    if alpha is not None and alpha <= 2 * D:
        errs.append(f"alpha must exceed 2D (alpha={alpha}, D={D})")


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- decomp-error --------------------------------------------------------------------------


def _check_decomp(p, errs):
    if p.get("ells") and p.get("n"):
        _block_constraint(p["ells"], p["n"], 1, errs)
        if p.get("schedule") == "split":
            for ell in p["ells"]:
                if ell >= p["n"] - 2:
                    errs.append(f"ell={ell} leaves no sites for A and C")
    if p.get("alpha") is not None and p["alpha"] <= 2:
        errs.append("alpha must exceed D+1 for the error model b/ell^(alpha-D-1)")
    if p.get("ells") and len(set(p["ells"])) < 4:
        errs.append("ells needs at least four distinct values for the fit")


def _run_decomp(p, seed, threads):
    n, alpha = p["n"], p["alpha"]
    H = heisenberg_chain(n, alpha, seed)
    engine = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    if p["schedule"] == "split":
        def one(ell):
            A, B, C = decomp.centered_split(H.lattice, ell)
            return decomp.lemma1_split(engine, A, B, C, p["t"])[1]
        time_label = p["t"]
    else:
        def one(ell):
            return decomp.schedule_error(decomp.hhkl_schedule_1d(n, ell, p["M"], p["T"], H.lattice), engine)
        time_label = p["T"]
    errors = _pmap(one, p["ells"], 1)  # the engine eigen cache is not thread-safe
    samples = [decomp.DecompErrorSample(ell, e, n, time_label, alpha, seed) for ell, e in zip(p["ells"], errors)]
    rows = [[s.ell, s.measured_error, n, time_label, alpha, seed] for s in samples]
    fit_rows = []
    if all(s.measured_error > 0 for s in samples):
        if p["schedule"] == "split":
            f = decomp.fit_decomp_prefactor(samples, alpha)
            fit_rows.append(["fixed", f.fixed.exponent, f.b, f.fixed.residual])
            fit_rows.append(["free", f.free.exponent, f.free.prefactor, f.free.residual])
        else:
            f = power_law_fit(p["ells"], errors)
            fit_rows.append(["free", f.exponent, f.prefactor, f.residual])
    return RunResult(
        {
            "errors": Table(["ell", "error", "n", "t", "alpha", "seed"], rows),
            "fit": Table(["kind", "exponent", "prefactor", "residual"], fit_rows),
        },
        {"fields": list(H.fields)},
    )


# -- hhkl-vs-qsp -------------------------------------------------------------------------------


def _check_hhkl(p, errs):
    _alpha_2d(p.get("alpha"), 1, errs)
    if p.get("eps") is not None and not 0 < p["eps"] < 1:
        errs.append("eps must lie in (0, 1)")
    if p.get("ns") and min(p["ns"]) < 4:
        errs.append("every n must be at least 4")


def _run_hhkl(p, seed, threads):
    ns = p["ns"]
    kw = {"split_budget": p["split_budget"], "census": p["census"]}

    def one(n):
        return (
            gates.hhkl_gate_count(n, n, p["eps"], p["alpha"], p["b"], seed, **kw),
            gates.qsp_gate_count(n, n, p["eps"], p["alpha"], seed),
        )

    reports = _pmap(one, ns, threads)
    rows = [[n, h.gates, q.gates, h.params["ell"], h.params["clamped"]] for n, (h, q) in zip(ns, reports)]
    fits = []
    if len(set(ns)) >= 2:
        fh = power_law_fit(ns, [h.gates for h, _ in reports])
        fq = power_law_fit(ns, [q.gates for _, q in reports])
        fits = [["HHKL", fh.exponent, fh.log_prefactor, fh.residual], ["QSP", fq.exponent, fq.log_prefactor, fq.residual]]
    return RunResult(
        {
            "gates": Table(["n", "hhkl_gates", "qsp_gates", "ell", "ell_clamped"], rows),
            "fit": Table(["algorithm", "exponent", "log_prefactor", "residual"], fits),
        },
        {"fields_seed": seed, "fields_note": "fields drawn per n from the seed; largest n listed",
         "fields": list(random_fields(max(ns), seed))},
    )


# -- pf4-empirical -------------------------------------------------------------------------------


def _check_pf4(p, errs):
    if p.get("ns") and (min(p["ns"]) < 2 or max(p["ns"]) > 12):
        errs.append("PF4 sizes must lie in 2..12 (full-space simulation)")
    if p.get("eps") is not None and not 0 < p["eps"] <= 2:
        errs.append("eps must lie in (0, 2]")


def _run_pf4(p, seed, threads):
    def one(n):
        H = heisenberg_chain(n, p["alpha"], seed)
        return gates.pf4_min_gates(H, p["T_per_site"] * n, p["eps"], max_steps=p["max_steps"])

    reports = _pmap(one, p["ns"], threads)
    rows = [[r.n, r.T, r.params["steps"], r.gates, r.params["error"]] for r in reports]
    fits = []
    if len(set(p["ns"])) >= 2:
        f = power_law_fit(p["ns"], [r.gates for r in reports])
        fits = [["PF4", f.exponent, f.log_prefactor, f.residual]]
    return RunResult(
        {
            "gates": Table(["n", "T", "steps", "gates", "error"], rows),
            "fit": Table(["algorithm", "exponent", "log_prefactor", "residual"], fits),
        },
        {"gate_unit": "term exponential", "fields": {str(n): list(random_fields(n, seed)) for n in p["ns"]}},
    )


# -- lr-commutator ----------------------------------------------------------------------------------


def _check_lr(p, errs):
    n = p.get("n")
    if n is not None and not 2 <= n <= 14:
        errs.append("n must lie in 2..14 for full-space evolution")
    if n is not None and p.get("distances"):
        if max(p["distances"]) > n - 1:
            errs.append("every distance must be at most n-1")
    _alpha_2d(p.get("alpha"), 1, errs)


def _run_lr(p, seed, threads):
    n, alpha = p["n"], p["alpha"]
    H = heisenberg_chain(n, alpha, seed)
    engine = EvolutionEngine(H, Mode.FULL)
    z = np.diag([1.0, -1.0])
    bp = bounds.BoundParams(alpha, 1, p["gamma"], p["v"], c_lr=p["c_lr"], c_lr_tilde=p["c_lr_tilde"])
    rows = []
    for T in p["times"]:
        for R in p["distances"]:
            c = commutator_norm(H, T, z, [0], z, [R], engine)
            rows.append([T, R, c, bounds.lr_bound(T, R, bp) if T > 0 else 0.0])
    return RunResult({"commutators": Table(["T", "R", "commutator", "bound"], rows)}, {"fields": list(H.fields)})


# -- light-cone-table ---------------------------------------------------------------------------------


def _check_light(p, errs):
    dims, alphas = p.get("dims") or [], p.get("alphas") or []
    if dims and alphas and not any(a > 2 * D for a in alphas for D in dims):
        errs.append("no (alpha, D) pair satisfies alpha > 2D")


def _run_light(p, seed, threads):
    rows = []
    for D in p["dims"]:
        for a in p["alphas"]:
            if a <= 2 * D:
                continue
            ours, prior = bounds.light_cone_exponents(a, D)
            rows.append([D, a, float(ours), float(prior), str(ours), str(prior), ours > prior])
    return RunResult({"light_cone": Table(["D", "alpha", "ours", "prior", "ours_exact", "prior_exact", "ours_gt_prior"], rows)})


# -- sum-checks --------------------------------------------------------------------------------------


def _check_sums(p, errs):
    for a in p.get("alphas") or []:
        for D in p.get("dims") or []:
            if a <= D:
                errs.append(f"tail sums need alpha > D (alpha={a}, D={D})")
    if p.get("radii") and min(p["radii"]) <= 1:
        errs.append("radii must exceed sqrt(D)")


def _run_sums(p, seed, threads):
    rows = []
    for D in p["dims"]:
        for a in p["alphas"]:
            for R in p["radii"]:
                c = bounds.verify_sum_lemma("tail", R=R, alpha=a, D=D)
                rows.append(["tail", D, a, R, c.brute, c.shape, c.ratio])
    for d in p["separations"]:
        c = bounds.verify_sum_lemma("conv", d=d, alpha=p["conv_alpha"], D=1)
        rows.append(["conv", 1, p["conv_alpha"], d, c.brute, c.shape, c.ratio])
    fits = []
    for D in p["dims"]:
        for a in p["alphas"]:
            sel = [r for r in rows if r[0] == "tail" and r[1] == D and r[2] == a]
            if len({r[3] for r in sel}) >= 2:
                f = power_law_fit([r[3] for r in sel], [r[4] for r in sel])
                fits.append([D, a, f.exponent, -(a - D)])
    return RunResult(
        {
            "sums": Table(["kind", "D", "alpha", "parameter", "brute", "shape", "ratio"], rows),
            "tail_fit": Table(["D", "alpha", "exponent", "expected"], fits),
        }
    )


# -- shell-error ------------------------------------------------------------------------------------------


def _check_shell(p, errs):
    n = p.get("n")
    if n is not None and not 2 <= n <= 14:
        errs.append("n must lie in 2..14 for full-space evolution")
    if n is not None and p.get("center") is not None and p["center"] >= n:
        errs.append("center must be a site of the chain")


def _run_shell(p, seed, threads):
    n, T, M = p["n"], p["T"], p["M"]
    H = heisenberg_chain(n, p["alpha"], seed)
    engine = EvolutionEngine(H, Mode.FULL)
    O = engine.native(DenseOperator(pauli_operator(n, [p["center"]], "Z"), hermitian=True))
    U = engine.unitary(None, T)
    exact = heisenberg(U, O)
    rows = []
    for ell in p["ells"]:
        reduced = decomp.shell_schedule(H.lattice, p["r0"], ell, M, T, p["center"])
        expanded = decomp.shell_schedule(H.lattice, p["r0"], ell, M, T, p["center"], expanded=True)
        red = heisenberg(decomp.apply_schedule(reduced, engine), O)
        full = heisenberg(decomp.apply_schedule(expanded, engine), O)
        rows.append([ell, (exact - red).norm(), (full - red).norm()])
    return RunResult({"shell": Table(["ell", "error", "cancellation_gap"], rows)}, {"fields": list(H.fields)})


EXPERIMENTS = {
    "decomp-error": Experiment(
        "decomp-error",
        {
            "n": (P["int+"], 300), "alpha": (P["real+"], 4.0), "t": (P["real+"], 0.01),
            "ells": (P["ints+"], list(range(4, 34, 2))), "schedule": (_choice({"split", "hhkl"}), "split"),
            "T": (P["real0"], 1.0), "M": (P["int+"], 100),
        },
        _check_decomp, _run_decomp,
    ),
    "hhkl-vs-qsp": Experiment(
        "hhkl-vs-qsp",
        {
            "ns": (P["ints+"], [2**k for k in range(6, 14)]), "eps": (P["real+"], 1e-3), "alpha": (P["real+"], 4.0),
            "b": (P["real+"], 1.62e-3), "split_budget": (P["bool"], True),
            "census": (_choice({"exact", "asymptotic"}), "exact"),
        },
        _check_hhkl, _run_hhkl,
    ),
    "pf4-empirical": Experiment(
        "pf4-empirical",
        {
            "ns": (P["ints+"], list(range(4, 11))), "eps": (P["real+"], 1e-3), "alpha": (P["real+"], 4.0),
            "T_per_site": (P["real+"], 1.0), "max_steps": (P["int+"], 2**20),
        },
        _check_pf4, _run_pf4,
    ),
    "lr-commutator": Experiment(
        "lr-commutator",
        {
            "n": (P["int+"], 10), "alpha": (P["real+"], 4.0), "times": (P["reals+"], [0.5, 1.0, 2.0]),
            "distances": (P["ints+"], [3, 5, 7, 9]), "gamma": (P["real+"], 0.5), "v": (P["real+"], 1.0),
            "c_lr": (P["real0"], 1.0), "c_lr_tilde": (P["real0"], 1.0),
        },
        _check_lr, _run_lr,
    ),
    "light-cone-table": Experiment(
        "light-cone-table",
        {"alphas": (P["reals+"], [2.5, 3, 4, 6, 10]), "dims": (P["ints+"], [1])},
        _check_light, _run_light,
    ),
    "sum-checks": Experiment(
        "sum-checks",
        {
            "alphas": (P["reals+"], [3, 4, 6]), "dims": (P["ints+"], [1, 2]),
            "radii": (P["reals+"], [10, 20, 40, 70, 100]), "separations": (P["ints+"], [5, 10, 20, 50, 100]),
            "conv_alpha": (P["real+"], 4.0),
        },
        _check_sums, _run_sums,
    ),
    "shell-error": Experiment(
        "shell-error",
        {
            "n": (P["int+"], 12), "alpha": (P["real+"], 4.0), "T": (P["real0"], 1.0), "M": (P["int+"], 3),
            "r0": (P["real0"], 0.0), "ells": (P["ints+"], [1, 2, 3]), "center": (P["int0"], 0),
        },
        _check_shell, _run_shell,
    ),
}


def validate_config(raw: str | dict, experiment: str | None = None) -> ExperimentConfig:
    """Parse YAML/JSON text (or a mapping) into a config, collecting every violation."""
    if isinstance(raw, str):
        try:
            data = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError([f"malformed config: {exc}"]) from exc
    else:
        data = raw
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping"])
    data = dict(data)
    errs = []
    name = data.pop("experiment", None) or experiment
    if experiment and name != experiment:
        errs.append(f"config is for experiment {name!r} but {experiment!r} was requested")
    if name not in EXPERIMENTS:
        raise ConfigError(errs + [f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}"])
    exp = EXPERIMENTS[name]
    defaults_used = []
    seed = data.pop("seed", None)
    if seed is None:
        seed = 0
        defaults_used.append("seed")
    elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
        errs.append(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    output = data.pop("output", None)
    if output is not None and not isinstance(output, str):
        errs.append("output must be a path string")
    raw_params = data.pop("params", None)
    if raw_params is None:
        raw_params = {}
    if not isinstance(raw_params, dict):
        errs.append("params must be a mapping")
        raw_params = {}
    # parameters may sit at the top level or under "params"
    merged = {**data, **raw_params}
    params = {}
    for key in sorted(set(merged) - set(exp.schema)):
        errs.append(f"unknown key {key!r} for {name}")
    for key, (checker, default) in exp.schema.items():
        if key in merged:
            params[key] = checker(merged[key], key, errs)
        else:
            params[key] = default
            defaults_used.append(key)
    exp.check(params, errs)
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(name, params, seed, output, defaults_used)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RunResult:
    return EXPERIMENTS[config.experiment].run(config.params, config.seed, threads)


def config_json(config: ExperimentConfig) -> str:
    return json.dumps({"experiment": config.experiment, "seed": config.seed, "params": config.params}, sort_keys=True)
