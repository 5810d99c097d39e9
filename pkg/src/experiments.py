"""
Experiment specs and the run() driver behind the command-line interface.
"""
import time
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src import config
from src.balance import balance_of
from src.cocycle import (
    check_cocycle_axioms,
    coboundary_from,
    d1_to_zero,
    parse_target,
    quasimorphism_defect,
)
from src.data_processing import (
    load_nilsequence,
    log,
    parse_balance_map,
    parse_cocycle_map,
    parse_grid,
    parse_signal,
)
from src.filtered_groups import poly_eval
from src.finprob import run_suite
from src.gowers import u2_fourier, u_norm
from src.group_cube import FiniteAbelianGroup, enumerate_morphisms
from src.nilmanifold import (
    LiftError,
    correlate,
    inverse_demo,
    is_p_periodic,
    lift_morphism,
    morphism_check,
    nilsequence_eval,
    reduce_mod_gamma,
)


class ExperimentSpec(BaseModel):
    """One CLI invocation: command, its parameters, seed and budgets."""

    command: str
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    budget: int = Field(config.ENUMERATION_BUDGET, gt=0)
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    strict: bool = False
    n_jobs: int = config.N_JOBS

    @field_validator("command")
    @classmethod
    def known_command(cls, value):
        if value not in config.AVAILABLE_COMMANDS:
            raise ValueError(f"unknown command '{value}'; available: {config.AVAILABLE_COMMANDS}")
        return value

    @field_validator("n_jobs")
    @classmethod
    def nonzero_jobs(cls, value):
        if value == 0:
            raise ValueError("n_jobs must be nonzero (-1 uses every core)")
        return value

    @model_validator(mode="after")
    def check_sampling(self):
        if self.command in config.SAMPLED_COMMANDS and self.seed is None:
            raise ValueError(f"command '{self.command}' samples randomly; a seed is mandatory")
        for key in ("samples", "instances", "family_size"):
            if key in self.params and self.params[key] is not None and int(self.params[key]) <= 0:
                raise ValueError(f"{key} must be positive")
        return self

    def resolved_params(self):
        """Command defaults overridden by the given parameters, coerced to the defaults' types."""
        params = config.get_defaults_for_command(self.command)
        for key, value in self.params.items():
            if value is None:
                continue
            params[key] = _coerce(value, params.get(key))
        params["budget"] = self.budget
        params["format"] = self.format
        params["strict"] = self.strict
        return params


def _coerce(value, default):
    if not isinstance(value, str) or default is None or isinstance(default, str):
        return value
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def _run_gowers(spec, params):
    group = FiniteAbelianGroup.parse(params["group"])
    f = parse_signal(params["signal"], group)
    d = int(params["d"])
    value = u_norm(f, d, method=params["method"], budget=spec.budget, n_jobs=spec.n_jobs)
    results = {"group": repr(group), "d": d, "method": params["method"], "norm": value}
    if d == 2:
        results["fourier_check"] = u2_fourier(f)
    return results


def _run_nilseq(spec, params):
    ns = load_nilsequence(params)
    length = params.get("length") or ns.period or 10
    rows = []
    for n in range(int(length)):
        value = nilsequence_eval(ns, n)
        point, _ = reduce_mod_gamma(poly_eval(ns.poly, n), ns.carrier)
        rows.append({"n": n, "re": value.real, "im": value.imag, "point": [str(c) for c in point.coords]})
    results = {"nilsequence": ns.to_spec(), "rows": rows}
    if ns.period:
        results["periodic"] = is_p_periodic(ns.poly, ns.period, window=ns.period)
    return results


def _run_correlate(spec, params):
    ns = load_nilsequence(params)
    group_text = params.get("group") or (f"Z{ns.period}" if ns.period else None)
    if not group_text:
        raise ValueError("correlate needs --group or a nilsequence period")
    f = parse_signal(params["signal"], FiniteAbelianGroup.parse(group_text))
    value = correlate(f, ns, strict=spec.strict)
    return {"re": value.real, "im": value.imag, "abs": abs(value), "p": f.group.order}


def _run_lift(spec, params):
    ns = load_nilsequence(params)
    if not ns.period:
        raise ValueError("lift needs --period N")
    N = ns.period
    filtration = ns.poly.filtration
    table = [reduce_mod_gamma(poly_eval(ns.poly, n), ns.carrier)[0] for n in range(N)]
    is_morphism = morphism_check(table, N, filtration, int(params["n_dim"]),
                                 samples=int(params["samples"]), seed=spec.seed)
    try:
        g = lift_morphism(table, N, filtration, window_factor=int(params["window_factor"]))
    except LiftError as exc:
        log(f"⚠️  {exc}")
        return {
            "morphism_check": is_morphism,
            "coefficients": None,
            "periodic": False,
            "error": str(exc),
            "failed_level": exc.level,
        }
    return {
        "morphism_check": is_morphism,
        "coefficients": g.to_json(),
        "verified_window": [0, int(params["window_factor"]) * N],
        "periodic": is_p_periodic(g, N, window=N),
    }


def _run_cocycle(spec, params):
    domain = FiniteAbelianGroup.parse(params["group"])
    target = parse_target(params["target"])
    phi = parse_cocycle_map(params["phi"], domain, target)
    k = int(params["k"])
    action = params["action"]
    if action == "check":
        rho = coboundary_from(phi, domain, k, target)
        report = check_cocycle_axioms(rho, mode=params["mode"], samples=int(params["samples"]),
                                      seed=spec.seed, budget=spec.budget)
        return report.to_json()
    if action == "d1":
        rho = coboundary_from(phi, domain, k, target)
        return {"d1": d1_to_zero(rho, mode=params["mode"], samples=int(params["samples"]),
                                 seed=spec.seed, budget=spec.budget)}
    if action == "defect":
        rows = quasimorphism_defect(phi, domain, k, target, parse_grid(params["grid"]),
                                    samples=int(params["samples"]), seed=spec.seed, mode=params["mode"],
                                    budget=spec.budget, n_jobs=spec.n_jobs)
        return {"rows": rows}
    raise ValueError(f"Unknown cocycle action '{action}' (expected check, d1 or defect)")


def _run_balance(spec, params):
    p = int(params["p"])
    table, target = parse_balance_map(params["phi"], p, seed=spec.seed)
    result = balance_of(table, target, parse_grid(params["grid"]), samples=int(params["samples"]),
                        seed=spec.seed, family_size=int(params["family_size"]), mode=params["mode"],
                        n_jobs=spec.n_jobs)
    return dict(result.to_json(), target=target.name, p=p)


def _run_finprob(spec, params):
    return run_suite(params["lemma"], seed=spec.seed, instances=int(params["instances"]), n_jobs=spec.n_jobs)


def _run_inverse_demo(spec, params):
    return inverse_demo(int(params["p"]), seed=spec.seed, modulated=bool(params["modulated"]))


def _run_morphisms(spec, params):
    source = FiniteAbelianGroup.parse(params["source"])
    target = FiniteAbelianGroup.parse(params["target"])
    found = enumerate_morphisms(source, target, int(params["degree"]), budget=spec.budget)
    constants = [m for m in found if len(set(m)) == 1]
    return {
        "count": len(found),
        "constants": len(constants),
        "morphisms": [[list(x) for x in m] for m in found],
    }


HANDLERS = {
    "gowers": _run_gowers,
    "nilseq": _run_nilseq,
    "correlate": _run_correlate,
    "lift": _run_lift,
    "cocycle": _run_cocycle,
    "balance": _run_balance,
    "finprob": _run_finprob,
    "inverse-demo": _run_inverse_demo,
    "morphisms": _run_morphisms,
}


def run(spec):
    """
    Runs one experiment and returns its report.

    The report is deterministic given (spec, seed) except for wall_time.

    Args:
        spec (ExperimentSpec): validated experiment

    Returns:
        dict: schema_version, tool_version, spec echo, results, settings, wall_time
    """
    params = spec.resolved_params()
    log(f">>> Running '{spec.command}' (seed={spec.seed}, budget={spec.budget})")
    start = time.time()
    results = HANDLERS[spec.command](spec, params)
    wall_time = time.time() - start
    log(f"✓ '{spec.command}' finished in {wall_time:.2f}s")
    return {
        "schema_version": config.SCHEMA_VERSION,
        "tool_version": config.TOOL_VERSION,
        "spec": spec.model_dump(),
        "parameters": params,
        "settings": {
            "norm_tolerance": config.NORM_TOLERANCE,
            "clamp_tolerance": config.CLAMP_TOLERANCE,
            "poly_window": config.POLY_WINDOW,
            "poly_samples": config.POLY_SAMPLES,
            "seed": spec.seed,
        },
        "results": results,
        "wall_time": wall_time,
    }
