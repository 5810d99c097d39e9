import json
import os
import sys
from fractions import Fraction

import numpy as np
import pandas as pd

from src.balance import HeisenbergTarget, TorusTarget
from src.cocycle import CircleTarget, CyclicTarget
from src.config import RESULTS_DIR
from src.filtered_groups import heisenberg_lcs, parse_filtration, PolySeq, poly_eval
from src.gowers import Signal
from src.group_cube import FiniteAbelianGroup
from src.nilmanifold import Nilsequence, OutputFunction, periodic_heisenberg_poly, reduce_mod_gamma


def log(message=""):
    """Console progress goes to stderr so stdout can carry the report."""
    print(message, file=sys.stderr)


def parse_params(text):
    """'a=1,b=2' -> {'a': '1', 'b': '2'}."""
    if not text:
        return {}
    params = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"Expected key=value in '{text}'")
        key, value = part.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def split_spec(text):
    kind, _, rest = text.partition(":")
    return kind.strip(), rest


def parse_grid(text):
    """Comma-separated numbers, e.g. '1,0.5,0.34'."""
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"Grid must be comma-separated numbers, got '{text}'")


def load_signal(path, group=None):
    """
    Loads a signal from CSV lines 'index,re,im' (header optional).

    Args:
        path (str): CSV file
        group (FiniteAbelianGroup): domain; defaults to Z_N with N the row count

    Returns:
        Signal
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Signal file {path} not found")
    df = pd.read_csv(path, header=None, names=["index", "re", "im"], comment="#")
    df = df.apply(pd.to_numeric, errors="coerce").dropna().reset_index(drop=True)
    if group is None:
        group = FiniteAbelianGroup([len(df)])
    if len(df) != group.order:
        raise ValueError(f"{path} has {len(df)} rows, group {group!r} has {group.order} elements")
    index = df["index"].astype(int).to_numpy()
    if sorted(index) != list(range(group.order)):
        raise ValueError(f"{path} must list every index 0..{group.order - 1} exactly once")
    values = np.zeros(group.order, dtype=complex)
    values[index] = df["re"].to_numpy() + 1j * df["im"].to_numpy()
    return Signal.from_grid(group, values.reshape(group.shape))


def save_signal(f, path):
    pd.DataFrame({
        "index": np.arange(f.group.order),
        "re": np.real(f.values),
        "im": np.imag(f.values),
    }).to_csv(path, index=False, header=False)


def parse_signal(text, group=None):
    """
    Builtin generators 'const:1', 'char:a=2', 'quadphase:a=1', 'random:seed=3',
    or a path to a CSV file.
    """
    kind, rest = split_spec(text)
    if kind in ("const", "char", "quadphase", "random") and group is None:
        raise ValueError(f"Signal '{text}' needs --group")
    if kind == "const":
        return Signal.constant(group, complex(rest or 1))
    if kind == "char":
        a = [int(v) for v in parse_params(rest).get("a", "1").split(";")]
        return Signal.character(group, a if len(a) > 1 else a[0])
    if kind == "quadphase":
        return Signal.quadratic_phase(group, int(parse_params(rest).get("a", 1)))
    if kind == "random":
        return Signal.random(group, int(parse_params(rest).get("seed", 0)))
    return load_signal(text, group)


def parse_cocycle_map(text, domain, target):
    """
    Maps X -> A for cocycle experiments: 'linear:a=1', 'quadratic:a=1',
    'const:c=0' or 'random:seed=3'. On the circle, x maps to a x / N.
    """
    kind, rest = split_spec(text)
    params = parse_params(rest)
    N = domain.order
    if domain.rank != 1:
        raise ValueError("Cocycle maps from spec strings need a cyclic domain")
    scale = Fraction(1, N) if isinstance(target, CircleTarget) else 1
    if kind == "linear":
        a = int(params.get("a", 1))
        return lambda x: a * x * scale
    if kind == "quadratic":
        a = int(params.get("a", 1))
        return lambda x: a * x * x * scale
    if kind == "const":
        c = Fraction(params.get("c", "0"))
        return lambda x: c
    if kind == "random":
        rng = np.random.default_rng(int(params.get("seed", 0)))
        if isinstance(target, CyclicTarget):
            table = [int(v) for v in rng.integers(0, target.m, size=N)]
        else:
            table = [float(v) for v in rng.uniform(0.0, 1.0, size=N)]
        return lambda x: table[x]
    raise ValueError(f"Invalid map spec '{text}' (expected linear, quadratic, const or random)")


def parse_balance_map(text, p, seed=0):
    """
    Morphisms Z_p -> Y for balance experiments, as (table, target):
    'linear:a=1' and 'const:c=0' into D_1(T), 'quadratic:a=1' into D_2(T),
    'heis' a seeded p-periodic Heisenberg orbit.
    """
    kind, rest = split_spec(text)
    params = parse_params(rest)
    x = np.arange(p)
    if kind == "linear":
        a = int(params.get("a", 1))
        return ((a * x) % p / p).reshape(p, 1), TorusTarget(1, 1)
    if kind == "quadratic":
        a = int(params.get("a", 1))
        return ((a * x * x) % p / p).reshape(p, 1), TorusTarget(1, 2)
    if kind == "const":
        c = float(Fraction(params.get("c", "0")))
        return np.full((p, 1), c % 1.0), TorusTarget(1, 1)
    if kind == "heis":
        g = periodic_heisenberg_poly(heisenberg_lcs(), p, int(params.get("seed", seed)))
        table = [reduce_mod_gamma(poly_eval(g, n), g.carrier)[0].as_floats() for n in range(p)]
        return np.asarray(table, dtype=float), HeisenbergTarget()
    raise ValueError(f"Invalid balance map spec '{text}' (expected linear, quadratic, const or heis)")


def load_nilsequence(params):
    """
    Nilsequence from a JSON file/inline JSON ('nilseq') or from the separate
    'filtration', 'poly', 'F', 'period' parameters.
    """
    source = params.get("nilseq")
    if source:
        if os.path.exists(source):
            with open(source) as fh:
                spec = json.load(fh)
        else:
            spec = json.loads(source)
        return Nilsequence.from_spec(spec)
    if not params.get("filtration") or not params.get("poly"):
        raise ValueError("A nilsequence needs --nilseq or both --filtration and --poly")
    filtration = parse_filtration(params["filtration"])
    coefficients = json.loads(params["poly"]) if isinstance(params["poly"], str) else params["poly"]
    poly = PolySeq.from_json(filtration, coefficients)
    period = params.get("period")
    return Nilsequence(
        poly,
        OutputFunction(params.get("F") or "1", filtration.carrier),
        int(period) if period is not None else None,
        float(params["lipschitz"]) if params.get("lipschitz") is not None else None,
    )


def load_config_file(path):
    """Plain 'key=value' lines; blank lines and '#' comments are ignored."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file {path} not found")
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got '{line}'")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _default(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def report_to_json(report):
    return json.dumps(report, sort_keys=True, indent=2, default=_default)


def report_rows(report):
    """The tabular part of a report, as a DataFrame."""
    results = report.get("results", {})
    rows = results.get("rows") if isinstance(results, dict) else None
    if rows is None:
        rows = [results] if isinstance(results, dict) else list(results)
    return pd.json_normalize(json.loads(json.dumps(rows, default=_default)))


def save_report(report, path=None, fmt="json"):
    """
    Writes a report as JSON (sorted keys) or CSV (its rows).

    Returns:
        str: the serialized report
    """
    if fmt == "json":
        text = report_to_json(report) + "\n"
    elif fmt == "csv":
        text = report_rows(report).to_csv(index=False)
    else:
        raise ValueError(f"Unknown format '{fmt}' (expected json or csv)")
    if path:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory or RESULTS_DIR, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
        log(f"Report saved to {path}")
    return text
