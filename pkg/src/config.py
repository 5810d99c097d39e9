import os

# Paths
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
RESULTS_DIR = os.path.join(ROOT_DIR, "results")

TOOL_VERSION = "1.0.0"
SCHEMA_VERSION = 1

# Enumeration
ENUMERATION_BUDGET = 10_000_000

# Numerical tolerances
NORM_TOLERANCE = 1e-9
CLAMP_TOLERANCE = 1e-12

# Polynomiality checks
POLY_WINDOW = 12
POLY_SAMPLES = 200
MAX_CUBE_DIM = 4

# Sampling
DEFECT_SAMPLES = 10_000
MORPHISM_SAMPLES = 50
BALANCE_SAMPLES = 10_000
BALANCE_FAMILY_SIZE = 8
BALANCE_BOOTSTRAP = 20
EXACT_BALANCE_MAX_P = 13
EXACT_BALANCE_MAX_N = 2

RANDOM_STATE = 42
N_JOBS = 1

AVAILABLE_COMMANDS = [
    "gowers",
    "nilseq",
    "correlate",
    "lift",
    "cocycle",
    "balance",
    "finprob",
    "inverse-demo",
    "morphisms",
]

# Commands whose result depends on random sampling (seed mandatory)
SAMPLED_COMMANDS = ["cocycle", "balance", "finprob", "lift", "inverse-demo"]


def get_defaults_for_command(command):
    """
    Returns the default parameters for a CLI command.

    Flags given on the command line or in a config file override these.

    Args:
        command (str): One of AVAILABLE_COMMANDS

    Returns:
        dict: Parameter name -> default value

    Example:
        >>> get_defaults_for_command("gowers")["d"]
        2
    """
    if command not in AVAILABLE_COMMANDS:
        raise ValueError(f"Command '{command}' not in available commands: {AVAILABLE_COMMANDS}")

    common = {
        "budget": ENUMERATION_BUDGET,
        "format": "json",
        "strict": False,
    }

    per_command = {
        "gowers": {"group": "Z5", "signal": "const:1", "d": 2, "method": "recursive"},
        "nilseq": {"length": None},
        "correlate": {"group": None, "signal": None},
        "lift": {"window_factor": 2, "n_dim": 2, "samples": MORPHISM_SAMPLES},
        "cocycle": {
            "group": "Z5",
            "k": 1,
            "action": "check",
            "mode": "enumerate",
            "phi": "linear:a=1",
            "target": "circle",
            "grid": "0.5,0.1,0.01",
            "samples": DEFECT_SAMPLES,
        },
        "balance": {
            "phi": "linear:a=1",
            "p": 101,
            "grid": "1,0.5,0.34",
            "samples": BALANCE_SAMPLES,
            "family_size": BALANCE_FAMILY_SIZE,
            "mode": "sample",
        },
        "finprob": {"lemma": "B1", "instances": 1000},
        "inverse-demo": {"p": 31, "modulated": False},
        "morphisms": {"source": "Z3", "target": "Z2", "degree": 2},
    }

    defaults = dict(common)
    defaults.update(per_command[command])
    return defaults
