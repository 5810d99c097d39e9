import sys
import argparse

from pydantic import ValidationError

from src.config import AVAILABLE_COMMANDS, ENUMERATION_BUDGET, N_JOBS, TOOL_VERSION
from src.data_processing import load_config_file, log, save_report
from src.experiments import ExperimentSpec, run

# Flags that configure the run itself rather than the command's parameters
SPEC_FIELDS = ("seed", "budget", "out", "format", "strict", "jobs")

PARAM_FLAGS = (
    "group", "signal", "d", "method", "filtration", "poly", "F", "period", "lipschitz",
    "nilseq", "grid", "samples", "k", "phi", "target", "mode", "lemma", "instances",
    "p", "length", "family_size", "source", "degree", "window_factor", "n_dim", "modulated",
)


def build_parser():
    parser = argparse.ArgumentParser(
        description='Computational lab for Gowers norms, nilsequences, cocycles and balance',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # U^2 norm of the constant function on Z_5
  python main.py gowers --group Z5 --signal const:1 --d 2

  # Evaluate a Heisenberg nilsequence on Z_31
  python main.py nilseq --filtration heis:lcs --poly '[["0","0","0"],["1/31","3/31","-45/961"],["0","0","2/31"]]' --period 31

  # Cocycle axioms for the coboundary of x -> x/5 on Z_5, degree 1
  python main.py cocycle check --group Z5 --k 1 --phi linear:a=1 --mode enumerate --seed 42

  # Quasimorphism defect over a delta grid
  python main.py cocycle defect --group Z7 --k 1 --phi random:seed=3 --grid 0.5,0.1 --seed 1

  # Balance sweep of x -> x/101
  python main.py balance --phi linear:a=1 --p 101 --grid 1,0.5,0.34 --seed 42 --out results/balance.csv --format csv

  # Finite-probability lemma suite
  python main.py finprob --lemma B2 --instances 1000 --seed 42

  # Inverse-theorem demo and coprime morphism count
  python main.py inverse-demo --p 31 --seed 42
  python main.py morphisms --source Z3 --target Z2 --degree 2
        """
    )

    parser.add_argument('command', choices=AVAILABLE_COMMANDS, help='Experiment to run')
    parser.add_argument('action', nargs='?', default=None,
                        help='Sub-action of cocycle: check, d1 or defect (default: check)')

    group = parser.add_argument_group('objects')
    group.add_argument('--group', type=str, help='Finite abelian group, e.g. Z5 or Z2xZ4')
    group.add_argument('--signal', type=str, help="Signal: const:1, char:a=2, quadphase:a=1, random:seed=3 or a CSV file")
    group.add_argument('--d', type=int, help='Gowers norm degree')
    group.add_argument('--method', type=str, choices=['naive', 'recursive', 'fourier'], help='Norm evaluator')
    group.add_argument('--filtration', type=str, help='abelian:m=2,deg=3 or heis:lcs')
    group.add_argument('--poly', type=str, help='Taylor coefficients as JSON (lists of "p/q" strings)')
    group.add_argument('--F', type=str, help="Output function, e.g. 'e(x)' or 'tent(t1)'")
    group.add_argument('--period', type=int, help='Period N of the nilsequence')
    group.add_argument('--lipschitz', type=float, help='Declared Lipschitz constant of F')
    group.add_argument('--nilseq', type=str, help='Nilsequence JSON (file path or inline)')
    group.add_argument('--k', type=int, help='Cocycle degree')
    group.add_argument('--phi', type=str, help='Map spec: linear:a=1, quadratic:a=1, const:c=0, random:seed=3, heis')
    group.add_argument('--target', type=str, help='Cocycle target (circle, Z<m>) or morphism target group')
    group.add_argument('--source', type=str, help='Morphism source group')
    group.add_argument('--degree', type=int, help='Target cube degree for morphisms')
    group.add_argument('--p', type=int, help='Cyclic group order')
    group.add_argument('--lemma', type=str, choices=['B1', 'B2', 'B3'], help='Finite-probability lemma')

    sampling = parser.add_argument_group('sampling and grids')
    sampling.add_argument('--grid', type=str, help='Comma-separated grid (deltas or b values)')
    sampling.add_argument('--samples', type=int, help='Sample count')
    sampling.add_argument('--instances', type=int, help='Instances per lemma suite')
    sampling.add_argument('--mode', type=str, choices=['enumerate', 'sample', 'exact'], help='Enumeration mode')
    sampling.add_argument('--length', type=int, help='Number of nilsequence terms to print')
    sampling.add_argument('--family-size', dest='family_size', type=int, help='Test-function family size R')
    sampling.add_argument('--window-factor', dest='window_factor', type=int, help='Lift verification window, in periods')
    sampling.add_argument('--n-dim', dest='n_dim', type=int, help='Cube dimension for the morphism check')
    sampling.add_argument('--modulated', action='store_const', const=True, default=None,
                          help='inverse-demo: correlate against a modulated signal')

    run_opts = parser.add_argument_group('run')
    run_opts.add_argument('--seed', type=int, help='Master random seed (mandatory for sampled commands)')
    run_opts.add_argument('--budget', type=int, help=f'Enumeration budget (default: {ENUMERATION_BUDGET})')
    run_opts.add_argument('--out', type=str, help='Output path (default: stdout)')
    run_opts.add_argument('--format', type=str, choices=['json', 'csv'], help='Report format (default: json)')
    run_opts.add_argument('--strict', action='store_const', const=True, default=None,
                          help='Turn warnings (e.g. period mismatch) into errors')
    run_opts.add_argument('--config', type=str, help='key=value config file; flags override it')
    run_opts.add_argument('--jobs', type=int, help=f'Worker processes (default: {N_JOBS}, -1 for all cores)')
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    return parser


def build_spec(args):
    """Merges the config file (if any) with explicit flags into an ExperimentSpec."""
    values = load_config_file(args.config) if args.config else {}
    for name in SPEC_FIELDS + PARAM_FLAGS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    if args.action is not None:
        values["action"] = args.action

    spec_fields = {key: values.pop(key) for key in SPEC_FIELDS if key in values}
    if "jobs" in spec_fields:
        spec_fields["n_jobs"] = spec_fields.pop("jobs")
    if isinstance(spec_fields.get("strict"), str):
        spec_fields["strict"] = spec_fields["strict"].strip().lower() in ("1", "true", "yes", "on")
    return ExperimentSpec(command=args.command, params=values, **spec_fields)


def main(argv=None):
    args = build_parser().parse_args(argv)

    log("=" * 80)
    log("  HIGHER-ORDER FOURIER LAB")
    log("=" * 80)
    log(f"  Command: {args.command}" + (f" {args.action}" if args.action else ""))
    log("=" * 80 + "\n")

    # 1. Spec validation
    try:
        log("STEP 1: SPEC VALIDATION")
        log("-" * 80)
        spec = build_spec(args)
        log("✓ Spec is valid\n")
    except ValidationError as e:
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "spec"
            log(f"✗ Invalid spec at {location}: {error['msg']}")
        sys.exit(1)
    except Exception as e:
        log(f"✗ Error reading spec: {e}")
        sys.exit(1)

    # 2. Run
    try:
        log("STEP 2: RUN")
        log("-" * 80)
        report = run(spec)
        log("✓ Run completed\n")
    except Exception as e:
        log(f"✗ Error in {spec.command}: {e}")
        sys.exit(1)

    # 3. Report
    try:
        log("STEP 3: REPORT")
        log("-" * 80)
        text = save_report(report, spec.out, spec.format)
        if not spec.out:
            sys.stdout.write(text)
        log("✓ Report written\n")
    except Exception as e:
        log(f"✗ Error writing report: {e}")
        sys.exit(1)

    log("=" * 80)
    log(f"  DONE in {report['wall_time']:.2f}s")
    log("=" * 80)


if __name__ == "__main__":
    main()
