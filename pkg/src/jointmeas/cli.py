"""Command-line orchestration.

Subcommands:

* ``verify``   - run the exhaustive self-verification suites.
* ``estimate`` - build a setting family for a Hamiltonian file, choose
  coefficients, run Monte Carlo estimation on the requested state source, and
  report estimates plus analytic and empirical variances and shot budgets.
* ``table``    - per-molecule analytic variances under uniform and optimized
  coefficients, as aligned text or CSV.

All randomness flows from --seed; reports carry no timestamps, so identical
configurations produce byte-identical output.  JM_THREADS caps shot-batch
parallelism (it never affects results).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import dense, hamio, verify
from .estimation import (
    StatevectorExpectationOracle,
    VisibilityCache,
    analytic_variance,
    optimize_coefficients,
    sample_complexity,
    uniform_coefficients,
)
from .gaussian import random_gaussian_state, init_fock
from .kernels import IMPLEMENTATION
from .majorana import ModeCount
from .sampling import estimate_hamiltonian
from .schemes import build_family

SCHEMES = ("pairs2", "quad7", "rand9", "physical4")
VERIFY_MAX_N = 4


def _write_output(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _term_key(a) -> str:
    return ",".join(str(i) for i in a)


def cmd_verify(args: argparse.Namespace) -> int:
    if args.max_n > VERIFY_MAX_N:
        sys.stderr.write(f"refused: protocol enumeration is capped at N={VERIFY_MAX_N}\n")
        return 2
    selected = args.checks or [key for key, _ in verify.ALL_CHECKS]
    known = dict(verify.ALL_CHECKS)
    unknown = [name for name in selected if name not in known]
    if unknown:
        sys.stderr.write(f"unknown checks {unknown}; available: {list(known)}\n")
        return 2
    results = []
    for name in selected:
        if name == "outcome-dist":
            results.append(verify.check_outcome_distribution(n_values=tuple(n for n in (2, 3, 4) if n <= args.max_n)))
        else:
            results.append(known[name]())
    report = {
        "command": "verify",
        "kernel": IMPLEMENTATION,
        "checks": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
    }
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    _write_output(text, args.out)
    for r in results:
        sys.stderr.write(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.1f}s)\n")
    return 0 if report["passed"] else 1


def _load_state(args, h, n_physical: int):
    if args.state == "ground":
        energy, psi = dense.ground_state(h)
        return psi, energy
    if args.state == "gaussian":
        rng = np.random.default_rng(args.seed).spawn(1)[0]
        state = random_gaussian_state(ModeCount(n_physical // 2), rng)
        return state, None
    if args.state == "fock":
        occ = [0] * (n_physical // 2)
        return init_fock(occ), None
    raise ValueError(f"unknown state source {args.state!r}")


def cmd_estimate(args: argparse.Namespace) -> int:
    hamfile = hamio.parse(args.hamiltonian)
    h = hamfile.spec
    family = build_family(args.scheme, h.n.n_majorana, block_family=args.blocks, seed=args.seed)
    terms = h.nonzero_terms()
    cache = VisibilityCache.build(family, terms)
    uncovered = [a for a in terms if not cache.rounds_of(a)]
    if uncovered:
        sys.stderr.write(f"error: {len(uncovered)} terms uncovered by {args.scheme}, e.g. {uncovered[0]}\n")
        return 2

    state, truth = _load_state(args, h, h.n.n_majorana)
    if isinstance(state, np.ndarray):
        oracle = StatevectorExpectationOracle(state, h.n.n_majorana, family.n_modes)
    else:
        from .estimation import GaussianExpectationOracle
        from .gaussian import extend_with_vacuum

        grid_state = extend_with_vacuum(state, (family.n_modes - family.n_physical) // 2)
        oracle = GaussianExpectationOracle(grid_state)
        truth = h.constant + sum(h.terms[a] * oracle(a) for a in terms)

    if args.coeffs == "opt":
        table = optimize_coefficients(h, family, cache, oracle)
    else:
        table = uniform_coefficients(h, family, cache)
    var_analytic = analytic_variance(h, family, cache, table, oracle)

    rng = np.random.default_rng(args.seed)
    result = estimate_hamiltonian(state, family, h, cache, table, args.shots, rng)

    eta_best = min(max(cache.eta.get((r, a), 0.0) for r in range(1, family.n_settings + 1)) for a in terms)
    budget = sample_complexity(eta_best, args.epsilon, args.delta, len(terms))
    report = {
        "command": "estimate",
        "kernel": IMPLEMENTATION,
        "config": {
            "hamiltonian": str(args.hamiltonian),
            "scheme": args.scheme,
            "blocks": args.blocks,
            "coeffs": args.coeffs,
            "shots": args.shots,
            "seed": args.seed,
            "state": args.state,
            "epsilon": args.epsilon,
            "delta": args.delta,
        },
        "hamiltonian": {
            "n_modes": h.n.n_fermionic,
            "n_terms": len(terms),
            "constant": h.constant,
            "reference_energy": hamfile.reference_energy,
            "chemistry_structured": h.is_chemistry,
        },
        "family": {
            "kind": family.kind,
            "grid_modes": family.n_modes,
            "aux_modes": list(family.aux_modes),
            "settings": family.n_settings,
        },
        "truth": {"energy": truth},
        "estimate": {
            "mean": result.mean,
            "std_error": result.std_error_of_mean,
            "shots": result.shots,
            "rounds_per_shot": result.rounds_per_shot,
        },
        "variance": {
            "analytic": var_analytic,
            "empirical": result.variance,
            "empirical_std_error": result.variance_std_error,
        },
        "shot_budget": {
            "epsilon": args.epsilon,
            "delta": args.delta,
            "worst_round_visibility": eta_best,
            "shots_for_all_terms": budget,
        },
        "visibilities": {
            _term_key(a): {
                str(r): cache.eta[(r, a)]
                for r in range(1, family.n_settings + 1)
                if (r, a) in cache.eta
            }
            for a in terms
        },
        "coefficients": {
            _term_key(a): {
                str(r): table.get(r, a)
                for r in range(1, family.n_settings + 1)
                if table.get(r, a) != 0.0
            }
            for a in terms
        },
        "coefficient_notes": list(table.notes),
    }
    _write_output(json.dumps(report, indent=2, sort_keys=True, default=float), args.out)
    return 0


def cmd_table(args: argparse.Namespace) -> int:
    if not args.hamiltonian:
        sys.stderr.write("error: need at least one --hamiltonian file\n")
        return 2
    rows = []
    for path in args.hamiltonian:
        hamfile = hamio.parse(path)
        h = hamfile.spec
        family = build_family(args.scheme, h.n.n_majorana, block_family=args.blocks, seed=args.seed)
        cache = VisibilityCache.build(family, h.nonzero_terms())
        energy, psi = dense.ground_state(h)
        oracle = StatevectorExpectationOracle(psi, h.n.n_majorana, family.n_modes)
        tab_u = uniform_coefficients(h, family, cache)
        var_u = analytic_variance(h, family, cache, tab_u, oracle)
        tab_o = optimize_coefficients(h, family, cache, oracle)
        var_o = analytic_variance(h, family, cache, tab_o, oracle)
        name = (hamfile.metadata or {}).get("molecule", Path(str(path)).stem)
        basis = (hamfile.metadata or {}).get("basis", "")
        rows.append(
            {
                "molecule": name,
                "basis": basis,
                "qubits": h.n.n_fermionic,
                "ground_energy": energy,
                "variance_uniform": var_u,
                "variance_optimized": var_o,
            }
        )
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    elif args.format == "json":
        text = json.dumps({"command": "table", "rows": rows}, indent=2, sort_keys=True, default=float)
    else:
        header = f"{'molecule':<10}{'basis':<9}{'qubits':>7}{'energy [Ha]':>14}{'uniform [Ha^2]':>16}{'optimized [Ha^2]':>18}"
        lines = [header, "-" * len(header)]
        for row in rows:
            lines.append(
                f"{row['molecule']:<10}{row['basis']:<9}{row['qubits']:>7}"
                f"{row['ground_energy']:>14.6f}{row['variance_uniform']:>16.3f}{row['variance_optimized']:>18.3f}"
            )
        text = "\n".join(lines) + "\n"
    _write_output(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointmeas",
        description="Joint-measurement toolkit for fermionic observables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the exhaustive self-verification suites")
    p_verify.add_argument("--checks", nargs="*", help="subset of checks to run")
    p_verify.add_argument("--max-n", type=int, default=3, help="largest N for protocol enumeration")
    p_verify.add_argument("--out", help="write the JSON report here")
    p_verify.set_defaults(func=cmd_verify)

    p_est = sub.add_parser("estimate", help="Monte Carlo estimation for a Hamiltonian file")
    p_est.add_argument("--hamiltonian", required=True, help="Hamiltonian JSON file")
    p_est.add_argument("--scheme", choices=SCHEMES, default="physical4")
    p_est.add_argument("--shots", type=int, default=10000)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--coeffs", choices=("uniform", "opt"), default="uniform")
    p_est.add_argument("--blocks", choices=("hadamard", "aij", "auto"), default="auto")
    p_est.add_argument("--state", choices=("ground", "gaussian", "fock"), default="ground")
    p_est.add_argument("--epsilon", type=float, default=0.1)
    p_est.add_argument("--delta", type=float, default=0.01)
    p_est.add_argument("--out", help="write the JSON report here")
    p_est.set_defaults(func=cmd_estimate)

    p_table = sub.add_parser("table", help="benchmark variances for molecule files")
    p_table.add_argument("--hamiltonian", action="append", help="Hamiltonian JSON file (repeatable)")
    p_table.add_argument("--scheme", choices=SCHEMES, default="physical4")
    p_table.add_argument("--blocks", choices=("hadamard", "aij", "auto"), default="auto")
    p_table.add_argument("--seed", type=int, default=0)
    p_table.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p_table.add_argument("--out", help="write the table here")
    p_table.set_defaults(func=cmd_table)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
