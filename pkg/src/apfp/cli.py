"""Command line interface.

Subcommands: det-path, factor, membership, check, demo, bench.  Reports
are JSON (or flattened CSV) with a deterministic "results" section and a
"provenance" section carrying seed, config echo and timings.  Exit codes:
0 success, 2 parse/input error, 3 numeric failure, 4 not in closure,
5 optimizer non-convergence, 6 density rank too high, 7 demo failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .algebra import (
    AlgebraDescriptor,
    Element,
    is_positive,
    op_norm,
    quotient_norm,
    universal_trace,
)
from .checker import check_abstract, check_conditions, pairing_consistency
from .determinant import (
    ExpLine,
    QuadratureConfig,
    delta_1_0,
    evaluate,
    lattice_distance,
    lattice_reduce,
    path_determinant,
)
from .errors import (
    APFPError,
    BranchCut,
    InconsistentFlags,
    NoConvergence,
    NotALoop,
    NotInClosure,
    NotUnitaryPath,
    RankTooHighForDensity,
    SelfCheckFailed,
    SingularInput,
    SingularValueOnPath,
)
from .factorization import (
    OptimizerConfig,
    best_approx_distance,
    commutator_factor_su,
    factor_positive_products,
    membership_test,
    polar_path,
    split_into_exponentials,
)
from .sampling import random_member, random_self_adjoint, random_special_unitary, rng_from

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_NOT_IN_CLOSURE = 4
EXIT_NO_CONVERGENCE = 5
EXIT_RANK_TOO_HIGH = 6
EXIT_DEMO_FAILURE = 7

NUMERIC_ERRORS = (
    NoConvergence,
    SingularValueOnPath,
    SingularInput,
    BranchCut,
    SelfCheckFailed,
    NotALoop,
    NotUnitaryPath,
)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_format: str = "json"

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


class _DemoFailure(Exception):
    pass


def _build_parser():
    # global flags live on a parent parser so they parse in either
    # position: `apfp --seed 1 factor f.json` or `apfp factor f.json --seed 1`;
    # SUPPRESS keeps a later subparser from clobbering an earlier value
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quad-steps", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quad-tol", type=float, default=argparse.SUPPRESS)
    common.add_argument("--quad-max-steps", type=int, default=argparse.SUPPRESS)
    common.add_argument("--restarts", type=int, default=argparse.SUPPRESS)
    common.add_argument("--max-iterations", type=int, default=argparse.SUPPRESS)
    common.add_argument("--gradient-tolerance", type=float, default=argparse.SUPPRESS)
    common.add_argument("--target-residual", type=float, default=argparse.SUPPRESS)
    common.add_argument("--output", choices=("json", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--out", metavar="FILE", default=argparse.SUPPRESS)
    common.add_argument(
        "--tol",
        action="append",
        default=argparse.SUPPRESS,
        metavar="NAME=VALUE",
        help="named tolerance override, repeatable",
    )

    p = argparse.ArgumentParser(
        prog="apfp",
        parents=[common],
        description="Numerical laboratory for approximate positive factorization in block matrix algebras.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("det-path", parents=[common], help="determinant of a path of invertibles")
    d.add_argument("path_file")

    f = sub.add_parser("factor", parents=[common], help="factor an invertible into positive elements")
    f.add_argument("element_file")
    f.add_argument("--factors", type=int, default=5, metavar="M")

    m = sub.add_parser("membership", parents=[common], help="decide membership in the closure of P(A)")
    m.add_argument("element_file")
    m.add_argument("--membership-tol", type=float, default=1e-8)

    c = sub.add_parser("check", parents=[common], help="evaluate the four characterization conditions")
    c.add_argument("descriptor_file")

    dm = sub.add_parser("demo", parents=[common], help="run a bundled end-to-end scenario")
    dm.add_argument("--name", required=True, choices=sorted(DEMOS))

    sub.add_parser("bench", parents=[common], help="time the core operations on seeded inputs")
    return p


def _config_from_args(args) -> RunConfig:
    get = lambda name, default: getattr(args, name, default)
    tols = {}
    for entry in get("tol", []):
        if "=" not in entry:
            raise ValueError(f"bad --tol {entry!r}, expected NAME=VALUE")
        name, val = entry.split("=", 1)
        tols[name.strip()] = float(val)
    seed = get("seed", 0)
    return RunConfig(
        seed=seed,
        tolerances=tols,
        quadrature=QuadratureConfig(
            steps=get("quad_steps", 256),
            tol=get("quad_tol", 1e-9),
            max_steps=get("quad_max_steps", 2 ** 20),
        ),
        optimizer=OptimizerConfig(
            restarts=get("restarts", 16),
            max_iterations=get("max_iterations", 2000),
            gradient_tolerance=get("gradient_tolerance", 1e-10),
            target_residual=get("target_residual", 1e-6),
            seed=seed,
        ),
        output_format=get("output", "json"),
    )


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise _ParseError(str(exc)) from exc


class _ParseError(Exception):
    pass


# ---------------------------------------------------------------------------
# subcommands


def _cmd_det_path(args, config: RunConfig):
    obj = _read_json(args.path_file)
    try:
        path = serialize.path_from_obj(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise _ParseError(f"bad path file: {exc}") from exc
    det = path_determinant(path, config.quadrature)
    reduced = lattice_reduce(det)
    t1, t2 = path.domain
    ident = path.algebra.identity()
    endpoints_identity = all(
        op_norm(evaluate(path, t) - ident) <= config.tol("loop_endpoint", 1e-8)
        for t in (t1, t2)
    )
    ts = np.linspace(t1, t2, 9)
    vals = [evaluate(path, float(t)) for t in ts]
    unitary = all(
        max(np.linalg.norm(b.conj().T @ b - np.eye(len(b)), 2) for b in v.blocks) <= 1e-8
        for v in vals
    )
    positive = all(is_positive(v, 1e-8 * max(1.0, op_norm(v))) for v in vals)
    results = {
        "determinant": serialize.trace_value_to_obj(det),
        "canonical_representative": serialize.trace_value_to_obj(reduced.representative),
        "lattice_rank": reduced.lattice_rank,
        "lattice_distance": lattice_distance(det),
        "is_loop": bool(endpoints_identity),
        "is_unitary": bool(unitary),
        "is_positive": bool(positive),
    }
    if endpoints_identity and unitary:
        f = delta_1_0(path, config.quadrature)
        results["delta_1_0"] = {
            "values": [float(v) for v in f.values],
            "imag_residual": max(abs(c.real) / (2 * np.pi) for c in det.coords),
        }
    return results, EXIT_OK


def _cmd_factor(args, config: RunConfig):
    x = _load_element(args.element_file)
    member = membership_test(x, config.tol("membership", 1e-8))
    results = {
        "member": member.member,
        "det_phases": list(member.det_phases),
        "factors_requested": args.factors,
    }
    if not member:
        probe = best_approx_distance(x, args.factors, config.optimizer)
        results["distance_probe"] = probe
        return results, EXIT_NOT_IN_CLOSURE
    try:
        fac = factor_positive_products(x, args.factors, config.optimizer)
    except NoConvergence as exc:
        results["best_residual"] = float(exc.best_residual)
        return results, EXIT_NO_CONVERGENCE
    results["factorization"] = serialize.factorization_to_obj(fac)
    return results, EXIT_OK


def _load_element(path) -> Element:
    obj = _read_json(path)
    try:
        return serialize.element_from_obj(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise _ParseError(f"bad element file: {exc}") from exc


def _cmd_membership(args, config: RunConfig):
    x = _load_element(args.element_file)
    member = membership_test(x, args.membership_tol)
    results = {
        "member": member.member,
        "det_phases": list(member.det_phases),
        "tol": member.tol,
    }
    return results, EXIT_OK


def _cmd_check(args, config: RunConfig):
    obj = _read_json(args.descriptor_file)
    if "block_sizes" in obj:
        try:
            alg = AlgebraDescriptor(tuple(obj["block_sizes"]))
        except (TypeError, ValueError) as exc:
            raise _ParseError(f"bad descriptor: {exc}") from exc
        report = check_conditions(alg, seed=config.seed)
    elif "rank" in obj:
        try:
            desc = serialize.abstract_descriptor_from_obj(obj)
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise _ParseError(f"bad descriptor: {exc}") from exc
        report = check_abstract(desc)
    else:
        raise _ParseError("descriptor needs block_sizes or rank")
    return serialize.condition_report_to_obj(report), EXIT_OK


# ---------------------------------------------------------------------------
# demos: end-to-end scenarios with their invariants asserted


def _demo_polar_path(config: RunConfig):
    alg = AlgebraDescriptor((2, 3))
    rng = rng_from((config.seed, 101))
    c = random_self_adjoint(alg, rng, norm=1.3)
    d = random_self_adjoint(alg, rng, norm=1.1)
    det = path_determinant(polar_path(c, d), config.quadrature)
    worst = max(abs(v) for v in det.coords)
    if worst > 1e-7:
        raise _DemoFailure(f"polar path determinant {worst:.3e} exceeds 1e-7")
    return {
        "algebra": list(alg.block_sizes),
        "determinant": serialize.trace_value_to_obj(det),
        "max_coordinate": worst,
    }


def _demo_splitting(config: RunConfig):
    alg = AlgebraDescriptor((2, 3))
    rng = rng_from((config.seed, 202))
    c = random_self_adjoint(alg, rng, norm=1.4)
    d = random_self_adjoint(alg, rng, norm=0.9)
    path = polar_path(c, d)
    split = split_into_exponentials(path)
    qn = quotient_norm(split.trace_sum())
    recon = op_norm(split.reconstruct() - split.endpoint)
    if qn > 1e-7:
        raise _DemoFailure(f"trace sum quotient norm {qn:.3e} exceeds 1e-7")
    if recon > 1e-8:
        raise _DemoFailure(f"endpoint reconstruction error {recon:.3e} exceeds 1e-8")
    return {
        "segments": len(split.logs),
        "trace_sum_quotient_norm": qn,
        "endpoint_reconstruction_error": recon,
    }


def _demo_commutator(config: RunConfig):
    alg = AlgebraDescriptor((4,))
    rng = rng_from((config.seed, 303))
    u = random_special_unitary(alg, rng)
    v, w = commutator_factor_su(u)
    err = op_norm(
        Element(
            alg,
            tuple(
                vb @ wb @ vb.conj().T @ wb.conj().T - ub
                for vb, wb, ub in zip(v.blocks, w.blocks, u.blocks)
            ),
        )
    )
    if err > 1e-8:
        raise _DemoFailure(f"commutator reconstruction error {err:.3e} exceeds 1e-8")
    return {"block_size": 4, "reconstruction_error": err}


def _demo_loop_lattice(config: RunConfig):
    alg = AlgebraDescriptor((2,))
    gen = np.zeros((2, 2), dtype=complex)
    gen[0, 0] = 2j * np.pi
    loop = ExpLine(Element(alg, (gen,)))
    det = path_determinant(loop, config.quadrature)
    dist = lattice_distance(det)
    if dist > 1e-6:
        raise _DemoFailure(f"loop determinant misses the lattice by {dist:.3e}")
    pc = pairing_consistency(alg, loop, config.quadrature)
    if not pc:
        raise _DemoFailure("loop invariant misses the pairing range")
    return {
        "determinant": serialize.trace_value_to_obj(det),
        "lattice_distance": dist,
        "nearest_vector": list(pc.nearest_vector),
        "pairing_distance": pc.distance,
    }


DEMOS = {
    "polar-path-determinant-zero": _demo_polar_path,
    "splitting-trace-zero": _demo_splitting,
    "commutator-witness": _demo_commutator,
    "loop-lattice": _demo_loop_lattice,
}


def _cmd_demo(args, config: RunConfig):
    try:
        results = DEMOS[args.name](config)
    except _DemoFailure as exc:
        return {"demo": args.name, "passed": False, "reason": str(exc)}, EXIT_DEMO_FAILURE
    return {"demo": args.name, "passed": True, **results}, EXIT_OK


def _cmd_bench(args, config: RunConfig):
    alg = AlgebraDescriptor((2, 3))
    rng = rng_from((config.seed, 404))
    timings = {}
    c = random_self_adjoint(alg, rng, norm=1.2)
    d = random_self_adjoint(alg, rng, norm=1.0)

    t0 = time.perf_counter()
    det = path_determinant(polar_path(c, d), config.quadrature)
    timings["polar_path_determinant"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    split = split_into_exponentials(polar_path(c, d))
    timings["exponential_splitting"] = time.perf_counter() - t0

    x = random_member(AlgebraDescriptor((2,)), rng)
    opt = OptimizerConfig(
        restarts=1,
        max_iterations=config.optimizer.max_iterations,
        gradient_tolerance=config.optimizer.gradient_tolerance,
        target_residual=config.optimizer.target_residual,
        seed=config.seed,
    )
    t0 = time.perf_counter()
    fac = factor_positive_products(x, 3, opt)
    timings["factor_m3_single_restart"] = time.perf_counter() - t0

    results = {
        "polar_path_det_max_coord": max(abs(v) for v in det.coords),
        "splitting_segments": len(split.logs),
        "factor_residual": fac.residual,
    }
    return results, EXIT_OK, timings


# ---------------------------------------------------------------------------
# driver


def _emit(report, config: RunConfig, out_file):
    if config.output_format == "csv":
        text = serialize.payload_to_csv(report["results"])
    else:
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_file:
        with open(out_file, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage already; normalize everything else
        return EXIT_PARSE if exc.code not in (0,) else 0
    started = time.time()
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE

    handlers = {
        "det-path": _cmd_det_path,
        "factor": _cmd_factor,
        "membership": _cmd_membership,
        "check": _cmd_check,
        "demo": _cmd_demo,
        "bench": _cmd_bench,
    }
    timings = None
    try:
        outcome = handlers[args.command](args, config)
        if len(outcome) == 3:
            results, code, timings = outcome
        else:
            results, code = outcome
    except _ParseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except InconsistentFlags as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except RankTooHighForDensity as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RANK_TOO_HIGH
    except NotInClosure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NOT_IN_CLOSURE
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    except APFPError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC

    report = {
        "results": results,
        "provenance": {
            "command": args.command,
            "seed": config.seed,
            "tolerances": config.tolerances,
            "quadrature": {
                "steps": config.quadrature.steps,
                "tol": config.quadrature.tol,
                "max_steps": config.quadrature.max_steps,
            },
            "optimizer": {
                "restarts": config.optimizer.restarts,
                "max_iterations": config.optimizer.max_iterations,
                "gradient_tolerance": config.optimizer.gradient_tolerance,
                "target_residual": config.optimizer.target_residual,
            },
            "elapsed_seconds": time.time() - started,
        },
    }
    if timings:
        report["provenance"]["timings"] = timings
    _emit(report, config, getattr(args, "out", None))
    return code


if __name__ == "__main__":
    sys.exit(main())
