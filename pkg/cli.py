#!/usr/bin/env python3
"""
Moderate Deviations Lab - command-line entry point.

Every command reads an optional JSON run file (--config), applies flag
overrides, and writes one JSON object or a CSV table to stdout or --output.
Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

import argparse
import json
import logging
import math
import re
import sys

import numpy as np
import pandas as pd

from asymptotics import (cameron_martin_check, finite_rho_ball_integral, gaussian_set_probability,
                         spectral_sweep, theorem1_upper, theorem5_value)
from config import load_run_config, setup_logging
from convex_bodies import Ball, check_slice_domination, validate_conditions
from dominating import solve
from engine import CSV_COLUMNS
from errors import ConfigError, InvalidSet, ModdevError
from montecarlo import attach_variance_ratio, estimate_naive, estimate_tilted, ratio_experiment
from representation import jn_estimate, repr_exact
from tilting import make_tilt

ASYMPTOTIC_TARGETS = ("t1-upper", "t4-gauss", "t5-ball", "cm-check", "t5-finite")
FLOAT_TAG = "\x00f17:"
TAGGED_FLOAT = re.compile(r'"\\u0000f17:([-+.0-9eE]+)"')


def _jsonable(value):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _tag_floats(value):
    if isinstance(value, dict):
        return {k: _tag_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_tag_floats(v) for v in value]
    if isinstance(value, float):
        text = format(value, ".17g")
        if "." not in text and "e" not in text:
            text += ".0"
        return FLOAT_TAG + text
    return value


def to_json(result):
    """JSON text with every finite float written to 17 significant digits, matching the CSV output."""
    text = json.dumps(_tag_floats(_jsonable(result)), indent=2)
    return TAGGED_FLOAT.sub(r"\1", text) + "\n"


def _schedule_arg(config):
    return config.b_n if config.b_n is not None else config.schedule


def _require_n(config):
    if config.n is None:
        raise ConfigError("n is required")
    return config.n


def _require_ball(config):
    body = config.require_body()
    if not isinstance(body, Ball):
        raise InvalidSet("this computation is defined for balls only")
    return body


def _rho(config):
    if config.rho is not None:
        return config.rho
    n = _require_n(config)
    return config.normaliser(n) / math.sqrt(n)


def _dominating_point(config):
    body = config.require_body()
    report = validate_conditions(body, config.model)
    if not report.passed:
        raise InvalidSet("body fails the standing conditions", failures=report.failures())
    return solve(config.model, body)


def cmd_dominate(config):
    """Dominating point, rate and supporting functional of the configured body."""
    dp = _dominating_point(config)
    return dp.to_dict()


def cmd_estimate(config):
    """Naive and/or tilted estimates of P(S_n in b_n D)."""
    n = _require_n(config)
    seed = config.require_seed()
    body = config.require_body()
    schedule = _schedule_arg(config)
    options = dict(threads=config.threads, block_size=config.block_size)

    reports = []
    if config.method in ("naive", "both"):
        reports.append(estimate_naive(config.base, n, schedule, body, config.samples or 0, seed, **options))
    if config.method in ("tilted", "both"):
        dp = _dominating_point(config)
        reports.append(estimate_tilted(config.base, n, schedule, body, dp, config.samples or 0, seed,
                                       stream=1, **options))
    if len(reports) == 2:
        reports = list(attach_variance_ratio(*reports))

    if config.format == "csv":
        return pd.DataFrame([r.csv_row() for r in reports], columns=CSV_COLUMNS)
    return {"n": n, "b_n": config.normaliser(n), "estimates": [r.to_dict() for r in reports]}


def cmd_asymptotic(config, which):
    """Limit formulas and Gaussian-side checks."""
    if which == "t1-upper":
        n = _require_n(config)
        dp = _dominating_point(config)
        return {"which": which, "n": n, "b_n": config.normaliser(n),
                "value": theorem1_upper(dp, n, _schedule_arg(config))}

    if which == "t4-gauss":
        body = config.require_body()
        rho = _rho(config)
        report = gaussian_set_probability(config.model, body, rho, config.samples, config.seed,
                                          tilted=config.method == "tilted",
                                          threads=config.threads, block_size=config.block_size)
        return {"which": which, "rho": rho, **report.to_dict()}

    if which == "t5-ball":
        n = _require_n(config)
        ball = _require_ball(config)
        result = theorem5_value(config.spectral or config.model, ball, n, _schedule_arg(config))
        payload = {"which": which, **result.to_dict()}
        if config.spectral_dims:
            if config.spectral is None:
                raise ConfigError("spectral_dims needs a spectral covariance")
            sweep = spectral_sweep(config.spectral.p, config.spectral_dims, n, _schedule_arg(config),
                                   center_scale=float(np.linalg.norm(ball.center)), radius=ball.radius,
                                   rule=config.spectral.rule)
            payload["sweep"] = [{"dim": dim, "integral": row.integral, "value": row.value,
                                 "truncated_tail": row.truncated_tail, "nominal_tail": row.nominal_tail}
                                for dim, row in zip(config.spectral_dims, sweep)]
        return payload

    if which == "cm-check":
        ball = _require_ball(config)
        check = cameron_martin_check(config.model, ball, _rho(config), config.samples or 0,
                                     config.require_seed(), threads=config.threads,
                                     block_size=config.block_size)
        return {"which": which, **check.to_dict()}

    if which == "t5-finite":
        ball = _require_ball(config)
        result = finite_rho_ball_integral(config.model, ball, _rho(config), config.samples or 0,
                                          config.require_seed(), quad_nodes=config.quad_nodes,
                                          threads=config.threads, block_size=config.block_size)
        return {"which": which, **result.to_dict()}

    raise ConfigError(f"unknown asymptotic target {which!r}")


def cmd_compare(config):
    """Ratio table P(S_n in b_n D) / P(G in rho_n D) over --n-list."""
    if not config.n_list:
        raise ConfigError("compare needs a non-empty n_list")
    table = ratio_experiment(config.base, config.require_body(), config.schedule, config.n_list,
                             config.samples or 0, config.require_seed(),
                             threads=config.threads, block_size=config.block_size)
    if config.format == "csv":
        return table
    return {"rows": table.to_dict(orient="records")}


def cmd_verify_repr(config):
    """Exact check of P = prefactor x J_n; adds a Monte Carlo local term when sampled."""
    n = _require_n(config)
    b_n = config.normaliser(n)
    body = config.require_body()
    dp = _dominating_point(config)
    payload = repr_exact(config.base, n, b_n, body, dp).to_dict()
    if config.samples and config.seed is not None:
        sampler = make_tilt(config.base, dp, n, b_n)
        estimate = jn_estimate(sampler, dp, n, b_n, body, config.samples, config.seed,
                               threads=config.threads, block_size=config.block_size)
        payload["local_term_estimate"] = estimate.to_dict()
    return payload


def cmd_slice_check(config):
    """Slice widths of D near a0 against the configured tau profile."""
    spec = config.slice_spec
    if spec is None:
        raise ConfigError("slice-check needs a slice spec {kind, beta, delta}")
    dp = _dominating_point(config)
    grid = config.grid or [spec.delta * 2.0 ** -k for k in range(10)]
    report = check_slice_domination(config.require_body(), dp, spec, grid)
    rows = [{"s": r.s, "width": r.width, "tau": r.tau, "margin": r.margin} for r in report.rows]
    if config.format == "csv":
        return pd.DataFrame(rows, columns=["s", "width", "tau", "margin"])
    return {"kind": spec.kind, "beta": spec.beta, "delta": spec.delta,
            "dominated": report.dominated, "rows": rows}


def emit(result, fmt, output=None):
    """Write a payload as JSON (dict) or CSV (DataFrame)."""
    if isinstance(result, pd.DataFrame):
        text = result.to_csv(index=False, float_format="%.17g")
    else:
        text = to_json(result)
    if output:
        with open(output, 'w', encoding='utf-8') as f:
            f.write(text)
        logging.info(f"Results saved to {output}")
    else:
        sys.stdout.write(text)


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run file')
    common.add_argument('--n', type=int, help='number of increments')
    common.add_argument('--n-list', type=_int_list, dest='n_list', help='comma-separated n values')
    common.add_argument('--samples', type=int, help='Monte Carlo replications')
    common.add_argument('--seed', type=int, help='seed for every stochastic step')
    common.add_argument('--threads', type=int, help='worker threads (default: MODDEV_THREADS)')
    common.add_argument('--alpha', type=float, help='schedule exponent')
    common.add_argument('--c', type=float, help='schedule constant')
    common.add_argument('--b-n', type=float, dest='b_n', help='fixed normaliser b_n')
    common.add_argument('--rho', type=float, help='Gaussian scale (default b_n / sqrt(n))')
    common.add_argument('--method', choices=('naive', 'tilted', 'both'), help='estimator')
    common.add_argument('--quad-nodes', type=int, dest='quad_nodes', help='Gauss-Laguerre nodes')
    common.add_argument('--output', help='write results here instead of stdout')
    common.add_argument('--format', choices=('json', 'csv'), help='output format')
    common.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING, ...')

    parser = argparse.ArgumentParser(description='Moderate Deviations Lab')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('dominate', parents=[common], help='dominating point of a body')
    commands.add_parser('estimate', parents=[common], help='naive / tilted Monte Carlo estimates')
    asymptotic = commands.add_parser('asymptotic', parents=[common], help='limit formulas')
    asymptotic.add_argument('--which', choices=ASYMPTOTIC_TARGETS, required=True)
    commands.add_parser('compare', parents=[common], help='ratio experiment table')
    commands.add_parser('verify-repr', parents=[common], help='exact representation check')
    commands.add_parser('slice-check', parents=[common], help='slice domination margins')
    return parser


COMMANDS = {
    'dominate': cmd_dominate,
    'estimate': cmd_estimate,
    'compare': cmd_compare,
    'verify-repr': cmd_verify_repr,
    'slice-check': cmd_slice_check,
}

OVERRIDE_KEYS = ('n', 'n_list', 'samples', 'seed', 'threads', 'alpha', 'c', 'b_n', 'rho',
                 'method', 'quad_nodes', 'output', 'format')


def main(argv=None):
    """Parse arguments, run one command, emit its result; returns the exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)

    try:
        overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS}
        config = load_run_config(args.config, overrides)
        logging.info(f"Running {args.command}...")
        if args.command == 'asymptotic':
            result = cmd_asymptotic(config, args.which)
        else:
            result = COMMANDS[args.command](config)
        emit(result, config.format, config.output)
        return 0
    except ModdevError as e:
        logging.error(f"{type(e).__name__}: {e.reason}")
        sys.stdout.write(json.dumps(_jsonable(e.to_dict())) + "\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
