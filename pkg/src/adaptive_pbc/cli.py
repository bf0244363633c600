"""Command line front end.

Subcommands::

    adaptive-pbc run <config|preset>     simulate every mode, write CSVs, plots, manifest
    adaptive-pbc verify <config|preset>  sampled condition checks only
    adaptive-pbc presets                 list bundled configurations

Exit status: 0 ok, 1 configuration or IO error, 2 numerical blowup,
3 acceptance violation (only with ``--check``).
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import check_lipschitz, check_p_monotone
from .config import preset_names, resolve_config
from .exceptions import ConfigError
from .output import emit_csv, emit_plots, write_manifest
from .simulation import ADAPTIVE, DESIRED_REFERENCE, LYAPUNOV_SLACK, NON_ADAPTIVE, ORACLE
from .simulation import compute_metrics, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3
ORACLE_MATCH_TOL = 1e-10


def condition_reports(system, sampler, T):
    return {
        "p_monotone": check_p_monotone(system, sampler, T),
        "lipschitz": check_lipschitz(system, sampler, T),
    }


def run_all(configs, jobs=None):
    """Simulate each config; runs share nothing, so they go to a thread pool."""
    with ThreadPoolExecutor(max_workers=jobs or len(configs)) as pool:
        return list(pool.map(run_scenario, configs))


def acceptance_checks(resolved, trajs, target):
    """Threshold checks of a finished run, as ``{name: (passed, detail)}``."""
    data = resolved.data
    tol = resolved.check
    by_mode = {tr.mode: tr for tr in trajs}
    out = {}
    theta_true = np.asarray(data["true_params"])
    target = np.asarray(target, dtype=float)

    ad = by_mode.get(ADAPTIVE)
    if ad is not None:
        err = np.abs(ad.theta_est[-1] - theta_true)
        limit = tol["param_rel_tol"] * np.abs(theta_true)
        out["parameter_convergence"] = (bool(np.all(err <= limit)), f"|theta_est - theta| = {err.tolist()}, limit {limit.tolist()}")
        if data["system"] == "pendulum":
            q_err = abs(ad.x[-1, 0] - target[0])
            out["position_convergence"] = (bool(q_err <= tol["position_tol"]), f"|q - q*| = {q_err:.3e}")
        else:
            x_err = float(np.max(np.abs(ad.x[-1] - target)))
            out["state_convergence"] = (bool(x_err <= tol["state_tol"]), f"max|x| = {x_err:.3e}")
        dV = np.diff(ad.V_z)
        ok = ad.condition_ok[: len(dV)]
        slack = LYAPUNOV_SLACK * ad.V_z[0]
        bad = int(np.sum(dV[ok] > slack))
        out["lyapunov_decrease"] = (bad == 0, f"{bad} increases over {int(ok.sum())} certified steps")
    na = by_mode.get(NON_ADAPTIVE)
    if ad is not None and na is not None:
        m_ad, m_na = compute_metrics(ad, target), compute_metrics(na, target)
        better = (m_ad.tracking_rms < m_na.tracking_rms
                  and m_na.final_state_error > m_ad.final_state_error)
        out["adaptive_beats_non_adaptive"] = (
            bool(better),
            f"tracking_rms {m_ad.tracking_rms:.3e} vs {m_na.tracking_rms:.3e}, "
            f"final error {m_ad.final_state_error:.3e} vs {m_na.final_state_error:.3e}",
        )
    orc, ref = by_mode.get(ORACLE), by_mode.get(DESIRED_REFERENCE)
    if orc is not None and ref is not None and len(orc.x) == len(ref.x):
        diff = float(np.max(np.abs(orc.x - ref.x)))
        out["oracle_matches_reference"] = (diff <= ORACLE_MATCH_TOL, f"max diff {diff:.3e}")
    return out


def _write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _prepare(args):
    resolved = resolve_config(args.config, seed=args.seed)
    outdir = Path(args.out) if args.out else Path("out") / resolved.data["name"]
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {outdir}: {exc.strerror or exc}") from None
    return resolved, outdir


def cmd_run(args):
    resolved, outdir = _prepare(args)
    configs = resolved.configs
    system = configs[0].build()
    reports = condition_reports(system, configs[0].sampler, configs[0].T)
    trajs = run_all(configs)

    files = [_write_text(outdir / "config.yaml", resolved.dump())]
    files.append(_write_text(
        outdir / "conditions.json",
        json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2, sort_keys=True) + "\n",
    ))
    for tr in trajs:
        files.append(emit_csv(tr, outdir / f"{tr.mode}.csv"))
    if not args.no_plots:
        files += emit_plots(trajs, outdir)

    metrics = {tr.mode: compute_metrics(tr, system.target).to_dict() for tr in trajs}
    failures = {tr.mode: tr.failure for tr in trajs if tr.failure}
    # always recorded; --check only decides the exit status
    checks = {k: {"passed": p, "detail": d} for k, (p, d) in acceptance_checks(resolved, trajs, system.target).items()}
    write_manifest(
        outdir, files, seed=resolved.data["sampler"]["seed"], config=resolved.data,
        defaults=resolved.defaults, warnings=resolved.warnings,
        conditions={k: r.to_dict() for k, r in reports.items()},
        metrics=metrics, failures=failures, checks=checks,
    )

    for mode, m in metrics.items():
        print(f"{mode:18s} " + " ".join(f"{k}={v:.6g}" for k, v in m.items()))
    for name, r in reports.items():
        print(f"condition {name}: {'pass' if r.passed else 'FAIL'} (worst {r.worst_value:.6g})")
    print(f"wrote {len(files) + 1} files to {outdir}")
    if failures:
        for mode, f in failures.items():
            print(f"numerical blowup in {mode} at step {f['step']}: {f['message']}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, c in checks.items():
        print(f"check {name}: {'pass' if c['passed'] else 'FAIL'} ({c['detail']})")
    if args.check and not all(c["passed"] for c in checks.values()):
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_verify(args):
    resolved, outdir = _prepare(args)
    cfg = resolved.configs[0]
    reports = condition_reports(cfg.build(), cfg.sampler, cfg.T)
    files = [
        _write_text(outdir / "config.yaml", resolved.dump()),
        _write_text(
            outdir / "conditions.json",
            json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2, sort_keys=True) + "\n",
        ),
    ]
    write_manifest(
        outdir, files, seed=resolved.data["sampler"]["seed"], config=resolved.data,
        defaults=resolved.defaults, warnings=resolved.warnings,
        conditions={k: r.to_dict() for k, r in reports.items()},
    )
    for name, r in reports.items():
        print(f"{name}: {'pass' if r.passed else 'FAIL'} samples={r.samples_checked} "
              f"worst={r.worst_value:.6g} violations={len(r.violations)} "
              f"nonstrict={r.nonstrict_samples} stall set: {r.stall_manifold}")
    if args.check and not all(r.passed for r in reports.values()):
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_presets(args):
    for name in preset_names():
        print(name)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="adaptive-pbc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="YAML config file or bundled preset name")
    common.add_argument("--out", help="output directory (default: out/<name>)")
    common.add_argument("--seed", type=int, help="seed of the condition-check sampler")
    common.add_argument("--check", action="store_true", help="exit 3 if acceptance thresholds are missed")

    p_run = sub.add_parser("run", parents=[common], help="simulate all configured modes")
    p_run.add_argument("--no-plots", action="store_true", help="skip PNG output")
    p_run.set_defaults(func=cmd_run)
    p_verify = sub.add_parser("verify", parents=[common], help="run the sampled condition checks only")
    p_verify.set_defaults(func=cmd_verify)
    p_presets = sub.add_parser("presets", help="list bundled configurations")
    p_presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        # unwritable output is reported like a bad configuration
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
