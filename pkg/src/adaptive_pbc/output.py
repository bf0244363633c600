"""Writers for trajectories, figures and the run manifest.

Everything written here is a pure function of its inputs: CSV floats use
``repr`` (shortest round-tripping form, always a ``.`` decimal point), PNGs
carry no software or date metadata, and the manifest has no timestamps.
"""

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .simulation import ADAPTIVE, DESIRED_REFERENCE, MODES, NON_ADAPTIVE, ORACLE  # noqa: E402

MODE_COLORS = {DESIRED_REFERENCE: "black", NON_ADAPTIVE: "red", ADAPTIVE: "blue", ORACLE: "green"}
MODE_LABELS = {
    DESIRED_REFERENCE: "desired",
    NON_ADAPTIVE: "non-adaptive",
    ADAPTIVE: "adaptive",
    ORACLE: "true parameters",
}
TOOL_NAME = "adaptive-pbc"


def csv_columns(traj):
    cols = ["k", "t", *traj.state_names]
    cols += ["u"] if traj.u.shape[1] == 1 else [f"u_{i + 1}" for i in range(traj.u.shape[1])]
    cols += [f"theta_est_{i + 1}" for i in range(traj.theta_est.shape[1])]
    cols += ["V_z", "H_d"]
    cols += [f"ref_{name}" for name in traj.state_names]
    return cols


def emit_csv(traj, path):
    """Write ``traj`` as CSV and return the path.

    One header row, then one row per sample. IO failures are re-raised with
    the path in the message.
    """
    path = Path(path)
    t = traj.t
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_columns(traj))
            for k in range(len(traj.x)):
                row = [str(k), repr(float(t[k]))]
                for block in (traj.x[k], traj.u[k], traj.theta_est[k]):
                    row += [repr(float(v)) for v in block]
                row += [repr(float(traj.V_z[k])), repr(float(traj.H_d[k]))]
                row += [repr(float(v)) for v in traj.x_ref[k]]
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _ordered(trajs):
    rank = {m: i for i, m in enumerate(MODES)}
    return sorted(trajs, key=lambda tr: rank.get(tr.mode, len(rank)))


def _save(fig, path):
    try:
        fig.savefig(path, dpi=100, metadata={"Software": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path


def _overlay(trajs, series, labels, xlabel="t [s]", reference=None):
    rows = len(labels)
    fig, axes = plt.subplots(rows, 1, figsize=(7, 2.3 * rows), sharex=True, squeeze=False)
    for i, name in enumerate(labels):
        ax = axes[i, 0]
        for tr in trajs:
            ax.plot(tr.t, series(tr)[:, i], color=MODE_COLORS[tr.mode], label=MODE_LABELS[tr.mode], lw=1.2)
        if reference is not None:
            ax.axhline(reference[i], color="black", ls="--", lw=1.0, label="true value")
        ax.set_ylabel(name)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel(xlabel)
    fig.tight_layout()
    return fig


def build_figures(trajs):
    """Figures keyed by name: ``states`` always, ``estimate`` and ``control``
    only when a controlled run is present (the desired reference has neither).
    """
    if not trajs:
        raise ValueError("plots need at least one trajectory")
    trajs = _ordered(trajs)
    first = trajs[0]
    figs = {"states": _overlay(trajs, lambda tr: tr.x, first.state_names)}
    controlled = [tr for tr in trajs if tr.mode != DESIRED_REFERENCE]
    if controlled:
        s, m = first.theta_true.size, first.u.shape[1]
        figs["estimate"] = _overlay(controlled, lambda tr: tr.theta_est,
                                    [f"theta_{i + 1}" for i in range(s)], reference=first.theta_true)
        figs["control"] = _overlay(controlled, lambda tr: tr.u,
                                   ["u"] if m == 1 else [f"u_{i + 1}" for i in range(m)])
    return figs


def emit_plots(trajs, outdir, prefix=""):
    """Write the figures of :func:`build_figures` as PNGs; return the paths."""
    outdir = Path(outdir)
    return [_save(fig, outdir / f"{prefix}{name}.png") for name, fig in build_figures(trajs).items()]


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_manifest(outdir, files, *, seed, config=None, defaults=None, warnings=None,
                   conditions=None, metrics=None, failures=None, checks=None):
    """Write ``manifest.json`` listing each file in ``files`` with its hash.

    File names are stored relative to ``outdir`` so that two output
    directories of the same run produce identical manifests.
    """
    outdir = Path(outdir)
    inventory = []
    for f in sorted(Path(f) for f in files):
        inventory.append({
            "path": f.relative_to(outdir).as_posix(),
            "sha256": file_digest(f),
            "bytes": f.stat().st_size,
        })
    manifest = {
        "tool": TOOL_NAME,
        "version": __version__,
        "seed": seed,
        "config": config or {},
        "defaults_applied": defaults or [],
        "warnings": warnings or [],
        "condition_reports": conditions or {},
        "metrics": metrics or {},
        "failures": failures or {},
        "checks": checks or {},
        "files": inventory,
    }
    path = outdir / "manifest.json"
    try:
        path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
