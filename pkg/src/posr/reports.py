"""CSV, text and SVG outputs.  Byte-deterministic for identical inputs."""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .metrics import RegretReport, Residual
from .runner import FtrlDemoReport, RunLog

SVG_SALT = "posr"


class ReportError(OSError):
    pass


def _num(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def _header(run: RunLog) -> list[str]:
    lines = [f"# mode={run.mode}", f"# seed={run.seed}"]
    for k in sorted(run.params):
        v = run.params[k]
        lines.append(f"# {k}={_num(v) if isinstance(v, float) else v}")
    for k in sorted(run.provenance):
        lines.append(f"# provenance {k}: {run.provenance[k]}")
    return lines


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _csv(header_lines, columns, rows) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def run_log_csv(run: RunLog) -> str:
    rows = []
    for e in range(run.episodes):
        for i in range(run.m):
            rows.append((str(e + 1), str(int(run.episode_block[e])), str(i), _num(run.realized[e, i])))
    return _csv(_header(run), ["episode", "block", "player", "realized_return"], rows)


def block_csv(run: RunLog) -> str:
    rows = []
    if run.counts is not None:
        for k in range(run.updates):
            for i in range(run.m):
                for s in run.states(i):
                    for a in range(run.action_counts[i]):
                        rows.append((str(k), str(i), str(int(s)), str(a),
                                     _num(run.policies[i][k, s, a]), _num(run.q_hat[i][k, s, a]),
                                     str(int(run.counts[i][k, s, a]))))
    cols = ["block", "player", "state", "action", "policy_prob", "q_hat", "visit_count"]
    return _csv(_header(run), cols, rows)


def regret_csv(run: RunLog, report: RegretReport) -> str:
    rows = []
    for k, c in enumerate(report.checkpoints):
        for i in range(report.m):
            rows.append((str(int(c)), str(i), _num(report.swap[i, k]), _num(report.external[i, k]),
                         _num(report.ce_gap[i, k]), _num(report.path1[i, k]), _num(report.path2[i, k])))
    cols = ["checkpoint_episode", "player", "swap_regret", "external_regret", "ce_gap", "path1", "path2"]
    return _csv(_header(run), cols, rows)


def residual_table(residuals: list[Residual]) -> str:
    cols = ("bound", "player", "lhs", "rhs", "residual", "precondition", "note")
    rows = [(r.name, r.player, f"{r.lhs:.6g}", f"{r.rhs:.6g}", f"{r.residual:.6g}",
             "yes" if r.precondition else "no", r.note) for r in residuals]
    widths = [max(len(c), *(len(row[j]) for row in rows)) if rows else len(c) for j, c in enumerate(cols)]
    out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    for row in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


def summary_text(run: RunLog, analysis) -> str:
    rep = analysis.report
    lines = [f"mode: {run.mode}", f"seed: {run.seed}", f"episodes: {run.episodes}",
             f"policy updates: {run.updates}"]
    for k in sorted(run.params):
        lines.append(f"param {k} = {run.params[k]!r}  [{run.provenance.get(k, 'fixed')}]")
    if len(rep.checkpoints):
        for i in range(rep.m):
            kind = "exact" if rep.exact[i] else "lower bound"
            lines.append(f"player {i}: swap regret {rep.swap[i, -1]:.6g} ({kind}), "
                         f"external regret {rep.external[i, -1]:.6g}, "
                         f"swap regret / T {rep.ce_gap[i, -1]:.6g}")
        lines.append(f"correlated-equilibrium gap (max over players of swap regret / T): "
                     f"{rep.ce_gap[:, -1].max():.6g}")
    for k in sorted(analysis.checks):
        lines.append(f"check {k}: {analysis.checks[k]}")
    for f in run.flags[:50]:
        lines.append(f"flag: {f}")
    if len(run.flags) > 50:
        lines.append(f"flag: ... {len(run.flags) - 50} more")
    lines.append("")
    lines.append("bound residuals (rhs - lhs; negative means the bound is violated)")
    return "\n".join(lines) + "\n" + residual_table(analysis.residuals)


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save_svg(fig, path: Path):
    import matplotlib
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    _write(path, buf.getvalue())


def regret_svg(run: RunLog, report: RegretReport, path: Path):
    plt = _figure()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    x = report.checkpoints
    for i in range(report.m):
        ax1.plot(x, report.swap[i], marker=".", label=f"player {i}")
    ax1.set_xlabel("episode")
    ax1.set_ylabel("cumulative swap regret")
    if report.m:
        ax1.legend(loc="upper left")
        ax2.plot(x, report.ce_gap.max(0) if len(x) else x, marker=".", color="black")
    ax2.set_xlabel("episode")
    ax2.set_ylabel("CE gap")
    if len(x) and x[0] > 0:
        ax1.set_xscale("log")
        ax2.set_xscale("log")
    ax1.set_title(run.mode)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def emit_reports(run: RunLog, analysis, out, config: ExperimentConfig | None = None) -> list[Path]:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def put(name, text):
        _write(out / name, text)
        written.append(out / name)

    put("run_log.csv", run_log_csv(run))
    if run.mode == "bandit_blocked":
        put("blocks.csv", block_csv(run))
    put("regret.csv", regret_csv(run, analysis.report))
    put("summary.txt", summary_text(run, analysis))
    regret_svg(run, analysis.report, out / "regret.svg")
    written.append(out / "regret.svg")
    if config is not None:
        put("config.json", config.dumps())
    return written


# -- run archive ------------------------------------------------------------------

def save_run(run: RunLog, path):
    arrays = {"values": run.values, "realized": run.realized, "episode_block": run.episode_block}
    for i in range(run.m):
        arrays[f"policies_{i}"] = run.policies[i]
        arrays[f"q_hat_{i}"] = run.q_hat[i]
        arrays[f"q_true_{i}"] = run.q_true[i]
        if run.counts is not None:
            arrays[f"counts_{i}"] = run.counts[i]
    meta = {"mode": run.mode, "m": run.m, "params": run.params, "provenance": run.provenance,
            "seed": run.seed, "block": run.block, "flags": run.flags}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    try:
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def load_run(path, env) -> RunLog:
    try:
        data = np.load(path)
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    meta = json.loads(str(data["meta"]))
    m = meta["m"]
    counts = [data[f"counts_{i}"] for i in range(m)] if "counts_0" in data else None
    return RunLog(meta["mode"], env, [data[f"policies_{i}"] for i in range(m)],
                  [data[f"q_hat_{i}"] for i in range(m)], [data[f"q_true_{i}"] for i in range(m)],
                  data["values"], data["realized"], data["episode_block"], meta["params"],
                  meta["provenance"], meta["seed"], meta["block"], counts, meta["flags"])


# -- FTRL comparison ----------------------------------------------------------------

def ftrl_demo_csv(rep: FtrlDemoReport) -> str:
    rows = []
    for r in rep.ftrl:
        rows.append(("ftrl", r["regularizer"], str(rep.T), _num(r["eta"]), "", _num(r["external_regret"]),
                     _num(r["swap_regret"]), _num(r["external_regret"] / rep.T)))
    for r in rep.posr:
        rows.append(("posr", "log_barrier", str(r["T"]), _num(r["eta"]), _num(r["gamma"]),
                     _num(r["external_regret"]), _num(r["swap_regret"]), _num(r["ratio"])))
    cols = ["method", "regularizer", "T", "eta", "gamma", "external_regret", "swap_regret", "regret_over_T"]
    return _csv([f"# T={rep.T}"], cols, rows)


def ftrl_demo_summary(rep: FtrlDemoReport) -> str:
    lines = [f"T: {rep.T}", f"optimal-in-hindsight total loss: {rep.optimal_total_loss!r}",
             f"kernel variation, flat L1 over all (s, a, s'): {rep.kernel_variation['flat_l1']!r}",
             f"kernel variation, max over (s, a) of row L1: {rep.kernel_variation['inf_1']!r}",
             f"FTRL lower bound T/6: {rep.T / 6!r}"]
    worst = min(r["external_regret"] for r in rep.ftrl) if rep.ftrl else float("nan")
    lines.append(f"smallest FTRL regret over the grid: {worst!r} "
                 f"({'meets' if worst >= rep.T / 6 else 'misses'} T/6)")
    for r in rep.posr:
        lines.append(f"POSR T={r['T']} eta={r['eta']!r} gamma={r['gamma']!r}: regret {r['external_regret']!r}, "
                     f"regret/T {r['ratio']!r}")
    if len(rep.posr) >= 2:
        a, b = rep.posr[0]["ratio"], rep.posr[-1]["ratio"]
        lines.append(f"POSR regret/T ratio (long / short): {b / a if a else float('nan')!r}")
    return "\n".join(lines) + "\n"


def ftrl_demo_svg(rep: FtrlDemoReport, path: Path):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for reg in sorted({r["regularizer"] for r in rep.ftrl}):
        pts = [(r["eta"], r["external_regret"]) for r in rep.ftrl if r["regularizer"] == reg]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"FTRL ({reg})")
    ax.axhline(rep.T / 6, color="gray", linestyle="--", label="T/6")
    for r in rep.posr:
        if r["T"] == rep.T:
            ax.axhline(r["external_regret"], color="black", label="POSR")
    ax.set_xscale("log")
    ax.set_xlabel("FTRL step size")
    ax.set_ylabel(f"regret at T={rep.T}")
    ax.legend(loc="center right")
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def emit_ftrl_demo(rep: FtrlDemoReport, out, config: ExperimentConfig | None = None) -> list[Path]:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out}: {exc}") from exc
    _write(out / "ftrl_demo.csv", ftrl_demo_csv(rep))
    _write(out / "summary.txt", ftrl_demo_summary(rep))
    ftrl_demo_svg(rep, out / "regret.svg")
    written = [out / "ftrl_demo.csv", out / "summary.txt", out / "regret.svg"]
    if config is not None:
        _write(out / "config.json", config.dumps())
        written.append(out / "config.json")
    return written
