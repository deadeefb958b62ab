"""Matplotlib rendering of run traces and sweep tables to image files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SOLVER_STYLE = {
    "semi": dict(color="tab:blue", ls="-"),
    "distributed": dict(color="tab:red", ls="--"),
}


def _new_axes(xlabel, ylabel, title=None):
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def residual_figure(reports, path):
    """Semilog residual curves vs iteration for one or two solver runs."""
    fig, ax = _new_axes("iteration", "residual", "Convergence")
    for rep in reports:
        style = _SOLVER_STYLE.get(rep.solver, {})
        if rep.trace_iters.size == 0:
            continue
        ax.semilogy(rep.trace_iters, rep.r_eq, label=f"{rep.solver}: equality",
                    **style)
        ax.semilogy(rep.trace_iters, rep.r_cons, alpha=0.6,
                    label=f"{rep.solver}: consistency", **style)
        if rep.r_consensus is not None:
            ax.semilogy(rep.trace_iters, rep.r_consensus, alpha=0.35,
                        label=f"{rep.solver}: consensus", **style)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def timing_figure(reports, path):
    """Average wall time per 100 iterations, per solver."""
    fig, ax = _new_axes("iteration block (x100)", "avg ms per 100 iterations",
                        "Iteration cost")
    drew = False
    for rep in reports:
        if rep.iter_times is None or rep.iter_times.size == 0:
            continue
        times = rep.iter_times
        blocks = range(1, (times.size + 99) // 100 + 1)
        avg = [float(times[(b - 1) * 100:b * 100].mean()) * 1e5 for b in blocks]
        ax.plot(list(blocks), avg, label=rep.solver,
                **_SOLVER_STYLE.get(rep.solver, {}))
        drew = True
    if drew:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_figure(rows, param, path):
    """Per-iteration mean time against the swept parameter, per solver."""
    fig, ax = _new_axes(param, "mean ms per iteration", f"Cost vs {param}")
    solvers = sorted({r["solver"] for r in rows})
    for name in solvers:
        pts = sorted(
            (r["value"], r["mean_ms_per_iter"]) for r in rows if r["solver"] == name
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=name, **_SOLVER_STYLE.get(name, {}))
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
