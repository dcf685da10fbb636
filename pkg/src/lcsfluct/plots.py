"""Static SVG figures for experiment reports."""

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# command -> (x column, y column, y error column, log-log axes)
_LAYOUT = {
    "gamma-curve": ("q", "gamma_hat", "stderr", False),
    "gamma-star": ("n", "gamma_hat", "stderr", False),
    "variance-scan": ("n", "var_hat", "stderr", True),
    "bias-scan": ("d", "mean_delta", None, False),
    "events": ("eps", "freq_K", None, False),
    "coupling-path": ("level", "mean_lc", "stderr", False),
}


def render_svg(report) -> bytes:
    fig, ax = plt.subplots(figsize=(6, 4))
    layout = _LAYOUT.get(report.command)
    if layout and report.rows:
        xcol, ycol, ecol, loglog = layout
        groups = {}
        for row in report.rows:
            groups.setdefault(row.get("k"), []).append(row)
        for key, rows in groups.items():
            xs = [r[xcol] for r in rows]
            ys = [r[ycol] for r in rows]
            errs = [r[ecol] for r in rows] if ecol else None
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=f"k={key}" if key is not None else None)
        if loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(xcol)
        ax.set_ylabel(ycol)
        if len(groups) > 1:
            ax.legend()
    ax.set_title(report.command)
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
