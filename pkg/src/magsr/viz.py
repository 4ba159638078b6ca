"""Static four-panel rendering of super-resolution uncertainty maps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .inference import UncertaintyMaps

FIELD_RANGE_GAUSS = 1500.0


def render_four_panel(
    maps: UncertaintyMaps,
    target: np.ndarray | None = None,
    field_range: float = FIELD_RANGE_GAUSS,
):
    """Target (if given), predictive mean, epistemic and aleatoric panels.

    Field panels use a symmetric +-field_range Gauss diverging scale;
    uncertainty panels are max-normalized with the max in the title.
    """
    panels = []
    if target is not None:
        panels.append(("target", np.asarray(target), "field"))
    panels.append(("predictive mean", maps.predictive_mean, "field"))
    panels.append((f"epistemic (T={maps.T})", maps.epistemic, "uncertainty"))
    panels.append(("aleatoric", maps.aleatoric, "uncertainty"))

    fig, axes = plt.subplots(1, len(panels), figsize=(3.2 * len(panels), 3.4), squeeze=False)
    for ax, (title, data, kind) in zip(axes[0], panels):
        if kind == "field":
            im = ax.imshow(data, cmap="RdBu_r", vmin=-field_range, vmax=field_range)
            ax.set_title(f"{title} [+-{field_range:.0f} G]", fontsize=9)
        else:
            peak = float(np.max(data)) if data.size else 0.0
            scale = peak if peak > 0 else 1.0
            im = ax.imshow(data / scale, cmap="viridis", vmin=0.0, vmax=1.0)
            ax.set_title(f"{title} [max {peak:.3g} G^2]", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return fig


def save_four_panel(path, maps: UncertaintyMaps, target: np.ndarray | None = None, field_range: float = FIELD_RANGE_GAUSS) -> None:
    fig = render_four_panel(maps, target=target, field_range=field_range)
    fig.savefig(path, dpi=120)
    plt.close(fig)
