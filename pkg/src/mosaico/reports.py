"""Assembles the analysis report from ratings, manifest, and the stats battery."""

from __future__ import annotations

import csv

import numpy as np

from . import stats
from .corpus import Stimulus
from .ratings import RatingRecord

SCHEMA_VERSION = 1


def group_key(stim: Stimulus, group_by: str) -> str:
    if group_by == "system":
        # Augmented stimuli report under a suffixed system so degraded
        # variants never pool with their source system's scores.
        if stim.is_augmented:
            return f"{stim.system_id}-{stim.augmentation}"
        return stim.system_id
    if group_by == "speaker":
        return stim.speaker_id
    raise ValueError(f"group_by must be 'system' or 'speaker', got {group_by!r}")


def group_scores(
    ratings: list[RatingRecord], stimuli: list[Stimulus], group_by: str = "system"
) -> dict[str, list[float]]:
    by_id = {s.stimulus_id: s for s in stimuli}
    out: dict[str, list[float]] = {}
    for r in ratings:
        stim = by_id.get(r.stimulus_id)
        if stim is None:
            raise ValueError(f"rating references unknown stimulus {r.stimulus_id!r}")
        out.setdefault(group_key(stim, group_by), []).append(float(r.score))
    return out


def rating_matrix(
    ratings: list[RatingRecord], stimuli: list[Stimulus], group_by: str = "system"
) -> stats.RatingMatrix:
    """Raters x groups matrix; a cell is the rater's mean score in the group."""
    by_id = {s.stimulus_id: s for s in stimuli}
    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    raters: set[str] = set()
    groups: set[str] = set()
    for r in ratings:
        g = group_key(by_id[r.stimulus_id], group_by)
        key = (r.session_id, g)
        sums[key] = sums.get(key, 0.0) + r.score
        counts[key] = counts.get(key, 0) + 1
        raters.add(r.session_id)
        groups.add(g)
    rater_list = sorted(raters)
    group_list = sorted(groups)
    cells = np.full((len(rater_list), len(group_list)), np.nan)
    for i, rater in enumerate(rater_list):
        for j, g in enumerate(group_list):
            if (rater, g) in sums:
                cells[i, j] = sums[(rater, g)] / counts[(rater, g)]
    return stats.RatingMatrix(rater_list, group_list, cells)


def full_report(
    ratings: list[RatingRecord],
    stimuli: list[Stimulus],
    group_by: str = "system",
    kw_group_by: str = "speaker",
    n_bins: int = 5,
    alpha_metric: str = "interval",
) -> dict:
    """The whole analysis battery in one JSON-serializable structure."""
    if not ratings:
        raise ValueError("no ratings to analyze")
    scores = group_scores(ratings, stimuli, group_by)
    table = stats.mos_table(scores)
    bins = stats.bin_by_mos(table, n_bins) if len(table) >= n_bins else None
    for row in table:
        row["bin"] = bins[row["group"]] if bins else None

    matrix = rating_matrix(ratings, stimuli, group_by)
    alpha = stats.krippendorff_alpha(matrix, alpha_metric)
    icc = stats.icc_2_1(matrix)

    kw_scores = group_scores(ratings, stimuli, kw_group_by)
    kw = stats.kruskal_wallis(list(kw_scores.values()))

    tukey_rows = []
    if bins:
        scores_by_bin: dict[str, list[float]] = {}
        for group, b in bins.items():
            scores_by_bin.setdefault(f"bin{b}", []).extend(scores[group])
        if all(len(v) >= 2 for v in scores_by_bin.values()):
            for cmp in stats.tukey_hsd(scores_by_bin):
                tukey_rows.append(
                    {
                        "bin_i": cmp.group_i,
                        "bin_j": cmp.group_j,
                        "diff": cmp.diff,
                        "q": cmp.q,
                        "p": cmp.p,
                    }
                )

    return {
        "schema_version": SCHEMA_VERSION,
        "group_by": group_by,
        "n_ratings": len(ratings),
        "n_groups": len(table),
        "mos_table": table,
        "krippendorff_alpha": alpha,
        "alpha_metric": alpha_metric,
        "icc_2_1": icc,
        "kruskal_wallis": {"H": kw.H, "df": kw.df, "p": kw.p, "group_by": kw_group_by},
        "tukey": tukey_rows,
    }


def write_plot_data(path, report: dict) -> None:
    """CSV for external figure rendering: group, mean, sd, n, bin."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "mean", "sd", "n", "bin"])
        for row in report["mos_table"]:
            writer.writerow(
                [row["group"], f"{row['mean']:.6f}", f"{row['sd']:.6f}", row["n"],
                 row["bin"] if row["bin"] is not None else ""]
            )
