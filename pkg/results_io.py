"""
Result files of an experiment run: results.csv with a fixed header,
metadata.yaml describing the run, and matplotlib scripts for the three figure
families.
"""

import csv
import logging
import os
import yaml
from datetime import datetime, timezone
from typing import Iterable, List
from experiment_manager import ExperimentSpec
from sim_harness import ResultRow

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "point_id",
    "M",
    "N_G",
    "N_E",
    "N_t",
    "L",
    "l_s",
    "mobility",
    "P_dBm",
    "trial",
    "sum_rate_bps_hz",
    "outer_iters",
    "admm_resid",
    "wall_ms",
    "flags",
]

RESULTS_FILE = "results.csv"
METADATA_FILE = "metadata.yaml"
FORMATS = ("csv", "metadata", "plots")

# Defaults the source experiments leave unstated
ASSUMED_DEFAULTS = {
    "trials": "Monte-Carlo trial count per sweep point is a configured assumption",
    "scenario.power_dbm": "Transmit power budget is a configured assumption",
}

PLOT_TEMPLATE = '''"""Plot {title} from {results_file}"""

import csv
import sys
from collections import defaultdict
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{results_file}"

sums = defaultdict(float)
counts = defaultdict(int)
with open(path, newline="") as f:
    for row in csv.DictReader(f):
        if "error:" in row["flags"]:
            continue
{row_filter}
        key = ({series_key}, row["mobility"], float(row["{x_column}"]))
        sums[key] += float(row["sum_rate_bps_hz"])
        counts[key] += 1

curves = defaultdict(list)
for key in sorted(sums):
    series, mobility, x = key[:-2], key[-2], key[-1]
    curves[(series, mobility)].append((x, sums[key] / counts[key]))

fig, ax = plt.subplots(figsize=(6, 4.5))
for (series, mobility), points in sorted(curves.items()):
    xs, ys = zip(*points)
    label = "{series_label}".format(*series) + f" ({{mobility}})"
    ax.plot(xs, ys, marker="o" if mobility == "MA" else "s",
            linestyle="-" if mobility == "MA" else "--", label=label)

ax.set_xlabel("{x_label}")
ax.set_ylabel("Achievable sum-rate (bits/s/Hz)")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("{figure_file}", dpi=300)
'''

PLOT_FAMILIES = {
    "plot_rate_vs_elements_paths.py": dict(
        title="sum-rate against M for each path count",
        row_filter="",
        series_key='int(row["L"]), int(row["N_t"]), int(row["N_E"])',
        series_label="L={}, N_t={}, N_E={}",
        x_column="M",
        x_label="Number of RIS elements M",
        figure_file="rate_vs_elements_paths.png",
    ),
    "plot_rate_vs_elements_antennas.py": dict(
        title="sum-rate against M for each BS antenna count",
        row_filter="",
        series_key='int(row["N_t"]), int(row["L"]), int(row["N_E"])',
        series_label="N_t={}, L={}, N_E={}",
        x_column="M",
        x_label="Number of RIS elements M",
        figure_file="rate_vs_elements_antennas.png",
    ),
    "plot_rate_vs_area.py": dict(
        title="sum-rate against the region scale for each group size",
        row_filter=(
            "        if int(row[\"M\"]) != max_elements:\n            continue"
        ),
        series_key='int(row["N_E"]), int(row["M"])',
        series_label="N_E={}, M={}",
        x_column="l_s",
        x_label="Moving region scale l_s",
        figure_file="rate_vs_area.png",
    ),
}

AREA_PRELUDE = '''
with open(path, newline="") as f:
    max_elements = max(int(row["M"]) for row in csv.DictReader(f))
'''


class ResultsFormatError(Exception):
    pass


def _format_row(row: ResultRow) -> dict:
    values = row.model_dump()
    values["flags"] = ";".join(row.flags)
    return {column: values[column] for column in RESULT_COLUMNS}


def write_results_csv(rows: Iterable[ResultRow], path: str) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(_format_row(row))
    return path


def load_table(path: str) -> List[ResultRow]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ResultsFormatError(
                f"Unexpected header in {path}: {reader.fieldnames}"
            )
        rows = []
        for record in reader:
            record["flags"] = [flag for flag in record["flags"].split(";") if flag]
            rows.append(ResultRow(**record))
    return rows


def write_metadata(
    spec: ExperimentSpec, path: str, experiment_name: str | None = None
) -> str:
    metadata = {
        "experiment": experiment_name,
        "created": datetime.now(timezone.utc).isoformat(),
        "columns": RESULT_COLUMNS,
        "assumed_defaults": ASSUMED_DEFAULTS,
        "spec": spec.model_dump(),
    }
    with open(path, "w") as f:
        yaml.safe_dump(metadata, f, sort_keys=False)
    return path


def plot_script(name: str, results_file: str = RESULTS_FILE) -> str:
    family = PLOT_FAMILIES[name]
    script = PLOT_TEMPLATE.format(results_file=results_file, **family)
    if family["row_filter"]:
        script = script.replace(
            "\nsums = defaultdict(float)", AREA_PRELUDE + "\nsums = defaultdict(float)"
        )
    return script


def write_plot_scripts(output_dir: str) -> List[str]:
    paths = []
    for name in PLOT_FAMILIES:
        path = os.path.join(output_dir, name)
        with open(path, "w") as f:
            f.write(plot_script(name))
        paths.append(path)
    return paths


def emit(
    rows: List[ResultRow],
    output_dir: str,
    formats: Iterable[str] = FORMATS,
    spec: ExperimentSpec | None = None,
    experiment_name: str | None = None,
) -> List[str]:
    """Write the requested result files into output_dir and return their paths"""
    formats = list(formats)
    unknown = [fmt for fmt in formats if fmt not in FORMATS]
    if unknown:
        raise ResultsFormatError(f"Unsupported output formats: {', '.join(unknown)}")
    if "metadata" in formats and spec is None:
        raise ResultsFormatError("Metadata output needs the experiment spec")

    os.makedirs(output_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        paths.append(write_results_csv(rows, os.path.join(output_dir, RESULTS_FILE)))
    if "metadata" in formats:
        paths.append(
            write_metadata(spec, os.path.join(output_dir, METADATA_FILE), experiment_name)
        )
    if "plots" in formats:
        paths.extend(write_plot_scripts(output_dir))

    logger.info(f"Wrote {len(paths)} result files to {output_dir}")
    return paths
