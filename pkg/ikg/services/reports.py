import csv
import json
import logging
from pathlib import Path

from ikg import settings
from ikg.services.harness import ExperimentResult

logger = logging.getLogger(__name__)

RESULTS_HEADER = ["policy", "goal", "preset", "budget", "pfs", "ci_low", "ci_high", "reps"]
RATES_HEADER = ["policy", "preset", "arm", "empirical_rate", "theoretical_rate"]


def _num(x: float) -> str:
    return format(x, ".10g")


def _preset_label(result: ExperimentResult) -> str:
    return result.preset or result.instance_name or "custom"


def write_results_csv(result: ExperimentResult, path: Path) -> Path:
    label = _preset_label(result)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for row in result.rows:
            writer.writerow(
                [row.policy, result.goal, label, row.budget, _num(row.pfs), _num(row.ci_low), _num(row.ci_high), row.reps]
            )
    return path


def write_rates_csv(result: ExperimentResult, path: Path) -> Path:
    label = _preset_label(result)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RATES_HEADER)
        for row in result.sampling_rates:
            theory = "" if row.theoretical_rate is None else _num(row.theoretical_rate)
            writer.writerow([row.policy, label, row.arm, _num(row.empirical_rate), theory])
    return path


def write_result_json(result: ExperimentResult, path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(result.model_dump(mode="json"), f, indent=2)
        f.write("\n")
    return path


def write_all(result: ExperimentResult, out_dir) -> list[Path]:
    """Write the results CSV, the sampling-rate CSV and result.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        write_results_csv(result, out / settings.RESULTS_CSV),
        write_rates_csv(result, out / settings.RATES_CSV),
        write_result_json(result, out / settings.RESULT_JSON),
    ]
    logger.info("wrote %s", ", ".join(str(p) for p in paths))
    return paths
