"""Ranking by keypoint activations versus ranking by detector score.

Every person gets a second, shifted proposal that shows only background.
All proposals score the same, so the detector score cannot separate them;
the activation-based score can.

    python3 demos/rescoring_vs_box_score.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from scenarios import rescoring_boxes, rescoring_config  # noqa: E402
from topdown_pose.oracle import load_fixture  # noqa: E402
from topdown_pose.pipeline import run_pipeline  # noqa: E402


def main() -> None:
    aset = load_fixture()
    boxes = rescoring_boxes(aset)
    for scoring in ("box", "keypoint"):
        report = run_pipeline(rescoring_config(scoring), annotations=aset, boxes=boxes).report
        print(f"--- scoring by {scoring}")
        print(report.format_table())


if __name__ == "__main__":
    main()
