"""OKS-NMS threshold sweep on a fixture with duplicated proposals.

    python3 demos/oks_nms_sweep.py
"""

from topdown_pose.oracle import load_fixture
from topdown_pose.pipeline import PipelineConfig, sweep, sweep_csv


def main() -> None:
    cfg = PipelineConfig(noise_duplicates=3.0, noise_jitter=0.3, noise_sigma=10.0, seed=0)
    rows = sweep(cfg, "oks_nms", [0.1, 0.3, 0.5, 0.7, 0.9], annotations=load_fixture())
    print(sweep_csv(rows), end="")


if __name__ == "__main__":
    main()
