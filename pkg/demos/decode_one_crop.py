"""Walk one person through the crop transform, oracle tensors, voting and decoding.

    python3 demos/decode_one_crop.py
"""

import numpy as np

from topdown_pose.decoder import aggregate, decode_crop, rescore
from topdown_pose.geometry import make_crop_transform
from topdown_pose.oks import oks
from topdown_pose.oracle import ground_truth_box, load_fixture, oracle_tensors, perturb, NoiseConfig


def main() -> None:
    aset = load_fixture()
    person = aset.poses[0]
    box = ground_truth_box(person)
    t = make_crop_transform(box)
    print(f"box {box.as_xywh()} -> crop source {np.round(t.source_box.as_xywh(), 2).tolist()}, scale {t.scale:.3f}")

    heat, off = oracle_tensors(person, t)
    f = aggregate(heat, off, 25.0)
    print(f"heatmap mass {heat.sum():.0f}, activation mass {f.sum():.3f}, rescore {rescore(f):.4f}")

    det = decode_crop(heat, off, t, 25.0, box, person.image_id)
    print(f"clean decode: OKS vs ground truth {oks(det, person):.4f}")

    noisy_heat, noisy_off = perturb(heat, off, NoiseConfig(heatmap_flip_prob=0.1, offset_sigma=5.0),
                                    np.random.default_rng(0))
    noisy = decode_crop(noisy_heat, noisy_off, t, 25.0, box, person.image_id)
    print(f"noisy decode: OKS {oks(noisy, person):.4f}, score {noisy.instance_score:.4f}")


if __name__ == "__main__":
    main()
