#!/usr/bin/env python3
"""
Semantic MAP against semantic code length, median over seeds.
Usage: python scripts/sweep_code_length.py [--config configs/desk.yaml] [--bits 16 32 48] [--seeds 7 8 9]
"""
import argparse
import logging
import statistics
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.commands.impl_retrieval import encode_scenes
from app.core.config import load_run_config
from app.core.logging import configure_logging
from app.evaluation.protocol import evaluate_semantic
from app.evaluation.report import report_values
from app.model.network import build_model
from app.synthdata.dataset_io import generate_dataset
from app.training.trainer import train

log = logging.getLogger("sweep")

TOLERANCE = 0.02


def semantic_map(cfg) -> float:
    dataset = generate_dataset(cfg)
    truth = {s.id: s.labels for split in ("database", "query") for s in dataset[split]}
    model = build_model(train(dataset["train"], cfg, run_id=f"q{cfg.model.semantic_bits}-s{cfg.seed}").params)
    rows = evaluate_semantic(encode_scenes(model, dataset["query"]), encode_scenes(model, dataset["database"]),
                             truth, cfg.evaluation.depths)
    return report_values(rows)["map"]


def main():
    parser = argparse.ArgumentParser(description="Sweep the semantic code length")
    parser.add_argument("--config", type=Path, default=project_root / "configs" / "desk.yaml")
    parser.add_argument("--set", dest="overrides", action="append", default=[])
    parser.add_argument("--bits", type=int, nargs="+", default=[16, 32, 48])
    parser.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9])
    args = parser.parse_args()

    configure_logging()
    medians = []
    for q in args.bits:
        values = []
        for seed in args.seeds:
            cfg = load_run_config(args.config, args.overrides + [f"model.semantic_bits={q}", f"seed={seed}"])
            values.append(semantic_map(cfg))
            log.info("q=%d seed=%d map=%.4f", q, seed, values[-1])
        medians.append(statistics.median(values))
        print(f"q={q:<4} median MAP {medians[-1]:.4f}  ({', '.join(f'{v:.4f}' for v in values)})")

    monotone = all(later >= earlier - TOLERANCE for earlier, later in zip(medians, medians[1:]))
    print(f"[{'PASS' if monotone else 'FAIL'}] MAP nondecreasing in code length within {TOLERANCE}")
    sys.exit(0 if monotone else 1)


if __name__ == "__main__":
    main()
