"""Noise-sweep benchmark for the complexity score.

The sweep generates one synthetic blob task per noise level (same seed, same
class layout) and measures the complexity score and the time taken to
compute it.  More pixel noise makes a task harder, so ``C_all`` is expected
to fall strictly as the noise grows.  The script prints a table and appends
the aggregated results to ``docs/leaderboard.md``.

Usage:

    python -m cnn_recommender.run_benchmark --noise 0.05,0.15,0.30 --seed 0 [--author NAME]
"""
from __future__ import annotations

import argparse
import pathlib
import time
from datetime import date
from typing import Dict, List, Optional, Sequence

from .complexity import dataset_complexity
from .config import setup_logging
from .ingest import synth_blob_task

DEFAULT_NOISE_LEVELS = (0.05, 0.15, 0.30)
LEADERBOARD = pathlib.Path(__file__).resolve().parents[1] / "docs" / "leaderboard.md"


def run_noise_sweep(
    noise_levels: Sequence[float] = DEFAULT_NOISE_LEVELS,
    seed: int = 0,
    class_count: int = 10,
    per_class: int = 100,
    workers: Optional[int] = None,
) -> List[Dict[str, float]]:
    """Score one synthetic task per noise level.

    Returns
    -------
    list of dict
        ``noise``, ``c_all``, ``accuracy`` (nearest-centroid training rate)
        and ``time_ms`` per level, in the order given.
    """
    results: List[Dict[str, float]] = []
    for noise in noise_levels:
        dataset = synth_blob_task(class_count, per_class, noise_sigma=noise, seed=seed)
        start = time.perf_counter()
        report = dataset_complexity(dataset, workers=workers)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        results.append({
            'noise': noise,
            'c_all': report.c_all,
            'accuracy': report.centroid_accuracy,
            'time_ms': round(elapsed_ms, 2),
        })
    return results


def is_monotone(results: Sequence[Dict[str, float]]) -> bool:
    """True when ``c_all`` strictly decreases as noise increases."""
    ordered = sorted(results, key=lambda r: r['noise'])
    return all(a['c_all'] > b['c_all'] for a, b in zip(ordered, ordered[1:]))


def print_report(results: List[Dict[str, float]]) -> None:
    print(f"{'Noise':<8}{'C_all':<12}{'Accuracy':<11}{'Time (ms)':<10}")
    print('-' * 41)
    for r in results:
        print(f"{r['noise']:<8g}{r['c_all']:<12.6f}{r['accuracy']:<11.4f}{r['time_ms']:<10}")
    print('-' * 41)
    print(f"Monotone (C_all falls as noise grows): {'yes' if is_monotone(results) else 'NO'}")


def update_leaderboard(
    results: List[Dict[str, float]],
    seed: int,
    author: str = 'anonymous',
    path: Optional[pathlib.Path] = None,
) -> None:
    """Append one row per sweep to the Markdown leaderboard.

    The file is created with a header row if it does not exist.
    """
    lb_path = path or LEADERBOARD
    levels = ' / '.join(f"{r['noise']:g}" for r in results)
    scores = ' / '.join(f"{r['c_all']:.4f}" for r in results)
    avg_time = sum(r['time_ms'] for r in results) / len(results) if results else 0.0
    row = [levels, scores, str(seed), author, f"{avg_time:.2f}", 'yes' if is_monotone(results) else 'no', date.today().isoformat()]
    if not lb_path.exists():
        lb_path.parent.mkdir(parents=True, exist_ok=True)
        with lb_path.open('w', encoding='utf-8') as f:
            f.write('| Noise levels | C_all | Seed | Author | Avg time (ms) | Monotone | Date |\n')
            f.write('|-------------|-------|------|--------|---------------|----------|------|\n')
    with lb_path.open('a', encoding='utf-8') as f:
        f.write('|' + '|'.join(row) + '|\n')


def main(argv: Optional[List[str]] = None) -> None:
    parser = argparse.ArgumentParser(description='Complexity-score noise sweep on synthetic blob tasks.')
    parser.add_argument('--noise', type=str, default=','.join(str(v) for v in DEFAULT_NOISE_LEVELS),
                        help='Comma-separated pixel noise levels')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--classes', type=int, default=10)
    parser.add_argument('--per-class', type=int, default=100)
    parser.add_argument('--author', type=str, default='anonymous', help='Your name or handle for the leaderboard')
    parser.add_argument('--no-leaderboard', action='store_true', help='Only print the table')
    parser.add_argument('-v', '--verbose', action='store_true')
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    levels = [float(v) for v in args.noise.split(',') if v.strip()]
    results = run_noise_sweep(levels, seed=args.seed, class_count=args.classes, per_class=args.per_class)
    print_report(results)
    if not args.no_leaderboard:
        update_leaderboard(results, args.seed, args.author)


if __name__ == '__main__':
    main()
