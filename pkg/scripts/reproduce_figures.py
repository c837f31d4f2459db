"""Build the default dataset, run the three analyses and print the headline numbers
of every stage.  Writes nothing unless --out is given, in which case it
calls the same code path as ``ghostspec reproduce-paper``."""

import argparse
import time

import numpy as np

from ghostspec.analysis import extract_spectrum
from ghostspec.analysis.spectra import cosine_similarity, normalize
from ghostspec.cli import cmd_reproduce
from ghostspec.config import load_config
from ghostspec.detection import simulate_acquisition
from ghostspec.pipeline import build_dataset, region_rows, run_kmeans, run_lda, run_nmf, plan_runs


def imaging(cfg):
    for run in plan_runs(cfg, include_imaging=True):
        if run.kind != "imaging":
            continue
        scene = cfg.scene(run.scene)
        m = simulate_acquisition(cfg.source, scene.mask, cfg.detector, run.duration, run.seed)
        line = f"  {run.name}: {m.total} counts"
        if scene.is_split:
            lo, up = region_rows(scene, cfg.detector, cfg.plan.guard_rows)
            u, l = extract_spectrum(m, up).values.sum(), extract_spectrum(m, lo).values.sum()
            line += f", upper/lower = {u / l:.3f}"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", help="also write the full reproduce-paper tree here")
    args = ap.parse_args()

    cfg = load_config(args.config)
    t0 = time.perf_counter()
    print("imaging test")
    imaging(cfg)

    ds = build_dataset(cfg, workers=args.workers)
    print(f"dataset: {len(ds.spectra)} spectra ({time.perf_counter() - t0:.1f} s)")
    refs = ds.references
    print("reference spectra, pairwise cosine")
    for i in range(len(refs)):
        for j in range(i + 1, len(refs)):
            c = cosine_similarity(normalize(refs[i]), normalize(refs[j]))
            print(f"  {refs[i].label} / {refs[j].label}: {c:.3f}")

    km = run_kmeans(ds.spectra, refs, cfg.analysis, workers=args.workers)
    curve = km["curve"]
    print("k-means elbow")
    for (k, r), (_, prev) in zip(curve, [(0, np.nan)] + curve[:-1]):
        print(f"  k={k}  residual {r:.4e}  ratio {r / prev:.4f}")
    print(f"  selected k = {km['k_selected']}, centroid cosines {np.round(km['match_similarity'], 4)}")

    nm = run_nmf(ds.spectra, refs, cfg.analysis)
    names = [refs[j].label for j in nm["match"]]
    agree = sum(names[d] == s.label for d, s in zip(nm["dominant"], ds.spectra))
    print(f"NMF: components {names}, cosines {np.round(nm['match_similarity'], 4)}, "
          f"dominant correct {agree}/{len(ds.spectra)}")

    ld = run_lda(ds.spectra, ds.labels(), cfg.analysis)
    print(f"LDA: eigenvalues {np.round(ld['result'].eigenvalues, 1)}, confusion\n{ld['confusion']}")

    if args.out:
        cmd_reproduce(cfg.path, args.out, args.workers)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
