"""How close can a rank-3 NMF component get to the blank reference?

Filtered spectra are the blank spectrum times a transmission below 1, so
``blank - a*filterA - b*filterB`` stays non-negative for small a, b.  Any
such mixture is an equally exact factor, and the Frobenius fit has no
reason to prefer the pure blank.  This script prints

* the noise-free bound: cosine between the blank and the "widest"
  admissible blank component (largest a, b keeping it non-negative),
* the recovered component cosines for a few seeds and iteration budgets.
"""

import argparse

import numpy as np
from scipy import optimize, stats

from ghostspec.analysis import nmf
from ghostspec.analysis.spectra import cosine_similarity, match_components, normalize, stack
from ghostspec.config import load_config
from ghostspec.pipeline import build_dataset
from ghostspec.source import energy_conserved_idler


def model_spectra(cfg, filter_fwhm):
    lam = cfg.detector.lambda_centers()
    src = cfg.source
    g = stats.norm.pdf(lam, src.center_signal_wavelength, src.spectral_sigma)
    li = energy_conserved_idler(lam, src.pump_wavelength)

    def bp(c):
        return 0.9 * np.exp(-4 * np.log(2) * (li - c) ** 2 / filter_fwhm**2)

    return g, g * bp(800.0), g * bp(820.0)


def cone_edge_cosine(blank, fa, fb):
    # maximise a + b subject to blank - a fa - b fb >= 0, both scaled to unit sum
    blank, fa, fb = (v / v.sum() for v in (blank, fa, fb))
    res = optimize.linprog([-1, -1], A_ub=np.column_stack([fa, fb]), b_ub=blank, bounds=[(0, None)] * 2)
    a, b = res.x
    edge = blank - a * fa - b * fb
    return cosine_similarity(edge, blank), a, b


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 7])
    ap.add_argument("--iters", type=int, nargs="+", default=[5000, 20000])
    args = ap.parse_args()
    cfg = load_config(args.config)

    print("noise-free cone edge (filters at 800/820 nm, peak 0.9)")
    for w in (4, 6, 10, 15, 20):
        c, a, b = cone_edge_cosine(*model_spectra(cfg, w))
        print(f"  filter fwhm {w:>2} nm: cosine {c:.3f} (a = {a:.3f}, b = {b:.3f})")

    ds = build_dataset(cfg)
    V = stack([normalize(s) for s in ds.spectra])
    R = stack([normalize(s) for s in ds.references])
    print("recovered components on the default dataset")
    for it in args.iters:
        for seed in args.seeds:
            fit = nmf(V, 3, seed, max_iter=it, tol=0.0)
            assign, sims = match_components(fit.H, R)
            labels = [ds.references[j].label for j in assign]
            pairs = ", ".join(f"{l} {s:.4f}" for l, s in sorted(zip(labels, sims)))
            print(f"  iters {it:>6} seed {seed}: {pairs}; residue {fit.residue_norm:.3e}")


if __name__ == "__main__":
    main()
