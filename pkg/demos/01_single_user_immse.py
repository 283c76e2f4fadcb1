"""
Single-user I-MMSE check for BPSK
=================================

With one user the derivative of the rate equals the MMSE.  We sweep a few
snr values, estimate both sides on common random numbers and print them
next to each other.
"""

import numpy as np

from kimmse.identities import evaluate_point
from kimmse.scenarios import load_bundled

sc = load_bundled("k1-bpsk")
samples = 50_000

print(f"{'snr':>8s} {'I (nats)':>10s} {'dI/dsnr':>10s} {'mmse':>10s} {'sigma':>9s}")
for snr in np.geomspace(0.1, 10.0, 6):
    pe = evaluate_point(sc.system, snr, samples, sc.seed)
    mi = pe.mi_estimate("joint")
    fd = pe.fd("joint")
    rep = pe.report()
    print(f"{snr:8.3f} {mi.value:10.5f} {fd.value:10.5f} {rep.mmse_total:10.5f} {fd.std_error:9.1e}")

# psi is identically zero here: there is nobody to correlate with
print("psi at snr=1:", evaluate_point(sc.system, 1.0, 4096, sc.seed).report().psi)
