"""
Two users: the derivative needs the cross term
==============================================

For a multiple access channel the per-user MMSEs alone overshoot the rate
derivative.  Adding psi, built from cross-correlations of the posterior
means, closes the gap.
"""

from kimmse.identities import verify_theorem1
from kimmse.scenarios import load_bundled

sc = load_bundled("k2-bpsk").replace(sample_budget=50_000)

for snr in (0.3, 1.0, 3.0):
    r = verify_theorem1(sc, snr)
    c = r.components
    print(f"snr={snr:4.1f}  dI/dsnr={r.lhs:.4f}  mmse_total={c['mmse_total']:.4f}  "
          f"psi={c['psi']:+.4f}  sum={r.rhs:.4f}  {'PASS' if r.passed else 'FAIL'}")

# A MIMO pair with QPSK inputs goes through the same code path.
mimo = load_bundled("k2-qpsk-mimo2").replace(sample_budget=20_000)
print(verify_theorem1(mimo, 1.0).line())
