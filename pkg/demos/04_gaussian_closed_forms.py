"""
Gaussian inputs in closed form
==============================

Nothing random here.  Stage rates are log-determinants, the stage
interference covariance Gamma_k shrinks as users are cancelled, and the
linear MMSE receiver satisfies the derivative identity exactly.
"""

import math

from kimmse import gaussian
from kimmse.identities import verify_gaussian
from kimmse.inputs import GaussianInput
from kimmse.model import SystemModel, UserLink
from kimmse.scenarios import load_bundled

pair = SystemModel([UserLink([[1.0]], [[1.0]], GaussianInput(1))] * 2, 1)
print("joint rate at snr=1:", gaussian.mi_joint_gaussian(pair, 1.0), "vs log 3 =", math.log(3))
print("its derivative     :", gaussian.joint_derivative(pair, 1.0))

sc = load_bundled("k2-gaussian-mimo2")
for st in gaussian.gaussian_report(sc.system, 2.0):
    print(f"stage {st.stage}: rate {st.mi:.6f}  derivative {st.mmse:.6f}  frozen-Gamma mmse {st.gamma_scaled_mmse:.6f}")

lt = gaussian.linear_terms(sc.system, 2.0)
print("linear MMSE: mmse_total + psi =", lt.mmse_total + lt.psi, " psi =", lt.psi)

for r in verify_gaussian(sc, 2.0):
    print(r.line())
