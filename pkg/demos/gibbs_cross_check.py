"""Long-run dynamics against pCN samples of the Gibbs-type target.

With white noise the Galerkin system keeps exp(-mean F_n) d mu^c invariant
up to time discretization, so low-mode means and variances from a long
ensemble should agree with a pCN chain on that density.
"""
from spinodal import GibbsTarget, ModelParams, compare_invariant

p = ModelParams(lam=1.0, M=16, dt=1e-4)
reports, chain = compare_invariant(
    p, GibbsTarget.for_params(p, "finite_n"), T_long=1.0, burn_in=0.2,
    paths=128, chain_steps=5000, seed=3, chains=32, beta=0.5, modes=3,
)
print(f"pCN acceptance {chain.acceptance:.2f}, {len(chain.samples)} samples kept")
for r in reports:
    print(r.line())
