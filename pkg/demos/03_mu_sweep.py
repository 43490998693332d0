# %% [markdown]
# # Average reads for a surviving 1-sparse difference
#
# When nodes fail, the reader may not find 2 suitable shares and has to fall
# back to k = 3. We estimate the mean number of reads by simulation and
# compare with the exact value.

# %%
from secvault import CodeParams
from secvault.resilience import FailureModel
from secvault.sim import TrialConfig, exact_mu, monte_carlo_mu

S = CodeParams.cauchy(6, 3, systematic=True)
N = CodeParams.cauchy(6, 3)

# %%
print(f"{'p':>5} {'mc sys':>9} {'exact sys':>10} {'nonsys':>7}")
for p in (0.01, 0.05, 0.1, 0.15, 0.2):
    est = monte_carlo_mu(TrialConfig(S, FailureModel(p), 100_000, seed=0), 1)
    mu, _ = exact_mu(S, 1, p)
    ns = monte_carlo_mu(TrialConfig(N, FailureModel(p), 100_000, seed=0), 1)
    print(f"{p:5.2f} {est.mu:9.5f} {mu:10.5f} {ns.mu:7.1f}")

# %% [markdown]
# The non-systematic code always finds two parity-like rows, so it stays at
# exactly 2 reads. The systematic code drifts upward as failures grow.
