# %% [markdown]
# # Expected savings under a sparsity distribution
#
# If the number of changed symbols between two versions is random, how much
# do sparse reads save on average? Here k = 3, so only a single changed
# symbol can be read cheaply.

# %%
from secvault import CodeParams
from secvault.sim import SparsityPmf, expected_io_latest, expected_io_pair

P = CodeParams.cauchy(6, 3)

# %%
for label, pmfs in (("exponential", [SparsityPmf.trunc_exponential(a, 3) for a in (0.5, 1, 2, 4)]),
                    ("poisson", [SparsityPmf.trunc_poisson(l, 3) for l in (0.5, 1, 2, 4)])):
    print(label)
    for pmf in pmfs:
        pair = expected_io_pair(pmf, P)
        basic = expected_io_latest(pmf, P, "basic")
        opt = expected_io_latest(pmf, P, "optimized")
        print(f"  {pmf.label:24s} pair {pair.expected:.3f} reads ({pair.reduction_pct:5.2f}% saved)  "
              f"latest: basic +{basic.increase_pct:5.1f}%  optimized +{opt.increase_pct:5.1f}%")

# %% [markdown]
# The saving is simply the probability of a 1-sparse change divided by 6.
# A steep exponential puts most mass on one change and saves the most.
