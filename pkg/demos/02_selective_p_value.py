# %% [markdown]
# # Testing a generated feature after the search
#
# A plain z-test ignores that the feature was picked because it fit well.
# The selective test conditions on the search having produced exactly this
# feature set.

# %%
import numpy as np

from afesi import CovarianceModel, Dataset, SearchConfig, classical_z_p_value, run_afe, selective_test

rng = np.random.default_rng(7)
X = rng.standard_normal((100, 4))
y = rng.standard_normal(100)  # no signal at all
data = Dataset(X, y)
Sigma = CovarianceModel.identity(100)
config = SearchConfig(seed=0)
afe = run_afe(data, Sigma, config)
print("generated:", afe.keys)

# %%
for j in range(data.m + 1, data.m + afe.k + 1):
    r = selective_test(data, Sigma, config, j, afe=afe)
    p_naive = classical_z_p_value(r.stat, r.sigma_eta_sq)
    print(f"{r.feature:<28} naive p={p_naive:.3f}  selective p={r.p_selective:.3f}  calls={r.n_afe_calls}")

# %% [markdown]
# The truncation set is a union of intervals on the line through the data.
# Only there does the search return the same features.

# %%
print(r.Z)
print(r.to_json()["intervals"])
