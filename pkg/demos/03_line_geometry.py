# %% [markdown]
# # The line, the quadratics and the truncation set
#
# Fixing the nuisance part of the response leaves one free number, the test
# statistic z. Each AIC comparison becomes a quadratic inequality in z.

# %%
import numpy as np

from afesi import AugmentedDesign, CovarianceModel, Dataset, SearchConfig, SearchContext, run_afe, test_direction
from afesi.inference import comparison_to_quadratic, interval_for_z, line_search, nuisance_decompose, solve_quadratic_leq

rng = np.random.default_rng(2)
X = rng.standard_normal((40, 3))
y = 0.6 * np.sin(X[:, 0]) + rng.standard_normal(40)
data = Dataset(X, y)
Sigma = CovarianceModel.ar_power(40, 0.5)
config = SearchConfig(seed=1)
ctx = SearchContext(X, Sigma, config)
afe = run_afe(data, Sigma, config, ctx)

direction = test_direction(AugmentedDesign(X, afe.generated), data.m + 1, Sigma)
line = nuisance_decompose(data.y, direction.eta, Sigma)
print("z_obs =", round(line.z_obs, 4), " sd =", round(line.sigma_eta_sq**0.5, 4))

# %%
first = next(iter(afe.trace))
q = comparison_to_quadratic(first.left, first.right, line, Sigma)
print("first comparison as a quadratic:", q)
print("solution set:", solve_quadratic_leq(q))

# %%
print("interval around z_obs:", interval_for_z(afe.trace, line, line.z_obs, Sigma))
ls = line_search(data, Sigma, config, line, afe.generated, ctx)
print("truncation set:", ls.Z, " search calls:", ls.n_afe_calls)
