# %% [markdown]
# # From a CSV file to a report
#
# The command line does the same thing as this script:
#
#     afesi test data.csv --target y --seed 7

# %%
import json
import tempfile
from pathlib import Path

import numpy as np

from afesi import CovarianceModel, Dataset, SearchConfig, analyze, estimate_variance
from afesi.harness import load_csv

rng = np.random.default_rng(0)
X = rng.standard_normal((150, 3))
y = np.sqrt(np.abs(X[:, 1])) * 2 + rng.standard_normal(150) * 0.7
path = Path(tempfile.mkdtemp()) / "data.csv"
path.write_text("a,b,c,y\n" + "\n".join(",".join(map(str, (*r, v))) for r, v in zip(X, y)) + "\n")

# %%
X, y, names = load_csv(path, "y")
data = Dataset(X, y)
# the noise level is unknown here, so plug in the residual variance
Sigma = CovarianceModel.scaled(data.n, estimate_variance(data))
report = analyze(data, Sigma, SearchConfig(seed=7), methods=("proposed", "naive", "bonferroni"))

# %%
for f in report["features"]:
    ps = {r["method"]: round(r["p_selective"], 4) for r in f["results"]}
    print(f["feature"], ps)
print(json.dumps(report["features"][0]["results"][0], indent=1)[:400])
