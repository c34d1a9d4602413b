# %% [markdown]
# # Power on a planted signal
#
# The response carries four nonlinear features of columns 2 and 4. A test
# counts towards power only when the search generated one of those exact
# features.

# %%
from afesi.harness import ExperimentSpec, run_experiment, true_features

print("true features:", [f.key for f in true_features()])
spec = ExperimentSpec(mode="power", n=150, m=4, delta=0.6, target_tests=60, base_seed=0)
records, summary = run_experiment(spec)
for method, row in summary["methods"].items():
    print(f"{method:<11} power {row['rate']:.3f} over {row['tests']} matched tests")
print("replications used:", summary["replications_used"])
