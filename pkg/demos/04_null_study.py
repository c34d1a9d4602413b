# %% [markdown]
# # A small null study
#
# Under the null every valid method rejects about 5% of the time. The naive
# z-test does not, because the features were chosen on the same data.
# The full-size study is `afesi type1 --reps 1000 --out results/`.

# %%
from afesi.harness import ExperimentSpec, run_experiment

spec = ExperimentSpec(mode="type1", n=100, m=4, reps=200, base_seed=0)
records, summary = run_experiment(spec)
for method, row in summary["methods"].items():
    print(f"{method:<11} rejection rate {row['rate']:.3f} (se {row['se']:.3f}, {row['tests']} tests)")
