"""Heterogeneity sweep: VISE and RISE quartiles and parameter extrema over sigma in [0, 1]. Edit realizations for the full ensemble."""
from _common import run

if __name__ == "__main__":
    run("sweep", {"ensemble": {"realizations": 20}}, "out/sweep")
