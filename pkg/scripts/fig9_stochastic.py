"""One lognormal realization at sigma = 0.4; pass --seed to choose the ensemble seed."""
from _common import run

if __name__ == "__main__":
    run("rescale", {"recipe": "stochastic"}, "out/stochastic")
