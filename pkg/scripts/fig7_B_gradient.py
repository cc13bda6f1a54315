"""Original and rescaled velocity and shape residual for B_i log-spaced in [1.02, 201]."""
from _common import run

if __name__ == "__main__":
    run("rescale", {"recipe": "B"}, "out/gradient_B")
