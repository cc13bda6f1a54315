"""Original and rescaled velocity and shape residual for alpha_i linear in [1, 5]."""
from _common import run

if __name__ == "__main__":
    run("rescale", {"recipe": "alpha"}, "out/gradient_alpha")
