"""Original and rescaled velocity and shape residual for phi_i linear from 0.15 to -0.15."""
from _common import run

if __name__ == "__main__":
    run("rescale", {"recipe": "phi"}, "out/gradient_phi")
