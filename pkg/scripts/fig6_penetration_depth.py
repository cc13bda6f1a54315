"""Stationary profiles and penetration depths on the 4 x 4 grid of B and x0."""
from _common import run

if __name__ == "__main__":
    run("stationary", {"recipe": "fig6"}, "out/fig6_depth")
