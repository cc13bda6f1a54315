"""Asymptotic speed over the bistable window for B in {1.5, 3, 5, 10}, plus the B=3 velocity series."""
from _common import run

if __name__ == "__main__":
    run("wavespeed", {"recipe": "fig5"}, "out/fig5")
