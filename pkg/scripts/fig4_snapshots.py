"""Profile snapshots for the six uniform-pathway panels, with stationary profiles."""
from _common import run

if __name__ == "__main__":
    run("simulate", {"recipe": "fig4"}, "out/fig4")
