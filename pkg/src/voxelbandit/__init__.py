"""
voxelbandit: binary topology optimization as a multi-agent bandit problem.
"""

__all__ = [
    "errors", "models", "core", "posenc", "tinynn", "baselines", "marl",
    "gol", "fdtd", "photonics", "io", "analyzer", "visualize",
]
__version__ = "0.1.0"
