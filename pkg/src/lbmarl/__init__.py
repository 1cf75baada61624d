"""Multi-BS cellular load balancing as a Markov game, with attention-based
multi-agent actor-critic learners (MA3C, Robust-MA3C) and baselines."""

__version__ = "0.1.0"
