"""riemdiff: decentralized Riemannian diffusion optimization with diminishing steps.

Library layout (one module per subsystem):

* :mod:`riemdiff.manifolds` -- points, tangents, Euclidean/Sphere/Grassmann geometry
* :mod:`riemdiff.curvature` -- comparison constants, lemma checkers, theorem bounds
* :mod:`riemdiff.network`   -- graphs, Metropolis mixing matrices, sigma_2
* :mod:`riemdiff.frechet`   -- Frechet (Karcher) mean and variance
* :mod:`riemdiff.problems`  -- PCA / Karcher objectives, stochastic oracles, data
* :mod:`riemdiff.optimizer` -- the two-step diffusion iteration and traces
* :mod:`riemdiff.runner`    -- experiment configs, CSV/JSON outputs, CLI
"""

__version__ = "0.1.0"
