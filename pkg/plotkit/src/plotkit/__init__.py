"""plotkit: renders experiment trace CSVs into convergence figures.

Consumes the aggregate CSV format produced by the riemdiff runner (columns
t, consensus, consensus_db, frechet_var, msd, msd_db, fgap_bar,
bound_consensus, bound_gap, clip_count, flags) purely as files; no code
dependency on the producer.
"""

from .render import (PlotSpec, RenderResult, SchemaMismatch, render,
                     render_two_panel)

__all__ = ["PlotSpec", "RenderResult", "SchemaMismatch", "render",
           "render_two_panel"]
__version__ = "0.1.0"
