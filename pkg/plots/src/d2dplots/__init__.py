"""Figure rendering for the D2D cooperation experiment CSVs."""

from .figures import (FigureDataError, FigureSpec, coop_spec, heuristics_spec,
                      render_three_panel)

__version__ = "0.1.0"
