"""Figure rendering for the transit-simulation experiment outputs."""

from .figures import plot_heatmap, plot_init_final, plot_trends
from .io import EmptyInputError, SchemaMismatchError

__version__ = "0.1.0"
