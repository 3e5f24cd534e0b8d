"""Two-species Vlasov-Poisson-Landau kinetics and the massless-electron limit."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.0.0"
