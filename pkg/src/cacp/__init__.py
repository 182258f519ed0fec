"""Closest Point and Curvature-Augmented Closest Point solvers for surface PDEs."""
from cacp.kernels import BACKEND
from cacp.grid import GridSpec, BandMap, NodeClass, Label, build_grid, classify_nodes, enumerate_band, build_band
from cacp.surface import Circle, Clover, Sphere, Surface, make_surface
from cacp.assembly import SparseSystem, assemble, assemble_cp, assemble_cacp_2d, assemble_cacp_sphere
from cacp.solver import SolveReport, solve, estimate_cond1, error_norms, band_errors

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "GridSpec", "BandMap", "NodeClass", "Label", "build_grid", "classify_nodes",
    "enumerate_band", "build_band", "Circle", "Clover", "Sphere", "Surface", "make_surface",
    "SparseSystem", "assemble", "assemble_cp", "assemble_cacp_2d", "assemble_cacp_sphere",
    "SolveReport", "solve", "estimate_cond1", "error_norms", "band_errors",
]
