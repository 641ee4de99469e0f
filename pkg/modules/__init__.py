# Robust-MPC Module Package (Sequential Convex Restriction)
__version__ = "1.0.0"
