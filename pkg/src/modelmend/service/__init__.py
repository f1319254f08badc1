"""HTTP service wrapping the propagation engine (FastAPI)."""
