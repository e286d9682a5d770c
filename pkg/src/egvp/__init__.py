"""Eigenvector-prediction precoding for massive MIMO."""
