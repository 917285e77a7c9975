"""Simulation and verification of the Levy-Ito decomposition in a coordinate model."""
