"""
Numerical core: network environment, sum-rate objective, CSGD, the dense
network engine, cooperative learning and experiment orchestration.
"""
