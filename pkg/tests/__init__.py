"""
netq test suite: max-plus kernels, networks, service models, dynamics,
bounds, table reproduction and the command line.
"""
