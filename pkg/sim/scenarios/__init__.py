# Simulation scenarios package
