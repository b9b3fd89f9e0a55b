# Solver, Picard iteration, analytic bounds and verification reports
